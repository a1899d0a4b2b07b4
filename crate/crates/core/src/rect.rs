//! Principal-axis bounding boxes over activation sets.
//!
//! A box lives in rotated coordinates `x̃ = R x`, where the rows of `R` are
//! the right-singular vectors of the mean-centred point matrix. The rotation
//! is applied to the raw (uncentred) points so that `wᵀx = (R w)ᵀ(R x)`
//! holds exactly in real arithmetic.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::types::{ActivationSet, ClassifierHead};

/// Largest tolerated entry of `R Rᵀ − I` when accepting an external rotation.
pub const ORTHOGONALITY_TOL: f64 = 1e-6;

/// Slack used by [`rect_contains`] and the construction invariant.
const CONTAIN_EPS: f64 = 1e-9;

/// Orthogonal `d×d` matrix whose rows are the principal axes. The identity
/// is kept implicit so that it costs nothing in high dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    dim: usize,
    matrix: Option<DMatrix<f64>>,
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: None }
    }

    pub(crate) fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let dim = matrix.nrows();
        if matrix == DMatrix::identity(dim, dim) {
            Self::identity(dim)
        } else {
            Self {
                dim,
                matrix: Some(matrix),
            }
        }
    }

    /// Builds a rotation from its rows, rejecting non-orthogonal input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::Empty("rotation"));
        }
        for row in rows {
            ensure_dim(d, row.len())?;
            ensure_finite(row, "rotation")?;
        }
        let rot = Self::from_matrix(DMatrix::from_fn(d, d, |i, j| rows[i][j]));
        let err = rot.orthogonality_error();
        if err > ORTHOGONALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "rotation is not orthogonal (max |RRᵀ − I| = {err:e})"
            )));
        }
        Ok(rot)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_none()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match &self.matrix {
            Some(m) => m.clone(),
            None => DMatrix::identity(self.dim, self.dim),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.to_matrix()
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// `max |R Rᵀ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        match &self.matrix {
            None => 0.0,
            Some(m) => (m * m.transpose() - DMatrix::<f64>::identity(self.dim, self.dim)).amax(),
        }
    }

    /// Original → rotated coordinates, `R x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), x.len())?;
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match &self.matrix {
            None => x.to_vec(),
            Some(m) => (m * DVector::from_column_slice(x)).as_slice().to_vec(),
        }
    }

    /// Rotated → original coordinates, `Rᵀ x̃`.
    pub fn apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), x.len())?;
        Ok(match &self.matrix {
            None => x.to_vec(),
            Some(m) => m.tr_mul(&DVector::from_column_slice(x)).as_slice().to_vec(),
        })
    }
}

/// Principal axes of `points`, completed to a full orthonormal basis.
///
/// Rows are ordered by decreasing singular value; each row's first entry of
/// non-negligible magnitude is made positive. A single point or a set of
/// identical points yields the identity.
pub fn fit_rotation(points: &ActivationSet) -> Result<Rotation> {
    let (n, d) = (points.len(), points.dim());
    if n == 1 {
        return Ok(Rotation::identity(d));
    }
    let mut mean = vec![0.0; d];
    for row in points.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| points.row(i)[j] - mean[j]);
    if centred.amax() == 0.0 {
        return Ok(Rotation::identity(d));
    }

    let svd = centred.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::InvalidParameter("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let s_max = svd.singular_values[order[0]];
    let rank_tol = s_max * (n.max(d) as f64) * f64::EPSILON;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    for &k in &order {
        if svd.singular_values[k] <= rank_tol {
            break;
        }
        let mut axis: Vec<f64> = v_t.row(k).iter().copied().collect();
        normalise(&mut axis);
        orient(&mut axis);
        basis.push(axis);
    }
    complete_basis(&mut basis, d);

    let matrix = DMatrix::from_fn(d, d, |i, j| basis[i][j]);
    Ok(Rotation::from_matrix(matrix))
}

/// Extends an orthonormal set to `d` vectors by Gram–Schmidt over the
/// standard basis.
fn complete_basis(basis: &mut Vec<Vec<f64>>, d: usize) {
    for j in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        // two passes of classical Gram–Schmidt
        for _ in 0..2 {
            for b in basis.iter() {
                let p: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= p * bi);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            orient(&mut v);
            basis.push(v);
        }
    }
}

fn normalise(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Sign convention: first entry with |v_i| > 1e-10 is positive.
fn orient(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Head expressed in rotated coordinates: `w̃ = R w`, bias unchanged.
pub fn rotate_head(head: &ClassifierHead, rotation: &Rotation) -> Result<ClassifierHead> {
    ensure_dim(rotation.dim(), head.dim())?;
    ClassifierHead::new(rotation.apply_unchecked(head.weights()), head.bias())
}

/// Axis-aligned box in rotated coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSpec {
    rotation: Rotation,
    lower: Vec<f64>,
    upper: Vec<f64>,
    member_count: usize,
    cluster_id: Option<i64>,
}

impl RectSpec {
    pub fn new(
        rotation: Rotation,
        lower: Vec<f64>,
        upper: Vec<f64>,
        member_count: usize,
        cluster_id: Option<i64>,
    ) -> Result<Self> {
        let d = rotation.dim();
        ensure_dim(d, lower.len())?;
        ensure_dim(d, upper.len())?;
        ensure_finite(&lower, "lower bounds")?;
        ensure_finite(&upper, "upper bounds")?;
        check_bounds(&lower, &upper)?;
        Ok(Self {
            rotation,
            lower,
            upper,
            member_count,
            cluster_id,
        })
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn member_count(&self) -> usize {
        self.member_count
    }

    pub fn cluster_id(&self) -> Option<i64> {
        self.cluster_id
    }

    /// Product of side lengths in rotated coordinates.
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }
}

pub(crate) fn check_bounds(lower: &[f64], upper: &[f64]) -> Result<()> {
    for (dim, (&l, &u)) in lower.iter().zip(upper).enumerate() {
        if l > u {
            return Err(Error::BoundViolation {
                dim,
                lower: l,
                upper: u,
            });
        }
    }
    Ok(())
}

/// Tightest box around `points` in the coordinates given by `rotation`.
pub fn build_single_rect(points: &ActivationSet, rotation: &Rotation) -> Result<RectSpec> {
    ensure_dim(rotation.dim(), points.dim())?;
    let d = points.dim();
    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    for row in points.rows() {
        let r = rotation.apply_unchecked(row);
        for i in 0..d {
            lower[i] = lower[i].min(r[i]);
            upper[i] = upper[i].max(r[i]);
        }
    }
    RectSpec::new(rotation.clone(), lower, upper, points.len(), None)
}

/// Fits the principal-axis rotation and the box in one step.
pub fn single_rect(points: &ActivationSet) -> Result<RectSpec> {
    let rotation = fit_rotation(points)?;
    build_single_rect(points, &rotation)
}

/// Closed-box membership in rotated coordinates with a relative slack of
/// `1e-9·(1 + |bound|)`.
pub fn rect_contains(spec: &RectSpec, x: &[f64]) -> Result<bool> {
    let r = spec.rotation.apply(x)?;
    Ok(r.iter()
        .zip(spec.lower.iter().zip(&spec.upper))
        .all(|(&v, (&l, &u))| {
            v >= l - CONTAIN_EPS * (1.0 + l.abs()) && v <= u + CONTAIN_EPS * (1.0 + u.abs())
        }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringParams {
    pub min_cluster_size: usize,
    pub metric: String,
}

/// One box per cluster, each with its own rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRectSpec {
    rects: Vec<RectSpec>,
    pub clustering: Option<ClusteringParams>,
    pub noise_count: usize,
    pub labels: Option<Vec<i64>>,
}

impl MultiRectSpec {
    pub fn new(rects: Vec<RectSpec>, noise_count: usize) -> Result<Self> {
        let first = rects.first().ok_or(Error::Empty("multi-rect spec"))?;
        let d = first.dim();
        for r in &rects {
            ensure_dim(d, r.dim())?;
        }
        Ok(Self {
            rects,
            clustering: None,
            noise_count,
            labels: None,
        })
    }

    pub fn rects(&self) -> &[RectSpec] {
        &self.rects
    }

    pub fn dim(&self) -> usize {
        self.rects[0].dim()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        for r in &self.rects {
            if rect_contains(r, x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Builds one box per non-noise label (`-1` is noise). Rects are ordered by
/// ascending label.
pub fn build_multi_rect(points: &ActivationSet, labels: &[i64]) -> Result<MultiRectSpec> {
    ensure_dim(points.len(), labels.len())?;
    let mut ids: Vec<i64> = labels.iter().copied().filter(|&l| l >= 0).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::AllNoise);
    }
    let noise_count = labels.iter().filter(|&&l| l < 0).count();
    let mut rects = Vec::with_capacity(ids.len());
    for id in ids {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == id).collect();
        let members = points.select(&idx)?;
        let mut rect = single_rect(&members)?;
        rect.cluster_id = Some(id);
        rects.push(rect);
    }
    let mut spec = MultiRectSpec::new(rects, noise_count)?;
    spec.labels = Some(labels.to_vec());
    Ok(spec)
}
