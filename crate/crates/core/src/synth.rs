//! Seeded synthetic data for fixtures, tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{ActivationSet, ClassifierHead};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn unit_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `per_center` isotropic Gaussian points around each centre. Returns the
/// points and the index of the centre each was drawn from.
pub fn gaussian_blobs(
    centers: &[Vec<f64>],
    std: f64,
    per_center: usize,
    seed: u64,
) -> Result<(ActivationSet, Vec<usize>)> {
    let d = centers.first().ok_or(Error::Empty("blob centres"))?.len();
    let mut rng = rng(seed);
    let mut rows = Vec::with_capacity(centers.len() * per_center);
    let mut origin = Vec::with_capacity(rows.capacity());
    for (c, center) in centers.iter().enumerate() {
        if center.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: center.len(),
            });
        }
        for _ in 0..per_center {
            rows.push(center.iter().map(|m| m + std * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>());
            origin.push(c);
        }
    }
    Ok((ActivationSet::from_rows(&rows)?, origin))
}

/// Two bundles of directions around orthogonal axes, with random radii so
/// only the angle separates them.
pub fn cosine_bundles(per_bundle: usize, d: usize, spread: f64, seed: u64) -> Result<(ActivationSet, Vec<usize>)> {
    if d < 2 {
        return Err(Error::InvalidParameter("bundles need d >= 2".into()));
    }
    let mut rng = rng(seed);
    let mut rows = Vec::with_capacity(2 * per_bundle);
    let mut origin = Vec::with_capacity(2 * per_bundle);
    for b in 0..2 {
        for _ in 0..per_bundle {
            let radius = rng.random_range(0.5..5.0);
            let mut v: Vec<f64> = (0..d).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect();
            v[b] += 1.0;
            rows.push(v.into_iter().map(|x| x * radius).collect::<Vec<_>>());
            origin.push(b);
        }
    }
    Ok((ActivationSet::from_rows(&rows)?, origin))
}

/// Head with standard-normal weights and bias.
pub fn random_head(d: usize, seed: u64) -> Result<ClassifierHead> {
    let mut rng = rng(seed);
    let w = gaussian_vec(&mut rng, d);
    let b = rng.sample(StandardNormal);
    ClassifierHead::new(w, b)
}

/// Labelled harmful/benign activations and a head that separates them.
/// Harmful points sit around `+offset·e₀`, benign ones around `−offset·e₀`.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub harmful: ActivationSet,
    pub benign: ActivationSet,
    pub head: ClassifierHead,
}

pub fn fixture(n_per_class: usize, d: usize, seed: u64) -> Result<Fixture> {
    if d == 0 || n_per_class == 0 {
        return Err(Error::InvalidParameter("fixture needs d > 0 and n > 0".into()));
    }
    let offset = 3.0;
    let mut pos = vec![0.0; d];
    pos[0] = offset;
    let mut neg = vec![0.0; d];
    neg[0] = -offset;
    // two harmful sub-populations so multi-rect clustering has structure
    let mut pos_b = pos.clone();
    if d > 1 {
        pos_b[1] = offset;
    }
    let half = n_per_class / 2;
    let (h1, _) = gaussian_blobs(&[pos], 0.5, n_per_class - half, seed)?;
    let harmful = if half > 0 {
        let (h2, _) = gaussian_blobs(&[pos_b], 0.5, half, seed.wrapping_add(1))?;
        let rows: Vec<&[f64]> = h1.rows().chain(h2.rows()).collect();
        ActivationSet::from_rows(&rows)?
    } else {
        h1
    };
    let (benign, _) = gaussian_blobs(&[neg], 0.5, n_per_class, seed.wrapping_add(2))?;
    let mut w = vec![0.0; d];
    w[0] = 1.0;
    let head = ClassifierHead::new(w, 0.0)?;
    Ok(Fixture {
        harmful: harmful.with_labels(vec![1; n_per_class])?,
        benign: benign.with_labels(vec![0; n_per_class])?,
        head,
    })
}
