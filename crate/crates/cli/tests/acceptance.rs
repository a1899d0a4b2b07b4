//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use guardcert::gmm::{certify_gmm, fit_gmm, Covariance, CovarianceKind, GmmSpec};
use guardcert::io::json::{parse_report, ReportResult};
use guardcert::metrics::{pessimistic_threshold, roc};
use guardcert::rect::{rotate_head, single_rect, RectSpec, Rotation};
use guardcert::types::{ActivationSet, ClassifierHead};
use guardcert::verify::{verify_rect, verify_single, Verdict};
use guardcert::{cluster::hdbscan, synth};
use nalgebra::DMatrix;
use oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| scale * normal(rng)).collect()).collect()
}

fn matvec(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn mat_t_vec(rows: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let d = rows[0].len();
    let mut out = vec![0.0; d];
    for (r, &xi) in rows.iter().zip(x) {
        for j in 0..d {
            out[j] += r[j] * xi;
        }
    }
    out
}

fn logit(w: &[f64], b: f64, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b
}

fn corner_oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let d = 2 + i % 11;
        let (rect, w, b) = if i % 2 == 0 {
            let lower: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.0..2.0)).collect();
            let rect = RectSpec::new(Rotation::identity(d), lower, upper, 0, None).unwrap();
            let w: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            (rect, w, normal(&mut rng))
        } else {
            let pts = ActivationSet::from_rows(&gaussian_rows(&mut rng, d + 5, d, 1.5)).unwrap();
            let rect = single_rect(&pts).unwrap();
            let head = ClassifierHead::new((0..d).map(|_| normal(&mut rng)).collect(), normal(&mut rng)).unwrap();
            let rotated = rotate_head(&head, rect.rotation()).unwrap();
            (rect, rotated.weights().to_vec(), rotated.bias())
        };
        let head = ClassifierHead::new(w.clone(), b).unwrap();
        let cert = verify_rect(&head, &rect, 0.5).unwrap();
        let oracle = corner_min_score(&w, b, rect.lower(), rect.upper());
        let err = (cert.score_min - oracle).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("instance {i} (d={d}): {} vs oracle {oracle}", cert.score_min))?;
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("200 instances, max |Δ| = {worst:.1e}"))
}

fn certificate_soundness() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = 16;
    let tau = 0.5;
    let (mut sat, mut unsat) = (0, 0);
    let mut attempts = 0;
    while sat < 50 || unsat < 50 {
        attempts += 1;
        ensure(attempts < 10_000, || "could not generate enough instances".into())?;
        let center: Vec<f64> = (0..d).map(|_| 2.0 * normal(&mut rng)).collect();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| center.iter().map(|c| c + normal(&mut rng)).collect())
            .collect();
        let rect = single_rect(&ActivationSet::from_rows(&rows).unwrap()).unwrap();
        let w: Vec<f64> = (0..d).map(|_| 0.25 * normal(&mut rng)).collect();
        let b = -logit(&w, 0.0, &center) + rng.random_range(-3.0..6.0);
        let head = ClassifierHead::new(w.clone(), b).unwrap();
        let cert = verify_single(&head, &rect, tau).unwrap();
        let r = rect.rotation().to_rows();
        match cert.verdict {
            Verdict::Unsat if unsat < 50 => {
                unsat += 1;
                let mut x_rot = vec![0.0; d];
                for s in 0..100_000 {
                    for (j, v) in x_rot.iter_mut().enumerate() {
                        *v = rng.random_range(rect.lower()[j]..=rect.upper()[j]);
                    }
                    let x = mat_t_vec(&r, &x_rot);
                    let score = sigmoid_ref(logit(&w, b, &x));
                    ensure(score > tau, || format!("UNSAT instance {unsat}: sample {s} scores {score} ≤ {tau}"))?;
                }
            }
            Verdict::Sat if sat < 50 => {
                sat += 1;
                let rotated = rotate_head(&head, rect.rotation()).unwrap();
                let s_rot = sigmoid_ref(logit(rotated.weights(), b, &cert.witness_rotated));
                let s_orig = sigmoid_ref(logit(&w, b, &cert.witness_original));
                ensure(s_rot <= tau && s_orig <= tau, || {
                    format!("SAT instance {sat}: witness scores {s_rot} / {s_orig} > {tau}")
                })?;
            }
            _ => {}
        }
    }
    within(start, Duration::from_secs(60))?;
    Ok("50 UNSAT × 1e5 samples, 50 SAT witnesses".into())
}

fn rotation_identity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 64;
    let mix = gaussian_rows(&mut rng, d, d, 1.0);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
            matvec(&mix, &z)
        })
        .collect();
    let pts = ActivationSet::from_rows(&rows).unwrap();
    let rect = single_rect(&pts).unwrap();
    let rot = rect.rotation();
    let head = ClassifierHead::new((0..d).map(|_| normal(&mut rng)).collect(), 0.7).unwrap();
    let rotated = rotate_head(&head, rot).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..d).map(|_| 3.0 * normal(&mut rng)).collect();
        let lhs = logit(head.weights(), 0.0, &x);
        let rhs = logit(rotated.weights(), 0.0, &rot.apply(&x).unwrap());
        let rel = (lhs - rhs).abs() / (1.0 + lhs.abs());
        worst = worst.max(rel);
    }
    ensure(worst <= 1e-6, || format!("max relative gap {worst:e}"))?;

    for i in 0..50 {
        let rows = gaussian_rows(&mut rng, 80, d, 1.0);
        let rect = single_rect(&ActivationSet::from_rows(&rows).unwrap()).unwrap();
        let w: Vec<f64> = (0..d).map(|_| 0.2 * normal(&mut rng)).collect();
        let head = ClassifierHead::new(w.clone(), rng.random_range(-1.0..4.0)).unwrap();
        let tau = rng.random_range(0.05..0.95);
        let with = verify_single(&head, &rect, tau).unwrap();
        // same box, with the head moved into the box frame by hand
        let w_tilde = matvec(&rect.rotation().to_rows(), &w);
        let plain = RectSpec::new(
            Rotation::identity(d),
            rect.lower().to_vec(),
            rect.upper().to_vec(),
            rect.member_count(),
            None,
        )
        .unwrap();
        let without = verify_rect(&ClassifierHead::new(w_tilde, head.bias()).unwrap(), &plain, tau).unwrap();
        ensure(with.verdict == without.verdict, || {
            format!("instance {i}: {:?} vs {:?} (z {} / {})", with.verdict, without.verdict, with.z_min, without.z_min)
        })?;
    }
    Ok(format!("max relative gap {worst:.1e}; 50/50 verdicts agree"))
}

fn containment_implies_sat() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 8;
    let w: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let norm2: f64 = w.iter().map(|v| v * v).sum();
    let b = 0.3;
    // move a random point along w until its logit hits the target
    let mut place = |target: f64| -> Vec<f64> {
        let x: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let shift = (target - logit(&w, b, &x)) / norm2;
        x.iter().zip(&w).map(|(xi, wi)| xi + shift * wi).collect()
    };
    let low_logit = (0.07f64 / 0.93).ln();
    let targets: Vec<f64> = (0..60).map(|i| 3.0 + (i % 7) as f64 * 0.25).collect();
    let mut rows: Vec<Vec<f64>> = targets.iter().map(|&t| place(t)).collect();
    rows.insert(17, place(low_logit));
    let head = ClassifierHead::new(w.clone(), b).unwrap();
    let scores: Vec<f64> = rows.iter().map(|x| head.score(x).unwrap().value()).collect();
    let below: Vec<f64> = scores.iter().copied().filter(|&s| s <= 0.48).collect();
    ensure(below.len() == 1 && (below[0] - 0.07).abs() < 1e-9, || format!("construction scores below τ*: {below:?}"))?;

    let rect = single_rect(&ActivationSet::from_rows(&rows).unwrap()).unwrap();
    let mut out = Vec::new();
    for tau in [0.48, 0.13] {
        let cert = verify_single(&head, &rect, tau).unwrap();
        ensure(cert.verdict == Verdict::Sat, || format!("UNSAT at τ = {tau} (score_min {})", cert.score_min))?;
        ensure(cert.score_min <= 0.07 + 1e-9, || format!("score_min {} above the contained point", cert.score_min))?;
        out.push(format!("τ={tau}: SAT, score_min {:.3e}", cert.score_min));
    }
    Ok(out.join("; "))
}

fn gmm_matches_monte_carlo() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut configs = 0;
    for k in 1..=3 {
        for d in [4usize, 8, 16] {
            for kind in [CovarianceKind::Full, CovarianceKind::Diag] {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let weights: Vec<f64> = raw.iter().map(|v| v / total).collect();
                let means: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| 1.5 * normal(&mut rng)).collect()).collect();
                let dense: Vec<Vec<Vec<f64>>> = (0..k)
                    .map(|_| match kind {
                        CovarianceKind::Full => {
                            let a = gaussian_rows(&mut rng, d, d, 1.0);
                            (0..d)
                                .map(|i| {
                                    (0..d)
                                        .map(|j| {
                                            (0..d).map(|t| a[i][t] * a[j][t]).sum::<f64>() / d as f64
                                                + if i == j { 0.2 } else { 0.0 }
                                        })
                                        .collect()
                                })
                                .collect()
                        }
                        CovarianceKind::Diag => (0..d)
                            .map(|i| {
                                let v = rng.random_range(0.2..2.0);
                                (0..d).map(|j| if i == j { v } else { 0.0 }).collect()
                            })
                            .collect(),
                    })
                    .collect();
                let covs: Vec<Covariance> = dense
                    .iter()
                    .map(|c| match kind {
                        CovarianceKind::Full => Covariance::Full(DMatrix::from_fn(d, d, |i, j| c[i][j])),
                        CovarianceKind::Diag => Covariance::Diag((0..d).map(|i| c[i][i]).collect()),
                    })
                    .collect();
                let spec = GmmSpec::new(weights.clone(), means.clone(), covs).unwrap();
                let w: Vec<f64> = (0..d).map(|_| normal(&mut rng) / (d as f64).sqrt()).collect();
                let head = ClassifierHead::new(w.clone(), 0.1).unwrap();
                let centre: f64 = weights.iter().zip(&means).map(|(p, m)| p * logit(&w, 0.1, m)).sum();
                let tau = sigmoid_ref(centre + rng.random_range(-0.5..0.5));
                let cert = certify_gmm(&spec, &head, tau).unwrap();
                let threshold = (tau / (1.0 - tau)).ln();
                let sampler = MixtureSampler::new(weights, means, &dense);
                let empirical = sampler.coverage(&w, 0.1, threshold, 1_000_000, &mut rng);
                let err = (cert.total - empirical).abs();
                worst = worst.max(err);
                configs += 1;
                ensure(err <= 0.005, || {
                    format!("K={k} d={d} {kind:?}: closed form {} vs empirical {empirical}", cert.total)
                })?;
            }
        }
    }
    within(start, Duration::from_secs(120))?;
    Ok(format!("{configs} configurations, max |Δ| = {worst:.4}"))
}

fn em_correctness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for (trial, kind) in [CovarianceKind::Full, CovarianceKind::Diag, CovarianceKind::Full, CovarianceKind::Diag]
        .into_iter()
        .enumerate()
    {
        let d = 3 + trial;
        let n = 50 + 10 * trial;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|j| (j as f64 + 1.0) * normal(&mut rng) + j as f64).collect())
            .collect();
        let fit = fit_gmm(&ActivationSet::from_rows(&rows).unwrap(), 1, kind, trial as u64).unwrap();
        let nf = n as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
        let cov: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / nf)
                    .collect()
            })
            .collect();
        let eps = 1e-6 * (0..d).map(|i| cov[i][i]).sum::<f64>() / d as f64;
        for j in 0..d {
            worst = worst.max((fit.spec.means()[0][j] - mean[j]).abs());
        }
        match &fit.spec.covariances()[0] {
            Covariance::Full(m) => {
                for i in 0..d {
                    for j in 0..d {
                        let want = cov[i][j] + if i == j { eps } else { 0.0 };
                        worst = worst.max((m[(i, j)] - want).abs());
                    }
                }
            }
            Covariance::Diag(v) => {
                for i in 0..d {
                    worst = worst.max((v[i] - (cov[i][i] + eps)).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-8, || format!("K=1 fit deviates from the MLE by {worst:e}"))?;

    let mut steps = 0;
    for fit_no in 0..20u64 {
        let k = 2 + (fit_no % 3) as usize;
        let d = 2 + (fit_no % 4) as usize;
        let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| 3.0 * normal(&mut rng)).collect()).collect();
        let (pts, _) = synth::gaussian_blobs(&centers, 1.0, 40, 100 + fit_no).unwrap();
        let kind = if fit_no % 2 == 0 { CovarianceKind::Full } else { CovarianceKind::Diag };
        let fit = fit_gmm(&pts, k, kind, fit_no).unwrap();
        for (i, w) in fit.log_likelihood.windows(2).enumerate() {
            steps += 1;
            ensure(w[1] >= w[0], || format!("fit {fit_no}: log-likelihood fell at iteration {}: {} → {}", i + 1, w[0], w[1]))?;
        }
    }
    Ok(format!("MLE gap {worst:.1e}; {steps} recorded steps nondecreasing over 20 fits"))
}

fn hdbscan_oracle_agreement() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..50 {
        let n = rng.random_range(3..=12);
        let d = rng.random_range(2..=4);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for p in 0..n {
            if p > 0 && rng.random_bool(0.25) {
                let src = rows[rng.random_range(0..p)].clone();
                let s = rng.random_range(0.5..2.0);
                rows.push(src.iter().map(|v| v * s).collect());
            } else {
                rows.push((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
            }
        }
        let m = rng.random_range(2..=n);
        let pts = ActivationSet::from_rows(&rows).unwrap();
        let got = hdbscan(&pts, m).unwrap().labels;
        let want = hdbscan_oracle(&pts, m);
        ensure(got == want, || format!("instance {i} (N={n}, m={m}): {got:?} vs oracle {want:?}"))?;
    }
    let (pts, origin) = synth::cosine_bundles(50, 16, 0.15, 8).unwrap();
    let out = hdbscan(&pts, 10).unwrap();
    ensure(out.num_clusters == 2, || format!("{} clusters on two bundles", out.num_clusters))?;
    // labels are numbered by first member and bundle 0 comes first
    let wrong = out.labels.iter().zip(&origin).filter(|(l, o)| **l != **o as i64).count();
    ensure(wrong == 0, || format!("{wrong} misassigned points"))?;
    Ok("50/50 small instances match; bundles: 2 clusters, 0 misassigned".into())
}

fn threshold_protocol() -> Result<String, String> {
    let r = roc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).map_err(|e| e.to_string())?;
    ensure(r.auc == 1.0 && r.tau_star == 0.5, || format!("auc {} tau_star {}", r.auc, r.tau_star))?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..100 {
        let n = rng.random_range(2..200);
        let coarse = trial % 3 == 0;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if coarse {
                    // heavy ties
                    rng.random_range(1..10) as f64 / 10.0
                } else {
                    sigmoid_ref(4.0 * normal(&mut rng))
                }
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1)).collect();
        labels[0] = 1;
        let harmful: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &l)| l == 1).map(|(&s, _)| s).collect();
        let pess = pessimistic_threshold(&harmful).map_err(|e| e.to_string())?;
        let flagged = harmful.iter().filter(|&&s| s > pess).count();
        ensure(flagged == harmful.len(), || format!("trial {trial}: recall {flagged}/{}", harmful.len()))?;
    }
    Ok("auc = 1, τ* = 0.5; recall 1.0 in 100/100 trials".into())
}

fn density_boundary_calibration() -> Result<String, String> {
    let mut counts = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let d = 2 + (seed % 4) as usize;
        let k = 1 + (seed % 3) as usize;
        let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| 4.0 * normal(&mut rng)).collect()).collect();
        let per = 100 / k;
        let (mut pts, _) = synth::gaussian_blobs(&centers, 1.0, per, seed).unwrap();
        if pts.len() < 100 {
            let (extra, _) = synth::gaussian_blobs(&centers[..1], 1.0, 100 - pts.len(), seed + 50).unwrap();
            let rows: Vec<&[f64]> = pts.rows().chain(extra.rows()).collect();
            pts = ActivationSet::from_rows(&rows).unwrap();
        }
        let kind = if seed % 2 == 0 { CovarianceKind::Full } else { CovarianceKind::Diag };
        let fit = fit_gmm(&pts, k, kind, seed).unwrap();
        let inside = pts.rows().filter(|x| fit.spec.contains(x).unwrap()).count();
        ensure((94..=96).contains(&inside), || format!("seed {seed}: {inside} of 100 inside"))?;
        counts.push(inside);
    }
    Ok(format!("inside counts {counts:?}"))
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_guardcert"))
        .args(args)
        .env_remove("GUARDCERT_SEED")
        .output()
        .expect("spawn guardcert");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn validate_report(path: &Path) -> Result<ReportResult, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let report = parse_report(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    for key in ["tool", "version", "spec", "tau", "tau_source", "result"] {
        ensure(value.get(key).is_some(), || format!("report lacks `{key}`"))?;
    }
    if let ReportResult::Exact { certificates, .. } = &report.result {
        for (i, c) in value["result"]["certificates"].as_array().unwrap().iter().enumerate() {
            for key in ["z_min", "score_min", "margin", "witness_rotated", "witness_original", "verdict"] {
                ensure(c.get(key).is_some(), || format!("certificate {i} lacks `{key}`"))?;
            }
        }
        ensure(!certificates.is_empty(), || "no certificates".into())?;
    }
    Ok(report.result)
}

fn end_to_end_cli() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let (code, _, err) = run_cli(&["fixture", "--out-dir", p(d), "--n", "100", "--dim", "6"]);
    ensure(code == 0, || format!("fixture exit {code}: {err}"))?;

    let builds: [(&str, &[&str]); 3] = [
        ("single-rect", &[]),
        ("multi-rect", &["--min-cluster-size", "10"]),
        ("gmm", &["--components", "2", "--covariance", "full"]),
    ];
    let mut summary = Vec::new();
    for (method, extra) in builds {
        let spec = d.join(format!("{method}.json"));
        let construction = d.join("construction.avec");
        let mut args = vec!["spec", "build", "--method", method, "--activations", p(&construction), "--out", p(&spec)];
        args.extend_from_slice(extra);
        let (code, _, err) = run_cli(&args);
        ensure(code == 0, || format!("spec build {method} exit {code}: {err}"))?;

        for tau in ["star", "pess", "0.5"] {
            let report = d.join(format!("{method}.{tau}.report.json"));
            let head = d.join("head.json");
            let (code, _, err) = run_cli(&["verify", "--spec", p(&spec), "--head", p(&head), "--tau", tau, "--report", p(&report)]);
            let result = validate_report(&report)?;
            let expected = match &result {
                ReportResult::Exact { verdict: Verdict::Sat, .. } => 2,
                ReportResult::Exact { verdict: Verdict::Unsat, .. } => 0,
                ReportResult::Probabilistic { .. } => 0,
            };
            ensure(code == expected, || format!("verify {method} τ={tau}: exit {code}, expected {expected}: {err}"))?;
            summary.push(format!("{method}/{tau}:{code}"));
        }
        let (code, out, err) = run_cli(&[
            "fidelity",
            "--spec",
            p(&spec),
            "--harmful",
            p(&d.join("harmful.avec")),
            "--benign",
            p(&d.join("benign.avec")),
        ]);
        ensure(code == 0, || format!("fidelity {method} exit {code}: {err}"))?;
        let v: serde_json::Value = serde_json::from_str(&out).map_err(|e| format!("fidelity JSON: {e}"))?;
        let counts: u64 = ["true_pos", "false_pos", "true_neg", "false_neg"]
            .iter()
            .map(|k| v[k].as_u64().unwrap_or(u64::MAX / 8))
            .sum();
        ensure(counts == 200, || format!("fidelity {method}: counts sum to {counts}"))?;
    }

    // documented failure and violation paths
    let small = d.join("small");
    let (code, _, _) = run_cli(&["fixture", "--out-dir", p(&small), "--n", "5", "--dim", "6"]);
    ensure(code == 0, || "small fixture failed".into())?;
    let (code, _, err) = run_cli(&[
        "spec", "build", "--method", "gmm", "--components", "3", "--covariance", "full",
        "--activations", p(&small.join("construction.avec")), "--out", p(&d.join("bad.json")),
    ]);
    ensure(code == 1 && err.contains("insufficient samples"), || format!("N < d+2 gmm: exit {code}: {err}"))?;
    let (code, _, _) = run_cli(&["verify", "--spec", p(&d.join("missing.json")), "--head", p(&d.join("head.json")), "--tau", "0.5", "--report", p(&d.join("r.json"))]);
    ensure(code == 1, || format!("missing spec: exit {code}"))?;
    let (code, _, _) = run_cli(&[
        "verify", "--spec", p(&d.join("gmm.json")), "--head", p(&d.join("head.json")),
        "--tau", "0.5", "--min-coverage", "1", "--report", p(&d.join("gate.json")),
    ]);
    ensure(code == 2, || format!("unmet coverage gate: exit {code}"))?;
    summary.push("errors:1 gate:2".into());
    Ok(summary.join(" "))
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("corner-oracle equivalence", corner_oracle_equivalence),
        ("certificate soundness", certificate_soundness),
        ("rotation identity", rotation_identity),
        ("containment implies SAT", containment_implies_sat),
        ("GMM certificate vs Monte Carlo", gmm_matches_monte_carlo),
        ("EM correctness", em_correctness),
        ("HDBSCAN oracle", hdbscan_oracle_agreement),
        ("threshold protocol", threshold_protocol),
        ("density-boundary calibration", density_boundary_calibration),
        ("end-to-end CLI", end_to_end_cli),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name:<32} {secs:>7.2}s  {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<32} {secs:>7.2}s  {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
