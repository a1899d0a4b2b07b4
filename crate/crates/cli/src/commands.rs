use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use guardcert::gmm::{certify_gmm, fit_gmm};
use guardcert::io::avec::{parse_labels, read_avec, write_avec};
use guardcert::io::csv::{format_roc, format_scores, format_sweep, read_activations_csv, read_scores, write_csv};
use guardcert::io::json::{read_head, read_spec, to_json_string, write_head, write_report, write_spec, FidelityDoc, Report, SpecSummary, TOOL_NAME, TOOL_VERSION};
use guardcert::metrics::{fidelity, multi_rect_from_clustering, pessimistic_threshold, roc, sweep, SweepMethod};
use guardcert::rect::{single_rect, MultiRectSpec};
use guardcert::spec::Specification;
use guardcert::synth;
use guardcert::types::{ActivationSet, Thresholds};
use guardcert::verify::{verify_multi, Verdict};

use crate::args::*;

/// Successful runs either pass or report a violation (SAT or failed gate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Spec(SpecCommand::Build(a)) => build(a),
        Command::Verify(a) => verify(a),
        Command::Thresholds(a) => thresholds(a),
        Command::Fidelity(a) => fidelity_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Score(a) => score(a),
        Command::Fixture(a) => fixture(a),
    }
}

fn load_activations(input: &ActivationInput) -> Result<ActivationSet> {
    let path = &input.activations;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut set = if is_csv {
        let set = read_activations_csv(path)?;
        match &input.labels {
            Some(l) => {
                let text = fs::read_to_string(l).with_context(|| format!("reading {}", l.display()))?;
                set.with_labels(parse_labels(&text)?)?
            }
            None => set,
        }
    } else {
        read_avec(path, input.labels.as_deref())?
    };
    if let Some(label) = input.select_label {
        if set.labels().is_none() {
            bail!("--select-label needs labels for {}", path.display());
        }
        set = set.filter_label(label)?;
        if set.is_empty() {
            bail!("no rows carry label {label}");
        }
    }
    Ok(set)
}

fn load(path: &Path) -> Result<ActivationSet> {
    Ok(read_avec(path, None)?)
}

fn build(a: BuildArgs) -> Result<Outcome> {
    let points = load_activations(&a.input)?;
    let spec = match a.method {
        Method::SingleRect => {
            let rect = single_rect(&points)?;
            println!("single-rect: 1 region over {} points, d = {}", points.len(), points.dim());
            Specification::SingleRect(rect)
        }
        Method::MultiRect => {
            let m = a.min_cluster_size.expect("required by clap");
            let spec = multi_rect_from_clustering(&points, m)?
                .with_context(|| format!("fewer than two clusters: every point is noise at min cluster size {m}"))?;
            let k = spec.rects().len();
            if k == 1 {
                eprintln!("warning: fewer than two clusters; a single cluster was found at min cluster size {m}");
            }
            println!("multi-rect: {k} clusters, {} noise points", spec.noise_count);
            Specification::MultiRect(spec)
        }
        Method::Gmm => {
            let k = a.components.expect("required by clap");
            let fit = fit_gmm(&points, k, a.covariance.into(), a.seed)?;
            println!(
                "gmm: {k} components, {} EM iterations, mean log-likelihood {}{}",
                fit.iterations,
                fit.final_log_likelihood(),
                if fit.converged { "" } else { " (iteration cap reached)" }
            );
            if fit.spec.low_confidence {
                eprintln!("warning: density boundary estimated from fewer than 20 points");
            }
            Specification::Gmm(fit.spec)
        }
    };
    write_spec(&spec, &a.out)?;
    Ok(Outcome::Pass)
}

fn resolve_tau(tau: TauArg, thresholds: Option<Thresholds>) -> Result<(f64, &'static str)> {
    Ok(match tau {
        TauArg::Literal(v) => (v, "literal"),
        TauArg::Star => (
            thresholds.context("--tau star needs thresholds in the head file")?.tau_star,
            "star",
        ),
        TauArg::Pess => (
            thresholds.context("--tau pess needs thresholds in the head file")?.tau_pess,
            "pess",
        ),
    })
}

fn verify(a: VerifyArgs) -> Result<Outcome> {
    let spec = read_spec(&a.spec)?;
    let head = read_head(&a.head)?;
    let (tau, source) = resolve_tau(a.tau, head.thresholds)?;
    if let Some(p) = a.min_coverage {
        if !(0.0..=1.0).contains(&p) {
            bail!("--min-coverage must lie in [0, 1], got {p}");
        }
    }
    match &spec {
        Specification::SingleRect(_) | Specification::MultiRect(_) => {
            if a.min_coverage.is_some() {
                eprintln!("warning: --min-coverage only applies to mixture specifications");
            }
            let multi = match &spec {
                Specification::SingleRect(r) => MultiRectSpec::new(vec![r.clone()], 0)?,
                Specification::MultiRect(m) => m.clone(),
                Specification::Gmm(_) => unreachable!(),
            };
            let cert = verify_multi(&head.head, &multi, tau)?;
            write_report(&Report::exact(&spec, source, &cert, tau), &a.report)?;
            for c in &cert.certificates {
                println!(
                    "region {}: {:?} z_min={} score_min={} margin={}",
                    c.rect_index, c.verdict, c.z_min, c.score_min, c.margin
                );
            }
            let verdict = match cert.verdict {
                Verdict::Sat => "SAT",
                Verdict::Unsat => "UNSAT",
            };
            println!("verdict: {verdict} at tau = {tau}");
            Ok(if cert.verdict == Verdict::Sat {
                Outcome::Violation
            } else {
                Outcome::Pass
            })
        }
        Specification::Gmm(g) => {
            let cert = certify_gmm(g, &head.head, tau)?;
            write_report(&Report::probabilistic(&spec, source, &cert, a.min_coverage), &a.report)?;
            println!("total coverage: {} at tau = {tau}", cert.total);
            match a.min_coverage {
                Some(p) if cert.total < p => {
                    println!("coverage gate failed: {} < {p}", cert.total);
                    Ok(Outcome::Violation)
                }
                _ => Ok(Outcome::Pass),
            }
        }
    }
}

fn thresholds(a: ThresholdsArgs) -> Result<Outcome> {
    let (scores, labels) = read_scores(&a.scores)?;
    let analysis = roc(&scores, &labels)?;
    let harmful: Vec<f64> = scores
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&s, _)| s)
        .collect();
    let pess = pessimistic_threshold(&harmful)?;
    write_csv(&format_roc(&analysis, pess)?, &a.out)?;
    println!("auc={} tau_star={} tau_pess={pess}", analysis.auc, analysis.tau_star);
    if let Some(path) = a.update_head {
        let mut head = read_head(&path)?;
        head.thresholds = Some(Thresholds::new(analysis.tau_star, pess)?);
        write_head(&head, &path)?;
    }
    Ok(Outcome::Pass)
}

fn fidelity_cmd(a: FidelityArgs) -> Result<Outcome> {
    let spec = read_spec(&a.spec)?;
    let harmful = load(&a.harmful)?;
    let benign = load(&a.benign)?;
    let report = fidelity(&spec, &harmful, &benign)?;
    let doc = FidelityDoc {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        spec: SpecSummary::of(&spec),
        harmful: harmful.len(),
        benign: benign.len(),
        report,
    };
    let text = to_json_string(&doc)?;
    match a.out {
        Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(Outcome::Pass)
}

fn sweep_cmd(a: SweepArgs) -> Result<Outcome> {
    let points = load_activations(&a.input)?;
    let harmful = load(&a.harmful)?;
    let benign = load(&a.benign)?;
    let method = match a.method {
        SweepMethodArg::MultiRect => SweepMethod::MultiRect,
        SweepMethodArg::Gmm => SweepMethod::Gmm {
            kind: a.covariance.into(),
            seed: a.seed,
        },
    };
    let rows = sweep(&points, &harmful, &benign, method, &a.grid)?;
    for r in rows.iter().filter(|r| r.degenerate) {
        eprintln!("warning: fewer than two clusters at min cluster size {}", r.param);
    }
    write_csv(&format_sweep(&rows)?, &a.out)?;
    Ok(Outcome::Pass)
}

fn score(a: ScoreArgs) -> Result<Outcome> {
    let set = load_activations(&a.input)?;
    let head = read_head(&a.head)?;
    let labels = set
        .labels()
        .context("scoring needs labelled activations")?
        .to_vec();
    let scores = set.scores(&head.head)?;
    write_csv(&format_scores(&scores, &labels)?, &a.out)?;
    Ok(Outcome::Pass)
}

fn fixture(a: FixtureArgs) -> Result<Outcome> {
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let construction = synth::fixture(a.n, a.dim, a.seed)?;
    let holdout = synth::fixture(a.n, a.dim, a.seed.wrapping_add(1000))?;
    let dir = &a.out_dir;
    write_avec(&construction.harmful, &dir.join("construction.avec"))?;
    write_avec(&holdout.harmful, &dir.join("harmful.avec"))?;
    write_avec(&holdout.benign, &dir.join("benign.avec"))?;

    let mut scores = holdout.harmful.scores(&holdout.head)?;
    scores.extend(holdout.benign.scores(&holdout.head)?);
    let labels: Vec<u8> = std::iter::repeat_n(1, a.n).chain(std::iter::repeat_n(0, a.n)).collect();
    write_csv(&format_scores(&scores, &labels)?, &dir.join("scores.csv"))?;

    let analysis = roc(&scores, &labels)?;
    let pess = pessimistic_threshold(&scores[..a.n])?;
    let mut head = guardcert::io::json::HeadFile::new(holdout.head);
    head.thresholds = Some(Thresholds::new(analysis.tau_star, pess)?);
    head.model_tag = Some("synthetic".into());
    write_head(&head, &dir.join("head.json"))?;
    println!(
        "fixture: {} points per split, d = {}, written to {}",
        a.n,
        a.dim,
        dir.display()
    );
    Ok(Outcome::Pass)
}
