//! CSV tables: score files, ROC curves, sweep results and tiny activation
//! matrices.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{RocAnalysis, SweepRow};
use crate::types::ActivationSet;

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Csv(e.to_string())
}

fn reader(text: &str, has_headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Csv(format!("line {line}: {column} {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Csv(format!("line {line}: {column} is not finite")));
    }
    Ok(v)
}

/// Parses a `score,label` table. The header row is required.
pub fn parse_scores(text: &str) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut rdr = reader(text, true);
    let headers: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if headers != ["score", "label"] {
        return Err(Error::Csv(format!("expected header score,label, found {}", headers.join(","))));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        scores.push(parse_f64(&record[0], line, "score")?);
        labels.push(match &record[1] {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Csv(format!("line {line}: label {other:?} is not 0 or 1"))),
        });
    }
    if scores.is_empty() {
        return Err(Error::Empty("score table"));
    }
    Ok((scores, labels))
}

pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<u8>)> {
    parse_scores(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn format_scores(scores: &[f64], labels: &[u8]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["score", "label"]).map_err(csv_err)?;
    for (s, l) in scores.iter().zip(labels) {
        w.write_record([s.to_string(), l.to_string()]).map_err(csv_err)?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

/// ROC table preceded by `# key=value` lines carrying the chosen thresholds.
pub fn format_roc(roc: &RocAnalysis, tau_pess: f64) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("# tau_star={}\n", roc.tau_star));
    out.push_str(&format!("# tau_pess={tau_pess}\n"));
    out.push_str(&format!("# auc={}\n", roc.auc));
    out.push_str(&format!("# youden_j={}\n", roc.youden_j));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "fpr", "tpr"]).map_err(csv_err)?;
    for p in &roc.points {
        w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])
            .map_err(csv_err)?;
    }
    out.push_str(&into_string(w)?);
    Ok(out)
}

/// Reads the `# key=value` header block of a ROC table.
pub fn parse_header_block(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map_while(|l| l.strip_prefix('#'))
        .filter_map(|l| l.trim().split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

pub fn format_sweep(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param", "precision", "recall", "f1", "regions", "degenerate"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.param.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f1.to_string(),
            r.regions.to_string(),
            r.degenerate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    into_string(w)
}

/// Writes text produced by one of the `format_*` functions.
pub fn write_csv(text: &str, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Headerless numeric matrix, one activation per row. An optional trailing
/// `label` column is used when the header names it.
pub fn parse_activations_csv(text: &str) -> Result<ActivationSet> {
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let has_header = first.is_some_and(|l| l.split(',').any(|f| f.trim().parse::<f64>().is_err()));
    let mut rdr = reader(text, has_header);
    let label_col = if has_header {
        rdr.headers().map_err(csv_err)?.iter().position(|h| h == "label")
    } else {
        None
    };
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut width = 0;
        for (i, field) in record.iter().enumerate() {
            if Some(i) == label_col {
                labels.push(match field {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(Error::Csv(format!("line {line}: label {other:?} is not 0 or 1"))),
                });
            } else {
                data.push(parse_f64(field, line, "value")?);
                width += 1;
            }
        }
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Csv(format!("line {line}: {width} values, expected {d}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let set = ActivationSet::new(rows, dim.unwrap_or(0), data)?;
    if label_col.is_some() {
        set.with_labels(labels)
    } else {
        Ok(set)
    }
}

pub fn read_activations_csv(path: &Path) -> Result<ActivationSet> {
    let mut set = parse_activations_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?;
    set.meta.source = path.file_name().map(|s| s.to_string_lossy().into_owned());
    Ok(set)
}
