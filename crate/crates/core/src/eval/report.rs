use std::path::Path;

use serde::Serialize;

use super::cv::{MetricsReport, SweepPoint};
use crate::dualmodel::FitTrace;
use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// `domain,fold,rmse,mae,precision_at_K,recall_at_K`, one row per fold.
/// Undefined recall is written as an empty field.
pub fn write_metrics_csv(path: &Path, reports: &[&MetricsReport]) -> Result<()> {
    let k = reports.first().map_or(5, |r| r.k);
    let mut w = writer(path)?;
    w.write_record([
        "domain".to_string(),
        "fold".to_string(),
        "rmse".to_string(),
        "mae".to_string(),
        format!("precision_at_{k}"),
        format!("recall_at_{k}"),
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in reports {
        for f in &r.folds {
            w.write_record([
                r.domain.clone(),
                f.fold.to_string(),
                format!("{}", f.rmse),
                format!("{}", f.mae),
                format!("{}", f.precision_at_k),
                opt(f.recall_at_k),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `alpha,domain,rmse,mae,precision_at_K,recall_at_K`, fold means per point.
pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let k = points.first().map_or(5, |p| p.report.a.k);
    let mut w = writer(path)?;
    w.write_record([
        "alpha".to_string(),
        "domain".to_string(),
        "rmse".to_string(),
        "mae".to_string(),
        format!("precision_at_{k}"),
        format!("recall_at_{k}"),
    ])
    .map_err(|e| csv_err(path, e))?;
    for p in points {
        for r in [&p.report.a, &p.report.b] {
            w.write_record([
                format!("{}", p.alpha),
                r.domain.clone(),
                format!("{}", r.rmse),
                format!("{}", r.mae),
                format!("{}", r.precision_at_k),
                opt(r.recall_at_k),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `fold,epoch,loss_a,loss_b`; epoch 0 is the loss before training.
pub fn write_fit_traces_csv(path: &Path, traces: &[FitTrace]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["fold", "epoch", "loss_a", "loss_b"])
        .map_err(|e| csv_err(path, e))?;
    for (fold, t) in traces.iter().enumerate() {
        let rows =
            std::iter::once((t.initial_a, t.initial_b)).chain(t.loss_a.iter().copied().zip(t.loss_b.iter().copied()));
        for (epoch, (a, b)) in rows.enumerate() {
            w.write_record([fold.to_string(), epoch.to_string(), format!("{a}"), format!("{b}")])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON summary document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Model(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
