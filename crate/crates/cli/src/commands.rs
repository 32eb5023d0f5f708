//! The five pipelines behind the subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use duet_core::dualmodel::{shared_users, DualModel, EncodedDomain, Encoders, ModelBundle, Side};
use duet_core::eval::{
    alpha_sweep, mae, precision_recall_at_k, rmse, run_cv, write_fit_traces_csv, write_json, write_metrics_csv,
    write_sweep_csv, FoldMetrics, MetricsReport, Scored,
};
use duet_core::features::{load_domain, synth_pair, DomainDataset, FeatureSchema};
use duet_core::nmflab::{check_conditions, run_lab, write_trace_csv};
use duet_core::numeric::derive_seed;
use serde::Serialize;

use crate::config::{write_echo, ExperimentConfig, Mode};

pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const CV_TRACES_CSV: &str = "cv_traces.csv";
pub const FIT_TRACE_CSV: &str = "fit_trace.csv";
pub const MODEL_JSON: &str = "model.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_METRICS_CSV: &str = "sweep_metrics.csv";
pub const NMF_TRACE_CSV: &str = "nmf_trace.csv";
pub const NMF_REDUCED_CSV: &str = "nmf_reduced_trace.csv";
pub const TRUTH_JSON: &str = "truth.json";

/// Paths of one domain's files inside a dataset directory.
pub struct DomainFiles {
    pub interactions: PathBuf,
    pub users: PathBuf,
    pub items: PathBuf,
    pub user_schema: PathBuf,
    pub item_schema: PathBuf,
}

impl DomainFiles {
    pub fn new(dir: &Path, domain: &str) -> Self {
        DomainFiles {
            interactions: dir.join(format!("{domain}_interactions.csv")),
            users: dir.join(format!("{domain}_users.csv")),
            items: dir.join(format!("{domain}_items.csv")),
            user_schema: dir.join(format!("{domain}_user_schema.csv")),
            item_schema: dir.join(format!("{domain}_item_schema.csv")),
        }
    }
}

/// Runs the pipeline selected by `cfg.mode` and returns the files written.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut written = match cfg.mode {
        Mode::Synth => synth(cfg)?,
        Mode::Train => train(cfg)?,
        Mode::Eval => eval(cfg)?,
        Mode::AlphaSweep => sweep(cfg)?,
        Mode::NmfLab => nmf_lab(cfg)?,
    };
    written.push(write_echo(cfg, &cfg.out)?);
    Ok(written)
}

fn save_domain(ds: &DomainDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    let f = DomainFiles::new(dir, &ds.name);
    ds.write_csv(&f.interactions, &f.users, &f.items)?;
    std::fs::write(&f.user_schema, ds.user_schema.to_text())?;
    std::fs::write(&f.item_schema, ds.item_schema.to_text())?;
    Ok(vec![f.interactions, f.users, f.items, f.user_schema, f.item_schema])
}

fn synth(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let pair = synth_pair(&cfg.synth())?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    let mut written = save_domain(&pair.a, &cfg.out)?;
    written.extend(save_domain(&pair.b, &cfg.out)?);
    let truth = cfg.out.join(TRUTH_JSON);
    write_json(&truth, &pair.truth)?;
    written.push(truth);
    log::info!(
        "synthetic pair: {} and {} interactions",
        pair.a.interactions.len(),
        pair.b.interactions.len()
    );
    Ok(written)
}

fn load_one(dir: &Path, name: &str) -> Result<DomainDataset> {
    let f = DomainFiles::new(dir, name);
    let ds = load_domain(
        name,
        &f.interactions,
        &f.users,
        &f.items,
        FeatureSchema::load(&f.user_schema)?,
        FeatureSchema::load(&f.item_schema)?,
    )?;
    Ok(ds)
}

/// Loads the configured domain pair from `cfg.data`.
pub fn load_pair(cfg: &ExperimentConfig) -> Result<(DomainDataset, DomainDataset)> {
    let a = load_one(&cfg.data, &cfg.domain_a)?;
    let b = load_one(&cfg.data, &cfg.domain_b)?;
    duet_core::features::ensure_pair(&a, &b)?;
    Ok((a, b))
}

fn train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (a, b) = load_pair(cfg)?;
    let ae = duet_core::autoencoder::AutoencoderConfig {
        seed: derive_seed(cfg.seed, "autoencoders"),
        ..cfg.autoencoder()
    };
    let (encoders, _) = Encoders::train(&a, &b, &ae)?;
    let shared = shared_users(&a, &b);
    let data_a = encoders.embed_domain(Side::A, &a, &shared)?;
    let data_b = encoders.embed_domain(Side::B, &b, &shared)?;
    let mut model = DualModel::new(encoders, cfg.alpha, derive_seed(cfg.seed, "model"))?;
    let fit = duet_core::dualmodel::FitConfig {
        seed: derive_seed(cfg.seed, "fit"),
        ..cfg.fit()
    };
    let trace = model.fit(&data_a, &data_b, &fit)?;
    log::info!("trained for {} epochs (converged: {})", trace.epochs(), trace.converged);
    std::fs::create_dir_all(&cfg.out)?;
    let model_path = cfg.out.join(MODEL_JSON);
    ModelBundle::new(model, &a, &b).save(&model_path)?;
    let trace_path = cfg.out.join(FIT_TRACE_CSV);
    write_fit_traces_csv(&trace_path, &[trace])?;
    Ok(vec![model_path, trace_path])
}

fn score_domain(model: &DualModel, side: Side, data: &EncodedDomain, cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let mut pred = Vec::with_capacity(data.len());
    let mut truth = Vec::with_capacity(data.len());
    let mut per_user: BTreeMap<String, Vec<Scored>> = BTreeMap::new();
    for r in &data.records {
        let p = model.predict_record(side, r)?;
        pred.push(p);
        truth.push(r.rating);
        per_user.entry(r.user_id.clone()).or_default().push(Scored {
            score: p,
            truth: r.rating,
        });
    }
    let ranking = precision_recall_at_k(&per_user, cfg.k, cfg.tau)?;
    let fold = FoldMetrics {
        fold: 0,
        n_test: data.len(),
        rmse: rmse(&pred, &truth)?,
        mae: mae(&pred, &truth)?,
        precision_at_k: ranking.precision,
        recall_at_k: ranking.recall,
    };
    Ok(MetricsReport {
        domain: data.name.clone(),
        k: cfg.k,
        rmse: fold.rmse,
        mae: fold.mae,
        precision_at_k: fold.precision_at_k,
        recall_at_k: fold.recall_at_k,
        folds: vec![fold],
        config: cfg.cv(),
    })
}

#[derive(Serialize)]
struct ModelEvalSummary<'a> {
    model: &'a Path,
    alpha: f64,
    a: &'a MetricsReport,
    b: &'a MetricsReport,
}

fn eval(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (a, b) = load_pair(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    let metrics = cfg.out.join(METRICS_CSV);
    let summary = cfg.out.join(SUMMARY_JSON);
    if let Some(model_path) = &cfg.model {
        let bundle = ModelBundle::load(model_path)?;
        let expected = [
            (&bundle.user_schema_a, &a.user_schema),
            (&bundle.item_schema_a, &a.item_schema),
            (&bundle.user_schema_b, &b.user_schema),
            (&bundle.item_schema_b, &b.item_schema),
        ];
        if expected.iter().any(|(m, d)| m != d) {
            bail!("dataset schemas differ from those stored in {}", model_path.display());
        }
        let model = &bundle.model;
        if model.domain_name(Side::A) != a.name || model.domain_name(Side::B) != b.name {
            bail!(
                "model was trained on domains {}/{}, data holds {}/{}",
                model.domain_name(Side::A),
                model.domain_name(Side::B),
                a.name,
                b.name
            );
        }
        let shared = shared_users(&a, &b);
        let data_a = model.encoders.embed_domain(Side::A, &a, &shared)?;
        let data_b = model.encoders.embed_domain(Side::B, &b, &shared)?;
        let ra = score_domain(model, Side::A, &data_a, cfg)?;
        let rb = score_domain(model, Side::B, &data_b, cfg)?;
        write_metrics_csv(&metrics, &[&ra, &rb])?;
        write_json(
            &summary,
            &ModelEvalSummary {
                model: model_path,
                alpha: model.alpha(),
                a: &ra,
                b: &rb,
            },
        )?;
        return Ok(vec![metrics, summary]);
    }
    let report = run_cv(&a, &b, &cfg.cv())?;
    write_metrics_csv(&metrics, &[&report.a, &report.b])?;
    write_json(&summary, &report)?;
    let traces = cfg.out.join(CV_TRACES_CSV);
    write_fit_traces_csv(&traces, &report.traces)?;
    Ok(vec![metrics, summary, traces])
}

fn sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (a, b) = load_pair(cfg)?;
    let points = alpha_sweep(&a, &b, &cfg.alphas, &cfg.cv())?;
    std::fs::create_dir_all(&cfg.out)?;
    let table = cfg.out.join(SWEEP_CSV);
    write_sweep_csv(&table, &points)?;
    let per_fold = cfg.out.join(SWEEP_METRICS_CSV);
    write_per_fold_sweep(&per_fold, &points)?;
    let summary = cfg.out.join(SUMMARY_JSON);
    write_json(&summary, &points)?;
    Ok(vec![table, per_fold, summary])
}

fn write_per_fold_sweep(path: &Path, points: &[duet_core::eval::SweepPoint]) -> Result<()> {
    let k = points.first().map_or(5, |p| p.report.a.k);
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "alpha".to_string(),
        "domain".to_string(),
        "fold".to_string(),
        "rmse".to_string(),
        "mae".to_string(),
        format!("precision_at_{k}"),
        format!("recall_at_{k}"),
    ])?;
    for p in points {
        for r in [&p.report.a, &p.report.b] {
            for f in &r.folds {
                w.write_record([
                    p.alpha.to_string(),
                    r.domain.clone(),
                    f.fold.to_string(),
                    f.rmse.to_string(),
                    f.mae.to_string(),
                    f.precision_at_k.to_string(),
                    f.recall_at_k.map(|x| x.to_string()).unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct NmfSummary {
    alpha: f64,
    seed: u64,
    conditions: [bool; 3],
    iterations: usize,
    converged: bool,
    initial_loss: f64,
    final_loss: f64,
    max_increase: f64,
    last_delta: f64,
}

fn nmf_lab(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (problem, run) = run_lab(&cfg.lab())?;
    let c = check_conditions(&problem);
    std::fs::create_dir_all(&cfg.out)?;
    let trace = cfg.out.join(NMF_TRACE_CSV);
    write_trace_csv(&trace, &run.state.loss_trace)?;
    let reduced = cfg.out.join(NMF_REDUCED_CSV);
    write_trace_csv(&reduced, &run.state.reduced_trace)?;
    let summary = cfg.out.join(SUMMARY_JSON);
    write_json(
        &summary,
        &NmfSummary {
            alpha: cfg.alpha,
            seed: cfg.seed,
            conditions: [c.a, c.b, c.c],
            iterations: run.iterations,
            converged: run.converged,
            initial_loss: run.state.loss_trace[0],
            final_loss: run.final_loss(),
            max_increase: run.max_increase(),
            last_delta: run.last_delta(),
        },
    )?;
    log::info!(
        "nmf lab: {} iterations, final loss {}, converged {}",
        run.iterations,
        run.final_loss(),
        run.converged
    );
    Ok(vec![trace, reduced, summary])
}
