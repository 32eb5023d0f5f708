use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::{mae, precision_recall_at_k, rmse, Scored};
use crate::autoencoder::AutoencoderConfig;
use crate::dualmodel::{
    embed_records, fit_single, init_scorer, shared_users, train_domain_encoders, DualModel, EncodedDomain, Encoders,
    FitConfig, FitTrace, Side,
};
use crate::error::{Error, Result};
use crate::features::{ensure_pair, DomainDataset, FoldSplit};
use crate::numeric::derive_seed;

pub const DEFAULT_ALPHA: f64 = 0.03;

/// Everything a cross-validated run depends on. Every random stream is derived
/// from `seed`; the seeds inside `autoencoder` and `fit` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub alpha: f64,
    pub folds: usize,
    /// Cutoff of Precision@k / Recall@k.
    pub k: usize,
    /// Relevance threshold on normalized ratings.
    pub tau: f64,
    pub seed: u64,
    pub autoencoder: AutoencoderConfig,
    pub fit: FitConfig,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            alpha: DEFAULT_ALPHA,
            folds: 5,
            k: 5,
            tau: 0.5,
            seed: 0,
            autoencoder: AutoencoderConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} outside [0, 0.5)", self.alpha)));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("folds must be >= 2".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidConfig(format!("tau {} outside (0, 1)", self.tau)));
        }
        self.fit.validate()
    }

    fn autoencoder_config(&self) -> AutoencoderConfig {
        AutoencoderConfig {
            seed: derive_seed(self.seed, "autoencoders"),
            ..self.autoencoder.clone()
        }
    }

    fn split(&self, ds: &DomainDataset) -> Result<FoldSplit> {
        FoldSplit::new(
            ds.interactions.len(),
            self.folds,
            derive_seed(self.seed, &format!("folds/{}", ds.name)),
        )
    }

    fn model_seed(&self, fold: usize) -> u64 {
        derive_seed(self.seed, &format!("model/{fold}"))
    }

    fn fit_config(&self, fold: usize) -> FitConfig {
        FitConfig {
            seed: derive_seed(self.seed, &format!("fit/{fold}")),
            ..self.fit.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub rmse: f64,
    pub mae: f64,
    pub precision_at_k: f64,
    pub recall_at_k: Option<f64>,
}

/// Fold-averaged metrics of one domain plus the per-fold breakdown and the
/// configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub domain: String,
    pub k: usize,
    pub rmse: f64,
    pub mae: f64,
    pub precision_at_k: f64,
    /// Mean over folds where recall is defined; `None` if it never is.
    pub recall_at_k: Option<f64>,
    pub folds: Vec<FoldMetrics>,
    pub config: CvConfig,
}

impl MetricsReport {
    fn from_folds(domain: &str, folds: Vec<FoldMetrics>, config: &CvConfig) -> Self {
        let n = folds.len() as f64;
        let mean = |f: fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
        let recalls: Vec<f64> = folds.iter().filter_map(|f| f.recall_at_k).collect();
        MetricsReport {
            domain: domain.to_string(),
            k: config.k,
            rmse: mean(|f| f.rmse),
            mae: mean(|f| f.mae),
            precision_at_k: mean(|f| f.precision_at_k),
            recall_at_k: (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64),
            folds: folds.clone(),
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub a: MetricsReport,
    pub b: MetricsReport,
    /// Training traces, one per fold.
    pub traces: Vec<FitTrace>,
}

fn fold_metrics(
    fold: usize,
    data: &EncodedDomain,
    predict: impl Fn(usize) -> Result<f64>,
    cfg: &CvConfig,
) -> Result<FoldMetrics> {
    let mut pred = Vec::with_capacity(data.len());
    let mut truth = Vec::with_capacity(data.len());
    let mut per_user: BTreeMap<String, Vec<Scored>> = BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        let p = predict(i)?;
        pred.push(p);
        truth.push(r.rating);
        per_user.entry(r.user_id.clone()).or_default().push(Scored {
            score: p,
            truth: r.rating,
        });
    }
    let ranking = precision_recall_at_k(&per_user, cfg.k, cfg.tau)?;
    Ok(FoldMetrics {
        fold,
        n_test: data.len(),
        rmse: rmse(&pred, &truth)?,
        mae: mae(&pred, &truth)?,
        precision_at_k: ranking.precision,
        recall_at_k: ranking.recall,
    })
}

/// Record-level k-fold cross-validation of the dual model on a domain pair.
///
/// The four autoencoders are trained once on the feature tables. For each fold
/// a fresh dual model is fitted on the other folds of both domains and scored
/// on the held-out fold of each.
pub fn run_cv(a: &DomainDataset, b: &DomainDataset, cfg: &CvConfig) -> Result<CvReport> {
    cfg.validate()?;
    ensure_pair(a, b)?;
    a.validate()?;
    b.validate()?;
    let (encoders, _) = Encoders::train(a, b, &cfg.autoencoder_config())?;
    let split_a = cfg.split(a)?;
    let split_b = cfg.split(b)?;
    let mut folds_a = Vec::new();
    let mut folds_b = Vec::new();
    let mut traces = Vec::new();
    for fold in 0..cfg.folds {
        let train_a = a.subset(&split_a.train_indices(fold));
        let train_b = b.subset(&split_b.train_indices(fold));
        let shared = shared_users(&train_a, &train_b);
        let enc_train_a = encoders.embed_domain(Side::A, &train_a, &shared)?;
        let enc_train_b = encoders.embed_domain(Side::B, &train_b, &shared)?;
        let enc_test_a = encoders.embed_domain(Side::A, &a.subset(&split_a.test_indices(fold)), &shared)?;
        let enc_test_b = encoders.embed_domain(Side::B, &b.subset(&split_b.test_indices(fold)), &shared)?;

        let mut model = DualModel::new(encoders.clone(), cfg.alpha, cfg.model_seed(fold))?;
        let trace = model.fit(&enc_train_a, &enc_train_b, &cfg.fit_config(fold))?;
        log::info!(
            "fold {fold}: {} epochs, final loss A {:.6} B {:.6}",
            trace.epochs(),
            trace.loss_a.last().copied().unwrap_or(f64::NAN),
            trace.loss_b.last().copied().unwrap_or(f64::NAN)
        );
        folds_a.push(fold_metrics(
            fold,
            &enc_test_a,
            |i| model.predict_record(Side::A, &enc_test_a.records[i]),
            cfg,
        )?);
        folds_b.push(fold_metrics(
            fold,
            &enc_test_b,
            |i| model.predict_record(Side::B, &enc_test_b.records[i]),
            cfg,
        )?);
        traces.push(trace);
    }
    Ok(CvReport {
        a: MetricsReport::from_folds(&a.name, folds_a, cfg),
        b: MetricsReport::from_folds(&b.name, folds_b, cfg),
        traces,
    })
}

/// Cross-validation of a single-domain model trained on `ds` alone, using the
/// same seeds, splits and step size as the `side` slot of [`run_cv`]. The
/// transfer rate in `cfg` is ignored.
pub fn run_cv_single(ds: &DomainDataset, side: Side, cfg: &CvConfig) -> Result<MetricsReport> {
    let cfg = CvConfig {
        alpha: 0.0,
        ..cfg.clone()
    };
    cfg.validate()?;
    ds.validate()?;
    let ((user_ae, _), (item_ae, _)) = train_domain_encoders(ds, &cfg.autoencoder_config())?;
    let split = cfg.split(ds)?;
    let none = BTreeSet::new();
    let mut folds = Vec::new();
    for fold in 0..cfg.folds {
        let train = embed_records(&user_ae, &item_ae, &ds.subset(&split.train_indices(fold)), &none)?;
        let test = embed_records(&user_ae, &item_ae, &ds.subset(&split.test_indices(fold)), &none)?;
        let mut scorer = init_scorer(user_ae.embed_dim(), cfg.model_seed(fold), &ds.name);
        let mut fit = cfg.fit_config(fold);
        if side == Side::B {
            fit.lr_a = fit.lr_b;
        }
        fit_single(&mut scorer, &train, &fit)?;
        folds.push(fold_metrics(
            fold,
            &test,
            |i| scorer.score(&test.records[i].user, &test.records[i].item),
            &cfg,
        )?);
    }
    Ok(MetricsReport::from_folds(&ds.name, folds, &cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub report: CvReport,
}

/// One [`run_cv`] per transfer rate with all other settings and seeds shared.
pub fn alpha_sweep(a: &DomainDataset, b: &DomainDataset, alphas: &[f64], cfg: &CvConfig) -> Result<Vec<SweepPoint>> {
    if alphas.is_empty() {
        return Err(Error::Empty("alpha grid"));
    }
    if let Some(bad) = alphas.iter().find(|x| !(0.0..0.5).contains(*x)) {
        return Err(Error::InvalidConfig(format!("sweep alpha {bad} outside [0, 0.5)")));
    }
    alphas
        .iter()
        .map(|&alpha| {
            log::info!("alpha sweep: alpha = {alpha}");
            let report = run_cv(a, b, &CvConfig { alpha, ..cfg.clone() })?;
            Ok(SweepPoint { alpha, report })
        })
        .collect()
}
