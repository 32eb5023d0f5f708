//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are skipped. Every key is optional;
//! absent keys take the defaults below. Unknown or repeated keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use duet_core::autoencoder::AutoencoderConfig;
use duet_core::dualmodel::FitConfig;
use duet_core::eval::CvConfig;
use duet_core::features::SynthConfig;
use duet_core::nmflab::{LabConfig, NmfConfig};

/// File name of the effective-config echo written into every output directory.
pub const ECHO_FILE: &str = "config.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Synth,
    Train,
    Eval,
    AlphaSweep,
    NmfLab,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Synth => "synth",
            Mode::Train => "train",
            Mode::Eval => "eval",
            Mode::AlphaSweep => "alpha-sweep",
            Mode::NmfLab => "nmf-lab",
        })
    }
}

impl FromStr for Mode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "synth" => Mode::Synth,
            "train" => Mode::Train,
            "eval" => Mode::Eval,
            "alpha-sweep" => Mode::AlphaSweep,
            "nmf-lab" => Mode::NmfLab,
            other => bail!("unknown mode `{other}`"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Dataset directory read by train, eval and alpha-sweep.
    pub data: PathBuf,
    pub out: PathBuf,
    /// Saved model scored by `eval`; empty means cross-validation instead.
    pub model: Option<PathBuf>,
    pub domain_a: String,
    pub domain_b: String,

    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub embed_dim: usize,
    pub epochs: usize,
    pub tol: f64,
    pub lr_a: f64,
    pub lr_b: f64,
    pub lr_map: f64,
    pub penalty_weight: f64,
    pub batch_size: usize,
    pub ae_epochs: usize,
    pub ae_lr: f64,
    pub ae_batch_size: usize,
    pub folds: usize,
    pub k: usize,
    pub tau: f64,
    pub seed: u64,

    pub rho: f64,
    pub noise: f64,
    pub density: f64,
    pub n_users: usize,
    pub n_items: usize,
    pub latent_dim: usize,

    pub nmf_rows: usize,
    pub nmf_cols: usize,
    pub nmf_rank: usize,
    pub nmf_scale: f64,
    pub nmf_perturb: bool,
    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fit = FitConfig::default();
        let ae = AutoencoderConfig::default();
        let cv = CvConfig::default();
        let synth = SynthConfig::default();
        let lab = LabConfig::default();
        ExperimentConfig {
            mode: Mode::Eval,
            data: PathBuf::from("data"),
            out: PathBuf::from("out"),
            model: None,
            domain_a: "A".into(),
            domain_b: "B".into(),
            alpha: cv.alpha,
            alphas: vec![0.0, 0.01, 0.03, 0.05, 0.1, 0.2],
            embed_dim: ae.embed_dim,
            epochs: fit.epochs,
            tol: fit.tol,
            lr_a: fit.lr_a,
            lr_b: fit.lr_b,
            lr_map: fit.lr_map,
            penalty_weight: fit.penalty_weight,
            batch_size: fit.batch_size,
            ae_epochs: ae.epochs,
            ae_lr: ae.lr,
            ae_batch_size: ae.batch_size,
            folds: cv.folds,
            k: cv.k,
            tau: cv.tau,
            seed: 0,
            rho: synth.rho,
            noise: synth.noise,
            density: synth.density,
            n_users: synth.n_users,
            n_items: synth.n_items_per_domain,
            latent_dim: synth.latent_dim,
            nmf_rows: lab.rows,
            nmf_cols: lab.cols,
            nmf_rank: lab.rank,
            nmf_scale: lab.scale,
            nmf_perturb: lab.perturb,
            nmf_max_iters: lab.nmf.max_iters,
            nmf_tol: lab.nmf.tol,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("`{key}`: cannot parse `{value}`: {e}"))
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = value.parse()?,
            "data" => self.data = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "model" => self.model = (!value.is_empty()).then(|| PathBuf::from(value)),
            "domain_a" => self.domain_a = value.to_string(),
            "domain_b" => self.domain_b = value.to_string(),
            "alpha" => self.alpha = num(key, value)?,
            "alphas" => self.alphas = value.split(',').map(|s| num(key, s.trim())).collect::<Result<_>>()?,
            "embed_dim" => self.embed_dim = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "lr_a" => self.lr_a = num(key, value)?,
            "lr_b" => self.lr_b = num(key, value)?,
            "lr_map" => self.lr_map = num(key, value)?,
            "penalty_weight" => self.penalty_weight = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "ae_epochs" => self.ae_epochs = num(key, value)?,
            "ae_lr" => self.ae_lr = num(key, value)?,
            "ae_batch_size" => self.ae_batch_size = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "noise" => self.noise = num(key, value)?,
            "density" => self.density = num(key, value)?,
            "n_users" => self.n_users = num(key, value)?,
            "n_items" => self.n_items = num(key, value)?,
            "latent_dim" => self.latent_dim = num(key, value)?,
            "nmf_rows" => self.nmf_rows = num(key, value)?,
            "nmf_cols" => self.nmf_cols = num(key, value)?,
            "nmf_rank" => self.nmf_rank = num(key, value)?,
            "nmf_scale" => self.nmf_scale = num(key, value)?,
            "nmf_perturb" => self.nmf_perturb = num(key, value)?,
            "nmf_max_iters" => self.nmf_max_iters = num(key, value)?,
            "nmf_tol" => self.nmf_tol = num(key, value)?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Every key with its current value, in echo order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("mode", self.mode.to_string()),
            ("data", path_str(&self.data)),
            ("out", path_str(&self.out)),
            ("model", self.model.as_deref().map(path_str).unwrap_or_default()),
            ("domain_a", self.domain_a.clone()),
            ("domain_b", self.domain_b.clone()),
            ("alpha", self.alpha.to_string()),
            ("alphas", list(&self.alphas)),
            ("embed_dim", self.embed_dim.to_string()),
            ("epochs", self.epochs.to_string()),
            ("tol", self.tol.to_string()),
            ("lr_a", self.lr_a.to_string()),
            ("lr_b", self.lr_b.to_string()),
            ("lr_map", self.lr_map.to_string()),
            ("penalty_weight", self.penalty_weight.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("ae_epochs", self.ae_epochs.to_string()),
            ("ae_lr", self.ae_lr.to_string()),
            ("ae_batch_size", self.ae_batch_size.to_string()),
            ("folds", self.folds.to_string()),
            ("k", self.k.to_string()),
            ("tau", self.tau.to_string()),
            ("seed", self.seed.to_string()),
            ("rho", self.rho.to_string()),
            ("noise", self.noise.to_string()),
            ("density", self.density.to_string()),
            ("n_users", self.n_users.to_string()),
            ("n_items", self.n_items.to_string()),
            ("latent_dim", self.latent_dim.to_string()),
            ("nmf_rows", self.nmf_rows.to_string()),
            ("nmf_cols", self.nmf_cols.to_string()),
            ("nmf_rank", self.nmf_rank.to_string()),
            ("nmf_scale", self.nmf_scale.to_string()),
            ("nmf_perturb", self.nmf_perturb.to_string()),
            ("nmf_max_iters", self.nmf_max_iters.to_string()),
            ("nmf_tol", self.nmf_tol.to_string()),
        ]
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("line {}: duplicate key `{key}`", n + 1);
            }
            self.set(key, value.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Range checks; run before any work starts.
    pub fn validate(&self) -> Result<()> {
        let in_alpha = |a: f64| (0.0..0.5).contains(&a);
        if !in_alpha(self.alpha) {
            bail!("alpha = {} outside [0, 0.5)", self.alpha);
        }
        if self.alphas.is_empty() {
            bail!("alphas must list at least one value");
        }
        if let Some(a) = self.alphas.iter().find(|a| !in_alpha(**a)) {
            bail!("alphas entry {a} outside [0, 0.5)");
        }
        let positive = [
            ("embed_dim", self.embed_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("ae_epochs", self.ae_epochs),
            ("ae_batch_size", self.ae_batch_size),
            ("k", self.k),
            ("n_users", self.n_users),
            ("n_items", self.n_items),
            ("latent_dim", self.latent_dim),
            ("nmf_rows", self.nmf_rows),
            ("nmf_cols", self.nmf_cols),
            ("nmf_rank", self.nmf_rank),
            ("nmf_max_iters", self.nmf_max_iters),
        ];
        if let Some((key, _)) = positive.iter().find(|(_, v)| *v == 0) {
            bail!("{key} must be >= 1");
        }
        if self.folds < 2 {
            bail!("folds = {} must be >= 2", self.folds);
        }
        for (key, v) in [
            ("lr_a", self.lr_a),
            ("lr_b", self.lr_b),
            ("lr_map", self.lr_map),
            ("ae_lr", self.ae_lr),
            ("nmf_scale", self.nmf_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{key} = {v} must be > 0");
            }
        }
        for (key, v) in [
            ("tol", self.tol),
            ("penalty_weight", self.penalty_weight),
            ("noise", self.noise),
            ("nmf_tol", self.nmf_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bail!("{key} = {v} must be >= 0");
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            bail!("tau = {} outside (0, 1)", self.tau);
        }
        if !(0.0..=1.0).contains(&self.rho) {
            bail!("rho = {} outside [0, 1]", self.rho);
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            bail!("density = {} outside (0, 1]", self.density);
        }
        if self.domain_a.is_empty() || self.domain_a == self.domain_b {
            bail!("domain_a and domain_b must be distinct non-empty names");
        }
        Ok(())
    }

    pub fn autoencoder(&self) -> AutoencoderConfig {
        AutoencoderConfig {
            embed_dim: self.embed_dim,
            lr: self.ae_lr,
            epochs: self.ae_epochs,
            batch_size: self.ae_batch_size,
            seed: self.seed,
        }
    }

    pub fn fit(&self) -> FitConfig {
        FitConfig {
            epochs: self.epochs,
            tol: self.tol,
            lr_a: self.lr_a,
            lr_b: self.lr_b,
            lr_map: self.lr_map,
            batch_size: self.batch_size,
            penalty_weight: self.penalty_weight,
            seed: self.seed,
        }
    }

    pub fn cv(&self) -> CvConfig {
        CvConfig {
            alpha: self.alpha,
            folds: self.folds,
            k: self.k,
            tau: self.tau,
            seed: self.seed,
            autoencoder: self.autoencoder(),
            fit: self.fit(),
        }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            n_users: self.n_users,
            n_items_per_domain: self.n_items,
            latent_dim: self.latent_dim,
            rho: self.rho,
            noise: self.noise,
            density: self.density,
            seed: self.seed,
        }
    }

    pub fn lab(&self) -> LabConfig {
        LabConfig {
            rows: self.nmf_rows,
            cols: self.nmf_cols,
            rank: self.nmf_rank,
            alpha: self.alpha,
            scale: self.nmf_scale,
            perturb: self.nmf_perturb,
            nmf: NmfConfig {
                max_iters: self.nmf_max_iters,
                tol: self.nmf_tol,
                seed: self.seed,
            },
        }
    }
}

/// Reads a config file over the defaults. Range checks are left to
/// [`ExperimentConfig::validate`] so command-line overrides can still apply.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    ExperimentConfig::parse(&text).with_context(|| format!("config {}", path.display()))
}

/// Writes the effective configuration into `dir`.
pub fn write_echo(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(ECHO_FILE);
    std::fs::write(&path, cfg.to_text()).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}
