//! Rating and ranking metrics, record-level cross-validation and the
//! transfer-rate sweep.

mod cv;
mod metrics;
mod report;

pub use cv::{
    alpha_sweep, run_cv, run_cv_single, CvConfig, CvReport, FoldMetrics, MetricsReport, SweepPoint, DEFAULT_ALPHA,
};
pub use metrics::{mae, precision_recall_at_k, rmse, RankingMetrics, Scored};
pub use report::{write_fit_traces_csv, write_json, write_metrics_csv, write_sweep_csv};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::AutoencoderConfig;
    use crate::dualmodel::{FitConfig, Side};
    use crate::features::{synth_pair, SynthConfig, SynthPair};

    fn pair(seed: u64) -> SynthPair {
        synth_pair(&SynthConfig {
            n_users: 60,
            n_items_per_domain: 40,
            density: 0.2,
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn quick(alpha: f64) -> CvConfig {
        CvConfig {
            alpha,
            folds: 3,
            seed: 5,
            autoencoder: AutoencoderConfig {
                epochs: 10,
                ..AutoencoderConfig::default()
            },
            fit: FitConfig {
                epochs: 4,
                tol: 0.0,
                lr_a: 0.05,
                lr_b: 0.05,
                ..FitConfig::default()
            },
            ..CvConfig::default()
        }
    }

    #[test]
    fn defaults_echoed() {
        let p = pair(1);
        let cfg = CvConfig {
            folds: 2,
            autoencoder: AutoencoderConfig {
                epochs: 2,
                ..AutoencoderConfig::default()
            },
            fit: FitConfig {
                epochs: 1,
                ..FitConfig::default()
            },
            ..CvConfig::default()
        };
        let r = run_cv(&p.a, &p.b, &cfg).unwrap();
        assert_eq!(r.a.config.alpha, 0.03);
        assert_eq!(r.a.config.autoencoder.embed_dim, 8);
        assert_eq!(r.b.config, cfg);
        assert_eq!(r.a.folds.len(), 2);
    }

    #[test]
    fn alpha_zero_equals_independent_single_domain_runs() {
        let p = pair(2);
        let cfg = quick(0.0);
        let dual = run_cv(&p.a, &p.b, &cfg).unwrap();
        let single_a = run_cv_single(&p.a, Side::A, &cfg).unwrap();
        let single_b = run_cv_single(&p.b, Side::B, &cfg).unwrap();
        for (d, s) in [(&dual.a, &single_a), (&dual.b, &single_b)] {
            for (x, y) in d.folds.iter().zip(&s.folds) {
                assert!((x.rmse - y.rmse).abs() <= 1e-9);
                assert!((x.mae - y.mae).abs() <= 1e-9);
                assert!((x.precision_at_k - y.precision_at_k).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn reproducible_and_ordered() {
        let p = pair(3);
        let cfg = quick(0.1);
        let r1 = run_cv(&p.a, &p.b, &cfg).unwrap();
        let r2 = run_cv(&p.a, &p.b, &cfg).unwrap();
        assert_eq!(r1, r2);
        for r in [&r1.a, &r1.b] {
            assert!(r.rmse >= r.mae && r.mae >= 0.0);
            assert!((0.0..=1.0).contains(&r.precision_at_k));
            let total: usize = r.folds.iter().map(|f| f.n_test).sum();
            assert_eq!(
                total,
                if r.domain == "A" {
                    p.a.interactions.len()
                } else {
                    p.b.interactions.len()
                }
            );
        }
    }

    #[test]
    fn sweep_row_at_zero_matches_baseline() {
        let p = pair(4);
        let cfg = quick(0.03);
        let sweep = alpha_sweep(&p.a, &p.b, &[0.0, 0.1], &cfg).unwrap();
        let base = run_cv(&p.a, &p.b, &quick(0.0)).unwrap();
        assert_eq!(
            sweep[0].report,
            CvReport {
                a: MetricsReport {
                    config: sweep[0].report.a.config.clone(),
                    ..base.a.clone()
                },
                b: MetricsReport {
                    config: sweep[0].report.b.config.clone(),
                    ..base.b.clone()
                },
                traces: base.traces.clone(),
            }
        );
        assert_eq!(sweep[0].report.a.rmse.to_bits(), base.a.rmse.to_bits());
        assert!(alpha_sweep(&p.a, &p.b, &[0.5], &cfg).is_err());
        assert!(alpha_sweep(&p.a, &p.b, &[], &cfg).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let p = pair(5);
        assert!(run_cv(
            &p.a,
            &p.b,
            &CvConfig {
                alpha: 0.5,
                ..quick(0.0)
            }
        )
        .is_err());
        assert!(run_cv(&p.a, &p.b, &CvConfig { folds: 1, ..quick(0.0) }).is_err());
        assert!(run_cv(&p.a, &p.a, &quick(0.0)).is_err());
    }

    #[test]
    fn csv_outputs() {
        let p = pair(6);
        let r = run_cv(&p.a, &p.b, &quick(0.03)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics_csv(&path, &[&r.a, &r.b]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "domain,fold,rmse,mae,precision_at_5,recall_at_5");
        assert_eq!(lines.count(), 6);
        let mut rd = csv::Reader::from_path(&path).unwrap();
        for rec in rd.records() {
            let rec = rec.unwrap();
            let rmse: f64 = rec[2].parse().unwrap();
            let mae: f64 = rec[3].parse().unwrap();
            assert!(rmse >= mae);
        }
        let t = dir.path().join("t.csv");
        write_fit_traces_csv(&t, &r.traces).unwrap();
        let rows = std::fs::read_to_string(&t).unwrap().lines().count();
        assert_eq!(rows, 1 + 3 * 5);
    }
}
