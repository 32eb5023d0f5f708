use super::layer::DenseLayer;

/// A scalar function of a flat parameter vector with an analytic gradient.
pub trait Objective {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    fn loss(&self) -> f64;
    fn gradient(&self) -> Vec<f64>;
}

/// Finite-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

/// Maximum relative error between the analytic gradient and central
/// differences, taken over every parameter. Parameters are restored on return.
///
/// The relative error of one coordinate is `|a − n| / max(|a|, |n|, 1e-6)`,
/// so coordinates whose true gradient is ~0 are judged on absolute error.
pub fn grad_check(objective: &mut dyn Objective) -> f64 {
    grad_check_with_step(objective, FD_STEP)
}

pub fn grad_check_with_step(objective: &mut dyn Objective, h: f64) -> f64 {
    let base = objective.params();
    let analytic = objective.gradient();
    assert_eq!(analytic.len(), base.len(), "gradient length");
    let mut probe = base.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        objective.set_params(&probe);
        let up = objective.loss();
        probe[i] = base[i] - h;
        objective.set_params(&probe);
        let down = objective.loss();
        probe[i] = base[i];

        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    objective.set_params(&base);
    worst
}

/// `L = Σ c_k · y_k` for one dense layer, differentiated with respect to the
/// layer parameters and the input.
#[derive(Debug, Clone)]
pub struct LayerObjective {
    pub layer: DenseLayer,
    pub input: Vec<f64>,
    pub probe: Vec<f64>,
}

impl Objective for LayerObjective {
    fn params(&self) -> Vec<f64> {
        let mut p = self.layer.params();
        p.extend_from_slice(&self.input);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let n = self.layer.num_params();
        self.layer.set_params(&params[..n]);
        self.input.copy_from_slice(&params[n..]);
    }

    fn loss(&self) -> f64 {
        let y = self.layer.apply(&self.input).expect("layer objective shape");
        y.iter().zip(&self.probe).map(|(a, b)| a * b).sum()
    }

    fn gradient(&self) -> Vec<f64> {
        let (_, cache) = self.layer.forward(&self.input).expect("layer objective shape");
        let g = self.layer.backward(&cache, &self.probe).expect("layer objective shape");
        let mut out = g.flatten();
        out.extend_from_slice(&g.dx);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Activation, SeededRng};

    fn layer_objective(seed: u64, act: Activation) -> LayerObjective {
        let mut rng = SeededRng::new(seed);
        let mut layer = DenseLayer::xavier(6, 4, act, &mut rng);
        for b in &mut layer.bias {
            *b = 0.1 * rng.normal();
        }
        LayerObjective {
            layer,
            input: (0..6).map(|_| rng.normal()).collect(),
            probe: (0..4).map(|_| rng.normal()).collect(),
        }
    }

    /// Two sigmoid layers with a squared-error head.
    struct TwoLayer {
        l1: DenseLayer,
        l2: DenseLayer,
        x: Vec<f64>,
        target: Vec<f64>,
    }

    impl Objective for TwoLayer {
        fn params(&self) -> Vec<f64> {
            let mut p = self.l1.params();
            p.extend(self.l2.params());
            p
        }
        fn set_params(&mut self, p: &[f64]) {
            let n = self.l1.num_params();
            self.l1.set_params(&p[..n]);
            self.l2.set_params(&p[n..]);
        }
        fn loss(&self) -> f64 {
            let h = self.l1.apply(&self.x).unwrap();
            let y = self.l2.apply(&h).unwrap();
            y.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum()
        }
        fn gradient(&self) -> Vec<f64> {
            let (h, c1) = self.l1.forward(&self.x).unwrap();
            let (y, c2) = self.l2.forward(&h).unwrap();
            let dy: Vec<f64> = y.iter().zip(&self.target).map(|(a, b)| 2.0 * (a - b)).collect();
            let g2 = self.l2.backward(&c2, &dy).unwrap();
            let g1 = self.l1.backward(&c1, &g2.dx).unwrap();
            let mut out = g1.flatten();
            out.extend(g2.flatten());
            out
        }
    }

    struct Corrupted<O: Objective>(O);

    impl<O: Objective> Objective for Corrupted<O> {
        fn params(&self) -> Vec<f64> {
            self.0.params()
        }
        fn set_params(&mut self, p: &[f64]) {
            self.0.set_params(p)
        }
        fn loss(&self) -> f64 {
            self.0.loss()
        }
        fn gradient(&self) -> Vec<f64> {
            let mut g = self.0.gradient();
            g[3] += 0.1;
            g
        }
    }

    #[test]
    fn linear_layer_is_exact() {
        let mut obj = layer_objective(1, Activation::Identity);
        let err = grad_check(&mut obj);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn every_activation_passes() {
        for (seed, act) in [(2, Activation::Sigmoid), (3, Activation::Relu)] {
            let mut obj = layer_objective(seed, act);
            let err = grad_check(&mut obj);
            assert!(err <= 1e-4, "{act:?}: {err}");
        }
    }

    #[test]
    fn sigmoid_mlp_passes() {
        let mut rng = SeededRng::new(9);
        let mut obj = TwoLayer {
            l1: DenseLayer::xavier(5, 7, Activation::Sigmoid, &mut rng),
            l2: DenseLayer::xavier(7, 2, Activation::Sigmoid, &mut rng),
            x: (0..5).map(|_| rng.normal()).collect(),
            target: vec![0.2, 0.9],
        };
        let err = grad_check(&mut obj);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn checker_catches_corruption() {
        let mut obj = Corrupted(layer_objective(4, Activation::Sigmoid));
        let err = grad_check(&mut obj);
        assert!(err > 1e-2, "{err}");
    }

    #[test]
    fn params_restored_after_check() {
        let mut obj = layer_objective(5, Activation::Sigmoid);
        let before = obj.params();
        grad_check(&mut obj);
        assert_eq!(before, obj.params());
    }
}
