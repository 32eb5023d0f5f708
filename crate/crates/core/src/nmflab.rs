//! Dual nonnegative matrix factorization with a fixed mixing matrix.
//!
//! The dual objective couples two factorizations,
//!
//! ```text
//! ‖V_A − (1−α)W_A H_A − α X W_B H_B‖² + ‖V_B − (1−α)W_B H_B − α Xᵀ W_A H_A‖²
//! ```
//!
//! For orthogonal `X` and `α ≠ 1/2` each coupled term can be eliminated, which
//! leaves two ordinary NMF problems with targets
//! `M_A = ((1−α)V_A − αXV_B)/(1−2α)` and `M_B = ((1−α)V_B − αXᵀV_A)/(1−2α)`.
//! Those targets are nonnegative only under conditions (a)–(c); adding a
//! constant `m·k` to every rating restores them when they fail. The
//! multiplicative updates here run on the reduced problems.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, SeededRng};

/// Denominator guard of the multiplicative updates.
pub const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNmfProblem {
    pub v_a: Matrix,
    pub v_b: Matrix,
    /// Fixed nonnegative mixing matrix (for instance a permutation).
    pub x: Matrix,
    pub alpha: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNmfState {
    pub w_a: Matrix,
    pub h_a: Matrix,
    pub w_b: Matrix,
    pub h_b: Matrix,
    /// Dual objective before the first update and after every update.
    pub loss_trace: Vec<f64>,
    /// Sum of the two reduced NMF losses, aligned with `loss_trace`.
    pub reduced_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditions {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

impl Conditions {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c
    }

    pub fn first_failure(&self) -> Option<char> {
        [('a', self.a), ('b', self.b), ('c', self.c)]
            .into_iter()
            .find(|(_, ok)| !ok)
            .map(|(name, _)| name)
    }
}

impl DualNmfProblem {
    pub fn new(v_a: Matrix, v_b: Matrix, x: Matrix, alpha: f64, rank: usize) -> Result<Self> {
        if v_a.shape() != v_b.shape() {
            return Err(Error::DimensionMismatch {
                op: "DualNmfProblem",
                left: v_a.shape(),
                right: v_b.shape(),
            });
        }
        if x.shape() != (v_a.rows(), v_a.rows()) {
            return Err(Error::DimensionMismatch {
                op: "DualNmfProblem mixing matrix",
                left: x.shape(),
                right: (v_a.rows(), v_a.rows()),
            });
        }
        for (name, m) in [("V_A", &v_a), ("V_B", &v_b), ("X", &x)] {
            m.ensure_finite("DualNmfProblem")?;
            if m.min_value() < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} has negative entries")));
            }
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!("alpha {alpha} must be >= 0")));
        }
        if rank == 0 || rank > v_a.rows().min(v_a.cols()) {
            return Err(Error::InvalidConfig(format!(
                "rank {rank} must lie in [1, {}]",
                v_a.rows().min(v_a.cols())
            )));
        }
        Ok(DualNmfProblem {
            v_a,
            v_b,
            x,
            alpha,
            rank,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.v_a.shape()
    }
}

/// Squared Frobenius norm of both coupled residuals.
pub fn dual_loss(p: &DualNmfProblem, s: &DualNmfState) -> Result<f64> {
    let pa = s.w_a.matmul(&s.h_a)?;
    let pb = s.w_b.matmul(&s.h_b)?;
    if pa.shape() != p.v_a.shape() || pb.shape() != p.v_b.shape() {
        return Err(Error::DimensionMismatch {
            op: "dual_loss",
            left: pa.shape(),
            right: p.v_a.shape(),
        });
    }
    let (ra, rb) = dual_residuals(p, &pa, &pb)?;
    Ok(ra.frobenius_sq() + rb.frobenius_sq())
}

/// `(V_A − (1−α)P_A − αXP_B, V_B − (1−α)P_B − αXᵀP_A)` for products `P`.
pub fn dual_residuals(p: &DualNmfProblem, pa: &Matrix, pb: &Matrix) -> Result<(Matrix, Matrix)> {
    let a = p.alpha;
    let x_pb = p.x.matmul(pb)?;
    let xt_pa = p.x.t_matmul(pa)?;
    let ra = Matrix::from_fn(pa.rows(), pa.cols(), |i, j| {
        p.v_a[(i, j)] - (1.0 - a) * pa[(i, j)] - a * x_pb[(i, j)]
    });
    let rb = Matrix::from_fn(pb.rows(), pb.cols(), |i, j| {
        p.v_b[(i, j)] - (1.0 - a) * pb[(i, j)] - a * xt_pa[(i, j)]
    });
    Ok((ra, rb))
}

/// The numerators `(1−α)V_A − αXV_B` and `(1−α)V_B − αXᵀV_A`.
fn numerators(p: &DualNmfProblem) -> Result<(Matrix, Matrix)> {
    let a = p.alpha;
    let x_vb = p.x.matmul(&p.v_b)?;
    let xt_va = p.x.t_matmul(&p.v_a)?;
    let na = p.v_a.zip_with(&x_vb, "reduce", |v, w| (1.0 - a) * v - a * w)?;
    let nb = p.v_b.zip_with(&xt_va, "reduce", |v, w| (1.0 - a) * v - a * w)?;
    Ok((na, nb))
}

/// Single-domain NMF targets `(M_A, M_B)` of the reduced problems.
pub fn reduce(p: &DualNmfProblem) -> Result<(Matrix, Matrix)> {
    let denom = 1.0 - 2.0 * p.alpha;
    if denom == 0.0 {
        return Err(Error::SingularReduction);
    }
    let (na, nb) = numerators(p)?;
    Ok((na.map(|v| v / denom), nb.map(|v| v / denom)))
}

/// (a) `2α − 1 < 0`; (b) `(1−α)V_B − αXᵀV_A ≥ 0`; (c) `(1−α)V_A − αXV_B ≥ 0`.
pub fn check_conditions(p: &DualNmfProblem) -> Conditions {
    let (na, nb) = numerators(p).expect("validated shapes");
    Conditions {
        a: 2.0 * p.alpha - 1.0 < 0.0,
        b: nb.min_value() >= 0.0,
        c: na.min_value() >= 0.0,
    }
}

/// `V + m·k` entrywise, with `m` the rank of the mixing matrix and `k` the
/// rating-scale maximum.
pub fn perturb(v: &Matrix, m: usize, k: f64) -> Matrix {
    let shift = m as f64 * k;
    v.map(|x| x + shift)
}

/// Uniform(0.1, 1.1) factors for an `n × m` target.
pub fn init_factors(n: usize, m: usize, rank: usize, rng: &mut SeededRng) -> (Matrix, Matrix) {
    let w = Matrix::from_fn(n, rank, |_, _| rng.uniform(0.1, 1.1));
    let h = Matrix::from_fn(rank, m, |_, _| rng.uniform(0.1, 1.1));
    (w, h)
}

impl DualNmfState {
    /// Seeded positive factors; domain A and B draw from separate streams.
    pub fn init(p: &DualNmfProblem, seed: u64) -> Result<Self> {
        let (n, m) = p.shape();
        let root = SeededRng::new(seed);
        let (w_a, h_a) = init_factors(n, m, p.rank, &mut root.fork("A"));
        let (w_b, h_b) = init_factors(n, m, p.rank, &mut root.fork("B"));
        let mut s = DualNmfState {
            w_a,
            h_a,
            w_b,
            h_b,
            loss_trace: Vec::new(),
            reduced_trace: Vec::new(),
        };
        s.loss_trace.push(dual_loss(p, &s)?);
        if check_conditions(p).a {
            s.reduced_trace.push(reduced_loss(p, &s)?);
        }
        Ok(s)
    }
}

/// `‖M_A − W_A H_A‖² + ‖M_B − W_B H_B‖²`.
pub fn reduced_loss(p: &DualNmfProblem, s: &DualNmfState) -> Result<f64> {
    let (ma, mb) = reduce(p)?;
    let ea = ma.sub(&s.w_a.matmul(&s.h_a)?)?;
    let eb = mb.sub(&s.w_b.matmul(&s.h_b)?)?;
    Ok(ea.frobenius_sq() + eb.frobenius_sq())
}

/// One Lee–Seung round on `M ≈ WH`: `H` first, then `W` with the new `H`.
pub fn lee_seung(m: &Matrix, w: &Matrix, h: &Matrix) -> Result<(Matrix, Matrix)> {
    let wt_m = w.t_matmul(m)?;
    let wt_w_h = w.t_matmul(w)?.matmul(h)?;
    let h_new = h
        .hadamard(&wt_m)?
        .zip_with(&wt_w_h, "lee_seung", |x, den| x / (den + EPS))?;
    let ht = h_new.transpose();
    let m_ht = m.matmul(&ht)?;
    let w_h_ht = w.matmul(&h_new.matmul(&ht)?)?;
    let w_new = w
        .hadamard(&m_ht)?
        .zip_with(&w_h_ht, "lee_seung", |x, den| x / (den + EPS))?;
    Ok((w_new, h_new))
}

/// One multiplicative round on both reduced problems.
pub fn mu_step(p: &DualNmfProblem, s: &DualNmfState) -> Result<DualNmfState> {
    let (ma, mb) = reduce(p)?;
    if ma.min_value() < 0.0 || mb.min_value() < 0.0 {
        let c = check_conditions(p);
        return Err(Error::ConditionViolated(c.first_failure().unwrap_or('b')));
    }
    let (w_a, h_a) = lee_seung(&ma, &s.w_a, &s.h_a)?;
    let (w_b, h_b) = lee_seung(&mb, &s.w_b, &s.h_b)?;
    let mut next = DualNmfState {
        w_a,
        h_a,
        w_b,
        h_b,
        loss_trace: s.loss_trace.clone(),
        reduced_trace: s.reduced_trace.clone(),
    };
    let loss = dual_loss(p, &next)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("dual NMF loss".into()));
    }
    next.loss_trace.push(loss);
    next.reduced_trace.push(reduced_loss(p, &next)?);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            max_iters: 5000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfRun {
    pub state: DualNmfState,
    pub iterations: usize,
    /// Whether `|Δloss| < tol` was reached inside the budget.
    pub converged: bool,
}

impl NmfRun {
    pub fn final_loss(&self) -> f64 {
        *self.state.loss_trace.last().expect("trace holds the initial loss")
    }

    /// Largest single-step increase of the dual loss (0 if none).
    pub fn max_increase(&self) -> f64 {
        self.state
            .loss_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn last_delta(&self) -> f64 {
        let t = &self.state.loss_trace;
        if t.len() < 2 {
            return f64::INFINITY;
        }
        (t[t.len() - 1] - t[t.len() - 2]).abs()
    }
}

/// Iterates [`mu_step`] until the dual loss changes by less than `tol` or the
/// budget is spent. Refuses to start unless conditions (a)–(c) all hold.
pub fn run_nmf(p: &DualNmfProblem, config: &NmfConfig) -> Result<NmfRun> {
    if let Some(failed) = check_conditions(p).first_failure() {
        return Err(Error::ConditionViolated(failed));
    }
    let mut state = DualNmfState::init(p, config.seed)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        state = mu_step(p, &state)?;
        iterations += 1;
        let t = &state.loss_trace;
        if (t[t.len() - 1] - t[t.len() - 2]).abs() < config.tol {
            converged = true;
            break;
        }
    }
    log::debug!(
        "dual NMF: {iterations} iterations, final loss {}, converged {converged}",
        state.loss_trace.last().unwrap()
    );
    Ok(NmfRun {
        state,
        iterations,
        converged,
    })
}

/// Settings of the desk-scale convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub alpha: f64,
    /// Rating-scale maximum `k`; ratings are drawn from [0, k].
    pub scale: f64,
    pub perturb: bool,
    pub nmf: NmfConfig,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            rows: 20,
            cols: 15,
            rank: 4,
            alpha: 0.1,
            scale: 1.0,
            perturb: true,
            nmf: NmfConfig::default(),
        }
    }
}

/// Random problem for the lab: uniform ratings, a random permutation as the
/// mixing matrix (the nonnegative orthogonal matrices are exactly the
/// permutations), optionally perturbed by `rank(X)·k`.
pub fn lab_problem(config: &LabConfig) -> Result<DualNmfProblem> {
    let root = SeededRng::new(config.nmf.seed);
    let mut rv = root.fork("ratings");
    let (n, m) = (config.rows, config.cols);
    let mut v_a = Matrix::from_fn(n, m, |_, _| rv.uniform(0.0, config.scale));
    let mut v_b = Matrix::from_fn(n, m, |_, _| rv.uniform(0.0, config.scale));
    let perm = root.fork("permutation").permutation(n);
    let x = Matrix::from_fn(n, n, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
    if config.perturb {
        let rank_x = x.rank(1e-12);
        v_a = perturb(&v_a, rank_x, config.scale);
        v_b = perturb(&v_b, rank_x, config.scale);
    }
    DualNmfProblem::new(v_a, v_b, x, config.alpha, config.rank)
}

/// Builds the lab problem and runs it.
pub fn run_lab(config: &LabConfig) -> Result<(DualNmfProblem, NmfRun)> {
    let p = lab_problem(config)?;
    let run = run_nmf(&p, &config.nmf)?;
    Ok((p, run))
}

/// Writes `iter,loss` rows.
pub fn write_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["iter", "loss"]).map_err(|e| csv_err(path, e))?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v}")])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Textbook least-squares NMF by element loops, for cross-checking.
pub fn classical_nmf(v: &Matrix, w0: &Matrix, h0: &Matrix, iters: usize) -> (Matrix, Matrix, f64) {
    let (n, m) = v.shape();
    let r = w0.cols();
    let mut w = w0.clone();
    let mut h = h0.clone();
    for _ in 0..iters {
        let wh = naive_product(&w, &h);
        let mut h_next = h.clone();
        for a in 0..r {
            for j in 0..m {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..n {
                    num += w[(i, a)] * v[(i, j)];
                    den += w[(i, a)] * wh[(i, j)];
                }
                h_next[(a, j)] = h[(a, j)] * num / (den + EPS);
            }
        }
        h = h_next;
        let wh = naive_product(&w, &h);
        let mut w_next = w.clone();
        for i in 0..n {
            for a in 0..r {
                let mut num = 0.0;
                let mut den = 0.0;
                for j in 0..m {
                    num += v[(i, j)] * h[(a, j)];
                    den += wh[(i, j)] * h[(a, j)];
                }
                w_next[(i, a)] = w[(i, a)] * num / (den + EPS);
            }
        }
        w = w_next;
    }
    let wh = naive_product(&w, &h);
    let mut loss = 0.0;
    for i in 0..n {
        for j in 0..m {
            let e = v[(i, j)] - wh[(i, j)];
            loss += e * e;
        }
    }
    (w, h, loss)
}

fn naive_product(w: &Matrix, h: &Matrix) -> Matrix {
    Matrix::from_fn(w.rows(), h.cols(), |i, j| {
        (0..w.cols()).map(|a| w[(i, a)] * h[(a, j)]).sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random(n: usize, m: usize, rng: &mut SeededRng) -> Matrix {
        Matrix::from_fn(n, m, |_, _| rng.uniform(0.0, 1.0))
    }

    fn perm_matrix(n: usize, seed: u64) -> Matrix {
        let perm = SeededRng::new(seed).permutation(n);
        Matrix::from_fn(n, n, |i, j| if perm[i] == j { 1.0 } else { 0.0 })
    }

    fn problem(n: usize, m: usize, rank: usize, alpha: f64, seed: u64, shift: bool) -> DualNmfProblem {
        let mut rng = SeededRng::new(seed);
        let mut va = random(n, m, &mut rng);
        let mut vb = random(n, m, &mut rng);
        let x = perm_matrix(n, seed + 1);
        if shift {
            va = perturb(&va, n, 1.0);
            vb = perturb(&vb, n, 1.0);
        }
        DualNmfProblem::new(va, vb, x, alpha, rank).unwrap()
    }

    #[test]
    fn perfect_factors_have_zero_loss() {
        let mut rng = SeededRng::new(1);
        let (wa, ha) = init_factors(6, 5, 2, &mut rng);
        let (wb, hb) = init_factors(6, 5, 2, &mut rng);
        let p = DualNmfProblem::new(
            wa.matmul(&ha).unwrap(),
            wb.matmul(&hb).unwrap(),
            Matrix::identity(6),
            0.0,
            2,
        )
        .unwrap();
        let s = DualNmfState {
            w_a: wa,
            h_a: ha,
            w_b: wb,
            h_b: hb,
            loss_trace: vec![],
            reduced_trace: vec![],
        };
        assert!(dual_loss(&p, &s).unwrap() <= 1e-20);
    }

    #[test]
    fn zero_factors_give_data_norm() {
        let p = problem(5, 4, 2, 0.2, 2, false);
        let s = DualNmfState {
            w_a: Matrix::zeros(5, 2),
            h_a: Matrix::zeros(2, 4),
            w_b: Matrix::zeros(5, 2),
            h_b: Matrix::zeros(2, 4),
            loss_trace: vec![],
            reduced_trace: vec![],
        };
        let expected = p.v_a.frobenius_sq() + p.v_b.frobenius_sq();
        assert!((dual_loss(&p, &s).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_loss_matches_element_loops() {
        let p = problem(6, 4, 3, 0.3, 3, false);
        let s = DualNmfState::init(&p, 4).unwrap();
        let pa = naive_product(&s.w_a, &s.h_a);
        let pb = naive_product(&s.w_b, &s.h_b);
        let a = p.alpha;
        let mut total = 0.0;
        for i in 0..6 {
            for j in 0..4 {
                let mut x_pb = 0.0;
                let mut xt_pa = 0.0;
                for k in 0..6 {
                    x_pb += p.x[(i, k)] * pb[(k, j)];
                    xt_pa += p.x[(k, i)] * pa[(k, j)];
                }
                let ra = p.v_a[(i, j)] - (1.0 - a) * pa[(i, j)] - a * x_pb;
                let rb = p.v_b[(i, j)] - (1.0 - a) * pb[(i, j)] - a * xt_pa;
                total += ra * ra + rb * rb;
            }
        }
        assert!((dual_loss(&p, &s).unwrap() - total).abs() <= 1e-12 * total.max(1.0));
        let bad = DualNmfState {
            h_a: Matrix::zeros(3, 5),
            ..s
        };
        assert!(dual_loss(&p, &bad).is_err());
    }

    #[test]
    fn reduce_examples() {
        let p = problem(4, 3, 2, 0.0, 5, false);
        let (ma, mb) = reduce(&p).unwrap();
        assert_eq!(ma, p.v_a);
        assert_eq!(mb, p.v_b);

        let j = Matrix::filled(3, 3, 1.0);
        let p = DualNmfProblem::new(j.clone(), j.clone(), Matrix::identity(3), 0.25, 2).unwrap();
        let (ma, mb) = reduce(&p).unwrap();
        assert!(ma.max_abs_diff(&j) < 1e-15 && mb.max_abs_diff(&j) < 1e-15);

        let p = DualNmfProblem::new(j.clone(), j, Matrix::identity(3), 0.5, 2).unwrap();
        assert!(matches!(reduce(&p), Err(Error::SingularReduction)));
    }

    #[test]
    fn reduction_recomposes_data() {
        // (1−α)M_A + αX M_B = V_A when X is orthogonal
        let p = problem(7, 5, 2, 0.3, 6, false);
        let (ma, mb) = reduce(&p).unwrap();
        let a = p.alpha;
        let back_a = ma.scale(1.0 - a).add(&p.x.matmul(&mb).unwrap().scale(a)).unwrap();
        let back_b = mb.scale(1.0 - a).add(&p.x.t_matmul(&ma).unwrap().scale(a)).unwrap();
        assert!(back_a.max_abs_diff(&p.v_a) <= 1e-12);
        assert!(back_b.max_abs_diff(&p.v_b) <= 1e-12);
    }

    #[test]
    fn condition_examples() {
        let p = problem(5, 4, 2, 0.0, 7, false);
        assert!(check_conditions(&p).all());
        let j = Matrix::filled(3, 3, 1.0);
        let p = DualNmfProblem::new(j.clone(), j.clone(), Matrix::identity(3), 0.6, 2).unwrap();
        assert!(!check_conditions(&p).a);
        let p = DualNmfProblem::new(j.clone(), j.scale(0.1), Matrix::identity(3), 0.4, 2).unwrap();
        let c = check_conditions(&p);
        assert!(c.a && !c.b && c.c);
        assert_eq!(c.first_failure(), Some('b'));
    }

    #[test]
    fn perturb_examples() {
        let v = Matrix::filled(2, 2, 0.3);
        assert_eq!(perturb(&v, 8, 1.0)[(0, 1)], 8.3);
        let mut rng = SeededRng::new(8);
        let v = random(4, 4, &mut rng);
        let back = perturb(&v, 8, 1.0).map(|x| x - 8.0);
        assert!(back.max_abs_diff(&v) <= 1e-15);
    }

    #[test]
    fn perturbation_restores_conditions() {
        for (seed, alpha) in [(1, 0.2), (2, 0.35), (3, 0.45), (4, 0.46)] {
            let raw = problem(6, 5, 2, alpha, seed, false);
            let before = check_conditions(&raw);
            assert!(!(before.b && before.c), "fixture should violate (b) or (c)");
            let m = raw.x.rank(1e-12);
            let fixed =
                DualNmfProblem::new(perturb(&raw.v_a, m, 1.0), perturb(&raw.v_b, m, 1.0), raw.x, alpha, 2).unwrap();
            assert!(check_conditions(&fixed).all());
        }
    }

    #[test]
    fn perturbation_needs_rank_above_alpha_ratio() {
        // the shift restores (b) and (c) for ratings in [0, k] only while
        // m ≥ α/(1−2α); with m = 6 that caps α at 6/13
        let va = Matrix::from_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        let vb = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        let shifted = |alpha: f64| {
            DualNmfProblem::new(
                perturb(&va, 6, 1.0),
                perturb(&vb, 6, 1.0),
                Matrix::identity(2),
                alpha,
                1,
            )
            .unwrap()
        };
        assert!(check_conditions(&shifted(6.0 / 13.0 - 1e-9)).all());
        let c = check_conditions(&shifted(0.49));
        assert!(c.a && !(c.b && c.c));
    }

    #[test]
    fn perfect_factorization_is_a_fixed_point() {
        let mut rng = SeededRng::new(9);
        let (w, h) = init_factors(6, 5, 2, &mut rng);
        let v = w.matmul(&h).unwrap();
        let p = DualNmfProblem::new(v.clone(), v.clone(), Matrix::identity(6), 0.0, 2).unwrap();
        let s = DualNmfState {
            w_a: w.clone(),
            h_a: h.clone(),
            w_b: w.clone(),
            h_b: h.clone(),
            loss_trace: vec![0.0],
            reduced_trace: vec![0.0],
        };
        let next = mu_step(&p, &s).unwrap();
        assert!(next.w_a.max_abs_diff(&w) <= 1e-9 && next.h_a.max_abs_diff(&h) <= 1e-9);
        assert!(next.w_b.max_abs_diff(&w) <= 1e-9 && next.h_b.max_abs_diff(&h) <= 1e-9);
    }

    #[test]
    fn one_step_lowers_dual_loss() {
        let p = problem(10, 8, 3, 0.1, 10, true);
        let s = DualNmfState::init(&p, 11).unwrap();
        let next = mu_step(&p, &s).unwrap();
        assert!(next.loss_trace[1] <= next.loss_trace[0]);
    }

    #[test]
    fn alpha_zero_matches_classical_nmf() {
        let p = problem(8, 6, 3, 0.0, 12, false);
        let seed = 13;
        let mut s = DualNmfState::init(&p, seed).unwrap();
        for _ in 0..25 {
            s = mu_step(&p, &s).unwrap();
        }
        let root = SeededRng::new(seed);
        let (wa, ha) = init_factors(8, 6, 3, &mut root.fork("A"));
        let (wb, hb) = init_factors(8, 6, 3, &mut root.fork("B"));
        let (wa, ha, _) = classical_nmf(&p.v_a, &wa, &ha, 25);
        let (wb, hb, _) = classical_nmf(&p.v_b, &wb, &hb, 25);
        assert!(s.w_a.max_abs_diff(&wa) <= 1e-12 && s.h_a.max_abs_diff(&ha) <= 1e-12);
        assert!(s.w_b.max_abs_diff(&wb) <= 1e-12 && s.h_b.max_abs_diff(&hb) <= 1e-12);
    }

    #[test]
    fn run_refuses_when_conditions_fail() {
        let raw = problem(6, 5, 2, 0.3, 14, false);
        match run_nmf(&raw, &NmfConfig::default()) {
            Err(Error::ConditionViolated(c)) => assert!(c == 'b' || c == 'c'),
            other => panic!("expected a condition error, got {other:?}"),
        }
        let j = Matrix::filled(3, 3, 1.0);
        let p = DualNmfProblem::new(j.clone(), j, Matrix::identity(3), 0.6, 2).unwrap();
        let err = run_nmf(&p, &NmfConfig::default()).unwrap_err();
        assert!(err.to_string().contains("(a)"));
    }

    #[test]
    fn huge_tol_stops_after_one_iteration() {
        let p = problem(6, 5, 2, 0.1, 15, true);
        let run = run_nmf(
            &p,
            &NmfConfig {
                tol: 1e9,
                ..NmfConfig::default()
            },
        )
        .unwrap();
        assert_eq!(run.iterations, 1);
        assert_eq!(run.state.loss_trace.len(), 2);
        assert!(run.converged);
    }

    #[test]
    fn reduced_trace_is_monotone() {
        let p = problem(20, 15, 4, 0.2, 16, true);
        let run = run_nmf(
            &p,
            &NmfConfig {
                max_iters: 300,
                ..NmfConfig::default()
            },
        )
        .unwrap();
        for w in run.state.reduced_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn reduction_identity_links_dual_and_reduced_losses() {
        // (1−2α)²·S = ‖(1−α)R_A − αXR_B‖² + ‖(1−α)R_B − αXᵀR_A‖² for orthogonal X
        for (seed, alpha) in [(17, 0.05), (18, 0.1), (19, 0.2), (20, 0.3)] {
            let p = problem(9, 7, 3, alpha, seed, true);
            let s = DualNmfState::init(&p, seed).unwrap();
            let s = mu_step(&p, &s).unwrap();
            let pa = s.w_a.matmul(&s.h_a).unwrap();
            let pb = s.w_b.matmul(&s.h_b).unwrap();
            let (ra, rb) = dual_residuals(&p, &pa, &pb).unwrap();
            let a = alpha;
            let mixed_a = ra.scale(1.0 - a).sub(&p.x.matmul(&rb).unwrap().scale(a)).unwrap();
            let mixed_b = rb.scale(1.0 - a).sub(&p.x.t_matmul(&ra).unwrap().scale(a)).unwrap();
            let lhs = (1.0 - 2.0 * a).powi(2) * reduced_loss(&p, &s).unwrap();
            let rhs = mixed_a.frobenius_sq() + mixed_b.frobenius_sq();
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0), "{lhs} vs {rhs}");
            // and the dual loss is bracketed by the reduced loss
            let d = dual_loss(&p, &s).unwrap();
            let sum = reduced_loss(&p, &s).unwrap();
            assert!(d <= sum * (1.0 + 1e-12) && sum <= d / (1.0 - 2.0 * a).powi(2) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lab_problem_is_perturbed_and_valid() {
        let p = lab_problem(&LabConfig::default()).unwrap();
        assert_eq!(p.shape(), (20, 15));
        assert_eq!(p.x.rank(1e-12), 20);
        assert!(p.v_a.min_value() >= 20.0);
        assert!(check_conditions(&p).all());
        assert_eq!(p.x.t_matmul(&p.x).unwrap(), Matrix::identity(20));
    }

    #[test]
    fn trace_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace_csv(&path, &[3.5, 2.25]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "iter,loss\n0,3.5\n1,2.25\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn factors_stay_nonnegative(seed in 0u64..1000, alpha in 0.0f64..0.45) {
            let p = problem(6, 5, 2, alpha, seed, true);
            let mut s = DualNmfState::init(&p, seed).unwrap();
            for _ in 0..5 {
                s = mu_step(&p, &s).unwrap();
                for m in [&s.w_a, &s.h_a, &s.w_b, &s.h_b] {
                    prop_assert!(m.min_value() >= 0.0);
                }
            }
        }
    }
}
