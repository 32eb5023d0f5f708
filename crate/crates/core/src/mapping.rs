//! Latent orthogonal map between the user-embedding spaces of two domains.
//!
//! `X` carries domain-A user embeddings into domain B's space; `Xᵀ` goes back.
//! Training perturbs `X` with gradient steps, so the map also provides the
//! orthogonality penalty `‖XᵀX − I‖²` and a projection back onto the
//! orthogonal group (Newton–Schulz polar iteration).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, SeededRng};

/// Orthogonality required after every projection: `‖XᵀX − I‖_F ≤ ORTHO_TOL`.
pub const ORTHO_TOL: f64 = 1e-6;
pub const MAX_PROJECTION_ITERS: usize = 50;
/// Newton–Schulz keeps iterating past `ORTHO_TOL` until this, since the
/// quadratic tail costs one or two extra steps.
const POLISH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalMap {
    x: Matrix,
    domain_pair: (String, String),
}

/// Haar-distributed orthogonal matrix: Gaussian entries, orthonormalized by
/// Gram–Schmidt (two passes).
pub fn random_orthogonal(d: usize, rng: &mut SeededRng) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.normal());
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| g[(i, j)]).collect()).collect();
    for j in 0..d {
        for _pass in 0..2 {
            for k in 0..j {
                let proj: f64 = cols[j].iter().zip(&cols[k]).map(|(a, b)| a * b).sum();
                let (done, rest) = cols.split_at_mut(j);
                for (a, b) in rest[0].iter_mut().zip(&done[k]) {
                    *a -= proj * b;
                }
            }
        }
        let n = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut cols[j] {
            *v /= n;
        }
    }
    Matrix::from_fn(d, d, |i, j| cols[j][i])
}

/// `‖XᵀX − I‖_F`.
pub fn orthogonality_error(x: &Matrix) -> f64 {
    gram_residual(x).frobenius_norm()
}

fn gram_residual(x: &Matrix) -> Matrix {
    let mut g = x
        .t_matmul(x)
        .unwrap_or_else(|_| Matrix::filled(x.cols(), x.cols(), f64::NAN));
    for i in 0..x.cols() {
        g[(i, i)] -= 1.0;
    }
    g
}

impl OrthogonalMap {
    /// Random orthogonal `d × d` map.
    pub fn init(d: usize, seed: u64, domain_pair: (String, String)) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("mapping dimension must be >= 1".into()));
        }
        Ok(OrthogonalMap {
            x: random_orthogonal(d, &mut SeededRng::new(seed)),
            domain_pair,
        })
    }

    pub fn identity(d: usize, domain_pair: (String, String)) -> Self {
        OrthogonalMap {
            x: Matrix::identity(d),
            domain_pair,
        }
    }

    /// Wraps an arbitrary square matrix; orthogonality is not checked.
    pub fn from_matrix(x: Matrix, domain_pair: (String, String)) -> Result<Self> {
        if x.rows() != x.cols() || x.rows() == 0 {
            return Err(Error::DimensionMismatch {
                op: "OrthogonalMap::from_matrix",
                left: x.shape(),
                right: (x.rows(), x.rows()),
            });
        }
        x.ensure_finite("OrthogonalMap::from_matrix")?;
        Ok(OrthogonalMap { x, domain_pair })
    }

    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.x
    }

    pub fn domain_pair(&self) -> (&str, &str) {
        (&self.domain_pair.0, &self.domain_pair.1)
    }

    /// The reverse map `Xᵀ`, with the domain pair swapped.
    pub fn transposed(&self) -> OrthogonalMap {
        OrthogonalMap {
            x: self.x.transpose(),
            domain_pair: (self.domain_pair.1.clone(), self.domain_pair.0.clone()),
        }
    }

    /// `X·e`.
    pub fn forward(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.x.matvec(e)
    }

    /// `Xᵀ·e`, the inverse of [`forward`](Self::forward) for orthogonal `X`.
    pub fn inverse(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.x.t_matvec(e)
    }

    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.x)
    }

    /// `‖XᵀX − I‖_F²` and its gradient `4·X·(XᵀX − I)`.
    pub fn penalty(&self) -> (f64, Matrix) {
        let r = gram_residual(&self.x);
        let grad = self
            .x
            .matmul(&r)
            .map(|m| m.scale(4.0))
            .unwrap_or_else(|_| Matrix::filled(self.dim(), self.dim(), f64::NAN));
        (r.frobenius_sq(), grad)
    }

    /// Nearest orthogonal matrix (the polar factor) by Newton–Schulz,
    /// `X ← X(3I − XᵀX)/2`.
    ///
    /// The iteration converges when every singular value lies in (0, √3);
    /// larger inputs are first scaled down by an upper bound on the spectral
    /// norm, which leaves the polar factor unchanged.
    pub fn project(&self) -> Result<OrthogonalMap> {
        let d = self.dim();
        let mut x = self.x.clone();
        let mut err = orthogonality_error(&x);
        if err > ORTHO_TOL {
            let bound = x.frobenius_norm().min((x.norm_1() * x.norm_inf()).sqrt());
            if bound >= 3f64.sqrt() {
                x = x.scale(1.0 / bound);
                err = orthogonality_error(&x);
            }
        }
        let diverged = |err: f64| Error::ProjectionDiverged {
            iterations: MAX_PROJECTION_ITERS,
            residual: err,
        };
        let mut iterations = 0;
        while err > POLISH_TOL {
            if iterations == MAX_PROJECTION_ITERS {
                if err <= ORTHO_TOL {
                    break;
                }
                return Err(diverged(err));
            }
            let mut inner = x.t_matmul(&x).map_err(|_| diverged(err))?.scale(-1.0);
            for i in 0..d {
                inner[(i, i)] += 3.0;
            }
            let next = x.matmul(&inner).map_err(|_| diverged(err))?.scale(0.5);
            let next_err = orthogonality_error(&next);
            iterations += 1;
            if !next_err.is_finite() {
                return Err(diverged(next_err));
            }
            // Rounding floor reached.
            if next_err >= err && err <= ORTHO_TOL {
                break;
            }
            x = next;
            err = next_err;
        }
        Ok(OrthogonalMap {
            x,
            domain_pair: self.domain_pair.clone(),
        })
    }
}
