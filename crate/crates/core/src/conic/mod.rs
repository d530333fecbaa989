//! A primal-dual interior-point solver for linear conic programs
//!
//! ```text
//! minimize    c^T x
//! subject to  A x = b,  x in Free^f x R_+^l x Q^{q_1} x ... x S_+^{n_1} x ...
//! ```
//!
//! PSD variables are stored in `svec` form. The method runs on the
//! homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector, so infeasible and unbounded problems terminate with a
//! certificate instead of diverging.

mod builder;
mod cones;
mod dump;
mod ipm;
pub mod svec;

pub use builder::{ConicBuilder, LinExpr, PsdVar, Sense, SolvedModel, Var};
pub use dump::write_dump;
pub use ipm::solve;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("invalid conic problem: {0}")]
    Invalid(String),
}

/// Cone layout of the variable vector: free, nonnegative, second-order, PSD.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConeSpec {
    pub free: usize,
    pub nonneg: usize,
    /// Dimensions of second-order cones `x_0 >= ||x_{1..}||`.
    pub soc: Vec<usize>,
    /// Orders of PSD cones.
    pub psd: Vec<usize>,
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.free + self.conic_dim()
    }

    pub fn conic_dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>() + self.psd.iter().map(|&n| svec::svec_len(n)).sum::<usize>()
    }

    /// Barrier degree of the conic part.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len() + self.psd.iter().sum::<usize>()
    }
}

/// Problem data with sparse constraint rows.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProblem {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.num_vars();
        if self.cones.dim() != n {
            return Err(ConicError::Invalid(format!(
                "cone dimensions sum to {} but there are {n} variables",
                self.cones.dim()
            )));
        }
        if self.rows.len() != self.b.len() {
            return Err(ConicError::Invalid(format!(
                "{} rows but {} right-hand sides",
                self.rows.len(),
                self.b.len()
            )));
        }
        if self.cones.soc.contains(&0) || self.cones.psd.contains(&0) {
            return Err(ConicError::Invalid("empty cone block".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if j >= n {
                    return Err(ConicError::Invalid(format!("row {i} references column {j} >= {n}")));
                }
                if !v.is_finite() {
                    return Err(ConicError::Invalid(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        if self.b.iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(ConicError::Invalid("non-finite data in b or c".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    /// Stopped early; residuals meet the reduced tolerance only.
    NearOptimal,
    /// Primal infeasible; `y` holds a Farkas certificate.
    Infeasible,
    /// Dual infeasible; `x` holds an improving ray.
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub tol_infeas: f64,
    /// Tolerance accepted when the method stalls.
    pub tol_reduced: f64,
    pub max_iter: usize,
    pub threads: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            tol_infeas: 1e-8,
            tol_reduced: 1e-5,
            max_iter: 200,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()).min(8),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub iterations: usize,
    /// `||A x - b||_inf / (1 + ||b||_inf)` in the original data.
    pub primal_residual: f64,
    /// `||A^T y + s - c||_inf / (1 + ||c||_inf)` in the original data.
    pub dual_residual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("matrix is not symmetric (asymmetry {0:.3e})")]
pub struct NotSymmetric(pub f64);

/// True iff `lambda_min(m) >= -tol * (1 + ||m||)` (spectral norm).
pub fn psd_check(m: &nalgebra::DMatrix<f64>, tol: f64) -> Result<bool, NotSymmetric> {
    if m.nrows() != m.ncols() {
        return Err(NotSymmetric(f64::INFINITY));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 {
        return Err(NotSymmetric(asym));
    }
    if m.nrows() == 0 {
        return Ok(true);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let norm = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(eig.min() >= -tol * (1.0 + norm))
}
