//! Non-homogeneous Farkas certificates for uncertain linear systems over
//! spectrahedra.
//!
//! The implication
//!
//! ```text
//! a_j(u)^T x <= b_j(u) for all u in U_j, j = 1..q   ==>   p^T x - r >= 0
//! ```
//!
//! is certified by multipliers `lambda_j^0 >= 0`, `lambda_j^i` with
//! `p + sum_j (lambda_j^0 a_j^0 + sum_i lambda_j^i a_j^i) = 0`,
//! `-r - sum_j (lambda_j^0 b_j^0 + sum_i lambda_j^i b_j^i) >= 0` and
//! `lambda_j^0 A_j^0 + sum_i lambda_j^i A_j^i >= 0`. The converse holds when the
//! cone generated by `(a_j(u), b_j(u))` is closed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::conic::{ConicBuilder, LinExpr, SolveStatus, SolverSettings, Var};
use crate::uncertainty::{AffineUncertainConstraint, UncertaintyError, UncertaintySet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FarkasError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solver could not decide the certificate problem: {0}")]
    Indeterminate(String),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

/// Multipliers `(lambda_j^0, lambda_j^1..lambda_j^s)` for each constraint `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FarkasCertificate {
    pub lambda0: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
}

impl FarkasCertificate {
    pub fn max_abs(&self) -> f64 {
        self.lambda0
            .iter()
            .chain(self.lambda.iter().flatten())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct FarkasOptions {
    /// Euclidean bound on the multiplier vector. Keeps the search problem
    /// strongly infeasible when only unbounded approximate certificates exist.
    pub lambda_bound: f64,
    pub settings: SolverSettings,
}

impl Default for FarkasOptions {
    fn default() -> Self {
        Self {
            lambda_bound: 1e3,
            settings: SolverSettings::default(),
        }
    }
}

/// Residuals of the certificate conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateResiduals {
    /// `||p + sum_j (...)||_inf`.
    pub stationarity: f64,
    /// `-r - sum_j (...)`; must be nonnegative.
    pub slack: f64,
    /// `min_j lambda_j^0`.
    pub min_lambda0: f64,
    /// Smallest eigenvalue over all pencils `lambda_j^0 A_j^0 + sum_i lambda_j^i A_j^i`.
    pub min_pencil_eig: f64,
}

impl CertificateResiduals {
    /// Checks every condition at tolerance `tol * (1 + ||lambda||_inf)`.
    pub fn passes(&self, tol: f64, lambda_scale: f64) -> bool {
        let t = tol * (1.0 + lambda_scale);
        self.min_lambda0 >= -tol.min(1e-9) && self.stationarity <= t && self.slack >= -t && self.min_pencil_eig >= -t
    }
}

fn check_dims(p: &[f64], constraints: &[AffineUncertainConstraint]) -> Result<(), FarkasError> {
    for (j, c) in constraints.iter().enumerate() {
        if c.n() != p.len() {
            return Err(FarkasError::DimensionMismatch(format!(
                "constraint {j} acts on {} variables, p has {}",
                c.n(),
                p.len()
            )));
        }
    }
    Ok(())
}

/// Multiplier variables for one constraint together with the expression
/// `lambda^0 b^0 + sum_i lambda^i b^i`.
pub(crate) struct MultiplierBlock {
    pub lambda0: Var,
    pub lambda: Vec<Var>,
}

/// Adds `lambda^0 A^0 + sum_i lambda^i A^i >= 0` with `lambda^0 >= 0`, using the
/// linear form for boxes and the second-order form for balls.
pub(crate) fn add_multipliers(b: &mut ConicBuilder, set: &UncertaintySet) -> MultiplierBlock {
    let lambda0 = b.nonneg();
    let lambda = b.free_vec(set.dim());
    let l0 = LinExpr::from(lambda0);
    match set {
        UncertaintySet::Box(bx) => {
            for (&li, (lo, hi)) in lambda.iter().zip(bx.bounds()) {
                b.add_nonneg(LinExpr::from(li) - l0.scaled(lo));
                b.add_nonneg(l0.scaled(hi) - LinExpr::from(li));
            }
        }
        UncertaintySet::Ball { .. } => {
            let mut cone = vec![l0];
            cone.extend(lambda.iter().map(|&v| LinExpr::from(v)));
            b.add_soc(cone);
        }
        UncertaintySet::Spectrahedron(s) => {
            let mut coeffs = vec![l0];
            coeffs.extend(lambda.iter().map(|&v| LinExpr::from(v)));
            let mats = s.matrices();
            let p = s.order();
            let mat: Vec<Vec<LinExpr>> = (0..p)
                .map(|r| {
                    (0..p)
                        .map(|c| {
                            let mut e = LinExpr::zero();
                            for (k, m) in mats.iter().enumerate() {
                                if m[(r, c)] != 0.0 {
                                    e.add_scaled(&coeffs[k], m[(r, c)]);
                                }
                            }
                            e
                        })
                        .collect()
                })
                .collect();
            b.add_psd(&mat);
        }
    }
    MultiplierBlock { lambda0, lambda }
}

/// Residuals of `cert` for the implication with right-hand constants
/// `b_j^0 - shifts[j]`.
pub(crate) fn residuals_shifted(
    cert: &FarkasCertificate,
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
    shifts: &[f64],
) -> Result<CertificateResiduals, FarkasError> {
    check_dims(p, constraints)?;
    if cert.lambda0.len() != constraints.len() || cert.lambda.len() != constraints.len() {
        return Err(FarkasError::DimensionMismatch(
            "one multiplier block per constraint expected".into(),
        ));
    }
    let mut stat = p.to_vec();
    let mut slack = -r;
    let mut min_eig = f64::INFINITY;
    for (j, c) in constraints.iter().enumerate() {
        let l0 = cert.lambda0[j];
        let li = &cert.lambda[j];
        if li.len() != c.s() {
            return Err(FarkasError::DimensionMismatch(format!(
                "block {j} has {} multipliers, set dimension is {}",
                li.len(),
                c.s()
            )));
        }
        for (k, st) in stat.iter_mut().enumerate() {
            *st += l0 * c.a[0][k] + li.iter().enumerate().map(|(i, v)| v * c.a[i + 1][k]).sum::<f64>();
        }
        slack -= l0 * (c.b[0] - shifts[j]) + li.iter().enumerate().map(|(i, v)| v * c.b[i + 1]).sum::<f64>();
        let spec = c.set.to_spectrahedron();
        let mut pencil = &spec.matrices()[0] * l0;
        for (v, m) in li.iter().zip(&spec.matrices()[1..]) {
            pencil += m * *v;
        }
        let eig = if pencil.nrows() == 0 {
            f64::INFINITY
        } else {
            ((&pencil + pencil.transpose()) * 0.5).symmetric_eigenvalues().min()
        };
        min_eig = min_eig.min(eig);
    }
    Ok(CertificateResiduals {
        stationarity: stat.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        slack,
        min_lambda0: cert.lambda0.iter().copied().fold(f64::INFINITY, f64::min),
        min_pencil_eig: min_eig,
    })
}

pub fn certificate_residuals(
    cert: &FarkasCertificate,
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
) -> Result<CertificateResiduals, FarkasError> {
    residuals_shifted(cert, p, r, constraints, &vec![0.0; constraints.len()])
}

/// Checks all certificate conditions at tolerance `tol` (scaled by `1 + ||lambda||_inf`).
pub fn verify_certificate(
    cert: &FarkasCertificate,
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
    tol: f64,
) -> bool {
    certificate_residuals(cert, p, r, constraints).is_ok_and(|res| res.passes(tol, cert.max_abs()))
}

pub fn find_certificate(
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
) -> Result<Option<FarkasCertificate>, FarkasError> {
    find_certificate_with(p, r, constraints, &FarkasOptions::default())
}

/// Searches for multipliers, maximizing the inequality slack (capped at 1).
/// `Ok(None)` means the solver proved that no certificate exists within the
/// multiplier bound, or that the best slack is negative.
pub fn find_certificate_with(
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
    opts: &FarkasOptions,
) -> Result<Option<FarkasCertificate>, FarkasError> {
    find_shifted(p, r, constraints, &vec![0.0; constraints.len()], opts)
}

/// Stationarity rows, multiplier cones and the bound `||lambda|| <= lambda_bound`.
/// Also returns the slack `-r - sum_j lambda_j^T b_j` for the caller to constrain.
fn certificate_model(
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
    shifts: &[f64],
    opts: &FarkasOptions,
) -> Result<(ConicBuilder, Vec<MultiplierBlock>, LinExpr), FarkasError> {
    check_dims(p, constraints)?;
    let mut b = ConicBuilder::new();
    let blocks: Vec<MultiplierBlock> = constraints.iter().map(|c| add_multipliers(&mut b, &c.set)).collect();
    for (k, &pk) in p.iter().enumerate() {
        let mut e = LinExpr::constant(pk);
        for (c, blk) in constraints.iter().zip(&blocks) {
            e.add_term(blk.lambda0, c.a[0][k]);
            for (i, &li) in blk.lambda.iter().enumerate() {
                e.add_term(li, c.a[i + 1][k]);
            }
        }
        b.add_eq(e, 0.0);
    }
    let mut slack = LinExpr::constant(-r);
    for ((c, blk), &sh) in constraints.iter().zip(&blocks).zip(shifts) {
        slack.add_term(blk.lambda0, -(c.b[0] - sh));
        for (i, &li) in blk.lambda.iter().enumerate() {
            slack.add_term(li, -c.b[i + 1]);
        }
    }
    let mut norm = vec![LinExpr::constant(opts.lambda_bound)];
    for blk in &blocks {
        norm.push(blk.lambda0.into());
        norm.extend(blk.lambda.iter().map(|&v| LinExpr::from(v)));
    }
    b.add_soc(norm);
    Ok((b, blocks, slack))
}

/// Solves the exact certificate system (zero stationarity residual,
/// nonnegative slack, bounded multipliers) as a pure feasibility problem.
/// `SolveStatus::Infeasible` means the solver returned an infeasibility
/// certificate for it.
pub fn exact_certificate_status(
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
    opts: &FarkasOptions,
) -> Result<SolveStatus, FarkasError> {
    let shifts = vec![0.0; constraints.len()];
    let (mut b, _, slack) = certificate_model(p, r, constraints, &shifts, opts)?;
    b.add_nonneg(slack);
    b.minimize(LinExpr::zero());
    let sol = b
        .solve(&opts.settings)
        .map_err(|e| FarkasError::Indeterminate(e.to_string()))?;
    Ok(sol.status)
}

pub(crate) fn find_shifted(
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
    shifts: &[f64],
    opts: &FarkasOptions,
) -> Result<Option<FarkasCertificate>, FarkasError> {
    let (mut b, blocks, slack) = certificate_model(p, r, constraints, shifts, opts)?;
    let t = b.free();
    b.add_nonneg(LinExpr::constant(1.0) - t.into());
    b.add_nonneg(slack - t.into());
    b.maximize(t.into());

    let sol = b
        .solve(&opts.settings)
        .map_err(|e| FarkasError::Indeterminate(e.to_string()))?;
    match sol.status {
        SolveStatus::Infeasible => return Ok(None),
        SolveStatus::Optimal | SolveStatus::NearOptimal => {}
        other => return Err(FarkasError::Indeterminate(format!("{other:?}"))),
    }
    let cert = FarkasCertificate {
        lambda0: blocks.iter().map(|blk| sol.value(blk.lambda0).max(0.0)).collect(),
        lambda: blocks
            .iter()
            .map(|blk| blk.lambda.iter().map(|&v| sol.value(v)).collect())
            .collect(),
    };
    let tol = 1e-6;
    if sol.value(t) < -tol * (1.0 + cert.max_abs()) {
        return Ok(None);
    }
    let res = residuals_shifted(&cert, p, r, constraints, shifts)?;
    if res.passes(tol, cert.max_abs()) {
        Ok(Some(cert))
    } else {
        Err(FarkasError::Indeterminate(format!(
            "solver point fails verification (stationarity {:.2e}, slack {:.2e}, pencil {:.2e})",
            res.stationarity, res.slack, res.min_pencil_eig
        )))
    }
}

#[derive(Debug, Clone)]
pub struct SamplingOptions {
    pub seed: u64,
    /// Samples are drawn from `[-bound, bound]^n`.
    pub bound: f64,
    /// A violation `p^T x < r - tol` refutes the implication.
    pub tol: f64,
    /// Points whose worst-case constraint value exceeds this are infeasible.
    pub feas_tol: f64,
    /// Maximum number of infeasible samples projected into the set.
    pub max_projections: usize,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            bound: 10.0,
            tol: 1e-6,
            feas_tol: 1e-9,
            max_projections: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImplicationCheck {
    /// False iff a feasible point violating the implication was found.
    pub holds: bool,
    pub witness: Option<Vec<f64>>,
    pub feasible_samples: usize,
    pub drawn: usize,
    /// `min (p^T x - r)` over the feasible samples.
    pub min_margin: f64,
}

/// Worst-case violation `max_j max_u [a_j(u)^T x - b_j(u) + shift_j]`.
pub(crate) fn max_violation(
    constraints: &[AffineUncertainConstraint],
    x: &[f64],
    shifts: &[f64],
) -> Result<f64, UncertaintyError> {
    let mut worst = f64::NEG_INFINITY;
    for (c, &sh) in constraints.iter().zip(shifts) {
        worst = worst.max(c.worst_case(x, sh)?);
    }
    Ok(worst)
}

/// Projects `x` into `{z : worst-case <= -margin}`; `None` if that set is empty
/// or the solve fails.
fn project(constraints: &[AffineUncertainConstraint], x: &[f64], margin: f64) -> Option<Vec<f64>> {
    let mut b = ConicBuilder::new();
    let z = b.free_vec(x.len());
    let ze: Vec<LinExpr> = z.iter().map(|&v| v.into()).collect();
    for c in constraints {
        c.add_robust(&mut b, &ze, LinExpr::zero(), LinExpr::constant(margin));
    }
    let t = b.free();
    let mut cone = vec![LinExpr::from(t)];
    cone.extend(
        z.iter()
            .zip(x)
            .map(|(&v, &xi)| LinExpr::from(v) - LinExpr::constant(xi)),
    );
    b.add_soc(cone);
    b.minimize(t.into());
    let sol = b.solve(&SolverSettings::default()).ok()?;
    sol.status
        .is_solved()
        .then(|| z.iter().map(|&v| sol.value(v)).collect())
}

/// Sampling oracle for the primal implication. Evaluates a grid and uniform
/// random points in `[-bound, bound]^n`, plus projections of infeasible
/// samples into the set shrunk by a small margin.
pub fn check_implication_sampled(
    p: &[f64],
    r: f64,
    constraints: &[AffineUncertainConstraint],
    n_samples: usize,
    opts: &SamplingOptions,
) -> Result<ImplicationCheck, FarkasError> {
    check_dims(p, constraints)?;
    let n = p.len();
    let shifts = vec![0.0; constraints.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // Odd per-axis grid so that zero coordinates are included.
    let mut per_axis = 1usize;
    while n > 0 && (per_axis + 2).checked_pow(n as u32).is_some_and(|c| c <= n_samples / 2) {
        per_axis += 2;
    }
    let grid_count = if n == 0 { 1 } else { per_axis.pow(n as u32) };
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(n_samples.max(grid_count));
    for idx in 0..grid_count.min(n_samples.max(1)) {
        let mut rem = idx;
        let mut pt = vec![0.0; n];
        for v in pt.iter_mut() {
            let k = rem % per_axis;
            rem /= per_axis;
            *v = if per_axis == 1 {
                0.0
            } else {
                -opts.bound + 2.0 * opts.bound * k as f64 / (per_axis - 1) as f64
            };
        }
        samples.push(pt);
    }
    while samples.len() < n_samples {
        samples.push((0..n).map(|_| rng.random_range(-opts.bound..=opts.bound)).collect());
    }

    let mut result = ImplicationCheck {
        holds: true,
        witness: None,
        feasible_samples: 0,
        drawn: samples.len(),
        min_margin: f64::INFINITY,
    };
    let mut projections = 0;
    let mut projection_possible = true;
    let margin = 1e-7;
    for x in samples {
        let point = if max_violation(constraints, &x, &shifts)? <= opts.feas_tol {
            Some(x)
        } else if projection_possible && projections < opts.max_projections {
            projections += 1;
            match project(constraints, &x, margin) {
                Some(z) if max_violation(constraints, &z, &shifts)? <= opts.feas_tol => Some(z),
                Some(_) => None,
                None => {
                    projection_possible = false;
                    None
                }
            }
        } else {
            None
        };
        let Some(x) = point else { continue };
        result.feasible_samples += 1;
        let value = p.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - r;
        result.min_margin = result.min_margin.min(value);
        if value < -opts.tol && result.holds {
            result.holds = false;
            result.witness = Some(x);
        }
    }
    Ok(result)
}
