//! Robust feasibility and robust optimality for the uncertain lower-level LP
//!
//! ```text
//! min_z { c0^T x + d0^T z : c_j^T x + a_j(u_j)^T z <= b_j(u_j) for all u_j in U_j }
//! ```
//!
//! with the upper-level variable `x` fixed.

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::conic::{ConicBuilder, LinExpr, SolveStatus, SolverSettings};
use crate::farkas::{
    find_shifted, residuals_shifted, CertificateResiduals, FarkasCertificate, FarkasError, FarkasOptions,
};
use crate::uncertainty::{
    box_extreme_points, closedness_sufficient, enumeration_cap, AffineUncertainConstraint, Closedness,
    UncertaintyError, UncertaintySet,
};

/// Tolerance on worst-case constraint values for robust feasibility.
pub const FEAS_TOL: f64 = 1e-7;
/// Tolerance for certificate verification.
pub const CERT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowerError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("the lower-level problem needs at least one constraint")]
    NoConstraints,
    #[error("robust lower-level problem is infeasible")]
    Infeasible,
    #[error("robust lower-level problem is unbounded")]
    Unbounded,
    #[error("solver could not decide: {0}")]
    Indeterminate(String),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
}

impl From<FarkasError> for LowerError {
    fn from(e: FarkasError) -> Self {
        match e {
            FarkasError::DimensionMismatch(s) => LowerError::DimensionMismatch(s),
            FarkasError::Indeterminate(s) => LowerError::Indeterminate(s),
            FarkasError::Uncertainty(u) => LowerError::Uncertainty(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerLevelProblem {
    pub c0: DVector<f64>,
    pub d0: DVector<f64>,
    /// Coupling vectors `c_j`, one per constraint.
    pub c: Vec<DVector<f64>>,
    pub constraints: Vec<AffineUncertainConstraint>,
}

impl LowerLevelProblem {
    pub fn new(
        c0: DVector<f64>,
        d0: DVector<f64>,
        c: Vec<DVector<f64>>,
        constraints: Vec<AffineUncertainConstraint>,
    ) -> Result<Self, LowerError> {
        if constraints.is_empty() {
            return Err(LowerError::NoConstraints);
        }
        if c.len() != constraints.len() {
            return Err(LowerError::DimensionMismatch(format!(
                "{} coupling vectors for {} constraints",
                c.len(),
                constraints.len()
            )));
        }
        let (m, n) = (c0.len(), d0.len());
        if c.iter().any(|v| v.len() != m) {
            return Err(LowerError::DimensionMismatch(format!(
                "coupling vectors must have length {m}"
            )));
        }
        if constraints.iter().any(|k| k.n() != n) {
            return Err(LowerError::DimensionMismatch(format!(
                "constraints must act on {n} variables"
            )));
        }
        Ok(Self { c0, d0, c, constraints })
    }

    pub fn m(&self) -> usize {
        self.c0.len()
    }

    pub fn n(&self) -> usize {
        self.d0.len()
    }

    pub fn q(&self) -> usize {
        self.constraints.len()
    }

    /// `c_j^T x` for every constraint.
    pub fn shifts(&self, x: &[f64]) -> Vec<f64> {
        self.c
            .iter()
            .map(|c| c.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check_point(&self, x: &[f64], z: &[f64]) -> Result<(), LowerError> {
        if x.len() != self.m() || z.len() != self.n() {
            return Err(LowerError::DimensionMismatch(format!(
                "expected x in R^{} and z in R^{}, got {} and {}",
                self.m(),
                self.n(),
                x.len(),
                z.len()
            )));
        }
        Ok(())
    }
}

/// Largest worst-case value `c_j^T x + a_j(u)^T z - b_j(u)` over `j` and `u`.
pub fn worst_violation(prob: &LowerLevelProblem, x: &[f64], z: &[f64]) -> Result<f64, LowerError> {
    prob.check_point(x, z)?;
    let mut worst = f64::NEG_INFINITY;
    for (c, sh) in prob.constraints.iter().zip(prob.shifts(x)) {
        worst = worst.max(c.worst_case(z, sh)?);
    }
    Ok(worst)
}

pub fn robust_feasible_point(prob: &LowerLevelProblem, x: &[f64], z: &[f64]) -> Result<bool, LowerError> {
    Ok(worst_violation(prob, x, z)? <= FEAS_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerCertificate {
    /// Multipliers of the optimality system.
    pub multipliers: FarkasCertificate,
    /// S-lemma multipliers certifying robust feasibility (ball sets only).
    pub s_lemma: Option<Vec<f64>>,
    pub residuals: CertificateResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustSolutionCheck {
    pub feasible: bool,
    pub is_solution: bool,
    pub certificate: Option<LowerCertificate>,
    pub closedness: Closedness,
    /// No certificate was found but closedness is unverified, so the negative
    /// verdict is not conclusive.
    pub inconclusive: bool,
}

/// S-lemma multiplier `lambda >= 0` with
/// `[[lambda I, v/2], [v^T/2, -lambda - a^0^T z - shift + b^0]] >= 0`,
/// `v_i = b^i - a^i^T z`, certifying robust feasibility of `z` for a
/// unit-ball constraint. `None` if the LMI is infeasible.
pub fn s_lemma_multiplier(con: &AffineUncertainConstraint, z: &[f64], shift: f64) -> Result<Option<f64>, LowerError> {
    if !con.set.is_ball() {
        return Err(LowerError::DimensionMismatch(
            "S-lemma path needs unit-ball sets".into(),
        ));
    }
    if z.len() != con.n() {
        return Err(LowerError::DimensionMismatch(format!(
            "point has {} coordinates, expected {}",
            z.len(),
            con.n()
        )));
    }
    let s = con.s();
    let f = con.residual_fn(z, shift);
    let mut b = ConicBuilder::new();
    let lam = b.nonneg();
    let t = b.free();
    b.add_nonneg(LinExpr::constant(1.0) - t.into());
    let mut mat = vec![vec![LinExpr::zero(); s + 1]; s + 1];
    #[allow(clippy::needless_range_loop)]
    for i in 0..s {
        mat[i][i] = lam.into();
        // v_i = b^i - a^i^T z = -f.c[i]
        mat[i][s] = LinExpr::constant(-0.5 * f.c[i]);
        mat[s][i] = LinExpr::constant(-0.5 * f.c[i]);
    }
    mat[s][s] = LinExpr::constant(-f.c0) - lam.into() - t.into();
    b.add_psd(&mat);
    b.maximize(t.into());
    let sol = b
        .solve(&SolverSettings::default())
        .map_err(|e| LowerError::Indeterminate(e.to_string()))?;
    match sol.status {
        SolveStatus::Infeasible => return Ok(None),
        st if st.is_solved() => {}
        st => return Err(LowerError::Indeterminate(format!("{st:?}"))),
    }
    Ok((sol.value(t) >= -FEAS_TOL).then(|| sol.value(lam).max(0.0)))
}

/// S-lemma multipliers for every lower-level constraint at `(x, y)`.
pub fn s_lemma_multipliers(prob: &LowerLevelProblem, x: &[f64], y: &[f64]) -> Result<Option<Vec<f64>>, LowerError> {
    prob.check_point(x, y)?;
    let mut out = Vec::with_capacity(prob.q());
    for (c, sh) in prob.constraints.iter().zip(prob.shifts(x)) {
        match s_lemma_multiplier(c, y, sh)? {
            Some(l) => out.push(l),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// Decides `y in Y(x)`: robust feasibility of `y` and solvability of the dual
/// multiplier system for the implication `feasible z => d0^T z >= d0^T y`.
pub fn is_robust_solution(prob: &LowerLevelProblem, x: &[f64], y: &[f64]) -> Result<RobustSolutionCheck, LowerError> {
    is_robust_solution_with(prob, x, y, &FarkasOptions::default())
}

pub fn is_robust_solution_with(
    prob: &LowerLevelProblem,
    x: &[f64],
    y: &[f64],
    opts: &FarkasOptions,
) -> Result<RobustSolutionCheck, LowerError> {
    prob.check_point(x, y)?;
    let shifts = prob.shifts(x);
    let closedness = closedness_sufficient(&prob.constraints, &shifts)?;
    let feasible = robust_feasible_point(prob, x, y)?;
    let mut out = RobustSolutionCheck {
        feasible,
        is_solution: false,
        certificate: None,
        closedness,
        inconclusive: false,
    };
    if !feasible {
        return Ok(out);
    }
    let s_lemma = if prob.constraints.iter().all(|c| c.set.is_ball()) {
        s_lemma_multipliers(prob, x, y)?
    } else {
        None
    };
    let d0 = prob.d0.as_slice();
    let r: f64 = d0.iter().zip(y).map(|(a, b)| a * b).sum();
    match find_shifted(d0, r, &prob.constraints, &shifts, opts)? {
        Some(multipliers) => {
            let residuals = residuals_shifted(&multipliers, d0, r, &prob.constraints, &shifts)?;
            out.is_solution = true;
            out.certificate = Some(LowerCertificate {
                multipliers,
                s_lemma,
                residuals,
            });
        }
        None => out.inconclusive = closedness == Closedness::Unknown,
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerSolution {
    /// `c0^T x + d0^T z*`.
    pub value: f64,
    pub z: Vec<f64>,
}

/// Brute-force oracle: solves the robust counterpart directly. Box sets are
/// replaced by their extreme points, balls by the norm form, and general
/// spectrahedra by the conic dual of the inner maximization.
pub fn solve_lower_robust(prob: &LowerLevelProblem, x: &[f64]) -> Result<LowerSolution, LowerError> {
    prob.check_point(x, &vec![0.0; prob.n()])?;
    let shifts = prob.shifts(x);
    let mut b = ConicBuilder::new();
    let z = b.free_vec(prob.n());
    let ze: Vec<LinExpr> = z.iter().map(|&v| v.into()).collect();
    for (c, &sh) in prob.constraints.iter().zip(&shifts) {
        match &c.set {
            UncertaintySet::Box(bx) => {
                for u in box_extreme_points(&bx.bounds(), enumeration_cap())? {
                    let mut e = LinExpr::constant(c.b[0] - sh);
                    for (k, zk) in ze.iter().enumerate() {
                        let coef = c.a[0][k] + u.iter().enumerate().map(|(i, ui)| ui * c.a[i + 1][k]).sum::<f64>();
                        e.add_scaled(zk, -coef);
                    }
                    e = e + LinExpr::constant(u.iter().enumerate().map(|(i, ui)| ui * c.b[i + 1]).sum());
                    b.add_nonneg(e);
                }
            }
            UncertaintySet::Ball { .. } => {
                let lin = |k: usize| {
                    let mut e = LinExpr::constant(-c.b[k]);
                    for (zi, &ai) in ze.iter().zip(c.a[k].iter()) {
                        e.add_scaled(zi, ai);
                    }
                    e
                };
                let mut cone = vec![LinExpr::zero() - lin(0) - LinExpr::constant(sh)];
                cone.extend((1..=c.s()).map(lin));
                b.add_soc(cone);
            }
            UncertaintySet::Spectrahedron(_) => {
                c.add_robust(&mut b, &ze, LinExpr::constant(sh), LinExpr::zero());
            }
        }
    }
    let mut obj = LinExpr::zero();
    for (&zk, &dk) in z.iter().zip(prob.d0.iter()) {
        obj.add_term(zk, dk);
    }
    b.minimize(obj);
    let sol = b
        .solve(&SolverSettings::default())
        .map_err(|e| LowerError::Indeterminate(e.to_string()))?;
    match sol.status {
        SolveStatus::Infeasible => Err(LowerError::Infeasible),
        SolveStatus::Unbounded => Err(LowerError::Unbounded),
        st if st.is_solved() => {
            let zv: Vec<f64> = z.iter().map(|&v| sol.value(v)).collect();
            let c0x: f64 = prob.c0.iter().zip(x).map(|(a, b)| a * b).sum();
            let d0z: f64 = prob.d0.iter().zip(&zv).map(|(a, b)| a * b).sum();
            Ok(LowerSolution {
                value: c0x + d0z,
                z: zv,
            })
        }
        st => Err(LowerError::Indeterminate(format!("{st:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uncertainty::BoxSet;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    /// One upper variable, one lower variable, `(1 + u/2) z <= 0` over `u in [-1, 1]`, objective `-z`.
    fn ep2_lower() -> LowerLevelProblem {
        let con = AffineUncertainConstraint::new(
            vec![v(&[1.0]), v(&[0.5])],
            vec![0.0, 0.0],
            UncertaintySet::Box(BoxSet::symmetric(&[1.0]).unwrap()),
        )
        .unwrap();
        LowerLevelProblem::new(v(&[2.0]), v(&[-1.0]), vec![v(&[0.0])], vec![con]).unwrap()
    }

    /// `(1 + u) z <= 0` over `u in [-1/2, 1/2]`, objective `x - z`.
    fn ep3_lower() -> LowerLevelProblem {
        let con = AffineUncertainConstraint::new(
            vec![v(&[1.0]), v(&[1.0])],
            vec![0.0, 0.0],
            UncertaintySet::Box(BoxSet::symmetric(&[0.5]).unwrap()),
        )
        .unwrap();
        LowerLevelProblem::new(v(&[1.0]), v(&[-1.0]), vec![v(&[0.0])], vec![con]).unwrap()
    }

    #[test]
    fn feasibility_at_extreme_points() {
        let p = ep2_lower();
        assert!(robust_feasible_point(&p, &[0.0], &[0.0]).unwrap());
        assert!(!robust_feasible_point(&p, &[0.0], &[1.0]).unwrap());
        assert!(robust_feasible_point(&p, &[0.0], &[-1.0]).unwrap());
    }

    #[test]
    fn ep2_robust_solution() {
        let p = ep2_lower();
        let chk = is_robust_solution(&p, &[0.0], &[0.0]).unwrap();
        assert!(chk.feasible && chk.is_solution);
        assert_eq!(chk.closedness, Closedness::Polytope);
        let cert = chk.certificate.unwrap();
        assert!(cert.residuals.passes(CERT_TOL, cert.multipliers.max_abs()));

        let chk = is_robust_solution(&p, &[0.0], &[-1.0]).unwrap();
        assert!(chk.feasible);
        assert!(!chk.is_solution);
        assert!(!chk.inconclusive);
    }

    #[test]
    fn oracle_values() {
        let sol = solve_lower_robust(&ep2_lower(), &[0.0]).unwrap();
        assert!(sol.value.abs() < 1e-7 && sol.z[0].abs() < 1e-7);
        let sol = solve_lower_robust(&ep3_lower(), &[1.0]).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-7 && sol.z[0].abs() < 1e-7);
    }

    #[test]
    fn ball_case_uses_s_lemma() {
        // z + u z <= 0 over the unit disk in R^1, i.e. z + |z| <= 0; objective -z.
        let con = AffineUncertainConstraint::new(
            vec![v(&[1.0]), v(&[1.0])],
            vec![0.0, 0.0],
            UncertaintySet::Ball { dim: 1 },
        )
        .unwrap();
        let p = LowerLevelProblem::new(v(&[0.0]), v(&[-1.0]), vec![v(&[0.0])], vec![con]).unwrap();
        let sol = solve_lower_robust(&p, &[0.0]).unwrap();
        assert!(sol.z[0].abs() < 1e-6);
        let chk = is_robust_solution(&p, &[0.0], &[-1.0]).unwrap();
        assert!(chk.feasible && !chk.is_solution);
        // z = -1 is feasible: the S-lemma system has a multiplier.
        assert!(s_lemma_multipliers(&p, &[0.0], &[-1.0]).unwrap().is_some());
        assert!(s_lemma_multipliers(&p, &[0.0], &[1.0]).unwrap().is_none());
    }

    #[test]
    fn coupling_shifts_the_constraints() {
        // x + z <= 1 (no uncertainty weight), objective -z: z* = 1 - x.
        let con = AffineUncertainConstraint::new(
            vec![v(&[1.0]), v(&[0.0])],
            vec![1.0, 0.0],
            UncertaintySet::Box(BoxSet::symmetric(&[1.0]).unwrap()),
        )
        .unwrap();
        let p = LowerLevelProblem::new(v(&[0.0]), v(&[-1.0]), vec![v(&[1.0])], vec![con]).unwrap();
        let sol = solve_lower_robust(&p, &[0.25]).unwrap();
        assert!((sol.z[0] - 0.75).abs() < 1e-7);
        assert!(is_robust_solution(&p, &[0.25], &[0.75]).unwrap().is_solution);
        assert!(!is_robust_solution(&p, &[0.25], &[0.5]).unwrap().is_solution);
    }
}
