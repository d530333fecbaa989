//! Bilevel polynomial problems with uncertain linear constraints at both
//! levels: robust feasibility, the lower-level Slater condition, and the
//! single-level polynomial reformulation over `(x, y, mu)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::farkas::FarkasCertificate;
use crate::lowerlevel::{
    is_robust_solution, robust_feasible_point, LowerError, LowerLevelProblem, RobustSolutionCheck, FEAS_TOL,
};
use crate::poly::{Monomial, PolyError, Polynomial, TermLiteral};
use crate::uncertainty::{
    enumeration_cap, slater_check, AffineUncertainConstraint, BoxSet, UncertaintyError, UncertaintySet, UncertaintySpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilevelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported problem shape: {0}")]
    Unsupported(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error(transparent)]
    Lower(#[from] LowerError),
}

/// Upper-level constraint `a^T x + b^T y <= c` for every `(a, b, c)` in the box
/// `[a_lo, a_hi] x [b_lo, b_hi] x [c_lo, c_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpperBox {
    pub a_lo: Vec<f64>,
    pub a_hi: Vec<f64>,
    pub b_lo: Vec<f64>,
    pub b_hi: Vec<f64>,
    pub c_lo: f64,
    pub c_hi: f64,
}

impl UpperBox {
    fn validate(&self, m: usize, n: usize) -> Result<(), BilevelError> {
        if self.a_lo.len() != m || self.a_hi.len() != m || self.b_lo.len() != n || self.b_hi.len() != n {
            return Err(BilevelError::DimensionMismatch(format!(
                "upper box needs {m} a-bounds and {n} b-bounds"
            )));
        }
        for (lo, hi) in self.coordinate_bounds() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(UncertaintyError::InvalidBounds { lo, hi }.into());
            }
        }
        Ok(())
    }

    /// Coordinates `(a_1..a_m, b_1..b_n, c)`.
    fn coordinate_bounds(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.a_lo.iter().copied().zip(self.a_hi.iter().copied()).collect();
        out.extend(self.b_lo.iter().copied().zip(self.b_hi.iter().copied()));
        out.push((self.c_lo, self.c_hi));
        out
    }

    /// Vertex `k` of `2^(m+n+1)`: `c` varies fastest, then `a`, then `b`.
    pub fn corner(&self, k: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let m = self.a_lo.len();
        let n = self.b_lo.len();
        let pick = |bit: usize, lo: f64, hi: f64| if k >> bit & 1 == 1 { hi } else { lo };
        let c = pick(0, self.c_lo, self.c_hi);
        let a = (0..m).map(|i| pick(m - i, self.a_lo[i], self.a_hi[i])).collect();
        let b = (0..n).map(|j| pick(m + n - j, self.b_lo[j], self.b_hi[j])).collect();
        (a, b, c)
    }

    /// `max (a^T x + b^T y - c)` over the box.
    pub fn worst_case(&self, x: &[f64], y: &[f64]) -> f64 {
        let term = |lo: f64, hi: f64, v: f64| (lo * v).max(hi * v);
        let ax: f64 = (0..x.len()).map(|i| term(self.a_lo[i], self.a_hi[i], x[i])).sum();
        let by: f64 = (0..y.len()).map(|j| term(self.b_lo[j], self.b_hi[j], y[j])).sum();
        ax + by - self.c_lo
    }
}

/// Upper-level uncertain constraint: a coefficient box, or an affine
/// constraint over the stacked `(x, y)` with unit-ball uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub enum UpperConstraint {
    Box(UpperBox),
    Ball(AffineUncertainConstraint),
}

impl UpperConstraint {
    pub fn worst_case(&self, x: &[f64], y: &[f64]) -> Result<f64, BilevelError> {
        match self {
            UpperConstraint::Box(b) => Ok(b.worst_case(x, y)),
            UpperConstraint::Ball(c) => {
                let z: Vec<f64> = x.iter().chain(y).copied().collect();
                Ok(c.worst_case(&z, 0.0)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilevelProblem {
    /// Objective in the variables `(x_1..x_m, y_1..y_n)`.
    pub f: Polynomial,
    pub m: usize,
    pub n: usize,
    pub upper: Vec<UpperConstraint>,
    pub lower: LowerLevelProblem,
    pub assert_coercive: bool,
    /// Robust feasible point `(x, y)` stacked.
    pub feasible_point: Option<Vec<f64>>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyKind {
    Box,
    Ball,
}

impl BilevelProblem {
    pub fn new(
        f: Polynomial,
        m: usize,
        n: usize,
        upper: Vec<UpperConstraint>,
        lower: LowerLevelProblem,
    ) -> Result<Self, BilevelError> {
        let p = Self {
            f,
            m,
            n,
            upper,
            lower,
            assert_coercive: false,
            feasible_point: None,
            kappa: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), BilevelError> {
        let (m, n) = (self.m, self.n);
        if self.f.nvars() != m + n {
            return Err(BilevelError::DimensionMismatch(format!(
                "objective has {} variables, expected m + n = {}",
                self.f.nvars(),
                m + n
            )));
        }
        if self.lower.m() != m || self.lower.n() != n {
            return Err(BilevelError::DimensionMismatch(format!(
                "lower level is posed in R^{} x R^{}, expected R^{m} x R^{n}",
                self.lower.m(),
                self.lower.n()
            )));
        }
        for u in &self.upper {
            match u {
                UpperConstraint::Box(b) => b.validate(m, n)?,
                UpperConstraint::Ball(c) => {
                    if c.n() != m + n || !c.set.is_ball() {
                        return Err(BilevelError::DimensionMismatch(
                            "ball upper constraints act on (x, y) over a unit ball".into(),
                        ));
                    }
                }
            }
        }
        if let Some(p) = &self.feasible_point {
            if p.len() != m + n {
                return Err(BilevelError::DimensionMismatch(format!(
                    "feasible point has {} coordinates, expected {}",
                    p.len(),
                    m + n
                )));
            }
        }
        self.kind()?;
        Ok(())
    }

    /// Uncertainty kind shared by both levels.
    pub fn kind(&self) -> Result<UncertaintyKind, BilevelError> {
        let upper_box = self.upper.iter().all(|u| matches!(u, UpperConstraint::Box(_)));
        let upper_ball = self.upper.iter().all(|u| matches!(u, UpperConstraint::Ball(_)));
        let lower_box = self.lower.constraints.iter().all(|c| c.set.is_box());
        let lower_ball = self.lower.constraints.iter().all(|c| c.set.is_ball());
        if upper_box && lower_box {
            Ok(UncertaintyKind::Box)
        } else if upper_ball && lower_ball {
            Ok(UncertaintyKind::Ball)
        } else {
            Err(BilevelError::Unsupported(
                "each level must use boxes throughout or unit balls throughout, and both levels the same kind".into(),
            ))
        }
    }

    pub fn split<'a>(&self, point: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        point.split_at(self.m)
    }

    pub fn objective_at(&self, x: &[f64], y: &[f64]) -> Result<f64, BilevelError> {
        let z: Vec<f64> = x.iter().chain(y).copied().collect();
        Ok(self.f.eval(&z)?)
    }

    fn check_point(&self, x: &[f64], y: &[f64]) -> Result<(), BilevelError> {
        if x.len() != self.m || y.len() != self.n {
            return Err(BilevelError::DimensionMismatch(format!(
                "expected x in R^{} and y in R^{}",
                self.m, self.n
            )));
        }
        Ok(())
    }

    /// Largest worst-case upper-level constraint value (`-inf` if `l = 0`).
    pub fn upper_violation(&self, x: &[f64], y: &[f64]) -> Result<f64, BilevelError> {
        self.check_point(x, y)?;
        let mut worst = f64::NEG_INFINITY;
        for u in &self.upper {
            worst = worst.max(u.worst_case(x, y)?);
        }
        Ok(worst)
    }

    /// Robust counterpart feasibility without the optimality part:
    /// upper constraints and lower-level robust feasibility of `y`.
    pub fn relaxed_feasible(&self, x: &[f64], y: &[f64]) -> Result<bool, BilevelError> {
        Ok(self.upper_violation(x, y)? <= FEAS_TOL && robust_feasible_point(&self.lower, x, y)?)
    }
}

/// `mu = (1, lambda) / ||(1, lambda)||` in the `(mu_0, mu_k, mu_k^i)` layout.
pub fn mu_from_multipliers(cert: &FarkasCertificate) -> Vec<f64> {
    let q = cert.lambda0.len();
    let s = cert.lambda.first().map_or(0, Vec::len);
    let mut raw = vec![1.0];
    raw.extend(&cert.lambda0);
    for i in 0..s {
        for k in 0..q {
            raw.push(cert.lambda[k][i]);
        }
    }
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.iter().map(|v| v / norm).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub upper_violation: f64,
    pub lower: RobustSolutionCheck,
    /// Witness in the `(mu_0, mu_1..mu_q, mu_1^1..mu_q^1, ...)` layout.
    pub mu: Option<Vec<f64>>,
}

/// Robust feasibility of `(x, y)` for box uncertainty: every upper-level
/// extreme-point inequality holds and `y` is a robust lower-level solution.
pub fn robust_feasible(prob: &BilevelProblem, x: &[f64], y: &[f64]) -> Result<FeasibilityReport, BilevelError> {
    if prob.kind()? != UncertaintyKind::Box {
        return Err(BilevelError::Unsupported(
            "use ball_robust_feasible for ball uncertainty".into(),
        ));
    }
    let upper_violation = prob.upper_violation(x, y)?;
    let lower = is_robust_solution(&prob.lower, x, y)?;
    let mu = lower.certificate.as_ref().map(|c| mu_from_multipliers(&c.multipliers));
    let feasible = upper_violation <= FEAS_TOL && lower.is_solution && mu.as_ref().is_some_and(|mu| mu[0] > 1e-7);
    Ok(FeasibilityReport {
        feasible,
        upper_violation,
        lower,
        mu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFeasibilityReport {
    pub feasible: bool,
    /// S-lemma multipliers of the upper-level constraints.
    pub upper_s_lemma: Option<Vec<f64>>,
    pub lower: RobustSolutionCheck,
}

/// Robust feasibility of `(x, y)` for unit-ball uncertainty through the
/// S-lemma LMIs and the second-order multiplier system.
pub fn ball_robust_feasible(
    prob: &BilevelProblem,
    x: &[f64],
    y: &[f64],
) -> Result<BallFeasibilityReport, BilevelError> {
    if prob.kind()? != UncertaintyKind::Ball {
        return Err(BilevelError::Unsupported(
            "use robust_feasible for box uncertainty".into(),
        ));
    }
    prob.check_point(x, y)?;
    let z: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut upper = Vec::with_capacity(prob.upper.len());
    for u in &prob.upper {
        let UpperConstraint::Ball(c) = u else {
            unreachable!("kind checked")
        };
        match crate::lowerlevel::s_lemma_multiplier(c, &z, 0.0)? {
            Some(l) => upper.push(l),
            None => break,
        }
    }
    let upper_s_lemma = (upper.len() == prob.upper.len()).then_some(upper);
    let lower = is_robust_solution(&prob.lower, x, y)?;
    let lower_ok = lower.is_solution
        && lower
            .certificate
            .as_ref()
            .is_some_and(|c| c.s_lemma.as_ref().is_some_and(|l| l.len() == prob.lower.q()));
    Ok(BallFeasibilityReport {
        feasible: upper_s_lemma.is_some() && lower_ok,
        upper_s_lemma,
        lower,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LscReport {
    pub holds: bool,
    /// True when the check covers every `x`; false when it was only verified
    /// at the reference point.
    pub uniform: bool,
    pub slack: f64,
    pub warning: Option<String>,
}

/// Lower-level Slater condition: for every `x` some `z` satisfies all lower
/// constraints strictly. Exact when the coupling vectors vanish; otherwise a
/// strict recession direction `a_j(u)^T d < 0` proves it for all `x`, and
/// failing that the condition is only checked at `x_ref`.
pub fn lower_slater(lower: &LowerLevelProblem, x_ref: Option<&[f64]>) -> Result<LscReport, BilevelError> {
    let q = lower.q();
    if lower.c.iter().all(|c| c.iter().all(|v| *v == 0.0)) {
        let r = slater_check(&lower.constraints, &vec![0.0; q])?;
        return Ok(LscReport {
            holds: r.holds,
            uniform: true,
            slack: r.slack,
            warning: None,
        });
    }
    let homogeneous: Vec<AffineUncertainConstraint> = lower
        .constraints
        .iter()
        .map(|c| AffineUncertainConstraint {
            a: c.a.clone(),
            b: vec![0.0; c.b.len()],
            set: c.set.clone(),
        })
        .collect();
    let r = slater_check(&homogeneous, &vec![0.0; q])?;
    if r.holds {
        return Ok(LscReport {
            holds: true,
            uniform: true,
            slack: r.slack,
            warning: None,
        });
    }
    let Some(x) = x_ref else {
        return Ok(LscReport {
            holds: false,
            uniform: false,
            slack: r.slack,
            warning: Some("no strict recession direction and no reference point; condition unverified".into()),
        });
    };
    let r = slater_check(&lower.constraints, &lower.shifts(x))?;
    Ok(LscReport {
        holds: r.holds,
        uniform: false,
        slack: r.slack,
        warning: r
            .holds
            .then(|| "strict feasibility verified only at the reference x, not for every x".into()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityReport {
    pub asserted: bool,
    /// Smallest eigenvalue of the objective Hessian at the reference point.
    pub hessian_min_eig: Option<f64>,
    /// For convex objectives a positive definite Hessian at one point implies coercivity.
    pub hessian_pd: bool,
}

pub fn coercivity_check(prob: &BilevelProblem, point: Option<&[f64]>) -> Result<CoercivityReport, BilevelError> {
    let hessian_min_eig = match point {
        Some(p) => {
            let h = prob.f.hessian_at(p)?;
            Some(if h.nrows() == 0 {
                0.0
            } else {
                h.symmetric_eigenvalues().min()
            })
        }
        None => None,
    };
    Ok(CoercivityReport {
        asserted: prob.assert_coercive,
        hessian_min_eig,
        hessian_pd: hessian_min_eig.is_some_and(|e| e > 1e-9),
    })
}

/// Provenance of a constraint `g_i >= 0` in the single-level program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum GTag {
    UpperExtreme { constraint: usize, corner: usize },
    LowerExtreme { constraint: usize, corner: usize },
    Mu0,
    MuSign { k: usize },
    DualSlack,
    BoxDual { k: usize, i: usize },
}

/// Single-level polynomial program in `(x, y, mu)`:
/// `g_i >= 0` for all `i`, `h_j = 0` for all `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleLevelProgram {
    pub m: usize,
    pub n: usize,
    pub q: usize,
    pub s: usize,
    pub g: Vec<Polynomial>,
    pub tags: Vec<GTag>,
    /// Index of each kept `g` in the unpruned family.
    pub original_index: Vec<usize>,
    pub unpruned_len: usize,
    pub h: Vec<Polynomial>,
}

impl SingleLevelProgram {
    pub fn nvars(&self) -> usize {
        self.m + self.n + 1 + self.q * (self.s + 1)
    }

    pub fn mu0_index(&self) -> usize {
        self.m + self.n
    }

    /// Index of `mu_k` (`k` 1-based).
    pub fn mu_index(&self, k: usize) -> usize {
        self.m + self.n + k
    }

    /// Index of `mu_k^i` (`k`, `i` 1-based).
    pub fn mu_sup_index(&self, k: usize, i: usize) -> usize {
        self.m + self.n + 1 + self.q + (i - 1) * self.q + (k - 1)
    }

    pub fn variable_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.m).map(|i| format!("x{i}")).collect();
        names.extend((1..=self.n).map(|j| format!("y{j}")));
        names.push("mu0".into());
        names.extend((1..=self.q).map(|k| format!("mu{k}")));
        for i in 1..=self.s {
            names.extend((1..=self.q).map(|k| format!("mu{k}^{i}")));
        }
        names
    }

    /// Largest violation of the constraints at `point` in the full space:
    /// `max(max_i -g_i, max_j |h_j|)`.
    pub fn max_violation(&self, point: &[f64]) -> Result<f64, PolyError> {
        let mut worst = f64::NEG_INFINITY;
        for g in &self.g {
            worst = worst.max(-g.eval(point)?);
        }
        for h in &self.h {
            worst = worst.max(h.eval(point)?.abs());
        }
        Ok(worst)
    }

    pub fn max_degree(&self) -> u32 {
        self.g.iter().chain(&self.h).map(Polynomial::degree).max().unwrap_or(0)
    }
}

fn corner_of(bounds: &[(f64, f64)], k: usize) -> Vec<f64> {
    let s = bounds.len();
    (0..s)
        .map(|i| {
            if k >> (s - 1 - i) & 1 == 1 {
                bounds[i].1
            } else {
                bounds[i].0
            }
        })
        .collect()
}

/// Builds the `g` and `h` families. With `prune`, identically zero `g`s and
/// exact duplicates are removed; `original_index` records the relabeling.
pub fn build_single_level(prob: &BilevelProblem, prune: bool) -> Result<SingleLevelProgram, BilevelError> {
    if prob.kind()? != UncertaintyKind::Box {
        return Err(BilevelError::Unsupported(
            "the single-level program needs box uncertainty".into(),
        ));
    }
    let (m, n) = (prob.m, prob.n);
    let lower = &prob.lower;
    let q = lower.q();
    let s = lower.constraints[0].s();
    if lower.constraints.iter().any(|c| c.s() != s) {
        return Err(BilevelError::Unsupported(
            "lower-level sets must share one dimension".into(),
        ));
    }
    let l = prob.upper.len();
    let cap = enumeration_cap() as u128;
    let upper_count = (l as u128) << (m + n + 1).min(127);
    let lower_count = (q as u128) << s.min(127);
    if upper_count > cap || lower_count > cap {
        return Err(UncertaintyError::EnumerationCap {
            count: upper_count.max(lower_count),
            cap: cap as usize,
        }
        .into());
    }

    let mut prog = SingleLevelProgram {
        m,
        n,
        q,
        s,
        g: Vec::new(),
        tags: Vec::new(),
        original_index: Vec::new(),
        unpruned_len: 0,
        h: Vec::new(),
    };
    let nv = prog.nvars();
    let lin = |constant: f64, xc: &[f64], yc: &[f64]| {
        let mut terms = vec![(Monomial::one(), constant)];
        terms.extend(xc.iter().enumerate().map(|(i, &c)| (Monomial::var(i), c)));
        terms.extend(yc.iter().enumerate().map(|(j, &c)| (Monomial::var(m + j), c)));
        Polynomial::from_terms(nv, terms)
    };
    let mut family: Vec<(Polynomial, GTag)> = Vec::new();

    for (ci, u) in prob.upper.iter().enumerate() {
        let UpperConstraint::Box(bx) = u else {
            unreachable!("kind checked")
        };
        for k in 0..1usize << (m + n + 1) {
            let (a, b, c) = bx.corner(k);
            let na: Vec<f64> = a.iter().map(|v| -v).collect();
            let nb: Vec<f64> = b.iter().map(|v| -v).collect();
            family.push((
                lin(c, &na, &nb),
                GTag::UpperExtreme {
                    constraint: ci,
                    corner: k,
                },
            ));
        }
    }

    let boxes: Vec<BoxSet> = lower
        .constraints
        .iter()
        .map(|c| match &c.set {
            UncertaintySet::Box(b) => b.clone(),
            _ => unreachable!("kind checked"),
        })
        .collect();
    for (k, (con, bx)) in lower.constraints.iter().zip(&boxes).enumerate() {
        let bounds = bx.bounds();
        for corner in 0..1usize << s {
            let u = corner_of(&bounds, corner);
            let mut a = con.a[0].clone();
            let mut b = con.b[0];
            for (i, ui) in u.iter().enumerate() {
                a += &con.a[i + 1] * *ui;
                b += ui * con.b[i + 1];
            }
            let nc: Vec<f64> = lower.c[k].iter().map(|v| -v).collect();
            let na: Vec<f64> = a.iter().map(|v| -v).collect();
            family.push((lin(b, &nc, &na), GTag::LowerExtreme { constraint: k, corner }));
        }
    }

    let mu0 = prog.mu0_index();
    family.push((Polynomial::var(nv, mu0), GTag::Mu0));
    for k in 1..=q {
        family.push((Polynomial::var(nv, prog.mu_index(k)), GTag::MuSign { k }));
    }

    // -mu_0 d0^T y - sum_k (mu_k b_k^0 - mu_k c_k^T x + sum_i mu_k^i b_k^i)
    let mut slack = Vec::new();
    for j in 0..n {
        slack.push((Monomial::from_pairs(&[(mu0, 1), (m + j, 1)]), -lower.d0[j]));
    }
    for (k, con) in lower.constraints.iter().enumerate() {
        let mk = prog.mu_index(k + 1);
        slack.push((Monomial::var(mk), -con.b[0]));
        for i in 0..m {
            slack.push((Monomial::from_pairs(&[(i, 1), (mk, 1)]), lower.c[k][i]));
        }
        for i in 1..=s {
            slack.push((Monomial::var(prog.mu_sup_index(k + 1, i)), -con.b[i]));
        }
    }
    family.push((Polynomial::from_terms(nv, slack), GTag::DualSlack));

    // (hi mu_k - mu_k^i)(mu_k^i - lo mu_k); equals (gamma mu_k)^2 - (mu_k^i)^2 for symmetric boxes.
    for (k, bx) in boxes.iter().enumerate() {
        let mk = Polynomial::var(nv, prog.mu_index(k + 1));
        for (i, (lo, hi)) in bx.bounds().into_iter().enumerate() {
            let mki = Polynomial::var(nv, prog.mu_sup_index(k + 1, i + 1));
            let left = &mk.scale(hi) - &mki;
            let right = &mki - &mk.scale(lo);
            family.push((&left * &right, GTag::BoxDual { k: k + 1, i: i + 1 }));
        }
    }

    prog.unpruned_len = family.len();
    for (idx, (g, tag)) in family.into_iter().enumerate() {
        if prune && (g.is_zero() || prog.g.contains(&g)) {
            continue;
        }
        prog.g.push(g);
        prog.tags.push(tag);
        prog.original_index.push(idx);
    }

    for j in 0..n {
        let mut terms = vec![(Monomial::var(mu0), lower.d0[j])];
        for (k, con) in lower.constraints.iter().enumerate() {
            terms.push((Monomial::var(prog.mu_index(k + 1)), con.a[0][j]));
            for i in 1..=s {
                terms.push((Monomial::var(prog.mu_sup_index(k + 1, i)), con.a[i][j]));
            }
        }
        prog.h.push(Polynomial::from_terms(nv, terms));
    }
    let mut norm = vec![(Monomial::one(), 1.0)];
    for v in mu0..nv {
        norm.push((Monomial::from_pairs(&[(v, 2)]), -1.0));
    }
    prog.h.push(Polynomial::from_terms(nv, norm));
    Ok(prog)
}

/// Serialized upper-level constraint: a coefficient box, or `{a, b}` with
/// `a` holding `s+1` vectors over `(x, y)` and unit-ball uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UpperSpec {
    Box(UpperBox),
    Ball { a: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerSpec {
    pub c0: Vec<f64>,
    pub d0: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    /// `a_coeffs[j][i]` is `a_j^i`, `i = 0..s`.
    pub a_coeffs: Vec<Vec<Vec<f64>>>,
    /// `b_coeffs[j][i]` is `b_j^i`.
    pub b_coeffs: Vec<Vec<f64>>,
    /// Shared by every lower-level constraint.
    pub uncertainty: UncertaintySpec,
}

/// JSON problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub objective: Vec<TermLiteral>,
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub upper: Vec<UpperSpec>,
    pub lower: LowerSpec,
    #[serde(default)]
    pub assert_coercive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

impl TryFrom<ProblemFile> for BilevelProblem {
    type Error = BilevelError;

    fn try_from(file: ProblemFile) -> Result<Self, Self::Error> {
        let (m, n) = (file.m, file.n);
        let f = Polynomial::from_literal(m + n, &file.objective)?;
        let mut upper = Vec::with_capacity(file.upper.len());
        for spec in file.upper {
            upper.push(match spec {
                UpperSpec::Box(b) => UpperConstraint::Box(b),
                UpperSpec::Ball { a, b } => {
                    let dim = a
                        .len()
                        .checked_sub(1)
                        .ok_or_else(|| BilevelError::Invalid("ball upper constraint needs at least a^0".into()))?;
                    UpperConstraint::Ball(AffineUncertainConstraint::new(
                        a.iter().map(|v| dvec(v)).collect(),
                        b,
                        UncertaintySet::Ball { dim },
                    )?)
                }
            });
        }
        let lw = file.lower;
        let set = UncertaintySet::try_from(lw.uncertainty)?;
        if lw.a_coeffs.len() != lw.b_coeffs.len() {
            return Err(BilevelError::DimensionMismatch(
                "a_coeffs and b_coeffs differ in length".into(),
            ));
        }
        let mut constraints = Vec::with_capacity(lw.a_coeffs.len());
        for (a, b) in lw.a_coeffs.iter().zip(lw.b_coeffs) {
            constraints.push(AffineUncertainConstraint::new(
                a.iter().map(|v| dvec(v)).collect(),
                b,
                set.clone(),
            )?);
        }
        let lower = LowerLevelProblem::new(
            dvec(&lw.c0),
            dvec(&lw.d0),
            lw.c.iter().map(|v| dvec(v)).collect(),
            constraints,
        )?;
        let mut p = BilevelProblem::new(f, m, n, upper, lower)?;
        p.assert_coercive = file.assert_coercive;
        p.feasible_point = file.feasible_point;
        p.kappa = file.kappa;
        p.validate()?;
        Ok(p)
    }
}

impl From<&BilevelProblem> for ProblemFile {
    fn from(p: &BilevelProblem) -> Self {
        let lw = &p.lower;
        ProblemFile {
            objective: p.f.to_literal(),
            m: p.m,
            n: p.n,
            upper: p
                .upper
                .iter()
                .map(|u| match u {
                    UpperConstraint::Box(b) => UpperSpec::Box(b.clone()),
                    UpperConstraint::Ball(c) => UpperSpec::Ball {
                        a: c.a.iter().map(|v| v.as_slice().to_vec()).collect(),
                        b: c.b.clone(),
                    },
                })
                .collect(),
            lower: LowerSpec {
                c0: lw.c0.as_slice().to_vec(),
                d0: lw.d0.as_slice().to_vec(),
                c: lw.c.iter().map(|v| v.as_slice().to_vec()).collect(),
                a_coeffs: lw
                    .constraints
                    .iter()
                    .map(|c| c.a.iter().map(|v| v.as_slice().to_vec()).collect())
                    .collect(),
                b_coeffs: lw.constraints.iter().map(|c| c.b.clone()).collect(),
                uncertainty: UncertaintySpec::from(&lw.constraints[0].set),
            },
            assert_coercive: p.assert_coercive,
            feasible_point: p.feasible_point.clone(),
            kappa: p.kappa,
        }
    }
}

impl BilevelProblem {
    pub fn from_json(text: &str) -> Result<Self, BilevelError> {
        let file: ProblemFile =
            serde_json::from_str(text).map_err(|e| BilevelError::Invalid(format!("problem file: {e}")))?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProblemFile::from(self)).expect("problem file serializes")
    }
}
