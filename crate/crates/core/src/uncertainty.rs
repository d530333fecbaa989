//! Uncertainty sets (boxes, balls, spectrahedra), their LMI encodings,
//! extreme-point enumeration and the regularity checks used by the dual
//! characterizations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{psd_check, ConicBuilder, LinExpr, SolveStatus, SolverSettings};

/// Default cap on enumerated extreme points.
pub const DEFAULT_MAX_ENUM: usize = 4096;

/// Margin a maximized slack must exceed to count as strictly positive.
pub const STRICT_SLACK: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UncertaintyError {
    #[error("box half-width {0} must be positive")]
    NonPositiveGamma(f64),
    #[error("interval [{lo}, {hi}] is empty or not finite")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("pencil matrix {index} is not a symmetric {p}x{p} matrix")]
    BadMatrix { index: usize, p: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("enumerating {count} extreme points exceeds the cap {cap} (set RBSOS_MAX_ENUM to raise it)")]
    EnumerationCap { count: u128, cap: usize },
    #[error("affine function is unbounded above on the uncertainty set")]
    Unbounded,
    #[error("uncertainty set is empty")]
    EmptySet,
    #[error("conic solver failed: {0}")]
    Solver(String),
}

/// Enumeration cap, overridable through `RBSOS_MAX_ENUM`.
pub fn enumeration_cap() -> usize {
    std::env::var("RBSOS_MAX_ENUM")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_ENUM)
}

/// `{u : A^0 + sum u^i A^i >= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrahedron {
    matrices: Vec<DMatrix<f64>>,
}

impl Spectrahedron {
    /// `matrices[0]` is `A^0`; the parameter dimension is `matrices.len() - 1`.
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self, UncertaintyError> {
        let Some(first) = matrices.first() else {
            return Err(UncertaintyError::DimensionMismatch(
                "a pencil needs at least A^0".into(),
            ));
        };
        let p = first.nrows();
        for (index, m) in matrices.iter().enumerate() {
            let ok = m.nrows() == p
                && m.ncols() == p
                && m.iter().all(|v| v.is_finite())
                && (m - m.transpose()).amax() <= 1e-10;
            if !ok {
                return Err(UncertaintyError::BadMatrix { index, p });
            }
        }
        Ok(Self { matrices })
    }

    pub fn dim(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn order(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// `A^0 + sum u^i A^i`.
    pub fn pencil(&self, u: &[f64]) -> DMatrix<f64> {
        let mut m = self.matrices[0].clone();
        for (ui, a) in u.iter().zip(&self.matrices[1..]) {
            m += a * *ui;
        }
        m
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.len() == self.dim() && psd_check(&self.pencil(u), tol).unwrap_or(false)
    }
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_s, hi_s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, UncertaintyError> {
        if lo.len() != hi.len() {
            return Err(UncertaintyError::DimensionMismatch(format!(
                "{} lower and {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(UncertaintyError::InvalidBounds { lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[-gamma_1, gamma_1] x ... x [-gamma_s, gamma_s]`.
    pub fn symmetric(gamma: &[f64]) -> Result<Self, UncertaintyError> {
        for &g in gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(UncertaintyError::NonPositiveGamma(g));
            }
        }
        Self::new(gamma.iter().map(|g| -g).collect(), gamma.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Half-widths when the box is centred at the origin.
    pub fn symmetric_gamma(&self) -> Option<Vec<f64>> {
        self.lo
            .iter()
            .zip(&self.hi)
            .all(|(l, h)| *l == -*h)
            .then(|| self.hi.clone())
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.lo.iter().copied().zip(self.hi.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Box(BoxSet),
    /// Closed unit Euclidean ball of the given dimension.
    Ball {
        dim: usize,
    },
    Spectrahedron(Spectrahedron),
}

impl UncertaintySet {
    pub fn dim(&self) -> usize {
        match self {
            UncertaintySet::Box(b) => b.dim(),
            UncertaintySet::Ball { dim } => *dim,
            UncertaintySet::Spectrahedron(s) => s.dim(),
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, UncertaintySet::Box(_))
    }

    pub fn is_ball(&self) -> bool {
        matches!(self, UncertaintySet::Ball { .. })
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        match self {
            UncertaintySet::Box(b) => b.contains(u, tol),
            UncertaintySet::Ball { dim } => u.len() == *dim && u.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0 + tol,
            UncertaintySet::Spectrahedron(s) => s.contains(u, tol),
        }
    }

    /// LMI description of the set.
    pub fn to_spectrahedron(&self) -> Spectrahedron {
        match self {
            UncertaintySet::Box(b) => interval_to_spectrahedron(b),
            UncertaintySet::Ball { dim } => ball_to_spectrahedron(*dim),
            UncertaintySet::Spectrahedron(s) => s.clone(),
        }
    }
}

/// Pencil `diag(gamma + u, gamma - u)` describing `[-gamma, gamma]`.
pub fn box_to_spectrahedron(gamma: &[f64]) -> Result<Spectrahedron, UncertaintyError> {
    Ok(interval_to_spectrahedron(&BoxSet::symmetric(gamma)?))
}

/// Pencil `diag(u - lo, hi - u)` for a general box.
pub fn interval_to_spectrahedron(b: &BoxSet) -> Spectrahedron {
    let s = b.dim();
    let mut a0 = DMatrix::zeros(2 * s, 2 * s);
    for i in 0..s {
        a0[(i, i)] = -b.lo[i];
        a0[(s + i, s + i)] = b.hi[i];
    }
    let mut matrices = vec![a0];
    for i in 0..s {
        let mut a = DMatrix::zeros(2 * s, 2 * s);
        a[(i, i)] = 1.0;
        a[(s + i, s + i)] = -1.0;
        matrices.push(a);
    }
    Spectrahedron { matrices }
}

/// Arrow pencil `[[I_s, u], [u^T, 1]]`, which is PSD iff `||u|| <= 1`.
pub fn ball_to_spectrahedron(s: usize) -> Spectrahedron {
    let p = s + 1;
    let mut a0 = DMatrix::identity(p, p);
    a0[(s, s)] = 1.0;
    let mut matrices = vec![a0];
    for i in 0..s {
        let mut a = DMatrix::zeros(p, p);
        a[(i, s)] = 1.0;
        a[(s, i)] = 1.0;
        matrices.push(a);
    }
    Spectrahedron { matrices }
}

/// Vertices of a box in binary-counting order (first coordinate most
/// significant, `lo` before `hi`). Zero-width coordinates are not branched on.
pub fn box_extreme_points(bounds: &[(f64, f64)], cap: usize) -> Result<Vec<Vec<f64>>, UncertaintyError> {
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(UncertaintyError::InvalidBounds { lo, hi });
        }
    }
    let free: Vec<usize> = (0..bounds.len()).filter(|&i| bounds[i].0 < bounds[i].1).collect();
    let count = 1u128.checked_shl(free.len() as u32).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(UncertaintyError::EnumerationCap { count, cap });
    }
    let base: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let k = free.len();
    Ok((0..count as usize)
        .map(|mask| {
            let mut p = base.clone();
            for (pos, &i) in free.iter().enumerate() {
                if mask >> (k - 1 - pos) & 1 == 1 {
                    p[i] = bounds[i].1;
                }
            }
            p
        })
        .collect())
}

/// Affine function `c0 + sum c_i u^i` of the uncertain parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFn {
    pub c0: f64,
    pub c: Vec<f64>,
}

impl AffineFn {
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.c0 + self.c.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Maximum of an affine function over a compact uncertainty set.
pub fn max_affine_over_set(f: &AffineFn, set: &UncertaintySet) -> Result<f64, UncertaintyError> {
    if f.c.len() != set.dim() {
        return Err(UncertaintyError::DimensionMismatch(format!(
            "function has {} coefficients, set has dimension {}",
            f.c.len(),
            set.dim()
        )));
    }
    match set {
        UncertaintySet::Box(b) => {
            let u: Vec<f64> =
                f.c.iter()
                    .zip(b.bounds())
                    .map(|(&ci, (lo, hi))| if ci * hi >= ci * lo { hi } else { lo })
                    .collect();
            Ok(f.eval(&u))
        }
        UncertaintySet::Ball { .. } => Ok(f.c0 + f.c.iter().map(|v| v * v).sum::<f64>().sqrt()),
        UncertaintySet::Spectrahedron(s) => {
            let mut b = ConicBuilder::new();
            let u = b.free_vec(s.dim());
            let mat = pencil_exprs(s, &u.iter().map(|&v| LinExpr::from(v)).collect::<Vec<_>>());
            b.add_psd(&mat);
            let mut obj = LinExpr::constant(f.c0);
            for (&v, &ci) in u.iter().zip(&f.c) {
                obj.add_term(v, ci);
            }
            b.maximize(obj);
            let sol = b
                .solve(&SolverSettings::default())
                .map_err(|e| UncertaintyError::Solver(e.to_string()))?;
            match sol.status {
                SolveStatus::Optimal | SolveStatus::NearOptimal => Ok(sol.objective.max(sol.dual_bound)),
                SolveStatus::Unbounded => Err(UncertaintyError::Unbounded),
                SolveStatus::Infeasible => Err(UncertaintyError::EmptySet),
                SolveStatus::NumericalFailure => Err(UncertaintyError::Solver("numerical failure".into())),
            }
        }
    }
}

/// Entries of `A^0 + sum u_i A^i` as affine expressions.
pub fn pencil_exprs(s: &Spectrahedron, u: &[LinExpr]) -> Vec<Vec<LinExpr>> {
    let p = s.order();
    let mats = s.matrices();
    (0..p)
        .map(|r| {
            (0..p)
                .map(|c| {
                    let mut e = LinExpr::constant(mats[0][(r, c)]);
                    for (ui, a) in u.iter().zip(&mats[1..]) {
                        let v = a[(r, c)];
                        if v != 0.0 {
                            e.add_scaled(ui, v);
                        }
                    }
                    e
                })
                .collect()
        })
        .collect()
}

/// Adds the robust constraint `max_{u in U} sum_i u^i v_i <= w` to a model,
/// with `v` and `w` affine in the model variables.
pub fn add_robust_le(b: &mut ConicBuilder, set: &UncertaintySet, v: &[LinExpr], w: LinExpr) {
    assert_eq!(v.len(), set.dim(), "coefficient count must match the set dimension");
    match set {
        UncertaintySet::Box(bx) => {
            // sum t_i <= w with t_i >= lo_i v_i and t_i >= hi_i v_i.
            let mut lhs = LinExpr::zero();
            for (vi, (lo, hi)) in v.iter().zip(bx.bounds()) {
                if lo == hi {
                    lhs.add_scaled(vi, lo);
                    continue;
                }
                let t = b.free();
                b.add_nonneg(LinExpr::from(t) - vi.scaled(lo));
                b.add_nonneg(LinExpr::from(t) - vi.scaled(hi));
                lhs.add_term(t, 1.0);
            }
            b.add_nonneg(w - lhs);
        }
        UncertaintySet::Ball { .. } => {
            let mut cone = vec![w];
            cone.extend(v.iter().cloned());
            b.add_soc(cone);
        }
        UncertaintySet::Spectrahedron(s) => {
            // Conic dual of the inner maximization: exists Z >= 0 with
            // <A^i, Z> = -v_i and <A^0, Z> <= w.
            let z = b.psd_var(s.order());
            for (vi, a) in v.iter().zip(&s.matrices()[1..]) {
                b.add_eq(z.inner(a) + vi.clone(), 0.0);
            }
            b.add_nonneg(w - z.inner(&s.matrices()[0]));
        }
    }
}

/// Uncertain affine constraint `a(u)^T z <= b(u)` for all `u` in the set,
/// with `a(u) = a^0 + sum u^i a^i` and `b(u) = b^0 + sum u^i b^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineUncertainConstraint {
    pub a: Vec<DVector<f64>>,
    pub b: Vec<f64>,
    pub set: UncertaintySet,
}

impl AffineUncertainConstraint {
    pub fn new(a: Vec<DVector<f64>>, b: Vec<f64>, set: UncertaintySet) -> Result<Self, UncertaintyError> {
        let s = set.dim();
        if a.len() != s + 1 || b.len() != s + 1 {
            return Err(UncertaintyError::DimensionMismatch(format!(
                "set has dimension {s}, expected {} coefficient vectors, got {} and {}",
                s + 1,
                a.len(),
                b.len()
            )));
        }
        let n = a[0].len();
        if a.iter().any(|v| v.len() != n) {
            return Err(UncertaintyError::DimensionMismatch(
                "coefficient vectors differ in length".into(),
            ));
        }
        Ok(Self { a, b, set })
    }

    pub fn n(&self) -> usize {
        self.a[0].len()
    }

    pub fn s(&self) -> usize {
        self.set.dim()
    }

    /// `shift + a(u)^T z - b(u)` as an affine function of `u`.
    pub fn residual_fn(&self, z: &[f64], shift: f64) -> AffineFn {
        let dot = |v: &DVector<f64>| v.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        AffineFn {
            c0: shift + dot(&self.a[0]) - self.b[0],
            c: (1..=self.s()).map(|i| dot(&self.a[i]) - self.b[i]).collect(),
        }
    }

    /// Worst-case value of `shift + a(u)^T z - b(u)`; feasible iff `<= 0`.
    pub fn worst_case(&self, z: &[f64], shift: f64) -> Result<f64, UncertaintyError> {
        if z.len() != self.n() {
            return Err(UncertaintyError::DimensionMismatch(format!(
                "point has {} coordinates, constraint has {}",
                z.len(),
                self.n()
            )));
        }
        max_affine_over_set(&self.residual_fn(z, shift), &self.set)
    }

    /// Adds `shift + max_u [a(u)^T z - b(u)] <= -slack` for model variables `z`.
    pub fn add_robust(&self, b: &mut ConicBuilder, z: &[LinExpr], shift: LinExpr, slack: LinExpr) {
        let lin = |v: &DVector<f64>, c: f64| {
            let mut e = LinExpr::constant(-c);
            for (zi, &ai) in z.iter().zip(v.iter()) {
                if ai != 0.0 {
                    e.add_scaled(zi, ai);
                }
            }
            e
        };
        let nominal = lin(&self.a[0], self.b[0]);
        let v: Vec<LinExpr> = (1..=self.s()).map(|i| lin(&self.a[i], self.b[i])).collect();
        let w = LinExpr::zero() - shift - nominal - slack;
        add_robust_le(b, &self.set, &v, w);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlaterResult {
    pub holds: bool,
    /// Maximized slack (capped at 1).
    pub slack: f64,
    pub witness: Option<Vec<f64>>,
}

/// Strict robust feasibility: is there `z` with
/// `shifts[j] + max_u [a_j(u)^T z - b_j(u)] < 0` for every `j`?
pub fn slater_check(
    constraints: &[AffineUncertainConstraint],
    shifts: &[f64],
) -> Result<SlaterResult, UncertaintyError> {
    if constraints.is_empty() {
        return Ok(SlaterResult {
            holds: true,
            slack: f64::INFINITY,
            witness: Some(Vec::new()),
        });
    }
    if shifts.len() != constraints.len() {
        return Err(UncertaintyError::DimensionMismatch(
            "one shift per constraint expected".into(),
        ));
    }
    let n = constraints[0].n();
    if constraints.iter().any(|c| c.n() != n) {
        return Err(UncertaintyError::DimensionMismatch(
            "constraints differ in dimension".into(),
        ));
    }
    let mut b = ConicBuilder::new();
    let z = b.free_vec(n);
    let ze: Vec<LinExpr> = z.iter().map(|&v| v.into()).collect();
    let delta = b.free();
    b.add_nonneg(LinExpr::constant(1.0) - delta.into());
    for (c, &sh) in constraints.iter().zip(shifts) {
        c.add_robust(&mut b, &ze, LinExpr::constant(sh), delta.into());
    }
    b.maximize(delta.into());
    let sol = b
        .solve(&SolverSettings::default())
        .map_err(|e| UncertaintyError::Solver(e.to_string()))?;
    if !sol.status.is_solved() {
        return Err(UncertaintyError::Solver(format!("{:?}", sol.status)));
    }
    let slack = sol.value(delta);
    let holds = slack > STRICT_SLACK;
    Ok(SlaterResult {
        holds,
        slack,
        witness: holds.then(|| z.iter().map(|&v| sol.value(v)).collect()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closedness {
    /// Every set is a polytope, so the characteristic cone is closed.
    Polytope,
    /// A strictly feasible point exists, so the cone is closed.
    Slater,
    /// Neither sufficient condition applies; closedness is not disproved.
    Unknown,
}

pub fn closedness_sufficient(
    constraints: &[AffineUncertainConstraint],
    shifts: &[f64],
) -> Result<Closedness, UncertaintyError> {
    if constraints.iter().all(|c| c.set.is_box()) {
        return Ok(Closedness::Polytope);
    }
    if slater_check(constraints, shifts)?.holds {
        Ok(Closedness::Slater)
    } else {
        Ok(Closedness::Unknown)
    }
}

/// Serialized form of an uncertainty set in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintySpec {
    Box { gamma: Vec<f64> },
    IntervalBox { lo: Vec<f64>, hi: Vec<f64> },
    Ball { dim: usize },
    Spectrahedron { matrices: Vec<Vec<Vec<f64>>> },
}

impl TryFrom<UncertaintySpec> for UncertaintySet {
    type Error = UncertaintyError;

    fn try_from(spec: UncertaintySpec) -> Result<Self, Self::Error> {
        Ok(match spec {
            UncertaintySpec::Box { gamma } => UncertaintySet::Box(BoxSet::symmetric(&gamma)?),
            UncertaintySpec::IntervalBox { lo, hi } => UncertaintySet::Box(BoxSet::new(lo, hi)?),
            UncertaintySpec::Ball { dim } => UncertaintySet::Ball { dim },
            UncertaintySpec::Spectrahedron { matrices } => {
                let mut mats = Vec::with_capacity(matrices.len());
                for (index, rows) in matrices.iter().enumerate() {
                    let p = rows.len();
                    if rows.iter().any(|r| r.len() != p) {
                        return Err(UncertaintyError::BadMatrix { index, p });
                    }
                    mats.push(DMatrix::from_fn(p, p, |r, c| rows[r][c]));
                }
                UncertaintySet::Spectrahedron(Spectrahedron::new(mats)?)
            }
        })
    }
}

impl From<&UncertaintySet> for UncertaintySpec {
    fn from(set: &UncertaintySet) -> Self {
        match set {
            UncertaintySet::Box(b) => match b.symmetric_gamma() {
                Some(gamma) if gamma.iter().all(|g| *g > 0.0) => UncertaintySpec::Box { gamma },
                _ => UncertaintySpec::IntervalBox {
                    lo: b.lo.clone(),
                    hi: b.hi.clone(),
                },
            },
            UncertaintySet::Ball { dim } => UncertaintySpec::Ball { dim: *dim },
            UncertaintySet::Spectrahedron(s) => UncertaintySpec::Spectrahedron {
                matrices: s
                    .matrices()
                    .iter()
                    .map(|m| (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect())
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_set(gamma: &[f64]) -> UncertaintySet {
        UncertaintySet::Box(BoxSet::symmetric(gamma).unwrap())
    }

    #[test]
    fn box_pencil_examples() {
        let s = box_to_spectrahedron(&[1.0]).unwrap();
        let p = s.pencil(&[0.3]);
        assert_eq!(p, DMatrix::from_diagonal(&DVector::from_vec(vec![1.3, 0.7])));
        assert!(s.contains(&[0.0], 1e-12));
        assert!(s.contains(&[1.0], 1e-12));
        assert!(!s.contains(&[1.01], 1e-12));

        let s = box_to_spectrahedron(&[1.0, 2.0]).unwrap();
        assert!(s.contains(&[1.0, -2.0], 1e-12));
        assert!(!s.contains(&[1.01, 0.0], 1e-12));
        assert!(matches!(
            box_to_spectrahedron(&[0.0]),
            Err(UncertaintyError::NonPositiveGamma(_))
        ));
    }

    #[test]
    fn ball_pencil_examples() {
        let s = ball_to_spectrahedron(1);
        assert!(s.contains(&[0.0], 1e-12));
        assert!(s.contains(&[1.0], 1e-12));
        assert!(!s.contains(&[1.1], 1e-12));
        let s = ball_to_spectrahedron(3);
        assert!(s.contains(&[0.5, 0.5, 0.5], 1e-12));
        assert!(!s.contains(&[0.6, 0.6, 0.6], 1e-12));
    }

    #[test]
    fn extreme_points_examples() {
        let pts = box_extreme_points(&[(-1.0, 1.0), (-1.0, 1.0)], 4096).unwrap();
        assert_eq!(
            pts,
            vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]
        );
        assert_eq!(box_extreme_points(&[(0.0, 0.0)], 4096).unwrap(), vec![vec![0.0]]);
        assert_eq!(
            box_extreme_points(&[(-0.5, 0.5)], 4096).unwrap(),
            vec![vec![-0.5], vec![0.5]]
        );
        assert!(matches!(
            box_extreme_points(&vec![(-1.0, 1.0); 13], 4096),
            Err(UncertaintyError::EnumerationCap { .. })
        ));
    }

    #[test]
    fn max_affine_examples() {
        let f = AffineFn { c0: 0.0, c: vec![1.0] };
        assert_eq!(max_affine_over_set(&f, &box_set(&[1.0])).unwrap(), 1.0);

        let f = AffineFn {
            c0: 0.0,
            c: vec![1.0, 1.0],
        };
        let exact = std::f64::consts::SQRT_2;
        assert!((max_affine_over_set(&f, &UncertaintySet::Ball { dim: 2 }).unwrap() - exact).abs() < 1e-12);
        let sdp = UncertaintySet::Spectrahedron(ball_to_spectrahedron(2));
        assert!((max_affine_over_set(&f, &sdp).unwrap() - exact).abs() < 1e-6);

        // EP1 lower level: (1 + u) z over u in [-1, 1].
        let c = AffineUncertainConstraint::new(
            vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0])],
            vec![0.0, 0.0],
            box_set(&[1.0]),
        )
        .unwrap();
        for z in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            let expected = if z >= 0.0 { 2.0 * z } else { 0.0 };
            assert!((c.worst_case(&[z], 0.0).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn unbounded_spectrahedron_is_reported() {
        // {u : u >= 0} is not compact.
        let s = Spectrahedron::new(vec![DMatrix::zeros(1, 1), DMatrix::identity(1, 1)]).unwrap();
        let f = AffineFn { c0: 0.0, c: vec![1.0] };
        assert_eq!(
            max_affine_over_set(&f, &UncertaintySet::Spectrahedron(s)),
            Err(UncertaintyError::Unbounded)
        );
    }

    fn ep_lower(a1: f64, gamma: f64) -> Vec<AffineUncertainConstraint> {
        vec![AffineUncertainConstraint::new(
            vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![a1])],
            vec![0.0, 0.0],
            box_set(&[gamma]),
        )
        .unwrap()]
    }

    #[test]
    fn slater_examples() {
        let ep2 = ep_lower(0.5, 1.0);
        let r = slater_check(&ep2, &[0.0]).unwrap();
        assert!(r.holds);
        let z = r.witness.unwrap();
        assert!(ep2[0].worst_case(&z, 0.0).unwrap() < 0.0);

        let ep1 = ep_lower(1.0, 1.0);
        assert!(!slater_check(&ep1, &[0.0]).unwrap().holds);
        assert!(slater_check(&[], &[]).unwrap().holds);
    }

    #[test]
    fn closedness_examples() {
        assert_eq!(
            closedness_sufficient(&ep_lower(0.5, 1.0), &[0.0]).unwrap(),
            Closedness::Polytope
        );

        // z1 + u.(z1, z2) <= 1 over the unit ball; z = 0 is strictly feasible.
        let ball = vec![AffineUncertainConstraint::new(
            vec![
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 1.0]),
            ],
            vec![1.0, 0.0, 0.0],
            UncertaintySet::Ball { dim: 2 },
        )
        .unwrap()];
        assert_eq!(closedness_sufficient(&ball, &[0.0]).unwrap(), Closedness::Slater);
    }

    #[test]
    fn spec_round_trip() {
        for set in [
            box_set(&[1.0, 0.5]),
            UncertaintySet::Box(BoxSet::new(vec![0.0], vec![1.0]).unwrap()),
            UncertaintySet::Ball { dim: 3 },
            UncertaintySet::Spectrahedron(ball_to_spectrahedron(2)),
        ] {
            let spec = UncertaintySpec::from(&set);
            let json = serde_json::to_string(&spec).unwrap();
            let back: UncertaintySpec = serde_json::from_str(&json).unwrap();
            assert_eq!(UncertaintySet::try_from(back).unwrap(), set);
        }
    }
}
