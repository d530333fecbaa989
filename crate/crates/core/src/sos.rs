//! Sums-of-squares relaxations of the single-level program. Level `k` asks
//! for the largest `t` such that
//!
//! ```text
//! f - sum_i sigma_i g_i - sum_j xi_j h_j - zeta (kappa - f) - t = sigma_0
//! ```
//!
//! with SOS `sigma_i`, `zeta`, `sigma_0` and free `xi_j`, all products of
//! degree at most `k`. Coefficients are matched monomial by monomial and the
//! result is solved as a semidefinite program.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::bilevel::{
    build_single_level, coercivity_check, lower_slater, robust_feasible, BilevelError, BilevelProblem,
    CoercivityReport, LscReport, SingleLevelProgram,
};
use crate::conic::svec::{svec_index, SQRT2};
use crate::conic::{
    write_dump, ConicBuilder, ConicError, LinExpr, PsdVar, SolveStatus, SolvedModel, SolverSettings, Var,
};
use crate::poly::{
    gram_expand, monomial_basis_capped, Monomial, PolyError, Polynomial, TermLiteral, DEFAULT_BASIS_CAP,
};

/// Identity residuals above `RESIDUAL_TOL * (1 + ||f||)` invalidate a level.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SosError {
    #[error("degree bound {k} is below the degree {needed} of {what}")]
    DegreeTooSmall { k: u32, needed: u32, what: String },
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid degree range {k_min}..={k_max}")]
    InvalidRange { k_min: u32, k_max: u32 },
    #[error("no feasible point in the problem or the options")]
    NoFeasiblePoint,
    #[error("kappa {kappa} is below the objective value {fbar} at the feasible point")]
    KappaTooSmall { kappa: f64, fbar: f64 },
    #[error("Gram matrix is indefinite (smallest eigenvalue {0:.3e})")]
    Indefinite(f64),
    #[error("Gram matrix is not square or does not match its basis")]
    GramShape,
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Bilevel(#[from] BilevelError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

impl From<std::io::Error> for SosError {
    fn from(e: std::io::Error) -> Self {
        SosError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SosError>;

/// Smallest even integer `>= k`.
pub fn even_ceil(k: u32) -> u32 {
    k + k % 2
}

/// Polynomial data of a relaxation: objective, `g_i >= 0`, `h_j = 0`, and
/// the level bound `kappa` (without it the `zeta` multiplier is dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct SosProgram {
    pub nvars: usize,
    pub f: Polynomial,
    pub g: Vec<Polynomial>,
    pub h: Vec<Polynomial>,
    pub kappa: Option<f64>,
}

impl SosProgram {
    pub fn new(f: Polynomial, g: Vec<Polynomial>, h: Vec<Polynomial>, kappa: Option<f64>) -> Result<Self> {
        let nvars = f.nvars();
        for p in g.iter().chain(&h) {
            if p.nvars() != nvars {
                return Err(SosError::DimensionMismatch {
                    expected: nvars,
                    got: p.nvars(),
                });
            }
        }
        Ok(Self { nvars, f, g, h, kappa })
    }

    /// The program of `slp`, with `f` given over `(x, y)` or the full space.
    pub fn from_single_level(slp: &SingleLevelProgram, f: &Polynomial, kappa: f64) -> Result<Self> {
        let nvars = slp.nvars();
        let f = if f.nvars() == nvars {
            f.clone()
        } else if f.nvars() == slp.m + slp.n {
            let map: Vec<usize> = (0..f.nvars()).collect();
            f.remap(nvars, &map)
        } else {
            return Err(SosError::DimensionMismatch {
                expected: slp.m + slp.n,
                got: f.nvars(),
            });
        };
        Self::new(f, slp.g.clone(), slp.h.clone(), Some(kappa))
    }

    pub fn max_degree(&self) -> u32 {
        self.g
            .iter()
            .chain(&self.h)
            .map(Polynomial::degree)
            .chain(std::iter::once(self.f.degree()))
            .max()
            .unwrap_or(0)
    }

    /// `kappa - f`, the polynomial multiplied by `zeta`.
    fn level_gap(&self) -> Option<Polynomial> {
        self.kappa.map(|k| &Polynomial::constant(self.nvars, k) - &self.f)
    }
}

/// A PSD Gram variable over a monomial basis.
#[derive(Debug, Clone)]
pub struct GramHandle {
    pub basis: Vec<Monomial>,
    pub var: PsdVar,
}

/// Free coefficients of a polynomial over a monomial basis.
#[derive(Debug, Clone)]
pub struct FreeHandle {
    pub basis: Vec<Monomial>,
    pub vars: Vec<Var>,
}

/// The conic program of one level.
#[derive(Debug, Clone)]
pub struct RelaxationLevel {
    pub k: u32,
    pub program: SosProgram,
    pub conic: ConicBuilder,
    pub t: Var,
    pub sigma0: GramHandle,
    pub sigma: Vec<GramHandle>,
    pub zeta: Option<GramHandle>,
    pub xi: Vec<FreeHandle>,
    /// Monomial matched by each equality row.
    pub rows: Vec<Monomial>,
}

/// Level `k` of the hierarchy for a single-level program.
pub fn build_relaxation(slp: &SingleLevelProgram, f: &Polynomial, kappa: f64, k: u32) -> Result<RelaxationLevel> {
    let program = SosProgram::from_single_level(slp, f, kappa)?;
    build_program_relaxation(&program, k, DEFAULT_BASIS_CAP)
}

/// Level `k` for arbitrary polynomial data; `k` is rounded up to even.
pub fn build_program_relaxation(program: &SosProgram, k: u32, cap: usize) -> Result<RelaxationLevel> {
    let k = even_ceil(k);
    let nvars = program.nvars;
    let check = |p: &Polynomial, what: String| {
        let d = p.degree();
        if d > k {
            Err(SosError::DegreeTooSmall { k, needed: d, what })
        } else {
            Ok(d)
        }
    };
    let fdeg = check(&program.f, "the objective".into())?;
    for (i, g) in program.g.iter().enumerate() {
        check(g, format!("g{}", i + 1))?;
    }
    for (j, h) in program.h.iter().enumerate() {
        check(h, format!("h{}", j + 1))?;
    }

    let rows = monomial_basis_capped(nvars, k, cap)?;
    let index: HashMap<Monomial, usize> = rows.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let mut acc: Vec<Vec<(Var, f64)>> = vec![Vec::new(); rows.len()];
    let mut b = ConicBuilder::new();

    let t = b.free();
    acc[0].push((t, 1.0));

    let gram = |b: &mut ConicBuilder, acc: &mut Vec<Vec<(Var, f64)>>, deg: u32, mult: &Polynomial| {
        let basis = monomial_basis_capped(nvars, deg, cap)?;
        let len = basis.len();
        let var = b.psd_var(len);
        let vars: Vec<Var> = var.svec_vars().collect();
        for a in 0..len {
            for c in a..len {
                let prod = basis[a].mul(&basis[c]);
                let w = if a == c { 1.0 } else { SQRT2 };
                let v = vars[svec_index(len, c, a)];
                for (m, coef) in mult.terms() {
                    acc[index[&prod.mul(m)]].push((v, w * coef));
                }
            }
        }
        Ok::<_, SosError>(GramHandle { basis, var })
    };

    let one = Polynomial::constant(nvars, 1.0);
    let sigma0 = gram(&mut b, &mut acc, k / 2, &one)?;
    let mut sigma = Vec::with_capacity(program.g.len());
    for g in &program.g {
        sigma.push(gram(&mut b, &mut acc, (k - g.degree()) / 2, g)?);
    }
    let zeta = match program.level_gap() {
        Some(gap) => Some(gram(&mut b, &mut acc, (k - fdeg) / 2, &gap)?),
        None => None,
    };
    let mut xi = Vec::with_capacity(program.h.len());
    for h in &program.h {
        let basis = monomial_basis_capped(nvars, k - h.degree(), cap)?;
        let vars = b.free_vec(basis.len());
        for (mono, &v) in basis.iter().zip(&vars) {
            for (m, coef) in h.terms() {
                acc[index[&mono.mul(m)]].push((v, coef));
            }
        }
        xi.push(FreeHandle { basis, vars });
    }

    for (mono, mut terms) in rows.iter().zip(acc) {
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(Var, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some((w, d)) if *w == v => *d += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        let rhs = program.f.coefficient(mono);
        let scale = merged.iter().map(|&(_, c)| c.abs()).fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let expr = LinExpr {
            terms: merged.into_iter().map(|(v, c)| (v, c / scale)).collect(),
            constant: 0.0,
        };
        b.add_eq(expr, rhs / scale);
    }
    b.maximize(t.into());

    Ok(RelaxationLevel {
        k,
        program: program.clone(),
        conic: b,
        t,
        sigma0,
        sigma,
        zeta,
        xi,
        rows,
    })
}

/// A Gram matrix together with its monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    pub basis: Vec<Monomial>,
    pub gram: DMatrix<f64>,
}

impl GramBlock {
    pub fn polynomial(&self, nvars: usize) -> Result<Polynomial> {
        Ok(gram_expand(&self.basis, &self.gram, nvars)?)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.gram.nrows() == 0 {
            return 0.0;
        }
        let sym = (&self.gram + self.gram.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

/// Multipliers of a solved level.
#[derive(Debug, Clone, PartialEq)]
pub struct SosMultipliers {
    pub t: f64,
    pub sigma0: GramBlock,
    pub sigma: Vec<GramBlock>,
    pub zeta: Option<GramBlock>,
    pub xi: Vec<Polynomial>,
}

impl SosMultipliers {
    fn blocks(&self) -> impl Iterator<Item = &GramBlock> {
        std::iter::once(&self.sigma0).chain(&self.sigma).chain(&self.zeta)
    }

    /// Smallest eigenvalue over all Gram matrices.
    pub fn min_gram_eigenvalue(&self) -> f64 {
        self.blocks()
            .map(GramBlock::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_gram_entry(&self) -> f64 {
        self.blocks().map(|b| b.gram.amax()).fold(0.0, f64::max)
    }

    /// Serializable form with every multiplier in the literal syntax.
    pub fn to_file(&self, nvars: usize, variables: Vec<String>) -> Result<MultiplierFile> {
        let gram_file = |b: &GramBlock| -> Result<GramFile> {
            Ok(GramFile {
                basis: b.basis.iter().map(|m| m.to_dense(nvars)).collect(),
                gram: b.gram.row_iter().map(|r| r.iter().copied().collect()).collect(),
                polynomial: b.polynomial(nvars)?.to_literal(),
            })
        };
        Ok(MultiplierFile {
            variables,
            t: self.t,
            sigma0: gram_file(&self.sigma0)?,
            sigma: self.sigma.iter().map(gram_file).collect::<Result<_>>()?,
            zeta: self.zeta.as_ref().map(gram_file).transpose()?,
            xi: self.xi.iter().map(Polynomial::to_literal).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramFile {
    pub basis: Vec<Vec<u32>>,
    pub gram: Vec<Vec<f64>>,
    pub polynomial: Vec<TermLiteral>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierFile {
    pub variables: Vec<String>,
    pub t: f64,
    pub sigma0: GramFile,
    pub sigma: Vec<GramFile>,
    pub zeta: Option<GramFile>,
    pub xi: Vec<Vec<TermLiteral>>,
}

/// `f - sum sigma_i g_i - sum xi_j h_j - zeta (kappa - f) - t - sigma_0`.
pub fn identity_remainder(program: &SosProgram, mult: &SosMultipliers) -> Result<Polynomial> {
    let n = program.nvars;
    if mult.sigma.len() != program.g.len() || mult.xi.len() != program.h.len() {
        return Err(SosError::DimensionMismatch {
            expected: program.g.len() + program.h.len(),
            got: mult.sigma.len() + mult.xi.len(),
        });
    }
    let mut r = &program.f - &Polynomial::constant(n, mult.t);
    r = &r - &mult.sigma0.polynomial(n)?;
    for (s, g) in mult.sigma.iter().zip(&program.g) {
        r = &r - &(&s.polynomial(n)? * g);
    }
    for (x, h) in mult.xi.iter().zip(&program.h) {
        r = &r - &(x * h);
    }
    if let (Some(z), Some(gap)) = (&mult.zeta, program.level_gap()) {
        r = &r - &(&z.polynomial(n)? * &gap);
    }
    Ok(r)
}

/// Coefficient max-norm of [`identity_remainder`].
pub fn identity_residual(program: &SosProgram, mult: &SosMultipliers) -> Result<f64> {
    Ok(identity_remainder(program, mult)?.max_abs_coeff())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelStatus {
    Optimal,
    NearOptimal,
    /// The relaxation has no feasible `t`; its value is `-inf`.
    Infeasible,
    /// `t` is unbounded above; the single-level program is empty.
    Unbounded,
    NumericalFailure,
    /// The identity residual of the returned multipliers is too large.
    ResidualTooLarge,
    /// The degree bound is below the degree of the data.
    Rejected,
}

impl LevelStatus {
    pub fn is_solved(&self) -> bool {
        matches!(self, LevelStatus::Optimal | LevelStatus::NearOptimal)
    }

    /// Value on the extended real line, or `None` when unknown.
    fn extended_value(&self, value: Option<f64>) -> Option<f64> {
        match self {
            LevelStatus::Optimal | LevelStatus::NearOptimal => value,
            LevelStatus::Infeasible | LevelStatus::Rejected => Some(f64::NEG_INFINITY),
            LevelStatus::Unbounded => Some(f64::INFINITY),
            LevelStatus::NumericalFailure | LevelStatus::ResidualTooLarge => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSolution {
    pub k: u32,
    pub status: LevelStatus,
    /// `val(D_k)` when solved.
    pub value: Option<f64>,
    pub identity_residual: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
    pub message: Option<String>,
    #[serde(skip)]
    pub multipliers: Option<SosMultipliers>,
}

impl LevelSolution {
    fn rejected(k: u32, message: String) -> Self {
        Self {
            k,
            status: LevelStatus::Rejected,
            value: None,
            identity_residual: None,
            iterations: 0,
            seconds: 0.0,
            message: Some(message),
            multipliers: None,
        }
    }
}

impl RelaxationLevel {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let (problem, _) = self.conic.build();
        write_dump(&problem, path)?;
        Ok(())
    }

    fn multipliers(&self, model: &SolvedModel) -> SosMultipliers {
        let gram = |h: &GramHandle| GramBlock {
            basis: h.basis.clone(),
            gram: model.psd_value(&h.var),
        };
        SosMultipliers {
            t: model.value(self.t),
            sigma0: gram(&self.sigma0),
            sigma: self.sigma.iter().map(gram).collect(),
            zeta: self.zeta.as_ref().map(gram),
            xi: self
                .xi
                .iter()
                .map(|x| {
                    Polynomial::from_terms(
                        self.program.nvars,
                        x.basis.iter().cloned().zip(x.vars.iter().map(|&v| model.value(v))),
                    )
                })
                .collect(),
        }
    }

    /// Solves the level and re-verifies the identity on the returned multipliers.
    pub fn solve(&self, settings: &SolverSettings) -> Result<LevelSolution> {
        let start = Instant::now();
        let model = self.conic.solve(settings)?;
        let mut out = LevelSolution {
            k: self.k,
            status: LevelStatus::NumericalFailure,
            value: None,
            identity_residual: None,
            iterations: model.solution.iterations,
            seconds: 0.0,
            message: None,
            multipliers: None,
        };
        match model.status {
            SolveStatus::Optimal | SolveStatus::NearOptimal => {
                let mult = self.multipliers(&model);
                let residual = identity_residual(&self.program, &mult)?;
                let limit = RESIDUAL_TOL * (1.0 + self.program.f.max_abs_coeff());
                out.value = Some(mult.t);
                out.identity_residual = Some(residual);
                out.status = if residual > limit {
                    out.message = Some(format!("identity residual {residual:.3e} exceeds {limit:.3e}"));
                    LevelStatus::ResidualTooLarge
                } else if model.status == SolveStatus::Optimal {
                    LevelStatus::Optimal
                } else {
                    LevelStatus::NearOptimal
                };
                out.multipliers = Some(mult);
            }
            SolveStatus::Infeasible => out.status = LevelStatus::Infeasible,
            SolveStatus::Unbounded => out.status = LevelStatus::Unbounded,
            SolveStatus::NumericalFailure => out.message = Some("interior-point method failed".into()),
        }
        out.seconds = start.elapsed().as_secs_f64();
        Ok(out)
    }
}

/// Builds and solves one level; degree errors become a rejected level.
pub fn solve_level(
    program: &SosProgram,
    k: u32,
    settings: &SolverSettings,
    dump: Option<&Path>,
) -> Result<LevelSolution> {
    let level = match build_program_relaxation(program, k, DEFAULT_BASIS_CAP) {
        Ok(l) => l,
        Err(e @ SosError::DegreeTooSmall { .. }) => return Ok(LevelSolution::rejected(even_ceil(k), e.to_string())),
        Err(e) => return Err(e),
    };
    if let Some(dir) = dump {
        level.write_dump(&dir.join(format!("level_k{}.sdp", level.k)))?;
    }
    level.solve(settings)
}

/// Factorization `G = sum_j v_j v_j^T` turned into polynomials
/// `f_j = v_j^T basis`, so that `basis^T G basis = sum_j f_j^2`.
pub fn extract_sos_decomposition(
    gram: &DMatrix<f64>,
    basis: &[Monomial],
    nvars: usize,
    tol: f64,
) -> Result<Vec<Polynomial>> {
    let n = basis.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(SosError::GramShape);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let sym = (gram + gram.transpose()) * 0.5;
    let scale = sym.amax().max(1.0);
    let eig = sym.symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -tol * scale {
        return Err(SosError::Indefinite(min));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Vec::new();
    for j in order {
        let lambda = eig.eigenvalues[j];
        if lambda <= f64::EPSILON * scale {
            continue;
        }
        let v = eig.eigenvectors.column(j);
        let lead = v.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        let w = lambda.sqrt() * lead.signum();
        out.push(Polynomial::from_terms(
            nvars,
            basis.iter().cloned().zip(v.iter().map(|&c| c * w)),
        ));
    }
    Ok(out)
}

/// `sum_j f_j^2`.
pub fn sum_of_squares(parts: &[Polynomial], nvars: usize) -> Polynomial {
    parts.iter().fold(Polynomial::zero(nvars), |acc, p| &acc + &(p * p))
}

/// An exact-value representation
/// `f - sum sigma_i g_i - sum xi_j h_j - zeta (kappa - f) - f(x, y) = sigma_0`
/// at a candidate point.
#[derive(Debug, Clone)]
pub struct GlobalCertificate {
    pub k: u32,
    pub kappa: f64,
    pub point: Vec<f64>,
    pub value: f64,
    /// Relaxation value the certificate was built from.
    pub bound: f64,
    pub identity_residual: f64,
    pub min_gram_eigenvalue: f64,
    pub multipliers: SosMultipliers,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateFile {
    pub k: u32,
    pub kappa: f64,
    pub point: Vec<f64>,
    pub value: f64,
    pub bound: f64,
    pub identity_residual: f64,
    pub min_gram_eigenvalue: f64,
    pub multipliers: MultiplierFile,
}

impl GlobalCertificate {
    pub fn to_file(&self, nvars: usize, variables: Vec<String>) -> Result<CertificateFile> {
        Ok(CertificateFile {
            k: self.k,
            kappa: self.kappa,
            point: self.point.clone(),
            value: self.value,
            bound: self.bound,
            identity_residual: self.identity_residual,
            min_gram_eigenvalue: self.min_gram_eigenvalue,
            multipliers: self.multipliers.to_file(nvars, variables)?,
        })
    }
}

/// Turns a solved level with `val(D_k) >= value - tol` into a certificate for
/// `value`: the excess `val(D_k) - value` moves into the constant of `sigma_0`.
pub fn certificate_from_level(
    program: &SosProgram,
    sol: &LevelSolution,
    point: &[f64],
    value: f64,
    tol: f64,
) -> Result<Option<GlobalCertificate>> {
    let (Some(mult), true) = (&sol.multipliers, sol.status.is_solved()) else {
        return Ok(None);
    };
    let Some(kappa) = program.kappa else {
        return Ok(None);
    };
    if mult.t < value - tol * (1.0 + value.abs()) {
        return Ok(None);
    }
    let mut shifted = mult.clone();
    shifted.t = value;
    // The first basis element of every Gram block is the constant monomial.
    shifted.sigma0.gram[(0, 0)] += mult.t - value;
    let residual = identity_residual(program, &shifted)?;
    let min_eig = shifted.min_gram_eigenvalue();
    let limit = RESIDUAL_TOL * (1.0 + program.f.max_abs_coeff());
    if residual > limit || min_eig < -tol * (1.0 + shifted.max_gram_entry()) {
        return Ok(None);
    }
    Ok(Some(GlobalCertificate {
        k: sol.k,
        kappa,
        point: point.to_vec(),
        value,
        bound: mult.t,
        identity_residual: residual,
        min_gram_eigenvalue: min_eig,
        multipliers: shifted,
    }))
}

/// Hypotheses of the convergence result at a candidate point.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub point: Vec<f64>,
    pub objective: f64,
    pub robust_feasible: bool,
    pub lsc: LscReport,
    pub coercivity: CoercivityReport,
    pub warnings: Vec<String>,
}

impl HypothesisReport {
    pub fn hold(&self) -> bool {
        self.robust_feasible && self.lsc.holds && self.coercivity.asserted
    }
}

pub fn check_hypotheses(prob: &BilevelProblem, point: &[f64]) -> Result<HypothesisReport> {
    if point.len() != prob.m + prob.n {
        return Err(SosError::DimensionMismatch {
            expected: prob.m + prob.n,
            got: point.len(),
        });
    }
    let (x, y) = prob.split(point);
    let objective = prob.objective_at(x, y)?;
    let feas = robust_feasible(prob, x, y)?;
    let lsc = lower_slater(&prob.lower, Some(x))?;
    let coercivity = coercivity_check(prob, Some(point))?;
    let mut warnings = Vec::new();
    if !feas.feasible {
        warnings.push("feasible point not confirmed: no robust feasibility certificate at the given point".into());
    }
    if !lsc.holds {
        warnings
            .push("LSC violated: the lower-level Slater condition fails; relaxation values may not converge".into());
    }
    if let Some(w) = &lsc.warning {
        warnings.push(format!("LSC: {w}"));
    }
    if coercivity.asserted {
        warnings.push(if coercivity.hessian_pd {
            "coercivity asserted by the problem file (Hessian positive definite at the point)".into()
        } else {
            "coercivity asserted by the problem file, not verified".into()
        });
    } else {
        warnings.push("coercivity not asserted: convergence of the hierarchy is not guaranteed".into());
    }
    Ok(HypothesisReport {
        point: point.to_vec(),
        objective,
        robust_feasible: feas.feasible,
        lsc,
        coercivity,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct HierarchyOptions {
    pub k_min: Option<u32>,
    pub k_max: Option<u32>,
    pub kappa: Option<f64>,
    /// Candidate point `(x, y)`; defaults to the problem's feasible point.
    pub point: Option<Vec<f64>>,
    pub tol: f64,
    pub settings: SolverSettings,
    pub dump_dir: Option<PathBuf>,
    pub parallel: bool,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self {
            k_min: None,
            k_max: None,
            kappa: None,
            point: None,
            tol: 1e-6,
            settings: SolverSettings::default(),
            dump_dir: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HierarchyReport {
    pub kappa: f64,
    pub hypotheses: HypothesisReport,
    pub levels: Vec<LevelSolution>,
    /// Values nondecreasing in `k` up to `1e-6`.
    pub monotone: bool,
    /// Largest finite level value.
    pub best_bound: Option<f64>,
    /// Degree of the first level that certified the candidate point.
    pub certified: Option<u32>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub certificate: Option<GlobalCertificate>,
}

/// True iff the extended values are nondecreasing in `k` up to `slack`;
/// levels with unknown values are skipped.
pub fn is_monotone(levels: &[LevelSolution], slack: f64) -> bool {
    let mut prev = f64::NEG_INFINITY;
    for l in levels {
        if let Some(v) = l.status.extended_value(l.value) {
            if v < prev - slack {
                return false;
            }
            prev = prev.max(v);
        }
    }
    true
}

/// Default degree range: the data degree rounded up to even, plus two steps.
pub fn default_range(program: &SosProgram) -> (u32, u32) {
    let k_min = even_ceil(program.max_degree().max(2));
    (k_min, k_min + 4)
}

/// Solves every even level in `[k_min, k_max]`. Per-level failures are recorded.
pub fn run_hierarchy(prob: &BilevelProblem, opts: &HierarchyOptions) -> Result<HierarchyReport> {
    let point = opts
        .point
        .clone()
        .or_else(|| prob.feasible_point.clone())
        .ok_or(SosError::NoFeasiblePoint)?;
    let hypotheses = check_hypotheses(prob, &point)?;
    let fbar = hypotheses.objective;
    let kappa = opts.kappa.or(prob.kappa).unwrap_or(fbar);
    if kappa < fbar - 1e-12 * (1.0 + fbar.abs()) {
        return Err(SosError::KappaTooSmall { kappa, fbar });
    }
    let slp = build_single_level(prob, true)?;
    let program = SosProgram::from_single_level(&slp, &prob.f, kappa)?;
    let (dmin, dmax) = default_range(&program);
    let k_min = opts.k_min.map(even_ceil).unwrap_or(dmin);
    let k_max = opts.k_max.map(even_ceil).unwrap_or(if opts.k_min.is_some() {
        k_min.max(dmin) + 4
    } else {
        dmax
    });
    if k_min > k_max {
        return Err(SosError::InvalidRange { k_min, k_max });
    }
    let ks: Vec<u32> = (k_min..=k_max).step_by(2).collect();
    if let Some(dir) = &opts.dump_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut settings = opts.settings.clone();
    if opts.parallel {
        settings.threads = (settings.threads / ks.len()).max(1);
    }
    let dump = opts.dump_dir.as_deref();
    let results: Vec<Result<LevelSolution>> = if opts.parallel && ks.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = ks
                .iter()
                .map(|&k| {
                    let (program, settings) = (&program, &settings);
                    scope.spawn(move || solve_level(program, k, settings, dump))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(SosError::Io("level worker panicked".into())))
                })
                .collect()
        })
    } else {
        ks.iter().map(|&k| solve_level(&program, k, &settings, dump)).collect()
    };

    let mut warnings = hypotheses.warnings.clone();
    let mut levels = Vec::with_capacity(ks.len());
    for (k, r) in ks.iter().zip(results) {
        match r {
            Ok(sol) => {
                if !sol.status.is_solved() && sol.status != LevelStatus::Rejected {
                    warnings.push(format!("level k={k}: {:?}", sol.status));
                }
                levels.push(sol);
            }
            Err(e) => {
                warnings.push(format!("level k={k}: {e}"));
                let mut sol = LevelSolution::rejected(*k, e.to_string());
                sol.status = LevelStatus::NumericalFailure;
                levels.push(sol);
            }
        }
    }

    let monotone = is_monotone(&levels, 1e-6);
    if !monotone {
        warnings.push("level values are not monotone in k; numerical trouble suspected".into());
    }
    let best_bound = levels
        .iter()
        .filter(|l| l.status.is_solved())
        .filter_map(|l| l.value)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));

    let mut certificate = None;
    if hypotheses.robust_feasible {
        for l in &levels {
            if let Some(c) = certificate_from_level(&program, l, &point, fbar, opts.tol)? {
                certificate = Some(c);
                break;
            }
        }
    }
    if let Some(dir) = dump {
        let names = slp.variable_names();
        for l in &levels {
            if let Some(m) = &l.multipliers {
                let file = m.to_file(program.nvars, names.clone())?;
                write_json(&dir.join(format!("multipliers_k{}.json", l.k)), &file)?;
            }
        }
        if let Some(c) = &certificate {
            write_json(&dir.join("certificate.json"), &c.to_file(program.nvars, names)?)?;
        }
    }

    Ok(HierarchyReport {
        kappa,
        hypotheses,
        levels,
        monotone,
        best_bound,
        certified: certificate.as_ref().map(|c| c.k),
        warnings,
        certificate,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| SosError::Io(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub k: u32,
    pub kappa: f64,
    pub point: Vec<f64>,
    pub value: f64,
    pub point_robust_feasible: bool,
    pub level: LevelSolution,
    pub certified: bool,
    pub explanation: String,
    #[serde(skip)]
    pub certificate: Option<GlobalCertificate>,
}

/// Searches a degree-`k` representation proving that `f(x, y)` is the
/// global robust optimum. A negative answer is inconclusive in general.
pub fn certify_global(
    prob: &BilevelProblem,
    point: &[f64],
    kappa: Option<f64>,
    k: u32,
    settings: &SolverSettings,
    tol: f64,
) -> Result<CertifyReport> {
    if point.len() != prob.m + prob.n {
        return Err(SosError::DimensionMismatch {
            expected: prob.m + prob.n,
            got: point.len(),
        });
    }
    let (x, y) = prob.split(point);
    let value = prob.objective_at(x, y)?;
    let kappa = kappa.or(prob.kappa).unwrap_or(value);
    if kappa < value - 1e-12 * (1.0 + value.abs()) {
        return Err(SosError::KappaTooSmall { kappa, fbar: value });
    }
    let feasible = robust_feasible(prob, x, y)?.feasible;
    let slp = build_single_level(prob, true)?;
    let program = SosProgram::from_single_level(&slp, &prob.f, kappa)?;
    let level = solve_level(&program, k, settings, None)?;
    let certificate = certificate_from_level(&program, &level, point, value, tol)?;
    let explanation = match (&certificate, level.status.is_solved()) {
        (Some(c), _) => format!(
            "degree-{} representation found; identity residual {:.2e}",
            c.k, c.identity_residual
        ),
        (None, true) => format!(
            "relaxation bound {:.6} is below f = {value:.6}; no representation at degree {}",
            level.value.unwrap_or(f64::NAN),
            level.k
        ),
        (None, false) => format!("relaxation at degree {} ended with status {:?}", level.k, level.status),
    };
    Ok(CertifyReport {
        k: level.k,
        kappa,
        point: point.to_vec(),
        value,
        point_robust_feasible: feasible,
        certified: certificate.is_some(),
        level,
        explanation,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilevel::tests::{ep2, ep3};

    fn smoke_program() -> SosProgram {
        let x = Polynomial::var(1, 0);
        SosProgram::new(&x * &x, vec![Polynomial::constant(1, 1.0)], vec![], None).unwrap()
    }

    #[test]
    fn smoke_square_has_value_zero() {
        let level = build_program_relaxation(&smoke_program(), 2, DEFAULT_BASIS_CAP).unwrap();
        let sol = level.solve(&SolverSettings::default()).unwrap();
        assert!(sol.status.is_solved(), "{:?}", sol.status);
        assert!(sol.value.unwrap().abs() < 1e-6);
        let m = sol.multipliers.unwrap();
        let total = &m.sigma0.polynomial(1).unwrap() + &m.sigma[0].polynomial(1).unwrap();
        assert!((&total - &(&Polynomial::var(1, 0) * &Polynomial::var(1, 0))).max_abs_coeff() < 1e-6);
    }

    #[test]
    fn odd_degree_rounds_up_and_low_degree_rejects() {
        let level = build_program_relaxation(&smoke_program(), 3, DEFAULT_BASIS_CAP).unwrap();
        assert_eq!(level.k, 4);
        let x = Polynomial::var(1, 0);
        let quartic = &(&x * &x) * &(&x * &x);
        let p = SosProgram::new(quartic, vec![], vec![], None).unwrap();
        assert!(matches!(
            build_program_relaxation(&p, 2, DEFAULT_BASIS_CAP),
            Err(SosError::DegreeTooSmall { needed: 4, .. })
        ));
        let sol = solve_level(&p, 2, &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.status, LevelStatus::Rejected);
    }

    #[test]
    fn decomposition_of_identity_and_rank_one() {
        let basis = vec![Monomial::one(), Monomial::var(0)];
        let parts = extract_sos_decomposition(&DMatrix::identity(2, 2), &basis, 1, 1e-9).unwrap();
        assert_eq!(parts.len(), 2);
        let mut squares: Vec<Polynomial> = parts.iter().map(|p| p * p).collect();
        squares.sort_by_key(|p| p.degree());
        assert!((&squares[0] - &Polynomial::constant(1, 1.0)).max_abs_coeff() < 1e-12);
        assert!((&squares[1] - &(&Polynomial::var(1, 0) * &Polynomial::var(1, 0))).max_abs_coeff() < 1e-12);

        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let parts = extract_sos_decomposition(&g, &basis, 1, 1e-9).unwrap();
        assert_eq!(parts.len(), 1);
        let expected = &Polynomial::constant(1, 1.0) + &Polynomial::var(1, 0);
        assert!((&parts[0] - &expected).max_abs_coeff() < 1e-12);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            extract_sos_decomposition(&bad, &basis, 1, 1e-9),
            Err(SosError::Indefinite(_))
        ));
    }

    #[test]
    fn ep3_level_four() {
        let prob = ep3();
        let slp = build_single_level(&prob, true).unwrap();
        let level = build_relaxation(&slp, &prob.f, -1.0, 4).unwrap();
        let sol = level.solve(&SolverSettings::default()).unwrap();
        assert!(sol.status.is_solved(), "{:?}", sol.status);
        assert!((sol.value.unwrap() + 2.0).abs() < 1e-3, "{:?}", sol.value);
        let m = sol.multipliers.unwrap();
        let parts = extract_sos_decomposition(&m.sigma0.gram, &m.sigma0.basis, slp.nvars(), 1e-7).unwrap();
        let rebuilt = sum_of_squares(&parts, slp.nvars());
        let diff = &rebuilt - &m.sigma0.polynomial(slp.nvars()).unwrap();
        assert!(diff.max_abs_coeff() < 1e-6);
    }

    #[test]
    fn ep3_certificate_at_origin_only() {
        let prob = ep3();
        let s = SolverSettings::default();
        // The degree-4 bound sits about 3e-5 below the optimum, so the exact
        // representation first appears at degree 6.
        let low = certify_global(&prob, &[0.0, 0.0], Some(-1.0), 4, &s, 1e-6).unwrap();
        assert!(!low.certified);
        assert!((low.level.value.unwrap() + 2.0).abs() < 1e-4);
        let yes = certify_global(&prob, &[0.0, 0.0], Some(-1.0), 6, &s, 1e-6).unwrap();
        assert!(yes.certified, "{}", yes.explanation);
        let cert = yes.certificate.unwrap();
        assert!(cert.identity_residual <= 1e-6 * (1.0 + prob.f.max_abs_coeff()));
        for k in [4, 6] {
            let no = certify_global(&prob, &[0.1, 0.0], Some(-1.0), k, &s, 1e-6).unwrap();
            assert!(!no.certified, "{}", no.explanation);
        }
    }

    #[test]
    #[ignore = "slow in unoptimized builds; covered by the acceptance target"]
    fn ep2_level_six() {
        let prob = ep2();
        let opts = HierarchyOptions {
            k_min: Some(6),
            k_max: Some(6),
            ..Default::default()
        };
        let r = run_hierarchy(&prob, &opts).unwrap();
        assert!((r.levels[0].value.unwrap() - 1.0).abs() < 1e-3);
    }
}
