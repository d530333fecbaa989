//! Modeling layer over [`ConicProblem`]: named variables in cones, affine
//! expressions, and helpers for SOC and LMI constraints.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;

use super::svec::{smat, svec_index, svec_len, SQRT2};
use super::{solve, ConeSpec, ConicError, ConicProblem, ConicSolution, SolveStatus, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

/// A PSD matrix variable of the given order, stored in `svec` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsdVar {
    base: usize,
    order: usize,
}

impl PsdVar {
    pub fn order(&self) -> usize {
        self.order
    }

    /// The matrix entry `X[i][j]` as an expression.
    pub fn entry(&self, i: usize, j: usize) -> LinExpr {
        let k = svec_index(self.order, i, j);
        let coef = if i == j { 1.0 } else { 1.0 / SQRT2 };
        LinExpr::term(Var(self.base + k), coef)
    }

    /// `trace(C X)` for a symmetric coefficient matrix `C`.
    pub fn inner(&self, c: &DMatrix<f64>) -> LinExpr {
        let mut e = LinExpr::zero();
        for j in 0..self.order {
            for i in j..self.order {
                let v = if i == j {
                    c[(i, i)]
                } else {
                    SQRT2 * 0.5 * (c[(i, j)] + c[(j, i)])
                };
                if v != 0.0 {
                    e.add_term(Var(self.base + svec_index(self.order, i, j)), v);
                }
            }
        }
        e
    }

    /// Variables of the `svec` representation.
    pub fn svec_vars(&self) -> impl Iterator<Item = Var> {
        let base = self.base;
        (0..svec_len(self.order)).map(move |k| Var(base + k))
    }
}

/// Affine expression `sum coef * var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: Var, coef: f64) {
        self.terms.push((v, coef));
    }

    pub fn add_scaled(&mut self, other: &LinExpr, k: f64) {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * k)));
        self.constant += other.constant * k;
    }

    pub fn scaled(&self, k: f64) -> LinExpr {
        let mut e = LinExpr::zero();
        e.add_scaled(self, k);
        e
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        self.scaled(k)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Free,
    NonNeg,
    Soc(usize),
    Psd(usize),
}

#[derive(Debug, Clone)]
pub struct ConicBuilder {
    kinds: Vec<Kind>,
    soc_groups: Vec<(usize, usize)>,
    psd_groups: Vec<(usize, usize)>,
    rows: Vec<(LinExpr, f64)>,
    objective: LinExpr,
    sense: Sense,
}

impl Default for ConicBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ConicBuilder {
    pub fn new() -> Self {
        Self {
            kinds: Vec::new(),
            soc_groups: Vec::new(),
            psd_groups: Vec::new(),
            rows: Vec::new(),
            objective: LinExpr::zero(),
            sense: Sense::Minimize,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn alloc(&mut self, kind: Kind, count: usize) -> usize {
        let base = self.kinds.len();
        self.kinds.extend(std::iter::repeat_n(kind, count));
        base
    }

    pub fn free(&mut self) -> Var {
        Var(self.alloc(Kind::Free, 1))
    }

    pub fn free_vec(&mut self, n: usize) -> Vec<Var> {
        let base = self.alloc(Kind::Free, n);
        (base..base + n).map(Var).collect()
    }

    pub fn nonneg(&mut self) -> Var {
        Var(self.alloc(Kind::NonNeg, 1))
    }

    pub fn nonneg_vec(&mut self, n: usize) -> Vec<Var> {
        let base = self.alloc(Kind::NonNeg, n);
        (base..base + n).map(Var).collect()
    }

    /// Variables `(v_0, ..., v_{dim-1})` constrained to `v_0 >= ||v_{1..}||`.
    pub fn soc_var(&mut self, dim: usize) -> Vec<Var> {
        assert!(dim > 0, "second-order cone needs at least one coordinate");
        let g = self.soc_groups.len();
        let base = self.alloc(Kind::Soc(g), dim);
        self.soc_groups.push((base, dim));
        (base..base + dim).map(Var).collect()
    }

    pub fn psd_var(&mut self, order: usize) -> PsdVar {
        assert!(order > 0, "PSD variable needs positive order");
        let g = self.psd_groups.len();
        let base = self.alloc(Kind::Psd(g), svec_len(order));
        self.psd_groups.push((base, order));
        PsdVar { base, order }
    }

    /// Adds `expr == rhs` and returns the row index.
    pub fn add_eq(&mut self, expr: LinExpr, rhs: f64) -> usize {
        let rhs = rhs - expr.constant;
        let expr = LinExpr {
            terms: expr.terms,
            constant: 0.0,
        };
        self.rows.push((expr, rhs));
        self.rows.len() - 1
    }

    /// Adds `expr >= 0` through a nonnegative slack.
    pub fn add_nonneg(&mut self, expr: LinExpr) -> usize {
        let s = self.nonneg();
        self.add_eq(expr - LinExpr::from(s), 0.0)
    }

    /// Adds `exprs[0] >= ||exprs[1..]||`.
    pub fn add_soc(&mut self, exprs: Vec<LinExpr>) {
        let vars = self.soc_var(exprs.len());
        for (v, e) in vars.into_iter().zip(exprs) {
            self.add_eq(LinExpr::from(v) - e, 0.0);
        }
    }

    /// Adds the LMI `mat >= 0` for a symmetric matrix of affine expressions
    /// (only the lower triangle is read) and returns the slack variable.
    pub fn add_psd(&mut self, mat: &[Vec<LinExpr>]) -> PsdVar {
        let n = mat.len();
        let x = self.psd_var(n);
        for (i, row) in mat.iter().enumerate() {
            for (j, e) in row.iter().enumerate().take(i + 1) {
                self.add_eq(x.entry(i, j) - e.clone(), 0.0);
            }
        }
        x
    }

    pub fn minimize(&mut self, expr: LinExpr) {
        self.objective = expr;
        self.sense = Sense::Minimize;
    }

    pub fn maximize(&mut self, expr: LinExpr) {
        self.objective = expr;
        self.sense = Sense::Maximize;
    }

    /// Column of every variable in the standard-form layout.
    fn layout(&self) -> (Vec<usize>, ConeSpec) {
        let mut col = vec![0; self.kinds.len()];
        let mut at = 0;
        let mut spec = ConeSpec::default();
        for (v, k) in self.kinds.iter().enumerate() {
            if *k == Kind::Free {
                col[v] = at;
                at += 1;
                spec.free += 1;
            }
        }
        for (v, k) in self.kinds.iter().enumerate() {
            if *k == Kind::NonNeg {
                col[v] = at;
                at += 1;
                spec.nonneg += 1;
            }
        }
        for &(base, dim) in &self.soc_groups {
            for k in 0..dim {
                col[base + k] = at + k;
            }
            at += dim;
            spec.soc.push(dim);
        }
        for &(base, order) in &self.psd_groups {
            let len = svec_len(order);
            for k in 0..len {
                col[base + k] = at + k;
            }
            at += len;
            spec.psd.push(order);
        }
        (col, spec)
    }

    pub fn build(&self) -> (ConicProblem, Vec<usize>) {
        let (col, cones) = self.layout();
        let n = self.kinds.len();
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut c = vec![0.0; n];
        for &(v, k) in &self.objective.terms {
            c[col[v.0]] += sign * k;
        }
        let rows = self
            .rows
            .iter()
            .map(|(e, _)| e.terms.iter().map(|&(v, k)| (col[v.0], k)).collect())
            .collect();
        let b = self.rows.iter().map(|&(_, r)| r).collect();
        (ConicProblem { rows, b, c, cones }, col)
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<SolvedModel, ConicError> {
        let (problem, col) = self.build();
        let solution = solve(&problem, settings)?;
        let values = col.iter().map(|&c| solution.x[c]).collect();
        let (objective, bound) = match self.sense {
            Sense::Minimize => (
                solution.primal_obj + self.objective.constant,
                solution.dual_obj + self.objective.constant,
            ),
            Sense::Maximize => (
                -solution.primal_obj + self.objective.constant,
                -solution.dual_obj + self.objective.constant,
            ),
        };
        Ok(SolvedModel {
            status: solution.status,
            values,
            objective,
            dual_bound: bound,
            solution,
        })
    }
}

/// Solution mapped back to builder variables.
#[derive(Debug, Clone)]
pub struct SolvedModel {
    pub status: SolveStatus,
    values: Vec<f64>,
    /// Objective at the returned primal point, in the builder's sense.
    pub objective: f64,
    /// Objective of the dual point, in the builder's sense.
    pub dual_bound: f64,
    pub solution: ConicSolution,
}

impl SolvedModel {
    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.constant + e.terms.iter().map(|&(v, k)| k * self.values[v.0]).sum::<f64>()
    }

    pub fn psd_value(&self, x: &PsdVar) -> DMatrix<f64> {
        let v: Vec<f64> = x.svec_vars().map(|v| self.values[v.0]).collect();
        smat(&v, x.order)
    }

    /// Dual multiplier of a row in the standard-form (minimization) problem.
    pub fn row_dual(&self, row: usize) -> f64 {
        self.solution.y[row]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lmi_min_diagonal() {
        let mut b = ConicBuilder::new();
        let t = b.free();
        let te = LinExpr::from(t);
        b.add_psd(&[
            vec![te.clone(), LinExpr::constant(1.0)],
            vec![LinExpr::constant(1.0), te.clone()],
        ]);
        b.minimize(te);
        let sol = b.solve(&SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value(t) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn maximize_with_soc() {
        // max x + y s.t. ||(x, y)|| <= 1 -> sqrt(2).
        let mut b = ConicBuilder::new();
        let x = b.free();
        let y = b.free();
        b.add_soc(vec![LinExpr::constant(1.0), x.into(), y.into()]);
        b.maximize(LinExpr::from(x) + LinExpr::from(y));
        let sol = b.solve(&SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - SQRT2).abs() < 1e-6);
        assert!(sol.dual_bound >= sol.objective - 1e-6);
    }

    #[test]
    fn psd_inner_matches_trace() {
        let mut b = ConicBuilder::new();
        let x = b.psd_var(2);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        // min trace(C X) s.t. trace X = 1 -> lambda_min(C).
        b.add_eq(x.inner(&DMatrix::identity(2, 2)), 1.0);
        b.minimize(x.inner(&c));
        let sol = b.solve(&SolverSettings::default()).unwrap();
        let lmin = c.symmetric_eigenvalues().min();
        assert!((sol.objective - lmin).abs() < 1e-6);
        let xv = sol.psd_value(&x);
        assert!((xv.trace() - 1.0).abs() < 1e-6);
    }
}
