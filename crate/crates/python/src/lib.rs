//! Python bindings: problem loading, feasibility checks, the relaxation
//! hierarchy, global certificates, and Farkas certificates.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rbsos::bilevel::{build_single_level, robust_feasible, BilevelProblem};
use rbsos::cli::io::FarkasSystem;
use rbsos::conic::SolverSettings;
use rbsos::farkas::{check_implication_sampled, find_certificate, verify_certificate, SamplingOptions};
use rbsos::lowerlevel::is_robust_solution;
use rbsos::poly::Monomial;
use rbsos::sos::{certify_global, extract_sos_decomposition, run_hierarchy, HierarchyOptions, HierarchyReport};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// `(lambda0, lambda)` multipliers of a Farkas certificate.
type Multipliers = (Vec<f64>, Vec<Vec<f64>>);
/// Square roots as lists of `(exponents, coeff)` terms.
type Squares = Vec<Vec<(Vec<u32>, f64)>>;

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A bilevel polynomial problem with uncertain linear constraints.
#[pyclass(name = "Problem", module = "rbsos_py")]
struct PyProblem {
    inner: BilevelProblem,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        BilevelProblem::from_json(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(value_err)?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn feasible_point(&self) -> Option<Vec<f64>> {
        self.inner.feasible_point.clone()
    }

    fn objective(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner.objective_at(&x, &y).map_err(value_err)
    }

    /// Number of `g` and `h` polynomials of the single-level program.
    fn single_level_sizes(&self) -> PyResult<(usize, usize)> {
        let slp = build_single_level(&self.inner, true).map_err(value_err)?;
        Ok((slp.g.len(), slp.h.len()))
    }

    fn is_robust_feasible(&self, py: Python<'_>, x: Vec<f64>, y: Vec<f64>) -> PyResult<bool> {
        py.detach(|| robust_feasible(&self.inner, &x, &y))
            .map(|r| r.feasible)
            .map_err(value_err)
    }

    fn is_lower_solution(&self, py: Python<'_>, x: Vec<f64>, y: Vec<f64>) -> PyResult<bool> {
        py.detach(|| is_robust_solution(&self.inner.lower, &x, &y))
            .map(|r| r.is_solution)
            .map_err(value_err)
    }

    #[pyo3(signature = (kmin=None, kmax=None, kappa=None, point=None))]
    fn solve(
        &self,
        py: Python<'_>,
        kmin: Option<u32>,
        kmax: Option<u32>,
        kappa: Option<f64>,
        point: Option<Vec<f64>>,
    ) -> PyResult<PyHierarchy> {
        let opts = HierarchyOptions {
            k_min: kmin,
            k_max: kmax,
            kappa,
            point,
            ..Default::default()
        };
        py.detach(|| run_hierarchy(&self.inner, &opts))
            .map(|inner| PyHierarchy { inner })
            .map_err(runtime_err)
    }

    /// True iff a degree-`k` global optimality certificate exists at `(x, y)`.
    #[pyo3(signature = (x, y, k=4, kappa=None, tol=1e-6))]
    fn certify(
        &self,
        py: Python<'_>,
        x: Vec<f64>,
        y: Vec<f64>,
        k: u32,
        kappa: Option<f64>,
        tol: f64,
    ) -> PyResult<bool> {
        let point: Vec<f64> = x.into_iter().chain(y).collect();
        py.detach(|| certify_global(&self.inner, &point, kappa, k, &SolverSettings::default(), tol))
            .map(|r| r.certified)
            .map_err(runtime_err)
    }
}

/// Result of a hierarchy run.
#[pyclass(name = "Hierarchy", module = "rbsos_py")]
struct PyHierarchy {
    inner: HierarchyReport,
}

#[pymethods]
impl PyHierarchy {
    /// `(k, value or None, status)` per level.
    #[getter]
    fn levels(&self) -> Vec<(u32, Option<f64>, String)> {
        self.inner
            .levels
            .iter()
            .map(|l| {
                let status = serde_json::to_value(l.status)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                (l.k, l.status.is_solved().then_some(l.value).flatten(), status)
            })
            .collect()
    }

    #[getter]
    fn best_bound(&self) -> Option<f64> {
        self.inner.best_bound
    }

    #[getter]
    fn certified(&self) -> Option<u32> {
        self.inner.certified
    }

    #[getter]
    fn monotone(&self) -> bool {
        self.inner.monotone
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(runtime_err)
    }
}

/// A robust linear system `a_j(u)^T x <= b_j(u)` for all `u` in `U_j`.
#[pyclass(name = "FarkasSystem", module = "rbsos_py")]
struct PyFarkasSystem {
    inner: FarkasSystem,
}

#[pymethods]
impl PyFarkasSystem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        FarkasSystem::from_json(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(value_err)?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Multipliers `(lambda0, lambda)` proving `p^T x >= r`, or `None`.
    fn find_certificate(&self, py: Python<'_>, p: Vec<f64>, r: f64) -> PyResult<Option<Multipliers>> {
        py.detach(|| find_certificate(&p, r, &self.inner.constraints))
            .map(|c| c.map(|c| (c.lambda0, c.lambda)))
            .map_err(runtime_err)
    }

    #[pyo3(signature = (p, r, lambda0, lambda_, tol=1e-6))]
    fn verify_certificate(&self, p: Vec<f64>, r: f64, lambda0: Vec<f64>, lambda_: Vec<Vec<f64>>, tol: f64) -> bool {
        let cert = rbsos::farkas::FarkasCertificate {
            lambda0,
            lambda: lambda_,
        };
        verify_certificate(&cert, &p, r, &self.inner.constraints, tol)
    }

    /// Sampling check of the implication; returns `(holds, feasible_samples)`.
    #[pyo3(signature = (p, r, samples=1000, seed=7))]
    fn check_implication(
        &self,
        py: Python<'_>,
        p: Vec<f64>,
        r: f64,
        samples: usize,
        seed: u64,
    ) -> PyResult<(bool, usize)> {
        let opts = SamplingOptions {
            seed,
            ..Default::default()
        };
        py.detach(|| check_implication_sampled(&p, r, &self.inner.constraints, samples, &opts))
            .map(|c| (c.holds, c.feasible_samples))
            .map_err(runtime_err)
    }
}

/// Factors a PSD Gram matrix over monomials given as dense exponent
/// vectors; returns each square root as a list of `(exponents, coeff)`.
#[pyfunction]
#[pyo3(signature = (gram, basis, tol=1e-9))]
fn sos_decomposition(gram: Vec<Vec<f64>>, basis: Vec<Vec<u32>>, tol: f64) -> PyResult<Squares> {
    let n = gram.len();
    if gram.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("Gram matrix must be square"));
    }
    let nvars = basis.first().map_or(0, Vec::len);
    if basis.iter().any(|b| b.len() != nvars) {
        return Err(PyValueError::new_err("basis exponent vectors differ in length"));
    }
    let g = DMatrix::from_fn(n, n, |i, j| gram[i][j]);
    let monos: Vec<Monomial> = basis.iter().map(|b| Monomial::from_dense(b)).collect();
    let parts = extract_sos_decomposition(&g, &monos, nvars, tol).map_err(value_err)?;
    Ok(parts
        .iter()
        .map(|p| p.to_literal().into_iter().map(|t| (t.exponents, t.coeff)).collect())
        .collect())
}

#[pymodule]
pub fn rbsos_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyHierarchy>()?;
    m.add_class::<PyFarkasSystem>()?;
    m.add_function(wrap_pyfunction!(sos_decomposition, m)?)?;
    Ok(())
}
