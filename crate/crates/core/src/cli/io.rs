//! Input files: bilevel problem files and Farkas system files.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::bilevel::BilevelProblem;
use crate::uncertainty::{AffineUncertainConstraint, UncertaintySet, UncertaintySpec};

/// Raw file contents with their SHA-256 digest.
#[derive(Debug, Clone)]
pub struct Input {
    pub text: String,
    pub digest: String,
}

pub fn read_input(path: &Path) -> Result<Input, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(Input { text, digest })
}

/// Parses a problem file; serde diagnostics carry line and column.
pub fn parse_problem(text: &str) -> Result<BilevelProblem, CliError> {
    BilevelProblem::from_json(text).map_err(|e| CliError::Parse(e.to_string()))
}

/// One `a(u)^T x <= b(u)` record of a Farkas system file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    /// `a^0, ..., a^s`.
    pub a: Vec<Vec<f64>>,
    /// `b^0, ..., b^s`.
    pub b: Vec<f64>,
    pub uncertainty: UncertaintySpec,
}

/// A robust system together with the tested inequality `p^T x >= r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarkasFile {
    pub n: usize,
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarkasSystem {
    pub n: usize,
    pub constraints: Vec<AffineUncertainConstraint>,
    pub p: Option<Vec<f64>>,
    pub r: Option<f64>,
}

impl TryFrom<FarkasFile> for FarkasSystem {
    type Error = CliError;

    fn try_from(file: FarkasFile) -> Result<Self, CliError> {
        let mut constraints = Vec::with_capacity(file.constraints.len());
        for (j, c) in file.constraints.into_iter().enumerate() {
            let bad = |msg: String| CliError::Parse(format!("constraints[{j}]: {msg}"));
            if let Some(v) = c.a.iter().find(|v| v.len() != file.n) {
                return Err(bad(format!(
                    "coefficient vector of length {}, expected n = {}",
                    v.len(),
                    file.n
                )));
            }
            let set = UncertaintySet::try_from(c.uncertainty).map_err(|e| bad(e.to_string()))?;
            let con =
                AffineUncertainConstraint::new(c.a.iter().map(|v| DVector::from_column_slice(v)).collect(), c.b, set)
                    .map_err(|e| bad(e.to_string()))?;
            constraints.push(con);
        }
        if let Some(p) = &file.p {
            if p.len() != file.n {
                return Err(CliError::Parse(format!(
                    "p has length {}, expected n = {}",
                    p.len(),
                    file.n
                )));
            }
        }
        Ok(FarkasSystem {
            n: file.n,
            constraints,
            p: file.p,
            r: file.r,
        })
    }
}

impl From<&FarkasSystem> for FarkasFile {
    fn from(s: &FarkasSystem) -> Self {
        FarkasFile {
            n: s.n,
            constraints: s
                .constraints
                .iter()
                .map(|c| ConstraintSpec {
                    a: c.a.iter().map(|v| v.as_slice().to_vec()).collect(),
                    b: c.b.clone(),
                    uncertainty: UncertaintySpec::from(&c.set),
                })
                .collect(),
            p: s.p.clone(),
            r: s.r,
        }
    }
}

impl FarkasSystem {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file: FarkasFile =
            serde_json::from_str(text).map_err(|e| CliError::Parse(format!("Farkas system file: {e}")))?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FarkasFile::from(self)).expect("Farkas file serializes")
    }
}
