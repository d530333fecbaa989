//! Machine-readable run reports and their plain-text rendering.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// Value of one relaxation level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelValue {
    pub k: u32,
    pub val: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    /// Wall time of each relaxation level, in level order.
    pub levels_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub status: String,
    /// SHA-256 of the input file.
    pub input_digest: Option<String>,
    pub values: Vec<LevelValue>,
    pub certificates: Vec<Value>,
    pub warnings: Vec<String>,
    pub timings: Timings,
    /// Command-specific verdicts and diagnostics.
    pub details: Value,
    /// One-line human summary.
    pub summary: String,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            status: "ok".into(),
            input_digest: None,
            values: Vec::new(),
            certificates: Vec::new(),
            warnings: Vec::new(),
            timings: Timings {
                total_seconds: 0.0,
                levels_seconds: Vec::new(),
            },
            details: Value::Null,
            summary: String::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}: {}", self.command, self.status);
        if !self.summary.is_empty() {
            let _ = writeln!(out, "{}", self.summary);
        }
        if !self.values.is_empty() {
            let _ = writeln!(out, "{:>4}  {:>14}  status", "k", "value");
            for v in &self.values {
                let val = v.val.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
                let _ = writeln!(out, "{:>4}  {:>14}  {}", v.k, val, v.status);
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "time: {:.2}s", self.timings.total_seconds);
        out
    }
}
