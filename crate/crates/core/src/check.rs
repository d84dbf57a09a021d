use std::collections::BTreeMap;

use serde::Serialize;

/// Outcome of a numeric property check, serialized verbatim into verdict files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Threshold the measured values were compared against.
    pub tolerance: f64,
    pub measured: BTreeMap<String, f64>,
    /// Human-readable descriptions of the first violations (capped).
    pub failures: Vec<String>,
}

const MAX_RECORDED_FAILURES: usize = 32;

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            tolerance,
            measured: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    pub fn measure(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.measured.insert(key.into(), value);
        self
    }

    pub fn fail(&mut self, message: impl Into<String>) {
        self.passed = false;
        if self.failures.len() < MAX_RECORDED_FAILURES {
            self.failures.push(message.into());
        }
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.measured.get(key).copied()
    }
}
