//! Uniform pass/fail records produced by the verification suites.

use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport { name: name.into(), passed: true, metrics: BTreeMap::new(), notes: Vec::new() }
    }

    pub fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    /// Record a requirement; a false condition fails the check and keeps the
    /// message.
    pub fn require(&mut self, ok: bool, msg: impl Into<String>) -> &mut Self {
        if !ok {
            self.passed = false;
            self.notes.push(msg.into());
        }
        self
    }

    pub fn note(&mut self, msg: impl Into<String>) -> &mut Self {
        self.notes.push(msg.into());
        self
    }

    pub fn get(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }
}
