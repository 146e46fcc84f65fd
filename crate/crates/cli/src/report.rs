use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Result};
use ewweb::report::Check;
use serde::Serialize;
use serde_json::Value;

/// The JSON written by every subcommand. Apart from `timestamp` it depends
/// only on the resolved arguments.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub params: Value,
    pub seed: u64,
    pub conventions_digest: String,
    pub checks: Vec<Check>,
    /// Named outputs of the job (constants, probe values, solver summary).
    pub values: BTreeMap<String, Value>,
    pub timestamp: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        ewweb::report::all_pass(&self.checks)
    }
}

/// Tolerances, with per-check overrides from `--tol name=value`.
pub struct Tolerances {
    overrides: BTreeMap<String, f64>,
    used: BTreeSet<String>,
}

impl Tolerances {
    pub fn new(pairs: &[(String, f64)]) -> Result<Tolerances> {
        let mut overrides = BTreeMap::new();
        for (k, v) in pairs {
            if !(v.is_finite() && *v > 0.0) {
                bail!("tolerance for {k} must be positive, got {v}");
            }
            overrides.insert(k.clone(), *v);
        }
        Ok(Tolerances {
            overrides,
            used: BTreeSet::new(),
        })
    }

    pub fn get(&mut self, name: &str, default: f64) -> f64 {
        self.used.insert(name.to_string());
        self.overrides.get(name).copied().unwrap_or(default)
    }

    pub fn check(&mut self, name: &str, residual: f64, default: f64) -> Check {
        let tol = self.get(name, default);
        Check::new(name, residual, tol)
    }

    /// Overrides that named no check of the job.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&String> = self.overrides.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            bail!("--tol names no check of this command: {unknown:?}");
        }
        Ok(())
    }
}
