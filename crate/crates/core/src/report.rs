//! Named residual checks shared by the pipelines and the command line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `residual <= tolerance`.
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            max_residual: residual,
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
        }
    }

    /// Negative control: passes when `value > threshold`.
    pub fn exceeds(name: impl Into<String>, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            max_residual: value,
            tolerance: threshold,
            pass: value.is_finite() && value > threshold,
        }
    }

    pub fn ensure(&self) -> Result<()> {
        if self.pass {
            Ok(())
        } else {
            Err(Error::CheckFailed {
                name: self.name.clone(),
                residual: self.max_residual,
                tolerance: self.tolerance,
            })
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// First failing check as an error.
pub fn ensure_all(checks: &[Check]) -> Result<()> {
    checks.iter().try_for_each(Check::ensure)
}
