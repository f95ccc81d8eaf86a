use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial dimension, nonlinearity exponent and damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
}

impl ModelParams {
    pub fn new(d: usize, p: f64, alpha: f64) -> Result<Self> {
        let m = ModelParams { d, p, alpha };
        m.validate()?;
        Ok(m)
    }

    /// d = 1 is accepted so the closed-form line soliton can serve as an oracle.
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.d) {
            return Err(Error::InvalidParams(format!("d = {} outside [1, 5]", self.d)));
        }
        if !(self.p.is_finite() && self.p > 2.0) {
            return Err(Error::InvalidParams(format!("p = {} must exceed 2", self.p)));
        }
        if self.d >= 3 {
            let crit = (self.d as f64 + 2.0) / (self.d as f64 - 2.0);
            if self.p >= crit {
                return Err(Error::InvalidParams(format!("p = {} is not energy sub-critical (must be < {crit}) for d = {}", self.p, self.d)));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParams(format!("alpha = {} must be positive", self.alpha)));
        }
        Ok(())
    }

    /// Exponent (d-1)/2 of the algebraic prefactor in the far field.
    pub fn tail_power(&self) -> f64 {
        (self.d as f64 - 1.0) / 2.0
    }
}
