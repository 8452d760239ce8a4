use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Cosine learning-rate schedule: `η_t = η_0 · ½(1 + cos(π t / T))`.
pub fn cosine_lr(step: usize, total: usize, base: f64) -> Result<f64> {
    if step > total {
        return Err(Error::InvalidArgument(format!(
            "schedule step {step} exceeds total {total}"
        )));
    }
    if total == 0 {
        return Ok(base);
    }
    Ok(base * 0.5 * (1.0 + (PI * step as f64 / total as f64).cos()))
}
