//! Price impact of a single order and its decay.
//!
//! An order with initial fractional impact `delta0` placed at time `t0` contributes
//!
//! ```text
//! delta(s) = delta0 * c * lambda / (lambda^n + s^n)^(1/n),   s = sqrt(t - t0)
//! ```
//!
//! to the log-price displacement. `lambda` is the abscissa of the knee between the
//! plateau and the `1/s` tail, `c` is an order-unity multiplicative constant and `n`
//! sets the sharpness of the knee (`n = 1` is the plain rational form
//! `lambda / (lambda + s)`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted range for the order-unity multiplicative constant.
pub const UNITY_CONSTANT_RANGE: (f64, f64) = (0.1, 10.0);

/// Events with `|delta0|` at or above this bound are rejected.
pub const MAX_ABS_DELTA0: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactKernel {
    lambda: f64,
    unity_constant: f64,
    knee_sharpness: f64,
}

impl Default for ImpactKernel {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            unity_constant: 1.0,
            knee_sharpness: 1.0,
        }
    }
}

impl ImpactKernel {
    pub fn new(lambda: f64, unity_constant: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and > 0, got {lambda}"
            )));
        }
        let (lo, hi) = UNITY_CONSTANT_RANGE;
        if !(unity_constant >= lo && unity_constant <= hi) {
            return Err(Error::InvalidParameter(format!(
                "unity_constant must lie in [{lo}, {hi}], got {unity_constant}"
            )));
        }
        Ok(Self {
            lambda,
            unity_constant,
            knee_sharpness: 1.0,
        })
    }

    /// Sets the knee sharpness exponent (`>= 1`). Larger values give a sharper
    /// transition from plateau to tail; both boundary conditions are unchanged.
    pub fn with_knee_sharpness(mut self, sharpness: f64) -> Result<Self> {
        if !(sharpness.is_finite() && sharpness >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "knee sharpness must be finite and >= 1, got {sharpness}"
            )));
        }
        self.knee_sharpness = sharpness;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn unity_constant(&self) -> f64 {
        self.unity_constant
    }

    pub fn knee_sharpness(&self) -> f64 {
        self.knee_sharpness
    }

    /// Dimensionless decay factor `lambda / (lambda^n + s^n)^(1/n)`, equal to 1 at `s = 0`.
    pub fn decay_factor(&self, s: f64) -> f64 {
        let lambda = self.lambda;
        if self.knee_sharpness == 1.0 {
            lambda / (lambda + s)
        } else {
            let n = self.knee_sharpness;
            lambda / (lambda.powf(n) + s.powf(n)).powf(1.0 / n)
        }
    }

    /// Impact remaining `s` (in sqrt-day units) after placement of an order with
    /// initial impact `delta0`.
    pub fn impact_at(&self, delta0: f64, s: f64) -> f64 {
        delta0 * self.unity_constant * self.decay_factor(s)
    }
}

/// A single order's initial impact, anchored in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEvent {
    pub time: f64,
    pub delta0: f64,
}

impl ImpactEvent {
    pub fn new(time: f64, delta0: f64) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "event time must be finite and >= 0, got {time}"
            )));
        }
        if !(delta0.is_finite() && delta0.abs() < MAX_ABS_DELTA0) {
            return Err(Error::InvalidParameter(format!(
                "|delta0| must be < {MAX_ABS_DELTA0}, got {delta0}"
            )));
        }
        Ok(Self { time, delta0 })
    }
}

pub fn decayed_impact(kernel: &ImpactKernel, event: &ImpactEvent, t_now: f64) -> Result<f64> {
    if t_now.is_nan() || t_now < event.time {
        return Err(Error::Precondition(format!(
            "evaluation time {t_now} precedes event time {}",
            event.time
        )));
    }
    let s = (t_now - event.time).sqrt();
    Ok(kernel.impact_at(event.delta0, s))
}

/// Linear superposition of every event's decayed impact at `t_now`.
pub fn superpose_displacement(
    kernel: &ImpactKernel,
    events: &[ImpactEvent],
    t_now: f64,
) -> Result<f64> {
    events
        .iter()
        .try_fold(0.0, |acc, e| Ok(acc + decayed_impact(kernel, e, t_now)?))
}
