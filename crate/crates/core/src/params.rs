//! Hyperparameters and the step-size / conditioner schedules.
//!
//! The schedules are
//!
//! ```text
//! beta2_t = 1 - alpha0          (t = 1)
//! beta2_t = 1 - 1 / t^gamma      (t >= 2)
//! eta_t   = 1 / t^(1/2 + delta)
//! ```
//!
//! with `delta` in `[0, 1/2]` and `gamma` in `[1, 2 delta + 1]`. Powers are
//! evaluated as `exp(p * ln t)` in double precision; results agree across
//! platforms to roughly one ulp, not bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which `gamma` range validation accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleRegion {
    /// `gamma` in `[1, 2 delta + 1]`.
    #[default]
    Standard,
    /// Any `gamma >= 1`. Needed for the `delta = 0, gamma > 1` rate case,
    /// which lies outside the standard region. Monotonicity of the adaptive
    /// rate still holds for every `gamma >= 1`.
    Extended,
}

impl ScheduleRegion {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScheduleRegion::Standard => "standard",
            ScheduleRegion::Extended => "extended",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub beta1: f64,
    pub alpha0: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Smoothing term added after the square root.
    pub mu: f64,
    /// Initial second-moment fill `v_0 = v * 1`.
    pub v: f64,
    pub dim: usize,
    #[serde(default)]
    pub region: ScheduleRegion,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            beta1: 0.9,
            alpha0: 0.5,
            gamma: 1.25,
            delta: 0.25,
            mu: 1e-8,
            v: 1.0,
            dim: 1,
            region: ScheduleRegion::Standard,
        }
    }
}

impl HyperParams {
    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_schedule(mut self, delta: f64, gamma: f64) -> Self {
        self.delta = delta;
        self.gamma = gamma;
        self
    }

    /// Returns `self` unchanged if every constraint holds.
    pub fn validate(self) -> Result<Self> {
        let fail = |msg: String| Err(Error::ConstraintViolation(msg));
        let finite = [
            ("beta1", self.beta1),
            ("alpha0", self.alpha0),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("mu", self.mu),
            ("v", self.v),
        ];
        for (name, x) in finite {
            if !x.is_finite() {
                return fail(format!("{name} is not finite"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return fail(format!("beta1 = {} not in [0, 1)", self.beta1));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return fail(format!("alpha0 = {} not in (0, 1)", self.alpha0));
        }
        if !(0.0..=0.5).contains(&self.delta) {
            return fail(format!("delta = {} not in [0, 1/2]", self.delta));
        }
        if self.gamma < 1.0 {
            return fail(format!("gamma = {} < 1", self.gamma));
        }
        if self.region == ScheduleRegion::Standard && self.gamma > 2.0 * self.delta + 1.0 {
            return fail(format!(
                "gamma > 2*delta+1 ({} > {})",
                self.gamma,
                2.0 * self.delta + 1.0
            ));
        }
        if self.mu <= 0.0 {
            return fail(format!("mu = {} must be > 0", self.mu));
        }
        if self.v <= 0.0 {
            return fail(format!("v = {} must be > 0", self.v));
        }
        if self.dim == 0 {
            return fail("dim must be positive".into());
        }
        Ok(self)
    }
}

/// Free-function form of [`HyperParams::validate`].
pub fn validate_hyperparams(h: HyperParams) -> Result<HyperParams> {
    h.validate()
}

#[inline]
pub(crate) fn pow_t(t: u64, p: f64) -> f64 {
    (p * (t as f64).ln()).exp()
}

/// Conditioner `beta2_t`. `t` is the 1-based step index.
pub fn beta2_at(t: u64, h: &HyperParams) -> f64 {
    debug_assert!(t >= 1);
    if t <= 1 {
        1.0 - h.alpha0
    } else {
        1.0 - 1.0 / pow_t(t, h.gamma)
    }
}

/// Base step size `eta_t = t^-(1/2 + delta)`.
pub fn eta_at(t: u64, h: &HyperParams) -> f64 {
    debug_assert!(t >= 1);
    1.0 / pow_t(t.max(1), 0.5 + h.delta)
}

/// `alpha_1 = min(1 - alpha0, alpha0)`.
pub fn alpha1(h: &HyperParams) -> f64 {
    (1.0 - h.alpha0).min(h.alpha0)
}

/// Schedule values at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleValue {
    pub t: u64,
    pub beta2_t: f64,
    pub eta_t: f64,
}

impl ScheduleValue {
    pub fn at(t: u64, h: &HyperParams) -> Self {
        ScheduleValue {
            t,
            beta2_t: beta2_at(t, h),
            eta_t: eta_at(t, h),
        }
    }
}
