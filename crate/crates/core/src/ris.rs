//! Reflection coefficients for RIS elements.
//!
//! Under the practical model an element's reflection amplitude depends on the
//! phase it applies:
//!
//! ```text
//! β(θ) = (1 − β_min) · ((sin(θ − φ₀) + 1) / 2)^α + β_min
//! ```
//!
//! where `α` sets the steepness of the dip, `β_min` is the amplitude floor and
//! `φ₀` shifts the phase at which the floor is reached. `α = 0` gives `β ≡ 1`,
//! the ideal unit-amplitude surface.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectionMode {
    Ideal,
    Practical,
}

impl std::str::FromStr for ReflectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(ReflectionMode::Ideal),
            "practical" => Ok(ReflectionMode::Practical),
            other => Err(Error::config("reflection.mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionParams {
    pub mode: ReflectionMode,
    /// Steepness `α ≥ 0` of the amplitude curve.
    pub steepness: f64,
    /// Amplitude floor `β_min ∈ (0, 1]`.
    pub beta_min: f64,
    /// Phase offset `φ₀` in radians.
    pub phase_offset: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for ReflectionParams {
    fn default() -> Self {
        ReflectionParams {
            mode: ReflectionMode::Practical,
            steepness: 1.6,
            beta_min: 0.2,
            phase_offset: 0.43 * PI,
            theta_min: -PI,
            theta_max: PI,
        }
    }
}

impl ReflectionParams {
    pub fn ideal() -> Self {
        ReflectionParams {
            mode: ReflectionMode::Ideal,
            ..Default::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| format!("{prefix}.{name}");
        if !(self.steepness >= 0.0 && self.steepness.is_finite()) {
            return Err(Error::config(field("steepness"), "must be finite and >= 0"));
        }
        if !(self.beta_min > 0.0 && self.beta_min <= 1.0) {
            return Err(Error::config(field("beta_min"), "must lie in (0, 1]"));
        }
        if !self.phase_offset.is_finite() {
            return Err(Error::config(field("phase_offset"), "must be finite"));
        }
        // a small slack lets configs write ±3.14159265 without tripping the bound
        let bound = PI + 1e-9;
        if !(self.theta_min >= -bound && self.theta_max <= bound) {
            return Err(Error::config(field("theta_min"), "phase bounds must lie within [-pi, pi]"));
        }
        if self.theta_min > self.theta_max {
            return Err(Error::config(field("theta_min"), "theta_min exceeds theta_max"));
        }
        Ok(())
    }

    /// Amplitude response `β(θ)` of the practical model.
    ///
    /// Errors when `θ` is outside `[θ_min, θ_max]`; callers clamp first.
    pub fn amplitude(&self, theta: f64) -> Result<f64> {
        if !(theta >= self.theta_min && theta <= self.theta_max) {
            return Err(Error::Domain(format!(
                "phase {theta} outside [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        Ok(self.amplitude_unchecked(theta))
    }

    fn amplitude_unchecked(&self, theta: f64) -> f64 {
        let bracket = ((theta - self.phase_offset).sin() + 1.0) / 2.0;
        (1.0 - self.beta_min) * bracket.powf(self.steepness) + self.beta_min
    }

    pub fn clamp_phase(&self, theta: f64) -> f64 {
        theta.clamp(self.theta_min, self.theta_max)
    }

    /// Clamps a raw phase to the hardware range and merges it with its amplitude
    /// into the complex coefficient `β(θ)·e^{jθ}` (`β ≡ 1` in ideal mode).
    pub fn clamp_merge(&self, theta: f64) -> Complex64 {
        let clamped = self.clamp_phase(theta);
        let beta = match self.mode {
            ReflectionMode::Ideal => 1.0,
            ReflectionMode::Practical => self.amplitude_unchecked(clamped),
        };
        Complex64::from_polar(beta, clamped)
    }

    /// Diagonal of the reflection matrix `Θ` for one surface.
    pub fn build_reflection_matrix(&self, phases: &[f64], elements: usize) -> Result<Vec<Complex64>> {
        if phases.len() != elements {
            return Err(Error::Shape(format!(
                "{} phases supplied for a {elements}-element surface",
                phases.len()
            )));
        }
        Ok(phases.iter().map(|&t| self.clamp_merge(t)).collect())
    }
}
