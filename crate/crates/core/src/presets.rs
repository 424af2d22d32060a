//! Named filters: three Dryden-type gust models and a damped oscillator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FilterError, Result};
use crate::tf::RationalTransferFunction;

/// Horizon used by every preset.
pub const DEFAULT_HORIZON: f64 = 5.0;

/// Gain and time constants of the Dryden family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrydenParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for DrydenParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 2.0, gamma: 3.0, delta: 4.0 }
    }
}

impl DrydenParams {
    /// `α / (γs + 1)`
    pub fn first(&self) -> Result<RationalTransferFunction> {
        RationalTransferFunction::new(vec![self.alpha], vec![1.0, self.gamma])
    }

    /// `α(βs + 1) / (δs + 1)²`
    pub fn second(&self) -> Result<RationalTransferFunction> {
        let d = self.delta;
        RationalTransferFunction::new(vec![self.alpha, self.alpha * self.beta], vec![1.0, 2.0 * d, d * d])
    }

    /// `αs(βs + 1) / ((γs + 1)(δs + 1)²)`
    pub fn third(&self) -> Result<RationalTransferFunction> {
        let (g, d) = (self.gamma, self.delta);
        RationalTransferFunction::new(
            vec![0.0, self.alpha, self.alpha * self.beta],
            vec![1.0, g + 2.0 * d, 2.0 * g * d + d * d, g * d * d],
        )
    }
}

/// `gain / (θ²s² + 2ξθs + 1)`
pub fn oscillator(gain: f64, time_constant: f64, damping: f64) -> Result<RationalTransferFunction> {
    let t = time_constant;
    RationalTransferFunction::new(vec![gain], vec![1.0, 2.0 * damping * t, t * t])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Dryden1,
    Dryden2,
    Dryden3,
    Osc,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Dryden1, Preset::Dryden2, Preset::Dryden3, Preset::Osc];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Dryden1 => "dryden1",
            Preset::Dryden2 => "dryden2",
            Preset::Dryden3 => "dryden3",
            Preset::Osc => "osc",
        }
    }

    pub fn transfer_function(&self) -> RationalTransferFunction {
        let p = DrydenParams::default();
        match self {
            Preset::Dryden1 => p.first(),
            Preset::Dryden2 => p.second(),
            Preset::Dryden3 => p.third(),
            Preset::Osc => oscillator(1.0, 2.0, 0.5),
        }
        .expect("preset coefficients are valid")
    }

    pub fn horizon(&self) -> f64 {
        DEFAULT_HORIZON
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                FilterError::Parse(format!("unknown preset '{s}' (expected dryden1, dryden2, dryden3 or osc)"))
            })
    }
}
