//! Bounded measurement noise on the path curvature and the vehicle speed, as
//! seen by the controller. The plant always integrates the true values.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{require, Result};
use crate::kinematics::PerturbationSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbationKind {
    #[default]
    None,
    /// Independent uniform draws in `[-amp, amp]`, one per step.
    Uniform,
    /// `amp · sin(2π f t)` on κ and `amp · cos(2π f t)` on `V_x`.
    Sinusoidal,
}

impl std::str::FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(PerturbationKind::None),
            "uniform" => Ok(PerturbationKind::Uniform),
            "sinusoidal" => Ok(PerturbationKind::Sinusoidal),
            other => Err(format!("unknown noise kind '{other}' (expected none, uniform or sinusoidal)")),
        }
    }
}

impl PerturbationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::Uniform => "uniform",
            PerturbationKind::Sinusoidal => "sinusoidal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub kappa_amp: f64,
    pub vx_amp: f64,
    /// Hz; used by the sinusoidal kind only.
    pub frequency: f64,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// `v_min` is the smallest true vehicle speed; the measured speed must
    /// stay positive.
    pub fn validate(&self, v_min: f64) -> Result<()> {
        require(self.kappa_amp.is_finite() && self.kappa_amp >= 0.0, || {
            format!("noise.kappa_amp must be >= 0, got {}", self.kappa_amp)
        })?;
        require(self.vx_amp.is_finite() && self.vx_amp >= 0.0, || {
            format!("noise.vx_amp must be >= 0, got {}", self.vx_amp)
        })?;
        require(self.vx_amp < v_min, || {
            format!("noise.vx_amp = {} must be below the minimum speed {v_min}", self.vx_amp)
        })?;
        require(self.frequency.is_finite() && self.frequency >= 0.0, || {
            format!("noise.frequency must be >= 0, got {}", self.frequency)
        })
    }
}

/// Seeded noise generator for one run.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    spec: PerturbationSpec,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(spec: PerturbationSpec, seed: u64) -> Self {
        NoiseSource { spec, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Offsets for the step starting at `t`.
    pub fn sample(&mut self, t: f64) -> PerturbationSample {
        let s = &self.spec;
        match s.kind {
            PerturbationKind::None => PerturbationSample::default(),
            PerturbationKind::Uniform => {
                // both draws every step so each channel's sequence is
                // independent of the other's amplitude
                let a: f64 = self.rng.gen_range(-1.0..=1.0);
                let b: f64 = self.rng.gen_range(-1.0..=1.0);
                PerturbationSample { kappa: s.kappa_amp * a, vx: s.vx_amp * b }
            }
            PerturbationKind::Sinusoidal => {
                let phase = 2.0 * PI * s.frequency * t;
                PerturbationSample { kappa: s.kappa_amp * phase.sin(), vx: s.vx_amp * phase.cos() }
            }
        }
    }
}

/// Measured `(κ, V_x)` for the true values at time `t`.
pub fn perturb(kappa: f64, vx: f64, t: f64, source: &mut NoiseSource) -> (f64, f64) {
    let n = source.sample(t);
    (kappa + n.kappa, vx + n.vx)
}
