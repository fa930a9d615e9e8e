//! The followed path, described by its geodesic curvature as a function of
//! arclength, and the virtual "reference unicycle" that travels along it.
//!
//! The reference moves with forward speed `u` chosen by the controller, so
//! its arclength `s(t) = s0 + ∫u` and curvature `κ_r(t) = κ*(s(t))`.

use std::f64::consts::PI;

use crate::error::{require, Error, Result};

/// Curvature profile family.
#[derive(Debug, Clone, PartialEq)]
pub enum CurvatureProfile {
    Constant(f64),
    /// Linear interpolation between `(s, κ)` samples, sorted by `s`.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// `amplitude · sin(2π s / period)`.
    Sinusoidal {
        amplitude: f64,
        period: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    profile: CurvatureProfile,
    kappa_max: f64,
    s0: f64,
}

impl PathSpec {
    pub fn new(profile: CurvatureProfile, kappa_max: f64, s0: f64) -> Result<Self> {
        require(kappa_max.is_finite() && kappa_max >= 0.0, || {
            format!("kappa_max must be finite and >= 0, got {kappa_max}")
        })?;
        require(s0.is_finite(), || "s0 must be finite".into())?;
        let bound = |s: f64, kappa: f64| {
            if kappa.abs() > kappa_max {
                Err(Error::CurvatureBound { s, kappa, kappa_max })
            } else {
                Ok(())
            }
        };
        match &profile {
            CurvatureProfile::Constant(k) => {
                require(k.is_finite(), || "constant curvature must be finite".into())?;
                bound(s0, *k)?;
            }
            CurvatureProfile::PiecewiseLinear(samples) => {
                require(!samples.is_empty(), || "piecewise profile needs at least one sample".into())?;
                for w in samples.windows(2) {
                    require(w[1].0 > w[0].0, || {
                        format!("sample arclengths must be strictly increasing ({} then {})", w[0].0, w[1].0)
                    })?;
                }
                for &(s, k) in samples {
                    require(s.is_finite() && k.is_finite(), || "samples must be finite".into())?;
                    // linear interpolation never leaves the hull of the samples
                    bound(s, k)?;
                }
            }
            CurvatureProfile::Sinusoidal { amplitude, period } => {
                require(amplitude.is_finite(), || "amplitude must be finite".into())?;
                require(period.is_finite() && *period > 0.0, || format!("period must be > 0, got {period}"))?;
                bound(s0, amplitude.abs())?;
            }
        }
        Ok(PathSpec { profile, kappa_max, s0 })
    }

    pub fn constant(kappa: f64, kappa_max: f64) -> Result<Self> {
        Self::new(CurvatureProfile::Constant(kappa), kappa_max, 0.0)
    }

    pub fn straight() -> Self {
        PathSpec { profile: CurvatureProfile::Constant(0.0), kappa_max: 0.0, s0: 0.0 }
    }

    pub fn profile(&self) -> &CurvatureProfile {
        &self.profile
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    /// κ*(s). Outside the sample range of a piecewise profile the boundary
    /// value is held.
    pub fn curvature_at(&self, s: f64) -> f64 {
        match &self.profile {
            CurvatureProfile::Constant(k) => *k,
            CurvatureProfile::Sinusoidal { amplitude, period } => amplitude * (2.0 * PI * s / period).sin(),
            CurvatureProfile::PiecewiseLinear(samples) => interpolate_clamped(samples, s),
        }
    }

    /// Index of the curvature piece containing `s`; the profile is smooth
    /// within a piece. Always 0 for the smooth profiles.
    pub fn segment(&self, s: f64) -> usize {
        match &self.profile {
            CurvatureProfile::PiecewiseLinear(samples) => samples.partition_point(|&(si, _)| si <= s),
            _ => 0,
        }
    }
}

fn interpolate_clamped(samples: &[(f64, f64)], s: f64) -> f64 {
    let (first, last) = (samples[0], samples[samples.len() - 1]);
    if s <= first.0 {
        return first.1;
    }
    if s >= last.0 {
        return last.1;
    }
    // first index whose arclength is > s; guaranteed in 1..len
    let hi = samples.partition_point(|&(si, _)| si <= s);
    let (s_a, k_a) = samples[hi - 1];
    let (s_b, k_b) = samples[hi];
    let w = (s - s_a) / (s_b - s_a);
    k_a + w * (k_b - k_a)
}

/// Pose and arclength of the reference unicycle. `psi_r` is unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceState {
    pub p_r: f64,
    pub q_r: f64,
    pub psi_r: f64,
    pub s: f64,
}

/// Time derivative of the reference under forward speed `u`, reading the
/// curvature at the current arclength.
pub fn reference_derivative(reference: &ReferenceState, u: f64, path: &PathSpec) -> Result<ReferenceState> {
    let kappa = path.curvature_at(reference.s);
    reference_derivative_with_curvature(reference, u, kappa)
}

pub(crate) fn reference_derivative_with_curvature(
    reference: &ReferenceState,
    u: f64,
    kappa: f64,
) -> Result<ReferenceState> {
    require(u > 0.0, || format!("reference forward speed must be > 0, got {u}"))?;
    let (sin, cos) = reference.psi_r.sin_cos();
    Ok(ReferenceState { p_r: u * cos, q_r: u * sin, psi_r: u * kappa, s: u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ramp() -> PathSpec {
        PathSpec::new(CurvatureProfile::PiecewiseLinear(vec![(0.0, 0.0), (100.0, 0.02)]), 0.02, 0.0).unwrap()
    }

    #[test]
    fn constant_profile() {
        let p = PathSpec::constant(0.01, 0.02).unwrap();
        for s in [-5.0, 0.0, 17.0, 1e6] {
            assert_eq!(p.curvature_at(s), 0.01);
        }
    }

    #[test]
    fn piecewise_midpoint_and_clamp() {
        let p = ramp();
        assert_abs_diff_eq!(p.curvature_at(50.0), 0.01, epsilon = 1e-15);
        assert_eq!(p.curvature_at(150.0), 0.02);
        assert_eq!(p.curvature_at(-3.0), 0.0);
    }

    #[test]
    fn segments() {
        let p = ramp();
        assert_eq!(p.segment(-3.0), 0);
        assert_eq!(p.segment(50.0), 1);
        assert_eq!(p.segment(150.0), p.segment(1e6));
        assert_eq!(PathSpec::straight().segment(42.0), 0);
    }

    // brute-force oracle: scan every segment
    fn oracle(samples: &[(f64, f64)], s: f64) -> f64 {
        if s <= samples[0].0 {
            return samples[0].1;
        }
        for w in samples.windows(2) {
            if s >= w[0].0 && s <= w[1].0 {
                return w[0].1 + (s - w[0].0) / (w[1].0 - w[0].0) * (w[1].1 - w[0].1);
            }
        }
        samples[samples.len() - 1].1
    }

    #[test]
    fn piecewise_matches_scan_oracle() {
        let samples = vec![(0.0, 0.0), (20.0, 0.015), (35.0, -0.01), (80.0, -0.02), (100.0, 0.005)];
        let p = PathSpec::new(CurvatureProfile::PiecewiseLinear(samples.clone()), 0.02, 0.0).unwrap();
        for i in -100..=1200 {
            let s = i as f64 * 0.1;
            assert_abs_diff_eq!(p.curvature_at(s), oracle(&samples, s), epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_samples_above_bound() {
        let e = PathSpec::new(CurvatureProfile::PiecewiseLinear(vec![(0.0, 0.0), (10.0, 0.03)]), 0.02, 0.0);
        assert!(matches!(e, Err(Error::CurvatureBound { .. })));
        let e = PathSpec::new(CurvatureProfile::Sinusoidal { amplitude: 0.03, period: 100.0 }, 0.02, 0.0);
        assert!(e.is_err());
        let e = PathSpec::new(CurvatureProfile::PiecewiseLinear(vec![(0.0, 0.0), (0.0, 0.01)]), 0.02, 0.0);
        assert!(e.is_err());
    }

    #[test]
    fn derivative_examples() {
        let r = ReferenceState::default();
        let d = reference_derivative(&r, 1.0, &PathSpec::straight()).unwrap();
        assert_eq!((d.p_r, d.q_r, d.psi_r, d.s), (1.0, 0.0, 0.0, 1.0));

        let r = ReferenceState { psi_r: std::f64::consts::FRAC_PI_2, ..Default::default() };
        let p = PathSpec::constant(0.01, 0.02).unwrap();
        let d = reference_derivative(&r, 2.0, &p).unwrap();
        assert_abs_diff_eq!(d.p_r, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.q_r, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.psi_r, 0.02, epsilon = 1e-15);
        assert_eq!(d.s, 2.0);

        assert!(reference_derivative(&r, -1.0, &p).is_err());
        assert!(reference_derivative(&r, 0.0, &p).is_err());
    }

    /// Integrate with u≡1 using small explicit midpoint steps and check the
    /// finite-differenced heading rate against the direct substitution.
    #[test]
    fn derivative_matches_finite_difference_of_trajectory() {
        let p = PathSpec::constant(0.01, 0.02).unwrap();
        let h = 1e-4;
        let mut r = ReferenceState { psi_r: std::f64::consts::FRAC_PI_2, ..Default::default() };
        let u = 2.0;
        let start = r;
        for _ in 0..10 {
            let k1 = reference_derivative(&r, u, &p).unwrap();
            let mid = ReferenceState {
                p_r: r.p_r + 0.5 * h * k1.p_r,
                q_r: r.q_r + 0.5 * h * k1.q_r,
                psi_r: r.psi_r + 0.5 * h * k1.psi_r,
                s: r.s + 0.5 * h * k1.s,
            };
            let k2 = reference_derivative(&mid, u, &p).unwrap();
            r.p_r += h * k2.p_r;
            r.q_r += h * k2.q_r;
            r.psi_r += h * k2.psi_r;
            r.s += h * k2.s;
        }
        let dt = 10.0 * h;
        assert_abs_diff_eq!((r.q_r - start.q_r) / dt, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!((r.psi_r - start.psi_r) / dt, 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!((r.s - start.s) / dt, 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn sinusoid_respects_bound(amp in -0.05f64..0.05, period in 1.0f64..1000.0, s in -1e4f64..1e4) {
            let kmax = 0.05;
            let p = PathSpec::new(CurvatureProfile::Sinusoidal { amplitude: amp, period }, kmax, 0.0).unwrap();
            prop_assert!(p.curvature_at(s).abs() <= kmax);
        }

        #[test]
        fn piecewise_is_continuous(s in 0.0f64..100.0) {
            let p = ramp();
            let eps = 1e-9;
            prop_assert!((p.curvature_at(s + eps) - p.curvature_at(s - eps)).abs() < 1e-9);
        }
    }
}
