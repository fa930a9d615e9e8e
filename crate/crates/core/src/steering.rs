//! Saturated feedback laws and the steering-curvature recovery ODE.
//!
//! The controller produces a pair `(u1, u2)`. The reference speed is
//! `u = v_d (1 + u1)` and the target-point curvature command is
//! `ω = κ_r (1 + u1) + u2`. The vehicle cannot apply `ω` directly; its
//! steering curvature `v` follows the ODE returned by [`curvature_ode_rhs`].

use crate::error::{require, Result};
use crate::gains::GainSet;
use crate::kinematics::ErrorCoords;

/// Unit saturation `x / max(1, |x|)`.
#[inline]
pub fn saturate(x: f64) -> f64 {
    x / x.abs().max(1.0)
}

/// Which law to use for `u2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `u2 = β σ(−(C0/β)[ξ + ρ σ(C2 y2)])`
    #[default]
    Saturated,
    /// `u2 = −C0 [ξ + ρ σ(C2 y2)]`, no outer saturation.
    Unsaturated,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Saturated => "saturated",
            Variant::Unsaturated => "unsaturated",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "saturated" => Ok(Variant::Saturated),
            "unsaturated" => Ok(Variant::Unsaturated),
            other => Err(format!("unknown controller variant '{other}' (expected saturated or unsaturated)")),
        }
    }
}

/// Everything the controller computed at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlSample {
    pub u1: f64,
    pub u2: f64,
    /// Reference forward speed, m/s.
    pub u: f64,
    /// Target-point curvature command, 1/m.
    pub omega: f64,
    /// Steering-curvature rate, 1/(m·s).
    pub vdot: f64,
}

/// Argument of the outer saturation in the saturated `u2` law,
/// `−(C0/β)[ξ + ρ σ(C2 y2)]`. Its magnitude tells whether that saturation is
/// active.
pub fn heading_drive(xi: f64, y2: f64, g: &GainSet) -> f64 {
    -(g.c0 / g.beta) * (xi + g.rho * saturate(g.c2 * y2))
}

/// `(u1, u2)` for the given error coordinates.
pub fn feedback(err: &ErrorCoords, g: &GainSet, variant: Variant) -> (f64, f64) {
    let u1 = g.c1 * saturate(g.m * err.y1);
    let u2 = match variant {
        Variant::Saturated => g.beta * saturate(heading_drive(err.xi, err.y2, g)),
        Variant::Unsaturated => -g.c0 * (err.xi + g.rho * saturate(g.c2 * err.y2)),
    };
    (u1, u2)
}

/// Which side of the linear zone each saturation argument lies on
/// (`-1`, `0` or `1`), in the order `M y1`, `C2 y2`, outer `u2` argument.
/// The feedback is smooth while this stays constant.
pub fn saturation_regime(err: &ErrorCoords, g: &GainSet, variant: Variant) -> [i8; 3] {
    let band = |x: f64| {
        if x > 1.0 {
            1
        } else if x < -1.0 {
            -1
        } else {
            0
        }
    };
    let outer = match variant {
        Variant::Saturated => band(heading_drive(err.xi, err.y2, g)),
        Variant::Unsaturated => 0,
    };
    [band(g.m * err.y1), band(g.c2 * err.y2), outer]
}

/// `β_M = (1 − d κ_max) / d`.
pub fn beta_m(d: f64, kappa_max: f64) -> f64 {
    (1.0 - d * kappa_max) / d
}

/// Non-explosion budget check `|u1|/d + |u2| ≤ β_M`.
pub fn budget_guard(u1: f64, u2: f64, d: f64, kappa_max: f64) -> Result<bool> {
    require(d > 0.0, || format!("d must be > 0, got {d}"))?;
    require(d * kappa_max < 1.0, || format!("d*kappa_max must be < 1, got {}", d * kappa_max))?;
    let budget = beta_m(d, kappa_max);
    let used = u1.abs() / d + u2.abs();
    // a hair of slack so the exact Cond0 boundary is accepted
    Ok(used <= budget * (1.0 + 1e-12))
}

/// `v̇ = ((1 + (vd)²)/d) V_x (√(1 + (vd)²) ω − v)`.
pub fn curvature_ode_rhs(v: f64, omega: f64, d: f64, vx: f64) -> f64 {
    let w = 1.0 + (v * d) * (v * d);
    (w / d) * vx * (w.sqrt() * omega - v)
}

/// Fixed point of [`curvature_ode_rhs`] for a constant `ω` with `|dω| < 1`.
pub fn curvature_fixed_point(omega: f64, d: f64) -> Option<f64> {
    let dw = d * omega;
    (dw.abs() < 1.0).then(|| omega / (1.0 - dw * dw).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::GainSet;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn baseline_gains() -> GainSet {
        GainSet::baseline()
    }

    #[test]
    fn regime_sides() {
        let g = baseline_gains();
        let e = |y1, y2, xi| crate::kinematics::ErrorCoords::aligned(y1, y2, xi);
        assert_eq!(saturation_regime(&e(0.0, 0.0, 0.0), &g, Variant::Saturated), [0, 0, 0]);
        assert_eq!(saturation_regime(&e(1.0, -2.0, 0.0), &g, Variant::Saturated), [1, -1, 0]);
        // -(0.4/0.96)(3 + 0.2) < -1
        assert_eq!(saturation_regime(&e(-1.0, 0.5, 3.0), &g, Variant::Saturated), [-1, 0, -1]);
        assert_eq!(saturation_regime(&e(-1.0, 0.5, 3.0), &g, Variant::Unsaturated), [-1, 0, 0]);
    }

    fn err(y1: f64, y2: f64, xi: f64) -> ErrorCoords {
        ErrorCoords { e_p: y1, e_q: y2, xi, y1, y2 }
    }

    #[test]
    fn saturation_values() {
        assert_eq!(saturate(0.5), 0.5);
        assert_eq!(saturate(2.0), 1.0);
        assert_eq!(saturate(-3.0), -1.0);
        assert_eq!(saturate(0.0), 0.0);
    }

    #[test]
    fn feedback_at_origin_is_zero() {
        for v in [Variant::Saturated, Variant::Unsaturated] {
            let (u1, u2) = feedback(&err(0.0, 0.0, 0.0), &baseline_gains(), v);
            assert_eq!(u1, 0.0);
            assert_eq!(u2, 0.0);
        }
    }

    #[test]
    fn feedback_baseline_initial_errors() {
        let g = baseline_gains();
        let (u1, _) = feedback(&err(10.0, 0.0, 0.0), &g, Variant::Saturated);
        assert_eq!(u1, 0.7);

        // hand evaluation: −(0.4/0.96)(9π/10 + 0.2) = −1.26143...
        let xi = 9.0 * PI / 10.0;
        let inner = -(0.4 / 0.96) * (xi + 0.2);
        assert_abs_diff_eq!(inner, -1.2614, epsilon = 1e-4);
        assert_abs_diff_eq!(heading_drive(xi, 10.0, &g), inner, epsilon = 1e-15);
        let (_, u2) = feedback(&err(10.0, 10.0, xi), &g, Variant::Saturated);
        assert_eq!(u2, -0.96);
        let (_, u2) = feedback(&err(10.0, 10.0, xi), &g, Variant::Unsaturated);
        assert_abs_diff_eq!(u2, -0.4 * (xi + 0.2), epsilon = 1e-15);
    }

    #[test]
    fn guard_examples() {
        assert_abs_diff_eq!(beta_m(2.0, 0.02), 0.48, epsilon = 1e-15);
        assert!(budget_guard(0.0, 0.0, 2.0, 0.02).unwrap());
        assert!(!budget_guard(0.7, 0.96, 2.0, 0.02).unwrap());
        assert!(budget_guard(0.3, 0.2, 2.0, 0.02).unwrap());
        assert!(budget_guard(0.0, 0.0, 2.0, 0.5).is_err());
        assert!(budget_guard(0.0, 0.0, 0.0, 0.02).is_err());
    }

    #[test]
    fn curvature_ode_examples() {
        assert_eq!(curvature_ode_rhs(0.0, 0.0, 2.0, 15.0), 0.0);
        assert_abs_diff_eq!(curvature_ode_rhs(0.0, 0.1, 2.0, 15.0), 0.75, epsilon = 1e-15);
        for omega in [-0.45, -0.1, 0.0, 0.2, 0.49] {
            let v = curvature_fixed_point(omega, 2.0).unwrap();
            assert_abs_diff_eq!(curvature_ode_rhs(v, omega, 2.0, 15.0), 0.0, epsilon = 1e-12);
        }
        assert!(curvature_fixed_point(0.5, 2.0).is_none());
    }

    proptest! {
        #[test]
        fn saturate_is_odd_and_lipschitz(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            prop_assert_eq!(saturate(-a), -saturate(a));
            prop_assert!((saturate(a) - saturate(b)).abs() <= (a - b).abs() + 1e-15);
            prop_assert!(saturate(a).abs() <= 1.0);
        }

        #[test]
        fn v_squared_decays_when_v_omega_nonpositive(
            v in -5.0f64..5.0, omega in -5.0f64..5.0, d in 0.1f64..5.0, vx in 0.1f64..40.0,
        ) {
            prop_assume!(v * omega <= 0.0);
            prop_assert!(v * curvature_ode_rhs(v, omega, d, vx) <= 0.0);
        }

        #[test]
        fn saturated_outputs_bounded(y1 in -1e3f64..1e3, y2 in -1e3f64..1e3, xi in -10.0f64..10.0) {
            let g = baseline_gains();
            let (u1, u2) = feedback(&err(y1, y2, xi), &g, Variant::Saturated);
            prop_assert!(u1.abs() <= g.c1);
            prop_assert!(u2.abs() <= g.beta);
        }

        #[test]
        fn variants_agree_inside_linear_zone(y2 in -50.0f64..50.0, xi in -3.0f64..3.0) {
            let g = baseline_gains();
            prop_assume!(heading_drive(xi, y2, &g).abs() <= 1.0);
            let e = err(1.0, y2, xi);
            let (_, a) = feedback(&e, &g, Variant::Saturated);
            let (_, b) = feedback(&e, &g, Variant::Unsaturated);
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }
}
