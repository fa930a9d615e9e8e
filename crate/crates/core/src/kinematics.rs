//! Vehicle and target-point kinematics, error coordinates, and the
//! closed-loop vector field coupling vehicle, steering ODE and reference.

use std::f64::consts::PI;

use crate::error::{require, Result};
use crate::gains::GainSet;
use crate::path::{reference_derivative_with_curvature, PathSpec, ReferenceState};
use crate::steering::{curvature_ode_rhs, feedback, saturation_regime, ControlSample, Variant};

/// Vehicle pose plus its current steering curvature `v` (a state, because
/// the controller commands `ω` and `v` follows the recovery ODE).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
}

/// Target point at distance `d` ahead of the vehicle. Always derived from a
/// [`VehicleState`], never integrated in the main loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetState {
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub v_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorCoords {
    pub e_p: f64,
    pub e_q: f64,
    pub xi: f64,
    pub y1: f64,
    pub y2: f64,
}

impl ErrorCoords {
    /// Coordinates with `ψ_r = 0`, so `(y1, y2) = (e_p, e_q)`.
    pub fn aligned(y1: f64, y2: f64, xi: f64) -> Self {
        ErrorCoords { e_p: y1, e_q: y2, xi, y1, y2 }
    }
}

/// Forward speed of the vehicle as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedProfile {
    Constant(f64),
    /// `base + amplitude · sin(2π t / period)`
    Sinusoidal {
        base: f64,
        amplitude: f64,
        period: f64,
    },
}

impl SpeedProfile {
    pub fn constant(v: f64) -> Result<Self> {
        require(v.is_finite() && v > 0.0, || format!("speed must be > 0, got {v}"))?;
        Ok(SpeedProfile::Constant(v))
    }

    pub fn sinusoidal(base: f64, amplitude: f64, period: f64) -> Result<Self> {
        require(base.is_finite() && base > 0.0, || format!("base speed must be > 0, got {base}"))?;
        require(amplitude.is_finite() && amplitude.abs() < base, || {
            format!("speed amplitude {amplitude} must be smaller than base speed {base}")
        })?;
        require(period.is_finite() && period > 0.0, || format!("speed period must be > 0, got {period}"))?;
        Ok(SpeedProfile::Sinusoidal { base, amplitude, period })
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            SpeedProfile::Constant(v) => v,
            SpeedProfile::Sinusoidal { base, amplitude, period } => base + amplitude * (2.0 * PI * t / period).sin(),
        }
    }

    pub fn v_min(&self) -> f64 {
        match *self {
            SpeedProfile::Constant(v) => v,
            SpeedProfile::Sinusoidal { base, amplitude, .. } => base - amplitude.abs(),
        }
    }

    pub fn v_max(&self) -> f64 {
        match *self {
            SpeedProfile::Constant(v) => v,
            SpeedProfile::Sinusoidal { base, amplitude, .. } => base + amplitude.abs(),
        }
    }
}

fn check_geometry(d: f64, vx: f64) -> Result<()> {
    require(d > 0.0, || format!("target distance d must be > 0, got {d}"))?;
    require(vx > 0.0, || format!("vehicle speed must be > 0, got {vx}"))
}

pub fn target_from_vehicle(veh: &VehicleState, d: f64, vx: f64) -> Result<TargetState> {
    check_geometry(d, vx)?;
    let (sin, cos) = veh.psi.sin_cos();
    let dv = d * veh.v;
    Ok(TargetState {
        p: veh.x + d * cos,
        q: veh.y + d * sin,
        theta: veh.psi + dv.atan(),
        v_d: vx * (1.0 + dv * dv).sqrt(),
    })
}

/// Rates of the target position and the vehicle heading under steering
/// curvature `v`. Returns `(ṗ, q̇, ψ̇)`.
pub fn target_derivative(veh: &VehicleState, d: f64, vx: f64, v: f64) -> Result<(f64, f64, f64)> {
    check_geometry(d, vx)?;
    let (sin, cos) = veh.psi.sin_cos();
    Ok((vx * cos - d * vx * v * sin, vx * sin + d * vx * v * cos, vx * v))
}

pub fn error_coords(target: &TargetState, reference: &ReferenceState) -> ErrorCoords {
    let e_p = target.p - reference.p_r;
    let e_q = target.q - reference.q_r;
    let (sin, cos) = reference.psi_r.sin_cos();
    ErrorCoords { e_p, e_q, xi: target.theta - reference.psi_r, y1: e_p * cos + e_q * sin, y2: -e_p * sin + e_q * cos }
}

/// Curvature `ω = θ̇ / v_d` of the target-point track implied by `(v, v̇)`.
pub fn omega_from_steering(v: f64, vdot: f64, d: f64, vx: f64) -> f64 {
    let w = 1.0 + (v * d) * (v * d);
    let v_d = vx * w.sqrt();
    vx * v / v_d + d * vdot / (v_d * w)
}

/// Integrated state of one run: reference unicycle and vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldState {
    pub reference: ReferenceState,
    pub vehicle: VehicleState,
}

impl WorldState {
    pub const DIM: usize = 8;

    pub fn to_array(&self) -> [f64; 8] {
        let r = &self.reference;
        let v = &self.vehicle;
        [r.p_r, r.q_r, r.psi_r, r.s, v.x, v.y, v.psi, v.v]
    }

    pub fn from_array(a: &[f64; 8]) -> Self {
        WorldState {
            reference: ReferenceState { p_r: a[0], q_r: a[1], psi_r: a[2], s: a[3] },
            vehicle: VehicleState { x: a[4], y: a[5], psi: a[6], v: a[7] },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Additive measurement errors on the quantities the controller reads.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerturbationSample {
    pub kappa: f64,
    pub vx: f64,
}

/// Rates of the error coordinates in physical time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorRates {
    pub y1: f64,
    pub y2: f64,
    pub xi: f64,
}

/// Everything evaluated at one point of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopEval {
    /// Time derivative of the integrated state.
    pub derivative: WorldState,
    pub target: TargetState,
    pub error: ErrorCoords,
    pub control: ControlSample,
    /// Path curvature at the current arclength (unperturbed).
    pub kappa: f64,
    pub error_rates: ErrorRates,
}

/// Fixed ingredients of the closed loop.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoop<'a> {
    pub gains: &'a GainSet,
    pub path: &'a PathSpec,
    pub variant: Variant,
}

/// Smoothness class of the vector field at a state: the saturation sides
/// and the curvature piece. Within one class the field is smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub saturation: [i8; 3],
    pub segment: usize,
}

impl ClosedLoop<'_> {
    pub fn regime(&self, world: &WorldState, vx: f64) -> Result<Regime> {
        let target = target_from_vehicle(&world.vehicle, self.gains.d, vx)?;
        let error = error_coords(&target, &world.reference);
        Ok(Regime {
            saturation: saturation_regime(&error, self.gains, self.variant),
            segment: self.path.segment(world.reference.s),
        })
    }

    /// Vector field of the coupled system at vehicle speed `vx`, with the
    /// controller reading `κ` and `V_x` through `noise`.
    pub fn rhs(&self, world: &WorldState, vx: f64, noise: PerturbationSample) -> Result<ClosedLoopEval> {
        let g = self.gains;
        let d = g.d;
        let veh = &world.vehicle;
        let reference = &world.reference;

        let target = target_from_vehicle(veh, d, vx)?;
        let error = error_coords(&target, reference);
        let (u1, u2) = feedback(&error, g, self.variant);

        let vx_seen = vx + noise.vx;
        require(vx_seen > 0.0, || format!("measured vehicle speed must stay > 0, got {vx_seen}"))?;
        let w = 1.0 + (veh.v * d) * (veh.v * d);
        let v_d_seen = vx_seen * w.sqrt();
        let kappa = self.path.curvature_at(reference.s);
        let kappa_seen = kappa + noise.kappa;

        let u = v_d_seen * (1.0 + u1);
        let omega = kappa_seen * (1.0 + u1) + u2;
        let vdot = curvature_ode_rhs(veh.v, omega, d, vx_seen);

        let ref_dot = reference_derivative_with_curvature(reference, u, kappa)?;
        let (sin, cos) = veh.psi.sin_cos();
        let veh_dot = VehicleState { x: vx * cos, y: vx * sin, psi: vx * veh.v, v: vdot };

        let (p_dot, q_dot, _) = target_derivative(veh, d, vx, veh.v)?;
        let theta_dot = vx * veh.v + d * vdot / w;
        let ep_dot = p_dot - ref_dot.p_r;
        let eq_dot = q_dot - ref_dot.q_r;
        let (sr, cr) = reference.psi_r.sin_cos();
        let error_rates = ErrorRates {
            y1: ep_dot * cr + eq_dot * sr + ref_dot.psi_r * error.y2,
            y2: -ep_dot * sr + eq_dot * cr - ref_dot.psi_r * error.y1,
            xi: theta_dot - ref_dot.psi_r,
        };

        Ok(ClosedLoopEval {
            derivative: WorldState { reference: ref_dot, vehicle: veh_dot },
            target,
            error,
            control: ControlSample { u1, u2, u, omega, vdot },
            kappa,
            error_rates,
        })
    }
}

/// Convenience wrapper around [`ClosedLoop::rhs`].
pub fn closed_loop_rhs(
    world: &WorldState,
    gains: &GainSet,
    path: &PathSpec,
    vx: f64,
    variant: Variant,
    noise: PerturbationSample,
) -> Result<ClosedLoopEval> {
    ClosedLoop { gains, path, variant }.rhs(world, vx, noise)
}

/// Vehicle pose whose target point sits at the given errors from `reference`,
/// assuming zero initial steering curvature.
pub fn vehicle_from_errors(reference: &ReferenceState, e_p: f64, e_q: f64, xi: f64, d: f64) -> VehicleState {
    let psi = reference.psi_r + xi;
    VehicleState { x: reference.p_r + e_p - d * psi.cos(), y: reference.q_r + e_q - d * psi.sin(), psi, v: 0.0 }
}
