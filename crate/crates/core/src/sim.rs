//! Fixed-step RK4 integration of the closed loop and per-run bookkeeping.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gains::{check_conditions, ConditionReport};
use crate::kinematics::{ClosedLoop, ClosedLoopEval, PerturbationSample, SpeedProfile, WorldState};
use crate::log::{LogRecord, TrajectoryLog};
use crate::lyapunov::{detect_t0, lyapunov_rate, lyapunov_value};
use crate::noise::NoiseSource;
use crate::scenario::Scenario;
use crate::steering::{budget_guard, Variant};

/// Convergence band used for `t_conv`.
pub const CONV_POSITION: f64 = 0.5;
pub const CONV_HEADING: f64 = 0.05;

/// Classical fourth-order Runge–Kutta step for a fixed-size state.
pub fn rk4<const N: usize>(
    y: &[f64; N],
    t: f64,
    h: f64,
    mut f: impl FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
) -> Result<[f64; N]> {
    let axpy = |a: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *a;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += s * ki;
        }
        out
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &axpy(y, &k2, 0.5 * h))?;
    let k4 = f(t + h, &axpy(y, &k3, h))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Regime switches located inside one step before the rest of the step is
/// taken without splitting.
const MAX_SPLITS: usize = 4;
const BISECTIONS: usize = 52;

/// One integration step from `t`. The noise sample is held over the step.
///
/// When a saturation or curvature piece switches within the step, the
/// switching instant is found by bisection and the step is split there, so
/// every RK4 sub-step integrates a smooth vector field.
pub fn step(
    world: &WorldState,
    lp: &ClosedLoop<'_>,
    speed: &SpeedProfile,
    noise: PerturbationSample,
    t: f64,
    dt: f64,
) -> Result<WorldState> {
    let f = |tau: f64, y: &[f64; 8]| {
        let w = WorldState::from_array(y);
        Ok(lp.rhs(&w, speed.at(tau), noise)?.derivative.to_array())
    };
    let regime = |tau: f64, y: &[f64; 8]| lp.regime(&WorldState::from_array(y), speed.at(tau));
    let end = t + dt;
    let mut t_cur = t;
    let mut h = dt;
    let mut y = world.to_array();
    for split in 0..=MAX_SPLITS {
        let full = rk4(&y, t_cur, h, f)?;
        let r0 = regime(t_cur, &y)?;
        if split == MAX_SPLITS || !WorldState::from_array(&full).is_finite() || regime(end, &full)? == r0 {
            y = full;
            break;
        }
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if regime(t_cur + mid, &rk4(&y, t_cur, mid, f)?)? == r0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if hi >= h {
            y = full;
            break;
        }
        y = rk4(&y, t_cur, hi, f)?;
        t_cur += hi;
        h -= hi;
    }
    let next = WorldState::from_array(&y);
    if !next.is_finite() {
        return Err(Error::NumericalAbort { t: end, reason: format!("non-finite state from {world:?}") });
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    /// First time after which `‖(e_p, e_q)‖ < 0.5` and `|ξ| < 0.05` hold to
    /// the end of the run.
    pub t_conv: Option<f64>,
    /// Start of the in-basin phase `|ξ| < 2ρ`.
    pub t0: Option<f64>,
    pub max_abs_d_omega: f64,
    pub max_abs_v: f64,
    pub min_v_d: f64,
    /// Steps where `|u1|/d + |u2| ≤ β_M` failed.
    pub budget_violations: usize,
    /// Steps with `|d ω| > 1`.
    pub d_omega_excursions: usize,
    pub gains_pass: bool,
    pub gain_failures: Vec<&'static str>,
    pub final_error_norm: f64,
}

impl RunSummary {
    pub fn lines(&self) -> Vec<(String, String)> {
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.6}"));
        vec![
            ("summary.steps".into(), self.steps.to_string()),
            ("summary.t_conv".into(), opt(self.t_conv)),
            ("summary.t0".into(), opt(self.t0)),
            ("summary.max_abs_d_omega".into(), format!("{:.9}", self.max_abs_d_omega)),
            ("summary.max_abs_v".into(), format!("{:.9}", self.max_abs_v)),
            ("summary.min_v_d".into(), format!("{:.9}", self.min_v_d)),
            ("summary.budget_violations".into(), self.budget_violations.to_string()),
            ("summary.d_omega_excursions".into(), self.d_omega_excursions.to_string()),
            ("summary.final_error_norm".into(), format!("{:.9e}", self.final_error_norm)),
            ("gains.verdict".into(), if self.gains_pass { "pass".into() } else { "fail".into() }),
            (
                "gains.failures".into(),
                if self.gain_failures.is_empty() { "none".into() } else { self.gain_failures.join(",") },
            ),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: TrajectoryLog,
    pub summary: RunSummary,
    pub report: ConditionReport,
}

fn record(t: f64, w: &WorldState, ev: &ClosedLoopEval, sc: &Scenario) -> LogRecord {
    let g = &sc.gains;
    let e = &ev.error;
    let r = &w.reference;
    let veh = &w.vehicle;
    let lyap = lyapunov_value(e.y1, e.y2, e.xi, g);
    let vdot = lyapunov_rate(e, &ev.error_rates, g) / ev.target.v_d;
    LogRecord {
        t,
        x: veh.x,
        y: veh.y,
        psi: veh.psi,
        v: veh.v,
        p: ev.target.p,
        q: ev.target.q,
        theta: ev.target.theta,
        p_r: r.p_r,
        q_r: r.q_r,
        psi_r: r.psi_r,
        s: r.s,
        e_p: e.e_p,
        e_q: e.e_q,
        xi: e.xi,
        y1: e.y1,
        y2: e.y2,
        u1: ev.control.u1,
        u2: ev.control.u2,
        u: ev.control.u,
        omega: ev.control.omega,
        v_d: ev.target.v_d,
        lyap,
        vdot,
    }
}

/// First time from which the convergence band holds through the last sample.
pub fn convergence_time(records: &[LogRecord]) -> Option<f64> {
    let inside = |r: &LogRecord| (r.e_p * r.e_p + r.e_q * r.e_q).sqrt() < CONV_POSITION && r.xi.abs() < CONV_HEADING;
    match records.iter().rposition(|r| !inside(r)) {
        None => records.first().map(|r| r.t),
        Some(k) if k + 1 < records.len() => Some(records[k + 1].t),
        Some(_) => None,
    }
}

/// Simulates a scenario, logging every step including t = 0.
pub fn run(sc: &Scenario) -> Result<RunOutput> {
    sc.validate()?;
    let report = check_conditions(&sc.gains)?;
    let guard_asserted = sc.variant == Variant::Saturated && report.cond0();
    let lp = ClosedLoop { gains: &sc.gains, path: &sc.path, variant: sc.variant };
    let mut noise = NoiseSource::new(sc.noise, sc.seed);
    let steps = sc.steps();
    let d = sc.gains.d;

    let mut records = Vec::with_capacity(steps + 1);
    let mut world = sc.initial_world();
    let mut budget_violations = 0;
    let mut d_omega_excursions = 0;
    let mut max_abs_d_omega: f64 = 0.0;
    let mut max_abs_v: f64 = 0.0;
    let mut min_v_d = f64::INFINITY;

    for k in 0..=steps {
        let t = k as f64 * sc.dt;
        let sample = noise.sample(t);
        let ev = lp.rhs(&world, sc.speed.at(t), sample).map_err(|e| abort(t, e))?;
        let rec = record(t, &world, &ev, sc);
        if !rec.to_array().iter().all(|x| x.is_finite()) {
            return Err(Error::NumericalAbort { t, reason: format!("non-finite log entry at state {world:?}") });
        }

        let dw = (d * ev.control.omega).abs();
        max_abs_d_omega = max_abs_d_omega.max(dw);
        if dw > 1.0 {
            d_omega_excursions += 1;
        }
        max_abs_v = max_abs_v.max(world.vehicle.v.abs());
        min_v_d = min_v_d.min(ev.target.v_d);
        if report.condition("H1") == Some(true) && !budget_guard(ev.control.u1, ev.control.u2, d, sc.gains.kappa_max)? {
            if guard_asserted {
                return Err(Error::NumericalAbort {
                    t,
                    reason: format!(
                        "non-explosion budget exceeded with Cond0 gains: u1={}, u2={}",
                        ev.control.u1, ev.control.u2
                    ),
                });
            }
            budget_violations += 1;
        }
        records.push(rec);

        if k < steps {
            world = step(&world, &lp, &sc.speed, sample, t, sc.dt).map_err(|e| abort(t, e))?;
        }
    }

    let xi: Vec<f64> = records.iter().map(|r| r.xi).collect();
    let t0 = detect_t0(&xi, sc.gains.rho).map(|k| records[k].t);
    let summary = RunSummary {
        steps,
        dt: sc.dt,
        t_conv: convergence_time(&records),
        t0,
        max_abs_d_omega,
        max_abs_v,
        min_v_d,
        budget_violations,
        d_omega_excursions,
        gains_pass: report.passed(),
        gain_failures: report.failures(),
        final_error_norm: records.last().map_or(0.0, LogRecord::error_norm),
    };

    let g = &sc.gains;
    let mut meta: Vec<(String, String)> = vec![
        ("dt".into(), sc.dt.to_string()),
        ("duration".into(), sc.duration.to_string()),
        ("seed".into(), sc.seed.to_string()),
        ("controller.variant".into(), sc.variant.as_str().into()),
        ("vehicle.d".into(), g.d.to_string()),
        ("path.kappa_max".into(), g.kappa_max.to_string()),
    ];
    for (k, v) in [
        ("gains.c0", g.c0),
        ("gains.c1", g.c1),
        ("gains.c2", g.c2),
        ("gains.m", g.m),
        ("gains.n", g.n),
        ("gains.beta", g.beta),
        ("gains.rho", g.rho),
    ] {
        meta.push((k.into(), v.to_string()));
    }
    meta.extend(summary.lines());
    meta.push(("end".into(), "true".into()));

    Ok(RunOutput { log: TrajectoryLog { dt: sc.dt, records, meta }, summary, report })
}

fn abort(t: f64, e: Error) -> Error {
    match e {
        Error::NumericalAbort { .. } => e,
        other => Error::NumericalAbort { t, reason: other.to_string() },
    }
}

/// Runs independent scenarios in parallel; results keep the input order.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<RunOutput>> {
    scenarios.par_iter().map(run).collect()
}
