//! Strict Lyapunov function for the error system once `|ξ| < 2ρ`, its lower
//! bounding forms, and post-hoc verification along logged trajectories.
//!
//! ```text
//! V(y1, y2, ξ) = (y1² + y2²)/2 + F(ξ) y2 / C0 + N ξ² / (2 C0)
//! F(ξ)         = ∫₀^ξ sin(s)/s ds
//! ```

use std::sync::OnceLock;

use crate::error::{require, Error, Result};
use crate::gains::GainSet;
use crate::kinematics::{ErrorCoords, ErrorRates};
use crate::log::TrajectoryLog;
use crate::steering::{heading_drive, saturate};

/// `sin(x)/x`, with the removable singularity filled in.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

const QUAD_TOL: f64 = 1e-12;

/// `F(ξ)` by adaptive Simpson quadrature to an absolute tolerance of 1e-12.
pub fn sine_integral_quadrature(xi: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    if xi < 0.0 {
        return -sine_integral_quadrature(-xi);
    }
    // split long ranges so the recursion depth stays modest
    let pieces = (xi / 2.0).ceil().max(1.0) as usize;
    let h = xi / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let (fa, fm, fb) = (sinc(a), sinc(0.5 * (a + b)), sinc(b));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(a, b, fa, fm, fb, whole, QUAD_TOL / pieces as f64, 48)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (sinc(lm), sinc(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const TABLE_HALF_WIDTH: f64 = 2.0;
const TABLE_STEP: f64 = 1.0 / 512.0;

struct SineIntegralTable {
    values: Vec<f64>,
}

impl SineIntegralTable {
    fn build() -> Self {
        let n = (2.0 * TABLE_HALF_WIDTH / TABLE_STEP).round() as usize;
        let mut values = Vec::with_capacity(n + 1);
        // accumulate panel by panel from -2 so the table is internally consistent
        let mut acc = -sine_integral_quadrature(TABLE_HALF_WIDTH);
        values.push(acc);
        for i in 0..n {
            let a = -TABLE_HALF_WIDTH + i as f64 * TABLE_STEP;
            let b = a + TABLE_STEP;
            let (fa, fm, fb) = (sinc(a), sinc(0.5 * (a + b)), sinc(b));
            let whole = TABLE_STEP / 6.0 * (fa + 4.0 * fm + fb);
            acc += simpson(a, b, fa, fm, fb, whole, QUAD_TOL * 1e-3, 32);
            values.push(acc);
        }
        // re-anchor the centre exactly at zero
        let mid = values[n / 2];
        for v in &mut values {
            *v -= mid;
        }
        SineIntegralTable { values }
    }

    /// Cubic Hermite interpolation using the exact derivative `sinc`.
    fn eval(&self, xi: f64) -> f64 {
        let pos = (xi + TABLE_HALF_WIDTH) / TABLE_STEP;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - i as f64;
        let x0 = -TABLE_HALF_WIDTH + i as f64 * TABLE_STEP;
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (sinc(x0) * TABLE_STEP, sinc(x0 + TABLE_STEP) * TABLE_STEP);
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * d1
    }
}

fn table() -> &'static SineIntegralTable {
    static TABLE: OnceLock<SineIntegralTable> = OnceLock::new();
    TABLE.get_or_init(SineIntegralTable::build)
}

/// `F(ξ)`: tabulated on [-2, 2], direct quadrature outside.
pub fn sine_integral(xi: f64) -> f64 {
    if xi == 0.0 {
        0.0
    } else if xi.abs() <= TABLE_HALF_WIDTH {
        // the table is antisymmetric to rounding; enforce oddness exactly
        let v = table().eval(xi.abs());
        v.copysign(xi)
    } else {
        sine_integral_quadrature(xi)
    }
}

fn check_positive_definite(g: &GainSet) -> Result<()> {
    require(g.n_excess() > 0.0, || {
        format!("V needs N > 1/C0 to be positive definite (N = {}, 1/C0 = {})", g.n, 1.0 / g.c0)
    })
}

/// `V` without the `N > 1/C0` check; for hot loops after validation.
pub fn lyapunov_value(y1: f64, y2: f64, xi: f64, g: &GainSet) -> f64 {
    0.5 * (y1 * y1 + y2 * y2) + sine_integral(xi) * y2 / g.c0 + g.n * xi * xi / (2.0 * g.c0)
}

pub fn lyapunov(err: &ErrorCoords, g: &GainSet) -> Result<f64> {
    check_positive_definite(g)?;
    Ok(lyapunov_value(err.y1, err.y2, err.xi, g))
}

/// `∇V · (ẏ1, ẏ2, ξ̇)` for whatever time scale the rates are in.
pub fn lyapunov_rate(err: &ErrorCoords, rates: &ErrorRates, g: &GainSet) -> f64 {
    let dv_dy1 = err.y1;
    let dv_dy2 = err.y2 + sine_integral(err.xi) / g.c0;
    let dv_dxi = sinc(err.xi) * err.y2 / g.c0 + g.n * err.xi / g.c0;
    dv_dy1 * rates.y1 + dv_dy2 * rates.y2 + dv_dxi * rates.xi
}

/// `V̇` in rescaled time along the model error dynamics with the applied
/// `(u1, u2)` and `λ = (1 + u1) κ_r`.
pub fn lyapunov_rate_model(err: &ErrorCoords, u1: f64, u2: f64, lambda: f64, g: &GainSet) -> f64 {
    let rates =
        ErrorRates { y1: -u1 + (err.xi.cos() - 1.0) + lambda * err.y2, y2: err.xi.sin() - lambda * err.y1, xi: u2 };
    lyapunov_rate(err, &rates, g)
}

fn check_basin(xi: f64, g: &GainSet) -> Result<()> {
    require(xi.abs() < 2.0 * g.rho, || format!("bound defined only for |xi| < 2*rho = {}, got xi = {xi}", 2.0 * g.rho))
}

/// Lower bound `A(y1, ξ)` on the y1-part of `−V̇`.
pub fn a_bound(y1: f64, xi: f64, g: &GainSet) -> Result<f64> {
    check_basin(xi, g)?;
    Ok(a_bound_unchecked(y1, xi, g))
}

fn a_bound_unchecked(y1: f64, xi: f64, g: &GainSet) -> f64 {
    g.c1 * y1 * saturate(g.m * y1) - ((3.0 + g.c1) * g.kappa_max / g.c0) * (xi * y1).abs() - 0.5 * xi * xi * y1.abs()
        + 0.5 * g.n_excess() * xi * xi
}

/// Lower bound `B(y2, ξ)` on the y2-part of `−V̇`.
pub fn b_bound(y2: f64, xi: f64, g: &GainSet) -> Result<f64> {
    check_basin(xi, g)?;
    Ok(b_bound_unchecked(y2, xi, g))
}

fn b_bound_unchecked(y2: f64, xi: f64, g: &GainSet) -> f64 {
    let s = saturate(g.c2 * y2);
    0.5 * g.n_excess() * xi * xi - g.rho * g.n * (xi * s).abs() + (1.0 - 2.0 * g.rho * g.rho / 3.0) * g.rho * y2 * s
}

/// Quadratic form `D(z, ξ)` whose positivity implies that of `B`.
pub fn d_form(z: f64, xi: f64, g: &GainSet) -> f64 {
    (1.0 - 2.0 * g.rho * g.rho / 3.0) * z * z - g.c2 * g.n * (xi * z).abs() + (g.c2 / g.rho) * g.n_excess() * xi * xi
}

/// `B` split as `ρ(1 − 2ρ²/3)(y2 − σ/C2)σ + (ρ/C2) D(σ, ξ) − (N − 1/C0)ξ²/2`
/// with `σ = σ(C2 y2)`. The first term is non-negative everywhere.
pub fn b_decomposition(y2: f64, xi: f64, g: &GainSet) -> (f64, f64, f64) {
    let s = saturate(g.c2 * y2);
    let outer = g.rho * (1.0 - 2.0 * g.rho * g.rho / 3.0) * (y2 - s / g.c2) * s;
    (outer, g.rho / g.c2 * d_form(s, xi, g), -0.5 * g.n_excess() * xi * xi)
}

/// Result of sweeping `A` and `B` over a rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub points_y: usize,
    pub points_xi: usize,
    pub y_range: f64,
    pub min_a: f64,
    pub min_a_at: (f64, f64),
    pub min_b: f64,
    pub min_b_at: (f64, f64),
    /// Grid points with a value below `-tol`.
    pub negative_a: usize,
    pub negative_b: usize,
    /// Grid points other than the origin with `|value| ≤ tol`.
    pub zero_off_origin_a: usize,
    pub zero_off_origin_b: usize,
    pub tol: f64,
}

impl GridReport {
    pub fn positive_definite(&self) -> bool {
        self.negative_a == 0 && self.negative_b == 0 && self.zero_off_origin_a == 0 && self.zero_off_origin_b == 0
    }
}

/// Sweeps `A(y1, ξ)` and `B(y2, ξ)` with `y ∈ [-y_range, y_range]` (inclusive,
/// `points_y` values) and `ξ` at the cell centres of `]-2ρ, 2ρ[` split into
/// `points_xi` cells. Odd counts put a sample exactly on zero in both axes.
pub fn positivity_grid(g: &GainSet, points_y: usize, points_xi: usize, y_range: f64, tol: f64) -> Result<GridReport> {
    g.validate()?;
    check_positive_definite(g)?;
    require(points_y >= 2 && points_xi >= 1, || "grid needs at least 2 x 1 points".into())?;
    require(y_range > 0.0, || "y range must be positive".into())?;
    let ys: Vec<f64> = (0..points_y).map(|i| -y_range + 2.0 * y_range * i as f64 / (points_y - 1) as f64).collect();
    let two_rho = 2.0 * g.rho;
    let xis: Vec<f64> =
        (0..points_xi).map(|j| -two_rho + 2.0 * two_rho * (j as f64 + 0.5) / points_xi as f64).collect();

    let mut rep = GridReport {
        points_y,
        points_xi,
        y_range,
        min_a: f64::INFINITY,
        min_a_at: (0.0, 0.0),
        min_b: f64::INFINITY,
        min_b_at: (0.0, 0.0),
        negative_a: 0,
        negative_b: 0,
        zero_off_origin_a: 0,
        zero_off_origin_b: 0,
        tol,
    };
    for &y in &ys {
        for &xi in &xis {
            let a = a_bound_unchecked(y, xi, g);
            let b = b_bound_unchecked(y, xi, g);
            let origin = y == 0.0 && xi == 0.0;
            if a < rep.min_a {
                rep.min_a = a;
                rep.min_a_at = (y, xi);
            }
            if b < rep.min_b {
                rep.min_b = b;
                rep.min_b_at = (y, xi);
            }
            if a < -tol {
                rep.negative_a += 1;
            } else if a.abs() <= tol && !origin {
                rep.zero_off_origin_a += 1;
            }
            if b < -tol {
                rep.negative_b += 1;
            } else if b.abs() <= tol && !origin {
                rep.zero_off_origin_b += 1;
            }
        }
    }
    Ok(rep)
}

/// Consecutive in-basin samples required before `t0` is declared.
pub const T0_CONSECUTIVE: usize = 10;
/// Slack on `V̇ ≤ −A − B`.
pub const DECREASE_TOL: f64 = 1e-9;
/// Allowed step-to-step increase of `V`, relative to `V(t0)` (rounding floor).
pub const MONOTONE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
    pub xi: f64,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VdotReport {
    pub t0: Option<f64>,
    pub t0_index: Option<usize>,
    /// Post-`t0` samples with `|ξ| ≥ 2ρ`.
    pub trap_violations: usize,
    /// Post-`t0` samples where the outer `u2` saturation is active.
    pub saturation_active: usize,
    pub v_t0: f64,
    pub v_end: f64,
    /// Post-`t0` steps where `V` increased beyond the rounding floor.
    pub monotone_violations: usize,
    pub max_increase: f64,
    /// Post-`t0` samples with `V̇ > −A − B + tol` (rescaled time).
    pub decrease_violations: usize,
    pub first_decrease_violation: Option<Violation>,
    /// max |analytic − centred difference| of `V̇` in rescaled time (the
    /// `Vdot` column), over steps away from saturation switches.
    pub max_fd_gap: f64,
    pub fd_samples: usize,
    pub post_t0_samples: usize,
}

impl VdotReport {
    pub fn trapped(&self) -> bool {
        self.t0.is_some() && self.trap_violations == 0
    }

    pub fn decay_ratio(&self) -> f64 {
        if self.v_t0 == 0.0 {
            0.0
        } else {
            self.v_end / self.v_t0
        }
    }

    /// No post-`t0` violation of trapping, monotonicity or the decrease bound.
    pub fn clean(&self) -> bool {
        self.trapped() && self.monotone_violations == 0 && self.decrease_violations == 0
    }
}

/// First index from which `|ξ| < 2ρ` holds for `T0_CONSECUTIVE` samples
/// (or until the end of the log, if shorter).
pub fn detect_t0(xi: &[f64], rho: f64) -> Option<usize> {
    let limit = 2.0 * rho;
    let mut run = 0usize;
    for (k, x) in xi.iter().enumerate() {
        if x.abs() < limit {
            run += 1;
            if run == T0_CONSECUTIVE {
                return Some(k + 1 - T0_CONSECUTIVE);
            }
        } else {
            run = 0;
        }
    }
    (run > 0).then(|| xi.len() - run)
}

fn switch_flags(y1: f64, y2: f64, xi: f64, g: &GainSet) -> [bool; 3] {
    [(g.m * y1).abs() > 1.0, (g.c2 * y2).abs() > 1.0, heading_drive(xi, y2, g).abs() > 1.0]
}

/// Post-hoc check of the Lyapunov claims along a logged run.
pub fn vdot_check(log: &TrajectoryLog, g: &GainSet) -> Result<VdotReport> {
    g.validate()?;
    check_positive_definite(g)?;
    let recs = &log.records;
    if recs.is_empty() {
        return Err(Error::MalformedLog("log has no samples".into()));
    }
    let xi: Vec<f64> = recs.iter().map(|r| r.xi).collect();
    let mut rep = VdotReport::default();
    let Some(k0) = detect_t0(&xi, g.rho) else {
        return Ok(rep);
    };
    rep.t0 = Some(recs[k0].t);
    rep.t0_index = Some(k0);
    let v: Vec<f64> = recs.iter().map(|r| lyapunov_value(r.y1, r.y2, r.xi, g)).collect();
    rep.v_t0 = v[k0];
    rep.v_end = *v.last().unwrap();
    let floor = MONOTONE_REL_TOL * rep.v_t0.max(f64::MIN_POSITIVE);
    let dt = log.dt;

    for k in k0..recs.len() {
        let r = &recs[k];
        rep.post_t0_samples += 1;
        if r.xi.abs() >= 2.0 * g.rho {
            rep.trap_violations += 1;
            continue;
        }
        if heading_drive(r.xi, r.y2, g).abs() > 1.0 {
            rep.saturation_active += 1;
        }
        if k + 1 < recs.len() {
            let inc = v[k + 1] - v[k];
            if inc > floor {
                rep.monotone_violations += 1;
            }
            rep.max_increase = rep.max_increase.max(inc);
        }
        let limit = -a_bound_unchecked(r.y1, r.xi, g) - b_bound_unchecked(r.y2, r.xi, g);
        if r.vdot > limit + DECREASE_TOL {
            rep.decrease_violations += 1;
            rep.first_decrease_violation.get_or_insert(Violation {
                t: r.t,
                y1: r.y1,
                y2: r.y2,
                xi: r.xi,
                value: r.vdot,
                limit,
            });
        }
        if k > k0 && k + 1 < recs.len() {
            let f = |j: usize| switch_flags(recs[j].y1, recs[j].y2, recs[j].xi, g);
            if f(k - 1) == f(k) && f(k) == f(k + 1) {
                let numeric = (v[k + 1] - v[k - 1]) / (2.0 * dt * r.v_d);
                let analytic = r.vdot;
                rep.max_fd_gap = rep.max_fd_gap.max((analytic - numeric).abs());
                rep.fd_samples += 1;
            }
        }
    }
    Ok(rep)
}
