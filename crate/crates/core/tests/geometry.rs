use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use targetpoint::kinematics::{ClosedLoop, PerturbationSample};
use targetpoint::path::reference_derivative;
use targetpoint::sim::{rk4, step};
use targetpoint::steering::{budget_guard, feedback};
use targetpoint::{
    synthesize_gains, CurvatureProfile, ErrorCoords, GainSet, InitialCondition, PathSpec, ReferenceState, Scenario,
    SpeedProfile, Variant,
};

fn traced_path(path: &PathSpec, h: f64, n: usize) -> Vec<ReferenceState> {
    let mut pts = vec![ReferenceState { s: path.s0(), ..Default::default() }];
    let mut y = [0.0, 0.0, 0.0, path.s0()];
    for _ in 0..n {
        y = rk4(&y, 0.0, h, |_, y: &[f64; 4]| {
            let r = reference_derivative(&ReferenceState { p_r: y[0], q_r: y[1], psi_r: y[2], s: y[3] }, 1.0, path)?;
            Ok([r.p_r, r.q_r, r.psi_r, r.s])
        })
        .unwrap();
        pts.push(ReferenceState { p_r: y[0], q_r: y[1], psi_r: y[2], s: y[3] });
    }
    pts
}

#[test]
fn reference_path_has_unit_speed_and_the_requested_curvature() {
    let path = PathSpec::new(CurvatureProfile::Sinusoidal { amplitude: 0.02, period: 250.0 }, 0.02, 0.0).unwrap();
    let h = 0.05;
    let pts = traced_path(&path, h, 4000);
    for w in pts.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let speed = (c.p_r - a.p_r).hypot(c.q_r - a.q_r) / (2.0 * h);
        assert!((speed - 1.0).abs() < 1e-5, "speed {speed} at s={}", b.s);
        // Menger curvature of three consecutive points
        let cross = (b.p_r - a.p_r) * (c.q_r - a.q_r) - (b.q_r - a.q_r) * (c.p_r - a.p_r);
        let ab = (b.p_r - a.p_r).hypot(b.q_r - a.q_r);
        let bc = (c.p_r - b.p_r).hypot(c.q_r - b.q_r);
        let ca = (a.p_r - c.p_r).hypot(a.q_r - c.q_r);
        let kappa = 2.0 * cross / (ab * bc * ca);
        assert!((kappa - path.curvature_at(b.s)).abs() < 10.0 * h * 0.02 * 2.0 * std::f64::consts::PI / 250.0 + 1e-6);
    }
}

#[test]
fn piecewise_path_turns_by_the_integral_of_curvature() {
    let path =
        PathSpec::new(CurvatureProfile::PiecewiseLinear(vec![(0.0, 0.0), (50.0, 0.02), (100.0, -0.01)]), 0.02, 0.0)
            .unwrap();
    let pts = traced_path(&path, 0.01, 10_000);
    // trapezoid areas: 0.5*50*0.02 + 0.5*50*(0.02 - 0.01)
    let turned = pts.last().unwrap().psi_r;
    assert!((turned - 0.75).abs() < 1e-6, "turned {turned}");
}

#[test]
fn saturated_outputs_respect_their_bounds_on_random_states() {
    let g = synthesize_gains(2.0, 0.02, 0.4, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100_000 {
        let e = ErrorCoords::aligned(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3), rng.gen_range(-10.0..10.0));
        let (u1, u2) = feedback(&e, &g, Variant::Saturated);
        assert!(u1.abs() <= g.c1 && u2.abs() <= g.beta);
        assert!(budget_guard(u1, u2, g.d, g.kappa_max).unwrap());
    }
}

fn with_gains(gains: GainSet) -> Scenario {
    let mut sc = Scenario::baseline();
    sc.gains = gains;
    sc
}

#[test]
fn split_step_matches_a_fine_plain_integration_across_a_switch() {
    // y1 starts inside the saturated band and crosses into the linear zone
    let mut sc = with_gains(synthesize_gains(2.0, 0.02, 0.4, 1.0).unwrap());
    sc.init = InitialCondition::Errors { e_p: 10.0, e_q: 10.0, xi: 0.9 * std::f64::consts::PI };
    let lp = ClosedLoop { gains: &sc.gains, path: &sc.path, variant: sc.variant };
    let speed = SpeedProfile::constant(15.0).unwrap();
    let coarse_dt = 0.01;
    let (mut coarse, mut fine) = (sc.initial_world(), sc.initial_world());
    let mut worst: f64 = 0.0;
    for k in 0..300 {
        let t = k as f64 * coarse_dt;
        coarse = step(&coarse, &lp, &speed, PerturbationSample::default(), t, coarse_dt).unwrap();
        for j in 0..100 {
            fine = step(&fine, &lp, &speed, PerturbationSample::default(), t + j as f64 * 1e-4, 1e-4).unwrap();
        }
        let gap = coarse.to_array().iter().zip(fine.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    assert!(worst < 1e-6, "worst gap {worst}");
}
