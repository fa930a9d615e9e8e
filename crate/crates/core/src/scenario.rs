//! Scenario files: plain `key = value` lines with dotted sections.
//!
//! ```text
//! vehicle.d = 2.0
//! speed.v = 15.0
//! path.kind = sinusoidal
//! path.kappa_max = 0.02
//! path.period = 250
//! gains.c0 = 0.4
//! ...
//! init.e_p = 10
//! sim.dt = 0.001
//! ```
//!
//! `#` starts a comment. Unknown keys are rejected. Overrides use the same
//! keys and are applied after the file, last write wins.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{require, Error, Result};
use crate::gains::GainSet;
use crate::kinematics::{vehicle_from_errors, SpeedProfile, VehicleState, WorldState};
use crate::noise::{PerturbationKind, PerturbationSpec};
use crate::path::{CurvatureProfile, PathSpec, ReferenceState};
use crate::steering::Variant;

const KNOWN_KEYS: &[&str] = &[
    "vehicle.d",
    "speed.kind",
    "speed.v",
    "speed.amplitude",
    "speed.period",
    "path.kind",
    "path.kappa_max",
    "path.kappa",
    "path.samples",
    "path.amplitude",
    "path.period",
    "path.s0",
    "gains.c0",
    "gains.c1",
    "gains.c2",
    "gains.m",
    "gains.n",
    "gains.beta",
    "gains.rho",
    "controller.variant",
    "init.x",
    "init.y",
    "init.psi",
    "init.v",
    "init.e_p",
    "init.e_q",
    "init.xi",
    "init.p_r",
    "init.q_r",
    "init.psi_r",
    "sim.dt",
    "sim.duration",
    "sim.seed",
    "noise.kind",
    "noise.kappa_amp",
    "noise.vx_amp",
    "noise.frequency",
];

/// How the initial vehicle pose is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Pose(VehicleState),
    /// Target-point errors relative to the reference; the vehicle starts
    /// with zero steering curvature.
    Errors {
        e_p: f64,
        e_q: f64,
        xi: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gains: GainSet,
    pub speed: SpeedProfile,
    pub path: PathSpec,
    pub variant: Variant,
    /// Reference pose at t = 0; its arclength is `path.s0()`.
    pub reference: ReferenceState,
    pub init: InitialCondition,
    pub dt: f64,
    pub duration: f64,
    pub noise: PerturbationSpec,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        require(self.dt.is_finite() && self.dt > 0.0, || format!("sim.dt must be > 0, got {}", self.dt))?;
        require(self.duration.is_finite() && self.duration >= self.dt, || {
            format!("sim.duration ({}) must be >= sim.dt ({})", self.duration, self.dt)
        })?;
        require((self.path.kappa_max() - self.gains.kappa_max).abs() == 0.0, || {
            "gains.kappa_max must equal path.kappa_max".into()
        })?;
        self.noise.validate(self.speed.v_min())
    }

    pub fn initial_world(&self) -> WorldState {
        let reference = ReferenceState { s: self.path.s0(), ..self.reference };
        let vehicle = match self.init {
            InitialCondition::Pose(v) => v,
            InitialCondition::Errors { e_p, e_q, xi } => vehicle_from_errors(&reference, e_p, e_q, xi, self.gains.d),
        };
        WorldState { reference, vehicle }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// The published simulation setup: d = 2 m, V_x = 15 m/s, κ_max = 0.02,
    /// initial errors (10, 10, 9π/10), sinusoidal curvature of period 250 m,
    /// 20 s at dt = 1e-3.
    pub fn baseline() -> Self {
        Scenario {
            gains: GainSet::baseline(),
            speed: SpeedProfile::Constant(15.0),
            path: PathSpec::new(CurvatureProfile::Sinusoidal { amplitude: 0.02, period: 250.0 }, 0.02, 0.0)
                .expect("valid path"),
            variant: Variant::Saturated,
            reference: ReferenceState::default(),
            init: InitialCondition::Errors { e_p: 10.0, e_q: 10.0, xi: 9.0 * PI / 10.0 },
            dt: 1e-3,
            duration: 20.0,
            noise: PerturbationSpec { frequency: 1.0, ..PerturbationSpec::none() },
            seed: 1,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies each `key=value` override in order.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                split_pair(line).ok_or_else(|| Error::Scenario(format!("line {}: expected 'key = value'", i + 1)))?;
            insert_known(&mut kv, k, v)?;
        }
        for o in overrides {
            let (k, v) = split_pair(o).ok_or_else(|| Error::Scenario(format!("override '{o}' is not key=value")))?;
            insert_known(&mut kv, k, v)?;
        }
        build(&Fields(kv))
    }

    /// Serialises back to the file format; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let g = &self.gains;
        let mut line = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("String write");
        };
        line("vehicle.d", g.d.to_string());
        match self.speed {
            SpeedProfile::Constant(v) => {
                line("speed.kind", "constant".into());
                line("speed.v", v.to_string());
            }
            SpeedProfile::Sinusoidal { base, amplitude, period } => {
                line("speed.kind", "sinusoidal".into());
                line("speed.v", base.to_string());
                line("speed.amplitude", amplitude.to_string());
                line("speed.period", period.to_string());
            }
        }
        line("path.kappa_max", self.path.kappa_max().to_string());
        line("path.s0", self.path.s0().to_string());
        match self.path.profile() {
            CurvatureProfile::Constant(k) => {
                line("path.kind", "constant".into());
                line("path.kappa", k.to_string());
            }
            CurvatureProfile::PiecewiseLinear(samples) => {
                line("path.kind", "piecewise".into());
                let joined: Vec<String> = samples.iter().map(|(s, k)| format!("{s}:{k}")).collect();
                line("path.samples", joined.join(", "));
            }
            CurvatureProfile::Sinusoidal { amplitude, period } => {
                line("path.kind", "sinusoidal".into());
                line("path.amplitude", amplitude.to_string());
                line("path.period", period.to_string());
            }
        }
        for l in gains_block(g).lines() {
            let (k, v) = l.split_once(" = ").expect("gains block format");
            line(k, v.to_string());
        }
        line("controller.variant", self.variant.as_str().into());
        line("init.p_r", self.reference.p_r.to_string());
        line("init.q_r", self.reference.q_r.to_string());
        line("init.psi_r", self.reference.psi_r.to_string());
        match self.init {
            InitialCondition::Pose(v) => {
                line("init.x", v.x.to_string());
                line("init.y", v.y.to_string());
                line("init.psi", v.psi.to_string());
                line("init.v", v.v.to_string());
            }
            InitialCondition::Errors { e_p, e_q, xi } => {
                line("init.e_p", e_p.to_string());
                line("init.e_q", e_q.to_string());
                line("init.xi", xi.to_string());
            }
        }
        line("sim.dt", self.dt.to_string());
        line("sim.duration", self.duration.to_string());
        line("sim.seed", self.seed.to_string());
        line("noise.kind", self.noise.kind.as_str().into());
        line("noise.kappa_amp", self.noise.kappa_amp.to_string());
        line("noise.vx_amp", self.noise.vx_amp.to_string());
        line("noise.frequency", self.noise.frequency.to_string());
        s
    }
}

/// `gains.*` lines for the seven controller constants.
pub fn gains_block(g: &GainSet) -> String {
    let mut s = String::new();
    for (k, v) in [("c0", g.c0), ("c1", g.c1), ("c2", g.c2), ("m", g.m), ("n", g.n), ("beta", g.beta), ("rho", g.rho)] {
        writeln!(s, "gains.{k} = {v}").expect("String write");
    }
    s
}

fn split_pair(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then_some((k, v))
}

fn insert_known(kv: &mut BTreeMap<String, String>, k: &str, v: &str) -> Result<()> {
    if !KNOWN_KEYS.contains(&k) {
        return Err(Error::Scenario(format!("unknown key '{k}'")));
    }
    kv.insert(k.to_string(), v.to_string());
    Ok(())
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Scenario(format!("{key}: cannot parse '{v}': {e}"))))
            .transpose()
    }

    fn num(&self, key: &str) -> Result<f64> {
        self.parse(key)?.ok_or_else(|| Error::Scenario(format!("missing required key '{key}'")))
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parse(key)?.unwrap_or(default))
    }
}

fn parse_samples(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|pair| {
            let (s, k) = pair
                .split_once(':')
                .ok_or_else(|| Error::Scenario(format!("path.samples: expected 's:kappa', got '{pair}'")))?;
            let num = |x: &str| {
                x.trim().parse::<f64>().map_err(|_| Error::Scenario(format!("path.samples: bad number '{x}'")))
            };
            Ok((num(s)?, num(k)?))
        })
        .collect()
}

fn build(f: &Fields) -> Result<Scenario> {
    let d = f.num("vehicle.d")?;
    let kappa_max = f.num("path.kappa_max")?;

    let speed_kind = f.raw("speed.kind").unwrap_or("constant");
    let speed = match speed_kind {
        "constant" => SpeedProfile::constant(f.num("speed.v")?)?,
        "sinusoidal" => SpeedProfile::sinusoidal(
            f.num("speed.v")?,
            f.num_or("speed.amplitude", 0.0)?,
            f.num_or("speed.period", 10.0)?,
        )?,
        other => return Err(Error::Scenario(format!("speed.kind: unknown kind '{other}'"))),
    };

    let s0 = f.num_or("path.s0", 0.0)?;
    let profile = match f.raw("path.kind").ok_or_else(|| Error::Scenario("missing required key 'path.kind'".into()))? {
        "constant" => CurvatureProfile::Constant(f.num_or("path.kappa", 0.0)?),
        "piecewise" | "piecewise-linear" => CurvatureProfile::PiecewiseLinear(parse_samples(
            f.raw("path.samples").ok_or_else(|| Error::Scenario("missing required key 'path.samples'".into()))?,
        )?),
        "sinusoidal" => CurvatureProfile::Sinusoidal {
            amplitude: f.num_or("path.amplitude", kappa_max)?,
            period: f.num("path.period")?,
        },
        other => return Err(Error::Scenario(format!("path.kind: unknown kind '{other}'"))),
    };
    let path = PathSpec::new(profile, kappa_max, s0)?;

    let gains = GainSet {
        c0: f.num("gains.c0")?,
        c1: f.num("gains.c1")?,
        c2: f.num("gains.c2")?,
        m: f.num("gains.m")?,
        n: f.num("gains.n")?,
        beta: f.num("gains.beta")?,
        rho: f.num("gains.rho")?,
        d,
        kappa_max,
    };

    let variant = match f.raw("controller.variant") {
        None => Variant::Saturated,
        Some(v) => v.parse().map_err(Error::Scenario)?,
    };

    let reference = ReferenceState {
        p_r: f.num_or("init.p_r", 0.0)?,
        q_r: f.num_or("init.q_r", 0.0)?,
        psi_r: f.num_or("init.psi_r", 0.0)?,
        s: s0,
    };
    let pose_keys = ["init.x", "init.y", "init.psi", "init.v"];
    let error_keys = ["init.e_p", "init.e_q", "init.xi"];
    let has_pose = pose_keys.iter().any(|k| f.has(k));
    let has_errors = error_keys.iter().any(|k| f.has(k));
    let init = match (has_pose, has_errors) {
        (true, true) => {
            return Err(Error::Scenario("give either init.{x,y,psi,v} or init.{e_p,e_q,xi}, not both".into()));
        }
        (false, false) => {
            return Err(Error::Scenario("missing initial condition: init.{x,y,psi} or init.{e_p,e_q,xi}".into()));
        }
        (true, false) => InitialCondition::Pose(VehicleState {
            x: f.num("init.x")?,
            y: f.num("init.y")?,
            psi: f.num("init.psi")?,
            v: f.num_or("init.v", 0.0)?,
        }),
        (false, true) => {
            InitialCondition::Errors { e_p: f.num("init.e_p")?, e_q: f.num("init.e_q")?, xi: f.num("init.xi")? }
        }
    };

    let noise = PerturbationSpec {
        kind: match f.raw("noise.kind") {
            None => PerturbationKind::None,
            Some(k) => k.parse().map_err(Error::Scenario)?,
        },
        kappa_amp: f.num_or("noise.kappa_amp", 0.0)?,
        vx_amp: f.num_or("noise.vx_amp", 0.0)?,
        frequency: f.num_or("noise.frequency", 1.0)?,
    };
    // amplitudes with kind=none are allowed but inert; a non-zero amplitude
    // implies uniform noise unless a kind was given
    let noise = if f.raw("noise.kind").is_none() && (noise.kappa_amp > 0.0 || noise.vx_amp > 0.0) {
        PerturbationSpec { kind: PerturbationKind::Uniform, ..noise }
    } else {
        noise
    };

    let scenario = Scenario {
        gains,
        speed,
        path,
        variant,
        reference,
        init,
        dt: f.num_or("sim.dt", 1e-3)?,
        duration: f.num_or("sim.duration", 20.0)?,
        noise,
        seed: f.parse("sim.seed")?.unwrap_or(1),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        vehicle.d = 2
        speed.v = 15
        path.kind = constant
        path.kappa_max = 0.02
        path.kappa = 0.01
        gains.c0 = 0.4
        gains.c1 = 0.7
        gains.c2 = 1
        gains.m = 1562
        gains.n = 3
        gains.beta = 0.96
        gains.rho = 0.2
        init.e_p = 10   # metres
        init.e_q = 10
        init.xi = 2.827433388
    ";

    #[test]
    fn parses_minimal_file_with_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.gains, GainSet::baseline());
        assert_eq!(s.dt, 1e-3);
        assert_eq!(s.duration, 20.0);
        assert_eq!(s.variant, Variant::Saturated);
        assert_eq!(s.noise.kind, PerturbationKind::None);
        assert_eq!(s.path.curvature_at(123.0), 0.01);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{MINIMAL}\nsim.dtt = 0.1\n");
        assert!(matches!(Scenario::parse(&text), Err(Error::Scenario(m)) if m.contains("sim.dtt")));
        let e = Scenario::parse_with_overrides(MINIMAL, &["bogus.key=1".into()]);
        assert!(matches!(e, Err(Error::Scenario(_))));
    }

    #[test]
    fn overrides_apply_last_write_wins() {
        let s = Scenario::parse_with_overrides(MINIMAL, &["sim.dt=0.0005".into(), "sim.dt = 0.002".into()]).unwrap();
        assert_eq!(s.dt, 0.002);
    }

    #[test]
    fn both_init_styles_is_an_error() {
        let text = format!("{MINIMAL}\ninit.x = 0\n");
        assert!(Scenario::parse(&text).is_err());
        let text = MINIMAL.replace("init.", "# init.");
        assert!(Scenario::parse(&text).is_err());
    }

    #[test]
    fn invalid_values_are_parameter_errors() {
        let e = Scenario::parse_with_overrides(MINIMAL, &["sim.dt=-1".into()]);
        assert!(matches!(e, Err(Error::InvalidParameter(_))));
        let e = Scenario::parse_with_overrides(MINIMAL, &["path.kappa=0.5".into()]);
        assert!(matches!(e, Err(Error::CurvatureBound { .. })));
    }

    #[test]
    fn text_round_trip() {
        let mut s = Scenario::baseline();
        assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
        s.path = PathSpec::new(CurvatureProfile::PiecewiseLinear(vec![(0.0, 0.0), (50.5, 0.01)]), 0.02, 3.0).unwrap();
        s.reference.s = 3.0;
        s.init = InitialCondition::Pose(VehicleState { x: 1.0, y: -2.0, psi: 0.1, v: 0.01 });
        s.noise =
            PerturbationSpec { kind: PerturbationKind::Sinusoidal, kappa_amp: 0.001, vx_amp: 0.2, frequency: 0.5 };
        s.speed = SpeedProfile::sinusoidal(15.0, 1.0, 7.0).unwrap();
        assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn initial_world_from_errors() {
        let s = Scenario::baseline();
        let w = s.initial_world();
        let t = crate::kinematics::target_from_vehicle(&w.vehicle, 2.0, 15.0).unwrap();
        let e = crate::kinematics::error_coords(&t, &w.reference);
        assert!((e.e_p - 10.0).abs() < 1e-12 && (e.e_q - 10.0).abs() < 1e-12);
        assert!((e.xi - 0.9 * PI).abs() < 1e-15);
    }
}
