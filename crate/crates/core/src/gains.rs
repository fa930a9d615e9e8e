//! Controller constants and the sufficient conditions under which the
//! closed loop is globally asymptotically stable.
//!
//! [`check_conditions`] evaluates every inequality and reports both sides.
//! [`synthesize_gains`] follows the practical recipe: fix `C0` and `C2`,
//! pick `N`, shrink `ρ` until the ρ-conditions hold, then size `C1` and `M`.

use std::fmt;

use crate::error::{require, Error, Result};
use crate::steering::beta_m;

/// Relative margin applied to every comparison.
pub const REL_MARGIN: f64 = 1e-12;

/// Controller constants plus the geometry they were chosen for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSet {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub m: f64,
    pub n: f64,
    pub beta: f64,
    pub rho: f64,
    /// Distance from the vehicle reference point to the target point, m.
    pub d: f64,
    pub kappa_max: f64,
}

impl GainSet {
    /// Checks only that the constants are finite and positive (`kappa_max`
    /// may be zero). Everything else is the job of [`check_conditions`].
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c0", self.c0),
            ("c1", self.c1),
            ("c2", self.c2),
            ("m", self.m),
            ("n", self.n),
            ("beta", self.beta),
            ("rho", self.rho),
            ("d", self.d),
        ] {
            require(v.is_finite() && v > 0.0, || format!("gain {name} must be finite and > 0, got {v}"))?;
        }
        require(self.kappa_max.is_finite() && self.kappa_max >= 0.0, || {
            format!("kappa_max must be finite and >= 0, got {}", self.kappa_max)
        })
    }

    /// The constants of the published simulation study, with `N = 3`.
    pub fn baseline() -> Self {
        GainSet { c0: 0.4, c1: 0.7, c2: 1.0, m: 1562.0, n: 3.0, beta: 0.96, rho: 0.2, d: 2.0, kappa_max: 0.02 }
    }

    pub fn beta_m(&self) -> f64 {
        beta_m(self.d, self.kappa_max)
    }

    /// `N − 1/C0`; positive iff V is positive definite.
    pub fn n_excess(&self) -> f64 {
        self.n - 1.0 / self.c0
    }
}

fn lt(a: f64, b: f64) -> bool {
    a < b - REL_MARGIN * a.abs().max(b.abs())
}

fn le(a: f64, b: f64) -> bool {
    a <= b + REL_MARGIN * a.abs().max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Less,
    LessEq,
    Greater,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Less => "<",
            Relation::LessEq => "<=",
            Relation::Greater => ">",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        if !(lhs.is_finite() || rhs.is_finite()) {
            return false;
        }
        match self {
            Relation::Less => lt(lhs, rhs),
            Relation::LessEq => le(lhs, rhs),
            Relation::Greater => lt(rhs, lhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub name: &'static str,
    pub clause: &'static str,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub pass: bool,
    /// Evaluated and reported, but does not affect the verdict.
    pub informational: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub gains: GainSet,
    pub entries: Vec<ConditionEntry>,
    pub beta_m: f64,
    pub cond3_rhs: f64,
    pub cond4_bound: f64,
    /// Open interval of `N` satisfying Cond5 at this `ρ`, if non-empty.
    pub cond5_n_interval: Option<(f64, f64)>,
    /// `(3 + C1) κ_max`, the constant used inside `A`.
    pub lambda_bound: f64,
    /// `(1 + C1) κ_max`, the bound `|λ|` actually obeys.
    pub lambda_bound_tight: f64,
    pub notes: Vec<String>,
}

impl ConditionReport {
    /// Every non-informational entry passes.
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass || e.informational)
    }

    /// Every entry passes, informational ones included.
    pub fn all_literal_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    /// Names of failing entries, deduplicated, in report order.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for e in self.entries.iter().filter(|e| !e.pass) {
            if !out.contains(&e.name) {
                out.push(e.name);
            }
        }
        out
    }

    /// Whether every entry with this name passes. `None` if absent.
    pub fn condition(&self, name: &str) -> Option<bool> {
        let mut it = self.entries.iter().filter(|e| e.name == name).peekable();
        it.peek()?;
        Some(it.all(|e| e.pass))
    }

    /// Cond0 holds (both clauses), i.e. the non-explosion budget is respected
    /// by construction.
    pub fn cond0(&self) -> bool {
        self.condition("Cond0").unwrap_or(false) && self.condition("H1").unwrap_or(false)
    }

    /// `name.clause = lhs rel rhs pass|fail` lines for scripts.
    pub fn key_value_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            let key = format!("cond.{i:02}.{}", e.name);
            out.push(format!("{key}.lhs={:e}", e.lhs));
            out.push(format!("{key}.rhs={:e}", e.rhs));
            out.push(format!(
                "{key}.result={}",
                match (e.pass, e.informational) {
                    (true, _) => "pass",
                    (false, true) => "fail-informational",
                    (false, false) => "fail",
                }
            ));
        }
        out.push(format!("beta_m={:e}", self.beta_m));
        out.push(format!("cond3_rhs={:e}", self.cond3_rhs));
        out.push(format!("cond4_bound={:e}", self.cond4_bound));
        match self.cond5_n_interval {
            Some((a, b)) => out.push(format!("cond5_n_interval={a:e},{b:e}")),
            None => out.push("cond5_n_interval=empty".into()),
        }
        out.push(format!("verdict={}", if self.passed() { "pass" } else { "fail" }));
        out
    }
}

impl fmt::Display for ConditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:<34} {:>16} {:>2} {:>16}  result", "condition", "clause", "lhs", "", "rhs")?;
        for e in &self.entries {
            let result = match (e.pass, e.informational) {
                (true, _) => "pass",
                (false, true) => "FAIL (informational)",
                (false, false) => "FAIL",
            };
            writeln!(
                f,
                "{:<12} {:<34} {:>16.9e} {:>2} {:>16.9e}  {result}",
                e.name,
                e.clause,
                e.lhs,
                e.relation.symbol(),
                e.rhs
            )?;
        }
        writeln!(f, "beta_M = {:.9}", self.beta_m)?;
        match self.cond5_n_interval {
            Some((a, b)) => writeln!(f, "Cond5 feasible N interval at this rho: ({a:.6}, {b:.6})")?,
            None => writeln!(f, "Cond5 feasible N interval at this rho: empty")?,
        }
        writeln!(
            f,
            "|lambda| bound used in A: {:.6e} (tight bound (1+C1)*kappa_max = {:.6e})",
            self.lambda_bound, self.lambda_bound_tight
        )?;
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        write!(f, "verdict: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Right-hand side of Cond3; infinite when `2ρκ_max/C0 ≥ 1`.
pub fn cond3_rhs(c0: f64, rho: f64, kappa_max: f64) -> f64 {
    let denom = 1.0 - 2.0 * rho * kappa_max / c0;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (6.0 * kappa_max * rho / c0 + 2.0 * rho * rho) / denom
}

/// Lower bound on `M` from Cond4; infinite when `N ≤ 1/C0`.
pub fn cond4_bound(c0: f64, c1: f64, n: f64, rho: f64, kappa_max: f64) -> f64 {
    let excess = n - 1.0 / c0;
    if excess <= 0.0 {
        return f64::INFINITY;
    }
    let off = kappa_max * (3.0 + c1) / (2.0 * c0) + rho;
    2.0 * off * off / (c1 * excess)
}

/// Determinant of the quadratic form bounding `A` near `y1 = 0`.
pub fn cond4_determinant(g: &GainSet) -> f64 {
    let off = g.kappa_max * (3.0 + g.c1) / (2.0 * g.c0) + g.rho;
    g.c1 * g.m * g.n_excess() / 2.0 - off * off
}

/// Left side of Cond5, `(1 − 2ρ²/3)/ρ`.
pub fn cond5_lhs(rho: f64) -> f64 {
    (1.0 - 2.0 * rho * rho / 3.0) / rho
}

/// Right side of Cond5, `C2 N² / (4 (N − 1/C0))`; infinite when `N ≤ 1/C0`.
pub fn cond5_rhs(c0: f64, c2: f64, n: f64) -> f64 {
    let excess = n - 1.0 / c0;
    if excess <= 0.0 {
        return f64::INFINITY;
    }
    c2 * n * n / (4.0 * excess)
}

/// Values of `N` for which Cond5 holds at the given `ρ`: the open interval
/// between the roots of `N² − K(N − 1/C0)`, `K = 4(1 − 2ρ²/3)/(ρ C2)`.
pub fn cond5_n_interval(c0: f64, c2: f64, rho: f64) -> Option<(f64, f64)> {
    n_interval(4.0 * cond5_lhs(rho) / c2, c0)
}

/// Right side of the condition under which `B` itself is positive definite,
/// `C2 N² / (2 (N − 1/C0))`. Twice the Cond5 right side: the `ξ²` weight of
/// `B` is half the one carried by `D`.
pub fn b_positivity_rhs(c0: f64, c2: f64, n: f64) -> f64 {
    2.0 * cond5_rhs(c0, c2, n)
}

/// Values of `N` for which `B` is positive definite at the given `ρ`.
pub fn b_positivity_n_interval(c0: f64, c2: f64, rho: f64) -> Option<(f64, f64)> {
    n_interval(2.0 * cond5_lhs(rho) / c2, c0)
}

fn n_interval(k: f64, c0: f64) -> Option<(f64, f64)> {
    let disc = k * k - 4.0 * k / c0;
    if disc.is_nan() || disc <= 0.0 {
        return None;
    }
    let r = disc.sqrt();
    Some(((k - r) / 2.0, (k + r) / 2.0))
}

pub fn check_conditions(g: &GainSet) -> Result<ConditionReport> {
    g.validate()?;
    let bm = g.beta_m();
    let c3 = cond3_rhs(g.c0, g.rho, g.kappa_max);
    let c4 = cond4_bound(g.c0, g.c1, g.n, g.rho, g.kappa_max);
    let mut entries = Vec::with_capacity(14);
    let mut push = |name, clause, lhs, relation: Relation, rhs, informational| {
        entries.push(ConditionEntry {
            name,
            clause,
            lhs,
            relation,
            rhs,
            pass: relation.holds(lhs, rhs),
            informational,
        });
    };
    push("H1", "d*kappa_max < 1", g.d * g.kappa_max, Relation::Less, 1.0, false);
    push("rho<=1/2", "rho <= 1/2", g.rho, Relation::LessEq, 0.5, false);
    push("C1<1", "C1 < 1 (reference speed > 0)", g.c1, Relation::Less, 1.0, false);
    push("Cond0", "C1 <= d*beta_M/2", g.c1, Relation::LessEq, g.d * bm / 2.0, false);
    push("Cond0", "beta <= beta_M/2", g.beta, Relation::LessEq, bm / 2.0, false);
    push("Cond1", "3*rho*C0 <= beta", 3.0 * g.rho * g.c0, Relation::LessEq, g.beta, false);
    push("Cond2-left", "9*rho < kappa_max/C0", 9.0 * g.rho, Relation::Less, g.kappa_max / g.c0, true);
    push("Cond2-right", "kappa_max/C0 < 1/(2*rho)", g.kappa_max / g.c0, Relation::Less, 1.0 / (2.0 * g.rho), false);
    push("KappaRho", "2*kappa_max*rho/C0 < 1", 2.0 * g.kappa_max * g.rho / g.c0, Relation::Less, 1.0, false);
    push("Cond3", "C1 > (6k*rho/C0+2rho^2)/(1-2rho*k/C0)", g.c1, Relation::Greater, c3, false);
    push("N>1/C0", "N > 1/C0", g.n, Relation::Greater, 1.0 / g.c0, false);
    push("Cond4", "M > 2(k(3+C1)/(2C0)+rho)^2/(C1(N-1/C0))", g.m, Relation::Greater, c4, false);
    push(
        "Cond5",
        "(1-2rho^2/3)/rho > C2 N^2/(4(N-1/C0))",
        cond5_lhs(g.rho),
        Relation::Greater,
        cond5_rhs(g.c0, g.c2, g.n),
        false,
    );

    let mut notes = Vec::new();
    let left_fails = entries.iter().any(|e| e.name == "Cond2-left" && !e.pass);
    if left_fails {
        notes.push(
            "Cond2-left is evaluated literally and reported for information only; the inequalities it \
             combines (Cond1 and KappaRho) are checked on their own"
                .to_string(),
        );
    }
    if cond5_lhs(g.rho) <= b_positivity_rhs(g.c0, g.c2, g.n) {
        notes.push(format!(
            "B is not positive definite: (1-2rho^2/3)/rho = {:.6} <= C2 N^2/(2(N-1/C0)) = {:.6}",
            cond5_lhs(g.rho),
            b_positivity_rhs(g.c0, g.c2, g.n)
        ));
    }
    if g.kappa_max == 0.0 {
        notes.push("kappa_max = 0: KappaRho (2*kappa_max*rho/C0 < 1) holds vacuously".to_string());
    }

    Ok(ConditionReport {
        gains: *g,
        entries,
        beta_m: bm,
        cond3_rhs: c3,
        cond4_bound: c4,
        cond5_n_interval: cond5_n_interval(g.c0, g.c2, g.rho),
        lambda_bound: (3.0 + g.c1) * g.kappa_max,
        lambda_bound_tight: (1.0 + g.c1) * g.kappa_max,
        notes,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_SHRINK: usize = 400;

/// Builds a gain set for the given geometry and fixed `C0`, `C2`.
///
/// `ρ` starts at 1/2 and shrinks by the golden ratio until every
/// non-informational condition holds. At each candidate `ρ`, `N` is the
/// midpoint of the interval on which `B` is positive definite (a subset of
/// the Cond5 interval), `β = β_M/2`, `C1 = min(dβ_M/2, 0.99)` and
/// `M` is 1.5 times the Cond4 bound.
pub fn synthesize_gains(d: f64, kappa_max: f64, c0: f64, c2: f64) -> Result<GainSet> {
    require(d.is_finite() && d > 0.0, || format!("d must be > 0, got {d}"))?;
    require(kappa_max.is_finite() && kappa_max >= 0.0, || format!("kappa_max must be >= 0, got {kappa_max}"))?;
    require(c0.is_finite() && c0 > 0.0, || format!("C0 must be > 0, got {c0}"))?;
    require(c2.is_finite() && c2 > 0.0, || format!("C2 must be > 0, got {c2}"))?;
    if d * kappa_max >= 1.0 {
        return Err(Error::Infeasible(format!(
            "d*kappa_max = {} violates H1 (must be < 1); beta_M = {} is not positive",
            d * kappa_max,
            beta_m(d, kappa_max)
        )));
    }
    let bm = beta_m(d, kappa_max);
    let beta = bm / 2.0;
    let c1 = (d * bm / 2.0).min(0.99);

    let mut rho = 0.5;
    let mut last_failures = Vec::new();
    for _ in 0..MAX_SHRINK {
        if let Some((lo, hi)) = b_positivity_n_interval(c0, c2, rho) {
            let n = 0.5 * (lo + hi);
            let m = 1.5 * cond4_bound(c0, c1, n, rho, kappa_max);
            let g = GainSet { c0, c1, c2, m, n, beta, rho, d, kappa_max };
            if g.validate().is_ok() {
                let report = check_conditions(&g)?;
                if report.passed() {
                    return Ok(g);
                }
                last_failures = report.failures();
            }
        }
        rho *= INV_PHI;
        if rho < f64::MIN_POSITIVE {
            break;
        }
    }
    Err(Error::Infeasible(format!(
        "no admissible rho found (beta_M = {bm:e}); last failing conditions: {}",
        if last_failures.is_empty() { "Cond5 interval empty".to_string() } else { last_failures.join(", ") }
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn baseline_gains_report() {
        let r = check_conditions(&GainSet::baseline()).unwrap();
        assert_relative_eq!(r.beta_m, 0.48, max_relative = 1e-12);
        assert_relative_eq!(r.cond3_rhs, 0.14 / 0.98, max_relative = 1e-12);
        assert_eq!(r.failures(), vec!["Cond0", "Cond2-left"]);
        assert_eq!(r.condition("Cond1"), Some(true));
        assert_eq!(r.condition("Cond3"), Some(true));
        assert!(!r.passed());
        let cl = r.entries.iter().find(|e| e.name == "Cond2-left").unwrap();
        assert_abs_diff_eq!(cl.lhs, 1.8, epsilon = 1e-12);
        assert_abs_diff_eq!(cl.rhs, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn cond4_bound_hand_value() {
        // 2(0.02*3.7/0.8 + 0.2)^2 / (0.7*0.5)
        let expected = 2.0 * (0.0925f64 + 0.2).powi(2) / 0.35;
        let b = cond4_bound(0.4, 0.7, 3.0, 0.2, 0.02);
        assert_relative_eq!(b, expected, max_relative = 1e-12);
        assert_abs_diff_eq!(b, 0.489, epsilon = 1e-3);
    }

    #[test]
    fn cond5_interval_matches_quadratic_roots() {
        let (lo, hi) = cond5_n_interval(0.4, 1.0, 0.2).unwrap();
        // roots of N^2 - K(N - 2.5), K = 4(1 - 0.08/3)/0.2
        let k: f64 = 20.0 * (1.0 - 0.08 / 3.0);
        assert_abs_diff_eq!(k, 19.4667, epsilon = 1e-4);
        for root in [lo, hi] {
            assert_abs_diff_eq!(root * root - k * (root - 2.5), 0.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(lo, 2.946, epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 16.52, epsilon = 1e-2);
    }

    #[test]
    fn zero_curvature_notes() {
        let g = GainSet { kappa_max: 0.0, ..GainSet::baseline() };
        let r = check_conditions(&g).unwrap();
        assert_eq!(r.condition("Cond2-left"), Some(false));
        assert_eq!(r.condition("KappaRho"), Some(true));
        assert!(r.notes.iter().any(|n| n.contains("vacuously")));
    }

    #[test]
    fn spec_compliant_example_passes() {
        let c1 = 0.48;
        let mut g = GainSet { c0: 0.4, c1, c2: 1.0, m: 1.0, n: 3.0, beta: 0.24, rho: 0.01, d: 2.0, kappa_max: 0.02 };
        g.m = 1.5 * cond4_bound(g.c0, g.c1, g.n, g.rho, g.kappa_max);
        let r = check_conditions(&g).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.failures(), vec!["Cond2-left"]);
    }

    #[test]
    fn rejects_nonpositive() {
        let g = GainSet { c0: 0.0, ..GainSet::baseline() };
        assert!(check_conditions(&g).is_err());
        let g = GainSet { m: -1.0, ..GainSet::baseline() };
        assert!(check_conditions(&g).is_err());
    }

    #[test]
    fn synth_reference_geometry() {
        let g = synthesize_gains(2.0, 0.02, 0.4, 1.0).unwrap();
        assert_relative_eq!(g.beta, 0.24, max_relative = 1e-12);
        assert_relative_eq!(g.c1, 0.48, max_relative = 1e-12);
        // 0.5 -> 0.309 -> 0.191: first value with 3*rho*C0 <= 0.24
        assert_relative_eq!(g.rho, 0.5 * INV_PHI * INV_PHI, max_relative = 1e-12);
        let r = check_conditions(&g).unwrap();
        assert!(r.passed(), "{r}");
        // bit-for-bit reproducible
        assert_eq!(g, synthesize_gains(2.0, 0.02, 0.4, 1.0).unwrap());
        let (lo, hi) = b_positivity_n_interval(0.4, 1.0, g.rho).unwrap();
        assert_relative_eq!(g.n, 0.5 * (lo + hi), max_relative = 1e-12);
        assert!(cond5_lhs(g.rho) > b_positivity_rhs(0.4, 1.0, g.n));
        assert!(r.notes.iter().all(|n| !n.starts_with("B is not")));
    }

    #[test]
    fn b_positivity_interval_is_inside_cond5() {
        // (K/2)^2 < 4(K/2)/C0 at rho = 0.2: no N works
        assert_eq!(b_positivity_n_interval(0.4, 1.0, 0.2), None);
        // roots of N^2 - K'(N - 2.5), K' = 2(1 - 0.02/3)/0.1 at rho = 0.1
        let (lo, hi) = b_positivity_n_interval(0.4, 1.0, 0.1).unwrap();
        let k = 20.0 * (1.0 - 0.02 / 3.0);
        for root in [lo, hi] {
            assert_abs_diff_eq!(root * root - k * (root - 2.5), 0.0, epsilon = 1e-9);
        }
        let (clo, chi) = cond5_n_interval(0.4, 1.0, 0.1).unwrap();
        assert!(clo < lo && hi < chi);
        // N = 3 passes Cond5 but leaves B indefinite
        let r = check_conditions(&GainSet::baseline()).unwrap();
        assert!(r.notes.iter().any(|n| n.starts_with("B is not positive definite")));
    }

    #[test]
    fn synth_h1_violation() {
        assert!(matches!(synthesize_gains(2.0, 0.5, 0.4, 1.0), Err(Error::Infeasible(_))));
        assert!(matches!(synthesize_gains(2.0, 0.6, 0.4, 1.0), Err(Error::Infeasible(_))));
    }

    proptest! {
        #[test]
        fn synthesized_sets_are_sound(
            d in 0.2f64..5.0, frac in 0.0f64..0.95, c0 in 0.05f64..3.0, c2 in 0.05f64..5.0,
        ) {
            let kappa_max = frac / d;
            let g = synthesize_gains(d, kappa_max, c0, c2).unwrap();
            let r = check_conditions(&g).unwrap();
            prop_assert!(r.passed(), "{}", r);
        }

        #[test]
        fn beta_m_positive_iff_h1(d in 0.01f64..10.0, k in 0.0f64..2.0) {
            prop_assert_eq!(beta_m(d, k) > 0.0, d * k < 1.0);
        }

        #[test]
        fn cond3_rhs_increasing_in_kappa(
            c0 in 0.05f64..3.0, rho in 0.001f64..0.5, k1 in 0.0f64..1.0, dk in 0.0f64..1.0,
        ) {
            let a = cond3_rhs(c0, rho, k1);
            let b = cond3_rhs(c0, rho, k1 + dk);
            prop_assert!(b >= a);
        }

        #[test]
        fn cond4_matches_determinant_form(
            c0 in 0.05f64..3.0, c1 in 0.01f64..0.99, dn in 0.01f64..20.0,
            rho in 0.001f64..0.5, k in 0.0f64..0.5, m in 0.001f64..100.0,
        ) {
            let n = 1.0 / c0 + dn;
            let g = GainSet { c0, c1, c2: 1.0, m, n, beta: 1.0, rho, d: 1.0, kappa_max: k };
            let bound = cond4_bound(c0, c1, n, rho, k);
            // stay off the boundary where the margin could decide either way
            prop_assume!((m - bound).abs() > 1e-9 * bound.max(1.0));
            let det = cond4_determinant(&g);
            prop_assert_eq!(m > bound, det > 0.0 && c1 * m > 0.0);
        }
    }
}
