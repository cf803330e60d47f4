//! The acceptance suite: exact algebra, Monte Carlo against closed forms,
//! quadrature against exact integrals, comparison certificates and
//! reproducibility.

use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::analytic::{averaged_densities, d2_display, d3_display, regular_densities, rho1_display, rho2_display, qd2_rate_numeric};
use crate::compare::{check_gf_dominance, check_jensen, check_layer_dominance, check_spread_family};
use crate::curve::DensityCurve;
use crate::degree::DegreeDistribution;
use crate::deposit::{estimate_densities, LayerPattern, Measure, SimConfig, Substrate};
use crate::exppoly::{int, rat, ExpPoly};
use crate::motives::{build_motive_system, MotiveSystem};
use crate::quad::adaptive_simpson;
use crate::tree::{build_cycle, build_regular_ball};

pub const DEFAULT_SEED: u64 = 1;
pub const LINE_TIMES: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];
pub const LINE_SITES: usize = 1000;
pub const LINE_REPLICAS: u32 = 200;
pub const TREE_RADIUS: u32 = 12;
pub const TREE_BUFFER: u32 = 4;
pub const REGULAR_REPLICAS: u32 = 200;
pub const RANDOM_TREE_REPLICAS: u32 = 4000;
pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidateOptions {
    /// Only the exact-algebra criteria (1, 2, 7, 8).
    pub quick: bool,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { quick: false, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub elapsed_secs: f64,
    pub limit_secs: f64,
    /// One line per failed check, plus a short summary.
    pub details: Vec<String>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} {} {} ({:.2} s / {:.0} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed_secs,
            self.limit_secs
        )?;
        for d in &self.details {
            write!(f, "\n    {d}")?;
        }
        Ok(())
    }
}

pub const TITLES: [&str; 9] = [
    "exact motive reproduction",
    "regular-tree closed forms and limits",
    "line: Monte Carlo against closed forms",
    "line: pattern 0101 against its closed form",
    "regular tree d=3: Monte Carlo against closed forms",
    "random tree {2:1/2,3:1/2}: root marginal against averaged densities",
    "averaged second layer: exact against quadrature",
    "comparison certificates",
    "determinism of the line run",
];

pub const LIMITS_SECS: [f64; 9] = [1.0, 5.0, 120.0, 120.0, 180.0, 300.0, 5.0, 5.0, 240.0];

/// Accumulates failed checks.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
    count: usize,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.count += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    fn finish(mut self, id: u8, started: Instant) -> CriterionResult {
        let elapsed = started.elapsed();
        let limit = LIMITS_SECS[id as usize - 1];
        let in_time = elapsed <= Duration::from_secs_f64(limit);
        if !in_time {
            self.failures.push(format!("runtime {:.2} s exceeds {limit} s", elapsed.as_secs_f64()));
        }
        let passed = self.failures.is_empty();
        let mut details = vec![format!("{} checks, {} failed", self.count, self.failures.len())];
        details.extend(self.notes);
        details.extend(self.failures);
        CriterionResult {
            id,
            title: TITLES[id as usize - 1],
            passed,
            elapsed_secs: elapsed.as_secs_f64(),
            limit_secs: limit,
            details,
        }
    }

    fn error(id: u8, started: Instant, err: impl fmt::Display) -> CriterionResult {
        let mut c = Checks::default();
        c.check(false, || format!("error: {err}"));
        c.finish(id, started)
    }
}

/// `Σ coeff · t^power · e^{-rate t}` from `(num, den, power, rate)` rows.
fn expoly(rows: &[(i64, i64, u32, i64)]) -> ExpPoly {
    rows.iter().map(|&(n, d, p, r)| ExpPoly::term(rat(n, d), p, int(r))).sum()
}

/// Hand-transcribed closed forms for the `0101` motives.
pub fn reference_motives() -> Vec<(&'static str, ExpPoly)> {
    vec![
        ("B1", expoly(&[(1, 1, 1, 4)])),
        ("B2", expoly(&[(1, 1, 1, 4), (-1, 1, 1, 5)])),
        ("A1", expoly(&[(7, 4, 0, 3), (-2, 1, 0, 4), (-2, 1, 1, 4), (1, 4, 0, 5), (1, 2, 1, 5)])),
        ("U", expoly(&[(7, 4, 0, 2), (-2, 1, 1, 3), (-2, 1, 0, 3), (1, 2, 1, 4), (1, 4, 0, 4)])),
        ("C1", expoly(&[(7, 4, 0, 4), (-2, 1, 1, 5), (-2, 1, 0, 5), (1, 2, 1, 6), (1, 4, 0, 6)])),
        (
            "A2",
            expoly(&[
                (67, 48, 0, 3),
                (-7, 1, 0, 4),
                (31, 4, 0, 5),
                (4, 1, 1, 5),
                (-7, 3, 0, 6),
                (-2, 1, 1, 6),
                (3, 16, 0, 7),
                (1, 4, 1, 7),
            ]),
        ),
        (
            "A3",
            expoly(&[(-15, 4, 0, 3), (7, 4, 1, 3), (4, 1, 0, 4), (2, 1, 1, 4), (-1, 4, 0, 5), (-1, 4, 1, 5)]),
        ),
        (
            "A4",
            expoly(&[
                (-49, 16, 0, 3),
                (67, 48, 1, 3),
                (7, 1, 0, 4),
                (-39, 8, 0, 5),
                (-2, 1, 1, 5),
                (1, 1, 0, 6),
                (2, 3, 1, 6),
                (-1, 16, 0, 7),
                (-1, 16, 1, 7),
            ]),
        ),
        (
            "Y",
            expoly(&[
                (34, 735, 0, 0),
                (-1991, 432, 0, 3),
                (235, 144, 1, 3),
                (7, 1, 0, 4),
                (2, 1, 1, 4),
                (-121, 40, 0, 5),
                (-3, 2, 1, 5),
                (17, 27, 0, 6),
                (4, 9, 1, 6),
                (-33, 784, 0, 7),
                (-5, 112, 1, 7),
            ]),
        ),
    ]
}

/// Forcing `2C1 + 2C2` of `A2`, as displayed before it is solved.
pub fn reference_a2_forcing() -> ExpPoly {
    expoly(&[(7, 1, 0, 4), (-23, 2, 0, 5), (-8, 1, 1, 5), (5, 1, 0, 6), (6, 1, 1, 6), (-1, 2, 0, 7), (-1, 1, 1, 7)])
}

fn criterion_1() -> CriterionResult {
    let started = Instant::now();
    let sys = match build_motive_system() {
        Ok(s) => s,
        Err(e) => return Checks::error(1, started, e),
    };
    let mut c = Checks::default();
    for (name, want) in reference_motives() {
        match sys.get(name) {
            Some(m) => c.check(m.closed_form == want, || format!("{name}: got {}, want {want}", m.closed_form)),
            None => c.check(false, || format!("{name}: missing")),
        }
    }
    let forcing = a2_forcing(&sys);
    c.check(forcing.as_ref() == Some(&reference_a2_forcing()), || "A2 forcing differs".into());
    let y = &sys.target().closed_form;
    let limit = y.limit_at_infinity().ok();
    c.check(limit == Some(rat(34, 735)), || format!("lim Y = {limit:?}"));
    c.check(y.coeff_at(3, 0) == rat(-1991, 432), || format!("Y e^(-3t) coefficient {}", y.coeff_at(3, 0)));
    c.note(format!("Y(t) = {y}"));
    c.finish(1, started)
}

fn a2_forcing(sys: &MotiveSystem) -> Option<ExpPoly> {
    let c1 = &sys.get("C1")?.closed_form;
    let c2 = &sys.get("C2")?.closed_form;
    Some((c1 + c2).scale(&int(2)))
}

fn criterion_2() -> CriterionResult {
    let started = Instant::now();
    let mut c = Checks::default();
    for d in 2..=50u32 {
        let pieces = (rho2_display(d), d2_display(d), d3_display(d), rho1_display(d));
        match pieces {
            (Ok(rho2), Ok(d2), Ok(d3), Ok(rho1)) => {
                c.check(rho2 == &d2 + &d3, || format!("d={d}: rho2 display differs from D2 + D3"));
                let lim = rho1.limit_at_infinity().ok();
                c.check(lim == Some(rat(1, d as i64 + 1)), || format!("d={d}: lim rho1 = {lim:?}"));
            }
            _ => c.check(false, || format!("d={d}: closed forms failed to build")),
        }
    }
    match check_layer_dominance(50) {
        Ok(report) => {
            for p in report.points.iter().filter(|p| !p.verdict) {
                c.check(false, || format!("layer dominance fails at {}", p.at));
            }
            c.check(report.passed(), || "layer dominance report does not hold".into());
        }
        Err(e) => c.check(false, || format!("layer dominance: {e}")),
    }
    c.finish(2, started)
}

/// Simulation settings of the line run.
pub fn line_config(seed: u64) -> SimConfig {
    SimConfig::new(LINE_TIMES.to_vec(), LINE_REPLICAS, seed)
        .with_patterns(vec!["0101".parse::<LayerPattern>().expect("valid pattern")])
}

/// The line run: cycle of [`LINE_SITES`] sites.
pub fn line_run(seed: u64) -> Result<DensityCurve, String> {
    let graph = build_cycle(LINE_SITES).map_err(|e| e.to_string())?;
    estimate_densities(&Substrate::Fixed(graph), &line_config(seed)).map_err(|e| e.to_string())
}

/// Checks `observable` against `exact` at every sample time: within
/// [`Z_LIMIT`] standard errors and, when given, within `abs_tol`.
fn compare_series(c: &mut Checks, curve: &DensityCurve, observable: &str, exact: &ExpPoly, abs_tol: Option<f64>) {
    let Some(series) = curve.series(observable) else {
        c.check(false, || format!("{observable}: missing"));
        return;
    };
    let mut max_z: f64 = 0.0;
    let mut max_dev: f64 = 0.0;
    for (t, est) in curve.times.iter().zip(&series.values) {
        let want = exact.eval(*t);
        let z = est.z_score(want);
        let dev = (est.mean - want).abs();
        max_z = max_z.max(z);
        max_dev = max_dev.max(dev);
        c.check(z <= Z_LIMIT, || format!("{observable} t={t}: {} vs {want:.6}, z = {z:.2}", est.mean));
        if let Some(tol) = abs_tol {
            c.check(dev <= tol, || format!("{observable} t={t}: |{} - {want:.6}| > {tol}", est.mean));
        }
    }
    c.note(format!("{observable}: max |z| = {max_z:.2}, max |dev| = {max_dev:.5}"));
}

fn criterion_3(curve: &Result<DensityCurve, String>, started: Instant) -> CriterionResult {
    let curve = match curve {
        Ok(c) => c,
        Err(e) => return Checks::error(3, started, e),
    };
    let dens = match regular_densities(2) {
        Ok(d) => d,
        Err(e) => return Checks::error(3, started, e),
    };
    let mut c = Checks::default();
    compare_series(&mut c, curve, "layer:1", &dens.rho1, Some(0.005));
    compare_series(&mut c, curve, "layer:2", &dens.rho2, Some(0.005));
    match curve.at("layer:2", 10.0) {
        Some(e) => c.check((e.mean - 14.0 / 45.0).abs() <= 0.005, || format!("layer:2 at t=10: {}", e.mean)),
        None => c.check(false, || "layer:2 at t=10 missing".into()),
    }
    c.finish(3, started)
}

fn criterion_4(curve: &Result<DensityCurve, String>, started: Instant) -> CriterionResult {
    let curve = match curve {
        Ok(c) => c,
        Err(e) => return Checks::error(4, started, e),
    };
    let y = match build_motive_system() {
        Ok(s) => s.target().closed_form.clone(),
        Err(e) => return Checks::error(4, started, e),
    };
    let mut c = Checks::default();
    compare_series(&mut c, curve, "pattern:0101", &y, Some(0.004));
    match curve.at("pattern:0101", 10.0) {
        Some(e) => c.check((e.mean - 34.0 / 735.0).abs() <= 0.004, || format!("pattern at t=10: {}", e.mean)),
        None => c.check(false, || "pattern at t=10 missing".into()),
    }
    c.finish(4, started)
}

fn criterion_5(seed: u64) -> CriterionResult {
    let started = Instant::now();
    let run = || -> Result<(DensityCurve, ExpPoly, ExpPoly), String> {
        let graph = build_regular_ball(3, TREE_RADIUS, TREE_BUFFER).map_err(|e| e.to_string())?;
        let config = SimConfig::new(LINE_TIMES.to_vec(), REGULAR_REPLICAS, seed);
        let curve = estimate_densities(&Substrate::Fixed(graph), &config).map_err(|e| e.to_string())?;
        let dens = regular_densities(3).map_err(|e| e.to_string())?;
        Ok((curve, dens.rho1, dens.rho2))
    };
    match run() {
        Ok((curve, rho1, rho2)) => {
            let mut c = Checks::default();
            compare_series(&mut c, &curve, "layer:1", &rho1, Some(0.005));
            compare_series(&mut c, &curve, "layer:2", &rho2, Some(0.007));
            c.finish(5, started)
        }
        Err(e) => Checks::error(5, started, e),
    }
}

/// Degree law of criterion 6.
pub fn random_tree_law() -> DegreeDistribution {
    "2:1/2,3:1/2".parse().expect("valid law")
}

fn criterion_6(seed: u64) -> CriterionResult {
    let started = Instant::now();
    let run = || -> Result<(DensityCurve, ExpPoly, ExpPoly), String> {
        let dist = random_tree_law();
        let substrate =
            Substrate::RandomTrees { dist: dist.clone(), radius: TREE_RADIUS, buffer: TREE_BUFFER, measure: Measure::Root };
        let config = SimConfig::new(vec![1.0, 5.0], RANDOM_TREE_REPLICAS, seed);
        let curve = estimate_densities(&substrate, &config).map_err(|e| e.to_string())?;
        let dens = averaged_densities(&dist).map_err(|e| e.to_string())?;
        Ok((curve, dens.qrho1, dens.qrho2))
    };
    match run() {
        Ok((curve, q1, q2)) => {
            let mut c = Checks::default();
            compare_series(&mut c, &curve, "layer:1", &q1, None);
            compare_series(&mut c, &curve, "layer:2", &q2, None);
            c.finish(6, started)
        }
        Err(e) => Checks::error(6, started, e),
    }
}

/// Degree laws of criterion 7.
pub fn quadrature_laws() -> Vec<DegreeDistribution> {
    ["2:1/2,3:1/2", "2:1/2,4:1/2", "2:1/5,3:1/2,5:3/10"].iter().map(|s| s.parse().expect("valid law")).collect()
}

/// `t = 0.5, 1, …, 10`.
pub fn quadrature_grid() -> Vec<f64> {
    (1..=20).map(|i| 0.5 * i as f64).collect()
}

fn criterion_7() -> CriterionResult {
    let started = Instant::now();
    let mut c = Checks::default();
    for dist in quadrature_laws() {
        let qd2 = match averaged_densities(&dist) {
            Ok(d) => d.qd2,
            Err(e) => return Checks::error(7, started, e),
        };
        let mut worst: f64 = 0.0;
        for t in quadrature_grid() {
            let numeric = adaptive_simpson(|u| qd2_rate_numeric(&dist, u), 0.0, t, 1e-14, 50);
            let exact = qd2.eval(t);
            let err = (numeric - exact).abs();
            worst = worst.max(err);
            c.check(err <= 1e-10, || format!("{dist} t={t}: exact {exact} vs quadrature {numeric}"));
        }
        c.note(format!("{dist}: max |exact - quadrature| = {worst:.2e}"));
    }
    c.finish(7, started)
}

fn criterion_8() -> CriterionResult {
    let started = Instant::now();
    let mut c = Checks::default();
    let parse = |s: &str| s.parse::<DegreeDistribution>().expect("valid law");
    let (t2, t3, spread) = (parse("2:1"), parse("3:1"), parse("2:1/2,4:1/2"));
    let grid: Vec<f64> = (1..=20).map(|i| 0.25 * i as f64).chain([7.5, 10.0]).collect();
    let jensen_grid = [0.5, 1.0, 2.0, 5.0];

    let mut record = |name: &str, report: Result<crate::compare::ComparisonReport, crate::compare::CompareError>| {
        match report {
            Ok(r) => {
                c.check(r.passed(), || format!("{name}: {:?}", r.outcome));
                Some(r)
            }
            Err(e) => {
                c.check(false, || format!("{name}: {e}"));
                None
            }
        }
    };
    record("gf dominance T2 over T3", check_gf_dominance(&t2, &t3, &grid));
    record("gf dominance {2,4} over T3", check_gf_dominance(&spread, &t3, &grid));
    let strict = record("jensen {2,4} vs T3", check_jensen(3, &spread, &jensen_grid));
    let equal = record("jensen point mass 3", check_jensen(3, &t3, &jensen_grid));
    let family = record("jensen spread family", check_spread_family(6, 4, &jensen_grid));

    if let Some(r) = strict {
        let all_strict = jensen_grid.iter().all(|t| r.point(&format!("t={t}")).and_then(|p| p.flag("strict")) == Some(true));
        c.check(all_strict, || "spread gain is not strictly positive".into());
    }
    if let Some(r) = equal {
        c.check(r.point("gain").and_then(|p| p.flag("equality")) == Some(true), || "point mass gain is not zero".into());
    }
    if let Some(r) = family {
        let strict = r.points.iter().all(|p| p.flag("strict_for_spread") == Some(true));
        c.check(strict, || "spread family gain is not strict".into());
    }
    c.finish(8, started)
}

fn criterion_9(seed: u64, first: Option<&Result<DensityCurve, String>>) -> CriterionResult {
    let started = Instant::now();
    let owned;
    let first = match first {
        Some(f) => f,
        None => {
            owned = line_run(seed);
            &owned
        }
    };
    let second = line_run(seed);
    match (first, second) {
        (Ok(a), Ok(b)) => {
            let (a, b) = (a.to_csv(), b.to_csv());
            let mut c = Checks::default();
            c.check(a == b, || "CSV output differs between identical runs".into());
            c.note(format!("{} bytes compared", a.len()));
            c.finish(9, started)
        }
        (Err(e), _) => Checks::error(9, started, e),
        (_, Err(e)) => Checks::error(9, started, e),
    }
}

/// Runs criterion `id` on its own.
pub fn run_criterion(id: u8, seed: u64) -> Option<CriterionResult> {
    Some(match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 | 4 => {
            let started = Instant::now();
            let curve = line_run(seed);
            if id == 3 {
                criterion_3(&curve, started)
            } else {
                criterion_4(&curve, started)
            }
        }
        5 => criterion_5(seed),
        6 => criterion_6(seed),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(seed, None),
        _ => return None,
    })
}

/// Runs the suite in order, sharing the line run between criteria 3, 4 and 9.
pub fn run_all(opts: ValidateOptions) -> Vec<CriterionResult> {
    if opts.quick {
        return [1, 2, 7, 8].iter().filter_map(|&id| run_criterion(id, opts.seed)).collect();
    }
    let mut out = vec![criterion_1(), criterion_2()];
    let started = Instant::now();
    let curve = line_run(opts.seed);
    out.push(criterion_3(&curve, started));
    out.push(criterion_4(&curve, started));
    out.push(criterion_5(opts.seed));
    out.push(criterion_6(opts.seed));
    out.push(criterion_7());
    out.push(criterion_8());
    out.push(criterion_9(opts.seed, Some(&curve)));
    out
}
