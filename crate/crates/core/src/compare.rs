//! Certification of the comparison results: first layer against second on
//! regular trees, generating-function domination between random trees, and
//! random against regular trees at equal mean degree.
//!
//! Every check returns a [`ComparisonReport`]. A point's verdict is the
//! conjunction of its [`Witness::Check`] entries, so a report can be re-judged
//! from its recorded witnesses alone.

use std::fmt;

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{binomial, qrho1_display, regular_densities, rho1_display, rho2_display, AnalyticError};
use crate::degree::{DegreeDistribution, DegreeError};
use crate::exppoly::{int, ExpPoly, ExpPolyError, Rational};

/// Finite-difference step for `g_t''(k)`.
pub const CONVEXITY_STEP: f64 = 1e-4;
/// Lowest accepted value of the numeric `g_t''(k)`.
pub const CONVEXITY_TOLERANCE: f64 = -1e-12;
/// Allowed gap between the numeric and closed-form `g_t''(k)`. The
/// second difference at step 1e-4 carries roundoff near 1e-8.
pub const CONVEXITY_AGREEMENT: f64 = 1e-6;
/// Tolerance of the `γ'` identity.
pub const GAMMA_PRIME_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("beta_k(d) needs d >= 2 and 0 <= k <= d, got d = {d}, k = {k}")]
    BetaRange { d: u32, k: u32 },
    #[error("d_max must be at least 2, got {0}")]
    DMaxTooSmall(u32),
    #[error("distribution has mean degree {actual}, expected {expected}")]
    MeanMismatch { expected: u32, actual: String },
    #[error("spread {spread} around mean {mean} reaches a degree below 2")]
    SpreadTooWide { mean: u32, spread: u32 },
    #[error("empty time grid")]
    EmptyGrid,
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error(transparent)]
    ExpPoly(#[from] ExpPolyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Exact { name: String, value: String },
    Float { name: String, value: f64 },
    /// A condition that counts toward the verdict.
    Check { name: String, holds: bool },
    /// A recorded fact that does not count toward the verdict.
    Flag { name: String, value: bool },
}

impl Witness {
    fn exact(name: &str, value: &Rational) -> Self {
        Self::Exact { name: name.into(), value: value.to_string() }
    }

    fn float(name: &str, value: f64) -> Self {
        Self::Float { name: name.into(), value }
    }

    fn check(name: &str, holds: bool) -> Self {
        Self::Check { name: name.into(), holds }
    }

    fn flag(name: &str, value: bool) -> Self {
        Self::Flag { name: name.into(), value }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Exact { name, .. }
            | Self::Float { name, .. }
            | Self::Check { name, .. }
            | Self::Flag { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub at: String,
    pub witnesses: Vec<Witness>,
    pub verdict: bool,
}

impl PointReport {
    fn new(at: String, witnesses: Vec<Witness>) -> Self {
        let verdict = verdict_of(&witnesses);
        Self { at, witnesses, verdict }
    }

    pub fn witness(&self, name: &str) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.name() == name)
    }

    pub fn float(&self, name: &str) -> Option<f64> {
        match self.witness(name)? {
            Witness::Float { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        match self.witness(name)? {
            Witness::Flag { value, .. } => Some(*value),
            Witness::Check { holds, .. } => Some(*holds),
            _ => None,
        }
    }
}

/// Conjunction of the `Check` witnesses.
pub fn verdict_of(witnesses: &[Witness]) -> bool {
    witnesses.iter().all(|w| !matches!(w, Witness::Check { holds: false, .. }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Fails,
    /// The hypothesis failed somewhere on the grid; the conclusion was not tested.
    HypothesisViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub claim: String,
    pub parameters: String,
    pub outcome: Outcome,
    pub points: Vec<PointReport>,
    /// Grid comparisons that are reported but not certified.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub informational: Vec<PointReport>,
}

impl ComparisonReport {
    fn judged(claim: &str, parameters: String, points: Vec<PointReport>) -> Self {
        let outcome = if points.iter().all(|p| p.verdict) { Outcome::Holds } else { Outcome::Fails };
        Self { claim: claim.into(), parameters, outcome, points, informational: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub fn point(&self, at: &str) -> Option<&PointReport> {
        self.points.iter().find(|p| p.at == at)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let outcome = match self.outcome {
            Outcome::Holds => "HOLDS",
            Outcome::Fails => "FAILS",
            Outcome::HypothesisViolated => "HYPOTHESIS VIOLATED",
        };
        writeln!(f, "{}  [{}]  {}", self.claim, self.parameters, outcome)?;
        let width = self.points.iter().map(|p| p.at.len()).max().unwrap_or(0);
        for p in &self.points {
            let mark = if p.verdict { "ok  " } else { "FAIL" };
            write!(f, "  {mark} {:width$}", p.at)?;
            for w in &p.witnesses {
                match w {
                    Witness::Exact { name, value } => write!(f, "  {name}={value}")?,
                    Witness::Float { name, value } => write!(f, "  {name}={value:.6e}")?,
                    Witness::Check { name, holds } | Witness::Flag { name, value: holds } => {
                        write!(f, "  {name}:{}", if *holds { "y" } else { "n" })?
                    }
                }
            }
            writeln!(f)?;
        }
        for p in &self.informational {
            writeln!(f, "  info {:width$}  {}", p.at, if p.verdict { "yes" } else { "no" })?;
        }
        Ok(())
    }
}

fn rpow(base: &Rational, exp: u32) -> Rational {
    let mut out = int(1);
    for _ in 0..exp {
        out *= base;
    }
    out
}

/// `β_k(d) = (d/(d-1))^d C(d,k) d^{-k} / ((d-1)k + d + 1)`.
pub fn beta(d: u32, k: u32) -> Result<Rational, CompareError> {
    if d < 2 || k > d {
        return Err(CompareError::BetaRange { d, k });
    }
    let di = d as i64;
    let lead = rpow(&(int(di) / int(di - 1)), d);
    let c = Rational::from_integer(binomial(d, k));
    let denom = int((di - 1) * k as i64 + di + 1);
    Ok(lead * c / rpow(&int(di), k) / denom)
}

/// `lim ρ₂ = Σ_k (-1)^k β_k(d) - d/(d+1)²` on `T_d`.
pub fn rho2_limit_from_beta(d: u32) -> Result<Rational, CompareError> {
    let mut sum = Rational::zero();
    for k in 0..=d {
        let b = beta(d, k)?;
        if k % 2 == 0 {
            sum += b;
        } else {
            sum -= b;
        }
    }
    let dp1 = int(d as i64 + 1);
    Ok(sum - int(d as i64) / (&dp1 * &dp1))
}

fn layer_dominance_point(d: u32) -> Result<PointReport, CompareError> {
    let betas: Vec<Rational> = (0..=d).map(|k| beta(d, k)).collect::<Result<_, _>>()?;
    let decreasing = betas.windows(2).all(|w| w[1] < w[0]);
    let max_ratio = betas
        .windows(2)
        .map(|w| (&w[1] / &w[0]).to_f64().unwrap_or(f64::NAN))
        .fold(f64::NEG_INFINITY, f64::max);

    let di = d as i64;
    let rho1 = int(1) / int(di + 1);
    let rho2 = rho2_limit_from_beta(d)?;
    let rho2_curve = rho2_display(d)?.limit_at_infinity()?;
    let rho1_curve = rho1_display(d)?.limit_at_infinity()?;

    let partial = &betas[0] - &betas[1] + &betas[2];
    let partial_closed = rpow(&(int(di) / int(di - 1)), d) * int(2 * (di - 1)) / int((di + 1) * (3 * di - 1));
    let bound = int(2 * di + 1) / int((di + 1) * (di + 1));

    Ok(PointReport::new(
        format!("d={d}"),
        vec![
            Witness::exact("rho1_limit", &rho1),
            Witness::exact("rho2_limit", &rho2),
            Witness::exact("beta0-beta1+beta2", &partial),
            Witness::float("max_beta_ratio", max_ratio),
            Witness::check("beta_decreasing", decreasing),
            Witness::check("partial_sum_identity", partial == partial_closed),
            Witness::check("partial_sum_bound", partial < bound),
            Witness::check("rho1_limit_matches_curve", rho1 == rho1_curve),
            Witness::check("rho2_limit_matches_curve", rho2 == rho2_curve),
            Witness::check("rho1_limit>rho2_limit", rho1 > rho2),
        ],
    ))
}

/// Exact check that the first layer's limiting density exceeds the second's
/// on `T_d` for `d = 2..=d_max`, including each step of the bound.
///
/// Finite-time comparisons `ρ₁(t) > ρ₂(t)` for `d ≤ 10` are attached as
/// informational points.
pub fn check_layer_dominance(d_max: u32) -> Result<ComparisonReport, CompareError> {
    if d_max < 2 {
        return Err(CompareError::DMaxTooSmall(d_max));
    }
    let points: Vec<PointReport> =
        (2..=d_max).into_par_iter().map(layer_dominance_point).collect::<Result<_, _>>()?;
    let mut report = ComparisonReport::judged("layer_dominance", format!("d=2..{d_max}"), points);
    let times = [0.5, 1.0, 2.0, 5.0, 10.0];
    report.informational = (2..=d_max.min(10))
        .into_par_iter()
        .map(|d| -> Result<Vec<PointReport>, CompareError> {
            let dens = regular_densities(d)?;
            Ok(times
                .iter()
                .map(|&t| {
                    let (r1, r2) = (dens.rho1.eval(t), dens.rho2.eval(t));
                    PointReport::new(
                        format!("d={d} t={t}"),
                        vec![
                            Witness::float("rho1", r1),
                            Witness::float("rho2", r2),
                            Witness::check("rho1>rho2", r1 > r2),
                        ],
                    )
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(report)
}

fn check_grid(grid: &[f64]) -> Result<(), CompareError> {
    if grid.is_empty() {
        Err(CompareError::EmptyGrid)
    } else {
        Ok(())
    }
}

/// Generating-function domination: if `G_S(s) > G_T(s)` on `(0, 1)` then the
/// first-layer density of `S` exceeds that of `T`.
///
/// The hypothesis and conclusion are checked on `t_grid` with `s = e^{-t}`.
/// With `γ = ℚρ₁^S − ℚρ₁^T`, the identity `γ'(t) = e^{-t}(G_S(e^{-t}) − G_T(e^{-t}))`
/// is checked to [`GAMMA_PRIME_TOLERANCE`] and `γ(0) = 0` exactly.
pub fn check_gf_dominance(
    s: &DegreeDistribution,
    t: &DegreeDistribution,
    t_grid: &[f64],
) -> Result<ComparisonReport, CompareError> {
    check_grid(t_grid)?;
    let parameters = format!("S={s}, T={t}, {} grid points", t_grid.len());
    let gamma = &qrho1_display(s)? - &qrho1_display(t)?;
    let gamma_prime = gamma.derivative();
    let gamma0 = gamma.value_at_zero();
    let origin = PointReport::new(
        "t=0".into(),
        vec![Witness::exact("gamma(0)", &gamma0), Witness::check("gamma(0)=0", gamma0.is_zero())],
    );

    let mut hypothesis_points = Vec::with_capacity(t_grid.len());
    let mut hypothesis = true;
    let mut gaps = Vec::with_capacity(t_grid.len());
    for &time in t_grid {
        let x = (-time).exp();
        let (gs, gt) = (s.gen_fun(x)?, t.gen_fun(x)?);
        hypothesis &= gs > gt;
        gaps.push((gs, gt));
        hypothesis_points.push(PointReport::new(
            format!("t={time}"),
            vec![Witness::float("G_S", gs), Witness::float("G_T", gt), Witness::check("G_S>G_T", gs > gt)],
        ));
    }
    if !hypothesis {
        let mut points = vec![origin];
        points.extend(hypothesis_points);
        return Ok(ComparisonReport {
            claim: "gf_dominance".into(),
            parameters,
            outcome: Outcome::HypothesisViolated,
            points,
            informational: Vec::new(),
        });
    }

    let mut points = vec![origin];
    for ((&time, (gs, gt)), mut point) in t_grid.iter().zip(gaps).zip(hypothesis_points) {
        let g = gamma.eval(time);
        let lhs = gamma_prime.eval(time);
        let rhs = (-time).exp() * (gs - gt);
        point.witnesses.extend([
            Witness::float("gamma", g),
            Witness::float("gamma_prime_error", (lhs - rhs).abs()),
            Witness::check("gamma>0", g > 0.0),
            Witness::check("gamma_prime_identity", (lhs - rhs).abs() <= GAMMA_PRIME_TOLERANCE),
        ]);
        points.push(PointReport::new(point.at, point.witnesses));
    }
    Ok(ComparisonReport::judged("gf_dominance", parameters, points))
}

/// `g_t(k) = (1 - e^{-(k+1)t})/(k+1)` for real `k`.
pub fn g(t: f64, k: f64) -> f64 {
    -(-(k + 1.0) * t).exp_m1() / (k + 1.0)
}

/// Closed form of `∂²g_t/∂k²`,
/// `2e^{-(k+1)t}/(1+k)³ (e^{(k+1)t} - 1 - x - x²/2)` with `x = (k+1)t`.
pub fn g_second_closed(t: f64, k: f64) -> f64 {
    let x = (k + 1.0) * t;
    let tail = x.exp_m1() - x - 0.5 * x * x;
    2.0 * (-x).exp() / (k + 1.0).powi(3) * tail
}

/// `∂²g_t/∂k²` by central differences with step `h` and one Richardson step.
pub fn g_second_numeric(t: f64, k: f64, h: f64) -> f64 {
    let central = |h: f64| (g(t, k + h) - 2.0 * g(t, k) + g(t, k - h)) / (h * h);
    let coarse = central(h);
    let fine = central(0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

/// Convexity of `k ↦ g_t(k)` on `k_grid × t_grid`.
pub fn convexity_points(k_grid: &[f64], t_grid: &[f64]) -> Vec<PointReport> {
    let mut points = Vec::with_capacity(k_grid.len() * t_grid.len());
    for &t in t_grid {
        for &k in k_grid {
            let numeric = g_second_numeric(t, k, CONVEXITY_STEP);
            let closed = g_second_closed(t, k);
            points.push(PointReport::new(
                format!("convexity t={t} k={k}"),
                vec![
                    Witness::float("g''_numeric", numeric),
                    Witness::float("g''_closed", closed),
                    Witness::check("g''>=tol", numeric >= CONVEXITY_TOLERANCE),
                    Witness::check("closed_form_agrees", (numeric - closed).abs() <= CONVEXITY_AGREEMENT),
                ],
            ));
        }
    }
    points
}

/// `k ∈ [2, 10]` in steps of 1/2.
pub fn default_k_grid() -> Vec<f64> {
    (0..=16).map(|i| 2.0 + 0.5 * i as f64).collect()
}

/// Random against regular at equal mean degree: `ℚρ₁^S(t) ≥ ρ₁^{T_d}(t)`.
///
/// Records whether the gain `ℚρ₁^S − ρ₁^{T_d}` is identically zero
/// (`equality`) and, per point, whether it is strictly positive. Convexity of
/// `g_t` is checked on `k ∈ [2, 10]` and the same grid.
pub fn check_jensen(d: u32, s: &DegreeDistribution, t_grid: &[f64]) -> Result<ComparisonReport, CompareError> {
    check_grid(t_grid)?;
    let mean = s.mean_degree();
    if mean != int(d as i64) {
        return Err(CompareError::MeanMismatch { expected: d, actual: mean.to_string() });
    }
    let random = qrho1_display(s)?;
    let regular = rho1_display(d)?;
    let gain = &random - &regular;
    let identical = gain.is_zero();
    let mut points = vec![PointReport::new(
        "gain".into(),
        vec![Witness::flag("equality", identical), Witness::check("gain(0)=0", gain.value_at_zero().is_zero())],
    )];
    for &t in t_grid {
        let g = gain.eval(t);
        points.push(PointReport::new(
            format!("t={t}"),
            vec![
                Witness::float("Qrho1_S", random.eval(t)),
                Witness::float("rho1_d", regular.eval(t)),
                Witness::float("gain", g),
                Witness::check("gain>=0", identical || g >= 0.0),
                Witness::flag("strict", g > 0.0),
            ],
        ));
    }
    points.extend(convexity_points(&default_k_grid(), t_grid));
    Ok(ComparisonReport::judged("jensen", format!("d={d}, S={s}"), points))
}

/// Two atoms `(mean - j, 1/2), (mean + j, 1/2)`; `j = 0` is the point mass.
pub fn spread_distribution(mean: u32, spread: u32) -> Result<DegreeDistribution, CompareError> {
    if spread == 0 {
        return Ok(DegreeDistribution::regular(mean)?);
    }
    if mean < spread + 2 {
        return Err(CompareError::SpreadTooWide { mean, spread });
    }
    let half = int(1) / int(2);
    Ok(DegreeDistribution::new(vec![(mean - spread, half.clone()), (mean + spread, half)])?)
}

/// First-layer gain over `T_mean` for spreads `0..=max_spread`: nonnegative
/// and nondecreasing in the spread at every grid time.
pub fn check_spread_family(mean: u32, max_spread: u32, t_grid: &[f64]) -> Result<ComparisonReport, CompareError> {
    check_grid(t_grid)?;
    let regular = rho1_display(mean)?;
    let gains: Vec<ExpPoly> = (0..=max_spread)
        .map(|j| Ok(&qrho1_display(&spread_distribution(mean, j)?)? - &regular))
        .collect::<Result<_, CompareError>>()?;
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let values: Vec<f64> = gains.iter().map(|g| g.eval(t)).collect();
        let mut witnesses: Vec<Witness> =
            values.iter().enumerate().map(|(j, v)| Witness::float(&format!("gain[{j}]"), *v)).collect();
        witnesses.push(Witness::check("point_mass_zero", gains[0].is_zero()));
        witnesses.push(Witness::check("nonnegative", values.iter().all(|v| *v >= 0.0)));
        witnesses.push(Witness::check("nondecreasing", values.windows(2).all(|w| w[1] >= w[0])));
        witnesses.push(Witness::flag("strict_for_spread", values[1..].iter().all(|v| *v > 0.0)));
        points.push(PointReport::new(format!("t={t}"), witnesses));
    }
    Ok(ComparisonReport::judged("jensen_spread", format!("mean={mean}, spread=0..{max_spread}"), points))
}
