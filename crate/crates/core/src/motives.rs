//! Single-site pattern probabilities on the line from hand-derived motive
//! systems.
//!
//! A motive is a local space-time configuration whose probability feeds the
//! rate equation of a pattern. Each [`MotiveRecord`] defines one motive either
//! as a product of known functions and earlier motives, or through a linear
//! rate equation `y' = Σ w_j f_j − λ y`, `y(0) = 0`. Records are solved in
//! order by exact [`ExpPoly`] calculus, so a new pattern needs only a new list
//! of records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{s_conditional, AnalyticError};
use crate::exppoly::{int, rational_string, ExpPoly, ExpPolyError, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotiveError {
    #[error("motive {0:?} is referenced before it is defined")]
    UnknownMotive(String),
    #[error("motive {0:?} is defined twice")]
    DuplicateName(String),
    #[error("no motive system is encoded for pattern {0}")]
    UnsupportedPattern(String),
    #[error("motive system is empty")]
    Empty,
    #[error(transparent)]
    ExpPoly(#[from] ExpPolyError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// An earlier motive of the same system.
    Motive(String),
    /// A fixed function.
    Known(ExpPoly),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    #[serde(with = "rational_string")]
    pub weight: Rational,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Definition {
    /// Product of independent factors.
    Product { factors: Vec<Source> },
    /// `y' = Σ weight · source − decay · y`, `y(0) = 0`.
    Rate {
        #[serde(with = "rational_string")]
        decay: Rational,
        forcing: Vec<Weighted>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotiveRecord {
    pub name: String,
    pub definition: Definition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motive {
    pub name: String,
    pub definition: Definition,
    pub closed_form: ExpPoly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotiveSystem {
    pub motives: Vec<Motive>,
}

impl MotiveSystem {
    /// Solves the records in order.
    pub fn solve(records: Vec<MotiveRecord>) -> Result<Self, MotiveError> {
        if records.is_empty() {
            return Err(MotiveError::Empty);
        }
        let mut motives: Vec<Motive> = Vec::with_capacity(records.len());
        for MotiveRecord { name, definition } in records {
            if motives.iter().any(|m| m.name == name) {
                return Err(MotiveError::DuplicateName(name));
            }
            let closed_form = {
                let resolve = |s: &Source| -> Result<ExpPoly, MotiveError> {
                    match s {
                        Source::Known(f) => Ok(f.clone()),
                        Source::Motive(m) => motives
                            .iter()
                            .find(|x| &x.name == m)
                            .map(|x| x.closed_form.clone())
                            .ok_or_else(|| MotiveError::UnknownMotive(m.clone())),
                    }
                };
                match &definition {
                    Definition::Product { factors } => {
                        let mut acc = ExpPoly::constant(int(1));
                        for f in factors {
                            acc = acc.try_mul(&resolve(f)?)?;
                        }
                        acc
                    }
                    Definition::Rate { decay, forcing } => {
                        let f = forcing_of(forcing, resolve)?;
                        ExpPoly::solve_linear_ode(&f, decay, &int(0))?
                    }
                }
            };
            motives.push(Motive { name, definition, closed_form });
        }
        Ok(Self { motives })
    }

    pub fn get(&self, name: &str) -> Option<&Motive> {
        self.motives.iter().find(|m| m.name == name)
    }

    /// The last motive, which is the pattern being computed.
    pub fn target(&self) -> &Motive {
        self.motives.last().expect("solved systems are non-empty")
    }

    /// Residual `y' + λy − forcing` (rate motives) or `y − Π factors`
    /// (products) for motive `name`; zero when the closed form is exact.
    pub fn residual(&self, name: &str) -> Result<ExpPoly, MotiveError> {
        let m = self.get(name).ok_or_else(|| MotiveError::UnknownMotive(name.into()))?;
        let resolve = |s: &Source| -> Result<ExpPoly, MotiveError> {
            match s {
                Source::Known(f) => Ok(f.clone()),
                Source::Motive(n) => self
                    .get(n)
                    .map(|x| x.closed_form.clone())
                    .ok_or_else(|| MotiveError::UnknownMotive(n.clone())),
            }
        };
        Ok(match &m.definition {
            Definition::Product { factors } => {
                let mut acc = ExpPoly::constant(int(1));
                for f in factors {
                    acc = acc.try_mul(&resolve(f)?)?;
                }
                &m.closed_form - &acc
            }
            Definition::Rate { decay, forcing } => {
                let f = forcing_of(forcing, resolve)?;
                &(&m.closed_form.derivative() + &m.closed_form.scale(decay)) - &f
            }
        })
    }
}

fn forcing_of(
    forcing: &[Weighted],
    resolve: impl Fn(&Source) -> Result<ExpPoly, MotiveError>,
) -> Result<ExpPoly, MotiveError> {
    let mut f = ExpPoly::zero();
    for w in forcing {
        f = &f + &resolve(&w.source)?.scale(&w.weight);
    }
    Ok(f)
}

fn motive(name: &str) -> Source {
    Source::Motive(name.to_string())
}

fn known(f: ExpPoly) -> Source {
    Source::Known(f)
}

fn weighted(weight: i64, source: Source) -> Weighted {
    Weighted { weight: int(weight), source }
}

fn rate(decay: i64, forcing: Vec<Weighted>) -> Definition {
    Definition::Rate { decay: int(decay), forcing }
}

fn record(name: &str, definition: Definition) -> MotiveRecord {
    MotiveRecord { name: name.to_string(), definition }
}

/// Records for the pattern `0101` (layers 1 and 3 occupied, 2 and 4 empty) on
/// the line.
///
/// Positions are `…, l, c, r, …` with `c` the target site; `S = S²(t)`.
/// - `B1`: `l`, `r` and the site left of `l` empty, `c` holds one layer-1 particle.
/// - `B2`: as `B1` but the site left of `l` holds one layer-1 particle.
/// - `A1`: `c` at layer 1 only, `l` at layer 2 only, `r` empty.
/// - `U`: given an empty left neighbor, `c` at layer 1 and `r` at layer 2.
/// - `C1`, `C2`: `U` with the two sites to the left empty, or with the outer
///   one holding a single layer-1 particle.
/// - `A2`: `c` at layer 1, both neighbors at layer 2.
/// - `A3`, `A4`: `A1`, `A2` after `c` has received its layer-3 particle.
/// - `Y`: the target probability.
pub fn pattern_0101_records() -> Result<Vec<MotiveRecord>, MotiveError> {
    let s = s_conditional(2)?;
    let te = |rate: i64| ExpPoly::t_exp(1, int(rate));
    let e = |rate: i64| ExpPoly::exp(int(rate));
    Ok(vec![
        record("B1", Definition::Product { factors: vec![known(te(4))] }),
        record("B2", Definition::Product { factors: vec![known(s.clone()), known(te(3))] }),
        record("A1", rate(3, vec![weighted(1, motive("B1")), weighted(1, motive("B2"))])),
        record("U", rate(2, vec![weighted(1, known(&te(3).scale(&int(2)) - &te(4)))])),
        record("C1", Definition::Product { factors: vec![motive("U"), known(e(2))] }),
        record("C2", Definition::Product { factors: vec![motive("U"), known(s), known(e(1))] }),
        // C1 and C2 each have a mirror image on the other side of c.
        record("A2", rate(3, vec![weighted(2, motive("C1")), weighted(2, motive("C2"))])),
        record("A3", rate(3, vec![weighted(1, motive("A1"))])),
        record("A4", rate(3, vec![weighted(1, motive("A2"))])),
        // A1 and A3 count twice (mirror images); A2 and A4 are symmetric.
        record(
            "Y",
            rate(
                0,
                vec![
                    weighted(2, motive("A1")),
                    weighted(1, motive("A2")),
                    weighted(-2, motive("A3")),
                    weighted(-1, motive("A4")),
                ],
            ),
        ),
    ])
}

/// Solved motive system for `0101`.
pub fn build_motive_system() -> Result<MotiveSystem, MotiveError> {
    MotiveSystem::solve(pattern_0101_records()?)
}

/// Records for a pattern given top-down, if one has been encoded.
pub fn records_for_pattern(pattern: &str) -> Result<Vec<MotiveRecord>, MotiveError> {
    match pattern {
        "0101" => pattern_0101_records(),
        other => Err(MotiveError::UnsupportedPattern(other.to_string())),
    }
}

/// `P_t(0101)` in closed form.
pub fn target_pattern_probability() -> Result<ExpPoly, MotiveError> {
    Ok(build_motive_system()?.target().closed_form.clone())
}
