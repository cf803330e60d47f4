//! Exact exponential polynomials.
//!
//! An [`ExpPoly`] is a finite sum `Σ c · t^k · exp(-a t)` with rational
//! coefficients `c`, rational rates `a ≥ 0` and integer powers `k ≥ 0`. The
//! class is closed under addition, multiplication, differentiation, integration
//! from zero and solving `y' + λy = f` with a rational `λ ≥ 0`, which is every
//! operation needed to derive layer densities and pattern probabilities in
//! closed form.
//!
//! Terms are kept in canonical form: sorted by `(rate, power)`, duplicates
//! merged and zero coefficients dropped. Two functions are equal if and only if
//! their term lists are equal, so derived formulas can be compared exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Arbitrary precision rational used throughout the crate.
pub type Rational = BigRational;

/// Default upper bound on the number of terms a product may produce.
pub const DEFAULT_TERM_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpPolyError {
    #[error("rate {0} is negative; exponential polynomials need rates >= 0")]
    NegativeRate(Rational),
    #[error("decay rate {0} is negative")]
    NegativeDecay(Rational),
    #[error("result has {count} terms, exceeding the cap of {cap}")]
    TermCap { count: usize, cap: usize },
    #[error("limit at infinity diverges (polynomial term t^{0} with rate 0)")]
    Divergent(u32),
    #[error("invalid rational {0:?}")]
    BadRational(String),
}

/// Builds a rational from a numerator and denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Builds an integer-valued rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// One term `coeff · t^power · exp(-rate t)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub rate: Rational,
    pub power: u32,
    pub coeff: Rational,
}

impl Term {
    pub fn eval(&self, t: f64) -> f64 {
        let c = self.coeff.to_f64().unwrap_or(f64::NAN);
        let a = self.rate.to_f64().unwrap_or(f64::NAN);
        let poly = if self.power == 0 { 1.0 } else { t.powi(self.power as i32) };
        c * poly * (-a * t).exp()
    }
}

/// Accumulator keyed by `(rate, power)`. Rates may be negative here; that
/// happens transiently inside [`ExpPoly::solve_linear_ode`].
#[derive(Default)]
struct TermMap(BTreeMap<(Rational, u32), Rational>);

impl TermMap {
    fn push(&mut self, rate: Rational, power: u32, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        let slot = self.0.entry((rate, power)).or_insert_with(Rational::zero);
        *slot += coeff;
    }

    fn into_terms(self) -> Vec<Term> {
        self.0
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((rate, power), coeff)| Term { rate, power, coeff })
            .collect()
    }

    /// Antiderivative vanishing at zero, valid for any rational rate.
    fn integrate0(terms: impl IntoIterator<Item = Term>) -> TermMap {
        let mut out = TermMap::default();
        for Term { rate, power, coeff } in terms {
            if rate.is_zero() {
                out.push(Rational::zero(), power + 1, coeff / int(power as i64 + 1));
                continue;
            }
            // ∫₀ᵗ u^k e^{-bu} du = k!/b^{k+1} − e^{-bt} Σ_{j≤k} k!/(j! b^{k−j+1}) t^j
            let k = power;
            let mut kfact = Rational::one();
            for i in 1..=k {
                kfact *= int(i as i64);
            }
            let mut b_pow = Rational::one();
            for _ in 0..=k {
                b_pow *= &rate;
            }
            out.push(Rational::zero(), 0, &coeff * &kfact / &b_pow);
            // Walk j downwards from k so that j! and b^{k−j+1} update incrementally.
            let mut j_fact = kfact.clone();
            let mut b_j = rate.clone();
            for j in (0..=k).rev() {
                let c = -(&coeff * &kfact) / (&j_fact * &b_j);
                out.push(rate.clone(), j, c);
                if j > 0 {
                    j_fact /= int(j as i64);
                    b_j *= &rate;
                }
            }
        }
        out
    }
}

/// Exact function `Σ c t^k e^{-a t}` in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<TermRepr>", into = "Vec<TermRepr>")]
pub struct ExpPoly {
    terms: Vec<Term>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(c, 0, Rational::zero())
    }

    /// `exp(-rate t)`.
    pub fn exp(rate: Rational) -> Self {
        Self::term(Rational::one(), 0, rate)
    }

    /// `t^power exp(-rate t)`.
    pub fn t_exp(power: u32, rate: Rational) -> Self {
        Self::term(Rational::one(), power, rate)
    }

    /// A single term `coeff · t^power · exp(-rate t)`. Panics on a negative rate.
    pub fn term(coeff: Rational, power: u32, rate: Rational) -> Self {
        assert!(!rate.is_negative(), "negative rate {rate}");
        let mut map = TermMap::default();
        map.push(rate, power, coeff);
        Self { terms: map.into_terms() }
    }

    /// Canonicalizes an arbitrary term list.
    pub fn from_terms(terms: impl IntoIterator<Item = Term>) -> Result<Self, ExpPolyError> {
        Self::from_terms_capped(terms, DEFAULT_TERM_CAP)
    }

    pub fn from_terms_capped(
        terms: impl IntoIterator<Item = Term>,
        cap: usize,
    ) -> Result<Self, ExpPolyError> {
        let mut map = TermMap::default();
        for t in terms {
            if t.rate.is_negative() {
                return Err(ExpPolyError::NegativeRate(t.rate));
            }
            map.push(t.rate, t.power, t.coeff);
        }
        let terms = map.into_terms();
        if terms.len() > cap {
            return Err(ExpPolyError::TermCap { count: terms.len(), cap });
        }
        Ok(Self { terms })
    }

    fn from_map(map: TermMap) -> Self {
        let terms = map.into_terms();
        debug_assert!(terms.iter().all(|t| !t.rate.is_negative()));
        Self { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `t^power exp(-rate t)`, zero when absent.
    pub fn coeff(&self, rate: &Rational, power: u32) -> Rational {
        self.terms
            .iter()
            .find(|t| &t.rate == rate && t.power == power)
            .map(|t| t.coeff.clone())
            .unwrap_or_else(Rational::zero)
    }

    /// Shorthand for integer rates.
    pub fn coeff_at(&self, rate: i64, power: u32) -> Rational {
        self.coeff(&int(rate), power)
    }

    pub fn scale(&self, r: &Rational) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: &t.coeff * r, ..t.clone() })
                .collect(),
        }
    }

    /// Multiplies by `exp(-rate t)`, shifting every rate.
    pub fn shift_rate(&self, rate: &Rational) -> Self {
        assert!(!rate.is_negative(), "negative rate {rate}");
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term { rate: &t.rate + rate, ..t.clone() })
                .collect(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, ExpPolyError> {
        Self::from_terms(self.terms.iter().chain(&other.terms).cloned())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, ExpPolyError> {
        self.mul_capped(other, DEFAULT_TERM_CAP)
    }

    pub fn mul_capped(&self, other: &Self, cap: usize) -> Result<Self, ExpPolyError> {
        let mut map = TermMap::default();
        for a in &self.terms {
            for b in &other.terms {
                map.push(&a.rate + &b.rate, a.power + b.power, &a.coeff * &b.coeff);
            }
            if map.0.len() > cap {
                return Err(ExpPolyError::TermCap { count: map.0.len(), cap });
            }
        }
        let out = Self::from_map(map);
        if out.len() > cap {
            return Err(ExpPolyError::TermCap { count: out.len(), cap });
        }
        Ok(out)
    }

    pub fn try_pow(&self, n: u32) -> Result<Self, ExpPolyError> {
        let mut acc = Self::constant(Rational::one());
        for _ in 0..n {
            acc = acc.try_mul(self)?;
        }
        Ok(acc)
    }

    pub fn derivative(&self) -> Self {
        let mut map = TermMap::default();
        for t in &self.terms {
            if t.power > 0 {
                map.push(t.rate.clone(), t.power - 1, &t.coeff * int(t.power as i64));
            }
            map.push(t.rate.clone(), t.power, -(&t.coeff * &t.rate));
        }
        Self::from_map(map)
    }

    /// `F(t) = ∫₀ᵗ f(u) du`.
    pub fn integrate0(&self) -> Self {
        Self::from_map(TermMap::integrate0(self.terms.iter().cloned()))
    }

    /// Unique solution of `y' + decay · y = forcing`, `y(0) = y0`, computed as
    /// `e^{-λt} (y0 + ∫₀ᵗ e^{λu} f(u) du)`. Forcing terms with rate equal to
    /// the decay come out as higher powers of `t`.
    pub fn solve_linear_ode(
        forcing: &Self,
        decay: &Rational,
        y0: &Rational,
    ) -> Result<Self, ExpPolyError> {
        if decay.is_negative() {
            return Err(ExpPolyError::NegativeDecay(decay.clone()));
        }
        let shifted = forcing.terms.iter().map(|t| Term {
            rate: &t.rate - decay,
            power: t.power,
            coeff: t.coeff.clone(),
        });
        let mut inner = TermMap::integrate0(shifted);
        inner.push(Rational::zero(), 0, y0.clone());
        let mut out = TermMap::default();
        for t in inner.into_terms() {
            out.push(t.rate + decay, t.power, t.coeff);
        }
        Ok(Self::from_map(out))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    /// Exact value at `t = 0`: the sum of the power-zero coefficients.
    pub fn value_at_zero(&self) -> Rational {
        self.terms
            .iter()
            .filter(|t| t.power == 0)
            .fold(Rational::zero(), |acc, t| acc + &t.coeff)
    }

    /// Exact limit as `t → ∞`: the constant term, or an error when a pure
    /// polynomial term `t^k`, `k > 0`, is present.
    pub fn limit_at_infinity(&self) -> Result<Rational, ExpPolyError> {
        let mut limit = Rational::zero();
        for t in self.terms.iter().filter(|t| t.rate.is_zero()) {
            if t.power > 0 {
                return Err(ExpPolyError::Divergent(t.power));
            }
            limit = t.coeff.clone();
        }
        Ok(limit)
    }
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let negative = t.coeff.is_negative();
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            write!(f, "{}", t.coeff.abs())?;
            match t.power {
                0 => {}
                1 => write!(f, " * t")?,
                k => write!(f, " * t^{k}")?,
            }
            if !t.rate.is_zero() {
                write!(f, " * exp(-{} t)", t.rate)?;
            }
        }
        Ok(())
    }
}

impl Add for &ExpPoly {
    type Output = ExpPoly;
    fn add(self, rhs: &ExpPoly) -> ExpPoly {
        let mut map = TermMap::default();
        for t in self.terms.iter().chain(&rhs.terms) {
            map.push(t.rate.clone(), t.power, t.coeff.clone());
        }
        ExpPoly::from_map(map)
    }
}

impl Sub for &ExpPoly {
    type Output = ExpPoly;
    fn sub(self, rhs: &ExpPoly) -> ExpPoly {
        self + &(-rhs)
    }
}

impl Neg for &ExpPoly {
    type Output = ExpPoly;
    fn neg(self) -> ExpPoly {
        ExpPoly {
            terms: self.terms.iter().map(|t| Term { coeff: -&t.coeff, ..t.clone() }).collect(),
        }
    }
}

/// Panics if the product exceeds [`DEFAULT_TERM_CAP`]; use
/// [`ExpPoly::try_mul`] where that can happen.
impl Mul for &ExpPoly {
    type Output = ExpPoly;
    fn mul(self, rhs: &ExpPoly) -> ExpPoly {
        self.try_mul(rhs).expect("exponential polynomial product exceeded term cap")
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for ExpPoly {
            type Output = ExpPoly;
            fn $m(self, rhs: ExpPoly) -> ExpPoly {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for ExpPoly {
    type Output = ExpPoly;
    fn neg(self) -> ExpPoly {
        -&self
    }
}

impl std::iter::Sum for ExpPoly {
    fn sum<I: Iterator<Item = ExpPoly>>(iter: I) -> Self {
        let mut map = TermMap::default();
        for p in iter {
            for t in p.terms {
                map.push(t.rate, t.power, t.coeff);
            }
        }
        ExpPoly::from_map(map)
    }
}

/// JSON form of a term: rationals as strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermRepr {
    pub rate: String,
    pub power: u32,
    pub coeff: String,
}

impl From<ExpPoly> for Vec<TermRepr> {
    fn from(p: ExpPoly) -> Self {
        p.terms
            .into_iter()
            .map(|t| TermRepr { rate: t.rate.to_string(), power: t.power, coeff: t.coeff.to_string() })
            .collect()
    }
}

impl TryFrom<Vec<TermRepr>> for ExpPoly {
    type Error = ExpPolyError;
    fn try_from(reprs: Vec<TermRepr>) -> Result<Self, Self::Error> {
        let mut terms = Vec::with_capacity(reprs.len());
        for r in reprs {
            terms.push(Term {
                rate: parse_rational(&r.rate)?,
                power: r.power,
                coeff: parse_rational(&r.coeff)?,
            });
        }
        ExpPoly::from_terms(terms)
    }
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<Rational, ExpPolyError> {
    let s = s.trim();
    let bad = || ExpPolyError::BadRational(s.to_string());
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Serde adapter writing a [`Rational`] as `"p/q"`.
pub mod rational_string {
    use super::{parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(a: i64) -> ExpPoly {
        ExpPoly::exp(int(a))
    }

    fn te(k: u32, a: i64) -> ExpPoly {
        ExpPoly::t_exp(k, int(a))
    }

    fn c(n: i64, d: i64) -> ExpPoly {
        ExpPoly::constant(rat(n, d))
    }

    #[test]
    fn products() {
        assert_eq!(&e(1) * &e(2), e(3));
        assert_eq!(&te(1, 1) * &te(1, 1), te(2, 2));
        let one_minus = &c(1, 1) - &e(1);
        let sq = &one_minus * &one_minus;
        assert_eq!(sq, &(&c(1, 1) - &e(1).scale(&int(2))) + &e(2));
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let p = &e(2) - &e(2);
        assert!(p.is_zero());
        assert_eq!(p.to_string(), "0");
    }

    #[test]
    fn integrals() {
        assert_eq!(e(1).integrate0(), &c(1, 1) - &e(1));
        // (1 − e^{−dt})/d
        assert_eq!(e(3).integrate0(), (&c(1, 1) - &e(3)).scale(&rat(1, 3)));
        assert_eq!(te(1, 1).integrate0(), &(&c(1, 1) - &e(1)) - &te(1, 1));
        // pure polynomial
        assert_eq!(te(2, 0).integrate0(), te(3, 0).scale(&rat(1, 3)));
    }

    #[test]
    fn ode_a1_display() {
        let forcing = &te(1, 4).scale(&int(2)) - &te(1, 5);
        let y = ExpPoly::solve_linear_ode(&forcing, &int(3), &int(0)).unwrap();
        let expected: ExpPoly = [
            e(3).scale(&rat(7, 4)),
            e(4).scale(&int(-2)),
            te(1, 4).scale(&int(-2)),
            e(5).scale(&rat(1, 4)),
            te(1, 5).scale(&rat(1, 2)),
        ]
        .into_iter()
        .sum();
        assert_eq!(y, expected);
    }

    #[test]
    fn ode_u_display() {
        let forcing = &te(1, 3).scale(&int(2)) - &te(1, 4);
        let y = ExpPoly::solve_linear_ode(&forcing, &int(2), &int(0)).unwrap();
        let expected: ExpPoly = [
            e(2).scale(&rat(7, 4)),
            te(1, 3).scale(&int(-2)),
            e(3).scale(&int(-2)),
            te(1, 4).scale(&rat(1, 2)),
            e(4).scale(&rat(1, 4)),
        ]
        .into_iter()
        .sum();
        assert_eq!(y, expected);
    }

    #[test]
    fn homogeneous_ode() {
        let y = ExpPoly::solve_linear_ode(&ExpPoly::zero(), &int(1), &int(1)).unwrap();
        assert_eq!(y, e(1));
    }

    #[test]
    fn resonant_forcing_raises_power() {
        // y' + 3y = e^{-3t}, y(0)=0 → t e^{-3t}
        let y = ExpPoly::solve_linear_ode(&e(3), &int(3), &int(0)).unwrap();
        assert_eq!(y, te(1, 3));
    }

    #[test]
    fn negative_decay_rejected() {
        let err = ExpPoly::solve_linear_ode(&e(1), &int(-1), &int(0)).unwrap_err();
        assert!(matches!(err, ExpPolyError::NegativeDecay(_)));
    }

    #[test]
    fn limits_and_values() {
        let f = &c(1, 1) - &e(1);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.value_at_zero(), int(0));
        assert_eq!(f.limit_at_infinity().unwrap(), int(1));
        assert!(matches!(te(1, 0).limit_at_infinity(), Err(ExpPolyError::Divergent(1))));
    }

    #[test]
    fn term_cap_enforced() {
        let p: ExpPoly = (1..=200).map(e).sum();
        let err = p.mul_capped(&p, 100).unwrap_err();
        assert!(matches!(err, ExpPolyError::TermCap { cap: 100, .. }));
        assert!(p.try_mul(&p).is_ok());
    }

    #[test]
    fn negative_rate_rejected() {
        let err = ExpPoly::from_terms([Term { rate: int(-1), power: 0, coeff: int(1) }]);
        assert!(matches!(err, Err(ExpPolyError::NegativeRate(_))));
    }

    #[test]
    fn rendering() {
        let p = &(&c(34, 735) - &e(3).scale(&rat(1991, 432))) + &te(2, 5);
        assert_eq!(p.to_string(), "34/735 - 1991/432 * exp(-3 t) + 1 * t^2 * exp(-5 t)");
    }

    #[test]
    fn json_round_trip() {
        let p = &te(1, 3).scale(&rat(235, 144)) - &c(34, 735);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"235/144\""));
        let back: ExpPoly = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let bad = r#"[{"rate":"-1","power":0,"coeff":"1"}]"#;
        assert!(serde_json::from_str::<ExpPoly>(bad).is_err());
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("1/2").unwrap(), rat(1, 2));
        assert_eq!(parse_rational(" 3 ").unwrap(), int(3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
