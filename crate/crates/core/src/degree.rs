//! Degree distributions on `{2, 3, ...}` with finite support.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exppoly::{int, parse_rational, Rational};

/// Slack allowed when converting real-valued weights.
pub const REAL_WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DegreeError {
    #[error("degree {0} is below 2; trees must have no open ends")]
    DegreeTooSmall(u32),
    #[error("distribution has no atoms")]
    Empty,
    #[error("degree {0} appears more than once")]
    DuplicateDegree(u32),
    #[error("weight {weight} of degree {degree} is not strictly positive")]
    NonPositiveWeight { degree: u32, weight: String },
    #[error("weights sum to {0}, not 1")]
    NotNormalized(String),
    #[error("s = {0} is outside [0, 1]")]
    OutOfDomain(f64),
    #[error("cannot parse atom {0:?}; expected k:weight")]
    BadAtom(String),
}

/// Law `ℚ(D = k) = a_k` with exact rational weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct DegreeDistribution {
    atoms: Vec<(u32, Rational)>,
    name: Option<String>,
}

impl DegreeDistribution {
    /// Validates and sorts the atoms. Weights must be positive and sum to
    /// exactly one.
    pub fn new(mut atoms: Vec<(u32, Rational)>) -> Result<Self, DegreeError> {
        if atoms.is_empty() {
            return Err(DegreeError::Empty);
        }
        atoms.sort_by_key(|(k, _)| *k);
        for w in atoms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DegreeError::DuplicateDegree(w[0].0));
            }
        }
        let mut total = Rational::zero();
        for (k, a) in &atoms {
            if *k < 2 {
                return Err(DegreeError::DegreeTooSmall(*k));
            }
            if !a.is_positive() {
                return Err(DegreeError::NonPositiveWeight { degree: *k, weight: a.to_string() });
            }
            total += a;
        }
        if !total.is_one() {
            return Err(DegreeError::NotNormalized(total.to_string()));
        }
        Ok(Self { atoms, name: None })
    }

    /// Point mass at `d`: the regular tree `T_d`.
    pub fn regular(d: u32) -> Result<Self, DegreeError> {
        let mut dist = Self::new(vec![(d, Rational::one())])?;
        dist.name = Some(format!("regular({d})"));
        Ok(dist)
    }

    /// Normalizes real weights, rationalizes each to within
    /// [`REAL_WEIGHT_TOLERANCE`] and gives the last atom the exact remainder.
    pub fn from_real_weights(atoms: &[(u32, f64)]) -> Result<Self, DegreeError> {
        if atoms.is_empty() {
            return Err(DegreeError::Empty);
        }
        for &(k, w) in atoms {
            if !(w.is_finite() && w > 0.0) {
                return Err(DegreeError::NonPositiveWeight { degree: k, weight: w.to_string() });
            }
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        let mut exact = Vec::with_capacity(atoms.len());
        let mut used = Rational::zero();
        for &(k, w) in &atoms[..atoms.len() - 1] {
            let r = rationalize(w / total, REAL_WEIGHT_TOLERANCE);
            used += &r;
            exact.push((k, r));
        }
        let (k_last, w_last) = atoms[atoms.len() - 1];
        let rest = Rational::one() - used;
        let drift = (rest.to_f64().unwrap_or(f64::NAN) - w_last / total).abs();
        if drift > REAL_WEIGHT_TOLERANCE * atoms.len() as f64 {
            return Err(DegreeError::NotNormalized(format!("{}", total)));
        }
        exact.push((k_last, rest));
        Self::new(exact)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn atoms(&self) -> &[(u32, Rational)] {
        &self.atoms
    }

    pub fn max_degree(&self) -> u32 {
        self.atoms.last().map(|(k, _)| *k).unwrap_or(0)
    }

    /// `Some(d)` for a point mass.
    pub fn as_regular(&self) -> Option<u32> {
        match self.atoms.as_slice() {
            [(d, _)] => Some(*d),
            _ => None,
        }
    }

    /// `G(s) = Σ a_k s^k` for `s ∈ [0, 1]`.
    pub fn gen_fun(&self, s: f64) -> Result<f64, DegreeError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(DegreeError::OutOfDomain(s));
        }
        if s == 1.0 {
            return Ok(1.0);
        }
        Ok(self
            .atoms
            .iter()
            .map(|(k, a)| a.to_f64().unwrap_or(f64::NAN) * s.powi(*k as i32))
            .sum())
    }

    pub fn mean_degree(&self) -> Rational {
        self.atoms.iter().map(|(k, a)| a * int(*k as i64)).sum()
    }

    /// Weights as floats, in atom order, for sampling.
    pub fn float_weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|(_, a)| a.to_f64().unwrap_or(0.0)).collect()
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, a)) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}:{a}")?;
        }
        Ok(())
    }
}

/// Parses `k:weight[,k:weight...]` with rational weights, e.g. `2:1/2,3:1/2`.
impl FromStr for DegreeDistribution {
    type Err = DegreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut atoms = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || DegreeError::BadAtom(part.to_string());
            let (k, w) = part.split_once(':').ok_or_else(bad)?;
            let k: u32 = k.trim().parse().map_err(|_| bad())?;
            let w = parse_rational(w).map_err(|_| bad())?;
            atoms.push((k, w));
        }
        Self::new(atoms)
    }
}

/// `{"atoms": [[k, "p/q"], ...], "name": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionRepr {
    pub atoms: Vec<(u32, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl From<DegreeDistribution> for DistributionRepr {
    fn from(d: DegreeDistribution) -> Self {
        Self {
            atoms: d.atoms.into_iter().map(|(k, a)| (k, a.to_string())).collect(),
            name: d.name,
        }
    }
}

impl TryFrom<DistributionRepr> for DegreeDistribution {
    type Error = DegreeError;
    fn try_from(r: DistributionRepr) -> Result<Self, Self::Error> {
        let mut atoms = Vec::with_capacity(r.atoms.len());
        for (k, w) in r.atoms {
            let a = parse_rational(&w).map_err(|_| DegreeError::BadAtom(format!("{k}:{w}")))?;
            atoms.push((k, a));
        }
        let mut dist = Self::new(atoms)?;
        dist.name = r.name;
        Ok(dist)
    }
}

/// Best rational approximation within `tol` via continued fractions.
fn rationalize(x: f64, tol: f64) -> Rational {
    use num_bigint::BigInt;
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let approx = Rational::new(h1.clone(), k1.clone());
        if (approx.to_f64().unwrap_or(f64::NAN) - x).abs() <= tol {
            return approx;
        }
        let frac = rem - a;
        if frac == 0.0 {
            break;
        }
        rem = 1.0 / frac;
    }
    Rational::new(h1, k1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exppoly::rat;

    fn two_point(a: u32, b: u32) -> DegreeDistribution {
        DegreeDistribution::new(vec![(a, rat(1, 2)), (b, rat(1, 2))]).unwrap()
    }

    #[test]
    fn regular_point_mass() {
        let d3 = DegreeDistribution::regular(3).unwrap();
        assert_eq!(d3.atoms(), &[(3, int(1))]);
        assert_eq!(DegreeDistribution::regular(2).unwrap().as_regular(), Some(2));
        assert_eq!(DegreeDistribution::regular(1), Err(DegreeError::DegreeTooSmall(1)));
    }

    #[test]
    fn generating_function() {
        let d2 = DegreeDistribution::regular(2).unwrap();
        assert_eq!(d2.gen_fun(0.5).unwrap(), 0.25);
        assert_eq!(two_point(2, 4).gen_fun(1.0).unwrap(), 1.0);
        assert!((two_point(2, 3).gen_fun(0.5).unwrap() - 0.1875).abs() < 1e-15);
        assert!(matches!(d2.gen_fun(1.5), Err(DegreeError::OutOfDomain(_))));
        assert!(matches!(d2.gen_fun(-0.1), Err(DegreeError::OutOfDomain(_))));
    }

    #[test]
    fn means() {
        assert_eq!(DegreeDistribution::regular(3).unwrap().mean_degree(), int(3));
        assert_eq!(two_point(2, 4).mean_degree(), int(3));
        let thirds: DegreeDistribution = "2:1/3,3:1/3,4:1/3".parse().unwrap();
        assert_eq!(thirds.mean_degree(), int(3));
    }

    #[test]
    fn validation_errors() {
        assert_eq!(DegreeDistribution::new(vec![]), Err(DegreeError::Empty));
        assert!(matches!(
            DegreeDistribution::new(vec![(2, rat(1, 2)), (2, rat(1, 2))]),
            Err(DegreeError::DuplicateDegree(2))
        ));
        assert!(matches!(
            DegreeDistribution::new(vec![(2, rat(1, 2)), (3, rat(1, 3))]),
            Err(DegreeError::NotNormalized(_))
        ));
        assert!(matches!(
            DegreeDistribution::new(vec![(2, rat(3, 2)), (3, rat(-1, 2))]),
            Err(DegreeError::NonPositiveWeight { degree: 3, .. })
        ));
        assert!("2-1".parse::<DegreeDistribution>().is_err());
    }

    #[test]
    fn atoms_are_sorted() {
        let d: DegreeDistribution = "4:1/4,2:3/4".parse().unwrap();
        assert_eq!(d.atoms()[0].0, 2);
        assert_eq!(d.to_string(), "2:3/4,4:1/4");
    }

    #[test]
    fn real_weights_rationalize() {
        let d = DegreeDistribution::from_real_weights(&[(2, 1.0), (3, 2.0)]).unwrap();
        assert_eq!(d.atoms(), &[(2, rat(1, 3)), (3, rat(2, 3))]);
        let d = DegreeDistribution::from_real_weights(&[(2, 0.25), (5, 0.75)]).unwrap();
        assert_eq!(d.atoms()[0].1, rat(1, 4));
        assert!(DegreeDistribution::from_real_weights(&[(2, 0.0)]).is_err());
    }

    #[test]
    fn json_shape() {
        let d = two_point(2, 3);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"atoms":[[2,"1/2"],[3,"1/2"]]}"#);
        let back: DegreeDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<DegreeDistribution>(r#"{"atoms":[[1,"1"]]}"#).is_err());
    }
}
