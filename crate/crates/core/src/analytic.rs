//! Closed-form layer densities on regular and random trees.
//!
//! Notation: `D_s(t)` is the probability that the root has two-layer code
//! `m = s` at time `t`; `rho1 = D1 + D3` and `rho2 = D2 + D3` are the first and
//! second layer densities. Regular-tree quantities are built two ways: by
//! integrating the exact transition rates with [`ExpPoly`] calculus, and
//! directly from the closed displays. Tree-averaged quantities average over a
//! [`DegreeDistribution`] at the root and its neighbors.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::curve::DensityCurve;
use crate::degree::{DegreeDistribution, DegreeError};
use crate::exppoly::{int, ExpPoly, ExpPolyError, Rational};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error(transparent)]
    ExpPoly(#[from] ExpPolyError),
    #[error("closed form needs exactly two atoms, distribution has {0}")]
    NotTwoAtom(usize),
    #[error("x = {0} must be at least 2")]
    BadRateIndex(u32),
}

pub(crate) fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn binom(n: u32, k: u32) -> Rational {
    Rational::from_integer(binomial(n, k))
}

fn check_degree(d: u32) -> Result<(), DegreeError> {
    if d < 2 {
        return Err(DegreeError::DegreeTooSmall(d));
    }
    Ok(())
}

fn e(rate: u32) -> ExpPoly {
    ExpPoly::exp(int(rate as i64))
}

fn te(rate: u32) -> ExpPoly {
    ExpPoly::t_exp(1, int(rate as i64))
}

fn konst(c: Rational) -> ExpPoly {
    ExpPoly::constant(c)
}

/// `S^d(t)`: probability that a neighbor of an empty vertex holds exactly one
/// first-layer particle, `e^{-t}(1 - e^{-(d-1)t})/(d-1)`.
pub fn s_conditional(d: u32) -> Result<ExpPoly, AnalyticError> {
    check_degree(d)?;
    Ok((&e(1) - &e(d)).scale(&Rational::new(1.into(), (d - 1).into())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularDensities {
    pub d: u32,
    pub d1: ExpPoly,
    pub d2: ExpPoly,
    pub d3: ExpPoly,
    pub rho1: ExpPoly,
    pub rho2: ExpPoly,
}

/// Densities on `T_d`, obtained by integrating the transition rates:
/// `D1' = e^{-(d+1)t} - t e^{-(d+1)t}`,
/// `D2' = e^{-t} Σ_{k≥1} C(d,k) S^k e^{-(d-k)t}`,
/// `D3' = t e^{-(d+1)t}`.
pub fn regular_densities(d: u32) -> Result<RegularDensities, AnalyticError> {
    check_degree(d)?;
    let s = s_conditional(d)?;
    let d1 = (&e(d + 1) - &te(d + 1)).integrate0();
    let d3 = te(d + 1).integrate0();
    let mut d2_rate = ExpPoly::zero();
    let mut s_pow = ExpPoly::constant(Rational::one());
    for k in 1..=d {
        s_pow = s_pow.try_mul(&s)?;
        d2_rate = &d2_rate + &s_pow.shift_rate(&int((d - k + 1) as i64)).scale(&binom(d, k));
    }
    let d2 = d2_rate.integrate0();
    let rho1 = &d1 + &d3;
    let rho2 = &d2 + &d3;
    Ok(RegularDensities { d, d1, d2, d3, rho1, rho2 })
}

/// `(d/(d-1))^d`.
fn k_factor(d: u32) -> Rational {
    let base = Rational::new(d.into(), (d - 1).into());
    (0..d).fold(Rational::one(), |acc, _| acc * &base)
}

/// Coefficients `C(d,k) d^{-k} (-1)^k / r_k` and rates `r_k = (d-1)k + d + 1`.
fn alternating_terms(d: u32) -> Vec<(Rational, u32)> {
    let mut d_pow = Rational::one();
    (0..=d)
        .map(|k| {
            let r = (d - 1) * k + d + 1;
            let sign = if k % 2 == 0 { int(1) } else { int(-1) };
            let c = binom(d, k) * &sign / (&d_pow * int(r as i64));
            d_pow *= int(d as i64);
            (c, r)
        })
        .collect()
}

/// Closed display of `D1`.
pub fn d1_display(d: u32) -> Result<ExpPoly, AnalyticError> {
    check_degree(d)?;
    let dp1 = int(d as i64 + 1);
    let a = int(d as i64) / (&dp1 * &dp1);
    Ok(&(&konst(a.clone()) - &e(d + 1).scale(&a)) + &te(d + 1).scale(&(int(1) / dp1)))
}

/// Closed display of `D2`.
pub fn d2_display(d: u32) -> Result<ExpPoly, AnalyticError> {
    check_degree(d)?;
    let k = k_factor(d);
    let inv = int(1) / int(d as i64 + 1);
    let mut out = &konst(-inv.clone()) + &e(d + 1).scale(&inv);
    for (c, r) in alternating_terms(d) {
        let c = &k * c;
        out = &out + &(&konst(c.clone()) - &e(r).scale(&c));
    }
    Ok(out)
}

/// Closed display of `D3`.
pub fn d3_display(d: u32) -> Result<ExpPoly, AnalyticError> {
    check_degree(d)?;
    let dp1 = int(d as i64 + 1);
    let a = int(1) / (&dp1 * &dp1);
    Ok(&(&konst(a.clone()) - &e(d + 1).scale(&a)) - &te(d + 1).scale(&(int(1) / dp1)))
}

/// Second-layer density written as one display:
/// `K Σ_k c_k - d/(d+1)² + d/(d+1)² e^{-(d+1)t} - K Σ_k c_k e^{-r_k t} - t e^{-(d+1)t}/(d+1)`.
pub fn rho2_display(d: u32) -> Result<ExpPoly, AnalyticError> {
    check_degree(d)?;
    let k = k_factor(d);
    let dp1 = int(d as i64 + 1);
    let w = int(d as i64) / (&dp1 * &dp1);
    let mut terms = vec![konst(-w.clone()), e(d + 1).scale(&w), te(d + 1).scale(&(-(int(1) / &dp1)))];
    for (c, r) in alternating_terms(d) {
        let c = &k * c;
        terms.push(konst(c.clone()));
        terms.push(e(r).scale(&-c));
    }
    Ok(terms.into_iter().sum())
}

/// `(1 - e^{-(d+1)t})/(d+1)`.
pub fn rho1_display(d: u32) -> Result<ExpPoly, AnalyticError> {
    check_degree(d)?;
    Ok((&konst(int(1)) - &e(d + 1)).scale(&(int(1) / int(d as i64 + 1))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedDensities {
    pub dist: DegreeDistribution,
    pub qd1: ExpPoly,
    pub qd2: ExpPoly,
    pub qd3: ExpPoly,
    pub qrho1: ExpPoly,
    pub qrho2: ExpPoly,
    /// `Z(t) = Σ a_d e^{-(d-1)t}/(d-1)`.
    pub z: ExpPoly,
}

/// `Z(t)` of a distribution.
pub fn z_function(dist: &DegreeDistribution) -> ExpPoly {
    dist.atoms()
        .iter()
        .map(|(d, a)| e(d - 1).scale(&(a / int(*d as i64 - 1))))
        .sum()
}

/// `Z(0) = Σ a_d/(d-1)`.
fn z_at_zero(dist: &DegreeDistribution) -> Rational {
    dist.atoms().iter().map(|(d, a)| a / int(*d as i64 - 1)).sum()
}

/// Tree-averaged densities. The second-layer part is the triple sum
/// `Σ_{d0} a_{d0} Σ_{k=1}^{d0} C(d0,k) Σ_{i=0}^{k} C(k,i)(-1)^i Z(0)^{k-i} ∫₀ᵗ Z^i e^{-(d0+1)u} du`
/// with every integral taken exactly.
pub fn averaged_densities(dist: &DegreeDistribution) -> Result<AveragedDensities, AnalyticError> {
    let mut qd1 = ExpPoly::zero();
    let mut qd3 = ExpPoly::zero();
    for (d, a) in dist.atoms() {
        qd1 = &qd1 + &d1_display(*d)?.scale(a);
        qd3 = &qd3 + &d3_display(*d)?.scale(a);
    }

    let z = z_function(dist);
    let c = z_at_zero(dist);
    let max_d = dist.max_degree();
    let mut z_pows = vec![ExpPoly::constant(Rational::one())];
    for i in 1..=max_d as usize {
        let next = z_pows[i - 1].try_mul(&z)?;
        z_pows.push(next);
    }
    let c_pows: Vec<Rational> = (0..=max_d)
        .scan(Rational::one(), |acc, i| {
            if i > 0 {
                *acc *= &c;
            }
            Some(acc.clone())
        })
        .collect();

    let mut qd2 = ExpPoly::zero();
    for (d0, a0) in dist.atoms() {
        let d0 = *d0;
        let integrals: Vec<ExpPoly> = (0..=d0 as usize)
            .map(|i| z_pows[i].shift_rate(&int(d0 as i64 + 1)).integrate0())
            .collect();
        // Collect the scalar weight of each integral before touching ExpPolys.
        let mut weights = vec![Rational::zero(); d0 as usize + 1];
        for k in 1..=d0 {
            let ck = binom(d0, k);
            for i in 0..=k {
                let sign = if i % 2 == 0 { int(1) } else { int(-1) };
                weights[i as usize] += &ck * binom(k, i) * sign * &c_pows[(k - i) as usize];
            }
        }
        for (w, integral) in weights.iter().zip(&integrals) {
            if !w.is_zero() {
                qd2 = &qd2 + &integral.scale(&(a0 * w));
            }
        }
    }

    let qrho1 = &qd1 + &qd3;
    let qrho2 = &qd2 + &qd3;
    Ok(AveragedDensities { dist: dist.clone(), qd1, qd2, qd3, qrho1, qrho2, z })
}

/// `Σ a_k (1 - e^{-(k+1)t})/(k+1)`.
pub fn qrho1_display(dist: &DegreeDistribution) -> Result<ExpPoly, AnalyticError> {
    let mut out = ExpPoly::zero();
    for (d, a) in dist.atoms() {
        out = &out + &rho1_display(*d)?.scale(a);
    }
    Ok(out)
}

/// Averaged `D2` by a second route: integrate
/// `Σ a_{d0} e^{-(d0+1)t} [(1 + Z(0) - Z(t))^{d0} - 1]` directly.
pub fn qd2_from_rate(dist: &DegreeDistribution) -> Result<ExpPoly, AnalyticError> {
    let z = z_function(dist);
    let base = &konst(int(1) + z_at_zero(dist)) - &z;
    let mut rate = ExpPoly::zero();
    for (d0, a0) in dist.atoms() {
        let bracket = &base.try_pow(*d0)? - &konst(int(1));
        rate = &rate + &bracket.shift_rate(&int(*d0 as i64 + 1)).scale(a0);
    }
    Ok(rate.integrate0())
}

/// Floating-point rate of the averaged `D2` at time `u`,
/// `e^{-u} Σ a_{d0} Σ_{k≥1} C(d0,k) (ℚS_u)^k e^{-(d0-k)u}`, evaluated without
/// exponential-polynomial algebra. Integrand for the quadrature cross-check.
pub fn qd2_rate_numeric(dist: &DegreeDistribution, u: f64) -> f64 {
    let atoms: Vec<(u32, f64)> =
        dist.atoms().iter().map(|(d, a)| (*d, a.to_f64().unwrap_or(f64::NAN))).collect();
    let mean_s: f64 = atoms
        .iter()
        .map(|&(d, a)| a * (-u).exp() * (1.0 - (-((d - 1) as f64) * u).exp()) / (d - 1) as f64)
        .sum();
    let empty = (-u).exp();
    let mut total = 0.0;
    for &(d0, a0) in &atoms {
        let mut inner = 0.0;
        for k in 1..=d0 {
            let c = binomial(d0, k).to_f64().unwrap_or(f64::NAN);
            inner += c * mean_s.powi(k as i32) * empty.powi((d0 - k) as i32);
        }
        total += a0 * inner;
    }
    empty * total
}

fn two_atoms(dist: &DegreeDistribution) -> Result<[(u32, Rational); 2], AnalyticError> {
    match dist.atoms() {
        [a, b] => Ok([a.clone(), b.clone()]),
        atoms => Err(AnalyticError::NotTwoAtom(atoms.len())),
    }
}

/// `C_t(n, x) = ∫₀ᵗ Z_u^n e^{-(x+1)u} du` for a two-atom law, from the
/// binomial expansion of `Z^n` term by term.
pub fn c_integral(dist: &DegreeDistribution, n: u32, x: u32) -> Result<ExpPoly, AnalyticError> {
    if x < 2 {
        return Err(AnalyticError::BadRateIndex(x));
    }
    let [(a, pa), (b, pb)] = two_atoms(dist)?;
    if n == 0 {
        return Ok((&konst(int(1)) - &e(x + 1)).scale(&(int(1) / int(x as i64 + 1))));
    }
    let qa = pa / int(a as i64 - 1);
    let qb = pb / int(b as i64 - 1);
    let mut out = ExpPoly::zero();
    for j in 0..=n {
        let r = (a - 1) * (n - j) + (b - 1) * j + x + 1;
        let mut w = binom(n, j);
        for _ in 0..(n - j) {
            w *= &qa;
        }
        for _ in 0..j {
            w *= &qb;
        }
        w /= int(r as i64);
        out = &out + &(&konst(w.clone()) - &e(r).scale(&w));
    }
    Ok(out)
}

/// Second-layer density for `G(s) = p_a s^a + p_b s^b` written with `C_t`.
pub fn two_atom_qrho2(dist: &DegreeDistribution) -> Result<ExpPoly, AnalyticError> {
    let atoms = two_atoms(dist)?;
    let c: Rational = atoms.iter().map(|(d, p)| p / int(*d as i64 - 1)).sum();
    let mut out = ExpPoly::zero();
    for (d, p) in &atoms {
        out = &out + &d3_display(*d)?.scale(p);
    }
    for (d, p) in &atoms {
        for k in 1..=*d {
            for i in 0..=k {
                let sign = if i % 2 == 0 { int(1) } else { int(-1) };
                let mut w = p * binom(*d, k) * binom(k, i) * sign;
                for _ in 0..(k - i) {
                    w *= &c;
                }
                out = &out + &c_integral(dist, i, *d)?.scale(&w);
            }
        }
    }
    Ok(out)
}

/// Exact curves `layer:1`, `layer:2` for `T_d` on a time grid.
pub fn regular_curve(d: u32, times: &[f64]) -> Result<DensityCurve, AnalyticError> {
    let dens = regular_densities(d)?;
    Ok(DensityCurve::from_exact(
        times,
        &[("layer:1".into(), &dens.rho1), ("layer:2".into(), &dens.rho2)],
    ))
}

/// Exact tree-averaged curves `layer:1`, `layer:2`.
pub fn averaged_curve(dist: &DegreeDistribution, times: &[f64]) -> Result<DensityCurve, AnalyticError> {
    let dens = averaged_densities(dist)?;
    Ok(DensityCurve::from_exact(
        times,
        &[("layer:1".into(), &dens.qrho1), ("layer:2".into(), &dens.qrho2)],
    ))
}
