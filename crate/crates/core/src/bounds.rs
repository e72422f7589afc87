//! Union bound on the listing failure probability.
//!
//! For `n` entries hashed into `k` subtables of `ell` cells,
//!
//! ```text
//! P_f(ell, n, k) <= sum_{i=2}^{n} C(n, i) (z(ell, i) / ell^i)^k
//! ```
//!
//! where the `i`-th term bounds the chance that some `i` entries form a
//! stopping set. The `i = 1` term vanishes since `z(ell, 1) = 0`. The `i = 2`
//! term is `C(n, 2) / ell^k`, the error-floor asymptote `P2`.
//!
//! Terms and the total are evaluated as exact rationals and rounded once to
//! `f64`. Each term also carries its natural log, computed independently from
//! `ln C(n, i) + k ln(z(ell, i) / ell^i)`, which stays finite where the `f64`
//! value underflows.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::enumeration::{ln_big, ZTable};
use crate::error::{Error, Result};
use crate::ratio_to_f64;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundTerm {
    /// Stopping-set size.
    pub i: usize,
    pub value: f64,
    /// `ln(value)`, or negative infinity for a zero term.
    pub ln_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundBreakdown {
    pub ell: usize,
    pub n: usize,
    pub k: usize,
    /// One term per `i` in `2..=n`.
    pub terms: Vec<BoundTerm>,
    /// The sum of all terms; may exceed one.
    pub total: f64,
    pub total_clamped: f64,
    pub total_exact: BigRational,
}

fn check(ell: usize, n: usize, k: usize) -> Result<()> {
    if ell == 0 || n == 0 || k == 0 {
        return Err(Error::params(format!(
            "ell, n and k must be positive (ell={ell}, n={n}, k={k})"
        )));
    }
    Ok(())
}

fn big(x: BigUint) -> BigInt {
    BigInt::from(x)
}

/// `C(n, i)` for `i` in `0..=n`.
fn binomial_row(n: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for i in 1..=n {
        c = c * (n - i + 1) / i;
        row.push(c.clone());
    }
    row
}

pub fn union_bound(ztable: &mut ZTable, ell: usize, n: usize, k: usize) -> Result<BoundBreakdown> {
    check(ell, n, k)?;
    ztable.ensure(ell, n);
    let binom = binomial_row(n);
    let ell_big = BigUint::from(ell);
    let ell_k = ell_big.pow(k as u32);
    let ln_ell = (ell as f64).ln();

    let mut terms = Vec::with_capacity(n.saturating_sub(1));
    // Numerator over the common denominator ell^(n k), accumulated from the
    // largest i (smallest ell power) down.
    let mut numer = BigUint::zero();
    let mut ell_pow = BigUint::one(); // ell^((n - i) k)
    for i in (2..=n).rev() {
        let z = ztable.get(ell, i).expect("table covers (ell, n)");
        let weight = &binom[i] * z.pow(k as u32);
        numer += &weight * &ell_pow;
        ell_pow *= &ell_k;

        let (value, ln_value) = if z.is_zero() {
            (0.0, f64::NEG_INFINITY)
        } else {
            let exact = BigRational::new(big(weight), big(ell_k.pow(i as u32)));
            let ln = ln_big(&binom[i]) + k as f64 * (ln_big(z) - i as f64 * ln_ell);
            (ratio_to_f64(&exact), ln)
        };
        terms.push(BoundTerm { i, value, ln_value });
    }
    terms.reverse();

    let denom = ell_big.pow((n * k) as u32);
    let total_exact = BigRational::new(big(numer), big(denom));
    let total = ratio_to_f64(&total_exact);
    Ok(BoundBreakdown { ell, n, k, terms, total, total_clamped: total.min(1.0), total_exact })
}

/// `C(n, 2) / ell^k`, correctly rounded.
pub fn p2_asymptote(ell: usize, n: usize, k: usize) -> Result<f64> {
    Ok(ratio_to_f64(&p2_asymptote_exact(ell, n, k)?))
}

pub fn p2_asymptote_exact(ell: usize, n: usize, k: usize) -> Result<BigRational> {
    check(ell, n, k)?;
    let pairs = BigUint::from(n) * BigUint::from(n - 1) / 2u32;
    Ok(BigRational::new(big(pairs), big(BigUint::from(ell).pow(k as u32))))
}

/// Probability that a fixed set of `i` entries is a stopping set when every
/// entry picks its cell in each subtable uniformly: `(z(ell, i) / ell^i)^k`.
pub fn stopping_set_probability(ztable: &mut ZTable, ell: usize, i: usize, k: usize) -> Result<f64> {
    Ok(ratio_to_f64(&stopping_set_probability_exact(ztable, ell, i, k)?))
}

pub fn stopping_set_probability_exact(
    ztable: &mut ZTable,
    ell: usize,
    i: usize,
    k: usize,
) -> Result<BigRational> {
    check(ell, i, k)?;
    let z = ztable.z(ell, i).pow(k as u32);
    let all = BigUint::from(ell).pow((i * k) as u32);
    Ok(BigRational::new(big(z), big(all)))
}
