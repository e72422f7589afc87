//! Exhaustive ground truth for tiny tables.
//!
//! A state matrix records, for every entry and subtable, which row (cell
//! within the subtable) the entry hashes to. Stacking the `k` blocks gives the
//! `k ell x n` incidence matrix; peeling fails exactly when some nonempty
//! set of its columns is a stopping matrix.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_ORACLE_GUARD: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateMatrix {
    ell: usize,
    n: usize,
    k: usize,
    // rows[block * n + entry]
    rows: Vec<usize>,
}

impl StateMatrix {
    /// `rows[u][j]` is the row of entry `j` in block `u`.
    pub fn from_blocks(ell: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if ell == 0 || k == 0 {
            return Err(Error::params("state matrix needs ell >= 1 and k >= 1"));
        }
        if rows.iter().any(|b| b.len() != n || b.iter().any(|&r| r >= ell)) {
            return Err(Error::params("every block needs n rows below ell"));
        }
        Ok(StateMatrix { ell, n, k, rows: rows.concat() })
    }

    fn from_flat(ell: usize, n: usize, k: usize, rows: Vec<usize>) -> Self {
        debug_assert_eq!(rows.len(), n * k);
        StateMatrix { ell, n, k, rows }
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Row of `entry` inside block `block`.
    pub fn row(&self, block: usize, entry: usize) -> usize {
        self.rows[block * self.n + entry]
    }

    /// Rows of `entry` across all blocks.
    pub fn entry_rows(&self, entry: usize) -> Vec<usize> {
        (0..self.k).map(|u| self.row(u, entry)).collect()
    }
}

/// Columns left after repeatedly removing any column that is the only one
/// in some row of the stacked matrix.
pub fn peel_fixpoint(b: &StateMatrix) -> BTreeSet<usize> {
    let (ell, n, k) = (b.ell, b.n, b.k);
    let mut weight = vec![0usize; ell * k];
    for u in 0..k {
        for j in 0..n {
            weight[u * ell + b.row(u, j)] += 1;
        }
    }
    let mut alive = vec![true; n];
    loop {
        let peelable = (0..n).find(|&j| alive[j] && (0..k).any(|u| weight[u * ell + b.row(u, j)] == 1));
        match peelable {
            Some(j) => {
                alive[j] = false;
                for u in 0..k {
                    weight[u * ell + b.row(u, j)] -= 1;
                }
            }
            None => break,
        }
    }
    (0..n).filter(|&j| alive[j]).collect()
}

pub fn contains_stopping_submatrix(b: &StateMatrix) -> bool {
    !peel_fixpoint(b).is_empty()
}

/// Calls `f` on every state matrix of `S(ell, n)^k`, in mixed-radix order
/// with the first (entry 0, block 0) digit varying fastest.
pub fn for_each_state_matrix(ell: usize, n: usize, k: usize, mut f: impl FnMut(&StateMatrix)) -> Result<()> {
    if ell == 0 || k == 0 {
        return Err(Error::params("enumeration needs ell >= 1 and k >= 1"));
    }
    let mut b = StateMatrix::from_flat(ell, n, k, vec![0; n * k]);
    loop {
        f(&b);
        if !advance(&mut b.rows, ell) {
            return Ok(());
        }
    }
}

fn advance(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Exact listing failure probability with the default guard.
pub fn exact_failure_probability(ell: usize, n: usize, k: usize) -> Result<BigRational> {
    exact_failure_probability_with_guard(ell, n, k, DEFAULT_ORACLE_GUARD)
}

/// `#{B : B contains a stopping matrix} / ell^(n k)`, refusing when
/// `ell^(n k)` exceeds `guard`.
///
/// The space is split on the last digit and the parts are counted in
/// parallel; the sum does not depend on the split.
pub fn exact_failure_probability_with_guard(
    ell: usize,
    n: usize,
    k: usize,
    guard: u64,
) -> Result<BigRational> {
    if ell == 0 || k == 0 {
        return Err(Error::params("exact failure probability needs ell >= 1 and k >= 1"));
    }
    let space = BigUint::from(ell).pow((n * k) as u32);
    if space > BigUint::from(guard) {
        return Err(Error::ResourceGuard {
            what: "state-matrix enumeration",
            at: format!("(ell={ell}, n={n}, k={k})"),
            required: space,
            limit: guard,
        });
    }
    let failures: u64 = if n == 0 {
        0
    } else {
        (0..ell)
            .into_par_iter()
            .map(|lead| {
                let mut count = 0u64;
                let mut rows = vec![0usize; n * k];
                let last = rows.len() - 1;
                rows[last] = lead;
                let mut b = StateMatrix::from_flat(ell, n, k, rows);
                loop {
                    if contains_stopping_submatrix(&b) {
                        count += 1;
                    }
                    if !advance(&mut b.rows[..last], ell) {
                        return count;
                    }
                }
            })
            .sum()
    };
    let total = space.to_u64().expect("guarded below u64");
    Ok(BigRational::new(BigInt::from(failures), BigInt::from(total)))
}
