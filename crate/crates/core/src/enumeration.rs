//! Counting stopping matrices.
//!
//! `S(ell, n)` is the set of `ell x n` binary matrices whose columns each
//! hold a single one, so `|S(ell, n)| = ell^n`. A matrix is *stopping* when
//! no row has weight exactly one; `z(ell, n)` counts the stopping members of
//! `S(ell, n)`. Removing the `c` pivots (weight-one rows with their columns)
//! of a non-stopping matrix leaves a stopping `(ell - c) x (n - c)` matrix,
//! which gives
//!
//! ```text
//! z(ell, n) = ell^n - sum_{c=1}^{min(ell, n)} c! C(ell, c) C(n, c) z(ell - c, n - c)
//! ```
//!
//! with `z(ell, 0) = 1` for every `ell >= 0` and `z(0, n) = 0` for `n >= 1`.
//! Note `z(1, 1) = 0`: a lone one is its own weight-one row.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Default ceiling on the number of matrices a brute-force count may visit.
pub const DEFAULT_BRUTE_FORCE_GUARD: u64 = 10_000_000;

/// A dense binary matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix { rows, cols, bits: vec![false; rows * cols] }
    }

    /// The member of `S(rows, ones.len())` with a one at `(ones[j], j)`.
    pub fn from_column_ones(rows: usize, ones: &[usize]) -> Result<Self> {
        let mut m = Self::zeros(rows, ones.len());
        for (j, &i) in ones.iter().enumerate() {
            if i >= rows {
                return Err(Error::params(format!("row {i} out of range for {rows} rows")));
            }
            m.set(i, j, true);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::params("ragged rows"));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v != 0);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.cols + j] = v;
    }

    pub fn row_weight(&self, i: usize) -> usize {
        self.bits[i * self.cols..(i + 1) * self.cols].iter().filter(|&&b| b).count()
    }

    /// True when every column has weight one, i.e. the matrix is in `S(rows, cols)`.
    pub fn is_column_weight_one(&self) -> bool {
        (0..self.cols).all(|j| (0..self.rows).filter(|&i| self.get(i, j)).count() == 1)
    }
}

/// Positions `(row, col)` holding the only one of their row.
pub type PivotSet = BTreeSet<(usize, usize)>;

/// True iff no row of `m` has weight one. The empty matrix is stopping.
pub fn is_stopping_matrix(m: &BinaryMatrix) -> bool {
    (0..m.rows()).all(|i| m.row_weight(i) != 1)
}

pub fn pivots(m: &BinaryMatrix) -> PivotSet {
    (0..m.rows())
        .filter(|&i| m.row_weight(i) == 1)
        .map(|i| (i, (0..m.cols()).find(|&j| m.get(i, j)).expect("weight-one row has a one")))
        .collect()
}

/// Memoized exact values of `z(ell, n)` over a rectangle `[0, L] x [0, N]`.
///
/// The table grows on demand; once filled it can be shared read-only.
#[derive(Clone, Debug, Default)]
pub struct ZTable {
    // rows[ell][n]; every row has the same length.
    rows: Vec<Vec<BigUint>>,
}

impl ZTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table already filled up to `(max_ell, max_n)`.
    pub fn with_size(max_ell: usize, max_n: usize) -> Self {
        let mut t = Self::new();
        t.ensure(max_ell, max_n);
        t
    }

    /// Largest `(ell, n)` currently held, or `None` when empty.
    pub fn extent(&self) -> Option<(usize, usize)> {
        let cols = self.rows.first()?.len();
        Some((self.rows.len() - 1, cols - 1))
    }

    pub fn get(&self, ell: usize, n: usize) -> Option<&BigUint> {
        self.rows.get(ell)?.get(n)
    }

    pub fn z(&mut self, ell: usize, n: usize) -> &BigUint {
        self.ensure(ell, n);
        &self.rows[ell][n]
    }

    /// Extends the table so that it covers `[0, max_ell] x [0, max_n]`.
    pub fn ensure(&mut self, max_ell: usize, max_n: usize) {
        let (old_ell, old_n) = match self.extent() {
            Some((l, n)) if l >= max_ell && n >= max_n => return,
            Some((l, n)) => (Some(l), Some(n)),
            None => (None, None),
        };
        let new_ell = max_ell.max(old_ell.unwrap_or(0));
        let new_n = max_n.max(old_n.unwrap_or(0));
        for row in &mut self.rows {
            row.resize(new_n + 1, BigUint::zero());
        }
        while self.rows.len() <= new_ell {
            self.rows.push(vec![BigUint::zero(); new_n + 1]);
        }
        let fresh = |ell: usize, n: usize| match (old_ell, old_n) {
            (Some(l), Some(m)) => ell > l || n > m,
            _ => true,
        };
        // z(ell, n) only reads z(ell - c, n - c), so row-major order works.
        for ell in 0..=new_ell {
            for n in 0..=new_n {
                if fresh(ell, n) {
                    self.rows[ell][n] = self.compute(ell, n);
                }
            }
        }
    }

    fn compute(&self, ell: usize, n: usize) -> BigUint {
        if n == 0 {
            return BigUint::one();
        }
        if ell == 0 {
            return BigUint::zero();
        }
        let total = BigUint::from(ell).pow(n as u32);
        // coef_c = c! C(ell, c) C(n, c), built from coef_{c-1} exactly.
        let mut coef = BigUint::one();
        let mut non_stopping = BigUint::zero();
        for c in 1..=ell.min(n) {
            coef *= (ell - c + 1) as u64;
            coef *= (n - c + 1) as u64;
            coef /= c as u64;
            let rest = &self.rows[ell - c][n - c];
            if !rest.is_zero() {
                non_stopping += &coef * rest;
            }
        }
        total - non_stopping
    }

    /// `ln(z(ell, i) / ell^i)`, or negative infinity when `z(ell, i) = 0`.
    pub fn stopping_ratio_log(&mut self, ell: usize, i: usize) -> f64 {
        let z = self.z(ell, i);
        if z.is_zero() {
            return f64::NEG_INFINITY;
        }
        ln_big(z) - i as f64 * (ell as f64).ln()
    }

    /// Writes the table as text:
    ///
    /// ```text
    /// iblt-ztable v1
    /// <max_ell> <max_n>
    /// <ell> <n> <z>      one line per entry, row-major
    /// ```
    pub fn write_cache<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{CACHE_MAGIC}")?;
        match self.extent() {
            None => writeln!(w, "-1 -1")?,
            Some((l, n)) => {
                writeln!(w, "{l} {n}")?;
                for (ell, row) in self.rows.iter().enumerate() {
                    for (n, z) in row.iter().enumerate() {
                        writeln!(w, "{ell} {n} {z}")?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cache<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next = || -> Result<String> {
            lines.next().transpose()?.ok_or_else(|| Error::Cache("unexpected end of file".into()))
        };
        if next()?.trim() != CACHE_MAGIC {
            return Err(Error::Cache("missing header".into()));
        }
        let dims = next()?;
        if dims.trim() == "-1 -1" {
            return Ok(Self::new());
        }
        let dims = parse_fields(&dims, 2)?;
        let (max_ell, max_n) = (to_usize(&dims[0])?, to_usize(&dims[1])?);
        let mut rows = Vec::with_capacity(max_ell + 1);
        for ell in 0..=max_ell {
            let mut row = Vec::with_capacity(max_n + 1);
            for n in 0..=max_n {
                let f = parse_fields(&next()?, 3)?;
                if to_usize(&f[0])? != ell || to_usize(&f[1])? != n {
                    return Err(Error::Cache(format!("expected entry ({ell}, {n})")));
                }
                row.push(f[2].clone());
            }
            rows.push(row);
        }
        Ok(ZTable { rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_cache(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_cache(std::fs::File::open(path)?)
    }
}

const CACHE_MAGIC: &str = "iblt-ztable v1";

fn parse_fields(line: &str, want: usize) -> Result<Vec<BigUint>> {
    let fields: Vec<_> = line.split_whitespace().collect();
    if fields.len() != want {
        return Err(Error::Cache(format!("expected {want} fields in {line:?}")));
    }
    fields
        .iter()
        .map(|f| f.parse::<BigUint>().map_err(|_| Error::Cache(format!("bad integer {f:?}"))))
        .collect()
}

fn to_usize(v: &BigUint) -> Result<usize> {
    v.to_usize().ok_or_else(|| Error::Cache(format!("{v} does not fit an index")))
}

/// Natural log of a positive big integer from its top 64 bits.
pub(crate) fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits in 64 bits") as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("top 64 bits");
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Counts stopping matrices in `S(ell, n)` by visiting all `ell^n` of them.
pub fn enumerate_z_bruteforce(ell: usize, n: usize) -> Result<BigUint> {
    enumerate_z_bruteforce_with_guard(ell, n, DEFAULT_BRUTE_FORCE_GUARD)
}

/// Brute-force count with an explicit ceiling on `ell^n`.
///
/// Columns are stepped through as a base-`ell` counter while the row
/// weights and the number of weight-one rows are kept up to date, so each
/// matrix costs O(1) amortized to classify.
pub fn enumerate_z_bruteforce_with_guard(ell: usize, n: usize, guard: u64) -> Result<BigUint> {
    let space = BigUint::from(ell).pow(n as u32);
    if space > BigUint::from(guard) {
        return Err(Error::ResourceGuard {
            what: "stopping-matrix enumeration",
            at: format!("(ell={ell}, n={n})"),
            required: space,
            limit: guard,
        });
    }
    if n == 0 {
        return Ok(BigUint::one());
    }
    if ell == 0 {
        return Ok(BigUint::zero());
    }
    // All columns start on row 0.
    let mut digits = vec![0usize; n];
    let mut weight = vec![0usize; ell];
    weight[0] = n;
    let mut weight_one_rows = usize::from(n == 1);
    let mut stopping: u64 = 0;
    loop {
        if weight_one_rows == 0 {
            stopping += 1;
        }
        // Advance the counter.
        let mut j = 0;
        loop {
            if j == n {
                return Ok(BigUint::from(stopping));
            }
            let from = digits[j];
            let to = if from + 1 == ell { 0 } else { from + 1 };
            digits[j] = to;
            move_column(&mut weight, &mut weight_one_rows, from, to);
            if to != 0 {
                break;
            }
            j += 1;
        }
    }
}

/// Moves one column's one from row `from` to row `to`, keeping `ones`
/// equal to the number of weight-one rows.
fn move_column(weight: &mut [usize], ones: &mut usize, from: usize, to: usize) {
    if weight[from] == 1 {
        *ones -= 1;
    }
    weight[from] -= 1;
    if weight[from] == 1 {
        *ones += 1;
    }
    if weight[to] == 1 {
        *ones -= 1;
    }
    weight[to] += 1;
    if weight[to] == 1 {
        *ones += 1;
    }
}
