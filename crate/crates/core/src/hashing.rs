//! Key to cell-index mapping.
//!
//! Every scheme produces one index per subtable. With `k` subtables of
//! `ell` cells each, subtable `i` owns global cells `[i * ell, (i + 1) * ell)`.
//! Adding one to a global index gives the 1-based numbering where subtable
//! `i + 1` spans `[i * ell + 1, (i + 1) * ell]`.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hasher;
use std::sync::Arc;

use siphasher::sip::SipHasher13;

use crate::error::{Error, Result};

/// Which hash family a [`HashScheme`] is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// `k` independently keyed hashes, each reduced into its own subtable.
    PartitionedUniform,
    /// Split a `b = s * k` bit bijection of the key into `k` fields of `s` bits.
    SsAvoiding,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::PartitionedUniform => "uniform",
            SchemeKind::SsAvoiding => "ss-avoiding",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HashParams {
    /// Number of hash functions, which is also the number of subtables.
    pub k: usize,
    /// Cells per subtable.
    pub ell: usize,
    /// Key (and value) width in bits, at most 64.
    pub b: u32,
    pub seed: u64,
    pub kind: SchemeKind,
}

impl HashParams {
    pub fn new(k: usize, ell: usize, b: u32, seed: u64, kind: SchemeKind) -> Self {
        HashParams { k, ell, b, seed, kind }
    }

    pub fn cells(&self) -> usize {
        self.k * self.ell
    }

    /// Bits per field for the SS-avoiding split, `b / k`.
    pub fn field_bits(&self) -> u32 {
        self.b / self.k as u32
    }

    pub fn key_mask(&self) -> u64 {
        width_mask(self.b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.ell == 0 || self.b == 0 {
            return Err(Error::params(format!(
                "k, ell and b must be positive (k={}, ell={}, b={})",
                self.k, self.ell, self.b
            )));
        }
        if self.b > 64 {
            return Err(Error::params(format!("key width b={} exceeds 64 bits", self.b)));
        }
        if self.kind == SchemeKind::SsAvoiding {
            if self.b as usize % self.k != 0 {
                return Err(Error::params(format!(
                    "ss-avoiding hashing needs b divisible by k (b={}, k={})",
                    self.b, self.k
                )));
            }
            let s = self.field_bits();
            if s >= usize::BITS || self.ell != 1usize << s {
                return Err(Error::params(format!(
                    "ss-avoiding hashing needs ell = 2^(b/k) = 2^{s}, got ell={}",
                    self.ell
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn width_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// The `k` global cell indices of one key, in subtable order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HashTuple(pub Vec<usize>);

impl HashTuple {
    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

/// Anything that can place a key into `k` subtables of `ell` cells.
///
/// Implementations must write `out[i]` inside `[i * ell, (i + 1) * ell)`
/// and must be pure functions of the key.
pub trait CellHash: Send + Sync {
    fn k(&self) -> usize;
    fn ell(&self) -> usize;

    /// Width of keys and values in bits. Higher bits are ignored by tables.
    fn key_bits(&self) -> u32 {
        64
    }

    /// Writes the index for each subtable into `out`, which has length `k`.
    fn indices_into(&self, key: u64, out: &mut [usize]);

    fn indices(&self, key: u64) -> HashTuple {
        let mut out = vec![0; self.k()];
        self.indices_into(key, &mut out);
        HashTuple(out)
    }
}

impl<H: CellHash + ?Sized> CellHash for &H {
    fn k(&self) -> usize {
        (**self).k()
    }
    fn ell(&self) -> usize {
        (**self).ell()
    }
    fn key_bits(&self) -> u32 {
        (**self).key_bits()
    }
    fn indices_into(&self, key: u64, out: &mut [usize]) {
        (**self).indices_into(key, out)
    }
}

/// A permutation of `b`-bit strings, used as the front end of SS-avoiding hashing.
pub trait KeyBijection: Send + Sync + fmt::Debug {
    fn forward(&self, x: u64) -> u64;
    fn inverse(&self, y: u64) -> u64;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Identity;

impl KeyBijection for Identity {
    fn forward(&self, x: u64) -> u64 {
        x
    }
    fn inverse(&self, y: u64) -> u64 {
        y
    }
}

/// `x -> (mul * x + add) mod 2^bits` with an odd multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AffineBijection {
    bits: u32,
    mul: u64,
    mul_inv: u64,
    add: u64,
}

impl AffineBijection {
    pub fn new(bits: u32, mul: u64, add: u64) -> Result<Self> {
        if bits == 0 || bits > 64 {
            return Err(Error::params(format!("bijection width {bits} outside 1..=64")));
        }
        if mul & 1 == 0 {
            return Err(Error::params("affine multiplier must be odd to be invertible"));
        }
        // Newton iteration for the inverse of an odd number mod 2^64.
        let mut inv: u64 = mul;
        for _ in 0..5 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(mul.wrapping_mul(inv)));
        }
        let mask = width_mask(bits);
        Ok(AffineBijection { bits, mul: mul & mask, mul_inv: inv & mask, add: add & mask })
    }
}

impl KeyBijection for AffineBijection {
    fn forward(&self, x: u64) -> u64 {
        self.mul.wrapping_mul(x).wrapping_add(self.add) & width_mask(self.bits)
    }
    fn inverse(&self, y: u64) -> u64 {
        self.mul_inv.wrapping_mul(y.wrapping_sub(self.add)) & width_mask(self.bits)
    }
}

// Mixed into the second SipHash key so that subtable streams differ even for seed 0.
const SUBTABLE_TAG: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug)]
enum Inner {
    Uniform { hashers: Vec<SipHasher13> },
    SsAvoiding { field_bits: u32, bijection: Arc<dyn KeyBijection> },
}

/// One of the two hash families, fixed at construction and cheap to clone.
#[derive(Clone, Debug)]
pub struct HashScheme {
    params: HashParams,
    inner: Inner,
}

impl HashScheme {
    /// Builds the scheme named by `params.kind`. SS-avoiding schemes use the
    /// identity bijection.
    pub fn new(params: HashParams) -> Result<Self> {
        match params.kind {
            SchemeKind::PartitionedUniform => Self::partitioned_uniform(params),
            SchemeKind::SsAvoiding => Self::ss_avoiding(params, Arc::new(Identity)),
        }
    }

    /// Subtable `i` uses SipHash-1-3 keyed with `(seed, i ^ TAG)`; the
    /// 64-bit digest of the key is reduced modulo `ell`.
    pub fn partitioned_uniform(params: HashParams) -> Result<Self> {
        params.validate()?;
        if params.kind != SchemeKind::PartitionedUniform {
            return Err(Error::params("partitioned_uniform called with a non-uniform kind"));
        }
        let hashers = (0..params.k as u64)
            .map(|i| SipHasher13::new_with_keys(params.seed, i ^ SUBTABLE_TAG))
            .collect();
        Ok(HashScheme { params, inner: Inner::Uniform { hashers } })
    }

    /// The key is passed through `bijection` and split into `k` fields of
    /// `s = b / k` bits, most significant field first. Field `i` selects
    /// cell `q_i` of subtable `i`, that is global index `q_i + i * 2^s`.
    pub fn ss_avoiding(params: HashParams, bijection: Arc<dyn KeyBijection>) -> Result<Self> {
        params.validate()?;
        if params.kind != SchemeKind::SsAvoiding {
            return Err(Error::params("ss_avoiding called with a non-ss-avoiding kind"));
        }
        check_bijection(bijection.as_ref(), params.b, params.seed)?;
        Ok(HashScheme {
            params,
            inner: Inner::SsAvoiding { field_bits: params.field_bits(), bijection },
        })
    }

    pub fn params(&self) -> &HashParams {
        &self.params
    }
}

/// Exhaustive for `bits <= 16`, otherwise a seeded sample of keys.
fn check_bijection(f: &dyn KeyBijection, bits: u32, seed: u64) -> Result<()> {
    let mask = width_mask(bits);
    let check = |x: u64| -> Result<()> {
        let y = f.forward(x);
        if y & !mask != 0 || f.inverse(y) != x {
            return Err(Error::params(format!(
                "key bijection is not a {bits}-bit permutation (fails at {x:#x})"
            )));
        }
        Ok(())
    };
    if bits <= 16 {
        let mut seen = vec![false; 1usize << bits];
        for x in 0..=mask {
            check(x)?;
            let y = f.forward(x) as usize;
            if std::mem::replace(&mut seen[y], true) {
                return Err(Error::params(format!("key bijection maps two keys to {y:#x}")));
            }
        }
        return Ok(());
    }
    check(0)?;
    check(mask)?;
    let mut state = seed;
    for _ in 0..1024 {
        check(splitmix64(&mut state) & mask)?;
    }
    Ok(())
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CellHash for HashScheme {
    fn k(&self) -> usize {
        self.params.k
    }

    fn ell(&self) -> usize {
        self.params.ell
    }

    fn key_bits(&self) -> u32 {
        self.params.b
    }

    fn indices_into(&self, key: u64, out: &mut [usize]) {
        let key = key & self.params.key_mask();
        let ell = self.params.ell;
        match &self.inner {
            Inner::Uniform { hashers } => {
                for (i, (slot, h)) in out.iter_mut().zip(hashers).enumerate() {
                    let mut h = h.clone();
                    h.write_u64(key);
                    *slot = i * ell + (h.finish() % ell as u64) as usize;
                }
            }
            Inner::SsAvoiding { field_bits, bijection } => {
                let y = bijection.forward(key);
                let k = out.len() as u32;
                let field_mask = width_mask(*field_bits);
                for (i, slot) in out.iter_mut().enumerate() {
                    let shift = (k - 1 - i as u32) * field_bits;
                    let q = (y >> shift) & field_mask;
                    *slot = q as usize + i * ell;
                }
            }
        }
    }
}

/// A scheme given by an explicit table of per-subtable rows.
///
/// Used to realize a chosen state matrix on a real table. Looking up a key
/// that was never assigned panics.
#[derive(Clone, Debug)]
pub struct ExplicitScheme {
    k: usize,
    ell: usize,
    rows: HashMap<u64, Vec<usize>>,
}

impl ExplicitScheme {
    pub fn new(k: usize, ell: usize) -> Result<Self> {
        if k == 0 || ell == 0 {
            return Err(Error::params("explicit scheme needs k >= 1 and ell >= 1"));
        }
        Ok(ExplicitScheme { k, ell, rows: HashMap::new() })
    }

    /// Assigns `key` to row `rows[i]` of each subtable `i`.
    pub fn assign(&mut self, key: u64, rows: &[usize]) -> Result<()> {
        if rows.len() != self.k || rows.iter().any(|&r| r >= self.ell) {
            return Err(Error::params(format!(
                "rows {rows:?} do not fit k={} subtables of {} cells",
                self.k, self.ell
            )));
        }
        self.rows.insert(key, rows.to_vec());
        Ok(())
    }
}

impl CellHash for ExplicitScheme {
    fn k(&self) -> usize {
        self.k
    }

    fn ell(&self) -> usize {
        self.ell
    }

    fn indices_into(&self, key: u64, out: &mut [usize]) {
        let rows = self
            .rows
            .get(&key)
            .unwrap_or_else(|| panic!("key {key:#x} has no assigned rows"));
        for (i, (slot, r)) in out.iter_mut().zip(rows).enumerate() {
            *slot = i * self.ell + r;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(k: usize, ell: usize, seed: u64) -> HashScheme {
        HashScheme::new(HashParams::new(k, ell, 32, seed, SchemeKind::PartitionedUniform)).unwrap()
    }

    #[test]
    fn uniform_is_deterministic() {
        let a = uniform(3, 100, 7);
        let b = uniform(3, 100, 7);
        for key in [0u64, 1, 0xdead_beef, 0xffff_ffff] {
            assert_eq!(a.indices(key), a.indices(key));
            assert_eq!(a.indices(key), b.indices(key));
        }
        assert_ne!(
            (0..64).map(|x| a.indices(x)).collect::<Vec<_>>(),
            (0..64).map(|x| uniform(3, 100, 8).indices(x)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn single_cell_subtables() {
        let h = uniform(3, 1, 0);
        for key in [0u64, 5, 12345] {
            assert_eq!(h.indices(key).0, vec![0, 1, 2]);
        }
    }

    #[test]
    fn rejects_bad_params() {
        for (k, ell, b) in [(0, 4, 32), (3, 0, 32), (3, 4, 0), (3, 4, 65)] {
            let p = HashParams::new(k, ell, b, 0, SchemeKind::PartitionedUniform);
            assert!(matches!(HashScheme::new(p), Err(Error::InvalidParams(_))));
        }
        // b not a multiple of k
        let p = HashParams::new(3, 4, 7, 0, SchemeKind::SsAvoiding);
        assert!(HashScheme::new(p).is_err());
        // ell != 2^s
        let p = HashParams::new(3, 5, 6, 0, SchemeKind::SsAvoiding);
        assert!(HashScheme::new(p).is_err());
    }

    #[test]
    fn ss_avoiding_split_example() {
        let h = HashScheme::new(HashParams::new(3, 4, 6, 0, SchemeKind::SsAvoiding)).unwrap();
        // fields (0b10, 0b11, 0b01) land at 2, 4 + 3, 8 + 1
        assert_eq!(h.indices(0b101101).0, vec![2, 7, 9]);
    }

    #[test]
    fn ss_avoiding_single_field_is_the_key() {
        let h = HashScheme::new(HashParams::new(1, 256, 8, 0, SchemeKind::SsAvoiding)).unwrap();
        for key in 0..256u64 {
            assert_eq!(h.indices(key).0, vec![key as usize]);
        }
    }

    #[test]
    fn ss_avoiding_is_injective_exhaustively() {
        let bij = Arc::new(AffineBijection::new(12, 0x5a5b, 77).unwrap());
        for bijection in [Arc::new(Identity) as Arc<dyn KeyBijection>, bij] {
            let h = HashScheme::ss_avoiding(
                HashParams::new(3, 16, 12, 0, SchemeKind::SsAvoiding),
                bijection,
            )
            .unwrap();
            let mut seen = std::collections::HashSet::new();
            for key in 0..(1u64 << 12) {
                assert!(seen.insert(h.indices(key)));
            }
        }
    }

    #[derive(Debug)]
    struct Squash;
    impl KeyBijection for Squash {
        fn forward(&self, x: u64) -> u64 {
            x >> 1
        }
        fn inverse(&self, y: u64) -> u64 {
            y << 1
        }
    }

    #[test]
    fn rejects_non_bijection() {
        for b in [12, 24] {
            let p = HashParams::new(3, 1 << (b / 3), b, 1, SchemeKind::SsAvoiding);
            assert!(HashScheme::ss_avoiding(p, Arc::new(Squash)).is_err());
        }
    }

    #[test]
    fn affine_round_trips() {
        let f = AffineBijection::new(40, 0x1234_5679, 99).unwrap();
        for x in [0u64, 1, 17, (1 << 40) - 1] {
            assert_eq!(f.inverse(f.forward(x)), x);
        }
        assert!(AffineBijection::new(8, 4, 0).is_err());
    }

    #[test]
    fn explicit_scheme_places_rows() {
        let mut s = ExplicitScheme::new(2, 3).unwrap();
        s.assign(9, &[2, 0]).unwrap();
        assert_eq!(s.indices(9).0, vec![2, 3]);
        assert!(s.assign(1, &[3, 0]).is_err());
        assert!(s.assign(1, &[0]).is_err());
    }

    #[test]
    fn uniform_chi_square_per_subtable() {
        // 10^6 keys into 256 bins, 255 degrees of freedom. The two-sided 99.9%
        // acceptance region of chi-square(255) is [187.17, 335.92].
        let (k, ell) = (3, 256);
        let h = uniform(k, ell, 42);
        let mut counts = vec![vec![0u64; ell]; k];
        let mut state = 1u64;
        let trials = 1_000_000u64;
        let mut idx = vec![0; k];
        for _ in 0..trials {
            let key = splitmix64(&mut state) & 0xffff_ffff;
            h.indices_into(key, &mut idx);
            for (i, &g) in idx.iter().enumerate() {
                assert!((i * ell..(i + 1) * ell).contains(&g));
                counts[i][g - i * ell] += 1;
            }
        }
        let expect = trials as f64 / ell as f64;
        for table in &counts {
            let chi2: f64 = table.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
            assert!((187.17..335.92).contains(&chi2), "chi2 = {chi2}");
        }
    }
}
