//! Monte Carlo estimates of the listing failure probability.
//!
//! Every trial draws `n` fresh key-value pairs, inserts them into an empty
//! table and lists it. A trial fails when listing is partial or the listed
//! pairs differ from the inserted ones.
//!
//! Randomness is fixed by the configuration seed:
//!
//! - hash functions: the scheme is built with `HashParams::seed = seed`;
//! - trial `t`: a ChaCha8 generator seeded with `seed_from_u64(seed)` on
//!   stream `t`. Keys and values are drawn alternately, key first, as the
//!   low `b` bits of `next_u64`.
//! - sweep point `j`: runs with seed [`derive_seed`]`(seed, j)`.
//!
//! Trials only share the immutable hash scheme, so results do not depend on
//! how many workers run them.

use std::collections::HashSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{p2_asymptote, union_bound};
use crate::enumeration::ZTable;
use crate::error::{Error, Result};
use crate::hashing::{splitmix64, width_mask, CellHash, HashParams, HashScheme, SchemeKind};
use crate::iblt::Iblt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyModel {
    /// Independent uniform keys; duplicates are possible and left in.
    IidUniform,
    /// Uniform keys drawn without replacement.
    DistinctUniform,
}

impl std::fmt::Display for KeyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KeyModel::IidUniform => "iid",
            KeyModel::DistinctUniform => "distinct",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialConfig {
    /// Entries per trial.
    pub n: usize,
    /// Total cells, a multiple of `k`.
    pub m: usize,
    pub k: usize,
    /// Key and value width in bits.
    pub b: u32,
    pub trials: u64,
    pub seed: u64,
    pub scheme: SchemeKind,
    pub key_model: KeyModel,
}

/// Trials used when nothing else is asked for.
pub const DEFAULT_TRIALS: u64 = 100_000;

impl TrialConfig {
    /// A partitioned-uniform configuration with iid keys.
    pub fn new(n: usize, m: usize, k: usize, b: u32) -> Self {
        TrialConfig {
            n,
            m,
            k,
            b,
            trials: DEFAULT_TRIALS,
            seed: 0,
            scheme: SchemeKind::PartitionedUniform,
            key_model: KeyModel::IidUniform,
        }
    }

    pub fn ell(&self) -> usize {
        self.m / self.k
    }

    pub fn hash_params(&self) -> HashParams {
        HashParams::new(self.k, self.ell(), self.b, self.seed, self.scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 || self.m % self.k != 0 {
            return Err(Error::params(format!(
                "m={} must be a positive multiple of k={}",
                self.m, self.k
            )));
        }
        if self.trials == 0 {
            return Err(Error::params("trials must be positive"));
        }
        self.hash_params().validate()?;
        if self.scheme == SchemeKind::SsAvoiding && self.key_model != KeyModel::DistinctUniform {
            return Err(Error::params("ss-avoiding hashing assumes distinct keys; use the distinct key model"));
        }
        if self.key_model == KeyModel::DistinctUniform && (self.n as u128) > (width_mask(self.b) as u128 + 1) {
            return Err(Error::params(format!(
                "cannot draw {} distinct keys of {} bits",
                self.n, self.b
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub m: usize,
    pub ell: usize,
    pub n: usize,
    pub k: usize,
    pub b: u32,
    pub scheme: SchemeKind,
    pub key_model: KeyModel,
    pub trials: u64,
    pub failures: u64,
    /// Failed trials whose unrecovered entries are exactly two keys with the
    /// same hash tuple.
    pub pair_collisions: u64,
    pub p_hat: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound_raw: f64,
    pub bound_clamped: f64,
    pub p2: f64,
    pub seed: u64,
}

impl SimReport {
    pub fn ci_half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for `failures` out of `trials`.
pub fn wilson_interval(failures: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// The generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Seed of point `index` in a sweep started from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03);
    splitmix64(&mut state)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrialOutcome {
    pub failed: bool,
    pub pair_collision: bool,
}

/// Draws the pairs of one trial.
pub fn draw_pairs(cfg: &TrialConfig, rng: &mut ChaCha8Rng) -> Vec<(u64, u64)> {
    let mask = width_mask(cfg.b);
    let mut pairs = Vec::with_capacity(cfg.n);
    let mut seen = HashSet::new();
    while pairs.len() < cfg.n {
        let key = rng.next_u64() & mask;
        let value = rng.next_u64() & mask;
        if cfg.key_model == KeyModel::DistinctUniform && !seen.insert(key) {
            continue;
        }
        pairs.push((key, value));
    }
    pairs
}

/// Runs trial `trial` of `cfg` against `scheme`.
pub fn run_trial<H: CellHash>(scheme: &H, cfg: &TrialConfig, trial: u64) -> TrialOutcome {
    let mut rng = trial_rng(cfg.seed, trial);
    let mut inserted = draw_pairs(cfg, &mut rng);
    let mut table = Iblt::new(scheme);
    for &(key, value) in &inserted {
        table.insert(key, value);
    }
    let listing = table.list_entries_in_place();
    let mut recovered = listing.entries;
    inserted.sort_unstable();
    recovered.sort_unstable();
    if listing.status == crate::iblt::ListingStatus::Complete && inserted == recovered {
        return TrialOutcome::default();
    }
    let residual = multiset_difference(&inserted, &recovered);
    let pair_collision = residual.len() == 2 && scheme.indices(residual[0].0) == scheme.indices(residual[1].0);
    TrialOutcome { failed: true, pair_collision }
}

/// Elements of sorted `a` not matched in sorted `b`.
fn multiset_difference(a: &[(u64, u64)], b: &[(u64, u64)]) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < *x {
            j += 1;
        }
        if j < b.len() && b[j] == *x {
            j += 1;
        } else {
            out.push(*x);
        }
    }
    out
}

/// Runs Monte Carlo configurations and pairs them with the analytic bounds.
#[derive(Debug, Default)]
pub struct Simulator {
    ztable: ZTable,
    workers: usize,
}

impl Simulator {
    /// Uses rayon's global pool.
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs trials on exactly `workers` threads; 1 runs them inline.
    pub fn with_workers(workers: usize) -> Self {
        Simulator { ztable: ZTable::new(), workers }
    }

    pub fn ztable_mut(&mut self) -> &mut ZTable {
        &mut self.ztable
    }

    /// Counts `(failures, pair_collisions)` over all trials of `cfg`.
    pub fn count_failures(&self, cfg: &TrialConfig) -> Result<(u64, u64)> {
        cfg.validate()?;
        let scheme = HashScheme::new(cfg.hash_params())?;
        let one = |t: u64| {
            let o = run_trial(&scheme, cfg, t);
            (u64::from(o.failed), u64::from(o.pair_collision))
        };
        let add = |a: (u64, u64), b: (u64, u64)| (a.0 + b.0, a.1 + b.1);
        let counts = match self.workers {
            1 => (0..cfg.trials).map(one).fold((0, 0), add),
            0 => (0..cfg.trials).into_par_iter().map(one).reduce(|| (0, 0), add),
            w => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?
                .install(|| (0..cfg.trials).into_par_iter().map(one).reduce(|| (0, 0), add)),
        };
        Ok(counts)
    }

    pub fn run_trials(&mut self, cfg: &TrialConfig) -> Result<SimReport> {
        let (failures, pair_collisions) = self.count_failures(cfg)?;
        let ell = cfg.ell();
        let (bound_raw, bound_clamped, p2) = if cfg.n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let bound = union_bound(&mut self.ztable, ell, cfg.n, cfg.k)?;
            (bound.total, bound.total_clamped, p2_asymptote(ell, cfg.n, cfg.k)?)
        };
        let (ci_low, ci_high) = wilson_interval(failures, cfg.trials);
        Ok(SimReport {
            m: cfg.m,
            ell,
            n: cfg.n,
            k: cfg.k,
            b: cfg.b,
            scheme: cfg.scheme,
            key_model: cfg.key_model,
            trials: cfg.trials,
            failures,
            pair_collisions,
            p_hat: failures as f64 / cfg.trials as f64,
            ci_low,
            ci_high,
            bound_raw,
            bound_clamped,
            p2,
            seed: cfg.seed,
        })
    }

    /// One report per entry of `ms`, point `j` seeded with `derive_seed(base.seed, j)`.
    pub fn sweep(&mut self, base: &TrialConfig, ms: &[usize]) -> Result<Vec<SimReport>> {
        ms.iter().enumerate().map(|(j, &m)| self.sweep_point(base, m, j as u64)).collect()
    }

    /// Point `index` of a sweep: `base` with `m` cells and the derived seed.
    pub fn sweep_point(&mut self, base: &TrialConfig, m: usize, index: u64) -> Result<SimReport> {
        self.run_trials(&TrialConfig { m, seed: derive_seed(base.seed, index), ..*base })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (f, t) in [(0, 10), (0, 100_000), (1, 3), (50, 100), (100, 100), (7, 1_000_000)] {
            let (lo, hi) = wilson_interval(f, t);
            let p = f as f64 / t as f64;
            assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0, "{f}/{t}: [{lo}, {hi}]");
        }
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036_994).abs() < 1e-5);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_832).abs() < 1e-5 && (hi - 0.596_168).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        let good = TrialConfig::new(10, 30, 3, 32);
        assert!(good.validate().is_ok());
        assert!(TrialConfig { m: 31, ..good }.validate().is_err());
        assert!(TrialConfig { trials: 0, ..good }.validate().is_err());
        let ss = TrialConfig { m: 48, b: 12, scheme: SchemeKind::SsAvoiding, ..good };
        assert!(ss.validate().is_err());
        assert!(TrialConfig { key_model: KeyModel::DistinctUniform, ..ss }.validate().is_ok());
        let tiny = TrialConfig { n: 5, b: 2, key_model: KeyModel::DistinctUniform, ..good };
        assert!(tiny.validate().is_err());
    }

    #[test]
    fn single_entry_never_fails() {
        let cfg = TrialConfig { trials: 2_000, ..TrialConfig::new(1, 3, 3, 32) };
        let report = Simulator::with_workers(1).run_trials(&cfg).unwrap();
        assert_eq!(report.failures, 0);
        assert_eq!(report.p_hat, 0.0);
    }

    #[test]
    fn distinct_keys_are_distinct() {
        let cfg = TrialConfig { key_model: KeyModel::DistinctUniform, ..TrialConfig::new(16, 6, 3, 4) };
        for t in 0..50 {
            let pairs = draw_pairs(&cfg, &mut trial_rng(9, t));
            let keys: HashSet<_> = pairs.iter().map(|p| p.0).collect();
            assert_eq!(keys.len(), 16);
        }
    }

    #[test]
    fn trial_streams_are_stable() {
        let a: Vec<u64> = (0..4).map(|t| trial_rng(1, t).next_u64()).collect();
        let b: Vec<u64> = (0..4).map(|t| trial_rng(1, t).next_u64()).collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }

    #[test]
    fn duplicate_keys_count_as_failure() {
        // b = 1 leaves two possible keys, so four entries always repeat one.
        let cfg = TrialConfig { trials: 50, ..TrialConfig::new(4, 300, 3, 1) };
        let report = Simulator::with_workers(1).run_trials(&cfg).unwrap();
        assert_eq!(report.failures, 50);
    }

    #[test]
    fn workers_do_not_change_counts() {
        let cfg = TrialConfig { trials: 3_000, seed: 11, ..TrialConfig::new(20, 30, 3, 32) };
        let serial = Simulator::with_workers(1).count_failures(&cfg).unwrap();
        let pooled = Simulator::with_workers(3).count_failures(&cfg).unwrap();
        let global = Simulator::new().count_failures(&cfg).unwrap();
        assert_eq!(serial, pooled);
        assert_eq!(serial, global);
        assert!(serial.0 > 0);
    }

    #[test]
    fn multiset_difference_keeps_duplicates() {
        let a = [(1, 1), (1, 1), (2, 0), (3, 3)];
        let b = [(1, 1), (3, 3)];
        assert_eq!(multiset_difference(&a, &b), vec![(1, 1), (2, 0)]);
    }
}
