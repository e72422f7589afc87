//! The invertible Bloom lookup table.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::hashing::{width_mask, CellHash, HashScheme};

/// One table slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Cell {
    pub count: i64,
    pub key_sum: u64,
    pub value_sum: u64,
}

impl Cell {
    pub fn is_zero(&self) -> bool {
        self.count == 0 && self.key_sum == 0 && self.value_sum == 0
    }

    fn apply(&mut self, key: u64, value: u64, delta: i64) {
        self.count += delta;
        self.key_sum ^= key;
        self.value_sum ^= value;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GetResult {
    Found(u64),
    Absent,
    /// No cell of the key can answer; the lookup failed.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListingStatus {
    Complete,
    /// Peeling stopped with nonzero cells left: a listing failure.
    Partial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ListingResult {
    /// Recovered pairs, in extraction order.
    pub entries: Vec<(u64, u64)>,
    pub status: ListingStatus,
    /// Nonzero cells remaining when peeling stopped.
    pub residual_cells: usize,
}

impl ListingResult {
    pub fn is_complete(&self) -> bool {
        self.status == ListingStatus::Complete
    }
}

/// An IBLT over `k` subtables of `ell` cells.
///
/// Keys and values are `b`-bit words where `b` is the scheme's
/// [`CellHash::key_bits`]; bits above `b` are dropped on every operation.
#[derive(Clone, Debug)]
pub struct Iblt<H = HashScheme> {
    cells: Vec<Cell>,
    hasher: H,
    mask: u64,
    scratch: Vec<usize>,
}

impl<H: CellHash> Iblt<H> {
    pub fn new(hasher: H) -> Self {
        let m = hasher.k() * hasher.ell();
        let mask = width_mask(hasher.key_bits());
        let scratch = vec![0; hasher.k()];
        Iblt { cells: vec![Cell::default(); m], hasher, mask, scratch }
    }

    pub fn hasher(&self) -> &H {
        &self.hasher
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn k(&self) -> usize {
        self.hasher.k()
    }

    pub fn ell(&self) -> usize {
        self.hasher.ell()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Cell::is_zero)
    }

    pub fn insert(&mut self, key: u64, value: u64) {
        self.update(key, value, 1);
    }

    /// Removes a pair without checking that it was ever inserted; counts may
    /// go negative.
    pub fn delete(&mut self, key: u64, value: u64) {
        self.update(key, value, -1);
    }

    fn update(&mut self, key: u64, value: u64, delta: i64) {
        let (key, value) = (key & self.mask, value & self.mask);
        self.hasher.indices_into(key, &mut self.scratch);
        for &i in &self.scratch {
            self.cells[i].apply(key, value, delta);
        }
    }

    /// Looks up `key`. A count-1 cell answers only if its key sum is `key`
    /// itself, so a pure cell holding some other entry yields
    /// [`GetResult::Inconclusive`] rather than a wrong value.
    pub fn get(&self, key: u64) -> GetResult {
        let key = key & self.mask;
        let mut idx = vec![0; self.k()];
        self.hasher.indices_into(key, &mut idx);
        if idx.iter().any(|&i| self.cells[i].count == 0) {
            return GetResult::Absent;
        }
        idx.iter()
            .map(|&i| &self.cells[i])
            .find(|c| c.count == 1 && c.key_sum == key)
            .map_or(GetResult::Inconclusive, |c| GetResult::Found(c.value_sum))
    }

    /// Adds every cell of `other` into `self`, giving the table of the
    /// multiset union. Both tables must share geometry and hash functions.
    pub fn combine(&mut self, other: &Iblt<H>) -> Result<()> {
        if self.cells.len() != other.cells.len() {
            return Err(Error::params("cannot combine tables of different sizes"));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.apply(b.key_sum, b.value_sum, b.count);
        }
        Ok(())
    }

    /// Lists the stored pairs without touching `self`.
    pub fn list_entries(&self) -> ListingResult
    where
        H: Clone,
    {
        self.clone().list_entries_in_place()
    }

    /// Peels the table in place, always taking the lowest-indexed count-1
    /// cell next. On return the table holds whatever could not be peeled.
    ///
    /// A count-1 cell whose key sum does not hash back to it is left alone.
    /// That can only happen after deleting pairs that were never inserted.
    pub fn list_entries_in_place(&mut self) -> ListingResult {
        let mut heap: BinaryHeap<Reverse<usize>> = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.count == 1)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut entries = Vec::new();
        while let Some(Reverse(i)) = heap.pop() {
            if let Some(pair) = self.peel_cell(i, |j| heap.push(Reverse(j))) {
                entries.push(pair);
            }
        }
        self.finish(entries)
    }

    /// Same peeling as [`Iblt::list_entries`], but the next count-1 cell is
    /// drawn at random. The outcome must not depend on the order.
    pub fn list_entries_randomized<R: Rng + ?Sized>(&self, rng: &mut R) -> ListingResult
    where
        H: Clone,
    {
        let mut t = self.clone();
        let mut pending: Vec<usize> = (0..t.cells.len()).filter(|&i| t.cells[i].count == 1).collect();
        let mut entries = Vec::new();
        while !pending.is_empty() {
            let i = pending.swap_remove(rng.random_range(0..pending.len()));
            if let Some(pair) = t.peel_cell(i, |j| pending.push(j)) {
                entries.push(pair);
            }
        }
        t.finish(entries)
    }

    /// Extracts the pair in cell `i` if it is a pure count-1 cell, reporting
    /// every cell that drops to count 1 through `on_single`.
    fn peel_cell(&mut self, i: usize, mut on_single: impl FnMut(usize)) -> Option<(u64, u64)> {
        let cell = self.cells[i];
        if cell.count != 1 {
            return None;
        }
        let (key, value) = (cell.key_sum, cell.value_sum);
        self.hasher.indices_into(key, &mut self.scratch);
        if !self.scratch.contains(&i) {
            return None;
        }
        for &j in &self.scratch {
            self.cells[j].apply(key, value, -1);
            if self.cells[j].count == 1 {
                on_single(j);
            }
        }
        Some((key, value))
    }

    fn finish(&self, entries: Vec<(u64, u64)>) -> ListingResult {
        let residual_cells = self.cells.iter().filter(|c| !c.is_zero()).count();
        let status = if residual_cells == 0 { ListingStatus::Complete } else { ListingStatus::Partial };
        ListingResult { entries, status, residual_cells }
    }
}

impl<H> PartialEq for Iblt<H> {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask && self.cells == other.cells
    }
}
