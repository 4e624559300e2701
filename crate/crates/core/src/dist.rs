//! Probability tables over fixed-length words.
//!
//! A [`CylinderDistribution`] is the common currency of the exact transfer
//! dynamic program, the brute-force oracle, the Monte Carlo estimator and
//! the Haar marginals: a sparse table mapping length-`m` words over the
//! group alphabet to probabilities. Words are keyed by their radix-|A|
//! index with position 0 most significant, so iteration order is the
//! lexicographic order on words.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::collections::BTreeMap;

/// Packs a word of canonical symbol indices into its lexicographic rank.
pub fn word_index(order: u64, syms: &[u32]) -> u64 {
    syms.iter().fold(0u64, |acc, &s| acc * order + s as u64)
}

/// Inverse of [`word_index`].
pub fn word_syms(order: u64, m: usize, mut idx: u64) -> Vec<u32> {
    let mut syms = vec![0u32; m];
    for slot in syms.iter_mut().rev() {
        *slot = (idx % order) as u32;
        idx /= order;
    }
    syms
}

/// A probability table over words of a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderDistribution<S: Scalar = f64> {
    m: usize,
    order: u64,
    table: BTreeMap<u64, S>,
}

impl<S: Scalar> CylinderDistribution<S> {
    /// Empty table for length-`m` words over an alphabet of `order` symbols.
    pub fn new(m: usize, order: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parameter("word length must be positive".into()));
        }
        if order == 0 {
            return Err(Error::Parameter("alphabet must be nonempty".into()));
        }
        let mut cap = 1u128;
        for _ in 0..m {
            cap = cap.saturating_mul(order as u128);
            if cap > (1u128 << 63) {
                return Err(Error::Resource(format!(
                    "word space {order}^{m} does not fit in an index"
                )));
            }
        }
        Ok(CylinderDistribution { m, order, table: BTreeMap::new() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Alphabet size |A|.
    pub fn order(&self) -> u64 {
        self.order
    }

    /// Number of words carrying mass.
    pub fn support_len(&self) -> usize {
        self.table.len()
    }

    pub fn get(&self, word: u64) -> S {
        self.table.get(&word).cloned().unwrap_or_else(S::zero)
    }

    pub fn get_word(&self, syms: &[u32]) -> S {
        debug_assert_eq!(syms.len(), self.m);
        self.get(word_index(self.order, syms))
    }

    /// Adds `mass` to a word; entries that end up zero are kept out.
    pub fn add_mass(&mut self, word: u64, mass: S) {
        if mass.is_zero() {
            return;
        }
        let entry = self.table.entry(word).or_insert_with(S::zero);
        *entry = entry.clone() + mass;
        if entry.is_zero() {
            self.table.remove(&word);
        }
    }

    pub fn set(&mut self, word: u64, mass: S) {
        if mass.is_zero() {
            self.table.remove(&word);
        } else {
            self.table.insert(word, mass);
        }
    }

    /// Iterates `(word index, probability)` in lexicographic word order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &S)> {
        self.table.iter().map(|(&w, p)| (w, p))
    }

    pub fn mass(&self) -> S {
        self.table.values().fold(S::zero(), |acc, p| acc + p.clone())
    }

    /// Divides every entry by `denom`.
    pub fn scale_down(&mut self, denom: S) {
        for p in self.table.values_mut() {
            *p = p.clone() / denom.clone();
        }
    }

    /// Pointwise sum; both tables must have the same shape.
    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        self.check_shape(other)?;
        for (w, p) in other.iter() {
            self.add_mass(w, p.clone());
        }
        Ok(())
    }

    /// Marginal over the first `m - 1` coordinates.
    pub fn sum_out_last(&self) -> Result<Self> {
        if self.m < 2 {
            return Err(Error::Parameter("need at least two coordinates".into()));
        }
        let mut out = CylinderDistribution::new(self.m - 1, self.order)?;
        for (w, p) in self.iter() {
            out.add_mass(w / self.order, p.clone());
        }
        Ok(out)
    }

    /// Marginal over a single coordinate.
    pub fn marginal_at(&self, pos: usize) -> Result<Self> {
        if pos >= self.m {
            return Err(Error::Parameter(format!("coordinate {pos} out of range")));
        }
        let mut out = CylinderDistribution::new(1, self.order)?;
        for (w, p) in self.iter() {
            let sym = word_syms(self.order, self.m, w)[pos];
            out.add_mass(sym as u64, p.clone());
        }
        Ok(out)
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.m != other.m || self.order != other.order {
            return Err(Error::Domain(format!(
                "distribution shape mismatch: ({}, {}) vs ({}, {})",
                self.m, self.order, other.m, other.order
            )));
        }
        Ok(())
    }

    /// Reporting view with `f64` entries.
    pub fn to_f64(&self) -> CylinderDistribution<f64> {
        let mut out = CylinderDistribution::new(self.m, self.order).expect("same shape");
        for (w, p) in self.iter() {
            out.set(w, p.to_f64_lossy());
        }
        out
    }
}

/// Total variation distance between two tables over the same word space:
/// half the L1 distance over the union of supports. Symmetric, in [0, 1].
pub fn tv_distance<S: Scalar>(
    d1: &CylinderDistribution<S>,
    d2: &CylinderDistribution<S>,
) -> Result<S> {
    d1.check_shape(d2)?;
    let mut sum = S::zero();
    let mut it1 = d1.iter().peekable();
    let mut it2 = d2.iter().peekable();
    loop {
        match (it1.peek(), it2.peek()) {
            (Some(&(w1, p1)), Some(&(w2, p2))) => {
                if w1 < w2 {
                    sum = sum + p1.abs();
                    it1.next();
                } else if w2 < w1 {
                    sum = sum + p2.abs();
                    it2.next();
                } else {
                    sum = sum + (p1.clone() - p2.clone()).abs();
                    it1.next();
                    it2.next();
                }
            }
            (Some(&(_, p1)), None) => {
                sum = sum + p1.abs();
                it1.next();
            }
            (None, Some(&(_, p2))) => {
                sum = sum + p2.abs();
                it2.next();
            }
            (None, None) => break,
        }
    }
    Ok(sum / S::ratio(2, 1))
}
