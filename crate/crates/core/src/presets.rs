//! Reference shifts and measures used across the test suites, the
//! documentation and the bundled configuration files.

use crate::error::Result;
use crate::group::GroupSpec;
use crate::measure::MarkovMeasure;
use crate::scalar::Scalar;
use crate::shift::{Caps, IncidenceMatrix, SubgroupShift};
use std::sync::Arc;

/// The full 2-shift: A = Z_2 with every transition allowed.
pub fn full_2_shift(caps: Caps) -> Result<SubgroupShift> {
    let spec = GroupSpec::new(2, &[1])?;
    SubgroupShift::validate(spec, IncidenceMatrix::full(2), caps)
}

/// The 2-block coding of the full 2-shift: A = Z_2 x Z_2 and
/// (a,b) -> (c,d) is allowed exactly when c = b. Its mixing index is 2.
pub fn two_block_shift(caps: Caps) -> Result<SubgroupShift> {
    let spec = GroupSpec::new(2, &[1, 1])?;
    let rows: Vec<Vec<bool>> = (0..4)
        .map(|g| (0..4).map(|h| h / 2 == g % 2).collect())
        .collect();
    SubgroupShift::validate(spec, IncidenceMatrix::from_rows(rows)?, caps)
}

fn bernoulli_rows<S: Scalar>(q: S) -> Vec<Vec<S>> {
    let p = S::one() - q.clone();
    vec![vec![p.clone(), q.clone()], vec![p, q]]
}

/// Bernoulli(q) on the full 2-shift: both rows are (1-q, q), so the symbols
/// are i.i.d. with P(1) = q.
pub fn bernoulli_full_measure(q: f64, caps: Caps) -> Result<MarkovMeasure<f64>> {
    let shift = Arc::new(full_2_shift(caps)?);
    MarkovMeasure::validate(shift, bernoulli_rows(q), None)
}

/// Exact-scalar variant of [`bernoulli_full_measure`] with q = num/den.
pub fn bernoulli_full_measure_exact(
    num: u64,
    den: u64,
    caps: Caps,
) -> Result<MarkovMeasure<crate::Exact>> {
    let shift = Arc::new(full_2_shift(caps)?);
    MarkovMeasure::validate(shift, bernoulli_rows(crate::Exact::ratio(num, den)), None)
}

fn split_rows<S: Scalar>(shift: &SubgroupShift, first: S) -> Vec<Vec<S>> {
    let n = shift.order() as usize;
    let second = S::one() - first.clone();
    (0..n as u32)
        .map(|g| {
            let mut row = vec![S::zero(); n];
            let followers = shift.followers_of(g);
            row[followers[0] as usize] = first.clone();
            row[followers[1] as usize] = second.clone();
            row
        })
        .collect()
}

/// The 2-block shift with each row split `first / (1 - first)` between its
/// two followers, the larger-index follower getting the complement.
pub fn two_block_measure(first: f64, caps: Caps) -> Result<MarkovMeasure<f64>> {
    let shift = Arc::new(two_block_shift(caps)?);
    let rows = split_rows(&shift, first);
    MarkovMeasure::validate(shift, rows, None)
}

/// Exact-scalar variant of [`two_block_measure`] with first = num/den.
pub fn two_block_measure_exact(
    num: u64,
    den: u64,
    caps: Caps,
) -> Result<MarkovMeasure<crate::Exact>> {
    let shift = Arc::new(two_block_shift(caps)?);
    let rows = split_rows(&shift, crate::Exact::ratio(num, den));
    MarkovMeasure::validate(shift, rows, None)
}
