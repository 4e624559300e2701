//! Marginals of the iterated automaton Phi = id + shift.
//!
//! The n-th iterate acts coordinatewise as
//! `(Phi^n x)_i = sum_k C(n,k) x_{i+k}` with binomial weights reduced mod
//! p^s. Three engines compute the law of a length-m output window under a
//! compatible Markov measure: an exact transfer dynamic program, a
//! brute-force enumeration oracle, and a Monte Carlo estimator driven by
//! the regenerative sampler. On top of those sit Cesàro averaging against
//! the Haar marginal and the forced-block uniformity checks.

use crate::binomial::{binom_row_mod, carry_count};
use crate::dist::{tv_distance, word_index, CylinderDistribution};
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::measure::{delta_bound, MarkovMeasure, RegenSampler};
use crate::scalar::Scalar;
use crate::shift::SubgroupShift;
use std::collections::BTreeMap;

/// Window guard of the brute-force oracle.
const BRUTE_CAP: u64 = 20_000_000;

/// The reduced binomial row of the n-th iterate: entry k is C(n,k) mod p^s.
#[derive(Debug, Clone)]
pub struct PhiCoefficientRow {
    pub n: u64,
    pub coeffs: Vec<u64>,
}

/// Coefficient row of Phi^n over the torsion ring of the group.
pub fn phi_row(n: u64, spec: &GroupSpec) -> Result<PhiCoefficientRow> {
    let coeffs = binom_row_mod(n, spec.p(), spec.s())?;
    Ok(PhiCoefficientRow { n, coeffs })
}

/// Multiplication-by-residue lookup tables for every distinct coefficient.
fn coefficient_tables(
    shift: &SubgroupShift,
    coeffs: &[u64],
) -> Result<BTreeMap<u64, Vec<u32>>> {
    let spec = shift.spec();
    let mut tables = BTreeMap::new();
    for &c in coeffs {
        if tables.contains_key(&c) {
            continue;
        }
        let table: Result<Vec<u32>> = shift
            .elements()
            .iter()
            .map(|g| Ok(spec.element_index(&spec.scalar_mul(c as i64, g)?)? as u32))
            .collect();
        tables.insert(c, table?);
    }
    Ok(tables)
}

fn check_window(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::Parameter("window length m must be positive".into()));
    }
    Ok(())
}

/// Exact law of the output window ((Phi^n x)_0, ..., (Phi^n x)_{m-1}) when
/// x follows the stationary measure.
///
/// Forward dynamic program over symbol positions t = 0..n+m-1. The state
/// tracks the current symbol, one partial accumulator per live output
/// coordinate, and the finalized output prefix; coordinate j is complete
/// once t reaches j + n and its digit moves from the accumulators into the
/// prefix. Live state stays below |A|^(1 + min(m, n+1)) and the whole table
/// over allowed output words is produced in one pass.
pub fn exact_marginal<S: Scalar>(
    measure: &MarkovMeasure<S>,
    n: u64,
    m: u32,
) -> Result<CylinderDistribution<S>> {
    check_window(m)?;
    let shift = measure.shift();
    let a = shift.order() as usize;
    let caps = shift.caps();
    let mut work = (n + m as u64) as u128;
    for _ in 0..=m {
        work = work.saturating_mul(a as u128);
    }
    if work > caps.work_cap as u128 {
        return Err(Error::Resource(format!(
            "exact marginal work {work} exceeds cap {}",
            caps.work_cap
        )));
    }
    let row = phi_row(n, shift.spec())?;
    let tables = coefficient_tables(shift, &row.coeffs)?;
    let len = n as usize + m as usize;
    let m = m as usize;
    let n = n as usize;

    // geometry of the state after processing position t
    let fin_after = |t: usize| -> usize { (t + 1).saturating_sub(n).min(m) };
    let live_after = |t: usize| -> (usize, usize) {
        let lo = (t + 1).saturating_sub(n).min(m);
        let hi = t.min(m - 1);
        if hi + 1 > lo {
            (lo, hi + 1 - lo)
        } else {
            (lo, 0)
        }
    };

    let size_after = |t: usize| -> usize {
        let (_, nl) = live_after(t);
        a.pow((fin_after(t) + nl + 1) as u32)
    };

    let mut cur = vec![S::zero(); size_after(0)];
    // position 0: x_0 drawn from pi, coordinate 0 goes live with digit
    // c_0 * x_0, and finalizes immediately when n = 0
    {
        let table0 = &tables[&row.coeffs[0]];
        for h in 0..a {
            let weight = measure.pi()[h].clone();
            if weight.is_zero() {
                continue;
            }
            let digit = table0[h] as usize;
            // after t = 0 exactly one coordinate is tracked, finalized or not
            let idx = digit * a + h;
            cur[idx] = cur[idx].clone() + weight;
        }
    }

    for t in 1..len {
        let (lo_b, nl_b) = live_after(t - 1);
        let fin_b = fin_after(t - 1);
        let (_, nl_a) = live_after(t);
        let fin_a = fin_after(t);
        let mut next = vec![S::zero(); size_after(t)];

        let opening = t <= m - 1; // coordinate t goes live
        let closing = fin_a > fin_b; // coordinate t - n finalizes
        let nl_mid = nl_b + usize::from(opening);
        debug_assert_eq!(nl_mid - usize::from(closing), nl_a);

        let acc_span = a.pow(nl_b as u32);
        let mut digits = vec![0usize; nl_mid];
        for state in 0..cur.len() {
            let weight = cur[state].clone();
            if weight.is_zero() {
                continue;
            }
            let g = state % a;
            let acc = (state / a) % acc_span;
            let fin = state / a / acc_span;

            // unpack accumulators, lowest coordinate first
            let mut rest = acc;
            for slot in (0..nl_b).rev() {
                digits[slot] = rest % a;
                rest /= a;
            }
            if opening {
                digits[nl_b] = 0;
            }

            for &h in shift.followers_of(g as u32) {
                let p = measure.prob(g as u32, h);
                if p.is_zero() {
                    continue;
                }
                // live coordinates at position t are j = lo_b .. lo_b+nl_mid-1
                let mut updated = [0usize; 64];
                for (slot, &d) in digits.iter().enumerate() {
                    let j = lo_b + slot;
                    let k = t - j;
                    let contrib = tables[&row.coeffs[k]][h as usize];
                    updated[slot] = shift.add_idx(d as u32, contrib) as usize;
                }
                let (fin_new, acc_new) = if closing {
                    (fin * a + updated[0], pack(&updated[1..nl_mid], a))
                } else {
                    (fin, pack(&updated[..nl_mid], a))
                };
                let idx = (fin_new * a.pow(nl_a as u32) + acc_new) * a + h as usize;
                next[idx] = next[idx].clone() + weight.clone() * p;
            }
        }
        cur = next;
    }

    let mut out = CylinderDistribution::new(m, a as u64)?;
    for (state, weight) in cur.iter().enumerate() {
        if weight.is_zero() {
            continue;
        }
        let fin = state / a; // live set is empty at the end
        out.add_mass(fin as u64, weight.clone());
    }
    Ok(out)
}

fn pack(digits: &[usize], a: usize) -> usize {
    digits.iter().fold(0usize, |acc, &d| acc * a + d)
}

/// Independent oracle for [`exact_marginal`]: enumerates every allowed word
/// of length n + m, weighs it by pi and the transition products, and applies
/// the coefficient row directly.
pub fn brute_marginal<S: Scalar>(
    measure: &MarkovMeasure<S>,
    n: u64,
    m: u32,
) -> Result<CylinderDistribution<S>> {
    check_window(m)?;
    let shift = measure.shift();
    let len = n as usize + m as usize;
    let count = shift.word_count(len as u32)?;
    if count > BRUTE_CAP {
        return Err(Error::Resource(format!(
            "brute-force enumeration of {count} words exceeds cap {BRUTE_CAP}"
        )));
    }
    let row = phi_row(n, shift.spec())?;
    let tables = coefficient_tables(shift, &row.coeffs)?;
    let a = shift.order();
    let mut out = CylinderDistribution::new(m as usize, a)?;

    // depth-first walk keeping the running weight per prefix
    let mut word: Vec<u32> = Vec::with_capacity(len);
    let mut weights: Vec<S> = Vec::with_capacity(len + 1);
    let mut stack: Vec<(usize, u32)> = (0..a as u32).rev().map(|h| (0, h)).collect();
    while let Some((depth, sym)) = stack.pop() {
        word.truncate(depth);
        weights.truncate(depth);
        let w = if depth == 0 {
            measure.pi()[sym as usize].clone()
        } else {
            weights[depth - 1].clone() * measure.prob(word[depth - 1], sym)
        };
        word.push(sym);
        weights.push(w);
        if depth + 1 == len {
            let weight = weights[depth].clone();
            let mut output = 0u64;
            for j in 0..m as usize {
                let mut acc = 0u32;
                for k in 0..row.coeffs.len() {
                    acc = shift.add_idx(acc, tables[&row.coeffs[k]][word[j + k] as usize]);
                }
                output = output * a + acc as u64;
            }
            out.add_mass(output, weight);
        } else {
            for &h in shift.followers_of(sym).iter().rev() {
                stack.push((depth + 1, h));
            }
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of the same window law from sampled paths, with the
/// output window read at position `offset`.
pub fn mc_marginal_at(
    sampler: &RegenSampler,
    n: u64,
    m: u32,
    offset: u32,
    trials: u64,
    seed: u64,
) -> Result<CylinderDistribution<f64>> {
    check_window(m)?;
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let shift = sampler.shift().clone();
    let row = phi_row(n, shift.spec())?;
    let tables = coefficient_tables(&shift, &row.coeffs)?;
    let a = shift.order();
    let len = offset as usize + m as usize + n as usize;
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for trial in 0..trials {
        let trace = sampler.sample_path_stream(len, seed, trial, None)?;
        let mut output = 0u64;
        for j in offset as usize..(offset + m) as usize {
            let mut acc = 0u32;
            for k in 0..row.coeffs.len() {
                acc = shift.add_idx(acc, tables[&row.coeffs[k]][trace.x[j + k] as usize]);
            }
            output = output * a + acc as u64;
        }
        *counts.entry(output).or_insert(0) += 1;
    }
    let mut out = CylinderDistribution::new(m as usize, a)?;
    for (word, count) in counts {
        out.set(word, count as f64 / trials as f64);
    }
    Ok(out)
}

/// [`mc_marginal_at`] with the window at the origin.
pub fn mc_marginal(
    sampler: &RegenSampler,
    n: u64,
    m: u32,
    trials: u64,
    seed: u64,
) -> Result<CylinderDistribution<f64>> {
    mc_marginal_at(sampler, n, m, 0, trials, seed)
}

/// Which iterates enter a Cesàro scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsequence {
    /// Every n.
    All,
    /// Multiples of p^a.
    PowerMultiples { a: u32 },
    /// Digit-rich multiples of p^a.
    DigitRich { a: u32 },
    /// The residue class n = j mod p^a.
    Residue { j: u64, a: u32 },
}

impl Subsequence {
    pub fn contains(&self, n: u64, p: u64) -> Result<bool> {
        Ok(match *self {
            Subsequence::All => true,
            Subsequence::PowerMultiples { a } => n % power(p, a)? == 0,
            Subsequence::DigitRich { a } => crate::binomial::digit_rich(n, a, p)?,
            Subsequence::Residue { j, a } => n % power(p, a)? == j % power(p, a)?,
        })
    }

    pub fn tag(&self) -> String {
        match *self {
            Subsequence::All => "all".into(),
            Subsequence::PowerMultiples { a } => format!("pa:{a}"),
            Subsequence::DigitRich { a } => format!("m0:{a}"),
            Subsequence::Residue { j, a } => format!("res:{j},{a}"),
        }
    }
}

fn power(p: u64, a: u32) -> Result<u64> {
    let mut acc = 1u64;
    for _ in 0..a {
        acc = acc
            .checked_mul(p)
            .ok_or_else(|| Error::Parameter(format!("{p}^{a} overflows u64")))?;
    }
    Ok(acc)
}

/// Engine choice for per-iterate marginals.
#[derive(Debug, Clone, Copy)]
pub enum Engine {
    Exact,
    MonteCarlo { trials: u64 },
}

/// One scanned iterate: its distance to Haar and the distance of the
/// running Cesàro average to Haar after including it.
#[derive(Debug, Clone)]
pub struct CesaroStep<S: Scalar = f64> {
    pub n: u64,
    pub tv_n: S,
    pub cesaro_tv: S,
}

/// Full record of a Cesàro scan.
#[derive(Debug, Clone)]
pub struct CesaroReport<S: Scalar = f64> {
    pub m: u32,
    pub horizon: u64,
    pub subsequence: String,
    pub per_n: Vec<CesaroStep<S>>,
    /// Final running-average distribution, absent when no iterate matched.
    pub mean: Option<CylinderDistribution<S>>,
}

impl<S: Scalar> CesaroReport<S> {
    pub fn final_cesaro_tv(&self) -> Option<S> {
        self.per_n.last().map(|step| step.cesaro_tv.clone())
    }
}

/// Scans n over the chosen subsequence inside [0, N), accumulating the
/// running average of the window marginals and its distance to the Haar
/// marginal. The exact engine refuses (rather than degrades) when the
/// work cap is exceeded.
pub fn cesaro_scan<S: Scalar>(
    measure: &MarkovMeasure<S>,
    m: u32,
    horizon: u64,
    subsequence: Subsequence,
    engine: Engine,
    seed: u64,
) -> Result<CesaroReport<S>> {
    check_window(m)?;
    let shift = measure.shift();
    let p = shift.spec().p();
    let haar = shift.haar_marginal::<S>(m)?;
    let sampler = match engine {
        Engine::Exact => None,
        Engine::MonteCarlo { trials } => {
            if trials == 0 {
                return Err(Error::Parameter("trials must be at least 1".into()));
            }
            Some(RegenSampler::build(measure.to_f64(), None, seed)?)
        }
    };

    let mut per_n = Vec::new();
    let mut sum: Option<CylinderDistribution<S>> = None;
    let mut count = 0u64;
    for n in 0..horizon {
        if !subsequence.contains(n, p)? {
            continue;
        }
        let dist = match engine {
            Engine::Exact => exact_marginal(measure, n, m)?,
            Engine::MonteCarlo { trials } => {
                let sampler = sampler.as_ref().expect("built above");
                let estimate = mc_marginal(sampler, n, m, trials, seed.wrapping_add(n))?;
                let mut lifted = CylinderDistribution::<S>::new(m as usize, shift.order())?;
                for (w, &v) in estimate.iter() {
                    lifted.set(w, S::from_f64(v).expect("probability fits the scalar"));
                }
                lifted
            }
        };
        let tv_n = tv_distance(&dist, &haar)?;
        count += 1;
        match &mut sum {
            None => sum = Some(dist),
            Some(total) => total.accumulate(&dist)?,
        }
        let mut mean = sum.clone().expect("set above");
        mean.scale_down(S::from_u64(count).expect("count fits the scalar"));
        let cesaro_tv = tv_distance(&mean, &haar)?;
        per_n.push(CesaroStep { n, tv_n, cesaro_tv });
    }
    let mean = sum.map(|mut total| {
        total.scale_down(S::from_u64(count).expect("count fits the scalar"));
        total
    });
    Ok(CesaroReport { m, horizon, subsequence: subsequence.tag(), per_n, mean })
}

/// Outcome of a forced-block uniformity experiment.
#[derive(Debug, Clone)]
pub struct UniformityReport {
    /// Target mass of each allowed window word.
    pub gamma: f64,
    pub trials: u64,
    /// Observed window frequencies.
    pub freqs: CylinderDistribution<f64>,
    /// Largest |frequency - gamma| over allowed words.
    pub max_dev: f64,
    /// Binomial standard error sqrt(gamma (1 - gamma) / trials).
    pub std_err: f64,
    /// Deviation within four standard errors; absent when trials = 0.
    pub pass: Option<bool>,
    /// Tallies landing outside the shift language (always zero).
    pub off_support: u64,
    /// Window frequencies conditioned on the most frequent value of a
    /// recorded outside statistic.
    pub conditional: Option<ConditionalCheck>,
    /// Same check against a recorded suffix symbol (two-sided runs only).
    pub suffix_conditional: Option<ConditionalCheck>,
    /// Frequencies of the first window coordinate alone.
    pub site_marginal: Vec<f64>,
}

/// Conditioned re-check of window uniformity.
#[derive(Debug, Clone)]
pub struct ConditionalCheck {
    /// Conditioning symbol (canonical index).
    pub symbol: u32,
    /// Subsample size.
    pub count: u64,
    pub max_dev: f64,
    pub std_err: f64,
    pub pass: bool,
}

const PASS_SIGMAS: f64 = 4.0;

struct WindowTally {
    counts: BTreeMap<u64, u64>,
    by_statistic: BTreeMap<u32, BTreeMap<u64, u64>>,
    site_counts: Vec<u64>,
    off_support: u64,
}

impl WindowTally {
    fn new(order: u64) -> Self {
        WindowTally {
            counts: BTreeMap::new(),
            by_statistic: BTreeMap::new(),
            site_counts: vec![0; order as usize],
            off_support: 0,
        }
    }

    fn record(&mut self, shift: &SubgroupShift, window: &[u32], statistic: Option<u32>) {
        if !shift.is_word(window) {
            self.off_support += 1;
        }
        let idx = word_index(shift.order(), window);
        *self.counts.entry(idx).or_insert(0) += 1;
        self.site_counts[window[0] as usize] += 1;
        if let Some(stat) = statistic {
            *self.by_statistic.entry(stat).or_default().entry(idx).or_insert(0) += 1;
        }
    }

    fn deviation(counts: &BTreeMap<u64, u64>, total: u64, words: &[u64], gamma: f64) -> f64 {
        words
            .iter()
            .map(|w| {
                let freq = counts.get(w).copied().unwrap_or(0) as f64 / total as f64;
                (freq - gamma).abs()
            })
            .fold(0.0, f64::max)
    }

    fn into_report(
        self,
        shift: &SubgroupShift,
        window_len: u32,
        gamma: f64,
        trials: u64,
        want_conditional: bool,
        suffix: Option<WindowTally>,
    ) -> Result<UniformityReport> {
        let words: Vec<u64> = shift
            .enumerate_words(window_len)?
            .iter()
            .map(|w| word_index(shift.order(), w))
            .collect();
        let mut freqs = CylinderDistribution::new(window_len as usize, shift.order())?;
        let mut site_marginal = vec![0.0; shift.order() as usize];
        if trials == 0 {
            return Ok(UniformityReport {
                gamma,
                trials,
                freqs,
                max_dev: 0.0,
                std_err: 0.0,
                pass: None,
                off_support: 0,
                conditional: None,
                suffix_conditional: None,
                site_marginal,
            });
        }
        for (&w, &c) in &self.counts {
            freqs.set(w, c as f64 / trials as f64);
        }
        for (g, &c) in self.site_counts.iter().enumerate() {
            site_marginal[g] = c as f64 / trials as f64;
        }
        let max_dev = Self::deviation(&self.counts, trials, &words, gamma);
        let std_err = (gamma * (1.0 - gamma) / trials as f64).sqrt();
        let conditional = if want_conditional {
            self.conditional_check(&words, gamma)
        } else {
            None
        };
        let suffix_conditional =
            suffix.and_then(|tally| tally.conditional_check(&words, gamma));
        Ok(UniformityReport {
            gamma,
            trials,
            freqs,
            max_dev,
            std_err,
            pass: Some(max_dev <= PASS_SIGMAS * std_err),
            off_support: self.off_support,
            conditional,
            suffix_conditional,
            site_marginal,
        })
    }

    fn conditional_check(&self, words: &[u64], gamma: f64) -> Option<ConditionalCheck> {
        let (&symbol, sub) = self
            .by_statistic
            .iter()
            .max_by_key(|(sym, sub)| (sub.values().sum::<u64>(), std::cmp::Reverse(**sym)))?;
        let count: u64 = sub.values().sum();
        if count == 0 {
            return None;
        }
        let max_dev = Self::deviation(sub, count, words, gamma);
        let std_err = (gamma * (1.0 - gamma) / count as f64).sqrt();
        Some(ConditionalCheck {
            symbol,
            count,
            max_dev,
            std_err,
            pass: max_dev <= PASS_SIGMAS * std_err,
        })
    }
}

/// Samples paths with the block U_{k-r} .. U_{k+m} forced to one (extended
/// by r more indices when `two_sided`) and tallies the window x_k .. x_{k+m}
/// against the uniform mass gamma_{m+1}. Also records the same tally
/// conditioned on x_0, and on the first symbol after the forced block in
/// two-sided runs.
pub fn forced_window_uniformity(
    sampler: &RegenSampler,
    k: u32,
    m: u32,
    trials: u64,
    seed: u64,
    two_sided: bool,
) -> Result<UniformityReport> {
    let shift = sampler.shift().clone();
    let r = shift.r();
    if k < r {
        return Err(Error::Parameter(format!("k = {k} below the mixing index r = {r}")));
    }
    let hi = if two_sided { k + m + r } else { k + m };
    let suffix_pos = (hi + 1) as usize;
    let len = if two_sided { suffix_pos + 1 } else { (k + m) as usize + 1 };
    let gamma: f64 = shift.gamma(m + 1)?;
    let mut tally = WindowTally::new(shift.order());
    let mut suffix_tally = two_sided.then(|| WindowTally::new(shift.order()));
    for trial in 0..trials {
        let trace =
            sampler.sample_path_stream(len, seed, trial, Some(((k - r) as usize, hi as usize)))?;
        let window = &trace.x[k as usize..=(k + m) as usize];
        tally.record(&shift, window, Some(trace.x[0]));
        if let Some(suffix_tally) = suffix_tally.as_mut() {
            suffix_tally.record(&shift, window, Some(trace.x[suffix_pos]));
        }
    }
    tally.into_report(&shift, m + 1, gamma, trials, true, suffix_tally)
}

/// Samples paths with the block around an isolated coefficient position
/// forced to one and tallies the output window of Phi^n against
/// gamma_{m+1}.
///
/// Preconditions: n >= 2r + 2m + 1 and k must be (r+m, r+m)-isolated in n.
/// The window is read at offset max(0, r - k), which leaves the law
/// unchanged by stationarity while keeping every forced index nonnegative.
pub fn forced_iterate_uniformity(
    measure: &MarkovMeasure<f64>,
    n: u64,
    k: u64,
    m: u32,
    trials: u64,
    seed: u64,
) -> Result<UniformityReport> {
    let shift = measure.shift().clone();
    let r = shift.r() as u64;
    let m64 = m as u64;
    if n < 2 * r + 2 * m64 + 1 {
        return Err(Error::Parameter(format!(
            "n = {n} below 2r + 2m + 1 = {}",
            2 * r + 2 * m64 + 1
        )));
    }
    if k > n {
        return Err(Error::Parameter(format!("k = {k} outside [0, {n}]")));
    }
    let radius = r + m64;
    if !is_isolated(n, k, radius, radius, shift.spec().p(), shift.spec().s())? {
        return Err(Error::Parameter(format!(
            "k = {k} is not ({radius}, {radius})-isolated in {n}"
        )));
    }
    let offset = r.saturating_sub(k);
    let lo = (offset + k - r) as usize;
    let hi = (offset + k + r + m64) as usize;
    let len = ((offset + m64 + n) as usize).max(hi) + 1;

    let sampler = RegenSampler::build(measure.clone(), None, seed)?;
    let row = phi_row(n, shift.spec())?;
    let tables = coefficient_tables(&shift, &row.coeffs)?;
    let gamma: f64 = shift.gamma(m + 1)?;
    let mut tally = WindowTally::new(shift.order());
    let mut window = vec![0u32; m as usize + 1];
    for trial in 0..trials {
        let trace = sampler.sample_path_stream(len, seed, trial, Some((lo, hi)))?;
        for (j, slot) in window.iter_mut().enumerate() {
            let mut acc = 0u32;
            for kk in 0..row.coeffs.len() {
                acc = shift.add_idx(acc, tables[&row.coeffs[kk]][trace.x[offset as usize + j + kk] as usize]);
            }
            *slot = acc;
        }
        tally.record(&shift, &window, None);
    }
    tally.into_report(&shift, m + 1, gamma, trials, false, None)
}

/// Direct isolation test of a single position, by carry counts on the
/// window (out-of-range neighbours vanish by convention).
pub fn is_isolated(n: u64, k: u64, m: u64, ell: u64, p: u64, s: u32) -> Result<bool> {
    if k > n {
        return Ok(false);
    }
    if carry_count(n, k, p)? != 0 {
        return Ok(false);
    }
    let lo = k as i64 - m as i64;
    let hi = k as i64 + ell as i64;
    for kk in lo..=hi {
        if kk == k as i64 || kk < 0 || kk as u64 > n {
            continue;
        }
        if carry_count(n, kk as u64, p)? < s {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One cell of the Haar-invariance sweep.
#[derive(Debug, Clone, Copy)]
pub struct HaarCell {
    pub n: u64,
    pub m: u32,
    pub tv: f64,
}

/// Result of sweeping TV(exact marginal of Phi^n Haar, Haar marginal).
#[derive(Debug, Clone)]
pub struct HaarInvarianceReport {
    pub cells: Vec<HaarCell>,
    pub max_tv: f64,
    pub pass: bool,
}

const HAAR_FIXED_TOL: f64 = 1e-12;

/// Verifies that the Haar measure is fixed by every power of the automaton
/// at the exact-engine level: TV stays below 1e-12 for all n <= n_max,
/// 1 <= m <= m_max.
pub fn check_haar_fixed(
    shift: &std::sync::Arc<SubgroupShift>,
    n_max: u64,
    m_max: u32,
) -> Result<HaarInvarianceReport> {
    let haar_measure = MarkovMeasure::<f64>::haar(shift.clone())?;
    let mut cells = Vec::new();
    let mut max_tv = 0.0f64;
    for m in 1..=m_max {
        let target = shift.haar_marginal::<f64>(m)?;
        for n in 0..=n_max {
            let dist = exact_marginal(&haar_measure, n, m)?;
            let tv = tv_distance(&dist, &target)?;
            max_tv = max_tv.max(tv);
            cells.push(HaarCell { n, m, tv });
        }
    }
    Ok(HaarInvarianceReport { cells, max_tv, pass: max_tv <= HAAR_FIXED_TOL })
}

/// The counting side of the randomization bound for one iterate: how many
/// isolated positions exist, the digit lower bound, and the resulting
/// (numerically tiny) distance bound.
#[derive(Debug, Clone, Copy)]
pub struct RandomizationBound {
    pub n: u64,
    /// Window radius m' = m + r.
    pub m_prime: u64,
    pub isolated_count: u64,
    /// 2^(xi_{a+i}(n)) - 1 with i = [log_p(n)/2].
    pub digit_bound: u64,
    /// n^(1/C) - 1 with C = 5 log2(p).
    pub power_bound: f64,
    /// (1 - delta)^(n^(1/C) - 1) with delta for block length 2m'.
    pub tv_bound: f64,
    pub i: u32,
}

/// Computes the chained bound quantities for a digit-rich iterate.
pub fn randomization_bound(
    shift: &SubgroupShift,
    n: u64,
    a: u32,
    alpha: f64,
    m: u32,
) -> Result<RandomizationBound> {
    check_window(m)?;
    let p = shift.spec().p();
    let s = shift.spec().s();
    let m_prime = m as u64 + shift.r() as u64;
    let report = crate::binomial::isolated_set(n, m_prime, m_prime, p, s)?;
    let mut i = 0u32;
    while power(p, 2 * (i + 1)).map_or(false, |pw| pw <= n) {
        i += 1;
    }
    if i < a {
        return Err(Error::Parameter(format!("[log_p(n)/2] = {i} below a = {a}")));
    }
    let xi = report.xi(a as u64, i as u64);
    let digit_bound = if xi >= 64 { u64::MAX } else { (1u64 << xi) - 1 };
    let c = 5.0 * (p as f64).log2();
    let power_bound = (n as f64).powf(1.0 / c) - 1.0;
    let delta = delta_bound(alpha, 2 * m_prime as usize)?;
    let tv_bound = (1.0 - delta).powf(power_bound.max(0.0));
    Ok(RandomizationBound {
        n,
        m_prime,
        isolated_count: report.isolated.len() as u64,
        digit_bound,
        power_bound,
        tv_bound,
        i,
    })
}
