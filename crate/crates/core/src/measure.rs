//! Compatible Markov measures and their regenerative construction.
//!
//! A measure (pi, P) is compatible with the shift when P is positive exactly
//! on the allowed edges. Splitting each row as
//! `P = alpha * Uniform(coset) + (1 - alpha) * Q` turns the chain into a
//! deterministic function of three i.i.d. sequences: Bernoulli(alpha) bits
//! U, coset offsets W uniform on the follower subgroup, and uniform reals V
//! selecting from the residual kernel Q. At indices where U = 1 the next
//! symbol is coset-uniform and independent of the past, which is what the
//! renewal machinery exploits.

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::scalar::Scalar;
use crate::shift::SubgroupShift;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::sync::Arc;

const ROW_SUM_TOL: (u64, u64) = (1, 1_000_000_000_000);
const SOLVED_PI_TOL: (u64, u64) = (1, 10_000_000_000);
const SUPPLIED_PI_TOL: (u64, u64) = (1, 100_000_000);

/// A Markov measure compatible with a subgroup shift.
#[derive(Debug, Clone)]
pub struct MarkovMeasure<S: Scalar = f64> {
    shift: Arc<SubgroupShift>,
    transition: Vec<Vec<S>>,
    pi: Vec<S>,
}

impl<S: Scalar> MarkovMeasure<S> {
    /// Validates the support condition and stochasticity; solves for the
    /// stationary vector when none is supplied.
    pub fn validate(
        shift: Arc<SubgroupShift>,
        transition: Vec<Vec<S>>,
        pi: Option<Vec<S>>,
    ) -> Result<Self> {
        let n = shift.order() as usize;
        if transition.len() != n || transition.iter().any(|row| row.len() != n) {
            return Err(Error::Parameter(format!("transition matrix must be {n}x{n}")));
        }
        let zero = S::zero();
        for g in 0..n {
            let mut sum = S::zero();
            for h in 0..n {
                let entry = &transition[g][h];
                if *entry < zero {
                    return Err(Error::Validation(format!("negative entry at ({g},{h})")));
                }
                let edge = shift.edge(g as u32, h as u32);
                if edge && entry.is_zero() {
                    return Err(Error::Compatibility(format!(
                        "entry ({g},{h}) is zero on an allowed edge"
                    )));
                }
                if !edge && !entry.is_zero() {
                    return Err(Error::Compatibility(format!(
                        "entry ({g},{h}) is positive off the allowed edges"
                    )));
                }
                sum = sum + entry.clone();
            }
            if (sum - S::one()).abs() > S::ratio(ROW_SUM_TOL.0, ROW_SUM_TOL.1) {
                return Err(Error::Validation(format!("row {g} does not sum to 1")));
            }
        }

        let pi = match pi {
            Some(pi) => {
                if pi.len() != n {
                    return Err(Error::Parameter(format!("pi must have {n} entries")));
                }
                check_stationary(&transition, &pi, S::ratio(SUPPLIED_PI_TOL.0, SUPPLIED_PI_TOL.1))?;
                pi
            }
            None => {
                let pi = solve_stationary(&transition)?;
                check_stationary(&transition, &pi, S::ratio(SOLVED_PI_TOL.0, SOLVED_PI_TOL.1))?;
                pi
            }
        };
        if pi.iter().any(|p| *p <= S::zero()) {
            return Err(Error::Validation("stationary vector is not strictly positive".into()));
        }
        Ok(MarkovMeasure { shift, transition, pi })
    }

    /// The Haar measure: uniform kernel on follower cosets, uniform
    /// stationary vector.
    pub fn haar(shift: Arc<SubgroupShift>) -> Result<Self> {
        let (kernel, rho) = shift.haar_kernel::<S>();
        Self::validate(shift, kernel, Some(rho))
    }

    pub fn shift(&self) -> &Arc<SubgroupShift> {
        &self.shift
    }

    pub fn transition(&self) -> &[Vec<S>] {
        &self.transition
    }

    pub fn prob(&self, g: u32, h: u32) -> S {
        self.transition[g as usize][h as usize].clone()
    }

    pub fn pi(&self) -> &[S] {
        &self.pi
    }

    /// Smallest transition probability over allowed edges.
    pub fn min_edge_prob(&self) -> S {
        let n = self.shift.order() as usize;
        let mut min: Option<S> = None;
        for g in 0..n {
            for h in 0..n {
                if self.shift.edge(g as u32, h as u32) {
                    let v = self.transition[g][h].clone();
                    min = Some(match min {
                        None => v,
                        Some(m) => {
                            if v < m {
                                v
                            } else {
                                m
                            }
                        }
                    });
                }
            }
        }
        min.expect("validated shift has edges")
    }

    /// pi(w_0) * P(w_0, w_1) * ... for a word of canonical symbol indices.
    pub fn word_weight(&self, word: &[u32]) -> S {
        let mut weight = self.pi[word[0] as usize].clone();
        for pair in word.windows(2) {
            weight = weight * self.transition[pair[0] as usize][pair[1] as usize].clone();
        }
        weight
    }

    /// Reporting view with `f64` entries.
    pub fn to_f64(&self) -> MarkovMeasure<f64> {
        MarkovMeasure {
            shift: Arc::clone(&self.shift),
            transition: self
                .transition
                .iter()
                .map(|row| row.iter().map(Scalar::to_f64_lossy).collect())
                .collect(),
            pi: self.pi.iter().map(Scalar::to_f64_lossy).collect(),
        }
    }
}

fn check_stationary<S: Scalar>(transition: &[Vec<S>], pi: &[S], tol: S) -> Result<()> {
    let n = pi.len();
    let mut total = S::zero();
    for p in pi {
        if *p < S::zero() {
            return Err(Error::Validation("pi has a negative entry".into()));
        }
        total = total + p.clone();
    }
    if (total - S::one()).abs() > tol.clone() {
        return Err(Error::Validation("pi does not sum to 1".into()));
    }
    for h in 0..n {
        let mut acc = S::zero();
        for g in 0..n {
            acc = acc + pi[g].clone() * transition[g][h].clone();
        }
        if (acc - pi[h].clone()).abs() > tol {
            return Err(Error::Validation(format!("pi * P differs from pi at column {h}")));
        }
    }
    Ok(())
}

/// Solves pi * P = pi, sum(pi) = 1 by dense elimination: the last equation
/// of (P^T - I) x = 0 is replaced by the normalization row.
fn solve_stationary<S: Scalar>(transition: &[Vec<S>]) -> Result<Vec<S>> {
    let n = transition.len();
    let mut a = vec![vec![S::zero(); n]; n];
    for h in 0..n {
        for g in 0..n {
            a[h][g] = transition[g][h].clone();
        }
        a[h][h] = a[h][h].clone() - S::one();
    }
    for g in 0..n {
        a[n - 1][g] = S::one();
    }
    let mut b = vec![S::zero(); n];
    b[n - 1] = S::one();
    gaussian_solve(a, b)
}

fn gaussian_solve<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Result<Vec<S>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(Ordering::Equal)
            })
            .expect("nonempty range");
        if a[pivot][col].is_zero() {
            return Err(Error::Validation("singular linear system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone() / a[col][col].clone();
            for k in col..n {
                a[row][k] = a[row][k].clone() - factor.clone() * a[col][k].clone();
            }
            b[row] = b[row].clone() - factor * b[col].clone();
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Ok(x)
}

/// The regeneration apparatus over a fixed measure: the splitting
/// probability alpha, the residual kernel Q, and for each symbol the
/// cumulative breakpoints partitioning [0,1] among its followers in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct RegenSampler {
    measure: MarkovMeasure<f64>,
    alpha: f64,
    q: Vec<Vec<f64>>,
    qtiles: Vec<Vec<f64>>,
    pi_cdf: Vec<f64>,
    seed: u64,
}

impl RegenSampler {
    /// Builds the splitting. The default alpha is half the smallest edge
    /// probability; a supplied alpha must satisfy
    /// `0 < alpha < min{P_gh : M_gh = 1}`.
    pub fn build(measure: MarkovMeasure<f64>, alpha: Option<f64>, seed: u64) -> Result<Self> {
        let alpha_max = measure.min_edge_prob();
        let alpha = alpha.unwrap_or(alpha_max / 2.0);
        if !(alpha > 0.0 && alpha < alpha_max) {
            return Err(Error::Parameter(format!(
                "alpha = {alpha} outside (0, {alpha_max})"
            )));
        }
        let shift = Arc::clone(measure.shift());
        let n = shift.order() as usize;
        let inv_f = 1.0 / shift.fsize() as f64;
        let mut q = vec![vec![0.0; n]; n];
        for g in 0..n {
            for h in 0..n {
                if shift.edge(g as u32, h as u32) {
                    let value = (measure.prob(g as u32, h as u32) - alpha * inv_f) / (1.0 - alpha);
                    if value < 0.0 {
                        return Err(Error::Parameter(format!(
                            "alpha = {alpha} makes Q negative at ({g},{h})"
                        )));
                    }
                    q[g][h] = value;
                }
            }
            let sum: f64 = q[g].iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("Q row {g} sums to {sum}")));
            }
        }
        let qtiles: Vec<Vec<f64>> = (0..n)
            .map(|g| {
                let mut cum = 0.0;
                let mut tiles: Vec<f64> = shift
                    .followers_of(g as u32)
                    .iter()
                    .map(|&h| {
                        cum += q[g][h as usize];
                        cum
                    })
                    .collect();
                if let Some(last) = tiles.last_mut() {
                    *last = 1.0;
                }
                tiles
            })
            .collect();
        let mut cum = 0.0;
        let mut pi_cdf: Vec<f64> = measure
            .pi()
            .iter()
            .map(|p| {
                cum += p;
                cum
            })
            .collect();
        if let Some(last) = pi_cdf.last_mut() {
            *last = 1.0;
        }
        Ok(RegenSampler { measure, alpha, q, qtiles, pi_cdf, seed })
    }

    pub fn measure(&self) -> &MarkovMeasure<f64> {
        &self.measure
    }

    pub fn shift(&self) -> &Arc<SubgroupShift> {
        self.measure.shift()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// Cumulative breakpoints of the interval partition for symbol `g`,
    /// one per follower in lexicographic order.
    pub fn qtiles_of(&self, g: u32) -> &[f64] {
        &self.qtiles[g as usize]
    }

    /// Default seed for callers that do not pass their own.
    pub fn default_seed(&self) -> u64 {
        self.seed
    }

    /// The update function: with u = 1 the next symbol is f(g) + w; with
    /// u = 0 it is the follower whose interval contains v. Either way the
    /// result lies in the follower coset of g.
    pub fn step_h_idx(&self, g: u32, u: bool, w: u32, v: f64) -> Result<u32> {
        let shift = self.shift();
        if shift.follower_subgroup().binary_search(&w).is_err() {
            return Err(Error::Domain(format!(
                "offset {} is not in the follower subgroup",
                shift.elements()[w as usize]
            )));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("v = {v} outside [0,1]")));
        }
        if u {
            return Ok(shift.add_idx(shift.section_of(g), w));
        }
        let followers = shift.followers_of(g);
        let tiles = self.qtiles_of(g);
        for (idx, &cum) in tiles.iter().enumerate() {
            if v < cum {
                return Ok(followers[idx]);
            }
        }
        // v at the right edge: last follower with positive kernel mass
        let last = (0..followers.len())
            .rev()
            .find(|&idx| self.q[g as usize][followers[idx] as usize] > 0.0)
            .expect("stochastic row has positive mass");
        Ok(followers[last])
    }

    /// Element-level wrapper around [`step_h_idx`](Self::step_h_idx).
    pub fn step_h(
        &self,
        g: &GroupElement,
        u: bool,
        w: &GroupElement,
        v: f64,
    ) -> Result<GroupElement> {
        let spec = self.shift().spec();
        let gi = spec.element_index(g)? as u32;
        let wi = spec.element_index(w)? as u32;
        let out = self.step_h_idx(gi, u, wi, v)?;
        Ok(self.shift().elements()[out as usize].clone())
    }

    /// Samples x_0 .. x_{len-1} after seeding x_{-1} from pi.
    ///
    /// U_n is Bernoulli(alpha) except at indices in the inclusive interval
    /// `forced_ones`, which are set to one; the underlying uniform draws are
    /// consumed either way, so a forced trace differs from its unforced
    /// counterpart only in the bits. Deterministic given
    /// `(seed, stream, len, forced_ones)`.
    pub fn sample_path_stream(
        &self,
        len: usize,
        seed: u64,
        stream: u64,
        forced_ones: Option<(usize, usize)>,
    ) -> Result<PathTrace> {
        if len == 0 {
            return Err(Error::Parameter("path length must be positive".into()));
        }
        if let Some((lo, hi)) = forced_ones {
            if lo > hi || hi >= len {
                return Err(Error::Parameter(format!(
                    "forced interval [{lo},{hi}] not inside [0,{})",
                    len
                )));
            }
        }
        let mut rng = path_rng(seed, stream);
        let shift = self.shift();
        let fsub = shift.follower_subgroup();

        let draw = rng.random::<f64>();
        let x_init = self
            .pi_cdf
            .iter()
            .position(|&cum| draw < cum)
            .unwrap_or(self.pi_cdf.len() - 1) as u32;

        let mut x = Vec::with_capacity(len);
        let mut u = Vec::with_capacity(len);
        let mut w = Vec::with_capacity(len);
        let mut v = Vec::with_capacity(len);
        let mut prev = x_init;
        for n in 0..len {
            let mut bit = rng.random::<f64>() < self.alpha;
            if let Some((lo, hi)) = forced_ones {
                if n >= lo && n <= hi {
                    bit = true;
                }
            }
            let offset = fsub[rng.random_range(0..fsub.len())];
            let select = rng.random::<f64>();
            let next = self.step_h_idx(prev, bit, offset, select)?;
            x.push(next);
            u.push(bit);
            w.push(offset);
            v.push(select);
            prev = next;
        }
        Ok(PathTrace { x_init, x, u, w, v })
    }

    /// [`sample_path_stream`](Self::sample_path_stream) on stream 0.
    pub fn sample_path(
        &self,
        len: usize,
        seed: u64,
        forced_ones: Option<(usize, usize)>,
    ) -> Result<PathTrace> {
        self.sample_path_stream(len, seed, 0, forced_ones)
    }
}

/// One independent ChaCha stream per (seed, path index).
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A sampled path with all its driving randomness.
#[derive(Debug, Clone)]
pub struct PathTrace {
    /// Canonical index of the seed symbol x_{-1}.
    pub x_init: u32,
    /// Canonical indices of x_0 .. x_{len-1}.
    pub x: Vec<u32>,
    pub u: Vec<bool>,
    /// Canonical indices of the coset offsets, all in F.
    pub w: Vec<u32>,
    pub v: Vec<f64>,
}

impl PathTrace {
    /// Checks the recursion x_n = H(x_{n-1}, U_n, W_n, V_n) and membership
    /// of x in the shift language.
    pub fn verify(&self, sampler: &RegenSampler) -> Result<bool> {
        let mut prev = self.x_init;
        for n in 0..self.x.len() {
            let expect = sampler.step_h_idx(prev, self.u[n], self.w[n], self.v[n])?;
            if expect != self.x[n] {
                return Ok(false);
            }
            prev = self.x[n];
        }
        let mut word = vec![self.x_init];
        word.extend_from_slice(&self.x);
        Ok(sampler.shift().is_word(&word))
    }
}

/// Renewal times of all-ones blocks in a finite bit sequence.
///
/// T_0 = 0; T_1 is the first i > 0 with U_i .. U_{i+m} all ones; later times
/// repeat that search starting strictly more than m after the previous one.
/// Blocks must fit inside the sequence.
pub fn renewal_times(u: &[bool], m: usize) -> RenewalStats {
    let mut times = vec![0usize];
    if u.len() > m {
        let mut i = 1usize;
        while i + m < u.len() {
            if u[i..=i + m].iter().all(|&b| b) {
                times.push(i);
                i += m + 1;
            } else {
                i += 1;
            }
        }
    }
    let beta = fit_geometric_tail(&times, m);
    RenewalStats { m, times, beta }
}

/// Moment-matched geometric rate from the i.i.d. inter-renewal gaps
/// (diagnostic only; the verification suites use the alpha-based bound).
fn fit_geometric_tail(times: &[usize], m: usize) -> Option<f64> {
    if times.len() < 3 {
        return None;
    }
    let gaps: Vec<f64> = times.windows(2).skip(1).map(|w| (w[1] - w[0]) as f64).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Some(1.0 - 1.0 / (mean - m as f64))
}

/// Renewal times plus the block length they were computed for.
#[derive(Debug, Clone)]
pub struct RenewalStats {
    pub m: usize,
    /// T_0 = 0 followed by the qualifying block starts.
    pub times: Vec<usize>,
    /// Fitted geometric-tail rate, when at least two gaps are observed.
    pub beta: Option<f64>,
}

impl RenewalStats {
    /// N^(m)(A): the members of `a` that are renewal times.
    pub fn hits(&self, a: &[usize]) -> Vec<usize> {
        a.iter().copied().filter(|n| self.times.binary_search(n).is_ok()).collect()
    }
}

/// Largest m-separated subset of a finite index set, by greedy left-to-right
/// selection on the sorted set: any two members differ by at least m + 1.
pub fn m_separated(a: &[usize], m: usize) -> Vec<usize> {
    let mut sorted: Vec<usize> = a.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out: Vec<usize> = Vec::new();
    for n in sorted {
        match out.last() {
            None => out.push(n),
            Some(&last) if n - last >= m + 1 => out.push(n),
            _ => {}
        }
    }
    out
}

/// delta = alpha^(m+1) * (1 - alpha), the per-index renewal rate.
pub fn delta_bound(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} outside (0,1)")));
    }
    Ok(alpha.powi(m as i32 + 1) * (1.0 - alpha))
}

/// Shifts an index set down by `offset`, dropping entries that would go
/// negative.
pub fn shift_down(a: &[usize], offset: usize) -> Vec<usize> {
    a.iter().filter(|&&n| n >= offset).map(|&n| n - offset).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::shift::Caps;

    fn full_bernoulli() -> MarkovMeasure<f64> {
        presets::bernoulli_full_measure(0.7, Caps::default()).unwrap()
    }

    fn two_block() -> MarkovMeasure<f64> {
        presets::two_block_measure(0.6, Caps::default()).unwrap()
    }

    #[test]
    fn identical_rows_give_that_row_as_pi() {
        let measure = full_bernoulli();
        assert!((measure.pi()[0] - 0.3).abs() < 1e-12);
        assert!((measure.pi()[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn haar_measure_has_uniform_pi() {
        let shift = Arc::new(presets::two_block_shift(Caps::default()).unwrap());
        let haar = MarkovMeasure::<f64>::haar(Arc::clone(&shift)).unwrap();
        assert!(haar.pi().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn two_block_pi_matches_power_iteration_oracle() {
        let measure = two_block();
        // oracle: iterate the transition from the uniform vector
        let n = 4;
        let mut pi = vec![0.25f64; n];
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            for g in 0..n {
                for h in 0..n {
                    next[h] += pi[g] * measure.transition()[g][h];
                }
            }
            pi = next;
        }
        for (a, b) in measure.pi().iter().zip(&pi) {
            assert!((a - b).abs() < 1e-10);
        }
        // product structure: pi(a,b) = q_a * q_b with q = (0.6, 0.4)
        let expect = [0.36, 0.24, 0.24, 0.16];
        for (a, b) in measure.pi().iter().zip(expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_scalar_pi_solve_is_exact() {
        let measure = presets::two_block_measure_exact(3, 5, Caps::default()).unwrap();
        let q0 = crate::Exact::ratio(3, 5);
        let q1 = crate::Exact::ratio(2, 5);
        let expect = [&q0 * &q0, &q0 * &q1, &q1 * &q0, &q1 * &q1];
        for (a, b) in measure.pi().iter().zip(expect) {
            assert_eq!(a, &b);
        }
    }

    #[test]
    fn validation_rejects_support_mismatch() {
        let shift = Arc::new(presets::two_block_shift(Caps::default()).unwrap());
        // positive mass off the allowed edges
        let mut rows = vec![vec![0.0; 4]; 4];
        for g in 0..4u32 {
            let f = shift.followers_of(g).to_vec();
            rows[g as usize][f[0] as usize] = 0.5;
            rows[g as usize][f[1] as usize] = 0.3;
            rows[g as usize][(f[1] as usize + 2) % 4] += 0.2;
        }
        let err = MarkovMeasure::validate(Arc::clone(&shift), rows, None).unwrap_err();
        assert!(matches!(err, Error::Compatibility(_)));

        // zero mass on an allowed edge
        let mut rows = vec![vec![0.0; 4]; 4];
        for g in 0..4u32 {
            let f = shift.followers_of(g).to_vec();
            rows[g as usize][f[0] as usize] = 1.0;
        }
        let err = MarkovMeasure::validate(Arc::clone(&shift), rows, None).unwrap_err();
        assert!(matches!(err, Error::Compatibility(_)));
    }

    #[test]
    fn validation_rejects_non_stochastic_rows_and_bad_pi() {
        let shift = Arc::new(presets::full_2_shift(Caps::default()).unwrap());
        let rows = vec![vec![0.4, 0.7], vec![0.3, 0.7]];
        let err = MarkovMeasure::validate(Arc::clone(&shift), rows, None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));

        let rows = vec![vec![0.3, 0.7], vec![0.3, 0.7]];
        let err =
            MarkovMeasure::validate(Arc::clone(&shift), rows, Some(vec![0.5, 0.5])).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn regen_split_examples() {
        let sampler = RegenSampler::build(full_bernoulli(), Some(0.2), 0).unwrap();
        assert!((sampler.q()[0][0] - 0.25).abs() < 1e-15);
        assert!((sampler.q()[0][1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn regen_alpha_bounds() {
        let measure = full_bernoulli();
        let alpha_max = measure.min_edge_prob();
        assert!(RegenSampler::build(measure.clone(), Some(alpha_max), 0).is_err());
        assert!(RegenSampler::build(measure.clone(), Some(0.5), 0).is_err());
        assert!(RegenSampler::build(measure.clone(), Some(0.0), 0).is_err());
        assert!(RegenSampler::build(measure.clone(), Some(-0.1), 0).is_err());
        // default is half the smallest edge probability
        let sampler = RegenSampler::build(measure, None, 0).unwrap();
        assert!((sampler.alpha() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn haar_kernel_is_a_fixed_point_of_the_split() {
        let shift = Arc::new(presets::two_block_shift(Caps::default()).unwrap());
        let haar = MarkovMeasure::<f64>::haar(shift).unwrap();
        let sampler = RegenSampler::build(haar.clone(), Some(0.25), 0).unwrap();
        for g in 0..4 {
            for h in 0..4 {
                assert!((sampler.q()[g][h] - haar.transition()[g][h]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn splitting_identity_holds() {
        for measure in [full_bernoulli(), two_block()] {
            let shift = Arc::clone(measure.shift());
            let inv_f = 1.0 / shift.fsize() as f64;
            for &alpha in &[0.05, 0.1, 0.25] {
                if alpha >= measure.min_edge_prob() {
                    continue;
                }
                let sampler = RegenSampler::build(measure.clone(), Some(alpha), 0).unwrap();
                let n = shift.order() as usize;
                for g in 0..n {
                    let mut qsum = 0.0;
                    for h in 0..n {
                        let m_bit = if shift.edge(g as u32, h as u32) { 1.0 } else { 0.0 };
                        let recomposed =
                            alpha * inv_f * m_bit + (1.0 - alpha) * sampler.q()[g][h];
                        assert!((recomposed - measure.prob(g as u32, h as u32)).abs() < 1e-12);
                        qsum += sampler.q()[g][h];
                    }
                    assert!((qsum - 1.0).abs() < 1e-12);
                    // breakpoint lengths equal the kernel entries
                    let tiles = sampler.qtiles_of(g as u32);
                    let followers = shift.followers_of(g as u32);
                    let mut prev = 0.0;
                    for (idx, &cum) in tiles.iter().enumerate() {
                        let len = cum - prev;
                        assert!((len - sampler.q()[g][followers[idx] as usize]).abs() < 1e-12);
                        prev = cum;
                    }
                }
            }
        }
    }

    #[test]
    fn step_h_examples() {
        let sampler = RegenSampler::build(two_block(), Some(0.2), 0).unwrap();
        let spec = sampler.shift().spec().clone();
        // u = 1: f(g) + w regardless of v
        let g = GroupElement::new(vec![0, 1]);
        let w = GroupElement::new(vec![0, 1]);
        for v in [0.0, 0.3, 1.0] {
            let out = sampler.step_h(&g, true, &w, v).unwrap();
            assert_eq!(out, GroupElement::new(vec![1, 1]));
        }
        // u = 0, v = 0: lexicographically first follower with positive mass
        let out = sampler.step_h(&g, false, &spec.zero(), 0.0).unwrap();
        assert_eq!(out, GroupElement::new(vec![1, 0]));
        // w outside F is a domain error
        let bad = GroupElement::new(vec![1, 0]);
        assert!(matches!(sampler.step_h(&g, true, &bad, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn step_h_lands_in_the_follower_coset() {
        let sampler = RegenSampler::build(two_block(), None, 0).unwrap();
        let shift = sampler.shift();
        for g in 0..4u32 {
            for &w in shift.follower_subgroup() {
                for u in [false, true] {
                    for v in [0.0, 0.2, 0.5, 0.9, 1.0] {
                        let out = sampler.step_h_idx(g, u, w, v).unwrap();
                        assert!(shift.edge(g, out));
                    }
                }
            }
        }
    }

    #[test]
    fn forced_paths_follow_the_coset_branch() {
        let sampler = RegenSampler::build(two_block(), None, 7).unwrap();
        let trace = sampler.sample_path(32, 11, Some((0, 31))).unwrap();
        assert!(trace.u.iter().all(|&b| b));
        let shift = sampler.shift();
        let mut prev = trace.x_init;
        for n in 0..32 {
            let expect = shift.add_idx(shift.section_of(prev), trace.w[n]);
            assert_eq!(trace.x[n], expect);
            prev = trace.x[n];
        }
        assert!(trace.verify(&sampler).unwrap());
    }

    #[test]
    fn sampling_is_deterministic_per_seed_and_stream() {
        let sampler = RegenSampler::build(full_bernoulli(), None, 0).unwrap();
        let a = sampler.sample_path_stream(64, 5, 3, None).unwrap();
        let b = sampler.sample_path_stream(64, 5, 3, None).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.v, b.v);
        let c = sampler.sample_path_stream(64, 5, 4, None).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn forcing_only_touches_the_bits() {
        let sampler = RegenSampler::build(full_bernoulli(), None, 0).unwrap();
        let plain = sampler.sample_path(16, 9, None).unwrap();
        let forced = sampler.sample_path(16, 9, Some((4, 7))).unwrap();
        assert_eq!(plain.w, forced.w);
        assert_eq!(plain.v, forced.v);
        assert_eq!(plain.x_init, forced.x_init);
        for n in 0..16 {
            if !(4..=7).contains(&n) {
                assert_eq!(plain.u[n], forced.u[n]);
            } else {
                assert!(forced.u[n]);
            }
        }
    }

    #[test]
    fn empirical_single_site_law_matches_pi() {
        let measure = two_block();
        let pi = measure.pi().to_vec();
        let sampler = RegenSampler::build(measure, None, 0).unwrap();
        let trials = 100_000usize;
        let mut counts = [0usize; 4];
        for t in 0..trials {
            let trace = sampler.sample_path_stream(3, 2024, t as u64, None).unwrap();
            counts[trace.x[2] as usize] += 1;
        }
        for g in 0..4 {
            let freq = counts[g] as f64 / trials as f64;
            let se = (pi[g] * (1.0 - pi[g]) / trials as f64).sqrt();
            assert!(
                (freq - pi[g]).abs() <= 3.0 * se,
                "site law off at {g}: {freq} vs {} (se {se})",
                pi[g]
            );
        }
    }

    #[test]
    fn empirical_transitions_match_p() {
        let measure = two_block();
        let p = measure.transition().to_vec();
        let sampler = RegenSampler::build(measure, None, 0).unwrap();
        let trials = 100_000usize;
        let mut pair_counts = vec![vec![0usize; 4]; 4];
        let mut from_counts = [0usize; 4];
        for t in 0..trials {
            let trace = sampler.sample_path_stream(2, 99, t as u64, None).unwrap();
            pair_counts[trace.x[0] as usize][trace.x[1] as usize] += 1;
            from_counts[trace.x[0] as usize] += 1;
        }
        for g in 0..4 {
            for h in 0..4 {
                if p[g][h] == 0.0 {
                    assert_eq!(pair_counts[g][h], 0);
                    continue;
                }
                let freq = pair_counts[g][h] as f64 / from_counts[g] as f64;
                let se = (p[g][h] * (1.0 - p[g][h]) / from_counts[g] as f64).sqrt();
                assert!((freq - p[g][h]).abs() <= 3.0 * se, "({g},{h}): {freq} vs {}", p[g][h]);
            }
        }
    }

    #[test]
    fn renewal_examples() {
        let ones = vec![true; 6];
        let stats = renewal_times(&ones, 1);
        assert_eq!(stats.times, vec![0, 1, 3]);

        let zeros = vec![false; 10];
        assert_eq!(renewal_times(&zeros, 2).times, vec![0]);

        let u = vec![false, true, false, true];
        assert_eq!(renewal_times(&u, 0).times, vec![0, 1, 3]);
    }

    #[test]
    fn renewal_gaps_exceed_m() {
        let sampler = RegenSampler::build(full_bernoulli(), Some(0.14), 0).unwrap();
        for t in 0..200 {
            let trace = sampler.sample_path_stream(256, 31, t, None).unwrap();
            for m in 0..3 {
                let stats = renewal_times(&trace.u, m);
                for w in stats.times.windows(2).skip(1) {
                    assert!(w[1] - w[0] > m);
                }
                for &time in &stats.times[1..] {
                    assert!(trace.u[time..=time + m].iter().all(|&b| b));
                }
                if let Some(beta) = stats.beta {
                    assert!((0.0..1.0).contains(&beta));
                }
            }
        }
    }

    #[test]
    fn m_separated_examples() {
        let a: Vec<usize> = (0..10).collect();
        assert_eq!(m_separated(&a, 2), vec![0, 3, 6, 9]);
        assert_eq!(m_separated(&[5], 3), vec![5]);
        assert_eq!(m_separated(&[0, 1], 1), vec![0]);
    }

    #[test]
    fn m_separated_greedy_bound() {
        // greedy picks at least |A| / (m+1) members
        let sets: Vec<Vec<usize>> = vec![
            (0..100).collect(),
            (0..50).map(|i| i * 3).collect(),
            vec![1, 2, 3, 5, 8, 13, 21, 34],
            (0..64).map(|i| i * i).collect(),
        ];
        for a in sets {
            for m in 0..6 {
                let sep = m_separated(&a, m);
                assert!(sep.len() * (m + 1) >= a.len());
                for w in sep.windows(2) {
                    assert!(w[1] - w[0] >= m + 1);
                }
            }
        }
    }

    #[test]
    fn delta_examples() {
        assert!((delta_bound(0.2, 2).unwrap() - 0.0064).abs() < 1e-15);
        assert!((delta_bound(0.5, 0).unwrap() - 0.25).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for m in 0..10 {
            let d = delta_bound(0.3, m).unwrap();
            assert!(d < prev);
            prev = d;
        }
        assert!(delta_bound(1.0, 1).is_err());
    }

    #[test]
    fn shift_down_drops_negatives() {
        assert_eq!(shift_down(&[0, 3, 5, 9], 4), vec![1, 5]);
    }
}
