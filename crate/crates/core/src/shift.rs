//! Markov subgroup shifts.
//!
//! A 0-1 incidence matrix M over the group alphabet defines the shift space
//! of bi-infinite words whose consecutive pairs are allowed edges. The space
//! is a subgroup of the product group exactly when the edge set
//! S = {(g,h) : M_{gh} = 1} is a subgroup of A x A; validation checks this,
//! derives the follower and predecessor subgroups, the section map, and the
//! mixing index, and rejects anything reducible.

use crate::dist::{word_index, CylinderDistribution};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupSpec};
use crate::scalar::Scalar;
use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Work and enumeration guardrails.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    /// Largest element or word enumeration allowed.
    pub enum_cap: u64,
    /// Largest state-times-steps product allowed in exact engines.
    pub work_cap: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { enum_cap: 1_000_000, work_cap: 100_000_000 }
    }
}

/// Square 0-1 matrix indexed by canonical element order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl IncidenceMatrix {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter("incidence matrix must be square".into()));
        }
        Ok(IncidenceMatrix { n, bits: rows.into_iter().flatten().collect() })
    }

    /// All-ones matrix: the full shift.
    pub fn full(n: usize) -> Self {
        IncidenceMatrix { n, bits: vec![true; n * n] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, g: usize, h: usize) -> bool {
        self.bits[g * self.n + h]
    }
}

/// A validated Markov subgroup shift.
#[derive(Debug, Clone)]
pub struct SubgroupShift {
    spec: GroupSpec,
    matrix: IncidenceMatrix,
    elements: Vec<GroupElement>,
    followers: Vec<Vec<u32>>,
    section: Vec<u32>,
    follower_subgroup: Vec<u32>,
    predecessor_subgroup: Vec<u32>,
    add_table: Vec<u32>,
    r: u32,
    caps: Caps,
}

impl SubgroupShift {
    /// Validates `(spec, M)` as a Markov subgroup shift.
    ///
    /// Checks run in this order: the edge set is a subgroup of A x A, every
    /// row is nonempty, M is irreducible (computing the mixing index r),
    /// every column is nonempty. Reducible-but-valid subgroup data is
    /// therefore reported as `NotIrreducible` even when some columns are
    /// empty.
    pub fn validate(spec: GroupSpec, matrix: IncidenceMatrix, caps: Caps) -> Result<Self> {
        let order = spec.order();
        if matrix.size() as u64 != order {
            return Err(Error::Parameter(format!(
                "incidence matrix is {}x{} but the group has {order} elements",
                matrix.size(),
                matrix.size()
            )));
        }
        if order.checked_mul(order).map_or(true, |sq| sq > caps.enum_cap.max(1 << 24)) {
            return Err(Error::Resource(format!(
                "group order {order} too large for incidence validation"
            )));
        }
        let n = order as usize;
        let elements = spec.enumerate_elements(caps.enum_cap)?;

        // canonical addition table; also used by the exact engines
        let mut add_table = vec![0u32; n * n];
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate() {
                let sum = spec.add(a, b)?;
                add_table[i * n + j] = spec.element_index(&sum)? as u32;
            }
        }

        let followers: Vec<Vec<u32>> = (0..n)
            .map(|g| (0..n).filter(|&h| matrix.get(g, h)).map(|h| h as u32).collect())
            .collect();

        // edge set must contain (0,0)
        if !matrix.get(0, 0) {
            return Err(Error::NotASubgroup("edge (0,0) is missing".into()));
        }
        // the follower set of 0 must be a subgroup
        let follower_subgroup = followers[0].clone();
        let fmask: Vec<bool> = (0..n).map(|h| matrix.get(0, h)).collect();
        for &w1 in &follower_subgroup {
            for &w2 in &follower_subgroup {
                let sum = add_table[w1 as usize * n + w2 as usize];
                if !fmask[sum as usize] {
                    return Err(Error::NotASubgroup(format!(
                        "follower set of 0 not closed: {} + {} leaves it",
                        elements[w1 as usize], elements[w2 as usize]
                    )));
                }
            }
        }
        // every nonempty row must be a coset of that subgroup, and row
        // leaders must add compatibly
        let fsize = follower_subgroup.len();
        for (g, row) in followers.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            if row.len() != fsize {
                return Err(Error::NotASubgroup(format!(
                    "row of {} has {} entries, follower subgroup has {fsize}",
                    elements[g],
                    row.len()
                )));
            }
            let leader = row[0] as usize;
            for &w in &follower_subgroup {
                let shifted = add_table[leader * n + w as usize];
                if !matrix.get(g, shifted as usize) {
                    return Err(Error::NotASubgroup(format!(
                        "row of {} is not a coset of the follower subgroup",
                        elements[g]
                    )));
                }
            }
        }
        for (g, row_g) in followers.iter().enumerate() {
            if row_g.is_empty() {
                continue;
            }
            for (h, row_h) in followers.iter().enumerate() {
                if row_h.is_empty() {
                    continue;
                }
                let gh = add_table[g * n + h] as usize;
                let sum_leader = add_table[row_g[0] as usize * n + row_h[0] as usize];
                if !matrix.get(gh, sum_leader as usize) {
                    return Err(Error::NotASubgroup(format!(
                        "edges from {} and {} do not add into the row of {}",
                        elements[g], elements[h], elements[gh]
                    )));
                }
            }
        }

        // surjectivity, row side
        if let Some(g) = followers.iter().position(|row| row.is_empty()) {
            return Err(Error::NonSurjective(format!("{} has no followers", elements[g])));
        }

        // irreducibility: the follower sets of 0 form a nondecreasing chain
        // of subgroups, so it stabilizes within |A| steps
        let mut reach: Vec<bool> = fmask.clone();
        let mut count = reach.iter().filter(|&&b| b).count();
        let mut r = 1u32;
        while count < n {
            let mut next = vec![false; n];
            for h in 0..n {
                if reach[h] {
                    for &k in &followers[h] {
                        next[k as usize] = true;
                    }
                }
            }
            let next_count = next.iter().filter(|&&b| b).count();
            if next_count == count {
                return Err(Error::NotIrreducible(format!(
                    "follower sets of 0 stabilize at {count} of {n} elements"
                )));
            }
            reach = next;
            count = next_count;
            r += 1;
            if r as usize > n {
                return Err(Error::NotIrreducible("mixing index exceeds group order".into()));
            }
        }

        // surjectivity, column side (unreachable once irreducibility holds;
        // kept as a cheap consistency check)
        for h in 0..n {
            if !(0..n).any(|g| matrix.get(g, h)) {
                return Err(Error::NonSurjective(format!("{} has no predecessors", elements[h])));
            }
        }

        let predecessor_subgroup: Vec<u32> =
            (0..n).filter(|&g| matrix.get(g, 0)).map(|g| g as u32).collect();
        if predecessor_subgroup.len() != fsize {
            return Err(Error::Validation(format!(
                "follower subgroup has {fsize} elements, predecessor subgroup {}",
                predecessor_subgroup.len()
            )));
        }

        // section map: lexicographically smallest follower
        let section: Vec<u32> = followers.iter().map(|row| row[0]).collect();

        Ok(SubgroupShift {
            spec,
            matrix,
            elements,
            followers,
            section,
            follower_subgroup,
            predecessor_subgroup,
            add_table,
            r,
            caps,
        })
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &IncidenceMatrix {
        &self.matrix
    }

    pub fn caps(&self) -> Caps {
        self.caps
    }

    /// Mixing index: smallest n with F^n(0) = A.
    pub fn r(&self) -> u32 {
        self.r
    }

    /// |F|, the size of the follower subgroup.
    pub fn fsize(&self) -> u64 {
        self.follower_subgroup.len() as u64
    }

    pub fn order(&self) -> u64 {
        self.spec.order()
    }

    /// Elements in canonical order.
    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    /// Followers of element `g` (by canonical index), sorted.
    pub fn followers_of(&self, g: u32) -> &[u32] {
        &self.followers[g as usize]
    }

    /// The section f(g): lexicographically smallest follower of g.
    pub fn section_of(&self, g: u32) -> u32 {
        self.section[g as usize]
    }

    /// The follower subgroup F = F(0), sorted.
    pub fn follower_subgroup(&self) -> &[u32] {
        &self.follower_subgroup
    }

    /// The predecessor subgroup P = P(0), sorted.
    pub fn predecessor_subgroup(&self) -> &[u32] {
        &self.predecessor_subgroup
    }

    /// Canonical index of a sum, from the cached addition table.
    pub fn add_idx(&self, g: u32, h: u32) -> u32 {
        self.add_table[g as usize * self.elements.len() + h as usize]
    }

    pub fn edge(&self, g: u32, h: u32) -> bool {
        self.matrix.get(g as usize, h as usize)
    }

    /// The n-step follower set F^n(g), sorted by canonical index.
    pub fn follower_set(&self, g: &GroupElement, n: u32) -> Result<Vec<GroupElement>> {
        let gi = self.spec.element_index(g)? as u32;
        Ok(self
            .follower_set_idx(gi, n)?
            .into_iter()
            .map(|i| self.elements[i as usize].clone())
            .collect())
    }

    pub fn follower_set_idx(&self, g: u32, n: u32) -> Result<Vec<u32>> {
        if n == 0 {
            return Err(Error::Parameter("follower sets need n >= 1".into()));
        }
        let size = self.elements.len();
        let mut cur = vec![false; size];
        cur[g as usize] = true;
        let mut count = 1usize;
        for _ in 0..n {
            if count == size {
                break; // full sets stay full
            }
            let mut next = vec![false; size];
            for h in 0..size {
                if cur[h] {
                    for &k in &self.followers[h] {
                        next[k as usize] = true;
                    }
                }
            }
            count = next.iter().filter(|&&b| b).count();
            cur = next;
        }
        Ok((0..size as u32).filter(|&i| cur[i as usize]).collect())
    }

    /// Number of interior paths of length n from g to h, i.e. the (g,h)
    /// entry of M^n, computed exactly.
    pub fn path_count(&self, n: u32, g: &GroupElement, h: &GroupElement) -> Result<BigUint> {
        let size = self.elements.len();
        let cost = (size as u128).pow(3) * (64 - (n as u64).leading_zeros().min(63) as u128 + 1);
        if cost > self.caps.work_cap as u128 * 64 {
            return Err(Error::Resource(format!("matrix power of size {size} too expensive")));
        }
        let gi = self.spec.element_index(g)? as usize;
        let hi = self.spec.element_index(h)? as usize;
        let base: Vec<BigUint> = (0..size * size)
            .map(|i| if self.matrix.get(i / size, i % size) { BigUint::one() } else { BigUint::zero() })
            .collect();
        let mut result = identity(size);
        let mut power = base;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = mat_mul(&result, &power, size);
            }
            e >>= 1;
            if e > 0 {
                power = mat_mul(&power, &power, size);
            }
        }
        Ok(result[gi * size + hi].clone())
    }

    /// |G_l| = |A| * |F|^(l-1).
    pub fn word_count(&self, len: u32) -> Result<u64> {
        if len == 0 {
            return Err(Error::Parameter("word length must be positive".into()));
        }
        let mut count = self.order() as u128;
        for _ in 1..len {
            count = count.saturating_mul(self.fsize() as u128);
        }
        u64::try_from(count).map_err(|_| Error::Resource("word count overflows u64".into()))
    }

    /// All allowed words of the given length, in lexicographic order, as
    /// canonical symbol indices.
    pub fn enumerate_words(&self, len: u32) -> Result<Vec<Vec<u32>>> {
        let count = self.word_count(len)?;
        if count > self.caps.enum_cap {
            return Err(Error::Resource(format!(
                "word count {count} exceeds enumeration cap {}",
                self.caps.enum_cap
            )));
        }
        let mut words = Vec::with_capacity(count as usize);
        let mut current = Vec::with_capacity(len as usize);
        self.extend_words(len, &mut current, &mut words);
        debug_assert_eq!(words.len() as u64, count);
        Ok(words)
    }

    fn extend_words(&self, len: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if current.len() == len as usize {
            out.push(current.clone());
            return;
        }
        let candidates: Vec<u32> = match current.last() {
            None => (0..self.elements.len() as u32).collect(),
            Some(&g) => self.followers_of(g).to_vec(),
        };
        for h in candidates {
            current.push(h);
            self.extend_words(len, current, out);
            current.pop();
        }
    }

    /// Membership of a symbol-index word in the shift language.
    pub fn is_word(&self, word: &[u32]) -> bool {
        word.windows(2).all(|w| self.edge(w[0], w[1]))
            && word.iter().all(|&g| (g as usize) < self.elements.len())
    }

    /// The uniform transition kernel L on follower cosets together with the
    /// uniform stationary vector. `rho * L = rho` holds exactly over an
    /// exact scalar.
    pub fn haar_kernel<S: Scalar>(&self) -> (Vec<Vec<S>>, Vec<S>) {
        let n = self.elements.len();
        let inv_f = S::ratio(1, self.fsize());
        let kernel: Vec<Vec<S>> = (0..n)
            .map(|g| {
                (0..n)
                    .map(|h| if self.matrix.get(g, h) { inv_f.clone() } else { S::zero() })
                    .collect()
            })
            .collect();
        let rho = vec![S::ratio(1, self.order()); n];
        (kernel, rho)
    }

    /// gamma_l = 1 / (|A| * |F|^(l-1)), the common Haar mass of allowed
    /// l-words.
    pub fn gamma<S: Scalar>(&self, len: u32) -> Result<S> {
        Ok(S::ratio(1, self.word_count(len)?))
    }

    /// The length-`len` marginal of the Haar measure: mass gamma_l on each
    /// allowed word, zero elsewhere.
    pub fn haar_marginal<S: Scalar>(&self, len: u32) -> Result<CylinderDistribution<S>> {
        let words = self.enumerate_words(len)?;
        let gamma: S = self.gamma(len)?;
        let mut out = CylinderDistribution::new(len as usize, self.order())?;
        for word in &words {
            out.set(word_index(self.order(), word), gamma.clone());
        }
        Ok(out)
    }
}

fn identity(size: usize) -> Vec<BigUint> {
    let mut m = vec![BigUint::zero(); size * size];
    for i in 0..size {
        m[i * size + i] = BigUint::one();
    }
    m
}

fn mat_mul(a: &[BigUint], b: &[BigUint], size: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); size * size];
    for i in 0..size {
        for k in 0..size {
            let aik = &a[i * size + k];
            if aik.is_zero() {
                continue;
            }
            for j in 0..size {
                let bkj = &b[k * size + j];
                if !bkj.is_zero() {
                    out[i * size + j] += aik * bkj;
                }
            }
        }
    }
    out
}
