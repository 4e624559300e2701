//! Arithmetic of a finite Abelian group of prime-power torsion.
//!
//! The group is a product of cyclic groups Z_{p^{s_1}} x ... x Z_{p^{s_d}}
//! over a single prime p; its torsion order is p^s with s = max_i s_i.
//! Elements are residue vectors. The canonical element order used by every
//! downstream table is lexicographic on those vectors.

use crate::error::{Error, Result};

/// Shape of the group: one prime, one exponent per cyclic factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    p: u64,
    exponents: Vec<u32>,
    moduli: Vec<u64>,
    s: u32,
    torsion: u64,
    order: u64,
}

/// An element as a residue vector, coordinate `i` below `p^{s_i}`.
///
/// `Ord` is derived, so comparisons agree with the canonical
/// (lexicographic) element order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElement {
    residues: Vec<u64>,
}

impl GroupElement {
    pub fn new(residues: Vec<u64>) -> Self {
        GroupElement { residues }
    }

    pub fn residues(&self) -> &[u64] {
        &self.residues
    }

    pub fn is_zero(&self) -> bool {
        self.residues.iter().all(|&r| r == 0)
    }
}

impl std::fmt::Display for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.residues.iter().map(|r| r.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl GroupSpec {
    /// Builds the spec, checking that `p` is prime, every exponent is at
    /// least one, and the torsion order and group order fit in a `u64`.
    pub fn new(p: u64, exponents: &[u32]) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Parameter(format!("{p} is not prime")));
        }
        if exponents.is_empty() {
            return Err(Error::Parameter("at least one cyclic factor required".into()));
        }
        if exponents.iter().any(|&e| e == 0) {
            return Err(Error::Parameter("every exponent must be positive".into()));
        }
        let s = *exponents.iter().max().unwrap();
        let torsion = checked_pow(p, s)
            .ok_or_else(|| Error::Parameter(format!("torsion order {p}^{s} overflows u64")))?;
        let mut moduli = Vec::with_capacity(exponents.len());
        let mut order: u64 = 1;
        for &e in exponents {
            let m = checked_pow(p, e)
                .ok_or_else(|| Error::Parameter(format!("modulus {p}^{e} overflows u64")))?;
            order = order
                .checked_mul(m)
                .ok_or_else(|| Error::Parameter("group order overflows u64".into()))?;
            moduli.push(m);
        }
        Ok(GroupSpec { p, exponents: exponents.to_vec(), moduli, s, torsion, order })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Torsion exponent s: the group is p^s-torsion.
    pub fn s(&self) -> u32 {
        self.s
    }

    /// p^s.
    pub fn torsion(&self) -> u64 {
        self.torsion
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn rank(&self) -> usize {
        self.exponents.len()
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement { residues: vec![0; self.rank()] }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if g.residues.len() != self.rank() {
            return Err(Error::SpecMismatch(format!(
                "element has {} coordinates, group has {}",
                g.residues.len(),
                self.rank()
            )));
        }
        for (r, m) in g.residues.iter().zip(&self.moduli) {
            if r >= m {
                return Err(Error::SpecMismatch(format!("residue {r} not below modulus {m}")));
            }
        }
        Ok(())
    }

    /// Componentwise sum modulo each p^{s_i}.
    pub fn add(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        self.check(a)?;
        self.check(b)?;
        let residues = a
            .residues
            .iter()
            .zip(&b.residues)
            .zip(&self.moduli)
            .map(|((x, y), m)| (x + y) % m)
            .collect();
        Ok(GroupElement { residues })
    }

    /// Additive inverse.
    pub fn neg(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        let residues = g
            .residues
            .iter()
            .zip(&self.moduli)
            .map(|(r, m)| (m - r) % m)
            .collect();
        Ok(GroupElement { residues })
    }

    pub fn sub(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        let nb = self.neg(b)?;
        self.add(a, &nb)
    }

    /// c·g, with c reduced modulo the torsion order p^s. In particular
    /// `scalar_mul(p^s, g)` is zero for every g.
    pub fn scalar_mul(&self, c: i64, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        let c = c.rem_euclid(self.torsion as i64) as u64;
        let residues = g
            .residues
            .iter()
            .zip(&self.moduli)
            .map(|(r, m)| (((c as u128) * (*r as u128)) % (*m as u128)) as u64)
            .collect();
        Ok(GroupElement { residues })
    }

    /// Canonical index of `g`: its position in lexicographic order.
    pub fn element_index(&self, g: &GroupElement) -> Result<u64> {
        self.check(g)?;
        let mut idx: u64 = 0;
        for (r, m) in g.residues.iter().zip(&self.moduli) {
            idx = idx * m + r;
        }
        Ok(idx)
    }

    /// Inverse of [`element_index`](Self::element_index).
    pub fn element_from_index(&self, mut idx: u64) -> GroupElement {
        debug_assert!(idx < self.order);
        let mut residues = vec![0; self.rank()];
        for i in (0..self.rank()).rev() {
            residues[i] = idx % self.moduli[i];
            idx /= self.moduli[i];
        }
        GroupElement { residues }
    }

    /// All elements in canonical order. The zero element comes first.
    pub fn enumerate_elements(&self, cap: u64) -> Result<Vec<GroupElement>> {
        if self.order > cap {
            return Err(Error::Resource(format!(
                "group order {} exceeds enumeration cap {cap}",
                self.order
            )));
        }
        Ok((0..self.order).map(|i| self.element_from_index(i)).collect())
    }
}

/// Multiplicative inverse of `c` in Z_{p^s}, for `c` relatively prime to `p`.
pub fn unit_inverse(c: i64, p: u64, s: u32) -> Result<u64> {
    let modulus = checked_pow(p, s)
        .ok_or_else(|| Error::Parameter(format!("modulus {p}^{s} overflows u64")))?;
    let c = c.rem_euclid(modulus as i64) as u64;
    if c % p == 0 {
        return Err(Error::Domain(format!("{c} is divisible by {p}, no inverse mod {p}^{s}")));
    }
    // extended Euclid on (c, p^s)
    let (mut old_r, mut r) = (c as i128, modulus as i128);
    let (mut old_t, mut t) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_t, t) = (t, old_t - q * t);
    }
    debug_assert_eq!(old_r, 1);
    Ok(old_t.rem_euclid(modulus as i128) as u64)
}

fn checked_pow(base: u64, exp: u32) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}
