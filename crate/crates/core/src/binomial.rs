//! Binomial coefficients modulo prime powers.
//!
//! Everything here reduces to base-p digits. Kummer's theorem identifies the
//! p-adic valuation of C(n,k) with the number of carries in the base-p
//! addition of k and n-k, which makes unit tests (zero carries) and
//! vanishing mod p^s (at least s carries) cheap digit statistics; the full
//! residue, when needed, comes from exact big-integer arithmetic.

use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Largest n for which whole Pascal rows or single big-integer residues are
/// computed exactly.
const BIGINT_CAP: u64 = 200_000;

/// Largest n scanned for isolated positions (the scan stores one byte per
/// position).
const SCAN_CAP: u64 = 64_000_000;

/// Base-p digits of n, least significant first, with no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitExpansion {
    n: u64,
    p: u64,
    digits: Vec<u32>,
}

/// Base-p digits of a nonnegative integer.
pub fn digit_profile(n: u64, p: u64) -> Result<DigitExpansion> {
    check_prime(p)?;
    let mut digits = Vec::new();
    let mut rest = n;
    while rest > 0 {
        digits.push((rest % p) as u32);
        rest /= p;
    }
    Ok(DigitExpansion { n, p, digits })
}

impl DigitExpansion {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn digit(&self, j: usize) -> u32 {
        self.digits.get(j).copied().unwrap_or(0)
    }

    /// J_i(n): positions j >= i whose digit is nonzero.
    pub fn nonzero_positions_from(&self, i: usize) -> Vec<usize> {
        (i..self.digits.len()).filter(|&j| self.digits[j] != 0).collect()
    }

    /// xi_i(n) = |J_i(n)|.
    pub fn xi(&self, i: usize) -> usize {
        self.digits.iter().skip(i).filter(|&&d| d != 0).count()
    }

    /// Is n a multiple of p^a, i.e. are all digits below position a zero?
    pub fn divisible_by_power(&self, a: usize) -> bool {
        self.digits.iter().take(a).all(|&d| d == 0)
    }

    pub fn reconstruct(&self) -> u64 {
        self.digits.iter().rev().fold(0u64, |acc, &d| acc * self.p + d as u64)
    }
}

/// Number of carries in the base-p addition of k and n-k. By Kummer's
/// theorem this is the p-adic valuation of C(n,k).
pub fn carry_count(n: u64, k: u64, p: u64) -> Result<u32> {
    check_prime(p)?;
    if k > n {
        return Err(Error::Domain(format!("k = {k} outside [0, {n}]")));
    }
    let mut x = k;
    let mut y = n - k;
    let mut carry = 0u64;
    let mut count = 0u32;
    while x > 0 || y > 0 || carry > 0 {
        let digit = x % p + y % p + carry;
        carry = u64::from(digit >= p);
        count += carry as u32;
        x /= p;
        y /= p;
    }
    Ok(count)
}

/// Exact C(n,k) as a big integer.
pub fn binom_exact(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// C(n,k) mod p^s, with C(n,k') = 0 by convention for k' < 0 or k' > n.
///
/// Vanishing (at least s carries) is decided without big integers; other
/// residues come from the exact coefficient reduced mod p^s.
pub fn binom_mod(n: u64, k: i64, p: u64, s: u32) -> Result<u64> {
    let ps = prime_power(p, s)?;
    if k < 0 || k as u64 > n {
        return Ok(0);
    }
    let k = k as u64;
    if carry_count(n, k, p)? >= s {
        return Ok(0);
    }
    if k.min(n - k) > BIGINT_CAP {
        return Err(Error::Resource(format!(
            "exact residue for C({n},{k}) exceeds the big-integer cap"
        )));
    }
    Ok((binom_exact(n, k) % BigUint::from(ps)).to_u64().expect("residue below p^s"))
}

/// The whole Pascal row mod p^s: entry k is C(n,k) mod p^s. One running
/// exact coefficient crosses the row, so the cost is n big-integer steps.
pub fn binom_row_mod(n: u64, p: u64, s: u32) -> Result<Vec<u64>> {
    let ps = prime_power(p, s)?;
    if n > BIGINT_CAP {
        return Err(Error::Resource(format!("row length {n} exceeds the big-integer cap")));
    }
    let modulus = BigUint::from(ps);
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut acc = BigUint::one();
    row.push((&acc % &modulus).to_u64().unwrap());
    for k in 1..=n {
        acc = acc * BigUint::from(n - k + 1) / BigUint::from(k);
        row.push((&acc % &modulus).to_u64().unwrap());
    }
    Ok(row)
}

/// Positions isolated inside a Pascal row, with the digit expansion of n.
#[derive(Debug, Clone)]
pub struct IsolationReport {
    pub n: u64,
    pub m: u64,
    pub ell: u64,
    pub p: u64,
    pub s: u32,
    /// All isolated k, ascending.
    pub isolated: Vec<u64>,
    digits: DigitExpansion,
}

impl IsolationReport {
    /// xi_{a+i}(n) for the reported n.
    pub fn xi(&self, a: u64, i: u64) -> usize {
        self.digits.xi((a + i) as usize)
    }

    pub fn digits(&self) -> &DigitExpansion {
        &self.digits
    }
}

/// All k in [0, n] that are (m, ell)-isolated in n: C(n,k) is a unit mod p
/// while every other coefficient in the window [k-m, k+ell] vanishes mod
/// p^s (positions outside [0, n] vanish by convention).
///
/// Units and vanishing are carry counts (zero carries, respectively at
/// least s carries), so the scan runs on incremental digit sums and never
/// touches a big integer.
pub fn isolated_set(n: u64, m: u64, ell: u64, p: u64, s: u32) -> Result<IsolationReport> {
    let digits = digit_profile(n, p)?;
    if s == 0 {
        return Err(Error::Parameter("torsion exponent must be positive".into()));
    }
    if n > SCAN_CAP {
        return Err(Error::Resource(format!("isolation scan over {n} positions exceeds cap")));
    }
    let carries = carry_table(n, p)?;
    let unit = |k: u64| carries[k as usize] == 0;
    let vanishes = |k: i64| {
        k < 0 || k as u64 > n || carries[k as usize] as u32 >= s.min(u8::MAX as u32)
    };
    let mut isolated = Vec::new();
    for k in 0..=n {
        if !unit(k) {
            continue;
        }
        let lo = k as i64 - m as i64;
        let hi = k as i64 + ell as i64;
        if (lo..=hi).all(|kk| kk == k as i64 || vanishes(kk)) {
            isolated.push(k);
        }
    }
    Ok(IsolationReport { n, m, ell, p, s, isolated, digits })
}

/// Carry counts for every k in [0, n], clamped at 255 (far above any
/// torsion exponent in range), via incremental digit sums:
/// carries(k) = (S(k) + S(n-k) - S(n)) / (p - 1).
fn carry_table(n: u64, p: u64) -> Result<Vec<u8>> {
    let total = digit_sum(n, p);
    let mut table = vec![0u8; n as usize + 1];
    let mut up = DigitCounter::at(0, p);
    let mut down = DigitCounter::at(n, p);
    for k in 0..=n {
        let carries = (up.sum + down.sum - total) / (p - 1);
        table[k as usize] = carries.min(u8::MAX as u64) as u8;
        if k < n {
            up.increment();
            down.decrement();
        }
    }
    Ok(table)
}

fn digit_sum(mut x: u64, p: u64) -> u64 {
    let mut sum = 0;
    while x > 0 {
        sum += x % p;
        x /= p;
    }
    sum
}

struct DigitCounter {
    p: u64,
    digits: Vec<u64>,
    sum: u64,
}

impl DigitCounter {
    fn at(x: u64, p: u64) -> Self {
        let mut digits = Vec::new();
        let mut rest = x;
        let mut sum = 0;
        while rest > 0 {
            digits.push(rest % p);
            sum += rest % p;
            rest /= p;
        }
        DigitCounter { p, digits, sum }
    }

    fn increment(&mut self) {
        let mut j = 0;
        loop {
            if j == self.digits.len() {
                self.digits.push(0);
            }
            if self.digits[j] + 1 < self.p {
                self.digits[j] += 1;
                self.sum += 1;
                return;
            }
            self.sum -= self.digits[j];
            self.digits[j] = 0;
            j += 1;
        }
    }

    fn decrement(&mut self) {
        let mut j = 0;
        loop {
            if self.digits[j] > 0 {
                self.digits[j] -= 1;
                self.sum -= 1;
                return;
            }
            self.digits[j] = self.p - 1;
            self.sum += self.p - 1;
            j += 1;
        }
    }
}

/// Result of checking the digit lower bound on the isolated count.
#[derive(Debug, Clone, Copy)]
pub struct IsolationBound {
    pub count: u64,
    pub lower_bound: u64,
    pub ok: bool,
}

/// Checks |{k : k is (m,m)-isolated in n}| >= 2^xi_{a+i}(n) - 1 under its
/// hypotheses: m >= 1, a >= 2s+1 with p^[a/2] > m, n a multiple of p^a, and
/// i >= a. The hypotheses are enforced, not assumed.
pub fn isolation_lower_bound(
    n: u64,
    a: u32,
    i: u32,
    m: u64,
    p: u64,
    s: u32,
) -> Result<IsolationBound> {
    if m == 0 {
        return Err(Error::Parameter("window radius m must be at least 1".into()));
    }
    if a < 2 * s + 1 {
        return Err(Error::Parameter(format!("a = {a} below 2s+1 = {}", 2 * s + 1)));
    }
    let half = prime_power(p, a / 2)?;
    if half <= m {
        return Err(Error::Parameter(format!(
            "p^[a/2] = {half} does not exceed the window radius {m}"
        )));
    }
    if i < a {
        return Err(Error::Parameter(format!("i = {i} below a = {a}")));
    }
    let report = isolated_set(n, m, m, p, s)?;
    if !report.digits().divisible_by_power(a as usize) {
        return Err(Error::Parameter(format!("{n} is not a multiple of {p}^{a}")));
    }
    let xi = report.xi(a as u64, i as u64);
    let lower_bound = if xi >= 64 { u64::MAX } else { (1u64 << xi) - 1 };
    let count = report.isolated.len() as u64;
    Ok(IsolationBound { count, lower_bound, ok: count >= lower_bound })
}

/// Is n a multiple of p^a with at least log_p(n)/5 nonzero digits at
/// positions >= a + [log_p(n)/2]? Decided with exact integer comparisons;
/// n = 0 is excluded.
pub fn digit_rich(n: u64, a: u32, p: u64) -> Result<bool> {
    let digits = digit_profile(n, p)?;
    if n == 0 || !digits.divisible_by_power(a as usize) {
        return Ok(false);
    }
    // i = [log_p(n) / 2]: the largest u with p^(2u) <= n
    let mut i = 0u32;
    while let Some(pw) = checked_prime_power(p, 2 * (i + 1)) {
        if pw <= n {
            i += 1;
        } else {
            break;
        }
    }
    let xi = digits.xi((a + i) as usize) as u32;
    // xi >= log_p(n) / 5  <=>  p^(5 xi) >= n
    match checked_prime_power(p, 5 * xi) {
        Some(pw) => Ok(pw >= n),
        None => Ok(true),
    }
}

/// Fraction of multiples of p^a below `limit` that are digit-rich.
pub fn digit_rich_density(limit: u64, a: u32, p: u64) -> Result<f64> {
    if limit == 0 {
        return Err(Error::Parameter("limit must be positive".into()));
    }
    let step = prime_power(p, a)?;
    let mut total = 0u64;
    let mut rich = 0u64;
    let mut n = 0u64;
    while n < limit {
        total += 1;
        if digit_rich(n, a, p)? {
            rich += 1;
        }
        n = match n.checked_add(step) {
            Some(next) => next,
            None => break,
        };
    }
    Ok(rich as f64 / total as f64)
}

fn check_prime(p: u64) -> Result<()> {
    if p < 2 {
        return Err(Error::Parameter(format!("{p} is not prime")));
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return Err(Error::Parameter(format!("{p} is not prime")));
        }
        d += 1;
    }
    Ok(())
}

fn prime_power(p: u64, s: u32) -> Result<u64> {
    check_prime(p)?;
    checked_prime_power(p, s)
        .ok_or_else(|| Error::Parameter(format!("{p}^{s} overflows u64")))
}

fn checked_prime_power(p: u64, s: u32) -> Option<u64> {
    let mut acc = 1u64;
    for _ in 0..s {
        acc = acc.checked_mul(p)?;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_profile_examples() {
        let d = digit_profile(12, 2).unwrap();
        assert_eq!(d.digits(), &[0, 0, 1, 1]);
        assert_eq!(d.xi(0), 2);
        assert_eq!(d.xi(3), 1);
        assert_eq!(d.xi(4), 0);
        assert!(d.divisible_by_power(2));
        assert!(!d.divisible_by_power(3));
        assert_eq!(d.reconstruct(), 12);

        let zero = digit_profile(0, 5).unwrap();
        assert_eq!(zero.xi(0), 0);
        for a in 0..10 {
            assert!(zero.divisible_by_power(a));
        }

        let pt = digit_profile(3u64.pow(4), 3).unwrap();
        for i in 0..=4 {
            assert_eq!(pt.xi(i), 1);
        }
        assert_eq!(pt.xi(5), 0);
    }

    #[test]
    fn digit_profile_rejects_composite_base() {
        assert!(digit_profile(10, 4).is_err());
    }

    #[test]
    fn carry_count_examples() {
        assert_eq!(carry_count(4, 2, 2).unwrap(), 1);
        for n in [0u64, 7, 100] {
            assert_eq!(carry_count(n, 0, 2).unwrap(), 0);
        }
        for t in 1..10u32 {
            let n = (1u64 << t) - 1;
            for k in 0..=n {
                assert_eq!(carry_count(n, k, 2).unwrap(), 0);
            }
        }
        assert!(carry_count(3, 4, 2).is_err());
    }

    #[test]
    fn carry_count_is_the_padic_valuation() {
        // big-integer valuation oracle on a small grid (the acceptance
        // suite runs the full n <= 300 grid)
        for p in [2u64, 3, 5] {
            for n in 0..=60u64 {
                for k in 0..=n {
                    let mut value = binom_exact(n, k);
                    let mut valuation = 0;
                    let big_p = BigUint::from(p);
                    while (&value % &big_p).is_zero() {
                        value /= &big_p;
                        valuation += 1;
                    }
                    assert_eq!(carry_count(n, k, p).unwrap(), valuation, "p={p} n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn binom_mod_examples() {
        assert_eq!(binom_mod(32, 1, 2, 1).unwrap(), 0);
        assert_eq!(binom_mod(32, 0, 2, 1).unwrap(), 1);
        assert_eq!(binom_mod(4, 2, 2, 2).unwrap(), 2);
        assert_eq!(binom_mod(10, -1, 2, 1).unwrap(), 0);
        assert_eq!(binom_mod(10, 11, 2, 1).unwrap(), 0);
    }

    #[test]
    fn binom_mod_matches_bigint_oracle() {
        for p in [2u64, 3, 5] {
            for s in 1..=3u32 {
                let ps = BigUint::from(p.pow(s));
                for n in 0..=40u64 {
                    for k in 0..=n {
                        let oracle = (binom_exact(n, k) % &ps).to_u64().unwrap();
                        assert_eq!(binom_mod(n, k as i64, p, s).unwrap(), oracle);
                    }
                }
            }
        }
    }

    #[test]
    fn binom_row_matches_pointwise() {
        for p in [2u64, 3] {
            for s in 1..=2u32 {
                for n in [0u64, 1, 7, 33, 100] {
                    let row = binom_row_mod(n, p, s).unwrap();
                    assert_eq!(row.len() as u64, n + 1);
                    for (k, &v) in row.iter().enumerate() {
                        assert_eq!(v, binom_mod(n, k as i64, p, s).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn pascal_recurrence_mod_prime_powers() {
        for p in [2u64, 3] {
            for s in 1..=2u32 {
                let ps = p.pow(s);
                let mut prev = binom_row_mod(0, p, s).unwrap();
                for n in 1..=300u64 {
                    let row = binom_row_mod(n, p, s).unwrap();
                    for k in 0..n as usize {
                        assert_eq!((prev[k] + prev.get(k + 1).copied().unwrap_or(0)) % ps, row[k + 1]);
                    }
                    // symmetry
                    for k in 0..row.len() {
                        assert_eq!(row[k], row[row.len() - 1 - k]);
                    }
                    prev = row;
                }
            }
        }
    }

    #[test]
    fn isolated_set_examples() {
        let report = isolated_set(32, 3, 3, 2, 1).unwrap();
        assert_eq!(report.isolated, vec![0, 32]);

        for t in 2..8u32 {
            let n = (1u64 << t) - 1;
            assert!(isolated_set(n, 1, 1, 2, 1).unwrap().isolated.is_empty());
        }

        for (m, ell) in [(0u64, 0u64), (1, 1), (5, 2)] {
            assert_eq!(isolated_set(0, m, ell, 3, 1).unwrap().isolated, vec![0]);
        }
    }

    #[test]
    fn isolation_matches_brute_force_zero_padded_scan() {
        for (p, s) in [(2u64, 1u32), (2, 2), (3, 1), (3, 2)] {
            for n in [0u64, 1, 5, 16, 63, 64, 96, 200] {
                for (m, ell) in [(1u64, 1u64), (2, 2), (3, 1), (0, 2)] {
                    let fast = isolated_set(n, m, ell, p, s).unwrap().isolated;
                    let mut brute = Vec::new();
                    for k in 0..=n as i64 {
                        let center = binom_mod(n, k, p, s).unwrap();
                        if center % p == 0 {
                            continue;
                        }
                        let window_ok = (k - m as i64..=k + ell as i64)
                            .filter(|&kk| kk != k)
                            .all(|kk| binom_mod(n, kk, p, s).unwrap() == 0);
                        if window_ok {
                            brute.push(k as u64);
                        }
                    }
                    assert_eq!(fast, brute, "p={p} s={s} n={n} m={m} ell={ell}");
                }
            }
        }
    }

    #[test]
    fn isolation_bound_enforces_hypotheses() {
        // window radius too large for p^[a/2]
        assert!(matches!(
            isolation_lower_bound(32, 3, 3, 2, 2, 1),
            Err(Error::Parameter(_))
        ));
        // a below 2s+1
        assert!(matches!(
            isolation_lower_bound(32, 2, 3, 1, 2, 1),
            Err(Error::Parameter(_))
        ));
        // i below a
        assert!(matches!(
            isolation_lower_bound(32, 3, 2, 1, 2, 1),
            Err(Error::Parameter(_))
        ));
        // n not a multiple of p^a
        assert!(matches!(
            isolation_lower_bound(36, 3, 3, 1, 2, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn isolation_bound_valid_cases() {
        // p = 3 keeps p^[a/2] = 3 > m = 2 at a = 3
        let check = isolation_lower_bound(3u64.pow(7), 3, 4, 2, 3, 1).unwrap();
        assert_eq!(check.lower_bound, 1);
        assert!(check.count >= 1);
        assert!(check.ok);

        // empty high-digit set gives a vacuous bound
        let check = isolation_lower_bound(3u64.pow(4), 3, 3, 2, 3, 1).unwrap();
        assert_eq!(check.lower_bound, 0);
        assert!(check.ok);
    }

    #[test]
    fn row_192_isolated_positions_meet_the_digit_bound() {
        // the bound quantity with a = 3, i = 3 (digits of 192 at positions
        // >= 6) is 2^2 - 1 = 3; the hypothesis p^[a/2] > m fails for
        // (p, a, m) = (2, 3, 2), so the gate rejects it, but the counted
        // inequality itself holds
        assert!(matches!(
            isolation_lower_bound(192, 3, 3, 2, 2, 1),
            Err(Error::Parameter(_))
        ));
        let report = isolated_set(192, 2, 2, 2, 1).unwrap();
        assert_eq!(report.isolated, vec![0, 64, 128, 192]);
        assert_eq!(report.xi(3, 3), 2);
        assert!(report.isolated.len() as u64 >= (1 << report.xi(3, 3)) - 1);

        // same quantity for n = 2^5: no digits at positions >= 6
        assert!(matches!(
            isolation_lower_bound(32, 3, 3, 2, 2, 1),
            Err(Error::Parameter(_))
        ));
        let report = isolated_set(32, 2, 2, 2, 1).unwrap();
        assert_eq!(report.xi(3, 3), 0);
        assert!(!report.isolated.is_empty());
    }

    #[test]
    fn digit_rich_examples() {
        // single nonzero digit fails the threshold once n is large
        assert!(!digit_rich(1u64 << 30, 3, 2).unwrap());
        // not a multiple of p^a
        assert!(!digit_rich(12, 3, 2).unwrap());
        assert!(!digit_rich(0, 3, 2).unwrap());
        // all high digits set: 0b1111111 << 10, i = 8, xi_{3+8} >= 4 digits
        // over log2(n) = 16.9, threshold log_p(n)/5 = 3.4
        let n = 0b1111111u64 << 10;
        assert!(digit_rich(n, 3, 2).unwrap());
    }

    #[test]
    fn digit_rich_threshold_is_exact_at_powers() {
        // xi = 1 and n = p^t: rich iff p^5 >= n, i.e. t <= 5 (for a = 0)
        for t in 1..=12u32 {
            let n = 2u64.pow(t);
            assert_eq!(digit_rich(n, 0, 2).unwrap(), t <= 5, "t={t}");
        }
    }

    #[test]
    fn density_is_a_fraction_of_multiples() {
        let d = digit_rich_density(1000, 3, 2).unwrap();
        assert!((0.0..=1.0).contains(&d));
        // denominator counts 0, which is never rich
        assert!(d < 1.0);
    }
}
