//! Probability scalar abstraction.
//!
//! Everything that carries probability mass (cylinder tables, stochastic
//! matrices, stationary vectors, total-variation distances) is generic over
//! a [`Scalar`]. The fast engines instantiate it with `f64`; the calibration
//! oracles instantiate it with [`BigRational`] and run the same code path
//! exactly.

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::Debug;

/// Field-like scalar used for probabilities.
pub trait Scalar:
    Num + Signed + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug + 'static
{
    /// The exact ratio `num / den`.
    fn ratio(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_u64(num).expect("numerator out of range") / Self::from_u64(den).expect("denominator out of range")
    }

    /// Lossy view for reporting; exact for `f64` itself.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for BigRational {}

/// Default probability scalar of the fast engines.
pub type Prob = f64;

/// Exact scalar of the calibration oracles.
pub type Exact = BigRational;

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn ratio_is_exact_for_rationals() {
        let third = Exact::ratio(1, 3);
        let one = &third + &third + &third;
        assert!(one.is_one());
    }

    #[test]
    fn ratio_matches_division_for_f64() {
        assert_eq!(f64::ratio(1, 8), 0.125);
        assert_eq!(f64::ratio(7, 10), 0.7);
    }
}
