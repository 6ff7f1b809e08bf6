//! Numeric abstraction for responsibility and saliency values.
//!
//! Responsibilities are rationals of the form `1/(k+1)` and landscape values are
//! products and means of those, so the numeric core is generic over a [`Scalar`]
//! that may be a float (`f32`, `f64`) or an exact [`Rational`].

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// Exact rational scalar used by oracle comparisons.
pub type Rational = Ratio<i64>;

/// A real-valued scalar usable for responsibilities and landscapes.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// `num / den`; `den` must be nonzero.
    fn from_ratio(num: u64, den: u64) -> Self;

    fn to_f64(self) -> f64;

    /// Whether two values denote the same landscape level. Exact for rationals,
    /// equality up to a few ulps for floats.
    fn same_level(self, other: Self) -> bool;

    /// Responsibility of a cause with a minimal witness of `k` parts.
    fn responsibility(k: usize) -> Self {
        Self::from_ratio(1, k as u64 + 1)
    }

    fn from_count(n: usize) -> Self {
        Self::from_ratio(n as u64, 1)
    }
}

macro_rules! impl_float_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            #[inline]
            fn from_ratio(num: u64, den: u64) -> Self {
                num as $t / den as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn same_level(self, other: Self) -> bool {
                let scale = self.abs().max(other.abs()).max(1.0);
                (self - other).abs() <= 4.0 * <$t>::EPSILON * scale
            }
        }
    )*};
}

impl_float_scalar!(f32, f64);

impl Scalar for Rational {
    fn from_ratio(num: u64, den: u64) -> Self {
        Ratio::new(num as i64, den as i64)
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn same_level(self, other: Self) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn responsibility_values() {
        assert_eq!(<f64 as Scalar>::responsibility(0), 1.0);
        assert_eq!(<f64 as Scalar>::responsibility(1), 0.5);
        assert_eq!(Rational::responsibility(3), Ratio::new(1, 4));
    }

    #[test]
    fn float_levels_merge_at_machine_precision() {
        let a = 0.1_f64 + 0.2;
        assert!(a.same_level(0.3));
        assert!(!0.3_f64.same_level(0.3 + 1e-9));
        assert!(!Rational::from_ratio(1, 3).same_level(Rational::from_ratio(1, 4)));
    }
}
