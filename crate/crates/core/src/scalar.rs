//! Scalar abstraction for engine arithmetic.
//!
//! All semiring values are IEEE floats with `-inf` as the tropical zero.
//! Bitwise reproducibility across different summation orders (the oracle's
//! left fold vs. the engine's join trees) requires that tropical sums never
//! round. To get that, importance values are snapped to the `BETA_GRID`
//! and confidences to the `CONF_GRID` at the single entry point into
//! semiring space ([`crate::semiring::atom_value`]). Products of grid values
//! then fit the mantissa exactly, and sums of such products stay exact while
//! per-atom values are at most [`Scalar::EXACT_VALUE_LIMIT`] and totals stay
//! within `2^mantissa` grid steps. Every bit-exactness guarantee in this
//! crate rests on that envelope.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable for tropical arithmetic: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Grid step for importance values, as a power of two (`2^-BETA_GRID_BITS`).
    const BETA_GRID_BITS: u32;
    /// Grid step for confidence values (`2^-CONF_GRID_BITS`).
    const CONF_GRID_BITS: u32;
    /// Mantissa width of the type.
    const MANTISSA_BITS: u32;
    /// Largest per-atom value for which grid sums are guaranteed exact.
    const EXACT_VALUE_LIMIT: u32;

    fn grid_scale(bits: u32) -> Self {
        Self::from_u64(1u64 << bits).expect("grid scale fits the scalar type")
    }

    /// An importance value is product-safe when it is an exact multiple of
    /// the confidence grid step with few enough significant bits that its
    /// products with grid confidences never round. Such values pass through
    /// `snap_beta` unchanged, so scaling a grid beta by powers of two (or
    /// small integers) stays exact.
    fn is_product_safe(self) -> bool {
        if self <= Self::zero() || !self.is_finite() {
            return false;
        }
        let scaled = self * Self::grid_scale(Self::CONF_GRID_BITS);
        if scaled != scaled.round() {
            return false;
        }
        match scaled.to_u64() {
            Some(u) if u > 0 => {
                let significant = 64 - u.leading_zeros() - u.trailing_zeros();
                significant <= Self::MANTISSA_BITS - Self::CONF_GRID_BITS
            }
            _ => false,
        }
    }

    /// Round to the nearest multiple of `2^-BETA_GRID_BITS` (flooring at
    /// one grid step so a positive input stays positive), keeping
    /// product-safe values untouched.
    fn snap_beta(self) -> Self {
        if self.is_product_safe() {
            return self;
        }
        let scale = Self::grid_scale(Self::BETA_GRID_BITS);
        let snapped = (self * scale).round() / scale;
        if snapped == Self::zero() && self > Self::zero() {
            Self::one() / scale
        } else {
            snapped
        }
    }

    /// Round to the nearest multiple of `2^-CONF_GRID_BITS`.
    fn snap_confidence(self) -> Self {
        let scale = Self::grid_scale(Self::CONF_GRID_BITS);
        (self * scale).round() / scale
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    // 2^-20 on beta and 2^-26 on confidence keep beta * confidence products
    // within 52 mantissa bits for beta <= 64.
    const BETA_GRID_BITS: u32 = 20;
    const CONF_GRID_BITS: u32 = 26;
    const MANTISSA_BITS: u32 = 53;
    const EXACT_VALUE_LIMIT: u32 = 64;
}

impl Scalar for f32 {
    const BETA_GRID_BITS: u32 = 8;
    const CONF_GRID_BITS: u32 = 11;
    const MANTISSA_BITS: u32 = 24;
    const EXACT_VALUE_LIMIT: u32 = 8;
}
