//! IEEE binary16 conversion with round-to-nearest-even and saturation:
//! out-of-range magnitudes clamp to +/-65504 instead of becoming infinite.

use crate::error::{Error, Result};
use half::f16;

pub const HALF_MAX: f32 = 65504.0;

/// Converts to binary16 bits. NaN is rejected; overflow saturates.
pub fn to_half(value: f32) -> Result<u16> {
    if value.is_nan() {
        return Err(Error::Data("NaN input to half conversion".into()));
    }
    let clamped = value.clamp(-HALF_MAX, HALF_MAX);
    Ok(f16::from_f32(clamped).to_bits())
}

pub fn from_half(bits: u16) -> f32 {
    f16::from_bits(bits).to_f32()
}

pub fn to_half_f64(value: f64) -> Result<u16> {
    if value.is_nan() {
        return Err(Error::Data("NaN input to half conversion".into()));
    }
    to_half(value.clamp(-(HALF_MAX as f64), HALF_MAX as f64) as f32)
}
