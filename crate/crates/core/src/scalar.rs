use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

/// Floating-point sample type stored in rasters and training tables.
pub trait Scalar: Float + FromPrimitive + Default + Debug + Send + Sync + 'static {
    /// `dtype` string used in container headers.
    const DTYPE: &'static str;
    /// Encoded width in bytes.
    const BYTES: usize;

    fn extend_le(self, out: &mut Vec<u8>);

    /// Decodes from exactly `Self::BYTES` little-endian bytes.
    fn from_le(bytes: &[u8]) -> Self;

    /// Lossless for both supported types.
    fn to_f64_lossless(self) -> f64;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "float32";
    const BYTES: usize = 4;

    fn extend_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }

    fn to_f64_lossless(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "float64";
    const BYTES: usize = 8;

    fn extend_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }

    fn to_f64_lossless(self) -> f64 {
        self
    }
}
