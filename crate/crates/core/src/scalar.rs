//! Floating-point scalar abstraction shared by every numeric module.
//!
//! Training runs in `f32`; oracle checks run in `f64`. Everything numeric in
//! this crate is written once against [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar usable by the DSP, network, loss and optimizer code.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Short tag written into checkpoints and metrics.
    const PRECISION: Precision;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::lit(v as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn as_f32(self) -> f32 {
        self.to_f32().unwrap_or(f32::NAN)
    }

    /// `c = a * b + beta * c` on strided matrices. `a` is `m x k`, `b` is
    /// `k x n`, `c` is `m x n`; each stride pair is (row, column).
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: (&[Self], usize, usize), b: (&[Self], usize, usize), beta: Self, c: (&mut [Self], usize, usize));
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: usize, cs: usize) {
    if rows > 0 && cols > 0 {
        assert!((rows - 1) * rs + (cols - 1) * cs < len, "gemm operand out of bounds");
    }
}

macro_rules! impl_gemm {
    ($t:ty, $f:path) => {
        fn gemm(m: usize, k: usize, n: usize, a: (&[$t], usize, usize), b: (&[$t], usize, usize), beta: $t, c: (&mut [$t], usize, usize)) {
            check_extent(a.0.len(), m, k, a.1, a.2);
            check_extent(b.0.len(), k, n, b.1, b.2);
            check_extent(c.0.len(), m, n, c.1, c.2);
            if m == 0 || n == 0 {
                return;
            }
            // SAFETY: every operand was bounds-checked against its extent above.
            unsafe {
                $f(
                    m, k, n, 1.0,
                    a.0.as_ptr(), a.1 as isize, a.2 as isize,
                    b.0.as_ptr(), b.1 as isize, b.2 as isize,
                    beta,
                    c.0.as_mut_ptr(), c.1 as isize, c.2 as isize,
                )
            }
        }
    };
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::Single;
    impl_gemm!(f32, matrixmultiply::sgemm);
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::Double;
    impl_gemm!(f64, matrixmultiply::dgemm);
}

/// Floating-point precision selector used by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Single,
    Double,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(format!("unknown precision `{other}` (expected single|double)")),
        }
    }
}

/// Converts a slice between scalar types.
pub fn cast_vec<A: Scalar, B: Scalar>(src: &[A]) -> Vec<B> {
    src.iter().map(|&v| B::lit(v.as_f64())).collect()
}
