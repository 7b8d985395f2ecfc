//! Floating scalar abstraction for the per-point math kernels.

use num_traits::FromPrimitive;

/// Floating scalar the coordinate/metric/frame/curvature kernels are generic
/// over. `nalgebra::RealField` supplies the transcendental functions, so the
/// same formulas run in `f32` and `f64`.
pub trait Real: nalgebra::RealField + FromPrimitive + Copy + Default {
    /// Lossy conversion from an `f64` literal (tableau constants, tolerances).
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("scalar literal conversion")
    }

    fn half() -> Self {
        Self::lit(0.5)
    }

    fn two() -> Self {
        Self::lit(2.0)
    }

    fn is_finite_scalar(self) -> bool;

    fn to_f64(self) -> f64;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn is_finite_scalar(self) -> bool {
                self.is_finite()
            }

            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
