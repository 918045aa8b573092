use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating point scalar the library computes in: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only if the target cannot represent any value.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to float")
    }
}

impl Real for f32 {}
impl Real for f64 {}
