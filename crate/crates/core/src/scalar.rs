//! Numeric traits shared by the graph, network and metric code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Values a centrality score can be computed in.
///
/// Only field operations are needed, so exact rationals qualify as well as
/// `f32`/`f64`.
pub trait Weight: Clone + Num + FromPrimitive + PartialOrd + Debug {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Weight for T where T: Clone + Num + FromPrimitive + PartialOrd + Debug {}

/// Floating point element type for the network, embeddings and metrics.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
