//! Accelerated adaptive gradient methods built around a diagonal
//! preconditioner: the Adam-HNAG family, its continuous-time flow, classical
//! baselines (GD, HNAG, full-batch Adam, AMSGrad), and the diagnostics used
//! to monitor their Lyapunov contraction.
//!
//! The numerical core is generic over the scalar type via [`Scalar`]; the
//! experiment harness and all file formats use `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

pub mod datasets;
pub mod diagnostics;
pub mod flow;
pub mod numkit;
pub mod objectives;
pub mod online;
pub mod optimizers;
pub mod rng;
pub mod stepsize;

/// Floating-point scalar the core math is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant; panics only if the value is not
    /// representable, which cannot happen for `f32`/`f64`.
    fn of(c: f64) -> Self {
        Self::from_f64(c).expect("constant not representable in scalar type")
    }

    /// Lossless-enough view for trace recording.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub use numkit::{DiagPrecond, Vector};
pub use objectives::{Objective, OptimumInfo};

/// Double-precision instantiations used by the harness and the file formats.
pub type Vector64 = Vector<f64>;
pub type DiagPrecond64 = DiagPrecond<f64>;
