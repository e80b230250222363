//! Step-size machinery shared by the adaptive schemes: the directional
//! bound η̄, the α = √(η/2) rule, the consistency-condition ratio, and the
//! inner fixed-point correction.

use thiserror::Error;

use crate::numkit::{DiagPrecond, Vector};
use crate::Scalar;

/// Default iteration cap for [`inner_alpha_correction`]. The map is a
/// square-root contraction; 30 steps exhaust double precision.
pub const INNER_CORRECTION_MAX_ITERS: usize = 30;
/// Default fixed-point tolerance for [`inner_alpha_correction`].
pub const INNER_CORRECTION_TOL: f64 = 1e-12;
/// Relative gradient-norm threshold below which an optimizer must declare
/// convergence instead of calling [`bar_eta`] (which is 0/0 at a
/// stationary point): `‖g‖ ≤ GRAD_ZERO_GUARD · max(1, ‖x‖)`.
pub const GRAD_ZERO_GUARD: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum StepSizeError {
    #[error("inner correction exhausted {0} iterations without satisfying the consistency condition")]
    CorrectionStalled(usize),
}

/// Which preconditioner the step-size rule reads: the previous one
/// (`delta = 1`, the semi-implicit scheme) or the current one
/// (`delta = 0`, the synchronous scheme).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    /// `δ = 1`
    Lagged,
    /// `δ = 0`
    Synchronous,
}

impl Delta {
    pub fn value(self) -> u32 {
        match self {
            Delta::Lagged => 1,
            Delta::Synchronous => 0,
        }
    }
}

/// Per-step scheme parameters. `eta = α·β` is the preconditioned gradient
/// step size, `alpha_tilde = α/(1+α)` the synchronous-scheme step.
#[derive(Debug, Clone, Copy)]
pub struct StepParams<T> {
    pub eta: T,
    pub alpha: T,
    pub alpha_tilde: T,
    pub gamma: T,
    pub delta: Delta,
}

impl<T: Scalar> StepParams<T> {
    pub fn new(eta: T, alpha: T, gamma: T, delta: Delta) -> Self {
        assert!(eta > T::zero() && alpha > T::zero(), "eta, alpha must be > 0");
        assert!(gamma >= T::zero(), "gamma must be >= 0");
        StepParams {
            eta,
            alpha,
            alpha_tilde: alpha / (T::one() + alpha),
            gamma,
            delta,
        }
    }
}

/// Largest step size with guaranteed directional descent:
/// `η̄(P⁻¹, g) = (1/L) · ‖g‖²_{P⁻¹} / ‖g‖²_{P⁻²}`.
///
/// Any `0 < η ≤ η̄` yields `f(x - ηP⁻¹g) ≤ f(x) - (η/2)‖g‖²_{P⁻¹}`.
/// The caller must not invoke this with a zero gradient (treat it as
/// converged instead).
pub fn bar_eta<T: Scalar>(p: &DiagPrecond<T>, g: &Vector<T>, l: T) -> T {
    assert!(l > T::zero(), "smoothness constant must be > 0");
    let num = p.inv_weighted_sq_norm(g);
    let den = p.inv_sq_weighted_sq_norm(g);
    assert!(den > T::zero(), "bar_eta undefined at zero gradient");
    num / (l * den)
}

/// The contraction-optimal step rule `α = √(η/2)`.
pub fn alpha_from_eta<T: Scalar>(eta: T) -> T {
    assert!(eta > T::zero(), "eta must be > 0");
    (eta / T::of(2.0)).sqrt()
}

/// Uniform consistency-condition ratio
/// `η_{k+1}(1+α_k)^{2-δ} / (2α_k²)`; the condition holds iff the ratio
/// is at least 1.
pub fn consistency_ratio<T: Scalar>(eta_next: T, alpha: T, delta: Delta) -> T {
    assert!(
        eta_next > T::zero() && alpha > T::zero(),
        "consistency ratio needs positive inputs"
    );
    let one_plus = T::one() + alpha;
    let pow = match delta {
        Delta::Lagged => one_plus,
        Delta::Synchronous => one_plus * one_plus,
    };
    eta_next * pow / (T::of(2.0) * alpha * alpha)
}

/// Fixed-point correction `α ← √(η(α)/2)`, applied while the consistency
/// condition fails. Returns the first `α` satisfying the condition, or the
/// fixed-point limit once successive iterates differ by at most `tol`,
/// together with the number of corrections applied. While correcting, the
/// sequence is strictly decreasing.
pub fn inner_alpha_correction<T: Scalar>(
    alpha0: T,
    mut eval_eta: impl FnMut(T) -> T,
    delta: Delta,
    max_iters: usize,
    tol: T,
) -> Result<(T, usize), StepSizeError> {
    assert!(alpha0 > T::zero(), "alpha0 must be > 0");
    let mut alpha = alpha0;
    for iters in 0..=max_iters {
        let eta = eval_eta(alpha);
        assert!(
            eta.is_finite() && eta > T::zero(),
            "eta map must return finite positives"
        );
        if consistency_ratio(eta, alpha, delta) >= T::one() {
            return Ok((alpha, iters));
        }
        if iters == max_iters {
            break;
        }
        let next = alpha_from_eta(eta);
        debug_assert!(next < alpha, "corrected alpha must decrease");
        if (next - alpha).abs() <= tol {
            return Ok((next, iters + 1));
        }
        alpha = next;
    }
    Err(StepSizeError::CorrectionStalled(max_iters))
}
