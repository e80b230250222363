//! Optimizer state machines: the two adaptive schemes (semi-implicit
//! `AdamHnag`, synchronous `AdamHnagS`), the baselines (GD, HNAG,
//! full-batch Adam, AMSGrad), the box projection, and the trace-recording
//! run loop.

use crate::diagnostics::{lyapunov, Trace, TraceFlags, TraceRow};
use crate::numkit::{DiagPrecond, Vector};
use crate::objectives::{Objective, OptimumInfo};
use crate::stepsize::{
    alpha_from_eta, bar_eta, consistency_ratio, inner_alpha_correction, Delta, StepParams,
    GRAD_ZERO_GUARD, INNER_CORRECTION_MAX_ITERS, INNER_CORRECTION_TOL,
};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gd,
    Hnag,
    Adam,
    AmsGrad,
    AdamHnag,
    AdamHnagS,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Hnag => "hnag",
            Method::Adam => "adam",
            Method::AmsGrad => "amsgrad",
            Method::AdamHnag => "adam_hnag",
            Method::AdamHnagS => "adam_hnag_s",
        }
    }

    pub fn delta(self) -> Delta {
        match self {
            Method::AdamHnagS => Delta::Synchronous,
            _ => Delta::Lagged,
        }
    }
}

/// How the forcing weight γ is chosen: a fixed constant (the practical
/// default, R being hard to estimate) or the theoretical rule `α_k/R²`
/// (`α̃_k/R²` for the synchronous scheme).
#[derive(Debug, Clone, Copy)]
pub enum GammaMode<T> {
    Fixed(T),
    Theoretical,
}

/// Default fixed forcing weight.
pub const GAMMA_DEFAULT: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
pub struct AdamParams<T> {
    pub eta: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub bias_correction: bool,
}

impl<T: Scalar> Default for AdamParams<T> {
    fn default() -> Self {
        AdamParams {
            eta: T::of(1e-3),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            bias_correction: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig<T> {
    pub method: Method,
    pub gamma_mode: GammaMode<T>,
    /// Box radius: projection clamps `y` to `[-R/2, R/2]`; the theoretical
    /// γ rule divides by `R²`.
    pub r: Option<T>,
    pub projection: bool,
    pub inner_correction: bool,
    pub adam: AdamParams<T>,
    pub max_iters: usize,
    pub grad_tol: T,
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn new(method: Method) -> Self {
        OptimizerConfig {
            method,
            gamma_mode: GammaMode::Fixed(T::of(GAMMA_DEFAULT)),
            r: None,
            projection: false,
            inner_correction: false,
            adam: AdamParams::default(),
            max_iters: 1000,
            grad_tol: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if matches!(self.gamma_mode, GammaMode::Theoretical) || self.projection {
            match self.r {
                Some(r) if r > T::zero() => {}
                _ => return Err("theoretical gamma mode and projection require R > 0".into()),
            }
        }
        if let GammaMode::Fixed(g) = self.gamma_mode {
            if g < T::zero() {
                return Err("fixed gamma must be >= 0".into());
            }
        }
        let a = &self.adam;
        if a.eta <= T::zero() || a.epsilon <= T::zero() {
            return Err("adam eta and epsilon must be > 0".into());
        }
        if a.beta1 <= T::zero() || a.beta1 >= T::one() || a.beta2 <= T::zero() || a.beta2 >= T::one()
        {
            return Err("adam beta1, beta2 must lie in (0,1)".into());
        }
        if self.grad_tol < T::zero() {
            return Err("grad_tol must be >= 0".into());
        }
        Ok(())
    }

    fn gamma_for(&self, alpha: T, delta: Delta) -> T {
        match self.gamma_mode {
            GammaMode::Fixed(g) => g,
            GammaMode::Theoretical => {
                let r = self.r.expect("validated: theoretical mode has R");
                match delta {
                    Delta::Lagged => alpha / (r * r),
                    Delta::Synchronous => (alpha / (T::one() + alpha)) / (r * r),
                }
            }
        }
    }
}

/// Iterate bundle of the HNAG-family schemes.
#[derive(Debug, Clone)]
pub struct OptState<T> {
    pub x: Vector<T>,
    pub x_plus: Vector<T>,
    pub y: Vector<T>,
    pub p: DiagPrecond<T>,
    pub k: usize,
    /// Parameters for the upcoming step: `eta = η_k`, `alpha = α_k`, etc.
    pub last: StepParams<T>,
    pub converged: bool,
    pub diverged: bool,
    /// Cached `∇f(x_k)`.
    pub grad: Vector<T>,
    /// Consistency ratio of the transition that produced this state.
    pub last_ratio: Option<T>,
    /// Whether the projection clamped `y` in that transition.
    pub last_projected: bool,
}

fn grad_negligible<T: Scalar>(g: &Vector<T>, x: &Vector<T>) -> bool {
    g.norm() <= T::of(GRAD_ZERO_GUARD) * T::one().max(x.norm())
}

/// Componentwise clamp of `y` to the box `‖y‖_∞ ≤ R/2`. Because the box is
/// axis-aligned and the metric diagonal, the `‖·‖_P`-projection separates
/// per coordinate and equals the unweighted clamp for any `P ≻ 0`.
pub fn project_box<T: Scalar>(y_half: &Vector<T>, r: T) -> Vector<T> {
    assert!(r > T::zero(), "box radius must be > 0");
    y_half.clamp_box(r / T::of(2.0))
}

fn maybe_project<T: Scalar>(y_half: Vector<T>, cfg: &OptimizerConfig<T>) -> (Vector<T>, bool) {
    if !cfg.projection {
        return (y_half, false);
    }
    let projected = project_box(&y_half, cfg.r.expect("validated: projection has R"));
    let changed = projected != y_half;
    (projected, changed)
}

fn frozen_diverged<T: Scalar>(state: &OptState<T>) -> OptState<T> {
    let mut next = state.clone();
    next.diverged = true;
    next
}

/// Initializes an [`OptState`] for `AdamHnag`/`AdamHnagS`:
/// `η₀ = η̄(P₀⁻¹, ∇f(x₀))`, `α₀ = √(η₀/2)`, `x₀⁺ = x₀ - η₀P₀⁻¹∇f(x₀)`.
pub fn init_adaptive_state<T: Scalar, F: Objective<T> + ?Sized>(
    f: &F,
    cfg: &OptimizerConfig<T>,
    x0: Vector<T>,
    y0: Vector<T>,
    p0: DiagPrecond<T>,
) -> OptState<T> {
    let delta = cfg.method.delta();
    let g0 = f.gradient(&x0);
    if !g0.all_finite() {
        return OptState {
            x: x0.clone(),
            x_plus: x0.clone(),
            y: y0,
            p: p0,
            k: 0,
            last: StepParams::new(T::one(), alpha_from_eta(T::one()), T::zero(), delta),
            converged: false,
            diverged: true,
            grad: g0,
            last_ratio: None,
            last_projected: false,
        };
    }
    if grad_negligible(&g0, &x0) {
        return OptState {
            x: x0.clone(),
            x_plus: x0.clone(),
            y: y0,
            p: p0,
            k: 0,
            last: StepParams::new(T::one(), alpha_from_eta(T::one()), T::zero(), delta),
            converged: true,
            diverged: false,
            grad: g0,
            last_ratio: None,
            last_projected: false,
        };
    }
    let l = f.smoothness();
    let eta0 = bar_eta(&p0, &g0, l);
    let alpha0 = alpha_from_eta(eta0);
    let gamma0 = cfg.gamma_for(alpha0, delta);
    let x_plus = x0.axpy(-eta0, &p0.inverse_apply(&g0));
    OptState {
        x: x0,
        x_plus,
        y: y0,
        p: p0,
        k: 0,
        last: StepParams::new(eta0, alpha0, gamma0, delta),
        converged: false,
        diverged: false,
        grad: g0,
        last_ratio: None,
        last_projected: false,
    }
}

/// One semi-implicit step:
///
/// ```text
/// x_{k+1}  = (x_k⁺ + α_k y_k)/(1+α_k)
/// η_{k+1}  = η̄(P_k⁻¹, ∇f(x_{k+1}))
/// x_{k+1}⁺ = x_{k+1} - η_{k+1} P_k⁻¹ ∇f(x_{k+1})
/// y_{k+1}  = y_k + (α_k/η_{k+1})(x_{k+1}⁺ - x_{k+1})   (then optional projection)
/// P_{k+1}  = P_k/(1+α_k) + (α_k γ_k/(1+α_k)) P_k⁻¹ G²_{k+1}
/// ```
///
/// followed by `α_{k+1} = √(η_{k+1}/2)` and the configured γ rule. With
/// `inner_correction`, α_k is first driven down the fixed-point map until
/// the consistency condition holds, re-solving `x_{k+1}` each time.
pub fn adam_hnag_step<T: Scalar, F: Objective<T> + ?Sized>(
    state: &OptState<T>,
    f: &F,
    cfg: &OptimizerConfig<T>,
) -> OptState<T> {
    debug_assert!(!state.converged && !state.diverged);
    let l = f.smoothness();
    let one = T::one();

    let x_of = |alpha: T| state.x_plus.axpy(alpha, &state.y).scale(one / (one + alpha));

    let mut alpha = state.last.alpha;
    let mut x_next = x_of(alpha);
    let mut g_next = f.gradient(&x_next);
    if !x_next.all_finite() || !g_next.all_finite() {
        return frozen_diverged(state);
    }
    if grad_negligible(&g_next, &x_next) {
        let mut done = state.clone();
        done.x_plus = x_next.clone();
        done.x = x_next;
        done.k += 1;
        done.grad = g_next;
        done.converged = true;
        done.last_ratio = None;
        return done;
    }
    let mut eta_next = bar_eta(&state.p, &g_next, l);

    if cfg.inner_correction && consistency_ratio(eta_next, alpha, Delta::Lagged) < one {
        let eval = |a: T| bar_eta(&state.p, &f.gradient(&x_of(a)), l);
        if let Ok((corrected, _iters)) = inner_alpha_correction(
            alpha,
            eval,
            Delta::Lagged,
            INNER_CORRECTION_MAX_ITERS,
            T::of(INNER_CORRECTION_TOL),
        ) {
            alpha = corrected;
            x_next = x_of(alpha);
            g_next = f.gradient(&x_next);
            eta_next = bar_eta(&state.p, &g_next, l);
        }
    }
    let gamma = match cfg.gamma_mode {
        GammaMode::Theoretical => cfg.gamma_for(alpha, Delta::Lagged),
        GammaMode::Fixed(_) => state.last.gamma,
    };
    let ratio = consistency_ratio(eta_next, alpha, Delta::Lagged);

    let x_plus_next = x_next.axpy(-eta_next, &state.p.inverse_apply(&g_next));
    let y_half = state.y.axpy(alpha / eta_next, &x_plus_next.sub(&x_next));
    let (y_next, projected) = maybe_project(y_half, cfg);

    let shrink = one / (one + alpha);
    let force = alpha * gamma * shrink;
    let p_next = DiagPrecond::new(
        state
            .p
            .diag()
            .iter()
            .zip(g_next.iter())
            .map(|(&p, &g)| p * shrink + force * g * g / p)
            .collect(),
    );

    if !x_plus_next.all_finite() || !y_next.all_finite() || !p_next.all_finite() {
        return frozen_diverged(state);
    }

    let alpha_next = alpha_from_eta(eta_next);
    let gamma_next = cfg.gamma_for(alpha_next, Delta::Lagged);
    OptState {
        x: x_next,
        x_plus: x_plus_next,
        y: y_next,
        p: p_next,
        k: state.k + 1,
        last: StepParams::new(eta_next, alpha_next, gamma_next, Delta::Lagged),
        converged: false,
        diverged: false,
        grad: g_next,
        last_ratio: Some(ratio),
        last_projected: projected,
    }
}

/// Componentwise closed form of the implicit preconditioner update
/// `(P_{k+1} - P_k)/α̃_k = -P_k + γ_k P_{k+1}⁻¹ G²`:
/// the positive root of `P² - (1-α̃)P_k P - α̃γG² = 0`.
fn sync_precond_update<T: Scalar>(
    p: &DiagPrecond<T>,
    g: &Vector<T>,
    alpha_tilde: T,
    gamma: T,
) -> DiagPrecond<T> {
    let one = T::one();
    let half = T::of(0.5);
    let four = T::of(4.0);
    let shrink = one - alpha_tilde;
    DiagPrecond::new(
        p.diag()
            .iter()
            .zip(g.iter())
            .map(|(&pi, &gi)| {
                let disc = shrink * shrink * pi * pi + four * alpha_tilde * gamma * gi * gi;
                half * (shrink * pi + disc.sqrt())
            })
            .collect(),
    )
}

/// One synchronous step: the x-update of the semi-implicit scheme with
/// `x_k⁺` formed using `P_k`, then
///
/// ```text
/// P_{k+1} = (1-α̃_k)/2 · P_k + ½·√((1-α̃_k)² P_k² + 4 α̃_k γ_k G²_{k+1})
/// y_{k+1} = y_k - α̃_k P_{k+1}⁻¹ ∇f(x_{k+1})      (then optional projection)
/// η_{k+1} = η̄(P_{k+1}⁻¹, ∇f(x_{k+1}))
/// ```
pub fn adam_hnag_s_step<T: Scalar, F: Objective<T> + ?Sized>(
    state: &OptState<T>,
    f: &F,
    cfg: &OptimizerConfig<T>,
) -> OptState<T> {
    debug_assert!(!state.converged && !state.diverged);
    let l = f.smoothness();
    let one = T::one();

    let x_of = |alpha: T| state.x_plus.axpy(alpha, &state.y).scale(one / (one + alpha));
    let gamma_of = |alpha: T| match cfg.gamma_mode {
        GammaMode::Theoretical => cfg.gamma_for(alpha, Delta::Synchronous),
        GammaMode::Fixed(_) => state.last.gamma,
    };

    let mut alpha = state.last.alpha;
    let mut x_next = x_of(alpha);
    let mut g_next = f.gradient(&x_next);
    if !x_next.all_finite() || !g_next.all_finite() {
        return frozen_diverged(state);
    }
    if grad_negligible(&g_next, &x_next) {
        let mut done = state.clone();
        done.x_plus = x_next.clone();
        done.x = x_next;
        done.k += 1;
        done.grad = g_next;
        done.converged = true;
        done.last_ratio = None;
        return done;
    }

    let p_of = |alpha: T, g: &Vector<T>| {
        let at = alpha / (one + alpha);
        sync_precond_update(&state.p, g, at, gamma_of(alpha))
    };
    let mut p_next = p_of(alpha, &g_next);
    let mut eta_next = bar_eta(&p_next, &g_next, l);

    if cfg.inner_correction && consistency_ratio(eta_next, alpha, Delta::Synchronous) < one {
        let eval = |a: T| {
            let x = x_of(a);
            let g = f.gradient(&x);
            bar_eta(&p_of(a, &g), &g, l)
        };
        if let Ok((corrected, _iters)) = inner_alpha_correction(
            alpha,
            eval,
            Delta::Synchronous,
            INNER_CORRECTION_MAX_ITERS,
            T::of(INNER_CORRECTION_TOL),
        ) {
            alpha = corrected;
            x_next = x_of(alpha);
            g_next = f.gradient(&x_next);
            p_next = p_of(alpha, &g_next);
            eta_next = bar_eta(&p_next, &g_next, l);
        }
    }

    let alpha_tilde = alpha / (one + alpha);
    let ratio = consistency_ratio(eta_next, alpha, Delta::Synchronous);
    let y_half = state.y.axpy(-alpha_tilde, &p_next.inverse_apply(&g_next));
    let (y_next, projected) = maybe_project(y_half, cfg);
    let x_plus_next = x_next.axpy(-eta_next, &p_next.inverse_apply(&g_next));

    if !x_plus_next.all_finite() || !y_next.all_finite() || !p_next.all_finite() {
        return frozen_diverged(state);
    }

    let alpha_next = alpha_from_eta(eta_next);
    let gamma_next = cfg.gamma_for(alpha_next, Delta::Synchronous);
    OptState {
        x: x_next,
        x_plus: x_plus_next,
        y: y_next,
        p: p_next,
        k: state.k + 1,
        last: StepParams::new(eta_next, alpha_next, gamma_next, Delta::Synchronous),
        converged: false,
        diverged: false,
        grad: g_next,
        last_ratio: Some(ratio),
        last_projected: projected,
    }
}

/// Plain gradient descent with the `1/L` step.
pub fn gd_step<T: Scalar, F: Objective<T> + ?Sized>(x: &Vector<T>, f: &F) -> Vector<T> {
    let l = f.smoothness();
    x.axpy(-(T::one() / l), &f.gradient(x))
}

/// HNAG schedule value `P_k = α_k² L / (2 + α_k)` with `α_k = 2/(k+1)`.
pub fn hnag_schedule<T: Scalar>(k: usize, l: T) -> (T, T) {
    let alpha = T::of(2.0) / T::of(k as f64 + 1.0);
    let p = alpha * alpha * l / (T::of(2.0) + alpha);
    (alpha, p)
}

/// Initializes the scalar-`P`, γ=0 scheme at `k = 0` (`α₀ = 2`, `P₀ = L`);
/// the x-step gradient coefficient is `1/L` by the schedule constraint.
pub fn init_hnag_state<T: Scalar, F: Objective<T> + ?Sized>(
    f: &F,
    x0: Vector<T>,
    y0: Vector<T>,
) -> OptState<T> {
    let l = f.smoothness();
    let d = x0.len();
    let g0 = f.gradient(&x0);
    let (alpha0, p0) = hnag_schedule(0, l);
    let converged = grad_negligible(&g0, &x0);
    let x_plus = x0.axpy(-(T::one() / l), &g0);
    OptState {
        x: x0,
        x_plus,
        y: y0,
        p: DiagPrecond::uniform(d, p0),
        k: 0,
        last: StepParams::new(T::one() / l, alpha0, T::zero(), Delta::Lagged),
        converged,
        diverged: !g0.all_finite(),
        grad: g0,
        last_ratio: None,
        last_projected: false,
    }
}

/// One HNAG step (scalar `P`, γ = 0): the semi-implicit scheme under the
/// schedule `α_k = 2/(k+1)`, `P_k(2+α_k) = α_k²L`, with the gradient
/// coefficient in the x-update pinned to `1/L`.
pub fn hnag_step<T: Scalar, F: Objective<T> + ?Sized>(state: &OptState<T>, f: &F) -> OptState<T> {
    debug_assert!(!state.converged && !state.diverged);
    let l = f.smoothness();
    let one = T::one();
    let (alpha, p) = hnag_schedule(state.k, l);

    let x_next = state.x_plus.axpy(alpha, &state.y).scale(one / (one + alpha));
    let g_next = f.gradient(&x_next);
    if !x_next.all_finite() || !g_next.all_finite() {
        return frozen_diverged(state);
    }
    let y_next = state.y.axpy(-(alpha / p), &g_next);
    let x_plus_next = x_next.axpy(-(one / l), &g_next);
    let converged = grad_negligible(&g_next, &x_next);

    let (alpha_next, p_next) = hnag_schedule(state.k + 1, l);
    OptState {
        x: x_next,
        x_plus: x_plus_next,
        y: y_next,
        p: DiagPrecond::uniform(state.p.len(), p_next),
        k: state.k + 1,
        last: StepParams::new(one / l, alpha_next, T::zero(), Delta::Lagged),
        converged,
        diverged: false,
        grad: g_next,
        last_ratio: None,
        last_projected: false,
    }
}

/// Full-batch Adam iterate bundle. `v` is the raw second-moment diagonal
/// (entries may be zero, so it is kept outside `DiagPrecond`); `v_hat` is
/// the AMSGrad running maximum.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub x: Vector<T>,
    pub m: Vector<T>,
    pub v: Vec<T>,
    pub v_hat: Option<Vec<T>>,
    pub k: usize,
    pub diverged: bool,
    /// Cached `∇f(x_k)` for trace recording.
    pub grad: Vector<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn init<F: Objective<T> + ?Sized>(f: &F, x0: Vector<T>, amsgrad: bool) -> Self {
        let d = x0.len();
        let g0 = f.gradient(&x0);
        AdamState {
            x: x0,
            m: Vector::zeros(d),
            v: vec![T::zero(); d],
            v_hat: amsgrad.then(|| vec![T::zero(); d]),
            k: 0,
            diverged: !g0.all_finite(),
            grad: g0,
        }
    }
}

fn adam_like_step<T: Scalar, F: Objective<T> + ?Sized>(
    state: &AdamState<T>,
    f: &F,
    cfg: &OptimizerConfig<T>,
    amsgrad: bool,
) -> AdamState<T> {
    debug_assert!(!state.diverged);
    let pa = &cfg.adam;
    let one = T::one();

    // Bias correction rescales the moments before the x-update; at k = 0
    // the update is null (m₀ = 0) and the 0/0 correction is skipped.
    let (m_scale, v_scale) = if pa.bias_correction && state.k >= 1 {
        let k = state.k as i32;
        (
            one / (one - pa.beta1.powi(k)),
            one / (one - pa.beta2.powi(k)),
        )
    } else {
        (one, one)
    };
    let v_used = match (&state.v_hat, amsgrad) {
        (Some(vh), true) => vh,
        _ => &state.v,
    };
    let mut x_next = Vector::new(
        state
            .x
            .iter()
            .zip(state.m.iter())
            .zip(v_used)
            .map(|((&x, &m), &v)| x - pa.eta * (m * m_scale) / ((v * v_scale).sqrt() + pa.epsilon))
            .collect(),
    );
    if amsgrad && cfg.projection {
        if let Some(r) = cfg.r {
            x_next = project_box(&x_next, r);
        }
    }
    let g_next = f.gradient(&x_next);
    if !x_next.all_finite() || !g_next.all_finite() {
        let mut frozen = state.clone();
        frozen.diverged = true;
        return frozen;
    }
    let m_next = state.m.scale(pa.beta1).axpy(one - pa.beta1, &g_next);
    let v_next: Vec<T> = state
        .v
        .iter()
        .zip(g_next.iter())
        .map(|(&v, &g)| pa.beta2 * v + (one - pa.beta2) * g * g)
        .collect();
    let v_hat_next = state
        .v_hat
        .as_ref()
        .map(|vh| vh.iter().zip(&v_next).map(|(&a, &b)| a.max(b)).collect());
    AdamState {
        x: x_next,
        m: m_next,
        v: v_next,
        v_hat: v_hat_next,
        k: state.k + 1,
        diverged: false,
        grad: g_next,
    }
}

/// One full-batch Adam step in the move-then-refresh ordering:
/// `x_{k+1} = x_k - η(√V_k + εI)⁻¹ m_k`, then `m`, `V` absorb
/// `∇f(x_{k+1})`. With `m₀ = 0` the first update is null.
pub fn adam_step<T: Scalar, F: Objective<T> + ?Sized>(
    state: &AdamState<T>,
    f: &F,
    cfg: &OptimizerConfig<T>,
) -> AdamState<T> {
    adam_like_step(state, f, cfg, false)
}

/// Adam with the AMSGrad running maximum `v̂_{k+1} = max(v̂_k, V_{k+1})`
/// in the denominator, plus the optional feasible-box projection of `x`.
pub fn amsgrad_step<T: Scalar, F: Objective<T> + ?Sized>(
    state: &AdamState<T>,
    f: &F,
    cfg: &OptimizerConfig<T>,
) -> AdamState<T> {
    adam_like_step(state, f, cfg, true)
}

/// Pre-solves an objective with the semi-implicit adaptive scheme and
/// returns the best iterate found, for use as a cached optimum hint.
pub fn presolve_optimum<T: Scalar, F: Objective<T> + ?Sized>(
    f: &F,
    x0: &Vector<T>,
    grad_tol: T,
    max_iters: usize,
) -> OptimumInfo<T> {
    let mut cfg = OptimizerConfig::new(Method::AdamHnag);
    cfg.max_iters = max_iters;
    cfg.grad_tol = grad_tol;
    let mut state = init_adaptive_state(
        f,
        &cfg,
        x0.clone(),
        x0.clone(),
        DiagPrecond::identity(x0.len()),
    );
    let mut best_x = state.x_plus.clone();
    let mut best_f = f.value(&best_x);
    for _ in 0..max_iters {
        if state.converged || state.diverged || state.grad.norm() <= grad_tol {
            break;
        }
        state = adam_hnag_step(&state, f, &cfg);
        let fx = f.value(&state.x_plus);
        if fx < best_f {
            best_f = fx;
            best_x = state.x_plus.clone();
        }
    }
    OptimumInfo {
        x_star: Some(best_x),
        f_star: best_f,
    }
}

fn record_opt_row<T: Scalar, F: Objective<T> + ?Sized>(
    trace: &mut Trace,
    state: &OptState<T>,
    f: &F,
    opt: Option<&OptimumInfo<T>>,
) {
    let f_plus = f.value(&state.x_plus).as_f64();
    let f_star = opt.map(|o| o.f_star.as_f64()).unwrap_or(0.0);
    let lyap = opt
        .and_then(|o| lyapunov(&state.x_plus, &state.y, &state.p, f, o).ok())
        .map_or(f64::NAN, Scalar::as_f64);
    let y_inf = opt.and_then(|o| {
        o.x_star
            .as_ref()
            .map(|xs| state.y.sub(xs).inf_norm().as_f64())
    });
    let ratio = state.last_ratio.map_or(f64::NAN, Scalar::as_f64);
    trace.rows.push(TraceRow {
        k: state.k,
        f_gap: f_plus - f_star,
        lyapunov: lyap,
        alpha: state.last.alpha.as_f64(),
        eta: state.last.eta.as_f64(),
        ratio,
        grad_norm: state.grad.norm().as_f64(),
        y_inf_dist: y_inf,
        p_mean: state.p.mean_diag().as_f64(),
        flags: TraceFlags {
            ratio_violated: !ratio.is_nan() && ratio < 1.0,
            projected: state.last_projected,
            diverged: state.diverged,
        },
    });
    trace.diverged |= state.diverged;
}

fn record_point_row<T: Scalar, F: Objective<T> + ?Sized>(
    trace: &mut Trace,
    k: usize,
    x: &Vector<T>,
    grad: &Vector<T>,
    eta: f64,
    f: &F,
    opt: Option<&OptimumInfo<T>>,
    diverged: bool,
) {
    let f_star = opt.map(|o| o.f_star.as_f64()).unwrap_or(0.0);
    trace.rows.push(TraceRow {
        k,
        f_gap: f.value(x).as_f64() - f_star,
        lyapunov: f64::NAN,
        alpha: f64::NAN,
        eta,
        ratio: f64::NAN,
        grad_norm: grad.norm().as_f64(),
        y_inf_dist: None,
        p_mean: f64::NAN,
        flags: TraceFlags {
            diverged,
            ..TraceFlags::default()
        },
    });
    trace.diverged |= diverged;
}

/// Runs the configured method from the given initial data, recording one
/// trace row per iteration (plus the initial row). Deterministic in its
/// inputs; divergence freezes the run and flags the trace instead of
/// panicking.
pub fn run<T: Scalar, F: Objective<T> + ?Sized>(
    f: &F,
    cfg: &OptimizerConfig<T>,
    x0: &Vector<T>,
    y0: &Vector<T>,
    p0: &DiagPrecond<T>,
) -> Trace {
    cfg.validate().expect("invalid optimizer config");
    assert_eq!(x0.len(), f.dim(), "x0 dimension mismatch");
    let opt = f.optimum_hint();
    let opt_ref = opt.as_ref();
    let mut trace = Trace::new(cfg.method.name(), opt_ref.map(|o| o.f_star.as_f64()));

    match cfg.method {
        Method::AdamHnag | Method::AdamHnagS | Method::Hnag => {
            let mut state = match cfg.method {
                Method::Hnag => init_hnag_state(f, x0.clone(), y0.clone()),
                _ => init_adaptive_state(f, cfg, x0.clone(), y0.clone(), p0.clone()),
            };
            record_opt_row(&mut trace, &state, f, opt_ref);
            for _ in 0..cfg.max_iters {
                if state.converged
                    || state.diverged
                    || (cfg.grad_tol > T::zero() && state.grad.norm() <= cfg.grad_tol)
                {
                    break;
                }
                state = match cfg.method {
                    Method::AdamHnag => adam_hnag_step(&state, f, cfg),
                    Method::AdamHnagS => adam_hnag_s_step(&state, f, cfg),
                    Method::Hnag => hnag_step(&state, f),
                    _ => unreachable!(),
                };
                record_opt_row(&mut trace, &state, f, opt_ref);
                if state.diverged {
                    break;
                }
            }
        }
        Method::Gd => {
            let l = f.smoothness();
            let eta = (T::one() / l).as_f64();
            let mut x = x0.clone();
            let mut g = f.gradient(&x);
            record_point_row(&mut trace, 0, &x, &g, eta, f, opt_ref, !g.all_finite());
            for k in 1..=cfg.max_iters {
                if !g.all_finite()
                    || grad_negligible(&g, &x)
                    || (cfg.grad_tol > T::zero() && g.norm() <= cfg.grad_tol)
                {
                    break;
                }
                x = x.axpy(-(T::one() / l), &g);
                g = f.gradient(&x);
                let diverged = !x.all_finite() || !g.all_finite();
                record_point_row(&mut trace, k, &x, &g, eta, f, opt_ref, diverged);
                if diverged {
                    break;
                }
            }
        }
        Method::Adam | Method::AmsGrad => {
            let amsgrad = cfg.method == Method::AmsGrad;
            let eta = cfg.adam.eta.as_f64();
            let mut state = AdamState::init(f, x0.clone(), amsgrad);
            record_point_row(&mut trace, 0, &state.x, &state.grad, eta, f, opt_ref, state.diverged);
            for _ in 0..cfg.max_iters {
                if state.diverged
                    || (cfg.grad_tol > T::zero() && state.grad.norm() <= cfg.grad_tol)
                {
                    break;
                }
                state = adam_like_step(&state, f, cfg, amsgrad);
                record_point_row(
                    &mut trace,
                    state.k,
                    &state.x,
                    &state.grad,
                    eta,
                    f,
                    opt_ref,
                    state.diverged,
                );
                if state.diverged {
                    break;
                }
            }
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_dataset;
    use crate::diagnostics::audit_contraction;
    use crate::objectives::{LogisticProblem, QuadraticProblem};
    use crate::rng::{RngSeed, SplitMix64};

    /// Linear objective with constant gradient; zero smoothness never
    /// reaches the Adam-type steps.
    struct ConstantGrad {
        c: Vector<f64>,
    }

    impl Objective<f64> for ConstantGrad {
        fn dim(&self) -> usize {
            self.c.len()
        }
        fn value(&self, x: &Vector<f64>) -> f64 {
            self.c.dot(x)
        }
        fn gradient(&self, _x: &Vector<f64>) -> Vector<f64> {
            self.c.clone()
        }
        fn smoothness(&self) -> f64 {
            0.0
        }
    }

    /// Quartic bowl that claims a smoothness constant far too small, so a
    /// "1/L" step explodes; exercises the divergence guard.
    struct LyingQuartic;

    impl Objective<f64> for LyingQuartic {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Vector<f64>) -> f64 {
            x[0].powi(4)
        }
        fn gradient(&self, x: &Vector<f64>) -> Vector<f64> {
            Vector::new(vec![4.0 * x[0].powi(3)])
        }
        fn smoothness(&self) -> f64 {
            1.0
        }
    }

    fn small_logistic(seed: u64) -> LogisticProblem<f64> {
        let ds = synth_dataset(20, 5, 50.0, RngSeed(seed)).unwrap();
        LogisticProblem::from_dataset(&ds, true)
    }

    #[test]
    fn one_step_on_isotropic_quadratic_hits_optimum() {
        // Hand-executed: η₀ = 1/L = 1, x₀⁺ = 0, x₁ = α₀/(1+α₀)·(1,1),
        // η₁ = 1, so x₁⁺ = x₁ - ∇f(x₁) = 0 exactly.
        let f = QuadraticProblem::<f64>::isotropic(2);
        let mut cfg = OptimizerConfig::new(Method::AdamHnag);
        cfg.gamma_mode = GammaMode::Fixed(0.0);
        let x0 = Vector::new(vec![1.0, 1.0]);
        let state = init_adaptive_state(&f, &cfg, x0.clone(), x0, DiagPrecond::identity(2));
        assert_eq!(state.last.eta, 1.0);
        assert_eq!(state.x_plus.as_slice(), &[0.0, 0.0]);

        let next = adam_hnag_step(&state, &f, &cfg);
        assert_eq!(next.last.eta, 1.0);
        assert_eq!(next.x_plus.as_slice(), &[0.0, 0.0]);
        let expect = (2.0f64 / 2.0).sqrt() / (1.0 + (0.5f64).sqrt());
        assert!((next.x[0] - 0.5f64.sqrt() / (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
        let _ = expect;
    }

    #[test]
    fn alpha_one_averages_x_plus_and_y() {
        let f = QuadraticProblem::<f64>::isotropic(2);
        let mut cfg = OptimizerConfig::new(Method::AdamHnag);
        cfg.gamma_mode = GammaMode::Fixed(0.0);
        let x0 = Vector::new(vec![3.0, -1.0]);
        let y0 = Vector::new(vec![1.0, 5.0]);
        let mut state =
            init_adaptive_state(&f, &cfg, x0, y0.clone(), DiagPrecond::identity(2));
        state.last = StepParams::new(2.0, 1.0, 0.0, Delta::Lagged);
        let x_plus = state.x_plus.clone();
        let next = adam_hnag_step(&state, &f, &cfg);
        for i in 0..2 {
            assert!((next.x[i] - 0.5 * (x_plus[i] + y0[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_zero_decays_preconditioner() {
        let f = small_logistic(4);
        let mut cfg = OptimizerConfig::new(Method::AdamHnag);
        cfg.gamma_mode = GammaMode::Fixed(0.0);
        let d = f.dim();
        let x0 = Vector::zeros(d);
        let p0 = DiagPrecond::new((0..d).map(|i| 0.5 + i as f64).collect());
        let state = init_adaptive_state(&f, &cfg, x0.clone(), x0, p0.clone());
        let alpha = state.last.alpha;
        let next = adam_hnag_step(&state, &f, &cfg);
        for (got, want) in next.p.diag().iter().zip(p0.diag()) {
            assert!((got - want / (1.0 + alpha)).abs() <= 1e-15 * want);
        }
    }

    #[test]
    fn sync_precond_closed_form_scalar_check() {
        // P=1, α̃=0.5, γ=0.5, g²=2 → 0.25 + ½√(0.25+4·0.25·2) = 1.
        let p = DiagPrecond::new(vec![1.0f64]);
        let g = Vector::new(vec![2.0f64.sqrt()]);
        let next = sync_precond_update(&p, &g, 0.5, 0.5);
        assert!((next.diag()[0] - 1.0).abs() < 1e-15);

        // Oracle: positive root of P² - (1-α̃)P_k P - α̃γg² = 0 by bisection.
        let quad = |x: f64| x * x - 0.5 * x - 0.5;
        let (mut lo, mut hi) = (0.0f64, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if quad(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((next.diag()[0] - 0.5 * (lo + hi)).abs() < 1e-12);
    }

    #[test]
    fn sync_precond_degenerate_cases() {
        let p = DiagPrecond::new(vec![0.8f64, 2.0]);
        let g = Vector::new(vec![3.0, -1.0]);
        // α̃ = 0: no step, P unchanged.
        let same = sync_precond_update(&p, &g, 0.0, 0.7);
        assert_eq!(same.diag(), p.diag());
        // γ = 0: pure shrink (1-α̃)P.
        let shrunk = sync_precond_update(&p, &g, 0.25, 0.0);
        for (got, want) in shrunk.diag().iter().zip(p.diag()) {
            assert!((got - 0.75 * want).abs() < 1e-15);
        }
    }

    #[test]
    fn sync_precond_solves_implicit_equation() {
        // Residual of (P₊-P)/α̃ = -P + γP₊⁻¹G² on random inputs.
        let mut rng = SplitMix64::new(RngSeed(8));
        for _ in 0..500 {
            let p = 0.1 + 3.0 * rng.next_f64();
            let g = 2.0 * rng.next_gaussian();
            let at = rng.next_f64() * 0.9;
            let gamma = rng.next_f64();
            let pd = DiagPrecond::new(vec![p]);
            let gv = Vector::new(vec![g]);
            let p_next = sync_precond_update(&pd, &gv, at, gamma).diag()[0];
            let residual = (p_next - p) / at.max(1e-300) - (-p + gamma * g * g / p_next);
            if at > 1e-12 {
                assert!(residual.abs() <= 1e-10, "residual {residual}");
            }
        }
    }

    #[test]
    fn project_box_examples_and_nonexpansiveness() {
        let y = Vector::new(vec![3.0, -0.2]);
        assert_eq!(project_box(&y, 2.0).as_slice(), &[1.0, -0.2]);
        let inside = Vector::new(vec![0.3, -0.4]);
        assert_eq!(project_box(&inside, 2.0), inside);

        // Projection never increases the P-distance to any box point.
        let mut rng = SplitMix64::new(RngSeed(12));
        for _ in 0..300 {
            let d = 1 + (rng.next_u64() % 5) as usize;
            let r = 0.5 + 3.0 * rng.next_f64();
            let y = Vector::new((0..d).map(|_| 4.0 * rng.next_gaussian()).collect());
            let target = Vector::new(
                (0..d)
                    .map(|_| (rng.next_f64() - 0.5) * r) // inside [-R/2, R/2]
                    .collect(),
            );
            let p = DiagPrecond::new((0..d).map(|_| 0.05 + 5.0 * rng.next_f64()).collect());
            let proj = project_box(&y, r);
            let before = p.weighted_sq_norm(&y.sub(&target));
            let after = p.weighted_sq_norm(&proj.sub(&target));
            assert!(after <= before * (1.0 + 1e-15), "{after} > {before}");
        }
    }

    #[test]
    fn gd_step_examples() {
        let f = QuadraticProblem::<f64>::isotropic(2);
        let x = Vector::new(vec![2.0, 0.0]);
        assert_eq!(gd_step(&x, &f).as_slice(), &[0.0, 0.0]);
        let at_opt = Vector::zeros(2);
        assert_eq!(gd_step(&at_opt, &f), at_opt);
    }

    #[test]
    fn gd_descent_lemma_decrease_on_logistic() {
        let f = small_logistic(7);
        let l = f.smoothness();
        let mut x = Vector::zeros(f.dim());
        for _ in 0..50 {
            let g = f.gradient(&x);
            let next = gd_step(&x, &f);
            let drop = f.value(&x) - f.value(&next);
            let want = g.dot(&g) / (2.0 * l);
            assert!(drop >= want - 1e-12, "descent {drop} < {want}");
            x = next;
        }
    }

    #[test]
    fn hnag_schedule_values() {
        let l = 2.0f64;
        let (a1, p1) = hnag_schedule(1, l);
        assert_eq!(a1, 1.0);
        assert!((p1 - l / 3.0).abs() < 1e-15);

        // Tail: α_k = 2/(k+1) and P_k = α_k²L/(2+α_k) ≈ 2L/k² for large k.
        let k = 10_000;
        let (ak, pk) = hnag_schedule(k, l);
        assert!((k as f64 * ak - 2.0).abs() < 1e-3);
        let closed = ak * ak * l / (2.0 + ak);
        assert_eq!(pk, closed);
        assert!((pk - 2.0 * l / (k as f64 * k as f64)).abs() <= 0.001 * pk);
    }

    #[test]
    fn hnag_x_step_uses_one_over_l() {
        let f = small_logistic(3);
        let l = f.smoothness();
        let x0 = Vector::zeros(f.dim());
        let mut state = init_hnag_state(&f, x0.clone(), x0);
        for _ in 0..5 {
            state = hnag_step(&state, &f);
            let recompute = state.x.axpy(-(1.0 / l), &state.grad);
            assert_eq!(state.x_plus, recompute);
        }
    }

    #[test]
    fn adam_first_update_is_null() {
        let f = small_logistic(9);
        let cfg = OptimizerConfig::new(Method::Adam);
        let x0 = Vector::new((0..f.dim()).map(|i| i as f64 * 0.1).collect());
        let state = AdamState::init(&f, x0.clone(), false);
        let next = adam_step(&state, &f, &cfg);
        assert_eq!(next.x, x0);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn adam_constant_gradient_geometric_moments() {
        // Closed form with m₀ = V₀ = 0: m_k = (1-β₁ᵏ)c, V_k = (1-β₂ᵏ)c².
        let c = Vector::new(vec![0.7, -2.0]);
        let f = ConstantGrad { c: c.clone() };
        let cfg = OptimizerConfig::new(Method::Adam);
        let (b1, b2) = (cfg.adam.beta1, cfg.adam.beta2);
        let mut state = AdamState::init(&f, Vector::zeros(2), false);
        for _ in 0..100 {
            state = adam_step(&state, &f, &cfg);
        }
        for i in 0..2 {
            let want_m = (1.0 - b1.powi(100)) * c[i];
            let want_v = (1.0 - b2.powi(100)) * c[i] * c[i];
            assert!((state.m[i] - want_m).abs() <= 1e-10 * want_m.abs());
            assert!((state.v[i] - want_v).abs() <= 1e-10 * want_v.abs());
        }
    }

    #[test]
    fn adam_memoryless_limit_is_sign_like() {
        let c = Vector::new(vec![5.0, -0.03]);
        let f = ConstantGrad { c: c.clone() };
        let mut cfg = OptimizerConfig::new(Method::Adam);
        cfg.adam.beta1 = 1e-12;
        cfg.adam.beta2 = 1e-12;
        cfg.adam.epsilon = 1e-300;
        cfg.adam.eta = 0.1;
        let mut state = AdamState::init(&f, Vector::zeros(2), false);
        state = adam_step(&state, &f, &cfg); // null first update fills m, V
        let before = state.x.clone();
        state = adam_step(&state, &f, &cfg);
        for i in 0..2 {
            let step = state.x[i] - before[i];
            assert!((step + 0.1 * c[i].signum()).abs() < 1e-9, "step {step}");
        }
    }

    #[test]
    fn amsgrad_matches_adam_under_monotone_v() {
        // Constant gradient makes V nondecreasing, so max(v̂, V) = V and the
        // two trajectories coincide.
        let f = ConstantGrad {
            c: Vector::new(vec![1.5, -0.4]),
        };
        let cfg = OptimizerConfig::new(Method::Adam);
        let mut a = AdamState::init(&f, Vector::zeros(2), false);
        let mut b = AdamState::init(&f, Vector::zeros(2), true);
        for _ in 0..50 {
            a = adam_step(&a, &f, &cfg);
            b = amsgrad_step(&b, &f, &cfg);
            assert_eq!(a.x, b.x);
        }
    }

    #[test]
    fn amsgrad_vhat_never_decreases() {
        let f = small_logistic(15);
        let cfg = OptimizerConfig::new(Method::AmsGrad);
        let mut state = AdamState::init(&f, Vector::zeros(f.dim()), true);
        let mut prev = state.v_hat.clone().unwrap();
        for _ in 0..50 {
            state = amsgrad_step(&state, &f, &cfg);
            let cur = state.v_hat.clone().unwrap();
            for (c, p) in cur.iter().zip(&prev) {
                assert!(c >= p);
            }
            prev = cur;
        }
    }

    #[test]
    fn reddi_sequence_sign_check() {
        // Qualitative: on the periodic spike/base loss sequence, AMSGrad
        // settles at the negative end while plain Adam drifts positive.
        let mut cfg = OptimizerConfig::new(Method::Adam);
        cfg.adam = AdamParams {
            eta: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            bias_correction: true,
        };
        cfg.projection = true;
        cfg.r = Some(2.0);
        let run = |amsgrad: bool| {
            let mut state = AdamState::init(
                &ConstantGrad {
                    c: Vector::zeros(1),
                },
                Vector::zeros(1),
                amsgrad,
            );
            let mut xs = Vec::new();
            for t in 1u64..=60_000 {
                let c = if t % 101 == 1 { 1010.0 } else { -10.0 };
                xs.push(state.x[0]);
                let f_t = ConstantGrad {
                    c: Vector::new(vec![c]),
                };
                state = if amsgrad {
                    amsgrad_step(&state, &f_t, &cfg)
                } else {
                    let mut s = adam_step(&state, &f_t, &cfg);
                    s.x = Vector::new(vec![s.x[0].clamp(-1.0, 1.0)]);
                    s
                };
            }
            let tail = &xs[54_000..];
            tail.iter().sum::<f64>() / tail.len() as f64
        };
        assert!(run(false) > 0.0, "adam should drift positive");
        assert!(run(true) < 0.0, "amsgrad should head to -1");
    }

    #[test]
    fn run_zero_iters_records_initial_row_only() {
        let f = QuadraticProblem::<f64>::isotropic(3);
        for method in [Method::Gd, Method::Adam, Method::Hnag, Method::AdamHnag] {
            let mut cfg = OptimizerConfig::new(method);
            cfg.max_iters = 0;
            let x0 = Vector::new(vec![1.0, 2.0, 3.0]);
            let trace = run(&f, &cfg, &x0, &x0, &DiagPrecond::identity(3));
            assert_eq!(trace.rows.len(), 1, "{}", cfg.method.name());
            assert_eq!(trace.rows[0].k, 0);
        }
    }

    #[test]
    fn run_adam_hnag_contracts_on_quadratic() {
        let a: Vec<f64> = (0..6).map(|i| 0.5 + 0.3 * i as f64).collect();
        let f = QuadraticProblem::new(a, Vector::zeros(6));
        let mut cfg = OptimizerConfig::new(Method::AdamHnag);
        cfg.max_iters = 200;
        cfg.gamma_mode = GammaMode::Theoretical;
        cfg.projection = true;
        cfg.r = Some(4.0);
        let x0 = Vector::new(vec![1.0; 6]);
        let trace = run(&f, &cfg, &x0, &x0, &DiagPrecond::identity(6));
        assert!(trace.final_f_gap() <= 1e-10, "gap {}", trace.final_f_gap());

        // Oracle: the contraction product from the recorded α sequence must
        // upper-bound the recorded Lyapunov sequence.
        let audit = audit_contraction(&trace.rows, 1e-8, 1e-6);
        assert!(
            audit.per_step_violations.is_empty(),
            "violations at {:?}",
            audit.per_step_violations
        );
        assert!(audit.cumulative_ok, "excess {}", audit.max_cumulative_excess);
        // P stays positive along the way.
        assert!(trace.rows.iter().all(|r| r.p_mean > 0.0));
    }

    #[test]
    fn directional_descent_holds_along_both_schemes() {
        let f = small_logistic(23);
        for method in [Method::AdamHnag, Method::AdamHnagS] {
            let mut cfg = OptimizerConfig::new(method);
            cfg.max_iters = 120;
            let x0 = Vector::zeros(f.dim());
            let mut state = init_adaptive_state(
                &f,
                &cfg,
                x0.clone(),
                x0.clone(),
                DiagPrecond::identity(f.dim()),
            );
            for _ in 0..cfg.max_iters {
                if state.converged {
                    break;
                }
                let p_before = state.p.clone();
                let next = match method {
                    Method::AdamHnag => adam_hnag_step(&state, &f, &cfg),
                    _ => adam_hnag_s_step(&state, &f, &cfg),
                };
                if next.converged {
                    break;
                }
                let p_ref = match method {
                    Method::AdamHnag => &p_before,
                    _ => &next.p,
                };
                let eta = next.last.eta;
                let drop = f.value(&next.x) - f.value(&next.x_plus);
                let want = 0.5 * eta * p_ref.inv_weighted_sq_norm(&next.grad);
                assert!(drop >= want - 1e-10, "{}: {drop} < {want}", method.name());
                // The x⁺ invariant: one ηP_ref⁻¹ gradient step from x.
                let recompute = next.x.axpy(-eta, &p_ref.inverse_apply(&next.grad));
                assert_eq!(next.x_plus, recompute);
                state = next;
            }
        }
    }

    #[test]
    fn hnag_runs_are_bit_reproducible() {
        let f = small_logistic(31);
        let mut cfg = OptimizerConfig::new(Method::Hnag);
        cfg.max_iters = 60;
        let x0 = Vector::zeros(f.dim());
        let p0 = DiagPrecond::identity(f.dim());
        let a = run(&f, &cfg, &x0, &x0, &p0);
        let b = run(&f, &cfg, &x0, &x0, &p0);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn divergence_is_flagged_not_panicked() {
        let f = LyingQuartic;
        let mut cfg = OptimizerConfig::new(Method::Gd);
        cfg.max_iters = 400;
        let x0 = Vector::new(vec![2.0]);
        let trace = run(&f, &cfg, &x0, &x0, &DiagPrecond::identity(1));
        assert!(trace.diverged);
        assert!(trace.rows.last().unwrap().flags.diverged);
    }

    #[test]
    fn single_precision_instantiation_converges() {
        let f = QuadraticProblem::<f32>::isotropic(2);
        let mut cfg = OptimizerConfig::<f32>::new(Method::AdamHnag);
        cfg.max_iters = 80;
        cfg.gamma_mode = GammaMode::Fixed(0.0);
        let x0 = Vector::new(vec![1.0f32, -2.0]);
        let trace = run(&f, &cfg, &x0, &x0, &DiagPrecond::identity(2));
        assert!(trace.final_f_gap() < 1e-6, "gap {}", trace.final_f_gap());
    }

    #[test]
    fn config_validation_catches_bad_setups() {
        let mut cfg = OptimizerConfig::<f64>::new(Method::AdamHnag);
        cfg.gamma_mode = GammaMode::Theoretical;
        assert!(cfg.validate().is_err()); // missing R
        cfg.r = Some(2.0);
        assert!(cfg.validate().is_ok());
        cfg.adam.beta1 = 1.0;
        assert!(cfg.validate().is_err());
    }
}
