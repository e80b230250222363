//! Continuous-time simulator for the adaptive accelerated flow
//!
//! ```text
//! x' = y - x - β P⁻¹∇f(x),   y' = -P⁻¹∇f(x),   P' = -P + γ P⁻¹G²
//! ```
//!
//! and for the raw adaptive-moment flow
//!
//! ```text
//! x' = -m/√V,   τ₁ m' = -m + ∇f(x),   τ₂ V' = -V + G²
//! ```
//!
//! with a classical fixed-step RK4 integrator and a posteriori checking of
//! the exponential Lyapunov decay `ℰ(t) ≤ ℰ(0)e^{-t}`.

use std::fmt::Write as _;

use crate::numkit::{DiagPrecond, Vector};
use crate::objectives::Objective;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowKind {
    /// The corrected flow in `(x, y, P)` variables.
    AdamHnagFlow,
    /// The raw flow in `(x, m, V)` variables.
    AdamFlow,
}

/// Flow coefficients, held constant along a run.
#[derive(Debug, Clone, Copy)]
pub struct FlowParams<T> {
    pub beta: T,
    pub gamma: T,
    pub kind: FlowKind,
    /// Momentum time constant of the raw flow.
    pub tau1: T,
    /// Second-moment time constant of the raw flow.
    pub tau2: T,
}

impl<T: Scalar> FlowParams<T> {
    pub fn adam_hnag(beta: T, gamma: T) -> Self {
        assert!(beta > T::zero(), "beta must be > 0");
        assert!(gamma >= T::zero(), "gamma must be >= 0");
        FlowParams {
            beta,
            gamma,
            kind: FlowKind::AdamHnagFlow,
            tau1: T::one(),
            tau2: T::of(0.5),
        }
    }

    pub fn adam(tau1: T, tau2: T) -> Self {
        assert!(tau1 > T::zero() && tau2 > T::zero(), "taus must be > 0");
        FlowParams {
            beta: T::zero(),
            gamma: T::one(),
            kind: FlowKind::AdamFlow,
            tau1,
            tau2,
        }
    }
}

/// Flow state at one instant. For [`FlowKind::AdamFlow`], `y` holds the
/// momentum `m` and `p` the second-moment diagonal `V`.
#[derive(Debug, Clone)]
pub struct FlowState<T> {
    pub x: Vector<T>,
    pub y: Vector<T>,
    pub p: DiagPrecond<T>,
    pub t: T,
}

impl<T: Scalar> FlowState<T> {
    pub fn new(x: Vector<T>, y: Vector<T>, p: DiagPrecond<T>) -> Self {
        FlowState {
            x,
            y,
            p,
            t: T::zero(),
        }
    }

    fn all_finite(&self) -> bool {
        self.x.all_finite() && self.y.all_finite() && self.p.all_finite()
    }
}

/// Time derivative of a flow state.
#[derive(Debug, Clone)]
pub struct FlowDeriv<T> {
    pub dx: Vector<T>,
    pub dy: Vector<T>,
    pub dp: Vec<T>,
}

/// Exact right-hand side of the selected flow at the given state.
pub fn flow_rhs<T: Scalar, F: Objective<T> + ?Sized>(
    s: &FlowState<T>,
    params: &FlowParams<T>,
    f: &F,
) -> FlowDeriv<T> {
    let g = f.gradient(&s.x);
    match params.kind {
        FlowKind::AdamHnagFlow => {
            let pinv_g = s.p.inverse_apply(&g);
            let dx = s.y.sub(&s.x).axpy(-params.beta, &pinv_g);
            let dy = pinv_g.scale(-T::one());
            let dp = s
                .p
                .diag()
                .iter()
                .zip(g.iter())
                .map(|(&p, &gi)| -p + params.gamma * gi * gi / p)
                .collect();
            FlowDeriv { dx, dy, dp }
        }
        FlowKind::AdamFlow => {
            // y = m, p = V.
            let dx = Vector::new(
                s.y.iter()
                    .zip(s.p.diag())
                    .map(|(&m, &v)| -m / v.sqrt())
                    .collect(),
            );
            let dy = g.sub(&s.y).scale(T::one() / params.tau1);
            let dp = s
                .p
                .diag()
                .iter()
                .zip(g.iter())
                .map(|(&v, &gi)| (gi * gi - v) / params.tau2)
                .collect();
            FlowDeriv { dx, dy, dp }
        }
    }
}

fn state_axpy<T: Scalar>(s: &FlowState<T>, c: T, d: &FlowDeriv<T>) -> FlowState<T> {
    FlowState {
        x: s.x.axpy(c, &d.dx),
        y: s.y.axpy(c, &d.dy),
        // Reconstruction floors the diagonal, keeping P (or V) positive.
        p: DiagPrecond::new(
            s.p.diag()
                .iter()
                .zip(&d.dp)
                .map(|(&p, &dp)| p + c * dp)
                .collect(),
        ),
        t: s.t + c,
    }
}

/// One classical RK4 step of size `dt`.
pub fn rk4_step<T: Scalar, F: Objective<T> + ?Sized>(
    s: &FlowState<T>,
    params: &FlowParams<T>,
    f: &F,
    dt: T,
) -> FlowState<T> {
    let half = dt / T::of(2.0);
    let k1 = flow_rhs(s, params, f);
    let k2 = flow_rhs(&state_axpy(s, half, &k1), params, f);
    let k3 = flow_rhs(&state_axpy(s, half, &k2), params, f);
    let k4 = flow_rhs(&state_axpy(s, dt, &k3), params, f);
    let sixth = dt / T::of(6.0);
    let third = dt / T::of(3.0);
    let mut out = state_axpy(s, sixth, &k1);
    out = state_axpy(&out, third, &k2);
    out = state_axpy(&out, third, &k3);
    out = state_axpy(&out, sixth, &k4);
    out.t = s.t + dt;
    out
}

/// One recorded instant of an integration.
#[derive(Debug, Clone, Copy)]
pub struct FlowRow {
    pub t: f64,
    /// `ℰ(z(t), P(t))`; NaN when the objective has no optimum hint.
    pub lyapunov: f64,
    pub f_gap: f64,
    pub y_inf_dist: f64,
}

/// Recorded trajectory with the parameters needed to audit it.
#[derive(Debug, Clone)]
pub struct FlowSeries {
    pub rows: Vec<FlowRow>,
    pub beta: f64,
    pub gamma: f64,
    /// Time at which the state stopped being finite, if it did.
    pub blow_up: Option<f64>,
}

impl FlowSeries {
    pub fn e0(&self) -> f64 {
        self.rows.first().map_or(f64::NAN, |r| r.lyapunov)
    }

    /// CSV with the decay bound `ℰ₀e^{-t}` alongside the measured energy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lyapunov,bound,f_gap,y_inf_dist\n");
        let e0 = self.e0();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.t,
                r.lyapunov,
                e0 * (-r.t).exp(),
                r.f_gap,
                r.y_inf_dist
            );
        }
        out
    }
}

/// Integrates the flow from `s0` to time `t_final` with fixed step `dt`,
/// recording the Lyapunov value at every step. For the raw flow the energy
/// is recorded in the split variables `y = x - m/√V`, `P = √V`.
pub fn integrate<T: Scalar, F: Objective<T> + ?Sized>(
    s0: FlowState<T>,
    params: &FlowParams<T>,
    f: &F,
    t_final: T,
    dt: T,
) -> FlowSeries {
    assert!(dt > T::zero(), "dt must be > 0");
    assert!(t_final >= T::zero(), "t_final must be >= 0");
    let opt = f.optimum_hint();
    let record = |s: &FlowState<T>| -> FlowRow {
        let (y_split, p_split) = match params.kind {
            FlowKind::AdamHnagFlow => (s.y.clone(), s.p.clone()),
            FlowKind::AdamFlow => {
                let y = Vector::new(
                    s.x.iter()
                        .zip(s.y.iter())
                        .zip(s.p.diag())
                        .map(|((&x, &m), &v)| x - m / v.sqrt())
                        .collect(),
                );
                let p = DiagPrecond::new(s.p.diag().iter().map(|&v| v.sqrt()).collect());
                (y, p)
            }
        };
        let fx = f.value(&s.x).as_f64();
        match &opt {
            Some(o) => {
                let f_gap = fx - o.f_star.as_f64();
                match &o.x_star {
                    Some(xs) => {
                        let dist = y_split.sub(xs);
                        let lyap = f_gap
                            + 0.5 * p_split.weighted_sq_norm(&dist).as_f64();
                        FlowRow {
                            t: s.t.as_f64(),
                            lyapunov: lyap,
                            f_gap,
                            y_inf_dist: dist.inf_norm().as_f64(),
                        }
                    }
                    None => FlowRow {
                        t: s.t.as_f64(),
                        lyapunov: f64::NAN,
                        f_gap,
                        y_inf_dist: f64::NAN,
                    },
                }
            }
            None => FlowRow {
                t: s.t.as_f64(),
                lyapunov: f64::NAN,
                f_gap: fx,
                y_inf_dist: f64::NAN,
            },
        }
    };

    let steps = (t_final / dt).round().to_usize().unwrap_or(0);
    let mut rows = Vec::with_capacity(steps + 1);
    let mut state = s0;
    rows.push(record(&state));
    let mut blow_up = None;
    for _ in 0..steps {
        state = rk4_step(&state, params, f, dt);
        if !state.all_finite() {
            blow_up = Some(state.t.as_f64());
            break;
        }
        rows.push(record(&state));
    }
    FlowSeries {
        rows,
        beta: params.beta.as_f64(),
        gamma: params.gamma.as_f64(),
        blow_up,
    }
}

/// Outcome of checking `ℰ(t) ≤ ℰ(0)e^{-t}(1 + tol)` along a series.
#[derive(Debug, Clone)]
pub struct LyapunovReport {
    /// `(t, relative excess)` for every violating instant.
    pub violations: Vec<(f64, f64)>,
    pub max_excess: f64,
    /// Whether `γ‖y(t)-x⋆‖²_∞ ≤ 2β` held at every recorded instant
    /// (vacuous at γ = 0).
    pub premise_held: bool,
    /// Largest observed `γ‖y-x⋆‖²_∞ - 2β`.
    pub premise_worst: f64,
}

/// Verifies the exponential decay bound a posteriori and reports whether
/// the β/γ premise held along the trajectory.
pub fn check_strong_lyapunov(series: &FlowSeries, tol: f64) -> LyapunovReport {
    let e0 = series.e0();
    let mut violations = Vec::new();
    let mut max_excess = 0.0f64;
    let mut premise_worst = f64::NEG_INFINITY;
    for r in &series.rows {
        let bound = e0 * (-r.t).exp();
        let excess = r.lyapunov / bound - 1.0;
        if r.lyapunov > bound * (1.0 + tol) {
            violations.push((r.t, excess));
        }
        max_excess = max_excess.max(excess);
        let lhs = series.gamma * r.y_inf_dist * r.y_inf_dist;
        premise_worst = premise_worst.max(lhs - 2.0 * series.beta);
    }
    LyapunovReport {
        violations,
        max_excess,
        premise_held: premise_worst <= 0.0,
        premise_worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::QuadraticProblem;

    #[test]
    fn rhs_at_stationary_point() {
        let f = QuadraticProblem::new(vec![1.0, 2.0], Vector::new(vec![0.5, -0.5]));
        let x_star = Vector::new(vec![0.5, -0.5]);
        let p = DiagPrecond::new(vec![0.3, 4.0]);
        let s = FlowState::new(x_star.clone(), x_star, p.clone());
        let d = flow_rhs(&s, &FlowParams::adam_hnag(1.0, 0.0), &f);
        assert_eq!(d.dx.as_slice(), &[0.0, 0.0]);
        assert_eq!(d.dy.as_slice(), &[0.0, 0.0]);
        assert_eq!(d.dp, vec![-0.3, -4.0]);
    }

    #[test]
    fn rhs_scalar_worked_example() {
        // f = x²/2 at x = 1, y = 0, P = 1, β = 1, γ = 0:
        // x' = y - x - β·g = -2, y' = -g = -1, P' = -P = -1.
        let f = QuadraticProblem::<f64>::isotropic(1);
        let s = FlowState::new(
            Vector::new(vec![1.0]),
            Vector::new(vec![0.0]),
            DiagPrecond::identity(1),
        );
        let d = flow_rhs(&s, &FlowParams::adam_hnag(1.0, 0.0), &f);
        assert_eq!(d.dx.as_slice(), &[-2.0]);
        assert_eq!(d.dy.as_slice(), &[-1.0]);
        assert_eq!(d.dp, vec![-1.0]);
    }

    #[test]
    fn beta_zero_gamma_one_matches_split_form() {
        // With β = 0 and γ = 1 the corrected flow degenerates to the split
        // form: x' = y - x, y' = -P⁻¹g, P' = -P + P⁻¹G².
        let f = QuadraticProblem::<f64>::isotropic(2);
        let x = Vector::new(vec![2.0, -1.0]);
        let y = Vector::new(vec![0.5, 0.5]);
        let p = DiagPrecond::new(vec![2.0, 0.5]);
        let s = FlowState::new(x.clone(), y.clone(), p.clone());
        let d = flow_rhs(&s, &FlowParams::adam_hnag(1e-300, 1.0), &f);
        let g = f.gradient(&x);
        for i in 0..2 {
            assert!((d.dx[i] - (y[i] - x[i])).abs() < 1e-250);
            assert!((d.dy[i] + g[i] / p.diag()[i]).abs() < 1e-15);
            let expect = -p.diag()[i] + g[i] * g[i] / p.diag()[i];
            assert!((d.dp[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn integrate_zero_horizon_records_initial_state() {
        let f = QuadraticProblem::<f64>::isotropic(2);
        let s = FlowState::new(
            Vector::new(vec![1.0, 1.0]),
            Vector::new(vec![1.0, 1.0]),
            DiagPrecond::identity(2),
        );
        let series = integrate(s, &FlowParams::adam_hnag(1.0, 0.0), &f, 0.0, 1e-3);
        assert_eq!(series.rows.len(), 1);
        assert!(series.blow_up.is_none());
    }

    #[test]
    fn rk4_is_fourth_order_by_richardson() {
        // Richardson oracle: error(dt)/error(dt/2) ≈ 2⁴ when the global
        // error scales as dt⁴; accept within a factor of 2.
        let f = QuadraticProblem::new(vec![1.0, 3.0], Vector::new(vec![0.0, 0.0]));
        let params = FlowParams::adam_hnag(0.7, 0.0);
        let s0 = FlowState::new(
            Vector::new(vec![1.0, -2.0]),
            Vector::new(vec![0.5, 0.5]),
            DiagPrecond::new(vec![1.0, 2.0]),
        );
        let terminal = |dt: f64| {
            let mut s = s0.clone();
            let steps = (2.0 / dt).round() as usize;
            for _ in 0..steps {
                s = rk4_step(&s, &params, &f, dt);
            }
            s
        };
        let diff = |a: &FlowState<f64>, b: &FlowState<f64>| {
            let dx = a.x.sub(&b.x).norm();
            let dy = a.y.sub(&b.y).norm();
            let dp: f64 = a
                .p
                .diag()
                .iter()
                .zip(b.p.diag())
                .map(|(&u, &v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            dx + dy + dp
        };
        let (c, m, fine) = (terminal(0.04), terminal(0.02), terminal(0.01));
        let ratio = diff(&c, &m) / diff(&m, &fine);
        assert!(
            (8.0..=32.0).contains(&ratio),
            "Richardson ratio {ratio} not consistent with order 4"
        );
    }

    #[test]
    fn energy_decays_and_p_stays_positive() {
        let f = QuadraticProblem::new(vec![0.5, 1.0, 2.0], Vector::zeros(3));
        let s = FlowState::new(
            Vector::new(vec![1.0, -1.0, 0.5]),
            Vector::new(vec![1.0, -1.0, 0.5]),
            DiagPrecond::identity(3),
        );
        let series = integrate(s, &FlowParams::adam_hnag(1.0, 0.0), &f, 5.0, 1e-3);
        for w in series.rows.windows(2) {
            assert!(w[1].lyapunov <= w[0].lyapunov * (1.0 + 1e-12), "not monotone");
        }
        let report = check_strong_lyapunov(&series, 1e-6);
        assert!(report.violations.is_empty(), "max excess {}", report.max_excess);
        assert!(report.premise_held);
    }

    #[test]
    fn doctored_series_reports_violations() {
        let f = QuadraticProblem::<f64>::isotropic(1);
        let s = FlowState::new(
            Vector::new(vec![1.0]),
            Vector::new(vec![1.0]),
            DiagPrecond::identity(1),
        );
        let mut series = integrate(s, &FlowParams::adam_hnag(1.0, 0.0), &f, 1.0, 1e-2);
        for (i, r) in series.rows.iter_mut().enumerate() {
            if i > 0 {
                r.lyapunov *= 2.0;
            }
        }
        let report = check_strong_lyapunov(&series, 1e-6);
        assert!(!report.violations.is_empty());
        assert!((report.violations[0].0 - 1e-2).abs() < 1e-12);
    }

    #[test]
    fn huge_gamma_marks_premise_violated() {
        let f = QuadraticProblem::<f64>::isotropic(1);
        let s = FlowState::new(
            Vector::new(vec![2.0]),
            Vector::new(vec![2.0]),
            DiagPrecond::identity(1),
        );
        let series = integrate(s, &FlowParams::adam_hnag(1e-3, 1e6), &f, 1.0, 1e-3);
        let report = check_strong_lyapunov(&series, 1e-6);
        assert!(!report.premise_held);
    }

    #[test]
    fn adam_flow_integrates_and_records_split_energy() {
        let f = QuadraticProblem::<f64>::isotropic(2);
        let s = FlowState::new(
            Vector::new(vec![1.0, -1.0]),
            Vector::zeros(2),                    // m(0) = 0
            DiagPrecond::new(vec![1.0, 1.0]),    // V(0) = I
        );
        let series = integrate(s, &FlowParams::adam(1.0, 0.5), &f, 2.0, 1e-3);
        assert!(series.blow_up.is_none());
        assert!(series.rows.iter().all(|r| r.lyapunov.is_finite()));
        // The raw flow still dissipates on this quadratic.
        let first = series.rows.first().unwrap().f_gap;
        let last = series.rows.last().unwrap().f_gap;
        assert!(last < first);
    }
}
