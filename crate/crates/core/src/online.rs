//! The classical online counterexample for Adam: a periodic linear loss
//! sequence on `[-1, 1]` whose rare large gradient carries the net drift,
//! plus regret accounting and the decoupled online parametrization of the
//! adaptive schemes.

use std::fmt::Write as _;

use crate::numkit::Vector;
use crate::objectives::Objective;
use crate::optimizers::{adam_step, amsgrad_step, AdamParams, AdamState, Method, OptimizerConfig};
use crate::stepsize::Delta;

/// Loss schedule on the domain `[-1, 1]`: coefficient `spike` when
/// `t mod period == 1`, otherwise `base`. The defaults give a net positive
/// drift of `spike + (period-1)·base = +10` per cycle, so the fixed
/// comparator `x = -1` is optimal.
#[derive(Debug, Clone, Copy)]
pub struct OnlineBench {
    pub period: u64,
    pub spike: f64,
    pub base: f64,
    pub horizon: u64,
}

impl Default for OnlineBench {
    fn default() -> Self {
        OnlineBench {
            period: 101,
            spike: 1010.0,
            base: -10.0,
            horizon: 500_000,
        }
    }
}

impl OnlineBench {
    pub fn new(period: u64, spike: f64, base: f64, horizon: u64) -> Self {
        assert!(period >= 2, "period must be >= 2");
        let drift = spike + (period - 1) as f64 * base;
        assert!(drift > 0.0, "net drift must be positive, got {drift}");
        OnlineBench {
            period,
            spike,
            base,
            horizon,
        }
    }

    pub fn coefficient(&self, t: u64) -> f64 {
        assert!(t >= 1, "rounds are 1-based");
        if t % self.period == 1 {
            self.spike
        } else {
            self.base
        }
    }

    /// `(value, gradient)` of the round-`t` loss at `x`.
    pub fn loss(&self, t: u64, x: f64) -> (f64, f64) {
        let c = self.coefficient(t);
        (c * x, c)
    }
}

/// The default schedule: `(1010x, 1010)` when `t mod 101 = 1`, else
/// `(-10x, -10)`.
pub fn reddi_loss(t: u64, x: f64) -> (f64, f64) {
    OnlineBench::default().loss(t, x)
}

/// Decoupled online parametrization: the metric-ratio rule for α with
/// independently tuned β and γ.
#[derive(Debug, Clone, Copy)]
pub struct OnlineParams {
    pub eta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: Delta,
}

impl OnlineParams {
    pub fn proposed(delta: Delta) -> Self {
        OnlineParams {
            eta: 1e-3,
            beta: 0.01,
            gamma: 0.1,
            delta,
        }
    }
}

/// Scalar state of the adaptive schemes in the online setting. `p_prev`
/// is the preconditioner one update behind `p_cur` (what the lagged α rule
/// reads).
#[derive(Debug, Clone, Copy)]
pub struct OnlineHnagState {
    pub x: f64,
    pub y: f64,
    pub p_cur: f64,
    pub p_prev: f64,
}

impl Default for OnlineHnagState {
    fn default() -> Self {
        OnlineHnagState {
            x: 0.0,
            y: 0.0,
            p_cur: 1.0,
            p_prev: 1.0,
        }
    }
}

/// Scalar collapse of the metric-ratio step rule: with a scalar
/// preconditioner, `η·√(gᵀP⁻¹g / gᵀP⁻²g) = η·√p` for every `g ≠ 0`.
pub fn online_alpha_rule(eta: f64, p: f64) -> f64 {
    eta * p.sqrt()
}

fn clamp_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// One online step of the selected scheme with gradient `grad`, fixed β
/// and γ, and the α rule above; both iterates are clamped to `[-1, 1]`.
/// A zero gradient leaves the state unchanged.
pub fn online_step_adam_hnag(
    state: &OnlineHnagState,
    grad: f64,
    params: &OnlineParams,
) -> OnlineHnagState {
    if grad == 0.0 {
        return *state;
    }
    match params.delta {
        Delta::Lagged => {
            let alpha = online_alpha_rule(params.eta, state.p_prev);
            let x_plus = state.x - alpha * params.beta * grad / state.p_prev;
            let x_next = clamp_unit((x_plus + alpha * state.y) / (1.0 + alpha));
            let y_next = clamp_unit(state.y - alpha * grad / state.p_cur);
            let shrink = 1.0 / (1.0 + alpha);
            let p_next =
                state.p_cur * shrink + alpha * params.gamma * shrink * grad * grad / state.p_cur;
            OnlineHnagState {
                x: x_next,
                y: y_next,
                p_cur: p_next,
                p_prev: state.p_cur,
            }
        }
        Delta::Synchronous => {
            let alpha = online_alpha_rule(params.eta, state.p_cur);
            let alpha_tilde = alpha / (1.0 + alpha);
            let x_plus = state.x - alpha * params.beta * grad / state.p_cur;
            let x_next = clamp_unit((x_plus + alpha * state.y) / (1.0 + alpha));
            let shrink = 1.0 - alpha_tilde;
            let disc =
                shrink * shrink * state.p_cur * state.p_cur
                    + 4.0 * alpha_tilde * params.gamma * grad * grad;
            let p_next = 0.5 * (shrink * state.p_cur + disc.sqrt());
            let y_next = clamp_unit(state.y - alpha_tilde * grad / p_next);
            OnlineHnagState {
                x: x_next,
                y: y_next,
                p_cur: p_next,
                p_prev: state.p_cur,
            }
        }
    }
}

/// Cumulative regret point: `R_t = Σ_{s≤t} f_s(x_s) - min_{x∈[-1,1]} Σ_{s≤t} f_s(x)`.
#[derive(Debug, Clone, Copy)]
pub struct RegretPoint {
    pub t: u64,
    pub regret: f64,
    pub avg_regret: f64,
}

/// Exact regret series for played losses. The hindsight minimum of the
/// running linear sum `C_t·x` on `[-1, 1]` sits at an endpoint, so it
/// equals `-|C_t|` with `C_t` the running coefficient sum.
pub fn regret(losses: &[f64], bench: &OnlineBench) -> Vec<RegretPoint> {
    let mut coeff_sum = 0.0;
    let mut loss_sum = 0.0;
    losses
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let t = i as u64 + 1;
            coeff_sum += bench.coefficient(t);
            loss_sum += l;
            let r = loss_sum + coeff_sum.abs();
            RegretPoint {
                t,
                regret: r,
                avg_regret: r / t as f64,
            }
        })
        .collect()
}

/// Per-round record of an online run.
#[derive(Debug, Clone, Copy)]
pub struct OnlineRow {
    pub t: u64,
    pub x: f64,
    pub loss: f64,
    pub regret: f64,
    pub avg_regret: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineTrace {
    pub method: String,
    pub rows: Vec<OnlineRow>,
}

impl OnlineTrace {
    /// Mean played iterate over the trailing fraction of the run.
    pub fn tail_mean_x(&self, fraction: f64) -> f64 {
        let keep = ((self.rows.len() as f64 * fraction).ceil() as usize)
            .clamp(1, self.rows.len());
        let tail = &self.rows[self.rows.len() - keep..];
        tail.iter().map(|r| r.x).sum::<f64>() / tail.len() as f64
    }

    pub fn final_avg_regret(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.avg_regret)
    }

    /// CSV `t,x,loss,R_t,R_t_over_t,method`, emitting every `stride`-th
    /// row (and always the last).
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("t,x,loss,R_t,R_t_over_t,method\n");
        let last = self.rows.len().saturating_sub(1);
        for (i, r) in self.rows.iter().enumerate() {
            if i % stride == 0 || i == last {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.t, r.x, r.loss, r.regret, r.avg_regret, self.method
                );
            }
        }
        out
    }
}

/// Round-varying linear loss `f(x) = c·x`; gradient is `c` everywhere and
/// the smoothness constant is 0 (never consulted by the Adam-type steps).
struct LinearLoss {
    c: f64,
}

impl Objective<f64> for LinearLoss {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector<f64>) -> f64 {
        self.c * x[0]
    }
    fn gradient(&self, _x: &Vector<f64>) -> Vector<f64> {
        Vector::new(vec![self.c])
    }
    fn smoothness(&self) -> f64 {
        0.0
    }
}

/// Runs one method on the bench for its horizon, projecting every iterate
/// to the domain, and records the exact regret along the way.
pub fn run_online(
    method: Method,
    bench: &OnlineBench,
    params: &OnlineParams,
    adam: &AdamParams<f64>,
) -> OnlineTrace {
    let mut rows = Vec::with_capacity(bench.horizon as usize);
    let mut coeff_sum = 0.0;
    let mut loss_sum = 0.0;
    let mut record = |t: u64, x: f64, loss: f64, coeff: f64| {
        coeff_sum += coeff;
        loss_sum += loss;
        let r = loss_sum + coeff_sum.abs();
        rows.push(OnlineRow {
            t,
            x,
            loss,
            regret: r,
            avg_regret: r / t as f64,
        });
    };

    match method {
        Method::Adam | Method::AmsGrad => {
            let amsgrad = method == Method::AmsGrad;
            let mut cfg = OptimizerConfig::new(method);
            cfg.adam = *adam;
            cfg.projection = amsgrad;
            cfg.r = Some(2.0); // feasible box [-1, 1]
            let mut state = AdamState::init(&LinearLoss { c: 0.0 }, Vector::zeros(1), amsgrad);
            for t in 1..=bench.horizon {
                let (val, grad) = bench.loss(t, state.x[0]);
                record(t, state.x[0], val, grad);
                let f_t = LinearLoss { c: grad };
                state = if amsgrad {
                    amsgrad_step(&state, &f_t, &cfg)
                } else {
                    let mut s = adam_step(&state, &f_t, &cfg);
                    s.x = Vector::new(vec![clamp_unit(s.x[0])]);
                    s
                };
            }
        }
        Method::AdamHnag | Method::AdamHnagS => {
            let params = OnlineParams {
                delta: method.delta(),
                ..*params
            };
            let mut state = OnlineHnagState::default();
            for t in 1..=bench.horizon {
                let (val, grad) = bench.loss(t, state.x);
                record(t, state.x, val, grad);
                state = online_step_adam_hnag(&state, grad, &params);
            }
        }
        other => panic!("method {} has no online form", other.name()),
    }
    OnlineTrace {
        method: method.name().to_string(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_table_examples() {
        assert_eq!(reddi_loss(1, 0.5), (505.0, 1010.0));
        assert_eq!(reddi_loss(2, 0.5), (-5.0, -10.0));
        assert_eq!(reddi_loss(102, 1.0), (1010.0, 1010.0));
        assert_eq!(reddi_loss(101, 1.0), (-10.0, -10.0));
    }

    #[test]
    #[should_panic(expected = "1-based")]
    fn loss_rejects_round_zero() {
        reddi_loss(0, 0.0);
    }

    #[test]
    fn bench_invariant_rejects_negative_drift() {
        let r = std::panic::catch_unwind(|| OnlineBench::new(101, 990.0, -10.0, 100));
        assert!(r.is_err());
    }

    #[test]
    fn alpha_rule_ignores_gradient_scale() {
        let p = 4.0;
        assert_eq!(online_alpha_rule(1e-3, p), 2e-3);
        // Two steps from the same state with different gradient sizes move
        // x by amounts proportional to the gradients under the same α.
        let params = OnlineParams::proposed(Delta::Lagged);
        let s = OnlineHnagState {
            x: 0.0,
            y: 0.0,
            p_cur: p,
            p_prev: p,
        };
        let a = online_step_adam_hnag(&s, 1.0, &params);
        let b = online_step_adam_hnag(&s, 2.0, &params);
        assert!((b.x / a.x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_skips_step() {
        let params = OnlineParams::proposed(Delta::Lagged);
        let s = OnlineHnagState {
            x: 0.3,
            y: -0.2,
            p_cur: 2.0,
            p_prev: 1.5,
        };
        let next = online_step_adam_hnag(&s, 0.0, &params);
        assert_eq!(next.x, s.x);
        assert_eq!(next.p_cur, s.p_cur);
    }

    #[test]
    fn regret_of_constant_plays() {
        let bench = OnlineBench::default();
        // x ≡ -1 over one full period is the comparator: zero regret.
        let losses: Vec<f64> = (1..=101).map(|t| bench.loss(t, -1.0).0).collect();
        let series = regret(&losses, &bench);
        assert!(series.last().unwrap().regret.abs() < 1e-9);

        // x ≡ +1 pays the full swing: Σf_s(1) - Σf_s(-1) = 10 - (-10) = 20.
        let losses: Vec<f64> = (1..=101).map(|t| bench.loss(t, 1.0).0).collect();
        let series = regret(&losses, &bench);
        assert!((series.last().unwrap().regret - 20.0).abs() < 1e-9);

        // Single round: R₁ = 1010·x₁ + 1010.
        let x1 = 0.25;
        let series = regret(&[bench.loss(1, x1).0], &bench);
        assert!((series[0].regret - 1010.0 * (x1 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cumulative_coefficient_positive_after_first_period() {
        let bench = OnlineBench::default();
        let mut c = 0.0;
        for t in 1..=1010 {
            c += bench.coefficient(t);
            if t >= 101 {
                assert!(c > 0.0, "running coefficient sum at t={t} is {c}");
            }
        }
    }

    #[test]
    fn iterates_stay_in_domain() {
        let bench = OnlineBench {
            horizon: 2_000,
            ..OnlineBench::default()
        };
        let params = OnlineParams::proposed(Delta::Lagged);
        let adam = AdamParams {
            eta: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            bias_correction: true,
        };
        for method in [Method::Adam, Method::AmsGrad, Method::AdamHnag, Method::AdamHnagS] {
            let trace = run_online(method, &bench, &params, &adam);
            assert!(
                trace.rows.iter().all(|r| (-1.0..=1.0).contains(&r.x)),
                "{} left the domain",
                trace.method
            );
        }
    }

    #[test]
    fn proposed_method_drifts_to_optimum_quickly() {
        let bench = OnlineBench {
            horizon: 20_000,
            ..OnlineBench::default()
        };
        let params = OnlineParams::proposed(Delta::Lagged);
        let adam = AdamParams::default();
        let trace = run_online(Method::AdamHnag, &bench, &params, &adam);
        assert!(trace.tail_mean_x(0.1) < -0.9, "tail mean {}", trace.tail_mean_x(0.1));
    }
}
