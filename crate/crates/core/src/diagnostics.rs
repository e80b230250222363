//! Lyapunov values, consistency ratios, contraction bounds, empirical rate
//! fitting, and the scalar recursions that model the preconditioner decay.

use std::fmt::Write as _;

use thiserror::Error;

use crate::numkit::{DiagPrecond, Vector};
use crate::objectives::{Objective, OptimumInfo};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("Lyapunov value needs optimum info with x_star")]
    MissingOptimum,
    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("rate fit needs positive values")]
    NonPositiveValue,
}

/// Lyapunov value `ℰ(z⁺, P) = f(x⁺) - f⋆ + ½‖y - x⋆‖²_P`.
pub fn lyapunov<T: Scalar, F: Objective<T> + ?Sized>(
    x_plus: &Vector<T>,
    y: &Vector<T>,
    p: &DiagPrecond<T>,
    f: &F,
    opt: &OptimumInfo<T>,
) -> Result<T, DiagnosticsError> {
    let x_star = opt.x_star.as_ref().ok_or(DiagnosticsError::MissingOptimum)?;
    let dist = y.sub(x_star);
    Ok(f.value(x_plus) - opt.f_star + T::of(0.5) * p.weighted_sq_norm(&dist))
}

/// Running contraction factors `ρ_k = Π_{j≤k} (1+α_j)⁻¹`, accumulated in
/// log space.
pub fn contraction_bound(alphas: &[f64]) -> Vec<f64> {
    let mut log_rho = 0.0;
    alphas
        .iter()
        .map(|&a| {
            assert!(a > 0.0, "contraction bound needs positive alphas");
            log_rho -= a.ln_1p();
            log_rho.exp()
        })
        .collect()
}

/// Least-squares slope of `log(value)` against `log(k)` over the trailing
/// `tail_fraction` of the points.
pub fn rate_fit(series: &[(f64, f64)], tail_fraction: f64) -> Result<f64, DiagnosticsError> {
    assert!(
        tail_fraction > 0.0 && tail_fraction <= 1.0,
        "tail fraction must be in (0, 1]"
    );
    let keep = ((series.len() as f64 * tail_fraction).ceil() as usize).min(series.len());
    let tail = &series[series.len() - keep..];
    if tail.len() < 3 {
        return Err(DiagnosticsError::TooFewPoints(tail.len()));
    }
    if tail.iter().any(|&(k, v)| k <= 0.0 || v <= 0.0) {
        return Err(DiagnosticsError::NonPositiveValue);
    }
    let logs: Vec<(f64, f64)> = tail.iter().map(|&(k, v)| (k.ln(), v.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// One row of the scalar preconditioner recursions.
#[derive(Debug, Clone, Copy)]
pub struct RecursionRow {
    pub k: usize,
    pub p: f64,
    pub alpha: f64,
    pub rho: f64,
}

/// Unforced scalar recursion `p_{k+1} = p_k / (1 + α_k)` with
/// `α_k = √(p_k / (2L))`. Recovers the `k⁻²` accelerated profile.
pub fn unforced_recursion(p0: f64, l: f64, steps: usize) -> Vec<RecursionRow> {
    assert!(l > 0.0, "smoothness must be > 0");
    assert!(p0 >= 0.0, "p0 must be >= 0");
    let mut rows = Vec::with_capacity(steps + 1);
    let mut p = p0;
    let mut log_rho = 0.0;
    for k in 0..=steps {
        let alpha = (p / (2.0 * l)).sqrt();
        log_rho -= alpha.ln_1p();
        rows.push(RecursionRow {
            k,
            p,
            alpha,
            rho: log_rho.exp(),
        });
        p /= 1.0 + alpha;
    }
    rows
}

/// Forced scalar recursion `p_{k+1}(1+α_k) = p_k + g²/(2L)` with constant
/// squared forcing `g²`; its fixed point is `p = (2L)^{-1/3} |g|^{4/3}`.
pub fn forced_recursion(p0: f64, l: f64, g_sq: f64, steps: usize) -> Vec<RecursionRow> {
    assert!(l > 0.0, "smoothness must be > 0");
    assert!(p0 >= 0.0 && g_sq >= 0.0, "p0 and g² must be >= 0");
    let mut rows = Vec::with_capacity(steps + 1);
    let mut p = p0;
    let mut log_rho = 0.0;
    for k in 0..=steps {
        let alpha = (p / (2.0 * l)).sqrt();
        log_rho -= alpha.ln_1p();
        rows.push(RecursionRow {
            k,
            p,
            alpha,
            rho: log_rho.exp(),
        });
        p = (p + g_sq / (2.0 * l)) / (1.0 + alpha);
    }
    rows
}

/// Tail classification of the dissipation/forcing balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailRegime {
    /// Forcing negligible: ratio grows without bound (or is infinite).
    Unforced,
    /// Quasi-steady balance: ratio near 1.
    Forced,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct BalanceReport {
    /// Per-step `α_k p_k / (g_k²/(2L))`; `inf` where the forcing is zero.
    pub ratios: Vec<f64>,
    pub tail_median: f64,
    pub classification: TailRegime,
}

/// Compares dissipation `α_k p_k` against forcing `g_k²/(2L)` along a run.
/// `p_means` is the collapsed (mean-diagonal) preconditioner and `grad_sq`
/// the collapsed squared gradient per step. Descriptive only.
pub fn forced_balance_check(
    alphas: &[f64],
    p_means: &[f64],
    grad_sq: &[f64],
    l: f64,
) -> BalanceReport {
    assert_eq!(alphas.len(), p_means.len());
    assert_eq!(alphas.len(), grad_sq.len());
    let ratios: Vec<f64> = alphas
        .iter()
        .zip(p_means)
        .zip(grad_sq)
        .map(|((&a, &p), &g2)| {
            let forcing = g2 / (2.0 * l);
            if forcing == 0.0 {
                f64::INFINITY
            } else {
                a * p / forcing
            }
        })
        .collect();
    let tail_start = ratios.len().saturating_sub((ratios.len() / 10).max(1));
    let mut tail: Vec<f64> = ratios[tail_start..].to_vec();
    tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail_median = if tail.is_empty() {
        f64::INFINITY
    } else {
        tail[tail.len() / 2]
    };
    let classification = if tail_median.is_infinite() || tail_median > 100.0 {
        TailRegime::Unforced
    } else if (0.5..=2.0).contains(&tail_median) {
        TailRegime::Forced
    } else {
        TailRegime::Mixed
    };
    BalanceReport {
        ratios,
        tail_median,
        classification,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceFlags {
    pub ratio_violated: bool,
    pub projected: bool,
    pub diverged: bool,
}

impl TraceFlags {
    fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.ratio_violated {
            parts.push("ratio_violated");
        }
        if self.projected {
            parts.push("projected");
        }
        if self.diverged {
            parts.push("diverged");
        }
        parts.join("|")
    }
}

/// Per-iteration diagnostic record. `ratio` belongs to the transition that
/// produced this row (`NaN` on the initial row and for methods without a
/// consistency condition); `f_gap` is relative to the trace's `f_star`
/// when one is known, otherwise it holds the raw objective value.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: usize,
    pub f_gap: f64,
    pub lyapunov: f64,
    pub alpha: f64,
    pub eta: f64,
    pub ratio: f64,
    pub grad_norm: f64,
    pub y_inf_dist: Option<f64>,
    /// Mean preconditioner diagonal; kept in memory for the balance
    /// diagnostic, not exported to CSV.
    pub p_mean: f64,
    pub flags: TraceFlags,
}

/// Complete run record.
#[derive(Debug, Clone)]
pub struct Trace {
    pub method: String,
    pub rows: Vec<TraceRow>,
    pub f_star: Option<f64>,
    pub diverged: bool,
}

impl Trace {
    pub fn new(method: impl Into<String>, f_star: Option<f64>) -> Self {
        Trace {
            method: method.into(),
            rows: Vec::new(),
            f_star,
            diverged: false,
        }
    }

    pub fn final_f_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.f_gap)
    }

    /// First step index whose recorded ratio is at least 1.
    pub fn first_ratio_crossing(&self) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| !r.ratio.is_nan() && r.ratio >= 1.0)
            .map(|r| r.k)
    }

    /// CSV rendering with the pinned header. Missing values are empty
    /// fields; floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,f_gap,lyapunov,alpha,eta,ratio,grad_norm,y_inf_dist,flags\n");
        let fmt = |v: f64| {
            if v.is_nan() {
                String::new()
            } else {
                format!("{v}")
            }
        };
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.k,
                fmt(r.f_gap),
                fmt(r.lyapunov),
                fmt(r.alpha),
                fmt(r.eta),
                fmt(r.ratio),
                fmt(r.grad_norm),
                r.y_inf_dist.map(fmt).unwrap_or_default(),
                r.flags.render()
            );
        }
        out
    }
}

/// Result of auditing a trace against the one-step and cumulative
/// contraction bounds.
#[derive(Debug, Clone)]
pub struct ContractionAudit {
    /// Transitions whose recorded ratio was at least 1.
    pub steps_consistent: usize,
    /// Step indices where the ratio held but one-step contraction failed.
    pub per_step_violations: Vec<usize>,
    /// Whether every recorded ratio was at least 1.
    pub all_ratios_consistent: bool,
    /// Whether `ℰ_k ≤ ℰ_0 ρ_{k-1} (1 + slack)` held for every k.
    pub cumulative_ok: bool,
    pub max_cumulative_excess: f64,
}

/// Audits the recorded Lyapunov sequence. Each transition with
/// `ratio ≥ 1` must contract: `ℰ_{k+1} ≤ ℰ_k/(1+α_k)·(1+rel_slack)`;
/// the cumulative product bound is checked with `cumulative_slack`.
pub fn audit_contraction(
    rows: &[TraceRow],
    rel_slack: f64,
    cumulative_slack: f64,
) -> ContractionAudit {
    let mut per_step_violations = Vec::new();
    let mut steps_consistent = 0;
    let mut all_ratios_consistent = true;
    for w in rows.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        if next.ratio.is_nan() || next.ratio < 1.0 {
            all_ratios_consistent = false;
            continue;
        }
        steps_consistent += 1;
        let bound = prev.lyapunov / (1.0 + prev.alpha) * (1.0 + rel_slack);
        if next.lyapunov > bound {
            per_step_violations.push(next.k);
        }
    }
    let mut cumulative_ok = true;
    let mut max_cumulative_excess = 0.0f64;
    if let Some(first) = rows.first() {
        let e0 = first.lyapunov;
        let mut log_rho = 0.0;
        for w in rows.windows(2) {
            log_rho -= w[0].alpha.ln_1p();
            let bound = e0 * log_rho.exp();
            let excess = w[1].lyapunov / bound - 1.0;
            max_cumulative_excess = max_cumulative_excess.max(excess);
            if w[1].lyapunov > bound * (1.0 + cumulative_slack) {
                cumulative_ok = false;
            }
        }
    }
    ContractionAudit {
        steps_consistent,
        per_step_violations,
        all_ratios_consistent,
        cumulative_ok,
        max_cumulative_excess,
    }
}
