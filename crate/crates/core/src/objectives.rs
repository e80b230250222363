//! Differentiable convex objectives: binary logistic regression and diagonal
//! quadratics, plus the Bregman-divergence utilities used by the analysis.

use std::sync::OnceLock;

use thiserror::Error;

use crate::datasets::Dataset;
use crate::numkit::{DenseMatrix, Vector};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("power iteration did not converge within {0} iterations")]
    PowerIterationStalled(usize),
}

/// Known (or pre-solved) optimum of an objective. `f_star` is always
/// present; `x_star` may be missing when only the optimal value is known.
#[derive(Debug, Clone)]
pub struct OptimumInfo<T> {
    pub x_star: Option<Vector<T>>,
    pub f_star: T,
}

/// Differentiable convex function with a known smoothness constant.
pub trait Objective<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector<T>) -> T;

    fn gradient(&self, x: &Vector<T>) -> Vector<T>;

    /// Lipschitz constant of the gradient in the Euclidean norm.
    fn smoothness(&self) -> T;

    fn optimum_hint(&self) -> Option<OptimumInfo<T>> {
        None
    }
}

/// Bregman divergence `D_f(y, x) = f(y) - f(x) - ⟨∇f(x), y - x⟩`;
/// nonnegative for convex `f`.
pub fn bregman<T: Scalar, F: Objective<T> + ?Sized>(f: &F, y: &Vector<T>, x: &Vector<T>) -> T {
    assert_eq!(y.len(), x.len(), "bregman dimension mismatch");
    f.value(y) - f.value(x) - f.gradient(x).dot(&y.sub(x))
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Binary cross-entropy logistic regression
/// `f(w,b) = -(1/n) Σ [yᵢ log σ(zᵢ) + (1-yᵢ) log(1-σ(zᵢ))]`, `zᵢ = xᵢᵀw + b`.
///
/// The per-sample loss is evaluated in the overflow-free form
/// `max(z,0) - y·z + log1p(exp(-|z|))`. The optional bias is one extra
/// trailing coordinate of the parameter vector (a ones column of the
/// augmented design matrix); it is not treated specially anywhere.
pub struct LogisticProblem<T> {
    x: DenseMatrix<T>,
    y: Vec<T>,
    fit_bias: bool,
    smoothness: OnceLock<T>,
    optimum: OnceLock<OptimumInfo<T>>,
}

impl<T: Scalar> LogisticProblem<T> {
    pub fn new(x: DenseMatrix<T>, y: Vec<T>, fit_bias: bool) -> Self {
        assert!(x.nrows() >= 1 && x.ncols() >= 1, "empty design matrix");
        assert_eq!(x.nrows(), y.len(), "label count mismatch");
        assert!(
            y.iter().all(|&l| l == T::zero() || l == T::one()),
            "labels must be 0/1"
        );
        LogisticProblem {
            x,
            y,
            fit_bias,
            smoothness: OnceLock::new(),
            optimum: OnceLock::new(),
        }
    }

    pub fn from_dataset(ds: &Dataset, fit_bias: bool) -> Self {
        let x = DenseMatrix::map_from_f64(&ds.x);
        let y = ds.y.iter().map(|&l| T::of(l as f64)).collect();
        Self::new(x, y, fit_bias)
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn fit_bias(&self) -> bool {
        self.fit_bias
    }

    /// Caches a pre-solved optimum so later [`Objective::optimum_hint`]
    /// calls can return it. First call wins.
    pub fn set_optimum_hint(&self, info: OptimumInfo<T>) {
        let _ = self.optimum.set(info);
    }

    fn margins(&self, w_b: &Vector<T>) -> Vec<T> {
        let d = self.x.ncols();
        let expect = d + usize::from(self.fit_bias);
        assert_eq!(w_b.len(), expect, "parameter dimension mismatch");
        let w = &w_b.as_slice()[..d];
        let b = if self.fit_bias {
            w_b.as_slice()[d]
        } else {
            T::zero()
        };
        self.x.matvec(w).into_iter().map(|z| z + b).collect()
    }

    /// `L = λ_max(X̃ᵀX̃)/(4n)` where `X̃` is the bias-augmented design,
    /// from the `σ' ≤ 1/4` bound. Power iteration to 1e-8 relative.
    pub fn compute_smoothness(&self) -> Result<T, ObjectiveError> {
        let n = self.x.nrows();
        let d = self.x.ncols() + usize::from(self.fit_bias);
        let matvec = |v: &[T]| -> Vec<T> {
            // X̃ᵀ(X̃ v) without materializing the ones column.
            let xv = {
                let base = self.x.matvec(&v[..self.x.ncols()]);
                if self.fit_bias {
                    let b = v[self.x.ncols()];
                    base.into_iter().map(|z| z + b).collect()
                } else {
                    base
                }
            };
            let mut out = self.x.t_matvec(&xv);
            if self.fit_bias {
                out.push(xv.iter().copied().sum());
            }
            out
        };
        let lam = power_iteration(&matvec, d, T::of(1e-8), 10_000)?;
        Ok(lam / (T::of(4.0) * T::of(n as f64)))
    }
}

impl<T: Scalar> Objective<T> for LogisticProblem<T> {
    fn dim(&self) -> usize {
        self.x.ncols() + usize::from(self.fit_bias)
    }

    fn value(&self, w_b: &Vector<T>) -> T {
        let n = T::of(self.x.nrows() as f64);
        let total: T = self
            .margins(w_b)
            .into_iter()
            .zip(&self.y)
            .map(|(z, &y)| z.max(T::zero()) - y * z + (-z.abs()).exp().ln_1p())
            .sum();
        total / n
    }

    fn gradient(&self, w_b: &Vector<T>) -> Vector<T> {
        let n = T::of(self.x.nrows() as f64);
        let residual: Vec<T> = self
            .margins(w_b)
            .into_iter()
            .zip(&self.y)
            .map(|(z, &y)| (sigmoid(z) - y) / n)
            .collect();
        let mut g = self.x.t_matvec(&residual);
        if self.fit_bias {
            g.push(residual.into_iter().sum());
        }
        Vector::new(g)
    }

    fn smoothness(&self) -> T {
        *self.smoothness.get_or_init(|| {
            self.compute_smoothness()
                .expect("degenerate design matrix: smoothness estimation stalled")
        })
    }

    fn optimum_hint(&self) -> Option<OptimumInfo<T>> {
        self.optimum.get().cloned()
    }
}

/// Separable quadratic `f(x) = ½ Σ aᵢ (xᵢ - bᵢ)²` with `aᵢ > 0`.
/// Analytic optimum `x⋆ = b`, `f⋆ = 0`, `L = max aᵢ`.
pub struct QuadraticProblem<T> {
    a: Vec<T>,
    b: Vector<T>,
}

impl<T: Scalar> QuadraticProblem<T> {
    pub fn new(a: Vec<T>, b: Vector<T>) -> Self {
        assert_eq!(a.len(), b.len(), "curvature/shift dimension mismatch");
        assert!(!a.is_empty(), "empty quadratic");
        assert!(a.iter().all(|&c| c > T::zero()), "curvatures must be > 0");
        QuadraticProblem { a, b }
    }

    /// `½‖x‖²` in the given dimension.
    pub fn isotropic(dim: usize) -> Self {
        Self::new(vec![T::one(); dim], Vector::zeros(dim))
    }
}

impl<T: Scalar> Objective<T> for QuadraticProblem<T> {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, x: &Vector<T>) -> T {
        assert_eq!(x.len(), self.a.len(), "parameter dimension mismatch");
        let half = T::of(0.5);
        x.iter()
            .zip(&self.a)
            .zip(self.b.iter())
            .map(|((&xi, &ai), &bi)| {
                let d = xi - bi;
                half * ai * d * d
            })
            .sum()
    }

    fn gradient(&self, x: &Vector<T>) -> Vector<T> {
        assert_eq!(x.len(), self.a.len(), "parameter dimension mismatch");
        Vector::new(
            x.iter()
                .zip(&self.a)
                .zip(self.b.iter())
                .map(|((&xi, &ai), &bi)| ai * (xi - bi))
                .collect(),
        )
    }

    fn smoothness(&self) -> T {
        self.a.iter().fold(T::zero(), |m, &c| m.max(c))
    }

    fn optimum_hint(&self) -> Option<OptimumInfo<T>> {
        Some(OptimumInfo {
            x_star: Some(self.b.clone()),
            f_star: T::zero(),
        })
    }
}

/// Largest eigenvalue of a symmetric positive-semidefinite operator given
/// through its matvec, by power iteration with a Rayleigh-quotient stopping
/// rule: `|λ_new - λ_old| ≤ tol·λ_new`.
pub fn power_iteration<T: Scalar>(
    matvec: &dyn Fn(&[T]) -> Vec<T>,
    dim: usize,
    tol: T,
    max_iters: usize,
) -> Result<T, ObjectiveError> {
    let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let mut v = vec![T::one() / T::of(dim as f64).sqrt(); dim];
    let mut lam_old = T::zero();
    for it in 0..max_iters {
        let av = matvec(&v);
        let av_norm = norm(&av);
        if av_norm == T::zero() {
            return Ok(T::zero());
        }
        // Rayleigh quotient with the normalized iterate.
        let lam = v.iter().zip(&av).map(|(&a, &b)| a * b).sum::<T>();
        for (vi, avi) in v.iter_mut().zip(&av) {
            *vi = *avi / av_norm;
        }
        if it > 0 && (lam - lam_old).abs() <= tol * lam.abs() {
            return Ok(lam);
        }
        lam_old = lam;
    }
    Err(ObjectiveError::PowerIterationStalled(max_iters))
}
