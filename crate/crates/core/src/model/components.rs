//! Library-provided smooth components.

use nalgebra::{DMatrix, DVector};

use super::SmoothComponent;
use crate::{Error, Result};

/// Largest eigenvalue of `AᵀA`, i.e. `σ_max(A)²`, via singular values.
pub(crate) fn largest_gram_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    sv.iter().fold(0.0f64, |m, &s| m.max(s * s))
}

/// Least-squares block `f(x) = ½‖Ax − b‖²` with the exact Lipschitz constant
/// `λ_max(AᵀA)`.
pub struct QuadraticComponent {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lipschitz: f64,
}

impl QuadraticComponent {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let lipschitz = largest_gram_eigenvalue(&a);
        Ok(QuadraticComponent { a, b, lipschitz })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothComponent for QuadraticComponent {
    fn dimension(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.a * x - &self.b).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (&self.a * x - &self.b)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Quadratic form `f(x) = ½xᵀQx + qᵀx` for symmetric PSD `Q`.
pub struct QuadraticFormComponent {
    q: DMatrix<f64>,
    linear: DVector<f64>,
    lipschitz: f64,
}

impl QuadraticFormComponent {
    /// `lipschitz_floor` guards the degenerate `Q = 0` case: a Lipschitz
    /// constant is an upper bound, so flooring it keeps the component valid.
    pub fn new(q: DMatrix<f64>, linear: DVector<f64>, lipschitz_floor: f64) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::InvalidParameter(format!(
                "quadratic form matrix must be square, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if q.ncols() != linear.len() {
            return Err(Error::DimensionMismatch {
                expected: q.ncols(),
                got: linear.len(),
            });
        }
        let lipschitz = q
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &l| m.max(l))
            .max(lipschitz_floor);
        Ok(QuadraticFormComponent { q, linear, lipschitz })
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }
}

impl SmoothComponent for QuadraticFormComponent {
    fn dimension(&self) -> usize {
        self.q.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.q * x).dot(x) + self.linear.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.linear
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Closure-backed component for user-defined functions; pair with the
/// sampled validators before trusting it in a solver run.
pub struct FnComponent {
    dimension: usize,
    lipschitz: f64,
    value_fn: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    gradient_fn: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
}

impl FnComponent {
    pub fn new(
        dimension: usize,
        lipschitz: f64,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        FnComponent {
            dimension,
            lipschitz,
            value_fn: Box::new(value),
            gradient_fn: Box::new(gradient),
        }
    }
}

impl SmoothComponent for FnComponent {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value_fn)(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient_fn)(x)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}
