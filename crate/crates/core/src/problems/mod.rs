//! Synthetic problem generators with ground truth.
//!
//! Three families:
//!
//! * [`make_least_squares`] — `½‖Ax−b‖²` split into row blocks, `h = 0`.
//!   Ground truth is exact: the solution set is an affine subspace
//!   `x̂ + null(A)`, the projector uses an orthonormal null-space basis, and
//!   the quadratic-growth constant is the smallest nonzero eigenvalue of
//!   `AᵀA`. A rank-deficient `A` yields quadratic growth *without* strong
//!   convexity.
//! * [`make_box_constrained_quadratic`] — PSD quadratic over a box. Ground
//!   truth comes from a high-accuracy projected-gradient solve; the solution
//!   face is identified exactly from the optimality structure and the
//!   quadratic-growth constant is estimated from samples (flagged as an
//!   estimate).
//! * [`make_lasso`] — least-squares blocks plus `λ‖·‖₁`. Ground truth from a
//!   high-accuracy forward-backward fixed point; sampled growth constant,
//!   flagged as an estimate.
//!
//! Every generated instance passes the sampled structural validators before
//! it is returned. Instances round-trip through [`ProblemDescription`], a
//! JSON-serializable document with dense row-major matrices and the
//! ground-truth metadata needed for replay.

mod box_quadratic;
mod lasso;
mod least_squares;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::model::validate::{validate_instance, ValidationConfig};
use crate::model::ProblemInstance;
use crate::{Error, Result};

pub use box_quadratic::BoxQuadraticDescription;
pub use lasso::LassoDescription;
pub use least_squares::{LeastSquaresDescription, LeastSquaresParams};

/// Dense matrix in row-major order for serialization.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixData {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixData { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Generation(format!(
                "matrix payload has {} entries for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Self-contained, JSON-serializable description of a generated instance:
/// problem data plus the ground-truth metadata needed to rebuild the
/// projector without re-solving.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemDescription {
    LeastSquares(LeastSquaresDescription),
    BoxQuadratic(BoxQuadraticDescription),
    Lasso(LassoDescription),
}

impl ProblemDescription {
    /// Rebuild the instance and run the sampled structural validators.
    pub fn instantiate(&self, seed: u64) -> Result<ProblemInstance> {
        let instance = match self {
            ProblemDescription::LeastSquares(d) => d.build()?,
            ProblemDescription::BoxQuadratic(d) => d.build()?,
            ProblemDescription::Lasso(d) => d.build()?,
        };
        let cfg = ValidationConfig { seed, ..ValidationConfig::default() };
        validate_instance(&instance, &cfg)?;
        // η ≥ 1 for every instance that leaves the generator.
        if let Some(gt) = instance.ground_truth() {
            debug_assert!(gt.qg_constant() <= instance.total_lipschitz() * (1.0 + 1e-12));
        }
        Ok(instance)
    }
}

/// Least-squares composite: rows of `A` split into `n_components` contiguous
/// nonempty blocks, `h = 0`, exact ground truth.
pub fn make_least_squares(
    a: DMatrix<f64>,
    b: DVector<f64>,
    n_components: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    ProblemDescription::least_squares(a, b, n_components)?.instantiate(seed)
}

/// PSD quadratic over a box, `Q` split evenly across components, ground
/// truth from a high-accuracy inner solve, estimated growth constant.
pub fn make_box_constrained_quadratic(
    q: DMatrix<f64>,
    linear: DVector<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    n_components: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    ProblemDescription::box_quadratic(q, linear, lower, upper, n_components, seed)?
        .instantiate(seed)
}

/// ℓ1-regularized least squares, ground truth from a high-accuracy
/// forward-backward fixed point, estimated growth constant.
pub fn make_lasso(
    a: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    n_components: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    ProblemDescription::lasso(a, b, lambda, n_components, seed)?.instantiate(seed)
}

/// Seeded random rank-controlled least-squares instance.
pub fn random_least_squares(params: &LeastSquaresParams, seed: u64) -> Result<ProblemInstance> {
    random_least_squares_description(params, seed)?.instantiate(seed)
}

/// Description form of [`random_least_squares`] (for serialization).
pub fn random_least_squares_description(
    params: &LeastSquaresParams,
    seed: u64,
) -> Result<ProblemDescription> {
    least_squares::random_description(params, seed)
}

pub(crate) fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Contiguous nonempty row blocks, sizes as equal as possible.
pub(crate) fn contiguous_blocks(rows: usize, n: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if n == 0 {
        return Err(Error::Generation("component count must be at least 1".into()));
    }
    if n > rows {
        return Err(Error::Generation(format!(
            "cannot split {rows} rows into {n} nonempty blocks"
        )));
    }
    let base = rows / n;
    let extra = rows % n;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        let len = base + usize::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    Ok(out)
}

/// Sampled infimum of `2(Φ(x)−Φ*)/d²(x,X)`. Returns `(raw_min, n_valid)`;
/// samples outside the effective domain or sitting on the solution set do
/// not count.
pub(crate) fn sampled_growth_constant(
    objective: &dyn Fn(&DVector<f64>) -> f64,
    project: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    sample: &mut dyn FnMut(&mut ChaCha8Rng) -> DVector<f64>,
    phi_star: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbe7a_e571);
    let mut raw_min = f64::INFINITY;
    let mut valid = 0usize;
    for _ in 0..samples {
        let x = sample(&mut rng);
        let phi = objective(&x);
        if !phi.is_finite() {
            continue;
        }
        let dist_sq = (&x - project(&x)).norm_squared();
        if dist_sq <= 1e-18 * (1.0 + x.norm_squared()) {
            continue;
        }
        let gap = (phi - phi_star).max(0.0);
        raw_min = raw_min.min(2.0 * gap / dist_sq);
        valid += 1;
    }
    if valid == 0 || !raw_min.is_finite() || raw_min <= 0.0 {
        return Err(Error::Generation(
            "growth-constant estimation found no informative samples".into(),
        ));
    }
    Ok((raw_min, valid))
}

use rand::SeedableRng;
