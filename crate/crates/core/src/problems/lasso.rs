//! ℓ1-regularized least squares with a fixed-point ground truth.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{contiguous_blocks, gaussian_vector, sampled_growth_constant, MatrixData, ProblemDescription};
use crate::model::{GroundTruth, L1Regularizer, ProblemInstance, QuadraticComponent};
use crate::{Error, Result};

/// A fresh validator sample set can dip below a recorded sample infimum;
/// the shrink keeps the stored constant conservative.
const ESTIMATE_SHRINK: f64 = 0.75;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoDescription {
    pub a: MatrixData,
    pub b: Vec<f64>,
    pub lambda: f64,
    pub n_components: usize,
    pub phi_star: f64,
    /// Estimated growth constant (shrunk sample infimum, clamped to `L`).
    pub beta: f64,
    /// Raw sample infimum of `2(Φ(x)−Φ*)/d²(x,X)`.
    pub beta_sample_min: f64,
    /// High-accuracy fixed point; the solution set is treated as this
    /// singleton (generic instances have a unique minimizer).
    pub minimizer: Vec<f64>,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Forward-backward iteration run to a `1e-12`-scale fixed-point residual.
fn fbs_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lambda: f64,
    lipschitz: f64,
) -> Result<DVector<f64>> {
    let d = a.ncols();
    let step = 1.0 / lipschitz;
    let mut x = DVector::zeros(d);
    for _ in 0..5_000_000usize {
        let g = a.transpose() * (a * &x - b);
        let forward = &x - &g * step;
        let next = DVector::from_fn(d, |i, _| soft_threshold(forward[i], step * lambda));
        let residual = (&next - &x).norm() / step;
        x = next;
        if residual <= 1e-12 * (1.0 + g.norm()) {
            return Ok(x);
        }
    }
    Err(Error::Generation(
        "fixed-point solve did not reach its residual target".into(),
    ))
}

impl ProblemDescription {
    pub fn lasso(
        a: DMatrix<f64>,
        b: DVector<f64>,
        lambda: f64,
        n_components: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lasso weight must be positive, got {lambda}"
            )));
        }
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        let d = a.ncols();

        let mut total_l = 0.0;
        for range in contiguous_blocks(a.nrows(), n_components)? {
            let block = a.rows(range.start, range.end - range.start).into_owned();
            total_l += crate::model::largest_gram_eigenvalue(&block);
        }
        if total_l <= 0.0 {
            return Err(Error::Generation("zero design matrix".into()));
        }

        let x_hat = fbs_solve(&a, &b, lambda, total_l)?;
        let phi_star = 0.5 * (&a * &x_hat - &b).norm_squared()
            + lambda * x_hat.iter().map(|v| v.abs()).sum::<f64>();

        let objective = {
            let a = a.clone();
            let b = b.clone();
            move |x: &DVector<f64>| -> f64 {
                0.5 * (&a * x - &b).norm_squared()
                    + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
            }
        };
        let minimizer = x_hat.clone();
        let project = move |_x: &DVector<f64>| minimizer.clone();
        let scale = x_hat.norm().max(1.0);
        let anchor = x_hat.clone();
        let mut idx = 0usize;
        // Mix local clouds around the minimizer with the global cloud the
        // structural validators draw from, so the recorded infimum covers
        // the region those validators will probe.
        let mut sampler = move |rng: &mut ChaCha8Rng| -> DVector<f64> {
            let mode = idx % 4;
            idx += 1;
            match mode {
                0 => &anchor + gaussian_vector(rng, d) * (0.05 * scale),
                1 => &anchor + gaussian_vector(rng, d) * (0.5 * scale),
                2 => &anchor + gaussian_vector(rng, d) * (2.0 * scale),
                _ => gaussian_vector(rng, d) * 5.0,
            }
        };
        let (raw_min, _valid) =
            sampled_growth_constant(&objective, &project, &mut sampler, phi_star, 10_000, seed)?;
        let beta = (raw_min * ESTIMATE_SHRINK).min(total_l);

        Ok(ProblemDescription::Lasso(LassoDescription {
            a: MatrixData::from_matrix(&a),
            b: b.iter().copied().collect(),
            lambda,
            n_components,
            phi_star,
            beta,
            beta_sample_min: raw_min,
            minimizer: x_hat.iter().copied().collect(),
        }))
    }
}

impl LassoDescription {
    pub(crate) fn build(&self) -> Result<ProblemInstance> {
        let a = self.a.to_matrix()?;
        let b = DVector::from_vec(self.b.clone());
        let mut components: Vec<Box<dyn crate::model::SmoothComponent>> = Vec::new();
        for range in contiguous_blocks(a.nrows(), self.n_components)? {
            let len = range.end - range.start;
            components.push(Box::new(QuadraticComponent::new(
                a.rows(range.start, len).into_owned(),
                b.rows(range.start, len).into_owned(),
            )?));
        }
        let minimizer = DVector::from_vec(self.minimizer.clone());
        let projector = move |_x: &DVector<f64>| minimizer.clone();
        let gt = GroundTruth::estimated(self.phi_star, self.beta, self.beta_sample_min, projector);
        Ok(
            ProblemInstance::new(components, Box::new(L1Regularizer::new(self.lambda)))?
                .with_ground_truth(gt),
        )
    }
}
