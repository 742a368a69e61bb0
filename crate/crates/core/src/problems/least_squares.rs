//! Least-squares instances with exact ground truth.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{contiguous_blocks, gaussian_matrix, gaussian_vector, MatrixData, ProblemDescription};
use crate::model::{GroundTruth, ProblemInstance, QuadraticComponent, ZeroRegularizer};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeastSquaresDescription {
    pub a: MatrixData,
    pub b: Vec<f64>,
    pub n_components: usize,
    pub phi_star: f64,
    /// Smallest nonzero eigenvalue of `AᵀA` (clamped to `Σ L_n` against
    /// rounding at full-rank ties).
    pub beta: f64,
    /// Minimum-norm least-squares solution; the solution set is
    /// `anchor + range(null_basis)`.
    pub anchor: Vec<f64>,
    /// Orthonormal basis of `null(A)`, `d × nullity` (zero columns for a
    /// full-rank matrix).
    pub null_basis: MatrixData,
}

/// Spectral analysis of `AᵀA`: minimum-norm solution, null-space basis, and
/// the smallest nonzero eigenvalue.
struct GramAnalysis {
    x_hat: DVector<f64>,
    null_basis: DMatrix<f64>,
    beta: f64,
    phi_star: f64,
}

fn analyze(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<GramAnalysis> {
    let d = a.ncols();
    let gram = a.transpose() * a;
    let eigen = gram.symmetric_eigen();
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::Generation(
            "zero matrix: the solution set is the whole space and the growth \
             constant is undefined"
                .into(),
        ));
    }
    let cutoff = lambda_max * (a.nrows().max(d) as f64) * f64::EPSILON * 16.0;

    let atb = a.transpose() * b;
    let mut x_hat = DVector::zeros(d);
    let mut beta = f64::INFINITY;
    let mut null_cols: Vec<usize> = Vec::new();
    for (i, &lambda) in eigen.eigenvalues.iter().enumerate() {
        let v = eigen.eigenvectors.column(i);
        if lambda > cutoff {
            beta = beta.min(lambda);
            x_hat += v * (v.dot(&atb) / lambda);
        } else {
            null_cols.push(i);
        }
    }
    let mut null_basis = DMatrix::zeros(d, null_cols.len());
    for (j, &i) in null_cols.iter().enumerate() {
        null_basis.set_column(j, &eigen.eigenvectors.column(i));
    }
    let phi_star = 0.5 * (a * &x_hat - b).norm_squared();
    Ok(GramAnalysis { x_hat, null_basis, beta, phi_star })
}

impl ProblemDescription {
    pub fn least_squares(
        a: DMatrix<f64>,
        b: DVector<f64>,
        n_components: usize,
    ) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        let analysis = analyze(&a, &b)?;

        // Total Lipschitz constant of the block split, for the η ≥ 1 clamp.
        let mut total_l = 0.0;
        for range in contiguous_blocks(a.nrows(), n_components)? {
            let block = a.rows(range.start, range.end - range.start).into_owned();
            total_l += crate::model::largest_gram_eigenvalue(&block);
        }
        let beta = analysis.beta.min(total_l);

        // A rank-deficient matrix must come with a certified flat direction:
        // the objective is constant along any null vector.
        if analysis.null_basis.ncols() > 0 {
            let v = analysis.null_basis.column(0).into_owned();
            for t in [-10.0, -1.0, 1.0, 10.0] {
                let x = &analysis.x_hat + &v * t;
                let phi = 0.5 * (&a * &x - &b).norm_squared();
                if (phi - analysis.phi_star).abs() > 1e-8 * (1.0 + analysis.phi_star.abs()) {
                    return Err(Error::Generation(format!(
                        "null direction is not flat: Φ(x̂+{t}v) deviates by {:e}",
                        phi - analysis.phi_star
                    )));
                }
            }
        }

        Ok(ProblemDescription::LeastSquares(LeastSquaresDescription {
            a: MatrixData::from_matrix(&a),
            b: b.iter().copied().collect(),
            n_components,
            phi_star: analysis.phi_star,
            beta,
            anchor: analysis.x_hat.iter().copied().collect(),
            null_basis: MatrixData::from_matrix(&analysis.null_basis),
        }))
    }
}

impl LeastSquaresDescription {
    pub fn nullity(&self) -> usize {
        self.null_basis.cols
    }

    pub(crate) fn build(&self) -> Result<ProblemInstance> {
        let a = self.a.to_matrix()?;
        let b = DVector::from_vec(self.b.clone());
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        let mut components: Vec<Box<dyn crate::model::SmoothComponent>> = Vec::new();
        for range in contiguous_blocks(a.nrows(), self.n_components)? {
            let len = range.end - range.start;
            let block = a.rows(range.start, len).into_owned();
            let rhs = b.rows(range.start, len).into_owned();
            components.push(Box::new(QuadraticComponent::new(block, rhs)?));
        }

        let anchor = DVector::from_vec(self.anchor.clone());
        let null_basis = self.null_basis.to_matrix()?;
        let projector = move |x: &DVector<f64>| -> DVector<f64> {
            &anchor + &null_basis * (null_basis.transpose() * (x - &anchor))
        };

        let gt = GroundTruth::exact(self.phi_star, self.beta, projector);
        Ok(ProblemInstance::new(components, Box::new(ZeroRegularizer))?.with_ground_truth(gt))
    }
}

/// Shape and spectrum of a random least-squares instance.
#[derive(Debug, Clone)]
pub struct LeastSquaresParams {
    pub dimension: usize,
    pub rows: usize,
    /// Rank of `A`; choose `rank < dimension` for quadratic growth without
    /// strong convexity.
    pub rank: usize,
    pub n_components: usize,
    /// Smallest and largest prescribed singular values.
    pub sv_min: f64,
    pub sv_max: f64,
    /// Consistent systems (`b ∈ range(A)`) have `Φ* ≈ 0`.
    pub consistent: bool,
}

pub(crate) fn random_description(
    params: &LeastSquaresParams,
    seed: u64,
) -> Result<ProblemDescription> {
    let LeastSquaresParams { dimension: d, rows: m, rank, .. } = *params;
    if rank == 0 || rank > m.min(d) {
        return Err(Error::Generation(format!(
            "rank {rank} is not in 1..=min({m}, {d})"
        )));
    }
    if !(params.sv_min > 0.0 && params.sv_max >= params.sv_min) {
        return Err(Error::Generation(format!(
            "need 0 < sv_min ≤ sv_max, got [{}, {}]",
            params.sv_min, params.sv_max
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let u = gaussian_matrix(&mut rng, m, rank).qr().q();
    let v = gaussian_matrix(&mut rng, d, rank).qr().q();
    let singular: Vec<f64> = (0..rank)
        .map(|i| {
            if rank == 1 {
                params.sv_max
            } else {
                let t = i as f64 / (rank - 1) as f64;
                params.sv_max * (params.sv_min / params.sv_max).powf(t)
            }
        })
        .collect();
    let mut a = DMatrix::zeros(m, d);
    for (i, &s) in singular.iter().enumerate() {
        a += u.column(i) * v.column(i).transpose() * s;
    }

    let x_true = gaussian_vector(&mut rng, d);
    let mut b = &a * &x_true;
    if !params.consistent {
        b += gaussian_vector(&mut rng, m) * 0.5;
    }

    ProblemDescription::least_squares(a, b, params.n_components)
}
