//! Box-constrained PSD quadratics with a numerically certified ground truth.
//!
//! The minimizer set of `½xᵀQx + qᵀx` over a box is the intersection of the
//! box with the affine set `ẑ + {v : Qv = 0, gᵀv = 0}` where `ẑ` is any
//! minimizer and `g = Qẑ + q`: at a minimizer the curvature term and the
//! first-order term of `Φ(z) − Φ*` are separately nonnegative over the box,
//! so both must vanish on the solution set. The projector alternates
//! projections onto the box and that affine set (Dykstra), which converges
//! to the exact Euclidean projection for polyhedra.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gaussian_vector, sampled_growth_constant, MatrixData, ProblemDescription};
use crate::model::{
    BoxRegularizer, GroundTruth, ProblemInstance, QuadraticFormComponent, SmoothComponent,
};
use crate::{Error, Result};

const LIPSCHITZ_FLOOR: f64 = 1e-9;
/// Safety shrink applied to the sampled growth constant: a fresh sample set
/// may dip slightly below the recorded infimum.
const ESTIMATE_SHRINK: f64 = 0.75;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxQuadraticDescription {
    pub q: MatrixData,
    pub linear: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_components: usize,
    pub phi_star: f64,
    /// Estimated growth constant (shrunk sample infimum, clamped to `L`).
    pub beta: f64,
    /// Raw sample infimum of `2(Φ(x)−Φ*)/d²(x,X)`.
    pub beta_sample_min: f64,
    /// A minimizer found by the inner solver.
    pub anchor: Vec<f64>,
    /// Orthonormal basis of the solution-face directions
    /// `{v : Qv = 0, gᵀv = 0}`, `d × s`.
    pub face_basis: MatrixData,
}

/// Projected gradient on `½xᵀQx + qᵀx` over the box, run to a prox-gradient
/// mapping residual of `1e-12` relative scale.
fn projected_gradient_solve(
    q: &DMatrix<f64>,
    linear: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    lipschitz: f64,
) -> Result<DVector<f64>> {
    let d = linear.len();
    let clamp = |v: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(d, |i, _| v[i].clamp(lower[i], upper[i]))
    };
    // Start at the projected origin (finite even with unbounded sides).
    let mut z = clamp(&DVector::zeros(d));
    let step = 1.0 / lipschitz;
    for _ in 0..5_000_000usize {
        let g = q * &z + linear;
        let next = clamp(&(&z - &g * step));
        let residual = (&z - &next).norm() / step;
        z = next;
        if residual <= 1e-12 * (1.0 + g.norm()) {
            return Ok(z);
        }
    }
    Err(Error::Generation(
        "inner projected-gradient solve did not reach its residual target".into(),
    ))
}

/// Orthonormal basis of `{v ∈ null(Q) : gᵀv = 0}`.
fn face_basis(q: &DMatrix<f64>, g: &DVector<f64>) -> DMatrix<f64> {
    let d = q.nrows();
    let eigen = q.clone().symmetric_eigen();
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = lambda_max.max(1.0) * d as f64 * f64::EPSILON * 16.0;
    let null_cols: Vec<usize> = (0..d)
        .filter(|&i| eigen.eigenvalues[i] <= cutoff)
        .collect();
    let mut null_basis = DMatrix::zeros(d, null_cols.len());
    for (j, &i) in null_cols.iter().enumerate() {
        null_basis.set_column(j, &eigen.eigenvectors.column(i));
    }
    let s = null_basis.ncols();
    if s == 0 {
        return null_basis;
    }
    let c = null_basis.transpose() * g;
    if c.norm() <= 1e-8 * (1.0 + g.norm()) {
        return null_basis; // first-order term vanishes on the whole null space
    }
    // Basis of c⊥ inside the null space via the Householder reflector that
    // maps c/‖c‖ to e₁: its remaining columns span the complement.
    let chat = &c / c.norm();
    let mut u = chat.clone();
    u[0] += if chat[0] >= 0.0 { 1.0 } else { -1.0 };
    let u = &u / u.norm();
    let reflector = DMatrix::identity(s, s) - &u * u.transpose() * 2.0;
    let sub = reflector.columns(1, s - 1).into_owned();
    &null_basis * sub
}

/// Dykstra's alternating projections onto `box ∩ (anchor + range(basis))`.
fn dykstra_project(
    x: &DVector<f64>,
    anchor: &DVector<f64>,
    basis: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> DVector<f64> {
    let d = x.len();
    let proj_affine = |v: &DVector<f64>| -> DVector<f64> {
        anchor + basis * (basis.transpose() * (v - anchor))
    };
    let clamp = |v: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(d, |i, _| v[i].clamp(lower[i], upper[i]))
    };
    let mut y = x.clone();
    let mut p = DVector::zeros(d);
    let mut r = DVector::zeros(d);
    for _ in 0..200_000usize {
        let ya = proj_affine(&(&y + &p));
        p = &y + &p - &ya;
        let yb = clamp(&(&ya + &r));
        r = &ya + &r - &yb;
        let moved = (&yb - &y).norm();
        y = yb;
        if moved <= 1e-14 * (1.0 + x.norm())
            && (&y - proj_affine(&y)).norm() <= 1e-10 * (1.0 + y.norm())
        {
            break;
        }
    }
    y
}

impl ProblemDescription {
    pub fn box_quadratic(
        q: DMatrix<f64>,
        linear: DVector<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
        n_components: usize,
        seed: u64,
    ) -> Result<Self> {
        let d = linear.len();
        if q.nrows() != d || q.ncols() != d || lower.len() != d || upper.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: q.nrows() });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::Generation("infeasible box: lower exceeds upper".into()));
        }
        let asym = (&q - q.transpose()).norm();
        if asym > 1e-10 * (1.0 + q.norm()) {
            return Err(Error::Generation(format!(
                "quadratic matrix is not symmetric (‖Q−Qᵀ‖ = {asym:e})"
            )));
        }
        let eigen_min = q
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if eigen_min < -1e-10 * (1.0 + q.norm()) {
            return Err(Error::Generation(format!(
                "quadratic matrix is not positive semidefinite (λ_min = {eigen_min:e})"
            )));
        }
        if n_components == 0 {
            return Err(Error::Generation("component count must be at least 1".into()));
        }

        let lipschitz = crate::model::QuadraticFormComponent::new(
            q.clone(),
            linear.clone(),
            LIPSCHITZ_FLOOR,
        )?
        .lipschitz();

        let z_hat = projected_gradient_solve(&q, &linear, &lower, &upper, lipschitz)?;
        let phi_star = 0.5 * (&q * &z_hat).dot(&z_hat) + linear.dot(&z_hat);
        let gradient = &q * &z_hat + &linear;
        let basis = face_basis(&q, &gradient);

        // Sampled growth constant over box-feasible points around the
        // solution set.
        let objective = {
            let q = q.clone();
            let linear = linear.clone();
            let lower = lower.clone();
            let upper = upper.clone();
            move |x: &DVector<f64>| -> f64 {
                let feasible = x
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .all(|(v, (l, u))| *v >= *l && *v <= *u);
                if !feasible {
                    return f64::INFINITY;
                }
                0.5 * (&q * x).dot(x) + linear.dot(x)
            }
        };
        let project = {
            let anchor = z_hat.clone();
            let basis = basis.clone();
            let lower = lower.clone();
            let upper = upper.clone();
            move |x: &DVector<f64>| dykstra_project(x, &anchor, &basis, &lower, &upper)
        };
        let diameter = lower
            .iter()
            .zip(upper.iter())
            .map(|(l, u)| if (u - l).is_finite() { u - l } else { 4.0 })
            .fold(0.0f64, f64::max)
            .max(1.0);
        let radii = [0.05 * diameter, 0.5 * diameter, diameter];
        let mut sample_idx = 0usize;
        let z_anchor = z_hat.clone();
        let lo = lower.clone();
        let hi = upper.clone();
        // Box-clamped clouds around the minimizer plus the raw global cloud
        // the structural validators use (its infeasible draws are vacuous
        // for the growth inequality and get skipped).
        let mut sampler = move |rng: &mut ChaCha8Rng| -> DVector<f64> {
            let mode = sample_idx % 4;
            sample_idx += 1;
            if mode == 3 {
                return gaussian_vector(rng, d) * 5.0;
            }
            let raw = &z_anchor + gaussian_vector(rng, d) * radii[mode];
            DVector::from_fn(d, |i, _| raw[i].clamp(lo[i], hi[i]))
        };
        let (raw_min, _valid) = sampled_growth_constant(
            &objective,
            &project,
            &mut sampler,
            phi_star,
            10_000,
            seed,
        )?;
        let beta = (raw_min * ESTIMATE_SHRINK).min(lipschitz);

        Ok(ProblemDescription::BoxQuadratic(BoxQuadraticDescription {
            q: MatrixData::from_matrix(&q),
            linear: linear.iter().copied().collect(),
            lower: lower.iter().copied().collect(),
            upper: upper.iter().copied().collect(),
            n_components,
            phi_star,
            beta,
            beta_sample_min: raw_min,
            anchor: z_hat.iter().copied().collect(),
            face_basis: MatrixData::from_matrix(&basis),
        }))
    }
}

impl BoxQuadraticDescription {
    pub(crate) fn build(&self) -> Result<ProblemInstance> {
        let q = self.q.to_matrix()?;
        let linear = DVector::from_vec(self.linear.clone());
        let lower = DVector::from_vec(self.lower.clone());
        let upper = DVector::from_vec(self.upper.clone());
        let n = self.n_components;

        let mut components: Vec<Box<dyn crate::model::SmoothComponent>> = Vec::new();
        let share = 1.0 / n as f64;
        for _ in 0..n {
            components.push(Box::new(QuadraticFormComponent::new(
                &q * share,
                &linear * share,
                LIPSCHITZ_FLOOR / n as f64,
            )?));
        }

        let anchor = DVector::from_vec(self.anchor.clone());
        let basis = self.face_basis.to_matrix()?;
        let (plo, phi) = (lower.clone(), upper.clone());
        let projector =
            move |x: &DVector<f64>| dykstra_project(x, &anchor, &basis, &plo, &phi);

        let gt = GroundTruth::estimated(self.phi_star, self.beta, self.beta_sample_min, projector);
        Ok(
            ProblemInstance::new(components, Box::new(BoxRegularizer::new(lower, upper)))?
                .with_ground_truth(gt),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_box_constrained_quadratic;
    use nalgebra::dvector;

    #[test]
    fn interior_minimum_of_identity_quadratic() {
        let q = DMatrix::<f64>::identity(2, 2);
        let p = make_box_constrained_quadratic(
            q,
            DVector::zeros(2),
            dvector![-1.0, -1.0],
            dvector![1.0, 1.0],
            1,
            11,
        )
        .unwrap();
        let gt = p.ground_truth().unwrap();
        assert!(gt.optimal_value().abs() <= 1e-12);
        assert!(gt.beta_is_estimate());
        // Growth ratio is exactly 1 inside the box for ½‖x‖².
        assert!((gt.beta_sample_min().unwrap() - 1.0).abs() <= 1e-9);
        assert!(gt.project(&dvector![0.4, -0.7]).norm() <= 1e-9);
    }

    #[test]
    fn active_face_minimum_with_flat_direction() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = make_box_constrained_quadratic(
            q,
            DVector::zeros(2),
            dvector![1.0, -1.0],
            dvector![2.0, 1.0],
            1,
            13,
        )
        .unwrap();
        let gt = p.ground_truth().unwrap();
        assert!((gt.optimal_value() - 0.5).abs() <= 1e-10);
        // X = {1} × [−1, 1].
        let proj = gt.project(&dvector![0.3, 5.0]);
        assert!((proj - dvector![1.0, 1.0]).norm() <= 1e-8);
        let proj = gt.project(&dvector![1.7, 0.2]);
        assert!((proj - dvector![1.0, 0.2]).norm() <= 1e-8);
    }

    #[test]
    fn linear_objective_on_a_bounded_box() {
        // Φ(x) = x on [0,1]: X = {0}; the sampled growth ratio 2x/x² = 2/x
        // attains its minimum 2 at the upper bound.
        let q = DMatrix::from_row_slice(1, 1, &[0.0]);
        let p = make_box_constrained_quadratic(
            q,
            dvector![1.0],
            dvector![0.0],
            dvector![1.0],
            1,
            17,
        )
        .unwrap();
        let gt = p.ground_truth().unwrap();
        assert!(gt.optimal_value().abs() <= 1e-12);
        let raw = gt.beta_sample_min().unwrap();
        assert!((1.9..=2.3).contains(&raw), "sample min {raw}");
        // Effective constant is clamped to the (floored) Lipschitz constant.
        assert!(gt.qg_constant() <= p.total_lipschitz() * (1.0 + 1e-12));
    }

    #[test]
    fn infeasible_box_is_rejected() {
        let q = DMatrix::<f64>::identity(1, 1);
        assert!(matches!(
            ProblemDescription::box_quadratic(
                q,
                dvector![0.0],
                dvector![1.0],
                dvector![0.0],
                1,
                0,
            ),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn asymmetric_or_indefinite_matrices_are_rejected() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(ProblemDescription::box_quadratic(
            q,
            DVector::zeros(2),
            dvector![-1.0, -1.0],
            dvector![1.0, 1.0],
            1,
            0,
        )
        .is_err());

        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(ProblemDescription::box_quadratic(
            q,
            DVector::zeros(2),
            dvector![-1.0, -1.0],
            dvector![1.0, 1.0],
            1,
            0,
        )
        .is_err());
    }
}
