//! Composite problem model: `Φ(x) = Σ_n f_n(x) + h(x)`.
//!
//! Smooth components and regularizers are closed evaluation interfaces;
//! the library ships quadratic components, the ℓ1 norm, box indicators and
//! the zero regularizer, and user-defined instances can be checked against
//! the structural assumptions with the sampled validators in [`validate`].
//!
//! Extended reals are represented with `f64::INFINITY`; indicator
//! regularizers return `+∞` outside their effective domain and arithmetic
//! propagates it through the objective.

mod components;
mod regularizers;
pub mod validate;

pub use components::{FnComponent, QuadraticComponent, QuadraticFormComponent};
pub(crate) use components::largest_gram_eigenvalue;
pub use regularizers::{BoxRegularizer, L1Regularizer, ZeroRegularizer};

use nalgebra::DVector;

use crate::{Error, Result};

/// A convex differentiable summand `f_n` with an `L_n`-Lipschitz gradient.
pub trait SmoothComponent: Send + Sync {
    fn dimension(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Gradient Lipschitz constant `L_n` (any valid upper bound, > 0).
    fn lipschitz(&self) -> f64;
}

/// The nonsmooth term `h`: proper, closed, convex, prox-capable.
pub trait Regularizer: Send + Sync {
    /// May return `+∞` outside the effective domain.
    fn value(&self, x: &DVector<f64>) -> f64;
    /// `argmin_x { h(x) + ‖x−y‖²/(2α) }` for `α > 0`.
    fn prox(&self, alpha: f64, y: &DVector<f64>) -> DVector<f64>;
}

/// Ground-truth metadata: the optimal value, a projector onto the solution
/// set, and a quadratic-growth constant.
pub struct GroundTruth {
    optimal_value: f64,
    qg_constant: f64,
    /// Whether `qg_constant` was estimated from samples rather than derived
    /// exactly from the problem data.
    beta_is_estimate: bool,
    /// Raw sample minimum of `2(Φ(x)−Φ*)/d²(x,X)` for estimated instances,
    /// before any clamping against `L`.
    beta_sample_min: Option<f64>,
    projector: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
}

impl GroundTruth {
    pub fn exact(
        optimal_value: f64,
        qg_constant: f64,
        projector: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        GroundTruth {
            optimal_value,
            qg_constant,
            beta_is_estimate: false,
            beta_sample_min: None,
            projector: Box::new(projector),
        }
    }

    pub fn estimated(
        optimal_value: f64,
        qg_constant: f64,
        beta_sample_min: f64,
        projector: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        GroundTruth {
            optimal_value,
            qg_constant,
            beta_is_estimate: true,
            beta_sample_min: Some(beta_sample_min),
            projector: Box::new(projector),
        }
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    /// Quadratic-growth constant β.
    pub fn qg_constant(&self) -> f64 {
        self.qg_constant
    }

    pub fn beta_is_estimate(&self) -> bool {
        self.beta_is_estimate
    }

    pub fn beta_sample_min(&self) -> Option<f64> {
        self.beta_sample_min
    }

    /// Nearest point of the solution set.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.projector)(x)
    }

    /// Squared distance `d²(x, X)`.
    pub fn distance_sq(&self, x: &DVector<f64>) -> f64 {
        (x - self.project(x)).norm_squared()
    }
}

impl std::fmt::Debug for GroundTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroundTruth")
            .field("optimal_value", &self.optimal_value)
            .field("qg_constant", &self.qg_constant)
            .field("beta_is_estimate", &self.beta_is_estimate)
            .finish_non_exhaustive()
    }
}

/// The composite objective: `N ≥ 1` smooth components of a common dimension
/// plus one regularizer, with `total_lipschitz = Σ L_n` fixed at
/// construction.
pub struct ProblemInstance {
    components: Vec<Box<dyn SmoothComponent>>,
    regularizer: Box<dyn Regularizer>,
    dimension: usize,
    total_lipschitz: f64,
    ground_truth: Option<GroundTruth>,
}

impl ProblemInstance {
    pub fn new(
        components: Vec<Box<dyn SmoothComponent>>,
        regularizer: Box<dyn Regularizer>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "a problem needs at least one smooth component".into(),
            ));
        }
        let dimension = components[0].dimension();
        for (n, c) in components.iter().enumerate() {
            if c.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    got: c.dimension(),
                });
            }
            if !(c.lipschitz() > 0.0) || !c.lipschitz().is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "component {n} has non-positive Lipschitz constant {}",
                    c.lipschitz()
                )));
            }
        }
        // Fixed ascending-index summation so the stored constant matches
        // `Σ L_n` bit for bit.
        let total_lipschitz = components.iter().map(|c| c.lipschitz()).sum();
        Ok(ProblemInstance {
            components,
            regularizer,
            dimension,
            total_lipschitz,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, gt: GroundTruth) -> Self {
        self.ground_truth = Some(gt);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, n: usize) -> &dyn SmoothComponent {
        self.components[n].as_ref()
    }

    pub fn regularizer(&self) -> &dyn Regularizer {
        self.regularizer.as_ref()
    }

    /// `L = Σ_n L_n`.
    pub fn total_lipschitz(&self) -> f64 {
        self.total_lipschitz
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    pub fn ground_truth_or_err(&self, op: &'static str) -> Result<&GroundTruth> {
        self.ground_truth.as_ref().ok_or(Error::MissingGroundTruth(op))
    }

    fn check_dimension(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Smooth part `F(x) = Σ_n f_n(x)`, ascending component order.
    pub fn smooth_value(&self, x: &DVector<f64>) -> f64 {
        self.components.iter().map(|c| c.value(x)).sum()
    }

    /// `Φ(x) = F(x) + h(x)`; `+∞` iff `x` lies outside the effective domain
    /// of the regularizer.
    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dimension(x)?;
        Ok(self.smooth_value(x) + self.regularizer.value(x))
    }

    /// `∇F(x) = Σ_n ∇f_n(x)`, accumulated in ascending component-index order
    /// for a deterministic floating-point result.
    pub fn full_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dimension(x)?;
        let mut g = DVector::zeros(self.dimension);
        for c in &self.components {
            g += c.gradient(x);
        }
        Ok(g)
    }

    /// Backward step: `argmin_x { h(x) + ‖x−y‖²/(2α) }`.
    pub fn prox_step(&self, alpha: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prox step size must be positive, got {alpha}"
            )));
        }
        self.check_dimension(y)?;
        Ok(self.regularizer.prox(alpha, y))
    }
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("dimension", &self.dimension)
            .field("n_components", &self.components.len())
            .field("total_lipschitz", &self.total_lipschitz)
            .field("ground_truth", &self.ground_truth)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    fn half_square_1d() -> Box<dyn SmoothComponent> {
        Box::new(FnComponent::new(
            1,
            1.0,
            |x: &DVector<f64>| 0.5 * x[0] * x[0],
            |x: &DVector<f64>| dvector![x[0]],
        ))
    }

    #[test]
    fn objective_of_centered_quadratic_at_origin_is_zero() {
        let p = ProblemInstance::new(vec![half_square_1d()], Box::new(ZeroRegularizer)).unwrap();
        assert_eq!(p.objective(&dvector![0.0]).unwrap(), 0.0);
    }

    #[test]
    fn objective_adds_regularizer_value() {
        let p =
            ProblemInstance::new(vec![half_square_1d()], Box::new(L1Regularizer::new(1.0)))
                .unwrap();
        assert_eq!(p.objective(&dvector![1.0]).unwrap(), 1.5);
    }

    #[test]
    fn objective_is_infinite_outside_effective_domain() {
        let p = ProblemInstance::new(
            vec![half_square_1d()],
            Box::new(BoxRegularizer::uniform(1, 0.0, f64::INFINITY)),
        )
        .unwrap();
        assert_eq!(p.objective(&dvector![-1.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn objective_rejects_wrong_dimension() {
        let p = ProblemInstance::new(vec![half_square_1d()], Box::new(ZeroRegularizer)).unwrap();
        assert!(matches!(
            p.objective(&dvector![1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn full_gradient_sums_components() {
        let p = ProblemInstance::new(
            vec![half_square_1d(), half_square_1d()],
            Box::new(ZeroRegularizer),
        )
        .unwrap();
        assert_eq!(p.full_gradient(&dvector![1.0]).unwrap(), dvector![2.0]);
    }

    #[test]
    fn full_gradient_of_identity_least_squares_is_x() {
        let a = nalgebra::DMatrix::<f64>::identity(2, 2);
        let c = QuadraticComponent::new(a, DVector::zeros(2)).unwrap();
        let p = ProblemInstance::new(vec![Box::new(c)], Box::new(ZeroRegularizer)).unwrap();
        assert_eq!(
            p.full_gradient(&dvector![1.0, 2.0]).unwrap(),
            dvector![1.0, 2.0]
        );
    }

    #[test]
    fn full_gradient_of_opposed_shifts_cancels() {
        let left = FnComponent::new(
            1,
            1.0,
            |x: &DVector<f64>| 0.5 * (x[0] - 1.0).powi(2),
            |x: &DVector<f64>| dvector![x[0] - 1.0],
        );
        let right = FnComponent::new(
            1,
            1.0,
            |x: &DVector<f64>| 0.5 * (x[0] + 1.0).powi(2),
            |x: &DVector<f64>| dvector![x[0] + 1.0],
        );
        let p = ProblemInstance::new(
            vec![Box::new(left), Box::new(right)],
            Box::new(ZeroRegularizer),
        )
        .unwrap();
        assert_eq!(p.full_gradient(&dvector![0.0]).unwrap(), dvector![0.0]);
    }

    #[test]
    fn prox_step_with_zero_regularizer_is_identity() {
        let p = ProblemInstance::new(vec![half_square_1d()], Box::new(ZeroRegularizer)).unwrap();
        let y = dvector![3.25];
        assert_eq!(p.prox_step(0.7, &y).unwrap(), y);
    }

    #[test]
    fn prox_step_soft_thresholds_l1() {
        // αλ = 1: prox(y) = sign(y)·max(|y|−1, 0).
        let p =
            ProblemInstance::new(vec![half_square_1d()], Box::new(L1Regularizer::new(2.0)))
                .unwrap();
        assert_eq!(p.prox_step(0.5, &dvector![1.5]).unwrap(), dvector![0.5]);
    }

    #[test]
    fn prox_step_projects_onto_box() {
        let c = FnComponent::new(
            2,
            1.0,
            |x: &DVector<f64>| 0.5 * x.norm_squared(),
            |x: &DVector<f64>| x.clone(),
        );
        let p = ProblemInstance::new(
            vec![Box::new(c)],
            Box::new(BoxRegularizer::uniform(2, 0.0, f64::INFINITY)),
        )
        .unwrap();
        assert_eq!(
            p.prox_step(1.0, &dvector![-2.0, 3.0]).unwrap(),
            dvector![0.0, 3.0]
        );
    }

    #[test]
    fn prox_step_rejects_nonpositive_alpha() {
        let p = ProblemInstance::new(vec![half_square_1d()], Box::new(ZeroRegularizer)).unwrap();
        assert!(matches!(
            p.prox_step(0.0, &dvector![1.0]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            p.prox_step(-1.0, &dvector![1.0]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn total_lipschitz_is_exact_component_sum() {
        let mk = |l: f64| {
            Box::new(FnComponent::new(
                1,
                l,
                |x: &DVector<f64>| 0.5 * x[0] * x[0],
                |x: &DVector<f64>| dvector![x[0]],
            )) as Box<dyn SmoothComponent>
        };
        let ls = [0.3, 1.7, 2.2];
        let p =
            ProblemInstance::new(ls.iter().map(|&l| mk(l)).collect(), Box::new(ZeroRegularizer))
                .unwrap();
        assert_eq!(p.total_lipschitz(), ls.iter().sum::<f64>());
    }

    proptest! {
        // Identity prox for h = 0, any α > 0 and any y.
        #[test]
        fn zero_prox_is_identity(alpha in 1e-9..1e6f64, y0 in -1e6..1e6f64, y1 in -1e6..1e6f64) {
            let c = FnComponent::new(
                2,
                1.0,
                |x: &DVector<f64>| 0.5 * x.norm_squared(),
                |x: &DVector<f64>| x.clone(),
            );
            let p = ProblemInstance::new(vec![Box::new(c)], Box::new(ZeroRegularizer)).unwrap();
            let y = dvector![y0, y1];
            prop_assert_eq!(p.prox_step(alpha, &y).unwrap(), y);
        }
    }

    #[test]
    fn full_gradient_is_lipschitz_with_the_summed_constant() {
        use rand::{Rng, SeedableRng};
        let a1 = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let a2 = nalgebra::DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.5, 2.0, 0.0, 1.0]);
        let p = ProblemInstance::new(
            vec![
                Box::new(QuadraticComponent::new(a1, DVector::zeros(2)).unwrap()),
                Box::new(QuadraticComponent::new(a2, DVector::zeros(3)).unwrap()),
            ],
            Box::new(ZeroRegularizer),
        )
        .unwrap();
        let l = p.total_lipschitz();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let x = dvector![rng.random::<f64>() * 10.0 - 5.0, rng.random::<f64>() * 10.0 - 5.0];
            let y = dvector![rng.random::<f64>() * 10.0 - 5.0, rng.random::<f64>() * 10.0 - 5.0];
            let lhs = (p.full_gradient(&x).unwrap() - p.full_gradient(&y).unwrap()).norm();
            assert!(lhs <= l * (&x - &y).norm() * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn evaluations_are_safe_from_concurrent_threads() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 2.0]);
        let p = ProblemInstance::new(
            vec![Box::new(QuadraticComponent::new(a, dvector![1.0, -1.0]).unwrap())],
            Box::new(L1Regularizer::new(0.3)),
        )
        .unwrap();
        let x = dvector![0.7, -0.2];
        let expected = p.objective(&x).unwrap();
        let expected_g = p.full_gradient(&x).unwrap();
        std::thread::scope(|scope| {
            for _ in 0..4 {
                scope.spawn(|| {
                    for _ in 0..100 {
                        assert_eq!(p.objective(&x).unwrap(), expected);
                        assert_eq!(p.full_gradient(&x).unwrap(), expected_g);
                    }
                });
            }
        });
    }
}
