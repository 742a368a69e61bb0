//! Library-provided regularizers: zero, weighted ℓ1, box indicator.

use nalgebra::DVector;

use super::Regularizer;

/// `h ≡ 0`; the prox is the identity.
pub struct ZeroRegularizer;

impl Regularizer for ZeroRegularizer {
    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn prox(&self, _alpha: f64, y: &DVector<f64>) -> DVector<f64> {
        y.clone()
    }
}

/// `h(x) = λ‖x‖₁`; the prox is coordinate-wise soft thresholding.
pub struct L1Regularizer {
    weight: f64,
}

impl L1Regularizer {
    pub fn new(weight: f64) -> Self {
        assert!(weight > 0.0, "l1 weight must be positive");
        L1Regularizer { weight }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

impl Regularizer for L1Regularizer {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.weight * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox(&self, alpha: f64, y: &DVector<f64>) -> DVector<f64> {
        let t = alpha * self.weight;
        y.map(|v| soft_threshold(v, t))
    }
}

/// Indicator of the box `[lower, upper]`; the prox is the Euclidean
/// projection (coordinate-wise clamp). Bounds may be infinite.
pub struct BoxRegularizer {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxRegularizer {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(upper.iter()).all(|(l, u)| l <= u),
            "box must be nonempty"
        );
        BoxRegularizer { lower, upper }
    }

    pub fn uniform(dimension: usize, lower: f64, upper: f64) -> Self {
        BoxRegularizer::new(
            DVector::from_element(dimension, lower),
            DVector::from_element(dimension, upper),
        )
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }
}

impl Regularizer for BoxRegularizer {
    fn value(&self, x: &DVector<f64>) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, _alpha: f64, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(y.len(), |i, _| y[i].clamp(self.lower[i], self.upper[i]))
    }
}
