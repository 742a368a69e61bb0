//! Sampled validators for the structural assumptions a problem must satisfy:
//! smooth convex components with Lipschitz gradients, a prox-capable convex
//! regularizer, and quadratic growth of the composite objective.
//!
//! These checks are probabilistic by nature: they sample random points and
//! verify the defining inequalities up to floating-point slack. Generators in
//! [`crate::problems`] run them before returning an instance; user-defined
//! components should be passed through them once as well.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ProblemInstance, Regularizer, SmoothComponent};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub seed: u64,
    /// Sampled (x, y) pairs for the Lipschitz and convexity inequalities.
    pub pair_samples: usize,
    /// Points at which the gradient is compared against central differences.
    pub fd_points: usize,
    /// Relative tolerance of the finite-difference comparison.
    pub fd_tolerance: f64,
    /// Sampled points for the prox optimality/nonexpansiveness checks.
    pub prox_samples: usize,
    /// Sampled points for the quadratic-growth inequality.
    pub qg_samples: usize,
    /// Standard deviation of the sampling cloud.
    pub scale: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            seed: 0x5eed_cafe,
            pair_samples: 64,
            fd_points: 6,
            fd_tolerance: 1e-5,
            prox_samples: 48,
            qg_samples: 1000,
            scale: 5.0,
        }
    }
}

fn gaussian_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Central-difference gradient with step `h = ε^{1/3}·max(1, ‖x‖)` per
/// coordinate, the standard truncation/roundoff balance.
pub fn finite_difference_gradient(
    f: &dyn Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
) -> DVector<f64> {
    let h = f64::EPSILON.cbrt() * x.norm().max(1.0);
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    let mut xm = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    g
}

/// Smooth-component checks on samples: convexity, `L_n`-Lipschitz gradient,
/// and agreement of the gradient with central differences of the value.
pub fn validate_component(c: &dyn SmoothComponent, cfg: &ValidationConfig) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = c.dimension();
    let l = c.lipschitz();

    for i in 0..cfg.pair_samples {
        let x = gaussian_point(&mut rng, d, cfg.scale);
        let y = gaussian_point(&mut rng, d, cfg.scale);
        let gx = c.gradient(&x);
        let gy = c.gradient(&y);

        let lhs = (&gx - &gy).norm();
        let rhs = l * (&x - &y).norm();
        if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Validation(format!(
                "gradient is not {l}-Lipschitz: sample {i} has ‖∇f(x)−∇f(y)‖ = {lhs:e} \
                 > L‖x−y‖ = {rhs:e}"
            )));
        }

        let fx = c.value(&x);
        let fy = c.value(&y);
        let linear = fx + gx.dot(&(&y - &x));
        let slack = 1e-9 * (1.0 + finite_abs(fx) + finite_abs(fy));
        if fy < linear - slack {
            return Err(Error::Validation(format!(
                "convexity violated on sample {i}: f(y) = {fy:e} < f(x)+⟨∇f(x),y−x⟩ = {linear:e}"
            )));
        }
    }

    for i in 0..cfg.fd_points {
        let x = gaussian_point(&mut rng, d, cfg.scale);
        let g = c.gradient(&x);
        let fd = finite_difference_gradient(&|p| c.value(p), &x);
        let err = (&fd - &g).norm();
        let denom = g.norm().max(1.0);
        if err > cfg.fd_tolerance * denom {
            return Err(Error::Validation(format!(
                "gradient disagrees with central differences on sample {i}: \
                 ‖fd−∇f‖ = {err:e} vs tolerance {:e}",
                cfg.fd_tolerance * denom
            )));
        }
    }

    Ok(())
}

fn finite_abs(v: f64) -> f64 {
    if v.is_finite() {
        v.abs()
    } else {
        0.0
    }
}

/// Regularizer checks on samples: the prox output minimizes its defining
/// objective, the prox is nonexpansive, and it lands in the effective
/// domain.
pub fn validate_regularizer(
    h: &dyn Regularizer,
    dimension: usize,
    cfg: &ValidationConfig,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let alphas = [0.1, 1.0, 10.0];

    for i in 0..cfg.prox_samples {
        let alpha = alphas[i % alphas.len()];
        let y = gaussian_point(&mut rng, dimension, cfg.scale);
        let p = h.prox(alpha, &y);

        let hp = h.value(&p);
        if !hp.is_finite() {
            return Err(Error::Validation(format!(
                "prox output left the effective domain on sample {i}: h(prox) = {hp}"
            )));
        }
        let obj_p = hp + (&p - &y).norm_squared() / (2.0 * alpha);

        // Competitors: global samples and local perturbations of the output.
        for _ in 0..8 {
            let z = if rng.random::<bool>() {
                gaussian_point(&mut rng, dimension, cfg.scale)
            } else {
                &p + gaussian_point(&mut rng, dimension, 1e-3 * cfg.scale)
            };
            let hz = h.value(&z);
            if !hz.is_finite() {
                continue;
            }
            let obj_z = hz + (&z - &y).norm_squared() / (2.0 * alpha);
            if obj_p > obj_z + 1e-9 * (1.0 + obj_z.abs()) {
                return Err(Error::Validation(format!(
                    "prox output is not a minimizer on sample {i}: {obj_p:e} > {obj_z:e}"
                )));
            }
        }

        let y2 = gaussian_point(&mut rng, dimension, cfg.scale);
        let p2 = h.prox(alpha, &y2);
        let lhs = (&p - &p2).norm();
        let rhs = (&y - &y2).norm();
        if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Validation(format!(
                "prox is expansive on sample {i}: ‖p₁−p₂‖ = {lhs:e} > ‖y₁−y₂‖ = {rhs:e}"
            )));
        }
    }

    Ok(())
}

/// Growth checks on samples: `Φ(x) − Φ* ≥ (β/2)·d²(x, X)`, the projector is
/// idempotent, and projected points achieve the optimal value.
pub fn validate_quadratic_growth(p: &ProblemInstance, cfg: &ValidationConfig) -> Result<()> {
    let gt = p.ground_truth_or_err("quadratic-growth validation")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51_7e57);
    let beta = gt.qg_constant();
    let phi_star = gt.optimal_value();

    for i in 0..cfg.qg_samples {
        let x = gaussian_point(&mut rng, p.dimension(), cfg.scale);
        let phi = p.objective(&x)?;
        if phi.is_infinite() {
            continue; // outside dom h the inequality is vacuous
        }
        let proj = gt.project(&x);
        let dist_sq = (&x - &proj).norm_squared();

        let gap = phi - phi_star;
        let bound = 0.5 * beta * dist_sq;
        if gap < bound - 1e-9 * (1.0 + phi.abs()) {
            return Err(Error::Validation(format!(
                "quadratic growth violated on sample {i}: Φ−Φ* = {gap:e} < (β/2)d² = {bound:e}"
            )));
        }

        let phi_proj = p.objective(&proj)?;
        if (phi_proj - phi_star).abs() > 1e-7 * (1.0 + phi_star.abs()) {
            return Err(Error::Validation(format!(
                "projection does not achieve the optimal value on sample {i}: \
                 Φ(proj) = {phi_proj:e} vs Φ* = {phi_star:e}"
            )));
        }

        let reproj = gt.project(&proj);
        if (&reproj - &proj).norm() > 1e-8 * (1.0 + proj.norm()) {
            return Err(Error::Validation(format!(
                "projection is not idempotent on sample {i}"
            )));
        }
    }

    Ok(())
}

/// Full instance validation: every component, the regularizer, and — when
/// ground truth is present — quadratic growth.
pub fn validate_instance(p: &ProblemInstance, cfg: &ValidationConfig) -> Result<()> {
    for n in 0..p.n_components() {
        validate_component(p.component(n), cfg)?;
    }
    validate_regularizer(p.regularizer(), p.dimension(), cfg)?;
    if p.ground_truth().is_some() {
        validate_quadratic_growth(p, cfg)?;
    }
    Ok(())
}
