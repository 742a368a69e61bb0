//! Problem construction from configuration.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use piag::model::ProblemInstance;
use piag::problems::{
    random_least_squares_description, LeastSquaresParams, ProblemDescription,
};

use crate::config::ProblemConfig;
use crate::CliError;

/// Singular-value range of CLI-generated least-squares designs.
const SV_RANGE: (f64, f64) = (0.5, 2.5);

fn require(field: Option<usize>, name: &str, kind: &str) -> Result<usize, CliError> {
    field.ok_or_else(|| {
        CliError::Schema(format!("problem kind `{kind}` requires field `{name}`"))
    })
}

pub fn build_problem(
    cfg: &ProblemConfig,
) -> Result<(ProblemDescription, ProblemInstance), CliError> {
    let desc = match cfg.kind.as_str() {
        "least-squares" => {
            let d = require(cfg.d, "d", &cfg.kind)?;
            let m = require(cfg.m, "m", &cfg.kind)?;
            let n = require(cfg.n, "N", &cfg.kind)?;
            let rank = cfg.rank.unwrap_or_else(|| m.min(d));
            let params = LeastSquaresParams {
                dimension: d,
                rows: m,
                rank,
                n_components: n,
                sv_min: SV_RANGE.0,
                sv_max: SV_RANGE.1,
                consistent: true,
            };
            random_least_squares_description(&params, cfg.seed)?
        }
        "lasso" => {
            let d = require(cfg.d, "d", &cfg.kind)?;
            let m = require(cfg.m, "m", &cfg.kind)?;
            let n = require(cfg.n, "N", &cfg.kind)?;
            let lambda = cfg.lambda.ok_or_else(|| {
                CliError::Schema("problem kind `lasso` requires field `lambda`".into())
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let a = gaussian_matrix(&mut rng, m, d);
            let x_sparse = sparse_vector(&mut rng, d);
            let b = &a * &x_sparse + gaussian_vector(&mut rng, m) * 0.05;
            ProblemDescription::lasso(a, b, lambda, n, cfg.seed)?
        }
        "box-quadratic" => {
            let d = require(cfg.d, "d", &cfg.kind)?;
            let m = require(cfg.m, "m", &cfg.kind)?;
            let n = require(cfg.n, "N", &cfg.kind)?;
            let [lo, hi] = cfg.box_bounds.ok_or_else(|| {
                CliError::Schema("problem kind `box-quadratic` requires field `box`".into())
            })?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            // Q = BᵀB/m is PSD with rank min(m, d); m < d leaves flat
            // directions.
            let b = gaussian_matrix(&mut rng, m, d);
            let q = b.transpose() * &b / m as f64;
            let linear = gaussian_vector(&mut rng, d) * 0.5;
            let lower = DVector::from_element(d, lo);
            let upper = DVector::from_element(d, hi);
            ProblemDescription::box_quadratic(q, linear, lower, upper, n, cfg.seed)?
        }
        "file" => {
            let path = cfg.path.as_ref().ok_or_else(|| {
                CliError::Schema("problem kind `file` requires field `path`".into())
            })?;
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Schema(format!("cannot read problem document `{path}`: {e}"))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Schema(format!("bad problem document: {e}")))?
        }
        other => {
            return Err(CliError::Schema(format!("unknown problem kind `{other}`")));
        }
    };
    let instance = desc.instantiate(cfg.seed)?;
    Ok((desc, instance))
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| normal(rng))
}

fn sparse_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| {
        if rng.random::<f64>() < 0.3 {
            normal(rng) * 2.0
        } else {
            0.0
        }
    })
}

/// Box–Muller from two uniforms; avoids a distribution dependency here.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}
