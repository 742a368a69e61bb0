//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured margins (visible with `--nocapture`).
//!
//! The envelope criteria (2, 3, 6, 7) share one batch of 225 solver runs —
//! 25 rank-deficient least-squares instances × 3 schedules × 3 delay
//! parameters — computed once and summarized into small per-run records.

use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use piag::delays::{DelaySchedule, ScheduleKind};
use piag::model::{L1Regularizer, ProblemInstance, QuadraticComponent, SmoothComponent};
use piag::problems::{
    random_least_squares, random_least_squares_description, LeastSquaresParams,
    ProblemDescription,
};
use piag::rates;
use piag::solver::{run, run_fbs, RunOptions, StoppingRule};

const ENVELOPE_TOL: f64 = 1e-8;

fn under_envelope(value: f64, envelope: f64) -> bool {
    if value > 1e-300 || envelope > 1e-300 {
        value <= envelope * (1.0 + ENVELOPE_TOL)
    } else {
        true
    }
}

// ---------------------------------------------------------------------------
// Shared envelope runs (criteria 2, 3, 6, 7)
// ---------------------------------------------------------------------------

struct RunRecord {
    instance: usize,
    schedule: &'static str,
    tau: usize,
    psi_envelope_holds: bool,
    psi_first_violation: Option<usize>,
    psi_worst_ratio: f64,
    psi_result4_holds: bool,
    phi_envelope_holds: bool,
    dist_envelope_holds: bool,
    lemma2_min_at_xk: f64,
    lemma2_min_at_proj: f64,
    max_realized_delay: usize,
    rows: usize,
}

struct EnvelopeBatch {
    elapsed_secs: f64,
    runs: Vec<RunRecord>,
}

fn envelope_batch() -> &'static EnvelopeBatch {
    static BATCH: OnceLock<EnvelopeBatch> = OnceLock::new();
    BATCH.get_or_init(compute_envelope_batch)
}

fn instance_params(rng: &mut ChaCha8Rng) -> LeastSquaresParams {
    let d = rng.random_range(8..=40);
    let m = d + rng.random_range(d / 2..=d);
    let rank = (2 + rng.random_range(0..(d / 2))).min(d - 1);
    let n_components = 1 + rng.random_range(0..rank.min(6));
    LeastSquaresParams {
        dimension: d,
        rows: m,
        rank,
        n_components,
        sv_min: 1.0,
        sv_max: 5.0,
        consistent: true,
    }
}

fn compute_envelope_batch() -> EnvelopeBatch {
    let start = Instant::now();
    let mut runs = Vec::with_capacity(225);
    let schedules: [(&'static str, fn(u64) -> ScheduleKind); 3] = [
        ("cyclic", |_| ScheduleKind::Cyclic),
        ("uniform-random", |seed| ScheduleKind::UniformRandom { seed }),
        ("adversarial-max", |_| ScheduleKind::AdversarialMax),
    ];

    for instance in 0..25usize {
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + instance as u64);
        let params = instance_params(&mut rng);
        let problem = random_least_squares(&params, 500 + instance as u64)
            .expect("instance generation");
        let gt = problem.ground_truth().expect("exact ground truth");
        assert!(!gt.beta_is_estimate(), "envelope instances need exact β");
        let d = problem.dimension();
        let x0 = DVector::from_fn(d, |_, _| rng.random::<f64>() * 4.0 - 2.0);

        for (name, mk_kind) in schedules {
            for tau in [1usize, 5, 10] {
                let schedule =
                    DelaySchedule::new(mk_kind(77 + instance as u64), tau, params.n_components)
                        .expect("schedule");
                let bounds = rates::TheoreticalBounds::for_problem(&problem, tau)
                    .expect("bounds");
                let trace = run(
                    &problem,
                    &schedule,
                    bounds.alpha_max,
                    x0.clone(),
                    &StoppingRule::max_iterations(2000),
                    &RunOptions { record_iterates: true, ..Default::default() },
                )
                .expect("solver run");

                let report = rates::envelope_check(&trace, bounds.rate_a).expect("envelope");
                let loose =
                    rates::envelope_check(&trace, bounds.rate_result4).expect("envelope");

                let psi0 = trace.rows[0].psi;
                let dist_factor = 2.0 * bounds.alpha_max
                    / (1.0 + bounds.alpha_max * gt.qg_constant());
                let mut phi_holds = true;
                let mut dist_holds = true;
                for (k, row) in trace.rows.iter().enumerate() {
                    let env = rates::geometric_envelope(k, bounds.rate_a, psi0);
                    phi_holds &= under_envelope(row.phi_err, env);
                    dist_holds &= under_envelope(row.dist_sq, dist_factor * env);
                }

                let mut min_xk = f64::INFINITY;
                let mut min_proj = f64::INFINITY;
                for k in 0..trace.len() - 1 {
                    let xk = trace.iterate(k).unwrap().clone();
                    min_xk = min_xk.min(
                        rates::lemma2_residual(&problem, &trace, k, &xk, bounds.alpha_max)
                            .unwrap(),
                    );
                    let proj = gt.project(&xk);
                    min_proj = min_proj.min(
                        rates::lemma2_residual(&problem, &trace, k, &proj, bounds.alpha_max)
                            .unwrap(),
                    );
                }

                let max_delay = trace
                    .rows
                    .iter()
                    .filter_map(|r| r.max_delay())
                    .max()
                    .unwrap_or(0);
                if name == "adversarial-max" {
                    assert_eq!(max_delay, tau, "adversarial runs must realize maximal staleness");
                }

                runs.push(RunRecord {
                    instance,
                    schedule: name,
                    tau,
                    psi_envelope_holds: report.holds,
                    psi_first_violation: report.first_violation,
                    psi_worst_ratio: report.worst_ratio,
                    psi_result4_holds: loose.holds,
                    phi_envelope_holds: phi_holds,
                    dist_envelope_holds: dist_holds,
                    lemma2_min_at_xk: min_xk,
                    lemma2_min_at_proj: min_proj,
                    max_realized_delay: max_delay,
                    rows: trace.len(),
                });
            }
        }
    }

    EnvelopeBatch { elapsed_secs: start.elapsed().as_secs_f64(), runs }
}

// ---------------------------------------------------------------------------
// Criterion 1 — FBS reduction
// ---------------------------------------------------------------------------

fn random_quadratic_l1(rng: &mut ChaCha8Rng, d: usize, n: usize) -> ProblemInstance {
    let components: Vec<Box<dyn SmoothComponent>> = (0..n)
        .map(|_| {
            let rows = 1 + rng.random_range(0..3);
            let a = DMatrix::from_fn(rows, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let b = DVector::from_fn(rows, |_, _| rng.random::<f64>() - 0.5);
            Box::new(QuadraticComponent::new(a, b).unwrap()) as Box<dyn SmoothComponent>
        })
        .collect();
    let lambda = 0.05 + rng.random::<f64>() * 0.5;
    ProblemInstance::new(components, Box::new(L1Regularizer::new(lambda))).unwrap()
}

#[test]
fn criterion_01_fbs_reduction() {
    let start = Instant::now();

    // Step-size bound collapses to 1/L at τ = 0.
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let l = 10f64.powf(rng.random_range(-2.0..3.0));
        let beta = l * 10f64.powf(rng.random_range(-3.0..0.0));
        let alpha = rates::max_step_size(beta, l, 0).unwrap();
        let rel = (alpha - 1.0 / l).abs() * l;
        assert!(rel <= 1e-12, "α_max(β={beta}, L={l}, 0) off by rel {rel:e}");
    }

    // PIAG under the zero schedule is bitwise the independent FBS path.
    for inst in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + inst);
        let d = 2 + rng.random_range(0..8);
        let n = 1 + rng.random_range(0..4);
        let p = random_quadratic_l1(&mut rng, d, n);
        let x0 = DVector::from_fn(d, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let alpha = 0.9 / p.total_lipschitz();
        let schedule = DelaySchedule::zero(n);
        let stop = StoppingRule::max_iterations(1000);
        let opts = RunOptions { record_iterates: true, ..Default::default() };
        let piag_trace = run(&p, &schedule, alpha, x0.clone(), &stop, &opts).unwrap();
        let fbs_trace = run_fbs(&p, alpha, x0, &stop, &opts).unwrap();
        let xs = piag_trace.iterates.as_ref().unwrap();
        let ys = fbs_trace.iterates.as_ref().unwrap();
        assert_eq!(xs.len(), 1001);
        for (k, (x, y)) in xs.iter().zip(ys.iter()).enumerate() {
            for (a, b) in x.iter().zip(y.iter()) {
                assert_eq!(a.to_bits(), b.to_bits(), "instance {inst} split at k={k}");
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "criterion 1 took {elapsed:.2}s (budget 5s)");
    println!("ACCEPTANCE 1: PASS — zero-delay reduction bitwise on 20 instances, step bound = 1/L on 100 draws, {elapsed:.2}s");
}

// ---------------------------------------------------------------------------
// Criterion 2 — Lyapunov envelope
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_lyapunov_envelope() {
    let batch = envelope_batch();
    assert_eq!(batch.runs.len(), 225);
    let mut worst: f64 = 0.0;
    for r in &batch.runs {
        assert!(
            r.psi_envelope_holds,
            "Ψ envelope violated: instance {} {} τ={} at k={:?} (ratio {})",
            r.instance, r.schedule, r.tau, r.psi_first_violation, r.psi_worst_ratio
        );
        assert_eq!(r.rows, 2001);
        worst = worst.max(r.psi_worst_ratio);
    }
    assert!(
        batch.elapsed_secs < 60.0,
        "envelope batch took {:.1}s (budget 60s)",
        batch.elapsed_secs
    );
    println!(
        "ACCEPTANCE 2: PASS — Ψ under a^kΨ₀(1+1e-8) on 225 runs, worst ratio {worst:.9}, batch {:.1}s",
        batch.elapsed_secs
    );
}

// ---------------------------------------------------------------------------
// Criterion 3 — function-value and iterate-distance corollaries
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_corollaries() {
    let batch = envelope_batch();
    for r in &batch.runs {
        assert!(
            r.phi_envelope_holds,
            "Φ−Φ* envelope violated on instance {} {} τ={}",
            r.instance, r.schedule, r.tau
        );
        assert!(
            r.dist_envelope_holds,
            "d² envelope violated on instance {} {} τ={}",
            r.instance, r.schedule, r.tau
        );
    }
    println!("ACCEPTANCE 3: PASS — value/distance corollaries hold on all 225 runs");
}

// ---------------------------------------------------------------------------
// Criterion 4 — recurrence lemma, numerically
// ---------------------------------------------------------------------------

fn random_admissible_tuple(rng: &mut ChaCha8Rng) -> (f64, f64, f64, usize) {
    let a: f64 = rng.random_range(0.05..0.95);
    let b: f64 = rng.random_range(0.1..10.0);
    let k0 = rng.random_range(0..8usize);
    let c_max = b * (1.0 - a) * a.powi(k0 as i32) / (1.0 - a.powi(k0 as i32 + 1));
    let c = rng.random::<f64>() * c_max;
    (a, b, c, k0)
}

/// Sequences meeting the recurrence with equality; the draw cap keeps every
/// term nonnegative.
fn recurrence_sequences(
    rng: &mut ChaCha8Rng,
    a: f64,
    b: f64,
    c: f64,
    k0: usize,
    len: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; len];
    let mut w = vec![0.0; len];
    v[0] = rng.random_range(0.1..10.0);
    for k in 0..len - 1 {
        let cap = a * v[k] / (2.0 * b);
        w[k] = rng.random::<f64>() * cap;
        let lo = k.saturating_sub(k0);
        let tail: f64 = w[lo..=k].iter().sum();
        v[k + 1] = a * v[k] - b * w[k] + c * tail;
    }
    (v, w)
}

#[test]
fn criterion_04_recurrence_lemma_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut violations = 0usize;
    for _ in 0..1000 {
        let (a, b, c, k0) = random_admissible_tuple(&mut rng);
        let (v, w) = recurrence_sequences(&mut rng, a, b, c, k0, 200);
        let verdict = rates::check_lemma1(&v, &w, a, b, c, k0).unwrap();
        assert!(verdict.recurrence_holds, "construction broke its own recurrence");
        assert!(verdict.admissible, "tuple sampled outside the admissible region");
        if !verdict.conclusion_holds {
            violations += 1;
        }
    }
    assert_eq!(violations, 0, "geometric-decay conclusion failed {violations} times");
    println!("ACCEPTANCE 4: PASS — decay conclusion held on 1000 random admissible recurrences (0 violations)");
}

// ---------------------------------------------------------------------------
// Criterion 5 — certificate admissibility across the parameter grid
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_certificate_admissibility() {
    let mut worst_slack: f64 = f64::INFINITY;
    for ratio in [1e-3, 1e-2, 1e-1, 1.0] {
        for tau in 0..=64usize {
            let l = 2.3;
            let beta = ratio * l;
            let alpha = rates::max_step_size(beta, l, tau).unwrap();
            let cert = rates::RateCertificate::from_parameters(beta, l, alpha, tau).unwrap();
            let slack = (cert.b() - cert.admissibility_lhs()) / cert.b();
            worst_slack = worst_slack.min(slack);
            assert!(
                cert.admissible(),
                "inadmissible at β/L={ratio}, τ={tau}: relative slack {slack:e}"
            );
            assert!(slack >= -1e-12, "slack {slack:e} below −1e-12 at β/L={ratio}, τ={tau}");
        }
    }

    // Tightness at the no-delay boundary: β = L, τ = 0, α = 1/L.
    let l = 3.7;
    let alpha = rates::max_step_size(l, l, 0).unwrap();
    let cert = rates::RateCertificate::from_parameters(l, l, alpha, 0).unwrap();
    let tie = (cert.admissibility_lhs() - cert.b()).abs() / cert.b();
    assert!(tie <= 1e-12, "boundary tie off by rel {tie:e}");

    println!("ACCEPTANCE 5: PASS — admissible on the (β/L, τ) grid, worst relative slack {worst_slack:.3e}, boundary tie {tie:.3e}");
}

// ---------------------------------------------------------------------------
// Criterion 6 — descent inequality along every envelope run
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_descent_inequality_along_runs() {
    let batch = envelope_batch();
    let mut min_residual = f64::INFINITY;
    for r in &batch.runs {
        min_residual = min_residual.min(r.lemma2_min_at_xk).min(r.lemma2_min_at_proj);
        assert!(
            r.lemma2_min_at_xk >= -1e-9 && r.lemma2_min_at_proj >= -1e-9,
            "descent residual below −1e-9 on instance {} {} τ={}: {} / {}",
            r.instance,
            r.schedule,
            r.tau,
            r.lemma2_min_at_xk,
            r.lemma2_min_at_proj
        );
        assert!(r.max_realized_delay <= r.tau, "staleness bound broken");
    }
    println!("ACCEPTANCE 6: PASS — residuals ≥ −1e-9 on all 225 runs (min {min_residual:.3e})");
}

// ---------------------------------------------------------------------------
// Criterion 7 — rate chain and the looser envelope
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_rate_chain() {
    let slack = 1e-12;
    let le = |x: f64, y: f64| x <= y + slack * y.abs().max(x.abs());
    for eta in [1.0, 2.0, 10.0, 100.0] {
        for tau in 0..=64usize {
            let t = tau as f64 + 1.0;
            let lhs = (1.0 + 1.0 / (eta * t)).powf(-1.0 / t);
            let mid = (1.0 - 1.0 / (eta * (t + 1.0))).powf(1.0 / t);
            let rhs = 1.0 - 1.0 / (eta * (t + 1.0) * t);
            assert!(le(lhs, mid), "chain link 1 failed at η={eta}, τ={tau}: {lhs} vs {mid}");
            assert!(le(mid, rhs), "chain link 2 failed at η={eta}, τ={tau}: {mid} vs {rhs}");
        }
    }

    let batch = envelope_batch();
    for r in &batch.runs {
        assert!(
            r.psi_result4_holds,
            "condition-number envelope violated on instance {} {} τ={}",
            r.instance, r.schedule, r.tau
        );
    }
    println!("ACCEPTANCE 7: PASS — rate chain holds on the (η, τ) grid; measured decay under the condition-number envelope on all 225 runs");
}

// ---------------------------------------------------------------------------
// Criterion 8 — rate boundary at τ = 47
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_tau47_boundary() {
    let mut worst: f64 = 0.0;
    for eta in [1.0, 10.0, 100.0] {
        let ours = rates::rate_result4(eta, 47).unwrap();
        let prior = 1.0 - 1.0 / (49.0 * eta * 48.0);
        let diff = (ours - prior).abs();
        worst = worst.max(diff);
        assert!(diff <= 1e-14, "boundary mismatch at η={eta}: {diff:e}");
        let cmp = rates::rate_comparison_tau47(eta, 47).unwrap();
        assert!(cmp.ours_le_prior);
    }
    println!("ACCEPTANCE 8: PASS — τ=47 boundary coincidence to 1e-14 (worst diff {worst:.2e})");
}

// ---------------------------------------------------------------------------
// Criterion 9 — strong-convexity recovery
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_strong_convexity_recovery() {
    let params = LeastSquaresParams {
        dimension: 10,
        rows: 15,
        rank: 10, // full rank ⇒ strongly convex smooth part
        n_components: 3,
        sv_min: 0.7,
        sv_max: 3.0,
        consistent: false,
    };
    let desc = random_least_squares_description(&params, 909).unwrap();
    let problem = desc.instantiate(909).unwrap();
    let gt = problem.ground_truth().unwrap();
    let beta = gt.qg_constant();

    // Independent modulus: smallest eigenvalue of AᵀA from the serialized
    // design matrix.
    let ProblemDescription::LeastSquares(ls) = &desc else { unreachable!() };
    assert_eq!(ls.nullity(), 0, "full-rank instance expected");
    let a = ls.a.to_matrix().unwrap();
    let gram = a.transpose() * &a;
    let mu = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(
        (beta - mu).abs() <= 1e-9 * mu,
        "quadratic-growth constant {beta} differs from strong-convexity modulus {mu}"
    );

    let mut worst: f64 = 0.0;
    for exp in -4..=1 {
        let alpha = 10f64.powi(exp);
        let rate = rates::convergence_rate(alpha, beta).unwrap();
        let recovered = 1.0 / (1.0 + alpha * mu);
        let diff = (rate - recovered).abs() / recovered;
        worst = worst.max(diff);
        assert!(diff <= 1e-14, "rate differs from 1/(1+αμ) by rel {diff:e} at α={alpha}");
    }
    println!("ACCEPTANCE 9: PASS — rate equals 1/(1+αμ) with μ=β to 1e-14 (worst rel diff {worst:.2e})");
}

// ---------------------------------------------------------------------------
// Criterion 10 — byte-identical replay through the CLI
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let mk_config = |label: &str| {
        let output = base.join(label).join("trace");
        let config = serde_json::json!({
            "problem": {"kind": "least-squares", "seed": 42, "d": 10, "N": 3, "m": 15, "rank": 6},
            "schedule": {"kind": "cyclic", "tau": 3},
            "alpha": "auto",
            "max_iters": 300,
            "checks": ["envelope", "lemma2", "certificate"],
            "output": output.to_str().unwrap(),
        });
        let path = base.join(format!("{label}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
        (path, output)
    };

    let (cfg_a, out_a) = mk_config("a");
    let (cfg_b, out_b) = mk_config("b");
    for cfg in [&cfg_a, &cfg_b] {
        let status = Command::new(env!("CARGO_BIN_EXE_piag"))
            .arg("run")
            .arg(cfg)
            .arg("--quiet")
            .status()
            .expect("binary runs");
        assert!(status.success(), "run exited with {status}");
    }

    let csv_a = std::fs::read(out_a.with_extension("csv")).unwrap();
    let csv_b = std::fs::read(out_b.with_extension("csv")).unwrap();
    assert_eq!(csv_a, csv_b, "CSV outputs differ between identical runs");
    let prob_a = std::fs::read(out_a.with_extension("problem.json")).unwrap();
    let prob_b = std::fs::read(out_b.with_extension("problem.json")).unwrap();
    assert_eq!(prob_a, prob_b, "problem documents differ between identical runs");

    assert!(!csv_a.is_empty());
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 302, "300 iterations + start row + header");
    println!("ACCEPTANCE 10: PASS — byte-identical CSV and problem document across reruns");
}
