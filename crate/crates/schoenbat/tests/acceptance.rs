//! Acceptance suite: one test per claim the library stakes, each at its
//! stated tolerance. The test name is the pass/fail line; the printed output
//! (visible with --nocapture) carries the measured margins.
//!
//! Tests share a lock so the wall-clock criterion is never measured while
//! another criterion is burning cores.

use std::process::Command;
use std::sync::Mutex;

use bigfix::{taylor_coefficient, Fx};
use schoenbat::attention::{attention_weights, feature_attention, AttentionInput, DenomPolicy};
use schoenbat::features::{FeatureMapParams, MaclaurinFeatureMap};
use schoenbat::harness::{
    run_error_sweep, run_speed_sweep, run_tail_bound, run_unbiasedness, stats, strip_wall_times,
    Experiment, ExperimentConfig, ResultRecord,
};
use schoenbat::kernels::{KernelId, KERNELS};
use schoenbat::linalg::{Matrix, RngStream};
use schoenbat::sbn::{
    fit_post_params, ideal_restoration_params, post_sbn, pre_sbn, restoration_r_from_stats,
    restoration_residual, PostSbnParams, SbnStats, VarianceReduction,
};

static EXCLUSIVE: Mutex<()> = Mutex::new(());

fn exclusive() -> std::sync::MutexGuard<'static, ()> {
    EXCLUSIVE.lock().unwrap_or_else(|poison| poison.into_inner())
}

/// Criterion 1: for every kernel, the sample mean of single-feature kernel
/// estimates over 2·10⁴ maps lands within 4 standard errors of the closed
/// form, on 20 unit-ball pairs at d = 10 (plus the origin pair).
#[test]
fn criterion_1_kernel_unbiasedness() {
    let _guard = exclusive();
    let mut cfg = ExperimentConfig::new(Experiment::Unbiasedness);
    cfg.trials = 20_000;
    let records = run_unbiasedness(&cfg).expect("unbiasedness experiment runs");
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checked = 0;
    for r in records.iter().filter(|r| r.metric == "z_score") {
        let z = r.value.abs();
        assert!(
            z <= 4.0,
            "kernel {} pair {} drifted: |z| = {z:.3} exceeds 4 SE",
            r.kernel,
            r.trial
        );
        if z > worst.0 {
            worst = (z, format!("{} pair {}", r.kernel, r.trial));
        }
        checked += 1;
    }
    assert_eq!(checked, KERNELS.len() * 21, "every kernel-pair cell must be checked");
    println!(
        "criterion 1 PASS: {checked} kernel estimates unbiased, worst |z| = {:.3} ({}) of 4 (margin {:.3} SE)",
        worst.0,
        worst.1,
        4.0 - worst.0
    );
}

/// Criterion 2: series coefficients match high-precision finite-difference
/// derivatives of the closed forms to 1e-6 relative for orders ≤ 8, and the
/// hyperbolic pair is coefficient-identical to the exponential for n ≤ 100.
#[test]
fn criterion_2_coefficient_correctness() {
    let _guard = exclusive();
    let closed_in_fixed_point = |kernel: KernelId| {
        move |z: &Fx| match kernel {
            // sinh + cosh collapses to the exponential, term for term.
            KernelId::Exp | KernelId::Trigh => z.exp(),
            KernelId::Inv => Fx::one().div(&Fx::one().sub(z)),
            KernelId::Logi => Fx::one().sub(&z.ln_one_minus()),
            KernelId::Sqrt => Fx::from_i64(2).sub(&Fx::one().sub(z).sqrt()),
        }
    };
    let mut worst_rel: f64 = 0.0;
    for kernel in KERNELS {
        let oracle = closed_in_fixed_point(kernel);
        for n in 0..=8 {
            let expected = taylor_coefficient(&oracle, n);
            let got = kernel.coefficient(n);
            let rel = (got - expected).abs() / expected.abs();
            assert!(
                rel <= 1e-6,
                "{kernel} coefficient {n}: {got:.17} vs derivative {expected:.17} (rel {rel:.3e})"
            );
            worst_rel = worst_rel.max(rel);
        }
    }
    for n in 0..=100 {
        assert_eq!(
            KernelId::Trigh.coefficient(n).to_bits(),
            KernelId::Exp.coefficient(n).to_bits(),
            "hyperbolic and exponential coefficients must be identical at order {n}"
        );
    }
    println!(
        "criterion 2 PASS: 45 coefficients within 1e-6 of derivatives (worst rel {worst_rel:.3e}), \
         trigh ≡ exp through order 100"
    );
}

fn mean_errors_for(records: &[ResultRecord], kernel: KernelId, d: usize, dd: usize) -> Vec<f64> {
    let mut by_trial: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.kernel == kernel && r.d == d && r.feature_dims == dd)
        .map(|r| (r.trial, r.value))
        .collect();
    by_trial.sort_by_key(|&(t, _)| t);
    by_trial.into_iter().map(|(_, v)| v).collect()
}

/// Criterion 3: per kernel, the attention error strictly decreases from
/// D = 10 to D = 50 (paired one-sided t-test at 0.01 over 100 trials,
/// n = 100, d = 10), and error grows with the input dimension at D = 30.
#[test]
fn criterion_3_error_vs_feature_dims() {
    let _guard = exclusive();
    let cfg = ExperimentConfig::new(Experiment::ErrorSweep);
    assert_eq!((cfg.n_values[0], cfg.trials), (100, 100), "protocol axes");
    let records = run_error_sweep(&cfg).expect("error sweep runs");
    let mut min_t_margin = f64::INFINITY;
    for kernel in KERNELS {
        let coarse = mean_errors_for(&records, kernel, 10, 10);
        let fine = mean_errors_for(&records, kernel, 10, 50);
        assert_eq!(coarse.len(), 100);
        let test = stats::paired_one_sided(&coarse, &fine, 0.01);
        assert!(
            test.significant,
            "{kernel}: error(D=10) − error(D=50) not significantly positive \
             (t = {:.3}, critical = {:.3}, mean diff = {:.3e})",
            test.t_statistic, test.critical, test.mean_diff
        );
        min_t_margin = min_t_margin.min(test.t_statistic - test.critical);

        // Known failure: with whole-matrix pre-normalization the row norms
        // are ~1/√n independent of d, so degree-1 feature noise — and with
        // it the attention error — scales as 1/√d and shrinks as d grows.
        // The check asserts the opposite trend; see README, "Known failing
        // check".
        let wide = stats::mean(&mean_errors_for(&records, kernel, 200, 30));
        let narrow = stats::mean(&mean_errors_for(&records, kernel, 10, 30));
        assert!(
            wide > narrow,
            "{kernel}: error should grow with input dimension at D=30 \
             (d=200: {wide:.3e} vs d=10: {narrow:.3e})"
        );
    }
    println!(
        "criterion 3 PASS: error decreases in D for all kernels \
         (worst t-statistic margin over critical: {min_t_margin:.2}), and grows from d=10 to d=200"
    );
}

fn measured_speedup(records: &[ResultRecord], n: usize, dd: usize) -> f64 {
    records
        .iter()
        .find(|r| r.metric == "speedup" && r.n == n && r.feature_dims == dd)
        .map(|r| r.wall_time_s)
        .expect("speedup row exists for every grid cell")
}

/// Criterion 4: measured speedup exceeds 1 at (n=5000, D=16, d=50), grows
/// with n at D = 16, and shrinks as D grows at n = 5000; medians of 10 runs.
#[test]
fn criterion_4_speedup_trend() {
    let _guard = exclusive();
    let mut cfg = ExperimentConfig::new(Experiment::SpeedSweep);
    cfg.kernels = vec![KernelId::Exp];
    cfg.trials = 10;
    let records = run_speed_sweep(&cfg).expect("speed sweep runs");
    let s = |n, dd| measured_speedup(&records, n, dd);
    assert!(s(5000, 16) > 1.0, "speedup at (5000, 16) must exceed 1, got {:.2}", s(5000, 16));
    assert!(
        s(1000, 16) < s(3000, 16) && s(3000, 16) < s(5000, 16),
        "speedup must grow with n at D=16: {:.2}, {:.2}, {:.2}",
        s(1000, 16),
        s(3000, 16),
        s(5000, 16)
    );
    assert!(
        s(5000, 2) > s(5000, 16) && s(5000, 16) > s(5000, 120),
        "speedup must shrink as D grows at n=5000: {:.2}, {:.2}, {:.2}",
        s(5000, 2),
        s(5000, 16),
        s(5000, 120)
    );
    println!(
        "criterion 4 PASS: speedup(5000,16) = {:.1}x; n-trend {:.1} < {:.1} < {:.1}; \
         D-trend {:.1} > {:.1} > {:.1}",
        s(5000, 16),
        s(1000, 16),
        s(3000, 16),
        s(5000, 16),
        s(5000, 2),
        s(5000, 16),
        s(5000, 120)
    );
}

/// Criterion 5: with |V| ≤ 1, n = 8, d = 4 and 10⁴ maps, the empirical
/// exceedance probability sits below 2D·exp(−Dε²/(2d²)) at every grid point
/// where that bound is informative (< 1), for D ∈ {4, 16}.
#[test]
fn criterion_5_tail_bound() {
    let _guard = exclusive();
    let mut cfg = ExperimentConfig::new(Experiment::TailBound);
    cfg.trials = 10_000;
    let records = run_tail_bound(&cfg).expect("tail bound experiment runs");
    let grid_value = |dd: usize, g: usize, metric: &str| {
        records
            .iter()
            .find(|r| r.feature_dims == dd && r.trial == g && r.metric == metric)
            .map(|r| r.value)
            .expect("grid rows are complete")
    };
    let mut asserted = 0;
    let mut tightest = f64::INFINITY;
    for &dd in &cfg.feature_dims {
        for g in 0..24 {
            let bound = grid_value(dd, g, "tail_bound");
            if bound >= 1.0 {
                continue;
            }
            let empirical = grid_value(dd, g, "exceedance_probability");
            assert!(
                empirical <= bound,
                "D={dd}, ε={}: empirical exceedance {empirical:.4} breaks the bound {bound:.4}",
                grid_value(dd, g, "epsilon_grid")
            );
            asserted += 1;
            if bound - empirical < tightest {
                tightest = bound - empirical;
            }
        }
    }
    assert!(asserted > 0, "the grid must reach informative bounds");
    let ref_exceed = |dd: usize| {
        records
            .iter()
            .find(|r| r.feature_dims == dd && r.metric == "exceedance_at_reference_p90")
            .map(|r| r.value)
            .expect("reference rows exist")
    };
    assert!(
        ref_exceed(16) <= ref_exceed(4),
        "concentration should improve with D at the reference point: D=16 rate {} vs D=4 rate {}",
        ref_exceed(16),
        ref_exceed(4)
    );
    println!(
        "criterion 5 PASS: {asserted} informative grid points all below the bound \
         (tightest absolute margin {tightest:.4}); p90 exceedance {:.3} (D=16) ≤ {:.3} (D=4)",
        ref_exceed(16),
        ref_exceed(4)
    );
}

/// Criterion 6: three identities. A single-key feature attention returns the
/// value row to 1e-12 across 100 maps; exact attention weights are
/// row-stochastic to 1e-12; pre-normalization keeps every row norm below
/// 1 + 1e-12 on a thousand varied and degenerate inputs.
#[test]
fn criterion_6_algebraic_identities() {
    let _guard = exclusive();
    const TOL: f64 = 1e-12;

    // Single key: numerator and denominator share the ⟨Φq, Φk⟩ factor.
    let mut worst_single = 0.0f64;
    let mut rng = RngStream::new(60, 0);
    for round in 0..100 {
        let kernel = KERNELS[round % KERNELS.len()];
        let d = 8;
        let q = Matrix::from_rows(&(0..4).map(|_| rng.unit_ball_row(d)).collect::<Vec<_>>())
            .expect("q rows");
        let k = Matrix::from_rows(&[rng.unit_ball_row(d)]).expect("single key row");
        let v = rng.gaussian_matrix(1, 3).expect("value row");
        let input = AttentionInput::new(q, k, v.clone()).expect("shapes agree");
        let mut map_rng = RngStream::new(61, round as u64);
        let map = MaclaurinFeatureMap::sample(kernel, &FeatureMapParams::new(64, d), &mut map_rng)
            .expect("map samples");
        let approx = feature_attention(&map, &input, DenomPolicy::default()).expect("runs");
        for i in 0..4 {
            for c in 0..3 {
                let diff = (approx.output.get(i, c) - v.get(0, c)).abs();
                assert!(
                    diff <= TOL,
                    "map {round} ({kernel}): single-key output drifted from the value row by {diff:.3e}"
                );
                worst_single = worst_single.max(diff);
            }
        }
    }

    // Exact attention weights form a probability row.
    let mut worst_row: f64 = 0.0;
    for (i, kernel) in KERNELS.into_iter().enumerate() {
        let mut rng = RngStream::new(62, i as u64);
        let q = rng.gaussian_matrix(30, 6).expect("q");
        let k = rng.gaussian_matrix(30, 6).expect("k");
        let v = rng.gaussian_matrix(30, 6).expect("v");
        let (q_sbn, _) = pre_sbn(&q, 1e-13).expect("normalize q");
        let (k_sbn, _) = pre_sbn(&k, 1e-13).expect("normalize k");
        let input = AttentionInput::new(q_sbn, k_sbn, v).expect("shapes");
        let weights = attention_weights(kernel, &input).expect("weights");
        for r in 0..30 {
            let sum: f64 = weights.row(r).iter().sum();
            let drift = (sum - 1.0).abs();
            assert!(drift <= TOL, "{kernel} weight row {r} sums to {sum}, drift {drift:.3e}");
            worst_row = worst_row.max(drift);
        }
    }

    // Row norms after pre-normalization, across shapes, scales, and
    // degenerate contents.
    let mut worst_norm: f64 = 0.0;
    let mut inputs = 0;
    let mut rng = RngStream::new(63, 0);
    for i in 0..1000 {
        let rows = 1 + i % 9;
        let cols = 1 + (i / 9) % 7;
        let x = match i % 5 {
            0 => rng.gaussian_matrix(rows, cols).expect("gaussian"),
            1 => rng.gaussian_matrix(rows, cols).expect("gaussian").scale(1e8),
            2 => rng.gaussian_matrix(rows, cols).expect("gaussian").scale(1e-8),
            3 => Matrix::from_vec(rows, cols, vec![0.0; rows * cols]).expect("zeros"),
            _ => Matrix::from_vec(rows, cols, vec![7.25; rows * cols]).expect("constant"),
        };
        let (x_sbn, _) = pre_sbn(&x, 1e-13).expect("pre-normalization accepts any finite matrix");
        for r in 0..rows {
            let norm = x_sbn.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                norm <= 1.0 + TOL,
                "input {i} row {r}: norm {norm} escapes the unit ball"
            );
            worst_norm = worst_norm.max(norm);
        }
        inputs += 1;
    }
    println!(
        "criterion 6 PASS: single-key identity ≤ {worst_single:.2e}, row sums within \
         {worst_row:.2e} of 1, worst row norm {worst_norm:.12} over {inputs} inputs"
    );
}

/// Criterion 7: the post-scaling fit recovers planted parameters to 1e-6;
/// the restoration exponent is exactly 1 on unit statistics and the
/// normalizer ratio exactly 1 with a single key; the n > 1 identity residual
/// is computed and reported without assertion.
#[test]
fn criterion_7_restoration() {
    let _guard = exclusive();
    let mut rng = RngStream::new(70, 0);
    let mut worst_gamma = 0.0f64;
    let mut worst_beta = 0.0f64;
    for round in 0..25 {
        let gamma = (rng.uniform() * 3.0 - 1.5).exp();
        let beta = 0.3 + rng.uniform() * 2.2;
        let planted = PostSbnParams::new(gamma, beta).expect("valid parameters");
        let base = rng.gaussian_matrix(12, 7).expect("base matrix");
        let target = post_sbn(&base, &planted);
        let fitted = fit_post_params(&base, &target).expect("fit succeeds");
        let gamma_err = (fitted.gamma() - gamma).abs() / gamma.max(1.0);
        let beta_err = (fitted.beta() - beta).abs();
        assert!(
            gamma_err <= 1e-6 && beta_err <= 1e-6,
            "round {round}: fit drifted, γ err {gamma_err:.3e}, β err {beta_err:.3e}"
        );
        worst_gamma = worst_gamma.max(gamma_err);
        worst_beta = worst_beta.max(beta_err);
    }

    // Unit statistics: σ + ε = 1 per column with everything dyadic, Frobenius
    // norms exactly 1, so r must be the exact float 1.0.
    let unit = SbnStats { mu: vec![0.0; 4], sigma: vec![0.5; 4], scalar_norm: 1.0, epsilon: 0.5 };
    let r = restoration_r_from_stats(&unit, &unit);
    assert_eq!(r, 1.0, "unit statistics must restore with exponent exactly 1, got {r}");

    // Single key: the normalizer ratio's numerator and denominator coincide.
    let q = Matrix::from_rows(&(0..5).map(|_| rng.unit_ball_row(4)).collect::<Vec<_>>())
        .expect("queries");
    let k = rng.gaussian_matrix(1, 4).expect("single key").scale(0.5);
    let v = rng.gaussian_matrix(1, 3).expect("value");
    let params = ideal_restoration_params(
        &AttentionInput::new(q, k, v).expect("shapes"),
        1e-13,
    )
    .expect("restoration parameters");
    for i in 0..5 {
        assert_eq!(params.t.get(i, 0), 1.0, "query {i}: t must be exactly 1 with one key");
    }

    // The general identity residual is a diagnostic: reported, not asserted.
    let q = Matrix::from_rows(&(0..8).map(|_| rng.unit_ball_row(6)).collect::<Vec<_>>())
        .expect("q");
    let k = Matrix::from_rows(&(0..8).map(|_| rng.unit_ball_row(6)).collect::<Vec<_>>())
        .expect("k");
    let v = rng.gaussian_matrix(8, 6).expect("v");
    let input = AttentionInput::new(q, k, v).expect("shapes");
    let scalar = restoration_residual(&input, 1e-13, VarianceReduction::ScalarMean)
        .expect("residual computes");
    let per_column = restoration_residual(&input, 1e-13, VarianceReduction::PerColumn)
        .expect("residual computes");
    println!(
        "criterion 7 PASS: fit errors ≤ (γ {worst_gamma:.2e}, β {worst_beta:.2e}) of 1e-6; \
         r = 1 and t = 1 exact; n>1 residuals (diagnostic only): scalar {scalar:.4}, \
         per-column {per_column:.4}"
    );
}

fn cli_csv(args: &[&str]) -> String {
    let output = Command::new(env!("CARGO_BIN_EXE_schoenbat"))
        .args(args)
        .output()
        .expect("binary launches");
    assert!(
        output.status.success(),
        "subcommand {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("CSV output is UTF-8")
}

/// Criterion 8: every subcommand, run twice with the same seed, produces
/// byte-identical CSV once the wall-time column is removed.
#[test]
fn criterion_8_determinism() {
    let _guard = exclusive();
    let invocations: [&[&str]; 5] = [
        &["error-sweep", "--kernel", "exp,sqrt", "--n", "12", "--d", "5,7", "--D", "3,6", "--trials", "4"],
        &["speed-sweep", "--kernel", "exp", "--n", "64,128", "--d", "8", "--D", "4", "--trials", "2"],
        &["unbiasedness", "--kernel", "inv", "--trials", "50"],
        &["tail-bound", "--trials", "60"],
        &["demo", "--seed", "5"],
    ];
    for args in invocations {
        let first = strip_wall_times(&cli_csv(args));
        let second = strip_wall_times(&cli_csv(args));
        assert!(!first.is_empty() && first.contains('\n'), "subcommand {args:?} emitted CSV");
        assert_eq!(first, second, "subcommand {args:?} is not byte-deterministic");
    }
    println!("criterion 8 PASS: all 5 subcommands byte-identical across repeat runs");
}
