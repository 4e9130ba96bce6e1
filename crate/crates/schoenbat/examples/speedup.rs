//! Quadratic exact attention against the linear feature pipeline: measured
//! wall time next to the analytic flop model. Build with optimizations or
//! the numbers mostly measure the compiler.
//!
//! Run with: cargo run --release --example speedup

use std::hint::black_box;

use schoenbat::attention::{exact_attention, flop_count, AttentionInput, DenomPolicy};
use schoenbat::features::{FeatureMapParams, MaclaurinFeatureMap};
use schoenbat::harness::timing::measure_median_seconds;
use schoenbat::kernels::KernelId;
use schoenbat::linalg::RngStream;
use schoenbat::sbn::{pre_sbn, schoenbat, PostSbnParams};
use schoenbat::Result;

fn main() -> Result<()> {
    let kernel = KernelId::Exp;
    let (d, dd) = (32, 16);
    let epsilon = 1e-13;
    let trials = 5;
    println!("{kernel} attention, d = {d}, D = {dd}, median of {trials} runs");
    println!("{:>6}  {:>10}  {:>10}  {:>9}  {:>9}", "n", "exact s", "approx s", "measured", "flops");
    for (i, n) in [256usize, 512, 1024, 2048].into_iter().enumerate() {
        let mut rng = RngStream::new(17, i as u64);
        let q = rng.gaussian_matrix(n, d)?;
        let k = rng.gaussian_matrix(n, d)?;
        let v = rng.gaussian_matrix(n, d)?;
        let (q_sbn, _) = pre_sbn(&q, epsilon)?;
        let (k_sbn, _) = pre_sbn(&k, epsilon)?;
        let normalized = AttentionInput::new(q_sbn, k_sbn, v.clone())?;
        let raw = AttentionInput::new(q, k, v)?;
        let mut map_rng = RngStream::new(17, 100 + i as u64);
        let map = MaclaurinFeatureMap::sample(kernel, &FeatureMapParams::new(dd, d), &mut map_rng)?;
        let exact_s = measure_median_seconds(trials, || {
            black_box(exact_attention(kernel, &normalized).expect("exact attention"));
        });
        let identity = PostSbnParams::identity();
        let approx_s = measure_median_seconds(trials, || {
            black_box(
                schoenbat(kernel, &raw, &map, &identity, epsilon, DenomPolicy::default())
                    .expect("feature pipeline"),
            );
        });
        let flops = flop_count(kernel, n, d, dd, map.mean_degree());
        println!(
            "{n:>6}  {exact_s:>10.6}  {approx_s:>10.6}  {:>8.2}x  {:>8.2}x",
            exact_s / approx_s,
            flops.ratio()
        );
    }
    println!("\nthe exact path grows with n²; the feature pipeline grows with n");
    Ok(())
}
