//! Approximation error of feature attention against the exact kernelized
//! form, on one fixed input, as the feature dimension D grows. Q and K are
//! normalized first so the finite-radius kernel stays inside its domain.
//!
//! Run with: cargo run --example attention_error

use schoenbat::attention::{exact_attention, feature_attention, AttentionInput, DenomPolicy};
use schoenbat::features::{FeatureMapParams, MaclaurinFeatureMap};
use schoenbat::kernels::KernelId;
use schoenbat::linalg::RngStream;
use schoenbat::sbn::pre_sbn;
use schoenbat::Result;

fn main() -> Result<()> {
    let kernel = KernelId::Logi;
    let (n, d) = (64, 16);
    let epsilon = 1e-13;
    let maps_per_dim = 20;

    let mut rng = RngStream::new(11, 0);
    let q = rng.gaussian_matrix(n, d)?;
    let k = rng.gaussian_matrix(n, d)?;
    let v = rng.gaussian_matrix(n, d)?;
    let (q_sbn, _) = pre_sbn(&q, epsilon)?;
    let (k_sbn, _) = pre_sbn(&k, epsilon)?;
    let input = AttentionInput::new(q_sbn, k_sbn, v)?;
    let exact = exact_attention(kernel, &input)?;

    println!("{kernel} attention, n = {n}, d = {d}, {maps_per_dim} maps per D");
    println!("{:>6}  {:>14}  {:>12}", "D", "mean abs error", "clamped rows");
    for dd in [4, 8, 16, 32, 64, 128] {
        let mut total_err = 0.0;
        let mut clamped = 0;
        for trial in 0..maps_per_dim {
            let mut map_rng = RngStream::new(11, 1000 + (dd * 100 + trial) as u64);
            let map = MaclaurinFeatureMap::sample(
                kernel,
                &FeatureMapParams::new(dd, d),
                &mut map_rng,
            )?;
            let approx = feature_attention(&map, &input, DenomPolicy::default())?;
            total_err += exact.mean_abs_diff(&approx.output)?;
            clamped += approx.degenerate_rows;
        }
        println!("{dd:>6}  {:>14.6e}  {clamped:>12}", total_err / maps_per_dim as f64);
    }
    println!("\nthe error shrinks roughly like 1/√D; tiny D occasionally clamps a denominator");
    Ok(())
}
