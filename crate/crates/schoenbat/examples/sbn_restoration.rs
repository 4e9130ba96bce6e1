//! The scaling batch normalization seams: pre-normalization puts every row
//! inside the unit ball, the post-scaling family composes in closed form and
//! its parameters can be fit back from data, and the softmax restoration
//! parameters hit their documented exact cases.
//!
//! Run with: cargo run --example sbn_restoration

use schoenbat::attention::{exact_attention, AttentionInput};
use schoenbat::kernels::KernelId;
use schoenbat::linalg::{Matrix, RngStream};
use schoenbat::sbn::{
    fit_post_params, ideal_restoration_params, post_sbn, pre_sbn, restoration_r_from_stats,
    restoration_residual, PostSbnParams, SbnStats, VarianceReduction,
};
use schoenbat::Result;

fn main() -> Result<()> {
    let epsilon = 1e-13;
    let mut rng = RngStream::new(3, 0);

    // Pre-normalization bounds every row.
    let x = rng.gaussian_matrix(6, 5)?.scale(40.0);
    let (x_sbn, stats) = pre_sbn(&x, epsilon)?;
    let worst = (0..6)
        .map(|i| x_sbn.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    println!("pre-normalization: worst row norm {worst:.12} (never exceeds 1)");
    println!("  column means ≈ {:?}", &stats.mu[..2]);

    // The post-scaling family composes: (γ₂, β₂) ∘ (γ₁, β₁) is again a member.
    let first = PostSbnParams::new(2.0, 0.5)?;
    let second = PostSbnParams::new(3.0, 2.0)?;
    let composed = first.then(&second);
    println!(
        "\ncomposition: (γ=2, β=0.5) then (γ=3, β=2) = (γ={}, β={})",
        composed.gamma(),
        composed.beta()
    );
    let y = post_sbn(&post_sbn(&x_sbn, &first), &second);
    let direct = post_sbn(&x_sbn, &composed);
    println!("  max difference vs direct application: {:.3e}", y.max_abs_diff(&direct)?);

    // Fitting recovers planted parameters from the data alone.
    let planted = PostSbnParams::new(1.9, 0.65)?;
    let target = post_sbn(&x_sbn, &planted);
    let fitted = fit_post_params(&x_sbn, &target)?;
    println!(
        "\nfit recovery: planted (γ=1.9, β=0.65), fitted (γ={:.12}, β={:.12})",
        fitted.gamma(),
        fitted.beta()
    );

    // Documented exact cases of the restoration parameters.
    let unit = SbnStats { mu: vec![0.0; 4], sigma: vec![0.5; 4], scalar_norm: 1.0, epsilon: 0.5 };
    println!("\nrestoration r on unit statistics: {}", restoration_r_from_stats(&unit, &unit));
    let q = Matrix::from_rows(&(0..5).map(|_| rng.unit_ball_row(4)).collect::<Vec<_>>())?;
    let k = rng.gaussian_matrix(1, 4)?.scale(0.3);
    let v = rng.gaussian_matrix(1, 3)?;
    let single_key = AttentionInput::new(q, k.clone(), v.clone())?;
    let params = ideal_restoration_params(&single_key, epsilon)?;
    println!("restoration t with a single key: {:?} (exactly 1 per query)", params.t.row(0));
    let attn = exact_attention(KernelId::Exp, &single_key)?;
    println!("  single-key attention row 0 = {:?}  (the lone value row)", attn.row(0));
    println!("  value row itself          = {:?}", v.row(0));

    // For n > 1 the identity is a diagnostic, not an equality: the residual
    // is reported, never asserted.
    let q = Matrix::from_rows(&(0..6).map(|_| rng.unit_ball_row(4)).collect::<Vec<_>>())?;
    let k = Matrix::from_rows(&(0..6).map(|_| rng.unit_ball_row(4)).collect::<Vec<_>>())?;
    let v = rng.gaussian_matrix(6, 3)?;
    let input = AttentionInput::new(q, k, v)?;
    for reduction in [VarianceReduction::ScalarMean, VarianceReduction::PerColumn] {
        let residual = restoration_residual(&input, epsilon, reduction)?;
        println!("restoration residual ({reduction:?}): {residual:.6}");
    }
    Ok(())
}
