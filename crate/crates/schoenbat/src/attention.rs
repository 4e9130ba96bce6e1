//! Attention with a kernel profile in place of softmax's exponential, plus the
//! linear-time feature-space approximation of it.
//!
//! Exact path: out_i = Σ_j K(⟨q_i,k_j⟩/√d)·v_j / Σ_j K(⟨q_i,k_j⟩/√d), cost
//! Θ(n²d). Approximate path: queries and keys are first scaled by d^(-1/4)
//! (splitting the 1/√d between the two sides of the dot product), embedded by
//! a random Maclaurin map, and attention is re-associated as
//! Φ_Q (Φ_Kᵀ V) / Φ_Q (Φ_Kᵀ 1), cost Θ(ndD).

use crate::error::{Error, Result};
use crate::features::MaclaurinFeatureMap;
use crate::kernels::KernelId;
use crate::linalg::{dot, Matrix};

/// Query/key/value triple with the shape rules enforced once, up front:
/// queries and keys share a width, keys and values share a row count.
#[derive(Clone, Debug)]
pub struct AttentionInput {
    q: Matrix,
    k: Matrix,
    v: Matrix,
}

impl AttentionInput {
    pub fn new(q: Matrix, k: Matrix, v: Matrix) -> Result<AttentionInput> {
        if q.cols() != k.cols() {
            return Err(Error::ShapeMismatch {
                op: "attention input",
                details: format!("queries are {} wide, keys {}", q.cols(), k.cols()),
            });
        }
        if k.rows() != v.rows() {
            return Err(Error::ShapeMismatch {
                op: "attention input",
                details: format!("{} keys vs {} value rows", k.rows(), v.rows()),
            });
        }
        Ok(AttentionInput { q, k, v })
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn k(&self) -> &Matrix {
        &self.k
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn queries(&self) -> usize {
        self.q.rows()
    }

    pub fn context(&self) -> usize {
        self.k.rows()
    }

    pub fn width(&self) -> usize {
        self.q.cols()
    }
}

/// What to do when an approximate-path denominator lands within `guard` of
/// zero (possible because feature values, unlike kernel values, may be
/// negative).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DenomPolicy {
    /// Replace the denominator with sign(denom)·guard (sign of 0 counts as +)
    /// and report the row in [`ApproxAttention::degenerate_rows`].
    Clamp { guard: f64 },
    /// Fail the whole call with `DegenerateDenominator`.
    Error { guard: f64 },
}

impl Default for DenomPolicy {
    fn default() -> DenomPolicy {
        DenomPolicy::Clamp { guard: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct ApproxAttention {
    pub output: Matrix,
    /// Number of query rows whose denominator was clamped.
    pub degenerate_rows: usize,
}

/// Exact kernelized attention, streamed one query row at a time — never
/// materializes the n×n weight matrix.
pub fn exact_attention(kernel: KernelId, input: &AttentionInput) -> Result<Matrix> {
    let inv_sqrt_d = 1.0 / (input.width() as f64).sqrt();
    let dv = input.v().cols();
    let mut out = Matrix::zeros(input.queries(), dv)?;
    let mut numer = vec![0.0; dv];
    for i in 0..input.queries() {
        numer.iter_mut().for_each(|x| *x = 0.0);
        let mut denom = 0.0;
        let q_row = input.q().row(i);
        for j in 0..input.context() {
            let z = dot(q_row, input.k().row(j)) * inv_sqrt_d;
            let w = kernel.closed_form(z)?;
            denom += w;
            for (acc, &v) in numer.iter_mut().zip(input.v().row(j)) {
                *acc += w * v;
            }
        }
        // Every profile is strictly positive on its domain, so denom > 0.
        for (c, &acc) in numer.iter().enumerate() {
            out.set(i, c, acc / denom);
        }
    }
    Ok(out)
}

/// The n_q×n_k row-stochastic weight matrix of the exact path. Quadratic
/// memory — intended for diagnostics and tests, not the hot path.
pub fn attention_weights(kernel: KernelId, input: &AttentionInput) -> Result<Matrix> {
    let inv_sqrt_d = 1.0 / (input.width() as f64).sqrt();
    let mut out = Matrix::zeros(input.queries(), input.context())?;
    for i in 0..input.queries() {
        let q_row = input.q().row(i);
        let mut denom = 0.0;
        for j in 0..input.context() {
            let z = dot(q_row, input.k().row(j)) * inv_sqrt_d;
            let w = kernel.closed_form(z)?;
            out.set(i, j, w);
            denom += w;
        }
        for j in 0..input.context() {
            out.set(i, j, out.get(i, j) / denom);
        }
    }
    Ok(out)
}

/// Softmax attention with the usual row-max shift. Mathematically identical
/// to `exact_attention(KernelId::Exp, …)`; numerically it survives logits far
/// beyond exp's f64 overflow point.
pub fn softmax_attention(input: &AttentionInput) -> Result<Matrix> {
    let inv_sqrt_d = 1.0 / (input.width() as f64).sqrt();
    let dv = input.v().cols();
    let mut out = Matrix::zeros(input.queries(), dv)?;
    let mut logits = vec![0.0; input.context()];
    let mut numer = vec![0.0; dv];
    for i in 0..input.queries() {
        let q_row = input.q().row(i);
        for (j, slot) in logits.iter_mut().enumerate() {
            *slot = dot(q_row, input.k().row(j)) * inv_sqrt_d;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        numer.iter_mut().for_each(|x| *x = 0.0);
        let mut denom = 0.0;
        for (j, &z) in logits.iter().enumerate() {
            let w = (z - max).exp();
            denom += w;
            for (acc, &v) in numer.iter_mut().zip(input.v().row(j)) {
                *acc += w * v;
            }
        }
        for (c, &acc) in numer.iter().enumerate() {
            out.set(i, c, acc / denom);
        }
    }
    Ok(out)
}

/// Feature-space attention: Θ(ndD) end to end.
pub fn feature_attention(
    map: &MaclaurinFeatureMap,
    input: &AttentionInput,
    policy: DenomPolicy,
) -> Result<ApproxAttention> {
    let d_in = input.width() as f64;
    let pre_scale = d_in.powf(-0.25);
    let phi_q = map.apply(&input.q().scale(pre_scale))?;
    let phi_k = map.apply(&input.k().scale(pre_scale))?;

    let dims = map.feature_dims();
    let dv = input.v().cols();
    // M = Φ_Kᵀ V accumulated as rank-one updates; z = Φ_Kᵀ 1 as running sums.
    let mut m = Matrix::zeros(dims, dv)?;
    let mut z = vec![0.0; dims];
    for j in 0..input.context() {
        let k_feats = phi_k.row(j);
        m.accumulate_outer(k_feats, input.v().row(j))?;
        for (acc, &f) in z.iter_mut().zip(k_feats) {
            *acc += f;
        }
    }

    let numer = phi_q.matmul(&m)?;
    let (guard, error_out) = match policy {
        DenomPolicy::Clamp { guard } => (guard, false),
        DenomPolicy::Error { guard } => (guard, true),
    };
    let mut out = Matrix::zeros(input.queries(), dv)?;
    let mut degenerate_rows = 0;
    for i in 0..input.queries() {
        let raw = dot(phi_q.row(i), &z);
        let denom = if raw.abs() < guard {
            if error_out {
                return Err(Error::DegenerateDenominator { row: i, guard });
            }
            degenerate_rows += 1;
            if raw < 0.0 {
                -guard
            } else {
                guard
            }
        } else {
            raw
        };
        for c in 0..dv {
            out.set(i, c, numer.get(i, c) / denom);
        }
    }
    Ok(ApproxAttention { output: out, degenerate_rows })
}

/// Analytic flop counts for both attention paths.
///
/// The model charges 2L flops per length-L dot product, one per scalar
/// multiply/add/divide, and a nominal per-kernel evaluation cost; value width
/// is taken equal to `d`. The exact count is kept purely quadratic in n (the
/// trailing O(n·d) normalization divides are left out) so that doubling n
/// exactly quadruples it; every approximate-path term is linear in n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlopCount {
    pub exact: f64,
    pub approx: f64,
}

impl FlopCount {
    /// Predicted speedup of the feature path.
    pub fn ratio(&self) -> f64 {
        self.exact / self.approx
    }
}

pub fn flop_count(
    kernel: KernelId,
    n: usize,
    d: usize,
    feature_dims: usize,
    mean_degree: f64,
) -> FlopCount {
    let (n, d, dims) = (n as f64, d as f64, feature_dims as f64);
    let exact = n * n * (4.0 * d + 2.0 + kernel.eval_flop_cost());
    let approx = 2.0 * n * d // pre-scaling of Q and K
        + 2.0 * n * dims * (mean_degree * (2.0 * d + 1.0) + 1.0) // feature evaluation
        + 2.0 * n * dims * d + n * dims // ΦKᵀV accumulation and column sums
        + 2.0 * n * dims * d // numerator ΦQ·M
        + 2.0 * n * dims // denominators
        + n * d; // final divides
    FlopCount { exact, approx }
}
