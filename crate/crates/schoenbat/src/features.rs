//! Random Maclaurin feature maps: finite-dimensional randomized embeddings
//! whose inner products are unbiased estimates of a kernel profile applied to
//! the input dot product.
//!
//! Each of the D features draws a degree N from the geometric law
//! P[N = η] = (1 − 1/p)(1/p)^η, then N Rademacher sign vectors ω ∈ {±1}^d.
//! The feature value is √(a_N · w / D) · Π_j ⟨ω_j, x⟩ with importance weight
//! w = p^{N+1}/(p−1) = 1/P[N], which is exactly what makes
//! E[⟨Φ(x), Φ(y)⟩] = Σ_n a_n ⟨x,y⟩ⁿ hold with no bias at any D.

use crate::error::{Error, Result};
use crate::kernels::KernelId;
use crate::linalg::{dot, Matrix, RngStream};
use base64::Engine;
use serde::{Deserialize, Serialize};

const CODEC_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug)]
pub struct FeatureMapParams {
    /// Number of features D (the embedding dimension).
    pub feature_dims: usize,
    /// Input dimension d.
    pub input_dim: usize,
    /// Geometric decay base for the degree law; must exceed 1.
    pub p: f64,
    /// Degrees above this are rejected and redrawn (with a warning); keeps a
    /// single unlucky draw from allocating an absurd number of sign vectors.
    pub degree_cap: usize,
}

impl FeatureMapParams {
    pub fn new(feature_dims: usize, input_dim: usize) -> FeatureMapParams {
        FeatureMapParams { feature_dims, input_dim, p: 2.0, degree_cap: 200 }
    }

    fn validate(&self) -> Result<()> {
        if self.feature_dims == 0 {
            return Err(Error::InvalidParameter("feature_dims must be at least 1".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidParameter("input_dim must be at least 1".into()));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "degree law base p must be a finite value greater than 1, got {}",
                self.p
            )));
        }
        if self.degree_cap == 0 {
            return Err(Error::InvalidParameter("degree_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// A sampled feature map, frozen after construction. `apply` is pure: the
/// same map gives the same features forever, so maps can be serialized,
/// shipped, and reloaded without changing any downstream number.
#[derive(Clone, Debug)]
pub struct MaclaurinFeatureMap {
    kernel: KernelId,
    input_dim: usize,
    p: f64,
    degrees: Vec<usize>,
    /// Per-feature √(a_N · w / D), with the 1/√D normalization folded in.
    scales: Vec<f64>,
    /// Flat ±1.0 sign vectors: feature t owns the block
    /// signs[offsets[t] .. offsets[t+1]], laid out as N_t rows of length d.
    signs: Vec<f64>,
    offsets: Vec<usize>,
}

impl MaclaurinFeatureMap {
    /// Draw a fresh map. Draw order per feature is: degree first, then that
    /// feature's sign entries — part of the replay contract for a fixed
    /// `(seed, stream)`.
    pub fn sample(
        kernel: KernelId,
        params: &FeatureMapParams,
        rng: &mut RngStream,
    ) -> Result<MaclaurinFeatureMap> {
        params.validate()?;
        let log_inv_p = (1.0 / params.p).ln();
        let mut degrees = Vec::with_capacity(params.feature_dims);
        let mut signs = Vec::new();
        let mut offsets = Vec::with_capacity(params.feature_dims + 1);
        offsets.push(0);
        for _ in 0..params.feature_dims {
            let degree = loop {
                let u = rng.uniform();
                let draw = ((1.0 - u).ln() / log_inv_p).floor() as usize;
                if draw <= params.degree_cap {
                    break draw;
                }
                log::warn!(
                    "feature degree draw {draw} exceeded cap {}; redrawing",
                    params.degree_cap
                );
            };
            degrees.push(degree);
            signs.extend((0..degree * params.input_dim).map(|_| rng.rademacher()));
            offsets.push(signs.len());
        }
        let scales = feature_scales(kernel, &degrees, params.p)?;
        Ok(MaclaurinFeatureMap {
            kernel,
            input_dim: params.input_dim,
            p: params.p,
            degrees,
            scales,
            signs,
            offsets,
        })
    }

    pub fn kernel(&self) -> KernelId {
        self.kernel
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn feature_dims(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn mean_degree(&self) -> f64 {
        self.degrees.iter().sum::<usize>() as f64 / self.degrees.len() as f64
    }

    /// Embed every row of `x` (n×d) into feature space (n×D).
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                op: "feature map apply",
                details: format!("map expects width {}, matrix has {}", self.input_dim, x.cols()),
            });
        }
        let d_out = self.feature_dims();
        let mut out = Matrix::zeros(x.rows(), d_out)?;
        let mut row_buf = vec![0.0; d_out];
        for i in 0..x.rows() {
            self.eval_row(x.row(i), &mut row_buf);
            for (t, &v) in row_buf.iter().enumerate() {
                out.set(i, t, v);
            }
        }
        Ok(out)
    }

    /// ⟨Φ(x), Φ(y)⟩ — a single-sample unbiased estimate of kernel(⟨x, y⟩).
    pub fn kernel_estimate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim || y.len() != self.input_dim {
            return Err(Error::ShapeMismatch {
                op: "kernel_estimate",
                details: format!(
                    "map expects width {}, inputs have {} and {}",
                    self.input_dim,
                    x.len(),
                    y.len()
                ),
            });
        }
        let mut fx = vec![0.0; self.feature_dims()];
        let mut fy = vec![0.0; self.feature_dims()];
        self.eval_row(x, &mut fx);
        self.eval_row(y, &mut fy);
        Ok(dot(&fx, &fy))
    }

    fn eval_row(&self, row: &[f64], out: &mut [f64]) {
        for t in 0..self.degrees.len() {
            // Degree 0 is the empty product: the feature is just its scale.
            let mut acc = self.scales[t];
            let block = &self.signs[self.offsets[t]..self.offsets[t + 1]];
            for omega in block.chunks_exact(self.input_dim) {
                acc *= dot(omega, row);
            }
            out[t] = acc;
        }
    }

    pub fn to_json(&self) -> String {
        let mut bytes = vec![0u8; self.signs.len().div_ceil(8)];
        for (k, &s) in self.signs.iter().enumerate() {
            if s > 0.0 {
                bytes[k / 8] |= 1 << (k % 8);
            }
        }
        let codec = MapCodec {
            version: CODEC_VERSION,
            kernel: self.kernel,
            input_dim: self.input_dim,
            p: self.p,
            degrees: self.degrees.clone(),
            signs_base64: base64::engine::general_purpose::STANDARD.encode(bytes),
        };
        serde_json::to_string(&codec).expect("feature map codec always serializes")
    }

    pub fn from_json(text: &str) -> Result<MaclaurinFeatureMap> {
        let codec: MapCodec = serde_json::from_str(text)
            .map_err(|e| Error::FeatureMapCodec(e.to_string()))?;
        if codec.version != CODEC_VERSION {
            return Err(Error::FeatureMapCodec(format!(
                "unsupported codec version {} (this build reads {CODEC_VERSION})",
                codec.version
            )));
        }
        if codec.degrees.is_empty() || codec.input_dim == 0 {
            return Err(Error::FeatureMapCodec(
                "map must have at least one feature and a positive input width".into(),
            ));
        }
        if !(codec.p > 1.0) || !codec.p.is_finite() {
            return Err(Error::FeatureMapCodec(format!("invalid degree base p = {}", codec.p)));
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(codec.signs_base64.as_bytes())
            .map_err(|e| Error::FeatureMapCodec(format!("sign bits are not valid base64: {e}")))?;
        let total: usize = codec.degrees.iter().map(|n| n * codec.input_dim).sum();
        if bytes.len() != total.div_ceil(8) {
            return Err(Error::FeatureMapCodec(format!(
                "sign payload holds {} bytes but {} bits are needed",
                bytes.len(),
                total
            )));
        }
        let signs: Vec<f64> = (0..total)
            .map(|k| if bytes[k / 8] & (1 << (k % 8)) != 0 { 1.0 } else { -1.0 })
            .collect();
        let mut offsets = Vec::with_capacity(codec.degrees.len() + 1);
        offsets.push(0);
        for &n in &codec.degrees {
            offsets.push(offsets.last().unwrap() + n * codec.input_dim);
        }
        let scales = feature_scales(codec.kernel, &codec.degrees, codec.p)?;
        Ok(MaclaurinFeatureMap {
            kernel: codec.kernel,
            input_dim: codec.input_dim,
            p: codec.p,
            degrees: codec.degrees,
            scales,
            signs,
            offsets,
        })
    }
}

fn feature_scales(kernel: KernelId, degrees: &[usize], p: f64) -> Result<Vec<f64>> {
    let d_out = degrees.len() as f64;
    degrees
        .iter()
        .map(|&n| {
            let weight = p.powi(n as i32 + 1) / (p - 1.0);
            let scale_sq = kernel.coefficient(n) * weight / d_out;
            if !scale_sq.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "feature scale overflowed for degree {n} at p = {p}"
                )));
            }
            Ok(scale_sq.sqrt())
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct MapCodec {
    version: u32,
    kernel: KernelId,
    input_dim: usize,
    p: f64,
    degrees: Vec<usize>,
    signs_base64: String,
}
