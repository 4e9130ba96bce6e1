//! The five admissible kernel profiles: functions with nonnegative Maclaurin
//! coefficients, applied to scaled query–key dot products.
//!
//! Each profile carries three synchronized views that the rest of the crate
//! relies on agreeing with one another:
//! - `coefficient(n)`: the n-th Maclaurin coefficient a_n ≥ 0,
//! - `closed_form(z)`: the analytic value inside the open domain,
//! - `series(z, terms)`: the truncated power sum (diagnostics and tests).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    /// exp(z) — softmax's kernel.
    Exp,
    /// 1/(1−z), |z| < 1.
    Inv,
    /// 1 − ln(1−z), |z| < 1.
    Logi,
    /// sinh(z) + cosh(z), identical to exp(z) term by term.
    Trigh,
    /// 2 − √(1−z), |z| < 1.
    Sqrt,
}

pub const KERNELS: [KernelId; 5] =
    [KernelId::Exp, KernelId::Inv, KernelId::Logi, KernelId::Trigh, KernelId::Sqrt];

impl KernelId {
    pub fn name(self) -> &'static str {
        match self {
            KernelId::Exp => "exp",
            KernelId::Inv => "inv",
            KernelId::Logi => "logi",
            KernelId::Trigh => "trigh",
            KernelId::Sqrt => "sqrt",
        }
    }

    /// Radius of the open interval the kernel is defined on; `None` means the
    /// whole real line.
    pub fn domain_radius(self) -> Option<f64> {
        match self {
            KernelId::Exp | KernelId::Trigh => None,
            KernelId::Inv | KernelId::Logi | KernelId::Sqrt => Some(1.0),
        }
    }

    pub fn contains(self, z: f64) -> bool {
        z.is_finite() && self.domain_radius().map_or(true, |r| z.abs() < r)
    }

    /// n-th Maclaurin coefficient. All five profiles have a_n > 0 for every n
    /// (they can underflow to 0.0 in f64 for factorial decay at large n).
    pub fn coefficient(self, n: usize) -> f64 {
        match self {
            // a_0 = 1, a_{k+1} = a_k / (k+1)  ⇒  1/n!
            KernelId::Exp | KernelId::Trigh => {
                let mut a = 1.0;
                for k in 0..n {
                    a /= (k + 1) as f64;
                }
                a
            }
            KernelId::Inv => 1.0,
            KernelId::Logi => {
                if n == 0 {
                    1.0
                } else {
                    1.0 / n as f64
                }
            }
            // 2−√(1−z): a_0 = 1, a_1 = 1/2, a_{k+1} = a_k (2k−1) / (2(k+1)).
            KernelId::Sqrt => {
                if n == 0 {
                    return 1.0;
                }
                let mut a = 0.5;
                for k in 1..n {
                    a *= (2 * k - 1) as f64 / (2 * (k + 1)) as f64;
                }
                a
            }
        }
    }

    pub fn closed_form(self, z: f64) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::OutsideDomain {
                kernel: self,
                value: z,
                radius: self.domain_radius().unwrap_or(f64::INFINITY),
            });
        }
        Ok(match self {
            KernelId::Exp => z.exp(),
            KernelId::Inv => 1.0 / (1.0 - z),
            // ln_1p keeps full precision for z near 0.
            KernelId::Logi => 1.0 - (-z).ln_1p(),
            KernelId::Trigh => z.sinh() + z.cosh(),
            KernelId::Sqrt => 2.0 - (1.0 - z).sqrt(),
        })
    }

    /// Truncated Maclaurin sum Σ_{n<terms} a_n zⁿ, accumulated lowest order first.
    pub fn series(self, z: f64, terms: usize) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::OutsideDomain {
                kernel: self,
                value: z,
                radius: self.domain_radius().unwrap_or(f64::INFINITY),
            });
        }
        let mut sum = 0.0;
        let mut z_pow = 1.0;
        for n in 0..terms {
            sum += self.coefficient(n) * z_pow;
            z_pow *= z;
        }
        Ok(sum)
    }

    /// Nominal flop cost of one closed-form evaluation, for the analytic cost
    /// model (transcendental calls counted as one flop each).
    pub fn eval_flop_cost(self) -> f64 {
        match self {
            KernelId::Exp => 1.0,
            KernelId::Inv => 2.0,
            KernelId::Logi => 3.0,
            KernelId::Trigh => 3.0,
            KernelId::Sqrt => 3.0,
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<KernelId> {
        KERNELS
            .iter()
            .copied()
            .find(|k| s.eq_ignore_ascii_case(k.name()))
            .ok_or_else(|| Error::UnknownKernel(s.to_string()))
    }
}
