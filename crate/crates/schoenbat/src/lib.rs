//! Kernelized dot-product attention, linear-time random-feature approximation
//! of it, and the scaling batch normalization that keeps bounded-domain
//! kernels fed with in-domain inputs — plus a measurement harness for the
//! claims made about the combination: unbiasedness, error decay in the
//! feature count, concentration tail bounds, and quadratic-to-linear speedup.

pub mod attention;
pub mod error;
pub mod features;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod sbn;

pub use error::{Error, Result};
pub use kernels::KernelId;
