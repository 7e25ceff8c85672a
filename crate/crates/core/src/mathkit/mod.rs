//! Deterministic numerical primitives shared by every lab.

pub(crate) mod linalg;
mod rng;
mod special;
mod stats;

pub use linalg::{cholesky, mvn_sample, LowerTriangular, Matrix, SpdMatrix};
pub use rng::Rng;
pub use special::{erf, erfc, norm_cdf, norm_pdf, norm_quantile};
pub use stats::{ks_two_sample, KsTest};
