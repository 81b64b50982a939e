#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod discretize;
pub mod krylov;
pub mod error;
pub mod gnn;
pub mod linalg;
pub mod optimize;
pub mod partition;
pub mod schwarz;
pub mod spectral;

pub use error::{Error, Result};
