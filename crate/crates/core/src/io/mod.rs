//! Run configuration, permutation cache and CSV output.

pub mod cache;
pub mod config;
pub mod csv;

pub use cache::{load_perm, save_perm, PermCache};
pub use config::{PermMethod, RunConfig};
