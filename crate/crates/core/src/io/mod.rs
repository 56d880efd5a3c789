//! Data loading, run configuration and draw persistence.

pub mod config;
pub mod data;
pub mod store;

pub use config::{parse_config, RunConfig};
pub use data::{load_panel, Tcode, VariableSpec};
pub use store::{load_store, save_store, Manifest};
