//! Service layer for lead-optimization campaigns: a file-backed store, an
//! HTTP API and the `leadopt` command line.

pub mod api;
pub mod app;
pub mod cli;
pub mod config;
pub mod depict;
pub mod error;
pub mod store;

pub use app::Service;
pub use config::ServiceConfig;
pub use error::ServiceError;
