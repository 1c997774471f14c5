//! Memory service and command-line tools around `tkg-core`.

pub mod api;
pub mod bench;
pub mod config;
pub mod registry;
pub mod transcript;

pub use api::router;
pub use config::ServiceConfig;
pub use registry::Registry;
