//! HTTP annotation service and command-line front end for skill tournaments.
//!
//! [`service::Service`] holds the live arenas, [`routes::router`] exposes it
//! over HTTP, [`store::Store`] persists event logs and worker records, and
//! [`cli`] implements the `skillarena` binary.

pub mod cli;
pub mod error;
pub mod routes;
pub mod service;
pub mod store;

pub use error::ApiError;
pub use service::{Service, ServiceOptions};
pub use store::Store;
