//! HTTP service and command line for the `uispec` engine.
//!
//! Sessions hold uploaded reference screenshots, their extracted documents
//! and a tree of document versions; see [`api`] for the routes and
//! [`sessions`] for the on-disk layout.

pub mod api;
pub mod cli;
pub mod compose;
pub mod http_client;
pub mod sessions;

pub use api::{router, AppState, ServiceConfig};
