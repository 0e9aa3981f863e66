//! Command-line and loopback HTTP front end for `gridsort-core`.

pub mod api;
pub mod cli;
pub mod engine;
pub mod error;
pub mod render;
