//! HTTP service, trace replay and command-line front end for the engine.

pub mod config;
pub mod replay;
pub mod server;
pub mod trace;
pub mod wire;
