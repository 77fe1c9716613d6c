//! Everything the `sumforge` binary needs around the core library: JSONL
//! persistence, backend configuration, the HTTP chat backend, the
//! thread-safe retrying gateway, and the concurrent per-video runner with
//! resumable traces.

pub mod commands;
pub mod config;
pub mod gateway;
pub mod http;
pub mod io;
pub mod runner;
