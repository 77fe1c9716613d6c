//! Building blocks for turning timestamped segment captions of hour-long
//! videos into optimised pseudo-summaries, and for measuring the result.
//!
//! The crate is organised around four largely independent concerns:
//!
//! * [`corpus`] — the data model for segment windows, caption sets, and the
//!   fine-tuning records exported once summaries are optimised.
//! * [`metaprompt`] — the iterative generator → evaluator → optimiser loop
//!   that refines a summarisation prompt per video, with early stopping and
//!   full traces.
//! * [`gateway`] — role-based completion plumbing: request/response types,
//!   deterministic scripted mocks, retry/backoff and rate-limit bookkeeping,
//!   all driven through a clock abstraction so tests can use virtual time.
//! * [`metrics`], [`objectives`], [`bound`] — numeric tooling: reference
//!   captioning metrics, noise-robust losses with analytic gradients, and a
//!   calculator for the four-term generalization error bound.
//!
//! The crate is `no_std` + `alloc`; everything that touches files, sockets,
//! or real clocks lives in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bound;
pub mod corpus;
pub mod gateway;
pub mod linear;
pub mod math;
pub mod metaprompt;
pub mod metrics;
pub mod objectives;
