//! Physics-based digital twin of a closed hydraulic loop, built for fault
//! detection and diagnosis (FDD).
//!
//! The crate wires five pieces into one pipeline:
//!
//! - [`hydronet`] — 1D steady-state loop simulator: actuator setpoints and
//!   internal component parameters in, node pressures and flow out.
//! - [`dataset`] — generation, persistence and stratified splitting of the
//!   single-perturbation training database.
//! - [`mlkit`] — the two learners: a CART decision tree for fault
//!   localization and per-class ε-SVR estimators, with text persistence.
//! - [`fddcore`] — the threshold-gated detect → localize → estimate →
//!   validate loop that keeps the twin's component vector in sync with the
//!   monitored system.
//! - [`scenario`] — a simulated physical twin with fault injection, optional
//!   Gaussian sensor noise, and the evaluation metrics (confusion/accuracy
//!   matrices, estimation-error quantiles, campaign statistics).
//!
//! Runnable walkthroughs live in `examples/`; the thin `hydrotwin` binary
//! exposes the same workflows as subcommands (see [`cli`]).

pub mod cli;
pub mod config;
pub mod dataset;
pub mod fddcore;
pub mod hydronet;
pub mod mlkit;
pub mod scenario;

pub use hydronet::{ComponentVector, ControlVector, LoopConfig, ProcessVector};
