//! DC-link capacitor ripple prediction, end to end.
//!
//! The crate covers the whole chain: time-domain simulation of a full-bridge
//! rectifier and a boost PFC stage, coherent-window harmonic extraction,
//! dataset sweeps, a function-mapping prompt protocol, a small decoder-only
//! sequence model trained on completion tokens, classical regression
//! baselines, and MAPE reporting.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod harmonics;
pub mod model;
pub mod numfmt;
pub mod pipeline;
pub mod plot;
pub mod prompting;
pub mod sim;

pub use error::{Error, Result};
