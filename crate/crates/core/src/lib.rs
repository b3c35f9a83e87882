//! Equity total return swap pricing with funding, repo and tax adjustments.
//!
//! The crate is organised bottom-up:
//!
//! * [`curves`] piecewise-flat term structures and the blended repo and TRS
//!   discount curves,
//! * [`market`] spot, dividends, taxes and the hedging strategy,
//! * [`forwards`] strategy-dependent equity forwards,
//! * [`blackmodel`] Black expectations for Tobin options and `E[1/S]`,
//! * [`trs`] analytic values and par spreads,
//! * [`expansion`] first-order par-spread approximations,
//! * [`oracle`] the Monte Carlo cash-flow pricer used for validation,
//! * [`scenario`] scenario files, sweeps, sensitivities and CSV output.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blackmodel;
pub mod curves;
pub mod error;
pub mod expansion;
pub mod forwards;
pub mod market;
pub mod oracle;
pub mod scenario;
pub mod trs;

pub use error::{Error, Result};
