//! Tools for measuring the look-ahead benchmark bias.
//!
//! A backtest that picks its assets from a benchmark's *end-of-period*
//! constituent list quietly conditions on future winners. This crate builds
//! both sides of that comparison on CRSP-style daily data:
//!
//! * [`marketdata`] ingests and split-adjusts daily bars,
//! * [`universe`] ranks securities by market capitalization ex-ante or ex-post,
//! * [`engine`] runs frictionless buy-and-hold portfolios and the long/short
//!   ratio construction,
//! * [`metrics`] computes Sharpe ratios, continuously compounded returns,
//!   drawdowns and pooled two-sample t-tests,
//! * [`theory`] evaluates the closed-form mean-variance estimation bias and
//!   checks it by Monte-Carlo,
//! * [`randomstrat`] generates constrained random strategies used as a
//!   bias-robust benchmark,
//! * [`synthmarket`] generates synthetic markets whose firm exits follow a
//!   calibrated piecewise-exponential hazard,
//! * [`cli`] wires everything into the `lookahead` command-line tool.

pub mod cli;
pub mod engine;
pub mod error;
pub mod marketdata;
pub mod metrics;
pub mod randomstrat;
pub mod rng;
pub mod synthmarket;
pub mod theory;
pub mod universe;

pub use error::{Error, Result};
