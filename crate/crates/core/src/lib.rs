//! Analytics engine measuring the disposition effect on UTXO-style chains.
//!
//! The pipeline runs in five stages, each a pure transformation over the
//! previous one:
//!
//! 1. [`chain`]: parse line-delimited transaction dumps, flag CoinJoins
//! 2. [`entity`]: multiple-input clustering into entities, tag attribution,
//!    entity graph construction
//! 3. [`sells`]: extract non-exchange to exchange transfers (sell proxies)
//! 4. [`market`] / [`indicators`]: hourly global price series and the
//!    18-rule GR/LR signal catalogue
//! 5. [`stats`]: per-window GR/LR tallies and two-sample t-statistics
//!
//! [`synth`] generates deterministic synthetic chains with a planted
//! disposition bias for end-to-end validation.
//!
//! All stages are deterministic: identical inputs produce byte-identical
//! exports, with or without the `parallel` feature.

pub mod chain;
pub mod entity;
pub mod indicators;
pub mod market;
pub mod report;
pub mod sells;
pub mod stats;
pub mod synth;

mod exec;
