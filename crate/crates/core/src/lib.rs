//! Deterministic simulator for escrow-based monetization of on-demand cloud
//! services.
//!
//! The crate is layered bottom-up:
//!
//! * [`amount`] exact wei arithmetic,
//! * [`ledger`] accounts, escrow, gas fees, blocks and wakeups,
//! * [`contracts`] the seven settlement templates as state machines,
//! * [`pricing`] quotes and the payment-method fee comparison,
//! * [`orchestrator`] the end-to-end session workflow,
//! * [`scenario`] scripted runs, the independent settlement oracle and reports.

pub mod amount;
pub mod cli;
pub mod contracts;
pub mod error;
pub mod ledger;
pub mod orchestrator;
pub mod pricing;
pub mod scenario;

pub use amount::Amount;
pub use error::{Error, Result};
