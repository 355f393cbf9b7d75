//! Two-species sympathetic cooling toolkit.
//!
//! - [`physics`]: Ioffe-Pritchard trap frequencies and gravitational sag.
//! - [`budget`]: quasi-static energy-budget model, critical target numbers
//!   and the outcome classifier.
//! - [`contact`]: interspecies collision rate, energy exchange and
//!   thermalization rates.
//! - [`trajectory`]: time-domain evaporation with finite thermal contact.
//! - [`dsmc`]: direct simulation Monte Carlo of trapped gases, used as an
//!   independent check of the analytic rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail validation

pub mod budget;
pub mod contact;
pub mod dsmc;
pub mod constants;
pub mod physics;
pub mod trajectory;
