//! LOS/NLOS identification from WLAN channel state information.
//!
//! The crate covers the whole pipeline: a stochastic indoor channel simulator
//! ([`channel_sim`]), windowing and storage of packet records ([`dataset`]), an
//! LSTM sequence classifier with exact gradients ([`lstm`]) and its training
//! loop ([`training`]), three handcrafted-feature baselines ([`baselines`]),
//! threshold and ROC evaluation ([`eval`]), and the command-line pipeline
//! ([`cli`]).

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel_sim;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod lstm;
pub mod training;

pub use error::{Error, Result};
