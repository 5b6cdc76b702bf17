//! Rebalance detection with quantum self-attention.
//!
//! The pipeline runs from OHLCV bars to a backtest report:
//! [`marketdata`] loads and splits bars, [`indicators`] and [`featuremap`]
//! build features, [`labeling`] produces targets, [`qsim`] and [`vqc`]
//! simulate the circuits used by [`qasa`], [`trainer`] fits the model and
//! [`backtest`] scores its signals. [`experiment`] wires the stages together.

pub mod backtest;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod featuremap;
pub mod indicators;
pub mod labeling;
pub mod marketdata;
pub mod qasa;
pub mod qsim;
pub mod selftest;
pub mod synthetic;
pub mod trainer;
pub mod vqc;

pub use error::{Error, Result};
