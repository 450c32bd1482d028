//! Adaptive arm control with a spiking neuron ensemble.
//!
//! A PD controller drives a simulated planar arm toward reach targets while
//! a LIF ensemble, trained online with the PES rule, supplies the integral
//! branch. The [`harness`] reproduces a train-then-evaluate reach protocol
//! and [`stats`] summarizes time-to-target with bootstrap intervals and
//! Welch's t-test.

pub mod app;
pub mod armsim;
pub mod config;
pub mod controller;
pub mod error;
pub mod exec;
pub mod harness;
pub mod neuro;
pub mod output;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
