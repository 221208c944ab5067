//! Federated recovery of a disease's prominent symptoms from noisy,
//! simulated symptom surveys.
//!
//! The crate is organised bottom-up:
//!
//! * [`embedding`] loads word vectors and encodes symptom phrases.
//! * [`survey`], [`corpus`], [`noise`] and [`synth`] turn country survey
//!   tables into labeled per-client datasets.
//! * [`classifier`] is the small MLP trained on each client.
//! * [`federation`] runs federated averaging rounds over a population.
//! * [`evaluation`] scores global models and runs noise and ε sweeps.

pub mod classifier;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod federation;
pub mod noise;
pub mod rng;
pub mod survey;
pub mod synth;

pub use error::{Error, Result};
