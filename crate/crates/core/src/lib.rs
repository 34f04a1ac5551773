//! sEMG-to-joint-torque estimation: preprocessing, activation dynamics,
//! windowed features, static-equilibrium reference torques and small neural
//! regressors with a seeded evaluation protocol.

pub mod activation;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod pipeline;
pub mod post;
pub mod preprocess;
pub mod synth;
pub mod torque;

pub use error::{Error, Result};
