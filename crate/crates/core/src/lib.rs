//! Simulation and analysis of fatigue under low-frequency and kilohertz
//! electrical stimulation versus voluntary contraction.

pub mod analysis;
pub mod axon;
pub mod config;
pub mod dsp;
pub mod emg;
pub mod error;
pub mod muscle;
pub mod nonfinite;
pub mod removal;
pub mod rng;
pub mod spline;
pub mod stats;
pub mod stim;
pub mod trial;

pub use error::{Error, Result};
