//! Simulation of driven-dissipative entanglement between an NV-center
//! electron spin and nearby nuclear spins.

pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod pulse;

pub use error::{Error, Result};
pub use config::{parse_config, Experiment, ExperimentConfig};
pub use engine::{build_liouvillian, fidelity, purity, steady_state, Integrator, Liouvillian};
pub use experiments::{run_experiment, run_to_dir};
pub use model::{SystemParams, Variant};
