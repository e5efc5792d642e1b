//! Dataset generation and experiment orchestration: procedural vehicles,
//! the staged training and evaluation pipeline, ablations and exports.

mod config;
mod manifest;
mod run;
mod vehicles;

use sha2::{Digest, Sha256};

pub use config::{AblationConfig, EvalConfig, ExperimentConfig, SampleConfig, PROFILES};
pub use manifest::{hash_inputs, hash_json, hash_tree, StageManifest};
pub use run::{Outcome, Pipeline, Stage, METHOD_MEAN, METHOD_MS, METHOD_OURS, METHOD_SINGLE};
pub use vehicles::{gen_shapes, ProceduralVehicleParams, VehicleDims};

/// Seed for the named consumer of randomness under experiment seed `seed`.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
