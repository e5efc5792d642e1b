//! The auto-decoder: architecture, SDF sample generation, joint stage-one
//! training, latent inference and mesh reconstruction.

mod decoder;
mod infer;
mod latent;
mod samples;
mod train;

pub use decoder::{decode_sdf, Decoder, DecoderConfig};
pub use infer::{infer_latent, infer_latent_from_samples, infer_latent_oriented, reconstruct, sdf_grid, InferConfig};
pub use latent::{LatentCode, ShapeCodebook};
pub use samples::{generate_sdf_samples, SdfSampleSet};
pub use train::{dataset_loss, train_stage_one, StageOneConfig, StageOneResult};
