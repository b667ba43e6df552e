//! Dataset manifests, pair loading and the synthetic corpus generator.

mod dataset;
mod manifest;
mod synth;

pub use dataset::{load_dataset, Sample};
pub use manifest::{load_manifest, write_manifest, Manifest, ManifestEntry};
pub use synth::{coupled_angles, generate_synthetic, Coupling, SynthConfig, MAX_ANGLE_DEG};
