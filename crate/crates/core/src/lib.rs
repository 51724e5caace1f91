//! Distortion-aware convolutions on equirectangular panoramas and
//! corner-based room layout recovery.
//!
//! - [`sphere`]: pixel / angle / unit-vector conversions and kernel alignment.
//! - [`kernel_offsets`]: spherical kernel sample positions and per-row offset fields.
//! - [`tensor_conv`]: dense tensors, standard and equirectangular convolutions
//!   with gradients, the class-balanced loss, Adam and micro-training.
//! - [`gt_synth`]: ground-truth edge/corner maps, synthetic rooms and augmentation.
//! - [`layout3d`]: corner extraction and 3D layout reconstruction.
//! - [`evalmetrics`]: map metrics, segmentation, pixel/corner error and 3D IoU.
//! - [`camsim`]: camera rotation / translation simulation and the robustness harness.
//! - [`io`]: tensor files, JSON documents and PNG maps.

pub mod camsim;
pub mod error;
pub mod evalmetrics;
pub mod gt_synth;
pub mod io;
pub mod kernel_offsets;
pub mod layout3d;
pub mod maps;
pub mod polygon;
pub mod sphere;
pub mod tensor_conv;

pub use error::{Error, Result};
pub use maps::{MapPair, ProbabilityMap};
pub use sphere::{ImageGeometry, SphericalAngles, UnitVector};
