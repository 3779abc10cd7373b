//! Synthetic cephalometric landmark data.
//!
//! The crate covers the geometric side of building conditioning data for a
//! controllable X-ray generator and of scoring landmark detectors:
//!
//! 1. **anatomy**: the 38-landmark schema, its anatomical graph and the
//!    angular constraints used for anatomy-aware augmentation.
//! 2. **mira**: global affine plus constraint-driven landmark augmentation.
//! 3. **ait**: distance-based node colouring and gradient-edge rasterisation
//!    of the landmark graph into an RGB conditioning image.
//! 4. **pdg**: rule-constrained prompt generation from grouped keywords.
//! 5. **heatmap**: Gaussian heatmap encoder/decoder and MSE loss.
//! 6. **metrics**: radial error, MRE/SD and success detection rates.
//! 7. **pipeline**: dataset ingestion, bundle export, splits, manifests.

pub mod ait;
pub mod anatomy;
pub mod error;
pub mod heatmap;
pub mod metrics;
pub mod mira;
pub mod pdg;
pub mod pipeline;
pub mod rng;

pub use anatomy::{
    measure_angle, validate_landmark_set, AnatomySchema, AngleConstraint, LandmarkDef,
    LandmarkId, LandmarkSet, Point, ValidationReport, Violation, LANDMARK_COUNT,
};
pub use error::{CephError, Result};
