//! Landmark schema, anatomical graph and constraint checks.

mod landmarks;
mod schema;
mod validate;

pub use landmarks::{LandmarkId, LandmarkSet, Point, LANDMARK_COUNT};
pub use schema::{load_schema, AnatomySchema, AngleConstraint, CriticalCenter, LandmarkDef};
pub use validate::{
    angle_at, in_bounds, measure_all, measure_angle, validate_landmark_set, ValidationReport,
    Violation, ANGLE_TOLERANCE_DEG,
};
