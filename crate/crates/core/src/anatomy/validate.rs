use std::fmt;

use serde::Serialize;

use super::landmarks::{LandmarkSet, Point};
use super::schema::{AnatomySchema, AngleConstraint};
use crate::error::{CephError, Result};

/// Slack applied when checking a measured angle against a constraint range.
pub const ANGLE_TOLERANCE_DEG: f64 = 1e-6;

/// Unsigned angle `a-vertex-b` in degrees, within `[0, 180]`.
pub fn angle_at(vertex: Point, a: Point, b: Point) -> Result<f64> {
    let (ax, ay) = (a.x - vertex.x, a.y - vertex.y);
    let (bx, by) = (b.x - vertex.x, b.y - vertex.y);
    if (ax == 0.0 && ay == 0.0) || (bx == 0.0 && by == 0.0) {
        return Err(CephError::Degenerate("ray endpoint coincides with vertex".into()));
    }
    let cross = ax * by - ay * bx;
    let dot = ax * bx + ay * by;
    Ok(cross.abs().atan2(dot).to_degrees())
}

/// Measures a constraint's angle on a landmark set.
pub fn measure_angle(set: &LandmarkSet, c: &AngleConstraint) -> Result<f64> {
    let vertex = set.point(c.vertex)?;
    let a = set.point(c.ray_a)?;
    let b = set.point(c.ray_b)?;
    angle_at(vertex, a, b).map_err(|_| {
        CephError::Degenerate(format!("constraint {}: ray endpoint coincides with vertex", c.name))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingLandmark { index: u8 },
    UnknownLandmark { index: u8 },
    NonFinite { index: u8 },
    OutOfBounds { index: u8, x: f64, y: f64, width: u32, height: u32 },
    BadSpacing { spacing: f64 },
    BadDimensions { width: u32, height: u32 },
    Constraint { name: String, measured: f64, min_deg: f64, max_deg: f64 },
    DegenerateConstraint { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingLandmark { index } => write!(f, "missing landmark {index}"),
            Violation::UnknownLandmark { index } => write!(f, "unknown landmark {index}"),
            Violation::NonFinite { index } => write!(f, "landmark {index} has non-finite coordinates"),
            Violation::OutOfBounds { index, x, y, width, height } => write!(
                f,
                "landmark {index} at ({x}, {y}) outside image {width}x{height}"
            ),
            Violation::BadSpacing { spacing } => write!(f, "spacing {spacing} mm/px must be > 0"),
            Violation::BadDimensions { width, height } => {
                write!(f, "image dimensions {width}x{height} must be positive")
            }
            Violation::Constraint { name, measured, min_deg, max_deg } => write!(
                f,
                "constraint {name} measured {measured:.6} outside range [{min_deg}, {max_deg}]"
            ),
            Violation::DegenerateConstraint { name } => {
                write!(f, "constraint {name} is degenerate (ray endpoint equals vertex)")
            }
        }
    }
}

/// Every rule a landmark set breaks; empty means fully valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn constraint_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| matches!(v, Violation::Constraint { .. } | Violation::DegenerateConstraint { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks the landmark set invariants and every schema constraint.
pub fn validate_landmark_set(set: &LandmarkSet, schema: &AnatomySchema) -> ValidationReport {
    let mut violations = Vec::new();
    if set.width == 0 || set.height == 0 {
        violations.push(Violation::BadDimensions { width: set.width, height: set.height });
    }
    if !(set.spacing_mm_per_px.is_finite() && set.spacing_mm_per_px > 0.0) {
        violations.push(Violation::BadSpacing { spacing: set.spacing_mm_per_px });
    }
    for id in set.points.keys() {
        if !(1..=super::LANDMARK_COUNT).contains(&id.0) {
            violations.push(Violation::UnknownLandmark { index: id.0 });
        }
    }
    for def in schema.landmarks() {
        let Some(p) = set.points.get(&def.index) else {
            violations.push(Violation::MissingLandmark { index: def.index.0 });
            continue;
        };
        if !(p.x.is_finite() && p.y.is_finite()) {
            violations.push(Violation::NonFinite { index: def.index.0 });
        } else if !in_bounds(*p, set.width, set.height) {
            violations.push(Violation::OutOfBounds {
                index: def.index.0,
                x: p.x,
                y: p.y,
                width: set.width,
                height: set.height,
            });
        }
    }
    for c in schema.constraints() {
        let present = [c.vertex, c.ray_a, c.ray_b]
            .iter()
            .all(|id| set.points.get(id).is_some_and(|p| p.x.is_finite() && p.y.is_finite()));
        if !present {
            continue;
        }
        match measure_angle(set, c) {
            Ok(deg) if c.contains(deg, ANGLE_TOLERANCE_DEG) => {}
            Ok(deg) => violations.push(Violation::Constraint {
                name: c.name.clone(),
                measured: deg,
                min_deg: c.min_deg,
                max_deg: c.max_deg,
            }),
            Err(_) => violations.push(Violation::DegenerateConstraint { name: c.name.clone() }),
        }
    }
    ValidationReport { violations }
}

pub fn in_bounds(p: Point, width: u32, height: u32) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x < width as f64 && p.y < height as f64
}

/// Measures every constraint of the schema, in schema order.
pub fn measure_all(set: &LandmarkSet, schema: &AnatomySchema) -> Vec<(String, Result<f64>)> {
    schema
        .constraints()
        .iter()
        .map(|c| (c.name.clone(), measure_angle(set, c)))
        .collect()
}
