use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CephError, Result};

/// Number of landmarks in a cephalometric annotation.
pub const LANDMARK_COUNT: u8 = 38;

/// 1-based landmark index (`L-1` is Sella, `L-2` Nasion, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LandmarkId(pub u8);

impl LandmarkId {
    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = LandmarkId> {
        (1..=LANDMARK_COUNT).map(LandmarkId)
    }

    /// Zero-based slot, for dense arrays.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// Pixel coordinates, origin top-left, `y` pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// One annotated image: 38 points plus the image geometry they live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub width: u32,
    pub height: u32,
    pub spacing_mm_per_px: f64,
    #[serde(default)]
    pub tags: BTreeSet<String>,
    pub points: BTreeMap<LandmarkId, Point>,
}

impl LandmarkSet {
    pub fn new(width: u32, height: u32, spacing_mm_per_px: f64) -> Self {
        Self {
            id: None,
            width,
            height,
            spacing_mm_per_px,
            tags: BTreeSet::new(),
            points: BTreeMap::new(),
        }
    }

    pub fn with_points(mut self, points: impl IntoIterator<Item = (LandmarkId, Point)>) -> Self {
        self.points.extend(points);
        self
    }

    pub fn point(&self, id: LandmarkId) -> Result<Point> {
        self.points
            .get(&id)
            .copied()
            .ok_or_else(|| CephError::Validation(format!("missing landmark {}", id.0)))
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t.eq_ignore_ascii_case(tag))
    }

    pub fn from_json_str(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CephError::json(context, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CephError::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    /// Pretty JSON with a trailing newline; stable byte output for a given set.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("landmark set serialises");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CephError::io(path, e))
    }

    /// Bit-level key of the point tuple, for distinctness checks.
    pub fn point_key(&self) -> Vec<(u8, u64, u64)> {
        self.points
            .iter()
            .map(|(id, p)| (id.0, p.x.to_bits(), p.y.to_bits()))
            .collect()
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self
            .points
            .values()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / n, sy / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotation_json_uses_index_keys() {
        let set = LandmarkSet::new(100, 80, 0.1)
            .with_points([(LandmarkId(1), Point::new(1.5, 2.0)), (LandmarkId(12), Point::new(3.0, 4.0))]);
        let json = set.to_json();
        assert!(json.contains("\"12\": ["));
        assert!(json.contains("\"spacing_mm_per_px\": 0.1"));
        let back = LandmarkSet::from_json_str(&json, "test").unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn parse_error_reports_position() {
        let err = LandmarkSet::from_json_str("{\"width\": 1,\n \"height\": }", "ann.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ann.json") && msg.contains("line 2"), "{msg}");
    }
}
