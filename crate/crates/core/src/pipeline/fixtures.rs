//! Synthetic annotations and a procedural stand-in for generated X-rays.

use rand::Rng;

use crate::ait::encode_png;
use crate::anatomy::{validate_landmark_set, AnatomySchema, LandmarkId, LandmarkSet, Point};
use crate::error::{CephError, Result};
use crate::rng::{slot_rng, DOMAIN_POOL};

pub const TEMPLATE_WIDTH: u32 = 1935;
pub const TEMPLATE_HEIGHT: u32 = 2400;
pub const TEMPLATE_SPACING: f64 = 0.1;

const TEMPLATE: [(f64, f64); 38] = [
    (780.0, 1000.0),
    (1460.0, 900.0),
    (1330.0, 1110.0),
    (560.0, 1120.0),
    (1454.0, 1450.0),
    (1416.0, 1849.0),
    (1420.0, 1990.0),
    (1360.0, 2080.0),
    (1400.0, 2050.0),
    (800.0, 1830.0),
    (1500.0, 1640.0),
    (1520.0, 1660.0),
    (1650.0, 1590.0),
    (1600.0, 1760.0),
    (1610.0, 1430.0),
    (1540.0, 2020.0),
    (1020.0, 1400.0),
    (1500.0, 1380.0),
    (634.0, 1318.0),
    (580.0, 1420.0),
    (960.0, 1180.0),
    (1430.0, 1470.0),
    (1380.0, 1820.0),
    (1230.0, 1620.0),
    (1235.0, 1655.0),
    (660.0, 1600.0),
    (640.0, 1250.0),
    (1530.0, 900.0),
    (1600.0, 1500.0),
    (1560.0, 1870.0),
    (1720.0, 1240.0),
    (1680.0, 1380.0),
    (1600.0, 1700.0),
    (1380.0, 2120.0),
    (1530.0, 760.0),
    (1200.0, 1300.0),
    (1380.0, 1950.0),
    (1150.0, 2150.0),
];

const OFFSET: (f64, f64) = (-170.0, -200.0);
const JITTER_PX: f64 = 6.0;
const POOL_TAGS: [&str; 3] = ["Deciduous teeth", "Permanent teeth", "Mixed dentition"];

/// A plausible adult lateral cephalogram annotation on a 1935×2400 frame.
pub fn template_set() -> LandmarkSet {
    LandmarkSet::new(TEMPLATE_WIDTH, TEMPLATE_HEIGHT, TEMPLATE_SPACING).with_points(
        TEMPLATE
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (LandmarkId(i as u8 + 1), Point::new(x + OFFSET.0, y + OFFSET.1))),
    )
}

/// `n` valid annotations: the template with independent per-point jitter,
/// redrawn until every schema constraint holds.
pub fn synthetic_pool(n: usize, seed: u64, schema: &AnatomySchema) -> Result<Vec<LandmarkSet>> {
    let base = template_set();
    if !validate_landmark_set(&base, schema).is_valid() {
        return Err(CephError::Validation(
            "schema constraints reject the built-in template annotation".into(),
        ));
    }
    (0..n)
        .map(|i| {
            let mut rng = slot_rng(seed, DOMAIN_POOL, i as u64);
            for _ in 0..1000 {
                let mut set = base.clone();
                for p in set.points.values_mut() {
                    p.x += rng.gen_range(-JITTER_PX..JITTER_PX);
                    p.y += rng.gen_range(-JITTER_PX..JITTER_PX);
                }
                if validate_landmark_set(&set, schema).is_valid() {
                    set.id = Some(format!("case-{i:04}"));
                    set.tags.insert(POOL_TAGS[i % POOL_TAGS.len()].to_string());
                    return Ok(set);
                }
            }
            Err(CephError::ResampleBudget { slot: i, attempts: 1000 })
        })
        .collect()
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&v| f64::from(v)).sum::<f64>() / self.pixels.len().max(1) as f64
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_png(self.width, self.height, png::ColorType::Grayscale, &self.pixels)
    }

    pub fn save_png(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_png()?).map_err(|e| CephError::io(path, e))
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Procedural `size`×`size` grayscale image: a dim base plus soft ridges
/// along schema edges and bright blobs at landmarks. Purely a fixture for
/// exercising image paths without a generator.
pub fn render_stub_xray(set: &LandmarkSet, schema: &AnatomySchema, size: u32) -> Result<GrayImage> {
    if size == 0 || set.width == 0 || set.height == 0 {
        return Err(CephError::Config("stub render needs non-zero sizes".into()));
    }
    let sx = f64::from(size) / f64::from(set.width);
    let sy = f64::from(size) / f64::from(set.height);
    let pts: Vec<(f64, f64)> = schema
        .landmarks()
        .iter()
        .map(|d| set.point(d.index).map(|p| (p.x * sx, p.y * sy)))
        .collect::<Result<_>>()?;
    let edges: Vec<((f64, f64), (f64, f64))> = schema
        .edges()
        .iter()
        .map(|&(a, b)| (pts[a.slot()], pts[b.slot()]))
        .collect();
    let scale = f64::from(size) / 512.0;
    let ridge = 2.0 * (3.0 * scale).powi(2);
    let blob = 2.0 * (2.5 * scale).powi(2);
    let mut pixels = Vec::with_capacity((size * size) as usize);
    for y in 0..size {
        for x in 0..size {
            let p = (f64::from(x) + 0.5, f64::from(y) + 0.5);
            let de = edges
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
            let dl = pts
                .iter()
                .map(|&q| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2))
                .fold(f64::INFINITY, f64::min);
            let shade = 24.0 + 16.0 * (p.1 / f64::from(size));
            let v = shade + 90.0 * (-de * de / ridge).exp() + 120.0 * (-dl / blob).exp();
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(GrayImage { width: size, height: size, pixels })
}
