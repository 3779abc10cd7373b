//! Gaussian heatmap targets and argmax decoding for landmark detectors.
//!
//! Cell `(row, col)` of a plane covers input pixels
//! `[col·stride, (col+1)·stride) × [row·stride, (row+1)·stride)` and its
//! centre sits at `((col + 0.5)·stride, (row + 0.5)·stride)`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anatomy::{LandmarkId, LandmarkSet, Point};
use crate::error::{CephError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    /// `(h, w)` in heatmap cells.
    pub heatmap_size: (usize, usize),
    /// Gaussian standard deviation in heatmap cells.
    pub sigma: f64,
    pub refine_subpixel: bool,
}

impl CodecConfig {
    /// Quarter-resolution heatmaps with `sigma = 2` cells.
    pub fn for_input(width: u32, height: u32) -> Self {
        Self {
            heatmap_size: ((height as usize).div_ceil(4).max(8), (width as usize).div_ceil(4).max(8)),
            sigma: 2.0,
            refine_subpixel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.heatmap_size;
        if h < 8 || w < 8 {
            return Err(CephError::Config(format!("heatmap size {h}x{w} below 8x8")));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(CephError::Config(format!("sigma {} must be > 0", self.sigma)));
        }
        Ok(())
    }

    /// Input pixels per cell for an image of the given size; the larger axis
    /// ratio, so every in-bounds point falls on the grid.
    pub fn stride_for(&self, width: u32, height: u32) -> f64 {
        let (h, w) = self.heatmap_size;
        (f64::from(width) / w as f64).max(f64::from(height) / h as f64).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStack {
    planes: usize,
    h: usize,
    w: usize,
    stride: f64,
    data: Vec<f64>,
}

impl HeatmapStack {
    pub fn new(planes: usize, h: usize, w: usize, stride: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != planes * h * w {
            return Err(CephError::Shape(format!(
                "{} values for {planes}x{h}x{w} planes",
                data.len()
            )));
        }
        if !(stride.is_finite() && stride >= 1.0) {
            return Err(CephError::Shape(format!("stride {stride} must be >= 1")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CephError::Shape("heatmap values must be finite".into()));
        }
        Ok(Self { planes, h, w, stride, data })
    }

    pub fn zeros(planes: usize, h: usize, w: usize, stride: f64) -> Self {
        Self { planes, h, w, stride, data: vec![0.0; planes * h * w] }
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.planes, self.h, self.w)
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn plane(&self, k: usize) -> &[f64] {
        &self.data[k * self.h * self.w..(k + 1) * self.h * self.w]
    }

    pub fn plane_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.h * self.w;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn get(&self, k: usize, row: usize, col: usize) -> f64 {
        self.data[(k * self.h + row) * self.w + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { data: self.data.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    /// Debug dump: `u32 planes, u32 h, u32 w, f32 stride`, then `f32` values,
    /// all little-endian, plane-major then row-major.
    pub fn write_dump(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(&(self.planes as u32).to_le_bytes())?;
        out.write_all(&(self.h as u32).to_le_bytes())?;
        out.write_all(&(self.w as u32).to_le_bytes())?;
        out.write_all(&(self.stride as f32).to_le_bytes())?;
        for v in &self.data {
            out.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_dump(mut input: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| CephError::io("<heatmap dump>", e))?;
        let word = |i: usize| -> Result<[u8; 4]> {
            bytes
                .get(i * 4..i * 4 + 4)
                .map(|b| b.try_into().unwrap())
                .ok_or_else(|| CephError::Shape("truncated heatmap dump".into()))
        };
        let planes = u32::from_le_bytes(word(0)?) as usize;
        let h = u32::from_le_bytes(word(1)?) as usize;
        let w = u32::from_le_bytes(word(2)?) as usize;
        let stride = f32::from_le_bytes(word(3)?) as f64;
        let n = planes * h * w;
        if bytes.len() != (4 + n) * 4 {
            return Err(CephError::Shape(format!(
                "dump holds {} bytes, header implies {}",
                bytes.len(),
                (4 + n) * 4
            )));
        }
        let data = (0..n)
            .map(|i| word(4 + i).map(|b| f32::from_le_bytes(b) as f64))
            .collect::<Result<Vec<_>>>()?;
        Self::new(planes, h, w, stride, data)
    }

    pub fn save_dump(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| CephError::io(path, e))?;
        self.write_dump(std::io::BufWriter::new(f)).map_err(|e| CephError::io(path, e))
    }
}

/// Position of a point in continuous cell coordinates (cell centres are
/// integers).
fn to_cells(p: Point, stride: f64) -> (f64, f64) {
    (p.x / stride - 0.5, p.y / stride - 0.5)
}

fn fill_plane(plane: &mut [f64], h: usize, w: usize, mu: (f64, f64), sigma: f64) {
    let near = (
        mu.0.round().clamp(0.0, (w - 1) as f64),
        mu.1.round().clamp(0.0, (h - 1) as f64),
    );
    let d0 = (near.0 - mu.0).powi(2) + (near.1 - mu.1).powi(2);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for row in 0..h {
        let dy = row as f64 - mu.1;
        for col in 0..w {
            let dx = col as f64 - mu.0;
            // Scaled so the nearest cell is exactly 1.
            let v = (-(dx * dx + dy * dy - d0) * inv).exp();
            plane[row * w + col] = v.min(1.0);
        }
    }
}

/// One Gaussian plane per landmark, in landmark order.
pub fn encode(set: &LandmarkSet, cfg: &CodecConfig) -> Result<HeatmapStack> {
    cfg.validate()?;
    let (h, w) = cfg.heatmap_size;
    let stride = cfg.stride_for(set.width, set.height);
    let mut stack = HeatmapStack::zeros(set.points.len(), h, w, stride);
    for (k, p) in set.points.values().enumerate() {
        fill_plane(stack.plane_mut(k), h, w, to_cells(*p, stride), cfg.sigma);
    }
    Ok(stack)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedPoint {
    pub point: Point,
    pub score: f64,
    /// Every cell held the same value; `point` is the plane centre.
    pub flat: bool,
}

/// Quarter-cell step toward the larger neighbour along one axis.
///
/// A missing neighbour at the border is extrapolated from the Gaussian
/// model: `ln f(-1) = 2 ln f(0) - ln f(1) - 1/σ²`.
fn quarter_shift(center: f64, before: Option<f64>, after: Option<f64>, sigma: f64) -> f64 {
    let log_extrapolate = |other: f64| -> Option<f64> {
        (center > 0.0 && other > 0.0)
            .then(|| (2.0 * center.ln() - other.ln() - 1.0 / (sigma * sigma)).exp())
    };
    let (lo, hi) = match (before, after) {
        (Some(b), Some(a)) => (b, a),
        (None, Some(a)) => match log_extrapolate(a) {
            Some(b) => (b, a),
            None => return 0.0,
        },
        (Some(b), None) => match log_extrapolate(b) {
            Some(a) => (b, a),
            None => return 0.0,
        },
        (None, None) => return 0.0,
    };
    if hi > lo {
        0.25
    } else if lo > hi {
        -0.25
    } else {
        0.0
    }
}

/// Argmax per plane (ties go to the smallest `(row, col)`), optional
/// quarter-cell refinement, then scaled back to input pixels.
pub fn decode(stack: &HeatmapStack, cfg: &CodecConfig, out_size: (u32, u32)) -> Vec<DecodedPoint> {
    let (_, h, w) = stack.shape();
    (0..stack.planes())
        .map(|k| {
            let plane = stack.plane(k);
            let (mut best, mut best_i) = (f64::NEG_INFINITY, 0);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (i, &v) in plane.iter().enumerate() {
                if v > best {
                    best = v;
                    best_i = i;
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo == hi {
                return DecodedPoint {
                    point: Point::new(f64::from(out_size.0) / 2.0, f64::from(out_size.1) / 2.0),
                    score: best,
                    flat: true,
                };
            }
            let (row, col) = (best_i / w, best_i % w);
            let mut cx = col as f64;
            let mut cy = row as f64;
            if cfg.refine_subpixel {
                let at = |r: usize, c: usize| plane[r * w + c];
                let left = (col > 0).then(|| at(row, col - 1));
                let right = (col + 1 < w).then(|| at(row, col + 1));
                let up = (row > 0).then(|| at(row - 1, col));
                let down = (row + 1 < h).then(|| at(row + 1, col));
                cx += quarter_shift(best, left, right, cfg.sigma);
                cy += quarter_shift(best, up, down, cfg.sigma);
            }
            let s = stack.stride();
            DecodedPoint { point: Point::new((cx + 0.5) * s, (cy + 0.5) * s), score: best, flat: false }
        })
        .collect()
}

/// Decoded points keyed by landmark id, plane `k` mapping to `L(k+1)`.
pub fn decode_landmarks(
    stack: &HeatmapStack,
    cfg: &CodecConfig,
    out_size: (u32, u32),
) -> Vec<(LandmarkId, DecodedPoint)> {
    decode(stack, cfg, out_size)
        .into_iter()
        .enumerate()
        .map(|(k, d)| (LandmarkId(k as u8 + 1), d))
        .collect()
}

/// Mean squared difference over every plane and cell.
pub fn mse_loss(pred: &HeatmapStack, gt: &HeatmapStack) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(CephError::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.shape(),
            gt.shape()
        )));
    }
    let n = pred.values().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(refine: bool) -> CodecConfig {
        CodecConfig { heatmap_size: (32, 32), sigma: 2.0, refine_subpixel: refine }
    }

    fn single(x: f64, y: f64) -> LandmarkSet {
        LandmarkSet::new(128, 128, 0.1).with_points([(LandmarkId(1), Point::new(x, y))])
    }

    #[test]
    fn grid_centre_peaks_at_one() {
        // stride 4: cell (row 5, col 7) centre is (30, 22).
        let stack = encode(&single(30.0, 22.0), &cfg(true)).unwrap();
        assert_eq!(stack.stride(), 4.0);
        assert_eq!(stack.get(0, 5, 7), 1.0);
        let max = stack.plane(0).iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn one_sigma_away_is_exp_minus_half() {
        let stack = encode(&single(30.0, 22.0), &cfg(true)).unwrap();
        // sigma = 2 cells; two columns right of the peak.
        assert!((stack.get(0, 5, 9) - (-0.5f64).exp()).abs() < 1e-9);
        assert!((stack.get(0, 3, 7) - (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn lattice_round_trip_exact() {
        for refine in [false, true] {
            let stack = encode(&single(30.0, 22.0), &cfg(refine)).unwrap();
            let d = decode(&stack, &cfg(refine), (128, 128));
            assert_eq!(d[0].point, Point::new(30.0, 22.0));
            assert!(!d[0].flat);
        }
    }

    #[test]
    fn flat_plane_returns_centre_with_flag() {
        let stack = HeatmapStack::zeros(1, 16, 16, 4.0);
        let d = decode(&stack, &cfg(true), (64, 48));
        assert!(d[0].flat);
        assert_eq!(d[0].point, Point::new(32.0, 24.0));
    }

    #[test]
    fn ties_break_to_smallest_row_then_col() {
        let mut stack = HeatmapStack::zeros(1, 8, 8, 1.0);
        stack.plane_mut(0)[3 * 8 + 5] = 1.0;
        stack.plane_mut(0)[3 * 8 + 2] = 1.0;
        stack.plane_mut(0)[6 * 8 + 1] = 1.0;
        let c = CodecConfig { heatmap_size: (8, 8), sigma: 2.0, refine_subpixel: false };
        let d = decode(&stack, &c, (8, 8));
        assert_eq!(d[0].point, Point::new(2.5, 3.5));
    }

    #[test]
    fn mse_examples() {
        let gt = encode(&single(40.0, 50.0), &cfg(true)).unwrap();
        assert_eq!(mse_loss(&gt, &gt).unwrap(), 0.0);
        let shifted = gt.map_values(|v| v + 1.0);
        assert!((mse_loss(&shifted, &gt).unwrap() - 1.0).abs() < 1e-15);
        let other = HeatmapStack::zeros(2, 32, 32, 4.0);
        assert!(matches!(mse_loss(&other, &gt), Err(CephError::Shape(_))));
    }

    #[test]
    fn dump_round_trip() {
        let stack = encode(&single(40.0, 50.0), &cfg(true)).unwrap();
        let mut buf = Vec::new();
        stack.write_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 32 * 32 * 4);
        assert_eq!(&buf[0..4], &1u32.to_le_bytes());
        let back = HeatmapStack::read_dump(buf.as_slice()).unwrap();
        assert_eq!(back.shape(), stack.shape());
        for (a, b) in back.values().iter().zip(stack.values()) {
            assert!((a - b).abs() < 1e-7);
        }
        assert!(HeatmapStack::read_dump(&buf[..20]).is_err());
    }

    #[test]
    fn config_checks() {
        assert!(CodecConfig { heatmap_size: (7, 8), sigma: 2.0, refine_subpixel: true }.validate().is_err());
        assert!(CodecConfig { heatmap_size: (8, 8), sigma: 0.0, refine_subpixel: true }.validate().is_err());
        let c = CodecConfig::for_input(512, 512);
        assert_eq!(c.heatmap_size, (128, 128));
        assert_eq!(c.stride_for(512, 512), 4.0);
    }
}
