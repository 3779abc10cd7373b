use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{color_nodes, NodeColoring, Rgb};
use crate::anatomy::{AnatomySchema, LandmarkSet, Point};
use crate::error::{CephError, Result};

pub const MIN_RASTER_SIZE: u32 = 32;

/// `c(t) = c1 + t/(D-1)·(c2 - c1)` for `t = 0..D`; `D = 1` yields `[c1]`.
pub fn gradient_edge(c1: Rgb, c2: Rgb, d: usize) -> Vec<Rgb> {
    match d {
        0 => Vec::new(),
        1 => vec![c1],
        _ => {
            let last = (d - 1) as f64;
            (0..d)
                .map(|t| {
                    if t == d - 1 {
                        return c2;
                    }
                    let f = t as f64 / last;
                    [0, 1, 2].map(|ch| c1[ch] + f * (c2[ch] - c1[ch]))
                })
                .collect()
        }
    }
}

/// Round half to even into 8 bits.
pub fn quantize(c: Rgb) -> [u8; 3] {
    c.map(|v| v.round_ties_even().clamp(0.0, 255.0) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterStyle {
    pub size: u32,
    pub node_radius: u32,
    pub edge_thickness: u32,
    pub background: [u8; 3],
}

impl Default for RasterStyle {
    fn default() -> Self {
        Self {
            size: 512,
            node_radius: 4,
            edge_thickness: 2,
            background: [0, 0, 0],
        }
    }
}

/// Square RGB8 raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyImage {
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    pub pixels: Vec<u8>,
}

impl TopologyImage {
    pub fn new(width: u32, height: u32, background: [u8; 3]) -> Self {
        let pixels = background.repeat((width * height) as usize);
        Self { width, height, background, pixels }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = ((y as usize * self.width as usize) + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_png(self.width, self.height, png::ColorType::Rgb, &self.pixels)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_png()?).map_err(|e| CephError::io(path, e))
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let (w, h, color, data) = decode_png(bytes)?;
        if color != png::ColorType::Rgb {
            return Err(CephError::Parse { context: "png".into(), message: format!("expected RGB, got {color:?}") });
        }
        Ok(Self { width: w, height: h, background: [0, 0, 0], pixels: data })
    }
}

pub(crate) fn encode_png(width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        let mut writer = enc
            .write_header()
            .map_err(|e| CephError::Parse { context: "png encode".into(), message: e.to_string() })?;
        writer
            .write_image_data(data)
            .map_err(|e| CephError::Parse { context: "png encode".into(), message: e.to_string() })?;
    }
    Ok(out)
}

pub(crate) fn decode_png(bytes: &[u8]) -> Result<(u32, u32, png::ColorType, Vec<u8>)> {
    let err = |e: png::DecodingError| CephError::Parse { context: "png decode".into(), message: e.to_string() };
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(err)?;
    let size = reader.output_buffer_size().ok_or_else(|| CephError::Parse {
        context: "png decode".into(),
        message: "image too large".into(),
    })?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, info.color_type, buf))
}

/// Width, height and colour type of a PNG file.
pub fn png_dimensions(path: &Path) -> Result<(u32, u32, png::ColorType)> {
    let file = std::fs::File::open(path).map_err(|e| CephError::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let reader = decoder
        .read_info()
        .map_err(|e| CephError::Parse { context: path.display().to_string(), message: e.to_string() })?;
    let info = reader.info();
    Ok((info.width, info.height, info.color_type))
}

/// Landmark position on a `size × size` raster.
pub fn raster_position(p: Point, width: u32, height: u32, size: u32) -> (i64, i64) {
    let sx = (p.x * f64::from(size) / f64::from(width)).floor() as i64;
    let sy = (p.y * f64::from(size) / f64::from(height)).floor() as i64;
    (sx.clamp(0, size as i64 - 1), sy.clamp(0, size as i64 - 1))
}

/// Integer midpoint line with a per-step gradient.
///
/// The gradient has `D = round(|p1 - p0|)` entries; step `i` of the `N`
/// line pixels takes entry `round(i·(D-1)/(N-1))`, so the first and last
/// pixels carry exactly `c1` and `c2`.
fn draw_gradient_line(img: &mut TopologyImage, p0: (i64, i64), p1: (i64, i64), c1: Rgb, c2: Rgb, thickness: u32) {
    let (dx, dy) = ((p1.0 - p0.0).abs(), (p1.1 - p0.1).abs());
    if dx == 0 && dy == 0 {
        return;
    }
    let length = ((dx * dx + dy * dy) as f64).sqrt();
    let d = (length.round() as usize).max(1);
    let colors: Vec<[u8; 3]> = gradient_edge(c1, c2, d).into_iter().map(quantize).collect();
    let steps = dx.max(dy);
    let (sx, sy) = ((p1.0 - p0.0).signum(), (p1.1 - p0.1).signum());
    let lo = -((thickness.max(1) as i64 - 1) / 2);
    let hi = thickness.max(1) as i64 / 2;
    let x_major = dx >= dy;

    let (mut x, mut y) = p0;
    let (major, minor) = if x_major { (dx, dy) } else { (dy, dx) };
    let mut err = 2 * minor - major;
    for i in 0..=steps {
        let t = if steps == 0 {
            0
        } else {
            ((2 * i * (d as i64 - 1) + steps) / (2 * steps)) as usize
        };
        let rgb = colors[t.min(d - 1)];
        for o in lo..=hi {
            if x_major {
                img.put(x, y + o, rgb);
            } else {
                img.put(x + o, y, rgb);
            }
        }
        if err > 0 {
            if x_major {
                y += sy;
            } else {
                x += sx;
            }
            err -= 2 * major;
        }
        err += 2 * minor;
        if x_major {
            x += sx;
        } else {
            y += sy;
        }
    }
}

fn draw_disc(img: &mut TopologyImage, c: (i64, i64), radius: u32, rgb: [u8; 3]) {
    let r = radius as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                img.put(c.0 + dx, c.1 + dy, rgb);
            }
        }
    }
}

/// Renders with a precomputed colouring (the colouring depends only on the
/// schema, so batch callers compute it once).
pub fn rasterize_with(
    set: &LandmarkSet,
    schema: &AnatomySchema,
    coloring: &NodeColoring,
    style: &RasterStyle,
) -> Result<TopologyImage> {
    if style.size < MIN_RASTER_SIZE {
        return Err(CephError::Config(format!(
            "raster size {} below minimum {MIN_RASTER_SIZE}",
            style.size
        )));
    }
    if set.width == 0 || set.height == 0 {
        return Err(CephError::Validation("landmark set has zero image dimension".into()));
    }
    let mut img = TopologyImage::new(style.size, style.size, style.background);
    let pos = |id| -> Result<(i64, i64)> {
        Ok(raster_position(set.point(id)?, set.width, set.height, style.size))
    };
    for &(a, b) in schema.edges() {
        draw_gradient_line(&mut img, pos(a)?, pos(b)?, coloring.color(a), coloring.color(b), style.edge_thickness);
    }
    for def in schema.landmarks() {
        draw_disc(&mut img, pos(def.index)?, style.node_radius, quantize(coloring.color(def.index)));
    }
    Ok(img)
}

/// Topology conditioning image: gradient edges first, node discs on top.
pub fn rasterize(set: &LandmarkSet, schema: &AnatomySchema, style: &RasterStyle) -> Result<TopologyImage> {
    let coloring = color_nodes(schema)?;
    rasterize_with(set, schema, &coloring, style)
}

pub fn rasterize_batch(
    sets: &[LandmarkSet],
    schema: &AnatomySchema,
    style: &RasterStyle,
) -> Result<Vec<TopologyImage>> {
    let coloring = color_nodes(schema)?;
    sets.par_iter()
        .map(|s| rasterize_with(s, schema, &coloring, style))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_three_steps() {
        let g = gradient_edge([0.0; 3], [255.0; 3], 3);
        assert_eq!(g, vec![[0.0; 3], [127.5; 3], [255.0; 3]]);
    }

    #[test]
    fn gradient_degenerate_lengths() {
        assert_eq!(gradient_edge([1.0, 2.0, 3.0], [9.0; 3], 1), vec![[1.0, 2.0, 3.0]]);
        assert!(gradient_edge([1.0; 3], [2.0; 3], 0).is_empty());
        let c = [12.5, 99.0, 3.25];
        assert!(gradient_edge(c, c, 17).iter().all(|x| *x == c));
    }

    #[test]
    fn quantize_ties_to_even() {
        assert_eq!(quantize([127.5, 128.5, 0.4999]), [128, 128, 0]);
        assert_eq!(quantize([191.25, 63.75, 255.0]), [191, 64, 255]);
    }

    #[test]
    fn horizontal_line_endpoints_carry_node_colors() {
        let mut img = TopologyImage::new(40, 40, [0, 0, 0]);
        draw_gradient_line(&mut img, (2, 5), (30, 5), [255.0, 0.0, 0.0], [0.0, 0.0, 255.0], 1);
        assert_eq!(img.get(2, 5), [255, 0, 0]);
        assert_eq!(img.get(30, 5), [0, 0, 255]);
        // step 14 of 28 takes gradient entry round(14*27/28) = 14 of 28
        assert_eq!(img.get(16, 5), [123, 0, 132]);
        assert_eq!(img.get(16, 6), [0, 0, 0]);
    }

    #[test]
    fn steep_line_covers_every_row_and_thickens_sideways() {
        let mut img = TopologyImage::new(40, 40, [0, 0, 0]);
        draw_gradient_line(&mut img, (20, 35), (17, 3), [0.0, 255.0, 0.0], [0.0, 255.0, 0.0], 2);
        for y in 3..=35 {
            let lit = (0..40).filter(|&x| img.get(x, y) != [0, 0, 0]).count();
            assert_eq!(lit, 2, "row {y}");
        }
    }

    #[test]
    fn small_raster_rejected() {
        let schema = AnatomySchema::default_schema();
        let set = LandmarkSet::new(10, 10, 0.1);
        let style = RasterStyle { size: 31, ..Default::default() };
        assert!(matches!(rasterize(&set, &schema, &style), Err(CephError::Config(_))));
    }

    #[test]
    fn png_round_trip() {
        let mut img = TopologyImage::new(33, 34, [1, 2, 3]);
        img.put(5, 6, [200, 100, 50]);
        let back = TopologyImage::from_png(&img.to_png().unwrap()).unwrap();
        assert_eq!(back.pixels, img.pixels);
        assert_eq!((back.width, back.height), (33, 34));
    }
}
