use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ait::{color_nodes, png_dimensions, rasterize_with, RasterStyle, MIN_RASTER_SIZE};
use crate::anatomy::{validate_landmark_set, AnatomySchema, LandmarkSet};
use crate::error::{CephError, Result};
use crate::mira::{mira_generate, AugmentConfig, Provenance};
use crate::pdg::{generate_prompts, validate_prompt, Prompt, PromptLexicon};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const PROMPTS_FILE: &str = "prompts.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub id: String,
    pub topology_image: String,
    pub prompt: String,
    pub landmarks: String,
    pub spacing_mm_per_px: f64,
    pub width: u32,
    pub height: u32,
    pub provenance: Provenance,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleConfig {
    pub augment: AugmentConfig,
    pub style: RasterStyle,
}

/// Runs augmentation, rasterisation and prompt generation and writes the
/// bundle tree under `out`:
///
/// ```text
/// out/images/<id>.png  out/landmarks/<id>.json  out/prompts.txt  out/manifest.jsonl
/// ```
///
/// Prompt `i` is paired with landmark set `i`. Everything is written into a
/// sibling staging directory first and renamed into place at the end, so a
/// failure leaves no partial `out`.
pub fn build_bundles(
    pool: &[LandmarkSet],
    schema: &AnatomySchema,
    cfg: &BundleConfig,
    lexicon: &PromptLexicon,
    out: &Path,
) -> Result<Vec<BundleRecord>> {
    if cfg.style.size < MIN_RASTER_SIZE {
        return Err(CephError::Config(format!("raster size {} below minimum {MIN_RASTER_SIZE}", cfg.style.size)));
    }
    if out.exists() {
        let mut entries = std::fs::read_dir(out).map_err(|e| CephError::io(out, e))?;
        if entries.next().is_some() {
            return Err(CephError::Config(format!("output directory {} is not empty", out.display())));
        }
    }
    let augmented = mira_generate(pool, &cfg.augment, schema)?;
    let prompts = generate_prompts(lexicon, cfg.augment.count, cfg.augment.seed)?;
    let coloring = color_nodes(schema)?;

    let staging = staging_dir(out)?;
    let result = (|| {
        for sub in ["images", "landmarks"] {
            let p = staging.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| CephError::io(&p, e))?;
        }
        let records: Vec<BundleRecord> = augmented
            .par_iter()
            .zip(prompts.par_iter())
            .map(|(aug, prompt)| {
                let id = aug.set.id.clone().expect("augmented sets carry ids");
                let image = format!("images/{id}.png");
                let landmarks = format!("landmarks/{id}.json");
                rasterize_with(&aug.set, schema, &coloring, &cfg.style)?.save_png(&staging.join(&image))?;
                aug.set.save(&staging.join(&landmarks))?;
                Ok(BundleRecord {
                    id,
                    topology_image: image,
                    prompt: prompt.text.clone(),
                    landmarks,
                    spacing_mm_per_px: aug.set.spacing_mm_per_px,
                    width: aug.set.width,
                    height: aug.set.height,
                    provenance: aug.provenance.clone(),
                    seed: cfg.augment.seed,
                })
            })
            .collect::<Result<_>>()?;
        write_text(&staging.join(PROMPTS_FILE), &prompt_lines(&prompts))?;
        write_text(&staging.join(MANIFEST_FILE), &manifest_text(&records))?;
        Ok(records)
    })();
    let records = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = std::fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    if out.exists() {
        std::fs::remove_dir(out).map_err(|e| CephError::io(out, e))?;
    }
    if let Err(e) = std::fs::rename(&staging, out) {
        let _ = std::fs::remove_dir_all(&staging);
        return Err(CephError::io(out, e));
    }
    Ok(records)
}

fn staging_dir(out: &Path) -> Result<PathBuf> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| CephError::io(&parent, e))?;
    let name = out
        .file_name()
        .ok_or_else(|| CephError::Config(format!("bad output path {}", out.display())))?
        .to_string_lossy();
    let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(|e| CephError::io(&staging, e))?;
    }
    std::fs::create_dir(&staging).map_err(|e| CephError::io(&staging, e))?;
    Ok(staging)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CephError::io(path, e))
}

fn prompt_lines(prompts: &[Prompt]) -> String {
    let mut s = String::new();
    for p in prompts {
        s.push_str(&p.text);
        s.push('\n');
    }
    s
}

fn manifest_text(records: &[BundleRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}", serde_json::to_string(r).expect("record serialises"));
    }
    s
}

pub fn read_manifest(dir: &Path) -> Result<Vec<BundleRecord>> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CephError::io(&path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CephError::json(format!("{}:{}", path.display(), i + 1), e)))
        .collect()
}

fn safe_relative(p: &str) -> bool {
    let path = Path::new(p);
    !p.is_empty() && path.components().all(|c| matches!(c, Component::Normal(_)))
}

fn check_record(dir: &Path, r: &BundleRecord, schema: &AnatomySchema, lexicon: &PromptLexicon) -> Vec<String> {
    let mut defects = Vec::new();
    let mut defect = |m: String| defects.push(format!("{}: {m}", r.id));
    for p in [&r.topology_image, &r.landmarks] {
        if !safe_relative(p) {
            defect(format!("path {p:?} is not a plain relative path"));
        }
    }
    match png_dimensions(&dir.join(&r.topology_image)) {
        Ok((w, h, color)) => {
            if w != h || w < MIN_RASTER_SIZE {
                defect(format!("topology image is {w}x{h}"));
            }
            if color != png::ColorType::Rgb {
                defect(format!("topology image colour type {color:?}, expected RGB"));
            }
        }
        Err(e) => defect(format!("topology image unreadable: {e}")),
    }
    match LandmarkSet::load(&dir.join(&r.landmarks)) {
        Ok(set) => {
            let report = validate_landmark_set(&set, schema);
            if !report.is_valid() {
                defect(format!("landmarks invalid: {report}"));
            }
            if (set.width, set.height) != (r.width, r.height) || set.spacing_mm_per_px != r.spacing_mm_per_px {
                defect("landmark geometry disagrees with the record".into());
            }
        }
        Err(e) => defect(format!("landmarks unreadable: {e}")),
    }
    match Prompt::parse(&r.prompt) {
        Ok(p) => {
            for v in validate_prompt(&p, lexicon) {
                defect(format!("prompt violation: {v}"));
            }
        }
        Err(e) => defect(format!("prompt unparseable: {e}")),
    }
    defects
}

/// Integrity sweep over a bundle directory. Returns one line per defect;
/// an unreadable or malformed manifest is an error.
pub fn verify_manifest(dir: &Path, schema: &AnatomySchema, lexicon: &PromptLexicon) -> Result<Vec<String>> {
    let records = read_manifest(dir)?;
    let mut defects = Vec::new();
    if records.is_empty() {
        defects.push("manifest has no records".to_string());
    }
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            defects.push(format!("{}: duplicate id", r.id));
        }
    }
    let per_record: Vec<Vec<String>> = records
        .par_iter()
        .map(|r| check_record(dir, r, schema, lexicon))
        .collect();
    defects.extend(per_record.into_iter().flatten());
    let prompts_path = dir.join(PROMPTS_FILE);
    if prompts_path.exists() {
        let text = std::fs::read_to_string(&prompts_path).map_err(|e| CephError::io(&prompts_path, e))?;
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() != records.len() {
            defects.push(format!("{PROMPTS_FILE} has {} lines for {} records", lines.len(), records.len()));
        } else if let Some(i) = records.iter().zip(&lines).position(|(r, l)| r.prompt != *l) {
            defects.push(format!("{}: prompt differs from {PROMPTS_FILE} line {}", records[i].id, i + 1));
        }
    }
    Ok(defects)
}
