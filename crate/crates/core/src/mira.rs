//! Landmark augmentation: one global affine per sample followed by a random
//! subset of anatomy constraints, each resampled inside its declared range.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anatomy::{
    measure_angle, validate_landmark_set, AnatomySchema, AngleConstraint, LandmarkSet, Point,
};
use crate::error::{CephError, Result};
use crate::rng::{slot_rng, slot_seed, DOMAIN_MIRA};

/// Applied constraints must land this close to their sampled targets.
const TARGET_TOLERANCE_DEG: f64 = 1e-9;

/// Scale, rotate and translate about `center`:
///
/// ```text
/// | x' |   | sx·cosθ  -sy·sinθ | | x - cx |   | cx + tx |
/// | y' | = | sx·sinθ   sy·cosθ | | y - cy | + | cy + ty |
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalAffine {
    pub scale_x: f64,
    pub scale_y: f64,
    /// Radians.
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
    pub center: Point,
}

impl GlobalAffine {
    pub const IDENTITY: GlobalAffine = GlobalAffine {
        scale_x: 1.0,
        scale_y: 1.0,
        theta: 0.0,
        tx: 0.0,
        ty: 0.0,
        center: Point::new(0.0, 0.0),
    };

    /// Homogeneous 3x3 matrix acting on column vectors `(x, y, 1)`.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (s, c) = self.theta.sin_cos();
        let m = [
            [self.scale_x * c, -self.scale_y * s],
            [self.scale_x * s, self.scale_y * c],
        ];
        let (cx, cy) = (self.center.x, self.center.y);
        [
            [m[0][0], m[0][1], cx + self.tx - m[0][0] * cx - m[0][1] * cy],
            [m[1][0], m[1][1], cy + self.ty - m[1][0] * cx - m[1][1] * cy],
            [0.0, 0.0, 1.0],
        ]
    }

    pub fn apply_point(&self, p: Point) -> Point {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p.x - self.center.x, p.y - self.center.y);
        // Written as p + (M - I)·d + t so the identity maps points exactly.
        let ex = (self.scale_x * c - 1.0) * dx - self.scale_y * s * dy;
        let ey = self.scale_x * s * dx + (self.scale_y * c - 1.0) * dy;
        Point::new(p.x + ex + self.tx, p.y + ey + self.ty)
    }
}

/// Maps every landmark through the affine; image geometry and tags are kept.
pub fn apply_affine(set: &LandmarkSet, a: &GlobalAffine) -> LandmarkSet {
    let mut out = set.clone();
    for p in out.points.values_mut() {
        *p = a.apply_point(*p);
    }
    out
}

fn rotate_about(p: Point, pivot: Point, delta: f64) -> Point {
    let s = delta.sin();
    let cm1 = -2.0 * (delta / 2.0).sin().powi(2);
    let (dx, dy) = (p.x - pivot.x, p.y - pivot.y);
    Point::new(p.x + cm1 * dx - s * dy, p.y + s * dx + cm1 * dy)
}

/// Sets the constraint's angle to `target_deg` by rotating `ray_b` and the
/// coupled landmarks rigidly about the vertex. Every other landmark is left
/// untouched and the side of `ray_a` that `ray_b` lies on is preserved.
pub fn apply_angle_augmentation(
    set: &LandmarkSet,
    c: &AngleConstraint,
    target_deg: f64,
) -> Result<LandmarkSet> {
    if !(target_deg.is_finite() && target_deg >= c.min_deg && target_deg <= c.max_deg) {
        return Err(CephError::Config(format!(
            "target {target_deg} outside [{}, {}] for constraint {}",
            c.min_deg, c.max_deg, c.name
        )));
    }
    let vertex = set.point(c.vertex)?;
    let a = set.point(c.ray_a)?;
    let b = set.point(c.ray_b)?;
    let (ax, ay) = (a.x - vertex.x, a.y - vertex.y);
    let (bx, by) = (b.x - vertex.x, b.y - vertex.y);
    if ax == 0.0 && ay == 0.0 {
        return Err(CephError::Degenerate(format!(
            "constraint {}: vertex and ray_a coincide",
            c.name
        )));
    }
    if bx == 0.0 && by == 0.0 {
        return Err(CephError::Degenerate(format!(
            "constraint {}: vertex and ray_b coincide",
            c.name
        )));
    }
    let signed = (ax * by - ay * bx).atan2(ax * bx + ay * by);
    let side = if signed < 0.0 { -1.0 } else { 1.0 };
    let delta = side * target_deg.to_radians() - signed;

    let mut out = set.clone();
    for id in std::iter::once(c.ray_b).chain(c.coupled.iter().copied()) {
        if id == c.vertex || id == c.ray_a {
            continue;
        }
        if let Some(p) = out.points.get_mut(&id) {
            *p = rotate_about(*p, vertex, delta);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Number of output sets (`n_l`).
    pub count: usize,
    pub seed: u64,
    /// Per-axis scale factor range.
    pub scale_range: [f64; 2],
    pub rotation_range_deg: [f64; 2],
    /// Translation as a fraction of the image dimension on each axis.
    pub translation_range_frac: [f64; 2],
    pub anatomical_min: usize,
    pub anatomical_max: usize,
    /// Reject and resample out-of-frame samples; otherwise clamp into frame.
    pub reject_out_of_bounds: bool,
    pub max_consecutive_rejections: usize,
    pub reprojection_rounds: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            count: 1,
            seed: 0,
            scale_range: [0.92, 1.08],
            rotation_range_deg: [-5.0, 5.0],
            translation_range_frac: [-0.04, 0.04],
            anatomical_min: 1,
            anatomical_max: 3,
            reject_out_of_bounds: true,
            max_consecutive_rejections: 1000,
            reprojection_rounds: 10,
        }
    }
}

impl AugmentConfig {
    /// Defaults with the constraint count capped to what `schema` declares.
    pub fn for_schema(schema: &AnatomySchema) -> Self {
        let n = schema.constraints().len();
        let d = Self::default();
        Self {
            anatomical_min: d.anatomical_min.min(n),
            anatomical_max: d.anatomical_max.min(n),
            ..d
        }
    }

    pub fn validate(&self, schema: &AnatomySchema) -> Result<()> {
        let bad = |m: String| Err(CephError::Config(m));
        if self.count == 0 {
            return bad("count (n_l) must be >= 1".into());
        }
        for (name, [lo, hi]) in [
            ("scale_range", self.scale_range),
            ("rotation_range_deg", self.rotation_range_deg),
            ("translation_range_frac", self.translation_range_frac),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} [{lo}, {hi}] is not a non-empty interval"));
            }
        }
        if self.scale_range[0] <= 0.0 {
            return bad("scale factors must be > 0".into());
        }
        let n = schema.constraints().len();
        if self.anatomical_min > self.anatomical_max || self.anatomical_max > n {
            return bad(format!(
                "need 0 <= anatomical_min ({}) <= anatomical_max ({}) <= constraint count ({n})",
                self.anatomical_min, self.anatomical_max
            ));
        }
        if self.max_consecutive_rejections == 0 {
            return bad("max_consecutive_rejections must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedConstraint {
    pub name: String,
    pub target_deg: f64,
}

/// How one output set was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub affine: GlobalAffine,
    pub applied_constraints: Vec<AppliedConstraint>,
    pub seed_stream: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub set: LandmarkSet,
    pub provenance: Provenance,
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn source_id(set: &LandmarkSet, index: usize) -> String {
    set.id.clone().unwrap_or_else(|| format!("pool-{index:04}"))
}

fn clamp_into_frame(set: &mut LandmarkSet) {
    let (w, h) = (f64::from(set.width), f64::from(set.height));
    for p in set.points.values_mut() {
        p.x = p.x.clamp(0.0, w.next_down());
        p.y = p.y.clamp(0.0, h.next_down());
    }
}

/// Applies the chosen constraints in schema order, then re-projects all of
/// them together until each sits on its target or the round budget runs out.
fn enforce_constraints(
    mut set: LandmarkSet,
    applied: &[(&AngleConstraint, f64)],
    rounds: usize,
) -> Result<Option<LandmarkSet>> {
    for (c, target) in applied {
        set = apply_angle_augmentation(&set, c, *target)?;
    }
    for round in 0..=rounds {
        let settled = applied.iter().all(|(c, target)| {
            measure_angle(&set, c).is_ok_and(|m| (m - target).abs() <= TARGET_TOLERANCE_DEG)
        });
        if settled {
            return Ok(Some(set));
        }
        if round == rounds {
            break;
        }
        for (c, target) in applied {
            set = apply_angle_augmentation(&set, c, *target)?;
        }
    }
    Ok(None)
}

fn generate_slot(
    pool: &[LandmarkSet],
    cfg: &AugmentConfig,
    schema: &AnatomySchema,
    slot: usize,
) -> Result<Augmented> {
    let mut rng = slot_rng(cfg.seed, DOMAIN_MIRA, slot as u64);
    let constraints = schema.constraints();
    for _ in 0..cfg.max_consecutive_rejections {
        let src_index = rng.gen_range(0..pool.len());
        let src = &pool[src_index];
        let affine = GlobalAffine {
            scale_x: uniform(&mut rng, cfg.scale_range),
            scale_y: uniform(&mut rng, cfg.scale_range),
            theta: uniform(&mut rng, cfg.rotation_range_deg).to_radians(),
            tx: uniform(&mut rng, cfg.translation_range_frac) * f64::from(src.width),
            ty: uniform(&mut rng, cfg.translation_range_frac) * f64::from(src.height),
            center: src.centroid(),
        };
        let k = rng.gen_range(cfg.anatomical_min..=cfg.anatomical_max);
        let mut picked = sample(&mut rng, constraints.len(), k).into_vec();
        picked.sort_unstable();
        let applied: Vec<(&AngleConstraint, f64)> = picked
            .iter()
            .map(|&i| {
                let c = &constraints[i];
                (c, uniform(&mut rng, [c.min_deg, c.max_deg]))
            })
            .collect();

        let moved = apply_affine(src, &affine);
        let Some(mut candidate) = enforce_constraints(moved, &applied, cfg.reprojection_rounds)?
        else {
            continue;
        };
        if !cfg.reject_out_of_bounds {
            clamp_into_frame(&mut candidate);
        }
        if !validate_landmark_set(&candidate, schema).is_valid() {
            continue;
        }
        candidate.id = Some(format!("aug-{slot:06}"));
        return Ok(Augmented {
            set: candidate,
            provenance: Provenance {
                source_id: source_id(src, src_index),
                affine,
                applied_constraints: applied
                    .iter()
                    .map(|(c, t)| AppliedConstraint { name: c.name.clone(), target_deg: *t })
                    .collect(),
                seed_stream: slot_seed(cfg.seed, DOMAIN_MIRA, slot as u64),
            },
        });
    }
    Err(CephError::ResampleBudget { slot, attempts: cfg.max_consecutive_rejections })
}

/// Expands `pool` into `cfg.count` augmented landmark sets.
///
/// Slot `i` draws from its own stream derived from `(cfg.seed, i)`, so the
/// output depends only on the pool order and the config, never on the
/// number of worker threads.
pub fn mira_generate(
    pool: &[LandmarkSet],
    cfg: &AugmentConfig,
    schema: &AnatomySchema,
) -> Result<Vec<Augmented>> {
    if pool.is_empty() {
        return Err(CephError::Config("augmentation pool is empty".into()));
    }
    cfg.validate(schema)?;
    for (i, set) in pool.iter().enumerate() {
        let report = validate_landmark_set(set, schema);
        if !report.is_valid() {
            return Err(CephError::Validation(format!(
                "pool member {} is invalid: {report}",
                source_id(set, i)
            )));
        }
    }
    (0..cfg.count)
        .into_par_iter()
        .map(|slot| generate_slot(pool, cfg, schema, slot))
        .collect()
}
