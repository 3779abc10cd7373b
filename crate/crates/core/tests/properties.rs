use proptest::prelude::*;

use cephforge::ait::{color_nodes, quantize, rasterize, raster_position, RasterStyle};
use cephforge::anatomy::{measure_angle, validate_landmark_set, AnatomySchema, LandmarkId, LandmarkSet, Point};
use cephforge::heatmap::{decode, encode, mse_loss, CodecConfig, HeatmapStack};
use cephforge::metrics::{evaluate, summarize, EvalOptions};
use cephforge::mira::{apply_affine, apply_angle_augmentation, GlobalAffine};
use cephforge::pipeline::template_set;

fn jittered(offsets: &[(f64, f64)]) -> LandmarkSet {
    let mut set = template_set();
    for (p, (dx, dy)) in set.points.values_mut().zip(offsets) {
        p.x += dx;
        p.y += dy;
    }
    set
}

fn offsets() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-30.0..30.0f64, -30.0..30.0f64), 38)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn angles_survive_similarity_transforms(
        off in offsets(),
        s in 0.5..2.0f64,
        theta in -3.1..3.1f64,
        tx in -500.0..500.0f64,
        ty in -500.0..500.0f64,
    ) {
        let schema = AnatomySchema::default_schema();
        let set = jittered(&off);
        let a = GlobalAffine { scale_x: s, scale_y: s, theta, tx, ty, center: set.centroid() };
        let moved = apply_affine(&set, &a);
        for c in schema.constraints() {
            let before = measure_angle(&set, c).unwrap();
            let after = measure_angle(&moved, c).unwrap();
            prop_assert!((before - after).abs() < 1e-9, "{}: {before} vs {after}", c.name);
        }
    }

    #[test]
    fn affine_keeps_collinear_points_collinear(
        p in (-1e3..1e3f64, -1e3..1e3f64),
        dir in (-1.0..1.0f64, -1.0..1.0f64),
        t in prop::collection::vec(-5.0..5.0f64, 3),
        sx in 0.5..2.0f64,
        sy in 0.5..2.0f64,
        theta in -3.1..3.1f64,
    ) {
        let pts: Vec<Point> = t.iter().map(|k| Point::new(p.0 + k * dir.0, p.1 + k * dir.1)).collect();
        let a = GlobalAffine { scale_x: sx, scale_y: sy, theta, tx: 3.0, ty: -7.0, center: Point::new(10.0, 20.0) };
        let q: Vec<Point> = pts.iter().map(|&x| a.apply_point(x)).collect();
        let cross = (q[1].x - q[0].x) * (q[2].y - q[0].y) - (q[1].y - q[0].y) * (q[2].x - q[0].x);
        let scale = (q[1].distance(q[0]) * q[2].distance(q[0])).max(1.0);
        prop_assert!(cross.abs() / scale < 1e-9);
    }

    #[test]
    fn augmentation_hits_target_and_leaves_others(off in offsets(), k in 0usize..6, frac in 0.0..1.0f64) {
        let schema = AnatomySchema::default_schema();
        let set = jittered(&off);
        let c = &schema.constraints()[k];
        let target = c.min_deg + frac * (c.max_deg - c.min_deg);
        let out = apply_angle_augmentation(&set, c, target).unwrap();
        prop_assert!((measure_angle(&out, c).unwrap() - target).abs() < 1e-9);
        for (id, p) in &set.points {
            if *id != c.ray_b && !c.coupled.contains(id) {
                prop_assert_eq!(out.points[id], *p);
            } else {
                let r0 = p.distance(set.points[&c.vertex]);
                let r1 = out.points[id].distance(out.points[&c.vertex]);
                prop_assert!((r0 - r1).abs() < 1e-9 * r0.max(1.0));
            }
        }
    }

    #[test]
    fn validation_is_idempotent_and_survives_json(off in prop::collection::vec((-200.0..200.0f64, -200.0..200.0f64), 38)) {
        let schema = AnatomySchema::default_schema();
        let set = jittered(&off);
        let a = validate_landmark_set(&set, &schema);
        let b = validate_landmark_set(&set, &schema);
        prop_assert_eq!(&a, &b);
        let back = LandmarkSet::from_json_str(&set.to_json(), "round trip").unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(validate_landmark_set(&back, &schema), a);
    }

    #[test]
    fn node_centres_carry_node_colours(off in offsets(), size in 64u32..600) {
        let schema = AnatomySchema::default_schema();
        let set = jittered(&off);
        let style = RasterStyle { size, ..RasterStyle::default() };
        let img = rasterize(&set, &schema, &style).unwrap();
        let coloring = color_nodes(&schema).unwrap();
        // discs are drawn in schema order, so the last disc covering a
        // centre pixel decides its colour
        let pos: Vec<(i64, i64)> = LandmarkId::all()
            .map(|id| raster_position(set.points[&id], set.width, set.height, size))
            .collect();
        let r = i64::from(style.node_radius);
        for &(x, y) in &pos {
            let last = (0..pos.len())
                .rev()
                .find(|&j| (pos[j].0 - x).pow(2) + (pos[j].1 - y).pow(2) <= r * r)
                .unwrap();
            prop_assert_eq!(img.get(x as u32, y as u32), quantize(coloring.color(LandmarkId(last as u8 + 1))));
        }
    }

    #[test]
    fn pooled_metrics_ignore_grouping(
        errs in prop::collection::vec(prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 38), 1..5),
    ) {
        let gt = template_set();
        let pairs: Vec<(LandmarkSet, LandmarkSet)> = errs.iter().map(|o| {
            let mut pred = gt.clone();
            for (p, (dx, dy)) in pred.points.values_mut().zip(o) {
                p.x += dx;
                p.y += dy;
            }
            (pred, gt.clone())
        }).collect();
        let opts = EvalOptions::default();
        let whole = evaluate(&pairs, &opts).unwrap();
        let mut reversed = pairs.clone();
        reversed.reverse();
        let rev = evaluate(&reversed, &opts).unwrap();
        let flat: Vec<f64> = pairs.iter().flat_map(|(p, g)| {
            g.points.iter().map(|(id, q)| p.points[id].distance(*q) * g.spacing_mm_per_px).collect::<Vec<_>>()
        }).collect();
        let pooled = summarize(&flat, &opts, pairs.len()).unwrap();
        for r in [&rev, &pooled] {
            prop_assert!((r.mre_mm - whole.mre_mm).abs() < 1e-12);
            prop_assert!((r.sd_mm - whole.sd_mm).abs() < 1e-12);
            prop_assert_eq!(&r.sdr, &whole.sdr);
        }
        prop_assert!(whole.sdr.windows(2).all(|w| w[0].rate <= w[1].rate));
    }

    #[test]
    fn metrics_are_scale_consistent(o in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 38)) {
        let gt = template_set();
        let mut pred = gt.clone();
        for (p, (dx, dy)) in pred.points.values_mut().zip(&o) {
            p.x += dx;
            p.y += dy;
        }
        let mut gt2 = gt.clone();
        gt2.spacing_mm_per_px /= 2.0;
        for p in gt2.points.values_mut() {
            p.x *= 2.0;
            p.y *= 2.0;
        }
        let mut pred2 = pred.clone();
        for p in pred2.points.values_mut() {
            p.x *= 2.0;
            p.y *= 2.0;
        }
        let opts = EvalOptions::default();
        let a = evaluate(&[(pred, gt)], &opts).unwrap();
        let b = evaluate(&[(pred2, gt2)], &opts).unwrap();
        prop_assert!((a.mre_mm - b.mre_mm).abs() < 1e-12 && (a.sd_mm - b.sd_mm).abs() < 1e-12);
        prop_assert_eq!(a.sdr, b.sdr);
    }

    #[test]
    fn heatmap_decoding_is_translation_equivariant(
        x in 0.0..200.0f64,
        y in 0.0..200.0f64,
        sx in 0usize..60,
        sy in 0usize..60,
    ) {
        let cfg = CodecConfig::for_input(512, 512);
        let stride = cfg.stride_for(512, 512);
        let at = |p: Point| {
            let set = LandmarkSet::new(512, 512, 0.1).with_points([(LandmarkId(1), p)]);
            decode(&encode(&set, &cfg).unwrap(), &cfg, (512, 512))[0].point
        };
        let a = at(Point::new(x, y));
        let b = at(Point::new(x + sx as f64 * stride, y + sy as f64 * stride));
        prop_assert!((b.x - a.x - sx as f64 * stride).abs() < 1e-9);
        prop_assert!((b.y - a.y - sy as f64 * stride).abs() < 1e-9);
    }

    #[test]
    fn mse_is_symmetric_and_non_negative(
        a in prop::collection::vec(-2.0..2.0f64, 2 * 8 * 9),
        b in prop::collection::vec(-2.0..2.0f64, 2 * 8 * 9),
    ) {
        let pa = HeatmapStack::new(2, 8, 9, 4.0, a).unwrap();
        let pb = HeatmapStack::new(2, 8, 9, 4.0, b).unwrap();
        let ab = mse_loss(&pa, &pb).unwrap();
        prop_assert_eq!(ab, mse_loss(&pb, &pa).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(mse_loss(&pa, &pa).unwrap(), 0.0);
    }
}
