//! Radial error, MRE ± SD and success detection rate (SDR).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::anatomy::{LandmarkId, LandmarkSet};
use crate::error::{CephError, Result};

pub const DEFAULT_THRESHOLDS_MM: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialError {
    pub landmark: LandmarkId,
    pub error_mm: f64,
}

/// Per-landmark Euclidean error in millimetres, using the ground-truth
/// spacing.
pub fn radial_errors(pred: &LandmarkSet, gt: &LandmarkSet) -> Result<Vec<RadialError>> {
    let pred_ids: BTreeSet<_> = pred.points.keys().collect();
    let gt_ids: BTreeSet<_> = gt.points.keys().collect();
    if pred_ids != gt_ids {
        let missing: Vec<String> = gt_ids.difference(&pred_ids).map(|id| id.0.to_string()).collect();
        let extra: Vec<String> = pred_ids.difference(&gt_ids).map(|id| id.0.to_string()).collect();
        return Err(CephError::Validation(format!(
            "landmark id mismatch: missing in prediction [{}], unexpected [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    Ok(gt
        .points
        .iter()
        .map(|(id, g)| RadialError {
            landmark: *id,
            error_mm: pred.points[id].distance(*g) * gt.spacing_mm_per_px,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdMode {
    /// Divide by `N`.
    #[default]
    Population,
    /// Divide by `N - 1`.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub thresholds_mm: Vec<f64>,
    pub sd_mode: SdMode,
    /// `error <= t` counts as a success when true, `error < t` otherwise.
    pub inclusive: bool,
    pub by_tag: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            thresholds_mm: DEFAULT_THRESHOLDS_MM.to_vec(),
            sd_mode: SdMode::Population,
            inclusive: true,
            by_tag: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdrEntry {
    pub threshold_mm: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mre_mm: f64,
    pub sd_mm: f64,
    pub sdr: Vec<SdrEntry>,
    pub n_landmarks: usize,
    pub n_images: usize,
    pub sd_mode: SdMode,
    pub inclusive: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsets: Vec<(String, EvalReport)>,
}

impl EvalReport {
    pub fn sdr_at(&self, threshold_mm: f64) -> Option<f64> {
        self.sdr.iter().find(|e| e.threshold_mm == threshold_mm).map(|e| e.rate)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.sdr.iter().map(|e| e.threshold_mm).collect()
    }

    pub fn subset(&self, tag: &str) -> Option<&EvalReport> {
        self.subsets.iter().find(|(t, _)| t == tag).map(|(_, r)| r)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

fn check_thresholds(t: &[f64]) -> Result<()> {
    if t.is_empty() {
        return Err(CephError::Config("at least one SDR threshold is required".into()));
    }
    if t.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(CephError::Config("thresholds must be positive".into()));
    }
    if t.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CephError::Config("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// Summary statistics over a pool of radial errors in millimetres.
pub fn summarize(errors: &[f64], opts: &EvalOptions, n_images: usize) -> Result<EvalReport> {
    check_thresholds(&opts.thresholds_mm)?;
    if errors.is_empty() {
        return Err(CephError::Validation("no radial errors to evaluate".into()));
    }
    let n = errors.len() as f64;
    let mre = errors.iter().sum::<f64>() / n;
    let ss: f64 = errors.iter().map(|e| (e - mre) * (e - mre)).sum();
    let sd = match opts.sd_mode {
        SdMode::Population => (ss / n).sqrt(),
        SdMode::Sample if errors.len() > 1 => (ss / (n - 1.0)).sqrt(),
        SdMode::Sample => 0.0,
    };
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sdr = opts
        .thresholds_mm
        .iter()
        .map(|&t| {
            let hits = if opts.inclusive {
                sorted.partition_point(|&e| e <= t)
            } else {
                sorted.partition_point(|&e| e < t)
            };
            SdrEntry { threshold_mm: t, rate: hits as f64 / n }
        })
        .collect();
    Ok(EvalReport {
        mre_mm: mre,
        sd_mm: sd,
        sdr,
        n_landmarks: errors.len(),
        n_images,
        sd_mode: opts.sd_mode,
        inclusive: opts.inclusive,
        subsets: Vec::new(),
    })
}

/// Pools every landmark error of every `(pred, gt)` pair. With `by_tag`,
/// adds one nested report per ground-truth tag over the pairs carrying it.
pub fn evaluate(pairs: &[(LandmarkSet, LandmarkSet)], opts: &EvalOptions) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(CephError::Validation("empty evaluation pool".into()));
    }
    let per_pair: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(p, g)| Ok(radial_errors(p, g)?.into_iter().map(|e| e.error_mm).collect()))
        .collect::<Result<_>>()?;
    let pooled: Vec<f64> = per_pair.iter().flatten().copied().collect();
    let mut report = summarize(&pooled, opts, pairs.len())?;
    if opts.by_tag {
        let tags: BTreeSet<&String> = pairs.iter().flat_map(|(_, g)| &g.tags).collect();
        for tag in tags {
            let idx: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].1.tags.contains(tag)).collect();
            let errs: Vec<f64> = idx.iter().flat_map(|&i| per_pair[i].iter().copied()).collect();
            report.subsets.push((tag.clone(), summarize(&errs, opts, idx.len())?));
        }
    }
    Ok(report)
}

/// `+x.xxx` / `-x.xxx`, with zero shown as `+0.000`.
pub fn format_delta(delta: f64) -> String {
    let rounded = (delta * 1000.0).round() / 1000.0;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:+.3}")
}

/// `value(+delta)` against a baseline, e.g. `82.206(+6.454)`.
pub fn format_with_delta(value: f64, baseline: f64) -> String {
    format!("{value:.3}({})", format_delta(value - baseline))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub metric: String,
    pub baseline: f64,
    pub value: f64,
    pub delta: f64,
}

impl DeltaRow {
    pub fn formatted(&self) -> String {
        format_with_delta(self.value, self.baseline)
    }
}

/// Signed differences `b - a` for MRE, SD and each SDR (in percent).
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<Vec<DeltaRow>> {
    if a.thresholds() != b.thresholds() {
        return Err(CephError::Config(format!(
            "threshold mismatch: {:?} vs {:?}",
            a.thresholds(),
            b.thresholds()
        )));
    }
    let mut rows = vec![
        DeltaRow { metric: "MRE (mm)".into(), baseline: a.mre_mm, value: b.mre_mm, delta: b.mre_mm - a.mre_mm },
        DeltaRow { metric: "SD (mm)".into(), baseline: a.sd_mm, value: b.sd_mm, delta: b.sd_mm - a.sd_mm },
    ];
    for (ea, eb) in a.sdr.iter().zip(&b.sdr) {
        let (pa, pb) = (ea.rate * 100.0, eb.rate * 100.0);
        rows.push(DeltaRow {
            metric: format!("SDR {}mm (%)", ea.threshold_mm),
            baseline: pa,
            value: pb,
            delta: pb - pa,
        });
    }
    Ok(rows)
}

fn row(label: &str, r: &EvalReport) -> Vec<String> {
    let mut cells = vec![label.to_string(), format!("{:.3} ± {:.3}", r.mre_mm, r.sd_mm)];
    cells.extend(r.sdr.iter().map(|e| format!("{:.3}", e.rate * 100.0)));
    cells.push(r.n_images.to_string());
    cells
}

/// Aligned plain-text table: one row overall, then one per tag.
pub fn format_table(report: &EvalReport) -> String {
    let mut header = vec!["Subset".to_string(), "MRE ± SD (mm)".to_string()];
    header.extend(report.sdr.iter().map(|e| format!("SDR {}mm (%)", e.threshold_mm)));
    header.push("Images".into());
    let mut rows = vec![header, row("All", report)];
    for (tag, sub) in &report.subsets {
        rows.push(row(tag, sub));
    }
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}", w = *w))
            .collect();
        let _ = writeln!(out, "{}", line.join(" | ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("-+-"));
        }
    }
    let _ = writeln!(
        out,
        "SD: {}; SDR boundary: {}",
        match report.sd_mode {
            SdMode::Population => "population",
            SdMode::Sample => "sample",
        },
        if report.inclusive { "error <= t" } else { "error < t" }
    );
    out
}

pub fn format_comparison(rows: &[DeltaRow]) -> String {
    let w = rows.iter().map(|r| r.metric.len()).max().unwrap_or(0);
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(out, "{:<w$}  {:>9.3}  {}", r.metric, r.baseline, r.formatted(), w = w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anatomy::Point;

    fn pair(offsets: &[(f64, f64)], spacing: f64) -> (LandmarkSet, LandmarkSet) {
        let gt = LandmarkSet::new(100, 100, spacing)
            .with_points(offsets.iter().enumerate().map(|(i, _)| (LandmarkId(i as u8 + 1), Point::new(10.0, 10.0))));
        let pred = LandmarkSet::new(100, 100, spacing).with_points(
            offsets
                .iter()
                .enumerate()
                .map(|(i, (dx, dy))| (LandmarkId(i as u8 + 1), Point::new(10.0 + dx, 10.0 + dy))),
        );
        (pred, gt)
    }

    #[test]
    fn three_four_five() {
        let (p, g) = pair(&[(3.0, 4.0)], 0.1);
        assert!((radial_errors(&p, &g).unwrap()[0].error_mm - 0.5).abs() < 1e-15);
        let (p, g) = pair(&[(3.0, 4.0)], 0.125);
        assert_eq!(radial_errors(&p, &g).unwrap()[0].error_mm, 0.625);
    }

    #[test]
    fn identical_sets_are_perfect() {
        let (_, g) = pair(&[(0.0, 0.0), (0.0, 0.0)], 0.1);
        let r = evaluate(&[(g.clone(), g)], &EvalOptions::default()).unwrap();
        assert_eq!((r.mre_mm, r.sd_mm), (0.0, 0.0));
        assert_eq!(r.sdr_at(2.0), Some(1.0));
    }

    #[test]
    fn two_error_hand_case() {
        // 5 px and 25 px at 0.1 mm/px -> {0.5, 2.5} mm
        let (p, g) = pair(&[(3.0, 4.0), (15.0, 20.0)], 0.1);
        let r = evaluate(&[(p, g)], &EvalOptions::default()).unwrap();
        assert!((r.mre_mm - 1.5).abs() < 1e-12);
        assert!((r.sd_mm - 1.0).abs() < 1e-12);
        let rates: Vec<f64> = r.sdr.iter().map(|e| e.rate).collect();
        assert_eq!(rates, vec![0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn exclusive_boundary_option() {
        let opts = EvalOptions { inclusive: false, ..Default::default() };
        let r = summarize(&[0.5, 2.5], &opts, 1).unwrap();
        assert_eq!(r.sdr_at(2.5), Some(0.5));
        let sample = EvalOptions { sd_mode: SdMode::Sample, ..Default::default() };
        assert!((summarize(&[0.5, 2.5], &sample, 1).unwrap().sd_mm - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn id_mismatch_and_empty_pool() {
        let (p, _) = pair(&[(0.0, 0.0)], 0.1);
        let (_, g) = pair(&[(0.0, 0.0), (1.0, 1.0)], 0.1);
        assert!(radial_errors(&p, &g).is_err());
        assert!(evaluate(&[], &EvalOptions::default()).is_err());
    }

    #[test]
    fn delta_formatting_matches_table_convention() {
        assert_eq!(format_with_delta(82.206, 75.752), "82.206(+6.454)");
        assert_eq!(format_delta(1.365 - 1.550), "-0.185");
        assert_eq!(format_delta(0.0), "+0.000");
        assert_eq!(format_delta(-1e-12), "+0.000");
    }

    #[test]
    fn compare_requires_same_thresholds() {
        let a = summarize(&[1.0], &EvalOptions::default(), 1).unwrap();
        let b = summarize(&[1.0], &EvalOptions { thresholds_mm: vec![2.0], ..Default::default() }, 1).unwrap();
        assert!(compare_reports(&a, &b).is_err());
        let rows = compare_reports(&a, &a).unwrap();
        assert!(rows.iter().all(|r| r.delta == 0.0));
    }

    #[test]
    fn thresholds_validated() {
        let bad = EvalOptions { thresholds_mm: vec![3.0, 2.0], ..Default::default() };
        assert!(summarize(&[1.0], &bad, 1).is_err());
    }

    #[test]
    fn table_has_tag_rows() {
        let (p, mut g) = pair(&[(3.0, 4.0)], 0.1);
        g.tags.insert("Deciduous teeth".into());
        let opts = EvalOptions { by_tag: true, ..Default::default() };
        let r = evaluate(&[(p, g)], &opts).unwrap();
        let table = format_table(&r);
        assert!(table.lines().nth(3).unwrap().starts_with("Deciduous teeth"));
        assert!(table.contains("SDR 2.5mm (%)"));
    }
}
