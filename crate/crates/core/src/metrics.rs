//! Amodal Flow Quality: per-level WAUC and IoU, level-weighted means and their
//! geometric mean.
//!
//! WAUC numerators are kept as integers (threshold weights scaled by 100), so
//! pooling frames is exact and independent of order or partitioning.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{check_dims, Error, Result};
use crate::flow::{FlowField, LayeredFlowStack, LevelField};
use crate::raster::Mask;

/// Number of endpoint-error thresholds, `δ_i = i / 20` px for `i = 1..=100`.
pub const NUM_THRESHOLDS: u32 = 100;

/// `100 · Σ_i w_i` with `w_i = 1 - (i - 1) / 100`.
pub const SCALED_WEIGHT_SUM: u64 = 5050;

/// The fixed WAUC threshold schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WaucThresholds;

impl WaucThresholds {
    /// Threshold `i` (1-based) in pixels.
    pub fn delta(i: u32) -> f64 {
        i as f64 / 20.0
    }

    /// Weight of threshold `i` (1-based).
    pub fn weight(i: u32) -> f64 {
        1.0 - (i - 1) as f64 / 100.0
    }

    pub fn weight_sum() -> f64 {
        SCALED_WEIGHT_SUM as f64 / 100.0
    }

    /// `100 · Σ_i w_i [e ≤ δ_i]` for a single pixel.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn scaled_hits(error: f64) -> u64 {
        // NaN misses every threshold
        if !(error <= Self::delta(NUM_THRESHOLDS)) {
            return 0;
        }
        // smallest i with error <= δ_i; the guess is off by at most one
        let mut i = ((error * 20.0).ceil() as u32).clamp(1, NUM_THRESHOLDS);
        while i > 1 && error <= Self::delta(i - 1) {
            i -= 1;
        }
        while error > Self::delta(i) {
            i += 1;
        }
        // Σ_{j=i}^{100} (101 - j) = m (m + 1) / 2 with m = 101 - i
        let m = (NUM_THRESHOLDS + 1 - i) as u64;
        m * (m + 1) / 2
    }
}

/// Pooled WAUC state of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WaucAccumulator {
    pub scaled_hits: u64,
    pub pixels: u64,
}

impl WaucAccumulator {
    pub fn wauc(&self) -> Option<f64> {
        (self.pixels > 0)
            .then(|| self.scaled_hits as f64 / (self.pixels as f64 * SCALED_WEIGHT_SUM as f64))
    }

    pub fn merge(&mut self, other: &WaucAccumulator) {
        self.scaled_hits += other.scaled_hits;
        self.pixels += other.pixels;
    }
}

/// Pixel-level confusion counts of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn iou(&self) -> Option<f64> {
        let denom = self.true_pos + self.false_pos + self.false_neg;
        (denom > 0).then(|| self.true_pos as f64 / denom as f64)
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
    }
}

/// WAUC of a predicted flow against one ground-truth level, evaluated on the
/// ground-truth mask only.
pub fn wauc_accumulate(pred_flow: &FlowField, gt: &LevelField) -> Result<WaucAccumulator> {
    check_dims(gt.flow.dims(), pred_flow.dims())?;
    let (pu, pv) = (pred_flow.u(), pred_flow.v());
    let (gu, gv) = (gt.flow.u(), gt.flow.v());
    let mut acc = WaucAccumulator::default();
    for (p, &inside) in gt.mask.bits().iter().enumerate() {
        if inside {
            let du = pu[p] as f64 - gu[p] as f64;
            let dv = pv[p] as f64 - gv[p] as f64;
            acc.scaled_hits += WaucThresholds::scaled_hits(du.hypot(dv));
            acc.pixels += 1;
        }
    }
    Ok(acc)
}

/// WAUC for one level plus the number of evaluated pixels. `None` when the
/// ground-truth level has no pixels.
pub fn wauc_level(pred_flow: &FlowField, gt: &LevelField) -> Result<(Option<f64>, u64)> {
    let acc = wauc_accumulate(pred_flow, gt)?;
    Ok((acc.wauc(), acc.pixels))
}

pub fn confusion_counts(pred: &Mask, gt: &Mask) -> Result<ConfusionCounts> {
    check_dims(gt.dims(), pred.dims())?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// IoU of one level; `None` when both masks are empty.
pub fn iou_level(pred: &Mask, gt: &Mask) -> Result<(Option<f64>, ConfusionCounts)> {
    let c = confusion_counts(pred, gt)?;
    Ok((c.iou(), c))
}

/// The geometric mean combining the two level-weighted means.
pub fn amodal_flow_quality(mwauc: f64, miou: f64) -> f64 {
    (mwauc * miou).sqrt()
}

/// Level weights `w_n`: flat up to level `k`, then decaying exponentially to
/// `w_last` at level `N - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelWeights {
    num_levels: usize,
    k: usize,
    w_last: f64,
    weights: Vec<f64>,
}

pub const DEFAULT_NUM_LEVELS: usize = 8;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_W_LAST: f64 = 0.25;

pub fn level_weights(num_levels: usize, k: usize, w_last: f64) -> Result<LevelWeights> {
    if num_levels < 2 {
        return Err(Error::Parameter(format!(
            "level weights need N >= 2, got {num_levels}"
        )));
    }
    if k + 1 >= num_levels {
        return Err(Error::Parameter(format!(
            "k = {k} must be below N - 1 = {}",
            num_levels - 1
        )));
    }
    if !(w_last > 0.0 && w_last <= 1.0) {
        return Err(Error::Parameter(format!("w_last = {w_last} must be in (0, 1]")));
    }
    let span = (num_levels - 1 - k) as f64;
    let weights = (0..num_levels)
        .map(|n| {
            if n == num_levels - 1 {
                w_last
            } else {
                let exponent = -(n as f64 - k as f64) / span * w_last.ln();
                (-exponent.max(0.0)).exp()
            }
        })
        .collect();
    Ok(LevelWeights {
        num_levels,
        k,
        w_last,
        weights,
    })
}

impl LevelWeights {
    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn w_last(&self) -> f64 {
        self.w_last
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for LevelWeights {
    fn default() -> Self {
        level_weights(DEFAULT_NUM_LEVELS, DEFAULT_K, DEFAULT_W_LAST).expect("valid defaults")
    }
}

/// Pooled counts of one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelAccumulator {
    pub wauc: WaucAccumulator,
    pub counts: ConfusionCounts,
}

/// Per-level counts of one frame (or of several pooled frames).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameAccumulator {
    pub levels: Vec<LevelAccumulator>,
}

impl FrameAccumulator {
    pub fn merge(&mut self, other: &FrameAccumulator) {
        if self.levels.len() < other.levels.len() {
            self.levels.resize(other.levels.len(), LevelAccumulator::default());
        }
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.wauc.merge(&b.wauc);
            a.counts.merge(&b.counts);
        }
    }
}

/// Scores one predicted stack against ground truth, level by level.
///
/// Ground-truth levels without a predicted counterpart score zero for both
/// WAUC and IoU. Predicted levels beyond the ground truth are ignored.
pub fn accumulate_frame(pred: &LayeredFlowStack, gt: &LayeredFlowStack) -> Result<FrameAccumulator> {
    check_dims(gt.dims(), pred.dims())?;
    let levels = gt
        .levels()
        .iter()
        .enumerate()
        .map(|(n, g)| match pred.level(n) {
            Some(p) => Ok(LevelAccumulator {
                wauc: wauc_accumulate(&p.flow, g)?,
                counts: confusion_counts(&p.mask, &g.mask)?,
            }),
            None => {
                let pixels = g.mask.count() as u64;
                Ok(LevelAccumulator {
                    wauc: WaucAccumulator {
                        scaled_hits: 0,
                        pixels,
                    },
                    counts: ConfusionCounts {
                        true_pos: 0,
                        false_pos: 0,
                        false_neg: pixels,
                    },
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameAccumulator { levels })
}

/// One row of the per-level breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    #[serde(serialize_with = "fixed6_opt")]
    pub wauc: Option<f64>,
    /// Not scored for the background level.
    #[serde(serialize_with = "fixed6_opt")]
    pub iou: Option<f64>,
    pub pixels: u64,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when no object level has ground-truth pixels.
    #[serde(serialize_with = "fixed6_opt")]
    pub afq: Option<f64>,
    #[serde(serialize_with = "fixed6")]
    pub mwauc: f64,
    #[serde(serialize_with = "fixed6_opt")]
    pub miou: Option<f64>,
    pub per_level: Vec<LevelReport>,
}

fn fixed6<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = serde_json::value::RawValue::from_string(format!("{x:.6}"))
        .map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

fn fixed6_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => fixed6(x, s),
        None => s.serialize_none(),
    }
}

/// Combines pooled per-level counts into the final report.
pub fn aggregate_reports(frames: &[FrameAccumulator], weights: &LevelWeights) -> Result<EvalReport> {
    let mut pooled = FrameAccumulator::default();
    for f in frames {
        pooled.merge(f);
    }
    report_from_pooled(&pooled, weights)
}

pub fn evaluate_stack(
    pred: &LayeredFlowStack,
    gt: &LayeredFlowStack,
    weights: &LevelWeights,
) -> Result<EvalReport> {
    aggregate_reports(&[accumulate_frame(pred, gt)?], weights)
}

fn report_from_pooled(pooled: &FrameAccumulator, weights: &LevelWeights) -> Result<EvalReport> {
    let n_levels = pooled.levels.len();
    if n_levels > weights.num_levels() {
        return Err(Error::Parameter(format!(
            "{n_levels} levels exceed the weight schedule's N = {}",
            weights.num_levels()
        )));
    }
    let mut per_level = Vec::with_capacity(n_levels);
    let (mut wauc_sum, mut wauc_norm) = (0.0, 0.0);
    let (mut iou_sum, mut iou_norm) = (0.0, 0.0);
    for (n, acc) in pooled.levels.iter().enumerate() {
        let present = acc.wauc.pixels > 0;
        let wauc = acc.wauc.wauc();
        let iou = if n == 0 { None } else { acc.counts.iou().filter(|_| present) };
        let w = weights.weights()[n];
        if let Some(x) = wauc {
            wauc_sum += w * x;
            wauc_norm += w;
        }
        if let Some(x) = iou {
            iou_sum += w * x;
            iou_norm += w;
        }
        per_level.push(LevelReport {
            level: n,
            wauc,
            iou,
            pixels: acc.wauc.pixels,
            present,
        });
    }
    if wauc_norm == 0.0 {
        return Err(Error::EmptyEvaluation);
    }
    let mwauc = wauc_sum / wauc_norm;
    let miou = (iou_norm > 0.0).then(|| iou_sum / iou_norm);
    Ok(EvalReport {
        afq: miou.map(|m| amodal_flow_quality(mwauc, m)),
        mwauc,
        miou,
        per_level,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Fixed-width human-readable table.
    pub fn to_table(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        let _ = writeln!(out, "{:>5}  {:>9}  {:>9}  {:>10}  {:>7}", "level", "wauc", "iou", "pixels", "present");
        for l in &self.per_level {
            let _ = writeln!(
                out,
                "{:>5}  {:>9}  {:>9}  {:>10}  {:>7}",
                l.level,
                opt(l.wauc),
                opt(l.iou),
                l.pixels,
                if l.present { "yes" } else { "no" }
            );
        }
        let _ = writeln!(out, "{:<6} {}", "AFQ", opt(self.afq));
        let _ = writeln!(out, "{:<6} {:.6}", "mWAUC", self.mwauc);
        let _ = writeln!(out, "{:<6} {}", "mIoU", opt(self.miou));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::LevelField;
    use proptest::prelude::*;

    /// Direct double sum over thresholds and pixels.
    fn wauc_oracle(errors: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut wsum = 0.0;
        for i in 1..=100u32 {
            let delta = i as f64 / 20.0;
            let w = 1.0 - (i as f64 - 1.0) / 100.0;
            wsum += w;
            num += w * errors.iter().filter(|&&e| e <= delta).count() as f64;
        }
        num / (errors.len() as f64 * wsum)
    }

    fn level_with_error(w: usize, h: usize, err: f32) -> (FlowField, LevelField) {
        let gt = LevelField::new(Mask::full(w, h), FlowField::constant(w, h, 1.0, -2.0)).unwrap();
        let pred = FlowField::constant(w, h, 1.0 + err, -2.0);
        (pred, gt)
    }

    #[test]
    fn threshold_schedule() {
        assert_eq!(WaucThresholds::delta(1), 0.05);
        assert_eq!(WaucThresholds::delta(100), 5.0);
        assert_eq!(WaucThresholds::weight(1), 1.0);
        assert!((WaucThresholds::weight(100) - 0.01).abs() < 1e-15);
        let sum: f64 = (1..=100).map(WaucThresholds::weight).sum();
        assert!((sum - 50.5).abs() < 1e-12);
        assert_eq!(WaucThresholds::weight_sum(), 50.5);
    }

    #[test]
    fn scaled_hits_matches_direct_sum() {
        for k in 0..=2100u32 {
            let e = k as f64 * 0.0025;
            let direct: u64 = (1..=100u32)
                .filter(|&i| e <= i as f64 / 20.0)
                .map(|i| (101 - i) as u64)
                .sum();
            assert_eq!(WaucThresholds::scaled_hits(e), direct, "e = {e}");
        }
        assert_eq!(WaucThresholds::scaled_hits(f64::NAN), 0);
    }

    #[test]
    fn wauc_perfect_prediction() {
        let (_, gt) = level_with_error(5, 4, 0.0);
        assert_eq!(wauc_level(&gt.flow, &gt).unwrap(), (Some(1.0), 20));
    }

    #[test]
    fn wauc_constant_error_two_and_a_half() {
        let (pred, gt) = level_with_error(5, 4, 2.5);
        let (wauc, n) = wauc_level(&pred, &gt).unwrap();
        // thresholds 50..=100 pass: (1 + 2 + ... + 51) / 100 = 13.26
        assert!((wauc.unwrap() - 13.26 / 50.5).abs() < 1e-12);
        assert!((wauc.unwrap() - 0.262574).abs() < 1e-6);
        assert!((wauc.unwrap() - wauc_oracle(&[2.5; 20])).abs() < 1e-12);
        assert_eq!(n, 20);
    }

    #[test]
    fn wauc_error_beyond_five_is_zero() {
        let (pred, gt) = level_with_error(3, 3, 6.0);
        assert_eq!(wauc_level(&pred, &gt).unwrap().0, Some(0.0));
    }

    #[test]
    fn wauc_empty_mask_is_absent() {
        let gt = LevelField::new(Mask::empty(3, 3), FlowField::zeros(3, 3)).unwrap();
        assert_eq!(wauc_level(&FlowField::zeros(3, 3), &gt).unwrap(), (None, 0));
        assert!(wauc_level(&FlowField::zeros(2, 3), &gt).is_err());
    }

    #[test]
    fn iou_examples() {
        let all = Mask::full(3, 3);
        let corner = Mask::rect(3, 3, 0, 0, 2, 2);
        let (iou, c) = iou_level(&all, &corner).unwrap();
        assert_eq!((c.true_pos, c.false_pos, c.false_neg), (4, 5, 0));
        assert_eq!(iou, Some(4.0 / 9.0));
        assert_eq!(iou_level(&corner, &corner).unwrap().0, Some(1.0));
        let other = Mask::rect(3, 3, 2, 2, 3, 3);
        assert_eq!(iou_level(&corner, &other).unwrap().0, Some(0.0));
        assert_eq!(iou_level(&Mask::empty(3, 3), &Mask::empty(3, 3)).unwrap().0, None);
    }

    #[test]
    fn weights_n8() {
        let w = level_weights(8, 3, 0.25).unwrap();
        let expected = [1.0, 1.0, 1.0, 1.0, 0.25f64.powf(0.25), 0.5, 0.25f64.powf(0.75), 0.25];
        for (a, b) in w.weights().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(&w.weights()[..4], &[1.0; 4]);
        assert_eq!(w.weights()[7], 0.25);
        assert!((w.weights()[4] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
        assert!((w.weights()[6] - 0.35355).abs() < 1e-5);
    }

    #[test]
    fn weights_n5() {
        assert_eq!(level_weights(5, 3, 0.25).unwrap().weights(), &[1.0, 1.0, 1.0, 1.0, 0.25]);
    }

    #[test]
    fn weights_reject_bad_parameters() {
        assert!(matches!(level_weights(4, 3, 0.25), Err(Error::Parameter(_))));
        assert!(level_weights(1, 0, 0.25).is_err());
        assert!(level_weights(5, 1, 0.0).is_err());
        assert!(level_weights(5, 1, 1.5).is_err());
    }

    #[test]
    fn afq_matches_reported_rows() {
        assert!((amodal_flow_quality(0.494, 0.424) - 0.458).abs() < 5e-4);
        assert!((amodal_flow_quality(0.437, 0.396) - 0.416).abs() < 5e-4);
    }

    fn stack(levels: Vec<(Mask, FlowField)>) -> LayeredFlowStack {
        LayeredFlowStack::new(
            levels
                .into_iter()
                .map(|(m, f)| LevelField::new(m, f).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn sample_gt() -> LayeredFlowStack {
        stack(vec![
            (Mask::full(6, 4), FlowField::zeros(6, 4)),
            (Mask::rect(6, 4, 0, 0, 3, 4), FlowField::constant(6, 4, 2.0, 0.0)),
            (Mask::rect(6, 4, 2, 1, 5, 3), FlowField::constant(6, 4, -1.0, 1.0)),
        ])
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let gt = sample_gt();
        let r = evaluate_stack(&gt, &gt, &LevelWeights::default()).unwrap();
        assert_eq!((r.afq, r.mwauc, r.miou), (Some(1.0), 1.0, Some(1.0)));
        assert!(r.per_level.iter().all(|l| l.present));
        assert_eq!(r.per_level[0].iou, None);
    }

    #[test]
    fn missing_pred_level_scores_zero() {
        let gt = sample_gt();
        let pred = LayeredFlowStack::new(gt.levels()[..2].to_vec()).unwrap();
        let r = evaluate_stack(&pred, &gt, &LevelWeights::default()).unwrap();
        assert_eq!(r.per_level[2].wauc, Some(0.0));
        assert_eq!(r.per_level[2].iou, Some(0.0));
        assert!((r.mwauc - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.miou, Some(0.5));
    }

    #[test]
    fn absent_levels_are_dropped() {
        let mut levels = sample_gt().into_levels();
        levels[2].mask = Mask::empty(6, 4);
        let gt = LayeredFlowStack::new(levels).unwrap();
        let r = evaluate_stack(&gt, &gt, &LevelWeights::default()).unwrap();
        assert!(!r.per_level[2].present);
        assert_eq!(r.per_level[2].wauc, None);
        assert_eq!(r.afq, Some(1.0));
    }

    #[test]
    fn background_only_has_no_miou() {
        let gt = stack(vec![(Mask::full(3, 3), FlowField::zeros(3, 3))]);
        let r = evaluate_stack(&gt, &gt, &LevelWeights::default()).unwrap();
        assert_eq!((r.mwauc, r.miou, r.afq), (1.0, None, None));
    }

    #[test]
    fn nothing_present_is_an_error() {
        let gt = stack(vec![(Mask::empty(3, 3), FlowField::zeros(3, 3))]);
        assert!(matches!(
            evaluate_stack(&gt, &gt, &LevelWeights::default()),
            Err(Error::EmptyEvaluation)
        ));
    }

    #[test]
    fn too_many_levels_for_schedule() {
        let gt = sample_gt();
        let w = level_weights(2, 0, 0.5).unwrap();
        assert!(matches!(evaluate_stack(&gt, &gt, &w), Err(Error::Parameter(_))));
    }

    #[test]
    fn pooling_single_and_duplicated_frames() {
        let gt = sample_gt();
        let mut levels = gt.clone().into_levels();
        levels[1].flow = FlowField::constant(6, 4, 3.0, 0.0);
        levels[2].mask = Mask::rect(6, 4, 1, 1, 5, 3);
        let pred = LayeredFlowStack::new(levels).unwrap();
        let w = LevelWeights::default();
        let single = evaluate_stack(&pred, &gt, &w).unwrap();
        let acc = accumulate_frame(&pred, &gt).unwrap();
        assert_eq!(aggregate_reports(std::slice::from_ref(&acc), &w).unwrap(), single);
        let doubled = aggregate_reports(&[acc.clone(), acc], &w).unwrap();
        assert_eq!((doubled.afq, doubled.mwauc, doubled.miou), (single.afq, single.mwauc, single.miou));
        for (d, s) in doubled.per_level.iter().zip(&single.per_level) {
            assert_eq!((d.wauc, d.iou, d.pixels), (s.wauc, s.iou, 2 * s.pixels));
        }
    }

    #[test]
    fn pooling_disjoint_levels() {
        // frame A populates only level 1, frame B only level 2
        let w = LevelWeights::default();
        let bg = (Mask::full(4, 4), FlowField::zeros(4, 4));
        let a_gt = stack(vec![bg.clone(), (Mask::rect(4, 4, 0, 0, 2, 2), FlowField::constant(4, 4, 1.0, 0.0))]);
        let a_pred = stack(vec![bg.clone(), (Mask::rect(4, 4, 0, 0, 2, 3), FlowField::constant(4, 4, 1.5, 0.0))]);
        let b_gt = stack(vec![
            bg.clone(),
            (Mask::empty(4, 4), FlowField::zeros(4, 4)),
            (Mask::rect(4, 4, 1, 1, 4, 4), FlowField::constant(4, 4, 0.0, 4.0)),
        ]);
        let b_pred = stack(vec![
            bg.clone(),
            (Mask::empty(4, 4), FlowField::zeros(4, 4)),
            (Mask::rect(4, 4, 2, 1, 4, 4), FlowField::constant(4, 4, 0.0, 1.0)),
        ]);
        let a = evaluate_stack(&a_pred, &a_gt, &w).unwrap();
        let b = evaluate_stack(&b_pred, &b_gt, &w).unwrap();
        let pooled = aggregate_reports(
            &[accumulate_frame(&a_pred, &a_gt).unwrap(), accumulate_frame(&b_pred, &b_gt).unwrap()],
            &w,
        )
        .unwrap();
        // hand-pooled: level 1 comes from A alone, level 2 from B alone
        assert_eq!(pooled.per_level[1].iou, a.per_level[1].iou);
        assert_eq!(pooled.per_level[1].wauc, a.per_level[1].wauc);
        assert_eq!(pooled.per_level[2].iou, b.per_level[2].iou);
        assert_eq!(pooled.per_level[2].wauc, b.per_level[2].wauc);
        assert_eq!(pooled.per_level[1].iou, Some(4.0 / 6.0));
        assert_eq!(pooled.per_level[2].iou, Some(6.0 / 9.0));
        // level 0 pools 32 perfect pixels
        assert_eq!(pooled.per_level[0].pixels, 32);
    }

    #[test]
    fn json_uses_six_decimals() {
        let gt = sample_gt();
        let r = evaluate_stack(&gt, &gt, &LevelWeights::default()).unwrap();
        let json = r.to_json();
        assert!(json.contains("\"afq\": 1.000000"));
        assert!(json.contains("\"iou\": null"));
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["per_level"][1]["pixels"], 12);
        assert!(r.to_table().contains("AFQ    1.000000"));
    }

    proptest! {
        #[test]
        fn wauc_matches_oracle(errs in proptest::collection::vec(0.0f32..6.0, 1..40)) {
            let n = errs.len();
            let gt = LevelField::new(Mask::full(n, 1), FlowField::zeros(n, 1)).unwrap();
            let pred = FlowField::new(n, 1, errs.clone(), vec![0.0; n]).unwrap();
            let (wauc, _) = wauc_level(&pred, &gt).unwrap();
            let errors: Vec<f64> = errs.iter().map(|&e| e as f64).collect();
            prop_assert!((wauc.unwrap() - wauc_oracle(&errors)).abs() < 1e-12);
        }

        #[test]
        fn wauc_monotone_and_permutation_invariant(
            errs in proptest::collection::vec(0.0f32..6.0, 2..30),
            shrink in proptest::collection::vec(0.0f32..1.0, 30),
        ) {
            let n = errs.len();
            let gt = LevelField::new(Mask::full(n, 1), FlowField::zeros(n, 1)).unwrap();
            let field = |e: Vec<f32>| FlowField::new(n, 1, e, vec![0.0; n]).unwrap();
            let base = wauc_level(&field(errs.clone()), &gt).unwrap().0.unwrap();
            let smaller: Vec<f32> = errs.iter().zip(&shrink).map(|(e, s)| e * s).collect();
            prop_assert!(wauc_level(&field(smaller), &gt).unwrap().0.unwrap() >= base);
            let mut rev = errs.clone();
            rev.reverse();
            prop_assert_eq!(wauc_level(&field(rev), &gt).unwrap().0.unwrap(), base);
            let doubled: Vec<f32> = errs.iter().chain(&errs).copied().collect();
            let gt2 = LevelField::new(Mask::full(2 * n, 1), FlowField::zeros(2 * n, 1)).unwrap();
            let pred2 = FlowField::new(2 * n, 1, doubled, vec![0.0; 2 * n]).unwrap();
            prop_assert_eq!(wauc_level(&pred2, &gt2).unwrap().0.unwrap(), base);
        }

        #[test]
        fn iou_symmetric(a in proptest::collection::vec(any::<bool>(), 16), b in proptest::collection::vec(any::<bool>(), 16)) {
            let ma = Mask::from_bits(4, 4, a).unwrap();
            let mb = Mask::from_bits(4, 4, b).unwrap();
            let ab = iou_level(&ma, &mb).unwrap().0;
            prop_assert_eq!(ab, iou_level(&mb, &ma).unwrap().0);
            if !ma.is_empty() {
                prop_assert_eq!(ab == Some(1.0), ma == mb);
            }
        }

        #[test]
        fn weights_monotone(n in 2usize..12, k_frac in 0.0f64..1.0, w_last in 0.01f64..1.0) {
            let k = ((n - 1) as f64 * k_frac) as usize;
            let k = k.min(n - 2);
            let w = level_weights(n, k, w_last).unwrap();
            prop_assert!(w.weights()[..=k].iter().all(|&x| x == 1.0));
            prop_assert_eq!(w.weights()[n - 1], w_last);
            prop_assert!(w.weights().windows(2).all(|p| p[1] <= p[0]));
        }

        #[test]
        fn aggregation_order_invariant(seed in any::<u64>()) {
            let gt = sample_gt();
            let frames: Vec<FrameAccumulator> = (0..5u64).map(|k| {
                let s = seed.wrapping_add(k);
                let mut levels = gt.clone().into_levels();
                levels[1].flow = FlowField::constant(6, 4, (s % 7) as f32, 0.0);
                levels[2].mask = Mask::from_fn(6, 4, |x, y| (x + y + s as usize).is_multiple_of(3));
                accumulate_frame(&LayeredFlowStack::new(levels).unwrap(), &gt).unwrap()
            }).collect();
            let w = LevelWeights::default();
            let fwd = aggregate_reports(&frames, &w).unwrap();
            let mut rev = frames.clone();
            rev.reverse();
            prop_assert_eq!(&aggregate_reports(&rev, &w).unwrap(), &fwd);
            let mut left = FrameAccumulator::default();
            for f in &frames[..2] { left.merge(f); }
            let mut right = FrameAccumulator::default();
            for f in &frames[2..] { right.merge(f); }
            prop_assert_eq!(&aggregate_reports(&[right, left], &w).unwrap(), &fwd);
        }
    }
}
