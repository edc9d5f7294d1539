//! Mask-propagation tracking: warp each track's mask with optical flow,
//! match warped masks to the next frame's masks by maximum total IoU, and
//! score how consistently ids follow ground-truth instances.

mod hungarian;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::flow::{warp_mask_forward, FlowField, LayeredFlowStack};
use crate::raster::{mask_iou, Mask};
use crate::stratify::InstanceMaskSet;

pub use hungarian::{hungarian_max, Assignment};

pub const DEFAULT_MIN_IOU: f64 = 0.1;

/// Level whose mask overlaps `mask` the most, over levels 1 and up.
/// Ties go to the smaller level; no overlap at all selects level 0.
pub fn select_flow_layer(mask: &Mask, stack: &LayeredFlowStack) -> Result<usize> {
    check_dims(stack.dims(), mask.dims())?;
    let mut best = (0usize, 0usize);
    for (n, level) in stack.levels().iter().enumerate().skip(1) {
        let overlap = mask.intersection_count(&level.mask)?;
        if overlap > best.1 {
            best = (n, overlap);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackMode {
    /// Visible masks warped with a single modal flow field.
    Modal,
    /// Amodal masks warped with the flow layer they overlap most.
    Amodal,
}

/// Flow between the current and the next frame.
#[derive(Debug, Clone, Copy)]
pub enum FlowSource<'a> {
    Modal(&'a FlowField),
    Amodal(&'a LayeredFlowStack),
}

impl FlowSource<'_> {
    fn warp(&self, mask: &Mask) -> Result<Mask> {
        match self {
            FlowSource::Modal(flow) => warp_mask_forward(mask, flow),
            FlowSource::Amodal(stack) => {
                let level = select_flow_layer(mask, stack)?;
                warp_mask_forward(mask, &stack.levels()[level].flow)
            }
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            FlowSource::Modal(flow) => flow.dims(),
            FlowSource::Amodal(stack) => stack.dims(),
        }
    }
}

/// One object mask to be tracked.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub mask: Mask,
    pub class_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    /// Frame of the last matched detection.
    pub last_frame: usize,
    /// Last matched mask, carried forward by the flow while unmatched.
    pub mask: Mask,
    pub class_label: String,
    misses: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// `(track id, detection index, iou)`.
    pub matches: Vec<(u64, usize, f64)>,
    pub unmatched_tracks: Vec<u64>,
    pub unmatched_detections: Vec<usize>,
}

/// Active tracks of one sequence.
///
/// Ids start at 1 and are never reused. A track that finds no match keeps
/// its warped mask for one more frame and is dropped after a second miss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    tracks: Vec<Track>,
    next_id: u64,
    min_iou: f64,
    frame: Option<usize>,
}

impl Default for TrackState {
    fn default() -> Self {
        TrackState::new(DEFAULT_MIN_IOU).expect("default threshold is valid")
    }
}

impl TrackState {
    pub fn new(min_iou: f64) -> Result<Self> {
        if !(min_iou > 0.0 && min_iou <= 1.0) {
            return Err(Error::Parameter(format!("min_iou must lie in (0, 1], got {min_iou}")));
        }
        Ok(TrackState {
            tracks: Vec::new(),
            next_id: 1,
            min_iou,
            frame: None,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn min_iou(&self) -> f64 {
        self.min_iou
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Opens a track for every detection of the first frame.
    pub fn start(&mut self, detections: &[Detection]) -> Result<Vec<u64>> {
        if self.frame.is_some() {
            return Err(Error::Parameter("tracker already started".into()));
        }
        check_all(detections, None)?;
        self.frame = Some(0);
        Ok(detections
            .iter()
            .map(|d| {
                let id = self.fresh_id();
                self.tracks.push(Track {
                    id,
                    last_frame: 0,
                    mask: d.mask.clone(),
                    class_label: d.class_label.clone(),
                    misses: 0,
                });
                id
            })
            .collect())
    }

    /// Advances by one frame: `flow` maps the current frame to the frame of
    /// `detections`. Returns the id given to each detection.
    pub fn step(&mut self, flow: FlowSource<'_>, detections: &[Detection]) -> Result<(Vec<u64>, AssignmentResult)> {
        let frame = match self.frame {
            Some(f) => f + 1,
            None => return Err(Error::Parameter("tracker must be started first".into())),
        };
        check_all(detections, Some(flow.dims()))?;

        let warped = self
            .tracks
            .iter()
            .map(|t| flow.warp(&t.mask))
            .collect::<Result<Vec<_>>>()?;
        let mut scores = vec![vec![0.0; detections.len()]; self.tracks.len()];
        for (i, (track, mask)) in self.tracks.iter().zip(&warped).enumerate() {
            for (j, det) in detections.iter().enumerate() {
                if track.class_label == det.class_label {
                    scores[i][j] = mask_iou(mask, &det.mask)?.unwrap_or(0.0);
                }
            }
        }
        let assignment = hungarian_max(&scores)?;

        let mut det_ids: Vec<Option<u64>> = vec![None; detections.len()];
        let mut track_hit = vec![false; self.tracks.len()];
        let mut matches = Vec::new();
        for &(i, j) in &assignment.pairs {
            let iou = scores[i][j];
            if iou >= self.min_iou {
                track_hit[i] = true;
                det_ids[j] = Some(self.tracks[i].id);
                matches.push((self.tracks[i].id, j, iou));
            }
        }

        let old = std::mem::take(&mut self.tracks);
        let mut unmatched_tracks = Vec::new();
        for ((mut track, mask), hit) in old.into_iter().zip(warped).zip(track_hit) {
            if hit {
                continue;
            }
            unmatched_tracks.push(track.id);
            track.misses += 1;
            if track.misses <= 1 {
                track.mask = mask;
                self.tracks.push(track);
            }
        }
        let mut unmatched_detections = Vec::new();
        let mut ids = Vec::with_capacity(detections.len());
        for (j, det) in detections.iter().enumerate() {
            let id = match det_ids[j] {
                Some(id) => id,
                None => {
                    unmatched_detections.push(j);
                    self.fresh_id()
                }
            };
            self.tracks.push(Track {
                id,
                last_frame: frame,
                mask: det.mask.clone(),
                class_label: det.class_label.clone(),
                misses: 0,
            });
            ids.push(id);
        }
        self.tracks.sort_by_key(|t| t.id);
        self.frame = Some(frame);
        Ok((
            ids,
            AssignmentResult {
                matches,
                unmatched_tracks,
                unmatched_detections,
            },
        ))
    }
}

fn check_all(detections: &[Detection], dims: Option<(usize, usize)>) -> Result<()> {
    let dims = dims.or_else(|| detections.first().map(|d| d.mask.dims()));
    if let Some(dims) = dims {
        for d in detections {
            check_dims(dims, d.mask.dims())?;
        }
    }
    Ok(())
}

/// Detections of one frame tagged with the ground-truth instance they came from.
pub fn detections_from_instances(set: &InstanceMaskSet, mode: TrackMode) -> Vec<(u32, Detection)> {
    set.instances()
        .iter()
        .filter_map(|inst| {
            let mask = match mode {
                TrackMode::Modal => &inst.visible,
                TrackMode::Amodal => &inst.amodal,
            };
            (!mask.is_empty()).then(|| {
                (
                    inst.id,
                    Detection {
                        mask: mask.clone(),
                        class_label: inst.class_label.clone(),
                    },
                )
            })
        })
        .collect()
}

/// Runs the tracker over a sequence. `flows[t]` maps frame `t` to `t + 1`.
/// Returns, per frame, the track id given to each detection.
pub fn track_sequence(
    frames: &[Vec<Detection>],
    flows: &[FlowSource<'_>],
    min_iou: f64,
) -> Result<Vec<Vec<u64>>> {
    if frames.is_empty() {
        return Ok(Vec::new());
    }
    if flows.len() + 1 != frames.len() {
        return Err(Error::Parameter(format!(
            "{} frames need {} flow fields, got {}",
            frames.len(),
            frames.len() - 1,
            flows.len()
        )));
    }
    let mut state = TrackState::new(min_iou)?;
    let mut out = vec![state.start(&frames[0])?];
    for (flow, dets) in flows.iter().zip(&frames[1..]) {
        out.push(state.step(*flow, dets)?.0);
    }
    Ok(out)
}

/// Per frame: ground-truth instance id -> predicted track id.
pub type FrameAssociation = BTreeMap<u32, u64>;

/// Matches predicted masks to ground-truth masks by maximum total IoU;
/// pairs with zero overlap are left unmatched.
pub fn associate_by_iou(predicted: &[(u64, Mask)], truth: &[(u32, Mask)]) -> Result<FrameAssociation> {
    let mut scores = vec![vec![0.0; predicted.len()]; truth.len()];
    for (i, (_, gt)) in truth.iter().enumerate() {
        for (j, (_, p)) in predicted.iter().enumerate() {
            scores[i][j] = mask_iou(gt, p)?.unwrap_or(0.0);
        }
    }
    let a = hungarian_max(&scores)?;
    Ok(a.pairs
        .into_iter()
        .filter(|&(i, j)| scores[i][j] > 0.0)
        .map(|(i, j)| (truth[i].0, predicted[j].0))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingScore {
    /// Fraction of checks in which an instance kept its predicted id.
    pub association_accuracy: f64,
    pub id_switches: usize,
    /// Instance observations that had an earlier observation to compare with.
    pub checks: usize,
}

/// Compares each ground-truth instance's predicted id with the one it had
/// at its previous observation. Accuracy is 1 when nothing can be checked.
pub fn score_tracking(frames: &[FrameAssociation]) -> TrackingScore {
    let mut last: BTreeMap<u32, u64> = BTreeMap::new();
    let (mut checks, mut switches) = (0usize, 0usize);
    for frame in frames {
        for (&gt, &pred) in frame {
            if let Some(prev) = last.insert(gt, pred) {
                checks += 1;
                switches += (prev != pred) as usize;
            }
        }
    }
    TrackingScore {
        association_accuracy: if checks == 0 {
            1.0
        } else {
            (checks - switches) as f64 / checks as f64
        },
        id_switches: switches,
        checks,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackAssignment {
    pub instance: u32,
    pub track: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: usize,
    pub assignments: Vec<TrackAssignment>,
}

/// Track file contents: per-frame id assignments plus the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub mode: TrackMode,
    pub min_iou: f64,
    pub frames: Vec<TrackFrame>,
    pub score: TrackingScore,
}

/// Tracks ground-truth-tagged detections and scores the result.
pub fn track_and_score(
    frames: &[Vec<(u32, Detection)>],
    flows: &[FlowSource<'_>],
    mode: TrackMode,
    min_iou: f64,
) -> Result<TrackReport> {
    let dets: Vec<Vec<Detection>> = frames
        .iter()
        .map(|f| f.iter().map(|(_, d)| d.clone()).collect())
        .collect();
    let ids = track_sequence(&dets, flows, min_iou)?;
    let assoc: Vec<FrameAssociation> = frames
        .iter()
        .zip(&ids)
        .map(|(f, ids)| f.iter().map(|(gt, _)| *gt).zip(ids.iter().copied()).collect())
        .collect();
    let frames_out = assoc
        .iter()
        .enumerate()
        .map(|(frame, a)| TrackFrame {
            frame,
            assignments: a
                .iter()
                .map(|(&instance, &track)| TrackAssignment { instance, track })
                .collect(),
        })
        .collect();
    Ok(TrackReport {
        mode,
        min_iou,
        frames: frames_out,
        score: score_tracking(&assoc),
    })
}
