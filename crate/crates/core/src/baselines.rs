//! Non-learned amodal flow infilling: each object's occluded region is
//! filled from its visible modal flow, either with the nearest visible value
//! or with the visible mean.

use crate::error::{check_dims, Error, Result};
use crate::flow::{FlowField, LayeredFlowStack, LevelField};
use crate::raster::Mask;
use crate::stratify::{InstanceMask, InstanceMaskSet, OcclusionGraph};

/// Everything an infilling baseline sees for one frame pair.
#[derive(Debug, Clone, Copy)]
pub struct InfillInput<'a> {
    pub modal_flow: &'a FlowField,
    /// Level-0 flow; the modal flow is used when absent.
    pub background_flow: Option<&'a FlowField>,
    pub instances: &'a InstanceMaskSet,
    pub graph: &'a OcclusionGraph,
}

impl<'a> InfillInput<'a> {
    pub fn new(
        modal_flow: &'a FlowField,
        background_flow: Option<&'a FlowField>,
        instances: &'a InstanceMaskSet,
        graph: &'a OcclusionGraph,
    ) -> Result<Self> {
        let input = InfillInput {
            modal_flow,
            background_flow,
            instances,
            graph,
        };
        input.validate()?;
        Ok(input)
    }

    fn validate(&self) -> Result<()> {
        let dims = self.modal_flow.dims();
        check_dims(dims, self.instances.dims())?;
        if let Some(bg) = self.background_flow {
            check_dims(dims, bg.dims())?;
        }
        for inst in self.instances.instances() {
            if self.graph.level(inst.id).is_none() {
                return Err(Error::Parameter(format!("instance {} has no occlusion level", inst.id)));
            }
        }
        Ok(())
    }

    fn background(&self) -> &FlowField {
        self.background_flow.unwrap_or(self.modal_flow)
    }
}

/// Index of the nearest set pixel for every pixel of a window.
///
/// Distances are Euclidean; ties go to the smaller row, then the smaller
/// column. Exact: a per-column pass finds the nearest set row in each
/// column, then a per-row pass picks the best column.
#[derive(Debug, Clone)]
pub struct NearestFeature {
    width: usize,
    height: usize,
    nearest: Vec<Option<(usize, usize)>>,
}

impl NearestFeature {
    pub fn new(mask: &Mask) -> Self {
        let (w, h) = mask.dims();
        // nearest set row per (row, column), ties to the smaller row
        let mut col_best: Vec<Option<usize>> = vec![None; w * h];
        for x in 0..w {
            let mut above: Option<usize> = None;
            for y in 0..h {
                if mask.get(x, y) {
                    above = Some(y);
                }
                col_best[y * w + x] = above;
            }
            let mut below: Option<usize> = None;
            for y in (0..h).rev() {
                if mask.get(x, y) {
                    below = Some(y);
                }
                let cell = &mut col_best[y * w + x];
                *cell = match (*cell, below) {
                    (Some(a), Some(b)) => Some(if b - y < y - a { b } else { a }),
                    (a, b) => a.or(b),
                };
            }
        }

        let mut nearest = vec![None; w * h];
        for y in 0..h {
            let row = &col_best[y * w..(y + 1) * w];
            for x in 0..w {
                let mut best: Option<(u64, usize, usize)> = None;
                for dx in 0..w {
                    if let Some((d, _, _)) = best {
                        if (dx as u64).pow(2) > d {
                            break;
                        }
                    }
                    let mut consider = |cx: usize| {
                        if let Some(r) = row[cx] {
                            let key = ((x.abs_diff(cx) as u64).pow(2) + (y.abs_diff(r) as u64).pow(2), r, cx);
                            if best.is_none_or(|b| key < b) {
                                best = Some(key);
                            }
                        }
                    };
                    if x >= dx {
                        consider(x - dx);
                    }
                    if dx > 0 && x + dx < w {
                        consider(x + dx);
                    }
                }
                nearest[y * w + x] = best.map(|(_, r, c)| (c, r));
            }
        }
        NearestFeature {
            width: w,
            height: h,
            nearest,
        }
    }

    /// Nearest set pixel `(x, y)` to `(x, y)`, or `None` for an empty mask.
    pub fn get(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        assert!(x < self.width && y < self.height);
        self.nearest[y * self.width + x]
    }
}

fn bounding_box(mask: &Mask) -> Option<(usize, usize, usize, usize)> {
    let mut bb: Option<(usize, usize, usize, usize)> = None;
    for (x, y) in mask.pixels() {
        bb = Some(match bb {
            None => (x, y, x + 1, y + 1),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
        });
    }
    bb
}

fn fill_near_boundary(inst: &InstanceMask, modal: &FlowField, out: &mut Vec<(usize, usize, (f32, f32))>) {
    let Some((x0, y0, x1, y1)) = bounding_box(&inst.amodal) else {
        return;
    };
    let (w, h) = inst.visible.dims();
    let window = Mask::from_fn(x1 - x0, y1 - y0, |x, y| inst.visible.get(x + x0, y + y0));
    let nf = NearestFeature::new(&window);
    debug_assert!(x1 <= w && y1 <= h);
    for (x, y) in inst.amodal.pixels() {
        let (sx, sy) = nf.get(x - x0, y - y0).expect("visible mask is non-empty");
        out.push((x, y, modal.get(sx + x0, sy + y0)));
    }
}

fn fill_mean(inst: &InstanceMask, modal: &FlowField, out: &mut Vec<(usize, usize, (f32, f32))>) {
    let (mut su, mut sv) = (0.0f64, 0.0f64);
    for (x, y) in inst.visible.pixels() {
        let (u, v) = modal.get(x, y);
        su += u as f64;
        sv += v as f64;
    }
    let n = inst.visible.count() as f64;
    let mean = ((su / n) as f32, (sv / n) as f32);
    for (x, y) in inst.amodal.pixels() {
        let value = if inst.visible.get(x, y) { modal.get(x, y) } else { mean };
        out.push((x, y, value));
    }
}

/// Writes each instance's amodal flow into its level; within a level the
/// lower id keeps any pixel claimed twice.
fn assemble(
    input: &InfillInput<'_>,
    background: FlowField,
    mut fill: impl FnMut(&InstanceMask, &mut Vec<(usize, usize, (f32, f32))>),
) -> Result<LayeredFlowStack> {
    input.validate()?;
    let (w, h) = input.modal_flow.dims();
    let num_levels = input.graph.num_levels();
    let mut levels = vec![LevelField::new(Mask::full(w, h), background)?];
    levels.extend((1..num_levels).map(|_| LevelField {
        mask: Mask::empty(w, h),
        flow: FlowField::zeros(w, h),
    }));
    let mut values = Vec::new();
    for inst in input.instances.instances() {
        let level = &mut levels[input.graph.level(inst.id).expect("validated")];
        values.clear();
        fill(inst, &mut values);
        for &(x, y, value) in &values {
            if !level.mask.get(x, y) {
                level.mask.set(x, y, true);
                level.flow.set(x, y, value);
            }
        }
    }
    LayeredFlowStack::new(levels)
}

fn fill_hidden(input: &InfillInput<'_>, inst: &InstanceMask, out: &mut Vec<(usize, usize, (f32, f32))>) {
    let bg = input.background();
    out.extend(inst.amodal.pixels().map(|(x, y)| (x, y, bg.get(x, y))));
}

/// Occluded pixels take the modal flow of the nearest visible pixel of the
/// same object. Objects with no visible pixel get the background flow.
pub fn infill_near_boundary(input: &InfillInput<'_>) -> Result<LayeredFlowStack> {
    assemble(input, input.background().clone(), |inst, out| {
        if inst.visible.is_empty() {
            fill_hidden(input, inst, out);
        } else {
            fill_near_boundary(inst, input.modal_flow, out);
        }
    })
}

/// Occluded pixels take the mean modal flow over the object's visible
/// pixels. Objects with no visible pixel get the background flow.
pub fn infill_mean(input: &InfillInput<'_>) -> Result<LayeredFlowStack> {
    assemble(input, input.background().clone(), |inst, out| {
        if inst.visible.is_empty() {
            fill_hidden(input, inst, out);
        } else {
            fill_mean(inst, input.modal_flow, out);
        }
    })
}

/// Same masks as the infilling baselines, zero flow everywhere.
pub fn zero_baseline(input: &InfillInput<'_>) -> Result<LayeredFlowStack> {
    let (w, h) = input.modal_flow.dims();
    assemble(input, FlowField::zeros(w, h), |inst, out| {
        out.extend(inst.amodal.pixels().map(|(x, y)| (x, y, (0.0, 0.0))));
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfillMethod {
    NearBoundary,
    Mean,
    Zero,
}

impl InfillMethod {
    pub const ALL: [InfillMethod; 3] = [InfillMethod::NearBoundary, InfillMethod::Mean, InfillMethod::Zero];

    pub fn name(self) -> &'static str {
        match self {
            InfillMethod::NearBoundary => "near-boundary",
            InfillMethod::Mean => "mean",
            InfillMethod::Zero => "zero",
        }
    }

    pub fn run(self, input: &InfillInput<'_>) -> Result<LayeredFlowStack> {
        match self {
            InfillMethod::NearBoundary => infill_near_boundary(input),
            InfillMethod::Mean => infill_mean(input),
            InfillMethod::Zero => zero_baseline(input),
        }
    }
}

impl std::str::FromStr for InfillMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InfillMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown infill method {s:?}")))
    }
}
