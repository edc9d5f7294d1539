//! Dense flow fields and the layered amodal flow stack.

use crate::error::{check_dims, Error, Result};
use crate::raster::{Mask, Raster};

/// Largest number of occlusion levels accepted by the file formats.
pub const MAX_LEVELS: usize = 8;

/// A dense two-channel displacement field in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Self {
        FlowField {
            width,
            height,
            u: vec![u; width * height],
            v: vec![v; width * height],
        }
    }

    /// Builds a field from separate channels. Every value must be finite.
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "flow field dimensions must be positive, got {width}x{height}"
            )));
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::Parameter(format!(
                "flow field of {width}x{height} needs {} values per channel",
                width * height
            )));
        }
        if let Some(i) = u.iter().chain(&v).position(|x| !x.is_finite()) {
            return Err(Error::format(format!(
                "non-finite flow value at index {}",
                i % (width * height)
            )));
        }
        Ok(FlowField {
            width,
            height,
            u,
            v,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (f32, f32),
    ) -> Result<Self> {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        FlowField::new(width, height, u, v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Sets one vector. Non-finite input is a caller bug.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: (f32, f32)) {
        debug_assert!(value.0.is_finite() && value.1.is_finite());
        let i = y * self.width + x;
        self.u[i] = value.0;
        self.v[i] = value.1;
    }
}

/// One occlusion level: a membership mask and its motion field.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelField {
    pub mask: Mask,
    pub flow: FlowField,
}

impl LevelField {
    pub fn new(mask: Mask, flow: FlowField) -> Result<Self> {
        check_dims(flow.dims(), mask.dims())?;
        Ok(LevelField { mask, flow })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.flow.dims()
    }
}

/// The motion field maps of one frame pair, index 0 being the background.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredFlowStack {
    levels: Vec<LevelField>,
}

impl LayeredFlowStack {
    /// Builds a stack of at least one level; all levels must share dimensions.
    ///
    /// The [`MAX_LEVELS`] cap is only enforced by the readers and writers.
    pub fn new(levels: Vec<LevelField>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::Parameter("a flow stack needs at least one level".into()))?;
        let dims = first.dims();
        for level in &levels[1..] {
            check_dims(dims, level.dims())?;
        }
        Ok(LayeredFlowStack { levels })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[LevelField] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> Option<&LevelField> {
        self.levels.get(n)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.levels[0].dims()
    }

    pub fn width(&self) -> usize {
        self.dims().0
    }

    pub fn height(&self) -> usize {
        self.dims().1
    }

    pub fn into_levels(self) -> Vec<LevelField> {
        self.levels
    }
}

/// Per-pixel Euclidean endpoint error between a prediction and ground truth.
pub fn endpoint_error(pred: &FlowField, gt: &FlowField) -> Result<Raster<f64>> {
    check_dims(gt.dims(), pred.dims())?;
    let data = pred
        .u
        .iter()
        .zip(&pred.v)
        .zip(gt.u.iter().zip(&gt.v))
        .map(|((&pu, &pv), (&gu, &gv))| {
            let du = pu as f64 - gu as f64;
            let dv = pv as f64 - gv as f64;
            du.hypot(dv)
        })
        .collect();
    Raster::from_vec(pred.width, pred.height, data)
}

/// Forward-splats every set pixel `p` of `mask` to `round(p + flow(p))`.
///
/// Destinations outside the raster are dropped and holes are left unfilled.
pub fn warp_mask_forward(mask: &Mask, flow: &FlowField) -> Result<Mask> {
    check_dims(flow.dims(), mask.dims())?;
    let (w, h) = mask.dims();
    let mut out = Mask::empty(w, h);
    for (x, y) in mask.pixels() {
        let (u, v) = flow.get(x, y);
        let tx = (x as f64 + u as f64).round();
        let ty = (y as f64 + v as f64).round();
        if tx >= 0.0 && ty >= 0.0 && tx < w as f64 && ty < h as f64 {
            out.set(tx as usize, ty as usize, true);
        }
    }
    Ok(out)
}
