//! Middlebury color-wheel rendering of flow fields and layered composites.

use image::{Rgb, RgbImage};

use crate::flow::{FlowField, LayeredFlowStack};

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
const NCOLS: usize = RY + YG + GC + CB + BM + MR;

/// The 55-entry Middlebury color wheel, RGB in `[0, 255]`.
pub fn color_wheel() -> Vec<[f64; 3]> {
    let mut wheel = Vec::with_capacity(NCOLS);
    let ramp = |i: usize, n: usize| (255 * i / n) as f64;
    for i in 0..RY {
        wheel.push([255.0, ramp(i, RY), 0.0]);
    }
    for i in 0..YG {
        wheel.push([255.0 - ramp(i, YG), 255.0, 0.0]);
    }
    for i in 0..GC {
        wheel.push([0.0, 255.0, ramp(i, GC)]);
    }
    for i in 0..CB {
        wheel.push([0.0, 255.0 - ramp(i, CB), 255.0]);
    }
    for i in 0..BM {
        wheel.push([ramp(i, BM), 0.0, 255.0]);
    }
    for i in 0..MR {
        wheel.push([255.0, 0.0, 255.0 - ramp(i, MR)]);
    }
    wheel
}

/// Color of a single vector already divided by the normalization radius.
pub fn flow_color(wheel: &[[f64; 3]], u: f64, v: f64) -> [u8; 3] {
    let rad = u.hypot(v);
    let a = (-v).atan2(-u) / std::f64::consts::PI;
    let fk = (a + 1.0) / 2.0 * (NCOLS - 1) as f64;
    let k0 = fk.floor() as usize % NCOLS;
    let k1 = (k0 + 1) % NCOLS;
    let f = fk - fk.floor();
    let mut out = [0u8; 3];
    for c in 0..3 {
        let col0 = wheel[k0][c] / 255.0;
        let col1 = wheel[k1][c] / 255.0;
        let mut col = (1.0 - f) * col0 + f * col1;
        if rad <= 1.0 {
            col = 1.0 - rad * (1.0 - col);
        } else {
            col *= 0.75;
        }
        out[c] = (255.0 * col).floor().clamp(0.0, 255.0) as u8;
    }
    out
}

fn max_radius<'a>(vectors: impl Iterator<Item = (f32, f32)> + 'a) -> f64 {
    vectors
        .map(|(u, v)| (u as f64).hypot(v as f64))
        .fold(0.0, f64::max)
}

fn normalizer(max_rad: f64) -> f64 {
    if max_rad > f64::EPSILON {
        max_rad
    } else {
        1.0
    }
}

/// Colorizes a flow field. With `max_radius = None` the field's own largest
/// magnitude maps to the rim of the wheel; zero flow renders white.
pub fn colorize(flow: &FlowField, max_radius_px: Option<f64>) -> RgbImage {
    let wheel = color_wheel();
    let norm = normalizer(
        max_radius_px.unwrap_or_else(|| max_radius(flow.u().iter().copied().zip(flow.v().iter().copied()))),
    );
    let (w, h) = flow.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (u, v) = flow.get(x as usize, y as usize);
        Rgb(flow_color(&wheel, u as f64 / norm, v as f64 / norm))
    })
}

/// Superimposes the levels in order `0, 1, …, N-1`: level 0 everywhere, then
/// each later level wherever its mask is set.
///
/// All levels share one normalization radius, the largest magnitude among
/// the vectors that end up displayed.
pub fn composite_visualization(stack: &LayeredFlowStack) -> RgbImage {
    let (w, h) = stack.dims();
    let mut owner = vec![0usize; w * h];
    for (n, level) in stack.levels().iter().enumerate().skip(1) {
        for (p, &set) in level.mask.bits().iter().enumerate() {
            if set {
                owner[p] = n;
            }
        }
    }
    let shown = owner.iter().enumerate().map(|(p, &n)| {
        let f = &stack.levels()[n].flow;
        (f.u()[p], f.v()[p])
    });
    let norm = normalizer(max_radius(shown));
    let wheel = color_wheel();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = y as usize * w + x as usize;
        let f = &stack.levels()[owner[p]].flow;
        Rgb(flow_color(&wheel, f.u()[p] as f64 / norm, f.v()[p] as f64 / norm))
    })
}
