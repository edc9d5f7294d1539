//! Log histograms of flow direction and of the horizontal derivative of `u`.

use std::f64::consts::PI;

use crate::flow::FlowField;

pub const DIRECTION_BINS: usize = 36;
pub const DU_DX_BINS: usize = 101;
pub const DU_DX_RANGE: f64 = 10.0;
/// Vectors shorter than this have no meaningful direction.
pub const MIN_DIRECTION_MAGNITUDE: f64 = 1e-6;

/// Uniform-bin histogram over `[lo, hi]` with raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// `[lo, hi)` edges of bin `i`.
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.lo + i as f64 * w, self.lo + (i + 1) as f64 * w)
    }

    /// Bin index of `x`; values outside the range land in the edge bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let t = ((x - self.lo) / (self.hi - self.lo) * self.counts.len() as f64).floor();
        (t.max(0.0) as usize).min(self.counts.len() - 1)
    }

    pub fn add(&mut self, x: f64) {
        let i = self.bin_of(x);
        self.counts[i] += 1;
    }

    /// `log10(count + 1)` per bin.
    pub fn log_counts(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| ((c + 1) as f64).log10()).collect()
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.counts.len(), other.counts.len());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowStatistics {
    /// 36 bins over `[-π, π)` of `atan2(v, u)`.
    pub direction: Histogram,
    /// 101 bins over `[-10, 10]` of `u(x + 1, y) - u(x, y)`, clipped.
    pub du_dx: Histogram,
}

impl Default for FlowStatistics {
    fn default() -> Self {
        FlowStatistics {
            direction: Histogram::new(-PI, PI, DIRECTION_BINS),
            du_dx: Histogram::new(-DU_DX_RANGE, DU_DX_RANGE, DU_DX_BINS),
        }
    }
}

impl FlowStatistics {
    pub fn merge(&mut self, other: &FlowStatistics) {
        self.direction.merge(&other.direction);
        self.du_dx.merge(&other.du_dx);
    }

    /// CSV with one row per bin of both histograms.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("histogram,bin,lo,hi,count,log10_count\n");
        for (name, hist) in [("direction", &self.direction), ("du_dx", &self.du_dx)] {
            for (i, (&c, l)) in hist.counts().iter().zip(hist.log_counts()).enumerate() {
                let (lo, hi) = hist.bin_edges(i);
                out.push_str(&format!("{name},{i},{lo:.6},{hi:.6},{c},{l:.6}\n"));
            }
        }
        out
    }
}

pub fn flow_statistics(flow: &FlowField) -> FlowStatistics {
    let mut stats = FlowStatistics::default();
    let (w, h) = flow.dims();
    for (&u, &v) in flow.u().iter().zip(flow.v()) {
        let (u, v) = (u as f64, v as f64);
        if u.hypot(v) >= MIN_DIRECTION_MAGNITUDE {
            let mut angle = v.atan2(u);
            // atan2 returns +π for the negative x axis; the range is half-open
            if angle >= PI {
                angle = -PI;
            }
            stats.direction.add(angle);
        }
    }
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            let d = flow.get(x + 1, y).0 as f64 - flow.get(x, y).0 as f64;
            stats.du_dx.add(d.clamp(-DU_DX_RANGE, DU_DX_RANGE));
        }
    }
    stats
}
