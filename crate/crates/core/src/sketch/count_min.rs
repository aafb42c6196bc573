use std::collections::BTreeSet;

use super::{seeded_index, SketchError};
use crate::encoding::ElementDigest;

/// Count-Min frequency sketch. Row `r` hashes with seed `r` under the
/// sketch key.
#[derive(Clone, Debug, PartialEq)]
pub struct CountMinSketch {
    width: usize,
    depth: usize,
    counters: Vec<u64>,
    epsilon: f64,
    delta: f64,
    key: u64,
    total: u64,
}

impl CountMinSketch {
    /// `w = ceil(e / epsilon)` columns and `d = ceil(ln(1 / delta))` rows.
    pub fn new(epsilon: f64, delta: f64, key: u64) -> Result<Self, SketchError> {
        if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(SketchError::Parameter(format!("epsilon {epsilon} and delta {delta} must lie in (0, 1)")));
        }
        let width = (std::f64::consts::E / epsilon).ceil() as usize;
        let depth = (1.0 / delta).ln().ceil().max(1.0) as usize;
        Ok(Self::with_shape(width, depth, epsilon, delta, key))
    }

    /// Explicit shape; `epsilon` and `delta` are derived from it.
    pub fn with_dimensions(width: usize, depth: usize, key: u64) -> Result<Self, SketchError> {
        if width == 0 || depth == 0 {
            return Err(SketchError::Parameter("sketch needs positive width and depth".into()));
        }
        let epsilon = std::f64::consts::E / width as f64;
        let delta = (-(depth as f64)).exp();
        Ok(Self::with_shape(width, depth, epsilon, delta, key))
    }

    fn with_shape(width: usize, depth: usize, epsilon: f64, delta: f64, key: u64) -> Self {
        CountMinSketch { width, depth, counters: vec![0; width * depth], epsilon, delta, key, total: 0 }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Sum of all update counts.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.counters[r * self.width..(r + 1) * self.width]
    }

    fn cell(&self, row: usize, x: &ElementDigest) -> usize {
        row * self.width + seeded_index(self.key, row as u64, x.as_bytes(), self.width)
    }

    pub fn update(&mut self, x: &ElementDigest, count: u64) -> Result<(), SketchError> {
        if count == 0 {
            return Err(SketchError::Parameter("update count must be positive".into()));
        }
        for r in 0..self.depth {
            let c = self.cell(r, x);
            self.counters[c] = self.counters[c].saturating_add(count);
        }
        self.total = self.total.saturating_add(count);
        Ok(())
    }

    /// Minimum over rows; never below the true count.
    pub fn query(&self, x: &ElementDigest) -> u64 {
        (0..self.depth).map(|r| self.counters[self.cell(r, x)]).min().unwrap_or(0)
    }
}

/// Summed frequency estimates of the matched elements.
pub fn cm_cooccurrence_count(sketch: &CountMinSketch, matched: &BTreeSet<ElementDigest>) -> u64 {
    matched.iter().map(|x| sketch.query(x)).sum()
}
