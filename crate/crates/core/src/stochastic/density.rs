//! Sparse fixed-width histograms over arbitrary-dimensional sample spaces.
//! Sparse storage keeps the full joint density tractable; deterministic
//! (ordered) storage keeps parallel accumulation reproducible.

use crate::error::Error;
use crate::Result;
use std::collections::BTreeMap;

/// One histogram axis: uniform bins over `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub bins: u32,
    /// What the axis measures (for dumps).
    pub label: &'static str,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, bins: u32, label: &'static str) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::InvalidArgument(format!(
                "axis '{label}' needs hi > lo and at least one bin"
            )));
        }
        Ok(Self { lo, hi, bins, label })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    fn index(&self, v: f64) -> Option<u32> {
        if !v.is_finite() || v < self.lo || v >= self.hi {
            return None;
        }
        Some(((v - self.lo) / self.width()).min(self.bins as f64 - 1.0) as u32)
    }

    pub fn center(&self, idx: u32) -> f64 {
        self.lo + (idx as f64 + 0.5) * self.width()
    }
}

/// Binned joint weight over phase/momentum coordinates at one parameter
/// stamp. Weights are raw (counts or closed-form mass); probabilities are
/// exposed through `prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDensity {
    pub axes: Vec<Axis>,
    pub s_stamp: f64,
    bins: BTreeMap<Vec<u32>, f64>,
    total: f64,
    /// Samples rejected because they fell outside the axis ranges.
    pub out_of_range: u64,
}

impl EnsembleDensity {
    pub fn new(axes: Vec<Axis>, s_stamp: f64) -> Self {
        Self { axes, s_stamp, bins: BTreeMap::new(), total: 0.0, out_of_range: 0 }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Adds one weighted sample; returns whether it landed inside the range.
    pub fn add(&mut self, point: &[f64], weight: f64) -> bool {
        debug_assert_eq!(point.len(), self.axes.len());
        let mut key = Vec::with_capacity(point.len());
        for (axis, v) in self.axes.iter().zip(point) {
            match axis.index(*v) {
                Some(i) => key.push(i),
                None => {
                    self.out_of_range += 1;
                    return false;
                }
            }
        }
        *self.bins.entry(key).or_insert(0.0) += weight;
        self.total += weight;
        true
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn occupied_bins(&self) -> usize {
        self.bins.len()
    }

    /// Raw weight of a bin.
    pub fn weight(&self, key: &[u32]) -> f64 {
        self.bins.get(key).copied().unwrap_or(0.0)
    }

    /// Probability mass of a bin (weights normalized to one).
    pub fn prob(&self, key: &[u32]) -> f64 {
        if self.total > 0.0 {
            self.weight(key) / self.total
        } else {
            0.0
        }
    }

    /// Total probability mass (one, within rounding, when any weight is in).
    pub fn mass(&self) -> f64 {
        if self.total > 0.0 {
            self.bins.values().sum::<f64>() / self.total
        } else {
            0.0
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.bins.iter()
    }

    pub fn centers(&self, key: &[u32]) -> Vec<f64> {
        key.iter().zip(&self.axes).map(|(i, a)| a.center(*i)).collect()
    }

    /// Cell volume (product of bin widths).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.width()).product()
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.axes == other.axes
    }

    /// Marginal mean and variance along one axis.
    pub fn moments(&self, axis: usize) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (key, w) in &self.bins {
            let c = self.axes[axis].center(key[axis]);
            let p = w / self.total;
            m1 += p * c;
            m2 += p * c * c;
        }
        (m1, m2 - m1 * m1)
    }
}
