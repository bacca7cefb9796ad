//! Parameter space, sample records and axis-aligned box geometry.
//!
//! All intervals are closed on both sides. A box built from a single point is
//! a legal zero-width box.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded axis-aligned box of scenario parameters with a hazard threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    hazard_threshold: f64,
    metric_bounds: (f64, f64),
}

impl SearchSpace {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        hazard_threshold: f64,
        metric_bounds: (f64, f64),
    ) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        Error::dims(lower.len(), upper.len())?;
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidSpace(format!(
                    "dimension {d}: lower {lo} must be finite and below upper {hi}"
                )));
            }
        }
        let (f_low, f_up) = metric_bounds;
        if !(f_low <= hazard_threshold && hazard_threshold <= f_up) {
            return Err(Error::InvalidSpace(format!(
                "threshold {hazard_threshold} outside metric bounds [{f_low}, {f_up}]"
            )));
        }
        Ok(Self {
            lower,
            upper,
            hazard_threshold,
            metric_bounds,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn hazard_threshold(&self) -> f64 {
        self.hazard_threshold
    }

    pub fn metric_bounds(&self) -> (f64, f64) {
        self.metric_bounds
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.extent(d)).product()
    }

    /// The whole space as a box.
    pub fn as_box(&self) -> HazardBox {
        HazardBox {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            member_count: 0,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .enumerate()
                .all(|(d, &x)| self.lower[d] <= x && x <= self.upper[d])
    }

    /// Maps a point into the unit cube.
    pub fn normalize(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(d, &x)| (x - self.lower[d]) / self.extent(d))
            .collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(d, &x)| self.lower[d] + x * self.extent(d))
            .collect()
    }

    pub fn is_hazardous(&self, risk: f64) -> bool {
        risk > self.hazard_threshold
    }

    /// Clamps a raw objective value into the metric bounds. The flag is true
    /// when clamping changed the value.
    pub fn clamp_risk(&self, risk: f64) -> (f64, bool) {
        let (lo, hi) = self.metric_bounds;
        let clamped = risk.clamp(lo, hi);
        (clamped, clamped != risk)
    }
}

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SamplePoint(pub Vec<f64>);

impl SamplePoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for SamplePoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for SamplePoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// One evaluated sample.
///
/// `density` and `loss` start at neutral values (1 and 0) and are refreshed
/// by the search loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub point: SamplePoint,
    pub risk: f64,
    pub hazardous: bool,
    pub density: f64,
    pub loss: f64,
    pub sample_index: usize,
}

impl SampleRecord {
    /// Builds a record, clamping `raw_risk` into the space's metric bounds.
    pub fn new(
        point: SamplePoint,
        raw_risk: f64,
        space: &SearchSpace,
        sample_index: usize,
    ) -> Self {
        let (risk, _) = space.clamp_risk(raw_risk);
        Self {
            point,
            risk,
            hazardous: space.is_hazardous(risk),
            density: 1.0,
            loss: 0.0,
            sample_index,
        }
    }
}

/// Axis-aligned hyper-cuboid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub member_count: usize,
}

impl HazardBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, member_count: usize) -> Result<Self> {
        Error::dims(lower.len(), upper.len())?;
        if let Some(d) = (0..lower.len()).find(|&d| !(lower[d] <= upper[d])) {
            return Err(Error::InvalidBox(format!(
                "dimension {d}: lower {} above upper {}",
                lower[d], upper[d]
            )));
        }
        Ok(Self {
            lower,
            upper,
            member_count,
        })
    }

    /// Per-dimension extrema of a non-empty point set.
    pub fn bounding<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter
            .next()
            .ok_or(Error::Empty("bounding box of no points"))?;
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        let mut count = 1;
        for p in iter {
            Error::dims(lower.len(), p.len())?;
            for (d, &x) in p.iter().enumerate() {
                lower[d] = lower[d].min(x);
                upper[d] = upper[d].max(x);
            }
            count += 1;
        }
        Ok(Self {
            lower,
            upper,
            member_count: count,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    pub fn contains(&self, p: &[f64]) -> Result<bool> {
        Error::dims(self.dim(), p.len())?;
        Ok(self.contains_unchecked(p))
    }

    pub(crate) fn contains_unchecked(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(d, &x)| self.lower[d] <= x && x <= self.upper[d])
    }

    /// Smallest box containing both; member counts add.
    pub fn hull(&self, other: &HazardBox) -> Result<HazardBox> {
        Error::dims(self.dim(), other.dim())?;
        Ok(HazardBox {
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(a, b)| a.min(*b))
                .collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a.max(*b))
                .collect(),
            member_count: self.member_count + other.member_count,
        })
    }

    /// Length of the intersection of the two boxes along `d` (0 if disjoint).
    pub fn overlap_len(&self, other: &HazardBox, d: usize) -> f64 {
        (self.upper[d].min(other.upper[d]) - self.lower[d].max(other.lower[d])).max(0.0)
    }

    /// Volume of the intersection. Dimensions must match.
    pub fn intersection_volume(&self, other: &HazardBox) -> Result<f64> {
        Error::dims(self.dim(), other.dim())?;
        let mut v = 1.0;
        for d in 0..self.dim() {
            v *= self.overlap_len(other, d);
        }
        Ok(v)
    }

    /// True when the interiors intersect: positive overlap in every dimension.
    /// Boxes touching at a face do not overlap.
    pub fn overlaps(&self, other: &HazardBox) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|d| self.overlap_len(other, d) > 0.0)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Distance from the center to any vertex.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * (0..self.dim())
            .map(|d| self.width(d).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Grows every side by `fraction` of the width along that axis.
    pub fn expanded(&self, fraction: f64) -> HazardBox {
        let pad: Vec<f64> = (0..self.dim()).map(|d| fraction * self.width(d)).collect();
        HazardBox {
            lower: self.lower.iter().zip(&pad).map(|(x, p)| x - p).collect(),
            upper: self.upper.iter().zip(&pad).map(|(x, p)| x + p).collect(),
            member_count: self.member_count,
        }
    }

    /// Intersection with `other`, or `None` when they are disjoint.
    pub fn clipped_to(&self, other: &HazardBox) -> Option<HazardBox> {
        let lower: Vec<f64> = self
            .lower
            .iter()
            .zip(&other.lower)
            .map(|(a, b)| a.max(*b))
            .collect();
        let upper: Vec<f64> = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| a.min(*b))
            .collect();
        if lower.iter().zip(&upper).all(|(a, b)| a <= b) {
            Some(HazardBox {
                lower,
                upper,
                member_count: self.member_count,
            })
        } else {
            None
        }
    }
}
