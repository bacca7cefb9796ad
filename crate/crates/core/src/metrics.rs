//! Ground-truth scoring of identified hazardous domains.
//!
//! * overlap volume: summed intersection volume of identified boxes with a
//!   reference box;
//! * API: mean of overlap / reference volume and overlap / matched
//!   identified volume;
//! * ADI: centroid displacement relative to the reference half-diagonal;
//! * F2-grid: F2 of hazard predictions over an exhaustive grid.

use serde::{Deserialize, Serialize};

use crate::classifier::KnnClassifier;
use crate::error::{Error, Result};
use crate::objectives::{GridIndexer, GroundTruth};
use crate::space::{HazardBox, SearchSpace};
use crate::stopping::f2_from_counts;

pub const METRICS_SCHEMA: &str = "hazard-search/metrics/v1";

/// Summed intersection volume of `identified` with `gt`. Identified boxes
/// are assumed pairwise disjoint.
pub fn overlap_volume(gt: &HazardBox, identified: &[HazardBox]) -> Result<f64> {
    let mut total = 0.0;
    for b in identified {
        total += gt.intersection_volume(b)?;
    }
    Ok(total)
}

fn check_gt(gt: &[HazardBox]) -> Result<()> {
    if gt.is_empty() {
        return Err(Error::Empty("reference domain list"));
    }
    if let Some(i) = gt.iter().position(|b| !(b.volume() > 0.0)) {
        return Err(Error::InvalidBox(format!(
            "reference domain {i} has zero volume"
        )));
    }
    Ok(())
}

/// Identified boxes with positive intersection volume with `gt`.
fn matches(gt: &HazardBox, identified: &[HazardBox]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (j, b) in identified.iter().enumerate() {
        if gt.intersection_volume(b)? > 0.0 {
            out.push(j);
        }
    }
    Ok(out)
}

fn api_term(gt: &HazardBox, identified: &[HazardBox], matched: &[usize]) -> Result<(f64, f64)> {
    if matched.is_empty() {
        return Ok((0.0, 0.0));
    }
    let boxes: Vec<HazardBox> = matched.iter().map(|&j| identified[j].clone()).collect();
    let ov = overlap_volume(gt, &boxes)?;
    let id_sum: f64 = boxes.iter().map(HazardBox::volume).sum();
    Ok((ov, ov / gt.volume() + ov / id_sum))
}

pub fn api(gt: &[HazardBox], identified: &[HazardBox]) -> Result<f64> {
    Ok(MetricReport::score(gt, identified, None, None)?.api)
}

/// Euclidean distance between box centers.
pub fn centroid_distance(a: &HazardBox, b: &HazardBox) -> Result<f64> {
    Error::dims(a.dim(), b.dim())?;
    Ok(a.center()
        .iter()
        .zip(b.center())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

fn adi_term(gt: &HazardBox, identified: &[HazardBox], matched: &[usize]) -> Result<f64> {
    if matched.is_empty() {
        return Ok(0.0);
    }
    let d_max = gt.half_diagonal();
    let mut sum = 0.0;
    for &j in matched {
        sum += (1.0 - centroid_distance(gt, &identified[j])? / d_max).max(0.0);
    }
    Ok(sum / matched.len() as f64)
}

pub fn adi(gt: &[HazardBox], identified: &[HazardBox]) -> Result<f64> {
    Ok(MetricReport::score(gt, identified, None, None)?.adi)
}

/// F2 over every grid point, predicting hazard inside any of `boxes`.
pub fn f2_grid_boxes(truth: &GroundTruth, boxes: &[HazardBox]) -> Result<f64> {
    for b in boxes {
        Error::dims(truth.space.dim(), b.dim())?;
    }
    f2_grid_with(truth, |p| boxes.iter().any(|b| b.contains_unchecked(p)))
}

/// F2 over every grid point, predicting with `classifier`.
pub fn f2_grid_classifier(truth: &GroundTruth, classifier: &KnnClassifier) -> Result<f64> {
    f2_grid_with(truth, |p| classifier.predict(p).label)
}

fn f2_grid_with(truth: &GroundTruth, mut predict: impl FnMut(&[f64]) -> bool) -> Result<f64> {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut p = vec![0.0; truth.space.dim()];
    for i in 0..truth.len() {
        truth.grid.point_into(i, &mut p);
        match (predict(&p), truth.label(i)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f2_from_counts(tp, fp, fn_))
}

/// Fraction of points of a `resolution`-per-axis grid the classifier labels
/// hazardous.
pub fn hazard_ratio_estimate(
    classifier: &KnnClassifier,
    space: &SearchSpace,
    resolution: &[usize],
    cap: u128,
) -> Result<f64> {
    let grid = GridIndexer::new(space, resolution, cap)?;
    let mut p = vec![0.0; space.dim()];
    let mut hits = 0usize;
    for i in 0..grid.len() {
        grid.point_into(i, &mut p);
        hits += usize::from(classifier.predict(&p).label);
    }
    Ok(hits as f64 / grid.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBreakdown {
    pub reference: HazardBox,
    pub overlap_volume: f64,
    /// Indices into the identified-domain list.
    pub matched: Vec<usize>,
    pub api: f64,
    pub adi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: String,
    pub f2_grid: Option<f64>,
    pub api: f64,
    pub adi: f64,
    pub per_gt: Vec<GtBreakdown>,
    pub hazard_ratio: Option<f64>,
    /// Set when some reference domain has no overlapping identified domain.
    pub no_detection: bool,
}

impl MetricReport {
    /// Box metrics plus optional grid-based scores.
    pub fn score(
        gt: &[HazardBox],
        identified: &[HazardBox],
        f2_grid: Option<f64>,
        hazard_ratio: Option<f64>,
    ) -> Result<Self> {
        check_gt(gt)?;
        let mut per_gt = Vec::with_capacity(gt.len());
        for g in gt {
            let matched = matches(g, identified)?;
            let (ov, api_i) = api_term(g, identified, &matched)?;
            let adi_i = adi_term(g, identified, &matched)?;
            per_gt.push(GtBreakdown {
                reference: g.clone(),
                overlap_volume: ov,
                matched,
                api: api_i / 2.0,
                adi: adi_i,
            });
        }
        let n = gt.len() as f64;
        Ok(Self {
            schema: METRICS_SCHEMA.to_string(),
            f2_grid,
            api: per_gt.iter().map(|b| b.api).sum::<f64>() / n,
            adi: per_gt.iter().map(|b| b.adi).sum::<f64>() / n,
            no_detection: per_gt.iter().any(|b| b.matched.is_empty()),
            per_gt,
            hazard_ratio,
        })
    }

    pub const CSV_HEADER: &'static str = "f2_grid,api,adi,hazard_ratio,no_detection";

    /// One CSV row matching [`CSV_HEADER`](Self::CSV_HEADER); absent values
    /// are empty fields.
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            opt(self.f2_grid),
            self.api,
            self.adi,
            opt(self.hazard_ratio),
            self.no_detection
        )
    }
}
