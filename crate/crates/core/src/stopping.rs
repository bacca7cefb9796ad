//! Stratified train/test split and the stopping rule.
//!
//! The space is binned into a uniform grid. Each occupied cell contributes
//! one record to the test set: the one whose risk is closest to the cell's
//! median risk. The search stops once the test set covers enough cells and a
//! classifier trained on the rest predicts it well.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierConfig, KnnClassifier};
use crate::error::{Error, Result};
use crate::space::{SampleRecord, SearchSpace};

/// Total cell count above which the stratification grid is rejected.
const MAX_CELLS: u128 = 1 << 32;

/// Default bins per axis: 10 up to three dimensions, 6 beyond.
pub fn default_bins(dim: usize) -> usize {
    if dim <= 3 {
        10
    } else {
        6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedSplit {
    pub bins: usize,
    /// Positions into the record slice, ascending.
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub occupied_cells: usize,
    pub total_cells: u128,
}

fn cell_of(space: &SearchSpace, p: &[f64], bins: usize) -> u128 {
    let u = space.normalize(p);
    u.iter().fold(0u128, |acc, &x| {
        let k = ((x * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        acc * bins as u128 + k as u128
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn stratified_split(
    records: &[SampleRecord],
    space: &SearchSpace,
    bins: usize,
) -> Result<StratifiedSplit> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 bins per axis, got {bins}"
        )));
    }
    let total_cells = (bins as u128)
        .checked_pow(space.dim() as u32)
        .filter(|&c| c <= MAX_CELLS)
        .ok_or(Error::GridTooLarge {
            points: u128::MAX,
            cap: MAX_CELLS,
        })?;

    let mut cells: BTreeMap<u128, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        Error::dims(space.dim(), r.point.len())?;
        cells
            .entry(cell_of(space, &r.point, bins))
            .or_default()
            .push(i);
    }

    let mut test = Vec::with_capacity(cells.len());
    for members in cells.values() {
        let mut risks: Vec<f64> = members.iter().map(|&i| records[i].risk).collect();
        risks.sort_by(f64::total_cmp);
        let m = median(&risks);
        let pick = members
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let (ra, rb) = (&records[a], &records[b]);
                (ra.risk - m)
                    .abs()
                    .total_cmp(&(rb.risk - m).abs())
                    .then(ra.sample_index.cmp(&rb.sample_index))
            })
            .expect("cells are nonempty");
        test.push(pick);
    }
    test.sort_unstable();
    let mut is_test = vec![false; records.len()];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..records.len()).filter(|&i| !is_test[i]).collect();

    Ok(StratifiedSplit {
        bins,
        test,
        train,
        occupied_cells: cells.len(),
        total_cells,
    })
}

/// Fraction of grid cells holding at least one record.
pub fn coverage_ct(split: &StratifiedSplit) -> f64 {
    split.occupied_cells as f64 / split.total_cells as f64
}

/// F-beta with beta = 2; 0 when there are no true positives.
pub fn f2_score(predictions: &[bool], truths: &[bool]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Empty("F2 of no labels"));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f2_from_counts(tp, fp, fn_))
}

pub(crate) fn f2_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    5.0 * p * r / (4.0 * p + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopConfig {
    /// Minimum held-out F2 of the observation classifier.
    pub f_s: f64,
    /// Minimum fraction of occupied cells.
    pub coverage: f64,
    /// Bins per axis; `None` picks [`default_bins`].
    pub bins: Option<usize>,
    pub first_check: usize,
    pub every: usize,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            f_s: 0.9,
            coverage: 0.8,
            bins: None,
            first_check: 500,
            every: 250,
        }
    }
}

impl StopConfig {
    pub fn bins_for(&self, dim: usize) -> usize {
        self.bins.unwrap_or_else(|| default_bins(dim))
    }

    /// Whether a check is due once `n` samples exist.
    pub fn is_check_point(&self, n: usize) -> bool {
        n >= self.first_check && (n - self.first_check) % self.every == 0
    }

    /// Smallest check point strictly above `n`.
    pub fn next_check_after(&self, n: usize) -> usize {
        if n < self.first_check {
            self.first_check
        } else {
            self.first_check + ((n - self.first_check) / self.every + 1) * self.every
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.f_s) || !(0.0..=1.0).contains(&self.coverage) {
            return Err(Error::Config(
                "stopping thresholds must lie in [0, 1]".into(),
            ));
        }
        if self.every == 0 || self.first_check == 0 {
            return Err(Error::Config("stopping cadence must be positive".into()));
        }
        if matches!(self.bins, Some(b) if b < 2) {
            return Err(Error::Config("stopping grid needs at least 2 bins".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub n_samples: usize,
    pub coverage: f64,
    pub f2_obv: f64,
    pub stop: bool,
    pub f_s: f64,
    pub coverage_threshold: f64,
}

/// Trains a fresh observation classifier on the train split, scores it on
/// the test split and applies both thresholds. A split with no training
/// records scores F2 = 0.
pub fn should_stop(
    records: &[SampleRecord],
    space: &SearchSpace,
    classifier: ClassifierConfig,
    config: &StopConfig,
) -> Result<StopDecision> {
    if records.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: records.len(),
        });
    }
    let split = stratified_split(records, space, config.bins_for(space.dim()))?;
    let coverage = coverage_ct(&split);
    let f2_obv = if split.train.is_empty() {
        0.0
    } else {
        let model =
            KnnClassifier::train_subset(records, split.train.iter().copied(), space, classifier)?;
        let pred: Vec<bool> = split
            .test
            .iter()
            .map(|&i| model.predict(&records[i].point).label)
            .collect();
        let truth: Vec<bool> = split.test.iter().map(|&i| records[i].hazardous).collect();
        f2_score(&pred, &truth)?
    };
    Ok(StopDecision {
        n_samples: records.len(),
        coverage,
        f2_obv,
        stop: decide(coverage, f2_obv, config),
        f_s: config.f_s,
        coverage_threshold: config.coverage,
    })
}

fn decide(coverage: f64, f2_obv: f64, config: &StopConfig) -> bool {
    coverage >= config.coverage && f2_obv >= config.f_s
}
