//! Binary hazard classifier over normalized parameters.
//!
//! A k-nearest-neighbour vote stands in for a learned behavior model. It is
//! used twice: the testing model (trained on every record) supplies the
//! per-sample loss that enters node statistics, and the observation model
//! (trained on the stratified train split) drives the stopping check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{SampleRecord, SearchSpace};

/// Predicted probabilities are clipped to `[LOSS_CLIP, 1 - LOSS_CLIP]`
/// before taking logs.
pub const LOSS_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub k: usize,
    pub distance_weighted: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            k: 5,
            distance_weighted: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: bool,
    /// Hazardous vote share in `[0, 1]`.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct KnnClassifier {
    config: ClassifierConfig,
    space: SearchSpace,
    dim: usize,
    /// Normalized training points, row-major.
    points: Vec<f64>,
    labels: Vec<bool>,
    sample_indices: Vec<usize>,
}

impl KnnClassifier {
    pub fn train(
        records: &[SampleRecord],
        space: &SearchSpace,
        config: ClassifierConfig,
    ) -> Result<Self> {
        Self::train_subset(
            records,
            records.iter().enumerate().map(|(i, _)| i),
            space,
            config,
        )
    }

    /// Trains on `records[i]` for each `i` in `subset`, in that order.
    pub fn train_subset<I>(
        records: &[SampleRecord],
        subset: I,
        space: &SearchSpace,
        config: ClassifierConfig,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        if config.k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        let dim = space.dim();
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut sample_indices = Vec::new();
        for i in subset {
            let r = &records[i];
            Error::dims(dim, r.point.len())?;
            points.extend(space.normalize(&r.point));
            labels.push(r.hazardous);
            sample_indices.push(r.sample_index);
        }
        if labels.is_empty() {
            return Err(Error::Empty("classifier training set"));
        }
        Ok(Self {
            config,
            space: space.clone(),
            dim,
            points,
            labels,
            sample_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn config(&self) -> ClassifierConfig {
        self.config
    }

    pub fn predict(&self, p: &[f64]) -> Prediction {
        let q = self.space.normalize(p);
        self.vote(&q, None)
    }

    /// Prediction for a training record with that record left out, so its
    /// loss reflects how well its neighbours explain it. Falls back to a
    /// plain prediction for records outside the training set or when the
    /// training set holds nothing else.
    pub fn predict_record(&self, r: &SampleRecord) -> Prediction {
        let q = self.space.normalize(&r.point);
        let skip = self
            .sample_indices
            .iter()
            .position(|&s| s == r.sample_index);
        match skip {
            Some(_) if self.len() == 1 => self.vote(&q, None),
            other => self.vote(&q, other),
        }
    }

    /// Binary cross-entropy of the record's label under
    /// [`predict_record`](Self::predict_record).
    pub fn sample_loss(&self, r: &SampleRecord) -> f64 {
        binary_cross_entropy(r.hazardous, self.predict_record(r).score)
    }

    fn vote(&self, q: &[f64], skip: Option<usize>) -> Prediction {
        let k = self.config.k.min(self.len() - usize::from(skip.is_some()));
        // (squared distance, index), kept sorted ascending; ties keep the
        // earlier training point.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, row) in self.points.chunks_exact(self.dim).enumerate() {
            if Some(i) == skip {
                continue;
            }
            let mut sq = 0.0;
            for d in 0..self.dim {
                let u = row[d] - q[d];
                sq += u * u;
            }
            if best.len() == k && sq >= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(s, _)| s <= sq);
            best.insert(pos, (sq, i));
            best.truncate(k);
        }

        let exact: Vec<usize> = best
            .iter()
            .filter(|(s, _)| *s == 0.0)
            .map(|&(_, i)| i)
            .collect();
        let score = if !exact.is_empty() {
            exact.iter().filter(|&&i| self.labels[i]).count() as f64 / exact.len() as f64
        } else if self.config.distance_weighted {
            let (mut hit, mut total) = (0.0, 0.0);
            for &(sq, i) in &best {
                let w = 1.0 / sq.sqrt();
                total += w;
                if self.labels[i] {
                    hit += w;
                }
            }
            hit / total
        } else {
            best.iter().filter(|&&(_, i)| self.labels[i]).count() as f64 / best.len() as f64
        };
        Prediction {
            label: score > 0.5,
            score,
        }
    }
}

pub fn binary_cross_entropy(hazardous: bool, score: f64) -> f64 {
    let p = score.clamp(LOSS_CLIP, 1.0 - LOSS_CLIP);
    if hazardous {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Retrains the testing model on all records and stores each record's loss.
pub fn refresh_losses(
    records: &mut [SampleRecord],
    space: &SearchSpace,
    config: ClassifierConfig,
) -> Result<KnnClassifier> {
    let model = KnnClassifier::train(records, space, config)?;
    let losses: Vec<f64> = records.iter().map(|r| model.sample_loss(r)).collect();
    for (r, e) in records.iter_mut().zip(losses) {
        r.loss = e;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{grid_oracle, GaussianObjective, DEFAULT_GRID_CAP};
    use crate::space::SamplePoint;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn space2() -> SearchSpace {
        SearchSpace::new(vec![0.0, 0.0], vec![10.0, 10.0], 0.5, (0.0, 1.0)).unwrap()
    }

    fn rec(x: f64, y: f64, risk: f64, i: usize, s: &SearchSpace) -> SampleRecord {
        SampleRecord::new(SamplePoint::new(vec![x, y]), risk, s, i)
    }

    #[test]
    fn single_class_predicts_constant() {
        let s = space2();
        let recs: Vec<_> = (0..10)
            .map(|i| rec(i as f64, 9.0 - i as f64, 0.1, i, &s))
            .collect();
        let m = KnnClassifier::train(&recs, &s, ClassifierConfig::default()).unwrap();
        for q in [[0.0, 0.0], [5.5, 2.1], [10.0, 10.0]] {
            assert!(!m.predict(&q).label);
        }
        assert!(KnnClassifier::train(&[], &s, ClassifierConfig::default()).is_err());
    }

    #[test]
    fn nearest_self_and_tie() {
        let s = space2();
        let recs = vec![rec(2.0, 2.0, 0.9, 0, &s), rec(4.0, 2.0, 0.1, 1, &s)];
        let k1 = KnnClassifier::train(
            &recs,
            &s,
            ClassifierConfig {
                k: 1,
                distance_weighted: true,
            },
        )
        .unwrap();
        assert_eq!(
            k1.predict(&[2.0, 2.0]),
            Prediction {
                label: true,
                score: 1.0
            }
        );
        let k2 = KnnClassifier::train(
            &recs,
            &s,
            ClassifierConfig {
                k: 2,
                distance_weighted: false,
            },
        )
        .unwrap();
        let tie = k2.predict(&[3.0, 2.0]);
        assert_eq!(tie.score, 0.5);
        assert!(!tie.label);
    }

    #[test]
    fn loss_values() {
        assert_relative_eq!(
            binary_cross_entropy(true, 1.0 - 1e-6),
            1e-6,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            binary_cross_entropy(true, 0.5),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            binary_cross_entropy(false, 0.5),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_relative_eq!(binary_cross_entropy(true, 1e-6), 13.8155, epsilon = 1e-4);
        assert_relative_eq!(
            binary_cross_entropy(true, 0.0),
            -(1e-6f64).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn leave_one_out_loss_uses_neighbours() {
        let s = space2();
        // an isolated hazardous point among safe ones is poorly explained
        let mut recs: Vec<_> = (0..9)
            .map(|i| rec(1.0 + i as f64, 1.0, 0.1, i, &s))
            .collect();
        recs.push(rec(7.5, 1.0, 0.9, 9, &s));
        let m = KnnClassifier::train(&recs, &s, ClassifierConfig::default()).unwrap();
        assert!(m.sample_loss(&recs[9]) > 10.0);
        assert!(m.sample_loss(&recs[0]) < 0.1);
    }

    #[test]
    fn deterministic_training() {
        let s = space2();
        let recs: Vec<_> = (0..30)
            .map(|i| {
                let x = (i * 37 % 100) as f64 / 10.0;
                let y = (i * 61 % 100) as f64 / 10.0;
                rec(x, y, if x + y > 10.0 { 0.9 } else { 0.1 }, i, &s)
            })
            .collect();
        let a = KnnClassifier::train(&recs, &s, ClassifierConfig::default()).unwrap();
        let b = KnnClassifier::train(&recs, &s, ClassifierConfig::default()).unwrap();
        for i in 0..50 {
            let q = [i as f64 * 0.2, 10.0 - i as f64 * 0.13];
            assert_eq!(a.predict(&q), b.predict(&q));
        }
    }

    #[test]
    fn gaussian_grid_holdout_accuracy() {
        // 200 grid points around one mode; every 5th point held out
        let obj = GaussianObjective::standard(2).unwrap();
        let sub = SearchSpace::new(vec![-14.0, -4.0], vec![-6.0, 4.0], 0.8, (0.0, 1.0)).unwrap();
        let mut recs = Vec::new();
        for i in 0..20 {
            for j in 0..10 {
                let p = vec![-14.0 + 8.0 * i as f64 / 19.0, -4.0 + 8.0 * j as f64 / 9.0];
                let v = crate::objectives::Objective::evaluate(&obj, &p).unwrap();
                let n = recs.len();
                recs.push(SampleRecord::new(p.into(), v, &sub, n));
            }
        }
        let train: Vec<usize> = (0..recs.len()).filter(|i| i % 5 != 0).collect();
        let m =
            KnnClassifier::train_subset(&recs, train, &sub, ClassifierConfig::default()).unwrap();
        let test: Vec<&SampleRecord> = recs.iter().step_by(5).collect();
        let correct = test
            .iter()
            .filter(|r| m.predict(&r.point).label == r.hazardous)
            .count();
        assert!(correct as f64 / test.len() as f64 > 0.9);
    }

    #[test]
    fn full_grid_training_reproduces_labels() {
        let obj = GaussianObjective::standard(2).unwrap();
        let gt = grid_oracle(&obj, &[60, 60], DEFAULT_GRID_CAP).unwrap();
        let recs: Vec<SampleRecord> = (0..gt.len())
            .map(|i| SampleRecord::new(gt.grid.point(i).into(), gt.risks[i], &gt.space, i))
            .collect();
        let m = KnnClassifier::train(&recs, &gt.space, ClassifierConfig::default()).unwrap();
        let pred: Vec<bool> = recs.iter().map(|r| m.predict(&r.point).label).collect();
        assert_eq!(crate::stopping::f2_score(&pred, &gt.labels()).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn affine_rescaling_keeps_labels(
            pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, any::<bool>()), 6..30),
            q in (0.0f64..10.0, 0.0f64..10.0),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
        ) {
            let s = space2();
            let recs: Vec<_> = pts.iter().enumerate()
                .map(|(i, &(x, y, h))| rec(x, y, if h { 0.9 } else { 0.1 }, i, &s))
                .collect();
            let m = KnnClassifier::train(&recs, &s, ClassifierConfig::default()).unwrap();
            let f = |x: f64| x * scale + shift;
            let s2 = SearchSpace::new(vec![f(0.0); 2], vec![f(10.0); 2], 0.5, (0.0, 1.0)).unwrap();
            let recs2: Vec<_> = pts.iter().enumerate()
                .map(|(i, &(x, y, h))| rec(f(x), f(y), if h { 0.9 } else { 0.1 }, i, &s2))
                .collect();
            let m2 = KnnClassifier::train(&recs2, &s2, ClassifierConfig::default()).unwrap();
            let a = m.predict(&[q.0, q.1]);
            let b = m2.predict(&[f(q.0), f(q.1)]);
            prop_assert_eq!(a.label, b.label);
        }

        #[test]
        fn loss_decreasing_in_score(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9 && lo >= LOSS_CLIP && hi <= 1.0 - LOSS_CLIP);
            prop_assert!(binary_cross_entropy(true, hi) < binary_cross_entropy(true, lo));
        }
    }
}
