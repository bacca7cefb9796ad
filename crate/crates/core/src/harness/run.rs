use std::time::Instant;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::report::{
    AblationPair, IterationTrace, RunKind, RunReport, RunStatus, SampleOrigin, Timings,
    TreeSnapshot, REPORT_SCHEMA,
};
use crate::acquisition::{sample_in_leaf, select_leaf, ScoringContext, UcbMode};
use crate::classifier::{refresh_losses, KnnClassifier};
use crate::density::refresh_densities;
use crate::error::{Error, Result};
use crate::identify::{identify_domains, IdentifiedDomain};
use crate::metrics::{f2_grid_boxes, f2_grid_classifier, hazard_ratio_estimate, MetricReport};
use crate::objectives::{grid_oracle, GroundTruth, Objective, DEFAULT_GRID_CAP};
use crate::space::{SamplePoint, SampleRecord};
use crate::stopping::should_stop;
use crate::tree::{PartitionTree, TreeConfig};

/// Ground truth for the configured evaluation grid, if one is requested.
pub fn ground_truth_for<O: Objective + ?Sized>(
    objective: &O,
    config: &RunConfig,
) -> Result<Option<GroundTruth>> {
    match config.evaluation.grid_resolution {
        None => Ok(None),
        Some(r) => grid_oracle(
            objective,
            &vec![r; objective.space().dim()],
            DEFAULT_GRID_CAP,
        )
        .map(Some),
    }
}

fn classifier_enabled<O: Objective + ?Sized>(objective: &O, config: &RunConfig) -> bool {
    config
        .classifier
        .enabled
        .unwrap_or_else(|| objective.uses_behavior_model())
}

/// Scores identified domains against ground truth. Returns `None` when no
/// reference domains are known.
///
/// F2-grid uses a classifier trained on all records when the run uses the
/// behavior classifier, and membership in any identified domain otherwise.
pub fn score_run<O: Objective + ?Sized>(
    objective: &O,
    truth: Option<&GroundTruth>,
    records: &[SampleRecord],
    domains: &[IdentifiedDomain],
    config: &RunConfig,
) -> Result<Option<MetricReport>> {
    let reference = match truth {
        Some(t) => t.true_boxes.clone(),
        None => objective.analytic_hazard_boxes().unwrap_or_default(),
    };
    if reference.is_empty() {
        return Ok(None);
    }
    let space = objective.space();
    let model = if records.is_empty() {
        None
    } else {
        Some(KnnClassifier::train(
            records,
            space,
            config.classifier.model,
        )?)
    };
    let boxes: Vec<_> = domains.iter().map(|d| d.bounds.clone()).collect();
    let f2_grid = match (truth, &model) {
        (Some(t), Some(m)) if classifier_enabled(objective, config) => {
            Some(f2_grid_classifier(t, m)?)
        }
        (Some(t), _) => Some(f2_grid_boxes(t, &boxes)?),
        (None, _) => None,
    };
    let hazard_ratio = match (config.evaluation.hazard_ratio_resolution, &model) {
        (Some(r), Some(m)) => Some(hazard_ratio_estimate(
            m,
            space,
            &vec![r; space.dim()],
            DEFAULT_GRID_CAP,
        )?),
        _ => None,
    };
    MetricReport::score(&reference, &boxes, f2_grid, hazard_ratio).map(Some)
}

/// Recomputes domains and metrics from the persisted records and final tree.
pub fn rescore<O: Objective + ?Sized>(
    report: &RunReport,
    objective: &O,
    truth: Option<&GroundTruth>,
) -> Result<(Vec<IdentifiedDomain>, Option<MetricReport>)> {
    let domains = identify_domains(&report.final_tree, &report.records)?;
    let metrics = score_run(objective, truth, &report.records, &domains, &report.config)?;
    Ok((domains, metrics))
}

struct Search<'a, O: ?Sized> {
    objective: &'a O,
    config: &'a RunConfig,
    kind: RunKind,
    seed: u64,
    use_classifier: bool,
    tree_config: TreeConfig,
    records: Vec<SampleRecord>,
    origins: Vec<SampleOrigin>,
    clamped: usize,
    timings: Timings,
}

impl<O: Objective + ?Sized> Search<'_, O> {
    /// Evaluates `points` in order, stopping at the first failure.
    fn evaluate(
        &mut self,
        points: Vec<Vec<f64>>,
        origin: SampleOrigin,
    ) -> std::result::Result<(), String> {
        let start = Instant::now();
        let space = self.objective.space();
        let mut outcome = Ok(());
        for p in points {
            match self.objective.evaluate(&p) {
                Ok(raw) if !raw.is_nan() => {
                    let (_, clamped) = space.clamp_risk(raw);
                    self.clamped += usize::from(clamped);
                    let idx = self.records.len();
                    self.records
                        .push(SampleRecord::new(SamplePoint::new(p), raw, space, idx));
                    self.origins.push(origin);
                }
                Ok(_) => {
                    outcome = Err(format!("objective returned NaN at {p:?}"));
                    break;
                }
                Err(e) => {
                    outcome = Err(e.to_string());
                    break;
                }
            }
        }
        self.timings.evaluation += start.elapsed().as_secs_f64();
        outcome
    }

    /// Refreshes densities (and losses) and rebuilds the tree.
    fn rebuild(&mut self) -> Result<PartitionTree> {
        let space = self.objective.space();
        let start = Instant::now();
        refresh_densities(&mut self.records, space)?;
        if self.use_classifier && !self.records.is_empty() {
            refresh_losses(&mut self.records, space, self.config.classifier.model)?;
        }
        self.timings.refresh += start.elapsed().as_secs_f64();
        let start = Instant::now();
        let tree = match self.kind {
            RunKind::Item => PartitionTree::build(&self.records, space, self.tree_config)?,
            RunKind::RandomBaseline => PartitionTree::single_node(&self.records, space)?,
        };
        self.timings.tree += start.elapsed().as_secs_f64();
        Ok(tree)
    }

    fn run(mut self, truth: Option<&GroundTruth>) -> Result<RunReport> {
        let started = Instant::now();
        let space = self.objective.space().clone();
        let dim = space.dim();
        let budget = self.config.budget.max_samples();
        let ucb = self.config.ucb.resolve(budget);
        let stop_cfg = self.config.budget.stopping().copied();
        let n_init = self
            .config
            .initial_samples
            .unwrap_or(10 * dim)
            .clamp(1, budget);
        let ctx_base = ScoringContext {
            n_sampled: 0,
            use_loss: self.use_classifier,
            f_low: space.metric_bounds().0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        let mut status = None;
        let mut stop_history = Vec::new();
        let mut check_trees = Vec::new();
        let mut iterations = Vec::new();

        let first = sample_in_leaf(&space.as_box(), n_init, &mut rng);
        let initial = SampleOrigin {
            iteration: None,
            leaf: None,
            leaf_boundary: false,
        };
        if let Err(reason) = self.evaluate(first, initial) {
            status = Some(RunStatus::Incomplete { reason });
        }

        let mut iteration = 0;
        while status.is_none() {
            let n = self.records.len();
            let check_due = stop_cfg.is_some_and(|s| s.is_check_point(n));
            let tree = if self.kind == RunKind::Item || check_due {
                Some(self.rebuild()?)
            } else {
                None
            };

            if let (Some(stop), true) = (&stop_cfg, check_due) {
                let start = Instant::now();
                let decision =
                    should_stop(&self.records, &space, self.config.classifier.model, stop)?;
                self.timings.stopping += start.elapsed().as_secs_f64();
                info!(
                    "seed {} n={} coverage={:.3} f2_obv={:.3} stop={}",
                    self.seed, n, decision.coverage, decision.f2_obv, decision.stop
                );
                let stop_now = decision.stop;
                stop_history.push(decision);
                if let Some(t) = &tree {
                    check_trees.push(TreeSnapshot {
                        n_samples: n,
                        tree: t.clone(),
                    });
                }
                if stop_now {
                    status = Some(RunStatus::Stopped);
                    break;
                }
            }
            if n >= budget {
                status = Some(RunStatus::BudgetExhausted);
                break;
            }

            let mut batch = ucb.batch_size.min(budget - n);
            if let Some(stop) = &stop_cfg {
                batch = batch.min(stop.next_check_after(n) - n);
            }
            let (points, trace) = match (&tree, self.kind) {
                (Some(tree), RunKind::Item) => {
                    let ctx = ScoringContext {
                        n_sampled: n,
                        ..ctx_base
                    };
                    let sel = select_leaf(tree, &ucb, &ctx, &mut rng)?;
                    let leaf = tree.node(sel.leaf);
                    let points = sample_in_leaf(&leaf.region, batch, &mut rng);
                    let trace = IterationTrace {
                        iteration,
                        n_before: n,
                        leaf: leaf.id,
                        leaf_boundary: leaf.stats.boundary,
                        batch,
                        path: self.config.trace.then_some(sel.path),
                    };
                    (points, trace)
                }
                _ => {
                    let points = sample_in_leaf(&space.as_box(), batch, &mut rng);
                    let trace = IterationTrace {
                        iteration,
                        n_before: n,
                        leaf: 0,
                        leaf_boundary: false,
                        batch,
                        path: None,
                    };
                    (points, trace)
                }
            };
            let origin = SampleOrigin {
                iteration: Some(iteration),
                leaf: Some(trace.leaf),
                leaf_boundary: trace.leaf_boundary,
            };
            debug!(
                "iteration {iteration}: n={n} leaf={} boundary={}",
                trace.leaf, trace.leaf_boundary
            );
            iterations.push(trace);
            if let Err(reason) = self.evaluate(points, origin) {
                status = Some(RunStatus::Incomplete { reason });
            }
            iteration += 1;
        }
        let status = status.expect("loop exits with a status");

        let final_tree = self.rebuild()?;
        let start = Instant::now();
        let domains = identify_domains(&final_tree, &self.records)?;
        let metrics = score_run(self.objective, truth, &self.records, &domains, self.config)?;
        self.timings.scoring = start.elapsed().as_secs_f64();
        self.timings.total = started.elapsed().as_secs_f64();

        Ok(RunReport {
            schema: REPORT_SCHEMA.to_string(),
            kind: self.kind,
            objective: self.objective.name().to_string(),
            seed: self.seed,
            config: self.config.clone(),
            ucb,
            tree_config: self.tree_config,
            classifier_enabled: self.use_classifier,
            initial_samples: n_init,
            status,
            clamped: self.clamped,
            records: self.records,
            origins: self.origins,
            final_tree,
            check_trees,
            stop_history,
            iterations,
            domains,
            metrics,
            timings: self.timings,
        })
    }
}

fn run_kind<O: Objective + ?Sized>(
    objective: &O,
    config: &RunConfig,
    seed: u64,
    kind: RunKind,
    truth: Option<&GroundTruth>,
) -> Result<RunReport> {
    config.validate()?;
    if let Some(t) = truth {
        Error::dims(objective.space().dim(), t.space.dim())?;
    }
    let search = Search {
        objective,
        config,
        kind,
        seed,
        use_classifier: classifier_enabled(objective, config),
        tree_config: config
            .tree
            .unwrap_or_else(|| TreeConfig::for_dim(objective.space().dim())),
        records: Vec::new(),
        origins: Vec::new(),
        clamped: 0,
        timings: Timings::default(),
    };
    search.run(truth)
}

/// Tree search on a caller-supplied objective.
pub fn run_item_with<O: Objective + ?Sized>(
    objective: &O,
    config: &RunConfig,
    seed: u64,
    truth: Option<&GroundTruth>,
) -> Result<RunReport> {
    run_kind(objective, config, seed, RunKind::Item, truth)
}

/// Uniform sampling over the whole space on a caller-supplied objective;
/// domains come from a root-only tree.
pub fn run_baseline_with<O: Objective + ?Sized>(
    objective: &O,
    config: &RunConfig,
    seed: u64,
    truth: Option<&GroundTruth>,
) -> Result<RunReport> {
    run_kind(objective, config, seed, RunKind::RandomBaseline, truth)
}

/// Tree search on the configured objective, scored against its configured
/// ground truth.
pub fn run_item(config: &RunConfig, seed: u64) -> Result<RunReport> {
    config.validate()?;
    let objective = config.build_objective()?;
    let truth = ground_truth_for(&*objective, config)?;
    run_item_with(&*objective, config, seed, truth.as_ref())
}

pub fn run_random_baseline(config: &RunConfig, seed: u64) -> Result<RunReport> {
    config.validate()?;
    let objective = config.build_objective()?;
    let truth = ground_truth_for(&*objective, config)?;
    run_baseline_with(&*objective, config, seed, truth.as_ref())
}

/// Improved and original selection on the same seed.
pub fn run_ablation_with<O: Objective + ?Sized>(
    objective: &O,
    config: &RunConfig,
    seed: u64,
    truth: Option<&GroundTruth>,
) -> Result<AblationPair> {
    let mut improved = config.clone();
    improved.ucb.mode = UcbMode::Improved;
    let mut original = config.clone();
    original.ucb.mode = UcbMode::Original;
    Ok(AblationPair {
        seed,
        improved: run_item_with(objective, &improved, seed, truth)?,
        original: run_item_with(objective, &original, seed, truth)?,
    })
}

/// One ablation pair per configured seed.
pub fn run_ablation(config: &RunConfig) -> Result<Vec<AblationPair>> {
    config.validate()?;
    let objective = config.build_objective()?;
    let truth = ground_truth_for(&*objective, config)?;
    config
        .seeds
        .iter()
        .map(|&s| run_ablation_with(&*objective, config, s, truth.as_ref()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{FnObjective, GaussianObjective};
    use crate::space::SearchSpace;

    fn smoke(samples: usize) -> RunConfig {
        let mut cfg = RunConfig::preset("smoke").unwrap();
        cfg.budget = super::super::config::Budget::Fixed { samples };
        cfg
    }

    #[test]
    fn smoke_run_respects_budget() {
        let cfg = smoke(20);
        let r = run_item(&cfg, 1).unwrap();
        assert_eq!(r.records.len(), 20);
        assert_eq!(r.status, RunStatus::BudgetExhausted);
        assert_eq!(r.initial_samples, 20);
        assert!(r.metrics.is_some());

        let r = run_item(&smoke(57), 3).unwrap();
        assert_eq!(r.records.len(), 57);
        let batches: usize = r.iterations.iter().map(|t| t.batch).sum();
        assert_eq!(r.initial_samples + batches, 57);
        for (i, rec) in r.records.iter().enumerate() {
            assert_eq!(rec.sample_index, i);
        }
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(run_item(&smoke(0), 1).is_err());
        assert!(run_random_baseline(&smoke(0), 1).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = smoke(120);
        let a = run_item(&cfg, 9).unwrap().without_timings();
        let b = run_item(&cfg, 9).unwrap().without_timings();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = run_item(&cfg, 10).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn report_round_trips_and_rescores() {
        let cfg = smoke(120);
        let obj = GaussianObjective::standard(2).unwrap();
        let truth = ground_truth_for(&obj, &cfg).unwrap();
        let r = run_item_with(&obj, &cfg, 4, truth.as_ref()).unwrap();
        let back = RunReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let (domains, metrics) = rescore(&back, &obj, truth.as_ref()).unwrap();
        assert_eq!(domains, r.domains);
        assert_eq!(metrics, r.metrics);
    }

    #[test]
    fn failing_objective_yields_incomplete_report() {
        let s = SearchSpace::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.5, (0.0, 1.0)).unwrap();
        let calls = std::cell::Cell::new(0);
        let obj = FnObjective::new("flaky", s, |p: &[f64]| {
            calls.set(calls.get() + 1);
            if calls.get() > 35 {
                Err(Error::Objective("simulator crashed".into()))
            } else {
                Ok(p[0])
            }
        });
        let r = run_item_with(&obj, &smoke(100), 1, None).unwrap();
        assert!(matches!(r.status, RunStatus::Incomplete { .. }));
        assert_eq!(r.records.len(), 35);
        assert!(r.metrics.is_none());
    }

    #[test]
    fn baseline_uses_root_only_tree() {
        let r = run_random_baseline(&smoke(80), 2).unwrap();
        assert_eq!(r.kind, RunKind::RandomBaseline);
        assert_eq!(r.final_tree.len(), 1);
        assert_eq!(r.records.len(), 80);
        assert!(r.domains.len() <= 1);
    }

    #[test]
    fn ablation_without_boundaries_matches() {
        // a constant objective never produces a boundary subspace
        let s = SearchSpace::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.5, (0.0, 1.0)).unwrap();
        let obj = FnObjective::new("flat", s, |_: &[f64]| Ok(0.1));
        let pair = run_ablation_with(&obj, &smoke(100), 5, None).unwrap();
        assert_eq!(pair.improved.records, pair.original.records);
        assert_eq!(pair.improved_focus(), 0.0);
    }

    #[test]
    fn stopping_run_lands_on_check_points() {
        let s = SearchSpace::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.5, (0.0, 1.0)).unwrap();
        let obj = FnObjective::new("half", s, |p: &[f64]| {
            Ok(if p[0] < 0.5 { 0.9 } else { 0.1 })
        });
        let mut cfg = smoke(3000);
        cfg.budget = super::super::config::Budget::Stopping {
            max_samples: 3000,
            criteria: crate::stopping::StopConfig {
                bins: Some(5),
                ..Default::default()
            },
        };
        let r = run_item_with(&obj, &cfg, 1, None).unwrap();
        assert_eq!(r.status, RunStatus::Stopped);
        let n = r.records.len();
        assert!(n >= 500 && (n - 500) % 250 == 0, "{n}");
        let last = r.stop_history.last().unwrap();
        assert!(last.stop && last.coverage >= 0.8 && last.f2_obv >= 0.9);
        assert_eq!(r.check_trees.len(), r.stop_history.len());
        for (d, t) in r.stop_history.iter().zip(&r.check_trees) {
            assert_eq!(d.n_samples, t.n_samples);
        }
    }
}
