use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hazard_search::acquisition::{select_leaf, ScoringContext};
use hazard_search::harness::{run_item, run_random_baseline, Budget, RunConfig, RunReport};
use hazard_search::objectives::{GaussianObjective, GaussianSpec, Objective};

fn gaussian_2d() -> GaussianSpec {
    GaussianSpec::new(2, 10.0, 3.0).unwrap()
}

fn with_budget(samples: usize) -> RunConfig {
    let mut cfg = RunConfig::preset("gaussian-2d").unwrap();
    cfg.budget = Budget::Fixed { samples };
    cfg
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Distance from `p` to the nearest point of the box.
fn box_dist(lower: &[f64], upper: &[f64], p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .map(|(d, &x)| (lower[d] - x).max(0.0).max(x - upper[d]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn two_domains_found_near_the_modes() {
    let centers = gaussian_2d().modality_centers();
    let report = run_item(&with_budget(900), 1).unwrap();
    assert_eq!(report.domains.len(), 2, "{:?}", report.domains);
    for c in &centers {
        let nearest = report
            .domains
            .iter()
            .map(|d| dist(&d.bounds.center(), c))
            .fold(f64::INFINITY, f64::min);
        assert!(
            nearest <= 1.0,
            "no domain centre within 1.0 of {c:?}: {nearest}"
        );
    }
}

#[test]
fn hazardous_samples_sit_in_small_leaves() {
    let report = run_item(&with_budget(900), 2).unwrap();
    let total = 40.0 * 40.0;
    let assignment = report.final_tree.leaf_assignment(report.n_samples());
    for (i, r) in report.records.iter().enumerate() {
        if r.hazardous {
            let v = report.final_tree.node(assignment[i]).region.volume();
            assert!(
                v < 0.05 * total,
                "hazardous sample {i} in a leaf of volume {v}"
            );
        }
    }
}

#[test]
fn selection_targets_the_hazard_disks() {
    let spec = gaussian_2d();
    let radius = spec.hazard_radius(0.8);
    let centers = spec.modality_centers();
    let report: RunReport = run_item(&with_budget(450), 3).unwrap();
    let ctx = ScoringContext {
        n_sampled: report.n_samples(),
        use_loss: report.classifier_enabled,
        f_low: 0.0,
    };
    let mut hits = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let sel = select_leaf(&report.final_tree, &report.ucb, &ctx, &mut rng).unwrap();
        let region = &report.final_tree.node(sel.leaf).region;
        if centers
            .iter()
            .any(|c| box_dist(&region.lower, &region.upper, c) < radius)
        {
            hits += 1;
        }
    }
    assert!(hits >= 80, "only {hits}/100 selections touch a hazard disk");
}

#[test]
fn baseline_api_below_item_api() {
    let cfg = with_budget(900);
    let (mut item, mut base) = (Vec::new(), Vec::new());
    for &seed in &cfg.seeds {
        item.push(run_item(&cfg, seed).unwrap().metrics.unwrap().api);
        base.push(
            run_random_baseline(&cfg, seed)
                .unwrap()
                .metrics
                .unwrap()
                .api,
        );
    }
    let (item, base) = (median(item), median(base));
    assert!(base < item, "baseline median api {base} vs item {item}");
}

#[test]
fn tiny_budget_still_completes() {
    let mut cfg = RunConfig::preset("smoke").unwrap();
    cfg.budget = Budget::Fixed { samples: 20 };
    let report = run_item(&cfg, 1).unwrap();
    assert_eq!(report.n_samples(), 20);
    assert!(report.status.is_complete());
}

/// Late samples concentrate near the modes. Measured 30-40% of the last 200
/// samples within distance 4, since the search keeps spending on coverage
/// and boundary leaves.
#[test]
#[ignore = "concentration target not reached; see the README"]
fn late_samples_concentrate_near_modes() {
    let centers = gaussian_2d().modality_centers();
    let report = run_item(&with_budget(900), 7).unwrap();
    let tail = &report.records[report.n_samples() - 200..];
    let near = tail
        .iter()
        .filter(|r| centers.iter().any(|c| dist(r.point.coords(), c) <= 4.0))
        .count();
    assert!(
        near >= 190,
        "{near}/200 of the last samples within 4 of a mode"
    );
}

/// Uniform Monte Carlo estimate of the 4-d hazardous fraction, checked
/// against the four analytic balls.
#[test]
fn four_d_hazard_fraction_by_monte_carlo() {
    let objective = GaussianObjective::standard(4).unwrap();
    let space = objective.space();
    let r = objective.spec().hazard_radius(space.hazard_threshold());
    let ball = std::f64::consts::PI.powi(2) / 2.0 * r.powi(4);
    let analytic = 4.0 * ball / space.volume();

    let n = 100_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0u64;
    let mut p = [0.0; 4];
    for _ in 0..n {
        for x in &mut p {
            *x = rng.gen_range(-20.0..20.0);
        }
        if space.is_hazardous(objective.evaluate(&p).unwrap()) {
            hits += 1;
        }
    }
    let measured = hits as f64 / n as f64;
    println!(
        "4-d hazardous fraction: measured {measured:.4e}, analytic {analytic:.4e}, stated 4.15e-5"
    );
    assert!((measured - analytic).abs() <= 0.05 * analytic);
}
