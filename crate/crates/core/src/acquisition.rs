//! Upper-confidence selection over the partition tree.
//!
//! A child's score is `V * E_eps + c_p * E_rho`:
//!
//! * `V = G(N(V_exploit + V_boundary))`, where the boundary bonus only applies
//!   in improved mode, to boundary subspaces, and survives random dropout
//!   with probability `1 - P_drop`;
//! * `E_eps = G(N(eps_child / eps_parent))`, or 1 without a behavior model;
//! * `E_rho = ln(rho_parent / rho_child)`.
//!
//! `N` normalizes against the sibling pair, `G(x) = 1 / (1 - log10 x)`
//! lifts small values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::HazardBox;
use crate::tree::PartitionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UcbMode {
    Improved,
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbConfig {
    pub c_p: f64,
    /// Sample count at which boundary dropout switches off.
    pub dropout_k: usize,
    pub mode: UcbMode,
    pub batch_size: usize,
}

impl UcbConfig {
    /// `c_p = 0.3`, `k = 0.4 * budget`, `B = 10`, improved mode.
    pub fn for_budget(budget: usize) -> Self {
        Self {
            c_p: 0.3,
            dropout_k: ((0.4 * budget as f64).round() as usize).max(1),
            mode: UcbMode::Improved,
            batch_size: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_p >= 0.0 && self.c_p.is_finite()) {
            return Err(Error::Config(format!("c_p must be >= 0, got {}", self.c_p)));
        }
        if self.dropout_k == 0 {
            return Err(Error::Config("dropout_k must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// A subspace is on a hazard boundary when it holds risks strictly on both
/// sides of the threshold.
pub fn is_boundary(risks: &[f64], f_b: f64) -> bool {
    let max = risks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    max > f_b && min < f_b
}

/// Mean of `sqrt(sin(.))` of the normalized distances from the threshold of
/// the closest risk above it and the closest risk below it.
pub fn boundary_value(risks: &[f64], f_b: f64, f_low: f64, f_up: f64) -> Result<f64> {
    if !is_boundary(risks, f_b) {
        return Err(Error::NotBoundary);
    }
    let min_above = risks
        .iter()
        .copied()
        .filter(|&r| r > f_b)
        .fold(f64::INFINITY, f64::min);
    let max_below = risks
        .iter()
        .copied()
        .filter(|&r| r < f_b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(boundary_terms(min_above, max_below, f_b, f_low, f_up))
}

pub(crate) fn boundary_terms(
    min_above: f64,
    max_below: f64,
    f_b: f64,
    f_low: f64,
    f_up: f64,
) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let above = if f_up > f_b {
        ((min_above - f_b) / (f_up - f_b)).clamp(0.0, 1.0) * half_pi
    } else {
        0.0
    };
    let below = if f_b > f_low {
        ((f_b - max_below) / (f_b - f_low)).clamp(0.0, 1.0) * half_pi
    } else {
        0.0
    };
    0.5 * (above.sin().sqrt() + below.sin().sqrt())
}

/// Probability that a boundary bonus is switched off after `n_sampled`
/// samples: `1 - n/k` below `k`, then 0.
pub fn dropout_prob(n_sampled: usize, k: usize) -> f64 {
    if n_sampled < k {
        1.0 - n_sampled as f64 / k as f64
    } else {
        0.0
    }
}

/// `(x - x_low) / (max(all) - x_low)`, or 0 when every candidate sits at
/// `x_low`.
pub fn normalize(x: f64, all: &[f64], x_low: f64) -> f64 {
    let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > x_low) {
        return 0.0;
    }
    ((x - x_low) / (max - x_low)).clamp(0.0, 1.0)
}

/// `1 / (1 - log10 x)` on `(0, 1]`, with `G(0) = 0`.
pub fn convex_g(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!(
            "G is defined on [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        Ok(0.0)
    } else {
        Ok(1.0 / (1.0 - x.log10()))
    }
}

/// Score breakdown for one child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChildScore {
    pub node: usize,
    pub boundary: bool,
    /// Whether the boundary bonus was dropped this pass (`None` when no
    /// bonus applied).
    pub dropped: Option<bool>,
    pub exploit_term: f64,
    pub loss_term: f64,
    pub density_term: f64,
    pub score: f64,
}

/// Per-pass inputs shared by every scored node.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext {
    pub n_sampled: usize,
    pub use_loss: bool,
    pub f_low: f64,
}

/// Scores both children of an internal node. Draws one uniform variate per
/// boundary child in improved mode.
pub fn score_children<R: Rng + ?Sized>(
    tree: &PartitionTree,
    parent: usize,
    config: &UcbConfig,
    ctx: &ScoringContext,
    rng: &mut R,
) -> Result<[ChildScore; 2]> {
    let p = tree.node(parent);
    let [l, r] = p
        .children
        .ok_or_else(|| Error::InvalidArgument(format!("node {parent} is a leaf")))?;
    let kids = [tree.node(l), tree.node(r)];

    let mut dropped = [None, None];
    let mut values = [0.0; 2];
    for (c, node) in kids.iter().enumerate() {
        values[c] = node.stats.v_exploit;
        if config.mode == UcbMode::Improved && node.stats.boundary {
            let drop = rng.gen::<f64>() < dropout_prob(ctx.n_sampled, config.dropout_k);
            dropped[c] = Some(drop);
            if !drop {
                values[c] += node.stats.v_boundary;
            }
        }
    }

    let ratios = kids.map(|n| {
        if p.stats.mean_loss == 0.0 {
            1.0
        } else {
            n.stats.mean_loss / p.stats.mean_loss
        }
    });

    let mut out = [ChildScore {
        node: l,
        boundary: false,
        dropped: None,
        exploit_term: 0.0,
        loss_term: 0.0,
        density_term: 0.0,
        score: 0.0,
    }; 2];
    for c in 0..2 {
        let exploit_term = convex_g(normalize(values[c], &values, ctx.f_low))?;
        let loss_term = if ctx.use_loss {
            convex_g(normalize(ratios[c], &ratios, 0.0))?
        } else {
            1.0
        };
        let density_term = (p.stats.mean_density / kids[c].stats.mean_density).ln();
        out[c] = ChildScore {
            node: kids[c].id,
            boundary: kids[c].stats.boundary,
            dropped: dropped[c],
            exploit_term,
            loss_term,
            density_term,
            score: exploit_term * loss_term + config.c_p * density_term,
        };
    }
    Ok(out)
}

/// Root-to-leaf descent result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub leaf: usize,
    pub path: Vec<[ChildScore; 2]>,
}

/// Descends from the root, taking the higher-scoring child at each internal
/// node; equal scores take the lower id.
pub fn select_leaf<R: Rng + ?Sized>(
    tree: &PartitionTree,
    config: &UcbConfig,
    ctx: &ScoringContext,
    rng: &mut R,
) -> Result<Selection> {
    let mut id = 0;
    let mut path = Vec::new();
    while !tree.node(id).is_leaf() {
        let scored = score_children(tree, id, config, ctx, rng)?;
        id = pick(&scored);
        path.push(scored);
    }
    Ok(Selection { leaf: id, path })
}

fn pick(scored: &[ChildScore; 2]) -> usize {
    let [a, b] = scored;
    match b.score.total_cmp(&a.score) {
        std::cmp::Ordering::Greater => b.node,
        std::cmp::Ordering::Less => a.node,
        std::cmp::Ordering::Equal => a.node.min(b.node),
    }
}

/// `count` points uniform in `region`.
pub fn sample_in_leaf<R: Rng + ?Sized>(
    region: &HazardBox,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            (0..region.dim())
                .map(|d| region.lower[d] + rng.gen::<f64>() * region.width(d))
                .collect()
        })
        .collect()
}
