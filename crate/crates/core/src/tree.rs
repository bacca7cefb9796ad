//! Recursive axis-aligned partition of the search space.
//!
//! Each split first labels the node's samples good or bad by an exact 1-D
//! two-means clustering of their risk values, then picks the single axis cut
//! with the largest Gini impurity decrease on those labels. Cuts are axis-aligned so every node
//! region stays a box. The tree is rebuilt from scratch whenever the sample
//! set, densities or losses change.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::acquisition::{boundary_value, is_boundary};
use crate::density::density_weights;
use crate::error::{Error, Result};
use crate::space::{HazardBox, SampleRecord, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Minimum number of samples in each child of a split.
    pub leaf_min: usize,
    /// Fraction of node samples the chosen cut must classify correctly when
    /// each side predicts its majority label. `0` disables the check.
    pub min_split_accuracy: f64,
}

impl TreeConfig {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            leaf_min: 20 * dim,
            min_split_accuracy: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub dim: usize,
    pub threshold: f64,
}

impl SplitRule {
    /// Points with `x[dim] <= threshold` go to the first child.
    pub fn goes_left(&self, p: &[f64]) -> bool {
        p[self.dim] <= self.threshold
    }
}

/// Density-weighted statistics of a node's samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub v_exploit: f64,
    pub mean_density: f64,
    pub mean_loss: f64,
    pub boundary: bool,
    pub v_boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// `[x <= t side, x > t side]` for internal nodes.
    pub children: Option<[usize; 2]>,
    pub depth: usize,
    pub region: HazardBox,
    /// Positions of member samples in the record slice the tree was built on.
    pub members: Vec<usize>,
    pub stats: NodeStats,
    pub split: Option<SplitRule>,
    /// The child with the higher mean risk.
    pub good_child: Option<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// Outcome of a successful split.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub rule: SplitRule,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub accuracy: f64,
    /// True when the left child holds the higher mean risk.
    pub left_is_good: bool,
}

/// Weighted statistics over the members of a node:
/// `V = sum w f`, `rho = sum w rho`, `eps = sum w e` with inverse-density
/// weights.
pub fn node_stats(members: &[usize], records: &[SampleRecord]) -> Result<(f64, f64, f64)> {
    if members.is_empty() {
        return Err(Error::Empty("statistics of an empty node"));
    }
    let densities: Vec<f64> = members.iter().map(|&i| records[i].density).collect();
    let w = density_weights(&densities)?;
    let (mut v, mut rho, mut eps) = (0.0, 0.0, 0.0);
    for (&i, wi) in members.iter().zip(w) {
        let r = &records[i];
        v += wi * r.risk;
        rho += wi * r.density;
        eps += wi * r.loss;
    }
    Ok((v, rho, eps))
}

/// Exact 1-D two-means on risk values. Returns the smallest risk of the high
/// cluster, or `None` when all risks are equal.
fn two_means_cut(risks: &mut [f64]) -> Option<f64> {
    risks.sort_by(f64::total_cmp);
    let n = risks.len();
    if n < 2 || risks[0] == risks[n - 1] {
        return None;
    }
    let mean = risks.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = risks.iter().map(|r| r - mean).collect();
    let total: f64 = centered.iter().sum();
    let total_sq: f64 = centered.iter().map(|x| x * x).sum();
    let (mut s, mut sq) = (0.0, 0.0);
    let mut best: Option<(f64, usize)> = None;
    for m in 1..n {
        s += centered[m - 1];
        sq += centered[m - 1] * centered[m - 1];
        if risks[m - 1] == risks[m] {
            continue;
        }
        let (nl, nr) = (m as f64, (n - m) as f64);
        let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s).powi(2) / nr);
        if best.map_or(true, |(b, _)| sse < b) {
            best = Some((sse, m));
        }
    }
    best.map(|(_, m)| risks[m])
}

/// Decrease in size-weighted Gini impurity from cutting a node, per sample.
fn gini_gain(good_left: usize, bad_left: usize, n_good: usize, n_bad: usize) -> f64 {
    let impurity = |g: usize, b: usize| {
        let n = (g + b) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p = g as f64 / n;
        n * 2.0 * p * (1.0 - p)
    };
    let n = (n_good + n_bad) as f64;
    (impurity(n_good, n_bad)
        - impurity(good_left, bad_left)
        - impurity(n_good - good_left, n_bad - bad_left))
        / n
}

/// Tries to split a node's samples along one axis.
///
/// Returns `None` when the risks are indistinguishable, the node is too small
/// for two children of `leaf_min`, no cut reduces label impurity, or the best
/// cut misses the minimum accuracy.
pub fn split_node(
    members: &[usize],
    records: &[SampleRecord],
    region: &HazardBox,
    config: &TreeConfig,
) -> Option<Split> {
    let n = members.len();
    let leaf_min = config.leaf_min.max(1);
    if n < 2 * leaf_min {
        return None;
    }
    let mut risks: Vec<f64> = members.iter().map(|&i| records[i].risk).collect();
    let high_from = two_means_cut(&mut risks)?;
    let good: Vec<bool> = members
        .iter()
        .map(|&i| records[i].risk >= high_from)
        .collect();
    let n_good = good.iter().filter(|&&g| g).count();
    let n_bad = n - n_good;

    // Within an axis: largest gain, then most balanced. Across axes: largest
    // gain, then widest region extent, then lowest index.
    struct Candidate {
        dim: usize,
        pos: usize,
        gain: f64,
        good_left: usize,
        threshold: f64,
        order: Vec<usize>,
    }
    let mut best: Option<Candidate> = None;

    for d in 0..region.dim() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            records[members[a]].point[d]
                .total_cmp(&records[members[b]].point[d])
                .then(a.cmp(&b))
        });
        let coords: Vec<f64> = order
            .iter()
            .map(|&k| records[members[k]].point[d])
            .collect();
        let mut good_left = 0;
        let mut axis_best: Option<(f64, usize, usize, usize, f64)> = None;
        for i in 1..n {
            if good[order[i - 1]] {
                good_left += 1;
            }
            if i < leaf_min || n - i < leaf_min || coords[i - 1] >= coords[i] {
                continue;
            }
            let t = 0.5 * (coords[i - 1] + coords[i]);
            if !(coords[i - 1] <= t && t < coords[i]) {
                continue;
            }
            let gain = gini_gain(good_left, i - good_left, n_good, n_bad);
            let imbalance = (2 * i).abs_diff(n);
            let better = match axis_best {
                None => true,
                Some((g, imb, ..)) => gain > g || (gain == g && imbalance < imb),
            };
            if better {
                axis_best = Some((gain, imbalance, i, good_left, t));
            }
        }
        if let Some((gain, _, pos, good_left, threshold)) = axis_best {
            let better = match &best {
                None => true,
                Some(b) => {
                    gain > b.gain || (gain == b.gain && region.width(d) > region.width(b.dim))
                }
            };
            if better {
                best = Some(Candidate {
                    dim: d,
                    pos,
                    gain,
                    good_left,
                    threshold,
                    order,
                });
            }
        }
    }

    let best = best?;
    // Each side predicts its majority label.
    let bad_left = best.pos - best.good_left;
    let correct = best.good_left.max(bad_left) + (n_good - best.good_left).max(n_bad - bad_left);
    let accuracy = correct as f64 / n as f64;
    if best.gain <= 0.0 || accuracy < config.min_split_accuracy {
        return None;
    }
    let mut left: Vec<usize> = best.order[..best.pos].iter().map(|&k| members[k]).collect();
    let mut right: Vec<usize> = best.order[best.pos..].iter().map(|&k| members[k]).collect();
    left.sort_unstable();
    right.sort_unstable();
    let mean = |v: &[usize]| v.iter().map(|&i| records[i].risk).sum::<f64>() / v.len() as f64;
    let left_is_good = mean(&left) >= mean(&right);
    Some(Split {
        rule: SplitRule {
            dim: best.dim,
            threshold: best.threshold,
        },
        left,
        right,
        accuracy,
        left_is_good,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub config: TreeConfig,
    pub nodes: Vec<TreeNode>,
}

impl PartitionTree {
    /// Builds the tree over all of `records` by recursive [`split_node`].
    /// Node ids follow breadth-first creation order; the root is 0.
    pub fn build(
        records: &[SampleRecord],
        space: &SearchSpace,
        config: TreeConfig,
    ) -> Result<Self> {
        let f_b = space.hazard_threshold();
        let (f_low, f_up) = space.metric_bounds();
        let mut nodes: Vec<TreeNode> = Vec::new();
        nodes.push(TreeNode {
            id: 0,
            parent: None,
            children: None,
            depth: 0,
            region: space.as_box(),
            members: (0..records.len()).collect(),
            stats: NodeStats::default(),
            split: None,
            good_child: None,
        });

        let mut queue = VecDeque::from([0usize]);
        while let Some(id) = queue.pop_front() {
            if !nodes[id].members.is_empty() {
                let (v, rho, eps) = node_stats(&nodes[id].members, records)?;
                let risks: Vec<f64> = nodes[id].members.iter().map(|&i| records[i].risk).collect();
                let boundary = is_boundary(&risks, f_b);
                let v_boundary = if boundary {
                    boundary_value(&risks, f_b, f_low, f_up)?
                } else {
                    0.0
                };
                nodes[id].stats = NodeStats {
                    v_exploit: v,
                    mean_density: rho,
                    mean_loss: eps,
                    boundary,
                    v_boundary,
                };
            }
            let Some(split) = split_node(&nodes[id].members, records, &nodes[id].region, &config)
            else {
                continue;
            };
            let (left_id, right_id) = (nodes.len(), nodes.len() + 1);
            let mut left_region = nodes[id].region.clone();
            let mut right_region = nodes[id].region.clone();
            left_region.upper[split.rule.dim] = split.rule.threshold;
            right_region.lower[split.rule.dim] = split.rule.threshold;
            left_region.member_count = split.left.len();
            right_region.member_count = split.right.len();
            let depth = nodes[id].depth + 1;
            for (child_id, region, members) in [
                (left_id, left_region, split.left),
                (right_id, right_region, split.right),
            ] {
                nodes.push(TreeNode {
                    id: child_id,
                    parent: Some(id),
                    children: None,
                    depth,
                    region,
                    members,
                    stats: NodeStats::default(),
                    split: None,
                    good_child: None,
                });
                queue.push_back(child_id);
            }
            let node = &mut nodes[id];
            node.children = Some([left_id, right_id]);
            node.split = Some(split.rule);
            node.good_child = Some(if split.left_is_good {
                left_id
            } else {
                right_id
            });
        }
        Ok(Self { config, nodes })
    }

    /// A root-only tree over all of `records`.
    pub fn single_node(records: &[SampleRecord], space: &SearchSpace) -> Result<Self> {
        let config = TreeConfig {
            leaf_min: records.len() + 1,
            min_split_accuracy: 1.0,
        };
        Self::build(records, space, config)
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    /// Leaf reached by following split rules from the root.
    pub fn leaf_of(&self, p: &[f64]) -> usize {
        let mut id = 0;
        while let (Some([l, r]), Some(rule)) = (self.nodes[id].children, self.nodes[id].split) {
            id = if rule.goes_left(p) { l } else { r };
        }
        id
    }

    /// Leaf id for every record position.
    pub fn leaf_assignment(&self, n_records: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n_records];
        for leaf in self.leaves() {
            for &i in &leaf.members {
                out[i] = leaf.id;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn space1() -> SearchSpace {
        SearchSpace::new(vec![0.0], vec![10.0], 0.8, (0.0, 1.0)).unwrap()
    }

    fn recs_1d(items: &[(f64, f64)], s: &SearchSpace) -> Vec<SampleRecord> {
        items
            .iter()
            .enumerate()
            .map(|(i, &(x, f))| SampleRecord::new(vec![x].into(), f, s, i))
            .collect()
    }

    #[test]
    fn stats_examples() {
        let s = space1();
        let r = recs_1d(&[(1.0, 0.9), (2.0, 0.1)], &s);
        let (v, rho, _) = node_stats(&[0, 1], &r).unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-15);
        assert_relative_eq!(rho, 1.0, epsilon = 1e-15);

        let mut one = recs_1d(&[(3.0, 0.7)], &s);
        one[0].density = 2.5;
        one[0].loss = 0.3;
        assert_eq!(node_stats(&[0], &one).unwrap(), (0.7, 2.5, 0.3));

        let mut varied = recs_1d(&[(1.0, 0.9), (2.0, 0.1), (3.0, 0.4)], &s);
        for (r, d) in varied.iter_mut().zip([1.0, 3.0, 0.5]) {
            r.density = d;
        }
        let (v1, _, _) = node_stats(&[0, 1, 2], &varied).unwrap();
        for r in varied.iter_mut() {
            r.density *= 2.0;
        }
        let (v2, _, _) = node_stats(&[0, 1, 2], &varied).unwrap();
        assert_relative_eq!(v1, v2, max_relative = 1e-14);
        assert!(node_stats(&[], &varied).is_err());
    }

    #[test]
    fn two_clusters_split_between() {
        let s = space1();
        let mut items = vec![(1.0, 0.9); 5];
        items.extend(vec![(9.0, 0.1); 5]);
        let r = recs_1d(&items, &s);
        let cfg = TreeConfig {
            leaf_min: 3,
            min_split_accuracy: 0.7,
        };
        let split = split_node(&(0..10).collect::<Vec<_>>(), &r, &s.as_box(), &cfg).unwrap();
        assert_eq!(split.rule.dim, 0);
        assert!(split.rule.threshold > 1.0 && split.rule.threshold < 9.0);
        assert_eq!(split.left, vec![0, 1, 2, 3, 4]);
        assert!(split.left_is_good);
        assert_eq!(split.accuracy, 1.0);
    }

    #[test]
    fn degenerate_splits_are_leaves() {
        let s = space1();
        let cfg = TreeConfig {
            leaf_min: 3,
            min_split_accuracy: 0.7,
        };
        let flat = recs_1d(&(0..10).map(|i| (i as f64, 0.4)).collect::<Vec<_>>(), &s);
        assert!(split_node(&(0..10).collect::<Vec<_>>(), &flat, &s.as_box(), &cfg).is_none());
        let few = recs_1d(&[(1.0, 0.9), (2.0, 0.9), (8.0, 0.1), (9.0, 0.1)], &s);
        assert!(split_node(&[0, 1, 2, 3], &few, &s.as_box(), &cfg).is_none());
        let five = recs_1d(
            &[(1.0, 0.9), (2.0, 0.9), (5.0, 0.5), (8.0, 0.1), (9.0, 0.1)],
            &s,
        );
        let t = PartitionTree::build(&five, &s, cfg).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn interleaved_labels_fail_accuracy() {
        let s = space1();
        let items: Vec<(f64, f64)> = (0..20)
            .map(|i| (i as f64 * 0.5, if i % 2 == 0 { 0.9 } else { 0.1 }))
            .collect();
        let r = recs_1d(&items, &s);
        let cfg = TreeConfig {
            leaf_min: 3,
            min_split_accuracy: 0.7,
        };
        assert!(split_node(&(0..20).collect::<Vec<_>>(), &r, &s.as_box(), &cfg).is_none());
    }

    #[test]
    fn gini_gain_examples() {
        // perfect separation of a 5/5 node removes all impurity: 2 * 0.5 * 0.5
        assert_relative_eq!(gini_gain(5, 0, 5, 5), 0.5, epsilon = 1e-15);
        // a cut that keeps both sides at the parent's mix gains nothing
        assert_relative_eq!(gini_gain(2, 2, 5, 5), 0.0, epsilon = 1e-15);
        // 3 good / 1 bad left, 2 good / 4 bad right of a 5/5 node
        let parent = 10.0 * 0.5;
        let left = 4.0 * 2.0 * 0.75 * 0.25;
        let right = 6.0 * 2.0 * (2.0 / 6.0) * (4.0 / 6.0);
        assert_relative_eq!(
            gini_gain(3, 1, 5, 5),
            (parent - left - right) / 10.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn two_separate_hot_spots_still_split() {
        // hot ends, cold middle: no single cut isolates the good label
        let s = space1();
        let mut items: Vec<(f64, f64)> = (0..6).map(|i| (0.2 + 0.1 * i as f64, 0.9)).collect();
        items.extend((0..12).map(|i| (3.0 + 0.3 * i as f64, 0.1)));
        items.extend((0..6).map(|i| (9.2 + 0.1 * i as f64, 0.9)));
        let r = recs_1d(&items, &s);
        let t = PartitionTree::build(
            &r,
            &s,
            TreeConfig {
                leaf_min: 3,
                ..TreeConfig::for_dim(1)
            },
        )
        .unwrap();
        let pure = t.leaves().all(|l| {
            let hot = l.members.iter().filter(|&&i| r[i].risk > 0.5).count();
            hot == 0 || hot == l.members.len()
        });
        assert!(
            pure,
            "{:?}",
            t.leaves().map(|l| &l.members).collect::<Vec<_>>()
        );
    }

    fn arb_records() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-5.0f64..5.0, 0.0f64..3.0, 0.0f64..1.0), 0..150)
    }

    fn build_2d(items: &[(f64, f64, f64)]) -> (Vec<SampleRecord>, SearchSpace, PartitionTree) {
        let s = SearchSpace::new(vec![-5.0, 0.0], vec![5.0, 3.0], 0.8, (0.0, 1.0)).unwrap();
        let recs: Vec<SampleRecord> = items
            .iter()
            .enumerate()
            .map(|(i, &(x, y, f))| {
                // smooth risk so splits actually happen, plus the random part
                let risk = 0.5 * f + 0.5 * (x + 5.0) / 10.0;
                SampleRecord::new(vec![x, y].into(), risk, &s, i)
            })
            .collect();
        let t = PartitionTree::build(&recs, &s, TreeConfig::for_dim(2)).unwrap();
        (recs, s, t)
    }

    proptest! {
        #[test]
        fn leaves_tile_space(items in arb_records()) {
            let (_, s, t) = build_2d(&items);
            let total: f64 = t.leaves().map(|l| l.region.volume()).sum();
            prop_assert!((total - s.volume()).abs() <= 1e-6 * s.volume());
            for n in &t.nodes {
                if let Some([l, r]) = n.children {
                    let (a, b) = (&t.nodes[l].region, &t.nodes[r].region);
                    prop_assert!(a.intersection_volume(b).unwrap() == 0.0);
                    prop_assert!((a.volume() + b.volume() - n.region.volume()).abs() <= 1e-9 * n.region.volume().max(1.0));
                }
            }
        }

        #[test]
        fn affiliation_consistent(items in arb_records()) {
            let (recs, _, t) = build_2d(&items);
            let assign = t.leaf_assignment(recs.len());
            for (i, r) in recs.iter().enumerate() {
                let leaf = t.leaf_of(&r.point);
                prop_assert_eq!(leaf, assign[i]);
                prop_assert!(t.node(leaf).region.contains(&r.point).unwrap());
            }
            let mut counted = 0;
            for l in t.leaves() {
                counted += l.members.len();
            }
            prop_assert_eq!(counted, recs.len());
        }

        #[test]
        fn good_child_has_higher_mean_risk(items in arb_records()) {
            let (recs, _, t) = build_2d(&items);
            let mean = |id: usize| {
                let m = &t.node(id).members;
                m.iter().map(|&i| recs[i].risk).sum::<f64>() / m.len() as f64
            };
            for n in &t.nodes {
                if let (Some([l, r]), Some(g)) = (n.children, n.good_child) {
                    let other = if g == l { r } else { l };
                    prop_assert!(mean(g) >= mean(other));
                    prop_assert!(t.node(l).members.len() >= t.config.leaf_min);
                    prop_assert!(t.node(r).members.len() >= t.config.leaf_min);
                }
            }
        }
    }

    #[test]
    fn rebuild_is_deterministic() {
        let items: Vec<(f64, f64, f64)> = (0..200)
            .map(|i| {
                let x = ((i * 7919) % 1000) as f64 / 100.0 - 5.0;
                let y = ((i * 104729) % 300) as f64 / 100.0;
                (x, y, ((i * 31) % 17) as f64 / 17.0)
            })
            .collect();
        let (_, _, a) = build_2d(&items);
        let (_, _, b) = build_2d(&items);
        assert_eq!(a, b);
        assert!(a.len() > 1);
    }
}
