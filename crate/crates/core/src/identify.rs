//! Hazardous-domain identification from a finished partition tree.
//!
//! 1. keep the hazardous records of each leaf;
//! 2. approximate each leaf's hazardous records by their bounding box;
//! 3. walk the tree bottom-up, replacing sibling pairs that both carry a box
//!    by their hull at the parent;
//! 4. merge boxes whose interiors intersect until none do.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{HazardBox, SampleRecord};
use crate::tree::PartitionTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeKind {
    Sibling,
    Overlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub kind: MergeKind,
    /// Parent node for sibling merges.
    pub node: Option<usize>,
    /// Source leaves on each side of the merge.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedDomain {
    #[serde(rename = "box")]
    pub bounds: HazardBox,
    /// Leaf ids whose hazardous records built this domain, ascending.
    pub source_leaves: Vec<usize>,
    /// Record positions of the contributing hazardous records, ascending.
    pub members: Vec<usize>,
    pub lineage: Vec<MergeEvent>,
}

impl IdentifiedDomain {
    fn merge(
        mut self,
        other: IdentifiedDomain,
        kind: MergeKind,
        node: Option<usize>,
    ) -> Result<Self> {
        let bounds = self.bounds.hull(&other.bounds)?;
        self.lineage.push(MergeEvent {
            kind,
            node,
            left: self.source_leaves.clone(),
            right: other.source_leaves.clone(),
        });
        self.lineage.extend(other.lineage);
        self.source_leaves.extend(other.source_leaves);
        self.source_leaves.sort_unstable();
        self.members.extend(other.members);
        self.members.sort_unstable();
        self.bounds = bounds;
        Ok(self)
    }
}

/// Hazardous record positions per leaf; leaves without any are omitted.
pub fn select_hazardous(
    tree: &PartitionTree,
    records: &[SampleRecord],
) -> BTreeMap<usize, Vec<usize>> {
    tree.leaves()
        .filter_map(|leaf| {
            let hot: Vec<usize> = leaf
                .members
                .iter()
                .copied()
                .filter(|&i| records[i].hazardous)
                .collect();
            (!hot.is_empty()).then_some((leaf.id, hot))
        })
        .collect()
}

/// Per-dimension min/max of the given records.
pub fn approx_box(records: &[SampleRecord], positions: &[usize]) -> Result<HazardBox> {
    HazardBox::bounding(positions.iter().map(|&i| records[i].point.coords()))
}

/// Leaf boxes for every leaf holding hazardous records.
pub fn leaf_domains(
    tree: &PartitionTree,
    records: &[SampleRecord],
) -> Result<BTreeMap<usize, IdentifiedDomain>> {
    let mut out = BTreeMap::new();
    for (leaf, members) in select_hazardous(tree, records) {
        let raw = approx_box(records, &members)?;
        let region = &tree.node(leaf).region;
        let bounds = raw.clipped_to(region).ok_or_else(|| {
            Error::InvalidBox(format!(
                "hazardous records of leaf {leaf} lie outside its region"
            ))
        })?;
        debug_assert_eq!(bounds, raw);
        out.insert(
            leaf,
            IdentifiedDomain {
                bounds,
                source_leaves: vec![leaf],
                members,
                lineage: Vec::new(),
            },
        );
    }
    Ok(out)
}

/// Bottom-up sibling merging. A node receives the hull of its children's
/// boxes only when both children carry one; a box whose sibling carries none
/// is final and moves no further up.
pub fn merge_siblings(
    tree: &PartitionTree,
    mut carried: BTreeMap<usize, IdentifiedDomain>,
) -> Result<Vec<IdentifiedDomain>> {
    let mut finals = Vec::new();
    // children always have larger ids than their parent
    for node in tree.nodes.iter().rev() {
        let Some([l, r]) = node.children else {
            continue;
        };
        match (carried.remove(&l), carried.remove(&r)) {
            (Some(a), Some(b)) => {
                carried.insert(node.id, a.merge(b, MergeKind::Sibling, Some(node.id))?);
            }
            (Some(a), None) | (None, Some(a)) => finals.push(a),
            (None, None) => {}
        }
    }
    finals.extend(carried.into_values());
    finals.sort_by_key(|d| d.source_leaves[0]);
    Ok(finals)
}

/// Merges the lowest-index pair with interior overlap until no pair
/// overlaps.
pub fn merge_overlapping(mut domains: Vec<IdentifiedDomain>) -> Result<Vec<IdentifiedDomain>> {
    'outer: loop {
        for i in 0..domains.len() {
            for j in i + 1..domains.len() {
                if domains[i].bounds.overlaps(&domains[j].bounds) {
                    let b = domains.remove(j);
                    let a = domains.remove(i);
                    domains.insert(i, a.merge(b, MergeKind::Overlap, None)?);
                    continue 'outer;
                }
            }
        }
        return Ok(domains);
    }
}

pub fn identify_domains(
    tree: &PartitionTree,
    records: &[SampleRecord],
) -> Result<Vec<IdentifiedDomain>> {
    let leaves = leaf_domains(tree, records)?;
    merge_overlapping(merge_siblings(tree, leaves)?)
}
