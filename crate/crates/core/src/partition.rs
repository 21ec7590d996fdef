//! The per-step adaptive partition: a tree of dyadic cells whose leaves tile
//! the state-action box. Only leaves are ever selected, so the leaves are the
//! active regions and `leaf_count` is the size of the partition.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{distance, split_region, state_slice_nonempty, BoxRegion, Point, SpaceDescriptor};

/// Arena index of a node within one [`StepPartition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
pub struct BallNode {
    region: BoxRegion,
    q_hat: f64,
    visits: u64,
    inherited_visits: u64,
    children: Vec<NodeId>,
    parent: Option<NodeId>,
    creation_index: usize,
    created_episode: u64,
}

impl BallNode {
    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    /// Upper-confidence estimate of Q over the cell.
    pub fn q_hat(&self) -> f64 {
        self.q_hat
    }

    /// Times this node or any ancestor was selected.
    pub fn visits(&self) -> u64 {
        self.visits
    }

    /// Visits carried over from the parent when this node was created.
    pub fn inherited_visits(&self) -> u64 {
        self.inherited_visits
    }

    /// Visits accumulated while this node itself was a leaf.
    pub fn own_visits(&self) -> u64 {
        self.visits - self.inherited_visits
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn creation_index(&self) -> usize {
        self.creation_index
    }

    pub fn created_episode(&self) -> u64 {
        self.created_episode
    }

    pub fn radius(&self) -> f64 {
        self.region.radius()
    }
}

/// Split threshold: a leaf is refined once `visits >= (d_max / r)^2`.
pub fn should_split(node: &BallNode, d_max: f64) -> bool {
    node.is_leaf() && node.visits as f64 >= split_threshold(d_max, node.radius())
}

pub fn split_threshold(d_max: f64, radius: f64) -> f64 {
    (d_max / radius).powi(2)
}

/// One refinement of a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvent {
    /// 1-based step of the tree that was refined.
    pub step: usize,
    /// 1-based episode during which the split happened.
    pub episode: u64,
    pub node: NodeId,
    pub depth: u32,
    pub visits: u64,
}

/// Adaptive partition for one step `h` of the episode.
#[derive(Debug, Clone)]
pub struct StepPartition {
    step: usize,
    space: SpaceDescriptor,
    nodes: Vec<BallNode>,
    leaf_count: usize,
}

impl StepPartition {
    /// A single root cell covering the whole space with estimate `initial_q`.
    pub fn new(step: usize, space: SpaceDescriptor, initial_q: f64) -> Self {
        let root = BallNode {
            region: space.root(),
            q_hat: initial_q,
            visits: 0,
            inherited_visits: 0,
            children: Vec::new(),
            parent: None,
            creation_index: 0,
            created_episode: 0,
        };
        StepPartition {
            step,
            space,
            nodes: vec![root],
            leaf_count: 1,
        }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub const ROOT: NodeId = NodeId(0);

    pub fn root(&self) -> &BallNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &BallNode {
        &self.nodes[id.0]
    }

    pub fn get(&self, id: NodeId) -> Option<&BallNode> {
        self.nodes.get(id.0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &BallNode)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    /// Leaves reachable from the root, in depth-first order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.leaf_count);
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            let node = self.node(id);
            if node.is_leaf() {
                out.push(id);
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    /// Leaves whose state projection contains `x`.
    pub fn relevant_leaves(&self, x: &[f64]) -> Vec<NodeId> {
        let mut out = Vec::new();
        self.descend(x, |id, _| out.push(id));
        out
    }

    /// Walks only the branches whose state slice contains `x`, calling
    /// `visit` on every relevant leaf.
    fn descend<'a>(&'a self, x: &[f64], mut visit: impl FnMut(NodeId, &'a BallNode)) {
        if !state_slice_nonempty(&self.root().region, x) {
            return;
        }
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            let node = self.node(id);
            if node.is_leaf() {
                visit(id, node);
                continue;
            }
            for &c in node.children.iter().rev() {
                if state_slice_nonempty(&self.node(c).region, x) {
                    stack.push(c);
                }
            }
        }
    }

    /// The relevant leaf with the largest `q_hat`. Ties go to the smaller
    /// radius, then to the earlier-created node.
    pub fn select_ball(&self, x: &[f64]) -> Result<NodeId> {
        let mut best: Option<(NodeId, &BallNode)> = None;
        self.descend(x, |id, node| {
            let better = match best {
                None => true,
                Some((_, b)) => {
                    node.q_hat > b.q_hat
                        || (node.q_hat == b.q_hat
                            && (node.radius() < b.radius()
                                || (node.radius() == b.radius()
                                    && node.creation_index < b.creation_index)))
                }
            };
            if better {
                best = Some((id, node));
            }
        });
        best.map(|(id, _)| id)
            .ok_or_else(|| Error::InvalidInput(format!("state {x:?} is outside the state space")))
    }

    /// Largest `q_hat` over the relevant leaves of `x`.
    pub fn max_relevant_q(&self, x: &[f64]) -> Result<f64> {
        self.select_ball(x).map(|id| self.node(id).q_hat)
    }

    /// Records one more selection of leaf `id` and returns the new count.
    pub(crate) fn record_visit(&mut self, id: NodeId) -> Result<u64> {
        let node = self
            .nodes
            .get_mut(id.0)
            .ok_or_else(|| Error::Contract(format!("unknown node {}", id.0)))?;
        if !node.is_leaf() {
            return Err(Error::Contract(format!(
                "node {} was already split and can no longer be updated",
                id.0
            )));
        }
        node.visits += 1;
        Ok(node.visits)
    }

    pub(crate) fn set_q(&mut self, id: NodeId, q: f64) {
        self.nodes[id.0].q_hat = q;
    }

    /// Replaces leaf `id` by its `2^dims` dyadic children. Each child starts
    /// with its parent's `q_hat` and visit count.
    pub fn split(&mut self, id: NodeId, episode: u64) -> Result<Vec<NodeId>> {
        let parent = self
            .nodes
            .get(id.0)
            .ok_or_else(|| Error::Contract(format!("unknown node {}", id.0)))?;
        if !parent.is_leaf() {
            return Err(Error::Contract(format!("node {} is not a leaf", id.0)));
        }
        let regions = split_region(&self.space, &parent.region)?;
        let (q_hat, visits) = (parent.q_hat, parent.visits);
        let first = self.nodes.len();
        let ids: Vec<NodeId> = (first..first + regions.len()).map(NodeId).collect();
        for (i, region) in regions.into_iter().enumerate() {
            self.nodes.push(BallNode {
                region,
                q_hat,
                visits,
                inherited_visits: visits,
                children: Vec::new(),
                parent: Some(id),
                creation_index: first + i,
                created_episode: episode,
            });
        }
        self.nodes[id.0].children = ids.clone();
        self.leaf_count += ids.len() - 1;
        Ok(ids)
    }

    /// Covering, separation and structural audit of the tree.
    pub fn check_partition_invariants(&self) -> PartitionReport {
        let mut report = PartitionReport::default();
        let branching = self.space.branching() as u64;

        if self.root().region != self.space.root() {
            report
                .structure_violations
                .push("root does not cover the full space".into());
        }

        // leaves per depth; exact covering iff the counts carry up to a single root
        let mut per_depth: Vec<u64> = Vec::new();
        let mut volume = 0.0;
        let leaves = self.leaves();
        for &id in &leaves {
            let region = &self.node(id).region;
            let d = region.depth() as usize;
            if per_depth.len() <= d {
                per_depth.resize(d + 1, 0);
            }
            per_depth[d] += 1;
            volume += region.volume();
        }
        let mut exact = !per_depth.is_empty();
        for d in (1..per_depth.len()).rev() {
            if !per_depth[d].is_multiple_of(branching) {
                exact = false;
            }
            per_depth[d - 1] += per_depth[d] / branching;
        }
        exact &= per_depth.first() == Some(&1);
        report.covering_exact = exact;
        report.leaf_volume = volume;
        report.volume_deficit = 1.0 - volume;

        if leaves.len() != self.leaf_count {
            report.structure_violations.push(format!(
                "leaf_count is {} but {} leaves are reachable",
                self.leaf_count,
                leaves.len()
            ));
        }
        report.structure_violations.extend(self.audit_nesting());

        let mut by_depth: HashMap<u32, Vec<NodeId>> = HashMap::new();
        for (id, node) in self.nodes() {
            by_depth.entry(node.region.depth()).or_default().push(id);
        }
        for ids in by_depth.values() {
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    let (na, nb) = (self.node(a), self.node(b));
                    let dist = distance(na.region.center(), nb.region.center())
                        .expect("same space");
                    if dist < na.radius() {
                        report.separation_violations.push(SeparationViolation {
                            a,
                            b,
                            radius: na.radius(),
                            distance: dist,
                        });
                    }
                }
            }
        }
        report
    }

    /// Checks that the tree could only have grown by splitting leaves:
    /// every internal node has exactly its dyadic children, created after
    /// it, each inheriting the parent's final visit count.
    fn audit_nesting(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (id, node) in self.nodes() {
            if node.is_leaf() {
                continue;
            }
            if node.children.len() != self.space.branching() {
                out.push(format!(
                    "node {} has {} children, expected {}",
                    id.0,
                    node.children.len(),
                    self.space.branching()
                ));
                continue;
            }
            let expected = match split_region(&self.space, &node.region) {
                Ok(r) => r,
                Err(e) => {
                    out.push(format!("node {}: {e}", id.0));
                    continue;
                }
            };
            for (&c, region) in node.children.iter().zip(&expected) {
                let child = self.node(c);
                if &child.region != region {
                    out.push(format!("child {} of {} is not a dyadic sub-cell", c.0, id.0));
                }
                if child.parent != Some(id) {
                    out.push(format!("child {} does not point back to {}", c.0, id.0));
                }
                if child.creation_index <= node.creation_index {
                    out.push(format!("child {} predates its parent {}", c.0, id.0));
                }
                if child.inherited_visits != node.visits {
                    out.push(format!(
                        "child {} inherited {} visits but parent {} split at {}",
                        c.0, child.inherited_visits, id.0, node.visits
                    ));
                }
            }
        }
        out
    }

    /// Visit-count bounds implied by the split rule.
    pub fn check_visit_bounds(&self) -> VisitReport {
        let d_max = self.space.d_max();
        let mut violations = Vec::new();
        for (id, node) in self.nodes() {
            let scale = split_threshold(d_max, node.radius());
            let mut flag = |bound: VisitBound, observed: u64, limit: f64| {
                violations.push(VisitViolation {
                    node: id,
                    depth: node.region.depth(),
                    bound,
                    observed,
                    limit,
                })
            };
            if node.parent.is_none() {
                if node.own_visits() > 1 {
                    flag(VisitBound::RootOwn, node.own_visits(), 1.0);
                }
            } else {
                if node.own_visits() as f64 > 0.75 * scale {
                    flag(VisitBound::OwnUpper, node.own_visits(), 0.75 * scale);
                }
                if (node.inherited_visits as f64) < 0.25 * scale {
                    flag(VisitBound::InheritedLower, node.inherited_visits, 0.25 * scale);
                }
            }
            if !node.is_leaf() && node.visits as f64 != scale.ceil() {
                flag(VisitBound::SplitExact, node.visits, scale.ceil());
            }
        }
        VisitReport { violations }
    }

    /// One dump record per node, in creation order.
    pub fn to_records(&self) -> Vec<NodeRecord> {
        self.nodes()
            .map(|(_, n)| NodeRecord {
                step: self.step,
                depth: n.region.depth(),
                center: n.region.center().clone(),
                radius: n.radius(),
                q_hat: n.q_hat,
                visits: n.visits,
                own_visits: n.own_visits(),
                is_leaf: n.is_leaf(),
                creation_index: n.creation_index,
            })
            .collect()
    }

    /// Rebuilds a tree from dump records. Parent links are recovered from the
    /// dyadic cell indices; creation episodes are not part of the dump and
    /// come back as zero.
    pub fn from_records(space: SpaceDescriptor, records: &[NodeRecord]) -> Result<Self> {
        let mut sorted: Vec<&NodeRecord> = records.iter().collect();
        sorted.sort_by_key(|r| r.creation_index);
        let first = sorted
            .first()
            .ok_or_else(|| Error::InvalidInput("empty partition dump".into()))?;
        let step = first.step;
        if first.depth != 0 {
            return Err(Error::InvalidInput("first node of a dump must be the root".into()));
        }

        let mut nodes: Vec<BallNode> = Vec::with_capacity(sorted.len());
        let mut lookup: HashMap<(u32, Vec<u64>), NodeId> = HashMap::new();
        for rec in sorted {
            if rec.step != step {
                return Err(Error::InvalidInput(format!(
                    "dump mixes steps {step} and {}",
                    rec.step
                )));
            }
            if rec.own_visits > rec.visits {
                return Err(Error::InvalidInput(format!(
                    "node {} has more own visits than visits",
                    rec.creation_index
                )));
            }
            let region = BoxRegion::from_center(&space, rec.depth, &rec.center)?;
            if region.radius() != rec.radius {
                return Err(Error::InvalidInput(format!(
                    "node {} radius {} does not match depth {}",
                    rec.creation_index, rec.radius, rec.depth
                )));
            }
            let id = NodeId(nodes.len());
            let parent = if rec.depth == 0 {
                if !nodes.is_empty() {
                    return Err(Error::InvalidInput("dump contains two roots".into()));
                }
                None
            } else {
                let key: Vec<u64> = region.index().iter().map(|i| i >> 1).collect();
                let p = *lookup.get(&(rec.depth - 1, key)).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "node {} has no parent earlier in the dump",
                        rec.creation_index
                    ))
                })?;
                nodes[p.0].children.push(id);
                Some(p)
            };
            if lookup.insert((rec.depth, region.index().to_vec()), id).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate cell at node {}",
                    rec.creation_index
                )));
            }
            nodes.push(BallNode {
                region,
                q_hat: rec.q_hat,
                visits: rec.visits,
                inherited_visits: rec.visits - rec.own_visits,
                children: Vec::new(),
                parent,
                creation_index: rec.creation_index,
                created_episode: 0,
            });
        }
        for (rec, node) in records_in_order(records).zip(&nodes) {
            if rec.is_leaf != node.is_leaf() {
                return Err(Error::InvalidInput(format!(
                    "node {} leaf flag disagrees with the tree structure",
                    rec.creation_index
                )));
            }
        }
        let leaf_count = nodes.iter().filter(|n| n.is_leaf()).count();
        Ok(StepPartition {
            step,
            space,
            nodes,
            leaf_count,
        })
    }

    #[cfg(test)]
    pub(crate) fn detach_leaf(&mut self, id: NodeId) {
        let parent = self.nodes[id.0].parent.expect("not the root");
        self.nodes[parent.0].children.retain(|&c| c != id);
    }

    #[cfg(test)]
    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut BallNode {
        &mut self.nodes[id.0]
    }
}

fn records_in_order(records: &[NodeRecord]) -> impl Iterator<Item = &NodeRecord> {
    let mut sorted: Vec<&NodeRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.creation_index);
    sorted.into_iter()
}

/// Dump format for one partition node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub step: usize,
    pub depth: u32,
    pub center: Point,
    pub radius: f64,
    pub q_hat: f64,
    pub visits: u64,
    pub own_visits: u64,
    pub is_leaf: bool,
    pub creation_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationViolation {
    pub a: NodeId,
    pub b: NodeId,
    pub radius: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PartitionReport {
    /// Leaf cells carry up to exactly one root cell.
    pub covering_exact: bool,
    pub leaf_volume: f64,
    pub volume_deficit: f64,
    pub structure_violations: Vec<String>,
    pub separation_violations: Vec<SeparationViolation>,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.covering_exact
            && self.structure_violations.is_empty()
            && self.separation_violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisitBound {
    /// The root is selected at most once before it splits.
    RootOwn,
    /// Own visits of a child are at most 3/4 (d_max/r)^2.
    OwnUpper,
    /// Inherited visits of a child are at least 1/4 (d_max/r)^2.
    InheritedLower,
    /// A split node stopped at exactly (d_max/r)^2 visits.
    SplitExact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitViolation {
    pub node: NodeId,
    pub depth: u32,
    pub bound: VisitBound,
    pub observed: u64,
    pub limit: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VisitReport {
    pub violations: Vec<VisitViolation>,
}

impl VisitReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Parameters of the generic partitioning conditions.
#[derive(Debug, Clone, Copy)]
pub struct BlackBoxParams {
    pub episodes: u64,
    pub covering_dim: f64,
    pub c1: f64,
    pub c2: f64,
    /// Constant `C` in `leaf_count <= C * K^(d_c / (d_c + 2))`.
    pub size_constant: f64,
}

impl BlackBoxParams {
    /// `c1 = d_max / 2` and `c2 = d_max`, the constants the dyadic split rule satisfies.
    pub fn for_dyadic(d_max: f64, episodes: u64, covering_dim: f64, size_constant: f64) -> Self {
        BlackBoxParams {
            episodes,
            covering_dim,
            c1: d_max / 2.0,
            c2: d_max,
            size_constant,
        }
    }

    pub fn size_limit(&self) -> f64 {
        let d = self.covering_dim;
        self.size_constant * (self.episodes as f64).powf(d / (d + 2.0))
    }
}

#[derive(Debug, Clone, Default)]
pub struct BlackBoxReport {
    pub nested: bool,
    pub visit_scaling: bool,
    pub size: bool,
    pub violations: Vec<String>,
}

impl BlackBoxReport {
    pub fn passed(&self) -> bool {
        self.nested && self.visit_scaling && self.size
    }
}

/// Checks the three conditions under which any nested partitioning scheme
/// keeps the regret guarantee: nested growth, visits scaling with the
/// inverse squared diameter, and sublinear partition size.
pub fn check_blackbox_conditions(trees: &[StepPartition], params: &BlackBoxParams) -> BlackBoxReport {
    let mut report = BlackBoxReport {
        nested: true,
        visit_scaling: true,
        size: true,
        violations: Vec::new(),
    };
    let limit = params.size_limit();
    for tree in trees {
        let step = tree.step();
        let nesting = tree.audit_nesting();
        if !nesting.is_empty() {
            report.nested = false;
            report
                .violations
                .extend(nesting.into_iter().map(|v| format!("step {step}: {v}")));
        }
        for id in tree.leaves() {
            let node = tree.node(id);
            let r2 = node.radius().powi(2);
            let n = node.visits as f64;
            let lower = params.c1.powi(2) / r2;
            let upper = params.c2.powi(2) / r2;
            // an unsplit root has not been selected yet, so only the upper bound applies
            let low_ok = node.parent.is_none() || n >= lower;
            if !low_ok || n > upper {
                report.visit_scaling = false;
                report.violations.push(format!(
                    "step {step}: leaf {} has {} visits outside [{lower}, {upper}]",
                    id.0, node.visits
                ));
            }
        }
        if tree.leaf_count() as f64 > limit {
            report.size = false;
            report.violations.push(format!(
                "step {step}: {} leaves exceed the size limit {limit:.3}",
                tree.leaf_count()
            ));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> StepPartition {
        StepPartition::new(1, SpaceDescriptor::unit_box(1, 1).unwrap(), 5.0)
    }

    fn set_visits(t: &mut StepPartition, id: NodeId, n: u64) {
        t.node_mut(id).visits = n;
    }

    #[test]
    fn fresh_tree() {
        let t = tree();
        assert_eq!(t.relevant_leaves(&[0.3]), vec![StepPartition::ROOT]);
        assert_eq!(t.select_ball(&[0.3]).unwrap(), StepPartition::ROOT);
        assert_eq!(t.leaf_count(), 1);
        assert!(t.check_partition_invariants().passed());
        assert!(t.check_visit_bounds().passed());
    }

    #[test]
    fn relevant_leaves_follow_state_slices() {
        let mut t = tree();
        set_visits(&mut t, StepPartition::ROOT, 1);
        let kids = t.split(StepPartition::ROOT, 1).unwrap();
        // children 0 and 1 have state interval [0, 0.5)
        assert_eq!(t.relevant_leaves(&[0.1]), vec![kids[0], kids[1]]);

        set_visits(&mut t, kids[0], 4);
        let grand = t.split(kids[0], 2).unwrap();
        assert_eq!(t.leaf_count(), 7);
        let mut got = t.relevant_leaves(&[0.1]);
        got.sort();
        // kids[0] = [0,.5)x[0,.5) split into [0,.25)x[0,.25), [0,.25)x[.25,.5), ...
        let mut want = vec![kids[1], grand[0], grand[1]];
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn selection_prefers_q_then_radius_then_age() {
        let mut t = tree();
        set_visits(&mut t, StepPartition::ROOT, 1);
        let kids = t.split(StepPartition::ROOT, 1).unwrap();
        t.set_q(kids[0], 3.2);
        t.set_q(kids[1], 4.0);
        assert_eq!(t.select_ball(&[0.2]).unwrap(), kids[1]);

        // untouched leaves at equal q: the smaller cell wins
        t.set_q(kids[0], 5.0);
        t.set_q(kids[1], 5.0);
        set_visits(&mut t, kids[1], 4);
        let grand = t.split(kids[1], 2).unwrap();
        let sel = t.select_ball(&[0.2]).unwrap();
        assert_eq!(t.node(sel).radius(), 0.25);
        // among equal radius and equal q, the earliest created
        assert_eq!(sel, grand[0]);
        assert_eq!(t.max_relevant_q(&[0.2]).unwrap(), 5.0);
        assert!(t.select_ball(&[1.5]).is_err());
    }

    #[test]
    fn split_threshold_examples() {
        let mut t = tree();
        set_visits(&mut t, StepPartition::ROOT, 1);
        assert!(should_split(t.root(), 1.0));
        let kids = t.split(StepPartition::ROOT, 1).unwrap();
        set_visits(&mut t, kids[0], 3);
        assert!(!should_split(t.node(kids[0]), 1.0));
        set_visits(&mut t, kids[0], 4);
        assert!(should_split(t.node(kids[0]), 1.0));
        assert_eq!(split_threshold(1.0, 1.0 / 8.0), 64.0);
        // internal nodes never qualify
        assert!(!should_split(t.root(), 1.0));
    }

    #[test]
    fn split_inherits_and_counts() {
        let mut t = tree();
        set_visits(&mut t, StepPartition::ROOT, 1);
        let kids = t.split(StepPartition::ROOT, 1).unwrap();
        assert_eq!(t.leaf_count(), 4);
        for &k in &kids {
            assert_eq!(t.node(k).q_hat(), 5.0);
            assert_eq!(t.node(k).visits(), 1);
            assert_eq!(t.node(k).own_visits(), 0);
        }
        t.set_q(kids[2], 3.7);
        set_visits(&mut t, kids[2], 4);
        let grand = t.split(kids[2], 3).unwrap();
        for &g in &grand {
            let n = t.node(g);
            assert_eq!((n.radius(), n.visits(), n.q_hat()), (0.25, 4, 3.7));
            assert_eq!(n.created_episode(), 3);
        }
        assert_eq!(t.leaf_count(), 7);
        assert!(matches!(t.split(kids[2], 3), Err(Error::Contract(_))));
        assert!(matches!(t.record_visit(kids[2]), Err(Error::Contract(_))));
    }

    #[test]
    fn deleting_a_leaf_breaks_covering() {
        let mut t = tree();
        set_visits(&mut t, StepPartition::ROOT, 1);
        let kids = t.split(StepPartition::ROOT, 1).unwrap();
        assert!(t.check_partition_invariants().passed());
        t.detach_leaf(kids[3]);
        let report = t.check_partition_invariants();
        assert!(!report.passed());
        assert!(!report.covering_exact);
        assert_eq!(report.volume_deficit, 0.5f64.powi(2));
    }

    #[test]
    fn visit_bounds_flag_bad_counts() {
        let mut t = tree();
        set_visits(&mut t, StepPartition::ROOT, 1);
        let kids = t.split(StepPartition::ROOT, 1).unwrap();
        assert!(t.check_visit_bounds().passed());
        // 1 inherited + 4 own exceeds 3/4 * 4
        set_visits(&mut t, kids[0], 5);
        let r = t.check_visit_bounds();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].bound, VisitBound::OwnUpper);
    }

    #[test]
    fn records_round_trip() {
        let mut t = tree();
        set_visits(&mut t, StepPartition::ROOT, 1);
        let kids = t.split(StepPartition::ROOT, 1).unwrap();
        t.set_q(kids[3], 2.5);
        set_visits(&mut t, kids[3], 4);
        t.split(kids[3], 2).unwrap();
        let recs = t.to_records();
        let back = StepPartition::from_records(*t.space(), &recs).unwrap();
        assert_eq!(back.to_records(), recs);
        assert!(back.check_partition_invariants().passed());
        assert!(back.check_visit_bounds().passed());

        let mut orphan = recs.clone();
        orphan.remove(4);
        assert!(StepPartition::from_records(*t.space(), &orphan).is_err());
    }

    #[test]
    fn blackbox_on_fresh_tree() {
        let t = tree();
        let params = BlackBoxParams::for_dyadic(1.0, 1, 2.0, 1.0);
        assert!(check_blackbox_conditions(&[t], &params).passed());
    }
}
