//! IR-tree: an R-tree whose nodes carry per-term maximum weights.
//!
//! The tree is static. It is bulk-loaded with Sort-Tile-Recursive packing so
//! every leaf sits at the same depth and every node except the last of each
//! level is full.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::model::{normalized_distance, GeoObject, GeoPoint, ObjectId, Rect, TermId};

pub const DEFAULT_FANOUT: usize = 64;

/// Per-term maximum weight over a subtree, sorted by term id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    max_weight: Vec<(TermId, f64)>,
}

impl NodeSummary {
    fn merge<'a>(parts: impl IntoIterator<Item = &'a [(TermId, f64)]>) -> Self {
        let mut all: Vec<(TermId, f64)> = parts.into_iter().flatten().copied().collect();
        all.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
        all.dedup_by_key(|e| e.0);
        Self { max_weight: all }
    }

    pub fn max_weight(&self, term: TermId) -> Option<f64> {
        self.max_weight
            .binary_search_by_key(&term, |&(t, _)| t)
            .ok()
            .map(|i| self.max_weight[i].1)
    }

    pub fn entries(&self) -> &[(TermId, f64)] {
        &self.max_weight
    }

    /// True when some object below carries one of `terms`.
    pub fn relevant_to(&self, terms: &[TermId]) -> bool {
        terms.iter().any(|&t| self.max_weight(t).is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafEntry {
    pub id: ObjectId,
    pub location: GeoPoint,
    /// Sorted term ids of the object's document.
    pub terms: Vec<TermId>,
}

impl LeafEntry {
    fn relevant_to(&self, query_terms: &[TermId]) -> bool {
        sorted_intersect(&self.terms, query_terms)
    }
}

fn sorted_intersect(a: &[TermId], b: &[TermId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => return true,
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf(Vec<LeafEntry>),
    /// Indices of child nodes in the arena.
    Inner(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrTreeNode {
    pub mbr: Rect,
    pub summary: NodeSummary,
    pub kind: NodeKind,
}

impl IrTreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf(e) => e.len(),
            NodeKind::Inner(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrTree {
    nodes: Vec<IrTreeNode>,
    root: Option<u32>,
    fanout: usize,
    height: usize,
}

/// Sort-Tile-Recursive grouping of `items` into runs of at most `fanout`.
fn str_pack<T>(mut items: Vec<T>, fanout: usize, key: impl Fn(&T) -> GeoPoint) -> Vec<Vec<T>> {
    let n = items.len();
    let groups = n.div_ceil(fanout);
    let slices = (groups as f64).sqrt().ceil() as usize;
    let slice_len = slices * fanout;
    items.sort_by(|a, b| {
        let (pa, pb) = (key(a), key(b));
        pa.x.total_cmp(&pb.x).then(pa.y.total_cmp(&pb.y))
    });
    let mut out = Vec::with_capacity(groups);
    let mut rest = items;
    while !rest.is_empty() {
        let tail = rest.split_off(slice_len.min(rest.len()));
        let mut slice = std::mem::replace(&mut rest, tail);
        slice.sort_by(|a, b| {
            let (pa, pb) = (key(a), key(b));
            pa.y.total_cmp(&pb.y).then(pa.x.total_cmp(&pb.x))
        });
        while !slice.is_empty() {
            let tail = slice.split_off(fanout.min(slice.len()));
            out.push(std::mem::replace(&mut slice, tail));
        }
    }
    out
}

#[derive(PartialEq)]
struct Visit(f64, u32);

impl Eq for Visit {}

impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl IrTree {
    /// Bulk-load a tree. Panics if `fanout < 2`.
    pub fn build(objects: &[GeoObject], fanout: usize) -> Self {
        assert!(fanout >= 2, "IR-tree fanout must be at least 2");
        let mut tree = IrTree {
            nodes: Vec::new(),
            root: None,
            fanout,
            height: 0,
        };
        if objects.is_empty() {
            return tree;
        }

        let entries: Vec<(LeafEntry, &[(TermId, f64)])> = objects
            .iter()
            .map(|o| {
                (
                    LeafEntry {
                        id: o.id,
                        location: o.location,
                        terms: o.doc.terms().collect(),
                    },
                    o.doc.entries(),
                )
            })
            .collect();

        let mut level: Vec<u32> = Vec::new();
        for group in str_pack(entries, fanout, |e| e.0.location) {
            let mut mbr = Rect::from_point(group[0].0.location);
            for (e, _) in &group[1..] {
                mbr.expand_point(e.location);
            }
            let summary = NodeSummary::merge(group.iter().map(|(_, w)| *w));
            let leaf = group.into_iter().map(|(e, _)| e).collect();
            level.push(tree.push(IrTreeNode {
                mbr,
                summary,
                kind: NodeKind::Leaf(leaf),
            }));
        }
        tree.height = 1;

        while level.len() > 1 {
            let mut next = Vec::new();
            for group in str_pack(level, fanout, |&i| tree.nodes[i as usize].mbr.center()) {
                let mut mbr = tree.nodes[group[0] as usize].mbr;
                for &c in &group[1..] {
                    mbr.expand_rect(&tree.nodes[c as usize].mbr);
                }
                let summary = NodeSummary::merge(
                    group
                        .iter()
                        .map(|&c| tree.nodes[c as usize].summary.entries()),
                );
                next.push(tree.push(IrTreeNode {
                    mbr,
                    summary,
                    kind: NodeKind::Inner(group),
                }));
            }
            level = next;
            tree.height += 1;
        }
        tree.root = level.first().copied();
        tree
    }

    fn push(&mut self, node: IrTreeNode) -> u32 {
        self.nodes.push(node);
        (self.nodes.len() - 1) as u32
    }

    pub fn root(&self) -> Option<&IrTreeNode> {
        self.root.map(|r| &self.nodes[r as usize])
    }

    pub fn node(&self, index: u32) -> &IrTreeNode {
        &self.nodes[index as usize]
    }

    pub fn nodes(&self) -> &[IrTreeNode] {
        &self.nodes
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    /// Number of levels; 0 for an empty tree.
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    /// Objects carrying at least one of `terms` within `radius` (normalized
    /// units) of `center`, sorted ascending by id.
    ///
    /// Nodes are visited best-first by MBR distance; subtrees whose summary
    /// lacks every query term or whose MBR lies beyond `radius` are pruned.
    pub fn range_query(&self, center: GeoPoint, radius: f64, terms: &[TermId]) -> Vec<ObjectId> {
        let mut out = Vec::new();
        let Some(root) = self.root else {
            return out;
        };
        let mut queue = BinaryHeap::new();
        let r = &self.nodes[root as usize];
        if r.summary.relevant_to(terms) && r.mbr.min_distance(center) <= radius {
            queue.push(Reverse(Visit(r.mbr.min_distance(center), root)));
        }
        while let Some(Reverse(Visit(_, idx))) = queue.pop() {
            match &self.nodes[idx as usize].kind {
                NodeKind::Leaf(entries) => {
                    out.extend(
                        entries
                            .iter()
                            .filter(|e| {
                                normalized_distance(center, e.location) <= radius
                                    && e.relevant_to(terms)
                            })
                            .map(|e| e.id),
                    );
                }
                NodeKind::Inner(children) => {
                    for &c in children {
                        let child = &self.nodes[c as usize];
                        if !child.summary.relevant_to(terms) {
                            continue;
                        }
                        let d = child.mbr.min_distance(center);
                        if d <= radius {
                            queue.push(Reverse(Visit(d, c)));
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Verify structural invariants against the objects the tree was built from.
    pub fn check_invariants(&self, objects: &[GeoObject]) -> Result<(), String> {
        let Some(root) = self.root else {
            return if objects.is_empty() {
                Ok(())
            } else {
                Err("empty tree over non-empty input".into())
            };
        };
        let mut seen = vec![0usize; objects.len()];
        let mut leaf_depths = Vec::new();
        self.check_node(root, 1, objects, &mut seen, &mut leaf_depths)?;
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(format!("object {i} reachable {} times", seen[i]));
        }
        if leaf_depths.iter().any(|&d| d != self.height) {
            return Err("leaves at unequal depth".into());
        }
        Ok(())
    }

    fn check_node(
        &self,
        idx: u32,
        depth: usize,
        objects: &[GeoObject],
        seen: &mut [usize],
        leaf_depths: &mut Vec<usize>,
    ) -> Result<(), String> {
        let node = &self.nodes[idx as usize];
        if node.is_empty() || node.len() > self.fanout {
            return Err(format!("node {idx} has {} entries", node.len()));
        }
        let mut tight: Option<Rect> = None;
        let mut grow = |r: Rect| match tight.as_mut() {
            Some(t) => t.expand_rect(&r),
            None => tight = Some(r),
        };
        match &node.kind {
            NodeKind::Leaf(entries) => {
                leaf_depths.push(depth);
                for e in entries {
                    let obj = &objects[e.id as usize];
                    seen[e.id as usize] += 1;
                    grow(Rect::from_point(e.location));
                    for &(t, w) in obj.doc.entries() {
                        if node.summary.max_weight(t).is_none_or(|m| m < w) {
                            return Err(format!("leaf {idx} summary misses term {t}"));
                        }
                    }
                }
            }
            NodeKind::Inner(children) => {
                for &c in children {
                    let child = &self.nodes[c as usize];
                    grow(child.mbr);
                    for &(t, w) in child.summary.entries() {
                        if node.summary.max_weight(t).is_none_or(|m| m < w) {
                            return Err(format!("node {idx} summary does not dominate child {c}"));
                        }
                    }
                    self.check_node(c, depth + 1, objects, seen, leaf_depths)?;
                }
            }
        }
        if tight != Some(node.mbr) {
            return Err(format!("node {idx} MBR is not tight"));
        }
        Ok(())
    }
}
