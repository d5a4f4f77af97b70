//! Complete-linkage agglomerative clustering of real values.
//!
//! On the real line the complete-linkage distance between two clusters is the
//! span of their union, so the closest pair of active clusters is always a pair
//! of neighbours in sorted order. Every cluster is therefore a contiguous run
//! of the sorted values, and a merge only needs to look at adjacent runs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// A node of the merge tree. Members are `order[start..end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DendrogramNode {
    pub start: usize,
    pub end: usize,
    /// Complete-linkage distance at which the node was formed (0 for leaves).
    pub height: f64,
    pub children: Option<[usize; 2]>,
    /// Hops from the root.
    pub depth: usize,
}

impl DendrogramNode {
    pub fn leaf_count(&self) -> usize {
        self.end - self.start
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Dendrogram {
    values: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<DendrogramNode>,
}

impl Dendrogram {
    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[DendrogramNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &DendrogramNode {
        &self.nodes[id]
    }

    /// Input values, in input order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Input indices sorted by value.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Input indices belonging to `id`.
    pub fn members(&self, id: usize) -> &[usize] {
        let n = &self.nodes[id];
        &self.order[n.start..n.end]
    }

    /// Merge heights in merge order.
    pub fn merge_heights(&self) -> Vec<f64> {
        self.nodes.iter().filter(|n| !n.is_leaf()).map(|n| n.height).collect()
    }
}

#[derive(PartialEq)]
struct Candidate {
    span: f64,
    start: usize,
    left: usize,
    right: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.span.total_cmp(&other.span).then(self.start.cmp(&other.start))
    }
}

/// Builds the complete-linkage merge tree of `values`.
///
/// Ties between equally distant pairs are broken toward the smaller values.
pub fn hac_complete(values: &[f64]) -> Result<Dendrogram> {
    let m = values.len();
    if m == 0 {
        return Err(Error::InvalidArgument("clustering needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { value: *v, at: f64::NAN });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let cap = 2 * m - 1;
    let mut nodes: Vec<DendrogramNode> = (0..m)
        .map(|i| DendrogramNode { start: i, end: i + 1, height: 0.0, children: None, depth: 0 })
        .collect();
    nodes.reserve(m - 1);
    let mut alive = vec![true; cap];
    let mut prev: Vec<Option<usize>> = vec![None; cap];
    let mut next: Vec<Option<usize>> = vec![None; cap];
    let mut heap = BinaryHeap::with_capacity(2 * m);
    for i in 0..m {
        prev[i] = i.checked_sub(1);
        next[i] = (i + 1 < m).then_some(i + 1);
        if i + 1 < m {
            heap.push(Reverse(Candidate { span: sorted[i + 1] - sorted[i], start: i, left: i, right: i + 1 }));
        }
    }
    let span = |nodes: &[DendrogramNode], a: usize, b: usize| sorted[nodes[b].end - 1] - sorted[nodes[a].start];

    while let Some(Reverse(c)) = heap.pop() {
        if !alive[c.left] || !alive[c.right] {
            continue;
        }
        let id = nodes.len();
        nodes.push(DendrogramNode {
            start: nodes[c.left].start,
            end: nodes[c.right].end,
            height: c.span,
            children: Some([c.left, c.right]),
            depth: 0,
        });
        alive[c.left] = false;
        alive[c.right] = false;
        let (p, q) = (prev[c.left], next[c.right]);
        prev[id] = p;
        next[id] = q;
        if let Some(p) = p {
            next[p] = Some(id);
            heap.push(Reverse(Candidate { span: span(&nodes, p, id), start: nodes[p].start, left: p, right: id }));
        }
        if let Some(q) = q {
            prev[q] = Some(id);
            heap.push(Reverse(Candidate { span: span(&nodes, id, q), start: nodes[id].start, left: id, right: q }));
        }
    }
    debug_assert_eq!(nodes.len(), cap);

    let root = nodes.len() - 1;
    let mut stack = vec![(root, 0usize)];
    while let Some((id, depth)) = stack.pop() {
        nodes[id].depth = depth;
        if let Some([a, b]) = nodes[id].children {
            stack.push((a, depth + 1));
            stack.push((b, depth + 1));
        }
    }
    Ok(Dendrogram { values: values.to_vec(), order, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook complete linkage over arbitrary clusters, O(m^3).
    fn brute_force_heights(values: &[f64]) -> Vec<f64> {
        let mut clusters: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        let mut heights = Vec::new();
        while clusters.len() > 1 {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let dist = clusters[a]
                        .iter()
                        .flat_map(|x| clusters[b].iter().map(move |y| (x - y).abs()))
                        .fold(0.0, f64::max);
                    if dist < best.0 {
                        best = (dist, a, b);
                    }
                }
            }
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
            heights.push(best.0);
        }
        heights
    }

    #[test]
    fn single_leaf() {
        let t = hac_complete(&[5.0]).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert!(t.node(t.root()).is_leaf());
    }

    #[test]
    fn three_points() {
        let t = hac_complete(&[0.0, 1.0, 10.0]).unwrap();
        assert_eq!(t.merge_heights(), vec![1.0, 10.0]);
        let first = t.node(3);
        let mut m = t.members(3).to_vec();
        m.sort();
        assert_eq!(m, vec![0, 1]);
        assert_eq!(first.height, 1.0);
        assert_eq!(t.node(t.root()).leaf_count(), 3);
    }

    #[test]
    fn coincident_points() {
        let t = hac_complete(&[2.0, 2.0, 2.0]).unwrap();
        assert!(t.merge_heights().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn empty_rejected() {
        assert!(hac_complete(&[]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(values in prop::collection::vec(-2.0f64..2.0, 1..24)) {
            let t = hac_complete(&values).unwrap();
            let mut fast = t.merge_heights();
            let mut slow = brute_force_heights(&values);
            fast.sort_by(f64::total_cmp);
            slow.sort_by(f64::total_cmp);
            prop_assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn tree_invariants(values in prop::collection::vec(-1.0f64..1.0, 1..64)) {
            let t = hac_complete(&values).unwrap();
            let root = t.node(t.root());
            prop_assert_eq!(root.leaf_count(), values.len());
            prop_assert_eq!(root.depth, 0);
            for n in t.nodes() {
                if let Some([a, b]) = n.children {
                    let (a, b) = (t.node(a), t.node(b));
                    prop_assert_eq!(n.leaf_count(), a.leaf_count() + b.leaf_count());
                    prop_assert!(n.height >= a.height && n.height >= b.height);
                    prop_assert_eq!(a.depth, n.depth + 1);
                }
            }
        }
    }
}
