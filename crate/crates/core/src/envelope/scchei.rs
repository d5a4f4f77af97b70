//! Size-constrained clustering of harmonic eigenvalues.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::hac::{hac_complete, Dendrogram};
use crate::error::{Error, Result};
use crate::harmonics::{check_dim, harmonic_dim};
use crate::spectral::{SortOrder, Spectrum};

/// Eigenvalues grouped by harmonic degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// `clusters[k]` holds `d_k` eigenvalues, largest magnitude first.
    pub clusters: Vec<Vec<f64>>,
    /// Positions of the cluster members in the magnitude-sorted spectrum.
    pub indices: Vec<Vec<usize>>,
    /// Eigenvalues beyond the `R~` largest in magnitude, in magnitude order.
    pub leftover: Vec<f64>,
    pub resolution: usize,
    pub dim: usize,
}

impl ClusterAssignment {
    /// Cluster means, one per degree.
    pub fn means(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    }
}

pub(crate) fn magnitude_sorted(spec: &Spectrum) -> Cow<'_, [f64]> {
    if spec.order == SortOrder::ByMagnitudeDesc {
        return Cow::Borrowed(&spec.values);
    }
    let mut v = spec.values.clone();
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)));
    Cow::Owned(v)
}

/// Clusters the `R~` largest-magnitude eigenvalues into groups of sizes
/// `d_0, ..., d_R`.
pub fn scchei(spec: &Spectrum, d: usize, r: usize) -> Result<ClusterAssignment> {
    scchei_values(&magnitude_sorted(spec), d, r)
}

/// Ordering key of a candidate node; smaller is better.
#[derive(PartialEq, PartialOrd)]
struct Rank {
    size: usize,
    depth: usize,
    neg_height: f64,
    neg_magnitude: f64,
    start: usize,
}

struct Search<'a> {
    tree: &'a Dendrogram,
    /// Magnitudes in sorted-value position order.
    mags: Vec<f64>,
    available: Vec<bool>,
    count: Vec<usize>,
    mag_sum: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(tree: &'a Dendrogram) -> Self {
        let mags = tree.order().iter().map(|&i| tree.values()[i].abs()).collect();
        let m = tree.order().len();
        let mut s = Search { tree, mags, available: vec![true; m], count: vec![], mag_sum: vec![] };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        let m = self.available.len();
        self.count = vec![0; m + 1];
        self.mag_sum = vec![0.0; m + 1];
        for i in 0..m {
            let a = self.available[i];
            self.count[i + 1] = self.count[i] + a as usize;
            self.mag_sum[i + 1] = self.mag_sum[i] + if a { self.mags[i] } else { 0.0 };
        }
    }

    /// Best node by `rank` among those whose effective size passes `accept`.
    fn find(&self, accept: impl Fn(usize) -> bool, by_size: bool) -> Option<usize> {
        let mut best: Option<(Rank, usize)> = None;
        for (id, node) in self.tree.nodes().iter().enumerate() {
            let size = self.count[node.end] - self.count[node.start];
            if size == 0 || !accept(size) {
                continue;
            }
            let mag = (self.mag_sum[node.end] - self.mag_sum[node.start]) / size as f64;
            let rank = Rank {
                size: if by_size { size } else { 0 },
                depth: node.depth,
                neg_height: -node.height,
                neg_magnitude: -mag,
                start: node.start,
            };
            if best.as_ref().is_none_or(|(b, _)| rank < *b) {
                best = Some((rank, id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Removes up to `take` members of `id`, largest magnitude first, and
    /// returns their input indices.
    fn take(&mut self, id: usize, take: usize) -> Vec<usize> {
        let node = self.tree.node(id);
        let values = self.tree.values();
        let order = self.tree.order();
        let mut pos: Vec<usize> = (node.start..node.end).filter(|&p| self.available[p]).collect();
        pos.sort_by(|&a, &b| {
            let (x, y) = (values[order[a]], values[order[b]]);
            y.abs().total_cmp(&x.abs()).then(y.total_cmp(&x)).then(order[a].cmp(&order[b]))
        });
        pos.truncate(take);
        for &p in &pos {
            self.available[p] = false;
        }
        self.refresh();
        pos.into_iter().map(|p| order[p]).collect()
    }
}

/// As [`scchei`] on eigenvalues already sorted by decreasing magnitude.
pub fn scchei_values(values: &[f64], d: usize, r: usize) -> Result<ClusterAssignment> {
    check_dim(d)?;
    let sizes = (0..=r)
        .map(|l| harmonic_dim(l, d).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = sizes.iter().sum();
    if total > values.len() {
        return Err(Error::ResolutionTooLarge { r, needed: total, available: values.len() });
    }
    let mut slots: Vec<Option<Vec<usize>>> = vec![None; r + 1];
    let mut clustered = vec![false; total];
    let mut pending: Vec<usize> = (0..=r).collect();

    let mut rebuilds = 0;
    while !pending.is_empty() {
        if rebuilds > r + 1 {
            return Err(Error::ClusteringStalled(rebuilds - 1));
        }
        rebuilds += 1;
        let remaining: Vec<usize> = (0..total).filter(|&i| !clustered[i]).collect();
        let local: Vec<f64> = remaining.iter().map(|&i| values[i]).collect();
        let tree = hac_complete(&local)?;
        let mut search = Search::new(&tree);
        let mut record = |k: usize, picked: Vec<usize>, clustered: &mut [bool]| {
            let global: Vec<usize> = picked.into_iter().map(|i| remaining[i]).collect();
            for &g in &global {
                clustered[g] = true;
            }
            slots[k] = Some(global);
        };

        let mut unmatched = Vec::new();
        for &k in &pending {
            let size = sizes[k];
            match search.find(|s| s == size, false) {
                Some(id) => {
                    let picked = search.take(id, size);
                    record(k, picked, &mut clustered);
                }
                None => unmatched.push(k),
            }
        }

        pending.clear();
        for (pos, &k) in unmatched.iter().enumerate() {
            let size = sizes[k];
            match search.find(|s| s > size, true) {
                Some(id) => {
                    let picked = search.take(id, size);
                    record(k, picked, &mut clustered);
                }
                None => {
                    pending.extend_from_slice(&unmatched[pos..]);
                    break;
                }
            }
        }
    }

    let mut clusters = Vec::with_capacity(r + 1);
    let mut indices = Vec::with_capacity(r + 1);
    for slot in slots {
        let mut idx = slot.expect("every degree is filled");
        idx.sort_unstable();
        clusters.push(idx.iter().map(|&i| values[i]).collect());
        indices.push(idx);
    }
    Ok(ClusterAssignment { clusters, indices, leftover: values[total..].to_vec(), resolution: r, dim: d })
}

/// Thresholded intra-class variance of an assignment over `n` nodes.
pub fn intra_class_variance(assign: &ClusterAssignment, n: usize) -> f64 {
    let within: f64 = assign
        .clusters
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            c.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        })
        .sum();
    let tail: f64 = assign.leftover.iter().map(|v| v * v).sum();
    (within + tail) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spectrum(values: Vec<f64>) -> Spectrum {
        Spectrum { values, vectors: None, order: SortOrder::ByValueDesc }
    }

    #[test]
    fn exact_multiplicities() {
        let mut v = vec![0.5, 0.25, 0.25, 0.25];
        v.extend([0.01, -0.008, 0.005, -0.003, 0.002, 0.001]);
        let a = scchei(&spectrum(v), 3, 1).unwrap();
        assert_eq!(a.clusters[0], vec![0.5]);
        assert_eq!(a.clusters[1], vec![0.25; 3]);
        assert_eq!(a.leftover.len(), 6);
        assert_eq!(a.means(), vec![0.5, 0.25]);
    }

    #[test]
    fn resolution_zero_takes_largest_magnitude() {
        let a = scchei(&spectrum(vec![0.2, -0.7, 0.1]), 3, 0).unwrap();
        assert_eq!(a.clusters, vec![vec![-0.7]]);
        assert_eq!(a.leftover, vec![0.2, 0.1]);
    }

    #[test]
    fn heaviside_layout_degree_two() {
        // p*_0, p*_1, p*_2, p*_3 of the d = 3 half-sphere indicator, plus noise.
        let mut v = vec![0.5];
        v.extend([0.25; 3]);
        v.extend([0.0; 5]);
        v.extend([-0.0625; 7]);
        v.extend([0.004, -0.002, 0.001]);
        let a = scchei(&spectrum(v), 3, 3).unwrap();
        let means = a.means();
        assert!((means[0] - 0.5).abs() < 1e-12);
        assert!((means[1] - 0.25).abs() < 1e-12);
        assert!(means[2].abs() < 0.002);
        assert!((means[3] + 0.0625).abs() < 1e-12);
    }

    #[test]
    fn too_large_resolution() {
        let err = scchei(&spectrum(vec![0.1; 8]), 3, 2).unwrap_err();
        assert!(matches!(err, Error::ResolutionTooLarge { needed: 9, .. }));
    }

    #[test]
    fn variance_examples() {
        let zero = ClusterAssignment {
            clusters: vec![vec![0.3], vec![0.1; 3]],
            indices: vec![],
            leftover: vec![0.0; 4],
            resolution: 1,
            dim: 3,
        };
        assert!(intra_class_variance(&zero, 8) < 1e-30);
        let hypothetical = ClusterAssignment {
            clusters: vec![vec![1.0, 3.0]],
            indices: vec![],
            leftover: vec![2.0],
            resolution: 0,
            dim: 3,
        };
        assert!((intra_class_variance(&hypothetical, 10) - 0.6).abs() < 1e-15);
        let single = ClusterAssignment {
            clusters: vec![vec![0.5]],
            indices: vec![],
            leftover: vec![],
            resolution: 0,
            dim: 3,
        };
        assert_eq!(intra_class_variance(&single, 4), 0.0);
    }

    proptest! {
        #[test]
        fn sizes_are_exact(
            raw in prop::collection::vec(-1.0f64..1.0, 40..120),
            d in 3usize..6,
        ) {
            let spec = spectrum(raw.clone());
            let rmax = crate::harmonics::max_resolution(raw.len(), d).unwrap().unwrap();
            for r in 0..=rmax {
                let a = scchei(&spec, d, r).unwrap();
                let mut seen = std::collections::BTreeSet::new();
                for (k, (c, idx)) in a.clusters.iter().zip(&a.indices).enumerate() {
                    prop_assert_eq!(c.len() as u64, harmonic_dim(k, d).unwrap());
                    for &i in idx {
                        prop_assert!(seen.insert(i));
                    }
                }
                let total = crate::harmonics::cumulative_dim(r, d).unwrap() as usize;
                prop_assert_eq!(seen.len(), total);
                prop_assert!(seen.iter().all(|&i| i < total));
                prop_assert_eq!(a.leftover.len(), raw.len() - total);
                prop_assert!(intra_class_variance(&a, raw.len()) >= 0.0);
            }
        }
    }
}
