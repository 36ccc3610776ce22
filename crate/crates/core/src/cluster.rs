//! Tree structures over variables: agglomerative Ward clustering, the
//! adjacency-constrained variant for markers with a chromosomal order, and
//! the gap-statistic cut.
//!
//! Variables (columns) are the clustered objects. Merge heights are the
//! increase of the Ward objective at each step, computed with the
//! Lance-Williams update so that arbitrary input dissimilarities (squared
//! euclidean between columns, or `1 - r^2` as a linkage-disequilibrium
//! surrogate) can be used.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One agglomeration step. `left` and `right` are node ids: leaves are
/// `0..D-1`, the i-th merge creates node `D + i`. `left` always names the
/// child containing the smaller leaf index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// A binary merge tree over `leaf_count` variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hierarchy {
    merges: Vec<Merge>,
    leaf_count: usize,
}

impl Hierarchy {
    /// Validates the merge list: D-1 merges, non-decreasing heights, every
    /// node used as a child at most once and before it exists as a parent.
    pub fn new(merges: Vec<Merge>, leaf_count: usize) -> Result<Self> {
        if leaf_count < 2 {
            return Err(Error::TooFewVariables(leaf_count));
        }
        if merges.len() != leaf_count - 1 {
            return Err(Error::DimensionMismatch(format!(
                "hierarchy: {} merges for {} leaves",
                merges.len(),
                leaf_count
            )));
        }
        let mut used = vec![false; 2 * leaf_count - 1];
        let mut prev = f64::NEG_INFINITY;
        for (i, m) in merges.iter().enumerate() {
            let created = leaf_count + i;
            for child in [m.left, m.right] {
                if child >= created {
                    return Err(Error::DimensionMismatch(format!(
                        "hierarchy: merge {i} references node {child} before it exists"
                    )));
                }
                if used[child] {
                    return Err(Error::DimensionMismatch(format!(
                        "hierarchy: node {child} merged twice"
                    )));
                }
                used[child] = true;
            }
            if !m.height.is_finite() {
                return Err(Error::NonFiniteInput("merge height".into()));
            }
            if m.height < prev {
                return Err(Error::DimensionMismatch(format!(
                    "hierarchy: height {} at merge {i} decreases below {}",
                    m.height, prev
                )));
            }
            prev = m.height;
        }
        Ok(Hierarchy { merges, leaf_count })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Number of distinct heights, i.e. the depth used by the explorer:
    /// level k is the partition after k merges.
    pub fn depth(&self) -> usize {
        self.merges.len()
    }

    /// Leaf members of every node, leaves first, then one entry per merge.
    pub fn node_members(&self) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> = (0..self.leaf_count).map(|j| vec![j]).collect();
        for m in &self.merges {
            let mut set = members[m.left].clone();
            set.extend_from_slice(&members[m.right]);
            set.sort_unstable();
            members.push(set);
        }
        members
    }

    /// Partition after applying the first `leaf_count - k` merges, i.e. the
    /// cut with exactly `k` clusters. Clusters are sorted by smallest member.
    pub fn cut(&self, k: usize) -> Result<Vec<Vec<usize>>> {
        if k == 0 || k > self.leaf_count {
            return Err(Error::Config(format!(
                "cut into {k} clusters impossible for {} leaves",
                self.leaf_count
            )));
        }
        let members = self.node_members();
        let mut alive: Vec<usize> = (0..self.leaf_count).collect();
        let mut alive_flags = vec![true; 2 * self.leaf_count - 1];
        for (i, m) in self.merges.iter().take(self.leaf_count - k).enumerate() {
            alive_flags[m.left] = false;
            alive_flags[m.right] = false;
            alive_flags[self.leaf_count + i] = true;
            alive.retain(|&n| alive_flags[n]);
            alive.push(self.leaf_count + i);
        }
        let mut clusters: Vec<Vec<usize>> = alive.into_iter().map(|n| members[n].clone()).collect();
        clusters.sort_by_key(|c| c[0]);
        Ok(clusters)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "leaf_count": self.leaf_count,
            "merges": self.merges,
        })
    }
}

/// Dissimilarity between two columns used to seed the agglomeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dissimilarity {
    /// Squared euclidean distance between column vectors; heights are then
    /// exactly the within-cluster sum-of-squares increase.
    EuclideanOnColumns,
    /// `1 - r^2` with `r` the Pearson correlation between columns.
    OneMinusSquaredCorrelation,
}

fn pairwise_dissimilarity(x: &Array2<f64>, kind: Dissimilarity) -> Vec<Vec<f64>> {
    let d = x.ncols();
    let mut dist = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in (a + 1)..d {
            let v = match kind {
                Dissimilarity::EuclideanOnColumns => {
                    let ca = x.column(a);
                    let cb = x.column(b);
                    ca.iter()
                        .zip(cb.iter())
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum()
                }
                Dissimilarity::OneMinusSquaredCorrelation => {
                    let r = linalg::pearson(x.column(a), x.column(b));
                    1.0 - r * r
                }
            };
            dist[a][b] = v;
            dist[b][a] = v;
        }
    }
    dist
}

struct Agglomerator {
    /// `delta[a][b]` is the Ward merge cost between active clusters in
    /// slots a and b (Lance-Williams maintained).
    delta: Vec<Vec<f64>>,
    size: Vec<usize>,
    node_id: Vec<usize>,
    /// Smallest leaf index in each slot, for the deterministic tie-break.
    rep: Vec<usize>,
    /// Active slots in linear (chromosomal) order.
    order: Vec<usize>,
}

impl Agglomerator {
    fn new(point_dissimilarity: Vec<Vec<f64>>) -> Self {
        let d = point_dissimilarity.len();
        // Merge cost between singletons is half the point dissimilarity.
        let mut delta = point_dissimilarity;
        for row in delta.iter_mut() {
            for v in row.iter_mut() {
                *v *= 0.5;
            }
        }
        Agglomerator {
            delta,
            size: vec![1; d],
            node_id: (0..d).collect(),
            rep: (0..d).collect(),
            order: (0..d).collect(),
        }
    }

    /// Picks the cheapest candidate pair among `candidates` (slot pairs),
    /// breaking ties toward the lexicographically smallest (rep_left,
    /// rep_right) with rep_left < rep_right.
    fn best_pair(&self, candidates: impl Iterator<Item = (usize, usize)>) -> (usize, usize, f64) {
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, b) in candidates {
            let cost = self.delta[a][b];
            let (ra, rb) = if self.rep[a] <= self.rep[b] {
                (self.rep[a], self.rep[b])
            } else {
                (self.rep[b], self.rep[a])
            };
            let better = match best {
                None => true,
                Some((ba, bb, bc)) => {
                    let (bra, brb) = if self.rep[ba] <= self.rep[bb] {
                        (self.rep[ba], self.rep[bb])
                    } else {
                        (self.rep[bb], self.rep[ba])
                    };
                    cost < bc || (cost == bc && (ra, rb) < (bra, brb))
                }
            };
            if better {
                best = Some((a, b, cost));
            }
        }
        best.expect("at least one candidate pair")
    }

    /// Merges slots a and b into a (b dies), updating Lance-Williams
    /// distances to every other active slot. Returns the merged node ids in
    /// (left, right) order by smallest leaf index.
    fn merge(&mut self, a: usize, b: usize, next_node: usize) -> (usize, usize) {
        let merged_cost = self.delta[a][b];
        let (na, nb) = (self.size[a] as f64, self.size[b] as f64);
        for &c in &self.order {
            if c == a || c == b {
                continue;
            }
            let nc = self.size[c] as f64;
            let updated = ((na + nc) * self.delta[a][c] + (nb + nc) * self.delta[b][c]
                - nc * merged_cost)
                / (na + nb + nc);
            self.delta[a][c] = updated;
            self.delta[c][a] = updated;
        }
        let (left, right) = if self.rep[a] <= self.rep[b] {
            (self.node_id[a], self.node_id[b])
        } else {
            (self.node_id[b], self.node_id[a])
        };
        self.size[a] += self.size[b];
        self.rep[a] = self.rep[a].min(self.rep[b]);
        self.node_id[a] = next_node;
        self.order.retain(|&s| s != b);
        (left, right)
    }
}

/// Agglomerative hierarchical clustering of the columns with the Ward
/// criterion. Heights are the Ward objective increase at each merge; ties
/// break toward the smallest (left leaf, right leaf) pair.
pub fn ward_cluster(x: &Array2<f64>, dissimilarity: Dissimilarity) -> Result<Hierarchy> {
    let d = x.ncols();
    if d < 2 {
        return Err(Error::TooFewVariables(d));
    }
    let mut agg = Agglomerator::new(pairwise_dissimilarity(x, dissimilarity));
    let mut merges = Vec::with_capacity(d - 1);
    for step in 0..d - 1 {
        let pairs = {
            let order = &agg.order;
            let mut v = Vec::with_capacity(order.len() * (order.len() - 1) / 2);
            for i in 0..order.len() {
                for j in (i + 1)..order.len() {
                    v.push((order[i], order[j]));
                }
            }
            v
        };
        let (a, b, cost) = agg.best_pair(pairs.into_iter());
        let (left, right) = agg.merge(a, b, d + step);
        merges.push(Merge {
            left,
            right,
            height: cost,
        });
    }
    Hierarchy::new(merges, d)
}

/// Ward clustering where only clusters adjacent in column order may merge,
/// so every cluster is a contiguous index interval. The dissimilarity is
/// `1 - r^2` between columns. Constrained merges can invert, so recorded
/// heights are clamped to be non-decreasing while the Lance-Williams state
/// keeps the raw costs.
pub fn constrained_ward_cluster(x: &Array2<f64>) -> Result<Hierarchy> {
    let d = x.ncols();
    if d < 2 {
        return Err(Error::TooFewVariables(d));
    }
    let mut agg = Agglomerator::new(pairwise_dissimilarity(
        x,
        Dissimilarity::OneMinusSquaredCorrelation,
    ));
    let mut merges = Vec::with_capacity(d - 1);
    let mut floor = f64::NEG_INFINITY;
    for step in 0..d - 1 {
        let pairs: Vec<(usize, usize)> = agg
            .order
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect();
        let (a, b, cost) = agg.best_pair(pairs.into_iter());
        let (left, right) = agg.merge(a, b, d + step);
        let height = if cost > floor { cost } else { floor };
        floor = height;
        merges.push(Merge {
            left,
            right,
            height,
        });
    }
    Hierarchy::new(merges, d)
}

/// Within-cluster dispersion of a column partition: sum over clusters of
/// squared distances from member columns to the cluster centroid.
fn within_dispersion(x: &Array2<f64>, clusters: &[Vec<usize>]) -> f64 {
    let n = x.nrows();
    let mut total = 0.0;
    for cluster in clusters {
        if cluster.len() < 2 {
            continue;
        }
        let mut centroid = vec![0.0; n];
        for &j in cluster {
            for i in 0..n {
                centroid[i] += x[(i, j)];
            }
        }
        for c in centroid.iter_mut() {
            *c /= cluster.len() as f64;
        }
        for &j in cluster {
            for i in 0..n {
                let diff = x[(i, j)] - centroid[i];
                total += diff * diff;
            }
        }
    }
    total
}

/// Gap-statistic choice of the cluster count for a column hierarchy.
///
/// Compares the log within-cluster dispersion of the tree cut at k against
/// `n_ref` reference datasets drawn uniformly on the bounding box of the
/// columns, each re-clustered with euclidean Ward. Returns the smallest k
/// with `Gap(k) >= Gap(k+1) - s_{k+1}`, falling back to `k_max` when the
/// rule never fires.
pub fn gap_statistic_cut(
    x: &Array2<f64>,
    hierarchy: &Hierarchy,
    k_max: usize,
    n_ref: usize,
    seed: u64,
) -> Result<usize> {
    let d = x.ncols();
    if hierarchy.leaf_count() != d {
        return Err(Error::DimensionMismatch("hierarchy vs dataset".into()));
    }
    if k_max == 0 || k_max > d {
        return Err(Error::Config(format!("k_max {k_max} outside 1..={d}")));
    }
    if n_ref == 0 {
        return Err(Error::Config("n_ref must be at least 1".into()));
    }
    if k_max == 1 {
        return Ok(1);
    }
    let n = x.nrows();

    // Bounding box over columns, per sample coordinate.
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for j in 0..d {
        for i in 0..n {
            let v = x[(i, j)];
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }

    let log_w = |data: &Array2<f64>, h: &Hierarchy, k: usize| -> Result<f64> {
        let clusters = h.cut(k)?;
        Ok(within_dispersion(data, &clusters).max(1e-300).ln())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ref_log_w = vec![Vec::with_capacity(n_ref); k_max];
    for _ in 0..n_ref {
        let reference = Array2::from_shape_fn((n, d), |(i, _)| {
            if hi[i] > lo[i] {
                rng.gen_range(lo[i]..hi[i])
            } else {
                lo[i]
            }
        });
        let ref_h = ward_cluster(&reference, Dissimilarity::EuclideanOnColumns)?;
        for k in 1..=k_max {
            ref_log_w[k - 1].push(log_w(&reference, &ref_h, k)?);
        }
    }

    let mut gap = Vec::with_capacity(k_max);
    let mut s = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let samples = &ref_log_w[k - 1];
        let mean: f64 = samples.iter().sum::<f64>() / n_ref as f64;
        let var: f64 =
            samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_ref as f64;
        gap.push(mean - log_w(x, hierarchy, k)?);
        s.push(var.sqrt() * (1.0 + 1.0 / n_ref as f64).sqrt());
    }
    for k in 1..k_max {
        if gap[k - 1] >= gap[k] - s[k] {
            return Ok(k);
        }
    }
    Ok(k_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn columns_of(values: &[f64]) -> Array2<f64> {
        // Embeds each value as a one-sample column.
        Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap()
    }

    #[test]
    fn nearest_pair_merges_first() {
        let x = columns_of(&[0.0, 1.0, 10.0]);
        let h = ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap();
        let first = h.merges()[0];
        assert_eq!((first.left, first.right), (0, 1));
        assert!((first.height - 0.5).abs() < 1e-12); // ward cost of {0} u {1}
    }

    #[test]
    fn duplicated_columns_merge_at_zero() {
        let x = array![[1.0, 1.0, 4.0], [2.0, 2.0, -1.0], [0.5, 0.5, 3.0]];
        let h = ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap();
        let first = h.merges()[0];
        assert_eq!((first.left, first.right), (0, 1));
        assert_eq!(first.height, 0.0);
    }

    #[test]
    fn too_few_variables_rejected() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(
            ward_cluster(&x, Dissimilarity::EuclideanOnColumns),
            Err(Error::TooFewVariables(1))
        ));
        assert!(matches!(
            constrained_ward_cluster(&x),
            Err(Error::TooFewVariables(1))
        ));
    }

    #[test]
    fn heights_monotone_both_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let x = Array2::from_shape_fn((12, 9), |_| rng.gen_range(-3.0..3.0));
            for h in [
                ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap(),
                ward_cluster(&x, Dissimilarity::OneMinusSquaredCorrelation).unwrap(),
                constrained_ward_cluster(&x).unwrap(),
            ] {
                let mut prev = f64::NEG_INFINITY;
                for m in h.merges() {
                    assert!(m.height >= prev);
                    prev = m.height;
                }
            }
        }
    }

    #[test]
    fn constrained_clusters_are_intervals_at_every_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((25, 10), |_| rng.gen_range(-1.0..1.0));
        let h = constrained_ward_cluster(&x).unwrap();
        for k in 1..=10 {
            for cluster in h.cut(k).unwrap() {
                for w in cluster.windows(2) {
                    assert_eq!(w[1], w[0] + 1, "non-contiguous cluster {cluster:?}");
                }
            }
        }
    }

    #[test]
    fn constrained_block_structure_merges_blocks_last() {
        // Two perfectly correlated blocks; the final merge joins them.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let base_a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base_b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Array2::from_shape_fn((n, 6), |(i, j)| {
            if j < 3 {
                base_a[i] * (j + 1) as f64
            } else {
                base_b[i] * (j as f64 - 1.0)
            }
        });
        let h = constrained_ward_cluster(&x).unwrap();
        let two = h.cut(2).unwrap();
        assert_eq!(two, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn cut_partitions_all_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = Array2::from_shape_fn((10, 8), |_| rng.gen_range(-2.0..2.0));
        let h = ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap();
        for k in 1..=8 {
            let clusters = h.cut(k).unwrap();
            assert_eq!(clusters.len(), k);
            let mut seen: Vec<usize> = clusters.concat();
            seen.sort_unstable();
            assert_eq!(seen, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn ward_permutation_invariant_height_multiset() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = Array2::from_shape_fn((15, 7), |_| rng.gen_range(-2.0..2.0));
        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let mut xp = Array2::zeros((15, 7));
        for (dst, &src) in perm.iter().enumerate() {
            xp.column_mut(dst).assign(&x.column(src));
        }
        let mut h1: Vec<f64> = ward_cluster(&x, Dissimilarity::EuclideanOnColumns)
            .unwrap()
            .merges()
            .iter()
            .map(|m| m.height)
            .collect();
        let mut h2: Vec<f64> = ward_cluster(&xp, Dissimilarity::EuclideanOnColumns)
            .unwrap()
            .merges()
            .iter()
            .map(|m| m.height)
            .collect();
        h1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        h2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in h1.iter().zip(h2.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn hierarchy_serializes_to_merge_list() {
        let x = columns_of(&[0.0, 1.0, 10.0]);
        let h = ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap();
        let json = h.to_json();
        assert_eq!(json["merges"].as_array().unwrap().len(), 2);
        assert!(json["merges"][0]["height"].is_number());
        let text = serde_json::to_string(&h).unwrap();
        let back: Hierarchy = serde_json::from_str(&text).unwrap();
        assert_eq!(back.merges(), h.merges());
    }

    #[test]
    fn gap_statistic_k_max_one() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let h = ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap();
        assert_eq!(gap_statistic_cut(&x, &h, 1, 5, 0).unwrap(), 1);
    }

    #[test]
    fn gap_statistic_two_blocks() {
        // Columns form two well-separated blocks in sample space.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 12;
        let x = Array2::from_shape_fn((n, 10), |(_, j)| {
            let center = if j < 5 { -8.0 } else { 8.0 };
            center + rng.gen_range(-0.5..0.5)
        });
        let h = ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap();
        let k = gap_statistic_cut(&x, &h, 6, 50, 7).unwrap();
        assert_eq!(k, 2);
    }

    #[test]
    fn gap_statistic_single_blob() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Array2::from_shape_fn((10, 12), |_| rng.gen_range(-1.0..1.0));
        let h = ward_cluster(&x, Dissimilarity::EuclideanOnColumns).unwrap();
        let k = gap_statistic_cut(&x, &h, 6, 50, 11).unwrap();
        assert_eq!(k, 1);
    }
}
