//! Flattening a hierarchy into all of its groups, assigning gap weights and
//! compressing groups into supervariables.
//!
//! A group created at height `h_c` and destroyed when its parent forms at
//! height `h_d` gets the gap `s = h_d - h_c` and the weight `rho = 1/sqrt(s)`.
//! Large gaps mean long-lived, well-separated groups, so their supervariables
//! are penalized less by the downstream Lasso.

use crate::cluster::Hierarchy;
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Weight assigned to groups whose gap is zero (duplicate columns) or small
/// enough that `1/sqrt(s)` would exceed it.
pub const DEFAULT_RHO_MAX: f64 = 1e6;

/// One flattened group: its variables, the height it was created at, the
/// gap it survives and the resulting penalty weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedGroup {
    pub members: Vec<usize>,
    /// Height the group appears at: 0 for leaves, the merge height otherwise.
    #[serde(rename = "level")]
    pub creation_height: f64,
    #[serde(rename = "s")]
    pub gap: f64,
    #[serde(rename = "rho")]
    pub weight: f64,
    pub is_leaf: bool,
}

/// All groups derived from one hierarchy (or from a flat partition).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedGroupSet {
    groups: Vec<WeightedGroup>,
    n_variables: usize,
    /// Hierarchy the groups came from; absent for flat partitions.
    #[serde(skip_serializing_if = "Option::is_none")]
    origin: Option<Hierarchy>,
}

impl WeightedGroupSet {
    pub fn groups(&self) -> &[WeightedGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_variables(&self) -> usize {
        self.n_variables
    }

    pub fn origin(&self) -> Option<&Hierarchy> {
        self.origin.as_ref()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.weight).collect()
    }

    /// Groups from a flat partition, all with unit gap and weight. Used for
    /// ground-truth block compression and unweighted baselines.
    pub fn from_partition(partition: &[Vec<usize>], n_variables: usize) -> Result<Self> {
        let mut groups = Vec::with_capacity(partition.len());
        for (i, members) in partition.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptyGroup(i));
            }
            groups.push(WeightedGroup {
                members: members.clone(),
                creation_height: 0.0,
                gap: 1.0,
                weight: 1.0,
                is_leaf: members.len() == 1,
            });
        }
        Ok(WeightedGroupSet {
            groups,
            n_variables,
            origin: None,
        })
    }
}

/// Expands a hierarchy into all `2D - 1` groups (D leaves plus D-1 internal
/// nodes) with their gaps and weights, capping the weight at `rho_max` for
/// vanishing gaps.
pub fn expand_hierarchy_with_cap(hierarchy: &Hierarchy, rho_max: f64) -> Result<WeightedGroupSet> {
    if !(rho_max > 0.0) {
        return Err(Error::Config(format!(
            "rho_max must be positive, got {rho_max}"
        )));
    }
    let d = hierarchy.leaf_count();
    let merges = hierarchy.merges();
    let n_nodes = 2 * d - 1;
    let members = hierarchy.node_members();

    // Creation height per node and destruction height via the parent merge.
    let mut creation = vec![0.0; n_nodes];
    let mut destruction = vec![f64::NAN; n_nodes];
    for (i, m) in merges.iter().enumerate() {
        creation[d + i] = m.height;
        destruction[m.left] = m.height;
        destruction[m.right] = m.height;
    }
    // The root has no parent: its gap is the top visible gap of the tree,
    // i.e. root height minus the previous merge height.
    let root = n_nodes - 1;
    let root_height = merges[d - 2].height;
    let previous_height = if d >= 3 { merges[d - 3].height } else { 0.0 };
    destruction[root] = root_height + (root_height - previous_height);
    creation[root] = root_height;

    let mut groups = Vec::with_capacity(n_nodes);
    for node in 0..n_nodes {
        let gap = destruction[node] - creation[node];
        let weight = if gap > 0.0 {
            (1.0 / gap.sqrt()).min(rho_max)
        } else {
            rho_max
        };
        groups.push(WeightedGroup {
            members: members[node].clone(),
            creation_height: creation[node],
            gap,
            weight,
            is_leaf: node < d,
        });
    }
    Ok(WeightedGroupSet {
        groups,
        n_variables: d,
        origin: Some(hierarchy.clone()),
    })
}

/// [`expand_hierarchy_with_cap`] with the default weight cap.
pub fn expand_hierarchy(hierarchy: &Hierarchy) -> Result<WeightedGroupSet> {
    expand_hierarchy_with_cap(hierarchy, DEFAULT_RHO_MAX)
}

/// Keeps at most `ceil(factor * D)` groups, preferring the largest gaps.
/// Leaves are always retained, so the budget below `D` degenerates to the
/// leaf set. Gap ties break toward the earlier group.
pub fn restrict_search_space(wgs: &WeightedGroupSet, factor: f64) -> Result<WeightedGroupSet> {
    let d = wgs.n_variables();
    if !(factor > 0.0) || (factor * d as f64) < 1.0 {
        return Err(Error::Config(format!(
            "restriction factor {factor} leaves no budget for {d} variables"
        )));
    }
    let budget = (factor * d as f64).ceil() as usize;
    let n_leaves = wgs.groups.iter().filter(|g| g.is_leaf).count();
    let internal_budget = budget.saturating_sub(n_leaves);

    let mut internal: Vec<(usize, f64)> = wgs
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_leaf)
        .map(|(i, g)| (i, g.gap))
        .collect();
    internal.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut keep: Vec<usize> = wgs
        .groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.is_leaf)
        .map(|(i, _)| i)
        .collect();
    keep.extend(internal.iter().take(internal_budget).map(|&(i, _)| i));
    keep.sort_unstable();

    Ok(WeightedGroupSet {
        groups: keep.into_iter().map(|i| wgs.groups[i].clone()).collect(),
        n_variables: d,
        origin: wgs.origin.clone(),
    })
}

/// How a group of columns is summarised into one supervariable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Summary {
    Mean,
    Median,
    /// First principal-component score of the member submatrix, sign-fixed
    /// so it correlates nonnegatively with the member mean.
    Pca1,
}

/// Supervariable columns aligned with the group set they came from.
#[derive(Debug, Clone)]
pub struct SuperVariableSet {
    pub columns: Array2<f64>,
    pub group_refs: WeightedGroupSet,
    pub summary: Summary,
}

impl SuperVariableSet {
    pub fn n_samples(&self) -> usize {
        self.columns.nrows()
    }

    pub fn n_groups(&self) -> usize {
        self.columns.ncols()
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// First principal-component scores of an N x k submatrix via power
/// iteration on the column-centered Gram matrix.
fn pca1_scores(sub: &Array2<f64>) -> Array1<f64> {
    let (n, k) = sub.dim();
    let mut centered = sub.clone();
    for j in 0..k {
        let mean = centered.column(j).sum() / n as f64;
        centered.column_mut(j).mapv_inplace(|v| v - mean);
    }
    let gram = centered.t().dot(&centered);
    let mut v = Array1::from_elem(k, 1.0 / (k as f64).sqrt());
    for _ in 0..1000 {
        let next = gram.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm < 1e-300 {
            // Zero-variance block: scores are all zero.
            return Array1::zeros(n);
        }
        let next = next / norm;
        let delta = (&next - &v).mapv(f64::abs).sum();
        v = next;
        if delta < 1e-12 {
            break;
        }
    }
    let scores = centered.dot(&v);
    let row_mean = sub.sum_axis(ndarray::Axis(1)) / k as f64;
    if crate::linalg::pearson(scores.view(), row_mean.view()) < 0.0 {
        -scores
    } else {
        scores
    }
}

/// Compresses every group into a supervariable column.
pub fn compress(x: &Array2<f64>, wgs: &WeightedGroupSet, summary: Summary) -> Result<SuperVariableSet> {
    let (n, d) = x.dim();
    if d != wgs.n_variables() {
        return Err(Error::DimensionMismatch(format!(
            "group set over {} variables applied to {d} columns",
            wgs.n_variables()
        )));
    }
    let mut columns = Array2::zeros((n, wgs.len()));
    for (g, group) in wgs.groups().iter().enumerate() {
        if group.members.is_empty() {
            return Err(Error::EmptyGroup(g));
        }
        if let Some(&bad) = group.members.iter().find(|&&j| j >= d) {
            return Err(Error::DimensionMismatch(format!(
                "group {g}: member {bad} out of range"
            )));
        }
        match summary {
            Summary::Mean => {
                for i in 0..n {
                    let sum: f64 = group.members.iter().map(|&j| x[(i, j)]).sum();
                    columns[(i, g)] = sum / group.members.len() as f64;
                }
            }
            Summary::Median => {
                let mut buf = vec![0.0; group.members.len()];
                for i in 0..n {
                    for (slot, &j) in buf.iter_mut().zip(group.members.iter()) {
                        *slot = x[(i, j)];
                    }
                    columns[(i, g)] = median_of(&mut buf);
                }
            }
            Summary::Pca1 => {
                let mut sub = Array2::zeros((n, group.members.len()));
                for (c, &j) in group.members.iter().enumerate() {
                    sub.column_mut(c).assign(&x.column(j));
                }
                columns.column_mut(g).assign(&pca1_scores(&sub));
            }
        }
    }
    Ok(SuperVariableSet {
        columns,
        group_refs: wgs.clone(),
        summary,
    })
}
