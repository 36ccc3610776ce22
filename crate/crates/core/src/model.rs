//! Shared data model: views, group structures, compact interaction models
//! and the variable-level interaction matrix.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// One data view: an N x D matrix with named columns. Rows are samples,
/// columns are variables.
#[derive(Debug, Clone)]
pub struct Dataset {
    values: Array2<f64>,
    variable_names: Vec<String>,
}

impl Dataset {
    /// Validates finiteness, a positive sample count and distinct names.
    pub fn new(values: Array2<f64>, variable_names: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty sample".into()));
        }
        if variable_names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "variable names: {} names for {} columns",
                variable_names.len(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("dataset values".into()));
        }
        let distinct: HashSet<&str> = variable_names.iter().map(|s| s.as_str()).collect();
        if distinct.len() != variable_names.len() {
            return Err(Error::DimensionMismatch(
                "variable names: duplicates present".into(),
            ));
        }
        Ok(Dataset {
            values,
            variable_names,
        })
    }

    /// Builds a dataset with synthetic names `v0..v{D-1}`.
    pub fn with_default_names(values: Array2<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("v{j}")).collect();
        Dataset::new(values, names)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_variables(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn column(&self, j: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.column(j)
    }

    /// Restricts the dataset to the given columns, preserving order.
    pub fn select_columns(&self, keep: &[usize]) -> Result<Dataset> {
        let mut out = Array2::zeros((self.n_samples(), keep.len()));
        let mut names = Vec::with_capacity(keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            if src >= self.n_variables() {
                return Err(Error::DimensionMismatch(format!(
                    "column index {src} out of range for {} variables",
                    self.n_variables()
                )));
            }
            out.column_mut(dst).assign(&self.values.column(src));
            names.push(self.variable_names[src].clone());
        }
        Dataset::new(out, names)
    }
}

/// Response vector paired with the two views.
#[derive(Debug, Clone)]
pub struct Response {
    y: Array1<f64>,
}

impl Response {
    pub fn new(y: Array1<f64>) -> Result<Self> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("response".into()));
        }
        Ok(Response { y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.y
    }
}

/// A flat group structure over variables 1..D (0-based indices here).
/// Groups may overlap; every variable must be covered and no group may be
/// empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    n_variables: usize,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, n_variables: usize) -> Result<Self> {
        let mut covered = vec![false; n_variables];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptyGroup(g));
            }
            for &j in members {
                if j >= n_variables {
                    return Err(Error::DimensionMismatch(format!(
                        "group {g}: member {j} out of range for {n_variables} variables"
                    )));
                }
                covered[j] = true;
            }
        }
        if let Some(j) = covered.iter().position(|c| !c) {
            return Err(Error::DimensionMismatch(format!(
                "variable {j} belongs to no group"
            )));
        }
        Ok(GroupStructure {
            groups,
            n_variables,
        })
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn n_variables(&self) -> usize {
        self.n_variables
    }

    pub fn members(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Fitted compact model over two group structures: per-group main effects,
/// the group-pair interaction matrix and an intercept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactModel {
    pub beta_g: Vec<f64>,
    pub beta_m: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub intercept: f64,
}

impl CompactModel {
    pub fn new(
        beta_g: Vec<f64>,
        beta_m: Vec<f64>,
        theta: Vec<Vec<f64>>,
        intercept: f64,
    ) -> Result<Self> {
        if theta.len() != beta_g.len() || theta.iter().any(|row| row.len() != beta_m.len()) {
            return Err(Error::DimensionMismatch(
                "interaction matrix does not match the two group structures".into(),
            ));
        }
        Ok(CompactModel {
            beta_g,
            beta_m,
            theta,
            intercept,
        })
    }
}

/// Variable-level interaction matrix (D_G x D_M). Hit matrices store 0/1;
/// coefficient matrices store the effects themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableInteractionMatrix {
    entries: Vec<Vec<f64>>,
}

impl VariableInteractionMatrix {
    pub fn zeros(d_g: usize, d_m: usize) -> Self {
        VariableInteractionMatrix {
            entries: vec![vec![0.0; d_m]; d_g],
        }
    }

    pub fn from_entries(entries: Vec<Vec<f64>>) -> Result<Self> {
        let d_m = entries.first().map_or(0, |row| row.len());
        if entries.iter().any(|row| row.len() != d_m) {
            return Err(Error::DimensionMismatch("ragged interaction matrix".into()));
        }
        Ok(VariableInteractionMatrix { entries })
    }

    pub fn n_rows(&self) -> usize {
        self.entries.len()
    }

    pub fn n_cols(&self) -> usize {
        self.entries.first().map_or(0, |row| row.len())
    }

    pub fn get(&self, j: usize, jp: usize) -> f64 {
        self.entries[j][jp]
    }

    pub fn set(&mut self, j: usize, jp: usize, value: f64) {
        self.entries[j][jp] = value;
    }

    pub fn is_hit(&self, j: usize, jp: usize) -> bool {
        self.entries[j][jp] != 0.0
    }

    pub fn count_nonzero(&self) -> usize {
        self.entries
            .iter()
            .map(|row| row.iter().filter(|v| **v != 0.0).count())
            .sum()
    }

    pub fn transpose(&self) -> VariableInteractionMatrix {
        let mut out = VariableInteractionMatrix::zeros(self.n_cols(), self.n_rows());
        for j in 0..self.n_rows() {
            for jp in 0..self.n_cols() {
                out.set(jp, j, self.get(j, jp));
            }
        }
        out
    }
}

/// Checks that both views and the response agree on the sample count.
pub fn validate_pairing(g: &Dataset, m: &Dataset, y: &Response) -> Result<()> {
    let n = g.n_samples();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty sample".into()));
    }
    if m.n_samples() != n {
        return Err(Error::DimensionMismatch("view M".into()));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch("response".into()));
    }
    Ok(())
}

/// Expands a compact (group-level) hit matrix to the variable level: entry
/// (j, j') is set iff some selected pair (g, m) has j in group g and j' in
/// group m. Overlapping groups union idempotently.
pub fn expand_to_variables(
    hit: &[Vec<bool>],
    gs_g: &GroupStructure,
    gs_m: &GroupStructure,
) -> Result<VariableInteractionMatrix> {
    if hit.len() != gs_g.group_count() {
        return Err(Error::DimensionMismatch("hit matrix rows".into()));
    }
    if hit.iter().any(|row| row.len() != gs_m.group_count()) {
        return Err(Error::DimensionMismatch("hit matrix columns".into()));
    }
    let mut out = VariableInteractionMatrix::zeros(gs_g.n_variables(), gs_m.n_variables());
    for (g, row) in hit.iter().enumerate() {
        for (m, &selected) in row.iter().enumerate() {
            if !selected {
                continue;
            }
            for &j in gs_g.members(g) {
                for &jp in gs_m.members(m) {
                    out.set(j, jp, 1.0);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn dataset(n: usize, d: usize) -> Dataset {
        let values = Array2::from_shape_fn((n, d), |(i, j)| (i * d + j) as f64);
        Dataset::with_default_names(values).unwrap()
    }

    #[test]
    fn pairing_accepts_matching_dims() {
        let g = dataset(100, 3);
        let m = dataset(100, 2);
        let y = Response::new(Array1::zeros(100)).unwrap();
        assert!(validate_pairing(&g, &m, &y).is_ok());
    }

    #[test]
    fn pairing_names_offending_view() {
        let g = dataset(100, 3);
        let m = dataset(99, 2);
        let y = Response::new(Array1::zeros(100)).unwrap();
        let err = validate_pairing(&g, &m, &y).unwrap_err();
        assert!(err.to_string().contains("view M"));
    }

    #[test]
    fn pairing_rejects_empty_sample() {
        let err = Dataset::with_default_names(Array2::zeros((0, 3))).unwrap_err();
        assert!(err.to_string().contains("empty sample"));
    }

    #[test]
    fn pairing_exhaustive_small_cases() {
        // validate_pairing passes iff all three lengths agree.
        for ng in 1..4usize {
            for nm in 1..4usize {
                for ny in 1..4usize {
                    let g = dataset(ng, 2);
                    let m = dataset(nm, 2);
                    let y = Response::new(Array1::zeros(ny)).unwrap();
                    let ok = validate_pairing(&g, &m, &y).is_ok();
                    assert_eq!(ok, ng == nm && nm == ny, "ng={ng} nm={nm} ny={ny}");
                }
            }
        }
    }

    #[test]
    fn dataset_rejects_nan_and_duplicate_names() {
        let mut values = Array2::zeros((2, 2));
        values[(0, 0)] = f64::NAN;
        assert!(Dataset::with_default_names(values).is_err());
        let values = Array2::zeros((2, 2));
        assert!(Dataset::new(values, vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn group_structure_requires_coverage_and_nonempty() {
        assert!(GroupStructure::new(vec![vec![0], vec![1]], 2).is_ok());
        assert!(GroupStructure::new(vec![vec![0]], 2).is_err());
        assert!(GroupStructure::new(vec![vec![0, 1], vec![]], 2).is_err());
    }

    #[test]
    fn expand_single_hit() {
        // Groups use 0-based indices: {0,1} x {2} over 3x3 variables.
        let gs_g = GroupStructure::new(vec![vec![0, 1], vec![2]], 3).unwrap();
        let gs_m = GroupStructure::new(vec![vec![0], vec![1], vec![2]], 3).unwrap();
        let hit = vec![vec![false, false, true], vec![false, false, false]];
        let out = expand_to_variables(&hit, &gs_g, &gs_m).unwrap();
        assert!(out.is_hit(0, 2));
        assert!(out.is_hit(1, 2));
        assert_eq!(out.count_nonzero(), 2);
    }

    #[test]
    fn expand_all_zero() {
        let gs_g = GroupStructure::new(vec![vec![0, 1]], 2).unwrap();
        let gs_m = GroupStructure::new(vec![vec![0]], 1).unwrap();
        let hit = vec![vec![false]];
        let out = expand_to_variables(&hit, &gs_g, &gs_m).unwrap();
        assert_eq!(out.count_nonzero(), 0);
    }

    #[test]
    fn expand_overlapping_groups_idempotent_union() {
        // Variable 1 is covered by both selected groups; brute-force union
        // over pairs must equal the expansion.
        let gs_g = GroupStructure::new(vec![vec![0, 1], vec![1, 2]], 3).unwrap();
        let gs_m = GroupStructure::new(vec![vec![0]], 1).unwrap();
        let hit = vec![vec![true], vec![true]];
        let out = expand_to_variables(&hit, &gs_g, &gs_m).unwrap();

        let mut brute = VariableInteractionMatrix::zeros(3, 1);
        for (g, row) in hit.iter().enumerate() {
            for (m, &sel) in row.iter().enumerate() {
                if sel {
                    for &j in gs_g.members(g) {
                        for &jp in gs_m.members(m) {
                            brute.set(j, jp, 1.0);
                        }
                    }
                }
            }
        }
        assert_eq!(out, brute);
        assert!(out.is_hit(1, 0));
    }

    #[test]
    fn compact_model_dimension_check() {
        assert!(CompactModel::new(vec![0.0; 2], vec![0.0; 3], vec![vec![0.0; 3]; 2], 0.0).is_ok());
        assert!(CompactModel::new(vec![0.0; 2], vec![0.0; 3], vec![vec![0.0; 2]; 2], 0.0).is_err());
    }

    proptest! {
        /// Adding a compact hit never clears a variable-level entry.
        #[test]
        fn expand_is_monotone(
            rows in 1usize..4, cols in 1usize..4,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d_g = rows + 1;
            let d_m = cols + 1;
            // Random covering group structures.
            let mut groups_g: Vec<Vec<usize>> = (0..rows)
                .map(|_| {
                    let len = rng.gen_range(1..=d_g);
                    let mut m: Vec<usize> = (0..d_g).collect();
                    for i in (1..m.len()).rev() {
                        let j = rng.gen_range(0..=i);
                        m.swap(i, j);
                    }
                    m.truncate(len);
                    m
                })
                .collect();
            groups_g.push((0..d_g).collect());
            let mut groups_m: Vec<Vec<usize>> = (0..cols)
                .map(|_| vec![rng.gen_range(0..d_m)])
                .collect();
            groups_m.push((0..d_m).collect());
            let gs_g = GroupStructure::new(groups_g, d_g).unwrap();
            let gs_m = GroupStructure::new(groups_m, d_m).unwrap();

            let mut hit = vec![vec![false; gs_m.group_count()]; gs_g.group_count()];
            for row in hit.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.gen_bool(0.4);
                }
            }
            let base = expand_to_variables(&hit, &gs_g, &gs_m).unwrap();

            // Flip one more hit on.
            let g = rng.gen_range(0..gs_g.group_count());
            let m = rng.gen_range(0..gs_m.group_count());
            hit[g][m] = true;
            let bigger = expand_to_variables(&hit, &gs_g, &gs_m).unwrap();
            for j in 0..base.n_rows() {
                for jp in 0..base.n_cols() {
                    prop_assert!(!base.is_hit(j, jp) || bigger.is_hit(j, jp));
                }
            }
        }

        /// The full hit matrix sets exactly the product of the two unions.
        #[test]
        fn expand_full_hit_is_union_product(d_g in 1usize..6, d_m in 1usize..6) {
            let gs_g = GroupStructure::new(
                (0..d_g).map(|j| vec![j]).collect(), d_g).unwrap();
            let gs_m = GroupStructure::new(
                (0..d_m).map(|j| vec![j]).collect(), d_m).unwrap();
            let hit = vec![vec![true; d_m]; d_g];
            let out = expand_to_variables(&hit, &gs_g, &gs_m).unwrap();
            prop_assert_eq!(out.count_nonzero(), d_g * d_m);
        }
    }
}
