//! Greedy exploration of the two hierarchies over height pairs (k, l).
//!
//! An alternative to flattening: each cell (k, l) compresses both views at
//! those heights, builds the interaction-feature matrix and fits a forward
//! stepwise model; a convex-trend criterion (AIC/BIC) with two early
//! stopping rules prunes the grid. Off by default in the pipeline, exposed
//! as its own subcommand.

use crate::cluster::Hierarchy;
use crate::compress::{compress, Summary, WeightedGroupSet};
use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Elementwise products of every supervariable pair, ordered g-major
/// m-minor: column `g * N_M + m` is `svg[:, g] * svm[:, m]`.
pub fn build_interaction_features(sv_g: &Array2<f64>, sv_m: &Array2<f64>) -> Result<Array2<f64>> {
    let n = sv_g.nrows();
    if sv_m.nrows() != n {
        return Err(Error::DimensionMismatch("interaction feature inputs".into()));
    }
    let (n_g, n_m) = (sv_g.ncols(), sv_m.ncols());
    let mut phi = Array2::zeros((n, n_g * n_m));
    for g in 0..n_g {
        for m in 0..n_m {
            let col = g * n_m + m;
            for i in 0..n {
                phi[(i, col)] = sv_g[(i, g)] * sv_m[(i, m)];
            }
        }
    }
    Ok(phi)
}

/// Stopping configuration for the forward stepwise selection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActiveSetConfig {
    /// Hard cap on selected features; 0 means the empty model.
    pub max_features: usize,
    /// Stop when the best |corr(feature, residual)| falls below this.
    pub min_abs_corr: f64,
    /// Stop (and revert the last addition) when the training MSE improves
    /// by less than this.
    pub min_mse_improvement: f64,
}

impl Default for ActiveSetConfig {
    fn default() -> Self {
        ActiveSetConfig {
            max_features: 20,
            min_abs_corr: 1e-6,
            min_mse_improvement: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActiveSetFit {
    /// Selected feature indices in selection order.
    pub active_set: Vec<usize>,
    /// OLS coefficients aligned with `active_set` (centered model).
    pub coefficients: Vec<f64>,
    pub mse: f64,
    /// Candidates skipped because adding them made the design singular.
    pub skipped: Vec<usize>,
}

/// Forward stepwise selection: repeatedly add the feature most correlated
/// with the residual and refit OLS on the active set until a stopping rule
/// fires. `y` and the columns are centered internally.
pub fn active_set_fit(
    phi: &Array2<f64>,
    y: &Array1<f64>,
    stop: &ActiveSetConfig,
) -> Result<ActiveSetFit> {
    let (n, d) = phi.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch("response".into()));
    }
    let y_mean = y.sum() / n as f64;
    let y_c = y.mapv(|v| v - y_mean);
    let mut centered = phi.clone();
    for j in 0..d {
        let mean = centered.column(j).sum() / n as f64;
        centered.column_mut(j).mapv_inplace(|v| v - mean);
    }

    let mut active: Vec<usize> = Vec::new();
    let mut coefficients: Vec<f64> = Vec::new();
    let mut skipped: Vec<usize> = Vec::new();
    let mut residual = y_c.clone();
    let mut mse = residual.dot(&residual) / n as f64;

    while active.len() < stop.max_features {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..d {
            if active.contains(&j) || skipped.contains(&j) {
                continue;
            }
            let corr = linalg::pearson(centered.column(j), residual.view()).abs();
            if best.map_or(true, |(_, c)| corr > c) {
                best = Some((j, corr));
            }
        }
        let Some((candidate, corr)) = best else {
            break; // no candidates left
        };
        if corr < stop.min_abs_corr {
            break;
        }
        // Refit OLS including the candidate.
        let trial: Vec<usize> = active.iter().copied().chain([candidate]).collect();
        let mut design = Array2::zeros((n, trial.len()));
        for (c, &j) in trial.iter().enumerate() {
            design.column_mut(c).assign(&centered.column(j));
        }
        let (theta, _) = match linalg::ols(design.view(), y_c.view()) {
            Ok(fit) => fit,
            Err(Error::SingularDesign) => {
                skipped.push(candidate);
                continue;
            }
            Err(e) => return Err(e),
        };
        let fitted = design.dot(&theta);
        let new_residual = &y_c - &fitted;
        let new_mse = new_residual.dot(&new_residual) / n as f64;
        if mse - new_mse < stop.min_mse_improvement {
            break; // improvement too small: revert the addition
        }
        active = trial;
        coefficients = theta.to_vec();
        residual = new_residual;
        mse = new_mse;
    }
    Ok(ActiveSetFit {
        active_set: active,
        coefficients,
        mse,
        skipped,
    })
}

/// Model-complexity criterion evaluated per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExploreCriterion {
    Aic,
    Bic,
}

impl ExploreCriterion {
    /// Gaussian OLS criterion with `|active| + 1` parameters.
    pub fn value(&self, n: usize, mse: f64, n_active: usize) -> f64 {
        let n = n as f64;
        let params = (n_active + 1) as f64;
        let fit = n * mse.max(1e-300).ln();
        match self {
            ExploreCriterion::Aic => fit + 2.0 * params,
            ExploreCriterion::Bic => fit + params * n.ln(),
        }
    }
}

/// Rule resolving between two candidate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Smaller criterion wins.
    Criterion,
    /// Smaller training MSE wins.
    Mse,
    /// Fewer variable-level interactions wins.
    Sparsest,
}

/// Everything the explorer needs to compare candidate cells.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CellEval {
    pub criterion: f64,
    pub mse: f64,
    pub n_active: usize,
    /// Variable-level interaction count of the active pairs.
    pub variable_interactions: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VisitRecord {
    pub k: usize,
    pub l: usize,
    pub criterion: f64,
    pub n_active: usize,
}

fn preferred(rule: TieRule, new: &CellEval, incumbent: &CellEval) -> bool {
    match rule {
        TieRule::Criterion => new.criterion < incumbent.criterion,
        TieRule::Mse => new.mse < incumbent.mse,
        TieRule::Sparsest => new.variable_interactions < incumbent.variable_interactions,
    }
}

/// Core greedy traversal over an (outer, inner) grid of levels.
///
/// Walks the inner axis at each outer level, stopping the inner run when
/// the criterion rises along it (first rule) or exceeds the cached value of
/// the best outer level at the same inner position (second rule, inactive
/// until a best model exists). The best cell of each run challenges the
/// incumbent under the tie rule. Returns the winning (outer, inner) cell
/// and the visit trace.
pub fn explore_grid<F>(
    outer_levels: usize,
    inner_levels: usize,
    mut eval: F,
    rule: TieRule,
) -> Result<(usize, usize, CellEval, Vec<(usize, usize, CellEval)>)>
where
    F: FnMut(usize, usize) -> Result<CellEval>,
{
    if outer_levels == 0 || inner_levels == 0 {
        return Err(Error::Config("explorer needs at least one level per axis".into()));
    }
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut visits: Vec<(usize, usize, CellEval)> = Vec::new();
    let mut best: Option<(usize, usize, CellEval)> = None;

    for outer in 0..outer_levels {
        let mut run_best: Option<(usize, CellEval)> = None;
        let mut prev_criterion = f64::INFINITY;
        for inner in 0..inner_levels {
            let cell = eval(outer, inner)?;
            cache.insert((outer, inner), cell.criterion);
            visits.push((outer, inner, cell));
            if run_best.map_or(true, |(_, rb)| cell.criterion < rb.criterion) {
                run_best = Some((inner, cell));
            }
            let rises_along_inner = inner > 0 && cell.criterion > prev_criterion;
            let worse_than_best_level = best.as_ref().is_some_and(|&(bo, _, _)| {
                cache
                    .get(&(bo, inner))
                    .is_some_and(|&c| cell.criterion > c)
            });
            prev_criterion = cell.criterion;
            if rises_along_inner || worse_than_best_level {
                break;
            }
        }
        if let Some((inner, cell)) = run_best {
            let take = match &best {
                None => true,
                Some((_, _, incumbent)) => preferred(rule, &cell, incumbent),
            };
            if take {
                best = Some((outer, inner, cell));
            }
        }
    }
    let (outer, inner, cell) = best.expect("at least one cell visited");
    Ok((outer, inner, cell, visits))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub criterion: ExploreCriterion,
    pub rule: TieRule,
    /// `None` puts the deeper hierarchy on the outer loop; `Some(true)`
    /// swaps the auto choice.
    pub swap_axes: Option<bool>,
    pub active_set: ActiveSetConfig,
    pub summary: Summary,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            criterion: ExploreCriterion::Bic,
            rule: TieRule::Criterion,
            swap_axes: None,
            active_set: ActiveSetConfig::default(),
            summary: Summary::Mean,
        }
    }
}

/// The chosen model: heights, its interaction features and coefficients.
#[derive(Debug, Clone)]
pub struct HeightModel {
    pub k: usize,
    pub l: usize,
    pub interaction_features: Array2<f64>,
    pub active_set: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub criterion_value: f64,
    pub mse: f64,
}

#[derive(Debug, Clone)]
pub struct ExploreResult {
    pub best: HeightModel,
    pub trace: Vec<VisitRecord>,
    /// True when the outer loop ran over view G's heights.
    pub outer_is_g: bool,
}

/// Supervariable columns of one view at every tree level, built lazily.
struct LevelCache<'a> {
    x: &'a Array2<f64>,
    hierarchy: &'a Hierarchy,
    summary: Summary,
    levels: Vec<Option<(Array2<f64>, Vec<Vec<usize>>)>>,
}

impl<'a> LevelCache<'a> {
    fn new(x: &'a Array2<f64>, hierarchy: &'a Hierarchy, summary: Summary) -> Self {
        LevelCache {
            x,
            hierarchy,
            summary,
            levels: vec![None; hierarchy.leaf_count()],
        }
    }

    fn level_count(&self) -> usize {
        self.hierarchy.leaf_count()
    }

    fn at(&mut self, level: usize) -> Result<&(Array2<f64>, Vec<Vec<usize>>)> {
        if self.levels[level].is_none() {
            let k_clusters = self.hierarchy.leaf_count() - level;
            let partition = self.hierarchy.cut(k_clusters)?;
            let wgs = WeightedGroupSet::from_partition(&partition, self.x.ncols())?;
            let sv = compress(self.x, &wgs, self.summary)?;
            self.levels[level] = Some((sv.columns, partition));
        }
        Ok(self.levels[level].as_ref().unwrap())
    }
}

/// Full greedy exploration over both hierarchies: level `t` of a hierarchy
/// is its partition after `t` merges (level 0 = leaves). Returns the chosen
/// height model and the visited-cell trace.
pub fn explore(
    x_g: &Array2<f64>,
    x_m: &Array2<f64>,
    h_g: &Hierarchy,
    h_m: &Hierarchy,
    y: &Array1<f64>,
    cfg: &ExploreConfig,
) -> Result<ExploreResult> {
    let mut cache_g = LevelCache::new(x_g, h_g, cfg.summary);
    let mut cache_m = LevelCache::new(x_m, h_m, cfg.summary);
    let depth_g = cache_g.level_count();
    let depth_m = cache_m.level_count();
    let auto_outer_is_g = depth_g >= depth_m;
    let outer_is_g = match cfg.swap_axes {
        Some(true) => !auto_outer_is_g,
        _ => auto_outer_is_g,
    };
    let (outer_levels, inner_levels) = if outer_is_g {
        (depth_g, depth_m)
    } else {
        (depth_m, depth_g)
    };
    let n = y.len();

    let mut evaluate = |outer: usize, inner: usize| -> Result<CellEval> {
        let (k, l) = if outer_is_g { (outer, inner) } else { (inner, outer) };
        let (sv_g, parts_g) = cache_g.at(k)?.clone();
        let (sv_m, parts_m) = cache_m.at(l)?.clone();
        let phi = build_interaction_features(&sv_g, &sv_m)?;
        let fit = active_set_fit(&phi, y, &cfg.active_set)?;
        let n_m = sv_m.ncols();
        let variable_interactions = fit
            .active_set
            .iter()
            .map(|&col| parts_g[col / n_m].len() * parts_m[col % n_m].len())
            .sum();
        Ok(CellEval {
            criterion: cfg.criterion.value(n, fit.mse, fit.active_set.len()),
            mse: fit.mse,
            n_active: fit.active_set.len(),
            variable_interactions,
        })
    };

    let (best_outer, best_inner, best_cell, visits) =
        explore_grid(outer_levels, inner_levels, &mut evaluate, cfg.rule)?;
    let (k, l) = if outer_is_g {
        (best_outer, best_inner)
    } else {
        (best_inner, best_outer)
    };

    // Rebuild the winning cell's model.
    let (sv_g, _) = cache_g.at(k)?.clone();
    let (sv_m, _) = cache_m.at(l)?.clone();
    let phi = build_interaction_features(&sv_g, &sv_m)?;
    let fit = active_set_fit(&phi, y, &cfg.active_set)?;
    let trace = visits
        .iter()
        .map(|&(outer, inner, cell)| {
            let (k, l) = if outer_is_g { (outer, inner) } else { (inner, outer) };
            VisitRecord {
                k,
                l,
                criterion: cell.criterion,
                n_active: cell.n_active,
            }
        })
        .collect();
    Ok(ExploreResult {
        best: HeightModel {
            k,
            l,
            interaction_features: phi,
            active_set: fit.active_set,
            coefficients: fit.coefficients,
            criterion_value: best_cell.criterion,
            mse: fit.mse,
        },
        trace,
        outer_is_g,
    })
}

/// Audit TSV of the visited cells.
pub fn trace_tsv(trace: &[VisitRecord]) -> String {
    let mut out = String::from("k\tl\tcriterion\tn_active\n");
    for v in trace {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", v.k, v.l, v.criterion, v.n_active));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{ward_cluster, Dissimilarity};
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn feature_matrix_counts_and_products() {
        let sv_g = array![[1.0, 2.0], [3.0, 4.0]];
        let sv_m = array![[5.0, 6.0], [7.0, 8.0]];
        let phi = build_interaction_features(&sv_g, &sv_m).unwrap();
        assert_eq!(phi.ncols(), 4);
        // Brute-force products, g-major ordering.
        for g in 0..2 {
            for m in 0..2 {
                for i in 0..2 {
                    assert_eq!(phi[(i, g * 2 + m)], sv_g[(i, g)] * sv_m[(i, m)]);
                }
            }
        }
    }

    #[test]
    fn degenerate_single_group_scales() {
        let sv_g = array![[2.0], [3.0]];
        let sv_m = array![[1.0, -1.0], [0.5, 2.0]];
        let phi = build_interaction_features(&sv_g, &sv_m).unwrap();
        assert_eq!(phi.ncols(), 2);
        for i in 0..2 {
            assert_eq!(phi[(i, 0)], sv_g[(i, 0)] * sv_m[(i, 0)]);
            assert_eq!(phi[(i, 1)], sv_g[(i, 0)] * sv_m[(i, 1)]);
        }
    }

    #[test]
    fn perfect_column_enters_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let phi = Array2::from_shape_fn((n, 6), |_| rng.gen_range(-1.0..1.0));
        let y = phi.column(4).to_owned();
        let fit = active_set_fit(&phi, &y, &ActiveSetConfig::default()).unwrap();
        assert_eq!(fit.active_set[0], 4);
        assert!(fit.mse < 1e-20, "mse {}", fit.mse);
    }

    #[test]
    fn max_features_zero_gives_empty_model() {
        let phi = array![[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]];
        let y = array![1.0, 2.0, 3.0];
        let stop = ActiveSetConfig {
            max_features: 0,
            ..ActiveSetConfig::default()
        };
        let fit = active_set_fit(&phi, &y, &stop).unwrap();
        assert!(fit.active_set.is_empty());
        assert!(fit.coefficients.is_empty());
    }

    #[test]
    fn selection_order_matches_greedy_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50;
        let phi = Array2::from_shape_fn((n, 8), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| {
            2.0 * phi[(i, 1)] - 1.5 * phi[(i, 6)] + 0.5 * phi[(i, 3)]
                + 0.01 * rng.gen_range(-1.0..1.0)
        });
        let stop = ActiveSetConfig {
            max_features: 3,
            ..ActiveSetConfig::default()
        };
        let fit = active_set_fit(&phi, &y, &stop).unwrap();

        // Brute-force greedy oracle recomputing all correlations per step.
        let y_mean = y.sum() / n as f64;
        let y_c = y.mapv(|v| v - y_mean);
        let mut centered = phi.clone();
        for j in 0..8 {
            let m = centered.column(j).sum() / n as f64;
            centered.column_mut(j).mapv_inplace(|v| v - m);
        }
        let mut active: Vec<usize> = Vec::new();
        let mut residual = y_c.clone();
        for _ in 0..3 {
            let (mut best_j, mut best_c) = (usize::MAX, -1.0);
            for j in 0..8 {
                if active.contains(&j) {
                    continue;
                }
                let c = linalg::pearson(centered.column(j), residual.view()).abs();
                if c > best_c {
                    best_c = c;
                    best_j = j;
                }
            }
            active.push(best_j);
            let mut design = Array2::zeros((n, active.len()));
            for (c, &j) in active.iter().enumerate() {
                design.column_mut(c).assign(&centered.column(j));
            }
            let (theta, _) = linalg::ols(design.view(), y_c.view()).unwrap();
            residual = &y_c - &design.dot(&theta);
        }
        assert_eq!(fit.active_set, active);
    }

    #[test]
    fn training_mse_non_increasing_in_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 45;
        let phi = Array2::from_shape_fn((n, 10), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        let mut prev = f64::INFINITY;
        for max_features in 0..6 {
            let stop = ActiveSetConfig {
                max_features,
                min_mse_improvement: 0.0,
                ..ActiveSetConfig::default()
            };
            let fit = active_set_fit(&phi, &y, &stop).unwrap();
            assert!(fit.mse <= prev + 1e-12);
            prev = fit.mse;
        }
    }

    #[test]
    fn collinear_candidate_is_skipped_with_note() {
        // With the correlation and improvement thresholds disabled, the
        // stepwise loop eventually reaches the duplicated column; its
        // addition is singular and must be skipped, not fatal.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 30;
        let a = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0f64));
        let b = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0f64));
        let mut phi = Array2::zeros((n, 3));
        phi.column_mut(0).assign(&a);
        phi.column_mut(1).assign(&(&a * 2.0)); // collinear with column 0
        phi.column_mut(2).assign(&b);
        let y = &a + &(&b * 0.2);
        let stop = ActiveSetConfig {
            max_features: 3,
            min_abs_corr: 0.0,
            min_mse_improvement: -1.0,
        };
        let fit = active_set_fit(&phi, &y, &stop).unwrap();
        assert_eq!(fit.skipped, vec![1]);
        assert_eq!(fit.active_set, vec![0, 2]);
    }

    /// Synthetic separable convex surface for the grid explorer.
    fn quadratic_surface(
        a: f64,
        b: f64,
        k0: f64,
        l0: f64,
    ) -> impl FnMut(usize, usize) -> Result<CellEval> {
        move |outer, inner| {
            let c = a * (outer as f64 - k0).powi(2) + b * (inner as f64 - l0).powi(2);
            Ok(CellEval {
                criterion: c,
                mse: c,
                n_active: 1,
                variable_interactions: 1,
            })
        }
    }

    #[test]
    fn explorer_finds_grid_optimum_with_fewer_visits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let outer_levels = rng.gen_range(2..7usize);
            let inner_levels = rng.gen_range(4..8usize);
            let a = rng.gen_range(0.5..3.0);
            let b = rng.gen_range(0.5..3.0);
            let k0 = rng.gen_range(0.0..(outer_levels as f64 - 1.0)) + 0.21;
            let l0 = rng.gen_range(0.0..(inner_levels as f64 - 3.0)) + 0.17;
            let mut eval = quadratic_surface(a, b, k0, l0);
            let (bo, bi, cell, visits) =
                explore_grid(outer_levels, inner_levels, &mut eval, TieRule::Criterion).unwrap();
            // Exhaustive-grid oracle.
            let mut oracle = quadratic_surface(a, b, k0, l0);
            let mut best = (0usize, 0usize, f64::INFINITY);
            for o in 0..outer_levels {
                for i in 0..inner_levels {
                    let c = oracle(o, i).unwrap().criterion;
                    if c < best.2 {
                        best = (o, i, c);
                    }
                }
            }
            assert_eq!((bo, bi), (best.0, best.1), "surface a={a} b={b} k0={k0} l0={l0}");
            assert_relative_eq!(cell.criterion, best.2, epsilon = 1e-12);
            assert!(
                visits.len() < outer_levels * inner_levels,
                "visited {} of {}",
                visits.len(),
                outer_levels * inner_levels
            );
        }
    }

    #[test]
    fn single_cell_grid_visits_once() {
        let mut eval = |_, _| {
            Ok(CellEval {
                criterion: 1.0,
                mse: 1.0,
                n_active: 0,
                variable_interactions: 0,
            })
        };
        let (bo, bi, _, visits) = explore_grid(1, 1, &mut eval, TieRule::Criterion).unwrap();
        assert_eq!((bo, bi), (0, 0));
        assert_eq!(visits.len(), 1);
    }

    #[test]
    fn monotone_criterion_stops_inner_immediately() {
        // Strictly increasing along both axes: the first inner run visits
        // exactly (0,0) and (0,1); later outer levels stop at their first
        // cell via the second rule.
        let mut eval = |outer: usize, inner: usize| {
            Ok(CellEval {
                criterion: (outer * 10 + inner) as f64,
                mse: 1.0,
                n_active: 0,
                variable_interactions: 0,
            })
        };
        let (bo, bi, _, visits) = explore_grid(3, 4, &mut eval, TieRule::Criterion).unwrap();
        assert_eq!((bo, bi), (0, 0));
        let row0: Vec<(usize, usize)> = visits
            .iter()
            .filter(|(o, _, _)| *o == 0)
            .map(|(o, i, _)| (*o, *i))
            .collect();
        assert_eq!(row0, vec![(0, 0), (0, 1)]);
        for (o, i, _) in visits.iter().filter(|(o, _, _)| *o > 0) {
            assert_eq!(*i, 0, "outer level {o} went past its first cell");
        }
    }

    #[test]
    fn visited_cells_form_prefix_staircase() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let vals: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..5).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let mut eval = |o: usize, i: usize| {
                Ok(CellEval {
                    criterion: vals[o][i],
                    mse: vals[o][i],
                    n_active: 0,
                    variable_interactions: 0,
                })
            };
            let (_, _, _, visits) = explore_grid(5, 5, &mut eval, TieRule::Criterion).unwrap();
            let visited: std::collections::HashSet<(usize, usize)> =
                visits.iter().map(|(o, i, _)| (*o, *i)).collect();
            for &(o, i) in &visited {
                if i > 0 {
                    assert!(visited.contains(&(o, i - 1)), "hole before ({o},{i})");
                }
            }
        }
    }

    #[test]
    fn returned_criterion_is_minimum_of_visits_under_criterion_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..6).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();
        let mut eval = |o: usize, i: usize| {
            Ok(CellEval {
                criterion: vals[o][i],
                mse: vals[o][i],
                n_active: 0,
                variable_interactions: 0,
            })
        };
        let (_, _, best, visits) = explore_grid(6, 6, &mut eval, TieRule::Criterion).unwrap();
        for (_, _, cell) in &visits {
            assert!(best.criterion <= cell.criterion + 1e-15);
        }
    }

    #[test]
    fn full_explore_on_real_hierarchies() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 50;
        let x_g = Array2::from_shape_fn((n, 6), |_| rng.gen_range(-1.0..1.0));
        let x_m = Array2::from_shape_fn((n, 4), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| {
            x_g[(i, 0)] * x_m[(i, 2)] + 0.05 * rng.gen_range(-1.0..1.0)
        });
        let h_g = ward_cluster(&x_g, Dissimilarity::EuclideanOnColumns).unwrap();
        let h_m = ward_cluster(&x_m, Dissimilarity::EuclideanOnColumns).unwrap();
        let result = explore(&x_g, &x_m, &h_g, &h_m, &y, &ExploreConfig::default()).unwrap();
        // Deeper hierarchy (G, 6 leaves) drives the outer loop.
        assert!(result.outer_is_g);
        assert!(!result.trace.is_empty());
        assert!(result.best.k < 6 && result.best.l < 4);
        assert!(!result.best.active_set.is_empty());
        let tsv = trace_tsv(&result.trace);
        assert!(tsv.starts_with("k\tl\t"));

        // The swap flag flips the loop orientation.
        let swapped = explore(
            &x_g,
            &x_m,
            &h_g,
            &h_m,
            &y,
            &ExploreConfig {
                swap_axes: Some(true),
                ..ExploreConfig::default()
            },
        )
        .unwrap();
        assert!(!swapped.outer_is_g);
    }
}
