//! Weighted Lasso over a lambda path by cyclic coordinate descent.
//!
//! The objective is `(1/(2N)) * ||y - X beta||^2 + lambda * sum_j rho_j |beta_j|`
//! with per-feature penalty factors `rho_j`. All KKT bookkeeping below uses
//! this normalization: writing `g_j = x_j^T r / N` for the gradient of the
//! smooth part, a solution satisfies `|g_j| <= lambda * rho_j` for inactive
//! coordinates and `g_j = sign(beta_j) * lambda * rho_j` for active ones.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the reported lambda is picked from the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionRule {
    /// k-fold cross-validation on mean squared prediction error.
    Cv(usize),
    /// `n log(RSS/n) + |active| log(n)`.
    Bic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoConfig {
    /// Explicit decreasing lambda path; `None` builds the automatic grid.
    pub lambdas: Option<Vec<f64>>,
    /// Length of the automatic grid.
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of lambda_max. Defaults to 1e-3, or
    /// 1e-2 when there are more features than samples.
    pub lambda_min_ratio: Option<f64>,
    /// Per-feature penalty factors; `None` means all ones.
    pub penalty_factors: Option<Vec<f64>>,
    /// Maximum coordinate-descent sweeps per lambda.
    pub max_iter: usize,
    /// KKT tolerance on the gradient scale.
    pub tol: f64,
    pub selection_rule: SelectionRule,
    /// Seed for the deterministic CV fold split.
    pub seed: u64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambdas: None,
            n_lambda: 100,
            lambda_min_ratio: None,
            penalty_factors: None,
            max_iter: 100_000,
            tol: 1e-6,
            selection_rule: SelectionRule::Cv(10),
            seed: 0,
        }
    }
}

/// Coefficients at one lambda of the path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub rss: f64,
    pub n_active: usize,
}

/// Result of one weighted-Lasso path fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub active_set: Vec<usize>,
    pub lambda_selected: f64,
    pub intercept: f64,
    pub objective: f64,
    pub path: Vec<PathPoint>,
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest absolute KKT violation of `beta` for the stated objective:
/// zero means an exact solution.
pub fn kkt_max_violation(
    x: ArrayView2<'_, f64>,
    y_centered: ArrayView1<'_, f64>,
    beta: &[f64],
    lambda: f64,
    penalty_factors: &[f64],
) -> f64 {
    let n = x.nrows() as f64;
    let mut residual = y_centered.to_owned();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            residual.scaled_add(-b, &x.column(j));
        }
    }
    let mut worst = 0.0f64;
    for j in 0..x.ncols() {
        let g = x.column(j).dot(&residual) / n;
        let bound = lambda * penalty_factors[j];
        let violation = if beta[j] == 0.0 {
            (g.abs() - bound).max(0.0)
        } else {
            (g - beta[j].signum() * bound).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

/// Cyclic coordinate descent at a single lambda, warm-started from `beta`.
/// Sweeps over the active set until stable, then checks the full KKT
/// conditions; repeats until they hold to `tol`. When `objectives` is given
/// it records the objective after every sweep.
fn cd_solve(
    x: &Array2<f64>,
    y: &Array1<f64>,
    col_scale: &[f64], // x_j^T x_j / N
    lambda: f64,
    rho: &[f64],
    beta: &mut [f64],
    max_iter: usize,
    tol: f64,
    mut objectives: Option<&mut Vec<f64>>,
) -> Result<()> {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut residual = y.clone();
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            residual.scaled_add(-b, &x.column(j));
        }
    }
    let inner_tol = (tol * 1e-3).min(1e-9);
    let mut sweeps = 0usize;

    let sweep = |indices: &[usize], beta: &mut [f64], residual: &mut Array1<f64>| -> f64 {
        let mut max_change = 0.0f64;
        for &j in indices {
            let vj = col_scale[j];
            if vj <= 0.0 {
                continue; // constant zero column, beta stays 0
            }
            let old = beta[j];
            let partial = x.column(j).dot(residual) / n + vj * old;
            let new = soft_threshold(partial, lambda * rho[j]) / vj;
            if new != old {
                residual.scaled_add(old - new, &x.column(j));
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    };

    let all: Vec<usize> = (0..d).collect();
    loop {
        // One full pass potentially activates new coordinates.
        sweep(&all, beta, &mut residual);
        sweeps += 1;
        if let Some(track) = objectives.as_deref_mut() {
            track.push(objective_value(&residual, beta, lambda, rho));
        }
        // Iterate the active set to convergence.
        loop {
            let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
            if active.is_empty() {
                break;
            }
            let change = sweep(&active, beta, &mut residual);
            sweeps += 1;
            if let Some(track) = objectives.as_deref_mut() {
                track.push(objective_value(&residual, beta, lambda, rho));
            }
            if change < inner_tol {
                break;
            }
            if sweeps > max_iter {
                return Err(Error::NoConvergence(lambda));
            }
        }
        // Refresh the residual to purge accumulated float drift, then test
        // optimality over all coordinates.
        residual.assign(y);
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                residual.scaled_add(-b, &x.column(j));
            }
        }
        let mut worst = 0.0f64;
        for j in 0..d {
            let g = x.column(j).dot(&residual) / n;
            let bound = lambda * rho[j];
            let violation = if beta[j] == 0.0 {
                (g.abs() - bound).max(0.0)
            } else {
                (g - beta[j].signum() * bound).abs()
            };
            worst = worst.max(violation);
        }
        if worst <= tol {
            return Ok(());
        }
        if sweeps > max_iter {
            return Err(Error::NoConvergence(lambda));
        }
    }
}

fn objective_value(residual: &Array1<f64>, beta: &[f64], lambda: f64, rho: &[f64]) -> f64 {
    let n = residual.len() as f64;
    let rss: f64 = residual.dot(residual);
    let penalty: f64 = beta
        .iter()
        .zip(rho.iter())
        .map(|(b, r)| r * b.abs())
        .sum();
    rss / (2.0 * n) + lambda * penalty
}

fn resolve_penalty(cfg: &LassoConfig, d: usize) -> Result<Vec<f64>> {
    match &cfg.penalty_factors {
        None => Ok(vec![1.0; d]),
        Some(rho) => {
            if rho.len() != d {
                return Err(Error::DimensionMismatch("penalty factors".into()));
            }
            if rho.iter().any(|r| !r.is_finite() || *r <= 0.0) {
                return Err(Error::NonFiniteInput("penalty factors".into()));
            }
            Ok(rho.clone())
        }
    }
}

/// Largest lambda with an all-zero solution under the stated normalization.
pub fn lambda_max(x: &Array2<f64>, y_centered: &Array1<f64>, rho: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|j| x.column(j).dot(y_centered).abs() / (n * rho[j]))
        .fold(0.0f64, f64::max)
}

fn build_path(cfg: &LassoConfig, x: &Array2<f64>, y_centered: &Array1<f64>, rho: &[f64]) -> Result<Vec<f64>> {
    if let Some(path) = &cfg.lambdas {
        if path.is_empty() {
            return Err(Error::Config("empty lambda path".into()));
        }
        if path.windows(2).any(|w| w[1] >= w[0]) || path.iter().any(|l| *l <= 0.0) {
            return Err(Error::Config(
                "lambda path must be strictly decreasing and positive".into(),
            ));
        }
        return Ok(path.clone());
    }
    if cfg.n_lambda == 0 {
        return Err(Error::Config("n_lambda must be positive".into()));
    }
    let (n, d) = x.dim();
    let ratio = cfg
        .lambda_min_ratio
        .unwrap_or(if d > n { 1e-2 } else { 1e-3 });
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "lambda_min_ratio must be in (0, 1), got {ratio}"
        )));
    }
    let top = lambda_max(x, y_centered, rho).max(1e-12);
    if cfg.n_lambda == 1 {
        return Ok(vec![top]);
    }
    let log_top = top.ln();
    let log_bottom = (top * ratio).ln();
    let step = (log_bottom - log_top) / (cfg.n_lambda - 1) as f64;
    Ok((0..cfg.n_lambda)
        .map(|i| (log_top + step * i as f64).exp())
        .collect())
}

fn fit_path(
    x: &Array2<f64>,
    y_centered: &Array1<f64>,
    lambdas: &[f64],
    rho: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<Vec<PathPoint>> {
    let d = x.ncols();
    let n = x.nrows();
    let col_scale: Vec<f64> = (0..d)
        .map(|j| x.column(j).dot(&x.column(j)) / n as f64)
        .collect();
    let mut beta = vec![0.0; d];
    let mut path = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        cd_solve(x, y_centered, &col_scale, lambda, rho, &mut beta, max_iter, tol, None)?;
        let mut residual = y_centered.clone();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                residual.scaled_add(-b, &x.column(j));
            }
        }
        let n_active = beta.iter().filter(|b| **b != 0.0).count();
        path.push(PathPoint {
            lambda,
            beta: beta.clone(),
            rss: residual.dot(&residual),
            n_active,
        });
        // With more features than samples the deep tail is ill-posed
        // (non-unique solutions, collinear active sets) and no selection
        // rule can use it; truncate the descent before it saturates.
        if d > n && n_active >= (0.8 * n as f64) as usize {
            break;
        }
    }
    Ok(path)
}

/// Deterministic k-fold assignment: shuffle sample indices with the seed and
/// deal them round-robin.
pub fn cv_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

/// OLS refit on an active subset: columns are centered (the intercept is
/// the response mean) and a tiny ridge keeps near-duplicate supervariable
/// columns solvable. Returns the coefficients and the column means used,
/// or `None` when the subset is empty or larger than the sample.
fn active_refit(
    x: &Array2<f64>,
    y_centered: &Array1<f64>,
    active: &[usize],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.nrows();
    if active.is_empty() || active.len() + 1 >= n {
        return None;
    }
    let k = active.len();
    let mut design = Array2::zeros((n, k));
    let mut means = Vec::with_capacity(k);
    for (c, &j) in active.iter().enumerate() {
        let mean = x.column(j).sum() / n as f64;
        means.push(mean);
        design
            .column_mut(c)
            .assign(&x.column(j).mapv(|v| v - mean));
    }
    let mut gram = design.t().dot(&design);
    let trace: f64 = (0..k).map(|i| gram[(i, i)]).sum();
    let ridge = 1e-10 * (trace / k as f64).max(1.0);
    for i in 0..k {
        gram[(i, i)] += ridge;
    }
    let xty = design.t().dot(y_centered);
    crate::linalg::solve(&gram, &xty)
        .ok()
        .map(|b| (b.to_vec(), means))
}

/// Residual sum of squares of the active-set OLS refit at one path point;
/// falls back to the penalized RSS when the refit is unavailable. Selection
/// scores use these relaxed fits because the penalized RSS understates how
/// much an active set explains.
fn relaxed_rss(x: &Array2<f64>, y_centered: &Array1<f64>, pt: &PathPoint) -> f64 {
    let active: Vec<usize> = pt
        .beta
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect();
    if active.is_empty() {
        return y_centered.dot(y_centered);
    }
    match active_refit(x, y_centered, &active) {
        None => pt.rss,
        Some((coef, means)) => {
            let mut residual = y_centered.clone();
            for (c, &j) in active.iter().enumerate() {
                if coef[c] != 0.0 {
                    residual.scaled_add(-coef[c], &x.column(j).mapv(|v| v - means[c]));
                }
            }
            residual.dot(&residual)
        }
    }
}

/// Picks a lambda from the path by the given rule. CV refits the path on
/// each training split and scores the active-set OLS refits out of sample
/// (the penalized RSS understates what an active set explains, and the
/// held-out evaluation guards the refits against collinear active sets).
/// BIC is `n log(RSS/n) + |active| log(n)` on the penalized path RSS.
/// Reported coefficients stay the penalized solutions either way. Ties
/// break toward the larger lambda.
pub fn select_lambda(
    x: &Array2<f64>,
    y: &Array1<f64>,
    path: &[PathPoint],
    rule: SelectionRule,
    penalty_factors: Option<&[f64]>,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<usize> {
    if path.is_empty() {
        return Err(Error::Config("empty path".into()));
    }
    if path.len() == 1 {
        return Ok(0);
    }
    let n = x.nrows();
    let d = x.ncols();
    let rho = match penalty_factors {
        Some(r) => r.to_vec(),
        None => vec![1.0; d],
    };
    match rule {
        SelectionRule::Bic => {
            let mut best = 0usize;
            let mut best_score = f64::INFINITY;
            for (i, pt) in path.iter().enumerate() {
                let rss = pt.rss.max(1e-300);
                let score =
                    n as f64 * (rss / n as f64).ln() + pt.n_active as f64 * (n as f64).ln();
                if score < best_score {
                    best_score = score;
                    best = i;
                }
            }
            Ok(best)
        }
        SelectionRule::Cv(k) => {
            if k < 2 || k > n {
                return Err(Error::Config(format!("cv folds {k} outside 2..={n}")));
            }
            let fold = cv_folds(n, k, seed);
            let lambdas: Vec<f64> = path.iter().map(|p| p.lambda).collect();
            let mut cv_sse = vec![0.0f64; lambdas.len()];
            for f in 0..k {
                let train_idx: Vec<usize> = (0..n).filter(|i| fold[*i] != f).collect();
                let test_idx: Vec<usize> = (0..n).filter(|i| fold[*i] == f).collect();
                if train_idx.is_empty() || test_idx.is_empty() {
                    continue;
                }
                let mut x_train = Array2::zeros((train_idx.len(), d));
                let mut y_train = Array1::zeros(train_idx.len());
                for (r, &i) in train_idx.iter().enumerate() {
                    x_train.row_mut(r).assign(&x.row(i));
                    y_train[r] = y[i];
                }
                let y_mean = y_train.sum() / y_train.len() as f64;
                y_train.mapv_inplace(|v| v - y_mean);
                let sub_path = fit_path(&x_train, &y_train, &lambdas, &rho, max_iter, tol)?;
                // A fold path truncated at saturation continues with its
                // last (saturated) model for the remaining grid points.
                for li in 0..lambdas.len() {
                    let pt = &sub_path[li.min(sub_path.len() - 1)];
                    let active: Vec<usize> = pt
                        .beta
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| **b != 0.0)
                        .map(|(j, _)| j)
                        .collect();
                    let refit = active_refit(&x_train, &y_train, &active);
                    for &i in &test_idx {
                        let mut pred = y_mean;
                        match &refit {
                            Some((coef, means)) => {
                                for (c, &j) in active.iter().enumerate() {
                                    pred += coef[c] * (x[(i, j)] - means[c]);
                                }
                            }
                            None => {
                                for (j, &b) in pt.beta.iter().enumerate() {
                                    if b != 0.0 {
                                        pred += b * x[(i, j)];
                                    }
                                }
                            }
                        }
                        let err = y[i] - pred;
                        cv_sse[li] += err * err;
                    }
                }
            }
            let mut best = 0usize;
            let mut best_score = f64::INFINITY;
            for (i, sse) in cv_sse.iter().enumerate() {
                if *sse < best_score {
                    best_score = *sse;
                    best = i;
                }
            }
            Ok(best)
        }
    }
}

/// Exactly proportional column pairs make the solution non-unique and
/// stall coordinate descent; only the copy with the smallest effective
/// penalty `rho / ||x||` can carry weight at an optimum, so the others are
/// dropped up front (their coefficients are exactly zero). Returns the kept
/// column indices.
fn drop_proportional_columns(x: &Array2<f64>, rho: &[f64]) -> Vec<usize> {
    let d = x.ncols();
    let norms: Vec<f64> = (0..d)
        .map(|j| x.column(j).dot(&x.column(j)).sqrt())
        .collect();
    let mut kept: Vec<usize> = Vec::with_capacity(d);
    for j in 0..d {
        if norms[j] == 0.0 {
            kept.push(j); // constant-zero column, harmless
            continue;
        }
        let duplicate_of = kept.iter().copied().find(|&k| {
            if norms[k] == 0.0 {
                return false;
            }
            let cos = x.column(j).dot(&x.column(k)) / (norms[j] * norms[k]);
            cos.abs() >= 1.0 - 1e-12
        });
        match duplicate_of {
            None => kept.push(j),
            Some(k) => {
                // Keep whichever has the smaller effective penalty.
                if rho[j] / norms[j] < rho[k] / norms[k] {
                    let pos = kept.iter().position(|&v| v == k).unwrap();
                    kept[pos] = j;
                }
            }
        }
    }
    kept.sort_unstable();
    kept
}

/// Fits the full weighted-Lasso path on standardized columns and picks a
/// lambda by the configured rule. `y` is centered internally and the
/// intercept (its mean) reported separately.
pub fn weighted_lasso_path(x: &Array2<f64>, y: &Array1<f64>, cfg: &LassoConfig) -> Result<LassoFit> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch("response".into()));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("lasso design or response".into()));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Config("tol must be positive".into()));
    }
    let d = x.ncols();
    let rho_full = resolve_penalty(cfg, d)?;
    let y_mean = y.sum() / y.len() as f64;
    let y_centered = y.mapv(|v| v - y_mean);

    let kept = drop_proportional_columns(x, &rho_full);
    let (x_work, rho): (Array2<f64>, Vec<f64>) = if kept.len() == d {
        (x.clone(), rho_full.clone())
    } else {
        let mut reduced = Array2::zeros((x.nrows(), kept.len()));
        for (c, &j) in kept.iter().enumerate() {
            reduced.column_mut(c).assign(&x.column(j));
        }
        (reduced, kept.iter().map(|&j| rho_full[j]).collect())
    };
    let x = &x_work;

    let lambdas = build_path(cfg, x, &y_centered, &rho)?;
    let path = fit_path(x, &y_centered, &lambdas, &rho, cfg.max_iter, cfg.tol)?;
    let chosen = select_lambda(
        x,
        y,
        &path,
        cfg.selection_rule,
        Some(&rho),
        cfg.max_iter,
        cfg.tol,
        cfg.seed,
    )?;
    // Report everything in the caller's full coordinates.
    let expand = |reduced: &[f64]| -> Vec<f64> {
        if kept.len() == d {
            return reduced.to_vec();
        }
        let mut full = vec![0.0; d];
        for (c, &j) in kept.iter().enumerate() {
            full[j] = reduced[c];
        }
        full
    };
    let path: Vec<PathPoint> = path
        .into_iter()
        .map(|pt| PathPoint {
            beta: expand(&pt.beta),
            ..pt
        })
        .collect();
    let point = &path[chosen];
    let beta = point.beta.clone();
    let active_set: Vec<usize> = beta
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect();
    let objective = point.rss / (2.0 * x.nrows() as f64)
        + point.lambda
            * beta
                .iter()
                .zip(rho_full.iter())
                .map(|(b, r)| r * b.abs())
                .sum::<f64>();
    Ok(LassoFit {
        beta,
        active_set,
        lambda_selected: point.lambda,
        intercept: y_mean,
        objective,
        path,
    })
}

/// Single-lambda solve used by white-box tests: returns the coefficient
/// vector and the objective recorded after every coordinate-descent sweep.
#[doc(hidden)]
pub fn solve_at_lambda_traced(
    x: &Array2<f64>,
    y_centered: &Array1<f64>,
    lambda: f64,
    rho: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = x.ncols();
    let n = x.nrows() as f64;
    let col_scale: Vec<f64> = (0..d)
        .map(|j| x.column(j).dot(&x.column(j)) / n)
        .collect();
    let mut beta = vec![0.0; d];
    let mut objectives = Vec::new();
    cd_solve(
        x,
        y_centered,
        &col_scale,
        lambda,
        rho,
        &mut beta,
        max_iter,
        tol,
        Some(&mut objectives),
    )?;
    Ok((beta, objectives))
}
