//! Scoring and study harness: variable-level precision/recall, the
//! Monte-Carlo verifier for the averaged-estimator accuracy bound, and the
//! simulation benchmark comparing the gap-weighted pipeline against its
//! unweighted baseline.

use crate::compress::{compress, Summary, WeightedGroupSet};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::VariableInteractionMatrix;
use crate::pipeline::{analyze, AnalysisOptions, Weighting};
use crate::simulate::{
    simulate_phenotype, simulate_pln_matrix, simulate_snp_matrix, PhenotypeSimConfig,
    PlnSimConfig, SnpSimConfig,
};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "tp")]
    pub true_positive: usize,
    #[serde(rename = "fp")]
    pub false_positive: usize,
    #[serde(rename = "fn")]
    pub false_negative: usize,
    #[serde(rename = "tn")]
    pub true_negative: usize,
}

/// Precision and recall over variable-level hit matrices. A side with no
/// positives leaves the corresponding rate undefined (`None`), never a
/// silent zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub counts: ConfusionCounts,
}

pub fn precision_recall(
    estimated: &VariableInteractionMatrix,
    truth: &VariableInteractionMatrix,
) -> Result<PrecisionRecall> {
    if estimated.n_rows() != truth.n_rows() || estimated.n_cols() != truth.n_cols() {
        return Err(Error::DimensionMismatch("interaction matrices".into()));
    }
    let mut counts = ConfusionCounts {
        true_positive: 0,
        false_positive: 0,
        false_negative: 0,
        true_negative: 0,
    };
    for j in 0..truth.n_rows() {
        for jp in 0..truth.n_cols() {
            match (estimated.is_hit(j, jp), truth.is_hit(j, jp)) {
                (true, true) => counts.true_positive += 1,
                (true, false) => counts.false_positive += 1,
                (false, true) => counts.false_negative += 1,
                (false, false) => counts.true_negative += 1,
            }
        }
    }
    let ratio = |num: usize, denom: usize| {
        if denom == 0 {
            None
        } else {
            Some(num as f64 / denom as f64)
        }
    };
    Ok(PrecisionRecall {
        precision: ratio(
            counts.true_positive,
            counts.true_positive + counts.false_positive,
        ),
        recall: ratio(
            counts.true_positive,
            counts.true_positive + counts.false_negative,
        ),
        counts,
    })
}

/// Configuration of the averaged-estimator accuracy check: a single group
/// of `group_size` equicorrelated predictors with known coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremCheckConfig {
    pub group_size: usize,
    pub rho: f64,
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub n_mc: usize,
    pub n_samples: usize,
    /// Construct designs with exactly the requested Gram matrix instead of
    /// sampling rows and standardizing.
    pub exact_gram: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TheoremCheckResult {
    pub mse_ols: f64,
    pub mse_averaged: f64,
    /// `mse_averaged - mse_ols` from the Monte-Carlo runs.
    pub mc_difference: f64,
    /// Paired Monte-Carlo standard error of the difference.
    pub se_difference: f64,
    /// Correlation above which averaging is predicted to win. `-inf` when
    /// the coefficients are all equal (averaging always wins).
    pub predicted_threshold: f64,
    /// `-sigma^2 (m-1)/(1-rho) + sum_j (beta_j - mean)^2`.
    pub analytic_difference: f64,
}

/// Symmetric square root of the equicorrelation matrix `(1-rho) I + rho 11'`.
fn equicorrelation_sqrt(m: usize, rho: f64) -> Array2<f64> {
    let a = (1.0 - rho).sqrt();
    let b = ((1.0 + (m as f64 - 1.0) * rho).sqrt() - a) / m as f64;
    Array2::from_shape_fn((m, m), |(i, j)| if i == j { a + b } else { b })
}

fn gram_schmidt(x: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, m) = x.dim();
    let mut q = x.clone();
    for j in 0..m {
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let prev = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-proj, &prev);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm < 1e-10 || n < m {
            return Err(Error::SingularDesign);
        }
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    Ok(q)
}

/// Monte-Carlo comparison of OLS against the constrained equal-coefficient
/// estimator (all coefficients replaced by their mean) on one group of
/// equicorrelated predictors, together with the closed-form gain threshold.
pub fn averaged_estimator_gain(cfg: &TheoremCheckConfig) -> Result<TheoremCheckResult> {
    let m = cfg.group_size;
    if m < 2 {
        return Err(Error::Config("group_size must be at least 2".into()));
    }
    if cfg.beta.len() != m {
        return Err(Error::DimensionMismatch("beta length".into()));
    }
    let rho_floor = -1.0 / (m as f64 - 1.0);
    if !(cfg.rho > rho_floor && cfg.rho < 1.0) {
        return Err(Error::Config(format!(
            "rho {} outside ({rho_floor}, 1)",
            cfg.rho
        )));
    }
    if cfg.n_samples <= m + 1 {
        return Err(Error::Config("n_samples must exceed group_size + 1".into()));
    }
    if cfg.n_mc == 0 {
        return Err(Error::Config("n_mc must be positive".into()));
    }

    let beta = Array1::from_vec(cfg.beta.clone());
    let beta_bar = beta.sum() / m as f64;
    let dispersion: f64 = beta.iter().map(|b| (b - beta_bar) * (b - beta_bar)).sum();
    let predicted_threshold = if dispersion > 0.0 {
        1.0 - cfg.sigma * cfg.sigma / (dispersion / (m as f64 - 1.0))
    } else {
        f64::NEG_INFINITY
    };
    let analytic_difference =
        -cfg.sigma * cfg.sigma * (m as f64 - 1.0) / (1.0 - cfg.rho) + dispersion;

    let sqrt_r = equicorrelation_sqrt(m, cfg.rho);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_samples;

    let mut sum_ols = 0.0f64;
    let mut sum_avg = 0.0f64;
    let mut sum_diff = 0.0f64;
    let mut sum_diff_sq = 0.0f64;
    for _ in 0..cfg.n_mc {
        let raw = Array2::from_shape_fn((n, m), |_| StandardNormal.sample(&mut rng));
        let x = if cfg.exact_gram {
            gram_schmidt(&raw)?.dot(&sqrt_r)
        } else {
            let mut x = raw.dot(&sqrt_r);
            for j in 0..m {
                let mean = x.column(j).sum() / n as f64;
                x.column_mut(j).mapv_inplace(|v| v - mean);
                let norm = x.column(j).dot(&x.column(j)).sqrt();
                if norm < 1e-10 {
                    return Err(Error::SingularDesign);
                }
                x.column_mut(j).mapv_inplace(|v| v / norm);
            }
            x
        };
        let mut y = x.dot(&beta);
        for v in y.iter_mut() {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *v += cfg.sigma * eps;
        }
        let gram = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let beta_hat = linalg::solve(&gram, &xty)?;
        let mean_hat = beta_hat.sum() / m as f64;
        let mut e_ols = 0.0;
        let mut e_avg = 0.0;
        for j in 0..m {
            let d_ols = beta_hat[j] - beta[j];
            let d_avg = mean_hat - beta[j];
            e_ols += d_ols * d_ols;
            e_avg += d_avg * d_avg;
        }
        sum_ols += e_ols;
        sum_avg += e_avg;
        let diff = e_avg - e_ols;
        sum_diff += diff;
        sum_diff_sq += diff * diff;
    }
    let n_mc = cfg.n_mc as f64;
    let mc_difference = sum_diff / n_mc;
    let var_diff = (sum_diff_sq / n_mc - mc_difference * mc_difference).max(0.0);
    Ok(TheoremCheckResult {
        mse_ols: sum_ols / n_mc,
        mse_averaged: sum_avg / n_mc,
        mc_difference,
        se_difference: (var_diff / n_mc).sqrt(),
        predicted_threshold,
        analytic_difference,
    })
}

/// Methods compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Gap-weighted pipeline.
    Sicomore,
    /// Unweighted compression baseline: identical pipeline with all penalty
    /// factors set to one.
    Hcar,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Sicomore => "sicomore",
            Method::Hcar => "hcar",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n_samples: Vec<usize>,
    pub noise_sds: Vec<f64>,
    pub n_interactions: Vec<usize>,
    pub methods: Vec<Method>,
    pub n_reps: usize,
    pub seed: u64,
    pub threads: usize,
    /// Per-view generator settings; `n_samples` and `seed` are overridden
    /// per cell and replicate.
    pub snp: SnpSimConfig,
    pub pln: PlnSimConfig,
    pub phenotype: PhenotypeSimConfig,
    pub analysis: AnalysisOptions,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            n_samples: vec![100],
            noise_sds: vec![0.5],
            n_interactions: vec![5],
            methods: vec![Method::Sicomore, Method::Hcar],
            n_reps: 10,
            seed: 0,
            threads: 1,
            snp: SnpSimConfig::default(),
            pln: PlnSimConfig::default(),
            phenotype: PhenotypeSimConfig::default(),
            analysis: AnalysisOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n_samples: usize,
    pub sigma: f64,
    pub n_interactions: usize,
    pub method: Method,
    pub rep: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub seconds: f64,
}

/// Tidy TSV of benchmark rows, one line per (cell, method, replicate).
pub fn benchmark_tsv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("n\tsigma\ti\tmethod\trep\tprecision\trecall\tseconds\n");
    let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x}"));
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.n_samples,
            r.sigma,
            r.n_interactions,
            r.method.label(),
            r.rep,
            fmt(r.precision),
            fmt(r.recall),
            r.seconds
        ));
    }
    out
}

/// Median over the defined values; `None` when every value is undefined.
pub fn median_of(values: &[Option<f64>]) -> Option<f64> {
    let mut defined: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if defined.is_empty() {
        return None;
    }
    defined.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = defined.len();
    Some(if n % 2 == 1 {
        defined[n / 2]
    } else {
        0.5 * (defined[n / 2 - 1] + defined[n / 2])
    })
}

/// JSON summary of per-cell, per-method medians.
pub fn benchmark_summary(rows: &[BenchmarkRow]) -> serde_json::Value {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<String, Vec<&BenchmarkRow>> = BTreeMap::new();
    for r in rows {
        cells
            .entry(format!(
                "n={},sigma={},i={},method={}",
                r.n_samples,
                r.sigma,
                r.n_interactions,
                r.method.label()
            ))
            .or_default()
            .push(r);
    }
    let mut out = serde_json::Map::new();
    for (key, group) in cells {
        let precisions: Vec<Option<f64>> = group.iter().map(|r| r.precision).collect();
        let recalls: Vec<Option<f64>> = group.iter().map(|r| r.recall).collect();
        let seconds: Vec<Option<f64>> = group.iter().map(|r| Some(r.seconds)).collect();
        out.insert(
            key,
            serde_json::json!({
                "median_precision": median_of(&precisions),
                "median_recall": median_of(&recalls),
                "median_seconds": median_of(&seconds),
                "reps": group.len(),
            }),
        );
    }
    serde_json::Value::Object(out)
}

fn replicate_seed(base: u64, replicate_index: usize) -> u64 {
    base ^ replicate_index as u64
}

struct ReplicateJob {
    cell: (usize, f64, usize),
    cell_index: usize,
    rep: usize,
}

fn run_replicate(cfg: &BenchmarkConfig, job: &ReplicateJob) -> Result<Vec<BenchmarkRow>> {
    let (n, sigma, n_inter) = job.cell;
    let rep_id = job.cell_index * cfg.n_reps + job.rep;
    let seed = replicate_seed(cfg.seed, rep_id);

    let snp_cfg = SnpSimConfig {
        n_samples: n,
        seed: seed.wrapping_add(1),
        ..cfg.snp.clone()
    };
    let (x_g, blocks_g) = simulate_snp_matrix(&snp_cfg)?;
    let pln_cfg = PlnSimConfig {
        n_samples: n,
        seed: seed.wrapping_add(2),
        ..cfg.pln.clone()
    };
    let (x_m_counts, blocks_m) = simulate_pln_matrix(&pln_cfg)?;

    // Phenotypes come from supervariables of the true partitions. The count
    // view is clr-transformed first, matching what the pipeline analyses.
    let clr_cfg = cfg.analysis.clr.unwrap_or_default();
    let x_m_clr = crate::preprocess::clr_pipeline(x_m_counts.values(), &clr_cfg)?;
    let gs_g = WeightedGroupSet::from_partition(&blocks_g, x_g.n_variables())?;
    let gs_m = WeightedGroupSet::from_partition(&blocks_m, x_m_counts.n_variables())?;
    let sv_g = compress(x_g.values(), &gs_g, Summary::Mean)?;
    let sv_m = compress(&x_m_clr, &gs_m, Summary::Mean)?;
    let phen_cfg = PhenotypeSimConfig {
        n_interactions: n_inter,
        noise_sd: sigma,
        seed: seed.wrapping_add(3),
        ..cfg.phenotype.clone()
    };
    let (y, truth) = simulate_phenotype(&sv_g, &sv_m, &phen_cfg)?;

    let mut rows = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let mut opts = cfg.analysis.clone();
        opts.seed = seed.wrapping_add(4);
        opts.weighting = match method {
            Method::Sicomore => Weighting::GapWeights,
            Method::Hcar => Weighting::Unweighted,
        };
        let started = std::time::Instant::now();
        let analysis = analyze(&x_g, &x_m_counts, &y, &opts)?;
        let seconds = started.elapsed().as_secs_f64();
        let score = precision_recall(&analysis.report.hits_variables, &truth.variable_matrix)?;
        rows.push(BenchmarkRow {
            n_samples: n,
            sigma,
            n_interactions: n_inter,
            method: *method,
            rep: job.rep,
            precision: score.precision,
            recall: score.recall,
            seconds,
        });
    }
    Ok(rows)
}

/// Runs the full grid. Replicates are independent (each owns a derived
/// seed) and may run on `threads > 1`; rows come back in deterministic
/// (cell, replicate, method) order either way.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    if cfg.n_reps == 0 {
        return Err(Error::Config("n_reps must be positive".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let mut jobs = Vec::new();
    let mut cell_index = 0usize;
    for &n in &cfg.n_samples {
        for &sigma in &cfg.noise_sds {
            for &i in &cfg.n_interactions {
                for rep in 0..cfg.n_reps {
                    jobs.push(ReplicateJob {
                        cell: (n, sigma, i),
                        cell_index,
                        rep,
                    });
                }
                cell_index += 1;
            }
        }
    }
    let threads = cfg.threads.max(1);
    let results: Vec<Result<Vec<BenchmarkRow>>> = if threads == 1 {
        jobs.iter().map(|job| run_replicate(cfg, job)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            jobs.par_iter().map(|job| run_replicate(cfg, job)).collect()
        })
    };
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}
