//! Pairwise interaction testing between selected supervariables.
//!
//! Every selected pair (g, m) is fit in the four-parameter linear model
//! `y = b0 + bg*xg + bm*xm + theta*(xg.xm) + eps` and `theta` is t-tested.
//! Raw p-values are adjusted over the family of all testable pairs in the
//! run, and compact hits are expanded to the variable level.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Response, VariableInteractionMatrix};
use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Multiplicity adjustment applied to a family of p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    /// Step-down family-wise error control.
    Holm,
    /// Step-up false-discovery-rate control.
    Bh,
}

/// Two-sided p-value from a Student-t statistic.
pub fn t_test_p_value(t: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// OLS fit of the single-pair interaction model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairFit {
    pub intercept: f64,
    pub beta_g_hat: f64,
    pub beta_m_hat: f64,
    pub theta_hat: f64,
    pub se_theta: f64,
    pub t_stat: f64,
    pub df: usize,
    pub p_raw: f64,
}

/// Fits `y = b0 + bg*xg + bm*xm + theta*(xg.xm)` and t-tests theta with
/// `df = N - 4`. Fails with `SingularDesign` when the design is rank
/// deficient (the caller reports the pair as untestable).
pub fn fit_pair_model(
    xg: ArrayView1<'_, f64>,
    xm: ArrayView1<'_, f64>,
    y: &Response,
) -> Result<PairFit> {
    let n = y.len();
    if xg.len() != n || xm.len() != n {
        return Err(Error::DimensionMismatch("pair model inputs".into()));
    }
    if n < 5 {
        return Err(Error::DimensionMismatch(format!(
            "pair model needs at least 5 samples, got {n}"
        )));
    }
    let mut design = Array2::zeros((n, 4));
    for i in 0..n {
        design[(i, 0)] = 1.0;
        design[(i, 1)] = xg[i];
        design[(i, 2)] = xm[i];
        design[(i, 3)] = xg[i] * xm[i];
    }
    let (beta, gram_inv) = linalg::ols(design.view(), y.values().view())?;
    let fitted = design.dot(&beta);
    let rss: f64 = y
        .values()
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let df = n - 4;
    let sigma2 = rss / df as f64;
    let se_theta = (sigma2 * gram_inv[(3, 3)]).max(0.0).sqrt();
    let t_stat = if se_theta > 0.0 {
        beta[3] / se_theta
    } else if beta[3] != 0.0 {
        f64::INFINITY * beta[3].signum()
    } else {
        0.0
    };
    Ok(PairFit {
        intercept: beta[0],
        beta_g_hat: beta[1],
        beta_m_hat: beta[2],
        theta_hat: beta[3],
        se_theta,
        t_stat,
        df,
        p_raw: t_test_p_value(t_stat, df),
    })
}

/// Adjusts p-values for multiplicity, preserving input order.
pub fn adjust_pvalues(p: &[f64], method: Correction) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidP(bad));
    }
    let m = p.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    match method {
        Correction::Holm => {
            // Step-down: running max of (m - k + 1) * p_(k).
            let mut running = 0.0f64;
            for (rank, &idx) in order.iter().enumerate() {
                let v = ((m - rank) as f64 * p[idx]).min(1.0);
                running = running.max(v);
                adjusted[idx] = running;
            }
        }
        Correction::Bh => {
            // Step-up: running min from the largest p downward.
            let mut running = 1.0f64;
            for (rank, &idx) in order.iter().enumerate().rev() {
                let v = (p[idx] * m as f64 / (rank + 1) as f64).min(1.0);
                running = running.min(v);
                adjusted[idx] = running;
            }
        }
    }
    Ok(adjusted)
}

/// One selected supervariable entering the pair tests.
#[derive(Debug, Clone)]
pub struct SelectedGroup {
    /// Index of the group in its weighted group set.
    pub group_index: usize,
    /// Original variable indices of the group members.
    pub members: Vec<usize>,
    pub member_names: Vec<String>,
    /// Compressed column, tested as-is.
    pub column: Array1<f64>,
}

/// Result of one pair test. Untestable (rank-deficient) pairs carry NaN
/// statistics, `testable = false`, and are excluded from the adjustment
/// family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTestResult {
    pub g: usize,
    pub m: usize,
    pub theta_hat: f64,
    pub beta_g_hat: f64,
    pub beta_m_hat: f64,
    pub t_stat: f64,
    pub df: usize,
    pub p_raw: f64,
    pub p_adj: f64,
    pub testable: bool,
    pub hit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportGroup {
    pub group_index: usize,
    pub members: Vec<usize>,
    pub member_names: Vec<String>,
}

/// Full testing report: per-pair statistics, the compact hit matrix over
/// the selections and its variable-level expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionReport {
    pub alpha: f64,
    pub method: Correction,
    pub pairs: Vec<PairTestResult>,
    pub g_groups: Vec<ReportGroup>,
    pub m_groups: Vec<ReportGroup>,
    pub hits_compact: Vec<Vec<bool>>,
    pub hits_variables: VariableInteractionMatrix,
    pub n_testable: usize,
}

impl InteractionReport {
    pub fn n_hits(&self) -> usize {
        self.pairs.iter().filter(|p| p.hit).count()
    }

    /// Flat TSV: one row per pair with member variables spelled out.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "g\tm\tg_members\tm_members\ttheta_hat\tt_stat\tdf\tp_raw\tp_adj\thit\n",
        );
        let fmt = |v: f64| {
            if v.is_nan() {
                "NA".to_string()
            } else {
                format!("{v}")
            }
        };
        for (idx, pair) in self.pairs.iter().enumerate() {
            let gi = idx / self.m_groups.len().max(1);
            let mi = idx % self.m_groups.len().max(1);
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                pair.g,
                pair.m,
                self.g_groups[gi].member_names.join(";"),
                self.m_groups[mi].member_names.join(";"),
                fmt(pair.theta_hat),
                fmt(pair.t_stat),
                pair.df,
                fmt(pair.p_raw),
                fmt(pair.p_adj),
                pair.hit as u8,
            ));
        }
        out
    }
}

/// Tests the full Cartesian product of the two selections, adjusts the raw
/// p-values over exactly that family (untestable pairs excluded) and
/// expands the hits to the variable level. Empty selections produce an
/// empty report.
pub fn test_all_pairs(
    sel_g: &[SelectedGroup],
    sel_m: &[SelectedGroup],
    y: &Response,
    d_g: usize,
    d_m: usize,
    alpha: f64,
    method: Correction,
) -> Result<InteractionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
    }
    let mut pairs = Vec::with_capacity(sel_g.len() * sel_m.len());
    let mut raw_testable = Vec::new();
    for g in sel_g {
        for m in sel_m {
            match fit_pair_model(g.column.view(), m.column.view(), y) {
                Ok(fit) => {
                    raw_testable.push(fit.p_raw);
                    pairs.push(PairTestResult {
                        g: g.group_index,
                        m: m.group_index,
                        theta_hat: fit.theta_hat,
                        beta_g_hat: fit.beta_g_hat,
                        beta_m_hat: fit.beta_m_hat,
                        t_stat: fit.t_stat,
                        df: fit.df,
                        p_raw: fit.p_raw,
                        p_adj: f64::NAN,
                        testable: true,
                        hit: false,
                    });
                }
                Err(Error::SingularDesign) => {
                    pairs.push(PairTestResult {
                        g: g.group_index,
                        m: m.group_index,
                        theta_hat: f64::NAN,
                        beta_g_hat: f64::NAN,
                        beta_m_hat: f64::NAN,
                        t_stat: f64::NAN,
                        df: y.len().saturating_sub(4),
                        p_raw: f64::NAN,
                        p_adj: f64::NAN,
                        testable: false,
                        hit: false,
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    let adjusted = adjust_pvalues(&raw_testable, method)?;
    let mut cursor = 0usize;
    for pair in pairs.iter_mut() {
        if pair.testable {
            pair.p_adj = adjusted[cursor];
            pair.hit = pair.p_adj <= alpha;
            cursor += 1;
        }
    }

    let n_m = sel_m.len();
    let hits_compact: Vec<Vec<bool>> = (0..sel_g.len())
        .map(|gi| (0..n_m).map(|mi| pairs[gi * n_m + mi].hit).collect())
        .collect();

    let mut hits_variables = VariableInteractionMatrix::zeros(d_g, d_m);
    for (gi, row) in hits_compact.iter().enumerate() {
        for (mi, &hit) in row.iter().enumerate() {
            if hit {
                for &j in &sel_g[gi].members {
                    for &jp in &sel_m[mi].members {
                        hits_variables.set(j, jp, 1.0);
                    }
                }
            }
        }
    }

    let describe = |s: &SelectedGroup| ReportGroup {
        group_index: s.group_index,
        members: s.members.clone(),
        member_names: s.member_names.clone(),
    };
    Ok(InteractionReport {
        alpha,
        method,
        n_testable: raw_testable.len(),
        pairs,
        g_groups: sel_g.iter().map(describe).collect(),
        m_groups: sel_m.iter().map(describe).collect(),
        hits_compact,
        hits_variables,
    })
}
