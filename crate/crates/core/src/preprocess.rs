//! Compositional transform for count data, column standardization and the
//! optional marginal-correlation screen.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Dataset, Response};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// How zero counts are handled before proportions are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroReplacement {
    /// Add the pseudocount to every entry of rows that contain a zero.
    Pseudocount,
    /// Replace zeros by the pseudocount and shrink the nonzero entries so
    /// the row total is preserved.
    Multiplicative,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClrConfig {
    pub zero_replacement: ZeroReplacement,
    pub pseudocount: f64,
}

impl Default for ClrConfig {
    fn default() -> Self {
        ClrConfig {
            zero_replacement: ZeroReplacement::Pseudocount,
            pseudocount: 0.5,
        }
    }
}

impl ClrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pseudocount > 0.0) {
            return Err(Error::Config(format!(
                "pseudocount must be positive, got {}",
                self.pseudocount
            )));
        }
        Ok(())
    }
}

/// Turns nonnegative counts into row-stochastic proportions, applying the
/// configured zero replacement to rows that contain zeros. Rows without
/// zeros are divided by their sum untouched, which keeps the downstream clr
/// invariant to positive rescaling of raw counts.
pub fn counts_to_proportions(counts: &Array2<f64>, cfg: &ClrConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let (n, d) = counts.dim();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let row = counts.row(i);
        if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!("counts row {i}")));
        }
        let total: f64 = row.sum();
        if total <= 0.0 {
            return Err(Error::AllZeroRow(i));
        }
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if zeros == 0 {
            for j in 0..d {
                out[(i, j)] = row[j] / total;
            }
            continue;
        }
        match cfg.zero_replacement {
            ZeroReplacement::Pseudocount => {
                let new_total = total + cfg.pseudocount * d as f64;
                for j in 0..d {
                    out[(i, j)] = (row[j] + cfg.pseudocount) / new_total;
                }
            }
            ZeroReplacement::Multiplicative => {
                let replaced = cfg.pseudocount * zeros as f64;
                if total <= replaced {
                    return Err(Error::Config(format!(
                        "pseudocount {} too large for row {i} (sum {total}, {zeros} zeros)",
                        cfg.pseudocount
                    )));
                }
                let shrink = (total - replaced) / total;
                for j in 0..d {
                    out[(i, j)] = if row[j] == 0.0 {
                        cfg.pseudocount / total
                    } else {
                        row[j] * shrink / total
                    };
                }
            }
        }
    }
    Ok(out)
}

/// Centered log-ratio transform: entry (i, j) becomes
/// `log(p_ij) - mean_j log(p_ij)`, so every output row sums to zero.
pub fn clr_transform(props: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, d) = props.dim();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            let v = props[(i, j)];
            if !(v > 0.0) {
                return Err(Error::NonPositiveEntry(i, j));
            }
            out[(i, j)] = v.ln();
        }
        let mean_log = out.row(i).sum() / d as f64;
        for j in 0..d {
            out[(i, j)] -= mean_log;
        }
    }
    Ok(out)
}

/// Zero replacement, proportions and clr in one step.
pub fn clr_pipeline(counts: &Array2<f64>, cfg: &ClrConfig) -> Result<Array2<f64>> {
    let props = counts_to_proportions(counts, cfg)?;
    clr_transform(&props)
}

/// Per-column centering/scaling record from [`standardize_columns`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Columns with zero sample variance, left at 0 after centering.
    pub constant_columns: Vec<usize>,
}

/// Centers every column to mean 0 and scales it to sample standard
/// deviation 1 (n-1 denominator). Constant columns become all-zero and are
/// flagged rather than failing.
pub fn standardize_columns(x: &Array2<f64>) -> (Array2<f64>, Standardization) {
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, d));
    let mut means = Vec::with_capacity(d);
    let mut sds = Vec::with_capacity(d);
    let mut constant = Vec::new();
    for j in 0..d {
        let col = x.column(j);
        let m = linalg::mean(col);
        let sd = linalg::sample_sd(col);
        means.push(m);
        sds.push(sd);
        if sd == 0.0 {
            constant.push(j);
            continue; // column stays zero
        }
        for i in 0..n {
            out[(i, j)] = (x[(i, j)] - m) / sd;
        }
    }
    (
        out,
        Standardization {
            means,
            sds,
            constant_columns: constant,
        },
    )
}

/// Dataset-level wrapper around [`standardize_columns`].
pub fn standardize(x: &Dataset) -> (Dataset, Standardization) {
    let (values, info) = standardize_columns(x.values());
    let ds = Dataset::new(values, x.variable_names().to_vec())
        .expect("standardization preserves shape and names");
    (ds, info)
}

/// Keeps the `ceil(keep_fraction * D)` columns with the largest absolute
/// correlation to the response; ties break toward the lower index. Returns
/// the retained indices in ascending order.
pub fn screen_single_effects(
    x: &Dataset,
    y: &Response,
    keep_fraction: f64,
) -> Result<Vec<usize>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "keep_fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    if y.len() != x.n_samples() {
        return Err(Error::DimensionMismatch("response".into()));
    }
    let d = x.n_variables();
    let keep = ((keep_fraction * d as f64).ceil() as usize).clamp(1, d);
    let mut scored: Vec<(usize, f64)> = (0..d)
        .map(|j| (j, linalg::pearson(x.column(j), y.values().view()).abs()))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let mut kept: Vec<usize> = scored[..keep].iter().map(|&(j, _)| j).collect();
    kept.sort_unstable();
    Ok(kept)
}
