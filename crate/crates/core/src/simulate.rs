//! Synthetic data generators: block-correlated SNP-like genotypes,
//! Poisson-log-normal count matrices and interaction phenotypes built from
//! supervariables of the true block partitions.
//!
//! All generators use ChaCha8 seeded from a single u64 with a fixed draw
//! order, so a given seed reproduces the exact same data on every run.
//! Replicated studies derive per-replicate seeds as `base_seed ^ replicate`.

use crate::compress::SuperVariableSet;
use crate::error::{Error, Result};
use crate::model::{Dataset, Response, VariableInteractionMatrix};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Contiguous split of `0..n_variables` into `n_blocks` blocks, the leading
/// ones one longer when the division is uneven.
pub fn contiguous_blocks(n_variables: usize, n_blocks: usize) -> Vec<Vec<usize>> {
    let base = n_variables / n_blocks;
    let extra = n_variables % n_blocks;
    let mut blocks = Vec::with_capacity(n_blocks);
    let mut start = 0usize;
    for b in 0..n_blocks {
        let len = base + usize::from(b < extra);
        blocks.push((start..start + len).collect());
        start += len;
    }
    blocks
}

fn uniform_in(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.gen_range(range.0..range.1)
    } else {
        range.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnpSimConfig {
    pub n_samples: usize,
    pub n_variables: usize,
    pub n_blocks: usize,
    /// Range the per-block latent correlation is drawn from.
    pub within_block_corr: (f64, f64),
    /// Range the per-variable minor allele frequency is drawn from.
    pub maf_range: (f64, f64),
    pub seed: u64,
}

impl Default for SnpSimConfig {
    fn default() -> Self {
        SnpSimConfig {
            n_samples: 100,
            n_variables: 200,
            n_blocks: 16,
            within_block_corr: (0.6, 0.95),
            maf_range: (0.05, 0.5),
            seed: 0,
        }
    }
}

impl SnpSimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_variables == 0 {
            return Err(Error::Config("empty SNP simulation".into()));
        }
        if self.n_blocks == 0 || self.n_blocks > self.n_variables {
            return Err(Error::Config(format!(
                "n_blocks {} outside 1..={}",
                self.n_blocks, self.n_variables
            )));
        }
        let (cl, ch) = self.within_block_corr;
        if !(0.0..1.0).contains(&cl) || !(0.0..1.0).contains(&ch) || cl > ch {
            return Err(Error::Config(format!(
                "within_block_corr ({cl}, {ch}) must be ordered within [0, 1)"
            )));
        }
        let (ml, mh) = self.maf_range;
        if !(ml > 0.0 && mh < 1.0 && ml <= mh) {
            return Err(Error::Config(format!(
                "maf_range ({ml}, {mh}) must be ordered within (0, 1)"
            )));
        }
        Ok(())
    }
}

/// Block-correlated genotype surrogate. Within each block a latent Gaussian
/// with exchangeable correlation is thresholded at the MAF quantile twice
/// (two haplotypes summed), producing 0/1/2 genotypes whose correlation
/// structure follows the blocks; blocks are independent.
///
/// Draw order: per-block correlations, per-variable MAFs, then samples row
/// by row (per haplotype, per block: one shared normal, one normal per
/// member).
pub fn simulate_snp_matrix(cfg: &SnpSimConfig) -> Result<(Dataset, Vec<Vec<usize>>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let blocks = contiguous_blocks(cfg.n_variables, cfg.n_blocks);
    let rho: Vec<f64> = blocks
        .iter()
        .map(|_| uniform_in(&mut rng, cfg.within_block_corr))
        .collect();
    let maf: Vec<f64> = (0..cfg.n_variables)
        .map(|_| uniform_in(&mut rng, cfg.maf_range))
        .collect();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let thresholds: Vec<f64> = maf.iter().map(|&p| std_normal.inverse_cdf(p)).collect();

    let mut genotypes = Array2::zeros((cfg.n_samples, cfg.n_variables));
    for i in 0..cfg.n_samples {
        for _haplotype in 0..2 {
            for (b, block) in blocks.iter().enumerate() {
                let shared: f64 = StandardNormal.sample(&mut rng);
                let w_shared = rho[b].sqrt();
                let w_own = (1.0 - rho[b]).sqrt();
                for &j in block {
                    let own: f64 = StandardNormal.sample(&mut rng);
                    let z = w_shared * shared + w_own * own;
                    if z < thresholds[j] {
                        genotypes[(i, j)] += 1.0;
                    }
                }
            }
        }
    }
    let names = (0..cfg.n_variables).map(|j| format!("snp{j}")).collect();
    Ok((Dataset::new(genotypes, names)?, blocks))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlnSimConfig {
    pub n_samples: usize,
    pub n_variables: usize,
    pub n_blocks: usize,
    /// Range the per-block latent correlation is drawn from.
    pub corr_range: (f64, f64),
    /// Per-variable log-means of the Poisson rates.
    pub mu: Vec<f64>,
    /// Marginal standard deviation of the latent layer; 0 degenerates to
    /// plain Poisson counts.
    pub latent_sd: f64,
    pub seed: u64,
}

impl Default for PlnSimConfig {
    fn default() -> Self {
        let n_variables = 100;
        PlnSimConfig {
            n_samples: 100,
            n_variables,
            n_blocks: 6,
            corr_range: (0.5, 0.95),
            mu: vec![50f64.ln(); n_variables],
            latent_sd: 1.0,
            seed: 0,
        }
    }
}

impl PlnSimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_variables == 0 {
            return Err(Error::Config("empty PLN simulation".into()));
        }
        if self.n_blocks == 0 || self.n_blocks > self.n_variables {
            return Err(Error::Config(format!(
                "n_blocks {} outside 1..={}",
                self.n_blocks, self.n_variables
            )));
        }
        let (cl, ch) = self.corr_range;
        if !(0.0..1.0).contains(&cl) || !(0.0..1.0).contains(&ch) || cl > ch {
            return Err(Error::Config(format!(
                "corr_range ({cl}, {ch}) must be ordered within [0, 1)"
            )));
        }
        if self.mu.len() != self.n_variables {
            return Err(Error::DimensionMismatch("mu length".into()));
        }
        if !(self.latent_sd >= 0.0) {
            return Err(Error::Config("latent_sd must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Poisson-log-normal counts: latent rows are block-exchangeable Gaussians
/// (positive semidefinite by construction) and counts are Poisson with rate
/// `exp(mu_j + z_ij)`.
///
/// Draw order: per-block correlations, then samples row by row (per block:
/// one shared normal, one normal per member), counts left to right.
pub fn simulate_pln_matrix(cfg: &PlnSimConfig) -> Result<(Dataset, Vec<Vec<usize>>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let blocks = contiguous_blocks(cfg.n_variables, cfg.n_blocks);
    let rho: Vec<f64> = blocks
        .iter()
        .map(|_| uniform_in(&mut rng, cfg.corr_range))
        .collect();

    let mut counts = Array2::zeros((cfg.n_samples, cfg.n_variables));
    let mut latent = vec![0.0f64; cfg.n_variables];
    for i in 0..cfg.n_samples {
        for (b, block) in blocks.iter().enumerate() {
            let shared: f64 = StandardNormal.sample(&mut rng);
            let w_shared = rho[b].sqrt();
            let w_own = (1.0 - rho[b]).sqrt();
            for &j in block {
                let own: f64 = StandardNormal.sample(&mut rng);
                latent[j] = cfg.latent_sd * (w_shared * shared + w_own * own);
            }
        }
        for j in 0..cfg.n_variables {
            let rate = (cfg.mu[j] + latent[j]).exp();
            let draw: f64 = Poisson::new(rate)
                .map_err(|_| Error::NonFiniteInput(format!("poisson rate {rate}")))?
                .sample(&mut rng);
            counts[(i, j)] = draw;
        }
    }
    let names = (0..cfg.n_variables).map(|j| format!("otu{j}")).collect();
    Ok((Dataset::new(counts, names)?, blocks))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhenotypeSimConfig {
    /// Number of interacting supervariable pairs.
    pub n_interactions: usize,
    /// Magnitude range for main effects of the interacting parents.
    pub main_effect_range: (f64, f64),
    /// Magnitude range for interaction effects.
    pub interaction_effect_range: (f64, f64),
    /// When true, effect signs are drawn uniformly at random. Off by
    /// default so that effects aggregate constructively in coarse tree
    /// groups instead of cancelling, which is what lets compressed
    /// representations recover interactions.
    pub signed_effects: bool,
    /// Standardize the generating supervariables so every term contributes
    /// a comparable variance share regardless of the views' raw scales.
    pub standardize_inputs: bool,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for PhenotypeSimConfig {
    fn default() -> Self {
        PhenotypeSimConfig {
            n_interactions: 5,
            main_effect_range: (1.0, 1.4),
            interaction_effect_range: (1.3, 1.6),
            signed_effects: false,
            standardize_inputs: true,
            noise_sd: 0.5,
            seed: 0,
        }
    }
}

/// A true interacting group pair with its coefficient.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruePair {
    pub g: usize,
    pub m: usize,
    pub theta: f64,
}

/// Ground truth of one simulated phenotype: group-level effects plus the
/// variable-level interaction matrix used for scoring, with the marginal
/// variable-level main effects alongside.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pairs: Vec<TruePair>,
    pub main_effects_g: Vec<(usize, f64)>,
    pub main_effects_m: Vec<(usize, f64)>,
    pub variable_matrix: VariableInteractionMatrix,
    pub gamma_g: Vec<f64>,
    pub gamma_m: Vec<f64>,
}

fn draw_effect(rng: &mut ChaCha8Rng, range: (f64, f64), signed: bool) -> f64 {
    let magnitude = uniform_in(rng, range);
    if signed && rng.gen_bool(0.5) {
        -magnitude
    } else {
        magnitude
    }
}

/// Generates `y = sum beta_g x~g + sum beta_m x~m + sum theta (x~g . x~m) + eps`
/// where the interaction sum runs over the full product of the two parent
/// sets: `n_interactions = |S_G| * |S_M|` blocks are nonzero. The
/// factorization is drawn uniformly among those fitting the group counts.
/// Main effects cover every interacting parent, so strong dependency holds
/// in the truth. The supervariable sets must come from the true block
/// partitions.
///
/// Draw order: factorization, parent sets (view G then view M), main
/// effects on view G (parents in ascending order), main effects on view M,
/// interaction effects (g-major), then one noise draw per sample.
pub fn simulate_phenotype(
    sv_g: &SuperVariableSet,
    sv_m: &SuperVariableSet,
    cfg: &PhenotypeSimConfig,
) -> Result<(Response, GroundTruth)> {
    let n = sv_g.n_samples();
    if sv_m.n_samples() != n {
        return Err(Error::DimensionMismatch("view M".into()));
    }
    let n_g = sv_g.n_groups();
    let n_m = sv_m.n_groups();
    let available = n_g * n_m;
    if cfg.n_interactions == 0 || cfg.n_interactions > available {
        return Err(Error::InsufficientGroups {
            requested: cfg.n_interactions,
            available,
        });
    }
    if !(cfg.noise_sd >= 0.0) {
        return Err(Error::Config("noise_sd must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Factor I into |S_G| * |S_M| within the group counts.
    let factorizations: Vec<(usize, usize)> = (1..=cfg.n_interactions)
        .filter(|a| {
            cfg.n_interactions % a == 0 && *a <= n_g && cfg.n_interactions / a <= n_m
        })
        .map(|a| (a, cfg.n_interactions / a))
        .collect();
    if factorizations.is_empty() {
        return Err(Error::InsufficientGroups {
            requested: cfg.n_interactions,
            available,
        });
    }
    let (size_g, size_m) = factorizations[rng.gen_range(0..factorizations.len())];

    let sample_parents = |rng: &mut ChaCha8Rng, count: usize, total: usize| -> Vec<usize> {
        let mut ids: Vec<usize> = (0..total).collect();
        for i in 0..count {
            let j = rng.gen_range(i..total);
            ids.swap(i, j);
        }
        let mut chosen = ids[..count].to_vec();
        chosen.sort_unstable();
        chosen
    };
    let parents_g = sample_parents(&mut rng, size_g, n_g);
    let parents_m = sample_parents(&mut rng, size_m, n_m);
    let chosen: Vec<(usize, usize)> = parents_g
        .iter()
        .flat_map(|&g| parents_m.iter().map(move |&m| (g, m)))
        .collect();

    let main_effects_g: Vec<(usize, f64)> = parents_g
        .iter()
        .map(|&g| (g, draw_effect(&mut rng, cfg.main_effect_range, cfg.signed_effects)))
        .collect();
    let main_effects_m: Vec<(usize, f64)> = parents_m
        .iter()
        .map(|&m| (m, draw_effect(&mut rng, cfg.main_effect_range, cfg.signed_effects)))
        .collect();
    let pairs: Vec<TruePair> = chosen
        .iter()
        .map(|&(g, m)| TruePair {
            g,
            m,
            theta: draw_effect(&mut rng, cfg.interaction_effect_range, cfg.signed_effects),
        })
        .collect();

    let term_column = |columns: &Array2<f64>, j: usize| -> Array1<f64> {
        let col = columns.column(j).to_owned();
        if !cfg.standardize_inputs {
            return col;
        }
        let mean = col.sum() / n as f64;
        let sd = crate::linalg::sample_sd(col.view());
        if sd > 0.0 {
            col.mapv(|v| (v - mean) / sd)
        } else {
            col.mapv(|v| v - mean)
        }
    };
    let mut y = Array1::zeros(n);
    for &(g, beta) in &main_effects_g {
        y.scaled_add(beta, &term_column(&sv_g.columns, g));
    }
    for &(m, beta) in &main_effects_m {
        y.scaled_add(beta, &term_column(&sv_m.columns, m));
    }
    for pair in &pairs {
        let xg = term_column(&sv_g.columns, pair.g);
        let xm = term_column(&sv_m.columns, pair.m);
        for i in 0..n {
            y[i] += pair.theta * xg[i] * xm[i];
        }
    }
    if cfg.noise_sd > 0.0 {
        for i in 0..n {
            let eps: f64 = StandardNormal.sample(&mut rng);
            y[i] += cfg.noise_sd * eps;
        }
    }

    let d_g = sv_g.group_refs.n_variables();
    let d_m = sv_m.group_refs.n_variables();
    let mut variable_matrix = VariableInteractionMatrix::zeros(d_g, d_m);
    for pair in &pairs {
        for &j in &sv_g.group_refs.groups()[pair.g].members {
            for &jp in &sv_m.group_refs.groups()[pair.m].members {
                variable_matrix.set(j, jp, pair.theta);
            }
        }
    }
    let mut gamma_g = vec![0.0; d_g];
    for &(g, beta) in &main_effects_g {
        let members = &sv_g.group_refs.groups()[g].members;
        for &j in members {
            gamma_g[j] += beta / members.len() as f64;
        }
    }
    let mut gamma_m = vec![0.0; d_m];
    for &(m, beta) in &main_effects_m {
        let members = &sv_m.group_refs.groups()[m].members;
        for &j in members {
            gamma_m[j] += beta / members.len() as f64;
        }
    }

    Ok((
        Response::new(y)?,
        GroundTruth {
            pairs,
            main_effects_g,
            main_effects_m,
            variable_matrix,
            gamma_g,
            gamma_m,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{compress, Summary, WeightedGroupSet};
    use crate::linalg;

    #[test]
    fn blocks_split_evenly() {
        let blocks = contiguous_blocks(10, 3);
        assert_eq!(blocks[0], vec![0, 1, 2, 3]);
        assert_eq!(blocks[1], vec![4, 5, 6]);
        assert_eq!(blocks[2], vec![7, 8, 9]);
    }

    #[test]
    fn snp_entries_are_genotypes() {
        let cfg = SnpSimConfig {
            n_samples: 50,
            n_variables: 20,
            n_blocks: 4,
            seed: 3,
            ..SnpSimConfig::default()
        };
        let (data, blocks) = simulate_snp_matrix(&cfg).unwrap();
        assert_eq!(blocks.len(), 4);
        for v in data.values().iter() {
            assert!(*v == 0.0 || *v == 1.0 || *v == 2.0);
        }
    }

    #[test]
    fn snp_maf_half_gives_mean_one() {
        let cfg = SnpSimConfig {
            n_samples: 2000,
            n_variables: 8,
            n_blocks: 2,
            within_block_corr: (0.5, 0.5),
            maf_range: (0.5, 0.5),
            seed: 11,
        };
        let (data, _) = simulate_snp_matrix(&cfg).unwrap();
        for j in 0..8 {
            let mean = linalg::mean(data.column(j));
            assert!((mean - 1.0).abs() < 0.1, "column {j} mean {mean}");
        }
    }

    #[test]
    fn snp_high_latent_corr_shows_in_genotypes() {
        let cfg = SnpSimConfig {
            n_samples: 2000,
            n_variables: 5,
            n_blocks: 1,
            within_block_corr: (0.99, 0.99),
            maf_range: (0.3, 0.3),
            seed: 5,
        };
        let (data, _) = simulate_snp_matrix(&cfg).unwrap();
        for a in 0..5 {
            for b in (a + 1)..5 {
                let r = linalg::pearson(data.column(a), data.column(b));
                assert!(r > 0.8, "pair ({a},{b}) correlation {r}");
            }
        }
    }

    #[test]
    fn snp_zero_corr_looks_independent() {
        let n = 2000;
        let cfg = SnpSimConfig {
            n_samples: n,
            n_variables: 6,
            n_blocks: 1,
            within_block_corr: (0.0, 0.0),
            maf_range: (0.4, 0.4),
            seed: 19,
        };
        let (data, _) = simulate_snp_matrix(&cfg).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        for a in 0..6 {
            for b in (a + 1)..6 {
                let r = linalg::pearson(data.column(a), data.column(b));
                assert!(r.abs() < bound, "pair ({a},{b}) correlation {r}");
            }
        }
    }

    #[test]
    fn pln_identity_covariance_matches_lognormal_mean() {
        // mu = 0, unit latent sd, no correlation: E[X] = e^{1/2}.
        let cfg = PlnSimConfig {
            n_samples: 5000,
            n_variables: 10,
            n_blocks: 10,
            corr_range: (0.0, 0.0),
            mu: vec![0.0; 10],
            latent_sd: 1.0,
            seed: 2,
        };
        let (data, _) = simulate_pln_matrix(&cfg).unwrap();
        let grand_mean = data.values().sum() / (5000.0 * 10.0);
        let expected = 0.5f64.exp();
        // Count sd is ~2.51, grand mean over 50k cells: 3 SE ~ 0.034.
        assert!(
            (grand_mean - expected).abs() < 0.034,
            "grand mean {grand_mean} vs {expected}"
        );
    }

    #[test]
    fn pln_degenerate_latent_is_plain_poisson() {
        let mu = 2.0f64.ln();
        let cfg = PlnSimConfig {
            n_samples: 4000,
            n_variables: 5,
            n_blocks: 1,
            corr_range: (0.5, 0.5),
            mu: vec![mu; 5],
            latent_sd: 0.0,
            seed: 7,
        };
        let (data, _) = simulate_pln_matrix(&cfg).unwrap();
        let grand_mean = data.values().sum() / (4000.0 * 5.0);
        assert!((grand_mean - 2.0).abs() < 0.07, "mean {grand_mean}");
        // Poisson: variance equals the mean.
        let var: f64 = data
            .values()
            .iter()
            .map(|v| (v - grand_mean) * (v - grand_mean))
            .sum::<f64>()
            / (4000.0 * 5.0 - 1.0);
        let ratio = var / grand_mean;
        assert!((ratio - 1.0).abs() < 0.1, "var/mean {ratio}");
    }

    #[test]
    fn pln_block_correlation_contrast() {
        // Within-block count correlation exceeds cross-block correlation;
        // assessed with a label permutation test.
        let cfg = PlnSimConfig {
            n_samples: 1000,
            n_variables: 12,
            n_blocks: 3,
            corr_range: (0.9, 0.9),
            mu: vec![3.0; 12],
            latent_sd: 1.0,
            seed: 13,
        };
        let (data, blocks) = simulate_pln_matrix(&cfg).unwrap();
        let block_of = |j: usize| blocks.iter().position(|b| b.contains(&j)).unwrap();
        let contrast = |assignment: &dyn Fn(usize) -> usize| -> f64 {
            let (mut within, mut cross) = ((0.0, 0usize), (0.0, 0usize));
            for a in 0..12 {
                for b in (a + 1)..12 {
                    let r = linalg::pearson(data.column(a), data.column(b));
                    if assignment(a) == assignment(b) {
                        within = (within.0 + r, within.1 + 1);
                    } else {
                        cross = (cross.0 + r, cross.1 + 1);
                    }
                }
            }
            within.0 / within.1 as f64 - cross.0 / cross.1 as f64
        };
        let observed = contrast(&|j| block_of(j));
        // Permutation null: shuffle the block labels of the columns.
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut exceed = 0usize;
        let n_perm = 200;
        for _ in 0..n_perm {
            let mut labels: Vec<usize> = (0..12).map(block_of).collect();
            labels.shuffle(&mut rng);
            if contrast(&|j| labels[j]) >= observed {
                exceed += 1;
            }
        }
        let p = exceed as f64 / n_perm as f64;
        assert!(p < 0.01, "permutation p = {p}");
    }

    fn toy_supervariables(seed: u64) -> (SuperVariableSet, SuperVariableSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xg = Array2::from_shape_fn((60, 6), |_| rng.gen_range(-1.0..1.0f64));
        let xm = Array2::from_shape_fn((60, 4), |_| rng.gen_range(-1.0..1.0f64));
        let gs_g = WeightedGroupSet::from_partition(&contiguous_blocks(6, 3), 6).unwrap();
        let gs_m = WeightedGroupSet::from_partition(&contiguous_blocks(4, 2), 4).unwrap();
        (
            compress(&xg, &gs_g, Summary::Mean).unwrap(),
            compress(&xm, &gs_m, Summary::Mean).unwrap(),
        )
    }

    #[test]
    fn phenotype_noiseless_single_pair() {
        let (sv_g, sv_m) = toy_supervariables(1);
        let cfg = PhenotypeSimConfig {
            n_interactions: 1,
            main_effect_range: (0.0, 0.0),
            interaction_effect_range: (1.0, 1.0),
            signed_effects: false,
            standardize_inputs: false,
            noise_sd: 0.0,
            seed: 4,
        };
        let (y, truth) = simulate_phenotype(&sv_g, &sv_m, &cfg).unwrap();
        assert_eq!(truth.pairs.len(), 1);
        let pair = truth.pairs[0];
        assert_eq!(pair.theta, 1.0);
        for i in 0..y.len() {
            let expected = sv_g.columns[(i, pair.g)] * sv_m.columns[(i, pair.m)];
            assert!((y.values()[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn phenotype_truth_has_i_blocks() {
        let (sv_g, sv_m) = toy_supervariables(2);
        let cfg = PhenotypeSimConfig {
            n_interactions: 5,
            seed: 9,
            ..PhenotypeSimConfig::default()
        };
        let (_, truth) = simulate_phenotype(&sv_g, &sv_m, &cfg).unwrap();
        assert_eq!(truth.pairs.len(), 5);
        // Disjoint partitions: nonzero cells are exactly the pair rectangles.
        let expected_cells: usize = truth
            .pairs
            .iter()
            .map(|p| {
                sv_g.group_refs.groups()[p.g].members.len()
                    * sv_m.group_refs.groups()[p.m].members.len()
            })
            .sum();
        assert_eq!(truth.variable_matrix.count_nonzero(), expected_cells);
        // Strong dependency in the truth: every parent has a main effect.
        for p in &truth.pairs {
            assert!(truth.main_effects_g.iter().any(|&(g, _)| g == p.g));
            assert!(truth.main_effects_m.iter().any(|&(m, _)| m == p.m));
        }
    }

    #[test]
    fn phenotype_noise_adds_variance() {
        let (sv_g, sv_m) = toy_supervariables(3);
        let sigma = 2.0;
        let cfg = PhenotypeSimConfig {
            n_interactions: 2,
            noise_sd: sigma,
            seed: 10,
            ..PhenotypeSimConfig::default()
        };
        let (y, _) = simulate_phenotype(&sv_g, &sv_m, &cfg).unwrap();
        let var = {
            let sd = linalg::sample_sd(y.values().view());
            sd * sd
        };
        assert!(var >= sigma * sigma * 0.5, "var {var}");
    }

    #[test]
    fn phenotype_rejects_too_many_pairs() {
        let (sv_g, sv_m) = toy_supervariables(4);
        let cfg = PhenotypeSimConfig {
            n_interactions: 1000,
            ..PhenotypeSimConfig::default()
        };
        assert!(matches!(
            simulate_phenotype(&sv_g, &sv_m, &cfg),
            Err(Error::InsufficientGroups { .. })
        ));
    }

    #[test]
    fn generators_are_bit_reproducible() {
        let cfg = SnpSimConfig {
            n_samples: 30,
            n_variables: 12,
            n_blocks: 3,
            seed: 21,
            ..SnpSimConfig::default()
        };
        let (a, _) = simulate_snp_matrix(&cfg).unwrap();
        let (b, _) = simulate_snp_matrix(&cfg).unwrap();
        assert_eq!(a.values(), b.values());

        let pln = PlnSimConfig {
            n_samples: 20,
            n_variables: 6,
            n_blocks: 2,
            mu: vec![1.0; 6],
            seed: 21,
            ..PlnSimConfig::default()
        };
        let (p1, _) = simulate_pln_matrix(&pln).unwrap();
        let (p2, _) = simulate_pln_matrix(&pln).unwrap();
        assert_eq!(p1.values(), p2.values());

        let (sv_g, sv_m) = toy_supervariables(5);
        let pcfg = PhenotypeSimConfig {
            n_interactions: 3,
            seed: 33,
            ..PhenotypeSimConfig::default()
        };
        let (y1, t1) = simulate_phenotype(&sv_g, &sv_m, &pcfg).unwrap();
        let (y2, t2) = simulate_phenotype(&sv_g, &sv_m, &pcfg).unwrap();
        assert_eq!(y1.values(), y2.values());
        assert_eq!(t1.pairs.len(), t2.pairs.len());

        let different = SnpSimConfig { seed: 22, ..cfg };
        let (c, _) = simulate_snp_matrix(&different).unwrap();
        assert_ne!(a.values(), c.values());
    }
}
