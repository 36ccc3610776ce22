//! Temporary diagnostic for one benchmark replicate.

use ndarray::Array2;
use sicomore_core::cluster::*;
use sicomore_core::compress::*;
use sicomore_core::lasso::*;
use sicomore_core::linalg;
use sicomore_core::preprocess::*;
use sicomore_core::simulate::*;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let n = 100;
    let snp = SnpSimConfig {
        n_samples: n,
        seed: seed.wrapping_add(1),
        ..SnpSimConfig::default()
    };
    let (x_g, blocks_g) = simulate_snp_matrix(&snp).unwrap();
    let pln = PlnSimConfig {
        n_samples: n,
        seed: seed.wrapping_add(2),
        ..PlnSimConfig::default()
    };
    let (x_m, blocks_m) = simulate_pln_matrix(&pln).unwrap();
    let clr = clr_pipeline(x_m.values(), &ClrConfig::default()).unwrap();
    let gs_g = WeightedGroupSet::from_partition(&blocks_g, 200).unwrap();
    let gs_m = WeightedGroupSet::from_partition(&blocks_m, 100).unwrap();
    let sv_g_true = compress(x_g.values(), &gs_g, Summary::Mean).unwrap();
    let sv_m_true = compress(&clr, &gs_m, Summary::Mean).unwrap();
    let phen = PhenotypeSimConfig {
        n_interactions: 5,
        noise_sd: 0.5,
        seed: seed.wrapping_add(3),
        ..PhenotypeSimConfig::default()
    };
    let (y, truth) = simulate_phenotype(&sv_g_true, &sv_m_true, &phen).unwrap();
    println!("truth pairs: {:?}", truth.pairs);
    println!(
        "y var: {:.3}",
        linalg::sample_sd(y.values().view()).powi(2)
    );

    // Pipeline stages for each view.
    for (label, matrix, truth_blocks) in [
        ("G", x_g.values().clone(), &blocks_g),
        ("M", clr.clone(), &blocks_m),
    ] {
        let h = if label == "G" {
            constrained_ward_cluster(&matrix).unwrap()
        } else {
            ward_cluster(&matrix, Dissimilarity::EuclideanOnColumns).unwrap()
        };
        let expanded = expand_hierarchy(&h).unwrap();
        let restricted = restrict_search_space(&expanded, 5.0).unwrap();
        let sv = compress(&matrix, &restricted, Summary::Mean).unwrap();
        let (std_cols, info) = standardize_columns(&sv.columns);
        println!(
            "view {label}: {} groups ({} constant)",
            restricted.len(),
            info.constant_columns.len()
        );

        // How well do tree groups match the true blocks?
        for (bi, block) in truth_blocks.iter().enumerate() {
            let mut best = (0usize, 0.0f64);
            for (gi, g) in restricted.groups().iter().enumerate() {
                let inter = g
                    .members
                    .iter()
                    .filter(|m| block.contains(m))
                    .count() as f64;
                let jac = inter / (g.members.len() + block.len()) as f64 * 2.0;
                if jac > best.1 {
                    best = (gi, jac);
                }
            }
            let g = &restricted.groups()[best.0];
            println!(
                "  true block {bi} (len {}): best group {} len {} dice {:.2} gap {:.3} rho {:.3}",
                block.len(),
                best.0,
                g.members.len(),
                best.1,
                g.gap,
                g.weight
            );
        }

        let weights = restricted.weights();
        let cfg = LassoConfig {
            penalty_factors: Some(weights.clone()),
            selection_rule: SelectionRule::Cv(10),
            seed: seed.wrapping_add(4),
            ..LassoConfig::default()
        };
        let fit = weighted_lasso_path(&std_cols, y.values(), &cfg).unwrap();
        println!(
            "  lasso: lambda {:.4} active {:?}",
            fit.lambda_selected, fit.active_set
        );
        // Path shape: lambda, actives, rss at a few grid points.
        for (i, pt) in fit.path.iter().enumerate() {
            if i % 10 == 0 || i + 1 == fit.path.len() {
                println!(
                    "    path[{i}] lambda {:.4} active {} rss {:.2}",
                    pt.lambda, pt.n_active, pt.rss
                );
            }
        }
        for &a in &fit.active_set {
            let g = &restricted.groups()[a];
            println!(
                "    group {a}: len {} gap {:.3} rho {:.3} members[0..4] {:?}",
                g.members.len(),
                g.gap,
                g.weight,
                &g.members[..g.members.len().min(4)]
            );
        }
        // Active sets along the path vs true parents.
        {
            let parents: Vec<usize> = truth.pairs.iter().map(|p| if label == "G" { p.g } else { p.m }).collect();
            let truth_groups: Vec<(usize, usize)> = truth_blocks
                .iter()
                .enumerate()
                .map(|(bi, block)| {
                    let mut best = (0usize, 0.0f64);
                    for (gi, g) in restricted.groups().iter().enumerate() {
                        let inter = g.members.iter().filter(|m| block.contains(m)).count() as f64;
                        let jac = inter / (g.members.len() + block.len()) as f64 * 2.0;
                        if jac > best.1 { best = (gi, jac); }
                    }
                    (bi, best.0)
                })
                .collect();
            for (i, pt) in fit.path.iter().enumerate() {
                if [10usize, 20, 25, 30, 35, 40].contains(&i) {
                    let active: Vec<usize> = pt.beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect();
                    let labels: Vec<String> = active.iter().map(|&a| {
                        let grp = &restricted.groups()[a];
                        let hit = truth_groups.iter().find(|(_, gi)| *gi == a);
                        match hit {
                            Some((bi, _)) if parents.contains(bi) => format!("{a}=PARENT(b{bi},len{})", grp.members.len()),
                            Some((bi, _)) => format!("{a}=block{bi}(len{})", grp.members.len()),
                            None => format!("{a}(len{})", grp.members.len()),
                        }
                    }).collect();
                    println!("    path[{i}] lambda {:.3}: {}", pt.lambda, labels.join(" "));
                }
            }
        }
        // CV curve inspection.
        {
            use sicomore_core::lasso::cv_folds;
            let n = std_cols.nrows();
            let d = std_cols.ncols();
            let fold = cv_folds(n, 10, seed.wrapping_add(4));
            let lambdas: Vec<f64> = fit.path.iter().map(|p| p.lambda).collect();
            let mut sse = vec![0.0f64; lambdas.len()];
            for f in 0..10 {
                let tr: Vec<usize> = (0..n).filter(|i| fold[*i] != f).collect();
                let te: Vec<usize> = (0..n).filter(|i| fold[*i] == f).collect();
                let mut xt = Array2::zeros((tr.len(), d));
                let mut yt = ndarray::Array1::zeros(tr.len());
                for (r, &i) in tr.iter().enumerate() {
                    xt.row_mut(r).assign(&std_cols.row(i));
                    yt[r] = y.values()[i];
                }
                let ym = yt.sum() / yt.len() as f64;
                let ytc = yt.mapv(|v| v - ym);
                let sub = LassoConfig {
                    lambdas: Some(lambdas.clone()),
                    penalty_factors: Some(weights.clone()),
                    selection_rule: SelectionRule::Bic,
                    ..LassoConfig::default()
                };
                let subfit = weighted_lasso_path(&xt, &(ytc.clone() + ym), &sub).unwrap();
                for (li, pt) in subfit.path.iter().enumerate() {
                    for &i in &te {
                        let mut pred = ym;
                        for (j, &b) in pt.beta.iter().enumerate() {
                            if b != 0.0 { pred += b * std_cols[(i, j)]; }
                        }
                        let e = y.values()[i] - pred;
                        sse[li] += e * e;
                    }
                }
            }
            for (i, s) in sse.iter().enumerate() {
                if i % 5 == 0 {
                    println!("    cv[{i}] lambda {:.4} mse {:.3} (full-path active {})",
                        lambdas[i], s / n as f64, fit.path[i].n_active);
                }
            }
        }
        // Correlation of the true supervariables with y, for reference.
        let sv_true = if label == "G" { &sv_g_true } else { &sv_m_true };
        let corrs: Vec<f64> = (0..sv_true.n_groups())
            .map(|g| linalg::pearson(sv_true.columns.column(g), y.values().view()))
            .collect();
        println!(
            "  true supervariable |corr with y|: {:?}",
            corrs.iter().map(|c| (c.abs() * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        let _ = Array2::<f64>::zeros((1, 1));
    }
}
