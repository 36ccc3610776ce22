//! Temporary: per-stage loss accounting over replicates and configs.
use sicomore_core::compress::*;
use sicomore_core::evaluate::precision_recall;
use sicomore_core::model::Dataset;
use sicomore_core::pipeline::*;
use sicomore_core::preprocess::*;
use sicomore_core::simulate::*;

fn main() {
    let configs: Vec<(&str, (f64, f64), (f64, f64), bool)> = vec![
        ("A m(.5,1.5) t(.5,1.5) unsgn", (0.5, 1.5), (0.5, 1.5), false),
        ("B m(1,1.4) t(1.3,1.6) unsgn", (1.0, 1.4), (1.3, 1.6), false),
        ("C m(1,1.4) t(.8,1.2) unsgn", (1.0, 1.4), (0.8, 1.2), false),
        ("D m(1.5,2) t(.8,1.2) unsgn", (1.5, 2.0), (0.8, 1.2), false),
    ];
    for (name, main_r, int_r, signed) in configs {
        let mut recalls = Vec::new();
        let mut diag = Vec::new();
        for rep in 0..10u64 {
            let seed = 1 ^ rep;
            let n = 100;
            let (x_g, blocks_g) = simulate_snp_matrix(&SnpSimConfig {
                n_samples: n, seed: seed.wrapping_add(1), ..SnpSimConfig::default()
            }).unwrap();
            let (x_m, blocks_m) = simulate_pln_matrix(&PlnSimConfig {
                n_samples: n, seed: seed.wrapping_add(2), ..PlnSimConfig::default()
            }).unwrap();
            let clr = clr_pipeline(x_m.values(), &ClrConfig::default()).unwrap();
            let gs_g = WeightedGroupSet::from_partition(&blocks_g, 200).unwrap();
            let gs_m = WeightedGroupSet::from_partition(&blocks_m, 100).unwrap();
            let sv_gt = compress(x_g.values(), &gs_g, Summary::Mean).unwrap();
            let sv_mt = compress(&clr, &gs_m, Summary::Mean).unwrap();
            let (y, truth) = simulate_phenotype(&sv_gt, &sv_mt, &PhenotypeSimConfig {
                n_interactions: 5, noise_sd: 0.5, seed: seed.wrapping_add(3),
                main_effect_range: main_r, interaction_effect_range: int_r,
                signed_effects: signed, ..PhenotypeSimConfig::default()
            }).unwrap();
            let opts = AnalysisOptions { seed: seed.wrapping_add(4), ..AnalysisOptions::default() };
            let analysis = analyze(
                &Dataset::new(x_g.values().clone(), x_g.variable_names().to_vec()).unwrap(),
                &x_m, &y, &opts,
            ).unwrap();
            let pr = precision_recall(&analysis.report.hits_variables, &truth.variable_matrix).unwrap();
            let r = pr.recall.unwrap_or(0.0);
            recalls.push(r);
            // Stage accounting: how many parent blocks have >=60% of their
            // columns covered by some selected group.
            let cov = |sel: &[sicomore_core::testing::ReportGroup], blocks: &Vec<Vec<usize>>, parents: &[usize]| -> usize {
                parents.iter().filter(|&&p| {
                    let block = &blocks[p];
                    sel.iter().any(|s| {
                        let inter = s.members.iter().filter(|m| block.contains(m)).count();
                        inter as f64 / block.len() as f64 >= 0.6
                    })
                }).count()
            };
            let pg: Vec<usize> = truth.main_effects_g.iter().map(|x| x.0).collect();
            let pm: Vec<usize> = truth.main_effects_m.iter().map(|x| x.0).collect();
            diag.push(format!(
                "    rep{rep} fact({},{}) Gcov {}/{} Mcov {}/{} tested {} hits {} recall {:.2}",
                pg.len(), pm.len(),
                cov(&analysis.report.g_groups, &blocks_g, &pg), pg.len(),
                cov(&analysis.report.m_groups, &blocks_m, &pm), pm.len(),
                analysis.report.n_testable, analysis.report.n_hits(), r
            ));
        }
        recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (recalls[4] + recalls[5]);
        println!("{name}: median {median:.2} recalls {:?}",
            recalls.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>());
        for d in diag { println!("{d}"); }
    }
}
