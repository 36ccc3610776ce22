//! Command-line pipeline driver.
//!
//! Subcommands: `run` (full pipeline on files), `simulate` (write one
//! synthetic scenario), `benchmark` (simulation study grid), `explore`
//! (greedy height-pair exploration) and `theorem-check` (Monte-Carlo
//! verification of the averaged-estimator accuracy bound).
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure.

use clap::{Args, Parser, Subcommand};
use sicomore_core::cluster::Dissimilarity;
use sicomore_core::compress::Summary;
use sicomore_core::error::Error;
use sicomore_core::evaluate::{
    averaged_estimator_gain, benchmark_summary, benchmark_tsv, run_benchmark, BenchmarkConfig,
    Method, TheoremCheckConfig,
};
use sicomore_core::explore::{explore, trace_tsv, ExploreConfig, ExploreCriterion, TieRule};
use sicomore_core::lasso::{LassoConfig, SelectionRule};
use sicomore_core::pipeline::{
    run_pipeline, AnalysisOptions, ClusterMethod, PipelineConfig, Weighting,
};
use sicomore_core::preprocess::{ClrConfig, ZeroReplacement};
use sicomore_core::simulate::{
    simulate_phenotype, simulate_pln_matrix, simulate_snp_matrix, PhenotypeSimConfig,
    PlnSimConfig, SnpSimConfig,
};
use sicomore_core::testing::Correction;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sicomore",
    about = "Cross-view interaction detection with hierarchy-compressed supervariables",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: preprocess, cluster, compress, select, test.
    Run(RunArgs),
    /// Write one synthetic scenario (x_G.tsv, x_M.tsv, y.tsv, truth.json).
    Simulate(SimulateArgs),
    /// Run the simulation study grid and write a tidy result table.
    Benchmark(BenchmarkArgs),
    /// Greedy exploration of the two hierarchies over height pairs.
    Explore(ExploreArgs),
    /// Monte-Carlo check of the averaged-estimator accuracy bound.
    TheoremCheck(TheoremArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    x_g: Option<PathBuf>,
    #[arg(long)]
    x_m: Option<PathBuf>,
    #[arg(long)]
    y: Option<PathBuf>,
    /// Output directory for report.tsv/report.json/groups_*.json/manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Apply the centered log-ratio transform to view M.
    #[arg(long)]
    clr: Option<bool>,
    #[arg(long)]
    pseudocount: Option<f64>,
    /// Zero handling before proportions: pseudocount | multiplicative.
    #[arg(long)]
    zero_replacement: Option<String>,
    /// Fraction of columns kept by the marginal screen (1 = off).
    #[arg(long)]
    screen_keep: Option<f64>,
    /// constrained | ward-euclidean | ward-correlation
    #[arg(long)]
    cluster_g: Option<String>,
    #[arg(long)]
    cluster_m: Option<String>,
    /// mean | median | pca1
    #[arg(long)]
    summary: Option<String>,
    #[arg(long)]
    restrict_factor: Option<f64>,
    #[arg(long)]
    rho_max: Option<f64>,
    /// gap-weights | unweighted
    #[arg(long)]
    weighting: Option<String>,
    #[arg(long)]
    n_lambda: Option<usize>,
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    /// cv<k> (e.g. cv10) | bic
    #[arg(long)]
    select: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// holm | bh
    #[arg(long)]
    correction: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Flat key-value config file contents; every key optional.
#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    x_g: Option<PathBuf>,
    x_m: Option<PathBuf>,
    y: Option<PathBuf>,
    out: Option<PathBuf>,
    clr: Option<bool>,
    pseudocount: Option<f64>,
    zero_replacement: Option<String>,
    screen_keep: Option<f64>,
    cluster_g: Option<String>,
    cluster_m: Option<String>,
    summary: Option<String>,
    restrict_factor: Option<f64>,
    rho_max: Option<f64>,
    weighting: Option<String>,
    n_lambda: Option<usize>,
    lambda_min_ratio: Option<f64>,
    select: Option<String>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    alpha: Option<f64>,
    correction: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_cluster(s: &str) -> Result<ClusterMethod, Error> {
    match s {
        "constrained" => Ok(ClusterMethod::Constrained),
        "ward-euclidean" => Ok(ClusterMethod::WardEuclidean),
        "ward-correlation" => Ok(ClusterMethod::WardCorrelation),
        other => Err(config_err(format!("unknown clustering '{other}'"))),
    }
}

fn parse_summary(s: &str) -> Result<Summary, Error> {
    match s {
        "mean" => Ok(Summary::Mean),
        "median" => Ok(Summary::Median),
        "pca1" => Ok(Summary::Pca1),
        other => Err(config_err(format!("unknown summary '{other}'"))),
    }
}

fn parse_selection(s: &str) -> Result<SelectionRule, Error> {
    if s == "bic" {
        return Ok(SelectionRule::Bic);
    }
    if let Some(k) = s.strip_prefix("cv") {
        let folds: usize = k
            .parse()
            .map_err(|_| config_err(format!("bad selection rule '{s}'")))?;
        return Ok(SelectionRule::Cv(folds));
    }
    Err(config_err(format!("unknown selection rule '{s}'")))
}

fn parse_correction(s: &str) -> Result<Correction, Error> {
    match s {
        "holm" => Ok(Correction::Holm),
        "bh" => Ok(Correction::Bh),
        other => Err(config_err(format!("unknown correction '{other}'"))),
    }
}

fn parse_weighting(s: &str) -> Result<Weighting, Error> {
    match s {
        "gap-weights" => Ok(Weighting::GapWeights),
        "unweighted" => Ok(Weighting::Unweighted),
        other => Err(config_err(format!("unknown weighting '{other}'"))),
    }
}

fn parse_zero_replacement(s: &str) -> Result<ZeroReplacement, Error> {
    match s {
        "pseudocount" => Ok(ZeroReplacement::Pseudocount),
        "multiplicative" => Ok(ZeroReplacement::Multiplicative),
        other => Err(config_err(format!("unknown zero replacement '{other}'"))),
    }
}

fn build_pipeline_config(args: &RunArgs) -> Result<PipelineConfig, Error> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| config_err(format!("bad config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    // Flags win over the config file.
    let pick = |flag: &Option<PathBuf>, file_value: Option<PathBuf>, name: &str| {
        flag.clone()
            .or(file_value)
            .ok_or_else(|| config_err(format!("missing required input '{name}'")))
    };
    let x_g = pick(&args.x_g, file.x_g, "x_g")?;
    let x_m = pick(&args.x_m, file.x_m, "x_m")?;
    let y = pick(&args.y, file.y, "y")?;
    let out_dir = pick(&args.out, file.out, "out")?;

    let defaults = AnalysisOptions::default();
    let clr_on = args.clr.or(file.clr).unwrap_or(true);
    let clr = if clr_on {
        let mut cfg = ClrConfig::default();
        if let Some(p) = args.pseudocount.or(file.pseudocount) {
            cfg.pseudocount = p;
        }
        if let Some(z) = args
            .zero_replacement
            .as_deref()
            .or(file.zero_replacement.as_deref())
        {
            cfg.zero_replacement = parse_zero_replacement(z)?;
        }
        Some(cfg)
    } else {
        None
    };
    let cluster_g = match args.cluster_g.as_deref().or(file.cluster_g.as_deref()) {
        Some(s) => parse_cluster(s)?,
        None => defaults.cluster_g,
    };
    let cluster_m = match args.cluster_m.as_deref().or(file.cluster_m.as_deref()) {
        Some(s) => parse_cluster(s)?,
        None => defaults.cluster_m,
    };
    let summary = match args.summary.as_deref().or(file.summary.as_deref()) {
        Some(s) => parse_summary(s)?,
        None => defaults.summary,
    };
    let weighting = match args.weighting.as_deref().or(file.weighting.as_deref()) {
        Some(s) => parse_weighting(s)?,
        None => defaults.weighting,
    };
    let selection_rule = match args.select.as_deref().or(file.select.as_deref()) {
        Some(s) => parse_selection(s)?,
        None => defaults.lasso.selection_rule,
    };
    let correction = match args.correction.as_deref().or(file.correction.as_deref()) {
        Some(s) => parse_correction(s)?,
        None => defaults.correction,
    };
    let seed = args.seed.or(file.seed).unwrap_or(0);

    let lasso = LassoConfig {
        n_lambda: args.n_lambda.or(file.n_lambda).unwrap_or(100),
        lambda_min_ratio: args.lambda_min_ratio.or(file.lambda_min_ratio),
        max_iter: args.max_iter.or(file.max_iter).unwrap_or(100_000),
        tol: args.tol.or(file.tol).unwrap_or(1e-6),
        selection_rule,
        seed,
        ..LassoConfig::default()
    };

    Ok(PipelineConfig {
        x_g,
        x_m,
        y,
        out_dir,
        threads: args.threads.or(file.threads).unwrap_or(1),
        options: AnalysisOptions {
            clr,
            screen_keep: args.screen_keep.or(file.screen_keep).unwrap_or(1.0),
            cluster_g,
            cluster_m,
            summary,
            restrict_factor: args
                .restrict_factor
                .or(file.restrict_factor)
                .unwrap_or(defaults.restrict_factor),
            rho_max: args.rho_max.or(file.rho_max).unwrap_or(defaults.rho_max),
            weighting,
            lasso,
            alpha: args.alpha.or(file.alpha).unwrap_or(0.05),
            correction,
            seed,
        },
    })
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let cfg = build_pipeline_config(args)?;
    let outcome = run_pipeline(&cfg)?;
    eprintln!(
        "wrote {} files to {} ({} pairs tested, {} hits)",
        outcome.written.len(),
        cfg.out_dir.display(),
        outcome.analysis.report.n_testable,
        outcome.analysis.report.n_hits()
    );
    Ok(())
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory for x_G.tsv, x_M.tsv, y.tsv, truth.json.
    #[arg(long)]
    out: PathBuf,
    /// Sample count N.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Phenotype noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Number of true interacting group pairs.
    #[arg(long, default_value_t = 5)]
    i: usize,
    #[arg(long, default_value_t = 200)]
    d_g: usize,
    #[arg(long, default_value_t = 100)]
    d_m: usize,
    #[arg(long, default_value_t = 16)]
    blocks_g: usize,
    #[arg(long, default_value_t = 6)]
    blocks_m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    use sicomore_core::compress::{compress, WeightedGroupSet};
    use sicomore_core::preprocess::clr_pipeline;

    let snp = SnpSimConfig {
        n_samples: args.n,
        n_variables: args.d_g,
        n_blocks: args.blocks_g,
        seed: args.seed.wrapping_add(1),
        ..SnpSimConfig::default()
    };
    let (x_g, blocks_g) = simulate_snp_matrix(&snp)?;
    let pln = PlnSimConfig {
        n_samples: args.n,
        n_variables: args.d_m,
        n_blocks: args.blocks_m,
        mu: vec![50f64.ln(); args.d_m],
        seed: args.seed.wrapping_add(2),
        ..PlnSimConfig::default()
    };
    let (x_m, blocks_m) = simulate_pln_matrix(&pln)?;

    let clr = clr_pipeline(x_m.values(), &ClrConfig::default())?;
    let gs_g = WeightedGroupSet::from_partition(&blocks_g, args.d_g)?;
    let gs_m = WeightedGroupSet::from_partition(&blocks_m, args.d_m)?;
    let sv_g = compress(x_g.values(), &gs_g, Summary::Mean)?;
    let sv_m = compress(&clr, &gs_m, Summary::Mean)?;
    let phenotype = PhenotypeSimConfig {
        n_interactions: args.i,
        noise_sd: args.sigma,
        seed: args.seed.wrapping_add(3),
        ..PhenotypeSimConfig::default()
    };
    let (y, truth) = simulate_phenotype(&sv_g, &sv_m, &phenotype)?;

    std::fs::create_dir_all(&args.out)?;
    sicomore_core::io::write_dataset(&args.out.join("x_G.tsv"), &x_g)?;
    sicomore_core::io::write_dataset(&args.out.join("x_M.tsv"), &x_m)?;
    sicomore_core::io::write_response(&args.out.join("y.tsv"), &y)?;
    let truth_json = serde_json::json!({
        "seed": args.seed,
        "n": args.n,
        "sigma": args.sigma,
        "i": args.i,
        "blocks_g": blocks_g,
        "blocks_m": blocks_m,
        "pairs": truth.pairs,
        "main_effects_g": truth.main_effects_g,
        "main_effects_m": truth.main_effects_m,
        "gamma_g": truth.gamma_g,
        "gamma_m": truth.gamma_m,
        "variable_matrix": truth.variable_matrix,
    });
    let mut text = serde_json::to_string_pretty(&truth_json)?;
    text.push('\n');
    std::fs::write(args.out.join("truth.json"), text)?;
    eprintln!("wrote scenario to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated sample counts.
    #[arg(long, default_value = "100")]
    n: String,
    /// Comma-separated noise standard deviations.
    #[arg(long, default_value = "0.5")]
    sigma: String,
    /// Comma-separated true interaction counts.
    #[arg(long, default_value = "5")]
    i: String,
    /// Comma-separated methods: sicomore,hcar.
    #[arg(long, default_value = "sicomore,hcar")]
    methods: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 200)]
    d_g: usize,
    #[arg(long, default_value_t = 100)]
    d_m: usize,
    #[arg(long, default_value_t = 16)]
    blocks_g: usize,
    #[arg(long, default_value_t = 6)]
    blocks_m: usize,
    /// cv<k> | bic
    #[arg(long, default_value = "cv10")]
    select: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| config_err(format!("bad {what} value '{tok}'")))
        })
        .collect()
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), Error> {
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|m| match m.trim() {
            "sicomore" => Ok(Method::Sicomore),
            "hcar" => Ok(Method::Hcar),
            other => Err(config_err(format!("unknown method '{other}'"))),
        })
        .collect::<Result<_, _>>()?;
    let cfg = BenchmarkConfig {
        n_samples: parse_list(&args.n, "n")?,
        noise_sds: parse_list(&args.sigma, "sigma")?,
        n_interactions: parse_list(&args.i, "i")?,
        methods,
        n_reps: args.reps,
        seed: args.seed,
        threads: args.threads,
        snp: SnpSimConfig {
            n_variables: args.d_g,
            n_blocks: args.blocks_g,
            ..SnpSimConfig::default()
        },
        pln: PlnSimConfig {
            n_variables: args.d_m,
            n_blocks: args.blocks_m,
            mu: vec![50f64.ln(); args.d_m],
            ..PlnSimConfig::default()
        },
        phenotype: PhenotypeSimConfig::default(),
        analysis: AnalysisOptions {
            lasso: LassoConfig {
                selection_rule: parse_selection(&args.select)?,
                ..LassoConfig::default()
            },
            ..AnalysisOptions::default()
        },
    };
    let rows = run_benchmark(&cfg)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("benchmark.tsv"), benchmark_tsv(&rows))?;
    let mut summary = serde_json::to_string_pretty(&benchmark_summary(&rows))?;
    summary.push('\n');
    std::fs::write(args.out.join("benchmark_summary.json"), summary)?;
    eprintln!(
        "wrote {} rows to {}",
        rows.len(),
        args.out.join("benchmark.tsv").display()
    );
    Ok(())
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    x_g: PathBuf,
    #[arg(long)]
    x_m: PathBuf,
    #[arg(long)]
    y: PathBuf,
    /// Apply clr to view M before exploring.
    #[arg(long, default_value_t = true)]
    clr: bool,
    /// aic | bic
    #[arg(long, default_value = "bic")]
    criterion: String,
    /// criterion | mse | sparsest
    #[arg(long, default_value = "criterion")]
    rule: String,
    /// Swap the automatic outer/inner loop assignment.
    #[arg(long)]
    swap_axes: bool,
    #[arg(long, default_value_t = 20)]
    max_features: usize,
}

fn cmd_explore(args: &ExploreArgs) -> Result<(), Error> {
    use sicomore_core::cluster::{constrained_ward_cluster, ward_cluster};
    use sicomore_core::preprocess::clr_pipeline;

    let x_g = sicomore_core::io::load_dataset(&args.x_g).map_err(|e| e.in_stage("load:view-G"))?;
    let x_m = sicomore_core::io::load_dataset(&args.x_m).map_err(|e| e.in_stage("load:view-M"))?;
    let y = sicomore_core::io::load_response(&args.y).map_err(|e| e.in_stage("load:response"))?;

    let m_matrix = if args.clr {
        clr_pipeline(x_m.values(), &ClrConfig::default())?
    } else {
        x_m.values().clone()
    };
    let h_g = constrained_ward_cluster(x_g.values())?;
    let h_m = ward_cluster(&m_matrix, Dissimilarity::EuclideanOnColumns)?;

    let criterion = match args.criterion.as_str() {
        "aic" => ExploreCriterion::Aic,
        "bic" => ExploreCriterion::Bic,
        other => return Err(config_err(format!("unknown criterion '{other}'"))),
    };
    let rule = match args.rule.as_str() {
        "criterion" => TieRule::Criterion,
        "mse" => TieRule::Mse,
        "sparsest" => TieRule::Sparsest,
        other => return Err(config_err(format!("unknown rule '{other}'"))),
    };
    let cfg = ExploreConfig {
        criterion,
        rule,
        swap_axes: if args.swap_axes { Some(true) } else { None },
        active_set: sicomore_core::explore::ActiveSetConfig {
            max_features: args.max_features,
            ..Default::default()
        },
        summary: Summary::Mean,
    };
    let result = explore(x_g.values(), &m_matrix, &h_g, &h_m, y.values(), &cfg)?;
    print!("{}", trace_tsv(&result.trace));
    eprintln!(
        "best model at (k={}, l={}): criterion {:.6}, {} active features, mse {:.6}",
        result.best.k,
        result.best.l,
        result.best.criterion_value,
        result.best.active_set.len(),
        result.best.mse
    );
    Ok(())
}

#[derive(Args)]
struct TheoremArgs {
    /// Group size m.
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long)]
    rho: f64,
    /// Comma-separated true coefficients (length m).
    #[arg(long)]
    beta: String,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 5000)]
    n_mc: usize,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Construct designs with exactly the requested Gram matrix.
    #[arg(long)]
    exact_gram: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_theorem(args: &TheoremArgs) -> Result<(), Error> {
    let cfg = TheoremCheckConfig {
        group_size: args.m,
        rho: args.rho,
        beta: parse_list(&args.beta, "beta")?,
        sigma: args.sigma,
        n_mc: args.n_mc,
        n_samples: args.n,
        exact_gram: args.exact_gram,
        seed: args.seed,
    };
    let result = averaged_estimator_gain(&cfg)?;
    let mut text = serde_json::to_string_pretty(&serde_json::to_value(result)?)?;
    text.push('\n');
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Explore(args) => cmd_explore(args),
        Command::TheoremCheck(args) => cmd_theorem(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
