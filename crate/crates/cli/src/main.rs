//! Command-line front end for the mediation path analysis pipeline.
//!
//! Four subcommands cover the pipeline end to end, each reading and
//! writing plain CSV/JSON files so every stage can be re-run and
//! inspected on its own:
//!
//! * `pca` — load a dataset, adjust for covariates, fit the exposure PCA,
//!   and write the model plus the score matrix;
//! * `fit` — the full estimation path: adjust → compress → grid search →
//!   winning fit, serialized together with the labels and scale records
//!   the effects stage needs;
//! * `effects` — decompose a saved fit into direct/indirect/total effect
//!   tables;
//! * `simulate` — run the synthetic-recovery study over seeded replicates
//!   and write per-replicate and aggregate tables.
//!
//! Every flag can also be supplied from a TOML config file (`--config`),
//! with command-line values taking precedence. All outputs are UTF-8 with
//! LF line endings, and every subcommand is deterministic given its flags
//! and seed — reruns produce byte-identical files. Warnings (PCA threshold
//! fallbacks, non-convergence) go to the log channel on stderr and never
//! change outputs; the process exits 0 unless a real error occurred.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use medpath::dataset::{load_dataset, residualize, standardize, ColumnRole, RoleSpec, Standardization};
use medpath::effects::{back_transform, decompose, export_report, EffectLabels, ReportFormat};
use medpath::pca::{fit_pca, select_num_components, transform, PcaModel};
use medpath::penalties::PenaltyWeights;
use medpath::simulation::{
    render_aggregate_csv, render_replicates_csv, run_replicates, CalibratedGrid, GridStrategy,
    ReplicateTuning, SimMetrics, SimSpec,
};
use medpath::solver::{FitConfig, FitRecord};
use medpath::tuning::{export_grid_csv, grid_search, BicVariant, TuningGrid, DEFAULT_ZERO_THRESHOLD};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// High-dimensional mediation path analysis.
#[derive(Parser, Debug)]
#[command(name = "medpath", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the exposure PCA and write the model and score matrix.
    Pca(PcaArgs),
    /// Run the full estimation pipeline and write the winning fit.
    Fit(FitArgs),
    /// Decompose a saved fit into effect tables.
    Effects(EffectsArgs),
    /// Run the synthetic-recovery simulation study.
    Simulate(SimulateArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// TOML config file; any flag may be given there, CLI values win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker thread cap for grid search and replicates
    /// (default: the MEDPATH_THREADS environment variable, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

/// Dataset location and column-role flags shared by `pca` and `fit`.
///
/// Role patterns match column names exactly, or by prefix with a trailing
/// `*` (`prot*` takes every column starting with "prot"; `*` alone takes
/// everything). When patterns overlap, exact names beat globs and longer
/// prefixes beat shorter ones, so `--mediator "m*" --exposure "*"` does
/// what it looks like it does.
#[derive(Args, Debug, Clone, Default)]
struct DatasetArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Exposure column pattern(s).
    #[arg(long = "exposure")]
    exposure: Vec<String>,

    /// Mediator column pattern(s).
    #[arg(long = "mediator")]
    mediator: Vec<String>,

    /// Outcome column (exactly one column must match).
    #[arg(long = "outcome")]
    outcome: Vec<String>,

    /// Covariate column pattern(s), regressed out of every block.
    #[arg(long = "covariate")]
    covariate: Vec<String>,

    /// Subject-id column.
    #[arg(long = "id")]
    id: Vec<String>,

    /// Column pattern(s) to drop entirely.
    #[arg(long = "ignore")]
    ignore: Vec<String>,
}

#[derive(Args, Debug)]
struct PcaArgs {
    #[command(flatten)]
    common: CommonArgs,

    #[command(flatten)]
    data: DatasetArgs,

    /// Standardize exposure columns to unit variance before the SVD.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    scale: Option<bool>,

    /// Keep components until this cumulative variance ratio is reached.
    #[arg(long)]
    threshold: Option<f64>,

    /// Explicit component count (overrides --threshold).
    #[arg(long)]
    q: Option<usize>,

    /// Output path for the fitted PCA model (JSON).
    #[arg(long)]
    model_out: Option<PathBuf>,

    /// Output path for the score matrix (CSV).
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,

    #[command(flatten)]
    data: DatasetArgs,

    /// Standardize exposure columns to unit variance before the SVD.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    scale: Option<bool>,

    /// Keep components until this cumulative variance ratio is reached.
    #[arg(long)]
    threshold: Option<f64>,

    /// Explicit component count (overrides --threshold).
    #[arg(long)]
    q: Option<usize>,

    /// Scale mediators and outcome to unit variance before fitting;
    /// reported effects are transformed back to original units.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    standardize: Option<bool>,

    /// λ1 grid values, comma-separated (default: 8 log-spaced values
    /// scaled to the data).
    #[arg(long, value_delimiter = ',')]
    lambda1: Vec<f64>,

    /// λ2/λ1 grid values, comma-separated.
    #[arg(long, value_delimiter = ',')]
    ratio2: Vec<f64>,

    /// λ3/λ1 grid values, comma-separated.
    #[arg(long, value_delimiter = ',')]
    ratio3: Vec<f64>,

    /// Inner-lasso constant grid values, comma-separated.
    #[arg(long, value_delimiter = ',')]
    c1: Vec<f64>,

    /// Active-set cutoff on |α̂β̂|.
    #[arg(long)]
    zero_threshold: Option<f64>,

    /// Solver stopping tolerance on the objective difference.
    #[arg(long)]
    tol: Option<f64>,

    /// Solver iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,

    /// Quadratic relaxation constant c0 (convexity needs c0 ≥ 1/2).
    #[arg(long)]
    c0: Option<f64>,

    /// Augmented-Lagrangian constant ρ.
    #[arg(long)]
    rho: Option<f64>,

    /// BIC variant for model selection: literal | gaussian.
    #[arg(long)]
    bic: Option<String>,

    /// Disable warm starts between neighboring grid cells.
    #[arg(long)]
    no_warm_start: bool,

    /// Output path for the winning fit (JSON).
    #[arg(long)]
    fit_out: Option<PathBuf>,

    /// Output path for the tuning table (CSV).
    #[arg(long)]
    grid_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EffectsArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Fit file written by `medpath fit`.
    #[arg(long)]
    fit: Option<PathBuf>,

    /// Report format: csv | json.
    #[arg(long)]
    format: Option<String>,

    /// Output path (default: effects.csv or effects.json).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Significant digits in CSV tables.
    #[arg(long)]
    precision: Option<usize>,

    /// Active-path cutoff on |IE| (default: the fit file's).
    #[arg(long)]
    zero_threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Sample size(s), comma-separated; one study per value.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,

    /// Raw exposure count.
    #[arg(long)]
    r: Option<usize>,

    /// Mediator count.
    #[arg(long)]
    p: Option<usize>,

    /// Eigenvalue decay ratio of the exposure covariance.
    #[arg(long)]
    decay_rate: Option<f64>,

    /// Largest covariance eigenvalue.
    #[arg(long)]
    top_eigenvalue: Option<f64>,

    /// Cumulative variance-ratio cutoff for the PCA step.
    #[arg(long)]
    variance_threshold: Option<f64>,

    /// Fraction of path cells that carry a planted effect.
    #[arg(long)]
    sparsity: Option<f64>,

    /// Magnitude of planted coefficients.
    #[arg(long)]
    effect_scale: Option<f64>,

    /// Mediator noise standard deviation.
    #[arg(long)]
    noise_sd_mediator: Option<f64>,

    /// Outcome noise standard deviation.
    #[arg(long)]
    noise_sd_outcome: Option<f64>,

    /// Replicates per sample size.
    #[arg(long)]
    n_reps: Option<usize>,

    /// Master seed; all replicate randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Grid strategy: calibrated | data-default.
    #[arg(long)]
    grid: Option<String>,

    /// Calibrated-ladder multipliers, comma-separated, tried in order.
    #[arg(long, value_delimiter = ',')]
    z_values: Vec<f64>,

    /// Inner-lasso constant of the calibrated ladder.
    #[arg(long)]
    cal_c1: Option<f64>,

    /// λ2/λ1 of the calibrated ladder.
    #[arg(long)]
    cal_ratio2: Option<f64>,

    /// λ3/λ1 of the calibrated ladder.
    #[arg(long)]
    cal_ratio3: Option<f64>,

    /// BIC variant: gaussian | literal.
    #[arg(long)]
    bic: Option<String>,

    /// ρ is this multiple of n.
    #[arg(long)]
    rho_scale: Option<f64>,

    /// Quadratic relaxation constant c0.
    #[arg(long)]
    c0: Option<f64>,

    /// Solver stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Solver iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,

    /// Disable warm starts along the λ ladder.
    #[arg(long)]
    no_warm_start: bool,

    /// Active-set cutoff for tuning and scoring.
    #[arg(long)]
    zero_threshold: Option<f64>,

    /// Output path for the per-replicate table (CSV); with several sample
    /// sizes, `_n{n}` is inserted before the extension.
    #[arg(long)]
    replicates_out: Option<PathBuf>,

    /// Output path for the aggregate table (CSV).
    #[arg(long)]
    aggregate_out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

/// The TOML config mirror of the CLI: one table per subcommand plus
/// top-level `threads`. Every field is optional; CLI flags win.
#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    threads: Option<usize>,
    pca: PcaSection,
    fit: FitSection,
    effects: EffectsSection,
    simulate: SimulateSection,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct DatasetSection {
    input: Option<PathBuf>,
    exposure: Vec<String>,
    mediator: Vec<String>,
    outcome: Vec<String>,
    covariate: Vec<String>,
    id: Vec<String>,
    ignore: Vec<String>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct PcaSection {
    #[serde(flatten)]
    data: DatasetSection,
    scale: Option<bool>,
    threshold: Option<f64>,
    q: Option<usize>,
    model_out: Option<PathBuf>,
    scores_out: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct FitSection {
    #[serde(flatten)]
    data: DatasetSection,
    scale: Option<bool>,
    threshold: Option<f64>,
    q: Option<usize>,
    standardize: Option<bool>,
    lambda1: Vec<f64>,
    ratio2: Vec<f64>,
    ratio3: Vec<f64>,
    c1: Vec<f64>,
    zero_threshold: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    c0: Option<f64>,
    rho: Option<f64>,
    bic: Option<String>,
    warm_start: Option<bool>,
    fit_out: Option<PathBuf>,
    grid_out: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct EffectsSection {
    fit: Option<PathBuf>,
    format: Option<String>,
    out: Option<PathBuf>,
    precision: Option<usize>,
    zero_threshold: Option<f64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(default, deny_unknown_fields)]
struct SimulateSection {
    n: Vec<usize>,
    r: Option<usize>,
    p: Option<usize>,
    decay_rate: Option<f64>,
    top_eigenvalue: Option<f64>,
    variance_threshold: Option<f64>,
    sparsity: Option<f64>,
    effect_scale: Option<f64>,
    noise_sd_mediator: Option<f64>,
    noise_sd_outcome: Option<f64>,
    n_reps: Option<usize>,
    seed: Option<u64>,
    grid: Option<String>,
    z_values: Vec<f64>,
    cal_c1: Option<f64>,
    cal_ratio2: Option<f64>,
    cal_ratio3: Option<f64>,
    bic: Option<String>,
    rho_scale: Option<f64>,
    c0: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    warm_start: Option<bool>,
    zero_threshold: Option<f64>,
    replicates_out: Option<PathBuf>,
    aggregate_out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("malformed config file {}", path.display()))
        }
    }
}

/// CLI value if given, else config value.
fn pick<T>(cli: Option<T>, file: Option<T>) -> Option<T> {
    cli.or(file)
}

/// CLI list if nonempty, else config list.
fn pick_vec<T: Clone>(cli: &[T], file: &[T]) -> Vec<T> {
    if !cli.is_empty() {
        cli.to_vec()
    } else {
        file.to_vec()
    }
}

// ---------------------------------------------------------------------------
// Dataset plumbing
// ---------------------------------------------------------------------------

/// Merge CLI and config role patterns and build the role mapping.
///
/// Rules are ordered exact-before-glob, then by descending prefix length,
/// so the most specific pattern always claims a column first.
fn build_roles(cli: &DatasetArgs, file: &DatasetSection) -> Result<(PathBuf, RoleSpec)> {
    let input = pick(cli.input.clone(), file.input.clone())
        .context("no input file given (set --input or `input` in the config)")?;

    let mut rules: Vec<(String, ColumnRole)> = Vec::new();
    let mut push_all = |patterns: &[String], role: ColumnRole| {
        for p in patterns {
            rules.push((p.clone(), role));
        }
    };
    push_all(&pick_vec(&cli.id, &file.id), ColumnRole::Id);
    push_all(&pick_vec(&cli.outcome, &file.outcome), ColumnRole::Outcome);
    push_all(&pick_vec(&cli.covariate, &file.covariate), ColumnRole::Covariate);
    push_all(&pick_vec(&cli.mediator, &file.mediator), ColumnRole::Mediator);
    push_all(&pick_vec(&cli.exposure, &file.exposure), ColumnRole::Exposure);
    push_all(&pick_vec(&cli.ignore, &file.ignore), ColumnRole::Ignore);

    if rules.is_empty() {
        bail!("no column roles given; at least --exposure, --mediator, and --outcome are needed");
    }

    // Specificity sort (stable, so the role order above breaks exact ties).
    let specificity = |pattern: &str| -> (u8, usize) {
        match pattern.strip_suffix('*') {
            None => (0, usize::MAX),         // exact names first
            Some(prefix) => (1, prefix.len()), // then longest prefixes
        }
    };
    rules.sort_by(|a, b| {
        let (ka, la) = specificity(&a.0);
        let (kb, lb) = specificity(&b.0);
        ka.cmp(&kb).then(lb.cmp(&la))
    });

    Ok((input, RoleSpec::from_rules(rules)))
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

/// Run the load → adjust → PCA front of the pipeline shared by `pca` and
/// `fit`. Returns the adjusted dataset, the PCA model with its component
/// count already chosen, and the score matrix.
struct Compressed {
    adjusted: medpath::dataset::AdjustedDataset,
    model: PcaModel,
    scores: medpath::nalgebra::DMatrix<f64>,
    row_ids: Vec<String>,
}

fn compress(
    input: &Path,
    roles: &RoleSpec,
    scale: bool,
    threshold: f64,
    explicit_q: Option<usize>,
) -> Result<Compressed> {
    let raw = load_dataset(input, roles)?;
    let row_ids = raw.row_ids.clone();
    let adjusted = residualize(&raw)?;
    let mut model = fit_pca(&adjusted.x_adj, scale)?;
    model.q = match explicit_q {
        Some(q) => {
            if q == 0 || q > model.k() {
                bail!(
                    "explicit q = {q} is outside the usable range 1..={}",
                    model.k()
                );
            }
            q
        }
        None => select_num_components(&model, threshold)?,
    };
    let scores = transform(&model, &adjusted.x_adj)?;
    Ok(Compressed {
        adjusted,
        model,
        scores,
        row_ids,
    })
}

// ---------------------------------------------------------------------------
// pca
// ---------------------------------------------------------------------------

fn cmd_pca(args: PcaArgs, config: FileConfig) -> Result<()> {
    let section = config.pca;
    let (input, roles) = build_roles(&args.data, &section.data)?;
    let scale = pick(args.scale, section.scale).unwrap_or(false);
    let threshold = pick(args.threshold, section.threshold).unwrap_or(0.8);
    let q = pick(args.q, section.q);
    let model_out =
        pick(args.model_out, section.model_out).unwrap_or_else(|| PathBuf::from("pca_model.json"));
    let scores_out =
        pick(args.scores_out, section.scores_out).unwrap_or_else(|| PathBuf::from("scores.csv"));

    let Compressed {
        model,
        scores,
        row_ids,
        ..
    } = compress(&input, &roles, scale, threshold, q)?;

    let mut json = serde_json::to_string_pretty(&model)?;
    json.push('\n');
    write_text(&model_out, &json)?;

    let mut csv = String::from("id");
    for j in 1..=model.q {
        csv.push_str(&format!(",PC{j}"));
    }
    csv.push('\n');
    for (i, id) in row_ids.iter().enumerate() {
        csv.push_str(&csv_field(id));
        for j in 0..model.q {
            csv.push_str(&format!(",{}", scores[(i, j)]));
        }
        csv.push('\n');
    }
    write_text(&scores_out, &csv)?;

    // Variance table on stdout.
    println!("component  variance_ratio  cumulative");
    let mut cumulative = 0.0;
    for (j, ratio) in model.variance_ratios.iter().enumerate() {
        cumulative += ratio;
        let marker = if j + 1 == model.q { "  <- q" } else { "" };
        println!("PC{:<8} {:<15.4} {:.4}{marker}", j + 1, ratio, cumulative);
    }
    println!(
        "kept q = {} of {} components; model -> {}, scores -> {}",
        model.q,
        model.k(),
        model_out.display(),
        scores_out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Everything `effects` needs, serialized next to the fit itself.
#[derive(Serialize, Deserialize)]
struct FitArtifact {
    record: FitRecord,
    labels: EffectLabels,
    standardization: Standardization,
    zero_threshold: f64,
    bic_variant: BicVariant,
    winner_bic: f64,
    adjustment: String,
}

fn cmd_fit(args: FitArgs, config: FileConfig) -> Result<()> {
    let section = config.fit;
    let (input, roles) = build_roles(&args.data, &section.data)?;
    let scale = pick(args.scale, section.scale).unwrap_or(false);
    let threshold = pick(args.threshold, section.threshold).unwrap_or(0.8);
    let q = pick(args.q, section.q);
    let standardize_my = pick(args.standardize, section.standardize).unwrap_or(false);
    let bic: BicVariant = pick(args.bic, section.bic)
        .as_deref()
        .map(BicVariant::from_str)
        .transpose()?
        .unwrap_or(BicVariant::Literal);
    let warm_start = if args.no_warm_start {
        false
    } else {
        section.warm_start.unwrap_or(true)
    };
    let fit_out = pick(args.fit_out, section.fit_out).unwrap_or_else(|| PathBuf::from("fit.json"));
    let grid_out =
        pick(args.grid_out, section.grid_out).unwrap_or_else(|| PathBuf::from("tuning.csv"));

    let mut compressed = compress(&input, &roles, scale, threshold, q)?;
    let standardization = if standardize_my {
        let (adjusted, record) = standardize(&compressed.adjusted)?;
        compressed.adjusted = adjusted;
        record
    } else {
        Standardization::identity(compressed.adjusted.m_adj.ncols())
    };
    let stats = medpath::solver::DesignStats::new(
        &compressed.scores,
        &compressed.adjusted.m_adj,
        &compressed.adjusted.y_adj,
    )?;

    // Grid: start from the data-scaled default and override any axis the
    // user pinned.
    let mut grid = TuningGrid::default_for_data(&stats);
    let lambda1 = pick_vec(&args.lambda1, &section.lambda1);
    if !lambda1.is_empty() {
        grid.lambda1_values = lambda1;
    }
    let ratio2 = pick_vec(&args.ratio2, &section.ratio2);
    if !ratio2.is_empty() {
        grid.ratio2_values = ratio2;
    }
    let ratio3 = pick_vec(&args.ratio3, &section.ratio3);
    if !ratio3.is_empty() {
        grid.ratio3_values = ratio3;
    }
    let c1 = pick_vec(&args.c1, &section.c1);
    if !c1.is_empty() {
        grid.c1_values = c1;
    }
    if let Some(zt) = pick(args.zero_threshold, section.zero_threshold) {
        grid.zero_threshold = zt;
    }

    let mut weights = PenaltyWeights::default();
    if let Some(c0) = pick(args.c0, section.c0) {
        weights.c0 = c0;
    }
    if let Some(rho) = pick(args.rho, section.rho) {
        weights.rho = rho;
    }
    let base = FitConfig {
        weights,
        tol: pick(args.tol, section.tol).unwrap_or(1e-6),
        max_iter: pick(args.max_iter, section.max_iter).unwrap_or(10_000),
        ..Default::default()
    };

    let result = grid_search(&stats, &grid, &base, bic, warm_start)?;
    export_grid_csv(&result, &grid_out)?;

    let winner = &result.records[result.winner];
    let labels = EffectLabels::for_scores(
        compressed.model.q,
        compressed.adjusted.mediator_names.clone(),
        compressed.adjusted.outcome_name.clone(),
    );
    // The winner fit was re-run from zeros at the winning weights; echo
    // exactly that config into the record.
    let winner_config = FitConfig {
        weights: winner.weights,
        ..base.clone()
    };
    let artifact = FitArtifact {
        record: FitRecord::from_result(&result.winner_fit, &winner_config),
        labels,
        standardization,
        zero_threshold: grid.zero_threshold,
        bic_variant: bic,
        winner_bic: winner.bic,
        adjustment: compressed.adjusted.adjustment_record.clone(),
    };
    let mut json = serde_json::to_string_pretty(&artifact)?;
    json.push('\n');
    write_text(&fit_out, &json)?;

    println!(
        "grid: {} cells, winner λ1 = {}, λ2 = {}, λ3 = {}, c1 = {}, BIC = {:.4}, |active| = {}",
        result.records.len(),
        winner.weights.lambda1,
        winner.weights.lambda2,
        winner.weights.lambda3,
        winner.weights.c1,
        winner.bic,
        winner.active_set_size,
    );
    println!("fit -> {}, tuning table -> {}", fit_out.display(), grid_out.display());
    if result.winner_fit.converged {
        println!("fit complete (winner converged in {} iterations)", result.winner_fit.state.iteration);
    } else {
        log::warn!(
            "winning fit did not converge within {} iterations; keeping the best iterate",
            base.max_iter
        );
        println!("fit complete (winner did NOT converge; best iterate kept)");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// effects
// ---------------------------------------------------------------------------

fn cmd_effects(args: EffectsArgs, config: FileConfig) -> Result<()> {
    let section = config.effects;
    let fit_path = pick(args.fit, section.fit)
        .context("no fit file given (set --fit or `fit` in the config)")?;
    let format: ReportFormat = pick(args.format, section.format)
        .as_deref()
        .map(ReportFormat::from_str)
        .transpose()?
        .unwrap_or(ReportFormat::Csv);
    let out = pick(args.out, section.out).unwrap_or_else(|| match format {
        ReportFormat::Csv => PathBuf::from("effects.csv"),
        ReportFormat::Json => PathBuf::from("effects.json"),
    });
    let precision = pick(args.precision, section.precision).unwrap_or(4);

    let text = std::fs::read_to_string(&fit_path)
        .with_context(|| format!("cannot read fit file {}", fit_path.display()))?;
    let artifact: FitArtifact = serde_json::from_str(&text)
        .with_context(|| format!("malformed fit file {}", fit_path.display()))?;
    let zero_threshold =
        pick(args.zero_threshold, section.zero_threshold).unwrap_or(artifact.zero_threshold);

    let params = artifact.record.params()?;
    let params = back_transform(&params, &artifact.standardization)?;
    artifact.labels.check_shape(params.q(), params.p())?;
    let report = decompose(&params, artifact.labels, zero_threshold);
    export_report(&report, &out, format, precision)?;

    println!(
        "effects: {} active paths across {} components; total IE = {:.4}, total TE = {:.4}",
        report.active_paths.len(),
        report.q(),
        report.ie_grand_total(),
        report.te_grand_total(),
    );
    println!("report -> {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn with_n_suffix(path: &Path, n: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "replicates".to_string());
    let ext = path
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    path.with_file_name(format!("{stem}_n{n}.{ext}"))
}

fn cmd_simulate(args: SimulateArgs, config: FileConfig) -> Result<()> {
    let section = config.simulate;
    let n_values = {
        let v = pick_vec(&args.n, &section.n);
        if v.is_empty() {
            vec![100]
        } else {
            v
        }
    };
    let defaults = SimSpec::default();
    let spec_base = SimSpec {
        n: 0, // set per study below
        r: pick(args.r, section.r).unwrap_or(defaults.r),
        p: pick(args.p, section.p).unwrap_or(defaults.p),
        decay_rate: pick(args.decay_rate, section.decay_rate).unwrap_or(defaults.decay_rate),
        top_eigenvalue: pick(args.top_eigenvalue, section.top_eigenvalue)
            .unwrap_or(defaults.top_eigenvalue),
        variance_threshold: pick(args.variance_threshold, section.variance_threshold)
            .unwrap_or(defaults.variance_threshold),
        sparsity: pick(args.sparsity, section.sparsity).unwrap_or(defaults.sparsity),
        effect_scale: pick(args.effect_scale, section.effect_scale)
            .unwrap_or(defaults.effect_scale),
        noise_sd_mediator: pick(args.noise_sd_mediator, section.noise_sd_mediator)
            .unwrap_or(defaults.noise_sd_mediator),
        noise_sd_outcome: pick(args.noise_sd_outcome, section.noise_sd_outcome)
            .unwrap_or(defaults.noise_sd_outcome),
        seed: 0,
    };
    let n_reps = pick(args.n_reps, section.n_reps).unwrap_or(10);
    let seed = pick(args.seed, section.seed).unwrap_or(0);

    let tuning_defaults = ReplicateTuning::default();
    let grid = match pick(args.grid, section.grid).as_deref() {
        None | Some("calibrated") => {
            let cal_defaults = CalibratedGrid::default();
            GridStrategy::Calibrated(CalibratedGrid {
                z_values: {
                    let z = pick_vec(&args.z_values, &section.z_values);
                    if z.is_empty() {
                        cal_defaults.z_values
                    } else {
                        z
                    }
                },
                c1: pick(args.cal_c1, section.cal_c1).unwrap_or(cal_defaults.c1),
                ratio2: pick(args.cal_ratio2, section.cal_ratio2).unwrap_or(cal_defaults.ratio2),
                ratio3: pick(args.cal_ratio3, section.cal_ratio3).unwrap_or(cal_defaults.ratio3),
            })
        }
        Some("data-default") => GridStrategy::DataDefault,
        Some(other) => bail!("unknown grid strategy '{other}' (expected calibrated or data-default)"),
    };
    let tuning = ReplicateTuning {
        grid,
        bic: pick(args.bic, section.bic)
            .as_deref()
            .map(BicVariant::from_str)
            .transpose()?
            .unwrap_or(tuning_defaults.bic),
        c0: pick(args.c0, section.c0).unwrap_or(tuning_defaults.c0),
        rho_scale: pick(args.rho_scale, section.rho_scale).unwrap_or(tuning_defaults.rho_scale),
        tol: pick(args.tol, section.tol).unwrap_or(tuning_defaults.tol),
        max_iter: pick(args.max_iter, section.max_iter).unwrap_or(tuning_defaults.max_iter),
        warm_start: if args.no_warm_start {
            false
        } else {
            section.warm_start.unwrap_or(true)
        },
        zero_threshold: pick(args.zero_threshold, section.zero_threshold)
            .unwrap_or(DEFAULT_ZERO_THRESHOLD),
    };
    let replicates_out = pick(args.replicates_out, section.replicates_out)
        .unwrap_or_else(|| PathBuf::from("replicates.csv"));
    let aggregate_out = pick(args.aggregate_out, section.aggregate_out)
        .unwrap_or_else(|| PathBuf::from("aggregate.csv"));

    let mut aggregate_rows: Vec<(String, SimMetrics)> = Vec::new();
    println!("n        reps  sens    spec    mean_q  se_q    bias_ie    mse_ie     failed");
    for &n in &n_values {
        let spec = SimSpec { n, ..spec_base.clone() };
        let study = run_replicates(&spec, &tuning, n_reps, seed)?;
        let rep_path = if n_values.len() == 1 {
            replicates_out.clone()
        } else {
            with_n_suffix(&replicates_out, n)
        };
        write_text(&rep_path, &render_replicates_csv(&study))?;
        let m = &study.aggregate;
        println!(
            "{:<8} {:<5} {:<7.3} {:<7.3} {:<7.2} {:<7.2} {:<10.4} {:<10.4} {}",
            n, m.n_replicates, m.sensitivity, m.specificity, m.mean_q, m.se_q,
            m.bias_ie_total, m.mse_ie_total, study.n_failed,
        );
        aggregate_rows.push((n.to_string(), study.aggregate.clone()));
    }
    write_text(&aggregate_out, &render_aggregate_csv(&aggregate_rows, 4))?;
    println!(
        "replicate tables -> {}, aggregates -> {}",
        replicates_out.display(),
        aggregate_out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

fn thread_cap(cli: Option<usize>, file: Option<usize>) -> Option<usize> {
    cli.or(file).or_else(|| {
        std::env::var("MEDPATH_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Pca(a) => a.common.clone(),
        Command::Fit(a) => a.common.clone(),
        Command::Effects(a) => a.common.clone(),
        Command::Simulate(a) => a.common.clone(),
    };
    let config = load_config(common.config.as_deref())?;
    if let Some(threads) = thread_cap(common.threads, config.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    match cli.command {
        Command::Pca(args) => cmd_pca(args, config),
        Command::Fit(args) => cmd_fit(args, config),
        Command::Effects(args) => cmd_effects(args, config),
        Command::Simulate(args) => cmd_simulate(args, config),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
