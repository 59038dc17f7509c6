//! Command-line front end.
//!
//! Every command reads one JSON configuration file (unknown keys are
//! rejected) and writes its outputs into `--out`. Exit codes: 0 on success,
//! 1 for configuration or data errors, 2 for numerical failures.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::basis::{make_basis, BasisConfig, Measure};
use crate::coupling::{self, CouplingMethod, GradientPath, ProcessDraws};
use crate::error::{Error, Result};
use crate::inference::{self, BandKind, ConfidenceBand, CriticalValue, FunctionalSpec};
use crate::io::{self, CsvData, FitArtifact};
use crate::monotone::{self, Direction, GridFunction, MultiMode, Operator};
use crate::process::{self, CoefficientProcess, ProcessOptions, QuantileGrid};
use crate::sim::{self, DgpSpec, GapTarget, McConfig};
use crate::solver::Dataset;

pub const THREADS_ENV: &str = "SERIESQR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "seriesqr", version, about = "Series quantile regression with uniform inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the coefficient process and write a fit artifact.
    Fit(CommonArgs),
    /// Build pointwise intervals or a uniform band from a fit artifact.
    Band(CommonArgs),
    /// Run a Monte Carlo coverage study.
    Mc(CommonArgs),
    /// Compare mega-sample series estimands with the true quantile function.
    EstimandGap(CommonArgs),
    /// Monotonize value columns of a grid table.
    Monotonize(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Input table (fit, band with bootstrap methods, monotonize).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Root seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Self::Fit(a) | Self::Band(a) | Self::Mc(a) | Self::EstimandGap(a) | Self::Monotonize(a) => a,
        }
    }
}

/// Quantile grid as an explicit list or as `start/denominator, …,
/// stop/denominator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Points(Vec<f64>),
    Range {
        start: u32,
        stop: u32,
        denominator: u32,
    },
}

impl GridConfig {
    pub fn build(&self) -> Result<QuantileGrid> {
        match self {
            Self::Points(p) => QuantileGrid::new(p.clone()),
            Self::Range {
                start,
                stop,
                denominator,
            } => QuantileGrid::uniform(*start, *stop, *denominator),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self::Range {
            start: 10,
            stop: 90,
            denominator: 100,
        }
    }
}

/// The whole configuration file; each command reads its own section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub band: Option<BandConfig>,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub estimand_gap: Option<GapConfig>,
    #[serde(default)]
    pub monotonize: Option<MonotonizeTableConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub response: String,
    /// Covariate columns, first the one entering the series block; defaults
    /// to every other column.
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    pub basis: BasisConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Level used in the Hall-Sheather bandwidth.
    #[serde(default = "default_bandwidth_alpha")]
    pub bandwidth_alpha: f64,
}

fn default_bandwidth_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FunctionalConfig {
    Value {
        points: Vec<Vec<f64>>,
    },
    Derivative {
        points: Vec<Vec<f64>>,
        k: usize,
    },
    AverageDerivative {
        k: usize,
        /// Point masses over the fitted covariate sample; empirical if absent.
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    ConditionalAverageDerivative {
        k: usize,
        coord: usize,
        values: Vec<f64>,
        #[serde(default)]
        tol: f64,
    },
    Custom {
        loadings: Vec<Vec<f64>>,
    },
}

impl FunctionalConfig {
    pub fn build(&self, artifact: &FitArtifact, grid_len: usize) -> Result<FunctionalSpec> {
        let basis = &artifact.basis;
        match self {
            Self::Value { points } => FunctionalSpec::value(basis, points, grid_len),
            Self::Derivative { points, k } => FunctionalSpec::derivative(basis, points, *k, grid_len),
            Self::AverageDerivative { k, weights } => {
                let mu = weights.clone().map_or(Measure::Empirical, Measure::Weights);
                FunctionalSpec::average_derivative(basis, &artifact.covariate_rows()?, *k, &mu, grid_len)
            }
            Self::ConditionalAverageDerivative { k, coord, values, tol } => {
                FunctionalSpec::conditional_average_derivative(basis, &artifact.covariate_rows()?, *k, *coord, values, *tol, grid_len)
            }
            Self::Custom { loadings } => FunctionalSpec::custom(loadings.clone(), grid_len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonizeConfig {
    pub operator: Operator,
    #[serde(default)]
    pub mode: MultiMode,
    /// One per axis; increasing by default.
    #[serde(default)]
    pub directions: Option<Vec<Direction>>,
    /// Intersect with the monotone set instead of monotonizing the
    /// envelopes. Not robust to misspecification: the band can become empty.
    #[serde(default)]
    pub intersect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub method: CouplingMethod,
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_band_kind")]
    pub kind: BandKind,
    /// Pointwise intervals only.
    #[serde(default = "default_critical")]
    pub critical: CriticalValue,
    #[serde(default = "default_true")]
    pub delta_adjustment: bool,
    #[serde(default)]
    pub gradient_path: GradientPath,
    pub functional: FunctionalConfig,
    #[serde(default)]
    pub monotonize: Option<MonotonizeConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Also write the raw draws (refused above 10⁷ numbers).
    #[serde(default)]
    pub dump_draws: bool,
}

fn default_alpha() -> f64 {
    0.10
}

fn default_band_kind() -> BandKind {
    BandKind::Uniform
}

fn default_critical() -> CriticalValue {
    CriticalValue::CouplingQuantile
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub dgp: DgpSpec,
    pub basis: BasisConfig,
    #[serde(default = "default_gap_grid")]
    pub grid: GridConfig,
    /// Evaluation points in `W`; 21 equally spaced points across the `W`
    /// range by default.
    #[serde(default)]
    pub w_points: Option<Vec<f64>>,
    /// The covariate sample is repeated this many times.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub target: GapTarget,
    #[serde(default)]
    pub seed: u64,
}

fn default_gap_grid() -> GridConfig {
    GridConfig::Range {
        start: 1,
        stop: 9,
        denominator: 10,
    }
}

fn default_repeats() -> usize {
    100
}

/// Monotonizes columns of a long-format table whose axis columns span a
/// full rectangular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonizeTableConfig {
    /// One or two axis column names.
    pub axes: Vec<String>,
    /// Columns to monotonize; every non-axis column by default.
    #[serde(default)]
    pub values: Option<Vec<String>>,
    #[serde(flatten)]
    pub settings: MonotonizeConfig,
}

fn load_config(path: &Path) -> Result<RunConfig> {
    io::read_json(path)
}

fn section<T: Clone>(s: &Option<T>, name: &str) -> Result<T> {
    s.clone()
        .ok_or_else(|| Error::Config(format!("configuration has no '{name}' section")))
}

fn require_data(args: &CommonArgs, why: &str) -> Result<PathBuf> {
    args.data
        .clone()
        .ok_or_else(|| Error::Config(format!("--data is required {why}")))
}

/// Parses the command line, runs the command and returns the exit code.
pub fn main_with_args(argv: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_user_error() {
        1
    } else {
        2
    }
}

pub fn run(command: &Command) -> Result<()> {
    let args = command.common();
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    pool.install(|| match command {
        Command::Fit(a) => cmd_fit(a).map(|_| ()),
        Command::Band(a) => cmd_band(a).map(|_| ()),
        Command::Mc(a) => cmd_mc(a).map(|_| ()),
        Command::EstimandGap(a) => cmd_estimand_gap(a).map(|_| ()),
        Command::Monotonize(a) => cmd_monotonize(a),
    })
}

/// Fits the data and writes `fit.json` plus `fit_summary.txt`.
pub fn cmd_fit(args: &CommonArgs) -> Result<FitArtifact> {
    let cfg = section(&load_config(&args.config)?.fit, "fit")?;
    let data_path = require_data(args, "for fit")?;
    let table = io::read_csv(&data_path, &cfg.response, cfg.covariates.as_deref())?;
    let artifact = fit_table(&table, &cfg)?;
    io::write_json(&args.out.join("fit.json"), &artifact)?;
    let summary = fit_summary(&artifact)?;
    io::write_atomic(&args.out.join("fit_summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(artifact)
}

/// In-process equivalent of `fit` on a parsed table.
pub fn fit_table(table: &CsvData, cfg: &FitConfig) -> Result<FitArtifact> {
    let basis = make_basis(&cfg.basis, &table.covariates)?;
    if table.y.len() < basis.m() {
        return Err(Error::InvalidInput(format!(
            "{} observations cannot identify {} coefficients",
            table.y.len(),
            basis.m()
        )));
    }
    let data = Dataset::new(table.y.clone(), &basis.design_matrix(&table.covariates))?;
    let grid = cfg.grid.build()?;
    let opts = ProcessOptions {
        bandwidth_alpha: cfg.bandwidth_alpha,
        ..ProcessOptions::default()
    };
    let proc = process::fit_process_with(&data, Some(&basis), &grid, &opts)?;
    let echo = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    Ok(FitArtifact::new(&proc, &basis, table, echo))
}

fn fit_summary(a: &FitArtifact) -> Result<String> {
    let proc = a.process()?;
    let h = &a.bandwidths;
    let (hmin, hmax) = h.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    Ok(format!(
        "n = {}\nm = {}\ngrid = {} points in [{}, {}]\nmax certificate / bound = {:.3e}\nbandwidths in [{:.4e}, {:.4e}]\nzeta = {:.4}\n",
        a.n,
        a.m,
        a.grid.len(),
        a.grid[0],
        a.grid[a.grid.len() - 1],
        proc.max_certificate_ratio(),
        hmin,
        hmax,
        a.basis.zeta
    ))
}

/// Output of the band command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub method: CouplingMethod,
    pub kind: BandKind,
    pub alpha: f64,
    pub k_n: f64,
    pub delta_n: f64,
    pub c_n: f64,
    pub draws: usize,
    pub seed: u64,
    pub monotonized: Option<MonotonizeConfig>,
    pub rows: Vec<BandRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub u: f64,
    pub w: Vec<f64>,
    pub theta_hat: f64,
    pub sigma_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub k: f64,
    pub c: f64,
}

impl BandReport {
    /// One `#` header line with the band constants, then one row per
    /// `(u, w)`; multi-dimensional `w` is joined with `;`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# method={},kind={},draws={},seed={},alpha={},k_n={},delta_n={},c_n={}\n",
            self.method.name(),
            match self.kind {
                BandKind::Uniform => "uniform",
                BandKind::Pointwise => "pointwise",
            },
            self.draws,
            self.seed,
            self.alpha,
            self.k_n,
            self.delta_n,
            self.c_n
        );
        out.push_str("u,w,theta_hat,sigma_hat,lower,upper,k,c\n");
        for r in &self.rows {
            let w: Vec<String> = r.w.iter().map(f64::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.u,
                w.join(";"),
                r.theta_hat,
                r.sigma_hat,
                r.lower,
                r.upper,
                r.k,
                r.c
            ));
        }
        out
    }
}

/// Draws for any method; bootstraps need the fitting sample.
pub fn make_draws(
    method: CouplingMethod,
    proc: &CoefficientProcess,
    data: Option<&Dataset>,
    b: usize,
    seed: u64,
    path: GradientPath,
) -> Result<ProcessDraws> {
    let need = || {
        data.ok_or_else(|| Error::Config(format!("method '{}' refits the model and needs --data", method.name())))
    };
    match method {
        CouplingMethod::Pivotal => coupling::draw_pivotal(need()?, proc, b, seed),
        CouplingMethod::Gaussian => coupling::draw_gaussian(proc, b, seed),
        CouplingMethod::Weighted => coupling::draw_weighted_bootstrap(need()?, proc, b, seed),
        CouplingMethod::Gradient => coupling::draw_gradient_bootstrap(need()?, proc, b, seed, path),
    }
}

fn band_axes(spec: &FunctionalSpec, grid: &QuantileGrid) -> Result<Vec<Vec<f64>>> {
    let mut axes = vec![grid.points().to_vec()];
    if spec.loadings.len() > 1 {
        let w: Vec<f64> = spec.labels.iter().map(|l| l.first().copied().unwrap_or(f64::NAN)).collect();
        if w.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(Error::Config(
                "monotonizing over w needs one-dimensional, strictly increasing points".into(),
            ));
        }
        axes.push(w);
    }
    Ok(axes)
}

/// Applies the requested monotonization to a band on a product index set.
pub fn monotonize_confidence_band(
    band: &mut ConfidenceBand,
    spec: &FunctionalSpec,
    grid: &QuantileGrid,
    cfg: &MonotonizeConfig,
) -> Result<()> {
    let axes = band_axes(spec, grid)?;
    let directions = cfg.directions.clone().unwrap_or_else(|| vec![Direction::Increasing; axes.len()]);
    let lower = GridFunction::new(axes.clone(), band.lower.clone())?;
    let upper = GridFunction::new(axes, band.upper.clone())?;
    let (lo, hi) = if cfg.intersect {
        monotone::intersect_band(&lower, &upper, &directions)?
    } else {
        monotone::monotonize_band(&lower, &upper, cfg.operator, cfg.mode, &directions)?
    };
    band.lower = lo.values;
    band.upper = hi.values;
    Ok(())
}

/// Builds the band described by the config from a fit artifact.
pub fn band_from_artifact(
    artifact: &FitArtifact,
    cfg: &BandConfig,
    data: Option<&Dataset>,
    seed: u64,
) -> Result<(BandReport, ProcessDraws)> {
    let proc = artifact.process()?;
    let spec = cfg.functional.build(artifact, proc.grid.len())?;
    let b = cfg.draws.unwrap_or_else(|| cfg.method.default_draws());
    let draws = make_draws(cfg.method, &proc, data, b, seed, cfg.gradient_path)?;
    let t = inference::t_star_process(&proc, &draws, &spec)?;
    let mut band = match cfg.kind {
        BandKind::Uniform => inference::uniform_band(&t, cfg.alpha, cfg.delta_adjustment)?,
        BandKind::Pointwise => inference::pointwise_interval(&t, cfg.alpha, cfg.critical)?,
    };
    if let Some(m) = &cfg.monotonize {
        monotonize_confidence_band(&mut band, &spec, &proc.grid, m)?;
    }
    let rows = band
        .index
        .iter()
        .enumerate()
        .map(|(p, &(k, j))| BandRow {
            u: proc.grid.points()[k],
            w: spec.labels[j].clone(),
            theta_hat: band.theta_hat[p],
            sigma_hat: band.sigma_hat[p],
            lower: band.lower[p],
            upper: band.upper[p],
            k: band.k[p],
            c: band.c[p],
        })
        .collect();
    let report = BandReport {
        method: cfg.method,
        kind: cfg.kind,
        alpha: cfg.alpha,
        k_n: band.k[0],
        delta_n: band.delta_n,
        c_n: band.c[0],
        draws: b,
        seed,
        monotonized: cfg.monotonize.clone(),
        rows,
    };
    Ok((report, draws))
}

/// Rebuilds the fitting dataset from the CSV using the artifact's basis.
pub fn dataset_for_artifact(artifact: &FitArtifact, path: &Path) -> Result<Dataset> {
    let table = io::read_csv(path, &artifact.response, Some(&artifact.covariate_names))?;
    if table.covariates != artifact.covariate_rows()? {
        return Err(Error::InvalidInput(
            "the data file differs from the one the artifact was fitted on".into(),
        ));
    }
    Dataset::new(table.y, &artifact.basis.design_matrix(&table.covariates))
}

/// Reads `fit.json` from `--out` and writes `band.csv` and `band.json`.
pub fn cmd_band(args: &CommonArgs) -> Result<BandReport> {
    let cfg = section(&load_config(&args.config)?.band, "band")?;
    let artifact = FitArtifact::read(&args.out.join("fit.json"))?;
    let data = match &args.data {
        Some(p) => Some(dataset_for_artifact(&artifact, p)?),
        None if cfg.method.needs_data() => {
            return Err(Error::Config(format!(
                "method '{}' refits the model and needs --data",
                cfg.method.name()
            )))
        }
        None => None,
    };
    let data = match (data, cfg.method) {
        (None, CouplingMethod::Pivotal) => Some(Dataset::new(
            vec![0.0; artifact.n],
            &artifact.basis.design_matrix(&artifact.covariate_rows()?),
        )?),
        (d, _) => d,
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let (report, draws) = band_from_artifact(&artifact, &cfg, data.as_ref(), seed)?;
    io::write_atomic(&args.out.join("band.csv"), report.to_csv().as_bytes())?;
    io::write_json(&args.out.join("band.json"), &report)?;
    if cfg.dump_draws {
        if draws.draws.len() > 10_000_000 {
            log::warn!("draw dump skipped: {} numbers exceed the size guard", draws.draws.len());
        } else {
            io::write_json(&args.out.join("draws.json"), &draws)?;
        }
    }
    println!(
        "{} {:?} band: k_n = {:.4}, delta_n = {:.4}, c_n = {:.4}, {} rows",
        cfg.method.name(),
        cfg.kind,
        report.k_n,
        report.delta_n,
        report.c_n,
        report.rows.len()
    );
    Ok(report)
}

/// Runs the study and writes `mc.csv` and `mc.json`.
pub fn cmd_mc(args: &CommonArgs) -> Result<sim::McReport> {
    let mut cfg = section(&load_config(&args.config)?.mc, "mc")?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let report = sim::run_mc(&cfg)?;
    let csv = report.to_csv();
    io::write_atomic(&args.out.join("mc.csv"), csv.as_bytes())?;
    io::write_json(&args.out.join("mc.json"), &report)?;
    print!("{csv}");
    Ok(report)
}

/// Writes `gap.csv` (`u,w,gap`) and `gap.json`.
pub fn cmd_estimand_gap(args: &CommonArgs) -> Result<sim::EstimandGap> {
    let cfg = section(&load_config(&args.config)?.estimand_gap, "estimand_gap")?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let grid = cfg.grid.build()?;
    let w_points = cfg.w_points.clone().unwrap_or_else(|| {
        let [a, b] = cfg.dgp.w_range;
        (0..21).map(|i| a + (b - a) * i as f64 / 20.0).collect()
    });
    let gap = sim::estimand_gap(&cfg.dgp, &cfg.basis, &grid, &w_points, cfg.repeats, cfg.target, seed)?;
    let mut csv = String::from("u,w,gap\n");
    let (r, c) = gap.gap.shape();
    for i in 0..r {
        for j in 0..c {
            csv.push_str(&format!("{},{},{}\n", gap.gap.axes[0][i], gap.gap.axes[1][j], gap.gap.get(i, j)));
        }
    }
    io::write_atomic(&args.out.join("gap.csv"), csv.as_bytes())?;
    io::write_json(&args.out.join("gap.json"), &gap)?;
    println!("mega-sample n = {}, rms gap = {:.4e}, sup gap = {:.4e}", gap.mega_n, gap.l2(), gap.sup());
    Ok(gap)
}

/// Reads a long-format table, monotonizes the value columns over the axis
/// columns and writes `monotonized.csv` with the same columns.
pub fn cmd_monotonize(args: &CommonArgs) -> Result<()> {
    let cfg = section(&load_config(&args.config)?.monotonize, "monotonize")?;
    let path = require_data(args, "for monotonize")?;
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let out = monotonize_table(&text, &cfg)?;
    io::write_atomic(&args.out.join("monotonized.csv"), out.as_bytes())?;
    Ok(())
}

/// Table form of [`cmd_monotonize`].
pub fn monotonize_table(text: &str, cfg: &MonotonizeTableConfig) -> Result<String> {
    if cfg.axes.is_empty() || cfg.axes.len() > 2 {
        return Err(Error::Config("monotonize needs one or two axis columns".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
            row: 0,
            column: name.to_string(),
            message: "column not found in header".into(),
        })
    };
    let axis_cols = cfg.axes.iter().map(|a| col(a)).collect::<Result<Vec<_>>>()?;
    let value_names: Vec<String> = match &cfg.values {
        Some(v) => v.clone(),
        None => header.iter().filter(|h| !cfg.axes.contains(h)).cloned().collect(),
    };
    let value_cols = value_names.iter().map(|v| col(v)).collect::<Result<Vec<_>>>()?;

    let mut records: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            row: i + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        records.push(rec.iter().map(str::to_string).collect());
    }
    let num = |row: usize, c: usize| -> Result<f64> {
        records[row][c].parse::<f64>().map_err(|_| Error::Csv {
            row: row + 1,
            column: header[c].clone(),
            message: format!("cannot parse '{}' as a number", records[row][c]),
        })
    };
    // distinct sorted axis values
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for &c in &axis_cols {
        let mut v = (0..records.len()).map(|r| num(r, c)).collect::<Result<Vec<_>>>()?;
        v.sort_by(f64::total_cmp);
        v.dedup();
        axes.push(v);
    }
    let size: usize = axes.iter().map(Vec::len).product();
    if size != records.len() {
        return Err(Error::InvalidInput(format!(
            "axis columns span {size} grid cells but the table has {} rows",
            records.len()
        )));
    }
    let width = axes.get(1).map_or(1, Vec::len);
    let mut cell_of = vec![0usize; records.len()];
    let mut seen = vec![false; size];
    for (r, cell) in cell_of.iter_mut().enumerate() {
        let mut pos = 0;
        for (a, &c) in axis_cols.iter().enumerate() {
            let v = num(r, c)?;
            let idx = axes[a].binary_search_by(|x| x.total_cmp(&v)).unwrap_or(0);
            pos = if a == 0 { idx * width } else { pos + idx };
        }
        if seen[pos] {
            return Err(Error::InvalidInput(format!("row {} repeats a grid cell", r + 1)));
        }
        seen[pos] = true;
        *cell = pos;
    }
    let directions = cfg
        .settings
        .directions
        .clone()
        .unwrap_or_else(|| vec![Direction::Increasing; axes.len()]);
    if cfg.settings.intersect {
        return Err(Error::Config("intersect applies to bands; use the band command".into()));
    }
    let mut updates = Vec::with_capacity(value_cols.len());
    for &vc in &value_cols {
        let mut values = vec![0.0; size];
        for (r, &cell) in cell_of.iter().enumerate() {
            values[cell] = num(r, vc)?;
        }
        let gf = GridFunction::new(axes.clone(), values)?;
        updates.push((vc, monotone::monotonize(&gf, cfg.settings.operator, cfg.settings.mode, &directions)?));
    }
    for (vc, out) in updates {
        for (r, &cell) in cell_of.iter().enumerate() {
            records[r][vc] = out.values[cell].to_string();
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(&header).map_err(io_err)?;
    for r in &records {
        w.write_record(r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}
