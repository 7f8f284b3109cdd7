//! Command-line flags, the JSON config file, and their merge into a validated
//! [`RunConfig`]. Flags take precedence over file values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use impactsim::schedule::CARTOON_ASSET;
use impactsim::simulator::{NoiseConfig, DEFAULT_SAMPLE_GRID};
use impactsim::{
    Constraints, ExecutionConvention, ImpactKernel, IndexSpec, Interpolation, LiquidityProfile,
    Portfolio, Position, PriceMode, SimulationParams, StrategyConfig, TradingClock,
};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "impactsim",
    version,
    about = "Transient market-impact simulation and overnight/intraday return decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a round-trip schedule and write the price path, fills and P&L.
    Simulate(CommonArgs),
    /// Decompose daily OHLC index data into cumulative overnight and intraday returns.
    Decompose(DecomposeArgs),
    /// Evaluate net P&L over a range of portfolio sizes and locate break-even.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    #[default]
    Cartoon,
    Breathing,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long = "open-coeff", allow_hyphen_values = true)]
    pub open_coeff: Option<f64>,
    #[arg(long = "close-coeff", allow_hyphen_values = true)]
    pub close_coeff: Option<f64>,
    #[arg(long = "close-fraction", allow_hyphen_values = true)]
    pub close_fraction: Option<f64>,
    #[arg(long = "t-plus-1")]
    pub t_plus_1: bool,
    #[arg(long = "no-short")]
    pub no_short: bool,
    #[arg(long, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
    #[arg(long)]
    pub strategy: Option<StrategyKind>,
    /// Multiple of the reference portfolio held (the cartoon reference is one share).
    #[arg(long = "portfolio-size", allow_hyphen_values = true)]
    pub portfolio_size: Option<f64>,
    #[arg(long = "round-trip-size", allow_hyphen_values = true)]
    pub round_trip_size: Option<f64>,
    #[arg(long = "base-price", allow_hyphen_values = true)]
    pub base_price: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Index spec file: JSON list of {name, csv_path, start?, end?}.
    #[arg(long)]
    pub indices: Option<PathBuf>,
    /// Use adjusted closes (scales opens by adj_close / close).
    #[arg(long)]
    pub adjusted: bool,
    /// Yahoo-format CSV files, each treated as an index named after the file stem.
    pub csv: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Absolute portfolio sizes to evaluate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sizes: Option<Vec<f64>>,
    /// Portfolio sizes as multiples of the break-even size (ignored when --sizes is set).
    #[arg(long, value_delimiter = ',')]
    pub multiples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PositionEntry {
    pub asset: String,
    pub shares: f64,
    pub entry_price: f64,
}

/// Keys accepted in the JSON config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub days: Option<u32>,
    pub lambda: Option<f64>,
    pub unity_constant: Option<f64>,
    pub knee_sharpness: Option<f64>,
    pub open_coeff: Option<f64>,
    pub close_coeff: Option<f64>,
    pub interpolation: Option<Interpolation>,
    pub close_fraction: Option<f64>,
    pub t_plus_1: Option<bool>,
    pub no_short: Option<bool>,
    pub formats: Option<Vec<Format>>,
    pub strategy: Option<StrategyKind>,
    pub round_trip_size: Option<f64>,
    pub stop_day: Option<u32>,
    pub time_jitter: Option<f64>,
    pub base_price: Option<f64>,
    pub sample_grid: Option<u32>,
    pub horizon: Option<f64>,
    pub execution: Option<ExecutionConvention>,
    pub noise_sigma: Option<f64>,
    pub noise_seed: Option<u64>,
    pub portfolio: Option<Vec<PositionEntry>>,
    pub portfolio_size: Option<f64>,
    pub t_eval: Option<f64>,
    pub tolerance: Option<f64>,
    pub indices: Option<PathBuf>,
    pub csv: Option<Vec<PathBuf>>,
    pub adjusted: Option<bool>,
    pub sizes: Option<Vec<f64>>,
    pub multiples: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

pub const DEFAULT_FORMATS: [Format; 2] = [Format::Csv, Format::Json];
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MULTIPLES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Everything the simulate and sweep workflows need.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub strategy: StrategyKind,
    pub strategy_config: StrategyConfig,
    pub params: SimulationParams,
    /// Portfolio whose multiples are evaluated; its size is 1 by definition.
    pub reference: Portfolio,
    pub portfolio_size: f64,
    pub t_eval: Option<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub enum Workflow {
    Simulate,
    Decompose {
        indices: Vec<IndexSpec>,
        mode: PriceMode,
    },
    Sweep {
        sizes: Option<Vec<f64>>,
        multiples: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub workflow: Workflow,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub model: ModelConfig,
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn build_model(args: &CommonArgs, file: &FileConfig) -> Result<ModelConfig, CliError> {
    let lambda = args.lambda.or(file.lambda).unwrap_or(1.0);
    let kernel = ImpactKernel::new(lambda, file.unity_constant.unwrap_or(1.0))
        .and_then(|k| k.with_knee_sharpness(file.knee_sharpness.unwrap_or(1.0)))
        .map_err(invalid)?;
    let defaults = LiquidityProfile::default();
    let profile = LiquidityProfile::new(
        args.open_coeff
            .or(file.open_coeff)
            .unwrap_or(defaults.open_coefficient()),
        args.close_coeff
            .or(file.close_coeff)
            .unwrap_or(defaults.close_coefficient()),
        file.interpolation.unwrap_or_default(),
    )
    .map_err(invalid)?;
    let clock = match args.close_fraction.or(file.close_fraction) {
        Some(f) => TradingClock::new(f).map_err(invalid)?,
        None => TradingClock::default(),
    };
    let constraints = Constraints {
        t_plus_1: args.t_plus_1 || file.t_plus_1.unwrap_or(false),
        short_allowed: !(args.no_short || file.no_short.unwrap_or(false)),
    };
    let strategy_config = StrategyConfig {
        n_days: args.days.or(file.days).unwrap_or(10),
        round_trip_size: args.round_trip_size.or(file.round_trip_size).unwrap_or(1.0),
        stop_day: file.stop_day,
        constraints,
        time_jitter: file.time_jitter.unwrap_or(0.0),
    };
    strategy_config.validate(&clock).map_err(invalid)?;

    let base_price = args.base_price.or(file.base_price).unwrap_or(100.0);
    let strategy = args.strategy.or(file.strategy).unwrap_or_default();
    let mut asset_base_prices = BTreeMap::new();
    let reference = match strategy {
        StrategyKind::Cartoon => {
            if file.portfolio.is_some() {
                return Err(invalid("portfolio is only used by the breathing strategy"));
            }
            Portfolio::single(CARTOON_ASSET, 1.0, base_price).map_err(invalid)?
        }
        StrategyKind::Breathing => {
            let entries = file
                .portfolio
                .as_ref()
                .filter(|p| !p.is_empty())
                .ok_or_else(|| {
                    invalid("breathing strategy needs a non-empty portfolio in the config file")
                })?;
            let mut p = Portfolio::new();
            for e in entries {
                if p.positions().contains_key(&e.asset) {
                    return Err(invalid(format!("duplicate portfolio asset {:?}", e.asset)));
                }
                p.insert(
                    e.asset.clone(),
                    Position::new(e.shares, e.entry_price).map_err(invalid)?,
                )
                .map_err(invalid)?;
                asset_base_prices.insert(e.asset.clone(), e.entry_price);
            }
            p
        }
    };

    let noise = match (file.noise_sigma, file.noise_seed) {
        (Some(daily_sigma), seed) => Some(NoiseConfig {
            daily_sigma,
            seed: seed.unwrap_or(0),
        }),
        (None, Some(_)) => return Err(invalid("noise_seed given without noise_sigma")),
        (None, None) => None,
    };
    let params = SimulationParams {
        kernel,
        profile,
        clock,
        base_price,
        asset_base_prices,
        horizon: file.horizon,
        sample_grid: file.sample_grid.unwrap_or(DEFAULT_SAMPLE_GRID),
        execution: file.execution.unwrap_or_default(),
        noise,
    };
    let portfolio_size = args.portfolio_size.or(file.portfolio_size).unwrap_or(1.0);
    if !(portfolio_size.is_finite() && portfolio_size > 0.0) {
        return Err(invalid(format!(
            "portfolio_size must be > 0, got {portfolio_size}"
        )));
    }
    let tolerance = file.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(invalid(format!("tolerance must be > 0, got {tolerance}")));
    }
    Ok(ModelConfig {
        strategy,
        strategy_config,
        params,
        reference,
        portfolio_size,
        t_eval: file.t_eval,
        tolerance,
    })
}

fn resolve_indices(list_path: Option<&Path>, csvs: &[PathBuf]) -> Result<Vec<IndexSpec>, CliError> {
    let mut specs = Vec::new();
    if let Some(path) = list_path {
        let file = fs::File::open(path).map_err(|e| {
            CliError::Input(format!("cannot open index spec {}: {e}", path.display()))
        })?;
        let listed = IndexSpec::read_list(file)
            .map_err(|e| CliError::Input(format!("index spec {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        specs.extend(listed.into_iter().map(|mut s| {
            if s.csv_path.is_relative() {
                s.csv_path = dir.join(&s.csv_path);
            }
            s
        }));
    }
    for csv in csvs {
        let name = csv
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| invalid(format!("cannot name index from {}", csv.display())))?;
        specs.push(IndexSpec {
            name,
            csv_path: csv.clone(),
            start: None,
            end: None,
        });
    }
    if specs.is_empty() {
        return Err(invalid(
            "decompose needs --indices or at least one CSV path",
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for s in &specs {
        if !seen.insert(crate::output::file_stem_for(&s.name)) {
            return Err(invalid(format!("duplicate index name {:?}", s.name)));
        }
    }
    Ok(specs)
}

impl RunConfig {
    pub fn from_command(command: &Command) -> Result<Self, CliError> {
        let common = match command {
            Command::Simulate(c) => c,
            Command::Decompose(d) => &d.common,
            Command::Sweep(s) => &s.common,
        };
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let model = build_model(common, &file)?;
        let out = common
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        let mut formats = common
            .formats
            .clone()
            .or_else(|| file.formats.clone())
            .unwrap_or_else(|| DEFAULT_FORMATS.to_vec());
        formats.sort();
        formats.dedup();
        if formats.is_empty() {
            return Err(invalid("at least one output format is required"));
        }

        let workflow = match command {
            Command::Simulate(_) => Workflow::Simulate,
            Command::Decompose(d) => {
                let csvs = if d.csv.is_empty() {
                    file.csv.clone().unwrap_or_default()
                } else {
                    d.csv.clone()
                };
                let list = d.indices.clone().or_else(|| file.indices.clone());
                let adjusted = d.adjusted || file.adjusted.unwrap_or(false);
                Workflow::Decompose {
                    indices: resolve_indices(list.as_deref(), &csvs)?,
                    mode: if adjusted {
                        PriceMode::Adjusted
                    } else {
                        PriceMode::Unadjusted
                    },
                }
            }
            Command::Sweep(s) => {
                let sizes = s.sizes.clone().or_else(|| file.sizes.clone());
                let multiples = s
                    .multiples
                    .clone()
                    .or_else(|| file.multiples.clone())
                    .unwrap_or_else(|| DEFAULT_MULTIPLES.to_vec());
                let all = sizes.iter().flatten().chain(&multiples);
                if let Some(bad) = all.copied().find(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(invalid(format!("sweep sizes must be > 0, got {bad}")));
                }
                if sizes.as_ref().is_some_and(|s| s.is_empty()) || multiples.is_empty() {
                    return Err(invalid("sweep needs at least one size"));
                }
                Workflow::Sweep { sizes, multiples }
            }
        };
        Ok(Self {
            workflow,
            out,
            formats,
            model,
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}
