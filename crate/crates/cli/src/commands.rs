use std::fs;
use std::thread;

use serde::Serialize;

use impactsim::ohlc::{global_window, SkippedRow};
use impactsim::svg::{price_path_chart, return_curves_chart, Chart, Series};
use impactsim::{
    apply_index_window, apply_market_constraints, breakeven_portfolio_size, breathing_schedule,
    cartoon_schedule, decompose_returns, endpoint_summary, net_pnl, parse_ohlc_csv, simulate,
    IndexSpec, PriceMode, ReturnSeries, Simulation, StrategySchedule,
};

use crate::config::{Format, ModelConfig, RunConfig, StrategyKind, Workflow};
use crate::output::{file_stem_for, OutputDir};
use crate::CliError;

pub fn run(config: &RunConfig) -> Result<Vec<std::path::PathBuf>, CliError> {
    let mut out = OutputDir::create(&config.out)?;
    let result = match &config.workflow {
        Workflow::Simulate => run_simulate(config, &mut out),
        Workflow::Decompose { indices, mode } => run_decompose(config, indices, *mode, &mut out),
        Workflow::Sweep { sizes, multiples } => {
            run_sweep(config, sizes.as_deref(), multiples, &mut out)
        }
    };
    match result {
        Ok(()) => Ok(out.written().to_vec()),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> impactsim::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

struct ModelRun {
    schedule: StrategySchedule,
    simulation: Simulation,
    t_eval: f64,
}

fn run_model(model: &ModelConfig) -> Result<ModelRun, CliError> {
    let clock = &model.params.clock;
    let raw = match model.strategy {
        StrategyKind::Cartoon => cartoon_schedule(&model.strategy_config, clock)?,
        StrategyKind::Breathing => {
            breathing_schedule(&model.strategy_config, &model.reference, clock)?
        }
    };
    let schedule = apply_market_constraints(&raw, &model.strategy_config.constraints);
    let simulation = simulate(&schedule, &model.params)?;
    // default: close of the last traded day
    let t_eval = model
        .t_eval
        .unwrap_or_else(|| schedule.last_time().map_or(0.0, f64::floor) + clock.close_fraction());
    if !simulation.contains_time(t_eval) {
        return Err(CliError::Config(format!(
            "t_eval {t_eval} lies outside the simulated range [0, {}]",
            simulation.horizon()
        )));
    }
    Ok(ModelRun {
        schedule,
        simulation,
        t_eval,
    })
}

fn run_simulate(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let model = &config.model;
    let run = run_model(model)?;
    let single = run.simulation.paths().len() == 1;
    let path_name = |asset: &str, ext: &str| {
        if single {
            format!("path.{ext}")
        } else {
            format!("path_{}.{ext}", file_stem_for(asset))
        }
    };

    if config.wants(Format::Csv) {
        for (asset, path) in run.simulation.paths() {
            out.write(&path_name(asset, "csv"), &csv_bytes(|b| path.write_csv(b))?)?;
        }
        out.write("schedule.csv", &csv_bytes(|b| run.schedule.write_csv(b))?)?;
        out.write(
            "fills.csv",
            &csv_bytes(|b| run.simulation.write_fills_csv(b))?,
        )?;
    }
    if config.wants(Format::Json) {
        let portfolio = model.reference.scaled(model.portfolio_size)?;
        let mut report = net_pnl(&portfolio, &run.schedule, &run.simulation, run.t_eval)?;
        if let Ok(be) = breakeven_portfolio_size(
            &model.reference,
            &run.schedule,
            &run.simulation,
            run.t_eval,
            model.tolerance,
        ) {
            report = report.with_breakeven(be.size);
        }
        out.write("pnl.json", &json_bytes(&report)?)?;
    }
    if config.wants(Format::Svg) {
        for (asset, path) in run.simulation.paths() {
            let title = format!("Simulated price displacement: {asset}");
            out.write(
                &path_name(asset, "svg"),
                price_path_chart(path, &title).as_bytes(),
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BreakEvenJson {
    breakeven_size: f64,
    bisection_size: f64,
    per_unit_gain: f64,
    round_trip_cost: f64,
    t_eval: f64,
    tolerance: f64,
}

fn run_sweep(
    config: &RunConfig,
    sizes: Option<&[f64]>,
    multiples: &[f64],
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let model = &config.model;
    let run = run_model(model)?;
    let be = breakeven_portfolio_size(
        &model.reference,
        &run.schedule,
        &run.simulation,
        run.t_eval,
        model.tolerance,
    )?;
    let sizes: Vec<f64> = match sizes {
        Some(s) => s.to_vec(),
        None => multiples.iter().map(|m| m * be.size).collect(),
    };
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in &sizes {
        let portfolio = model.reference.scaled(size)?;
        rows.push((
            size,
            net_pnl(&portfolio, &run.schedule, &run.simulation, run.t_eval)?,
        ));
    }

    if config.wants(Format::Csv) {
        let bytes = csv_bytes(|buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["portfolio_size", "gain", "cost", "net"])?;
            for (size, r) in &rows {
                w.write_record([
                    size.to_string(),
                    r.mark_to_market_gain.to_string(),
                    r.round_trip_cost.to_string(),
                    r.net.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        out.write("sweep.csv", &bytes)?;
    }
    if config.wants(Format::Json) {
        let json = BreakEvenJson {
            breakeven_size: be.size,
            bisection_size: be.bisection_size,
            per_unit_gain: be.per_unit_gain,
            round_trip_cost: be.cost,
            t_eval: run.t_eval,
            tolerance: model.tolerance,
        };
        out.write("breakeven.json", &json_bytes(&json)?)?;
    }
    if config.wants(Format::Svg) {
        let points: Vec<(f64, f64)> = rows.iter().map(|(s, r)| (*s, r.net)).collect();
        let (lo, hi) = points
            .iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
        let x_hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
        let svg = Chart {
            title: "Net P&L by portfolio size",
            x_range: (0.0, x_hi),
            y_range: (lo, hi),
            series: vec![Series {
                label: "net",
                color: "black",
                points,
            }],
            baseline: Some(0.0),
            y_label_percent: false,
        }
        .render();
        out.write("sweep.svg", svg.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct IndexSummary {
    name: String,
    start_date: Option<chrono::NaiveDate>,
    final_date: chrono::NaiveDate,
    final_overnight: f64,
    final_intraday: f64,
    bars: usize,
    skipped_rows: usize,
    skipped: Vec<SkippedRow>,
}

#[derive(Serialize)]
struct DecomposeSummary {
    window_start: Option<chrono::NaiveDate>,
    window_end: Option<chrono::NaiveDate>,
    indices: Vec<IndexSummary>,
}

struct IndexResult {
    series: ReturnSeries,
    summary: IndexSummary,
}

fn decompose_index(spec: &IndexSpec, mode: PriceMode) -> Result<IndexResult, CliError> {
    let context = |e: impactsim::Error| CliError::Input(format!("{}: {e}", spec.name));
    let file = fs::File::open(&spec.csv_path).map_err(|e| {
        CliError::Input(format!(
            "{}: cannot open {}: {e}",
            spec.name,
            spec.csv_path.display()
        ))
    })?;
    let parsed = parse_ohlc_csv(file).map_err(context)?;
    let bars = apply_index_window(&parsed.bars, Some(spec));
    let series = decompose_returns(&bars, &Default::default(), mode).map_err(context)?;
    let end = endpoint_summary(&series).map_err(context)?;
    Ok(IndexResult {
        summary: IndexSummary {
            name: spec.name.clone(),
            start_date: series.start_date,
            final_date: end.final_date,
            final_overnight: end.final_overnight,
            final_intraday: end.final_intraday,
            bars: bars.len(),
            skipped_rows: parsed.skip_count(),
            skipped: parsed.skipped,
        },
        series,
    })
}

fn run_decompose(
    config: &RunConfig,
    indices: &[IndexSpec],
    mode: PriceMode,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    // indices are independent; results are collected in spec order
    let results: Vec<Result<IndexResult, CliError>> = thread::scope(|scope| {
        let handles: Vec<_> = indices
            .iter()
            .map(|spec| scope.spawn(move || decompose_index(spec, mode)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Input("worker panicked".into())))
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    for r in &results {
        let stem = file_stem_for(&r.summary.name);
        if config.wants(Format::Csv) {
            out.write(
                &format!("{stem}.csv"),
                &csv_bytes(|b| r.series.write_csv(b))?,
            )?;
        }
        if config.wants(Format::Svg) {
            out.write(
                &format!("{stem}.svg"),
                return_curves_chart(&r.series, &r.summary.name).as_bytes(),
            )?;
        }
    }
    if config.wants(Format::Json) {
        let window = global_window();
        let summary = DecomposeSummary {
            window_start: window.start,
            window_end: window.end,
            indices: results.into_iter().map(|r| r.summary).collect(),
        };
        out.write("summary.json", &json_bytes(&summary)?)?;
    }
    Ok(())
}
