//! Python bindings for the impact simulation toolkit.

use std::collections::BTreeMap;
use std::fs::File;

use chrono::NaiveDate;
use pyo3::exceptions::{PyIOError, PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use impactsim as core;

fn to_py(e: core::Error) -> PyErr {
    use core::Error as E;
    match e {
        E::InvalidParameter(_) | E::Precondition(_) | E::OutOfSession(_) | E::OutOfRange { .. } => {
            PyValueError::new_err(e.to_string())
        }
        E::Io(_) => PyIOError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_date(s: Option<&str>) -> PyResult<Option<NaiveDate>> {
    s.map(|s| {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|e| PyValueError::new_err(format!("bad date {s:?}: {e}")))
    })
    .transpose()
}

fn portfolio_from(positions: BTreeMap<String, (f64, f64)>) -> PyResult<core::Portfolio> {
    let mut p = core::Portfolio::new();
    for (asset, (shares, entry)) in positions {
        p.insert(asset, core::Position::new(shares, entry).map_err(to_py)?)
            .map_err(to_py)?;
    }
    Ok(p)
}

/// Power-law decay kernel: plateau below the knee `lam`, 1/sqrt(t) tail above it.
#[pyclass(name = "ImpactKernel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel(core::ImpactKernel);

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (lam=1.0, unity_constant=1.0, knee_sharpness=1.0))]
    fn new(lam: f64, unity_constant: f64, knee_sharpness: f64) -> PyResult<Self> {
        core::ImpactKernel::new(lam, unity_constant)
            .and_then(|k| k.with_knee_sharpness(knee_sharpness))
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn unity_constant(&self) -> f64 {
        self.0.unity_constant()
    }

    fn decay_factor(&self, s: f64) -> f64 {
        self.0.decay_factor(s)
    }

    fn impact_at(&self, delta0: f64, s: f64) -> f64 {
        self.0.impact_at(delta0, s)
    }

    /// Log-price displacement at `t_now` from `(time, delta0)` events.
    fn displacement(&self, events: Vec<(f64, f64)>, t_now: f64) -> PyResult<f64> {
        let events = events
            .into_iter()
            .map(|(t, d)| core::ImpactEvent::new(t, d))
            .collect::<core::Result<Vec<_>>>()
            .map_err(to_py)?;
        core::superpose_displacement(&self.0, &events, t_now).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "ImpactKernel(lam={}, unity_constant={})",
            self.0.lambda(),
            self.0.unity_constant()
        )
    }
}

#[pyclass(name = "TradingClock", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyClock(core::TradingClock);

#[pymethods]
impl PyClock {
    #[new]
    #[pyo3(signature = (close_fraction=0.66))]
    fn new(close_fraction: f64) -> PyResult<Self> {
        core::TradingClock::new(close_fraction)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn close_fraction(&self) -> f64 {
        self.0.close_fraction()
    }

    fn session_times(&self, day: i64) -> PyResult<(f64, f64)> {
        core::session_times(&self.0, day).map_err(to_py)
    }

    fn session_day(&self, t: f64) -> Option<u32> {
        self.0.session_day(t)
    }
}

#[pyclass(name = "LiquidityProfile", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProfile(core::LiquidityProfile);

#[pymethods]
impl PyProfile {
    #[new]
    #[pyo3(signature = (open_coefficient=0.0015, close_coefficient=0.0005, geometric=false))]
    fn new(open_coefficient: f64, close_coefficient: f64, geometric: bool) -> PyResult<Self> {
        let interp = if geometric {
            core::Interpolation::Geometric
        } else {
            core::Interpolation::Linear
        };
        core::LiquidityProfile::new(open_coefficient, close_coefficient, interp)
            .map(Self)
            .map_err(to_py)
    }

    #[pyo3(signature = (t, clock=None))]
    fn coefficient(&self, t: f64, clock: Option<&PyClock>) -> PyResult<f64> {
        let clock = clock.map(|c| c.0).unwrap_or_default();
        core::impact_coefficient(&self.0, &clock, t).map_err(to_py)
    }
}

/// Time-ordered orders. Rows are `(time, asset, side, size)`.
#[pyclass(name = "Schedule", frozen)]
struct PySchedule(core::StrategySchedule);

fn strategy_config(
    n_days: u32,
    round_trip_size: f64,
    stop_day: Option<u32>,
) -> core::StrategyConfig {
    core::StrategyConfig {
        n_days,
        round_trip_size,
        stop_day,
        ..core::StrategyConfig::default()
    }
}

#[pymethods]
impl PySchedule {
    #[new]
    fn new(orders: Vec<(f64, String, String, f64)>) -> PyResult<Self> {
        let orders = orders
            .into_iter()
            .map(|(t, asset, side, size)| {
                let side: core::Side = side.parse().map_err(to_py)?;
                core::Order::new(t, asset, side, size).map_err(to_py)
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self(core::StrategySchedule::new(orders)))
    }

    #[staticmethod]
    #[pyo3(signature = (n_days=10, round_trip_size=1.0, stop_day=None, clock=None))]
    fn cartoon(
        n_days: u32,
        round_trip_size: f64,
        stop_day: Option<u32>,
        clock: Option<&PyClock>,
    ) -> PyResult<Self> {
        let clock = clock.map(|c| c.0).unwrap_or_default();
        core::cartoon_schedule(&strategy_config(n_days, round_trip_size, stop_day), &clock)
            .map(Self)
            .map_err(to_py)
    }

    /// `portfolio` maps asset to `(shares, entry_price)`; negative shares are shorts.
    #[staticmethod]
    #[pyo3(signature = (portfolio, n_days=10, round_trip_size=1.0, stop_day=None, clock=None))]
    fn breathing(
        portfolio: BTreeMap<String, (f64, f64)>,
        n_days: u32,
        round_trip_size: f64,
        stop_day: Option<u32>,
        clock: Option<&PyClock>,
    ) -> PyResult<Self> {
        let clock = clock.map(|c| c.0).unwrap_or_default();
        let portfolio = portfolio_from(portfolio)?;
        core::breathing_schedule(
            &strategy_config(n_days, round_trip_size, stop_day),
            &portfolio,
            &clock,
        )
        .map(Self)
        .map_err(to_py)
    }

    #[pyo3(signature = (t_plus_1=false, short_allowed=true))]
    fn constrained(&self, t_plus_1: bool, short_allowed: bool) -> Self {
        let c = core::Constraints {
            t_plus_1,
            short_allowed,
        };
        Self(core::apply_market_constraints(&self.0, &c))
    }

    fn orders(&self) -> Vec<(f64, String, &'static str, f64)> {
        self.0
            .orders()
            .iter()
            .map(|o| (o.time, o.asset.clone(), o.side.as_str(), o.size))
            .collect()
    }

    fn net_by_asset(&self) -> BTreeMap<&str, f64> {
        self.0.net_by_asset()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Simulation", frozen)]
struct PySimulation(core::Simulation);

#[pymethods]
impl PySimulation {
    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon()
    }

    fn assets(&self) -> Vec<String> {
        self.0.paths().keys().cloned().collect()
    }

    /// Sampled path as `(time, price, displacement)` rows.
    #[pyo3(signature = (asset="STOCK"))]
    fn path(&self, asset: &str) -> PyResult<Vec<(f64, f64, f64)>> {
        let p = self
            .0
            .path(asset)
            .ok_or_else(|| PyKeyError::new_err(asset.to_owned()))?;
        Ok(p.samples()
            .iter()
            .map(|s| (s.time, s.price, s.displacement))
            .collect())
    }

    #[pyo3(signature = (t, asset="STOCK"))]
    fn price_at(&self, t: f64, asset: &str) -> PyResult<f64> {
        let p = self
            .0
            .path(asset)
            .ok_or_else(|| PyKeyError::new_err(asset.to_owned()))?;
        p.price_at(t).map_err(to_py)
    }

    fn fills<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .fills()
            .iter()
            .map(|f| {
                let d = PyDict::new(py);
                d.set_item("time", f.order.time)?;
                d.set_item("asset", &f.order.asset)?;
                d.set_item("side", f.order.side.as_str())?;
                d.set_item("size", f.order.size)?;
                d.set_item("delta0", f.delta0)?;
                d.set_item("pre_order_price", f.pre_order_price)?;
                d.set_item("price", f.price)?;
                d.set_item("jump_from_pre_order", f.jump_from_pre_order())?;
                Ok(d)
            })
            .collect()
    }
}

#[pyfunction]
#[pyo3(signature = (
    schedule, kernel=None, profile=None, clock=None, base_price=100.0, horizon=None,
    sample_grid=1000, half_impact=false, noise_sigma=None, seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    schedule: &PySchedule,
    kernel: Option<&PyKernel>,
    profile: Option<&PyProfile>,
    clock: Option<&PyClock>,
    base_price: f64,
    horizon: Option<f64>,
    sample_grid: u32,
    half_impact: bool,
    noise_sigma: Option<f64>,
    seed: u64,
) -> PyResult<PySimulation> {
    let params = core::SimulationParams {
        kernel: kernel.map(|k| k.0).unwrap_or_default(),
        profile: profile.map(|p| p.0).unwrap_or_default(),
        clock: clock.map(|c| c.0).unwrap_or_default(),
        base_price,
        horizon,
        sample_grid,
        execution: if half_impact {
            core::ExecutionConvention::HalfImpact
        } else {
            core::ExecutionConvention::FullImpact
        },
        noise: noise_sigma.map(|daily_sigma| core::NoiseConfig { daily_sigma, seed }),
        ..core::SimulationParams::default()
    };
    core::simulate(&schedule.0, &params)
        .map(PySimulation)
        .map_err(to_py)
}

/// Gain, cost and net P&L for `portfolio` (asset -> (shares, entry_price)).
#[pyfunction]
fn net_pnl<'py>(
    py: Python<'py>,
    portfolio: BTreeMap<String, (f64, f64)>,
    schedule: &PySchedule,
    simulation: &PySimulation,
    t_eval: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = portfolio_from(portfolio)?;
    let r = core::net_pnl(&p, &schedule.0, &simulation.0, t_eval).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mark_to_market_gain", r.mark_to_market_gain)?;
    d.set_item("round_trip_cost", r.round_trip_cost)?;
    d.set_item("net", r.net)?;
    Ok(d)
}

/// Multiple of `reference` at which gain equals round-trip cost.
#[pyfunction]
#[pyo3(signature = (reference, schedule, simulation, t_eval, tolerance=1e-9))]
fn breakeven<'py>(
    py: Python<'py>,
    reference: BTreeMap<String, (f64, f64)>,
    schedule: &PySchedule,
    simulation: &PySimulation,
    t_eval: f64,
    tolerance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let p = portfolio_from(reference)?;
    let b = core::breakeven_portfolio_size(&p, &schedule.0, &simulation.0, t_eval, tolerance)
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("size", b.size)?;
    d.set_item("bisection_size", b.bisection_size)?;
    d.set_item("per_unit_gain", b.per_unit_gain)?;
    d.set_item("cost", b.cost)?;
    d.set_item("iterations", b.iterations)?;
    Ok(d)
}

/// Overnight/intraday decomposition of a Yahoo-style OHLC file.
///
/// Returns a dict of equal-length lists plus the number of skipped rows.
#[pyfunction]
#[pyo3(signature = (path, start=None, end=None, adjusted=false))]
fn decompose_csv<'py>(
    py: Python<'py>,
    path: std::path::PathBuf,
    start: Option<&str>,
    end: Option<&str>,
    adjusted: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let file =
        File::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
    let parsed = core::parse_ohlc_csv(file).map_err(to_py)?;
    let window = core::DateWindow {
        start: parse_date(start)?,
        end: parse_date(end)?,
    };
    let mode = if adjusted {
        core::PriceMode::Adjusted
    } else {
        core::PriceMode::Unadjusted
    };
    let s = core::decompose_returns(&parsed.bars, &window, mode).map_err(to_py)?;
    let d = PyDict::new(py);
    let dates: Vec<String> = s.dates.iter().map(|x| x.to_string()).collect();
    d.set_item("dates", dates)?;
    d.set_item("overnight", &s.overnight)?;
    d.set_item("intraday", &s.intraday)?;
    d.set_item("cumulative_overnight", &s.cumulative_overnight)?;
    d.set_item("cumulative_intraday", &s.cumulative_intraday)?;
    d.set_item("skipped_rows", parsed.skip_count())?;
    Ok(d)
}

#[pymodule]
fn impactsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyClock>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(net_pnl, m)?)?;
    m.add_function(wrap_pyfunction!(breakeven, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_csv, m)?)?;
    Ok(())
}
