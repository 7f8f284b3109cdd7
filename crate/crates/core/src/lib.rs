//! Transient market-impact simulation toolkit.
//!
//! The crate is split along the pipeline it implements:
//!
//! - [`kernel`]: decay law of a single order's price impact and linear superposition.
//! - [`clock`]: trading-session geometry and the time-of-day impact coefficient.
//! - [`schedule`]: round-trip order schedules (single-stock cartoon, multi-asset breathing)
//!   and market constraint modes.
//! - [`simulator`]: deterministic price paths and execution prices.
//! - [`accounting`]: mark-to-market gains, round-trip costs and break-even portfolio size.
//! - [`ohlc`]: daily OHLC ingestion and overnight/intraday return decomposition.
//! - [`svg`]: minimal line-chart rendering for paths and return curves.

pub mod accounting;
pub mod clock;
pub mod error;
pub mod kernel;
pub mod ohlc;
pub mod schedule;
pub mod simulator;
pub mod svg;

pub use accounting::{
    breakeven_portfolio_size, mark_to_market, net_pnl, round_trip_cost, BreakEven, PnLReport,
    Portfolio, Position,
};
pub use clock::{impact_coefficient, session_times, Interpolation, LiquidityProfile, TradingClock};
pub use error::{Error, Result};
pub use kernel::{decayed_impact, superpose_displacement, ImpactEvent, ImpactKernel};
pub use ohlc::{
    apply_index_window, decompose_returns, endpoint_summary, parse_ohlc_csv, DateWindow,
    EndpointSummary, IndexSpec, OhlcBar, ParsedBars, PriceMode, ReturnSeries,
};
pub use schedule::{
    apply_market_constraints, breathing_schedule, cartoon_schedule, Constraints, Order, Side,
    StrategyConfig, StrategySchedule,
};
pub use simulator::{
    execution_price, simulate, simulate_price_path, ExecutionConvention, Fill, NoiseConfig,
    PathSample, PricePath, Simulation, SimulationParams,
};
