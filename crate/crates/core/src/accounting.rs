//! Mark-to-market gains on the existing book versus the cost of round-trip trading.
//!
//! Gains scale with the size of the portfolio while the round-trip cost depends only
//! on the schedule, so net P&L is affine in portfolio size and has a single
//! break-even point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::StrategySchedule;
use crate::simulator::Simulation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    /// Signed share count; negative for shorts.
    pub shares: f64,
    pub entry_price: f64,
}

impl Position {
    pub fn new(shares: f64, entry_price: f64) -> Result<Self> {
        if !(shares.is_finite() && shares != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "position shares must be finite and non-zero, got {shares}"
            )));
        }
        if !(entry_price.is_finite() && entry_price > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "entry price must be > 0, got {entry_price}"
            )));
        }
        Ok(Self {
            shares,
            entry_price,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Portfolio {
    positions: BTreeMap<String, Position>,
}

impl Portfolio {
    pub fn new() -> Self {
        Self::default()
    }

    /// Single long position, as held by the cartoon strategy.
    pub fn single(asset: impl Into<String>, shares: f64, entry_price: f64) -> Result<Self> {
        let mut p = Self::new();
        p.insert(asset, Position::new(shares, entry_price)?)?;
        Ok(p)
    }

    pub fn insert(&mut self, asset: impl Into<String>, position: Position) -> Result<()> {
        // re-validate: fields are public
        let position = Position::new(position.shares, position.entry_price)?;
        self.positions.insert(asset.into(), position);
        Ok(())
    }

    pub fn positions(&self) -> &BTreeMap<String, Position> {
        &self.positions
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn notional(&self) -> f64 {
        self.positions
            .values()
            .map(|p| p.shares.abs() * p.entry_price)
            .sum()
    }

    /// Every position's share count multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = Self::new();
        for (asset, p) in &self.positions {
            out.insert(
                asset.clone(),
                Position::new(p.shares * factor, p.entry_price)?,
            )?;
        }
        Ok(out)
    }
}

/// Revaluation gain of `portfolio` at time `t`.
///
/// Each asset's price is its entry price moved by the simulated displacement of that
/// asset, so untraded assets contribute nothing.
pub fn mark_to_market(portfolio: &Portfolio, simulation: &Simulation, t: f64) -> Result<f64> {
    if !simulation.contains_time(t) {
        return Err(Error::OutOfRange {
            t,
            start: 0.0,
            end: simulation.horizon(),
        });
    }
    let mut gain = 0.0;
    for (asset, pos) in portfolio.positions() {
        let displacement = match simulation.path(asset) {
            Some(path) => path.displacement_at(t)?,
            None => 0.0,
        };
        gain += pos.shares * pos.entry_price * displacement.exp_m1();
    }
    Ok(gain)
}

/// Cash lost on the schedule's trades: purchases minus sale proceeds.
pub fn round_trip_cost(schedule: &StrategySchedule, simulation: &Simulation) -> Result<f64> {
    let fills = simulation.fills();
    if fills.len() != schedule.len() {
        return Err(Error::Inconsistent(format!(
            "{} orders but {} fills",
            schedule.len(),
            fills.len()
        )));
    }
    let mut cost = 0.0;
    for (i, (order, fill)) in schedule.orders().iter().zip(fills).enumerate() {
        if *order != fill.order {
            return Err(Error::Inconsistent(format!(
                "order {i} does not match its fill"
            )));
        }
        cost += fill.cash_paid();
    }
    Ok(cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnLReport {
    pub mark_to_market_gain: f64,
    pub round_trip_cost: f64,
    /// Always `mark_to_market_gain - round_trip_cost`.
    pub net: f64,
    pub breakeven_size: Option<f64>,
}

impl PnLReport {
    pub fn new(mark_to_market_gain: f64, round_trip_cost: f64) -> Self {
        Self {
            mark_to_market_gain,
            round_trip_cost,
            net: mark_to_market_gain - round_trip_cost,
            breakeven_size: None,
        }
    }

    pub fn with_breakeven(mut self, size: f64) -> Self {
        self.breakeven_size = Some(size);
        self
    }
}

pub fn net_pnl(
    portfolio: &Portfolio,
    schedule: &StrategySchedule,
    simulation: &Simulation,
    t_eval: f64,
) -> Result<PnLReport> {
    let gain = mark_to_market(portfolio, simulation, t_eval)?;
    let cost = round_trip_cost(schedule, simulation)?;
    Ok(PnLReport::new(gain, cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEven {
    /// Closed-form root `cost / per_unit_gain`.
    pub size: f64,
    /// Root located by bisection of `net(S) = S * per_unit_gain - cost`.
    pub bisection_size: f64,
    pub per_unit_gain: f64,
    pub cost: f64,
    pub iterations: u32,
}

const MAX_BISECTION_STEPS: u32 = 200;

/// Multiple of `reference` at which mark-to-market gain equals round-trip cost.
///
/// Net P&L of `S * reference` is `S * g - C` with `g` the reference's gain and `C`
/// the schedule's cost. The root is returned in closed form and cross-checked by
/// bisection on `[0, 2C/g]` evaluating the scaled portfolio through
/// [`mark_to_market`].
pub fn breakeven_portfolio_size(
    reference: &Portfolio,
    schedule: &StrategySchedule,
    simulation: &Simulation,
    t_eval: f64,
    tolerance: f64,
) -> Result<BreakEven> {
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    let cost = round_trip_cost(schedule, simulation)?;
    if cost.is_nan() || cost <= 0.0 {
        return Err(Error::NonPositiveCost(cost));
    }
    let g = mark_to_market(reference, simulation, t_eval)?;
    if g.is_nan() || g <= 0.0 {
        return Err(Error::NoBreakEven(g));
    }
    let closed = cost / g;

    let net = |s: f64| -> Result<f64> {
        if s == 0.0 {
            return Ok(-cost);
        }
        Ok(mark_to_market(&reference.scaled(s)?, simulation, t_eval)? - cost)
    };
    let (mut lo, mut hi) = (0.0, 2.0 * closed);
    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    while iterations < MAX_BISECTION_STEPS {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = net(mid)?;
        if v == 0.0 {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if net(mid)?.abs() > tolerance {
        return Err(Error::Inconsistent(format!(
            "bisection residual {} exceeds tolerance {tolerance}",
            net(mid)?
        )));
    }
    Ok(BreakEven {
        size: closed,
        bisection_size: mid,
        per_unit_gain: g,
        cost,
        iterations,
    })
}
