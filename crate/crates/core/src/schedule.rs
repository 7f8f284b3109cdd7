//! Round-trip order schedules and market constraint modes.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accounting::Portfolio;
use crate::clock::{TradingClock, SESSION_EPSILON};
use crate::error::{Error, Result};

/// Asset identifier used by the single-stock cartoon schedule.
pub const CARTOON_ASSET: &str = "STOCK";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buy,
    Sell,
    SellShort,
    BuyToCover,
}

impl Side {
    /// +1 for orders that add shares, -1 for orders that remove them.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy | Side::BuyToCover => 1.0,
            Side::Sell | Side::SellShort => -1.0,
        }
    }

    pub fn is_short_side(self) -> bool {
        matches!(self, Side::SellShort | Side::BuyToCover)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
            Side::SellShort => "sell_short",
            Side::BuyToCover => "buy_to_cover",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "buy" => Ok(Side::Buy),
            "sell" => Ok(Side::Sell),
            "sell_short" => Ok(Side::SellShort),
            "buy_to_cover" => Ok(Side::BuyToCover),
            other => Err(Error::Format(format!("unknown order side {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub time: f64,
    pub asset: String,
    pub side: Side,
    pub size: f64,
}

impl Order {
    pub fn new(time: f64, asset: impl Into<String>, side: Side, size: f64) -> Result<Self> {
        if !(size.is_finite() && size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "order size must be > 0, got {size}"
            )));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "order time must be >= 0, got {time}"
            )));
        }
        Ok(Self {
            time,
            asset: asset.into(),
            side,
            size,
        })
    }

    pub fn signed_size(&self) -> f64 {
        self.side.sign() * self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    /// Shares bought cannot be sold within the same session.
    pub t_plus_1: bool,
    pub short_allowed: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            t_plus_1: false,
            short_allowed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub n_days: u32,
    pub round_trip_size: f64,
    pub stop_day: Option<u32>,
    pub constraints: Constraints,
    /// Opening orders are placed this long after the open and closing orders this
    /// long before the close.
    pub time_jitter: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            n_days: 10,
            round_trip_size: 1.0,
            stop_day: None,
            constraints: Constraints::default(),
            time_jitter: 0.0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self, clock: &TradingClock) -> Result<()> {
        if !(self.round_trip_size.is_finite() && self.round_trip_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "round_trip_size must be > 0, got {}",
                self.round_trip_size
            )));
        }
        if let Some(stop) = self.stop_day {
            if stop > self.n_days {
                return Err(Error::InvalidParameter(format!(
                    "stop_day {stop} exceeds n_days {}",
                    self.n_days
                )));
            }
        }
        if !(self.time_jitter >= 0.0 && 2.0 * self.time_jitter < clock.close_fraction()) {
            return Err(Error::InvalidParameter(format!(
                "time_jitter must lie in [0, close_fraction/2), got {}",
                self.time_jitter
            )));
        }
        Ok(())
    }

    /// Number of round-trip days actually traded.
    pub fn active_days(&self) -> u32 {
        self.stop_day.map_or(self.n_days, |s| s.min(self.n_days))
    }

    fn open_time(&self, clock: &TradingClock, day: u32) -> f64 {
        clock.open_time(day) + self.time_jitter
    }

    fn close_time(&self, clock: &TradingClock, day: u32) -> f64 {
        clock.close_time(day) - self.time_jitter
    }
}

/// Orders sorted by time; orders sharing a time keep their generation order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StrategySchedule {
    orders: Vec<Order>,
}

impl StrategySchedule {
    pub fn new(mut orders: Vec<Order>) -> Self {
        orders.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self { orders }
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn into_orders(self) -> Vec<Order> {
        self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.orders.last().map(|o| o.time)
    }

    /// Net signed size per asset over the whole schedule.
    pub fn net_by_asset(&self) -> BTreeMap<&str, f64> {
        let mut net = BTreeMap::new();
        for o in &self.orders {
            *net.entry(o.asset.as_str()).or_insert(0.0) += o.signed_size();
        }
        net
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "asset", "side", "size"])?;
        for o in &self.orders {
            w.write_record([
                o.time.to_string(),
                o.asset.clone(),
                o.side.to_string(),
                o.size.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = r
            .headers()?
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        if headers != ["time", "asset", "side", "size"] {
            return Err(Error::Format(format!(
                "schedule header must be time,asset,side,size, got {}",
                headers.join(",")
            )));
        }
        let mut orders = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let row_err = |message: String| Error::Row { line, message };
            let time: f64 = rec[0].parse().map_err(|e| row_err(format!("time: {e}")))?;
            let side: Side = rec[2].parse().map_err(|e: Error| row_err(e.to_string()))?;
            let size: f64 = rec[3].parse().map_err(|e| row_err(format!("size: {e}")))?;
            orders.push(Order::new(time, &rec[1], side, size).map_err(|e| row_err(e.to_string()))?);
        }
        Ok(Self::new(orders))
    }
}

/// Single-stock cartoon: sell at the close of day `d` and buy back at the open of
/// day `d + 1`, for every active day.
pub fn cartoon_schedule(config: &StrategyConfig, clock: &TradingClock) -> Result<StrategySchedule> {
    config.validate(clock)?;
    let size = config.round_trip_size;
    let mut orders = Vec::with_capacity(2 * config.active_days() as usize);
    for day in 0..config.active_days() {
        orders.push(Order::new(
            config.close_time(clock, day),
            CARTOON_ASSET,
            Side::Sell,
            size,
        )?);
        orders.push(Order::new(
            config.open_time(clock, day + 1),
            CARTOON_ASSET,
            Side::Buy,
            size,
        )?);
    }
    Ok(StrategySchedule::new(orders))
}

/// Multi-asset variant: every position expands near the open and contracts near the
/// close of each active day. Longs buy then sell; shorts sell short then cover.
pub fn breathing_schedule(
    config: &StrategyConfig,
    portfolio: &Portfolio,
    clock: &TradingClock,
) -> Result<StrategySchedule> {
    config.validate(clock)?;
    if portfolio.is_empty() {
        return Err(Error::Precondition(
            "breathing schedule needs at least one position".into(),
        ));
    }
    let size = config.round_trip_size;
    let mut orders = Vec::new();
    for day in 0..config.active_days() {
        let open = config.open_time(clock, day);
        let close = config.close_time(clock, day);
        for (asset, pos) in portfolio.positions() {
            let side = if pos.shares > 0.0 {
                Side::Buy
            } else {
                Side::SellShort
            };
            orders.push(Order::new(open, asset, side, size)?);
        }
        for (asset, pos) in portfolio.positions() {
            let side = if pos.shares > 0.0 {
                Side::Sell
            } else {
                Side::BuyToCover
            };
            orders.push(Order::new(close, asset, side, size)?);
        }
    }
    Ok(StrategySchedule::new(orders))
}

/// Calendar day an in-session time belongs to (sessions never span midnight).
fn trading_day(t: f64) -> i64 {
    (t + SESSION_EPSILON).floor() as i64
}

/// Removes orders forbidden by `constraints`.
///
/// With `t_plus_1`, each long-side sell is netted against earlier unmatched buys of
/// the same asset in the same session and the matched quantity is removed from
/// both. Without `short_allowed`, every short-side order is dropped.
pub fn apply_market_constraints(
    schedule: &StrategySchedule,
    constraints: &Constraints,
) -> StrategySchedule {
    let mut orders: Vec<Order> = schedule.orders().to_vec();

    if !constraints.short_allowed {
        orders.retain(|o| !o.side.is_short_side());
    }

    if constraints.t_plus_1 {
        // remaining size per order after netting
        let mut remaining: Vec<f64> = orders.iter().map(|o| o.size).collect();
        // (asset, day) -> indices of buys with size left
        let mut open_buys: BTreeMap<(&str, i64), Vec<usize>> = BTreeMap::new();
        for (i, o) in orders.iter().enumerate() {
            let key = (o.asset.as_str(), trading_day(o.time));
            match o.side {
                Side::Buy => open_buys.entry(key).or_default().push(i),
                Side::Sell => {
                    let Some(buys) = open_buys.get_mut(&key) else {
                        continue;
                    };
                    let mut j = 0;
                    while remaining[i] > 0.0 && j < buys.len() {
                        let b = buys[j];
                        let matched = remaining[i].min(remaining[b]);
                        remaining[i] -= matched;
                        remaining[b] -= matched;
                        if remaining[b] <= 0.0 {
                            buys.remove(j);
                        } else {
                            j += 1;
                        }
                    }
                }
                Side::SellShort | Side::BuyToCover => {}
            }
        }
        orders = orders
            .into_iter()
            .zip(remaining)
            .filter(|(_, left)| *left > 0.0)
            .map(|(mut o, left)| {
                o.size = left;
                o
            })
            .collect();
    }

    StrategySchedule::new(orders)
}
