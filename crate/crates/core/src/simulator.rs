//! Deterministic price paths driven by a schedule of orders.
//!
//! Each order becomes an [`ImpactEvent`] whose initial impact is the intraday
//! coefficient at the order time times the order size, signed by side. The
//! log-price displacement of an asset is the superposition of its own events, and
//! `price = base_price * exp(displacement)`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clock::{impact_coefficient, LiquidityProfile, TradingClock};
use crate::error::{Error, Result};
use crate::kernel::{decayed_impact, ImpactEvent, ImpactKernel};
use crate::schedule::{Order, StrategySchedule, CARTOON_ASSET};

/// Days simulated past the last order day when no horizon is given.
pub const DEFAULT_TAIL_DAYS: f64 = 10.0;
pub const DEFAULT_SAMPLE_GRID: u32 = 1000;

/// Order times closer than this to a grid time replace that grid time.
const GRID_SNAP: f64 = 1e-9;

/// How much of an order's own initial impact is charged to its execution price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionConvention {
    /// Fill at the post-impact price.
    #[default]
    FullImpact,
    /// Fill halfway (in log space) between pre- and post-impact prices.
    HalfImpact,
}

/// Gaussian log-price noise added to the sampled path only. Fills and all
/// closed-form queries stay deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of the log return over one trading day.
    pub daily_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub kernel: ImpactKernel,
    pub profile: LiquidityProfile,
    pub clock: TradingClock,
    pub base_price: f64,
    /// Per-asset overrides of `base_price`.
    #[serde(default)]
    pub asset_base_prices: BTreeMap<String, f64>,
    pub horizon: Option<f64>,
    pub sample_grid: u32,
    pub execution: ExecutionConvention,
    pub noise: Option<NoiseConfig>,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            kernel: ImpactKernel::default(),
            profile: LiquidityProfile::default(),
            clock: TradingClock::default(),
            base_price: 100.0,
            asset_base_prices: BTreeMap::new(),
            horizon: None,
            sample_grid: DEFAULT_SAMPLE_GRID,
            execution: ExecutionConvention::FullImpact,
            noise: None,
        }
    }
}

impl SimulationParams {
    pub fn base_price_of(&self, asset: &str) -> f64 {
        self.asset_base_prices
            .get(asset)
            .copied()
            .unwrap_or(self.base_price)
    }

    fn validate(&self) -> Result<()> {
        let bases = std::iter::once(&self.base_price).chain(self.asset_base_prices.values());
        for &b in bases {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "base price must be > 0, got {b}"
                )));
            }
        }
        if self.sample_grid == 0 {
            return Err(Error::InvalidParameter("sample_grid must be >= 1".into()));
        }
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "horizon must be > 0, got {h}"
                )));
            }
        }
        if let Some(n) = self.noise {
            if !(n.daily_sigma.is_finite() && n.daily_sigma >= 0.0) {
                return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Horizon used for `schedule`: the explicit one, or the last order day plus
    /// [`DEFAULT_TAIL_DAYS`].
    pub fn resolved_horizon(&self, schedule: &StrategySchedule) -> Result<f64> {
        let last = schedule.last_time();
        match (self.horizon, last) {
            (Some(h), Some(last)) if h < last => Err(Error::Precondition(format!(
                "horizon {h} precedes the last order at {last}"
            ))),
            (Some(h), _) => Ok(h),
            (None, Some(last)) => Ok(last.floor() + DEFAULT_TAIL_DAYS),
            (None, None) => Ok(DEFAULT_TAIL_DAYS),
        }
    }
}

/// Fill price for an order with initial impact `delta0` placed when the price is
/// `pre_order_price`.
pub fn execution_price(pre_order_price: f64, delta0: f64, convention: ExecutionConvention) -> f64 {
    match convention {
        ExecutionConvention::FullImpact => pre_order_price * delta0.exp(),
        ExecutionConvention::HalfImpact => pre_order_price * (0.5 * delta0).exp(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub order: Order,
    pub delta0: f64,
    pub pre_order_price: f64,
    pub price: f64,
    /// Instantaneous post-order price.
    pub post_order_price: f64,
    pub base_price: f64,
}

impl Fill {
    /// Price change caused by the order, relative to the instantaneous pre-order price.
    pub fn jump_from_pre_order(&self) -> f64 {
        self.post_order_price / self.pre_order_price - 1.0
    }

    /// Post-order price relative to the untouched base price.
    pub fn level_from_baseline(&self) -> f64 {
        self.post_order_price / self.base_price - 1.0
    }

    /// Signed cash paid for the fill (negative for sells).
    pub fn cash_paid(&self) -> f64 {
        self.order.side.sign() * self.order.size * self.price
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub time: f64,
    pub price: f64,
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    asset: String,
    base_price: f64,
    sample_grid: u32,
    kernel: ImpactKernel,
    events: Vec<ImpactEvent>,
    samples: Vec<PathSample>,
}

impl PricePath {
    pub fn asset(&self) -> &str {
        &self.asset
    }

    pub fn base_price(&self) -> f64 {
        self.base_price
    }

    pub fn sample_grid(&self) -> u32 {
        self.sample_grid
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn events(&self) -> &[ImpactEvent] {
        &self.events
    }

    pub fn start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.time)
    }

    pub fn end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t >= self.start() && t <= self.end() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            })
        }
    }

    /// Closed-form displacement including every event placed at or before `t`.
    pub fn displacement_at(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let n = self.events.partition_point(|e| e.time <= t);
        Ok(displacement_of(&self.kernel, &self.events[..n], t))
    }

    /// Left limit of the displacement at `t`: events placed exactly at `t` excluded.
    pub fn displacement_before(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let n = self.events.partition_point(|e| e.time < t);
        Ok(displacement_of(&self.kernel, &self.events[..n], t))
    }

    pub fn price_at(&self, t: f64) -> Result<f64> {
        Ok(self.base_price * self.displacement_at(t)?.exp())
    }

    /// Writes `time,price,displacement` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "price", "displacement"])?;
        for s in &self.samples {
            w.write_record([
                s.time.to_string(),
                s.price.to_string(),
                s.displacement.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<PathSample>> {
        let mut r = csv::Reader::from_reader(reader);
        if r.headers()?.iter().collect::<Vec<_>>() != ["time", "price", "displacement"] {
            return Err(Error::Format(
                "path header must be time,price,displacement".into(),
            ));
        }
        let mut out = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec[k].parse().map_err(|e| Error::Row {
                    line: i as u64 + 2,
                    message: format!("{e}"),
                })
            };
            out.push(PathSample {
                time: parse(0)?,
                price: parse(1)?,
                displacement: parse(2)?,
            });
        }
        Ok(out)
    }
}

fn displacement_of(kernel: &ImpactKernel, events: &[ImpactEvent], t: f64) -> f64 {
    // events are already restricted to time <= t
    events
        .iter()
        .map(|e| decayed_impact(kernel, e, t).expect("event precedes evaluation time"))
        .fold(0.0, |acc, d| acc + d)
}

/// Result of running a schedule: one path per traded asset plus a fill per order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    paths: BTreeMap<String, PricePath>,
    fills: Vec<Fill>,
    horizon: f64,
}

impl Simulation {
    pub fn paths(&self) -> &BTreeMap<String, PricePath> {
        &self.paths
    }

    pub fn path(&self, asset: &str) -> Option<&PricePath> {
        self.paths.get(asset)
    }

    pub fn fills(&self) -> &[Fill] {
        &self.fills
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= 0.0 && t <= self.horizon
    }

    pub fn write_fills_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "time",
            "asset",
            "side",
            "size",
            "delta0",
            "pre_order_price",
            "execution_price",
            "jump_from_pre_order",
            "level_from_baseline",
        ])?;
        for f in &self.fills {
            w.write_record([
                f.order.time.to_string(),
                f.order.asset.clone(),
                f.order.side.to_string(),
                f.order.size.to_string(),
                f.delta0.to_string(),
                f.pre_order_price.to_string(),
                f.price.to_string(),
                f.jump_from_pre_order().to_string(),
                f.level_from_baseline().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sample_times(horizon: f64, grid: u32, order_times: &[f64]) -> Vec<f64> {
    let g = f64::from(grid);
    let n = (horizon * g + GRID_SNAP).floor() as u64;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 / g).collect();
    if horizon - times[times.len() - 1] > GRID_SNAP {
        times.push(horizon);
    }
    for &t in order_times {
        let i = times.partition_point(|&x| x < t);
        let near = |j: usize| times.get(j).is_some_and(|&x| (x - t).abs() <= GRID_SNAP);
        if near(i) {
            times[i] = t;
        } else if i > 0 && near(i - 1) {
            times[i - 1] = t;
        } else {
            times.insert(i, t);
        }
    }
    times
}

/// Runs `schedule` under `params`.
pub fn simulate(schedule: &StrategySchedule, params: &SimulationParams) -> Result<Simulation> {
    params.validate()?;
    let horizon = params.resolved_horizon(schedule)?;

    let mut events: BTreeMap<String, Vec<ImpactEvent>> = BTreeMap::new();
    let mut fills = Vec::with_capacity(schedule.len());
    for order in schedule.orders() {
        let coefficient = impact_coefficient(&params.profile, &params.clock, order.time)?;
        let delta0 = order.side.sign() * coefficient * order.size;
        let event = ImpactEvent::new(order.time, delta0)?;
        let base_price = params.base_price_of(&order.asset);
        let asset_events = events.entry(order.asset.clone()).or_default();
        let before = displacement_of(&params.kernel, asset_events, order.time);
        let pre_order_price = base_price * before.exp();
        let post = before + params.kernel.impact_at(delta0, 0.0);
        fills.push(Fill {
            order: order.clone(),
            delta0,
            pre_order_price,
            price: execution_price(pre_order_price, delta0, params.execution),
            post_order_price: base_price * post.exp(),
            base_price,
        });
        asset_events.push(event);
    }
    if events.is_empty() {
        events.insert(CARTOON_ASSET.to_string(), Vec::new());
    }

    let mut paths = BTreeMap::new();
    for (asset, asset_events) in events {
        let base_price = params.base_price_of(&asset);
        let times: Vec<f64> = asset_events.iter().map(|e| e.time).collect();
        let times = sample_times(horizon, params.sample_grid, &times);
        let noise = params
            .noise
            .map(|n| noise_walk(&times, n, &asset))
            .transpose()?;
        let samples = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let n = asset_events.partition_point(|e| e.time <= t);
                let mut displacement = displacement_of(&params.kernel, &asset_events[..n], t);
                if let Some(walk) = &noise {
                    displacement += walk[i];
                }
                PathSample {
                    time: t,
                    price: base_price * displacement.exp(),
                    displacement,
                }
            })
            .collect();
        paths.insert(
            asset.clone(),
            PricePath {
                asset,
                base_price,
                sample_grid: params.sample_grid,
                kernel: params.kernel,
                events: asset_events,
                samples,
            },
        );
    }

    Ok(Simulation {
        paths,
        fills,
        horizon,
    })
}

fn noise_walk(times: &[f64], cfg: NoiseConfig, asset: &str) -> Result<Vec<f64>> {
    // per-asset stream so adding an asset does not perturb the others
    let salt = asset.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt);
    let std_normal = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut walk = Vec::with_capacity(times.len());
    let mut level = 0.0;
    let mut prev = times.first().copied().unwrap_or(0.0);
    for &t in times {
        level += cfg.daily_sigma * (t - prev).sqrt() * std_normal.sample(&mut rng);
        walk.push(level);
        prev = t;
    }
    Ok(walk)
}

/// Single-asset convenience wrapper around [`simulate`].
pub fn simulate_price_path(
    schedule: &StrategySchedule,
    kernel: &ImpactKernel,
    profile: &LiquidityProfile,
    clock: &TradingClock,
    base_price: f64,
    horizon: Option<f64>,
    sample_grid: u32,
) -> Result<PricePath> {
    let assets = schedule.net_by_asset();
    if assets.len() > 1 {
        return Err(Error::Precondition(format!(
            "single-asset path requested for a schedule with {} assets",
            assets.len()
        )));
    }
    let params = SimulationParams {
        kernel: *kernel,
        profile: *profile,
        clock: *clock,
        base_price,
        horizon,
        sample_grid,
        ..SimulationParams::default()
    };
    let sim = simulate(schedule, &params)?;
    Ok(sim
        .paths
        .into_values()
        .next()
        .expect("simulate always yields at least one path"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{cartoon_schedule, Side, StrategyConfig};

    fn cartoon(n_days: u32) -> StrategySchedule {
        let config = StrategyConfig {
            n_days,
            ..StrategyConfig::default()
        };
        cartoon_schedule(&config, &TradingClock::default()).unwrap()
    }

    fn default_path(schedule: &StrategySchedule) -> PricePath {
        simulate_price_path(
            schedule,
            &ImpactKernel::default(),
            &LiquidityProfile::default(),
            &TradingClock::default(),
            100.0,
            None,
            DEFAULT_SAMPLE_GRID,
        )
        .unwrap()
    }

    #[test]
    fn empty_schedule_is_flat() {
        let path = default_path(&StrategySchedule::default());
        assert!(path
            .samples()
            .iter()
            .all(|s| s.price == 100.0 && s.displacement == 0.0));
        assert_eq!(path.end(), DEFAULT_TAIL_DAYS);
    }

    #[test]
    fn displacement_after_first_buy() {
        let path = default_path(&cartoon(10));
        // brute-force sum of the two kernel terms alive at t = 1.0
        let sell_residual = -0.0005 * 1.0 / (1.0 + (1.0f64 - 0.66).sqrt());
        let expected = 0.0015 + sell_residual;
        let got = path.displacement_at(1.0).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
        assert!((got - 0.001_184_163_022_336_765).abs() < 1e-15);
        let before = path.displacement_before(1.0).unwrap();
        assert!((got - before - 0.0015).abs() < 1e-15);
    }

    #[test]
    fn impact_persists_after_stop() {
        let path = default_path(&cartoon(10));
        let d10 = path.displacement_at(10.0).unwrap();
        let d20 = path.displacement_at(20.0).unwrap();
        assert!(d20 > 0.0 && d20 < d10);
    }

    #[test]
    fn samples_before_first_event_sit_at_base() {
        let path = default_path(&cartoon(3));
        for s in path.samples().iter().take_while(|s| s.time < 0.66) {
            assert_eq!(s.price, 100.0);
        }
        assert!(path.samples().windows(2).all(|w| w[0].time < w[1].time));
        assert!(path.samples().iter().any(|s| s.time == 0.66));
    }

    #[test]
    fn execution_price_examples() {
        let buy = execution_price(100.0, 0.0015, ExecutionConvention::FullImpact);
        assert!((buy - 100.150_112_556_271_11).abs() < 1e-9);
        let sell = execution_price(100.0, -0.0005, ExecutionConvention::FullImpact);
        assert!((sell - 99.950_012_497_916_93).abs() < 1e-9);
        assert_eq!(
            execution_price(100.0, 0.0, ExecutionConvention::FullImpact),
            100.0
        );
        let half = execution_price(100.0, 0.0015, ExecutionConvention::HalfImpact);
        assert!(half > 100.0 && half < buy);
    }

    #[test]
    fn fills_record_pre_and_post_prices() {
        let sim = simulate(&cartoon(2), &SimulationParams::default()).unwrap();
        let fills = sim.fills();
        assert_eq!(fills.len(), 4);
        assert_eq!(fills[0].pre_order_price, 100.0);
        assert_eq!(fills[0].order.side, Side::Sell);
        assert!((fills[0].jump_from_pre_order() - ((-0.0005f64).exp() - 1.0)).abs() < 1e-15);
        assert!(fills[1].price > fills[0].price);
    }

    #[test]
    fn out_of_session_order_rejected() {
        let s = StrategySchedule::new(vec![Order::new(0.8, "X", Side::Buy, 1.0).unwrap()]);
        assert!(matches!(
            simulate(&s, &SimulationParams::default()),
            Err(Error::OutOfSession(_))
        ));
    }

    #[test]
    fn horizon_before_last_order_rejected() {
        let params = SimulationParams {
            horizon: Some(5.0),
            ..SimulationParams::default()
        };
        assert!(matches!(
            simulate(&cartoon(10), &params),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn path_range_is_enforced() {
        let path = default_path(&cartoon(1));
        assert!(matches!(path.price_at(11.5), Err(Error::OutOfRange { .. })));
        assert!(path.price_at(11.0).is_ok());
    }

    #[test]
    fn grid_refinement_is_exact() {
        let schedule = cartoon(10);
        let coarse = simulate(
            &schedule,
            &SimulationParams {
                sample_grid: 500,
                ..Default::default()
            },
        )
        .unwrap();
        let fine = simulate(
            &schedule,
            &SimulationParams {
                sample_grid: 1000,
                ..Default::default()
            },
        )
        .unwrap();
        let fine_samples = fine.path(CARTOON_ASSET).unwrap().samples();
        let mut checked = 0;
        for s in coarse.path(CARTOON_ASSET).unwrap().samples() {
            if let Some(f) = fine_samples.iter().find(|f| f.time == s.time) {
                assert_eq!(f.displacement.to_bits(), s.displacement.to_bits());
                checked += 1;
            }
        }
        assert!(checked >= 5000);
    }

    #[test]
    fn noise_is_seeded_and_leaves_fills_alone() {
        let params = SimulationParams {
            noise: Some(NoiseConfig {
                daily_sigma: 0.01,
                seed: 7,
            }),
            ..SimulationParams::default()
        };
        let a = simulate(&cartoon(3), &params).unwrap();
        let b = simulate(&cartoon(3), &params).unwrap();
        assert_eq!(a, b);
        let clean = simulate(&cartoon(3), &SimulationParams::default()).unwrap();
        assert_eq!(a.fills(), clean.fills());
        assert_ne!(
            a.path(CARTOON_ASSET).unwrap().samples(),
            clean.path(CARTOON_ASSET).unwrap().samples()
        );
    }

    #[test]
    fn path_csv_reads_back() {
        let path = default_path(&cartoon(1));
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(PricePath::read_csv(buf.as_slice()).unwrap(), path.samples());
    }
}
