use chrono::{Duration, NaiveDate};
use proptest::prelude::*;

use impactsim::ohlc::write_ohlc_csv;
use impactsim::schedule::CARTOON_ASSET;
use impactsim::{
    apply_market_constraints, breathing_schedule, cartoon_schedule, decayed_impact,
    decompose_returns, mark_to_market, net_pnl, parse_ohlc_csv, round_trip_cost, simulate,
    superpose_displacement, Constraints, DateWindow, ImpactEvent, ImpactKernel, OhlcBar, Portfolio,
    Position, PriceMode, SimulationParams, StrategyConfig, TradingClock,
};

fn kernel_strategy() -> impl Strategy<Value = ImpactKernel> {
    (0.1f64..10.0, 0.1f64..10.0, 1.0f64..6.0).prop_map(|(l, c, n)| {
        ImpactKernel::new(l, c)
            .unwrap()
            .with_knee_sharpness(n)
            .unwrap()
    })
}

fn event_strategy() -> impl Strategy<Value = ImpactEvent> {
    (0.0f64..50.0, -0.01f64..0.01).prop_map(|(t, d)| ImpactEvent::new(t, d).unwrap())
}

fn bars_strategy(max_len: usize) -> impl Strategy<Value = Vec<OhlcBar>> {
    prop::collection::vec(
        (
            1u32..4,
            0.9f64..1.1,
            0.9f64..1.1,
            prop::option::of(1u64..1_000_000),
        ),
        2..max_len,
    )
    .prop_map(|steps| {
        let mut date = NaiveDate::from_ymd_opt(1995, 1, 2).unwrap();
        let mut close = 100.0;
        steps
            .into_iter()
            .map(|(gap, gap_ratio, day_ratio, volume)| {
                date += Duration::days(i64::from(gap));
                let open = close * gap_ratio;
                close = open * day_ratio;
                OhlcBar {
                    date,
                    open,
                    high: Some(open.max(close) * 1.01),
                    low: Some(open.min(close) * 0.99),
                    close,
                    adjusted_close: Some(close),
                    volume,
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn decay_is_monotone_and_sign_preserving(k in kernel_strategy(), e in event_strategy(), a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let (t1, t2) = (e.time + a.min(b), e.time + a.max(b));
        let v1 = decayed_impact(&k, &e, t1).unwrap();
        let v2 = decayed_impact(&k, &e, t2).unwrap();
        prop_assert!(v2.abs() <= v1.abs());
        if e.delta0 != 0.0 {
            prop_assert_eq!(v1.signum(), e.delta0.signum());
            prop_assert_eq!(v2.signum(), e.delta0.signum());
        }
    }

    #[test]
    fn plateau_and_tail(k in kernel_strategy(), d0 in 0.0001f64..0.01, sign in prop::bool::ANY) {
        let d0 = if sign { d0 } else { -d0 };
        let c = k.unity_constant();
        let lambda = k.lambda();
        let plateau = k.impact_at(d0, lambda / 100.0) / (d0 * c);
        prop_assert!((plateau - 1.0).abs() <= 0.01);
        for mult in [100.0, 1000.0] {
            let s = mult * lambda;
            let tail = k.impact_at(d0, s) * s / (d0 * c * lambda);
            prop_assert!((tail - 1.0).abs() <= 0.01);
        }
    }

    #[test]
    fn superposition_is_additive(
        k in kernel_strategy(),
        a in prop::collection::vec(event_strategy(), 0..30),
        b in prop::collection::vec(event_strategy(), 0..30),
        extra in 0.0f64..10.0,
    ) {
        let t = 50.0 + extra;
        let joined: Vec<ImpactEvent> = a.iter().chain(&b).copied().collect();
        let whole = superpose_displacement(&k, &joined, t).unwrap();
        let parts = superpose_displacement(&k, &a, t).unwrap() + superpose_displacement(&k, &b, t).unwrap();
        let scale: f64 = joined.iter().map(|e| decayed_impact(&k, e, t).unwrap().abs()).sum();
        prop_assert!((whole - parts).abs() <= 1e-15 * scale.max(f64::MIN_POSITIVE) * 4.0);
    }

    #[test]
    fn breathing_schedules_net_to_zero_each_day(
        shares in prop::collection::vec(prop_oneof![-1000.0f64..-1.0, 1.0f64..1000.0], 1..6),
        days in 0u32..8,
        size in 0.1f64..5.0,
        t_plus_1 in prop::bool::ANY,
        short_allowed in prop::bool::ANY,
    ) {
        let clock = TradingClock::default();
        let mut portfolio = Portfolio::new();
        for (i, s) in shares.iter().enumerate() {
            portfolio.insert(format!("A{i}"), Position::new(*s, 50.0).unwrap()).unwrap();
        }
        let config = StrategyConfig { n_days: days, round_trip_size: size, ..StrategyConfig::default() };
        let schedule = breathing_schedule(&config, &portfolio, &clock).unwrap();
        prop_assert!(schedule.orders().windows(2).all(|w| w[0].time <= w[1].time));
        for o in schedule.orders() {
            prop_assert!(clock.session_day(o.time).is_some());
        }
        let mut per_day = std::collections::BTreeMap::new();
        for o in schedule.orders() {
            *per_day.entry((o.asset.clone(), clock.session_day(o.time).unwrap())).or_insert(0.0) += o.signed_size();
        }
        prop_assert!(per_day.values().all(|v| *v == 0.0));

        let c = Constraints { t_plus_1, short_allowed };
        let once = apply_market_constraints(&schedule, &c);
        let twice = apply_market_constraints(&once, &c);
        prop_assert_eq!(&once, &twice);
        for net in once.net_by_asset().values() {
            prop_assert_eq!(*net, 0.0);
        }
    }

    #[test]
    fn cartoon_nets_to_zero(days in 0u32..40, size in 0.01f64..10.0) {
        let clock = TradingClock::default();
        let config = StrategyConfig { n_days: days, round_trip_size: size, ..StrategyConfig::default() };
        let s = cartoon_schedule(&config, &clock).unwrap();
        prop_assert_eq!(s.len(), 2 * days as usize);
        prop_assert!(s.orders().windows(2).all(|w| w[0].time < w[1].time));
        if days > 0 {
            prop_assert_eq!(s.net_by_asset()[CARTOON_ASSET], 0.0);
        }
    }

    #[test]
    fn pnl_is_affine_in_portfolio_size(days in 1u32..12, size in 0.1f64..3.0, lambda in 0.1f64..10.0) {
        let clock = TradingClock::default();
        let config = StrategyConfig { n_days: days, round_trip_size: size, ..StrategyConfig::default() };
        let schedule = cartoon_schedule(&config, &clock).unwrap();
        let params = SimulationParams { kernel: ImpactKernel::new(lambda, 1.0).unwrap(), sample_grid: 50, ..SimulationParams::default() };
        let sim = simulate(&schedule, &params).unwrap();
        let t_eval = f64::from(days) + 0.66;
        let unit = Portfolio::single(CARTOON_ASSET, 1.0, 100.0).unwrap();
        let g = mark_to_market(&unit, &sim, t_eval).unwrap();
        let cost = round_trip_cost(&schedule, &sim).unwrap();
        for k in [0.5, 3.0, 1e3, 1e6, 1e9] {
            let r = net_pnl(&unit.scaled(k).unwrap(), &schedule, &sim, t_eval).unwrap();
            prop_assert!((r.mark_to_market_gain - k * g).abs() <= 1e-12 * (k * g).abs());
            prop_assert_eq!(r.round_trip_cost.to_bits(), cost.to_bits());
            let affine = k * g - cost;
            prop_assert!((r.net - affine).abs() <= 1e-9 * affine.abs().max(cost));
        }
    }

    #[test]
    fn decomposition_identities(bars in bars_strategy(120)) {
        let s = decompose_returns(&bars, &DateWindow::default(), PriceMode::Unadjusted).unwrap();
        prop_assert_eq!(s.len(), bars.len() - 1);
        for i in 0..s.len() {
            let ratio = bars[i + 1].close / bars[i].close;
            let prod = (1.0 + s.overnight[i]) * (1.0 + s.intraday[i]);
            prop_assert!(((prod - ratio) / ratio).abs() <= 1e-12);
            prop_assert!(s.cumulative_overnight[i] >= -1.0 && s.cumulative_intraday[i] >= -1.0);
        }
        let total = bars.last().unwrap().close / bars[0].close;
        let tele = (1.0 + s.cumulative_overnight.last().unwrap()) * (1.0 + s.cumulative_intraday.last().unwrap());
        prop_assert!(((tele - total) / total).abs() <= 1e-10);
        prop_assert!(s.dates.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn shrinking_the_window_keeps_surviving_returns(bars in bars_strategy(80), cut_lo in 0usize..20, cut_hi in 0usize..20) {
        prop_assume!(cut_lo + cut_hi + 2 <= bars.len());
        let full = decompose_returns(&bars, &DateWindow::default(), PriceMode::Unadjusted).unwrap();
        let window = DateWindow { start: Some(bars[cut_lo].date), end: Some(bars[bars.len() - 1 - cut_hi].date) };
        let part = decompose_returns(&bars, &window, PriceMode::Unadjusted).unwrap();
        for (i, d) in part.dates.iter().enumerate() {
            let j = full.dates.iter().position(|x| x == d).unwrap();
            prop_assert_eq!(part.overnight[i].to_bits(), full.overnight[j].to_bits());
            prop_assert_eq!(part.intraday[i].to_bits(), full.intraday[j].to_bits());
        }
    }

    #[test]
    fn canonical_csv_parses_back(bars in bars_strategy(40)) {
        let mut buf = Vec::new();
        write_ohlc_csv(&bars, &mut buf).unwrap();
        let parsed = parse_ohlc_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(parsed.skip_count(), 0);
        prop_assert_eq!(parsed.bars, bars);
    }
}

#[test]
fn parse_tolerates_missing_optional_fields() {
    let bars = vec![OhlcBar {
        date: NaiveDate::from_ymd_opt(2000, 5, 1).unwrap(),
        open: 10.0,
        high: None,
        low: None,
        close: 11.0,
        adjusted_close: None,
        volume: None,
    }];
    let mut buf = Vec::new();
    write_ohlc_csv(&bars, &mut buf).unwrap();
    assert_eq!(parse_ohlc_csv(buf.as_slice()).unwrap().bars, bars);
}
