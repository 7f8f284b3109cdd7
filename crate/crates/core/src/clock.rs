//! Trading-day geometry and the intraday impact-coefficient profile.
//!
//! Time is measured in trading days: day `d` opens at `t = d` and closes at
//! `t = d + close_fraction`. Between close and the next open the market is shut,
//! but impact keeps decaying.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when deciding whether a time lies inside a session.
pub const SESSION_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradingClock {
    close_fraction: f64,
}

impl Default for TradingClock {
    fn default() -> Self {
        Self {
            close_fraction: 0.66,
        }
    }
}

impl TradingClock {
    pub fn new(close_fraction: f64) -> Result<Self> {
        if !(close_fraction > 0.0 && close_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "close_fraction must lie in (0, 1), got {close_fraction}"
            )));
        }
        Ok(Self { close_fraction })
    }

    pub fn close_fraction(&self) -> f64 {
        self.close_fraction
    }

    pub fn open_time(&self, day: u32) -> f64 {
        f64::from(day)
    }

    pub fn close_time(&self, day: u32) -> f64 {
        f64::from(day) + self.close_fraction
    }

    /// Day whose session contains `t`, if any.
    pub fn session_day(&self, t: f64) -> Option<u32> {
        if !(t.is_finite() && t >= -SESSION_EPSILON) {
            return None;
        }
        let day = t.floor();
        let mut into = t - day;
        // t just below an integer open
        let (day, into) = if 1.0 - into <= SESSION_EPSILON {
            into -= 1.0;
            (day + 1.0, into)
        } else {
            (day, into)
        };
        if into <= self.close_fraction + SESSION_EPSILON && day <= f64::from(u32::MAX) {
            Some(day.max(0.0) as u32)
        } else {
            None
        }
    }

    /// Position of `t` within its session, 0 at open and 1 at close.
    pub fn session_progress(&self, t: f64) -> Result<f64> {
        let day = self.session_day(t).ok_or(Error::OutOfSession(t))?;
        Ok(((t - f64::from(day)) / self.close_fraction).clamp(0.0, 1.0))
    }
}

/// Open and close times of `day`.
pub fn session_times(clock: &TradingClock, day: i64) -> Result<(f64, f64)> {
    let day = u32::try_from(day)
        .map_err(|_| Error::Precondition(format!("day must be a non-negative u32, got {day}")))?;
    Ok((clock.open_time(day), clock.close_time(day)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Linear in time of day.
    #[default]
    Linear,
    /// Linear in the logarithm of the coefficient.
    Geometric,
}

/// Fractional impact per unit of normalized order size over the trading session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidityProfile {
    open_coefficient: f64,
    close_coefficient: f64,
    interpolation: Interpolation,
}

impl Default for LiquidityProfile {
    fn default() -> Self {
        Self {
            open_coefficient: 0.0015,
            close_coefficient: 0.0005,
            interpolation: Interpolation::Linear,
        }
    }
}

impl LiquidityProfile {
    pub fn new(
        open_coefficient: f64,
        close_coefficient: f64,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if !(close_coefficient > 0.0 && open_coefficient > close_coefficient) {
            return Err(Error::InvalidParameter(format!(
                "need open_coefficient > close_coefficient > 0, got open={open_coefficient} close={close_coefficient}"
            )));
        }
        if !open_coefficient.is_finite() {
            return Err(Error::InvalidParameter(
                "open_coefficient must be finite".into(),
            ));
        }
        Ok(Self {
            open_coefficient,
            close_coefficient,
            interpolation,
        })
    }

    pub fn open_coefficient(&self) -> f64 {
        self.open_coefficient
    }

    pub fn close_coefficient(&self) -> f64 {
        self.close_coefficient
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }
}

pub fn impact_coefficient(profile: &LiquidityProfile, clock: &TradingClock, t: f64) -> Result<f64> {
    let x = clock.session_progress(t)?;
    let (open, close) = (profile.open_coefficient, profile.close_coefficient);
    let c = match profile.interpolation {
        Interpolation::Linear => open + (close - open) * x,
        Interpolation::Geometric => open * (close / open).powf(x),
    };
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_times_match_cartoon() {
        let clock = TradingClock::default();
        assert_eq!(session_times(&clock, 0).unwrap(), (0.0, 0.66));
        let (open, close) = session_times(&clock, 1).unwrap();
        assert_eq!(open, 1.0);
        assert!((close - 1.66).abs() < 1e-12);
        let half = TradingClock::new(0.5).unwrap();
        assert_eq!(session_times(&half, 10).unwrap(), (10.0, 10.5));
        assert!(matches!(
            session_times(&clock, -1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn clock_validation() {
        assert!(TradingClock::new(0.0).is_err());
        assert!(TradingClock::new(1.0).is_err());
        assert!(TradingClock::new(0.3).is_ok());
    }

    #[test]
    fn coefficient_endpoints_and_midpoint() {
        let clock = TradingClock::default();
        let p = LiquidityProfile::default();
        assert_eq!(impact_coefficient(&p, &clock, 1.0).unwrap(), 0.0015);
        assert!((impact_coefficient(&p, &clock, 0.66).unwrap() - 0.0005).abs() < 1e-15);
        assert!((impact_coefficient(&p, &clock, 1.66).unwrap() - 0.0005).abs() < 1e-15);
        assert!((impact_coefficient(&p, &clock, 0.33).unwrap() - 0.0010).abs() < 1e-15);
        assert!((impact_coefficient(&p, &clock, 1.33).unwrap() - 0.0010).abs() < 1e-15);
    }

    #[test]
    fn overnight_is_out_of_session() {
        let clock = TradingClock::default();
        let p = LiquidityProfile::default();
        for t in [0.83, 0.7, 1.99, 5.7] {
            assert!(matches!(
                impact_coefficient(&p, &clock, t),
                Err(Error::OutOfSession(_))
            ));
        }
    }

    #[test]
    fn open_close_ratio_is_three() {
        let clock = TradingClock::default();
        let p = LiquidityProfile::default();
        let open = impact_coefficient(&p, &clock, 3.0).unwrap();
        let close = impact_coefficient(&p, &clock, 3.66).unwrap();
        assert!((open / close - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coefficient_non_increasing_within_session() {
        let clock = TradingClock::default();
        for interp in [Interpolation::Linear, Interpolation::Geometric] {
            let p = LiquidityProfile::new(0.0015, 0.0005, interp).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=660 {
                let t = 2.0 + f64::from(k) / 1000.0;
                let c = impact_coefficient(&p, &clock, t).unwrap();
                assert!(c > 0.0 && c <= prev);
                prev = c;
            }
        }
    }

    #[test]
    fn profile_requires_thin_open() {
        assert!(LiquidityProfile::new(0.0005, 0.0015, Interpolation::Linear).is_err());
        assert!(LiquidityProfile::new(0.001, 0.0, Interpolation::Linear).is_err());
    }

    #[test]
    fn sessions_are_disjoint_and_ordered() {
        let clock = TradingClock::default();
        for d in 0..50 {
            let (_, close) = session_times(&clock, d).unwrap();
            let (next_open, _) = session_times(&clock, d + 1).unwrap();
            assert!(close < next_open);
        }
    }
}
