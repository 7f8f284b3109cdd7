//! Daily OHLC ingestion and overnight/intraday return decomposition.
//!
//! For consecutive bars `i - 1`, `i`:
//!
//! ```text
//! overnight[i] = open[i] / close[i-1] - 1
//! intraday[i]  = close[i] / open[i]   - 1
//! ```
//!
//! so `(1 + overnight[i]) * (1 + intraday[i]) = close[i] / close[i-1]`. Weekends and
//! holidays fold into a single overnight period.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";
const OHLC_HEADER: [&str; 7] = [
    "date",
    "open",
    "high",
    "low",
    "close",
    "adj close",
    "volume",
];

/// Outer bounds applied to every index window.
pub fn global_window() -> DateWindow {
    DateWindow {
        start: NaiveDate::from_ymd_opt(1990, 1, 1),
        end: NaiveDate::from_ymd_opt(2019, 10, 31),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: Option<f64>,
    pub low: Option<f64>,
    pub close: f64,
    pub adjusted_close: Option<f64>,
    pub volume: Option<u64>,
}

impl OhlcBar {
    fn check(&self) -> std::result::Result<(), String> {
        if !(self.open.is_finite() && self.open > 0.0) {
            return Err(format!("non-positive open {}", self.open));
        }
        if !(self.close.is_finite() && self.close > 0.0) {
            return Err(format!("non-positive close {}", self.close));
        }
        if let Some(low) = self.low {
            if low > self.open.min(self.close) {
                return Err(format!("low {low} above min(open, close)"));
            }
        }
        if let Some(high) = self.high {
            if high < self.open.max(self.close) {
                return Err(format!("high {high} below max(open, close)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedBars {
    pub bars: Vec<OhlcBar>,
    pub skipped: Vec<SkippedRow>,
}

impl ParsedBars {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

fn parse_optional(field: &str) -> std::result::Result<Option<f64>, String> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("null") || f.eq_ignore_ascii_case("n/a") || f == "." {
        return Ok(None);
    }
    f.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("unparseable number {f:?}"))
}

/// Parses Yahoo-Finance style CSV text. Rows with a missing or non-positive
/// open/close, inconsistent high/low, or a repeated date are dropped and reported.
pub fn parse_ohlc_csv<R: Read>(reader: R) -> Result<ParsedBars> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = [usize::MAX; 7];
    for (slot, name) in columns.iter_mut().zip(OHLC_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                Error::Format(format!(
                    "missing column {name:?}; header must contain Date,Open,High,Low,Close,Adj Close,Volume"
                ))
            })?;
    }
    let [c_date, c_open, c_high, c_low, c_close, c_adj, c_vol] = columns;

    let mut by_date: BTreeMap<NaiveDate, OhlcBar> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i as u64 + 2, |p| p.line());
        let get = |c: usize| rec.get(c).unwrap_or("");
        let date = NaiveDate::parse_from_str(get(c_date), DATE_FORMAT).map_err(|e| Error::Row {
            line,
            message: format!("unparseable date {:?}: {e}", get(c_date)),
        })?;
        let mut skip = |reason: String| skipped.push(SkippedRow { line, reason });

        let fields = (|| -> std::result::Result<OhlcBar, String> {
            let open = parse_optional(get(c_open))?.ok_or("missing open")?;
            let close = parse_optional(get(c_close))?.ok_or("missing close")?;
            let volume = parse_optional(get(c_vol))?
                .filter(|v| *v >= 0.0)
                .map(|v| v.round() as u64);
            Ok(OhlcBar {
                date,
                open,
                high: parse_optional(get(c_high))?,
                low: parse_optional(get(c_low))?,
                close,
                adjusted_close: parse_optional(get(c_adj))?.filter(|a| *a > 0.0),
                volume,
            })
        })();
        let bar = match fields.and_then(|b| b.check().map(|_| b)) {
            Ok(bar) => bar,
            Err(reason) => {
                skip(reason);
                continue;
            }
        };
        if by_date.contains_key(&date) {
            skip(format!("duplicate date {date}"));
            continue;
        }
        by_date.insert(date, bar);
    }
    Ok(ParsedBars {
        bars: by_date.into_values().collect(),
        skipped,
    })
}

/// Canonical writer; its output parses back to the same bars.
pub fn write_ohlc_csv<W: Write>(bars: &[OhlcBar], writer: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(|| "null".to_string(), |x| x.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "Date",
        "Open",
        "High",
        "Low",
        "Close",
        "Adj Close",
        "Volume",
    ])?;
    for b in bars {
        w.write_record([
            b.date.format(DATE_FORMAT).to_string(),
            b.open.to_string(),
            opt(b.high),
            opt(b.low),
            b.close.to_string(),
            opt(b.adjusted_close),
            b.volume
                .map_or_else(|| "null".to_string(), |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Inclusive date bounds; `None` leaves that side open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl DateWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start.is_none_or(|s| date >= s) && self.end.is_none_or(|e| date <= e)
    }

    pub fn intersect(&self, other: &DateWindow) -> DateWindow {
        let start = match (self.start, other.start) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let end = match (self.end, other.end) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        DateWindow { start, end }
    }
}

/// One entry of an index spec file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    pub name: String,
    pub csv_path: PathBuf,
    #[serde(default)]
    pub start: Option<NaiveDate>,
    #[serde(default)]
    pub end: Option<NaiveDate>,
}

impl IndexSpec {
    pub fn window(&self) -> DateWindow {
        DateWindow {
            start: self.start,
            end: self.end,
        }
    }

    pub fn read_list<R: Read>(reader: R) -> Result<Vec<IndexSpec>> {
        Ok(serde_json::from_reader(reader)?)
    }
}

/// Keeps bars inside the spec's own bounds intersected with [`global_window`].
pub fn apply_index_window(bars: &[OhlcBar], spec: Option<&IndexSpec>) -> Vec<OhlcBar> {
    let window = spec.map_or_else(global_window, |s| s.window().intersect(&global_window()));
    bars.iter()
        .filter(|b| window.contains(b.date))
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceMode {
    #[default]
    Unadjusted,
    /// Scales each bar's open by `adjusted_close / close` and uses the adjusted
    /// close. Approximate: assumes the adjustment factor is constant over the day.
    Adjusted,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReturnSeries {
    /// Date of the later bar of each pair.
    pub dates: Vec<NaiveDate>,
    pub overnight: Vec<f64>,
    pub intraday: Vec<f64>,
    pub cumulative_overnight: Vec<f64>,
    pub cumulative_intraday: Vec<f64>,
    /// Date of the first bar, where both cumulations are 0.
    pub start_date: Option<NaiveDate>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "r_on", "r_id", "cum_on", "cum_id"])?;
        for i in 0..self.len() {
            w.write_record([
                self.dates[i].format(DATE_FORMAT).to_string(),
                self.overnight[i].to_string(),
                self.intraday[i].to_string(),
                self.cumulative_overnight[i].to_string(),
                self.cumulative_intraday[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the output of [`ReturnSeries::write_csv`]. `start_date` is not stored
    /// in the CSV and comes back as `None`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        if r.headers()?.iter().collect::<Vec<_>>() != ["date", "r_on", "r_id", "cum_on", "cum_id"] {
            return Err(Error::Format(
                "return header must be date,r_on,r_id,cum_on,cum_id".into(),
            ));
        }
        let mut s = ReturnSeries::default();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let num = |k: usize| -> Result<f64> {
                rec[k].parse().map_err(|e| Error::Row {
                    line,
                    message: format!("{e}"),
                })
            };
            s.dates.push(
                NaiveDate::parse_from_str(&rec[0], DATE_FORMAT).map_err(|e| Error::Row {
                    line,
                    message: format!("{e}"),
                })?,
            );
            s.overnight.push(num(1)?);
            s.intraday.push(num(2)?);
            s.cumulative_overnight.push(num(3)?);
            s.cumulative_intraday.push(num(4)?);
        }
        Ok(s)
    }
}

fn adjusted(bar: &OhlcBar, mode: PriceMode) -> (f64, f64) {
    match (mode, bar.adjusted_close) {
        (PriceMode::Adjusted, Some(adj)) => (bar.open * adj / bar.close, adj),
        _ => (bar.open, bar.close),
    }
}

/// Decomposes close-to-close returns of the bars inside `window` into overnight and
/// intraday parts. Bars must be date-sorted, as produced by [`parse_ohlc_csv`].
pub fn decompose_returns(
    bars: &[OhlcBar],
    window: &DateWindow,
    mode: PriceMode,
) -> Result<ReturnSeries> {
    let in_range: Vec<&OhlcBar> = bars.iter().filter(|b| window.contains(b.date)).collect();
    if in_range.len() < 2 {
        return Err(Error::InsufficientData(in_range.len()));
    }
    if let Some(w) = in_range.windows(2).find(|w| w[0].date >= w[1].date) {
        return Err(Error::Precondition(format!(
            "bars not strictly date-sorted at {}",
            w[1].date
        )));
    }
    let n = in_range.len() - 1;
    let mut s = ReturnSeries {
        dates: Vec::with_capacity(n),
        overnight: Vec::with_capacity(n),
        intraday: Vec::with_capacity(n),
        cumulative_overnight: Vec::with_capacity(n),
        cumulative_intraday: Vec::with_capacity(n),
        start_date: Some(in_range[0].date),
    };
    let (mut gross_on, mut gross_id) = (1.0, 1.0);
    for pair in in_range.windows(2) {
        let (_, prev_close) = adjusted(pair[0], mode);
        let (open, close) = adjusted(pair[1], mode);
        let r_on = open / prev_close - 1.0;
        let r_id = close / open - 1.0;
        gross_on *= 1.0 + r_on;
        gross_id *= 1.0 + r_id;
        s.dates.push(pair[1].date);
        s.overnight.push(r_on);
        s.intraday.push(r_id);
        s.cumulative_overnight.push(gross_on - 1.0);
        s.cumulative_intraday.push(gross_id - 1.0);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointSummary {
    pub final_overnight: f64,
    pub final_intraday: f64,
    pub final_date: NaiveDate,
}

pub fn endpoint_summary(series: &ReturnSeries) -> Result<EndpointSummary> {
    match (
        series.dates.last(),
        series.cumulative_overnight.last(),
        series.cumulative_intraday.last(),
    ) {
        (Some(&final_date), Some(&final_overnight), Some(&final_intraday)) => Ok(EndpointSummary {
            final_overnight,
            final_intraday,
            final_date,
        }),
        _ => Err(Error::EmptySeries),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn bar(date: NaiveDate, open: f64, close: f64) -> OhlcBar {
        OhlcBar {
            date,
            open,
            high: None,
            low: None,
            close,
            adjusted_close: None,
            volume: None,
        }
    }

    const HEADER: &str = "Date,Open,High,Low,Close,Adj Close,Volume\n";

    #[test]
    fn parses_and_sorts_rows() {
        let text = format!(
            "{HEADER}2000-01-04,102,103,100,101,101,500\n2000-01-03,99,100.5,98,100,100,400\n"
        );
        let parsed = parse_ohlc_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.bars.len(), 2);
        assert_eq!(parsed.bars[0].date, d(2000, 1, 3));
        assert_eq!(parsed.bars[1].open, 102.0);
        assert_eq!(parsed.bars[1].volume, Some(500));
        assert_eq!(parsed.skip_count(), 0);
    }

    #[test]
    fn null_open_is_skipped() {
        let text = format!(
            "{HEADER}2000-01-03,null,null,null,null,null,null\n2000-01-04,102,103,100,101,101,500\n"
        );
        let parsed = parse_ohlc_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.bars.len(), 1);
        assert_eq!(parsed.skip_count(), 1);
        assert_eq!(parsed.skipped[0].line, 2);
    }

    #[test]
    fn empty_body_and_header_errors() {
        assert!(parse_ohlc_csv(HEADER.as_bytes()).unwrap().bars.is_empty());
        let lower = "date,open,high,low,close,adj close,volume,extra\n2000-01-03,1,1,1,1,1,1,x\n";
        assert_eq!(parse_ohlc_csv(lower.as_bytes()).unwrap().bars.len(), 1);
        assert!(matches!(
            parse_ohlc_csv("Date,Open,Close\n".as_bytes()),
            Err(Error::Format(_))
        ));
        let bad_date = format!("{HEADER}2000-01-03,1,1,1,1,1,1\n03/01/2000,1,1,1,1,1,1\n");
        assert!(matches!(
            parse_ohlc_csv(bad_date.as_bytes()),
            Err(Error::Row { line: 3, .. })
        ));
    }

    #[test]
    fn inconsistent_rows_are_skipped() {
        let text = format!(
            "{HEADER}2000-01-03,0,1,1,1,1,1\n2000-01-04,10,9,8,9.5,9.5,1\n2000-01-05,10,11,9,10,10,1\n2000-01-05,10,11,9,10,10,1\n"
        );
        let parsed = parse_ohlc_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed.bars.len(), 1);
        assert_eq!(parsed.skip_count(), 3);
    }

    #[test]
    fn two_bar_decomposition() {
        let bars = [
            bar(d(2000, 1, 3), 100.0, 100.0),
            bar(d(2000, 1, 4), 102.0, 101.0),
        ];
        let s = decompose_returns(&bars, &DateWindow::default(), PriceMode::Unadjusted).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.overnight[0] - 0.02).abs() < 1e-15);
        assert!((s.intraday[0] - (101.0 / 102.0 - 1.0)).abs() < 1e-15);
        assert!((s.intraday[0] + 0.009_803_921_568_627_4).abs() < 1e-15);
        let e = endpoint_summary(&s).unwrap();
        assert_eq!(e.final_date, d(2000, 1, 4));
        assert_eq!(e.final_overnight, s.overnight[0]);
        assert_eq!(e.final_intraday, s.intraday[0]);
    }

    #[test]
    fn constant_series_has_zero_returns() {
        let bars: Vec<OhlcBar> = (1..=10).map(|k| bar(d(2001, 2, k), 50.0, 50.0)).collect();
        let s = decompose_returns(&bars, &DateWindow::default(), PriceMode::Unadjusted).unwrap();
        assert!(s.overnight.iter().chain(&s.intraday).all(|r| *r == 0.0));
        let e = endpoint_summary(&s).unwrap();
        assert_eq!((e.final_overnight, e.final_intraday), (0.0, 0.0));
    }

    #[test]
    fn insufficient_and_empty() {
        let one = [bar(d(2000, 1, 3), 1.0, 1.0)];
        assert!(matches!(
            decompose_returns(&one, &DateWindow::default(), PriceMode::Unadjusted),
            Err(Error::InsufficientData(1))
        ));
        assert!(matches!(
            endpoint_summary(&ReturnSeries::default()),
            Err(Error::EmptySeries)
        ));
    }

    #[test]
    fn adjusted_mode_scales_open() {
        let mut b0 = bar(d(2000, 1, 3), 100.0, 100.0);
        b0.adjusted_close = Some(50.0);
        let mut b1 = bar(d(2000, 1, 4), 102.0, 101.0);
        b1.adjusted_close = Some(50.5);
        let s = decompose_returns(&[b0, b1], &DateWindow::default(), PriceMode::Adjusted).unwrap();
        assert!((s.overnight[0] - (51.0 / 50.0 - 1.0)).abs() < 1e-15);
        assert!((s.intraday[0] - (50.5 / 51.0 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn windows() {
        let bars: Vec<OhlcBar> = [
            d(1989, 12, 29),
            d(1990, 1, 2),
            d(1993, 1, 28),
            d(1993, 1, 29),
            d(2001, 1, 1),
            d(2001, 1, 2),
            d(2018, 6, 20),
            d(2018, 6, 21),
            d(2019, 10, 31),
            d(2019, 11, 1),
        ]
        .into_iter()
        .map(|dt| bar(dt, 1.0, 1.0))
        .collect();
        let all = apply_index_window(&bars, None);
        assert_eq!(all.first().unwrap().date, d(1990, 1, 2));
        assert_eq!(all.last().unwrap().date, d(2019, 10, 31));

        let spx = IndexSpec {
            name: "S&P 500".into(),
            csv_path: "spx.csv".into(),
            start: Some(d(1993, 1, 29)),
            end: None,
        };
        let w = apply_index_window(&bars, Some(&spx));
        assert_eq!(w.first().unwrap().date, d(1993, 1, 29));
        assert_eq!(w.last().unwrap().date, d(2019, 10, 31));

        let ftse = IndexSpec {
            name: "FTSE 100".into(),
            csv_path: "ftse.csv".into(),
            start: Some(d(2001, 1, 2)),
            end: Some(d(2018, 6, 20)),
        };
        let w: Vec<NaiveDate> = apply_index_window(&bars, Some(&ftse))
            .iter()
            .map(|b| b.date)
            .collect();
        assert_eq!(w, vec![d(2001, 1, 2), d(2018, 6, 20)]);
    }

    #[test]
    fn index_spec_json() {
        let json = r#"[{"name":"FTSE 100","csv_path":"ftse.csv","start":"2001-01-02","end":"2018-06-20"},
                       {"name":"NASDAQ","csv_path":"ixic.csv"}]"#;
        let specs = IndexSpec::read_list(json.as_bytes()).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].end, Some(d(2018, 6, 20)));
        assert_eq!(specs[1].start, None);
        let unknown = r#"[{"name":"X","csv_path":"x.csv","begin":"2001-01-02"}]"#;
        assert!(IndexSpec::read_list(unknown.as_bytes()).is_err());
    }

    #[test]
    fn series_csv_reads_back() {
        let bars: Vec<OhlcBar> = (1..=5)
            .map(|k| bar(d(2001, 2, k), 10.0 + f64::from(k), 10.5 + f64::from(k)))
            .collect();
        let s = decompose_returns(&bars, &DateWindow::default(), PriceMode::Unadjusted).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ReturnSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(
            back,
            ReturnSeries {
                start_date: None,
                ..s
            }
        );
    }
}
