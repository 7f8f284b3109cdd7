//! Minimal SVG line charts: polylines, axes and endpoint labels. Output is a pure
//! function of the input, with no timestamps or random ids.

use std::fmt::Write as _;

use crate::ohlc::ReturnSeries;
use crate::simulator::PricePath;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series<'a>>,
    /// Horizontal reference line, drawn dashed.
    pub baseline: Option<f64>,
    pub y_label_percent: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Chart<'_> {
    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        let span = if hi > lo { hi - lo } else { 1.0 };
        MARGIN + (x - lo) / span * (WIDTH - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        let span = if hi > lo { hi - lo } else { 1.0 };
        HEIGHT - MARGIN - (y - lo) / span * (HEIGHT - 2.0 * MARGIN)
    }

    fn fmt_y(&self, y: f64) -> String {
        if self.y_label_percent {
            format!("{:.2}%", 100.0 * y)
        } else {
            format!("{y:.4}")
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            MARGIN / 2.0,
            escape(self.title)
        );
        let (x0, x1) = (self.sx(self.x_range.0), self.sx(self.x_range.1));
        let (y0, y1) = (self.sy(self.y_range.0), self.sy(self.y_range.1));
        let _ = writeln!(
            out,
            r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" stroke="black" fill="none"/>"#
        );
        for (y, anchor_y) in [(self.y_range.0, y0), (self.y_range.1, y1)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                anchor_y + 3.0,
                self.fmt_y(y)
            );
        }
        if let Some(b) = self.baseline {
            let yb = self.sy(b);
            let _ = writeln!(
                out,
                r#"<line x1="{x0:.2}" y1="{yb:.2}" x2="{x1:.2}" y2="{yb:.2}" stroke="gray" stroke-dasharray="4,3"/>"#
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
                x0 - 4.0,
                yb + 3.0,
                self.fmt_y(b)
            );
        }
        for s in &self.series {
            let mut pts = String::new();
            for &(x, y) in &s.points {
                let _ = write!(pts, "{:.2},{:.2} ", self.sx(x), self.sy(y));
            }
            let _ = writeln!(
                out,
                r#"<polyline points="{}" stroke="{}" stroke-width="1.2" fill="none"><title>{}</title></polyline>"#,
                pts.trim_end(),
                s.color,
                escape(s.label)
            );
            if let Some(&(x, y)) = s.points.last() {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" fill="{}">{}</text>"#,
                    self.sx(x) + 4.0,
                    self.sy(y) + 3.0,
                    s.color,
                    self.fmt_y(y)
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Displacement of a simulated path, in percent.
pub fn price_path_chart(path: &PricePath, title: &str) -> String {
    let points: Vec<(f64, f64)> = path
        .samples()
        .iter()
        .map(|s| (s.time, s.price / path.base_price() - 1.0))
        .collect();
    let (lo, hi) = points
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    let pad = 0.05 * (hi - lo).max(1e-6);
    Chart {
        title,
        x_range: (path.start(), path.end()),
        y_range: (lo - pad, hi + pad),
        series: vec![Series {
            label: path.asset(),
            color: "black",
            points,
        }],
        baseline: Some(0.0),
        y_label_percent: true,
    }
    .render()
}

/// Cumulative overnight (blue) and intraday (green) returns against day number,
/// scaled from -100% to the largest cumulative overnight return.
pub fn return_curves_chart(series: &ReturnSeries, title: &str) -> String {
    let origin = series.start_date.or(series.dates.first().copied());
    let day = |i: usize| -> f64 {
        match origin {
            Some(o) => (series.dates[i] - o).num_days() as f64,
            None => i as f64,
        }
    };
    let with_origin = |values: &[f64]| -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(values.len() + 1);
        if series.start_date.is_some() {
            pts.push((0.0, 0.0));
        }
        pts.extend(values.iter().enumerate().map(|(i, &v)| (day(i), v)));
        pts
    };
    let top = series
        .cumulative_overnight
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    let top = if top > 0.0 { top } else { 0.01 };
    let x_end = if series.is_empty() {
        1.0
    } else {
        day(series.len() - 1)
    };
    Chart {
        title,
        x_range: (0.0, x_end),
        y_range: (-1.0, top),
        series: vec![
            Series {
                label: "overnight",
                color: "blue",
                points: with_origin(&series.cumulative_overnight),
            },
            Series {
                label: "intraday",
                color: "green",
                points: with_origin(&series.cumulative_intraday),
            },
        ],
        baseline: Some(0.0),
        y_label_percent: true,
    }
    .render()
}
