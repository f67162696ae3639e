//! Static SVG line charts of metric curves.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::persist::CONFIG_FILE;
use crate::metrics::METRIC_COLUMNS;

/// One labeled curve with an optional shaded interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// `(x, lo, hi)` triples.
    pub band: Option<Vec<(f64, f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct ChartOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub width: f64,
    pub height: f64,
}

impl ChartOptions {
    pub fn new(metric: &str) -> Self {
        ChartOptions {
            title: metric.to_string(),
            x_label: "step".into(),
            y_label: metric.into(),
            log_x: false,
            log_y: false,
            width: 720.0,
            height: 440.0,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("nothing to plot"));
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        }
        Ok(Axis { lo, hi, log })
    }

    fn usable(&self, v: f64) -> bool {
        v.is_finite() && (!self.log || v > 0.0)
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            return (a..=b)
                .map(|e| 10f64.powi(e))
                .filter(|&v| (self.lo..=self.hi).contains(&v.log10()))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step - 1e-9).ceil() as i64;
        let last = (self.hi / step + 1e-9).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders the series as a standalone SVG document.
pub fn render_svg(series: &[Series], opts: &ChartOptions) -> Result<String> {
    if series.is_empty() {
        return Err(Error::invalid("no series to plot"));
    }
    let probe_x = Axis {
        lo: 0.0,
        hi: 1.0,
        log: opts.log_x,
    };
    let probe_y = Axis {
        lo: 0.0,
        hi: 1.0,
        log: opts.log_y,
    };
    let xs = series.iter().flat_map(|s| {
        s.points
            .iter()
            .map(|p| p.0)
            .chain(s.band.iter().flatten().map(|b| b.0))
    });
    let x_axis = Axis::fit(xs.filter(|&x| probe_x.usable(x)), opts.log_x)?;
    let ys = series.iter().flat_map(|s| {
        s.points
            .iter()
            .map(|p| p.1)
            .chain(s.band.iter().flatten().flat_map(|b| [b.1, b.2]))
    });
    let y_axis = Axis::fit(ys.filter(|&y| probe_y.usable(y)), opts.log_y)?;

    let (w, h) = (opts.width, opts.height);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 55.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: f64| left + x_axis.unit(x) * pw;
    let py = |y: f64| top + (1.0 - y_axis.unit(y)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(&opts.title)
    );

    // grid and ticks
    for t in x_axis.ticks() {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##,
            top + ph
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            top + ph + 18.0,
            tick_label(t)
        );
    }
    for t in y_axis.ticks() {
        let y = py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##,
            left + pw
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        escape(&opts.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(&opts.y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<g class="series" data-label="{}">"#,
            escape(&s.label)
        );
        if let Some(band) = &s.band {
            let kept: Vec<_> = band
                .iter()
                .filter(|b| x_axis.usable(b.0) && y_axis.usable(b.1) && y_axis.usable(b.2))
                .collect();
            if !kept.is_empty() {
                let mut pts: Vec<String> = kept
                    .iter()
                    .map(|b| format!("{:.2},{:.2}", px(b.0), py(b.2)))
                    .collect();
                pts.extend(
                    kept.iter()
                        .rev()
                        .map(|b| format!("{:.2},{:.2}", px(b.0), py(b.1))),
                );
                let _ = writeln!(
                    svg,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                    pts.join(" ")
                );
            }
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| x_axis.usable(p.0) && y_axis.usable(p.1))
            .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 20.0 * i as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        );
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads the curves for `metric` from a `metrics.csv` or `summary.csv` file.
///
/// Summary files give one series per sampler with its interval band. A
/// metrics file gives a single series, labeled from the run's config when one
/// sits next to it.
pub fn load_series(path: &Path, metric: &str) -> Result<Vec<Series>> {
    if !METRIC_COLUMNS.contains(&metric) {
        return Err(Error::invalid(format!(
            "unknown metric {metric:?}; expected one of {}",
            METRIC_COLUMNS.join(", ")
        )));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let step = col("step").ok_or_else(|| Error::parse(path, 1, "no `step` column"))?;
    let value = col(metric)
        .ok_or_else(|| Error::invalid(format!("{} has no column {metric:?}", path.display())))?;
    let bands = match (
        col("sampler"),
        col(&format!("{metric}_lo")),
        col(&format!("{metric}_hi")),
    ) {
        (Some(s), Some(lo), Some(hi)) => Some((s, lo, hi)),
        _ => None,
    };

    let mut groups: BTreeMap<usize, Series> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let num = |k: usize| -> Result<Option<f64>> {
            let f = rec.get(k).unwrap_or("");
            if f.is_empty() {
                return Ok(None);
            }
            f.parse()
                .map(Some)
                .map_err(|_| Error::parse(path, line, format!("bad {} {f:?}", header[k])))
        };
        let Some(y) = num(value)? else { continue };
        let x = num(step)?.ok_or_else(|| Error::parse(path, line, "empty step"))?;
        let label = match bands {
            Some((s, _, _)) => rec.get(s).unwrap_or("").to_string(),
            None => String::new(),
        };
        let idx = match order.iter().position(|l| *l == label) {
            Some(k) => k,
            None => {
                order.push(label.clone());
                order.len() - 1
            }
        };
        let s = groups.entry(idx).or_insert_with(|| Series {
            label,
            points: Vec::new(),
            band: bands.map(|_| Vec::new()),
        });
        s.points.push((x, y));
        if let (Some((_, lo, hi)), Some(band)) = (bands, s.band.as_mut()) {
            if let (Some(l), Some(u)) = (num(lo)?, num(hi)?) {
                band.push((x, l, u));
            }
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid(format!(
            "{} has no values for {metric}",
            path.display()
        )));
    }
    let mut series: Vec<Series> = groups.into_values().collect();
    if bands.is_none() {
        series[0].label = run_label(path);
    }
    Ok(series)
}

fn run_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let Some(dir) = path.parent() else {
        return stem;
    };
    let cfg_path = dir.join(CONFIG_FILE);
    match fs::read_to_string(&cfg_path)
        .ok()
        .and_then(|t| ExperimentConfig::from_text(&t, &cfg_path).ok())
    {
        Some(cfg) => format!("{} seed {}", cfg.sampler.as_str(), cfg.seed),
        None => stem,
    }
}
