//! Artifact writers. Every file carries the tool version and config hash.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::ExperimentReport;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub version: String,
    pub config_hash: String,
}

impl Stamp {
    fn csv_line(&self) -> String {
        format!(
            "# {} {} config_sha256={}\n",
            env!("CARGO_PKG_NAME"),
            self.version,
            self.config_hash
        )
    }
}

/// 17 significant digits, `.` decimal.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parameter(format!("cannot write {}: {e}", path.display()))
}

pub struct Sink {
    pub dir: PathBuf,
    pub stamp: Stamp,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: PathBuf, stamp: Stamp) -> Result<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Self {
            dir,
            stamp,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// A metadata comment line, then RFC 4180 records.
    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(header).map_err(|e| io(&path, e))?;
        for r in rows {
            w.write_record(&r).map_err(|e| io(&path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io(&path, e))?;
        let mut body = self.stamp.csv_line();
        body.push_str(&String::from_utf8(bytes).map_err(|e| io(&path, e))?);
        self.put(name, &body)
    }

    pub fn series_csv(&mut self, name: &str, series: &TimeSeries) -> Result<()> {
        let mut header = vec!["t"];
        header.extend(series.names());
        let rows = series.times.iter().enumerate().map(|(i, &t)| {
            let mut r = vec![fmt17(t)];
            r.extend(series.columns.iter().map(|(_, v)| fmt17(v[i])));
            r
        });
        self.csv(name, &header, rows.collect::<Vec<_>>())
    }

    pub fn json(&mut self, name: &str, report: &ExperimentReport) -> Result<()> {
        let mut body = report.to_json()?;
        body.push('\n');
        self.put(name, &body)
    }

    pub fn svg(&mut self, name: &str, plot: &LogLogPlot) -> Result<()> {
        let body = plot.render(&self.stamp);
        self.put(name, &body)
    }
}

/// A log-log line plot, rendered without external tooling.
pub struct LogLogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
}

const PALETTE: [&str; 4] = ["#1f5fa8", "#c0392b", "#2e8b57", "#8e44ad"];

impl LogLogPlot {
    pub fn render(&self, stamp: &Stamp) -> String {
        let (w, h, m) = (640.0, 420.0, 60.0);
        let pts: Vec<(f64, f64)> = self
            .curves
            .iter()
            .flat_map(|c| c.1.iter().copied())
            .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
            .map(|(x, y)| (x.log10(), y.log10()))
            .collect();
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(
            svg,
            "<!-- {} {} config_sha256={} -->",
            env!("CARGO_PKG_NAME"),
            stamp.version,
            stamp.config_hash
        );
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        );
        if pts.is_empty() {
            svg.push_str("</svg>\n");
            return svg;
        }
        let span = |f: fn(&(f64, f64)) -> f64| {
            let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min).floor();
            let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
            (lo, if hi > lo { hi } else { lo + 1.0 })
        };
        let (x0, x1) = span(|p| p.0);
        let (y0, y1) = span(|p| p.1);
        let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
        let _ = writeln!(
            svg,
            r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * m,
            h - 2.0 * m
        );
        for d in x0 as i32..=x1 as i32 {
            let x = px(d as f64);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.1}" y1="{m}" x2="{x:.1}" y2="{}" stroke="#ddd"/>"##,
                h - m
            );
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{}" font-size="11" text-anchor="middle">1e{d}</text>"#,
                h - m + 16.0
            );
        }
        for d in y0 as i32..=y1 as i32 {
            let y = py(d as f64);
            let _ = writeln!(
                svg,
                r##"<line x1="{m}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##,
                w - m
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">1e{d}</text>"#,
                m - 4.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
            w / 2.0,
            h - 14.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(&self.y_label)
        );
        for (i, (label, data)) in self.curves.iter().enumerate() {
            let colour = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = data
                .iter()
                .filter(|&&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.1},{:.1}", px(x.log10()), py(y.log10())))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
            let ly = m + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{ly}" font-size="12" fill="{colour}">{}</text>"#,
                m + 10.0,
                escape(label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
