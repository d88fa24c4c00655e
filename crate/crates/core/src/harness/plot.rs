use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{write_atomic, HarnessError};
use crate::env::{read_trajectory, Phase, TrajectoryRow};

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PHASE_COLORS: [&str; 4] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"];
const SERIES_COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Series {
    label: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

struct Chart {
    title: String,
    x_label: &'static str,
    y_label: &'static str,
    series: Vec<Series>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-9 * (1.0 + lo.abs()) {
        let pad = if lo.abs() > 0.0 { 0.1 * lo.abs() } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = range(pts().map(|p| p.0));
        let (y0, y1) = range(pts().map(|p| p.1));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);

        let xs = nice_step(x1 - x0);
        let mut t = (x0 / xs).ceil() * xs;
        while t <= x1 {
            let x = sx(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##, TOP + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, tick_label(t, xs));
            t += xs;
        }
        let ys = nice_step(y1 - y0);
        let mut t = (y0 / ys).ceil() * ys;
        while t <= y1 {
            let y = sy(t);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(t, ys));
            t += ys;
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, self.x_label);
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            self.y_label
        );

        for (i, series) in self.series.iter().enumerate() {
            let finite: Vec<&(f64, f64)> = series.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            if finite.len() == 1 {
                let (x, y) = *finite[0];
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, sx(x), sy(y), series.color);
            } else if !finite.is_empty() {
                let mut d = String::new();
                for (x, y) in finite {
                    let _ = write!(d, "{:.2},{:.2} ", sx(*x), sy(*y));
                }
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    d.trim_end(),
                    series.color
                );
            }
            let ly = TOP + 14.0 + 18.0 * i as f64;
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="3"/>"#, lx + 20.0, series.color);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.decimals$}")
}

fn by_phase(rows: &[TrajectoryRow], f: impl Fn(&TrajectoryRow) -> (f64, f64)) -> Vec<Series> {
    Phase::ALL
        .iter()
        .filter_map(|p| {
            let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.phase == *p).map(&f).collect();
            (!pts.is_empty()).then(|| Series {
                label: p.name().to_string(),
                color: PHASE_COLORS[p.index()],
                points: pts,
            })
        })
        .collect()
}

/// Writes the four charts for one trajectory and returns their paths.
pub fn plot_rows(name: &str, rows: &[TrajectoryRow], out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Run(format!("trajectory {name} has no rows to plot")));
    }
    let charts = [
        (
            "xz",
            Chart {
                title: format!("{name}: side view"),
                x_label: "x downwind (m)",
                y_label: "z altitude (m)",
                series: by_phase(rows, |r| (r.x, r.z)),
            },
        ),
        (
            "xy",
            Chart {
                title: format!("{name}: ground track"),
                x_label: "x downwind (m)",
                y_label: "y crosswind (m)",
                series: by_phase(rows, |r| (r.x, r.y)),
            },
        ),
        (
            "controls",
            Chart {
                title: format!("{name}: controls"),
                x_label: "t (s)",
                y_label: "angle (deg)",
                series: vec![
                    Series {
                        label: "attack".into(),
                        color: SERIES_COLORS[0],
                        points: rows.iter().map(|r| (r.t, r.alpha_deg)).collect(),
                    },
                    Series {
                        label: "bank".into(),
                        color: SERIES_COLORS[1],
                        points: rows.iter().map(|r| (r.t, r.psi_deg)).collect(),
                    },
                    Series {
                        label: "rel. wind elev.".into(),
                        color: SERIES_COLORS[2],
                        points: rows.iter().map(|r| (r.t, r.beta_rad.to_degrees())).collect(),
                    },
                ],
            },
        ),
        (
            "power",
            Chart {
                title: format!("{name}: power"),
                x_label: "t (s)",
                y_label: "power (kW)",
                series: by_phase(rows, |r| (r.t, r.power_kw)),
            },
        ),
    ];
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (suffix, chart) in charts {
        let path = out.join(format!("{name}-{suffix}.svg"));
        write_atomic(&path, chart.render().as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Plots each trajectory file into `out`.
pub fn plot(paths: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if paths.is_empty() {
        return Err(HarnessError::Config("no trajectory files given".into()));
    }
    let mut used = HashSet::new();
    let mut written = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let rows = read_trajectory(p).map_err(HarnessError::Run)?;
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory").to_string();
        let name = if used.insert(stem.clone()) { stem } else { format!("{stem}-{i}") };
        written.extend(plot_rows(&name, &rows, out)?);
    }
    Ok(written)
}
