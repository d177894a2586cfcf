//! Minimal SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimates::BoundConstants;
use crate::harness::{p_label, smallness_series, NuReport, SweepReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    LogLog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
    pub dashed: bool,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            markers: false,
            dashed: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub scale: Scale,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return None;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil().max(lo + 1.0);
        } else if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let pad = hi.abs().max(1.0) * 0.5;
            lo -= pad;
            hi += pad;
        } else {
            let step = nice_step(hi - lo);
            lo = (lo / step).floor() * step;
            hi = (hi / step).ceil() * step;
        }
        Some(Self { lo, hi, log })
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut out = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                out.push(((e - self.lo) / (self.hi - self.lo), format!("1e{}", e as i64)));
                e += step;
            }
            out
        } else {
            let step = nice_step(self.hi - self.lo);
            let count = ((self.hi - self.lo) / step).round() as usize;
            (0..=count)
                .map(|i| {
                    let v = self.lo + i as f64 * step;
                    ((v - self.lo) / (self.hi - self.lo), trim_label(&format!("{}", (v / step).round() * step)))
                })
                .collect()
        }
    }
}

fn trim_label(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) => format!("{v:.1e}"),
        Ok(v) => {
            let t = format!("{v:.6}");
            let t = t.trim_end_matches('0').trim_end_matches('.');
            if t == "-0" { "0".into() } else { t.to_string() }
        }
        Err(_) => s.to_string(),
    }
}

/// A 1-2-5 step giving roughly six intervals over `span`.
fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn usable(plot: &Plot) -> impl Fn(&(f64, f64)) -> bool + '_ {
    move |&(x, y)| x.is_finite() && y.is_finite() && (plot.scale == Scale::Linear || (x > 0.0 && y > 0.0))
}

/// Pixel coordinates of every plotted point, per series.
pub fn project(plot: &Plot) -> Result<Vec<Vec<(f64, f64)>>> {
    let log = plot.scale == Scale::LogLog;
    let keep = usable(plot);
    let pts = || plot.series.iter().flat_map(|s| s.points.iter().filter(|p| keep(p)));
    let (Some(xa), Some(ya)) = (Axis::fit(pts().map(|p| p.0), log), Axis::fit(pts().map(|p| p.1), log)) else {
        return Err(Error::InsufficientData(format!("plot {:?} has no drawable points", plot.title)));
    };
    let (w, h) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    Ok(plot
        .series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|p| keep(p))
                .map(|&(x, y)| (LEFT + w * xa.unit(x), TOP + h * (1.0 - ya.unit(y))))
                .collect()
        })
        .collect())
}

pub fn plot_svg(plot: &Plot) -> Result<String> {
    let log = plot.scale == Scale::LogLog;
    let keep = usable(plot);
    let pts = || plot.series.iter().flat_map(|s| s.points.iter().filter(|p| keep(p)));
    let (Some(xa), Some(ya)) = (Axis::fit(pts().map(|p| p.0), log), Axis::fit(pts().map(|p| p.1), log)) else {
        return Err(Error::InsufficientData(format!("plot {:?} has no drawable points", plot.title)));
    };
    let projected = project(plot)?;
    let (w, h) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + w / 2.0,
        escape(&plot.title)
    );
    for (u, label) in xa.ticks() {
        let x = LEFT + w * u;
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + h);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + h + 16.0);
    }
    for (u, label) in ya.ticks() {
        let y = TOP + h * (1.0 - u);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + w);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{w:.2}" height="{h:.2}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + w / 2.0,
        HEIGHT - 12.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + h / 2.0,
        TOP + h / 2.0,
        escape(&plot.y_label)
    );
    for (i, (series, points)) in plot.series.iter().zip(&projected).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if points.len() > 1 {
            let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                path.join(" ")
            );
        }
        if series.markers || points.len() == 1 {
            for (x, y) in points {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 22.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 28.0, ly + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_plot_svg(plot: &Plot, path: &Path) -> Result<()> {
    std::fs::write(path, plot_svg(plot)?)?;
    Ok(())
}

/// `sup_t ||omega^nu - omega||_{L^p}` against `nu` with the fitted power laws.
pub fn convergence_plot(report: &SweepReport) -> Plot {
    let mut series = Vec::new();
    for (pi, p) in report.metadata.p_list.iter().enumerate() {
        let points: Vec<(f64, f64)> = report
            .runs
            .iter()
            .filter(|r| r.nu > 0.0 && r.abort.is_none())
            .filter_map(|r| r.omega_gaps.get(pi).map(|g| (r.nu, g.sup)))
            .collect();
        let mut s = Series::line(format!("p = {p}"), points.clone());
        s.markers = true;
        series.push(s);
        if let Some(fit) = report.orders.iter().find(|f| &f.p == p) {
            let used: Vec<&(f64, f64)> = points.iter().filter(|q| q.1 > 0.0).collect();
            let n = used.len() as f64;
            let mx = used.iter().map(|q| q.0.ln()).sum::<f64>() / n;
            let my = used.iter().map(|q| q.1.ln()).sum::<f64>() / n;
            let line = used.iter().map(|q| (q.0, (my + fit.order * (q.0.ln() - mx)).exp())).collect();
            let mut f = Series::line(format!("slope {:.3}", fit.order), line);
            f.dashed = true;
            series.push(f);
        }
    }
    Plot {
        title: "vorticity gap against viscosity".into(),
        x_label: "nu".into(),
        y_label: "sup_t ||omega^nu - omega||_p".into(),
        scale: Scale::LogLog,
        series,
    }
}

/// `y(t)` and the windowed smallness envelope for one run.
pub fn smallness_plot(run: &NuReport, constants: &BoundConstants) -> Result<Plot> {
    let (y, env) = smallness_series(run, constants)?;
    let t = &run.fine.times;
    let measured = t.iter().copied().zip(y).collect();
    let bound = env
        .times
        .iter()
        .zip(&env.values)
        .zip(&env.valid)
        .filter(|(_, ok)| **ok)
        .map(|((t, v), _)| (*t, *v))
        .collect();
    let mut b = Series::line("envelope", bound);
    b.dashed = true;
    Ok(Plot {
        title: format!("propagation of smallness, nu = {}", run.nu),
        x_label: "t".into(),
        y_label: "||u^nu - u||^2 / U^2".into(),
        scale: Scale::Linear,
        series: vec![Series::line("y(t)", measured), b],
    })
}

/// Temperature gap against its constant bound for one run.
pub fn theta_plot(run: &NuReport, constants: &BoundConstants) -> Plot {
    let t = &run.fine.times;
    let bound = (2.0 * constants.u * constants.theta).exp() * run.initial_gaps.theta_l2;
    let mut b = Series::line("bound", t.iter().map(|&t| (t, bound)).collect());
    b.dashed = true;
    Plot {
        title: format!("temperature gap, nu = {}", run.nu),
        x_label: "t".into(),
        y_label: "||theta^nu - theta||_2".into(),
        scale: Scale::Linear,
        series: vec![
            Series::line("measured", t.iter().copied().zip(run.fine.theta_gap.iter().copied()).collect()),
            b,
        ],
    }
}

/// Sampled vorticity gaps against time for one run.
pub fn gap_plot(report: &SweepReport, run: &NuReport) -> Plot {
    let t = &report.sample_times;
    let series = run
        .omega_gaps
        .iter()
        .map(|g| Series::line(format!("p = {}", g.p), t.iter().copied().zip(g.values.iter().copied()).collect()))
        .collect();
    Plot {
        title: format!("vorticity gap, nu = {}", run.nu),
        x_label: "t".into(),
        y_label: "||omega^nu - omega||_p".into(),
        scale: Scale::Linear,
        series,
    }
}

/// File stem for per-viscosity outputs.
pub fn nu_stem(nu: f64) -> String {
    format!("nu{nu:e}")
}

/// Label of an exponent for file names.
pub fn p_stem(p: f64) -> String {
    format!("p{}", p_label(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_data_is_a_straight_line() {
        let nus = [1e-4, 1e-3, 1e-2, 1e-1];
        let plot = Plot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            scale: Scale::LogLog,
            series: vec![Series::line("slope 1", nus.iter().map(|&n| (n, 3.0 * n)).collect())],
        };
        let p = &project(&plot).unwrap()[0];
        let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
        let s0 = slope(p[0], p[1]);
        for w in p.windows(2) {
            assert!((slope(w[0], w[1]) - s0).abs() < 1e-9);
        }
        let svg = plot_svg(&plot).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline") && svg.contains("1e-4"));
        assert_eq!(svg, plot_svg(&plot).unwrap());
    }

    #[test]
    fn log_axes_drop_nonpositive_points() {
        let plot = Plot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            scale: Scale::LogLog,
            series: vec![Series::line("s", vec![(0.0, 1.0), (1.0, 0.0), (1.0, 2.0), (10.0, 20.0)])],
        };
        assert_eq!(project(&plot).unwrap()[0].len(), 2);
        let empty = Plot { series: vec![Series::line("s", vec![(0.0, 0.0)])], ..plot };
        assert!(plot_svg(&empty).is_err());
    }

    #[test]
    fn linear_ticks_are_round() {
        assert_eq!(nice_step(1.0), 0.2);
        assert_eq!(nice_step(30.0), 5.0);
        let a = Axis::fit([0.013, 0.97].into_iter(), false).unwrap();
        assert_eq!((a.lo, a.hi), (0.0, 1.0));
        let labels: Vec<String> = a.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["0", "0.2", "0.4", "0.6", "0.8", "1"]);
    }
}
