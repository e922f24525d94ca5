//! Decay-rate fitting, CSV export and static SVG plots.

use std::fmt::Write as _;
use std::io::{self, Write};

use leadcons_core::switchsim::Trajectory;
use thiserror::Error;

/// Error norms below this are excluded from log-domain fits and clamped on
/// log plots.
pub const LOG_FLOOR: f64 = 1e-12;
/// Fewest usable samples for a rate fit.
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("need at least {required} samples above {LOG_FLOOR:e} after t = {t_start}, found {usable}")]
    TooFewSamples { usable: usize, required: usize, t_start: f64 },
    #[error("nothing to plot")]
    EmptySeries,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Least-squares fit of `ln‖e(t)‖ ≈ intercept + slope·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Fitted exponent, 1/s; negative for decay.
    pub slope: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFit {
    Rate(RateFit),
    /// Every sample in the window is below [`LOG_FLOOR`].
    AlreadyConverged,
}

impl DecayFit {
    pub fn rate(&self) -> Option<&RateFit> {
        match self {
            DecayFit::Rate(r) => Some(r),
            DecayFit::AlreadyConverged => None,
        }
    }
}

/// Fits the error norms of `trajectory` over `[t_start, horizon]`.
pub fn fit_decay_rate(trajectory: &Trajectory, t_start: f64) -> Result<DecayFit, ReportError> {
    fit_series(&trajectory.times, &trajectory.error_norms, t_start)
}

pub fn fit_series(times: &[f64], values: &[f64], t_start: f64) -> Result<DecayFit, ReportError> {
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_start)
        .map(|(&t, &v)| (t, v))
        .collect();
    let usable: Vec<(f64, f64)> = window
        .iter()
        .filter(|(_, v)| *v >= LOG_FLOOR)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if !window.is_empty() && usable.is_empty() {
        return Ok(DecayFit::AlreadyConverged);
    }
    if usable.len() < MIN_FIT_SAMPLES {
        return Err(ReportError::TooFewSamples {
            usable: usable.len(),
            required: MIN_FIT_SAMPLES,
            t_start,
        });
    }
    let m = usable.len() as f64;
    let t_mean = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - t_mean) * (p.1 - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let ss_tot: f64 = usable.iter().map(|p| (p.1 - y_mean).powi(2)).sum();
    let ss_res: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_res == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit::Rate(RateFit {
        slope,
        intercept,
        fit_window: (usable[0].0, usable[usable.len() - 1].0),
        r_squared,
        samples: usable.len(),
    }))
}

pub const CSV_HEADER: &str = "t,agent,component,value,error_norm";

/// One row per (sample, agent, component), time-major. Agent 0 is the
/// leader, components count from 1, numbers carry 12 significant digits.
pub fn write_csv<W: Write>(trajectory: &Trajectory, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{CSV_HEADER}")?;
    for k in 0..trajectory.len() {
        let t = trajectory.times[k];
        let e = trajectory.error_norms[k];
        let leader = &trajectory.leader_states[k];
        for (c, v) in leader.iter().enumerate() {
            writeln!(out, "{t:.11e},0,{},{v:.11e},{e:.11e}", c + 1)?;
        }
        let agents = &trajectory.agent_states[k];
        for i in 0..agents.nrows() {
            for c in 0..agents.ncols() {
                writeln!(out, "{t:.11e},{},{},{:.11e},{e:.11e}", i + 1, c + 1, agents[(i, c)])?;
            }
        }
    }
    out.flush()
}

/// One plotted line.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Drawn thicker and in black.
    pub emphasized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            title: String::new(),
            x_label: "t [s]".into(),
            y_label: String::new(),
            log_y: false,
            width: 720,
            height: 420,
        }
    }
}

/// Series for state component `component` (0-based): leader first, then
/// every follower or observer.
pub fn component_series(trajectory: &Trajectory, component: usize) -> Vec<Series> {
    let mut out = vec![Series {
        label: "leader".into(),
        points: trajectory
            .times
            .iter()
            .zip(&trajectory.leader_states)
            .map(|(&t, x)| (t, x[component]))
            .collect(),
        emphasized: true,
    }];
    for i in 0..trajectory.n_agents() {
        out.push(Series {
            label: format!("agent {}", i + 1),
            points: trajectory
                .times
                .iter()
                .zip(&trajectory.agent_states)
                .map(|(&t, x)| (t, x[(i, component)]))
                .collect(),
            emphasized: false,
        });
    }
    out
}

pub fn error_series(trajectory: &Trajectory) -> Series {
    Series {
        label: "error norm".into(),
        points: trajectory.times.iter().copied().zip(trajectory.error_norms.iter().copied()).collect(),
        emphasized: true,
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const MAX_POINTS: usize = 2000;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 56.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// A 1-2-5 step giving roughly five intervals over `span`.
fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let base = 10f64.powf(raw.log10().floor());
    let unit = [1.0, 2.0, 5.0, 10.0].into_iter().find(|&u| u * base >= raw).unwrap_or(10.0);
    unit * base
}

fn tick_label(v: f64, step: f64) -> String {
    if v.abs() < 1e-6 * step {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Static line plot as a standalone SVG 1.1 document. On a log axis values
/// at or below [`LOG_FLOOR`] are drawn at the floor and a footnote says so.
pub fn render_svg<W: Write>(series: &[Series], options: &PlotOptions, mut out: W) -> Result<(), ReportError> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(ReportError::EmptySeries);
    }
    let mut clamped = false;
    let map_y = |y: f64, clamped: &mut bool| {
        if options.log_y {
            if y <= LOG_FLOOR {
                *clamped = true;
                LOG_FLOOR.log10()
            } else {
                y.log10()
            }
        } else {
            y
        }
    };
    let mapped: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
            let mut pts: Vec<(f64, f64)> =
                s.points.iter().step_by(stride).map(|&(x, y)| (x, map_y(y, &mut clamped))).collect();
            if let Some(&(x, y)) = s.points.last() {
                if (s.points.len() - 1) % stride != 0 {
                    pts.push((x, map_y(y, &mut clamped)));
                }
            }
            pts
        })
        .collect();

    let all = mapped.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let x_step = nice_step(x1 - x0);
    x1 = x0 + ((x1 - x0) / x_step - 1e-9).ceil() * x_step;
    let mut y_step = 1.0;
    if options.log_y {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    } else {
        if y1 <= y0 {
            let pad = if y0 == 0.0 { 1.0 } else { 0.1 * y0.abs() };
            y0 -= pad;
            y1 += pad;
        }
        y_step = nice_step(y1 - y0);
        y0 = (y0 / y_step).floor() * y_step;
        y1 = (y1 / y_step).ceil() * y_step;
    }

    let (w, h) = (f64::from(options.width), f64::from(options.height));
    let pw = w - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = h - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        options.width, options.height, options.width, options.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        escape(&options.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );

    let x_ticks = ((x1 - x0) / x_step).round() as usize;
    for k in 0..=x_ticks {
        let x = x0 + x_step * k as f64;
        let px = sx(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 5.0,
            MARGIN_TOP + ph + 18.0,
            tick_label(x, x_step)
        );
    }
    let y_ticks: Vec<f64> = if options.log_y {
        let decades = (y1 - y0) as usize;
        let stride = decades.div_ceil(8).max(1);
        (0..=decades).step_by(stride).map(|d| y0 + d as f64).collect()
    } else {
        let count = ((y1 - y0) / y_step).round() as usize;
        (0..=count).map(|k| y0 + y_step * k as f64).collect()
    };
    for y in y_ticks {
        let py = sy(y);
        let label = if options.log_y { format!("1e{}", y as i64) } else { tick_label(y, y_step) };
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{MARGIN_LEFT}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
            MARGIN_LEFT - 5.0,
            MARGIN_LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        h - 18.0,
        escape(&options.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        escape(&options.y_label)
    );

    // followers first so the leader is drawn on top
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by_key(|&i| series[i].emphasized);
    let mut colour = 0usize;
    let mut colours = vec![""; series.len()];
    for (i, s) in series.iter().enumerate() {
        colours[i] = if s.emphasized {
            "black"
        } else {
            colour += 1;
            PALETTE[(colour - 1) % PALETTE.len()]
        };
    }
    for &i in &order {
        let mut pts = String::new();
        for &(x, y) in mapped[i].iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let width = if series[i].emphasized { 2.5 } else { 1.0 };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="{width}" points="{}"><title>{}</title></polyline>"#,
            colours[i],
            pts.trim_end(),
            escape(&series[i].label)
        );
    }

    for (row, (i, s)) in series.iter().enumerate().take(12).enumerate() {
        let ly = MARGIN_TOP + 10.0 + 16.0 * row as f64;
        let lx = MARGIN_LEFT + pw + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            colours[i],
            if s.emphasized { 2.5 } else { 1.0 },
            lx + 22.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    if clamped {
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN_LEFT}" y="{:.1}" font-size="10">* values at or below 1e-12 are drawn at 1e-12</text>"#,
            h - 4.0
        );
    }
    let _ = writeln!(svg, "</svg>");
    out.write_all(svg.as_bytes())?;
    Ok(())
}
