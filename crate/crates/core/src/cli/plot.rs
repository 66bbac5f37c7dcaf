//! SVG convergence plots with a logarithmic vertical axis.

use std::path::Path;

use plotters::prelude::*;

use super::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum PlotMode {
    /// `P_estimate − P*` against wall time.
    GapVsTime,
    /// `‖g_t‖` against the iteration index.
    GnormVsIter,
}

/// Values below this are drawn at this floor.
const LOG_FLOOR: f64 = 1e-16;

fn series(trace: &Trace, mode: PlotMode, p_ref: f64) -> Vec<(f64, f64)> {
    trace
        .records
        .iter()
        .map(|r| match mode {
            PlotMode::GapVsTime => (r.wall_time_s, r.p_estimate - p_ref),
            PlotMode::GnormVsIter => (r.t as f64, r.g_norm),
        })
        .filter(|(x, y)| x.is_finite() && !y.is_nan())
        .map(|(x, y)| (x, y.max(LOG_FLOOR)))
        .collect()
}

/// Draws one labeled curve per `(label, trace)`. The gap reference is each
/// trace's `p_star`, or the smallest `P_estimate` over all traces when none
/// records it.
pub fn emit_plot(traces: &[(String, Trace)], mode: PlotMode, out: &Path) -> Result<(), String> {
    if traces.is_empty() {
        return Err("no traces to plot".into());
    }
    let fallback = traces
        .iter()
        .flat_map(|(_, t)| t.records.iter().map(|r| r.p_estimate))
        .fold(f64::INFINITY, f64::min);
    let data: Vec<(&str, Vec<(f64, f64)>)> = traces
        .iter()
        .map(|(label, t)| (label.as_str(), series(t, mode, t.p_star().unwrap_or(fallback))))
        .collect();
    let points = data.iter().flat_map(|(_, s)| s.iter());
    let (mut x_max, mut y_min, mut y_max) = (0.0f64, f64::INFINITY, 0.0f64);
    for &(x, y) in points {
        x_max = x_max.max(x);
        if y.is_finite() {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !y_min.is_finite() {
        return Err("traces contain no plottable points".into());
    }
    if x_max <= 0.0 {
        x_max = 1.0;
    }
    let (y_lo, y_hi) = (y_min / 2.0, (y_max * 2.0).max(y_min * 10.0));
    let (title, x_label, y_label) = match mode {
        PlotMode::GapVsTime => ("optimality gap", "wall time [s]", "P(x) - P*"),
        PlotMode::GnormVsIter => ("gradient norm", "iteration", "|g_t|"),
    };

    let root = SVGBackend::new(out, (900, 600)).into_drawing_area();
    let err = |e: &dyn std::fmt::Display| e.to_string();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 24))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(80)
        .build_cartesian_2d(0.0..x_max * 1.02, (y_lo..y_hi).log_scale())
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(|e| err(&e))?;
    for (i, (label, pts)) in data.into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| err(&e))?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))?;
    Ok(())
}
