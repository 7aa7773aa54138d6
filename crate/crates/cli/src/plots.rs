//! Best-effort SVG plots of the aggregate curves, one file per figure
//! family, each with a backing CSV of exactly the plotted series. The
//! numeric pipeline never depends on anything in this module.

use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use gp_locate::error::{Error, Result};
use gp_locate::predict::Method;

use crate::experiment::{AggregateRow, SweepResult};

const SIZE: (u32, u32) = (900, 620);
const COLORS: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// One named curve over a numeric x-axis.
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn series_by_method_m(
    aggs: &[AggregateRow],
    value: impl Fn(&AggregateRow) -> f64,
    label: impl Fn(Method, usize) -> String,
) -> Vec<Series> {
    let mut keys: Vec<(Method, usize)> = aggs.iter().map(|a| (a.method, a.m)).collect();
    keys.dedup();
    keys.sort_by_key(|&(method, m)| (method == Method::Nagp, m));
    keys.dedup();
    keys.iter()
        .map(|&(method, m)| Series {
            label: label(method, m),
            points: aggs
                .iter()
                .filter(|a| a.method == method && a.m == m)
                .map(|a| (a.sigma_z_sq, value(a)))
                .collect(),
        })
        .collect()
}

fn write_series_csv(path: &Path, x_name: &str, series: &[Series]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "series,{x_name},value")?;
    for s in series {
        for (x, y) in &s.points {
            writeln!(out, "{},{x},{y}", s.label)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn draw_lines(
    area: &DrawingArea<SVGBackend, plotters::coord::Shift>,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .collect();
    if xs.is_empty() {
        return Ok(());
    }
    let (x_min, x_max) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_min, y_max) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let pad = ((y_max - y_min) * 0.08).max(1e-9);
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(42)
        .y_label_area_size(60)
        .build_cartesian_2d(x_min..x_max.max(x_min + 1e-9), (y_min - pad)..(y_max + pad))
        .map_err(io_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(io_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(
                s.points.iter().cloned(),
                color.stroke_width(2),
            ))
            .map_err(io_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
            });
        chart
            .draw_series(
                s.points
                    .iter()
                    .map(|&(x, y)| Circle::new((x, y), 3, COLORS[i % COLORS.len()].filled())),
            )
            .map_err(io_err)?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .draw()
        .map_err(io_err)?;
    Ok(())
}

fn single_panel(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(io_err)?;
    draw_lines(&root, title, x_label, y_label, series)?;
    root.present().map_err(io_err)?;
    Ok(())
}

fn rmse_vs_sigma(result: &SweepResult, dir: &Path) -> Result<()> {
    let series = series_by_method_m(
        &result.aggregates,
        |a| a.rmse_m_mean,
        |me, m| format!("{me} M={m}"),
    );
    write_series_csv(&dir.join("rmse_vs_sigma.csv"), "sigma_z2", &series)?;
    single_panel(
        &dir.join("rmse_vs_sigma.svg"),
        "Average RMSE vs shadowing variance",
        "shadowing variance (dB^2)",
        "RMSE (m)",
        &series,
    )
}

fn lpd_vs_sigma(result: &SweepResult, dir: &Path) -> Result<()> {
    let series = series_by_method_m(
        &result.aggregates,
        |a| a.lpd_mean,
        |me, m| format!("{me} M={m}"),
    );
    write_series_csv(&dir.join("lpd_vs_sigma.csv"), "sigma_z2", &series)?;
    single_panel(
        &dir.join("lpd_vs_sigma.svg"),
        "Average log-predictive density vs shadowing variance",
        "shadowing variance (dB^2)",
        "LPD (nats/user)",
        &series,
    )
}

fn bars_and_coverage(result: &SweepResult, dir: &Path) -> Result<()> {
    // Coverage panel always; the two bar panels need the per-trial bar data
    // (present in fresh runs, absent when replotting from detail.csv).
    let coverage = series_by_method_m(
        &result.aggregates,
        |a| a.coverage_2sigma_mean,
        |me, m| format!("{me} M={m}"),
    );
    write_series_csv(&dir.join("coverage_vs_sigma.csv"), "sigma_z2", &coverage)?;

    let path = dir.join("bars_and_coverage.svg");
    let root = SVGBackend::new(&path, (1500, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(io_err)?;

    if result.bars.is_empty() {
        draw_lines(
            &root,
            "True locations inside the 2-sigma range",
            "shadowing variance (dB^2)",
            "coverage fraction",
            &coverage,
        )?;
        root.present().map_err(io_err)?;
        return Ok(());
    }

    // Average the per-trial bar widths per cell.
    let mut cells: Vec<(Method, usize, f64)> = result
        .bars
        .iter()
        .map(|b| (b.method, b.m, b.sigma_z_sq))
        .collect();
    cells.sort_by(|a, b| {
        (a.0 == Method::Nagp, a.1, a.2.to_bits()).cmp(&(b.0 == Method::Nagp, b.1, b.2.to_bits()))
    });
    cells.dedup();
    let bar_series = |pick: fn(&crate::experiment::TrialBars) -> f64| -> Vec<Series> {
        let mut keys: Vec<(Method, usize)> = cells.iter().map(|c| (c.0, c.1)).collect();
        keys.dedup();
        keys.iter()
            .map(|&(method, m)| Series {
                label: format!("{method} M={m}"),
                points: cells
                    .iter()
                    .filter(|c| c.0 == method && c.1 == m)
                    .map(|&(_, _, s)| {
                        let trials: Vec<f64> = result
                            .bars
                            .iter()
                            .filter(|b| b.method == method && b.m == m && b.sigma_z_sq == s)
                            .map(pick)
                            .collect();
                        (s, trials.iter().sum::<f64>() / trials.len() as f64)
                    })
                    .collect(),
            })
            .collect()
    };
    let (left, rest) = root.split_horizontally(500);
    let (mid, right) = rest.split_horizontally(500);
    draw_lines(
        &left,
        "Average 2-sigma bars, x axis",
        "shadowing variance (dB^2)",
        "bar half-width (m)",
        &bar_series(|b| b.mean_bar2_x),
    )?;
    draw_lines(
        &mid,
        "Average 2-sigma bars, y axis",
        "shadowing variance (dB^2)",
        "bar half-width (m)",
        &bar_series(|b| b.mean_bar2_y),
    )?;
    draw_lines(
        &right,
        "True locations inside the 2-sigma range",
        "shadowing variance (dB^2)",
        "coverage fraction",
        &coverage,
    )?;
    root.present().map_err(io_err)?;
    Ok(())
}

fn rmse_vs_bcrlb(result: &SweepResult, dir: &Path) -> Result<()> {
    let mut series = series_by_method_m(
        &result.aggregates,
        |a| a.rmse_m_mean,
        |me, m| format!("{me} RMSE M={m}"),
    );
    // The bound is shared by both methods; emit it once per antenna count.
    let mut ms: Vec<usize> = result.aggregates.iter().map(|a| a.m).collect();
    ms.sort_unstable();
    ms.dedup();
    for m in ms {
        let points: Vec<(f64, f64)> = result
            .aggregates
            .iter()
            .filter(|a| a.m == m && a.method == result.aggregates[0].method)
            .map(|a| (a.sigma_z_sq, a.bcrlb_m_mean))
            .collect();
        series.push(Series {
            label: format!("BCRLB M={m}"),
            points,
        });
    }
    write_series_csv(&dir.join("rmse_vs_bcrlb.csv"), "sigma_z2", &series)?;
    single_panel(
        &dir.join("rmse_vs_bcrlb.svg"),
        "Average RMSE against its lower bound",
        "shadowing variance (dB^2)",
        "meters",
        &series,
    )
}

fn rmse_vs_m(result: &SweepResult, dir: &Path) -> Result<()> {
    // Fix the middle shadowing variance and sweep the antenna count.
    let mut sigmas: Vec<f64> = result.aggregates.iter().map(|a| a.sigma_z_sq).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let sigma = sigmas[sigmas.len() / 2];
    let mut methods: Vec<Method> = result.aggregates.iter().map(|a| a.method).collect();
    methods.sort_by_key(|m| *m == Method::Nagp);
    methods.dedup();
    let mut series: Vec<Series> = methods
        .iter()
        .map(|&me| Series {
            label: format!("{me} RMSE"),
            points: result
                .aggregates
                .iter()
                .filter(|a| a.method == me && a.sigma_z_sq == sigma)
                .map(|a| (a.m as f64, a.rmse_m_mean))
                .collect(),
        })
        .collect();
    series.push(Series {
        label: "BCRLB".to_string(),
        points: result
            .aggregates
            .iter()
            .filter(|a| a.method == methods[0] && a.sigma_z_sq == sigma)
            .map(|a| (a.m as f64, a.bcrlb_m_mean))
            .collect(),
    });
    write_series_csv(&dir.join("rmse_vs_M.csv"), "M", &series)?;
    single_panel(
        &dir.join("rmse_vs_M.svg"),
        &format!("Average RMSE vs antenna count (sigma_z2 = {sigma} dB^2)"),
        "number of RRH antennas M",
        "meters",
        &series,
    )
}

/// Render every figure family into `dir`, returning one outcome per plot.
pub fn emit_plots(result: &SweepResult, dir: &Path) -> Vec<(PathBuf, Result<()>)> {
    vec![
        (dir.join("rmse_vs_sigma.svg"), rmse_vs_sigma(result, dir)),
        (
            dir.join("bars_and_coverage.svg"),
            bars_and_coverage(result, dir),
        ),
        (dir.join("lpd_vs_sigma.svg"), lpd_vs_sigma(result, dir)),
        (dir.join("rmse_vs_bcrlb.svg"), rmse_vs_bcrlb(result, dir)),
        (dir.join("rmse_vs_M.svg"), rmse_vs_m(result, dir)),
    ]
}
