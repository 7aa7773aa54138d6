//! CSV emission and re-aggregation of sweep results.
//!
//! `detail.csv` carries one row per (method, M, sigma_z^2, trial) with the
//! fixed header below; `aggregate.csv` carries mean and standard error per
//! cell and is always recomputable from the detail rows.

use std::io::Write;
use std::path::{Path, PathBuf};

use gp_locate::error::{Error, Result};
use gp_locate::metrics::MetricsReport;
use gp_locate::predict::Method;

use crate::experiment::{aggregate_rows, AggregateRow, SweepResult, TrialBars};
use crate::plots;

pub const DETAIL_HEADER: &str = "method,M,sigma_z2,trial,rmse_m,lpd,coverage_2sigma,bcrlb_m,seed";
pub const AGGREGATE_HEADER: &str = "method,M,sigma_z2,n_trials,rmse_m_mean,rmse_m_se,lpd_mean,lpd_se,coverage_2sigma_mean,coverage_2sigma_se,bcrlb_m_mean,bcrlb_m_se";
pub const BARS_HEADER: &str = "method,M,sigma_z2,trial,mean_bar2_x,mean_bar2_y";

pub fn write_detail_csv(rows: &[MetricsReport], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{DETAIL_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.m,
            r.sigma_z_sq,
            r.trial,
            r.rmse_m,
            r.lpd,
            r.coverage_2sigma,
            r.bcrlb_m,
            r.seed
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(aggs: &[AggregateRow], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for a in aggs {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            a.method,
            a.m,
            a.sigma_z_sq,
            a.n_trials,
            a.rmse_m_mean,
            a.rmse_m_se,
            a.lpd_mean,
            a.lpd_se,
            a.coverage_2sigma_mean,
            a.coverage_2sigma_se,
            a.bcrlb_m_mean,
            a.bcrlb_m_se
        )?;
    }
    out.flush()?;
    Ok(())
}

fn write_bars_csv(bars: &[TrialBars], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{BARS_HEADER}")?;
    for b in bars {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            b.method, b.m, b.sigma_z_sq, b.trial, b.mean_bar2_x, b.mean_bar2_y
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Parse a detail CSV produced by [`write_detail_csv`].
pub fn read_detail_csv(path: &Path) -> Result<Vec<MetricsReport>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let expected: Vec<&str> = DETAIL_HEADER.split(',').collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse(format!(
            "unexpected detail.csv header {got:?}; expected {expected:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
        let field = |j: usize| -> Result<&str> {
            record
                .get(j)
                .ok_or_else(|| Error::Parse(format!("row {i}: missing field {j}")))
        };
        let num = |j: usize| -> Result<f64> {
            field(j)?
                .parse()
                .map_err(|e| Error::Parse(format!("row {i}, field {j}: {e}")))
        };
        rows.push(MetricsReport {
            method: field(0)?.parse::<Method>()?,
            m: field(1)?
                .parse()
                .map_err(|e| Error::Parse(format!("row {i}: {e}")))?,
            sigma_z_sq: num(2)?,
            trial: field(3)?
                .parse()
                .map_err(|e| Error::Parse(format!("row {i}: {e}")))?,
            rmse_m: num(4)?,
            lpd: num(5)?,
            coverage_2sigma: num(6)?,
            bcrlb_m: num(7)?,
            seed: field(8)?
                .parse()
                .map_err(|e| Error::Parse(format!("row {i}: {e}")))?,
        });
    }
    Ok(rows)
}

/// Write detail and aggregate CSVs plus the figure-family plots into
/// `out_dir`. Plot emission is best-effort: failures are reported on stderr
/// and never affect the numeric outputs or the exit status.
pub fn emit_report(result: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::contract("cannot emit a report for an empty sweep"));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let detail = out_dir.join("detail.csv");
    write_detail_csv(&result.rows, &detail)?;
    written.push(detail);

    let aggregate = out_dir.join("aggregate.csv");
    write_aggregate_csv(&result.aggregates, &aggregate)?;
    written.push(aggregate);

    let plot_dir = out_dir.join("plots");
    if let Err(e) = std::fs::create_dir_all(&plot_dir) {
        eprintln!("warning: cannot create plot directory: {e}");
        return Ok(written);
    }
    if !result.bars.is_empty() {
        let bars = plot_dir.join("bars_and_coverage.csv");
        match write_bars_csv(&result.bars, &bars) {
            Ok(()) => written.push(bars),
            Err(e) => eprintln!("warning: bars CSV failed: {e}"),
        }
    }
    for (path, outcome) in plots::emit_plots(result, &plot_dir) {
        match outcome {
            Ok(()) => written.push(path),
            Err(e) => eprintln!("warning: plot {} failed: {e}", path.display()),
        }
    }
    Ok(written)
}

/// Re-aggregate (and re-plot) from a detail CSV alone.
pub fn report_from_detail(detail_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_detail_csv(detail_path)?;
    if rows.is_empty() {
        return Err(Error::contract(format!(
            "{} contains no data rows",
            detail_path.display()
        )));
    }
    let aggregates = aggregate_rows(&rows);
    let result = SweepResult {
        rows,
        bars: Vec::new(),
        aggregates,
    };
    emit_report(&result, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<MetricsReport> {
        vec![
            MetricsReport {
                method: Method::Cgp,
                m: 30,
                sigma_z_sq: 1.0,
                trial: 0,
                rmse_m: 10.0,
                lpd: -40.0,
                coverage_2sigma: 0.12,
                bcrlb_m: 9.5,
                seed: 111,
            },
            MetricsReport {
                method: Method::Cgp,
                m: 30,
                sigma_z_sq: 1.0,
                trial: 1,
                rmse_m: 12.0,
                lpd: -44.0,
                coverage_2sigma: 0.08,
                bcrlb_m: 10.5,
                seed: 222,
            },
        ]
    }

    #[test]
    fn detail_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("detail.csv");
        let rows = sample_rows();
        write_detail_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(DETAIL_HEADER));
        let back = read_detail_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn aggregate_of_two_rows_by_hand() {
        // Hand computation: means (11, -42, 0.10, 10), sample sd of rmse =
        // sqrt(2), standard error = 1.
        let aggs = aggregate_rows(&sample_rows());
        assert_eq!(aggs.len(), 1);
        let a = &aggs[0];
        assert_eq!(a.n_trials, 2);
        assert!((a.rmse_m_mean - 11.0).abs() < 1e-12);
        assert!((a.rmse_m_se - 1.0).abs() < 1e-12);
        assert!((a.lpd_mean - -42.0).abs() < 1e-12);
        assert!((a.coverage_2sigma_mean - 0.10).abs() < 1e-12);
        assert!((a.bcrlb_m_mean - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sweep_is_a_contract_error() {
        let dir = tempfile::tempdir().unwrap();
        let result = SweepResult {
            rows: vec![],
            bars: vec![],
            aggregates: vec![],
        };
        assert!(matches!(
            emit_report(&result, dir.path()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("detail.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        assert!(matches!(read_detail_csv(&path), Err(Error::Parse(_))));
    }
}
