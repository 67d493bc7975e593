//! Result files: per-frame trace CSV, sweep summary CSV, run metadata JSON
//! and gnuplot data/command files derived from the traces.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiments::SweepRow;
use super::run::{moving_average, to_db, MetricsTrace};
use crate::algorithms::Algorithm;
use crate::error::Result;

/// One trace CSV line. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub algorithm: Algorithm,
    pub frequency_hz: f64,
    pub p_red: f64,
    pub p_red_db: f64,
    pub epsilon_n: f64,
    pub epsilon_target: Option<f64>,
    pub mu_n: Option<f64>,
    /// 1 when the output was muted.
    pub muted: u8,
    pub feasibility_residual: Option<f64>,
}

pub const TRACE_COLUMNS: [&str; 10] = [
    "n",
    "algorithm",
    "frequency_hz",
    "p_red",
    "p_red_db",
    "epsilon_n",
    "epsilon_target",
    "mu_n",
    "muted",
    "feasibility_residual",
];

pub const SUMMARY_COLUMNS: [&str; 8] =
    ["frequency_hz", "algorithm", "p_red_db_mean100", "epsilon_mean100", "lambda", "C", "delta_reg", "seed"];

pub fn trace_rows(trace: &MetricsTrace) -> impl Iterator<Item = TraceRow> + '_ {
    trace.records.iter().map(move |r| TraceRow {
        n: r.n,
        algorithm: trace.meta.algorithm,
        frequency_hz: trace.meta.frequency_hz,
        p_red: r.p_red,
        p_red_db: to_db(r.p_red),
        epsilon_n: r.epsilon,
        epsilon_target: r.epsilon_target,
        mu_n: r.mu,
        muted: r.muted as u8,
        feasibility_residual: r.feasibility_residual,
    })
}

/// Writes the traces one after another under a single header.
pub fn write_trace_csv<W: Write>(out: W, traces: &[&MetricsTrace]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for t in traces {
        for row in trace_rows(t) {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers()?, &TRACE_COLUMNS)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Sweep summary; the header is written even with no rows.
pub fn write_summary_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers()?, &SUMMARY_COLUMNS)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(crate::Error::Io(format!(
            "unexpected CSV header {:?}, expected {expected:?}",
            found.iter().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `<stem>.dat` (one block per trace: n, moving-average P_red in dB,
/// epsilon, moving-average epsilon) and `<stem>.gp` rendering the P_red and
/// epsilon panels. Values come from the traces, i.e. from the same numbers
/// as the CSV.
pub fn write_trace_plot(dir: &Path, stem: &str, traces: &[&MetricsTrace], window: usize) -> Result<Vec<PathBuf>> {
    let dat = dir.join(format!("{stem}.dat"));
    let gp = dir.join(format!("{stem}.gp"));
    let mut data = String::new();
    for (block, t) in traces.iter().enumerate() {
        if block > 0 {
            data.push_str("\n\n");
        }
        writeln!(data, "# {} {} Hz", t.meta.algorithm, t.meta.frequency_hz).unwrap();
        writeln!(data, "# n p_red_db_ma epsilon_n epsilon_ma").unwrap();
        let p_ma = moving_average(&t.p_red(), window);
        let eps = t.epsilon();
        let e_ma = moving_average(&eps, window);
        for (i, r) in t.records.iter().enumerate() {
            writeln!(data, "{} {} {} {}", r.n, to_db(p_ma[i]), eps[i], e_ma[i]).unwrap();
        }
    }
    fs::write(&dat, data)?;

    let dat_name = format!("{stem}.dat");
    let mut cmd = String::new();
    writeln!(cmd, "set terminal pngcairo size 900,900").unwrap();
    writeln!(cmd, "set output '{stem}.png'").unwrap();
    writeln!(cmd, "set multiplot layout 2,1").unwrap();
    writeln!(cmd, "set xlabel 'iteration'").unwrap();
    writeln!(cmd, "set ylabel 'P_red [dB]'").unwrap();
    writeln!(cmd, "plot {}", plot_list(&dat_name, traces, "1:2")).unwrap();
    writeln!(cmd, "set ylabel 'exterior radiation'").unwrap();
    writeln!(cmd, "plot {}", plot_list(&dat_name, traces, "1:4")).unwrap();
    writeln!(cmd, "unset multiplot").unwrap();
    fs::write(&gp, cmd)?;
    Ok(vec![dat, gp])
}

fn plot_list(dat: &str, traces: &[&MetricsTrace], using: &str) -> String {
    traces
        .iter()
        .enumerate()
        .map(|(i, t)| format!("'{dat}' index {i} using {using} with lines title '{}'", t.meta.algorithm))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Sweep panels: converged P_red (dB) and radiation against frequency.
pub fn write_sweep_plot(dir: &Path, stem: &str, rows: &[SweepRow]) -> Result<Vec<PathBuf>> {
    let dat = dir.join(format!("{stem}.dat"));
    let gp = dir.join(format!("{stem}.gp"));
    let mut data = String::new();
    for (block, alg) in Algorithm::ALL.iter().enumerate() {
        if block > 0 {
            data.push_str("\n\n");
        }
        writeln!(data, "# {alg}").unwrap();
        writeln!(data, "# frequency_hz p_red_db_mean100 epsilon_mean100").unwrap();
        for r in rows.iter().filter(|r| r.algorithm == *alg) {
            let (Some(p), Some(e)) = (r.p_red_db_mean100, r.epsilon_mean100) else {
                continue;
            };
            writeln!(data, "{} {p} {e}", r.frequency_hz).unwrap();
        }
    }
    fs::write(&dat, data)?;
    let dat_name = format!("{stem}.dat");
    let series = |using: &str| {
        Algorithm::ALL
            .iter()
            .enumerate()
            .map(|(i, a)| format!("'{dat_name}' index {i} using {using} with linespoints title '{a}'"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut cmd = String::new();
    writeln!(cmd, "set terminal pngcairo size 900,900").unwrap();
    writeln!(cmd, "set output '{stem}.png'").unwrap();
    writeln!(cmd, "set multiplot layout 2,1").unwrap();
    writeln!(cmd, "set xlabel 'frequency [Hz]'").unwrap();
    writeln!(cmd, "set ylabel 'P_red [dB]'").unwrap();
    writeln!(cmd, "plot {}", series("1:2")).unwrap();
    writeln!(cmd, "set ylabel 'exterior radiation'").unwrap();
    writeln!(cmd, "plot {}", series("1:3")).unwrap();
    writeln!(cmd, "unset multiplot").unwrap();
    fs::write(&gp, cmd)?;
    Ok(vec![dat, gp])
}
