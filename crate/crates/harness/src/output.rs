//! CSV traces and JSON summaries.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value parses back bit-for-bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use escal_core::scenario::{RunSummary, TraceRow};
use serde::{Deserialize, Serialize};

use crate::config::{Radius, ScenarioFile};
use crate::error::HarnessError;

fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["tick".to_string(), "R_m".to_string()];
    h.extend((1..=n).map(|i| format!("code_{i}")));
    h.extend((1..=n).map(|i| format!("perturbed_code_{i}")));
    h.push("objective_q".into());
    h.push("error_deg".into());
    h.extend((1..=n).map(|i| format!("demod_{i}")));
    h.extend((1..=n).map(|i| format!("accumulator_{i}")));
    h
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceRow]) -> Result<(), csv::Error> {
    let n = trace.first().map_or(0, |r| r.codes.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(n))?;
    let mut rec: Vec<String> = Vec::with_capacity(4 + 4 * n);
    for row in trace {
        rec.clear();
        rec.push(row.tick.to_string());
        rec.push(format!("{:?}", row.radius_m));
        rec.extend(row.codes.iter().map(u8::to_string));
        rec.extend(row.perturbed.iter().map(u8::to_string));
        rec.push(row.objective_q.to_string());
        rec.push(format!("{:?}", row.error_deg));
        rec.extend(row.demod.iter().map(|v| format!("{v:?}")));
        rec.extend(row.accumulator.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, HarnessError> {
    let bad = |m: String| HarnessError::Config(format!("trace: {m}"));
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let n = header.iter().filter(|h| h.starts_with("code_")).count();
    if header.iter().collect::<Vec<_>>() != trace_header(n) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| bad(format!("{}: {e}", field(i))))
        };
        let code = |i: usize| {
            field(i)
                .parse::<u8>()
                .map_err(|e| bad(format!("{}: {e}", field(i))))
        };
        let mut row = TraceRow {
            tick: field(0).parse().map_err(|e| bad(format!("tick: {e}")))?,
            radius_m: num(1)?,
            codes: Vec::with_capacity(n),
            perturbed: Vec::with_capacity(n),
            objective_q: field(2 + 2 * n)
                .parse()
                .map_err(|e| bad(format!("objective_q: {e}")))?,
            demod: Vec::with_capacity(n),
            accumulator: Vec::with_capacity(n),
            error_deg: num(3 + 2 * n)?,
        };
        for i in 0..n {
            row.codes.push(code(2 + i)?);
            row.perturbed.push(code(2 + n + i)?);
            row.demod.push(num(4 + 2 * n + i)?);
            row.accumulator.push(num(4 + 3 * n + i)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_trace_file(path: &Path, trace: &[TraceRow]) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_trace(std::io::BufWriter::new(f), trace).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFile {
    pub start_tick: u64,
    pub detected_tick: u64,
    pub settled_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub final_error_deg: f64,
    pub uncompensated_error_deg: f64,
    pub below_1_25_deg: bool,
    pub converged: bool,
    pub ticks_to_converge: Option<u64>,
    pub saturation_count: u32,
    pub episodes: Vec<EpisodeFile>,
    pub initial_codes: Vec<u8>,
    pub final_codes: Vec<u8>,
    pub final_radius_m: Radius,
    pub ticks_run: u64,
    pub config: ScenarioFile,
}

impl SummaryFile {
    pub fn new(s: &RunSummary, config: ScenarioFile) -> Self {
        SummaryFile {
            final_error_deg: s.final_error_deg,
            uncompensated_error_deg: s.uncompensated_error_deg,
            below_1_25_deg: s.final_error_deg < 1.25,
            converged: s.converged,
            ticks_to_converge: s.ticks_to_converge,
            saturation_count: s.saturation_count,
            episodes: s
                .episodes
                .iter()
                .map(|e| EpisodeFile {
                    start_tick: e.start_tick,
                    detected_tick: e.detected_tick,
                    settled_tick: e.settled_tick,
                })
                .collect(),
            initial_codes: s.initial_codes.clone(),
            final_codes: s.final_codes.clone(),
            final_radius_m: Radius(s.final_radius_m),
            ticks_run: s.ticks_run,
            config,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::io(path, e))?;
    writeln!(w).map_err(|e| HarnessError::io(path, e))
}

/// Writes a header and float rows.
pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
    w.write_record(header)
        .map_err(|e| HarnessError::io(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
