use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Flavor;
use crate::protocol::{Reception, Topology, TransmissionRecord};
use crate::solver::SolverKind;

use super::StrategyKind;

pub const CSV_HEADER: [&str; 9] = [
    "M",
    "topology",
    "flavor",
    "strategy",
    "solver",
    "mean_cd",
    "stddev",
    "ci95",
    "iterations",
];

#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub m: usize,
    pub topology: Topology,
    pub flavor: Flavor,
    pub strategy: StrategyKind,
    pub solver: SolverKind,
    pub mean_cd: f64,
    pub stddev: f64,
    pub ci95: f64,
    pub iterations: usize,
}

impl StatsRow {
    fn fields(&self) -> [String; 9] {
        [
            self.m.to_string(),
            self.topology.label().to_string(),
            self.flavor.label().to_string(),
            self.strategy.label().to_string(),
            self.solver.label().to_string(),
            format!("{:.6}", self.mean_cd),
            format!("{:.6}", self.stddev),
            format!("{:.6}", self.ci95),
            self.iterations.to_string(),
        ]
    }
}

fn write_rows<W: Write>(w: W, rows: &[StatsRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.write_record(row.fields())?;
    }
    out.flush()?;
    Ok(())
}

/// The stats table as CSV text.
pub fn emit_csv(rows: &[StatsRow]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

pub fn write_csv(rows: &[StatsRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Input("no stats rows to write".into()));
    }
    write_rows(std::fs::File::create(path)?, rows)
}

fn field<T>(rec: &csv::StringRecord, i: usize, parse: impl FnOnce(&str) -> Option<T>) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    parse(raw).ok_or_else(|| Error::Input(format!("bad {} field '{raw}'", CSV_HEADER[i])))
}

pub fn parse_csv<R: Read>(r: R) -> Result<Vec<StatsRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Input(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Input(format!("row has {} fields", rec.len())));
        }
        rows.push(StatsRow {
            m: field(&rec, 0, |s| s.parse().ok())?,
            topology: field(&rec, 1, |s| s.parse().ok())?,
            flavor: field(&rec, 2, |s| s.parse().ok())?,
            strategy: field(&rec, 3, |s| s.parse().ok())?,
            solver: field(&rec, 4, |s| s.parse().ok())?,
            mean_cd: field(&rec, 5, |s| s.parse().ok())?,
            stddev: field(&rec, 6, |s| s.parse().ok())?,
            ci95: field(&rec, 7, |s| s.parse().ok())?,
            iterations: field(&rec, 8, |s| s.parse().ok())?,
        });
    }
    Ok(rows)
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

/// Transmission log rows. Receptions hold one character per feedback
/// matrix row: `1` received, `0` erased, `-` not listening.
pub fn write_log_csv<W: Write>(
    w: W,
    runs: &[(String, &[TransmissionRecord])],
) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(["run_id", "t", "phase", "sender", "payload", "targets", "receptions"])?;
    for (run_id, log) in runs {
        for rec in log.iter() {
            let receptions: String = rec
                .receptions
                .iter()
                .map(|r| match r {
                    Reception::Received => '1',
                    Reception::Erased => '0',
                    Reception::NotListening => '-',
                })
                .collect();
            out.write_record([
                run_id.clone(),
                rec.t.to_string(),
                rec.phase.label().to_string(),
                rec.sender.to_string(),
                join(rec.payload.iter().map(|p| p.0)),
                join(&rec.targeted_primary),
                receptions,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
