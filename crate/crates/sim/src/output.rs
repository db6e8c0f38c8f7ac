//! Analysis of a finished run and the files written for it.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::metrics::{self, ChainRow, MetricRecord, StabilityReport, StageRecord, ThroughputRow};
use crate::net::RunOutcome;
use crate::observer::{observe, Violation};

pub struct Analysis {
    pub stages: Vec<StageRecord>,
    pub records: Vec<MetricRecord>,
    pub throughput: Vec<ThroughputRow>,
    pub chains: Vec<ChainRow>,
    pub stability: Result<StabilityReport, metrics::InsufficientData>,
    pub violations: Vec<Violation>,
}

impl Analysis {
    pub fn of(run: &RunOutcome) -> Self {
        let stages = metrics::decompose_latency(run);
        let records = metrics::tx_records(run, &stages);
        Analysis {
            throughput: metrics::throughput(&records),
            chains: metrics::chain_rows(run),
            stability: metrics::stability_report(&records, run.config.continuity_k),
            violations: observe(run),
            stages,
            records,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    for line in header {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut file, r)?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

pub fn report_json(run: &RunOutcome, a: &Analysis) -> serde_json::Value {
    let cfg = &run.config;
    json!({
        "name": cfg.name,
        "seed": cfg.seed,
        "mode": cfg.mode.name(),
        "n": cfg.params.n(),
        "f": cfg.params.f(),
        "instances": cfg.num_instances,
        "events": run.log.len(),
        "end_time": run.end_time,
        "passed": a.passed(),
        "violations": a.violations,
        "stability": match &a.stability {
            Ok(s) => json!(s),
            Err(e) => json!({"error": e.to_string()}),
        },
    })
}

/// Writes the selected metric files and `report.json` into `dir`.
pub fn write_outputs(dir: &Path, run: &RunOutcome, a: &Analysis) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let cfg = &run.config;
    if cfg.wants("events") {
        let mut f = BufWriter::new(File::create(dir.join("events.jsonl"))?);
        run.log.write_jsonl(&mut f)?;
        f.flush()?;
    }
    if cfg.wants("latency") {
        write_csv(&dir.join("metrics.csv"), &[], &a.records)?;
        write_jsonl(&dir.join("metrics.jsonl"), &a.records)?;
    }
    if cfg.wants("stages") {
        write_csv(&dir.join("stages.csv"), &metrics::STAGE_DEFINITIONS, &a.stages)?;
    }
    if cfg.wants("throughput") {
        write_csv(&dir.join("throughput.csv"), &[], &a.throughput)?;
    }
    if cfg.wants("chains") {
        write_csv(&dir.join("chains.csv"), &[], &a.chains)?;
    }
    let mut f = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut f, &report_json(run, a))?;
    f.write_all(b"\n")?;
    f.flush()
}
