//! Parallel phase-transition sweeps.
//!
//! Results CSV columns, one row per `(cell, trial, method)`:
//!
//! `k, p, alpha, rho, trial, method, err, objective, recovered, converged,
//! beta_fro2, iterations, certified_bound, certified_recovered,
//! sdp_objective, error`
//!
//! Optional columns are empty when a method does not produce them. Rows are
//! sorted by `(k, p, alpha, rho, trial, method)` before the final write, so
//! the file depends only on the config. Wall-clock times go to
//! `<output>.timing.csv` (same key columns plus `runtime_ms`).

use std::cmp::Ordering;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use kclust_core::experiment::{run_trial, Method, TrialRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SweepConfig;
use crate::io::write_atomic;

/// One results row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub p: usize,
    pub alpha: f64,
    pub rho: f64,
    pub trial: usize,
    pub method: Method,
    pub err: f64,
    pub objective: f64,
    pub recovered: bool,
    pub converged: bool,
    pub beta_fro2: f64,
    pub iterations: usize,
    pub certified_bound: Option<f64>,
    pub certified_recovered: Option<bool>,
    pub sdp_objective: Option<f64>,
    pub error: Option<String>,
}

impl From<TrialRecord> for SweepRow {
    fn from(r: TrialRecord) -> Self {
        SweepRow {
            k: r.k,
            p: r.p,
            alpha: r.alpha,
            rho: r.rho,
            trial: r.trial,
            method: r.method,
            err: r.err,
            objective: r.objective,
            recovered: r.recovered,
            converged: r.converged,
            beta_fro2: r.beta_fro2,
            iterations: r.iterations,
            certified_bound: r.certified_bound,
            certified_recovered: r.certified_recovered,
            sdp_objective: r.sdp_objective,
            error: r.error,
        }
    }
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.k
            .cmp(&other.k)
            .then(self.p.cmp(&other.p))
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.rho.total_cmp(&other.rho))
            .then(self.trial.cmp(&other.trial))
            .then(self.method.cmp(&other.method))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub k: usize,
    pub p: usize,
    pub alpha: f64,
    pub rho: f64,
    pub trial: usize,
    pub method: Method,
    /// Includes sampling the instance and building its kernel.
    pub runtime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub timings: Vec<TimingRow>,
    pub failures: usize,
}

/// `<output>.<suffix>`
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn run_one(spec: &kclust_core::experiment::TrialSpec, methods: &[Method], cfg: &SweepConfig) -> Vec<(SweepRow, TimingRow)> {
    methods
        .iter()
        .map(|&m| {
            let t0 = Instant::now();
            let rec = run_trial(spec, &[m], &cfg.solver).pop().expect("one record per method");
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            let timing = TimingRow { k: rec.k, p: rec.p, alpha: rec.alpha, rho: rec.rho, trial: rec.trial, method: m, runtime_ms: ms };
            (SweepRow::from(rec), timing)
        })
        .collect()
}

/// Runs the sweep in memory. `sink` sees every row as soon as its trial
/// finishes, in completion order.
pub fn run_sweep_with(cfg: &SweepConfig, workers: usize, sink: impl Fn(&[SweepRow]) + Sync) -> Result<SweepOutcome> {
    let specs = cfg.trial_specs();
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let pool = crate::pool(workers)?;
    let results: Vec<(SweepRow, TimingRow)> = pool.install(|| {
        specs
            .par_iter()
            .flat_map_iter(|spec| {
                let out = run_one(spec, &methods, cfg);
                let rows: Vec<SweepRow> = out.iter().map(|o| o.0.clone()).collect();
                sink(&rows);
                out
            })
            .collect()
    });
    let (mut rows, mut timings): (Vec<SweepRow>, Vec<TimingRow>) = results.into_iter().unzip();
    rows.sort_by(|a, b| a.key_cmp(b));
    timings.sort_by(|a, b| {
        a.k.cmp(&b.k)
            .then(a.p.cmp(&b.p))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.trial.cmp(&b.trial))
            .then(a.method.cmp(&b.method))
    });
    let failures = rows.iter().filter(|r| r.failed()).count();
    Ok(SweepOutcome { rows, timings, failures })
}

pub fn run_sweep_in_memory(cfg: &SweepConfig, workers: usize) -> Result<SweepOutcome> {
    run_sweep_with(cfg, workers, |_| {})
}

/// Runs the sweep and writes `cfg.output`. Rows are appended to
/// `<output>.partial` as trials finish; the sorted file replaces it at the
/// end.
pub fn run_sweep(cfg: &SweepConfig, workers: usize) -> Result<SweepOutcome> {
    let partial = with_suffix(&cfg.output, "partial");
    let file = File::create(&partial).with_context(|| format!("creating {}", partial.display()))?;
    let writer = Mutex::new(csv::Writer::from_writer(BufWriter::new(file)));
    let outcome = run_sweep_with(cfg, workers, |rows| {
        let mut w = writer.lock().expect("writer lock");
        for r in rows {
            // a failed partial write only loses progress information
            let _ = w.serialize(r);
        }
        let _ = w.flush();
    })?;
    drop(writer);
    write_rows(&cfg.output, &outcome.rows)?;
    write_atomic(&with_suffix(&cfg.output, "timing.csv"), |w| {
        let mut wr = csv::Writer::from_writer(w);
        for t in &outcome.timings {
            wr.serialize(t)?;
        }
        wr.flush()?;
        Ok(())
    })?;
    fs::remove_file(&partial).ok();
    Ok(outcome)
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_atomic(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        for r in rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    })
}

pub fn read_rows_from<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, row) in rd.deserialize().enumerate() {
        rows.push(row.with_context(|| format!("row {}", i + 1))?);
    }
    Ok(rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_rows_from(f).with_context(|| format!("reading {}", path.display()))
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    for r in rows {
        wr.serialize(r)?;
    }
    let mut buf = wr.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    buf.flush()?;
    Ok(buf)
}
