//! Parallel runs of the concentration bench.
//!
//! CSV columns: `lemma, k, p, alpha, rho, trial, statistic,
//! bound_shape_value, fitted_constant`, where the fitted constant is the
//! one of the row's `(lemma, cell)` group.

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use kclust_core::concentration::{run_bench_trial, summarize_bench, BenchCell, BenchConfig, BenchRow, LemmaSummary};
use rayon::prelude::*;
use serde::Serialize;

use crate::io::write_atomic;
use crate::InvalidConfig;

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<LemmaSummary>,
}

pub fn validate(cfg: &BenchConfig) -> Result<(), InvalidConfig> {
    if cfg.trials == 0 {
        return Err(InvalidConfig("trials must be at least 1".into()));
    }
    if cfg.grid.is_empty() || cfg.lemmas.is_empty() {
        return Err(InvalidConfig("bench grid and lemma list must be non-empty".into()));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        return Err(InvalidConfig(format!("eps = {} must lie in (0, 1)", cfg.eps)));
    }
    for c in &cfg.grid {
        kclust_core::ModelParams::new(c.k, c.p, c.alpha, c.rho, 0)
            .validate()
            .map_err(|e| InvalidConfig(format!("cell k={} p={} alpha={} rho={}: {e}", c.k, c.p, c.alpha, c.rho)))?;
    }
    Ok(())
}

/// Accepts either a whole bench config or a bare list of cells.
pub fn parse_grid(text: &str) -> Result<BenchConfig, InvalidConfig> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| InvalidConfig(e.to_string()))?;
    if value.is_array() {
        let grid: Vec<BenchCell> = serde_json::from_value(value).map_err(|e| InvalidConfig(e.to_string()))?;
        Ok(BenchConfig { grid, ..BenchConfig::default() })
    } else {
        serde_json::from_value(value).map_err(|e| InvalidConfig(e.to_string()))
    }
}

pub fn run_bench(cfg: &BenchConfig, workers: usize) -> Result<BenchOutcome> {
    validate(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.grid.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let pool = crate::pool(workers)?;
    let chunks: Vec<Vec<BenchRow>> =
        pool.install(|| jobs.par_iter().map(|&(c, t)| run_bench_trial(cfg, c, t)).collect::<kclust_core::Result<_>>())?;
    let mut rows: Vec<BenchRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.lemma.cmp(&b.lemma).then(a.cell.cmp(&b.cell)).then(a.trial.cmp(&b.trial)));
    let summaries = summarize_bench(&rows);
    Ok(BenchOutcome { rows, summaries })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    lemma: &'a str,
    k: usize,
    p: usize,
    alpha: f64,
    rho: f64,
    trial: usize,
    statistic: f64,
    bound_shape_value: f64,
    fitted_constant: f64,
}

pub fn write_bench_csv<W: Write>(w: W, out: &BenchOutcome) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in &out.rows {
        let fitted = out
            .summaries
            .iter()
            .find(|s| s.lemma == r.lemma && s.cell == r.cell)
            .map_or(f64::NAN, |s| s.fitted_constant);
        wr.serialize(CsvRow {
            lemma: r.lemma.name(),
            k: r.k,
            p: r.p,
            alpha: r.alpha,
            rho: r.rho,
            trial: r.trial,
            statistic: r.statistic,
            bound_shape_value: r.bound_shape_value,
            fitted_constant: fitted,
        })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_bench(path: &Path, out: &BenchOutcome) -> Result<()> {
    write_atomic(path, |w| write_bench_csv(w, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use kclust_core::concentration::LemmaKind;

    fn small() -> BenchConfig {
        BenchConfig {
            grid: vec![BenchCell { k: 2, p: 40, alpha: 0.5, rho: 1.0 }],
            lemmas: vec![LemmaKind::InnerProductMax, LemmaKind::Q4, LemmaKind::Q1Truth],
            trials: 4,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn independent_of_workers() {
        let a = run_bench(&small(), 1).unwrap();
        let b = run_bench(&small(), 3).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 12);
        assert_eq!(a.summaries.len(), 3);
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lemma,k,p,alpha,rho,trial,statistic,bound_shape_value,fitted_constant\n"));
        assert_eq!(text.lines().count(), 13);
    }

    #[test]
    fn grid_forms() {
        let cfg = parse_grid(r#"[{"k": 2, "p": 100, "alpha": 1.0, "rho": 1.0}]"#).unwrap();
        assert_eq!(cfg.grid.len(), 1);
        let cfg = parse_grid(r#"{"trials": 7}"#).unwrap();
        assert_eq!(cfg.trials, 7);
        assert!(parse_grid("[1, 2]").is_err());
        assert!(validate(&BenchConfig { trials: 0, ..BenchConfig::default() }).is_err());
    }
}
