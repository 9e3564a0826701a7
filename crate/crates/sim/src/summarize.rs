//! Phase tables from sweep results.

use std::fmt::Write as _;
use std::io::Write;

use anyhow::{bail, Result};
use kclust_core::experiment::Method;
use kclust_core::phase::{curve_isotonic_residual, curve_rho50, recovery_curve, CrossingFlag, CurvePoint};
use kclust_core::thresholds::{thresholds, ThresholdSet};
use serde::{Deserialize, Serialize};

use crate::sweep::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Below,
    At,
    Above,
}

/// Where the estimated crossing sits relative to one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPosition {
    pub name: String,
    pub value: f64,
    pub side: Side,
    /// `rho50 / value`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub k: usize,
    pub p: usize,
    pub alpha: f64,
    pub method: Method,
    pub rho50: f64,
    pub flag: CrossingFlag,
    pub isotonic_residual: f64,
    pub thresholds: ThresholdSet,
    pub positions: Vec<ThresholdPosition>,
    pub curve: Vec<CurvePoint>,
}

fn position(name: &str, value: f64, rho50: f64) -> ThresholdPosition {
    let side = if rho50 < value {
        Side::Below
    } else if rho50 > value {
        Side::Above
    } else {
        Side::At
    };
    ThresholdPosition { name: name.to_string(), value, side, ratio: rho50 / value }
}

/// Groups rows by `(k, p, alpha, method)`, builds recovery curves and
/// locates the 50% crossings. `c` is the constant of the SDP threshold.
pub fn summarize(rows: &[SweepRow], c: f64) -> Result<Vec<PhaseEntry>> {
    if rows.is_empty() {
        bail!("no sweep rows to summarise");
    }
    let mut keys: Vec<(usize, usize, f64, Method)> = rows.iter().map(|r| (r.k, r.p, r.alpha, r.method)).collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)));
    keys.dedup();
    let mut out = Vec::with_capacity(keys.len());
    for (k, p, alpha, method) in keys {
        let obs: Vec<(f64, bool)> = rows
            .iter()
            .filter(|r| r.k == k && r.p == p && r.alpha == alpha && r.method == method)
            .map(|r| (r.rho, r.recovered))
            .collect();
        let curve = recovery_curve(&obs);
        let crossing = curve_rho50(&curve)?;
        let t = thresholds(k, alpha, c)?;
        let positions = vec![
            position("rho_lower_np", t.rho_lower_np, crossing.rho50),
            position("rho_lower_p", t.rho_lower_p, crossing.rho50),
            position("rho_upper_kernel_np", t.rho_upper_kernel_np, crossing.rho50),
            position("rho_upper_kernel_p", t.rho_upper_kernel_p, crossing.rho50),
        ];
        out.push(PhaseEntry {
            k,
            p,
            alpha,
            method,
            rho50: crossing.rho50,
            flag: crossing.flag,
            isotonic_residual: curve_isotonic_residual(&curve),
            thresholds: t,
            positions,
            curve,
        });
    }
    Ok(out)
}

pub fn find<'a>(entries: &'a [PhaseEntry], k: usize, p: usize, alpha: f64, method: Method) -> Option<&'a PhaseEntry> {
    entries.iter().find(|e| e.k == k && e.p == p && e.alpha == alpha && e.method == method)
}

#[derive(Debug, Serialize)]
struct CurveRow<'a> {
    k: usize,
    p: usize,
    alpha: f64,
    method: &'a str,
    rho: f64,
    trials: usize,
    recovered: usize,
    recovery_fraction: f64,
    wilson_ci_lo: f64,
    wilson_ci_hi: f64,
    isotonic: f64,
}

/// All curves as one CSV.
pub fn write_curves_csv<W: Write>(w: W, entries: &[PhaseEntry]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for e in entries {
        for c in &e.curve {
            wr.serialize(CurveRow {
                k: e.k,
                p: e.p,
                alpha: e.alpha,
                method: e.method.name(),
                rho: c.rho,
                trials: c.trials,
                recovered: c.recovered,
                recovery_fraction: c.fraction,
                wilson_ci_lo: c.wilson_lo,
                wilson_ci_hi: c.wilson_hi,
                isotonic: c.isotonic,
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

fn block_title(e: &PhaseEntry) -> String {
    format!("{} k={} p={} alpha={}", e.method.name(), e.k, e.p, e.alpha)
}

/// gnuplot data: one indexed block per curve with columns
/// `rho recovery_fraction wilson_ci_lo wilson_ci_hi`.
pub fn gnuplot_data(entries: &[PhaseEntry]) -> String {
    let mut s = String::new();
    for (i, e) in entries.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# {} rho50={} ({:?})", block_title(e), e.rho50, e.flag);
        s.push_str("# rho recovery_fraction wilson_ci_lo wilson_ci_hi\n");
        for c in &e.curve {
            let _ = writeln!(s, "{} {} {} {}", c.rho, c.fraction, c.wilson_lo, c.wilson_hi);
        }
    }
    s
}

/// Script plotting every block of `data_file` with error bars.
pub fn gnuplot_script(data_file: &str, entries: &[PhaseEntry]) -> String {
    let mut s = String::new();
    s.push_str("set xlabel 'rho'\nset ylabel 'recovery fraction'\nset yrange [0:1.05]\nset key left top\n");
    let plots: Vec<String> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| format!("'{data_file}' index {i} using 1:2:3:4 with yerrorlines title '{}'", block_title(e)))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}
