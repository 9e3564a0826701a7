//! A single sweep trial: generate an instance, run the requested methods,
//! score them against the truth. Timing and IO are left to the caller.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kernel::gram_from_points;
use crate::kmeans::{exhaustive_balanced_capped, lloyd_balanced_with, DEFAULT_EXHAUSTIVE_CAP, DEFAULT_MAX_ITER, DEFAULT_RESTARTS};
use crate::linalg::Matrix;
use crate::metrics::{kernel_objective, misclassification, overlap_matrix, overlap_similarity};
use crate::model::{sample_dataset, Dataset, ModelParams, Partition};
use crate::rng;
use crate::rounding::{round_and_certify, DEFAULT_ETA};
use crate::sdp::{solve_sdp, SdpOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KmeansLloyd,
    KmeansExhaustive,
    SdpRounded,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::KmeansLloyd, Method::KmeansExhaustive, Method::SdpRounded];

    pub fn name(self) -> &'static str {
        match self {
            Method::KmeansLloyd => "kmeans_lloyd",
            Method::KmeansExhaustive => "kmeans_exhaustive",
            Method::SdpRounded => "sdp_rounded",
        }
    }

    pub fn from_name(s: &str) -> Option<Method> {
        Method::ALL.iter().copied().find(|m| m.name() == s)
    }

    fn key(self) -> u64 {
        match self {
            Method::KmeansLloyd => 1,
            Method::KmeansExhaustive => 2,
            Method::SdpRounded => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// SDP residual tolerance.
    pub tol: f64,
    /// SDP iteration cap.
    pub max_iter: usize,
    /// Lloyd restarts.
    pub restarts: usize,
    pub lloyd_max_iter: usize,
    pub exhaustive_cap: usize,
    /// Approximation factor in the rounding certificate.
    pub eta: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-3,
            max_iter: SdpOptions::default().max_iter,
            restarts: DEFAULT_RESTARTS,
            lloyd_max_iter: DEFAULT_MAX_ITER,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            eta: DEFAULT_ETA,
        }
    }
}

/// One `(cell, trial)` of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub k: usize,
    pub p: usize,
    pub alpha: f64,
    pub rho: f64,
    pub trial: usize,
    /// Sweep seed; per-trial streams are derived from it.
    pub seed: u64,
    pub c0: f64,
    pub c_gamma: f64,
}

impl TrialSpec {
    /// Dataset seed, a function of the cell parameters and the trial only,
    /// so reordering or extending the grid leaves existing trials intact.
    pub fn dataset_seed(&self) -> u64 {
        rng::derive(
            self.seed,
            &[0x7472_6961_6c, self.k as u64, self.p as u64, self.alpha.to_bits(), self.rho.to_bits(), self.trial as u64],
        )
    }

    pub fn params(&self) -> ModelParams {
        ModelParams { c0: self.c0, c_gamma: self.c_gamma, ..ModelParams::new(self.k, self.p, self.alpha, self.rho, self.dataset_seed()) }
    }

    fn method_seed(&self, method: Method) -> u64 {
        rng::derive(self.dataset_seed(), &[method.key()])
    }
}

/// Outcome of one method on one trial. Failures keep `converged = false`
/// and carry the message in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub k: usize,
    pub p: usize,
    pub alpha: f64,
    pub rho: f64,
    pub trial: usize,
    pub method: Method,
    pub err: f64,
    /// `F(sigma)` of the returned partition (unnormalised).
    pub objective: f64,
    /// `err < 1 - 1/k`
    pub recovered: bool,
    pub converged: bool,
    pub beta_fro2: f64,
    pub iterations: usize,
    /// Rounding certificate `2 (1 + 2 eta) ||X^ - X*||_1 / ||X*||_1` (SDP only).
    pub certified_bound: Option<f64>,
    pub certified_recovered: Option<bool>,
    /// `<K, X^>` (SDP only).
    pub sdp_objective: Option<f64>,
    pub error: Option<String>,
}

impl TrialRecord {
    fn blank(spec: &TrialSpec, method: Method) -> Self {
        TrialRecord {
            k: spec.k,
            p: spec.p,
            alpha: spec.alpha,
            rho: spec.rho,
            trial: spec.trial,
            method,
            err: f64::NAN,
            objective: f64::NAN,
            recovered: false,
            converged: false,
            beta_fro2: f64::NAN,
            iterations: 0,
            certified_bound: None,
            certified_recovered: None,
            sdp_objective: None,
            error: None,
        }
    }

    fn failed(spec: &TrialSpec, method: Method, msg: String) -> Self {
        TrialRecord { error: Some(msg), ..TrialRecord::blank(spec, method) }
    }
}

/// Strictly better than chance, with a guard against round-off at the
/// boundary.
pub fn recovered_from_err(err: f64, k: usize) -> bool {
    err < 1.0 - 1.0 / k as f64 - 1e-12
}

fn score(rec: &mut TrialRecord, k_mat: &Matrix, sigma: &Partition, truth: &Partition) -> crate::Result<()> {
    rec.err = misclassification(sigma, truth)?;
    rec.beta_fro2 = overlap_similarity(&overlap_matrix(sigma, truth)?);
    rec.objective = kernel_objective(k_mat, sigma);
    rec.recovered = recovered_from_err(rec.err, truth.k());
    Ok(())
}

fn run_method(spec: &TrialSpec, ds: &Dataset, k_mat: &Matrix, method: Method, opts: &SolverOptions) -> crate::Result<TrialRecord> {
    let mut rec = TrialRecord::blank(spec, method);
    let k = spec.k;
    let mut r = rng::stream(spec.method_seed(method), &[]);
    match method {
        Method::KmeansLloyd => {
            let rep = lloyd_balanced_with(k_mat, k, opts.restarts, opts.lloyd_max_iter, &mut r)?;
            rec.iterations = rep.iterations;
            rec.converged = true;
            score(&mut rec, k_mat, &rep.best_partition, &ds.truth)?;
        }
        Method::KmeansExhaustive => {
            let rep = exhaustive_balanced_capped(k_mat, k, opts.exhaustive_cap)?;
            rec.iterations = rep.iterations;
            rec.converged = true;
            score(&mut rec, k_mat, &rep.best_partition, &ds.truth)?;
        }
        Method::SdpRounded => {
            let sdp_opts = SdpOptions { tol: opts.tol, max_iter: opts.max_iter, feas_tol: None, ..SdpOptions::default() };
            let sol = solve_sdp(k_mat, k, &sdp_opts)?;
            rec.iterations = sol.iterations;
            rec.converged = sol.converged;
            rec.sdp_objective = Some(sol.objective);
            let rep = round_and_certify(&sol.x_hat, &ds.truth, opts.eta, &mut r)?;
            rec.certified_bound = Some(rep.certified_err_bound);
            rec.certified_recovered = Some(rep.certified_recovery);
            score(&mut rec, k_mat, &rep.partition, &ds.truth)?;
            if !sol.converged {
                rec.error = Some(format!(
                    "sdp stopped after {} iterations (primal {:.2e}, dual {:.2e})",
                    sol.iterations, sol.primal_residual, sol.dual_residual
                ));
            }
        }
    }
    Ok(rec)
}

/// Runs `methods` on the trial's dataset. Never fails: problems are
/// recorded per method.
pub fn run_trial(spec: &TrialSpec, methods: &[Method], opts: &SolverOptions) -> Vec<TrialRecord> {
    let ds = match sample_dataset(&spec.params()) {
        Ok(ds) => ds,
        Err(e) => return methods.iter().map(|&m| TrialRecord::failed(spec, m, e.to_string())).collect(),
    };
    let k_mat = gram_from_points(&ds.points);
    methods
        .iter()
        .map(|&m| run_method(spec, &ds, &k_mat, m, opts).unwrap_or_else(|e| TrialRecord::failed(spec, m, e.to_string())))
        .collect()
}
