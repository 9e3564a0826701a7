//! Sweep configuration (a single JSON document).

use std::path::{Path, PathBuf};

use kclust_core::experiment::{Method, SolverOptions, TrialSpec};
use kclust_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::InvalidConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub k: Vec<usize>,
    pub p: Vec<usize>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { k: vec![2], p: vec![300], alpha: vec![2.0], rho: vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: Grid,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Constant in kappa.
    pub c0: f64,
    /// Constant in gamma_max / gamma_min.
    pub c_gamma: f64,
    pub output: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: Grid::default(),
            trials: 100,
            methods: vec![Method::KmeansLloyd, Method::SdpRounded],
            seed: 0,
            solver: SolverOptions::default(),
            c0: 1.0,
            c_gamma: 1.0,
            output: PathBuf::from("sweep.csv"),
        }
    }
}

fn check_list<T>(name: &str, v: &[T]) -> Result<(), InvalidConfig> {
    if v.is_empty() {
        Err(InvalidConfig(format!("grid.{name} is empty")))
    } else {
        Ok(())
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, InvalidConfig> {
        serde_json::from_str(text).map_err(|e| InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, InvalidConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| InvalidConfig(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_json(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), InvalidConfig> {
        if self.trials == 0 {
            return Err(InvalidConfig("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(InvalidConfig("no methods selected".into()));
        }
        let g = &self.grid;
        check_list("k", &g.k)?;
        check_list("p", &g.p)?;
        check_list("alpha", &g.alpha)?;
        check_list("rho", &g.rho)?;
        for &rho in &g.rho {
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(InvalidConfig(format!("rho = {rho} must be non-negative and finite")));
            }
        }
        for &k in &g.k {
            for &p in &g.p {
                for &alpha in &g.alpha {
                    let params = ModelParams { c0: self.c0, c_gamma: self.c_gamma, ..ModelParams::new(k, p, alpha, 0.0, 0) };
                    params.validate().map_err(|e| InvalidConfig(format!("cell k={k} p={p} alpha={alpha}: {e}")))?;
                }
            }
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || s.max_iter == 0 || s.restarts == 0 || s.lloyd_max_iter == 0 || !(s.eta >= 1.0) {
            return Err(InvalidConfig("solver options need tol > 0, max_iter, restarts, lloyd_max_iter >= 1 and eta >= 1".into()));
        }
        Ok(())
    }

    /// Every `(cell, trial)` in grid order: k, p, alpha, rho, trial.
    pub fn trial_specs(&self) -> Vec<TrialSpec> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.k.len() * g.p.len() * g.alpha.len() * g.rho.len() * self.trials);
        for &k in &g.k {
            for &p in &g.p {
                for &alpha in &g.alpha {
                    for &rho in &g.rho {
                        for trial in 0..self.trials {
                            out.push(TrialSpec { k, p, alpha, rho, trial, seed: self.seed, c0: self.c0, c_gamma: self.c_gamma });
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = SweepConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(SweepConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(cfg.trial_specs().len(), 7 * 100);
    }

    #[test]
    fn partial_documents_use_defaults() {
        let cfg = SweepConfig::from_json(r#"{"trials": 3, "grid": {"rho": [1.0]}}"#).unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.grid.p, vec![300]);
        assert_eq!(cfg.trial_specs().len(), 3);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"trials": 0}"#,
            r#"{"methods": []}"#,
            r#"{"grid": {"k": [3], "p": [10], "alpha": [1.0]}}"#,
            r#"{"grid": {"rho": [-1.0]}}"#,
            r#"{"grid": {"p": []}}"#,
        ];
        for b in bad {
            assert!(SweepConfig::from_json(b).unwrap().validate().is_err(), "{b}");
        }
        assert!(SweepConfig::from_json(r#"{"methods": ["nope"]}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }
}
