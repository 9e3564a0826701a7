//! File formats, parallel sweeps and the `kclust` command line on top of
//! `kclust-core`.

pub mod bench;
pub mod config;
pub mod io;
pub mod summarize;
pub mod sweep;

/// Environment variable read for the worker count when no flag is given.
pub const WORKERS_ENV: &str = "KCLUST_WORKERS";

/// A configuration that cannot be run. The CLI exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("invalid config: {0}")]
pub struct InvalidConfig(pub String);

/// Worker count from `flag`, then `KCLUST_WORKERS`, then the number of CPUs.
pub fn worker_count(flag: Option<usize>) -> Result<usize, InvalidConfig> {
    if let Some(n) = flag {
        return if n == 0 { Err(InvalidConfig("worker count must be at least 1".into())) } else { Ok(n) };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(InvalidConfig(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub(crate) fn pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}
