//! `ucore-demo`: runs pi, vectoradd or wordcount on in-process workers or
//! on TCP workers that connect to this process.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use ucore::apps::{pi, standard_registry, vectoradd, wordcount};
use ucore::cluster::{Dispatch, Driver, DriverConfig, LocalCluster, WorkerSpec};
use ucore::engine::{Engine, EngineConfig, EngineError, JobLog};
use ucore::kernel::ExecutionMode;

use crate::exit;

#[derive(Debug, Clone, Parser)]
#[command(name = "ucore-demo", version, about = "Run a demo application on a ucore cluster")]
pub struct DemoArgs {
    #[command(subcommand)]
    pub demo: Demo,
    /// Spawn N in-process workers (the default, with N = 1).
    #[arg(long, global = true, value_name = "N", conflicts_with = "master")]
    pub local: Option<usize>,
    /// Device types of the local workers, comma separated and cycled.
    #[arg(long, global = true, value_delimiter = ',', default_value = "cpu")]
    pub local_device: Vec<ExecutionMode>,
    /// Cores of each local worker.
    #[arg(long, global = true, default_value_t = 1)]
    pub local_cores: u32,
    /// Listen on this address and wait for `--workers` TCP workers.
    #[arg(long, global = true, value_name = "ADDR")]
    pub master: Option<String>,
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Seconds to wait for TCP workers to register.
    #[arg(long, global = true, default_value_t = 60)]
    pub wait_secs: u64,
    /// Append one JSON line per task to this file.
    #[arg(long, global = true)]
    pub job_log: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = EngineConfig::default().min_device_elements)]
    pub min_device_elements: u64,
    #[arg(long, global = true, default_value_t = EngineConfig::default().min_device_bytes)]
    pub min_device_bytes: u64,
    /// Preferred device type attached to every task (advisory).
    #[arg(long, global = true)]
    pub mode_hint: Option<ExecutionMode>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Demo {
    /// Monte Carlo pi estimate; prints `pi=<estimate>`.
    Pi {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 8)]
        tasks: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// mapcl, mapclpartition or host.
        #[arg(long, default_value = "mapcl")]
        variant: pi::PiVariant,
    },
    /// Tree-reduced vector sum; prints `checksum=<sum>`.
    Vectoradd {
        #[arg(long, default_value_t = 1 << 20)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        partitions: usize,
    },
    /// Word counts as `word<TAB>count` lines.
    Wordcount {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = wordcount::DEFAULT_CHUNK_BYTES)]
        chunk_bytes: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Job(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl DemoError {
    pub fn exit_code(&self) -> u8 {
        match self {
            DemoError::Usage(_) => exit::USAGE,
            DemoError::Job(_) => exit::JOB_FAILED,
            DemoError::Runtime(_) | DemoError::Io(_) => exit::RUNTIME,
        }
    }
}

impl DemoArgs {
    pub fn validate(&self) -> Result<(), DemoError> {
        let usage = |m: String| Err(DemoError::Usage(m));
        if self.local == Some(0) {
            return usage("--local needs at least one worker".into());
        }
        if self.master.is_some() && self.workers == 0 {
            return usage("--workers must be at least 1".into());
        }
        if self.local_cores == 0 {
            return usage("--local-cores must be at least 1".into());
        }
        match &self.demo {
            Demo::Pi { samples, tasks, .. } if *tasks == 0 || samples < tasks => usage(format!(
                "pi needs samples >= tasks >= 1 (got samples={samples}, tasks={tasks})"
            )),
            Demo::Vectoradd { n, partitions } if *n == 0 || *partitions == 0 => usage(format!(
                "vectoradd needs n >= 1 and partitions >= 1 (got n={n}, partitions={partitions})"
            )),
            Demo::Wordcount { chunk_bytes: 0, .. } => usage("--chunk-bytes must be at least 1".into()),
            _ => Ok(()),
        }
    }

    fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            min_device_elements: self.min_device_elements,
            min_device_bytes: self.min_device_bytes,
            mode_hint: self.mode_hint,
            ..EngineConfig::default()
        }
    }
}

enum Cluster {
    Local(LocalCluster),
    Remote(Arc<Driver>),
}

impl Cluster {
    fn start(args: &DemoArgs) -> Result<(Cluster, Engine), DemoError> {
        let registry = Arc::new(standard_registry());
        let cfg = args.engine_config();
        if let Some(addr) = &args.master {
            let mut dcfg = DriverConfig::new(registry.registry_hash());
            dcfg.dispatch = Dispatch::Waves;
            let driver = Arc::new(Driver::start(dcfg));
            let bound = driver
                .listen(addr)
                .map_err(|e| DemoError::Runtime(format!("cannot listen on {addr}: {e}")))?;
            eprintln!("listening on {bound}");
            if !driver.wait_for_workers(args.workers, Duration::from_secs(args.wait_secs)) {
                driver.shutdown();
                return Err(DemoError::Runtime(format!(
                    "{} of {} workers registered within {}s",
                    driver.stats().live_workers(),
                    args.workers,
                    args.wait_secs
                )));
            }
            let engine = Engine::new(driver.clone(), registry, cfg);
            return Ok((Cluster::Remote(driver), engine));
        }
        let n = args.local.unwrap_or(1);
        let mut builder = LocalCluster::builder();
        for i in 0..n {
            let mode = args.local_device[i % args.local_device.len()];
            builder = builder.worker(WorkerSpec::new(format!("local-{i}-{mode}"), mode, args.local_cores));
        }
        let cluster = builder
            .start(registry)
            .map_err(|e| DemoError::Runtime(format!("local cluster failed to start: {e}")))?;
        let engine = cluster.engine(cfg);
        Ok((Cluster::Local(cluster), engine))
    }

    fn stop(self) {
        match self {
            Cluster::Local(c) => {
                for (id, res) in c.shutdown() {
                    if let Err(e) = res {
                        log::warn!("worker {id} ended with {e}");
                    }
                }
            }
            Cluster::Remote(d) => d.shutdown(),
        }
    }
}

/// Runs the selected demo, writing its result to `out`.
pub fn run(args: &DemoArgs, out: &mut dyn Write) -> Result<(), DemoError> {
    args.validate()?;
    let (cluster, mut engine) = Cluster::start(args)?;
    if let Some(path) = &args.job_log {
        engine = engine.with_job_log(JobLog::create(path)?);
    }
    let result = run_demo(&args.demo, &engine, out);
    cluster.stop();
    result
}

fn run_demo(demo: &Demo, engine: &Engine, out: &mut dyn Write) -> Result<(), DemoError> {
    match demo {
        Demo::Pi {
            samples,
            tasks,
            seed,
            variant,
        } => {
            let r = pi::run(engine, *samples, *tasks, *seed, *variant)?;
            writeln!(out, "pi={:.6}", r.estimate())?;
        }
        Demo::Vectoradd { n, partitions } => {
            let r = vectoradd::run(engine, *n, *partitions)?;
            writeln!(out, "checksum={:.3}", r.checksum())?;
        }
        Demo::Wordcount {
            input,
            output,
            chunk_bytes,
        } => {
            let counts = wordcount::run(engine, input, *chunk_bytes).map_err(|e| match e {
                wordcount::WordCountError::Engine(e) => DemoError::Job(e),
                wordcount::WordCountError::Dataset(e) => DemoError::Runtime(e.to_string()),
            })?;
            match output {
                Some(path) => wordcount::write_tsv(&counts, BufWriter::new(File::create(path)?))?,
                None => wordcount::write_tsv(&counts, &mut *out)?,
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> DemoArgs {
        DemoArgs::try_parse_from(std::iter::once("ucore-demo").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn global_flags_after_subcommand() {
        let a = parse(&["pi", "--samples", "10", "--local", "3", "--local-device", "cpu,acc"]);
        assert_eq!(a.local, Some(3));
        assert_eq!(a.local_device, vec![ExecutionMode::Cpu, ExecutionMode::Acc]);
        assert!(matches!(
            a.demo,
            Demo::Pi {
                samples: 10,
                tasks: 8,
                seed: 42,
                ..
            }
        ));
    }

    #[test]
    fn local_and_master_conflict() {
        assert!(DemoArgs::try_parse_from(["ucore-demo", "--local", "2", "--master", "0.0.0.0:7077", "pi"]).is_err());
    }

    #[test]
    fn validation_rejects_impossible_jobs() {
        for bad in [
            &["pi", "--samples", "3", "--tasks", "4"][..],
            &["pi", "--tasks", "0"],
            &["vectoradd", "--n", "0"],
            &["vectoradd", "--partitions", "0"],
            &["wordcount", "--input", "x", "--chunk-bytes", "0"],
            &["pi", "--local", "0"],
        ] {
            let err = parse(bad).validate().unwrap_err();
            assert_eq!(err.exit_code(), exit::USAGE, "{bad:?}");
        }
        assert!(parse(&["pi", "--samples", "4", "--tasks", "4"]).validate().is_ok());
    }

    #[test]
    fn unknown_variant_is_a_parse_error() {
        assert!(DemoArgs::try_parse_from(["ucore-demo", "pi", "--variant", "spark"]).is_err());
    }
}
