use std::path::PathBuf;
use std::time::Duration;

use asvlab::batch::{throughput_bench, BenchMode, BenchRow};
use asvlab::eval::AgentVariant;
use asvlab::table::read_columns_file;
use clap::Args;

use crate::common::{create_dir, runtime, snapshot_config, usage, ConfigArgs, Failure};

const HEADER: [&str; 6] = ["full_step", "workers", "n_envs", "steps", "seconds", "steps_per_sec"];

/// Allowed drop against a baseline before the gate fails.
pub const REGRESSION_TOLERANCE: f64 = 0.20;

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Seconds per measurement.
    #[arg(long, default_value_t = 3.0)]
    pub seconds: f64,
    /// Overrides `batch.n_envs`.
    #[arg(long, value_name = "N")]
    pub envs: Option<usize>,
    /// Output directory; `<output_dir>/bench` when omitted.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Earlier `bench.csv`; exit 2 if full-step throughput at the same worker
    /// count fell by more than 20%.
    #[arg(long, value_name = "CSV")]
    pub baseline: Option<PathBuf>,
}

fn row(r: &BenchRow) -> Vec<f64> {
    vec![
        f64::from(u8::from(r.mode == BenchMode::Full)),
        r.workers as f64,
        r.n_envs as f64,
        r.steps as f64,
        r.seconds,
        r.steps_per_sec,
    ]
}

pub fn run(a: BenchArgs) -> Result<(), Failure> {
    let mut cfg = a.common.resolve()?;
    if let Some(n) = a.envs {
        cfg.batch.n_envs = n;
    }
    cfg.validate()?;
    if !(a.seconds.is_finite() && a.seconds > 0.0) {
        return Err(usage("--seconds must be > 0"));
    }
    let baseline = a
        .baseline
        .as_ref()
        .map(|p| read_columns_file(p, &HEADER))
        .transpose()?;
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.join("bench"));
    create_dir(&out)?;
    snapshot_config(&out, &cfg)?;

    let env = cfg.training_env(AgentVariant::SidDr)?;
    let workers = cfg.batch.workers.resolve();
    let rows = throughput_bench(cfg.batch_config(), &env, Duration::from_secs_f64(a.seconds), workers)?;
    asvlab::table::write_columns_file(&out.join("bench.csv"), &HEADER, rows.iter().map(row))?;
    for r in &rows {
        println!("{:>7} workers {:>2}  {:>5} envs  {:>12.0} steps/s", r.mode, r.workers, r.n_envs, r.steps_per_sec);
    }

    if let Some(base) = baseline {
        for r in rows.iter().filter(|r| r.mode == BenchMode::Full) {
            let Some(b) = base.iter().find(|b| b[0] == 1.0 && b[1] == r.workers as f64) else {
                continue;
            };
            let floor = (1.0 - REGRESSION_TOLERANCE) * b[5];
            if r.steps_per_sec < floor {
                return Err(runtime(format!(
                    "full-step throughput with {} workers regressed: {:.0} steps/s < {:.0} (80% of baseline {:.0})",
                    r.workers, r.steps_per_sec, floor, b[5]
                )));
            }
            println!("baseline {:.0} steps/s with {} workers: within tolerance", b[5], r.workers);
        }
    }
    Ok(())
}
