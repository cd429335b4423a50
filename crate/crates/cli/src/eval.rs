use std::path::PathBuf;

use asvlab::config::RunConfig;
use asvlab::env::{ACT_DIM, OBS_DIM};
use asvlab::eval::{aggregate, export_trajectories, run_grid_eval, select_cells, summarize, write_aggregate, GreedyPolicy};
use asvlab::policy::load_checkpoint;
use clap::Args;

use crate::common::{create_dir, parse_list, runtime, snapshot_config, usage, ConfigArgs, Failure, Switch};

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Label for the output rows; the checkpoint's variant when omitted.
    #[arg(long, value_name = "NAME")]
    pub variant: Option<String>,
    /// Output directory; `<output_dir>/eval-<variant>-seed<N>` when omitted.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Keep only grid goals at these distances, e.g. `3,6,9`.
    #[arg(long, value_name = "LIST", value_parser = parse_list)]
    pub distances: Option<Vec<f64>>,
    /// Disturbance field in the evaluation world.
    #[arg(long, value_enum, value_name = "on|off")]
    pub disturbances: Option<Switch>,
    /// Exit with status 2 when the overall success rate is lower.
    #[arg(long, value_name = "RATE")]
    pub min_success: Option<f64>,
}

pub fn run(a: EvalArgs) -> Result<(), Failure> {
    let ck = load_checkpoint(&a.checkpoint)?;
    ck.check_dims(OBS_DIM, ACT_DIM)?;
    let mut cfg = match &a.common.config {
        Some(_) => a.common.resolve()?,
        None => {
            let mut cfg = RunConfig::from_toml(&ck.config)
                .map_err(|e| usage(format!("{}: embedded configuration: {e}", a.checkpoint.display())))?;
            if let Some(seed) = a.common.seed {
                cfg.master_seed = seed;
            }
            cfg
        }
    };
    if let Some(s) = a.disturbances {
        cfg.eval.disturbances = s.into();
    }
    if let Some(rate) = a.min_success {
        cfg.eval.min_success_rate = rate;
    }
    cfg.validate()?;
    let variant = a.variant.clone().or_else(|| ck.variant.clone()).unwrap_or_else(|| "agent".into());
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.join(format!("eval-{variant}-seed{}", cfg.master_seed)));
    create_dir(&out)?;
    snapshot_config(&out, &cfg)?;

    let world = cfg.eval_env(cfg.eval.disturbances)?;
    let cells = select_cells(&world.grid, a.distances.as_deref())?;
    if cells.is_empty() {
        return Err(usage("no grid goal matches --distances"));
    }
    let metrics = run_grid_eval(&mut GreedyPolicy(&ck.net), &world, &cells, cfg.master_seed, cfg.eval.trajectories)?;
    let rows = aggregate(&variant, &metrics);
    write_aggregate(&out.join("aggregate.csv"), &rows)?;
    export_trajectories(&variant, &metrics, &out.join("episodes"))?;

    let s = summarize(&metrics);
    for r in &rows {
        println!(
            "{variant} {:>4} m  success {:5.1}%  T_c {:>7}  E_acc {:>7}  (n = {})",
            r.distance_bucket,
            100.0 * r.success_rate,
            r.mean_tc_s.map_or("-".into(), |v| format!("{v:.2}")),
            r.mean_eacc.map_or("-".into(), |v| format!("{v:.1}")),
            r.n
        );
    }
    println!("{variant} all     success {:5.1}%  over {} goals -> {}", 100.0 * s.success_rate, s.n, out.display());
    if s.success_rate < cfg.eval.min_success_rate {
        return Err(runtime(format!(
            "success rate {:.3} is below the floor {:.3}",
            s.success_rate, cfg.eval.min_success_rate
        )));
    }
    Ok(())
}
