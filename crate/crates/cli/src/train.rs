use std::io::Write;
use std::path::PathBuf;

use asvlab::eval::AgentVariant;
use asvlab::policy::{save_checkpoint, Checkpoint};
use asvlab::train::{IterationStats, Trainer};
use asvlab::Error;
use clap::Args;

use crate::common::{create_dir, runtime, snapshot_config, usage, ConfigArgs, Failure};

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// NV, NV-DR, SID or SID-DR.
    #[arg(long, value_name = "NAME")]
    pub variant: AgentVariant,
    /// Run directory; `<output_dir>/<variant>-seed<N>` when omitted.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides `ppo.max_iterations`.
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,
    /// Iterations between periodic checkpoints.
    #[arg(long, value_name = "N", default_value_t = 100)]
    pub checkpoint_every: usize,
}

pub fn run(a: TrainArgs) -> Result<(), Failure> {
    let mut cfg = a.common.resolve()?;
    if let Some(n) = a.iterations {
        cfg.ppo.max_iterations = n;
    }
    cfg.validate()?;
    if a.checkpoint_every == 0 {
        return Err(usage("--checkpoint-every must be >= 1"));
    }
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.join(format!("{}-seed{}", a.variant, cfg.master_seed)));
    create_dir(&out.join("checkpoints"))?;
    let config_text = snapshot_config(&out, &cfg)?;

    let env = cfg.training_env(a.variant)?;
    let mut trainer = Trainer::new(env, cfg.batch_config(), cfg.ppo.clone())?;
    let checkpoint = |trainer: &Trainer, name: &str| -> Result<PathBuf, Failure> {
        let path = out.join(name);
        let ck = Checkpoint {
            net: trainer.net().clone(),
            iteration: trainer.iteration() as u64,
            variant: Some(a.variant.to_string()),
            config: config_text.clone(),
        };
        save_checkpoint(&path, &ck)?;
        Ok(path)
    };

    let log_path = out.join("train_log.csv");
    let file = std::fs::File::create(&log_path).map_err(|e| runtime(format!("{}: {e}", log_path.display())))?;
    let mut log = std::io::BufWriter::new(file);
    let io = |e: std::io::Error| runtime(format!("{}: {e}", log_path.display()));
    writeln!(log, "{}", IterationStats::CSV_HEADER.join(",")).map_err(io)?;

    eprintln!(
        "training {} for {} iterations: {} envs, horizon {}, seed {}",
        a.variant,
        cfg.ppo.max_iterations,
        cfg.batch.n_envs,
        trainer.horizon(),
        cfg.master_seed
    );
    for _ in 0..cfg.ppo.max_iterations {
        let stats = match trainer.iterate() {
            Ok(s) => s,
            Err(e @ Error::NonFiniteLoss { .. }) => {
                log.flush().map_err(io)?;
                let kept = checkpoint(&trainer, "last_good.ckpt")?;
                return Err(runtime(format!(
                    "{e} at iteration {}; last good parameters saved to {}",
                    trainer.iteration() + 1,
                    kept.display()
                )));
            }
            Err(e) => return Err(e.into()),
        };
        let row: Vec<String> = stats.csv_row().iter().map(f64::to_string).collect();
        writeln!(log, "{}", row.join(",")).map_err(io)?;
        if stats.iteration % a.checkpoint_every == 0 {
            log.flush().map_err(io)?;
            checkpoint(&trainer, &format!("checkpoints/iter_{:05}.ckpt", stats.iteration))?;
        }
        if stats.iteration % 10 == 0 || stats.iteration == 1 {
            eprintln!(
                "iter {:5}  return {:9.2}  success {:.2}  entropy {:.3}  kl {:.4}  lr {:.2e}  {:.2}s",
                stats.iteration,
                stats.mean_return,
                stats.success_rate,
                stats.entropy,
                stats.approx_kl,
                stats.learning_rate,
                stats.seconds
            );
        }
    }
    log.flush().map_err(io)?;
    let fin = checkpoint(&trainer, "final.ckpt")?;
    println!("{}", fin.display());
    Ok(())
}
