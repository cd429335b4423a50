//! The run configuration file.
//!
//! One TOML document with a section per concern. Every key is optional and
//! defaults to the tabled value; unknown keys are rejected.
//!
//! ```
//! use asvlab::config::RunConfig;
//!
//! let cfg = RunConfig::from_toml("master_seed = 9\n[batch]\nn_envs = 256\n")?;
//! assert_eq!(cfg.batch.n_envs, 256);
//! assert_eq!(cfg.reward.lambda6, 30.0);
//! assert!(RunConfig::from_toml("[reward]\nlambda7 = 1.0\n").is_err());
//! # Ok::<(), asvlab::Error>(())
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch::{BatchConfig, Workers, DEFAULT_N_ENVS};
use crate::dynamics::{BuoyancyParams, Damping, HydroParams, Inertia, ThrusterCurve, ThrusterModel, DEFAULT_DT};
use crate::env::{
    EnvConfig, GoalGrid, RandomizationConfig, RewardParams, SuccessRule, MAX_STEPS, RUNAWAY_DISTANCE,
};
use crate::error::{Error, Result};
use crate::eval::{AgentVariant, HydroSource};
use crate::policy::PpoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroSection {
    pub nominal: Damping,
    pub identified: Damping,
}

impl Default for HydroSection {
    fn default() -> Self {
        HydroSection { nominal: Damping::NOMINAL, identified: Damping::IDENTIFIED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThrusterSection {
    /// `[command, force_n]` knots.
    pub left: ThrusterCurve,
    pub right: ThrusterCurve,
    /// m
    pub separation: f64,
}

impl Default for ThrusterSection {
    fn default() -> Self {
        ThrusterSection {
            left: ThrusterCurve::default(),
            right: ThrusterCurve::default(),
            separation: ThrusterModel::DEFAULT_SEPARATION,
        }
    }
}

impl ThrusterSection {
    pub fn model(&self) -> Result<ThrusterModel> {
        ThrusterModel::new(self.left.clone(), self.right.clone(), self.separation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    /// s
    pub dt: f64,
    pub max_steps: u32,
    /// m
    pub runaway_distance: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection { dt: DEFAULT_DT, max_steps: MAX_STEPS, runaway_distance: RUNAWAY_DISTANCE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSection {
    pub n_envs: usize,
    pub workers: Workers,
}

impl Default for BatchSection {
    fn default() -> Self {
        BatchSection { n_envs: DEFAULT_N_ENVS, workers: Workers::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// m
    pub distances: Vec<f64>,
    pub bearings_deg: Vec<f64>,
    pub disturbances: bool,
    /// m
    pub success_radius: f64,
    pub head_on: bool,
    /// `eval` exits non-zero below this overall success rate.
    pub min_success_rate: f64,
    pub trajectories: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        let grid = GoalGrid::default();
        let capture = SuccessRule::capture();
        EvalSection {
            distances: grid.distances,
            bearings_deg: grid.bearings_deg,
            disturbances: false,
            success_radius: capture.radius,
            head_on: capture.head_on,
            min_success_rate: 0.0,
            trajectories: true,
        }
    }
}

impl EvalSection {
    pub fn grid(&self) -> GoalGrid {
        GoalGrid { distances: self.distances.clone(), bearings_deg: self.bearings_deg.clone() }
    }

    pub fn success(&self) -> SuccessRule {
        SuccessRule { radius: self.success_radius, head_on: self.head_on }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub hull: Inertia,
    pub hydro: HydroSection,
    pub thruster: ThrusterSection,
    pub buoyancy: BuoyancyParams,
    pub env: EnvSection,
    pub reward: RewardParams,
    pub randomization: RandomizationConfig,
    pub ppo: PpoConfig,
    pub batch: BatchSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            output_dir: PathBuf::from("runs"),
            hull: Inertia::default(),
            hydro: HydroSection::default(),
            thruster: ThrusterSection::default(),
            buoyancy: BuoyancyParams::default(),
            env: EnvSection::default(),
            reward: RewardParams::default(),
            randomization: RandomizationConfig::default(),
            ppo: PpoConfig::default(),
            batch: BatchSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// The fully resolved configuration, every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.hull.validate()?;
        HydroParams { damping: self.hydro.nominal, inertia: self.hull }.validate()?;
        HydroParams { damping: self.hydro.identified, inertia: self.hull }.validate()?;
        self.thruster.model()?;
        self.buoyancy.validate()?;
        self.reward.validate()?;
        self.randomization.validate()?;
        self.ppo.validate()?;
        if self.batch.n_envs == 0 {
            return Err(Error::invalid("n_envs", "must be >= 1"));
        }
        if self.eval.grid().is_empty() {
            return Err(Error::invalid("eval.distances", "grid must contain at least one goal"));
        }
        if !(self.eval.success_radius > 0.0) {
            return Err(Error::invalid("eval.success_radius", "must be > 0"));
        }
        self.training_env(AgentVariant::SidDr)?.validate()
    }

    pub fn hydro(&self, source: HydroSource) -> HydroParams {
        let damping = match source {
            HydroSource::Nominal => self.hydro.nominal,
            HydroSource::Identified => self.hydro.identified,
        };
        HydroParams { damping, inertia: self.hull }
    }

    fn env_with(&self, hydro: HydroParams, randomization: RandomizationConfig, success: SuccessRule) -> Result<EnvConfig> {
        Ok(EnvConfig {
            hydro,
            thrusters: self.thruster.model()?,
            reward: self.reward,
            randomization,
            success,
            grid: self.eval.grid(),
            dt: self.env.dt,
            max_steps: self.env.max_steps,
            runaway_distance: self.env.runaway_distance,
        })
    }

    /// The training world of `variant`. Variants without thrust
    /// randomization pin both thrust scales at 1; the others use the
    /// configured range.
    pub fn training_env(&self, variant: AgentVariant) -> Result<EnvConfig> {
        let mut randomization = self.randomization;
        if variant.thrust_randomization() == 0.0 {
            randomization.thrust_scale_low = 1.0;
            randomization.thrust_scale_high = 1.0;
        }
        self.env_with(self.hydro(variant.hydro_source()), randomization, SuccessRule::training(&self.reward))
    }

    /// The evaluation world: identified hydrodynamics, no noise, and the
    /// configured disturbance field when `disturbances` is set.
    pub fn eval_env(&self, disturbances: bool) -> Result<EnvConfig> {
        let randomization = if disturbances {
            self.randomization.disturbances_only()
        } else {
            RandomizationConfig::disabled()
        };
        self.env_with(self.hydro(HydroSource::Identified), randomization, self.eval.success())
    }

    pub fn batch_config(&self) -> BatchConfig {
        BatchConfig { n_envs: self.batch.n_envs, master_seed: self.master_seed, workers: self.batch.workers }
    }
}
