//! Goal-grid evaluation: completion time and accumulated command magnitude.
//!
//! Every goal of the grid gets one episode in the evaluation world, driven by
//! the deterministic policy. An episode succeeds when the vessel comes
//! within the capture radius while still facing the goal.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::BodyState;
use crate::env::{CaptureEnv, EnvConfig, GoalGrid, GoalSpec, SuccessRule, Termination, ACT_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::policy::{deterministic_action, ActorCritic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HydroSource {
    Nominal,
    Identified,
}

/// The four training configurations compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentVariant {
    #[serde(rename = "NV")]
    Nv,
    #[serde(rename = "NV-DR")]
    NvDr,
    #[serde(rename = "SID")]
    Sid,
    #[serde(rename = "SID-DR")]
    SidDr,
}

impl AgentVariant {
    pub const ALL: [AgentVariant; 4] = [AgentVariant::Nv, AgentVariant::NvDr, AgentVariant::Sid, AgentVariant::SidDr];

    pub fn name(self) -> &'static str {
        match self {
            AgentVariant::Nv => "NV",
            AgentVariant::NvDr => "NV-DR",
            AgentVariant::Sid => "SID",
            AgentVariant::SidDr => "SID-DR",
        }
    }

    pub fn hydro_source(self) -> HydroSource {
        match self {
            AgentVariant::Nv | AgentVariant::NvDr => HydroSource::Nominal,
            AgentVariant::Sid | AgentVariant::SidDr => HydroSource::Identified,
        }
    }

    /// Fraction by which thrust may be scaled down during training.
    pub fn thrust_randomization(self) -> f64 {
        match self {
            AgentVariant::Nv | AgentVariant::Sid => 0.0,
            AgentVariant::NvDr | AgentVariant::SidDr => 0.5,
        }
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`; expected NV, NV-DR, SID or SID-DR")))
    }
}

/// `sum(|a_l| + |a_r|)` over all steps.
pub fn accumulate_energy<I: IntoIterator<Item = [f64; ACT_DIM]>>(actions: I) -> f64 {
    actions.into_iter().map(|a| a[0].abs() + a[1].abs()).sum()
}

/// State after a step and the command that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub body: BodyState,
    pub d: f64,
    /// Relative bearing of the goal, rad.
    pub delta: f64,
    pub action: [f64; ACT_DIM],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub index: usize,
    pub goal: GoalSpec,
    pub distance: f64,
    pub bearing_deg: f64,
    pub success: bool,
    pub termination: Termination,
    /// Completion time, s; successes only.
    pub t_c: Option<f64>,
    /// Episode duration, s.
    pub duration: f64,
    pub steps: u32,
    pub e_acc: f64,
    /// Sum of training rewards.
    pub episode_return: f64,
    pub min_distance: f64,
    /// Initial state first; empty unless recording was requested.
    pub trajectory: Vec<TrajectoryRow>,
}

/// Maps a batch of observations to commands.
pub trait Controller {
    fn act(&mut self, observations: &[[f64; OBS_DIM]]) -> Result<Vec<[f64; ACT_DIM]>>;
}

/// `tanh(mean)` of a trained actor.
pub struct GreedyPolicy<'a>(pub &'a ActorCritic<f32>);

impl Controller for GreedyPolicy<'_> {
    fn act(&mut self, observations: &[[f64; OBS_DIM]]) -> Result<Vec<[f64; ACT_DIM]>> {
        let x: Vec<f32> = observations.iter().flat_map(|o| o.map(|c| c as f32)).collect();
        let means = self.0.actor.forward(self.0.actor_params(), &x, observations.len())?;
        Ok(means.chunks(ACT_DIM).map(|m| deterministic_action([f64::from(m[0]), f64::from(m[1])])).collect())
    }
}

/// Always idle.
pub struct ZeroPolicy;

impl Controller for ZeroPolicy {
    fn act(&mut self, observations: &[[f64; OBS_DIM]]) -> Result<Vec<[f64; ACT_DIM]>> {
        Ok(vec![[0.0; ACT_DIM]; observations.len()])
    }
}

impl<F: FnMut(&[f64; OBS_DIM]) -> [f64; ACT_DIM]> Controller for F {
    fn act(&mut self, observations: &[[f64; OBS_DIM]]) -> Result<Vec<[f64; ACT_DIM]>> {
        Ok(observations.iter().map(self).collect())
    }
}

/// Grid cells whose distance is in `distances` (all cells when `None`).
pub fn select_cells(grid: &GoalGrid, distances: Option<&[f64]>) -> Result<Vec<usize>> {
    let mut cells = Vec::new();
    for i in 0..grid.len() {
        let (d, _) = grid.cell(i)?;
        if distances.is_none_or(|keep| keep.iter().any(|k| (k - d).abs() < 1e-9)) {
            cells.push(i);
        }
    }
    Ok(cells)
}

/// Runs one episode per cell in lockstep. Episode `i` draws its
/// disturbances from the stream of environment index `i`, so every policy
/// faces the same conditions at the same goal.
pub fn run_grid_eval(
    policy: &mut dyn Controller,
    world: &EnvConfig,
    cells: &[usize],
    seed: u64,
    record: bool,
) -> Result<Vec<EpisodeMetrics>> {
    struct Live {
        env: CaptureEnv,
        obs: [f64; OBS_DIM],
        metrics: EpisodeMetrics,
        done: bool,
    }
    let grid = &world.grid;
    let mut live = Vec::with_capacity(cells.len());
    for &i in cells {
        let (distance, bearing_deg) = grid.cell(i)?;
        let goal = grid.goal(i)?;
        let mut env = CaptureEnv::new(world.clone(), seed, i as u64)?;
        let obs = env.reset_with_goal(goal).to_array();
        let trajectory = if record {
            vec![TrajectoryRow {
                t: 0.0,
                body: BodyState::default(),
                d: goal.distance(),
                delta: goal.bearing(),
                action: [0.0; ACT_DIM],
            }]
        } else {
            Vec::new()
        };
        let metrics = EpisodeMetrics {
            index: i,
            goal,
            distance,
            bearing_deg,
            success: false,
            termination: Termination::Timeout,
            t_c: None,
            duration: 0.0,
            steps: 0,
            e_acc: 0.0,
            episode_return: 0.0,
            min_distance: goal.distance(),
            trajectory,
        };
        live.push(Live { env, obs, metrics, done: false });
    }

    loop {
        let active: Vec<usize> = (0..live.len()).filter(|&k| !live[k].done).collect();
        if active.is_empty() {
            break;
        }
        let obs: Vec<[f64; OBS_DIM]> = active.iter().map(|&k| live[k].obs).collect();
        let actions = policy.act(&obs)?;
        if actions.len() != obs.len() {
            return Err(Error::Shape(format!("controller returned {} actions for {} observations", actions.len(), obs.len())));
        }
        for (&k, action) in active.iter().zip(actions) {
            let action = action.map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) });
            let lane = &mut live[k];
            let out = lane.env.step(action)?;
            let m = &mut lane.metrics;
            m.steps += 1;
            m.e_acc += accumulate_energy([action]);
            m.episode_return += out.reward;
            m.min_distance = m.min_distance.min(out.info.distance);
            let t = f64::from(m.steps) * world.dt;
            if record {
                m.trajectory.push(TrajectoryRow {
                    t,
                    body: out.info.body,
                    d: out.info.distance,
                    delta: out.info.delta,
                    action,
                });
            }
            lane.obs = out.observation.to_array();
            if let Some(term) = out.info.termination {
                lane.done = true;
                m.termination = term;
                m.success = term == Termination::Success;
                m.duration = t;
                m.t_c = m.success.then_some(t);
            }
        }
    }
    Ok(live.into_iter().map(|l| l.metrics).collect())
}

/// First step index of `trajectory` that satisfies `rule`.
pub fn first_capture(trajectory: &[TrajectoryRow], rule: &SuccessRule) -> Option<usize> {
    trajectory.iter().position(|row| rule.is_met(row.d, row.delta))
}

/// Distance buckets of the aggregate table, m.
pub const BUCKETS: [f64; 3] = [3.0, 6.0, 9.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub variant: String,
    pub distance_bucket: f64,
    /// Over successful episodes.
    pub mean_tc_s: Option<f64>,
    /// Over successful episodes.
    pub mean_eacc: Option<f64>,
    pub success_rate: f64,
    pub n: usize,
    /// Over all episodes, failures counted at their full duration.
    pub mean_tc_all_s: f64,
    pub mean_eacc_all: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// One row per bucket that has episodes, in bucket order.
pub fn aggregate(variant: &str, metrics: &[EpisodeMetrics]) -> Vec<AggregateRow> {
    BUCKETS
        .iter()
        .filter_map(|&bucket| {
            let eps: Vec<&EpisodeMetrics> = metrics.iter().filter(|m| (m.distance - bucket).abs() < 1e-9).collect();
            if eps.is_empty() {
                return None;
            }
            let ok = || eps.iter().filter(|m| m.success);
            let n = eps.len();
            Some(AggregateRow {
                variant: variant.to_string(),
                distance_bucket: bucket,
                mean_tc_s: mean(ok().filter_map(|m| m.t_c)),
                mean_eacc: mean(ok().map(|m| m.e_acc)),
                success_rate: ok().count() as f64 / n as f64,
                n,
                mean_tc_all_s: mean(eps.iter().map(|m| m.duration)).unwrap_or(0.0),
                mean_eacc_all: mean(eps.iter().map(|m| m.e_acc)).unwrap_or(0.0),
            })
        })
        .collect()
}

/// Summary over every episode regardless of distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub success_rate: f64,
    pub mean_tc_s: Option<f64>,
    pub mean_eacc: Option<f64>,
    pub mean_eacc_all: f64,
}

pub fn summarize(metrics: &[EpisodeMetrics]) -> Summary {
    let n = metrics.len();
    let ok = || metrics.iter().filter(|m| m.success);
    Summary {
        n,
        success_rate: if n == 0 { 0.0 } else { ok().count() as f64 / n as f64 },
        mean_tc_s: mean(ok().filter_map(|m| m.t_c)),
        mean_eacc: mean(ok().map(|m| m.e_acc)),
        mean_eacc_all: mean(metrics.iter().map(|m| m.e_acc)).unwrap_or(0.0),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

pub const AGGREGATE_HEADER: [&str; 8] =
    ["variant", "distance_bucket", "mean_tc_s", "mean_eacc", "success_rate", "n", "mean_tc_all_s", "mean_eacc_all"];

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(AGGREGATE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.variant.clone(),
            r.distance_bucket.to_string(),
            opt(r.mean_tc_s),
            opt(r.mean_eacc),
            r.success_rate.to_string(),
            r.n.to_string(),
            r.mean_tc_all_s.to_string(),
            r.mean_eacc_all.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const MANIFEST_HEADER: [&str; 13] = [
    "variant",
    "index",
    "distance_m",
    "bearing_deg",
    "goal_x",
    "goal_y",
    "success",
    "termination",
    "t_c_s",
    "steps",
    "e_acc",
    "min_distance_m",
    "trajectory",
];

pub const TRAJECTORY_HEADER: [&str; 10] = ["t_s", "x", "y", "psi", "u", "v", "r", "d", "a_l", "a_r"];

pub fn trajectory_file_name(variant: &str, index: usize) -> String {
    format!("{variant}_{index:03}.csv")
}

/// One CSV per episode under `dir`, plus `manifest.csv` listing them. A
/// metric without a recorded trajectory gets an empty file reference.
pub fn export_trajectories(variant: &str, metrics: &[EpisodeMetrics], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = dir.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| csv_err(&manifest, e))?;
    w.write_record(MANIFEST_HEADER).map_err(|e| csv_err(&manifest, e))?;
    for m in metrics {
        let file = if m.trajectory.is_empty() {
            String::new()
        } else {
            let name = trajectory_file_name(variant, m.index);
            let rows = m.trajectory.iter().map(|row| {
                let b = row.body;
                vec![row.t, b.x, b.y, b.psi, b.u, b.v, b.r, row.d, row.action[0], row.action[1]]
            });
            crate::table::write_columns_file(&dir.join(&name), &TRAJECTORY_HEADER, rows)?;
            name
        };
        w.write_record([
            variant.to_string(),
            m.index.to_string(),
            m.distance.to_string(),
            m.bearing_deg.to_string(),
            m.goal.x.to_string(),
            m.goal.y.to_string(),
            m.success.to_string(),
            format!("{:?}", m.termination).to_lowercase(),
            opt(m.t_c),
            m.steps.to_string(),
            m.e_acc.to_string(),
            m.min_distance.to_string(),
            file,
        ])
        .map_err(|e| csv_err(&manifest, e))?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))
}
