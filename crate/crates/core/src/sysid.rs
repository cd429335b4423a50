//! System identification from steady-state and bollard-pull tests.
//!
//! Drag coefficients come from steady-state balance: once a constant thrust
//! (or torque) has accelerated the hull to terminal speed,
//!
//! ```text
//! applied = linear * v + quadratic * v |v|
//! ```
//!
//! so a two-parameter least-squares fit over several thrust levels recovers the
//! linear and quadratic coefficients of one axis. Thruster curves are fitted
//! by isotonic regression so the result is monotone by construction.
//!
//! The `simulate_*` functions run the same tests against the simulator, which
//! both documents the procedure and provides round-trip validation data.

use crate::dynamics::{self, BodyState, HydroParams, ThrusterCurve, Wrench, DEFAULT_DT};
use crate::error::{Error, Result};

/// Trailing fraction of a run inspected by the steady-state check.
pub const STEADY_WINDOW_FRACTION: f64 = 0.10;
/// Maximum spread (m/s or rad/s) of the trailing window for a run to count as steady.
pub const STEADY_TOLERANCE: f64 = 1e-4;

/// A steady thrust (N) or torque (N·m) and the terminal speed it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateSample {
    pub applied: f64,
    pub velocity: f64,
}

impl SteadyStateSample {
    pub fn new(applied: f64, velocity: f64) -> Result<Self> {
        if !applied.is_finite() || !velocity.is_finite() {
            return Err(Error::FitPrecondition(format!("non-finite sample ({applied}, {velocity})")));
        }
        if applied * velocity < 0.0 {
            return Err(Error::FitPrecondition(format!(
                "applied {applied} and velocity {velocity} have opposite signs"
            )));
        }
        Ok(SteadyStateSample { applied, velocity })
    }
}

/// Non-negative linear and quadratic damping for one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragFit {
    pub linear: f64,
    pub quadratic: f64,
    /// RMS of `applied - predicted` over all samples, in the units of `applied`.
    pub residual_rms: f64,
}

impl DragFit {
    pub fn predict(&self, velocity: f64) -> f64 {
        self.linear * velocity + self.quadratic * velocity * velocity.abs()
    }
}

fn residual_rms(samples: &[SteadyStateSample], linear: f64, quadratic: f64) -> f64 {
    let sse: f64 = samples
        .iter()
        .map(|s| {
            let e = s.applied - (linear * s.velocity + quadratic * s.velocity * s.velocity.abs());
            e * e
        })
        .sum();
    (sse / samples.len() as f64).sqrt()
}

/// Least squares of `applied ~ linear * v + quadratic * v|v|` with both
/// coefficients constrained to be non-negative.
///
/// The unconstrained problem is solved by a two-column QR factorisation. If a
/// coefficient comes out negative it is clamped to zero and the other one is
/// refitted alone; with two parameters this active-set step is exact.
pub fn fit_quadratic_drag(samples: &[SteadyStateSample]) -> Result<DragFit> {
    if samples.is_empty() {
        return Err(Error::FitPrecondition("no samples".into()));
    }
    let mut speeds: Vec<f64> = samples.iter().map(|s| s.velocity.abs()).filter(|v| *v > 0.0).collect();
    speeds.sort_by(f64::total_cmp);
    speeds.dedup();
    if speeds.len() < 2 {
        return Err(Error::FitPrecondition(format!(
            "need at least 2 samples with distinct non-zero speeds, got {}",
            speeds.len()
        )));
    }

    let p: Vec<f64> = samples.iter().map(|s| s.velocity).collect();
    let q: Vec<f64> = samples.iter().map(|s| s.velocity * s.velocity.abs()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.applied).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    // modified Gram-Schmidt on [p q]
    let r11 = dot(&p, &p).sqrt();
    let q1: Vec<f64> = p.iter().map(|x| x / r11).collect();
    let r12 = dot(&q1, &q);
    let q2_raw: Vec<f64> = q.iter().zip(&q1).map(|(x, e)| x - r12 * e).collect();
    let r22 = dot(&q2_raw, &q2_raw).sqrt();

    let single = |feature: &[f64]| (dot(feature, &y) / dot(feature, feature)).max(0.0);

    let (linear, quadratic) = if r22 > 1e-12 * r11.max(1.0) {
        let q2: Vec<f64> = q2_raw.iter().map(|x| x / r22).collect();
        let quadratic = dot(&q2, &y) / r22;
        let linear = (dot(&q1, &y) - r12 * quadratic) / r11;
        if linear >= 0.0 && quadratic >= 0.0 {
            (linear, quadratic)
        } else {
            let candidates = [(0.0, single(&q)), (single(&p), 0.0)];
            candidates
                .into_iter()
                .min_by(|a, b| residual_rms(samples, a.0, a.1).total_cmp(&residual_rms(samples, b.0, b.1)))
                .expect("two candidates")
        }
    } else {
        return Err(Error::FitPrecondition("speed and speed² columns are collinear".into()));
    };

    Ok(DragFit { linear, quadratic, residual_rms: residual_rms(samples, linear, quadratic) })
}

/// One measured point of a bollard-pull test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BollardSample {
    pub command: f64,
    pub force: f64,
}

/// Weighted pool-adjacent-violators: the non-decreasing sequence closest to
/// `values` in weighted least squares.
pub fn pool_adjacent_violators(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() >= 2 {
            let (m1, w1, n1) = blocks[blocks.len() - 1];
            let (m0, w0, n0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let merged_w = w0 + w1;
            *blocks.last_mut().expect("non-empty") = ((m0 * w0 + m1 * w1) / merged_w, merged_w, n0 + n1);
        }
    }
    blocks.into_iter().flat_map(|(m, _, n)| std::iter::repeat_n(m, n)).collect()
}

/// Fits a monotone thruster curve to bollard-pull samples.
///
/// Samples are sorted by command (repeated commands averaged), made monotone
/// by [`pool_adjacent_violators`], and pinned to pass through `(0, 0)`.
pub fn fit_thruster_curve(samples: &[BollardSample]) -> Result<ThrusterCurve> {
    if samples.len() < 3 {
        return Err(Error::FitPrecondition(format!("need at least 3 bollard samples, got {}", samples.len())));
    }
    for s in samples {
        if !(-1.0..=1.0).contains(&s.command) || !s.force.is_finite() {
            return Err(Error::FitPrecondition(format!("sample ({}, {}) outside [-1, 1] × finite", s.command, s.force)));
        }
    }
    if !samples.iter().any(|s| s.command < 0.0) || !samples.iter().any(|s| s.command > 0.0) {
        return Err(Error::FitPrecondition("samples must include both negative and positive commands".into()));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.command.total_cmp(&b.command));
    let mut commands: Vec<f64> = Vec::new();
    let mut means: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for s in sorted {
        if commands.last() == Some(&s.command) {
            let i = means.len() - 1;
            means[i] = (means[i] * weights[i] + s.force) / (weights[i] + 1.0);
            weights[i] += 1.0;
        } else {
            commands.push(s.command);
            means.push(s.force);
            weights.push(1.0);
        }
    }
    let fitted = pool_adjacent_violators(&means, &weights);

    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(commands.len() + 1);
    for (&c, &f) in commands.iter().zip(&fitted) {
        if c > 0.0 && knots.last().is_none_or(|k| k.0 < 0.0) {
            knots.push((0.0, 0.0));
        }
        let f = if c < 0.0 {
            f.min(0.0)
        } else if c > 0.0 {
            f.max(0.0)
        } else {
            0.0
        };
        knots.push((c, f));
    }

    let (lo, hi) = (knots[0].1, knots[knots.len() - 1].1);
    if lo >= 0.0 || hi <= 0.0 {
        return Err(Error::FitPrecondition(format!(
            "monotone fit gives no thrust in one direction (min {lo} N, max {hi} N)"
        )));
    }
    ThrusterCurve::new(knots)
}

/// Which axis a steady-state test excites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Surge,
    Yaw,
}

/// Result of running one thrust or torque level from rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRun {
    pub applied: f64,
    /// `(t_s, velocity)` including the initial state.
    pub series: Vec<(f64, f64)>,
    pub terminal: f64,
    /// Spread of the trailing window; converged when below [`STEADY_TOLERANCE`].
    pub spread: f64,
}

impl LevelRun {
    pub fn converged(&self) -> bool {
        self.spread < STEADY_TOLERANCE
    }
}

/// All levels of one steady-state test.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateTest {
    pub axis: Axis,
    pub runs: Vec<LevelRun>,
}

impl SteadyStateTest {
    /// Samples from converged levels only.
    pub fn samples(&self) -> Vec<SteadyStateSample> {
        self.runs
            .iter()
            .filter(|r| r.converged())
            .map(|r| SteadyStateSample { applied: r.applied, velocity: r.terminal })
            .collect()
    }

    pub fn unconverged(&self) -> impl Iterator<Item = &LevelRun> {
        self.runs.iter().filter(|r| !r.converged())
    }
}

/// Spread of the trailing [`STEADY_WINDOW_FRACTION`] of a series.
pub fn trailing_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let window = ((values.len() as f64 * STEADY_WINDOW_FRACTION).ceil() as usize).clamp(1, values.len());
    let tail = &values[values.len() - window..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Terminal value of a logged run, or `None` if the trailing window is not steady.
pub fn steady_state_value(series: &[(f64, f64)]) -> Option<f64> {
    let values: Vec<f64> = series.iter().map(|p| p.1).collect();
    (trailing_spread(&values) < STEADY_TOLERANCE).then(|| values[values.len() - 1])
}

fn run_levels(params: &HydroParams, levels: &[f64], duration: f64, axis: Axis) -> Result<SteadyStateTest> {
    params.validate()?;
    if !(duration.is_finite() && duration >= 10.0 * DEFAULT_DT) {
        return Err(Error::invalid("duration", format!("must be at least {} s, got {duration}", 10.0 * DEFAULT_DT)));
    }
    let steps = (duration / DEFAULT_DT).round() as usize;
    let runs = levels
        .iter()
        .map(|&applied| {
            let wrench = match axis {
                Axis::Surge => Wrench::new(applied, 0.0, 0.0),
                // equal and opposite thruster forces: pure yaw moment
                Axis::Yaw => Wrench::new(0.0, 0.0, applied),
            };
            let pick = |s: &BodyState| match axis {
                Axis::Surge => s.u,
                Axis::Yaw => s.r,
            };
            let mut state = BodyState::default();
            let mut series = Vec::with_capacity(steps + 1);
            series.push((0.0, 0.0));
            for k in 1..=steps {
                state = dynamics::step(&state, wrench, params, DEFAULT_DT)?;
                series.push((k as f64 * DEFAULT_DT, pick(&state)));
            }
            let values: Vec<f64> = series.iter().map(|p| p.1).collect();
            Ok(LevelRun { applied, terminal: pick(&state), spread: trailing_spread(&values), series })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SteadyStateTest { axis, runs })
}

/// Accelerates the hull from rest under each constant surge force and records
/// the terminal surge speed.
pub fn simulate_acceleration_test(params: &HydroParams, thrust_levels: &[f64], duration: f64) -> Result<SteadyStateTest> {
    run_levels(params, thrust_levels, duration, Axis::Surge)
}

/// Spins the hull in place under each constant yaw torque and records the
/// terminal yaw rate.
pub fn simulate_rotation_test(params: &HydroParams, torque_levels: &[f64], duration: f64) -> Result<SteadyStateTest> {
    run_levels(params, torque_levels, duration, Axis::Yaw)
}

/// Applied levels that drive an axis to each of the given speeds.
pub fn levels_for_speeds(linear: f64, quadratic: f64, speeds: &[f64]) -> Vec<f64> {
    speeds.iter().map(|&v| linear * v + quadratic * v * v.abs()).collect()
}
