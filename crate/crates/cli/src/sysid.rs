use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use asvlab::dynamics::{Damping, ThrusterCurve};
use asvlab::eval::HydroSource;
use asvlab::rng::{self, Purpose};
use asvlab::sysid::{
    fit_quadratic_drag, fit_thruster_curve, levels_for_speeds, simulate_acceleration_test, simulate_rotation_test,
    steady_state_value, BollardSample, DragFit, SteadyStateSample, SteadyStateTest,
};
use asvlab::table::{read_pairs_file, write_columns_file};
use clap::{Args, Subcommand, ValueEnum};

use crate::common::{create_dir, runtime, usage, write_file, ConfigArgs, Failure};

/// Terminal speeds (m/s or rad/s) that `synth` drives each axis to.
pub const SYNTH_SPEEDS: [f64; 6] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5];

/// Sway is never excited enough to fit; both coefficients take this value.
const SWAY_CLAMP: f64 = 99.99;

#[derive(Subcommand, Debug)]
pub enum SysidCommand {
    /// Least-squares drag fit from steady-state tables or velocity logs.
    FitDrag(FitDragArgs),
    /// Monotone thruster curve from a bollard-pull log.
    FitThruster(FitThrusterArgs),
    /// Simulated test logs for a known parameter set.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct FitDragArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Surge steady-state table `applied,velocity`.
    #[arg(long, value_name = "CSV")]
    pub surge: Option<PathBuf>,
    /// Yaw steady-state table `applied,velocity`.
    #[arg(long, value_name = "CSV")]
    pub yaw: Option<PathBuf>,
    /// Surge run log `t_s,velocity` under a constant force, as `FORCE=PATH`.
    #[arg(long = "surge-log", value_name = "FORCE=CSV")]
    pub surge_logs: Vec<String>,
    /// Yaw run log `t_s,velocity` under a constant torque, as `TORQUE=PATH`.
    #[arg(long = "yaw-log", value_name = "TORQUE=CSV")]
    pub yaw_logs: Vec<String>,
    /// Output coefficient file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Left,
    Right,
    Both,
}

#[derive(Args, Debug)]
pub struct FitThrusterArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Bollard-pull log `command,force_n`.
    #[arg(long, value_name = "CSV")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub side: Side,
    /// Output `[thruster]` section; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Source {
    Nominal,
    Identified,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Which damping set of the configuration generates the data.
    #[arg(long, value_enum, default_value = "identified")]
    pub source: Source,
    /// Multiplicative velocity noise on the steady-state tables, uniform in ±noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Simulated seconds per level.
    #[arg(long, default_value_t = 120.0)]
    pub duration: f64,
    /// Directory for the generated tables and logs.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn run(cmd: SysidCommand) -> Result<(), Failure> {
    match cmd {
        SysidCommand::FitDrag(a) => fit_drag(a),
        SysidCommand::FitThruster(a) => fit_thruster(a),
        SysidCommand::Synth(a) => synth(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn table_samples(path: &Path) -> Result<Vec<SteadyStateSample>, Failure> {
    read_pairs_file(path, ["applied", "velocity"])?
        .into_iter()
        .map(|(a, v)| SteadyStateSample::new(a, v).map_err(Failure::from))
        .collect()
}

fn log_sample(spec: &str) -> Result<SteadyStateSample, Failure> {
    let (level, path) = spec.split_once('=').ok_or_else(|| usage(format!("expected LEVEL=PATH, got `{spec}`")))?;
    let applied: f64 = level.trim().parse().map_err(|_| usage(format!("`{level}` is not a number")))?;
    let series = read_pairs_file(Path::new(path), ["t_s", "velocity"])?;
    if series.is_empty() {
        return Err(runtime(format!("{path}: log has no rows")));
    }
    let terminal = steady_state_value(&series)
        .ok_or_else(|| runtime(format!("{path}: velocity has not settled over the trailing window")))?;
    Ok(SteadyStateSample::new(applied, terminal)?)
}

struct AxisFit {
    fit: DragFit,
    sources: Vec<String>,
    samples: usize,
}

fn fit_axis(table: Option<&Path>, logs: &[String]) -> Result<Option<AxisFit>, Failure> {
    let mut samples = Vec::new();
    let mut sources = Vec::new();
    if let Some(path) = table {
        samples.extend(table_samples(path)?);
        sources.push(path.display().to_string());
    }
    for spec in logs {
        samples.push(log_sample(spec)?);
        sources.push(spec.split_once('=').map_or(spec.as_str(), |p| p.1).to_string());
    }
    if sources.is_empty() {
        return Ok(None);
    }
    let fit = fit_quadratic_drag(&samples)?;
    Ok(Some(AxisFit { fit, sources, samples: samples.len() }))
}

fn fit_drag(a: FitDragArgs) -> Result<(), Failure> {
    let cfg = a.common.resolve()?;
    let surge = fit_axis(a.surge.as_deref(), &a.surge_logs)?;
    let yaw = fit_axis(a.yaw.as_deref(), &a.yaw_logs)?;
    if surge.is_none() && yaw.is_none() {
        return Err(usage("fit-drag needs --surge, --yaw, --surge-log or --yaw-log"));
    }
    eprintln!("warning: sway is not identified; yv and yvv are clamped at {SWAY_CLAMP}");

    let base = cfg.hydro.identified;
    let mut text = String::from("# asvlab sysid fit-drag\n");
    let mut describe = |name: &str, unit: &str, fit: &Option<AxisFit>| {
        match fit {
            Some(f) => writeln!(
                text,
                "# {name}: {} samples from {}; residual RMS {:e} {unit}",
                f.samples,
                f.sources.join(", "),
                f.fit.residual_rms
            ),
            None => writeln!(text, "# {name}: not fitted, kept from configuration"),
        }
        .expect("string write");
    };
    describe("surge", "N", &surge);
    describe("yaw", "N·m", &yaw);
    let damping = Damping {
        xu: surge.as_ref().map_or(base.xu, |f| f.fit.linear),
        xuu: surge.as_ref().map_or(base.xuu, |f| f.fit.quadratic),
        yv: SWAY_CLAMP,
        yvv: SWAY_CLAMP,
        nr: yaw.as_ref().map_or(base.nr, |f| f.fit.linear),
        nrr: yaw.as_ref().map_or(base.nrr, |f| f.fit.quadratic),
    };
    damping.validate()?;
    writeln!(text, "# sway: not identified, clamped\n").expect("string write");
    write_damping(&mut text, "hydro.identified", &damping);
    emit(a.out.as_deref(), &text)
}

fn write_damping(text: &mut String, section: &str, d: &Damping) {
    writeln!(text, "[{section}]").expect("string write");
    for (k, v) in [("xu", d.xu), ("xuu", d.xuu), ("yv", d.yv), ("yvv", d.yvv), ("nr", d.nr), ("nrr", d.nrr)] {
        writeln!(text, "{k} = {v:?}").expect("string write");
    }
}

fn curve_toml(curve: &ThrusterCurve) -> String {
    let knots: Vec<String> = curve.knots().iter().map(|(c, f)| format!("[{c:?}, {f:?}]")).collect();
    format!("[{}]", knots.join(", "))
}

fn fit_thruster(a: FitThrusterArgs) -> Result<(), Failure> {
    let cfg = a.common.resolve()?;
    let samples: Vec<BollardSample> = read_pairs_file(&a.input, ["command", "force_n"])?
        .into_iter()
        .map(|(command, force)| BollardSample { command, force })
        .collect();
    let curve = fit_thruster_curve(&samples)?;
    let sse: f64 = samples.iter().map(|s| (curve.eval(s.command) - s.force).powi(2)).sum();
    let rms = (sse / samples.len() as f64).sqrt();
    let (left, right) = match a.side {
        Side::Left => (curve.clone(), cfg.thruster.right.clone()),
        Side::Right => (cfg.thruster.left.clone(), curve.clone()),
        Side::Both => (curve.clone(), curve.clone()),
    };
    let mut text = String::from("# asvlab sysid fit-thruster\n");
    writeln!(
        text,
        "# {} samples from {}; {} knots; residual RMS {rms:e} N; fitted side: {:?}\n",
        samples.len(),
        a.input.display(),
        curve.knots().len(),
        a.side
    )
    .expect("string write");
    writeln!(text, "[thruster]").expect("string write");
    writeln!(text, "left = {}", curve_toml(&left)).expect("string write");
    writeln!(text, "right = {}", curve_toml(&right)).expect("string write");
    writeln!(text, "separation = {:?}", cfg.thruster.separation).expect("string write");
    emit(a.out.as_deref(), &text)
}

fn write_test(dir: &Path, axis: &str, test: &SteadyStateTest, noise: f64, seed: u64, stream: u64) -> Result<(), Failure> {
    if let Some(run) = test.unconverged().next() {
        return Err(runtime(format!(
            "{axis} level {} did not settle (trailing spread {:e}); increase --duration",
            run.applied, run.spread
        )));
    }
    let mut r = rng::stream(seed, Purpose::Sysid, stream, 0);
    let rows: Vec<Vec<f64>> = test
        .samples()
        .iter()
        .map(|s| vec![s.applied, s.velocity * (1.0 + rng::symmetric(&mut r, noise))])
        .collect();
    write_columns_file(&dir.join(format!("{axis}_steady.csv")), &["applied", "velocity"], rows)?;
    for (k, run) in test.runs.iter().enumerate() {
        let rows = run.series.iter().map(|&(t, v)| vec![t, v]);
        write_columns_file(&dir.join(format!("{axis}_log_{k}.csv")), &["t_s", "velocity"], rows)?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let cfg = a.common.resolve()?;
    if !(a.noise.is_finite() && (0.0..1.0).contains(&a.noise)) {
        return Err(usage(format!("--noise must lie in [0, 1), got {}", a.noise)));
    }
    let source = match a.source {
        Source::Nominal => HydroSource::Nominal,
        Source::Identified => HydroSource::Identified,
    };
    let params = cfg.hydro(source);
    let d = params.damping;
    create_dir(&a.out)?;
    let surge = simulate_acceleration_test(&params, &levels_for_speeds(d.xu, d.xuu, &SYNTH_SPEEDS), a.duration)?;
    let yaw = simulate_rotation_test(&params, &levels_for_speeds(d.nr, d.nrr, &SYNTH_SPEEDS), a.duration)?;
    write_test(&a.out, "surge", &surge, a.noise, cfg.master_seed, 0)?;
    write_test(&a.out, "yaw", &yaw, a.noise, cfg.master_seed, 1)?;

    let curve = &cfg.thruster.left;
    let bollard = (0..=20).map(|k| {
        let c = -1.0 + 0.1 * f64::from(k);
        vec![c, curve.eval(c)]
    });
    write_columns_file(&a.out.join("bollard.csv"), &["command", "force_n"], bollard)?;

    let mut levels = String::from("# steady level of each log: axis, index, applied\n");
    for (axis, test) in [("surge", &surge), ("yaw", &yaw)] {
        for (k, run) in test.runs.iter().enumerate() {
            writeln!(levels, "{axis},{k},{:?}", run.applied).expect("string write");
        }
    }
    write_file(&a.out.join("levels.txt"), &levels)?;
    println!(
        "wrote {} surge and {} yaw levels, noise ±{}, to {}",
        surge.runs.len(),
        yaw.runs.len(),
        a.noise,
        a.out.display()
    );
    Ok(())
}
