//! Command-line front end for the `qcvz` binary.
//!
//! Every run gets an id `<command>-<hash>` derived from its canonical
//! parameters. Outputs are assembled in memory and written together at the end,
//! each with a `<file>.manifest.json` sidecar.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::calibration::{calibrate_pulse, pulse_drive, residual_ratio, CalibratedPulse, Fixed, PulseSetup};
use crate::compiler::{compile, parallelism_stats, Program, ScheduleMode, SyncPolicy};
use crate::config::{Device, DeviceConfig};
use crate::error::{invalid, Error, Result};
use crate::mixer::{amplitude_map, output_spectrum, BitTimeline, DriveEnvelope};
use crate::plot::{emit_plot, PlotKind};
use crate::qubit::chevron::chevron;
use crate::qubit::experiments::{run_experiment, DriveSetup, ExperimentKind};
use crate::qubit::fit::{fit_curve, FitModel};
use crate::qubit::{auto_dt, evolve, DensityMatrix};
use crate::resources::{resource_report, ResourceParams, PEAK_PW, STANDBY_PW};
use crate::signals::{make_if_program, CycleSpec, Envelope, EnvelopeShape, PhaseMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "QCVZ_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "qcvz", version, about = "Multiplexed qubit controller simulator and virtual-Z compiler")]
struct Cli {
    /// Device description (JSON). A built-in one-qubit device is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $QCVZ_OUT_DIR, then ./out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Excited population over IF frequency and pulse length.
    Chevron(ChevronArgs),
    /// Rabi oscillation under continuous drive, optionally with the off/on residual ratio.
    Rabi(RabiArgs),
    /// Energy relaxation.
    T1(SweepArgs),
    /// Ramsey fringes.
    Ramsey(RamseyArgs),
    /// Hahn echo.
    Echo(SweepArgs),
    /// Ramsey over the IF phase of the second pulse.
    VzRamsey(VzArgs),
    /// Calibrates the π/2 and π pulses of one qubit.
    Calibrate(CalibrateArgs),
    /// Mixer output tones in the on and off states, plus LO crosstalk.
    Spectrum(SpectrumArgs),
    /// Lowers and schedules a gate program.
    Compile(CompileArgs),
    /// Power and wiring estimates for N qubits.
    Resources(ResourcesArgs),
    /// Renders a CSV output as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct QubitArg {
    /// Qubit index in the device.
    #[arg(long, default_value_t = 0)]
    qubit: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ChevronArgs {
    #[command(flatten)]
    q: QubitArg,
    /// LO frequency [default: the qubit's channel tone]
    #[arg(long)]
    f_lo_hz: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    a_if: f64,
    /// First IF frequency [default: 40 steps below the device IF, on the step grid]
    #[arg(long)]
    f_if_start_hz: Option<f64>,
    #[arg(long, default_value_t = 0.2e6)]
    f_if_step_hz: f64,
    #[arg(long, default_value_t = 81)]
    f_if_points: usize,
    #[arg(long, default_value_t = 200e-9)]
    tau_max_s: f64,
    #[arg(long, default_value_t = 101)]
    tau_points: usize,
    /// Hold the mixer in its off state.
    #[arg(long)]
    off: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RabiArgs {
    #[command(flatten)]
    q: QubitArg,
    #[arg(long, default_value_t = 0.5)]
    a_if: f64,
    /// Drive length [default: three Rabi periods]
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    off: bool,
    /// Comma-separated IF amplitudes for an off/on Rabi-rate ratio sweep.
    #[arg(long, value_delimiter = ',')]
    a_grid: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    q: QubitArg,
    /// Longest delay [default: three coherence times, or 10 µs without decay]
    #[arg(long)]
    max_delay_s: Option<f64>,
    /// Sweep points [default: 61, raised to 12 per fringe period for a detuned Ramsey]
    #[arg(long)]
    points: Option<usize>,
    /// Calibrated pulses from `calibrate`; calibrates on the fly when omitted.
    #[arg(long)]
    pulses: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct RamseyArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    detuning_hz: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct VzArgs {
    #[command(flatten)]
    q: QubitArg,
    #[arg(long, default_value_t = 0.0)]
    delay_s: f64,
    /// Points over Δθ ∈ [0°, 360°).
    #[arg(long, default_value_t = 72)]
    points: usize,
    #[arg(long)]
    pulses: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CalibrateArgs {
    #[command(flatten)]
    q: QubitArg,
    /// Pulse duration [default: from the device]
    #[arg(long)]
    tau_s: Option<f64>,
    /// flat, triangular or gaussian [default: from the device]
    #[arg(long, value_parser = parse_shape)]
    shape: Option<EnvelopeShape>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SpectrumArgs {
    #[command(flatten)]
    q: QubitArg,
    #[arg(long, default_value_t = 0.5)]
    a_if: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta_deg: f64,
    #[arg(long, default_value_t = 64)]
    cycles: usize,
    /// Synthesis rate [default: four times the sum frequency]
    #[arg(long)]
    rate_hz: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CompileArgs {
    /// Program JSON: `{"qubits": [["X90", "T", ...], ...]}`.
    #[arg(long, required_unless_present = "random", conflicts_with = "random")]
    program: Option<PathBuf>,
    /// Random workload on this many qubits (seeded by --seed).
    #[arg(long)]
    random: Option<usize>,
    /// X90 pulses per qubit in the random workload.
    #[arg(long, default_value_t = 200)]
    pulses: usize,
    #[arg(long, default_value = "quantized45")]
    mode: ScheduleMode,
    #[arg(long, default_value = "asap")]
    sync: SyncPolicy,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ResourcesArgs {
    #[arg(short = 'n', long)]
    n_qubits: u64,
    #[arg(long, default_value_t = STANDBY_PW)]
    standby_pw: f64,
    #[arg(long, default_value_t = PEAK_PW)]
    peak_pw: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// heatmap (alias chevron) or line (alias trajectory)
    #[arg(long)]
    kind: PlotKind,
}

fn parse_shape(s: &str) -> std::result::Result<EnvelopeShape, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown shape `{s}`"))
}

/// One file produced by a run.
struct Output {
    suffix: String,
    contents: Vec<u8>,
}

impl Output {
    fn new(suffix: &str, contents: impl Into<Vec<u8>>) -> Self {
        Self {
            suffix: suffix.to_string(),
            contents: contents.into(),
        }
    }

    fn json(suffix: &str, v: &impl Serialize) -> Result<Self> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        Ok(Self::new(suffix, s))
    }
}

struct RunResult {
    /// Inputs beyond the arguments that determine the result (loaded files, device).
    inputs: Value,
    outputs: Vec<Output>,
    stdout: String,
}

/// Parses `args` (including the program name) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err((code, e)) => {
            eprintln!("error: {e}");
            code
        }
    }
}

/// Exit code for an error raised while computing a result.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

fn execute(cli: &Cli) -> std::result::Result<(), (i32, Error)> {
    let (name, args) = command_params(&cli.command).map_err(|e| (EXIT_INPUT, e))?;
    let result = dispatch(cli).map_err(|e| (exit_code(&e), e))?;
    let params = json!({
        "command": name,
        "args": args,
        "seed": cli.seed,
        "inputs": result.inputs,
    });
    let id = run_id(name, &params);
    let dir = out_dir(cli.out.as_deref());
    let written = write_outputs(&dir, &id, name, &params, &result.outputs).map_err(|e| (EXIT_IO, e))?;
    print!("{}", result.stdout);
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn command_params(c: &Command) -> Result<(&'static str, Value)> {
    Ok(match c {
        Command::Chevron(a) => ("chevron", serde_json::to_value(a)?),
        Command::Rabi(a) => ("rabi", serde_json::to_value(a)?),
        Command::T1(a) => ("t1", serde_json::to_value(a)?),
        Command::Ramsey(a) => ("ramsey", serde_json::to_value(a)?),
        Command::Echo(a) => ("echo", serde_json::to_value(a)?),
        Command::VzRamsey(a) => ("vz-ramsey", serde_json::to_value(a)?),
        Command::Calibrate(a) => ("calibrate", serde_json::to_value(a)?),
        Command::Spectrum(a) => ("spectrum", serde_json::to_value(a)?),
        Command::Compile(a) => ("compile", serde_json::to_value(a)?),
        Command::Resources(a) => ("resources", serde_json::to_value(a)?),
        Command::Plot(a) => ("plot", serde_json::to_value(a)?),
    })
}

/// `<command>-<first 12 hex digits of SHA-256 of the canonical parameter JSON>`.
///
/// `serde_json` maps keep keys sorted, so the serialization is canonical.
pub fn run_id(command: &str, params: &Value) -> String {
    let digest = Sha256::digest(params.to_string().as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("{command}-{hex}")
}

fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_outputs(dir: &Path, id: &str, command: &str, params: &Value, outputs: &[Output]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let names: Vec<String> = outputs.iter().map(|o| format!("{id}{}", o.suffix)).collect();
    let mut written = Vec::new();
    for (o, name) in outputs.iter().zip(&names) {
        let manifest = json!({
            "run_id": id,
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "file": name,
            "sha256": hex(&Sha256::digest(&o.contents)),
            "bytes": o.contents.len(),
            "outputs": names,
            "params": params,
        });
        let path = dir.join(name);
        write_atomic(&path, &o.contents)?;
        let mut m = serde_json::to_string_pretty(&manifest)?;
        m.push('\n');
        write_atomic(&dir.join(format!("{name}.manifest.json")), m.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

struct Loaded {
    config: DeviceConfig,
    device: Device,
}

fn load_device(cli: &Cli) -> Result<Loaded> {
    let config = match &cli.config {
        Some(p) => DeviceConfig::load(p)?,
        None => DeviceConfig::single_qubit(),
    };
    let device = config.build()?;
    Ok(Loaded { config, device })
}

fn check_qubit(d: &Device, q: usize) -> Result<()> {
    if q >= d.qubits.len() {
        return Err(Error::Config(format!("qubit {q} not in device ({} qubits)", d.qubits.len())));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<RunResult> {
    match &cli.command {
        Command::Chevron(a) => cmd_chevron(cli, a),
        Command::Rabi(a) => cmd_rabi(cli, a),
        Command::T1(a) => cmd_sweep(cli, ExperimentKind::T1, a),
        Command::Echo(a) => cmd_sweep(cli, ExperimentKind::Echo, a),
        Command::Ramsey(a) => cmd_sweep(
            cli,
            ExperimentKind::Ramsey {
                detuning_hz: a.detuning_hz,
            },
            &a.sweep,
        ),
        Command::VzRamsey(a) => cmd_vz(cli, a),
        Command::Calibrate(a) => cmd_calibrate(cli, a),
        Command::Spectrum(a) => cmd_spectrum(cli, a),
        Command::Compile(a) => cmd_compile(cli, a),
        Command::Resources(a) => cmd_resources(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn device_inputs(l: &Loaded) -> Result<Value> {
    Ok(json!({ "device": serde_json::to_value(&l.config)? }))
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn csv_text<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [f64; N]>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn cmd_chevron(cli: &Cli, a: &ChevronArgs) -> Result<RunResult> {
    let l = load_device(cli)?;
    check_qubit(&l.device, a.q.qubit)?;
    let i = a.q.qubit;
    if a.f_if_points == 0 || a.tau_points == 0 || !(a.f_if_step_hz > 0.0) || !(a.tau_max_s > 0.0) {
        return Err(invalid("chevron grid sizes, step and maximum length must be positive"));
    }
    let step = a.f_if_step_hz;
    let half = (a.f_if_points - 1) as f64 / 2.0;
    let start = a
        .f_if_start_hz
        .unwrap_or_else(|| ((l.device.if_defaults.f_if_hz - half * step) / step).round() * step);
    let f_grid: Vec<f64> = (0..a.f_if_points).map(|k| start + k as f64 * step).collect();
    let tau_grid = linspace(0.0, a.tau_max_s, a.tau_points);
    let cfg = &l.device.mixers[i];
    let f_lo = a.f_lo_hz.unwrap_or(cfg.channel.freq_hz);
    let c = chevron(&l.device.qubits[i], cfg, f_lo, a.a_if, &f_grid, &tau_grid, !a.off)?;

    let rows = c
        .f_if_hz
        .iter()
        .enumerate()
        .flat_map(|(fi, &f)| c.tau_s.iter().enumerate().map(move |(ti, &t)| (fi, ti, f, t)))
        .map(|(fi, ti, f, t)| [f, t, c.p1[fi][ti]]);
    let csv = csv_text(["f_if_hz", "tau_s", "p1"], rows)?;
    let axis = c.symmetry_axis_hz().ok();
    let summary = json!({
        "f_lo_hz": f_lo,
        "symmetry_axis_hz": axis,
        "resonant_f_if_hz": f_lo - l.device.qubits[i].freq_hz,
        "max_p1": c.p1.iter().flatten().copied().fold(0.0, f64::max),
    });
    Ok(RunResult {
        inputs: device_inputs(&l)?,
        outputs: vec![Output::new(".csv", csv), Output::json(".json", &summary)?],
        stdout: String::new(),
    })
}

fn cmd_rabi(cli: &Cli, a: &RabiArgs) -> Result<RunResult> {
    let l = load_device(cli)?;
    check_qubit(&l.device, a.q.qubit)?;
    let q = &l.device.qubits[a.q.qubit];
    let cfg = &l.device.mixers[a.q.qubit];
    let f_if = l.device.if_defaults.f_if_hz;
    if a.points < 2 {
        return Err(invalid("need at least two points"));
    }
    let bit = !a.off;
    let expected = cfg.lo_drive_factor() * amplitude_map(cfg, a.a_if)? * if bit { 1.0 } else { cfg.residual() };
    let duration = match a.duration_s {
        Some(d) if d > 0.0 => d,
        Some(d) => return Err(invalid(format!("duration must be positive, got {d}"))),
        None if expected > 0.0 => 3.0 / expected,
        None => return Err(invalid("no drive: give --duration-s")),
    };
    let probe = pulse_drive(cfg, f_if, EnvelopeShape::Flat, duration, a.a_if, 0.0, bit)?;
    let interval = duration / a.points as f64;
    let drive = DriveEnvelope {
        samples: vec![probe.samples[0]; a.points],
        rate_hz: 1.0 / interval,
        ..probe
    };
    let dt = auto_dt(q, &drive, f64::INFINITY);
    let traj = evolve(q, &drive, &DensityMatrix::ground(), dt)?;
    let stride = ((interval / dt).round() as usize).max(1);
    let (t, p): (Vec<f64>, Vec<f64>) = traj.times.iter().zip(&traj.p1).step_by(stride).map(|(t, p)| (*t, *p)).unzip();
    let mut outputs = vec![Output::new(
        ".csv",
        csv_text(["t_s", "p1"], t.iter().zip(&p).map(|(t, p)| [*t, *p]))?,
    )];
    let fit = fit_curve(FitModel::RabiSinusoid, &t, &p)?;
    let mut summary = json!({ "expected_rabi_hz": expected, "fit": fit });
    if !a.a_grid.is_empty() {
        let ratios = residual_ratio(q, cfg, f_if, &a.a_grid)?;
        outputs.push(Output::new(
            "-ratio.csv",
            csv_text(["a_if", "ratio"], ratios.iter().map(|(a, r)| [*a, *r]))?,
        ));
        summary["residual"] = json!(cfg.residual());
    }
    outputs.push(Output::json(".json", &summary)?);
    Ok(RunResult {
        inputs: device_inputs(&l)?,
        outputs,
        stdout: String::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PulsePair {
    half_pi: CalibratedPulse,
    pi: CalibratedPulse,
}

fn calibrate_pair(l: &Loaded, qubit: usize, tau: f64, shape: EnvelopeShape) -> Result<PulsePair> {
    let q = &l.device.qubits[qubit];
    let cfg = &l.device.mixers[qubit];
    let setup = PulseSetup {
        f_if_hz: l.device.if_defaults.f_if_hz,
        shape,
        theta_if_deg: 0.0,
    };
    let half_pi = calibrate_pulse(q, cfg, std::f64::consts::FRAC_PI_2, Fixed::Duration(tau), &setup)?;
    let pi = calibrate_pulse(q, cfg, std::f64::consts::PI, Fixed::Duration(tau), &setup)?;
    Ok(PulsePair { half_pi, pi })
}

/// Pulses from `--pulses`, or freshly calibrated with the device defaults.
fn drive_setup(l: &Loaded, qubit: usize, pulses: Option<&Path>, inputs: &mut Value) -> Result<DriveSetup> {
    check_qubit(&l.device, qubit)?;
    let pair = match pulses {
        Some(p) => {
            let pair: PulsePair =
                serde_json::from_str(&read_input(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            inputs["pulses"] = serde_json::to_value(&pair)?;
            pair
        }
        None => calibrate_pair(l, qubit, l.device.pulse_duration_s(), l.device.if_defaults.shape)?,
    };
    DriveSetup::new(l.device.qubits[qubit], l.device.mixers[qubit], pair.half_pi, pair.pi)
}

fn experiment_outputs(kind: ExperimentKind, setup: &DriveSetup, xs: &[f64]) -> Result<Vec<Output>> {
    let curve = run_experiment(kind, setup, xs)?;
    let fit = curve.fit()?;
    let csv = csv_text([kind.x_label(), "p1"], curve.x.iter().zip(&curve.p1).map(|(x, p)| [*x, *p]))?;
    let mut summary = json!({ "experiment": kind, "fit": fit });
    if let Some(tau) = fit.decay_time_s() {
        summary["decay_time_s"] = json!(tau);
    }
    Ok(vec![Output::new(".csv", csv), Output::json(".json", &summary)?])
}

fn cmd_sweep(cli: &Cli, kind: ExperimentKind, a: &SweepArgs) -> Result<RunResult> {
    let l = load_device(cli)?;
    let mut inputs = device_inputs(&l)?;
    let setup = drive_setup(&l, a.q.qubit, a.pulses.as_deref(), &mut inputs)?;
    let coherence = match kind {
        ExperimentKind::T1 => setup.qubit.t1_s,
        _ => setup.qubit.t2_s(),
    };
    let max = a
        .max_delay_s
        .unwrap_or(if coherence.is_finite() { 3.0 * coherence } else { 10e-6 });
    if !(max > 0.0) {
        return Err(invalid(format!("maximum delay must be positive, got {max}")));
    }
    let fringes = match kind {
        ExperimentKind::Ramsey { detuning_hz } => max * detuning_hz.abs(),
        _ => 0.0,
    };
    let points = a.points.unwrap_or(61.max((12.0 * fringes).ceil() as usize + 1));
    if points < 2 {
        return Err(invalid("need at least two points"));
    }
    let xs = linspace(0.0, max, points);
    Ok(RunResult {
        inputs,
        outputs: experiment_outputs(kind, &setup, &xs)?,
        stdout: String::new(),
    })
}

fn cmd_vz(cli: &Cli, a: &VzArgs) -> Result<RunResult> {
    let l = load_device(cli)?;
    let mut inputs = device_inputs(&l)?;
    let setup = drive_setup(&l, a.q.qubit, a.pulses.as_deref(), &mut inputs)?;
    if a.points < 4 {
        return Err(invalid("need at least four points"));
    }
    let xs: Vec<f64> = (0..a.points).map(|k| 360.0 * k as f64 / a.points as f64).collect();
    Ok(RunResult {
        inputs,
        outputs: experiment_outputs(ExperimentKind::VzRamsey { delay_s: a.delay_s }, &setup, &xs)?,
        stdout: String::new(),
    })
}

fn cmd_calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<RunResult> {
    let l = load_device(cli)?;
    check_qubit(&l.device, a.q.qubit)?;
    let tau = a.tau_s.unwrap_or(l.device.pulse_duration_s());
    let shape = a.shape.unwrap_or(l.device.if_defaults.shape);
    let pair = calibrate_pair(&l, a.q.qubit, tau, shape)?;
    Ok(RunResult {
        inputs: device_inputs(&l)?,
        outputs: vec![Output::json(".json", &pair)?],
        stdout: String::new(),
    })
}

fn cmd_spectrum(cli: &Cli, a: &SpectrumArgs) -> Result<RunResult> {
    let l = load_device(cli)?;
    check_qubit(&l.device, a.q.qubit)?;
    let cfg = &l.device.mixers[a.q.qubit];
    let d = &l.device.if_defaults;
    if a.cycles == 0 {
        return Err(invalid("need at least one cycle"));
    }
    let env = Envelope::flat(d.cycle_period_s, a.a_if)?;
    let prog = make_if_program(
        d.f_if_hz,
        d.cycle_period_s,
        vec![CycleSpec::pulse(a.theta_deg, env); a.cycles],
        PhaseMode::Free,
    )?;
    let rate = a.rate_hz.unwrap_or(4.0 * (cfg.channel.freq_hz + d.f_if_hz));
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for on in [true, false] {
        let spec = output_spectrum(cfg, &prog, &BitTimeline::all(on, a.cycles), rate)?;
        for s in &spec {
            rows.push(vec![
                if on { "on" } else { "off" }.to_string(),
                s.kind.as_str().to_string(),
                s.freq_hz.to_string(),
                s.power_db.to_string(),
            ]);
        }
        lines.push(json!({ "state": if on { "on" } else { "off" }, "lines": spec }));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["state", "kind", "freq_hz", "power_db"])?;
    for r in &rows {
        w.write_record(r)?;
    }
    let spectrum_csv = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;

    let x = &l.device.demux.crosstalk_db;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["resonator", "tone", "gain_db"])?;
    for (k, row) in x.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            w.write_record([k.to_string(), j.to_string(), g.to_string()])?;
        }
    }
    let crosstalk_csv = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(RunResult {
        inputs: device_inputs(&l)?,
        outputs: vec![
            Output::new(".csv", spectrum_csv),
            Output::new("-crosstalk.csv", crosstalk_csv),
            Output::json(".json", &json!({ "spectra": lines, "crosstalk_db": x }))?,
        ],
        stdout: String::new(),
    })
}

fn cmd_compile(cli: &Cli, a: &CompileArgs) -> Result<RunResult> {
    let (program, inputs) = match (&a.program, a.random) {
        (Some(p), _) => {
            let prog = Program::from_json(&read_input(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let v = serde_json::to_value(&prog)?;
            (prog, json!({ "program": v }))
        }
        (None, Some(n)) => (Program::random(n, a.pulses, cli.seed)?, json!({})),
        (None, None) => return Err(invalid("give --program or --random")),
    };
    let (lowered, sched) = compile(&program, a.mode, a.sync)?;
    let stats = parallelism_stats(&sched);
    let doc = json!({
        "mode": a.mode.to_string(),
        "lowered": lowered,
        "schedule": sched,
        "stats": stats,
    });
    let stdout = format!(
        "cycles {}  pulses {}  mean parallelism {:.4}\n",
        stats.cycles,
        sched.total_pulses(),
        stats.mean_fired
    );
    Ok(RunResult {
        inputs,
        outputs: vec![Output::json(".json", &doc)?, Output::new(".csv", sched.to_csv()?)],
        stdout,
    })
}

fn cmd_resources(a: &ResourcesArgs) -> Result<RunResult> {
    let p = ResourceParams {
        standby_pw: a.standby_pw,
        peak_pw: a.peak_pw,
        ..ResourceParams::default()
    };
    let r = resource_report(a.n_qubits, &p)?;
    Ok(RunResult {
        inputs: json!({ "params": p }),
        outputs: vec![Output::json(".json", &r)?],
        stdout: r.table(),
    })
}

fn cmd_plot(a: &PlotArgs) -> Result<RunResult> {
    let text = read_input(&a.csv)?;
    let title = a.csv.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let svg = emit_plot(&text, a.kind, &title)?;
    Ok(RunResult {
        inputs: json!({ "csv_sha256": hex(&Sha256::digest(text.as_bytes())) }),
        outputs: vec![Output::new(".svg", svg)],
        stdout: String::new(),
    })
}
