//! `sulfursense` — command-line front end for the sulfur-deposition sensing
//! toolkit: analytic patch models, FDTD S11 simulation, thickness sweeps,
//! calibration-curve inversion, and the TCP monitoring service.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sulfursense::inversion::{self, CalibrationCurve};
use sulfursense::monitor::{self, AlarmConfig, ServeConfig};
use sulfursense::scene::SceneConfig;
use sulfursense::sparams::{self, TouchstoneFormat};
use sulfursense::stackup;
use sulfursense::fdtd;

#[derive(Parser)]
#[command(
    name = "sulfursense",
    version,
    about = "Microwave sensing toolkit for sulfur deposition on patch antennas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the analytic patch model over a deposit-thickness sweep.
    ///
    /// Emits CSV rows (thickness_mm, eps_e, fr_ghz, frac_shift).
    Model {
        #[command(flatten)]
        scene: SceneArgs,
        /// Thickness sweep in mm as start:stop[:step] (step defaults to 1).
        #[arg(long = "thickness-sweep", default_value = "0:7:1")]
        thickness_sweep: String,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one FDTD simulation and write the port S11 as Touchstone.
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output .s1p path.
        #[arg(long)]
        out: PathBuf,
        /// Touchstone number format: ri, ma or db.
        #[arg(long, default_value = "ri")]
        format: FormatArg,
    },
    /// Run FDTD simulations over a deposit-thickness sweep.
    ///
    /// Writes one .s1p per thickness plus summary.csv (t, f_res, depth_db)
    /// into --out-dir.
    Sweep {
        #[command(flatten)]
        scene: SceneArgs,
        /// Thickness sweep in mm as start:stop[:step] (step defaults to 1).
        #[arg(long)]
        thickness: String,
        /// Worker threads; results are bit-identical regardless of count.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (created if missing).
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Invert a measured trace or dip frequency into a thickness estimate.
    ///
    /// Prints a JSON object with thickness_mm, uncertainty_mm and status.
    Invert {
        /// Calibration curve CSV.
        #[arg(long)]
        curve: PathBuf,
        /// Measured 1-port Touchstone file; the dip frequency is extracted.
        #[arg(long, conflicts_with = "freq")]
        input: Option<PathBuf>,
        /// Measured dip frequency in GHz (alternative to --input).
        #[arg(long)]
        freq: Option<f64>,
        /// Frequency resolution in GHz used for the uncertainty estimate.
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,
    },
    /// Run the TCP line-protocol monitoring service.
    Monitor {
        /// Listen address, e.g. 127.0.0.1:7070.
        #[arg(long)]
        listen: String,
        /// Directory of calibration CSVs; the file stem is the sensor id.
        #[arg(long)]
        calibration: PathBuf,
        /// JSON-lines journal path (replayed on startup).
        #[arg(long)]
        journal: PathBuf,
        /// JSON-lines alarm log path (defaults to <journal dir>/alarms.jsonl).
        #[arg(long)]
        alarms: Option<PathBuf>,
        /// Thickness alarm threshold, mm.
        #[arg(long = "alert-thickness", default_value_t = 5.0)]
        alert_thickness: f64,
        /// Deposition-rate alarm threshold, mm/h.
        #[arg(long = "alert-rate", default_value_t = 0.5)]
        alert_rate: f64,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Scene configuration JSON; built-in reference scene when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Ri,
    Ma,
    Db,
}

impl From<FormatArg> for TouchstoneFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ri => TouchstoneFormat::Ri,
            FormatArg::Ma => TouchstoneFormat::Ma,
            FormatArg::Db => TouchstoneFormat::Db,
        }
    }
}

/// Usage-level failures exit 2, runtime failures exit 1.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
    fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Model {
            scene,
            thickness_sweep,
            out,
        } => cmd_model(&scene, &thickness_sweep, out.as_deref()),
        Command::Simulate { scene, out, format } => cmd_simulate(&scene, &out, format.into()),
        Command::Sweep {
            scene,
            thickness,
            jobs,
            out_dir,
        } => cmd_sweep(&scene, &thickness, jobs, &out_dir),
        Command::Invert {
            curve,
            input,
            freq,
            resolution,
        } => cmd_invert(&curve, input.as_deref(), freq, resolution),
        Command::Monitor {
            listen,
            calibration,
            journal,
            alarms,
            alert_thickness,
            alert_rate,
        } => cmd_monitor(
            &listen,
            &calibration,
            &journal,
            alarms,
            alert_thickness,
            alert_rate,
        ),
    }
}

fn load_scene(args: &SceneArgs) -> Result<SceneConfig, CliError> {
    match &args.config {
        None => Ok(SceneConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            SceneConfig::from_json(&text)
                .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
        }
    }
}

/// Parse "start:stop[:step]" into an inclusive thickness list in mm.
/// A step larger than the span yields just the two endpoints.
fn parse_sweep(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() < 2 || parts.len() > 3 {
        return Err(CliError::usage(format!(
            "sweep '{text}' must be start:stop[:step]"
        )));
    }
    let num = |s: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::usage(format!("sweep '{text}': '{s}' is not a number")))
    };
    let a = num(parts[0])?;
    let b = num(parts[1])?;
    let step = if parts.len() == 3 { num(parts[2])? } else { 1.0 };
    if !(step > 0.0) {
        return Err(CliError::usage(format!(
            "sweep '{text}': step must be positive"
        )));
    }
    if b < a {
        return Err(CliError::usage(format!(
            "sweep '{text}': empty range (stop < start)"
        )));
    }
    let mut out = Vec::new();
    let mut v = a;
    while v < b - 1e-9 {
        out.push(v);
        v += step;
    }
    out.push(b);
    Ok(out)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display()))),
    }
}

fn cmd_model(scene: &SceneArgs, sweep: &str, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load_scene(scene)?;
    let thicknesses = parse_sweep(sweep)?;
    let geom = cfg.patch_geometry();
    let base = cfg.layer_stack();
    let (sup_eps, sup_tan_d) = match base.superstrate {
        Some(s) => (s.relative_permittivity, s.loss_tangent),
        None => (stackup::SULFUR_EPS_R, stackup::SULFUR_TAN_D),
    };

    let mut csv = String::from("thickness_mm,eps_e,fr_ghz,frac_shift\n");
    for &t in &thicknesses {
        let stack = base.with_superstrate(sup_eps, sup_tan_d, t);
        let eps = stackup::eff_eps_covered(&geom, &stack)
            .map_err(|e| CliError::runtime(format!("model at t = {t} mm: {e}")))?;
        let fr = stackup::patch_resonance(&geom, &stack)
            .map_err(|e| CliError::runtime(format!("model at t = {t} mm: {e}")))?;
        let shift = stackup::fractional_shift(&eps)
            .map_err(|e| CliError::runtime(format!("model at t = {t} mm: {e}")))?;
        writeln!(csv, "{t},{:.9},{fr:.9},{shift:.9}", eps.eps_e).expect("string write");
    }
    write_or_print(out, &csv)
}

fn cmd_simulate(scene: &SceneArgs, out: &Path, format: TouchstoneFormat) -> Result<(), CliError> {
    let cfg = load_scene(scene)?;
    let spec = cfg.simulation_spec();
    let ts = fdtd::run(&spec).map_err(|e| CliError::runtime(format!("simulation: {e}")))?;
    let grid = fdtd::default_freq_grid(&spec.excitation);
    let trace = fdtd::port_s11(&ts, spec.port_resistance, &grid)
        .map_err(|e| CliError::runtime(format!("s11 extraction: {e}")))?;
    write_or_print(Some(out), &sparams::write_touchstone(&trace, format))
}

fn cmd_sweep(scene: &SceneArgs, sweep: &str, jobs: usize, out_dir: &Path) -> Result<(), CliError> {
    let cfg = load_scene(scene)?;
    let thicknesses = parse_sweep(sweep)?;
    if jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let spec = cfg.simulation_spec();
    let results = fdtd::sweep_thickness(&spec, &thicknesses, jobs);

    let mut summary = String::from("thickness_mm,f_res_ghz,depth_db\n");
    let mut failures = Vec::new();
    for (t, res) in &results {
        match res {
            Ok(trace) => {
                let name = format!("t_{:.3}mm.s1p", t);
                let path = out_dir.join(&name);
                std::fs::write(&path, sparams::write_touchstone(trace, TouchstoneFormat::Ri))
                    .map_err(|e| {
                        CliError::runtime(format!("cannot write {}: {e}", path.display()))
                    })?;
                let dip = sparams::find_dip(trace)
                    .map_err(|e| CliError::runtime(format!("dip at t = {t} mm: {e}")))?;
                writeln!(summary, "{t},{:.9},{:.9}", dip.f_res_ghz, dip.depth_db)
                    .expect("string write");
            }
            Err(e) => failures.push(format!("t = {t} mm: {e}")),
        }
    }
    let path = out_dir.join("summary.csv");
    std::fs::write(&path, summary)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::runtime(format!(
            "{} of {} runs failed:\n  {}",
            failures.len(),
            results.len(),
            failures.join("\n  ")
        )))
    }
}

fn cmd_invert(
    curve_path: &Path,
    input: Option<&Path>,
    freq: Option<f64>,
    resolution: f64,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(curve_path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", curve_path.display())))?;
    let curve = CalibrationCurve::from_csv(&text)
        .map_err(|e| CliError::usage(format!("invalid curve {}: {e}", curve_path.display())))?;

    let f_meas = match (input, freq) {
        (Some(path), None) => {
            let trace = sparams::read_touchstone_file(path)
                .map_err(|e| CliError::usage(format!("invalid trace {}: {e}", path.display())))?;
            sparams::find_dip(&trace)
                .map_err(|e| CliError::runtime(format!("dip extraction: {e}")))?
                .f_res_ghz
        }
        (None, Some(f)) => f,
        _ => return Err(CliError::usage("exactly one of --input or --freq is required")),
    };

    let est = inversion::invert_frequency(&curve, f_meas, resolution)
        .map_err(|e| CliError::runtime(format!("inversion: {e}")))?;
    println!(
        "{}",
        serde_json::json!({
            "f_meas_ghz": f_meas,
            "thickness_mm": est.thickness_mm,
            "uncertainty_mm": est.uncertainty_mm,
            "status": est.status,
        })
    );
    Ok(())
}

fn cmd_monitor(
    listen: &str,
    calibration: &Path,
    journal: &Path,
    alarms: Option<PathBuf>,
    alert_thickness: f64,
    alert_rate: f64,
) -> Result<(), CliError> {
    let mut sensors: BTreeMap<String, CalibrationCurve> = BTreeMap::new();
    let entries = std::fs::read_dir(calibration)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", calibration.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::runtime(e.to_string()))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        let curve = CalibrationCurve::from_csv(&text)
            .map_err(|e| CliError::usage(format!("invalid curve {}: {e}", path.display())))?;
        sensors.insert(id, curve);
    }
    if sensors.is_empty() {
        return Err(CliError::usage(format!(
            "no calibration CSVs found in {}",
            calibration.display()
        )));
    }
    let alarm_path = alarms.unwrap_or_else(|| {
        journal
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("alarms.jsonl")
    });
    eprintln!(
        "monitor: {} sensors, listening on {listen} (thickness alarm {alert_thickness} mm, rate alarm {alert_rate} mm/h)",
        sensors.len()
    );
    monitor::serve(ServeConfig {
        listen: listen.to_string(),
        sensors,
        journal_path: journal.to_path_buf(),
        alarm_path,
        alarm: AlarmConfig {
            thickness_mm: alert_thickness,
            rate_mm_per_hour: alert_rate,
            ..AlarmConfig::default()
        },
    })
    .map_err(|e| CliError::runtime(format!("monitor: {e}")))
}
