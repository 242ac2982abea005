//! `photsub`: command-line front end. Data goes to stdout (JSON) or to the
//! `--out` file (CSV); diagnostics go to stderr.
//!
//! Exit codes: 0 success, 2 usage error, 1 computation error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use photsub::bell::{chsh_value, AngleSettings};
use photsub::entanglement::{
    concurrence, effective_eof_finite_zeta, effective_eof_projected, eof, min_partial_transpose_eigenvalue,
    ppt_entangled, project_for, threshold_general_t, threshold_small_t, TwoQubitDm,
};
use photsub::fock::MixedState;
use photsub::optimize::sweep::{run_sweep, write_csv, Figure, SweepGrid, SweepTask, CSV_HEADER};
use photsub::optimize::{
    minimize_ch, optimize_chsh_angles, small_t_state, NelderMead, DEFAULT_SEED, DEFAULT_STARTS, DISPLACEMENT_BOX,
    T_GRID_POINTS, T_MAX, T_MIN, T_TOLERANCE,
};
use photsub::schemes::SchemeKind;
use photsub::sources::PhotonStatistics;
use photsub::subtraction::{conditional_state, DetectorModel, SchemeSpec};
use photsub::C64;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "photsub", version, about = "Heralded entanglement from nonlocal photon subtraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Photon-number distribution of a source model.
    Stats(SourceArgs),
    /// Heralded state of one scheme at a given transmission.
    Run(RunArgs),
    /// Closed-form entanglement conditions.
    Threshold(ThresholdArgs),
    /// Clauser-Horne combination minimized over displacements (one-photon scheme).
    BellCh(BellChArgs),
    /// CHSH combination of the two-photon scheme.
    BellChsh(BellChshArgs),
    /// Parameter map written as CSV, with a JSON metadata sidecar.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Double emission: single photon or pair, then loss.
    De,
    /// Heralded down-conversion, then loss.
    Dc,
    /// Distribution read from --stats-file.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Scheme {
    One,
    Two,
}

impl From<Scheme> for SchemeKind {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::One => SchemeKind::OnePhoton,
            Scheme::Two => SchemeKind::TwoPhoton,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Detector {
    /// Binary detectors in the limit of vanishing efficiency.
    Low,
    /// Binary detectors with efficiency --zeta.
    Binary,
    /// Photon-number-resolving detectors with efficiency --zeta.
    Pnr,
}

#[derive(Args, Debug)]
struct SourceArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Source-to-memory transmission.
    #[arg(long)]
    eta: Option<f64>,
    /// Pair probability of the double-emission model.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Down-conversion parameter.
    #[arg(long)]
    r: Option<f64>,
    /// Largest photon number kept for down-conversion.
    #[arg(long, default_value_t = 6)]
    mmax: usize,
    /// One probability per line, starting at zero photons.
    #[arg(long)]
    stats_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// Beam-splitter transmission.
    #[arg(long = "T")]
    t: f64,
    /// Heralding pattern, e.g. `10` or `1,0,1,0`; defaults to the scheme's first pattern.
    #[arg(long)]
    clicks: Option<String>,
    #[arg(long, value_enum, default_value_t = Detector::Low)]
    detector: Detector,
    /// Detector efficiency for `binary` and `pnr`.
    #[arg(long)]
    zeta: Option<f64>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum)]
    scheme: Scheme,
    #[arg(long = "T")]
    t: Option<f64>,
}

#[derive(Args, Debug)]
struct OptimizerArgs {
    #[arg(long, default_value_t = DEFAULT_STARTS)]
    starts: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BellChArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Search complex displacements.
    #[arg(long)]
    complex: bool,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args, Debug)]
struct BellChshArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Maximize |CHSH| over the analyser angles instead of using the standard ones.
    #[arg(long)]
    optimize_angles: bool,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// One of 3a, 3b, 4a, 4b, 6a, 6b, 8a, 8b.
    #[arg(long)]
    figure: String,
    /// Points along the source-parameter axis.
    #[arg(long, default_value_t = 21)]
    nx: usize,
    /// Points along the eta axis.
    #[arg(long, default_value_t = 21)]
    ny: usize,
    #[arg(long)]
    out: PathBuf,
    /// Metadata sidecar; defaults to `<out>.meta.json`.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Overrides the figure's down-conversion truncation.
    #[arg(long)]
    mmax: Option<usize>,
    #[arg(long)]
    complex: bool,
    #[arg(long)]
    optimize_angles: bool,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "PHOTSUB_THREADS", default_value_t = 0)]
    threads: usize,
}

enum Failure {
    Usage(String),
    Compute(String),
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn compute(e: impl ToString) -> Failure {
    Failure::Compute(e.to_string())
}

fn required(value: Option<f64>, flag: &str, model: &str) -> Outcome<f64> {
    value.ok_or_else(|| usage(format!("--{flag} is required for --model {model}")))
}

impl SourceArgs {
    fn stats(&self) -> Outcome<PhotonStatistics> {
        let stray = |flag: &str, set: bool| {
            if set {
                Err(usage(format!("--{flag} does not apply to this model")))
            } else {
                Ok(())
            }
        };
        match self.model {
            Model::De => {
                stray("r", self.r.is_some())?;
                stray("stats-file", self.stats_file.is_some())?;
                let eta = required(self.eta, "eta", "de")?;
                PhotonStatistics::double_emission(eta, required(self.epsilon, "epsilon", "de")?).map_err(usage)
            }
            Model::Dc => {
                stray("epsilon", self.epsilon.is_some())?;
                stray("stats-file", self.stats_file.is_some())?;
                let eta = required(self.eta, "eta", "dc")?;
                PhotonStatistics::down_conversion(eta, required(self.r, "r", "dc")?, self.mmax).map_err(usage)
            }
            Model::Custom => {
                stray("eta", self.eta.is_some())?;
                stray("epsilon", self.epsilon.is_some())?;
                stray("r", self.r.is_some())?;
                let path =
                    self.stats_file.as_ref().ok_or_else(|| usage("--stats-file is required for --model custom"))?;
                PhotonStatistics::from_file(path).map_err(|e| usage(format!("{}: {e}", path.display())))
            }
        }
    }

    fn describe(&self) -> Value {
        json!({
            "model": format!("{:?}", self.model).to_lowercase(),
            "eta": self.eta,
            "epsilon": self.epsilon,
            "r": self.r,
            "mmax": (self.model == Model::Dc).then_some(self.mmax),
            "stats_file": self.stats_file.as_ref().map(|p| p.display().to_string()),
        })
    }
}

fn parse_clicks(text: &str) -> Outcome<Vec<u8>> {
    let items: Vec<&str> = if text.contains(',') {
        text.split(',').map(str::trim).collect()
    } else {
        text.split("").filter(|s| !s.is_empty()).collect()
    };
    items.iter().map(|s| s.parse::<u8>().map_err(|_| usage(format!("bad click pattern {text:?}")))).collect()
}

fn dm_json(dm: &TwoQubitDm) -> Value {
    let m = dm.matrix();
    let part =
        |f: fn(&C64) -> f64| -> Vec<Vec<f64>> { (0..4).map(|i| (0..4).map(|j| f(&m[(i, j)])).collect()).collect() };
    json!({
        "basis": format!("{:?}", dm.basis()),
        "zeta_power": dm.scale().zeta,
        "re": part(|z| z.re),
        "im": part(|z| z.im),
    })
}

fn stats_json(stats: &PhotonStatistics) -> Value {
    json!({
        "p": stats.probs(),
        "truncation_deficit": stats.truncation_deficit(),
        "multiphoton_mass": stats.multiphoton_mass(),
        "classical": stats.is_classical_candidate(),
    })
}

fn cmd_stats(args: &SourceArgs) -> Outcome<Value> {
    let stats = args.stats()?;
    let mut out = stats_json(&stats);
    out["source"] = args.describe();
    out["entangling_small_t"] = json!({
        "one": threshold_small_t(&stats, SchemeKind::OnePhoton),
        "two": threshold_small_t(&stats, SchemeKind::TwoPhoton),
    });
    Ok(out)
}

fn cmd_run(args: &RunArgs) -> Outcome<Value> {
    let stats = args.source.stats()?;
    let kind = SchemeKind::from(args.scheme);
    let detector = match (args.detector, args.zeta) {
        (Detector::Low, None) => DetectorModel::BinaryLowEfficiency,
        (Detector::Low, Some(_)) => return Err(usage("--zeta needs --detector binary or pnr")),
        (_, None) => return Err(usage("--zeta is required for finite-efficiency detectors")),
        (Detector::Binary, Some(z)) => DetectorModel::binary(z).map_err(usage)?,
        (Detector::Pnr, Some(z)) => DetectorModel::number_resolving(z).map_err(usage)?,
    };
    let clicks = match &args.clicks {
        Some(text) => parse_clicks(text)?,
        None => kind.default_clicks(),
    };
    let spec = SchemeSpec::new(kind.unitary(), args.t, detector, clicks.clone()).map_err(usage)?;
    let state = conditional_state(&vec![stats.clone(); kind.mode_count()], &spec).map_err(compute)?;
    let dm = project_for(kind, &state).map_err(compute)?;
    let heralded = kind.accepts(&clicks);
    let effective = match (heralded, detector) {
        (false, _) => None,
        (true, DetectorModel::BinaryLowEfficiency) => Some(effective_eof_projected(&dm, kind).map_err(compute)?),
        (true, DetectorModel::Binary { zeta } | DetectorModel::NumberResolving { zeta }) => {
            Some(effective_eof_finite_zeta(&state, kind, zeta).map_err(compute)?)
        }
    };
    let entangled = if dm.trace() > 0.0 {
        let lam = min_partial_transpose_eigenvalue(&dm).map_err(compute)?;
        json!({
            "ppt_min_eigenvalue": lam,
            "ppt_entangled": ppt_entangled(&dm).map_err(compute)?,
            "concurrence": concurrence(&dm).map_err(compute)?,
            "eof": eof(&dm).map_err(compute)?,
            "normalized": dm_json(&TwoQubitDm::new(dm.normalized().map_err(compute)?, dm.basis(), dm.scale())),
        })
    } else {
        eprintln!("photsub: the heralded qubit state has zero trace");
        json!({ "ppt_min_eigenvalue": null, "ppt_entangled": false, "concurrence": 0.0, "eof": 0.0, "normalized": null })
    };
    let mut out = json!({
        "source": args.source.describe(),
        "stats": stats_json(&stats),
        "scheme": kind.to_string(),
        "T": args.t,
        "clicks": clicks,
        "detector": format!("{detector:?}"),
        "heralding_trace": state.trace(),
        "trace": dm.trace(),
        "dm": dm_json(&dm),
        "effective_e": effective,
    });
    if let (Value::Object(o), Value::Object(e)) = (&mut out, entangled) {
        o.extend(e);
    }
    Ok(out)
}

fn cmd_threshold(args: &ThresholdArgs) -> Outcome<Value> {
    let stats = args.source.stats()?;
    let kind = SchemeKind::from(args.scheme);
    let (p0, p1, p2, p3) = (stats.p(0), stats.p(1), stats.p(2), stats.p(3));
    let (lhs, rhs) = match kind {
        SchemeKind::OnePhoton => (p1 * p1, 8.0 * p0 * p2),
        SchemeKind::TwoPhoton => (p1.powi(3), 5.0 * p0 * p1 * p2 + 3.0 * p0 * p0 * p3),
    };
    let general = match args.t {
        None => Value::Null,
        Some(t) if !(t > 0.0 && t < 1.0) => return Err(usage(format!("--T must lie in (0, 1), got {t}"))),
        Some(_) if kind == SchemeKind::TwoPhoton => {
            eprintln!("photsub: no general-T condition is available for the two-photon scheme");
            Value::Null
        }
        Some(_) if stats.has_mass_above(2) => {
            eprintln!("photsub: the general-T condition needs p_m = 0 beyond two photons");
            Value::Null
        }
        Some(t) => json!(threshold_general_t(&stats, t).map_err(compute)?),
    };
    Ok(json!({
        "source": args.source.describe(),
        "p": stats.probs(),
        "scheme": kind.to_string(),
        "small_t": { "entangled": threshold_small_t(&stats, kind), "lhs": lhs, "rhs": rhs },
        "T": args.t,
        "general_t": general,
    }))
}

fn bell_state(args: &SourceArgs, kind: SchemeKind) -> Outcome<MixedState> {
    let stats = args.stats()?;
    small_t_state(&stats, kind).map_err(compute)
}

fn c64_json(z: C64) -> Value {
    json!([z.re, z.im])
}

fn cmd_bell_ch(args: &BellChArgs) -> Outcome<Value> {
    let state = bell_state(&args.source, SchemeKind::OnePhoton)?;
    let opt = minimize_ch(&state, args.complex, args.optimizer.starts, args.optimizer.seed).map_err(compute)?;
    let s = opt.settings;
    Ok(json!({
        "source": args.source.describe(),
        "complex": args.complex,
        "seed": args.optimizer.seed,
        "starts": args.optimizer.starts,
        "ch_min": opt.value,
        "violates": opt.value < -1.0,
        "displacements": {
            "alpha": c64_json(s.alpha), "alpha_p": c64_json(s.alpha_p),
            "beta": c64_json(s.beta), "beta_p": c64_json(s.beta_p),
        },
        "eval_count": opt.evaluations,
    }))
}

fn cmd_bell_chsh(args: &BellChshArgs) -> Outcome<Value> {
    let state = bell_state(&args.source, SchemeKind::TwoPhoton)?;
    let (angles, value, evaluations) = if args.optimize_angles {
        let opt = optimize_chsh_angles(&state, args.optimizer.starts, args.optimizer.seed).map_err(compute)?;
        (opt.angles, opt.value, opt.evaluations)
    } else {
        let a = AngleSettings::standard();
        (a, chsh_value(&state, &a).map_err(compute)?, 1)
    };
    Ok(json!({
        "source": args.source.describe(),
        "optimize_angles": args.optimize_angles,
        "seed": args.optimizer.seed,
        "chsh": value,
        "violates": value.abs() > 2.0,
        "angles": {
            "theta_a": angles.theta_a, "theta_a_p": angles.theta_a_p,
            "theta_b": angles.theta_b, "theta_b_p": angles.theta_b_p,
        },
        "eval_count": evaluations,
    }))
}

fn default_metadata_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn cmd_sweep(args: &SweepArgs) -> Outcome<Value> {
    let figure: Figure = args.figure.parse().map_err(usage)?;
    let mut grid = SweepGrid::for_figure(figure, args.nx, args.ny).map_err(usage)?;
    if let Some(m) = args.mmax {
        if m < 2 {
            return Err(usage(format!("--mmax must be >= 2, got {m}")));
        }
        grid.mmax = m;
    }
    if args.optimizer.starts == 0 {
        return Err(usage("--starts must be positive"));
    }
    grid.seed = args.optimizer.seed;
    grid.starts = args.optimizer.starts;
    grid.complex = args.complex;
    grid.optimize_angles = args.optimize_angles;

    // Open the output first so an unwritable path fails before the sweep runs.
    let file = File::create(&args.out).map_err(|e| compute(format!("{}: {e}", args.out.display())))?;
    let records = run_sweep(&grid, args.threads).map_err(compute)?;
    let mut w = BufWriter::new(file);
    write_csv(&records, &mut w).and_then(|_| w.flush()).map_err(|e| compute(format!("{}: {e}", args.out.display())))?;

    let errors: Vec<Value> = records
        .iter()
        .enumerate()
        .filter_map(|(row, r)| {
            r.error.as_ref().map(|msg| json!({ "row": row, "eta": r.eta, "x": r.x, "message": msg }))
        })
        .collect();
    for e in &errors {
        eprintln!("photsub: row {}: {}", e["row"], e["message"].as_str().unwrap_or_default());
    }
    let nm = NelderMead::default();
    let task = match grid.task {
        SweepTask::Entanglement => "entanglement",
        SweepTask::ClauserHorne => "clauser-horne",
        SweepTask::Chsh => "chsh",
    };
    let meta = json!({
        "tool": "photsub",
        "version": env!("CARGO_PKG_VERSION"),
        "figure": figure.id(),
        "scheme": grid.scheme.to_string(),
        "task": task,
        "columns": CSV_HEADER.split(',').collect::<Vec<_>>(),
        "x_name": grid.family.x_name(),
        "eta_axis": { "lo": grid.eta.lo, "hi": grid.eta.hi, "points": grid.eta.points },
        "x_axis": { "lo": grid.x.lo, "hi": grid.x.hi, "points": grid.x.points },
        "truncation": { "mmax": grid.mmax, "applies_to": "down-conversion" },
        "seed": grid.seed,
        "optimizer": {
            "t_search": { "min": T_MIN, "max": T_MAX, "grid_points": T_GRID_POINTS, "tolerance": T_TOLERANCE },
            "nelder_mead": {
                "starts": grid.starts,
                "initial_scale": nm.initial_scale,
                "diameter_tolerance": nm.diameter_tolerance,
                "max_evaluations": nm.max_evaluations,
                "restarts": nm.restarts,
            },
            "displacement_box": DISPLACEMENT_BOX,
            "complex": grid.complex,
            "optimize_angles": grid.optimize_angles,
        },
        "detector": "binary, low efficiency",
        "rows": records.len(),
        "errors": errors,
    });
    let meta_path = args.metadata.clone().unwrap_or_else(|| default_metadata_path(&args.out));
    let text = serde_json::to_string_pretty(&meta).map_err(compute)?;
    std::fs::write(&meta_path, text + "\n").map_err(|e| compute(format!("{}: {e}", meta_path.display())))?;
    Ok(json!({
        "csv": args.out.display().to_string(),
        "metadata": meta_path.display().to_string(),
        "rows": records.len(),
        "failed_rows": meta["errors"].as_array().map_or(0, Vec::len),
    }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Stats(a) => cmd_stats(a),
        Command::Run(a) => cmd_run(a),
        Command::Threshold(a) => cmd_threshold(a),
        Command::BellCh(a) => cmd_bell_ch(a),
        Command::BellChsh(a) => cmd_bell_chsh(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(value) => {
            let text = serde_json::to_string_pretty(&value).expect("JSON values serialize");
            // A closed pipe downstream is not an error of ours.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("photsub: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("photsub: error: {msg}");
            ExitCode::from(1)
        }
    }
}
