//! `timebin` — net-rate curves, distance limits and teleportation fidelity
//! figures for time-bin quantum links, as plot-ready CSV/JSON.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use timebin_core::protocol::{
    equatorial_scan, fit_noise_knobs, mean_fidelity_decomposed, teleport, fidelity,
    NoiseKnobs, TimeBinQubit,
};
use timebin_core::rates::{
    max_distance, optimal_n, r_net_curve, transmission, DetectorModel, MaxDistance, OptimalN,
};
use timebin_core::mc;

#[derive(Parser)]
#[command(
    name = "timebin",
    version,
    about = "Time-bin qubit teleportation and quantum-relay rate analysis",
    after_help = "The TIMEBIN_SEED environment variable supplies the default RNG seed.\n\
                  A --config file holds `key = value` lines mirroring the long flags;\n\
                  explicit flags win on conflict."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Net-rate table over a distance grid for one or more trunk counts
    Rates(RatesArgs),
    /// Maximum distance with positive net rate (JSON summary)
    MaxDistance(MaxDistanceArgs),
    /// Best trunk count at a fixed distance (JSON summary)
    OptimalN(OptimalNArgs),
    /// Teleportation fidelity report or fringe scan
    Teleport(TeleportArgs),
    /// Invert the noise model from measured pole/equator fidelities
    FitNoise(FitNoiseArgs),
    /// Monte Carlo relay run compared against the analytic rates
    Mc(McArgs),
}

#[derive(Args)]
struct LinkOpts {
    /// Detector efficiency η in (0, 1]
    #[arg(long)]
    eta: Option<f64>,
    /// Dark-count probability D per transmission
    #[arg(long)]
    dark: Option<f64>,
    /// Fiber attenuation α in dB/km
    #[arg(long)]
    alpha: Option<f64>,
    /// Constant optical error floor (fraction of correct detections flipped)
    #[arg(long)]
    optical_error: Option<f64>,
}

#[derive(Args)]
struct IoOpts {
    /// Key-value config file mirroring the long flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout when omitted)
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    link: LinkOpts,
    /// Comma-separated odd trunk counts, e.g. 1,3,5
    #[arg(long)]
    n: Option<String>,
    /// First distance of the grid in km
    #[arg(long)]
    lmin: Option<f64>,
    /// Last distance of the grid in km
    #[arg(long)]
    lmax: Option<f64>,
    /// Grid step in km
    #[arg(long)]
    step: Option<f64>,
    /// Output format: csv or json
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    io: IoOpts,
}

#[derive(Args)]
struct MaxDistanceArgs {
    #[command(flatten)]
    link: LinkOpts,
    /// Trunk count (odd)
    #[arg(long)]
    n: Option<u32>,
    #[command(flatten)]
    io: IoOpts,
}

#[derive(Args)]
struct OptimalNArgs {
    #[command(flatten)]
    link: LinkOpts,
    /// Alice–Bob distance in km
    #[arg(long)]
    length: Option<f64>,
    /// Largest odd trunk count to consider
    #[arg(long)]
    n_max: Option<u32>,
    #[command(flatten)]
    io: IoOpts,
}

#[derive(Args)]
struct TeleportArgs {
    /// Photon indistinguishability ξ at the Bell measurement
    #[arg(long)]
    xi: Option<f64>,
    /// Accidental-coincidence fraction
    #[arg(long)]
    f_acc: Option<f64>,
    /// Fit the knobs from a measured pole fidelity (with --fit-eq)
    #[arg(long, requires = "fit_eq", conflicts_with_all = ["xi", "f_acc"])]
    fit_pole: Option<f64>,
    /// Fit the knobs from a measured equator fidelity (with --fit-pole)
    #[arg(long, requires = "fit_pole")]
    fit_eq: Option<f64>,
    /// Emit a fringe scan over β ∈ [0, 2π) instead of the fidelity report
    #[arg(long)]
    scan: bool,
    /// Number of β points in the scan
    #[arg(long)]
    scan_points: Option<usize>,
    /// Input-qubit phase α used by the scan
    #[arg(long)]
    alpha: Option<f64>,
    /// Input-qubit amplitude a0; adds an `f_input` field to the report
    #[arg(long)]
    a0: Option<f64>,
    #[command(flatten)]
    io: IoOpts,
}

#[derive(Args)]
struct FitNoiseArgs {
    /// Measured pole fidelity
    #[arg(long)]
    f_pole: Option<f64>,
    /// Measured equator fidelity
    #[arg(long)]
    f_eq: Option<f64>,
    #[command(flatten)]
    io: IoOpts,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    link: LinkOpts,
    /// Trunk count (odd)
    #[arg(long)]
    n: Option<u32>,
    /// Alice–Bob distance in km
    #[arg(long)]
    length: Option<f64>,
    /// Trial count (default targets 100 expected error events)
    #[arg(long)]
    trials: Option<u64>,
    /// RNG seed
    #[arg(long, env = "TIMEBIN_SEED")]
    seed: Option<u64>,
    #[command(flatten)]
    io: IoOpts,
}

/// `key = value` lines, `#` comments; keys mirror the long flag names.
struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<Self, String> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            for (line_no, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap().trim();
                if line.is_empty() {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(format!(
                        "config {}: line {} is not `key = value`",
                        path.display(),
                        line_no + 1
                    ));
                };
                map.insert(key.trim().replace('-', "_"), value.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| format!("config key `{key}`: cannot parse `{raw}`")),
        }
    }
}

fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn detector(link: &LinkOpts, cfg: &FileConfig) -> Result<DetectorModel<f64>, String> {
    let eta = resolve(link.eta, cfg.get("eta")?, 0.25);
    let dark = resolve(link.dark, cfg.get("dark")?, 1e-4);
    let optical = resolve(link.optical_error, cfg.get("optical_error")?, 0.0);
    DetectorModel::with_optical_error(eta, dark, optical).map_err(|e| e.to_string())
}

fn attenuation(link: &LinkOpts, cfg: &FileConfig) -> Result<f64, String> {
    let alpha = resolve(link.alpha, cfg.get("alpha")?, 0.25);
    if alpha <= 0.0 {
        return Err(format!("attenuation must be positive (got {alpha})"));
    }
    Ok(alpha)
}

/// 9 significant digits; scientific notation below 1e-3.
fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    if x.abs() < 1e-3 {
        format!("{x:.8e}")
    } else {
        let exp = x.abs().log10().floor() as i32;
        format!("{x:.*}", (8 - exp).max(0) as usize)
    }
}

/// Rounds to 9 significant digits for stable JSON serialization.
fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let factor = 10f64.powi(8 - x.abs().log10().floor() as i32);
    (x * factor).round() / factor
}

fn json_num(x: f64) -> serde_json::Value {
    json!(round_sig(x))
}

fn emit(io: &IoOpts, content: &str) -> Result<(), String> {
    match &io.output {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
    }
}

fn parse_trunk_list(raw: &str) -> Result<Vec<u32>, String> {
    raw.split(',')
        .map(|part| {
            let n: u32 = part
                .trim()
                .parse()
                .map_err(|_| format!("invalid trunk count `{part}`"))?;
            if n == 0 || n % 2 == 0 {
                return Err(format!("trunk count must be odd and positive (got {n})"));
            }
            Ok(n)
        })
        .collect()
}

fn cmd_rates(args: &RatesArgs) -> Result<(), String> {
    let cfg = FileConfig::load(args.io.config.as_ref())?;
    let det = detector(&args.link, &cfg)?;
    let alpha = attenuation(&args.link, &cfg)?;
    let trunks = parse_trunk_list(&resolve(
        args.n.clone(),
        cfg.get::<String>("n")?,
        "1,3".into(),
    ))?;
    let lmin = resolve(args.lmin, cfg.get("lmin")?, 0.0);
    let lmax = resolve(args.lmax, cfg.get("lmax")?, 300.0);
    let step = resolve(args.step, cfg.get("step")?, 1.0);
    if step <= 0.0 || lmax < lmin || lmin < 0.0 {
        return Err(format!("bad distance grid: lmin {lmin}, lmax {lmax}, step {step}"));
    }
    let format = resolve(args.format.clone(), cfg.get::<String>("format")?, "csv".into());

    let mut lengths = Vec::new();
    let mut l = lmin;
    while l <= lmax + 1e-9 {
        lengths.push(l);
        l += step;
    }
    let rows = r_net_curve(&lengths, &trunks, &det, alpha).map_err(|e| e.to_string())?;

    let mut out = String::new();
    match format.as_str() {
        "csv" => {
            out.push_str("L_km,n,C,Q,R_raw,QBER,R_net\n");
            for row in &rows {
                let r = row.report;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_num(row.l_km),
                    row.n,
                    fmt_num(r.c),
                    fmt_num(r.q),
                    fmt_num(r.r_raw),
                    fmt_num(r.qber),
                    fmt_num(r.r_net)
                )
                .unwrap();
            }
        }
        "json" => {
            let rows: Vec<_> = rows
                .iter()
                .map(|row| {
                    json!({
                        "L_km": json_num(row.l_km),
                        "n": row.n,
                        "C": json_num(row.report.c),
                        "Q": json_num(row.report.q),
                        "R_raw": json_num(row.report.r_raw),
                        "QBER": json_num(row.report.qber),
                        "R_net": json_num(row.report.r_net),
                    })
                })
                .collect();
            out = serde_json::to_string_pretty(&rows).unwrap();
            out.push('\n');
        }
        other => return Err(format!("unknown format `{other}` (expected csv or json)")),
    }
    emit(&args.io, &out)
}

fn cmd_max_distance(args: &MaxDistanceArgs) -> Result<(), String> {
    let cfg = FileConfig::load(args.io.config.as_ref())?;
    let det = detector(&args.link, &cfg)?;
    let alpha = attenuation(&args.link, &cfg)?;
    let n = resolve(args.n, cfg.get("n")?, 1);
    let value = match max_distance(n, &det, alpha) {
        Ok(MaxDistance::FiniteKm(l)) => json!({
            "status": "ok",
            "n": n,
            "l_max_km": json_num(l),
        }),
        Ok(MaxDistance::NoFiniteLimit) => json!({
            "status": "no_finite_limit",
            "n": n,
        }),
        Err(timebin_core::rates::RateError::NoPositiveRateRegion) => json!({
            "status": "link_dead",
            "n": n,
        }),
        Err(e) => return Err(e.to_string()),
    };
    emit(&args.io, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))
}

fn cmd_optimal_n(args: &OptimalNArgs) -> Result<(), String> {
    let cfg = FileConfig::load(args.io.config.as_ref())?;
    let det = detector(&args.link, &cfg)?;
    let alpha = attenuation(&args.link, &cfg)?;
    let length = resolve(args.length, cfg.get("length")?, 0.0);
    let n_max = resolve(args.n_max, cfg.get("n_max")?, 15);
    let value = match optimal_n(length, &det, alpha, n_max).map_err(|e| e.to_string())? {
        OptimalN::Best { n, r_net } => json!({
            "status": "ok",
            "length_km": json_num(length),
            "n_opt": n,
            "r_net": json_num(r_net),
        }),
        OptimalN::LinkDead => json!({
            "status": "link_dead",
            "length_km": json_num(length),
        }),
    };
    emit(&args.io, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))
}

fn teleport_knobs(args: &TeleportArgs, cfg: &FileConfig) -> Result<NoiseKnobs<f64>, String> {
    let fit_pole = args.fit_pole.or(cfg.get("fit_pole")?);
    let fit_eq = args.fit_eq.or(cfg.get("fit_eq")?);
    match (fit_pole, fit_eq) {
        (Some(pole), Some(eq)) => Ok(fit_noise_knobs(pole, eq).map_err(|e| e.to_string())?.knobs),
        (None, None) => {
            let xi = resolve(args.xi, cfg.get("xi")?, 1.0);
            let f_acc = resolve(args.f_acc, cfg.get("f_acc")?, 0.0);
            NoiseKnobs::new(xi, f_acc).map_err(|e| e.to_string())
        }
        _ => Err("both --fit-pole and --fit-eq are required to fit the knobs".into()),
    }
}

fn cmd_teleport(args: &TeleportArgs) -> Result<(), String> {
    let cfg = FileConfig::load(args.io.config.as_ref())?;
    let knobs = teleport_knobs(args, &cfg)?;
    let alpha = resolve(args.alpha, cfg.get("alpha")?, 0.0);

    if args.scan || cfg.get::<bool>("scan")?.unwrap_or(false) {
        let points = resolve(args.scan_points, cfg.get("scan_points")?, 64);
        if points == 0 {
            return Err("scan needs at least one point".into());
        }
        let grid: Vec<f64> = (0..points)
            .map(|k| k as f64 * std::f64::consts::TAU / points as f64)
            .collect();
        let fringe = equatorial_scan(alpha, &grid, &knobs).map_err(|e| e.to_string())?;
        let mut out = String::from("beta_rad,rate\n");
        for point in fringe {
            writeln!(out, "{},{}", fmt_num(point.beta_rad), fmt_num(point.rate)).unwrap();
        }
        return emit(&args.io, &out);
    }

    let report = mean_fidelity_decomposed(&knobs).map_err(|e| e.to_string())?;
    let mut value = json!({
        "f_pole": json_num(report.f_pole),
        "f_equator": json_num(report.f_equator),
        "f_mean": json_num(report.f_mean),
        "visibility": json_num(report.visibility),
    });
    if let Some(a0) = args.a0.or(cfg.get("a0")?) {
        if !(0.0..=1.0).contains(&a0) {
            return Err(format!("a0 must lie in [0, 1] (got {a0})"));
        }
        let psi = TimeBinQubit::new(a0, (1.0 - a0 * a0).max(0.0).sqrt(), alpha)
            .map_err(|e| e.to_string())?;
        let (_, rho) = teleport(&psi, &knobs).map_err(|e| e.to_string())?;
        value["f_input"] = json_num(fidelity(&psi, &rho));
    }
    emit(&args.io, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))
}

fn cmd_fit_noise(args: &FitNoiseArgs) -> Result<(), String> {
    let cfg = FileConfig::load(args.io.config.as_ref())?;
    let f_pole = args
        .f_pole
        .or(cfg.get("f_pole")?)
        .ok_or("missing --f-pole")?;
    let f_eq = args.f_eq.or(cfg.get("f_eq")?).ok_or("missing --f-eq")?;
    let fit = fit_noise_knobs(f_pole, f_eq).map_err(|e| e.to_string())?;
    let round_trip = mean_fidelity_decomposed(&fit.knobs).map_err(|e| e.to_string())?;
    let value = json!({
        "xi": json_num(fit.knobs.xi),
        "f_acc": json_num(fit.knobs.f_acc),
        "degenerate": fit.degenerate,
        "f_pole": json_num(round_trip.f_pole),
        "f_equator": json_num(round_trip.f_equator),
        "f_mean": json_num(round_trip.f_mean),
    });
    emit(&args.io, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))
}

fn cmd_mc(args: &McArgs) -> Result<(), String> {
    let cfg = FileConfig::load(args.io.config.as_ref())?;
    let det = detector(&args.link, &cfg)?;
    let alpha = attenuation(&args.link, &cfg)?;
    let n = resolve(args.n, cfg.get("n")?, 3);
    let length = resolve(args.length, cfg.get("length")?, 0.0);
    let seed = resolve(args.seed, cfg.get("seed")?, 0);
    let t = transmission(alpha, length);
    let trials = match args.trials.or(cfg.get("trials")?) {
        Some(trials) => trials,
        None => mc::suggested_trials(n, t, &det, 1_000_000, 100_000_000)
            .map_err(|e| e.to_string())?,
    };
    let report = mc::compare(n, t, &det, trials, seed).map_err(|e| e.to_string())?;
    if report.estimate.low_stats {
        eprintln!(
            "warning: only {} error events observed; estimates are low-statistics",
            (report.estimate.q_hat * trials as f64).round() as u64
        );
    }
    let opt_num = |z: Option<f64>| z.map(round_sig).map_or(serde_json::Value::Null, |v| json!(v));
    let value = json!({
        "n": n,
        "L_km": json_num(length),
        "trials": trials,
        "seed": seed,
        "c_hat": json_num(report.estimate.c_hat),
        "c_err": json_num(report.estimate.c_err),
        "q_hat": json_num(report.estimate.q_hat),
        "q_err": json_num(report.estimate.q_err),
        "z_c": opt_num(report.z_c),
        "z_q": opt_num(report.z_q),
    });
    emit(&args.io, &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Rates(args) => cmd_rates(args),
        Command::MaxDistance(args) => cmd_max_distance(args),
        Command::OptimalN(args) => cmd_optimal_n(args),
        Command::Teleport(args) => cmd_teleport(args),
        Command::FitNoise(args) => cmd_fit_noise(args),
        Command::Mc(args) => cmd_mc(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
