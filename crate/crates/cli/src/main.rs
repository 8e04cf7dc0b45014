use std::fmt::Write as _;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use skypuck::beacon::{builtin_catalog, suitable_technologies};
use skypuck::channel::{fit_path_loss, path_loss_db, LinkBudget, RssiSample};
use skypuck::geometry::{CmLayer, Environment, EnvironmentPreset};
use skypuck::sim::{parse_rssi_csv, run, write_outputs, RunReport, Scenario, Violation, ViolationCode};
use skypuck::Error;

const DEFAULT_OUT: &str = "skypuck-out";
const FIT_LINE_POINTS: usize = 50;

#[derive(Parser)]
#[command(name = "skypuck", version, about = "Drone conflict management over simulated beacon radios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and run a scenario, writing traces and a report.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Run every seed in an inclusive range, e.g. 1..20, one subdirectory each.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: Option<RangeInclusive<u64>>,
        /// Output directory.
        #[arg(long, env = "SKYPUCK_OUT", default_value = DEFAULT_OUT)]
        out: PathBuf,
    },
    /// Fit a log-distance path-loss model to an RSSI trace.
    Fit {
        /// Trace with the rssi.csv header.
        csv: PathBuf,
        /// Transmit power of the logged sender.
        #[arg(long, allow_hyphen_values = true)]
        tx_dbm: f64,
        /// Net antenna gain of the link.
        #[arg(long, allow_hyphen_values = true)]
        gain_db: f64,
        /// Reference distance in meters.
        #[arg(long, default_value_t = 1.0)]
        d0: f64,
        /// Use only frames marked received, as a hardware log would.
        #[arg(long)]
        received_only: bool,
        /// Where to write the fitted line; defaults to `<csv stem>.fit.csv` beside the input.
        #[arg(long)]
        line: Option<PathBuf>,
    },
    /// List the technologies suited to a conflict-management layer.
    Recommend { layer: LayerArg, environment: EnvArg },
    /// Check a scenario without running it.
    Validate { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerArg {
    Strategic,
    WellClear,
    CollisionAvoidance,
}

impl From<LayerArg> for CmLayer {
    fn from(l: LayerArg) -> Self {
        match l {
            LayerArg::Strategic => CmLayer::StrategicDeconfliction,
            LayerArg::WellClear => CmLayer::WellClear,
            LayerArg::CollisionAvoidance => CmLayer::CollisionAvoidance,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvArg {
    Suburban,
    Urban,
}

impl From<EnvArg> for Environment {
    fn from(e: EnvArg) -> Self {
        match e {
            EnvArg::Suburban => Environment::Suburban,
            EnvArg::Urban => Environment::Urban,
        }
    }
}

fn parse_seed_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad end: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

/// A failure with its exit code and machine-readable code.
struct Failure {
    exit: u8,
    code: &'static str,
    message: String,
}

impl Failure {
    fn input(code: &'static str, message: impl Into<String>) -> Self {
        Self { exit: 1, code, message: message.into() }
    }

    fn runtime(code: &'static str, message: impl Into<String>) -> Self {
        Self { exit: 2, code, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run { scenario, seed, seeds, out } => cmd_run(&scenario, seed, seeds, &out),
        Command::Fit { csv, tx_dbm, gain_db, d0, received_only, line } => {
            cmd_fit(&csv, tx_dbm, gain_db, d0, received_only, line)
        }
        Command::Recommend { layer, environment } => cmd_recommend(layer.into(), environment.into()),
        Command::Validate { scenario } => cmd_validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input("E_IO", format!("{}: {e}", path.display())))?;
    Scenario::from_toml(&text)
        .map_err(|v| Failure::input(v.code.as_str(), format!("{}: {}", path.display(), v.message)))
}

fn report_violations(violations: &[Violation]) -> Failure {
    for v in violations {
        eprintln!("{v}");
    }
    let first = violations.first().map_or(ViolationCode::Parse, |v| v.code);
    Failure::input(first.as_str(), format!("scenario has {} violation(s)", violations.len()))
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let scenario = load(path)?;
    let violations = scenario.validate();
    if !violations.is_empty() {
        return Err(report_violations(&violations));
    }
    println!("ok: {} drone(s), digest {}", scenario.drones.len(), scenario.digest());
    Ok(())
}

fn runtime_failure(e: &Error) -> Failure {
    let code = match e {
        Error::Unresolvable { .. } => "E_UNRESOLVABLE",
        Error::SingularFit(_) => "E_SINGULAR",
        _ => "E_RUNTIME",
    };
    Failure::runtime(code, e.to_string())
}

fn run_one(scenario: &Scenario, digest: &str, dir: &Path) -> Result<(RunReport, PathBuf, f64), Failure> {
    let started = Instant::now();
    let output = run(scenario).map_err(|e| runtime_failure(&e))?;
    let wall = started.elapsed().as_secs_f64();
    let (report, path) = write_outputs(dir, scenario, digest, &output)
        .map_err(|e| Failure::runtime("E_IO", format!("{}: {e}", dir.display())))?;
    Ok((report, path, wall))
}

fn summarize(report: &RunReport, path: &Path, wall_s: f64) -> String {
    let mut s = String::new();
    let c = &report.counters;
    let safety = &report.safety;
    let _ = writeln!(s, "seed {} digest {}", report.seed, report.scenario_digest);
    let _ = writeln!(s, "  wall time {wall_s:.2} s, {} steps", c.steps);
    let _ = writeln!(s, "  frames sent {}, received {}", c.transmissions, c.receptions);
    let _ = writeln!(
        s,
        "  violations: well-clear {}, collision {}, zero-separation {}",
        safety.wc_violations, safety.ca_violations, safety.zero_separation_events
    );
    for pair in &report.delay.pairs {
        let bins: Vec<String> = pair
            .bins
            .iter()
            .map(|b| match b.mean_delay_s {
                Some(m) => format!("{}-{} m: {:.1} ms (n={})", b.low_m, b.high_m, m * 1e3, b.n),
                None => format!("{}-{} m: empty", b.low_m, b.high_m),
            })
            .collect();
        let _ = writeln!(s, "  delay {}: {}", pair.label(), bins.join(", "));
    }
    for fit in &report.fits {
        let _ = writeln!(
            s,
            "  fit {}: exponent {:.3}, pl0 {:.2} dB, sigma {:.2} dB ({} frames)",
            fit.protocol, fit.model.exponent, fit.model.pl0_db, fit.model.shadowing_sigma_db, fit.samples
        );
    }
    let _ = write!(s, "  report {}", path.display());
    s
}

fn cmd_run(path: &Path, seed: Option<u64>, seeds: Option<RangeInclusive<u64>>, out: &Path) -> Result<(), Failure> {
    let scenario = load(path)?;
    let violations = scenario.validate();
    if !violations.is_empty() {
        return Err(report_violations(&violations));
    }
    let digest = scenario.digest();
    let Some(range) = seeds else {
        let mut s = scenario;
        if let Some(seed) = seed {
            s.sim.seed = seed;
        }
        let (report, report_path, wall) = run_one(&s, &digest, out)?;
        println!("{}", summarize(&report, &report_path, wall));
        return Ok(());
    };

    // Independent runs, one thread each; results are printed in seed order.
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = range
            .map(|seed| {
                let mut s = scenario.clone();
                s.sim.seed = seed;
                let dir = out.join(format!("seed-{seed}"));
                let digest = digest.as_str();
                scope.spawn(move || run_one(&s, digest, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let mut first_failure = None;
    for r in results {
        match r {
            Ok((report, report_path, wall)) => println!("{}", summarize(&report, &report_path, wall)),
            Err(f) => {
                eprintln!("error[{}]: {}", f.code, f.message);
                first_failure.get_or_insert(f);
            }
        }
    }
    first_failure.map_or(Ok(()), Err)
}

fn cmd_fit(
    csv: &Path,
    tx_dbm: f64,
    gain_db: f64,
    d0: f64,
    received_only: bool,
    line: Option<PathBuf>,
) -> Result<(), Failure> {
    let text = fs::read_to_string(csv).map_err(|e| Failure::input("E_IO", format!("{}: {e}", csv.display())))?;
    let rows = parse_rssi_csv(&text).map_err(|e| Failure::input("E_CSV", e.to_string()))?;
    let samples: Vec<RssiSample> = rows
        .iter()
        .filter(|r| r.received || !received_only)
        .map(|r| RssiSample { distance: r.distance_m, rssi: r.rssi_dbm })
        .collect();
    // Only transmit power and gain enter the regression.
    let budget = LinkBudget { tx_power_dbm: tx_dbm, rx_sensitivity_dbm: f64::NEG_INFINITY, antenna_gain_db: gain_db };
    let model = fit_path_loss(&samples, &budget, d0).map_err(|e| match e {
        Error::SingularFit(_) | Error::InvalidModel(_) => runtime_failure(&e),
        other => Failure::input("E_CSV", other.to_string()),
    })?;
    println!("samples {}", samples.len());
    println!("pl0_db {:.4}", model.pl0_db);
    println!("exponent {:.4}", model.exponent);
    println!("sigma_db {:.4}", model.shadowing_sigma_db);

    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.distance), hi.max(s.distance)));
    let mut out = String::from("distance_m,path_loss_db,rssi_dbm\n");
    for k in 0..FIT_LINE_POINTS {
        let d = lo * (hi / lo).powf(k as f64 / (FIT_LINE_POINTS - 1) as f64);
        let pl = path_loss_db(&model, d).map_err(|e| runtime_failure(&e))?;
        let _ = writeln!(out, "{d:.3},{pl:.3},{:.3}", tx_dbm + gain_db - pl);
    }
    let line = line.unwrap_or_else(|| csv.with_extension("fit.csv"));
    fs::write(&line, out).map_err(|e| Failure::runtime("E_IO", format!("{}: {e}", line.display())))?;
    println!("line {}", line.display());
    Ok(())
}

fn cmd_recommend(layer: CmLayer, environment: Environment) -> Result<(), Failure> {
    let preset = EnvironmentPreset::builtin(environment);
    let catalog = builtin_catalog();
    let list = suitable_technologies(layer, &preset, &catalog).map_err(|e| Failure::input("E_LAYER", e.to_string()))?;
    println!("{layer} layer, {environment} airspace:");
    println!("{:<22} {:>10} {:>14}  mode", "technology", "range_m", "worst_update_s");
    for t in list {
        let update = t.worst_case_update_s().map_or_else(|| "-".to_string(), |u| u.to_string());
        let mode = format!("{:?}", t.mode).to_lowercase();
        println!("{:<22} {:>10} {:>14}  {mode}", t.name, t.range_m, update);
    }
    Ok(())
}
