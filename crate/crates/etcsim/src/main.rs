//! Command-line front end: single scenarios, parameter sweeps, certificate
//! checks, and schedule inspection.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use etcsim::certify::{
    build_closed_loop, check_padetc_certificate, check_petc_certificate,
    check_psdetc_certificate, CertificateBundle,
};
use etcsim::control::ControllerGains;
use etcsim::harness::{
    self, min_period_s, render_runs_csv, render_sweep_csv, table_grid, write_reports,
    CellReport, ExperimentConfig, SweepCell,
};
use etcsim::macsim::{build_schedule, Protocol, SlotTimings};
use etcsim::plant::{InputCoupling, Mode, PlantModel};
use etcsim::triggers::TriggerKind;
use smallmat::Matrix;

#[derive(Parser)]
#[command(
    name = "etcsim",
    about = "Event-triggered control co-simulation over duty-cycled TDMA",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and print its per-repetition metrics.
    Run(RunArgs),
    /// Run the full parameter study (or a config-derived variant).
    Sweep(SweepArgs),
    /// Check a stability certificate file; exit 0 iff it is accepted.
    Certify {
        /// TOML file describing the certificate (see README for the keys).
        file: PathBuf,
    },
    /// Print a protocol's slot layout and its minimum frame length.
    Schedule(ScheduleArgs),
}

fn parse_strategy(s: &str) -> Result<TriggerKind, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "ttc" => Ok(TriggerKind::Ttc),
        "petc" => Ok(TriggerKind::Petc),
        "psdetc" => Ok(TriggerKind::Psdetc),
        "padetc_abs" | "padetcabs" => Ok(TriggerKind::PadetcAbs),
        "padetc_rel" | "padetcrel" => Ok(TriggerKind::PadetcRel),
        other => Err(format!(
            "unknown strategy '{other}' (expected ttc, petc, psdetc, padetc_abs, padetc_rel)"
        )),
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; unset keys take the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for sweep.csv and runs.csv; stdout only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<TriggerKind>,
    /// Sampling period in seconds.
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    varrho: Option<f64>,
    /// Per-try message loss probability.
    #[arg(long)]
    loss: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    loss: Option<f64>,
    /// Run cells one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, value_parser = parse_strategy, default_value = "ttc")]
    strategy: TriggerKind,
    /// Frame length to lay out, seconds; defaults to the protocol minimum.
    #[arg(long)]
    period: Option<f64>,
    #[arg(long, default_value_t = 3)]
    nodes: usize,
}

/// On-disk certificate description.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateFile {
    /// Which checker to run: "petc", "psdetc", or "padetc".
    family: String,
    /// Closed loop to certify: 1 (weak pump) or 2 (both pumps).
    #[serde(default = "default_mode")]
    mode: u8,
    rho: f64,
    period: f64,
    /// Storage-function matrix, row by row.
    p: Vec<Vec<f64>>,
    #[serde(default = "default_sigma")]
    sigma: f64,
    /// Multipliers; one or two entries for the sampled-data families,
    /// ignored by the asynchronous one.
    #[serde(default)]
    mu: Vec<f64>,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default = "one")]
    beta1: f64,
    #[serde(default = "one")]
    beta2: f64,
    #[serde(default = "one")]
    varrho: f64,
    /// Per-node weights; defaults to 1/√n each.
    #[serde(default)]
    omega: Vec<f64>,
    /// Uniform subset multiplier for the asynchronous family.
    #[serde(default = "one")]
    epsilon: f64,
}

fn default_mode() -> u8 {
    2
}
fn default_sigma() -> f64 {
    0.2
}
fn default_gamma() -> f64 {
    2.0
}
fn one() -> f64 {
    1.0
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, String> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("reading {}: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| format!("parsing {}: {e}", p.display()))
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let mut config = load_config(&args.config)?;
    if let Some(s) = args.strategy {
        config.strategy = s;
    }
    if let Some(t) = args.period {
        config.period_s = t;
    }
    if let Some(v) = args.sigma {
        config.sigma = v;
    }
    if let Some(v) = args.mu {
        config.mu = v;
    }
    if let Some(v) = args.varrho {
        config.varrho = v;
    }
    if let Some(v) = args.loss {
        config.radio.loss_probability = v;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
        config.seeds.clear();
    }
    if args.out.is_some() {
        config.out_dir = args.out;
    }

    let report = harness::run_experiment(&config).map_err(|e| e.to_string())?;
    println!(
        "scenario strategy={} period_s={} sigma={} mu={} varrho={} loss={} repetitions={}",
        config.strategy.label(),
        config.period_s,
        config.sigma,
        config.mu,
        config.varrho,
        config.radio.loss_probability,
        config.repetitions
    );
    match report.mean_switching_time_s {
        Some(t) => println!("mean switching time: {t:.3} s"),
        None => println!("mean switching time: none of the runs switched"),
    }
    for (name, w) in [("full", &report.mean_full), ("fill", &report.mean_to_switch)] {
        println!(
            "{name}: violations={:.1} state_tx={:.1} control={:.1} actuations={:.1} \
             movement_deg={:.1} sleep_s={:.1} discharge_mah={:.4} overshoot_mm={:.2}",
            w.violations,
            w.state_transmissions,
            w.control_messages,
            w.actuations,
            w.valve_movement_deg,
            w.sleep_s,
            w.discharge_mah,
            w.overshoot_m * 1_000.0
        );
    }

    let cells = vec![CellReport {
        cell: SweepCell {
            strategy: config.strategy,
            period_s: config.period_s,
            sigma: config.sigma,
            mu: config.mu,
            varrho: config.varrho,
        },
        report: Some(report),
        error: None,
        savings_full: None,
        savings_to_switch: None,
    }];
    match &config.out_dir {
        Some(dir) => {
            write_reports(dir, &cells).map_err(|e| e.to_string())?;
            println!("wrote {} and {}", dir.join("sweep.csv").display(), dir.join("runs.csv").display());
        }
        None => print!("{}", render_runs_csv(&cells)),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), String> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
        config.seeds.clear();
    }
    if let Some(v) = args.loss {
        config.radio.loss_probability = v;
    }
    if args.out.is_some() {
        config.out_dir = args.out;
    }
    let grid = table_grid();
    let cells = harness::sweep(&config, &grid, !args.serial);
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    match &config.out_dir {
        Some(dir) => {
            write_reports(dir, &cells).map_err(|e| e.to_string())?;
            eprintln!(
                "{} cells ({} failed); wrote {} and {}",
                cells.len(),
                failed,
                dir.join("sweep.csv").display(),
                dir.join("runs.csv").display()
            );
        }
        None => print!("{}", render_sweep_csv(&cells)),
    }
    Ok(())
}

/// Runs the requested checker. Ok(true) means the certificate holds.
fn cmd_certify(file: &PathBuf) -> Result<bool, String> {
    let text =
        std::fs::read_to_string(file).map_err(|e| format!("reading {}: {e}", file.display()))?;
    let cert: CertificateFile =
        toml::from_str(&text).map_err(|e| format!("parsing {}: {e}", file.display()))?;

    let rows = cert.p.len();
    if rows == 0 || cert.p.iter().any(|r| r.len() != rows) {
        return Err("p must be a nonempty square matrix".into());
    }
    let p = Matrix::new(rows, rows, cert.p.iter().flatten().copied().collect());

    let mode = match cert.mode {
        1 => Mode::WeakPump,
        2 => Mode::BothPumps,
        m => return Err(format!("mode must be 1 or 2, got {m}")),
    };
    // The linear part (A, B, K) is coupling-independent; the certificate
    // only sees it, so either coupling gives the same closed loop.
    let model = PlantModel::water_network(InputCoupling::Deviation);
    let gains = ControllerGains::water_network();
    let cl = build_closed_loop(&model.a, model.b(mode), gains.k(mode))
        .map_err(|e| e.to_string())?;
    let n = model.n();
    if rows != 2 * n {
        return Err(format!(
            "p is {rows}x{rows} but the sampled closed loop needs {}x{}",
            2 * n,
            2 * n
        ));
    }

    let mut bundle = CertificateBundle::new(p, cert.rho, cert.period);
    let mut mu = cert.mu.iter().copied();
    bundle.mu1 = mu.next().unwrap_or(0.0);
    bundle.mu2 = mu.next().unwrap_or(0.0);
    bundle.mu3 = mu.next().unwrap_or(0.0);
    bundle.gamma = cert.gamma;
    bundle.beta1 = cert.beta1;
    bundle.beta2 = cert.beta2;
    bundle.varrho = cert.varrho;
    bundle.omega = if cert.omega.is_empty() {
        vec![1.0 / (n as f64).sqrt(); n]
    } else if cert.omega.len() == n {
        cert.omega.clone()
    } else {
        return Err(format!("omega needs {n} entries, got {}", cert.omega.len()));
    };
    bundle.set_uniform_epsilon(n, cert.epsilon);

    let accepted = match cert.family.as_str() {
        "petc" => check_petc_certificate(&bundle, cert.sigma, &cl),
        "psdetc" => check_psdetc_certificate(&bundle, cert.sigma, &cl),
        "padetc" => check_padetc_certificate(&bundle, &cl, n).map_err(|e| e.to_string())?,
        other => {
            return Err(format!(
                "unknown family '{other}' (expected petc, psdetc, padetc)"
            ))
        }
    };
    println!(
        "certificate {} (family={}, mode={}, rho={}, period_s={})",
        if accepted { "ACCEPTED" } else { "REJECTED" },
        cert.family,
        cert.mode,
        cert.rho,
        cert.period
    );
    Ok(accepted)
}

fn cmd_schedule(args: ScheduleArgs) -> Result<(), String> {
    let timings = SlotTimings::default();
    let protocol = Protocol::for_trigger(args.strategy);
    let t_min = min_period_s(args.strategy, args.nodes, &timings);
    println!(
        "strategy {} runs over {} with {} nodes",
        args.strategy.label(),
        protocol.label(),
        args.nodes
    );
    println!("minimum frame length: {:.3} s", t_min);
    let period = args.period.unwrap_or(t_min);
    let schedule = build_schedule(protocol, args.nodes, &timings, period * 1_000.0)
        .map_err(|e| e.to_string())?;
    println!("frame length: {:.3} s", schedule.frame_us as f64 * 1e-6);
    println!("slot node kind start_ms len_ms guard_ms");
    for (i, s) in schedule.slots.iter().enumerate() {
        println!(
            "{:>4} {:>4} {:>4?} {:>8.1} {:>6.1} {:>8.1}",
            i,
            s.node,
            s.kind,
            s.start_us as f64 / 1_000.0,
            s.duration_us as f64 / 1_000.0,
            s.guard_us as f64 / 1_000.0
        );
    }
    println!(
        "controller decision at {:.1} ms into the frame",
        schedule.decision_us as f64 / 1_000.0
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args).map(|()| ExitCode::SUCCESS),
        Cmd::Sweep(args) => cmd_sweep(args).map(|()| ExitCode::SUCCESS),
        Cmd::Certify { file } => cmd_certify(&file).map(|accepted| {
            if accepted {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }),
        Cmd::Schedule(args) => cmd_schedule(args).map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
