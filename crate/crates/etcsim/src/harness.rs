//! Experiment runner: scenario configuration, repeated runs, metric
//! extraction over the two analysis windows, parameter sweeps, and CSV
//! rendering.
//!
//! Every run gets its RNG streams from (master seed, cell index,
//! repetition, stream), so a sweep computes the same numbers whether the
//! cells run serially or in parallel, and two invocations of the same
//! configuration render byte-identical reports.
//!
//! The two windows: the full experiment [0, t_end] and the fill phase
//! [0, t_sm] up to the pump-mode switch. A frame belongs to a window when
//! it starts inside it; the switch itself happens mid-frame, so the frame
//! containing it still counts toward the fill phase.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cosim::{CoSimError, CoSimSetup, CoSimulation, RunTrace};
use crate::macsim::{min_interval_ms, Protocol, RadioModel, SlotTimings};
use crate::plant::{InputCoupling, Mode, NoiseConfig, PlantModel};
use crate::triggers::{TriggerKind, TriggerPolicy};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] CoSimError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("trace covers {covered_s} s but the window needs {needed_s} s")]
    IncompleteTrace { covered_s: f64, needed_s: f64 },
    #[error("seed list has {have} entries but {need} repetitions are requested")]
    SeedListTooShort { have: usize, need: usize },
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
}

/// One scenario: a triggering strategy with its parameters, the physical
/// setup, and the repetition plan. All fields have working defaults, so a
/// TOML file only needs the keys it wants to change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub strategy: TriggerKind,
    /// Sampling period in seconds; one MAC frame per period.
    pub period_s: f64,
    /// Quadratic trigger margin (centralized and synchronous strategies).
    pub sigma: f64,
    /// Threshold decay factor (asynchronous strategies).
    pub mu: f64,
    /// Threshold-to-state ratio (asynchronous strategies).
    pub varrho: f64,
    /// Threshold floor (asynchronous strategies).
    pub eta_min: f64,
    pub t_end_s: f64,
    pub repetitions: u32,
    /// Master seed; per-run streams are derived from it.
    pub master_seed: u64,
    /// Optional explicit per-repetition seeds. When set, entry r replaces
    /// the master seed for repetition r.
    pub seeds: Vec<u64>,
    pub sensor_noise_std_m: f64,
    pub coupling: InputCoupling,
    pub timings: SlotTimings,
    pub radio: RadioModel,
    /// Where reports go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategy: TriggerKind::Ttc,
            period_s: 1.0,
            sigma: 0.2,
            mu: 0.95,
            varrho: 85.0,
            eta_min: 0.01,
            t_end_s: 110.0,
            repetitions: 10,
            master_seed: 1,
            seeds: Vec::new(),
            sensor_noise_std_m: 0.0005,
            coupling: InputCoupling::Direct,
            timings: SlotTimings::default(),
            radio: RadioModel::default(),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// The trigger policy this scenario runs, defaults plus overrides.
    pub fn policy(&self, n: usize) -> TriggerPolicy {
        let mut p = TriggerPolicy::defaults(self.strategy, n);
        p.period = self.period_s;
        p.sigma = self.sigma;
        p.mu = self.mu;
        p.varrho = self.varrho;
        p.eta_min = self.eta_min;
        p
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repetitions < 1 {
            return Err(HarnessError::Config("repetitions must be at least 1".into()));
        }
        if self.t_end_s.is_nan() || self.t_end_s <= 0.0 {
            return Err(HarnessError::Config("t_end_s must be positive".into()));
        }
        if !self.seeds.is_empty() && self.seeds.len() < self.repetitions as usize {
            return Err(HarnessError::SeedListTooShort {
                have: self.seeds.len(),
                need: self.repetitions as usize,
            });
        }
        Ok(())
    }
}

/// Stream indices for [`derive_seed`].
pub const STREAM_NOISE: u64 = 0;
pub const STREAM_LOSS: u64 = 1;

/// Derives an independent 64-bit seed for (cell, repetition, stream) from
/// a master seed. splitmix64 steps chained over the coordinates; the same
/// coordinates always give the same seed, different coordinates give
/// unrelated ones.
pub fn derive_seed(master: u64, cell: u64, rep: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut s = master.wrapping_add(0x9e37_79b9_7f4a_7c15);
    for coord in [cell, rep, stream] {
        s = mix(s ^ mix(coord.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
    }
    mix(s)
}

/// The run metrics of one window: the energy, wear, and traffic totals
/// the reports compare across strategies. Counts are stored as f64 so
/// per-run values and means share a type; per-run counts are exact
/// integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window_s: f64,
    /// Highest level deviation reached by any tank (m).
    pub overshoot_m: f64,
    /// Total sleep time of all nodes (s).
    pub sleep_s: f64,
    /// Battery discharge with the sleep current included (mAh, all nodes).
    pub discharge_mah: f64,
    /// Discharge with sleep intervals excluded (mAh, all nodes).
    pub discharge_floor_mah: f64,
    /// Valve position changes (per valve).
    pub actuations: f64,
    /// Total valve travel (degrees).
    pub valve_movement_deg: f64,
    /// Frames whose event condition fired.
    pub violations: f64,
    /// Delivered state payloads (full values or increments).
    pub state_transmissions: f64,
    /// Delivered control commands.
    pub control_messages: f64,
}

/// Metrics of a single repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub repetition: u32,
    pub noise_seed: u64,
    pub loss_seed: u64,
    /// First strong-to-weak pump switch, when it happened.
    pub switching_time_s: Option<f64>,
    /// Metrics over [0, t_end].
    pub full: WindowMetrics,
    /// Metrics over [0, t_sm]; equals `full` when no switch happened.
    pub to_switch: WindowMetrics,
}

/// One scenario's runs plus their exact arithmetic means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: TriggerKind,
    pub period_s: f64,
    pub runs: Vec<RunMetrics>,
    pub mean_full: WindowMetrics,
    pub mean_to_switch: WindowMetrics,
    /// Mean over the repetitions that switched; `None` when none did.
    pub mean_switching_time_s: Option<f64>,
}

/// Metrics over `[0, window_s]`. The trace must cover the window.
pub fn window_metrics(trace: &RunTrace, window_s: f64) -> Result<WindowMetrics, HarnessError> {
    let covered_s = trace.frames.len() as f64 * trace.frame_us as f64 * 1e-6;
    if covered_s + 1e-9 < window_s {
        return Err(HarnessError::IncompleteTrace { covered_s, needed_s: window_s });
    }
    let mut m = WindowMetrics {
        window_s,
        overshoot_m: f64::NEG_INFINITY,
        sleep_s: 0.0,
        discharge_mah: 0.0,
        discharge_floor_mah: 0.0,
        actuations: 0.0,
        valve_movement_deg: 0.0,
        violations: 0.0,
        state_transmissions: 0.0,
        control_messages: 0.0,
    };
    let currents = trace.currents;
    for frame in &trace.frames {
        if frame.start_s >= window_s {
            break;
        }
        let o = &frame.outcome;
        if o.violation {
            m.violations += 1.0;
        }
        m.state_transmissions += o.state_tx as f64;
        m.control_messages += o.control_msgs as f64;
        m.actuations += o.actuations as f64;
        m.valve_movement_deg += o.valve_movement_deg;
        for node in 0..trace.n_nodes {
            m.sleep_s += frame.energy.sleep_seconds(node);
            m.discharge_mah += frame.energy.discharge_mah(node, &currents);
            m.discharge_floor_mah += frame.energy.discharge_floor_mah(node, &currents);
        }
    }
    // The trajectory is piecewise linear, so the windowed maximum is the
    // maximum over breakpoints inside the window plus the interpolated
    // boundary value.
    for pair in trace.trajectory.windows(2) {
        let (t0, x0) = (&pair[0].0, &pair[0].1);
        let (t1, x1) = (&pair[1].0, &pair[1].1);
        if *t0 >= window_s {
            break;
        }
        for v in x0 {
            m.overshoot_m = m.overshoot_m.max(*v);
        }
        if *t1 <= window_s {
            for v in x1 {
                m.overshoot_m = m.overshoot_m.max(*v);
            }
        } else {
            let lambda = (window_s - t0) / (t1 - t0);
            for (a, b) in x0.iter().zip(x1) {
                m.overshoot_m = m.overshoot_m.max(a + lambda * (b - a));
            }
        }
    }
    if let [(t, x)] = trace.trajectory.as_slice() {
        if *t <= window_s {
            for v in x {
                m.overshoot_m = m.overshoot_m.max(*v);
            }
        }
    }
    Ok(m)
}

/// Both-window metrics of one finished repetition.
pub fn run_metrics(
    trace: &RunTrace,
    t_end_s: f64,
    repetition: u32,
    noise_seed: u64,
    loss_seed: u64,
) -> Result<RunMetrics, HarnessError> {
    let switching_time_s = trace.automaton.switch_times.first().copied();
    let full = window_metrics(trace, t_end_s)?;
    let to_switch = match switching_time_s {
        Some(t_sm) => window_metrics(trace, t_sm.min(t_end_s))?,
        None => full,
    };
    Ok(RunMetrics { repetition, noise_seed, loss_seed, switching_time_s, full, to_switch })
}

fn mean_metrics(runs: &[RunMetrics], pick: impl Fn(&RunMetrics) -> &WindowMetrics) -> WindowMetrics {
    let len = runs.len() as f64;
    let mut acc = WindowMetrics {
        window_s: 0.0,
        overshoot_m: 0.0,
        sleep_s: 0.0,
        discharge_mah: 0.0,
        discharge_floor_mah: 0.0,
        actuations: 0.0,
        valve_movement_deg: 0.0,
        violations: 0.0,
        state_transmissions: 0.0,
        control_messages: 0.0,
    };
    for r in runs {
        let w = pick(r);
        acc.window_s += w.window_s;
        acc.overshoot_m += w.overshoot_m;
        acc.sleep_s += w.sleep_s;
        acc.discharge_mah += w.discharge_mah;
        acc.discharge_floor_mah += w.discharge_floor_mah;
        acc.actuations += w.actuations;
        acc.valve_movement_deg += w.valve_movement_deg;
        acc.violations += w.violations;
        acc.state_transmissions += w.state_transmissions;
        acc.control_messages += w.control_messages;
    }
    acc.window_s /= len;
    acc.overshoot_m /= len;
    acc.sleep_s /= len;
    acc.discharge_mah /= len;
    acc.discharge_floor_mah /= len;
    acc.actuations /= len;
    acc.valve_movement_deg /= len;
    acc.violations /= len;
    acc.state_transmissions /= len;
    acc.control_messages /= len;
    acc
}

/// Builds and runs one repetition, returning its trace.
pub fn run_once(
    config: &ExperimentConfig,
    noise_seed: u64,
    loss_seed: u64,
) -> Result<RunTrace, HarnessError> {
    let model = PlantModel::water_network(config.coupling);
    let policy = config.policy(model.n());
    let mut setup = CoSimSetup::water_network(policy, model);
    setup.timings = config.timings;
    setup.radio = config.radio;
    setup.noise = NoiseConfig { sensor_std: config.sensor_noise_std_m };
    setup.noise_seed = noise_seed;
    setup.loss_seed = loss_seed;
    let mut sim = CoSimulation::new(setup)?;
    let t_end_us = (config.t_end_s * 1e6).round() as u64;
    let frames = t_end_us.div_ceil(sim.frame_us());
    sim.run_frames(frames);
    Ok(sim.into_trace())
}

fn run_cell(config: &ExperimentConfig, cell: u64) -> Result<MetricsReport, HarnessError> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.repetitions as usize);
    for rep in 0..config.repetitions {
        let base = if config.seeds.is_empty() {
            config.master_seed
        } else {
            config.seeds[rep as usize]
        };
        let noise_seed = derive_seed(base, cell, rep as u64, STREAM_NOISE);
        let loss_seed = derive_seed(base, cell, rep as u64, STREAM_LOSS);
        let trace = run_once(config, noise_seed, loss_seed)?;
        runs.push(run_metrics(&trace, config.t_end_s, rep, noise_seed, loss_seed)?);
    }
    let mean_full = mean_metrics(&runs, |r| &r.full);
    let mean_to_switch = mean_metrics(&runs, |r| &r.to_switch);
    let switched: Vec<f64> = runs.iter().filter_map(|r| r.switching_time_s).collect();
    let mean_switching_time_s = if switched.is_empty() {
        None
    } else {
        Some(switched.iter().sum::<f64>() / switched.len() as f64)
    };
    Ok(MetricsReport {
        strategy: config.strategy,
        period_s: config.period_s,
        runs,
        mean_full,
        mean_to_switch,
        mean_switching_time_s,
    })
}

/// Runs one scenario with its repetitions and aggregates the means.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    run_cell(config, 0)
}

/// One sweep cell: a strategy with the parameters the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub strategy: TriggerKind,
    pub period_s: f64,
    pub sigma: f64,
    pub mu: f64,
    pub varrho: f64,
}

/// Percent savings of a cell against the fixed-clock cell with the same
/// period, computed on means. A zero baseline yields NaN, rendered empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub sleep_pct: f64,
    pub discharge_pct: f64,
    pub discharge_floor_pct: f64,
    pub actuations_pct: f64,
    pub valve_movement_pct: f64,
    pub violations_pct: f64,
    pub state_transmissions_pct: f64,
    pub control_messages_pct: f64,
}

fn savings(ttc: &WindowMetrics, other: &WindowMetrics) -> Savings {
    let pct = |base: f64, v: f64| (base - v) / base * 100.0;
    Savings {
        sleep_pct: pct(ttc.sleep_s, other.sleep_s),
        discharge_pct: pct(ttc.discharge_mah, other.discharge_mah),
        discharge_floor_pct: pct(ttc.discharge_floor_mah, other.discharge_floor_mah),
        actuations_pct: pct(ttc.actuations, other.actuations),
        valve_movement_pct: pct(ttc.valve_movement_deg, other.valve_movement_deg),
        violations_pct: pct(ttc.violations, other.violations),
        state_transmissions_pct: pct(ttc.state_transmissions, other.state_transmissions),
        control_messages_pct: pct(ttc.control_messages, other.control_messages),
    }
}

/// A finished sweep cell. Failed cells keep their error text and leave the
/// report empty.
#[derive(Debug)]
pub struct CellReport {
    pub cell: SweepCell,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
    /// Savings vs the same-period fixed-clock cell, full window.
    pub savings_full: Option<Savings>,
    /// Same, fill-phase window.
    pub savings_to_switch: Option<Savings>,
}

/// The default parameter grid: every strategy crossed with its own
/// parameter ranges and the sampling periods it supports.
pub fn table_grid() -> Vec<SweepCell> {
    let mut cells = Vec::new();
    let base = |strategy, period_s| SweepCell {
        strategy,
        period_s,
        sigma: 0.2,
        mu: 0.95,
        varrho: 85.0,
    };
    for t in [0.5, 1.0, 2.0] {
        cells.push(base(TriggerKind::Ttc, t));
    }
    for t in [0.5, 1.0, 2.0] {
        for sigma in [0.05, 0.1, 0.2] {
            cells.push(SweepCell { sigma, ..base(TriggerKind::Petc, t) });
        }
    }
    // The synchronous layout needs at least 564 ms per frame, so the
    // half-second period is out.
    for t in [1.0, 2.0] {
        for sigma in [0.05, 0.1, 0.2] {
            cells.push(SweepCell { sigma, ..base(TriggerKind::Psdetc, t) });
        }
    }
    for kind in [TriggerKind::PadetcAbs, TriggerKind::PadetcRel] {
        for t in [0.5, 1.0, 2.0] {
            for mu in [0.75, 0.95] {
                for varrho in [85.0, 120.0] {
                    cells.push(SweepCell { mu, varrho, ..base(kind, t) });
                }
            }
        }
    }
    cells
}

fn cell_config(base: &ExperimentConfig, cell: &SweepCell) -> ExperimentConfig {
    ExperimentConfig {
        strategy: cell.strategy,
        period_s: cell.period_s,
        sigma: cell.sigma,
        mu: cell.mu,
        varrho: cell.varrho,
        ..base.clone()
    }
}

/// Runs every cell of the grid with the base scenario's physical setup.
/// Cell index feeds seed derivation, so results do not depend on whether
/// cells run in parallel.
pub fn sweep(base: &ExperimentConfig, grid: &[SweepCell], parallel: bool) -> Vec<CellReport> {
    let run_one = |(idx, cell): (usize, &SweepCell)| {
        let config = cell_config(base, cell);
        match run_cell(&config, idx as u64) {
            Ok(report) => (*cell, Some(report), None),
            Err(e) => (*cell, None, Some(e.to_string())),
        }
    };
    let raw: Vec<(SweepCell, Option<MetricsReport>, Option<String>)> = if parallel {
        grid.par_iter().enumerate().map(run_one).collect()
    } else {
        grid.iter().enumerate().map(run_one).collect()
    };

    // Baselines: the fixed-clock cell for each period that succeeded.
    let baseline = |period: f64| {
        raw.iter()
            .filter(|(c, r, _)| c.strategy == TriggerKind::Ttc && c.period_s == period && r.is_some())
            .map(|(_, r, _)| r.as_ref().expect("filtered on is_some"))
            .next()
    };
    raw.iter()
        .map(|(cell, report, error)| {
            let (savings_full, savings_to_switch) = match (report, cell.strategy) {
                (Some(r), k) if k != TriggerKind::Ttc => match baseline(cell.period_s) {
                    Some(ttc) => (
                        Some(savings(&ttc.mean_full, &r.mean_full)),
                        Some(savings(&ttc.mean_to_switch, &r.mean_to_switch)),
                    ),
                    None => (None, None),
                },
                _ => (None, None),
            };
            CellReport {
                cell: *cell,
                report: report.clone(),
                error: error.clone(),
                savings_full,
                savings_to_switch,
            }
        })
        .collect()
}

fn push_f64(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push(',');
    } else {
        let _ = write!(out, ",{v}");
    }
}

fn push_window(out: &mut String, w: &WindowMetrics) {
    push_f64(out, w.window_s);
    push_f64(out, w.overshoot_m);
    push_f64(out, w.sleep_s);
    push_f64(out, w.discharge_mah);
    push_f64(out, w.discharge_floor_mah);
    push_f64(out, w.actuations);
    push_f64(out, w.valve_movement_deg);
    push_f64(out, w.violations);
    push_f64(out, w.state_transmissions);
    push_f64(out, w.control_messages);
}

fn push_savings(out: &mut String, s: Option<&Savings>) {
    match s {
        Some(s) => {
            push_f64(out, s.sleep_pct);
            push_f64(out, s.discharge_pct);
            push_f64(out, s.discharge_floor_pct);
            push_f64(out, s.actuations_pct);
            push_f64(out, s.valve_movement_pct);
            push_f64(out, s.violations_pct);
            push_f64(out, s.state_transmissions_pct);
            push_f64(out, s.control_messages_pct);
        }
        None => out.push_str(&",".repeat(8)),
    }
}

const WINDOW_COLS: [&str; 10] = [
    "window_s",
    "overshoot_m",
    "sleep_s",
    "discharge_mah",
    "discharge_floor_mah",
    "actuations",
    "valve_movement_deg",
    "violations",
    "state_transmissions",
    "control_messages",
];

const SAVINGS_COLS: [&str; 8] = [
    "sleep_pct",
    "discharge_pct",
    "discharge_floor_pct",
    "actuations_pct",
    "valve_movement_pct",
    "violations_pct",
    "state_transmissions_pct",
    "control_messages_pct",
];

fn window_header(out: &mut String, prefix: &str) {
    for col in WINDOW_COLS {
        let _ = write!(out, ",{prefix}_{col}");
    }
}

/// Cell-level summary table: one row per cell, mean metrics for both
/// windows plus savings against the same-period fixed-clock baseline.
/// Column order is stable and documented in the README.
pub fn render_sweep_csv(cells: &[CellReport]) -> String {
    let mut out = String::from("strategy,period_s,sigma,mu,varrho,status,mean_switching_time_s");
    window_header(&mut out, "full");
    window_header(&mut out, "fill");
    for col in SAVINGS_COLS {
        let _ = write!(out, ",sav_full_{col}");
    }
    for col in SAVINGS_COLS {
        let _ = write!(out, ",sav_fill_{col}");
    }
    out.push('\n');
    for c in cells {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            c.cell.strategy.label(),
            c.cell.period_s,
            c.cell.sigma,
            c.cell.mu,
            c.cell.varrho
        );
        match (&c.report, &c.error) {
            (Some(r), _) => {
                out.push_str(",ok");
                push_f64(&mut out, r.mean_switching_time_s.unwrap_or(f64::NAN));
                push_window(&mut out, &r.mean_full);
                push_window(&mut out, &r.mean_to_switch);
                push_savings(&mut out, c.savings_full.as_ref());
                push_savings(&mut out, c.savings_to_switch.as_ref());
            }
            (None, Some(e)) => {
                let _ = write!(out, ",failed: {}", e.replace(',', ";"));
                out.push_str(&",".repeat(1 + 2 * WINDOW_COLS.len() + 2 * SAVINGS_COLS.len()));
            }
            (None, None) => unreachable!("a cell either reports or errors"),
        }
        out.push('\n');
    }
    out
}

/// Per-run log: one row per (cell, repetition), both windows.
pub fn render_runs_csv(cells: &[CellReport]) -> String {
    let mut out = String::from(
        "strategy,period_s,sigma,mu,varrho,repetition,noise_seed,loss_seed,switching_time_s",
    );
    window_header(&mut out, "full");
    window_header(&mut out, "fill");
    out.push('\n');
    for c in cells {
        let Some(report) = &c.report else { continue };
        for r in &report.runs {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.cell.strategy.label(),
                c.cell.period_s,
                c.cell.sigma,
                c.cell.mu,
                c.cell.varrho,
                r.repetition,
                r.noise_seed,
                r.loss_seed
            );
            push_f64(&mut out, r.switching_time_s.unwrap_or(f64::NAN));
            push_window(&mut out, &r.full);
            push_window(&mut out, &r.to_switch);
            out.push('\n');
        }
    }
    out
}

/// Writes `sweep.csv` and `runs.csv` into the directory.
pub fn write_reports(dir: &std::path::Path, cells: &[CellReport]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.csv"), render_sweep_csv(cells))?;
    std::fs::write(dir.join("runs.csv"), render_runs_csv(cells))?;
    Ok(())
}

/// Frame length floor for a strategy (its protocol's minimum), seconds.
pub fn min_period_s(kind: TriggerKind, n: usize, timings: &SlotTimings) -> f64 {
    min_interval_ms(Protocol::for_trigger(kind), n, timings)
        .map(|ms| ms / 1_000.0)
        .unwrap_or(f64::INFINITY)
}

/// Which pump mode a run ended in, for quick summaries.
pub fn final_mode(trace: &RunTrace) -> Mode {
    trace.automaton.mode
}
