//! TDMA super-frame construction, the retried request/ack exchange, and
//! per-node energy accounting.
//!
//! Three slot layouts share the same building blocks:
//! - control layout: X-slots, a compute delay, then U-slots;
//! - synchronous-event layout: V-slots and a decision delay in front of
//!   the control layout;
//! - asynchronous layout: same shape as the control layout, but nodes
//!   skip their X-slot when their local condition holds.
//!
//! All times are integer microseconds on a u64 clock, so slot arithmetic
//! and the per-node energy ledger are exact: every microsecond of a frame
//! lands in exactly one power state. The frame simulation itself lives in
//! the cosim module; this module owns the static schedule, the lossy
//! exchange primitive, and the ledger.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::triggers::TriggerKind;

/// Microseconds per millisecond, the conversion used at every config edge.
pub const US_PER_MS: u64 = 1_000;

fn ms_to_us(ms: f64) -> u64 {
    (ms * US_PER_MS as f64).round() as u64
}

/// The three medium-access layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    CTdma,
    SdcTdma,
    AdcTdma,
}

impl Protocol {
    pub fn label(self) -> &'static str {
        match self {
            Protocol::CTdma => "c_tdma",
            Protocol::SdcTdma => "sdc_tdma",
            Protocol::AdcTdma => "adc_tdma",
        }
    }

    /// The layout each strategy runs over.
    pub fn for_trigger(kind: TriggerKind) -> Protocol {
        match kind {
            TriggerKind::Ttc | TriggerKind::Petc => Protocol::CTdma,
            TriggerKind::Psdetc => Protocol::SdcTdma,
            TriggerKind::PadetcAbs | TriggerKind::PadetcRel => Protocol::AdcTdma,
        }
    }

    pub fn supports(self, kind: TriggerKind) -> bool {
        Protocol::for_trigger(kind) == self
    }
}

/// Slot roles: violation flags, state upload, control retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    V,
    X,
    U,
}

/// One node's reserved window within a frame. The guard is the reserved
/// tail of the slot where transmissions must already have finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub node: usize,
    pub kind: SlotKind,
    /// Offset from the frame start.
    pub start_us: u64,
    /// Full footprint including the guard tail.
    pub duration_us: u64,
    pub guard_us: u64,
}

impl Slot {
    /// Window in which transmissions may run.
    pub fn usable_us(&self) -> u64 {
        self.duration_us - self.guard_us
    }

    /// Last instant a transmission may still be in flight.
    pub fn tx_deadline_us(&self) -> u64 {
        self.start_us + self.usable_us()
    }

    pub fn end_us(&self) -> u64 {
        self.start_us + self.duration_us
    }
}

/// Slot and delay durations, all in milliseconds. The defaults are the
/// evaluated deployment values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlotTimings {
    /// State-upload slot size (without guard).
    pub x_slot_ms: f64,
    /// Control-retrieval slot size.
    pub u_slot_ms: f64,
    /// Violation-flag slot size.
    pub v_slot_ms: f64,
    /// Controller compute delay between X- and U-blocks.
    pub d_c_ms: f64,
    /// Violation-decision delay between V- and X-blocks.
    pub d_g_ms: f64,
    /// Reserved tail of every slot.
    pub guard_ms: f64,
}

impl Default for SlotTimings {
    fn default() -> Self {
        SlotTimings {
            x_slot_ms: 80.0,
            u_slot_ms: 50.0,
            v_slot_ms: 50.0,
            d_c_ms: 10.0,
            d_g_ms: 5.0,
            guard_ms: 1.0,
        }
    }
}

impl SlotTimings {
    fn validate(&self) -> Result<(), MacError> {
        for (name, value) in [
            ("x_slot_ms", self.x_slot_ms),
            ("u_slot_ms", self.u_slot_ms),
            ("v_slot_ms", self.v_slot_ms),
            ("d_c_ms", self.d_c_ms),
            ("d_g_ms", self.d_g_ms),
            ("guard_ms", self.guard_ms),
        ] {
            if value.is_nan() || value <= 0.0 {
                return Err(MacError::NonPositiveTiming { name, value });
            }
        }
        Ok(())
    }
}

/// A frame's complete slot layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSchedule {
    pub protocol: Protocol,
    pub n_nodes: usize,
    /// Frame (sampling interval) length.
    pub frame_us: u64,
    /// Slots in start-time order.
    pub slots: Vec<Slot>,
    pub d_c_us: u64,
    pub d_g_us: u64,
    /// Instant the controller's compute delay ends; commands and mode
    /// decisions take effect here.
    pub decision_us: u64,
}

impl SlotSchedule {
    /// The node's slot of the given kind, if the layout has one.
    pub fn slot(&self, node: usize, kind: SlotKind) -> Option<&Slot> {
        self.slots.iter().find(|s| s.node == node && s.kind == kind)
    }

    /// Occupied span from frame start through the last slot.
    pub fn span_us(&self) -> u64 {
        self.slots.last().map_or(0, |s| s.end_us())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacError {
    #[error("node count must be at least 1")]
    InvalidNodeCount,
    #[error("{name} must be positive, got {value}")]
    NonPositiveTiming { name: &'static str, value: f64 },
    #[error("frame of {frame_ms} ms is shorter than the {min_ms} ms the layout needs")]
    InfeasibleFrame { frame_ms: f64, min_ms: f64 },
    #[error("strategy {strategy} does not run over {protocol}")]
    PolicyProtocolMismatch { strategy: &'static str, protocol: &'static str },
    #[error("loss probability must lie in [0, 1), got {0}")]
    InvalidLoss(f64),
    #[error("current for {name} must be nonnegative, got {value} mA")]
    NegativeCurrent { name: &'static str, value: f64 },
    #[error("per-try duration must be positive, got {0} ms")]
    NonPositiveTry(f64),
}

/// Shortest frame that fits the protocol's layout, in integer microseconds.
pub fn min_interval_us(
    protocol: Protocol,
    n_nodes: usize,
    timings: &SlotTimings,
) -> Result<u64, MacError> {
    if n_nodes == 0 {
        return Err(MacError::InvalidNodeCount);
    }
    timings.validate()?;
    let n = n_nodes as u64;
    let guard = ms_to_us(timings.guard_ms);
    let x = ms_to_us(timings.x_slot_ms) + guard;
    let u = ms_to_us(timings.u_slot_ms) + guard;
    let v = ms_to_us(timings.v_slot_ms) + guard;
    let core = n * x + ms_to_us(timings.d_c_ms) + n * u;
    Ok(match protocol {
        Protocol::CTdma | Protocol::AdcTdma => core,
        Protocol::SdcTdma => n * v + ms_to_us(timings.d_g_ms) + core,
    })
}

/// Same minimum in milliseconds; exact for integer-millisecond timings.
pub fn min_interval_ms(
    protocol: Protocol,
    n_nodes: usize,
    timings: &SlotTimings,
) -> Result<f64, MacError> {
    Ok(min_interval_us(protocol, n_nodes, timings)? as f64 / US_PER_MS as f64)
}

/// Lays out one frame of the given length. Every slot's footprint is its
/// configured size plus the guard tail.
pub fn build_schedule(
    protocol: Protocol,
    n_nodes: usize,
    timings: &SlotTimings,
    frame_ms: f64,
) -> Result<SlotSchedule, MacError> {
    let min_us = min_interval_us(protocol, n_nodes, timings)?;
    let frame_us = ms_to_us(frame_ms);
    if frame_us < min_us {
        return Err(MacError::InfeasibleFrame {
            frame_ms,
            min_ms: min_us as f64 / US_PER_MS as f64,
        });
    }

    let guard = ms_to_us(timings.guard_ms);
    let mut slots = Vec::with_capacity(3 * n_nodes);
    let mut cursor = 0u64;
    let mut push_block = |cursor: &mut u64, kind: SlotKind, size_ms: f64| {
        let duration = ms_to_us(size_ms) + guard;
        for node in 0..n_nodes {
            slots.push(Slot { node, kind, start_us: *cursor, duration_us: duration, guard_us: guard });
            *cursor += duration;
        }
    };

    if protocol == Protocol::SdcTdma {
        push_block(&mut cursor, SlotKind::V, timings.v_slot_ms);
        cursor += ms_to_us(timings.d_g_ms);
    }
    push_block(&mut cursor, SlotKind::X, timings.x_slot_ms);
    cursor += ms_to_us(timings.d_c_ms);
    let decision_us = cursor;
    push_block(&mut cursor, SlotKind::U, timings.u_slot_ms);
    debug_assert_eq!(cursor, min_us);

    Ok(SlotSchedule {
        protocol,
        n_nodes,
        frame_us,
        slots,
        d_c_us: ms_to_us(timings.d_c_ms),
        d_g_us: ms_to_us(timings.d_g_ms),
        decision_us,
    })
}

/// On-air message kinds and their payload sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MsgKind {
    /// Full state sample.
    StateX,
    /// Bare acknowledgement; piggybacked payloads are counted separately.
    Ack,
    /// Control-retrieval request.
    RequestR,
    /// Violation-outcome query.
    RequestA,
    /// Local violation flag.
    ViolationV,
    /// Control signal.
    ControlU,
    /// Adaptive-threshold update.
    EtaParam,
    /// Slack update.
    ThetaParam,
    /// Quantized state increment.
    IncrementM,
}

impl MsgKind {
    pub fn size_bytes(self) -> u32 {
        match self {
            MsgKind::StateX => 36,
            MsgKind::Ack | MsgKind::RequestR | MsgKind::RequestA | MsgKind::ViolationV => 1,
            MsgKind::ControlU | MsgKind::EtaParam | MsgKind::ThetaParam => 2,
            MsgKind::IncrementM => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    Delivered,
    Lost,
}

/// One logged transmission: a node's request try or the controller's reply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    /// Absolute transmission start time.
    pub time_us: u64,
    pub node: usize,
    pub kind: MsgKind,
    /// Bytes on air, including piggybacked payloads for replies.
    pub size_bytes: u32,
    pub outcome: TxOutcome,
}

/// Supply currents per power state, in milliamperes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Currents {
    pub sleep_ma: f64,
    pub idle_ma: f64,
    pub rx_ma: f64,
    pub tx_ma: f64,
    pub sense_ma: f64,
    pub actuate_ma: f64,
}

impl Default for Currents {
    fn default() -> Self {
        // The deployed modules draw the same for transmit and listen; sleep
        // sits well below idle.
        Currents {
            sleep_ma: 10.0,
            idle_ma: 20.0,
            rx_ma: 120.0,
            tx_ma: 120.0,
            sense_ma: 40.0,
            actuate_ma: 150.0,
        }
    }
}

impl Currents {
    pub fn get(&self, state: PowerState) -> f64 {
        match state {
            PowerState::Sleep => self.sleep_ma,
            PowerState::Idle => self.idle_ma,
            PowerState::Rx => self.rx_ma,
            PowerState::Tx => self.tx_ma,
            PowerState::Sense => self.sense_ma,
            PowerState::Actuate => self.actuate_ma,
        }
    }

    fn validate(&self) -> Result<(), MacError> {
        for (name, value) in [
            ("sleep", self.sleep_ma),
            ("idle", self.idle_ma),
            ("rx", self.rx_ma),
            ("tx", self.tx_ma),
            ("sense", self.sense_ma),
            ("actuate", self.actuate_ma),
        ] {
            if value.is_nan() || value < 0.0 {
                return Err(MacError::NegativeCurrent { name, value });
            }
        }
        Ok(())
    }
}

/// Loss and timing model of a node's radio and peripherals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioModel {
    /// Probability that one request/ack try fails, in [0, 1).
    pub loss_probability: f64,
    /// One try: transmit for the first half, listen for the second.
    pub per_try_ms: f64,
    /// Optional cap below the window-derived try budget.
    pub max_retries_per_slot: Option<u32>,
    /// Sampling task at the frame start.
    pub sense_ms: f64,
    /// Valve movement on a command change.
    pub actuate_ms: f64,
    pub currents: Currents,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            loss_probability: 0.0,
            per_try_ms: 10.0,
            max_retries_per_slot: None,
            sense_ms: 5.0,
            actuate_ms: 5.0,
            currents: Currents::default(),
        }
    }
}

impl RadioModel {
    pub fn validate(&self) -> Result<(), MacError> {
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(MacError::InvalidLoss(self.loss_probability));
        }
        if self.per_try_ms.is_nan() || self.per_try_ms <= 0.0 {
            return Err(MacError::NonPositiveTry(self.per_try_ms));
        }
        self.currents.validate()
    }

    pub fn per_try_us(&self) -> u64 {
        ms_to_us(self.per_try_ms)
    }

    pub fn sense_us(&self) -> u64 {
        ms_to_us(self.sense_ms)
    }

    pub fn actuate_us(&self) -> u64 {
        ms_to_us(self.actuate_ms)
    }

    /// Tries that fit a window of the given length.
    pub fn tries_budget(&self, window_us: u64) -> u32 {
        let fit = (window_us / self.per_try_us()) as u32;
        match self.max_retries_per_slot {
            Some(cap) => fit.min(cap),
            None => fit,
        }
    }
}

/// Power states a node can occupy; every microsecond lands in exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerState {
    Sleep,
    Idle,
    Rx,
    Tx,
    Sense,
    Actuate,
}

impl PowerState {
    pub const ALL: [PowerState; 6] = [
        PowerState::Sleep,
        PowerState::Idle,
        PowerState::Rx,
        PowerState::Tx,
        PowerState::Sense,
        PowerState::Actuate,
    ];

    pub fn index(self) -> usize {
        match self {
            PowerState::Sleep => 0,
            PowerState::Idle => 1,
            PowerState::Rx => 2,
            PowerState::Tx => 3,
            PowerState::Sense => 4,
            PowerState::Actuate => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PowerState::Sleep => "sleep",
            PowerState::Idle => "idle",
            PowerState::Rx => "rx",
            PowerState::Tx => "tx",
            PowerState::Sense => "sense",
            PowerState::Actuate => "actuate",
        }
    }
}

/// Per-node dwell times per power state, in integer microseconds.
///
/// Discharge follows E = Σ I·t/3600 with t in seconds; the reported lower
/// bound drops the sleep term, modeling a node that could deep-sleep at
/// negligible draw.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    state_us: Vec<[u64; 6]>,
}

impl EnergyLedger {
    pub fn new(n_nodes: usize) -> Self {
        EnergyLedger { state_us: vec![[0; 6]; n_nodes] }
    }

    pub fn n_nodes(&self) -> usize {
        self.state_us.len()
    }

    pub fn account(&mut self, node: usize, state: PowerState, duration_us: u64) {
        self.state_us[node][state.index()] += duration_us;
    }

    pub fn state_us(&self, node: usize, state: PowerState) -> u64 {
        self.state_us[node][state.index()]
    }

    /// Total accounted time; equals the simulated duration by construction.
    pub fn total_us(&self, node: usize) -> u64 {
        self.state_us[node].iter().sum()
    }

    pub fn state_seconds(&self, node: usize, state: PowerState) -> f64 {
        self.state_us(node, state) as f64 * 1e-6
    }

    pub fn sleep_seconds(&self, node: usize) -> f64 {
        self.state_seconds(node, PowerState::Sleep)
    }

    /// Battery drain in mAh assuming the configured draw in every state.
    pub fn discharge_mah(&self, node: usize, currents: &Currents) -> f64 {
        PowerState::ALL
            .iter()
            .map(|&s| currents.get(s) * self.state_seconds(node, s) / 3600.0)
            .sum()
    }

    /// Drain excluding the sleep term.
    pub fn discharge_floor_mah(&self, node: usize, currents: &Currents) -> f64 {
        PowerState::ALL
            .iter()
            .filter(|&&s| s != PowerState::Sleep)
            .map(|&s| currents.get(s) * self.state_seconds(node, s) / 3600.0)
            .sum()
    }

    /// Adds another ledger's times into this one, node by node.
    pub fn merge(&mut self, other: &EnergyLedger) {
        assert_eq!(self.state_us.len(), other.state_us.len());
        for (mine, theirs) in self.state_us.iter_mut().zip(&other.state_us) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
    }
}

/// Result of one slotted request/ack exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeResult {
    pub delivered: bool,
    pub tries: u32,
    /// Cursor position after the exchange (absolute time).
    pub end_us: u64,
}

/// Runs one request/ack exchange with retries inside a slot.
///
/// Each try transmits the request for half of `per_try` and listens for
/// the other half; a try succeeds with probability 1 − loss. Tries stop at
/// the first success, at the slot's transmission deadline, or at the retry
/// cap. The reply is logged with the acknowledgement plus any piggybacked
/// payload bytes. Energy is charged tx/rx per try; the caller owns idle
/// and sleep accounting around the exchange.
#[allow(clippy::too_many_arguments)]
pub fn run_exchange(
    slot: &Slot,
    frame_start_us: u64,
    cursor_us: u64,
    request: MsgKind,
    reply_extra_bytes: u32,
    radio: &RadioModel,
    rng: &mut ChaCha8Rng,
    ledger: &mut EnergyLedger,
    trace: &mut Vec<TraceEvent>,
) -> ExchangeResult {
    let per_try = radio.per_try_us();
    let half = per_try / 2;
    let deadline = frame_start_us + slot.tx_deadline_us();
    debug_assert!(cursor_us >= frame_start_us + slot.start_us);

    let remaining = deadline.saturating_sub(cursor_us);
    let budget = radio.tries_budget(remaining);

    let mut cursor = cursor_us;
    let mut tries = 0;
    while tries < budget {
        tries += 1;
        let lost = rng.gen::<f64>() < radio.loss_probability;
        let outcome = if lost { TxOutcome::Lost } else { TxOutcome::Delivered };
        trace.push(TraceEvent {
            time_us: cursor,
            node: slot.node,
            kind: request,
            size_bytes: request.size_bytes(),
            outcome,
        });
        ledger.account(slot.node, PowerState::Tx, half);
        ledger.account(slot.node, PowerState::Rx, per_try - half);
        if !lost {
            trace.push(TraceEvent {
                time_us: cursor + half,
                node: slot.node,
                kind: MsgKind::Ack,
                size_bytes: MsgKind::Ack.size_bytes() + reply_extra_bytes,
                outcome: TxOutcome::Delivered,
            });
            cursor += per_try;
            return ExchangeResult { delivered: true, tries, end_us: cursor };
        }
        cursor += per_try;
    }
    ExchangeResult { delivered: false, tries, end_us: cursor }
}
