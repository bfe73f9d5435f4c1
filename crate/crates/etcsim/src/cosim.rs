//! One networked control loop: the plant, the controller, a triggering
//! strategy, and the slotted MAC simulated frame by frame.
//!
//! Each frame runs sense → (V-block) → X-block → compute delay → U-block
//! with the per-slot semantics of the strategy's protocol. The plant
//! integrates exactly between events (commands and mode are piecewise
//! constant), so event times are the only discretization. Node radios
//! follow the duty-cycle rules: awake in their own slots, asleep outside
//! them, with the documented early-sleep shortcuts for quiet frames.
//!
//! Event ordering is fixed by the schedule: slots are laid out in start
//! order and never overlap, so processing slots in sequence is identical
//! to a timestamp-ordered event queue; the single loss stream is consumed
//! in that same order, which makes runs bit-reproducible for a seed pair.
//!
//! Held-state copies commit only on acknowledged exchanges, on both ends:
//! a node that never got an acknowledgement re-evaluates its trigger
//! against the old held value next frame, and the controller falls back
//! to its last committed value for any node whose message was lost.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{compute_input, update_mode, ControllerGains, ModeAutomaton};
use crate::macsim::{
    build_schedule, run_exchange, Currents, EnergyLedger, MacError, MsgKind, PowerState,
    Protocol, RadioModel, Slot, SlotKind, SlotSchedule, SlotTimings, TraceEvent,
};
use crate::plant::{self, Mode, NoiseConfig, PlantModel, PlantState, SensorNoise};
use crate::triggers::{
    apply_increment, padetc_apply_update, padetc_local_check, padetc_update_threshold,
    petc_decide, psdetc_compute_theta, psdetc_local_check, HeldState, Payload,
    PredictionHorizon, StateEncoding, TriggerError, TriggerKind, TriggerPolicy,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoSimError {
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Trigger(#[from] TriggerError),
    #[error("initial held state has zero norm; the adaptive threshold would start at zero")]
    DegenerateBoot,
    #[error("state dimension {xi} does not match the {n}-node plant")]
    DimensionMismatch { xi: usize, n: usize },
}

/// Everything needed to assemble one run.
#[derive(Debug, Clone)]
pub struct CoSimSetup {
    pub policy: TriggerPolicy,
    pub timings: SlotTimings,
    pub radio: RadioModel,
    pub model: PlantModel,
    pub gains: ControllerGains,
    pub noise: NoiseConfig,
    /// Initial level deviations; the boot held state equals this exactly,
    /// modeling a known start condition.
    pub xi0: Vec<f64>,
    pub mode0: Mode,
    pub noise_seed: u64,
    pub loss_seed: u64,
}

impl CoSimSetup {
    /// Run setup for the three-tank network: tanks empty, both pumps on.
    pub fn water_network(policy: TriggerPolicy, model: PlantModel) -> Self {
        let xi0: Vec<f64> = model.h_ref.iter().map(|h| -h).collect();
        CoSimSetup {
            policy,
            timings: SlotTimings::default(),
            radio: RadioModel::default(),
            model,
            gains: ControllerGains::water_network(),
            noise: NoiseConfig { sensor_std: 0.0 },
            xi0,
            mode0: Mode::BothPumps,
            noise_seed: 0,
            loss_seed: 0,
        }
    }
}

/// Plant plus the applied commands and the recorded trajectory.
///
/// The trajectory stores the state at every integration breakpoint; the
/// state is piecewise linear in between, so breakpoint maxima are exact
/// trajectory maxima.
#[derive(Debug, Clone)]
struct TrackedPlant {
    model: PlantModel,
    state: PlantState,
    noise: SensorNoise,
    commands: Vec<f64>,
    now_us: u64,
    trajectory: Vec<(f64, Vec<f64>)>,
}

impl TrackedPlant {
    fn new(
        model: PlantModel,
        xi0: Vec<f64>,
        mode0: Mode,
        noise: SensorNoise,
        commands: Vec<f64>,
    ) -> Self {
        let state = PlantState { xi: xi0.clone(), mode: mode0, time: 0.0 };
        TrackedPlant { model, state, noise, commands, now_us: 0, trajectory: vec![(0.0, xi0)] }
    }

    fn advance_to(&mut self, t_us: u64) {
        debug_assert!(t_us >= self.now_us, "plant time must not run backwards");
        if t_us <= self.now_us {
            return;
        }
        let dt = (t_us - self.now_us) as f64 * 1e-6;
        self.state =
            plant::step(&self.state, &self.commands, dt, &self.model).expect("dt is positive");
        // Pin the clock to the integer event time instead of accumulating
        // float increments.
        self.state.time = t_us as f64 * 1e-6;
        self.now_us = t_us;
        self.trajectory.push((self.state.time, self.state.xi.clone()));
    }

    fn sense_all(&mut self, t_us: u64) -> Vec<f64> {
        self.advance_to(t_us);
        plant::sense(&self.state, &mut self.noise)
    }

    fn apply_command(&mut self, node: usize, angle: f64, t_us: u64) {
        self.advance_to(t_us);
        self.commands[node] = angle;
    }

    fn set_mode(&mut self, mode: Mode, t_us: u64) {
        self.advance_to(t_us);
        self.state.mode = mode;
    }
}

/// Per-frame timeline accountant: every node's frame is a gap-free
/// sequence of power-state segments, so dwell times sum to the frame
/// length exactly.
struct FrameBuilder {
    end_abs: u64,
    cursors: Vec<u64>,
    ledger: EnergyLedger,
}

impl FrameBuilder {
    fn new(t0: u64, frame_us: u64, n: usize) -> Self {
        FrameBuilder { end_abs: t0 + frame_us, cursors: vec![t0; n], ledger: EnergyLedger::new(n) }
    }

    /// Charges `state` from the node's cursor up to `until_abs` (no-op if
    /// the cursor is already past it).
    fn fill(&mut self, node: usize, state: PowerState, until_abs: u64) {
        let cursor = self.cursors[node];
        if until_abs > cursor {
            self.ledger.account(node, state, until_abs - cursor);
            self.cursors[node] = until_abs;
        }
    }

    fn finish(mut self) -> EnergyLedger {
        for node in 0..self.cursors.len() {
            self.fill(node, PowerState::Sleep, self.end_abs);
            debug_assert_eq!(self.cursors[node], self.end_abs);
        }
        self.ledger
    }
}

/// Communication and actuation counts of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameOutcome {
    /// Whether the event condition fired (the controller's view).
    pub violation: bool,
    /// State payloads (full values or increments) delivered.
    pub state_tx: u32,
    /// Control signals delivered inside acknowledgements.
    pub control_msgs: u32,
    /// Exchanges that exhausted their retries.
    pub drops: u32,
    /// Valves that physically moved.
    pub actuations: u32,
    /// Total movement of all valves in degrees.
    pub valve_movement_deg: f64,
}

/// One frame's outcome plus its energy segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub index: u64,
    pub start_s: f64,
    pub outcome: FrameOutcome,
    pub energy: EnergyLedger,
}

/// Everything a finished run exposes to metric computation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub frames: Vec<FrameRecord>,
    /// (time s, ξ) at every integration breakpoint.
    pub trajectory: Vec<(f64, Vec<f64>)>,
    pub automaton: ModeAutomaton,
    /// Whole-run dwell times per node.
    pub ledger: EnergyLedger,
    pub events: Vec<TraceEvent>,
    pub frame_us: u64,
    pub n_nodes: usize,
    /// Current draw table the run was simulated with.
    pub currents: Currents,
}

/// A sensor/actuator node's local copies of the shared quantities.
#[derive(Debug, Clone)]
struct NodeState {
    /// This node's component of the held state.
    xi_hat: f64,
    /// Local copy of the adaptive threshold.
    eta: f64,
    /// Local copy of the slack value.
    theta: f64,
    /// Applied valve open level in degrees.
    command: f64,
}

/// Controller-side run state. The live adaptive parameters (θ, η) stay in
/// the policy, which is the controller's authoritative copy.
#[derive(Debug, Clone)]
struct Controller {
    held: HeldState,
    automaton: ModeAutomaton,
    /// Commands as last computed; the controller assumes delivery.
    commands: Vec<f64>,
}

pub struct CoSimulation {
    schedule: SlotSchedule,
    policy: TriggerPolicy,
    radio: RadioModel,
    gains: ControllerGains,
    plant: TrackedPlant,
    controller: Controller,
    nodes: Vec<NodeState>,
    loss_rng: ChaCha8Rng,
    ledger: EnergyLedger,
    events: Vec<TraceEvent>,
    frames: Vec<FrameRecord>,
    frame_index: u64,
}

impl CoSimulation {
    /// Builds the run over the strategy's own protocol with a frame length
    /// of one sampling period.
    pub fn new(setup: CoSimSetup) -> Result<Self, CoSimError> {
        let protocol = Protocol::for_trigger(setup.policy.kind);
        let n = setup.model.n();
        let schedule =
            build_schedule(protocol, n, &setup.timings, setup.policy.period * 1_000.0)?;
        Self::with_schedule(setup, schedule)
    }

    /// Same, but over a caller-provided schedule; rejects layouts the
    /// strategy cannot run on.
    pub fn with_schedule(setup: CoSimSetup, schedule: SlotSchedule) -> Result<Self, CoSimError> {
        if !schedule.protocol.supports(setup.policy.kind) {
            return Err(MacError::PolicyProtocolMismatch {
                strategy: setup.policy.kind.label(),
                protocol: schedule.protocol.label(),
            }
            .into());
        }
        let n = setup.model.n();
        if setup.xi0.len() != n {
            return Err(CoSimError::DimensionMismatch { xi: setup.xi0.len(), n });
        }
        setup.radio.validate()?;
        let mut policy = setup.policy;
        policy.validate(n)?;

        let is_async =
            matches!(policy.kind, TriggerKind::PadetcAbs | TriggerKind::PadetcRel);
        if is_async {
            policy.eta = TriggerPolicy::initial_eta(policy.varrho, &setup.xi0);
            if policy.eta <= 0.0 {
                return Err(CoSimError::DegenerateBoot);
            }
        }
        policy.theta = vec![0.0; n];

        // Boot condition: the start state is known to everyone (the fill
        // scenario starts from empty tanks), and the startup command for
        // it is already applied before the first frame.
        let commands = compute_input(&setup.xi0, setup.mode0, &setup.gains);
        let nodes = (0..n)
            .map(|j| NodeState {
                xi_hat: setup.xi0[j],
                eta: policy.eta,
                theta: 0.0,
                command: commands[j],
            })
            .collect();
        let controller = Controller {
            held: HeldState::new(setup.xi0.clone(), 0.0),
            automaton: ModeAutomaton::new(setup.mode0),
            commands: commands.clone(),
        };
        let noise =
            SensorNoise::new(setup.noise, ChaCha8Rng::seed_from_u64(setup.noise_seed));
        let plant =
            TrackedPlant::new(setup.model, setup.xi0, setup.mode0, noise, commands);

        Ok(CoSimulation {
            schedule,
            policy,
            radio: setup.radio,
            gains: setup.gains,
            plant,
            controller,
            nodes,
            loss_rng: ChaCha8Rng::seed_from_u64(setup.loss_seed),
            ledger: EnergyLedger::new(n),
            events: Vec::new(),
            frames: Vec::new(),
            frame_index: 0,
        })
    }

    pub fn frame_us(&self) -> u64 {
        self.schedule.frame_us
    }

    /// Sleep-fills up to the slot, runs the exchange, and moves the node's
    /// cursor past it.
    fn exchange(
        &mut self,
        fb: &mut FrameBuilder,
        t0: u64,
        slot: Slot,
        request: MsgKind,
        reply_extra: u32,
    ) -> bool {
        fb.fill(slot.node, PowerState::Sleep, t0 + slot.start_us);
        let r = run_exchange(
            &slot,
            t0,
            fb.cursors[slot.node],
            request,
            reply_extra,
            &self.radio,
            &mut self.loss_rng,
            &mut fb.ledger,
            &mut self.events,
        );
        fb.cursors[slot.node] = r.end_us;
        r.delivered
    }

    fn idle_out_slot(fb: &mut FrameBuilder, t0: u64, slot: Slot) {
        fb.fill(slot.node, PowerState::Idle, t0 + slot.end_us());
    }

    /// Runs one super-frame and returns its record.
    pub fn step_frame(&mut self) -> &FrameRecord {
        let n = self.schedule.n_nodes;
        let t0 = self.frame_index * self.schedule.frame_us;
        let mut fb = FrameBuilder::new(t0, self.schedule.frame_us, n);
        let mut outcome = FrameOutcome::default();

        // Simultaneous sampling at the frame start.
        let xi_meas = self.plant.sense_all(t0);
        let sense_end = t0 + self.radio.sense_us();
        for j in 0..n {
            fb.fill(j, PowerState::Sense, sense_end);
        }

        let kind = self.policy.kind;
        let slots: Vec<Slot> = self.schedule.slots.clone();

        // V-block (synchronous decentralized only): every node reports its
        // local check; a lost flag reads as "no violation".
        let mut violation = false;
        if kind == TriggerKind::Psdetc {
            for slot in slots.iter().filter(|s| s.kind == SlotKind::V) {
                let j = slot.node;
                let fired = psdetc_local_check(
                    xi_meas[j],
                    self.nodes[j].xi_hat - xi_meas[j],
                    self.policy.sigma,
                    self.nodes[j].theta,
                );
                let delivered = self.exchange(&mut fb, t0, *slot, MsgKind::ViolationV, 0);
                if delivered {
                    violation |= fired;
                } else {
                    outcome.drops += 1;
                }
                Self::idle_out_slot(&mut fb, t0, *slot);
            }
        }

        // X-block: protocol-specific upload semantics.
        let mut received: Vec<Option<Payload>> = vec![None; n];
        // Nodes whose upload was acknowledged commit their held copy.
        let mut node_commit: Vec<Option<f64>> = vec![None; n];
        for slot in slots.iter().filter(|s| s.kind == SlotKind::X) {
            let j = slot.node;
            match kind {
                TriggerKind::Ttc | TriggerKind::Petc => {
                    let delivered = self.exchange(&mut fb, t0, *slot, MsgKind::StateX, 0);
                    if delivered {
                        received[j] = Some(Payload::Absolute(xi_meas[j]));
                        outcome.state_tx += 1;
                    } else {
                        outcome.drops += 1;
                    }
                    Self::idle_out_slot(&mut fb, t0, *slot);
                }
                TriggerKind::Psdetc => {
                    // Ask whether any node flagged a violation; on "no"
                    // (or no answer) the node sleeps through the rest of
                    // the frame, skipping its U-slot.
                    let answered = self.exchange(&mut fb, t0, *slot, MsgKind::RequestA, 0);
                    if !answered {
                        outcome.drops += 1;
                        continue;
                    }
                    if violation {
                        let delivered = self.exchange(&mut fb, t0, *slot, MsgKind::StateX, 0);
                        if delivered {
                            received[j] = Some(Payload::Absolute(xi_meas[j]));
                            node_commit[j] = Some(xi_meas[j]);
                            outcome.state_tx += 1;
                        } else {
                            outcome.drops += 1;
                        }
                        Self::idle_out_slot(&mut fb, t0, *slot);
                    }
                }
                TriggerKind::PadetcAbs | TriggerKind::PadetcRel => {
                    let node = &self.nodes[j];
                    let eps = node.xi_hat - xi_meas[j];
                    if !padetc_local_check(eps, self.policy.omega[j], node.eta) {
                        // Quiet node: stays asleep through its X-slot.
                        continue;
                    }
                    let encoding = match kind {
                        TriggerKind::PadetcRel => {
                            StateEncoding::Incremental(self.policy.increment_direction)
                        }
                        _ => StateEncoding::Absolute,
                    };
                    let local_step = self.policy.omega[j] * node.eta;
                    let (new_hat, payload) = padetc_apply_update(
                        node.xi_hat,
                        xi_meas[j],
                        local_step * local_step,
                        encoding,
                    )
                    .expect("threshold is positive while the run is live");
                    let msg = match payload {
                        Payload::Absolute(_) => MsgKind::StateX,
                        Payload::Increment { .. } => MsgKind::IncrementM,
                    };
                    let delivered = self.exchange(&mut fb, t0, *slot, msg, 0);
                    if delivered {
                        received[j] = Some(payload);
                        node_commit[j] = Some(new_hat);
                        outcome.state_tx += 1;
                    } else {
                        outcome.drops += 1;
                    }
                    Self::idle_out_slot(&mut fb, t0, *slot);
                }
            }
        }

        // Compute delay: the controller folds in what arrived, evaluates
        // the trigger it owns, runs the mode guards, and prepares commands
        // and piggybacked parameters.
        let t_dec_us = t0 + self.schedule.decision_us;
        let t_dec_s = t_dec_us as f64 * 1e-6;
        match kind {
            TriggerKind::Ttc => {
                violation = true;
                self.commit_absolute(&received);
            }
            TriggerKind::Petc => {
                let eval: Vec<f64> = (0..n)
                    .map(|j| match received[j] {
                        Some(Payload::Absolute(x)) => x,
                        _ => self.controller.held.xi_hat[j],
                    })
                    .collect();
                let decision = petc_decide(&eval, &self.controller.held.xi_hat, self.policy.sigma)
                    .expect("sigma validated at construction");
                violation = decision.control_update_required;
                if violation {
                    self.controller.held.xi_hat = eval;
                }
            }
            TriggerKind::Psdetc => {
                // Violation already decided from the V-flags.
                self.commit_absolute(&received);
            }
            TriggerKind::PadetcAbs | TriggerKind::PadetcRel => {
                violation = received.iter().any(Option::is_some);
                for (j, slot) in received.iter().enumerate() {
                    if let Some(payload) = *slot {
                        let step = self.policy.omega[j] * self.policy.eta;
                        self.controller.held.xi_hat[j] = apply_increment(
                            self.controller.held.xi_hat[j],
                            payload,
                            step * step,
                            self.policy.increment_direction,
                        );
                    }
                }
            }
        }
        outcome.violation = violation;

        // Mode guards run every frame on the controller's best knowledge.
        let candidate =
            compute_input(&self.controller.held.xi_hat, Mode::BothPumps, &self.gains);
        let next = update_mode(
            &self.controller.automaton,
            &self.controller.held.xi_hat,
            &candidate,
            t_dec_s,
            &self.plant.model,
        );
        if next.mode != self.controller.automaton.mode {
            self.plant.set_mode(next.mode, t_dec_us);
        }
        self.controller.automaton = next;

        let mut reply_extra = 0;
        if violation {
            let mode = self.controller.automaton.mode;
            self.controller.commands =
                compute_input(&self.controller.held.xi_hat, mode, &self.gains);
            let previous_event_gap = t_dec_s - self.controller.held.last_update_time;
            self.controller.held.last_event_time = self.controller.held.last_update_time;
            self.controller.held.last_update_time = t_dec_s;
            match kind {
                TriggerKind::Psdetc => {
                    let t_e = match self.policy.horizon {
                        PredictionHorizon::FixedPeriod => self.policy.period,
                        PredictionHorizon::LastInterevent => previous_event_gap,
                    };
                    let slope = self.plant.model.slope(
                        &self.controller.held.xi_hat,
                        mode,
                        &self.controller.commands,
                    );
                    self.policy.theta = psdetc_compute_theta(
                        &self.controller.held.xi_hat,
                        &slope,
                        self.policy.sigma,
                        t_e,
                    )
                    .expect("event times strictly increase");
                    reply_extra =
                        MsgKind::ControlU.size_bytes() + MsgKind::ThetaParam.size_bytes();
                }
                TriggerKind::PadetcAbs | TriggerKind::PadetcRel => {
                    self.policy.eta = padetc_update_threshold(
                        self.policy.eta,
                        &self.controller.held.xi_hat,
                        self.policy.mu,
                        self.policy.varrho,
                        self.policy.eta_min,
                    );
                    reply_extra =
                        MsgKind::ControlU.size_bytes() + MsgKind::EtaParam.size_bytes();
                }
                _ => reply_extra = MsgKind::ControlU.size_bytes(),
            }
        }

        // Node-side held-state commits for acknowledged uploads.
        for (node, commit) in self.nodes.iter_mut().zip(&node_commit) {
            if let Some(new_hat) = *commit {
                node.xi_hat = new_hat;
            }
        }

        // U-block: control retrieval. A quiet synchronous frame skips it
        // entirely; the other layouts always run the request, receiving a
        // bare acknowledgement when there is nothing new.
        let skip_u = kind == TriggerKind::Psdetc && !violation;
        if !skip_u {
            for slot in slots.iter().filter(|s| s.kind == SlotKind::U) {
                let j = slot.node;
                let delivered =
                    self.exchange(&mut fb, t0, *slot, MsgKind::RequestR, reply_extra);
                if delivered {
                    if violation {
                        outcome.control_msgs += 1;
                        match kind {
                            TriggerKind::Psdetc => self.nodes[j].theta = self.policy.theta[j],
                            TriggerKind::PadetcAbs | TriggerKind::PadetcRel => {
                                self.nodes[j].eta = self.policy.eta
                            }
                            _ => {}
                        }
                        let u_j = self.controller.commands[j];
                        if u_j != self.nodes[j].command {
                            outcome.actuations += 1;
                            outcome.valve_movement_deg += (u_j - self.nodes[j].command).abs();
                            self.plant.apply_command(j, u_j, fb.cursors[j]);
                            self.nodes[j].command = u_j;
                            // The valve moves right after the exchange; the
                            // servo may run into the guard or past the slot,
                            // clipped only at the frame boundary.
                            let target =
                                (fb.cursors[j] + self.radio.actuate_us()).min(fb.end_abs);
                            fb.fill(j, PowerState::Actuate, target);
                        }
                    }
                } else {
                    outcome.drops += 1;
                }
                Self::idle_out_slot(&mut fb, t0, *slot);
            }
        }

        let energy = fb.finish();
        self.ledger.merge(&energy);
        self.frames.push(FrameRecord {
            index: self.frame_index,
            start_s: t0 as f64 * 1e-6,
            outcome,
            energy,
        });
        self.frame_index += 1;
        self.frames.last().expect("just pushed")
    }

    /// Snaps controller-held components to delivered absolute values.
    fn commit_absolute(&mut self, received: &[Option<Payload>]) {
        for (j, r) in received.iter().enumerate() {
            if let Some(Payload::Absolute(x)) = r {
                self.controller.held.xi_hat[j] = *x;
            }
        }
    }

    /// Runs `count` frames and integrates the plant through the end of the
    /// last one.
    pub fn run_frames(&mut self, count: u64) {
        for _ in 0..count {
            self.step_frame();
        }
        self.plant.advance_to(self.frame_index * self.schedule.frame_us);
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn automaton(&self) -> &ModeAutomaton {
        &self.controller.automaton
    }

    pub fn xi(&self) -> &[f64] {
        &self.plant.state.xi
    }

    pub fn into_trace(self) -> RunTrace {
        RunTrace {
            frames: self.frames,
            trajectory: self.plant.trajectory,
            automaton: self.controller.automaton,
            ledger: self.ledger,
            events: self.events,
            frame_us: self.schedule.frame_us,
            n_nodes: self.schedule.n_nodes,
            currents: self.radio.currents,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macsim::TxOutcome;
    use crate::plant::InputCoupling;

    fn setup(kind: TriggerKind, coupling: InputCoupling) -> CoSimSetup {
        let model = PlantModel::water_network(coupling);
        let policy = TriggerPolicy::defaults(kind, model.n());
        CoSimSetup::water_network(policy, model)
    }

    #[test]
    fn ttc_frame_delivers_all_states_and_commands() {
        let mut sim = CoSimulation::new(setup(TriggerKind::Ttc, InputCoupling::Direct)).unwrap();
        let record = sim.step_frame().clone();
        assert!(record.outcome.violation);
        assert_eq!(record.outcome.state_tx, 3);
        assert_eq!(record.outcome.control_msgs, 3);
        assert_eq!(record.outcome.drops, 0);
        // The boot command is already applied, and with zero noise the
        // first frame recomputes exactly it: nothing moves.
        assert_eq!(record.outcome.actuations, 0);
        let requests =
            sim.events.iter().filter(|e| e.kind == MsgKind::RequestR).count();
        assert_eq!(requests, 3);
        let states = sim.events.iter().filter(|e| e.kind == MsgKind::StateX).count();
        assert_eq!(states, 3);
    }

    #[test]
    fn ttc_actuates_once_levels_move_the_command() {
        let mut sim = CoSimulation::new(setup(TriggerKind::Ttc, InputCoupling::Direct)).unwrap();
        sim.run_frames(60);
        let total: u32 = sim.frames().iter().map(|f| f.outcome.actuations).sum();
        assert!(total > 0, "an hour of filling must move at least one valve");
        let movement: f64 =
            sim.frames().iter().map(|f| f.outcome.valve_movement_deg).sum();
        assert!(movement >= 10.0 * total as f64, "detents are 10 degrees");
    }

    #[test]
    fn petc_quiet_frame_uploads_state_but_no_control() {
        // Exact boot knowledge and zero noise leave the holding error at
        // zero, so the quadratic test cannot fire on the first frame.
        let mut sim = CoSimulation::new(setup(TriggerKind::Petc, InputCoupling::Direct)).unwrap();
        let record = sim.step_frame().clone();
        assert!(!record.outcome.violation);
        assert_eq!(record.outcome.state_tx, 3);
        assert_eq!(record.outcome.control_msgs, 0);
        assert_eq!(record.outcome.actuations, 0);
    }

    #[test]
    fn petc_fires_once_the_error_budget_is_spent() {
        let mut sim = CoSimulation::new(setup(TriggerKind::Petc, InputCoupling::Direct)).unwrap();
        sim.run_frames(30);
        let violations = sim.frames().iter().filter(|f| f.outcome.violation).count();
        assert!(violations > 0, "filling tanks must eventually outgrow the budget");
        let ttc_like = sim.frames().len();
        assert!(violations < ttc_like, "the trigger must also skip some frames");
    }

    #[test]
    fn psdetc_quiet_frame_skips_the_u_block() {
        let mut sim =
            CoSimulation::new(setup(TriggerKind::Psdetc, InputCoupling::Direct)).unwrap();
        let record = sim.step_frame().clone();
        assert!(!record.outcome.violation);
        assert_eq!(record.outcome.state_tx, 0);
        assert_eq!(record.outcome.control_msgs, 0);
        let v_flags = sim.events.iter().filter(|e| e.kind == MsgKind::ViolationV).count();
        let queries = sim.events.iter().filter(|e| e.kind == MsgKind::RequestA).count();
        let requests = sim.events.iter().filter(|e| e.kind == MsgKind::RequestR).count();
        assert_eq!((v_flags, queries, requests), (3, 3, 0));
    }

    #[test]
    fn psdetc_violation_frame_refreshes_every_node() {
        let mut sim =
            CoSimulation::new(setup(TriggerKind::Psdetc, InputCoupling::Direct)).unwrap();
        // Make node 1's local condition fire by aging its held copy.
        sim.nodes[1].xi_hat += 0.05;
        sim.controller.held.xi_hat[1] += 0.05;
        let record = sim.step_frame().clone();
        assert!(record.outcome.violation);
        assert_eq!(record.outcome.state_tx, 3, "synchronous refresh uploads all nodes");
        assert_eq!(record.outcome.control_msgs, 3);
        // Slacks arrived: zero-sum within rounding.
        let sum: f64 = sim.nodes.iter().map(|nd| nd.theta).sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn adc_single_trigger_uploads_one_state_and_notifies_everyone() {
        let mut sim =
            CoSimulation::new(setup(TriggerKind::PadetcAbs, InputCoupling::Direct)).unwrap();
        sim.nodes[1].xi_hat += 0.05;
        sim.controller.held.xi_hat[1] += 0.05;
        let record = sim.step_frame().clone();
        assert!(record.outcome.violation);
        assert_eq!(record.outcome.state_tx, 1, "only the violating node uploads");
        assert_eq!(record.outcome.control_msgs, 3, "every node still fetches the command");
        let requests = sim.events.iter().filter(|e| e.kind == MsgKind::RequestR).count();
        assert_eq!(requests, 3);
        // The threshold update reached every node.
        for node in &sim.nodes {
            assert_eq!(node.eta, sim.policy.eta);
        }
    }

    #[test]
    fn adc_quiet_frame_still_runs_the_u_block() {
        let mut sim =
            CoSimulation::new(setup(TriggerKind::PadetcAbs, InputCoupling::Direct)).unwrap();
        let record = sim.step_frame().clone();
        assert!(!record.outcome.violation);
        assert_eq!(record.outcome.state_tx, 0);
        assert_eq!(record.outcome.control_msgs, 0, "bare acknowledgements carry no command");
        let requests = sim.events.iter().filter(|e| e.kind == MsgKind::RequestR).count();
        assert_eq!(requests, 3);
    }

    #[test]
    fn incremental_uploads_use_the_small_packet() {
        let mut sim =
            CoSimulation::new(setup(TriggerKind::PadetcRel, InputCoupling::Direct)).unwrap();
        sim.nodes[2].xi_hat += 0.05;
        sim.controller.held.xi_hat[2] += 0.05;
        sim.step_frame();
        let increments =
            sim.events.iter().filter(|e| e.kind == MsgKind::IncrementM).count();
        let fulls = sim.events.iter().filter(|e| e.kind == MsgKind::StateX).count();
        assert_eq!((increments, fulls), (1, 0));
    }

    #[test]
    fn every_strategy_conserves_frame_time_exactly() {
        for kind in [
            TriggerKind::Ttc,
            TriggerKind::Petc,
            TriggerKind::Psdetc,
            TriggerKind::PadetcAbs,
            TriggerKind::PadetcRel,
        ] {
            let mut s = setup(kind, InputCoupling::Direct);
            s.radio.loss_probability = 0.3;
            s.noise.sensor_std = 0.0005;
            s.loss_seed = 11;
            s.noise_seed = 12;
            let mut sim = CoSimulation::new(s).unwrap();
            sim.run_frames(20);
            let expect = 20 * sim.frame_us();
            for j in 0..3 {
                assert_eq!(sim.ledger.total_us(j), expect, "{kind:?} node {j}");
            }
        }
    }

    #[test]
    fn held_copies_agree_everywhere_without_loss() {
        for kind in
            [TriggerKind::Psdetc, TriggerKind::PadetcAbs, TriggerKind::PadetcRel]
        {
            let mut s = setup(kind, InputCoupling::Direct);
            s.noise.sensor_std = 0.0005;
            s.noise_seed = 5;
            let mut sim = CoSimulation::new(s).unwrap();
            for _ in 0..110 {
                sim.step_frame();
                for j in 0..3 {
                    assert_eq!(
                        sim.nodes[j].xi_hat, sim.controller.held.xi_hat[j],
                        "{kind:?} node {j} held copy diverged"
                    );
                }
            }
        }
    }

    #[test]
    fn identical_seeds_reproduce_the_trace() {
        let build = || {
            let mut s = setup(TriggerKind::PadetcRel, InputCoupling::Direct);
            s.noise.sensor_std = 0.0005;
            s.radio.loss_probability = 0.2;
            s.noise_seed = 77;
            s.loss_seed = 78;
            let mut sim = CoSimulation::new(s).unwrap();
            sim.run_frames(40);
            sim.into_trace()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn event_strategy_never_uploads_more_than_the_clock() {
        // Same sensor noise stream for both runs, frame by frame.
        let run = |kind| {
            let mut s = setup(kind, InputCoupling::Direct);
            s.noise.sensor_std = 0.0005;
            s.noise_seed = 99;
            let mut sim = CoSimulation::new(s).unwrap();
            sim.run_frames(110);
            sim.into_trace()
        };
        let ttc = run(TriggerKind::Ttc);
        let abs = run(TriggerKind::PadetcAbs);
        let mut cum_ttc = 0u32;
        let mut cum_abs = 0u32;
        for (t, a) in ttc.frames.iter().zip(&abs.frames) {
            cum_ttc += t.outcome.state_tx;
            cum_abs += a.outcome.state_tx;
            assert!(cum_abs <= cum_ttc, "prefix dominance failed at frame {}", t.index);
        }
    }

    #[test]
    fn synchronous_strategy_rejects_a_half_second_frame() {
        let model = PlantModel::water_network(InputCoupling::Direct);
        let mut policy = TriggerPolicy::defaults(TriggerKind::Psdetc, model.n());
        policy.period = 0.5;
        let err = CoSimulation::new(CoSimSetup::water_network(policy, model));
        assert!(matches!(
            err,
            Err(CoSimError::Mac(MacError::InfeasibleFrame { .. }))
        ));
    }

    #[test]
    fn strategy_and_layout_must_match() {
        let model = PlantModel::water_network(InputCoupling::Direct);
        let policy = TriggerPolicy::defaults(TriggerKind::Psdetc, model.n());
        let schedule =
            build_schedule(Protocol::CTdma, 3, &SlotTimings::default(), 2_000.0).unwrap();
        let err =
            CoSimulation::with_schedule(CoSimSetup::water_network(policy, model), schedule);
        assert!(matches!(
            err,
            Err(CoSimError::Mac(MacError::PolicyProtocolMismatch { .. }))
        ));
    }

    #[test]
    fn transmissions_respect_guard_windows_under_loss() {
        for kind in [TriggerKind::Ttc, TriggerKind::Psdetc, TriggerKind::PadetcAbs] {
            let mut s = setup(kind, InputCoupling::Direct);
            s.radio.loss_probability = 0.5;
            s.loss_seed = 3;
            s.noise.sensor_std = 0.0005;
            let mut sim = CoSimulation::new(s).unwrap();
            sim.run_frames(30);
            let trace = sim.into_trace();
            let schedule = build_schedule(
                Protocol::for_trigger(kind),
                3,
                &SlotTimings::default(),
                trace.frame_us as f64 / 1_000.0,
            )
            .unwrap();
            let half = RadioModel::default().per_try_us() / 2;
            for e in &trace.events {
                let offset = e.time_us % trace.frame_us;
                let slot = schedule
                    .slots
                    .iter()
                    .find(|s| {
                        s.node == e.node && offset >= s.start_us && offset < s.end_us()
                    })
                    .unwrap_or_else(|| panic!("event at {} outside any slot", e.time_us));
                assert!(
                    offset + half <= slot.tx_deadline_us(),
                    "{kind:?}: transmission runs into the guard"
                );
            }
        }
    }

    #[test]
    fn filling_run_converges_and_switches_to_the_weak_pump() {
        let mut sim = CoSimulation::new(setup(TriggerKind::Ttc, InputCoupling::Direct)).unwrap();
        sim.run_frames(110);
        assert_eq!(sim.automaton().mode, Mode::WeakPump);
        assert_eq!(sim.automaton().switch_count, 1);
        for (j, x) in sim.xi().iter().enumerate() {
            assert!(x.abs() <= 0.005, "tank {j} still {x} m away at the end");
        }
    }

    #[test]
    fn dropped_command_keeps_the_old_valve_position() {
        let mut s = setup(TriggerKind::Ttc, InputCoupling::Direct);
        s.radio.loss_probability = 0.85;
        s.loss_seed = 42;
        let mut sim = CoSimulation::new(s).unwrap();
        sim.run_frames(40);
        // Deliveries and losses both happened; valves only ever move on a
        // delivered command.
        let lost = sim.events.iter().any(|e| e.outcome == TxOutcome::Lost);
        let delivered = sim.events.iter().any(|e| e.outcome == TxOutcome::Delivered);
        assert!(lost && delivered);
        for j in 0..3 {
            assert_eq!(sim.nodes[j].command, sim.plant.commands[j]);
        }
    }
}
