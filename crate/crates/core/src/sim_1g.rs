//! Protocol-level Monte Carlo of the trapped-ion chain.
//!
//! Node ids: memory nodes `0..=n+1` (Q1, QR1..QRn, Q2), BSM-node of link `l`
//! is `n + 1 + l`, the control node is `2n + 3`. Each node draws from its
//! own random stream.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::{ps_to_secs, secs_to_ps, Engine, Event, NodeId, RngStreams, TimePs};
use crate::error::{Error, Result};
use crate::params::{ChainTopology, TrappedIonParams};
use crate::state::{chain_state, fidelity, CorrelatedPairState};
use crate::stats::{Accumulator, Outcome, PauliFrame, SweepResult, TrialRecord};
use crate::theory_1g::{link_loss, p_bsm, TwoStepSchedule};

pub const DEFAULT_ITERATIONS: u64 = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    TwoStep,
    HopByHop,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::TwoStep => "two_step",
            Protocol::HopByHop => "hop_by_hop",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_step" => Ok(Protocol::TwoStep),
            "hop_by_hop" => Ok(Protocol::HopByHop),
            _ => Err(Error::Argument(format!("unknown protocol `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HegState {
    Idle,
    Attempting,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HegSession {
    pub link: u32,
    pub attempts: u32,
    pub state: HegState,
}

impl HegSession {
    pub fn new(link: u32) -> Self {
        HegSession {
            link,
            attempts: 0,
            state: HegState::Idle,
        }
    }

    /// One attempt: two photons must survive, then the BSM succeeds half the
    /// time.
    pub fn attempt<R: Rng + ?Sized>(&mut self, mu: f64, h_max: u32, rng: &mut R) -> HegState {
        debug_assert!(matches!(self.state, HegState::Idle | HegState::Attempting));
        self.attempts += 1;
        let a = rng.gen_bool(1.0 - mu);
        let b = rng.gen_bool(1.0 - mu);
        let ok = a && b && rng.gen_bool(0.5);
        self.state = if ok {
            HegState::Succeeded
        } else if self.attempts >= h_max {
            HegState::Failed
        } else {
            HegState::Attempting
        };
        self.state
    }
}

/// Runs a full HEG session with the given attempt period; returns the session
/// and the elapsed time.
pub fn run_heg<R: Rng + ?Sized>(
    link: u32,
    mu: f64,
    h_max: u32,
    t_attempt_ps: TimePs,
    rng: &mut R,
) -> (HegSession, TimePs) {
    let mut s = HegSession::new(link);
    while matches!(s.state, HegState::Idle | HegState::Attempting) {
        s.attempt(mu, h_max, rng);
    }
    (s, TimePs::from(s.attempts) * t_attempt_ps)
}

/// Emission window of one ion, for checking that the two ions of a repeater
/// never emit at the same time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmissionWindow {
    pub iteration: u64,
    pub node: NodeId,
    /// `false` for ion A (left link), `true` for ion B (right link).
    pub right_ion: bool,
    pub start_ps: TimePs,
    pub end_ps: TimePs,
}

/// Returns the first overlapping pair of windows of one repeater's ions.
pub fn find_emission_overlap(log: &[EmissionWindow]) -> Option<(EmissionWindow, EmissionWindow)> {
    let mut sorted: Vec<&EmissionWindow> = log.iter().collect();
    sorted.sort_by_key(|w| (w.iteration, w.node, w.start_ps));
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.iteration == b.iteration
            && a.node == b.node
            && a.right_ion != b.right_ion
            && b.start_ps < a.end_ps
        {
            return Some((*a, *b));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    pub duration_ps: TimePs,
    /// Attempts used per link (index 0 is link 1); 0 if never started.
    pub attempts: Vec<u32>,
    /// Per-ion storage time, chain order.
    pub waits_ps: Vec<TimePs>,
    pub thetas: Vec<f64>,
    pub state: Option<CorrelatedPairState>,
    pub fidelity: Option<f64>,
    pub frame: PauliFrame,
}

#[derive(Debug, Clone, Copy)]
struct TimingPs {
    attempt: TimePs,
    corr: TimePs,
    dbsm: TimePs,
    emit: TimePs,
}

#[derive(Debug, Clone)]
enum Msg {
    StartStep(u8),
    StartLink(u32),
    Attempt { link: u32 },
    Herald { link: u32, ok: bool },
    Dbsm,
    Done,
}

pub struct Sim1g<R = ChaCha8Rng> {
    params: TrappedIonParams,
    topo: ChainTopology,
    protocol: Protocol,
    mu: f64,
    timing: TimingPs,
    node_rngs: Vec<R>,
    emission_log: Option<Vec<EmissionWindow>>,
    iteration: u64,
}

impl Sim1g<ChaCha8Rng> {
    pub fn new(
        params: &TrappedIonParams,
        topo: &ChainTopology,
        protocol: Protocol,
        seed: u64,
    ) -> Result<Self> {
        let streams = RngStreams::new(seed);
        let nodes = 2 * topo.n_repeaters + 4;
        let rngs = (0..nodes).map(|id| streams.node(id)).collect();
        Self::with_rngs(params, topo, protocol, rngs)
    }
}

impl<R: Rng> Sim1g<R> {
    /// `rngs` holds one generator per node id.
    pub fn with_rngs(
        params: &TrappedIonParams,
        topo: &ChainTopology,
        protocol: Protocol,
        rngs: Vec<R>,
    ) -> Result<Self> {
        let mu = link_loss(params, topo)?;
        let nodes = 2 * topo.n_repeaters as usize + 4;
        if rngs.len() != nodes {
            return Err(Error::Argument(format!(
                "need {nodes} random streams, got {}",
                rngs.len()
            )));
        }
        let timing = TimingPs {
            attempt: secs_to_ps(params.t_attempt(topo)),
            corr: secs_to_ps(params.t_corr(topo)),
            dbsm: secs_to_ps(params.t_dbsm(topo)),
            emit: secs_to_ps(params.t_init_s).max(1),
        };
        Ok(Sim1g {
            params: params.clone(),
            topo: topo.clone(),
            protocol,
            mu,
            timing,
            node_rngs: rngs,
            emission_log: None,
            iteration: 0,
        })
    }

    /// Per-link photon loss used by the simulator.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn p_bsm(&self) -> f64 {
        p_bsm(self.mu)
    }

    pub fn record_emissions(&mut self) {
        self.emission_log = Some(Vec::new());
    }

    pub fn emission_log(&self) -> &[EmissionWindow] {
        self.emission_log.as_deref().unwrap_or(&[])
    }

    fn n(&self) -> u32 {
        self.topo.n_repeaters
    }

    fn bsm_node(&self, link: u32) -> NodeId {
        self.n() + 1 + link
    }

    fn control_node(&self) -> NodeId {
        2 * self.n() + 3
    }

    pub fn run_iteration(&mut self) -> Result<TrialOutcome> {
        let n = self.n();
        let links = n + 1;
        let h_max = self.params.h_max;
        let t = self.timing;
        let schedule = TwoStepSchedule::new(n);
        let mut eng: Engine<Msg> = Engine::new();
        let mut sessions: Vec<HegSession> = (1..=links).map(HegSession::new).collect();
        let mut herald_ps: Vec<Option<TimePs>> = vec![None; links as usize];
        let mut step_start: TimePs = 0;
        let mut finished: Option<(bool, TimePs)> = None;
        let mut dbsm_ps: TimePs = 0;
        let mut frame = PauliFrame::default();

        match self.protocol {
            Protocol::TwoStep => eng.schedule(0, self.control_node(), Msg::StartStep(1))?,
            Protocol::HopByHop => eng.schedule(0, self.control_node(), Msg::StartLink(1))?,
        }

        while finished.is_none() {
            let Some(Event { target, payload, .. }) = eng.pop() else {
                return Err(Error::Starvation {
                    now_ps: eng.now(),
                    diagnostic: format!("1G iteration {} stalled", self.iteration),
                });
            };
            let now = eng.now();
            match payload {
                Msg::StartStep(step) => {
                    step_start = now;
                    let set = if step == 1 {
                        &schedule.odd_links
                    } else {
                        &schedule.even_links
                    };
                    for &l in set {
                        eng.schedule(now, self.bsm_node(l), Msg::Attempt { link: l })?;
                    }
                }
                Msg::StartLink(l) => {
                    step_start = now;
                    eng.schedule(now, self.bsm_node(l), Msg::Attempt { link: l })?;
                }
                Msg::Attempt { link } => {
                    self.log_emissions(link, now);
                    let s = &mut sessions[link as usize - 1];
                    let state = s.attempt(self.mu, h_max, &mut self.node_rngs[target as usize]);
                    let ok = state == HegState::Succeeded;
                    // The herald reaches the memory nodes one attempt period
                    // after the emission.
                    eng.schedule(now + t.attempt, self.control_node(), Msg::Herald { link, ok })?;
                }
                Msg::Herald { link, ok } => {
                    let s = sessions[link as usize - 1];
                    if ok {
                        herald_ps[link as usize - 1] = Some(now);
                        self.after_herald(&mut eng, link, &schedule, &herald_ps)?;
                    } else if s.state == HegState::Failed {
                        // Parallel sessions that started together are all
                        // settled by now.
                        debug_assert_eq!(now, step_start + TimePs::from(h_max) * t.attempt);
                        finished = Some((false, now));
                    } else {
                        eng.schedule(now, self.bsm_node(link), Msg::Attempt { link })?;
                    }
                }
                Msg::Dbsm => {
                    dbsm_ps = now;
                    for qr in 1..=n {
                        let rng = &mut self.node_rngs[qr as usize];
                        let bits: u8 = rng.gen_range(0..4);
                        frame = frame.compose(PauliFrame {
                            x: bits & 1 == 1,
                            z: bits & 2 == 2,
                        });
                    }
                    eng.schedule(now + t.dbsm, self.control_node(), Msg::Done)?;
                }
                Msg::Done => finished = Some((true, now)),
            }
        }

        let (success, end) = finished.expect("loop exits when finished");
        let attempts = sessions.iter().map(|s| s.attempts).collect();
        self.iteration += 1;
        if !success {
            return Ok(TrialOutcome {
                success,
                duration_ps: end,
                attempts,
                waits_ps: Vec::new(),
                thetas: Vec::new(),
                state: None,
                fidelity: None,
                frame,
            });
        }

        // Repeater ions dephase until their DBSM, end-node ions until their
        // final correction.
        let swap_ps = if n == 0 { end } else { dbsm_ps };
        let ions = 2 * links as usize;
        let mut waits_ps = Vec::with_capacity(ions);
        for ion in 0..ions {
            let link = ion / 2;
            let h = herald_ps[link].expect("every link heralded");
            let is_end = ion == 0 || ion == ions - 1;
            waits_ps.push(if is_end { end } else { swap_ps } - h);
        }
        let tau = self.params.tau_coherence_s;
        let mut thetas = Vec::with_capacity(ions);
        for (ion, &w) in waits_ps.iter().enumerate() {
            let sigma = 2.0 * ps_to_secs(w) / tau;
            let node = ion.div_ceil(2);
            thetas.push(if sigma > 0.0 {
                Normal::new(0.0, sigma)
                    .map_err(|e| Error::Logic(e.to_string()))?
                    .sample(&mut self.node_rngs[node])
            } else {
                0.0
            });
        }
        let state = chain_state(n as usize, self.params.w_em(), self.params.w_ms(), &thetas)?
            .depolarize_one(self.params.p_1q())
            .depolarize_one(self.params.p_1q());
        let f = fidelity(&state, n as usize);
        Ok(TrialOutcome {
            success,
            duration_ps: end,
            attempts,
            waits_ps,
            thetas,
            state: Some(state),
            fidelity: Some(f),
            frame,
        })
    }

    fn after_herald(
        &mut self,
        eng: &mut Engine<Msg>,
        link: u32,
        schedule: &TwoStepSchedule,
        herald_ps: &[Option<TimePs>],
    ) -> Result<()> {
        let n = self.n();
        let t = self.timing;
        let now = eng.now();
        let ctrl = self.control_node();
        let finish_links = |eng: &mut Engine<Msg>| -> Result<()> {
            if n == 0 {
                eng.schedule(now + t.corr, ctrl, Msg::Done)
            } else {
                eng.schedule(now + t.corr, ctrl, Msg::Dbsm)
            }
        };
        match self.protocol {
            Protocol::TwoStep => {
                let in_step1 = link % 2 == 1;
                let set = if in_step1 {
                    &schedule.odd_links
                } else {
                    &schedule.even_links
                };
                if set.iter().all(|&l| herald_ps[l as usize - 1].is_some()) {
                    if in_step1 && !schedule.even_links.is_empty() {
                        eng.schedule(now + t.corr, ctrl, Msg::StartStep(2))?;
                    } else {
                        finish_links(eng)?;
                    }
                }
            }
            Protocol::HopByHop => {
                if link == n + 1 {
                    finish_links(eng)?;
                } else {
                    eng.schedule(now + t.corr, ctrl, Msg::StartLink(link + 1))?;
                }
            }
        }
        Ok(())
    }

    fn log_emissions(&mut self, link: u32, start_ps: TimePs) {
        let n = self.n();
        let emit = self.timing.emit;
        let iteration = self.iteration;
        if let Some(log) = self.emission_log.as_mut() {
            // Link l joins node l−1 (its right ion) and node l (its left ion).
            for (node, right_ion) in [(link - 1, true), (link, false)] {
                if node >= 1 && node <= n {
                    log.push(EmissionWindow {
                        iteration,
                        node,
                        right_ion,
                        start_ps,
                        end_ps: start_ps + emit,
                    });
                }
            }
        }
    }

    /// Runs `iterations` cycles, reporting each to `on_trial`.
    pub fn run<F>(&mut self, iterations: u64, mut on_trial: F) -> Result<Accumulator>
    where
        F: FnMut(u64, &TrialOutcome),
    {
        if iterations == 0 {
            return Err(Error::Argument("iterations must be >= 1".into()));
        }
        let mut acc = Accumulator::default();
        for i in 0..iterations {
            let out = self.run_iteration()?;
            acc.push(out.success, ps_to_secs(out.duration_ps), out.fidelity);
            on_trial(i, &out);
        }
        Ok(acc)
    }
}

pub fn trial_record(iteration: u64, out: &TrialOutcome) -> TrialRecord {
    TrialRecord {
        iteration,
        outcome: if out.success {
            Outcome::Success
        } else {
            Outcome::Failure
        },
        duration_ps: out.duration_ps,
        fidelity: out.fidelity,
        frame: out.frame,
    }
}

/// Simulates one chain and summarises it.
pub fn estimate(
    params: &TrappedIonParams,
    topo: &ChainTopology,
    protocol: Protocol,
    iterations: u64,
    seed: u64,
) -> Result<SweepResult> {
    estimate_with_log(params, topo, protocol, iterations, seed, |_| {})
}

pub fn estimate_with_log<F>(
    params: &TrappedIonParams,
    topo: &ChainTopology,
    protocol: Protocol,
    iterations: u64,
    seed: u64,
    mut log: F,
) -> Result<SweepResult>
where
    F: FnMut(TrialRecord),
{
    let mut sim = Sim1g::new(params, topo, protocol, seed)?;
    let acc = sim.run(iterations, |i, out| log(trial_record(i, out)))?;
    Ok(summarize(topo, protocol, seed, &acc))
}

pub fn summarize(topo: &ChainTopology, protocol: Protocol, seed: u64, acc: &Accumulator) -> SweepResult {
    SweepResult {
        distance_km: topo.chain_length_km,
        n: topo.n_repeaters,
        protocol: protocol.as_str().into(),
        egr_hz: acc.rate(),
        fidelity: acc.fidelity_mean(),
        fidelity_sem: acc.fidelity_sem(),
        iterations: acc.trials,
        seed,
        egr_sem: acc.rate_sem(),
        successes: acc.successes,
    }
}

/// Phase left on the pair by a sampled set of angles, after undoing the
/// `−nπ/2` DBSM offset.
pub fn residual_phase(state: &CorrelatedPairState, n: u32) -> f64 {
    state.phi + f64::from(n) * FRAC_PI_2
}
