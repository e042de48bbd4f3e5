//! Protocol-level Monte Carlo of the all-photonic chain.
//!
//! Node ids: Q1 is `0`, repeaters `1..=n`, Q2 is `n + 1`, BSM-node `i`
//! (between memory node `i − 1` and `i`) is `n + 1 + i`.
//!
//! Errors are tracked as flags rather than stabilizer states: a Z error on the
//! emitter while a level-1 subtree is generated flips that subtree's vote; an
//! error during the leaf phase flips the whole branch's logical X outcome.
//! Logical Z outcomes are never affected.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{secs_to_ps, Channel, ChannelKind, Engine, NodeId, RngStreams, TimePs};
use crate::error::{Error, Result};
use crate::params::{ApeParams, ChainTopology, RgsParams};
use crate::stats::{Accumulator, ApeSweepResult, Outcome, PauliFrame, TrialRecord};
use crate::theory_ape::{
    link_loss, mq_e, p_z, rgs_schedule, ApeTimeline, GateKind, GateSlot, Phase, PhotonKind,
};

pub const DEFAULT_TARGET_SUCCESSES: u64 = 3000;
pub const DEFAULT_MAX_ITERATIONS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonSlot {
    /// Branch index `0..2m`.
    pub branch: u32,
    pub kind: PhotonKind,
    pub emit_s: f64,
    pub arrival_s: f64,
    pub direction: Direction,
}

/// Deterministic photon and gate schedule of one RGS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgsPhotonPlan {
    pub rgs: RgsParams,
    pub photons: Vec<PhotonSlot>,
    pub gates: Vec<GateSlot>,
    /// Z-flip probability of each gate (0 for measurements).
    pub gate_p_z: Vec<f64>,
    /// `gates[branch_gates[j]]` are the gates of branch `j`.
    branch_gates: Vec<std::ops::Range<usize>>,
}

impl RgsPhotonPlan {
    pub fn new(rgs: &RgsParams, ape: &ApeParams, timeline: &ApeTimeline) -> Self {
        let gates = rgs_schedule(rgs, ape);
        let gate_p_z = gates
            .iter()
            .map(|g| {
                if g.decoheres() {
                    p_z(g.duration_s, ape.t2_emitter_s)
                } else {
                    0.0
                }
            })
            .collect();
        let mut photons = Vec::with_capacity(rgs.photon_count() as usize / 2);
        let mut branch_gates = vec![0..0; 2 * rgs.m as usize];
        for (idx, g) in gates.iter().enumerate() {
            let r = &mut branch_gates[g.branch as usize];
            if r.start == r.end {
                *r = idx..idx + 1;
            } else {
                r.end = idx + 1;
            }
            if let Some(kind) = g.photon {
                let emit_s = g.end_s();
                let arrival_s = match kind {
                    PhotonKind::Leaf => emit_s + timeline.hop_delay_s,
                    _ => timeline.core_arrival_s(emit_s),
                };
                photons.push(PhotonSlot {
                    branch: g.branch,
                    kind,
                    emit_s,
                    arrival_s,
                    direction: if g.branch % 2 == 0 {
                        Direction::Left
                    } else {
                        Direction::Right
                    },
                });
            }
        }
        RgsPhotonPlan {
            rgs: *rgs,
            photons,
            gates,
            gate_p_z,
            branch_gates,
        }
    }

    /// Every leaf reaches its BSM-node before any core photon of its branch.
    pub fn leaves_first(&self) -> bool {
        (0..2 * self.rgs.m).all(|b| {
            let mine = self.photons.iter().filter(|p| p.branch == b);
            let leaf = mine
                .clone()
                .find(|p| p.kind == PhotonKind::Leaf)
                .map(|p| p.arrival_s);
            match leaf {
                Some(t) => mine
                    .filter(|p| p.kind != PhotonKind::Leaf)
                    .all(|p| p.arrival_s > t),
                None => false,
            }
        })
    }

    pub fn branch_gates(&self, branch: u32) -> &[GateSlot] {
        &self.gates[self.branch_gates[branch as usize].clone()]
    }
}

/// Error flags of one branch.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BranchErrors {
    pub vote_flips: Vec<bool>,
    pub leaf_flip: bool,
}

impl BranchErrors {
    pub fn is_clean(&self) -> bool {
        !self.leaf_flip && !self.vote_flips.iter().any(|&f| f)
    }
}

/// Folds per-gate emitter Z errors of `branch` into vote and leaf flips.
pub fn branch_errors_from_gates(
    plan: &RgsPhotonPlan,
    branch: u32,
    mut gate_error: impl FnMut(usize, &GateSlot) -> bool,
) -> BranchErrors {
    let mut e = BranchErrors {
        vote_flips: vec![false; plan.rgs.b0 as usize],
        leaf_flip: false,
    };
    let range = plan.branch_gates[branch as usize].clone();
    for idx in range {
        let g = &plan.gates[idx];
        if !g.decoheres() || !gate_error(idx, g) {
            continue;
        }
        match g.phase {
            Phase::Core { subtree } => e.vote_flips[subtree as usize] ^= true,
            Phase::Leaf => e.leaf_flip ^= true,
        }
    }
    e
}

pub fn sample_branch_errors<R: Rng + ?Sized>(plan: &RgsPhotonPlan, branch: u32, rng: &mut R) -> BranchErrors {
    branch_errors_from_gates(plan, branch, |idx, _| {
        let p = plan.gate_p_z[idx];
        p > 0.0 && rng.gen_bool(p)
    })
}

/// Samples emitter errors for every branch of one RGS.
pub fn generate_rgs_trial<R: Rng + ?Sized>(plan: &RgsPhotonPlan, rng: &mut R) -> Vec<BranchErrors> {
    (0..2 * plan.rgs.m)
        .map(|b| sample_branch_errors(plan, b, rng))
        .collect()
}

/// Core photons of one branch as received: `level1[s]`, `level2[s][c]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreReception {
    pub level1: Vec<bool>,
    pub level2: Vec<Vec<bool>>,
}

impl CoreReception {
    pub fn sample<R: Rng + ?Sized>(rgs: &RgsParams, survive: f64, rng: &mut R) -> Self {
        let mut level1 = Vec::with_capacity(rgs.b0 as usize);
        let mut level2 = Vec::with_capacity(rgs.b0 as usize);
        for _ in 0..rgs.b0 {
            level1.push(rng.gen_bool(survive));
            level2.push((0..rgs.b1).map(|_| rng.gen_bool(survive)).collect());
        }
        CoreReception { level1, level2 }
    }

    /// A vote needs the level-1 photon and all its children.
    pub fn votes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.level1.len()).filter(|&s| self.level1[s] && self.level2[s].iter().all(|&c| c))
    }

    /// Every level-1 photon is read directly or through one of its children.
    pub fn z_measurable(&self) -> bool {
        (0..self.level1.len()).all(|s| self.level1[s] || self.level2[s].iter().any(|&c| c))
    }
}

/// Logical X readout of a branch: `None` if no vote is complete, otherwise
/// whether the decoded outcome is flipped. Ties decode wrongly.
pub fn logical_x_flip(rx: &CoreReception, err: &BranchErrors) -> Option<bool> {
    let mut votes = 0usize;
    let mut flipped = 0usize;
    for s in rx.votes() {
        votes += 1;
        flipped += usize::from(err.vote_flips[s]);
    }
    if votes == 0 {
        return None;
    }
    Some((2 * flipped >= votes) ^ err.leaf_flip)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone)]
enum Msg {
    Leaf { node: u32, k: u32 },
    Core { node: u32, side: Side, k: u32 },
    NodeDone { node: u32 },
    Report,
}

/// What happened in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ApeTrial {
    pub success: bool,
    pub duration_ps: TimePs,
    /// Selected BSM per BSM-node (1-based `k`), `None` if none succeeded.
    pub selected: Vec<Option<u32>>,
    /// Logical X flips of the left- and right-going measured cores of each repeater.
    pub x_flips: Vec<(bool, bool)>,
    pub memory_flips: (bool, bool),
    pub memory_waits_ps: (TimePs, TimePs),
}

/// Residual Pauli on the end pair. Flips on left-going cores and on Q1's
/// memory act on one stabilizer, flips on right-going cores and Q2's memory
/// on the other.
pub fn resolve_frame_and_fidelity(trial: &ApeTrial) -> Result<(PauliFrame, f64)> {
    if !trial.success {
        return Err(Error::Logic("frame requested for a failed iteration".into()));
    }
    let mut frame = PauliFrame {
        x: trial.memory_flips.0,
        z: trial.memory_flips.1,
    };
    for &(l, r) in &trial.x_flips {
        frame.x ^= l;
        frame.z ^= r;
    }
    let f = if frame.is_identity() { 1.0 } else { 0.0 };
    Ok((frame, f))
}

#[derive(Debug, Clone, Default)]
struct NodeState {
    arrived: Vec<u8>,
    survived: Vec<bool>,
    selected: Option<u32>,
    done: bool,
}

pub struct SimApe<R = ChaCha8Rng> {
    params: ApeParams,
    topo: ChainTopology,
    rgs: RgsParams,
    mu: f64,
    timeline: ApeTimeline,
    plan: RgsPhotonPlan,
    rngs: Vec<R>,
    /// Leaf arrival offset and last-core arrival offset per branch, in ps.
    leaf_ps: Vec<TimePs>,
    core_ps: Vec<TimePs>,
    to_q1: Vec<Channel>,
    to_q2: Vec<Channel>,
    t_rgs_s: f64,
    mq_e: u64,
}

impl SimApe<ChaCha8Rng> {
    pub fn new(params: &ApeParams, topo: &ChainTopology, rgs: &RgsParams, seed: u64) -> Result<Self> {
        let streams = RngStreams::new(seed);
        let rngs = (0..2 * topo.n_repeaters + 3).map(|id| streams.node(id)).collect();
        Self::with_rngs(params, topo, rgs, rngs)
    }
}

impl<R: Rng> SimApe<R> {
    pub fn with_rngs(
        params: &ApeParams,
        topo: &ChainTopology,
        rgs: &RgsParams,
        rngs: Vec<R>,
    ) -> Result<Self> {
        rgs.validate()?;
        let mu = link_loss(params, topo)?;
        let n = topo.n_repeaters;
        if rngs.len() != 2 * n as usize + 3 {
            return Err(Error::Argument(format!(
                "need {} random streams, got {}",
                2 * n + 3,
                rngs.len()
            )));
        }
        let timeline = ApeTimeline::new(params, topo, rgs);
        let plan = RgsPhotonPlan::new(rgs, params, &timeline);
        let leaf_ps = (0..2 * rgs.m as usize)
            .map(|j| secs_to_ps(timeline.leaf_arrival_s(j)))
            .collect();
        let core_ps = timeline
            .last_core_emit_s
            .iter()
            .map(|&e| secs_to_ps(timeline.core_arrival_s(e)))
            .collect();
        let c = topo.signal_speed_km_per_s;
        let seg = topo.segment_length_km();
        let mut to_q1 = Vec::new();
        let mut to_q2 = Vec::new();
        for i in 1..=n + 1 {
            let bsm = n + 1 + i;
            let d1 = f64::from(i - 1) * seg + seg / 2.0;
            let d2 = f64::from(n + 1 - i) * seg + seg / 2.0;
            to_q1.push(Channel::new(bsm, 0, d1, c, ChannelKind::Classical));
            to_q2.push(Channel::new(bsm, n + 1, d2, c, ChannelKind::Classical));
        }
        let t_rgs_s = timeline.t_rgs_s;
        Ok(SimApe {
            params: params.clone(),
            topo: topo.clone(),
            rgs: *rgs,
            mu,
            mq_e: mq_e(topo, t_rgs_s, rgs.m),
            timeline,
            plan,
            rngs,
            leaf_ps,
            core_ps,
            to_q1,
            to_q2,
            t_rgs_s,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn plan(&self) -> &RgsPhotonPlan {
        &self.plan
    }

    pub fn timeline(&self) -> &ApeTimeline {
        &self.timeline
    }

    fn n(&self) -> u32 {
        self.topo.n_repeaters
    }

    fn bsm_id(&self, node: u32) -> NodeId {
        self.n() + 1 + node
    }

    /// Leaf arrival of pair `k` from `side` of BSM-node `node`.
    fn leaf_time(&self, node: u32, side: Side, k: u32) -> TimePs {
        let n = self.n();
        let left_branch = ApeTimeline::branch_index(k, false);
        let right_branch = ApeTimeline::branch_index(k, true);
        match (side, node) {
            // Q-node photons are timed to meet the repeater leaf.
            _ if n == 0 => self.leaf_ps[left_branch],
            (Side::Left, 1) => self.leaf_ps[left_branch],
            (Side::Right, i) if i == n + 1 => self.leaf_ps[right_branch],
            (Side::Left, _) => self.leaf_ps[right_branch],
            (Side::Right, _) => self.leaf_ps[left_branch],
        }
    }

    pub fn run_iteration(&mut self) -> Result<ApeTrial> {
        let n = self.n();
        let m = self.rgs.m;
        let survive = 1.0 - self.mu;
        let mut eng: Engine<Msg> = Engine::new();
        let mut nodes: Vec<NodeState> = (0..=n + 1)
            .map(|_| NodeState {
                arrived: vec![0; m as usize + 1],
                survived: vec![true; m as usize + 1],
                ..Default::default()
            })
            .collect();
        let mut x_flips = vec![(false, false); n as usize];
        let mut failed = false;
        let mut reports = [0u32; 2];
        let mut ready_ps = [0 as TimePs; 2];

        for node in 1..=n + 1 {
            let id = self.bsm_id(node);
            for k in 1..=m {
                for side in [Side::Left, Side::Right] {
                    eng.schedule(self.leaf_time(node, side, k), id, Msg::Leaf { node, k })?;
                }
            }
            if n > 0 {
                for k in 1..=m {
                    // Cores of the left repeater travel right and vice versa.
                    if node > 1 {
                        let b = ApeTimeline::branch_index(k, true);
                        eng.schedule(
                            self.core_ps[b],
                            id,
                            Msg::Core {
                                node,
                                side: Side::Left,
                                k,
                            },
                        )?;
                    }
                    if node <= n {
                        let b = ApeTimeline::branch_index(k, false);
                        eng.schedule(
                            self.core_ps[b],
                            id,
                            Msg::Core {
                                node,
                                side: Side::Right,
                                k,
                            },
                        )?;
                    }
                }
                eng.schedule(
                    secs_to_ps(self.timeline.node_done_s(node, 1)),
                    id,
                    Msg::NodeDone { node },
                )?;
            }
        }

        while let Some(ev) = eng.pop() {
            let now = eng.now();
            let target = ev.target as usize;
            match ev.payload {
                Msg::Leaf { node, k } => {
                    let st = &mut nodes[node as usize];
                    let rng = &mut self.rngs[target];
                    st.arrived[k as usize] += 1;
                    st.survived[k as usize] &= rng.gen_bool(survive);
                    if st.arrived[k as usize] == 2 {
                        let ok = st.survived[k as usize] && rng.gen_bool(0.5);
                        if ok && st.selected.is_none() {
                            st.selected = Some(k);
                            if n == 0 {
                                eng.schedule(now, ev.target, Msg::NodeDone { node })?;
                            }
                        }
                        if k == m && st.selected.is_none() {
                            failed = true;
                        }
                    }
                }
                Msg::Core { node, side, k } => {
                    let selected = nodes[node as usize].selected;
                    let rx = CoreReception::sample(&self.rgs, survive, &mut self.rngs[target]);
                    if selected == Some(k) {
                        // The repeater feeding this side is node − 1 (left) or node (right).
                        let (rep, right_going) = match side {
                            Side::Left => (node - 1, true),
                            Side::Right => (node, false),
                        };
                        let branch = ApeTimeline::branch_index(k, right_going) as u32;
                        let err = sample_branch_errors(&self.plan, branch, &mut self.rngs[rep as usize]);
                        match logical_x_flip(&rx, &err) {
                            None => failed = true,
                            Some(flip) => {
                                let slot = &mut x_flips[rep as usize - 1];
                                if right_going {
                                    slot.1 = flip;
                                } else {
                                    slot.0 = flip;
                                }
                            }
                        }
                    } else if !rx.z_measurable() {
                        failed = true;
                    }
                }
                Msg::NodeDone { node } => {
                    nodes[node as usize].done = true;
                    let i = node as usize - 1;
                    eng.send(&self.to_q1[i].clone(), Msg::Report)?;
                    eng.send(&self.to_q2[i].clone(), Msg::Report)?;
                }
                Msg::Report => {
                    let end = usize::from(ev.target != 0);
                    reports[end] += 1;
                    if reports[end] == n + 1 {
                        ready_ps[end] = now;
                    }
                }
            }
            if failed {
                break;
            }
        }

        let selected: Vec<Option<u32>> = (1..=n + 1).map(|i| nodes[i as usize].selected).collect();
        let success = !failed && selected.iter().all(Option::is_some) && reports.iter().all(|&r| r == n + 1);
        let mut trial = ApeTrial {
            success,
            duration_ps: eng.now(),
            selected,
            x_flips,
            memory_flips: (false, false),
            memory_waits_ps: (0, 0),
        };
        if success {
            let k1 = trial.selected[0].expect("checked");
            let k2 = trial.selected[n as usize].expect("checked");
            let c1 = secs_to_ps(self.timeline.q1_create_s(k1));
            let c2 = secs_to_ps(self.timeline.q2_create_s(k2));
            let w1 = ready_ps[0] - c1;
            let w2 = ready_ps[1] - c2;
            let t2 = self.params.t2_memory_s;
            let f1 = self.rngs[0].gen_bool(p_z(crate::engine::ps_to_secs(w1), t2));
            let f2 = self.rngs[n as usize + 1].gen_bool(p_z(crate::engine::ps_to_secs(w2), t2));
            trial.memory_flips = (f1, f2);
            trial.memory_waits_ps = (w1, w2);
        }
        Ok(trial)
    }

    /// Runs until `target_successes` or `max_iterations`, whichever first.
    pub fn run<F>(&mut self, target_successes: u64, max_iterations: u64, mut on_trial: F) -> Result<ApeRun>
    where
        F: FnMut(u64, &ApeTrial, Option<(PauliFrame, f64)>),
    {
        if max_iterations == 0 {
            return Err(Error::Argument("iteration budget must be >= 1".into()));
        }
        let mut acc = Accumulator::default();
        let mut i = 0;
        while acc.successes < target_successes && i < max_iterations {
            let trial = self.run_iteration()?;
            let resolved = if trial.success {
                Some(resolve_frame_and_fidelity(&trial)?)
            } else {
                None
            };
            acc.push(trial.success, 0.0, resolved.map(|r| r.1));
            on_trial(i, &trial, resolved);
            i += 1;
        }
        Ok(ApeRun {
            acc,
            censored: acc.successes < target_successes,
            t_rgs_s: self.t_rgs_s,
            mq_e: self.mq_e,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApeRun {
    pub acc: Accumulator,
    pub censored: bool,
    pub t_rgs_s: f64,
    pub mq_e: u64,
}

impl ApeRun {
    /// `P_succ / (T_RGS · MQ_e)`.
    pub fn egr(&self) -> f64 {
        self.acc.success_fraction() / (self.t_rgs_s * self.mq_e as f64)
    }

    pub fn egr_sem(&self) -> f64 {
        self.acc.success_fraction_sem() / (self.t_rgs_s * self.mq_e as f64)
    }
}

pub fn trial_record(iteration: u64, trial: &ApeTrial, resolved: Option<(PauliFrame, f64)>) -> TrialRecord {
    TrialRecord {
        iteration,
        outcome: if trial.success {
            Outcome::Success
        } else {
            Outcome::Failure
        },
        duration_ps: trial.duration_ps,
        fidelity: resolved.map(|r| r.1),
        frame: resolved.map(|r| r.0).unwrap_or_default(),
    }
}

pub fn estimate_ape(
    params: &ApeParams,
    topo: &ChainTopology,
    rgs: &RgsParams,
    target_successes: u64,
    max_iterations: u64,
    seed: u64,
) -> Result<ApeSweepResult> {
    estimate_ape_with_log(params, topo, rgs, target_successes, max_iterations, seed, |_| {})
}

pub fn estimate_ape_with_log<F>(
    params: &ApeParams,
    topo: &ChainTopology,
    rgs: &RgsParams,
    target_successes: u64,
    max_iterations: u64,
    seed: u64,
    mut log: F,
) -> Result<ApeSweepResult>
where
    F: FnMut(TrialRecord),
{
    let mut sim = SimApe::new(params, topo, rgs, seed)?;
    let run = sim.run(target_successes, max_iterations, |i, t, r| {
        log(trial_record(i, t, r))
    })?;
    Ok(ApeSweepResult {
        distance_km: topo.chain_length_km,
        n: topo.n_repeaters,
        m: rgs.m,
        b0: rgs.b0,
        b1: rgs.b1,
        egr_hz: run.egr(),
        success_prob: run.acc.success_fraction(),
        fidelity: run.acc.fidelity_mean(),
        fidelity_sem: run.acc.fidelity_sem(),
        iterations: run.acc.trials,
        censored_flag: run.censored,
        seed,
        success_prob_sem: run.acc.success_fraction_sem(),
        egr_sem: run.egr_sem(),
        successes: run.acc.successes,
    })
}

/// Gate kinds that can inject an emitter error.
pub fn decohering_kinds() -> [GateKind; 2] {
    [GateKind::Emit, GateKind::Cz]
}
