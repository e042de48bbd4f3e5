//! Closed-form model of the all-photonic (APE) chain: logical measurement
//! probabilities of the tree-encoded repeater graph state, its generation
//! schedule, memory-qubit accounting, rate, and the logical-error fidelity.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::params::{total_loss_ape, ApeParams, ChainTopology, RgsParams};
use crate::state::{compose_pauli_errors, PauliErrorRates};

/// Photonic BSM on two leaves: both must survive, then linear optics succeeds
/// half the time.
pub fn p_bsm_photonic(mu: f64) -> f64 {
    (1.0 - mu) * (1.0 - mu) / 2.0
}

/// `(R0, R1)`: probability of at least one complete level-1 subtree, and of
/// at least one surviving child of a level-1 photon.
pub fn indirect_probs(mu: f64, b0: u32, b1: u32) -> (f64, f64) {
    let s0 = (1.0 - mu).powi(b1 as i32 + 1);
    let r0 = 1.0 - (1.0 - s0).powi(b0 as i32);
    let r1 = 1.0 - mu.powi(b1 as i32);
    (r0, r1)
}

/// `(P_X, P_Z)` for one encoded core qubit.
pub fn logical_meas_probs(mu: f64, b0: u32, b1: u32) -> (f64, f64) {
    let (r0, r1) = indirect_probs(mu, b0, b1);
    (r0, (1.0 - mu + mu * r1).powi(b0 as i32))
}

/// Every BSM-node needs one successful leaf BSM out of `m`, and every
/// repeater needs two logical X and `2m − 2` logical Z measurements.
pub fn p_rgs(mu: f64, rgs: &RgsParams, n: u32) -> f64 {
    let p = p_bsm_photonic(mu);
    let (px, pz) = logical_meas_probs(mu, rgs.b0, rgs.b1);
    let nodes = (1.0 - (1.0 - p).powi(rgs.m as i32)).powi(n as i32 + 1);
    let per_rgs = px * px * pz.powi(2 * rgs.m as i32 - 2);
    nodes * per_rgs.powi(n as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    /// Photon emission (P gate) from the emitter.
    Emit,
    /// Emitter–ancilla CZ.
    Cz,
    /// Emitter measurement.
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Generation of level-1 subtree `subtree` of the core qubit.
    Core { subtree: u32 },
    /// Leaf photon generation and hand-off to the next branch.
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhotonKind {
    Leaf,
    Level1 { subtree: u32 },
    Level2 { subtree: u32, child: u32 },
}

/// One gate of the RGS generation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSlot {
    pub branch: u32,
    pub phase: Phase,
    pub kind: GateKind,
    pub start_s: f64,
    pub duration_s: f64,
    pub photon: Option<PhotonKind>,
}

impl GateSlot {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    /// Gates during which an emitter Z error propagates into the photons;
    /// the emitter measurement itself is excluded.
    pub fn decoheres(&self) -> bool {
        self.kind != GateKind::Measure
    }
}

/// Gate sequence of one branch. Each level-1 subtree emits its level-1 photon
/// and `b1` children, entangles with the ancilla and is measured out; the leaf
/// phase applies two CZs, emits the leaf and measures the emitter.
pub fn branch_schedule(rgs: &RgsParams, ape: &ApeParams, branch: u32, start_s: f64) -> Vec<GateSlot> {
    let mut slots = Vec::with_capacity((rgs.b0 * (rgs.b1 + 3) + 4) as usize);
    let mut t = start_s;
    let mut push = |phase, kind, duration_s: f64, photon| {
        slots.push(GateSlot {
            branch,
            phase,
            kind,
            start_s: t,
            duration_s,
            photon,
        });
        t += duration_s;
    };
    for subtree in 0..rgs.b0 {
        let phase = Phase::Core { subtree };
        push(
            phase,
            GateKind::Emit,
            ape.t_emit_s,
            Some(PhotonKind::Level1 { subtree }),
        );
        for child in 0..rgs.b1 {
            push(
                phase,
                GateKind::Emit,
                ape.t_emit_s,
                Some(PhotonKind::Level2 { subtree, child }),
            );
        }
        push(phase, GateKind::Cz, ape.t_cz_s, None);
        push(phase, GateKind::Measure, ape.t_meas_s, None);
    }
    push(Phase::Leaf, GateKind::Cz, ape.t_cz_s, None);
    push(Phase::Leaf, GateKind::Cz, ape.t_cz_s, None);
    push(Phase::Leaf, GateKind::Emit, ape.t_emit_s, Some(PhotonKind::Leaf));
    push(Phase::Leaf, GateKind::Measure, ape.t_meas_s, None);
    slots
}

/// Full RGS schedule, branches back to back in index order.
pub fn rgs_schedule(rgs: &RgsParams, ape: &ApeParams) -> Vec<GateSlot> {
    let d = branch_duration(rgs, ape);
    (0..2 * rgs.m)
        .flat_map(|j| branch_schedule(rgs, ape, j, f64::from(j) * d))
        .collect()
}

/// Decoherence window of one vote, `t_c`.
pub fn t_core(rgs: &RgsParams, ape: &ApeParams) -> f64 {
    branch_schedule(rgs, ape, 0, 0.0)
        .iter()
        .filter(|g| g.phase == Phase::Core { subtree: 0 } && g.decoheres())
        .map(|g| g.duration_s)
        .sum()
}

/// Decoherence window of the leaf phase, `t_l`.
pub fn t_leaf(rgs: &RgsParams, ape: &ApeParams) -> f64 {
    branch_schedule(rgs, ape, 0, 0.0)
        .iter()
        .filter(|g| g.phase == Phase::Leaf && g.decoheres())
        .map(|g| g.duration_s)
        .sum()
}

pub fn branch_duration(rgs: &RgsParams, ape: &ApeParams) -> f64 {
    branch_schedule(rgs, ape, 0, 0.0)
        .iter()
        .map(|g| g.duration_s)
        .sum()
}

/// `T_RGS`.
pub fn t_rgs(rgs: &RgsParams, ape: &ApeParams) -> f64 {
    f64::from(2 * rgs.m) * branch_duration(rgs, ape)
}

/// `⌈x⌉` that absorbs float noise in the ratio (`10 / (2e5 · 50e-6)` is 1,
/// not 2) and maps exactly zero to zero.
fn ceil_ratio(num: f64, den: f64) -> u64 {
    if num <= 0.0 {
        return 0;
    }
    let x = num / den;
    (x - x * 1e-12).ceil() as u64
}

/// `MQ_e`: memory qubits each Q-node needs to keep pace with the repeaters.
pub fn mq_e(topo: &ChainTopology, t_rgs_s: f64, m: u32) -> u64 {
    let reach = topo.signal_speed_km_per_s * t_rgs_s;
    let l_seg = topo.segment_length_km();
    let m = u64::from(m);
    m + ceil_ratio(l_seg, reach) * m + ceil_ratio(topo.chain_length_km - l_seg, reach)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApeRateBreakdown {
    pub mu: f64,
    pub p_bsm_photonic: f64,
    pub p_x: f64,
    pub p_z: f64,
    pub r0: f64,
    pub r1: f64,
    pub p_rgs: f64,
    pub t_rgs_s: f64,
    pub mq_e: u64,
    pub egr: f64,
}

pub fn link_loss(params: &ApeParams, topo: &ChainTopology) -> Result<f64> {
    params.validate()?;
    total_loss_ape(params, topo.hop_length_km(), topo)
}

pub fn egr_ape(params: &ApeParams, topo: &ChainTopology, rgs: &RgsParams) -> Result<ApeRateBreakdown> {
    rgs.validate()?;
    let mu = link_loss(params, topo)?;
    Ok(rate_breakdown(mu, params, topo, rgs))
}

pub(crate) fn rate_breakdown(
    mu: f64,
    params: &ApeParams,
    topo: &ChainTopology,
    rgs: &RgsParams,
) -> ApeRateBreakdown {
    let (r0, r1) = indirect_probs(mu, rgs.b0, rgs.b1);
    let (p_x, p_z) = logical_meas_probs(mu, rgs.b0, rgs.b1);
    let p = p_rgs(mu, rgs, topo.n_repeaters);
    let t = t_rgs(rgs, params);
    let mq = mq_e(topo, t, rgs.m);
    ApeRateBreakdown {
        mu,
        p_bsm_photonic: p_bsm_photonic(mu),
        p_x,
        p_z,
        r0,
        r1,
        p_rgs: p,
        t_rgs_s: t,
        mq_e: mq,
        egr: p / (t * mq as f64),
    }
}

/// `(1 − e^{−t/T2}) / 2`.
pub fn p_z(t_s: f64, t2_s: f64) -> f64 {
    -(-t_s / t2_s).exp_m1() / 2.0
}

fn ln_choose(n: u32, k: u32) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| f64::from(i).ln()).sum()
}

/// Binomial coefficient, exact up to `n = 30` and through logarithms above.
pub fn choose(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= 30 {
        let k = k.min(n - k);
        let mut c: u64 = 1;
        for i in 0..k {
            c = c * u64::from(n - i) / u64::from(i + 1);
        }
        c as f64
    } else {
        ln_choose(n, k).exp()
    }
}

fn binom_pmf(n: u32, k: u32, p: f64) -> f64 {
    if n > 30 {
        if p == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if p == 1.0 {
            return if k == n { 1.0 } else { 0.0 };
        }
        let ln = ln_choose(n, k) + f64::from(k) * p.ln() + f64::from(n - k) * (1.0 - p).ln();
        ln.exp()
    } else {
        choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }
}

/// `T0(m')`: probability of exactly `m'` complete votes out of `b0`.
pub fn votes_pmf(b0: u32, s0: f64, votes: u32) -> f64 {
    binom_pmf(b0, votes, s0)
}

/// `ē_{X|m}`: majority vote over `m` votes is wrong (ties count as wrong).
pub fn majority_error(votes: u32, e_vote: f64) -> f64 {
    (votes.div_ceil(2)..=votes)
        .map(|j| binom_pmf(votes, j, e_vote))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApeFidelityBreakdown {
    /// Z-flip probability accumulated by the emitter over one CZ gate.
    pub p_z_gate: f64,
    pub t_core_s: f64,
    pub t_leaf_s: f64,
    pub e_vote: f64,
    pub s0: f64,
    pub e_x_c: f64,
    pub e_x_l: f64,
    pub e_x: f64,
    pub e_z: f64,
    pub rates: PauliErrorRates,
    pub fbar: f64,
    /// `fbar` with end-node memory dephasing over the deterministic
    /// wait-for-outcomes interval folded in.
    pub fbar_with_memory: f64,
}

pub fn fidelity_ape(
    params: &ApeParams,
    topo: &ChainTopology,
    rgs: &RgsParams,
    n: u32,
) -> Result<ApeFidelityBreakdown> {
    rgs.validate()?;
    let topo = topo.with_repeaters(n);
    let mu = link_loss(params, &topo)?;
    fidelity_breakdown(mu, params, &topo, rgs)
}

pub(crate) fn fidelity_breakdown(
    mu: f64,
    params: &ApeParams,
    topo: &ChainTopology,
    rgs: &RgsParams,
) -> Result<ApeFidelityBreakdown> {
    check_probability("mu", mu)?;
    let n = topo.n_repeaters;
    let t2 = params.t2_emitter_s;
    let t_c = t_core(rgs, params);
    let t_l = t_leaf(rgs, params);
    let e_vote = p_z(t_c, t2);
    let s0 = (1.0 - mu).powi(rgs.b1 as i32 + 1);
    let r: f64 = (1..=rgs.b0).map(|v| votes_pmf(rgs.b0, s0, v)).sum();
    if !(r > 0.0) {
        return Err(Error::UndefinedFidelity(format!(
            "no logical X vote can be obtained (mu = {mu})"
        )));
    }
    let e_x_c = (1..=rgs.b0)
        .map(|v| votes_pmf(rgs.b0, s0, v) * majority_error(v, e_vote))
        .sum::<f64>()
        / r;
    let e_x_l = p_z(t_l, t2);
    let e_x = e_x_c + e_x_l;
    let rates = compose_pauli_errors(e_x.min(0.5), n);
    let fbar = rates.fidelity();

    let timeline = ApeTimeline::new(params, topo, rgs);
    let p = p_bsm_photonic(mu);
    let a = (1.0 - 2.0 * e_x.min(0.5)).powi(n as i32);
    let t2m = params.t2_memory_s;
    let fbar_with_memory = if n == 0 {
        let b = (-timeline.memory_wait_q1(1) / t2m).exp();
        ((1.0 + b) / 2.0).powi(2)
    } else {
        let b1 = timeline.selection_average(p, |k| (-timeline.memory_wait_q1(k) / t2m).exp());
        let b2 = timeline.selection_average(p, |k| (-timeline.memory_wait_q2(k) / t2m).exp());
        (1.0 + a * b1) / 2.0 * (1.0 + a * b2) / 2.0
    };

    Ok(ApeFidelityBreakdown {
        p_z_gate: p_z(params.t_cz_s, t2),
        t_core_s: t_c,
        t_leaf_s: t_l,
        e_vote,
        s0,
        e_x_c,
        e_x_l,
        e_x,
        e_z: 0.0,
        rates,
        fbar,
        fbar_with_memory,
    })
}

/// Deterministic timing of one APE iteration, shared by the analytic memory
/// model and the simulator.
///
/// All repeaters start generating at `t = 0`. Branch `j` of an RGS occupies
/// `[j·d, (j+1)·d)`; even `j = 2(k−1)` is the `k`-th left-going branch, odd
/// `j = 2k−1` the `k`-th right-going one. Leaves fly straight to their
/// BSM-node; core photons first pass a delay line of length `T_RGS`, so every
/// core photon arrives after its leaf. Q-node photons are launched to arrive
/// together with the repeater leaf they are paired with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApeTimeline {
    pub n: u32,
    pub m: u32,
    pub branch_duration_s: f64,
    pub t_rgs_s: f64,
    /// Memory node (or repeater) to BSM-node flight time, `L_seg / 2c`.
    pub hop_delay_s: f64,
    pub segment_delay_s: f64,
    /// Leaf emission time within the RGS, per branch index.
    pub leaf_emit_s: Vec<f64>,
    /// Emission time of each branch's last core photon.
    pub last_core_emit_s: Vec<f64>,
}

impl ApeTimeline {
    pub fn new(params: &ApeParams, topo: &ChainTopology, rgs: &RgsParams) -> Self {
        let sched = rgs_schedule(rgs, params);
        let branches = 2 * rgs.m as usize;
        let mut leaf = vec![0.0_f64; branches];
        let mut last_core = vec![0.0_f64; branches];
        for g in &sched {
            match g.photon {
                Some(PhotonKind::Leaf) => leaf[g.branch as usize] = g.end_s(),
                Some(_) => {
                    let slot = &mut last_core[g.branch as usize];
                    *slot = slot.max(g.end_s());
                }
                None => {}
            }
        }
        ApeTimeline {
            n: topo.n_repeaters,
            m: rgs.m,
            branch_duration_s: branch_duration(rgs, params),
            t_rgs_s: t_rgs(rgs, params),
            hop_delay_s: topo.delay_s(topo.hop_length_km()),
            segment_delay_s: topo.delay_s(topo.segment_length_km()),
            leaf_emit_s: leaf,
            last_core_emit_s: last_core,
        }
    }

    /// Branch index of the `k`-th (1-based) left- or right-going branch.
    pub fn branch_index(k: u32, right: bool) -> usize {
        2 * (k as usize - 1) + usize::from(right)
    }

    pub fn leaf_arrival_s(&self, branch: usize) -> f64 {
        self.leaf_emit_s[branch] + self.hop_delay_s
    }

    pub fn core_arrival_s(&self, emit_s: f64) -> f64 {
        emit_s + self.t_rgs_s + self.hop_delay_s
    }

    /// Time of BSM `k` at BSM-node `node` (1-based, `1..=n+1`): the later of
    /// the two leaves.
    pub fn bsm_time_s(&self, node: u32, k: u32) -> f64 {
        let left = Self::branch_index(k, false);
        let right = Self::branch_index(k, true);
        if self.n == 0 {
            // Two Q-nodes, paced like left-going leaves.
            self.leaf_arrival_s(left)
        } else if node == 1 {
            self.leaf_arrival_s(left)
        } else {
            // Right-going leaf of the left repeater is the later one.
            self.leaf_arrival_s(right)
        }
    }

    /// Creation time of Q1's `k`-th memory qubit.
    pub fn q1_create_s(&self, k: u32) -> f64 {
        self.bsm_time_s(1, k) - self.hop_delay_s
    }

    pub fn q2_create_s(&self, k: u32) -> f64 {
        self.bsm_time_s(self.n + 1, k) - self.hop_delay_s
    }

    /// When BSM-node `node` holds every outcome it must announce. With no
    /// repeaters the node announces right after the selected BSM `k`.
    pub fn node_done_s(&self, node: u32, k_selected: u32) -> f64 {
        if self.n == 0 {
            return self.bsm_time_s(node, k_selected);
        }
        let last_left = Self::branch_index(self.m, false);
        let last_right = Self::branch_index(self.m, true);
        let branch = if node == 1 { last_left } else { last_right };
        let done = self.core_arrival_s(self.last_core_emit_s[branch]);
        // The leaf BSMs always precede the cores; kept explicit for clarity of
        // the bound.
        done.max(self.bsm_time_s(node, self.m))
    }

    /// Light time from BSM-node `node` to Q1 / Q2.
    pub fn to_q1_s(&self, node: u32) -> f64 {
        f64::from(node - 1) * self.segment_delay_s + self.hop_delay_s
    }

    pub fn to_q2_s(&self, node: u32) -> f64 {
        f64::from(self.n + 1 - node) * self.segment_delay_s + self.hop_delay_s
    }

    /// Time when Q1 (Q2) holds all announcements, for `n ≥ 1`.
    fn ready_s(&self, to_end: impl Fn(u32) -> f64) -> f64 {
        (1..=self.n + 1)
            .map(|i| self.node_done_s(i, 1) + to_end(i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Storage time of Q1's memory qubit when BSM `k` at node 1 was selected.
    pub fn memory_wait_q1(&self, k: u32) -> f64 {
        if self.n == 0 {
            return self.node_done_s(1, k) + self.to_q1_s(1) - self.q1_create_s(k);
        }
        self.ready_s(|i| self.to_q1_s(i)) - self.q1_create_s(k)
    }

    pub fn memory_wait_q2(&self, k: u32) -> f64 {
        if self.n == 0 {
            return self.node_done_s(1, k) + self.to_q2_s(1) - self.q2_create_s(k);
        }
        self.ready_s(|i| self.to_q2_s(i)) - self.q2_create_s(k)
    }

    /// `E[f(k*)]` where `k*` is the first successful of `m` BSMs, each
    /// succeeding with probability `p`, given at least one succeeds.
    pub fn selection_average(&self, p: f64, f: impl Fn(u32) -> f64) -> f64 {
        let norm = 1.0 - (1.0 - p).powi(self.m as i32);
        (1..=self.m)
            .map(|k| (1.0 - p).powi(k as i32 - 1) * p * f(k))
            .sum::<f64>()
            / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indirect_limits() {
        assert_eq!(indirect_probs(0.0, 6, 3), (1.0, 1.0));
        assert_eq!(indirect_probs(1.0, 6, 3), (0.0, 0.0));
        let (_, pz) = logical_meas_probs(0.3, 1, 1);
        assert!((pz - (1.0 - 0.09)).abs() < 1e-15);
    }

    #[test]
    fn p_rgs_examples() {
        let rgs = RgsParams::new(3, 2, 2).unwrap();
        let expect = (1.0 - 0.5f64.powi(3)).powi(2);
        assert!((p_rgs(0.0, &rgs, 1) - expect).abs() < 1e-15);
        let rgs = RgsParams::new(1, 4, 4).unwrap();
        assert!((p_rgs(0.0, &rgs, 2) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zero_durations_give_zero_time() {
        let ape = ApeParams {
            t_cz_s: 0.0,
            t_meas_s: 0.0,
            t_emit_s: 0.0,
            ..Default::default()
        };
        assert_eq!(t_rgs(&RgsParams::default(), &ape), 0.0);
    }

    #[test]
    fn mq_e_examples() {
        let topo = ChainTopology::new(4, 50.0).unwrap();
        assert_eq!(mq_e(&topo, 50e-6, 6), 16);
        let short = ChainTopology::new(1, 1.0).unwrap();
        assert_eq!(mq_e(&short, 1.0, 6), 13);
        let single = ChainTopology::new(0, 1.0).unwrap();
        assert_eq!(mq_e(&single, 1.0, 6), 12);
    }

    #[test]
    fn majority_small_cases() {
        let e: f64 = 0.1;
        assert!((majority_error(3, e) - 0.028).abs() < 1e-15);
        assert!((majority_error(2, e) - (2.0 * e * (1.0 - e) + e * e)).abs() < 1e-15);
        assert_eq!(majority_error(0, e), 1.0);
    }

    #[test]
    fn binomials_sum_to_one() {
        for &b0 in &[1u32, 6, 25, 31, 60] {
            let s: f64 = (0..=b0).map(|v| votes_pmf(b0, 0.37, v)).sum();
            assert!((s - 1.0).abs() < 1e-12, "b0={b0}");
        }
        assert_eq!(choose(30, 15), 155117520.0);
        assert!((choose(40, 20) / 137846528820.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_emitter_gives_unit_fidelity() {
        let ape = ApeParams {
            t2_emitter_s: f64::INFINITY,
            ..Default::default()
        };
        let topo = ChainTopology::new(4, 50.0).unwrap();
        let f = fidelity_ape(&ape, &topo, &RgsParams::default(), 4).unwrap();
        assert_eq!(f.e_x, 0.0);
        assert_eq!(f.fbar, 1.0);
        assert!(f.fbar_with_memory < 1.0);
    }

    #[test]
    fn total_loss_has_no_fidelity() {
        let ape = ApeParams {
            eta_qfc: 0.0,
            ..Default::default()
        };
        let topo = ChainTopology::new(2, 50.0).unwrap();
        let err = fidelity_ape(&ape, &topo, &RgsParams::default(), 2).unwrap_err();
        assert!(matches!(err, Error::UndefinedFidelity(_)));
    }

    #[test]
    fn leaves_precede_cores() {
        let ape = ApeParams::default();
        let rgs = RgsParams::new(2, 3, 2).unwrap();
        let topo = ChainTopology::new(2, 30.0).unwrap();
        let tl = ApeTimeline::new(&ape, &topo, &rgs);
        for j in 0..4 {
            assert!(tl.core_arrival_s(0.0 + j as f64 * tl.branch_duration_s) > tl.leaf_arrival_s(j));
        }
    }
}
