//! Exhaustive RGS shape search under a photon budget, and the direct
//! transmission baseline it is compared against.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ApeParams, ChainTopology, RgsParams};
use crate::theory_ape::{link_loss, rate_breakdown};

/// Smallest possible RGS, `(1, 1, 1)`.
pub const MIN_BUDGET: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub rgs: RgsParams,
    pub photons: u64,
    pub egr: f64,
}

/// Total order used to pick the optimum: higher rate, then fewer photons,
/// then the lexicographically smallest `(m, b0, b1)`. `Greater` means better.
pub fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    a.egr
        .total_cmp(&b.egr)
        .then_with(|| b.photons.cmp(&a.photons))
        .then_with(|| b.rgs.cmp(&a.rgs))
}

/// Every `(m, b0, b1)` whose photon count fits the budget, in lexicographic order.
pub fn feasible_shapes(budget: u64) -> Vec<RgsParams> {
    let mut out = Vec::new();
    for m in 1..=(budget / MIN_BUDGET) as u32 {
        let per_branch = budget / (2 * u64::from(m));
        // 1 + b0(1 + b1) ≤ per_branch with b1 ≥ 1.
        let max_b0 = per_branch.saturating_sub(1) / 2;
        for b0 in 1..=max_b0 as u32 {
            let max_b1 = (per_branch - 1) / u64::from(b0) - 1;
            for b1 in 1..=max_b1 as u32 {
                out.push(RgsParams { m, b0, b1 });
            }
        }
    }
    out
}

pub fn evaluate(params: &ApeParams, topo: &ChainTopology, mu: f64, rgs: RgsParams) -> Candidate {
    Candidate {
        rgs,
        photons: rgs.photon_count(),
        egr: rate_breakdown(mu, params, topo, &rgs).egr,
    }
}

/// Best shape for an `n`-repeater chain.
pub fn optimize_rgs(
    params: &ApeParams,
    topo: &ChainTopology,
    photon_budget: u64,
    n: u32,
) -> Result<Candidate> {
    if photon_budget < MIN_BUDGET {
        return Err(Error::EmptySearch(format!(
            "photon budget {photon_budget} is below the smallest RGS ({MIN_BUDGET} photons)"
        )));
    }
    let topo = topo.with_repeaters(n);
    let mu = link_loss(params, &topo)?;
    feasible_shapes(photon_budget)
        .into_par_iter()
        .map(|rgs| evaluate(params, &topo, mu, rgs))
        .max_by(rank)
        .ok_or_else(|| Error::EmptySearch("no feasible RGS".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierEntry {
    pub n: u32,
    pub best: Candidate,
    pub baseline_egr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: RgsParams,
    pub egr: f64,
    pub frontier: Vec<FrontierEntry>,
    pub baseline_egr: f64,
    /// Smallest `n` whose optimum beats the baseline.
    pub crossover_n: Option<u32>,
}

/// Optimum for each repeater count in `ns`; `best` is the overall winner.
pub fn optimize_frontier(
    params: &ApeParams,
    topo: &ChainTopology,
    photon_budget: u64,
    ns: &[u32],
) -> Result<OptimizationResult> {
    if ns.is_empty() {
        return Err(Error::Argument("no repeater counts to optimise".into()));
    }
    let baseline = repeaterless_rate(params, topo);
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let mut frontier = Vec::with_capacity(ns.len());
    for &n in &ns {
        frontier.push(FrontierEntry {
            n,
            best: optimize_rgs(params, topo, photon_budget, n)?,
            baseline_egr: baseline,
        });
    }
    let crossover_n = frontier.iter().find(|e| e.best.egr > baseline).map(|e| e.n);
    let top = frontier
        .iter()
        .map(|e| e.best)
        .max_by(rank)
        .expect("frontier is non-empty");
    Ok(OptimizationResult {
        best: top.rgs,
        egr: top.egr,
        frontier,
        baseline_egr: baseline,
        crossover_n,
    })
}

/// Direct transmission: one emitter at Q1 sends a photon entangled with a
/// memory qubit over the whole chain; the memory waits for the herald, so
/// `1 + ⌈L_c / (c·T_base)⌉` memories keep the emitter busy.
pub fn repeaterless_rate(params: &ApeParams, topo: &ChainTopology) -> f64 {
    repeaterless_rate_at(
        params,
        topo.chain_length_km,
        topo.signal_speed_km_per_s,
        topo.attenuation_length_km,
    )
}

pub fn repeaterless_rate_at(
    params: &ApeParams,
    distance_km: f64,
    speed_km_per_s: f64,
    attenuation_length_km: f64,
) -> f64 {
    let p = params.eta_coll
        * params.p_single_mode
        * params.eta_qfc
        * params.eta_det
        * (-distance_km / attenuation_length_km).exp();
    let flight = distance_km / speed_km_per_s;
    let t_base = params.t_emit_s + flight;
    let in_flight = (flight / t_base).ceil();
    p / (t_base * (1.0 + in_flight))
}
