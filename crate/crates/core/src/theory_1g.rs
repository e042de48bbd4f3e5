//! Closed-form rate and fidelity of the trapped-ion (1G) chain under the
//! two-step parallel HEG schedule.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::params::{ChainTopology, TrappedIonParams};

/// Probability that one HEG attempt heralds success: both photons survive and
/// the linear-optics BSM succeeds.
pub fn p_bsm(mu: f64) -> f64 {
    (1.0 - mu) * (1.0 - mu) / 2.0
}

/// `P(h)`: first success at attempt `h`.
pub fn attempt_pmf(mu: f64, h: u32) -> Result<f64> {
    if h == 0 {
        return Err(Error::Domain("attempt index starts at 1".into()));
    }
    check_probability("mu", mu)?;
    let p = p_bsm(mu);
    Ok((1.0 - p).powi(h as i32 - 1) * p)
}

/// `F(h) = P(success within h attempts)`.
pub fn attempt_cdf(mu: f64, h: u32) -> f64 {
    cdf(p_bsm(mu), h)
}

fn cdf(p: f64, h: u32) -> f64 {
    1.0 - (1.0 - p).powi(h as i32)
}

/// `P_HEG1/2`: every one of `k_links` parallel sessions succeeds within `h_max`.
pub fn step_success_prob(mu: f64, h_max: u32, k_links: u32) -> f64 {
    attempt_cdf(mu, h_max).powi(k_links as i32)
}

/// `Σ_h h·P(max = h)` over `k_links` sessions, restricted to all succeeding.
pub fn expected_max_attempts(mu: f64, h_max: u32, k_links: u32) -> f64 {
    expected_max(p_bsm(mu), h_max, k_links)
}

fn expected_max(p: f64, h_max: u32, k_links: u32) -> f64 {
    if k_links == 0 {
        return 0.0;
    }
    let k = k_links as i32;
    let mut prev = 0.0;
    let mut acc = 0.0;
    for h in 1..=h_max {
        let cur = cdf(p, h).powi(k);
        acc += f64::from(h) * (cur - prev);
        prev = cur;
    }
    acc
}

/// Links `1..=n+1` split into the odd-indexed (first step) and even-indexed
/// (second step) sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoStepSchedule {
    pub odd_links: Vec<u32>,
    pub even_links: Vec<u32>,
}

impl TwoStepSchedule {
    pub fn new(n_repeaters: u32) -> Self {
        let (odd, even): (Vec<u32>, Vec<u32>) = (1..=n_repeaters + 1).partition(|i| i % 2 == 1);
        TwoStepSchedule {
            odd_links: odd,
            even_links: even,
        }
    }

    pub fn n_odd(&self) -> u32 {
        self.odd_links.len() as u32
    }

    pub fn n_even(&self) -> u32 {
        self.even_links.len() as u32
    }
}

/// Durations that enter the cycle-time expression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing1g {
    pub t_attempt: f64,
    pub t_corr: f64,
    pub t_dbsm: f64,
}

impl Timing1g {
    pub fn from_params(params: &TrappedIonParams, topo: &ChainTopology) -> Self {
        Timing1g {
            t_attempt: params.t_attempt(topo),
            t_corr: params.t_corr(topo),
            t_dbsm: params.t_dbsm(topo),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTimeBreakdown {
    pub t_success_term: f64,
    pub t_fail_step1_term: f64,
    pub t_fail_step2_term: f64,
    pub t_exp_total: f64,
    pub p_heg1: f64,
    pub p_heg2: f64,
    pub p_suc: f64,
}

impl CycleTimeBreakdown {
    pub fn egr(&self) -> f64 {
        self.p_suc / self.t_exp_total
    }
}

/// Per-link loss of the 1G chain.
pub fn link_loss(params: &TrappedIonParams, topo: &ChainTopology) -> Result<f64> {
    params.validate()?;
    crate::params::total_loss_1g(params, topo.hop_length_km(), topo)
}

/// Expected cycle time for raw inputs. `n = 0` is a single HEG link followed
/// by one correction and no DBSM.
pub fn cycle_time(mu: f64, h_max: u32, n_repeaters: u32, timing: &Timing1g) -> CycleTimeBreakdown {
    cycle_time_for_pbsm(p_bsm(mu), h_max, n_repeaters, timing)
}

/// Same as [`cycle_time`] with the per-attempt success probability given directly.
pub fn cycle_time_for_pbsm(p: f64, h_max: u32, n_repeaters: u32, timing: &Timing1g) -> CycleTimeBreakdown {
    let sched = TwoStepSchedule::new(n_repeaters);
    let Timing1g {
        t_attempt: t,
        t_corr,
        t_dbsm,
    } = *timing;
    let hm = f64::from(h_max);
    let p_o = cdf(p, h_max).powi(sched.n_odd() as i32);
    let e_o = expected_max(p, h_max, sched.n_odd());
    if n_repeaters == 0 {
        let success = t * e_o + t_corr * p_o;
        let fail1 = (1.0 - p_o) * t * hm;
        return CycleTimeBreakdown {
            t_success_term: success,
            t_fail_step1_term: fail1,
            t_fail_step2_term: 0.0,
            t_exp_total: success + fail1,
            p_heg1: p_o,
            p_heg2: 1.0,
            p_suc: p_o,
        };
    }
    let p_e = cdf(p, h_max).powi(sched.n_even() as i32);
    let e_e = expected_max(p, h_max, sched.n_even());
    let success = t * (e_o * p_e + p_o * e_e) + (2.0 * t_corr + t_dbsm) * p_o * p_e;
    let fail1 = (1.0 - p_o) * t * hm;
    let fail2 = (1.0 - p_e) * (t * (e_o + hm * p_o) + t_corr * p_o);
    CycleTimeBreakdown {
        t_success_term: success,
        t_fail_step1_term: fail1,
        t_fail_step2_term: fail2,
        t_exp_total: success + fail1 + fail2,
        p_heg1: p_o,
        p_heg2: p_e,
        p_suc: p_o * p_e,
    }
}

pub fn expected_cycle_time(params: &TrappedIonParams, topo: &ChainTopology) -> Result<CycleTimeBreakdown> {
    let mu = link_loss(params, topo)?;
    let timing = Timing1g::from_params(params, topo);
    Ok(cycle_time(mu, params.h_max, topo.n_repeaters, &timing))
}

pub fn egr_1g(params: &TrappedIonParams, topo: &ChainTopology) -> Result<f64> {
    Ok(expected_cycle_time(params, topo)?.egr())
}

/// Hop-by-hop control: links are established one after another from Q1
/// towards Q2, each followed by a correction; all repeaters swap at the end.
pub fn cycle_time_hop_by_hop(mu: f64, h_max: u32, n_repeaters: u32, timing: &Timing1g) -> CycleTimeBreakdown {
    let links = n_repeaters + 1;
    let q = attempt_cdf(mu, h_max);
    let mean_h_ok = expected_max_attempts(mu, h_max, 1);
    let hm = f64::from(h_max);
    let per_link_ok = timing.t_attempt * mean_h_ok + timing.t_corr * q;
    let mut fail = 0.0;
    for k in 1..=links {
        // Links before k succeeded (time spent on them), link k exhausts h_max.
        let spent = if k == 1 {
            0.0
        } else {
            per_link_ok * f64::from(k - 1) * q.powi(k as i32 - 2)
        };
        fail += (1.0 - q) * (spent + q.powi(k as i32 - 1) * timing.t_attempt * hm);
    }
    let p_suc = q.powi(links as i32);
    let dbsm = if n_repeaters == 0 { 0.0 } else { timing.t_dbsm };
    let success = per_link_ok * f64::from(links) * q.powi(links as i32 - 1) + dbsm * p_suc;
    CycleTimeBreakdown {
        t_success_term: success,
        t_fail_step1_term: fail,
        t_fail_step2_term: 0.0,
        t_exp_total: success + fail,
        p_heg1: p_suc,
        p_heg2: 1.0,
        p_suc,
    }
}

/// How per-ion storage times are obtained for the fidelity estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub enum WaitModel {
    #[default]
    /// Exact average over the joint distribution of attempt counts,
    /// conditioned on the cycle succeeding.
    Exact,
    /// Step-1 ions wait `E[M_E | ok]·T_attempt + T_DBSM`, step-2 ions `T_DBSM`.
    ExpectedSchedule,
    /// Fixed waits, one per ion in chain order (`2n + 2` entries).
    PerIon(Vec<f64>),
}

/// Fidelity factors that do not depend on dephasing: `F = 1/4 + x + y·E[cos θ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityCoefficients {
    pub x: f64,
    pub y: f64,
}

/// Includes the two end-node Pauli corrections as single-qubit depolarising
/// channels.
pub fn fidelity_coefficients(params: &TrappedIonParams, n: u32) -> FidelityCoefficients {
    let w = params.w_em().powi(2 * n as i32 + 2) * (1.0 - params.p_1q()).powi(2);
    let lam = params.w_ms().powi(n as i32);
    FidelityCoefficients {
        x: w * lam * lam / 4.0,
        y: w * lam / 2.0,
    }
}

/// `E[cos θ_tot]` for independent Gaussian phases with `σ_i = 2Δt_i/τ`.
pub fn dephasing_factor(waits_s: &[f64], tau_s: f64) -> f64 {
    let s: f64 = waits_s.iter().map(|dt| dt * dt).sum();
    (-2.0 * s / (tau_s * tau_s)).exp()
}

pub fn expected_fidelity_1g(
    params: &TrappedIonParams,
    topo: &ChainTopology,
    wait_model: &WaitModel,
) -> Result<f64> {
    if !(params.tau_coherence_s > 0.0) {
        return Err(Error::Domain("coherence time must be > 0".into()));
    }
    let mu = link_loss(params, topo)?;
    let timing = Timing1g::from_params(params, topo);
    let n = topo.n_repeaters;
    let coef = fidelity_coefficients(params, n);
    let tau = params.tau_coherence_s;
    let factor = match wait_model {
        WaitModel::PerIon(waits) => {
            if waits.len() != 2 * n as usize + 2 {
                return Err(Error::Argument(format!(
                    "expected {} waits, got {}",
                    2 * n + 2,
                    waits.len()
                )));
            }
            dephasing_factor(waits, tau)
        }
        WaitModel::ExpectedSchedule => {
            let waits = expected_schedule_waits(mu, params.h_max, n, &timing);
            dephasing_factor(&waits, tau)
        }
        WaitModel::Exact => exact_dephasing_factor(mu, params.h_max, n, &timing, tau)?,
    };
    Ok(0.25 + coef.x + coef.y * factor)
}

/// Approximate per-ion waits in chain order (ion 0 at Q1, ion 2n+1 at Q2).
pub fn expected_schedule_waits(mu: f64, h_max: u32, n: u32, timing: &Timing1g) -> Vec<f64> {
    let sched = TwoStepSchedule::new(n);
    let p_e = step_success_prob(mu, h_max, sched.n_even());
    let m_e = if sched.n_even() == 0 {
        0.0
    } else {
        expected_max_attempts(mu, h_max, sched.n_even()) / p_e
    };
    let step1 = m_e * timing.t_attempt + timing.t_dbsm;
    let step2 = timing.t_dbsm;
    (0..2 * n + 2)
        .map(|ion| {
            let link = ion / 2 + 1;
            if n == 0 {
                timing.t_corr
            } else if link % 2 == 1 {
                step1
            } else {
                step2
            }
        })
        .collect()
}

/// `E[exp(−2ΣΔt²/τ²) | success]` under the two-step timeline:
/// odd link `i` heralds at `h_i·T`; step 2 starts `T_corr` after the slowest
/// odd link; the DBSMs start `T_corr` after the slowest even link and the
/// end nodes are corrected `T_DBSM` later.
///
/// Conditioning on the two step maxima `a`, `b` makes the per-link factors
/// independent, so `E[Π g_i ; max = a] = Π A_i(a) − Π B_i(a)` with `A`/`B`
/// the partial sums up to `a` and `a − 1`.
fn exact_dephasing_factor(mu: f64, h_max: u32, n: u32, timing: &Timing1g, tau: f64) -> Result<f64> {
    let Timing1g {
        t_attempt: t,
        t_corr,
        t_dbsm,
    } = *timing;
    let c = 2.0 / (tau * tau);
    let hm = h_max as usize;
    let pmf: Vec<f64> = (1..=h_max).map(|h| attempt_pmf(mu, h)).collect::<Result<_>>()?;
    let p_suc = cycle_time(mu, h_max, n, timing).p_suc;
    if p_suc <= 0.0 {
        return Err(Error::UndefinedFidelity(
            "no cycle can succeed with these parameters".into(),
        ));
    }
    if n == 0 {
        return Ok((-c * 2.0 * t_corr * t_corr).exp());
    }

    let sched = TwoStepSchedule::new(n);
    let last = n + 1;
    // Number of end-node ions on a link.
    let ends = |link: u32| u32::from(link == 1) + u32::from(link == last);

    // Partial sums Σ_{h ≤ cap} P(h)·exp(−c·Σ_ions Δt²) for one link, where
    // Δt = base − h·T for repeater ions and base + T_DBSM − h·T for end ions.
    let link_sum = |base: f64, link: u32, cap: usize| -> f64 {
        let e = ends(link);
        let r = 2 - e;
        (0..cap)
            .map(|k| {
                let h = (k + 1) as f64;
                let d_rep = base - h * t;
                let d_end = d_rep + t_dbsm;
                let q = f64::from(r) * d_rep * d_rep + f64::from(e) * d_end * d_end;
                pmf[k] * (-c * q).exp()
            })
            .sum()
    };

    let mut even_term = vec![0.0; hm + 1];
    for b in 1..=hm {
        // Even links: herald at S1 + T_corr + h·T, DBSM at S1 + 2T_corr + b·T.
        let base = b as f64 * t + t_corr;
        if sched.even_links.is_empty() {
            even_term[b] = if b == 1 { 1.0 } else { 0.0 };
            continue;
        }
        let (mut pa, mut pb) = (1.0, 1.0);
        for &l in &sched.even_links {
            pa *= link_sum(base, l, b);
            pb *= link_sum(base, l, b - 1);
        }
        even_term[b] = pa - pb;
    }

    let mut total = 0.0;
    for a in 1..=hm {
        for b in 1..=hm {
            if even_term[b] == 0.0 {
                continue;
            }
            let m_e = if sched.even_links.is_empty() {
                0.0
            } else {
                b as f64
            };
            // Odd links: DBSM at a·T + T_corr + m_e·T + T_corr.
            let base = a as f64 * t + 2.0 * t_corr + m_e * t;
            let (mut pa, mut pb) = (1.0, 1.0);
            for &l in &sched.odd_links {
                pa *= link_sum(base, l, a);
                pb *= link_sum(base, l, a - 1);
            }
            total += (pa - pb) * even_term[b];
        }
    }
    Ok(total / p_suc)
}
