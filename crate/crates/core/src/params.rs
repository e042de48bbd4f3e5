//! Hardware and topology parameters, and per-hop photon-loss budgets.
//!
//! Efficiencies are stored as transmissions `η` and turned into loss
//! probabilities `μ = 1 − η` only when a [`LossBudget`] is assembled.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_probability, Error, Result};

const LN_10: f64 = std::f64::consts::LN_10;

/// Conversion between dB/km and attenuation length: `α = 10 / (L_att · ln 10)`.
pub fn db_per_km_from_attenuation_length(l_att_km: f64) -> f64 {
    10.0 / (l_att_km * LN_10)
}

pub fn attenuation_length_from_db_per_km(alpha_db_per_km: f64) -> f64 {
    10.0 / (alpha_db_per_km * LN_10)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    #[serde(default = "defaults::n_repeaters")]
    n_repeaters: u32,
    #[serde(default = "defaults::chain_length_km")]
    chain_length_km: f64,
    #[serde(default = "defaults::signal_speed")]
    signal_speed_km_per_s: f64,
    #[serde(default)]
    attenuation_length_km: Option<f64>,
    #[serde(default)]
    attenuation_db_per_km: Option<f64>,
}

/// A linear chain `Q1 – BSM1 – QR1 – … – QRn – BSM(n+1) – Q2` with evenly
/// spaced nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology")]
pub struct ChainTopology {
    pub n_repeaters: u32,
    pub chain_length_km: f64,
    pub signal_speed_km_per_s: f64,
    pub attenuation_length_km: f64,
    pub attenuation_db_per_km: f64,
}

impl TryFrom<RawTopology> for ChainTopology {
    type Error = Error;

    fn try_from(raw: RawTopology) -> Result<Self> {
        let (l_att, alpha) = match (raw.attenuation_length_km, raw.attenuation_db_per_km) {
            (None, None) => {
                let l = defaults::ATTENUATION_LENGTH_KM;
                (l, db_per_km_from_attenuation_length(l))
            }
            (Some(l), None) => {
                check_positive("attenuation_length_km", l)?;
                (l, db_per_km_from_attenuation_length(l))
            }
            (None, Some(a)) => {
                check_positive("attenuation_db_per_km", a)?;
                (attenuation_length_from_db_per_km(a), a)
            }
            (Some(l), Some(a)) => {
                check_positive("attenuation_length_km", l)?;
                check_positive("attenuation_db_per_km", a)?;
                let implied = db_per_km_from_attenuation_length(l);
                if ((implied - a) / a).abs() > 1e-9 {
                    return Err(Error::Parameter {
                        key: "attenuation_db_per_km".into(),
                        reason: format!(
                            "{a} dB/km disagrees with attenuation length {l} km (implies {implied} dB/km)"
                        ),
                    });
                }
                (l, a)
            }
        };
        let topo = ChainTopology {
            n_repeaters: raw.n_repeaters,
            chain_length_km: raw.chain_length_km,
            signal_speed_km_per_s: raw.signal_speed_km_per_s,
            attenuation_length_km: l_att,
            attenuation_db_per_km: alpha,
        };
        topo.validate()?;
        Ok(topo)
    }
}

impl Default for ChainTopology {
    fn default() -> Self {
        Self::new(defaults::n_repeaters(), defaults::chain_length_km()).expect("default topology is valid")
    }
}

impl ChainTopology {
    /// Chain with the default fiber (L_att = 22 km, c = 2·10⁵ km/s).
    pub fn new(n_repeaters: u32, chain_length_km: f64) -> Result<Self> {
        let l = defaults::ATTENUATION_LENGTH_KM;
        let topo = ChainTopology {
            n_repeaters,
            chain_length_km,
            signal_speed_km_per_s: defaults::signal_speed(),
            attenuation_length_km: l,
            attenuation_db_per_km: db_per_km_from_attenuation_length(l),
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("chain_length_km", self.chain_length_km)?;
        check_positive("signal_speed_km_per_s", self.signal_speed_km_per_s)?;
        check_positive("attenuation_length_km", self.attenuation_length_km)?;
        Ok(())
    }

    pub fn with_repeaters(&self, n: u32) -> Self {
        ChainTopology {
            n_repeaters: n,
            ..self.clone()
        }
    }

    pub fn with_length(&self, chain_length_km: f64) -> Result<Self> {
        let t = ChainTopology {
            chain_length_km,
            ..self.clone()
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_db_per_km(&self, alpha: f64) -> Result<Self> {
        check_positive("attenuation_db_per_km", alpha)?;
        Ok(ChainTopology {
            attenuation_db_per_km: alpha,
            attenuation_length_km: attenuation_length_from_db_per_km(alpha),
            ..self.clone()
        })
    }

    /// Number of elementary links, `n + 1`.
    pub fn n_links(&self) -> u32 {
        self.n_repeaters + 1
    }

    /// `L_seg = L_c / (n + 1)`.
    pub fn segment_length_km(&self) -> f64 {
        self.chain_length_km / f64::from(self.n_links())
    }

    /// Distance from a memory node to its neighbouring BSM-node, `L_seg / 2`.
    pub fn hop_length_km(&self) -> f64 {
        self.segment_length_km() / 2.0
    }

    /// Propagation time over `km` of fiber.
    pub fn delay_s(&self, km: f64) -> f64 {
        km / self.signal_speed_km_per_s
    }
}

/// Trapped-ion hardware. Defaults follow the state-of-the-art ⁴⁰Ca⁺ values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrappedIonParams {
    pub f_1q: f64,
    pub f_2q: f64,
    pub tau_coherence_s: f64,
    pub f_em_trap: f64,
    pub eta_qfc: f64,
    pub eta_det: f64,
    pub eta_coll: f64,
    pub t_1q_s: f64,
    pub t_ms_s: f64,
    /// Fluorescence readout after the MS gate.
    pub t_readout_s: f64,
    /// Ion initialisation and Raman excitation, charged once per HEG attempt.
    pub t_init_s: f64,
    pub h_max: u32,
    /// Attempt period; derived from the segment geometry when absent.
    pub t_attempt_s: Option<f64>,
    /// Per-ion MS depolarisation; `1 − f_2q` when absent.
    pub p_ms: Option<f64>,
}

impl Default for TrappedIonParams {
    fn default() -> Self {
        TrappedIonParams {
            f_1q: 0.9999,
            f_2q: 0.999,
            tau_coherence_s: 60e-3,
            f_em_trap: 0.96,
            eta_qfc: 0.3,
            eta_det: 0.75,
            eta_coll: 0.69,
            t_1q_s: 5e-6,
            t_ms_s: 107e-6,
            t_readout_s: 5e-6,
            t_init_s: 20e-6,
            h_max: 90,
            t_attempt_s: None,
            p_ms: None,
        }
    }
}

impl TrappedIonParams {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("f_1q", self.f_1q),
            ("f_2q", self.f_2q),
            ("f_em_trap", self.f_em_trap),
            ("eta_qfc", self.eta_qfc),
            ("eta_det", self.eta_det),
            ("eta_coll", self.eta_coll),
        ] {
            check_probability(k, v)?;
        }
        if let Some(p) = self.p_ms {
            check_probability("p_ms", p)?;
        }
        check_positive("tau_coherence_s", self.tau_coherence_s)?;
        check_positive("t_1q_s", self.t_1q_s)?;
        check_positive("t_ms_s", self.t_ms_s)?;
        if self.t_readout_s < 0.0 {
            return Err(Error::Parameter {
                key: "t_readout_s".into(),
                reason: "must be >= 0".into(),
            });
        }
        if self.t_init_s < 0.0 {
            return Err(Error::Parameter {
                key: "t_init_s".into(),
                reason: "must be >= 0".into(),
            });
        }
        if let Some(t) = self.t_attempt_s {
            check_positive("t_attempt_s", t)?;
        }
        if self.h_max < 1 {
            return Err(Error::Parameter {
                key: "h_max".into(),
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// MS-gate depolarisation probability per ion.
    pub fn p_ms(&self) -> f64 {
        self.p_ms.unwrap_or(1.0 - self.f_2q)
    }

    /// Depolarisation applied by a single-qubit Pauli correction.
    pub fn p_1q(&self) -> f64 {
        1.0 - self.f_1q
    }

    /// Werner weight of the ion–photon pair, `w_em = 1 − 4/3 (1 − F)`.
    pub fn w_em(&self) -> f64 {
        1.0 - 4.0 / 3.0 * (1.0 - self.f_em_trap)
    }

    pub fn w_ms(&self) -> f64 {
        1.0 - self.p_ms()
    }

    /// One HEG attempt: photon flight to the BSM-node plus the herald back
    /// (`L_seg / c` in total) after the ion is initialised and excited.
    pub fn t_attempt(&self, topo: &ChainTopology) -> f64 {
        self.t_attempt_s
            .unwrap_or_else(|| self.t_init_s + topo.delay_s(topo.segment_length_km()))
    }

    /// Herald travel from the BSM-node plus one single-qubit correction.
    pub fn t_corr(&self, topo: &ChainTopology) -> f64 {
        topo.delay_s(topo.hop_length_km()) + self.t_1q_s
    }

    /// MS gate, readout, notification of the farther end node and the final
    /// Pauli correction there.
    pub fn t_dbsm(&self, topo: &ChainTopology) -> f64 {
        let farthest_km = topo.chain_length_km - topo.segment_length_km();
        self.t_ms_s + self.t_readout_s + topo.delay_s(farthest_km) + self.t_1q_s
    }

    pub fn loss_budget(&self, hop_length_km: f64, topo: &ChainTopology) -> Result<LossBudget> {
        Ok(LossBudget {
            mu_coll: 1.0 - self.eta_coll,
            mu_qfc: 1.0 - self.eta_qfc,
            mu_ch: channel_loss(hop_length_km, topo)?,
            mu_d: 1.0 - self.eta_det,
            mu_delay: 0.0,
        })
    }
}

/// All-photonic (emitter-generated RGS) hardware.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApeParams {
    pub t_cz_s: f64,
    pub t_meas_s: f64,
    /// Duration of one photon emission (P gate).
    pub t_emit_s: f64,
    pub t2_emitter_s: f64,
    pub t2_memory_s: f64,
    pub eta_qfc: f64,
    pub eta_det: f64,
    pub eta_coll: f64,
    pub p_single_mode: f64,
    /// Transmission of the core-photon delay lines.
    pub eta_delay: f64,
}

impl Default for ApeParams {
    fn default() -> Self {
        ApeParams {
            t_cz_s: 100e-9,
            t_meas_s: 20e-9,
            t_emit_s: 5e-9,
            t2_emitter_s: 3e-6,
            t2_memory_s: 20e-3,
            eta_qfc: 0.95,
            eta_det: 1.0,
            eta_coll: 1.0,
            p_single_mode: 0.997,
            eta_delay: 1.0,
        }
    }
}

impl ApeParams {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("eta_qfc", self.eta_qfc),
            ("eta_det", self.eta_det),
            ("eta_coll", self.eta_coll),
            ("p_single_mode", self.p_single_mode),
            ("eta_delay", self.eta_delay),
        ] {
            check_probability(k, v)?;
        }
        for (k, v) in [
            ("t_cz_s", self.t_cz_s),
            ("t_meas_s", self.t_meas_s),
            ("t_emit_s", self.t_emit_s),
            ("t2_emitter_s", self.t2_emitter_s),
            ("t2_memory_s", self.t2_memory_s),
        ] {
            check_positive(k, v)?;
        }
        Ok(())
    }

    /// Single-mode emission gates whether a usable photon enters the fiber,
    /// so it is folded into the collection stage.
    pub fn loss_budget(&self, hop_length_km: f64, topo: &ChainTopology) -> Result<LossBudget> {
        Ok(LossBudget {
            mu_coll: 1.0 - self.eta_coll * self.p_single_mode,
            mu_qfc: 1.0 - self.eta_qfc,
            mu_ch: channel_loss(hop_length_km, topo)?,
            mu_d: 1.0 - self.eta_det,
            mu_delay: 1.0 - self.eta_delay,
        })
    }
}

/// Repeater graph state shape: `2m` branches, depth-2 trees with branching
/// `b0` then `b1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgsParams {
    pub m: u32,
    pub b0: u32,
    pub b1: u32,
}

impl Default for RgsParams {
    fn default() -> Self {
        RgsParams { m: 6, b0: 6, b1: 3 }
    }
}

impl RgsParams {
    pub fn new(m: u32, b0: u32, b1: u32) -> Result<Self> {
        let r = RgsParams { m, b0, b1 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, v) in [("m", self.m), ("b0", self.b0), ("b1", self.b1)] {
            if v < 1 {
                return Err(Error::Parameter {
                    key: k.into(),
                    reason: "must be >= 1".into(),
                });
            }
        }
        Ok(())
    }

    /// Photons per branch: one leaf, `b0` level-1 and `b0·b1` level-2 photons.
    pub fn photons_per_branch(&self) -> u64 {
        1 + u64::from(self.b0) * (1 + u64::from(self.b1))
    }

    pub fn photon_count(&self) -> u64 {
        2 * u64::from(self.m) * self.photons_per_branch()
    }
}

impl std::fmt::Display for RgsParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.m, self.b0, self.b1)
    }
}

impl std::str::FromStr for RgsParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .split(',')
            .map(str::trim)
            .collect();
        let bad = || Error::Argument(format!("cannot parse RGS `{s}`, expected m,b0,b1"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut v = [0u32; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        RgsParams::new(v[0], v[1], v[2])
    }
}

/// Loss probabilities of each stage between a memory node and a BSM-node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub mu_coll: f64,
    pub mu_qfc: f64,
    pub mu_ch: f64,
    pub mu_d: f64,
    pub mu_delay: f64,
}

impl LossBudget {
    pub fn stages(&self) -> [f64; 5] {
        [self.mu_coll, self.mu_qfc, self.mu_delay, self.mu_ch, self.mu_d]
    }

    /// `μ = 1 − Π (1 − μ_x)`.
    pub fn total(&self) -> f64 {
        1.0 - self.stages().iter().map(|mu| 1.0 - mu).product::<f64>()
    }
}

/// Fiber loss `1 − exp(−L / L_att)`.
pub fn channel_loss(length_km: f64, topo: &ChainTopology) -> Result<f64> {
    if !(length_km >= 0.0) {
        return Err(Error::Domain(format!(
            "fiber length must be >= 0, got {length_km}"
        )));
    }
    Ok(-(-length_km / topo.attenuation_length_km).exp_m1())
}

pub fn total_loss_1g(params: &TrappedIonParams, hop_length_km: f64, topo: &ChainTopology) -> Result<f64> {
    Ok(params.loss_budget(hop_length_km, topo)?.total())
}

pub fn total_loss_ape(params: &ApeParams, hop_length_km: f64, topo: &ChainTopology) -> Result<f64> {
    Ok(params.loss_budget(hop_length_km, topo)?.total())
}

pub fn photon_count(rgs: &RgsParams) -> u64 {
    rgs.photon_count()
}

pub(crate) mod defaults {
    pub const ATTENUATION_LENGTH_KM: f64 = 22.0;

    pub fn n_repeaters() -> u32 {
        1
    }
    pub fn chain_length_km() -> f64 {
        50.0
    }
    pub fn signal_speed() -> f64 {
        2.0e5
    }
}
