//! The three-parameter pair-state family closed under ion-trap Bell-state
//! measurement, plus Pauli error-rate composition for photonic chains.
//!
//! A state `(w, λ, φ)` stands for
//! `ρ = I/4 + (w/4)[λ cosφ (XX − YY) + λ sinφ (XY + YX) + λ² ZZ]`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPairState {
    pub w: f64,
    pub lam: f64,
    pub phi: f64,
}

impl CorrelatedPairState {
    pub const BELL: CorrelatedPairState = CorrelatedPairState {
        w: 1.0,
        lam: 1.0,
        phi: 0.0,
    };

    /// Applies a single-qubit depolarising channel of strength `p` to either
    /// qubit. All correlators shrink by `1 − p`.
    pub fn depolarize_one(self, p: f64) -> Self {
        CorrelatedPairState {
            w: self.w * (1.0 - p),
            ..self
        }
    }
}

/// Ion–ion pair after a heralded photonic BSM, with accumulated dephasing
/// angles on both ions.
pub fn heg_state(w_em: f64, theta_i: f64, theta_j: f64) -> CorrelatedPairState {
    CorrelatedPairState {
        w: w_em * w_em,
        lam: 1.0,
        phi: theta_i + theta_j,
    }
}

/// Deterministic BSM (MS gate + two Z readouts) joining two pairs. Only the
/// `(0, 0)` outcome branch is represented; other outcomes differ by a known
/// Pauli frame.
pub fn compose_dbsm(left: CorrelatedPairState, right: CorrelatedPairState, w_ms: f64) -> CorrelatedPairState {
    CorrelatedPairState {
        w: left.w * right.w,
        lam: w_ms * left.lam * right.lam,
        phi: left.phi + right.phi - FRAC_PI_2,
    }
}

/// End-to-end state of an `n`-repeater chain given the `2n + 2` per-ion
/// dephasing angles.
pub fn chain_state(n: usize, w_em: f64, w_ms: f64, thetas: &[f64]) -> Result<CorrelatedPairState> {
    if thetas.len() != 2 * n + 2 {
        return Err(Error::Argument(format!(
            "chain of {n} repeaters needs {} angles, got {}",
            2 * n + 2,
            thetas.len()
        )));
    }
    let k = (2 * n + 2) as i32;
    Ok(CorrelatedPairState {
        w: w_em.powi(k),
        lam: w_ms.powi(n as i32),
        phi: thetas.iter().sum::<f64>() - n as f64 * FRAC_PI_2,
    })
}

/// Overlap with the target Bell state after the frame correction, where `n`
/// is the number of swaps that produced `state`.
pub fn fidelity(state: &CorrelatedPairState, n: usize) -> f64 {
    let theta = state.phi + n as f64 * FRAC_PI_2;
    let wl = state.w * state.lam;
    0.25 + wl * state.lam / 4.0 + wl / 2.0 * theta.cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PauliErrorRates {
    pub e_x: f64,
    pub e_y: f64,
    pub e_z: f64,
}

impl PauliErrorRates {
    /// Net error for independent X and Z flips given their biases
    /// `a = 1 − 2·P(flip)`.
    pub fn from_flip_biases(a_x: f64, a_z: f64) -> Self {
        let (nx, fx) = ((1.0 + a_x) / 2.0, (1.0 - a_x) / 2.0);
        let (nz, fz) = ((1.0 + a_z) / 2.0, (1.0 - a_z) / 2.0);
        PauliErrorRates {
            e_x: fx * nz,
            e_y: fx * fz,
            e_z: nx * fz,
        }
    }

    pub fn fidelity(&self) -> f64 {
        1.0 - self.e_x - self.e_y - self.e_z
    }
}

/// Net Pauli error on the end-to-end pair of an `n`-repeater photonic chain
/// when every repeater's logical X measurement flips with probability `e`.
/// Flips at odd positions act as X on the pair, at even positions as Z;
/// pairs of equal flips cancel.
pub fn compose_pauli_errors(e_flip_per_round: f64, n: u32) -> PauliErrorRates {
    debug_assert!((0.0..=0.5).contains(&e_flip_per_round));
    let a = (1.0 - 2.0 * e_flip_per_round).powi(n as i32);
    let (ok, bad) = ((1.0 + a) / 2.0, (1.0 - a) / 2.0);
    PauliErrorRates {
        e_x: ok * bad,
        e_y: bad * bad,
        e_z: ok * bad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn heg_examples() {
        assert_eq!(heg_state(1.0, 0.0, 0.0), CorrelatedPairState::BELL);
        let s = heg_state(1.0, FRAC_PI_4, -FRAC_PI_4);
        assert_eq!(s.phi, 0.0);
    }

    #[test]
    fn dbsm_phase_offset() {
        let a = CorrelatedPairState::BELL;
        let b = CorrelatedPairState { phi: FRAC_PI_2, ..a };
        assert_eq!(compose_dbsm(a, b, 1.0), CorrelatedPairState::BELL);
    }

    #[test]
    fn chain_examples() {
        let s = chain_state(1, 1.0, 1.0, &[0.0; 4]).unwrap();
        assert_eq!(s.w, 1.0);
        assert_eq!(s.lam, 1.0);
        assert!((s.phi + FRAC_PI_2).abs() < 1e-15);
        assert!((fidelity(&s, 1) - 1.0).abs() < 1e-15);
        assert_eq!(
            chain_state(0, 0.9, 0.8, &[0.1, 0.2]).unwrap(),
            heg_state(0.9, 0.1, 0.2)
        );
        assert!(chain_state(2, 1.0, 1.0, &[0.0; 5]).is_err());
    }

    #[test]
    fn fidelity_limits() {
        let mixed = CorrelatedPairState {
            w: 0.0,
            lam: 1.0,
            phi: 0.3,
        };
        assert_eq!(fidelity(&mixed, 2), 0.25);
        let s = CorrelatedPairState {
            w: 0.7,
            lam: 0.9,
            phi: 0.4,
        };
        let shifted = CorrelatedPairState {
            phi: 0.4 + 2.0 * PI,
            ..s
        };
        assert!((fidelity(&s, 0) - fidelity(&shifted, 0)).abs() < 1e-14);
        let mirrored = CorrelatedPairState { phi: -0.4, ..s };
        assert!((fidelity(&s, 0) - fidelity(&mirrored, 0)).abs() < 1e-15);
    }

    #[test]
    fn pauli_composition_examples() {
        let r = compose_pauli_errors(0.0, 5);
        assert_eq!(r.fidelity(), 1.0);
        let r = compose_pauli_errors(0.1, 1);
        assert!((r.e_x - 0.09).abs() < 1e-15);
        assert!((r.e_z - 0.09).abs() < 1e-15);
        assert!((r.e_y - 0.01).abs() < 1e-15);
        assert!((r.fidelity() - 0.81).abs() < 1e-15);
        let r = compose_pauli_errors(0.5, 3);
        assert_eq!((r.e_x, r.e_y, r.e_z), (0.25, 0.25, 0.25));
        // n = 0: a lone end-to-end pair, nothing to flip.
        assert_eq!(compose_pauli_errors(0.3, 0).fidelity(), 1.0);
    }
}
