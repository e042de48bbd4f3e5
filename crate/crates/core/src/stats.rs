//! Trial records and the rate/fidelity estimators built from them.

use serde::{Deserialize, Serialize};

/// Residual Pauli byproduct on the end-to-end pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PauliFrame {
    pub x: bool,
    pub z: bool,
}

impl PauliFrame {
    pub fn is_identity(&self) -> bool {
        !self.x && !self.z
    }

    pub fn compose(self, other: PauliFrame) -> PauliFrame {
        PauliFrame {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

/// One line of the JSONL trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub iteration: u64,
    pub outcome: Outcome,
    pub duration_ps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    pub frame: PauliFrame,
}

/// Running sums for a ratio estimate `Σs / Σt` and a mean over successes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub trials: u64,
    pub successes: u64,
    pub time_s: f64,
    time_sq: f64,
    success_time: f64,
    fid_sum: f64,
    fid_sq: f64,
}

impl Accumulator {
    pub fn push(&mut self, success: bool, duration_s: f64, fidelity: Option<f64>) {
        self.trials += 1;
        self.time_s += duration_s;
        self.time_sq += duration_s * duration_s;
        if success {
            self.successes += 1;
            self.success_time += duration_s;
        }
        if let Some(f) = fidelity {
            self.fid_sum += f;
            self.fid_sq += f * f;
        }
    }

    /// Successes per unit simulated time; 0 when nothing succeeded.
    pub fn rate(&self) -> f64 {
        if self.time_s > 0.0 {
            self.successes as f64 / self.time_s
        } else {
            0.0
        }
    }

    /// Delta-method standard error of the ratio estimator.
    pub fn rate_sem(&self) -> f64 {
        let n = self.trials as f64;
        if self.trials < 2 || self.time_s <= 0.0 {
            return f64::NAN;
        }
        let r = self.rate();
        let s = self.successes as f64;
        let resid_sq = s - 2.0 * r * self.success_time + r * r * self.time_sq;
        let t_bar = self.time_s / n;
        (resid_sq.max(0.0) / (n * (n - 1.0))).sqrt() / t_bar
    }

    pub fn success_fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Binomial standard error of the success fraction.
    pub fn success_fraction_sem(&self) -> f64 {
        let p = self.success_fraction();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn fidelity_mean(&self) -> Option<f64> {
        (self.successes > 0).then(|| self.fid_sum / self.successes as f64)
    }

    /// Sample standard deviation over successes divided by `√successes`.
    pub fn fidelity_sem(&self) -> Option<f64> {
        let k = self.successes as f64;
        if self.successes < 2 {
            return None;
        }
        let mean = self.fid_sum / k;
        let var = ((self.fid_sq - k * mean * mean) / (k - 1.0)).max(0.0);
        Some((var / k).sqrt())
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.trials += other.trials;
        self.successes += other.successes;
        self.time_s += other.time_s;
        self.time_sq += other.time_sq;
        self.success_time += other.success_time;
        self.fid_sum += other.fid_sum;
        self.fid_sq += other.fid_sq;
    }
}

/// One row of a trapped-ion simulation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub distance_km: f64,
    pub n: u32,
    pub protocol: String,
    pub egr_hz: f64,
    pub fidelity: Option<f64>,
    pub fidelity_sem: Option<f64>,
    pub iterations: u64,
    pub seed: u64,
    pub egr_sem: f64,
    pub successes: u64,
}

/// One row of an APE simulation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApeSweepResult {
    pub distance_km: f64,
    pub n: u32,
    pub m: u32,
    pub b0: u32,
    pub b1: u32,
    pub egr_hz: f64,
    pub success_prob: f64,
    pub fidelity: Option<f64>,
    pub fidelity_sem: Option<f64>,
    pub iterations: u64,
    pub censored_flag: bool,
    pub seed: u64,
    pub success_prob_sem: f64,
    pub egr_sem: f64,
    pub successes: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_cycle_rate() {
        let mut a = Accumulator::default();
        for _ in 0..10 {
            a.push(true, 0.5, Some(0.9));
        }
        assert_eq!(a.rate(), 2.0);
        assert_eq!(a.rate_sem(), 0.0);
        assert!((a.fidelity_mean().unwrap() - 0.9).abs() < 1e-12);
        assert!(a.fidelity_sem().unwrap() < 1e-12);
    }

    #[test]
    fn no_successes() {
        let mut a = Accumulator::default();
        a.push(false, 1.0, None);
        assert_eq!(a.rate(), 0.0);
        assert_eq!(a.fidelity_mean(), None);
        assert_eq!(a.fidelity_sem(), None);
    }

    #[test]
    fn merge_matches_sequential() {
        let data = [(true, 0.3, Some(0.8)), (false, 0.9, None), (true, 0.1, Some(0.6))];
        let mut all = Accumulator::default();
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        for (i, &(s, t, f)) in data.iter().enumerate() {
            all.push(s, t, f);
            if i < 1 {
                a.push(s, t, f)
            } else {
                b.push(s, t, f)
            }
        }
        a.merge(&b);
        assert_eq!(a, all);
    }
}
