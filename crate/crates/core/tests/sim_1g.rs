mod common;

use common::z_score;
use qrchain::engine::RngStreams;
use qrchain::sim_1g::{estimate, find_emission_overlap, run_heg, HegState, Protocol, Sim1g};
use qrchain::theory_1g::{
    self, attempt_cdf, cycle_time_hop_by_hop, expected_fidelity_1g, Timing1g, WaitModel,
};
use qrchain::{ChainTopology, TrappedIonParams};

#[test]
fn heg_attempts_follow_truncated_geometric() {
    let mu = 0.8;
    let h_max = 10;
    let mut rng = RngStreams::new(5).node(0);
    let runs = 100_000;
    let mut ok = 0;
    for _ in 0..runs {
        let (s, t) = run_heg(0, mu, h_max, 7, &mut rng);
        assert_eq!(t, 7 * u64::from(s.attempts));
        if s.state == HegState::Succeeded {
            ok += 1;
        } else {
            assert_eq!(s.attempts, h_max);
        }
    }
    let p = attempt_cdf(mu, h_max);
    let frac = f64::from(ok) / f64::from(runs);
    let sem = (p * (1.0 - p) / f64::from(runs)).sqrt();
    assert!(z_score(frac, p, sem).abs() < 4.0, "{frac} vs {p}");
}

#[test]
fn two_step_rate_and_fidelity_match_theory() {
    let ion = TrappedIonParams::default();
    for n in [1, 3] {
        let topo = ChainTopology::new(n, 50.0).unwrap();
        let sim = estimate(&ion, &topo, Protocol::TwoStep, 1500, 99 + u64::from(n)).unwrap();
        let egr = theory_1g::egr_1g(&ion, &topo).unwrap();
        let fid = expected_fidelity_1g(&ion, &topo, &WaitModel::Exact).unwrap();
        let z_egr = z_score(sim.egr_hz, egr, sim.egr_sem);
        let z_fid = z_score(sim.fidelity.unwrap(), fid, sim.fidelity_sem.unwrap());
        assert!(
            z_egr.abs() <= 3.0,
            "n={n}: egr {} vs {egr} (z={z_egr})",
            sim.egr_hz
        );
        assert!(
            z_fid.abs() <= 3.0,
            "n={n}: fidelity {:?} vs {fid} (z={z_fid})",
            sim.fidelity
        );
    }
}

#[test]
fn hop_by_hop_rate_matches_theory() {
    let ion = TrappedIonParams::default();
    let topo = ChainTopology::new(4, 50.0).unwrap();
    let sim = estimate(&ion, &topo, Protocol::HopByHop, 1500, 8).unwrap();
    let mu = theory_1g::link_loss(&ion, &topo).unwrap();
    let th = cycle_time_hop_by_hop(mu, ion.h_max, 4, &Timing1g::from_params(&ion, &topo)).egr();
    let z = z_score(sim.egr_hz, th, sim.egr_sem);
    assert!(z.abs() <= 3.0, "egr {} vs {th} (z={z})", sim.egr_hz);
}

#[test]
fn two_step_outpaces_hop_by_hop_on_long_chains() {
    let ion = TrappedIonParams::default();
    let topo = ChainTopology::new(5, 50.0).unwrap();
    let a = estimate(&ion, &topo, Protocol::TwoStep, 20_000, 1).unwrap();
    let b = estimate(&ion, &topo, Protocol::HopByHop, 20_000, 2).unwrap();
    let sep = (a.egr_hz - b.egr_hz) / a.egr_sem.hypot(b.egr_sem);
    assert!(sep > 3.0, "separation {sep}");
}

#[test]
fn ions_of_a_repeater_never_emit_together() {
    let ion = TrappedIonParams::default();
    for protocol in [Protocol::TwoStep, Protocol::HopByHop] {
        let topo = ChainTopology::new(4, 20.0).unwrap();
        let mut sim = Sim1g::new(&ion, &topo, protocol, 3).unwrap();
        sim.record_emissions();
        sim.run(300, |_, _| {}).unwrap();
        assert!(!sim.emission_log().is_empty());
        assert_eq!(find_emission_overlap(sim.emission_log()), None, "{protocol:?}");
    }
}

#[test]
fn fixed_seed_is_reproducible() {
    let ion = TrappedIonParams::default();
    let topo = ChainTopology::new(2, 50.0).unwrap();
    let a = estimate(&ion, &topo, Protocol::TwoStep, 200, 77).unwrap();
    let b = estimate(&ion, &topo, Protocol::TwoStep, 200, 77).unwrap();
    let c = estimate(&ion, &topo, Protocol::TwoStep, 200, 78).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.egr_hz, c.egr_hz);
}

#[test]
fn failed_cycles_carry_no_state() {
    let ion = TrappedIonParams {
        h_max: 1,
        ..Default::default()
    };
    let topo = ChainTopology::new(2, 100.0).unwrap();
    let mut sim = Sim1g::new(&ion, &topo, Protocol::TwoStep, 4).unwrap();
    let mut failures = 0;
    sim.run(200, |_, out| {
        if !out.success {
            failures += 1;
            assert!(out.state.is_none() && out.fidelity.is_none());
        } else {
            assert_eq!(out.waits_ps.len(), 6);
        }
    })
    .unwrap();
    assert!(failures > 0);
}

#[test]
fn zero_iterations_is_an_error() {
    let topo = ChainTopology::new(1, 10.0).unwrap();
    let mut sim = Sim1g::new(&TrappedIonParams::default(), &topo, Protocol::TwoStep, 1).unwrap();
    assert!(sim.run(0, |_, _| {}).is_err());
}
