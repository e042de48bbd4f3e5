use proptest::prelude::*;

use qrchain::config::Config;
use qrchain::params::*;

#[test]
fn photon_counts_of_reference_shapes() {
    let shapes = [(1, 25, 1), (5, 4, 2), (6, 6, 3), (7, 8, 4), (8, 11, 4)];
    let counts: Vec<u64> = shapes
        .iter()
        .map(|&(m, b0, b1)| RgsParams::new(m, b0, b1).unwrap().photon_count())
        .collect();
    assert_eq!(counts, vec![102, 130, 300, 574, 896]);
}

#[test]
fn zero_length_channel_is_lossless() {
    let topo = ChainTopology::default();
    assert_eq!(channel_loss(0.0, &topo).unwrap(), 0.0);
    assert!(channel_loss(-1.0, &topo).is_err());
}

#[test]
fn ape_loss_without_delay_line_matches_stage_product() {
    let ape = ApeParams::default();
    let topo = ChainTopology::new(2, 60.0).unwrap();
    let mu = total_loss_ape(&ape, topo.hop_length_km(), &topo).unwrap();
    let expect = 1.0 - 0.997 * 0.95 * (-10.0f64 / 22.0).exp();
    assert!((mu - expect).abs() < 1e-14);
}

#[test]
fn db_and_length_forms_agree() {
    let topo = ChainTopology::default().with_db_per_km(0.2).unwrap();
    let via_len = channel_loss(30.0, &topo).unwrap();
    let via_db = 1.0 - 10f64.powf(-0.2 * 30.0 / 10.0);
    assert!((via_len - via_db).abs() < 1e-14);
}

#[test]
fn invalid_parameters_are_rejected() {
    let ion = TrappedIonParams {
        eta_det: 1.2,
        ..Default::default()
    };
    assert!(ion.validate().is_err());
    assert!(RgsParams::new(0, 1, 1).is_err());
    assert!(ChainTopology::new(1, 0.0).is_err());
    assert!(Config::from_json_str(
        r#"{"topology": {"attenuation_length_km": 22, "attenuation_db_per_km": 0.3}}"#
    )
    .is_err());
}

proptest! {
    #[test]
    fn loss_grows_with_distance(a in 0.0..500.0f64, b in 0.0..500.0f64) {
        let topo = ChainTopology::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(channel_loss(lo, &topo).unwrap() <= channel_loss(hi, &topo).unwrap());
    }

    #[test]
    fn config_round_trips(
        n in 0u32..20, len in 1.0..500.0f64, l_att in 5.0..50.0f64,
        f_em in 0.5..=1.0f64, h_max in 1u32..500, t_emit in 1e-10..1e-7f64,
        m in 1u32..10, b0 in 1u32..20, b1 in 1u32..10,
    ) {
        let mut cfg = Config::default();
        cfg.topology = ChainTopology::new(n, len).unwrap().with_db_per_km(10.0 / (l_att * std::f64::consts::LN_10)).unwrap();
        cfg.trapped_ion.f_em_trap = f_em;
        cfg.trapped_ion.h_max = h_max;
        cfg.ape.t_emit_s = t_emit;
        cfg.rgs = RgsParams::new(m, b0, b1).unwrap();
        let back = Config::from_json_str(&cfg.to_json_string()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn photon_count_formula(m in 1u32..50, b0 in 1u32..50, b1 in 1u32..50) {
        let r = RgsParams::new(m, b0, b1).unwrap();
        prop_assert_eq!(r.photon_count(), 2 * u64::from(m) * (1 + u64::from(b0) * (1 + u64::from(b1))));
        let parsed: RgsParams = r.to_string().parse().unwrap();
        prop_assert_eq!(parsed, r);
    }
}
