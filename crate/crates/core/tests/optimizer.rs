use qrchain::optimizer::{
    feasible_shapes, optimize_frontier, optimize_rgs, rank, repeaterless_rate, Candidate, MIN_BUDGET,
};
use qrchain::{ApeParams, ChainTopology, RgsParams};

fn shape(m: u32, b0: u32, b1: u32) -> RgsParams {
    RgsParams::new(m, b0, b1).unwrap()
}

#[test]
fn reference_budgets_at_fifty_km() {
    let ape = ApeParams::default();
    let topo = ChainTopology::new(8, 50.0).unwrap();
    assert_eq!(optimize_rgs(&ape, &topo, 300, 8).unwrap().rgs, shape(6, 6, 3));
    assert_eq!(optimize_rgs(&ape, &topo, 900, 8).unwrap().rgs, shape(8, 11, 4));
}

#[test]
fn single_repeater_prefers_wide_shallow_tree() {
    let ape = ApeParams::default();
    let topo = ChainTopology::new(1, 50.0).unwrap();
    for budget in [102, 130, 300, 900] {
        let best = optimize_rgs(&ape, &topo, budget, 1).unwrap();
        assert_eq!(best.rgs, shape(1, 25, 1), "budget {budget}");
    }
}

#[test]
fn smallest_budget_has_one_shape() {
    assert_eq!(feasible_shapes(MIN_BUDGET), vec![shape(1, 1, 1)]);
    let ape = ApeParams::default();
    let topo = ChainTopology::new(3, 50.0).unwrap();
    assert_eq!(
        optimize_rgs(&ape, &topo, MIN_BUDGET, 3).unwrap().rgs,
        shape(1, 1, 1)
    );
    assert!(optimize_rgs(&ape, &topo, MIN_BUDGET - 1, 3).is_err());
}

#[test]
fn feasible_set_is_exactly_the_budgeted_shapes() {
    let budget = 130;
    let got = feasible_shapes(budget);
    let mut want = Vec::new();
    for m in 1..=budget as u32 {
        for b0 in 1..=budget as u32 {
            for b1 in 1..=budget as u32 {
                let s = shape(m, b0, b1);
                if s.photon_count() <= budget {
                    want.push(s);
                }
            }
        }
    }
    assert_eq!(got, want);
}

#[test]
fn ties_break_on_photons_then_lexicographic() {
    let a = Candidate {
        rgs: shape(1, 2, 3),
        photons: 10,
        egr: 1.0,
    };
    let b = Candidate {
        rgs: shape(1, 2, 2),
        photons: 12,
        egr: 1.0,
    };
    let c = Candidate {
        rgs: shape(1, 1, 9),
        photons: 10,
        egr: 1.0,
    };
    assert_eq!(rank(&a, &b), std::cmp::Ordering::Greater);
    assert_eq!(rank(&c, &a), std::cmp::Ordering::Greater);
    let faster = Candidate { egr: 1.5, ..b };
    assert_eq!(rank(&faster, &a), std::cmp::Ordering::Greater);
}

#[test]
fn crossover_at_fifty_km() {
    let ape = ApeParams::default();
    let topo = ChainTopology::new(1, 50.0).unwrap();
    let ns: Vec<u32> = (1..=10).collect();
    let res = optimize_frontier(&ape, &topo, 300, &ns).unwrap();
    let n = res.crossover_n.expect("some n beats direct transmission");
    assert!((4..=6).contains(&n), "crossover at n = {n}");
    for e in &res.frontier {
        assert_eq!(e.baseline_egr, repeaterless_rate(&ape, &topo));
        if e.n < n {
            assert!(e.best.egr <= e.baseline_egr);
        }
    }
    assert!(res.frontier.iter().all(|e| e.best.photons <= 300));
}

#[test]
fn baseline_falls_with_distance() {
    let ape = ApeParams::default();
    let near = repeaterless_rate(&ape, &ChainTopology::new(1, 10.0).unwrap());
    let far = repeaterless_rate(&ape, &ChainTopology::new(1, 100.0).unwrap());
    assert!(near > far && far > 0.0);
}

#[test]
fn empty_repeater_list_is_rejected() {
    let ape = ApeParams::default();
    let topo = ChainTopology::default();
    assert!(optimize_frontier(&ape, &topo, 300, &[]).is_err());
}

#[test]
fn no_sampled_shape_beats_the_optimum() {
    use qrchain::optimizer::evaluate;
    use qrchain::theory_ape::link_loss;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let ape = ApeParams::default();
    let topo = ChainTopology::new(4, 50.0).unwrap();
    let best = optimize_rgs(&ape, &topo, 300, 4).unwrap();
    let mu = link_loss(&ape, &topo).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let shapes = feasible_shapes(300);
    for s in shapes.choose_multiple(&mut rng, 100) {
        assert!(evaluate(&ape, &topo, mu, *s).egr <= best.egr, "{s:?}");
    }
}

#[test]
fn optimum_never_worsens_with_budget() {
    let ape = ApeParams::default();
    let topo = ChainTopology::new(6, 50.0).unwrap();
    let mut last = 0.0;
    for budget in (6..=600).step_by(37) {
        let egr = optimize_rgs(&ape, &topo, budget, 6).unwrap().egr;
        assert!(egr >= last, "budget {budget}");
        last = egr;
    }
}

#[test]
fn long_chains_gain_from_more_repeaters() {
    let ape = ApeParams::default();
    let topo = ChainTopology::new(1, 50.0).unwrap();
    let res = optimize_frontier(&ape, &topo, 300, &(1..=10).collect::<Vec<_>>()).unwrap();
    let egr: Vec<f64> = res.frontier.iter().map(|e| e.best.egr).collect();
    assert!(egr[9] > 5.0 * egr[0]);
    assert!(egr[2..].windows(2).all(|w| w[1] > w[0]));
}
