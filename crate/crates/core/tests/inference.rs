use proptest::prelude::*;
use proptest::strategy::Strategy as _;

use lpe_core::engine::{answer_query, Budget, StopCriterion, Strategy};
use lpe_core::netgen::{generate, GenSpec};
use lpe_core::network::{is_polytree, parse_network, serialize_network, Evidence, NodeId};
use lpe_core::oracle::{enumerate_marginal, polytree_exact};

const ALARM: &str = "network alarm
node Burglary states yes no
node Earthquake states yes no
node Alarm states on off
node John states calls quiet
node Mary states calls quiet
parents Alarm Burglary Earthquake
parents John Alarm
parents Mary Alarm
cpt Burglary
0.01 0.99
cpt Earthquake
0.02 0.98
cpt Alarm
0.95 0.05
0.94 0.06
0.29 0.71
0.001 0.999
cpt John
0.9 0.1
0.05 0.95
cpt Mary
0.7 0.3
0.01 0.99
evidence John calls
evidence Mary calls
";

fn strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop_oneof![
        Just(Strategy::BreadthFirst),
        Just(Strategy::NoLoops),
        (0usize..4).prop_map(Strategy::DelayedLoops),
    ]
}

#[test]
fn textbook_network_from_text() {
    let net = parse_network(ALARM).unwrap();
    let ev = net.evidence().clone();
    let b = net.id("Burglary").unwrap();
    let exact = enumerate_marginal(&net, &ev, b).unwrap();
    // Direct sum over Earthquake and Alarm.
    let alarm = [[0.95, 0.94], [0.29, 0.001]];
    let joint = |pb: f64, row: usize| {
        [(0.02, 0), (0.98, 1)]
            .iter()
            .map(|&(pe, e)| {
                let on = alarm[row][e];
                pb * pe * (on * 0.9 * 0.7 + (1.0 - on) * 0.05 * 0.01)
            })
            .sum::<f64>()
    };
    let (yes, no) = (joint(0.01, 0), joint(0.99, 1));
    assert!((exact[0] - yes / (yes + no)).abs() < 1e-12);
    let r = answer_query(&net, b, &ev, Strategy::BreadthFirst, StopCriterion::TargetWidth(0.0), Budget::unlimited())
        .unwrap();
    for bel in &r.history {
        assert!(bel.contains_point(&exact, 1e-12));
    }
    assert!(r.width() < 1e-12);
    assert!((polytree_exact(&net, &ev, b).unwrap()[0] - exact[0]).abs() < 1e-12);
}

#[test]
fn serialized_networks_keep_their_marginals() {
    for seed in 0..10 {
        let spec = GenSpec::loopy(12, 1.3, seed);
        let net = generate(&spec).unwrap();
        let net = net.with_evidence(spec.evidence(&net)).unwrap();
        let back = parse_network(&serialize_network(&net)).unwrap();
        assert_eq!(back.arcs(), net.arcs());
        assert_eq!(back.evidence(), net.evidence());
        for q in net.ids() {
            let a = enumerate_marginal(&net, net.evidence(), q).unwrap();
            let b = enumerate_marginal(&back, back.evidence(), q).unwrap();
            assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_iteration_bounds_the_marginal(
        seed in 0u64..100_000,
        n in 3usize..10,
        loopy in any::<bool>(),
        s in strategy(),
        q in 0usize..10,
    ) {
        let spec = if loopy { GenSpec::loopy(n.max(4), 1.3, seed) } else { GenSpec::polytree(n, seed) };
        let net = generate(&spec).unwrap();
        let ev = spec.evidence(&net);
        let q = NodeId(q % net.len());
        let exact = enumerate_marginal(&net, &ev, q).unwrap();
        let r = answer_query(&net, q, &ev, s, StopCriterion::TargetWidth(0.0), Budget::unlimited()).unwrap();
        for bel in &r.history {
            prop_assert!(bel.contains_point(&exact, 1e-9));
            prop_assert!(bel.is_coherent());
        }
        prop_assert!(r.active_nodes.windows(2).all(|w| w[0] <= w[1]));
        if is_polytree(&net) || s != Strategy::NoLoops {
            prop_assert!(r.width() < 1e-9);
        }
    }

    #[test]
    fn saturated_polytree_answers_match_the_message_passing_oracle(seed in 0u64..100_000, n in 2usize..40) {
        let spec = GenSpec::polytree(n, seed);
        let net = generate(&spec).unwrap();
        let ev = spec.evidence(&net);
        let q = NodeId(seed as usize % n);
        let exact = polytree_exact(&net, &ev, q).unwrap();
        let r = answer_query(&net, q, &ev, Strategy::NoLoops, StopCriterion::TargetWidth(0.0), Budget::unlimited()).unwrap();
        prop_assert!(r.bel.contains_point(&exact, 1e-9));
        prop_assert!(r.width() < 1e-9);
    }

    #[test]
    fn stopping_contract_holds(seed in 0u64..100_000, target in 0.05f64..0.9) {
        let spec = GenSpec::loopy(20, 1.1, seed);
        let net = generate(&spec).unwrap();
        let q = NodeId(seed as usize % 20);
        let r = answer_query(&net, q, &Evidence::new(), Strategy::DelayedLoops(2), StopCriterion::TargetWidth(target), Budget::unlimited())
            .unwrap();
        prop_assert!(r.width() <= target || r.status == lpe_core::engine::QueryStatus::Saturated);
    }
}
