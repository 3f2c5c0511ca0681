use std::collections::BTreeMap;

use infoflow::causalnet::{
    attribute_flows, ballot_net, ballot_scenario, example_graph, example_graph_with_control, joint,
    leakage_profile, twins_net, BayesNet, Node, DEFAULT_FLOW_THRESHOLD,
};
use infoflow::society::{FlowEvent, FlowKind};
use infoflow::InfoMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Joint probability of one full assignment as a direct product of CPT entries.
fn naive_cell(net: &BayesNet, assignment: &[usize]) -> f64 {
    net.nodes()
        .iter()
        .enumerate()
        .map(|(i, node)| {
            let row = net
                .parents_of(i)
                .iter()
                .fold(0, |r, &p| r * net.nodes()[p].states.len() + assignment[p]);
            node.cpt[row][assignment[i]]
        })
        .product()
}

fn random_net(rng: &mut ChaCha8Rng) -> BayesNet {
    let n = rng.random_range(1..=6);
    let mut nodes: Vec<Node> = Vec::new();
    for i in 0..n {
        let card = rng.random_range(2..=3);
        let parents: Vec<String> = (0..i)
            .filter(|_| rng.random_bool(0.4))
            .map(|p| format!("N{p}"))
            .collect();
        let rows: usize = parents
            .iter()
            .map(|p| nodes.iter().find(|x| &x.name == p).unwrap().states.len())
            .product();
        let cpt = (0..rows)
            .map(|_| {
                let w: Vec<f64> = (0..card).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|v| v / s).collect()
            })
            .collect();
        nodes.push(Node {
            name: format!("N{i}"),
            states: (0..card).map(|s| s.to_string()).collect(),
            parents,
            cpt,
        });
    }
    // declare in shuffled order so enumeration cannot rely on declaration order
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let shuffled = order.into_iter().map(|i| nodes[i].clone()).collect();
    BayesNet::new(shuffled).unwrap()
}

#[test]
fn enumeration_matches_factor_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let net = random_net(&mut rng);
        let jt = joint(&net).unwrap();
        let cards = jt.cards().to_vec();
        for (cell, &p) in jt.table().iter().enumerate() {
            let mut rest = cell;
            let mut a = vec![0; cards.len()];
            for v in (0..cards.len()).rev() {
                a[v] = rest % cards[v];
                rest /= cards[v];
            }
            assert!((p - naive_cell(&net, &a)).abs() < 1e-12);
        }
        assert!((jt.total() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn profile_mi_bounded_by_entropies() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let net = random_net(&mut rng);
        let m = net.nodes()[0].name.clone();
        let prof = leakage_profile(&net, &m, None).unwrap();
        for n in &prof.nodes {
            assert!(n.mi_sh >= 0.0);
            assert!(n.mi_sh <= prof.message_entropy_sh.min(n.entropy_sh) + 1e-9);
        }
    }
}

#[test]
fn d_separated_nodes_receive_nothing() {
    // M <- A -> C <- B, A -> D, lone node L
    let half = vec![0.5, 0.5];
    let net = BayesNet::new(vec![
        Node::root("A", vec!["0", "1"], vec![0.3, 0.7]),
        Node::root("B", vec!["0", "1"], vec![0.6, 0.4]),
        Node::new(
            "C",
            vec!["0", "1"],
            vec!["A", "B"],
            vec![
                vec![0.9, 0.1],
                vec![0.2, 0.8],
                vec![0.4, 0.6],
                vec![0.7, 0.3],
            ],
        ),
        Node::new(
            "D",
            vec!["0", "1"],
            vec!["A"],
            vec![vec![0.8, 0.2], vec![0.1, 0.9]],
        ),
        Node::new(
            "M",
            vec!["0", "1"],
            vec!["A"],
            vec![vec![0.95, 0.05], vec![0.25, 0.75]],
        ),
        Node::root("L", vec!["0", "1"], half),
    ])
    .unwrap();
    let prof = leakage_profile(&net, "M", None).unwrap();
    assert!(prof.mi("B").unwrap() < 1e-9);
    assert!(prof.mi("L").unwrap() < 1e-9);
    assert!(prof.mi("A").unwrap() > 1e-3);
    assert!(prof.mi("C").unwrap() > 1e-6);
    assert!(prof.mi("D").unwrap() > 1e-3);
}

#[test]
fn ballot_chain_rule() {
    for n in 2..=10 {
        let (_, r) = ballot_scenario(n).unwrap();
        let residual: f64 = r
            .posteriors
            .iter()
            .map(|p| p.p_tally * p.entropy_v1_sh)
            .sum();
        assert!((residual + r.mi_tally_v1 - 1.0).abs() < 1e-9, "n = {n}");
        assert_eq!(r.posteriors.first().unwrap().entropy_v1_sh, 0.0);
        assert_eq!(r.posteriors.last().unwrap().entropy_v1_sh, 0.0);
    }
}

#[test]
fn ballot_oracle_by_counting() {
    // brute force over the 2^3 voter configurations, independent of the net
    let mut joint = [[0.0f64; 2]; 4];
    for cfg in 0u32..8 {
        joint[cfg.count_ones() as usize][(cfg & 1) as usize] += 1.0 / 8.0;
    }
    let mut mi = 0.0;
    for row in &joint {
        let pt: f64 = row.iter().sum();
        for &p in row {
            if p > 0.0 {
                mi += p * (p / (pt * 0.5)).log2();
            }
        }
    }
    let (_, r) = ballot_scenario(3).unwrap();
    assert!((r.mi_tally_v1 - mi).abs() < 1e-12);
    assert!((mi - 0.311278).abs() < 1e-6);
}

#[test]
fn example_graph_regression_values() {
    // cross-checked against an independent enumeration of the exported CPTs
    let frozen = [
        ("A", 0.0021257710726464048),
        ("B", 1.4038418009902805e-05),
        ("C", 2.263189969978381e-05),
        ("D", 0.000244512013381667),
        ("E", 0.030082914020069344),
        ("F", 0.0004154886648325834),
        ("G", 0.0038761960821133076),
        ("X", 0.15946916269305655),
    ];
    let prof = leakage_profile(&example_graph_with_control(42), "M", None).unwrap();
    for (node, mi) in frozen {
        assert!((prof.mi(node).unwrap() - mi).abs() < 1e-9, "{node}");
    }
    assert_eq!(prof.mi("H"), Some(0.0));
}

#[test]
fn bundled_graphs_match_generator() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");
    let load = |f: &str| -> BayesNet {
        serde_json::from_str(&std::fs::read_to_string(format!("{dir}/{f}")).unwrap()).unwrap()
    };
    assert_eq!(load("example_graph.json"), example_graph(42));
    assert_eq!(
        load("example_graph_control.json"),
        example_graph_with_control(42)
    );
}

fn explicit(id: u64, sender: &str, receiver: &str, datum: &str) -> FlowEvent {
    FlowEvent {
        id,
        t: 0,
        sender: sender.into(),
        receiver: receiver.into(),
        datum: datum.into(),
        measure: InfoMeasure::selective(1.0),
        kind: FlowKind::Explicit,
        context_id: format!("c{id}"),
    }
}

fn owners(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(n, e)| (n.to_string(), e.to_string()))
        .collect()
}

#[test]
fn twin_disclosure_induces_sibling_context() {
    let net = twins_net(0.5).unwrap();
    let own = owners(&[("Z", "s1"), ("S1", "s1"), ("S2", "s2")]);
    let induced = attribute_flows(
        &[explicit(0, "s1", "r", "Z")],
        &net,
        &own,
        DEFAULT_FLOW_THRESHOLD,
    )
    .unwrap();
    assert_eq!(induced.len(), 1);
    let ctx = &induced[0];
    assert_eq!(ctx.induced.sender, "s2");
    assert_eq!(ctx.induced.receiver, "r");
    assert_eq!(ctx.cause.sender, "s1");
    assert_eq!(ctx.flows[0].datum, "S2");
    assert_eq!(ctx.flows[0].kind, FlowKind::Implicit);
    assert!((ctx.flows[0].measure.selective_sh - 0.311278).abs() < 1e-6);
}

#[test]
fn disconnected_message_induces_nothing() {
    let net = BayesNet::new(vec![
        Node::root("Q", vec!["0", "1"], vec![0.5, 0.5]),
        Node::root("P", vec!["0", "1"], vec![0.2, 0.8]),
    ])
    .unwrap();
    let own = owners(&[("Q", "a"), ("P", "b")]);
    let induced = attribute_flows(
        &[explicit(0, "a", "r", "Q")],
        &net,
        &own,
        DEFAULT_FLOW_THRESHOLD,
    )
    .unwrap();
    assert!(induced.is_empty());
}

#[test]
fn tally_release_implicates_every_voter() {
    let n = 5;
    let net = ballot_net(n).unwrap();
    let mut own: Vec<(String, String)> = (1..=n)
        .map(|i| (format!("V{i}"), format!("voter{i}")))
        .collect();
    own.push(("T".into(), "clerk".into()));
    let own: BTreeMap<String, String> = own.into_iter().collect();
    let induced = attribute_flows(
        &[explicit(0, "clerk", "public", "T")],
        &net,
        &own,
        DEFAULT_FLOW_THRESHOLD,
    )
    .unwrap();
    assert_eq!(induced.len(), n);
    let mut senders: Vec<_> = induced.iter().map(|c| c.induced.sender.clone()).collect();
    senders.sort();
    assert_eq!(
        senders,
        (1..=n).map(|i| format!("voter{i}")).collect::<Vec<_>>()
    );
    let ids: Vec<u64> = induced
        .iter()
        .flat_map(|c| c.induced.flow_ids.clone())
        .collect();
    assert_eq!(ids, (1..=n as u64).collect::<Vec<_>>());
}

#[test]
fn sole_owner_induces_nothing() {
    let net = example_graph(42);
    let own: BTreeMap<String, String> = net
        .nodes()
        .iter()
        .map(|n| (n.name.clone(), "me".to_string()))
        .collect();
    let induced = attribute_flows(
        &[explicit(0, "me", "r", "M")],
        &net,
        &own,
        DEFAULT_FLOW_THRESHOLD,
    )
    .unwrap();
    assert!(induced.is_empty());
}

#[test]
fn attribution_rejects_unknown_nodes() {
    let net = twins_net(0.5).unwrap();
    let own = owners(&[("Z", "s1")]);
    assert!(attribute_flows(&[explicit(0, "s1", "r", "nope")], &net, &own, 1e-6).is_err());
    let bad = owners(&[("ghost", "s1")]);
    assert!(attribute_flows(&[explicit(0, "s1", "r", "Z")], &net, &bad, 1e-6).is_err());
}
