use nhse_circuit::netlist::{
    build_chain, chain_meta, parse_netlist, serialize_netlist, ChainParams, Component, Netlist,
    NodeId,
};
use nhse_circuit::Error;
use proptest::prelude::*;

fn value() -> impl Strategy<Value = f64> {
    (1.0f64..10.0, -12i32..-2).prop_map(|(m, e)| m * 10f64.powi(e))
}

fn netlist() -> impl Strategy<Value = Netlist> {
    (1usize..12).prop_flat_map(|n| {
        let caps = prop::collection::vec((1..=n, value()), 0..2 * n);
        let inds = prop::collection::vec(prop::option::of(value()), n);
        let couplings = prop::collection::vec((1..=n, 1..=n, value()), 0..2 * n);
        (Just(n), caps, inds, couplings, "[a-z =.0-9]{0,20}").prop_map(
            |(n, caps, inds, couplings, label)| {
                let mut comps = Vec::new();
                for (node, c) in caps {
                    comps.push(Component::GroundCap {
                        node: NodeId(node),
                        capacitance: c,
                    });
                }
                for (i, l) in inds.into_iter().enumerate() {
                    if let Some(l) = l {
                        comps.push(Component::GroundInd {
                            node: NodeId(i + 1),
                            inductance: l,
                        });
                    }
                }
                for (a, b, c) in couplings {
                    if a != b {
                        comps.push(Component::DirectedCoupling {
                            input: NodeId(a),
                            driven: NodeId(b),
                            capacitance: c,
                        });
                    }
                }
                Netlist::new(n, comps, label.trim()).unwrap()
            },
        )
    })
}

fn chain() -> impl Strategy<Value = ChainParams> {
    (
        2usize..30,
        value(),
        value(),
        value(),
        0.0f64..=1.0,
        prop::bool::ANY,
    )
        .prop_map(|(n, c0, c1, l, delta, open)| {
            let delta = if open { 0.0 } else { delta };
            ChainParams::balanced(n, c0, c1, l, delta).unwrap()
        })
}

proptest! {
    #[test]
    fn parse_inverts_serialize(net in netlist()) {
        let text = serialize_netlist(&net);
        prop_assert_eq!(parse_netlist(&text).unwrap(), net);
    }

    #[test]
    fn chain_parameters_survive_round_trip(p in chain()) {
        let net = build_chain(&p).unwrap();
        prop_assert_eq!(chain_meta(&net).unwrap().params, p);
        let reparsed = parse_netlist(&serialize_netlist(&net)).unwrap();
        prop_assert_eq!(chain_meta(&reparsed).unwrap().params, p);
    }

    #[test]
    fn chain_component_counts(p in chain()) {
        let net = build_chain(&p).unwrap();
        let couplings = net.components().iter().filter(|c| matches!(c, Component::DirectedCoupling { .. })).count();
        prop_assert_eq!(couplings, p.n - 1 + usize::from(p.c2 > 0.0));
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("nodes 3\ncapg 4 1e-9", 2),
        ("nodes 2\n\n# comment\nindg 1 -1e-6", 4),
        ("capg 1 1e-9\nnodes 2", 1),
        ("nodes 2\nvfcap 1 1 1e-9", 2),
        ("nodes 2\nindg 1 1e-6\nindg 1 2e-6", 3),
        ("nodes 2\nresistor 1 2 5", 2),
        ("nodes 2\ncapg 1", 2),
    ];
    for (text, line) in cases {
        match parse_netlist(text) {
            Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn reference_chain_text() {
    let p = ChainParams {
        n: 10,
        c0: 10e-9,
        c1: 220e-9,
        c2: 30e-9,
        c3: 200e-9,
        l: 220e-6,
    };
    let text = serialize_netlist(&build_chain(&p).unwrap());
    assert!(text.contains("nodes 10\n"));
    assert!(text.contains("vfcap 1 10 3e-8\n"));
    assert!(text.contains("capg 10 2e-7\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("indg")).count(), 10);
}
