mod common;

use std::collections::{BTreeMap, BTreeSet};

use tracefold::event::{Determinism, Event, Port, PredKey, Term};
use tracefold::foldt::{foldt, FoldError, MonitorError, Session, StopReason};
use tracefold::microlog::{bundled, parse_program};
use tracefold::monitors::{
    call_site_coverage, collect_solutions, control_flow_graph, count_calls, depth_histogram,
    dynamic_call_graph, generate_call_site_criteria, generate_pred_criteria, max_depth_interval,
    port_histogram, predicate_coverage, update_call_stack, CoverageKey, CoverageState,
};
use tracefold::trace_io::{record, replay, AttributeMask, VecSource};

fn source(events: &[Event]) -> VecSource {
    VecSource::new(events.to_vec())
}

#[test]
fn count_calls_matches_call_records_in_the_file() {
    let dir = tempfile::tempdir().unwrap();
    for file in common::bundled_files() {
        let run = common::run_bundled(file, AttributeMask::default());
        let path = dir.path().join(format!("{file}.trace"));
        record(source(&run.events), &path, AttributeMask::default()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let grep = text
            .lines()
            .filter(|l| l.contains(r#""port":"call""#))
            .count() as u64;
        let counted = foldt(replay(&path).unwrap(), &count_calls()).unwrap();
        assert_eq!(counted.result, grep, "{file}");
        assert!(grep > 0);
    }
}

#[test]
fn port_and_depth_histograms_match_direct_counts() {
    let run = common::run_bundled("queens.mlg", AttributeMask::default());
    let ports = foldt(source(&run.events), &port_histogram())
        .unwrap()
        .result;
    for port in Port::ALL {
        let n = run.events.iter().filter(|e| e.port == port).count() as u64;
        assert_eq!(ports.get(port), n, "{port}");
    }
    assert_eq!(ports.total(), run.events.len() as u64);

    let depths = foldt(source(&run.events), &depth_histogram())
        .unwrap()
        .result;
    let mut expected = BTreeMap::new();
    for e in run.events.iter().filter(|e| e.port == Port::Call) {
        *expected.entry(e.depth).or_insert(0u64) += 1;
    }
    assert_eq!(depths.0, expected);
}

#[test]
fn max_depth_is_reported_per_interval() {
    let run = common::run_bundled("queens.mlg", AttributeMask::default());
    let n = run.events.len();
    let mut session = Session::new(source(&run.events));
    let outcomes = session
        .run_to_completion(&max_depth_interval(500), |_| {})
        .unwrap();

    // Each run takes 500 events and the refused one is consumed with it.
    let mut start = 0;
    for o in &outcomes {
        let end = (start + 500).min(n);
        let chunk = &run.events[start..end];
        assert_eq!(o.result.events, chunk.len() as u64);
        assert_eq!(
            o.result.max_depth,
            chunk.iter().map(|e| e.depth).max().unwrap()
        );
        start = end + 1;
    }
    assert!(start >= n);
    let sizes: Vec<u64> = outcomes.iter().map(|o| o.result.events).collect();
    assert_eq!(sizes, [500, 500, n as u64 - 1002]);
    assert_eq!(
        outcomes[0].stop_reason,
        StopReason::CollectFailed { chrono: 501 }
    );
}

#[test]
fn collect_solutions_needs_arguments() {
    let run = common::run_bundled("qdelete.mlg", AttributeMask::default());
    match foldt(source(&run.events), &collect_solutions()) {
        Err(FoldError::Monitor(MonitorError::AttributeUnavailable(e))) => {
            assert_eq!(
                e.chrono,
                run.events
                    .iter()
                    .find(|e| e.port == Port::Exit)
                    .unwrap()
                    .chrono
            );
        }
        other => panic!("expected a missing attribute, got {other:?}"),
    }
    let run = common::run_bundled("qdelete.mlg", AttributeMask::all());
    let set = foldt(source(&run.events), &collect_solutions())
        .unwrap()
        .result;
    let list = |v: &[i64]| Term::List(v.iter().map(|&n| Term::Int(n)).collect());
    assert!(set.contains("qdelete", &[Term::Int(1), list(&[1, 2, 3]), list(&[2, 3])]));
}

/// Caller of each call: the box most recently entered one level up.
fn call_arcs_by_depth(events: &[Event]) -> BTreeSet<(String, String)> {
    let mut entered: BTreeMap<u32, String> = BTreeMap::new();
    entered.insert(0, PredKey::user().to_string());
    let mut arcs = BTreeSet::new();
    for e in events {
        if matches!(e.port, Port::Call | Port::Redo) {
            if e.port == Port::Call {
                arcs.insert((entered[&(e.depth - 1)].clone(), PredKey::of(e).to_string()));
            }
            entered.insert(e.depth, PredKey::of(e).to_string());
        }
    }
    arcs
}

#[test]
fn call_graph_matches_depth_based_parents() {
    for file in common::bundled_files() {
        let run = common::run_bundled(file, AttributeMask::default());
        let g = foldt(source(&run.events), &dynamic_call_graph())
            .unwrap()
            .result;
        let got: BTreeSet<(String, String)> = g
            .arcs()
            .map(|(a, b, _)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(got, call_arcs_by_depth(&run.events), "{file}");
    }
}

#[test]
fn counted_control_flow_sums_to_the_external_events() {
    let run = common::run_bundled("queens.mlg", AttributeMask::default());
    let g = foldt(source(&run.events), &control_flow_graph(true))
        .unwrap()
        .result;
    let moves = run
        .events
        .iter()
        .filter(|e| matches!(e.port, Port::Call | Port::Exit | Port::Fail | Port::Redo))
        .count() as u64;
    assert_eq!(g.arcs().map(|(_, _, n)| n).sum::<u64>(), moves);
    let plain = foldt(source(&run.events), &control_flow_graph(false))
        .unwrap()
        .result;
    let a: Vec<_> = g.arcs().map(|(a, b, _)| (a.clone(), b.clone())).collect();
    let b: Vec<_> = plain
        .arcs()
        .map(|(a, b, _)| (a.clone(), b.clone()))
        .collect();
    assert_eq!(a, b);
}

#[test]
fn queens_graphs_contain_the_expected_arcs() {
    let run = common::run_bundled("queens.mlg", AttributeMask::default());
    let cfg = foldt(source(&run.events), &control_flow_graph(false))
        .unwrap()
        .result;
    assert!(cfg.contains_names("main", "data"));
    assert!(cfg.contains_names("data", "queen"));
    let cg = foldt(source(&run.events), &dynamic_call_graph())
        .unwrap()
        .result;
    assert!(cg.contains_names("main", "queen"));
    assert!(cg.contains_names("queen", "qperm"));
    assert!(cg.contains_names("user", "main"));
}

#[test]
fn dot_output_matches_golden_files() {
    let run = common::run_bundled("queens.mlg", AttributeMask::default());
    let cases = [
        ("queens_cfg.dot", control_flow_graph(false)),
        ("queens_cfg_counted.dot", control_flow_graph(true)),
    ];
    for (golden, monitor) in cases {
        let dot = foldt(source(&run.events), &monitor)
            .unwrap()
            .result
            .to_dot("queens");
        let again = foldt(source(&run.events), &monitor)
            .unwrap()
            .result
            .to_dot("queens");
        assert_eq!(dot, again);
        assert_eq!(dot, read_golden(golden), "{golden}");
    }
    let cg = foldt(source(&run.events), &dynamic_call_graph())
        .unwrap()
        .result;
    assert_eq!(cg.to_dot("queens"), read_golden("queens_call_graph.dot"));
}

fn read_golden(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn call_stacks_stay_balanced() {
    let mut files = common::bundled_files();
    files.push("errors.mlg");
    for file in files {
        let src = bundled::lookup(file).unwrap();
        let program = parse_program(src).unwrap();
        let query = tracefold::microlog::parse_query(&program, "main").unwrap();
        let mut events = Vec::new();
        let _ = tracefold::microlog::solve(
            &program,
            &query,
            &Default::default(),
            &mut events,
            &mut std::io::sink(),
        );
        let mut stack = vec![PredKey::user()];
        for e in &events {
            update_call_stack(&mut stack, e).unwrap_or_else(|err| panic!("{file}: {err}"));
            assert!(!stack.is_empty());
        }
        assert_eq!(stack, [PredKey::user()], "{file}");
    }
}

#[test]
fn underflow_is_an_integrity_error() {
    let events = [common::event(1, 1, 1, Port::Exit, "p", 0)];
    let err = foldt(source(&events), &dynamic_call_graph()).unwrap_err();
    assert!(matches!(
        err,
        FoldError::Monitor(MonitorError::Integrity { chrono: 1, .. })
    ));
}

fn pred_state(name: &str, det: Determinism) -> CoverageState {
    CoverageState::from_determinisms([(CoverageKey::Pred(PredKey::new(name, 0)), det)])
}

fn remaining(state: &CoverageState, name: &str) -> Option<Vec<Port>> {
    state
        .get(&CoverageKey::Pred(PredKey::new(name, 0)))
        .map(|c| c.remaining.clone())
}

/// Eight events: two boxes of `p` wrapped around by `q`, with the given
/// ports for `p`'s calls.
fn fixture(p_events: [(u64, Port); 6]) -> Vec<Event> {
    let mut events = vec![common::event(1, 1, 1, Port::Call, "q", 0)];
    for (call, port) in p_events {
        let chrono = events.len() as u64 + 1;
        events.push(common::event(chrono, call, 2, port, "p", 0));
    }
    events.push(common::event(8, 1, 1, Port::Exit, "q", 0));
    events
}

#[test]
fn exit_and_fail_of_distinct_calls_cover_semidet() {
    let events = fixture([
        (2, Port::Call),
        (2, Port::Exit),
        (3, Port::Call),
        (3, Port::Cond),
        (3, Port::Else),
        (3, Port::Fail),
    ]);
    let state = foldt(
        source(&events),
        &predicate_coverage(pred_state("p", Determinism::Semidet)),
    )
    .unwrap()
    .result;
    assert_eq!(remaining(&state, "p"), None);
    assert_eq!(state.rate(), 1.0);
}

#[test]
fn exit_and_fail_of_one_call_leave_fail_open() {
    let events = fixture([
        (2, Port::Call),
        (2, Port::Exit),
        (2, Port::Redo),
        (2, Port::Cond),
        (2, Port::Else),
        (2, Port::Fail),
    ]);
    let state = foldt(
        source(&events),
        &predicate_coverage(pred_state("p", Determinism::Semidet)),
    )
    .unwrap()
    .result;
    assert_eq!(remaining(&state, "p"), Some(vec![Port::Fail]));
    assert_eq!(state.report(), "p/0: remaining [fail]\nrate: 50.0%");
}

#[test]
fn two_exits_of_one_call_cover_multi() {
    let events = fixture([
        (2, Port::Call),
        (2, Port::Exit),
        (2, Port::Redo),
        (2, Port::Disj),
        (2, Port::Disj),
        (2, Port::Exit),
    ]);
    let state = foldt(
        source(&events),
        &predicate_coverage(pred_state("p", Determinism::Multi)),
    )
    .unwrap()
    .result;
    assert_eq!(remaining(&state, "p"), None);

    // exits of two different calls leave one exit open
    let events = fixture([
        (2, Port::Call),
        (2, Port::Exit),
        (2, Port::Redo),
        (2, Port::Fail),
        (3, Port::Call),
        (3, Port::Exit),
    ]);
    let state = foldt(
        source(&events),
        &predicate_coverage(pred_state("p", Determinism::Multi)),
    )
    .unwrap()
    .result;
    assert_eq!(remaining(&state, "p"), Some(vec![Port::Exit]));
}

#[test]
fn queens_criteria_follow_the_determinism_table() {
    let program = parse_program(bundled::QUEENS).unwrap();
    let state = generate_pred_criteria(&program);
    let got: BTreeMap<String, Vec<Port>> = state
        .criteria
        .iter()
        .map(|(k, c)| (k.to_string(), c.remaining.clone()))
        .collect();
    use Port::{Exit, Fail};
    let expected: BTreeMap<String, Vec<Port>> = [
        ("main/0", vec![Exit]),
        ("data/1", vec![Exit]),
        ("print_list/1", vec![Exit]),
        ("print_list_2/1", vec![Exit]),
        ("safe/1", vec![Exit, Fail]),
        ("nodiag/3", vec![Exit, Fail]),
        ("qperm/2", vec![Exit, Exit, Fail]),
        ("qdelete/3", vec![Exit, Exit, Fail]),
        ("queen/2", vec![Exit, Exit, Fail]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    assert_eq!(got, expected);
    assert!(state
        .criteria
        .values()
        .all(|c| c.seen_exit_calls.is_empty()));
}

#[test]
fn queens_first_solution_coverage() {
    let run = common::run_bundled("queens.mlg", AttributeMask::default());
    let program = parse_program(bundled::QUEENS).unwrap();
    let state = foldt(
        source(&run.events),
        &predicate_coverage(generate_pred_criteria(&program)),
    )
    .unwrap()
    .result;
    assert_eq!(
        state.report(),
        "qperm/2: remaining [fail]\nqueen/2: remaining [exit, fail]\nrate: 82.4%"
    );
    assert_eq!(state.initial_ports(), 17);
    assert_eq!(state.remaining_ports(), 3);
}

#[test]
fn call_site_coverage_keys_by_line() {
    let program = parse_program(bundled::CALL_SITES).unwrap();
    let initial = generate_call_site_criteria(&program);
    let keys: Vec<String> = initial.criteria.keys().map(|k| k.to_string()).collect();
    assert_eq!(
        keys,
        ["sites.big:13", "sites.classify:9", "sites.classify:11"]
    );

    let run = common::run_bundled("call_sites.mlg", AttributeMask::none().with_line_number());
    let state = foldt(source(&run.events), &call_site_coverage(initial.clone()))
        .unwrap()
        .result;
    assert_eq!(
        state.report(),
        "sites.big:13: remaining [exit]\nrate: 75.0%"
    );

    let run = common::run_bundled("call_sites.mlg", AttributeMask::none());
    assert!(matches!(
        foldt(source(&run.events), &call_site_coverage(initial)),
        Err(FoldError::Monitor(MonitorError::AttributeUnavailable(_)))
    ));
}
