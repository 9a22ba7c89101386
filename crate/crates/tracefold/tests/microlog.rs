mod common;

use std::ops::ControlFlow;

use tracefold::event::{Event, Port, Term};
use tracefold::microlog::{
    bundled, byrd_violations, determinism_warnings, parse_program, parse_query,
    trace_invariant_violations, Engine, SolveError, SolveOptions, SolveOutcome,
};
use tracefold::trace_io::{AttributeMask, EventFilter, TraceSink};

struct Outcome {
    events: Vec<Event>,
    output: String,
    result: Result<SolveOutcome, SolveError>,
}

fn solve(src: &str, query: &str, options: SolveOptions) -> Outcome {
    let program = parse_program(src).unwrap();
    let query = parse_query(&program, query).unwrap();
    let mut events = Vec::new();
    let mut output = Vec::new();
    let result = Engine::new(program).solve(&query, &options, &mut events, &mut output);
    Outcome {
        events,
        output: String::from_utf8(output).unwrap(),
        result,
    }
}

fn all_solutions() -> SolveOptions {
    SolveOptions {
        max_solutions: None,
        ..SolveOptions::default()
    }
}

fn ints(t: &Term) -> Vec<i64> {
    match t {
        Term::List(items) => items
            .iter()
            .map(|i| match i {
                Term::Int(n) => *n,
                other => panic!("not an int: {other}"),
            })
            .collect(),
        other => panic!("not a list: {other}"),
    }
}

/// Permutations of 1..=n in lexicographic order that place no two queens on
/// a diagonal.
fn queens_brute_force(n: i64) -> Vec<Vec<i64>> {
    fn go(n: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() as i64 == n {
            out.push(cur.clone());
            return;
        }
        for v in 1..=n {
            if cur.contains(&v) {
                continue;
            }
            cur.push(v);
            go(n, cur, out);
            cur.pop();
        }
    }
    let mut perms = Vec::new();
    go(n, &mut Vec::new(), &mut perms);
    perms
        .into_iter()
        .filter(|p| {
            (0..p.len()).all(|i| (i + 1..p.len()).all(|j| (p[i] - p[j]).abs() != (j - i) as i64))
        })
        .collect()
}

#[test]
fn queens_prints_its_first_solution() {
    let run = common::run_bundled("queens.mlg", AttributeMask::default());
    assert_eq!(run.output, "A 5 queens solution is [1, 3, 5, 2, 4]\n");
}

#[test]
fn queens_solutions_come_in_permutation_order() {
    let out = solve(bundled::QUEENS, "queen([1,2,3,4,5], Q)", all_solutions());
    let got: Vec<Vec<i64>> = out
        .result
        .unwrap()
        .solutions
        .iter()
        .map(|s| ints(s.get("Q").unwrap()))
        .collect();
    assert_eq!(got, queens_brute_force(5));
    assert_eq!(got.len(), 10);
}

#[test]
fn qsort_sorts_its_data() {
    let data = solve(bundled::QSORT, "data(L)", SolveOptions::default());
    let mut expected = ints(data.result.unwrap().solutions[0].get("L").unwrap());
    assert_eq!(expected.len(), 50);
    expected.sort();

    let sorted = solve(
        bundled::QSORT,
        "data(L), qsort(L, S, [])",
        SolveOptions::default(),
    );
    assert_eq!(
        ints(sorted.result.unwrap().solutions[0].get("S").unwrap()),
        expected
    );

    let run = common::run_bundled("qsort.mlg", AttributeMask::default());
    let printed: Vec<String> = expected.iter().map(i64::to_string).collect();
    assert_eq!(run.output, format!("[{}]\n", printed.join(", ")));
}

#[test]
fn qdelete_enumerates_every_choice() {
    let out = solve(bundled::QDELETE, "qdelete(X, [1,2,3], R)", all_solutions());
    let got: Vec<String> = out
        .result
        .unwrap()
        .solutions
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(
        got,
        [
            "X = 1, R = [2, 3]",
            "X = 2, R = [1, 3]",
            "X = 3, R = [1, 2]"
        ]
    );
    assert!(byrd_violations(&out.events).is_empty());
}

#[test]
fn qdelete_trace_is_the_expected_box_sequence() {
    let out = solve(bundled::QDELETE, "qdelete(X, [1,2], R)", all_solutions());
    let ports: Vec<(u64, u32, &str)> = out
        .events
        .iter()
        .map(|e| (e.call, e.depth, e.port.as_str()))
        .collect();
    // Worked out by hand: first clause exits, the second clause recurses
    // once and the inner call exits, then both boxes run out of clauses.
    assert_eq!(
        ports,
        [
            (1, 1, "call"),
            (1, 1, "exit"),
            (1, 1, "redo"),
            (2, 2, "call"),
            (2, 2, "exit"),
            (1, 1, "exit"),
            (1, 1, "redo"),
            (2, 2, "redo"),
            (3, 3, "call"),
            (3, 3, "fail"),
            (2, 2, "fail"),
            (1, 1, "fail"),
        ]
    );
    let chronos: Vec<u64> = out.events.iter().map(|e| e.chrono).collect();
    assert_eq!(chronos, (1..=12).collect::<Vec<_>>());
}

#[test]
fn bundled_traces_follow_the_port_automaton() {
    for file in common::bundled_files() {
        let run = common::run_bundled(file, AttributeMask::all());
        assert!(!run.events.is_empty(), "{file}");
        assert_eq!(byrd_violations(&run.events), Vec::<String>::new(), "{file}");
        assert_eq!(
            trace_invariant_violations(&run.events),
            Vec::<String>::new(),
            "{file}"
        );
        let warnings: Vec<String> = determinism_warnings(&run.events)
            .iter()
            .map(|w| w.to_string())
            .collect();
        assert_eq!(warnings, Vec::<String>::new(), "{file}");
    }
}

#[test]
fn event_counts_do_not_vary_between_runs() {
    for file in common::bundled_files() {
        let counts: Vec<usize> = (0..5)
            .map(|_| {
                common::run_bundled(file, AttributeMask::default())
                    .events
                    .len()
            })
            .collect();
        assert!(
            counts.windows(2).all(|w| w[0] == w[1]),
            "{file}: {counts:?}"
        );
    }
}

#[test]
fn runtime_errors_unwind_with_exception_events() {
    let out = solve(bundled::ERRORS, "main", SolveOptions::default());
    assert_eq!(out.output, "before\n");
    match out.result {
        Err(SolveError::Runtime { pred, message, .. }) => {
            assert_eq!(pred.to_string(), "is/2");
            assert!(message.contains("instantiated"), "{message}");
        }
        other => panic!("expected a runtime error, got {other:?}"),
    }
    let exceptions: Vec<String> = out
        .events
        .iter()
        .filter(|e| e.port == Port::Exception)
        .map(|e| e.proc.name.clone())
        .collect();
    assert_eq!(exceptions, ["is", "step", "main"]);
    assert!(byrd_violations(&out.events).is_empty());
}

#[test]
fn filtering_keeps_chronos_of_the_full_trace() {
    let full = common::run_bundled("queens.mlg", AttributeMask::default()).events;
    let filters = [
        "queens=external",
        "builtin=none",
        "*=call+exit",
        "queens=none,builtin=external",
    ];
    for spec in filters {
        let filter = EventFilter::parse_specs([spec]).unwrap();
        let options = SolveOptions {
            filter: filter.clone(),
            ..SolveOptions::default()
        };
        let out = solve(bundled::QUEENS, "main", options);
        let expected: Vec<&Event> = full
            .iter()
            .filter(|e| filter.admits(&e.proc.decl_module, e.port))
            .collect();
        assert_eq!(out.events.iter().collect::<Vec<_>>(), expected, "{spec}");
        assert_eq!(out.output, "A 5 queens solution is [1, 3, 5, 2, 4]\n");
    }
}

#[test]
fn tracing_nothing_still_runs_the_program() {
    let options = SolveOptions {
        filter: EventFilter::nothing(),
        ..SolveOptions::default()
    };
    let out = solve(bundled::QUEENS, "main", options);
    assert!(out.events.is_empty());
    assert_eq!(out.output, "A 5 queens solution is [1, 3, 5, 2, 4]\n");
    let full = common::run_bundled("queens.mlg", AttributeMask::default());
    assert_eq!(
        out.result.unwrap().events_generated,
        full.events.len() as u64
    );
}

#[test]
fn masked_attributes_are_reported_missing() {
    let run = common::run_bundled("qdelete.mlg", AttributeMask::none());
    let e = &run.events[0];
    assert!(e.args().is_err());
    assert!(e.arg_types().is_err());
    assert!(e.local_vars().is_err());
    let err = e.line_number().unwrap_err();
    assert_eq!(err.chrono, e.chrono);

    let run = common::run_bundled("qdelete.mlg", AttributeMask::all());
    let call = run
        .events
        .iter()
        .find(|e| e.proc.name == "qdelete")
        .unwrap();
    assert_eq!(
        call.args().unwrap()[1],
        Term::List(vec![Term::Int(1), Term::Int(2), Term::Int(3)])
    );
    assert_eq!(call.arg_types().unwrap()[1], "list(int)");
    assert_eq!(call.line_number().unwrap(), Some(7));
    assert_eq!(run.events[0].line_number().unwrap(), None);
}

#[test]
fn fail_events_show_the_arguments_of_the_call() {
    let out = solve(
        bundled::QDELETE,
        "qdelete(X, [1,2], R)",
        SolveOptions {
            mask: AttributeMask::all(),
            max_solutions: None,
            ..SolveOptions::default()
        },
    );
    let first_call = &out.events[0];
    let last_fail = out.events.last().unwrap();
    assert_eq!(last_fail.port, Port::Fail);
    assert_eq!(last_fail.call, first_call.call);
    assert_eq!(last_fail.args, first_call.args);
}

#[test]
fn call_sites_carry_source_lines() {
    let run = common::run_bundled("call_sites.mlg", AttributeMask::none().with_line_number());
    let mut lines: Vec<u32> = run
        .events
        .iter()
        .filter(|e| e.port == Port::Call && e.proc.name == "classify")
        .map(|e| e.line_number().unwrap().unwrap())
        .collect();
    lines.dedup();
    let source_lines: Vec<u32> = bundled::CALL_SITES
        .lines()
        .enumerate()
        .filter(|(_, l)| l.trim_start().starts_with("classify(") && !l.contains(":-"))
        .map(|(i, _)| i as u32 + 1)
        .collect();
    assert_eq!(lines, source_lines);
}

struct StopAfter(usize, Vec<Event>);

impl TraceSink for StopAfter {
    fn accept(&mut self, event: Event) -> ControlFlow<()> {
        self.1.push(event);
        if self.1.len() >= self.0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    }
}

#[test]
fn a_sink_can_halt_the_interpreter() {
    let program = parse_program(bundled::QUEENS).unwrap();
    let query = parse_query(&program, "main").unwrap();
    let mut sink = StopAfter(10, Vec::new());
    let mut out = Vec::new();
    let o = Engine::new(program)
        .solve(&query, &SolveOptions::default(), &mut sink, &mut out)
        .unwrap();
    assert!(o.halted);
    assert_eq!(sink.1.len(), 10);
    assert!(out.is_empty());
}

#[test]
fn parse_errors_point_at_the_source() {
    let err = parse_program("p(X) :- q(X).\n").unwrap_err();
    assert!(err.to_string().contains("q/1"), "{err}");
    let err = parse_program("p :- !.\n").unwrap_err();
    assert!(err.to_string().contains("1"), "{err}");
    let err = parse_program("p(X :- true.\n").unwrap_err();
    assert!(err.to_string().starts_with("1:"), "{err}");
}
