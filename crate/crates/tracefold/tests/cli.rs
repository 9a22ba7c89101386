use std::path::Path;
use std::process::{Command, Output};

fn tracefold(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracefold"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_prints_program_output_then_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = tracefold(
        &["run", "queens.mlg", "--monitor", "count_calls"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("A 5 queens solution is [1, 3, 5, 2, 4]"));
    assert!(lines.next().unwrap().starts_with("run 1: "));
    assert!(lines.next().unwrap().starts_with("count_calls: "));
}

#[test]
fn recorded_runs_replay_to_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--monitor",
        "port_histogram",
        "--monitor",
        "max_depth_interval:300",
    ];
    let mut run = vec![
        "run",
        "queens.mlg",
        "--record",
        "q.trace",
        "--out",
        "live.txt",
    ];
    run.extend(args);
    assert_eq!(tracefold(&run, dir.path()).status.code(), Some(0));
    let mut replay = vec!["replay", "q.trace", "--out", "replayed.txt"];
    replay.extend(args);
    assert_eq!(tracefold(&replay, dir.path()).status.code(), Some(0));
    let live = std::fs::read_to_string(dir.path().join("live.txt")).unwrap();
    let replayed = std::fs::read_to_string(dir.path().join("replayed.txt")).unwrap();
    assert_eq!(live, replayed);
    assert_eq!(live.matches("run ").count(), 4);
}

#[test]
fn coverage_threshold_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = tracefold(
        &["coverage", "queens.mlg", "--threshold", "0.8"],
        dir.path(),
    );
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).ends_with("rate: 82.4%\n"), "{}", stdout(&ok));

    let low = tracefold(
        &["coverage", "queens.mlg", "--threshold", "0.9"],
        dir.path(),
    );
    assert_eq!(low.status.code(), Some(1));
    assert!(stderr(&low).contains("below the threshold"));

    let sites = tracefold(
        &["coverage", "call_sites.mlg", "--mode", "site"],
        dir.path(),
    );
    assert_eq!(
        stdout(&sites),
        "sites.big:13: remaining [exit]\nrate: 75.0%\n"
    );
}

#[test]
fn coverage_of_a_recorded_trace() {
    let dir = tempfile::tempdir().unwrap();
    let rec = tracefold(
        &[
            "run",
            "call_sites.mlg",
            "--record",
            "s.trace",
            "--mask",
            "line_number",
        ],
        dir.path(),
    );
    assert_eq!(rec.status.code(), Some(0), "{}", stderr(&rec));
    let o = tracefold(
        &[
            "coverage",
            "call_sites.mlg",
            "--mode",
            "site",
            "--trace",
            "s.trace",
        ],
        dir.path(),
    );
    assert_eq!(stdout(&o), "sites.big:13: remaining [exit]\nrate: 75.0%\n");

    // a trace recorded without line numbers cannot give call-site coverage
    tracefold(
        &["run", "call_sites.mlg", "--record", "bare.trace"],
        dir.path(),
    );
    let o = tracefold(
        &[
            "coverage",
            "call_sites.mlg",
            "--mode",
            "site",
            "--trace",
            "bare.trace",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line_number"), "{}", stderr(&o));
}

#[test]
fn graph_output_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = tracefold(&["graph", "queens.mlg", "--kind", "callgraph"], dir.path());
    let b = tracefold(&["graph", "queens.mlg", "--kind", "callgraph"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/queens_call_graph.dot");
    assert_eq!(stdout(&a), std::fs::read_to_string(golden).unwrap());
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.mlg"), "p :- q.\n").unwrap();
    let cases: &[&[&str]] = &[
        &["run", "queens.mlg"],
        &["run", "queens.mlg", "--monitor", "nonesuch"],
        &["run", "missing.mlg", "--monitor", "count_calls"],
        &["run", "bad.mlg", "--monitor", "count_calls"],
        &[
            "run",
            "queens.mlg",
            "--monitor",
            "count_calls",
            "--mask",
            "colour",
        ],
        &[
            "run",
            "queens.mlg",
            "--monitor",
            "count_calls",
            "--filter",
            "queens=loud",
        ],
        &[
            "run",
            "queens.mlg",
            "--monitor",
            "count_calls",
            "--max-solutions",
            "many",
        ],
        &["replay", "missing.trace", "--monitor", "count_calls"],
        &["coverage", "queens.mlg", "--threshold", "2"],
        &["bench", "queens.mlg", "--min-duration", "0"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = tracefold(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty(), "{args:?}");
    }
}

#[test]
fn broken_trace_files_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        tracefold(&["run", "qdelete.mlg", "--record", "t.trace"], dir.path())
            .status
            .code(),
        Some(0)
    );
    let text = std::fs::read_to_string(dir.path().join("t.trace")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(1, 2);
    std::fs::write(dir.path().join("swapped.trace"), lines.join("\n") + "\n").unwrap();
    std::fs::write(
        dir.path().join("garbage.trace"),
        "{\"format\":\"tracefold-trace\",\"version\":1,\"mask\":[]}\nnot json\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("future.trace"),
        "{\"format\":\"tracefold-trace\",\"version\":99,\"mask\":[]}\n",
    )
    .unwrap();
    for file in ["swapped.trace", "garbage.trace", "future.trace"] {
        let o = tracefold(&["replay", file, "--monitor", "count_calls"], dir.path());
        assert_eq!(o.status.code(), Some(3), "{file}: {}", stderr(&o));
    }
}

#[test]
fn program_errors_are_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let o = tracefold(
        &["run", "errors.mlg", "--monitor", "port_histogram"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(stdout(&o).contains("exception: 3"), "{}", stdout(&o));
}

#[test]
fn queries_with_variables_print_their_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let o = tracefold(
        &[
            "run",
            "qdelete.mlg",
            "--query",
            "qdelete(X, [a,b], R)",
            "--max-solutions",
            "all",
            "--monitor",
            "count_calls",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(
        out.contains("solution: X = a, R = [b]\nsolution: X = b, R = [a]\n"),
        "{out}"
    );
}

#[test]
fn bench_renders_every_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = tracefold(
        &["bench", "qdelete.mlg", "--min-duration", "0.05"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let header = out.lines().next().unwrap();
    for col in [
        "events",
        "t_prog",
        "t_trace",
        "t_foldt",
        "t_monitor",
        "r_t",
        "r_f",
        "r_m",
    ] {
        assert!(header.contains(col), "{header}");
    }
    assert!(out.lines().nth(1).unwrap().starts_with("qdelete"));
    assert!(out.contains("interface cost"));
}
