//! Records a trace to a file, then replays it through a monitor.

use tracefold::foldt::foldt;
use tracefold::microlog::{bundled, parse_program, parse_query, Engine, SolveOptions};
use tracefold::monitors::port_histogram;
use tracefold::trace_io::{record, replay, AttributeMask, VecSource};

fn main() {
    let program = parse_program(bundled::QDELETE).unwrap();
    let query = parse_query(&program, "qdelete(X, [1,2,3], R)").unwrap();
    let options = SolveOptions {
        mask: AttributeMask::all(),
        max_solutions: None,
        ..SolveOptions::default()
    };
    let mut events = Vec::new();
    Engine::new(program)
        .solve(&query, &options, &mut events, &mut std::io::sink())
        .unwrap();

    let path = std::env::temp_dir().join("qdelete.trace");
    let written = record(VecSource::new(events), &path, options.mask).unwrap();
    println!("wrote {written} events to {}", path.display());
    print!(
        "{}",
        std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .nth(1)
            .unwrap_or_default()
    );
    println!();

    let histogram = foldt(replay(&path).unwrap(), &port_histogram())
        .unwrap()
        .result;
    println!("{histogram}");
    std::fs::remove_file(&path).ok();
}
