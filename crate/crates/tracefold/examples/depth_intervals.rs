//! Restarts a stopping monitor until the trace ends: one maximal depth per
//! window of 200 events.

use tracefold::foldt::Session;
use tracefold::microlog::{bundled, parse_program, parse_query, Engine, SolveOptions};
use tracefold::monitors::max_depth_interval;
use tracefold::trace_io::VecSource;

fn main() {
    let program = parse_program(bundled::QUEENS).unwrap();
    let query = parse_query(&program, "main").unwrap();
    let mut events = Vec::new();
    Engine::new(program)
        .solve(
            &query,
            &SolveOptions::default(),
            &mut events,
            &mut std::io::sink(),
        )
        .unwrap();

    let mut session = Session::new(VecSource::new(events));
    session
        .run_to_completion(&max_depth_interval(200), |o| {
            println!("{} ({})", o.result, o.stop_reason)
        })
        .unwrap();
}
