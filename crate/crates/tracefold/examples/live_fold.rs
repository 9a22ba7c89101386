//! Folds two monitors at once over a live trace: the interpreter runs on
//! its own thread while the fold pulls events.

use std::sync::Arc;

use tracefold::foldt::{foldt, product};
use tracefold::microlog::{bundled, parse_program, parse_query, Engine, LiveSource, SolveOptions};
use tracefold::monitors::{count_calls, depth_histogram};

fn main() {
    let program = parse_program(bundled::QSORT).unwrap();
    let query = parse_query(&program, "main").unwrap();
    let live = LiveSource::spawn(
        Arc::new(Engine::new(program)),
        query,
        SolveOptions::default(),
        Box::new(std::io::stdout()),
    );

    let outcome = foldt(live, &product(count_calls(), depth_histogram())).unwrap();
    let (calls, depths) = outcome.result;
    println!("{calls} calls over {} events", outcome.events_consumed);
    println!("{depths}");
}
