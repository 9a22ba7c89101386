//! A monitor built from closures that stops the fold at the first call
//! deeper than a limit.

use tracefold::event::{Event, Port};
use tracefold::foldt::{foldt, from_fns, MonitorError, StopReason};
use tracefold::microlog::{bundled, parse_program, parse_query, Engine, SolveOptions};

const LIMIT: u32 = 6;

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

    let calls_seen = from_fns(
        Vec::new,
        |e: &Event, names: &mut Vec<String>| {
            if e.port == Port::Call {
                names.push(e.proc.name.clone());
            }
            Ok(())
        },
        |names| names,
    )
    .with_guard(|e: &Event, _: &Vec<String>| -> Result<bool, MonitorError> {
        Ok(!(e.port == Port::Call && e.depth > LIMIT))
    });

    let outcome = foldt(tracefold::trace_io::VecSource::new(events), &calls_seen).unwrap();
    match outcome.stop_reason {
        StopReason::CollectFailed { chrono } => {
            println!("first call deeper than {LIMIT} at chrono {chrono}")
        }
        StopReason::EndOfTrace => println!("no call deeper than {LIMIT}"),
    }
    println!("calls before it: {}", outcome.result.join(" "));
}
