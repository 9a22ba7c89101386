//! Prints the dynamic call graph and the counted control flow graph of the
//! queens program in DOT format.

use tracefold::foldt::foldt;
use tracefold::microlog::{bundled, parse_program, parse_query, Engine, SolveOptions};
use tracefold::monitors::{control_flow_graph, dynamic_call_graph};
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

    let calls = foldt(VecSource::new(events.clone()), &dynamic_call_graph()).unwrap();
    print!("{}", calls.result.to_dot("call_graph"));
    let flow = foldt(VecSource::new(events), &control_flow_graph(true)).unwrap();
    print!("{}", flow.result.to_dot("cfg"));
}
