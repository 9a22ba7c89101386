//! Predicate coverage of the queens program and call-site coverage of the
//! call-site demo.

use tracefold::foldt::foldt;
use tracefold::microlog::{bundled, parse_program, parse_query, Engine, Program, SolveOptions};
use tracefold::monitors::{
    call_site_coverage, generate_call_site_criteria, generate_pred_criteria, predicate_coverage,
};
use tracefold::trace_io::{AttributeMask, VecSource};

fn trace(program: &Program, mask: AttributeMask) -> VecSource {
    let query = parse_query(program, "main").unwrap();
    let options = SolveOptions {
        mask,
        ..SolveOptions::default()
    };
    let mut events = Vec::new();
    Engine::new(program.clone())
        .solve(&query, &options, &mut events, &mut std::io::sink())
        .unwrap();
    VecSource::new(events)
}

fn main() {
    let queens = parse_program(bundled::QUEENS).unwrap();
    let monitor = predicate_coverage(generate_pred_criteria(&queens));
    let state = foldt(trace(&queens, AttributeMask::default()), &monitor)
        .unwrap()
        .result;
    println!("{}\n", state.report());

    let sites = parse_program(bundled::CALL_SITES).unwrap();
    let monitor = call_site_coverage(generate_call_site_criteria(&sites));
    let mask = AttributeMask::none().with_line_number();
    let state = foldt(trace(&sites, mask), &monitor).unwrap().result;
    println!("{}", state.report());
}
