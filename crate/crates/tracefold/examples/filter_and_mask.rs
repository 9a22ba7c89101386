//! Event granularity per module and optional attributes: fewer events and
//! lighter events, same program behavior.

use tracefold::microlog::{bundled, parse_program, parse_query, Engine, SolveOptions};
use tracefold::trace_io::{AttributeMask, EventFilter};

fn main() {
    let program = parse_program(bundled::QUEENS).unwrap();
    let query = parse_query(&program, "main").unwrap();
    let engine = Engine::new(program);

    for spec in [
        "*=all",
        "builtin=none",
        "queens=external,builtin=none",
        "*=call",
    ] {
        let options = SolveOptions {
            filter: EventFilter::parse_specs([spec]).unwrap(),
            ..SolveOptions::default()
        };
        let mut events = Vec::new();
        engine
            .solve(&query, &options, &mut events, &mut std::io::sink())
            .unwrap();
        println!("{spec:<30} {} events", events.len());
    }

    let options = SolveOptions {
        mask: AttributeMask::all(),
        ..SolveOptions::default()
    };
    let mut events = Vec::new();
    engine
        .solve(&query, &options, &mut events, &mut std::io::sink())
        .unwrap();
    let e = events.iter().find(|e| e.proc.name == "nodiag").unwrap();
    let args: Vec<String> = e.args().unwrap().iter().map(|t| t.to_string()).collect();
    println!(
        "{}({}) at line {}",
        e.proc.name,
        args.join(", "),
        e.line_number().unwrap().unwrap()
    );
    println!("types {}", e.arg_types().unwrap().join(", "));
    let bare = e.clone().masked(AttributeMask::none());
    println!("without args: {}", bare.args().unwrap_err());
}
