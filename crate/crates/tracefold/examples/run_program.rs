//! Runs the bundled 5 queens program and prints what it wrote and how many
//! events it produced.

use tracefold::microlog::{bundled, parse_program, parse_query, Engine, SolveOptions};
use tracefold::trace_io::CountingSink;

fn main() {
    let program = parse_program(bundled::QUEENS).expect("bundled program parses");
    let query = parse_query(&program, "main").unwrap();
    let engine = Engine::new(program);

    let mut events = CountingSink(0);
    let mut output = Vec::new();
    engine
        .solve(&query, &SolveOptions::default(), &mut events, &mut output)
        .expect("queens runs");
    print!("{}", String::from_utf8_lossy(&output));
    println!("{} events", events.0);
}
