//! Measures the cost of tracing, folding and monitoring the qsort program.

use std::time::Duration;

use tracefold::cli::{bench_program, BenchConfig, BenchReport};
use tracefold::microlog::{bundled, parse_program, parse_query};

fn main() {
    let program = parse_program(bundled::QSORT).unwrap();
    let query = parse_query(&program, "main").unwrap();
    let config = BenchConfig {
        min_duration: Duration::from_millis(500),
        ..BenchConfig::default()
    };
    let row = bench_program("qsort", program, &query, &config).unwrap();
    print!("{}", BenchReport { rows: vec![row] });
}
