use std::fmt;
use std::io;
use std::time::{Duration, Instant};

use crate::foldt::{EmptyMonitor, FoldSink, Monitor};
use crate::microlog::{Engine, Program, Query, SolveOptions};
use crate::monitors;
use crate::trace_io::{AttributeMask, CountingSink, Discard, EventFilter, TraceSink};

use super::CliError;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Minimal cumulative wall time spent on the measurements of a program.
    pub min_duration: Duration,
    pub min_rounds: usize,
    /// A single sample is made of enough executions to last this long.
    pub sample_target: Duration,
    /// Registry name of the monitor timed as `t_monitor`.
    pub monitor: String,
    pub mask: AttributeMask,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            min_duration: Duration::from_secs(2),
            min_rounds: 5,
            sample_target: Duration::from_millis(2),
            monitor: "call_graph".into(),
            mask: AttributeMask::default(),
        }
    }
}

/// Median time of one execution for each level of the measurement ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub program: String,
    pub monitor: String,
    pub events: u64,
    pub t_prog: Duration,
    pub t_trace: Duration,
    pub t_foldt: Duration,
    pub t_monitor: Duration,
    pub rounds: usize,
    /// Executions per sample.
    pub batch: u32,
}

fn ratio(a: Duration, b: Duration) -> f64 {
    a.as_secs_f64() / b.as_secs_f64().max(f64::MIN_POSITIVE)
}

impl BenchRow {
    pub fn r_t(&self) -> f64 {
        ratio(self.t_trace, self.t_prog)
    }

    pub fn r_f(&self) -> f64 {
        ratio(self.t_foldt, self.t_prog)
    }

    pub fn r_m(&self) -> f64 {
        ratio(self.t_monitor, self.t_prog)
    }

    /// `t_prog <= t_trace <= t_foldt <= t_monitor`, each step allowed to
    /// fall short by `noise` (0.1 for 10%).
    pub fn is_ordered(&self, noise: f64) -> bool {
        let t = [self.t_prog, self.t_trace, self.t_foldt, self.t_monitor];
        t.windows(2)
            .all(|w| w[1].as_secs_f64() >= w[0].as_secs_f64() * (1.0 - noise))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Rows where a single execution was below the timer-friendly sample
    /// length and had to be repeated within each sample.
    pub fn warnings(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| r.batch > 1)
            .map(|r| {
                format!(
                    "{}: one execution is shorter than a timer sample; each sample repeats it {} times",
                    r.program, r.batch
                )
            })
            .collect()
    }
}

fn us(d: Duration) -> String {
    format!("{:.1}", d.as_secs_f64() * 1e6)
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>8} {:>10} {:>10} {:>10} {:>10} {:>6} {:>6} {:>6} {:>6}  monitor",
            "program",
            "events",
            "t_prog",
            "t_trace",
            "t_foldt",
            "t_monitor",
            "r_t",
            "r_f",
            "r_m",
            "rounds"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:>8} {:>10} {:>10} {:>10} {:>10} {:>6.2} {:>6.2} {:>6.2} {:>6}  {}",
                r.program,
                r.events,
                us(r.t_prog),
                us(r.t_trace),
                us(r.t_foldt),
                us(r.t_monitor),
                r.r_t(),
                r.r_f(),
                r.r_m(),
                r.rounds,
                r.monitor
            )?;
        }
        writeln!(
            f,
            "times are medians of one execution in microseconds; r_x = t_x / t_prog"
        )?;
        writeln!(
            f,
            "no tracer-to-monitor interface cost is measured: monitors are called as plain procedures in the tracer's thread"
        )
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

/// Times the program with tracing disabled, with events discarded, folded
/// by the empty monitor and folded by `config.monitor`.
pub fn bench_program(
    name: &str,
    program: Program,
    query: &Query,
    config: &BenchConfig,
) -> Result<BenchRow, CliError> {
    let monitor = monitors::lookup(&config.monitor, Some(&program))?;
    let engine = Engine::new(program);
    let untraced = SolveOptions {
        mask: AttributeMask::none(),
        filter: EventFilter::nothing(),
        max_solutions: Some(1),
    };
    let traced = SolveOptions {
        mask: config.mask,
        filter: EventFilter::all(),
        max_solutions: Some(1),
    };
    let exec = |options: &SolveOptions, sink: &mut dyn TraceSink| -> Result<(), CliError> {
        engine
            .solve(query, options, sink, &mut io::sink())
            .map(drop)
            .map_err(|e| CliError::Usage(format!("{name}: {e}")))
    };

    let mut counter = CountingSink(0);
    exec(&traced, &mut counter)?;
    let events = counter.0;

    let run_prog = || exec(&untraced, &mut Discard);
    let run_trace = || exec(&traced, &mut Discard);
    let run_foldt = || folded(&EmptyMonitor, |s| exec(&traced, s));
    let run_monitor = || folded(&monitor, |s| exec(&traced, s));

    let start = Instant::now();
    run_prog()?;
    let once = start.elapsed();
    let batch = if once >= config.sample_target {
        1
    } else {
        let per = once.max(Duration::from_nanos(100));
        (config.sample_target.as_nanos() / per.as_nanos()).clamp(1, 1_000_000) as u32
    };

    let time = |f: &dyn Fn() -> Result<(), CliError>| -> Result<Duration, CliError> {
        let t = Instant::now();
        for _ in 0..batch {
            f()?;
        }
        Ok(t.elapsed() / batch)
    };

    let mut samples: [Vec<Duration>; 4] = Default::default();
    let runs: [&dyn Fn() -> Result<(), CliError>; 4] =
        [&run_prog, &run_trace, &run_foldt, &run_monitor];
    let began = Instant::now();
    while samples[0].len() < config.min_rounds || began.elapsed() < config.min_duration {
        for (s, f) in samples.iter_mut().zip(runs) {
            s.push(time(f)?);
        }
    }
    let rounds = samples[0].len();
    let [p, t, f, m] = samples.map(median);
    Ok(BenchRow {
        program: name.to_string(),
        monitor: config.monitor.clone(),
        events,
        t_prog: p,
        t_trace: t,
        t_foldt: f,
        t_monitor: m,
        rounds,
        batch,
    })
}

fn folded<M: Monitor>(
    monitor: &M,
    run: impl FnOnce(&mut dyn TraceSink) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut sink = FoldSink::new(monitor);
    run(&mut sink)?;
    sink.finish()?;
    Ok(())
}
