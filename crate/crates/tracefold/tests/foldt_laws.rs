mod common;

use common::{reference, Probe};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracefold::event::Event;
use tracefold::foldt::{foldt, product, Session, StopReason};
use tracefold::trace_io::VecSource;

fn probe_strategy(stopping: bool) -> impl Strategy<Value = Probe> {
    let refuse = if stopping {
        (2u64..12, 0u64..12, 0usize..20)
            .prop_map(|(m, r, a)| Some((m, r % m, a)))
            .boxed()
    } else {
        Just(None).boxed()
    };
    (proptest::array::uniform12(0u64..5), refuse)
        .prop_map(|(weights, refuse)| Probe { weights, refuse })
}

fn trace(seed: u64) -> Vec<Event> {
    common::synthetic_trace(&mut ChaCha8Rng::seed_from_u64(seed), 200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn single_run_matches_the_definition(seed in any::<u64>(), probe in probe_strategy(true)) {
        let events = trace(seed);
        let o = foldt(VecSource::new(events.clone()), &probe).unwrap();
        let (expected, refused, _) = reference(&events, 0, &probe);
        prop_assert_eq!(&o.result, &expected);
        prop_assert!(o.result.finished);
        prop_assert_eq!(o.events_consumed as usize, expected.chronos.len());
        match (o.stop_reason, refused) {
            (StopReason::EndOfTrace, None) => prop_assert_eq!(expected.chronos.len(), events.len()),
            (StopReason::CollectFailed { chrono }, Some(i)) => prop_assert_eq!(chrono, events[i].chrono),
            (got, want) => prop_assert!(false, "stop {:?} but refused index {:?}", got, want),
        }
    }

    #[test]
    fn resumed_runs_partition_the_trace(seed in any::<u64>(), probe in probe_strategy(true)) {
        let events = trace(seed);
        let mut session = Session::new(VecSource::new(events.clone()));
        let outcomes = session.run_to_completion(&probe, |_| {}).unwrap();

        let mut seen = Vec::new();
        let mut start = 0;
        for (k, o) in outcomes.iter().enumerate() {
            let (expected, refused, next) = reference(&events, start, &probe);
            prop_assert_eq!(&o.result, &expected);
            seen.extend(o.result.chronos.iter().copied());
            match o.stop_reason {
                StopReason::CollectFailed { chrono } => {
                    prop_assert_eq!(Some(chrono), refused.map(|i| events[i].chrono));
                    seen.push(chrono);
                }
                StopReason::EndOfTrace => {
                    prop_assert_eq!(k, outcomes.len() - 1);
                    prop_assert_eq!(refused, None);
                }
            }
            start = next;
        }
        seen.sort_unstable();
        let all: Vec<u64> = (1..=events.len() as u64).collect();
        prop_assert_eq!(seen, all);
        prop_assert!(outcomes.last().unwrap().ended());
    }

    #[test]
    fn product_of_non_stopping_monitors_is_componentwise(
        seed in any::<u64>(),
        a in probe_strategy(false),
        b in probe_strategy(false),
    ) {
        let events = trace(seed);
        let both = foldt(VecSource::new(events.clone()), &product(a.clone(), b.clone())).unwrap();
        let ra = foldt(VecSource::new(events.clone()), &a).unwrap();
        let rb = foldt(VecSource::new(events.clone()), &b).unwrap();
        prop_assert_eq!(both.result, (ra.result, rb.result));
        prop_assert_eq!(both.stop_reason, StopReason::EndOfTrace);
        prop_assert_eq!(both.events_consumed, events.len() as u64);
    }

    #[test]
    fn product_stops_at_the_earlier_refusal(
        seed in any::<u64>(),
        a in probe_strategy(true),
        b in probe_strategy(true),
    ) {
        let events = trace(seed);
        let stop = |o: StopReason| match o {
            StopReason::CollectFailed { chrono } => chrono,
            StopReason::EndOfTrace => u64::MAX,
        };
        let both = foldt(VecSource::new(events.clone()), &product(a.clone(), b.clone())).unwrap();
        let sa = stop(foldt(VecSource::new(events.clone()), &a).unwrap().stop_reason);
        let sb = stop(foldt(VecSource::new(events.clone()), &b).unwrap().stop_reason);
        prop_assert_eq!(stop(both.stop_reason), sa.min(sb));
    }
}

#[test]
fn synthetic_traces_are_well_formed() {
    let mut total = 0;
    for seed in 0..200 {
        let events = trace(seed);
        total += events.len();
        assert!(!events.is_empty() && events.len() <= 200);
        assert!(
            tracefold::microlog::byrd_violations(&events).is_empty(),
            "seed {seed}"
        );
        assert!(
            tracefold::microlog::trace_invariant_violations(&events).is_empty(),
            "seed {seed}"
        );
        let mut stack = vec![tracefold::PredKey::user()];
        for e in &events {
            tracefold::monitors::update_call_stack(&mut stack, e).unwrap();
        }
        assert_eq!(stack.len(), 1, "seed {seed}");
    }
    assert!(
        total / 200 >= 20,
        "traces too short on average: {}",
        total / 200
    );
}
