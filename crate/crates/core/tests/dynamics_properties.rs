mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;

use common::positive_terms;
use shadow_arena::dynamics::{eval, local_locations, step, Cell, EventTag, Outcome, StepResult, Store};
use shadow_arena::meta::enumerate_small_terms;
use shadow_arena::qualifiers::Loc;
use shadow_arena::subtyping::TypingEnv;
use shadow_arena::typecheck::{check_program, elaborate_program, Term};

const FUEL: u64 = 10_000;

/// Elaborated accepted programs: the corpus and the enumerated small terms.
fn programs() -> &'static [Term] {
    static PROGRAMS: OnceLock<Vec<Term>> = OnceLock::new();
    PROGRAMS.get_or_init(|| {
        let small = enumerate_small_terms(4, &TypingEnv::new()).into_iter().filter(|t| check_program(t).is_accepted());
        positive_terms()
            .into_iter()
            .map(|(_, t)| t)
            .chain(small)
            .map(|t| elaborate_program(&t).expect("accepted").0)
            .collect()
    })
}

fn program() -> impl Strategy<Value = &'static Term> {
    (0..programs().len()).prop_map(|i| &programs()[i])
}

fn killed_cells(s: &Store) -> BTreeSet<(Loc, u32)> {
    s.cells().filter(|(_, c)| !c.is_live()).map(|(k, _)| k).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn evaluation_is_deterministic(t in program()) {
        let (a, b) = (eval(t, FUEL), eval(t, FUEL));
        prop_assert_eq!(&a.store, &b.store);
        let tags = |r: &shadow_arena::dynamics::EvalResult| r.trace.iter().map(|e| (e.tag, e.cell)).collect::<Vec<_>>();
        prop_assert_eq!(tags(&a), tags(&b));
        match (&a.outcome, &b.outcome) {
            (Outcome::Value(x), Outcome::Value(y)) => prop_assert_eq!(x, y),
            other => prop_assert!(false, "not a value: {:?}", other),
        }
    }

    #[test]
    fn the_store_only_grows_and_the_dead_stay_dead(t in program()) {
        let mut store = Store::new();
        let mut term = t.clone();
        loop {
            let before = store.clone();
            match step(&term, &mut store) {
                StepResult::AlreadyValue => break,
                StepResult::Stuck(r) => prop_assert!(false, "stuck: {}", r),
                StepResult::Stepped { term: next, event } => {
                    let old: BTreeSet<_> = before.cells().map(|(k, _)| k).collect();
                    let new: BTreeSet<_> = store.cells().map(|(k, _)| k).collect();
                    prop_assert!(old.is_subset(&new));
                    prop_assert!(killed_cells(&before).is_subset(&killed_cells(&store)));
                    let added = new.len() - old.len();
                    let allocating = matches!(event.tag, EventTag::Ref | EventTag::RefAt | EventTag::With);
                    prop_assert_eq!(added, usize::from(allocating), "{}", event.tag);
                    if event.tag == EventTag::Close {
                        let (l, _) = event.cell.expect("close names its column");
                        let column: Vec<_> = store.column(l).map(|(o, c)| (o, c.clone())).collect();
                        prop_assert!(column.iter().all(|(_, c)| *c == Cell::Killed));
                        prop_assert_eq!(store.killed_count() - before.killed_count(), before.column(l).filter(|(_, c)| c.is_live()).count());
                    } else {
                        prop_assert_eq!(killed_cells(&before), killed_cells(&store));
                    }
                    term = next;
                }
            }
        }
    }

    #[test]
    fn results_hold_no_killed_or_scoped_locations(t in program()) {
        let run = eval(t, FUEL);
        let Outcome::Value(v) = &run.outcome else { return Err(TestCaseError::fail("no value")) };
        prop_assert!(local_locations(v).is_empty());
        for l in &v.value_qualifier().locs {
            prop_assert!(!run.store.column_killed(*l), "{} points into killed {}", v, l);
        }
    }
}

#[test]
fn every_accepted_program_reaches_a_value() {
    for t in programs() {
        let run = eval(t, FUEL);
        assert!(matches!(run.outcome, Outcome::Value(_)), "{t}: {:?}", run.outcome);
    }
}
