#![allow(dead_code)]

use std::path::PathBuf;

use shadow_arena::cli::{corpus_files, load, Expectation};
use shadow_arena::dynamics::{step, Cell, EventTag, StepResult, Store};
use shadow_arena::typecheck::Term;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub struct Entry {
    pub name: String,
    pub src: String,
    pub expect: Expectation,
}

pub fn corpus() -> Vec<Entry> {
    corpus_files(&corpus_dir())
        .expect("corpus directory")
        .into_iter()
        .map(|path| {
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            let src = std::fs::read_to_string(&path).unwrap();
            let expect = Expectation::parse(&std::fs::read_to_string(path.with_extension("expect")).unwrap())
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            Entry { name, src, expect }
        })
        .collect()
}

/// Lowered terms of the accepted corpus programs.
pub fn positive_terms() -> Vec<(String, Term)> {
    corpus()
        .into_iter()
        .filter(|e| e.expect.reject.is_none())
        .map(|e| {
            let t = load(&e.src, false, e.expect.ext_int).unwrap().unwrap().term;
            (e.name, t)
        })
        .collect()
}

/// Steps `t` to the end, checking that reads, writes and coallocations only
/// touch live cells and that every close kills its whole column at once and
/// for good.
pub fn audit_run(t: &Term, fuel: usize) -> Result<usize, String> {
    let mut store = Store::new();
    let mut term = t.clone();
    let mut closed = Vec::new();
    for n in 0..fuel {
        let before = store.clone();
        match step(&term, &mut store) {
            StepResult::AlreadyValue => return Ok(n),
            StepResult::Stuck(r) => return Err(format!("stuck: {r} at {term}")),
            StepResult::Stepped { term: next, event } => {
                match (event.tag, event.cell) {
                    (EventTag::Deref | EventTag::Assign, Some((l, o))) => {
                        if !matches!(before.get(l, o), Some(Cell::Live(_))) {
                            return Err(format!("({}) touched dead {l}·{o}", event.tag));
                        }
                    }
                    (EventTag::RefAt, Some((l, _))) => {
                        if before.column_killed(l) {
                            return Err(format!("(refat) into killed {l}"));
                        }
                    }
                    (EventTag::Close, Some((l, _))) => {
                        if !store.column_killed(l) {
                            return Err(format!("(close) left live cells in {l}"));
                        }
                        closed.push(l);
                    }
                    _ => {}
                }
                for l in &closed {
                    if !store.column_killed(*l) {
                        return Err(format!("killed {l} came back to life"));
                    }
                }
                term = next;
            }
        }
    }
    Err("fuel exhausted".into())
}
