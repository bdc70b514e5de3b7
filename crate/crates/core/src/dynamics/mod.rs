//! Small-step call-by-value evaluation over the two-dimensional store.

mod store;

pub use store::{Cell, Store};

use std::collections::BTreeSet;
use std::fmt;

use crate::qualifiers::{Loc, Name};
use crate::subtyping::{QType, Subst};
use crate::typecheck::{Const, Term, TermKind, TermSubst};

/// The reduction rule applied by a step.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum EventTag {
    Beta,
    Ref,
    RefAt,
    Deref,
    Assign,
    BetaT,
    With,
    Close,
    Prim,
    IfZero,
}

impl fmt::Display for EventTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventTag::Beta => "β",
            EventTag::Ref => "ref",
            EventTag::RefAt => "refat",
            EventTag::Deref => "deref",
            EventTag::Assign => "assign",
            EventTag::BetaT => "βT",
            EventTag::With => "with",
            EventTag::Close => "close",
            EventTag::Prim => "prim",
            EventTag::IfZero => "ifz",
        })
    }
}

/// What a step did: the rule, the contracted redex, and the store cell it
/// allocated, read, wrote or (for `close`) the column it killed.
#[derive(Clone, Debug)]
pub struct Event {
    pub tag: EventTag,
    pub redex: Term,
    pub cell: Option<(Loc, u32)>,
    /// Element annotation of an allocating redex.
    pub elem: Option<QType>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StuckReason {
    UseAfterFree(Loc, u32),
    UnboundCell(Loc, u32),
    NotAFunction,
    NotATypeFunction,
    NotARef,
    NotAnInt,
    FreeVariable(Name),
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StuckReason::UseAfterFree(l, o) => write!(f, "UseAfterFree {l}·{o}"),
            StuckReason::UnboundCell(l, o) => write!(f, "UnboundCell {l}·{o}"),
            StuckReason::NotAFunction => f.write_str("NotAFunction"),
            StuckReason::NotATypeFunction => f.write_str("NotATypeFunction"),
            StuckReason::NotARef => f.write_str("NotARef"),
            StuckReason::NotAnInt => f.write_str("NotAnInt"),
            StuckReason::FreeVariable(x) => write!(f, "FreeVariable {x}"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum StepResult {
    Stepped { term: Term, event: Event },
    AlreadyValue,
    Stuck(StuckReason),
}

/// Evaluator switches. The only knob is a deliberately broken variant used
/// to show that the metatheory harness notices a missing bulk kill.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepConfig {
    #[cfg(feature = "mutants")]
    pub skip_bulk_kill: bool,
}

impl StepConfig {
    fn kills(&self) -> bool {
        #[cfg(feature = "mutants")]
        {
            !self.skip_bulk_kill
        }
        #[cfg(not(feature = "mutants"))]
        {
            true
        }
    }
}

/// One reduction step. The store is only modified when a step happens.
pub fn step(t: &Term, store: &mut Store) -> StepResult {
    step_with(t, store, StepConfig::default())
}

pub fn step_with(t: &Term, store: &mut Store, cfg: StepConfig) -> StepResult {
    if t.is_value() {
        return StepResult::AlreadyValue;
    }
    step_in(t, store, cfg)
}

fn congruence(res: StepResult, rebuild: impl FnOnce(Term) -> TermKind, span: crate::typecheck::Span) -> StepResult {
    match res {
        StepResult::Stepped { term, event } => {
            StepResult::Stepped { term: Term::new(rebuild(term), span), event }
        }
        other => other,
    }
}

fn stepped(term: Term, tag: EventTag, redex: &Term) -> StepResult {
    StepResult::Stepped { term, event: Event { tag, redex: redex.clone(), cell: None, elem: None } }
}

fn stepped_cell(
    term: Term,
    tag: EventTag,
    redex: &Term,
    cell: (Loc, u32),
    elem: Option<QType>,
) -> StepResult {
    StepResult::Stepped { term, event: Event { tag, redex: redex.clone(), cell: Some(cell), elem } }
}

fn step_in(t: &Term, store: &mut Store, cfg: StepConfig) -> StepResult {
    use TermKind::*;
    let span = t.span;
    match &t.kind {
        Const(_) | Abs(_) | TAbs(_) | Loc(..) => StepResult::AlreadyValue,
        Var(x) => StepResult::Stuck(StuckReason::FreeVariable(x.clone())),
        App(f, a) => {
            if !f.is_value() {
                let a = a.clone();
                return congruence(step_in(f, store, cfg), |f| App(Box::new(f), a), span);
            }
            if !a.is_value() {
                let f = f.clone();
                return congruence(step_in(a, store, cfg), |a| App(f, Box::new(a)), span);
            }
            let Abs(lam) = &f.kind else {
                return StepResult::Stuck(StuckReason::NotAFunction);
            };
            let mut s = TermSubst::default();
            s.push_value(&lam.param, a);
            s.push_value(&lam.self_name, f);
            stepped(lam.body.subst(&s), EventTag::Beta, t)
        }
        TApp(f, arg) => {
            if !f.is_value() {
                let arg = arg.clone();
                return congruence(step_in(f, store, cfg), |f| TApp(Box::new(f), arg), span);
            }
            let TAbs(lam) = &f.kind else {
                return StepResult::Stuck(StuckReason::NotATypeFunction);
            };
            let s = TermSubst {
                terms: vec![(lam.self_name.clone(), (**f).clone())],
                types: Subst {
                    qvars: vec![
                        (lam.qvar.clone(), arg.qual.clone()),
                        (lam.self_name.clone(), lam.capture.clone()),
                    ],
                    tvars: vec![(lam.tvar.clone(), arg.ty.clone())],
                },
            };
            stepped(lam.body.subst(&s), EventTag::BetaT, t)
        }
        RefNew { init, elem } => {
            if !init.is_value() {
                let elem = elem.clone();
                return congruence(
                    step_in(init, store, cfg),
                    |i| RefNew { init: Box::new(i), elem },
                    span,
                );
            }
            let l = store.alloc_fresh((**init).clone());
            stepped_cell(Term::loc(l, 0).at(span), EventTag::Ref, t, (l, 0), elem.clone())
        }
        RefAt { init, proxy, elem } => {
            // The proxy is evaluated before the referent.
            if !proxy.is_value() {
                let (init, elem) = (init.clone(), elem.clone());
                return congruence(
                    step_in(proxy, store, cfg),
                    |p| RefAt { init, proxy: Box::new(p), elem },
                    span,
                );
            }
            if !init.is_value() {
                let (proxy, elem) = (proxy.clone(), elem.clone());
                return congruence(
                    step_in(init, store, cfg),
                    |i| RefAt { init: Box::new(i), proxy, elem },
                    span,
                );
            }
            let Loc(l, o) = proxy.kind else {
                return StepResult::Stuck(StuckReason::NotARef);
            };
            match store.get(l, o) {
                None => StepResult::Stuck(StuckReason::UnboundCell(l, o)),
                Some(Cell::Killed) => StepResult::Stuck(StuckReason::UseAfterFree(l, o)),
                Some(Cell::Live(_)) => {
                    let o2 = store.alloc_at(l, (**init).clone());
                    stepped_cell(Term::loc(l, o2).at(span), EventTag::RefAt, t, (l, o2), elem.clone())
                }
            }
        }
        Deref(r) => {
            if !r.is_value() {
                return congruence(step_in(r, store, cfg), |r| Deref(Box::new(r)), span);
            }
            let Loc(l, o) = r.kind else {
                return StepResult::Stuck(StuckReason::NotARef);
            };
            match store.get(l, o) {
                None => StepResult::Stuck(StuckReason::UnboundCell(l, o)),
                Some(Cell::Killed) => StepResult::Stuck(StuckReason::UseAfterFree(l, o)),
                Some(Cell::Live(v)) => {
                    stepped_cell(v.clone(), EventTag::Deref, t, (l, o), None)
                }
            }
        }
        Assign(r, v) => {
            if !r.is_value() {
                let v = v.clone();
                return congruence(step_in(r, store, cfg), |r| Assign(Box::new(r), v), span);
            }
            if !v.is_value() {
                let r = r.clone();
                return congruence(step_in(v, store, cfg), |v| Assign(r, Box::new(v)), span);
            }
            let Loc(l, o) = r.kind else {
                return StepResult::Stuck(StuckReason::NotARef);
            };
            match store.get(l, o) {
                None => StepResult::Stuck(StuckReason::UnboundCell(l, o)),
                Some(Cell::Killed) => StepResult::Stuck(StuckReason::UseAfterFree(l, o)),
                Some(Cell::Live(_)) => {
                    store.set(l, o, (**v).clone());
                    stepped_cell(Term::unit().at(span), EventTag::Assign, t, (l, o), None)
                }
            }
        }
        WithR { name, init, elem, body } => {
            if !init.is_value() {
                let (name, elem, body) = (name.clone(), elem.clone(), body.clone());
                return congruence(
                    step_in(init, store, cfg),
                    |i| WithR { name, init: Box::new(i), elem, body },
                    span,
                );
            }
            let l = store.alloc_fresh((**init).clone());
            let body = body.subst(&TermSubst::value(name, &Term::loc(l, 0)));
            stepped_cell(Term::with_c(l, body).at(span), EventTag::With, t, (l, 0), elem.clone())
        }
        WithC(l, body) => {
            if !body.is_value() {
                let l = *l;
                return congruence(step_in(body, store, cfg), |b| WithC(l, Box::new(b)), span);
            }
            if cfg.kills() {
                store.kill_column(*l);
            }
            stepped_cell((**body).clone(), EventTag::Close, t, (*l, 0), None)
        }
        Prim(op, a, b) => {
            if !a.is_value() {
                let (op, b) = (*op, b.clone());
                return congruence(step_in(a, store, cfg), |a| Prim(op, Box::new(a), b), span);
            }
            if !b.is_value() {
                let (op, a) = (*op, a.clone());
                return congruence(step_in(b, store, cfg), |b| Prim(op, a, Box::new(b)), span);
            }
            match (&a.kind, &b.kind) {
                (Const(crate::typecheck::Const::Int(x)), Const(crate::typecheck::Const::Int(y))) => {
                    stepped(Term::int(op.apply(*x, *y)).at(span), EventTag::Prim, t)
                }
                _ => StepResult::Stuck(StuckReason::NotAnInt),
            }
        }
        IfZero(c, yes, no) => {
            if !c.is_value() {
                let (yes, no) = (yes.clone(), no.clone());
                return congruence(step_in(c, store, cfg), |c| IfZero(Box::new(c), yes, no), span);
            }
            match c.kind {
                Const(crate::typecheck::Const::Int(n)) => {
                    let branch = if n == 0 { yes } else { no };
                    stepped((**branch).clone(), EventTag::IfZero, t)
                }
                _ => StepResult::Stuck(StuckReason::NotAnInt),
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Value(Term),
    FuelExhausted(Term),
    Stuck(Term, StuckReason),
}

#[derive(Clone, Debug)]
pub struct EvalResult {
    pub outcome: Outcome,
    pub store: Store,
    pub trace: Vec<Event>,
}

/// Iterates `step` until a value, a stuck state, or `fuel` steps.
pub fn eval(t: &Term, fuel: u64) -> EvalResult {
    eval_with(t, fuel, StepConfig::default())
}

pub fn eval_with(t: &Term, fuel: u64, cfg: StepConfig) -> EvalResult {
    let mut store = Store::new();
    let mut trace = Vec::new();
    let mut current = t.clone();
    for _ in 0..fuel {
        match step_with(&current, &mut store, cfg) {
            StepResult::AlreadyValue => {
                return EvalResult { outcome: Outcome::Value(current), store, trace }
            }
            StepResult::Stuck(r) => {
                return EvalResult { outcome: Outcome::Stuck(current, r), store, trace }
            }
            StepResult::Stepped { term, event } => {
                trace.push(event);
                current = term;
            }
        }
    }
    let outcome = if current.is_value() {
        Outcome::Value(current)
    } else {
        Outcome::FuelExhausted(current)
    };
    EvalResult { outcome, store, trace }
}

/// `LC(t)`: locations of every scope elimination inside `t`.
pub fn local_locations(t: &Term) -> BTreeSet<Loc> {
    let mut out = BTreeSet::new();
    t.visit(&mut |s| {
        if let TermKind::WithC(l, _) = s.kind {
            out.insert(l);
        }
    });
    out
}

fn lc_empty(t: &Term) -> bool {
    let mut empty = true;
    t.visit(&mut |s| {
        if matches!(s.kind, TermKind::WithC(..)) {
            empty = false;
        }
    });
    empty
}

/// `WT(t)`: scope eliminations only occur where call-by-value order
/// reaches them before anything to their right.
pub fn well_stepped(t: &Term) -> bool {
    use TermKind::*;
    match &t.kind {
        Const(_) | Var(_) | Loc(..) => true,
        Abs(l) => lc_empty(&l.body),
        TAbs(l) => lc_empty(&l.body),
        App(a, b) | Assign(a, b) | Prim(_, a, b) => {
            well_stepped(a) && well_stepped(b) && (a.is_value() || lc_empty(b))
        }
        RefNew { init, .. } => well_stepped(init),
        // The proxy runs first, so the referent must be free of scopes
        // until the proxy is a value.
        RefAt { init, proxy, .. } => {
            well_stepped(init) && well_stepped(proxy) && (lc_empty(init) || proxy.is_value())
        }
        Deref(a) | TApp(a, _) | WithC(_, a) => well_stepped(a),
        WithR { init, body, .. } => well_stepped(init) && well_stepped(body) && lc_empty(body),
        IfZero(c, a, b) => well_stepped(c) && lc_empty(a) && lc_empty(b),
    }
}

/// True when the value has the shape of a base constant.
pub fn is_int(t: &Term) -> Option<i64> {
    match t.kind {
        TermKind::Const(Const::Int(n)) => Some(n),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qualifiers::Qualifier;
    use crate::subtyping::Type;
    use crate::typecheck::Lambda;

    fn run_to_value(t: &Term) -> (Term, Store) {
        let r = eval(t, 1000);
        match r.outcome {
            Outcome::Value(v) => (v, r.store),
            other => panic!("did not reach a value: {other:?}"),
        }
    }

    #[test]
    fn ref_allocates_fresh_column() {
        let mut s = Store::new();
        let StepResult::Stepped { term, event } = step(&Term::ref_new(Term::int(7)), &mut s) else {
            panic!()
        };
        assert_eq!(term, Term::loc(Loc(0), 0));
        assert_eq!(event.tag, EventTag::Ref);
        assert_eq!(s.get(Loc(0), 0), Some(&Cell::Live(Term::int(7))));
    }

    #[test]
    fn refat_appends_to_the_proxy_column() {
        let mut s = Store::new();
        s.alloc_fresh(Term::int(7));
        let t = Term::ref_at(Term::int(8), Term::loc(Loc(0), 0));
        let StepResult::Stepped { term, .. } = step(&t, &mut s) else { panic!() };
        assert_eq!(term, Term::loc(Loc(0), 1));
        assert_eq!(s.get(Loc(0), 1), Some(&Cell::Live(Term::int(8))));
    }

    #[test]
    fn close_kills_the_whole_column() {
        let mut s = Store::new();
        let l = s.alloc_fresh(Term::int(7));
        s.alloc_at(l, Term::int(8));
        let StepResult::Stepped { term, event } = step(&Term::with_c(l, Term::unit()), &mut s)
        else {
            panic!()
        };
        assert_eq!(term, Term::unit());
        assert_eq!(event.tag, EventTag::Close);
        assert!(s.column_killed(l));
    }

    #[test]
    fn deref_reads_and_detects_use_after_free() {
        let mut s = Store::new();
        let l = s.alloc_fresh(Term::int(7));
        let StepResult::Stepped { term, .. } = step(&Term::deref(Term::loc(l, 0)), &mut s) else {
            panic!()
        };
        assert_eq!(term, Term::int(7));
        s.kill_column(l);
        assert!(matches!(
            step(&Term::deref(Term::loc(l, 0)), &mut s),
            StepResult::Stuck(StuckReason::UseAfterFree(_, 0))
        ));
        assert!(matches!(
            step(&Term::deref(Term::int(1)), &mut s),
            StepResult::Stuck(StuckReason::NotARef)
        ));
    }

    #[test]
    fn scoped_block_runs_and_kills() {
        let t = Term::with_r("a", Term::unit(), Term::deref(Term::var("a")));
        let (v, store) = run_to_value(&t);
        assert_eq!(v, Term::unit());
        assert!(store.column_killed(Loc(0)));
        let tags: Vec<_> = eval(&t, 100).trace.iter().map(|e| e.tag).collect();
        assert_eq!(tags, [EventTag::With, EventTag::Deref, EventTag::Close]);
    }

    #[test]
    fn beta_substitutes_argument_and_self() {
        let u = Type::Unit.q(Qualifier::empty());
        let id = Term::abs(Lambda {
            self_name: "f".into(),
            param: "x".into(),
            dom: Type::Int.q(Qualifier::empty()),
            cod: u,
            capture: Qualifier::empty(),
            body: Term::var("x"),
        });
        let (v, _) = run_to_value(&Term::app(id, Term::int(3)));
        assert_eq!(v, Term::int(3));
    }

    #[test]
    fn local_locations_and_well_stepped() {
        let l = Loc(3);
        assert_eq!(
            local_locations(&Term::with_c(l, Term::deref(Term::loc(l, 0)))),
            BTreeSet::from([l])
        );
        assert!(local_locations(&Term::loc(l, 2)).is_empty());
        let both = Term::app(Term::with_c(Loc(1), Term::unit()), Term::with_c(Loc(2), Term::unit()));
        assert_eq!(local_locations(&both), BTreeSet::from([Loc(1), Loc(2)]));
        assert!(!well_stepped(&both));
        let ok = Term::app(Term::unit(), Term::with_c(Loc(2), Term::unit()));
        assert!(well_stepped(&ok));
        let u = Type::Unit.q(Qualifier::empty());
        let bad_lambda = Term::abs(Lambda {
            self_name: "f".into(),
            param: "x".into(),
            dom: u.clone(),
            cod: u,
            capture: Qualifier::empty(),
            body: Term::with_c(l, Term::unit()),
        });
        assert!(!well_stepped(&bad_lambda));
    }
}
