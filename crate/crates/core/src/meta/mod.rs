//! Executable metatheory: machine environments that track the store typing
//! alongside evaluation, store well-formedness and typedness checks, and the
//! step-by-step progress and preservation harnesses.

mod enumerate;
mod oracle;

pub use enumerate::enumerate_small_terms;
pub use oracle::{declarative_qsub_oracle, enumerate_contexts, QsubRelation};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::dynamics::{local_locations, step_with, well_stepped, Cell, Event, EventTag, StepConfig, StepResult, Store};
use crate::qualifiers::{Loc, Observation, Qualifier};
use crate::subtyping::{QType, TypingEnv};
use crate::typecheck::{check, elaborate_program, synthesize, StoreTyping, Term, TypeError};

/// The environment-update rule that explained a step.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EuRule {
    /// No new location; Σ may still grow at an existing one.
    Base,
    /// A new location enters Σ and the observation.
    Fresh,
    /// A scoped location moves from the observation to the killed set.
    Kill,
}

impl fmt::Display for EuRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EuRule::Base => "eu-base",
            EuRule::Fresh => "eu-fresh",
            EuRule::Kill => "eu-kill",
        })
    }
}

/// A step the evaluator took that no environment-update rule accounts for.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("({0}) step did not report its cell")]
    MissingCell(EventTag),
    #[error("no live value at {0}·{1} after allocation")]
    MissingValue(Loc, u32),
    #[error("({tag}) allocated {loc}, which is already in the store typing")]
    ReusedLocation { tag: EventTag, loc: Loc },
    #[error("(refat) extended {0}, which is not in the store typing")]
    UnknownArena(Loc),
    #[error("could not type the value stored at {loc}·{offset}: {source}")]
    UntypableCell { loc: Loc, offset: u32, source: TypeError },
    #[error("qualifier {0} of the new cell mentions killed locations")]
    KilledInQualifier(Qualifier),
    #[error("(close) on {0}, which is not a local location of the term")]
    NotLocal(Loc),
    #[error("({tag}) changed the store's locations to {after:?}, expected {expected:?}")]
    DomainChanged { tag: EventTag, expected: BTreeSet<Loc>, after: BTreeSet<Loc> },
    #[error("qualifier universe of {size} elements exceeds the bound {bound}")]
    UniverseTooLarge { size: usize, bound: usize },
    #[error("context binding mentions location {0}; the oracle works over variables only")]
    LocationInContext(Loc),
}

/// `Σ, φ, κ`: the store typing, the observed locations, and the killed ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MachineEnv {
    pub sigma: StoreTyping,
    pub phi: Observation,
    pub kappa: BTreeSet<Loc>,
}

impl MachineEnv {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Advances the machine environment over one evaluation step, classifying
/// the step by the rule that justifies it. `after` is the store the step
/// produced.
pub fn env_update(
    me: &MachineEnv,
    t_before: &Term,
    event: &Event,
    after: &Store,
) -> Result<(MachineEnv, EuRule), HarnessError> {
    let mut next = me.clone();
    let known = me.sigma.locations();
    let rule = match event.tag {
        EventTag::Ref | EventTag::With => {
            let (l, o) = event.cell.ok_or(HarnessError::MissingCell(event.tag))?;
            if known.contains(&l) {
                return Err(HarnessError::ReusedLocation { tag: event.tag, loc: l });
            }
            let ty = cell_type(me, event, after, l, o)?;
            if !ty.qual.is_disjoint_locs(&me.kappa) {
                return Err(HarnessError::KilledInQualifier(ty.qual));
            }
            next.sigma.insert(l, o, ty);
            next.phi.insert_loc(l);
            EuRule::Fresh
        }
        EventTag::RefAt => {
            let (l, o) = event.cell.ok_or(HarnessError::MissingCell(event.tag))?;
            if !known.contains(&l) {
                return Err(HarnessError::UnknownArena(l));
            }
            let ty = cell_type(me, event, after, l, o)?;
            next.sigma.insert(l, o, ty);
            EuRule::Base
        }
        EventTag::Close => {
            let (l, _) = event.cell.ok_or(HarnessError::MissingCell(event.tag))?;
            if !local_locations(t_before).contains(&l) {
                return Err(HarnessError::NotLocal(l));
            }
            next.phi.remove_loc(l);
            next.kappa.insert(l);
            EuRule::Kill
        }
        _ => EuRule::Base,
    };
    let after_locs = after.locations();
    let expected = next.sigma.locations();
    if after_locs != expected {
        return Err(HarnessError::DomainChanged { tag: event.tag, expected, after: after_locs });
    }
    Ok((next, rule))
}

/// The recorded type of a newly allocated cell: the allocation's element
/// annotation when the checker filled one in, otherwise the stored value's
/// synthesized type under the pre-step environment.
fn cell_type(me: &MachineEnv, event: &Event, after: &Store, l: Loc, o: u32) -> Result<QType, HarnessError> {
    if let Some(elem) = &event.elem {
        return Ok(elem.clone());
    }
    let Some(Cell::Live(v)) = after.get(l, o) else {
        return Err(HarnessError::MissingValue(l, o));
    };
    synthesize(&TypingEnv::new(), &me.sigma, &me.phi, v)
        .map_err(|source| HarnessError::UntypableCell { loc: l, offset: o, source })
}

/// `WF Σ`: every entry is closed, mentions only known locations, and no
/// offset exists without its column's first cell.
pub fn store_wf(sigma: &StoreTyping) -> bool {
    store_wf_check(sigma).is_ok()
}

/// [`store_wf`] with the first violated premise.
pub fn store_wf_check(sigma: &StoreTyping) -> Result<(), String> {
    let locs = sigma.locations();
    for ((l, o), ty) in sigma.iter() {
        if let Some(x) = ty.free_qvars().into_iter().next() {
            return Err(format!("{l}·{o} : {ty} mentions variable {x}"));
        }
        if let Some(x) = ty.free_tvars().into_iter().next() {
            return Err(format!("{l}·{o} : {ty} mentions type variable {x}"));
        }
        if let Some(m) = ty.qual.locs.iter().find(|m| !locs.contains(m)) {
            return Err(format!("{l}·{o} : {ty} mentions unallocated {m}"));
        }
        if o > 0 && sigma.get(l, 0).is_none() {
            return Err(format!("{l}·{o} is typed but {l}·0 is not"));
        }
    }
    Ok(())
}

/// Locations with at least one live cell.
fn live_locations(store: &Store) -> BTreeSet<Loc> {
    store.cells().filter(|(_, c)| c.is_live()).map(|((l, _), _)| l).collect()
}

/// Store typedness relative to the machine environment.
pub fn store_typed(me: &MachineEnv, store: &Store) -> bool {
    store_typed_check(me, store).is_ok()
}

/// [`store_typed`] with the first violated clause.
pub fn store_typed_check(me: &MachineEnv, store: &Store) -> Result<(), String> {
    let live = live_locations(store);
    let domain = me.sigma.locations();
    if let Some(l) = me.phi.locs.iter().find(|l| !live.contains(l)) {
        return Err(format!("observed {l} has no live cell"));
    }
    if let Some(l) = live.iter().find(|l| !domain.contains(l)) {
        return Err(format!("live {l} is not in the store typing"));
    }
    if let Some(l) = me.phi.locs.intersection(&me.kappa).next() {
        return Err(format!("{l} is both observed and killed"));
    }
    for &l in &me.kappa {
        if let Some((o, _)) = store.column(l).find(|(_, c)| c.is_live()) {
            return Err(format!("killed column {l} still has live cell {l}·{o}"));
        }
    }
    let env = TypingEnv::new();
    for ((l, o), cell) in store.cells() {
        let Some(ty) = me.sigma.get(l, o) else {
            return Err(format!("cell {l}·{o} has no store typing entry"));
        };
        let Cell::Live(v) = cell else { continue };
        if !me.phi.locs.contains(&l) {
            continue;
        }
        if !well_stepped(v) {
            return Err(format!("value at {l}·{o} is not well-stepped"));
        }
        if ty.qual.locs.is_subset(&me.phi.locs) {
            let report = check(&env, &me.sigma, &me.phi, v, ty);
            if !report.is_accepted() {
                let why = report.diagnostics.first().map(ToString::to_string).unwrap_or_default();
                return Err(format!("value {v} at {l}·{o} does not have type {ty}: {why}"));
            }
        }
    }
    Ok(())
}

/// `q[p/◇]`: the marker stays and the new locations join it.
fn grow_fresh(ty: &QType, p: &BTreeSet<Loc>) -> QType {
    let mut out = ty.clone();
    if out.qual.fresh {
        for &l in p {
            out.qual.locs.insert(l);
        }
    }
    out
}

/// Which harness produced a report.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Harness {
    Preservation,
    Progress,
}

/// How the evaluation under a harness ended.
#[derive(Clone, PartialEq, Debug)]
pub enum Ending {
    Value,
    FuelExhausted,
    Stuck(String),
    /// The program was rejected before any step.
    NotRun,
}

impl fmt::Display for Ending {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ending::Value => f.write_str("value"),
            Ending::FuelExhausted => f.write_str("fuel-exhausted"),
            Ending::Stuck(r) => write!(f, "stuck({r})"),
            Ending::NotRun => f.write_str("not-run"),
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct StepRecord {
    /// One-based step number.
    pub index: usize,
    pub rule: EventTag,
    pub eu: Option<EuRule>,
    pub preservation: bool,
    pub wf: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FindingKind {
    Rejected,
    EnvUpdate,
    StoreWf,
    StoreTyped,
    /// Re-typing failed under the canonical witness but passed once the
    /// observation was widened to every live location.
    Witness,
    Retype,
    NotWellStepped,
    Stuck,
    Final,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::Rejected => "rejected",
            FindingKind::EnvUpdate => "env_update",
            FindingKind::StoreWf => "store_wf",
            FindingKind::StoreTyped => "store_typed",
            FindingKind::Witness => "witness",
            FindingKind::Retype => "retype",
            FindingKind::NotWellStepped => "well_stepped",
            FindingKind::Stuck => "stuck",
            FindingKind::Final => "final",
        })
    }
}

/// A failed check with the step after which it was observed (0 for the
/// initial state).
#[derive(Clone, PartialEq, Debug)]
pub struct Finding {
    pub step: usize,
    pub kind: FindingKind,
    pub detail: String,
}

#[derive(Clone, PartialEq, Debug)]
pub struct HarnessReport {
    pub harness: Harness,
    pub program: String,
    pub steps: Vec<StepRecord>,
    pub findings: Vec<Finding>,
    pub ending: Ending,
    /// Cells allocated over the run.
    pub alloc: usize,
    /// Cells killed over the run.
    pub killed: usize,
}

impl HarnessReport {
    fn new(harness: Harness) -> Self {
        HarnessReport {
            harness,
            program: "<program>".into(),
            steps: Vec::new(),
            findings: Vec::new(),
            ending: Ending::NotRun,
            alloc: 0,
            killed: 0,
        }
    }

    /// Names the program in the summary line.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.program = name.into();
        self
    }

    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    fn fail(&mut self, step: usize, kind: FindingKind, detail: impl Into<String>) {
        self.findings.push(Finding { step, kind, detail: detail.into() });
    }
}

impl fmt::Display for HarnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "ok" } else { "FAIL" };
        for s in &self.steps {
            match self.harness {
                Harness::Preservation => {
                    let eu = s.eu.map(|e| e.to_string()).unwrap_or_else(|| "-".into());
                    writeln!(f, "{} {} {} preservation={} wf={}", s.index, s.rule, eu, flag(s.preservation), flag(s.wf))?
                }
                Harness::Progress => writeln!(f, "{} {} progress=ok", s.index, s.rule)?,
            }
        }
        for x in &self.findings {
            writeln!(f, "  step {}: {}: {}", x.step, x.kind, x.detail)?;
        }
        let tag = match self.harness {
            Harness::Preservation => "META",
            Harness::Progress => "PROGRESS",
        };
        write!(
            f,
            "{tag} {} {} steps={} alloc={} killed={} end={}",
            self.program,
            if self.is_ok() { "OK" } else { "FAIL" },
            self.steps.len(),
            self.alloc,
            self.killed,
            self.ending
        )
    }
}

/// Runs the program step by step, checking after each step that the
/// environment update applies, the store typing stays well-formed, the store
/// stays typed, and the new term still has the previous type with its
/// freshness marker grown by the step's new locations.
pub fn check_preservation(program: &Term, fuel: u64) -> HarnessReport {
    check_preservation_with(program, fuel, StepConfig::default())
}

pub fn check_preservation_with(program: &Term, fuel: u64, cfg: StepConfig) -> HarnessReport {
    let mut report = HarnessReport::new(Harness::Preservation);
    let (mut term, mut ty) = match elaborate_program(program) {
        Ok(x) => x,
        Err(e) => {
            report.fail(0, FindingKind::Rejected, e.to_string());
            return report;
        }
    };
    let env = TypingEnv::new();
    let mut me = MachineEnv::new();
    let mut store = Store::new();
    let mut opened = 0usize;
    let mut closed = BTreeSet::new();
    let mut ending = Ending::FuelExhausted;
    for index in 1..=fuel as usize {
        let before = term.clone();
        let (next, event) = match step_with(&term, &mut store, cfg) {
            StepResult::AlreadyValue => {
                ending = Ending::Value;
                break;
            }
            StepResult::Stuck(r) => {
                report.fail(index - 1, FindingKind::Stuck, format!("{r} at {term}"));
                ending = Ending::Stuck(r.to_string());
                break;
            }
            StepResult::Stepped { term, event } => (term, event),
        };
        match event.tag {
            EventTag::With => opened += 1,
            EventTag::Close => {
                if let Some((l, _)) = event.cell {
                    closed.insert(l);
                }
            }
            _ => {}
        }
        let mut record = StepRecord { index, rule: event.tag, eu: None, preservation: true, wf: true };
        let (next_me, eu) = match env_update(&me, &before, &event, &store) {
            Ok(x) => x,
            Err(e) => {
                record.preservation = false;
                report.steps.push(record);
                report.fail(index, FindingKind::EnvUpdate, e.to_string());
                ending = Ending::NotRun;
                break;
            }
        };
        record.eu = Some(eu);
        if let Err(why) = store_wf_check(&next_me.sigma) {
            record.wf = false;
            report.fail(index, FindingKind::StoreWf, why);
        }
        if let Err(why) = store_typed_check(&next_me, &store) {
            record.preservation = false;
            report.fail(index, FindingKind::StoreTyped, why);
        }
        if !well_stepped(&next) {
            record.preservation = false;
            report.fail(index, FindingKind::NotWellStepped, next.to_string());
        }
        // The witness `p`: new locations, minus those still scoped inside
        // the term, which may never appear in its type.
        let scoped = local_locations(&next);
        let grown: BTreeSet<Loc> = next_me
            .sigma
            .locations()
            .difference(&me.sigma.locations())
            .filter(|l| !scoped.contains(l))
            .copied()
            .collect();
        let expected = grow_fresh(&ty, &grown);
        let verdict = check(&env, &next_me.sigma, &next_me.phi, &next, &expected);
        if verdict.is_accepted() {
            if let Ok(t) = synthesize(&env, &next_me.sigma, &next_me.phi, &next) {
                ty = t;
            }
        } else {
            record.preservation = false;
            let why = verdict.diagnostics.first().map(ToString::to_string).unwrap_or_default();
            let widened = Observation { vars: Default::default(), locs: live_locations(&store) };
            let kind = if check(&env, &next_me.sigma, &widened, &next, &expected).is_accepted() {
                FindingKind::Witness
            } else {
                FindingKind::Retype
            };
            report.fail(index, kind, format!("{next} against {expected}: {why}"));
        }
        report.steps.push(record);
        me = next_me;
        term = next;
    }
    if ending == Ending::FuelExhausted && term.is_value() {
        ending = Ending::Value;
    }
    if ending == Ending::Value {
        let last = report.steps.len();
        if me.kappa != closed || closed.len() != opened {
            report.fail(last, FindingKind::Final, format!("killed set {:?} but scopes opened {opened}, closed {closed:?}", me.kappa));
        }
        let domain = me.sigma.locations();
        let covered: BTreeSet<Loc> = me.phi.locs.union(&me.kappa).copied().collect();
        if covered != domain {
            report.fail(last, FindingKind::Final, format!("φ ∪ κ = {covered:?} but Σ covers {domain:?}"));
        }
    }
    report.ending = ending;
    report.alloc = store.total();
    report.killed = store.killed_count();
    report
}

/// Runs the program and checks that no reachable state is stuck.
pub fn check_progress(program: &Term, fuel: u64) -> HarnessReport {
    check_progress_with(program, fuel, StepConfig::default(), true)
}

/// [`check_progress`] with evaluator switches; `typed = false` skips the
/// up-front type check so that ill-typed programs can show what the harness
/// reports on them.
pub fn check_progress_with(program: &Term, fuel: u64, cfg: StepConfig, typed: bool) -> HarnessReport {
    let mut report = HarnessReport::new(Harness::Progress);
    let mut term = if typed {
        match elaborate_program(program) {
            Ok((t, _)) => t,
            Err(e) => {
                report.fail(0, FindingKind::Rejected, e.to_string());
                return report;
            }
        }
    } else {
        program.clone()
    };
    let mut store = Store::new();
    report.ending = Ending::FuelExhausted;
    for index in 1..=fuel as usize {
        match step_with(&term, &mut store, cfg) {
            StepResult::AlreadyValue => {
                report.ending = Ending::Value;
                break;
            }
            StepResult::Stuck(r) => {
                report.fail(index - 1, FindingKind::Stuck, format!("{r} at {term}"));
                report.ending = Ending::Stuck(r.to_string());
                break;
            }
            StepResult::Stepped { term: next, event } => {
                report.steps.push(StepRecord { index, rule: event.tag, eu: None, preservation: true, wf: true });
                term = next;
            }
        }
    }
    if report.ending == Ending::FuelExhausted && term.is_value() {
        report.ending = Ending::Value;
    }
    report.alloc = store.total();
    report.killed = store.killed_count();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtyping::Type;
    use crate::typecheck::Const;

    fn int() -> QType {
        Type::Int.q(Qualifier::empty())
    }

    fn scoped_deref() -> Term {
        Term::with_r("x", Term::unit(), Term::deref(Term::var("x")))
    }

    #[test]
    fn empty_store_typing_is_well_formed() {
        assert!(store_wf(&StoreTyping::new()));
        assert!(store_typed(&MachineEnv::new(), &Store::new()));
    }

    #[test]
    fn dangling_location_is_ill_formed() {
        let mut sigma = StoreTyping::new();
        sigma.insert(Loc(0), 0, Type::reference(int()).q(Qualifier::loc(Loc(4))));
        assert!(!store_wf(&sigma));
    }

    #[test]
    fn offset_without_first_cell_is_ill_formed() {
        let mut sigma = StoreTyping::new();
        sigma.insert(Loc(0), 1, int());
        assert!(!store_wf(&sigma));
        sigma.insert(Loc(0), 0, int());
        assert!(store_wf(&sigma));
    }

    #[test]
    fn allocation_is_fresh_and_beta_is_base() {
        let mut store = Store::new();
        let t = Term::ref_new(Term::int(1));
        let StepResult::Stepped { event, .. } = step_with(&t, &mut store, StepConfig::default()) else {
            panic!("no step")
        };
        let (me, rule) = env_update(&MachineEnv::new(), &t, &event, &store).unwrap();
        assert_eq!(rule, EuRule::Fresh);
        assert!(me.phi.locs.contains(&Loc(0)));
        assert!(me.kappa.is_empty());

        let id = Term::abs(crate::typecheck::Lambda {
            self_name: "f".into(),
            param: "x".into(),
            dom: int(),
            cod: int(),
            capture: Qualifier::empty(),
            body: Term::var("x"),
        });
        let app = Term::app(id, Term::int(2));
        let StepResult::Stepped { event, .. } = step_with(&app, &mut store, StepConfig::default()) else {
            panic!("no step")
        };
        let (after, rule) = env_update(&me, &app, &event, &store).unwrap();
        assert_eq!(rule, EuRule::Base);
        assert_eq!(after, me);
    }

    #[test]
    fn close_moves_location_to_killed() {
        let t = scoped_deref();
        let r = check_preservation(&t, 100);
        assert!(r.is_ok(), "{r}");
        let rules: Vec<_> = r.steps.iter().map(|s| s.eu.unwrap()).collect();
        assert_eq!(rules, [EuRule::Fresh, EuRule::Base, EuRule::Kill]);
        assert_eq!((r.alloc, r.killed), (1, 1));
    }

    #[test]
    fn close_requires_a_local_location() {
        let mut store = Store::new();
        let t = scoped_deref();
        let StepResult::Stepped { term, event } = step_with(&t, &mut store, StepConfig::default()) else {
            panic!()
        };
        let (me, _) = env_update(&MachineEnv::new(), &t, &event, &store).unwrap();
        let fake = Event { tag: EventTag::Close, redex: term.clone(), cell: Some((Loc(0), 0)), elem: None };
        assert_eq!(env_update(&me, &Term::unit(), &fake, &store), Err(HarnessError::NotLocal(Loc(0))));
    }

    #[test]
    fn revived_cell_breaks_typedness() {
        let t = scoped_deref();
        let mut store = Store::new();
        let mut me = MachineEnv::new();
        let mut term = t;
        while let StepResult::Stepped { term: next, event } = step_with(&term, &mut store, StepConfig::default()) {
            me = env_update(&me, &term, &event, &store).unwrap().0;
            term = next;
        }
        assert!(store_typed(&me, &store));
        store.force_cell(Loc(0), 0, Cell::Live(Term::unit()));
        assert!(!store_typed(&me, &store));
    }

    #[test]
    fn a_value_takes_no_steps() {
        let r = check_preservation(&Term::int(3), 10);
        assert!(r.is_ok() && r.steps.is_empty());
        assert_eq!(r.ending, Ending::Value);
        assert!(check_progress(&Term::int(3), 10).is_ok());
    }

    #[test]
    fn progress_reports_stuck_unchecked_terms() {
        let bad = Term::deref(Term::new(TermKind::Const(Const::Int(1)), Default::default()));
        let r = check_progress_with(&bad, 10, StepConfig::default(), false);
        assert!(!r.is_ok());
        assert_eq!(r.ending, Ending::Stuck("NotARef".into()));
        assert!(!check_progress(&bad, 10).is_ok());
    }

    #[test]
    fn report_lines_have_the_fixed_shape() {
        let r = check_preservation(&scoped_deref(), 100).named("demo");
        let text = r.to_string();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "1 with eu-fresh preservation=ok wf=ok");
        assert_eq!(lines[2], "3 close eu-kill preservation=ok wf=ok");
        assert_eq!(lines[3], "META demo OK steps=3 alloc=1 killed=1 end=value");
    }

    use crate::typecheck::TermKind;
}
