mod common;

use common::positive_terms;
use shadow_arena::meta::enumerate_small_terms;
use shadow_arena::qualifiers::{Loc, Observation};
use shadow_arena::subtyping::{QType, TypingEnv};
use shadow_arena::typecheck::{check, check_program, elaborate_program, StoreTyping, Term, TypeErrorKind};

fn accepted() -> Vec<(Term, QType)> {
    let small = enumerate_small_terms(4, &TypingEnv::new());
    positive_terms()
        .into_iter()
        .map(|(_, t)| t)
        .chain(small)
        .filter_map(|t| elaborate_program(&t).ok())
        .collect()
}

#[test]
fn closed_programs_can_only_be_fresh() {
    for (t, ty) in accepted() {
        assert!(ty.qual.vars.is_empty() && ty.qual.locs.is_empty(), "{t} : {ty}");
    }
}

#[test]
fn elaboration_is_idempotent() {
    for (t, ty) in accepted() {
        let (again, ty2) = elaborate_program(&t).unwrap_or_else(|e| panic!("{t}: {e}"));
        assert!(again.alpha_eq(&t), "{t} became {again}");
        assert!(ty2.alpha_eq(&ty));
    }
}

#[test]
fn programs_check_against_their_type_and_its_fresh_widening() {
    let (env, sigma, phi) = (TypingEnv::new(), StoreTyping::new(), Observation::empty());
    for (t, ty) in accepted() {
        assert!(check(&env, &sigma, &phi, &t, &ty).is_accepted(), "{t} : {ty}");
        let mut wider = ty.clone();
        wider.qual = wider.qual.with_fresh(true);
        assert!(check(&env, &sigma, &phi, &t, &wider).is_accepted(), "{t} : {wider}");
    }
}

#[test]
fn store_indices_and_scope_eliminations_are_not_programs() {
    for t in [
        Term::loc(Loc(0), 0),
        Term::with_c(Loc(0), Term::int(1)),
        Term::deref(Term::ref_new(Term::loc(Loc(3), 1))),
        Term::with_r("x", Term::unit(), Term::with_c(Loc(1), Term::unit())),
    ] {
        let report = check_program(&t);
        assert_eq!(report.error_kind(), Some(TypeErrorKind::MalformedAnnotation), "{t}");
    }
}
