mod common;

use proptest::prelude::*;

use common::corpus;
use shadow_arena::cli::load;
use shadow_arena::qualifiers::{Name, Qualifier};
use shadow_arena::subtyping::{QType, Type};
use shadow_arena::surface::{parse_program, parse_qtype, ExprKind, Expr, Item, ParseOptions, Placement};
use shadow_arena::typecheck::{Term, TermKind};

/// Scoped allocations in a surface expression, counting a `val` with several
/// names once per name since each name gets its own evaluation.
fn scoped_in_expr(e: &Expr) -> usize {
    use ExprKind::*;
    match &e.kind {
        Lit(_) | Var(_) | Loc(..) => 0,
        Lambda(_, body) => scoped_in_expr(body),
        Apply(a, b) | Assign(a, b) | Prim(_, a, b) => scoped_in_expr(a) + scoped_in_expr(b),
        TypeApply(a, _) | Deref(a) | Annot(a, _) | WithC(_, a) => scoped_in_expr(a),
        NewRef { init, placement, .. } => {
            scoped_in_expr(init)
                + match placement {
                    Placement::Scoped => 1,
                    Placement::At(p) => scoped_in_expr(p),
                    Placement::Fresh => 0,
                }
        }
        IfZero(c, a, b) => scoped_in_expr(c) + scoped_in_expr(a) + scoped_in_expr(b),
        With { init, body, .. } => 1 + scoped_in_expr(init) + scoped_in_expr(body),
        Block(items) => scoped_in_items(items),
    }
}

fn scoped_in_items(items: &[Item]) -> usize {
    items
        .iter()
        .map(|item| match item {
            Item::Val { names, rhs, .. } => names.len() * scoped_in_expr(rhs),
            Item::Def { body, .. } => scoped_in_expr(body),
            Item::Expr(e) => scoped_in_expr(e),
        })
        .sum()
}

fn count(t: &Term, pred: &dyn Fn(&Term) -> bool) -> usize {
    let mut n = 0;
    t.visit(&mut |s| n += usize::from(pred(s)));
    n
}

#[test]
fn lowering_emits_no_runtime_forms_and_keeps_every_scope() {
    let mut lowered = 0;
    for e in corpus() {
        let Ok(Ok(loaded)) = load(&e.src, false, e.expect.ext_int) else { continue };
        let t = loaded.term;
        assert!(!t.has_runtime_forms(), "{}: {t}", e.name);
        let opts = ParseOptions { ext_int: e.expect.ext_int, ..ParseOptions::default() };
        let program = parse_program(&e.src, opts).unwrap();
        let scopes = count(&t, &|s| matches!(s.kind, TermKind::WithR { .. }));
        assert_eq!(scopes, scoped_in_items(&program.items), "{}", e.name);
        lowered += 1;
    }
    assert!(lowered >= 12);
}

fn name() -> impl Strategy<Value = Name> {
    prop::sample::select(vec!["a", "b", "c"]).prop_map(Name::new)
}

fn qualifier() -> impl Strategy<Value = Qualifier> {
    (prop::collection::btree_set(name(), 0..3), any::<bool>())
        .prop_map(|(vars, fresh)| Qualifier::from_vars(vars).with_fresh(fresh))
}

fn qtype() -> impl Strategy<Value = QType> {
    let leaf = prop_oneof![Just(Type::Int), Just(Type::Unit), Just(Type::Top), Just(Type::Var("X".into()))];
    let ty = leaf.prop_recursive(3, 12, 2, |inner| {
        let q = move || (inner.clone(), qualifier()).prop_map(|(t, q)| t.q(q));
        prop_oneof![
            q().prop_map(Type::reference),
            (q(), q()).prop_map(|(d, c)| Type::fun("f", "p", d, c)),
            (q(), q()).prop_map(|(b, c)| Type::all("g", "Y", "y", b, c)),
        ]
    });
    (ty, qualifier()).prop_map(|(t, q)| t.q(q))
}

proptest! {
    #[test]
    fn printed_types_parse_back(t in qtype()) {
        let printed = t.to_string();
        let back = parse_qtype(&printed, ParseOptions::default()).map_err(|e| TestCaseError::fail(format!("{printed}: {e}")))?;
        prop_assert!(back.alpha_eq(&t), "{} reparsed as {}", printed, back);
    }
}

#[test]
fn renaming_a_free_variable_renames_it_in_the_free_set() {
    let fresh = Name::new("zz");
    let mut checked = 0;
    for e in corpus() {
        let Ok(Ok(loaded)) = load(&e.src, false, e.expect.ext_int) else { continue };
        // Lambda bodies have their parameter free.
        let mut bodies = Vec::new();
        loaded.term.visit(&mut |s| {
            if let TermKind::Abs(lam) = &s.kind {
                bodies.push((lam.param.clone(), lam.body.clone()));
            }
        });
        for (from, body) in bodies.into_iter().filter(|(x, b)| b.free_vars().contains(x)) {
            let renamed = body.rename_free(&from, &fresh);
            let mut expected = body.free_vars();
            expected.remove(&from);
            expected.insert(fresh.clone());
            assert_eq!(renamed.free_vars(), expected, "{}: {body}", e.name);
            assert!(renamed.rename_free(&fresh, &from).alpha_eq(&body), "{}: {body}", e.name);
            checked += 1;
        }
    }
    assert!(checked > 0);
}
