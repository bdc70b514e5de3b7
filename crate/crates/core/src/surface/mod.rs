//! Concrete syntax: lexing, parsing, lowering to core terms, and printing.

mod lexer;
mod lower;
mod parser;
mod print;
mod syntax;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use lower::{lower_in, lower_program, to_core, LowerError};
pub use parser::{parse_expr, parse_program, parse_qtype, ParseOptions};
pub use print::print_term;
pub use syntax::{Expr, ExprKind, FunSig, Item, Param, Placement, Program, TParam};

use crate::qualifiers::Name;
use crate::typecheck::{Span, Term};

/// The first offending token and what would have been accepted there.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>, expected: Vec<String>) -> Self {
        ParseError { span, message: message.into(), expected }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} parse error: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, "; expected {}", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

/// Any failure before type checking proper.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum FrontError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Lower(#[from] LowerError),
}

/// Parses and lowers a source program.
pub fn compile(src: &str, opts: ParseOptions) -> Result<Term, FrontError> {
    let program = parse_program(src, opts)?;
    Ok(lower_program(&program)?)
}

/// Parses a printed core term, including runtime forms.
pub fn parse_core_term(src: &str) -> Result<Term, FrontError> {
    let opts = ParseOptions { core: true, runtime: true, ext_int: true };
    Ok(to_core(&parse_expr(src, opts)?)?)
}

/// A statically known allocation group: a fresh or scoped allocation bound by
/// `val` and the `val`s coallocated with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArenaGroup {
    pub root: Name,
    pub scoped: bool,
    pub members: Vec<Name>,
}

impl fmt::Display for ArenaGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let members: Vec<&str> = self.members.iter().map(Name::as_str).collect();
        write!(
            f,
            "ARENA {}{} size={} [{}]",
            self.root,
            if self.scoped { " scoped" } else { "" },
            self.members.len(),
            members.join(", ")
        )
    }
}

/// Groups the program's named allocations by arena, following `at` proxies
/// through names. Proxies that are not named allocations start a group of
/// their own.
pub fn arena_summary(p: &Program) -> Vec<ArenaGroup> {
    let mut groups = Vec::new();
    let mut index = BTreeMap::new();
    collect_arenas(&p.items, &mut groups, &mut index);
    groups
}

fn collect_arenas(items: &[Item], groups: &mut Vec<ArenaGroup>, index: &mut BTreeMap<Name, usize>) {
    for item in items {
        match item {
            Item::Val { names, rhs, .. } => {
                for name in names {
                    match &rhs.kind {
                        ExprKind::NewRef { placement: Placement::At(proxy), .. } => {
                            let g = match &proxy.kind {
                                ExprKind::Var(p) if index.contains_key(p) => index[p],
                                ExprKind::Var(p) => {
                                    groups.push(ArenaGroup { root: p.clone(), scoped: false, members: vec![] });
                                    index.insert(p.clone(), groups.len() - 1);
                                    groups.len() - 1
                                }
                                _ => {
                                    groups.push(ArenaGroup { root: name.clone(), scoped: false, members: vec![] });
                                    groups.len() - 1
                                }
                            };
                            groups[g].members.push(name.clone());
                            index.insert(name.clone(), g);
                        }
                        ExprKind::NewRef { placement, .. } => {
                            groups.push(ArenaGroup {
                                root: name.clone(),
                                scoped: matches!(placement, Placement::Scoped),
                                members: vec![name.clone()],
                            });
                            index.insert(name.clone(), groups.len() - 1);
                        }
                        _ => {
                            index.remove(name);
                            collect_expr(rhs, groups, index);
                        }
                    }
                }
            }
            Item::Def { body, .. } => collect_expr(body, groups, index),
            Item::Expr(e) => collect_expr(e, groups, index),
        }
    }
}

fn collect_expr(e: &Expr, groups: &mut Vec<ArenaGroup>, index: &mut BTreeMap<Name, usize>) {
    match &e.kind {
        ExprKind::Block(items) => collect_arenas(items, groups, index),
        ExprKind::Lambda(_, body) => collect_expr(body, groups, index),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typecheck::{check_program, TypeErrorKind};

    fn lower(src: &str) -> Term {
        compile(src, ParseOptions::default()).unwrap_or_else(|e| panic!("{e}"))
    }

    #[test]
    fn variable_lowers_to_itself() {
        let env = {
            let mut env = crate::subtyping::TypingEnv::new();
            env.push_term("x".into(), crate::subtyping::Type::Int.q(Default::default())).unwrap();
            env
        };
        let p = parse_program("x", ParseOptions::default()).unwrap();
        assert!(lower_in(&p, &env).unwrap().alpha_eq(&Term::var("x")));
    }

    #[test]
    fn scoped_val_becomes_with() {
        let t = lower("{ val a = new Ref(()) scoped; !a }");
        let expected = Term::with_r("a", Term::unit(), Term::deref(Term::var("a")));
        let stripped = strip_elems(&t);
        assert!(stripped.alpha_eq(&expected), "{t}");
        assert_eq!(check_program(&t).ty.unwrap().to_string(), "Unit^{}");
    }

    #[test]
    fn scoped_result_is_an_undelimited_allocation() {
        let err = compile("{ new Ref(1) scoped }", ParseOptions::default()).unwrap_err();
        assert!(matches!(err, FrontError::Lower(LowerError::UndelimitedScoped { .. })));
    }

    #[test]
    fn escaping_scoped_reference_is_rejected() {
        let t = lower("{ val a = new Ref(1) scoped; a }");
        assert_eq!(check_program(&t).error_kind(), Some(TypeErrorKind::EscapeViolation));
    }

    #[test]
    fn val_sequence_checks() {
        let t = lower("val fr = new Ref(42); val f1 = new Ref(42) at fr; !f1");
        let r = check_program(&t);
        assert!(r.is_accepted(), "{r}\n{t}");
        assert_eq!(r.ty.unwrap().to_string(), "Int^{}");
    }

    #[test]
    fn shadowing_renames_internally() {
        let t = lower("val a = 1; val a = new Ref(a); !a");
        assert!(check_program(&t).is_accepted(), "{t}");
        assert!(t.to_string().contains("a$"), "{t}");
    }

    #[test]
    fn printed_lowering_reparses() {
        let t = lower("val c = new Ref(1); def f(x: Int): Int = x; c := f(!c); !c");
        let back = parse_core_term(&t.to_string()).unwrap();
        assert!(back.alpha_eq(&t), "{t}\n{back}");
    }

    #[test]
    fn arena_groups_follow_proxies() {
        let p = parse_program(
            "{ val fr = new Ref(42); val ar = new Ref(42) scoped; val f1 = new Ref(42) at fr; \
             val a1 = new Ref(42) at ar; val a2 = new Ref(42) at a1 }",
            ParseOptions::default(),
        )
        .unwrap();
        let sizes: Vec<_> = arena_summary(&p).iter().map(|g| (g.root.to_string(), g.members.len())).collect();
        assert_eq!(sizes, [("fr".to_string(), 2), ("ar".to_string(), 3)]);
    }

    fn strip_elems(t: &Term) -> Term {
        use crate::typecheck::TermKind as K;
        let mut t = t.clone();
        fn go(t: &mut Term) {
            match &mut t.kind {
                K::RefNew { elem, init } => {
                    *elem = None;
                    go(init)
                }
                K::RefAt { elem, init, proxy } => {
                    *elem = None;
                    go(init);
                    go(proxy)
                }
                K::WithR { elem, init, body, .. } => {
                    *elem = None;
                    go(init);
                    go(body)
                }
                K::Abs(l) => go(&mut l.body),
                K::TAbs(l) => go(&mut l.body),
                K::App(a, b) | K::Assign(a, b) | K::Prim(_, a, b) => {
                    go(a);
                    go(b)
                }
                K::Deref(a) | K::TApp(a, _) | K::WithC(_, a) => go(a),
                K::IfZero(a, b, c) => {
                    go(a);
                    go(b);
                    go(c)
                }
                K::Const(_) | K::Var(_) | K::Loc(..) => {}
            }
        }
        go(&mut t);
        t
    }
}
