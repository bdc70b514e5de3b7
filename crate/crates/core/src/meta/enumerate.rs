//! Exhaustive generation of small core terms for the harnesses.
//!
//! Candidates are filtered by a coarse shape analysis (dereferences only of
//! reference-shaped terms, applications only of functions) so that the count
//! stays manageable at depth four; typing is left to the checker, and the
//! stream deliberately contains terms it rejects.

use std::collections::{BTreeSet, HashMap};

use crate::qualifiers::{Name, Qualifier};
use crate::subtyping::{QType, Type, TypingEnv};
use crate::typecheck::{Lambda, Term};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum Shape {
    Int,
    Unit,
    Ref(Box<Shape>),
    /// A function from unit.
    Fun(Box<Shape>),
    /// Anything the analysis cannot see into.
    Other,
}

impl Shape {
    fn of_type(t: &Type) -> Shape {
        match t {
            Type::Base(b) if *b == crate::subtyping::BaseType::Int => Shape::Int,
            Type::Base(b) if *b == crate::subtyping::BaseType::Unit => Shape::Unit,
            Type::Ref(inner) => Shape::Ref(Box::new(Shape::of_type(&inner.ty))),
            Type::Fun(f) => Shape::Fun(Box::new(Shape::of_type(&f.cod.ty))),
            _ => Shape::Other,
        }
    }

    /// A codomain annotation for a lambda whose body has this shape and
    /// these free variables.
    fn annotation(&self, reach: &Qualifier) -> QType {
        match self {
            Shape::Int => Type::Int.q(Qualifier::empty()),
            Shape::Unit => Type::Unit.q(Qualifier::empty()),
            Shape::Ref(inner) => Type::reference(inner.annotation(&Qualifier::empty()).without_marker())
                .q(reach.clone().with_fresh(true)),
            Shape::Fun(cod) => Type::fun("_f", "_x", Type::Unit.q(Qualifier::empty()), cod.annotation(reach))
                .q(reach.clone().with_fresh(true)),
            Shape::Other => Type::Top.q(reach.clone().with_fresh(true)),
        }
    }
}

trait WithoutMarker {
    fn without_marker(self) -> Self;
}

impl WithoutMarker for QType {
    fn without_marker(mut self) -> Self {
        self.qual = self.qual.without_fresh();
        self
    }
}

type Scope = Vec<(Name, Shape)>;

/// A generated term with its shape and exact depth.
type Generated = (Term, Shape, usize);

struct Generator {
    memo: HashMap<(usize, Scope), Vec<Generated>>,
}

impl Generator {
    /// Terms of depth at most `d` in `scope`, each with its shape and exact depth.
    fn terms(&mut self, d: usize, scope: &Scope) -> Vec<Generated> {
        if d == 0 {
            return Vec::new();
        }
        if let Some(v) = self.memo.get(&(d, scope.clone())) {
            return v.clone();
        }
        let mut out = self.terms(d - 1, scope);
        if d == 1 {
            out.push((Term::int(1), Shape::Int, 1));
            out.push((Term::unit(), Shape::Unit, 1));
            for (x, s) in scope {
                out.push((Term::var(x.clone()), s.clone(), 1));
            }
        } else {
            let sub = self.terms(d - 1, scope);
            let deepest = |a: usize, b: usize| a.max(b) == d - 1;
            for (t, s, k) in &sub {
                if *k != d - 1 {
                    continue;
                }
                out.push((Term::ref_new(t.clone()), Shape::Ref(Box::new(s.clone())), d));
                if let Shape::Ref(inner) = s {
                    out.push((Term::deref(t.clone()), (**inner).clone(), d));
                }
                if let Shape::Fun(cod) = s {
                    out.push((Term::app(t.clone(), Term::unit()), (**cod).clone(), d));
                }
            }
            for (r, rs, rk) in &sub {
                let Shape::Ref(inner) = rs else { continue };
                for (v, vs, vk) in &sub {
                    if !deepest(*rk, *vk) {
                        continue;
                    }
                    if vs == &**inner {
                        out.push((Term::assign(r.clone(), v.clone()), Shape::Unit, d));
                    }
                    out.push((Term::ref_at(v.clone(), r.clone()), Shape::Ref(Box::new(vs.clone())), d));
                }
            }
            // Scoped allocations take an atomic referent; their bodies carry
            // the depth.
            let atoms: Vec<_> = sub.iter().filter(|(_, _, k)| *k == 1).cloned().collect();
            let x = Name::new(&format!("x{}", scope.len()));
            for (init, s, _) in &atoms {
                let mut inner = scope.clone();
                inner.push((x.clone(), Shape::Ref(Box::new(s.clone()))));
                for (body, bs, bk) in self.terms(d - 1, &inner) {
                    if bk == d - 1 {
                        out.push((Term::with_r(x.clone(), init.clone(), body), bs, d));
                    }
                }
            }
            let f = Name::new(&format!("f{}", scope.len()));
            let mut inner = scope.clone();
            inner.push((x.clone(), Shape::Unit));
            for (body, bs, bk) in self.terms(d - 1, &inner) {
                if bk == d - 1 {
                    let lam = unit_lambda(&f, &x, body, &bs);
                    out.push((lam, Shape::Fun(Box::new(bs)), d));
                }
            }
        }
        self.memo.insert((d, scope.clone()), out.clone());
        out
    }
}

fn unit_lambda(f: &Name, x: &Name, body: Term, shape: &Shape) -> Term {
    let free: BTreeSet<Name> = body.free_vars();
    let capture = Qualifier::from_vars(free.iter().filter(|v| *v != x && *v != f).cloned());
    let reach = Qualifier::from_vars(free.iter().filter(|v| *v != f).cloned());
    Term::abs(Lambda {
        self_name: f.clone(),
        param: x.clone(),
        dom: Type::Unit.q(Qualifier::empty()),
        cod: shape.annotation(&reach),
        capture,
        body,
    })
}

/// Every term up to `depth` (at most four) built from the integer `1`, unit,
/// the term variables of `env`, allocation (fresh, coallocated and scoped),
/// dereference, assignment, unit lambdas, and their application to unit.
/// Ordered by depth, shallowest first.
pub fn enumerate_small_terms(depth: usize, env: &TypingEnv) -> Vec<Term> {
    let depth = depth.min(4);
    let scope: Scope = env
        .entries()
        .iter()
        .filter_map(|b| match b {
            crate::subtyping::Binding::Term { name, ty } => Some((name.clone(), Shape::of_type(&ty.ty))),
            _ => None,
        })
        .collect();
    let mut terms = Generator { memo: HashMap::new() }.terms(depth, &scope);
    terms.sort_by_key(|(_, _, k)| *k);
    terms.into_iter().map(|(t, _, _)| t).collect()
}
