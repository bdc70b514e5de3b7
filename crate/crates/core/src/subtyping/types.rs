use std::collections::BTreeSet;
use std::fmt;

use crate::qualifiers::{Name, Qualifier};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum BaseType {
    Int,
    Unit,
    Bool,
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseType::Int => "Int",
            BaseType::Unit => "Unit",
            BaseType::Bool => "Bool",
        })
    }
}

/// Carrier types. Function and universal types bind a self name that their
/// codomain qualifiers may mention; the domain or bound lives outside every binder.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Type {
    Base(BaseType),
    Top,
    Var(Name),
    Ref(Box<QType>),
    Fun(Box<FunType>),
    All(Box<AllType>),
}

/// `f(x: dom) => cod`
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct FunType {
    pub self_name: Name,
    pub param: Name,
    pub dom: QType,
    pub cod: QType,
}

/// `forall f[X^x <: bound] => cod`
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AllType {
    pub self_name: Name,
    pub tvar: Name,
    pub qvar: Name,
    pub bound: QType,
    pub cod: QType,
}

/// `T^q`
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct QType {
    pub ty: Type,
    pub qual: Qualifier,
}

#[allow(non_upper_case_globals)]
impl Type {
    pub const Int: Type = Type::Base(BaseType::Int);
    pub const Unit: Type = Type::Base(BaseType::Unit);
    pub const Bool: Type = Type::Base(BaseType::Bool);

    pub fn reference(inner: QType) -> Type {
        Type::Ref(Box::new(inner))
    }

    pub fn fun(self_name: impl Into<Name>, param: impl Into<Name>, dom: QType, cod: QType) -> Type {
        Type::Fun(Box::new(FunType { self_name: self_name.into(), param: param.into(), dom, cod }))
    }

    pub fn all(
        self_name: impl Into<Name>,
        tvar: impl Into<Name>,
        qvar: impl Into<Name>,
        bound: QType,
        cod: QType,
    ) -> Type {
        Type::All(Box::new(AllType {
            self_name: self_name.into(),
            tvar: tvar.into(),
            qvar: qvar.into(),
            bound,
            cod,
        }))
    }

    pub fn q(self, qual: Qualifier) -> QType {
        QType::new(self, qual)
    }

    /// Free qualifier variables, including those in nested qualifiers.
    pub fn free_qvars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_qvars(&mut Vec::new(), &mut out);
        out
    }

    pub fn free_tvars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_tvars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_qvars(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Type::Base(_) | Type::Top | Type::Var(_) => {}
            Type::Ref(inner) => inner.collect_qvars(bound, out),
            Type::Fun(f) => {
                f.dom.collect_qvars(bound, out);
                let n = bound.len();
                bound.push(f.self_name.clone());
                bound.push(f.param.clone());
                f.cod.collect_qvars(bound, out);
                bound.truncate(n);
            }
            Type::All(a) => {
                a.bound.collect_qvars(bound, out);
                let n = bound.len();
                bound.push(a.self_name.clone());
                bound.push(a.qvar.clone());
                a.cod.collect_qvars(bound, out);
                bound.truncate(n);
            }
        }
    }

    fn collect_tvars(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Type::Base(_) | Type::Top => {}
            Type::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Type::Ref(inner) => inner.ty.collect_tvars(bound, out),
            Type::Fun(f) => {
                f.dom.ty.collect_tvars(bound, out);
                f.cod.ty.collect_tvars(bound, out);
            }
            Type::All(a) => {
                a.bound.ty.collect_tvars(bound, out);
                bound.push(a.tvar.clone());
                a.cod.ty.collect_tvars(bound, out);
                bound.pop();
            }
        }
    }

    pub fn subst(&self, s: &Subst) -> Type {
        if s.is_empty() {
            return self.clone();
        }
        match self {
            Type::Base(_) | Type::Top => self.clone(),
            Type::Var(x) => match s.tvars.iter().rev().find(|(y, _)| y == x) {
                Some((_, t)) => t.clone(),
                None => self.clone(),
            },
            Type::Ref(inner) => Type::reference(inner.subst(s)),
            Type::Fun(f) => {
                let dom = f.dom.subst(s);
                let (inner, names) = s.under_binders(&[&f.self_name, &f.param], &[]);
                let cod = f.cod.subst(&inner);
                Type::fun(names[0].clone(), names[1].clone(), dom, cod)
            }
            Type::All(a) => {
                let bound = a.bound.subst(s);
                let (inner, names) = s.under_binders(&[&a.self_name, &a.qvar], &[&a.tvar]);
                let cod = a.cod.subst(&inner);
                Type::all(names[0].clone(), names[2].clone(), names[1].clone(), bound, cod)
            }
        }
    }

    pub fn subst_qvar(&self, x: &Name, p: &Qualifier) -> Type {
        self.subst(&Subst::qvar(x.clone(), p.clone()))
    }

    pub fn mentions_qvar(&self, x: &Name) -> bool {
        self.free_qvars().contains(x)
    }

    pub fn alpha_eq(&self, other: &Type) -> bool {
        alpha_type(self, other, &mut Vec::new(), &mut Vec::new())
    }
}

impl QType {
    pub fn new(ty: Type, qual: Qualifier) -> Self {
        QType { ty, qual }
    }

    /// Free qualifier variables of carrier and qualifier.
    pub fn free_qvars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_qvars(&mut Vec::new(), &mut out);
        out
    }

    pub fn free_tvars(&self) -> BTreeSet<Name> {
        self.ty.free_tvars()
    }

    fn collect_qvars(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        for x in &self.qual.vars {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        self.ty.collect_qvars(bound, out);
    }

    pub fn subst(&self, s: &Subst) -> QType {
        if s.is_empty() {
            return self.clone();
        }
        let mut qual = self.qual.clone();
        // Simultaneous: every hit is removed before any image is added.
        let mut added = Qualifier::empty();
        for (x, p) in &s.qvars {
            if qual.vars.remove(x) {
                added = added.union(p);
            }
        }
        QType { ty: self.ty.subst(s), qual: qual.union(&added) }
    }

    pub fn subst_qvar(&self, x: &Name, p: &Qualifier) -> QType {
        self.subst(&Subst::qvar(x.clone(), p.clone()))
    }

    pub fn alpha_eq(&self, other: &QType) -> bool {
        alpha_qtype(self, other, &mut Vec::new(), &mut Vec::new())
    }

    pub fn is_closed(&self) -> bool {
        self.free_qvars().is_empty() && self.free_tvars().is_empty()
    }
}

/// A simultaneous substitution of qualifier variables and type variables.
#[derive(Clone, Debug, Default)]
pub struct Subst {
    pub qvars: Vec<(Name, Qualifier)>,
    pub tvars: Vec<(Name, Type)>,
}

impl Subst {
    pub fn qvar(x: Name, p: Qualifier) -> Self {
        Subst { qvars: vec![(x, p)], tvars: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.qvars.is_empty() && self.tvars.is_empty()
    }

    fn range_mentions(&self, name: &Name) -> bool {
        self.qvars.iter().any(|(_, p)| p.vars.contains(name))
            || self.tvars.iter().any(|(_, t)| {
                t.free_qvars().contains(name) || t.free_tvars().contains(name)
            })
    }

    /// The substitution valid below the given binders, renaming any binder
    /// that would capture a name in the substitution's range.
    /// Returns the inner substitution and the (possibly renamed) binder names,
    /// qualifier binders first.
    fn under_binders(&self, qbinders: &[&Name], tbinders: &[&Name]) -> (Subst, Vec<Name>) {
        let mut inner = self.clone();
        let mut names = Vec::new();
        for b in qbinders {
            inner.qvars.retain(|(x, _)| x != *b);
        }
        for b in tbinders {
            inner.tvars.retain(|(x, _)| x != *b);
        }
        let mut renames_q = Vec::new();
        let mut renames_t = Vec::new();
        for b in qbinders {
            if inner.range_mentions(b) {
                let fresh = b.fresh();
                renames_q.push(((*b).clone(), Qualifier::var(fresh.clone())));
                names.push(fresh);
            } else {
                names.push((*b).clone());
            }
        }
        for b in tbinders {
            if inner.range_mentions(b) {
                let fresh = b.fresh();
                renames_t.push(((*b).clone(), Type::Var(fresh.clone())));
                names.push(fresh);
            } else {
                names.push((*b).clone());
            }
        }
        if renames_q.is_empty() && renames_t.is_empty() {
            return (inner, names);
        }
        // Renaming happens first, then the outer mapping: compose by
        // prepending renames; images of renamed binders are fresh so they
        // cannot be hit again.
        let mut composed = Subst { qvars: renames_q, tvars: renames_t };
        composed.qvars.extend(inner.qvars);
        composed.tvars.extend(inner.tvars);
        (composed, names)
    }
}

fn lookup_pair<'a>(pairs: &'a [(Name, Name)], x: &Name, left: bool) -> Option<&'a Name> {
    pairs.iter().rev().find_map(|(l, r)| {
        if left && l == x {
            Some(r)
        } else if !left && r == x {
            Some(l)
        } else {
            None
        }
    })
}

fn translate_var(pairs: &[(Name, Name)], x: &Name) -> Option<Name> {
    match lookup_pair(pairs, x, true) {
        Some(r) => Some(r.clone()),
        // A free name must not be bound on the right.
        None if lookup_pair(pairs, x, false).is_some() => None,
        None => Some(x.clone()),
    }
}

pub(crate) fn alpha_qual(a: &Qualifier, b: &Qualifier, qpairs: &[(Name, Name)]) -> bool {
    if a.fresh != b.fresh || a.locs != b.locs || a.vars.len() != b.vars.len() {
        return false;
    }
    let mut translated = BTreeSet::new();
    for x in &a.vars {
        match translate_var(qpairs, x) {
            Some(y) => {
                translated.insert(y);
            }
            None => return false,
        }
    }
    translated == b.vars
}

pub(crate) fn alpha_qtype(
    a: &QType,
    b: &QType,
    qpairs: &mut Vec<(Name, Name)>,
    tpairs: &mut Vec<(Name, Name)>,
) -> bool {
    alpha_qual(&a.qual, &b.qual, qpairs) && alpha_type(&a.ty, &b.ty, qpairs, tpairs)
}

pub(crate) fn alpha_type(
    a: &Type,
    b: &Type,
    qpairs: &mut Vec<(Name, Name)>,
    tpairs: &mut Vec<(Name, Name)>,
) -> bool {
    match (a, b) {
        (Type::Base(x), Type::Base(y)) => x == y,
        (Type::Top, Type::Top) => true,
        (Type::Var(x), Type::Var(y)) => translate_var(tpairs, x).as_ref() == Some(y),
        (Type::Ref(x), Type::Ref(y)) => alpha_qtype(x, y, qpairs, tpairs),
        (Type::Fun(f), Type::Fun(g)) => {
            if !alpha_qtype(&f.dom, &g.dom, qpairs, tpairs) {
                return false;
            }
            let n = qpairs.len();
            qpairs.push((f.self_name.clone(), g.self_name.clone()));
            qpairs.push((f.param.clone(), g.param.clone()));
            let ok = alpha_qtype(&f.cod, &g.cod, qpairs, tpairs);
            qpairs.truncate(n);
            ok
        }
        (Type::All(f), Type::All(g)) => {
            if !alpha_qtype(&f.bound, &g.bound, qpairs, tpairs) {
                return false;
            }
            let n = qpairs.len();
            qpairs.push((f.self_name.clone(), g.self_name.clone()));
            qpairs.push((f.qvar.clone(), g.qvar.clone()));
            tpairs.push((f.tvar.clone(), g.tvar.clone()));
            let ok = alpha_qtype(&f.cod, &g.cod, qpairs, tpairs);
            qpairs.truncate(n);
            tpairs.pop();
            ok
        }
        _ => false,
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Base(b) => write!(f, "{b}"),
            Type::Top => f.write_str("Top"),
            Type::Var(x) => write!(f, "{x}"),
            Type::Ref(inner) => write!(f, "Ref[{inner}]"),
            Type::Fun(fun) => {
                write!(f, "{}({}: {}) => {}", fun.self_name, fun.param, fun.dom, fun.cod)
            }
            Type::All(a) => write!(
                f,
                "forall {}[{}^{} <: {}] => {}",
                a.self_name, a.tvar, a.qvar, a.bound, a.cod
            ),
        }
    }
}

impl fmt::Display for QType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ty {
            Type::Fun(_) | Type::All(_) => write!(f, "({})^{}", self.ty, self.qual),
            _ => write!(f, "{}^{}", self.ty, self.qual),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Qualifier {
        s.parse().unwrap()
    }

    fn int(s: &str) -> QType {
        Type::Int.q(q(s))
    }

    #[test]
    fn free_qvars_respect_binders() {
        let t = Type::fun("f", "x", int("{a}"), int("{x, f, b}"));
        let fv: Vec<_> = t.free_qvars().into_iter().map(|n| n.to_string()).collect();
        assert_eq!(fv, ["a", "b"]);
    }

    #[test]
    fn substitution_stops_at_binders() {
        let t = Type::fun("f", "x", int("{x}"), int("{x}"));
        let s = t.subst_qvar(&"x".into(), &q("{y}"));
        assert_eq!(s, Type::fun("f", "x", int("{y}"), int("{x}")));
    }

    #[test]
    fn substitution_avoids_capture() {
        let t = Type::fun("f", "x", int("{}"), int("{x, z}"));
        let s = t.subst_qvar(&"z".into(), &q("{x}"));
        let Type::Fun(fun) = &s else { panic!() };
        assert_ne!(fun.param, Name::new("x"));
        assert!(fun.cod.qual.has_var(&fun.param));
        assert!(fun.cod.qual.has_var(&"x".into()));
    }

    #[test]
    fn type_variable_substitution() {
        let t = Type::Var("X".into()).q(q("{x}"));
        let s = Subst { qvars: vec![("x".into(), q("{}"))], tvars: vec![("X".into(), Type::Int)] };
        assert_eq!(t.subst(&s), int("{}"));
    }

    #[test]
    fn alpha_equivalence() {
        let a = Type::fun("f", "x", int("{}"), int("{x, f}"));
        let b = Type::fun("g", "y", int("{}"), int("{y, g}"));
        let c = Type::fun("g", "y", int("{}"), int("{x, g}"));
        assert!(a.alpha_eq(&b));
        assert!(!a.alpha_eq(&c));
        let free = Type::fun("g", "y", int("{}"), int("{x}"));
        assert!(!Type::fun("f", "x", int("{}"), int("{x}")).alpha_eq(&free));
    }

    #[test]
    fn display_forms() {
        let r = Type::reference(int("{a}")).q(q("{c1}"));
        assert_eq!(r.to_string(), "Ref[Int^{a}]^{c1}");
        let f = Type::fun("f", "x", int("{p}"), int("{r}")).q(q("{q}"));
        assert_eq!(f.to_string(), "(f(x: Int^{p}) => Int^{r})^{q}");
        let a = Type::all("f", "X", "x", Type::Top.q(q("{}")), Type::Var("X".into()).q(q("{x}")));
        assert_eq!(a.to_string(), "forall f[X^x <: Top^{}] => X^{x}");
    }
}
