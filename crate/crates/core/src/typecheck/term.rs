use std::collections::BTreeSet;
use std::fmt;

use crate::qualifiers::{Loc, Name, Qualifier};
use crate::subtyping::{alpha_qtype, alpha_qual, QType, Subst, Type};

/// A source position range (1-based). The default span marks generated code.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, end_line: u32, end_col: u32) -> Self {
        Span { line, col, end_line, end_col }
    }

    pub fn is_known(&self) -> bool {
        self.line > 0
    }

    pub fn to(self, other: Span) -> Span {
        Span { end_line: other.end_line, end_col: other.end_col, ..self }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Const {
    Int(i64),
    Bool(bool),
    Unit,
}

impl Const {
    pub fn ty(&self) -> Type {
        match self {
            Const::Int(_) => Type::Int,
            Const::Bool(_) => Type::Bool,
            Const::Unit => Type::Unit,
        }
    }
}

/// Integer operators of the `--ext-int` extension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
}

impl PrimOp {
    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            PrimOp::Add => a.wrapping_add(b),
            PrimOp::Sub => a.wrapping_sub(b),
            PrimOp::Mul => a.wrapping_mul(b),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PrimOp::Add => "+",
            PrimOp::Sub => "-",
            PrimOp::Mul => "*",
        }
    }
}

/// `λself(param: dom): cod ^capture. body`. The domain and the capture live
/// outside the binders; the codomain and body see both.
#[derive(Clone, Debug)]
pub struct Lambda {
    pub self_name: Name,
    pub param: Name,
    pub dom: QType,
    pub cod: QType,
    pub capture: Qualifier,
    pub body: Term,
}

/// `Λself[tvar^qvar <: bound]: cod ^capture. body`.
#[derive(Clone, Debug)]
pub struct TLambda {
    pub self_name: Name,
    pub tvar: Name,
    pub qvar: Name,
    pub bound: QType,
    pub cod: QType,
    pub capture: Qualifier,
    pub body: Term,
}

impl Lambda {
    pub fn ty(&self) -> QType {
        Type::fun(self.self_name.clone(), self.param.clone(), self.dom.clone(), self.cod.clone())
            .q(self.capture.clone())
    }
}

impl TLambda {
    pub fn ty(&self) -> QType {
        Type::all(
            self.self_name.clone(),
            self.tvar.clone(),
            self.qvar.clone(),
            self.bound.clone(),
            self.cod.clone(),
        )
        .q(self.capture.clone())
    }
}

/// Allocation forms carry an optional element annotation; the checker then
/// checks the referent against it instead of using its minimal type, which
/// keeps the reference type stable while the referent reduces.
#[derive(Clone, Debug)]
pub enum TermKind {
    Const(Const),
    Var(Name),
    Abs(Box<Lambda>),
    App(Box<Term>, Box<Term>),
    RefNew { init: Box<Term>, elem: Option<QType> },
    /// `new Ref(init) at proxy`
    RefAt { init: Box<Term>, proxy: Box<Term>, elem: Option<QType> },
    Deref(Box<Term>),
    Assign(Box<Term>, Box<Term>),
    TAbs(Box<TLambda>),
    TApp(Box<Term>, QType),
    /// `with name = Ref(init) in body`
    WithR { name: Name, init: Box<Term>, elem: Option<QType>, body: Box<Term> },
    /// `with<ℓ>{ body }`
    WithC(Loc, Box<Term>),
    /// `ℓ·o`
    Loc(Loc, u32),
    Prim(PrimOp, Box<Term>, Box<Term>),
    IfZero(Box<Term>, Box<Term>, Box<Term>),
}

#[derive(Clone, Debug)]
pub struct Term {
    pub kind: TermKind,
    pub span: Span,
}

impl PartialEq for Term {
    /// Structural equality, ignoring spans.
    fn eq(&self, other: &Self) -> bool {
        use TermKind::*;
        match (&self.kind, &other.kind) {
            (Const(a), Const(b)) => a == b,
            (Var(a), Var(b)) => a == b,
            (Abs(a), Abs(b)) => {
                a.self_name == b.self_name
                    && a.param == b.param
                    && a.dom == b.dom
                    && a.cod == b.cod
                    && a.capture == b.capture
                    && a.body == b.body
            }
            (TAbs(a), TAbs(b)) => {
                a.self_name == b.self_name
                    && a.tvar == b.tvar
                    && a.qvar == b.qvar
                    && a.bound == b.bound
                    && a.cod == b.cod
                    && a.capture == b.capture
                    && a.body == b.body
            }
            (App(a1, a2), App(b1, b2)) => a1 == b1 && a2 == b2,
            (RefNew { init: a, elem: ea }, RefNew { init: b, elem: eb }) => a == b && ea == eb,
            (
                RefAt { init: a1, proxy: a2, elem: ea },
                RefAt { init: b1, proxy: b2, elem: eb },
            ) => a1 == b1 && a2 == b2 && ea == eb,
            (Deref(a), Deref(b)) => a == b,
            (Assign(a1, a2), Assign(b1, b2)) => a1 == b1 && a2 == b2,
            (TApp(a, qa), TApp(b, qb)) => a == b && qa == qb,
            (
                WithR { name: na, init: ia, elem: ea, body: ba },
                WithR { name: nb, init: ib, elem: eb, body: bb },
            ) => na == nb && ia == ib && ea == eb && ba == bb,
            (WithC(la, a), WithC(lb, b)) => la == lb && a == b,
            (Loc(la, oa), Loc(lb, ob)) => la == lb && oa == ob,
            (Prim(oa, a1, a2), Prim(ob, b1, b2)) => oa == ob && a1 == b1 && a2 == b2,
            (IfZero(a1, a2, a3), IfZero(b1, b2, b3)) => a1 == b1 && a2 == b2 && a3 == b3,
            _ => false,
        }
    }
}

impl From<TermKind> for Term {
    fn from(kind: TermKind) -> Self {
        Term { kind, span: Span::default() }
    }
}

impl Term {
    pub fn new(kind: TermKind, span: Span) -> Self {
        Term { kind, span }
    }

    pub fn at(mut self, span: Span) -> Self {
        self.span = span;
        self
    }

    pub fn int(n: i64) -> Term {
        TermKind::Const(Const::Int(n)).into()
    }

    pub fn boolean(b: bool) -> Term {
        TermKind::Const(Const::Bool(b)).into()
    }

    pub fn unit() -> Term {
        TermKind::Const(Const::Unit).into()
    }

    pub fn var(x: impl Into<Name>) -> Term {
        TermKind::Var(x.into()).into()
    }

    pub fn app(f: Term, arg: Term) -> Term {
        TermKind::App(Box::new(f), Box::new(arg)).into()
    }

    pub fn abs(lambda: Lambda) -> Term {
        TermKind::Abs(Box::new(lambda)).into()
    }

    pub fn tabs(lambda: TLambda) -> Term {
        TermKind::TAbs(Box::new(lambda)).into()
    }

    pub fn tapp(t: Term, arg: QType) -> Term {
        TermKind::TApp(Box::new(t), arg).into()
    }

    pub fn ref_new(init: Term) -> Term {
        TermKind::RefNew { init: Box::new(init), elem: None }.into()
    }

    pub fn ref_at(init: Term, proxy: Term) -> Term {
        TermKind::RefAt { init: Box::new(init), proxy: Box::new(proxy), elem: None }.into()
    }

    pub fn deref(t: Term) -> Term {
        TermKind::Deref(Box::new(t)).into()
    }

    pub fn assign(target: Term, value: Term) -> Term {
        TermKind::Assign(Box::new(target), Box::new(value)).into()
    }

    pub fn with_r(name: impl Into<Name>, init: Term, body: Term) -> Term {
        TermKind::WithR { name: name.into(), init: Box::new(init), elem: None, body: Box::new(body) }
            .into()
    }

    pub fn with_c(l: Loc, body: Term) -> Term {
        TermKind::WithC(l, Box::new(body)).into()
    }

    pub fn loc(l: Loc, offset: u32) -> Term {
        TermKind::Loc(l, offset).into()
    }

    pub fn prim(op: PrimOp, a: Term, b: Term) -> Term {
        TermKind::Prim(op, Box::new(a), Box::new(b)).into()
    }

    pub fn if_zero(c: Term, then: Term, otherwise: Term) -> Term {
        TermKind::IfZero(Box::new(c), Box::new(then), Box::new(otherwise)).into()
    }

    /// Sets the element annotation of an allocation form; other forms are
    /// returned unchanged.
    pub fn with_elem(mut self, ty: QType) -> Term {
        match &mut self.kind {
            TermKind::RefNew { elem, .. }
            | TermKind::RefAt { elem, .. }
            | TermKind::WithR { elem, .. } => *elem = Some(ty),
            _ => {}
        }
        self
    }

    pub fn is_value(&self) -> bool {
        matches!(
            self.kind,
            TermKind::Const(_) | TermKind::Abs(_) | TermKind::TAbs(_) | TermKind::Loc(..)
        )
    }

    /// The qualifier a value contributes when substituted for a variable.
    pub fn value_qualifier(&self) -> Qualifier {
        match &self.kind {
            TermKind::Loc(l, _) => Qualifier::loc(*l),
            TermKind::Abs(lam) => lam.capture.clone(),
            TermKind::TAbs(lam) => lam.capture.clone(),
            _ => Qualifier::empty(),
        }
    }

    /// True if the term mentions a store index or a scope elimination.
    pub fn has_runtime_forms(&self) -> bool {
        let mut found = false;
        self.visit(&mut |t| {
            if matches!(t.kind, TermKind::Loc(..) | TermKind::WithC(..)) {
                found = true;
            }
        });
        found
    }

    /// Pre-order traversal of all subterms.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        for child in self.children() {
            child.visit(f);
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        use TermKind::*;
        match &self.kind {
            Const(_) | Var(_) | Loc(..) => vec![],
            Abs(l) => vec![&l.body],
            TAbs(l) => vec![&l.body],
            App(a, b) | Assign(a, b) | Prim(_, a, b) => vec![a, b],
            RefNew { init, .. } => vec![init],
            RefAt { init, proxy, .. } => vec![init, proxy],
            Deref(a) | TApp(a, _) | WithC(_, a) => vec![a],
            WithR { init, body, .. } => vec![init, body],
            IfZero(a, b, c) => vec![a, b, c],
        }
    }

    /// Free term variables.
    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        use TermKind::*;
        match &self.kind {
            Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Abs(l) => {
                bound.push(l.self_name.clone());
                bound.push(l.param.clone());
                l.body.collect_free(bound, out);
                bound.truncate(bound.len() - 2);
            }
            TAbs(l) => {
                bound.push(l.self_name.clone());
                l.body.collect_free(bound, out);
                bound.pop();
            }
            WithR { name, init, body, .. } => {
                init.collect_free(bound, out);
                bound.push(name.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    /// Free qualifier variables mentioned by annotations.
    pub fn free_annotation_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_annotation_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_annotation_vars(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        use TermKind::*;
        let mut add = |q: &BTreeSet<Name>, bound: &Vec<Name>| {
            for x in q {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
        };
        match &self.kind {
            Abs(l) => {
                add(&l.dom.free_qvars(), bound);
                add(&l.capture.vars, bound);
                bound.push(l.self_name.clone());
                bound.push(l.param.clone());
                add(&l.cod.free_qvars(), bound);
                l.body.collect_annotation_vars(bound, out);
                bound.truncate(bound.len() - 2);
            }
            TAbs(l) => {
                add(&l.bound.free_qvars(), bound);
                add(&l.capture.vars, bound);
                bound.push(l.self_name.clone());
                bound.push(l.qvar.clone());
                add(&l.cod.free_qvars(), bound);
                l.body.collect_annotation_vars(bound, out);
                bound.truncate(bound.len() - 2);
            }
            WithR { name, init, elem, body } => {
                if let Some(e) = elem {
                    add(&e.free_qvars(), bound);
                }
                init.collect_annotation_vars(bound, out);
                bound.push(name.clone());
                body.collect_annotation_vars(bound, out);
                bound.pop();
            }
            RefNew { elem: Some(e), .. } | RefAt { elem: Some(e), .. } => {
                add(&e.free_qvars(), bound);
                for c in self.children() {
                    c.collect_annotation_vars(bound, out);
                }
            }
            TApp(t, arg) => {
                add(&arg.free_qvars(), bound);
                t.collect_annotation_vars(bound, out);
            }
            _ => {
                for c in self.children() {
                    c.collect_annotation_vars(bound, out);
                }
            }
        }
    }

    /// Simultaneous substitution of closed terms for variables, together with
    /// the matching qualifier and type substitution inside annotations.
    /// The substituted terms must be closed, so no binder can capture them.
    pub fn subst(&self, s: &TermSubst) -> Term {
        if s.is_empty() {
            return self.clone();
        }
        use TermKind::*;
        let span = self.span;
        let kind = match &self.kind {
            Const(_) | Loc(..) => return self.clone(),
            Var(x) => match s.terms.iter().rev().find(|(y, _)| y == x) {
                Some((_, t)) => return t.clone(),
                None => return self.clone(),
            },
            Abs(l) => {
                let inner = s.without(&[&l.self_name, &l.param], &[]);
                Abs(Box::new(Lambda {
                    self_name: l.self_name.clone(),
                    param: l.param.clone(),
                    dom: l.dom.subst(&s.types),
                    cod: l.cod.subst(&inner.types),
                    capture: subst_qual(&l.capture, &s.types),
                    body: l.body.subst(&inner),
                }))
            }
            TAbs(l) => {
                let inner = s.without(&[&l.self_name, &l.qvar], &[&l.tvar]);
                TAbs(Box::new(TLambda {
                    self_name: l.self_name.clone(),
                    tvar: l.tvar.clone(),
                    qvar: l.qvar.clone(),
                    bound: l.bound.subst(&s.types),
                    cod: l.cod.subst(&inner.types),
                    capture: subst_qual(&l.capture, &s.types),
                    body: l.body.subst(&inner),
                }))
            }
            App(a, b) => App(Box::new(a.subst(s)), Box::new(b.subst(s))),
            RefNew { init, elem } => RefNew {
                init: Box::new(init.subst(s)),
                elem: elem.as_ref().map(|e| e.subst(&s.types)),
            },
            RefAt { init, proxy, elem } => RefAt {
                init: Box::new(init.subst(s)),
                proxy: Box::new(proxy.subst(s)),
                elem: elem.as_ref().map(|e| e.subst(&s.types)),
            },
            Deref(a) => Deref(Box::new(a.subst(s))),
            Assign(a, b) => Assign(Box::new(a.subst(s)), Box::new(b.subst(s))),
            TApp(t, arg) => TApp(Box::new(t.subst(s)), arg.subst(&s.types)),
            WithR { name, init, elem, body } => {
                let inner = s.without(&[name], &[]);
                WithR {
                    name: name.clone(),
                    init: Box::new(init.subst(s)),
                    elem: elem.as_ref().map(|e| e.subst(&s.types)),
                    body: Box::new(body.subst(&inner)),
                }
            }
            WithC(l, body) => WithC(*l, Box::new(body.subst(s))),
            Prim(op, a, b) => Prim(*op, Box::new(a.subst(s)), Box::new(b.subst(s))),
            IfZero(a, b, c) => {
                IfZero(Box::new(a.subst(s)), Box::new(b.subst(s)), Box::new(c.subst(s)))
            }
        };
        Term { kind, span }
    }

    /// Renames a free variable (term and qualifier occurrences) to a name
    /// that does not occur in the term.
    pub fn rename_free(&self, from: &Name, to: &Name) -> Term {
        self.subst(&TermSubst::rename(from, to))
    }

    /// Alpha-equivalence, treating every binder (term, qualifier and type
    /// level) up to consistent renaming.
    pub fn alpha_eq(&self, other: &Term) -> bool {
        alpha_term(self, other, &mut Vec::new(), &mut Vec::new())
    }
}

fn subst_qual(q: &Qualifier, s: &Subst) -> Qualifier {
    let mut out = q.clone();
    let mut added = Qualifier::empty();
    for (x, p) in &s.qvars {
        if out.vars.remove(x) {
            added = added.union(p);
        }
    }
    out.union(&added)
}

/// Term-level substitution plus the induced annotation substitution.
#[derive(Clone, Debug, Default)]
pub struct TermSubst {
    pub terms: Vec<(Name, Term)>,
    pub types: Subst,
}

impl TermSubst {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.types.is_empty()
    }

    /// `[v/x]`: the variable becomes `v` and, in annotations, `v`'s qualifier.
    pub fn value(x: &Name, v: &Term) -> TermSubst {
        let mut s = TermSubst::default();
        s.push_value(x, v);
        s
    }

    pub fn push_value(&mut self, x: &Name, v: &Term) {
        self.terms.push((x.clone(), v.clone()));
        self.types.qvars.push((x.clone(), v.value_qualifier()));
    }

    pub fn rename(from: &Name, to: &Name) -> TermSubst {
        TermSubst {
            terms: vec![(from.clone(), Term::var(to.clone()))],
            types: Subst::qvar(from.clone(), Qualifier::var(to.clone())),
        }
    }

    fn without(&self, qbinders: &[&Name], tbinders: &[&Name]) -> TermSubst {
        let mut s = self.clone();
        s.terms.retain(|(x, _)| !qbinders.contains(&x));
        s.types.qvars.retain(|(x, _)| !qbinders.contains(&x));
        s.types.tvars.retain(|(x, _)| !tbinders.contains(&x));
        s
    }
}

fn alpha_opt(
    a: &Option<QType>,
    b: &Option<QType>,
    qpairs: &mut Vec<(Name, Name)>,
    tpairs: &mut Vec<(Name, Name)>,
) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => alpha_qtype(a, b, qpairs, tpairs),
        _ => false,
    }
}

fn alpha_term(
    a: &Term,
    b: &Term,
    qpairs: &mut Vec<(Name, Name)>,
    tpairs: &mut Vec<(Name, Name)>,
) -> bool {
    use TermKind::*;
    match (&a.kind, &b.kind) {
        (Const(x), Const(y)) => x == y,
        (Loc(l1, o1), Loc(l2, o2)) => l1 == l2 && o1 == o2,
        (Var(x), Var(y)) => {
            alpha_qual(&Qualifier::var(x.clone()), &Qualifier::var(y.clone()), qpairs)
        }
        (Abs(f), Abs(g)) => {
            if !alpha_qtype(&f.dom, &g.dom, qpairs, tpairs)
                || !alpha_qual(&f.capture, &g.capture, qpairs)
            {
                return false;
            }
            let n = qpairs.len();
            qpairs.push((f.self_name.clone(), g.self_name.clone()));
            qpairs.push((f.param.clone(), g.param.clone()));
            let ok = alpha_qtype(&f.cod, &g.cod, qpairs, tpairs)
                && alpha_term(&f.body, &g.body, qpairs, tpairs);
            qpairs.truncate(n);
            ok
        }
        (TAbs(f), TAbs(g)) => {
            if !alpha_qtype(&f.bound, &g.bound, qpairs, tpairs)
                || !alpha_qual(&f.capture, &g.capture, qpairs)
            {
                return false;
            }
            let n = qpairs.len();
            qpairs.push((f.self_name.clone(), g.self_name.clone()));
            qpairs.push((f.qvar.clone(), g.qvar.clone()));
            tpairs.push((f.tvar.clone(), g.tvar.clone()));
            let ok = alpha_qtype(&f.cod, &g.cod, qpairs, tpairs)
                && alpha_term(&f.body, &g.body, qpairs, tpairs);
            qpairs.truncate(n);
            tpairs.pop();
            ok
        }
        (App(a1, a2), App(b1, b2)) | (Assign(a1, a2), Assign(b1, b2)) => {
            alpha_term(a1, b1, qpairs, tpairs) && alpha_term(a2, b2, qpairs, tpairs)
        }
        (Prim(o1, a1, a2), Prim(o2, b1, b2)) => {
            o1 == o2 && alpha_term(a1, b1, qpairs, tpairs) && alpha_term(a2, b2, qpairs, tpairs)
        }
        (IfZero(a1, a2, a3), IfZero(b1, b2, b3)) => {
            alpha_term(a1, b1, qpairs, tpairs)
                && alpha_term(a2, b2, qpairs, tpairs)
                && alpha_term(a3, b3, qpairs, tpairs)
        }
        (RefNew { init: a1, elem: e1 }, RefNew { init: b1, elem: e2 }) => {
            alpha_opt(e1, e2, qpairs, tpairs) && alpha_term(a1, b1, qpairs, tpairs)
        }
        (RefAt { init: a1, proxy: a2, elem: e1 }, RefAt { init: b1, proxy: b2, elem: e2 }) => {
            alpha_opt(e1, e2, qpairs, tpairs)
                && alpha_term(a1, b1, qpairs, tpairs)
                && alpha_term(a2, b2, qpairs, tpairs)
        }
        (Deref(x), Deref(y)) => alpha_term(x, y, qpairs, tpairs),
        (TApp(x, qx), TApp(y, qy)) => {
            alpha_qtype(qx, qy, qpairs, tpairs) && alpha_term(x, y, qpairs, tpairs)
        }
        (WithC(l1, x), WithC(l2, y)) => l1 == l2 && alpha_term(x, y, qpairs, tpairs),
        (
            WithR { name: n1, init: i1, elem: e1, body: b1 },
            WithR { name: n2, init: i2, elem: e2, body: b2 },
        ) => {
            if !alpha_opt(e1, e2, qpairs, tpairs) || !alpha_term(i1, i2, qpairs, tpairs) {
                return false;
            }
            qpairs.push((n1.clone(), n2.clone()));
            let ok = alpha_term(b1, b2, qpairs, tpairs);
            qpairs.pop();
            ok
        }
        _ => false,
    }
}
