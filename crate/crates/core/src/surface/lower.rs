//! Lowering from surface syntax to core terms.
//!
//! The pass is typed: it threads the typing context of the program prefix so
//! that `val` bindings and unannotated lambdas can take their annotations
//! from the minimal types of already-lowered subterms.
//!
//! * `val y = e; rest` becomes `(fun k(y: D)^{φ}: C => rest)(e)`, where `D` is
//!   the annotation or the type of `e`. A fresh `e` gets the domain
//!   `◇ ∪ saturation`, which selects the growing application rule.
//! * `new Ref(e) scoped` is hoisted: the allocation is replaced by a fresh
//!   variable `x` and the enclosing block remainder, starting with the current
//!   item, is wrapped in `with x = Ref(e) in ..`. Blocks, lambda bodies and
//!   `ifz` branches delimit hoisting.

use std::collections::BTreeSet;

use thiserror::Error;

use super::syntax::{Expr, ExprKind, FunSig, Item, Placement, Program};
use crate::qualifiers::{saturate, Name, Observation, Qualifier};
use crate::subtyping::{QType, Subst, Type, TypingEnv};
use crate::typecheck::{
    synthesize, Lambda, Span, StoreTyping, TLambda, Term, TermKind, TypeError, TypeErrorKind,
};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LowerError {
    /// A static error found while computing annotations.
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("{span} scoped allocation has no block remainder to scope over")]
    UndelimitedScoped { span: Span },
    #[error("{span} {message}")]
    Malformed { span: Span, message: String },
}

fn malformed<T>(span: Span, message: impl Into<String>) -> Result<T, LowerError> {
    Err(LowerError::Malformed { span, message: message.into() })
}

#[derive(Clone)]
struct ScopeEntry {
    surface: Name,
    internal: Name,
    is_tvar: bool,
}

struct Hoist {
    name: Name,
    init: Term,
    elem: QType,
    span: Span,
}

struct Lowerer {
    env: TypingEnv,
    phi: Observation,
    scope: Vec<ScopeEntry>,
    /// One list per block item currently being lowered.
    hoists: Vec<Vec<Hoist>>,
    counter: u32,
    sigma: StoreTyping,
}

struct Mark {
    env: usize,
    phi: Observation,
    scope: usize,
}

/// Lowers a whole program in the empty context.
pub fn lower_program(p: &Program) -> Result<Term, LowerError> {
    lower_in(p, &TypingEnv::new())
}

/// Lowers `p` under `env`, whose term bindings are visible by name and all
/// observable.
pub fn lower_in(p: &Program, env: &TypingEnv) -> Result<Term, LowerError> {
    let mut lw = Lowerer {
        env: env.clone(),
        phi: Observation::empty(),
        scope: Vec::new(),
        hoists: Vec::new(),
        counter: 0,
        sigma: StoreTyping::new(),
    };
    for b in env.entries() {
        match b {
            crate::subtyping::Binding::Term { name, .. } => {
                lw.phi.vars.insert(name.clone());
                lw.scope.push(ScopeEntry { surface: name.clone(), internal: name.clone(), is_tvar: false });
            }
            crate::subtyping::Binding::Type { tvar, qvar, .. } => {
                lw.phi.vars.insert(qvar.clone());
                lw.scope.push(ScopeEntry { surface: tvar.clone(), internal: tvar.clone(), is_tvar: true });
                lw.scope.push(ScopeEntry { surface: qvar.clone(), internal: qvar.clone(), is_tvar: false });
            }
        }
    }
    lw.block(&p.items, Span::default())
}

/// `val a, b = e` and `def` are sugar for single-name `val`s.
fn normalize(items: &[Item]) -> Vec<Item> {
    let mut out = Vec::new();
    for item in items {
        match item {
            Item::Val { names, ann, rhs, span } if names.len() > 1 => {
                for n in names {
                    out.push(Item::Val { names: vec![n.clone()], ann: ann.clone(), rhs: rhs.clone(), span: *span });
                }
            }
            Item::Def { name, sig, body, span } => {
                let rhs = Expr::new(ExprKind::Lambda(sig.clone(), Box::new(body.clone())), *span);
                out.push(Item::Val { names: vec![name.clone()], ann: None, rhs, span: *span });
            }
            other => out.push(other.clone()),
        }
    }
    out
}

fn is_scoped_alloc(e: &Expr) -> bool {
    matches!(&e.kind, ExprKind::NewRef { placement: Placement::Scoped, .. })
}

impl Lowerer {
    fn mark(&self) -> Mark {
        Mark { env: self.env.len(), phi: self.phi.clone(), scope: self.scope.len() }
    }

    fn restore(&mut self, m: Mark) {
        self.env.truncate(m.env);
        self.phi = m.phi;
        self.scope.truncate(m.scope);
    }

    fn gen(&mut self, base: &str) -> Name {
        loop {
            self.counter += 1;
            let n = Name::new(&format!("{base}${}", self.counter));
            if !self.in_use(&n) {
                return n;
            }
        }
    }

    fn in_use(&self, n: &Name) -> bool {
        self.env.binds(n) || self.scope.iter().any(|e| &e.internal == n)
    }

    /// Internal name for a surface binder; renamed only when it would shadow.
    fn bind_name(&mut self, surface: &Name) -> Name {
        if self.in_use(surface) {
            self.gen(surface.base())
        } else {
            surface.clone()
        }
    }

    fn enter(&mut self, surface: &Name, internal: &Name, is_tvar: bool) {
        self.scope.push(ScopeEntry { surface: surface.clone(), internal: internal.clone(), is_tvar });
    }

    fn resolve(&self, surface: &Name) -> Option<Name> {
        self.scope
            .iter()
            .rev()
            .find(|e| &e.surface == surface && !e.is_tvar)
            .map(|e| e.internal.clone())
    }

    /// Rewrites the free names of a user annotation to their internal names.
    fn translate(&self, t: &QType) -> QType {
        let mut s = Subst::default();
        let mut seen = BTreeSet::new();
        for e in self.scope.iter().rev() {
            if !seen.insert((e.surface.clone(), e.is_tvar)) || e.surface == e.internal {
                continue;
            }
            if e.is_tvar {
                s.tvars.push((e.surface.clone(), Type::Var(e.internal.clone())));
            } else {
                s.qvars.push((e.surface.clone(), Qualifier::var(e.internal.clone())));
            }
        }
        if s.is_empty() {
            t.clone()
        } else {
            t.subst(&s)
        }
    }

    fn translate_qual(&self, q: &Qualifier) -> Qualifier {
        self.translate(&Type::Unit.q(q.clone())).qual
    }

    fn synth(&self, t: &Term) -> Result<QType, LowerError> {
        Ok(synthesize(&self.env, &self.sigma, &self.phi, t)?)
    }

    fn push_term(&mut self, name: &Name, ty: QType, rule: &'static str) -> Result<(), LowerError> {
        self.env
            .push_term(name.clone(), ty)
            .map_err(|e| TypeError::new(TypeErrorKind::MalformedAnnotation, rule, e.to_string()))?;
        self.phi.vars.insert(name.clone());
        Ok(())
    }

    // ---- blocks ----

    fn block(&mut self, items: &[Item], span: Span) -> Result<Term, LowerError> {
        let items = normalize(items);
        if let Some(Item::Expr(last)) = items.last() {
            if is_scoped_alloc(last) {
                return Err(LowerError::UndelimitedScoped { span: last.span });
            }
        }
        let m = self.mark();
        let r = self.items(&items, span);
        self.restore(m);
        r
    }

    fn items(&mut self, items: &[Item], block_span: Span) -> Result<Term, LowerError> {
        let Some((first, rest)) = items.split_first() else {
            return Ok(Term::unit().at(block_span));
        };
        let m = self.mark();
        self.hoists.push(Vec::new());
        let r = self.item(first, rest, block_span);
        let hoisted = self.hoists.pop().unwrap_or_default();
        self.restore(m);
        let mut term = r?;
        for h in hoisted.into_iter().rev() {
            term = Term::new(
                TermKind::WithR {
                    name: h.name,
                    init: Box::new(h.init),
                    elem: Some(h.elem),
                    body: Box::new(term),
                },
                h.span,
            );
        }
        Ok(term)
    }

    fn item(&mut self, first: &Item, rest: &[Item], block_span: Span) -> Result<Term, LowerError> {
        let (name, ann, rhs, span) = match first {
            Item::Expr(e) if rest.is_empty() => return self.expr(e),
            Item::Expr(e) => {
                let name = self.gen("_");
                (name, None, e, e.span)
            }
            Item::Val { names, ann, rhs, span } => (names[0].clone(), ann.as_ref(), rhs, *span),
            Item::Def { .. } => unreachable!("definitions are normalized away"),
        };

        if let (ExprKind::NewRef { init, elem, placement: Placement::Scoped }, None) = (&rhs.kind, ann) {
            let init = self.expr(init)?;
            let elem = match elem {
                Some(t) => self.translate(t),
                None => self.synth(&init)?,
            };
            let internal = self.bind_name(&name);
            self.push_term(&internal, Type::reference(elem.clone()).q(Qualifier::fresh_only()), "t-refin")?;
            self.enter(&name, &internal, false);
            let body = self.items(rest, block_span)?;
            return Ok(Term::new(
                TermKind::WithR { name: internal, init: Box::new(init), elem: Some(elem), body: Box::new(body) },
                span,
            ));
        }

        let rhs_term = self.expr(rhs)?;
        let dom = match ann {
            Some(t) => self.translate(t),
            None => {
                let t = self.synth(&rhs_term)?;
                if t.qual.fresh {
                    let sat = saturate(&self.env, &t.qual).map_err(|e| {
                        TypeError::new(TypeErrorKind::Unbound, "t-var", e.to_string())
                    })?;
                    t.ty.q(sat.with_fresh(true))
                } else {
                    t
                }
            }
        };
        let capture = self.phi.to_qualifier();
        let k = self.gen("k");
        let internal = self.bind_name(&name);
        let m = self.mark();
        let body_and_cod = (|| {
            self.push_term(&internal, dom.clone(), "t-abs")?;
            self.enter(&name, &internal, false);
            let body = self.items(rest, block_span)?;
            let cod = self.synth(&body)?;
            Ok::<_, LowerError>((body, cod))
        })();
        self.restore(m);
        let (body, cod) = body_and_cod?;
        let lam = Lambda { self_name: k, param: internal, dom, cod, capture, body };
        Ok(Term::new(TermKind::App(Box::new(Term::abs(lam).at(span)), Box::new(rhs_term)), span))
    }

    /// Lowers a hoisting delimiter that is not itself a block.
    fn delimited(&mut self, e: &Expr) -> Result<Term, LowerError> {
        if is_scoped_alloc(e) {
            return Err(LowerError::UndelimitedScoped { span: e.span });
        }
        if let ExprKind::Block(items) = &e.kind {
            return self.block(items, e.span);
        }
        self.block(&[Item::Expr(e.clone())], e.span)
    }

    // ---- expressions ----

    fn expr(&mut self, e: &Expr) -> Result<Term, LowerError> {
        use ExprKind as K;
        let span = e.span;
        let t = match &e.kind {
            K::Lit(c) => Term::new(TermKind::Const(*c), span),
            K::Var(x) => match self.resolve(x) {
                Some(n) => Term::var(n).at(span),
                None => {
                    return Err(TypeError::new(TypeErrorKind::Unbound, "t-var", format!("unbound variable {x}"))
                        .located(span)
                        .into())
                }
            },
            K::Lambda(sig, body) => self.lambda(sig, body, span)?,
            K::Apply(f, a) => Term::app(self.expr(f)?, self.expr(a)?).at(span),
            K::TypeApply(f, t) => Term::tapp(self.expr(f)?, self.translate(t)).at(span),
            K::NewRef { init, elem, placement } => {
                let init = self.expr(init)?;
                let elem = elem.as_ref().map(|t| self.translate(t));
                match placement {
                    Placement::Fresh => Term::new(TermKind::RefNew { init: Box::new(init), elem }, span),
                    Placement::At(p) => {
                        let proxy = self.expr(p)?;
                        Term::new(TermKind::RefAt { init: Box::new(init), proxy: Box::new(proxy), elem }, span)
                    }
                    Placement::Scoped => self.hoist(init, elem, span)?,
                }
            }
            K::Deref(r) => Term::deref(self.expr(r)?).at(span),
            K::Assign(a, b) => Term::assign(self.expr(a)?, self.expr(b)?).at(span),
            K::Block(items) => self.block(items, span)?,
            K::Annot(inner, t) => {
                let inner = self.expr(inner)?;
                let ty = self.translate(t);
                let x = self.gen("x");
                let lam = Lambda {
                    self_name: self.gen("id"),
                    param: x.clone(),
                    dom: ty.clone(),
                    cod: ty.ty.clone().q(Qualifier::var(x.clone())),
                    capture: Qualifier::empty(),
                    body: Term::var(x).at(span),
                };
                Term::app(Term::abs(lam).at(span), inner).at(span)
            }
            K::Prim(op, a, b) => Term::prim(*op, self.expr(a)?, self.expr(b)?).at(span),
            K::IfZero(c, a, b) => {
                let c = self.expr(c)?;
                Term::if_zero(c, self.delimited(a)?, self.delimited(b)?).at(span)
            }
            K::With { name, elem, init, body } => {
                let init = self.expr(init)?;
                let elem = match elem {
                    Some(t) => self.translate(t),
                    None => self.synth(&init)?,
                };
                let internal = self.bind_name(name);
                let m = self.mark();
                let body = (|| {
                    self.push_term(&internal, Type::reference(elem.clone()).q(Qualifier::fresh_only()), "t-refin")?;
                    self.enter(name, &internal, false);
                    self.delimited(body)
                })();
                self.restore(m);
                Term::new(
                    TermKind::WithR { name: internal, init: Box::new(init), elem: Some(elem), body: Box::new(body?) },
                    span,
                )
            }
            K::WithC(..) | K::Loc(..) => {
                return malformed(span, "store indices and scope eliminations may not appear in a program")
            }
        };
        Ok(t)
    }

    fn hoist(&mut self, init: Term, elem: Option<QType>, span: Span) -> Result<Term, LowerError> {
        let elem = match elem {
            Some(t) => t,
            None => self.synth(&init)?,
        };
        let name = self.gen("x");
        self.push_term(&name, Type::reference(elem.clone()).q(Qualifier::fresh_only()), "t-refin")?;
        // The binder stays in scope for the rest of the block; `items`
        // truncates the context when the block ends.
        let frame = self.hoists.last_mut().expect("lowering always runs inside a block");
        frame.push(Hoist { name: name.clone(), init, elem, span });
        Ok(Term::var(name).at(span))
    }

    fn lambda(&mut self, sig: &FunSig, body: &Expr, span: Span) -> Result<Term, LowerError> {
        if sig.tparam.is_some() && sig.param.is_some() {
            let (outer, inner) = split_polymorphic(sig, body, span);
            return self.lambda(&outer, &inner, span);
        }
        let surface_self = sig.self_name.clone();
        let body_fv = body.free_vars();
        let capture = match &sig.capture {
            Some(q) => self.translate_qual(q),
            None => {
                let mut excluded: BTreeSet<&Name> = BTreeSet::new();
                excluded.extend(surface_self.iter());
                excluded.extend(sig.param.iter().map(|p| &p.name));
                let vars: Vec<Name> =
                    body_fv.iter().filter(|x| !excluded.contains(x)).filter_map(|x| self.resolve(x)).collect();
                // Dereferencing inside the body needs the referents' owners
                // observable too, so take the observable part of the closure.
                let direct = Qualifier::from_vars(vars);
                let mut cap = direct.clone();
                if let Ok(sat) = saturate(&self.env, &direct) {
                    cap.vars.extend(sat.vars.into_iter().filter(|v| self.phi.vars.contains(v)));
                }
                cap
            }
        };
        let recursive = surface_self.as_ref().is_some_and(|f| body_fv.contains(f));
        let self_internal = match &surface_self {
            Some(f) => self.bind_name(f),
            None => self.gen("f"),
        };
        let m = self.mark();
        let r = match (&sig.tparam, &sig.param) {
            (None, Some(p)) => self.abs(sig, body, span, capture, self_internal, p, recursive),
            (Some(tp), None) => self.tabs(sig, body, span, capture, self_internal, tp, recursive),
            (Some(_), Some(_)) => unreachable!("split above"),
            (None, None) => malformed(span, "a function needs a parameter"),
        };
        self.restore(m);
        r
    }

    #[allow(clippy::too_many_arguments)]
    fn abs(
        &mut self,
        sig: &FunSig,
        body: &Expr,
        span: Span,
        capture: Qualifier,
        self_name: Name,
        p: &super::syntax::Param,
        recursive: bool,
    ) -> Result<Term, LowerError> {
        let dom = self.translate(&p.ty);
        let given_cod = sig.cod.as_ref();
        if given_cod.is_none() && recursive {
            return malformed(span, "a recursive function needs a result type annotation");
        }
        // The self name is reserved before the parameter so they differ.
        if let Some(f) = &sig.self_name {
            self.enter(f, &self_name, false);
        }
        let param = self.bind_name(&p.name);
        let param = if param == self_name { self.gen(p.name.base()) } else { param };
        // Observation inside the body: the capture plus the binders.
        self.phi = Observation::from_qualifier(&capture);
        match given_cod {
            Some(c) => {
                self.enter(&p.name, &param, false);
                let cod = self.translate(c);
                let fun_ty = Type::fun(self_name.clone(), param.clone(), dom.clone(), cod.clone()).q(capture.clone());
                self.push_term(&self_name, fun_ty, "t-abs")?;
                self.push_term(&param, dom.clone(), "t-abs")?;
                let body = self.delimited(body)?;
                Ok(Term::abs(Lambda { self_name, param, dom, cod, capture, body }).at(span))
            }
            None => {
                self.push_term(&param, dom.clone(), "t-abs")?;
                self.enter(&p.name, &param, false);
                let body = self.delimited(body)?;
                let cod = abstract_over_self(self.synth(&body)?, &capture, &self_name);
                Ok(Term::abs(Lambda { self_name, param, dom, cod, capture, body }).at(span))
            }
        }
    }

    fn tabs(
        &mut self,
        sig: &FunSig,
        body: &Expr,
        span: Span,
        capture: Qualifier,
        self_name: Name,
        tp: &super::syntax::TParam,
        recursive: bool,
    ) -> Result<Term, LowerError> {
        let bound = self.translate(&tp.bound);
        if sig.cod.is_none() && recursive {
            return malformed(span, "a recursive function needs a result type annotation");
        }
        if let Some(f) = &sig.self_name {
            self.enter(f, &self_name, false);
        }
        let tvar = self.bind_name(&tp.tvar);
        let qvar = self.bind_name(&tp.qvar);
        let qvar = if qvar == tvar || qvar == self_name { self.gen(tp.qvar.base()) } else { qvar };
        self.enter(&tp.tvar, &tvar, true);
        self.enter(&tp.qvar, &qvar, false);
        self.phi = Observation::from_qualifier(&capture);
        let type_err = |e: crate::subtyping::EnvError| {
            TypeError::new(TypeErrorKind::MalformedAnnotation, "t-tabs", e.to_string())
        };
        match &sig.cod {
            Some(c) => {
                let cod = self.translate(c);
                let all_ty = Type::all(self_name.clone(), tvar.clone(), qvar.clone(), bound.clone(), cod.clone())
                    .q(capture.clone());
                self.push_term(&self_name, all_ty, "t-tabs")?;
                self.env.push_type(tvar.clone(), qvar.clone(), bound.clone()).map_err(type_err)?;
                self.phi.vars.insert(qvar.clone());
                let body = self.delimited(body)?;
                Ok(Term::tabs(TLambda { self_name, tvar, qvar, bound, cod, capture, body }).at(span))
            }
            None => {
                self.env.push_type(tvar.clone(), qvar.clone(), bound.clone()).map_err(type_err)?;
                self.phi.vars.insert(qvar.clone());
                let body = self.delimited(body)?;
                let cod = abstract_over_self(self.synth(&body)?, &capture, &self_name);
                Ok(Term::tabs(TLambda { self_name, tvar, qvar, bound, cod, capture, body }).at(span))
            }
        }
    }
}

/// Replaces captured names in an inferred result qualifier by the self name.
/// Sound by q-self (`capture <: {self}`), and it keeps the function's carrier
/// free of the captured names, so the function can outlive their binders.
fn abstract_over_self(cod: QType, capture: &Qualifier, self_name: &Name) -> QType {
    if cod.qual.vars.is_disjoint(&capture.vars) {
        return cod;
    }
    let mut qual = cod.qual.clone();
    qual.vars.retain(|v| !capture.vars.contains(v));
    qual.vars.insert(self_name.clone());
    cod.ty.q(qual)
}

/// `[X^x <: B](p: T)^{c}: U => e` is a type lambda returning the function
/// `(p: T)^{c'}: U => e`, where `c'` adds the self name when `e` recurses.
fn split_polymorphic(sig: &FunSig, body: &Expr, span: Span) -> (FunSig, Expr) {
    let param = sig.param.clone().expect("caller checked");
    let fv = body.free_vars();
    let recursive = sig.self_name.as_ref().is_some_and(|f| fv.contains(f));
    let mut inner_cap = match &sig.capture {
        Some(c) => c.clone(),
        None => Qualifier::from_vars(
            fv.iter().filter(|x| **x != param.name && Some(*x) != sig.self_name.as_ref()).cloned(),
        ),
    };
    if recursive {
        inner_cap.vars.insert(sig.self_name.clone().expect("recursive implies named"));
    }
    let inner_self = Name::new("_g");
    let outer_cod = sig.cod.as_ref().map(|c| {
        Type::fun(inner_self.clone(), param.name.clone(), param.ty.clone(), c.clone()).q(inner_cap.clone())
    });
    let mut outer_cap = inner_cap.clone();
    if let Some(f) = &sig.self_name {
        outer_cap.vars.remove(f);
    }
    let inner = FunSig {
        self_name: Some(inner_self),
        tparam: None,
        param: Some(param),
        capture: Some(inner_cap),
        cod: sig.cod.clone(),
    };
    let inner_expr = Expr::new(ExprKind::Lambda(Box::new(inner), Box::new(body.clone())), span);
    let outer = FunSig {
        self_name: sig.self_name.clone(),
        tparam: sig.tparam.clone(),
        param: None,
        capture: Some(outer_cap),
        cod: outer_cod,
    };
    (outer, inner_expr)
}

/// Converts a fully annotated core expression to a term without consulting
/// types. Used for printed core terms and runtime states.
pub fn to_core(e: &Expr) -> Result<Term, LowerError> {
    use ExprKind as K;
    let span = e.span;
    Ok(match &e.kind {
        K::Lit(c) => Term::new(TermKind::Const(*c), span),
        K::Var(x) => Term::var(x.clone()).at(span),
        K::Loc(l, o) => Term::loc(*l, *o).at(span),
        K::WithC(l, b) => Term::with_c(*l, to_core(b)?).at(span),
        K::Lambda(sig, body) => {
            let (Some(self_name), Some(capture), Some(cod)) = (&sig.self_name, &sig.capture, &sig.cod) else {
                return malformed(span, "core functions need a name, a capture and a result type");
            };
            let body = to_core(body)?;
            match (&sig.tparam, &sig.param) {
                (None, Some(p)) => Term::abs(Lambda {
                    self_name: self_name.clone(),
                    param: p.name.clone(),
                    dom: p.ty.clone(),
                    cod: cod.clone(),
                    capture: capture.clone(),
                    body,
                }),
                (Some(tp), None) => Term::tabs(TLambda {
                    self_name: self_name.clone(),
                    tvar: tp.tvar.clone(),
                    qvar: tp.qvar.clone(),
                    bound: tp.bound.clone(),
                    cod: cod.clone(),
                    capture: capture.clone(),
                    body,
                }),
                _ => return malformed(span, "core functions take exactly one parameter"),
            }
            .at(span)
        }
        K::Apply(f, a) => Term::app(to_core(f)?, to_core(a)?).at(span),
        K::TypeApply(f, t) => Term::tapp(to_core(f)?, t.clone()).at(span),
        K::NewRef { init, elem, placement } => {
            let init = Box::new(to_core(init)?);
            match placement {
                Placement::Fresh => Term::new(TermKind::RefNew { init, elem: elem.clone() }, span),
                Placement::At(p) => {
                    Term::new(TermKind::RefAt { init, proxy: Box::new(to_core(p)?), elem: elem.clone() }, span)
                }
                Placement::Scoped => return malformed(span, "`scoped` is surface syntax"),
            }
        }
        K::Deref(r) => Term::deref(to_core(r)?).at(span),
        K::Assign(a, b) => Term::assign(to_core(a)?, to_core(b)?).at(span),
        K::Prim(op, a, b) => Term::prim(*op, to_core(a)?, to_core(b)?).at(span),
        K::IfZero(c, a, b) => Term::if_zero(to_core(c)?, to_core(a)?, to_core(b)?).at(span),
        K::With { name, elem, init, body } => Term::new(
            TermKind::WithR {
                name: name.clone(),
                init: Box::new(to_core(init)?),
                elem: elem.clone(),
                body: Box::new(to_core(body)?),
            },
            span,
        ),
        K::Block(_) | K::Annot(..) => return malformed(span, "blocks and ascriptions are surface syntax"),
    })
}
