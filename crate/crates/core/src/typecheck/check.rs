use std::collections::BTreeSet;

use super::{
    Lambda, StoreTyping, TLambda, Term, TermKind, TermSubst, TypeError, TypeErrorKind as Kind,
    TypeReport,
};
use crate::dynamics::local_locations;
use crate::qualifiers::{overlap, qual_sub, Elem, Loc, Name, Observation, Qualifier};
use crate::subtyping::{qtype_sub, type_sub, AllType, FunType, QType, Subst, Type, TypingEnv};

type Result<T> = std::result::Result<T, TypeError>;

fn fail<T>(kind: Kind, rule: &'static str, message: impl Into<String>) -> Result<T> {
    Err(TypeError::new(kind, rule, message))
}

/// `q ⊆ ◇φ`.
fn observed(phi: &Observation, q: &Qualifier, rule: &'static str, what: &str) -> Result<()> {
    let missing = phi.missing(q);
    if missing.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = missing.iter().map(|e| e.to_string()).collect();
    Err(TypeError::new(
        Kind::ObservationViolation,
        rule,
        format!("{what} {q} mentions {} outside the observation {phi}", list.join(", ")),
    )
    .with_missing(missing))
}

/// `q ⊆ φ`: observed and not fresh.
fn strictly_observed(phi: &Observation, q: &Qualifier, rule: &'static str, what: &str) -> Result<()> {
    if q.fresh {
        return fail(Kind::FreshnessViolation, rule, format!("{what} {q} must not be fresh"));
    }
    observed(phi, q, rule, what)
}

fn not_fresh(q: &Qualifier, rule: &'static str, what: &str) -> Result<()> {
    if q.fresh {
        return fail(Kind::FreshnessViolation, rule, format!("{what} {q} must not be fresh"));
    }
    Ok(())
}

/// Local locations must be separate from `q`.
fn separate(lc: &BTreeSet<Loc>, q: &Qualifier, rule: &'static str, what: &str) -> Result<()> {
    if q.is_disjoint_locs(lc) {
        return Ok(());
    }
    let shared: Vec<String> = q.locs.intersection(lc).map(|l| l.to_string()).collect();
    fail(
        Kind::LocalLocationViolation,
        rule,
        format!("local location {} appears in {what} {q}", shared.join(", ")),
    )
}

fn unbound(e: crate::qualifiers::UnboundVariable, rule: &'static str) -> TypeError {
    TypeError::new(Kind::Unbound, rule, e.to_string())
}

struct Checker<'a> {
    env: TypingEnv,
    sigma: &'a StoreTyping,
}

impl<'a> Checker<'a> {
    /// Unfolds type variables to their bounds until a structural carrier shows.
    fn expose(&self, ty: &Type) -> Type {
        let mut current = ty.clone();
        for _ in 0..=self.env.len() {
            match &current {
                Type::Var(x) => match self.env.tvar_bound(x) {
                    Some(b) => current = b.ty.clone(),
                    None => return current,
                },
                _ => return current,
            }
        }
        current
    }

    fn well_formed(&self, ty: &QType, rule: &'static str) -> Result<()> {
        for x in ty.free_qvars() {
            if self.env.declared_qualifier(&x).is_none() {
                return fail(Kind::MalformedAnnotation, rule, format!("{ty} mentions unbound `{x}`"));
            }
        }
        for x in ty.free_tvars() {
            if self.env.tvar_bound(&x).is_none() {
                return fail(
                    Kind::MalformedAnnotation,
                    rule,
                    format!("{ty} mentions unbound type variable `{x}`"),
                );
            }
        }
        for l in &ty.qual.locs {
            if !self.sigma.has_location(*l) {
                return fail(Kind::UnknownLocation, rule, format!("{ty} mentions unknown {l}"));
            }
        }
        Ok(())
    }

    fn synth(&mut self, phi: &Observation, t: &mut Term) -> Result<QType> {
        let span = t.span;
        let out = self.synth_kind(phi, t).map_err(|e| e.located(span))?;
        debug_assert!(phi.covers(&out.qual), "unobservable synthesis {out} under {phi}");
        Ok(out)
    }

    /// Synthesis followed by subsumption to `expected`.
    fn check_in(&mut self, phi: &Observation, t: &mut Term, expected: &QType) -> Result<QType> {
        let span = t.span;
        let actual = self.synth(phi, t)?;
        let result = (|| {
            if !qtype_sub(&self.env, &actual, expected) {
                return fail(
                    Kind::SubsumptionFailure,
                    "t-sub",
                    format!("{actual} is not a subtype of {expected}"),
                );
            }
            observed(phi, &expected.qual, "t-sub", "expected qualifier")?;
            separate(&local_locations(t), &expected.qual, "t-sub", "expected qualifier")
        })();
        result.map_err(|e| e.located(span))?;
        Ok(expected.clone())
    }

    fn synth_kind(&mut self, phi: &Observation, t: &mut Term) -> Result<QType> {
        match &mut t.kind {
            TermKind::Const(c) => Ok(c.ty().q(Qualifier::empty())),
            TermKind::Var(x) => {
                let Some(ty) = self.env.term_type(x) else {
                    return fail(Kind::Unbound, "t-var", format!("unbound variable `{x}`"));
                };
                let ty = ty.ty.clone();
                if !phi.vars.contains(x) {
                    return Err(TypeError::new(
                        Kind::ObservationViolation,
                        "t-var",
                        format!("`{x}` is outside the observation {phi}"),
                    )
                    .with_missing(vec![Elem::Var(x.clone())]));
                }
                Ok(ty.q(Qualifier::var(x.clone())))
            }
            TermKind::Loc(l, o) => {
                let Some(entry) = self.sigma.get(*l, *o) else {
                    return fail(Kind::UnknownLocation, "t-loc", format!("no store typing for {l}·{o}"));
                };
                let entry = entry.clone();
                if !phi.locs.contains(l) {
                    return Err(TypeError::new(
                        Kind::ObservationViolation,
                        "t-loc",
                        format!("{l} is outside the observation {phi}"),
                    )
                    .with_missing(vec![Elem::Loc(*l)]));
                }
                not_fresh(&entry.qual, "t-loc", "stored qualifier")?;
                Ok(Type::reference(entry).q(Qualifier::loc(*l)))
            }
            TermKind::RefNew { init, elem } => {
                let inner = self.referent(phi, init, elem, "t-ref")?;
                Ok(Type::reference(inner).q(Qualifier::fresh_only()))
            }
            TermKind::RefAt { init, proxy, elem } => {
                let proxy_ty = self.synth(phi, proxy)?;
                if !matches!(self.expose(&proxy_ty.ty), Type::Ref(_)) {
                    return fail(
                        Kind::ShapeMismatch,
                        "t-refat",
                        format!("proxy has type {proxy_ty}, expected a reference"),
                    );
                }
                not_fresh(&proxy_ty.qual, "t-refat", "proxy qualifier")?;
                let referent_phi = phi.without_locs(&local_locations(proxy));
                let inner = self.referent(&referent_phi, init, elem, "t-refat")?;
                separate(&local_locations(init), &proxy_ty.qual, "t-refat", "proxy qualifier")?;
                Ok(Type::reference(inner).q(proxy_ty.qual))
            }
            TermKind::Deref(r) => {
                let rt = self.synth(phi, r)?;
                let Type::Ref(inner) = self.expose(&rt.ty) else {
                    return fail(
                        Kind::ShapeMismatch,
                        "t-deref",
                        format!("cannot dereference a value of type {rt}"),
                    );
                };
                strictly_observed(phi, &inner.qual, "t-deref", "referent qualifier")?;
                separate(&local_locations(r), &inner.qual, "t-deref", "referent qualifier")?;
                Ok(*inner)
            }
            TermKind::Assign(target, value) => {
                let tt = self.synth(phi, target)?;
                let Type::Ref(inner) = self.expose(&tt.ty) else {
                    return fail(
                        Kind::ShapeMismatch,
                        "t-assgn",
                        format!("cannot assign through a value of type {tt}"),
                    );
                };
                not_fresh(&inner.qual, "t-assgn", "referent qualifier")?;
                let value_phi = phi.without_locs(&local_locations(target));
                self.check_in(&value_phi, value, &inner)?;
                separate(&local_locations(value), &tt.qual, "t-assgn", "target qualifier")?;
                Ok(Type::Unit.q(Qualifier::empty()))
            }
            TermKind::Abs(lam) => self.abs(phi, lam),
            TermKind::TAbs(lam) => self.tabs(phi, lam),
            TermKind::App(f, a) => {
                let ft = self.synth(phi, f)?;
                let Type::Fun(fun) = self.expose(&ft.ty) else {
                    return fail(Kind::ShapeMismatch, "t-app", format!("cannot apply a value of type {ft}"));
                };
                let lc_fun = local_locations(f);
                let arg_phi = phi.without_locs(&lc_fun);
                let at = self.synth(&arg_phi, a)?;
                let lc_arg = local_locations(a);
                self.app(phi, &arg_phi, &ft.qual, &fun, &at, &lc_fun, &lc_arg)
            }
            TermKind::TApp(f, arg) => {
                let ft = self.synth(phi, f)?;
                let Type::All(all) = self.expose(&ft.ty) else {
                    return fail(
                        Kind::ShapeMismatch,
                        "t-tapp",
                        format!("cannot instantiate a value of type {ft}"),
                    );
                };
                self.well_formed(arg, "t-tapp")?;
                let arg = arg.clone();
                self.tapp(phi, &ft.qual, &all, &arg, &local_locations(f))
            }
            TermKind::WithR { name, init, elem, body } => {
                let inner = self.referent(phi, init, elem, "t-refin")?;
                if self.env.binds(name) {
                    let fresh = name.fresh();
                    **body = body.rename_free(name, &fresh);
                    *name = fresh;
                }
                let mark = self.env.len();
                self.env
                    .push_term(name.clone(), Type::reference(inner).q(Qualifier::fresh_only()))
                    .map_err(|e| TypeError::new(Kind::MalformedAnnotation, "t-refin", e.to_string()))?;
                let body_phi = phi.without_locs(&local_locations(init)).with_var(name);
                let result = self.synth(&body_phi, body);
                self.env.truncate(mark);
                let result = result?;
                if result.free_qvars().contains(name) {
                    return fail(
                        Kind::EscapeViolation,
                        "t-refin",
                        format!("scoped reference `{name}` escapes through the result {result}"),
                    );
                }
                Ok(result)
            }
            TermKind::WithC(l, body) => {
                let result = self.synth(phi, body)?;
                if result.qual.has_loc(*l) {
                    return fail(
                        Kind::EscapeViolation,
                        "t-locin",
                        format!("scoped location {l} escapes through the result {result}"),
                    );
                }
                Ok(result)
            }
            TermKind::Prim(op, a, b) => {
                let symbol = op.symbol();
                let at = self.synth(phi, a)?;
                let b_phi = phi.without_locs(&local_locations(a));
                let bt = self.synth(&b_phi, b)?;
                for side in [&at, &bt] {
                    if !type_sub(&self.env, &side.ty, &Type::Int) {
                        return fail(
                            Kind::ShapeMismatch,
                            "t-prim",
                            format!("operand of `{symbol}` has type {side}, expected Int"),
                        );
                    }
                }
                Ok(Type::Int.q(Qualifier::empty()))
            }
            TermKind::IfZero(c, yes, no) => {
                let ct = self.synth(phi, c)?;
                if !type_sub(&self.env, &ct.ty, &Type::Int) {
                    return fail(Kind::ShapeMismatch, "t-ifz", format!("condition has type {ct}, expected Int"));
                }
                let branch_phi = phi.without_locs(&local_locations(c));
                let yt = self.synth(&branch_phi, yes)?;
                let nt = self.synth(&branch_phi, no)?;
                let ty = if type_sub(&self.env, &yt.ty, &nt.ty) {
                    nt.ty
                } else if type_sub(&self.env, &nt.ty, &yt.ty) {
                    yt.ty
                } else {
                    return fail(
                        Kind::ShapeMismatch,
                        "t-ifz",
                        format!("branches have unrelated types {yt} and {nt}"),
                    );
                };
                let qual = yt.qual.union(&nt.qual);
                separate(&local_locations(c), &qual, "t-ifz", "branch qualifier")?;
                Ok(ty.q(qual))
            }
        }
    }

    /// Types the referent of an allocation. An element annotation, when
    /// present, is checked; otherwise the synthesized type is recorded.
    fn referent(
        &mut self,
        phi: &Observation,
        init: &mut Term,
        elem: &mut Option<QType>,
        rule: &'static str,
    ) -> Result<QType> {
        let inner = match elem {
            Some(declared) => {
                let declared = declared.clone();
                self.well_formed(&declared, rule)?;
                not_fresh(&declared.qual, rule, "referent qualifier")?;
                self.check_in(phi, init, &declared)?
            }
            None => {
                let t = self.synth(phi, init)?;
                not_fresh(&t.qual, rule, "referent qualifier")?;
                t
            }
        };
        *elem = Some(inner.clone());
        Ok(inner)
    }

    fn rename_term_binder(&self, name: &mut Name, others: &[&Name], body: &mut Term, cod: &mut QType) {
        if self.env.binds(name) || others.contains(&&*name) {
            let fresh = name.fresh();
            *body = body.rename_free(name, &fresh);
            *cod = cod.subst_qvar(name, &Qualifier::var(fresh.clone()));
            *name = fresh;
        }
    }

    fn abs(&mut self, phi: &Observation, lam: &mut Lambda) -> Result<QType> {
        let rule = "t-abs";
        self.well_formed(&lam.dom, rule)?;
        self.well_formed(&Type::Unit.q(lam.capture.clone()), rule)?;
        strictly_observed(phi, &lam.capture, rule, "capture")?;
        self.rename_term_binder(&mut lam.self_name, &[], &mut lam.body, &mut lam.cod);
        let self_name = lam.self_name.clone();
        self.rename_term_binder(&mut lam.param, &[&self_name], &mut lam.body, &mut lam.cod);
        let fun_ty = lam.ty();
        let mark = self.env.len();
        let pushed = self
            .env
            .push_term(lam.self_name.clone(), fun_ty.clone())
            .and_then(|_| self.env.push_term(lam.param.clone(), lam.dom.clone()));
        let result = pushed
            .map_err(|e| TypeError::new(Kind::MalformedAnnotation, rule, e.to_string()))
            .and_then(|_| self.well_formed(&lam.cod, rule))
            .and_then(|_| {
                let body_phi = Observation::from_qualifier(&lam.capture)
                    .with_var(&lam.self_name)
                    .with_var(&lam.param);
                let cod = lam.cod.clone();
                self.check_in(&body_phi, &mut lam.body, &cod)
            });
        self.env.truncate(mark);
        result?;
        separate(&local_locations(&lam.body), &lam.capture, rule, "capture")?;
        Ok(fun_ty)
    }

    fn tabs(&mut self, phi: &Observation, lam: &mut TLambda) -> Result<QType> {
        let rule = "t-tabs";
        self.well_formed(&lam.bound, rule)?;
        self.well_formed(&Type::Unit.q(lam.capture.clone()), rule)?;
        strictly_observed(phi, &lam.capture, rule, "capture")?;
        self.rename_term_binder(&mut lam.self_name, &[], &mut lam.body, &mut lam.cod);
        if self.env.binds(&lam.qvar) || lam.qvar == lam.self_name {
            let fresh = lam.qvar.fresh();
            let s = TermSubst {
                terms: Vec::new(),
                types: Subst::qvar(lam.qvar.clone(), Qualifier::var(fresh.clone())),
            };
            lam.body = lam.body.subst(&s);
            lam.cod = lam.cod.subst(&s.types);
            lam.qvar = fresh;
        }
        if self.env.binds(&lam.tvar) || lam.tvar == lam.self_name || lam.tvar == lam.qvar {
            let fresh = lam.tvar.fresh();
            let s = TermSubst {
                terms: Vec::new(),
                types: Subst { qvars: Vec::new(), tvars: vec![(lam.tvar.clone(), Type::Var(fresh.clone()))] },
            };
            lam.body = lam.body.subst(&s);
            lam.cod = lam.cod.subst(&s.types);
            lam.tvar = fresh;
        }
        let all_ty = lam.ty();
        let mark = self.env.len();
        let pushed = self.env.push_term(lam.self_name.clone(), all_ty.clone()).and_then(|_| {
            self.env.push_type(lam.tvar.clone(), lam.qvar.clone(), lam.bound.clone())
        });
        let result = pushed
            .map_err(|e| TypeError::new(Kind::MalformedAnnotation, rule, e.to_string()))
            .and_then(|_| self.well_formed(&lam.cod, rule))
            .and_then(|_| {
                let body_phi = Observation::from_qualifier(&lam.capture)
                    .with_var(&lam.self_name)
                    .with_var(&lam.qvar);
                let cod = lam.cod.clone();
                self.check_in(&body_phi, &mut lam.body, &cod)
            });
        self.env.truncate(mark);
        result?;
        separate(&local_locations(&lam.body), &lam.capture, rule, "capture")?;
        Ok(all_ty)
    }

    /// Application of a function at qualifier `fun_qual` to an argument
    /// already synthesized under `arg_phi`.
    #[allow(clippy::too_many_arguments)]
    fn app(
        &self,
        phi: &Observation,
        arg_phi: &Observation,
        fun_qual: &Qualifier,
        fun: &FunType,
        arg: &QType,
        lc_fun: &BTreeSet<Loc>,
        lc_arg: &BTreeSet<Loc>,
    ) -> Result<QType> {
        let growing = fun.dom.qual.fresh;
        let rule = if growing { "t-app◇" } else { "t-app" };
        if !type_sub(&self.env, &arg.ty, &fun.dom.ty) {
            return fail(
                Kind::SubsumptionFailure,
                rule,
                format!("argument type {arg} does not fit the domain {}", fun.dom),
            );
        }
        let substituted = if growing {
            let shared = overlap(&self.env, &arg.qual, fun_qual).map_err(|e| unbound(e, rule))?;
            if !qual_sub(&self.env, &shared, &fun.dom.qual) {
                return fail(
                    Kind::OverlapViolation,
                    rule,
                    format!(
                        "argument {} shares {shared} with the function {fun_qual}, beyond the permitted {}",
                        arg.qual, fun.dom.qual
                    ),
                );
            }
            if arg.qual.fresh && fun.cod.ty.mentions_qvar(&fun.param) {
                return fail(
                    Kind::DependencyViolation,
                    rule,
                    format!("fresh argument, but the result type {} depends on `{}`", fun.cod.ty, fun.param),
                );
            }
            separate(lc_fun, &shared, rule, "argument overlap")?;
            arg.qual.clone()
        } else {
            not_fresh(&arg.qual, rule, "argument qualifier")?;
            // Prefer the declared domain so the result type stays fixed while
            // the argument reduces; fall back to the argument's own qualifier
            // when the declared one is not observable here.
            let declared = &fun.dom.qual;
            let chosen = if arg_phi.covers(declared) { declared.clone() } else { arg.qual.clone() };
            if !qual_sub(&self.env, &arg.qual, &chosen) {
                return fail(
                    Kind::SubsumptionFailure,
                    rule,
                    format!("argument qualifier {} is not below the domain {}", arg.qual, chosen),
                );
            }
            separate(lc_arg, &chosen, rule, "argument qualifier")?;
            chosen
        };
        if fun.cod.ty.mentions_qvar(&fun.self_name) {
            return fail(
                Kind::DependencyViolation,
                rule,
                format!("result type {} depends on the function itself", fun.cod.ty),
            );
        }
        let cod_phi = phi.with_var(&fun.param).with_var(&fun.self_name);
        observed(&cod_phi, &fun.cod.qual, rule, "result qualifier")?;
        separate(lc_arg, &fun_qual.union(&fun.cod.qual), rule, "function or result qualifier")?;
        separate(lc_fun, &fun.cod.qual, rule, "result qualifier")?;
        Ok(fun.cod.subst(&Subst {
            qvars: vec![(fun.param.clone(), substituted), (fun.self_name.clone(), fun_qual.clone())],
            tvars: Vec::new(),
        }))
    }

    fn tapp(
        &self,
        phi: &Observation,
        fun_qual: &Qualifier,
        all: &AllType,
        arg: &QType,
        lc: &BTreeSet<Loc>,
    ) -> Result<QType> {
        let growing = all.bound.qual.fresh;
        let rule = if growing { "t-tapp◇" } else { "t-tapp" };
        observed(phi, &arg.qual, rule, "type argument qualifier")?;
        if growing {
            if !type_sub(&self.env, &arg.ty, &all.bound.ty) {
                return fail(
                    Kind::BoundViolation,
                    rule,
                    format!("type argument {arg} is not below the bound {}", all.bound),
                );
            }
            let shared = overlap(&self.env, &arg.qual, fun_qual).map_err(|e| unbound(e, rule))?;
            if !qual_sub(&self.env, &shared, &all.bound.qual) {
                return fail(
                    Kind::OverlapViolation,
                    rule,
                    format!(
                        "type argument {} shares {shared} with {fun_qual}, beyond the permitted {}",
                        arg.qual, all.bound.qual
                    ),
                );
            }
            if arg.qual.fresh && all.cod.ty.mentions_qvar(&all.qvar) {
                return fail(
                    Kind::DependencyViolation,
                    rule,
                    format!("fresh type argument, but the result type {} depends on `{}`", all.cod.ty, all.qvar),
                );
            }
            separate(lc, &shared, rule, "argument overlap")?;
        } else {
            not_fresh(&arg.qual, rule, "type argument qualifier")?;
            if !qtype_sub(&self.env, arg, &all.bound) {
                return fail(
                    Kind::BoundViolation,
                    rule,
                    format!("type argument {arg} is not below the bound {}", all.bound),
                );
            }
        }
        if all.cod.ty.mentions_qvar(&all.self_name) {
            return fail(
                Kind::DependencyViolation,
                rule,
                format!("result type {} depends on the function itself", all.cod.ty),
            );
        }
        let cod_phi = phi.with_var(&all.qvar).with_var(&all.self_name);
        observed(&cod_phi, &all.cod.qual, rule, "result qualifier")?;
        separate(lc, &arg.qual.union(&all.cod.qual), rule, "argument or result qualifier")?;
        Ok(all.cod.subst(&Subst {
            qvars: vec![(all.qvar.clone(), arg.qual.clone()), (all.self_name.clone(), fun_qual.clone())],
            tvars: vec![(all.tvar.clone(), arg.ty.clone())],
        }))
    }
}

/// Minimal qualified type of `t` under `[env | sigma]` and observation `phi`.
pub fn synthesize(
    env: &TypingEnv,
    sigma: &StoreTyping,
    phi: &Observation,
    t: &Term,
) -> std::result::Result<QType, TypeError> {
    elaborate(env, sigma, phi, t).map(|(_, ty)| ty)
}

/// Like [`synthesize`], also returning the term with every allocation's
/// element annotation filled in (and clashing binders renamed).
pub fn elaborate(
    env: &TypingEnv,
    sigma: &StoreTyping,
    phi: &Observation,
    t: &Term,
) -> std::result::Result<(Term, QType), TypeError> {
    let mut work = t.clone();
    let mut checker = Checker { env: env.clone(), sigma };
    let ty = checker.synth(phi, &mut work)?;
    Ok((work, ty))
}

/// Checks `t` against `expected` by synthesis and subsumption.
pub fn check(
    env: &TypingEnv,
    sigma: &StoreTyping,
    phi: &Observation,
    t: &Term,
    expected: &QType,
) -> TypeReport {
    let mut work = t.clone();
    let mut checker = Checker { env: env.clone(), sigma };
    TypeReport::from_result(checker.check_in(phi, &mut work, expected))
}

/// Result type of applying a function of type `fun` to an argument of type
/// `arg`, selecting the growing rule when the declared domain is fresh.
pub fn apply_rule(
    env: &TypingEnv,
    phi: &Observation,
    fun: &QType,
    arg: &QType,
    arg_term: &Term,
) -> std::result::Result<QType, TypeError> {
    let sigma = StoreTyping::new();
    let checker = Checker { env: env.clone(), sigma: &sigma };
    let Type::Fun(f) = checker.expose(&fun.ty) else {
        return fail(Kind::ShapeMismatch, "t-app", format!("cannot apply a value of type {fun}"));
    };
    let none = BTreeSet::new();
    checker.app(phi, phi, &fun.qual, &f, arg, &none, &local_locations(arg_term))
}

/// Result type of instantiating a universal of type `univ` at `arg`.
pub fn tapply_rule(
    env: &TypingEnv,
    phi: &Observation,
    univ: &QType,
    arg: &QType,
) -> std::result::Result<QType, TypeError> {
    let sigma = StoreTyping::new();
    let checker = Checker { env: env.clone(), sigma: &sigma };
    let Type::All(all) = checker.expose(&univ.ty) else {
        return fail(Kind::ShapeMismatch, "t-tapp", format!("cannot instantiate a value of type {univ}"));
    };
    checker.well_formed(arg, "t-tapp")?;
    checker.tapp(phi, &univ.qual, &all, arg, &BTreeSet::new())
}

/// Checks a whole static program under the empty context.
pub fn check_program(t: &Term) -> TypeReport {
    TypeReport::from_result(elaborate_program(t).map(|(_, ty)| ty))
}

/// [`check_program`] returning the elaborated program as well.
pub fn elaborate_program(t: &Term) -> std::result::Result<(Term, QType), TypeError> {
    if t.has_runtime_forms() {
        let mut span = t.span;
        t.visit(&mut |s| {
            if matches!(s.kind, TermKind::Loc(..) | TermKind::WithC(..)) && s.span.is_known() {
                span = s.span;
            }
        });
        return Err(TypeError::new(
            Kind::MalformedAnnotation,
            "program",
            "store indices and scope eliminations may not appear in a program",
        )
        .located(span));
    }
    elaborate(&TypingEnv::new(), &StoreTyping::new(), &Observation::empty(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typecheck::TypeErrorKind;

    fn q(s: &str) -> Qualifier {
        s.parse().unwrap()
    }

    fn ref_int(s: &str) -> QType {
        Type::reference(Type::Int.q(q("{}"))).q(q(s))
    }

    fn obs(names: &[&str]) -> Observation {
        Observation::from_qualifier(&Qualifier::from_vars(names.iter().copied()))
    }

    fn synth(env: &TypingEnv, phi: &Observation, t: &Term) -> std::result::Result<QType, TypeError> {
        synthesize(env, &StoreTyping::new(), phi, t)
    }

    #[test]
    fn constants_are_untracked() {
        let env = TypingEnv::new();
        assert_eq!(synth(&env, &obs(&[]), &Term::int(7)).unwrap(), Type::Int.q(q("{}")));
        assert_eq!(synth(&env, &obs(&[]), &Term::unit()).unwrap(), Type::Unit.q(q("{}")));
    }

    #[test]
    fn fresh_allocation() {
        let t = synth(&TypingEnv::new(), &obs(&[]), &Term::ref_new(Term::int(7))).unwrap();
        assert_eq!(t, ref_int("{*}"));
        let nested = synth(&TypingEnv::new(), &obs(&[]), &Term::ref_new(Term::ref_new(Term::int(7))));
        assert_eq!(nested.unwrap_err().kind, TypeErrorKind::FreshnessViolation);
    }

    #[test]
    fn coallocation_inherits_proxy_qualifier() {
        let mut env = TypingEnv::new();
        env.push_term("a0".into(), ref_int("{*}")).unwrap();
        let t = Term::ref_at(Term::int(8), Term::var("a0"));
        assert_eq!(synth(&env, &obs(&["a0"]), &t).unwrap(), ref_int("{a0}"));
        let err = synth(&env, &obs(&[]), &t).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::ObservationViolation);
        assert_eq!(err.missing, vec![Elem::Var("a0".into())]);
    }

    fn overlap_context() -> TypingEnv {
        let mut env = TypingEnv::new();
        env.push_term("u".into(), ref_int("{*}")).unwrap();
        env.push_term("v".into(), ref_int("{*}")).unwrap();
        let f = Type::fun("g", "x", ref_int("{*, u}"), Type::Int.q(q("{}"))).q(q("{u, v}"));
        env.push_term("f".into(), f).unwrap();
        env
    }

    #[test]
    fn growing_application_bounds_overlap() {
        let env = overlap_context();
        let phi = obs(&["u", "v", "f"]);
        let ok = synth(&env, &phi, &Term::app(Term::var("f"), Term::var("u"))).unwrap();
        assert_eq!(ok, Type::Int.q(q("{}")));
        let err = synth(&env, &phi, &Term::app(Term::var("f"), Term::var("v"))).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::OverlapViolation);
        assert_eq!(err.rule, "t-app◇");
        // Fresh arguments share nothing.
        let fresh = Term::app(Term::var("f"), Term::ref_new(Term::int(1)));
        assert_eq!(synth(&env, &phi, &fresh).unwrap(), Type::Int.q(q("{}")));
    }

    #[test]
    fn precise_application_substitutes_parameter() {
        let mut env = TypingEnv::new();
        env.push_term("u".into(), ref_int("{*}")).unwrap();
        env.push_term("v".into(), ref_int("{*}")).unwrap();
        let fun = Type::fun("g", "x", ref_int("{u, v}"), ref_int("{x}")).q(q("{}"));
        let phi = obs(&["u", "v"]);
        let r = apply_rule(&env, &phi, &fun, &ref_int("{u, v}"), &Term::unit()).unwrap();
        assert_eq!(r, ref_int("{u, v}"));
        let id = Type::fun("g", "x", Type::Int.q(q("{}")), Type::Int.q(q("{}"))).q(q("{}"));
        let r = apply_rule(&env, &phi, &id, &Type::Int.q(q("{}")), &Term::int(1)).unwrap();
        assert_eq!(r, Type::Int.q(q("{}")));
    }

    #[test]
    fn alias_upcast_in_checking_position() {
        let mut env = TypingEnv::new();
        env.push_term("r".into(), ref_int("{*}")).unwrap();
        env.push_term("s".into(), ref_int("{r}")).unwrap();
        let rep = check(&env, &StoreTyping::new(), &obs(&["r", "s"]), &Term::var("s"), &ref_int("{r}"));
        assert!(rep.is_accepted(), "{rep}");
    }

    #[test]
    fn fresh_result_does_not_check_against_tracked_qualifier() {
        let mut env = TypingEnv::new();
        env.push_term("r".into(), ref_int("{*}")).unwrap();
        let rep = check(
            &env,
            &StoreTyping::new(),
            &obs(&["r"]),
            &Term::ref_new(Term::int(1)),
            &ref_int("{r}"),
        );
        assert_eq!(rep.error_kind(), Some(TypeErrorKind::SubsumptionFailure));
    }

    #[test]
    fn scoped_reference_must_not_escape() {
        let ok = Term::with_r("a", Term::unit(), Term::deref(Term::var("a")));
        assert_eq!(check_program(&ok).ty, Some(Type::Unit.q(q("{}"))));
        let bad = Term::with_r("a", Term::unit(), Term::var("a"));
        assert_eq!(check_program(&bad).error_kind(), Some(TypeErrorKind::EscapeViolation));
        let via_coalloc = Term::with_r("a", Term::unit(), Term::ref_at(Term::unit(), Term::var("a")));
        assert_eq!(check_program(&via_coalloc).error_kind(), Some(TypeErrorKind::EscapeViolation));
    }

    #[test]
    fn lambda_body_sees_only_its_capture() {
        let mut env = TypingEnv::new();
        env.push_term("a".into(), ref_int("{*}")).unwrap();
        let lam = |capture: &str| {
            Term::abs(Lambda {
                self_name: "f".into(),
                param: "x".into(),
                dom: Type::Unit.q(q("{}")),
                cod: Type::Int.q(q("{}")),
                capture: q(capture),
                body: Term::deref(Term::var("a")),
            })
        };
        let ok = synth(&env, &obs(&["a"]), &lam("{a}")).unwrap();
        assert_eq!(ok.qual, q("{a}"));
        let err = synth(&env, &obs(&["a"]), &lam("{}")).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::ObservationViolation);
        assert_eq!(err.rule, "t-var");
    }

    #[test]
    fn type_application_dependency_on_fresh_argument() {
        let env = TypingEnv::new();
        let top = Type::Top.q(q("{*}"));
        // Only the qualifier depends on `x`: a fresh argument is fine.
        let x = Type::Var("X".into()).q(Qualifier::var("x"));
        let univ = Type::all("f", "X", "x", top.clone(), x).q(q("{}"));
        let ok = tapply_rule(&env, &obs(&[]), &univ, &ref_int("{*}")).unwrap();
        assert_eq!(ok, ref_int("{*}"));
        let ok = tapply_rule(&env, &obs(&[]), &univ, &Type::Int.q(q("{}"))).unwrap();
        assert_eq!(ok, Type::Int.q(q("{}")));
        // The result carrier mentions `x`.
        let deep = Type::reference(Type::Var("X".into()).q(Qualifier::var("x"))).q(q("{}"));
        let univ = Type::all("f", "X", "x", top, deep).q(q("{}"));
        let err = tapply_rule(&env, &obs(&[]), &univ, &ref_int("{*}")).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::DependencyViolation);
        let bounded = Type::all("f", "X", "x", Type::Int.q(q("{}")), Type::Unit.q(q("{}"))).q(q("{}"));
        let err = tapply_rule(&env, &obs(&[]), &bounded, &Type::Unit.q(q("{}"))).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::BoundViolation);
        let at_bound = tapply_rule(&env, &obs(&[]), &bounded, &Type::Int.q(q("{}")));
        assert!(at_bound.is_ok());
    }

    #[test]
    fn elaboration_fills_element_annotations() {
        let t = Term::with_r("a", Term::int(1), Term::deref(Term::var("a")));
        let (e, _) = elaborate_program(&t).unwrap();
        let TermKind::WithR { elem, .. } = &e.kind else { panic!() };
        assert_eq!(elem.as_ref(), Some(&Type::Int.q(q("{}"))));
    }

    #[test]
    fn store_indices_need_store_typing_and_observation() {
        let mut sigma = StoreTyping::new();
        sigma.insert(Loc(0), 0, Type::Int.q(q("{}")));
        let mut phi = Observation::empty();
        phi.insert_loc(Loc(0));
        let env = TypingEnv::new();
        let t = Term::deref(Term::loc(Loc(0), 0));
        assert_eq!(synthesize(&env, &sigma, &phi, &t).unwrap(), Type::Int.q(q("{}")));
        let err = synthesize(&env, &sigma, &Observation::empty(), &t).unwrap_err();
        assert_eq!(err.kind, TypeErrorKind::ObservationViolation);
        let closed = Term::with_c(Loc(0), Term::loc(Loc(0), 0));
        let err = synthesize(&env, &sigma, &phi, &closed).unwrap_err();
        assert_eq!((err.kind, err.rule), (TypeErrorKind::EscapeViolation, "t-locin"));
        assert!(!check_program(&t).is_accepted());
    }
}
