//! Types, typing environments and the subtyping relation.

mod env;
mod types;

pub use env::{Binding, EnvError, TypingEnv};
pub use types::{AllType, BaseType, FunType, QType, Subst, Type};
pub(crate) use types::{alpha_qtype, alpha_qual};

use crate::qualifiers::{qual_sub, Name, Qualifier};

/// Structural subtyping `s <: t`.
pub fn type_sub(env: &TypingEnv, s: &Type, t: &Type) -> bool {
    match (s, t) {
        (_, Type::Top) => true,
        (Type::Base(a), Type::Base(b)) => a == b,
        (Type::Var(x), Type::Var(y)) if x == y => env.tvar_bound(x).is_some(),
        (Type::Var(x), _) => match env.tvar_bound(x) {
            Some(bound) => type_sub(env, &bound.ty.clone(), t),
            None => false,
        },
        (Type::Ref(p), Type::Ref(q)) => {
            p.qual == q.qual && type_sub(env, &p.ty, &q.ty) && type_sub(env, &q.ty, &p.ty)
        }
        (Type::Fun(f), Type::Fun(g)) => {
            if !qtype_sub(env, &g.dom, &f.dom) {
                return false;
            }
            let (self_name, param) = binder_pair(env, &f.self_name, &f.param);
            let left_cod = rename2(&f.cod, &f.self_name, &self_name, &f.param, &param);
            let right_cod = rename2(&g.cod, &g.self_name, &self_name, &g.param, &param);
            let left_fun = Type::fun(self_name.clone(), param.clone(), f.dom.clone(), left_cod.clone());
            let mut inner = env.clone();
            if inner.push_term(self_name, left_fun.q(Qualifier::fresh_only())).is_err()
                || inner.push_term(param, g.dom.clone()).is_err()
            {
                return false;
            }
            qtype_sub(&inner, &left_cod, &right_cod)
        }
        (Type::All(f), Type::All(g)) => {
            if !qtype_sub(env, &g.bound, &f.bound) {
                return false;
            }
            let (self_name, qvar) = binder_pair(env, &f.self_name, &f.qvar);
            let tvar = if env.binds(&f.tvar) || f.tvar == self_name || f.tvar == qvar {
                f.tvar.fresh()
            } else {
                f.tvar.clone()
            };
            let sub_for = |cod: &QType, s: &Name, q: &Name, t: &Name| {
                cod.subst(&Subst {
                    qvars: vec![
                        (s.clone(), Qualifier::var(self_name.clone())),
                        (q.clone(), Qualifier::var(qvar.clone())),
                    ],
                    tvars: vec![(t.clone(), Type::Var(tvar.clone()))],
                })
            };
            let left_cod = sub_for(&f.cod, &f.self_name, &f.qvar, &f.tvar);
            let right_cod = sub_for(&g.cod, &g.self_name, &g.qvar, &g.tvar);
            let left_all = Type::all(
                self_name.clone(),
                tvar.clone(),
                qvar.clone(),
                f.bound.clone(),
                left_cod.clone(),
            );
            let mut inner = env.clone();
            if inner.push_term(self_name, left_all.q(Qualifier::fresh_only())).is_err()
                || inner.push_type(tvar, qvar, g.bound.clone()).is_err()
            {
                return false;
            }
            qtype_sub(&inner, &left_cod, &right_cod)
        }
        _ => false,
    }
}

/// `S^p <: T^q`.
pub fn qtype_sub(env: &TypingEnv, p: &QType, q: &QType) -> bool {
    type_sub(env, &p.ty, &q.ty) && qual_sub(env, &p.qual, &q.qual)
}

fn binder_pair(env: &TypingEnv, a: &Name, b: &Name) -> (Name, Name) {
    let a2 = if env.binds(a) { a.fresh() } else { a.clone() };
    let b2 = if env.binds(b) || b == &a2 { b.fresh() } else { b.clone() };
    (a2, b2)
}

fn rename2(t: &QType, from1: &Name, to1: &Name, from2: &Name, to2: &Name) -> QType {
    if from1 == to1 && from2 == to2 {
        return t.clone();
    }
    t.subst(&Subst {
        qvars: vec![
            (from1.clone(), Qualifier::var(to1.clone())),
            (from2.clone(), Qualifier::var(to2.clone())),
        ],
        tvars: Vec::new(),
    })
}
