use std::fmt;

use thiserror::Error;

use super::types::QType;
use crate::qualifiers::{Name, Qualifier};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Binding {
    /// `x : T^q`
    Term { name: Name, ty: QType },
    /// `X^x <: T^q`
    Type { tvar: Name, qvar: Name, bound: QType },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("`{0}` is already bound")]
    Duplicate(Name),
    #[error("binding for `{binder}` mentions `{name}`, which is not bound before it")]
    NotTelescoped { binder: Name, name: Name },
}

/// A typing context kept as a telescope: every binding mentions only
/// earlier binders, and no name is bound twice.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TypingEnv {
    entries: Vec<Binding>,
}

impl TypingEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Binding] {
        &self.entries
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    /// True if `name` is bound as a term variable, type variable or
    /// qualifier variable.
    pub fn binds(&self, name: &Name) -> bool {
        self.entries.iter().any(|b| match b {
            Binding::Term { name: n, .. } => n == name,
            Binding::Type { tvar, qvar, .. } => tvar == name || qvar == name,
        })
    }

    fn check_scoped(&self, binder: &Name, ty: &QType) -> Result<(), EnvError> {
        for name in ty.free_qvars() {
            if self.declared_qualifier(&name).is_none() {
                return Err(EnvError::NotTelescoped { binder: binder.clone(), name });
            }
        }
        for name in ty.free_tvars() {
            if self.tvar_bound(&name).is_none() {
                return Err(EnvError::NotTelescoped { binder: binder.clone(), name });
            }
        }
        Ok(())
    }

    pub fn push_term(&mut self, name: Name, ty: QType) -> Result<(), EnvError> {
        if self.binds(&name) {
            return Err(EnvError::Duplicate(name));
        }
        self.check_scoped(&name, &ty)?;
        self.entries.push(Binding::Term { name, ty });
        Ok(())
    }

    pub fn push_type(&mut self, tvar: Name, qvar: Name, bound: QType) -> Result<(), EnvError> {
        for n in [&tvar, &qvar] {
            if self.binds(n) {
                return Err(EnvError::Duplicate(n.clone()));
            }
        }
        if tvar == qvar {
            return Err(EnvError::Duplicate(tvar));
        }
        self.check_scoped(&tvar, &bound)?;
        self.entries.push(Binding::Type { tvar, qvar, bound });
        Ok(())
    }

    pub fn term_type(&self, name: &Name) -> Option<&QType> {
        self.entries.iter().rev().find_map(|b| match b {
            Binding::Term { name: n, ty } if n == name => Some(ty),
            _ => None,
        })
    }

    /// Qualifier of a term binding (the one `q-self` may fold).
    pub fn term_qualifier(&self, name: &Name) -> Option<&Qualifier> {
        self.term_type(name).map(|t| &t.qual)
    }

    /// Qualifier declared for a qualifier variable: a term binding's
    /// qualifier or a type binding's bound qualifier.
    pub fn declared_qualifier(&self, name: &Name) -> Option<&Qualifier> {
        self.entries.iter().rev().find_map(|b| match b {
            Binding::Term { name: n, ty } if n == name => Some(&ty.qual),
            Binding::Type { qvar, bound, .. } if qvar == name => Some(&bound.qual),
            _ => None,
        })
    }

    pub fn tvar_bound(&self, tvar: &Name) -> Option<&QType> {
        self.entries.iter().rev().find_map(|b| match b {
            Binding::Type { tvar: t, bound, .. } if t == tvar => Some(bound),
            _ => None,
        })
    }

    /// Qualifier variables in scope.
    pub fn qualifier_domain(&self) -> Vec<Name> {
        self.entries
            .iter()
            .map(|b| match b {
                Binding::Term { name, .. } => name.clone(),
                Binding::Type { qvar, .. } => qvar.clone(),
            })
            .collect()
    }
}

impl fmt::Display for TypingEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, b) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match b {
                Binding::Term { name, ty } => write!(f, "{name}: {ty}")?,
                Binding::Type { tvar, qvar, bound } => write!(f, "{tvar}^{qvar} <: {bound}")?,
            }
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtyping::Type;

    #[test]
    fn telescope_is_enforced() {
        let mut env = TypingEnv::new();
        let later = Type::Int.q(Qualifier::var("b"));
        assert!(matches!(
            env.push_term("a".into(), later.clone()),
            Err(EnvError::NotTelescoped { .. })
        ));
        env.push_term("b".into(), Type::Int.q(Qualifier::fresh_only())).unwrap();
        env.push_term("a".into(), later).unwrap();
        assert!(matches!(
            env.push_term("a".into(), Type::Int.q(Qualifier::empty())),
            Err(EnvError::Duplicate(_))
        ));
    }

    #[test]
    fn type_bindings_declare_their_qualifier_variable() {
        let mut env = TypingEnv::new();
        env.push_type("X".into(), "x".into(), Type::Top.q(Qualifier::empty())).unwrap();
        assert_eq!(env.declared_qualifier(&"x".into()), Some(&Qualifier::empty()));
        assert!(env.term_qualifier(&"x".into()).is_none());
        assert!(env.tvar_bound(&"X".into()).is_some());
    }
}
