//! Reachability qualifiers: finite sets of variables and arena locations,
//! optionally marked fresh (`*`).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::subtyping::TypingEnv;

/// An identifier. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

static FRESH_COUNTER: AtomicU64 = AtomicU64::new(0);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The part of the name before any generated `$` suffix.
    pub fn base(&self) -> &str {
        match self.0.find('$') {
            Some(i) if i > 0 => &self.0[..i],
            _ => &self.0,
        }
    }

    /// A process-wide unique variant of this name. Generated names contain `$`,
    /// which the surface grammar rejects, so they never collide with user names.
    pub fn fresh(&self) -> Name {
        let n = FRESH_COUNTER.fetch_add(1, Ordering::Relaxed);
        Name::new(&format!("{}$r{}", self.base(), n))
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An arena location: one column of the two-dimensional store.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Loc(pub u32);

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ℓ{}", self.0)
    }
}

impl fmt::Debug for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A non-marker qualifier element.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Elem {
    Var(Name),
    Loc(Loc),
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Var(x) => write!(f, "{x}"),
            Elem::Loc(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Qualifier {
    pub vars: BTreeSet<Name>,
    pub locs: BTreeSet<Loc>,
    pub fresh: bool,
}

impl Qualifier {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `◇{}`
    pub fn fresh_only() -> Self {
        Qualifier { fresh: true, ..Self::default() }
    }

    pub fn var(x: impl Into<Name>) -> Self {
        let mut q = Self::default();
        q.vars.insert(x.into());
        q
    }

    pub fn loc(l: Loc) -> Self {
        let mut q = Self::default();
        q.locs.insert(l);
        q
    }

    pub fn from_vars<I, N>(vars: I) -> Self
    where
        I: IntoIterator<Item = N>,
        N: Into<Name>,
    {
        Qualifier { vars: vars.into_iter().map(Into::into).collect(), ..Self::default() }
    }

    pub fn with_fresh(mut self, fresh: bool) -> Self {
        self.fresh = fresh;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.locs.is_empty() && !self.fresh
    }

    pub fn has_var(&self, x: &Name) -> bool {
        self.vars.contains(x)
    }

    pub fn has_loc(&self, l: Loc) -> bool {
        self.locs.contains(&l)
    }

    pub fn contains(&self, e: &Elem) -> bool {
        match e {
            Elem::Var(x) => self.vars.contains(x),
            Elem::Loc(l) => self.locs.contains(l),
        }
    }

    pub fn insert(&mut self, e: Elem) {
        match e {
            Elem::Var(x) => {
                self.vars.insert(x);
            }
            Elem::Loc(l) => {
                self.locs.insert(l);
            }
        }
    }

    /// Elements without the marker, variables first.
    pub fn elems(&self) -> impl Iterator<Item = Elem> + '_ {
        self.vars
            .iter()
            .cloned()
            .map(Elem::Var)
            .chain(self.locs.iter().copied().map(Elem::Loc))
    }

    pub fn union(&self, other: &Qualifier) -> Qualifier {
        Qualifier {
            vars: self.vars.union(&other.vars).cloned().collect(),
            locs: self.locs.union(&other.locs).copied().collect(),
            fresh: self.fresh || other.fresh,
        }
    }

    pub fn intersection(&self, other: &Qualifier) -> Qualifier {
        Qualifier {
            vars: self.vars.intersection(&other.vars).cloned().collect(),
            locs: self.locs.intersection(&other.locs).copied().collect(),
            fresh: self.fresh && other.fresh,
        }
    }

    /// Plain set inclusion, marker included.
    pub fn is_subset(&self, other: &Qualifier) -> bool {
        (!self.fresh || other.fresh)
            && self.vars.is_subset(&other.vars)
            && self.locs.is_subset(&other.locs)
    }

    /// True when no variable or location is shared (the marker is ignored).
    pub fn is_disjoint_elems(&self, other: &Qualifier) -> bool {
        self.vars.is_disjoint(&other.vars) && self.locs.is_disjoint(&other.locs)
    }

    pub fn is_disjoint_locs(&self, locs: &BTreeSet<Loc>) -> bool {
        self.locs.is_disjoint(locs)
    }

    pub fn without_var(&self, x: &Name) -> Qualifier {
        let mut q = self.clone();
        q.vars.remove(x);
        q
    }

    pub fn without_fresh(&self) -> Qualifier {
        self.clone().with_fresh(false)
    }

    /// `q[p/x]`: replaces `x` by `p` when present.
    pub fn substitute_var(&self, x: &Name, p: &Qualifier) -> Qualifier {
        if self.vars.contains(x) {
            self.without_var(x).union(p)
        } else {
            self.clone()
        }
    }

    /// `q[p/*]`: the marker is consumed and survives only if `p` carries it.
    pub fn substitute_fresh(&self, p: &Qualifier) -> Qualifier {
        if self.fresh {
            self.without_fresh().union(p)
        } else {
            self.clone()
        }
    }

    pub fn rename_var(&self, from: &Name, to: &Name) -> Qualifier {
        self.substitute_var(from, &Qualifier::var(to.clone()))
    }
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for e in self.elems() {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{e}")?;
        }
        if self.fresh {
            if !first {
                f.write_str(", ")?;
            }
            f.write_str("*")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed qualifier: {0}")]
pub struct QualifierSyntaxError(pub String);

impl FromStr for Qualifier {
    type Err = QualifierSyntaxError;

    /// Accepts `{x, y, ℓ3, *}`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| QualifierSyntaxError(s.to_string()))?;
        let mut q = Qualifier::empty();
        for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "*" {
                q.fresh = true;
            } else if let Some(n) = part.strip_prefix('ℓ') {
                let n = n.parse().map_err(|_| QualifierSyntaxError(s.to_string()))?;
                q.locs.insert(Loc(n));
            } else if part.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$' || c == '\'')
            {
                q.vars.insert(Name::new(part));
            } else {
                return Err(QualifierSyntaxError(s.to_string()));
            }
        }
        Ok(q)
    }
}

/// An observation filter: the resources a derivation may mention.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Observation {
    pub vars: BTreeSet<Name>,
    pub locs: BTreeSet<Loc>,
}

impl Observation {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Drops the marker of `q`.
    pub fn from_qualifier(q: &Qualifier) -> Self {
        Observation { vars: q.vars.clone(), locs: q.locs.clone() }
    }

    pub fn to_qualifier(&self) -> Qualifier {
        Qualifier { vars: self.vars.clone(), locs: self.locs.clone(), fresh: false }
    }

    pub fn contains(&self, e: &Elem) -> bool {
        match e {
            Elem::Var(x) => self.vars.contains(x),
            Elem::Loc(l) => self.locs.contains(l),
        }
    }

    /// `q ⊆ *φ`: every element of `q` is observed; the marker is always allowed.
    pub fn covers(&self, q: &Qualifier) -> bool {
        q.vars.is_subset(&self.vars) && q.locs.is_subset(&self.locs)
    }

    /// Elements of `q` outside the observation.
    pub fn missing(&self, q: &Qualifier) -> Vec<Elem> {
        q.elems().filter(|e| !self.contains(e)).collect()
    }

    pub fn with_var(&self, x: &Name) -> Observation {
        let mut o = self.clone();
        o.vars.insert(x.clone());
        o
    }

    pub fn insert_loc(&mut self, l: Loc) {
        self.locs.insert(l);
    }

    pub fn remove_loc(&mut self, l: Loc) {
        self.locs.remove(&l);
    }

    /// `φ ⊖ t`: the observation without the term's local locations.
    pub fn without_locs(&self, locs: &BTreeSet<Loc>) -> Observation {
        Observation {
            vars: self.vars.clone(),
            locs: self.locs.difference(locs).copied().collect(),
        }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_qualifier(), f)
    }
}

impl fmt::Debug for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unbound qualifier variable `{0}`")]
pub struct UnboundVariable(pub Name);

/// `q*`: closes `q` under the qualifiers declared at its variables' bindings.
/// Locations never unfold.
pub fn saturate(env: &TypingEnv, q: &Qualifier) -> Result<Qualifier, UnboundVariable> {
    let mut acc = q.clone();
    // Bounded by |env| rounds; a telescope stabilises by then.
    for _ in 0..=env.len() {
        let mut next = acc.clone();
        for x in &acc.vars {
            let declared = env.declared_qualifier(x).ok_or_else(|| UnboundVariable(x.clone()))?;
            next = next.union(declared);
        }
        if next == acc {
            break;
        }
        acc = next;
    }
    Ok(acc)
}

/// `p ⊼ q = *(p* ∩ q*)`.
pub fn overlap(env: &TypingEnv, p: &Qualifier, q: &Qualifier) -> Result<Qualifier, UnboundVariable> {
    let ps = saturate(env, p)?;
    let qs = saturate(env, q)?;
    Ok(ps.intersection(&qs).with_fresh(true))
}

/// Algorithmic qualifier subtyping `p <: q`.
///
/// The right side is closed under the declared qualifiers of its non-fresh
/// term bindings (a variable may stand for what it reaches); each element of
/// the left side must then be in that closure or be a variable whose
/// non-fresh declared qualifier is itself below `q`.
pub fn qual_sub(env: &TypingEnv, p: &Qualifier, q: &Qualifier) -> bool {
    if p.fresh && !q.fresh {
        return false;
    }
    if !q.vars.iter().all(|x| env.declared_qualifier(x).is_some()) {
        return false;
    }
    let qsat = self_saturate(env, q);
    p.elems().all(|e| covered(env, &e, &qsat))
}

fn covered(env: &TypingEnv, e: &Elem, qsat: &Qualifier) -> bool {
    if qsat.contains(e) {
        return match e {
            Elem::Var(x) => env.declared_qualifier(x).is_some(),
            Elem::Loc(_) => true,
        };
    }
    match e {
        Elem::Var(x) => match env.declared_qualifier(x) {
            Some(declared) if !declared.fresh => {
                declared.elems().all(|d| covered(env, &d, qsat))
            }
            _ => false,
        },
        Elem::Loc(_) => false,
    }
}

fn self_saturate(env: &TypingEnv, q: &Qualifier) -> Qualifier {
    let mut acc = q.clone();
    loop {
        let mut changed = false;
        let vars: Vec<Name> = acc.vars.iter().cloned().collect();
        for f in vars {
            if let Some(declared) = env.term_qualifier(&f) {
                if !declared.fresh && !declared.is_subset(&acc.without_fresh()) {
                    let merged = acc.union(declared);
                    if merged != acc {
                        acc = merged;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtyping::{QType, Type};

    fn q(s: &str) -> Qualifier {
        s.parse().unwrap()
    }

    fn ref_int(qual: &str) -> QType {
        QType::new(Type::reference(QType::new(Type::Int, Qualifier::empty())), q(qual))
    }

    fn alias_env() -> TypingEnv {
        let mut env = TypingEnv::new();
        env.push_term("r".into(), ref_int("{*}")).unwrap();
        env.push_term("s".into(), ref_int("{r}")).unwrap();
        env
    }

    #[test]
    fn substitute_var_cases() {
        assert_eq!(q("{x, y}").substitute_var(&"x".into(), &q("{z}")), q("{y, z}"));
        assert_eq!(q("{y}").substitute_var(&"x".into(), &q("{z}")), q("{y}"));
        assert_eq!(q("{x}").substitute_var(&"x".into(), &q("{x}")), q("{x}"));
        assert_eq!(q("{x}").substitute_var(&"x".into(), &q("{*}")), q("{*}"));
    }

    #[test]
    fn substitute_fresh_cases() {
        assert_eq!(q("{x, *}").substitute_fresh(&q("{ℓ0}")), q("{x, ℓ0}"));
        assert_eq!(q("{x}").substitute_fresh(&q("{ℓ0}")), q("{x}"));
        assert_eq!(q("{*}").substitute_fresh(&q("{ℓ0, *}")), q("{ℓ0, *}"));
    }

    #[test]
    fn saturate_unfolds_through_chain() {
        let env = alias_env();
        assert_eq!(saturate(&env, &q("{s}")).unwrap(), q("{s, r, *}"));
        assert_eq!(saturate(&env, &q("{}")).unwrap(), q("{}"));
        assert!(saturate(&env, &q("{nope}")).is_err());
    }

    #[test]
    fn overlap_examples() {
        let env = alias_env();
        assert_eq!(overlap(&env, &q("{s}"), &q("{r}")).unwrap(), q("{r, *}"));
        let mut uv = TypingEnv::new();
        uv.push_term("u".into(), ref_int("{*}")).unwrap();
        uv.push_term("v".into(), ref_int("{*}")).unwrap();
        assert_eq!(overlap(&uv, &q("{u}"), &q("{u, v}")).unwrap(), q("{u, *}"));
        assert_eq!(overlap(&uv, &q("{}"), &q("{u}")).unwrap(), q("{*}"));
    }

    #[test]
    fn alias_upcast() {
        let env = alias_env();
        assert!(qual_sub(&env, &q("{s}"), &q("{r}")));
        // q-self on `s` then q-trans: an alias's source is below the alias.
        assert!(qual_sub(&env, &q("{r}"), &q("{s}")));
        assert!(!qual_sub(&env, &q("{r}"), &q("{}")));
        assert!(!qual_sub(&env, &q("{s, *}"), &q("{r}")));
        assert!(qual_sub(&env, &q("{s}"), &q("{r, *}")));
    }

    #[test]
    fn self_rule() {
        let mut env = TypingEnv::new();
        env.push_term("a".into(), ref_int("{*}")).unwrap();
        env.push_term("f".into(), ref_int("{a}")).unwrap();
        assert!(qual_sub(&env, &q("{a, f}"), &q("{f}")));
        assert!(qual_sub(&env, &q("{a}"), &q("{f}")));
        env.push_term("g".into(), ref_int("{a, *}")).unwrap();
        assert!(!qual_sub(&env, &q("{a}"), &q("{g}")));
    }

    #[test]
    fn unbound_is_rejected() {
        let env = alias_env();
        assert!(!qual_sub(&env, &q("{zz}"), &q("{zz}")));
        assert!(!qual_sub(&env, &q("{}"), &q("{zz}")));
    }

    #[test]
    fn locations_compare_by_identity() {
        let env = TypingEnv::new();
        assert!(qual_sub(&env, &q("{ℓ1}"), &q("{ℓ1, ℓ2}")));
        assert!(!qual_sub(&env, &q("{ℓ3}"), &q("{ℓ1, ℓ2}")));
    }

    #[test]
    fn display_round_trip() {
        for s in ["{}", "{*}", "{a, b, ℓ3, *}", "{x, ℓ0}"] {
            assert_eq!(q(s).to_string(), s);
        }
    }
}
