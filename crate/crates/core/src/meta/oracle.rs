//! Brute-force qualifier subtyping: the full derivable relation over a small
//! context, computed by closing the axioms under congruence and transitivity.

use std::collections::BTreeSet;

use super::HarnessError;
use crate::qualifiers::{Name, Qualifier};
use crate::subtyping::{Binding, Type, TypingEnv};

/// Derivable `p <: q` pairs over every qualifier drawn from the context's
/// qualifier variables and the freshness marker. Qualifiers are encoded as
/// bit masks: bit `i` is the `i`-th variable, the top bit is the marker.
#[derive(Clone, Debug)]
pub struct QsubRelation {
    names: Vec<Name>,
    /// `rows[p]` has bit `q` set when `p <: q`.
    rows: Vec<u64>,
}

impl QsubRelation {
    fn width(&self) -> usize {
        self.names.len() + 1
    }

    fn encode(&self, q: &Qualifier) -> Option<usize> {
        if !q.locs.is_empty() {
            return None;
        }
        let mut m = if q.fresh { 1 << self.names.len() } else { 0 };
        for x in &q.vars {
            m |= 1 << self.names.iter().position(|n| n == x)?;
        }
        Some(m)
    }

    fn decode(&self, m: usize) -> Qualifier {
        let mut q = Qualifier::from_vars(
            self.names.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, n)| n.clone()),
        );
        if m & (1 << self.names.len()) != 0 {
            q = q.with_fresh(true);
        }
        q
    }

    /// Every qualifier of the universe.
    pub fn universe(&self) -> Vec<Qualifier> {
        (0..1usize << self.width()).map(|m| self.decode(m)).collect()
    }

    /// Whether `p <: q` is derivable. Qualifiers outside the universe are
    /// never related.
    pub fn contains(&self, p: &Qualifier, q: &Qualifier) -> bool {
        match (self.encode(p), self.encode(q)) {
            (Some(a), Some(b)) => self.rows[a] & (1 << b) != 0,
            _ => false,
        }
    }

    pub fn pairs(&self) -> BTreeSet<(Qualifier, Qualifier)> {
        let n = 1usize << self.width();
        let mut out = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                if self.rows[a] & (1 << b) != 0 {
                    out.insert((self.decode(a), self.decode(b)));
                }
            }
        }
        out
    }
}

/// Computes the declarative relation for `env`. Universes are capped at
/// `bound` elements (variables plus the marker) and at six bits overall.
pub fn declarative_qsub_oracle(env: &TypingEnv, bound: usize) -> Result<QsubRelation, HarnessError> {
    let names = env.qualifier_domain();
    let size = names.len() + 1;
    if size > bound.min(6) {
        return Err(HarnessError::UniverseTooLarge { size, bound: bound.min(6) });
    }
    let mut rel = QsubRelation { names, rows: vec![0; 1 << size] };
    let n = 1usize << size;

    // Subset axioms.
    for a in 0..n {
        for b in 0..n {
            if a & !b == 0 {
                rel.rows[a] |= 1 << b;
            }
        }
    }
    // Unfolding a variable to its declared qualifier, and folding a
    // qualifier back into a term binding that declares it.
    for (i, b) in env.entries().iter().enumerate() {
        let declared = match b {
            Binding::Term { ty, .. } => &ty.qual,
            Binding::Type { bound, .. } => &bound.qual,
        };
        if let Some(l) = declared.locs.iter().next() {
            return Err(HarnessError::LocationInContext(*l));
        }
        if declared.fresh {
            continue;
        }
        let d = rel.encode(declared).expect("telescoped qualifier lies in the universe");
        rel.rows[1 << i] |= 1 << d;
        if matches!(b, Binding::Term { .. }) {
            rel.rows[d | 1 << i] |= 1 << (1 << i);
        }
    }
    loop {
        let before = rel.rows.clone();
        // Congruence: p <: q gives r ∪ p <: r ∪ q.
        for a in 0..n {
            let row = rel.rows[a];
            for b in (0..n).filter(|b| row & (1 << b) != 0) {
                for r in 0..n {
                    rel.rows[a | r] |= 1 << (b | r);
                }
            }
        }
        // Transitivity.
        for k in 0..n {
            for a in 0..n {
                if rel.rows[a] & (1 << k) != 0 {
                    rel.rows[a] |= rel.rows[k];
                }
            }
        }
        if rel.rows == before {
            return Ok(rel);
        }
    }
}

/// Every telescoped context of up to `max` bindings over the names `a`, `b`,
/// `c`, ...: each binding is a term or a type binding whose qualifier is any
/// subset of the earlier names, with or without the marker.
pub fn enumerate_contexts(max: usize) -> Vec<TypingEnv> {
    let mut out = vec![TypingEnv::new()];
    let mut frontier = vec![TypingEnv::new()];
    for i in 0..max {
        let name = Name::new(&((b'a' + i as u8) as char).to_string());
        let mut next = Vec::new();
        for env in &frontier {
            let earlier = env.qualifier_domain();
            for mask in 0..1usize << (earlier.len() + 1) {
                let mut q = Qualifier::from_vars(
                    earlier.iter().enumerate().filter(|(j, _)| mask & (1 << j) != 0).map(|(_, n)| n.clone()),
                );
                if mask & (1 << earlier.len()) != 0 {
                    q = q.with_fresh(true);
                }
                let mut term = env.clone();
                term.push_term(name.clone(), Type::Int.q(q.clone())).expect("fresh name");
                next.push(term);
                let mut ty = env.clone();
                let tvar = Name::new(&name.as_str().to_uppercase());
                ty.push_type(tvar, name.clone(), Type::Top.q(q)).expect("fresh name");
                next.push(ty);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
