//! Algorithmic term typing: qualifier-minimal synthesis under an observation
//! filter, with subsumption only at checking positions.

mod check;
mod term;

pub use check::{
    apply_rule, check, check_program, elaborate, elaborate_program, synthesize, tapply_rule,
};
pub use term::{Const, Lambda, PrimOp, Span, TLambda, Term, TermKind, TermSubst};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::qualifiers::{Elem, Loc};
use crate::subtyping::QType;

/// Which premise a rejected derivation failed.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum TypeErrorKind {
    /// `◇` where the rule forbids it.
    FreshnessViolation,
    /// A resource outside the observation filter.
    ObservationViolation,
    /// A scoped reference or closed location reaches the result.
    EscapeViolation,
    /// Growing application: the argument shares more than the domain permits.
    OverlapViolation,
    /// A local location is not separate from a qualifier it must avoid.
    LocalLocationViolation,
    /// A fresh argument flows into a codomain that depends on the parameter.
    DependencyViolation,
    /// A type argument is not below the declared bound.
    BoundViolation,
    SubsumptionFailure,
    /// The carrier has the wrong shape for the eliminator.
    ShapeMismatch,
    Unbound,
    MalformedAnnotation,
    UnknownLocation,
    Internal,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{span} {rule} {kind}: {message}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    /// Name of the typing rule whose premise failed.
    pub rule: &'static str,
    pub message: String,
    pub span: Span,
    /// Elements outside the observation, for observation failures.
    pub missing: Vec<Elem>,
}

impl TypeError {
    pub fn new(kind: TypeErrorKind, rule: &'static str, message: impl Into<String>) -> Self {
        TypeError { kind, rule, message: message.into(), span: Span::default(), missing: Vec::new() }
    }

    pub fn with_missing(mut self, missing: Vec<Elem>) -> Self {
        self.missing = missing;
        self
    }

    /// Attaches `span` unless an inner span is already known.
    pub fn located(mut self, span: Span) -> Self {
        if !self.span.is_known() {
            self.span = span;
        }
        self
    }
}

/// `Σ`: the qualified type of every allocated cell.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct StoreTyping {
    entries: BTreeMap<(Loc, u32), QType>,
}

impl StoreTyping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, l: Loc, o: u32, ty: QType) {
        self.entries.insert((l, o), ty);
    }

    pub fn get(&self, l: Loc, o: u32) -> Option<&QType> {
        self.entries.get(&(l, o))
    }

    /// `domℓ(Σ)`.
    pub fn locations(&self) -> std::collections::BTreeSet<Loc> {
        self.entries.keys().map(|(l, _)| *l).collect()
    }

    pub fn has_location(&self, l: Loc) -> bool {
        self.entries.range((l, 0)..=(l, u32::MAX)).next().is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((Loc, u32), &QType)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// Outcome of a checking session. A rejection carries at least one
/// diagnostic naming the failed premise.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeReport {
    pub verdict: Verdict,
    pub ty: Option<QType>,
    pub diagnostics: Vec<TypeError>,
}

impl TypeReport {
    pub fn accepted(ty: QType) -> Self {
        TypeReport { verdict: Verdict::Accepted, ty: Some(ty), diagnostics: Vec::new() }
    }

    pub fn rejected(err: TypeError) -> Self {
        TypeReport { verdict: Verdict::Rejected, ty: None, diagnostics: vec![err] }
    }

    pub fn from_result(r: Result<QType, TypeError>) -> Self {
        match r {
            Ok(ty) => Self::accepted(ty),
            Err(e) => Self::rejected(e),
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    /// Kind of the first diagnostic, if rejected.
    pub fn error_kind(&self) -> Option<TypeErrorKind> {
        self.diagnostics.first().map(|d| d.kind)
    }
}

impl fmt::Display for TypeReport {
    /// Diagnostics one per line, then `ACCEPT <type>` or `REJECT <kind>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        match (&self.verdict, &self.ty) {
            (Verdict::Accepted, Some(ty)) => write!(f, "ACCEPT {ty}"),
            _ => write!(
                f,
                "REJECT {}",
                self.error_kind().map_or("Internal".to_string(), |k| k.to_string())
            ),
        }
    }
}
