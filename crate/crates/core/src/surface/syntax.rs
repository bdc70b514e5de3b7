//! Surface syntax tree. Every node keeps its source span so that lowering and
//! checking diagnostics point back into the program text.

use std::collections::BTreeSet;

use crate::qualifiers::{Loc, Name, Qualifier};
use crate::subtyping::QType;
use crate::typecheck::{Const, PrimOp, Span};

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

/// Where a `new Ref(..)` places its cell.
#[derive(Clone, Debug)]
pub enum Placement {
    /// A new arena.
    Fresh,
    /// The arena of the proxy reference.
    At(Box<Expr>),
    /// A new arena closed at the end of the enclosing block.
    Scoped,
}

/// A term parameter. `None` type means the unit parameter of `() => e`.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: Name,
    pub ty: QType,
}

#[derive(Clone, Debug)]
pub struct TParam {
    pub tvar: Name,
    pub qvar: Name,
    pub bound: QType,
}

/// Shared shape of lambdas and `def`s. Missing capture and codomain are
/// inferred during lowering.
#[derive(Clone, Debug)]
pub struct FunSig {
    pub self_name: Option<Name>,
    pub tparam: Option<TParam>,
    /// `None` for a type lambda without a term parameter.
    pub param: Option<Param>,
    pub capture: Option<Qualifier>,
    pub cod: Option<QType>,
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Lit(Const),
    Var(Name),
    Lambda(Box<FunSig>, Box<Expr>),
    Apply(Box<Expr>, Box<Expr>),
    TypeApply(Box<Expr>, QType),
    NewRef { init: Box<Expr>, elem: Option<QType>, placement: Placement },
    Deref(Box<Expr>),
    Assign(Box<Expr>, Box<Expr>),
    Block(Vec<Item>),
    Annot(Box<Expr>, QType),
    Prim(PrimOp, Box<Expr>, Box<Expr>),
    IfZero(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Core-only binder form `with x = Ref(e) in body`.
    With { name: Name, elem: Option<QType>, init: Box<Expr>, body: Box<Expr> },
    /// Runtime-only forms.
    WithC(Loc, Box<Expr>),
    Loc(Loc, u32),
}

#[derive(Clone, Debug)]
pub enum Item {
    /// `val a, b: T = e` binds each name to a separate evaluation of `e`.
    Val { names: Vec<Name>, ann: Option<QType>, rhs: Expr, span: Span },
    Def { name: Name, sig: Box<FunSig>, body: Expr, span: Span },
    Expr(Expr),
}

impl Item {
    pub fn span(&self) -> Span {
        match self {
            Item::Val { span, .. } | Item::Def { span, .. } => *span,
            Item::Expr(e) => e.span,
        }
    }
}

/// A parsed program: the items of the implicit top-level block.
#[derive(Clone, Debug)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Free term variables, used to default lambda captures.
    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        use ExprKind::*;
        match &self.kind {
            Lit(_) | Loc(..) => {}
            Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Lambda(sig, body) => {
                let n = bound.len();
                bound.extend(sig.self_name.iter().cloned());
                bound.extend(sig.param.iter().map(|p| p.name.clone()));
                body.collect_free(bound, out);
                bound.truncate(n);
            }
            Apply(a, b) | Assign(a, b) | Prim(_, a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            TypeApply(a, _) | Deref(a) | Annot(a, _) | WithC(_, a) => a.collect_free(bound, out),
            NewRef { init, placement, .. } => {
                init.collect_free(bound, out);
                if let Placement::At(p) = placement {
                    p.collect_free(bound, out);
                }
            }
            IfZero(c, a, b) => {
                c.collect_free(bound, out);
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            With { name, init, body, .. } => {
                init.collect_free(bound, out);
                bound.push(name.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Block(items) => {
                let n = bound.len();
                for item in items {
                    match item {
                        Item::Val { names, rhs, .. } => {
                            rhs.collect_free(bound, out);
                            bound.extend(names.iter().cloned());
                        }
                        Item::Def { name, sig, body, .. } => {
                            let m = bound.len();
                            bound.push(name.clone());
                            bound.extend(sig.param.iter().map(|p| p.name.clone()));
                            body.collect_free(bound, out);
                            bound.truncate(m);
                            bound.push(name.clone());
                        }
                        Item::Expr(e) => e.collect_free(bound, out),
                    }
                }
                bound.truncate(n);
            }
        }
    }
}
