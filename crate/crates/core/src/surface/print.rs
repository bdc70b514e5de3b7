//! Canonical core-syntax printer. Its output re-parses (in core mode) to an
//! alpha-equivalent term.

use std::fmt::{self, Write};

use crate::typecheck::{Const, PrimOp, Term, TermKind};

/// Binding strength of a form; a subterm weaker than its slot is wrapped
/// in parentheses.
fn level(t: &Term) -> u8 {
    use TermKind::*;
    match &t.kind {
        Abs(_) | TAbs(_) | WithR { .. } | IfZero(..) | Assign(..) => 0,
        Prim(PrimOp::Add | PrimOp::Sub, ..) => 1,
        Prim(PrimOp::Mul, ..) => 2,
        Deref(_) | RefAt { .. } => 3,
        App(..) | TApp(..) => 4,
        Const(_) | Var(_) | Loc(..) | RefNew { .. } | WithC(..) => 5,
    }
}

fn at(out: &mut String, t: &Term, min: u8) -> fmt::Result {
    if level(t) < min {
        out.push('(');
        expr(out, t)?;
        out.push(')');
        Ok(())
    } else {
        expr(out, t)
    }
}

fn elem_suffix(out: &mut String, elem: &Option<crate::subtyping::QType>) -> fmt::Result {
    if let Some(e) = elem {
        write!(out, "[{e}]")?;
    }
    Ok(())
}

fn expr(out: &mut String, t: &Term) -> fmt::Result {
    use TermKind::*;
    match &t.kind {
        Const(crate::typecheck::Const::Int(n)) => write!(out, "{n}"),
        Const(crate::typecheck::Const::Bool(b)) => write!(out, "{b}"),
        Const(crate::typecheck::Const::Unit) => out.write_str("()"),
        Var(x) => write!(out, "{x}"),
        Loc(l, o) => write!(out, "{l}·{o}"),
        Abs(lam) => {
            write!(
                out,
                "fun {}({}: {})^{}: {} => ",
                lam.self_name, lam.param, lam.dom, lam.capture, lam.cod
            )?;
            expr(out, &lam.body)
        }
        TAbs(lam) => {
            write!(
                out,
                "tfun {}[{}^{} <: {}]^{}: {} => ",
                lam.self_name, lam.tvar, lam.qvar, lam.bound, lam.capture, lam.cod
            )?;
            expr(out, &lam.body)
        }
        App(f, a) => {
            at(out, f, 4)?;
            out.push('(');
            expr(out, a)?;
            out.push(')');
            Ok(())
        }
        TApp(f, arg) => {
            at(out, f, 4)?;
            write!(out, "[{arg}]")
        }
        RefNew { init, elem } => {
            out.push_str("new Ref");
            elem_suffix(out, elem)?;
            out.push('(');
            expr(out, init)?;
            out.push(')');
            Ok(())
        }
        RefAt { init, proxy, elem } => {
            out.push_str("new Ref");
            elem_suffix(out, elem)?;
            out.push('(');
            expr(out, init)?;
            out.push_str(") at ");
            at(out, proxy, 3)
        }
        Deref(r) => {
            out.push('!');
            at(out, r, 3)
        }
        Assign(target, value) => {
            at(out, target, 3)?;
            out.push_str(" := ");
            expr(out, value)
        }
        WithR { name, init, elem, body } => {
            write!(out, "with {name} = Ref")?;
            elem_suffix(out, elem)?;
            out.push('(');
            expr(out, init)?;
            out.push_str(") in ");
            expr(out, body)
        }
        WithC(l, body) => {
            write!(out, "with<{l}>{{ ")?;
            expr(out, body)?;
            out.push_str(" }");
            Ok(())
        }
        Prim(op, a, b) => {
            let (left, right) = match op {
                PrimOp::Add | PrimOp::Sub => (1, 2),
                PrimOp::Mul => (2, 3),
            };
            at(out, a, left)?;
            write!(out, " {} ", op.symbol())?;
            // Negative literals on the right would read as `- -n`; keep them
            // atomic but unambiguous.
            if let Const(crate::typecheck::Const::Int(n)) = b.kind {
                if n < 0 {
                    return write!(out, "({n})");
                }
            }
            at(out, b, right)
        }
        IfZero(c, yes, no) => {
            out.push_str("ifz ");
            expr(out, c)?;
            out.push_str(" then ");
            expr(out, yes)?;
            out.push_str(" else ");
            expr(out, no)
        }
    }
}

/// Prints `t` in core syntax.
pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    expr(&mut out, t).expect("writing to a String cannot fail");
    out
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Int(n) => write!(f, "{n}"),
            Const::Bool(b) => write!(f, "{b}"),
            Const::Unit => f.write_str("()"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qualifiers::Loc;

    #[test]
    fn runtime_forms() {
        assert_eq!(print_term(&Term::with_c(Loc(7), Term::unit())), "with<ℓ7>{ () }");
        assert_eq!(print_term(&Term::loc(Loc(3), 2)), "ℓ3·2");
    }

    #[test]
    fn parenthesizes_by_binding_strength() {
        let t = Term::deref(Term::app(Term::var("f"), Term::deref(Term::var("x"))));
        assert_eq!(print_term(&t), "!f(!x)");
        let t = Term::app(Term::deref(Term::var("f")), Term::unit());
        assert_eq!(print_term(&t), "(!f)(())");
        let t = Term::prim(
            PrimOp::Mul,
            Term::prim(PrimOp::Add, Term::int(1), Term::int(2)),
            Term::int(-3),
        );
        assert_eq!(print_term(&t), "(1 + 2) * (-3)");
        let t = Term::assign(Term::var("c"), Term::ref_at(Term::int(1), Term::var("a")));
        assert_eq!(print_term(&t), "c := new Ref(1) at a");
    }
}
