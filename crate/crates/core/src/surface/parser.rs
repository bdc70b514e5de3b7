//! Recursive-descent parser shared by the surface and core grammars.
//!
//! Binding strength, weakest first: binders (`fun`, lambdas, `with .. in`,
//! `ifz`), `:=`, `+ -`, `*`, prefix (`!`, `new .. at`), postfix application,
//! atoms. This mirrors the printer so printed terms re-parse unchanged.

use super::lexer::{lex, Tok, Token};
use super::syntax::{Expr, ExprKind, FunSig, Item, Param, Placement, Program, TParam};
use super::ParseError;
use crate::qualifiers::{Loc, Name, Qualifier};
use crate::subtyping::{QType, Type};
use crate::typecheck::{Const, PrimOp, Span};

/// Grammar switches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Core syntax: `with x = Ref(e) in e` and `$` in names.
    pub core: bool,
    /// Runtime forms `ℓN·o` and `with<ℓN>{ e }`. Never enabled for files.
    pub runtime: bool,
    /// Integer arithmetic and `ifz`.
    pub ext_int: bool,
}

/// Binder names used for function types written without them.
const ANON_SELF: &str = "_f";
const ANON_PARAM: &str = "_x";

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    opts: ParseOptions,
}

type PResult<T> = Result<T, ParseError>;

pub fn parse_program(src: &str, opts: ParseOptions) -> PResult<Program> {
    let mut p = Parser::new(src, opts)?;
    if p.peek() == &Tok::Eof {
        return Err(p.unexpected(&["an expression", "`val`", "`def`"]));
    }
    let items = p.items(&Tok::Eof)?;
    p.expect(Tok::Eof)?;
    Ok(Program { items })
}

/// Parses a single expression; used for core terms and runtime states.
pub fn parse_expr(src: &str, opts: ParseOptions) -> PResult<Expr> {
    let mut p = Parser::new(src, opts)?;
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

pub fn parse_qtype(src: &str, opts: ParseOptions) -> PResult<QType> {
    let mut p = Parser::new(src, opts)?;
    let t = p.qtype()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

impl Parser {
    fn new(src: &str, opts: ParseOptions) -> PResult<Self> {
        Ok(Parser { toks: lex(src, opts.core || opts.runtime)?, pos: 0, opts })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::new(
            self.span(),
            format!("unexpected {}", self.peek()),
            expected.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.unexpected(&[&t.to_string()]))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Name::new(&s))
            }
            _ => Err(self.unexpected(&["an identifier"])),
        }
    }

    fn require_ext_int(&self, what: &str) -> PResult<()> {
        if self.opts.ext_int {
            Ok(())
        } else {
            Err(ParseError::new(
                self.span(),
                format!("{what} requires the integer extension (--ext-int)"),
                vec![],
            ))
        }
    }

    // ---- qualifiers and types ----

    fn qualifier(&mut self) -> PResult<Qualifier> {
        self.expect(Tok::LBrace)?;
        let mut q = Qualifier::empty();
        if self.eat(&Tok::RBrace) {
            return Ok(q);
        }
        loop {
            match self.peek().clone() {
                Tok::Star => {
                    self.bump();
                    q.fresh = true;
                }
                Tok::Ident(s) => {
                    self.bump();
                    q.vars.insert(Name::new(&s));
                }
                Tok::LocLit(n) if self.opts.runtime => {
                    self.bump();
                    q.locs.insert(Loc(n));
                }
                _ => return Err(self.unexpected(&["a variable", "`*`"])),
            }
            if self.eat(&Tok::RBrace) {
                return Ok(q);
            }
            if !self.eat(&Tok::Comma) {
                return Err(self.unexpected(&["`,`", "`}`"]));
            }
        }
    }

    fn caret_qualifier(&mut self) -> PResult<Option<Qualifier>> {
        if self.peek() == &Tok::Caret && self.peek_at(1) == &Tok::LBrace {
            self.bump();
            Ok(Some(self.qualifier()?))
        } else {
            Ok(None)
        }
    }

    fn tparam(&mut self) -> PResult<TParam> {
        let tvar = self.ident()?;
        self.expect(Tok::Caret)?;
        let qvar = self.ident()?;
        self.expect(Tok::SubOf)?;
        let bound = self.qtype()?;
        Ok(TParam { tvar, qvar, bound })
    }

    /// A qualified type. Function and universal types written without a
    /// trailing qualifier are untracked; qualify them through parentheses.
    fn qtype(&mut self) -> PResult<QType> {
        match (self.peek().clone(), self.peek_at(1).clone(), self.peek_at(2).clone()) {
            (Tok::Forall, ..) => {
                self.bump();
                let self_name = match self.peek() {
                    Tok::Ident(_) => self.ident()?,
                    _ => Name::new(ANON_SELF),
                };
                self.expect(Tok::LBracket)?;
                let tp = self.tparam()?;
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Arrow)?;
                let cod = self.qtype()?;
                Ok(Type::all(self_name, tp.tvar, tp.qvar, tp.bound, cod).q(Qualifier::empty()))
            }
            (Tok::Ident(f), Tok::LParen, _) => {
                self.bump();
                self.fun_type(Name::new(&f))
            }
            (Tok::LParen, Tok::Ident(_), Tok::Colon) | (Tok::LParen, Tok::RParen, _) => {
                self.fun_type(Name::new(ANON_SELF))
            }
            _ => {
                let dom = self.qatom()?;
                if self.eat(&Tok::Arrow) {
                    let cod = self.qtype()?;
                    Ok(Type::fun(ANON_SELF, ANON_PARAM, dom, cod).q(Qualifier::empty()))
                } else {
                    Ok(dom)
                }
            }
        }
    }

    /// `(x: T) => U` or `() => U`, after an optional self name.
    fn fun_type(&mut self, self_name: Name) -> PResult<QType> {
        self.expect(Tok::LParen)?;
        let (param, dom) = if self.eat(&Tok::RParen) {
            (Name::new(ANON_PARAM), Type::Unit.q(Qualifier::empty()))
        } else {
            let x = self.ident()?;
            self.expect(Tok::Colon)?;
            let t = self.qtype()?;
            self.expect(Tok::RParen)?;
            (x, t)
        };
        self.expect(Tok::Arrow)?;
        let cod = self.qtype()?;
        Ok(Type::fun(self_name, param, dom, cod).q(Qualifier::empty()))
    }

    fn qatom(&mut self) -> PResult<QType> {
        let start = self.span();
        let base = match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.qtype()?;
                self.expect(Tok::RParen)?;
                inner
            }
            Tok::RefKw => {
                self.bump();
                self.expect(Tok::LBracket)?;
                let inner = self.qtype()?;
                self.expect(Tok::RBracket)?;
                Type::reference(inner).q(Qualifier::empty())
            }
            Tok::Ident(s) => {
                self.bump();
                let ty = match s.as_str() {
                    "Int" => Type::Int,
                    "Unit" => Type::Unit,
                    "Bool" => Type::Bool,
                    "Top" => Type::Top,
                    _ => Type::Var(Name::new(&s)),
                };
                ty.q(Qualifier::empty())
            }
            _ => return Err(self.unexpected(&["a type"])),
        };
        match self.caret_qualifier()? {
            None => Ok(base),
            Some(q) if base.qual.is_empty() => Ok(base.ty.q(q)),
            Some(_) => Err(ParseError::new(start.to(self.prev_span()), "type is qualified twice", vec![])),
        }
    }

    // ---- items ----

    fn items(&mut self, end: &Tok) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        while self.peek() != end {
            items.push(self.item()?);
            if !self.eat(&Tok::Semi) {
                break;
            }
        }
        if self.peek() != end {
            return Err(self.unexpected(&["`;`", &end.to_string()]));
        }
        Ok(items)
    }

    fn item(&mut self) -> PResult<Item> {
        let start = self.span();
        match self.peek() {
            Tok::Val => {
                self.bump();
                let mut names = vec![self.ident()?];
                while self.eat(&Tok::Comma) {
                    names.push(self.ident()?);
                }
                let ann = if self.eat(&Tok::Colon) { Some(self.qtype()?) } else { None };
                self.expect(Tok::Eq)?;
                let rhs = self.expr()?;
                Ok(Item::Val { names, ann, rhs, span: start.to(self.prev_span()) })
            }
            Tok::Def => {
                self.bump();
                let name = self.ident()?;
                let tparam = if self.eat(&Tok::LBracket) {
                    let tp = self.tparam()?;
                    self.expect(Tok::RBracket)?;
                    Some(tp)
                } else {
                    None
                };
                let param = if self.peek() == &Tok::LParen || tparam.is_none() {
                    Some(self.param_list()?)
                } else {
                    None
                };
                let capture = self.caret_qualifier()?;
                let cod = if self.eat(&Tok::Colon) { Some(self.qtype()?) } else { None };
                self.expect(Tok::Eq)?;
                let body = self.expr()?;
                let sig = FunSig { self_name: Some(name.clone()), tparam, param, capture, cod };
                Ok(Item::Def { name, sig: Box::new(sig), body, span: start.to(self.prev_span()) })
            }
            _ => Ok(Item::Expr(self.expr()?)),
        }
    }

    /// `(x: T)` or `()`; the unit form binds an unused parameter.
    fn param_list(&mut self) -> PResult<Param> {
        self.expect(Tok::LParen)?;
        if self.eat(&Tok::RParen) {
            return Ok(Param { name: Name::new(ANON_PARAM), ty: Type::Unit.q(Qualifier::empty()) });
        }
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let ty = self.qtype()?;
        self.expect(Tok::RParen)?;
        Ok(Param { name, ty })
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek() {
            Tok::Fun => {
                self.bump();
                let name = self.ident()?;
                let param = self.param_list()?;
                self.lambda_tail(start, Some(name), None, Some(param))
            }
            Tok::TFun => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::LBracket)?;
                let tp = self.tparam()?;
                self.expect(Tok::RBracket)?;
                self.lambda_tail(start, Some(name), Some(tp), None)
            }
            Tok::With if self.peek_at(1) != &Tok::Lt => {
                if !self.opts.core {
                    return Err(ParseError::new(start, "`with .. in` is core syntax (--core)", vec![]));
                }
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Eq)?;
                self.expect(Tok::RefKw)?;
                let elem = self.elem_annotation()?;
                self.expect(Tok::LParen)?;
                let init = self.expr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::In)?;
                let body = self.expr()?;
                let span = start.to(body.span);
                Ok(Expr::new(
                    ExprKind::With { name, elem, init: Box::new(init), body: Box::new(body) },
                    span,
                ))
            }
            Tok::Ifz => {
                self.require_ext_int("`ifz`")?;
                self.bump();
                let c = self.expr()?;
                self.expect(Tok::Then)?;
                let a = self.expr()?;
                self.expect(Tok::Else)?;
                let b = self.expr()?;
                let span = start.to(b.span);
                Ok(Expr::new(ExprKind::IfZero(Box::new(c), Box::new(a), Box::new(b)), span))
            }
            _ => self.assign(),
        }
    }

    /// `^{cap}? (: T)? => body` after a lambda header.
    fn lambda_tail(
        &mut self,
        start: Span,
        self_name: Option<Name>,
        tparam: Option<TParam>,
        param: Option<Param>,
    ) -> PResult<Expr> {
        let capture = self.caret_qualifier()?;
        // Before `=>` a result type must be atomic; function types are
        // parenthesized.
        let cod = if self.eat(&Tok::Colon) { Some(self.qatom()?) } else { None };
        self.expect(Tok::Arrow)?;
        let body = self.expr()?;
        let span = start.to(body.span);
        let sig = FunSig { self_name, tparam, param, capture, cod };
        Ok(Expr::new(ExprKind::Lambda(Box::new(sig), Box::new(body)), span))
    }

    fn elem_annotation(&mut self) -> PResult<Option<QType>> {
        if self.eat(&Tok::LBracket) {
            let t = self.qtype()?;
            self.expect(Tok::RBracket)?;
            Ok(Some(t))
        } else {
            Ok(None)
        }
    }

    fn assign(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        if self.eat(&Tok::ColonEq) {
            let rhs = self.expr()?;
            let span = lhs.span.to(rhs.span);
            return Ok(Expr::new(ExprKind::Assign(Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => PrimOp::Add,
                Tok::Minus => PrimOp::Sub,
                _ => return Ok(lhs),
            };
            self.require_ext_int("arithmetic")?;
            self.bump();
            let rhs = self.multiplicative()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprKind::Prim(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.prefix()?;
        while self.peek() == &Tok::Star {
            self.require_ext_int("arithmetic")?;
            self.bump();
            let rhs = self.prefix()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprKind::Prim(PrimOp::Mul, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> PResult<Expr> {
        let start = self.span();
        match self.peek() {
            Tok::Bang => {
                self.bump();
                let inner = self.prefix()?;
                let span = start.to(inner.span);
                Ok(Expr::new(ExprKind::Deref(Box::new(inner)), span))
            }
            Tok::New => {
                self.bump();
                self.expect(Tok::RefKw)?;
                let elem = self.elem_annotation()?;
                self.expect(Tok::LParen)?;
                let init = if self.peek() == &Tok::RParen {
                    Expr::new(ExprKind::Lit(Const::Unit), self.span())
                } else {
                    self.expr()?
                };
                self.expect(Tok::RParen)?;
                let placement = if self.eat(&Tok::At) {
                    Placement::At(Box::new(self.prefix()?))
                } else if !self.opts.core && self.eat(&Tok::Scoped) {
                    Placement::Scoped
                } else {
                    Placement::Fresh
                };
                let e = Expr::new(
                    ExprKind::NewRef { init: Box::new(init), elem, placement },
                    start.to(self.prev_span()),
                );
                // An unplaced allocation is atomic and may take postfix operators.
                if matches!(&e.kind, ExprKind::NewRef { placement: Placement::Fresh, .. }) {
                    self.postfix_ops(e)
                } else {
                    Ok(e)
                }
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let e = self.atom()?;
        self.postfix_ops(e)
    }

    fn postfix_ops(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let arg = if self.peek() == &Tok::RParen {
                        Expr::new(ExprKind::Lit(Const::Unit), self.span())
                    } else {
                        self.expr()?
                    };
                    self.expect(Tok::RParen)?;
                    let span = e.span.to(self.prev_span());
                    e = Expr::new(ExprKind::Apply(Box::new(e), Box::new(arg)), span);
                }
                Tok::LBracket => {
                    self.bump();
                    let t = self.qtype()?;
                    self.expect(Tok::RBracket)?;
                    let span = e.span.to(self.prev_span());
                    e = Expr::new(ExprKind::TypeApply(Box::new(e), t), span);
                }
                _ => return Ok(e),
            }
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        let start = self.span();
        let lit = |k| Ok(Expr::new(ExprKind::Lit(k), start));
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                lit(Const::Int(n))
            }
            Tok::Minus if matches!(self.peek_at(1), Tok::Int(_)) => {
                self.bump();
                let Tok::Int(n) = self.bump() else { unreachable!() };
                Ok(Expr::new(ExprKind::Lit(Const::Int(-n)), start.to(self.prev_span())))
            }
            Tok::True => {
                self.bump();
                lit(Const::Bool(true))
            }
            Tok::False => {
                self.bump();
                lit(Const::Bool(false))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(Expr::new(ExprKind::Var(Name::new(&s)), start))
            }
            Tok::LocLit(n) if self.opts.runtime => {
                self.bump();
                self.expect(Tok::Dot)?;
                let Tok::Int(o) = self.bump() else {
                    return Err(ParseError::new(self.prev_span(), "expected an offset", vec!["an integer".into()]));
                };
                let o = u32::try_from(o).map_err(|_| ParseError::new(self.prev_span(), "offset out of range", vec![]))?;
                Ok(Expr::new(ExprKind::Loc(Loc(n), o), start.to(self.prev_span())))
            }
            Tok::With if self.opts.runtime => {
                self.bump();
                self.expect(Tok::Lt)?;
                let Tok::LocLit(n) = self.bump() else {
                    return Err(ParseError::new(self.prev_span(), "expected a location", vec!["`ℓN`".into()]));
                };
                self.expect(Tok::Gt)?;
                self.expect(Tok::LBrace)?;
                let body = self.expr()?;
                self.expect(Tok::RBrace)?;
                Ok(Expr::new(ExprKind::WithC(Loc(n), Box::new(body)), start.to(self.prev_span())))
            }
            Tok::LBrace => {
                self.bump();
                let items = self.items(&Tok::RBrace)?;
                self.expect(Tok::RBrace)?;
                Ok(Expr::new(ExprKind::Block(items), start.to(self.prev_span())))
            }
            Tok::LBracket => {
                self.bump();
                let tp = self.tparam()?;
                self.expect(Tok::RBracket)?;
                self.lambda_tail(start, None, Some(tp), None)
            }
            Tok::LParen => self.paren(),
            _ => Err(self.unexpected(&["an expression"])),
        }
    }

    /// `(e)`, `(e: T)`, `()`, or a lambda header `(x: T)` / `()` followed by
    /// `^{..}`, `:` or `=>`.
    fn paren(&mut self) -> PResult<Expr> {
        let start = self.span();
        self.expect(Tok::LParen)?;
        let lambda_follows = |p: &Parser| {
            matches!(p.peek(), Tok::Arrow | Tok::Colon)
                || (p.peek() == &Tok::Caret && p.peek_at(1) == &Tok::LBrace)
        };
        if self.eat(&Tok::RParen) {
            if lambda_follows(self) {
                let param = Param { name: Name::new(ANON_PARAM), ty: Type::Unit.q(Qualifier::empty()) };
                return self.lambda_tail(start, None, None, Some(param));
            }
            return Ok(Expr::new(ExprKind::Lit(Const::Unit), start.to(self.prev_span())));
        }
        if let (Tok::Ident(x), Tok::Colon) = (self.peek().clone(), self.peek_at(1).clone()) {
            let var_span = self.span();
            self.bump();
            self.bump();
            let ty = self.qtype()?;
            self.expect(Tok::RParen)?;
            if lambda_follows(self) {
                let param = Param { name: Name::new(&x), ty };
                return self.lambda_tail(start, None, None, Some(param));
            }
            let v = Expr::new(ExprKind::Var(Name::new(&x)), var_span);
            return Ok(Expr::new(ExprKind::Annot(Box::new(v), ty), start.to(self.prev_span())));
        }
        let inner = self.expr()?;
        if self.eat(&Tok::Colon) {
            let ty = self.qtype()?;
            self.expect(Tok::RParen)?;
            return Ok(Expr::new(ExprKind::Annot(Box::new(inner), ty), start.to(self.prev_span())));
        }
        self.expect(Tok::RParen)?;
        Ok(Expr { span: start.to(self.prev_span()), ..inner })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surface(s: &str) -> PResult<Program> {
        parse_program(s, ParseOptions::default())
    }

    #[test]
    fn val_binding() {
        let p = surface("val fr = new Ref(42); fr").unwrap();
        assert_eq!(p.items.len(), 2);
        assert!(matches!(&p.items[0], Item::Val { names, .. } if names[0].as_str() == "fr"));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(surface("").is_err());
        assert!(surface("  // nothing\n").is_err());
    }

    #[test]
    fn missing_proxy_reports_end_of_input() {
        let e = surface("new Ref(7) at").unwrap_err();
        assert!(e.message.contains("end of input"), "{e}");
        assert_eq!(e.span.col, 14);
    }

    #[test]
    fn lambdas_and_ascriptions() {
        let e = parse_expr("(x: Int) => x", ParseOptions::default()).unwrap();
        assert!(matches!(e.kind, ExprKind::Lambda(..)));
        let e = parse_expr("(x: Int)", ParseOptions::default()).unwrap();
        assert!(matches!(e.kind, ExprKind::Annot(..)));
        let e = parse_expr("() => 1", ParseOptions::default()).unwrap();
        assert!(matches!(e.kind, ExprKind::Lambda(..)));
        let e = parse_expr("()", ParseOptions::default()).unwrap();
        assert!(matches!(e.kind, ExprKind::Lit(Const::Unit)));
        let e = parse_expr("(x: Ref[Int]^{*})^{a}: Int => !x", ParseOptions::default()).unwrap();
        let ExprKind::Lambda(sig, _) = e.kind else { panic!() };
        assert_eq!(sig.capture.unwrap().to_string(), "{a}");
    }

    #[test]
    fn types_round_trip_through_display() {
        for src in [
            "Int^{}",
            "Ref[Int^{}]^{a, *}",
            "(f(x: Ref[Int^{}]^{*}) => Int^{x})^{a}",
            "(forall g[X^x <: Top^{*}] => X^{x})^{}",
            "Ref[(f(x: Int^{}) => Unit^{})^{c}]^{}",
        ] {
            let t = parse_qtype(src, ParseOptions::default()).unwrap();
            let again = parse_qtype(&t.to_string(), ParseOptions::default()).unwrap();
            assert!(t.alpha_eq(&again), "{src} vs {t}");
        }
        let short = parse_qtype("(Int => Unit)^{a}", ParseOptions::default()).unwrap();
        assert!(matches!(short.ty, Type::Fun(_)));
        assert!(parse_qtype("(Int^{a})^{b}", ParseOptions::default()).is_err());
    }

    #[test]
    fn arithmetic_is_gated() {
        assert!(parse_expr("1 + 2", ParseOptions::default()).is_err());
        let opts = ParseOptions { ext_int: true, ..Default::default() };
        let e = parse_expr("1 + 2 * 3", opts).unwrap();
        let ExprKind::Prim(PrimOp::Add, _, rhs) = e.kind else { panic!() };
        assert!(matches!(rhs.kind, ExprKind::Prim(PrimOp::Mul, ..)));
    }

    #[test]
    fn core_and_runtime_forms_are_gated() {
        assert!(parse_expr("with x = Ref(1) in !x", ParseOptions::default()).is_err());
        let core = ParseOptions { core: true, ..Default::default() };
        assert!(parse_expr("with x = Ref(1) in !x", core).is_ok());
        assert!(parse_expr("ℓ3·2", core).is_err());
        let rt = ParseOptions { core: true, runtime: true, ..Default::default() };
        assert!(matches!(parse_expr("with<ℓ7>{ ℓ3·2 }", rt).unwrap().kind, ExprKind::WithC(..)));
    }

    #[test]
    fn prefix_and_postfix_binding() {
        let e = parse_expr("!f(!x)", ParseOptions::default()).unwrap();
        let ExprKind::Deref(inner) = e.kind else { panic!() };
        assert!(matches!(inner.kind, ExprKind::Apply(..)));
        let e = parse_expr("c := new Ref(1) at a", ParseOptions::default()).unwrap();
        assert!(matches!(e.kind, ExprKind::Assign(..)));
    }
}
