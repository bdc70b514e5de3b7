use std::fmt;

use super::ParseError;
use crate::typecheck::Span;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// `ℓN`
    LocLit(u32),
    Val,
    Def,
    Fun,
    TFun,
    New,
    RefKw,
    At,
    Scoped,
    With,
    In,
    Ifz,
    Then,
    Else,
    True,
    False,
    Forall,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Eq,
    Arrow,
    ColonEq,
    Bang,
    Caret,
    Star,
    Plus,
    Minus,
    SubOf,
    Lt,
    Gt,
    /// `·` between a location and an offset.
    Dot,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(x) => return write!(f, "identifier `{x}`"),
            Tok::Int(n) => return write!(f, "integer {n}"),
            Tok::LocLit(n) => return write!(f, "location ℓ{n}"),
            Tok::Val => "`val`",
            Tok::Def => "`def`",
            Tok::Fun => "`fun`",
            Tok::TFun => "`tfun`",
            Tok::New => "`new`",
            Tok::RefKw => "`Ref`",
            Tok::At => "`at`",
            Tok::Scoped => "`scoped`",
            Tok::With => "`with`",
            Tok::In => "`in`",
            Tok::Ifz => "`ifz`",
            Tok::Then => "`then`",
            Tok::Else => "`else`",
            Tok::True => "`true`",
            Tok::False => "`false`",
            Tok::Forall => "`forall`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::Comma => "`,`",
            Tok::Semi => "`;`",
            Tok::Colon => "`:`",
            Tok::Eq => "`=`",
            Tok::Arrow => "`=>`",
            Tok::ColonEq => "`:=`",
            Tok::Bang => "`!`",
            Tok::Caret => "`^`",
            Tok::Star => "`*`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::SubOf => "`<:`",
            Tok::Lt => "`<`",
            Tok::Gt => "`>`",
            Tok::Dot => "`·`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "val" => Tok::Val,
        "def" => Tok::Def,
        "fun" => Tok::Fun,
        "tfun" => Tok::TFun,
        "new" => Tok::New,
        "Ref" => Tok::RefKw,
        "at" => Tok::At,
        "scoped" => Tok::Scoped,
        "with" => Tok::With,
        "in" => Tok::In,
        "ifz" => Tok::Ifz,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "true" => Tok::True,
        "false" => Tok::False,
        "forall" => Tok::Forall,
        _ => return None,
    })
}

/// Splits source text into tokens. `$` is accepted inside identifiers only
/// when `allow_generated` is set, so user programs can never spell a name
/// produced by renaming.
pub fn lex(src: &str, allow_generated: bool) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let (tok, len) = if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let n = text.parse::<i64>().map_err(|_| {
                ParseError::new(Span::new(line, col, line, col + (j - i) as u32), "integer literal out of range", vec![])
            })?;
            (Tok::Int(n), j - i)
        } else if c == 'ℓ' {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j == i + 1 {
                return Err(ParseError::new(
                    Span::new(line, col, line, col + 1),
                    "`ℓ` must be followed by a location number",
                    vec![],
                ));
            }
            let text: String = chars[i + 1..j].iter().collect();
            let n = text.parse::<u32>().map_err(|_| {
                ParseError::new(Span::new(line, col, line, col), "location number out of range", vec![])
            })?;
            (Tok::LocLit(n), j - i)
        } else if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_alphanumeric() || chars[j] == '_' || (allow_generated && chars[j] == '$'))
            {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            (keyword(&text).unwrap_or(Tok::Ident(text)), j - i)
        } else {
            match two.as_str() {
                "=>" => (Tok::Arrow, 2),
                ":=" => (Tok::ColonEq, 2),
                "<:" => (Tok::SubOf, 2),
                _ => {
                    let t = match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        ',' => Tok::Comma,
                        ';' => Tok::Semi,
                        ':' => Tok::Colon,
                        '=' => Tok::Eq,
                        '!' => Tok::Bang,
                        '^' => Tok::Caret,
                        '*' | '◇' => Tok::Star,
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '<' => Tok::Lt,
                        '>' => Tok::Gt,
                        '·' => Tok::Dot,
                        other => {
                            return Err(ParseError::new(
                                Span::new(line, col, line, col + 1),
                                format!("unexpected character `{other}`"),
                                vec![],
                            ))
                        }
                    };
                    (t, 1)
                }
            }
        };
        advance(len, &mut i, &mut col);
        out.push(Token { tok, span: Span::new(start.0, start.1, line, col) });
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col, line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s, false).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn operators_and_keywords() {
        assert_eq!(
            toks("val a = new Ref(1) at b; a := !a // comment\n"),
            vec![
                Tok::Val,
                Tok::Ident("a".into()),
                Tok::Eq,
                Tok::New,
                Tok::RefKw,
                Tok::LParen,
                Tok::Int(1),
                Tok::RParen,
                Tok::At,
                Tok::Ident("b".into()),
                Tok::Semi,
                Tok::Ident("a".into()),
                Tok::ColonEq,
                Tok::Bang,
                Tok::Ident("a".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn generated_names_only_in_core_mode() {
        assert!(lex("x$1", false).is_err());
        assert_eq!(lex("x$1", true).unwrap()[0].tok, Tok::Ident("x$1".into()));
    }

    #[test]
    fn runtime_forms_and_spans() {
        let t = lex("with<ℓ7>{ ℓ3·2 }", true).unwrap();
        let kinds: Vec<_> = t.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::With,
                Tok::Lt,
                Tok::LocLit(7),
                Tok::Gt,
                Tok::LBrace,
                Tok::LocLit(3),
                Tok::Dot,
                Tok::Int(2),
                Tok::RBrace,
                Tok::Eof
            ]
        );
        let t = lex("a\n  b", false).unwrap();
        assert_eq!((t[1].span.line, t[1].span.col), (2, 3));
    }
}
