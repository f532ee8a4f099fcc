//! Prefix (s-expression) text form of [`ScalarExpr`].
//!
//! ```text
//! expr  := number | name | "(" op expr* ")"
//! op    := "+" | "*" | "-" | "exp" | "affine" scale shift | "^"
//! ```
//!
//! `(^ e 2)` and `(^ e 3/2)` take a non-negative integer or rational literal as
//! the exponent. `(- a b)` and `(- a)` are accepted on input and stored as a
//! sum with a negated affine node; the printer never emits them.

use super::expr::{Exponent, ScalarExpr};
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(src: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut atom = String::new();
    let flush = |atom: &mut String, out: &mut Vec<Token>| {
        if !atom.is_empty() {
            out.push(Token::Atom(std::mem::take(atom)));
        }
    };
    for ch in src.chars() {
        match ch {
            '(' => {
                flush(&mut atom, &mut out);
                out.push(Token::Open);
            }
            ')' => {
                flush(&mut atom, &mut out);
                out.push(Token::Close);
            }
            c if c.is_whitespace() => flush(&mut atom, &mut out),
            c => atom.push(c),
        }
    }
    flush(&mut atom, &mut out);
    out
}

/// Returns true if `s` would be read back as a numeric literal.
pub fn is_numeric_literal(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

/// Parses `src`, resolving variable names through `lookup`.
pub fn parse_expr(src: &str, lookup: &dyn Fn(&str) -> Option<usize>) -> Result<ScalarExpr, ModelError> {
    let tokens = tokenize(src);
    let mut pos = 0;
    let expr = parse_at(&tokens, &mut pos, lookup)?;
    if pos != tokens.len() {
        return Err(ModelError::Parse(format!("trailing input after expression in `{src}`")));
    }
    Ok(expr)
}

fn parse_at(
    tokens: &[Token],
    pos: &mut usize,
    lookup: &dyn Fn(&str) -> Option<usize>,
) -> Result<ScalarExpr, ModelError> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| ModelError::Parse("unexpected end of input".into()))?;
    *pos += 1;
    match tok {
        Token::Close => Err(ModelError::Parse("unexpected `)`".into())),
        Token::Atom(a) => atom(a, lookup),
        Token::Open => {
            let op = match tokens.get(*pos) {
                Some(Token::Atom(a)) => a.clone(),
                _ => return Err(ModelError::Parse("expected operator after `(`".into())),
            };
            *pos += 1;
            let expr = match op.as_str() {
                "+" | "*" | "-" => {
                    let args = parse_args(tokens, pos, lookup)?;
                    match op.as_str() {
                        "+" => ScalarExpr::Sum(args),
                        "*" => ScalarExpr::Product(args),
                        _ => match args.len() {
                            1 => -args.into_iter().next().unwrap(),
                            2 => {
                                let mut it = args.into_iter();
                                let a = it.next().unwrap();
                                let b = it.next().unwrap();
                                ScalarExpr::Sum(vec![a, -b])
                            }
                            n => return Err(ModelError::Parse(format!("`-` takes 1 or 2 arguments, got {n}"))),
                        },
                    }
                }
                "exp" => {
                    let inner = parse_at(tokens, pos, lookup)?;
                    ScalarExpr::Exp(Box::new(inner))
                }
                "^" => {
                    let base = parse_at(tokens, pos, lookup)?;
                    let exp = match tokens.get(*pos) {
                        Some(Token::Atom(a)) => parse_exponent(a)?,
                        _ => return Err(ModelError::Parse("`^` needs a literal exponent".into())),
                    };
                    *pos += 1;
                    base.pow(exp)
                }
                "affine" => {
                    let scale = number(tokens.get(*pos))?;
                    *pos += 1;
                    let shift = number(tokens.get(*pos))?;
                    *pos += 1;
                    let inner = parse_at(tokens, pos, lookup)?;
                    inner.affine(scale, shift)
                }
                other => return Err(ModelError::Parse(format!("unknown operator `{other}`"))),
            };
            match tokens.get(*pos) {
                Some(Token::Close) => {
                    *pos += 1;
                    Ok(expr)
                }
                _ => Err(ModelError::Parse(format!("expected `)` to close `{op}`"))),
            }
        }
    }
}

fn parse_args(
    tokens: &[Token],
    pos: &mut usize,
    lookup: &dyn Fn(&str) -> Option<usize>,
) -> Result<Vec<ScalarExpr>, ModelError> {
    let mut args = Vec::new();
    while let Some(t) = tokens.get(*pos) {
        if *t == Token::Close {
            break;
        }
        args.push(parse_at(tokens, pos, lookup)?);
    }
    Ok(args)
}

fn number(tok: Option<&Token>) -> Result<f64, ModelError> {
    match tok {
        Some(Token::Atom(a)) => a
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ModelError::Parse(format!("expected a finite number, got `{a}`"))),
        _ => Err(ModelError::Parse("expected a number".into())),
    }
}

fn parse_exponent(s: &str) -> Result<Exponent, ModelError> {
    let bad = || ModelError::Parse(format!("exponent must be a non-negative rational, got `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: u32 = n.parse().map_err(|_| bad())?;
            let d: u32 = d.parse().map_err(|_| bad())?;
            Exponent::ratio(n, d).ok_or_else(bad)
        }
        None => s.parse::<u32>().map(Exponent::integer).map_err(|_| bad()),
    }
}

fn atom(a: &str, lookup: &dyn Fn(&str) -> Option<usize>) -> Result<ScalarExpr, ModelError> {
    if let Ok(v) = a.parse::<f64>() {
        if !v.is_finite() {
            return Err(ModelError::Parse(format!("non-finite literal `{a}`")));
        }
        return Ok(ScalarExpr::Const(v));
    }
    lookup(a)
        .map(ScalarExpr::Var)
        .ok_or_else(|| ModelError::UnknownVariable(a.to_string()))
}
