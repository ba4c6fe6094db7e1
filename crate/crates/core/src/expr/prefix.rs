//! Polish-notation serialization.
//!
//! Fixed arities make the encoding prefix-free: an operator token is
//! followed by exactly its operand encodings. Integers are emitted as a
//! sign marker (`INT+` / `INT-`) followed by one token per decimal digit,
//! which is the raw form the integer-abstraction step consumes.

use super::{Expr, Function, MAX_INT_MAGNITUDE};
use thiserror::Error;

/// Why a prefix parse failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseReason {
    UnknownToken(String),
    /// An operator ran out of operands.
    MissingOperand,
    /// A sign marker was not followed by a digit token.
    MissingDigits,
    /// Integer magnitude above 2^31.
    IntegerOverflow,
    /// Input continued past a complete expression.
    TrailingTokens,
}

impl std::fmt::Display for ParseReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseReason::UnknownToken(t) => write!(f, "unknown token `{t}`"),
            ParseReason::MissingOperand => f.write_str("missing operand"),
            ParseReason::MissingDigits => f.write_str("sign marker without digits"),
            ParseReason::IntegerOverflow => f.write_str("integer magnitude exceeds 2^31"),
            ParseReason::TrailingTokens => f.write_str("trailing tokens after expression"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at position {position}: {reason}")]
pub struct ParseError {
    /// Token index at which the problem was detected.
    pub position: usize,
    pub reason: ParseReason,
}

/// Serialize to raw prefix tokens.
pub fn to_prefix(e: &Expr) -> Vec<String> {
    let mut out = Vec::with_capacity(e.size());
    emit(e, &mut out);
    out
}

fn emit(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Integer(v) => {
            out.push(if *v < 0 { "INT-" } else { "INT+" }.to_string());
            for d in v.unsigned_abs().to_string().chars() {
                out.push(d.to_string());
            }
        }
        Expr::Var => out.push("x".to_string()),
        Expr::Neg(c) => {
            out.push("neg".to_string());
            emit(c, out);
        }
        Expr::Add(l, r) => {
            out.push("add".to_string());
            emit(l, out);
            emit(r, out);
        }
        Expr::Mul(l, r) => {
            out.push("mul".to_string());
            emit(l, out);
            emit(r, out);
        }
        Expr::Pow(l, r) => {
            out.push("pow".to_string());
            emit(l, out);
            emit(r, out);
        }
        Expr::Div(l, r) => {
            out.push("div".to_string());
            emit(l, out);
            emit(r, out);
        }
        Expr::Func(f, c) => {
            out.push(f.name().to_string());
            emit(c, out);
        }
    }
}

/// Parse raw prefix tokens back into an expression.
///
/// Inverse of [`to_prefix`] on every tree: exact arity consumption in a
/// single pass, with errors reporting the offending token index.
pub fn parse_prefix<S: AsRef<str>>(tokens: &[S]) -> Result<Expr, ParseError> {
    let mut pos = 0usize;
    let expr = parse_at(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ParseError {
            position: pos,
            reason: ParseReason::TrailingTokens,
        });
    }
    Ok(expr)
}

fn parse_at<S: AsRef<str>>(tokens: &[S], pos: &mut usize) -> Result<Expr, ParseError> {
    let here = *pos;
    let tok = tokens
        .get(here)
        .ok_or(ParseError {
            position: here,
            reason: ParseReason::MissingOperand,
        })?
        .as_ref();
    *pos += 1;
    match tok {
        "x" => Ok(Expr::Var),
        "INT+" | "INT-" => {
            let negative = tok == "INT-";
            let mut value: i64 = 0;
            let mut digits = 0usize;
            while let Some(d) = tokens.get(*pos).and_then(|t| digit(t.as_ref())) {
                value = value * 10 + d;
                digits += 1;
                if value > MAX_INT_MAGNITUDE {
                    return Err(ParseError {
                        position: *pos,
                        reason: ParseReason::IntegerOverflow,
                    });
                }
                *pos += 1;
            }
            if digits == 0 {
                return Err(ParseError {
                    position: *pos,
                    reason: ParseReason::MissingDigits,
                });
            }
            Ok(Expr::Integer(if negative { -value } else { value }))
        }
        "neg" => Ok(Expr::neg(parse_at(tokens, pos)?)),
        "add" => {
            let l = parse_at(tokens, pos)?;
            Ok(Expr::add(l, parse_at(tokens, pos)?))
        }
        "mul" => {
            let l = parse_at(tokens, pos)?;
            Ok(Expr::mul(l, parse_at(tokens, pos)?))
        }
        "pow" => {
            let l = parse_at(tokens, pos)?;
            Ok(Expr::pow(l, parse_at(tokens, pos)?))
        }
        "div" => {
            let l = parse_at(tokens, pos)?;
            Ok(Expr::div(l, parse_at(tokens, pos)?))
        }
        _ => match Function::from_name(tok) {
            Some(f) => Ok(Expr::func(f, parse_at(tokens, pos)?)),
            None => Err(ParseError {
                position: here,
                reason: ParseReason::UnknownToken(tok.to_string()),
            }),
        },
    }
}

fn digit(tok: &str) -> Option<i64> {
    let mut chars = tok.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_digit() => Some((c as u8 - b'0') as i64),
        _ => None,
    }
}

/// One expression per line, tokens separated by single spaces.
pub fn prefix_line(e: &Expr) -> String {
    to_prefix(e).join(" ")
}

/// Parse a whitespace-separated token line.
pub fn parse_prefix_line(line: &str) -> Result<Expr, ParseError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    parse_prefix(&tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_tokens_carry_sign_and_digits() {
        assert_eq!(
            to_prefix(&Expr::add(Expr::var(), Expr::int(2))),
            vec!["add", "x", "INT+", "2"]
        );
        assert_eq!(
            to_prefix(&Expr::mul(
                Expr::int(-3),
                Expr::func(Function::Sin, Expr::var())
            )),
            vec!["mul", "INT-", "3", "sin", "x"]
        );
        assert_eq!(to_prefix(&Expr::int(-12)), vec!["INT-", "1", "2"]);
        assert_eq!(to_prefix(&Expr::int(0)), vec!["INT+", "0"]);
    }

    #[test]
    fn parse_inverts_serialize() {
        let e = Expr::add(Expr::var(), Expr::int(2));
        assert_eq!(parse_prefix(&to_prefix(&e)).unwrap(), e);
        // Neg(3) and -3 are distinct trees and both round-trip.
        let neg = Expr::neg(Expr::int(3));
        assert_eq!(to_prefix(&neg), vec!["neg", "INT+", "3"]);
        assert_eq!(parse_prefix(&to_prefix(&neg)).unwrap(), neg);
    }

    #[test]
    fn arity_underflow_is_reported_at_position() {
        let err = parse_prefix(&["sin"]).unwrap_err();
        assert_eq!(err.position, 1);
        assert_eq!(err.reason, ParseReason::MissingOperand);
    }

    #[test]
    fn trailing_tokens_rejected() {
        let err = parse_prefix(&["x", "x"]).unwrap_err();
        assert_eq!(err.position, 1);
        assert_eq!(err.reason, ParseReason::TrailingTokens);
    }

    #[test]
    fn unknown_token_rejected() {
        let err = parse_prefix(&["frob", "x"]).unwrap_err();
        assert_eq!(err.position, 0);
        assert!(matches!(err.reason, ParseReason::UnknownToken(_)));
    }

    #[test]
    fn oversized_integer_rejected() {
        let mut tokens = vec!["INT+".to_string()];
        tokens.extend("99999999999".chars().map(|c| c.to_string()));
        let err = parse_prefix(&tokens).unwrap_err();
        assert_eq!(err.reason, ParseReason::IntegerOverflow);
    }

    #[test]
    fn multi_digit_integers_stop_at_next_non_digit() {
        let e = parse_prefix(&["add", "INT+", "1", "2", "x"]).unwrap();
        assert_eq!(e, Expr::add(Expr::int(12), Expr::var()));
    }
}
