//! Parsing of trace expressions such as `tr(x1 x2 x3) - 2*tr(x1 x3' x2)`.
//!
//! Grammar: an optional sign, then terms `[<int>*]tr(<word>)` separated by
//! `+` or `-`, with words as in [`crate::words`]. Whitespace is free between
//! tokens. The result is reduced to canonical classes. The single token `0`
//! denotes the empty expression.

use num_bigint::BigInt;
use thiserror::Error;

use crate::field::Field;
use crate::relspace::TraceVector;
use crate::words::{canonical_class, Word, WordError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("in the word at byte {pos}: {source}")]
    Word { pos: usize, source: WordError },
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(format!("expected {token:?}")))
        }
    }

    fn integer(&mut self) -> Option<BigInt> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.text[start..self.pos].parse().expect("digits"))
    }
}

/// Parses `text` as a multilinear trace expression of degree `d`.
pub fn parse_trace_vector<F: Field>(field: &F, d: usize, text: &str) -> Result<TraceVector<F>, ParseError> {
    let mut cur = Cursor { text, pos: 0 };
    let mut out = TraceVector::zero(field.clone(), d);
    if text.trim() == "0" {
        return Ok(out);
    }
    let mut first = true;
    loop {
        cur.skip_ws();
        let mut negative = false;
        match cur.peek() {
            Some(b'+') if !first => cur.pos += 1,
            Some(b'-') => {
                negative = true;
                cur.pos += 1;
            }
            None if first => return Err(cur.error("empty expression")),
            _ if first => {}
            _ => return Err(cur.error("expected '+' or '-'")),
        }
        cur.skip_ws();
        let coefficient = match cur.integer() {
            Some(c) => {
                cur.expect("*")?;
                c
            }
            None => BigInt::from(1),
        };
        cur.expect("tr(")?;
        let start = cur.pos;
        let len = text[start..].find(')').ok_or_else(|| cur.error("unclosed 'tr('"))?;
        let word = Word::parse_at(&text[start..start + len], start)
            .map_err(|source| ParseError::Word { pos: start, source })?;
        if let Some(l) = word.letters().iter().find(|l| l.index as usize > d) {
            return Err(ParseError::Word { pos: start, source: WordError::IndexOutOfRange { index: l.index, d } });
        }
        let class = canonical_class(&word, d).map_err(|source| ParseError::Word { pos: start, source })?;
        cur.pos = start + len + 1;
        let mut c = field.from_bigint(&coefficient);
        if negative {
            c = field.neg(&c);
        }
        out.add_class(class, &c);
        first = false;
        cur.skip_ws();
        if cur.peek().is_none() {
            return Ok(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};

    #[test]
    fn single_term() {
        let q = Rationals;
        let f = parse_trace_vector(&q, 3, "tr(x1 x2 x3)").unwrap();
        assert_eq!(f, TraceVector::identity(q, 3));
    }

    #[test]
    fn rotation_cancels() {
        let q = Rationals;
        assert!(parse_trace_vector(&q, 2, "tr(x1 x2) - tr(x2 x1)").unwrap().is_zero());
    }

    #[test]
    fn coefficients_and_signs() {
        let q = Rationals;
        let f = parse_trace_vector(&q, 2, " -3*tr(x1 x2') + 1*tr(x2 x1')").unwrap();
        assert_eq!(f.to_string(), "-2*tr(x1 x2')");
        let f3 = PrimeField::new(3).unwrap();
        assert!(parse_trace_vector(&f3, 2, "3*tr(x1 x2)").unwrap().is_zero());
    }

    #[test]
    fn display_round_trip() {
        let q = Rationals;
        let f = parse_trace_vector(&q, 3, "2*tr(x1 x2 x3) - tr(x1 x3' x2)").unwrap();
        assert_eq!(parse_trace_vector(&q, 3, &f.to_string()).unwrap(), f);
    }

    #[test]
    fn errors() {
        let q = Rationals;
        assert_eq!(
            parse_trace_vector(&q, 2, "tr(x1 x9)"),
            Err(ParseError::Word { pos: 3, source: WordError::IndexOutOfRange { index: 9, d: 2 } })
        );
        assert!(matches!(
            parse_trace_vector(&q, 2, "tr(x1 x1)"),
            Err(ParseError::Word { source: WordError::NotMultilinear { d: 2 }, .. })
        ));
        assert!(matches!(parse_trace_vector(&q, 2, "tr(x1 x2"), Err(ParseError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_trace_vector(&q, 2, "tr(x1 x2) tr(x1 x2)"), Err(ParseError::Syntax { pos: 10, .. })));
        assert!(matches!(parse_trace_vector(&q, 2, "tr(x1 y2)"), Err(ParseError::Word { .. })));
        assert!(matches!(parse_trace_vector(&q, 2, ""), Err(ParseError::Syntax { pos: 0, .. })));
    }
}
