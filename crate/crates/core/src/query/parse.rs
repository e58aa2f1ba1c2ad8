//! Hand-rolled parser and printer for the query DSL.
//!
//! ```text
//! query     := disjunct ( "|" disjunct )* ;
//! disjunct  := [ "EXISTS" var ("," var)* "." ] atom ( "&" atom )* ;
//! atom      := [ "!" ] "(" term "," ident "," term "," number "," number ")" ;
//! term      := ident | "y" | "x" digits ;
//! ```
//!
//! Identifiers are `[A-Za-z_][A-Za-z0-9_]*`; entities with other names are
//! reachable through the JSON form only. Numbers are non-negative decimal
//! literals.

use super::{QueryError, RawAtom, RawConjunct, RawQuery};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Amp,
    Pipe,
    Bang,
    Dot,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next_token(&mut self) -> Result<Option<(usize, Token)>, QueryError> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let b = self.src[self.pos];
        let tok = match b {
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b',' => {
                self.pos += 1;
                Token::Comma
            }
            b'&' => {
                self.pos += 1;
                Token::Amp
            }
            b'|' => {
                self.pos += 1;
                Token::Pipe
            }
            b'!' => {
                self.pos += 1;
                Token::Bang
            }
            b'.' if self
                .src
                .get(self.pos + 1)
                .is_none_or(|c| !c.is_ascii_digit()) =>
            {
                self.pos += 1;
                Token::Dot
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Token::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            b if b.is_ascii_digit() || b == b'.' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit()
                        || self.src[self.pos] == b'.'
                        || self.src[self.pos] == b'e'
                        || self.src[self.pos] == b'E'
                        || ((self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
                            && matches!(self.src[self.pos - 1], b'e' | b'E')))
                {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let value: f64 = text.parse().map_err(|_| QueryError::Syntax {
                    pos: start,
                    message: format!("bad number `{text}`"),
                })?;
                Token::Number(value)
            }
            other => {
                return Err(QueryError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok(Some((start, tok)))
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(_, t)| t.clone());
        self.cursor += 1;
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), QueryError> {
        let pos = self.pos();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(QueryError::Syntax {
                pos,
                message: format!("expected {what}"),
            }),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        let pos = self.pos();
        match self.bump() {
            Some(Token::Ident(s)) => Ok(s),
            _ => Err(QueryError::Syntax {
                pos,
                message: format!("expected {what}"),
            }),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, QueryError> {
        let pos = self.pos();
        match self.bump() {
            Some(Token::Number(v)) => Ok(v),
            _ => Err(QueryError::Syntax {
                pos,
                message: format!("expected {what}"),
            }),
        }
    }

    fn atom(&mut self) -> Result<RawAtom, QueryError> {
        let neg = if self.peek() == Some(&Token::Bang) {
            self.bump();
            true
        } else {
            false
        };
        self.expect(Token::LParen, "`(`")?;
        let h = self.ident("head term")?;
        self.expect(Token::Comma, "`,`")?;
        let r = self.ident("relation name")?;
        self.expect(Token::Comma, "`,`")?;
        let t = self.ident("tail term")?;
        self.expect(Token::Comma, "`,`")?;
        let alpha = self.number("necessity value")?;
        self.expect(Token::Comma, "`,`")?;
        let beta = self.number("importance value")?;
        self.expect(Token::RParen, "`)`")?;
        Ok(RawAtom {
            h,
            r,
            t,
            alpha,
            beta,
            neg,
        })
    }

    fn disjunct(&mut self) -> Result<RawConjunct, QueryError> {
        let mut existentials = Vec::new();
        if self.peek() == Some(&Token::Ident("EXISTS".into())) {
            self.bump();
            existentials.push(self.ident("variable name")?);
            while self.peek() == Some(&Token::Comma) {
                self.bump();
                existentials.push(self.ident("variable name")?);
            }
            self.expect(Token::Dot, "`.` after EXISTS variables")?;
        }
        let mut atoms = vec![self.atom()?];
        while self.peek() == Some(&Token::Amp) {
            self.bump();
            atoms.push(self.atom()?);
        }
        Ok(RawConjunct {
            existentials,
            atoms,
        })
    }

    fn query(&mut self) -> Result<RawQuery, QueryError> {
        let mut disjuncts = vec![self.disjunct()?];
        while self.peek() == Some(&Token::Pipe) {
            self.bump();
            disjuncts.push(self.disjunct()?);
        }
        if self.cursor != self.tokens.len() {
            return Err(QueryError::Syntax {
                pos: self.pos(),
                message: "trailing input after query".into(),
            });
        }
        Ok(RawQuery { disjuncts })
    }
}

pub(super) fn parse(text: &str) -> Result<RawQuery, QueryError> {
    let mut lexer = Lexer::new(text);
    let mut tokens = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        tokens.push(tok);
    }
    Parser {
        tokens,
        cursor: 0,
        end: text.len(),
    }
    .query()
}

pub(super) fn print(query: &RawQuery) -> String {
    let mut out = String::new();
    for (i, disjunct) in query.disjuncts.iter().enumerate() {
        if i > 0 {
            out.push_str(" | ");
        }
        if !disjunct.existentials.is_empty() {
            out.push_str("EXISTS ");
            out.push_str(&disjunct.existentials.join(", "));
            out.push_str(" . ");
        }
        for (j, atom) in disjunct.atoms.iter().enumerate() {
            if j > 0 {
                out.push_str(" & ");
            }
            if atom.neg {
                out.push('!');
            }
            out.push_str(&format!(
                "({}, {}, {}, {}, {})",
                atom.h, atom.r, atom.t, atom.alpha, atom.beta
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::RawQuery;
    use proptest::prelude::*;

    #[test]
    fn syntax_error_carries_position() {
        let err = RawQuery::parse_text("(a, r, y, 0, 1) & (").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("byte 18") || text.contains("byte 19"), "{text}");
    }

    #[test]
    fn print_then_parse_is_identity() {
        let cases = [
            "(y, Has, Lead, 0.7, 3) & (y, Has, ML, 0.9, 1)",
            "!(y, Has, Lead, 0.7, 1) & (y, Has, Dev, 0.5, 3)",
            "EXISTS x1 . (c, r1, x1, 0, 1) & (x1, r2, y, 0, 1)",
            "(a, r, y, 0, 1) | EXISTS x2 . (b, r, x2, 0.25, 0.5) & (x2, r, y, 0, 2)",
        ];
        for case in cases {
            let raw = RawQuery::parse_text(case).unwrap();
            let printed = raw.to_text();
            assert_eq!(RawQuery::parse_text(&printed).unwrap(), raw);
        }
    }

    fn ident_strategy() -> impl Strategy<Value = String> {
        "[a-w][a-z0-9_]{0,6}"
    }

    prop_compose! {
        fn atom_strategy()(
            h_var in 0..3u8,
            t_var in 0..3u8,
            h in ident_strategy(),
            t in ident_strategy(),
            r in ident_strategy(),
            alpha in 0.0..=1.0f64,
            beta in 0.01..=4.0f64,
            neg in any::<bool>(),
        ) -> super::RawAtom {
            let name = |sel: u8, s: String| match sel {
                0 => "y".to_owned(),
                1 => "x1".to_owned(),
                _ => s,
            };
            super::RawAtom { h: name(h_var, h), r, t: name(t_var, t), alpha, beta, neg }
        }
    }

    proptest! {
        #[test]
        fn random_queries_round_trip(atoms in prop::collection::vec(atom_strategy(), 1..4)) {
            let mut atoms = atoms;
            // guarantee structural validity: free variable present,
            // existential declared when mentioned
            atoms[0].t = "y".into();
            let uses_x1 = atoms.iter().any(|a| a.h == "x1" || a.t == "x1");
            let raw = RawQuery {
                disjuncts: vec![super::RawConjunct {
                    existentials: if uses_x1 { vec!["x1".into()] } else { vec![] },
                    atoms,
                }],
            };
            raw.validate().unwrap();
            let printed = raw.to_text();
            prop_assert_eq!(RawQuery::parse_text(&printed).unwrap(), raw);
        }
    }
}
