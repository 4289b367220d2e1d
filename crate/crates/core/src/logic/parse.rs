//! Recursive-descent parser for the ASCII formula grammar.
//!
//! ```text
//! expr    := unary ( "(+)" unary )*
//! unary   := "~" unary | "half" unary | ("sup"|"inf") xN "." expr | primary
//! primary := "(" expr ")" | ("join"|"meet") "{" expr (";" expr)* "}"
//!          | "d" "(" term "," term ")" | P "(" terms ")"
//! term    := cN | xN | f "(" terms ")" | k
//! ```

use thiserror::Error;

use super::formula::{Formula, Term};
use super::signature::{Signature, METRIC};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    /// `offset` is a 1-based character column.
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at offset {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("symbol `{name}` expects {expected} arguments, found {found}")]
    Arity { name: String, expected: usize, found: usize },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    sig: &'a Signature,
}

pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, sig };
    let f = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(f)
}

pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, sig };
    let t = p.term()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(t)
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos + 1, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else if self.pos >= self.src.len() {
            Err(self.error(&format!("expected `{tok}`, found end of input")))
        } else {
            Err(self.error(&format!("expected `{tok}`")))
        }
    }

    /// Identifier at the cursor, without consuming it.
    fn peek_ident(&mut self) -> Option<&str> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        while end < self.src.len() && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_') {
            end += 1;
        }
        if end == start || !self.src[start].is_ascii_alphabetic() {
            return None;
        }
        std::str::from_utf8(&self.src[start..end]).ok()
    }

    fn ident(&mut self) -> Result<(String, usize), ParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.peek_ident().map(str::to_string) {
            Some(id) => {
                self.pos += id.len();
                Ok((id, start))
            }
            None if self.pos >= self.src.len() => Err(self.error("unexpected end of input")),
            None => Err(self.error("expected identifier")),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if self.peek_ident() == Some(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat("(+)") {
            let rhs = self.unary()?;
            lhs = lhs.dot_plus(rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.eat("~") {
            return Ok(self.unary()?.neg());
        }
        if self.keyword("half") {
            return Ok(self.unary()?.half());
        }
        for (kw, is_sup) in [("sup", true), ("inf", false)] {
            if self.keyword(kw) {
                let v = self.variable()?;
                self.expect(".")?;
                let body = self.expr()?;
                return Ok(if is_sup { Formula::sup(v, body) } else { Formula::inf(v, body) });
            }
        }
        self.primary()
    }

    fn variable(&mut self) -> Result<u32, ParseError> {
        let (id, at) = self.ident()?;
        index_of(&id, 'x').ok_or(ParseError::Syntax { offset: at + 1, message: format!("expected variable, found `{id}`") })
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            None => return Err(self.error("unexpected end of input")),
            Some(b'(') => {
                // `(+)` cannot start an operand.
                if self.src[self.pos..].starts_with(b"(+)") {
                    return Err(self.error("expected formula"));
                }
                self.pos += 1;
                let f = self.expr()?;
                self.expect(")")?;
                return Ok(f);
            }
            _ => {}
        }
        for (kw, is_join) in [("join", true), ("meet", false)] {
            if self.keyword(kw) {
                self.expect("{")?;
                let mut members = vec![self.expr()?];
                while self.eat(";") {
                    members.push(self.expr()?);
                }
                self.expect("}")?;
                return Ok(if is_join { Formula::Join(members) } else { Formula::Meet(members) });
            }
        }
        let (name, at) = self.ident()?;
        if name == METRIC {
            self.expect("(")?;
            let a = self.term()?;
            self.expect(",")?;
            let b = self.term()?;
            self.expect(")")?;
            return Ok(Formula::Dist(a, b));
        }
        let arity = match self.sig.predicate(&name) {
            Some(sym) => sym.arity,
            None => return Err(ParseError::UnknownSymbol { name, offset: at + 1 }),
        };
        let args = self.arguments(arity == 0)?;
        if args.len() != arity {
            return Err(ParseError::Arity { name, expected: arity, found: args.len() });
        }
        Ok(Formula::Atomic(name, args))
    }

    /// Parenthesised argument list; optional when `allow_bare`.
    fn arguments(&mut self, allow_bare: bool) -> Result<Vec<Term>, ParseError> {
        if self.peek() != Some(b'(') || self.src[self.pos..].starts_with(b"(+)") {
            if allow_bare {
                return Ok(vec![]);
            }
            return self.expect("(").map(|_| vec![]);
        }
        self.pos += 1;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        args.push(self.term()?);
        while self.eat(",") {
            args.push(self.term()?);
        }
        self.expect(")")?;
        Ok(args)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (name, at) = self.ident()?;
        if let Some(i) = index_of(&name, 'c') {
            return Ok(Term::Witness(i));
        }
        if let Some(i) = index_of(&name, 'x') {
            return Ok(Term::Var(i));
        }
        let arity = match self.sig.function(&name) {
            Some(sym) => sym.arity,
            None => return Err(ParseError::UnknownSymbol { name, offset: at + 1 }),
        };
        let args = self.arguments(arity == 0)?;
        if args.len() != arity {
            return Err(ParseError::Arity { name, expected: arity, found: args.len() });
        }
        Ok(Term::App(name, args))
    }
}

fn index_of(id: &str, prefix: char) -> Option<u32> {
    let rest = id.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::signature::Symbol;

    fn sig() -> Signature {
        let mut s = Signature::graphs();
        s.functions.push(Symbol::new("f", 1));
        s.functions.push(Symbol::new("k", 0));
        s
    }

    #[test]
    fn grammar_examples() {
        let s = sig();
        assert_eq!(
            parse_formula("~d(c0,c1)", &s).unwrap(),
            Formula::dist(Term::c(0), Term::c(1)).neg()
        );
        assert_eq!(
            parse_formula("sup x0 . half E(x0,c2)", &s).unwrap(),
            Formula::sup(0, Formula::atom("E", vec![Term::var(0), Term::c(2)]).half())
        );
        assert_eq!(
            parse_formula("d(c0", &s),
            Err(ParseError::Syntax { offset: 5, message: "expected `,`, found end of input".into() })
        );
    }

    #[test]
    fn dot_plus_is_left_associative_and_loose() {
        let s = sig();
        let f = parse_formula("~E(c0,c1) (+) d(c0,c0) (+) half d(c1,c1)", &s).unwrap();
        let e = Formula::atom("E", vec![Term::c(0), Term::c(1)]).neg();
        let a = Formula::dist(Term::c(0), Term::c(0));
        let b = Formula::dist(Term::c(1), Term::c(1)).half();
        assert_eq!(f, e.dot_plus(a).dot_plus(b));
    }

    #[test]
    fn terms_and_families() {
        let s = sig();
        let f = parse_formula("join{ d(f(c0), k); meet{E(c1,c1)} }", &s).unwrap();
        assert_eq!(
            f,
            Formula::Join(vec![
                Formula::dist(Term::App("f".into(), vec![Term::c(0)]), Term::App("k".into(), vec![])),
                Formula::Meet(vec![Formula::atom("E", vec![Term::c(1), Term::c(1)])]),
            ])
        );
    }

    #[test]
    fn symbol_errors() {
        let s = sig();
        assert!(matches!(parse_formula("Q(c0)", &s), Err(ParseError::UnknownSymbol { .. })));
        assert!(matches!(parse_formula("E(c0)", &s), Err(ParseError::Arity { expected: 2, found: 1, .. })));
        assert!(matches!(parse_formula("d(g(c0),c1)", &s), Err(ParseError::UnknownSymbol { .. })));
        assert!(matches!(parse_formula("sup c0 . d(c0,c0)", &s), Err(ParseError::Syntax { .. })));
    }
}
