//! Recursive-descent parser for the expression grammar in
//! `docs/expr-grammar.md`. Produces the unique tree the grammar assigns;
//! the only rewrites performed here are the two the grammar itself calls
//! for: a unary minus applied to a constant folds into a negative constant,
//! and the subtree after `^` must fold to a finite constant.

use super::{Binding, Expression, Function};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: found {found}, expected {}", expected.join(", "))]
    Syntax {
        offset: usize,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("exponent at byte {offset} does not fold to a finite constant")]
    NonConstantExponent { offset: usize },
    #[error("invalid number literal at byte {offset}")]
    InvalidNumber { offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(n) => format!("number `{n}`"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn lex(input: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            b'-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            b'*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            b'/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            b'^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            b'(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // consume an exponent part only if digits actually follow,
                // so `2e` lexes as number `2` then identifier `e`
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &input[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| ParseError::InvalidNumber { offset: start })?;
                if !value.is_finite() {
                    return Err(ParseError::InvalidNumber { offset: start });
                }
                tokens.push((Token::Number(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(input[start..i].to_string()), start));
            }
            _ => {
                let ch = input[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: i,
                    found: format!("`{ch}`"),
                    expected: vec![
                        "number",
                        "identifier",
                        "`(`",
                        "`)`",
                        "`+`",
                        "`-`",
                        "`*`",
                        "`/`",
                        "`^`",
                    ],
                });
            }
        }
    }
    tokens.push((Token::End, input.len()));
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: Vec<&'static str>) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            found: self.peek().describe(),
            expected,
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.advance();
                    let rhs = self.term()?;
                    lhs = Expression::Add(Box::new(lhs), Box::new(rhs));
                }
                Token::Minus => {
                    self.advance();
                    let rhs = self.term()?;
                    lhs = Expression::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Token::Star => {
                    self.advance();
                    let rhs = self.factor()?;
                    lhs = Expression::Mul(Box::new(lhs), Box::new(rhs));
                }
                Token::Slash => {
                    self.advance();
                    let rhs = self.factor()?;
                    lhs = Expression::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if matches!(self.peek(), Token::Minus) {
            self.advance();
            let inner = self.factor()?;
            // fold `-` on a constant so `-1.5` is a single negative literal;
            // `-q1^2` does not reach this arm with a constant because the
            // inner factor is the whole power
            return Ok(match inner {
                Expression::Constant(c) => Expression::Constant(-c),
                other => Expression::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Token::Caret) {
            self.advance();
            let exp_offset = self.offset();
            let exponent = self.factor()?;
            let value = const_value(&exponent)
                .ok_or(ParseError::NonConstantExponent { offset: exp_offset })?;
            return Ok(Expression::Pow(Box::new(base), value));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Token::Number(value) => {
                self.advance();
                Ok(Expression::Constant(value))
            }
            Token::Ident(name) => {
                self.advance();
                if matches!(self.peek(), Token::LParen) {
                    let func = Function::from_name(&name)
                        .ok_or(ParseError::UnknownFunction { name, offset })?;
                    self.advance();
                    let arg = self.expr()?;
                    if !matches!(self.peek(), Token::RParen) {
                        return Err(self.error(vec!["`)`"]));
                    }
                    self.advance();
                    Ok(Expression::Call(func, Box::new(arg)))
                } else {
                    Ok(Expression::Variable(name))
                }
            }
            Token::LParen => {
                self.advance();
                let inner = self.expr()?;
                if !matches!(self.peek(), Token::RParen) {
                    return Err(self.error(vec!["`)`"]));
                }
                self.advance();
                Ok(inner)
            }
            _ => Err(self.error(vec!["number", "identifier", "`(`", "`-`"])),
        }
    }
}

/// Evaluates a closed subtree, if it is closed and in-domain.
fn const_value(e: &Expression) -> Option<f64> {
    let v = e.eval(&Binding::new()).ok()?;
    v.is_finite().then_some(v)
}

pub(super) fn parse(input: &str) -> Result<Expression, ParseError> {
    let tokens = lex(input)?;
    let mut parser = Parser { tokens, pos: 0 };
    let result = parser.expr()?;
    if !matches!(parser.peek(), Token::End) {
        return Err(parser.error(vec![
            "`+`",
            "`-`",
            "`*`",
            "`/`",
            "`^`",
            "end of input",
        ]));
    }
    Ok(result)
}
