use thiserror::Error;

use super::{BinaryOp, ExpressionTree, Node, UnaryOp, FUNCTION_NAMES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("numeric literal `{literal}` at byte {offset} is not a finite number")]
    BadNumber { literal: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownFunction { offset, .. }
            | ParseError::BadNumber { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Sym(char),
    End,
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Number(n) => format!("number {n}"),
        Token::Ident(s) => format!("identifier `{s}`"),
        Token::Sym(c) => format!("`{c}`"),
        Token::End => "end of input".to_string(),
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Token, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&b) = bytes.get(start) else {
            return Ok((Token::End, start));
        };
        if b.is_ascii_digit() || (b == b'.' && bytes.get(start + 1).is_some_and(u8::is_ascii_digit)) {
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if end < bytes.len() && bytes[end] == b'.' {
                end += 1;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut e = end + 1;
                if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                    e += 1;
                }
                if e < bytes.len() && bytes[e].is_ascii_digit() {
                    while e < bytes.len() && bytes[e].is_ascii_digit() {
                        e += 1;
                    }
                    end = e;
                }
            }
            let literal = &self.src[start..end];
            self.pos = end;
            return match literal.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok((Token::Number(v), start)),
                _ => Err(ParseError::BadNumber {
                    literal: literal.to_string(),
                    offset: start,
                }),
            };
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut end = start + 1;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Token::Ident(self.src[start..end].to_string()), start));
        }
        let c = self.src[start..].chars().next().unwrap_or('\0');
        self.pos += c.len_utf8();
        Ok((Token::Sym(c), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Token,
    offset: usize,
    vars: Vec<String>,
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<(), ParseError> {
        let (tok, offset) = self.lexer.next()?;
        self.tok = tok;
        self.offset = offset;
        Ok(())
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset,
            expected: expected.to_string(),
            found: describe(&self.tok),
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.tok == Token::Sym(c) {
            self.advance()
        } else {
            Err(self.error(&format!("`{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Token::Sym('+') => BinaryOp::Add,
                Token::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.tok {
                Token::Sym('*') => BinaryOp::Mul,
                Token::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.factor()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if self.tok == Token::Sym('-') {
            self.advance()?;
            let inner = self.factor()?;
            return Ok(Node::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.tok == Token::Sym('^') {
            self.advance()?;
            let exponent = self.factor()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.tok.clone() {
            Token::Number(v) => {
                self.advance()?;
                Ok(Node::Const(v))
            }
            Token::Ident(name) => {
                let offset = self.offset;
                self.advance()?;
                if self.tok == Token::Sym('(') {
                    let op = UnaryOp::from_function_name(&name)
                        .ok_or(ParseError::UnknownFunction { name, offset })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect_sym(')')?;
                    Ok(Node::Unary(op, Box::new(arg)))
                } else if FUNCTION_NAMES.contains(&name.as_str()) {
                    Err(self.error(&format!("`(` after function name `{name}`")))
                } else {
                    let slot = match self.vars.iter().position(|v| *v == name) {
                        Some(i) => i,
                        None => {
                            self.vars.push(name);
                            self.vars.len() - 1
                        }
                    };
                    Ok(Node::Var(slot))
                }
            }
            Token::Sym('(') => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect_sym(')')?;
                Ok(inner)
            }
            _ => Err(self.error("number, identifier or `(`")),
        }
    }
}

/// Parses `source` into an expression tree.
///
/// Precedence from tightest: `^` (right-associative), unary minus, `*` `/`,
/// then `+` `-` (both left-associative). So `-x^2` is `-(x^2)`.
pub fn parse(source: &str) -> Result<ExpressionTree, ParseError> {
    let mut parser = Parser {
        lexer: Lexer { src: source, pos: 0 },
        tok: Token::End,
        offset: 0,
        vars: Vec::new(),
    };
    parser.advance()?;
    let root = parser.expr()?;
    if parser.tok != Token::End {
        return Err(parser.error("operator or end of input"));
    }
    Ok(ExpressionTree::from_parts(root, parser.vars))
}
