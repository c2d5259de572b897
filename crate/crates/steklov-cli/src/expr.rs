//! Tiny expression grammar for trigonometric polynomials:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := number | func
//! func   := ('cos' | 'sin') '(' [integer '*'] 't' ')'
//! ```
//!
//! A term may contain at most one `cos`/`sin` factor; numbers multiply its
//! amplitude. Examples: `1 + 0.3*cos(1*t) + 0.1*sin(3*t)`, `2.5`, `cos(t)`.

use steklov::TrigPoly;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent suffix
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse::<f64>().map_err(|_| format!("bad number `{text}`"))?;
                tokens.push(Token::Number(value));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphabetic() {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, token: Token) -> Result<(), String> {
        match self.next() {
            Some(t) if t == token => Ok(()),
            other => Err(format!("expected {token:?}, found {other:?}")),
        }
    }

    /// `('cos' | 'sin') '(' [integer '*'] 't' ')'`
    fn parse_func(&mut self, name: &str) -> Result<(bool, usize), String> {
        let is_cos = match name {
            "cos" => true,
            "sin" => false,
            other => return Err(format!("unknown function `{other}`")),
        };
        self.expect(Token::LParen)?;
        let mut k = 1usize;
        match self.next() {
            Some(Token::Number(value)) => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(format!("frequency must be a nonnegative integer, got {value}"));
                }
                k = value as usize;
                self.expect(Token::Star)?;
                match self.next() {
                    Some(Token::Ident(t)) if t == "t" => {}
                    other => return Err(format!("expected `t`, found {other:?}")),
                }
            }
            Some(Token::Ident(t)) if t == "t" => {}
            other => return Err(format!("expected frequency or `t`, found {other:?}")),
        }
        self.expect(Token::RParen)?;
        Ok((is_cos, k))
    }

    /// One additive term: numbers and at most one trig factor.
    fn parse_term(&mut self) -> Result<TrigPoly, String> {
        let mut amplitude = 1.0f64;
        let mut trig: Option<(bool, usize)> = None;
        loop {
            match self.next() {
                Some(Token::Number(value)) => amplitude *= value,
                Some(Token::Ident(name)) => {
                    if trig.is_some() {
                        return Err("at most one cos/sin per term".to_string());
                    }
                    trig = Some(self.parse_func(&name)?);
                }
                other => return Err(format!("expected a number or function, found {other:?}")),
            }
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        Ok(match trig {
            None => TrigPoly::constant(amplitude),
            Some((true, k)) => TrigPoly::cosine(k, amplitude),
            Some((false, k)) => TrigPoly::sine(k, amplitude),
        })
    }

    fn parse_expr(&mut self) -> Result<TrigPoly, String> {
        let mut negate = false;
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            negate = true;
        }
        let first = self.parse_term()?;
        let mut acc = if negate { first.scale(-1.0) } else { first };
        while let Some(op) = self.peek().cloned() {
            match op {
                Token::Plus => {
                    self.pos += 1;
                    acc = acc.add(&self.parse_term()?);
                }
                Token::Minus => {
                    self.pos += 1;
                    acc = acc.sub(&self.parse_term()?);
                }
                other => return Err(format!("expected + or -, found {other:?}")),
            }
        }
        Ok(acc)
    }
}

/// Parses the expression grammar into a [`TrigPoly`].
pub fn parse_expr(src: &str) -> Result<TrigPoly, String> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err("empty expression".to_string());
    }
    let mut parser = Parser { tokens, pos: 0 };
    let poly = parser.parse_expr()?;
    if parser.pos != parser.tokens.len() {
        return Err("trailing input after expression".to_string());
    }
    Ok(poly)
}
