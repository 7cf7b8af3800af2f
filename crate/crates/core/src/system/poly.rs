//! Polynomial expression trees over state symbols `x1..xn` and noise
//! symbols `w1..wm`, with a small recursive-descent parser.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based state index.
    State(usize),
    /// Zero-based noise index.
    Noise(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn eval(&self, x: &[f64], w: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::State(i) => x[*i],
            Expr::Noise(i) => w[*i],
            Expr::Neg(e) => -e.eval(x, w),
            Expr::Add(a, b) => a.eval(x, w) + b.eval(x, w),
            Expr::Sub(a, b) => a.eval(x, w) - b.eval(x, w),
            Expr::Mul(a, b) => a.eval(x, w) * b.eval(x, w),
            Expr::Pow(e, k) => e.eval(x, w).powi(*k as i32),
        }
    }

    /// Largest state and noise index referenced, one-based (0 if none).
    pub fn max_indices(&self) -> (usize, usize) {
        match self {
            Expr::Const(_) => (0, 0),
            Expr::State(i) => (i + 1, 0),
            Expr::Noise(i) => (0, i + 1),
            Expr::Neg(e) | Expr::Pow(e, _) => e.max_indices(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                let (ax, aw) = a.max_indices();
                let (bx, bw) = b.max_indices();
                (ax.max(bx), aw.max(bw))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(char, usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' => {
                out.push((pos, Token::Plus));
                i += 1;
            }
            '-' | '\u{2212}' => {
                out.push((pos, Token::Minus));
                i += 1;
            }
            '*' => {
                out.push((pos, Token::Star));
                i += 1;
            }
            '^' => {
                out.push((pos, Token::Caret));
                i += 1;
            }
            '(' => {
                out.push((pos, Token::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Token::RParen));
                i += 1;
            }
            'x' | 'w' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                let digits: String = chars[start..j].iter().map(|(_, c)| *c).collect();
                let idx: usize = digits.parse().map_err(|_| Error::Parse {
                    offset: pos,
                    message: format!("variable '{c}' needs a 1-based index"),
                })?;
                if idx == 0 {
                    return Err(Error::Parse {
                        offset: pos,
                        message: "variable indices start at 1".into(),
                    });
                }
                out.push((pos, Token::Var(c, idx - 1)));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_ascii_digit() || chars[j].1 == '.') {
                    j += 1;
                }
                let text: String = chars[i..j].iter().map(|(_, c)| *c).collect();
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: pos,
                    message: format!("bad number literal '{text}'"),
                })?;
                out.push((pos, Token::Num(v)));
                i = j;
            }
            other => {
                return Err(Error::Parse {
                    offset: pos,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Star) = self.peek() {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Token::Num(v)) if v.fract() == 0.0 && (0.0..=64.0).contains(&v) => {
                    self.pos += 1;
                    return Ok(Expr::Pow(Box::new(base), v as u32));
                }
                _ => return self.err("exponent must be a non-negative integer literal <= 64"),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::Var('x', i)) => {
                self.pos += 1;
                Ok(Expr::State(i))
            }
            Some(Token::Var(_, i)) => {
                self.pos += 1;
                Ok(Expr::Noise(i))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Token::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.err("expected ')'"),
                }
            }
            Some(_) => self.err("expected a number, variable or '('"),
            None => self.err("unexpected end of expression"),
        }
    }
}

pub fn parse_polynomial(src: &str) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64], w: &[f64]) -> f64 {
        parse_polynomial(src).unwrap().eval(x, w)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(ev("-x1^2", &[3.0], &[]), -9.0);
        assert_eq!(ev("(x1 - x2) - 1", &[5.0, 2.0], &[]), 2.0);
        assert_eq!(ev("0.5*x1*(1+x2+w1)", &[2.0, 2.0], &[0.0]), 3.0);
        assert_eq!(ev("x1 \u{2212} w1", &[1.0], &[0.25]), 0.75);
    }

    #[test]
    fn indices_are_tracked() {
        let e = parse_polynomial("x3*w2 + x1").unwrap();
        assert_eq!(e.max_indices(), (3, 2));
    }

    #[test]
    fn malformed_input_reports_offset() {
        match parse_polynomial("x1 + * 2") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_polynomial("x0").is_err());
        assert!(parse_polynomial("x1^1.5").is_err());
        assert!(parse_polynomial("(x1").is_err());
        assert!(parse_polynomial("x1 y").is_err());
    }
}
