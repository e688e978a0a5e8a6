use super::{var_slot, BinOp, Expr, Extremum, Func, Piece, MAX_DEPTH};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

struct Token {
    tok: Tok,
    offset: usize,
}

fn position(src: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut column = 1;
    for (i, c) in src.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    (line, column)
}

fn error_at(src: &str, offset: usize, message: impl Into<String>) -> Error {
    let (line, column) = position(src, offset);
    Error::Parse {
        line,
        column,
        offset,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b':' => Tok::Colon,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| error_at(src, start, format!("malformed number `{text}`")))?;
                out.push(Token {
                    tok: Tok::Num(v),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(error_at(src, start, format!("unknown token `{ch}`")));
            }
        };
        out.push(Token { tok, offset: start });
        i += 1;
    }
    out.push(Token {
        tok: Tok::End,
        offset: src.len(),
    });
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

/// Parses an expression; errors carry the line and column of the offending token.
pub fn parse(src: &str) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        src,
        tokens,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        Tok::RParen => Err(p.error("unbalanced parentheses: unexpected `)`")),
        other => Err(p.error(format!("unexpected {}", describe(other)))),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Colon => "`:`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::End => "end of input".into(),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        error_at(self.src, self.offset(), msg)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else if want == Tok::RParen && *self.peek() == Tok::End {
            Err(self.error("unbalanced parentheses: missing `)`"))
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error(format!("nesting deeper than {MAX_DEPTH}")))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.enter()?;
            self.bump();
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let at = self.offset();
            let exponent = self.exponent()?;
            if !exponent.is_constant() {
                return Err(error_at(self.src, at, "non-constant exponent"));
            }
            base = Expr::Pow(Box::new(base), Box::new(exponent));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.enter()?;
            self.bump();
            let inner = self.exponent()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.atom()
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut out = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, at),
            Tok::RParen => Err(error_at(self.src, at, "unbalanced parentheses: unexpected `)`")),
            Tok::End => Err(error_at(self.src, at, "unexpected end of input")),
            other => Err(error_at(self.src, at, format!("unexpected {}", describe(&other)))),
        }
    }

    fn ident(&mut self, name: String, at: usize) -> Result<Expr> {
        let func = match name.as_str() {
            "pi" => return Ok(Expr::Pi),
            "abs" => Some(Func::Abs),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            "min" | "max" => {
                self.enter()?;
                let args = self.args()?;
                self.depth -= 1;
                if args.len() < 2 {
                    return Err(error_at(self.src, at, format!("arity mismatch: `{name}` takes at least 2 arguments")));
                }
                let kind = if name == "min" { Extremum::Min } else { Extremum::Max };
                return Ok(Expr::Extremum(kind, args));
            }
            "piecewise" => return self.piecewise(at),
            _ => None,
        };
        if let Some(f) = func {
            self.enter()?;
            let mut args = self.args()?;
            self.depth -= 1;
            if args.len() != 1 {
                return Err(error_at(
                    self.src,
                    at,
                    format!("arity mismatch: `{name}` takes 1 argument, got {}", args.len()),
                ));
            }
            return Ok(Expr::Call(f, Box::new(args.remove(0))));
        }
        if var_slot(&name).is_some() {
            if *self.peek() == Tok::LParen {
                return Err(error_at(self.src, at, format!("`{name}` is not a function")));
            }
            return Ok(Expr::Var(name));
        }
        Err(error_at(self.src, at, format!("unknown identifier `{name}`")))
    }

    fn bound(&mut self) -> Result<f64> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let at = self.offset();
        let v = match self.bump() {
            Tok::Num(v) => v,
            Tok::Ident(s) if s == "inf" => f64::INFINITY,
            other => {
                return Err(error_at(
                    self.src,
                    at,
                    format!("expected a numeric guard bound, found {}", describe(&other)),
                ))
            }
        };
        Ok(if negative { -v } else { v })
    }

    fn piecewise(&mut self, at: usize) -> Result<Expr> {
        self.enter()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut pieces: Vec<Piece> = Vec::new();
        loop {
            let guard_at = self.offset();
            self.expect(Tok::LBracket, "`[`")?;
            let lo = self.bound()?;
            self.expect(Tok::Comma, "`,`")?;
            let hi = self.bound()?;
            self.expect(Tok::RBracket, "`]`")?;
            self.expect(Tok::Colon, "`:`")?;
            if !(lo < hi) {
                return Err(error_at(self.src, guard_at, "empty guard interval"));
            }
            if let Some(prev) = pieces.last() {
                if prev.hi != lo {
                    return Err(error_at(
                        self.src,
                        guard_at,
                        "guards must be contiguous and increasing",
                    ));
                }
            }
            let body = self.expr()?;
            pieces.push(Piece { lo, hi, body });
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        self.depth -= 1;
        if pieces.is_empty() {
            return Err(error_at(self.src, at, "piecewise needs at least one piece"));
        }
        Ok(Expr::Piecewise(pieces))
    }
}
