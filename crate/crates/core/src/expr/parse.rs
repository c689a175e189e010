use thiserror::Error;

use super::{BinOp, Expr, Func};

/// Parse failure. `offset` is the 1-based byte position of the offending
/// token, or one past the last byte when input ends early.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
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

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(_, s) => format!("number '{s}'"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::End => "end of input".into(),
    }
}

fn err(pos: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        offset: pos + 1,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
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
                    .map_err(|_| err(start, format!("malformed number '{text}'")))?;
                out.push((Tok::Num(v, text.to_string()), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(err(start, format!("unexpected character '{ch}'")));
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(err(
                self.offset(),
                format!("expected {}, found {}", describe(&want), describe(self.peek())),
            ))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.atom()?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let at = self.offset();
            let negative = if *self.peek() == Tok::Minus {
                self.bump();
                true
            } else {
                false
            };
            let n = match self.bump() {
                Tok::Num(v, text) => {
                    if v.fract() != 0.0 || text.contains(['.', 'e', 'E']) {
                        return Err(err(at, format!("non-integer exponent '{text}'")));
                    }
                    if v > i32::MAX as f64 {
                        return Err(err(at, format!("exponent '{text}' too large")));
                    }
                    v as i32
                }
                other => {
                    return Err(err(
                        at,
                        format!("exponent must be an integer literal, found {}", describe(&other)),
                    ))
                }
            };
            base = Expr::Pow(Box::new(base), if negative { -n } else { n });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v, _) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let func = match Func::from_name(&name) {
                        Some(f) => f,
                        None if name == "abs" => {
                            return Err(err(at, "abs is not supported (not differentiable at 0)"))
                        }
                        None => return Err(err(at, format!("unknown function '{name}'"))),
                    };
                    self.bump();
                    let arg = self.sum()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if Func::from_name(&name).is_some() || name == "abs" {
                    return Err(err(at, format!("function '{name}' requires an argument")));
                }
                Ok(match name.as_str() {
                    "x" => Expr::X,
                    "mu" => Expr::Mu,
                    _ => Expr::Param(name),
                })
            }
            other => Err(err(at, format!("unexpected {}", describe(&other)))),
        }
    }
}

/// Parses an expression in `x`, `mu` and named parameters.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return Err(err(p.offset(), format!("unexpected {}", describe(p.peek()))));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_inputs() {
        assert!(parse("x + mu - x^2 + 0.5*x^3").is_ok());
        assert!(parse("x*exp(-x) + mu").is_ok());
        assert!(parse("1e-3*x + 2.5E+2*mu").is_ok());
    }

    #[test]
    fn unbalanced_paren_offset() {
        let e = parse("x + (mu").unwrap_err();
        assert_eq!(e.offset, 8);
        assert!(e.message.contains("expected ')'"), "{}", e.message);
    }

    #[test]
    fn rejections() {
        assert!(parse("x^0.5").unwrap_err().message.contains("non-integer"));
        assert!(parse("x^mu").unwrap_err().message.contains("integer literal"));
        assert!(parse("abs(x)").unwrap_err().message.contains("abs"));
        assert!(parse("foo(x)").unwrap_err().message.contains("unknown function 'foo'"));
        assert_eq!(parse("x $ 1").unwrap_err().offset, 3);
        assert_eq!(parse("x + * 2").unwrap_err().offset, 5);
        assert!(parse("").is_err());
        assert!(parse("x y").is_err());
        assert!(parse("exp").is_err());
    }

    #[test]
    fn precedence() {
        let e = parse("-x^2").unwrap();
        assert_eq!(e, Expr::neg(Expr::Pow(Box::new(Expr::X), 2)));
        let e = parse("a - b - c").unwrap();
        assert_eq!(
            e,
            Expr::bin(
                BinOp::Sub,
                Expr::bin(BinOp::Sub, Expr::Param("a".into()), Expr::Param("b".into())),
                Expr::Param("c".into())
            )
        );
        let e = parse("1 + 2*3").unwrap();
        assert!(matches!(e, Expr::Bin(BinOp::Add, ..)));
        assert_eq!(parse("x^-2").unwrap(), Expr::Pow(Box::new(Expr::X), -2));
    }
}
