//! Element literals: `v=<rational>;u=c0,c1,...` or arithmetic expressions
//! in integers, `p`, `pi` (the uniformizer) and `t` (the power-basis
//! generator), e.g. `1+p^2`, `1+3*t`, `(1+p)/(1-p)`.

use crate::error::{Error, Result};
use crate::localfield::{Elem, FieldRef};
use crate::num::parse_q;

/// Parses an element literal; exact constants get `prec` digits of relative
/// precision.
pub fn parse_elem(field: &FieldRef, s: &str, prec: i64) -> Result<Elem> {
    let s = s.trim();
    if s.starts_with("v=") {
        return parse_parts(field, s, prec);
    }
    let tokens = tokenize(s)?;
    let mut parser = Parser { field, prec, tokens, pos: 0 };
    let e = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(Error::Parse(format!("trailing input in {s:?}")));
    }
    Ok(e)
}

fn parse_parts(field: &FieldRef, s: &str, prec: i64) -> Result<Elem> {
    let bad = || Error::Parse(format!("malformed literal {s:?}"));
    let (v, u) = s.split_once(';').ok_or_else(bad)?;
    let v = parse_q(v.strip_prefix("v=").ok_or_else(bad)?).ok_or_else(bad)?;
    let scaled = v * field.e() as i64;
    if !scaled.is_integer() {
        return Err(Error::Parse(format!("valuation {v} is not in (1/e)Z")));
    }
    let coords: Vec<i128> = u
        .trim()
        .strip_prefix("u=")
        .ok_or_else(bad)?
        .split(',')
        .map(|c| c.trim().parse::<i128>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let mut full = vec![0i128; field.degree()];
    if coords.len() > full.len() {
        return Err(bad());
    }
    full[..coords.len()].copy_from_slice(&coords);
    Elem::from_parts(field, scaled.to_integer(), &full, prec)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(i128),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let lit: String = chars[start..i].iter().collect();
            out.push(Tok::Num(lit.parse().map_err(|_| Error::Parse(lit.clone()))?));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    field: &'a FieldRef,
    prec: i64,
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Elem> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?)?;
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Elem> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?)?;
            } else if self.eat('/') {
                acc = acc.div(&self.unary()?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Elem> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        let base = self.atom()?;
        if self.eat('^') {
            let neg = self.eat('-');
            let k = match self.peek() {
                Some(Tok::Num(k)) => *k as i64,
                _ => return Err(Error::Parse("exponent must be an integer".into())),
            };
            self.pos += 1;
            return base.pow(if neg { -k } else { k });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Elem> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Parse("unexpected end".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(n) => Elem::integer(self.field, n, self.prec),
            Tok::Ident(id) => match id.as_str() {
                "p" => Elem::integer(self.field, self.field.p() as i128, self.prec),
                "pi" => Ok(Elem::uniformizer(self.field, self.prec)),
                "t" => Elem::generator(self.field, self.prec),
                _ => Err(Error::Parse(format!("unknown symbol {id:?}"))),
            },
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Op(c) => Err(Error::Parse(format!("unexpected {c:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localfield::{base_field, make_field, ExtensionKind, Valuation};
    use crate::num::{q, qi};

    #[test]
    fn expressions() {
        let f = base_field(3);
        let x = parse_elem(&f, "1+p^2", 6).unwrap();
        assert_eq!(x.to_int_mod(6).unwrap(), 10);
        let y = parse_elem(&f, "p^-2*5", 6).unwrap();
        assert_eq!(y.valuation(), Valuation::Exact(qi(-2)));
        let z = parse_elem(&f, "(1+p)/(1-p)", 6).unwrap();
        let back = z.mul(&parse_elem(&f, "1-p", 6).unwrap()).unwrap();
        assert!(back.congruent(&parse_elem(&f, "4", 6).unwrap(), 6).unwrap());
    }

    #[test]
    fn parts_literal() {
        let f = make_field(3, ExtensionKind::RamifiedQuadratic { unit: 1 }).unwrap();
        let x = parse_elem(&f, "v=3/2;u=2,1", 4).unwrap();
        assert_eq!(x.valuation(), Valuation::Exact(q(3, 2)));
        assert!(parse_elem(&f, "v=1/3;u=1", 4).is_err());
        assert!(parse_elem(&f, "v=0;u=3,1", 4).is_err());
    }
}
