use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::coeff::Coeff;
use crate::expr::{Comm, Monomial, TraceExpr};
use crate::SymError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Sym(char),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, SymError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let int_part = &text[start..i];
            let mut value = BigRational::from_integer(BigInt::from_str(int_part).unwrap());
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let fs = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if fs == i {
                    return Err(syntax(i, "expected digits after '.'"));
                }
                let frac = BigInt::from_str(&text[fs..i]).unwrap();
                let scale = num_traits::pow(BigInt::from(10), i - fs);
                value += BigRational::new(frac, scale);
            }
            out.push((start, Tok::Num(value)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(syntax(i, &format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

fn syntax(pos: usize, msg: &str) -> SymError {
    SymError::Syntax { pos, msg: msg.to_string() }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SymError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(syntax(self.pos(), &format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<TraceExpr, SymError> {
        let mut acc = if self.eat('-') {
            self.term()?.neg()
        } else {
            self.eat('+');
            self.term()?
        };
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<TraceExpr, SymError> {
        let mut acc = self.power()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.power()?)?;
            } else if self.peek() == Some(&Tok::Sym('/')) {
                let pos = self.pos();
                self.at += 1;
                let div = self.power()?;
                let inv = div.inverse().map_err(|_| syntax(pos, "divisor must be an invertible monomial"))?;
                acc = acc.mul(&inv)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn power(&mut self) -> Result<TraceExpr, SymError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let pos = self.pos();
        let k = self.signed_int()?;
        let k = i32::try_from(k).map_err(|_| syntax(pos, "exponent out of range"))?;
        base.pow(k).map_err(|e| match e {
            SymError::NotInvertible => syntax(pos, "negative power of a non-invertible factor"),
            e => e,
        })
    }

    fn signed_int(&mut self) -> Result<i64, SymError> {
        let neg = self.eat('-');
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(n)) if n.is_integer() => {
                self.at += 1;
                let v: i64 = n
                    .to_integer()
                    .try_into()
                    .map_err(|_| syntax(pos, "integer out of range"))?;
                Ok(if neg { -v } else { v })
            }
            _ => Err(syntax(pos, "expected integer")),
        }
    }

    fn rational(&mut self) -> Result<BigRational, SymError> {
        let neg = self.eat('-');
        let pos = self.pos();
        let mut v = match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                n
            }
            _ => return Err(syntax(pos, "expected rational")),
        };
        if self.eat('/') {
            let pos = self.pos();
            match self.peek().cloned() {
                Some(Tok::Num(d)) if !d.is_zero() => {
                    self.at += 1;
                    v /= d;
                }
                _ => return Err(syntax(pos, "expected nonzero denominator")),
            }
        }
        Ok(if neg { -v } else { v })
    }

    fn atom(&mut self) -> Result<TraceExpr, SymError> {
        let pos = self.pos();
        let tok = self.peek().cloned().ok_or_else(|| syntax(pos, "unexpected end of input"))?;
        self.at += 1;
        match tok {
            Tok::Num(n) => Ok(TraceExpr::constant(Coeff::real(n))),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err(syntax(pos, &format!("unexpected '{c}'"))),
            Tok::Ident(id) => match id.as_str() {
                "t" => Ok(TraceExpr::t()),
                "l" => Ok(TraceExpr::l()),
                "b" => Ok(TraceExpr::b()),
                "q" => Ok(TraceExpr::q(1)),
                "qi" => Ok(TraceExpr::q(-1)),
                "d" => Ok(TraceExpr::d()),
                "i" => Ok(TraceExpr::constant(Coeff::i())),
                "E" => {
                    self.expect('(')?;
                    let a = self.rational()?;
                    self.expect(')')?;
                    Ok(TraceExpr::e(a))
                }
                other => Err(syntax(pos, &format!("unknown symbol '{other}'"))),
            },
        }
    }
}

pub fn parse_expr(text: &str) -> Result<TraceExpr, SymError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, end: text.len() };
    let e = p.expr()?;
    if p.at != p.toks.len() {
        return Err(syntax(p.pos(), "trailing input"));
    }
    Ok(e)
}

fn comm_factors(c: &Comm, out: &mut Vec<String>) {
    let pw = |name: &str, k: i64| if k == 1 { name.to_string() } else { format!("{name}^{k}") };
    if c.t != 0 {
        out.push(pw("t", c.t as i64));
    }
    if c.l != 0 {
        out.push(pw("l", c.l as i64));
    }
    if c.b != 0 {
        out.push(pw("b", c.b as i64));
    }
    if c.q > 0 {
        out.push(pw("q", c.q as i64));
    } else if c.q < 0 {
        out.push(pw("qi", -(c.q as i64)));
    }
    if !c.e.is_zero() {
        out.push(format!("E({})", c.e));
    }
}

fn monomial_factors(m: &Monomial) -> Vec<String> {
    let mut out = Vec::new();
    match m {
        Monomial::Plain(c) => comm_factors(c, &mut out),
        Monomial::WithD { pre, post } => {
            comm_factors(pre, &mut out);
            out.push("d".into());
            comm_factors(post, &mut out);
        }
    }
    out
}

/// Text form accepted back by `parse_expr`.
pub fn print_expr(e: &TraceExpr) -> String {
    if e.is_zero() {
        return "0".into();
    }
    let mut s = String::new();
    for (idx, (m, c)) in e.terms().enumerate() {
        let neg = c.is_negative();
        let mag = if neg { -c } else { c.clone() };
        if idx == 0 {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let factors = monomial_factors(m);
        let mut parts = Vec::new();
        if factors.is_empty() || !mag.is_one() {
            parts.push(mag.to_string());
        }
        parts.extend(factors);
        s.push_str(&parts.join("*"));
    }
    s
}

