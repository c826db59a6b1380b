use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::coeff::Coeff;
use crate::SymError;

/// Product of the mutually commuting generators t, l (= λ), b, q and E(α).
///
/// Normal form keeps `b` to degree at most one: b² is rewritten to q − l², so
/// q may carry any integer power and stays the only Laurent generator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Comm {
    pub t: i32,
    pub l: u32,
    pub b: u32,
    pub q: i32,
    pub e: BigRational,
}

impl Comm {
    pub fn one() -> Self {
        Comm { t: 0, l: 0, b: 0, q: 0, e: BigRational::zero() }
    }

    pub fn is_one(&self) -> bool {
        self.t == 0 && self.l == 0 && self.b == 0 && self.q == 0 && self.e.is_zero()
    }

    // Only t and λ commute with d.
    fn scalar_part(&self) -> Comm {
        Comm { t: self.t, l: self.l, ..Comm::one() }
    }

    fn operator_part(&self) -> Comm {
        Comm { t: 0, l: 0, ..self.clone() }
    }

    /// Raw exponent addition, leaving b unreduced.
    fn raw_mul(&self, o: &Comm) -> Comm {
        Comm {
            t: self.t + o.t,
            l: self.l + o.l,
            b: self.b + o.b,
            q: self.q + o.q,
            e: &self.e + &o.e,
        }
    }

    /// Product in normal form; b² → q − l² produces at most two terms.
    pub fn mul(&self, o: &Comm) -> Vec<(Comm, Coeff)> {
        reduce_b(self.raw_mul(o))
    }
}

pub(crate) fn reduce_b(c: Comm) -> Vec<(Comm, Coeff)> {
    let mut out = Vec::new();
    let mut stack = vec![(c, Coeff::one())];
    while let Some((c, k)) = stack.pop() {
        if c.b < 2 {
            out.push((c, k));
            continue;
        }
        let base = Comm { b: c.b - 2, ..c };
        stack.push((Comm { q: base.q + 1, ..base.clone() }, k.clone()));
        stack.push((Comm { l: base.l + 2, ..base }, -&k));
    }
    out
}

/// A monomial with at most one d.  In `WithD`, `pre · d · post`; scalars
/// (t, λ) always sit in `pre`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Monomial {
    Plain(Comm),
    WithD { pre: Comm, post: Comm },
}

impl Monomial {
    pub fn one() -> Self {
        Monomial::Plain(Comm::one())
    }

    pub fn has_d(&self) -> bool {
        matches!(self, Monomial::WithD { .. })
    }

    pub fn mul(&self, o: &Monomial) -> Result<Vec<(Monomial, Coeff)>, SymError> {
        use Monomial::*;
        Ok(match (self, o) {
            (Plain(a), Plain(b)) => a.mul(b).into_iter().map(|(c, k)| (Plain(c), k)).collect(),
            (Plain(a), WithD { pre, post }) => a
                .mul(pre)
                .into_iter()
                .map(|(c, k)| (WithD { pre: c, post: post.clone() }, k))
                .collect(),
            (WithD { pre, post }, Plain(b)) => {
                let pre = pre.raw_mul(&b.scalar_part());
                post.mul(&b.operator_part())
                    .into_iter()
                    .map(|(s, k)| {
                        // b² → q − l² can push λ's into post
                        (WithD { pre: pre.raw_mul(&s.scalar_part()), post: s.operator_part() }, k)
                    })
                    .collect()
            }
            (WithD { .. }, WithD { .. }) => return Err(SymError::TwoDFactors),
        })
    }
}

/// Finite ℚ(i)-linear combination of monomials in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TraceExpr {
    terms: BTreeMap<Monomial, Coeff>,
}

impl TraceExpr {
    pub fn zero() -> Self {
        TraceExpr::default()
    }

    pub fn constant(c: Coeff) -> Self {
        TraceExpr::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        TraceExpr::constant(Coeff::int(n))
    }

    pub fn term(m: Monomial, c: Coeff) -> Self {
        let mut e = TraceExpr::zero();
        e.add_term(m, c);
        e
    }

    pub fn comm(c: Comm) -> Self {
        TraceExpr::term(Monomial::Plain(c), Coeff::one())
    }

    pub fn t() -> Self {
        TraceExpr::comm(Comm { t: 1, ..Comm::one() })
    }

    pub fn l() -> Self {
        TraceExpr::comm(Comm { l: 1, ..Comm::one() })
    }

    pub fn b() -> Self {
        TraceExpr::comm(Comm { b: 1, ..Comm::one() })
    }

    pub fn q(k: i32) -> Self {
        TraceExpr::comm(Comm { q: k, ..Comm::one() })
    }

    pub fn e(alpha: BigRational) -> Self {
        TraceExpr::comm(Comm { e: alpha, ..Comm::one() })
    }

    pub fn d() -> Self {
        TraceExpr::term(Monomial::WithD { pre: Comm::one(), post: Comm::one() }, Coeff::one())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_d(&self) -> bool {
        self.terms.keys().any(Monomial::has_d)
    }

    pub fn coeff_of(&self, m: &Monomial) -> Coeff {
        self.terms.get(m).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = o.get() + &c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, o: &TraceExpr) -> TraceExpr {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &TraceExpr) -> TraceExpr {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> TraceExpr {
        self.scale(&Coeff::int(-1))
    }

    pub fn scale(&self, k: &Coeff) -> TraceExpr {
        let mut out = TraceExpr::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c * k);
        }
        out
    }

    pub fn mul(&self, o: &TraceExpr) -> Result<TraceExpr, SymError> {
        let mut out = TraceExpr::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let c = c1 * c2;
                for (m, k) in m1.mul(m2)? {
                    out.add_term(m, &c * &k);
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: i32) -> Result<TraceExpr, SymError> {
        if k < 0 {
            return self.inverse()?.pow(-k);
        }
        let mut acc = TraceExpr::int(1);
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Inverse of a single invertible monomial (t, q and E powers times a constant).
    pub fn inverse(&self) -> Result<TraceExpr, SymError> {
        let mut it = self.terms.iter();
        match (it.next(), it.next()) {
            (Some((Monomial::Plain(c), k)), None) if c.l == 0 && c.b == 0 => {
                let inv = k.inv().ok_or(SymError::NotInvertible)?;
                let m = Comm { t: -c.t, q: -c.q, e: -&c.e, ..Comm::one() };
                Ok(TraceExpr::term(Monomial::Plain(m), inv))
            }
            _ => Err(SymError::NotInvertible),
        }
    }

    /// The constant term when the expression is a pure constant.
    pub fn as_constant(&self) -> Option<Coeff> {
        if self.terms.is_empty() {
            return Some(Coeff::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }
}

/// Cyclic rotation under the trace: pre·d·post → (pre·post)·d.
pub fn trace_normalize(e: &TraceExpr) -> TraceExpr {
    let mut out = TraceExpr::zero();
    for (m, c) in e.terms() {
        match m {
            Monomial::Plain(_) => out.add_term(m.clone(), c.clone()),
            Monomial::WithD { pre, post } => {
                for (p, k) in pre.mul(post) {
                    out.add_term(Monomial::WithD { pre: p, post: Comm::one() }, c * &k);
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    T,
    Lambda,
}

/// Under-trace derivative.  Each d produced is placed trailing, which is legitimate
/// because the whole expression carries no other noncommuting factor.
pub fn differentiate(e: &TraceExpr, var: Var) -> Result<TraceExpr, SymError> {
    if e.has_d() {
        return Err(SymError::AlreadyHasD);
    }
    let mut out = TraceExpr::zero();
    for (m, c) in e.terms() {
        let Monomial::Plain(x) = m else { unreachable!() };
        let contrib = match var {
            Var::T => d_dt(x),
            Var::Lambda => d_dlambda(x),
        };
        out = out.add(&contrib.scale(c));
    }
    Ok(out)
}

fn int_coeff(n: i64) -> Coeff {
    Coeff::int(n)
}

fn d_dt(x: &Comm) -> TraceExpr {
    let mut out = TraceExpr::zero();
    if x.t != 0 {
        out.add_term(Monomial::Plain(Comm { t: x.t - 1, ..x.clone() }), int_coeff(x.t as i64));
    }
    if !x.e.is_zero() {
        // ∂_t E(α) = −2α t q E(α)
        let k = Coeff::real(-(&x.e + &x.e));
        let m = Comm { t: x.t + 1, q: x.q + 1, ..x.clone() };
        out.add_term(Monomial::Plain(m), k);
    }
    out
}

/// Multiplies `rest` by (2λ + 2b·d) under the trace.
fn times_dq(rest: &Comm, k: &Coeff) -> TraceExpr {
    let two = &int_coeff(2) * k;
    let mut out = TraceExpr::term(Monomial::Plain(Comm { l: rest.l + 1, ..rest.clone() }), two.clone());
    for (p, s) in rest.mul(&Comm { b: 1, ..Comm::one() }) {
        out.add_term(Monomial::WithD { pre: p, post: Comm::one() }, &two * &s);
    }
    out
}

fn d_dlambda(x: &Comm) -> TraceExpr {
    let mut out = TraceExpr::zero();
    if x.l > 0 {
        out.add_term(Monomial::Plain(Comm { l: x.l - 1, ..x.clone() }), int_coeff(x.l as i64));
    }
    if x.b > 0 {
        // b is at most linear in normal form
        let rest = Comm { b: x.b - 1, ..x.clone() };
        out.add_term(Monomial::WithD { pre: rest, post: Comm::one() }, int_coeff(x.b as i64));
    }
    if x.q != 0 {
        let rest = Comm { q: x.q - 1, ..x.clone() };
        out = out.add(&times_dq(&rest, &int_coeff(x.q as i64)));
    }
    if !x.e.is_zero() {
        // ∂_λ E(α) = −α t² E(α)(2λ + 2b·d)
        let rest = Comm { t: x.t + 2, ..x.clone() };
        out = out.add(&times_dq(&rest, &Coeff::real(-x.e.clone())));
    }
    out
}

/// 2×2 matrix of expressions.
pub type Mat2 = [[TraceExpr; 2]; 2];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Result<Mat2, SymError> {
    let entry = |i: usize, j: usize| -> Result<TraceExpr, SymError> {
        Ok(a[i][0].mul(&b[0][j])?.add(&a[i][1].mul(&b[1][j])?))
    };
    Ok([[entry(0, 0)?, entry(0, 1)?], [entry(1, 0)?, entry(1, 1)?]])
}

pub fn mat_sub(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0].sub(&b[0][0]), a[0][1].sub(&b[0][1])],
        [a[1][0].sub(&b[1][0]), a[1][1].sub(&b[1][1])],
    ]
}

pub fn mat_map(a: &Mat2, f: impl Fn(&TraceExpr) -> Result<TraceExpr, SymError>) -> Result<Mat2, SymError> {
    Ok([[f(&a[0][0])?, f(&a[0][1])?], [f(&a[1][0])?, f(&a[1][1])?]])
}

impl fmt::Display for TraceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::parse::print_expr(self))
    }
}
