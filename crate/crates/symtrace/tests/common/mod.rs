#![allow(dead_code)]

use rand::Rng;
use symtrace::rewrite::Atom;
use symtrace::{rat, Coeff, TraceExpr};

pub fn random_atom<R: Rng>(rng: &mut R) -> Atom {
    match rng.gen_range(0..5) {
        0 => Atom::T(rng.gen_range(-2..=2)),
        1 => Atom::L(rng.gen_range(0..=2)),
        2 => Atom::B,
        3 => Atom::Q(rng.gen_range(-2..=2)),
        _ => Atom::E(rat(rng.gen_range(-2..=3), 2)),
    }
}

pub fn random_coeff<R: Rng>(rng: &mut R) -> Coeff {
    let re = rat(rng.gen_range(-5..=5), rng.gen_range(1..=4));
    let im = if rng.gen_bool(0.3) { rat(rng.gen_range(-3..=3), rng.gen_range(1..=3)) } else { rat(0, 1) };
    Coeff::new(re, im)
}

pub fn atom_expr(a: &Atom) -> TraceExpr {
    match a {
        Atom::T(k) => TraceExpr::t().pow(*k).unwrap(),
        Atom::L(k) => TraceExpr::l().pow(*k as i32).unwrap(),
        Atom::B => TraceExpr::b(),
        Atom::Q(k) => TraceExpr::q(*k),
        Atom::E(a) => TraceExpr::e(a.clone()),
        Atom::D => TraceExpr::d(),
    }
}

pub fn random_word<R: Rng>(rng: &mut R, with_d: bool) -> Vec<Atom> {
    let n = rng.gen_range(1..=7);
    let mut atoms: Vec<Atom> = (0..n).map(|_| random_atom(rng)).collect();
    if with_d {
        let p = rng.gen_range(0..=atoms.len());
        atoms.insert(p, Atom::D);
    }
    atoms
}

pub fn word_expr(coeff: &Coeff, atoms: &[Atom]) -> TraceExpr {
    atoms
        .iter()
        .fold(TraceExpr::constant(coeff.clone()), |acc, a| acc.mul(&atom_expr(a)).unwrap())
}

/// Random sum of products; d appears in at most one factor per term when `with_d`.
pub fn random_expr<R: Rng>(rng: &mut R, with_d: bool) -> TraceExpr {
    let terms = rng.gen_range(1..=4);
    let mut e = TraceExpr::zero();
    for _ in 0..terms {
        let d_here = with_d && rng.gen_bool(0.7);
        let w = random_word(rng, d_here);
        e = e.add(&word_expr(&random_coeff(rng), &w));
    }
    e
}
