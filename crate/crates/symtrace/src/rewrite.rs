//! Small-step rewriting on words of atoms.  Used to cross-check the direct
//! product in `expr`: whatever order the rules fire in, the collected result
//! must be the same canonical expression.

use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

use crate::coeff::Coeff;
use crate::expr::{Comm, Monomial, TraceExpr};
use crate::SymError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    T(i32),
    L(u32),
    B,
    Q(i32),
    E(BigRational),
    D,
}

impl Atom {
    fn rank(&self) -> u8 {
        match self {
            Atom::T(_) => 0,
            Atom::L(_) => 1,
            Atom::B => 2,
            Atom::Q(_) => 3,
            Atom::E(_) => 4,
            Atom::D => 5,
        }
    }

    fn commutes(&self, o: &Atom) -> bool {
        let scalar = |a: &Atom| matches!(a, Atom::T(_) | Atom::L(_));
        match (self, o) {
            (Atom::D, x) | (x, Atom::D) => scalar(x),
            _ => true,
        }
    }

    fn is_identity(&self) -> bool {
        match self {
            Atom::T(k) | Atom::Q(k) => *k == 0,
            Atom::L(k) => *k == 0,
            Atom::E(a) => a.is_zero(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Word {
    pub coeff: Coeff,
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug)]
enum Step {
    Drop(usize),
    Merge(usize),
    SplitB(usize),
    Swap(usize),
    Rotate,
}

fn steps(w: &Word, cyclic: bool) -> Vec<Step> {
    let a = &w.atoms;
    let mut out = Vec::new();
    for i in 0..a.len() {
        if a[i].is_identity() {
            out.push(Step::Drop(i));
        }
        if i + 1 < a.len() {
            match (&a[i], &a[i + 1]) {
                (Atom::B, Atom::B) => out.push(Step::SplitB(i)),
                (Atom::T(_), Atom::T(_)) | (Atom::L(_), Atom::L(_)) | (Atom::Q(_), Atom::Q(_)) | (Atom::E(_), Atom::E(_)) => {
                    out.push(Step::Merge(i))
                }
                (x, y) if x.rank() > y.rank() && x.commutes(y) => out.push(Step::Swap(i)),
                _ => {}
            }
        }
    }
    if cyclic {
        if let Some(p) = a.iter().position(|x| *x == Atom::D) {
            if p + 1 != a.len() {
                out.push(Step::Rotate);
            }
        }
    }
    out
}

fn apply(w: Word, step: &Step) -> Vec<Word> {
    let mut a = w.atoms;
    match *step {
        Step::Drop(i) => {
            a.remove(i);
        }
        Step::Merge(i) => {
            let y = a.remove(i + 1);
            a[i] = match (&a[i], y) {
                (Atom::T(x), Atom::T(y)) => Atom::T(x + y),
                (Atom::L(x), Atom::L(y)) => Atom::L(x + y),
                (Atom::Q(x), Atom::Q(y)) => Atom::Q(x + y),
                (Atom::E(x), Atom::E(y)) => Atom::E(x + &y),
                _ => unreachable!(),
            };
        }
        Step::SplitB(i) => {
            let mut b = a.clone();
            a.splice(i..i + 2, [Atom::Q(1)]);
            b.splice(i..i + 2, [Atom::L(2)]);
            return vec![Word { coeff: w.coeff.clone(), atoms: a }, Word { coeff: -&w.coeff, atoms: b }];
        }
        Step::Swap(i) => a.swap(i, i + 1),
        Step::Rotate => {
            let p = a.iter().position(|x| *x == Atom::D).unwrap();
            a.rotate_left(p + 1);
        }
    }
    vec![Word { coeff: w.coeff, atoms: a }]
}

fn to_comm(atoms: &[Atom]) -> Comm {
    let mut c = Comm::one();
    for x in atoms {
        match x {
            Atom::T(k) => c.t += k,
            Atom::L(k) => c.l += k,
            Atom::B => c.b += 1,
            Atom::Q(k) => c.q += k,
            Atom::E(a) => c.e += a,
            Atom::D => unreachable!(),
        }
    }
    c
}

/// Read off a fully rewritten word.  Panics if the word is not a fixpoint.
fn to_monomial(w: &Word) -> Monomial {
    match w.atoms.iter().position(|x| *x == Atom::D) {
        None => Monomial::Plain(to_comm(&w.atoms)),
        Some(p) => Monomial::WithD { pre: to_comm(&w.atoms[..p]), post: to_comm(&w.atoms[p + 1..]) },
    }
}

/// Rewrite every word to a fixpoint, choosing the next rule application
/// uniformly at random.  `cyclic` enables rotation of d to the end (valid under
/// the trace only).
pub fn normalize_words<R: Rng>(words: Vec<Word>, cyclic: bool, rng: &mut R) -> Result<TraceExpr, SymError> {
    for w in &words {
        if w.atoms.iter().filter(|x| **x == Atom::D).count() > 1 {
            return Err(SymError::TwoDFactors);
        }
    }
    let mut open = words;
    let mut done = TraceExpr::zero();
    while !open.is_empty() {
        let wi = rng.gen_range(0..open.len());
        let st = steps(&open[wi], cyclic);
        if st.is_empty() {
            let w = open.swap_remove(wi);
            done.add_term(to_monomial(&w), w.coeff);
            continue;
        }
        let step = &st[rng.gen_range(0..st.len())];
        let w = open.swap_remove(wi);
        open.extend(apply(w, step));
    }
    Ok(done)
}

/// Word form of a canonical expression (one word per term).
pub fn words_of(e: &TraceExpr) -> Vec<Word> {
    fn push(c: &Comm, out: &mut Vec<Atom>, scalars: bool) {
        if scalars {
            out.push(Atom::T(c.t));
            out.push(Atom::L(c.l));
        }
        for _ in 0..c.b {
            out.push(Atom::B);
        }
        out.push(Atom::Q(c.q));
        out.push(Atom::E(c.e.clone()));
    }
    e.terms()
        .map(|(m, k)| {
            let mut atoms = Vec::new();
            match m {
                Monomial::Plain(c) => push(c, &mut atoms, true),
                Monomial::WithD { pre, post } => {
                    push(pre, &mut atoms, true);
                    atoms.push(Atom::D);
                    push(post, &mut atoms, true);
                }
            }
            Word { coeff: k.clone(), atoms }
        })
        .collect()
}
