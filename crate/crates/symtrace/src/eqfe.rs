use crate::coeff::{rat, Coeff};
use crate::expr::{differentiate, mat_map, mat_mul, mat_sub, trace_normalize, Mat2, TraceExpr, Var};
use crate::parse::print_expr;
use crate::SymError;

/// φ-factor (1 − E(1))·t⁻²·q⁻¹.
fn phi_factor() -> TraceExpr {
    let one_minus = TraceExpr::int(1).sub(&TraceExpr::e(rat(1, 1)));
    let tq = TraceExpr::comm(crate::expr::Comm { t: -2, q: -1, ..crate::expr::Comm::one() });
    one_minus.mul(&tq).expect("no d")
}

/// The indicial projector family as a symbolic 2×2 matrix.
pub fn build_r_symbolic() -> Mat2 {
    let i = TraceExpr::constant(Coeff::i());
    let il = i.mul(&TraceExpr::l()).unwrap();
    let half = TraceExpr::e(rat(1, 2));
    let t = TraceExpr::t();
    let r11 = TraceExpr::e(rat(1, 1));
    let r12 = half
        .mul(&phi_factor())
        .and_then(|x| x.mul(&t))
        .and_then(|x| x.mul(&TraceExpr::b().sub(&il)))
        .unwrap();
    let r21 = half.mul(&t).and_then(|x| x.mul(&TraceExpr::b().add(&il))).unwrap();
    let r22 = TraceExpr::int(1).sub(&r11);
    [[r11, r12], [r21, r22]]
}

/// −2i·t·E(1)·(b − λ·d)
pub fn eqfe_rhs() -> TraceExpr {
    let k = TraceExpr::constant(&Coeff::int(-2) * &Coeff::i());
    let inner = TraceExpr::b().sub(&TraceExpr::l().mul(&TraceExpr::d()).unwrap());
    k.mul(&TraceExpr::t())
        .and_then(|x| x.mul(&TraceExpr::e(rat(1, 1))))
        .and_then(|x| x.mul(&inner))
        .map(|x| trace_normalize(&x))
        .unwrap()
}

#[derive(Clone, Debug)]
pub struct EqfeReport {
    pub lhs: TraceExpr,
    pub rhs: TraceExpr,
    pub residual: TraceExpr,
    /// Term counts of ∂_t r, ∂_λ r and the untraced product, summed over entries.
    pub dt_terms: usize,
    pub dl_terms: usize,
    pub product_terms: usize,
}

impl EqfeReport {
    pub fn summary(&self) -> String {
        format!(
            "dt r: {} terms\ndl r: {} terms\nproduct: {} terms\nlhs: {} terms\nrhs: {} terms\nresidual: {} terms\n",
            self.dt_terms,
            self.dl_terms,
            self.product_terms,
            self.lhs.len(),
            self.rhs.len(),
            self.residual.len()
        )
    }
}

fn count(m: &Mat2) -> usize {
    m.iter().flatten().map(TraceExpr::len).sum()
}

/// τ([∂_t r, r]·∂_λ r) for the given family, trace-normalized.
pub fn eqfe_lhs(r: &Mat2) -> Result<(TraceExpr, usize, usize, usize), SymError> {
    let dt = mat_map(r, |e| differentiate(e, Var::T))?;
    let dl = mat_map(r, |e| differentiate(e, Var::Lambda))?;
    let comm = mat_sub(&mat_mul(&dt, r)?, &mat_mul(r, &dt)?);
    let prod = mat_mul(&comm, &dl)?;
    let lhs = trace_normalize(&prod[0][0].add(&prod[1][1]));
    Ok((lhs, count(&dt), count(&dl), count(&prod)))
}

pub fn verify_eqfe_for(r: &Mat2, rhs: &TraceExpr) -> Result<EqfeReport, SymError> {
    let (lhs, dt_terms, dl_terms, product_terms) = eqfe_lhs(r)?;
    let residual = lhs.sub(rhs);
    if !residual.is_zero() {
        return Err(SymError::NonzeroResidual(print_expr(&residual)));
    }
    Ok(EqfeReport { lhs, rhs: rhs.clone(), residual, dt_terms, dl_terms, product_terms })
}

pub fn verify_eqfe() -> Result<EqfeReport, SymError> {
    verify_eqfe_for(&build_r_symbolic(), &eqfe_rhs())
}

/// r·r − r, entrywise.
pub fn idempotency_defect(r: &Mat2) -> Result<Mat2, SymError> {
    Ok(mat_sub(&mat_mul(r, r)?, r))
}

/// Counts of single-coefficient mutations of r and of the right-hand side,
/// and how many of them `verify_eqfe_for` rejects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MutationSweep {
    pub tried: usize,
    pub detected: usize,
}

fn with_term(e: &TraceExpr, idx: usize, f: &dyn Fn(&Coeff) -> Coeff) -> TraceExpr {
    let mut out = TraceExpr::zero();
    for (k, (m, c)) in e.terms().enumerate() {
        out.add_term(m.clone(), if k == idx { f(c) } else { c.clone() });
    }
    out
}

/// Doubles, shifts by one and rotates by i every coefficient in turn.
pub fn mutation_sweep() -> MutationSweep {
    let r = build_r_symbolic();
    let rhs = eqfe_rhs();
    let muts: [&dyn Fn(&Coeff) -> Coeff; 3] = [
        &|c| c.scale(&rat(2, 1)),
        &|c| c + &Coeff::one(),
        &|c| c * &Coeff::i(),
    ];
    let mut sweep = MutationSweep { tried: 0, detected: 0 };
    let mut record = |res: Result<EqfeReport, SymError>| {
        sweep.tried += 1;
        if matches!(res, Err(SymError::NonzeroResidual(_))) {
            sweep.detected += 1;
        }
    };
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        for idx in 0..r[i][j].len() {
            for f in muts {
                let mut rm = r.clone();
                rm[i][j] = with_term(&r[i][j], idx, f);
                record(verify_eqfe_for(&rm, &rhs));
            }
        }
    }
    for idx in 0..rhs.len() {
        for f in muts {
            record(verify_eqfe_for(&r, &with_term(&rhs, idx, f)));
        }
    }
    sweep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_is_idempotent() {
        let d = idempotency_defect(&build_r_symbolic()).unwrap();
        assert!(d.iter().flatten().all(TraceExpr::is_zero));
    }

    #[test]
    fn eqfe_residual_vanishes() {
        let rep = verify_eqfe().unwrap();
        assert!(rep.residual.is_zero());
        assert!(rep.summary().contains("residual: 0 terms"));
    }

    #[test]
    fn all_mutations_detected() {
        let s = mutation_sweep();
        assert_eq!(s.tried, s.detected);
        assert!(s.tried > 20);
    }

    #[test]
    fn wrong_constant_is_caught() {
        let rhs = eqfe_rhs().scale(&Coeff::i().inv().unwrap());
        assert!(matches!(verify_eqfe_for(&build_r_symbolic(), &rhs), Err(SymError::NonzeroResidual(_))));
    }
}
