//! Perturbed heat semigroups `exp(-t(D² + A))` through the Volterra series,
//! small-time defects and the McKean–Singer supertrace.

use crate::error::{ForgeError, Result};
use crate::linalg::{self, c, CMat, Eigh, C64};
use crate::opmodel::{require_hermitian, EquivariantModel, OperatorValue};
use crate::quad::Rule;

pub const TERM_CAP: usize = 40;
/// Gauss–Legendre nodes per panel in the collocation route.
pub const COLLOCATION_NODES: usize = 32;

#[derive(Clone, Debug)]
pub struct VolterraResult {
    pub value: OperatorValue,
    pub terms_used: usize,
    pub tail_bound: f64,
}

/// `(D², A)` with `A = C² + DC + CD`.
pub fn perturbed_square(d: &OperatorValue, cpert: &OperatorValue) -> Result<(OperatorValue, OperatorValue)> {
    if d.dim() != cpert.dim() {
        return Err(ForgeError::DimensionMismatch {
            expected: d.dim(),
            found: cpert.dim(),
        });
    }
    let (dm, cm) = (d.matrix(), cpert.matrix());
    let d2 = dm * dm;
    let a = cm * cm + dm * cm + cm * dm;
    Ok((OperatorValue::new(d2), OperatorValue::new(a)))
}

/// `Σ_{k>K} x^k / k!` summed directly (no cancellation against `e^x`).
pub fn exp_tail(x: f64, big_k: usize) -> f64 {
    let mut term = 1.0;
    for k in 1..=big_k + 1 {
        term *= x / k as f64;
    }
    let mut sum = 0.0;
    let mut k = big_k + 1;
    while term > 1e-300 && k < big_k + 400 {
        sum += term;
        k += 1;
        term *= x / k as f64;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Least truncation order `K ≤ TERM_CAP` whose tail `Σ_{k>K} (t‖A‖)^k/k!` is at most `tol`.
pub fn truncation_order(t_norm_a: f64, tol: f64) -> Result<(usize, f64)> {
    for k in 0..=TERM_CAP {
        let tail = exp_tail(t_norm_a, k);
        if tail <= tol {
            return Ok((k, tail));
        }
    }
    let mut needed = TERM_CAP + 1;
    while exp_tail(t_norm_a, needed) > tol && needed < 10_000 {
        needed += 1;
    }
    Err(ForgeError::TermCapExceeded {
        needed,
        cap: TERM_CAP,
    })
}

fn check_inputs(d2: &OperatorValue, a: &OperatorValue, t: f64) -> Result<Eigh> {
    if d2.dim() != a.dim() {
        return Err(ForgeError::DimensionMismatch {
            expected: d2.dim(),
            found: a.dim(),
        });
    }
    if !(t > 0.0) {
        return Err(ForgeError::InvalidArgument("heat time must be positive".into()));
    }
    require_hermitian(d2.matrix())?;
    let eig = Eigh::new(d2.matrix());
    let bottom = eig.values.first().copied().unwrap_or(0.0);
    if bottom < -1e-10 * eig.spectral_radius().max(1.0) {
        return Err(ForgeError::InvalidArgument(
            "D² must be positive semidefinite".into(),
        ));
    }
    Ok(eig)
}

/// Lagrange basis of the nodes evaluated at `x`, barycentric form.
fn lagrange_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    if let Some(j) = nodes.iter().position(|&n| n == x) {
        let mut row = vec![0.0; nodes.len()];
        row[j] = 1.0;
        return row;
    }
    let terms: Vec<f64> = nodes.iter().zip(bary).map(|(&n, &w)| w / (x - n)).collect();
    let denom: f64 = terms.iter().sum();
    terms.iter().map(|v| v / denom).collect()
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] *= nodes[j] - nodes[k];
            }
        }
        w[j] = 1.0 / w[j];
    }
    // Rescale to keep magnitudes moderate; barycentric formula is scale-invariant.
    let m = w.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    w.iter().map(|v| v / m).collect()
}

/// Integration matrices of one panel `[0, h]` for decay rate `mu`:
/// rows `p = 0..N` give `∫_0^{s_p} e^{-(s_p - u) μ} ℓ_r(u) du`, row `N` the panel end.
fn collocation_matrix(nodes: &[f64], bary: &[f64], h: f64, mu: f64, inner: &Rule) -> Vec<Vec<f64>> {
    let mut targets: Vec<f64> = nodes.to_vec();
    targets.push(h);
    targets
        .iter()
        .map(|&s| {
            let mut row = vec![0.0; nodes.len()];
            if s == 0.0 {
                return row;
            }
            let sub = inner.mapped(0.0, s);
            for (&u, &w) in sub.nodes.iter().zip(&sub.weights) {
                let l = lagrange_row(nodes, bary, u);
                let f = w * (-(s - u) * mu).exp();
                for (r, lr) in row.iter_mut().zip(&l) {
                    *r += f * lr;
                }
            }
            row
        })
        .collect()
}

/// `exp(-t(D² + A))` through the Volterra series, each term produced by
/// Duhamel recursion `W_k(s) = -∫_0^s e^{-(s-u)D²} A W_{k-1}(u) du`.
///
/// The recursion runs in the eigenbasis of `D²` on panels with
/// `h · λ_max(D²) ≤ 1`; on each panel every `W_k` is collocated at
/// Gauss–Legendre nodes with the exponential integrated exactly against the
/// Lagrange basis. The truncation order is the least `K` with
/// `Σ_{k>K} (t‖A‖)^k / k! ≤ tol` (the constant is 1 since `‖e^{-sD²}‖ ≤ 1`).
pub fn volterra_heat(d2: &OperatorValue, a: &OperatorValue, t: f64, tol: f64) -> Result<VolterraResult> {
    let eig = check_inputs(d2, a, t)?;
    let norm_a = linalg::opnorm(a.matrix());
    let (big_k, tail) = truncation_order(t * norm_a, tol)?;
    let n = d2.dim();
    let v = &eig.vectors;
    let mu: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
    let at = v.adjoint() * a.matrix() * v;

    let mu_max = mu.iter().fold(0.0_f64, |m, &x| m.max(x));
    let panels = ((t * (mu_max + norm_a)).ceil() as usize).max(1);
    let h = t / panels as f64;
    let base = Rule::gauss_legendre(COLLOCATION_NODES).mapped(0.0, h);
    let nodes = base.nodes.clone();
    let bary = barycentric_weights(&nodes);
    let inner = Rule::gauss_legendre(48);
    let mats: Vec<Vec<Vec<f64>>> = mu
        .iter()
        .map(|&m| collocation_matrix(&nodes, &bary, h, m, &inner))
        .collect();
    let np = nodes.len();

    // start[k] = W_k at the left end of the current panel (W_0(0) = I, W_k(0) = 0)
    let mut start: Vec<CMat> = (0..=big_k).map(|_| CMat::zeros(n, n)).collect();
    start[0] = linalg::identity(n);
    for _ in 0..panels {
        // prev[p] = W_{k-1} at node p of this panel
        let mut prev: Vec<CMat> = nodes
            .iter()
            .map(|&s| {
                let mut w0 = start[0].clone();
                for i in 0..n {
                    let f = (-s * mu[i]).exp();
                    for j in 0..n {
                        w0[(i, j)] *= f;
                    }
                }
                w0
            })
            .collect();
        let mut end: Vec<CMat> = Vec::with_capacity(big_k + 1);
        end.push(CMat::from_fn(n, n, |i, j| start[0][(i, j)] * (-h * mu[i]).exp()));
        for k in 1..=big_k {
            let driven: Vec<CMat> = prev.iter().map(|w| &at * w).collect();
            let mut cur: Vec<CMat> = Vec::with_capacity(np);
            let mut panel_end = CMat::zeros(n, n);
            for p in 0..=np {
                let s = if p < np { nodes[p] } else { h };
                let mut w = CMat::zeros(n, n);
                for i in 0..n {
                    let decay = (-s * mu[i]).exp();
                    let row = &mats[i][p];
                    for j in 0..n {
                        let mut acc = start[k][(i, j)] * decay;
                        for (r, dr) in driven.iter().enumerate() {
                            acc -= dr[(i, j)] * row[r];
                        }
                        w[(i, j)] = acc;
                    }
                }
                if p < np {
                    cur.push(w);
                } else {
                    panel_end = w;
                }
            }
            end.push(panel_end);
            prev = cur;
        }
        start = end;
    }
    let total = start.iter().fold(CMat::zeros(n, n), |acc, w| acc + w);
    Ok(VolterraResult {
        value: OperatorValue::new(v * total * v.adjoint()),
        terms_used: big_k + 1,
        tail_bound: tail,
    })
}

/// The same truncated series with every simplex integral evaluated exactly:
/// the `k`-th term is the `(0, k)` block of the exponential of the block
/// bidiagonal matrix with `-tD²` on the diagonal and `-tA` above it.
pub fn volterra_heat_exact(d2: &OperatorValue, a: &OperatorValue, t: f64, tol: f64) -> Result<VolterraResult> {
    check_inputs(d2, a, t)?;
    let norm_a = linalg::opnorm(a.matrix());
    let (big_k, tail) = truncation_order(t * norm_a, tol)?;
    let terms = volterra_terms_exact(d2.matrix(), a.matrix(), t, big_k);
    let n = d2.dim();
    let total = terms.iter().fold(CMat::zeros(n, n), |acc, w| acc + w);
    Ok(VolterraResult {
        value: OperatorValue::new(total),
        terms_used: big_k + 1,
        tail_bound: tail,
    })
}

/// Individual Volterra terms `W_0(t), …, W_K(t)` by one block exponential.
pub fn volterra_terms_exact(d2: &CMat, a: &CMat, t: f64, big_k: usize) -> Vec<CMat> {
    let n = d2.nrows();
    let m = big_k + 1;
    let mut big = CMat::zeros(m * n, m * n);
    for k in 0..m {
        big.view_mut((k * n, k * n), (n, n)).copy_from(&(d2 * c(-t, 0.0)));
        if k + 1 < m {
            big.view_mut((k * n, (k + 1) * n), (n, n)).copy_from(&(a * c(-t, 0.0)));
        }
    }
    let ex = linalg::expm(&big);
    (0..m).map(|k| ex.view((0, k * n), (n, n)).into_owned()).collect()
}

/// Large-time variant: the series at `t / 2^m` (with `t‖A‖/2^m ≤ 2`) squared `m` times.
pub fn volterra_heat_squaring(d2: &OperatorValue, a: &OperatorValue, t: f64, tol: f64) -> Result<VolterraResult> {
    let norm_a = linalg::opnorm(a.matrix());
    let mut m = 0u32;
    while t * norm_a / 2f64.powi(m as i32) > 2.0 {
        m += 1;
    }
    let steps = 2f64.powi(m as i32);
    let base = volterra_heat(d2, a, t / steps, tol / steps)?;
    let mut q = base.value.into_matrix();
    for _ in 0..m {
        q = &q * &q;
    }
    Ok(VolterraResult {
        value: OperatorValue::new(q),
        terms_used: base.terms_used,
        tail_bound: base.tail_bound * steps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport {
    pub defect: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `‖e^{-δ(D+C)²} K − K‖` against `δ M' ‖(D+C)² K‖ + (1 − e^{-δ}) ‖K‖`.
pub fn small_time_defect(
    k: &OperatorValue,
    d: &OperatorValue,
    cpert: &OperatorValue,
    delta: f64,
    m_prime: f64,
) -> Result<DefectReport> {
    if !(delta >= 0.0) {
        return Err(ForgeError::InvalidArgument("delta must be nonnegative".into()));
    }
    let n = d.dim();
    if cpert.dim() != n || k.dim() != n {
        return Err(ForgeError::DimensionMismatch {
            expected: n,
            found: if cpert.dim() != n { cpert.dim() } else { k.dim() },
        });
    }
    let s = d.matrix() + cpert.matrix();
    let s2 = &s * &s;
    let km = k.matrix();
    let heat = Eigh::new(&s2).apply(|x| c((-delta * x).exp(), 0.0));
    let defect = linalg::opnorm(&(&heat * km - km));
    let bound = delta * m_prime * linalg::opnorm(&(&s2 * km)) + (1.0 - (-delta).exp()) * linalg::opnorm(km);
    Ok(DefectReport {
        defect,
        bound,
        holds: defect <= bound * (1.0 + 1e-12) + 1e-15,
    })
}

/// A model on `E⁺ ⊕ E⁻` generated by the block-diagonal unitaries `U⁺ ⊕ U⁻`.
pub fn graded_model(plus: &[CMat], minus: &[CMat], g_index: usize) -> Result<EquivariantModel> {
    if plus.len() != minus.len() {
        return Err(ForgeError::InvalidArgument(
            "graded generators must come in pairs".into(),
        ));
    }
    let gens: Vec<CMat> = plus
        .iter()
        .zip(minus)
        .map(|(p, m)| linalg::direct_sum(p, m))
        .collect();
    crate::opmodel::build_group_model(&gens, g_index)
}

#[derive(Clone, Debug)]
pub struct SupertraceReport {
    pub rows: Vec<(f64, C64)>,
    pub index: C64,
    pub variation: f64,
}

/// `τ_g(e^{-tA⁻A⁺}) − τ_g(e^{-tA⁺A⁻})` over `t_grid`, with the kernel index
/// `τ_g(Π_{ker A⁺}) − τ_g(Π_{ker A⁻})`. `model` acts on `E⁺ ⊕ E⁻` by block-diagonal
/// unitaries, `E⁺` having dimension `A⁺.ncols()`.
pub fn mckean_singer(a_plus: &CMat, model: &EquivariantModel, t_grid: &[f64]) -> Result<SupertraceReport> {
    let (nm, np) = a_plus.shape();
    if model.dim() != np + nm {
        return Err(ForgeError::DimensionMismatch {
            expected: model.dim(),
            found: np + nm,
        });
    }
    let mut residual = 0.0_f64;
    for u in model.elements() {
        let up = u.view((0, 0), (np, np));
        let um = u.view((np, np), (nm, nm));
        residual = residual.max(linalg::fro(&(um * a_plus - a_plus * up)));
    }
    if residual > 1e-10 * linalg::fro(a_plus).max(1.0) {
        return Err(ForgeError::NotEquivariant { residual });
    }
    let a_minus = a_plus.adjoint();
    let x = Eigh::new(&(&a_minus * a_plus));
    let y = Eigh::new(&(a_plus * &a_minus));
    let super_of = |p: &CMat, m: &CMat| {
        let block = linalg::direct_sum(p, &(-m));
        model.tau_unchecked(&block)
    };
    let scale = x.spectral_radius().max(1.0);
    let ker = |e: &Eigh| e.apply(|l| c(if l.abs() <= 1e-10 * scale { 1.0 } else { 0.0 }, 0.0));
    let index = super_of(&ker(&x), &ker(&y));
    let rows: Vec<(f64, C64)> = t_grid
        .iter()
        .map(|&t| {
            let hp = x.apply(|l| c((-t * l).exp(), 0.0));
            let hm = y.apply(|l| c((-t * l).exp(), 0.0));
            (t, super_of(&hp, &hm))
        })
        .collect();
    let mut variation = 0.0_f64;
    for (_, a) in &rows {
        for (_, b) in &rows {
            variation = variation.max((a - b).norm());
        }
    }
    Ok(SupertraceReport {
        rows,
        index,
        variation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag_real;

    #[test]
    fn perturbed_square_identities() {
        let d = OperatorValue::from_real_diag(&[1.0, -2.0]);
        let z = OperatorValue::from_real_diag(&[0.0, 0.0]);
        let (_, a) = perturbed_square(&d, &z).unwrap();
        assert_eq!(linalg::fro(a.matrix()), 0.0);
        let cm = OperatorValue::new(linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.5]]));
        let (_, a) = perturbed_square(&z, &cm).unwrap();
        assert!(linalg::dist(a.matrix(), &(cm.matrix() * cm.matrix())) < 1e-15);
    }

    #[test]
    fn unperturbed_is_plain_heat() {
        let d2 = OperatorValue::from_real_diag(&[0.5, 2.0]);
        let a = OperatorValue::new(CMat::zeros(2, 2));
        let r = volterra_heat(&d2, &a, 1.3, 1e-10).unwrap();
        assert_eq!(r.terms_used, 1);
        let want = diag_real(&[(-0.65f64).exp(), (-2.6f64).exp()]);
        assert!(linalg::dist(r.value.matrix(), &want) < 1e-14);
    }

    #[test]
    fn scalar_perturbation_sums_exponential() {
        let d2 = OperatorValue::new(CMat::zeros(2, 2));
        let a = OperatorValue::new(linalg::identity(2) * c(0.7, 0.0));
        let r = volterra_heat(&d2, &a, 2.0, 1e-12).unwrap();
        let want = linalg::identity(2) * c((-1.4f64).exp(), 0.0);
        assert!(linalg::dist(r.value.matrix(), &want) <= 2e-12);
        assert!(r.tail_bound <= 1e-12);
    }

    #[test]
    fn term_cap_is_enforced() {
        let d2 = OperatorValue::new(CMat::zeros(1, 1));
        let a = OperatorValue::new(linalg::identity(1) * c(30.0, 0.0));
        assert!(matches!(
            volterra_heat(&d2, &a, 1.0, 1e-8),
            Err(ForgeError::TermCapExceeded { cap: 40, .. })
        ));
    }

    #[test]
    fn tail_matches_exponential_remainder() {
        let x = 0.8f64;
        let partial: f64 = (0..=3).map(|k| x.powi(k) / (1..=k).product::<i32>().max(1) as f64).sum();
        assert!((exp_tail(x, 3) - (x.exp() - partial)).abs() < 1e-15);
    }

    #[test]
    fn small_time_defect_diagonal() {
        let d = OperatorValue::from_real_diag(&[0.0, 1.0]);
        let z = OperatorValue::from_real_diag(&[0.0, 0.0]);
        let k = OperatorValue::new(linalg::identity(2));
        let r = small_time_defect(&k, &d, &z, 0.1, 1.0).unwrap();
        assert!((r.defect - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
        assert!(r.holds);
        assert_eq!(small_time_defect(&k, &d, &z, 0.0, 1.0).unwrap().defect, 0.0);
    }

    #[test]
    fn mckean_singer_rectangular_index_one() {
        let a_plus = linalg::from_real_rows(&[&[0.0, 1.0]]);
        let model = graded_model(&[diag_real(&[1.0, -1.0])], &[diag_real(&[-1.0])], 0).unwrap();
        let r = mckean_singer(&a_plus, &model, &[0.0, 0.5, 1.0, 4.0]).unwrap();
        for (_, v) in &r.rows {
            assert!((v - c(1.0, 0.0)).norm() < 1e-14);
        }
        assert!((r.index - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn mckean_singer_invertible_and_zero() {
        let model = graded_model(&[linalg::identity(2)], &[linalg::identity(2)], 0).unwrap();
        let r = mckean_singer(&linalg::identity(2), &model, &[0.1, 1.0]).unwrap();
        assert!(r.rows.iter().all(|(_, v)| v.norm() < 1e-14));
        let model = graded_model(&[linalg::identity(2)], &[linalg::identity(1)], 0).unwrap();
        let r = mckean_singer(&CMat::zeros(1, 2), &model, &[0.1, 1.0]).unwrap();
        assert!(r.rows.iter().all(|(_, v)| (v - c(1.0, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn mckean_singer_rejects_non_equivariant() {
        let a_plus = linalg::from_real_rows(&[&[1.0, 0.0]]);
        let model = graded_model(&[diag_real(&[1.0, -1.0])], &[diag_real(&[-1.0])], 0).unwrap();
        assert!(matches!(
            mckean_singer(&a_plus, &model, &[1.0]),
            Err(ForgeError::NotEquivariant { .. })
        ));
    }
}
