//! Seeded families of equivariant models and operators used by the test
//! suites, the benchmarks and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, c, CMat, Eigh, C64};
use crate::opmodel::{build_group_model, random_equivariant_hermitian, EquivariantModel, OperatorValue};

/// Generators `(i, j)` of the quaternion group in its 2-dimensional representation.
pub fn quaternion_generators() -> [CMat; 2] {
    let i = linalg::diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
    let j = linalg::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    [i, j]
}

/// Permutation matrices of the transposition (12) and the 3-cycle (123).
pub fn s3_permutation_generators() -> [CMat; 2] {
    let t = linalg::from_real_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
    let r = linalg::from_real_rows(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
    [t, r]
}

fn scalar_block(z: C64, n: usize) -> CMat {
    linalg::identity(n) * z
}

/// A seeded model with dimension at most `max_dim` (at least 2), drawn from
/// trivial, cyclic, symmetric (S3), quaternion and Klein-four actions.
pub fn random_model(seed: u64, max_dim: usize) -> EquivariantModel {
    let max_dim = max_dim.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_6465_6c00);
    match seed % 5 {
        0 => EquivariantModel::trivial(rng.gen_range(2..=max_dim)),
        1 => {
            let n = rng.gen_range(2..=5usize);
            let dim = rng.gen_range(2..=max_dim);
            let weights: Vec<i64> = (0..dim).map(|_| rng.gen_range(0..n as i64)).collect();
            let power = rng.gen_range(1..n);
            EquivariantModel::cyclic(n, &weights, power).expect("cyclic model")
        }
        2 if max_dim >= 4 => {
            let m = rng.gen_range(1..=(max_dim - 1) / 3);
            let s = rng.gen_range(1..=(max_dim - 3 * m).max(1));
            let [t, r] = s3_permutation_generators();
            let gt = linalg::direct_sum(&linalg::kron_identity(&t, m), &scalar_block(c(-1.0, 0.0), s));
            let gr = linalg::direct_sum(&linalg::kron_identity(&r, m), &linalg::identity(s));
            let g_index = rng.gen_range(0..2);
            build_group_model(&[gt, gr], g_index).expect("S3 model")
        }
        3 if max_dim >= 3 => {
            let m = rng.gen_range(1..=(max_dim - 1) / 2);
            let s = rng.gen_range(1..=(max_dim - 2 * m).max(1));
            let [i, j] = quaternion_generators();
            // 1-dimensional character: i ↦ -1, j ↦ 1
            let gi = linalg::direct_sum(&linalg::kron_identity(&i, m), &scalar_block(c(-1.0, 0.0), s));
            let gj = linalg::direct_sum(&linalg::kron_identity(&j, m), &linalg::identity(s));
            let g_index = rng.gen_range(0..2);
            build_group_model(&[gi, gj], g_index).expect("Q8 model")
        }
        _ => {
            let dim = rng.gen_range(2..=max_dim);
            let a: Vec<f64> = (0..dim).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let b: Vec<f64> = (0..dim).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            build_group_model(&[linalg::diag_real(&a), linalg::diag_real(&b)], 0).expect("Klein model")
        }
    }
}

/// A seeded model of exactly `dim` dimensions (trivial if no family member fits).
pub fn random_model_of_dim(seed: u64, dim: usize) -> EquivariantModel {
    for k in 0..2000u64 {
        let m = random_model(seed.wrapping_add(5 * k), dim);
        if m.dim() == dim {
            return m;
        }
    }
    EquivariantModel::trivial(dim)
}

/// Equivariant Hermitian pair `(D, C)` that do not commute (when the model
/// allows it), with `D + C` invertible: `σ_min(D + C) ≥ min_gap`.
pub fn random_boundary_pair(
    model: &EquivariantModel,
    seed: u64,
    c_scale: f64,
    min_gap: f64,
) -> (OperatorValue, OperatorValue) {
    let mut best = None;
    for k in 0..500u64 {
        let s = seed.wrapping_mul(104_729).wrapping_add(k);
        let d = random_equivariant_hermitian(model, s, 1.0);
        let cp = random_equivariant_hermitian(model, s ^ 0xc0ffee, c_scale);
        let sum = d.matrix() + cp.matrix();
        if min_abs_eigenvalue(&sum) < min_gap {
            continue;
        }
        let comm = linalg::fro(&linalg::commutator(d.matrix(), cp.matrix()));
        if comm > 1e-3 * c_scale {
            return (d, cp);
        }
        best.get_or_insert((d, cp));
    }
    best.expect("no invertible boundary pair found")
}

/// Smallest |eigenvalue| of a Hermitian matrix.
pub fn min_abs_eigenvalue(m: &CMat) -> f64 {
    Eigh::new(m).values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()))
}

/// Equivariant Hermitian operator of spectral radius `scale` whose smallest
/// |eigenvalue| is at least `min_gap`, found by seeded rejection.
pub fn random_invertible(model: &EquivariantModel, seed: u64, scale: f64, min_gap: f64) -> OperatorValue {
    for k in 0..10_000u64 {
        let d = random_equivariant_hermitian(model, seed.wrapping_mul(7919).wrapping_add(k), scale);
        if min_abs_eigenvalue(d.matrix()) >= min_gap {
            return d;
        }
    }
    // Fall back to pushing the spectrum away from zero.
    let d = random_equivariant_hermitian(model, seed, scale);
    let e = Eigh::new(d.matrix());
    OperatorValue::hermitian(e.apply(|x| c(if x >= 0.0 { x + min_gap } else { x - min_gap }, 0.0)))
        .expect("spectral function of Hermitian is Hermitian")
}

/// Equivariant Hermitian operator with a nontrivial kernel isolated by a gap:
/// eigenvalues with |x| below the median are sent to 0, the rest are kept and
/// pushed at least `min_gap` away from zero.
pub fn random_gapped_with_kernel(model: &EquivariantModel, seed: u64, scale: f64, min_gap: f64) -> OperatorValue {
    let d = random_equivariant_hermitian(model, seed, scale);
    let e = Eigh::new(d.matrix());
    let mut abs: Vec<f64> = e.values.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    // Cut inside a genuine spectral gap so degenerate multiplets stay together.
    let mut k = (abs.len() - 1) / 2;
    while k + 1 < abs.len() && abs[k + 1] - abs[k] <= 1e-6 * scale {
        k += 1;
    }
    let cut = if k + 1 < abs.len() { 0.5 * (abs[k] + abs[k + 1]) } else { abs[k] + 1.0 };
    let m = e.apply(|x| {
        if x.abs() <= cut {
            c(0.0, 0.0)
        } else if x > 0.0 {
            c(x.max(min_gap), 0.0)
        } else {
            c(x.min(-min_gap), 0.0)
        }
    });
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    OperatorValue::hermitian(m).expect("Hermitian by construction")
}

/// Seeded equivariant map between graded pieces: `A⁺` with `U⁻ A⁺ = A⁺ U⁺`.
pub fn random_odd_map(u_plus: &[CMat], u_minus: &[CMat], seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (np, nm) = (u_plus[0].nrows(), u_minus[0].nrows());
    let x = linalg::random_complex(&mut rng, nm, np);
    let mut acc = CMat::zeros(nm, np);
    for (up, um) in u_plus.iter().zip(u_minus) {
        acc += um * &x * up.adjoint();
    }
    acc / c(u_plus.len() as f64, 0.0)
}
