//! Dense complex linear algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn diag_real(values: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v, 0.0)),
    ))
}

pub fn diag(values: &[C64]) -> CMat {
    CMat::from_diagonal(&DVector::from_column_slice(values))
}

/// Row-major construction from real entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMat::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm (largest singular value).
pub fn opnorm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

pub fn min_singular_value(m: &CMat) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

pub fn hermitian_residual(m: &CMat) -> f64 {
    fro(&(m - m.adjoint()))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigh {
    pub fn new(m: &CMat) -> Self {
        let herm = (m + m.adjoint()) * c(0.5, 0.0);
        let se = SymmetricEigen::new(herm);
        let n = se.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let vectors = CMat::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
        Eigh { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// V f(Λ) V*.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Dense matrix exponential (scaling and squaring with Padé, via nalgebra).
pub fn expm(m: &CMat) -> CMat {
    m.clone().exp()
}

/// Fréchet derivative of `exp` at `x` in direction `e`, read off the upper-right
/// block of `exp([[x, e], [0, x]])`.
pub fn expm_frechet(x: &CMat, e: &CMat) -> (CMat, CMat) {
    let n = x.nrows();
    let mut big = CMat::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(x);
    big.view_mut((0, n), (n, n)).copy_from(e);
    big.view_mut((n, n), (n, n)).copy_from(x);
    let ex = expm(&big);
    (
        ex.view((0, 0), (n, n)).into_owned(),
        ex.view((0, n), (n, n)).into_owned(),
    )
}

/// Assemble a 2×2 block matrix.
pub fn block2(a11: &CMat, a12: &CMat, a21: &CMat, a22: &CMat) -> CMat {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    let mut m = CMat::zeros(r1 + r2, c1 + c2);
    m.view_mut((0, 0), (r1, c1)).copy_from(a11);
    m.view_mut((0, c1), (r1, c2)).copy_from(a12);
    m.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    m.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    m
}

pub fn direct_sum(a: &CMat, b: &CMat) -> CMat {
    block2(
        a,
        &CMat::zeros(a.nrows(), b.ncols()),
        &CMat::zeros(b.nrows(), a.ncols()),
        b,
    )
}

pub fn kron_identity(a: &CMat, m: usize) -> CMat {
    let n = a.nrows();
    CMat::from_fn(n * m, n * m, |i, j| {
        if i % m == j % m {
            a[(i / m, j / m)]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn random_complex<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let a = random_complex(rng, n, n);
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Distance between matrices in Frobenius norm.
pub fn dist(a: &CMat, b: &CMat) -> f64 {
    fro(&(a - b))
}

pub fn scale(m: &CMat, s: f64) -> CMat {
    m * c(s, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let m = from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = Eigh::new(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        assert!(dist(&e.apply(|x| c(x, 0.0)), &m) < 1e-13);
    }

    #[test]
    fn frechet_matches_commuting_case() {
        let x = diag_real(&[-1.0, -2.0]);
        let (ex, l) = expm_frechet(&x, &identity(2));
        assert!(dist(&ex, &l) < 1e-13);
    }

    #[test]
    fn expm_scalar() {
        let e = expm(&diag_real(&[-1.0]));
        assert!((e[(0, 0)].re - (-1.0f64).exp()).abs() < 1e-15);
    }
}
