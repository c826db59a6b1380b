//! Finite equivariant operator models and the delocalized (g-twisted) trace.
//!
//! A finite group acts on `C^dim` through unitary matrices. For a distinguished
//! element `g` the delocalized trace of an operator is the coset sum
//! `τ_g(T) = Σ_{h ∈ Γ/Z_g} tr(U_{hgh⁻¹} T)`, one unit weight per coset of the
//! centralizer `Z_g`.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ForgeError, Result};
use crate::linalg::{self, c, CMat, Eigh, C64};

pub const DEFAULT_GROUP_CAP: usize = 10_000;
/// Tolerance for matrix identities between group elements.
pub const GROUP_TOL: f64 = 1e-10;

/// A finite symmetry group acting by unitaries, with a distinguished element.
#[derive(Clone, Debug)]
pub struct EquivariantModel {
    dim: usize,
    generators: Vec<CMat>,
    group: Vec<CMat>,
    inverse: Vec<usize>,
    g_index: usize,
    centralizer: Vec<usize>,
    coset_reps: Vec<usize>,
    conjugates: Vec<usize>,
    twist: CMat,
}

/// Bucketed lookup of group elements by a linear fingerprint.
struct ElementIndex {
    weights: CMat,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl ElementIndex {
    const GRID: f64 = 1e-6;

    fn new(dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
        ElementIndex {
            weights: linalg::random_complex(&mut rng, dim, dim),
            buckets: HashMap::new(),
        }
    }

    fn key(&self, m: &CMat) -> (f64, f64) {
        let z: C64 = m.iter().zip(self.weights.iter()).map(|(a, w)| a * w).sum();
        (z.re / Self::GRID, z.im / Self::GRID)
    }

    fn find(&self, m: &CMat, elems: &[CMat]) -> Option<usize> {
        let (x, y) = self.key(m);
        let (bx, by) = (x.round() as i64, y.round() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = self.buckets.get(&(bx + dx, by + dy)) {
                    for &k in list {
                        if linalg::dist(&elems[k], m) <= GROUP_TOL {
                            return Some(k);
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, m: &CMat, idx: usize) {
        let (x, y) = self.key(m);
        self.buckets
            .entry((x.round() as i64, y.round() as i64))
            .or_default()
            .push(idx);
    }
}

pub fn unitarity_residual(u: &CMat) -> f64 {
    linalg::dist(&(u.adjoint() * u), &linalg::identity(u.nrows()))
}

/// Close the generators under products, then compute the centralizer of the
/// generator `generators[g_index]` and representatives of `Γ/Z_g`.
pub fn build_group_model(generators: &[CMat], g_index: usize) -> Result<EquivariantModel> {
    build_group_model_with_cap(generators, g_index, DEFAULT_GROUP_CAP)
}

pub fn build_group_model_with_cap(
    generators: &[CMat],
    g_index: usize,
    cap: usize,
) -> Result<EquivariantModel> {
    let first = generators
        .first()
        .ok_or_else(|| ForgeError::InvalidArgument("no generators".into()))?;
    let dim = first.nrows();
    if g_index >= generators.len() {
        return Err(ForgeError::InvalidArgument(format!(
            "g_index {g_index} out of range for {} generators",
            generators.len()
        )));
    }
    for (index, u) in generators.iter().enumerate() {
        if u.nrows() != dim || u.ncols() != dim {
            return Err(ForgeError::DimensionMismatch {
                expected: dim,
                found: u.nrows().max(u.ncols()),
            });
        }
        let residual = unitarity_residual(u);
        if residual > GROUP_TOL {
            return Err(ForgeError::NotUnitary { index, residual });
        }
    }

    let mut index = ElementIndex::new(dim);
    let mut group = vec![linalg::identity(dim)];
    index.insert(&group[0], 0);
    let mut cursor = 0;
    while cursor < group.len() {
        for s in generators {
            let p = s * &group[cursor];
            if index.find(&p, &group).is_none() {
                if group.len() >= cap {
                    return Err(ForgeError::ClosureExceeded { cap });
                }
                index.insert(&p, group.len());
                group.push(p);
            }
        }
        cursor += 1;
    }

    let lookup = |m: &CMat| -> Result<usize> {
        index.find(m, &group).ok_or_else(|| {
            ForgeError::InvalidArgument("group table lookup failed; closure inconsistent".into())
        })
    };
    let mut inverse = Vec::with_capacity(group.len());
    for u in &group {
        inverse.push(lookup(&u.adjoint())?);
    }
    let g = lookup(&generators[g_index])?;
    finish_model(dim, generators.to_vec(), group, inverse, g)
}

fn finish_model(
    dim: usize,
    generators: Vec<CMat>,
    group: Vec<CMat>,
    inverse: Vec<usize>,
    g_index: usize,
) -> Result<EquivariantModel> {
    let ug = &group[g_index];
    let centralizer: Vec<usize> = (0..group.len())
        .filter(|&h| linalg::fro(&linalg::commutator(&group[h], ug)) <= GROUP_TOL)
        .collect();

    // Left cosets hZ_g: representatives are the first elements not yet covered.
    let mut covered = vec![false; group.len()];
    let mut coset_reps = Vec::new();
    let mut conjugates = Vec::new();
    let index = {
        let mut idx = ElementIndex::new(dim);
        for (k, u) in group.iter().enumerate() {
            idx.insert(u, k);
        }
        idx
    };
    for h in 0..group.len() {
        if covered[h] {
            continue;
        }
        coset_reps.push(h);
        for &z in &centralizer {
            let hz = &group[h] * &group[z];
            let k = index.find(&hz, &group).ok_or_else(|| {
                ForgeError::InvalidArgument("coset product outside the group".into())
            })?;
            covered[k] = true;
        }
        let conj = &group[h] * ug * &group[inverse[h]];
        conjugates.push(index.find(&conj, &group).ok_or_else(|| {
            ForgeError::InvalidArgument("conjugate outside the group".into())
        })?);
    }
    let mut twist = CMat::zeros(dim, dim);
    for &k in &conjugates {
        twist += &group[k];
    }
    Ok(EquivariantModel {
        dim,
        generators,
        group,
        inverse,
        g_index,
        centralizer,
        coset_reps,
        conjugates,
        twist,
    })
}

impl EquivariantModel {
    /// The trivial group acting on `C^dim`; τ_g is the ordinary trace.
    pub fn trivial(dim: usize) -> Self {
        build_group_model(&[linalg::identity(dim)], 0).expect("identity generates a group")
    }

    /// Cyclic group of order `n` generated by `diag(exp(2πi w_k / n))`, with
    /// `g` the `power`-th power of the generator.
    pub fn cyclic(n: usize, weights: &[i64], power: usize) -> Result<Self> {
        if n == 0 {
            return Err(ForgeError::InvalidArgument("cyclic order must be positive".into()));
        }
        let gen = linalg::diag(
            &weights
                .iter()
                .map(|&w| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * w as f64 / n as f64))
                .collect::<Vec<_>>(),
        );
        let mut g = linalg::identity(weights.len());
        for _ in 0..power % n {
            g = &g * &gen;
        }
        build_group_model(&[g, gen], 0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.group.len()
    }

    pub fn elements(&self) -> &[CMat] {
        &self.group
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    pub fn g_index(&self) -> usize {
        self.g_index
    }

    pub fn g(&self) -> &CMat {
        &self.group[self.g_index]
    }

    pub fn inverse_of(&self, k: usize) -> usize {
        self.inverse[k]
    }

    pub fn centralizer(&self) -> &[usize] {
        &self.centralizer
    }

    pub fn coset_reps(&self) -> &[usize] {
        &self.coset_reps
    }

    /// `Σ_{h ∈ reps} U_{hgh⁻¹}`, so that `τ_g(T) = tr(twist · T)`.
    pub fn twist(&self) -> &CMat {
        &self.twist
    }

    /// Index of a group element equal to `m`, if any.
    pub fn find(&self, m: &CMat) -> Option<usize> {
        self.group.iter().position(|u| linalg::dist(u, m) <= GROUP_TOL)
    }

    /// The same group with a different distinguished element.
    pub fn with_g(&self, g_index: usize) -> Result<Self> {
        if g_index >= self.group.len() {
            return Err(ForgeError::InvalidArgument(format!(
                "element {g_index} out of range"
            )));
        }
        finish_model(
            self.dim,
            self.generators.clone(),
            self.group.clone(),
            self.inverse.clone(),
            g_index,
        )
    }

    pub fn with_g_inverse(&self) -> Result<Self> {
        self.with_g(self.inverse[self.g_index])
    }

    /// Diagonal action on `V ⊕ W`, generator by generator.
    pub fn direct_sum(&self, other: &EquivariantModel) -> Result<Self> {
        if self.generators.len() != other.generators.len() {
            return Err(ForgeError::InvalidArgument(
                "direct sum needs matching generator lists".into(),
            ));
        }
        let gens: Vec<CMat> = self
            .generators
            .iter()
            .zip(&other.generators)
            .map(|(a, b)| linalg::direct_sum(a, b))
            .collect();
        let g_gen = self
            .generators
            .iter()
            .zip(&other.generators)
            .position(|(a, b)| {
                linalg::dist(a, self.g()) <= GROUP_TOL && linalg::dist(b, other.g()) <= GROUP_TOL
            });
        match g_gen {
            Some(k) => build_group_model(&gens, k),
            None => {
                let g = linalg::direct_sum(self.g(), other.g());
                let mut all = gens;
                all.insert(0, g);
                build_group_model(&all, 0)
            }
        }
    }

    /// Action `U ⊗ I_m` on `C^dim ⊗ C^m`.
    pub fn tensor_identity(&self, m: usize) -> Result<Self> {
        let gens: Vec<CMat> = self
            .generators
            .iter()
            .map(|u| linalg::kron_identity(u, m))
            .collect();
        let g = linalg::kron_identity(self.g(), m);
        let mut all = vec![g];
        all.extend(gens);
        build_group_model(&all, 0)
    }

    /// Restriction to the leading `k` coordinates; every unitary must be block
    /// diagonal with respect to `C^k ⊕ C^{dim-k}`.
    pub fn restrict_leading(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim {
            return Err(ForgeError::InvalidArgument(format!("cannot restrict to {k}")));
        }
        let mut gens = Vec::new();
        for u in &self.generators {
            let off = linalg::fro(&u.view((0, k), (k, self.dim - k)).into_owned())
                + linalg::fro(&u.view((k, 0), (self.dim - k, k)).into_owned());
            if off > GROUP_TOL {
                return Err(ForgeError::InvalidArgument(
                    "action does not preserve the splitting".into(),
                ));
            }
            gens.push(u.view((0, 0), (k, k)).into_owned());
        }
        let g = self.g().view((0, 0), (k, k)).into_owned();
        let mut all = vec![g];
        all.extend(gens);
        build_group_model(&all, 0)
    }

    /// Restriction to the trailing `dim - k` coordinates.
    pub fn restrict_trailing(&self, k: usize) -> Result<Self> {
        let n = self.dim;
        if k >= n {
            return Err(ForgeError::InvalidArgument(format!("cannot restrict past {k}")));
        }
        let mut gens = Vec::new();
        for u in &self.generators {
            let off = linalg::fro(&u.view((0, k), (k, n - k)).into_owned())
                + linalg::fro(&u.view((k, 0), (n - k, k)).into_owned());
            if off > GROUP_TOL {
                return Err(ForgeError::InvalidArgument(
                    "action does not preserve the splitting".into(),
                ));
            }
            gens.push(u.view((k, k), (n - k, n - k)).into_owned());
        }
        let g = self.g().view((k, k), (n - k, n - k)).into_owned();
        let mut all = vec![g];
        all.extend(gens);
        build_group_model(&all, 0)
    }

    /// Group average `|Γ|⁻¹ Σ U X U*`, the projection onto equivariant maps.
    pub fn average(&self, x: &CMat) -> CMat {
        let mut acc = CMat::zeros(self.dim, self.dim);
        for u in &self.group {
            acc += u * x * u.adjoint();
        }
        acc * c(1.0 / self.group.len() as f64, 0.0)
    }

    fn check_dim(&self, m: &CMat) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(ForgeError::DimensionMismatch {
                expected: self.dim,
                found: if m.nrows() != self.dim { m.nrows() } else { m.ncols() },
            });
        }
        Ok(())
    }

    /// Individual summands `tr(U_{hgh⁻¹} T)`, one per coset representative.
    pub fn trace_summands(&self, t: &CMat) -> Result<Vec<C64>> {
        self.check_dim(t)?;
        Ok(self
            .conjugates
            .iter()
            .map(|&k| (&self.group[k] * t).trace())
            .collect())
    }

    /// τ_g(T) without dimension checks, for hot loops.
    pub fn tau_unchecked(&self, t: &CMat) -> C64 {
        let n = self.dim;
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.twist[(i, k)] * t[(k, i)];
            }
        }
        acc
    }
}

/// Flags and optional grading attached to an operator matrix.
#[derive(Clone, Debug)]
pub struct OperatorValue {
    matrix: CMat,
    hermitian: bool,
    equivariant: bool,
    grading: Option<CMat>,
    odd: bool,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const EQUIVARIANCE_TOL: f64 = 1e-10;

fn scale_of(m: &CMat) -> f64 {
    linalg::fro(m).max(f64::MIN_POSITIVE)
}

pub fn require_hermitian(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(ForgeError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let residual = linalg::hermitian_residual(m);
    if residual > HERMITIAN_TOL * scale_of(m) {
        return Err(ForgeError::NotHermitian { residual });
    }
    Ok(())
}

impl OperatorValue {
    /// An operator with no structural claims.
    pub fn new(matrix: CMat) -> Self {
        OperatorValue {
            matrix,
            hermitian: false,
            equivariant: false,
            grading: None,
            odd: false,
        }
    }

    pub fn hermitian(matrix: CMat) -> Result<Self> {
        require_hermitian(&matrix)?;
        Ok(OperatorValue {
            hermitian: true,
            ..OperatorValue::new(matrix)
        })
    }

    pub fn from_real_diag(values: &[f64]) -> Self {
        OperatorValue {
            hermitian: true,
            ..OperatorValue::new(linalg::diag_real(values))
        }
    }

    /// Verify and record equivariance under `model`.
    pub fn equivariant_in(mut self, model: &EquivariantModel) -> Result<Self> {
        let residual = check_equivariance(model, &self)?;
        if residual > EQUIVARIANCE_TOL * scale_of(&self.matrix) {
            return Err(ForgeError::NotEquivariant { residual });
        }
        self.equivariant = true;
        Ok(self)
    }

    /// Attach an involutive grading; when `odd`, the operator must anticommute with it.
    pub fn with_grading(mut self, grading: CMat, odd: bool) -> Result<Self> {
        let n = self.dim();
        if grading.nrows() != n || grading.ncols() != n {
            return Err(ForgeError::DimensionMismatch {
                expected: n,
                found: grading.nrows(),
            });
        }
        let inv = linalg::dist(&(&grading * &grading), &linalg::identity(n));
        if inv > HERMITIAN_TOL * n as f64 {
            return Err(ForgeError::InvalidArgument(format!(
                "grading is not an involution (residual {inv:.3e})"
            )));
        }
        if odd {
            let residual = linalg::fro(&linalg::anticommutator(&grading, &self.matrix));
            if residual > HERMITIAN_TOL * scale_of(&self.matrix) {
                return Err(ForgeError::NotOdd { residual });
            }
        }
        self.grading = Some(grading);
        self.odd = odd;
        Ok(self)
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_equivariant(&self) -> bool {
        self.equivariant
    }

    pub fn grading(&self) -> Option<&CMat> {
        self.grading.as_ref()
    }

    pub fn is_odd(&self) -> bool {
        self.odd
    }
}

/// τ_g(T) as the coset sum. For equivariant `T` every summand equals `tr(U_g T)`.
pub fn delocalized_trace(model: &EquivariantModel, t: &OperatorValue) -> Result<C64> {
    let summands = model.trace_summands(t.matrix())?;
    Ok(summands.iter().sum())
}

/// `max_γ ‖[T, U_γ]‖` in Frobenius norm.
pub fn check_equivariance(model: &EquivariantModel, t: &OperatorValue) -> Result<f64> {
    model.check_dim(t.matrix())?;
    Ok(model
        .elements()
        .iter()
        .map(|u| linalg::fro(&linalg::commutator(t.matrix(), u)))
        .fold(0.0, f64::max))
}

pub fn is_equivariant(model: &EquivariantModel, t: &OperatorValue) -> Result<bool> {
    Ok(check_equivariance(model, t)? <= EQUIVARIANCE_TOL * scale_of(t.matrix()))
}

/// A seeded Hermitian matrix averaged over the group and rescaled so its
/// spectral radius equals `spectral_scale`.
pub fn random_equivariant_hermitian(
    model: &EquivariantModel,
    seed: u64,
    spectral_scale: f64,
) -> OperatorValue {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = linalg::random_hermitian(&mut rng, model.dim());
    let avg = model.average(&h);
    let avg = (&avg + avg.adjoint()) * c(0.5, 0.0);
    let radius = Eigh::new(&avg).spectral_radius();
    let m = if radius > 0.0 {
        avg * c(spectral_scale / radius, 0.0)
    } else {
        avg
    };
    OperatorValue {
        matrix: m,
        hermitian: true,
        equivariant: true,
        grading: None,
        odd: false,
    }
}

/// Spectral sign with `sign(0) = 0`, the kernel projector and the smallest
/// nonzero |eigenvalue| (`+∞` when there is none).
#[derive(Clone, Debug)]
pub struct SignKernel {
    pub sign0: OperatorValue,
    pub ker_proj: OperatorValue,
    pub gap: f64,
}

pub fn default_kernel_tol(eig: &Eigh) -> f64 {
    1e-10 * eig.spectral_radius()
}

pub fn sign_and_kernel(d: &OperatorValue, kernel_tol: Option<f64>) -> Result<SignKernel> {
    require_hermitian(d.matrix())?;
    let eig = Eigh::new(d.matrix());
    Ok(sign_and_kernel_from(&eig, kernel_tol))
}

pub fn sign_and_kernel_from(eig: &Eigh, kernel_tol: Option<f64>) -> SignKernel {
    let tol = kernel_tol.unwrap_or_else(|| default_kernel_tol(eig));
    let sign0 = eig.apply(|x| {
        if x.abs() <= tol {
            c(0.0, 0.0)
        } else {
            c(x.signum(), 0.0)
        }
    });
    let ker = eig.apply(|x| if x.abs() <= tol { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let gap = eig
        .values
        .iter()
        .map(|v| v.abs())
        .filter(|&a| a > tol)
        .fold(f64::INFINITY, f64::min);
    SignKernel {
        sign0: OperatorValue {
            hermitian: true,
            ..OperatorValue::new(sign0)
        },
        ker_proj: OperatorValue {
            hermitian: true,
            ..OperatorValue::new(ker)
        },
        gap,
    }
}

/// Fourier-truncated Dirac operator on the circle, `D = diag(k + shift)` for
/// `k = -K..=K`, with the rotation `U_g = diag(e^{ikα})` as distinguished element.
/// The rotation must have finite order (at most the group cap).
pub fn circle_dirac_model(
    truncation: usize,
    shift: f64,
    alpha: f64,
) -> Result<(OperatorValue, EquivariantModel)> {
    if truncation == 0 {
        return Err(ForgeError::InvalidArgument("truncation order must be ≥ 1".into()));
    }
    let k = truncation as i64;
    let ks: Vec<i64> = (-k..=k).collect();
    let d = OperatorValue::from_real_diag(&ks.iter().map(|&j| j as f64 + shift).collect::<Vec<_>>());
    let ug = linalg::diag(
        &ks.iter()
            .map(|&j| C64::from_polar(1.0, j as f64 * alpha))
            .collect::<Vec<_>>(),
    );
    let model = build_group_model(&[ug], 0)?;
    let d = OperatorValue {
        equivariant: true,
        ..d
    };
    Ok((d, model))
}
