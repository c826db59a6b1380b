use eta_forge::funcalc::decay_profile;
use eta_forge::heatflow::{
    perturbed_square, small_time_defect, volterra_heat, volterra_heat_exact, volterra_heat_squaring,
};
use eta_forge::linalg::{self, c};
use eta_forge::opmodel::{random_equivariant_hermitian, OperatorValue};
use eta_forge::zoo::{random_invertible, random_model};

fn pair(seed: u64, max_dim: usize) -> (OperatorValue, OperatorValue) {
    let model = random_model(seed, max_dim);
    let d = random_invertible(&model, seed, 1.0, 0.05);
    let cp = random_equivariant_hermitian(&model, seed + 1000, 0.1);
    (d, cp)
}

fn oracle(d: &OperatorValue, cp: &OperatorValue, t: f64) -> linalg::CMat {
    let s = d.matrix() + cp.matrix();
    linalg::expm(&(&s * &s * c(-t, 0.0)))
}

#[test]
fn expansion_of_square() {
    for seed in 0..10 {
        let (d, cp) = pair(seed, 10);
        let (d2, a) = perturbed_square(&d, &cp).unwrap();
        let s = d.matrix() + cp.matrix();
        let resid = linalg::opnorm(&(&s * &s - d2.matrix() - a.matrix()));
        assert!(resid <= 1e-12 * linalg::opnorm(&s).powi(2));
    }
}

#[test]
fn collocation_matches_dense_exponential() {
    for seed in 0..12 {
        let (d, cp) = pair(seed, 16);
        let (d2, a) = perturbed_square(&d, &cp).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let r = volterra_heat(&d2, &a, t, 1e-9).unwrap();
            let err = linalg::opnorm(&(r.value.matrix() - oracle(&d, &cp, t)));
            assert!(err <= 1e-8, "seed {seed} t {t}: {err:e}");
        }
    }
}

#[test]
fn exact_route_agrees_and_respects_tail() {
    for seed in 0..12 {
        let (d, cp) = pair(seed, 12);
        let (d2, a) = perturbed_square(&d, &cp).unwrap();
        for t in [0.1, 1.0, 10.0] {
            let tol = 1e-6;
            let ex = volterra_heat_exact(&d2, &a, t, tol).unwrap();
            let col = volterra_heat(&d2, &a, t, tol).unwrap();
            let measured = linalg::opnorm(&(ex.value.matrix() - oracle(&d, &cp, t)));
            assert!(measured <= ex.tail_bound + 1e-13, "seed {seed} t {t}");
            assert!(linalg::opnorm(&(ex.value.matrix() - col.value.matrix())) <= 1e-11);
        }
    }
}

#[test]
fn semigroup_law() {
    let tol = 1e-10;
    for seed in 0..6 {
        let (d, cp) = pair(seed, 8);
        let (d2, a) = perturbed_square(&d, &cp).unwrap();
        let p = volterra_heat(&d2, &a, 0.7, tol).unwrap();
        let q = volterra_heat(&d2, &a, 1.6, tol).unwrap();
        let pq = volterra_heat(&d2, &a, 2.3, tol).unwrap();
        let resid = linalg::opnorm(&(p.value.matrix() * q.value.matrix() - pq.value.matrix()));
        assert!(resid <= 2.0 * tol, "{resid:e}");
    }
}

#[test]
fn squaring_variant_reaches_large_times() {
    let (d, cp) = pair(3, 8);
    let (d2, a) = perturbed_square(&d, &cp).unwrap();
    let r = volterra_heat_squaring(&d2, &a, 60.0, 1e-12).unwrap();
    let err = linalg::opnorm(&(r.value.matrix() - oracle(&d, &cp, 60.0)));
    assert!(err <= 1e-9, "{err:e}");
}

#[test]
fn small_time_defect_is_first_order() {
    for seed in 0..8 {
        let (d, cp) = pair(seed, 8);
        let k = random_equivariant_hermitian(&random_model(seed, 8), seed + 7, 1.0);
        let k = if k.dim() == d.dim() { k } else { OperatorValue::new(linalg::identity(d.dim())) };
        let mut ratios = vec![];
        for delta in [1e-1, 1e-2, 1e-3] {
            let r = small_time_defect(&k, &d, &cp, delta, 1.0).unwrap();
            assert!(r.holds, "seed {seed} delta {delta}: {} > {}", r.defect, r.bound);
            ratios.push(r.defect / delta);
        }
        let spread = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(spread < 10.0);
    }
}

#[test]
fn decay_is_monotone_and_bounded() {
    for seed in 0..10 {
        let (d, cp) = pair(seed, 12);
        let rows = decay_profile(&d, &cp, &[0.0, 1.0, 2.0, 4.0, 8.0]).unwrap();
        assert!(rows.iter().all(|r| r.holds));
        assert!(rows.windows(2).all(|w| w[1].norm <= w[0].norm * (1.0 + 1e-12)));
    }
}
