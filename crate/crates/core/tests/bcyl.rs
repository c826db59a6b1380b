use std::f64::consts::PI;

use eta_forge::bcyl::{
    eqfe_check, eta_cocycle_integral, key_lemma_check, make_indicial, rt_family, rt_family_spectral,
    sigma_pairing, zeta_sweep, Grid2d,
};
use eta_forge::eta::{eta_oracle, EtaQuadrature};
use eta_forge::exec::Exec;
use eta_forge::linalg::{self, c, diag, diag_real, CMat, C64};
use eta_forge::opmodel::{build_group_model, random_equivariant_hermitian, EquivariantModel, OperatorValue};
use eta_forge::zoo::{random_boundary_pair, random_model_of_dim};

fn theta_model(theta: f64) -> EquivariantModel {
    build_group_model(&[diag(&[c(1.0, 0.0), C64::from_polar(1.0, theta)])], 0).unwrap()
}

#[test]
fn key_lemma_diagonal_twisted() {
    let theta = 2.0 * PI / 3.0;
    let model = theta_model(theta);
    let d = OperatorValue::from_real_diag(&[1.0, -2.0]);
    let z = OperatorValue::from_real_diag(&[0.0, 0.0]);
    let ind = make_indicial(&d, &z, None, &model).unwrap();
    let r = key_lemma_check(&ind, &model, Grid2d::default(), &EtaQuadrature::default(), Exec::Parallel).unwrap();
    let want = (c(1.0, 0.0) - C64::from_polar(1.0, theta)) * c(-0.5, 0.0);
    assert!((r.rhs - want).norm() < 1e-12);
    assert!(r.gap <= 1e-3 * (1.0 + r.rhs.norm()));
}

#[test]
fn key_lemma_noncommuting_two_by_two() {
    // scalar action: C commutes with U_g but not with D
    let model = build_group_model(&[diag(&[c(0.0, 1.0), c(0.0, 1.0)])], 0).unwrap();
    let d = OperatorValue::from_real_diag(&[0.8, -1.5]);
    let cp = OperatorValue::new(linalg::from_real_rows(&[&[0.1, 0.4], &[0.4, 0.3]]));
    let ind = make_indicial(&d, &cp, None, &model).unwrap();
    let r = key_lemma_check(&ind, &model, Grid2d::default(), &EtaQuadrature::default(), Exec::Parallel).unwrap();
    assert!(r.gap <= 1e-3 * (1.0 + r.rhs.norm()), "{r:?}");
}

#[test]
fn key_lemma_random_converges_under_refinement() {
    let model = random_model_of_dim(1, 4);
    let (d, cp) = random_boundary_pair(&model, 1, 0.5, 0.1);
    let ind = make_indicial(&d, &cp, None, &model).unwrap();
    let q = EtaQuadrature::default();
    let coarse = key_lemma_check(&ind, &model, Grid2d::default().scaled(0.5), &q, Exec::Parallel).unwrap();
    let fine = key_lemma_check(&ind, &model, Grid2d::default(), &q, Exec::Parallel).unwrap();
    assert!(fine.gap <= 1e-3 * (1.0 + fine.rhs.norm()));
    assert!(fine.gap <= coarse.gap.max(1e-12));
}

#[test]
fn parallel_and_sequential_agree_bitwise() {
    let model = random_model_of_dim(2, 3);
    let (d, cp) = random_boundary_pair(&model, 2, 0.4, 0.1);
    let ind = make_indicial(&d, &cp, None, &model).unwrap();
    let g = Grid2d { t: 48, lambda: 48 };
    let a = eta_cocycle_integral(&ind, &model, g, Exec::Parallel).unwrap();
    let b = eta_cocycle_integral(&ind, &model, g, Exec::Sequential).unwrap();
    assert_eq!(a.value, b.value);
}

#[test]
fn eqfe_on_grids() {
    for seed in 0..3u64 {
        let model = random_model_of_dim(seed, 4);
        let (d, cp) = random_boundary_pair(&model, seed, 0.5, 0.1);
        let ind = make_indicial(&d, &cp, None, &model).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let t = 0.2 + 0.7 * i as f64;
                let l = -3.0 + 1.5 * j as f64;
                let r = eqfe_check(&ind, &model, t, l);
                assert!(r.residual <= 1e-8 * (1.0 + r.rhs.norm()), "seed {seed} ({t},{l})");
            }
        }
        // at λ = 0 the profile is flat and the right side reduces to B(0)
        let r = eqfe_check(&ind, &model, 0.9, 0.0);
        let b0 = ind.b(0.0);
        let e = linalg::expm(&(&b0 * &b0 * c(-0.81, 0.0)));
        let want = model.tau_unchecked(&(e * &b0)) * c(0.0, -1.8);
        assert!((r.rhs - want).norm() < 1e-12);
    }
}

#[test]
fn rt_family_idempotent_and_decaying() {
    let model = random_model_of_dim(3, 4);
    let (d, cp) = random_boundary_pair(&model, 3, 0.5, 0.1);
    let ind = make_indicial(&d, &cp, None, &model).unwrap();
    let e1 = linalg::direct_sum(&CMat::zeros(4, 4), &linalg::identity(4));
    for &t in &[1e-3, 0.1, 1.0, 5.0] {
        for &l in &[-6.0, -0.5, 0.0, 0.3, 2.0] {
            let r = rt_family(&ind, t, l).r;
            assert!(linalg::opnorm(&(&r * &r - &r)) <= 1e-10);
        }
    }
    let far = rt_family_spectral(&ind, 1.0, 40.0).r;
    assert!(linalg::opnorm(&(far - &e1)) <= 1e-12);
    let late = rt_family_spectral(&ind, 200.0, 0.0).r;
    assert!(linalg::opnorm(&(late - &e1)) <= 1e-12);
}

#[test]
fn zeta_without_perturbation_is_flat() {
    let model = theta_model(2.0 * PI / 5.0);
    let d = OperatorValue::from_real_diag(&[0.7, -1.2]);
    let z = OperatorValue::from_real_diag(&[0.0, 0.0]);
    let ind = make_indicial(&d, &z, None, &model).unwrap();
    let s = zeta_sweep(&ind, &model, &[0.0, 0.5, 1.0], Grid2d::default(), &EtaQuadrature::default(), Exec::Parallel)
        .unwrap();
    assert!(s.variation < 1e-12);
    let half_eta = eta_oracle(&d, &model).unwrap() * c(0.5, 0.0);
    assert!((s.rows[0].1.value - half_eta).norm() < 1e-10);
}

#[test]
fn zeta_scalar_endpoint_and_constancy() {
    let model = EquivariantModel::trivial(1);
    let d = OperatorValue::from_real_diag(&[-0.6]);
    let cp = OperatorValue::from_real_diag(&[1.4]);
    let ind = make_indicial(&d, &cp, None, &model).unwrap();
    let grid: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
    let s = zeta_sweep(&ind, &model, &grid, Grid2d::default(), &EtaQuadrature::default(), Exec::Parallel).unwrap();
    assert!((s.zeta0_closed - c(0.5, 0.0)).norm() < 1e-12);
    assert!((s.rows[0].1.value - s.zeta0_closed).norm() < 1e-10);
    assert!(s.variation <= 1e-3 * (1.0 + s.zeta0_closed.norm()));
    // ζ(1) is minus the cocycle integral
    let k = eta_cocycle_integral(&ind, &model, Grid2d::default(), Exec::Parallel).unwrap();
    assert!((s.rows[4].1.value + k.value).norm() < 1e-8);
}

#[test]
fn cocycle_integrand_vanishes_far_out() {
    let model = random_model_of_dim(4, 3);
    let (d, cp) = random_boundary_pair(&model, 4, 0.4, 0.1);
    let ind = make_indicial(&d, &cp, None, &model).unwrap();
    let r = eqfe_check(&ind, &model, 1.0, 8.0);
    assert!(r.lhs.norm() < 1e-14);
}

#[test]
fn sigma_random_pair_antisymmetric() {
    for seed in 0..4u64 {
        let model = random_model_of_dim(seed, 3);
        let m0 = random_equivariant_hermitian(&model, seed, 1.0).into_matrix();
        let m1 = random_equivariant_hermitian(&model, seed + 1, 1.0).into_matrix();
        let fam = |a: f64, m: CMat, k: CMat| {
            move |l: f64| {
                let g = (-a * l * l).exp();
                let v = (&m + &k * c(l, 0.0)) * c(g, 0.0);
                let dv = &k * c(g, 0.0) + (&m + &k * c(l, 0.0)) * c(-2.0 * a * l * g, 0.0);
                (v, dv)
            }
        };
        let f0 = fam(0.7, m0.clone(), m1.clone());
        let f1 = fam(1.1, m1.clone(), &m0 * &m1 + &m1 * &m0);
        let s01 = sigma_pairing(&f0, &f1, &model, 9.0, 256).unwrap();
        let s10 = sigma_pairing(&f1, &f0, &model, 9.0, 256).unwrap();
        assert!((s01 + s10).norm() <= 1e-8);
    }
    // a family constant in λ has zero derivative, so σ vanishes
    let model = EquivariantModel::trivial(1);
    let f0 = |l: f64| (diag_real(&[0.0 * l]), diag_real(&[0.0]));
    let f1 = |l: f64| (diag_real(&[(-l * l).exp()]), diag_real(&[-2.0 * l * (-l * l).exp()]));
    assert!(sigma_pairing(&f0, &f1, &model, 8.0, 128).unwrap().norm() == 0.0);
}
