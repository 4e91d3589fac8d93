// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qsn::fisher::{self, min_eigenvalue, LinearReparam, Qfim, Weighting};
use qsn::netspace::{evolve, spin, GeneratorSpec, NetworkLayout, NetworkState, SensorSpace, C64};
use qsn::probes;
use qsn::Error;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn maxabs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn layout(space: SensorSpace, d: usize, spec: GeneratorSpec, anc: usize) -> Arc<NetworkLayout> {
    Arc::new(NetworkLayout::uniform(space, d, spec, anc).unwrap())
}

fn no_state(n: usize) -> NetworkState {
    probes::ghz(&layout(SensorSpace::mode(n), 1, GeneratorSpec::number(), 0), n).unwrap()
}

fn field_qubit() -> Arc<NetworkLayout> {
    let gens = [spin::sigma_x(), spin::sigma_y(), spin::sigma_z()]
        .into_iter()
        .map(|m| (0, GeneratorSpec::dense(m * c(0.5)).unwrap()))
        .collect();
    Arc::new(NetworkLayout::new(vec![SensorSpace::qubit()], gens, []).unwrap())
}

fn plus(lay: &Arc<NetworkLayout>) -> NetworkState {
    NetworkState::normalized(lay.clone(), vec![c(1.0), c(1.0)]).unwrap()
}

#[test]
fn commuting_qfim_examples() {
    let q = layout(SensorSpace::qubit(), 2, GeneratorSpec::jz(), 0);
    let f = fisher::qfim_pure_commuting(&probes::ghz(&q, 1).unwrap()).unwrap();
    assert!((f.matrix() - DMatrix::from_element(2, 2, 1.0)).amax() < 1e-12);
    assert_eq!(f.labels(), ["phi_1", "phi_2"]);

    let mut amps = vec![c(0.0); 4];
    amps[2] = c(1.0);
    let eig = NetworkState::new(q, amps).unwrap();
    assert_eq!(fisher::qfim_pure_commuting(&eig).unwrap().matrix().amax(), 0.0);

    for n in 1..=4 {
        let f = fisher::qfim_pure_commuting(&no_state(n)).unwrap();
        assert!((f.matrix()[(0, 0)] - (n * n) as f64).abs() < 1e-12);
    }
}

#[test]
fn non_commuting_layout_is_redirected() {
    let lay = field_qubit();
    assert!(matches!(fisher::qfim_pure_commuting(&plus(&lay)), Err(Error::NonCommuting(..))));
}

#[test]
fn general_qfim_examples() {
    let q = layout(SensorSpace::qubit(), 1, GeneratorSpec::jz(), 0);
    let f = fisher::qfim_pure_general(&plus(&q), &[0.0]).unwrap();
    assert!((f.matrix()[(0, 0)] - 1.0).abs() < 1e-12);

    let lay = field_qubit();
    let s = plus(&lay);
    let f = fisher::qfim_pure_general(&s, &[0.0; 3]).unwrap();
    assert!((f.matrix()[(2, 2)] - 1.0).abs() < 1e-12);
    // fidelity oracle: 1 − |⟨ψ|ψ(hu)⟩|² ≈ h² uᵀ𝓕u/4
    let h = 1e-4;
    let quad = |u: [f64; 3]| {
        let phi: Vec<f64> = u.iter().map(|x| x * h).collect();
        let moved = evolve(&s, &phi).unwrap();
        4.0 * (1.0 - s.overlap(&moved).norm_sqr()) / (h * h)
    };
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        assert!((quad(e) - f.matrix()[(k, k)]).abs() < 1e-6);
        for l in k + 1..3 {
            let mut el = [0.0; 3];
            el[l] = 1.0;
            let both = [e[0] + el[0], e[1] + el[1], e[2] + el[2]];
            let off = (quad(both) - quad(e) - quad(el)) / 2.0;
            assert!((off - f.matrix()[(k, l)]).abs() < 1e-6);
        }
    }
}

#[test]
fn general_agrees_with_commuting() {
    let lay = layout(SensorSpace::fixed_atoms(2).unwrap(), 2, GeneratorSpec::jz(), 0);
    let amps = (0..lay.total_dim()).map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64).cos())).collect();
    let s = NetworkState::normalized(lay, amps).unwrap();
    let a = fisher::qfim_pure_commuting(&s).unwrap();
    let b = fisher::qfim_pure_general(&s, &[0.3, -2.0]).unwrap();
    assert!((a.matrix() - b.matrix()).amax() < 1e-9);
}

#[test]
fn sld_examples() {
    let q = layout(SensorSpace::qubit(), 1, GeneratorSpec::jz(), 0);
    let up = NetworkState::new(q, vec![c(1.0), c(0.0)]).unwrap();
    assert!(maxabs(&fisher::sld_pure(&up, &[0.4], 0).unwrap()) < 1e-15);

    for n in 1..=3 {
        let s = no_state(n);
        let l = fisher::sld_pure(&s, &[0.0], 0).unwrap();
        assert!(fisher::sld_residual(&s, &[0.0], 0, &l).unwrap() < 1e-8);
        let psi = DVector::from_column_slice(s.amplitudes());
        let qfi = (psi.adjoint() * &l * &l * &psi)[(0, 0)].re;
        assert!((qfi - (n * n) as f64).abs() < 1e-12);
    }
}

#[test]
fn product_sld_factorizes() {
    let lay = Arc::new(
        NetworkLayout::new(vec![SensorSpace::mode(2), SensorSpace::qubit()], vec![(0, GeneratorSpec::number())], [1]).unwrap(),
    );
    let a = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.48), c(0.64)];
    let b = vec![C64::new(0.8, 0.0), C64::new(0.0, -0.6)];
    let s = NetworkState::product(lay, &[a.clone(), b.clone()]).unwrap();
    let phi = [0.37];
    let l = fisher::sld_pure(&s, &phi, 0).unwrap();

    let one = layout(SensorSpace::mode(2), 1, GeneratorSpec::number(), 0);
    let la = fisher::sld_pure(&NetworkState::normalized(one, a).unwrap(), &phi, 0).unwrap();
    let bv = DVector::from_vec(b);
    let pb = &bv * bv.adjoint();
    assert!(maxabs(&(l - la.kronecker(&pb))) < 1e-9);
}

#[test]
fn saturation_examples() {
    let lay = layout(SensorSpace::mode(2), 2, GeneratorSpec::number(), 0);
    let amps = (0..9).map(|i| C64::new(1.0 + i as f64, (i * i) as f64 * 0.1)).collect();
    let s = NetworkState::normalized(lay, amps).unwrap();
    let sat = fisher::saturation_check(&s, &[0.2, 0.9]).unwrap();
    assert!(fisher::is_saturable(&sat));

    let single = fisher::saturation_check(&no_state(2), &[0.5]).unwrap();
    assert_eq!(single.shape(), (1, 1));
    assert!(single[(0, 0)].abs() < 1e-12);

    let gens = vec![
        (0, GeneratorSpec::dense(spin::sigma_x() * c(0.5)).unwrap()),
        (0, GeneratorSpec::dense(spin::sigma_y() * c(0.5)).unwrap()),
    ];
    let xy = Arc::new(NetworkLayout::new(vec![SensorSpace::qubit()], gens, []).unwrap());
    let up = NetworkState::new(xy, vec![c(1.0), c(0.0)]).unwrap();
    let sat = fisher::saturation_check(&up, &[0.0, 0.0]).unwrap();
    assert!((sat[(0, 1)].abs() - 2.0).abs() < 1e-12);
    assert!(!fisher::is_saturable(&sat));
}

#[test]
fn classical_fim_examples() {
    let s = no_state(3);
    let dim = 4;
    let trivial = vec![DMatrix::<C64>::identity(dim, dim)];
    assert!(fisher::classical_fim(&s, &[0.3], &trivial).unwrap().amax() < 1e-12);

    let phi = [0.3];
    let sld = fisher::sld_eigenbasis_povm(&s, &phi, 0).unwrap();
    let f = fisher::classical_fim(&s, &phi, &sld).unwrap();
    assert!((f[(0, 0)] - 9.0).abs() < 1e-4);

    let partial = vec![DMatrix::<C64>::identity(dim, dim) * c(0.5)];
    assert!(matches!(fisher::classical_fim(&s, &phi, &partial), Err(Error::IncompletePovm(_))));
}

#[test]
fn reparam_examples() {
    let q = layout(SensorSpace::qubit(), 2, GeneratorSpec::jz(), 0);
    let f = fisher::qfim_pure_commuting(&probes::ghz(&q, 1).unwrap()).unwrap();
    assert_eq!(fisher::reparam(&f, &LinearReparam::identity(2)).unwrap().matrix(), f.matrix());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let m = LinearReparam::new(DMatrix::from_row_slice(2, 2, &[r, r, r, -r]), true).unwrap();
    let ft = fisher::reparam(&f, &m).unwrap();
    assert!((ft.matrix() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
    assert_eq!(ft.labels()[0], "theta_1");

    let pd = Qfim::from_matrix(DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0])).unwrap();
    let rot = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, -0.8, 0.6]);
    let turned = fisher::reparam(&pd, &LinearReparam::new(rot, true).unwrap()).unwrap();
    assert!((turned.inverse().unwrap().trace() - pd.inverse().unwrap().trace()).abs() < 1e-12);

    assert!(LinearReparam::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]), false).is_err());
}

#[test]
fn weighted_crb_examples() {
    let q = layout(SensorSpace::qubit(), 2, GeneratorSpec::jz(), 0);
    let f = fisher::qfim_pure_commuting(&probes::ghz(&q, 1).unwrap()).unwrap();
    let v = [std::f64::consts::FRAC_1_SQRT_2; 2];
    let m = LinearReparam::single_function(&v).unwrap();
    let crb = fisher::pipeline_crb(&f, Some(&m), &Weighting::unit(2, 0), 1).unwrap();
    assert!((crb - 0.5).abs() < 1e-12);

    let id = Qfim::from_matrix(DMatrix::identity(3, 3)).unwrap();
    for mu in 1..=4 {
        let crb = fisher::pipeline_crb(&id, None, &Weighting::uniform(3), mu).unwrap();
        assert!((crb - 1.0 / mu as f64).abs() < 1e-15);
    }

    let uns = probes::uns(&layout(SensorSpace::mode(3), 2, GeneratorSpec::number(), 1), 3).unwrap();
    let crb = fisher::pipeline_crb(&fisher::qfim_pure_commuting(&uns).unwrap(), None, &Weighting::uniform(2), 1).unwrap();
    assert!((crb - 0.125).abs() < 1e-12);
}

#[test]
fn reduction_example_and_failure() {
    let f = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.2, 0.0, 0.1, //
        0.2, 1.0, 0.0, 0.3, //
        0.0, 0.0, 0.0, 0.0, //
        0.1, 0.3, 0.0, 1.0,
    ]);
    let r = fisher::reduce(&Qfim::from_matrix(f).unwrap(), &Weighting::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap()).unwrap();
    assert_eq!((r.kept.as_slice(), r.discarded.as_slice()), (&[0, 1, 3][..], &[2][..]));
    assert_eq!(r.reduced_weighting, vec![0.5, 0.5, 0.0]);
    assert_eq!(r.reduced_qfim.labels(), ["phi_1", "phi_2", "phi_4"]);
    assert!(!r.estimation_fails());

    let diag = Qfim::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]))).unwrap();
    assert_eq!(fisher::reduce(&diag, &Weighting::uniform(3)).unwrap().kept, vec![0, 1, 2]);

    let singular = Qfim::from_matrix(DMatrix::from_element(2, 2, 1.0)).unwrap();
    let r = fisher::reduce(&singular, &Weighting::uniform(2)).unwrap();
    assert!(matches!(fisher::weighted_crb(&r, 1), Err(Error::EstimationFailure(_))));
}

#[test]
fn matrix_inequality_examples() {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
    let lb = fisher::inv_diag_lower_bound(&a).unwrap();
    let inv = a.clone().try_inverse().unwrap();
    assert!((inv[(0, 0)] - 2.0 / 3.0).abs() < 1e-15 && lb[0] == 0.5);

    let blocks = fisher::block_inv_lower_bound(&a, &[1, 1]).unwrap();
    for (b, x) in blocks.iter().zip(&lb) {
        assert!((b[(0, 0)] - x).abs() < 1e-15);
    }

    let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(matches!(fisher::inv_diag_lower_bound(&not_pd), Err(Error::NotPositiveDefinite(_))));
    assert!(fisher::block_inv_lower_bound(&a, &[1]).is_err());
}

#[test]
fn strict_after_perturbation() {
    let d = 4;
    let base = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5, 3.0]));
    for i in 0..d {
        for j in i + 1..d {
            let mut a = base.clone();
            a[(i, j)] = 1e-3;
            a[(j, i)] = 1e-3;
            let inv = a.clone().try_inverse().unwrap();
            let lb = fisher::inv_diag_lower_bound(&a).unwrap();
            for k in 0..d {
                let gap = inv[(k, k)] - lb[k];
                if k == i || k == j {
                    assert!(gap > 0.0, "k={k} gap {gap}");
                } else {
                    assert!(gap.abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn symmetric_inverse_examples() {
    let (inv, g) = fisher::symmetric_qfim_inverse(0.7, 0.0, 4).unwrap();
    assert!((g - 1.0).abs() < 1e-15);
    assert!((inv - DMatrix::identity(4, 4) / (4.0 * 0.7)).amax() < 1e-15);
    let (_, g) = fisher::symmetric_qfim_inverse(1.0, -0.5, 2).unwrap();
    assert!((g - 4.0 / 3.0).abs() < 1e-12);
    assert!(fisher::symmetric_qfim_inverse(1.0, 1.0, 3).is_err());
    assert!(fisher::symmetric_qfim_inverse(1.0, -0.5, 3).is_err());
}

fn state_from(raw: &[(f64, f64)], lay: Arc<NetworkLayout>) -> NetworkState {
    NetworkState::normalized(lay, raw.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap()
}

fn pd_from(raw: &[f64], d: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |i, j| raw[i * d + j]);
    &b * b.transpose() + DMatrix::identity(d, d) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qfim_is_symmetric_psd(raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 27)) {
        prop_assume!(raw.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3);
        let s = state_from(&raw, layout(SensorSpace::mode(2), 3, GeneratorSpec::number(), 0));
        let f = fisher::qfim_pure_commuting(&s).unwrap();
        prop_assert!((f.matrix() - f.matrix().transpose()).amax() < 1e-10);
        prop_assert!(f.eigen_floor() >= -1e-9);
    }

    #[test]
    fn reparam_round_trip(raw in prop::collection::vec(-1.0..1.0f64, 16), mraw in prop::collection::vec(-1.0..1.0f64, 16)) {
        let f = Qfim::from_matrix(pd_from(&raw, 4)).unwrap();
        let m = DMatrix::from_fn(4, 4, |i, j| mraw[i * 4 + j]) + DMatrix::identity(4, 4) * 3.0;
        let fwd = LinearReparam::new(m.clone(), false).unwrap();
        let back = LinearReparam::new(m.try_inverse().unwrap(), false).unwrap();
        let again = fisher::reparam(&fisher::reparam(&f, &fwd).unwrap(), &back).unwrap();
        prop_assert!((again.matrix() - f.matrix()).amax() < 1e-9);
    }

    #[test]
    fn reduction_invariants(raw in prop::collection::vec(-1.0..1.0f64, 25),
                            group in prop::collection::vec(0usize..3, 5),
                            w in prop::collection::vec(0.0..1.0f64, 5)) {
        prop_assume!(w.iter().any(|&x| x > 0.05));
        let mut a = pd_from(&raw, 5);
        for i in 0..5 {
            for j in 0..i {
                if group[i] != group[j] {
                    a[(i, j)] = 0.0;
                    a[(j, i)] = 0.0;
                }
            }
        }
        let total: f64 = w.iter().sum();
        let mut diag: Vec<f64> = w.iter().map(|x| if *x > 0.05 { x / total } else { 0.0 }).collect();
        let s: f64 = diag.iter().sum();
        diag.iter_mut().for_each(|x| *x /= s);
        let drift = 1.0 - diag.iter().sum::<f64>();
        let first = diag.iter().position(|&x| x > 0.0).unwrap();
        diag[first] += drift;
        let wt = Weighting::new(diag.clone()).unwrap();
        let r = fisher::reduce(&Qfim::from_matrix(a.clone()).unwrap(), &wt).unwrap();
        for (k, &x) in diag.iter().enumerate() {
            if x > 0.0 {
                prop_assert!(r.kept.contains(&k));
            }
        }
        for &k in &r.kept {
            for &j in &r.discarded {
                prop_assert!(a[(k, j)].abs() <= 1e-9);
            }
        }
        if let Ok(crb) = fisher::weighted_crb(&r, 1) {
            let chain: f64 = r.kept.iter().map(|&k| diag[k] / a[(k, k)]).sum();
            prop_assert!(crb >= chain - 1e-9);
        }
    }

    #[test]
    fn symmetric_inverse_matches_dense(v in 0.1..5.0f64, j in -0.9..0.95f64, d in 1usize..8) {
        let c = j * v;
        let f = fisher::symmetric_qfim(v, c, d);
        prop_assume!(d == 1 || min_eigenvalue(&f) > 1e-3 * v);
        let (inv, g) = fisher::symmetric_qfim_inverse(v, c, d).unwrap();
        let dense = f.try_inverse().unwrap();
        prop_assert!((&inv - &dense).amax() < 1e-10 * dense.amax().max(1.0));
        if d > 1 {
            let df = d as f64;
            let want = (1.0 + (df - 2.0) * j) / ((1.0 - j) * (1.0 + (df - 1.0) * j));
            prop_assert!((g - want).abs() < 1e-9 * want.abs().max(1.0));
        }
        prop_assert!((g / (4.0 * v) - dense.trace() / d as f64).abs() < 1e-10 * g.abs().max(1.0) / v);
    }
}
