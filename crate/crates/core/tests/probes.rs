// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use qsn::fisher::{self, Weighting};
use qsn::netspace::{resource_expectation, GeneratorSpec, NetworkLayout, NetworkState, SensorSpace, C64};
use qsn::probes::{self, ProbeFamily};
use qsn::Error;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn layout(space: SensorSpace, d: usize, spec: GeneratorSpec, anc: usize) -> Arc<NetworkLayout> {
    Arc::new(NetworkLayout::uniform(space, d, spec, anc).unwrap())
}

fn qfim(state: &NetworkState) -> DMatrix<f64> {
    fisher::qfim_pure_commuting(state).unwrap().matrix().clone()
}

fn assert_amps(state: &NetworkState, want: &[(usize, f64)]) {
    for (i, a) in state.amplitudes().iter().enumerate() {
        let w = want.iter().find(|(j, _)| *j == i).map_or(0.0, |(_, x)| *x);
        assert!((a - C64::new(w, 0.0)).norm() < 1e-12, "amplitude {i}: {a} vs {w}");
    }
}

#[test]
fn ghz_two_qubits() {
    let lay = layout(SensorSpace::qubit(), 2, GeneratorSpec::jz(), 0);
    let s = probes::ghz(&lay, 1).unwrap();
    assert_amps(&s, &[(0, H), (3, H)]);
    assert!((qfim(&s) - DMatrix::from_element(2, 2, 1.0)).amax() < 1e-12);
}

#[test]
fn ghz_qfim_is_all_ones_pattern() {
    for (space, n) in [(SensorSpace::mode(3), 3), (SensorSpace::fixed_atoms(2).unwrap(), 2)] {
        let spec = if n == 3 { GeneratorSpec::number() } else { GeneratorSpec::jz() };
        let lay = layout(space, 3, spec, 0);
        let f = qfim(&probes::ghz(&lay, n).unwrap());
        let want = (n * n) as f64;
        assert!(f.iter().all(|x| (x - want).abs() < 1e-12), "{f}");
    }
}

#[test]
fn weighted_ghz_optical() {
    let lay = layout(SensorSpace::mode(2), 2, GeneratorSpec::number(), 0);
    let s = probes::weighted_ghz(&lay, &[2, 1]).unwrap();
    assert_amps(&s, &[(0, H), (7, H)]);
    let want = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 1.0]);
    assert!((qfim(&s) - want).amax() < 1e-12);
    let equal = probes::weighted_ghz(&lay, &[2, 2]).unwrap();
    assert_eq!(equal.amplitudes(), probes::ghz(&lay, 2).unwrap().amplitudes());
}

#[test]
fn weighted_ghz_bound_from_pipeline() {
    let v = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
    let lay = layout(SensorSpace::mode(3), 2, GeneratorSpec::number(), 0);
    let s = probes::proportional_ghz(&lay, &v, 3).unwrap();
    let m = fisher::LinearReparam::single_function(&v).unwrap();
    let crb = fisher::pipeline_crb(&fisher::qfim_pure_commuting(&s).unwrap(), Some(&m), &Weighting::unit(2, 0), 1).unwrap();
    assert!((crb - 0.2).abs() < 1e-12);
}

#[test]
fn gns_examples() {
    let lay = layout(SensorSpace::mode(3), 1, GeneratorSpec::number(), 1);
    let noon = probes::gns(&lay, 3, 1.0).unwrap();
    // |3,0⟩ and |0,3⟩ with dims (4, 4)
    assert_amps(&noon, &[(12, H), (3, H)]);

    let atoms = layout(SensorSpace::atoms(1).unwrap(), 3, GeneratorSpec::jz(), 0);
    let w = probes::gns(&atoms, 1, 1.0).unwrap();
    let a = 1.0 / 3f64.sqrt();
    assert_amps(&w, &[(9, a), (3, a), (1, a)]);

    let opt = layout(SensorSpace::mode(2), 3, GeneratorSpec::number(), 1);
    assert!((resource_expectation(&probes::gns(&opt, 2, 1.0).unwrap()) - 2.0).abs() < 1e-12);
}

#[test]
fn uns_statistics() {
    for n in 1..=3usize {
        let lay = layout(SensorSpace::mode(n), 1, GeneratorSpec::number(), 1);
        let s = probes::uns(&lay, n).unwrap();
        let (lo, hi) = (s.marginal(0), s.marginal(1));
        assert!((lo[0] - 0.5).abs() < 1e-12 && (lo[n] - 0.5).abs() < 1e-12);
        assert_eq!(lo, hi);
        assert!((qfim(&s)[(0, 0)] / 4.0 - (n * n) as f64 / 4.0).abs() < 1e-12);
        assert!((resource_expectation(&s) - n as f64).abs() < 1e-12);
    }
    let lay = layout(SensorSpace::mode(2), 2, GeneratorSpec::number(), 1);
    let s = probes::uns(&lay, 2).unwrap();
    assert!((resource_expectation(&s) - 2.0).abs() < 1e-12);
    assert!(qfim(&s)[(0, 1)].abs() < 1e-12);
}

#[test]
fn local_superposition_qfim() {
    let lay = layout(SensorSpace::mode(3), 3, GeneratorSpec::number(), 0);
    let f = qfim(&probes::local_superposition(&lay, &[1, 3, 2]).unwrap());
    assert!((f - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 9.0, 4.0]))).amax() < 1e-12);
    let one = layout(SensorSpace::fixed_atoms(2).unwrap(), 1, GeneratorSpec::jz(), 0);
    assert_eq!(probes::local_superposition(&one, &[2]).unwrap().amplitudes(), probes::ghz(&one, 2).unwrap().amplitudes());
}

#[test]
fn surrogate_examples() {
    let lay = layout(SensorSpace::qubit(), 2, GeneratorSpec::jz(), 0);
    let sur = probes::separable_surrogate(&probes::ghz(&lay, 1).unwrap()).unwrap();
    assert_amps(&sur, &[(0, 0.5), (1, 0.5), (2, 0.5), (3, 0.5)]);
    assert!((qfim(&sur) - DMatrix::identity(2, 2)).amax() < 1e-12);

    let opt = layout(SensorSpace::mode(2), 2, GeneratorSpec::number(), 1);
    let gns = probes::gns(&opt, 2, 1.0).unwrap();
    let sur = probes::separable_surrogate(&gns).unwrap();
    for s in 0..3 {
        let (a, b) = (gns.marginal(s), sur.marginal(s));
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }
    let product = probes::local_superposition(&opt, &[1, 2]).unwrap();
    let again = probes::separable_surrogate(&product).unwrap();
    assert!((again.overlap(&product).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn capacity_and_degeneracy_errors() {
    let lay = layout(SensorSpace::mode(1), 2, GeneratorSpec::number(), 0);
    assert!(matches!(probes::ghz(&lay, 2), Err(Error::Capacity(..))));
    assert!(matches!(probes::uns(&lay, 3), Err(Error::Capacity(..))));
    assert!(probes::proportional_weights(&[1.0, 2f64.sqrt()], 4).is_err());
}

#[test]
fn family_specs_build_normalized_states() {
    let lay = layout(SensorSpace::mode(2), 2, GeneratorSpec::number(), 1);
    let families = [
        ProbeFamily::Ghz { n: 2 },
        ProbeFamily::WeightedGhz { w: vec![2, 1] },
        ProbeFamily::ProportionalGhz { v: vec![2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()], n_max: 3 },
        ProbeFamily::Uns { n: 2 },
        ProbeFamily::Gns { n: 2, gamma: 0.5 },
        ProbeFamily::BalancedGns { n: 1 },
        ProbeFamily::Product { w: vec![1, 2] },
    ];
    for f in families {
        match f.build(&lay) {
            Ok(s) => assert!((s.norm() - 1.0).abs() < 1e-12, "{f:?}"),
            // three photons do not fit a two-photon mode
            Err(Error::Capacity(..)) => assert!(matches!(f, ProbeFamily::ProportionalGhz { .. })),
            Err(e) => panic!("{f:?}: {e}"),
        }
    }
}

fn weights(raw: &[f64]) -> Weighting {
    let s: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / s).collect();
    w[0] += 1.0 - w.iter().sum::<f64>();
    Weighting::new(w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn surrogate_never_worse(raw in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 36),
                             w in prop::collection::vec(0.01..1.0f64, 3)) {
        prop_assume!(raw.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3);
        let lay = Arc::new(NetworkLayout::new(
            vec![SensorSpace::mode(2), SensorSpace::atoms(1).unwrap(), SensorSpace::fixed_atoms(2).unwrap()],
            vec![(0, GeneratorSpec::number()), (1, GeneratorSpec::jz()), (2, GeneratorSpec::jz())],
            [],
        ).unwrap());
        let amps = raw.iter().map(|&(a, b)| C64::new(a, b)).collect();
        let s = NetworkState::normalized(lay, amps).unwrap();
        let sur = probes::separable_surrogate(&s).unwrap();
        let (f, fs) = (fisher::qfim_pure_commuting(&s).unwrap(), fisher::qfim_pure_commuting(&sur).unwrap());
        for k in 0..3 {
            prop_assert!((f.matrix()[(k, k)] - fs.matrix()[(k, k)]).abs() < 4e-10);
        }
        prop_assert!((resource_expectation(&s) - resource_expectation(&sur)).abs() < 1e-10);
        if f.is_invertible() && fs.is_invertible() {
            let w = weights(&w);
            let a = fisher::pipeline_crb(&fs, None, &w, 1).unwrap();
            let b = fisher::pipeline_crb(&f, None, &w, 1).unwrap();
            prop_assert!(a <= b + 1e-8, "surrogate {a} vs input {b}");
        }
    }
}
