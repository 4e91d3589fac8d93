// SPDX-License-Identifier: Apache-2.0

//! Catalog of probe states and the entangled-to-separable surrogate map.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netspace::{GeneratorSpec, NetworkLayout, NetworkState, C64};

const EIGEN_TOL: f64 = 1e-12;

/// Named probe families with their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ProbeFamily {
    Ghz { n: usize },
    WeightedGhz { w: Vec<usize> },
    /// Weighted GHZ with `w = N_max·|v|/‖v‖₁`.
    ProportionalGhz { v: Vec<f64>, n_max: usize },
    /// `(|λ_min(n)⟩ + |λ_max(n)⟩)/√2` on every probe sensor.
    LocalNo { n: usize },
    Uns { n: usize },
    /// Two-sensor GNS.
    Noon { n: usize },
    Gns { n: usize, gamma: f64 },
    BalancedGns { n: usize },
    /// `local_superposition` with per-sensor particle numbers `w`.
    Product { w: Vec<usize> },
    /// Explicit amplitudes as `[re, im]` pairs, normalized on construction.
    Custom { amplitudes: Vec<[f64; 2]> },
}

impl ProbeFamily {
    pub fn build(&self, layout: &Arc<NetworkLayout>) -> Result<NetworkState> {
        match self {
            ProbeFamily::Ghz { n } => ghz(layout, *n),
            ProbeFamily::WeightedGhz { w } => weighted_ghz(layout, w),
            ProbeFamily::ProportionalGhz { v, n_max } => proportional_ghz(layout, v, *n_max),
            ProbeFamily::LocalNo { n } => {
                local_superposition(layout, &vec![*n; layout.probe_sensors().len()])
            }
            ProbeFamily::Uns { n } => uns(layout, *n),
            ProbeFamily::Noon { n } => {
                if layout.num_sensors() != 2 {
                    return Err(Error::InvalidArgument("a NOON state needs exactly two sensors".into()));
                }
                gns(layout, *n, 1.0)
            }
            ProbeFamily::Gns { n, gamma } => gns(layout, *n, *gamma),
            ProbeFamily::BalancedGns { n } => gns(layout, *n, 1.0),
            ProbeFamily::Product { w } => local_superposition(layout, w),
            ProbeFamily::Custom { amplitudes } => {
                let amps = amplitudes.iter().map(|&[re, im]| C64::new(re, im)).collect();
                NetworkState::normalized(layout.clone(), amps)
            }
        }
    }
}

/// Linear-spectrum generator of a probe sensor, requiring exactly one.
fn sensor_diagonal(layout: &NetworkLayout, sensor: usize) -> Result<(GeneratorSpec, Vec<f64>)> {
    let on = layout.generators_on(sensor);
    if on.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "sensor {sensor} carries {} generators; this probe needs exactly one",
            on.len()
        )));
    }
    let g = &layout.generators()[on[0]];
    let diag = g
        .local_diagonal()
        .ok_or_else(|| Error::InvalidGenerator("probe construction needs a linear-spectrum generator".into()))?;
    Ok((g.spec.clone(), diag.to_vec()))
}

fn vacuum(layout: &NetworkLayout, sensor: usize) -> Result<usize> {
    layout.sensors()[sensor]
        .vacuum_index()
        .ok_or_else(|| Error::Capacity(format!("sensor {sensor} has no vacuum state")))
}

/// Local index of the unique eigenstate with eigenvalue `n·λ_ext` among
/// sectors `0..=n`, where `λ_ext` is `λ_max` or `λ_min`.
fn extremal_eigenstate(layout: &NetworkLayout, sensor: usize, n: usize, top: bool) -> Result<usize> {
    let space = &layout.sensors()[sensor];
    if n > space.n_max() {
        return Err(Error::Capacity(format!("sensor {sensor} holds at most {} particles, {n} requested", space.n_max())));
    }
    let (spec, diag) = sensor_diagonal(layout, sensor)?;
    let lam = if top { spec.lambda_max() } else { spec.lambda_min() }.expect("linear spectrum");
    let target = n as f64 * lam;
    let tol = EIGEN_TOL * target.abs().max(1.0);
    let hits: Vec<usize> = (0..diag.len())
        .filter(|&i| space.particle_number(i) <= n && (diag[i] - target).abs() <= tol)
        .collect();
    match hits.as_slice() {
        [i] => Ok(*i),
        [] => Err(Error::Capacity(format!("sensor {sensor} has no eigenstate with eigenvalue {target} and at most {n} particles"))),
        _ => Err(Error::DegenerateEigenvector(format!(
            "eigenvalue {target} on sensor {sensor} is {}-fold degenerate",
            hits.len()
        ))),
    }
}

/// Local index of the `n`-particle eigenstate with the largest-modulus
/// eigenvalue under `spec` (positive wins a tie).
fn full_sector_eigenstate(layout: &NetworkLayout, sensor: usize, spec: &GeneratorSpec, n: usize) -> Result<usize> {
    let space = &layout.sensors()[sensor];
    if n > space.n_max() || space.sector_dims()[n] == 0 {
        return Err(Error::Capacity(format!("sensor {sensor} cannot hold {n} particles")));
    }
    let diag = spec.local_diagonal(space)?;
    let off = space.sector_offset(n);
    let sector = off..off + space.sector_dims()[n];
    let key = |i: usize| (diag[i].abs(), diag[i]);
    let best = sector.clone().map(key).fold((f64::NEG_INFINITY, 0.0), |a, b| if b > a { b } else { a });
    let hits: Vec<usize> = sector
        .filter(|&i| (diag[i] - best.1).abs() <= EIGEN_TOL * best.1.abs().max(1.0))
        .collect();
    if hits.len() != 1 {
        return Err(Error::DegenerateEigenvector(format!(
            "largest eigenvalue {} in sector {n} of sensor {sensor} is {}-fold degenerate",
            best.1,
            hits.len()
        )));
    }
    Ok(hits[0])
}

fn basis_sum(layout: &Arc<NetworkLayout>, terms: &[(Vec<usize>, C64)]) -> Result<NetworkState> {
    let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
    for (locals, c) in terms {
        amps[layout.global_index(locals)] += c;
    }
    NetworkState::normalized(layout.clone(), amps)
}

fn shared_spec(layout: &NetworkLayout) -> Result<GeneratorSpec> {
    let first = layout
        .generators()
        .first()
        .ok_or_else(|| Error::InvalidArgument("layout has no generators".into()))?;
    if layout.generators().iter().any(|g| g.spec != first.spec) {
        return Err(Error::InvalidArgument("all sensors must share one generator".into()));
    }
    Ok(first.spec.clone())
}

/// `(|λ_min(n)⟩^⊗d + |λ_max(n)⟩^⊗d)/√2`.
pub fn ghz(layout: &Arc<NetworkLayout>, n: usize) -> Result<NetworkState> {
    shared_spec(layout)?;
    weighted_ghz(layout, &vec![n; layout.probe_sensors().len()])
}

/// `(⊗_k|λ_max(w_k)⟩ + ⊗_k|λ_min(w_k)⟩)/√2` over the probe sensors; a zero
/// weight leaves that sensor in the vacuum in both branches.
pub fn weighted_ghz(layout: &Arc<NetworkLayout>, w: &[usize]) -> Result<NetworkState> {
    let probes = layout.probe_sensors();
    if w.len() != probes.len() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} probe sensors", w.len(), probes.len())));
    }
    if w.iter().all(|&x| x == 0) {
        return Err(Error::InvalidArgument("weighted GHZ needs a positive weight".into()));
    }
    let mut top = vec![0; layout.num_sensors()];
    let mut bottom = vec![0; layout.num_sensors()];
    for s in 0..layout.num_sensors() {
        if !probes.contains(&s) {
            top[s] = vacuum(layout, s)?;
            bottom[s] = top[s];
        }
    }
    for (&s, &wk) in probes.iter().zip(w) {
        if wk == 0 {
            top[s] = vacuum(layout, s)?;
            bottom[s] = top[s];
        } else {
            top[s] = extremal_eigenstate(layout, s, wk, true)?;
            bottom[s] = extremal_eigenstate(layout, s, wk, false)?;
        }
    }
    let one = C64::new(1.0, 0.0);
    basis_sum(layout, &[(bottom, one), (top, one)])
}

/// Integer weights `N_max·|v_k|/‖v‖₁`, or an error if any is not integral.
pub fn proportional_weights(v: &[f64], n_max: usize) -> Result<Vec<usize>> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 == 0.0 || !l1.is_finite() {
        return Err(Error::InvalidArgument("v must be non-zero and finite".into()));
    }
    v.iter()
        .map(|x| {
            let w = n_max as f64 * x.abs() / l1;
            let r = w.round();
            if (w - r).abs() > 1e-9 {
                Err(Error::InvalidArgument(format!("N_max·|v_k|/‖v‖₁ = {w} is not an integer")))
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

/// Weighted GHZ state proportional to `v`.
pub fn proportional_ghz(layout: &Arc<NetworkLayout>, v: &[f64], n_max: usize) -> Result<NetworkState> {
    weighted_ghz(layout, &proportional_weights(v, n_max)?)
}

/// Generalized NOON state: all `n` particles in one sensor, superposed over
/// every sensor (ancillas included) with the last term scaled by `gamma`.
pub fn gns(layout: &Arc<NetworkLayout>, n: usize, gamma: f64) -> Result<NetworkState> {
    if n == 0 {
        return Err(Error::InvalidArgument("GNS needs at least one particle".into()));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("balancing parameter must be finite and non-negative, got {gamma}")));
    }
    let m = layout.num_sensors();
    if m == 1 && gamma == 0.0 {
        return Err(Error::InvalidArgument("GNS on one sensor with γ = 0 is empty".into()));
    }
    let spec = shared_spec(layout)?;
    let vac: Vec<usize> = (0..m).map(|s| vacuum(layout, s)).collect::<Result<_>>()?;
    let mut terms = Vec::with_capacity(m);
    for s in 0..m {
        let mut locals = vac.clone();
        locals[s] = full_sector_eigenstate(layout, s, &spec, n)?;
        let c = if s + 1 == m { gamma } else { 1.0 };
        terms.push((locals, C64::new(c, 0.0)));
    }
    basis_sum(layout, &terms)
}

/// `⊗_k (|κ_n⟩ + √(m−1)|0⟩)/√m` over all `m` sensors.
pub fn uns(layout: &Arc<NetworkLayout>, n: usize) -> Result<NetworkState> {
    if n == 0 {
        return Err(Error::InvalidArgument("UNS needs at least one particle".into()));
    }
    let spec = shared_spec(layout)?;
    let m = layout.num_sensors();
    let mut locals = Vec::with_capacity(m);
    for s in 0..m {
        let mut v = vec![C64::new(0.0, 0.0); layout.dims()[s]];
        v[full_sector_eigenstate(layout, s, &spec, n)?] = C64::new(1.0, 0.0);
        v[vacuum(layout, s)?] = C64::new(((m - 1) as f64).sqrt(), 0.0);
        locals.push(v);
    }
    NetworkState::product(layout.clone(), &locals)
}

/// `⊗_k (|λ_min(w_k)⟩ + |λ_max(w_k)⟩)/√2` over the probe sensors, vacuum
/// elsewhere.
pub fn local_superposition(layout: &Arc<NetworkLayout>, w: &[usize]) -> Result<NetworkState> {
    let probes = layout.probe_sensors();
    if w.len() != probes.len() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} probe sensors", w.len(), probes.len())));
    }
    let mut locals: Vec<Vec<C64>> = layout.dims().iter().map(|&d| vec![C64::new(0.0, 0.0); d]).collect();
    for s in 0..layout.num_sensors() {
        match probes.iter().position(|&p| p == s) {
            Some(k) if w[k] > 0 => {
                locals[s][extremal_eigenstate(layout, s, w[k], false)?] += 1.0;
                locals[s][extremal_eigenstate(layout, s, w[k], true)?] += 1.0;
            }
            _ => locals[s][vacuum(layout, s)?] = C64::new(1.0, 0.0),
        }
    }
    NetworkState::product(layout.clone(), &locals)
}

/// Tensor product of per-sensor states.
pub fn product(layout: &Arc<NetworkLayout>, locals: &[Vec<C64>]) -> Result<NetworkState> {
    NetworkState::product(layout.clone(), locals)
}

/// Explicit amplitudes, normalized.
pub fn custom(layout: &Arc<NetworkLayout>, amplitudes: Vec<C64>) -> Result<NetworkState> {
    NetworkState::normalized(layout.clone(), amplitudes)
}

/// Product state whose per-sensor distribution over generator eigenvalues
/// matches the marginals of `state`.
///
/// Basis states of a sensor are grouped by particle number and generator
/// eigenvalue(s); each group's weight goes to its first basis state with a
/// positive real amplitude.
pub fn separable_surrogate(state: &NetworkState) -> Result<NetworkState> {
    let layout = state.layout();
    if !layout.is_diagonal() {
        return Err(Error::InvalidGenerator("the surrogate needs linear-spectrum generators".into()));
    }
    let mut locals = Vec::with_capacity(layout.num_sensors());
    for s in 0..layout.num_sensors() {
        let space = &layout.sensors()[s];
        let diags: Vec<&[f64]> = layout
            .generators_on(s)
            .into_iter()
            .map(|k| layout.generators()[k].local_diagonal().expect("diagonal"))
            .collect();
        let same = |i: usize, j: usize| {
            space.particle_number(i) == space.particle_number(j)
                && diags.iter().all(|d| (d[i] - d[j]).abs() <= EIGEN_TOL * d[i].abs().max(1.0))
        };
        let marginal = state.marginal(s);
        let mut weight = vec![0.0; marginal.len()];
        for i in 0..marginal.len() {
            let rep = (0..=i).find(|&j| same(i, j)).expect("i matches itself");
            weight[rep] += marginal[i];
        }
        locals.push(weight.iter().map(|&p| C64::new(p.sqrt(), 0.0)).collect());
    }
    NetworkState::product(layout.clone(), &locals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netspace::SensorSpace;

    fn qubits(d: usize) -> Arc<NetworkLayout> {
        Arc::new(NetworkLayout::uniform(SensorSpace::qubit(), d, GeneratorSpec::jz(), 0).unwrap())
    }

    fn modes(d: usize, n_max: usize, ancillas: usize) -> Arc<NetworkLayout> {
        Arc::new(NetworkLayout::uniform(SensorSpace::mode(n_max), d, GeneratorSpec::number(), ancillas).unwrap())
    }

    fn assert_amps(state: &NetworkState, expected: &[(usize, f64)]) {
        let mut want = vec![0.0; state.amplitudes().len()];
        for &(i, a) in expected {
            want[i] = a;
        }
        for (a, w) in state.amplitudes().iter().zip(&want) {
            assert!((a - C64::new(*w, 0.0)).norm() < 1e-12, "{:?}", state.amplitudes());
        }
    }

    #[test]
    fn ghz_two_qubits() {
        let s = ghz(&qubits(2), 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // |↑↑⟩ = 0, |↓↓⟩ = 3
        assert_amps(&s, &[(0, h), (3, h)]);
    }

    #[test]
    fn ghz_single_sensor_is_no_state() {
        let s = ghz(&modes(1, 3, 0), 3).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_amps(&s, &[(0, h), (3, h)]);
    }

    #[test]
    fn weighted_ghz_optical() {
        let layout = modes(2, 3, 0);
        let s = weighted_ghz(&layout, &[2, 1]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_amps(&s, &[(0, h), (layout.global_index(&[2, 1]), h)]);
        assert!(matches!(weighted_ghz(&layout, &[4, 1]), Err(Error::Capacity(_))));
    }

    #[test]
    fn proportional_weights_need_rational_v() {
        let v = [2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        assert_eq!(proportional_weights(&v, 3).unwrap(), vec![2, 1]);
        assert!(proportional_weights(&v, 4).is_err());
    }

    #[test]
    fn gns_noon_and_w_state() {
        let s = gns(&modes(1, 3, 1), 3, 1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_amps(&s, &[(3 * 4, h), (3, h)]);

        let atoms = Arc::new(NetworkLayout::uniform(SensorSpace::atoms(1).unwrap(), 3, GeneratorSpec::jz(), 0).unwrap());
        let w = gns(&atoms, 1, 1.0).unwrap();
        let t = 1.0 / 3f64.sqrt();
        // local index 1 is |↑⟩
        assert_amps(&w, &[(atoms.global_index(&[1, 0, 0]), t), (atoms.global_index(&[0, 1, 0]), t), (atoms.global_index(&[0, 0, 1]), t)]);
    }

    #[test]
    fn gns_gamma_scales_last_term() {
        let layout = modes(2, 2, 1);
        let s = gns(&layout, 2, 2.0).unwrap();
        let nrm = 1.0 / 6f64.sqrt();
        assert_amps(
            &s,
            &[(layout.global_index(&[2, 0, 0]), nrm), (layout.global_index(&[0, 2, 0]), nrm), (layout.global_index(&[0, 0, 2]), 2.0 * nrm)],
        );
    }

    #[test]
    fn degenerate_extremes_rejected() {
        let space = SensorSpace::sectored(vec![1, 3]).unwrap();
        let layout = Arc::new(NetworkLayout::uniform(space, 1, GeneratorSpec::linear(1.0, 2).unwrap(), 0).unwrap());
        // λ_min = 0 is shared by the vacuum and the l = −1 state of sector 1
        assert!(matches!(ghz(&layout, 1), Err(Error::DegenerateEigenvector(_))));
    }

    #[test]
    fn surrogate_of_ghz_is_plus_states() {
        let sur = separable_surrogate(&ghz(&qubits(2), 1).unwrap()).unwrap();
        assert_amps(&sur, &[(0, 0.5), (1, 0.5), (2, 0.5), (3, 0.5)]);
    }
}
