// SPDX-License-Identifier: Apache-2.0

//! Exhaustive and randomized searches over small subspaces of probe states.
//!
//! Random candidates are drawn from a ChaCha8 stream keyed by `(seed,
//! candidate index)`, so a result does not depend on how candidates are
//! scheduled across threads. Ties go to the lowest candidate index.
//!
//! For diagonal generators the QFIM depends only on the moduli of the
//! amplitudes in the generator eigenbasis, so grids use real non-negative
//! amplitudes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::fisher::{self, LinearReparam, Weighting};
use crate::netspace::{NetworkLayout, NetworkState, C64};

/// Largest subspace a search accepts.
pub const MAX_SUBSPACE_DIM: usize = 4096;
/// Largest number of grid points evaluated by a single grid search.
pub const MAX_GRID_POINTS: usize = 10_000_000;
/// Margin by which a sampled state must beat a reference to count.
pub const FALSIFY_MARGIN: f64 = 1e-6;

/// Particle-number constraint defining a search subspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubspaceSpec {
    TotalAtMost(usize),
    PerSensorAtMost(usize),
    FixedPerSensor(Vec<usize>),
}

impl SubspaceSpec {
    fn admits(&self, occupation: &[usize]) -> bool {
        match self {
            SubspaceSpec::TotalAtMost(n) => occupation.iter().sum::<usize>() <= *n,
            SubspaceSpec::PerSensorAtMost(n) => occupation.iter().all(|k| k <= n),
            SubspaceSpec::FixedPerSensor(ns) => occupation == ns.as_slice(),
        }
    }

    /// Network basis indices inside the subspace, ascending.
    pub fn basis(&self, layout: &NetworkLayout) -> Result<Vec<usize>> {
        if let SubspaceSpec::FixedPerSensor(ns) = self {
            if ns.len() != layout.num_sensors() {
                return Err(Error::DimensionMismatch(format!("{} particle numbers for {} sensors", ns.len(), layout.num_sensors())));
            }
        }
        let basis: Vec<usize> = (0..layout.total_dim()).filter(|&i| self.admits(&layout.occupation(i))).collect();
        if basis.is_empty() {
            return Err(Error::Capacity("the subspace is empty for this network".into()));
        }
        Ok(basis)
    }

    /// Whether every amplitude outside the subspace vanishes.
    pub fn contains(&self, state: &NetworkState, tol: f64) -> bool {
        let layout = state.layout();
        state
            .amplitudes()
            .iter()
            .enumerate()
            .all(|(i, a)| a.norm() <= tol || self.admits(&layout.occupation(i)))
    }
}

/// Quantity minimized by [`min_crb_search`].
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `Tr(W F(φ)⁻¹)` after reduction.
    EstimatePhi(Weighting),
    /// Variance bound for the single function `vᵀφ`, `‖v‖₂ = 1`.
    SingleFunction(Vec<f64>),
}

impl Objective {
    fn prepare(&self, d: usize) -> Result<(Option<LinearReparam>, Weighting)> {
        match self {
            Objective::EstimatePhi(w) => {
                if w.dim() != d {
                    return Err(Error::DimensionMismatch(format!("weighting of size {} for {d} parameters", w.dim())));
                }
                Ok((None, w.clone()))
            }
            Objective::SingleFunction(v) => {
                if v.len() != d {
                    return Err(Error::DimensionMismatch(format!("function vector of size {} for {d} parameters", v.len())));
                }
                Ok((Some(LinearReparam::single_function(v)?), Weighting::unit(d, 0)))
            }
        }
    }
}

/// Candidate generator for [`min_crb_search`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    /// Real non-negative amplitudes on a grid of hyperspherical angles.
    ExhaustiveRealGrid { step: f64 },
    /// Normalized complex Gaussian vectors on the subspace.
    RandomHaar { count: usize, seed: u64 },
    /// Random product states whose support lies in the subspace.
    RandomProduct { count: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_value: f64,
    pub best_state: NetworkState,
    pub evaluations: usize,
    pub seed: u64,
    /// Set when a reference value was supplied: whether some sample beat it
    /// by more than [`FALSIFY_MARGIN`].
    pub falsified: Option<bool>,
    /// Upper bound on the optimum certified analytically, when available.
    pub certificate: Option<f64>,
}

impl SearchResult {
    /// `"consistent"`, `"falsified"` or `"no reference"`.
    pub fn verdict(&self) -> &'static str {
        match self.falsified {
            Some(true) => "falsified",
            Some(false) => "consistent",
            None => "no reference",
        }
    }
}

fn check_dim(basis: &[usize]) -> Result<()> {
    if basis.len() > MAX_SUBSPACE_DIM {
        return Err(Error::SubspaceTooLarge(basis.len()));
    }
    Ok(())
}

/// Maximizes `Var(Ĥ_v)` over the subspace with `Ĥ_v = Σ_k v_k Ĥ_k`.
///
/// `Ĥ_v` is diagonal, so the optimum is the equal superposition of its
/// extremal eigenvectors in the subspace; the variance is
/// `(h_max − h_min)²/4`. For non-negative `v` the result carries the
/// certificate `v_max² N_max² Δλ²/4`.
pub fn max_variance(layout: &Arc<NetworkLayout>, subspace: &SubspaceSpec, v: &[f64]) -> Result<SearchResult> {
    if v.len() != layout.num_params() {
        return Err(Error::DimensionMismatch(format!("{} weights for {} parameters", v.len(), layout.num_params())));
    }
    if !layout.is_diagonal() {
        return Err(Error::InvalidGenerator("max_variance needs linear-spectrum generators".into()));
    }
    let basis = subspace.basis(layout)?;
    let diags: Vec<Vec<f64>> = (0..v.len()).map(|k| layout.generator_diagonal(k).expect("diagonal")).collect();
    let hv = |i: usize| -> f64 { v.iter().zip(&diags).map(|(vk, d)| vk * d[i]).sum() };
    let (mut lo, mut hi) = (basis[0], basis[0]);
    for &i in &basis {
        if hv(i) < hv(lo) {
            lo = i;
        }
        if hv(i) > hv(hi) {
            hi = i;
        }
    }
    let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
    amps[lo] += 1.0;
    if hi != lo {
        amps[hi] += 1.0;
    }
    let best_state = NetworkState::normalized(layout.clone(), amps)?;
    let spread = hv(hi) - hv(lo);
    let certificate = if v.iter().all(|&x| x >= 0.0) {
        let n_max = basis.iter().map(|&i| layout.total_particles(i)).max().unwrap_or(0) as f64;
        let gap = layout
            .generators()
            .iter()
            .filter_map(|g| g.spec.spectral_gap())
            .fold(0.0, f64::max);
        let v_max = v.iter().cloned().fold(0.0, f64::max);
        Some(v_max * v_max * n_max * n_max * gap * gap / 4.0)
    } else {
        None
    };
    Ok(SearchResult {
        best_value: spread * spread / 4.0,
        best_state,
        evaluations: basis.len(),
        seed: 0,
        falsified: None,
        certificate,
    })
}

/// Objective value of one state; singular problems count as `+∞`.
pub fn evaluate(state: &NetworkState, objective: &Objective) -> Result<f64> {
    let (m, w) = objective.prepare(state.layout().num_params())?;
    let q = fisher::qfim_pure_commuting(state)?;
    match fisher::pipeline_crb(&q, m.as_ref(), &w, 1) {
        Ok(x) => Ok(x),
        Err(Error::EstimationFailure(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn candidate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

struct Candidates<'a> {
    layout: &'a Arc<NetworkLayout>,
    subspace: &'a SubspaceSpec,
    basis: Vec<usize>,
    sampler: Sampler,
    grid_steps: usize,
    grid_delta: f64,
    count: usize,
}

impl<'a> Candidates<'a> {
    fn new(layout: &'a Arc<NetworkLayout>, subspace: &'a SubspaceSpec, sampler: &Sampler) -> Result<Self> {
        let basis = subspace.basis(layout)?;
        check_dim(&basis)?;
        let (count, grid_steps, grid_delta) = match *sampler {
            Sampler::ExhaustiveRealGrid { step } => {
                if !(step > 0.0 && step <= std::f64::consts::FRAC_PI_2) {
                    return Err(Error::InvalidArgument(format!("grid step {step} out of range")));
                }
                let steps = (std::f64::consts::FRAC_PI_2 / step).round() as usize;
                let delta = std::f64::consts::FRAC_PI_2 / steps as f64;
                let angles = basis.len() - 1;
                let count = (0..angles)
                    .try_fold(1usize, |acc, _| acc.checked_mul(steps + 1))
                    .filter(|&c| c <= MAX_GRID_POINTS)
                    .ok_or(Error::SubspaceTooLarge(basis.len()))?;
                (count, steps, delta)
            }
            Sampler::RandomHaar { count, .. } | Sampler::RandomProduct { count, .. } => (count, 0, 0.0),
        };
        if count == 0 {
            return Err(Error::InvalidArgument("no candidates to evaluate".into()));
        }
        Ok(Self { layout, subspace, basis, sampler: sampler.clone(), grid_steps, grid_delta, count })
    }

    fn amplitudes(&self, index: usize) -> Vec<C64> {
        let mut amps = vec![C64::new(0.0, 0.0); self.layout.total_dim()];
        match self.sampler {
            Sampler::ExhaustiveRealGrid { .. } => {
                // hyperspherical coordinates: a_j = Π_{i<j} sin t_i · cos t_j
                let mut rem = index;
                let mut carry = 1.0;
                let m = self.basis.len();
                for j in 0..m {
                    if j + 1 == m {
                        amps[self.basis[j]] = C64::new(carry, 0.0);
                    } else {
                        let t = (rem % (self.grid_steps + 1)) as f64 * self.grid_delta;
                        rem /= self.grid_steps + 1;
                        amps[self.basis[j]] = C64::new(carry * t.cos(), 0.0);
                        carry *= t.sin();
                    }
                }
            }
            Sampler::RandomHaar { seed, .. } => {
                let mut rng = candidate_rng(seed, index);
                for &i in &self.basis {
                    amps[i] = gaussian(&mut rng);
                }
            }
            Sampler::RandomProduct { seed, .. } => {
                let mut rng = candidate_rng(seed, index);
                let caps = self.product_caps(&mut rng);
                let layout = self.layout;
                let locals: Vec<Vec<C64>> = (0..layout.num_sensors())
                    .map(|s| {
                        let space = &layout.sensors()[s];
                        (0..space.total_dim())
                            .map(|l| {
                                let n = space.particle_number(l);
                                let ok = match self.subspace {
                                    SubspaceSpec::FixedPerSensor(ns) => n == ns[s],
                                    _ => n <= caps[s],
                                };
                                if ok { gaussian(&mut rng) } else { C64::new(0.0, 0.0) }
                            })
                            .collect()
                    })
                    .collect();
                amps = vec![C64::new(1.0, 0.0)];
                for local in &locals {
                    amps = amps.iter().flat_map(|a| local.iter().map(move |b| a * b)).collect();
                }
            }
        }
        amps
    }

    /// Per-sensor particle caps whose total respects the subspace.
    fn product_caps(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let layout = self.layout;
        let d = layout.num_sensors();
        match self.subspace {
            SubspaceSpec::TotalAtMost(n) => {
                let mut caps = vec![0; d];
                let mut left = *n;
                let start = rng.random_range(0..d);
                for off in 0..d {
                    let s = (start + off) % d;
                    let hi = left.min(layout.sensors()[s].n_max());
                    caps[s] = rng.random_range(0..=hi);
                    left -= caps[s];
                }
                caps
            }
            SubspaceSpec::PerSensorAtMost(n) => vec![*n; d],
            SubspaceSpec::FixedPerSensor(ns) => ns.clone(),
        }
    }

    fn state(&self, index: usize) -> Result<NetworkState> {
        NetworkState::normalized(self.layout.clone(), self.amplitudes(index))
    }
}

/// Minimizes the reduced weighted CRB (μ = 1) over sampled states.
///
/// With `reference` set, the result records whether any sample beat it by
/// more than [`FALSIFY_MARGIN`]. Not finding one is evidence, not proof.
pub fn min_crb_search(
    layout: &Arc<NetworkLayout>,
    subspace: &SubspaceSpec,
    objective: &Objective,
    sampler: &Sampler,
    reference: Option<f64>,
) -> Result<SearchResult> {
    let cands = Candidates::new(layout, subspace, sampler)?;
    objective.prepare(layout.num_params())?;
    let best = (0..cands.count)
        .into_par_iter()
        .map(|i| -> Result<(f64, usize)> {
            let value = match cands.state(i) {
                Ok(s) => evaluate(&s, objective)?,
                // grid points can hit the zero vector only through rounding
                Err(Error::NotNormalized(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok((value, i))
        })
        .try_reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| Ok(pick(a, b)),
        )?;
    if !best.0.is_finite() {
        return Err(Error::EstimationFailure("no sampled state gives an invertible QFIM".into()));
    }
    let seed = match *sampler {
        Sampler::RandomHaar { seed, .. } | Sampler::RandomProduct { seed, .. } => seed,
        Sampler::ExhaustiveRealGrid { .. } => 0,
    };
    Ok(SearchResult {
        best_value: best.0,
        best_state: cands.state(best.1)?,
        evaluations: cands.count,
        seed,
        falsified: reference.map(|r| best.0 < r - FALSIFY_MARGIN),
        certificate: None,
    })
}

/// Lower value wins; equal values go to the lower index.
fn pick(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    let key = |x: (f64, usize)| (if x.0.is_nan() { f64::INFINITY } else { x.0 }, x.1);
    if key(b).0 < key(a).0 || (key(b).0 == key(a).0 && b.1 < a.1) { b } else { a }
}

/// Best separable allocation found on a simplex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub x: Vec<f64>,
    pub value: f64,
    /// `|v|^{2/3}` normalized to unit 1-norm.
    pub predicted: Vec<f64>,
    pub max_deviation: f64,
}

/// Grid-minimizes the local single-function bound over allocations `x` on
/// the unit simplex.
pub fn allocation_search(v: &[f64], n_max: usize, step: f64) -> Result<Allocation> {
    if !(step > 0.0 && step <= 1e-2) {
        return Err(Error::InvalidArgument(format!("step {step} must lie in (0, 0.01]")));
    }
    let d = v.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty function vector".into()));
    }
    let k = (1.0 / step).round() as usize;
    // number of compositions of k into d parts
    let mut points: f64 = 1.0;
    for i in 1..d {
        points *= (k + i) as f64 / i as f64;
    }
    if points > MAX_GRID_POINTS as f64 {
        return Err(Error::SubspaceTooLarge(points as usize));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut parts = vec![0usize; d];
    visit_compositions(k, 0, &mut parts, &mut |p| {
        let x: Vec<f64> = p.iter().map(|&c| c as f64 / k as f64).collect();
        if let Ok(r) = bounds::local_weighted(v, &x, n_max, 1.0, 0.0, 1) {
            if best.as_ref().is_none_or(|(b, _)| r.value < *b) {
                best = Some((r.value, p.to_vec()));
            }
        }
    });
    let (value, parts) = best.ok_or_else(|| Error::InvalidArgument("v has no non-zero entry".into()))?;
    let x: Vec<f64> = parts.iter().map(|&c| c as f64 / k as f64).collect();
    let raw = bounds::local_optimal_allocation(v);
    let total: f64 = raw.iter().sum();
    let predicted: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let max_deviation = x.iter().zip(&predicted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Allocation { x, value, predicted, max_deviation })
}

fn visit_compositions(left: usize, pos: usize, parts: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if pos + 1 == parts.len() {
        parts[pos] = left;
        f(parts);
        return;
    }
    for c in 0..=left {
        parts[pos] = c;
        visit_compositions(left - c, pos + 1, parts, f);
    }
}

/// Grid minimum of `E(x) = (2 − g x)/(1 − x²)` over `x ∈ [−1 + step, 1 − step]`.
pub fn appendix_e_scan(alpha: f64, beta: f64, step: f64) -> Result<(f64, f64)> {
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::InvalidArgument(format!("step {step} out of range")));
    }
    let n = ((2.0 - 2.0 * step) / step).round() as i64;
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 0..=n {
        let x = -1.0 + step + i as f64 * step;
        if x.abs() >= 1.0 {
            continue;
        }
        let e = bounds::two_qubit_nonorthogonal(alpha, beta, x, 1)?.value;
        if e < best.1 {
            best = (x, e);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netspace::{GeneratorSpec, SensorSpace};

    fn modes(d: usize, n_max: usize) -> Arc<NetworkLayout> {
        Arc::new(NetworkLayout::uniform(SensorSpace::mode(n_max), d, GeneratorSpec::number(), 0).unwrap())
    }

    #[test]
    fn subspace_bases() {
        let l = modes(2, 3);
        assert_eq!(SubspaceSpec::TotalAtMost(2).basis(&l).unwrap().len(), 6);
        assert_eq!(SubspaceSpec::PerSensorAtMost(1).basis(&l).unwrap().len(), 4);
        assert_eq!(SubspaceSpec::FixedPerSensor(vec![1, 2]).basis(&l).unwrap(), vec![l.global_index(&[1, 2])]);
    }

    #[test]
    fn max_variance_sum() {
        let l = modes(2, 2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = max_variance(&l, &SubspaceSpec::TotalAtMost(2), &[h, h]).unwrap();
        // N_max² Δλ² / (4d)
        assert!((r.best_value - 0.5).abs() < 1e-12);
        assert!(r.best_value <= r.certificate.unwrap() + 1e-12);
    }

    #[test]
    fn random_streams_are_reproducible() {
        let l = modes(2, 2);
        let sub = SubspaceSpec::TotalAtMost(2);
        let obj = Objective::EstimatePhi(Weighting::uniform(2));
        let s = Sampler::RandomHaar { count: 64, seed: 11 };
        let a = min_crb_search(&l, &sub, &obj, &s, None).unwrap();
        let b = min_crb_search(&l, &sub, &obj, &s, None).unwrap();
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.best_state.amplitudes(), b.best_state.amplitudes());
    }

    #[test]
    fn allocation_symmetry() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = allocation_search(&[h, h], 4, 1e-3).unwrap();
        assert!((a.x[0] - 0.5).abs() < 1e-12);
        let one_hot = allocation_search(&[1.0, 0.0], 4, 1e-2).unwrap();
        assert_eq!(one_hot.x, vec![1.0, 0.0]);
    }

    #[test]
    fn scan_symmetric_angles() {
        let (x, _) = appendix_e_scan(0.4, -0.4, 1e-3).unwrap();
        assert!(x.abs() < 2e-3);
    }
}
