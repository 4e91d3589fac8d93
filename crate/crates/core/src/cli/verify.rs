// SPDX-License-Identifier: Apache-2.0

//! Randomized and exhaustive property suites run by `qsn verify`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bounds;
use crate::error::{Error, Result};
use crate::fisher::{self, min_eigenvalue, LinearReparam, Weighting};
use crate::netspace::{resource_expectation, GeneratorSpec, NetworkLayout, NetworkState, SensorSpace, C64};
use crate::probes;
use crate::search::{self, Objective, Sampler, SubspaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    MatrixInequalities,
    Surrogate,
    BoundsCrosscheck,
    AppendixE,
    ConjectureScan,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::MatrixInequalities, Suite::Surrogate, Suite::BoundsCrosscheck, Suite::AppendixE, Suite::ConjectureScan];

    pub fn name(self) -> &'static str {
        match self {
            Suite::MatrixInequalities => "matrix-inequalities",
            Suite::Surrogate => "surrogate",
            Suite::BoundsCrosscheck => "bounds-crosscheck",
            Suite::AppendixE => "appendix-e",
            Suite::ConjectureScan => "conjecture-scan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }

    fn default_trials(self) -> usize {
        match self {
            Suite::MatrixInequalities => 1000,
            Suite::Surrogate => 500,
            Suite::ConjectureScan => 20_000,
            Suite::BoundsCrosscheck | Suite::AppendixE => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub trials: Option<usize>,
    pub seed: u64,
    pub step: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { trials: None, seed: 7, step: None }
    }
}

/// Counts and the smallest margin by which a check passed (negative when it
/// failed).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub suite: String,
    pub checks: usize,
    pub failures: usize,
    pub worst_slack: f64,
    pub notes: Vec<String>,
}

impl Summary {
    fn new(suite: Suite) -> Self {
        Self { suite: suite.name().into(), checks: 0, failures: 0, worst_slack: f64::INFINITY, notes: Vec::new() }
    }

    /// Records a check passing iff `slack ≥ 0`.
    fn record(&mut self, slack: f64) {
        self.checks += 1;
        if !(slack >= 0.0) {
            self.failures += 1;
        }
        if slack < self.worst_slack || slack.is_nan() {
            self.worst_slack = slack;
        }
    }

    fn close(&mut self, got: f64, want: f64, tol: f64) {
        self.record(tol - (got - want).abs());
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn line(&self) -> String {
        format!(
            "{}: {} checks, {} failures, worst slack {:.3e}",
            self.suite, self.checks, self.failures, self.worst_slack
        )
    }
}

pub fn run(suite: Suite, opts: &VerifyOptions) -> Result<Summary> {
    let trials = opts.trials.unwrap_or(suite.default_trials());
    match suite {
        Suite::MatrixInequalities => matrix_inequalities(trials, opts.seed),
        Suite::Surrogate => surrogate(trials, opts.seed),
        Suite::BoundsCrosscheck => bounds_crosscheck(),
        Suite::AppendixE => appendix_e(opts.step.unwrap_or(1e-4)),
        Suite::ConjectureScan => conjecture_scan(trials, opts.seed),
    }
}

/// `B Bᵀ + 0.1·1` with Gaussian `B`.
pub fn random_pd(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    &b * b.transpose() + DMatrix::identity(d, d) * 0.1
}

fn random_partition(rng: &mut impl Rng, d: usize) -> Vec<usize> {
    let mut parts = Vec::new();
    let mut left = d;
    while left > 0 {
        let p = rng.random_range(1..=left);
        parts.push(p);
        left -= p;
    }
    parts
}

fn matrix_inequalities(trials: usize, seed: u64) -> Result<Summary> {
    let mut sum = Summary::new(Suite::MatrixInequalities);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let d = rng.random_range(1..=8);
        let a = random_pd(&mut rng, d);
        let inv = a.clone().try_inverse().ok_or_else(|| Error::Singular("random PD matrix".into()))?;
        for (k, lb) in fisher::inv_diag_lower_bound(&a)?.into_iter().enumerate() {
            sum.record(inv[(k, k)] - lb + 1e-9);
        }
        let parts = random_partition(&mut rng, d);
        let mut start = 0;
        for (len, lb) in parts.iter().zip(fisher::block_inv_lower_bound(&a, &parts)?) {
            let gap = inv.view((start, start), (*len, *len)).into_owned() - lb;
            sum.record(min_eigenvalue(&((&gap + gap.transpose()) * 0.5)) + 1e-9);
            start += len;
        }
        // equality: block-diagonal part of the same matrix
        let mut blocky = DMatrix::zeros(d, d);
        let mut start = 0;
        for len in &parts {
            blocky.view_mut((start, start), (*len, *len)).copy_from(&a.view((start, start), (*len, *len)));
            start += len;
        }
        let binv = fisher::pd_inverse(&blocky)?;
        let mut start = 0;
        for (len, lb) in parts.iter().zip(fisher::block_inv_lower_bound(&blocky, &parts)?) {
            let gap = binv.view((start, start), (*len, *len)).into_owned() - lb;
            sum.record(1e-12 - gap.amax());
            start += len;
        }
        let diag = DMatrix::from_diagonal(&a.diagonal());
        let dinv = fisher::pd_inverse(&diag)?;
        for (k, lb) in fisher::inv_diag_lower_bound(&diag)?.into_iter().enumerate() {
            sum.close(dinv[(k, k)], lb, 1e-12);
        }
    }
    Ok(sum)
}

/// A random sensor of dimension at most 4 with its generator.
fn random_small_sensor(rng: &mut impl Rng) -> (SensorSpace, GeneratorSpec) {
    match rng.random_range(0..4) {
        0 => (SensorSpace::mode(rng.random_range(1..=3)), GeneratorSpec::number()),
        1 => (SensorSpace::atoms(1).expect("small"), GeneratorSpec::jz()),
        2 => (SensorSpace::fixed_atoms(2).expect("small"), GeneratorSpec::jz()),
        _ => (SensorSpace::qubit(), GeneratorSpec::jz()),
    }
}

pub fn random_state(rng: &mut impl Rng, layout: &Arc<NetworkLayout>) -> Result<NetworkState> {
    let amps = (0..layout.total_dim())
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    NetworkState::normalized(layout.clone(), amps)
}

pub fn random_weighting(rng: &mut impl Rng, d: usize) -> Weighting {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut diag: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let drift: f64 = 1.0 - diag.iter().sum::<f64>();
    diag[0] += drift;
    Weighting::new(diag).expect("unit trace")
}

fn surrogate(trials: usize, seed: u64) -> Result<Summary> {
    let mut sum = Summary::new(Suite::Surrogate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0usize;
    for _ in 0..trials {
        let count = rng.random_range(2..=3);
        let (sensors, gens): (Vec<_>, Vec<_>) = (0..count).map(|_| random_small_sensor(&mut rng)).unzip();
        let layout = Arc::new(NetworkLayout::new(sensors, gens.into_iter().enumerate().collect(), [])?);
        let state = random_state(&mut rng, &layout)?;
        let sur = probes::separable_surrogate(&state)?;
        let (f, fs) = (fisher::qfim_pure_commuting(&state)?, fisher::qfim_pure_commuting(&sur)?);
        for k in 0..count {
            sum.close(fs.matrix()[(k, k)], f.matrix()[(k, k)], 4e-10);
            for l in 0..count {
                if l != k {
                    sum.close(fs.matrix()[(k, l)], 0.0, 1e-10);
                }
            }
        }
        sum.close(resource_expectation(&sur), resource_expectation(&state), 1e-10);
        if f.is_invertible() && fs.is_invertible() {
            compared += 1;
            for _ in 0..20 {
                let w = random_weighting(&mut rng, count);
                let a = fisher::pipeline_crb(&fs, None, &w, 1)?;
                let b = fisher::pipeline_crb(&f, None, &w, 1)?;
                sum.record(b + 1e-8 - a);
            }
        }
    }
    sum.notes.push(format!("{compared} states with invertible QFIMs compared under 20 weightings each"));
    Ok(sum)
}

fn layout_of(space: SensorSpace, d: usize, spec: GeneratorSpec, ancillas: usize) -> Result<Arc<NetworkLayout>> {
    Ok(Arc::new(NetworkLayout::uniform(space, d, spec, ancillas)?))
}

fn single_function_crb(state: &NetworkState, v: &[f64]) -> Result<f64> {
    let q = fisher::qfim_pure_commuting(state)?;
    fisher::pipeline_crb(&q, Some(&LinearReparam::single_function(v)?), &Weighting::unit(v.len(), 0), 1)
}

fn uniform_crb(state: &NetworkState) -> Result<f64> {
    let q = fisher::qfim_pure_commuting(state)?;
    fisher::pipeline_crb(&q, None, &Weighting::uniform(q.dim()), 1)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Pipeline bounds for catalog states against their closed forms.
fn bounds_crosscheck() -> Result<Summary> {
    let mut sum = Summary::new(Suite::BoundsCrosscheck);
    let tol = 1e-9;
    for d in 2..=4 {
        for n in 1..=2 {
            let sum_v = vec![1.0 / (d as f64).sqrt(); d];
            for (space, spec) in [
                (SensorSpace::fixed_atoms(n)?, GeneratorSpec::jz()),
                (SensorSpace::mode(n), GeneratorSpec::number()),
            ] {
                let (hi, lo) = (spec.lambda_max().expect("linear"), spec.lambda_min().expect("linear"));
                let layout = layout_of(space, d, spec, 0)?;
                let ghz = single_function_crb(&probes::ghz(&layout, n)?, &sum_v)?;
                sum.close(ghz, bounds::ghz_sum(d, n, hi, lo, 1)?.value, tol);
                let loc = single_function_crb(&probes::local_superposition(&layout, &vec![n; d])?, &sum_v)?;
                sum.close(loc, bounds::local_sum(d, n * d, hi, lo, 1)?.value, tol);
            }
        }
    }
    for (raw, n_max) in [(vec![2.0, 1.0], 3), (vec![3.0, 1.0], 4), (vec![1.0, 1.0, 2.0], 4)] {
        let v = unit(&raw);
        let layout = layout_of(SensorSpace::mode(n_max), v.len(), GeneratorSpec::number(), 0)?;
        let crb = single_function_crb(&probes::proportional_ghz(&layout, &v, n_max)?, &v)?;
        sum.close(crb, bounds::weighted_ghz_bound(&v, n_max, 1.0, 0.0, 1)?.value, tol);
    }
    for dp in 1..=4 {
        for n in 1..=3 {
            let layout = layout_of(SensorSpace::mode(n), dp, GeneratorSpec::number(), 1)?;
            let (dpf, nf) = (dp as f64, n as f64);
            let gns = uniform_crb(&probes::gns(&layout, n, 1.0)?)?;
            let v = dpf * nf * nf / ((dpf + 1.0) * (dpf + 1.0));
            sum.close(gns, bounds::imaging_symmetric(v, -1.0 / dpf, dp, 1)?.value, tol);
            let uns = uniform_crb(&probes::uns(&layout, n)?)?;
            sum.close(uns, bounds::imaging_symmetric(v, 0.0, dp, 1)?.value, tol);
        }
    }
    for (alpha, beta) in [(PI / 8.0, 0.0), (PI / 6.0, PI / 6.0), (0.3, -0.1)] {
        for x in [-0.5, 0.0, 0.3] {
            let crb = appendix_e_pipeline(alpha, beta, x)?;
            sum.close(crb, bounds::two_qubit_nonorthogonal(alpha, beta, x, 1)?.value, tol);
        }
    }
    Ok(sum)
}

/// Two-qubit state `N(|↓↓⟩ + γ(|↓↑⟩ + |↑↓⟩) + |↑↑⟩)` with QFIM `[[1, x], [x, 1]]`.
pub fn appendix_e_state(x: f64) -> Result<NetworkState> {
    let layout = layout_of(SensorSpace::qubit(), 2, GeneratorSpec::jz(), 0)?;
    let g = ((1.0 - x) / (1.0 + x)).sqrt();
    let amps = [1.0, g, g, 1.0].iter().map(|&a| C64::new(a, 0.0)).collect();
    NetworkState::normalized(layout, amps)
}

/// `Tr F(θ)⁻¹` through the pipeline: twice the weighted bound with `W = ½·1`.
pub fn appendix_e_pipeline(alpha: f64, beta: f64, x: f64) -> Result<f64> {
    let q = fisher::qfim_pure_commuting(&appendix_e_state(x)?)?;
    let m = DMatrix::from_row_slice(2, 2, &[alpha.cos(), alpha.sin(), beta.sin(), beta.cos()]);
    let crb = fisher::pipeline_crb(&q, Some(&LinearReparam::new(m, true)?), &Weighting::uniform(2), 1)?;
    Ok(2.0 * crb)
}

pub fn appendix_e_lattice() -> Vec<(f64, f64)> {
    let ticks: Vec<f64> = (-5..=5).map(|k| k as f64 * PI / 22.0).collect();
    ticks.iter().flat_map(|&a| ticks.iter().map(move |&b| (a, b))).collect()
}

fn appendix_e(step: f64) -> Result<Summary> {
    let mut sum = Summary::new(Suite::AppendixE);
    for (alpha, beta) in appendix_e_lattice() {
        let x_min = bounds::two_qubit_x_min(alpha, beta)?;
        let (x_star, _) = search::appendix_e_scan(alpha, beta, step)?;
        sum.close(x_star, x_min, 2.0 * step);
        if bounds::two_qubit_g(alpha, beta) == 0.0 {
            sum.record(if x_min == 0.0 { 0.0 } else { -x_min.abs() });
        }
    }
    Ok(sum)
}

fn conjecture_scan(trials: usize, seed: u64) -> Result<Summary> {
    let mut sum = Summary::new(Suite::ConjectureScan);
    for (raw, n_max) in [(vec![1.0, 1.0], 2usize), (vec![2.0, 1.0], 3)] {
        let v = unit(&raw);
        let layout = layout_of(SensorSpace::mode(n_max), 2, GeneratorSpec::number(), 0)?;
        let reference = bounds::weighted_ghz_bound(&v, n_max, 1.0, 0.0, 1)?.value;
        let res = search::min_crb_search(
            &layout,
            &SubspaceSpec::TotalAtMost(n_max),
            &Objective::SingleFunction(v.clone()),
            &Sampler::RandomHaar { count: trials, seed },
            Some(reference),
        )?;
        sum.record(res.best_value - (reference - search::FALSIFY_MARGIN));
        sum.notes.push(format!(
            "v = {v:?}, N_max = {n_max}: best sampled {:.6e} vs weighted GHZ {:.6e} over {} states: {}",
            res.best_value,
            reference,
            res.evaluations,
            res.verdict()
        ));
    }
    Ok(sum)
}
