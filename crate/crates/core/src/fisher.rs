// SPDX-License-Identifier: Apache-2.0

//! Quantum and classical Fisher information, reparameterization, the
//! reduction of singular problems and the weighted Cramér–Rao scalar.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::netspace::{self, generator_at, generator_operator, inner, NetworkState, C64};

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;
const COMMUTATOR_TOL: f64 = 1e-9;
/// Relative eigenvalue floor below which a QFIM counts as singular.
pub const INVERTIBLE_RTOL: f64 = 1e-10;
/// Support-graph threshold used by [`reduce`].
pub const COUPLING_TOL: f64 = 1e-9;
pub const FD_STEP: f64 = 1e-5;
const MIN_PROBABILITY: f64 = 1e-12;
const POVM_TOL: f64 = 1e-9;
/// Largest dimension for which dense SLD matrices are built.
pub const MAX_DENSE_DIM: usize = 1024;

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Positive-definiteness test with the relative eigenvalue floor.
pub fn is_invertible(m: &DMatrix<f64>) -> bool {
    if m.is_empty() {
        return false;
    }
    let eig = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    let hi = eig.max();
    hi > 0.0 && eig.min() > INVERTIBLE_RTOL * hi
}

/// Inverse of a positive-definite matrix.
pub fn pd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_invertible(m) {
        return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {:e}", min_eigenvalue(m))));
    }
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Quantum Fisher information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Qfim {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
    eigen_floor: f64,
}

impl Qfim {
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("QFIM must be square".into()));
        }
        if labels.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch(format!("{} labels for a {}x{} QFIM", labels.len(), matrix.nrows(), matrix.nrows())));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * matrix.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!("QFIM is not symmetric (deviation {asym:e})")));
        }
        let matrix = symmetrize(&matrix);
        let eigen_floor = min_eigenvalue(&matrix);
        if eigen_floor < -PSD_TOL * matrix.amax().max(1.0) {
            return Err(Error::NotPositiveDefinite(format!("QFIM has eigenvalue {eigen_floor:e}")));
        }
        Ok(Self { matrix, labels, eigen_floor })
    }

    /// QFIM with labels `prefix_1 … prefix_d`.
    pub fn with_prefix(matrix: DMatrix<f64>, prefix: &str) -> Result<Self> {
        let labels = (1..=matrix.nrows()).map(|k| format!("{prefix}_{k}")).collect();
        Self::new(matrix, labels)
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_prefix(matrix, "phi")
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn eigen_floor(&self) -> f64 {
        self.eigen_floor
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_invertible(&self) -> bool {
        is_invertible(&self.matrix)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        pd_inverse(&self.matrix).map_err(|_| Error::Singular(format!("QFIM eigen floor {:e}", self.eigen_floor)))
    }
}

/// `θ = Mφ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReparam {
    matrix: DMatrix<f64>,
    row_normalized: bool,
}

impl LinearReparam {
    pub fn new(matrix: DMatrix<f64>, row_normalized: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("M must be square".into()));
        }
        let det = matrix.clone().lu().determinant();
        if det.abs() <= 1e-12 {
            return Err(Error::Singular(format!("|det M| = {:e}", det.abs())));
        }
        if row_normalized {
            for (k, row) in matrix.row_iter().enumerate() {
                let n = row.norm();
                if (n - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(format!("row {k} of M has norm {n}")));
                }
            }
        }
        Ok(Self { matrix, row_normalized })
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: DMatrix::identity(d, d), row_normalized: true }
    }

    /// Orthogonal `M` whose first row is the unit vector `v`; the remaining
    /// rows complete an orthonormal basis.
    pub fn single_function(v: &[f64]) -> Result<Self> {
        let d = v.len();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if d == 0 || (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("function vector must have unit 2-norm, got {norm}")));
        }
        let mut rows: Vec<Vec<f64>> = vec![v.to_vec()];
        for e in 0..d {
            if rows.len() == d {
                break;
            }
            let mut u = vec![0.0; d];
            u[e] = 1.0;
            for r in &rows {
                let dot: f64 = r.iter().zip(&u).map(|(a, b)| a * b).sum();
                u.iter_mut().zip(r).for_each(|(x, y)| *x -= dot * y);
            }
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-8 {
                rows.push(u.into_iter().map(|x| x / n).collect());
            }
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]), true)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row_normalized(&self) -> bool {
        self.row_normalized
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.matrix.clone().try_inverse().expect("M is invertible by construction")
    }
}

/// Diagonal weighting matrix with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Weighting {
    diag: Vec<f64>,
}

impl Weighting {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidWeighting("empty weighting".into()));
        }
        if let Some(w) = diag.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidWeighting(format!("negative or non-finite entry {w}")));
        }
        let tr: f64 = diag.iter().sum();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeighting(format!("trace is {tr}, expected 1")));
        }
        Ok(Self { diag })
    }

    pub fn uniform(d: usize) -> Self {
        Self { diag: vec![1.0 / d as f64; d] }
    }

    /// All weight on parameter `k`.
    pub fn unit(d: usize, k: usize) -> Self {
        let mut diag = vec![0.0; d];
        diag[k] = 1.0;
        Self { diag }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }
}

/// Outcome of [`reduce`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub kept: Vec<usize>,
    pub discarded: Vec<usize>,
    pub reduced_qfim: Qfim,
    /// Entries of the weighting at `kept`, not renormalized.
    pub reduced_weighting: Vec<f64>,
    pub invertible: bool,
}

impl ReducedProblem {
    pub fn estimation_fails(&self) -> bool {
        !self.invertible
    }
}

fn check_commuting(state: &NetworkState) -> Result<()> {
    let layout = state.layout();
    for s in layout.probe_sensors() {
        let on = layout.generators_on(s);
        for (a, &l) in on.iter().enumerate() {
            for &m in &on[a + 1..] {
                let (gl, gm) = (&layout.generators()[l], &layout.generators()[m]);
                if gl.local_diagonal().is_some() && gm.local_diagonal().is_some() {
                    continue;
                }
                let (hl, hm) = (gl.local_matrix(), gm.local_matrix());
                let comm = &hl * &hm - &hm * &hl;
                if comm.iter().map(|z| z.norm()).fold(0.0, f64::max) > COMMUTATOR_TOL {
                    return Err(Error::NonCommuting(l, m));
                }
            }
        }
    }
    Ok(())
}

fn covariance_qfim(psi: &[C64], applied: &[Vec<C64>]) -> DMatrix<f64> {
    let d = applied.len();
    let means: Vec<f64> = applied.iter().map(|h| inner(psi, h).re).collect();
    DMatrix::from_fn(d, d, |l, m| 4.0 * (inner(&applied[l], &applied[m]).re - means[l] * means[m]))
}

/// `F_lm = 4(⟨H_l H_m⟩ − ⟨H_l⟩⟨H_m⟩)` for mutually commuting generators.
pub fn qfim_pure_commuting(state: &NetworkState) -> Result<Qfim> {
    check_commuting(state)?;
    let layout = state.layout();
    let psi = state.amplitudes();
    let d = layout.num_params();
    if layout.is_diagonal() {
        let diags: Vec<Vec<f64>> = (0..d).map(|k| layout.generator_diagonal(k).expect("diagonal")).collect();
        let probs: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();
        let means: Vec<f64> = diags.iter().map(|h| h.iter().zip(&probs).map(|(x, p)| x * p).sum()).collect();
        let m = DMatrix::from_fn(d, d, |l, m| {
            let cov: f64 = probs
                .iter()
                .enumerate()
                .map(|(i, p)| p * (diags[l][i] - means[l]) * (diags[m][i] - means[m]))
                .sum();
            4.0 * cov
        });
        return Qfim::from_matrix(m);
    }
    let applied = (0..d)
        .map(|k| Ok(generator_operator(layout, k)?.apply(psi)))
        .collect::<Result<Vec<_>>>()?;
    Qfim::from_matrix(covariance_qfim(psi, &applied))
}

/// `F_mn = 2⟨{G_m, G_n}⟩ − 4⟨G_m⟩⟨G_n⟩` with the generators at `phi`.
pub fn qfim_pure_general(state: &NetworkState, phi: &[f64]) -> Result<Qfim> {
    let layout = state.layout();
    let psi = state.amplitudes();
    let applied = (0..layout.num_params())
        .map(|k| Ok(generator_at(layout, k, phi)?.apply(psi)))
        .collect::<Result<Vec<_>>>()?;
    Qfim::from_matrix(covariance_qfim(psi, &applied))
}

/// `(ψ_φ, ∂_k ψ_φ)` with `∂_k ψ_φ = −i U G_k ψ`.
fn evolved_with_derivative(state: &NetworkState, phi: &[f64], k: usize) -> Result<(Vec<C64>, Vec<C64>)> {
    let layout = state.layout();
    let g = generator_at(layout, k, phi)?;
    let minus_i = C64::new(0.0, -1.0);
    let gpsi: Vec<C64> = g.apply(state.amplitudes()).into_iter().map(|z| z * minus_i).collect();
    let psi_phi = netspace::apply_unitary(layout, state.amplitudes().to_vec(), phi)?;
    let dpsi = netspace::apply_unitary(layout, gpsi, phi)?;
    Ok((psi_phi, dpsi))
}

/// Symmetric logarithmic derivative `L_k = 2(|∂ψ⟩⟨ψ| + |ψ⟩⟨∂ψ|)` of the
/// evolved state.
pub fn sld_pure(state: &NetworkState, phi: &[f64], k: usize) -> Result<DMatrix<C64>> {
    let dim = state.layout().total_dim();
    if dim > MAX_DENSE_DIM {
        return Err(Error::SubspaceTooLarge(dim));
    }
    let (psi, dpsi) = evolved_with_derivative(state, phi, k)?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        (dpsi[i] * psi[j].conj() + psi[i] * dpsi[j].conj()) * 2.0
    }))
}

/// Largest entry of `|∂ρ − ½(ρL + Lρ)|` for the evolved pure state.
pub fn sld_residual(state: &NetworkState, phi: &[f64], k: usize, sld: &DMatrix<C64>) -> Result<f64> {
    let (psi, dpsi) = evolved_with_derivative(state, phi, k)?;
    let dim = psi.len();
    let rho = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
    let drho = DMatrix::from_fn(dim, dim, |i, j| dpsi[i] * psi[j].conj() + psi[i] * dpsi[j].conj());
    let sym = (&rho * sld + sld * &rho) * C64::new(0.5, 0.0);
    Ok((drho - sym).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// `S_lm = Im Tr(ρ[L_l, L_m])`; the QCRB is jointly saturable iff every
/// entry vanishes.
pub fn saturation_check(state: &NetworkState, phi: &[f64]) -> Result<DMatrix<f64>> {
    let d = state.layout().num_params();
    let mut lpsi = Vec::with_capacity(d);
    for k in 0..d {
        let (psi, dpsi) = evolved_with_derivative(state, phi, k)?;
        // L|ψ⟩ = 2(|∂ψ⟩ + ⟨∂ψ|ψ⟩|ψ⟩)
        let overlap = inner(&dpsi, &psi);
        lpsi.push(dpsi.iter().zip(&psi).map(|(a, b)| (a + overlap * b) * 2.0).collect::<Vec<_>>());
    }
    Ok(DMatrix::from_fn(d, d, |l, m| 2.0 * inner(&lpsi[l], &lpsi[m]).im))
}

pub fn is_saturable(s: &DMatrix<f64>) -> bool {
    s.iter().all(|x| x.abs() <= 1e-8)
}

/// Rank-one projectors onto the columns of a unitary.
pub fn projective_povm(basis: &DMatrix<C64>) -> Vec<DMatrix<C64>> {
    basis
        .column_iter()
        .map(|c| {
            let c = c.into_owned();
            &c * c.adjoint()
        })
        .collect()
}

/// Projective measurement in the eigenbasis of the SLD for parameter `k`.
pub fn sld_eigenbasis_povm(state: &NetworkState, phi: &[f64], k: usize) -> Result<Vec<DMatrix<C64>>> {
    let l = sld_pure(state, phi, k)?;
    let eig = SymmetricEigen::new(l);
    Ok(projective_povm(&eig.eigenvectors))
}

/// Classical Fisher information of `povm` on the evolved state, by central
/// finite differences of the outcome probabilities.
pub fn classical_fim(state: &NetworkState, phi: &[f64], povm: &[DMatrix<C64>]) -> Result<DMatrix<f64>> {
    let layout = state.layout();
    let dim = layout.total_dim();
    if povm.iter().any(|e| e.nrows() != dim || e.ncols() != dim) {
        return Err(Error::DimensionMismatch("POVM effect has the wrong size".into()));
    }
    let total = povm.iter().fold(DMatrix::<C64>::zeros(dim, dim), |acc, e| acc + e);
    let dev = (total - DMatrix::<C64>::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > POVM_TOL {
        return Err(Error::IncompletePovm(dev));
    }
    let probs = |p: &[f64]| -> Result<Vec<f64>> {
        let psi = nalgebra::DVector::from_vec(netspace::apply_unitary(layout, state.amplitudes().to_vec(), p)?);
        Ok(povm.iter().map(|e| (psi.adjoint() * e * &psi)[(0, 0)].re).collect())
    };
    let d = layout.num_params();
    let p0 = probs(phi)?;
    let mut grads = Vec::with_capacity(d);
    for k in 0..d {
        let mut plus = phi.to_vec();
        let mut minus = phi.to_vec();
        plus[k] += FD_STEP;
        minus[k] -= FD_STEP;
        let (pp, pm) = (probs(&plus)?, probs(&minus)?);
        grads.push(pp.iter().zip(&pm).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect::<Vec<_>>());
    }
    Ok(DMatrix::from_fn(d, d, |k, l| {
        p0.iter()
            .enumerate()
            .filter(|(_, &p)| p >= MIN_PROBABILITY)
            .map(|(m, &p)| grads[k][m] * grads[l][m] / p)
            .sum()
    }))
}

/// `F(θ) = (M⁻¹)ᵀ F(φ) M⁻¹`.
pub fn reparam(qfim: &Qfim, m: &LinearReparam) -> Result<Qfim> {
    if m.dim() != qfim.dim() {
        return Err(Error::DimensionMismatch(format!("M is {0}x{0}, QFIM is {1}x{1}", m.dim(), qfim.dim())));
    }
    let b = m.inverse();
    Qfim::with_prefix(symmetrize(&(b.transpose() * qfim.matrix() * &b)), "theta")
}

/// Drops the zero-weight parameters that are decoupled from every
/// parameter of interest.
///
/// Kept indices are the connected components of the support graph
/// `|F_ij| > COUPLING_TOL` that contain a positive-weight parameter.
pub fn reduce(qfim: &Qfim, weighting: &Weighting) -> Result<ReducedProblem> {
    let d = qfim.dim();
    if weighting.dim() != d {
        return Err(Error::DimensionMismatch(format!("weighting has {} entries for a {d}-parameter QFIM", weighting.dim())));
    }
    let f = qfim.matrix();
    let mut keep = weighting.diag().iter().map(|&w| w > 0.0).collect::<Vec<_>>();
    let mut stack: Vec<usize> = (0..d).filter(|&i| keep[i]).collect();
    while let Some(i) = stack.pop() {
        for j in 0..d {
            if !keep[j] && f[(i, j)].abs() > COUPLING_TOL {
                keep[j] = true;
                stack.push(j);
            }
        }
    }
    let kept: Vec<usize> = (0..d).filter(|&i| keep[i]).collect();
    let discarded: Vec<usize> = (0..d).filter(|&i| !keep[i]).collect();
    let sub = f.select_rows(&kept).select_columns(&kept);
    let labels = kept.iter().map(|&i| qfim.labels()[i].clone()).collect();
    let reduced_qfim = Qfim::new(sub, labels)?;
    let invertible = reduced_qfim.is_invertible();
    Ok(ReducedProblem {
        reduced_weighting: kept.iter().map(|&i| weighting.diag()[i]).collect(),
        kept,
        discarded,
        reduced_qfim,
        invertible,
    })
}

/// `Tr(W̃ F̃⁻¹)/μ`.
pub fn weighted_crb(reduced: &ReducedProblem, mu: u32) -> Result<f64> {
    if mu == 0 {
        return Err(Error::InvalidArgument("μ must be positive".into()));
    }
    if !reduced.invertible {
        return Err(Error::EstimationFailure(format!(
            "reduced QFIM over {:?} is singular (eigen floor {:e})",
            reduced.reduced_qfim.labels(),
            reduced.reduced_qfim.eigen_floor()
        )));
    }
    let inv = reduced
        .reduced_qfim
        .inverse()
        .map_err(|e| Error::EstimationFailure(e.to_string()))?;
    let tr: f64 = reduced.reduced_weighting.iter().enumerate().map(|(i, w)| w * inv[(i, i)]).sum();
    Ok(tr / mu as f64)
}

/// QFIM → optional reparameterization → reduction → weighted CRB.
pub fn pipeline_crb(qfim: &Qfim, m: Option<&LinearReparam>, weighting: &Weighting, mu: u32) -> Result<f64> {
    let q = match m {
        Some(m) => reparam(qfim, m)?,
        None => qfim.clone(),
    };
    weighted_crb(&reduce(&q, weighting)?, mu)
}

fn require_pd(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("matrix must be square".into()));
    }
    if (a - a.transpose()).amax() > SYMMETRY_TOL * a.amax().max(1.0) {
        return Err(Error::NotPositiveDefinite("matrix is not symmetric".into()));
    }
    if symmetrize(a).cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(format!("smallest eigenvalue {:e}", min_eigenvalue(a))));
    }
    Ok(())
}

/// `1/A_kk`, a lower bound on `[A⁻¹]_kk`.
pub fn inv_diag_lower_bound(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    require_pd(a)?;
    Ok(a.diagonal().iter().map(|x| 1.0 / x).collect())
}

/// `[A_[kk]]⁻¹` for every diagonal block; `[A⁻¹]_[kk] − [A_[kk]]⁻¹` is PSD.
pub fn block_inv_lower_bound(a: &DMatrix<f64>, partition: &[usize]) -> Result<Vec<DMatrix<f64>>> {
    require_pd(a)?;
    if partition.iter().sum::<usize>() != a.nrows() || partition.contains(&0) {
        return Err(Error::InvalidArgument(format!("partition {partition:?} does not cover dimension {}", a.nrows())));
    }
    let mut start = 0;
    let mut out = Vec::with_capacity(partition.len());
    for &len in partition {
        let block = a.view((start, start), (len, len)).into_owned();
        out.push(symmetrize(&block).cholesky().expect("principal block of a PD matrix").inverse());
        start += len;
    }
    Ok(out)
}

/// QFIM of a sensor-symmetric state: `4v` on the diagonal, `4c` elsewhere.
pub fn symmetric_qfim(v: f64, c: f64, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 4.0 * v } else { 4.0 * c })
}

/// Closed-form inverse of [`symmetric_qfim`] and
/// `g = (1 + (d−2)J)/((1 − J)(1 + (d−1)J))` with `J = c/v`.
pub fn symmetric_qfim_inverse(v: f64, c: f64, d: usize) -> Result<(DMatrix<f64>, f64)> {
    if !(v > 0.0) || d == 0 {
        return Err(Error::InvalidArgument(format!("need v > 0 and d ≥ 1, got v = {v}, d = {d}")));
    }
    let j = c / v;
    let df = d as f64;
    let tail = 1.0 + (df - 1.0) * j;
    if tail.abs() < 1e-12 || (d > 1 && (1.0 - j).abs() < 1e-12) {
        return Err(Error::Singular(format!("J = {j} makes the QFIM singular for d = {d}")));
    }
    if d == 1 {
        return Ok((DMatrix::from_element(1, 1, 1.0 / (4.0 * v)), 1.0));
    }
    let scale = 1.0 / (4.0 * (v - c));
    let off = c / (v + (df - 1.0) * c);
    let inv = DMatrix::from_fn(d, d, |i, k| scale * (if i == k { 1.0 } else { 0.0 } - off));
    let g = (1.0 + (df - 2.0) * j) / ((1.0 - j) * tail);
    Ok((inv, g))
}
