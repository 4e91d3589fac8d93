// SPDX-License-Identifier: Apache-2.0

//! Sensor Hilbert spaces, network layouts and the unitary encoding of
//! parameters.
//!
//! Every sensor space is a direct sum of particle-number sectors
//! `P_0 ⊕ P_1 ⊕ …`. Basis ordering is fixed: sectors ascend by particle
//! number, states within a sector follow a lexicographic label, and the
//! network index is row-major over sensors (sensor 0 is the most
//! significant digit). For atomic ensembles the label of an `n`-atom state is
//! the bitstring over atoms with `↑ = 0`, `↓ = 1`, so `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩`
//! is the order of the two-atom sector.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hard cap on the dimension of a network Hilbert space.
pub const MAX_NETWORK_DIM: usize = 1 << 16;

const HERMITIAN_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    /// Truncated bosonic mode: one state per sector.
    Mode,
    /// Ensemble of distinguishable two-level atoms: sector `n` has `2^n` states.
    Atoms,
    /// Generic sectored space; sector `n` must hold `2sn + 1` states for a
    /// linear-spectrum generator.
    Sectored,
}

/// Hilbert space of one sensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SensorSpace {
    kind: SensorKind,
    sector_dims: Vec<usize>,
    // particle number of every local basis state
    particles: Vec<usize>,
}

impl SensorSpace {
    fn build(kind: SensorKind, sector_dims: Vec<usize>) -> Result<Self> {
        if sector_dims.is_empty() {
            return Err(Error::DimensionMismatch("sensor has no sectors".into()));
        }
        if sector_dims[0] > 1 {
            return Err(Error::DimensionMismatch(format!(
                "vacuum sector must have dimension 0 or 1, got {}",
                sector_dims[0]
            )));
        }
        let particles: Vec<usize> = sector_dims
            .iter()
            .enumerate()
            .flat_map(|(n, &dim)| std::iter::repeat_n(n, dim))
            .collect();
        if particles.is_empty() {
            return Err(Error::DimensionMismatch("sensor has total dimension 0".into()));
        }
        Ok(Self { kind, sector_dims, particles })
    }

    /// Bosonic mode truncated at `n_max` photons.
    pub fn mode(n_max: usize) -> Self {
        Self::build(SensorKind::Mode, vec![1; n_max + 1]).expect("mode space is valid")
    }

    /// Ensemble holding anywhere from 0 to `n_max` two-level atoms.
    pub fn atoms(n_max: usize) -> Result<Self> {
        let dims: Vec<usize> = (0..=n_max)
            .map(|n| 1usize.checked_shl(n as u32).filter(|_| n < 17))
            .collect::<Option<_>>()
            .ok_or(Error::DimensionTooLarge(usize::MAX))?;
        Self::build(SensorKind::Atoms, dims)
    }

    /// Ensemble of exactly `n` atoms; the only occupied sector is `P_n`.
    pub fn fixed_atoms(n: usize) -> Result<Self> {
        if n == 0 || n > 16 {
            return Err(Error::InvalidArgument(format!("fixed atom count {n} out of range 1..=16")));
        }
        let mut dims = vec![0; n + 1];
        dims[n] = 1 << n;
        Self::build(SensorKind::Atoms, dims)
    }

    /// A single qubit (`|↑⟩, |↓⟩`) with no vacuum.
    pub fn qubit() -> Self {
        Self::fixed_atoms(1).expect("qubit space is valid")
    }

    /// Generic space from explicit sector dimensions.
    pub fn sectored(sector_dims: Vec<usize>) -> Result<Self> {
        Self::build(SensorKind::Sectored, sector_dims)
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn sector_dims(&self) -> &[usize] {
        &self.sector_dims
    }

    pub fn total_dim(&self) -> usize {
        self.particles.len()
    }

    /// Largest particle number with a non-empty sector.
    pub fn n_max(&self) -> usize {
        *self.particles.last().expect("non-empty")
    }

    /// Particle number of local basis state `index`.
    pub fn particle_number(&self, index: usize) -> usize {
        self.particles[index]
    }

    pub fn particle_numbers(&self) -> &[usize] {
        &self.particles
    }

    /// First local index of sector `n`.
    pub fn sector_offset(&self, n: usize) -> usize {
        self.sector_dims[..n.min(self.sector_dims.len())].iter().sum()
    }

    /// Index of the vacuum state, if the sensor has one.
    pub fn vacuum_index(&self) -> Option<usize> {
        (self.sector_dims[0] == 1).then_some(0)
    }

    /// Diagonal of the local particle-number operator.
    pub fn number_diagonal(&self) -> Vec<f64> {
        self.particles.iter().map(|&n| n as f64).collect()
    }
}

/// Local parameter generator.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// `g = ⊕_n g_n` with eigenvalues `δn + l`, `l = −sn..sn`; `two_s = 2s`.
    LinearSpectrum { delta: f64, two_s: u32 },
    /// Explicit Hermitian matrix on the full sensor space.
    DenseHermitian(DMatrix<C64>),
}

impl GeneratorSpec {
    /// Bosonic number operator (`δ = 1`, `s = 0`).
    pub fn number() -> Self {
        GeneratorSpec::LinearSpectrum { delta: 1.0, two_s: 0 }
    }

    /// Collective `J_z` of an atomic ensemble (`δ = 0`, `s = 1/2`).
    pub fn jz() -> Self {
        GeneratorSpec::LinearSpectrum { delta: 0.0, two_s: 1 }
    }

    pub fn linear(delta: f64, two_s: u32) -> Result<Self> {
        if delta == 0.0 && two_s == 0 {
            return Err(Error::InvalidGenerator("δ = 0 and s = 0 is trivial".into()));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidGenerator("δ must be finite".into()));
        }
        Ok(GeneratorSpec::LinearSpectrum { delta, two_s })
    }

    pub fn dense(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("generator matrix is not square".into()));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(GeneratorSpec::DenseHermitian(matrix))
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, GeneratorSpec::LinearSpectrum { .. })
    }

    /// `λ_min = min(0, δ − s)` for linear spectra.
    pub fn lambda_min(&self) -> Option<f64> {
        match *self {
            GeneratorSpec::LinearSpectrum { delta, two_s } => Some(f64::min(0.0, delta - two_s as f64 / 2.0)),
            GeneratorSpec::DenseHermitian(_) => None,
        }
    }

    /// `λ_max = max(0, δ + s)` for linear spectra.
    pub fn lambda_max(&self) -> Option<f64> {
        match *self {
            GeneratorSpec::LinearSpectrum { delta, two_s } => Some(f64::max(0.0, delta + two_s as f64 / 2.0)),
            GeneratorSpec::DenseHermitian(_) => None,
        }
    }

    /// `λ_max − λ_min`.
    pub fn spectral_gap(&self) -> Option<f64> {
        Some(self.lambda_max()? - self.lambda_min()?)
    }

    /// Diagonal of a linear-spectrum generator on `space`.
    pub fn local_diagonal(&self, space: &SensorSpace) -> Result<Vec<f64>> {
        let GeneratorSpec::LinearSpectrum { delta, two_s } = *self else {
            return Err(Error::InvalidGenerator("dense generator has no diagonal form".into()));
        };
        let s = two_s as f64 / 2.0;
        let mut diag = Vec::with_capacity(space.total_dim());
        for (n, &dim) in space.sector_dims().iter().enumerate() {
            if dim == 0 {
                continue;
            }
            let nf = n as f64;
            match space.kind() {
                SensorKind::Mode => {
                    if two_s != 0 {
                        return Err(Error::DimensionMismatch(
                            "a bosonic mode supports only s = 0 generators".into(),
                        ));
                    }
                    diag.push(delta * nf);
                }
                SensorKind::Atoms => {
                    if two_s > 1 {
                        return Err(Error::DimensionMismatch(
                            "an atomic ensemble supports only s ∈ {0, 1/2}".into(),
                        ));
                    }
                    for label in 0..dim {
                        let down = (label as u32).count_ones() as f64;
                        diag.push(delta * nf + s * (nf - 2.0 * down));
                    }
                }
                SensorKind::Sectored => {
                    let expected = two_s as usize * n + 1;
                    if dim != expected {
                        return Err(Error::DimensionMismatch(format!(
                            "sector {n} has dimension {dim}, spectrum needs {expected}"
                        )));
                    }
                    for j in 0..dim {
                        diag.push(delta * nf - s * nf + j as f64);
                    }
                }
            }
        }
        Ok(diag)
    }

    /// Dense matrix of the generator on `space`.
    pub fn local_matrix(&self, space: &SensorSpace) -> Result<DMatrix<C64>> {
        match self {
            GeneratorSpec::LinearSpectrum { .. } => {
                let diag = self.local_diagonal(space)?;
                Ok(DMatrix::from_fn(diag.len(), diag.len(), |i, j| {
                    if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) }
                }))
            }
            GeneratorSpec::DenseHermitian(m) => {
                if m.nrows() != space.total_dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "generator is {}x{}, sensor has dimension {}",
                        m.nrows(),
                        m.ncols(),
                        space.total_dim()
                    )));
                }
                Ok(m.clone())
            }
        }
    }
}

/// Largest entry of `|A − A†|`.
pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Pauli matrices and collective spin operators.
pub mod spin {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub fn sigma_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn sigma_y() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn sigma_z() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Axis {
        X,
        Y,
        Z,
    }

    fn pauli(axis: Axis) -> DMatrix<C64> {
        match axis {
            Axis::X => sigma_x(),
            Axis::Y => sigma_y(),
            Axis::Z => sigma_z(),
        }
    }

    /// `J_q = ½ Σ_i σ_{q,i}` acting on every sector of an atomic sensor
    /// (zero on the vacuum).
    pub fn collective(space: &SensorSpace, axis: Axis) -> Result<DMatrix<C64>> {
        if space.kind() != SensorKind::Atoms {
            return Err(Error::InvalidArgument("collective spin needs an atomic sensor".into()));
        }
        let dim = space.total_dim();
        let mut out = DMatrix::zeros(dim, dim);
        let p = pauli(axis);
        for (n, &sdim) in space.sector_dims().iter().enumerate() {
            if sdim == 0 || n == 0 {
                continue;
            }
            let off = space.sector_offset(n);
            for atom in 0..n {
                // atom 0 is the most significant bit of the label
                let shift = n - 1 - atom;
                for col in 0..sdim {
                    let bit = (col >> shift) & 1;
                    for new_bit in 0..2 {
                        let amp = p[(new_bit, bit)];
                        if amp == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let row = (col & !(1 << shift)) | (new_bit << shift);
                        out[(off + row, off + col)] += amp * 0.5;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A parameter `φ_k` and the generator that encodes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub sensor: usize,
    pub spec: GeneratorSpec,
    pub label: String,
    local: LocalForm,
}

#[derive(Debug, Clone, PartialEq)]
enum LocalForm {
    Diagonal(Vec<f64>),
    Dense(DMatrix<C64>),
}

impl Generator {
    /// Local diagonal, if the generator is diagonal in the sector basis.
    pub fn local_diagonal(&self) -> Option<&[f64]> {
        match &self.local {
            LocalForm::Diagonal(d) => Some(d),
            LocalForm::Dense(_) => None,
        }
    }

    pub fn local_matrix(&self) -> DMatrix<C64> {
        match &self.local {
            LocalForm::Diagonal(d) => DMatrix::from_fn(d.len(), d.len(), |i, j| {
                if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) }
            }),
            LocalForm::Dense(m) => m.clone(),
        }
    }
}

/// Sensors, their generators and the ancilla set.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    sensors: Vec<SensorSpace>,
    generators: Vec<Generator>,
    ancillas: BTreeSet<usize>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    total_dim: usize,
}

impl NetworkLayout {
    pub fn new(
        sensors: Vec<SensorSpace>,
        generators: Vec<(usize, GeneratorSpec)>,
        ancillas: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::InvalidArgument("network has no sensors".into()));
        }
        let ancillas: BTreeSet<usize> = ancillas.into_iter().collect();
        if let Some(&bad) = ancillas.iter().find(|&&a| a >= sensors.len()) {
            return Err(Error::InvalidSensor(bad));
        }
        let dims: Vec<usize> = sensors.iter().map(SensorSpace::total_dim).collect();
        let mut total_dim: usize = 1;
        for &d in &dims {
            total_dim = total_dim.checked_mul(d).ok_or(Error::DimensionTooLarge(usize::MAX))?;
            if total_dim > MAX_NETWORK_DIM {
                return Err(Error::DimensionTooLarge(total_dim));
            }
        }
        let mut strides = vec![1; dims.len()];
        for s in (0..dims.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * dims[s + 1];
        }
        let mut built = Vec::with_capacity(generators.len());
        for (k, (sensor, spec)) in generators.into_iter().enumerate() {
            if sensor >= sensors.len() {
                return Err(Error::InvalidSensor(sensor));
            }
            if ancillas.contains(&sensor) {
                return Err(Error::InvalidArgument(format!("generator {k} targets ancilla {sensor}")));
            }
            let local = match &spec {
                GeneratorSpec::LinearSpectrum { .. } => LocalForm::Diagonal(spec.local_diagonal(&sensors[sensor])?),
                GeneratorSpec::DenseHermitian(_) => LocalForm::Dense(spec.local_matrix(&sensors[sensor])?),
            };
            built.push(Generator { sensor, spec, label: format!("phi_{}", k + 1), local });
        }
        Ok(Self { sensors, generators: built, ancillas, dims, strides, total_dim })
    }

    /// `count` copies of `sensor`, one `spec` generator each, followed by
    /// `ancillas` generator-free copies.
    pub fn uniform(sensor: SensorSpace, count: usize, spec: GeneratorSpec, ancillas: usize) -> Result<Self> {
        let sensors = vec![sensor; count + ancillas];
        let gens = (0..count).map(|k| (k, spec.clone())).collect();
        Self::new(sensors, gens, count..count + ancillas)
    }

    pub fn sensors(&self) -> &[SensorSpace] {
        &self.sensors
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn ancillas(&self) -> &BTreeSet<usize> {
        &self.ancillas
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Number of parameters `d`.
    pub fn num_params(&self) -> usize {
        self.generators.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Sensors carrying at least one generator, in order of first use.
    pub fn probe_sensors(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for g in &self.generators {
            if !seen.contains(&g.sensor) {
                seen.push(g.sensor);
            }
        }
        seen
    }

    /// Parameter indices encoded on `sensor`.
    pub fn generators_on(&self, sensor: usize) -> Vec<usize> {
        (0..self.generators.len()).filter(|&k| self.generators[k].sensor == sensor).collect()
    }

    /// True when every generator is diagonal in the sector basis.
    pub fn is_diagonal(&self) -> bool {
        self.generators.iter().all(|g| g.local_diagonal().is_some())
    }

    /// Local index of sensor `sensor` inside network index `global`.
    #[inline]
    pub fn local_index(&self, global: usize, sensor: usize) -> usize {
        (global / self.strides[sensor]) % self.dims[sensor]
    }

    /// Network index of a tuple of local indices.
    pub fn global_index(&self, locals: &[usize]) -> usize {
        locals.iter().zip(&self.strides).map(|(l, s)| l * s).sum()
    }

    /// Local indices of network index `global`.
    pub fn split_index(&self, global: usize) -> Vec<usize> {
        (0..self.dims.len()).map(|s| self.local_index(global, s)).collect()
    }

    /// Particle number of every sensor for network index `global`.
    pub fn occupation(&self, global: usize) -> Vec<usize> {
        (0..self.dims.len())
            .map(|s| self.sensors[s].particle_number(self.local_index(global, s)))
            .collect()
    }

    /// Total particle number of network basis state `global`.
    pub fn total_particles(&self, global: usize) -> usize {
        self.occupation(global).into_iter().sum()
    }

    /// Full-space diagonal of generator `k`, if it is diagonal.
    pub fn generator_diagonal(&self, k: usize) -> Option<Vec<f64>> {
        let g = self.generators.get(k)?;
        let local = g.local_diagonal()?;
        Some((0..self.total_dim).map(|i| local[self.local_index(i, g.sensor)]).collect())
    }
}

/// Operator on the full network space.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkOperator {
    Diagonal(Vec<f64>),
    /// `1 ⊗ … ⊗ matrix ⊗ … ⊗ 1` with `matrix` on `sensor`.
    Local { dims: Vec<usize>, sensor: usize, matrix: DMatrix<C64> },
}

impl NetworkOperator {
    pub fn dim(&self) -> usize {
        match self {
            NetworkOperator::Diagonal(d) => d.len(),
            NetworkOperator::Local { dims, .. } => dims.iter().product(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, NetworkOperator::Diagonal(_))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        match self {
            NetworkOperator::Diagonal(d) => v.iter().zip(d).map(|(a, &x)| a * x).collect(),
            NetworkOperator::Local { dims, sensor, matrix } => apply_local(v, dims, *sensor, matrix),
        }
    }

    /// `⟨ψ|O|ψ⟩` (real part).
    pub fn expectation(&self, v: &[C64]) -> f64 {
        match self {
            NetworkOperator::Diagonal(d) => v.iter().zip(d).map(|(a, &x)| a.norm_sqr() * x).sum(),
            NetworkOperator::Local { .. } => inner(v, &self.apply(v)).re,
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        match self {
            NetworkOperator::Diagonal(d) => DMatrix::from_fn(n, n, |i, j| {
                if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) }
            }),
            NetworkOperator::Local { dims, sensor, matrix } => {
                let mut out = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
                for (s, &d) in dims.iter().enumerate() {
                    let factor = if s == *sensor { matrix.clone() } else { DMatrix::identity(d, d) };
                    out = out.kronecker(&factor);
                }
                out
            }
        }
    }
}

/// `⟨a|b⟩`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Apply `matrix` to tensor factor `sensor` of `v`.
pub fn apply_local(v: &[C64], dims: &[usize], sensor: usize, matrix: &DMatrix<C64>) -> Vec<C64> {
    let d = dims[sensor];
    let inner_stride: usize = dims[sensor + 1..].iter().product();
    let outer: usize = dims[..sensor].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    let mut buf = vec![C64::new(0.0, 0.0); d];
    for o in 0..outer {
        let base = o * d * inner_stride;
        for i in 0..inner_stride {
            for (a, slot) in buf.iter_mut().enumerate() {
                *slot = v[base + a * inner_stride + i];
            }
            for r in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (c, &x) in buf.iter().enumerate() {
                    acc += matrix[(r, c)] * x;
                }
                out[base + r * inner_stride + i] = acc;
            }
        }
    }
    out
}

/// `1 ⊗ … ⊗ h ⊗ … ⊗ 1` on `sensor`. Linear-spectrum generators embed as
/// diagonals.
pub fn embed_local(layout: &NetworkLayout, sensor: usize, op: &GeneratorSpec) -> Result<NetworkOperator> {
    let space = layout.sensors().get(sensor).ok_or(Error::InvalidSensor(sensor))?;
    match op {
        GeneratorSpec::LinearSpectrum { .. } => {
            let local = op.local_diagonal(space)?;
            Ok(NetworkOperator::Diagonal(
                (0..layout.total_dim()).map(|i| local[layout.local_index(i, sensor)]).collect(),
            ))
        }
        GeneratorSpec::DenseHermitian(_) => Ok(NetworkOperator::Local {
            dims: layout.dims().to_vec(),
            sensor,
            matrix: op.local_matrix(space)?,
        }),
    }
}

/// Embedded generator `H_k`.
pub fn generator_operator(layout: &NetworkLayout, k: usize) -> Result<NetworkOperator> {
    let g = layout.generators().get(k).ok_or(Error::InvalidParameter(k))?;
    match layout.generator_diagonal(k) {
        Some(d) => Ok(NetworkOperator::Diagonal(d)),
        None => Ok(NetworkOperator::Local {
            dims: layout.dims().to_vec(),
            sensor: g.sensor,
            matrix: g.local_matrix(),
        }),
    }
}

/// Pure state of the whole network.
#[derive(Debug, Clone)]
pub struct NetworkState {
    layout: Arc<NetworkLayout>,
    amplitudes: Vec<C64>,
}

impl NetworkState {
    /// Wraps normalized amplitudes.
    pub fn new(layout: Arc<NetworkLayout>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                layout.total_dim()
            )));
        }
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { layout, amplitudes })
    }

    /// Normalizes `amplitudes` first.
    pub fn normalized(layout: Arc<NetworkLayout>, mut amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Self::new(layout, amplitudes)
    }

    /// Tensor product of per-sensor vectors (each normalized here).
    pub fn product(layout: Arc<NetworkLayout>, locals: &[Vec<C64>]) -> Result<Self> {
        if locals.len() != layout.num_sensors() {
            return Err(Error::DimensionMismatch(format!(
                "{} local states for {} sensors",
                locals.len(),
                layout.num_sensors()
            )));
        }
        let mut amps = vec![C64::new(1.0, 0.0)];
        for (s, local) in locals.iter().enumerate() {
            if local.len() != layout.dims()[s] {
                return Err(Error::DimensionMismatch(format!("local state {s} has wrong length")));
            }
            let n = norm(local);
            if n == 0.0 {
                return Err(Error::NotNormalized(0.0));
            }
            amps = amps.iter().flat_map(|a| local.iter().map(move |b| a * b / n)).collect();
        }
        Self::new(layout, amps)
    }

    pub fn layout(&self) -> &Arc<NetworkLayout> {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn expectation(&self, op: &NetworkOperator) -> f64 {
        op.expectation(&self.amplitudes)
    }

    pub fn overlap(&self, other: &NetworkState) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// Diagonal of the reduced density matrix of `sensor` (marginal
    /// probabilities of its local basis states).
    pub fn marginal(&self, sensor: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.layout.dims()[sensor]];
        for (i, a) in self.amplitudes.iter().enumerate() {
            p[self.layout.local_index(i, sensor)] += a.norm_sqr();
        }
        p
    }

    /// Indices with non-negligible amplitude.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.amplitudes.len()).filter(|&i| self.amplitudes[i].norm() > tol).collect()
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn check_phi(layout: &NetworkLayout, phi: &[f64]) -> Result<()> {
    if phi.len() != layout.num_params() {
        return Err(Error::ParameterCount { expected: layout.num_params(), got: phi.len() });
    }
    Ok(())
}

/// True when every generator on `sensor` is diagonal.
fn sensor_is_diagonal(layout: &NetworkLayout, sensor: usize) -> bool {
    layout.generators_on(sensor).iter().all(|&k| layout.generators()[k].local_diagonal().is_some())
}

/// Local Hamiltonian `Σ_k φ_k h_k` of a sensor.
fn local_hamiltonian(layout: &NetworkLayout, sensor: usize, phi: &[f64]) -> DMatrix<C64> {
    let d = layout.dims()[sensor];
    let mut h = DMatrix::zeros(d, d);
    for k in layout.generators_on(sensor) {
        h += layout.generators()[k].local_matrix() * C64::new(phi[k], 0.0);
    }
    h
}

fn hermitian_eigen(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(h.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `exp(−i h)` for Hermitian `h`.
pub fn unitary_exp(h: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(h);
    let n = vals.len();
    let phases = DMatrix::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, -vals[i]) } else { C64::new(0.0, 0.0) });
    &vecs * phases * vecs.adjoint()
}

/// `U(φ)·ψ` with `U(φ) = exp(−i φᵀH)`.
pub fn evolve(state: &NetworkState, phi: &[f64]) -> Result<NetworkState> {
    let layout = state.layout().clone();
    let amplitudes = apply_unitary(&layout, state.amplitudes().to_vec(), phi)?;
    Ok(NetworkState { layout, amplitudes })
}

/// `U(φ)·v` for an arbitrary (not necessarily normalized) vector.
pub fn apply_unitary(layout: &NetworkLayout, mut amps: Vec<C64>, phi: &[f64]) -> Result<Vec<C64>> {
    check_phi(layout, phi)?;
    if amps.len() != layout.total_dim() {
        return Err(Error::DimensionMismatch(format!("vector of length {} for dimension {}", amps.len(), layout.total_dim())));
    }
    let mut phase = vec![0.0; layout.total_dim()];
    let mut any_phase = false;
    for sensor in layout.probe_sensors() {
        if sensor_is_diagonal(layout, sensor) {
            for k in layout.generators_on(sensor) {
                if phi[k] == 0.0 {
                    continue;
                }
                any_phase = true;
                let local = layout.generators()[k].local_diagonal().expect("diagonal");
                for (i, p) in phase.iter_mut().enumerate() {
                    *p += phi[k] * local[layout.local_index(i, sensor)];
                }
            }
        } else {
            let u = unitary_exp(&local_hamiltonian(layout, sensor, phi));
            amps = apply_local(&amps, layout.dims(), sensor, &u);
        }
    }
    if any_phase {
        for (a, &p) in amps.iter_mut().zip(&phase) {
            *a *= C64::from_polar(1.0, -p);
        }
    }
    Ok(amps)
}

/// `exp(−i a)` divided difference `(e^{−ia} − e^{−ib})/(a − b)`, written in
/// a form that is stable as `a → b` (limit `−i e^{−ia}`).
fn exp_divided_difference(a: f64, b: f64) -> C64 {
    let half = 0.5 * (a - b);
    let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    C64::new(0.0, -1.0) * C64::from_polar(sinc, -0.5 * (a + b))
}

/// `∂ exp(−i h(φ)) / ∂φ_k` for the local Hamiltonian of `sensor`.
fn local_unitary_derivative(layout: &NetworkLayout, sensor: usize, k: usize, phi: &[f64]) -> (DMatrix<C64>, DMatrix<C64>) {
    let h = local_hamiltonian(layout, sensor, phi);
    let (vals, vecs) = hermitian_eigen(&h);
    let n = vals.len();
    let hk = vecs.adjoint() * layout.generators()[k].local_matrix() * &vecs;
    let inner = DMatrix::from_fn(n, n, |i, j| hk[(i, j)] * exp_divided_difference(vals[i], vals[j]));
    let du = &vecs * inner * vecs.adjoint();
    let phases = DMatrix::from_fn(n, n, |i, j| if i == j { C64::from_polar(1.0, -vals[i]) } else { C64::new(0.0, 0.0) });
    let u = &vecs * phases * vecs.adjoint();
    (u, du)
}

/// Generator `G_k = −i (∂U†/∂φ_k) U` at `phi`.
///
/// Diagonal sensors return `H_k`. Sensors with dense generators use the
/// spectral formula for the derivative of the matrix exponential.
pub fn generator_at(layout: &NetworkLayout, k: usize, phi: &[f64]) -> Result<NetworkOperator> {
    check_phi(layout, phi)?;
    let g = layout.generators().get(k).ok_or(Error::InvalidParameter(k))?;
    if sensor_is_diagonal(layout, g.sensor) {
        return generator_operator(layout, k);
    }
    let h = local_hamiltonian(layout, g.sensor, phi);
    let dev = hermitian_deviation(&h);
    if dev > 1e-9 {
        return Err(Error::NotHermitian(dev));
    }
    let (u, du) = local_unitary_derivative(layout, g.sensor, k, phi);
    let gen = du.adjoint() * u * C64::new(0.0, -1.0);
    let gen = (&gen + gen.adjoint()) * C64::new(0.5, 0.0);
    Ok(NetworkOperator::Local { dims: layout.dims().to_vec(), sensor: g.sensor, matrix: gen })
}

/// `N̄ = Σ_k ⟨N̂_k⟩`.
pub fn resource_expectation(state: &NetworkState) -> f64 {
    let layout = state.layout();
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| a.norm_sqr() * layout.total_particles(i) as f64)
        .sum()
}

/// Per-sensor particle-number operator `N̂_k` embedded in the network.
pub fn resource_operator(layout: &NetworkLayout, sensor: usize) -> Result<NetworkOperator> {
    let space = layout.sensors().get(sensor).ok_or(Error::InvalidSensor(sensor))?;
    let local = space.number_diagonal();
    Ok(NetworkOperator::Diagonal((0..layout.total_dim()).map(|i| local[layout.local_index(i, sensor)]).collect()))
}
