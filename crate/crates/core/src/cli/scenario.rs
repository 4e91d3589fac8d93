// SPDX-License-Identifier: Apache-2.0

//! Scenario files: one network, one probe, one estimation task.
//!
//! ```toml
//! mu = 1
//!
//! [network]
//! sensor = "qubit"        # qubit | mode | atoms | fixed-atoms
//! count = 2
//! capacity = 1            # photon / atom cap; atom count for fixed-atoms
//! ancillas = 0
//! generator = { delta = 0.0, two_s = 1 }
//!
//! [probe]
//! family = "ghz"
//! n = 1
//!
//! [task]
//! kind = "single-function"
//! v = [0.7071067811865476, 0.7071067811865476]
//!
//! [output]
//! name = "ghz-sum"
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{LinearReparam, Weighting};
use crate::netspace::{GeneratorSpec, NetworkLayout, SensorSpace};
use crate::probes::ProbeFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "one")]
    pub mu: u32,
    pub network: NetworkSection,
    pub probe: ProbeFamily,
    pub task: Task,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorChoice {
    Qubit,
    Mode,
    Atoms,
    FixedAtoms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearGenerator {
    pub delta: f64,
    pub two_s: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub sensor: SensorChoice,
    pub count: usize,
    #[serde(default)]
    pub capacity: Option<usize>,
    #[serde(default)]
    pub ancillas: usize,
    /// Defaults to `n̂` for modes and `J_z` for atoms and qubits.
    #[serde(default)]
    pub generator: Option<LinearGenerator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    EstimatePhi {
        weights: Vec<f64>,
    },
    LinearFunctions {
        m: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    SingleFunction {
        v: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub dir: Option<String>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn emit(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.mu == 0 {
            return Err(Error::Schema("mu must be positive".into()));
        }
        if self.network.count == 0 {
            return Err(Error::Schema("network.count must be positive".into()));
        }
        let d = self.network.count;
        let check_len = |what: &str, len: usize| {
            if len != d {
                Err(Error::Schema(format!("task.{what} has {len} entries, the network has {d} parameters")))
            } else {
                Ok(())
            }
        };
        match &self.task {
            Task::EstimatePhi { weights } => check_len("weights", weights.len()),
            Task::SingleFunction { v } => check_len("v", v.len()),
            Task::LinearFunctions { m, weights } => {
                check_len("weights", weights.len())?;
                check_len("m", m.len())?;
                m.iter().try_for_each(|row| check_len("m row", row.len()))
            }
        }
    }

    /// Sensor space, generator and the resulting layout.
    pub fn layout(&self) -> Result<Arc<NetworkLayout>> {
        let net = &self.network;
        let cap = |default: Option<usize>| {
            net.capacity
                .or(default)
                .ok_or_else(|| Error::Schema(format!("network.capacity is required for {:?} sensors", net.sensor)))
        };
        let (space, default_gen) = match net.sensor {
            SensorChoice::Qubit => (SensorSpace::qubit(), GeneratorSpec::jz()),
            SensorChoice::Mode => (SensorSpace::mode(cap(None)?), GeneratorSpec::number()),
            SensorChoice::Atoms => (SensorSpace::atoms(cap(None)?)?, GeneratorSpec::jz()),
            SensorChoice::FixedAtoms => (SensorSpace::fixed_atoms(cap(None)?)?, GeneratorSpec::jz()),
        };
        let spec = match &net.generator {
            Some(g) => GeneratorSpec::linear(g.delta, g.two_s).map_err(|e| Error::Schema(e.to_string()))?,
            None => default_gen,
        };
        let layout = NetworkLayout::uniform(space, net.count, spec, net.ancillas).map_err(|e| match e {
            Error::DimensionMismatch(m) | Error::InvalidGenerator(m) => Error::Schema(m),
            other => other,
        })?;
        Ok(Arc::new(layout))
    }

    /// Reparameterization (if any) and weighting of the task.
    pub fn task_matrices(&self) -> Result<(Option<LinearReparam>, Weighting)> {
        let d = self.network.count;
        let schema = |e: Error| Error::Schema(e.to_string());
        match &self.task {
            Task::EstimatePhi { weights } => Ok((None, Weighting::new(weights.clone()).map_err(schema)?)),
            Task::SingleFunction { v } => Ok((Some(LinearReparam::single_function(v).map_err(schema)?), Weighting::unit(d, 0))),
            Task::LinearFunctions { m, weights } => {
                let mat = nalgebra::DMatrix::from_fn(d, d, |i, j| m[i][j]);
                Ok((
                    Some(LinearReparam::new(mat, false).map_err(schema)?),
                    Weighting::new(weights.clone()).map_err(schema)?,
                ))
            }
        }
    }
}
