// SPDX-License-Identifier: Apache-2.0

//! Parameter sweeps emitted by `qsn table`.

use std::collections::BTreeMap;

use super::report::Table;
use crate::bounds;
use crate::error::{Error, Result};
use crate::fisher::symmetric_qfim_inverse;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `g(Ψ)` of balanced GNS and UNS against `d′`.
    GnsG,
    /// `E(x)` for the two-qubit non-orthogonal problem.
    AppendixE,
    /// Entanglement enhancement for `v ∝ (1, t)`.
    Enhancement,
    /// GHZ versus local sum-estimation bounds against `d`.
    GhzLocal,
    /// GNS, UNS and NOON imaging bounds times `μN²` against `d′`.
    Imaging,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::GnsG, Family::AppendixE, Family::Enhancement, Family::GhzLocal, Family::Imaging];

    pub fn name(self) -> &'static str {
        match self {
            Family::GnsG => "gns-g",
            Family::AppendixE => "appendix-e",
            Family::Enhancement => "enhancement",
            Family::GhzLocal => "ghz-local",
            Family::Imaging => "imaging",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown table family {s:?}")))
    }

    fn default_sweep(self) -> Sweep {
        let (key, lo, hi, step) = match self {
            Family::GnsG => ("d_prime", 1.0, 10.0, 1.0),
            Family::AppendixE => ("x", -0.95, 0.95, 0.05),
            Family::Enhancement => ("t", 0.0, 1.0, 0.1),
            Family::GhzLocal => ("d", 1.0, 10.0, 1.0),
            Family::Imaging => ("d_prime", 1.0, 10.0, 1.0),
        };
        Sweep { key: key.into(), lo, hi, step }
    }
}

/// `key=lo:hi:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("sweep {s:?} is not key=lo:hi:step"));
        let (key, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<f64> = range.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let [lo, hi, step] = parts[..] else { return Err(bad()) };
        Ok(Sweep { key: key.trim().to_string(), lo, hi, step })
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid sweep range {}:{}:{}", self.lo, self.hi, self.step)));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        if n > 1_000_000 {
            return Err(Error::InvalidArgument("sweep has more than a million points".into()));
        }
        Ok((0..=n).map(|i| self.lo + i as f64 * self.step).collect())
    }

    fn integers(&self, min: usize) -> Result<Vec<usize>> {
        self.values()?
            .into_iter()
            .map(|x| {
                let r = x.round();
                if (x - r).abs() > 1e-9 || r < min as f64 {
                    Err(Error::InvalidArgument(format!("{} must take integers ≥ {min}, got {x}", self.key)))
                } else {
                    Ok(r as usize)
                }
            })
            .collect()
    }
}

/// Builds the table for `family`; `params` holds fixed values such as
/// `alpha` and `beta`.
pub fn table(family: Family, sweep: Option<Sweep>, params: &BTreeMap<String, f64>) -> Result<Table> {
    let sweep = sweep.unwrap_or_else(|| family.default_sweep());
    let expected = family.default_sweep().key;
    if sweep.key != expected {
        return Err(Error::InvalidArgument(format!("family {} sweeps {expected}, not {}", family.name(), sweep.key)));
    }
    let param = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    let mut t;
    match family {
        Family::GnsG => {
            t = Table::new(&["d_prime", "g_gns", "g_uns", "formula"]);
            for dp in sweep.integers(1)? {
                let j = -1.0 / dp as f64;
                let (_, g) = symmetric_qfim_inverse(1.0, j, dp)?;
                let (_, g0) = symmetric_qfim_inverse(1.0, 0.0, dp)?;
                t.push(vec![dp.into(), g.into(), g0.into(), "imaging-symmetric".into()]);
            }
        }
        Family::AppendixE => {
            let (alpha, beta) = (param("alpha", std::f64::consts::PI / 8.0), param("beta", 0.0));
            let x_min = bounds::two_qubit_x_min(alpha, beta)?;
            t = Table::new(&["x", "E", "x_min", "formula"]);
            for x in sweep.values()? {
                let e = bounds::two_qubit_nonorthogonal(alpha, beta, x, 1)?.value;
                t.push(vec![x.into(), e.into(), x_min.into(), "two-qubit-nonorthogonal".into()]);
            }
        }
        Family::Enhancement => {
            t = Table::new(&["t", "l1_norm", "ghz_over_local", "inverse_l1", "formula"]);
            for s in sweep.values()? {
                let n = (1.0 + s * s).sqrt();
                let v = [1.0 / n, s / n];
                let l1: f64 = v.iter().map(|x| x.abs()).sum();
                let local = bounds::local_optimal(&v, 1, 1.0, 0.0, 1)?.value;
                t.push(vec![s.into(), l1.into(), (l1 * l1 / local).into(), (1.0 / l1).into(), "weighted-ghz/local-optimal".into()]);
            }
        }
        Family::GhzLocal => {
            let n = param("n", 1.0).round().max(1.0) as usize;
            t = Table::new(&["d", "ghz_sum", "local_sum", "ratio", "formula"]);
            for d in sweep.integers(1)? {
                let g = bounds::ghz_sum(d, n, 1.0, 0.0, 1)?.value;
                let l = bounds::local_sum(d, n * d, 1.0, 0.0, 1)?.value;
                t.push(vec![d.into(), g.into(), l.into(), (g / l).into(), "ghz-sum/local-sum".into()]);
            }
        }
        Family::Imaging => {
            t = Table::new(&["d_prime", "gns", "uns", "noon", "formula"]);
            for dp in sweep.integers(1)? {
                let dpf = dp as f64;
                // values of μN²·E; the variance scale N² cancels
                let v = dpf / ((dpf + 1.0) * (dpf + 1.0));
                let gns = bounds::imaging_symmetric(v, -1.0 / dpf, dp, 1)?.value;
                let uns = bounds::imaging_symmetric(v, 0.0, dp, 1)?.value;
                let noon = bounds::noon_individual(dp, dp, 1)?.value * (dpf * dpf);
                t.push(vec![dp.into(), gns.into(), uns.into(), noon.into(), "imaging-symmetric/noon-individual".into()]);
            }
        }
    }
    Ok(t)
}
