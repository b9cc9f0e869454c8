//! Sampled generalized flows: classical flows of mollified coefficients and
//! their limit along a shrinking mollification schedule.

mod diagnostics;
mod integrate;
pub(crate) mod io;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::grid::SpaceTimeGrid;
use crate::scalar::Real;

pub use diagnostics::{check_semigroup, flow_diagnostics, FlowDiagnostics, FlowEvaluator, PairDiagnostics};
pub use integrate::{
    build_backward_trace, build_transport_flow, classical_flow, default_schedule, integrate_regularized_flow,
    ConvergenceOptions,
};
pub use io::{read_flow_bundle, write_flow_bundle, FlowManifest};

/// Which `(s, t)` pairs a [`FlowMap`] stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    /// `X^T(t, x) = X(T, t, x)` for every stored `t`.
    BackwardTransport,
    /// `X(s, t0, x)` for every stored `s`.
    Forward,
    /// `X(t0, t, x)`: characteristics traced back to the initial time.
    BackwardTrace,
    /// `X(s, t, x)` for all stored `s >= t`.
    General,
}

impl FlowDirection {
    pub(crate) fn pairs(self, nt: usize) -> Vec<(usize, usize)> {
        let last = nt - 1;
        match self {
            FlowDirection::BackwardTransport => (0..nt).map(|k| (last, k)).collect(),
            FlowDirection::Forward => (0..nt).map(|k| (k, 0)).collect(),
            FlowDirection::BackwardTrace => (0..nt).map(|k| (0, k)).collect(),
            FlowDirection::General => (0..nt).flat_map(|t| (t..nt).map(move |s| (s, t))).collect(),
        }
    }
}

/// Node samples of `X(s, t, x)` for a set of time-index pairs `(s, t)`.
#[derive(Clone, Debug)]
pub struct FlowMap<R> {
    grid: SpaceTimeGrid<R>,
    direction: FlowDirection,
    samples: BTreeMap<(usize, usize), Arc<Vec<R>>>,
    lip: BTreeMap<(usize, usize), R>,
    eps_used: R,
    cauchy_trace: Vec<R>,
}

impl<R: Real> FlowMap<R> {
    pub fn new(
        grid: SpaceTimeGrid<R>,
        direction: FlowDirection,
        samples: BTreeMap<(usize, usize), Arc<Vec<R>>>,
        eps_used: R,
    ) -> Result<Self> {
        let want = grid.lattice().len() * grid.dim();
        for (&(s, t), v) in &samples {
            if s >= grid.nt() || t >= grid.nt() {
                return Err(Error::invalid(format!("pair ({s}, {t}) outside the time grid")));
            }
            if v.len() != want {
                return Err(Error::invalid(format!(
                    "pair ({s}, {t}) has {} values, expected {want}",
                    v.len()
                )));
            }
        }
        let mut lip = BTreeMap::new();
        let mut cache: Vec<(*const Vec<R>, R)> = Vec::new();
        for (&key, v) in &samples {
            let ptr = Arc::as_ptr(v);
            let value = match cache.iter().find(|(p, _)| *p == ptr) {
                Some(&(_, l)) => l,
                None => {
                    let l = lipschitz_estimate(&grid, v);
                    cache.push((ptr, l));
                    l
                }
            };
            lip.insert(key, value);
        }
        Ok(Self {
            grid,
            direction,
            samples,
            lip,
            eps_used,
            cauchy_trace: Vec::new(),
        })
    }

    pub(crate) fn with_cauchy_trace(mut self, trace: Vec<R>) -> Self {
        self.cauchy_trace = trace;
        self
    }

    pub fn grid(&self) -> &SpaceTimeGrid<R> {
        &self.grid
    }

    pub fn direction(&self) -> FlowDirection {
        self.direction
    }

    pub fn eps_used(&self) -> R {
        self.eps_used
    }

    /// Sup-node distances between consecutive members of the eps schedule.
    pub fn cauchy_trace(&self) -> &[R] {
        &self.cauchy_trace
    }

    pub fn stored_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.samples.keys().copied()
    }

    pub fn has_pair(&self, s: usize, t: usize) -> bool {
        self.samples.contains_key(&(s, t))
    }

    /// Node positions `X(s, t, x_k)`, `dim` components per node.
    pub fn samples(&self, s: usize, t: usize) -> Option<&[R]> {
        self.samples.get(&(s, t)).map(|v| v.as_slice())
    }

    pub(crate) fn shared_samples(&self, s: usize, t: usize) -> Option<Arc<Vec<R>>> {
        self.samples.get(&(s, t)).cloned()
    }

    /// `X^T(t, .)` at time index `t` for a backward transport flow.
    pub fn transport_samples(&self, t: usize) -> Option<&[R]> {
        self.samples(self.grid.last_time_index(), t)
    }

    pub fn lip_estimate(&self, s: usize, t: usize) -> Option<R> {
        self.lip.get(&(s, t)).copied()
    }

    /// `X(s, t, x)` between nodes by multilinear interpolation; returns
    /// whether `x` had to be clamped onto the lattice.
    pub fn interpolate(&self, s: usize, t: usize, x: &[R], out: &mut [R]) -> Result<bool> {
        let v = self
            .samples(s, t)
            .ok_or_else(|| Error::invalid(format!("flow does not store pair ({s}, {t})")))?;
        Ok(self.grid.lattice().interpolate(v, self.grid.dim(), x, out))
    }

    /// Max node distance to `other` over the pairs both maps store.
    pub fn sup_distance(&self, other: &FlowMap<R>) -> R {
        let dim = self.grid.dim();
        let mut best = R::zero();
        for (key, a) in &self.samples {
            if let Some(b) = other.samples.get(key) {
                for (p, q) in a.chunks(dim).zip(b.chunks(dim)) {
                    best = best.max(crate::scalar::dist(p, q));
                }
            }
        }
        best
    }
}

/// Max over nodes and axes of neighbor difference quotients `|X(y) - X(x)| / |y - x|`.
pub(crate) fn lipschitz_estimate<R: Real>(grid: &SpaceTimeGrid<R>, values: &[R]) -> R {
    let lat = grid.lattice();
    let dim = grid.dim();
    let mut best = R::zero();
    for axis in 0..dim {
        let stride = lat.stride(axis);
        let h = lat.spacing()[axis];
        for k in 0..lat.len() {
            if lat.axis_index(k, axis) + 1 == lat.counts()[axis] {
                continue;
            }
            let a = &values[k * dim..(k + 1) * dim];
            let b = &values[(k + stride) * dim..(k + stride + 1) * dim];
            best = best.max(crate::scalar::dist(a, b) / h);
        }
    }
    best
}
