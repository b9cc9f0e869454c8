//! Jacobian determinants of sampled Lipschitz maps, jacobian solutions, the
//! divergence-free lift, and weak stability of jacobians.

mod io;
mod lift;
mod limit;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowDirection, FlowMap};
use crate::grid::{NodeLattice, SpaceTimeGrid};
use crate::linalg::det;
use crate::scalar::Real;

pub use io::{read_scalar_bundle, write_scalar_bundle, ScalarManifest};
pub use lift::{divergence_free_lift, flow_components, DivergenceFreeLift};
pub use limit::{weak_jacobian_limit_check, WeakLimitReport};

const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    ConservativePi,
    NonconservativeU,
    JacobianJ,
    TestFunction,
    /// One component of a divergence-free space-time lift.
    LiftComponent,
}

/// Node values at a subset of the grid's time samples.
#[derive(Clone, Debug)]
pub struct ScalarField<R> {
    grid: SpaceTimeGrid<R>,
    role: FieldRole,
    times: Vec<usize>,
    values: Vec<Vec<R>>,
}

impl<R: Real> ScalarField<R> {
    pub fn new(grid: SpaceTimeGrid<R>, role: FieldRole, times: Vec<usize>, values: Vec<Vec<R>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("one value array per stored time is required"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("stored times must be strictly increasing"));
        }
        if let Some(&k) = times.iter().find(|&&k| k >= grid.nt()) {
            return Err(Error::invalid(format!("time index {k} outside the grid")));
        }
        let len = grid.lattice().len();
        if values.iter().any(|v| v.len() != len) {
            return Err(Error::invalid(format!("every time slice needs {len} node values")));
        }
        Ok(Self {
            grid,
            role,
            times,
            values,
        })
    }

    /// Samples `f(t, x)` at every node of the listed time indices.
    pub fn from_fn<F>(grid: &SpaceTimeGrid<R>, role: FieldRole, times: Vec<usize>, f: F) -> Result<Self>
    where
        F: Fn(R, &[R]) -> R + Sync,
    {
        let lat = grid.lattice();
        let dim = grid.dim();
        let values = times
            .iter()
            .map(|&k| {
                let t = grid.time(k);
                (0..lat.len())
                    .into_par_iter()
                    .map(|node| {
                        let mut x = [R::zero(); MAX_DIM];
                        lat.coord(node, &mut x[..dim]);
                        f(t, &x[..dim])
                    })
                    .collect()
            })
            .collect();
        Self::new(grid.clone(), role, times, values)
    }

    /// Like [`ScalarField::from_fn`] but each node holds the average of `f`
    /// over its dual cell, approximated by `sub^N` midpoint samples. Used to
    /// compare grid functions with discontinuous references.
    pub fn from_cell_average<F>(
        grid: &SpaceTimeGrid<R>,
        role: FieldRole,
        times: Vec<usize>,
        sub: usize,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(R, &[R]) -> R + Sync,
    {
        if sub == 0 {
            return Err(Error::invalid("sub must be positive"));
        }
        let lat = grid.lattice();
        let dim = grid.dim();
        let h = lat.spacing().to_vec();
        let per_cell = sub.pow(dim as u32);
        let inv = R::one() / R::from_usize_lossy(per_cell);
        let values = times
            .iter()
            .map(|&k| {
                let t = grid.time(k);
                (0..lat.len())
                    .into_par_iter()
                    .map(|node| {
                        let mut c = [R::zero(); MAX_DIM];
                        lat.coord(node, &mut c[..dim]);
                        let mut y = [R::zero(); MAX_DIM];
                        let mut acc = R::zero();
                        for code in 0..per_cell {
                            let mut rest = code;
                            for i in 0..dim {
                                let j = rest % sub;
                                rest /= sub;
                                let frac =
                                    (R::from_usize_lossy(j) + R::lit(0.5)) / R::from_usize_lossy(sub) - R::lit(0.5);
                                y[i] = c[i] + frac * h[i];
                            }
                            acc = acc + f(t, &y[..dim]);
                        }
                        acc * inv
                    })
                    .collect()
            })
            .collect();
        Self::new(grid.clone(), role, times, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid<R> {
        &self.grid
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn with_role(mut self, role: FieldRole) -> Self {
        self.role = role;
        self
    }

    /// Stored time indices.
    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn time_values(&self) -> Vec<R> {
        self.times.iter().map(|&k| self.grid.time(k)).collect()
    }

    pub fn slices(&self) -> &[Vec<R>] {
        &self.values
    }

    /// Node values at time index `k`.
    pub fn at(&self, k: usize) -> Option<&[R]> {
        self.times
            .iter()
            .position(|&j| j == k)
            .map(|i| self.values[i].as_slice())
    }

    /// Multilinear interpolation at time index `k`.
    pub fn sample(&self, k: usize, x: &[R]) -> Option<R> {
        let v = self.at(k)?;
        let mut out = [R::zero()];
        self.grid.lattice().interpolate(v, 1, x, &mut out);
        Some(out[0])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn min_value(&self) -> R {
        self.values.iter().flatten().fold(R::infinity(), |m, &v| m.min(v))
    }

    /// Pointwise map of every value.
    pub fn map(&self, role: FieldRole, f: impl Fn(R) -> R) -> Self {
        Self {
            grid: self.grid.clone(),
            role,
            times: self.times.clone(),
            values: self.values.iter().map(|v| v.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    /// Pointwise product with a field on the same grid and times.
    pub fn product(&self, other: &ScalarField<R>, role: FieldRole) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x * y).collect())
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            role,
            times: self.times.clone(),
            values,
        })
    }

    pub fn check_compatible(&self, other: &ScalarField<R>) -> Result<()> {
        if !self.grid.same_discretization(&other.grid) {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        if self.times != other.times {
            return Err(Error::GridMismatch("fields store different times".into()));
        }
        Ok(())
    }

    /// Trapezoid integral of `|self - other|` over the inner box at each
    /// stored time.
    pub fn l1_distance(&self, other: &ScalarField<R>) -> Result<Vec<R>> {
        self.check_compatible(other)?;
        let nodes = self.grid.inner_nodes();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                nodes
                    .iter()
                    .map(|&k| inner_weight(&self.grid, k) * (a[k] - b[k]).abs())
                    .fold(R::zero(), |s, v| s + v)
            })
            .collect())
    }
}

/// Trapezoid weight of node `k` for quadrature over the inner box.
pub(crate) fn inner_weight<R: Real>(grid: &SpaceTimeGrid<R>, k: usize) -> R {
    let lat = grid.lattice();
    let half = R::lit(0.5);
    let mut w = R::one();
    for axis in 0..grid.dim() {
        let x = lat.axis_coord(axis, lat.axis_index(k, axis));
        let h = lat.spacing()[axis];
        let (lo, hi) = (grid.inner().lo[axis], grid.inner().hi[axis]);
        let tol = h * R::lit(1e-6);
        if x < lo - tol || x > hi + tol {
            return R::zero();
        }
        let edge = (x - lo).abs() < tol || (x - hi).abs() < tol;
        w = w * if edge { h * half } else { h };
    }
    w
}

/// One time slice of a flow: node positions of a Lipschitz map.
#[derive(Clone, Debug)]
pub struct SampledMap<R> {
    pub lattice: NodeLattice<R>,
    pub values: Arc<Vec<R>>,
}

impl<R: Real> SampledMap<R> {
    pub fn from_fn(lattice: &NodeLattice<R>, f: impl Fn(&[R], &mut [R])) -> Self {
        let dim = lattice.dim();
        let mut values = vec![R::zero(); lattice.len() * dim];
        let mut x = vec![R::zero(); dim];
        for k in 0..lattice.len() {
            lattice.coord(k, &mut x);
            f(&x, &mut values[k * dim..(k + 1) * dim]);
        }
        Self {
            lattice: lattice.clone(),
            values: Arc::new(values),
        }
    }

    /// `det(grad u)` at node `k`.
    pub fn det_at(&self, k: usize) -> R {
        gradient_det(&self.lattice, &self.values, k)
    }
}

impl<R: Real> FlowMap<R> {
    /// The stored pair that represents the map at time index `t`:
    /// `(T, t)` for transport and general flows, `(t, t0)` for forward flows,
    /// `(t0, t)` for backward traces.
    pub fn pair_for_time(&self, t: usize) -> (usize, usize) {
        let last = self.grid().last_time_index();
        match self.direction() {
            FlowDirection::BackwardTransport | FlowDirection::General => (last, t),
            FlowDirection::Forward => (t, 0),
            FlowDirection::BackwardTrace => (0, t),
        }
    }

    pub fn slice(&self, t: usize) -> Option<SampledMap<R>> {
        let (s, t) = self.pair_for_time(t);
        self.shared_samples(s, t).map(|values| SampledMap {
            lattice: self.grid().lattice().clone(),
            values,
        })
    }
}

fn gradient_det<R: Real>(lat: &NodeLattice<R>, values: &[R], k: usize) -> R {
    let n = lat.dim();
    let mut m = [R::zero(); MAX_DIM * MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = lat.derivative(values, n, i, j, k);
        }
    }
    det(&m[..n * n], n)
}

/// `J = det(grad X)` of the flow slice at time index `t`.
pub fn jacobian_det<R: Real>(map: &FlowMap<R>, t: usize) -> Result<ScalarField<R>> {
    let slice = map
        .slice(t)
        .ok_or_else(|| Error::invalid(format!("time index {t} is not stored in the flow")))?;
    let lat = map.grid().lattice();
    let values: Vec<R> = (0..lat.len()).into_par_iter().map(|k| slice.det_at(k)).collect();
    ScalarField::new(map.grid().clone(), FieldRole::JacobianJ, vec![t], vec![values])
}

/// `J(X^T)` at every stored time, as one field.
pub fn transport_jacobian<R: Real>(map: &FlowMap<R>) -> Result<ScalarField<R>> {
    let lat = map.grid().lattice();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for t in 0..map.grid().nt() {
        if let Some(slice) = map.slice(t) {
            times.push(t);
            values.push((0..lat.len()).into_par_iter().map(|k| slice.det_at(k)).collect());
        }
    }
    ScalarField::new(map.grid().clone(), FieldRole::JacobianJ, times, values)
}

/// Smallest jacobian over all stored slices and nodes.
pub(crate) fn min_transport_jacobian<R: Real>(map: &FlowMap<R>) -> R {
    let lat = map.grid().lattice();
    let mut best = R::infinity();
    for t in 0..map.grid().nt() {
        if let Some(slice) = map.slice(t) {
            let m = (0..lat.len())
                .into_par_iter()
                .map(|k| slice.det_at(k))
                .reduce(
                    R::infinity,
                    |a, b| if a.is_nan() || b.is_nan() { R::nan() } else { a.min(b) },
                );
            if m.is_nan() {
                return m;
            }
            best = best.min(m);
        }
    }
    best
}

/// `pi = det(grad p_1, ..., grad p_N)` at every stored time.
pub fn jacobian_solution<R: Real>(p: &[ScalarField<R>]) -> Result<ScalarField<R>> {
    let first = p
        .first()
        .ok_or_else(|| Error::invalid("jacobian solution needs N scalar fields"))?;
    let n = first.grid().dim();
    if p.len() != n {
        return Err(Error::invalid(format!(
            "need {n} fields in dimension {n}, got {}",
            p.len()
        )));
    }
    for q in &p[1..] {
        first.check_compatible(q)?;
    }
    let lat = first.grid().lattice();
    let values = (0..first.times().len())
        .map(|slot| {
            (0..lat.len())
                .into_par_iter()
                .map(|k| {
                    let mut m = [R::zero(); MAX_DIM * MAX_DIM];
                    for i in 0..n {
                        for j in 0..n {
                            m[i * n + j] = lat.derivative(&p[i].values[slot], 1, 0, j, k);
                        }
                    }
                    det(&m[..n * n], n)
                })
                .collect()
        })
        .collect();
    ScalarField::new(
        first.grid().clone(),
        FieldRole::ConservativePi,
        first.times().to_vec(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::library;
    use crate::flow::classical_flow;
    use crate::grid::BoxRegion;

    fn grid2(n: usize) -> SpaceTimeGrid<f64> {
        SpaceTimeGrid::new(BoxRegion::cube(2, -1.0, 1.0).unwrap(), vec![n, n], 0.0, 1.0, 4, 0.0).unwrap()
    }

    #[test]
    fn identity_has_unit_jacobian() {
        let g = grid2(7);
        let f = classical_flow(&library::zero(2), &g, FlowDirection::BackwardTransport, 1.0).unwrap();
        let j = jacobian_det(&f, 1).unwrap();
        assert!(j.at(1).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn linear_flow_follows_liouville() {
        let g = grid2(9);
        let dom = BoxRegion::cube(2, -5.0, 5.0).unwrap();
        let a = library::linear(vec![-1.0, 0.0, 0.0, 2.0], dom);
        let f = classical_flow(&a, &g, FlowDirection::General, 1e-3).unwrap();
        // pair (T, t) with T - t = 1/3
        let j = jacobian_det(&f, 2).unwrap();
        let want = (1.0f64 / 3.0).exp();
        for &v in j.at(2).unwrap() {
            assert!((v - want).abs() < 1e-9, "{v} vs {want}");
        }
    }

    #[test]
    fn coordinate_functions_give_unit_jacobian_solution() {
        let g = grid2(5);
        let p1 = ScalarField::from_fn(&g, FieldRole::NonconservativeU, vec![0, 3], |_, x| x[0]).unwrap();
        let p2 = ScalarField::from_fn(&g, FieldRole::NonconservativeU, vec![0, 3], |_, x| x[1]).unwrap();
        let pi = jacobian_solution(&[p1, p2]).unwrap();
        assert!(pi.slices().iter().flatten().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = ScalarField::from_fn(&grid2(5), FieldRole::NonconservativeU, vec![0], |_, x| x[0]).unwrap();
        let b = ScalarField::from_fn(&grid2(7), FieldRole::NonconservativeU, vec![0], |_, x| x[1]).unwrap();
        assert!(jacobian_solution(&[a, b]).is_err());
    }

    #[test]
    fn cell_average_of_half_plane() {
        let g = SpaceTimeGrid::new(BoxRegion::cube(1, -1.0f64, 1.0).unwrap(), vec![5], 0.0, 1.0, 2, 0.0).unwrap();
        let f = ScalarField::from_cell_average(&g, FieldRole::TestFunction, vec![0], 8, |_, x| {
            if x[0] > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert_eq!(f.at(0).unwrap(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
    }
}
