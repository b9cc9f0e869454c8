use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::{FlowDirection, FlowMap};
use crate::error::{Error, Result};
use crate::fields::{mollify, CoefficientField};
use crate::grid::SpaceTimeGrid;
use crate::scalar::Real;

const MAX_DIM: usize = 8;

/// Controls for driving the mollification width to zero.
#[derive(Clone, Debug)]
pub struct ConvergenceOptions<R> {
    /// Strictly decreasing mollification widths.
    pub schedule: Vec<R>,
    /// Sup-node distance between consecutive flows that counts as converged.
    pub tol: R,
    /// Lower bound accepted for the jacobian of a transport flow, as `-j_tol`.
    pub j_tol: R,
    /// Largest number of RK4 substeps allowed per time sample.
    pub max_substeps: usize,
}

impl<R: Real> ConvergenceOptions<R> {
    /// `eps_k = h 2^(1-k)` for `k = 0..=6`, `tol = 3h`, `j_tol = 10h`.
    pub fn standard(grid: &SpaceTimeGrid<R>) -> Self {
        let h = grid.min_h();
        Self {
            schedule: default_schedule(h),
            tol: R::lit(3.0) * h,
            j_tol: R::lit(10.0) * h,
            max_substeps: 4096,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::invalid("empty eps schedule"));
        }
        if self.schedule.iter().any(|&e| !(e > R::zero())) {
            return Err(Error::invalid("eps schedule entries must be positive"));
        }
        if self.schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::invalid("eps schedule must be strictly decreasing"));
        }
        if !(self.tol > R::zero()) {
            return Err(Error::invalid("convergence tolerance must be positive"));
        }
        Ok(())
    }
}

pub fn default_schedule<R: Real>(h: R) -> Vec<R> {
    (0..7).map(|k| h * R::lit(2.0).powi(1 - k)).collect()
}

/// Classical RK4 flow of a smooth field with steps no longer than `max_step`.
pub fn classical_flow<R: Real>(
    field: &CoefficientField<R>,
    grid: &SpaceTimeGrid<R>,
    direction: FlowDirection,
    max_step: R,
) -> Result<FlowMap<R>> {
    check_dims(field, grid)?;
    if !(max_step > R::zero()) {
        return Err(Error::invalid("max_step must be positive"));
    }
    let n = substeps(grid.dt(), max_step);
    let samples = sample_pairs(field, grid, direction, n)?;
    FlowMap::new(grid.clone(), direction, samples, R::zero())
}

/// Flow of `mollify(field, eps)`, each RK4 step moving at most `eps / 4`.
pub fn integrate_regularized_flow<R: Real>(
    field: &CoefficientField<R>,
    eps: R,
    grid: &SpaceTimeGrid<R>,
    direction: FlowDirection,
    max_substeps: usize,
) -> Result<FlowMap<R>> {
    check_dims(field, grid)?;
    if !(eps > R::zero()) {
        return Err(Error::invalid(format!(
            "mollification width must be positive, got {eps}"
        )));
    }
    let smooth = mollify(field, eps)?;
    let sup = field.sup_bound();
    let mut step = grid.dt();
    if sup > R::zero() {
        step = step.min(eps / (R::lit(4.0) * sup));
    }
    let n = substeps(grid.dt(), step);
    if n > max_substeps {
        return Err(Error::Resolution {
            eps: eps.as_f64(),
            substeps: n,
        });
    }
    let samples = sample_pairs(&smooth, grid, direction, n)?;
    FlowMap::new(grid.clone(), direction, samples, eps)
}

/// Transport flow `X^T(t, x) = X(T, t, x)` as the limit of regularized flows.
///
/// Stops at the first width whose flow is within `tol` of its predecessor
/// and rejects the result if its jacobian dips below `-j_tol`.
pub fn build_transport_flow<R: Real>(
    field: &CoefficientField<R>,
    grid: &SpaceTimeGrid<R>,
    options: &ConvergenceOptions<R>,
) -> Result<FlowMap<R>> {
    let flow = converge(field, grid, FlowDirection::BackwardTransport, options)?;
    let min_j = crate::jacobian::min_transport_jacobian(&flow);
    if min_j < -options.j_tol || min_j.is_nan() {
        return Err(Error::NegativeJacobian {
            min_jacobian: min_j.as_f64(),
            tol: options.j_tol.as_f64(),
        });
    }
    Ok(flow)
}

/// Backward traces `X(t0, t, x)` as the limit of regularized flows.
pub fn build_backward_trace<R: Real>(
    field: &CoefficientField<R>,
    grid: &SpaceTimeGrid<R>,
    options: &ConvergenceOptions<R>,
) -> Result<FlowMap<R>> {
    converge(field, grid, FlowDirection::BackwardTrace, options)
}

fn converge<R: Real>(
    field: &CoefficientField<R>,
    grid: &SpaceTimeGrid<R>,
    direction: FlowDirection,
    options: &ConvergenceOptions<R>,
) -> Result<FlowMap<R>> {
    options.validate()?;
    grid.check_padding(field.sup_bound())?;
    let mut trace = Vec::new();
    let mut prev: Option<FlowMap<R>> = None;
    for &eps in &options.schedule {
        let next = integrate_regularized_flow(field, eps, grid, direction, options.max_substeps)?;
        if let Some(p) = prev {
            let d = next.sup_distance(&p);
            trace.push(d);
            if d <= options.tol {
                return Ok(next.with_cauchy_trace(trace));
            }
        }
        prev = Some(next);
    }
    Err(Error::Convergence {
        tol: options.tol.as_f64(),
        trace: trace.iter().map(|v| v.as_f64()).collect(),
    })
}

fn check_dims<R: Real>(field: &CoefficientField<R>, grid: &SpaceTimeGrid<R>) -> Result<()> {
    if field.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "field has dimension {}, grid has {}",
            field.dim(),
            grid.dim()
        )));
    }
    if field.dim() > MAX_DIM {
        return Err(Error::invalid(format!("dimension {} exceeds {MAX_DIM}", field.dim())));
    }
    Ok(())
}

fn substeps<R: Real>(dt: R, max_step: R) -> usize {
    let n = (dt / max_step - R::lit(1e-9)).ceil();
    n.to_usize().unwrap_or(usize::MAX).max(1)
}

/// Samples every pair the direction asks for.
///
/// Autonomous fields only depend on the lag `s - t`, so one trajectory per
/// node serves all pairs; otherwise each start time gets its own trajectories.
fn sample_pairs<R: Real>(
    field: &CoefficientField<R>,
    grid: &SpaceTimeGrid<R>,
    direction: FlowDirection,
    n_sub: usize,
) -> Result<BTreeMap<(usize, usize), Arc<Vec<R>>>> {
    let nt = grid.nt();
    let last = nt - 1;
    let mut out = BTreeMap::new();
    if field.is_autonomous() {
        let backward = direction == FlowDirection::BackwardTrace;
        let lags: Vec<usize> = (0..nt).collect();
        let start = if backward { last } else { 0 };
        let maps: Vec<Arc<Vec<R>>> = trajectories(field, grid, start, &lags, backward, n_sub)?
            .into_iter()
            .map(Arc::new)
            .collect();
        for (s, t) in direction.pairs(nt) {
            let lag = s.abs_diff(t);
            out.insert((s, t), maps[lag].clone());
        }
        return Ok(out);
    }
    match direction {
        FlowDirection::BackwardTransport => {
            for t in 0..nt {
                let v = trajectories(field, grid, t, &[last - t], false, n_sub)?;
                out.insert((last, t), Arc::new(v.into_iter().next().unwrap()));
            }
        }
        FlowDirection::Forward => {
            let lags: Vec<usize> = (0..nt).collect();
            for (s, v) in trajectories(field, grid, 0, &lags, false, n_sub)?
                .into_iter()
                .enumerate()
            {
                out.insert((s, 0), Arc::new(v));
            }
        }
        FlowDirection::BackwardTrace => {
            for t in 0..nt {
                let v = trajectories(field, grid, t, &[t], true, n_sub)?;
                out.insert((0, t), Arc::new(v.into_iter().next().unwrap()));
            }
        }
        FlowDirection::General => {
            for t in 0..nt {
                let lags: Vec<usize> = (0..nt - t).collect();
                for (lag, v) in trajectories(field, grid, t, &lags, false, n_sub)?
                    .into_iter()
                    .enumerate()
                {
                    out.insert((t + lag, t), Arc::new(v));
                }
            }
        }
    }
    Ok(out)
}

/// Integrates from every node starting at time index `start`, recording the
/// position after each requested number of time intervals (`lags`, in
/// increasing order). `backward` runs the time direction in reverse.
fn trajectories<R: Real>(
    field: &CoefficientField<R>,
    grid: &SpaceTimeGrid<R>,
    start: usize,
    lags: &[usize],
    backward: bool,
    n_sub: usize,
) -> Result<Vec<Vec<R>>> {
    let dim = grid.dim();
    let lat = grid.lattice();
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let dt = grid.dt();
    let hs = if backward { -dt } else { dt } / R::from_usize_lossy(n_sub);
    let per_node: Vec<Vec<R>> = (0..lat.len())
        .into_par_iter()
        .map(|node| {
            let mut x = [R::zero(); MAX_DIM];
            lat.coord(node, &mut x[..dim]);
            let mut rec = Vec::with_capacity(lags.len() * dim);
            let mut next = 0;
            for k in 0..=max_lag {
                while next < lags.len() && lags[next] == k {
                    rec.extend_from_slice(&x[..dim]);
                    next += 1;
                }
                if k == max_lag {
                    break;
                }
                let kk = if backward { start - k } else { start + k };
                let t_base = grid.time(kk);
                for j in 0..n_sub {
                    let tau = t_base + R::from_usize_lossy(j) * hs;
                    rk4_step(field, tau, hs, &mut x[..dim]);
                }
            }
            rec
        })
        .collect();
    let mut out = vec![Vec::with_capacity(lat.len() * dim); lags.len()];
    for (node, rec) in per_node.iter().enumerate() {
        for (i, slot) in out.iter_mut().enumerate() {
            let p = &rec[i * dim..(i + 1) * dim];
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::CorruptField {
                    t: grid.time(start).as_f64(),
                    x: lat.coord_vec(node).iter().map(|v| v.as_f64()).collect(),
                });
            }
            slot.extend_from_slice(p);
        }
    }
    Ok(out)
}

#[inline]
fn rk4_step<R: Real>(field: &CoefficientField<R>, t: R, hs: R, x: &mut [R]) {
    let dim = x.len();
    let half = hs * R::lit(0.5);
    let mut k1 = [R::zero(); MAX_DIM];
    let mut k2 = [R::zero(); MAX_DIM];
    let mut k3 = [R::zero(); MAX_DIM];
    let mut k4 = [R::zero(); MAX_DIM];
    let mut y = [R::zero(); MAX_DIM];
    field.eval_into(t, x, &mut k1[..dim]);
    for i in 0..dim {
        y[i] = x[i] + half * k1[i];
    }
    field.eval_into(t + half, &y[..dim], &mut k2[..dim]);
    for i in 0..dim {
        y[i] = x[i] + half * k2[i];
    }
    field.eval_into(t + half, &y[..dim], &mut k3[..dim]);
    for i in 0..dim {
        y[i] = x[i] + hs * k3[i];
    }
    field.eval_into(t + hs, &y[..dim], &mut k4[..dim]);
    let sixth = hs / R::lit(6.0);
    for i in 0..dim {
        x[i] = x[i] + sixth * (k1[i] + R::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
}
