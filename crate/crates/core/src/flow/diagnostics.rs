use serde::Serialize;

use super::FlowMap;
use crate::error::{Error, Result};
use crate::fields::CoefficientField;
use crate::grid::SpaceTimeGrid;
use crate::scalar::{dist, Real};

/// Lipschitz and finite-speed measurements for one stored pair.
#[derive(Clone, Debug, Serialize)]
pub struct PairDiagnostics<R> {
    pub s: usize,
    pub t: usize,
    pub lip: R,
    /// `exp(int_t^s alpha)`.
    pub lip_bound: R,
    /// `max |X(s,t,x) - x| - |a|_inf |s - t|`; nonpositive up to integration error.
    pub speed_excess: R,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowDiagnostics<R> {
    pub pairs: Vec<PairDiagnostics<R>>,
    /// Largest `lip / lip_bound`.
    pub max_lip_ratio: R,
    pub max_speed_excess: R,
    /// `max |X(t,t,x) - x|` over stored diagonal pairs; `None` if there are none.
    pub identity_residual: Option<R>,
}

pub fn flow_diagnostics<R: Real>(flow: &FlowMap<R>, field: &CoefficientField<R>) -> FlowDiagnostics<R> {
    let grid = flow.grid();
    let lat = grid.lattice();
    let dim = grid.dim();
    let mut pairs = Vec::new();
    let mut max_lip_ratio = R::zero();
    let mut max_speed_excess = R::neg_infinity();
    let mut identity: Option<R> = None;
    let mut x = vec![R::zero(); dim];
    for (s, t) in flow.stored_pairs() {
        let v = flow.samples(s, t).unwrap();
        let (ts, tt) = (grid.time(s), grid.time(t));
        let (lo, hi) = if ts >= tt { (tt, ts) } else { (ts, tt) };
        let lip = flow.lip_estimate(s, t).unwrap_or_else(R::zero);
        let lip_bound = field.alpha_integral(lo, hi).exp();
        let mut moved = R::zero();
        for k in 0..lat.len() {
            lat.coord(k, &mut x);
            moved = moved.max(dist(&v[k * dim..(k + 1) * dim], &x));
        }
        if s == t {
            identity = Some(identity.unwrap_or_else(R::zero).max(moved));
        }
        let speed_excess = moved - field.sup_bound() * (hi - lo);
        max_lip_ratio = max_lip_ratio.max(lip / lip_bound);
        max_speed_excess = max_speed_excess.max(speed_excess);
        pairs.push(PairDiagnostics {
            s,
            t,
            lip,
            lip_bound,
            speed_excess,
        });
    }
    if pairs.is_empty() {
        max_speed_excess = R::zero();
    }
    FlowDiagnostics {
        pairs,
        max_lip_ratio,
        max_speed_excess,
        identity_residual: identity,
    }
}

/// Anything that can evaluate `X(s, t, x)` for time-index pairs.
pub trait FlowEvaluator<R: Real> {
    fn has_pair(&self, s: usize, t: usize) -> bool;
    fn eval(&self, s: usize, t: usize, x: &[R], out: &mut [R]);
}

impl<R: Real> FlowEvaluator<R> for FlowMap<R> {
    fn has_pair(&self, s: usize, t: usize) -> bool {
        FlowMap::has_pair(self, s, t)
    }

    fn eval(&self, s: usize, t: usize, x: &[R], out: &mut [R]) {
        let v = self.samples(s, t).expect("pair checked by caller");
        self.grid().lattice().interpolate(v, self.grid().dim(), x, out);
    }
}

/// `max |X(s,t,X(t,tau,x)) - X(s,tau,x)|` over the inner nodes of `grid`
/// and the given `(tau, t, s)` index triples.
pub fn check_semigroup<R: Real, F: FlowEvaluator<R> + ?Sized>(
    flow: &F,
    grid: &SpaceTimeGrid<R>,
    triples: &[(usize, usize, usize)],
) -> Result<R> {
    for &(tau, t, s) in triples {
        if !(tau <= t && t <= s) {
            return Err(Error::invalid(format!("triple ({tau}, {t}, {s}) is not ordered")));
        }
        for (a, b) in [(s, t), (t, tau), (s, tau)] {
            if !flow.has_pair(a, b) {
                return Err(Error::invalid(format!("flow does not store pair ({a}, {b})")));
            }
        }
    }
    let dim = grid.dim();
    let lat = grid.lattice();
    let mut x = vec![R::zero(); dim];
    let mut mid = vec![R::zero(); dim];
    let mut lhs = vec![R::zero(); dim];
    let mut rhs = vec![R::zero(); dim];
    let mut worst = R::zero();
    for &(tau, t, s) in triples {
        for k in grid.inner_nodes() {
            lat.coord(k, &mut x);
            flow.eval(t, tau, &x, &mut mid);
            flow.eval(s, t, &mid, &mut lhs);
            flow.eval(s, tau, &x, &mut rhs);
            worst = worst.max(dist(&lhs, &rhs));
        }
    }
    Ok(worst)
}
