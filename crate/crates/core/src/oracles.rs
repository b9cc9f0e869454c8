//! Closed-form references: the planar `(-sgn x1, 0)` example with its whole
//! family of transport flows and general solutions, and linear fields.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowDirection, FlowEvaluator, FlowMap};
use crate::grid::SpaceTimeGrid;
use crate::linalg::{expm, matvec, sym_max_eigenvalue};
use crate::scalar::Real;
use crate::shapes::Shape;

/// Data of the general solutions of the planar example.
///
/// `phi(y1, y2)` and `h(tau, x2)` build nonconservative solutions,
/// `psi(y1, y2)` and `g(tau, x2)` conservative ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "R: Real + Deserialize<'de>", serialize = "R: Serialize"))]
pub struct SgnExampleSpec<R> {
    pub t_final: R,
    #[serde(default)]
    pub lambda: R,
    #[serde(default = "zero_shape")]
    pub phi: Shape<R>,
    #[serde(default = "zero_shape")]
    pub h: Shape<R>,
    #[serde(default = "zero_shape")]
    pub psi: Shape<R>,
    #[serde(default = "zero_shape")]
    pub g: Shape<R>,
}

fn zero_shape<R>() -> Shape<R> {
    Shape::Zero
}

impl<R: Real> SgnExampleSpec<R> {
    pub fn new(t_final: R) -> Self {
        Self {
            t_final,
            lambda: R::zero(),
            phi: Shape::Zero,
            h: Shape::Zero,
            psi: Shape::Zero,
            g: Shape::Zero,
        }
    }

    pub fn with_lambda(mut self, lambda: R) -> Self {
        self.lambda = lambda;
        self
    }

    /// Requires `h(0, x2) = 0` on a sample of `x2` values.
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > R::zero()) {
            return Err(Error::invalid("final time must be positive"));
        }
        for i in 0..=200 {
            let x2 = R::lit(-10.0 + 0.1 * i as f64);
            let v = self.h.eval(&[R::zero(), x2]);
            if v.abs() > R::lit(1e-12) {
                return Err(Error::Inadmissible(format!("h(0, {x2}) = {v}, must vanish")));
            }
        }
        Ok(())
    }

    /// Whether the nonconservative solution vanishes at the final time.
    pub fn in_exceptional_class(&self) -> bool {
        self.phi.is_zero()
    }

    /// Whether the conservative solution is the reversible one.
    pub fn is_reversible(&self) -> bool {
        self.g.is_zero()
    }
}

/// `X_lambda(s, t, x) = ((|x1| - (s-t))_+ sgn x1, x2 + lambda (s-t-|x1|)_+)`.
pub fn sgn_flow<R: Real>(spec: &SgnExampleSpec<R>, s: R, t: R, x: &[R; 2]) -> Result<[R; 2]> {
    if t > s {
        return Err(Error::invalid(format!("flow needs t <= s, got t={t}, s={s}")));
    }
    Ok(sgn_flow_unchecked(spec.lambda, s - t, x))
}

#[inline]
fn sgn_flow_unchecked<R: Real>(lambda: R, lag: R, x: &[R; 2]) -> [R; 2] {
    let a = x[0].abs();
    [(a - lag).pos() * x[0].sgn0(), x[1] + lambda * (lag - a).pos()]
}

/// `J(X^T)(t, x) = 1` if `|x1| >= T - t`, else `0`, for every `lambda`.
pub fn sgn_jacobian<R: Real>(t: R, x: &[R; 2], t_final: R) -> R {
    if x[0].abs() >= t_final - t {
        R::one()
    } else {
        R::zero()
    }
}

/// `p = phi((|x1| - (T-t))_+ sgn x1, x2) + h((T - t - |x1|)_+, x2)`.
pub fn sgn_general_nonconservative<R: Real>(spec: &SgnExampleSpec<R>, t: R, x: &[R; 2]) -> R {
    let lag = spec.t_final - t;
    let a = x[0].abs();
    spec.phi.eval(&[(a - lag).pos() * x[0].sgn0(), x[1]]) + spec.h.eval(&[(lag - a).pos(), x[1]])
}

/// `pi = 1_{|x1| >= T-t} psi(...) + 1_{|x1| < T-t} g((T-t-|x1|)_+, x2) sgn x1`.
pub fn sgn_general_conservative<R: Real>(spec: &SgnExampleSpec<R>, t: R, x: &[R; 2]) -> R {
    let lag = spec.t_final - t;
    let a = x[0].abs();
    if a >= lag {
        spec.psi.eval(&[(a - lag).pos() * x[0].sgn0(), x[1]])
    } else {
        spec.g.eval(&[(lag - a).pos(), x[1]]) * x[0].sgn0()
    }
}

/// Membership in `{ |x1| < T - t }`.
pub fn sgn_exceptional_set<R: Real>(t: R, x: &[R; 2], t_final: R) -> bool {
    x[0].abs() < t_final - t
}

/// Exact flow family on a grid's time samples.
#[derive(Clone, Debug)]
pub struct SgnOracleFlow<R> {
    pub grid: SpaceTimeGrid<R>,
    pub lambda: R,
}

impl<R: Real> FlowEvaluator<R> for SgnOracleFlow<R> {
    fn has_pair(&self, s: usize, t: usize) -> bool {
        t <= s && s < self.grid.nt()
    }

    fn eval(&self, s: usize, t: usize, x: &[R], out: &mut [R]) {
        let lag = self.grid.time(s) - self.grid.time(t);
        let y = sgn_flow_unchecked(self.lambda, lag, &[x[0], x[1]]);
        out[..2].copy_from_slice(&y);
    }
}

impl<R: Real> SgnOracleFlow<R> {
    /// Node samples of `X_lambda(T, t, .)` as a transport flow.
    pub fn sample_transport(&self) -> Result<FlowMap<R>> {
        if self.grid.dim() != 2 {
            return Err(Error::invalid("the sgn example is planar"));
        }
        let lat = self.grid.lattice();
        let last = self.grid.last_time_index();
        let mut samples = BTreeMap::new();
        let mut x = [R::zero(); 2];
        for t in 0..self.grid.nt() {
            let mut v = Vec::with_capacity(lat.len() * 2);
            let mut y = [R::zero(); 2];
            for k in 0..lat.len() {
                lat.coord(k, &mut x);
                self.eval(last, t, &x, &mut y);
                v.extend_from_slice(&y);
            }
            samples.insert((last, t), Arc::new(v));
        }
        FlowMap::new(self.grid.clone(), FlowDirection::BackwardTransport, samples, R::zero())
    }

    /// Node samples of the backward traces `X(t0, t, x) = (x1 + (t - t0) sgn x1, x2)`,
    /// taking the trace through `x1 = 0` to stay on the interface.
    pub fn sample_backward_trace(&self) -> Result<FlowMap<R>> {
        if self.grid.dim() != 2 {
            return Err(Error::invalid("the sgn example is planar"));
        }
        let lat = self.grid.lattice();
        let mut samples = BTreeMap::new();
        let mut x = [R::zero(); 2];
        for t in 0..self.grid.nt() {
            let lag = self.grid.time(t) - self.grid.t0();
            let mut v = Vec::with_capacity(lat.len() * 2);
            for k in 0..lat.len() {
                lat.coord(k, &mut x);
                v.push(x[0] + lag * x[0].sgn0());
                v.push(x[1]);
            }
            samples.insert((0, t), Arc::new(v));
        }
        FlowMap::new(self.grid.clone(), FlowDirection::BackwardTrace, samples, R::zero())
    }
}

/// Exact flow, jacobian, and OSLC modulus of `a(x) = A x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearOracle<R> {
    pub point: Vec<R>,
    pub jacobian: R,
    pub modulus: R,
}

pub fn linear_field_oracle<R: Real>(a: &[R], s: R, t: R, x: &[R]) -> Result<LinearOracle<R>> {
    let n = x.len();
    if a.len() != n * n {
        return Err(Error::invalid("matrix size does not match the point"));
    }
    let lag = s - t;
    let scaled: Vec<R> = a.iter().map(|&v| v * lag).collect();
    let point = matvec(&expm(&scaled, n), x, n);
    let trace = (0..n).fold(R::zero(), |acc, i| acc + a[i * n + i]);
    let sym: Vec<R> = (0..n * n)
        .map(|k| (a[k] + a[(k % n) * n + k / n]) * R::lit(0.5))
        .collect();
    Ok(LinearOracle {
        point,
        jacobian: (lag * trace).exp(),
        modulus: sym_max_eigenvalue(&sym, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::check_semigroup;
    use crate::grid::BoxRegion;

    #[test]
    fn flow_values() {
        let spec = SgnExampleSpec::new(1.0f64);
        assert_eq!(sgn_flow(&spec, 1.0, 0.0, &[0.5, 0.2]).unwrap(), [0.0, 0.2]);
        let s2 = spec.clone().with_lambda(2.0);
        assert_eq!(sgn_flow(&s2, 1.0, 0.0, &[0.25, 0.0]).unwrap(), [0.0, 1.5]);
        assert_eq!(sgn_flow(&s2, 0.3, 0.3, &[0.25, -1.0]).unwrap(), [0.25, -1.0]);
        assert!(sgn_flow(&spec, 0.0, 1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn jacobian_and_exceptional_set() {
        assert_eq!(sgn_jacobian(0.5, &[0.8, 0.0], 1.0), 1.0);
        assert_eq!(sgn_jacobian(1.0, &[0.0, 3.0], 1.0), 1.0);
        assert_eq!(sgn_jacobian(0.0, &[0.3, 5.0], 1.0), 0.0);
        assert!(sgn_exceptional_set(0.5, &[0.2, 9.0], 1.0));
        assert!(!sgn_exceptional_set(0.25, &[0.8, 0.0], 1.0));
        assert!(!sgn_exceptional_set(1.0 - 1e-12, &[1e-9, 0.0], 1.0));
    }

    #[test]
    fn general_solutions() {
        let mut spec = SgnExampleSpec::new(1.0f64);
        spec.phi = Shape::affine(vec![1.0, 0.0], 0.0);
        assert_eq!(sgn_general_nonconservative(&spec, 0.0, &[1.5, 0.0]), 0.5);
        assert!(!spec.in_exceptional_class());
        let mut e = SgnExampleSpec::new(1.0f64);
        e.h = Shape::affine(vec![1.0, 0.0], 0.0);
        assert_eq!(sgn_general_nonconservative(&e, 0.0, &[0.25, 0.0]), 0.75);
        assert!(e.in_exceptional_class());
        e.validate().unwrap();

        let mut c = SgnExampleSpec::new(1.0f64);
        c.psi = Shape::Constant { value: 1.0 };
        assert_eq!(sgn_general_conservative(&c, 0.5, &[0.7, 0.0]), 1.0);
        assert!(c.is_reversible());
        let mut nc = SgnExampleSpec::new(1.0f64);
        nc.g = Shape::Constant { value: 1.0 };
        assert_eq!(sgn_general_conservative(&nc, 0.0, &[-0.5, 0.0]), -1.0);
        assert!(!nc.is_reversible());
    }

    #[test]
    fn h_must_vanish_initially() {
        let mut spec = SgnExampleSpec::new(1.0f64);
        spec.h = Shape::Constant { value: 1.0 };
        assert!(matches!(spec.validate(), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn oracle_semigroup_is_exact() {
        let g = SpaceTimeGrid::new(
            BoxRegion::cube(2, -2.0f64, 2.0).unwrap(),
            vec![17, 17],
            0.0,
            1.0,
            5,
            0.0,
        )
        .unwrap();
        for lambda in [-1.0, 0.0, 1.0, 3.0] {
            let f = SgnOracleFlow {
                grid: g.clone(),
                lambda,
            };
            let e = check_semigroup(&f, &g, &[(0, 1, 4), (1, 2, 3), (0, 0, 2)]).unwrap();
            assert!(e <= 1e-15, "{e}");
        }
    }

    #[test]
    fn linear_oracle_cases() {
        let z = linear_field_oracle(&[0.0f64; 4], 1.0, 0.0, &[0.3, -0.2]).unwrap();
        assert_eq!((z.point.clone(), z.jacobian, z.modulus), (vec![0.3, -0.2], 1.0, 0.0));
        let r = linear_field_oracle(
            &[0.0f64, -1.0, 1.0, 0.0],
            std::f64::consts::FRAC_PI_2,
            0.0,
            &[0.3, -0.2],
        )
        .unwrap();
        assert!((r.point[0] - 0.2).abs() < 1e-14 && (r.point[1] - 0.3).abs() < 1e-14);
        assert!((r.jacobian - 1.0).abs() < 1e-15 && r.modulus.abs() < 1e-15);
        let d = linear_field_oracle(&[-1.0f64, 0.0, 0.0, 2.0], 0.3, 0.0, &[1.0, 1.0]).unwrap();
        assert!((d.jacobian - 1.34986).abs() < 1e-5);
        assert!((d.modulus - 2.0).abs() < 1e-14);
    }
}
