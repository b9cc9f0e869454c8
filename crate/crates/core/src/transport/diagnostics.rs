use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::CoefficientField;
use crate::jacobian::{FieldRole, ScalarField};
use crate::scalar::{dist, Real};
use crate::testfn::SpaceTimeTest;

/// A per-time scalar diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct TimeTrace<R> {
    pub times: Vec<R>,
    pub values: Vec<R>,
}

impl<R: Real> TimeTrace<R> {
    /// `max_t |v(t) - v(T)| / max(1, |v(T)|)`.
    pub fn drift(&self) -> R {
        let last = match self.values.last() {
            Some(&v) => v,
            None => return R::zero(),
        };
        let scale = last.abs().max(R::one());
        self.values.iter().map(|&v| (v - last).abs()).fold(R::zero(), R::max) / scale
    }

    /// Largest increase over any earlier value, relative to the largest
    /// magnitude in the trace; nonpositive for a nonincreasing trace.
    pub fn max_relative_increase(&self) -> R {
        let scale = self.values.iter().fold(R::min_positive_value(), |m, v| m.max(v.abs()));
        let mut worst = R::zero();
        let mut running_min = R::infinity();
        for &v in &self.values {
            if running_min.is_finite() {
                worst = worst.max((v - running_min) / scale);
            }
            running_min = running_min.min(v);
        }
        worst
    }

    /// `max |v(t) - v(T)| / |v(T)|`.
    pub fn relative_spread(&self) -> R {
        let last = self.values.last().copied().unwrap_or_else(R::zero);
        let spread = self.values.iter().map(|&v| (v - last).abs()).fold(R::zero(), R::max);
        spread / last.abs().max(R::min_positive_value())
    }
}

/// `v(t) = int u(t) pi(t) dx` per stored time.
#[derive(Clone, Debug, Serialize)]
pub struct PairingTrace<R> {
    pub times: Vec<R>,
    pub values: Vec<R>,
    pub drift: R,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakResidualReport<R> {
    pub residuals: Vec<R>,
    pub max_residual: R,
    pub h: R,
}

#[derive(Clone, Debug, Serialize)]
pub struct BvTrace<R> {
    pub times: Vec<R>,
    pub tv: Vec<R>,
    pub bound: Vec<R>,
    /// `max_t (tv - bound) / bound`; positive means a violation.
    pub margin: R,
}

fn lattice_integral<R: Real>(field: &ScalarField<R>, values: &[R]) -> R {
    let lat = field.grid().lattice();
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != R::zero())
        .map(|(k, &v)| lat.trapezoid_weight(k) * v)
        .fold(R::zero(), |a, b| a + b)
}

pub fn duality_pairing<R: Real>(u: &ScalarField<R>, pi: &ScalarField<R>) -> Result<PairingTrace<R>> {
    u.check_compatible(pi)?;
    let values: Vec<R> = u
        .slices()
        .iter()
        .zip(pi.slices())
        .map(|(a, b)| {
            let prod: Vec<R> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
            lattice_integral(u, &prod)
        })
        .collect();
    let trace = TimeTrace {
        times: u.time_values(),
        values,
    };
    Ok(PairingTrace {
        drift: trace.drift(),
        times: trace.times,
        values: trace.values,
    })
}

/// `|int int pi (d_t phi + a . grad phi)|` for each test, with `pi`
/// expected at every time sample inside the test supports.
pub fn weak_residual<R: Real>(
    pi: &ScalarField<R>,
    field: &CoefficientField<R>,
    tests: &[SpaceTimeTest<R>],
) -> Result<WeakResidualReport<R>> {
    let grid = pi.grid();
    if field.dim() != grid.dim() {
        return Err(Error::GridMismatch("field and solution dimensions differ".into()));
    }
    let lat = grid.lattice();
    let dim = grid.dim();
    let dt = grid.dt();
    let mut x = vec![R::zero(); dim];
    let mut grad = vec![R::zero(); dim];
    let mut a = vec![R::zero(); dim];
    let mut residuals = Vec::with_capacity(tests.len());
    for test in tests {
        let (ta, tb) = test.time_support();
        let sup = test.space.support();
        let nodes = lat.nodes_in_box(&sup.lo, &sup.hi);
        let mut acc = R::zero();
        for (&kt, values) in pi.times().iter().zip(pi.slices()) {
            let t = grid.time(kt);
            if t <= ta || t >= tb {
                continue;
            }
            let mut inner = R::zero();
            for &k in &nodes {
                let p = values[k];
                if p == R::zero() {
                    continue;
                }
                lat.coord(k, &mut x);
                let (_, dphi_dt) = test.eval_grad(t, &x, &mut grad);
                field.eval_into(t, &x, &mut a);
                let mut s = dphi_dt;
                for i in 0..dim {
                    s = s + a[i] * grad[i];
                }
                inner = inner + lat.trapezoid_weight(k) * p * s;
            }
            acc = acc + dt * inner;
        }
        residuals.push(acc.abs());
    }
    let max_residual = residuals.iter().copied().fold(R::zero(), R::max);
    Ok(WeakResidualReport {
        residuals,
        max_residual,
        h: grid.max_h(),
    })
}

/// `||pi(t)||_{L^1}` per stored time, over the whole lattice.
pub fn l1_trace<R: Real>(pi: &ScalarField<R>) -> TimeTrace<R> {
    let values = pi
        .slices()
        .iter()
        .map(|v| {
            let abs: Vec<R> = v.iter().map(|x| x.abs()).collect();
            lattice_integral(pi, &abs)
        })
        .collect();
    TimeTrace {
        times: pi.time_values(),
        values,
    }
}

fn ball_tv<R: Real>(u: &ScalarField<R>, values: &[R], center: &[R], radius: R) -> R {
    let lat = u.grid().lattice();
    let dim = lat.dim();
    let lo: Vec<R> = center.iter().map(|&c| c - radius).collect();
    let hi: Vec<R> = center.iter().map(|&c| c + radius).collect();
    let mut x = vec![R::zero(); dim];
    let mut acc = R::zero();
    for k in lat.nodes_in_box(&lo, &hi) {
        lat.coord(k, &mut x);
        if dist(&x, center) > radius {
            continue;
        }
        let g = (0..dim).fold(R::zero(), |s, axis| s + lat.derivative(values, 1, 0, axis, k).abs());
        acc = acc + lat.trapezoid_weight(k) * g;
    }
    acc
}

/// Discrete total variation of `u(t)` on `B(x0, R)` against
/// `sqrt(N) exp((N-1) int_0^t alpha) TV(u(0), B(x0, R + t |a|))`, with
/// the enlarged ball widened by one cell diagonal for the node sets.
pub fn bv_trace<R: Real>(u: &ScalarField<R>, x0: &[R], radius: R, field: &CoefficientField<R>) -> Result<BvTrace<R>> {
    let grid = u.grid();
    let dim = grid.dim();
    if x0.len() != dim {
        return Err(Error::invalid("ball centre has the wrong dimension"));
    }
    let t0 = grid.t0();
    let diag = grid
        .lattice()
        .spacing()
        .iter()
        .fold(R::zero(), |s, &h| s + h * h)
        .sqrt();
    let reach = radius + field.sup_bound() * (grid.t_final() - t0) + diag;
    let bounds = grid.lattice().bounds();
    for i in 0..dim {
        if x0[i] - reach < bounds.lo[i] - R::lit(1e-12) || x0[i] + reach > bounds.hi[i] + R::lit(1e-12) {
            return Err(Error::invalid(format!(
                "ball of radius {reach} around {x0:?} escapes the lattice"
            )));
        }
    }
    let initial = u
        .at(0)
        .ok_or_else(|| Error::invalid("BV trace needs the initial time"))?;
    let n = R::from_usize_lossy(dim);
    let mut times = Vec::new();
    let mut tv = Vec::new();
    let mut bound = Vec::new();
    let mut margin = R::neg_infinity();
    for (&k, values) in u.times().iter().zip(u.slices()) {
        let t = grid.time(k);
        let v = ball_tv(u, values, x0, radius);
        // The nodes of B(x0, R) carry dual cells reaching half a diagonal
        // past R; the bound's dual cells must cover that set moved by t |a|.
        let enlarged = radius + field.sup_bound() * (t - t0) + diag;
        let b = n.sqrt() * ((n - R::one()) * field.alpha_integral(t0, t)).exp() * ball_tv(u, initial, x0, enlarged);
        margin = margin.max((v - b) / b.max(R::min_positive_value()));
        times.push(t);
        tv.push(v);
        bound.push(b);
    }
    Ok(BvTrace {
        times,
        tv,
        bound,
        margin,
    })
}

/// `p pi` and its weak residual.
pub fn weak_product<R: Real>(
    p: &ScalarField<R>,
    pi: &ScalarField<R>,
    field: &CoefficientField<R>,
    tests: &[SpaceTimeTest<R>],
) -> Result<(ScalarField<R>, WeakResidualReport<R>)> {
    let prod = p.product(pi, FieldRole::ConservativePi)?;
    let report = weak_residual(&prod, field, tests)?;
    Ok((prod, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::library;
    use crate::grid::{BoxRegion, SpaceTimeGrid};
    use crate::testfn::space_time_tests;

    fn grid() -> SpaceTimeGrid<f64> {
        SpaceTimeGrid::new(BoxRegion::cube(2, -1.0, 1.0).unwrap(), vec![17, 17], 0.0, 1.0, 9, 0.0).unwrap()
    }

    #[test]
    fn zero_pi_has_zero_residual() {
        let g = grid();
        let pi = ScalarField::from_fn(&g, FieldRole::ConservativePi, (0..9).collect(), |_, _| 0.0).unwrap();
        let r = weak_residual(&pi, &library::sgn_example(), &space_time_tests(&g)).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn translating_bump_is_a_weak_solution() {
        let g = SpaceTimeGrid::new(BoxRegion::cube(1, -1.0, 1.0).unwrap(), vec![201], 0.0, 1.0, 201, 0.0).unwrap();
        let c = 0.3;
        let pi = ScalarField::from_fn(&g, FieldRole::ConservativePi, (0..201).collect(), |t, x| {
            crate::quadrature::bump_profile((x[0] - c * t) / 0.4)
        })
        .unwrap();
        let r = weak_residual(&pi, &library::constant(vec![c]), &space_time_tests(&g)).unwrap();
        assert!(r.max_residual < 1e-6, "{}", r.max_residual);
    }

    #[test]
    fn pairing_with_static_data_has_no_drift() {
        let g = grid();
        let u = ScalarField::from_fn(&g, FieldRole::NonconservativeU, (0..9).collect(), |_, x| x[0] + 2.0).unwrap();
        let pi = ScalarField::from_fn(&g, FieldRole::ConservativePi, (0..9).collect(), |_, x| x[1] * x[1]).unwrap();
        let p = duality_pairing(&u, &pi).unwrap();
        assert!(p.drift < 1e-15);
        // trapezoid on x2^2 with h = 1/8 overshoots 2/3 by h^2/3
        assert!(
            (p.values[0] - 4.0 * (2.0 / 3.0 + 1.0 / 192.0)).abs() < 1e-12,
            "{}",
            p.values[0]
        );
    }

    #[test]
    fn l1_of_unit_square_indicator() {
        let g = grid();
        let pi = ScalarField::from_fn(&g, FieldRole::ConservativePi, vec![0], |_, x| {
            crate::shapes::Shape::Indicator {
                lo: vec![-0.51, -0.01],
                hi: vec![0.49, 0.99],
            }
            .eval(x)
        })
        .unwrap();
        assert!((l1_trace(&pi).values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_monotonicity_helpers() {
        let t = TimeTrace {
            times: vec![0.0, 0.5, 1.0],
            values: vec![2.0, 1.0, 1.01],
        };
        assert!((t.max_relative_increase() - 0.005f64).abs() < 1e-12);
        assert!((t.relative_spread() - 0.99f64 / 1.01).abs() < 1e-12);
    }

    #[test]
    fn bv_ball_must_fit() {
        let g = grid();
        let u = ScalarField::from_fn(&g, FieldRole::NonconservativeU, vec![0], |_, x| x[0]).unwrap();
        assert!(bv_trace(&u, &[0.0, 0.0], 0.5, &library::zero(2)).is_ok());
        assert!(bv_trace(&u, &[0.0, 0.0], 0.5, &library::sgn_example()).is_err());
    }
}
