use serde::Serialize;

use super::SampledMap;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::testfn::BumpTest;

/// Traces `n -> int psi_n(u^n) det(grad u^n) phi` against their limit.
#[derive(Clone, Debug, Serialize)]
pub struct WeakLimitReport<R> {
    /// `traces[n][test]`.
    pub traces: Vec<Vec<R>>,
    pub limit: Vec<R>,
    /// Max over tests of `|trace - limit|`, per `n`.
    pub deviations: Vec<R>,
    /// `deviations[n] / deviations[n-1]`.
    pub ratios: Vec<R>,
    pub final_deviation: R,
}

impl<R: Real> WeakLimitReport<R> {
    pub fn max_ratio(&self) -> R {
        self.ratios.iter().copied().fold(R::zero(), R::max)
    }
}

fn functional<R: Real>(u: &SampledMap<R>, psi: &dyn Fn(&[R]) -> R, test: &BumpTest<R>) -> R {
    let lat = &u.lattice;
    let dim = lat.dim();
    let sup = test.support();
    let mut x = vec![R::zero(); dim];
    let mut acc = R::zero();
    for k in lat.nodes_in_box(&sup.lo, &sup.hi) {
        lat.coord(k, &mut x);
        let phi = test.eval(&x);
        if phi == R::zero() {
            continue;
        }
        let y = &u.values[k * dim..(k + 1) * dim];
        acc = acc + lat.trapezoid_weight(k) * psi(y) * u.det_at(k) * phi;
    }
    acc
}

pub fn weak_jacobian_limit_check<R: Real>(
    u_seq: &[SampledMap<R>],
    psi_seq: &[&dyn Fn(&[R]) -> R],
    psi_limit: &dyn Fn(&[R]) -> R,
    u_limit: &SampledMap<R>,
    tests: &[BumpTest<R>],
) -> Result<WeakLimitReport<R>> {
    if u_seq.len() != psi_seq.len() {
        return Err(Error::invalid("need one psi per map"));
    }
    if u_seq.is_empty() || tests.is_empty() {
        return Err(Error::invalid("empty sequence or test family"));
    }
    if u_seq.iter().any(|u| u.lattice != u_limit.lattice) {
        return Err(Error::GridMismatch("maps must share one lattice".into()));
    }
    let limit: Vec<R> = tests.iter().map(|t| functional(u_limit, psi_limit, t)).collect();
    let traces: Vec<Vec<R>> = u_seq
        .iter()
        .zip(psi_seq)
        .map(|(u, psi)| tests.iter().map(|t| functional(u, *psi, t)).collect())
        .collect();
    let deviations: Vec<R> = traces
        .iter()
        .map(|tr| {
            tr.iter()
                .zip(&limit)
                .map(|(a, b)| (*a - *b).abs())
                .fold(R::zero(), R::max)
        })
        .collect();
    let ratios = deviations
        .windows(2)
        .map(|w| if w[0] > R::zero() { w[1] / w[0] } else { R::zero() })
        .collect();
    let final_deviation = *deviations.last().unwrap();
    Ok(WeakLimitReport {
        traces,
        limit,
        deviations,
        ratios,
        final_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NodeLattice;

    fn identity(lat: &NodeLattice<f64>) -> SampledMap<f64> {
        SampledMap::from_fn(lat, |x, out| out.copy_from_slice(x))
    }

    #[test]
    fn constant_sequence_has_zero_deviation() {
        let lat = NodeLattice::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![17, 17]).unwrap();
        let u = identity(&lat);
        let one = |_: &[f64]| 1.0;
        let tests = vec![BumpTest::new(vec![0.0, 0.0], vec![0.5, 0.5])];
        let r = weak_jacobian_limit_check(&[u.clone(), u.clone()], &[&one, &one], &one, &u, &tests).unwrap();
        assert_eq!(r.deviations, vec![0.0, 0.0]);
    }

    #[test]
    fn oscillating_weights_fade() {
        let lat = NodeLattice::new(vec![-1.0], vec![1.0], vec![4001]).unwrap();
        let u = identity(&lat);
        let tests = vec![BumpTest::new(vec![0.1], vec![0.6])];
        let p1 = |y: &[f64]| (4.0 * y[0]).sin();
        let p2 = |y: &[f64]| (8.0 * y[0]).sin();
        let p3 = |y: &[f64]| (16.0 * y[0]).sin();
        let zero = |_: &[f64]| 0.0;
        let r =
            weak_jacobian_limit_check(&[u.clone(), u.clone(), u.clone()], &[&p1, &p2, &p3], &zero, &u, &tests).unwrap();
        assert!(r.deviations[2] < r.deviations[0]);
        assert!(r.final_deviation < 0.05);
    }
}
