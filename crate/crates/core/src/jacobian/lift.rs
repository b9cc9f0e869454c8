use rayon::prelude::*;

use super::{FieldRole, ScalarField, MAX_DIM};
use crate::error::{Error, Result};
use crate::flow::{FlowDirection, FlowMap};
use crate::grid::NodeLattice;
use crate::linalg::det;
use crate::scalar::Real;
use crate::testfn::space_time_tests;

/// `V = (V_0, ..., V_N)` with `V_k = (-1)^k det(dH_i/dy_j)_{j != k}`,
/// `y = (t, x)`, and its weak divergence measured on the test family.
#[derive(Clone, Debug)]
pub struct DivergenceFreeLift<R> {
    pub components: Vec<ScalarField<R>>,
    /// `|int int V . grad_{t,x} phi|` per space-time test.
    pub per_test: Vec<R>,
    pub residual: R,
}

/// The space-time lattice `(t, x)` of a grid, time being the slowest axis.
fn space_time_lattice<R: Real>(h: &ScalarField<R>) -> Result<NodeLattice<R>> {
    let g = h.grid();
    let lat = g.lattice();
    let mut lo = vec![g.t0()];
    let mut hi = vec![g.t_final()];
    let mut n = vec![g.nt()];
    lo.extend_from_slice(lat.lo());
    hi.extend_from_slice(lat.hi());
    n.extend_from_slice(lat.counts());
    NodeLattice::new(lo, hi, n)
}

pub fn divergence_free_lift<R: Real>(h: &[ScalarField<R>]) -> Result<DivergenceFreeLift<R>> {
    let first = h.first().ok_or_else(|| Error::invalid("lift needs N potentials"))?;
    let grid = first.grid();
    let n = grid.dim();
    if h.len() != n {
        return Err(Error::invalid(format!(
            "need {n} potentials in dimension {n}, got {}",
            h.len()
        )));
    }
    if n + 1 > MAX_DIM {
        return Err(Error::invalid("dimension too large for the space-time lift"));
    }
    for q in &h[1..] {
        first.check_compatible(q)?;
    }
    if first.times() != (0..grid.nt()).collect::<Vec<_>>().as_slice() {
        return Err(Error::invalid("lift potentials must be sampled at every time"));
    }
    let st = space_time_lattice(first)?;
    let flat: Vec<Vec<R>> = h.iter().map(|f| f.slices().concat()).collect();
    let space_len = grid.lattice().len();

    // comps[k][node]
    let per_node: Vec<[R; MAX_DIM]> = (0..st.len())
        .into_par_iter()
        .map(|node| {
            let mut g = [R::zero(); MAX_DIM * MAX_DIM];
            for i in 0..n {
                for j in 0..=n {
                    g[i * (n + 1) + j] = st.derivative(&flat[i], 1, 0, j, node);
                }
            }
            let mut v = [R::zero(); MAX_DIM];
            let mut minor = [R::zero(); MAX_DIM * MAX_DIM];
            for (k, vk) in v.iter_mut().enumerate().take(n + 1) {
                for i in 0..n {
                    let mut c = 0;
                    for j in 0..=n {
                        if j != k {
                            minor[i * n + c] = g[i * (n + 1) + j];
                            c += 1;
                        }
                    }
                }
                let d = det(&minor[..n * n], n);
                *vk = if k % 2 == 0 { d } else { -d };
            }
            v
        })
        .collect();

    let mut per_test = Vec::new();
    let lat = grid.lattice();
    let dt = grid.dt();
    let mut grad = vec![R::zero(); n];
    let mut x = vec![R::zero(); n];
    for test in space_time_tests(grid) {
        let sup = test.space.support();
        let nodes = lat.nodes_in_box(&sup.lo, &sup.hi);
        let (ta, tb) = test.time_support();
        let mut acc = R::zero();
        for kt in 0..grid.nt() {
            let t = grid.time(kt);
            if t < ta || t > tb {
                continue;
            }
            let wt = if kt == 0 || kt + 1 == grid.nt() {
                dt * R::lit(0.5)
            } else {
                dt
            };
            for &k in &nodes {
                lat.coord(k, &mut x);
                let (_, dphi_dt) = test.eval_grad(t, &x, &mut grad);
                let v = &per_node[kt * space_len + k];
                let mut s = v[0] * dphi_dt;
                for i in 0..n {
                    s = s + v[i + 1] * grad[i];
                }
                acc = acc + wt * lat.trapezoid_weight(k) * s;
            }
        }
        per_test.push(acc.abs());
    }
    let residual = per_test.iter().copied().fold(R::zero(), R::max);
    let components = (0..=n)
        .map(|c| {
            let values = (0..grid.nt())
                .map(|kt| (0..space_len).map(|k| per_node[kt * space_len + k][c]).collect())
                .collect();
            ScalarField::new(grid.clone(), FieldRole::LiftComponent, first.times().to_vec(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DivergenceFreeLift {
        components,
        per_test,
        residual,
    })
}

/// The component fields `H_i(t, x) = X^T_i(t, x)` of a transport flow.
pub fn flow_components<R: Real>(flow: &FlowMap<R>) -> Result<Vec<ScalarField<R>>> {
    match flow.direction() {
        FlowDirection::BackwardTransport | FlowDirection::General => {}
        other => {
            return Err(Error::invalid(format!(
                "flow components need a transport flow, got {other:?}"
            )))
        }
    }
    let grid = flow.grid();
    let dim = grid.dim();
    let nt = grid.nt();
    (0..dim)
        .map(|i| {
            let values = (0..nt)
                .map(|t| {
                    let s = flow
                        .slice(t)
                        .ok_or_else(|| Error::invalid(format!("missing flow slice {t}")))?;
                    Ok(s.values.iter().skip(i).step_by(dim).copied().collect())
                })
                .collect::<Result<Vec<Vec<R>>>>()?;
            ScalarField::new(grid.clone(), FieldRole::NonconservativeU, (0..nt).collect(), values)
        })
        .collect()
}
