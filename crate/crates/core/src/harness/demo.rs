//! The planar sgn example has a transport flow for every `lambda`; the
//! mollification limit picks `lambda = 0`.

use serde::Serialize;

use super::config::Scenario;
use super::report::{write_table, Assertion, Summary, Table};
use crate::error::{Error, Result};
use crate::fields::CoefficientField;
use crate::flow::{
    build_transport_flow, check_semigroup, integrate_regularized_flow, ConvergenceOptions, FlowDirection,
};
use crate::grid::SpaceTimeGrid;
use crate::jacobian::jacobian_det;
use crate::oracles::SgnOracleFlow;
use crate::scalar::dist;

/// Oracle members compared for jacobian equality.
pub const LAMBDAS: [f64; 4] = [-1.0, 0.0, 1.0, 3.0];

#[derive(Clone, Debug, Serialize)]
pub struct NonuniquenessReport {
    pub times: Vec<f64>,
    /// `max |X_1 - X_0|` over inner nodes, per time.
    pub flow_difference: Vec<f64>,
    /// `max |X_num - X_0|` over inner nodes, per time.
    pub numeric_to_x0: Vec<f64>,
    /// `min |X_num - X_1|` over inner nodes with `T - t - |x1| >= deep`,
    /// per time (`NaN` if there are none).
    pub numeric_to_x1: Vec<f64>,
    pub max_flow_difference: f64,
    /// `max |J(X_lambda) - J(X_0)|` of finite-difference jacobians of the
    /// sampled members, over inner nodes at quarter times.
    pub jacobian_difference: f64,
    pub numeric_to_x0_max: f64,
    pub numeric_to_x1_min: f64,
    pub bound: f64,
    pub eps_used: f64,
    /// Per `lambda` in [`LAMBDAS`].
    pub oracle_semigroup: Vec<f64>,
    pub numeric_semigroup: f64,
    pub deep: f64,
}

fn ordered_triples(idx: &[usize]) -> Vec<(usize, usize, usize)> {
    let n = idx.len();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                out.push((idx[a], idx[b], idx[c]));
            }
        }
    }
    out
}

/// Compares `X_0`, `X_1`, and the numeric flow of `field` on `grid`.
///
/// `deep` selects the cone nodes (`T - t - |x1| >= deep`) where the distance
/// to `X_1` is measured.
pub fn nonuniqueness_demo(
    field: &CoefficientField<f64>,
    grid: &SpaceTimeGrid<f64>,
    options: &ConvergenceOptions<f64>,
    deep: f64,
) -> Result<NonuniquenessReport> {
    if grid.dim() != 2 || field.dim() != 2 {
        return Err(Error::invalid("the nonuniqueness demo is planar"));
    }
    let t_final = grid.t_final();
    let h = grid.min_h();
    let lat = grid.lattice();
    let last = grid.last_time_index();
    let inner = grid.inner_nodes();
    let oracle = |lambda: f64| SgnOracleFlow {
        grid: grid.clone(),
        lambda,
    };
    let x0 = oracle(0.0).sample_transport()?;
    let x1 = oracle(1.0).sample_transport()?;
    let numeric = build_transport_flow(field, grid, options)?;
    let eps = numeric.eps_used();

    let mut rep = NonuniquenessReport {
        times: grid.times(),
        flow_difference: Vec::new(),
        numeric_to_x0: Vec::new(),
        numeric_to_x1: Vec::new(),
        max_flow_difference: 0.0,
        jacobian_difference: 0.0,
        numeric_to_x0_max: 0.0,
        numeric_to_x1_min: f64::INFINITY,
        bound: 5.0 * (h + eps),
        eps_used: eps,
        oracle_semigroup: Vec::new(),
        numeric_semigroup: 0.0,
        deep,
    };
    for t in 0..grid.nt() {
        let tt = grid.time(t);
        let (a, b, n) = (
            x0.samples(last, t).unwrap(),
            x1.samples(last, t).unwrap(),
            numeric.samples(last, t).unwrap(),
        );
        let (mut diff, mut to0, mut to1) = (0.0f64, 0.0f64, f64::INFINITY);
        for &k in &inner {
            let p = 2 * k..2 * k + 2;
            diff = diff.max(dist(&a[p.clone()], &b[p.clone()]));
            to0 = to0.max(dist(&n[p.clone()], &a[p.clone()]));
            let x = lat.coord_vec(k);
            if t_final - tt - x[0].abs() >= deep {
                to1 = to1.min(dist(&n[p.clone()], &b[p]));
            }
        }
        rep.max_flow_difference = rep.max_flow_difference.max(diff);
        rep.numeric_to_x0_max = rep.numeric_to_x0_max.max(to0);
        if to1.is_finite() {
            rep.numeric_to_x1_min = rep.numeric_to_x1_min.min(to1);
        }
        rep.flow_difference.push(diff);
        rep.numeric_to_x0.push(to0);
        rep.numeric_to_x1.push(if to1.is_finite() { to1 } else { f64::NAN });
    }

    // The closed-form jacobian `1_{|x1| >= T - t}` does not involve lambda;
    // compare the finite-difference jacobians of the sampled members.
    let quarters: Vec<usize> = {
        let mut v: Vec<usize> = (0..=4).map(|q| q * last / 4).collect();
        v.dedup();
        v
    };
    let reference: Vec<_> = quarters.iter().map(|&t| jacobian_det(&x0, t)).collect::<Result<_>>()?;
    for &lambda in &LAMBDAS {
        let flow = oracle(lambda).sample_transport()?;
        for (slot, &t) in quarters.iter().enumerate() {
            let j = jacobian_det(&flow, t)?;
            let (jv, rv) = (j.at(t).unwrap(), reference[slot].at(t).unwrap());
            for &k in &inner {
                rep.jacobian_difference = rep.jacobian_difference.max((jv[k] - rv[k]).abs());
            }
        }
        let triples = ordered_triples(&quarters);
        rep.oracle_semigroup
            .push(check_semigroup(&oracle(lambda), grid, &triples)?);
    }

    let coarse = SpaceTimeGrid::new(
        grid.inner().clone(),
        grid.nx().to_vec(),
        grid.t0(),
        t_final,
        5,
        grid.padding(),
    )?;
    let scale = (coarse.dt() / grid.dt()).ceil() as usize;
    let general = integrate_regularized_flow(
        field,
        eps,
        &coarse,
        FlowDirection::General,
        options.max_substeps.saturating_mul(scale.max(1)),
    )?;
    rep.numeric_semigroup = check_semigroup(&general, &coarse, &ordered_triples(&[0, 1, 2, 3, 4]))?;
    Ok(rep)
}

pub(crate) fn run(sc: &Scenario, summary: &mut Summary) -> Result<()> {
    let rep = match nonuniqueness_demo(&sc.field, &sc.grid, &sc.options, 0.8) {
        Ok(r) => r,
        Err(e @ Error::Io { .. }) => return Err(e),
        Err(e) => {
            summary.assert(Assertion::failed("nonuniqueness", e.to_string()));
            return Ok(());
        }
    };
    let mut table = Table::new(&["t", "flow_difference", "numeric_to_x0", "numeric_to_x1"]);
    for i in 0..rep.times.len() {
        table.rows.push(
            [
                rep.times[i],
                rep.flow_difference[i],
                rep.numeric_to_x0[i],
                rep.numeric_to_x1[i],
            ]
            .into_iter()
            .map(super::report::Cell::Real)
            .collect(),
        );
    }
    write_table(&sc.out_dir, "nonuniqueness.csv", &table)?;
    summary.value("nonuniqueness.max_flow_difference", rep.max_flow_difference);
    summary.value("nonuniqueness.jacobian_difference", rep.jacobian_difference);
    summary.value("nonuniqueness.numeric_to_x0", rep.numeric_to_x0_max);
    summary.value("nonuniqueness.numeric_to_x1", rep.numeric_to_x1_min);
    summary.value("nonuniqueness.eps_used", rep.eps_used);
    summary.value("nonuniqueness.numeric_semigroup", rep.numeric_semigroup);
    for (l, e) in LAMBDAS.iter().zip(&rep.oracle_semigroup) {
        summary.value(format!("nonuniqueness.oracle_semigroup_lambda{l}"), *e);
    }
    let oracle_sg = rep.oracle_semigroup.iter().copied().fold(0.0, f64::max);
    let span = sc.grid.t_final() - sc.grid.t0();
    summary.assert(Assertion::at_least(
        "nonuniqueness.cone_difference",
        rep.max_flow_difference,
        span - 1e-12,
    ));
    summary.assert(Assertion::at_most(
        "nonuniqueness.jacobian",
        rep.jacobian_difference,
        1e-12,
    ));
    summary.assert(Assertion::at_most(
        "nonuniqueness.numeric_to_x0",
        rep.numeric_to_x0_max,
        rep.bound,
    ));
    summary.assert(Assertion::at_least(
        "nonuniqueness.numeric_to_x1",
        rep.numeric_to_x1_min,
        0.4,
    ));
    summary.assert(Assertion::at_most("nonuniqueness.oracle_semigroup", oracle_sg, 1e-12));
    summary.assert(Assertion::at_most(
        "nonuniqueness.numeric_semigroup",
        rep.numeric_semigroup,
        10.0 * sc.grid.dt(),
    ));
    Ok(())
}
