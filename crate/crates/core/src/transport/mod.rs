//! Backward conservative and forward nonconservative solvers, and the
//! diagnostics of their structural invariants.

mod diagnostics;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::CoefficientField;
use crate::flow::{build_backward_trace, build_transport_flow, ConvergenceOptions, FlowDirection, FlowMap};
use crate::grid::SpaceTimeGrid;
use crate::jacobian::{FieldRole, ScalarField};
use crate::scalar::Real;

pub use diagnostics::{
    bv_trace, duality_pairing, l1_trace, weak_product, weak_residual, BvTrace, PairingTrace, TimeTrace,
    WeakResidualReport,
};

/// Checks that `data` vanishes at every lattice node outside the box of
/// interest, so that pushing it along the flow never needs values beyond
/// the lattice.
fn check_support<R: Real>(grid: &SpaceTimeGrid<R>, data: &[R], what: &str) -> Result<()> {
    let lat = grid.lattice();
    for (k, &v) in data.iter().enumerate() {
        if v != R::zero() && !grid.is_inner(k) {
            return Err(Error::Support(format!(
                "{what} is nonzero ({v}) at {:?}, inside the finite-speed collar of the box",
                lat.coord_vec(k)
            )));
        }
    }
    Ok(())
}

fn final_slice<R: Real>(pi_t: &ScalarField<R>) -> Result<&[R]> {
    let last = pi_t.grid().last_time_index();
    pi_t.at(last)
        .ok_or_else(|| Error::invalid("final data must be stored at the final time"))
}

/// Reversible solution `pi(t, x) = pi_T(X^T(t, x)) J(X^T)(t, x)` with the
/// transport flow built on demand.
pub fn solve_backward_reversible<R: Real>(
    field: &CoefficientField<R>,
    pi_t: &ScalarField<R>,
    options: &ConvergenceOptions<R>,
) -> Result<(ScalarField<R>, FlowMap<R>)> {
    let grid = pi_t.grid();
    check_support(grid, final_slice(pi_t)?, "final data")?;
    let flow = build_transport_flow(field, grid, options)?;
    let pi = reversible_from_flow(&flow, pi_t)?;
    Ok((pi, flow))
}

/// Pushforward of `pi_T` along a given transport flow.
pub fn reversible_from_flow<R: Real>(flow: &FlowMap<R>, pi_t: &ScalarField<R>) -> Result<ScalarField<R>> {
    let grid = flow.grid();
    if !grid.same_discretization(pi_t.grid()) {
        return Err(Error::GridMismatch("final data and flow use different grids".into()));
    }
    if !matches!(
        flow.direction(),
        FlowDirection::BackwardTransport | FlowDirection::General
    ) {
        return Err(Error::invalid("reversible solutions need a transport flow"));
    }
    let data = final_slice(pi_t)?;
    check_support(grid, data, "final data")?;
    let lat = grid.lattice();
    let dim = grid.dim();
    let last = grid.last_time_index();
    let mut values = Vec::with_capacity(grid.nt());
    for t in 0..grid.nt() {
        if t == last {
            values.push(data.to_vec());
            continue;
        }
        let slice = flow
            .slice(t)
            .ok_or_else(|| Error::invalid(format!("flow has no slice at time index {t}")))?;
        let v: Vec<R> = (0..lat.len())
            .into_par_iter()
            .map(|k| {
                let y = &slice.values[k * dim..(k + 1) * dim];
                let mut out = [R::zero()];
                lat.interpolate(data, 1, y, &mut out);
                if out[0] == R::zero() {
                    R::zero()
                } else {
                    out[0] * slice.det_at(k)
                }
            })
            .collect();
        values.push(v);
    }
    ScalarField::new(
        grid.clone(),
        FieldRole::ConservativePi,
        (0..grid.nt()).collect(),
        values,
    )
}

/// Duality solution `u(t, x) = u0(X(t0, t, x))` along converged backward traces.
pub fn solve_forward_duality<R: Real>(
    field: &CoefficientField<R>,
    u0: &ScalarField<R>,
    options: &ConvergenceOptions<R>,
) -> Result<(ScalarField<R>, FlowMap<R>)> {
    let trace = build_backward_trace(field, u0.grid(), options)?;
    let u = forward_from_trace(&trace, u0)?;
    Ok((u, trace))
}

/// Evaluates `u0` at the foot of each backward trace.
///
/// Traces from the box of interest must stay on the lattice; collar nodes
/// whose traces leave it take the clamped value, which never meets the
/// support of a reversible solution.
pub fn forward_from_trace<R: Real>(trace: &FlowMap<R>, u0: &ScalarField<R>) -> Result<ScalarField<R>> {
    let grid = trace.grid();
    if !grid.same_discretization(u0.grid()) {
        return Err(Error::GridMismatch("initial data and flow use different grids".into()));
    }
    if trace.direction() != FlowDirection::BackwardTrace {
        return Err(Error::invalid("forward solutions need backward traces"));
    }
    let data = u0
        .at(0)
        .ok_or_else(|| Error::invalid("initial data must be stored at the initial time"))?;
    let lat = grid.lattice();
    let dim = grid.dim();
    let mut values = Vec::with_capacity(grid.nt());
    for t in 0..grid.nt() {
        if t == 0 {
            values.push(data.to_vec());
            continue;
        }
        let feet = trace
            .samples(0, t)
            .ok_or_else(|| Error::invalid(format!("trace has no slice at time index {t}")))?;
        let mut escaped: Option<usize> = None;
        let v: Vec<R> = (0..lat.len())
            .map(|k| {
                let mut out = [R::zero()];
                let clamped = lat.interpolate(data, 1, &feet[k * dim..(k + 1) * dim], &mut out);
                if clamped && escaped.is_none() && grid.is_inner(k) {
                    escaped = Some(k);
                }
                out[0]
            })
            .collect();
        if let Some(k) = escaped {
            return Err(Error::Support(format!(
                "backward trace from {:?} at t={} leaves the padded lattice",
                lat.coord_vec(k),
                grid.time(t)
            )));
        }
        values.push(v);
    }
    ScalarField::new(
        grid.clone(),
        FieldRole::NonconservativeU,
        (0..grid.nt()).collect(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::library;
    use crate::grid::BoxRegion;

    fn grid_1d(sup: f64) -> SpaceTimeGrid<f64> {
        SpaceTimeGrid::for_speed(BoxRegion::cube(1, -1.0, 1.0).unwrap(), vec![81], 0.0, 0.5, 11, sup).unwrap()
    }

    #[test]
    fn zero_field_keeps_final_data() {
        let g = grid_1d(0.0);
        let a = library::zero(1);
        let bump = |_: f64, x: &[f64]| crate::quadrature::bump_profile(x[0] / 0.5);
        let pi_t = ScalarField::from_fn(&g, FieldRole::ConservativePi, vec![10], bump).unwrap();
        let (pi, _) = solve_backward_reversible(&a, &pi_t, &ConvergenceOptions::standard(&g)).unwrap();
        for t in 0..11 {
            for (p, q) in pi.at(t).unwrap().iter().zip(pi_t.at(10).unwrap()) {
                assert!((p - q).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn support_in_collar_is_rejected() {
        let g = grid_1d(1.0);
        let a = library::neg_sgn_1d();
        let wide = ScalarField::from_fn(&g, FieldRole::ConservativePi, vec![10], |_, _| 1.0).unwrap();
        assert!(matches!(
            solve_backward_reversible(&a, &wide, &ConvergenceOptions::standard(&g)),
            Err(Error::Support(_))
        ));
    }

    #[test]
    fn forward_neg_sgn_shifts_outward() {
        let g =
            SpaceTimeGrid::for_speed(BoxRegion::cube(1, -1.0f64, 1.0).unwrap(), vec![81], 0.0, 0.25, 6, 1.0).unwrap();
        let a = library::neg_sgn_1d();
        let u0 = ScalarField::from_fn(&g, FieldRole::NonconservativeU, vec![0], |_, x| x[0]).unwrap();
        let (u, _) = solve_forward_duality(&a, &u0, &ConvergenceOptions::standard(&g)).unwrap();
        assert!((u.sample(5, &[0.5]).unwrap() - 0.75).abs() < 1e-9);
        assert!((u.sample(5, &[-0.5]).unwrap() + 0.75).abs() < 1e-9);
    }
}
