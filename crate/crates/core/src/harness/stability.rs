//! Weak stability of reversible and duality solutions under approximation
//! of the coefficient, measured on a finite family of test functionals.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{OracleSpec, Scenario, StabilitySpec};
use super::report::{write_table, Assertion, Cell, Summary, Table};
use super::scenario::cut_data;
use crate::error::{Error, Result};
use crate::fields::{estimate_oslc, library, mollify, CoefficientField, PairSampler};
use crate::flow::{
    build_backward_trace, build_transport_flow, integrate_regularized_flow, ConvergenceOptions, FlowDirection, FlowMap,
};
use crate::grid::SpaceTimeGrid;
use crate::jacobian::{inner_weight, FieldRole, ScalarField};
use crate::oracles::SgnOracleFlow;
use crate::testfn::{spatial_tests, BumpTest};
use crate::transport::{forward_from_trace, reversible_from_flow};

/// An approximating sequence `a_n -> a`.
#[derive(Clone, Debug, PartialEq)]
pub enum Sequence {
    /// `a_n = a * rho_{eps_n}`, flows integrated classically.
    Mollification(Vec<f64>),
    /// `a_n = a + (1/n) sin(n x1) e1` for the planar sgn field.
    Oscillatory(Vec<f64>),
}

impl Sequence {
    pub fn params(&self) -> &[f64] {
        match self {
            Sequence::Mollification(v) | Sequence::Oscillatory(v) => v,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Sequence::Mollification(_) => "mollification",
            Sequence::Oscillatory(_) => "oscillatory",
        }
    }
}

/// The limit solutions the sequence is compared with.
#[derive(Clone, Debug)]
pub struct LimitSolutions {
    pub pi: ScalarField<f64>,
    pub u: ScalarField<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRow {
    pub n: usize,
    pub test_id: usize,
    pub dev_pi: f64,
    pub dev_api: f64,
    pub dev_u: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub nonincreasing: bool,
    pub final_ratio: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub sequence: String,
    pub params: Vec<f64>,
    pub rows: Vec<StabilityRow>,
    /// Max over tests, per `n`.
    pub max_dev_pi: Vec<f64>,
    pub max_dev_api: Vec<f64>,
    pub max_dev_u: Vec<f64>,
    /// `sup_t |u_n - u|_{L1(box)}`.
    pub u_l1: Vec<f64>,
    /// `sup_t |pi_n - pi|_{L1(box)}`, recorded only.
    pub pi_l1: Vec<f64>,
    pub alpha_hat: Vec<f64>,
    pub alpha_hat_limit: f64,
    pub pi: Verdict,
    pub api: Verdict,
    pub u: Verdict,
    /// Limit modulus no larger than the tail minimum of the sequence.
    pub alpha_ok: bool,
}

/// Deviations closer than this are roundoff on O(1) test functionals.
const ROUNDOFF: f64 = 1e-12;

fn verdict(seq: &[f64], max_final_ratio: f64) -> Verdict {
    let nonincreasing = seq.windows(2).all(|w| w[1] <= w[0] + ROUNDOFF);
    let first = seq.first().copied().unwrap_or(0.0);
    let last = seq.last().copied().unwrap_or(0.0);
    let final_ratio = if first > 0.0 { last / first } else { 0.0 };
    Verdict {
        nonincreasing,
        final_ratio,
        passed: nonincreasing && final_ratio <= max_final_ratio,
    }
}

/// Node weights `w phi` and `w grad phi` of one test, on its support.
struct Weights {
    nodes: Vec<usize>,
    phi: Vec<f64>,
    grad: Vec<f64>,
}

fn weights(grid: &SpaceTimeGrid<f64>, test: &BumpTest<f64>) -> Weights {
    let lat = grid.lattice();
    let dim = grid.dim();
    let sup = test.support();
    let mut out = Weights {
        nodes: Vec::new(),
        phi: Vec::new(),
        grad: Vec::new(),
    };
    let mut x = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for k in lat.nodes_in_box(&sup.lo, &sup.hi) {
        lat.coord(k, &mut x);
        let v = test.eval_grad(&x, &mut g);
        let w = lat.trapezoid_weight(k);
        out.nodes.push(k);
        out.phi.push(w * v);
        out.grad.extend(g.iter().map(|d| w * d));
    }
    out
}

/// Velocity at every node, `a[k * dim + i]`; autonomous fields only need `t0`.
fn node_velocity(field: &CoefficientField<f64>, grid: &SpaceTimeGrid<f64>, t: f64) -> Vec<f64> {
    let lat = grid.lattice();
    let dim = grid.dim();
    (0..lat.len())
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut a = vec![0.0; dim];
            field.eval_into(t, &lat.coord_vec(k), &mut a);
            a
        })
        .collect()
}

struct Member {
    pi: ScalarField<f64>,
    u: ScalarField<f64>,
    field: CoefficientField<f64>,
}

fn member(
    base: &CoefficientField<f64>,
    sequence: &Sequence,
    index: usize,
    grid: &SpaceTimeGrid<f64>,
    options: &ConvergenceOptions<f64>,
    pi_t: &ScalarField<f64>,
    u0: &ScalarField<f64>,
) -> Result<Member> {
    let p = sequence.params()[index];
    let (field, flow, trace) = match sequence {
        Sequence::Mollification(_) => {
            let smooth = mollify(base, p)?;
            grid.check_padding(smooth.sup_bound())?;
            let flow =
                integrate_regularized_flow(base, p, grid, FlowDirection::BackwardTransport, options.max_substeps)?;
            let trace = integrate_regularized_flow(base, p, grid, FlowDirection::BackwardTrace, options.max_substeps)?;
            (smooth, flow, trace)
        }
        Sequence::Oscillatory(_) => {
            let a_n = library::oscillatory_sgn(p);
            let flow = build_transport_flow(&a_n, grid, options)?;
            let trace = build_backward_trace(&a_n, grid, options)?;
            (a_n, flow, trace)
        }
    };
    Ok(Member {
        pi: reversible_from_flow(&flow, pi_t)?,
        u: forward_from_trace(&trace, u0)?,
        field,
    })
}

/// Compares the solutions of each `a_n` with the limit solutions.
///
/// Each member must pass the sampled OSLC check against its claimed modulus
/// and fit the grid's finite-speed collar; the first that does not aborts
/// the experiment with its index.
#[allow(clippy::too_many_arguments)]
pub fn stability_experiment(
    base: &CoefficientField<f64>,
    sequence: &Sequence,
    grid: &SpaceTimeGrid<f64>,
    options: &ConvergenceOptions<f64>,
    pi_t: &ScalarField<f64>,
    u0: &ScalarField<f64>,
    limit: &LimitSolutions,
    tests: &[BumpTest<f64>],
    seed: u64,
    max_final_ratio: f64,
) -> Result<ConvergenceReport> {
    if sequence.params().is_empty() || tests.is_empty() {
        return Err(Error::invalid("empty sequence or test family"));
    }
    if matches!(sequence, Sequence::Oscillatory(_)) && base.dim() != 2 {
        return Err(Error::invalid("the oscillatory sequence perturbs a planar field"));
    }
    if !limit.pi.grid().same_discretization(grid) || !limit.u.grid().same_discretization(grid) {
        return Err(Error::GridMismatch("limit solutions live on another grid".into()));
    }
    let dim = grid.dim();
    let h = grid.min_h();
    let sampler = PairSampler::standard(grid.inner().clone(), h, seed);
    let alpha_hat_limit = estimate_oslc(base, grid.t0(), &sampler)?.alpha_hat;
    let w: Vec<Weights> = tests.iter().map(|t| weights(grid, t)).collect();
    let inner_w: Vec<f64> = (0..grid.lattice().len()).map(|k| inner_weight(grid, k)).collect();
    let autonomous = base.is_autonomous();
    let a_limit_0 = node_velocity(base, grid, grid.t0());

    let mut rows = Vec::new();
    let mut report = ConvergenceReport {
        sequence: sequence.label().to_string(),
        params: sequence.params().to_vec(),
        rows: Vec::new(),
        max_dev_pi: Vec::new(),
        max_dev_api: Vec::new(),
        max_dev_u: Vec::new(),
        u_l1: Vec::new(),
        pi_l1: Vec::new(),
        alpha_hat: Vec::new(),
        alpha_hat_limit,
        pi: verdict(&[], max_final_ratio),
        api: verdict(&[], max_final_ratio),
        u: verdict(&[], max_final_ratio),
        alpha_ok: true,
    };
    for n in 0..sequence.params().len() {
        let m = member(base, sequence, n, grid, options, pi_t, u0)
            .map_err(|e| Error::Inadmissible(format!("sequence member n={n}: {e}")))?;
        let oslc = estimate_oslc(&m.field, grid.t0(), &sampler)?;
        if oslc.violated || !m.field.sup_bound().is_finite() {
            return Err(Error::Inadmissible(format!(
                "sequence member n={n} has sampled OSLC ratio {} above its modulus {}",
                oslc.alpha_hat, oslc.claimed
            )));
        }
        report.alpha_hat.push(oslc.alpha_hat);
        let a_n_0 = node_velocity(&m.field, grid, grid.t0());

        let mut dev = vec![[0.0f64; 3]; tests.len()];
        let mut u_l1 = 0.0f64;
        let mut pi_l1 = 0.0f64;
        for (slot, &kt) in limit.pi.times().iter().enumerate() {
            let t = grid.time(kt);
            let owned;
            let (a_n, a_lim): (&[f64], &[f64]) = if autonomous {
                (&a_n_0, &a_limit_0)
            } else {
                owned = (node_velocity(&m.field, grid, t), node_velocity(base, grid, t));
                (&owned.0, &owned.1)
            };
            let pn = m.pi.at(kt).ok_or_else(|| Error::invalid("member is missing a time"))?;
            let un = m.u.at(kt).ok_or_else(|| Error::invalid("member is missing a time"))?;
            let pl = &limit.pi.slices()[slot];
            let ul = limit
                .u
                .at(kt)
                .ok_or_else(|| Error::invalid("limit u is missing a time"))?;
            for (j, wj) in w.iter().enumerate() {
                let (mut s_pi, mut s_api, mut s_u) = (0.0, 0.0, 0.0);
                for (i, &k) in wj.nodes.iter().enumerate() {
                    s_pi += (pn[k] - pl[k]) * wj.phi[i];
                    s_u += (un[k] - ul[k]) * wj.phi[i];
                    for c in 0..dim {
                        s_api += (a_n[k * dim + c] * pn[k] - a_lim[k * dim + c] * pl[k]) * wj.grad[i * dim + c];
                    }
                }
                dev[j][0] = dev[j][0].max(s_pi.abs());
                dev[j][1] = dev[j][1].max(s_api.abs());
                dev[j][2] = dev[j][2].max(s_u.abs());
            }
            let (mut du, mut dp) = (0.0, 0.0);
            for k in 0..inner_w.len() {
                if inner_w[k] > 0.0 {
                    du += inner_w[k] * (un[k] - ul[k]).abs();
                    dp += inner_w[k] * (pn[k] - pl[k]).abs();
                }
            }
            u_l1 = u_l1.max(du);
            pi_l1 = pi_l1.max(dp);
        }
        for (j, d) in dev.iter().enumerate() {
            rows.push(StabilityRow {
                n,
                test_id: j,
                dev_pi: d[0],
                dev_api: d[1],
                dev_u: d[2],
            });
        }
        report.max_dev_pi.push(dev.iter().map(|d| d[0]).fold(0.0, f64::max));
        report.max_dev_api.push(dev.iter().map(|d| d[1]).fold(0.0, f64::max));
        report.max_dev_u.push(dev.iter().map(|d| d[2]).fold(0.0, f64::max));
        report.u_l1.push(u_l1);
        report.pi_l1.push(pi_l1);
    }
    report.rows = rows;
    report.pi = verdict(&report.max_dev_pi, max_final_ratio);
    report.api = verdict(&report.max_dev_api, max_final_ratio);
    report.u = verdict(&report.max_dev_u, max_final_ratio);
    let tail = &report.alpha_hat[report.alpha_hat.len() / 2..];
    let liminf = tail.iter().copied().fold(f64::INFINITY, f64::min);
    report.alpha_ok = alpha_hat_limit <= liminf + 1e-9;
    Ok(report)
}

/// Limit solutions: closed form for the sgn oracle, numeric flows otherwise.
pub fn limit_solutions(
    field: &CoefficientField<f64>,
    grid: &SpaceTimeGrid<f64>,
    options: &ConvergenceOptions<f64>,
    oracle: Option<&OracleSpec>,
    pi_t: &ScalarField<f64>,
    u0: &ScalarField<f64>,
) -> Result<LimitSolutions> {
    let (flow, trace): (FlowMap<f64>, FlowMap<f64>) = match oracle {
        Some(OracleSpec::Sgn2d { .. }) => {
            let o = SgnOracleFlow {
                grid: grid.clone(),
                lambda: 0.0,
            };
            (o.sample_transport()?, o.sample_backward_trace()?)
        }
        _ => (
            build_transport_flow(field, grid, options)?,
            build_backward_trace(field, grid, options)?,
        ),
    };
    Ok(LimitSolutions {
        pi: reversible_from_flow(&flow, pi_t)?,
        u: forward_from_trace(&trace, u0)?,
    })
}

pub(crate) fn run(sc: &Scenario, summary: &mut Summary) -> Result<()> {
    summary.notes.push(
        "weak-* convergence is tested against a finite family of test functionals, uniformly over stored times".into(),
    );
    let r = experiment(sc, summary);
    match r {
        Ok(()) => Ok(()),
        Err(e @ Error::Io { .. }) => Err(e),
        Err(e) => {
            summary.assert(Assertion::failed("stability", e.to_string()));
            Ok(())
        }
    }
}

fn experiment(sc: &Scenario, summary: &mut Summary) -> Result<()> {
    let spec = sc
        .config
        .stability
        .as_ref()
        .ok_or_else(|| Error::invalid("the scenario has no stability section"))?;
    let grid = &sc.grid;
    let h = grid.min_h();
    let sequence = match spec {
        StabilitySpec::Mollification { base, count, .. } => {
            let b = base.unwrap_or(8.0 * h);
            Sequence::Mollification((0..*count).map(|n| b * 0.5f64.powi(n as i32)).collect())
        }
        StabilitySpec::Oscillatory { n, .. } => Sequence::Oscillatory(n.clone()),
    };
    let final_shape = sc
        .config
        .final_data
        .as_ref()
        .ok_or_else(|| Error::invalid("stability needs final_data"))?;
    let initial_shape = sc
        .config
        .initial_data
        .as_ref()
        .ok_or_else(|| Error::invalid("stability needs initial_data"))?;
    let pi_t = cut_data(grid, final_shape, FieldRole::ConservativePi, grid.last_time_index())?;
    let u0 = cut_data(grid, initial_shape, FieldRole::NonconservativeU, 0)?;
    let limit = limit_solutions(&sc.field, grid, &sc.options, sc.config.oracle.as_ref(), &pi_t, &u0)?;
    let tests = spatial_tests(grid.inner());
    let report = stability_experiment(
        &sc.field,
        &sequence,
        grid,
        &sc.options,
        &pi_t,
        &u0,
        &limit,
        &tests,
        sc.seed,
        spec.max_final_ratio(),
    )?;

    let mut table = Table::new(&["n", "test_id", "dev_pi", "dev_api", "dev_u"]);
    for r in &report.rows {
        table.rows.push(vec![
            Cell::Int(r.n),
            Cell::Int(r.test_id),
            Cell::Real(r.dev_pi),
            Cell::Real(r.dev_api),
            Cell::Real(r.dev_u),
        ]);
    }
    write_table(&sc.out_dir, "stability.csv", &table)?;
    for (n, p) in report.params.iter().enumerate() {
        summary.value(format!("stability.param_n{n}"), *p);
        summary.value(format!("stability.dev_pi_n{n}"), report.max_dev_pi[n]);
        summary.value(format!("stability.dev_api_n{n}"), report.max_dev_api[n]);
        summary.value(format!("stability.dev_u_n{n}"), report.max_dev_u[n]);
        summary.value(format!("stability.u_l1_n{n}"), report.u_l1[n]);
        summary.value(format!("stability.pi_l1_n{n}"), report.pi_l1[n]);
        summary.value(format!("stability.alpha_hat_n{n}"), report.alpha_hat[n]);
    }
    summary.value("stability.alpha_hat_limit", report.alpha_hat_limit);
    let ratio = spec.max_final_ratio();
    for (name, v) in [("pi", &report.pi), ("api", &report.api), ("u", &report.u)] {
        let mut a = Assertion::at_most(format!("stability.{name}.final_ratio"), v.final_ratio, ratio);
        a.passed = v.passed;
        if !v.nonincreasing {
            a = a.with_detail("deviations increase along the sequence");
        }
        summary.assert(a);
    }
    let liminf = report.alpha_hat[report.alpha_hat.len() / 2..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut a = Assertion::at_most("stability.alpha_limit", report.alpha_hat_limit, liminf + 1e-9);
    a.passed = report.alpha_ok;
    summary.assert(a);
    Ok(())
}
