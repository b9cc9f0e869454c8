use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{Diagnostic, OracleSpec, Scenario, SolutionSource};
use super::report::{emit_report, write_table, Assertion, Cell, Summary, Table};
use super::{demo, stability};
use crate::error::{Error, Result};
use crate::fields::{estimate_oslc, jump_direction_check, translation_bound, PairSampler};
use crate::flow::{
    build_backward_trace, build_transport_flow, check_semigroup, flow_diagnostics, integrate_regularized_flow,
    write_flow_bundle, FlowDirection, FlowMap,
};
use crate::grid::SpaceTimeGrid;
use crate::jacobian::{jacobian_det, min_transport_jacobian, write_scalar_bundle, FieldRole, ScalarField};
use crate::oracles::{linear_field_oracle, sgn_general_conservative, sgn_jacobian, SgnExampleSpec, SgnOracleFlow};
use crate::quadrature::gauss_legendre_9;
use crate::shapes::Shape;
use crate::testfn::space_time_tests;
use crate::transport::{bv_trace, duality_pairing, forward_from_trace, l1_trace, reversible_from_flow, weak_residual};

/// A CLI subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Every diagnostic and every bundle.
    Run,
    OslcCheck,
    Flow,
    Backward,
    Forward,
    Pairing,
    Stability,
    Nonuniqueness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::OslcCheck => "oslc-check",
            Command::Flow => "flow",
            Command::Backward => "backward",
            Command::Forward => "forward",
            Command::Pairing => "pairing",
            Command::Stability => "stability",
            Command::Nonuniqueness => "nonuniqueness",
        }
    }

    fn runs(self, stage: Stage) -> bool {
        match self {
            Command::Run => true,
            Command::OslcCheck => stage == Stage::Field,
            Command::Flow => stage == Stage::Flow,
            Command::Backward => stage == Stage::Backward,
            Command::Forward => stage == Stage::Forward,
            Command::Pairing => stage == Stage::Pairing,
            Command::Stability | Command::Nonuniqueness => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Field,
    Flow,
    Backward,
    Forward,
    Pairing,
}

fn stage_of(d: &Diagnostic) -> Stage {
    match d {
        Diagnostic::Oslc { .. } | Diagnostic::TranslationBound { .. } | Diagnostic::JumpCheck { .. } => Stage::Field,
        Diagnostic::FlowOracle { .. }
        | Diagnostic::JacobianOracle { .. }
        | Diagnostic::FlowLipschitz { .. }
        | Diagnostic::Semigroup { .. } => Stage::Flow,
        Diagnostic::L1Trace { .. } | Diagnostic::WeakResidual { .. } => Stage::Backward,
        Diagnostic::Bv { .. } => Stage::Forward,
        Diagnostic::Pairing { .. } => Stage::Pairing,
    }
}

/// Samples `shape` at the nodes of the box of interest; zero in the collar.
pub(crate) fn cut_data(
    grid: &SpaceTimeGrid<f64>,
    shape: &Shape<f64>,
    role: FieldRole,
    t: usize,
) -> Result<ScalarField<f64>> {
    let lat = grid.lattice();
    let values: Vec<f64> = (0..lat.len())
        .into_par_iter()
        .map(|k| {
            if grid.is_inner(k) {
                shape.eval(&lat.coord_vec(k))
            } else {
                0.0
            }
        })
        .collect();
    ScalarField::new(grid.clone(), role, vec![t], vec![values])
}

/// Node samples of the oracle transport flow for a sgn or linear oracle.
pub fn oracle_transport(grid: &SpaceTimeGrid<f64>, oracle: &OracleSpec) -> Result<FlowMap<f64>> {
    match oracle {
        OracleSpec::Sgn2d { lambda, .. } => SgnOracleFlow {
            grid: grid.clone(),
            lambda: *lambda,
        }
        .sample_transport(),
        OracleSpec::Linear { matrix } => {
            let a: Vec<f64> = matrix.concat();
            let lat = grid.lattice();
            let last = grid.last_time_index();
            let mut samples = BTreeMap::new();
            for t in 0..grid.nt() {
                let (s_time, t_time) = (grid.t_final(), grid.time(t));
                let v: Vec<Vec<f64>> = (0..lat.len())
                    .into_par_iter()
                    .map(|k| linear_field_oracle(&a, s_time, t_time, &lat.coord_vec(k)).map(|o| o.point))
                    .collect::<Result<_>>()?;
                samples.insert((last, t), Arc::new(v.concat()));
            }
            FlowMap::new(grid.clone(), FlowDirection::BackwardTransport, samples, 0.0)
        }
    }
}

fn oracle_jacobian(oracle: &OracleSpec, t_final: f64, t: f64, x: &[f64]) -> f64 {
    match oracle {
        OracleSpec::Sgn2d { .. } => sgn_jacobian(t, &[x[0], x[1]], t_final),
        OracleSpec::Linear { matrix } => {
            let trace: f64 = (0..matrix.len()).map(|i| matrix[i][i]).sum();
            ((t_final - t) * trace).exp()
        }
    }
}

/// `int |pi(t, .)|` of the sgn general solution over the lattice.
///
/// Along `x1` the integrand jumps only at `0` and `+-(T - t)`, so each piece
/// gets composite 9-point Gauss-Legendre; `x2` uses `cells` midpoint cells.
pub(crate) fn oracle_l1_reference(spec: &SgnExampleSpec<f64>, grid: &SpaceTimeGrid<f64>, cells: usize) -> Vec<f64> {
    let b = grid.lattice().bounds();
    let hy = (b.hi[1] - b.lo[1]) / cells as f64;
    let (gx, gw) = gauss_legendre_9::<f64>();
    grid.times()
        .iter()
        .map(|&t| {
            let lag = spec.t_final - t;
            let mut cuts = vec![b.lo[0], b.hi[0]];
            cuts.extend([-lag, 0.0, lag].into_iter().filter(|&c| c > b.lo[0] && c < b.hi[0]));
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut nodes = Vec::new();
            for w in cuts.windows(2) {
                let pieces = 64;
                let len = (w[1] - w[0]) / pieces as f64;
                for p in 0..pieces {
                    let mid = w[0] + (p as f64 + 0.5) * len;
                    for q in 0..9 {
                        nodes.push((mid + 0.5 * len * gx[q], 0.5 * len * gw[q]));
                    }
                }
            }
            nodes
                .par_iter()
                .map(|&(x1, wx)| {
                    (0..cells)
                        .map(|j| {
                            let x2 = b.lo[1] + (j as f64 + 0.5) * hy;
                            sgn_general_conservative(spec, t, &[x1, x2]).abs()
                        })
                        .sum::<f64>()
                        * wx
                })
                .sum::<f64>()
                * hy
        })
        .collect()
}

/// Lazily built objects shared by the diagnostics of one run.
struct Context<'a> {
    sc: &'a Scenario,
    flow: Option<FlowMap<f64>>,
    trace: Option<FlowMap<f64>>,
    pi: Option<ScalarField<f64>>,
    u: Option<ScalarField<f64>>,
    oracle_pi: Option<ScalarField<f64>>,
    oracle_abs_pi: Option<ScalarField<f64>>,
}

impl<'a> Context<'a> {
    fn new(sc: &'a Scenario) -> Self {
        Self {
            sc,
            flow: None,
            trace: None,
            pi: None,
            u: None,
            oracle_pi: None,
            oracle_abs_pi: None,
        }
    }

    fn flow(&mut self) -> Result<&FlowMap<f64>> {
        if self.flow.is_none() {
            self.flow = Some(build_transport_flow(&self.sc.field, &self.sc.grid, &self.sc.options)?);
        }
        Ok(self.flow.as_ref().unwrap())
    }

    fn trace(&mut self) -> Result<&FlowMap<f64>> {
        if self.trace.is_none() {
            self.trace = Some(build_backward_trace(&self.sc.field, &self.sc.grid, &self.sc.options)?);
        }
        Ok(self.trace.as_ref().unwrap())
    }

    fn pi(&mut self) -> Result<&ScalarField<f64>> {
        if self.pi.is_none() {
            let shape = self
                .sc
                .config
                .final_data
                .clone()
                .ok_or_else(|| Error::invalid("the scenario has no final_data"))?;
            let grid = &self.sc.grid;
            let pi_t = cut_data(grid, &shape, FieldRole::ConservativePi, grid.last_time_index())?;
            let pi = reversible_from_flow(self.flow()?, &pi_t)?;
            self.pi = Some(pi);
        }
        Ok(self.pi.as_ref().unwrap())
    }

    fn u(&mut self) -> Result<&ScalarField<f64>> {
        if self.u.is_none() {
            let shape = self
                .sc
                .config
                .initial_data
                .clone()
                .ok_or_else(|| Error::invalid("the scenario has no initial_data"))?;
            let u0 = cut_data(&self.sc.grid, &shape, FieldRole::NonconservativeU, 0)?;
            let u = forward_from_trace(self.trace()?, &u0)?;
            self.u = Some(u);
        }
        Ok(self.u.as_ref().unwrap())
    }

    fn sgn_spec(&self) -> Result<SgnExampleSpec<f64>> {
        self.sc
            .config
            .oracle
            .as_ref()
            .and_then(|o| o.sgn_spec(self.sc.grid.t_final()))
            .ok_or_else(|| Error::invalid("this diagnostic needs the sgn2d oracle"))
    }

    /// Cell averages of the closed-form general solution.
    fn oracle_pi(&mut self) -> Result<&ScalarField<f64>> {
        if self.oracle_pi.is_none() {
            let spec = self.sgn_spec()?;
            let grid = &self.sc.grid;
            let pi = ScalarField::from_cell_average(
                grid,
                FieldRole::ConservativePi,
                (0..grid.nt()).collect(),
                8,
                |t, x| sgn_general_conservative(&spec, t, &[x[0], x[1]]),
            )?;
            self.oracle_pi = Some(pi);
        }
        Ok(self.oracle_pi.as_ref().unwrap())
    }

    /// Cell averages of `|pi|` for the general solution. Averaging `pi`
    /// itself cancels across the sign change at `x1 = 0`.
    fn oracle_abs_pi(&mut self) -> Result<&ScalarField<f64>> {
        if self.oracle_abs_pi.is_none() {
            let spec = self.sgn_spec()?;
            let grid = &self.sc.grid;
            // the cone edge moves dt per sample; keep subsamples finer than dt / 2
            let sub = ((2.0 * grid.max_h() / grid.dt()).ceil() as usize).max(8);
            let pi = ScalarField::from_cell_average(
                grid,
                FieldRole::ConservativePi,
                (0..grid.nt()).collect(),
                sub,
                |t, x| sgn_general_conservative(&spec, t, &[x[0], x[1]]).abs(),
            )?;
            self.oracle_abs_pi = Some(pi);
        }
        Ok(self.oracle_abs_pi.as_ref().unwrap())
    }

    fn source(&mut self, source: SolutionSource) -> Result<&ScalarField<f64>> {
        match source {
            SolutionSource::Reversible => self.pi(),
            SolutionSource::OracleGeneral => self.oracle_pi(),
        }
    }
}

fn file_suffix(source: SolutionSource) -> &'static str {
    match source {
        SolutionSource::Reversible => "",
        SolutionSource::OracleGeneral => "_oracle_general",
    }
}

fn quarter_indices(grid: &SpaceTimeGrid<f64>) -> Vec<usize> {
    let last = grid.last_time_index();
    let mut v: Vec<usize> = (0..=4).map(|q| q * last / 4).collect();
    v.dedup();
    v
}

/// Runs `command` on a prepared scenario and writes its reports.
///
/// Failing checks, and stages that cannot run, end up as failed assertions
/// in the returned summary; only I/O errors are returned as errors.
pub fn run_scenario(sc: &Scenario, command: Command) -> Result<Summary> {
    fs::create_dir_all(&sc.out_dir).map_err(|e| Error::io(&sc.out_dir, e))?;
    let mut summary = Summary::new(&sc.config.name, command.name());
    summary.value("grid.h", sc.grid.min_h());
    summary.value("grid.dt", sc.grid.dt());
    match command {
        Command::Stability => stability::run(sc, &mut summary)?,
        Command::Nonuniqueness => demo::run(sc, &mut summary)?,
        _ => run_stages(sc, command, &mut summary)?,
    }
    emit_report(&sc.out_dir, &summary)?;
    Ok(summary)
}

/// Turns a computation error into a failed assertion; I/O errors pass through.
fn record(summary: &mut Summary, name: &str, r: Result<()>) -> Result<()> {
    match r {
        Ok(()) => Ok(()),
        Err(e @ Error::Io { .. }) => Err(e),
        Err(e) => {
            summary.assert(Assertion::failed(name, e.to_string()));
            Ok(())
        }
    }
}

fn run_stages(sc: &Scenario, command: Command, summary: &mut Summary) -> Result<()> {
    let mut ctx = Context::new(sc);
    let mut diagnostics: Vec<Diagnostic> = sc
        .config
        .diagnostics
        .iter()
        .filter(|d| command.runs(stage_of(d)))
        .cloned()
        .collect();
    if command == Command::OslcCheck && diagnostics.is_empty() {
        diagnostics.push(Diagnostic::Oslc { tol: 1e-12 });
    }
    for d in &diagnostics {
        let r = run_diagnostic(&mut ctx, d, summary);
        record(summary, d.name(), r)?;
    }
    let r = write_bundles(&mut ctx, command, summary);
    record(summary, "bundles", r)
}

fn write_bundles(ctx: &mut Context, command: Command, summary: &mut Summary) -> Result<()> {
    let sc = ctx.sc;
    let out = &sc.out_dir;
    let every = (sc.grid.last_time_index() / 4).max(1);
    let want_flow = matches!(command, Command::Run | Command::Flow | Command::Backward);
    let want_pi =
        matches!(command, Command::Run | Command::Backward | Command::Pairing) && sc.config.final_data.is_some();
    let want_u =
        matches!(command, Command::Run | Command::Forward | Command::Pairing) && sc.config.initial_data.is_some();
    if want_flow {
        let flow = ctx.flow()?;
        summary.value("flow.eps_used", flow.eps_used());
        summary.value("flow.cauchy_last", flow.cauchy_trace().last().copied().unwrap_or(0.0));
        let diag = flow_diagnostics(flow, &sc.field);
        let json = serde_json::json!({
            "max_lip_ratio": diag.max_lip_ratio,
            "max_speed_excess": diag.max_speed_excess,
        });
        let last = sc.grid.last_time_index();
        let pairs: Vec<(usize, usize)> = quarter_indices(&sc.grid).into_iter().map(|t| (last, t)).collect();
        write_flow_bundle(flow, &out.join("flow"), Some(&pairs), Some(json))?;
    }
    if want_pi {
        write_scalar_bundle(ctx.pi()?, out, "pi", every)?;
    }
    if want_u {
        write_scalar_bundle(ctx.u()?, out, "u", every)?;
    }
    if command == Command::Pairing {
        let has_pairing = sc
            .config
            .diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::Pairing { .. }));
        if !has_pairing {
            pairing(ctx, None, summary)?;
        }
    }
    Ok(())
}

fn pairing(ctx: &mut Context, max_drift: Option<f64>, summary: &mut Summary) -> Result<()> {
    ctx.pi()?;
    ctx.u()?;
    let p = duality_pairing(ctx.u.as_ref().unwrap(), ctx.pi.as_ref().unwrap())?;
    write_table(
        &ctx.sc.out_dir,
        "pairing.csv",
        &Table::series(["t", "value"], &p.times, &p.values),
    )?;
    summary.value("pairing.drift", p.drift);
    if let Some(m) = max_drift {
        summary.assert(Assertion::at_most("pairing.drift", p.drift, m));
    }
    Ok(())
}

fn run_diagnostic(ctx: &mut Context, d: &Diagnostic, summary: &mut Summary) -> Result<()> {
    let sc = ctx.sc;
    let grid = &sc.grid;
    let field = &sc.field;
    let h = grid.min_h();
    match d {
        Diagnostic::Oslc { tol } => {
            let mut sampler = PairSampler::standard(grid.inner().clone(), h, sc.seed);
            sampler.tolerance = *tol;
            let mut times = vec![grid.t0()];
            if !field.is_autonomous() {
                times.push(0.5 * (grid.t0() + grid.t_final()));
                times.push(grid.t_final());
            }
            let mut worst: Option<crate::fields::OslcReport<f64>> = None;
            for t in times {
                let r = estimate_oslc(field, t, &sampler)?;
                if worst
                    .as_ref()
                    .is_none_or(|w| r.alpha_hat - r.claimed > w.alpha_hat - w.claimed)
                {
                    worst = Some(r);
                }
            }
            let r = worst.expect("at least one time");
            summary.value("oslc.alpha_hat", r.alpha_hat);
            summary.value("oslc.claimed", r.claimed);
            summary.value("oslc.pairs_sampled", r.pairs_sampled as f64);
            if let Some(m) = r.matrix_alpha {
                summary.value("oslc.matrix_alpha", m);
            }
            let mut a = Assertion::at_most("oslc", r.alpha_hat, r.claimed + tol);
            if let Some(w) = &r.worst_pair {
                summary.value("oslc.worst_ratio", w.ratio);
                if r.violated {
                    a = a.with_detail(format!(
                        "OSLC violated at t={}: x={:?}, y={:?}, ratio {} > claimed {}",
                        w.t, w.x, w.y, w.ratio, r.claimed
                    ));
                }
            }
            summary.assert(a);
        }
        Diagnostic::TranslationBound { shift, nodes } => {
            let c = grid.inner().clone();
            let hn = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
            let omega = c.inflate(-hn * (1.0 + 1e-9));
            let (lhs, rhs) = translation_bound(field, grid.t0(), &c, &omega, shift, *nodes)?;
            summary.value("translation.lhs", lhs);
            summary.value("translation.rhs", rhs);
            summary.assert(Assertion::at_most("translation_bound", lhs, rhs));
        }
        Diagnostic::JumpCheck {
            point,
            tol,
            expect_lambda,
        } => {
            let j = jump_direction_check(field, point, grid.t0(), *tol)?;
            summary.value("jump.lambda", j.lambda);
            summary.value("jump.colinearity_error", j.colinearity_error);
            summary.assert(Assertion::at_least("jump.lambda", j.lambda, 0.0));
            summary.assert(Assertion::at_most("jump.colinearity", j.colinearity_error, *tol));
            if let Some(e) = expect_lambda {
                summary.assert(Assertion::at_most("jump.lambda_expected", (j.lambda - e).abs(), *tol));
            }
        }
        Diagnostic::FlowOracle { factor } => {
            let oracle = sc.config.oracle.as_ref().expect("validated");
            let reference = oracle_transport(grid, oracle)?;
            let flow = ctx.flow()?;
            let err = flow.sup_distance(&reference);
            let bound = factor * (h + flow.eps_used());
            summary.value("flow.oracle_error", err);
            summary.value("flow.eps_used", flow.eps_used());
            summary.assert(Assertion::at_most("flow_oracle", err, bound));
        }
        Diagnostic::JacobianOracle {
            max_l1,
            times,
            min_factor,
        } => {
            let oracle = sc.config.oracle.clone().expect("validated");
            let t_final = grid.t_final();
            let flow = ctx.flow()?;
            let mut worst = 0.0f64;
            for &tt in times {
                let k = grid
                    .time_index(tt)
                    .ok_or_else(|| Error::invalid(format!("t={tt} is not a stored time")))?;
                let numeric = jacobian_det(flow, k)?;
                let reference = ScalarField::from_cell_average(grid, FieldRole::JacobianJ, vec![k], 16, |t, x| {
                    oracle_jacobian(&oracle, t_final, t, x)
                })?;
                let l1 = numeric.l1_distance(&reference)?[0];
                summary.value(format!("jacobian.l1_t{k:04}"), l1);
                worst = worst.max(l1);
            }
            let min_j = min_transport_jacobian(flow);
            summary.value("jacobian.min", min_j);
            summary.assert(Assertion::at_most("jacobian_oracle.l1", worst, *max_l1));
            summary.assert(Assertion::at_least("jacobian_oracle.min", min_j, -min_factor * h));
        }
        Diagnostic::FlowLipschitz { slack } => {
            let flow = ctx.flow()?;
            let diag = flow_diagnostics(flow, field);
            summary.value("flow.max_lip_ratio", diag.max_lip_ratio);
            summary.value("flow.max_speed_excess", diag.max_speed_excess);
            summary.assert(Assertion::at_most(
                "flow_lipschitz.ratio",
                diag.max_lip_ratio,
                1.0 + slack,
            ));
            summary.assert(Assertion::at_most(
                "flow_lipschitz.speed",
                diag.max_speed_excess,
                slack * h,
            ));
        }
        Diagnostic::Semigroup { factor, samples } => {
            let eps = ctx.flow()?.eps_used();
            let coarse = SpaceTimeGrid::new(
                grid.inner().clone(),
                grid.nx().to_vec(),
                grid.t0(),
                grid.t_final(),
                *samples,
                grid.padding(),
            )?;
            let scale = (coarse.dt() / grid.dt()).ceil() as usize;
            let general = integrate_regularized_flow(
                field,
                eps,
                &coarse,
                FlowDirection::General,
                sc.options.max_substeps.saturating_mul(scale.max(1)),
            )?;
            let n = *samples;
            let triples: Vec<(usize, usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).flat_map(move |b| (b + 1..n).map(move |c| (a, b, c))))
                .collect();
            let err = check_semigroup(&general, &coarse, &triples)?;
            summary.value("semigroup.error", err);
            summary.assert(Assertion::at_most("semigroup", err, factor * grid.dt()));
        }
        Diagnostic::Pairing { max_drift } => pairing(ctx, Some(*max_drift), summary)?,
        Diagnostic::L1Trace {
            source,
            constant_tol,
            increase_slack,
            oracle_tol,
            strictly_decreasing,
        } => {
            let tag = source.tag();
            let trace = match source {
                SolutionSource::Reversible => l1_trace(ctx.pi()?),
                SolutionSource::OracleGeneral => l1_trace(ctx.oracle_abs_pi()?),
            };
            write_table(
                &sc.out_dir,
                &format!("l1_trace{}.csv", file_suffix(*source)),
                &Table::series(["t", "value"], &trace.times, &trace.values),
            )?;
            summary.value(format!("l1_trace.{tag}.initial"), trace.values[0]);
            summary.value(format!("l1_trace.{tag}.final"), *trace.values.last().unwrap());
            if let Some(tol) = constant_tol {
                summary.assert(Assertion::at_most(
                    format!("l1_trace.{tag}.constant"),
                    trace.relative_spread(),
                    *tol,
                ));
            }
            if let Some(slack) = increase_slack {
                summary.assert(Assertion::at_most(
                    format!("l1_trace.{tag}.nonincreasing"),
                    trace.max_relative_increase(),
                    *slack,
                ));
            }
            if let Some(tol) = oracle_tol {
                let spec = ctx.sgn_spec()?;
                let reference = oracle_l1_reference(&spec, grid, 1024);
                let scale = reference.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
                let err = trace
                    .values
                    .iter()
                    .zip(&reference)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    / scale;
                summary.assert(Assertion::at_most(format!("l1_trace.{tag}.oracle"), err, *tol));
            }
            if *strictly_decreasing {
                let step = trace
                    .values
                    .windows(2)
                    .map(|w| w[1] - w[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                summary.assert(Assertion::below(
                    format!("l1_trace.{tag}.strictly_decreasing"),
                    step,
                    0.0,
                ));
            }
        }
        Diagnostic::WeakResidual { source, max } => {
            let tag = source.tag();
            let tests = space_time_tests(grid);
            let report = weak_residual(ctx.source(*source)?, field, &tests)?;
            let mut table = Table::new(&["test_id", "residual"]);
            for (i, r) in report.residuals.iter().enumerate() {
                table.rows.push(vec![Cell::Int(i), Cell::Real(*r)]);
            }
            write_table(
                &sc.out_dir,
                &format!("weak_residual{}.csv", file_suffix(*source)),
                &table,
            )?;
            summary.value(format!("weak_residual.{tag}.max"), report.max_residual);
            summary.assert(Assertion::at_most(
                format!("weak_residual.{tag}"),
                report.max_residual,
                *max,
            ));
        }
        Diagnostic::Bv { center, radius, slack } => {
            let bv = bv_trace(ctx.u()?, center, *radius, field)?;
            let mut table = Table::new(&["t", "tv", "bound"]);
            for i in 0..bv.times.len() {
                table.rows.push(vec![
                    Cell::Real(bv.times[i]),
                    Cell::Real(bv.tv[i]),
                    Cell::Real(bv.bound[i]),
                ]);
            }
            write_table(&sc.out_dir, "bv.csv", &table)?;
            summary.value("bv.margin", bv.margin);
            summary.assert(Assertion::at_most("bv", bv.margin, *slack));
        }
    }
    Ok(())
}
