//! Acceptance suite for the reference configuration: a 129x129 lattice on
//! [-2, 2]^2 with 101 time samples and T = 1.
//!
//! Runs without the libtest harness so that every criterion prints exactly
//! one pass/fail line. Positional arguments filter criteria by substring.

#![allow(clippy::type_complexity)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use oslc_transport::fields::{estimate_oslc, jump_direction_check, library, mollify, PairSampler};
use oslc_transport::flow::{
    build_transport_flow, integrate_regularized_flow, ConvergenceOptions, FlowDirection, FlowEvaluator,
};
use oslc_transport::grid::{BoxRegion, SpaceTimeGrid};
use oslc_transport::harness::{
    load_config, nonuniqueness_demo, run_scenario, Command, Overrides, Scenario, ScenarioConfig, Summary,
};
use oslc_transport::jacobian::{
    divergence_free_lift, flow_components, jacobian_det, jacobian_solution, transport_jacobian,
    weak_jacobian_limit_check, FieldRole, SampledMap, ScalarField,
};
use oslc_transport::oracles::{sgn_general_conservative, sgn_general_nonconservative, SgnExampleSpec, SgnOracleFlow};
use oslc_transport::shapes::Shape;
use oslc_transport::testfn::{space_time_tests, spatial_tests};
use oslc_transport::transport::{l1_trace, reversible_from_flow, weak_residual};
use oslc_transport::{Field, Flow, Grid};

type Outcome = Result<(bool, String), String>;

const QUARTERS: [usize; 4] = [0, 25, 50, 75];

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn grid_with(nx: usize, nt: usize) -> Result<Grid, String> {
    let inner = BoxRegion::cube(2, -2.0, 2.0).map_err(err)?;
    SpaceTimeGrid::new(inner, vec![nx, nx], 0.0, 1.0, nt, 1.0).map_err(err)
}

fn sgn() -> Field {
    library::sgn_example()
}

/// Grid and converged transport flow of the planar sgn field, shared by
/// several criteria.
fn reference() -> Result<&'static (Grid, Flow), String> {
    static CELL: OnceLock<Result<(Grid, Flow), String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = grid_with(129, 101)?;
        let flow = build_transport_flow(&sgn(), &grid, &ConvergenceOptions::standard(&grid)).map_err(err)?;
        Ok((grid, flow))
    })
    .as_ref()
    .map_err(Clone::clone)
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run_config(config: ScenarioConfig, command: Command, grid: Option<usize>) -> Result<Summary, String> {
    let out = tempfile::tempdir().map_err(err)?;
    let overrides = Overrides {
        grid,
        out: Some(out.path().to_path_buf()),
        ..Overrides::default()
    };
    let sc = Scenario::prepare(config, &scenario_dir(), &overrides).map_err(err)?;
    run_scenario(&sc, command).map_err(err)
}

fn run_shipped(name: &str, command: Command) -> Result<Summary, String> {
    let config = load_config(&scenario_dir().join(format!("{name}.json"))).map_err(err)?;
    run_config(config, command, None)
}

fn assertion_value(summary: &Summary, name: &str) -> Result<f64, String> {
    summary
        .assertions
        .iter()
        .find(|a| a.name == name)
        .map(|a| a.value)
        .ok_or_else(|| format!("{}: no assertion {name}", summary.scenario))
}

fn sgn_spec(g: Shape<f64>, phi: Shape<f64>) -> SgnExampleSpec<f64> {
    SgnExampleSpec {
        g,
        phi,
        ..SgnExampleSpec::new(1.0)
    }
}

/// `g = 1` on the strip `0 <= x2 <= 1`.
fn strip() -> Shape<f64> {
    Shape::Indicator {
        lo: vec![-1.0, 0.0],
        hi: vec![10.0, 1.0],
    }
}

fn flow_vs_oracle() -> Outcome {
    let (grid, flow) = reference()?;
    let oracle = SgnOracleFlow {
        grid: grid.clone(),
        lambda: 0.0,
    }
    .sample_transport()
    .map_err(err)?;
    let last = grid.last_time_index();
    let inner = grid.inner_nodes();
    let mut worst = 0.0f64;
    for t in 0..grid.nt() {
        let (a, b) = (flow.samples(last, t).unwrap(), oracle.samples(last, t).unwrap());
        for &k in &inner {
            worst = worst.max(dist(&a[2 * k..2 * k + 2], &b[2 * k..2 * k + 2]));
        }
    }
    let (h, eps) = (grid.min_h(), flow.eps_used());
    let bound = 5.0 * (h + eps);
    Ok((
        worst <= bound && eps <= h,
        format!("sup error {worst:.3e} <= 5(h+eps) = {bound:.3e}, eps_used {eps:.3e} <= h {h:.3e}"),
    ))
}

fn jacobian_vs_indicator() -> Outcome {
    let (grid, flow) = reference()?;
    let mut worst = 0.0f64;
    for &k in &QUARTERS {
        let j = jacobian_det(flow, k).map_err(err)?;
        // dual-cell averages: nodal samples of an indicator are arbitrary on its edge
        let ind = ScalarField::from_cell_average(grid, FieldRole::JacobianJ, vec![k], 16, |t, x| {
            if x[0].abs() >= 1.0 - t {
                1.0
            } else {
                0.0
            }
        })
        .map_err(err)?;
        worst = worst.max(j.l1_distance(&ind).map_err(err)?[0]);
    }
    let min_j = transport_jacobian(flow).map_err(err)?.min_value();
    let floor = -10.0 * grid.min_h();
    Ok((
        worst <= 0.12 && min_j >= floor,
        format!("max L1 error {worst:.4} <= 0.12, min J {min_j:.3e} >= {floor:.4}"),
    ))
}

fn jacobian_uniqueness() -> Outcome {
    let (grid, _) = reference()?;
    let h = grid.min_h();
    let lat = grid.lattice();
    let inner = grid.inner_nodes();
    let sample = |lambda: f64| {
        SgnOracleFlow {
            grid: grid.clone(),
            lambda,
        }
        .sample_transport()
        .map_err(err)
    };
    let base = sample(0.0)?;
    let mut oracle_diff = 0.0f64;
    for lambda in [-1.0, 1.0, 3.0] {
        let other = sample(lambda)?;
        for &k in &QUARTERS {
            let lag = 1.0 - grid.time(k);
            let (a, b) = (
                jacobian_det(&base, k).map_err(err)?,
                jacobian_det(&other, k).map_err(err)?,
            );
            let (a, b) = (a.at(k).unwrap(), b.at(k).unwrap());
            for &n in &inner {
                let x = lat.coord_vec(n);
                if (x[0].abs() - lag).abs() > 2.0 * h {
                    oracle_diff = oracle_diff.max((a[n] - b[n]).abs());
                }
            }
        }
    }
    let field = sgn();
    let substeps = ConvergenceOptions::standard(grid).max_substeps;
    let wide = integrate_regularized_flow(&field, h, grid, FlowDirection::BackwardTransport, substeps).map_err(err)?;
    let narrow =
        integrate_regularized_flow(&field, 0.5 * h, grid, FlowDirection::BackwardTransport, substeps).map_err(err)?;
    let mut numeric_diff = 0.0f64;
    for &k in &QUARTERS {
        let (a, b) = (
            jacobian_det(&wide, k).map_err(err)?,
            jacobian_det(&narrow, k).map_err(err)?,
        );
        numeric_diff = numeric_diff.max(a.l1_distance(&b).map_err(err)?[0]);
    }
    Ok((
        oracle_diff <= 1e-12 && numeric_diff <= 0.1,
        format!("oracle family max diff {oracle_diff:.1e} <= 1e-12, eps=h vs h/2 L1 diff {numeric_diff:.4} <= 0.1"),
    ))
}

const OFF_CENTER_PAIRING: &str = r#"{
  "name": "pairing-off-center",
  "field": { "named": "sgn2d" },
  "grid": { "lo": [-2.0, -2.0], "hi": [2.0, 2.0], "nx": [129, 129], "t_final": 1.0, "nt": 101 },
  "final_data": { "shape": "bump", "center": [0.3, 0.1], "radius": 1.0 },
  "initial_data": { "shape": "affine", "coef": [1.0, 0.0] },
  "diagnostics": [{ "kind": "pairing", "max_drift": 1e-3 }]
}"#;

fn duality_pairing() -> Outcome {
    let constant = assertion_value(&run_shipped("translation", Command::Pairing)?, "pairing.drift")?;
    let centered = assertion_value(&run_shipped("sgn2d-reference", Command::Pairing)?, "pairing.drift")?;
    let config: ScenarioConfig = serde_json::from_str(OFF_CENTER_PAIRING).map_err(err)?;
    let coarse = assertion_value(&run_config(config.clone(), Command::Pairing, None)?, "pairing.drift")?;
    let fine = assertion_value(&run_config(config, Command::Pairing, Some(193))?, "pairing.drift")?;
    let ratio = fine / coarse;
    Ok((
        constant <= 1e-8 && centered <= 1e-3 && coarse <= 1e-3 && ratio <= 0.6,
        format!(
            "a=c drift {constant:.1e} <= 1e-8, sgn drift {centered:.1e} (centered), {coarse:.3e} (off-center) <= 1e-3, \
             193^2/129^2 ratio {ratio:.3} <= 0.6"
        ),
    ))
}

fn l1_traces() -> Outcome {
    let (grid, flow) = reference()?;
    let last = grid.last_time_index();
    let rect = Shape::Indicator {
        lo: vec![-2.0, 0.0],
        hi: vec![2.0, 1.0],
    };
    let pi_t = ScalarField::from_fn(grid, FieldRole::ConservativePi, vec![last], |_, x| rect.eval(x)).map_err(err)?;
    let reversible = l1_trace(&reversible_from_flow(flow, &pi_t).map_err(err)?);
    let spread = reversible.relative_spread();
    let value_err = reversible
        .values
        .iter()
        .map(|v| (v - 4.0).abs() / 4.0)
        .fold(0.0, f64::max);

    // |pi| of the non-reversible solution, cell averaged so that the sign
    // change at x1 = 0 does not cancel.
    let spec = sgn_spec(strip(), Shape::Zero);
    let general =
        ScalarField::from_cell_average(grid, FieldRole::ConservativePi, (0..grid.nt()).collect(), 8, |t, x| {
            sgn_general_conservative(&spec, t, &[x[0], x[1]]).abs()
        })
        .map_err(err)?;
    let general = l1_trace(&general);
    let oracle_err = general
        .times
        .iter()
        .zip(&general.values)
        .map(|(t, v)| (v - 2.0 * (1.0 - t)).abs() / 2.0)
        .fold(0.0, f64::max);
    let strict = general.values.windows(2).all(|w| w[1] < w[0]);

    let mut increase = reversible.max_relative_increase().max(general.max_relative_increase());
    let one_d = run_shipped("neg-sgn-1d", Command::Backward)?;
    increase = increase.max(assertion_value(&one_d, "l1_trace.reversible.nonincreasing")?);
    Ok((
        spread <= 0.02 && value_err <= 0.02 && oracle_err <= 0.02 && strict && increase <= 0.01,
        format!(
            "reversible spread {spread:.1e}, |L1 - 4|/4 {value_err:.1e}; general vs 2(T-t) {oracle_err:.2e} \
             (all <= 0.02), strictly decreasing {strict}; max increase {increase:.1e} <= 0.01"
        ),
    ))
}

fn bv_bound() -> Outcome {
    let mut worst2 = f64::NEG_INFINITY;
    let mut worst1 = f64::NEG_INFINITY;
    let mut names = Vec::new();
    for entry in std::fs::read_dir(scenario_dir()).map_err(err)? {
        let path = entry.map_err(err)?.path();
        let config = load_config(&path).map_err(err)?;
        if !config.diagnostics.iter().any(|d| d.name() == "bv") {
            continue;
        }
        let dim = config.grid.lo.len();
        let summary = run_config(config, Command::Forward, None)?;
        let margin = assertion_value(&summary, "bv")?;
        names.push(summary.scenario.clone());
        if dim == 1 {
            worst1 = worst1.max(margin);
        } else {
            worst2 = worst2.max(margin);
        }
    }
    names.sort();
    Ok((
        worst2 <= 0.05 && worst1 <= 0.01 && !names.is_empty(),
        format!(
            "worst excess {worst2:.2e} <= 0.05 (N >= 2), {worst1:.2e} <= 0.01 (N = 1) over {}",
            names.join(", ")
        ),
    ))
}

/// Max weak residuals `(reversible, jacobian)` on an `nx` lattice.
fn residuals(nx: usize) -> Result<(f64, f64), String> {
    let grid = grid_with(nx, 101)?;
    let field = sgn();
    let flow = build_transport_flow(&field, &grid, &ConvergenceOptions::standard(&grid)).map_err(err)?;
    let tests = space_time_tests(&grid);
    let rect = Shape::Indicator {
        lo: vec![-2.0, 0.0],
        hi: vec![2.0, 1.0],
    };
    let pi_t = ScalarField::from_fn(
        &grid,
        FieldRole::ConservativePi,
        vec![grid.last_time_index()],
        |_, x| rect.eval(x),
    )
    .map_err(err)?;
    let pi = reversible_from_flow(&flow, &pi_t).map_err(err)?;
    let rev = weak_residual(&pi, &field, &tests).map_err(err)?.max_residual;
    let j = jacobian_solution(&flow_components(&flow).map_err(err)?).map_err(err)?;
    let jac = weak_residual(&j, &field, &tests).map_err(err)?.max_residual;
    Ok((rev, jac))
}

fn weak_residuals() -> Outcome {
    let (rev_c, jac_c) = residuals(65)?;
    let (rev_f, jac_f) = residuals(129)?;
    let h = 4.0 / 128.0;
    let (r_rev, r_jac) = (rev_f / rev_c, jac_f / jac_c);
    let in_band = |r: f64| (0.4..=0.7).contains(&r);
    Ok((
        in_band(r_rev) && in_band(r_jac),
        format!(
            "reversible {rev_f:.3e} = {:.3e} h, ratio {r_rev:.3}; jacobian {jac_f:.3e} = {:.3e} h, ratio {r_jac:.3} \
             (ratios in [0.4, 0.7])",
            rev_f / h,
            jac_f / h
        ),
    ))
}

fn stability() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for name in ["stability-mollification", "stability-oscillatory"] {
        let summary = run_shipped(name, Command::Stability)?;
        passed &= summary.passed();
        let ratios: Vec<String> = ["pi", "api", "u"]
            .iter()
            .map(|q| {
                let a = summary
                    .assertions
                    .iter()
                    .find(|a| a.name == format!("stability.{q}.final_ratio"));
                match a {
                    Some(a) if a.passed => format!("{q} {:.2e}", a.value),
                    Some(a) => format!("{q} {:.2e} FAILED", a.value),
                    None => format!("{q} missing"),
                }
            })
            .collect();
        passed &= ratios.iter().all(|r| !r.ends_with("missing"));
        parts.push(format!("{name}: {}", ratios.join(", ")));
    }
    Ok((
        passed,
        format!("monotone deviations, final/initial <= 0.1; {}", parts.join("; ")),
    ))
}

fn oslc_diagnostics() -> Outcome {
    let (grid, _) = reference()?;
    let h = grid.min_h();
    let sampler = PairSampler::standard(grid.inner().clone(), h, 7);
    let field = sgn();
    let alpha = estimate_oslc(&field, 0.0, &sampler).map_err(err)?.alpha_hat;
    let expansive = estimate_oslc(&library::expansive_sgn(0.0), 0.0, &sampler).map_err(err)?;
    let worst_ratio = expansive.worst_pair.as_ref().map_or(f64::NAN, |w| w.ratio);
    let mut mollified = f64::NEG_INFINITY;
    for eps in [2.0 * h, h, 0.5 * h] {
        let m = mollify(&field, eps).map_err(err)?;
        mollified = mollified.max(estimate_oslc(&m, 0.0, &sampler).map_err(err)?.alpha_hat);
    }
    let jump = jump_direction_check(&field, &[0.0, 0.5], 0.0, 1e-12).map_err(err)?;
    Ok((
        alpha <= 1e-12
            && expansive.violated
            && worst_ratio >= 10.0
            && mollified <= alpha + 1e-9
            && jump.lambda == 2.0
            && jump.colinearity_error <= 1e-12,
        format!(
            "alpha_hat {alpha:.1e}; +sgn violated with ratio {worst_ratio:.1} >= 10; mollified alpha_hat {mollified:.1e}; \
             jump lambda {}, colinearity {:.1e}",
            jump.lambda, jump.colinearity_error
        ),
    ))
}

/// Max lift residual for a smooth pair of potentials and for the sgn pair.
fn lift_residuals(nx: usize) -> Result<(f64, f64), String> {
    let grid = grid_with(nx, nx)?;
    let times: Vec<usize> = (0..grid.nt()).collect();
    let smooth = [
        ScalarField::from_fn(&grid, FieldRole::TestFunction, times.clone(), |t, x| {
            (x[0] + 0.5 * t).sin() * x[1].cos()
        }),
        ScalarField::from_fn(&grid, FieldRole::TestFunction, times.clone(), |t, x| {
            x[1] + 0.3 * (t * x[0]).sin()
        }),
    ]
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(err)?;
    let spec = sgn_spec(
        Shape::Zero,
        Shape::Affine {
            coef: vec![1.0, 0.0],
            offset: 0.0,
        },
    );
    let rough = [
        ScalarField::from_fn(&grid, FieldRole::TestFunction, times.clone(), |t, x| {
            sgn_general_nonconservative(&spec, t, &[x[0], x[1]])
        }),
        ScalarField::from_fn(&grid, FieldRole::TestFunction, times, |_, x| x[1]),
    ]
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(err)?;
    let a = divergence_free_lift(&smooth).map_err(err)?.residual;
    let b = divergence_free_lift(&rough).map_err(err)?.residual;
    Ok((a, b))
}

fn appendix() -> Outcome {
    let (s_c, r_c) = lift_residuals(65)?;
    let (s_f, r_f) = lift_residuals(129)?;
    let (rs, rr) = (s_f / s_c, r_f / r_c);

    let (grid, _) = reference()?;
    let h = grid.min_h();
    let field = sgn();
    let substeps = ConvergenceOptions::standard(grid).max_substeps;
    let k = 50;
    let maps: Vec<SampledMap<f64>> = (0..5)
        .map(|n| {
            let eps = 8.0 * h * 0.5f64.powi(n);
            let flow = integrate_regularized_flow(&field, eps, grid, FlowDirection::BackwardTransport, substeps)
                .map_err(err)?;
            flow.slice(k).ok_or_else(|| "missing slice".to_string())
        })
        .collect::<Result<_, _>>()?;
    let oracle = SgnOracleFlow {
        grid: grid.clone(),
        lambda: 0.0,
    };
    let limit = SampledMap::from_fn(grid.lattice(), |x, out| oracle.eval(grid.last_time_index(), k, x, out));
    let one = |_: &[f64]| 1.0;
    let psi: Vec<&dyn Fn(&[f64]) -> f64> = vec![&one; maps.len()];
    let report = weak_jacobian_limit_check(&maps, &psi, &one, &limit, &spatial_tests(grid.inner())).map_err(err)?;
    let step = report.max_ratio();
    Ok((
        rs <= 0.35 && rr <= 0.7 && step <= 0.8,
        format!(
            "lift residual ratio {rs:.3} <= 0.35 (smooth, {s_f:.2e}), {rr:.3} <= 0.7 (sgn, {r_f:.2e}); \
             weak jacobian step ratio {step:.3} <= 0.8"
        ),
    ))
}

fn filippov_selection() -> Outcome {
    let (grid, _) = reference()?;
    let rep = nonuniqueness_demo(&sgn(), grid, &ConvergenceOptions::standard(grid), 0.8).map_err(err)?;
    let oracle = rep.oracle_semigroup.iter().copied().fold(0.0, f64::max);
    let limit = 10.0 * grid.dt();
    Ok((
        rep.numeric_to_x0_max <= rep.bound && rep.numeric_to_x1_min >= 0.4 && oracle == 0.0 && rep.numeric_semigroup <= limit,
        format!(
            "to X_0 {:.3e} <= {:.3e}, to X_1 {:.3} >= 0.4, oracle semigroup {oracle:.1e} = 0, numeric {:.1e} <= {limit:.1e}",
            rep.numeric_to_x0_max, rep.bound, rep.numeric_to_x1_min, rep.numeric_semigroup
        ),
    ))
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 sgn flow matches the Filippov oracle", flow_vs_oracle),
        ("2 sgn jacobian matches the cone indicator", jacobian_vs_indicator),
        ("3 jacobian uniqueness", jacobian_uniqueness),
        ("4 duality pairing", duality_pairing),
        ("5 L1 traces", l1_traces),
        ("6 BV bound", bv_bound),
        ("7 weak residuals", weak_residuals),
        ("8 weak stability", stability),
        ("9 OSLC diagnostics", oslc_diagnostics),
        ("10 divergence-free lift and weak jacobian limit", appendix),
        ("11 Filippov selection", filippov_selection),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let mark = if passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {name}: {mark} ({:.1}s) {detail}",
            start.elapsed().as_secs_f64()
        );
        if !passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
