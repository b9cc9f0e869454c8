use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{resolve_field, CoefficientField, FieldSource};
use crate::flow::ConvergenceOptions;
use crate::grid::{BoxRegion, SpaceTimeGrid};
use crate::oracles::SgnExampleSpec;
use crate::shapes::Shape;

fn zero_shape() -> Shape<f64> {
    Shape::Zero
}

fn default_output() -> String {
    "out".to_string()
}

/// A scenario file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub field: FieldSource,
    pub grid: GridSpec,
    #[serde(default)]
    pub flow: FlowSpec,
    /// `pi_T`, cut off to the box of interest.
    #[serde(default)]
    pub final_data: Option<Shape<f64>>,
    /// `u0`, cut off to the box of interest.
    #[serde(default)]
    pub initial_data: Option<Shape<f64>>,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default)]
    pub stability: Option<StabilitySpec>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nx: Vec<usize>,
    #[serde(default)]
    pub t0: f64,
    pub t_final: f64,
    pub nt: usize,
    /// Collar width; defaults to `|a|_inf (T - t0)`.
    #[serde(default)]
    pub padding: Option<f64>,
}

/// Overrides of the default `eps_k = eps0 2^-k` schedule (`eps0 = 2h`).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default)]
    pub eps0: Option<f64>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub j_tol: Option<f64>,
    #[serde(default)]
    pub max_substeps: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum OracleSpec {
    /// The planar `(-sgn x1, 0)` example.
    Sgn2d {
        #[serde(default)]
        lambda: f64,
        #[serde(default = "zero_shape")]
        phi: Shape<f64>,
        #[serde(default = "zero_shape")]
        h: Shape<f64>,
        #[serde(default = "zero_shape")]
        psi: Shape<f64>,
        #[serde(default = "zero_shape")]
        g: Shape<f64>,
    },
    /// `a(x) = A x`, rows of `A`.
    Linear { matrix: Vec<Vec<f64>> },
}

impl OracleSpec {
    pub fn sgn_spec(&self, t_final: f64) -> Option<SgnExampleSpec<f64>> {
        match self {
            OracleSpec::Sgn2d { lambda, phi, h, psi, g } => Some(SgnExampleSpec {
                t_final,
                lambda: *lambda,
                phi: phi.clone(),
                h: h.clone(),
                psi: psi.clone(),
                g: g.clone(),
            }),
            OracleSpec::Linear { .. } => None,
        }
    }
}

/// Where a diagnostic takes its conservative solution from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionSource {
    /// Pushforward of the final data along the numeric transport flow.
    #[default]
    Reversible,
    /// The closed-form general solution of the sgn oracle.
    OracleGeneral,
}

impl SolutionSource {
    pub fn tag(self) -> &'static str {
        match self {
            SolutionSource::Reversible => "reversible",
            SolutionSource::OracleGeneral => "oracle_general",
        }
    }
}

fn five() -> f64 {
    5.0
}
fn ten() -> f64 {
    10.0
}
fn oslc_tol() -> f64 {
    1e-12
}
fn jacobian_l1() -> f64 {
    0.12
}
fn jacobian_times() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75]
}
fn lip_slack() -> f64 {
    0.05
}
fn bv_slack() -> f64 {
    0.05
}
fn nodes_per_axis() -> usize {
    65
}

/// One requested check and its tolerances.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diagnostic {
    /// Sampled OSLC ratio against the claimed modulus.
    Oslc {
        #[serde(default = "oslc_tol")]
        tol: f64,
    },
    /// Integrated translation inequality on the box of interest.
    TranslationBound {
        shift: Vec<f64>,
        #[serde(default = "nodes_per_axis")]
        nodes: usize,
    },
    /// Jump structure at a point of a declared interface.
    JumpCheck {
        point: Vec<f64>,
        #[serde(default = "oslc_tol")]
        tol: f64,
        #[serde(default)]
        expect_lambda: Option<f64>,
    },
    /// Sup node distance to the oracle flow, against `factor (h + eps_used)`.
    FlowOracle {
        #[serde(default = "five")]
        factor: f64,
    },
    /// Cell-averaged oracle jacobian against the numeric one, in L1 over the box.
    JacobianOracle {
        #[serde(default = "jacobian_l1")]
        max_l1: f64,
        #[serde(default = "jacobian_times")]
        times: Vec<f64>,
        /// Lower bound on the numeric jacobian, as `-factor h`.
        #[serde(default = "ten")]
        min_factor: f64,
    },
    /// Lipschitz ratio to `exp(int alpha)` and finite-speed excess.
    FlowLipschitz {
        #[serde(default = "lip_slack")]
        slack: f64,
    },
    /// Semigroup identity of the numeric flow on a coarse set of times,
    /// against `factor dt`.
    Semigroup {
        #[serde(default = "ten")]
        factor: f64,
        #[serde(default = "semigroup_samples")]
        samples: usize,
    },
    Pairing {
        max_drift: f64,
    },
    L1Trace {
        #[serde(default)]
        source: SolutionSource,
        /// Largest relative spread around the final value.
        #[serde(default)]
        constant_tol: Option<f64>,
        /// Largest increase, relative to the trace's magnitude.
        #[serde(default)]
        increase_slack: Option<f64>,
        /// Largest deviation from the closed form, relative to its maximum.
        #[serde(default)]
        oracle_tol: Option<f64>,
        #[serde(default)]
        strictly_decreasing: bool,
    },
    WeakResidual {
        #[serde(default)]
        source: SolutionSource,
        max: f64,
    },
    /// BV bound of the forward solution over a ball.
    Bv {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "bv_slack")]
        slack: f64,
    },
}

fn semigroup_samples() -> usize {
    5
}

impl Diagnostic {
    pub fn name(&self) -> &'static str {
        match self {
            Diagnostic::Oslc { .. } => "oslc",
            Diagnostic::TranslationBound { .. } => "translation_bound",
            Diagnostic::JumpCheck { .. } => "jump_check",
            Diagnostic::FlowOracle { .. } => "flow_oracle",
            Diagnostic::JacobianOracle { .. } => "jacobian_oracle",
            Diagnostic::FlowLipschitz { .. } => "flow_lipschitz",
            Diagnostic::Semigroup { .. } => "semigroup",
            Diagnostic::Pairing { .. } => "pairing",
            Diagnostic::L1Trace { .. } => "l1_trace",
            Diagnostic::WeakResidual { .. } => "weak_residual",
            Diagnostic::Bv { .. } => "bv",
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{}: {what} must be positive, got {v}",
                    self.name()
                )))
            }
        };
        let point = |what: &str, p: &[f64]| {
            if p.len() == dim {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{}: {what} must have {dim} coordinates",
                    self.name()
                )))
            }
        };
        match self {
            Diagnostic::Oslc { tol } => positive("tol", *tol),
            Diagnostic::TranslationBound { shift, nodes } => {
                point("shift", shift)?;
                if *nodes < 2 {
                    return Err(Error::invalid("translation_bound: need at least 2 nodes per axis"));
                }
                Ok(())
            }
            Diagnostic::JumpCheck { point: p, tol, .. } => {
                point("point", p)?;
                positive("tol", *tol)
            }
            Diagnostic::FlowOracle { factor } => positive("factor", *factor),
            Diagnostic::JacobianOracle {
                max_l1,
                times,
                min_factor,
            } => {
                positive("max_l1", *max_l1)?;
                positive("min_factor", *min_factor)?;
                if times.is_empty() {
                    return Err(Error::invalid("jacobian_oracle: no times given"));
                }
                Ok(())
            }
            Diagnostic::FlowLipschitz { slack } => positive("slack", *slack),
            Diagnostic::Semigroup { factor, samples } => {
                positive("factor", *factor)?;
                if *samples < 3 {
                    return Err(Error::invalid("semigroup: need at least 3 time samples"));
                }
                Ok(())
            }
            Diagnostic::Pairing { max_drift } => positive("max_drift", *max_drift),
            Diagnostic::L1Trace {
                constant_tol,
                increase_slack,
                oracle_tol,
                ..
            } => {
                for (what, v) in [
                    ("constant_tol", constant_tol),
                    ("increase_slack", increase_slack),
                    ("oracle_tol", oracle_tol),
                ] {
                    if let Some(v) = v {
                        positive(what, *v)?;
                    }
                }
                Ok(())
            }
            Diagnostic::WeakResidual { max, .. } => positive("max", *max),
            Diagnostic::Bv { center, radius, slack } => {
                point("center", center)?;
                positive("radius", *radius)?;
                positive("slack", *slack)
            }
        }
    }

    pub(crate) fn source(&self) -> Option<SolutionSource> {
        match self {
            Diagnostic::L1Trace { source, .. } | Diagnostic::WeakResidual { source, .. } => Some(*source),
            _ => None,
        }
    }
}

/// The approximating sequence of a stability experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "sequence", rename_all = "snake_case", deny_unknown_fields)]
pub enum StabilitySpec {
    /// `a_n = a * rho_{eps_n}` with `eps_n = base 2^-n`, `base` defaulting to `8h`.
    Mollification {
        #[serde(default)]
        base: Option<f64>,
        #[serde(default = "five_usize")]
        count: usize,
        #[serde(default)]
        max_final_ratio: Option<f64>,
    },
    /// `a_n = a + (1/n) sin(n x1) e1`.
    Oscillatory {
        n: Vec<f64>,
        #[serde(default)]
        max_final_ratio: Option<f64>,
    },
}

fn five_usize() -> usize {
    5
}

impl StabilitySpec {
    pub fn max_final_ratio(&self) -> f64 {
        match self {
            StabilitySpec::Mollification { max_final_ratio, .. }
            | StabilitySpec::Oscillatory { max_final_ratio, .. } => max_final_ratio.unwrap_or(0.1),
        }
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// Nodes per axis.
    pub grid: Option<usize>,
    pub eps0: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// A validated scenario, ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub field: CoefficientField<f64>,
    pub grid: SpaceTimeGrid<f64>,
    pub options: ConvergenceOptions<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

impl Scenario {
    /// Validates `config`; field files resolve against `base_dir`.
    pub fn prepare(config: ScenarioConfig, base_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let field: CoefficientField<f64> = resolve_field(&config.field, base_dir)?;
        let dim = field.dim();
        let gs = &config.grid;
        if gs.lo.len() != dim || gs.hi.len() != dim {
            return Err(Error::invalid(format!("grid box must have {dim} coordinates")));
        }
        let nx = match overrides.grid {
            Some(n) => vec![n; dim],
            None => gs.nx.clone(),
        };
        let inner = BoxRegion::new(gs.lo.clone(), gs.hi.clone())?;
        let padding = gs.padding.unwrap_or(field.sup_bound() * (gs.t_final - gs.t0));
        let grid = SpaceTimeGrid::new(inner, nx, gs.t0, gs.t_final, gs.nt, padding)?;
        grid.check_padding(field.sup_bound())?;

        let h = grid.min_h();
        let fs = &config.flow;
        let eps0 = overrides.eps0.or(fs.eps0).unwrap_or(2.0 * h);
        let levels = fs.levels.unwrap_or(7);
        if !(eps0 > 0.0) || levels < 2 {
            return Err(Error::invalid("flow schedule needs eps0 > 0 and at least 2 levels"));
        }
        let mut options = ConvergenceOptions::standard(&grid);
        options.schedule = (0..levels).map(|k| eps0 * 0.5f64.powi(k as i32)).collect();
        if let Some(tol) = overrides.tol.or(fs.tol) {
            options.tol = tol;
        }
        if let Some(j) = fs.j_tol {
            options.j_tol = j;
        }
        if let Some(m) = fs.max_substeps {
            options.max_substeps = m;
        }
        if !(options.tol > 0.0) || !(options.j_tol > 0.0) {
            return Err(Error::invalid("flow tolerances must be positive"));
        }

        for shape in [&config.final_data, &config.initial_data].into_iter().flatten() {
            let probe = vec![0.5; dim];
            if !shape.eval(&probe).is_finite() {
                return Err(Error::invalid("data shape does not evaluate to a finite value"));
            }
        }
        match &config.oracle {
            Some(OracleSpec::Sgn2d { .. }) => {
                if dim != 2 {
                    return Err(Error::invalid("the sgn2d oracle is planar"));
                }
                config
                    .oracle
                    .as_ref()
                    .unwrap()
                    .sgn_spec(gs.t_final)
                    .unwrap()
                    .validate()?;
            }
            Some(OracleSpec::Linear { matrix }) if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) => {
                return Err(Error::invalid(format!("linear oracle needs a {dim}x{dim} matrix")));
            }
            Some(OracleSpec::Linear { .. }) | None => {}
        }
        for d in &config.diagnostics {
            d.validate(dim)?;
            let needs_oracle = matches!(d, Diagnostic::FlowOracle { .. } | Diagnostic::JacobianOracle { .. })
                || d.source() == Some(SolutionSource::OracleGeneral);
            if needs_oracle && config.oracle.is_none() {
                return Err(Error::invalid(format!("{} needs an oracle", d.name())));
            }
            if d.source() == Some(SolutionSource::OracleGeneral)
                && !matches!(config.oracle, Some(OracleSpec::Sgn2d { .. }))
            {
                return Err(Error::invalid(format!(
                    "{}: oracle_general needs the sgn2d oracle",
                    d.name()
                )));
            }
        }
        if let Some(StabilitySpec::Oscillatory { n, .. }) = &config.stability {
            if n.is_empty() || n.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::invalid("oscillatory sequence needs positive parameters"));
            }
        }
        if let Some(StabilitySpec::Mollification { base, count, .. }) = &config.stability {
            if *count < 2 || base.is_some_and(|b| !(b > 0.0)) {
                return Err(Error::invalid(
                    "mollification sequence needs count >= 2 and a positive base",
                ));
            }
        }

        let out_dir = overrides.out.clone().unwrap_or_else(|| PathBuf::from(&config.output));
        let seed = overrides.seed.unwrap_or(config.seed);
        Ok(Self {
            config,
            field,
            grid,
            options,
            out_dir,
            seed,
        })
    }
}
