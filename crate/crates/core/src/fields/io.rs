use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{library, CoefficientField, FieldKind, OslcModulus, PlanarInterface, VelocityFn};
use crate::error::{Error, Result};
use crate::grid::{BoxRegion, NodeLattice};
use crate::scalar::Real;

/// Built-in smooth velocity expressions, selected by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SmoothExpr {
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `a(x) = A x`, rows of `A`.
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    /// `(-x_2, x_1)`
    Rotation,
    /// `amplitude * sin(frequency * x_1) e_1`
    SineX1 {
        amplitude: f64,
        frequency: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceDoc {
    pub normal: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaDoc {
    Constant(f64),
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainDoc {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// JSON field definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    pub kind: FieldKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<SmoothExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<PieceDoc>>,
    /// Path of a CSV node-value file, relative to the document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    pub sup_bound: f64,
    pub alpha: AlphaDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// A field given inline or by file reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSource {
    File(String),
    /// A library field by name (`"sgn2d"`, `"neg_sgn_1d"`).
    Named {
        named: String,
    },
    Inline(FieldDocument),
}

/// Resolves a field source; file paths are relative to `base_dir`.
pub fn resolve_field<R: Real>(source: &FieldSource, base_dir: &Path) -> Result<CoefficientField<R>> {
    match source {
        FieldSource::File(path) => load_field(&base_dir.join(path)),
        FieldSource::Named { named } => {
            named_field(named).ok_or_else(|| Error::invalid(format!("unknown named field {named:?}")))
        }
        FieldSource::Inline(doc) => parse_field(doc, base_dir),
    }
}

fn smooth_rule<R: Real>(expr: &SmoothExpr, dim: usize) -> Result<VelocityFn<R>> {
    let rule: VelocityFn<R> = match expr.clone() {
        SmoothExpr::Zero => Arc::new(|_, _, out: &mut [R]| out.iter_mut().for_each(|v| *v = R::zero())),
        SmoothExpr::Constant { value } => {
            if value.len() != dim {
                return Err(Error::invalid("constant expression has wrong dimension"));
            }
            let c: Vec<R> = value.into_iter().map(R::lit).collect();
            Arc::new(move |_, _, out: &mut [R]| out.copy_from_slice(&c))
        }
        SmoothExpr::Linear { matrix } => {
            if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                return Err(Error::invalid("linear expression needs a dim x dim matrix"));
            }
            let m: Vec<R> = matrix.into_iter().flatten().map(R::lit).collect();
            Arc::new(move |_, x: &[R], out: &mut [R]| {
                let n = out.len();
                for i in 0..n {
                    out[i] = (0..n).map(|j| m[i * n + j] * x[j]).sum();
                }
            })
        }
        SmoothExpr::Rotation => {
            if dim != 2 {
                return Err(Error::invalid("rotation expression is two-dimensional"));
            }
            Arc::new(|_, x: &[R], out: &mut [R]| {
                out[0] = -x[1];
                out[1] = x[0];
            })
        }
        SmoothExpr::SineX1 { amplitude, frequency } => {
            let (a, k) = (R::lit(amplitude), R::lit(frequency));
            Arc::new(move |_, x: &[R], out: &mut [R]| {
                out.iter_mut().for_each(|v| *v = R::zero());
                out[0] = a * (k * x[0]).sin();
            })
        }
    };
    Ok(rule)
}

fn alpha_of<R: Real>(doc: &AlphaDoc) -> OslcModulus<R> {
    match doc {
        AlphaDoc::Constant(a) => OslcModulus::Constant(R::lit(*a)),
        AlphaDoc::Piecewise { breaks, values } => OslcModulus::PiecewiseConstant {
            breaks: breaks.iter().map(|&v| R::lit(v)).collect(),
            values: values.iter().map(|&v| R::lit(v)).collect(),
        },
    }
}

/// Builds a field from its JSON document; grid paths resolve against `base_dir`.
pub fn parse_field<R: Real>(doc: &FieldDocument, base_dir: &Path) -> Result<CoefficientField<R>> {
    let sup = R::lit(doc.sup_bound);
    let alpha = alpha_of(&doc.alpha);
    let mut field = match doc.kind {
        FieldKind::ClosedForm => {
            let expr = doc
                .expr
                .as_ref()
                .ok_or_else(|| Error::invalid("closed_form field needs \"expr\""))?;
            CoefficientField::closed_form(doc.dim, smooth_rule(expr, doc.dim)?, sup, alpha)?.with_differentiable(true)
        }
        FieldKind::PiecewiseInterface => {
            let pieces = doc
                .pieces
                .as_ref()
                .ok_or_else(|| Error::invalid("piecewise_interface field needs \"pieces\""))?;
            let interfaces = pieces
                .iter()
                .map(|p| {
                    PlanarInterface::new(
                        p.normal.iter().map(|&v| R::lit(v)).collect(),
                        R::lit(p.offset),
                        p.plus.iter().map(|&v| R::lit(v)).collect(),
                        p.minus.iter().map(|&v| R::lit(v)).collect(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let smooth = doc.expr.as_ref().map(|e| smooth_rule(e, doc.dim)).transpose()?;
            CoefficientField::piecewise(doc.dim, smooth, interfaces, sup, alpha)?
        }
        FieldKind::GridSampled => {
            let rel = doc
                .grid
                .as_ref()
                .ok_or_else(|| Error::invalid("grid_sampled field needs \"grid\""))?;
            let path = base_dir.join(rel);
            let csv = GridCsv::<R>::read(&path, doc.dim)?;
            CoefficientField::grid_sampled(csv.lattice, csv.values, sup, alpha)?
        }
    };
    if let Some(d) = &doc.domain {
        field = field.with_domain(BoxRegion::new(
            d.lo.iter().map(|&v| R::lit(v)).collect(),
            d.hi.iter().map(|&v| R::lit(v)).collect(),
        )?);
    }
    let label = doc
        .label
        .clone()
        .unwrap_or_else(|| format!("{:?}", doc.kind).to_lowercase());
    Ok(field.with_label(label))
}

/// Reads a JSON field document from disk.
pub fn load_field<R: Real>(path: &Path) -> Result<CoefficientField<R>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: FieldDocument = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_field(&doc, &base)
}

/// CSV node-value file: a header line `n_1,..,n_N,lo_1,hi_1,..,lo_N,hi_N`,
/// then one row of `N` velocity components per node in lattice order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCsv<R> {
    pub lattice: NodeLattice<R>,
    pub values: Vec<R>,
}

impl<R: Real> GridCsv<R> {
    pub fn read(path: &Path, dim: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, dim).map_err(|m| Error::format(path, m))
    }

    pub fn parse(text: &str, dim: usize) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<f64> = lines
            .next()
            .ok_or("empty grid file")?
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        if header.len() != 3 * dim {
            return Err(format!("header needs {} entries, found {}", 3 * dim, header.len()));
        }
        let counts: Vec<usize> = header[..dim].iter().map(|&v| v as usize).collect();
        let lo = (0..dim).map(|i| R::lit(header[dim + 2 * i])).collect();
        let hi = (0..dim).map(|i| R::lit(header[dim + 2 * i + 1])).collect();
        let lattice = NodeLattice::new(lo, hi, counts).map_err(|e| e.to_string())?;
        let mut values = Vec::with_capacity(lattice.len() * dim);
        for (row, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != dim {
                return Err(format!("row {row} has {} entries, expected {dim}", parts.len()));
            }
            for p in parts {
                values.push(R::lit(p.trim().parse::<f64>().map_err(|e| format!("row {row}: {e}"))?));
            }
        }
        if values.len() != lattice.len() * dim {
            return Err(format!("expected {} rows, found {}", lattice.len(), values.len() / dim));
        }
        Ok(Self { lattice, values })
    }

    pub fn to_csv_string(&self) -> String {
        let dim = self.lattice.dim();
        let mut header: Vec<String> = self.lattice.counts().iter().map(|n| n.to_string()).collect();
        for i in 0..dim {
            header.push(format!("{:.17e}", self.lattice.lo()[i].as_f64()));
            header.push(format!("{:.17e}", self.lattice.hi()[i].as_f64()));
        }
        let mut s = header.join(",");
        s.push('\n');
        for node in self.values.chunks(dim) {
            let row: Vec<String> = node.iter().map(|v| format!("{:.17e}", v.as_f64())).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Named library fields usable directly from scenario files.
pub(crate) fn named_field<R: Real>(name: &str) -> Option<CoefficientField<R>> {
    match name {
        "sgn2d" => Some(library::sgn_example()),
        "neg_sgn_1d" => Some(library::neg_sgn_1d()),
        _ => None,
    }
}
