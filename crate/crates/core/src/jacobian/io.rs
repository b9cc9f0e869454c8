use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FieldRole, ScalarField};
use crate::error::{Error, Result};
use crate::flow::io::fmt_real;
use crate::grid::{BoxRegion, SpaceTimeGrid};
use crate::scalar::Real;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SliceFile {
    pub t: usize,
    pub file: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScalarManifest {
    pub name: String,
    pub role: FieldRole,
    pub inner_lo: Vec<f64>,
    pub inner_hi: Vec<f64>,
    pub nx: Vec<usize>,
    pub t0: f64,
    pub t_final: f64,
    pub nt: usize,
    pub padding: f64,
    pub files: Vec<SliceFile>,
}

/// Writes one CSV per stored time (`t,box,nx` header, then `node,value`
/// rows) and `<name>_manifest.json`. `every` thins the stored times; the
/// last one is always written.
pub fn write_scalar_bundle<R: Real>(
    field: &ScalarField<R>,
    dir: &Path,
    name: &str,
    every: usize,
) -> Result<ScalarManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let grid = field.grid();
    let lat = grid.lattice();
    let dim = grid.dim();
    let every = every.max(1);
    let box_field = (0..dim)
        .map(|i| format!("{}:{}", fmt_real(lat.lo()[i]), fmt_real(lat.hi()[i])))
        .collect::<Vec<_>>()
        .join(";");
    let nx_field = lat.counts().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
    let count = field.times().len();
    let mut files = Vec::new();
    for (slot, (&t, values)) in field.times().iter().zip(field.slices()).enumerate() {
        if slot % every != 0 && slot + 1 != count {
            continue;
        }
        let mut text = String::with_capacity(lat.len() * 32);
        text.push_str("t,box,nx\n");
        let _ = writeln!(text, "{t},{box_field},{nx_field}");
        text.push_str("node,value\n");
        for (k, v) in values.iter().enumerate() {
            let _ = writeln!(text, "{k},{}", fmt_real(*v));
        }
        let file = format!("{name}_t{t:04}.csv");
        let path = dir.join(&file);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        files.push(SliceFile { t, file });
    }
    let manifest = ScalarManifest {
        name: name.to_string(),
        role: field.role(),
        inner_lo: grid.inner().lo.iter().map(|v| v.as_f64()).collect(),
        inner_hi: grid.inner().hi.iter().map(|v| v.as_f64()).collect(),
        nx: grid.nx().to_vec(),
        t0: grid.t0().as_f64(),
        t_final: grid.t_final().as_f64(),
        nt: grid.nt(),
        padding: grid.padding().as_f64(),
        files,
    };
    let path = dir.join(format!("{name}_manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_scalar_bundle<R: Real>(dir: &Path, name: &str) -> Result<ScalarField<R>> {
    let path = dir.join(format!("{name}_manifest.json"));
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: ScalarManifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    let conv = |v: &[f64]| v.iter().map(|&x| R::lit(x)).collect::<Vec<R>>();
    let inner = BoxRegion::new(conv(&m.inner_lo), conv(&m.inner_hi))?;
    let grid = SpaceTimeGrid::new(
        inner,
        m.nx.clone(),
        R::lit(m.t0),
        R::lit(m.t_final),
        m.nt,
        R::lit(m.padding),
    )?;
    let len = grid.lattice().len();
    let mut times = Vec::new();
    let mut values = Vec::new();
    for sf in &m.files {
        let fpath = dir.join(&sf.file);
        let body = fs::read_to_string(&fpath).map_err(|e| Error::io(&fpath, e))?;
        let slice = body
            .lines()
            .skip(3)
            .map(|line| {
                line.split(',')
                    .nth(1)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .map(R::lit)
                    .ok_or_else(|| Error::format(&fpath, format!("bad row: {line}")))
            })
            .collect::<Result<Vec<R>>>()?;
        if slice.len() != len {
            return Err(Error::format(&fpath, "wrong number of rows"));
        }
        times.push(sf.t);
        values.push(slice);
    }
    ScalarField::new(grid, m.role, times, values)
}
