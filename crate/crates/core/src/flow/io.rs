use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FlowDirection, FlowMap};
use crate::error::{Error, Result};
use crate::grid::{BoxRegion, SpaceTimeGrid};
use crate::scalar::Real;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PairFile {
    pub s: usize,
    pub t: usize,
    pub file: String,
}

/// Describes a flow bundle directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FlowManifest {
    pub direction: FlowDirection,
    pub inner_lo: Vec<f64>,
    pub inner_hi: Vec<f64>,
    pub nx: Vec<usize>,
    pub t0: f64,
    pub t_final: f64,
    pub nt: usize,
    pub padding: f64,
    pub lattice_counts: Vec<usize>,
    pub eps_used: f64,
    pub cauchy_trace: Vec<f64>,
    pub files: Vec<PairFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

pub(crate) fn fmt_real<R: Real>(v: R) -> String {
    format!("{:.16e}", v.as_f64())
}

/// Writes `flow` as one CSV per pair plus `manifest.json`. `pairs` restricts
/// the output to a subset of the stored pairs.
pub fn write_flow_bundle<R: Real>(
    flow: &FlowMap<R>,
    dir: &Path,
    pairs: Option<&[(usize, usize)]>,
    diagnostics: Option<serde_json::Value>,
) -> Result<FlowManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let grid = flow.grid();
    let lat = grid.lattice();
    let dim = grid.dim();
    let selected: Vec<(usize, usize)> = match pairs {
        Some(p) => p.to_vec(),
        None => flow.stored_pairs().collect(),
    };
    let box_field = (0..dim)
        .map(|i| format!("{}:{}", fmt_real(lat.lo()[i]), fmt_real(lat.hi()[i])))
        .collect::<Vec<_>>()
        .join(";");
    let nx_field = lat.counts().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
    let mut files = Vec::new();
    for &(s, t) in &selected {
        let v = flow
            .samples(s, t)
            .ok_or_else(|| Error::invalid(format!("flow does not store pair ({s}, {t})")))?;
        let mut text = String::with_capacity(lat.len() * 24 * (dim + 1));
        text.push_str("s,t,box,nx\n");
        let _ = writeln!(text, "{s},{t},{box_field},{nx_field}");
        text.push_str("node");
        for i in 0..dim {
            let _ = write!(text, ",x{}", i + 1);
        }
        text.push('\n');
        for k in 0..lat.len() {
            let _ = write!(text, "{k}");
            for c in &v[k * dim..(k + 1) * dim] {
                text.push(',');
                text.push_str(&fmt_real(*c));
            }
            text.push('\n');
        }
        let name = format!("flow_s{s:04}_t{t:04}.csv");
        let path = dir.join(&name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        files.push(PairFile { s, t, file: name });
    }
    let manifest = FlowManifest {
        direction: flow.direction(),
        inner_lo: grid.inner().lo.iter().map(|v| v.as_f64()).collect(),
        inner_hi: grid.inner().hi.iter().map(|v| v.as_f64()).collect(),
        nx: grid.nx().to_vec(),
        t0: grid.t0().as_f64(),
        t_final: grid.t_final().as_f64(),
        nt: grid.nt(),
        padding: grid.padding().as_f64(),
        lattice_counts: lat.counts().to_vec(),
        eps_used: flow.eps_used().as_f64(),
        cauchy_trace: flow.cauchy_trace().iter().map(|v| v.as_f64()).collect(),
        files,
        diagnostics,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Reads a bundle written by [`write_flow_bundle`].
pub fn read_flow_bundle<R: Real>(dir: &Path) -> Result<FlowMap<R>> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: FlowManifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
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
    if grid.lattice().counts() != m.lattice_counts.as_slice() {
        return Err(Error::format(&path, "lattice counts do not match the grid description"));
    }
    let dim = grid.dim();
    let len = grid.lattice().len();
    let mut samples = BTreeMap::new();
    for pf in &m.files {
        let fpath = dir.join(&pf.file);
        let body = fs::read_to_string(&fpath).map_err(|e| Error::io(&fpath, e))?;
        let mut values = Vec::with_capacity(len * dim);
        for (i, line) in body.lines().skip(3).enumerate() {
            let mut parts = line.split(',');
            let node: usize = parts
                .next()
                .and_then(|p| p.trim().parse().ok())
                .ok_or_else(|| Error::format(&fpath, format!("bad node index on row {i}")))?;
            if node != i {
                return Err(Error::format(&fpath, format!("rows out of order at {i}")));
            }
            for _ in 0..dim {
                let v: f64 = parts
                    .next()
                    .and_then(|p| p.trim().parse().ok())
                    .ok_or_else(|| Error::format(&fpath, format!("bad value on row {i}")))?;
                values.push(R::lit(v));
            }
        }
        if values.len() != len * dim {
            return Err(Error::format(&fpath, "wrong number of rows"));
        }
        samples.insert((pf.s, pf.t), Arc::new(values));
    }
    Ok(FlowMap::new(grid, m.direction, samples, R::lit(m.eps_used))?.with_cauchy_trace(conv(&m.cauchy_trace)))
}

#[cfg(test)]
mod tests {
    use super::super::classical_flow;
    use super::*;
    use crate::fields::library;

    #[test]
    fn bundle_round_trip() {
        let g =
            SpaceTimeGrid::for_speed(BoxRegion::cube(2, -1.0f64, 1.0).unwrap(), vec![5, 4], 0.0, 1.0, 3, 1.0).unwrap();
        let f = classical_flow(&library::rotation(2.0), &g, FlowDirection::Forward, 0.1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let m = write_flow_bundle(&f, dir.path(), None, None).unwrap();
        assert_eq!(m.files.len(), 3);
        let back: FlowMap<f64> = read_flow_bundle(dir.path()).unwrap();
        assert_eq!(back.direction(), FlowDirection::Forward);
        assert!(back.sup_distance(&f) < 1e-15);
        let header = fs::read_to_string(dir.path().join(&m.files[0].file)).unwrap();
        assert!(header.starts_with("s,t,box,nx\n0,0,"));
    }
}
