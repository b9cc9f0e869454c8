//! Tensor-product node lattices and the space-time discretization contract.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_N, hi_N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion<R> {
    pub lo: Vec<R>,
    pub hi: Vec<R>,
}

impl<R: Real> BoxRegion<R> {
    pub fn new(lo: Vec<R>, hi: Vec<R>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box bounds must have equal, nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(&a, &b)| !(b > a)) {
            return Err(Error::invalid("box must have hi > lo on every axis"));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, lo: R, hi: R) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> R {
        self.lo
            .iter()
            .zip(&self.hi)
            .fold(R::one(), |acc, (&a, &b)| acc * (b - a))
    }

    pub fn diameter(&self) -> R {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| (b - a) * (b - a))
            .sum::<R>()
            .sqrt()
    }

    pub fn contains(&self, x: &[R], tol: R) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a - tol && v <= b + tol)
    }

    /// Box grown by `margin` on every side.
    pub fn inflate(&self, margin: R) -> Self {
        Self {
            lo: self.lo.iter().map(|&a| a - margin).collect(),
            hi: self.hi.iter().map(|&b| b + margin).collect(),
        }
    }

    pub fn contains_box(&self, other: &BoxRegion<R>) -> bool {
        other
            .lo
            .iter()
            .zip(&other.hi)
            .zip(self.lo.iter().zip(&self.hi))
            .all(|((&olo, &ohi), (&lo, &hi))| olo >= lo && ohi <= hi)
    }

    pub fn clamp(&self, x: &mut [R]) {
        for (v, (&a, &b)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.max(a).min(b);
        }
    }
}

/// Uniform tensor-product lattice, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeLattice<R> {
    lo: Vec<R>,
    hi: Vec<R>,
    n: Vec<usize>,
    h: Vec<R>,
    strides: Vec<usize>,
}

impl<R: Real> NodeLattice<R> {
    pub fn new(lo: Vec<R>, hi: Vec<R>, n: Vec<usize>) -> Result<Self> {
        BoxRegion::new(lo.clone(), hi.clone())?;
        if n.len() != lo.len() {
            return Err(Error::invalid("node counts must match the box dimension"));
        }
        if n.iter().any(|&k| k < 2) {
            return Err(Error::invalid("every axis needs at least 2 nodes"));
        }
        let h = (0..n.len())
            .map(|i| (hi[i] - lo[i]) / R::from_usize_lossy(n[i] - 1))
            .collect();
        let mut strides = vec![1; n.len()];
        for i in (0..n.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * n[i + 1];
        }
        Ok(Self { lo, hi, n, h, strides })
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> &[R] {
        &self.lo
    }

    pub fn hi(&self) -> &[R] {
        &self.hi
    }

    pub fn counts(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[R] {
        &self.h
    }

    pub fn min_spacing(&self) -> R {
        self.h.iter().cloned().fold(R::infinity(), R::min)
    }

    pub fn bounds(&self) -> BoxRegion<R> {
        BoxRegion {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(&i, &s)| i * s).sum()
    }

    pub fn unflat(&self, mut flat: usize, out: &mut [usize]) {
        for (axis, &s) in self.strides.iter().enumerate() {
            out[axis] = flat / s;
            flat %= s;
        }
    }

    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.n[axis]
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> R {
        if i + 1 == self.n[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + R::from_usize_lossy(i) * self.h[axis]
        }
    }

    pub fn coord(&self, flat: usize, out: &mut [R]) {
        for axis in 0..self.dim() {
            out[axis] = self.axis_coord(axis, self.axis_index(flat, axis));
        }
    }

    pub fn coord_vec(&self, flat: usize) -> Vec<R> {
        let mut x = vec![R::zero(); self.dim()];
        self.coord(flat, &mut x);
        x
    }

    /// Trapezoid weight of a node (product of per-axis weights).
    pub fn trapezoid_weight(&self, flat: usize) -> R {
        let half = R::lit(0.5);
        (0..self.dim()).fold(R::one(), |acc, axis| {
            let i = self.axis_index(flat, axis);
            let w = if i == 0 || i + 1 == self.n[axis] {
                self.h[axis] * half
            } else {
                self.h[axis]
            };
            acc * w
        })
    }

    pub fn contains(&self, x: &[R], tol: R) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&a, &b))| v >= a - tol && v <= b + tol)
    }

    /// Nodes inside the closed box `[lo, hi]`, in increasing flat order.
    pub fn nodes_in_box(&self, lo: &[R], hi: &[R]) -> Vec<usize> {
        let dim = self.dim();
        let mut first = vec![0usize; dim];
        let mut last = vec![0usize; dim];
        for axis in 0..dim {
            let top = R::from_usize_lossy(self.n[axis] - 1);
            let tol = R::lit(1e-9);
            let a = ((lo[axis] - self.lo[axis]) / self.h[axis] - tol).ceil().max(R::zero());
            let b = ((hi[axis] - self.lo[axis]) / self.h[axis] + tol).floor().min(top);
            if b < a {
                return Vec::new();
            }
            first[axis] = a.to_usize().unwrap_or(0);
            last[axis] = b.to_usize().unwrap_or(0);
        }
        let mut out = Vec::new();
        let mut idx = first.clone();
        loop {
            out.push(self.flat(&idx));
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if idx[axis] < last[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = first[axis];
            }
        }
    }

    /// Multilinear interpolation of `ncomp`-component node data at `x`.
    ///
    /// Points outside the lattice are clamped to its box; the return value
    /// reports whether clamping happened.
    pub fn interpolate(&self, values: &[R], ncomp: usize, x: &[R], out: &mut [R]) -> bool {
        let dim = self.dim();
        debug_assert_eq!(values.len(), self.len() * ncomp);
        let mut clamped = false;
        let mut base = 0usize;
        let mut frac = [R::zero(); 8];
        assert!(dim <= 8, "lattices above 8 dimensions are not supported");
        for axis in 0..dim {
            let mut s = (x[axis] - self.lo[axis]) / self.h[axis];
            if !(s >= R::zero()) {
                clamped |= s < -R::lit(1e-9);
                s = R::zero();
            }
            let top = R::from_usize_lossy(self.n[axis] - 1);
            if s > top {
                clamped |= s > top + R::lit(1e-9);
                s = top;
            }
            let mut i = s.floor().to_usize().unwrap_or(0);
            if i >= self.n[axis] - 1 {
                i = self.n[axis] - 2;
            }
            frac[axis] = s - R::from_usize_lossy(i);
            base += i * self.strides[axis];
        }
        for o in out.iter_mut().take(ncomp) {
            *o = R::zero();
        }
        for corner in 0..(1usize << dim) {
            let mut w = R::one();
            let mut flat = base;
            for axis in 0..dim {
                if corner & (1 << axis) != 0 {
                    w = w * frac[axis];
                    flat += self.strides[axis];
                } else {
                    w = w * (R::one() - frac[axis]);
                }
            }
            if w == R::zero() {
                continue;
            }
            for c in 0..ncomp {
                out[c] = out[c] + w * values[flat * ncomp + c];
            }
        }
        clamped
    }

    /// Partial derivative along `axis` of component `comp` at node `flat`:
    /// centered second order inside, one-sided second order on the boundary.
    pub fn derivative(&self, values: &[R], ncomp: usize, comp: usize, axis: usize, flat: usize) -> R {
        let i = self.axis_index(flat, axis);
        let s = self.strides[axis];
        let n = self.n[axis];
        let h = self.h[axis];
        let v = |f: usize| values[f * ncomp + comp];
        let two = R::lit(2.0);
        if n == 2 {
            let (a, b) = if i == 0 { (flat, flat + s) } else { (flat - s, flat) };
            return (v(b) - v(a)) / h;
        }
        if i == 0 {
            (-R::lit(3.0) * v(flat) + R::lit(4.0) * v(flat + s) - v(flat + 2 * s)) / (two * h)
        } else if i + 1 == n {
            (R::lit(3.0) * v(flat) - R::lit(4.0) * v(flat - s) + v(flat - 2 * s)) / (two * h)
        } else {
            (v(flat + s) - v(flat - s)) / (two * h)
        }
    }
}

/// Box-shaped spatial grid plus uniform time partition.
///
/// The node lattice covers the box of interest grown by `padding` (rounded
/// up to whole cells), so that flows and solutions have room to move at
/// finite speed without leaving the computational lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid<R> {
    inner: BoxRegion<R>,
    nx: Vec<usize>,
    t0: R,
    t_final: R,
    nt: usize,
    padding: R,
    pad_nodes: Vec<usize>,
    lattice: NodeLattice<R>,
}

impl<R: Real> SpaceTimeGrid<R> {
    pub fn new(inner: BoxRegion<R>, nx: Vec<usize>, t0: R, t_final: R, nt: usize, padding: R) -> Result<Self> {
        if nx.len() != inner.dim() {
            return Err(Error::invalid("nx must give one node count per axis"));
        }
        if nx.iter().any(|&k| k < 2) {
            return Err(Error::invalid("nx_i must be at least 2"));
        }
        if nt < 2 {
            return Err(Error::invalid("nt must be at least 2"));
        }
        if !(t_final > t0) {
            return Err(Error::invalid("time interval must satisfy T > t0"));
        }
        if !(padding >= R::zero()) || !padding.is_finite() {
            return Err(Error::invalid("padding must be a finite nonnegative length"));
        }
        let h: Vec<R> = (0..nx.len())
            .map(|i| (inner.hi[i] - inner.lo[i]) / R::from_usize_lossy(nx[i] - 1))
            .collect();
        let pad_nodes: Vec<usize> = h
            .iter()
            .map(|&hi| {
                let k = (padding / hi - R::lit(1e-9)).ceil();
                k.max(R::zero()).to_usize().unwrap_or(0)
            })
            .collect();
        let lo = (0..nx.len())
            .map(|i| inner.lo[i] - R::from_usize_lossy(pad_nodes[i]) * h[i])
            .collect();
        let hi = (0..nx.len())
            .map(|i| inner.hi[i] + R::from_usize_lossy(pad_nodes[i]) * h[i])
            .collect();
        let counts = (0..nx.len()).map(|i| nx[i] + 2 * pad_nodes[i]).collect();
        let lattice = NodeLattice::new(lo, hi, counts)?;
        Ok(Self {
            inner,
            nx,
            t0,
            t_final,
            nt,
            padding,
            pad_nodes,
            lattice,
        })
    }

    /// Grid whose padding is exactly `sup_bound * (T - t0)`.
    pub fn for_speed(inner: BoxRegion<R>, nx: Vec<usize>, t0: R, t_final: R, nt: usize, sup_bound: R) -> Result<Self> {
        Self::new(inner, nx, t0, t_final, nt, sup_bound * (t_final - t0))
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn inner(&self) -> &BoxRegion<R> {
        &self.inner
    }

    pub fn nx(&self) -> &[usize] {
        &self.nx
    }

    pub fn lattice(&self) -> &NodeLattice<R> {
        &self.lattice
    }

    pub fn padding(&self) -> R {
        self.padding
    }

    pub fn t0(&self) -> R {
        self.t0
    }

    pub fn t_final(&self) -> R {
        self.t_final
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn last_time_index(&self) -> usize {
        self.nt - 1
    }

    pub fn dt(&self) -> R {
        (self.t_final - self.t0) / R::from_usize_lossy(self.nt - 1)
    }

    pub fn time(&self, k: usize) -> R {
        if k + 1 == self.nt {
            self.t_final
        } else {
            self.t0 + R::from_usize_lossy(k) * self.dt()
        }
    }

    pub fn times(&self) -> Vec<R> {
        (0..self.nt).map(|k| self.time(k)).collect()
    }

    /// Index of the stored time sample equal to `t`, if any.
    pub fn time_index(&self, t: R) -> Option<usize> {
        let s = (t - self.t0) / self.dt();
        let k = s.round();
        if (s - k).abs() > R::lit(1e-6) || k < R::zero() {
            return None;
        }
        let k = k.to_usize()?;
        (k < self.nt).then_some(k)
    }

    pub fn h(&self, axis: usize) -> R {
        self.lattice.spacing()[axis]
    }

    pub fn min_h(&self) -> R {
        self.lattice.min_spacing()
    }

    pub fn max_h(&self) -> R {
        self.lattice.spacing().iter().cloned().fold(R::zero(), R::max)
    }

    /// Whether lattice node `flat` lies in the (closed) box of interest.
    pub fn is_inner(&self, flat: usize) -> bool {
        (0..self.dim()).all(|axis| {
            let i = self.lattice.axis_index(flat, axis);
            i >= self.pad_nodes[axis] && i < self.pad_nodes[axis] + self.nx[axis]
        })
    }

    pub fn inner_nodes(&self) -> Vec<usize> {
        (0..self.lattice.len()).filter(|&f| self.is_inner(f)).collect()
    }

    /// Checks the finite-speed padding invariant for a field bound.
    pub fn check_padding(&self, sup_bound: R) -> Result<()> {
        let need = sup_bound * (self.t_final - self.t0);
        if self.padding < need * (R::one() - R::lit(1e-12)) {
            return Err(Error::invalid(format!(
                "padding {} is below sup_bound*(T-t0) = {}",
                self.padding, need
            )));
        }
        Ok(())
    }

    pub fn same_discretization(&self, other: &Self) -> bool {
        self == other
    }
}
