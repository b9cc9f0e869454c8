//! Velocity coefficients: closed-form, piecewise with planar interfaces, and
//! grid-sampled; their mollification and one-sided Lipschitz diagnostics.

mod io;
pub mod library;
mod mollify;
mod oslc;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoxRegion, NodeLattice};
use crate::scalar::{dot, norm, Real};

pub use io::{load_field, parse_field, resolve_field, FieldDocument, FieldSource, GridCsv, SmoothExpr};
pub use mollify::mollify;
pub use oslc::{estimate_oslc, jump_direction_check, translation_bound, JumpCheck, OslcReport, PairSampler, WorstPair};

/// Velocity rule `(t, x, out)`; writes `a(t, x)` into `out`.
pub type VelocityFn<R> = Arc<dyn Fn(R, &[R], &mut [R]) + Send + Sync>;

/// Maps a width `eps` to the smooth part convolved with the mollifier rule.
pub type SmoothConvolution<R> = Arc<dyn Fn(R) -> VelocityFn<R> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    ClosedForm,
    PiecewiseInterface,
    GridSampled,
}

/// Claimed OSLC modulus `alpha(t)`.
#[derive(Clone, Debug, PartialEq)]
pub enum OslcModulus<R> {
    Constant(R),
    /// `values[i]` on `[breaks[i], breaks[i + 1])`, extended flat at both ends.
    PiecewiseConstant {
        breaks: Vec<R>,
        values: Vec<R>,
    },
}

impl<R: Real> OslcModulus<R> {
    pub fn at(&self, t: R) -> R {
        match self {
            OslcModulus::Constant(a) => *a,
            OslcModulus::PiecewiseConstant { breaks, values } => {
                let idx = breaks.iter().rposition(|&b| b <= t).unwrap_or(0);
                values[idx.min(values.len() - 1)]
            }
        }
    }

    /// `int_{t0}^{t1} alpha` for `t0 <= t1`.
    pub fn integral(&self, t0: R, t1: R) -> R {
        match self {
            OslcModulus::Constant(a) => *a * (t1 - t0),
            OslcModulus::PiecewiseConstant { breaks, values } => {
                let mut total = R::zero();
                for i in 0..values.len() {
                    let lo = if i == 0 { R::neg_infinity() } else { breaks[i] };
                    let hi = if i + 1 < breaks.len() {
                        breaks[i + 1]
                    } else {
                        R::infinity()
                    };
                    let a = lo.max(t0);
                    let b = hi.min(t1);
                    if b > a {
                        total = total + values[i] * (b - a);
                    }
                }
                total
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            OslcModulus::Constant(a) if !(a.is_finite() && *a >= R::zero()) => {
                Err(Error::invalid("OSLC modulus must be finite and nonnegative"))
            }
            OslcModulus::PiecewiseConstant { breaks, values } => {
                if breaks.len() != values.len() || values.is_empty() {
                    return Err(Error::invalid("piecewise modulus needs one value per break"));
                }
                if breaks.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid("modulus breaks must increase"));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= R::zero())) {
                    return Err(Error::invalid("OSLC modulus must be finite and nonnegative"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Oriented planar interface `{x : n . x = offset}` with constant one-sided
/// values; contributes `(plus + minus)/2 + sgn(n . x - offset) (plus - minus)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarInterface<R> {
    normal: Vec<R>,
    offset: R,
    plus: Vec<R>,
    minus: Vec<R>,
}

impl<R: Real> PlanarInterface<R> {
    pub fn new(normal: Vec<R>, offset: R, plus: Vec<R>, minus: Vec<R>) -> Result<Self> {
        let n = norm(&normal);
        if !(n > R::zero()) || !n.is_finite() {
            return Err(Error::invalid("interface normal must be a nonzero finite vector"));
        }
        if plus.len() != normal.len() || minus.len() != normal.len() {
            return Err(Error::invalid("interface values must match the dimension"));
        }
        Ok(Self {
            normal: normal.iter().map(|&v| v / n).collect(),
            offset: offset / n,
            plus,
            minus,
        })
    }

    pub fn normal(&self) -> &[R] {
        &self.normal
    }

    pub fn offset(&self) -> R {
        self.offset
    }

    pub fn plus(&self) -> &[R] {
        &self.plus
    }

    pub fn minus(&self) -> &[R] {
        &self.minus
    }

    pub fn signed_distance(&self, x: &[R]) -> R {
        dot(&self.normal, x) - self.offset
    }

    #[inline]
    fn add_contribution(&self, x: &[R], out: &mut [R]) {
        self.add_with_sign(self.signed_distance(x).sgn0(), out);
    }

    #[inline]
    fn add_with_sign(&self, s: R, out: &mut [R]) {
        let half = R::lit(0.5);
        for i in 0..out.len() {
            out[i] = out[i] + half * (self.plus[i] + self.minus[i]) + s * half * (self.plus[i] - self.minus[i]);
        }
    }
}

#[derive(Clone)]
pub(crate) enum Repr<R> {
    Closed(VelocityFn<R>),
    Piecewise {
        smooth: Option<VelocityFn<R>>,
        interfaces: Vec<PlanarInterface<R>>,
        /// Exact mollification of `smooth`, when the field knows it.
        convolved: Option<SmoothConvolution<R>>,
    },
    Grid {
        lattice: NodeLattice<R>,
        values: Arc<Vec<R>>,
    },
    Mollified {
        base: Arc<CoefficientField<R>>,
        eps: R,
        /// Precomputed convolution of the base's smooth part.
        smooth: Option<VelocityFn<R>>,
    },
}

/// Evaluable velocity field `a(t, x)` with its claimed sup bound and OSLC modulus.
#[derive(Clone)]
pub struct CoefficientField<R> {
    kind: FieldKind,
    dim: usize,
    pub(crate) repr: Repr<R>,
    sup_bound: R,
    alpha: OslcModulus<R>,
    autonomous: bool,
    differentiable: bool,
    domain: Option<BoxRegion<R>>,
    label: String,
}

impl<R: Real> fmt::Debug for CoefficientField<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("label", &self.label)
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("sup_bound", &self.sup_bound)
            .field("alpha", &self.alpha)
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl<R: Real> CoefficientField<R> {
    fn build(kind: FieldKind, dim: usize, repr: Repr<R>, sup_bound: R, alpha: OslcModulus<R>) -> Result<Self> {
        if dim == 0 || dim > 8 {
            return Err(Error::invalid("dimension must be between 1 and 8"));
        }
        if !(sup_bound >= R::zero()) || !sup_bound.is_finite() {
            return Err(Error::invalid("sup_bound must be finite and nonnegative"));
        }
        alpha.validate()?;
        Ok(Self {
            kind,
            dim,
            repr,
            sup_bound,
            alpha,
            autonomous: true,
            differentiable: false,
            domain: None,
            label: String::new(),
        })
    }

    /// Closed-form field; assumed autonomous and non-differentiable until told otherwise.
    pub fn closed_form(dim: usize, rule: VelocityFn<R>, sup_bound: R, alpha: OslcModulus<R>) -> Result<Self> {
        Self::build(FieldKind::ClosedForm, dim, Repr::Closed(rule), sup_bound, alpha)
    }

    pub fn piecewise(
        dim: usize,
        smooth: Option<VelocityFn<R>>,
        interfaces: Vec<PlanarInterface<R>>,
        sup_bound: R,
        alpha: OslcModulus<R>,
    ) -> Result<Self> {
        if interfaces.iter().any(|i| i.normal.len() != dim) {
            return Err(Error::invalid("interface dimension mismatch"));
        }
        Self::build(
            FieldKind::PiecewiseInterface,
            dim,
            Repr::Piecewise {
                smooth,
                interfaces,
                convolved: None,
            },
            sup_bound,
            alpha,
        )
    }

    /// Multilinear field through node values (`dim` components per node,
    /// same node order as the lattice). Queries outside the lattice clamp.
    pub fn grid_sampled(lattice: NodeLattice<R>, values: Vec<R>, sup_bound: R, alpha: OslcModulus<R>) -> Result<Self> {
        let dim = lattice.dim();
        if values.len() != lattice.len() * dim {
            return Err(Error::invalid(format!(
                "grid field needs {} values, got {}",
                lattice.len() * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid field contains non-finite values"));
        }
        let domain = lattice.bounds();
        let mut f = Self::build(
            FieldKind::GridSampled,
            dim,
            Repr::Grid {
                lattice,
                values: Arc::new(values),
            },
            sup_bound,
            alpha,
        )?;
        f.domain = Some(domain);
        Ok(f)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Supplies the exact convolution of the smooth part of a piecewise
    /// field with the mollifier rule, used by [`mollify`] in place of
    /// tensor quadrature.
    pub fn with_smooth_convolution(mut self, f: SmoothConvolution<R>) -> Result<Self> {
        match &mut self.repr {
            Repr::Piecewise {
                smooth: Some(_),
                convolved,
                ..
            } => *convolved = Some(f),
            _ => {
                return Err(Error::invalid(
                    "a smooth convolution needs a piecewise field with a smooth part",
                ))
            }
        }
        Ok(self)
    }

    pub fn with_autonomous(mut self, autonomous: bool) -> Self {
        self.autonomous = autonomous;
        self
    }

    pub fn with_differentiable(mut self, differentiable: bool) -> Self {
        self.differentiable = differentiable;
        self
    }

    /// Domain box; queries outside it are clamped onto it.
    pub fn with_domain(mut self, domain: BoxRegion<R>) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_sup_bound(mut self, sup_bound: R) -> Self {
        self.sup_bound = sup_bound;
        self
    }

    pub fn with_alpha(mut self, alpha: OslcModulus<R>) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sup_bound(&self) -> R {
        self.sup_bound
    }

    pub fn alpha(&self) -> &OslcModulus<R> {
        &self.alpha
    }

    pub fn alpha_integral(&self, t0: R, t1: R) -> R {
        self.alpha.integral(t0, t1)
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn is_differentiable(&self) -> bool {
        self.differentiable
    }

    pub fn domain(&self) -> Option<&BoxRegion<R>> {
        self.domain.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Declared interfaces (empty unless the field is piecewise).
    pub fn interfaces(&self) -> &[PlanarInterface<R>] {
        match &self.repr {
            Repr::Piecewise { interfaces, .. } => interfaces,
            _ => &[],
        }
    }

    /// Unchecked evaluation into `out` (length `dim`).
    #[inline]
    pub fn eval_into(&self, t: R, x: &[R], out: &mut [R]) {
        if let Some(domain) = &self.domain {
            let mut buf = [R::zero(); 8];
            let y = &mut buf[..self.dim];
            y.copy_from_slice(x);
            domain.clamp(y);
            self.eval_repr(t, y, out);
        } else {
            self.eval_repr(t, x, out);
        }
    }

    #[inline]
    fn eval_repr(&self, t: R, x: &[R], out: &mut [R]) {
        match &self.repr {
            Repr::Closed(rule) => rule(t, x, out),
            Repr::Piecewise { smooth, interfaces, .. } => {
                match smooth {
                    Some(rule) => rule(t, x, out),
                    None => out.iter_mut().for_each(|v| *v = R::zero()),
                }
                for iface in interfaces {
                    iface.add_contribution(x, out);
                }
            }
            Repr::Grid { lattice, values } => {
                lattice.interpolate(values, self.dim, x, out);
            }
            Repr::Mollified { base, eps, smooth } => mollify::eval_mollified(base, *eps, smooth.as_ref(), t, x, out),
        }
    }

    /// Checked evaluation of `a(t, x)`.
    pub fn evaluate(&self, t: R, x: &[R]) -> Result<Vec<R>> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {}, field has {}",
                x.len(),
                self.dim
            )));
        }
        let mut out = vec![R::zero(); self.dim];
        self.eval_into(t, x, &mut out);
        if out.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::CorruptField {
                t: t.as_f64(),
                x: x.iter().map(|v| v.as_f64()).collect(),
            });
        }
        Ok(out)
    }

    /// One-sided limits across interface `idx` at a point on it:
    /// `(a_plus, a_minus)`, taken along `+normal` / `-normal`.
    pub(crate) fn one_sided_limits(&self, idx: usize, t: R, x: &[R]) -> (Vec<R>, Vec<R>) {
        let (smooth, interfaces) = match &self.repr {
            Repr::Piecewise { smooth, interfaces, .. } => (smooth, interfaces),
            _ => unreachable!("one-sided limits need a piecewise field"),
        };
        let mut base = vec![R::zero(); self.dim];
        if let Some(rule) = smooth {
            rule(t, x, &mut base);
        }
        for (k, iface) in interfaces.iter().enumerate() {
            if k != idx {
                iface.add_contribution(x, &mut base);
            }
        }
        let mut plus = base.clone();
        let mut minus = base;
        interfaces[idx].add_with_sign(R::one(), &mut plus);
        interfaces[idx].add_with_sign(-R::one(), &mut minus);
        (plus, minus)
    }
}

#[cfg(test)]
mod tests {
    use super::library;
    use super::*;

    #[test]
    fn sgn_example_values() {
        let a = library::sgn_example::<f64>();
        assert_eq!(a.evaluate(0.3, &[0.5, 0.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(a.evaluate(0.3, &[-0.5, 7.0]).unwrap(), vec![1.0, 0.0]);
        // sgn(0) = 0 on the interface
        assert_eq!(a.evaluate(0.3, &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_field_is_zero() {
        let a = library::zero::<f64>(2);
        assert_eq!(a.evaluate(1.0, &[3.0, -2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn grid_ramp_between_nodes() {
        let lat = NodeLattice::new(vec![0.0], vec![1.0], vec![11]).unwrap();
        let values: Vec<f64> = (0..11).map(|i| lat.axis_coord(0, i)).collect();
        let a = CoefficientField::grid_sampled(lat, values, 1.0, OslcModulus::Constant(1.0)).unwrap();
        let v = a.evaluate(0.0, &[0.25]).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-15);
        assert!((a.evaluate(0.0, &[0.3]).unwrap()[0] - 0.3).abs() < 1e-15);
        // clamped outside the lattice
        assert_eq!(a.evaluate(0.0, &[2.0]).unwrap()[0], 1.0);
    }

    #[test]
    fn non_finite_output_is_reported() {
        let rule: VelocityFn<f64> = Arc::new(|_, _, out: &mut [f64]| out[0] = f64::NAN);
        let a = CoefficientField::closed_form(1, rule, 1.0, OslcModulus::Constant(0.0)).unwrap();
        assert!(matches!(a.evaluate(0.0, &[0.0]), Err(Error::CorruptField { .. })));
    }

    #[test]
    fn sup_bound_holds_on_samples() {
        for a in [
            library::sgn_example::<f64>(),
            library::oscillatory_sgn(3.0),
            library::rotation(2.0),
        ] {
            for i in 0..50 {
                for j in 0..50 {
                    let x = [-2.0 + 0.08 * i as f64, -2.0 + 0.08 * j as f64];
                    let v = a.evaluate(0.1, &x).unwrap();
                    assert!(norm(&v) <= a.sup_bound() + 1e-12, "{:?}", a.label());
                }
            }
        }
    }

    #[test]
    fn modulus_integrals() {
        let m = OslcModulus::PiecewiseConstant {
            breaks: vec![0.0f64, 0.5],
            values: vec![1.0, 3.0],
        };
        assert_eq!(m.at(0.25), 1.0);
        assert_eq!(m.at(0.75), 3.0);
        assert!((m.integral(0.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((m.integral(0.25, 0.75) - 1.0).abs() < 1e-15);
        assert!((OslcModulus::Constant(2.0).integral(0.0, 0.5) - 1.0f64).abs() < 1e-15);
    }

    #[test]
    fn f32_evaluation() {
        let a = library::sgn_example::<f32>();
        assert_eq!(a.evaluate(0.0, &[0.5f32, 0.0]).unwrap(), vec![-1.0f32, 0.0]);
    }
}
