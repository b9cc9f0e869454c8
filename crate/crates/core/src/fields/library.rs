//! Built-in coefficient fields.

use std::sync::Arc;

use super::{CoefficientField, OslcModulus, PlanarInterface, VelocityFn};
use crate::grid::BoxRegion;
use crate::linalg::{matvec, sym_max_eigenvalue};
use crate::quadrature::mollifier_rule;
use crate::scalar::{norm, Real};

pub fn zero<R: Real>(dim: usize) -> CoefficientField<R> {
    let rule: VelocityFn<R> = Arc::new(|_, _, out: &mut [R]| out.iter_mut().for_each(|v| *v = R::zero()));
    CoefficientField::closed_form(dim, rule, R::zero(), OslcModulus::Constant(R::zero()))
        .expect("valid field")
        .with_differentiable(true)
        .with_label("zero")
}

pub fn constant<R: Real>(c: Vec<R>) -> CoefficientField<R> {
    let dim = c.len();
    let sup = norm(&c);
    let rule: VelocityFn<R> = Arc::new(move |_, _, out: &mut [R]| out.copy_from_slice(&c));
    CoefficientField::closed_form(dim, rule, sup, OslcModulus::Constant(R::zero()))
        .expect("valid field")
        .with_differentiable(true)
        .with_label("constant")
}

/// `a(x) = A x`, clamped to `domain` so that it stays bounded.
pub fn linear<R: Real>(matrix: Vec<R>, domain: BoxRegion<R>) -> CoefficientField<R> {
    let dim = domain.dim();
    assert_eq!(matrix.len(), dim * dim, "matrix must be dim x dim");
    let mut sup = R::zero();
    for corner in 0..(1usize << dim) {
        let v: Vec<R> = (0..dim)
            .map(|i| {
                if corner & (1 << i) != 0 {
                    domain.hi[i]
                } else {
                    domain.lo[i]
                }
            })
            .collect();
        sup = sup.max(norm(&matvec(&matrix, &v, dim)));
    }
    let sym: Vec<R> = (0..dim * dim)
        .map(|k| {
            let (i, j) = (k / dim, k % dim);
            R::lit(0.5) * (matrix[i * dim + j] + matrix[j * dim + i])
        })
        .collect();
    let alpha = sym_max_eigenvalue(&sym, dim).max(R::zero());
    let rule: VelocityFn<R> = Arc::new(move |_, x: &[R], out: &mut [R]| {
        for i in 0..out.len() {
            let mut s = R::zero();
            for j in 0..out.len() {
                s = s + matrix[i * out.len() + j] * x[j];
            }
            out[i] = s;
        }
    });
    CoefficientField::closed_form(dim, rule, sup, OslcModulus::Constant(alpha))
        .expect("valid field")
        .with_domain(domain)
        .with_differentiable(true)
        .with_label("linear")
}

/// Rigid rotation `a(x) = (-x_2, x_1)` on the square `[-radius, radius]^2`.
pub fn rotation<R: Real>(radius: R) -> CoefficientField<R> {
    let domain = BoxRegion::cube(2, -radius, radius).expect("positive radius");
    linear(vec![R::zero(), -R::one(), R::one(), R::zero()], domain).with_label("rotation")
}

fn sgn_interface<R: Real>(plus: R, minus: R, tangential: bool) -> PlanarInterface<R> {
    let (p, m) = if tangential {
        (vec![R::zero(), plus], vec![R::zero(), minus])
    } else {
        (vec![plus, R::zero()], vec![minus, R::zero()])
    };
    PlanarInterface::new(vec![R::one(), R::zero()], R::zero(), p, m).expect("valid interface")
}

/// The compressive two-dimensional example `a(t, x) = (-sgn x_1, 0)`.
pub fn sgn_example<R: Real>() -> CoefficientField<R> {
    CoefficientField::piecewise(
        2,
        None,
        vec![sgn_interface(-R::one(), R::one(), false)],
        R::one(),
        OslcModulus::Constant(R::zero()),
    )
    .expect("valid field")
    .with_label("sgn2d")
}

/// Expansive `a = (+sgn x_1, 0)` with an arbitrary claimed modulus.
pub fn expansive_sgn<R: Real>(claimed_alpha: R) -> CoefficientField<R> {
    CoefficientField::piecewise(
        2,
        None,
        vec![sgn_interface(R::one(), -R::one(), false)],
        R::one(),
        OslcModulus::Constant(claimed_alpha),
    )
    .expect("valid field")
    .with_label("expansive-sgn")
}

/// Tangential jump `a = (0, sgn x_1)`.
pub fn tangential_jump<R: Real>(claimed_alpha: R) -> CoefficientField<R> {
    CoefficientField::piecewise(
        2,
        None,
        vec![sgn_interface(R::one(), -R::one(), true)],
        R::one(),
        OslcModulus::Constant(claimed_alpha),
    )
    .expect("valid field")
    .with_label("tangential-jump")
}

/// One-dimensional `a(x) = -sgn x`.
pub fn neg_sgn_1d<R: Real>() -> CoefficientField<R> {
    let iface =
        PlanarInterface::new(vec![R::one()], R::zero(), vec![-R::one()], vec![R::one()]).expect("valid interface");
    CoefficientField::piecewise(1, None, vec![iface], R::one(), OslcModulus::Constant(R::zero()))
        .expect("valid field")
        .with_label("neg-sgn-1d")
}

/// The rule is symmetric with unit mass, so it maps `sin(n x_1)` to
/// `sin(n x_1) sum_q w_q cos(n eps s_q)`.
fn sine_convolution<R: Real>(amp: R, n: R, eps: R) -> VelocityFn<R> {
    let (s, w) = mollifier_rule::<R>();
    let damping = (0..9).fold(R::zero(), |acc, q| acc + w[q] * (n * eps * s[q]).cos());
    let scale = amp * damping;
    Arc::new(move |_, x: &[R], out: &mut [R]| {
        out[0] = scale * (n * x[0]).sin();
        out[1] = R::zero();
    })
}

/// `(-sgn x_1, 0) + (1/n) sin(n x_1) e_1`: sup bound `1 + 1/n`, modulus 1.
pub fn oscillatory_sgn<R: Real>(n: R) -> CoefficientField<R> {
    let amp = R::one() / n;
    let smooth: VelocityFn<R> = Arc::new(move |_, x: &[R], out: &mut [R]| {
        out[0] = amp * (n * x[0]).sin();
        out[1] = R::zero();
    });
    CoefficientField::piecewise(
        2,
        Some(smooth),
        vec![sgn_interface(-R::one(), R::one(), false)],
        R::one() + amp,
        OslcModulus::Constant(R::one()),
    )
    .and_then(|f| f.with_smooth_convolution(Arc::new(move |eps| sine_convolution(amp, n, eps))))
    .expect("valid field")
    .with_label(format!("oscillatory-sgn-{n}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_field_modulus_and_bound() {
        let dom = BoxRegion::cube(2, -1.0, 1.0).unwrap();
        let a = linear(vec![-1.0, 0.0, 0.0, 2.0], dom);
        assert_eq!(a.alpha().at(0.0), 2.0);
        assert!((a.sup_bound() - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.evaluate(0.0, &[0.5, 0.5]).unwrap(), vec![-0.5, 1.0]);
    }

    #[test]
    fn rotation_is_antisymmetric() {
        let a = rotation(3.0);
        assert_eq!(a.alpha().at(0.0), 0.0);
        assert_eq!(a.evaluate(0.0, &[1.0, 2.0]).unwrap(), vec![-2.0, 1.0]);
    }
}
