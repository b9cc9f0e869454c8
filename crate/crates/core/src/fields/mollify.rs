use std::sync::Arc;

use super::{CoefficientField, FieldKind, PlanarInterface, Repr, VelocityFn};
use crate::error::{Error, Result};
use crate::quadrature::{mollifier_rule, smoothed_sign};
use crate::scalar::Real;

/// Spatial convolution `rho_eps * a` with the tensor bump `(1 - s^2)^3`.
///
/// Continuous parts are integrated with a 9-point-per-axis Gauss rule. Each
/// planar jump is integrated in closed form along its dominant normal axis
/// (and by the same Gauss rule across the others), which keeps the result
/// smooth instead of a staircase of shifted jumps.
pub fn mollify<R: Real>(field: &CoefficientField<R>, eps: R) -> Result<CoefficientField<R>> {
    if !(eps > R::zero()) || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "mollification width must be positive, got {eps}"
        )));
    }
    Ok(CoefficientField {
        kind: FieldKind::ClosedForm,
        dim: field.dim,
        repr: Repr::Mollified {
            base: Arc::new(field.clone()),
            eps,
            smooth: match &field.repr {
                Repr::Piecewise { convolved: Some(f), .. } => Some(f(eps)),
                _ => None,
            },
        },
        sup_bound: field.sup_bound,
        alpha: field.alpha.clone(),
        autonomous: field.autonomous,
        differentiable: true,
        domain: None,
        label: format!("mollify({}, {})", field.label, eps),
    })
}

pub(super) fn eval_mollified<R: Real>(
    base: &CoefficientField<R>,
    eps: R,
    convolved: Option<&VelocityFn<R>>,
    t: R,
    x: &[R],
    out: &mut [R],
) {
    out.iter_mut().for_each(|v| *v = R::zero());
    match &base.repr {
        Repr::Piecewise { smooth, interfaces, .. } => {
            if let Some(f) = convolved {
                f(t, x, out);
            } else if let Some(rule) = smooth {
                tensor_quadrature(base.dim, eps, x, out, |y, o| {
                    if let Some(d) = &base.domain {
                        let mut buf = [R::zero(); 8];
                        let z = &mut buf[..y.len()];
                        z.copy_from_slice(y);
                        d.clamp(z);
                        rule(t, z, o)
                    } else {
                        rule(t, y, o)
                    }
                });
            }
            for iface in interfaces {
                add_mollified_interface(iface, eps, x, out);
            }
        }
        _ => tensor_quadrature(base.dim, eps, x, out, |y, o| base.eval_into(t, y, o)),
    }
}

/// Adds `sum_q w_q f(x - eps s_q)` over the tensor Gauss points.
fn tensor_quadrature<R: Real, F: Fn(&[R], &mut [R])>(dim: usize, eps: R, x: &[R], out: &mut [R], f: F) {
    let (nodes, weights) = mollifier_rule::<R>();
    let mut idx = [0usize; 8];
    let mut y = [R::zero(); 8];
    let mut val = [R::zero(); 8];
    loop {
        let mut w = R::one();
        for axis in 0..dim {
            y[axis] = x[axis] - eps * nodes[idx[axis]];
            w = w * weights[idx[axis]];
        }
        f(&y[..dim], &mut val[..dim]);
        for c in 0..dim {
            out[c] = out[c] + w * val[c];
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < 9 {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

fn add_mollified_interface<R: Real>(iface: &PlanarInterface<R>, eps: R, x: &[R], out: &mut [R]) {
    let n = iface.normal();
    let z = iface.signed_distance(x) / eps;
    let k = (0..n.len())
        .max_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let nk = n[k].abs();
    let mut others = [(0usize, R::zero()); 8];
    let mut m = 0;
    for (j, &nj) in n.iter().enumerate() {
        if j != k && nj != R::zero() {
            others[m] = (j, nj);
            m += 1;
        }
    }
    let expectation = if m == 0 {
        smoothed_sign(z / nk)
    } else {
        let (nodes, weights) = mollifier_rule::<R>();
        let mut idx = [0usize; 8];
        let mut acc = R::zero();
        'outer: loop {
            let mut w = R::one();
            let mut shift = R::zero();
            for a in 0..m {
                shift = shift + others[a].1 * nodes[idx[a]];
                w = w * weights[idx[a]];
            }
            acc = acc + w * smoothed_sign((z - shift) / nk);
            let mut a = 0;
            loop {
                if a == m {
                    break 'outer;
                }
                idx[a] += 1;
                if idx[a] < 9 {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
        acc
    };
    iface.add_with_sign(expectation, out);
}

#[cfg(test)]
mod tests {
    use super::super::library;
    use super::super::{OslcModulus, VelocityFn};
    use super::*;
    use crate::quadrature::bump_profile;

    #[test]
    fn rejects_nonpositive_width() {
        let a = library::zero::<f64>(1);
        assert!(mollify(&a, 0.0).is_err());
        assert!(mollify(&a, -0.1).is_err());
    }

    #[test]
    fn constants_are_preserved() {
        let a = library::constant(vec![0.7f64, -1.3]);
        let m = mollify(&a, 0.2).unwrap();
        let v = m.evaluate(0.0, &[0.3, 0.9]).unwrap();
        assert!((v[0] - 0.7).abs() < 1e-15 && (v[1] + 1.3).abs() < 1e-15);
        assert_eq!(m.kind(), FieldKind::ClosedForm);
        assert_eq!(m.sup_bound(), a.sup_bound());
    }

    #[test]
    fn neg_sgn_matches_direct_kernel_quadrature() {
        let eps = 0.1;
        let m = mollify(&library::neg_sgn_1d::<f64>(), eps).unwrap();
        // oracle: midpoint rule on the normalized kernel
        let oracle = |x: f64| {
            let n = 100_000;
            let mut acc = 0.0;
            let mut mass = 0.0;
            for k in 0..n {
                let s = -1.0 + (k as f64 + 0.5) * 2.0 / n as f64;
                let w = bump_profile(s);
                mass += w;
                acc += w * -(x - eps * s).signum();
            }
            acc / mass
        };
        for &x in &[-0.2, -0.1, -0.05, -0.01, 0.0, 0.02, 0.07, 0.1, 0.3] {
            let v = m.evaluate(0.0, &[x]).unwrap()[0];
            assert!((v - oracle(x)).abs() < 1e-4, "x={x}: {v} vs {}", oracle(x));
        }
        assert_eq!(m.evaluate(0.0, &[0.1]).unwrap()[0], -1.0);
        assert_eq!(m.evaluate(0.0, &[-0.1]).unwrap()[0], 1.0);
        let mut prev = 2.0;
        for k in 0..=200 {
            let v = m.evaluate(0.0, &[-0.1 + k as f64 * 0.001]).unwrap()[0];
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn oblique_interface_matches_tensor_quadrature_of_smooth_surrogate() {
        // Oracle: the same jump written as a smooth closed-form field with a
        // very steep tanh, mollified by fine 2-D midpoint quadrature.
        let iface = PlanarInterface::new(vec![1.0, 2.0], 0.3, vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap();
        let a = CoefficientField::piecewise(2, None, vec![iface.clone()], 3.0, OslcModulus::Constant(0.0)).unwrap();
        let eps = 0.2;
        let m = mollify(&a, eps).unwrap();
        let x = [0.1, 0.15];
        let n = 600;
        let mut acc = [0.0; 2];
        let mut mass = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s1 = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                let s2 = -1.0 + (j as f64 + 0.5) * 2.0 / n as f64;
                let w = bump_profile(s1) * bump_profile(s2);
                let y = [x[0] - eps * s1, x[1] - eps * s2];
                let sg = iface.signed_distance(&y).signum();
                mass += w;
                acc[0] += w * -sg * iface.plus()[0].abs();
                acc[1] += w * -sg * iface.plus()[1].abs();
            }
        }
        let v = m.evaluate(0.0, &x).unwrap();
        assert!(
            (v[0] - acc[0] / mass).abs() < 2e-3,
            "{v:?} vs {:?}",
            acc.map(|c| c / mass)
        );
        assert!((v[1] - acc[1] / mass).abs() < 4e-3);
    }

    #[test]
    fn l1_error_of_sgn_example_scales_with_width() {
        // |a_eps - a| integrates to (35/32) eps over [-1,1]^2 (two strips of
        // half-width eps, each carrying (35/128) eps per unit length).
        let a = library::sgn_example::<f64>();
        for &eps in &[0.2, 0.1, 0.05] {
            let m = mollify(&a, eps).unwrap();
            let n = 4000;
            let dx = 2.0 / n as f64;
            let mut err = 0.0;
            for i in 0..n {
                let x1 = -1.0 + (i as f64 + 0.5) * dx;
                let v = m.evaluate(0.0, &[x1, 0.0]).unwrap();
                let w = a.evaluate(0.0, &[x1, 0.0]).unwrap();
                err += (v[0] - w[0]).abs() * dx * 2.0;
            }
            assert!((err - 35.0 / 32.0 * eps).abs() < 1e-3 * eps + 1e-6, "eps={eps}: {err}");
            assert!(err <= 1.1 * eps);
        }
    }

    #[test]
    fn smooth_part_is_quadrature_convolved() {
        let rule: VelocityFn<f64> = Arc::new(|_, x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0]);
        let a = CoefficientField::closed_form(1, rule, 10.0, OslcModulus::Constant(10.0)).unwrap();
        let m = mollify(&a, 0.5).unwrap();
        // E[(x - eps S)^2] = x^2 + eps^2 E[S^2], E[S^2] = 1/9 for this kernel
        let v = m.evaluate(0.0, &[0.3]).unwrap()[0];
        assert!((v - (0.09 + 0.25 / 9.0)).abs() < 1e-14);
    }

    #[test]
    fn supplied_convolution_matches_quadrature() {
        let lean = library::oscillatory_sgn(8.0f64);
        let smooth: VelocityFn<f64> = Arc::new(|_, x: &[f64], out: &mut [f64]| {
            out[0] = (8.0 * x[0]).sin() / 8.0;
            out[1] = 0.0;
        });
        let iface = lean.interfaces()[0].clone();
        let full =
            CoefficientField::piecewise(2, Some(smooth), vec![iface], 1.125, OslcModulus::Constant(1.0)).unwrap();
        let (a, b) = (mollify(&lean, 0.1).unwrap(), mollify(&full, 0.1).unwrap());
        for x in [[0.03, 0.4], [-0.2, 1.1], [0.7, -0.9]] {
            let (va, vb) = (a.evaluate(0.0, &x).unwrap(), b.evaluate(0.0, &x).unwrap());
            assert!((va[0] - vb[0]).abs() < 1e-14 && va[1] == vb[1]);
        }
    }
}
