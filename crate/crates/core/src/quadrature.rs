//! Fixed quadrature rules and the mollifier kernel.

use crate::scalar::Real;

const GL9_NODES: [f64; 9] = [
    -0.968_160_239_507_626_1,
    -0.836_031_107_326_635_8,
    -0.613_371_432_700_590_4,
    -0.324_253_423_403_808_9,
    0.0,
    0.324_253_423_403_808_9,
    0.613_371_432_700_590_4,
    0.836_031_107_326_635_8,
    0.968_160_239_507_626_1,
];

const GL9_WEIGHTS: [f64; 9] = [
    0.081_274_388_361_574_4,
    0.180_648_160_694_857_4,
    0.260_610_696_402_935_4,
    0.312_347_077_040_002_9,
    0.330_239_355_001_259_8,
    0.312_347_077_040_002_9,
    0.260_610_696_402_935_4,
    0.180_648_160_694_857_4,
    0.081_274_388_361_574_4,
];

/// 9-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre_9<R: Real>() -> ([R; 9], [R; 9]) {
    (GL9_NODES.map(R::lit), GL9_WEIGHTS.map(R::lit))
}

/// Unnormalized bump profile `(1 - s^2)^3` on `|s| <= 1`.
#[inline]
pub fn bump_profile<R: Real>(s: R) -> R {
    let q = R::one() - s * s;
    if q <= R::zero() {
        R::zero()
    } else {
        q * q * q
    }
}

/// Derivative of [`bump_profile`] with respect to `s`.
#[inline]
pub fn bump_profile_derivative<R: Real>(s: R) -> R {
    let q = R::one() - s * s;
    if q <= R::zero() {
        R::zero()
    } else {
        -R::lit(6.0) * s * q * q
    }
}

/// `E[sgn(u - S)]` for `S` distributed with density `(35/32)(1 - s^2)^3`.
///
/// Odd, equal to `sgn u` for `|u| >= 1`, a degree-7 polynomial in between.
#[inline]
pub fn smoothed_sign<R: Real>(u: R) -> R {
    if u >= R::one() {
        return R::one();
    }
    if u <= -R::one() {
        return -R::one();
    }
    let u2 = u * u;
    let poly = R::one() - u2 + R::lit(0.6) * u2 * u2 - u2 * u2 * u2 / R::lit(7.0);
    R::lit(35.0 / 16.0) * u * poly
}

/// Per-axis mollifier quadrature: Gauss nodes on `[-1, 1]` with weights
/// `w_i * rho(s_i)` renormalized to unit mass.
pub fn mollifier_rule<R: Real>() -> ([R; 9], [R; 9]) {
    let (s, w) = gauss_legendre_9::<R>();
    let mut weights = [R::zero(); 9];
    let mut total = R::zero();
    for i in 0..9 {
        weights[i] = w[i] * bump_profile(s[i]);
        total = total + weights[i];
    }
    for v in weights.iter_mut() {
        *v = *v / total;
    }
    (s, weights)
}
