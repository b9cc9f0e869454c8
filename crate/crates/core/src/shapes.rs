//! Closed set of built-in scalar profiles used for solution data and for
//! the data of the closed-form example solutions.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

fn one<R: Real>() -> R {
    R::one()
}

/// A scalar function of a point, selected by name in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
#[serde(bound(deserialize = "R: Real + Deserialize<'de>", serialize = "R: Serialize"))]
pub enum Shape<R> {
    Zero,
    Constant {
        value: R,
    },
    /// `coef . x + offset`
    Affine {
        coef: Vec<R>,
        #[serde(default)]
        offset: R,
    },
    /// `height * prod_i (1 - ((x_i - c_i) / r)^2)^3_+`
    Bump {
        center: Vec<R>,
        radius: R,
        #[serde(default = "one")]
        height: R,
    },
    /// `amplitude * sin(freq . x + phase)`
    Sine {
        freq: Vec<R>,
        #[serde(default)]
        phase: R,
        #[serde(default = "one")]
        amplitude: R,
    },
    /// Indicator of a closed box, with value 1/2 on each boundary face
    /// (per axis, consistent with `sgn(0) = 0`).
    Indicator {
        lo: Vec<R>,
        hi: Vec<R>,
    },
    /// Smooth cutoff: 1 on the box shrunk by `width`, 0 outside the box.
    Plateau {
        lo: Vec<R>,
        hi: Vec<R>,
        width: R,
    },
    Product {
        factors: Vec<Shape<R>>,
    },
    Sum {
        terms: Vec<Shape<R>>,
    },
}

fn smoothstep<R: Real>(s: R) -> R {
    if s <= R::zero() {
        R::zero()
    } else if s >= R::one() {
        R::one()
    } else {
        s * s * s * (s * (s * R::lit(6.0) - R::lit(15.0)) + R::lit(10.0))
    }
}

impl<R: Real> Shape<R> {
    pub fn eval(&self, x: &[R]) -> R {
        match self {
            Shape::Zero => R::zero(),
            Shape::Constant { value } => *value,
            Shape::Affine { coef, offset } => coef.iter().zip(x).map(|(&c, &v)| c * v).sum::<R>() + *offset,
            Shape::Bump { center, radius, height } => {
                let mut v = *height;
                for (&c, &xi) in center.iter().zip(x) {
                    let s = (xi - c) / *radius;
                    let q = R::one() - s * s;
                    if q <= R::zero() {
                        return R::zero();
                    }
                    v = v * q * q * q;
                }
                v
            }
            Shape::Sine { freq, phase, amplitude } => {
                let arg = freq.iter().zip(x).map(|(&k, &v)| k * v).sum::<R>() + *phase;
                *amplitude * arg.sin()
            }
            Shape::Indicator { lo, hi } => {
                let half = R::lit(0.5);
                let mut v = R::one();
                for ((&a, &b), &xi) in lo.iter().zip(hi).zip(x) {
                    if xi < a || xi > b {
                        return R::zero();
                    }
                    if xi == a || xi == b {
                        v = v * half;
                    }
                }
                v
            }
            Shape::Plateau { lo, hi, width } => {
                let mut v = R::one();
                for ((&a, &b), &xi) in lo.iter().zip(hi).zip(x) {
                    let d = (xi - a).min(b - xi);
                    v = v * smoothstep(d / *width);
                }
                v
            }
            Shape::Product { factors } => factors.iter().fold(R::one(), |acc, f| acc * f.eval(x)),
            Shape::Sum { terms } => terms.iter().map(|f| f.eval(x)).sum(),
        }
    }

    /// Structural test for the zero function.
    pub fn is_zero(&self) -> bool {
        match self {
            Shape::Zero => true,
            Shape::Constant { value } => *value == R::zero(),
            Shape::Affine { coef, offset } => *offset == R::zero() && coef.iter().all(|&c| c == R::zero()),
            Shape::Bump { height, .. } => *height == R::zero(),
            Shape::Sine { amplitude, .. } => *amplitude == R::zero(),
            Shape::Indicator { .. } | Shape::Plateau { .. } => false,
            Shape::Product { factors } => factors.iter().any(Shape::is_zero),
            Shape::Sum { terms } => terms.iter().all(Shape::is_zero),
        }
    }

    pub fn bump(center: Vec<R>, radius: R) -> Self {
        Shape::Bump {
            center,
            radius,
            height: R::one(),
        }
    }

    pub fn affine(coef: Vec<R>, offset: R) -> Self {
        Shape::Affine { coef, offset }
    }

    pub fn times(self, other: Shape<R>) -> Self {
        Shape::Product {
            factors: vec![self, other],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_half_on_faces() {
        let s = Shape::Indicator {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        assert_eq!(s.eval(&[0.5, 0.5]), 1.0);
        assert_eq!(s.eval(&[0.0, 0.5]), 0.5);
        assert_eq!(s.eval(&[0.0, 1.0]), 0.25);
        assert_eq!(s.eval(&[1.5, 0.5]), 0.0);
    }

    #[test]
    fn plateau_is_one_inside_and_zero_outside() {
        let s = Shape::Plateau {
            lo: vec![-2.0],
            hi: vec![2.0],
            width: 0.5,
        };
        assert_eq!(s.eval(&[0.0]), 1.0);
        assert_eq!(s.eval(&[1.5]), 1.0);
        assert_eq!(s.eval(&[2.0]), 0.0);
        assert!(s.eval(&[1.75]) > 0.0 && s.eval(&[1.75]) < 1.0);
    }

    #[test]
    fn parses_from_json() {
        let s: Shape<f64> = serde_json::from_str(r#"{"shape":"bump","center":[0,0],"radius":0.5}"#).unwrap();
        assert_eq!(s.eval(&[0.0, 0.0]), 1.0);
        let a: Shape<f64> = serde_json::from_str(r#"{"shape":"affine","coef":[1,0]}"#).unwrap();
        assert_eq!(a.eval(&[3.0, 7.0]), 3.0);
        assert!(Shape::<f64>::Zero.is_zero());
        assert!(!a.is_zero());
    }
}
