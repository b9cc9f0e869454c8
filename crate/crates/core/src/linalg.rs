//! Small dense linear algebra on row-major `n x n` matrices.

use crate::scalar::Real;

/// Determinant: cofactor expansion for `n <= 3`, partial-pivot elimination above.
pub fn det<R: Real>(m: &[R], n: usize) -> R {
    debug_assert_eq!(m.len(), n * n);
    match n {
        0 => R::one(),
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => det_lu(m, n),
    }
}

fn det_lu<R: Real>(m: &[R], n: usize) -> R {
    let mut a = m.to_vec();
    let mut d = R::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if a[pivot * n + col] == R::zero() {
            return R::zero();
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            d = -d;
        }
        let p = a[col * n + col];
        d = d * p;
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            for k in col..n {
                a[row * n + k] = a[row * n + k] - f * a[col * n + k];
            }
        }
    }
    d
}

/// Largest eigenvalue of a symmetric matrix (cyclic Jacobi rotations).
pub fn sym_max_eigenvalue<R: Real>(m: &[R], n: usize) -> R {
    let mut a = m.to_vec();
    let eps = R::epsilon();
    for _sweep in 0..64 {
        let mut off = R::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[p * n + q] * a[p * n + q];
            }
        }
        let scale: R = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum::<R>() + off;
        if off <= eps * eps * scale || off == R::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == R::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (R::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + R::one()).sqrt());
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).fold(R::neg_infinity(), R::max)
}

pub fn matmul<R: Real>(a: &[R], b: &[R], n: usize) -> Vec<R> {
    let mut c = vec![R::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == R::zero() {
                continue;
            }
            for j in 0..n {
                c[i * n + j] = c[i * n + j] + aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn matvec<R: Real>(a: &[R], x: &[R], n: usize) -> Vec<R> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<R: Real>(a: &[R], n: usize) -> Vec<R> {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<R>())
        .fold(R::zero(), R::max);
    let mut squarings = 0u32;
    let mut scale = R::one();
    while norm * scale > R::lit(0.5) {
        scale = scale * R::lit(0.5);
        squarings += 1;
    }
    let scaled: Vec<R> = a.iter().map(|&v| v * scale).collect();
    let mut result = identity::<R>(n);
    let mut term = identity::<R>(n);
    for k in 1..=24 {
        term = matmul(&term, &scaled, n);
        let inv = R::one() / R::from_usize_lossy(k);
        for v in term.iter_mut() {
            *v = *v * inv;
        }
        let mut small = true;
        for (r, &t) in result.iter_mut().zip(&term) {
            *r = *r + t;
            small &= t.abs() <= R::epsilon() * r.abs().max(R::epsilon());
        }
        if small {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, n);
    }
    result
}

pub fn identity<R: Real>(n: usize) -> Vec<R> {
    let mut m = vec![R::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = R::one();
    }
    m
}
