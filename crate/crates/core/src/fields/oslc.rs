use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CoefficientField, FieldKind};
use crate::error::{Error, Result};
use crate::grid::BoxRegion;
use crate::linalg::sym_max_eigenvalue;
use crate::scalar::{dist, dot, norm, Real};

/// Pair-sampling plan for OSLC estimation.
#[derive(Clone, Debug)]
pub struct PairSampler<R> {
    pub region: BoxRegion<R>,
    /// Stratified random pairs (fixed seed).
    pub random_pairs: usize,
    pub seed: u64,
    /// Scales of the deterministic interface-straddling pairs.
    pub straddle_scales: Vec<R>,
    /// Points per interface at which straddling pairs are placed.
    pub straddle_points: usize,
    /// Sample points for the symmetric-gradient eigenvalue check.
    pub derivative_points: usize,
    /// Slack above the claimed modulus before a violation is flagged.
    pub tolerance: R,
}

impl<R: Real> PairSampler<R> {
    /// Default plan: straddling scales `{h, h/2, h/4}` for grid spacing `h`.
    pub fn standard(region: BoxRegion<R>, h: R, seed: u64) -> Self {
        Self {
            region,
            random_pairs: 4096,
            seed,
            straddle_scales: vec![h, h * R::lit(0.5), h * R::lit(0.25)],
            straddle_points: 33,
            derivative_points: 64,
            tolerance: R::lit(1e-9),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstPair<R> {
    pub t: R,
    pub x: Vec<R>,
    pub y: Vec<R>,
    pub ratio: R,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OslcReport<R> {
    pub t: R,
    /// Max over sampled pairs of `<a(y) - a(x), y - x> / |y - x|^2`.
    pub alpha_hat: R,
    pub claimed: R,
    pub worst_pair: Option<WorstPair<R>>,
    pub violated: bool,
    pub pairs_sampled: usize,
    /// Largest eigenvalue of the symmetric gradient, for differentiable fields.
    pub matrix_alpha: Option<R>,
}

pub(crate) fn pair_ratio<R: Real>(
    field: &CoefficientField<R>,
    t: R,
    x: &[R],
    y: &[R],
    ax: &mut [R],
    ay: &mut [R],
) -> R {
    field.eval_into(t, x, ax);
    field.eval_into(t, y, ay);
    let mut num = R::zero();
    let mut den = R::zero();
    for i in 0..x.len() {
        let d = y[i] - x[i];
        num = num + (ay[i] - ax[i]) * d;
        den = den + d * d;
    }
    num / den
}

fn tangent_of<R: Real>(normal: &[R]) -> Option<Vec<R>> {
    if normal.len() < 2 {
        return None;
    }
    let j = (0..normal.len())
        .min_by(|&a, &b| {
            normal[a]
                .abs()
                .partial_cmp(&normal[b].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut tau = vec![R::zero(); normal.len()];
    tau[j] = R::one();
    let p = normal[j];
    for (t, &n) in tau.iter_mut().zip(normal) {
        *t = *t - p * n;
    }
    let l = norm(&tau);
    Some(tau.iter().map(|&v| v / l).collect())
}

fn straddle_pairs<R: Real>(field: &CoefficientField<R>, sampler: &PairSampler<R>) -> Vec<(Vec<R>, Vec<R>)> {
    let dim = field.dim();
    let region = &sampler.region;
    let mut pairs = Vec::new();
    let m = sampler.straddle_points.max(1);
    for iface in field.interfaces() {
        let n = iface.normal();
        let tau = tangent_of(n);
        for k in 0..m {
            // low-discrepancy base points, projected onto the plane
            let mut b = vec![R::zero(); dim];
            for (axis, v) in b.iter_mut().enumerate() {
                let u = if axis == 0 {
                    (k as f64 + 0.5) / m as f64
                } else {
                    ((k as f64 + 0.5) * 0.618_033_988_749_895 * axis as f64).fract()
                };
                *v = region.lo[axis] + R::lit(u) * (region.hi[axis] - region.lo[axis]);
            }
            let d = iface.signed_distance(&b);
            for (v, &ni) in b.iter_mut().zip(n) {
                *v = *v - d * ni;
            }
            if !region.contains(&b, R::zero()) {
                continue;
            }
            for &s in &sampler.straddle_scales {
                let half = s * R::lit(0.5);
                let mut dirs = vec![n.to_vec()];
                if let Some(tau) = &tau {
                    for sign in [R::one(), -R::one()] {
                        dirs.push(n.iter().zip(tau).map(|(&a, &b)| a + sign * R::lit(0.5) * b).collect());
                    }
                }
                for dir in dirs {
                    let x: Vec<R> = b.iter().zip(&dir).map(|(&p, &d)| p - half * d).collect();
                    let y: Vec<R> = b.iter().zip(&dir).map(|(&p, &d)| p + half * d).collect();
                    pairs.push((x, y));
                }
                // one endpoint exactly on the interface
                pairs.push((b.clone(), b.iter().zip(n).map(|(&p, &d)| p + s * d).collect()));
            }
        }
    }
    pairs
}

/// Estimates the OSLC modulus of `field` at time `t` by pair sampling.
pub fn estimate_oslc<R: Real>(field: &CoefficientField<R>, t: R, sampler: &PairSampler<R>) -> Result<OslcReport<R>> {
    let dim = field.dim();
    if sampler.region.dim() != dim {
        return Err(Error::invalid("sampler region dimension differs from the field"));
    }
    let mut pairs = straddle_pairs(field, sampler);
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let region = &sampler.region;
    let diam = region.diameter();
    let finest = sampler
        .straddle_scales
        .iter()
        .cloned()
        .fold(diam * R::lit(1e-3), R::min);
    let strata = (sampler.random_pairs as f64).powf(1.0 / dim as f64).ceil().max(1.0) as usize;
    for i in 0..sampler.random_pairs {
        let mut cell = i;
        let mut x = vec![R::zero(); dim];
        for axis in 0..dim {
            let c = cell % strata;
            cell /= strata;
            let u: f64 = rng.gen();
            let frac = R::lit((c as f64 + u) / strata as f64);
            x[axis] = region.lo[axis] + frac * (region.hi[axis] - region.lo[axis]);
        }
        let mut dir: Vec<R> = (0..dim).map(|_| R::lit(rng.gen_range(-1.0..1.0))).collect();
        let l = norm(&dir);
        if !(l > R::lit(1e-6)) {
            continue;
        }
        dir.iter_mut().for_each(|v| *v = *v / l);
        let log_lo = finest.as_f64().ln();
        let log_hi = (diam * R::lit(0.5)).as_f64().ln();
        let r = R::lit(rng.gen_range(log_lo..=log_hi).exp());
        let mut y: Vec<R> = x.iter().zip(&dir).map(|(&p, &d)| p + r * d).collect();
        region.clamp(&mut y);
        if dist(&x, &y) > R::zero() {
            pairs.push((x, y));
        }
    }
    if pairs.is_empty() {
        return Err(Error::invalid("pair sampler produced no pairs"));
    }
    let claimed = field.alpha().at(t);
    let mut ax = vec![R::zero(); dim];
    let mut ay = vec![R::zero(); dim];
    let mut worst: Option<WorstPair<R>> = None;
    for (x, y) in &pairs {
        let ratio = pair_ratio(field, t, x, y, &mut ax, &mut ay);
        if !ratio.is_finite() {
            return Err(Error::CorruptField {
                t: t.as_f64(),
                x: x.iter().map(|v| v.as_f64()).collect(),
            });
        }
        if worst.as_ref().is_none_or(|w| ratio > w.ratio) {
            worst = Some(WorstPair {
                t,
                x: x.clone(),
                y: y.clone(),
                ratio,
            });
        }
    }
    let alpha_hat = worst.as_ref().map(|w| w.ratio).unwrap_or(R::zero());
    let matrix_alpha = if field.is_differentiable() && field.kind() != FieldKind::GridSampled {
        Some(matrix_form_modulus(field, t, sampler, &mut rng))
    } else {
        None
    };
    let mut violated = alpha_hat > claimed + sampler.tolerance;
    if let Some(m) = matrix_alpha {
        let slack = sampler.tolerance.max(R::lit(1e-6) * (R::one() + claimed.abs()));
        violated |= m > claimed + slack;
    }
    Ok(OslcReport {
        t,
        alpha_hat,
        claimed,
        worst_pair: worst,
        violated,
        pairs_sampled: pairs.len(),
        matrix_alpha,
    })
}

/// Max over random points of the top eigenvalue of `(Da + Da^T)/2`,
/// with `Da` from central differences.
fn matrix_form_modulus<R: Real>(
    field: &CoefficientField<R>,
    t: R,
    sampler: &PairSampler<R>,
    rng: &mut ChaCha8Rng,
) -> R {
    let dim = field.dim();
    let region = &sampler.region;
    let delta = region.diameter() * R::lit(1e-6);
    let mut best = R::neg_infinity();
    let mut jac = vec![R::zero(); dim * dim];
    let mut ap = vec![R::zero(); dim];
    let mut am = vec![R::zero(); dim];
    for _ in 0..sampler.derivative_points.max(1) {
        let x: Vec<R> = (0..dim)
            .map(|axis| {
                let u: f64 = rng.gen();
                region.lo[axis] + R::lit(u) * (region.hi[axis] - region.lo[axis])
            })
            .collect();
        for j in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] = xp[j] + delta;
            xm[j] = xm[j] - delta;
            field.eval_into(t, &xp, &mut ap);
            field.eval_into(t, &xm, &mut am);
            for i in 0..dim {
                jac[i * dim + j] = (ap[i] - am[i]) / (R::lit(2.0) * delta);
            }
        }
        let sym: Vec<R> = (0..dim * dim)
            .map(|k| {
                let (i, j) = (k / dim, k % dim);
                R::lit(0.5) * (jac[i * dim + j] + jac[j * dim + i])
            })
            .collect();
        best = best.max(sym_max_eigenvalue(&sym, dim));
    }
    best
}

/// Left and right sides of the integrated translation inequality
/// `int_omega |<a(x + h) - a(x), h>| dx <= 2 (alpha |C| + |a|_inf diam(C)^(N-1)) |h|^2`.
pub fn translation_bound<R: Real>(
    field: &CoefficientField<R>,
    t: R,
    convex_box: &BoxRegion<R>,
    omega: &BoxRegion<R>,
    h: &[R],
    nodes_per_axis: usize,
) -> Result<(R, R)> {
    let dim = field.dim();
    if convex_box.dim() != dim || omega.dim() != dim || h.len() != dim {
        return Err(Error::invalid("dimension mismatch in translation bound"));
    }
    if nodes_per_axis < 2 {
        return Err(Error::invalid("need at least 2 quadrature nodes per axis"));
    }
    let hn = norm(h);
    if !convex_box.contains_box(&omega.inflate(hn)) {
        return Err(Error::invalid("omega enlarged by |h| is not inside C"));
    }
    let lattice = crate::grid::NodeLattice::new(omega.lo.clone(), omega.hi.clone(), vec![nodes_per_axis; dim])?;
    let mut x = vec![R::zero(); dim];
    let mut xh = vec![R::zero(); dim];
    let mut ax = vec![R::zero(); dim];
    let mut axh = vec![R::zero(); dim];
    let mut lhs = R::zero();
    for k in 0..lattice.len() {
        lattice.coord(k, &mut x);
        for i in 0..dim {
            xh[i] = x[i] + h[i];
        }
        field.eval_into(t, &x, &mut ax);
        field.eval_into(t, &xh, &mut axh);
        let diff: Vec<R> = axh.iter().zip(&ax).map(|(&p, &q)| p - q).collect();
        lhs = lhs + lattice.trapezoid_weight(k) * dot(&diff, h).abs();
    }
    let n_minus_1 = (dim - 1) as i32;
    let rhs = R::lit(2.0)
        * (field.alpha().at(t) * convex_box.volume() + field.sup_bound() * convex_box.diameter().powi(n_minus_1))
        * hn
        * hn;
    Ok((lhs, rhs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpCheck<R> {
    pub normal: Vec<R>,
    pub jump: Vec<R>,
    /// `-<[a], normal>`; OSLC needs it nonnegative.
    pub lambda: R,
    /// `|[a] + lambda normal|`; OSLC needs it zero.
    pub colinearity_error: R,
}

/// Jump `[a] = a_+ - a_-` across a declared interface and its OSLC structure.
pub fn jump_direction_check<R: Real>(field: &CoefficientField<R>, point: &[R], t: R, tol: R) -> Result<JumpCheck<R>> {
    if field.kind() != FieldKind::PiecewiseInterface {
        return Err(Error::invalid("jump check needs a piecewise_interface field"));
    }
    if point.len() != field.dim() {
        return Err(Error::invalid("point dimension mismatch"));
    }
    let (idx, iface) = field
        .interfaces()
        .iter()
        .enumerate()
        .map(|(i, f)| (i, f, f.signed_distance(point).abs()))
        .filter(|(_, _, d)| *d <= tol)
        .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, f, _)| (i, f))
        .ok_or_else(|| Error::invalid("point is not on a declared interface"))?;
    let (plus, minus) = field.one_sided_limits(idx, t, point);
    let normal = iface.normal().to_vec();
    let jump: Vec<R> = plus.iter().zip(&minus).map(|(&p, &m)| p - m).collect();
    let lambda = -dot(&jump, &normal);
    let resid: Vec<R> = jump.iter().zip(&normal).map(|(&j, &n)| j + lambda * n).collect();
    Ok(JumpCheck {
        normal,
        jump,
        lambda,
        colinearity_error: norm(&resid),
    })
}
