//! The fixed family of compactly supported test functions used by every
//! weak-form check: tensor bumps `prod_i (1 - ((x_i - c_i)/r_i)^2)^3_+`.

use serde::Serialize;

use crate::grid::{BoxRegion, SpaceTimeGrid};
use crate::quadrature::{bump_profile, bump_profile_derivative};
use crate::scalar::Real;

/// Tensor bump in space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpTest<R> {
    pub center: Vec<R>,
    pub radius: Vec<R>,
}

impl<R: Real> BumpTest<R> {
    pub fn new(center: Vec<R>, radius: Vec<R>) -> Self {
        assert_eq!(center.len(), radius.len());
        Self { center, radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, x: &[R]) -> R {
        let mut v = R::one();
        for i in 0..self.dim() {
            v = v * bump_profile((x[i] - self.center[i]) / self.radius[i]);
            if v == R::zero() {
                break;
            }
        }
        v
    }

    /// Value and gradient at `x`.
    pub fn eval_grad(&self, x: &[R], grad: &mut [R]) -> R {
        let n = self.dim();
        let mut f = [R::zero(); 8];
        let mut d = [R::zero(); 8];
        for i in 0..n {
            let s = (x[i] - self.center[i]) / self.radius[i];
            f[i] = bump_profile(s);
            d[i] = bump_profile_derivative(s) / self.radius[i];
        }
        let mut value = R::one();
        for i in 0..n {
            value = value * f[i];
            let mut g = d[i];
            for (j, &fj) in f.iter().enumerate().take(n) {
                if j != i {
                    g = g * fj;
                }
            }
            grad[i] = g;
        }
        value
    }

    pub fn support(&self) -> BoxRegion<R> {
        let lo = (0..self.dim()).map(|i| self.center[i] - self.radius[i]).collect();
        let hi = (0..self.dim()).map(|i| self.center[i] + self.radius[i]).collect();
        BoxRegion { lo, hi }
    }
}

/// Product of a one-dimensional bump in time and a spatial bump.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpaceTimeTest<R> {
    pub t_center: R,
    pub t_radius: R,
    pub space: BumpTest<R>,
}

impl<R: Real> SpaceTimeTest<R> {
    /// Value, time derivative, and spatial gradient at `(t, x)`.
    pub fn eval_grad(&self, t: R, x: &[R], grad: &mut [R]) -> (R, R) {
        let s = (t - self.t_center) / self.t_radius;
        let ft = bump_profile(s);
        let dft = bump_profile_derivative(s) / self.t_radius;
        if ft == R::zero() && dft == R::zero() {
            grad.iter_mut().for_each(|g| *g = R::zero());
            return (R::zero(), R::zero());
        }
        let fx = self.space.eval_grad(x, grad);
        grad.iter_mut().for_each(|g| *g = *g * ft);
        (ft * fx, dft * fx)
    }

    pub fn time_support(&self) -> (R, R) {
        (self.t_center - self.t_radius, self.t_center + self.t_radius)
    }
}

fn fractions<R: Real>() -> ([R; 3], [R; 2]) {
    ([R::lit(0.25), R::lit(0.5), R::lit(0.75)], [R::lit(0.25), R::lit(0.5)])
}

/// Bumps centred on the `3^N` lattice `lo + width * {1/4, 1/2, 3/4}` with
/// radii `{1/4, 1/2} * width`, keeping those supported inside `region`.
pub fn spatial_tests<R: Real>(region: &BoxRegion<R>) -> Vec<BumpTest<R>> {
    let n = region.dim();
    let (centers, radii) = fractions::<R>();
    let width: Vec<R> = (0..n).map(|i| region.hi[i] - region.lo[i]).collect();
    let mut out = Vec::new();
    let tol = R::lit(1e-12);
    for &rf in &radii {
        let count = 3usize.pow(n as u32);
        for code in 0..count {
            let center: Vec<R> = (0..n)
                .map(|i| {
                    let digit = (code / 3usize.pow((n - 1 - i) as u32)) % 3;
                    region.lo[i] + width[i] * centers[digit]
                })
                .collect();
            let radius: Vec<R> = width.iter().map(|&w| w * rf).collect();
            let test = BumpTest::new(center, radius);
            let sup = test.support();
            let inside = (0..n)
                .all(|i| sup.lo[i] >= region.lo[i] - tol * width[i] && sup.hi[i] <= region.hi[i] + tol * width[i]);
            if inside {
                out.push(test);
            }
        }
    }
    out
}

/// Time bumps built the same way on `[t0 + dt, T - dt]`, times the spatial
/// family on the grid's box of interest.
pub fn space_time_tests<R: Real>(grid: &SpaceTimeGrid<R>) -> Vec<SpaceTimeTest<R>> {
    let a = grid.t0() + grid.dt();
    let b = grid.t_final() - grid.dt();
    let interval = BoxRegion {
        lo: vec![a],
        hi: vec![b],
    };
    let times = spatial_tests(&interval);
    let spaces = spatial_tests(grid.inner());
    let mut out = Vec::with_capacity(times.len() * spaces.len());
    for tt in &times {
        for sp in &spaces {
            out.push(SpaceTimeTest {
                t_center: tt.center[0],
                t_radius: tt.radius[0],
                space: sp.clone(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_sizes() {
        let b = BoxRegion::cube(2, -2.0f64, 2.0).unwrap();
        let tests = spatial_tests(&b);
        assert_eq!(tests.len(), 10);
        for t in &tests {
            assert!(b.contains_box(&t.support()));
        }
        let one = BoxRegion::cube(1, 0.0f64, 1.0).unwrap();
        assert_eq!(spatial_tests(&one).len(), 4);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let t = BumpTest::new(vec![0.1f64, -0.2], vec![0.7, 0.4]);
        let x = [0.3, -0.05];
        let mut g = [0.0; 2];
        t.eval_grad(&x, &mut g);
        let h = 1e-6;
        for i in 0..2 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            let fd = (t.eval(&p) - t.eval(&m)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn space_time_family_avoids_end_samples() {
        let g = SpaceTimeGrid::new(BoxRegion::cube(1, -1.0f64, 1.0).unwrap(), vec![9], 0.0, 1.0, 11, 0.0).unwrap();
        let tests = space_time_tests(&g);
        assert_eq!(tests.len(), 16);
        for t in &tests {
            let (a, b) = t.time_support();
            assert!(a >= 0.1 - 1e-12 && b <= 0.9 + 1e-12);
        }
    }
}
