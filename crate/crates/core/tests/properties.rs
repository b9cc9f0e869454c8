use oslc_transport::fields::{
    estimate_oslc, jump_direction_check, library, mollify, CoefficientField, OslcModulus, PairSampler, PlanarInterface,
};
use oslc_transport::grid::{BoxRegion, NodeLattice};
use oslc_transport::jacobian::SampledMap;
use oslc_transport::oracles::{linear_field_oracle, sgn_flow, sgn_jacobian, SgnExampleSpec};
use oslc_transport::transport::TimeTrace;
use proptest::prelude::*;

fn small_sampler(seed: u64) -> PairSampler<f64> {
    let mut s = PairSampler::standard(BoxRegion::cube(2, -2.0, 2.0).unwrap(), 4.0 / 128.0, seed);
    s.random_pairs = 256;
    s.straddle_points = 9;
    s
}

fn lambda() -> impl Strategy<Value = f64> {
    prop_oneof![Just(-1.0), Just(0.0), Just(1.0), Just(3.0), -4.0f64..4.0]
}

/// Ordered times `t <= r <= s` in `[0, 1]`.
fn triple() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c)| {
        let mut v = [a, b, c];
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        (v[0], v[1], v[2])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn oracle_flow_is_identity_at_coincident_times(lam in lambda(), t in 0.0f64..1.0, x in prop::array::uniform2(-2.0f64..2.0)) {
        let spec = SgnExampleSpec::new(1.0).with_lambda(lam);
        prop_assert_eq!(sgn_flow(&spec, t, t, &x).unwrap(), x);
    }

    #[test]
    fn oracle_flow_composes(lam in lambda(), (t, r, s) in triple(), x in prop::array::uniform2(-2.0f64..2.0)) {
        let spec = SgnExampleSpec::new(1.0).with_lambda(lam);
        let direct = sgn_flow(&spec, s, t, &x).unwrap();
        let mid = sgn_flow(&spec, r, t, &x).unwrap();
        let composed = sgn_flow(&spec, s, r, &mid).unwrap();
        for i in 0..2 {
            prop_assert!((direct[i] - composed[i]).abs() <= 1e-12, "{:?} vs {:?}", direct, composed);
        }
    }

    #[test]
    fn oracle_jacobian_is_independent_of_lambda(lam in lambda(), t in 0.0f64..0.95, x in prop::array::uniform2(-1.9f64..1.9)) {
        let d = 1e-3;
        prop_assume!((x[0].abs() - (1.0 - t)).abs() > 3.0 * d && x[0].abs() > 3.0 * d);
        let spec = SgnExampleSpec::new(1.0).with_lambda(lam);
        let f = |p: [f64; 2]| sgn_flow(&spec, 1.0, t, &p).unwrap();
        let mut grad = [[0.0; 2]; 2];
        for axis in 0..2 {
            let (mut a, mut b) = (x, x);
            a[axis] += d;
            b[axis] -= d;
            let (fa, fb) = (f(a), f(b));
            for c in 0..2 {
                grad[c][axis] = (fa[c] - fb[c]) / (2.0 * d);
            }
        }
        let det = grad[0][0] * grad[1][1] - grad[0][1] * grad[1][0];
        prop_assert!((det - sgn_jacobian(t, &x, 1.0)).abs() <= 1e-9, "det {}", det);
    }

    #[test]
    fn linear_oracle_follows_liouville(m in prop::array::uniform4(-1.0f64..1.0), lag in 0.0f64..1.0, x in prop::array::uniform2(-2.0f64..2.0)) {
        let o = linear_field_oracle(&m, lag, 0.0, &x).unwrap();
        prop_assert!((o.jacobian - ((m[0] + m[3]) * lag).exp()).abs() <= 1e-12 * o.jacobian);
        // X(s, 0) = X(s, s/2) X(s/2, 0) for the autonomous field
        let half = linear_field_oracle(&m, 0.5 * lag, 0.0, &x).unwrap();
        let twice = linear_field_oracle(&m, 0.5 * lag, 0.0, &half.point).unwrap();
        for i in 0..2 {
            prop_assert!((twice.point[i] - o.point[i]).abs() <= 1e-12 * (1.0 + o.point[i].abs()));
        }
    }

    #[test]
    fn multilinear_interpolation_reproduces_affine_data(c in prop::array::uniform3(-3.0f64..3.0), x in prop::array::uniform2(-1.0f64..1.0), n in 3usize..20) {
        let lat = NodeLattice::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![n, n + 2]).unwrap();
        let values: Vec<f64> = (0..lat.len())
            .map(|k| {
                let p = lat.coord_vec(k);
                c[0] + c[1] * p[0] + c[2] * p[1]
            })
            .collect();
        let mut out = [0.0];
        prop_assert!(!lat.interpolate(&values, 1, &x, &mut out), "interior point reported as clamped");
        prop_assert!((out[0] - (c[0] + c[1] * x[0] + c[2] * x[1])).abs() <= 1e-12);
    }

    #[test]
    fn affine_maps_have_exact_determinant(m in prop::array::uniform4(-2.0f64..2.0), k in 0usize..81) {
        let lat = NodeLattice::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![9, 9]).unwrap();
        let map = SampledMap::from_fn(&lat, |x, out| {
            out[0] = m[0] * x[0] + m[1] * x[1] + 0.5;
            out[1] = m[2] * x[0] + m[3] * x[1] - 0.25;
        });
        let det = m[0] * m[3] - m[1] * m[2];
        prop_assert!((map.det_at(k) - det).abs() <= 1e-12);
    }

    #[test]
    fn trace_statistics_are_consistent(values in prop::collection::vec(0.1f64..10.0, 2..40)) {
        let times = (0..values.len()).map(|i| i as f64).collect();
        let trace = TimeTrace { times, values: values.clone() };
        prop_assert!(trace.drift() >= 0.0 && trace.relative_spread() >= 0.0);
        prop_assert!(trace.max_relative_increase() >= 0.0);
        let mut sorted = values;
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let times = (0..sorted.len()).map(|i| i as f64).collect();
        prop_assert_eq!(TimeTrace { times, values: sorted }.max_relative_increase(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mollification_keeps_the_oslc_modulus(eps in 0.005f64..0.1, n in prop_oneof![Just(0.0), 1.0f64..16.0], seed in 0u64..1000) {
        let field = if n == 0.0 { library::sgn_example::<f64>() } else { library::oscillatory_sgn(n) };
        let sampler = small_sampler(seed);
        let base = estimate_oslc(&field, 0.0, &sampler).unwrap().alpha_hat;
        let smooth = estimate_oslc(&mollify(&field, eps).unwrap(), 0.0, &sampler).unwrap().alpha_hat;
        prop_assert!(smooth <= base + 1e-9, "{} > {}", smooth, base);
    }

    #[test]
    fn compressive_jumps_pass_both_checks(angle in 0.0f64..std::f64::consts::TAU, jump in 0.0f64..3.0, c in prop::array::uniform2(-1.0f64..1.0), offset in -0.5f64..0.5) {
        let normal = vec![angle.cos(), angle.sin()];
        let plus = vec![c[0] - 0.5 * jump * normal[0], c[1] - 0.5 * jump * normal[1]];
        let minus = vec![c[0] + 0.5 * jump * normal[0], c[1] + 0.5 * jump * normal[1]];
        let iface = PlanarInterface::new(normal.clone(), offset, plus, minus).unwrap();
        let sup = c[0].hypot(c[1]) + jump;
        let field = CoefficientField::piecewise(2, None, vec![iface], sup, OslcModulus::Constant(0.0)).unwrap();
        let point = [offset * normal[0], offset * normal[1]];
        let check = jump_direction_check(&field, &point, 0.0, 1e-9).unwrap();
        prop_assert!(check.lambda >= -1e-6 && (check.lambda - jump).abs() <= 1e-12);
        prop_assert!(check.colinearity_error <= 1e-6);
        let report = estimate_oslc(&field, 0.0, &small_sampler(3)).unwrap();
        prop_assert!(!report.violated && report.alpha_hat <= 1e-12, "alpha_hat {}", report.alpha_hat);
    }
}
