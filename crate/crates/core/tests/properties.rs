use proptest::prelude::*;
use proxvr_core::diagnostics::reference_optimum;
use proxvr_core::methods::{run_sapa, run_svrp, unified_step, OuterMode, SapaConfig, Seed, SvrpConfig};
use proxvr_core::prox::{prox_component, DEFAULT_PROX_TOL};
use proxvr_core::rates::{lsvrp_rate_q, sapa_rate_q, svrp_rate_q};
use proxvr_core::synthetic::{generate_instance, GeneratorConfig, SyntheticInstance};
use proxvr_core::trace::TraceOptions;
use proxvr_core::{FiniteSumProblem, LossKind};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn instance(n: usize, d: usize, logistic: bool, seed: u64) -> SyntheticInstance {
    let loss = if logistic { LossKind::Logistic } else { LossKind::SquaredResidual };
    generate_instance(&GeneratorConfig::new(n, d, 5.0, loss, seed)).unwrap()
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

/// A problem, a component index and two points in its domain.
fn setup() -> impl Strategy<Value = (FiniteSumProblem, usize, Vec<f64>, Vec<f64>)> {
    (2usize..12, 2usize..6, any::<bool>(), 0u64..1000).prop_flat_map(|(n, d, logistic, seed)| {
        (0..n, point(d), point(d)).prop_map(move |(i, x, y)| (instance(n, d, logistic, seed).problem, i, x, y))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn component_gradients_are_l_lipschitz((p, i, x, y) in setup()) {
        let l = p.smoothness_constant();
        let g = sub(&p.component_gradient(i, &x).unwrap(), &p.component_gradient(i, &y).unwrap());
        prop_assert!(norm(&g) <= l * norm(&sub(&x, &y)) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn full_value_is_convex_on_segments((p, _i, x, y) in setup(), t in 0.0..1.0f64) {
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let (fx, fy) = (p.full_value(&x).unwrap(), p.full_value(&y).unwrap());
        let scale = 1.0 + fx.abs() + fy.abs();
        prop_assert!(p.full_value(&z).unwrap() <= t * fx + (1.0 - t) * fy + 1e-12 * scale);
    }

    #[test]
    fn prox_satisfies_its_optimality_condition((p, i, x, _y) in setup(), log_alpha in -4.0..3.0f64) {
        let alpha = 10f64.powf(log_alpha);
        let y = prox_component(&p, i, alpha, &x).unwrap();
        let implicit: Vec<f64> = sub(&x, &y).iter().map(|v| v / alpha).collect();
        let r = norm(&sub(&implicit, &p.component_gradient(i, &y).unwrap()));
        prop_assert!(r <= 10.0 * DEFAULT_PROX_TOL * (1.0 + p.row_norm_sq(i)), "residual {r}");
    }

    #[test]
    fn prox_is_firmly_nonexpansive((p, i, x, y) in setup(), log_alpha in -3.0..2.0f64) {
        let alpha = 10f64.powf(log_alpha);
        let dp = sub(&prox_component(&p, i, alpha, &x).unwrap(), &prox_component(&p, i, alpha, &y).unwrap());
        let dx = sub(&x, &y);
        prop_assert!(dot(&dp, &dp) <= dot(&dp, &dx) + 1e-10 * (1.0 + dot(&dx, &dx)));
        prop_assert!(norm(&dp) <= norm(&dx) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn unified_step_is_implicit((p, i, x, e) in setup(), log_alpha in -3.0..1.0f64) {
        let alpha = 10f64.powf(log_alpha);
        let next = unified_step(&x, &p, alpha, i, &e).unwrap();
        let g = p.component_gradient(i, &next).unwrap();
        let rebuilt: Vec<f64> = (0..x.len()).map(|j| x[j] - alpha * (g[j] - e[j])).collect();
        prop_assert!(norm(&sub(&rebuilt, &next)) <= 1e-8 * (1.0 + norm(&x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generator_is_a_pure_function(n in 2usize..20, d in 2usize..8, logistic in any::<bool>(), seed in any::<u64>()) {
        let a = instance(n, d, logistic, seed);
        let b = instance(n, d, logistic, seed);
        prop_assert_eq!(a.problem.design(), b.problem.design());
        prop_assert_eq!(a.problem.labels(), b.problem.labels());
        prop_assert_eq!(a.x_true, b.x_true);
    }

    #[test]
    fn least_squares_has_quadratic_growth(n in 4usize..20, d in 2usize..8, seed in 0u64..1000, x in point(8)) {
        let inst = instance(n, d, false, seed);
        let p = &inst.problem;
        let r = reference_optimum(p, 1e-10).unwrap();
        let set = r.solution_set.unwrap();
        let x = &x[..d];
        let f = p.full_value(x).unwrap();
        prop_assert!(inst.meta.mu / 2.0 * set.distance_sq(x) <= f - r.fstar + 1e-10 * (1.0 + f.abs()));
    }

    #[test]
    fn valid_rates_contract(mu in 0.01..1.0f64, ratio in 1.0..50.0f64, frac in 0.0..1.0f64, m in 1u64..100_000, n in 2usize..500, p in 0.001..1.0f64) {
        let l = mu * ratio;
        let alpha = frac / l;
        let checks = [
            svrp_rate_q(mu, l, alpha, m),
            lsvrp_rate_q(mu, l, alpha, p, 4.0 / p),
            sapa_rate_q(mu, l, alpha, n, 4.0 * n as f64),
        ];
        for rc in checks.into_iter().flatten() {
            if rc.valid {
                prop_assert!(rc.q > 0.0 && rc.q < 1.0, "{rc:?}");
            }
        }
    }

    #[test]
    fn traces_are_well_formed(n in 3usize..15, d in 2usize..6, logistic in any::<bool>(), seed in 0u64..500, m in 1u64..30, outer in 1u64..5, frac in 0.01..0.5f64) {
        let inst = instance(n, d, logistic, seed);
        let p = &inst.problem;
        let fstar = reference_optimum(p, 1e-10).unwrap().fstar;
        let alpha = frac / p.smoothness_constant();
        let x0 = vec![0.0; d];
        let opts = TraceOptions::new(fstar);
        let svrp = run_svrp(p, &SvrpConfig { alpha, m, outer, outer_mode: OuterMode::RandomInner }, &x0, Seed::new(seed, 1), &opts).unwrap();
        prop_assert_eq!(svrp.records.last().unwrap().oracle_calls, outer * (m + n as u64 + 1));
        let sapa = run_sapa(p, &SapaConfig { alpha, iterations: m * outer }, &x0, Seed::new(seed, 2), &opts).unwrap();
        let scale = 1.0 + fstar.abs();
        for t in [&svrp, &sapa] {
            prop_assert!(t.records.windows(2).all(|w| w[1].oracle_calls > w[0].oracle_calls));
            prop_assert!(t.records.iter().all(|r| r.fgap >= -1e-10 * scale));
        }
    }
}
