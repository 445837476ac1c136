use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::diagnostics::reference_optimum;
use crate::linalg::{dist_sq, norm};
use crate::problem::LossKind;
use crate::prox::prox_component;
use crate::rng::RunRng;
use crate::testutil::{random_problem, random_vec};
use crate::trace::{Cadence, Method, RunStatus};

fn every_step(fstar: f64) -> TraceOptions<'static> {
    TraceOptions::new(fstar).every(Cadence::Iterations(1)).keep_iterates()
}

#[test]
fn zero_correction_is_a_plain_prox_step() {
    let p = random_problem(LossKind::Logistic, 10, 4, 1);
    let mut rng = RunRng::new(1, 0);
    let x = random_vec(&mut rng, 4, 1.0);
    let y = unified_step(&x, &p, 0.7, 3, &[0.0; 4]).unwrap();
    assert_eq!(y, prox_component(&p, 3, 0.7, &x).unwrap());
}

#[test]
fn unified_step_is_an_implicit_gradient_step() {
    for loss in [LossKind::SquaredResidual, LossKind::Logistic] {
        let p = random_problem(loss, 20, 6, 2);
        let mut rng = RunRng::new(2, 0);
        for _ in 0..200 {
            let x = random_vec(&mut rng, 6, 2.0);
            let e = random_vec(&mut rng, 6, 0.5);
            let i = rng.index(20);
            let alpha = 0.01 + 3.0 * rng.uniform01();
            let y = unified_step(&x, &p, alpha, i, &e).unwrap();
            let g = p.component_gradient(i, &y).unwrap();
            let resid: f64 = (0..6).map(|j| (y[j] - (x[j] - alpha * (g[j] - e[j]))).powi(2)).sum();
            assert!(resid.sqrt() <= 1e-8, "{resid}");
        }
    }
}

#[test]
fn tiny_stepsize_leaves_point_unchanged() {
    let p = random_problem(LossKind::Logistic, 5, 3, 3);
    let x = [0.3, -1.0, 2.0];
    let y = unified_step(&x, &p, 1e-12, 1, &[1.0, 1.0, 1.0]).unwrap();
    assert!(dist_sq(&x, &y).sqrt() <= 1e-10);
}

#[test]
fn unified_step_rejects_bad_input() {
    let p = random_problem(LossKind::SquaredResidual, 5, 3, 3);
    assert!(unified_step(&[0.0; 3], &p, 0.0, 0, &[0.0; 3]).is_err());
    assert!(unified_step(&[0.0; 3], &p, 1.0, 5, &[0.0; 3]).is_err());
    assert!(unified_step(&[0.0; 3], &p, 1.0, 0, &[0.0; 2]).is_err());
}

fn scalar_quadratic() -> FiniteSumProblem {
    FiniteSumProblem::new(vec![1.0], 1, 1, vec![0.0], LossKind::SquaredResidual).unwrap()
}

#[test]
fn sppa_on_scalar_quadratic_has_closed_form() {
    let p = scalar_quadratic();
    let alpha = 0.3;
    let cfg = SppaConfig { schedule: StepSchedule::Constant(alpha), iterations: 40 };
    let tr = run_sppa(&p, &cfg, &[5.0], Seed::new(1, 0), &every_step(0.0)).unwrap();
    assert_eq!(tr.records.len(), 41);
    for r in &tr.records {
        let want = 5.0 / libm::pow(1.0 + alpha, r.counter as f64);
        let got = r.x.as_ref().unwrap()[0];
        assert!((got - want).abs() <= 1e-14 * want.abs().max(1e-300) + 1e-300, "{got} {want}");
    }
}

#[test]
fn single_component_runs_are_monotone() {
    let mut rng = RunRng::new(4, 0);
    for loss in [LossKind::SquaredResidual, LossKind::Logistic] {
        let p = random_problem(loss, 1, 5, 4);
        let x0 = random_vec(&mut rng, 5, 3.0);
        let opts = every_step(0.0);
        let mut traces = vec![
            run_sppa(&p, &SppaConfig { schedule: StepSchedule::PolynomialDecay { c: 2.0, exponent: 0.55 }, iterations: 30 }, &x0, Seed::new(4, 0), &opts).unwrap(),
            run_sapa(&p, &SapaConfig { alpha: 1.5, iterations: 30 }, &x0, Seed::new(4, 1), &opts).unwrap(),
        ];
        for mode in [OuterMode::RandomInner, OuterMode::AverageInner, OuterMode::LastInner] {
            let cfg = SvrpConfig { alpha: 1.5, m: 5, outer: 10, outer_mode: mode };
            traces.push(run_svrp(&p, &cfg, &x0, Seed::new(4, 2), &opts).unwrap());
        }
        for tr in &traces {
            for w in tr.records.windows(2) {
                assert!(w[1].fgap <= w[0].fgap + 1e-15, "{:?} {:?}", tr.method, loss);
            }
        }
    }
}

#[test]
fn svrp_accounting_and_flags() {
    let p = random_problem(LossKind::SquaredResidual, 30, 5, 5);
    let x0 = vec![0.0; 5];
    for mode in [OuterMode::RandomInner, OuterMode::AverageInner, OuterMode::LastInner] {
        let cfg = SvrpConfig { alpha: 0.05, m: 17, outer: 6, outer_mode: mode };
        let tr = run_svrp(&p, &cfg, &x0, Seed::new(5, 0), &TraceOptions::new(0.0)).unwrap();
        assert_eq!(tr.records.len(), 7);
        assert_eq!(tr.total_oracle_calls(), 6 * (17 + 30 + 1));
        assert_eq!(tr.uncertified, mode == OuterMode::LastInner);
        assert_eq!(tr.status, RunStatus::Completed);
        let svrg = run_svrg(&p, &cfg, &x0, Seed::new(5, 0), &TraceOptions::new(0.0)).unwrap();
        assert_eq!(svrg.total_oracle_calls(), 6 * (17 + 30 + 1));
    }
}

/// Independent replay of SVRP with averaged outer iterates from the public pieces.
#[test]
fn svrp_matches_manual_replay() {
    let p = random_problem(LossKind::Logistic, 12, 4, 6);
    let x0 = vec![0.1, -0.2, 0.3, 0.0];
    let (alpha, m, outer) = (0.4, 7u64, 3u64);
    for mode in [OuterMode::RandomInner, OuterMode::AverageInner, OuterMode::LastInner] {
        let cfg = SvrpConfig { alpha, m, outer, outer_mode: mode };
        let tr = run_svrp(&p, &cfg, &x0, Seed::new(6, 3), &TraceOptions::new(0.0)).unwrap();
        let mut rng = RunRng::new(6, 3);
        let mut anchor = x0.clone();
        for _ in 0..outer {
            let state = ReducerState::svrp(&p, &anchor);
            let xi = if mode == OuterMode::RandomInner { rng.index(m as usize) } else { 0 };
            let mut inner = vec![anchor.clone()];
            for _ in 0..m {
                let i = rng.index(12);
                let e = state.correction(&p, i);
                let next = unified_step(inner.last().unwrap(), &p, alpha, i, &e).unwrap();
                inner.push(next);
            }
            anchor = match mode {
                OuterMode::RandomInner => inner[xi].clone(),
                OuterMode::AverageInner => {
                    let mut avg = vec![0.0; 4];
                    for x in &inner[..m as usize] {
                        for j in 0..4 {
                            avg[j] += x[j] / m as f64;
                        }
                    }
                    avg
                }
                OuterMode::LastInner => inner[m as usize].clone(),
            };
        }
        for j in 0..4 {
            assert!((anchor[j] - tr.final_x[j]).abs() <= 1e-12, "{mode:?}");
        }
    }
}

#[test]
fn lsvrp_with_p_one_anchors_at_previous_iterate() {
    let p = random_problem(LossKind::SquaredResidual, 15, 4, 7);
    let x0 = vec![1.0; 4];
    let cfg = LsvrpConfig { alpha: 0.2, p: 1.0, iterations: 25 };
    let tr = run_lsvrp(&p, &cfg, &x0, Seed::new(7, 1), &every_step(0.0)).unwrap();
    let mut rng = RunRng::new(7, 1);
    let mut x = x0.clone();
    let mut anchor = x0.clone();
    for k in 0..25usize {
        let state = ReducerState::lsvrp(&p, &anchor, 1.0);
        let i = rng.index(15);
        let next = unified_step(&x, &p, 0.2, i, &state.correction(&p, i)).unwrap();
        assert!(rng.bernoulli(1.0));
        anchor = x;
        x = next;
        let rec = tr.records[k + 1].x.as_ref().unwrap();
        assert!(dist_sq(rec, &x).sqrt() <= 1e-12);
    }
    // n for the initial full gradient, then 1 + n per step.
    assert_eq!(tr.total_oracle_calls(), 15 + 25 * 16);
}

#[test]
fn lsvrp_matches_manual_replay() {
    let p = random_problem(LossKind::Logistic, 10, 3, 8);
    let x0 = vec![0.5, 0.5, -0.5];
    let cfg = LsvrpConfig { alpha: 0.3, p: 0.3, iterations: 60 };
    let tr = run_lsvrp(&p, &cfg, &x0, Seed::new(8, 2), &TraceOptions::new(0.0)).unwrap();
    let mut rng = RunRng::new(8, 2);
    let mut x = x0.clone();
    let mut anchor = x0.clone();
    let mut calls = 10u64;
    for _ in 0..60 {
        let state = ReducerState::lsvrp(&p, &anchor, 0.3);
        let i = rng.index(10);
        let next = unified_step(&x, &p, 0.3, i, &state.correction(&p, i)).unwrap();
        calls += 1;
        if rng.bernoulli(0.3) {
            anchor = x.clone();
            calls += 10;
        }
        x = next;
    }
    assert!(dist_sq(&x, &tr.final_x).sqrt() <= 1e-12);
    assert_eq!(tr.total_oracle_calls(), calls);
}

#[test]
fn sapa_matches_manual_replay() {
    let p = random_problem(LossKind::Logistic, 9, 3, 9);
    let x0 = vec![0.2, -0.1, 0.4];
    let cfg = SapaConfig { alpha: 0.8, iterations: 50 };
    let tr = run_sapa(&p, &cfg, &x0, Seed::new(9, 4), &TraceOptions::new(0.0)).unwrap();
    let mut rng = RunRng::new(9, 4);
    let mut phis = vec![x0.clone(); 9];
    let mut x = x0.clone();
    for _ in 0..50 {
        let state = ReducerState::sapa_from_points(&p, &phis);
        let i = rng.index(9);
        let next = unified_step(&x, &p, 0.8, i, &state.correction(&p, i)).unwrap();
        phis[i] = x;
        x = next;
    }
    assert!(dist_sq(&x, &tr.final_x).sqrt() <= 1e-12);
    assert_eq!(tr.total_oracle_calls(), 9 + 50);
}

#[test]
fn saga_matches_manual_replay() {
    let p = random_problem(LossKind::SquaredResidual, 9, 3, 10);
    let x0 = vec![0.2, -0.1, 0.4];
    let cfg = SapaConfig { alpha: 0.1, iterations: 50 };
    let tr = run_saga(&p, &cfg, &x0, Seed::new(10, 4), &TraceOptions::new(0.0)).unwrap();
    let mut rng = RunRng::new(10, 4);
    let mut phis = vec![x0.clone(); 9];
    let mut x = x0.clone();
    for _ in 0..50 {
        let state = ReducerState::sapa_from_points(&p, &phis);
        let i = rng.index(9);
        let e = state.correction(&p, i);
        let g = p.component_gradient(i, &x).unwrap();
        let next: Vec<f64> = (0..3).map(|j| x[j] - 0.1 * (g[j] - e[j])).collect();
        phis[i] = x;
        x = next;
    }
    assert!(dist_sq(&x, &tr.final_x).sqrt() <= 1e-12);
}

#[test]
fn sapa_table_changes_one_slot_and_sum_stays_exact() {
    let p = random_problem(LossKind::SquaredResidual, 40, 6, 11);
    let mut rng = RunRng::new(11, 0);
    let mut state = ReducerState::sapa(&p, &random_vec(&mut rng, 6, 1.0));
    for step in 0..100_000u64 {
        let i = rng.index(40);
        let x = random_vec(&mut rng, 6, 1.0);
        let before = state.clone();
        let g = p.gradient_scale(i, &x);
        state.replace_table_row_scaled(i, g, p.row(i));
        if step < 50 {
            let changed = (0..40).filter(|&j| before.table_row(j) != state.table_row(j)).count();
            assert!(changed <= 1);
        }
    }
    assert!(state.aggregate_error(&p) <= 1e-10, "{}", state.aggregate_error(&p));
}

#[test]
fn explicit_and_implicit_agree_for_small_steps() {
    let p = random_problem(LossKind::Logistic, 8, 4, 12);
    let x = vec![0.3, 0.1, -0.7, 1.2];
    for i in 0..8 {
        let y = prox_component(&p, i, 1e-8, &x).unwrap();
        let mut z = x.clone();
        assert!(explicit_step_in_place(&p, 1e-8, i, None, &mut z));
        assert!(dist_sq(&y, &z).sqrt() <= 1e-12);
        let mut w = x.clone();
        explicit_step_in_place(&p, 1e-8, i, Some(&[0.0; 4]), &mut w);
        assert_eq!(w, z);
    }
}

#[test]
fn gradient_descent_special_case_rate() {
    // n = 1: SGD is gradient descent on ½(⟨a,x⟩ − b)², contracting the
    // distance to the solution set by exactly 1 − α‖a‖² per step.
    let a = vec![1.0, 2.0, -0.5];
    let p = FiniteSumProblem::new(a.clone(), 1, 3, vec![0.7], LossKind::SquaredResidual).unwrap();
    let r = reference_optimum(&p, 1e-12).unwrap();
    let set = r.solution_set.clone().unwrap();
    let mu = 1.0 + 4.0 + 0.25;
    let alpha = 0.05;
    let opts = TraceOptions::new(r.fstar).with_solution(&set).every(Cadence::Iterations(1));
    let cfg = SgdConfig { schedule: StepSchedule::Constant(alpha), iterations: 100 };
    let tr = run_sgd(&p, &cfg, &[3.0, -1.0, 2.0], Seed::new(0, 0), &opts).unwrap();
    let d0 = tr.records[0].dist2.unwrap();
    let d100 = tr.records[100].dist2.unwrap();
    let measured = libm::pow(d100 / d0, 1.0 / 200.0);
    let want = 1.0 - alpha * mu;
    assert!((measured - want).abs() <= 0.01 * want, "{measured} {want}");
}

#[test]
fn divergence_is_flagged() {
    let p = random_problem(LossKind::SquaredResidual, 20, 5, 13);
    let l = p.smoothness_constant();
    let x0 = vec![1.0; 5];
    let cfg = SapaConfig { alpha: 50.0 / l, iterations: 100_000 };
    let tr = run_saga(&p, &cfg, &x0, Seed::new(13, 0), &TraceOptions::new(0.0)).unwrap();
    assert_eq!(tr.status, RunStatus::Diverged);
    assert!(tr.records.len() < 100_000 / 20);
    let sppa = SppaConfig { schedule: StepSchedule::Constant(50.0 / l), iterations: 10_000 };
    let tr = run_sppa(&p, &sppa, &x0, Seed::new(13, 0), &TraceOptions::new(0.0)).unwrap();
    assert_eq!(tr.status, RunStatus::Completed);
}

#[test]
fn target_and_cap_statuses() {
    let p = random_problem(LossKind::SquaredResidual, 20, 5, 14);
    let r = reference_optimum(&p, 1e-12).unwrap();
    let alpha = 0.2 / p.smoothness_constant();
    let cfg = SapaConfig { alpha, iterations: 200_000 };
    let opts = TraceOptions::new(r.fstar).stop_at(1e-6);
    let tr = run_sapa(&p, &cfg, &[0.0; 5], Seed::new(14, 0), &opts).unwrap();
    assert_eq!(tr.status, RunStatus::TargetReached);
    assert!(tr.final_gap().unwrap() <= 1e-6);
    let short = SapaConfig { alpha, iterations: 3 };
    let tr = run_sapa(&p, &short, &[0.0; 5], Seed::new(14, 0), &opts).unwrap();
    assert_eq!(tr.status, RunStatus::CapReached);
}

#[test]
fn oracle_cadence_records_on_crossings() {
    let p = random_problem(LossKind::SquaredResidual, 10, 3, 15);
    let opts = TraceOptions::new(0.0).every(Cadence::OracleCalls(7));
    let cfg = SapaConfig { alpha: 0.1, iterations: 50 };
    let tr = run_sapa(&p, &cfg, &[0.0; 3], Seed::new(15, 0), &opts).unwrap();
    let calls: Vec<u64> = tr.records.iter().map(|r| r.oracle_calls).collect();
    assert!(calls.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(*calls.last().unwrap(), 60);
    assert_eq!(calls[0], 10);
}

#[test]
fn method_spec_dispatch() {
    let p = random_problem(LossKind::SquaredResidual, 10, 3, 16);
    let specs = [
        MethodSpec::Sppa(SppaConfig { schedule: StepSchedule::Constant(0.1), iterations: 10 }),
        MethodSpec::Svrp(SvrpConfig { alpha: 0.1, m: 5, outer: 2, outer_mode: OuterMode::AverageInner }),
        MethodSpec::Lsvrp(LsvrpConfig { alpha: 0.1, p: 0.5, iterations: 10 }),
        MethodSpec::Sapa(SapaConfig { alpha: 0.1, iterations: 10 }),
        MethodSpec::Sgd(SgdConfig { schedule: StepSchedule::Constant(0.1), iterations: 10 }),
        MethodSpec::Svrg(SvrpConfig { alpha: 0.1, m: 5, outer: 2, outer_mode: OuterMode::AverageInner }),
        MethodSpec::Saga(SapaConfig { alpha: 0.1, iterations: 10 }),
    ];
    for (spec, method) in specs.iter().zip(Method::ALL) {
        assert_eq!(spec.method(), method);
        let tr = spec.run(&p, &[0.0; 3], Seed::new(1, 1), &TraceOptions::new(0.0)).unwrap();
        assert_eq!(tr.method, method);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let p = random_problem(LossKind::SquaredResidual, 10, 3, 17);
    let o = TraceOptions::new(0.0);
    let x0 = [0.0; 3];
    assert!(run_sppa(&p, &SppaConfig { schedule: StepSchedule::Constant(0.1), iterations: 0 }, &x0, Seed::new(0, 0), &o).is_err());
    assert!(run_svrp(&p, &SvrpConfig { alpha: 0.1, m: 0, outer: 1, outer_mode: OuterMode::RandomInner }, &x0, Seed::new(0, 0), &o).is_err());
    assert!(run_lsvrp(&p, &LsvrpConfig { alpha: 0.1, p: 0.0, iterations: 3 }, &x0, Seed::new(0, 0), &o).is_err());
    assert!(run_sapa(&p, &SapaConfig { alpha: -1.0, iterations: 3 }, &x0, Seed::new(0, 0), &o).is_err());
    assert!(run_sapa(&p, &SapaConfig { alpha: 0.1, iterations: 3 }, &[f64::NAN; 3], Seed::new(0, 0), &o).is_err());
}

fn arb_seed() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_are_bit_reproducible(seed in arb_seed(), run in 0u64..1000, which in 0usize..7) {
        let p = random_problem(LossKind::Logistic, 12, 4, seed);
        let x0 = [0.1, 0.2, -0.3, 0.0];
        let spec = match which {
            0 => MethodSpec::Sppa(SppaConfig { schedule: StepSchedule::PolynomialDecay { c: 1.0, exponent: 0.55 }, iterations: 40 }),
            1 => MethodSpec::Svrp(SvrpConfig { alpha: 0.3, m: 6, outer: 4, outer_mode: OuterMode::RandomInner }),
            2 => MethodSpec::Lsvrp(LsvrpConfig { alpha: 0.3, p: 0.2, iterations: 40 }),
            3 => MethodSpec::Sapa(SapaConfig { alpha: 0.3, iterations: 40 }),
            4 => MethodSpec::Sgd(SgdConfig { schedule: StepSchedule::Constant(0.3), iterations: 40 }),
            5 => MethodSpec::Svrg(SvrpConfig { alpha: 0.3, m: 6, outer: 4, outer_mode: OuterMode::LastInner }),
            _ => MethodSpec::Saga(SapaConfig { alpha: 0.3, iterations: 40 }),
        };
        let opts = TraceOptions::new(0.0).every(Cadence::Iterations(3)).keep_iterates();
        let a = spec.run(&p, &x0, Seed::new(seed, run), &opts).unwrap();
        let b = spec.run(&p, &x0, Seed::new(seed, run), &opts).unwrap();
        prop_assert!(a.same_outcome(&b));
        prop_assert!(a.records.windows(2).all(|w| w[0].oracle_calls < w[1].oracle_calls));
    }

    #[test]
    fn corrections_average_to_zero(seed in arb_seed(), kind in 0usize..3) {
        let p = random_problem(LossKind::SquaredResidual, 25, 5, seed);
        let mut rng = RunRng::new(seed, 9);
        let state = match kind {
            0 => ReducerState::svrp(&p, &random_vec(&mut rng, 5, 3.0)),
            1 => ReducerState::lsvrp(&p, &random_vec(&mut rng, 5, 3.0), 0.1),
            _ => {
                let phis: Vec<Vec<f64>> = (0..25).map(|_| random_vec(&mut rng, 5, 3.0)).collect();
                ReducerState::sapa_from_points(&p, &phis)
            }
        };
        let (res, scale) = crate::diagnostics::unbiased_residual(&p, &state);
        prop_assert!(res <= 1e-12 * scale, "{} {}", res, scale);
        prop_assert!(norm(&state.mean_correction(&p)) == res);
    }

    #[test]
    fn gradient_table_sum_is_consistent(seed in arb_seed(), steps in 1usize..400) {
        let p = random_problem(LossKind::Logistic, 15, 4, seed);
        let mut rng = RunRng::new(seed, 3);
        let mut state = ReducerState::sapa(&p, &random_vec(&mut rng, 4, 1.0));
        for _ in 0..steps {
            let i = rng.index(15);
            let x = random_vec(&mut rng, 4, 2.0);
            state.replace_table_row_scaled(i, p.gradient_scale(i, &x), p.row(i));
        }
        prop_assert!(state.aggregate_error(&p) <= 1e-12);
    }
}
