use proptest::prelude::*;
use sched_core::analysis::{
    bound_for, feasibility_gap, gradient_dispersion, residual, solve_oracle, step_bound,
};
use sched_core::costs::{
    sample_academic_costs, sample_cpu_problem, CompositeCost, CpuInstance, HardBoxPenalty,
    LocalCost, Penalty, Problem,
};
use sched_core::graph::{generate_er, is_connected, spectral_bounds, SwitchingNetwork, Topology};
use sched_core::nonlinearity::SectorMap;
use sched_core::protocol::{DelayModel, Engine};

fn connected_er(n: usize, p: f64, seed: u64) -> Topology {
    (seed..)
        .map(|s| generate_er(n, p, 1.0, s).unwrap())
        .find(is_connected)
        .unwrap()
}

/// Exhaustive search over the feasible line (n = 2) or plane (n = 3).
fn brute_force(p: &Problem, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let total = p.total_demand();
    let steps = ((hi - lo) / step).round() as i64;
    let at = |k: i64| lo + k as f64 * step;
    let mut best = (f64::INFINITY, Vec::new());
    match p.n() {
        2 => {
            for a in 0..=steps {
                let x = vec![at(a), total - at(a)];
                let v = p.value(&x);
                if v < best.0 {
                    best = (v, x);
                }
            }
        }
        3 => {
            for a in 0..=steps {
                for b in 0..=steps {
                    let x = vec![at(a), at(b), total - at(a) - at(b)];
                    let v = p.value(&x);
                    if v < best.0 {
                        best = (v, x);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    best.1
}

fn small_problem(n: usize, coeffs: &[(f64, f64, bool)], total: f64) -> Problem {
    let costs = coeffs[..n]
        .iter()
        .map(|&(g, d, penalized)| {
            let c = CompositeCost::quadratic(g, d, 0.0).unwrap();
            if penalized {
                c.with_penalty(Penalty::Hard(HardBoxPenalty::new(-0.5, 0.5, 2.0, 2).unwrap()))
            } else {
                c
            }
        })
        .collect();
    Problem::new(costs, vec![total / n as f64; n]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_matches_grid_search(
        n in 2usize..4,
        coeffs in prop::collection::vec((0.3f64..2.0, -1.5f64..1.5, any::<bool>()), 3),
        total in -1.0f64..1.0,
    ) {
        let p = small_problem(n, &coeffs, total);
        let opt = solve_oracle(&p, 0.0).unwrap();
        prop_assume!(opt.x_star.iter().all(|v| v.abs() < 1.9));
        let grid = brute_force(&p, -2.0, 2.0, 1e-3);
        for (a, b) in opt.x_star.iter().zip(&grid) {
            prop_assert!((a - b).abs() <= 2e-3, "{:?} vs {:?}", opt.x_star, grid);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_is_feasible_and_stationary(seed in 0u64..1_000_000, n in 2usize..60, cpu: bool) {
        let p = if cpu {
            sample_cpu_problem(n, seed, &CpuInstance { total_demand: 25.0 * n as f64, ..CpuInstance::default() }).unwrap()
        } else {
            sample_academic_costs(n, seed).unwrap()
        };
        let opt = solve_oracle(&p, 0.0).unwrap();
        let total = p.total_demand();
        prop_assert!(feasibility_gap(&p, &opt.x_star) <= 1e-10 * total.abs().max(1.0));
        prop_assert!(gradient_dispersion(&p, &opt.x_star) <= 1e-8);
        for (c, &x) in p.costs().iter().zip(&opt.x_star) {
            prop_assert!((c.gradient(x) - opt.lambda_star).abs() <= 1e-8);
        }
        prop_assert_eq!(opt.f_star, p.value(&opt.x_star));
    }

    #[test]
    fn delayed_bound_divides_exactly(
        kappa in 0.01f64..1.0,
        spread in 1.0f64..3.0,
        l2 in 0.01f64..10.0,
        ratio in 1.0f64..50.0,
        u in 1e-3f64..100.0,
        tau in 0usize..20,
    ) {
        let s = step_bound(kappa, kappa * spread, l2, l2 * ratio, u, tau).unwrap();
        let d = (tau + 1) as f64;
        prop_assert_eq!(s.eta_tau_bar * d, s.eta_bar);
        prop_assert_eq!(s.eta_bar / d, s.eta_tau_bar);
        let raw = kappa * l2 / (u * (l2 * ratio) * (l2 * ratio) * (kappa * spread) * (kappa * spread));
        prop_assert!(s.eta_bar <= raw && raw - s.eta_bar <= 4.0 * f64::EPSILON * raw);
    }
}

#[test]
fn symmetric_and_unpenalized_cpu_optima() {
    let p = Problem::new(vec![CompositeCost::quadratic(0.7, 1.0, 3.0).unwrap(); 4], vec![2.5; 4])
        .unwrap();
    let opt = solve_oracle(&p, 0.0).unwrap();
    assert!(opt.x_star.iter().all(|x| (x - 2.5).abs() < 1e-12));

    let rho = [15.0, 22.5, 35.0];
    let p = Problem::new(
        rho.iter().map(|&r| CompositeCost::cpu(100.0, r).unwrap()).collect(),
        vec![72.5 / 3.0; 3],
    )
    .unwrap();
    let opt = solve_oracle(&p, 0.0).unwrap();
    for (x, r) in opt.x_star.iter().zip(rho) {
        assert!((x - r).abs() < 1e-9);
    }
    assert!(opt.f_star.abs() < 1e-12);
}

/// Without momentum and below the step bound, every round lowers the cost
/// until the gradients agree to 1e-8. The comparison is made on the exact
/// exact step `Δ(k)` so rounding of the stored state cannot mask it.
#[test]
fn momentum_free_runs_descend_monotonically() {
    let mut violations = 0;
    for seed in 0..50u64 {
        let n = 5 + (seed % 16) as usize;
        let problem = sample_academic_costs(n, seed).unwrap();
        let topo = connected_er(n, 0.4, seed * 101);
        let spectrum = spectral_bounds(&topo).unwrap();
        let bound = bound_for(&problem, &SectorMap::Identity, &spectrum, 0).unwrap();
        let mut e = Engine::new(
            problem.clone(),
            SwitchingNetwork::fixed(topo),
            SectorMap::Identity,
            DelayModel::none(),
            0.9 * bound.eta_bar,
            0.0,
        )
        .unwrap();
        for _ in 0..20_000 {
            let before = e.x();
            if gradient_dispersion(&problem, &before) <= 1e-8 {
                break;
            }
            e.step().unwrap();
            if problem.value_step(&before, e.increments()) >= 0.0 {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn residual_starts_at_initial_gap_and_is_nonnegative() {
    let problem = sample_academic_costs(12, 5).unwrap();
    let opt = solve_oracle(&problem, 0.0).unwrap();
    let net = SwitchingNetwork::new(connected_er(12, 0.3, 5), 0.5, 5, 3).unwrap();
    let mut e = Engine::new(
        problem.clone(),
        net,
        SectorMap::log_quantizer(1.0 / 256.0).unwrap(),
        DelayModel::uniform(2, 5),
        0.01,
        0.5,
    )
    .unwrap();
    let trace = e.run(500).unwrap();
    let r = residual(&trace, &opt).unwrap();
    assert_eq!(r[0], problem.value(problem.demands()) - opt.f_star);
    assert!(r.iter().all(|&v| v >= -1e-12 * (1.0 + opt.f_star.abs())));
    assert!(r.last().unwrap() < &r[0]);
}

fn delayed_academic_engine(seed: u64, tau_bar: usize, eta: f64) -> Engine {
    let problem = sample_academic_costs(20, seed).unwrap();
    let net = SwitchingNetwork::fixed(connected_er(20, 0.2, seed));
    Engine::new(
        problem,
        net,
        SectorMap::log_quantizer(1.0 / 1024.0).unwrap(),
        DelayModel::uniform(tau_bar, seed),
        eta,
        0.8,
    )
    .unwrap()
}

#[test]
fn delayed_academic_run_keeps_exact_feasibility() {
    for seed in [1u64, 7, 42] {
        // η = 0.2 converges without delays
        let mut e = delayed_academic_engine(seed, 0, 0.2);
        let total = e.problem().total_demand();
        assert!(e.run(3_000).unwrap().max_feas_gap() <= 1e-9 * total.abs());

        // under the delayed step bound it converges with τ̄ = 4 as well
        let mut e = delayed_academic_engine(seed, 4, 1.0);
        let spectrum = spectral_bounds(e.network().base()).unwrap();
        let b = bound_for(e.problem(), e.map(), &spectrum, 4).unwrap();
        e = delayed_academic_engine(seed, 4, 0.9 * b.eta_tau_bar);
        let trace = e.run(3_000).unwrap();
        assert!(trace.max_feas_gap() <= 1e-9 * total.abs());
    }
}

/// With τ̄ = 4 the step rate 0.2 is far above the delayed bound and the states
/// grow without limit; the balance still holds exactly while they remain at
/// the scale of the demands.
#[test]
fn delayed_run_above_bound_stays_feasible_until_it_blows_up() {
    let mut e = delayed_academic_engine(7, 4, 0.2);
    let total = e.problem().total_demand();
    let trace = e.run(3_000).unwrap();
    let mut bounded = 0;
    for row in &trace.rows {
        if row.x.iter().all(|v| v.abs() <= total.abs()) {
            bounded += 1;
            assert!(row.feas_gap <= 1e-9 * total.abs());
        }
    }
    assert!(bounded > 5);
    assert!(trace.max_state_norm() > 1e6 * total.abs() || trace.max_state_norm().is_nan());
}
