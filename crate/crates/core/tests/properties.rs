mod common;

use common::{interior_point, random_homogeneous, random_scenario, random_single_item};
use nalgebra::{DMatrix, SymmetricEigen};
use nbs_airtime::oracle::{fairness_probe, homogeneous_flows, kkt_residual, pareto_probe};
use nbs_airtime::solver::{solve_all_heads, tied_best};
use nbs_airtime::{
    aggregate_flows, build_dissemination_plan, nash_products, run_algorithm1, solve_joint, Allocation, SolveStatus,
    SolverOptions, SubProblem,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fields(f: &nbs_airtime::FlowSummary) -> [f64; 6] {
    [f.disseminated, f.received_of_interest, f.forwarded, f.sent, f.received, f.energy]
}

fn random_allocation(plan: &nbs_airtime::DisseminationPlan, rng: &mut ChaCha8Rng) -> Allocation {
    Allocation::from_vec(
        plan.routes
            .iter()
            .map(|r| if r.is_active() { r.max_airtime() * rng.random_range(0.0..0.5) } else { 0.0 })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn link_totals_are_conserved(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for head in 0..s.user_count() {
            let plan = build_dissemination_plan(&s, head, None).unwrap();
            let alloc = random_allocation(&plan, &mut rng);
            let flows = aggregate_flows(&plan, &alloc).unwrap();
            let sent: f64 = flows.iter().map(|f| f.sent).sum();
            let over_links: f64 = plan
                .routes
                .iter()
                .filter(|r| r.is_active())
                .map(|r| r.transmissions as f64 * alloc.get(r.item) / r.time_weight)
                .sum();
            prop_assert!((sent - over_links).abs() <= 1e-9 * (1.0 + sent));
            let received: f64 = flows.iter().map(|f| f.received).sum();
            prop_assert!((received - over_links).abs() <= 1e-9 * (1.0 + sent));
        }
    }

    #[test]
    fn flows_are_monotone_and_linear(seed in any::<u64>(), k in 0usize..5, bump in 0.0f64..1.0) {
        let s = random_scenario(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = rng.random_range(0..s.user_count());
        let plan = build_dissemination_plan(&s, head, None).unwrap();
        let alloc = random_allocation(&plan, &mut rng);
        let base = aggregate_flows(&plan, &alloc).unwrap();

        let doubled = aggregate_flows(&plan, &alloc.scaled(2.0)).unwrap();
        for (a, b) in base.iter().zip(&doubled) {
            for (x, y) in fields(a).iter().zip(fields(b)) {
                prop_assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        let m = k % plan.routes.len();
        if plan.routes[m].is_active() {
            let mut raised = alloc.as_slice().to_vec();
            raised[m] += bump * (plan.routes[m].max_airtime() * 0.5);
            let more = aggregate_flows(&plan, &Allocation::from_vec(raised)).unwrap();
            for (a, b) in base.iter().zip(&more) {
                for (x, y) in fields(a).iter().zip(fields(b)) {
                    prop_assert!(y >= x - 1e-12);
                }
            }
        }
    }

    #[test]
    fn homogeneous_reduction_matches_general_flows(seed in any::<u64>()) {
        let s = random_homogeneous(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for head in 0..s.user_count() {
            let plan = build_dissemination_plan(&s, head, None).unwrap();
            let alloc = random_allocation(&plan, &mut rng);
            let general = aggregate_flows(&plan, &alloc).unwrap();
            let direct = homogeneous_flows(&s, head, alloc.as_slice());
            for (a, b) in general.iter().zip(&direct) {
                for (x, y) in fields(a).iter().zip(fields(b)) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = rng.random_range(0..s.user_count());
        let p = SubProblem::new(&s, head).unwrap();
        let Some(x) = interior_point(&p.game, &p.upper, p.budget, &mut rng) else { return Ok(()) };
        let g = p.game.objective_gradient(&x);
        let h = 1e-6;
        let scale = g.amax().max(1e-6);
        for k in 0..x.len() {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[k] += h;
            lo[k] -= h;
            let fd = (p.game.objective(&hi) - p.game.objective(&lo)) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-5 * scale, "k={k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn objective_is_strictly_concave_inside(seed in any::<u64>()) {
        let s = random_single_item(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = rng.random_range(0..s.user_count());
        let p = SubProblem::new(&s, head).unwrap();
        if p.game.dim == 0 {
            return Ok(());
        }
        let Some(x) = interior_point(&p.game, &p.upper, p.budget, &mut rng) else { return Ok(()) };
        let n = x.len();
        let h = 1e-5;
        let mut fd = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[k] += h;
            lo[k] -= h;
            let col = (p.game.objective_gradient(&hi) - p.game.objective_gradient(&lo)) / (2.0 * h);
            fd.set_column(k, &col);
        }
        let sym = (&fd + fd.transpose()) * 0.5;
        let analytic = p.game.objective_hessian(&x);
        prop_assert!((&sym - &analytic).amax() <= 1e-5 * analytic.amax().max(1e-9));
        let top = SymmetricEigen::new(analytic).eigenvalues.max();
        prop_assert!(top < 0.0, "largest eigenvalue {top}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optima_satisfy_kkt_pareto_and_fairness(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let opts = SolverOptions::default();
        for sol in solve_all_heads(&s, &opts).unwrap() {
            if sol.status != SolveStatus::Optimal || sol.utilities.iter().any(|&u| !(u > 1e-6)) {
                continue;
            }
            let plan_vars = SubProblem::new(&s, sol.head).unwrap().vars;
            let x: Vec<f64> = plan_vars.iter().map(|&m| sol.allocation.get(m)).collect();
            let kkt = kkt_residual(&s, sol.head, &x).unwrap();
            prop_assert!(kkt.residual() <= 1e-6, "head {}: {kkt:?}", sol.head);
            prop_assert_eq!(pareto_probe(&s, sol.head, &x, 200, seed).unwrap(), 0);
            prop_assert!(fairness_probe(&s, sol.head, &x, 200, seed).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn product_rankings_agree_under_equal_power(seed in any::<u64>()) {
        let mut s = random_scenario(seed);
        let n = s.user_count();
        s.bargaining_power = vec![1.0 / n as f64; n];
        s.bargaining_power[n - 1] = 1.0 - (n - 1) as f64 / n as f64;
        let subs = solve_all_heads(&s, &SolverOptions::default()).unwrap();
        let pick = |f: &dyn Fn(&nbs_airtime::SubSolution) -> f64| {
            tied_best(&subs.iter().map(|c| c.status.admits_agreement().then(|| f(c))).collect::<Vec<_>>())
        };
        let weighted = pick(&|c| c.products.weighted);
        let plain = pick(&|c| c.products.plain);
        let log = pick(&|c| c.products.log_objective.exp());
        prop_assert_eq!(&weighted, &plain);
        prop_assert_eq!(&weighted, &log);
    }

    #[test]
    fn head_is_invariant_to_utility_and_power_rescaling(seed in any::<u64>(), sigma in 0.1f64..10.0, c in 0.1f64..10.0) {
        let s = random_scenario(seed);
        let opts = SolverOptions::default();
        let Ok(base) = solve_joint(&s, &opts) else { return Ok(()) };

        let scaled: Vec<Option<f64>> = base
            .candidates
            .iter()
            .map(|cand| {
                cand.status.admits_agreement().then(|| {
                    let u: Vec<f64> = cand.utilities.iter().map(|u| sigma * u).collect();
                    nash_products(&u, &s.bargaining_power).unwrap().weighted
                })
            })
            .collect();
        prop_assert_eq!(tied_best(&scaled).first().copied(), Some(base.head));

        let mut t = s.clone();
        let raw: Vec<f64> = t.bargaining_power.iter().map(|a| a * c).collect();
        let total: f64 = raw.iter().sum();
        t.bargaining_power = raw.iter().map(|a| a / total).collect();
        let drift: f64 = t.bargaining_power.iter().sum::<f64>() - 1.0;
        t.bargaining_power[0] -= drift;
        prop_assert_eq!(solve_joint(&t, &opts).unwrap().head, base.head);
    }

    #[test]
    fn solving_is_deterministic(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let opts = SolverOptions::default();
        prop_assert_eq!(solve_joint(&s, &opts), solve_joint(&s, &opts));
    }

    #[test]
    fn distributed_protocol_matches_centralized(seed in any::<u64>()) {
        let s = random_scenario(seed);
        let opts = SolverOptions::default();
        match (solve_joint(&s, &opts), run_algorithm1(&s, &opts)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.head, b.head);
                prop_assert_eq!(b.messages.len(), s.user_count());
                for (x, y) in a.allocation.as_slice().iter().zip(b.allocation.as_slice()) {
                    prop_assert!((x - y).abs() <= 2.0 * opts.tolerance);
                }
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(false, "centralized {:?} vs distributed {:?}", a.map(|j| j.head), b.map(|j| j.head)),
        }
    }
}
