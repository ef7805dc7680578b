mod common;

use num_bigint::BigUint;

use womctl_core::bundled;
use womctl_core::prescription::{count_strategies, CountMode};
use womctl_core::solver::{self, Caps, COST_TOL};
use womctl_core::sysmodel::{exact_strategy_cost, monte_carlo_cost, ControlStrategy};
use womctl_core::Error;

use common::{fuzz_corpus, oracle_cost, permutations, random_strategy, solver_gap};

#[test]
fn static_counts() {
    let problem = bundled::static3().validate().unwrap();
    let count = |mode| count_strategies(&problem, mode).unwrap();
    assert_eq!(count(CountMode::Brute), BigUint::from(16_384u32));
    assert_eq!(count(CountMode::Agent(2)), BigUint::from(256u32));
    assert_eq!(count(CountMode::Agent(1)), BigUint::from(64u32));
    assert_eq!(count(CountMode::Agent(0)), BigUint::from(64u32));
    let reversed = bundled::static3_reversed().validate().unwrap();
    for k in 0..3 {
        assert_eq!(count_strategies(&reversed, CountMode::Agent(k)).unwrap(), BigUint::from(256u32));
    }
}

#[test]
fn static_search_sizes_match_counts() {
    for name in ["static3", "static3-reversed"] {
        let problem = bundled::by_name(name).unwrap().validate().unwrap();
        let cmp = solver::compare_agents(&problem, Caps::default()).unwrap();
        for (k, r) in cmp.agents.iter().enumerate() {
            assert_eq!(r.search_size, count_strategies(&problem, CountMode::Agent(k)).unwrap(), "{name} agent {}", k + 1);
        }
        assert!(cmp.consistent(), "{name}: gap {}", cmp.max_gap);
    }
}

#[test]
fn exact_cost_matches_trajectory_enumeration() {
    for name in ["static3", "static3-reversed", "d2", "d2-t2", "wom3"] {
        let problem = bundled::by_name(name).unwrap().validate().unwrap();
        for seed in 0..5 {
            let g = random_strategy(&problem, seed);
            let exact = exact_strategy_cost(&problem, &g).unwrap();
            let oracle = oracle_cost(&problem, &g);
            assert!((exact.expected_cost - oracle).abs() <= COST_TOL, "{name}: {} vs {oracle}", exact.expected_cost);
            assert!((exact.per_stage_costs.iter().sum::<f64>() - exact.expected_cost).abs() <= COST_TOL);
        }
    }
}

#[test]
fn copying_own_observation_on_d2() {
    // each agent plays its latest own observation
    let problem = bundled::d2(2).validate().unwrap();
    let mut g = ControlStrategy::zeros(&problem);
    for t in 0..=problem.horizon() {
        for k in 0..2 {
            let mem = problem.memory_space(t, k);
            let own = mem
                .coords()
                .iter()
                .position(|c| *c == womctl_core::space::Coord::Var(womctl_core::infostruct::VariableId::obs(k, t)))
                .unwrap();
            for (m, u) in g.laws[t][k].iter_mut().enumerate() {
                *u = mem.decode(m)[own];
            }
        }
    }
    let exact = exact_strategy_cost(&problem, &g).unwrap().expected_cost;
    assert!((exact - oracle_cost(&problem, &g)).abs() <= COST_TOL);
}

#[test]
fn solvers_agree_on_fixtures() {
    for name in ["static3", "static3-reversed", "d2", "d2-t2"] {
        let problem = bundled::by_name(name).unwrap().validate().unwrap();
        let gap = solver_gap(&problem, Caps::default()).unwrap();
        assert!(gap <= COST_TOL, "{name}: gap {gap}");
    }
}

#[test]
fn fixture_optima() {
    let cases = [("static3", 0.835), ("d2", 1.44), ("d2-t2", 2.058)];
    for (name, expected) in cases {
        let problem = bundled::by_name(name).unwrap().validate().unwrap();
        let r = solver::solve_common_info_dp(&problem, Caps::default()).unwrap();
        assert!((r.optimal_cost - expected).abs() <= 1e-9, "{name}: {}", r.optimal_cost);
    }
}

#[test]
fn solvers_agree_on_fuzzed_instances() {
    let (corpus, rejected) = fuzz_corpus(50, 1000);
    assert_eq!(corpus.len(), 50, "only {} instances fit the cap ({rejected} rejected)", corpus.len());
    for (seed, problem) in &corpus {
        let gap = solver_gap(problem, Caps { brute: common::FUZZ_BRUTE_CAP, ..Caps::default() }).unwrap();
        assert!(gap <= COST_TOL, "seed {seed}: gap {gap}");
    }
}

#[test]
fn optimal_cost_is_invariant_under_relabeling() {
    for name in ["static3", "d2", "d2-t2"] {
        let instance = bundled::by_name(name).unwrap();
        let base = solver::solve_common_info_dp(&instance.clone().validate().unwrap(), Caps::default()).unwrap().optimal_cost;
        for perm in permutations(instance.system.agents()) {
            let problem = instance.relabel_agents(&perm).unwrap().validate().unwrap();
            let gap = solver_gap(&problem, Caps::default()).unwrap();
            let cost = solver::solve_common_info_dp(&problem, Caps::default()).unwrap().optimal_cost;
            assert!(gap <= COST_TOL && (cost - base).abs() <= COST_TOL, "{name} {perm:?}: {cost} vs {base}");
        }
    }
}

#[test]
fn monte_carlo_within_three_standard_errors() {
    let problem = bundled::d2(1).validate().unwrap();
    let g = solver::solve_common_info_dp(&problem, Caps::default()).unwrap().strategy;
    let exact = exact_strategy_cost(&problem, &g).unwrap().expected_cost;
    let mc = monte_carlo_cost(&problem, &g, 100_000, 7).unwrap();
    let stderr = mc.stderr.unwrap();
    assert!(stderr > 0.0);
    assert!((mc.expected_cost - exact).abs() <= 3.0 * stderr, "{} vs {exact} ± {stderr}", mc.expected_cost);
    let again = monte_carlo_cost(&problem, &g, 100_000, 7).unwrap();
    assert_eq!(mc, again);
}

#[test]
fn brute_force_respects_cap() {
    let problem = bundled::wom3(1).validate().unwrap();
    let err = solver::solve_brute_force(&problem, Caps::default()).unwrap_err();
    assert!(matches!(err, Error::CapExceeded { .. }));
    let cmp = solver::compare_agents(&problem, Caps::default()).unwrap();
    assert!(cmp.brute.is_none());
    assert!(cmp.consistent(), "gap {}", cmp.max_gap);
}

#[test]
fn static_decomposition_requires_horizon_zero() {
    let problem = bundled::d2(1).validate().unwrap();
    assert!(solver::solve_prescription_static(&problem, 0, Caps::default()).is_err());
}

#[test]
fn recursion_cap_is_enforced() {
    let problem = bundled::d2(2).validate().unwrap();
    let err = solver::solve_common_info_dp(&problem, Caps::uniform(2)).unwrap_err();
    assert!(matches!(err, Error::CapExceeded { .. }));
}
