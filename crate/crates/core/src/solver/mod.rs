//! Optimal strategies by exhaustive search, by the common-information recursion and
//! by the prescription decomposition of any agent.

mod brute;
mod engine;

use std::time::Instant;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prescription::{count_strategies, strategy_to_control_law, CountMode, PrescriptionStrategy};
use crate::sysmodel::{exact_strategy_cost, ControlStrategy, CostReport, Problem};

pub use engine::BeliefRecord;
use engine::{Engine, Grouping};

/// Absolute tolerance for cost comparisons.
pub const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Strategy evaluations in the exhaustive search.
    pub brute: u64,
    /// Joint tables per decision and reachable beliefs in the recursions.
    pub prescription: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { brute: 1 << 24, prescription: 1 << 20 }
    }
}

impl Caps {
    pub fn uniform(cap: u64) -> Self {
        Caps { brute: cap, prescription: cap }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Brute,
    CommonInfo,
    Prescription,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub method: Method,
    /// 0-based agent owning the prescription strategy.
    pub agent: Option<usize>,
    /// Value found by the search or the recursion.
    pub optimal_cost: f64,
    /// Exact cost of `strategy`, recomputed independently.
    pub evaluated_cost: f64,
    pub strategy: ControlStrategy,
    pub prescription: Option<PrescriptionStrategy>,
    pub beliefs: Vec<BeliefRecord>,
    /// Number of candidate strategies or prescription tables examined.
    pub search_size: BigUint,
    pub wall_time: f64,
}

pub fn solve_brute_force(problem: &Problem, caps: Caps) -> Result<SolveResult> {
    let start = Instant::now();
    let out = brute::solve(problem, caps.brute)?;
    let evaluated = exact_strategy_cost(problem, &out.strategy)?.expected_cost;
    Ok(SolveResult {
        method: Method::Brute,
        agent: None,
        optimal_cost: out.value,
        evaluated_cost: evaluated,
        strategy: out.strategy,
        prescription: None,
        beliefs: Vec::new(),
        search_size: count_strategies(problem, CountMode::Brute)?,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn run_engine(problem: &Problem, owner: usize, grouping: Grouping, method: Method, caps: Caps) -> Result<SolveResult> {
    let start = Instant::now();
    let out = Engine::new(problem, owner, grouping, caps.prescription)?.solve()?;
    let strategy = strategy_to_control_law(problem, &out.strategy)?;
    let evaluated = exact_strategy_cost(problem, &strategy)?.expected_cost;
    Ok(SolveResult {
        method,
        agent: Some(owner),
        optimal_cost: out.value,
        evaluated_cost: evaluated,
        strategy,
        prescription: Some(out.strategy),
        beliefs: out.beliefs,
        search_size: BigUint::from(out.search),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Coordinator recursion on the information common to all agents (the last agent's view).
pub fn solve_common_info_dp(problem: &Problem, caps: Caps) -> Result<SolveResult> {
    run_engine(problem, problem.agents() - 1, Grouping::Belief, Method::CommonInfo, caps)
}

/// One-shot problems: every accessible realization of agent `k` solved separately,
/// with the less informed agents' tables searched once per shared realization.
pub fn solve_prescription_static(problem: &Problem, k: usize, caps: Caps) -> Result<SolveResult> {
    if problem.horizon() != 0 {
        return Err(Error::ShapeMismatch { what: "the static decomposition needs horizon 0".into() });
    }
    run_engine(problem, k, Grouping::Realization, Method::Prescription, caps)
}

/// Recursion over the beliefs of the last agent with agent `k`'s prescriptions; the
/// tables for agents after `k` are shared by branches with equal belief tuples.
pub fn solve_prescription_dp(problem: &Problem, k: usize, caps: Caps) -> Result<SolveResult> {
    run_engine(problem, k, Grouping::Belief, Method::Prescription, caps)
}

/// Static decomposition for horizon 0, the recursion otherwise.
pub fn solve_prescription(problem: &Problem, k: usize, caps: Caps) -> Result<SolveResult> {
    if problem.horizon() == 0 {
        solve_prescription_static(problem, k, caps)
    } else {
        solve_prescription_dp(problem, k, caps)
    }
}

pub fn evaluate_prescription_strategy(problem: &Problem, psi: &PrescriptionStrategy) -> Result<CostReport> {
    exact_strategy_cost(problem, &strategy_to_control_law(problem, psi)?)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// `None` when the exhaustive search exceeded its cap.
    pub brute: Option<SolveResult>,
    pub common_info: SolveResult,
    /// One result per agent, in agent order.
    pub agents: Vec<SolveResult>,
    /// Largest pairwise gap between evaluated costs.
    pub max_gap: f64,
}

impl Comparison {
    pub fn consistent(&self) -> bool {
        self.max_gap <= COST_TOL
    }

    pub fn all(&self) -> impl Iterator<Item = &SolveResult> {
        self.brute.iter().chain(std::iter::once(&self.common_info)).chain(self.agents.iter())
    }
}

/// Runs every applicable solver and measures how far their costs are apart.
pub fn compare_agents(problem: &Problem, caps: Caps) -> Result<Comparison> {
    let brute = match solve_brute_force(problem, caps) {
        Ok(r) => Some(r),
        Err(Error::CapExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let common_info = solve_common_info_dp(problem, caps)?;
    let last = problem.agents() - 1;
    let mut agents = (0..last).map(|k| solve_prescription(problem, k, caps)).collect::<Result<Vec<_>>>()?;
    // the last agent's decomposition is the common-information recursion itself
    agents.push(if problem.horizon() == 0 {
        solve_prescription_static(problem, last, caps)?
    } else {
        SolveResult { method: Method::Prescription, ..common_info.clone() }
    });
    let mut cmp = Comparison { brute, common_info, agents, max_gap: 0.0 };
    let costs: Vec<f64> = cmp.all().flat_map(|r| [r.optimal_cost, r.evaluated_cost]).collect();
    let hi = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
    cmp.max_gap = hi - lo;
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn static_groupings_agree() {
        let problem = bundled::static3().validate().unwrap();
        for k in 0..3 {
            let by_realization = solve_prescription_static(&problem, k, Caps::default()).unwrap();
            let by_belief = solve_prescription_dp(&problem, k, Caps::default()).unwrap();
            assert!((by_realization.optimal_cost - by_belief.optimal_cost).abs() <= COST_TOL);
            assert!((by_realization.evaluated_cost - by_realization.optimal_cost).abs() <= COST_TOL);
        }
    }

    #[test]
    fn brute_force_on_d2() {
        let problem = bundled::d2(1).validate().unwrap();
        let r = solve_brute_force(&problem, Caps::default()).unwrap();
        assert!((r.optimal_cost - 1.44).abs() <= COST_TOL);
        assert!((r.evaluated_cost - r.optimal_cost).abs() <= COST_TOL);
        assert_eq!(r.search_size, BigUint::from(1u32 << 20));
    }

    #[test]
    fn brute_force_cap_is_checked_up_front() {
        let problem = bundled::d2(1).validate().unwrap();
        assert!(matches!(solve_brute_force(&problem, Caps::uniform(16)), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn recursion_strategy_reaches_its_value() {
        let problem = bundled::d2(2).validate().unwrap();
        for k in 0..2 {
            let r = solve_prescription(&problem, k, Caps::default()).unwrap();
            let psi = r.prescription.as_ref().unwrap();
            let cost = evaluate_prescription_strategy(&problem, psi).unwrap().expected_cost;
            assert!((cost - r.optimal_cost).abs() <= COST_TOL);
            assert!(!r.beliefs.is_empty());
        }
    }

    #[test]
    fn comparison_of_bundled_instance_is_consistent() {
        let problem = bundled::static3_reversed().validate().unwrap();
        let cmp = compare_agents(&problem, Caps::default()).unwrap();
        assert!(cmp.brute.is_some());
        assert_eq!(cmp.agents.len(), 3);
        assert!(cmp.consistent());
    }
}
