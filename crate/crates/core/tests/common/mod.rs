#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use womctl_core::belief::{connection_term, factorization_check, BeliefModel, InformationState};
use womctl_core::infostruct::{InfoSchema, VarKind, VariableId};
use womctl_core::prescription::{apply_prescription, control_law_to_strategy, strategy_to_control_law, translate_strategy};
use womctl_core::netgraph::NetworkSpec;
use womctl_core::solver::{self, Caps};
use womctl_core::sysmodel::{ControlStrategy, Instance, Primitive, Problem, SystemSpec};
use womctl_core::Error;

/// Minimum delay over every simple path, by exhaustive path enumeration.
pub fn path_delays(spec: &NetworkSpec) -> Vec<Vec<u64>> {
    let k = spec.agents;
    let mut out = vec![vec![u64::MAX; k]; k];
    fn walk(spec: &NetworkSpec, at: usize, acc: u64, seen: &mut Vec<bool>, best: &mut [u64]) {
        best[at] = best[at].min(acc);
        for l in &spec.links {
            if l.from == at && !seen[l.to] {
                seen[l.to] = true;
                walk(spec, l.to, acc + l.delay as u64, seen, best);
                seen[l.to] = false;
            }
        }
    }
    for (from, row) in out.iter_mut().enumerate() {
        let mut seen = vec![false; k];
        seen[from] = true;
        walk(spec, from, 0, &mut seen, row);
    }
    out
}

/// Memory of agent `k` at time `t` obtained by simulating the packets every agent
/// emits (`Y^j_s` and `U^j_{s-1}` at time `s`) being relayed hop by hop over the links.
pub fn propagated_memory(spec: &NetworkSpec, t: usize, k: usize) -> BTreeSet<VariableId> {
    let n = spec.agents;
    let mut memory = BTreeSet::new();
    for s in 0..=t {
        for j in 0..n {
            // holds[a] = earliest tick agent a holds the packet (j, s)
            let mut holds = vec![usize::MAX; n];
            holds[j] = s;
            for tick in s..=t {
                for l in &spec.links {
                    let d = l.delay as usize;
                    if tick >= d && holds[l.from] <= tick - d && holds[l.to] > tick {
                        holds[l.to] = tick;
                    }
                }
            }
            if holds[k] <= t {
                memory.insert(VariableId::obs(j, s));
                if s > 0 {
                    memory.insert(VariableId::ctrl(j, s - 1));
                }
            }
        }
    }
    memory
}

pub fn schema_set(schema: &InfoSchema) -> BTreeSet<VariableId> {
    schema.iter().copied().collect()
}

/// One joint realization of all primitive randomness with its probability.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub prob: f64,
    pub x: Vec<usize>,
    pub y: Vec<Vec<usize>>,
    pub u: Vec<Vec<usize>>,
    pub cost: Vec<f64>,
}

impl Trajectory {
    pub fn value(&self, v: &VariableId) -> usize {
        match v.kind {
            VarKind::Observation => self.y[v.time][v.agent],
            VarKind::Control => self.u[v.time][v.agent],
        }
    }

    /// Row-major index of the variables of `schema` (canonical order).
    pub fn index(&self, problem: &Problem, schema: &InfoSchema) -> usize {
        let sys = problem.system();
        schema.iter().fold(0, |acc, v| {
            let r = match v.kind {
                VarKind::Observation => sys.observation_sizes[v.agent],
                VarKind::Control => sys.control_sizes[v.agent],
            };
            acc * r + self.value(v)
        })
    }

    pub fn values(&self, schema: &InfoSchema) -> Vec<usize> {
        schema.iter().map(|v| self.value(v)).collect()
    }
}

fn probs_at(p: &Primitive, t: usize) -> Vec<f64> {
    p.probs_per_t.at(t).to_vec()
}

/// Every trajectory of `g` with positive probability, by plain enumeration of the
/// initial state, disturbances and noises.
pub fn trajectories(problem: &Problem, g: &ControlStrategy) -> Vec<Trajectory> {
    let sys = problem.system().clone();
    let k = sys.agents();
    let mut out = Vec::new();
    let start = Trajectory { prob: 1.0, x: Vec::new(), y: Vec::new(), u: Vec::new(), cost: Vec::new() };
    fn noise_vectors(sys: &SystemSpec, t: usize) -> Vec<(Vec<usize>, f64)> {
        let mut acc = vec![(Vec::new(), 1.0)];
        for n in &sys.noises {
            let p = probs_at(n, t);
            acc = acc
                .into_iter()
                .flat_map(|(v, pv): (Vec<usize>, f64)| {
                    p.iter().enumerate().filter(|(_, &q)| q > 0.0).map(move |(i, &q)| {
                        let mut v2 = v.clone();
                        v2.push(i);
                        (v2, pv * q)
                    })
                })
                .collect();
        }
        acc
    }
    fn step(problem: &Problem, g: &ControlStrategy, sys: &SystemSpec, k: usize, tr: Trajectory, x: usize, out: &mut Vec<Trajectory>) {
        let t = tr.x.len();
        for (v, pv) in noise_vectors(sys, t) {
            let mut tr = tr.clone();
            tr.prob *= pv;
            tr.x.push(x);
            tr.y.push((0..k).map(|j| sys.observation[j][t][x][v[j]]).collect());
            tr.u.push(vec![0; k]);
            for j in 0..k {
                let m = tr.index(problem, problem.tables().memory(t, j));
                tr.u[t][j] = g.laws[t][j][m];
            }
            let uj = sys.joint_index(&tr.u[t]);
            tr.cost.push(sys.cost[t][x][uj]);
            if t == sys.horizon {
                out.push(tr);
                continue;
            }
            for (w, &pw) in probs_at(&sys.disturbance, t).iter().enumerate() {
                if pw > 0.0 {
                    let mut next = tr.clone();
                    next.prob *= pw;
                    let x2 = sys.transition[t][x][uj][w];
                    step(problem, g, sys, k, next, x2, out);
                }
            }
        }
    }
    for (x0, &p0) in sys.initial_probs.iter().enumerate() {
        if p0 > 0.0 {
            let mut tr = start.clone();
            tr.prob = p0;
            step(problem, g, &sys, k, tr, x0, &mut out);
        }
    }
    out
}

pub fn oracle_cost(problem: &Problem, g: &ControlStrategy) -> f64 {
    trajectories(problem, g).iter().map(|tr| tr.prob * tr.cost.iter().sum::<f64>()).sum()
}

/// `P(S_t^k = s | A_t^k = a)` by direct conditioning over trajectories, keyed by the
/// values of `a`; `s` is indexed state-first, then the equivalent-state variables.
pub fn bayes_beliefs(problem: &Problem, g: &ControlStrategy, k: usize) -> Vec<BTreeMap<Vec<usize>, Vec<f64>>> {
    let trs = trajectories(problem, g);
    let tables = problem.tables();
    let mut out = Vec::new();
    for t in 0..=problem.horizon() {
        let eq = tables.equivalent(t, k);
        let tail: usize = eq
            .iter()
            .map(|v| match v.kind {
                VarKind::Observation => problem.system().observation_sizes[v.agent],
                VarKind::Control => problem.system().control_sizes[v.agent],
            })
            .product();
        let size = problem.system().state_size * tail;
        let mut joint: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for tr in &trs {
            let a = tr.values(tables.accessible(t, k));
            let s = tr.x[t] * tail + tr.index(problem, eq);
            joint.entry(a).or_insert_with(|| vec![0.0; size])[s] += tr.prob;
        }
        for probs in joint.values_mut() {
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
        }
        out.push(joint);
    }
    out
}

pub fn random_strategy(problem: &Problem, seed: u64) -> ControlStrategy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = ControlStrategy::zeros(problem);
    for stage in g.laws.iter_mut() {
        for (j, law) in stage.iter_mut().enumerate() {
            law.iter_mut().for_each(|u| *u = rng.gen_range(0..problem.system().control_sizes[j]));
        }
    }
    g
}

fn distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.05..1.0) }).collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            return w.iter().map(|x| x / total).collect();
        }
    }
}

/// A random instance with at most 3 agents, at most 3 states, binary controls and
/// observations and horizon at most 2.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = rng.gen_range(2..=3);
    let horizon = rng.gen_range(0..=2);
    let states = rng.gen_range(1..=3);
    let w_size = rng.gen_range(1..=2);
    let mut links = Vec::new();
    for j in 0..agents {
        links.push((j, (j + 1) % agents, rng.gen_range(1..=2)));
    }
    for a in 0..agents {
        for b in 0..agents {
            if a != b && b != (a + 1) % agents && rng.gen_bool(0.4) {
                links.push((a, b, rng.gen_range(1..=2)));
            }
        }
    }
    let joint = 1 << agents;
    let transition = (0..horizon)
        .map(|_| (0..states).map(|_| (0..joint).map(|_| (0..w_size).map(|_| rng.gen_range(0..states)).collect()).collect()).collect())
        .collect();
    let noises: Vec<Primitive> = (0..agents)
        .map(|_| {
            let size = rng.gen_range(1..=2);
            Primitive::constant(distribution(&mut rng, size))
        })
        .collect();
    let observation = (0..agents)
        .map(|j| {
            let nv = noises[j].size;
            (0..=horizon).map(|_| (0..states).map(|_| (0..nv).map(|_| rng.gen_range(0..2)).collect()).collect()).collect()
        })
        .collect();
    let cost = (0..=horizon)
        .map(|_| (0..states).map(|_| (0..joint).map(|_| (rng.gen_range(0.0..3.0_f64) * 100.0).round() / 100.0).collect()).collect())
        .collect();
    let system = SystemSpec {
        horizon,
        state_size: states,
        control_sizes: vec![2; agents],
        observation_sizes: vec![2; agents],
        disturbance: Primitive::constant(distribution(&mut rng, w_size)),
        noises,
        initial_probs: distribution(&mut rng, states),
        transition,
        observation,
        cost,
    };
    Instance { network: NetworkSpec::new(agents, links), system, static_memory: None }
}

pub const FUZZ_BRUTE_CAP: u64 = 1 << 16;

/// Deterministic fuzz corpus: the first `wanted` random instances whose exhaustive
/// search fits in [`FUZZ_BRUTE_CAP`]. Returns the accepted problems with their seeds
/// and the number of rejected seeds.
pub fn fuzz_corpus(wanted: usize, max_attempts: u64) -> (Vec<(u64, Problem)>, usize) {
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for seed in 0..max_attempts {
        if accepted.len() == wanted {
            break;
        }
        let problem = random_instance(seed).validate().expect("generated instances are valid");
        match solver::solve_brute_force(&problem, Caps { brute: FUZZ_BRUTE_CAP, ..Caps::default() }) {
            Ok(_) => accepted.push((seed, problem)),
            Err(Error::CapExceeded { .. }) => rejected += 1,
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    (accepted, rejected)
}

/// Largest gap between the exhaustive optimum and any solver's value or re-evaluated cost.
pub fn solver_gap(problem: &Problem, caps: Caps) -> Result<f64, Error> {
    let cmp = solver::compare_agents(problem, caps)?;
    let brute = cmp.brute.as_ref().ok_or(Error::CapExceeded { required: "exhaustive search".into(), cap: caps.brute })?;
    Ok(cmp
        .all()
        .flat_map(|r| [r.optimal_cost, r.evaluated_cost])
        .map(|c| (c - brute.evaluated_cost).abs())
        .fold(0.0, f64::max))
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Largest deviation between the recursive filter and direct conditioning, and the
/// largest normalization drift, over every agent and reachable accessible realization.
/// A mismatch in the set of reachable realizations counts as an infinite deviation.
pub fn filter_errors(problem: &Problem, g: &ControlStrategy) -> (f64, f64) {
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for k in 0..problem.agents() {
        let psi = control_law_to_strategy(problem, g, k).unwrap();
        let model = BeliefModel::new(problem, k).unwrap();
        let filtered = model.reachable_states(&psi).unwrap();
        let direct = bayes_beliefs(problem, g, k);
        for t in 0..=problem.horizon() {
            if !filtered[t].keys().eq(direct[t].keys()) {
                return (f64::INFINITY, f64::INFINITY);
            }
            for (a, st) in &filtered[t] {
                drift = drift.max((st.probs.iter().sum::<f64>() - 1.0).abs());
                for (p, q) in st.probs.iter().zip(&direct[t][a]) {
                    worst = worst.max((p - q).abs());
                }
            }
        }
    }
    (worst, drift)
}

/// Largest factorization residual over every pair of agents, reachable realization
/// and `t <= 2`, and the smallest residual after corrupting a connection term by
/// moving half of its largest entry onto another entry.
pub fn factorization(problem: &Problem, g: &ControlStrategy) -> (f64, Option<f64>) {
    let k_all = problem.agents();
    let reach: Vec<Vec<BTreeMap<Vec<usize>, InformationState>>> = (0..k_all)
        .map(|k| {
            let psi = control_law_to_strategy(problem, g, k).unwrap();
            BeliefModel::new(problem, k).unwrap().reachable_states(&psi).unwrap()
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut corrupted: Option<f64> = None;
    for t in 0..=problem.horizon().min(2) {
        for i in 1..k_all {
            for k in 0..i {
                for (a_i, pi_i) in &reach[i][t] {
                    let lambda = connection_term(problem, pi_i, k).unwrap();
                    worst = worst.max(factorization_check(problem, pi_i, a_i, &reach[k][t], &lambda).unwrap());
                    if lambda.probs.len() > 1 {
                        let mut bad = lambda.clone();
                        let top = (0..bad.probs.len()).max_by(|&x, &y| bad.probs[x].total_cmp(&bad.probs[y])).unwrap();
                        let other = (top + 1) % bad.probs.len();
                        let moved = bad.probs[top] / 2.0;
                        bad.probs[top] -= moved;
                        bad.probs[other] += moved;
                        let r = factorization_check(problem, pi_i, a_i, &reach[k][t], &bad).unwrap();
                        corrupted = Some(corrupted.map_or(r, |c: f64| c.min(r)));
                    }
                }
            }
        }
    }
    (worst, corrupted)
}

/// Checks translation coherence of `g` for every owner agent. Returns the number of
/// failed checks and the number of (trajectory, time, agent) action checks made.
pub fn translation_mismatches(problem: &Problem, g: &ControlStrategy) -> (usize, usize) {
    let agents = problem.agents();
    let tables = problem.tables();
    let own: Vec<_> = (0..agents).map(|k| control_law_to_strategy(problem, g, k).unwrap()).collect();
    let trs = trajectories(problem, g);
    let mut failed = 0;
    let mut checked = 0;
    for k in 0..agents {
        failed += usize::from(&strategy_to_control_law(problem, &own[k]).unwrap() != g);
        for j in 0..agents {
            failed += usize::from(translate_strategy(problem, &own[k], j).unwrap() != own[j]);
        }
        // prescriptions for agents after the owner coincide with their own
        for t in 0..=problem.horizon() {
            for j in k + 1..agents {
                failed += usize::from(own[k].laws[t][j] != own[j].laws[t][j]);
            }
        }
        // every action recomputed through agent k's prescriptions
        for tr in &trs {
            for t in 0..=problem.horizon() {
                for j in 0..agents {
                    let cond = tr.index(problem, tables.prescription_conditioning(t, k, j));
                    let gamma = own[k].prescription(problem, t, j, cond);
                    let u = apply_prescription(&gamma, &tr.values(tables.prescription_domain(t, k, j))).unwrap();
                    failed += usize::from(u != tr.u[t][j]);
                    checked += 1;
                }
            }
        }
    }
    (failed, checked)
}
