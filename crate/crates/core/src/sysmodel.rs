//! Finite system model, instance files and strategy evaluation.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infostruct::{InfoSource, InfoTables, VarKind, VariableId};
use crate::netgraph::{compute_delay_matrix, validate_network, Link, NetworkSpec};
use crate::space::{Cardinalities, Space};

const PROB_TOL: f64 = 1e-9;

/// A probability vector that is either constant or given per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeProbs {
    Constant(Vec<f64>),
    PerTime(Vec<Vec<f64>>),
}

impl TimeProbs {
    pub fn at(&self, t: usize) -> &[f64] {
        match self {
            TimeProbs::Constant(p) => p,
            TimeProbs::PerTime(ps) => &ps[t],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub size: usize,
    pub probs_per_t: TimeProbs,
}

impl Primitive {
    pub fn constant(probs: Vec<f64>) -> Self {
        Primitive { size: probs.len(), probs_per_t: TimeProbs::Constant(probs) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub horizon: usize,
    pub state_size: usize,
    pub control_sizes: Vec<usize>,
    pub observation_sizes: Vec<usize>,
    pub disturbance: Primitive,
    pub noises: Vec<Primitive>,
    pub initial_probs: Vec<f64>,
    /// `transition[t][x][u_joint][w]` is the next state.
    pub transition: Vec<Vec<Vec<Vec<usize>>>>,
    /// `observation[k][t][x][v]` is agent `k`'s observation.
    pub observation: Vec<Vec<Vec<Vec<usize>>>>,
    /// `cost[t][x][u_joint]`.
    pub cost: Vec<Vec<Vec<f64>>>,
}

impl SystemSpec {
    pub fn agents(&self) -> usize {
        self.control_sizes.len()
    }

    pub fn joint_controls(&self) -> usize {
        self.control_sizes.iter().product()
    }

    /// Row-major joint control index, agent 1 most significant.
    pub fn joint_index(&self, u: &[usize]) -> usize {
        u.iter().zip(&self.control_sizes).fold(0, |acc, (&v, &r)| acc * r + v)
    }

    pub fn split_joint(&self, mut idx: usize) -> Vec<usize> {
        let mut u = vec![0; self.control_sizes.len()];
        for (slot, &r) in u.iter_mut().zip(&self.control_sizes).rev() {
            *slot = idx % r;
            idx /= r;
        }
        u
    }

    pub fn cardinalities(&self) -> Cardinalities {
        Cardinalities {
            state: self.state_size,
            controls: self.control_sizes.clone(),
            observations: self.observation_sizes.clone(),
        }
    }
}

/// Contents of an instance file. `static_memory[k]` (1-based agent numbers) replaces
/// the delay-derived memories of a horizon-0 problem when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub network: NetworkSpec,
    pub system: SystemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_memory: Option<Vec<Vec<usize>>>,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Instance> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn validate(self) -> Result<Problem> {
        Problem::new(self)
    }

    /// Renumbers agents so that new agent `n` is old agent `perm[n]`.
    pub fn relabel_agents(&self, perm: &[usize]) -> Result<Instance> {
        let k = self.system.agents();
        let mut inv = vec![usize::MAX; k];
        for (new, &old) in perm.iter().enumerate() {
            if old >= k || inv[old] != usize::MAX {
                return Err(Error::ShapeMismatch { what: "agent permutation".into() });
            }
            inv[old] = new;
        }
        if perm.len() != k {
            return Err(Error::ShapeMismatch { what: "agent permutation".into() });
        }
        let sys = &self.system;
        let pick = |v: &Vec<usize>| perm.iter().map(|&o| v[o]).collect::<Vec<_>>();
        let mut out = sys.clone();
        out.control_sizes = pick(&sys.control_sizes);
        out.observation_sizes = pick(&sys.observation_sizes);
        out.noises = perm.iter().map(|&o| sys.noises[o].clone()).collect();
        out.observation = perm.iter().map(|&o| sys.observation[o].clone()).collect();
        // joint index in the new labelling -> joint index in the old one
        let old_of_new: Vec<usize> = (0..out.joint_controls())
            .map(|idx| {
                let u_new = out.split_joint(idx);
                let mut u_old = vec![0; k];
                for (n, &o) in perm.iter().enumerate() {
                    u_old[o] = u_new[n];
                }
                sys.joint_index(&u_old)
            })
            .collect();
        out.transition = sys
            .transition
            .iter()
            .map(|by_x| by_x.iter().map(|by_u| old_of_new.iter().map(|&o| by_u[o].clone()).collect()).collect())
            .collect();
        out.cost = sys
            .cost
            .iter()
            .map(|by_x| by_x.iter().map(|by_u| old_of_new.iter().map(|&o| by_u[o]).collect()).collect())
            .collect();
        let network = NetworkSpec {
            agents: self.network.agents,
            links: self
                .network
                .links
                .iter()
                .map(|l| Link { from: inv[l.from], to: inv[l.to], delay: l.delay })
                .collect(),
        };
        let static_memory = self.static_memory.as_ref().map(|obs| {
            perm.iter()
                .map(|&o| {
                    let mut v: Vec<usize> = obs[o].iter().map(|&j| inv[j - 1] + 1).collect();
                    v.sort_unstable();
                    v
                })
                .collect()
        });
        Ok(Instance { network, system: out, static_memory })
    }
}

fn check_dist(what: impl Fn() -> String, p: &[f64], size: usize) -> Result<()> {
    if p.len() != size {
        return Err(Error::ShapeMismatch { what: format!("{} has {} entries, expected {}", what(), p.len(), size) });
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) || (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::DistributionNotNormalized { what: what(), sum });
    }
    Ok(())
}

fn check_primitive(name: &str, prim: &Primitive, needed: usize, horizon: usize) -> Result<()> {
    if prim.size == 0 {
        return Err(Error::ShapeMismatch { what: format!("{name}.size must be positive") });
    }
    match &prim.probs_per_t {
        TimeProbs::Constant(p) => check_dist(|| format!("{name}.probs_per_t"), p, prim.size),
        TimeProbs::PerTime(ps) => {
            if ps.len() < needed || ps.len() > horizon + 1 {
                return Err(Error::ShapeMismatch {
                    what: format!("{name}.probs_per_t has {} time steps, expected {needed}..={}", ps.len(), horizon + 1),
                });
            }
            for (t, p) in ps.iter().enumerate() {
                check_dist(|| format!("{name}.probs_per_t[{t}]"), p, prim.size)?;
            }
            Ok(())
        }
    }
}

fn shape(what: impl Into<String>, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch { what: format!("{} has {got} entries, expected {want}", what.into()) });
    }
    Ok(())
}

pub fn validate_instance(system: &SystemSpec, network: &NetworkSpec) -> Result<()> {
    validate_network(network)?;
    let k = system.agents();
    if k != network.agents {
        return Err(Error::AgentCountMismatch { network: network.agents, system: k });
    }
    shape("system.observation_sizes", system.observation_sizes.len(), k)?;
    shape("system.noises", system.noises.len(), k)?;
    if system.state_size == 0 || system.control_sizes.contains(&0) || system.observation_sizes.contains(&0) {
        return Err(Error::ShapeMismatch { what: "alphabet sizes must be positive".into() });
    }
    let horizon = system.horizon;
    check_dist(|| "system.initial_probs".into(), &system.initial_probs, system.state_size)?;
    check_primitive("system.disturbance", &system.disturbance, horizon, horizon)?;
    for (j, n) in system.noises.iter().enumerate() {
        check_primitive(&format!("system.noises[{j}]"), n, horizon + 1, horizon)?;
    }
    let nx = system.state_size;
    let nu = system.joint_controls();
    let nw = system.disturbance.size;
    if system.transition.len() < horizon || system.transition.len() > horizon + 1 {
        return Err(Error::ShapeMismatch {
            what: format!("system.transition has {} time steps, expected {horizon}", system.transition.len()),
        });
    }
    for (t, by_x) in system.transition.iter().enumerate() {
        shape(format!("system.transition[{t}]"), by_x.len(), nx)?;
        for (x, by_u) in by_x.iter().enumerate() {
            shape(format!("system.transition[{t}][{x}]"), by_u.len(), nu)?;
            for (u, by_w) in by_u.iter().enumerate() {
                shape(format!("system.transition[{t}][{x}][{u}]"), by_w.len(), nw)?;
                if let Some(&bad) = by_w.iter().find(|&&v| v >= nx) {
                    return Err(Error::OutOfRange { what: format!("system.transition[{t}][{x}][{u}]"), value: bad, size: nx });
                }
            }
        }
    }
    shape("system.observation", system.observation.len(), k)?;
    for (j, by_t) in system.observation.iter().enumerate() {
        shape(format!("system.observation[{j}]"), by_t.len(), horizon + 1)?;
        let nv = system.noises[j].size;
        let ny = system.observation_sizes[j];
        for (t, by_x) in by_t.iter().enumerate() {
            shape(format!("system.observation[{j}][{t}]"), by_x.len(), nx)?;
            for (x, by_v) in by_x.iter().enumerate() {
                shape(format!("system.observation[{j}][{t}][{x}]"), by_v.len(), nv)?;
                if let Some(&bad) = by_v.iter().find(|&&v| v >= ny) {
                    return Err(Error::OutOfRange { what: format!("system.observation[{j}][{t}][{x}]"), value: bad, size: ny });
                }
            }
        }
    }
    shape("system.cost", system.cost.len(), horizon + 1)?;
    for (t, by_x) in system.cost.iter().enumerate() {
        shape(format!("system.cost[{t}]"), by_x.len(), nx)?;
        for (x, by_u) in by_x.iter().enumerate() {
            shape(format!("system.cost[{t}][{x}]"), by_u.len(), nu)?;
            if by_u.iter().any(|c| !c.is_finite()) {
                return Err(Error::ShapeMismatch { what: format!("system.cost[{t}][{x}] has a non-finite entry") });
            }
        }
    }
    Ok(())
}

/// A validated instance with precomputed information structure and supports.
#[derive(Debug, Clone)]
pub struct Problem {
    instance: Instance,
    source: InfoSource,
    tables: InfoTables,
    card: Cardinalities,
    memory_spaces: Vec<Vec<Space>>,
    memory_slots: Vec<Vec<Vec<usize>>>,
    x0_support: Vec<(usize, f64)>,
    w_support: Vec<Vec<(usize, f64)>>,
    v_support: Vec<Vec<(Vec<usize>, f64)>>,
}

fn support(p: &[f64]) -> Vec<(usize, f64)> {
    p.iter().copied().enumerate().filter(|&(_, q)| q > 0.0).collect()
}

impl Problem {
    pub fn new(instance: Instance) -> Result<Problem> {
        validate_instance(&instance.system, &instance.network)?;
        let sys = &instance.system;
        let k = sys.agents();
        let source = match &instance.static_memory {
            None => InfoSource::Delays(compute_delay_matrix(&instance.network)?),
            Some(obs) => {
                if sys.horizon != 0 {
                    return Err(Error::ShapeMismatch { what: "static_memory requires horizon 0".into() });
                }
                shape("static_memory", obs.len(), k)?;
                let mut observed = Vec::with_capacity(k);
                for list in obs {
                    let mut v = Vec::with_capacity(list.len());
                    for &j in list {
                        if j == 0 || j > k {
                            return Err(Error::AgentOutOfRange { index: j, agents: k });
                        }
                        v.push(j - 1);
                    }
                    v.sort_unstable();
                    v.dedup();
                    observed.push(v);
                }
                InfoSource::Static { observed }
            }
        };
        let horizon = sys.horizon;
        let tables = InfoTables::build(&source, horizon);
        let card = sys.cardinalities();
        let memory_spaces: Vec<Vec<Space>> = (0..=horizon)
            .map(|t| (0..k).map(|j| Space::of_schema(tables.memory(t, j), &card)).collect())
            .collect();
        let memory_slots = (0..=horizon)
            .map(|t| (0..k).map(|j| tables.memory(t, j).iter().map(|v| slot_of(k, v)).collect()).collect())
            .collect();
        let x0_support = support(&sys.initial_probs);
        let w_support = (0..horizon).map(|t| support(sys.disturbance.probs_per_t.at(t))).collect();
        let v_support = (0..=horizon)
            .map(|t| {
                let mut joint: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
                for n in &sys.noises {
                    let marg = support(n.probs_per_t.at(t));
                    joint = joint
                        .into_iter()
                        .flat_map(|(v, p)| {
                            marg.iter().map(move |&(x, q)| {
                                let mut v = v.clone();
                                v.push(x);
                                (v, p * q)
                            })
                        })
                        .collect();
                }
                joint
            })
            .collect();
        Ok(Problem { instance, source, tables, card, memory_spaces, memory_slots, x0_support, w_support, v_support })
    }

    pub fn from_json(text: &str) -> Result<Problem> {
        Instance::from_json(text)?.validate()
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn system(&self) -> &SystemSpec {
        &self.instance.system
    }

    pub fn source(&self) -> &InfoSource {
        &self.source
    }

    pub fn tables(&self) -> &InfoTables {
        &self.tables
    }

    pub fn card(&self) -> &Cardinalities {
        &self.card
    }

    pub fn agents(&self) -> usize {
        self.instance.system.agents()
    }

    pub fn horizon(&self) -> usize {
        self.instance.system.horizon
    }

    pub fn memory_space(&self, t: usize, k: usize) -> &Space {
        &self.memory_spaces[t][k]
    }

    /// Positive-probability initial states.
    pub fn x0_support(&self) -> &[(usize, f64)] {
        &self.x0_support
    }

    /// Positive-probability disturbances at time `t < T`.
    pub fn w_support(&self, t: usize) -> &[(usize, f64)] {
        &self.w_support[t]
    }

    /// Positive-probability joint noise vectors at time `t`.
    pub fn v_support(&self, t: usize) -> &[(Vec<usize>, f64)] {
        &self.v_support[t]
    }

    pub fn next_state(&self, t: usize, x: usize, u: &[usize], w: usize) -> usize {
        let sys = &self.instance.system;
        sys.transition[t][x][sys.joint_index(u)][w]
    }

    pub fn observe(&self, k: usize, t: usize, x: usize, v: usize) -> usize {
        self.instance.system.observation[k][t][x][v]
    }

    pub fn stage_cost(&self, t: usize, x: usize, u: &[usize]) -> f64 {
        let sys = &self.instance.system;
        sys.cost[t][x][sys.joint_index(u)]
    }

    /// Checks that every law's table covers exactly the memory realizations and
    /// stays within the control alphabet.
    pub fn check_strategy(&self, g: &ControlStrategy) -> Result<()> {
        let k = self.agents();
        if g.laws.len() != self.horizon() + 1 {
            return Err(Error::DomainMismatch {
                what: format!("strategy has {} stages, expected {}", g.laws.len(), self.horizon() + 1),
            });
        }
        for (t, stage) in g.laws.iter().enumerate() {
            if stage.len() != k {
                return Err(Error::DomainMismatch { what: format!("stage {t} has {} agents, expected {k}", stage.len()) });
            }
            for (j, table) in stage.iter().enumerate() {
                let want = self.memory_spaces[t][j].size();
                if table.len() != want {
                    return Err(Error::DomainMismatch {
                        what: format!("g[{t}][{}] has {} entries, memory has {want} realizations", j + 1, table.len()),
                    });
                }
                let nu = self.card.controls[j];
                if let Some(&bad) = table.iter().find(|&&u| u >= nu) {
                    return Err(Error::OutOfRange { what: format!("g[{t}][{}]", j + 1), value: bad, size: nu });
                }
            }
        }
        Ok(())
    }

    fn controls(&self, g: &ControlStrategy, t: usize, hist: &[u32]) -> Vec<usize> {
        (0..self.agents())
            .map(|j| {
                let space = &self.memory_spaces[t][j];
                let slots = &self.memory_slots[t][j];
                let idx = slots
                    .iter()
                    .zip(space.radices())
                    .fold(0, |acc, (&s, &r)| acc * r + hist[s] as usize);
                g.laws[t][j][idx]
            })
            .collect()
    }

    fn history_len(&self) -> usize {
        (self.horizon() + 1) * self.agents() * 2
    }
}

/// Position of a variable in a flat history vector.
pub(crate) fn slot_of(agents: usize, v: &VariableId) -> usize {
    (v.time * agents + v.agent) * 2 + usize::from(v.kind == VarKind::Control)
}

const UNSET: u32 = u32::MAX;

/// `laws[t][k][m]` is agent `k`'s control at time `t` for memory realization index `m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlStrategy {
    pub laws: Vec<Vec<Vec<usize>>>,
}

impl ControlStrategy {
    /// The strategy that always plays control 0.
    pub fn zeros(problem: &Problem) -> Self {
        let laws = (0..=problem.horizon())
            .map(|t| (0..problem.agents()).map(|k| vec![0; problem.memory_space(t, k).size()]).collect())
            .collect();
        ControlStrategy { laws }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub expected_cost: f64,
    pub per_stage_costs: Vec<f64>,
    pub method: CostMethod,
    pub stderr: Option<f64>,
    pub sample_count: Option<u64>,
    pub seed: Option<u64>,
}

pub fn exact_strategy_cost(problem: &Problem, g: &ControlStrategy) -> Result<CostReport> {
    problem.check_strategy(g)?;
    let k = problem.agents();
    let horizon = problem.horizon();
    let mut atoms: BTreeMap<(usize, Vec<u32>), f64> = BTreeMap::new();
    for &(x, px) in problem.x0_support() {
        for (v, pv) in problem.v_support(0) {
            let mut hist = vec![UNSET; problem.history_len()];
            for j in 0..k {
                hist[slot_of(k, &VariableId::obs(j, 0))] = problem.observe(j, 0, x, v[j]) as u32;
            }
            *atoms.entry((x, hist)).or_insert(0.0) += px * pv;
        }
    }
    let mut per_stage = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let mut stage = 0.0;
        let mut next: BTreeMap<(usize, Vec<u32>), f64> = BTreeMap::new();
        for ((x, mut hist), p) in atoms {
            let u = problem.controls(g, t, &hist);
            stage += p * problem.stage_cost(t, x, &u);
            if t == horizon {
                continue;
            }
            for j in 0..k {
                hist[slot_of(k, &VariableId::ctrl(j, t))] = u[j] as u32;
            }
            for &(w, pw) in problem.w_support(t) {
                let x2 = problem.next_state(t, x, &u, w);
                for (v, pv) in problem.v_support(t + 1) {
                    let mut h2 = hist.clone();
                    for j in 0..k {
                        h2[slot_of(k, &VariableId::obs(j, t + 1))] = problem.observe(j, t + 1, x2, v[j]) as u32;
                    }
                    *next.entry((x2, h2)).or_insert(0.0) += p * pw * pv;
                }
            }
        }
        per_stage.push(stage);
        atoms = next;
    }
    Ok(CostReport {
        expected_cost: per_stage.iter().sum(),
        per_stage_costs: per_stage,
        method: CostMethod::Exact,
        stderr: None,
        sample_count: None,
        seed: None,
    })
}

struct Sampler {
    x0: WeightedIndex<f64>,
    w: Vec<WeightedIndex<f64>>,
    v: Vec<Vec<WeightedIndex<f64>>>,
}

impl Sampler {
    fn new(problem: &Problem) -> Self {
        let sys = problem.system();
        let wi = |p: &[f64]| WeightedIndex::new(p).expect("validated distribution");
        Sampler {
            x0: wi(&sys.initial_probs),
            w: (0..sys.horizon).map(|t| wi(sys.disturbance.probs_per_t.at(t))).collect(),
            v: (0..=sys.horizon).map(|t| sys.noises.iter().map(|n| wi(n.probs_per_t.at(t))).collect()).collect(),
        }
    }
}

pub fn monte_carlo_cost(problem: &Problem, g: &ControlStrategy, samples: u64, seed: u64) -> Result<CostReport> {
    problem.check_strategy(g)?;
    if samples == 0 {
        return Err(Error::OutOfRange { what: "samples".into(), value: 0, size: 0 });
    }
    let k = problem.agents();
    let horizon = problem.horizon();
    let sampler = Sampler::new(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stage_sums = vec![0.0; horizon + 1];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut hist = vec![UNSET; problem.history_len()];
    for _ in 0..samples {
        let mut x = sampler.x0.sample(&mut rng);
        for j in 0..k {
            let v = sampler.v[0][j].sample(&mut rng);
            hist[slot_of(k, &VariableId::obs(j, 0))] = problem.observe(j, 0, x, v) as u32;
        }
        let mut total = 0.0;
        for t in 0..=horizon {
            let u = problem.controls(g, t, &hist);
            let c = problem.stage_cost(t, x, &u);
            stage_sums[t] += c;
            total += c;
            if t == horizon {
                break;
            }
            for j in 0..k {
                hist[slot_of(k, &VariableId::ctrl(j, t))] = u[j] as u32;
            }
            let w = sampler.w[t].sample(&mut rng);
            x = problem.next_state(t, x, &u, w);
            for j in 0..k {
                let v = sampler.v[t + 1][j].sample(&mut rng);
                hist[slot_of(k, &VariableId::obs(j, t + 1))] = problem.observe(j, t + 1, x, v) as u32;
            }
        }
        sum += total;
        sum_sq += total * total;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(CostReport {
        expected_cost: mean,
        per_stage_costs: stage_sums.iter().map(|s| s / n).collect(),
        method: CostMethod::MonteCarlo,
        stderr: Some((var / n).sqrt()),
        sample_count: Some(samples),
        seed: Some(seed),
    })
}
