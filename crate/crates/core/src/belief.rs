//! Equivalent-state system, information-state filter and connection terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infostruct::{InfoSchema, VarKind, VariableId};
use crate::prescription::{CompletePrescription, PrescriptionStrategy};
use crate::space::{Coord, Space};
use crate::sysmodel::Problem;

/// Probabilities below this are treated as impossible when normalizing.
pub const NORMALIZER_FLOOR: f64 = 1e-12;

/// Distribution of `S_t^agent` given accessible information and past prescriptions.
/// Coordinate 0 is the state; the remaining coordinates follow `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationState {
    pub agent: usize,
    pub time: usize,
    pub support: InfoSchema,
    pub probs: Vec<f64>,
}

impl InformationState {
    /// Memo key: probabilities rounded to 12 decimals.
    pub fn key(&self) -> Vec<i64> {
        belief_key(&self.probs)
    }
}

pub fn belief_key(probs: &[f64]) -> Vec<i64> {
    probs.iter().map(|p| (p * 1e12).round() as i64).collect()
}

/// `Λ_t^[k,i]`: the law of `A_t^k \ A_t^i` given agent `i`'s accessible information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionTerm {
    pub k: usize,
    pub i: usize,
    pub time: usize,
    pub support: InfoSchema,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    State,
    Current(usize),
    NewObs(usize),
    NewCtrl(usize),
}

#[derive(Debug, Clone)]
struct Stage {
    space: Space,
    accessible: Space,
    domains: Vec<Space>,
    // domain realization index of every equivalent-state realization, per target
    domain_index: Vec<Vec<usize>>,
    step: Option<Step>,
}

#[derive(Debug, Clone)]
struct Step {
    new_info: Space,
    z_plan: Vec<Source>,
    next_plan: Vec<Source>,
    // A_{t+1} coordinate from A_t (true) or from Z_{t+1} (false)
    acc_plan: Vec<(bool, usize)>,
}

/// One successor of a belief: the new-information index, its probability and the
/// updated belief.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub z: usize,
    pub prob: f64,
    pub next: Vec<f64>,
}

/// Precomputed equivalent-state layout of one agent for every stage.
#[derive(Debug, Clone)]
pub struct BeliefModel<'a> {
    problem: &'a Problem,
    agent: usize,
    stages: Vec<Stage>,
}

fn plan(t: usize, from: &Space, to: &Space) -> Result<Vec<Source>> {
    to.coords()
        .iter()
        .map(|c| match c {
            Coord::State => Ok(Source::State),
            Coord::Var(v) if v.time == t + 1 && v.kind == VarKind::Observation => Ok(Source::NewObs(v.agent)),
            Coord::Var(v) if v.time == t && v.kind == VarKind::Control => Ok(Source::NewCtrl(v.agent)),
            Coord::Var(_) => from.position(c).map(Source::Current).ok_or_else(|| Error::SchemaMismatch {
                what: format!("{c:?} at t={} is neither new nor part of the equivalent state", t + 1),
            }),
        })
        .collect()
}

impl<'a> BeliefModel<'a> {
    pub fn new(problem: &'a Problem, agent: usize) -> Result<Self> {
        if agent >= problem.agents() {
            return Err(Error::AgentOutOfRange { index: agent + 1, agents: problem.agents() });
        }
        let tables = problem.tables();
        let card = problem.card();
        let horizon = problem.horizon();
        let mut stages = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            let space = Space::with_state(tables.equivalent(t, agent), card);
            let accessible = Space::of_schema(tables.accessible(t, agent), card);
            let mut domains = Vec::new();
            let mut domain_index = Vec::new();
            for j in 0..problem.agents() {
                let dom = Space::of_schema(tables.prescription_domain(t, agent, j), card);
                let proj = space.projector(&dom)?;
                domain_index.push((0..space.size()).map(|s| dom.encode_projected(&space.decode(s), &proj)).collect());
                domains.push(dom);
            }
            stages.push(Stage { space, accessible, domains, domain_index, step: None });
        }
        for t in 0..horizon {
            let new_info = Space::of_schema(tables.new_info(t + 1, agent), card);
            let z_plan = plan(t, &stages[t].space, &new_info)?;
            let next_plan = plan(t, &stages[t].space, &stages[t + 1].space)?;
            let acc_plan = stages[t + 1]
                .accessible
                .coords()
                .iter()
                .map(|c| match stages[t].accessible.position(c) {
                    Some(p) => Ok((true, p)),
                    None => new_info.position(c).map(|p| (false, p)).ok_or_else(|| Error::SchemaMismatch {
                        what: format!("{c:?} missing from accessible and new information"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            stages[t].step = Some(Step { new_info, z_plan, next_plan, acc_plan });
        }
        Ok(BeliefModel { problem, agent, stages })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    /// `X_t` followed by `S_t^agent`.
    pub fn state_space(&self, t: usize) -> &Space {
        &self.stages[t].space
    }

    pub fn accessible_space(&self, t: usize) -> &Space {
        &self.stages[t].accessible
    }

    pub fn domain_space(&self, t: usize, target: usize) -> &Space {
        &self.stages[t].domains[target]
    }

    /// `Z_{t+1}^agent` for `t < T`.
    pub fn new_info_space(&self, t: usize) -> &Space {
        &self.stages[t].step.as_ref().expect("t < T").new_info
    }

    /// Domain realization index of `Γ^[agent,target]` at equivalent-state index `s`.
    pub fn domain_index(&self, t: usize, target: usize, s: usize) -> usize {
        self.stages[t].domain_index[target][s]
    }

    /// `a_{t+1}` assembled from `a_t` and `z_{t+1}` (values in canonical order).
    pub fn extend_accessible(&self, t: usize, a: &[usize], z: &[usize]) -> Vec<usize> {
        let step = self.stages[t].step.as_ref().expect("t < T");
        step.acc_plan.iter().map(|&(old, p)| if old { a[p] } else { z[p] }).collect()
    }

    fn check_theta(&self, t: usize, theta: &CompletePrescription) -> Result<()> {
        let tables = self.problem.tables();
        if theta.owner != self.agent || theta.time != t || theta.components.len() != self.problem.agents() {
            return Err(Error::SchemaMismatch { what: "complete prescription owner, time or arity".into() });
        }
        for (j, p) in theta.components.iter().enumerate() {
            if &p.domain != tables.prescription_domain(t, self.agent, j) || p.table.len() != self.stages[t].domains[j].size() {
                return Err(Error::SchemaMismatch { what: format!("prescription for agent {} has the wrong domain", j + 1) });
            }
        }
        Ok(())
    }

    fn state_index(&self, t: usize, s: &[usize]) -> Result<usize> {
        self.stages[t].space.checked_encode(s)
    }

    /// Joint control produced by prescription tables (one per target) at state index `s`.
    pub fn controls(&self, t: usize, s: usize, tables: &[&[usize]]) -> Vec<usize> {
        tables.iter().enumerate().map(|(j, tb)| tb[self.stages[t].domain_index[j][s]]).collect()
    }

    fn tables_of(theta: &CompletePrescription) -> Vec<&[usize]> {
        theta.components.iter().map(|p| p.table.as_slice()).collect()
    }

    fn next_values(&self, s: &[usize], u: &[usize], x2: usize, y: &[usize], plan: &[Source]) -> Vec<usize> {
        plan.iter()
            .map(|src| match *src {
                Source::State => x2,
                Source::Current(p) => s[p],
                Source::NewObs(j) => y[j],
                Source::NewCtrl(j) => u[j],
            })
            .collect()
    }

    fn observe_all(&self, t: usize, x2: usize, v: &[usize]) -> Vec<usize> {
        (0..self.problem.agents()).map(|j| self.problem.observe(j, t + 1, x2, v[j])).collect()
    }

    /// `f̂`: next equivalent state.
    pub fn hat_dynamics(&self, t: usize, s: &[usize], w: usize, v: &[usize], theta: &CompletePrescription) -> Result<Vec<usize>> {
        self.check_theta(t, theta)?;
        let step = self.step(t)?;
        let si = self.state_index(t, s)?;
        let u = self.controls(t, si, &Self::tables_of(theta));
        let x2 = self.problem.next_state(t, s[0], &u, w);
        let y = self.observe_all(t, x2, v);
        Ok(self.next_values(s, &u, x2, &y, &step.next_plan))
    }

    /// `ĥ`: new accessible information. The disturbance enters through the next state.
    pub fn hat_observation(&self, t: usize, s: &[usize], w: usize, v: &[usize], theta: &CompletePrescription) -> Result<Vec<usize>> {
        self.check_theta(t, theta)?;
        let step = self.step(t)?;
        let si = self.state_index(t, s)?;
        let u = self.controls(t, si, &Self::tables_of(theta));
        let x2 = self.problem.next_state(t, s[0], &u, w);
        let y = self.observe_all(t, x2, v);
        Ok(self.next_values(s, &u, x2, &y, &step.z_plan))
    }

    /// `ĉ`: stage cost at an equivalent state.
    pub fn hat_cost(&self, t: usize, s: &[usize], theta: &CompletePrescription) -> Result<f64> {
        self.check_theta(t, theta)?;
        let si = self.state_index(t, s)?;
        let u = self.controls(t, si, &Self::tables_of(theta));
        Ok(self.problem.stage_cost(t, s[0], &u))
    }

    fn step(&self, t: usize) -> Result<&Step> {
        self.stages
            .get(t)
            .and_then(|s| s.step.as_ref())
            .ok_or_else(|| Error::SchemaMismatch { what: format!("no transition after t={t}") })
    }

    /// Beliefs at time 0, keyed by the index of the accessible realization.
    pub fn initial_states(&self) -> BTreeMap<usize, InformationState> {
        self.initial_weighted().into_iter().map(|(a, (_, st))| (a, st)).collect()
    }

    /// Beliefs at time 0 together with the probability of their accessible realization.
    pub fn initial_weighted(&self) -> BTreeMap<usize, (f64, InformationState)> {
        let k = self.problem.agents();
        let stage = &self.stages[0];
        let acc_pos: Vec<usize> = stage.accessible.coords().iter().map(obs_agent).collect();
        let s_pos: Vec<Option<usize>> = stage.space.coords().iter().map(|c| match c {
            Coord::State => None,
            c => Some(obs_agent(c)),
        }).collect();
        let mut joint: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &(x, px) in self.problem.x0_support() {
            for (v, pv) in self.problem.v_support(0) {
                let y: Vec<usize> = (0..k).map(|j| self.problem.observe(j, 0, x, v[j])).collect();
                let a: Vec<usize> = acc_pos.iter().map(|&j| y[j]).collect();
                let s: Vec<usize> = s_pos.iter().map(|p| p.map_or(x, |j| y[j])).collect();
                let entry = joint.entry(stage.accessible.encode(&a)).or_insert_with(|| vec![0.0; stage.space.size()]);
                entry[stage.space.encode(&s)] += px * pv;
            }
        }
        joint
            .into_iter()
            .filter_map(|(a, mut probs)| {
                let total: f64 = probs.iter().sum();
                if total <= NORMALIZER_FLOOR {
                    return None;
                }
                probs.iter_mut().for_each(|p| *p /= total);
                Some((a, (total, self.state(0, probs))))
            })
            .collect()
    }

    pub fn state(&self, t: usize, probs: Vec<f64>) -> InformationState {
        InformationState {
            agent: self.agent,
            time: t,
            support: self.problem.tables().equivalent(t, self.agent).clone(),
            probs,
        }
    }

    /// Every positive-probability new-information realization with the corresponding
    /// updated belief, ordered by realization index.
    pub fn successors(&self, t: usize, probs: &[f64], tables: &[&[usize]]) -> Vec<Branch> {
        let items: Vec<(usize, f64, Vec<usize>)> = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(si, &p)| (si, p, self.controls(t, si, tables)))
            .collect();
        self.successors_from(t, items.iter().map(|(si, p, u)| (*si, *p, u.as_slice())))
    }

    /// Like [`BeliefModel::successors`], with the joint control of each
    /// positive-probability state supplied directly as `(state index, prob, controls)`.
    pub fn successors_from<'u>(&self, t: usize, items: impl Iterator<Item = (usize, f64, &'u [usize])>) -> Vec<Branch> {
        let step = self.stages[t].step.as_ref().expect("t < T");
        let space = &self.stages[t].space;
        let next_space = &self.stages[t + 1].space;
        let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (si, p, u) in items {
            let s = space.decode(si);
            for &(w, pw) in self.problem.w_support(t) {
                let x2 = self.problem.next_state(t, s[0], u, w);
                for (v, pv) in self.problem.v_support(t + 1) {
                    let y = self.observe_all(t, x2, v);
                    let z = step.new_info.encode(&self.next_values(&s, u, x2, &y, &step.z_plan));
                    let s2 = next_space.encode(&self.next_values(&s, u, x2, &y, &step.next_plan));
                    out.entry(z).or_insert_with(|| vec![0.0; next_space.size()])[s2] += p * pw * pv;
                }
            }
        }
        out.into_iter()
            .filter_map(|(z, mut next)| {
                let total: f64 = next.iter().sum();
                if total <= NORMALIZER_FLOOR {
                    return None;
                }
                next.iter_mut().for_each(|q| *q /= total);
                Some(Branch { z, prob: total, next })
            })
            .collect()
    }

    /// Expected stage cost `Σ_s π(s) ĉ(s, θ)` for raw tables.
    pub fn expected_cost(&self, t: usize, probs: &[f64], tables: &[&[usize]]) -> f64 {
        let space = &self.stages[t].space;
        let radix_tail: usize = space.size() / self.problem.card().state;
        probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(si, &p)| p * self.problem.stage_cost(t, si / radix_tail, &self.controls(t, si, tables)))
            .sum()
    }

    /// Beliefs reached under `psi` (owned by this model's agent), keyed by the
    /// accessible realization values at each stage.
    pub fn reachable_states(&self, psi: &PrescriptionStrategy) -> Result<Vec<BTreeMap<Vec<usize>, InformationState>>> {
        if psi.owner != self.agent {
            return Err(Error::SchemaMismatch { what: "strategy owner differs from the belief model's agent".into() });
        }
        psi.check(self.problem)?;
        let mut out = Vec::with_capacity(self.stages.len());
        let first: BTreeMap<Vec<usize>, InformationState> = self
            .initial_states()
            .into_iter()
            .map(|(a, st)| (self.stages[0].accessible.decode(a), st))
            .collect();
        out.push(first);
        for t in 0..self.problem.horizon() {
            let mut next = BTreeMap::new();
            for (a, st) in &out[t] {
                let theta = psi.complete_prescription(self.problem, t, a)?;
                let tables = Self::tables_of(&theta);
                for b in self.successors(t, &st.probs, &tables) {
                    let z = self.new_info_space(t).decode(b.z);
                    next.insert(self.extend_accessible(t, a, &z), self.state(t + 1, b.next));
                }
            }
            out.push(next);
        }
        Ok(out)
    }
}

fn obs_agent(c: &Coord) -> usize {
    match c {
        Coord::Var(VariableId { kind: VarKind::Observation, agent, time: 0 }) => *agent,
        other => unreachable!("time-0 information holds only observations, got {other:?}"),
    }
}

/// Beliefs at `t = 0` for agent `k`, one per positive-probability accessible realization.
pub fn initial_information_state(problem: &Problem, k: usize) -> Result<BTreeMap<usize, InformationState>> {
    Ok(BeliefModel::new(problem, k)?.initial_states())
}

/// One filter step conditioned on the observed new information `z` (values keyed to `Z_{t+1}`).
pub fn update_information_state(
    model: &BeliefModel,
    pi: &InformationState,
    theta: &CompletePrescription,
    z: &[usize],
) -> Result<InformationState> {
    let t = pi.time;
    model.check_theta(t, theta)?;
    if pi.agent != model.agent || pi.probs.len() != model.state_space(t).size() {
        return Err(Error::SchemaMismatch { what: "information state does not match the model".into() });
    }
    let z = model.step(t)?.new_info.checked_encode(z)?;
    let tables = BeliefModel::tables_of(theta);
    model
        .successors(t, &pi.probs, &tables)
        .into_iter()
        .find(|b| b.z == z)
        .map(|b| model.state(t + 1, b.next))
        .ok_or(Error::ImpossibleObservation)
}

pub fn expected_stage_cost(model: &BeliefModel, pi: &InformationState, theta: &CompletePrescription) -> Result<f64> {
    model.check_theta(pi.time, theta)?;
    if pi.probs.len() != model.state_space(pi.time).size() {
        return Err(Error::SchemaMismatch { what: "information state length".into() });
    }
    Ok(model.expected_cost(pi.time, &pi.probs, &BeliefModel::tables_of(theta)))
}

/// Marginal of `Π_t^i` on `A_t^k \ A_t^i`, the part of agent `k`'s accessible
/// information hidden from agent `i`.
pub fn connection_term(problem: &Problem, pi_i: &InformationState, k: usize) -> Result<ConnectionTerm> {
    let (i, t) = (pi_i.agent, pi_i.time);
    if k >= i {
        return Err(Error::IndexOrder { k: k + 1, i: i + 1 });
    }
    let tables = problem.tables();
    let card = problem.card();
    let support = tables.accessible(t, k).difference(tables.accessible(t, i));
    let full = Space::with_state(tables.equivalent(t, i), card);
    if full.size() != pi_i.probs.len() {
        return Err(Error::SchemaMismatch { what: "information state length".into() });
    }
    let part = Space::of_schema(&support, card);
    let proj = full.projector(&part)?;
    let mut probs = vec![0.0; part.size()];
    for (s, &p) in pi_i.probs.iter().enumerate() {
        probs[part.encode_projected(&full.decode(s), &proj)] += p;
    }
    Ok(ConnectionTerm { k, i, time: t, support, probs })
}

/// Largest `|Π^i(s) − Π^k_{a^k}(s|S^k) · Λ(s|S^i∖S^k)|` over positive-probability `s`,
/// where `a^k` extends `accessible_i` by the connection coordinates of `s`.
/// `pi_k` maps realizations of `A_t^k` (canonical values) to agent `k`'s beliefs.
pub fn factorization_check(
    problem: &Problem,
    pi_i: &InformationState,
    accessible_i: &[usize],
    pi_k: &BTreeMap<Vec<usize>, InformationState>,
    lambda: &ConnectionTerm,
) -> Result<f64> {
    let (i, k, t) = (pi_i.agent, lambda.k, pi_i.time);
    let tables = problem.tables();
    let card = problem.card();
    let full = Space::with_state(tables.equivalent(t, i), card);
    let own = Space::with_state(tables.equivalent(t, k), card);
    let part = Space::of_schema(&lambda.support, card);
    let acc_i = Space::of_schema(tables.accessible(t, i), card);
    let acc_k = Space::of_schema(tables.accessible(t, k), card);
    if lambda.i != i || lambda.time != t || part.size() != lambda.probs.len() || full.size() != pi_i.probs.len() {
        return Err(Error::SchemaMismatch { what: "connection term does not match the information state".into() });
    }
    acc_i.checked_encode(accessible_i)?;
    let own_proj = full.projector(&own)?;
    let part_proj = full.projector(&part)?;
    // A^k coordinates come either from a^i or from the connection coordinates of s
    let acc_plan: Vec<(bool, usize)> = acc_k
        .coords()
        .iter()
        .map(|c| match acc_i.position(c) {
            Some(p) => Ok((true, p)),
            None => full.position(c).map(|p| (false, p)).ok_or_else(|| Error::SchemaMismatch {
                what: format!("{c:?} is neither accessible to agent {} nor in its equivalent state", i + 1),
            }),
        })
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (si, &p) in pi_i.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let s = full.decode(si);
        let a_k: Vec<usize> = acc_plan.iter().map(|&(from_a, pos)| if from_a { accessible_i[pos] } else { s[pos] }).collect();
        let cond = pi_k.get(&a_k).ok_or_else(|| Error::MissingConditional { realization: a_k.clone() })?;
        let lhs = cond.probs[own.encode_projected(&s, &own_proj)] * lambda.probs[part.encode_projected(&s, &part_proj)];
        worst = worst.max((p - lhs).abs());
    }
    Ok(worst)
}
