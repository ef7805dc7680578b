//! Backward recursion over the beliefs of the last agent, with the decisions of an
//! owner agent organized as nested groups of accessible-information branches.

use std::collections::HashMap;

use crate::belief::{belief_key, BeliefModel, InformationState};
use crate::error::{Error, Result};
use crate::prescription::{PrescriptionLaw, PrescriptionStrategy};
use crate::space::Space;
use crate::sysmodel::Problem;

const IMPROVEMENT: f64 = 1e-12;

/// How branches of one level share a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Grouping {
    /// Branches with the same parent group and the same rounded belief share a table,
    /// and only positive-probability domain entries are searched.
    Belief,
    /// Every branch decides on its own, over the full domain.
    Realization,
}

#[derive(Debug)]
struct Level {
    targets: Vec<usize>,
    sub: Space,
    sub_proj: Vec<usize>,
    belief: Space,
    belief_proj: Vec<usize>,
    domains: Vec<Space>,
    dom_proj: Vec<Vec<usize>>,
    acc: Space,
    // A^i coordinate taken from a^K (true) or from the branch realization (false)
    acc_plan: Vec<(bool, usize)>,
}

#[derive(Debug)]
struct Group {
    branches: Vec<usize>,
    members: Vec<usize>,
    entries: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    radices: Vec<usize>,
}

#[derive(Debug)]
struct Analysis {
    // (state index, probability, state value)
    support: Vec<(usize, f64, usize)>,
    groups: Vec<Vec<Group>>,
    children: Vec<Vec<Vec<usize>>>,
    group_of: Vec<Vec<usize>>,
    // per support member and target: (level, flat position inside the member's group)
    slots: Vec<Vec<(usize, usize)>>,
}

type Choice = Vec<Vec<Vec<usize>>>;

struct Memo {
    value: f64,
    choice: Choice,
}

/// A reached belief of the last agent, for reporting.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BeliefRecord {
    pub accessible: Vec<usize>,
    pub state: InformationState,
}

pub(crate) struct Engine<'a> {
    problem: &'a Problem,
    owner: usize,
    grouping: Grouping,
    top: BeliefModel<'a>,
    layouts: Vec<Vec<Level>>,
    cap: u64,
    memo: HashMap<(usize, Vec<i64>), Memo>,
    pub search: u128,
}

pub(crate) struct EngineOutput {
    pub value: f64,
    pub strategy: PrescriptionStrategy,
    pub beliefs: Vec<BeliefRecord>,
    pub search: u128,
}

fn advance(odo: &mut [usize], radices: &[usize]) -> bool {
    for pos in (0..odo.len()).rev() {
        odo[pos] += 1;
        if odo[pos] < radices[pos] {
            return true;
        }
        odo[pos] = 0;
    }
    false
}

fn checked_product(radices: &[usize], cap: u64) -> Result<u64> {
    let mut total: u128 = 1;
    for &r in radices {
        total *= r as u128;
        if total > cap as u128 {
            return Err(Error::CapExceeded { required: format!("more than {cap} joint tables"), cap });
        }
    }
    Ok(total as u64)
}

impl<'a> Engine<'a> {
    pub fn new(problem: &'a Problem, owner: usize, grouping: Grouping, cap: u64) -> Result<Self> {
        let agents = problem.agents();
        if owner >= agents {
            return Err(Error::AgentOutOfRange { index: owner + 1, agents });
        }
        let last = agents - 1;
        let top = BeliefModel::new(problem, last)?;
        let tables = problem.tables();
        let card = problem.card();
        let mut layouts = Vec::with_capacity(problem.horizon() + 1);
        for t in 0..=problem.horizon() {
            let space = top.state_space(t);
            let acc_top = top.accessible_space(t);
            let mut levels = Vec::new();
            for i in (owner..agents).rev() {
                let targets: Vec<usize> = if i == owner { (0..=owner).collect() } else { vec![i] };
                let sub = Space::of_schema(&tables.accessible(t, i).difference(tables.accessible(t, last)), card);
                let belief = Space::with_state(tables.equivalent(t, i), card);
                let domains: Vec<Space> =
                    targets.iter().map(|&j| Space::of_schema(tables.prescription_domain(t, owner, j), card)).collect();
                let dom_proj = domains.iter().map(|d| space.projector(d)).collect::<Result<Vec<_>>>()?;
                let acc = Space::of_schema(tables.accessible(t, i), card);
                let acc_plan = acc
                    .coords()
                    .iter()
                    .map(|c| match acc_top.position(c) {
                        Some(p) => (true, p),
                        None => (false, sub.position(c).expect("accessible split")),
                    })
                    .collect();
                levels.push(Level {
                    targets,
                    sub_proj: space.projector(&sub)?,
                    sub,
                    belief_proj: space.projector(&belief)?,
                    belief,
                    domains,
                    dom_proj,
                    acc,
                    acc_plan,
                });
            }
            layouts.push(levels);
        }
        Ok(Engine { problem, owner, grouping, top, layouts, cap, memo: HashMap::new(), search: 0 })
    }

    fn analyze(&self, t: usize, probs: &[f64]) -> Result<Analysis> {
        let space = self.top.state_space(t);
        let card = self.problem.card();
        let levels = &self.layouts[t];
        let mut support = Vec::new();
        let mut values = Vec::new();
        for (si, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                let v = space.decode(si);
                support.push((si, p, v[0]));
                values.push(v);
            }
        }
        let n = support.len();
        let mut groups: Vec<Vec<Group>> = Vec::new();
        let mut children: Vec<Vec<Vec<usize>>> = Vec::new();
        let mut group_of: Vec<Vec<usize>> = Vec::new();
        for (l, level) in levels.iter().enumerate() {
            let branch: Vec<usize> = values.iter().map(|v| level.sub.encode_projected(v, &level.sub_proj)).collect();
            let parent: Vec<usize> = if l == 0 { vec![0; n] } else { group_of[l - 1].clone() };
            // group key per branch
            let mut keys: HashMap<usize, (usize, Vec<i64>)> = HashMap::new();
            match self.grouping {
                Grouping::Realization => {
                    for m in 0..n {
                        keys.insert(branch[m], (parent[m], vec![branch[m] as i64]));
                    }
                }
                Grouping::Belief => {
                    let mut beliefs: HashMap<usize, Vec<f64>> = HashMap::new();
                    for m in 0..n {
                        let b = beliefs.entry(branch[m]).or_insert_with(|| vec![0.0; level.belief.size()]);
                        b[level.belief.encode_projected(&values[m], &level.belief_proj)] += support[m].1;
                    }
                    for m in 0..n {
                        if keys.contains_key(&branch[m]) {
                            continue;
                        }
                        let b = &beliefs[&branch[m]];
                        let total: f64 = b.iter().sum();
                        let normalized: Vec<f64> = b.iter().map(|q| q / total).collect();
                        keys.insert(branch[m], (parent[m], belief_key(&normalized)));
                    }
                }
            }
            let mut ids: HashMap<(usize, Vec<i64>), usize> = HashMap::new();
            let mut level_groups: Vec<Group> = Vec::new();
            let parents_here = if l == 0 { 1 } else { groups[l - 1].len() };
            let mut level_children = vec![Vec::new(); parents_here];
            let mut of = vec![0; n];
            for m in 0..n {
                let key = keys[&branch[m]].clone();
                let next_id = level_groups.len();
                let id = *ids.entry(key).or_insert(next_id);
                if id == next_id {
                    level_groups.push(Group {
                        branches: Vec::new(),
                        members: Vec::new(),
                        entries: Vec::new(),
                        offsets: Vec::new(),
                        radices: Vec::new(),
                    });
                    level_children[parent[m]].push(id);
                }
                let g = &mut level_groups[id];
                if !g.branches.contains(&branch[m]) {
                    g.branches.push(branch[m]);
                }
                g.members.push(m);
                of[m] = id;
            }
            for g in level_groups.iter_mut() {
                g.branches.sort_unstable();
                for (ti, &j) in level.targets.iter().enumerate() {
                    let entries: Vec<usize> = match self.grouping {
                        Grouping::Realization => (0..level.domains[ti].size()).collect(),
                        Grouping::Belief => {
                            let mut e: Vec<usize> = g
                                .members
                                .iter()
                                .map(|&m| level.domains[ti].encode_projected(&values[m], &level.dom_proj[ti]))
                                .collect();
                            e.sort_unstable();
                            e.dedup();
                            e
                        }
                    };
                    g.offsets.push(g.radices.len());
                    g.radices.extend(std::iter::repeat_n(card.controls[j], entries.len()));
                    g.entries.push(entries);
                }
                checked_product(&g.radices, self.cap)?;
            }
            groups.push(level_groups);
            children.push(level_children);
            group_of.push(of);
        }
        let agents = self.problem.agents();
        let slots = (0..n)
            .map(|m| {
                let mut row = vec![(0, 0); agents];
                for (l, level) in levels.iter().enumerate() {
                    let g = &groups[l][group_of[l][m]];
                    for (ti, &j) in level.targets.iter().enumerate() {
                        let d = level.domains[ti].encode_projected(&values[m], &level.dom_proj[ti]);
                        let pos = g.entries[ti].binary_search(&d).expect("entry present");
                        row[j] = (l, g.offsets[ti] + pos);
                    }
                }
                row
            })
            .collect();
        Ok(Analysis { support, groups, children, group_of, slots })
    }

    fn controls(an: &Analysis, vals: &Choice, m: usize) -> Vec<usize> {
        an.slots[m].iter().map(|&(l, pos)| vals[l][an.group_of[l][m]][pos]).collect()
    }

    fn empty_choice(an: &Analysis) -> Choice {
        an.groups.iter().map(|gs| gs.iter().map(|g| vec![0; g.radices.len()]).collect()).collect()
    }

    fn best_in_group(&self, t: usize, an: &Analysis, l: usize, g: usize, vals: &mut Choice, count: &mut u128) -> (f64, Vec<(usize, usize, Vec<usize>)>) {
        let group = &an.groups[l][g];
        let mut odo = vec![0; group.radices.len()];
        let mut best = (f64::INFINITY, Vec::new());
        loop {
            vals[l][g].clone_from(&odo);
            let (v, mut picked) = if l + 1 == an.groups.len() {
                *count += 1;
                let v = group
                    .members
                    .iter()
                    .map(|&m| {
                        let (_, p, x) = an.support[m];
                        p * self.problem.stage_cost(t, x, &Self::controls(an, vals, m))
                    })
                    .sum();
                (v, Vec::new())
            } else {
                let mut total = 0.0;
                let mut picked = Vec::new();
                for &c in &an.children[l + 1][g] {
                    let (cv, cp) = self.best_in_group(t, an, l + 1, c, vals, count);
                    total += cv;
                    picked.extend(cp);
                }
                (total, picked)
            };
            if v < best.0 - IMPROVEMENT {
                picked.insert(0, (l, g, odo.clone()));
                best = (v, picked);
            }
            if !advance(&mut odo, &group.radices) {
                break;
            }
        }
        best
    }

    fn nested_min(&self, t: usize, an: &Analysis) -> (f64, Choice, u128) {
        let mut vals = Self::empty_choice(an);
        let mut count = 0;
        let (v, picked) = self.best_in_group(t, an, 0, 0, &mut vals, &mut count);
        let mut choice = Self::empty_choice(an);
        for (l, g, flat) in picked {
            choice[l][g] = flat;
        }
        (v, choice, count)
    }

    fn joint_min(&mut self, t: usize, an: &Analysis) -> Result<(f64, Choice, u128)> {
        let radices: Vec<usize> = an.groups.iter().flatten().flat_map(|g| g.radices.iter().copied()).collect();
        checked_product(&radices, self.cap)?;
        let mut odo = vec![0; radices.len()];
        let mut vals = Self::empty_choice(an);
        let mut best = (f64::INFINITY, Self::empty_choice(an));
        let mut count = 0;
        loop {
            let mut pos = 0;
            for gs in vals.iter_mut() {
                for flat in gs.iter_mut() {
                    let len = flat.len();
                    flat.copy_from_slice(&odo[pos..pos + len]);
                    pos += len;
                }
            }
            let controls: Vec<Vec<usize>> = (0..an.support.len()).map(|m| Self::controls(an, &vals, m)).collect();
            let stage: f64 = an
                .support
                .iter()
                .zip(&controls)
                .map(|(&(_, p, x), u)| p * self.problem.stage_cost(t, x, u))
                .sum();
            let branches = self
                .top
                .successors_from(t, an.support.iter().zip(&controls).map(|(&(si, p, _), u)| (si, p, u.as_slice())));
            let mut q = stage;
            for b in branches {
                q += b.prob * self.value(t + 1, &b.next)?;
            }
            count += 1;
            if q < best.0 - IMPROVEMENT {
                best = (q, vals.clone());
            }
            if !advance(&mut odo, &radices) {
                break;
            }
        }
        Ok((best.0, best.1, count))
    }

    /// Optimal cost-to-go from a belief of the last agent at time `t`.
    pub fn value(&mut self, t: usize, probs: &[f64]) -> Result<f64> {
        let key = (t, belief_key(probs));
        if let Some(m) = self.memo.get(&key) {
            return Ok(m.value);
        }
        let an = self.analyze(t, probs)?;
        let (value, choice, count) = if t == self.problem.horizon() { self.nested_min(t, &an) } else { self.joint_min(t, &an)? };
        self.search += count;
        self.memo.insert(key, Memo { value, choice });
        if self.memo.len() as u64 > self.cap {
            return Err(Error::CapExceeded { required: format!("more than {} reachable beliefs", self.cap), cap: self.cap });
        }
        Ok(value)
    }

    pub fn solve(mut self) -> Result<EngineOutput> {
        let initial = self.top.initial_weighted();
        let mut value = 0.0;
        for (p, st) in initial.values() {
            value += p * self.value(0, &st.probs)?;
        }
        let (strategy, beliefs) = self.emit(&initial)?;
        Ok(EngineOutput { value, strategy, beliefs, search: self.search })
    }

    fn emit(&self, initial: &std::collections::BTreeMap<usize, (f64, InformationState)>) -> Result<(PrescriptionStrategy, Vec<BeliefRecord>)> {
        let problem = self.problem;
        let tables = problem.tables();
        let card = problem.card();
        let owner = self.owner;
        let mut laws: Vec<Vec<PrescriptionLaw>> = (0..=problem.horizon())
            .map(|t| {
                (0..problem.agents())
                    .map(|j| {
                        let conditioning = tables.prescription_conditioning(t, owner, j).clone();
                        let domain = tables.prescription_domain(t, owner, j).clone();
                        let nc = Space::of_schema(&conditioning, card).size();
                        let nd = Space::of_schema(&domain, card).size();
                        PrescriptionLaw { target: j, conditioning, domain, tables: vec![vec![0; nd]; nc] }
                    })
                    .collect()
            })
            .collect();
        let mut beliefs = Vec::new();
        let mut frontier: Vec<(Vec<usize>, Vec<f64>)> = initial
            .iter()
            .map(|(&a, (_, st))| (self.top.accessible_space(0).decode(a), st.probs.clone()))
            .collect();
        for t in 0..=problem.horizon() {
            let mut next_frontier = Vec::new();
            for (a_top, probs) in frontier {
                let memo = self.memo.get(&(t, belief_key(&probs))).expect("reached belief was solved");
                let an = self.analyze(t, &probs)?;
                for (l, level) in self.layouts[t].iter().enumerate() {
                    for (g, group) in an.groups[l].iter().enumerate() {
                        let flat = &memo.choice[l][g];
                        for &e in &group.branches {
                            let ev = level.sub.decode(e);
                            let a: Vec<usize> =
                                level.acc_plan.iter().map(|&(top, p)| if top { a_top[p] } else { ev[p] }).collect();
                            let cond = level.acc.encode(&a);
                            for (ti, &j) in level.targets.iter().enumerate() {
                                let table = &mut laws[t][j].tables[cond];
                                for (idx, &entry) in group.entries[ti].iter().enumerate() {
                                    table[entry] = flat[group.offsets[ti] + idx];
                                }
                            }
                        }
                    }
                }
                if t < problem.horizon() {
                    let controls: Vec<Vec<usize>> =
                        (0..an.support.len()).map(|m| Self::controls(&an, &memo.choice, m)).collect();
                    let branches = self
                        .top
                        .successors_from(t, an.support.iter().zip(&controls).map(|(&(si, p, _), u)| (si, p, u.as_slice())));
                    for b in branches {
                        let z = self.top.new_info_space(t).decode(b.z);
                        next_frontier.push((self.top.extend_accessible(t, &a_top, &z), b.next));
                    }
                }
                beliefs.push(BeliefRecord { accessible: a_top, state: self.top.state(t, probs) });
            }
            frontier = next_frontier;
        }
        Ok((PrescriptionStrategy { owner, laws }, beliefs))
    }
}
