//! Exhaustive search over control strategies.
//!
//! Whenever a control `U^j_s` sits in a memory, the whole memory of agent `j` at `s`
//! does too, so controls in a memory are functions of its observations. Strategies
//! are therefore tables over the observation part of each memory. Entries for
//! unreachable observation realizations are fixed to 0, and at the final stage the
//! last agent's table is minimized entry by entry for each choice of the others.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::infostruct::{InfoSchema, VarKind, VariableId};
use crate::space::Space;
use crate::sysmodel::{slot_of, ControlStrategy, Problem};

const IMPROVEMENT: f64 = 1e-12;
const UNSET: u32 = u32::MAX;

type Atoms = Vec<(usize, Vec<u32>, f64)>;

pub(crate) struct BruteOutput {
    pub value: f64,
    pub strategy: ControlStrategy,
}

struct Search<'a> {
    problem: &'a Problem,
    obs_spaces: Vec<Vec<Space>>,
    obs_slots: Vec<Vec<Vec<usize>>>,
    cap: u64,
    evaluations: u64,
    best: f64,
    best_tables: Vec<Vec<Vec<usize>>>,
    current: Vec<Vec<Vec<usize>>>,
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

impl<'a> Search<'a> {
    fn obs_index(&self, t: usize, j: usize, hist: &[u32]) -> usize {
        self.obs_slots[t][j]
            .iter()
            .zip(self.obs_spaces[t][j].radices())
            .fold(0, |acc, (&s, &r)| acc * r + hist[s] as usize)
    }

    fn tick(&mut self) -> Result<()> {
        self.evaluations += 1;
        if self.evaluations > self.cap {
            return Err(Error::CapExceeded { required: format!("more than {} strategy evaluations", self.cap), cap: self.cap });
        }
        Ok(())
    }

    fn dfs(&mut self, t: usize, atoms: &Atoms, acc: f64) -> Result<()> {
        let problem = self.problem;
        let k = problem.agents();
        let horizon = problem.horizon();
        let card = problem.card();
        // reachable observation realizations per agent, and each atom's position among them
        let mut reach: Vec<Vec<usize>> = Vec::with_capacity(k);
        let mut pos: Vec<Vec<usize>> = Vec::with_capacity(k);
        for j in 0..k {
            let idx: Vec<usize> = atoms.iter().map(|(_, h, _)| self.obs_index(t, j, h)).collect();
            let mut r = idx.clone();
            r.sort_unstable();
            r.dedup();
            pos.push(idx.iter().map(|i| r.binary_search(i).unwrap()).collect());
            reach.push(r);
        }
        for j in 0..k {
            self.current[t][j].iter_mut().for_each(|u| *u = 0);
        }
        let searched = if t == horizon { k - 1 } else { k };
        let mut radices = Vec::new();
        for j in 0..searched {
            radices.extend(std::iter::repeat_n(card.controls[j], reach[j].len()));
        }
        let mut odo = vec![0; radices.len()];
        loop {
            let mut p = 0;
            for j in 0..searched {
                for &r in &reach[j] {
                    self.current[t][j][r] = odo[p];
                    p += 1;
                }
            }
            if t == horizon {
                self.tick()?;
                self.finish(t, atoms, &reach, &pos, acc);
            } else {
                let mut stage = 0.0;
                let mut next: BTreeMap<(usize, Vec<u32>), f64> = BTreeMap::new();
                for (a, (x, hist, prob)) in atoms.iter().enumerate() {
                    let u: Vec<usize> = (0..k).map(|j| self.current[t][j][reach[j][pos[j][a]]]).collect();
                    stage += prob * problem.stage_cost(t, *x, &u);
                    let mut hist = hist.clone();
                    for j in 0..k {
                        hist[slot_of(k, &VariableId::ctrl(j, t))] = u[j] as u32;
                    }
                    for &(w, pw) in problem.w_support(t) {
                        let x2 = problem.next_state(t, *x, &u, w);
                        for (v, pv) in problem.v_support(t + 1) {
                            let mut h2 = hist.clone();
                            for j in 0..k {
                                h2[slot_of(k, &VariableId::obs(j, t + 1))] = problem.observe(j, t + 1, x2, v[j]) as u32;
                            }
                            *next.entry((x2, h2)).or_insert(0.0) += prob * pw * pv;
                        }
                    }
                }
                let next: Atoms = next.into_iter().map(|((x, h), p)| (x, h, p)).collect();
                self.dfs(t + 1, &next, acc + stage)?;
            }
            if !advance(&mut odo, &radices) {
                break;
            }
        }
        Ok(())
    }

    // Final stage: the last agent's entries are chosen independently.
    fn finish(&mut self, t: usize, atoms: &Atoms, reach: &[Vec<usize>], pos: &[Vec<usize>], acc: f64) {
        let problem = self.problem;
        let k = problem.agents();
        let last = k - 1;
        let nu = problem.card().controls[last];
        let mut by_entry = vec![vec![0.0; nu]; reach[last].len()];
        let mut u: Vec<usize> = vec![0; k];
        for (a, (x, _, prob)) in atoms.iter().enumerate() {
            for j in 0..last {
                u[j] = self.current[t][j][reach[j][pos[j][a]]];
            }
            for (cand, slot) in by_entry[pos[last][a]].iter_mut().enumerate() {
                u[last] = cand;
                *slot += prob * problem.stage_cost(t, *x, &u);
            }
        }
        let mut total = acc;
        for (r, costs) in by_entry.iter().enumerate() {
            let mut arg = 0;
            for cand in 1..nu {
                if costs[cand] < costs[arg] - IMPROVEMENT {
                    arg = cand;
                }
            }
            self.current[t][last][reach[last][r]] = arg;
            total += costs[arg];
        }
        if total < self.best - IMPROVEMENT {
            self.best = total;
            self.best_tables.clone_from(&self.current);
        }
    }
}

fn obs_schema(problem: &Problem, t: usize, j: usize) -> InfoSchema {
    problem.tables().memory(t, j).iter().filter(|v| v.kind == VarKind::Observation).copied().collect()
}

/// Upper bound on the evaluations of [`solve`]: observation realizations reachable
/// under some control sequence, with the last agent's final table excluded.
fn evaluation_bound(problem: &Problem, obs_spaces: &[Vec<Space>], obs_slots: &[Vec<Vec<usize>>], cap: u64) -> Result<u128> {
    let k = problem.agents();
    let horizon = problem.horizon();
    let card = problem.card();
    let slots = (horizon + 1) * k * 2;
    let exceeded = || Error::CapExceeded { required: format!("more than {cap} strategy evaluations"), cap };
    let mut states: std::collections::BTreeSet<(usize, Vec<u32>)> = std::collections::BTreeSet::new();
    for &(x, _) in problem.x0_support() {
        for (v, _) in problem.v_support(0) {
            let mut hist = vec![UNSET; slots];
            for j in 0..k {
                hist[slot_of(k, &VariableId::obs(j, 0))] = problem.observe(j, 0, x, v[j]) as u32;
            }
            states.insert((x, hist));
        }
    }
    let joint = problem.system().joint_controls();
    let mut bound: u128 = 1;
    for t in 0..=horizon {
        let searched = if t == horizon { k - 1 } else { k };
        for j in 0..searched {
            let reach: std::collections::BTreeSet<usize> = states
                .iter()
                .map(|(_, h)| {
                    obs_slots[t][j].iter().zip(obs_spaces[t][j].radices()).fold(0, |acc, (&s, &r)| acc * r + h[s] as usize)
                })
                .collect();
            for _ in 0..reach.len() {
                bound = bound.saturating_mul(card.controls[j] as u128);
                if bound > cap as u128 {
                    return Err(exceeded());
                }
            }
        }
        if t == horizon {
            break;
        }
        let mut next = std::collections::BTreeSet::new();
        for (x, hist) in &states {
            for uj in 0..joint {
                let u = problem.system().split_joint(uj);
                for &(w, _) in problem.w_support(t) {
                    let x2 = problem.next_state(t, *x, &u, w);
                    for (v, _) in problem.v_support(t + 1) {
                        let mut h2 = hist.clone();
                        for j in 0..k {
                            h2[slot_of(k, &VariableId::obs(j, t + 1))] = problem.observe(j, t + 1, x2, v[j]) as u32;
                        }
                        next.insert((x2, h2));
                    }
                }
            }
            if next.len() as u64 > cap {
                return Err(exceeded());
            }
        }
        states = next;
    }
    Ok(bound)
}

pub(crate) fn solve(problem: &Problem, cap: u64) -> Result<BruteOutput> {
    let k = problem.agents();
    let horizon = problem.horizon();
    let card = problem.card();
    let obs_spaces: Vec<Vec<Space>> =
        (0..=horizon).map(|t| (0..k).map(|j| Space::of_schema(&obs_schema(problem, t, j), card)).collect()).collect();
    let obs_slots: Vec<Vec<Vec<usize>>> = (0..=horizon)
        .map(|t| (0..k).map(|j| obs_schema(problem, t, j).iter().map(|v| slot_of(k, v)).collect()).collect())
        .collect();
    evaluation_bound(problem, &obs_spaces, &obs_slots, cap)?;
    let current: Vec<Vec<Vec<usize>>> =
        obs_spaces.iter().map(|row| row.iter().map(|s| vec![0; s.size()]).collect()).collect();
    let mut search = Search {
        problem,
        obs_spaces,
        obs_slots,
        cap,
        evaluations: 0,
        best: f64::INFINITY,
        best_tables: current.clone(),
        current,
    };
    let slots = (horizon + 1) * k * 2;
    let mut init: BTreeMap<(usize, Vec<u32>), f64> = BTreeMap::new();
    for &(x, px) in problem.x0_support() {
        for (v, pv) in problem.v_support(0) {
            let mut hist = vec![UNSET; slots];
            for j in 0..k {
                hist[slot_of(k, &VariableId::obs(j, 0))] = problem.observe(j, 0, x, v[j]) as u32;
            }
            *init.entry((x, hist)).or_insert(0.0) += px * pv;
        }
    }
    let atoms: Atoms = init.into_iter().map(|((x, h), p)| (x, h, p)).collect();
    search.dfs(0, &atoms, 0.0)?;
    // lift observation-keyed tables to full memory tables
    let mut laws = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let mut stage = Vec::with_capacity(k);
        for j in 0..k {
            let mem = problem.memory_space(t, j);
            let proj = mem.projector(&search.obs_spaces[t][j])?;
            let table = (0..mem.size())
                .map(|m| search.best_tables[t][j][search.obs_spaces[t][j].encode_projected(&mem.decode(m), &proj)])
                .collect();
            stage.push(table);
        }
        laws.push(stage);
    }
    Ok(BruteOutput { value: search.best, strategy: ControlStrategy { laws } })
}
