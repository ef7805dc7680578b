//! Symbolic information structure: memories, accessible and inaccessible sets,
//! new information and equivalent-state variable sets.
//!
//! Everything here depends only on the delays (or on an explicit static memory
//! assignment), never on realizations.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::DelayMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKind {
    Observation,
    Control,
}

/// An observation `Y^agent_time` or a control `U^agent_time`.
///
/// The derived order `(time, agent, kind)` is the canonical order used for every
/// table layout in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VariableId {
    pub time: usize,
    pub agent: usize,
    pub kind: VarKind,
}

impl VariableId {
    pub fn obs(agent: usize, time: usize) -> Self {
        VariableId { time, agent, kind: VarKind::Observation }
    }

    pub fn ctrl(agent: usize, time: usize) -> Self {
        VariableId { time, agent, kind: VarKind::Control }
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = match self.kind {
            VarKind::Observation => 'Y',
            VarKind::Control => 'U',
        };
        write!(f, "{}^{}_{}", sym, self.agent + 1, self.time)
    }
}

/// Duplicate-free, canonically ordered set of variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InfoSchema(BTreeSet<VariableId>);

impl InfoSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &VariableId) -> bool {
        self.0.contains(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VariableId> + '_ {
        self.0.iter()
    }

    pub fn vars(&self) -> Vec<VariableId> {
        self.0.iter().copied().collect()
    }

    pub fn insert(&mut self, v: VariableId) -> bool {
        self.0.insert(v)
    }

    pub fn union(&self, other: &InfoSchema) -> InfoSchema {
        InfoSchema(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &InfoSchema) -> InfoSchema {
        InfoSchema(self.0.intersection(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &InfoSchema) -> InfoSchema {
        InfoSchema(self.0.difference(&other.0).copied().collect())
    }

    pub fn is_subset(&self, other: &InfoSchema) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &InfoSchema) -> bool {
        self.0.is_disjoint(&other.0)
    }
}

impl FromIterator<VariableId> for InfoSchema {
    fn from_iter<I: IntoIterator<Item = VariableId>>(iter: I) -> Self {
        InfoSchema(iter.into_iter().collect())
    }
}

impl fmt::Display for InfoSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, v) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Where memories come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InfoSource {
    /// Word-of-mouth sharing along minimal-delay paths.
    Delays(DelayMatrix),
    /// One-shot problem (horizon 0): agent `k` observes `Y^j_0` for each `j` in `observed[k]`.
    Static { observed: Vec<Vec<usize>> },
}

impl InfoSource {
    pub fn agents(&self) -> usize {
        match self {
            InfoSource::Delays(d) => d.agents(),
            InfoSource::Static { observed } => observed.len(),
        }
    }

    pub fn memory(&self, t: usize, k: usize) -> InfoSchema {
        match self {
            InfoSource::Delays(d) => memory_schema(d, t, k),
            InfoSource::Static { observed } => {
                observed[k].iter().map(|&j| VariableId::obs(j, 0)).collect()
            }
        }
    }
}

/// `{Y^j_s : s <= t - d[j][k]} ∪ {U^j_s : s <= t - d[j][k] - 1}`; negative ranges are empty.
pub fn memory_schema(delays: &DelayMatrix, t: usize, k: usize) -> InfoSchema {
    let mut out = InfoSchema::new();
    for j in 0..delays.agents() {
        let d = delays.get(j, k) as i64;
        let last_obs = t as i64 - d;
        for s in 0..=last_obs {
            out.insert(VariableId::obs(j, s as usize));
        }
        for s in 0..last_obs {
            out.insert(VariableId::ctrl(j, s as usize));
        }
    }
    out
}

/// Intersection of the memories of agents `0..=k`.
pub fn accessible_schema(delays: &DelayMatrix, t: usize, k: usize) -> InfoSchema {
    accessible_from(&InfoSource::Delays(delays.clone()), t, k)
}

fn accessible_from(source: &InfoSource, t: usize, k: usize) -> InfoSchema {
    let mut acc = source.memory(t, 0);
    for j in 1..=k {
        acc = acc.intersection(&source.memory(t, j));
    }
    acc
}

pub fn inaccessible_schema(delays: &DelayMatrix, t: usize, k: usize, i: usize) -> Result<InfoSchema> {
    if i < k {
        return Err(Error::IndexOrder { k: k + 1, i: i + 1 });
    }
    Ok(memory_schema(delays, t, k).difference(&accessible_schema(delays, t, i)))
}

/// Accessible information gained at `t`; the whole accessible set at `t = 0`.
pub fn new_info_schema(delays: &DelayMatrix, t: usize, k: usize) -> InfoSchema {
    let now = accessible_schema(delays, t, k);
    if t == 0 {
        now
    } else {
        now.difference(&accessible_schema(delays, t - 1, k))
    }
}

/// Variable part of the equivalent state `S_t^k` as a final stage, with no carried
/// variables; the state `X_t` is implied as an extra leading coordinate.
pub fn equivalent_state_schema(delays: &DelayMatrix, t: usize, k: usize) -> InfoSchema {
    InfoTables::build(&InfoSource::Delays(delays.clone()), t).equivalent(t, k).clone()
}

/// Greedy re-indexing: most informative memory first, then the agent sharing the
/// most with the running intersection. Returns `order[position] = original agent`.
pub fn index_agents(source: &InfoSource, horizon: usize) -> Vec<usize> {
    let agents = source.agents();
    let memories: Vec<InfoSchema> = (0..agents).map(|k| source.memory(horizon, k)).collect();
    let mut remaining: Vec<usize> = (0..agents).collect();
    let mut order = Vec::with_capacity(agents);
    let mut running: Option<InfoSchema> = None;
    while !remaining.is_empty() {
        let score = |k: usize| match &running {
            None => memories[k].len(),
            Some(acc) => acc.intersection(&memories[k]).len(),
        };
        // max_by_key returns the last maximum; iterate in reverse so ties favour the smallest index
        let best = *remaining.iter().rev().max_by_key(|&&k| score(k)).unwrap();
        remaining.retain(|&k| k != best);
        running = Some(match running {
            None => memories[best].clone(),
            Some(acc) => acc.intersection(&memories[best]),
        });
        order.push(best);
    }
    order
}

/// Every schema for every `(t, k[, i])`, computed eagerly.
#[derive(Debug, Clone)]
pub struct InfoTables {
    agents: usize,
    horizon: usize,
    memory: Vec<Vec<InfoSchema>>,
    accessible: Vec<Vec<InfoSchema>>,
    // inaccessible[t][k][i], meaningful for i >= k
    inaccessible: Vec<Vec<Vec<InfoSchema>>>,
    new_info: Vec<Vec<InfoSchema>>,
    equivalent: Vec<Vec<InfoSchema>>,
    carried: Vec<Vec<InfoSchema>>,
}

impl InfoTables {
    pub fn build(source: &InfoSource, horizon: usize) -> Self {
        let agents = source.agents();
        let mut memory = Vec::new();
        let mut accessible = Vec::new();
        let mut inaccessible = Vec::new();
        let mut new_info = Vec::new();
        let mut equivalent = Vec::new();
        for t in 0..=horizon {
            let mem: Vec<InfoSchema> = (0..agents).map(|k| source.memory(t, k)).collect();
            let mut acc: Vec<InfoSchema> = Vec::with_capacity(agents);
            for k in 0..agents {
                let a = if k == 0 { mem[0].clone() } else { acc[k - 1].intersection(&mem[k]) };
                acc.push(a);
            }
            let inacc: Vec<Vec<InfoSchema>> = (0..agents)
                .map(|k| {
                    (0..agents)
                        .map(|i| if i >= k { mem[k].difference(&acc[i]) } else { InfoSchema::new() })
                        .collect()
                })
                .collect();
            let z: Vec<InfoSchema> = (0..agents)
                .map(|k| match accessible.last() {
                    None => acc[k].clone(),
                    Some(prev) => {
                        let prev: &Vec<InfoSchema> = prev;
                        acc[k].difference(&prev[k])
                    }
                })
                .collect();
            let eq: Vec<InfoSchema> = (0..agents)
                .map(|k| {
                    let mut s = InfoSchema::new();
                    for j in 0..agents {
                        let part = if j <= k { &inacc[j][k] } else { &inacc[j][j] };
                        s = s.union(part);
                    }
                    s
                })
                .collect();
            memory.push(mem);
            accessible.push(acc);
            inaccessible.push(inacc);
            new_info.push(z);
            equivalent.push(eq);
        }
        // Accessible variables that re-enter a later equivalent state (through an
        // agent after k receiving them late) are kept in the state meanwhile.
        let mut carried = vec![vec![InfoSchema::new(); agents]; horizon + 1];
        for k in 0..agents {
            let mut later = InfoSchema::new();
            for t in (0..=horizon).rev() {
                carried[t][k] = accessible[t][k].intersection(&later);
                later = later.union(&equivalent[t][k]);
            }
        }
        for t in 0..=horizon {
            for k in 0..agents {
                equivalent[t][k] = equivalent[t][k].union(&carried[t][k]);
            }
        }
        InfoTables { agents, horizon, memory, accessible, inaccessible, new_info, equivalent, carried }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn memory(&self, t: usize, k: usize) -> &InfoSchema {
        &self.memory[t][k]
    }

    pub fn accessible(&self, t: usize, k: usize) -> &InfoSchema {
        &self.accessible[t][k]
    }

    pub fn inaccessible(&self, t: usize, k: usize, i: usize) -> Result<&InfoSchema> {
        if i < k {
            return Err(Error::IndexOrder { k: k + 1, i: i + 1 });
        }
        Ok(&self.inaccessible[t][k][i])
    }

    pub fn new_info(&self, t: usize, k: usize) -> &InfoSchema {
        &self.new_info[t][k]
    }

    /// `S_t^k` together with [`InfoTables::carried`].
    pub fn equivalent(&self, t: usize, k: usize) -> &InfoSchema {
        &self.equivalent[t][k]
    }

    /// Variables of `A_t^k` that belong to the equivalent state of agent `k` at some later time.
    pub fn carried(&self, t: usize, k: usize) -> &InfoSchema {
        &self.carried[t][k]
    }

    /// Domain of `Γ_t^[owner,target]`: `L^[target,owner]` below the owner, `L^[target,target]` otherwise.
    pub fn prescription_domain(&self, t: usize, owner: usize, target: usize) -> &InfoSchema {
        if target < owner {
            &self.inaccessible[t][target][owner]
        } else {
            &self.inaccessible[t][target][target]
        }
    }

    /// Conditioning set of the law `ψ_t^[owner,target]`: `A^owner` below the owner, `A^target` otherwise.
    pub fn prescription_conditioning(&self, t: usize, owner: usize, target: usize) -> &InfoSchema {
        if target < owner {
            &self.accessible[t][owner]
        } else {
            &self.accessible[t][target]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> DelayMatrix {
        DelayMatrix::from_rows(vec![vec![0, 1, 1], vec![1, 0, 2], vec![1, 2, 0]])
    }

    fn set(items: &[(char, usize, std::ops::RangeInclusive<usize>)]) -> InfoSchema {
        let mut out = InfoSchema::new();
        for (kind, agent, range) in items {
            for s in range.clone() {
                out.insert(match kind {
                    'Y' => VariableId::obs(agent - 1, s),
                    _ => VariableId::ctrl(agent - 1, s),
                });
            }
        }
        out
    }

    #[test]
    fn star_memory_of_agent_two() {
        let m = memory_schema(&star(), 3, 1);
        let want = set(&[('Y', 1, 0..=2), ('U', 1, 0..=1), ('Y', 2, 0..=3), ('U', 2, 0..=2), ('Y', 3, 0..=1), ('U', 3, 0..=0)]);
        assert_eq!(m, want);
    }

    #[test]
    fn time_zero_memory_is_own_observation() {
        for k in 0..3 {
            let m = memory_schema(&star(), 0, k);
            assert_eq!(m.vars(), vec![VariableId::obs(k, 0)]);
        }
    }

    #[test]
    fn star_accessible_of_agent_two() {
        let a = accessible_schema(&star(), 3, 1);
        let want = set(&[('Y', 1, 0..=2), ('U', 1, 0..=1), ('Y', 2, 0..=2), ('U', 2, 0..=1), ('Y', 3, 0..=1), ('U', 3, 0..=0)]);
        assert_eq!(a, want);
        assert_eq!(accessible_schema(&star(), 3, 0), memory_schema(&star(), 3, 0));
    }

    #[test]
    fn inaccessible_requires_order() {
        assert!(matches!(inaccessible_schema(&star(), 2, 2, 1), Err(Error::IndexOrder { k: 3, i: 2 })));
        let l22 = inaccessible_schema(&star(), 4, 1, 1).unwrap();
        assert_eq!(l22.vars(), vec![VariableId::ctrl(1, 3), VariableId::obs(1, 4)]);
    }

    #[test]
    fn new_info_base_case() {
        assert_eq!(new_info_schema(&star(), 0, 2), accessible_schema(&star(), 0, 2));
    }

    #[test]
    fn static_nested_memories() {
        let src = InfoSource::Static { observed: vec![vec![0, 1, 2], vec![1, 2], vec![2]] };
        let tables = InfoTables::build(&src, 0);
        assert_eq!(tables.accessible(0, 1).vars(), vec![VariableId::obs(1, 0), VariableId::obs(2, 0)]);
        assert_eq!(tables.inaccessible(0, 0, 2).unwrap().vars(), vec![VariableId::obs(0, 0), VariableId::obs(1, 0)]);
        assert!(tables.inaccessible(0, 0, 0).unwrap().is_empty());
        assert_eq!(index_agents(&src, 0), vec![0, 1, 2]);
        let reversed = InfoSource::Static { observed: vec![vec![2], vec![1, 2], vec![0, 1, 2]] };
        assert_eq!(index_agents(&reversed, 0), vec![2, 1, 0]);
    }

    #[test]
    fn symmetric_delays_keep_identity() {
        let d = DelayMatrix::from_rows(vec![vec![0, 2, 2], vec![2, 0, 2], vec![2, 2, 0]]);
        assert_eq!(index_agents(&InfoSource::Delays(d), 4), vec![0, 1, 2]);
    }

    #[test]
    fn display_is_one_based() {
        let s: InfoSchema = [VariableId::obs(0, 2), VariableId::ctrl(2, 1)].into_iter().collect();
        assert_eq!(s.to_string(), "{U^3_1, Y^1_2}");
    }
}
