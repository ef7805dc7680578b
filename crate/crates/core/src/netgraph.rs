//! Communication network: validation, minimal delays and designated information paths.
//!
//! Agents are 0-based in the API. The instance file uses 1-based agent numbers; the
//! conversion happens in the serde layer of [`Link`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed link `from -> to` carrying information with `delay` time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLink", into = "RawLink")]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub delay: i64,
}

#[derive(Serialize, Deserialize)]
struct RawLink {
    from: usize,
    to: usize,
    delay: i64,
}

impl TryFrom<RawLink> for Link {
    type Error = String;

    fn try_from(raw: RawLink) -> std::result::Result<Self, String> {
        if raw.from == 0 || raw.to == 0 {
            return Err(format!("link ({},{}): agents are numbered from 1", raw.from, raw.to));
        }
        Ok(Link { from: raw.from - 1, to: raw.to - 1, delay: raw.delay })
    }
}

impl From<Link> for RawLink {
    fn from(l: Link) -> Self {
        RawLink { from: l.from + 1, to: l.to + 1, delay: l.delay }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub agents: usize,
    pub links: Vec<Link>,
}

impl NetworkSpec {
    pub fn new(agents: usize, links: impl IntoIterator<Item = (usize, usize, i64)>) -> Self {
        let links = links.into_iter().map(|(from, to, delay)| Link { from, to, delay }).collect();
        NetworkSpec { agents, links }
    }

    /// Every ordered pair of distinct agents linked with the same delay.
    pub fn complete(agents: usize, delay: i64) -> Self {
        let mut links = Vec::new();
        for from in 0..agents {
            for to in 0..agents {
                if from != to {
                    links.push((from, to, delay));
                }
            }
        }
        Self::new(agents, links)
    }

    fn link_delay(&self, from: usize, to: usize) -> Option<u64> {
        self.links.iter().find(|l| l.from == from && l.to == to).map(|l| l.delay as u64)
    }
}

/// `get(k, j)` is the minimal communication delay from agent `k` to agent `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayMatrix {
    d: Vec<Vec<u64>>,
}

impl DelayMatrix {
    /// Builds a matrix directly. Callers are responsible for the diagonal being zero.
    pub fn from_rows(d: Vec<Vec<u64>>) -> Self {
        DelayMatrix { d }
    }

    pub fn agents(&self) -> usize {
        self.d.len()
    }

    pub fn get(&self, from: usize, to: usize) -> u64 {
        self.d[from][to]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.d
    }

    pub fn max_delay(&self) -> u64 {
        self.d.iter().flatten().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoPath {
    pub agents: Vec<usize>,
    pub total_delay: u64,
}

pub fn validate_network(spec: &NetworkSpec) -> Result<&NetworkSpec> {
    let k = spec.agents;
    if k == 0 {
        return Err(Error::ShapeMismatch { what: "network.agents must be positive".into() });
    }
    let mut seen = BTreeSet::new();
    for l in &spec.links {
        for idx in [l.from, l.to] {
            if idx >= k {
                return Err(Error::AgentOutOfRange { index: idx + 1, agents: k });
            }
        }
        if l.from == l.to {
            return Err(Error::ExplicitSelfLoop { agent: l.from + 1 });
        }
        if l.delay < 1 {
            return Err(Error::NonPositiveDelay { from: l.from + 1, to: l.to + 1, delay: l.delay });
        }
        if !seen.insert((l.from, l.to)) {
            return Err(Error::DuplicateLink { from: l.from + 1, to: l.to + 1 });
        }
    }
    let d = relax(spec);
    for from in 0..k {
        for to in 0..k {
            if d[from][to] == u64::MAX {
                return Err(Error::NotStronglyConnected { from: from + 1, to: to + 1 });
            }
        }
    }
    Ok(spec)
}

// min-plus relaxation over paths of at most K-1 links
fn relax(spec: &NetworkSpec) -> Vec<Vec<u64>> {
    let k = spec.agents;
    let mut d = vec![vec![u64::MAX; k]; k];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for _ in 1..k {
        let mut changed = false;
        for src in 0..k {
            for l in &spec.links {
                let base = d[src][l.from];
                if base == u64::MAX {
                    continue;
                }
                let cand = base + l.delay as u64;
                if cand < d[src][l.to] {
                    d[src][l.to] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    d
}

pub fn compute_delay_matrix(spec: &NetworkSpec) -> Result<DelayMatrix> {
    validate_network(spec)?;
    Ok(DelayMatrix { d: relax(spec) })
}

/// Minimum-delay path from `from` to `to`; among equal-delay paths the
/// lexicographically smallest agent sequence is designated.
pub fn information_path(spec: &NetworkSpec, from: usize, to: usize) -> Result<InfoPath> {
    let d = compute_delay_matrix(spec)?;
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        // Greedy smallest successor that stays on a shortest path. Link delays are
        // positive, so the remaining delay strictly decreases.
        let remaining = d.get(cur, to);
        let next = (0..spec.agents)
            .filter(|&m| m != cur)
            .find(|&m| {
                spec.link_delay(cur, m)
                    .is_some_and(|delta| delta + d.get(m, to) == remaining)
            })
            .expect("validated network has a shortest-path successor");
        path.push(next);
        cur = next;
    }
    Ok(InfoPath { agents: path, total_delay: d.get(from, to) })
}
