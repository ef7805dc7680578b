//! Prescriptions, prescription strategies and their relation to control laws.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infostruct::{InfoSchema, VarKind};
use crate::space::{Cardinalities, Space};
use crate::sysmodel::{ControlStrategy, Problem};

/// Default cap on the number of tables produced by [`enumerate_prescriptions`].
pub const DEFAULT_PRESCRIPTION_CAP: u64 = 1 << 20;

/// `Γ_t^[owner,target]`: a lookup table from realizations of `domain` to controls of `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prescription {
    pub owner: usize,
    pub target: usize,
    pub time: usize,
    pub domain: InfoSchema,
    pub radices: Vec<usize>,
    pub table: Vec<usize>,
}

impl Prescription {
    pub fn constant(owner: usize, target: usize, time: usize, action: usize) -> Self {
        Prescription { owner, target, time, domain: InfoSchema::new(), radices: Vec::new(), table: vec![action] }
    }
}

pub fn apply_prescription(p: &Prescription, realization: &[usize]) -> Result<usize> {
    if realization.len() != p.radices.len() {
        return Err(Error::SchemaMismatch {
            what: format!("prescription domain has {} variables, got {}", p.radices.len(), realization.len()),
        });
    }
    let mut idx = 0;
    for ((&v, &r), var) in realization.iter().zip(&p.radices).zip(p.domain.iter()) {
        if v >= r {
            return Err(Error::OutOfRange { what: var.to_string(), value: v, size: r });
        }
        idx = idx * r + v;
    }
    Ok(p.table[idx])
}

/// `Θ_t^owner`: one prescription per target agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletePrescription {
    pub owner: usize,
    pub time: usize,
    pub components: Vec<Prescription>,
}

/// `ψ_t^[owner,target]` as a table from conditioning realizations to prescription tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrescriptionLaw {
    pub target: usize,
    pub conditioning: InfoSchema,
    pub domain: InfoSchema,
    pub tables: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrescriptionStrategy {
    pub owner: usize,
    /// `laws[t][target]`
    pub laws: Vec<Vec<PrescriptionLaw>>,
}

impl PrescriptionStrategy {
    pub fn prescription(&self, problem: &Problem, t: usize, target: usize, cond_index: usize) -> Prescription {
        let law = &self.laws[t][target];
        Prescription {
            owner: self.owner,
            target,
            time: t,
            domain: law.domain.clone(),
            radices: Space::of_schema(&law.domain, problem.card()).radices().to_vec(),
            table: law.tables[cond_index].clone(),
        }
    }

    /// `Θ_t^owner` given a realization of `A_t^owner` (values in canonical order).
    pub fn complete_prescription(&self, problem: &Problem, t: usize, accessible: &[usize]) -> Result<CompletePrescription> {
        let card = problem.card();
        let acc = Space::of_schema(problem.tables().accessible(t, self.owner), card);
        acc.checked_encode(accessible)?;
        let components = (0..problem.agents())
            .map(|j| {
                let cond = Space::of_schema(&self.laws[t][j].conditioning, card);
                let idx = cond.encode_projected(accessible, &acc.projector(&cond)?);
                Ok(self.prescription(problem, t, j, idx))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompletePrescription { owner: self.owner, time: t, components })
    }

    pub fn check(&self, problem: &Problem) -> Result<()> {
        let tables = problem.tables();
        let card = problem.card();
        if self.laws.len() != problem.horizon() + 1 {
            return Err(Error::DomainMismatch { what: "prescription strategy stage count".into() });
        }
        for (t, stage) in self.laws.iter().enumerate() {
            if stage.len() != problem.agents() {
                return Err(Error::DomainMismatch { what: format!("stage {t} target count") });
            }
            for (j, law) in stage.iter().enumerate() {
                let cond = tables.prescription_conditioning(t, self.owner, j);
                let dom = tables.prescription_domain(t, self.owner, j);
                if &law.conditioning != cond || &law.domain != dom || law.target != j {
                    return Err(Error::DomainMismatch { what: format!("law psi[{t}][{}] schema", j + 1) });
                }
                let nc = Space::of_schema(cond, card).size();
                let nd = Space::of_schema(dom, card).size();
                if law.tables.len() != nc || law.tables.iter().any(|tb| tb.len() != nd) {
                    return Err(Error::DomainMismatch { what: format!("law psi[{t}][{}] table size", j + 1) });
                }
                let nu = card.controls[j];
                if law.tables.iter().flatten().any(|&u| u >= nu) {
                    return Err(Error::DomainMismatch { what: format!("law psi[{t}][{}] control out of range", j + 1) });
                }
            }
        }
        Ok(())
    }
}

/// All control tables over the realizations of `domain`, in lexicographic order.
pub struct PrescriptionTables {
    current: Option<Vec<usize>>,
    base: usize,
}

impl Iterator for PrescriptionTables {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut pos = cur.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < self.base {
                break;
            }
            cur[pos] = 0;
        }
        Some(out)
    }
}

pub fn enumerate_prescriptions(
    domain: &InfoSchema,
    card: &Cardinalities,
    control_size: usize,
    cap: u64,
) -> Result<PrescriptionTables> {
    let n = Space::of_schema(domain, card).size();
    let required = table_count(control_size, n);
    if required > BigUint::from(cap) {
        return Err(Error::CapExceeded { required: required.to_string(), cap });
    }
    Ok(PrescriptionTables { current: Some(vec![0; n]), base: control_size })
}

fn table_count(control_size: usize, realizations: usize) -> BigUint {
    let mut out = BigUint::one();
    let base = BigUint::from(control_size);
    for _ in 0..realizations {
        out *= &base;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// Control-strategy tables, keyed by the observation part of each memory.
    Brute,
    /// Prescription tables searched by the decomposition for this (0-based) agent.
    Agent(usize),
}

/// Number of candidate tables examined by the corresponding solver.
///
/// For an agent `k` the per-stage count is `|A^K| · c(K)` with
/// `c(i) = |U^i|^|L^[i,i]| · (|A^{i-1}| / |A^i|) · c(i-1)` for `i > k` and
/// `c(k) = Π_{j<=k} |U^j|^|L^[j,k]|` (all sizes are realization counts), summed over stages.
pub fn count_strategies(problem: &Problem, mode: CountMode) -> Result<BigUint> {
    let tables = problem.tables();
    let card = problem.card();
    let size = |s: &InfoSchema| Space::of_schema(s, card).size();
    let agents = problem.agents();
    match mode {
        CountMode::Brute => {
            let mut total = BigUint::one();
            for t in 0..=problem.horizon() {
                for j in 0..agents {
                    let obs: InfoSchema =
                        tables.memory(t, j).iter().filter(|v| v.kind == VarKind::Observation).copied().collect();
                    total *= table_count(card.controls[j], size(&obs));
                }
            }
            Ok(total)
        }
        CountMode::Agent(k) => {
            if k >= agents {
                return Err(Error::AgentOutOfRange { index: k + 1, agents });
            }
            let mut total = BigUint::zero();
            for t in 0..=problem.horizon() {
                let mut c = BigUint::one();
                for j in 0..=k {
                    c *= table_count(card.controls[j], size(tables.inaccessible(t, j, k)?));
                }
                for i in k + 1..agents {
                    let ext = size(tables.accessible(t, i - 1)) / size(tables.accessible(t, i));
                    c = c * ext * table_count(card.controls[i], size(tables.inaccessible(t, i, i)?));
                }
                total += c * size(tables.accessible(t, agents - 1));
            }
            Ok(total)
        }
    }
}

/// Positions of a conditioning/domain split inside a memory space.
struct Split {
    memory: Space,
    cond: Space,
    dom: Space,
    cond_pos: Vec<usize>,
    dom_pos: Vec<usize>,
}

impl Split {
    fn new(problem: &Problem, t: usize, owner: usize, target: usize) -> Result<Split> {
        let card = problem.card();
        let tables = problem.tables();
        let memory = problem.memory_space(t, target).clone();
        let cond = Space::of_schema(tables.prescription_conditioning(t, owner, target), card);
        let dom = Space::of_schema(tables.prescription_domain(t, owner, target), card);
        let cond_pos = memory.projector(&cond)?;
        let dom_pos = memory.projector(&dom)?;
        if cond_pos.len() + dom_pos.len() != memory.dims() {
            return Err(Error::SchemaMismatch { what: "memory is not the union of conditioning and domain".into() });
        }
        Ok(Split { memory, cond, dom, cond_pos, dom_pos })
    }
}

/// Control laws of every agent induced by `ψ`: `g^j(m) = ψ^[k,j](m|cond)(m|dom)`.
pub fn strategy_to_control_law(problem: &Problem, psi: &PrescriptionStrategy) -> Result<ControlStrategy> {
    psi.check(problem)?;
    let mut laws = Vec::with_capacity(problem.horizon() + 1);
    for t in 0..=problem.horizon() {
        let mut stage = Vec::with_capacity(problem.agents());
        for j in 0..problem.agents() {
            let split = Split::new(problem, t, psi.owner, j)?;
            let law = &psi.laws[t][j];
            let table = (0..split.memory.size())
                .map(|m| {
                    let vals = split.memory.decode(m);
                    let c = split.cond.encode_projected(&vals, &split.cond_pos);
                    let d = split.dom.encode_projected(&vals, &split.dom_pos);
                    law.tables[c][d]
                })
                .collect();
            stage.push(table);
        }
        laws.push(stage);
    }
    Ok(ControlStrategy { laws })
}

/// The prescription strategy of agent `k` reproducing `g`: `ψ^[k,j](c)(l) = g^j(c ⊎ l)`.
pub fn control_law_to_strategy(problem: &Problem, g: &ControlStrategy, k: usize) -> Result<PrescriptionStrategy> {
    problem.check_strategy(g)?;
    if k >= problem.agents() {
        return Err(Error::AgentOutOfRange { index: k + 1, agents: problem.agents() });
    }
    let tables = problem.tables();
    let mut laws = Vec::with_capacity(problem.horizon() + 1);
    for t in 0..=problem.horizon() {
        let mut stage = Vec::with_capacity(problem.agents());
        for j in 0..problem.agents() {
            let split = Split::new(problem, t, k, j)?;
            let mut vals = vec![0; split.memory.dims()];
            let law_tables = (0..split.cond.size())
                .map(|c| {
                    let cv = split.cond.decode(c);
                    (0..split.dom.size())
                        .map(|d| {
                            let dv = split.dom.decode(d);
                            for (&p, &v) in split.cond_pos.iter().zip(&cv) {
                                vals[p] = v;
                            }
                            for (&p, &v) in split.dom_pos.iter().zip(&dv) {
                                vals[p] = v;
                            }
                            g.laws[t][j][split.memory.encode(&vals)]
                        })
                        .collect()
                })
                .collect();
            stage.push(PrescriptionLaw {
                target: j,
                conditioning: tables.prescription_conditioning(t, k, j).clone(),
                domain: tables.prescription_domain(t, k, j).clone(),
                tables: law_tables,
            });
        }
        laws.push(stage);
    }
    Ok(PrescriptionStrategy { owner: k, laws })
}

/// Re-expresses agent `src.owner`'s strategy as the equivalent strategy of agent `dst`.
pub fn translate_strategy(problem: &Problem, src: &PrescriptionStrategy, dst: usize) -> Result<PrescriptionStrategy> {
    if dst == src.owner {
        src.check(problem)?;
        return Ok(src.clone());
    }
    control_law_to_strategy(problem, &strategy_to_control_law(problem, src)?, dst)
}
