//! Small instances shipped with the library.

use crate::netgraph::NetworkSpec;
use crate::sysmodel::{Instance, Primitive, SystemSpec};

pub const NAMES: [&str; 5] = ["static3", "static3-reversed", "wom3", "d2", "d2-t2"];

pub fn by_name(name: &str) -> Option<Instance> {
    match name {
        "static3" => Some(static3()),
        "static3-reversed" => Some(static3_reversed()),
        "wom3" => Some(wom3(1)),
        "d2" => Some(d2(1)),
        "d2-t2" => Some(d2(2)),
        _ => None,
    }
}

fn bit(x: usize, pos: usize) -> usize {
    (x >> pos) & 1
}

/// Three agents guessing a uniform binary state from noisy private readings.
/// Agent 1 sees every reading, agent 2 the readings of agents 2 and 3, agent 3 only its own.
pub fn static3() -> Instance {
    let flips = [0.2, 0.25, 0.3];
    let miss = [1.0, 0.8, 0.6];
    let cost: Vec<Vec<f64>> = (0..2)
        .map(|x| {
            (0..8)
                .map(|u| {
                    let us = [bit(u, 2), bit(u, 1), bit(u, 0)];
                    let mut c = 0.0;
                    for k in 0..3 {
                        if us[k] != x {
                            c += miss[k];
                        }
                    }
                    if us[0] != us[1] {
                        c += 0.5;
                    }
                    if us[1] != us[2] {
                        c += 0.3;
                    }
                    if us == [1, 1, 1] {
                        c += 0.4;
                    }
                    c
                })
                .collect()
        })
        .collect();
    let system = SystemSpec {
        horizon: 0,
        state_size: 2,
        control_sizes: vec![2; 3],
        observation_sizes: vec![2; 3],
        disturbance: Primitive::constant(vec![1.0]),
        noises: flips.iter().map(|&p| Primitive::constant(vec![1.0 - p, p])).collect(),
        initial_probs: vec![0.5, 0.5],
        transition: Vec::new(),
        observation: vec![vec![vec![vec![0, 1], vec![1, 0]]]; 3],
        cost: vec![cost],
    };
    Instance {
        network: NetworkSpec::complete(3, 1),
        system,
        static_memory: Some(vec![vec![1, 2, 3], vec![2, 3], vec![3]]),
    }
}

/// [`static3`] with the agent order reversed, so the least informed agent comes first.
pub fn static3_reversed() -> Instance {
    static3().relabel_agents(&[2, 1, 0]).expect("valid permutation")
}

/// Three binary subsystems, agent `k` observing subsystem `k` without noise.
/// Agent 1 is linked both ways to agents 2 and 3 with delay 1.
/// Playing 1 resets a subsystem before an independent flip with probability 0.2.
pub fn wom3(horizon: usize) -> Instance {
    let flip = 0.2;
    let w_probs: Vec<f64> = (0..8)
        .map(|w| (0..3).map(|k| if bit(w, k) == 1 { flip } else { 1.0 - flip }).product())
        .collect();
    let p_one = [0.3, 0.5, 0.4];
    // state bit of agent k sits at position 2 - k
    let initial: Vec<f64> = (0..8)
        .map(|x| (0..3).map(|k| if bit(x, 2 - k) == 1 { p_one[k] } else { 1.0 - p_one[k] }).product())
        .collect();
    let step: Vec<Vec<Vec<usize>>> = (0..8)
        .map(|x| {
            (0..8)
                .map(|u| {
                    (0..8)
                        .map(|w| {
                            let mut next = 0;
                            for k in 0..3 {
                                let pos = 2 - k;
                                let kept = if bit(u, pos) == 1 { 0 } else { bit(x, pos) };
                                next |= (kept ^ bit(w, pos)) << pos;
                            }
                            next
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let stage_cost: Vec<Vec<f64>> = (0..8)
        .map(|x| {
            (0..8)
                .map(|u| {
                    let xs = (x as u32).count_ones() as f64;
                    let us = (u as u32).count_ones() as f64;
                    let both_leaves = if bit(u, 1) == 1 && bit(u, 0) == 1 { 0.5 } else { 0.0 };
                    xs + 0.6 * us + both_leaves
                })
                .collect()
        })
        .collect();
    let observation = (0..3)
        .map(|k| vec![(0..8).map(|x| vec![bit(x, 2 - k)]).collect(); horizon + 1])
        .collect();
    let system = SystemSpec {
        horizon,
        state_size: 8,
        control_sizes: vec![2; 3],
        observation_sizes: vec![2; 3],
        disturbance: Primitive::constant(w_probs),
        noises: vec![Primitive::constant(vec![1.0]); 3],
        initial_probs: initial,
        transition: vec![step; horizon],
        observation,
        cost: vec![stage_cost; horizon + 1],
    };
    Instance {
        network: NetworkSpec::new(3, [(0, 1, 1), (1, 0, 1), (0, 2, 1), (2, 0, 1)]),
        system,
        static_memory: None,
    }
}

/// Two agents observing a binary state without noise, one-step delays both ways.
/// Disagreeing resets the state to 0; agreeing lets it flip with probability 0.3.
pub fn d2(horizon: usize) -> Instance {
    let step: Vec<Vec<Vec<usize>>> = (0..2)
        .map(|x| {
            (0..4)
                .map(|u| (0..2).map(|w| if bit(u, 1) != bit(u, 0) { 0 } else { x ^ w }).collect())
                .collect()
        })
        .collect();
    let stage_cost: Vec<Vec<f64>> = (0..2)
        .map(|x| {
            (0..4)
                .map(|u| {
                    let (u1, u2) = (bit(u, 1), bit(u, 0));
                    let mismatch = if u1 != u2 { 0.5 } else { 0.0 };
                    2.0 * x as f64 + mismatch + 0.2 * (u1 + u2) as f64
                })
                .collect()
        })
        .collect();
    let system = SystemSpec {
        horizon,
        state_size: 2,
        control_sizes: vec![2, 2],
        observation_sizes: vec![2, 2],
        disturbance: Primitive::constant(vec![0.7, 0.3]),
        noises: vec![Primitive::constant(vec![1.0]); 2],
        initial_probs: vec![0.6, 0.4],
        transition: vec![step; horizon],
        observation: vec![vec![vec![vec![0], vec![1]]; horizon + 1]; 2],
        cost: vec![stage_cost; horizon + 1],
    };
    Instance { network: NetworkSpec::complete(2, 1), system, static_memory: None }
}
