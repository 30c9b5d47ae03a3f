use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_index, DiscreteMomdp, MomdpError, Result, Symbol};

/// What a policy sees: past observation symbols and past actions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct History {
    pub observations: Vec<Symbol>,
    pub actions: Vec<usize>,
}

pub trait Policy {
    /// The (slice, render) pair through which the policy observes states.
    fn channel(&self) -> (usize, usize);

    /// Distribution over `0..actions` given the history.
    fn action_distribution(&self, history: &History, actions: usize) -> Result<Vec<f64>>;
}

/// Uniform over all actions, regardless of history.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPolicy {
    pub slice: usize,
    pub render: usize,
}

impl Policy for UniformPolicy {
    fn channel(&self) -> (usize, usize) {
        (self.slice, self.render)
    }

    fn action_distribution(&self, _history: &History, actions: usize) -> Result<Vec<f64>> {
        Ok(vec![1.0 / actions as f64; actions])
    }
}

/// Explicit table of action distributions keyed by history.
#[derive(Debug, Clone, Default)]
pub struct TablePolicy {
    pub slice: usize,
    pub render: usize,
    pub table: HashMap<History, Vec<f64>>,
}

impl Policy for TablePolicy {
    fn channel(&self) -> (usize, usize) {
        (self.slice, self.render)
    }

    fn action_distribution(&self, history: &History, actions: usize) -> Result<Vec<f64>> {
        let row = self
            .table
            .get(history)
            .ok_or_else(|| MomdpError::Policy(format!("no entry for history {history:?}")))?;
        if row.len() != actions {
            return Err(MomdpError::Policy(format!(
                "row for {history:?} has {} entries, expected {actions}",
                row.len()
            )));
        }
        Ok(row.clone())
    }
}

/// `(s_0, a_1, s_1, ..., a_H, s_H)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

/// Exact joint distribution over trajectories; zero-mass atoms are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub atoms: Vec<(Trajectory, f64)>,
}

impl Joint {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, p)| p).sum()
    }

    /// Marginal of `s_t`.
    pub fn state_marginal(&self, t: usize, states: usize) -> Vec<f64> {
        let mut m = vec![0.0; states];
        for (traj, p) in &self.atoms {
            m[traj.states[t]] += p;
        }
        m
    }
}

/// Chain-rule enumeration of the joint over trajectories of length `horizon`.
///
/// Fails with a capacity error instead of truncating when the frontier grows
/// past `cap` atoms.
pub fn enumerate_joint(momdp: &DiscreteMomdp, policy: &dyn Policy, cap: usize) -> Result<Joint> {
    let (slice, render) = policy.channel();
    check_index("slice", slice, momdp.slices.len())?;
    check_index("render", render, momdp.renders.len())?;

    struct Node {
        traj: Trajectory,
        history: History,
        p: f64,
    }

    let mut frontier: Vec<Node> = Vec::new();
    for (s, &p) in momdp.initial.iter().enumerate() {
        if p > 0.0 {
            frontier.push(Node {
                traj: Trajectory {
                    states: vec![s],
                    actions: vec![],
                },
                history: History {
                    observations: vec![momdp.observe(s, slice, render)?.symbol],
                    actions: vec![],
                },
                p,
            });
        }
    }
    if frontier.len() > cap {
        return Err(MomdpError::Capacity { cap, horizon: 0 });
    }

    for t in 1..=momdp.horizon {
        let mut next = Vec::new();
        for node in &frontier {
            let pi = policy.action_distribution(&node.history, momdp.actions)?;
            let last = *node.traj.states.last().expect("non-empty trajectory");
            for (a, &pa) in pi.iter().enumerate() {
                if pa <= 0.0 {
                    continue;
                }
                for (s2, &ps) in momdp.row(last, a).iter().enumerate() {
                    if ps <= 0.0 {
                        continue;
                    }
                    let mut traj = node.traj.clone();
                    traj.states.push(s2);
                    traj.actions.push(a);
                    let mut history = node.history.clone();
                    history.actions.push(a);
                    history.observations.push(momdp.observe(s2, slice, render)?.symbol);
                    next.push(Node {
                        traj,
                        history,
                        p: node.p * pa * ps,
                    });
                    if next.len() > cap {
                        return Err(MomdpError::Capacity { cap, horizon: t });
                    }
                }
            }
        }
        frontier = next;
    }

    Ok(Joint {
        atoms: frontier.into_iter().map(|n| (n.traj, n.p)).collect(),
    })
}
