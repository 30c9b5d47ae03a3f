//! Finite multi-observable Markov decision processes.
//!
//! Every observation function factors as `render(slice(state))`: a
//! modality-agnostic slice extracts part of the state and a modality-specific
//! render turns the sliced value into a symbol. Slices and renders are total
//! lookup tables, so every quantity downstream is exactly enumerable.

mod joint;

pub use joint::{enumerate_joint, History, Joint, Policy, TablePolicy, Trajectory, UniformPolicy};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums must be within this distance of one.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// Default cap on the number of joint atoms produced by exact enumeration.
pub const DEFAULT_SUPPORT_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomdpError {
    #[error("{what} index {index} out of range (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("joint support exceeds cap {cap} at horizon step {horizon}")]
    Capacity { cap: usize, horizon: usize },
    #[error("policy: {0}")]
    Policy(String),
}

pub type Result<T> = std::result::Result<T, MomdpError>;

/// Observation modality. `None` is implicit world modeling: the observation
/// is always the empty symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Verbal,
    Visual,
    None,
}

/// Opaque observation symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol(pub u32);

impl Symbol {
    pub const EMPTY: Symbol = Symbol(u32::MAX);

    pub fn is_empty(self) -> bool {
        self == Self::EMPTY
    }
}

/// A surjective table from states onto `0..values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub name: String,
    pub values: usize,
    pub table: Vec<usize>,
}

impl Slice {
    pub fn identity(states: usize) -> Self {
        Slice {
            name: "identity".into(),
            values: states,
            table: (0..states).collect(),
        }
    }

    /// Builds a slice from a table, taking `values` as the image size.
    pub fn from_table(name: impl Into<String>, table: Vec<usize>) -> Result<Self> {
        let values = table.iter().max().map_or(0, |m| m + 1);
        let slice = Slice {
            name: name.into(),
            values,
            table,
        };
        slice.validate(slice.table.len())?;
        Ok(slice)
    }

    pub fn apply(&self, state: usize) -> usize {
        self.table[state]
    }

    /// Injective slices keep full state information.
    pub fn is_injective(&self) -> bool {
        self.values == self.table.len()
    }

    fn validate(&self, states: usize) -> Result<()> {
        if self.table.len() != states {
            return Err(MomdpError::Invalid(format!(
                "slice '{}' covers {} states, expected {}",
                self.name,
                self.table.len(),
                states
            )));
        }
        let mut hit = vec![false; self.values];
        for &v in &self.table {
            if v >= self.values {
                return Err(MomdpError::Invalid(format!(
                    "slice '{}' maps outside 0..{}",
                    self.name, self.values
                )));
            }
            hit[v] = true;
        }
        if hit.iter().any(|h| !h) {
            return Err(MomdpError::Invalid(format!("slice '{}' is not surjective", self.name)));
        }
        Ok(())
    }
}

/// A table from sliced values (`0..domain`) to observation symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Render {
    pub modality: Modality,
    pub table: Vec<Symbol>,
}

impl Render {
    pub fn identity(modality: Modality, domain: usize) -> Self {
        Render {
            modality,
            table: (0..domain as u32).map(Symbol).collect(),
        }
    }

    pub fn empty(domain: usize) -> Self {
        Render {
            modality: Modality::None,
            table: vec![Symbol::EMPTY; domain],
        }
    }

    pub fn apply(&self, value: usize) -> Symbol {
        self.table[value]
    }
}

/// Index of a state under a particular slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlicedState {
    pub state_index: usize,
    pub slice_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub modality: Modality,
    pub symbol: Symbol,
    pub slice_index: usize,
    pub render_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMomdp {
    pub states: usize,
    pub actions: usize,
    /// Row-major `[state][action][next_state]`.
    pub transition: Vec<f64>,
    pub initial: Vec<f64>,
    pub slices: Vec<Slice>,
    /// Every render is defined over `0..render_domain()`.
    pub renders: Vec<Render>,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DiscreteMomdp {
    /// Builds and validates a model.
    pub fn new(
        states: usize,
        actions: usize,
        transition: Vec<f64>,
        initial: Vec<f64>,
        slices: Vec<Slice>,
        renders: Vec<Render>,
        horizon: usize,
    ) -> Result<Self> {
        let m = DiscreteMomdp {
            states,
            actions,
            transition,
            initial,
            slices,
            renders,
            horizon,
            seed: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Deterministic model from a successor table `next[state][action]`.
    pub fn deterministic(
        next: &[Vec<usize>],
        initial: Vec<f64>,
        slices: Vec<Slice>,
        renders: Vec<Render>,
        horizon: usize,
    ) -> Result<Self> {
        let states = next.len();
        let actions = next.first().map_or(0, Vec::len);
        let mut transition = vec![0.0; states * actions * states];
        for (s, row) in next.iter().enumerate() {
            if row.len() != actions {
                return Err(MomdpError::Invalid("ragged successor table".into()));
            }
            for (a, &t) in row.iter().enumerate() {
                if t >= states {
                    return Err(MomdpError::OutOfRange {
                        what: "successor",
                        index: t,
                        size: states,
                    });
                }
                transition[(s * actions + a) * states + t] = 1.0;
            }
        }
        Self::new(states, actions, transition, initial, slices, renders, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states == 0 || self.actions == 0 {
            return Err(MomdpError::Invalid("need at least one state and one action".into()));
        }
        if self.horizon == 0 {
            return Err(MomdpError::Invalid("horizon must be at least 1".into()));
        }
        if self.transition.len() != self.states * self.actions * self.states {
            return Err(MomdpError::Invalid("transition table has the wrong size".into()));
        }
        check_distribution("initial", &self.initial, self.states)?;
        for s in 0..self.states {
            for a in 0..self.actions {
                check_distribution("transition row", self.row(s, a), self.states)?;
            }
        }
        if self.slices.is_empty() || self.renders.is_empty() {
            return Err(MomdpError::Invalid("need at least one slice and one render".into()));
        }
        for slice in &self.slices {
            slice.validate(self.states)?;
        }
        let domain = self.render_domain();
        for (i, r) in self.renders.iter().enumerate() {
            if r.table.len() != domain {
                return Err(MomdpError::Invalid(format!(
                    "render {i} covers {} values, expected {domain}",
                    r.table.len()
                )));
            }
            if r.modality == Modality::None && r.table.iter().any(|s| !s.is_empty()) {
                return Err(MomdpError::Invalid(format!(
                    "render {i} has modality none but emits non-empty symbols"
                )));
            }
        }
        Ok(())
    }

    /// Size of the sliced-value domain shared by all renders.
    pub fn render_domain(&self) -> usize {
        self.slices.iter().map(|s| s.values).max().unwrap_or(0)
    }

    fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.actions + action) * self.states;
        &self.transition[start..start + self.states]
    }

    /// `P(. | state, action)`.
    pub fn step_distribution(&self, state: usize, action: usize) -> Result<&[f64]> {
        check_index("state", state, self.states)?;
        check_index("action", action, self.actions)?;
        Ok(self.row(state, action))
    }

    /// `render(slice(state))`.
    pub fn observe(&self, state: usize, slice: usize, render: usize) -> Result<Observation> {
        check_index("state", state, self.states)?;
        check_index("slice", slice, self.slices.len())?;
        check_index("render", render, self.renders.len())?;
        let r = &self.renders[render];
        let symbol = r.apply(self.slices[slice].apply(state));
        Ok(Observation {
            modality: r.modality,
            symbol,
            slice_index: slice,
            render_index: render,
        })
    }

    /// True when every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        (0..self.states).all(|s| {
            (0..self.actions).all(|a| {
                self.row(s, a)
                    .iter()
                    .all(|&p| p.abs() <= ROW_TOLERANCE || (p - 1.0).abs() <= ROW_TOLERANCE)
            })
        })
    }

    /// Random model for test ensembles. Slice 0 is always the identity and
    /// render 0 always the identity verbal render.
    pub fn random(seed: u64, sizes: MomdpSizes) -> Self {
        random_momdp(seed, sizes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DiscreteMomdp =
            serde_json::from_str(text).map_err(|e| MomdpError::Invalid(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(MomdpError::OutOfRange { what, index, size })
    }
}

fn check_distribution(what: &str, p: &[f64], len: usize) -> Result<()> {
    if p.len() != len {
        return Err(MomdpError::Invalid(format!("{what} has length {}, expected {len}", p.len())));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(MomdpError::Invalid(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(MomdpError::Invalid(format!("{what} sums to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomdpSizes {
    pub states: usize,
    pub actions: usize,
    pub slices: usize,
    pub renders: usize,
    pub horizon: usize,
}

impl MomdpSizes {
    pub fn new(states: usize, actions: usize, slices: usize, renders: usize, horizon: usize) -> Self {
        MomdpSizes {
            states,
            actions,
            slices,
            renders,
            horizon,
        }
    }
}

/// Draws a normalized vector with exponential weights (a flat Dirichlet).
pub(crate) fn dirichlet_row<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3)
        .collect();
    normalize(&mut w);
    w
}

/// Rescales in place so the entries sum to one; the last entry absorbs the
/// rounding residue.
pub(crate) fn normalize(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    let residue = 1.0 - w.iter().sum::<f64>();
    if let Some(last) = w.iter_mut().rev().find(|x| **x > 0.0) {
        *last += residue;
    }
}

/// Reproducible random model; see [`DiscreteMomdp::random`].
pub fn random_momdp(seed: u64, sizes: MomdpSizes) -> DiscreteMomdp {
    let MomdpSizes {
        states,
        actions,
        slices,
        renders,
        horizon,
    } = sizes;
    let (states, actions, slices, renders, horizon) =
        (states.max(1), actions.max(1), slices.max(1), renders.max(1), horizon.max(1));
    let mut rng = crate::seed::rng(seed);

    let mut transition = Vec::with_capacity(states * actions * states);
    for _ in 0..states * actions {
        transition.extend(dirichlet_row(&mut rng, states));
    }
    let initial = dirichlet_row(&mut rng, states);

    let mut slice_list = vec![Slice::identity(states)];
    for k in 1..slices {
        let values = rng.gen_range(1..=states);
        // Surjective: the first `values` states (shuffled) hit every value once.
        let mut table: Vec<usize> = (0..states)
            .map(|s| if s < values { s } else { rng.gen_range(0..values) })
            .collect();
        for i in (1..states).rev() {
            let j = rng.gen_range(0..=i);
            table.swap(i, j);
        }
        slice_list.push(Slice {
            name: format!("slice{k}"),
            values,
            table,
        });
    }

    let domain = slice_list.iter().map(|s| s.values).max().unwrap_or(1);
    let mut render_list = vec![Render::identity(Modality::Verbal, domain)];
    for k in 1..renders {
        let modality = if k % 2 == 1 { Modality::Visual } else { Modality::Verbal };
        let symbols = rng.gen_range(1..=domain) as u32;
        let table = (0..domain).map(|_| Symbol(rng.gen_range(0..symbols))).collect();
        render_list.push(Render { modality, table });
    }

    DiscreteMomdp {
        states,
        actions,
        transition,
        initial,
        slices: slice_list,
        renders: render_list,
        horizon,
        seed: Some(seed),
    }
}
