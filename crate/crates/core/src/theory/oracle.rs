//! The oracle chain-of-thought process over an MOMDP.
//!
//! Each reasoning step `r_i` is drawn from a kernel that sees the question,
//! the *slice outputs* of the previous sliced states and the previous
//! reasoning steps. The outcome is actionable: it either transitions a prior
//! state with an implicit action or re-queries the latest state through a new
//! slice. Observations are the rendered slices of the resulting states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{Axis, FiniteJointDistribution, StableMap};
use super::{Result, TheoryError};
use crate::momdp::{normalize, DiscreteMomdp, MomdpError, SlicedState, DEFAULT_SUPPORT_CAP};
use crate::seed::splitmix64;

/// Which earlier state a transition acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Latest,
    Initial,
}

/// What a reasoning outcome does to the world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actionable {
    Transition { action: usize, source: Source },
    Query { slice: usize },
}

/// Everything a reasoning kernel may be asked about at one step.
pub struct KernelContext<'a> {
    /// 1-based step; `horizon + 1` is the answer step.
    pub step: usize,
    pub question: u32,
    pub sliced: &'a [SlicedState],
    pub reasoning: &'a [u32],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningKernel {
    /// Rows are pseudo-random functions of `(step, question, slice outputs,
    /// reasoning prefix)`. With probability `deterministic_rate` a row is a
    /// point mass.
    Seeded { seed: u64, deterministic_rate: f64 },
    /// Rows keyed by the raw state ids instead of slice outputs. Violates the
    /// sufficiency assumption whenever a slice is not injective; kept so that
    /// [`OracleCoTProcess::verify_slice_sufficiency`] can be exercised.
    StateAware { seed: u64 },
}

impl ReasoningKernel {
    fn row(&self, momdp: &DiscreteMomdp, ctx: &KernelContext<'_>, outcomes: usize) -> Vec<f64> {
        let (seed, rate, raw) = match *self {
            ReasoningKernel::Seeded {
                seed,
                deterministic_rate,
            } => (seed, deterministic_rate, false),
            ReasoningKernel::StateAware { seed } => (seed, 0.0, true),
        };
        let mut h = splitmix64(seed ^ ctx.step as u64);
        h = splitmix64(h ^ ctx.question as u64);
        for s in ctx.sliced {
            let v = if raw {
                s.state_index as u64
            } else {
                momdp.slices[s.slice_index].apply(s.state_index) as u64
            };
            h = splitmix64(h ^ ((s.slice_index as u64) << 32 | v));
        }
        for &r in ctx.reasoning {
            h = splitmix64(h ^ (0xA5A5_0000_0000 | r as u64));
        }
        let mut rng = crate::seed::rng(h);
        if outcomes == 1 {
            return vec![1.0];
        }
        if rng.gen::<f64>() < rate {
            let mut row = vec![0.0; outcomes];
            row[rng.gen_range(0..outcomes)] = 1.0;
            return row;
        }
        let mut row: Vec<f64> = (0..outcomes)
            .map(|_| {
                // Occasional zero entries keep supports non-trivial.
                if rng.gen::<f64>() < 0.2 {
                    0.0
                } else {
                    -(1.0 - rng.gen::<f64>()).ln() + 1e-3
                }
            })
            .collect();
        if row.iter().all(|&x| x == 0.0) {
            row[rng.gen_range(0..outcomes)] = 1.0;
        }
        normalize(&mut row);
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCoTProcess {
    pub momdp: DiscreteMomdp,
    /// `p(Q)`.
    pub question_prior: Vec<f64>,
    /// Slice used for the initial sliced state.
    pub initial_slice: usize,
    pub reasoning_kernel: ReasoningKernel,
    /// One entry per reasoning outcome of steps `1..=H`.
    pub action_map: Vec<Actionable>,
    pub answer_outcomes: usize,
    /// Render used for `o_0, ..., o_H`.
    pub render_assignment: Vec<usize>,
    pub support_cap: usize,
}

/// Axis layout of an enumerated oracle:
/// `Q, s0, o0, r1, s1, o1, ..., rH, sH, oH, A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoTLayout {
    pub horizon: usize,
}

impl CoTLayout {
    pub fn question(&self) -> usize {
        0
    }
    /// Sliced state `s_i`, `i in 0..=H`.
    pub fn state(&self, i: usize) -> usize {
        if i == 0 {
            1
        } else {
            3 * i + 1
        }
    }
    /// Observation `o_i`, `i in 0..=H`.
    pub fn obs(&self, i: usize) -> usize {
        self.state(i) + 1
    }
    /// Reasoning step `r_i`: `r_0` is the question, `r_{H+1}` the answer.
    pub fn reasoning(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else if i == self.horizon + 1 {
            3 * self.horizon + 3
        } else {
            3 * i
        }
    }
    pub fn answer(&self) -> usize {
        self.reasoning(self.horizon + 1)
    }
    pub fn width(&self) -> usize {
        3 * self.horizon + 4
    }
    /// Observable CoT axes in order `r0, o0, r1, o1, ..., rH, oH, r_{H+1}`.
    pub fn observable(&self) -> Vec<usize> {
        let mut v = vec![self.question(), self.obs(0)];
        for i in 1..=self.horizon {
            v.push(self.reasoning(i));
            v.push(self.obs(i));
        }
        v.push(self.answer());
        v
    }
}

/// The enumerated oracle joint together with its axis layout.
#[derive(Debug, Clone)]
pub struct CoTJoint {
    pub layout: CoTLayout,
    pub dist: FiniteJointDistribution,
}

impl OracleCoTProcess {
    pub fn horizon(&self) -> usize {
        self.momdp.horizon
    }

    pub fn reasoning_outcomes(&self) -> usize {
        self.action_map.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.momdp.validate()?;
        let h = self.horizon();
        let bad = |m: String| Err(TheoryError::Domain(m));
        if self.question_prior.is_empty() {
            return bad("question prior is empty".into());
        }
        let q: f64 = self.question_prior.iter().sum();
        if (q - 1.0).abs() > 1e-12 || self.question_prior.iter().any(|&p| p < 0.0) {
            return bad(format!("question prior sums to {q}"));
        }
        if self.initial_slice >= self.momdp.slices.len() {
            return bad("initial slice out of range".into());
        }
        if self.action_map.is_empty() || self.answer_outcomes == 0 {
            return bad("need at least one reasoning and one answer outcome".into());
        }
        for a in &self.action_map {
            match *a {
                Actionable::Transition { action, .. } if action >= self.momdp.actions => {
                    return bad(format!("action {action} out of range"))
                }
                Actionable::Query { slice } if slice >= self.momdp.slices.len() => {
                    return bad(format!("slice {slice} out of range"))
                }
                _ => {}
            }
        }
        if self.render_assignment.len() != h + 1 {
            return bad(format!(
                "render assignment has {} entries, expected {}",
                self.render_assignment.len(),
                h + 1
            ));
        }
        if self.render_assignment.iter().any(|&r| r >= self.momdp.renders.len()) {
            return bad("render assignment out of range".into());
        }
        Ok(())
    }

    fn sbar_code(&self, s: SlicedState) -> u32 {
        (s.state_index * self.momdp.slices.len() + s.slice_index) as u32
    }

    /// Observation axis code: 0 is the empty symbol, `k + 1` is symbol `k`.
    fn obs_code(&self, s: SlicedState, step: usize) -> u32 {
        let render = &self.momdp.renders[self.render_assignment[step]];
        let sym = render.apply(self.momdp.slices[s.slice_index].apply(s.state_index));
        if sym.is_empty() {
            0
        } else {
            sym.0 + 1
        }
    }

    fn obs_cardinality(&self) -> u32 {
        let max = self
            .render_assignment
            .iter()
            .flat_map(|&r| self.momdp.renders[r].table.iter())
            .filter(|s| !s.is_empty())
            .map(|s| s.0 + 2)
            .max();
        max.unwrap_or(1)
    }

    /// Exact joint over `(Q, s0, o0, r1, s1, o1, ..., A)`.
    pub fn enumerate(&self) -> Result<CoTJoint> {
        self.validate()?;
        let h = self.horizon();
        let layout = CoTLayout { horizon: h };
        let n_sbar = (self.momdp.states * self.momdp.slices.len()) as u32;
        let n_obs = self.obs_cardinality();
        let mut axes = Vec::with_capacity(layout.width());
        let push = |axes: &mut Vec<Axis>, name: String, card: u32| {
            axes.push(Axis {
                name,
                cardinality: card,
            })
        };
        push(&mut axes, "r0".into(), self.question_prior.len() as u32);
        push(&mut axes, "s0".into(), n_sbar);
        push(&mut axes, "o0".into(), n_obs);
        for i in 1..=h {
            push(&mut axes, format!("r{i}"), self.reasoning_outcomes() as u32);
            push(&mut axes, format!("s{i}"), n_sbar);
            push(&mut axes, format!("o{i}"), n_obs);
        }
        push(&mut axes, format!("r{}", h + 1), self.answer_outcomes as u32);

        let mut atoms: Vec<(Vec<u32>, f64)> = Vec::new();
        let mut sliced = Vec::with_capacity(h + 1);
        let mut reasoning = Vec::with_capacity(h);
        let mut key = Vec::with_capacity(layout.width());
        for (q, &pq) in self.question_prior.iter().enumerate() {
            if pq <= 0.0 {
                continue;
            }
            for (s0, &ps) in self.momdp.initial.iter().enumerate() {
                if ps <= 0.0 {
                    continue;
                }
                let sb = SlicedState {
                    state_index: s0,
                    slice_index: self.initial_slice,
                };
                sliced.push(sb);
                key.extend([q as u32, self.sbar_code(sb), self.obs_code(sb, 0)]);
                self.expand(q as u32, 1, pq * ps, &mut sliced, &mut reasoning, &mut key, &mut atoms)?;
                key.truncate(0);
                sliced.pop();
            }
        }
        let dist = FiniteJointDistribution::new(axes, atoms)?;
        Ok(CoTJoint { layout, dist })
    }

    #[allow(clippy::too_many_arguments)]
    fn expand(
        &self,
        q: u32,
        step: usize,
        p: f64,
        sliced: &mut Vec<SlicedState>,
        reasoning: &mut Vec<u32>,
        key: &mut Vec<u32>,
        atoms: &mut Vec<(Vec<u32>, f64)>,
    ) -> Result<()> {
        let h = self.horizon();
        let ctx = KernelContext {
            step,
            question: q,
            sliced,
            reasoning,
        };
        if step == h + 1 {
            let row = self.reasoning_kernel.row(&self.momdp, &ctx, self.answer_outcomes);
            for (a, &pa) in row.iter().enumerate() {
                if pa > 0.0 {
                    let mut k = key.clone();
                    k.push(a as u32);
                    atoms.push((k, p * pa));
                    if atoms.len() > self.support_cap {
                        return Err(MomdpError::Capacity {
                            cap: self.support_cap,
                            horizon: step,
                        }
                        .into());
                    }
                }
            }
            return Ok(());
        }
        let row = self.reasoning_kernel.row(&self.momdp, &ctx, self.reasoning_outcomes());
        for (r, &pr) in row.iter().enumerate() {
            if pr <= 0.0 {
                continue;
            }
            let next: Vec<(SlicedState, f64)> = match self.action_map[r] {
                Actionable::Transition { action, source } => {
                    let from = match source {
                        Source::Latest => *sliced.last().expect("initial state present"),
                        Source::Initial => sliced[0],
                    };
                    self.momdp
                        .step_distribution(from.state_index, action)?
                        .iter()
                        .enumerate()
                        .filter(|(_, &x)| x > 0.0)
                        .map(|(s, &x)| {
                            (
                                SlicedState {
                                    state_index: s,
                                    slice_index: from.slice_index,
                                },
                                x,
                            )
                        })
                        .collect()
                }
                Actionable::Query { slice } => {
                    let latest = *sliced.last().expect("initial state present");
                    vec![(
                        SlicedState {
                            state_index: latest.state_index,
                            slice_index: slice,
                        },
                        1.0,
                    )]
                }
            };
            for (sb, ps) in next {
                sliced.push(sb);
                reasoning.push(r as u32);
                let len = key.len();
                key.extend([r as u32, self.sbar_code(sb), self.obs_code(sb, step)]);
                self.expand(q, step + 1, p * pr * ps, sliced, reasoning, key, atoms)?;
                key.truncate(len);
                reasoning.pop();
                sliced.pop();
            }
        }
        Ok(())
    }

    /// Checks that the kernel depends on states only through slice outputs:
    /// contexts with equal slice outputs must produce equal rows.
    pub fn verify_slice_sufficiency(&self) -> Result<()> {
        let joint = self.enumerate()?;
        let layout = joint.layout;
        let h = layout.horizon;
        let n_slices = self.momdp.slices.len();
        let mut seen: StableMap<Vec<u64>, Vec<f64>> = StableMap::default();
        for (atom, _) in joint.dist.atoms() {
            let q = atom[layout.question()];
            let decode = |code: u32| SlicedState {
                state_index: code as usize / n_slices,
                slice_index: code as usize % n_slices,
            };
            for step in 1..=h + 1 {
                let sliced: Vec<SlicedState> = (0..step).map(|j| decode(atom[layout.state(j)])).collect();
                let reasoning: Vec<u32> = (1..step).map(|j| atom[layout.reasoning(j)]).collect();
                let outcomes = if step == h + 1 {
                    self.answer_outcomes
                } else {
                    self.reasoning_outcomes()
                };
                let ctx = KernelContext {
                    step,
                    question: q,
                    sliced: &sliced,
                    reasoning: &reasoning,
                };
                let row = self.reasoning_kernel.row(&self.momdp, &ctx, outcomes);
                let mut sig = vec![step as u64, q as u64];
                for s in &sliced {
                    sig.push(s.slice_index as u64);
                    sig.push(self.momdp.slices[s.slice_index].apply(s.state_index) as u64);
                }
                sig.extend(reasoning.iter().map(|&r| r as u64 + (1 << 40)));
                match seen.get(&sig) {
                    Some(prev) if prev != &row => {
                        return Err(TheoryError::Precondition(format!(
                            "reasoning kernel at step {step} distinguishes states with equal slice outputs"
                        )))
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(sig, row);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Size limits for random oracle processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_horizon: usize,
    pub max_slices: usize,
    pub max_renders: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_states: 4,
            max_actions: 3,
            max_horizon: 3,
            max_slices: 2,
            max_renders: 3,
        }
    }
}

impl OracleCoTProcess {
    /// Random stochastic oracle for the certificate ensembles.
    pub fn random(seed: u64, limits: OracleLimits) -> Self {
        let mut rng = crate::seed::rng(splitmix64(seed ^ 0x0AC1E));
        let sizes = crate::momdp::MomdpSizes::new(
            rng.gen_range(1..=limits.max_states),
            rng.gen_range(1..=limits.max_actions),
            rng.gen_range(1..=limits.max_slices),
            rng.gen_range(1..=limits.max_renders),
            rng.gen_range(1..=limits.max_horizon),
        );
        let mut momdp = crate::momdp::random_momdp(seed, sizes);
        // Half of the ensemble also carries an implicit (empty) render.
        if rng.gen_bool(0.5) {
            let domain = momdp.render_domain();
            momdp.renders.push(crate::momdp::Render::empty(domain));
        }
        let mut action_map: Vec<Actionable> = (0..momdp.actions)
            .map(|action| Actionable::Transition {
                action,
                source: Source::Latest,
            })
            .collect();
        if rng.gen_bool(0.5) {
            action_map.push(Actionable::Transition {
                action: rng.gen_range(0..momdp.actions),
                source: Source::Initial,
            });
        }
        for slice in 1..momdp.slices.len() {
            action_map.push(Actionable::Query { slice });
        }
        let questions = rng.gen_range(1..=2);
        let mut question_prior = crate::momdp::dirichlet_row(&mut rng, questions);
        normalize(&mut question_prior);
        let render_assignment = (0..=momdp.horizon)
            .map(|_| rng.gen_range(0..momdp.renders.len()))
            .collect();
        OracleCoTProcess {
            initial_slice: rng.gen_range(0..momdp.slices.len()),
            question_prior,
            reasoning_kernel: ReasoningKernel::Seeded {
                seed: splitmix64(seed ^ 0x5EED),
                deterministic_rate: 0.2,
            },
            action_map,
            answer_outcomes: rng.gen_range(2..=3),
            render_assignment,
            support_cap: DEFAULT_SUPPORT_CAP,
            momdp,
        }
    }

    /// Random oracle whose dynamics are deterministic and whose observations
    /// are the identity render of the identity slice.
    pub fn random_deterministic_observable(seed: u64, limits: OracleLimits) -> Self {
        let mut rng = crate::seed::rng(splitmix64(seed ^ 0xDE7E));
        let states = rng.gen_range(1..=limits.max_states);
        let actions = rng.gen_range(1..=limits.max_actions);
        let horizon = rng.gen_range(1..=limits.max_horizon);
        let next: Vec<Vec<usize>> = (0..states)
            .map(|_| (0..actions).map(|_| rng.gen_range(0..states)).collect())
            .collect();
        let initial = crate::momdp::dirichlet_row(&mut rng, states);
        Self::fully_observable(&next, initial, horizon, seed, &mut rng)
    }

    /// Deterministic, identity-observed oracle over a successor table.
    pub fn fully_observable<R: Rng>(
        next: &[Vec<usize>],
        initial: Vec<f64>,
        horizon: usize,
        seed: u64,
        rng: &mut R,
    ) -> Self {
        use crate::momdp::{Modality, Render, Slice};
        let states = next.len();
        let actions = next[0].len();
        let momdp = DiscreteMomdp::deterministic(
            next,
            initial,
            vec![Slice::identity(states)],
            vec![Render::identity(Modality::Visual, states)],
            horizon,
        )
        .expect("valid deterministic model");
        let mut action_map: Vec<Actionable> = (0..actions)
            .map(|action| Actionable::Transition {
                action,
                source: Source::Latest,
            })
            .collect();
        action_map.push(Actionable::Transition {
            action: 0,
            source: Source::Initial,
        });
        action_map.push(Actionable::Query { slice: 0 });
        OracleCoTProcess {
            momdp,
            question_prior: vec![1.0],
            initial_slice: 0,
            reasoning_kernel: ReasoningKernel::Seeded {
                seed: splitmix64(seed ^ 0xC0),
                deterministic_rate: 0.2,
            },
            action_map,
            answer_outcomes: rng.gen_range(2..=3),
            render_assignment: vec![0; horizon + 1],
            support_cap: DEFAULT_SUPPORT_CAP,
        }
    }
}

/// Oracle over a deterministic grid world given as a successor table, with
/// identity observations and a uniform start cell.
pub fn maze_oracle(next: &[Vec<usize>], horizon: usize, seed: u64) -> OracleCoTProcess {
    let states = next.len();
    let mut rng = crate::seed::rng(splitmix64(seed ^ 0x3A2E));
    OracleCoTProcess::fully_observable(next, vec![1.0 / states as f64; states], horizon, seed, &mut rng)
}
