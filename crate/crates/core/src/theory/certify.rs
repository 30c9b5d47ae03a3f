//! Numeric certificates: KL chain-rule decomposition, uncertainty-reduction
//! bounds, and the deterministic / fully-observable corollary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dist::{kl_divergence, StableMap};
use super::model::FactoredCoTModel;
use super::oracle::{CoTJoint, OracleCoTProcess};
use super::{Result, TheoryError};

/// One checked inequality. `slack >= -tolerance` means it holds; equalities
/// are recorded as `-|lhs - rhs|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub slack: f64,
    pub tolerance: f64,
}

impl Gap {
    pub fn holds(&self) -> bool {
        self.slack >= -self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub name: String,
    pub quantities: BTreeMap<String, f64>,
    pub gaps: BTreeMap<String, Gap>,
    /// Loosest tolerance used by any gap.
    pub tolerance: f64,
    pub passed: bool,
}

impl TheoremReport {
    pub fn new(name: impl Into<String>) -> Self {
        TheoremReport {
            name: name.into(),
            quantities: BTreeMap::new(),
            gaps: BTreeMap::new(),
            tolerance: 0.0,
            passed: true,
        }
    }

    pub fn quantity(&mut self, name: impl Into<String>, value: f64) {
        self.quantities.insert(name.into(), value);
    }

    pub fn gap(&mut self, name: impl Into<String>, slack: f64, tolerance: f64) {
        let g = Gap { slack, tolerance };
        self.passed &= g.holds();
        self.tolerance = self.tolerance.max(tolerance);
        self.gaps.insert(name.into(), g);
    }

    /// `lhs == rhs` within `tolerance`.
    pub fn equality(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) {
        self.gap(name, -(lhs - rhs).abs(), tolerance);
    }

    pub fn get(&self, name: &str) -> f64 {
        self.quantities[name]
    }
}

/// Conditional rows `p(x_k | x_{<k})` of the observable sequence, with the
/// prefix masses.
fn conditional_rows(joint: &CoTJoint, k: usize, outcomes: usize) -> Vec<(Vec<u32>, f64, Vec<f64>)> {
    let obs = joint.layout.observable();
    let mut index: StableMap<Vec<u32>, usize> = StableMap::default();
    let mut rows: Vec<(Vec<u32>, f64, Vec<f64>)> = Vec::new();
    for (key, p) in joint.dist.marginal_table(&obs[..=k]) {
        let prefix = key[..k].to_vec();
        let i = *index.entry(prefix.clone()).or_insert_with(|| {
            rows.push((prefix, 0.0, vec![0.0; outcomes]));
            rows.len() - 1
        });
        rows[i].1 += p;
        rows[i].2[key[k] as usize] += p;
    }
    for (_, mass, row) in &mut rows {
        for x in row.iter_mut() {
            *x /= *mass;
        }
    }
    rows
}

fn continuity(position: usize, prefix: &[u32], e: TheoryError) -> TheoryError {
    match e {
        TheoryError::AbsoluteContinuity { atom } => TheoryError::AbsoluteContinuity {
            atom: format!("position {position} prefix {prefix:?} outcome {atom}"),
        },
        other => other,
    }
}

/// KL chain rule: the joint CoT KL equals the summed per-factor expected KLs,
/// and the marginal answer KL never exceeds it.
pub fn check_theorem1(oracle: &OracleCoTProcess, model: &FactoredCoTModel) -> Result<TheoremReport> {
    let joint = oracle.enumerate()?;
    check_theorem1_in(&joint, model)
}

pub(crate) fn check_theorem1_in(joint: &CoTJoint, model: &FactoredCoTModel) -> Result<TheoremReport> {
    model.validate()?;
    let layout = joint.layout;
    let h = layout.horizon;
    if model.horizon != h {
        return Err(TheoryError::Domain(format!(
            "model horizon {} does not match oracle horizon {h}",
            model.horizon
        )));
    }
    let obs = layout.observable();
    let n = obs.len();

    // Direct route: sum over full observable sequences.
    let ctx: StableMap<Vec<u32>, f64> = joint
        .dist
        .marginal_table(&obs[..2])
        .into_iter()
        .collect();
    let mut joint_kl = 0.0;
    for (x, p) in joint.dist.marginal_table(&obs) {
        let mut log_q = 0.0;
        for k in 2..n {
            let row = model.factor(k).row(&x[..k])?;
            let q = row[x[k] as usize];
            if q <= 0.0 {
                return Err(TheoryError::AbsoluteContinuity {
                    atom: format!("position {k} prefix {:?} outcome {}", &x[..k], x[k]),
                });
            }
            log_q += q.ln();
        }
        joint_kl += p * ((p / ctx[&x[..2]]).ln() - log_q);
    }

    // Factor route: expected KL of each conditional.
    let mut report = TheoremReport::new("kl_chain_rule");
    let mut reasoning = 0.0;
    let mut world = 0.0;
    for k in 2..n {
        let f = model.factor(k);
        let mut term = 0.0;
        for (prefix, mass, row) in conditional_rows(joint, k, f.outcomes) {
            let q = f.row(&prefix)?;
            term += mass * kl_divergence(&row, q).map_err(|e| continuity(k, &prefix, e))?;
        }
        if k % 2 == 0 {
            reasoning += term;
            report.quantity(format!("reasoning_error[{}]", k / 2), term);
        } else {
            world += term;
            report.quantity(format!("world_model_error[{}]", k / 2), term);
        }
    }

    // Marginal answer KL, with p_theta(A | Q, o_0) summed over the model tree.
    let answers = model.cardinalities[n - 1];
    let mut answer_rows: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
    for (key, p) in joint.dist.marginal_table(&[obs[0], obs[1], obs[n - 1]]) {
        answer_rows.entry(key[..2].to_vec()).or_insert_with(|| vec![0.0; answers])[key[2] as usize] += p;
    }
    let mut marginal_kl = 0.0;
    for (c, row) in answer_rows {
        let mass = ctx[&c];
        let p: Vec<f64> = row.iter().map(|x| x / mass).collect();
        let q = model.answer_distribution(c[0], c[1])?;
        marginal_kl += mass * kl_divergence(&p, &q).map_err(|e| continuity(n - 1, &c, e))?;
    }

    report.quantity("marginal_answer_kl", marginal_kl);
    report.quantity("joint_kl", joint_kl);
    report.quantity("reasoning_error", reasoning);
    report.quantity("world_model_error", world);
    report.equality("chain_rule", joint_kl, reasoning + world, 1e-9);
    report.gap("data_processing", joint_kl - marginal_kl, 1e-9);
    Ok(report)
}

/// Uncertainty reduction at step `i`: `I(o_{1:i-1}; r_i | o_0, r_{0:i-1})`
/// against both upper bounds.
pub fn reasoning_uncertainty_gain(oracle: &OracleCoTProcess, i: usize) -> Result<TheoremReport> {
    let joint = oracle.enumerate()?;
    reasoning_uncertainty_gain_in(&joint, i)
}

/// As [`reasoning_uncertainty_gain`], over an already enumerated joint.
pub fn reasoning_uncertainty_gain_in(joint: &CoTJoint, i: usize) -> Result<TheoremReport> {
    let l = joint.layout;
    if i == 0 || i > l.horizon + 1 {
        return Err(TheoryError::Domain(format!(
            "step {i} outside 1..={}",
            l.horizon + 1
        )));
    }
    let d = &joint.dist;
    let later_obs: Vec<usize> = (1..i).map(|j| l.obs(j)).collect();
    let later_states: Vec<usize> = (1..i).map(|j| l.state(j)).collect();
    let r_prev: Vec<usize> = (0..i).map(|j| l.reasoning(j)).collect();
    let r_i = [l.reasoning(i)];
    let mut context = vec![l.obs(0)];
    context.extend(&r_prev);

    let gain = d.conditional_mutual_information(&later_obs, &r_i, &context)?;

    // H(r_i | o_0, r_{0:i-1}) - H(r_i | R_i).
    let mut full_prefix = context.clone();
    full_prefix.extend(&later_obs);
    let by_entropies = d.entropy(&r_i, &context)? - d.entropy(&r_i, &full_prefix)?;

    let obs_bound = d.mutual_information(&later_obs, &later_states)?;
    let mut states_and_reasoning: Vec<usize> = (0..i).map(|j| l.state(j)).collect();
    states_and_reasoning.extend(&r_prev);
    let reasoning_bound = d.mutual_information(&r_i, &states_and_reasoning)?;

    let mut report = TheoremReport::new(format!("uncertainty_gain[{i}]"));
    report.quantity("gain", gain);
    report.quantity("entropy_reduction", by_entropies);
    report.quantity("observation_information", obs_bound);
    report.quantity("required_information", reasoning_bound);
    report.gap("nonnegative", gain, 1e-12);
    report.gap("observation_bound", obs_bound - gain, 1e-9);
    report.gap("required_bound", reasoning_bound - gain, 1e-9);
    report.equality("entropy_identity", gain, by_entropies, 1e-10);
    Ok(report)
}

/// With deterministic dynamics and observations that determine the sliced
/// state, observations carry no extra information for any reasoning step.
/// Both hypotheses are checked before anything is certified.
pub fn check_corollary3(oracle: &OracleCoTProcess) -> Result<TheoremReport> {
    let m = &oracle.momdp;
    for s in 0..m.states {
        for a in 0..m.actions {
            let row = m.step_distribution(s, a)?;
            if !row.iter().all(|&p| p == 0.0 || p == 1.0) {
                return Err(TheoryError::Precondition(format!(
                    "transitions are not deterministic: state {s}, action {a} has row {row:?}"
                )));
            }
        }
    }
    let joint = oracle.enumerate()?;
    let l = joint.layout;
    let mut report = TheoremReport::new("deterministic_observable");
    for i in 0..=l.horizon {
        let h = joint.dist.entropy(&[l.state(i)], &[l.obs(i)])?;
        if h > 1e-12 {
            return Err(TheoryError::Precondition(format!(
                "observation o_{i} does not determine the sliced state (conditional entropy {h:e})"
            )));
        }
    }
    for i in 1..=l.horizon + 1 {
        let step = reasoning_uncertainty_gain_in(&joint, i)?;
        let gain = step.get("gain");
        report.quantity(format!("gain[{i}]"), gain);
        report.gap(format!("zero_gain[{i}]"), -gain, 1e-12);
        report.gap(format!("nonnegative[{i}]"), gain, 1e-12);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momdp::{DiscreteMomdp, Modality, Render, Slice, DEFAULT_SUPPORT_CAP};
    use crate::theory::{Actionable, OracleLimits, Perturbation, ReasoningKernel, Source};

    fn swap_oracle(horizon: usize, render: Render) -> OracleCoTProcess {
        let momdp = DiscreteMomdp::deterministic(
            &[vec![1], vec![0]],
            vec![0.5, 0.5],
            vec![Slice::identity(2)],
            vec![render],
            horizon,
        )
        .unwrap();
        OracleCoTProcess {
            momdp,
            question_prior: vec![1.0],
            initial_slice: 0,
            reasoning_kernel: ReasoningKernel::Seeded {
                seed: 3,
                deterministic_rate: 0.0,
            },
            action_map: vec![
                Actionable::Transition {
                    action: 0,
                    source: Source::Latest,
                },
                Actionable::Query { slice: 0 },
            ],
            answer_outcomes: 2,
            render_assignment: vec![0; horizon + 1],
            support_cap: DEFAULT_SUPPORT_CAP,
        }
    }

    #[test]
    fn exact_model_has_zero_error() {
        for seed in [1, 4, 9] {
            let oracle = OracleCoTProcess::random(seed, OracleLimits::default());
            let joint = oracle.enumerate().unwrap();
            let model = FactoredCoTModel::from_oracle(&joint).unwrap();
            let r = check_theorem1_in(&joint, &model).unwrap();
            for q in ["marginal_answer_kl", "joint_kl", "reasoning_error", "world_model_error"] {
                assert!(r.get(q).abs() < 1e-12, "{q} = {}", r.get(q));
            }
            assert!(r.passed);
        }
    }

    #[test]
    fn answer_only_perturbation_is_one_term() {
        let oracle = OracleCoTProcess::random(12, OracleLimits::default());
        let joint = oracle.enumerate().unwrap();
        let h = joint.layout.horizon;
        let model = FactoredCoTModel::perturbed(&joint, 5, &Perturbation::answer_only(0.8, h)).unwrap();
        let r = check_theorem1_in(&joint, &model).unwrap();

        // Single-term oracle: sum over full sequences of p ln p(A|R)/q(A|R),
        // with p(A|R) from a fresh marginal over (R, A).
        let obs = joint.layout.observable();
        let n = obs.len();
        let full = joint.dist.marginal_table(&obs);
        let mut prefix_mass: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (x, p) in &full {
            *prefix_mass.entry(x[..n - 1].to_vec()).or_default() += p;
        }
        let mut expected = 0.0;
        for (x, p) in &full {
            let cond = p / prefix_mass[&x[..n - 1]];
            let q = model.factor(n - 1).row(&x[..n - 1]).unwrap()[x[n - 1] as usize];
            expected += p * (cond / q).ln();
        }
        assert!(expected > 0.0);
        assert!((r.get("joint_kl") - expected).abs() < 1e-9);
        assert!(r.get("world_model_error").abs() < 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn implicit_observations_give_zero_gain() {
        let oracle = swap_oracle(3, Render::empty(2));
        let joint = oracle.enumerate().unwrap();
        for i in 1..=4 {
            let r = reasoning_uncertainty_gain_in(&joint, i).unwrap();
            assert!(r.get("gain").abs() < 1e-12);
            assert!(r.passed);
        }
    }

    #[test]
    fn stochastic_oracle_respects_bounds() {
        let oracle = OracleCoTProcess::random(13, OracleLimits::default());
        for i in 1..=oracle.horizon() + 1 {
            let r = reasoning_uncertainty_gain(&oracle, i).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(matches!(
            reasoning_uncertainty_gain(&oracle, 0),
            Err(TheoryError::Domain(_))
        ));
    }

    #[test]
    fn corollary_on_swap_chain() {
        let r = check_corollary3(&swap_oracle(3, Render::identity(Modality::Visual, 2))).unwrap();
        assert!(r.passed);
        for i in 1..=4 {
            assert!(r.get(&format!("gain[{i}]")) <= 1e-12);
        }
    }

    #[test]
    fn corollary_rejects_violated_hypotheses() {
        let stochastic = (0..)
            .map(|s| OracleCoTProcess::random(s, OracleLimits::default()))
            .find(|o| !o.momdp.is_deterministic())
            .unwrap();
        let err = check_corollary3(&stochastic).unwrap_err();
        assert!(matches!(&err, TheoryError::Precondition(m) if m.contains("deterministic")));

        let hidden = swap_oracle(2, Render::empty(2));
        let err = check_corollary3(&hidden).unwrap_err();
        assert!(matches!(&err, TheoryError::Precondition(m) if m.contains("determine")));
    }
}
