//! Seeded certificate ensembles, as run by the `theory` command.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::certify::{check_corollary3, check_theorem1_in, reasoning_uncertainty_gain_in, TheoremReport};
use super::model::{FactoredCoTModel, Perturbation};
use super::oracle::{OracleCoTProcess, OracleLimits};
use super::transfer::{check_transfer_bounds, random_transfer_problem};
use super::Result;
use crate::seed::derive;

const STREAM_COT: u32 = 1;
const STREAM_COROLLARY: u32 = 2;
const STREAM_TRANSFER: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: usize,
    pub seed: u64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub reports: Vec<TheoremReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub check: String,
    pub master_seed: u64,
    pub trials: usize,
    pub passed: bool,
    /// Some instances hit the enumeration cap and were skipped.
    pub partial: bool,
    /// Smallest slack seen for each gap name, across all instances.
    pub worst_slack: BTreeMap<String, f64>,
    pub instances: Vec<InstanceOutcome>,
}

impl EnsembleReport {
    fn assemble(check: &str, master_seed: u64, instances: Vec<InstanceOutcome>) -> Self {
        let mut worst_slack: BTreeMap<String, f64> = BTreeMap::new();
        for inst in &instances {
            for r in &inst.reports {
                for (name, g) in &r.gaps {
                    // Per-step names like "nonnegative[2]" collapse to "nonnegative".
                    let base = name.split('[').next().unwrap_or(name).to_string();
                    let w = worst_slack.entry(base).or_insert(f64::INFINITY);
                    *w = w.min(g.slack);
                }
            }
        }
        EnsembleReport {
            check: check.to_string(),
            master_seed,
            trials: instances.len(),
            passed: instances.iter().all(|i| i.passed || i.error.as_deref().is_some_and(is_capacity)),
            partial: instances.iter().any(|i| i.error.as_deref().is_some_and(is_capacity)),
            worst_slack,
            instances,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &InstanceOutcome> {
        self.instances.iter().filter(|i| !i.passed)
    }
}

const CAPACITY_TAG: &str = "joint support exceeds cap";

fn is_capacity(msg: &str) -> bool {
    msg.contains(CAPACITY_TAG)
}

fn outcome(index: usize, seed: u64, result: Result<Vec<TheoremReport>>) -> InstanceOutcome {
    match result {
        Ok(reports) => InstanceOutcome {
            index,
            seed,
            passed: reports.iter().all(|r| r.passed),
            error: None,
            reports,
        },
        Err(e) => InstanceOutcome {
            index,
            seed,
            passed: false,
            error: Some(e.to_string()),
            reports: vec![],
        },
    }
}

fn run<F>(check: &str, master_seed: u64, trials: usize, stream: u32, f: F) -> EnsembleReport
where
    F: Fn(usize, u64) -> Result<Vec<TheoremReport>> + Sync,
{
    let instances = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive(master_seed, stream, i as u32);
            outcome(i, seed, f(i, seed))
        })
        .collect();
    EnsembleReport::assemble(check, master_seed, instances)
}

/// The random oracle behind instance `i` of the KL and MI ensembles.
pub(crate) fn cot_instance(seed: u64) -> OracleCoTProcess {
    OracleCoTProcess::random(seed, OracleLimits::default())
}

/// KL chain rule over random oracles with random perturbed models. Every
/// fourth model is mixed with the uniform row, so it puts mass on CoTs the
/// oracle never emits.
pub fn kl_ensemble(master_seed: u64, trials: usize) -> EnsembleReport {
    run("kl", master_seed, trials, STREAM_COT, |i, seed| {
        let joint = cot_instance(seed).enumerate()?;
        let how = Perturbation {
            strength: 0.2 + 0.8 * ((seed >> 11) % 1000) as f64 / 1000.0,
            mixing: if i % 4 == 0 { 0.05 } else { 0.0 },
            positions: None,
        };
        let model = FactoredCoTModel::perturbed(&joint, seed, &how)?;
        Ok(vec![check_theorem1_in(&joint, &model)?])
    })
}

/// Uncertainty gain bounds at every step of the same oracles as [`kl_ensemble`].
pub fn mi_ensemble(master_seed: u64, trials: usize) -> EnsembleReport {
    run("mi", master_seed, trials, STREAM_COT, |_, seed| {
        let joint = cot_instance(seed).enumerate()?;
        (1..=joint.layout.horizon + 1)
            .map(|i| reasoning_uncertainty_gain_in(&joint, i))
            .collect()
    })
}

/// Zero gain on deterministic, fully observable oracles.
pub fn corollary_ensemble(master_seed: u64, trials: usize) -> EnsembleReport {
    run("corollary", master_seed, trials, STREAM_COROLLARY, |_, seed| {
        let oracle = OracleCoTProcess::random_deterministic_observable(seed, OracleLimits::default());
        Ok(vec![check_corollary3(&oracle)?])
    })
}

/// Transfer bounds over alternating 1-D and 2-D grid problems; every third
/// problem takes a radius past the drift bound.
pub fn transfer_ensemble(master_seed: u64, trials: usize) -> EnsembleReport {
    run("transfer", master_seed, trials, STREAM_TRANSFER, |i, seed| {
        let tv = 0.02 + 0.28 * ((seed >> 7) % 1000) as f64 / 1000.0;
        let problem = random_transfer_problem(seed, 1 + i % 2, tv, i % 3 == 0)?;
        Ok(vec![check_transfer_bounds(&problem, 100, seed, 10)?])
    })
}
