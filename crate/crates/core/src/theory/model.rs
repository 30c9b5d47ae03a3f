//! Factored CoT models `p_theta` over the observable sequence
//! `(Q, o_0, r_1, o_1, ..., r_H, o_H, A)`.
//!
//! Position `k` of the sequence is predicted from the full prefix `x_{<k}`;
//! even positions `2i` are reasoning factors, odd positions `2i + 1` are
//! world-modeling factors.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::CoTJoint;
use super::{Result, TheoryError};
use crate::momdp::{normalize, ROW_TOLERANCE};
use crate::seed::splitmix64;

/// `p(x_position | prefix)` for every prefix in `rows`; prefixes outside the
/// table use `fallback` when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub position: usize,
    pub outcomes: usize,
    pub rows: BTreeMap<Vec<u32>, Vec<f64>>,
    pub fallback: Option<Vec<f64>>,
}

impl ConditionalTable {
    pub fn row(&self, prefix: &[u32]) -> Result<&[f64]> {
        self.rows
            .get(prefix)
            .or(self.fallback.as_ref())
            .map(Vec::as_slice)
            .ok_or_else(|| {
                TheoryError::AbsoluteContinuity {
                    atom: format!("position {} prefix {prefix:?} has no row", self.position),
                }
            })
    }

    fn validate(&self) -> Result<()> {
        let empty = Vec::new();
        for (prefix, row) in self.rows.iter().chain(self.fallback.as_ref().map(|f| (&empty, f))) {
            let sum: f64 = row.iter().sum();
            if row.len() != self.outcomes || (sum - 1.0).abs() > ROW_TOLERANCE || row.iter().any(|&p| p < 0.0) {
                return Err(TheoryError::Domain(format!(
                    "row at position {} prefix {prefix:?} is not a distribution over {} outcomes",
                    self.position, self.outcomes
                )));
            }
        }
        Ok(())
    }
}

/// How [`FactoredCoTModel::perturbed`] distorts the oracle conditionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Each supported entry is scaled by `exp(strength * u)`, `u ~ U[-1, 1]`.
    pub strength: f64,
    /// Mixing weight with the uniform row; positive values give every factor
    /// full support, including a uniform fallback for unseen prefixes.
    pub mixing: f64,
    /// Sequence positions to perturb; `None` perturbs every factor.
    pub positions: Option<Vec<usize>>,
}

impl Perturbation {
    pub fn all(strength: f64) -> Self {
        Perturbation {
            strength,
            mixing: 0.0,
            positions: None,
        }
    }

    /// Only the answer factor `p_theta(A | R_{H+1})`.
    pub fn answer_only(strength: f64, horizon: usize) -> Self {
        Perturbation {
            strength,
            mixing: 0.0,
            positions: Some(vec![2 * horizon + 2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredCoTModel {
    pub horizon: usize,
    /// Cardinality of every sequence position.
    pub cardinalities: Vec<usize>,
    /// Factors for positions `2..=2H+2`, in order.
    pub factors: Vec<ConditionalTable>,
}

impl FactoredCoTModel {
    /// Sequence length `2H + 3`.
    pub fn len(&self) -> usize {
        2 * self.horizon + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn factor(&self, position: usize) -> &ConditionalTable {
        &self.factors[position - 2]
    }

    /// Reasoning factor `p_theta(r_i | R_i)`, `i in 1..=H+1`.
    pub fn reasoning_factor(&self, i: usize) -> &ConditionalTable {
        self.factor(2 * i)
    }

    /// World-modeling factor `p_theta(o_i | R~_i)`, `i in 1..=H`.
    pub fn world_model_factor(&self, i: usize) -> &ConditionalTable {
        self.factor(2 * i + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors.len() != 2 * self.horizon + 1 || self.cardinalities.len() != self.len() {
            return Err(TheoryError::Domain(format!(
                "{} factors for horizon {}",
                self.factors.len(),
                self.horizon
            )));
        }
        for (k, f) in self.factors.iter().enumerate() {
            if f.position != k + 2 || f.outcomes != self.cardinalities[k + 2] {
                return Err(TheoryError::Domain(format!("factor {k} is misplaced")));
            }
            f.validate()?;
        }
        Ok(())
    }

    /// The oracle's own conditionals: every factor is exact.
    pub fn from_oracle(joint: &CoTJoint) -> Result<Self> {
        let obs = joint.layout.observable();
        let cardinalities: Vec<usize> = obs
            .iter()
            .map(|&a| joint.dist.axes()[a].cardinality as usize)
            .collect();
        let mut factors = Vec::with_capacity(obs.len() - 2);
        for k in 2..obs.len() {
            let mut rows: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
            for (key, p) in joint.dist.marginal_table(&obs[..=k]) {
                rows.entry(key[..k].to_vec())
                    .or_insert_with(|| vec![0.0; cardinalities[k]])[key[k] as usize] += p;
            }
            for row in rows.values_mut() {
                normalize(row);
            }
            factors.push(ConditionalTable {
                position: k,
                outcomes: cardinalities[k],
                rows,
                fallback: None,
            });
        }
        let model = FactoredCoTModel {
            horizon: joint.layout.horizon,
            cardinalities,
            factors,
        };
        model.validate()?;
        Ok(model)
    }

    /// Oracle conditionals distorted by seeded multiplicative noise.
    pub fn perturbed(joint: &CoTJoint, seed: u64, how: &Perturbation) -> Result<Self> {
        let mut model = Self::from_oracle(joint)?;
        let mut rng = crate::seed::rng(splitmix64(seed ^ 0x9E27));
        for f in &mut model.factors {
            let chosen = how.positions.as_ref().is_none_or(|p| p.contains(&f.position));
            if !chosen {
                continue;
            }
            let n = f.outcomes;
            for row in f.rows.values_mut() {
                for x in row.iter_mut() {
                    if *x > 0.0 {
                        *x *= (how.strength * rng.gen_range(-1.0..=1.0)).exp();
                    }
                }
                normalize(row);
                if how.mixing > 0.0 {
                    for x in row.iter_mut() {
                        *x = (1.0 - how.mixing) * *x + how.mixing / n as f64;
                    }
                    normalize(row);
                }
            }
            if how.mixing > 0.0 {
                f.fallback = Some(vec![1.0 / n as f64; n]);
            }
        }
        model.validate()?;
        Ok(model)
    }

    /// `p_theta(A | Q, o_0)` by summing the model over every CoT it can emit.
    pub fn answer_distribution(&self, question: u32, initial_obs: u32) -> Result<Vec<f64>> {
        let n = self.len();
        let mut out = vec![0.0; self.cardinalities[n - 1]];
        let mut prefix = vec![question, initial_obs];
        self.accumulate(&mut prefix, 1.0, &mut out)?;
        Ok(out)
    }

    fn accumulate(&self, prefix: &mut Vec<u32>, p: f64, out: &mut [f64]) -> Result<()> {
        let k = prefix.len();
        let row = self.factor(k).row(prefix)?;
        if k == self.len() - 1 {
            for (a, &pa) in row.iter().enumerate() {
                out[a] += p * pa;
            }
            return Ok(());
        }
        for (x, &px) in row.iter().enumerate() {
            if px > 0.0 {
                prefix.push(x as u32);
                self.accumulate(prefix, p * px, out)?;
                prefix.pop();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{OracleCoTProcess, OracleLimits};

    #[test]
    fn oracle_model_reproduces_answer_marginal() {
        let oracle = OracleCoTProcess::random(5, OracleLimits::default());
        let joint = oracle.enumerate().unwrap();
        let model = FactoredCoTModel::from_oracle(&joint).unwrap();
        let l = joint.layout;
        let ctx = joint.dist.marginal_table(&[l.question(), l.obs(0)]);
        let full = joint.dist.marginal_table(&[l.question(), l.obs(0), l.answer()]);
        for (key, pctx) in ctx {
            let model_row = model.answer_distribution(key[0], key[1]).unwrap();
            for (k, p) in &full {
                if k[..2] == key[..] {
                    assert!((model_row[k[2] as usize] - p / pctx).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn perturbation_keeps_rows_normalized_and_respects_mask() {
        let oracle = OracleCoTProcess::random(8, OracleLimits::default());
        let joint = oracle.enumerate().unwrap();
        let exact = FactoredCoTModel::from_oracle(&joint).unwrap();
        let h = exact.horizon;
        let m = FactoredCoTModel::perturbed(&joint, 1, &Perturbation::answer_only(0.7, h)).unwrap();
        for pos in 2..2 * h + 2 {
            assert_eq!(m.factor(pos), exact.factor(pos));
        }
        let mixed = FactoredCoTModel::perturbed(
            &joint,
            1,
            &Perturbation {
                strength: 0.3,
                mixing: 0.1,
                positions: None,
            },
        )
        .unwrap();
        assert!(mixed.factors.iter().all(|f| f.fallback.is_some()));
        let total: f64 = mixed.answer_distribution(0, joint.dist.atoms().next().unwrap().0[2]).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn missing_row_is_a_continuity_error() {
        let t = ConditionalTable {
            position: 2,
            outcomes: 2,
            rows: BTreeMap::new(),
            fallback: None,
        };
        assert!(matches!(t.row(&[0, 0]), Err(TheoryError::AbsoluteContinuity { .. })));
    }
}
