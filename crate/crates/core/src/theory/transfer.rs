//! Transfer-learning bounds on finite parameter grids.
//!
//! Population risks are exact sums over a finite sample space. The growth
//! constant `mu` and the Lipschitz constant `L_Q` are measured from the loss
//! table as the tightest constants over the grid; claimed values are checked
//! against the measurement and never used on trust.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::certify::TheoremReport;
use super::{Result, TheoryError};
use crate::momdp::{dirichlet_row, normalize};
use crate::seed::{derive, splitmix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferProblem {
    pub p_dist: Vec<f64>,
    pub q_dist: Vec<f64>,
    pub theta_grid: Vec<Vec<f64>>,
    pub norm: Norm,
    /// `loss[theta][x]` in `[0, 1]`.
    pub loss: Vec<Vec<f64>>,
    pub mu: f64,
    pub lipschitz_lq: f64,
    pub radius: f64,
}

/// Membership slack for the constraint ball, absorbing rounding in grid
/// coordinates.
const BALL_SLACK: f64 = 1e-12;

impl TransferProblem {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TheoryError::Domain(m));
        let m = self.p_dist.len();
        if m == 0 || self.q_dist.len() != m {
            return bad("P and Q must share a non-empty sample space".into());
        }
        for (name, d) in [("P", &self.p_dist), ("Q", &self.q_dist)] {
            let s: f64 = d.iter().sum();
            if (s - 1.0).abs() > 1e-12 || d.iter().any(|&p| p < 0.0) {
                return bad(format!("{name} is not normalized (sum {s})"));
            }
        }
        if self.theta_grid.is_empty() || self.loss.len() != self.theta_grid.len() {
            return bad("loss table must have one row per grid point".into());
        }
        let dim = self.theta_grid[0].len();
        if self.theta_grid.iter().any(|t| t.len() != dim) {
            return bad("grid points have mixed dimensions".into());
        }
        for (t, row) in self.loss.iter().enumerate() {
            if row.len() != m || row.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return bad(format!("loss row {t} leaves [0, 1] or has the wrong length"));
            }
        }
        if !(self.mu > 0.0) || !(self.lipschitz_lq > 0.0) || !(self.radius >= 0.0) {
            return bad("mu and L_Q must be positive and r nonnegative".into());
        }
        Ok(())
    }

    fn risks(&self, dist: &[f64]) -> Vec<f64> {
        self.loss
            .iter()
            .map(|row| row.iter().zip(dist).map(|(l, p)| l * p).sum())
            .collect()
    }

    pub fn total_variation(&self) -> f64 {
        0.5 * self.p_dist.iter().zip(&self.q_dist).map(|(p, q)| (p - q).abs()).sum::<f64>()
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        self.norm.distance(&self.theta_grid[a], &self.theta_grid[b])
    }

    /// Tightest `(mu, L_Q)` over the grid, with the pairs attaining them.
    pub fn measured_constants(&self) -> MeasuredConstants {
        let lp = self.risks(&self.p_dist);
        let lq = self.risks(&self.q_dist);
        let tp = argmin(&lp);
        let mut mu = (f64::INFINITY, tp, tp);
        for t in 0..lp.len() {
            if t == tp {
                continue;
            }
            let d = self.distance(t, tp);
            let g = 2.0 * (lp[t] - lp[tp]) / (d * d);
            if g < mu.0 {
                mu = (g, tp, t);
            }
        }
        let mut lip = (0.0, 0, 0);
        for a in 0..lq.len() {
            for b in a + 1..lq.len() {
                let l = (lq[a] - lq[b]).abs() / self.distance(a, b);
                if l > lip.0 {
                    lip = (l, a, b);
                }
            }
        }
        MeasuredConstants {
            mu: mu.0,
            mu_pair: (mu.1, mu.2),
            lipschitz: lip.0,
            lipschitz_pair: (lip.1, lip.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredConstants {
    pub mu: f64,
    pub mu_pair: (usize, usize),
    pub lipschitz: f64,
    pub lipschitz_pair: (usize, usize),
}

/// First index of the minimum.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Certifies the uniform loss shift, risk proximity, parameter drift and
/// bias bounds exactly, and the excess-risk bound empirically over `trials`
/// resamples of `n_samples` points from `Q`.
pub fn check_transfer_bounds(
    problem: &TransferProblem,
    n_samples: usize,
    seed: u64,
    trials: usize,
) -> Result<TheoremReport> {
    problem.validate()?;
    let grid = &problem.theta_grid;
    let c = problem.measured_constants();
    if !(c.mu > 0.0) {
        let (a, b) = c.mu_pair;
        return Err(TheoryError::Precondition(format!(
            "no quadratic growth between theta {:?} and theta {:?}",
            grid[a], grid[b]
        )));
    }
    if problem.mu > c.mu * (1.0 + 1e-12) {
        let (a, b) = c.mu_pair;
        return Err(TheoryError::Precondition(format!(
            "claimed mu {} exceeds the growth {} between theta {:?} and theta {:?}",
            problem.mu, c.mu, grid[a], grid[b]
        )));
    }
    if problem.lipschitz_lq < c.lipschitz * (1.0 - 1e-12) {
        let (a, b) = c.lipschitz_pair;
        return Err(TheoryError::Precondition(format!(
            "claimed L_Q {} is below the slope {} between theta {:?} and theta {:?}",
            problem.lipschitz_lq, c.lipschitz, grid[a], grid[b]
        )));
    }

    let lp = problem.risks(&problem.p_dist);
    let lq = problem.risks(&problem.q_dist);
    let tp = argmin(&lp);
    let tq = argmin(&lq);
    let tv = problem.total_variation();
    let sup_shift = lp.iter().zip(&lq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let drift = problem.distance(tq, tp);
    let drift_bound = (4.0 * tv / c.mu).sqrt();
    let r = problem.radius;

    let ball: Vec<usize> = (0..grid.len())
        .filter(|&t| problem.distance(t, tp) <= r + BALL_SLACK)
        .collect();
    let ball_min = ball.iter().map(|&t| lq[t]).fold(f64::INFINITY, f64::min);
    let bias = ball_min - lq[tq];
    let bias_bound = c.lipschitz * (drift_bound - r).max(0.0);

    let mut report = TheoremReport::new("transfer_bounds");
    report.quantity("tv", tv);
    report.quantity("mu_measured", c.mu);
    report.quantity("mu_claimed", problem.mu);
    report.quantity("lipschitz_measured", c.lipschitz);
    report.quantity("lipschitz_claimed", problem.lipschitz_lq);
    report.quantity("radius", r);
    report.quantity("sup_loss_shift", sup_shift);
    report.quantity("risk_p_at_theta_q", lp[tq]);
    report.quantity("risk_p_at_theta_p", lp[tp]);
    report.quantity("drift", drift);
    report.quantity("drift_bound", drift_bound);
    report.quantity("bias", bias);
    report.quantity("bias_bound", bias_bound);

    report.gap("uniform_shift", tv - sup_shift, 1e-12);
    report.gap("risk_proximity", lp[tp] + 2.0 * tv - lp[tq], 1e-12);
    report.gap("drift", drift_bound - drift, 1e-9);
    report.gap("bias", bias_bound - bias, 1e-9);
    if r >= drift_bound {
        report.quantity("zero_bias_case", 1.0);
        report.gap("zero_bias", -bias, 0.0);
    } else {
        report.quantity("zero_bias_case", 0.0);
    }

    if trials > 0 {
        if n_samples == 0 {
            return Err(TheoryError::Domain("empirical check needs at least one sample".into()));
        }
        let sampler = WeightedIndex::new(&problem.q_dist)
            .map_err(|e| TheoryError::Domain(format!("Q cannot be sampled: {e}")))?;
        let mut worst_slack = f64::INFINITY;
        let mut max_excess: f64 = 0.0;
        let mut max_dev: f64 = 0.0;
        for t in 0..trials {
            let mut rng = crate::seed::rng(derive(seed, 0, t as u32));
            let mut freq = vec![0.0; problem.q_dist.len()];
            for _ in 0..n_samples {
                freq[sampler.sample(&mut rng)] += 1.0;
            }
            for f in freq.iter_mut() {
                *f /= n_samples as f64;
            }
            let emp = |th: usize| -> f64 { problem.loss[th].iter().zip(&freq).map(|(l, p)| l * p).sum() };
            let mut best = ball[0];
            let mut best_val = emp(best);
            let mut dev: f64 = 0.0;
            for &th in &ball {
                let e = emp(th);
                dev = dev.max((e - lq[th]).abs());
                if e < best_val {
                    best = th;
                    best_val = e;
                }
            }
            let excess = lq[best] - lq[tq];
            max_excess = max_excess.max(excess);
            max_dev = max_dev.max(dev);
            worst_slack = worst_slack.min(2.0 * dev + bias_bound - excess);
        }
        report.quantity("max_excess_risk", max_excess);
        report.quantity("max_sup_deviation", max_dev);
        report.gap("excess_risk", worst_slack, 1e-9);
    }
    Ok(report)
}

/// Builds a grid problem whose `P`-optimum sits exactly on a grid point and
/// whose shift has total variation `tv` exactly (up to rounding).
///
/// One dimension: 201 points on `[-0.5, 0.5]` with loss `(theta - c_x)^2`.
/// Two dimensions: a 21 x 21 grid under the L1 norm with loss
/// `|theta - c_x|_2^2 / 2`. The radius is always a whole number of grid
/// steps, so the constrained optimum can reach along a lattice path.
pub fn random_transfer_problem(seed: u64, dim: usize, tv: f64, zero_bias: bool) -> Result<TransferProblem> {
    if !(1..=2).contains(&dim) {
        return Err(TheoryError::Domain(format!("dimension {dim} not supported")));
    }
    let mut rng = crate::seed::rng(splitmix64(seed ^ 0x7A45));
    let (points, norm, scale) = if dim == 1 { (201, Norm::L1, 1.0) } else { (21, Norm::L1, 0.5) };
    let step = 1.0 / (points - 1) as f64;
    let axis: Vec<f64> = (0..points).map(|i| -0.5 + i as f64 * step).collect();
    let theta_grid: Vec<Vec<f64>> = if dim == 1 {
        axis.iter().map(|&x| vec![x]).collect()
    } else {
        axis.iter().flat_map(|&x| axis.iter().map(move |&y| vec![x, y])).collect()
    };

    let m = 12;
    let p_dist = dirichlet_row(&mut rng, m);
    let mut centers: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..dim).map(|_| rng.gen_range(-0.45..0.45)).collect())
        .collect();
    // Shift the centers so the P-mean is a grid point.
    for d in 0..dim {
        let mean: f64 = centers.iter().zip(&p_dist).map(|(c, p)| c[d] * p).sum();
        let snapped = ((mean + 0.5) / step).round() * step - 0.5;
        for c in centers.iter_mut() {
            c[d] += snapped - mean;
        }
    }
    let loss: Vec<Vec<f64>> = theta_grid
        .iter()
        .map(|th| {
            centers
                .iter()
                .map(|c| {
                    let sq: f64 = th.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    (scale * sq).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();

    // Q = (1 - lambda) P + lambda delta_j has TV = lambda (1 - P_j).
    let j = argmin(&p_dist);
    let lambda = tv / (1.0 - p_dist[j]);
    if !(0.0..=1.0).contains(&lambda) {
        return Err(TheoryError::Domain(format!("total variation {tv} is not reachable")));
    }
    let mut q_dist: Vec<f64> = p_dist.iter().map(|p| (1.0 - lambda) * p).collect();
    q_dist[j] += lambda;
    normalize(&mut q_dist);

    let mut problem = TransferProblem {
        p_dist,
        q_dist,
        theta_grid,
        norm,
        loss,
        mu: 1.0,
        lipschitz_lq: 1.0,
        radius: 0.0,
    };
    let c = problem.measured_constants();
    problem.mu = c.mu;
    problem.lipschitz_lq = c.lipschitz.max(f64::MIN_POSITIVE);
    let bound = (4.0 * problem.total_variation() / c.mu).sqrt();
    let steps_to_bound = (bound / step).ceil() as i64;
    let k = if zero_bias {
        steps_to_bound + rng.gen_range(0..3)
    } else {
        rng.gen_range(0..steps_to_bound.max(1))
    };
    problem.radius = k as f64 * step;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_distributions_have_no_shift() {
        let mut p = random_transfer_problem(1, 1, 0.1, false).unwrap();
        p.q_dist = p.p_dist.clone();
        let r = check_transfer_bounds(&p, 50, 3, 5).unwrap();
        assert_eq!(r.get("tv"), 0.0);
        assert_eq!(r.get("drift_bound"), 0.0);
        assert_eq!(r.get("bias"), 0.0);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn one_dimensional_grid_certifies() {
        let p = random_transfer_problem(7, 1, 0.1, false).unwrap();
        assert_eq!(p.theta_grid.len(), 201);
        assert!((p.total_variation() - 0.1).abs() < 1e-12);
        let r = check_transfer_bounds(&p, 200, 1, 20).unwrap();
        // Exhaustive grid-minimization oracle for the drift.
        let lp: Vec<f64> = p.loss.iter().map(|row| row.iter().zip(&p.p_dist).map(|(l, q)| l * q).sum()).collect();
        let lq: Vec<f64> = p.loss.iter().map(|row| row.iter().zip(&p.q_dist).map(|(l, q)| l * q).sum()).collect();
        let best = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] < v[b] { i } else { b });
        let drift = (p.theta_grid[best(&lp)][0] - p.theta_grid[best(&lq)][0]).abs();
        assert!((r.get("drift") - drift).abs() < 1e-15);
        assert!((r.get("mu_measured") - 2.0).abs() < 1e-6);
        for (name, g) in &r.gaps {
            assert!(g.slack >= -1e-9, "{name}: {g:?}");
        }
    }

    #[test]
    fn radius_beyond_drift_bound_has_zero_bias() {
        for seed in 0..6 {
            let p = random_transfer_problem(seed, 1 + (seed as usize % 2), 0.2, true).unwrap();
            let r = check_transfer_bounds(&p, 100, seed, 3).unwrap();
            assert_eq!(r.get("zero_bias_case"), 1.0);
            assert_eq!(r.get("bias"), 0.0);
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn overclaimed_constants_are_rejected() {
        let mut p = random_transfer_problem(2, 1, 0.1, false).unwrap();
        p.mu *= 1.5;
        let err = check_transfer_bounds(&p, 10, 0, 0).unwrap_err();
        assert!(matches!(&err, TheoryError::Precondition(m) if m.contains("theta")));
        let mut p = random_transfer_problem(2, 2, 0.1, false).unwrap();
        p.lipschitz_lq *= 0.5;
        assert!(matches!(
            check_transfer_bounds(&p, 10, 0, 0),
            Err(TheoryError::Precondition(_))
        ));
    }
}
