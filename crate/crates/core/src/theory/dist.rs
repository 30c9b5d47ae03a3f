use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use serde::{Deserialize, Serialize};

use super::{Result, TheoryError};

/// Hash map with a fixed hasher, so iteration order (and therefore float
/// summation order) is reproducible run to run.
pub type StableMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

/// Mass tolerance for joint distributions.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub cardinality: u32,
}

/// Sparse joint distribution over a product of finite axes.
///
/// Atoms are stored as flat rows of axis values; duplicate keys are merged on
/// construction and zero-mass atoms dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteJointDistribution {
    axes: Vec<Axis>,
    values: Vec<u32>,
    mass: Vec<f64>,
    radix: Vec<u128>,
}

impl FiniteJointDistribution {
    pub fn new<I>(axes: Vec<Axis>, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut radix = Vec::with_capacity(axes.len());
        let mut acc: u128 = 1;
        for axis in &axes {
            if axis.cardinality == 0 {
                return Err(TheoryError::Domain(format!("axis '{}' is empty", axis.name)));
            }
            radix.push(acc);
            acc = acc
                .checked_mul(axis.cardinality as u128)
                .ok_or_else(|| TheoryError::Domain("product space too large to index".into()))?;
        }

        let width = axes.len();
        let mut index: StableMap<Vec<u32>, usize> = StableMap::default();
        let mut values = Vec::new();
        let mut mass = Vec::new();
        for (key, p) in atoms {
            if key.len() != width {
                return Err(TheoryError::Domain(format!(
                    "atom has {} coordinates, expected {width}",
                    key.len()
                )));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(TheoryError::Domain(format!("atom {key:?} has mass {p}")));
            }
            for (v, axis) in key.iter().zip(&axes) {
                if *v >= axis.cardinality {
                    return Err(TheoryError::Domain(format!(
                        "value {v} outside axis '{}' of size {}",
                        axis.name, axis.cardinality
                    )));
                }
            }
            if p == 0.0 {
                continue;
            }
            match index.get(&key) {
                Some(&i) => mass[i] += p,
                None => {
                    index.insert(key.clone(), mass.len());
                    values.extend_from_slice(&key);
                    mass.push(p);
                }
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(TheoryError::Domain(format!("joint mass sums to {total}")));
        }
        Ok(FiniteJointDistribution {
            axes,
            values,
            mass,
            radix,
        })
    }

    /// Convenience constructor for axes given as `(name, cardinality)`.
    pub fn from_named<I>(axes: &[(&str, u32)], atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let axes = axes
            .iter()
            .map(|(n, c)| Axis {
                name: n.to_string(),
                cardinality: *c,
            })
            .collect();
        Self::new(axes, atoms)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        let w = self.axes.len();
        self.mass
            .iter()
            .enumerate()
            .map(move |(i, &p)| (&self.values[i * w..(i + 1) * w], p))
    }

    fn key(&self, atom: usize, vars: &[usize]) -> u128 {
        let w = self.axes.len();
        let row = &self.values[atom * w..(atom + 1) * w];
        vars.iter().map(|&v| row[v] as u128 * self.radix[v]).sum()
    }

    /// Marginal over `vars`, keyed by the mixed-radix code of the projection.
    pub fn marginal(&self, vars: &[usize]) -> StableMap<u128, f64> {
        let mut out: StableMap<u128, f64> = StableMap::default();
        for i in 0..self.mass.len() {
            *out.entry(self.key(i, vars)).or_insert(0.0) += self.mass[i];
        }
        out
    }

    /// Marginal over `vars` as explicit value tuples.
    pub fn marginal_table(&self, vars: &[usize]) -> Vec<(Vec<u32>, f64)> {
        let w = self.axes.len();
        let mut idx: StableMap<Vec<u32>, usize> = StableMap::default();
        let mut out: Vec<(Vec<u32>, f64)> = Vec::new();
        for i in 0..self.mass.len() {
            let row = &self.values[i * w..(i + 1) * w];
            let key: Vec<u32> = vars.iter().map(|&v| row[v]).collect();
            match idx.get(&key) {
                Some(&j) => out[j].1 += self.mass[i],
                None => {
                    idx.insert(key.clone(), out.len());
                    out.push((key, self.mass[i]));
                }
            }
        }
        out
    }

    fn check_vars(&self, sets: &[&[usize]]) -> Result<()> {
        let mut seen = vec![false; self.axes.len()];
        for set in sets {
            for &v in *set {
                if v >= self.axes.len() {
                    return Err(TheoryError::Domain(format!("axis index {v} out of range")));
                }
                if seen[v] {
                    return Err(TheoryError::Domain(format!(
                        "axis '{}' appears in more than one argument",
                        self.axes[v].name
                    )));
                }
                seen[v] = true;
            }
        }
        Ok(())
    }

    /// Unconditional entropy of the joint marginal of `vars` (nats).
    pub fn marginal_entropy(&self, vars: &[usize]) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        -self
            .marginal(vars)
            .values()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// `H(vars | given)` by definition: `-sum p(x,z) ln p(x|z)`.
    pub fn entropy(&self, vars: &[usize], given: &[usize]) -> Result<f64> {
        self.check_vars(&[vars, given])?;
        if vars.is_empty() {
            return Ok(0.0);
        }
        let both: Vec<usize> = vars.iter().chain(given).copied().collect();
        let joint = self.marginal(&both);
        let cond = self.marginal(given);
        let mut h = 0.0;
        for (&kxz, &pxz) in &joint {
            if pxz <= 0.0 {
                continue;
            }
            let kz = self.project_code(kxz, given);
            let pz = cond[&kz];
            h -= pxz * (pxz / pz).ln();
        }
        Ok(h.max(0.0))
    }

    /// `H(vars | given) = H(vars, given) - H(given)`.
    pub fn entropy_by_difference(&self, vars: &[usize], given: &[usize]) -> Result<f64> {
        self.check_vars(&[vars, given])?;
        let both: Vec<usize> = vars.iter().chain(given).copied().collect();
        Ok(self.marginal_entropy(&both) - self.marginal_entropy(given))
    }

    /// Recovers the code of a sub-projection from a projection code.
    fn project_code(&self, code: u128, onto: &[usize]) -> u128 {
        onto.iter()
            .map(|&v| {
                let value = (code / self.radix[v]) % self.axes[v].cardinality as u128;
                value * self.radix[v]
            })
            .sum()
    }

    /// `I(X; Y | Z)` by definition:
    /// `sum p(x,y,z) ln [p(x,y,z) p(z) / (p(x,z) p(y,z))]`.
    pub fn conditional_mutual_information(&self, x: &[usize], y: &[usize], z: &[usize]) -> Result<f64> {
        self.check_vars(&[x, y, z])?;
        if x.is_empty() || y.is_empty() {
            return Ok(0.0);
        }
        let xyz: Vec<usize> = x.iter().chain(y).chain(z).copied().collect();
        let xz: Vec<usize> = x.iter().chain(z).copied().collect();
        let yz: Vec<usize> = y.iter().chain(z).copied().collect();
        let pxyz = self.marginal(&xyz);
        let pxz = self.marginal(&xz);
        let pyz = self.marginal(&yz);
        let pz = self.marginal(z);
        let mut total = 0.0;
        for (&k, &p) in &pxyz {
            if p <= 0.0 {
                continue;
            }
            let a = pxz[&self.project_code(k, &xz)];
            let b = pyz[&self.project_code(k, &yz)];
            let c = pz[&self.project_code(k, z)];
            total += p * ((p * c) / (a * b)).ln();
        }
        Ok(total)
    }

    /// `I(X; Y | Z) = H(X | Z) - H(X | Y, Z)`.
    pub fn conditional_mutual_information_by_entropies(
        &self,
        x: &[usize],
        y: &[usize],
        z: &[usize],
    ) -> Result<f64> {
        self.check_vars(&[x, y, z])?;
        let yz: Vec<usize> = y.iter().chain(z).copied().collect();
        Ok(self.entropy_by_difference(x, z)? - self.entropy_by_difference(x, &yz)?)
    }

    pub fn mutual_information(&self, x: &[usize], y: &[usize]) -> Result<f64> {
        self.conditional_mutual_information(x, y, &[])
    }
}

/// `KL(p || q)` in nats for two tables over the same index set.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(TheoryError::Domain(format!(
            "tables have different lengths ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Err(TheoryError::AbsoluteContinuity { atom: i.to_string() });
        }
        total += a * (a / b).ln();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momdp::dirichlet_row;

    fn random_joint(seed: u64, cards: &[u32]) -> FiniteJointDistribution {
        let mut rng = crate::seed::rng(seed);
        let size: usize = cards.iter().map(|&c| c as usize).product();
        let w = dirichlet_row(&mut rng, size);
        let names: Vec<String> = (0..cards.len()).map(|i| format!("x{i}")).collect();
        let axes: Vec<(&str, u32)> = names.iter().map(|n| n.as_str()).zip(cards.iter().copied()).collect();
        let atoms = (0..size).map(|mut k| {
            let mut key = Vec::new();
            for &c in cards {
                key.push((k % c as usize) as u32);
                k /= c as usize;
            }
            { let i = key_index(&key, cards); (key, w[i]) }
        });
        FiniteJointDistribution::from_named(&axes, atoms.collect::<Vec<_>>()).unwrap()
    }

    fn key_index(key: &[u32], cards: &[u32]) -> usize {
        let mut idx = 0;
        let mut mul = 1;
        for (&v, &c) in key.iter().zip(cards) {
            idx += v as usize * mul;
            mul *= c as usize;
        }
        idx
    }

    #[test]
    fn entropy_examples() {
        let uniform = FiniteJointDistribution::from_named(&[("x", 2)], vec![(vec![0], 0.5), (vec![1], 0.5)]).unwrap();
        assert!((uniform.entropy(&[0], &[]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let point = FiniteJointDistribution::from_named(&[("x", 3)], vec![(vec![2], 1.0)]).unwrap();
        assert_eq!(point.entropy(&[0], &[]).unwrap(), 0.0);
    }

    #[test]
    fn entropy_matches_direct_summation() {
        let d = random_joint(3, &[3, 3]);
        let mut p = [[0.0; 3]; 3];
        for (k, m) in d.atoms() {
            p[k[0] as usize][k[1] as usize] += m;
        }
        let joint: f64 = p.iter().flatten().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
        assert!((d.entropy(&[0, 1], &[]).unwrap() - joint).abs() < 1e-12);
        // H(X0 | X1) = -sum p(a,b) ln(p(a,b)/p(b))
        let mut cond = 0.0;
        for b in 0..3 {
            let pb: f64 = (0..3).map(|a| p[a][b]).sum();
            for a in 0..3 {
                cond -= p[a][b] * (p[a][b] / pb).ln();
            }
        }
        assert!((d.entropy(&[0], &[1]).unwrap() - cond).abs() < 1e-12);
    }

    #[test]
    fn overlapping_arguments_are_rejected() {
        let d = random_joint(1, &[2, 2]);
        assert!(matches!(d.entropy(&[0], &[0]), Err(TheoryError::Domain(_))));
        assert!(matches!(
            d.conditional_mutual_information(&[0], &[1], &[1]),
            Err(TheoryError::Domain(_))
        ));
    }

    #[test]
    fn mutual_information_examples() {
        let indep = FiniteJointDistribution::from_named(
            &[("x", 2), ("y", 2)],
            vec![(vec![0, 0], 0.12), (vec![0, 1], 0.28), (vec![1, 0], 0.18), (vec![1, 1], 0.42)],
        )
        .unwrap();
        assert!(indep.mutual_information(&[0], &[1]).unwrap().abs() < 1e-12);

        let copy = FiniteJointDistribution::from_named(
            &[("x", 4), ("y", 4)],
            (0..4).map(|v| (vec![v, v], 0.25)).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((copy.mutual_information(&[0], &[1]).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_two_routes_agree() {
        let d = random_joint(9, &[2, 3, 2, 2]);
        let a = d.conditional_mutual_information(&[0, 3], &[1], &[2]).unwrap();
        let b = d.conditional_mutual_information_by_entropies(&[0, 3], &[1], &[2]).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!(a >= -1e-12);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let err = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err();
        assert_eq!(err, TheoryError::AbsoluteContinuity { atom: "1".into() });
    }

    #[test]
    fn kl_matches_direct_summation() {
        let mut rng = crate::seed::rng(21);
        let p = dirichlet_row(&mut rng, 6);
        let q = dirichlet_row(&mut rng, 6);
        let mut direct = 0.0;
        for i in 0..6 {
            direct += p[i] * p[i].ln() - p[i] * q[i].ln();
        }
        assert!((kl_divergence(&p, &q).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn mass_must_be_normalized() {
        let r = FiniteJointDistribution::from_named(&[("x", 2)], vec![(vec![0], 0.5)]);
        assert!(r.is_err());
    }

    proptest::proptest! {
        #[test]
        fn entropy_routes_agree(seed in 0u64..5000) {
            let d = random_joint(seed, &[2, 3, 2]);
            let a = d.entropy(&[0, 2], &[1]).unwrap();
            let b = d.entropy_by_difference(&[0, 2], &[1]).unwrap();
            proptest::prop_assert!((a - b).abs() < 1e-10);
            let i1 = d.conditional_mutual_information(&[0], &[2], &[1]).unwrap();
            let i2 = d.conditional_mutual_information_by_entropies(&[0], &[2], &[1]).unwrap();
            proptest::prop_assert!((i1 - i2).abs() < 1e-10);
            proptest::prop_assert!(i1 >= -1e-12);
        }
    }
}
