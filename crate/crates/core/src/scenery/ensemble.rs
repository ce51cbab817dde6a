//! Finite weighted families of measures and the moment pseudo-metric
//! between them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cell::{Key, Window};
use crate::error::{Error, Result};
use crate::tree::TreeMeasure;

/// Weighted atoms on a common grid; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    atoms: Vec<(f64, TreeMeasure)>,
}

impl EmpiricalDistribution {
    pub fn new(atoms: Vec<(f64, TreeMeasure)>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::Parameter("empty distribution".into()))?;
        for (i, (w, t)) in atoms.iter().enumerate() {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::Parameter(format!("atom {i} has weight {w}")));
            }
            if !t.same_grid(&first.1) {
                return Err(Error::Structural(format!(
                    "atom {i} is on a different grid"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    /// Equal weights.
    pub fn uniform(trees: Vec<TreeMeasure>) -> Result<Self> {
        let w = 1.0 / trees.len().max(1) as f64;
        let atoms: Vec<(f64, TreeMeasure)> = trees.into_iter().map(|t| (w, t)).collect();
        Self::new_renormalized(atoms)
    }

    /// `δ_μ`.
    pub fn dirac(tree: TreeMeasure) -> Self {
        Self {
            atoms: vec![(1.0, tree)],
        }
    }

    fn new_renormalized(mut atoms: Vec<(f64, TreeMeasure)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if total > 0.0 {
            atoms.iter_mut().for_each(|(w, _)| *w /= total);
        }
        Self::new(atoms)
    }

    /// Convex combination `Σ c_i P_i`.
    pub fn mixture(parts: &[(f64, &EmpiricalDistribution)]) -> Result<Self> {
        let mut atoms = Vec::new();
        for (c, p) in parts {
            if *c > 0.0 {
                atoms.extend(p.atoms.iter().map(|(w, t)| (c * w, t.clone())));
            }
        }
        Self::new_renormalized(atoms)
    }

    /// The first `n` atoms, reweighted proportionally.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        Self::new_renormalized(self.atoms[..n.min(self.atoms.len())].to_vec())
    }

    pub fn atoms(&self) -> &[(f64, TreeMeasure)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn base(&self) -> u32 {
        self.atoms[0].1.base()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].1.dim()
    }

    pub fn depth(&self) -> u32 {
        self.atoms[0].1.depth()
    }

    pub fn window(&self) -> &Window {
        self.atoms[0].1.window()
    }

    /// `E_P[θ(D)]` for every depth-`m` cell, summed in atom order.
    pub fn expected_masses(&self, m: u32) -> Result<BTreeMap<Key, f64>> {
        let mut out = BTreeMap::new();
        for (w, t) in &self.atoms {
            for (k, v) in t.masses_at(m)? {
                *out.entry(k).or_insert(0.0) += w * v;
            }
        }
        Ok(out)
    }

    /// `E_P[θ(D) θ(D')]` over pairs of depth-1 cells.
    pub fn expected_pairs(&self) -> Result<BTreeMap<(Key, Key), f64>> {
        let mut out = BTreeMap::new();
        for (w, t) in &self.atoms {
            let m = t.masses_at(1.min(t.depth()))?;
            for (k1, v1) in &m {
                for (k2, v2) in &m {
                    *out.entry((*k1, *k2)).or_insert(0.0) += w * v1 * v2;
                }
            }
        }
        Ok(out)
    }

    /// Writes one columnar tree file per atom plus a manifest listing
    /// `weight,file`.
    pub fn write_manifest(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut manifest = String::from("weight,file\n");
        for (i, (w, t)) in self.atoms.iter().enumerate() {
            let name = format!("{stem}_{i:05}.csv");
            std::fs::write(dir.join(&name), t.to_columnar())?;
            let _ = writeln!(manifest, "{w:e},{name}");
        }
        std::fs::write(dir.join(format!("{stem}_manifest.csv")), manifest)?;
        Ok(())
    }
}

/// Moment pseudo-metric parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    /// Deepest cell-mass moment compared.
    pub max_depth: u32,
    /// 1: cell-mass means; 2: also depth-1 pair products.
    pub degree: u8,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self {
            max_depth: 4,
            degree: 1,
        }
    }
}

impl MetricSpec {
    pub fn new(max_depth: u32, degree: u8) -> Result<Self> {
        if max_depth == 0 || !(1..=2).contains(&degree) {
            return Err(Error::Parameter(format!(
                "metric needs max_depth ≥ 1 and degree 1 or 2, got {max_depth}, {degree}"
            )));
        }
        Ok(Self { max_depth, degree })
    }
}

fn l1_diff<K: Ord + Copy>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut keys: Vec<K> = a.keys().chain(b.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum()
}

/// `Σ_m 2^{-m} b^{-md} Σ_D |E_P θ(D) − E_Q θ(D)|`, plus the pair term
/// `2^{-1} b^{-2d} Σ |E_P θ(D)θ(D') − E_Q θ(D)θ(D')|` at degree 2.
/// Moments deeper than the atoms are skipped.
pub fn distribution_distance(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    spec: &MetricSpec,
) -> Result<f64> {
    let (a, b) = (&p.atoms[0].1, &q.atoms[0].1);
    if !a.same_grid(b) {
        return Err(Error::Structural(
            "distributions live on different grids".into(),
        ));
    }
    let base = p.base() as f64;
    let d = p.dim() as i32;
    let mut total = 0.0;
    for m in 1..=spec.max_depth.min(p.depth()) {
        let w = 0.5f64.powi(m as i32) * base.powi(-(m as i32) * d);
        total += w * l1_diff(&p.expected_masses(m)?, &q.expected_masses(m)?);
    }
    if spec.degree == 2 && p.depth() >= 1 {
        let w = 0.5 * base.powi(-2 * d);
        total += w * l1_diff(&p.expected_pairs()?, &q.expected_pairs()?);
    }
    Ok(total)
}
