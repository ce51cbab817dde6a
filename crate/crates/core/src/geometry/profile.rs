//! Projection dimension profiles and the ensemble lower bound.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dimension::{tree_entropy_dimension, DimensionEstimate, Method};
use crate::error::{Error, Result};
use crate::geometry::fiber::projection_dimension;
use crate::geometry::linear::{pushforward_linear, LinearMap};
use crate::rng::derive_seed;
use crate::scenery::pointed::{b_scenery_distribution, BSceneryOptions};
use crate::scenery::EmpiricalDistribution;
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

/// One row of a profile table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub map: LinearMap,
    pub estimate: DimensionEstimate,
}

/// Entropy dimension of `πμ` for every map, in input order.
pub fn projection_dimension_profile(
    source: &MeasureSource,
    maps: &[LinearMap],
    n_min: u32,
    n_max: u32,
) -> Result<Vec<ProfileRow>> {
    maps.par_iter()
        .map(|m| {
            Ok(ProfileRow {
                map: m.clone(),
                estimate: projection_dimension(source, m, n_min, n_max)?,
            })
        })
        .collect()
}

/// Entropy dimension of `πμ` for a stored normalized tree.
pub fn tree_projection_dimension(
    tree: &TreeMeasure,
    map: &LinearMap,
    n_min: u32,
    n_max: u32,
) -> Result<DimensionEstimate> {
    let img = pushforward_linear(tree, map, tree.depth())?;
    tree_entropy_dimension(&img, n_min, n_max)
}

/// Weighted average over atoms of the projected atoms' entropy dimensions.
/// The stderr combines the spread over atoms with the mean per-atom stderr.
pub fn ensemble_projection_dimension(
    p: &EmpiricalDistribution,
    map: &LinearMap,
    n_min: u32,
    n_max: u32,
) -> Result<DimensionEstimate> {
    let rows = p
        .atoms()
        .par_iter()
        .filter(|(w, t)| *w > 0.0 && t.total() > 0.0)
        .map(|(w, t)| Ok((*w, tree_projection_dimension(t, map, n_min, n_max)?)))
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::Normalization("no atom carries mass".into()));
    }
    let total: f64 = rows.iter().map(|r| r.0).sum();
    let avg = |f: &dyn Fn(&DimensionEstimate) -> f64| {
        rows.iter().map(|(w, e)| w * f(e)).sum::<f64>() / total
    };
    let value = avg(&|e| e.value);
    let var = avg(&|e| (e.value - value).powi(2));
    let se = avg(&|e| e.stderr);
    Ok(DimensionEstimate {
        value,
        stderr: (var / rows.len() as f64 + se * se).sqrt(),
        n_min,
        n_max,
        method: Method::Entropy,
        upper: avg(&|e| e.upper),
        lower: avg(&|e| e.lower),
    })
}

/// Profile of an ensemble, estimating `E_P(π)` per map.
pub fn ensemble_profile(
    p: &EmpiricalDistribution,
    maps: &[LinearMap],
    n_min: u32,
    n_max: u32,
) -> Result<Vec<ProfileRow>> {
    maps.iter()
        .map(|m| {
            Ok(ProfileRow {
                map: m.clone(),
                estimate: ensemble_projection_dimension(p, m, n_min, n_max)?,
            })
        })
        .collect()
}

/// Depth ranges and sampling sizes for [`sm_lower_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmRanges {
    /// Range for `πμ`.
    pub n_min: u32,
    pub n_max: u32,
    /// Range for projected ensemble atoms, which are stored to `atom_max`.
    pub atom_min: u32,
    pub atom_max: u32,
    /// Magnification steps per sampled point.
    pub steps: usize,
}

impl Default for SmRanges {
    fn default() -> Self {
        Self {
            n_min: 4,
            n_max: 8,
            atom_min: 4,
            atom_max: 8,
            steps: 6,
        }
    }
}

/// Pooled b-adic sceneries: `steps` magnifications at each of `n_samples`
/// points, atoms stored to `depth`.
pub fn scenery_ensemble(
    generator: &MeasureSource,
    n_samples: usize,
    steps: usize,
    depth: u32,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    if n_samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let gen = Arc::new(generator.clone());
    let parts = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let opts = BSceneryOptions {
                seed: derive_seed(seed, i as u64),
                ..Default::default()
            };
            b_scenery_distribution(gen.clone(), None, steps, &opts)?.measures(depth)
        })
        .collect::<Result<Vec<_>>>()?;
    let w = 1.0 / n_samples as f64;
    let refs: Vec<(f64, &EmpiricalDistribution)> = parts.iter().map(|p| (w, p)).collect();
    EmpiricalDistribution::mixture(&refs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmRow {
    pub map: LinearMap,
    pub projection: DimensionEstimate,
    pub ensemble: DimensionEstimate,
    /// `dim πμ − Ê_P(π)`.
    pub margin: f64,
    pub margin_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmReport {
    pub rows: Vec<SmRow>,
    pub atoms: usize,
    pub ranges: SmRanges,
}

impl SmReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# atoms {} range {}..{} atom_range {}..{}\nmap\tdim_proj\tE_P\tmargin\tstderr\n",
            self.atoms,
            self.ranges.n_min,
            self.ranges.n_max,
            self.ranges.atom_min,
            self.ranges.atom_max
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:?}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                r.map.rows(),
                r.projection.value,
                r.ensemble.value,
                r.margin,
                r.margin_stderr
            ));
        }
        s
    }
}

/// Compares `dim πμ` with the profile of the scenery ensemble of
/// `generator` (default: the source itself) for each map.
pub fn sm_lower_bound_check(
    source: &MeasureSource,
    maps: &[LinearMap],
    generator: Option<&MeasureSource>,
    n_samples: usize,
    ranges: SmRanges,
    seed: u64,
) -> Result<SmReport> {
    let gen = generator.unwrap_or(source);
    if gen.dim() != source.dim() {
        return Err(Error::Structural(
            "generator and source differ in dimension".into(),
        ));
    }
    let p = scenery_ensemble(gen, n_samples, ranges.steps, ranges.atom_max, seed)?;
    let proj = projection_dimension_profile(source, maps, ranges.n_min, ranges.n_max)?;
    let ens = ensemble_profile(&p, maps, ranges.atom_min, ranges.atom_max)?;
    let rows = proj
        .into_iter()
        .zip(ens)
        .map(|(a, b)| SmRow {
            margin: a.estimate.value - b.estimate.value,
            margin_stderr: a.estimate.stderr.hypot(b.estimate.stderr),
            map: a.map,
            projection: a.estimate,
            ensemble: b.estimate,
        })
        .collect();
    Ok(SmReport {
        rows,
        atoms: p.len(),
        ranges,
    })
}
