//! Conditional measures on fibers `π^{-1}(πx)` and the conservation
//! identity `dim πμ + dim μ_{[x]} = dim μ`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{cells_per_axis, Key, Window, MAX_DIM};
use crate::constructions::counterexample::{
    cantor20_source, counterexample_image, cover_trend, CounterexampleSpec,
};
use crate::dimension::{entropy_dimension, tree_entropy_dimension, DimensionEstimate, Method};
use crate::error::{Error, Result};
use crate::geometry::linear::{coordinate_marginal, pushforward_linear, LinearMap};
use crate::rng::stream;
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

const SUBSAMPLE: usize = 4;
/// Defects smaller than this are never called non-conservation.
const DEFECT_FLOOR: f64 = 1e-9;

/// Orthonormal basis of `ker A`.
pub fn kernel_basis(map: &LinearMap) -> Vec<Vec<f64>> {
    let d = map.in_dim();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut span: Vec<Vec<f64>> = Vec::new();
    let reduce = |mut v: Vec<f64>, span: &mut Vec<Vec<f64>>| -> Option<Vec<f64>> {
        for u in span.iter() {
            let c = dot(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
        let n = dot(&v, &v).sqrt();
        (n > 1e-9).then(|| {
            let v: Vec<f64> = v.iter().map(|x| x / n).collect();
            span.push(v.clone());
            v
        })
    };
    for r in map.rows() {
        reduce(r.clone(), &mut span);
    }
    let mut kernel = Vec::new();
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        if let Some(v) = reduce(e, &mut span) {
            kernel.push(v);
        }
    }
    kernel
}

/// `μ` conditioned on the fiber through `x`, normalized.
///
/// Coordinate maps condition on the depth-`slab_depth` column of `πx` and
/// keep the remaining axes at the tree's resolution. Other maps condition
/// on the slab `|π(y − x)|_∞ < b^{-slab_depth}` and re-bin onto the kernel
/// coordinates at `out_depth`.
pub fn fiber_measure(
    tree: &TreeMeasure,
    x: &[f64],
    map: &LinearMap,
    slab_depth: u32,
    out_depth: u32,
) -> Result<TreeMeasure> {
    if map.in_dim() != tree.dim() || x.len() != tree.dim() {
        return Err(Error::Structural(
            "map, point and tree dimensions differ".into(),
        ));
    }
    match map.coordinate_axes() {
        Some(axes) => coordinate_fiber(tree, x, &axes, slab_depth),
        None => slab_fiber(tree, x, map, slab_depth, out_depth),
    }
}

fn coordinate_fiber(
    tree: &TreeMeasure,
    x: &[f64],
    axes: &[usize],
    slab: u32,
) -> Result<TreeMeasure> {
    let d = tree.dim();
    let rest: Vec<usize> = (0..d).filter(|a| !axes.contains(a)).collect();
    if rest.is_empty() {
        return Err(Error::Parameter(
            "fibers of an injective map are points".into(),
        ));
    }
    if slab > tree.depth() {
        return Err(Error::Resolution {
            what: "slab finer than the tree".into(),
            required: slab,
        });
    }
    let xk = tree
        .grid()
        .locate(x)
        .ok_or_else(|| Error::Parameter("point outside the tree's window".into()))?;
    let column = |s: u32| -> Result<BTreeMap<Key, f64>> {
        let f = cells_per_axis(tree.base(), tree.depth() - s)?;
        let mut out = BTreeMap::new();
        for (k, &m) in tree.leaves() {
            if axes.iter().all(|&a| k[a] / f == xk[a] / f) {
                let mut key = [0u64; MAX_DIM];
                for (i, &a) in rest.iter().enumerate() {
                    key[i] = k[a];
                }
                *out.entry(key).or_insert(0.0) += m;
            }
        }
        Ok(out)
    };
    let leaves = column(slab)?;
    let total: f64 = leaves.values().sum();
    if !(total > 0.0) {
        let mut s = slab;
        while s > 0 && column(s - 1)?.values().sum::<f64>() == 0.0 {
            s -= 1;
        }
        return Err(Error::Conditioning(format!(
            "empty column at slab depth {slab}; largest nonempty slab depth {}",
            s.saturating_sub(1)
        )));
    }
    let w = tree.window();
    let window = Window {
        center: rest.iter().map(|&a| w.center[a]).collect(),
        half: w.half,
    };
    TreeMeasure::from_leaves(
        tree.base(),
        tree.depth(),
        window,
        leaves.into_iter().map(|(k, m)| (k, m / total)),
    )
}

fn slab_fiber(
    tree: &TreeMeasure,
    x: &[f64],
    map: &LinearMap,
    slab: u32,
    out_depth: u32,
) -> Result<TreeMeasure> {
    let kernel = kernel_basis(map);
    if kernel.is_empty() {
        return Err(Error::Parameter(
            "fibers of an injective map are points".into(),
        ));
    }
    let d = tree.dim();
    let w = tree.window();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let window = Window {
        center: kernel.iter().map(|v| dot(v, &w.center)).collect(),
        half: w.half * (d as f64).sqrt(),
    };
    let cells = cells_per_axis(tree.base(), out_depth)?;
    let side = 2.0 * window.half / cells as f64;
    let px = map.apply(x);
    let eps = (tree.base() as f64).powi(-(slab as i32));
    let collect = |eps: f64| -> BTreeMap<Key, f64> {
        let mut out = BTreeMap::new();
        let count = SUBSAMPLE.pow(d as u32);
        for (k, &m) in tree.leaves() {
            let (lo, hi) = w.cell_box(tree.base(), tree.depth(), k);
            for s in 0..count {
                let mut idx = s;
                let p: Vec<f64> = (0..d)
                    .map(|j| {
                        let q = idx % SUBSAMPLE;
                        idx /= SUBSAMPLE;
                        lo[j] + (q as f64 + 0.5) / SUBSAMPLE as f64 * (hi[j] - lo[j])
                    })
                    .collect();
                let inside = map
                    .apply(&p)
                    .iter()
                    .zip(&px)
                    .all(|(a, b)| (a - b).abs() < eps);
                if inside {
                    let mut key = [0u64; MAX_DIM];
                    for (i, v) in kernel.iter().enumerate() {
                        let u = ((dot(v, &p) - window.lower(i)) / side).floor();
                        key[i] = (u.max(0.0) as u64).min(cells - 1);
                    }
                    *out.entry(key).or_insert(0.0) += m / count as f64;
                }
            }
        }
        out
    };
    let leaves = collect(eps);
    let total: f64 = leaves.values().sum();
    if !(total > 0.0) {
        let mut s = slab;
        while s > 0 {
            s -= 1;
            let e = (tree.base() as f64).powi(-(s as i32));
            if collect(e).values().sum::<f64>() > 0.0 {
                break;
            }
        }
        return Err(Error::Conditioning(format!(
            "empty slab at depth {slab}; largest nonempty slab depth {s}"
        )));
    }
    TreeMeasure::from_leaves(
        tree.base(),
        out_depth,
        window,
        leaves.into_iter().map(|(k, m)| (k, m / total)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    NonConservation,
    /// A defect this negative cannot happen; the estimates are off.
    EstimatorFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub dim_mu: DimensionEstimate,
    pub dim_projection: DimensionEstimate,
    pub fiber_dims: Vec<DimensionEstimate>,
    pub fiber_mean: f64,
    pub fiber_stderr: f64,
    /// Mean change of the fiber estimates when the slab is coarsened by one
    /// level; zero for coordinate maps.
    pub slab_gap: f64,
    pub defect: f64,
    pub defect_stderr: f64,
    pub verdict: Verdict,
}

impl ConservationReport {
    /// Recomputes the defect from its parts.
    pub fn assemble(
        dim_mu: DimensionEstimate,
        dim_projection: DimensionEstimate,
        fiber_dims: Vec<DimensionEstimate>,
        slab_gap: f64,
    ) -> Result<Self> {
        if fiber_dims.is_empty() {
            return Err(Error::Parameter("no fiber samples".into()));
        }
        let n = fiber_dims.len() as f64;
        let fiber_mean = fiber_dims.iter().map(|e| e.value).sum::<f64>() / n;
        let var = if fiber_dims.len() > 1 {
            fiber_dims
                .iter()
                .map(|e| (e.value - fiber_mean).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        let mean_se2 = fiber_dims.iter().map(|e| e.stderr.powi(2)).sum::<f64>() / n;
        let fiber_stderr = (var / n + mean_se2).sqrt();
        let defect = dim_mu.value - dim_projection.value - fiber_mean;
        let defect_stderr =
            (dim_mu.stderr.powi(2) + dim_projection.stderr.powi(2) + fiber_stderr.powi(2)).sqrt();
        let threshold = (3.0 * defect_stderr).max(DEFECT_FLOOR);
        let verdict = if defect > threshold {
            Verdict::NonConservation
        } else if defect < -threshold {
            Verdict::EstimatorFailure
        } else {
            Verdict::Consistent
        };
        Ok(Self {
            dim_mu,
            dim_projection,
            fiber_dims,
            fiber_mean,
            fiber_stderr,
            slab_gap,
            defect,
            defect_stderr,
            verdict,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "dim_mu {}\ndim_projection {}\n",
            self.dim_mu.to_text(),
            self.dim_projection.to_text()
        );
        for (i, f) in self.fiber_dims.iter().enumerate() {
            s.push_str(&format!("fiber {i} {}\n", f.to_text()));
        }
        s.push_str(&format!(
            "fiber_mean={:.6} fiber_stderr={:.6} slab_gap={:.6}\ndefect={:.6} defect_stderr={:.6} verdict={}\n",
            self.fiber_mean,
            self.fiber_stderr,
            self.slab_gap,
            self.defect,
            self.defect_stderr,
            match self.verdict {
                Verdict::Consistent => "consistent with conservation",
                Verdict::NonConservation => "non-conservation",
                Verdict::EstimatorFailure => "estimator failure",
            }
        ));
        s
    }
}

/// Entropy dimension of `πμ` over `n_min..=n_max`: exact marginals for
/// coordinate maps where the construction allows, the projected depth
/// `n_max` tree otherwise.
pub fn projection_dimension(
    source: &MeasureSource,
    map: &LinearMap,
    n_min: u32,
    n_max: u32,
) -> Result<DimensionEstimate> {
    if let Some(axes) = map.coordinate_axes() {
        if let Ok(m) = coordinate_marginal(source, &axes) {
            return entropy_dimension(&m, n_min, n_max);
        }
    }
    let tree = source.refine(n_max)?;
    tree_entropy_dimension(&pushforward_linear(&tree, map, n_max)?, n_min, n_max)
}

/// Estimates `dim μ`, `dim πμ` and the fiber dimensions at `n_samples`
/// points `x ∼ μ_{B_1}` (point `i` from stream `i` of `seed`).
pub fn conservation_report(
    source: &MeasureSource,
    map: &LinearMap,
    n_samples: usize,
    (n_min, n_max): (u32, u32),
    seed: u64,
) -> Result<ConservationReport> {
    let dim_mu = entropy_dimension(source, n_min, n_max)?;
    let dim_projection = projection_dimension(source, map, n_min, n_max)?;
    let tree = source.refine(n_max)?;
    let coordinate = map.coordinate_axes().is_some();
    let slab = if coordinate {
        n_max
    } else {
        n_max.saturating_sub(1)
    };
    if slab <= n_min {
        return Err(Error::Parameter(format!(
            "slab depth {slab} leaves no fiber range above {n_min}"
        )));
    }
    let samples = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let x = source
                .sample_point(n_max, &mut stream(seed, i as u64))?
                .coords();
            let f = fiber_measure(&tree, &x, map, slab, n_max)?;
            let e = tree_entropy_dimension(&f, n_min, slab)?;
            let gap = if coordinate {
                0.0
            } else {
                let g = fiber_measure(&tree, &x, map, slab - 1, n_max)?;
                (tree_entropy_dimension(&g, n_min, slab)?.value - e.value).abs()
            };
            Ok((e, gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let slab_gap = samples.iter().map(|s| s.1).sum::<f64>() / samples.len().max(1) as f64;
    ConservationReport::assemble(
        dim_mu,
        dim_projection,
        samples.into_iter().map(|s| s.0).collect(),
        slab_gap,
    )
}

/// Conservation bookkeeping for `f₀(C × C)` and `π(x, y) = x`: `dim μ` from
/// the exact measure on `C × C`, `dim πμ` from the cover estimates as `n_K`
/// doubles, fibers from the coded image at `depth`.
pub fn counterexample_conservation(
    spec: &CounterexampleSpec,
    depth: u32,
    n_samples: usize,
    trend_steps: usize,
    seed: u64,
) -> Result<ConservationReport> {
    let c = cantor20_source(10)?;
    let dim_mu = entropy_dimension(&MeasureSource::product(vec![c.clone(), c])?, 2, 7)?;
    let trend = cover_trend(spec, trend_steps.max(1))?;
    let last = trend[trend.len() - 1];
    let prev = trend[trend.len() - 2];
    let values = trend.iter().map(|t| t.1);
    let dim_projection = DimensionEstimate {
        value: last.1,
        stderr: (prev.1 - last.1).abs(),
        n_min: trend[0].0,
        n_max: last.0,
        method: Method::Cover,
        upper: values.clone().fold(f64::NEG_INFINITY, f64::max),
        lower: values.fold(f64::INFINITY, f64::min),
    };
    let image = counterexample_image(spec, depth)?;
    let keys: Vec<Key> = image.leaves().keys().copied().collect();
    let map = LinearMap::coordinate(2, &[0])?;
    let fibers = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let k = keys[stream(seed, i as u64).gen_range(0..keys.len())];
            let (lo, hi) = image.window().cell_box(2, depth, &k);
            let x = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
            let f = fiber_measure(&image, &x, &map, depth, depth)?;
            tree_entropy_dimension(&f, 1, depth)
        })
        .collect::<Result<Vec<_>>>()?;
    ConservationReport::assemble(dim_mu, dim_projection, fibers, 0.0)
}
