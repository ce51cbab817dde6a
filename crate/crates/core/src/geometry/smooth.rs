//! Sceneries of smooth images: `fμ` zoomed at `f(x)` against the
//! derivative `D_x f` applied to the sceneries of `μ` at `x`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{Grid, Window};
use crate::error::{Error, Result};
use crate::geometry::linear::LinearMap;
use crate::ops::translate_rescale_tree;
use crate::rng::stream;
use crate::scenery::flow::time_grid;
use crate::scenery::{distribution_distance, EmpiricalDistribution, MetricSpec};
use crate::source::MeasureSource;
use crate::tree::{Norm, TreeMeasure};

/// Sub-points per axis and leaf when pushing a tree through a map.
const SUBSAMPLE: usize = 4;
/// Derivatives with smaller determinant count as singular.
const SINGULAR: f64 = 1e-9;

type VecFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A C¹ self-map of `R^d` given by evaluation and derivative callbacks;
/// the derivative is returned row-major.
#[derive(Clone)]
pub struct SmoothMap {
    name: String,
    dim: usize,
    eval: Arc<VecFn>,
    jacobian: Arc<VecFn>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothMap({}, d={})", self.name, self.dim)
    }
}

impl SmoothMap {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            jacobian: Arc::new(jacobian),
        }
    }

    pub fn linear(map: &LinearMap) -> Result<Self> {
        if map.in_dim() != map.out_dim() {
            return Err(Error::Structural("smooth maps must be square".into()));
        }
        let a = map.clone();
        let flat: Vec<f64> = map.rows().iter().flatten().copied().collect();
        Ok(Self::new(
            "linear",
            map.in_dim(),
            move |x| a.apply(x),
            move |_| flat.clone(),
        ))
    }

    pub fn identity(dim: usize) -> Self {
        let mut id = vec![0.0; dim * dim];
        for i in 0..dim {
            id[i * dim + i] = 1.0;
        }
        Self::new("identity", dim, |x| x.to_vec(), move |_| id.clone())
    }

    /// `(x, y) ↦ (x, xy)`.
    pub fn shear_product() -> Self {
        Self::new(
            "x,xy",
            2,
            |p| vec![p[0], p[0] * p[1]],
            |p| vec![1.0, 0.0, p[1], p[0]],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn derivative(&self, x: &[f64]) -> Result<LinearMap> {
        let j = (self.jacobian)(x);
        if j.len() != self.dim * self.dim {
            return Err(Error::Structural(format!(
                "derivative of {} has {} entries",
                self.name,
                j.len()
            )));
        }
        LinearMap::new(j.chunks(self.dim).map(|r| r.to_vec()).collect())
    }
}

/// Image of a tree on `B_1` under `f`, sub-sampled per leaf, restricted
/// to `B_1` and renormalized, on a depth-`out_depth` grid.
pub fn push_smooth(
    tree: &TreeMeasure,
    f: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    out_depth: u32,
) -> Result<TreeMeasure> {
    let d = tree.dim();
    let grid = Grid::new(tree.base(), out_depth, Window::unit(d))?;
    let count = SUBSAMPLE.pow(d as u32);
    let mut out = BTreeMap::new();
    for (k, &m) in tree.leaves() {
        let (lo, hi) = tree.window().cell_box(tree.base(), tree.depth(), k);
        let share = m / count as f64;
        for s in 0..count {
            let mut idx = s;
            let p: Vec<f64> = (0..d)
                .map(|j| {
                    let q = idx % SUBSAMPLE;
                    idx /= SUBSAMPLE;
                    lo[j] + (q as f64 + 0.5) / SUBSAMPLE as f64 * (hi[j] - lo[j])
                })
                .collect();
            if let Some(key) = grid.locate(&f(&p)) {
                *out.entry(key).or_insert(0.0) += share;
            }
        }
    }
    TreeMeasure::from_leaves(tree.base(), out_depth, Window::unit(d), out)?.normalize(Norm::Box)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothCheckOptions {
    /// Depth at which `μ` and `fμ` are stored.
    pub depth: u32,
    pub x_count: usize,
    pub horizon: f64,
    pub t_step: f64,
    /// Depth of the zoomed sceneries.
    pub out_depth: u32,
    pub metric: MetricSpec,
    pub seed: u64,
}

impl Default for SmoothCheckOptions {
    fn default() -> Self {
        Self {
            depth: 7,
            x_count: 4,
            horizon: 2.0,
            t_step: 0.5,
            out_depth: 2,
            metric: MetricSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothCheck {
    pub map: String,
    pub points: Vec<Vec<f64>>,
    /// Distance between the two scenery distributions, per point.
    pub distances: Vec<f64>,
    /// Distances between the derivative-pushed distributions of two points.
    pub pairwise: Vec<Vec<f64>>,
}

impl SmoothCheck {
    pub fn to_text(&self) -> String {
        let mut s = format!("# map {}\npoint\tx\tdistance\tpairwise\n", self.map);
        for (i, x) in self.points.iter().enumerate() {
            let row: Vec<String> = self.pairwise[i]
                .iter()
                .map(|v| format!("{v:.3e}"))
                .collect();
            s.push_str(&format!(
                "{i}\t{:?}\t{:.3e}\t{}\n",
                x,
                self.distances[i],
                row.join(" ")
            ));
        }
        s
    }
}

/// Centres of up to `n` distinct leaves drawn by mass.
fn distinct_leaf_centres(tree: &TreeMeasure, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let leaves: Vec<_> = tree.leaves().iter().collect();
    let n = n.min(leaves.len());
    let mut rng = stream(seed, 0);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut u = rng.gen::<f64>() * tree.total();
        let mut pick = leaves.len() - 1;
        for (i, (_, &m)) in leaves.iter().enumerate() {
            if u < m {
                pick = i;
                break;
            }
            u -= m;
        }
        if seen.insert(pick) {
            let (lo, hi) = tree
                .window()
                .cell_box(tree.base(), tree.depth(), leaves[pick].0);
            out.push(lo.iter().zip(&hi).map(|(a, b)| (a + b) / 2.0).collect());
        }
    }
    out
}

/// For sampled `x ∼ μ`, compares the sceneries of `fμ` at `f(x)` with
/// `D_x f` applied to the sceneries of `μ` at `x`.
pub fn smooth_pushforward_scenery_check(
    source: &MeasureSource,
    map: &SmoothMap,
    opts: &SmoothCheckOptions,
) -> Result<SmoothCheck> {
    if map.dim() != source.dim() {
        return Err(Error::Structural(
            "map and measure differ in dimension".into(),
        ));
    }
    let times = time_grid(opts.horizon, opts.t_step)?;
    let tree = source.refine(opts.depth)?.normalize(Norm::Box)?;
    let eval = |p: &[f64]| map.apply(p);
    let image = push_smooth(&tree, &eval, opts.depth)?;
    let points = distinct_leaf_centres(&tree, opts.x_count, opts.seed);
    let rows = points
        .par_iter()
        .map(|x| {
            let a = map.derivative(x)?;
            if a.determinant().map_or(true, |v| v.abs() < SINGULAR) {
                return Err(Error::Regularity(format!(
                    "derivative of {} is singular at {x:?}",
                    map.name()
                )));
            }
            let fx = map.apply(x);
            let lin = |p: &[f64]| a.apply(p);
            let mut left = Vec::with_capacity(times.len());
            let mut right = Vec::with_capacity(times.len());
            for &t in &times {
                left.push(translate_rescale_tree(&image, &fx, t, opts.out_depth)?);
                let z = translate_rescale_tree(&tree, x, t, opts.out_depth)?;
                right.push(push_smooth(&z, &lin, opts.out_depth)?);
            }
            let (l, r) = (
                EmpiricalDistribution::uniform(left)?,
                EmpiricalDistribution::uniform(right)?,
            );
            Ok((distribution_distance(&l, &r, &opts.metric)?, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let mut pairwise = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = distribution_distance(&rows[i].1, &rows[j].1, &opts.metric)?;
            pairwise[i][j] = v;
            pairwise[j][i] = v;
        }
    }
    Ok(SmoothCheck {
        map: map.name().to_string(),
        points,
        distances: rows.iter().map(|r| r.0).collect(),
        pairwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor2() -> MeasureSource {
        MeasureSource::digit_iid(3, 2, vec![0.5, 0.0, 0.5]).unwrap()
    }

    #[test]
    fn identity_gives_zero() {
        let c = smooth_pushforward_scenery_check(
            &cantor2(),
            &SmoothMap::identity(2),
            &Default::default(),
        )
        .unwrap();
        assert!(c.distances.iter().all(|&d| d < 1e-12), "{}", c.to_text());
    }

    #[test]
    fn grid_symmetries_commute_with_zooming() {
        let quarter = LinearMap::new(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let m = SmoothMap::linear(&quarter).unwrap();
        let c = smooth_pushforward_scenery_check(&cantor2(), &m, &Default::default()).unwrap();
        assert!(c.distances.iter().all(|&d| d < 1e-12), "{}", c.to_text());
    }

    #[test]
    fn shear_product_sceneries_differ_between_points() {
        let c = smooth_pushforward_scenery_check(
            &cantor2(),
            &SmoothMap::shear_product(),
            &Default::default(),
        )
        .unwrap();
        for i in 0..c.points.len() {
            for j in 0..c.points.len() {
                assert_eq!(c.pairwise[i][j] > 0.0, i != j, "{}", c.to_text());
            }
        }
    }

    #[test]
    fn singular_derivative_is_rejected() {
        let flat = SmoothMap::new("flat", 2, |p| vec![p[0], 0.0], |_| vec![1.0, 0.0, 0.0, 0.0]);
        let e = smooth_pushforward_scenery_check(&cantor2(), &flat, &Default::default());
        assert!(matches!(e, Err(Error::Regularity(_))));
    }
}
