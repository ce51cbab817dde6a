//! Pointed measures and the base-`b` magnification dynamics.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::cell::{CellIndex, Window};
use crate::error::{Error, Result};
use crate::ops::{scenery_view, zoom, View};
use crate::point::Point;
use crate::rng::stream;
use crate::scenery::ensemble::EmpiricalDistribution;
use crate::source::MeasureSource;
use crate::tree::{Norm, TreeMeasure};

/// Digits sampled beyond the last magnification, so every atom of a
/// b-scenery distribution keeps a usable point.
pub const POINT_RESERVE: u32 = 16;

/// `(μ, x)` where `μ` is a source seen through one of its cells and `x` is
/// read in that cell's frame.
///
/// With `lazy` set the point is a sample from `μ` and missing digits are
/// drawn from `μ` conditioned on the current cell; otherwise missing digits
/// come from the point's in-cell position.
#[derive(Debug, Clone)]
pub struct PointedMeasure {
    source: Arc<MeasureSource>,
    anchor: CellIndex,
    point: Point,
    mode: Norm,
    lazy: bool,
}

impl PointedMeasure {
    pub fn new(source: Arc<MeasureSource>, point: Point, mode: Norm, lazy: bool) -> Result<Self> {
        let anchor = CellIndex::root(source.base(), source.dim());
        Self::at(source, anchor, point, mode, lazy)
    }

    /// A pointed measure already magnified into `anchor`.
    pub fn at(
        source: Arc<MeasureSource>,
        anchor: CellIndex,
        point: Point,
        mode: Norm,
        lazy: bool,
    ) -> Result<Self> {
        if point.base() != source.base() || point.dim() != source.dim() {
            return Err(Error::Structural("point does not match source".into()));
        }
        let mut cell = anchor.clone();
        for l in 0..point.depth() as usize {
            cell.push(&point.tuple_at(l));
        }
        if source.log_cell_mass(&cell)? == f64::NEG_INFINITY {
            return Err(Error::Support {
                depth: cell.depth(),
            });
        }
        Ok(Self {
            source,
            anchor,
            point,
            mode,
            lazy,
        })
    }

    /// `x ∼ μ_{B_1}` sampled to `depth` digits.
    pub fn sample(
        source: Arc<MeasureSource>,
        depth: u32,
        mode: Norm,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let point = source.sample_point(depth, rng)?;
        Self::new(source, point, mode, true)
    }

    pub fn source(&self) -> &Arc<MeasureSource> {
        &self.source
    }

    pub fn anchor(&self) -> &CellIndex {
        &self.anchor
    }

    pub fn point(&self) -> &Point {
        &self.point
    }

    pub fn mode(&self) -> Norm {
        self.mode
    }

    pub fn view(&self) -> View<'_> {
        View {
            source: &self.source,
            anchor: self.anchor.clone(),
            restrict: self.mode == Norm::Box,
        }
    }

    /// Makes sure the point has at least `depth` digits.
    pub fn extend_point(&mut self, depth: u32, rng: &mut impl Rng) -> Result<()> {
        if self.point.depth() >= depth {
            return Ok(());
        }
        if self.lazy {
            self.source
                .extend_point(&self.anchor, &mut self.point, depth, rng)
        } else {
            self.point.expand_tail(depth - self.point.depth());
            Ok(())
        }
    }

    /// Normalized mass of the point's depth-1 cell, `μ(𝒟_b(x)) / μ(B_1)`.
    pub fn first_cell_mass(&self, rng: &mut impl Rng) -> Result<f64> {
        let mut p = self.clone();
        p.extend_point(1, rng)?;
        let child = self.anchor.child(&p.point.tuple_at(0));
        let lc = self.source.log_cell_mass(&child)?;
        let la = self.source.log_cell_mass(&self.anchor)?;
        Ok((lc - la).exp())
    }

    /// `M_b`: zoom into the point's depth-1 cell and drop one digit.
    pub fn magnify(&self, mode: Norm, rng: &mut impl Rng) -> Result<Self> {
        let mut p = self.clone();
        p.extend_point(1, rng)?;
        let child = p.anchor.child(&p.point.tuple_at(0));
        if p.source.log_cell_mass(&child)? == f64::NEG_INFINITY {
            return Err(Error::UndefinedMagnification);
        }
        Ok(Self {
            source: p.source,
            anchor: child,
            point: p.point.shifted(1),
            mode,
            lazy: p.lazy,
        })
    }

    /// The measure component on the depth-`depth` grid of `B_1`. `Box` and
    /// `Star` agree there; `Plain` keeps the anchor's raw mass.
    pub fn materialize(&self, depth: u32) -> Result<TreeMeasure> {
        let t = self.source.local_tree(&self.anchor, depth)?;
        if t.is_empty() {
            return Err(Error::Normalization("null measure component".into()));
        }
        Ok(match self.mode {
            Norm::Plain => t.scaled(self.source.cell_mass(&self.anchor)?),
            Norm::Star | Norm::Box => t,
        })
    }

    /// Same measure and point on the grid of base `b^n`. Needs the source in
    /// base `b^n` and an anchor depth divisible by `n`.
    pub fn regroup(&self, n: u32, source: Arc<MeasureSource>) -> Result<Self> {
        let b = self.source.base() as u64;
        if source.base() as u64 != b.pow(n) || source.dim() != self.source.dim() {
            return Err(Error::Structural(
                "regrouped source has the wrong base".into(),
            ));
        }
        if self.anchor.depth() % n != 0 || self.anchor.offset().iter().any(|&o| o != 0) {
            return Err(Error::Structural(
                "anchor depth not divisible by the block length".into(),
            ));
        }
        let block =
            Point::from_digits(self.source.base(), self.anchor.digits().to_vec())?.regroup(n)?;
        let anchor = CellIndex::from_digits(source.base(), block.digits().to_vec())?;
        Self::at(source, anchor, self.point.regroup(n)?, self.mode, self.lazy)
    }
}

/// Weighted pointed measures, e.g. `⟨μ, x⟩_N`.
#[derive(Debug, Clone)]
pub struct PointedEnsemble {
    atoms: Vec<(f64, PointedMeasure)>,
}

impl PointedEnsemble {
    pub fn new(atoms: Vec<(f64, PointedMeasure)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Parameter("empty ensemble".into()));
        }
        if atoms.iter().any(|(w, _)| !(*w >= 0.0)) {
            return Err(Error::Parameter("negative atom weight".into()));
        }
        let s: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("atom weights sum to {s}")));
        }
        Ok(Self { atoms })
    }

    pub fn uniform(atoms: Vec<PointedMeasure>) -> Result<Self> {
        let w = 1.0 / atoms.len().max(1) as f64;
        Self::new(atoms.into_iter().map(|a| (w, a)).collect())
    }

    pub fn atoms(&self) -> &[(f64, PointedMeasure)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The measure marginal on a common depth-`depth` grid.
    pub fn measures(&self, depth: u32) -> Result<EmpiricalDistribution> {
        let trees: Vec<TreeMeasure> = self
            .atoms
            .par_iter()
            .map(|(_, a)| a.materialize(depth))
            .collect::<Result<_>>()?;
        EmpiricalDistribution::new(self.atoms.iter().map(|(w, _)| *w).zip(trees).collect())
    }
}

/// Options of [`b_scenery_distribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct BSceneryOptions {
    pub mode: Norm,
    /// Replace `μ` by its image under `y ↦ (y + u)/2`, `u` uniform in
    /// `B_1`, frozen at this depth.
    pub random_translation: Option<u32>,
    pub seed: u64,
}

impl Default for BSceneryOptions {
    fn default() -> Self {
        Self {
            mode: Norm::Box,
            random_translation: None,
            seed: 0,
        }
    }
}

/// `(y + u)/2` applied to a source, as a tree of the given depth.
pub fn random_translate(
    source: &MeasureSource,
    depth: u32,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, TreeMeasure)> {
    let d = source.dim();
    let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let neg: Vec<f64> = u.iter().map(|v| -v).collect();
    let centre = Point::from_coords(&neg, source.base(), 0)?;
    let z = zoom(
        &View::whole(source),
        &centre,
        -std::f64::consts::LN_2,
        depth,
    )?;
    let total = z.total();
    if !(total > 0.0) {
        return Err(Error::EmptyScenery);
    }
    let tree = TreeMeasure::from_leaves(source.base(), depth, Window::unit(d), z.masses)?;
    Ok((u, tree.scaled(1.0 / total)))
}

/// `⟨μ, x⟩_N = (1/N) Σ_{n=1}^N δ_{M_b^n(μ, x)}`. Without `x` a point is
/// sampled from `μ` (stream 1 of the seed); the translation uses stream 0.
pub fn b_scenery_distribution(
    source: Arc<MeasureSource>,
    x: Option<&Point>,
    n: usize,
    opts: &BSceneryOptions,
) -> Result<PointedEnsemble> {
    if n == 0 {
        return Err(Error::Parameter("N must be at least 1".into()));
    }
    let mut rng = stream(opts.seed, 1);
    let (source, x) = match opts.random_translation {
        None => (source, x.cloned()),
        Some(depth) => {
            let (u, tree) = random_translate(&source, depth, &mut stream(opts.seed, 0))?;
            let moved = x.map(|p| {
                let c: Vec<f64> = p
                    .coords()
                    .iter()
                    .zip(&u)
                    .map(|(a, b)| (a + b) / 2.0)
                    .collect();
                Point::from_coords(&c, source.base(), p.depth() + 1)
            });
            (Arc::new(MeasureSource::frozen(tree)?), moved.transpose()?)
        }
    };
    let mut current = match x {
        Some(p) => PointedMeasure::new(source, p, opts.mode, false)?,
        None => {
            let depth = source_cap(&source, n as u32 + POINT_RESERVE);
            PointedMeasure::sample(source, depth, opts.mode, &mut rng)?
        }
    };
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n {
        current = current.magnify(opts.mode, &mut rng)?;
        atoms.push(current.clone());
    }
    PointedEnsemble::uniform(atoms)
}

fn source_cap(source: &MeasureSource, depth: u32) -> u32 {
    source.max_depth().map_or(depth, |m| m.min(depth))
}

/// `cnt₀`: each atom `(μ, x)` becomes `T_x^* μ` restricted to `B_1`,
/// box-normalized on a depth-`out_depth` grid.
pub fn center_discrete(q: &PointedEnsemble, out_depth: u32) -> Result<EmpiricalDistribution> {
    center_continuous(q, 1, out_depth)
}

/// `cnt`: the average over `t_i = i·log b / t_steps`, `i < t_steps`, of the
/// box-normalized sceneries of the centered atoms.
pub fn center_continuous(
    q: &PointedEnsemble,
    t_steps: usize,
    out_depth: u32,
) -> Result<EmpiricalDistribution> {
    if t_steps == 0 {
        return Err(Error::Parameter("t_steps must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..q.len())
        .flat_map(|a| (0..t_steps).map(move |i| (a, i)))
        .collect();
    let trees: Vec<TreeMeasure> = jobs
        .par_iter()
        .map(|&(a, i)| {
            let atom = &q.atoms[a].1;
            let t = i as f64 * (atom.source.base() as f64).ln() / t_steps as f64;
            scenery_view(&atom.view(), &atom.point, t, out_depth)
        })
        .collect::<Result<_>>()?;
    let atoms = jobs
        .iter()
        .zip(trees)
        .map(|(&(a, _), t)| (q.atoms[a].0 / t_steps as f64, t))
        .collect();
    EmpiricalDistribution::new(atoms)
}
