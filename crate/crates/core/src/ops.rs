//! Translation, rescaling and ball masses of measures.
//!
//! Zooms on procedural sources work in the coordinates of the point's cell
//! at the zoom depth, so arbitrarily deep windows keep full precision: the
//! neighbourhood `B_r(x)` is covered by the `3^d` cells around `x`, each is
//! refined just far enough that its leaves fit in an output cell, and the
//! leaves are mapped onto the output grid by `y ↦ (y − x) / r`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::cell::{cells_per_axis, CellIndex, Grid, Key, Window};
use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::stream;
use crate::scenery::ensemble::EmpiricalDistribution;
use crate::source::MeasureSource;
use crate::tree::{Norm, TreeMeasure};

const SNAP: f64 = 1e-9;

/// A source seen from one of its cells. With `restrict` only the mass
/// inside the anchor is visible (the `□` view); otherwise neighbouring mass
/// is visible too.
#[derive(Debug, Clone)]
pub struct View<'a> {
    pub source: &'a MeasureSource,
    pub anchor: CellIndex,
    pub restrict: bool,
}

impl<'a> View<'a> {
    /// The whole source in its own frame, unrestricted.
    pub fn whole(source: &'a MeasureSource) -> Self {
        Self {
            source,
            anchor: CellIndex::root(source.base(), source.dim()),
            restrict: false,
        }
    }
}

/// Masses of a zoom on the output grid, with the total mass of leaves that
/// straddled the window boundary. Both are scaled by `exp(-log_scale)`.
#[derive(Debug, Clone, Default)]
pub struct Zoom {
    pub masses: BTreeMap<Key, f64>,
    pub straddle: f64,
    pub log_scale: f64,
}

impl Zoom {
    pub fn total(&self) -> f64 {
        self.masses.values().sum()
    }

    /// Unscaled total mass.
    pub fn raw_total(&self) -> f64 {
        if self.masses.is_empty() {
            0.0
        } else {
            (self.total().ln() + self.log_scale).exp()
        }
    }
}

fn snap_floor(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() < SNAP {
        r
    } else {
        u.floor()
    }
}

fn snap_ceil(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() < SNAP {
        r
    } else {
        u.ceil()
    }
}

/// Levels refined past the output grid so boundary leaves are split finely.
pub fn oversample_levels(base: u32, dim: usize) -> u32 {
    let budget: f64 = match dim {
        1 => 32.0,
        2 => 8.0,
        _ => 4.0,
    };
    (budget.ln() / (base as f64).ln() + 1e-9).floor() as u32
}

/// `S_t T_x μ` restricted to `B_1` on a depth-`out_depth` grid, unnormalized.
/// `x` is read relative to the view's anchor.
pub fn zoom(view: &View, x: &Point, t: f64, out_depth: u32) -> Result<Zoom> {
    let levels = oversample_levels(view.source.base(), view.source.dim());
    zoom_with(view, x, t, out_depth, levels)
}

fn zoom_with(view: &View, x: &Point, t: f64, out_depth: u32, oversample: u32) -> Result<Zoom> {
    let src = view.source;
    let b = src.base();
    let d = src.dim();
    if x.base() != b || x.dim() != d {
        return Err(Error::Structural("point does not match source".into()));
    }
    let lnb = (b as f64).ln();
    if !(t >= -std::f64::consts::LN_2) || !t.is_finite() {
        return Err(Error::Parameter(format!(
            "zoom time {t} outside [-ln 2, ∞)"
        )));
    }
    let k = ((t + std::f64::consts::LN_2) / lnb + 1e-12)
        .floor()
        .max(0.0) as u32;
    let mut p = x.clone();
    if p.depth() < k {
        p.expand_tail(k - p.depth());
    }
    let xl = p.local_position(k);
    let mut cell = view.anchor.clone();
    for l in 0..k as usize {
        cell.push(&p.tuple_at(l));
    }
    // radius of the window in units of the depth-k cell (half-side 1)
    let r = (-t + k as f64 * lnb).exp();
    let s = 1.0 / r;
    let extra = ((s.ln() / lnb) - 1e-9).ceil().max(0.0) as u32;
    let grid = Grid::new(b, out_depth, Window::unit(d))?;
    if let MeasureSource::PointMass { point } = src {
        return Ok(point_mass_zoom(point, view, &cell, &xl, s, &grid));
    }
    let j = out_depth + extra + oversample;
    let n = cells_per_axis(b, j)?;
    let ls = 2.0 / n as f64;
    let mut zoom = Zoom::default();
    let mut regions = Vec::new();
    let deltas: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut i| {
            (0..d)
                .map(|_| {
                    let v = (i % 3) as i64 - 1;
                    i /= 3;
                    v
                })
                .collect()
        })
        .collect();
    for delta in deltas {
        let nb = cell.neighbor(&delta);
        if view.restrict && !nb.is_within(&view.anchor) {
            continue;
        }
        let mut ranges = Vec::with_capacity(d);
        let mut lows = Vec::with_capacity(d);
        for a in 0..d {
            let lo = -1.0 + 2.0 * delta[a] as f64;
            let ilo = (xl[a] - r).max(lo);
            let ihi = (xl[a] + r).min(lo + 2.0);
            if ihi <= ilo {
                break;
            }
            let klo = snap_floor((ilo - lo) / ls).max(0.0) as u64;
            let khi = (snap_ceil((ihi - lo) / ls) as u64).min(n);
            ranges.push((klo, khi));
            lows.push(lo);
        }
        if ranges.len() < d {
            continue;
        }
        let region = src.region(&nb, j, Some(&ranges))?;
        if !region.is_null() && !region.leaves.is_empty() {
            regions.push((region, lows));
        }
    }
    zoom.log_scale = regions
        .iter()
        .map(|(r, _)| r.log_mass)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for (region, lows) in regions {
        let w = (region.log_mass - zoom.log_scale).exp();
        for (key, m) in region.leaves {
            let m = m * w;
            for a in 0..d {
                let l = lows[a] + ls * key[a] as f64;
                lo[a] = (l - xl[a]) * s;
                hi[a] = (l + ls - xl[a]) * s;
            }
            let inside = grid.spread_box(&lo, &hi, |ok, f| {
                *zoom.masses.entry(ok).or_insert(0.0) += m * f;
            });
            if inside > 1e-12 && inside < 1.0 - 1e-12 {
                zoom.straddle += m;
            }
        }
    }
    zoom.masses.retain(|_, v| *v > 0.0);
    Ok(zoom)
}

/// An atom lands in exactly one output cell; its offset from `cell` is read
/// off the digits so a point zoomed at itself maps to the centre exactly.
fn point_mass_zoom(
    q: &Point,
    view: &View,
    cell: &CellIndex,
    xl: &[f64],
    s: f64,
    grid: &Grid,
) -> Zoom {
    let mut zoom = Zoom::default();
    let depth = cell.depth();
    let mut q = q.clone();
    if q.depth() < depth {
        q.expand_tail(depth - q.depth());
    }
    let qc = q.cell(depth);
    if view.restrict && !qc.ancestor(view.anchor.depth()).is_within(&view.anchor) {
        return zoom;
    }
    let b = q.base() as f64;
    let ql = q.local_position(depth);
    let mut y = vec![0.0; xl.len()];
    for a in 0..xl.len() {
        let mut delta = (qc.offset()[a] - cell.offset()[a]) as f64;
        for l in 0..depth as usize {
            delta = delta * b + qc.digits()[a][l] as f64 - cell.digits()[a][l] as f64;
        }
        y[a] = (2.0 * delta + ql[a] - xl[a]) * s;
        if y[a] >= 1.0 {
            return zoom;
        }
    }
    if let Some(k) = grid.locate(&y) {
        zoom.masses.insert(k, 1.0);
    }
    zoom
}

fn to_tree(base: u32, depth: u32, dim: usize, masses: BTreeMap<Key, f64>) -> TreeMeasure {
    TreeMeasure::from_map_unchecked(base, depth, Window::unit(dim), masses)
}

fn box_normalized(
    base: u32,
    depth: u32,
    dim: usize,
    masses: BTreeMap<Key, f64>,
) -> Result<TreeMeasure> {
    let total: f64 = masses.values().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyScenery);
    }
    Ok(to_tree(base, depth, dim, masses).scaled(1.0 / total))
}

/// The scenery `μ^□_{x,t}` of a view.
pub fn scenery_view(view: &View, x: &Point, t: f64, out_depth: u32) -> Result<TreeMeasure> {
    let z = zoom(view, x, t, out_depth)?;
    box_normalized(view.source.base(), out_depth, view.source.dim(), z.masses)
}

/// `μ^□_{x,t} = S_t^□(T_x μ)` on a depth-`out_depth` grid.
pub fn translate_rescale(
    source: &MeasureSource,
    x: &Point,
    t: f64,
    out_depth: u32,
) -> Result<TreeMeasure> {
    scenery_view(&View::whole(source), x, t, out_depth)
}

/// `e^{αt} · S_t T_x μ` restricted to `B_1`, unnormalized.
pub fn alpha_rescale(
    source: &MeasureSource,
    x: &Point,
    t: f64,
    out_depth: u32,
    alpha: f64,
) -> Result<TreeMeasure> {
    let z = zoom(&View::whole(source), x, t, out_depth)?;
    let f = (alpha * t + z.log_scale).exp();
    Ok(to_tree(source.base(), out_depth, source.dim(), z.masses).scaled(f))
}

/// Zoom of a stored tree around ambient `x`, unnormalized. Fails when the
/// tree's leaves would be coarser than the output cells.
pub fn zoom_tree(tree: &TreeMeasure, x: &[f64], t: f64, out_depth: u32) -> Result<Zoom> {
    let d = tree.dim();
    if x.len() != d {
        return Err(Error::Structural("point dimension mismatch".into()));
    }
    let r = (-t).exp();
    let b = tree.base();
    let ls = tree.leaf_side();
    let out_side = 2.0 / cells_per_axis(b, out_depth)? as f64;
    let zoomed = ls / r;
    if zoomed > out_side * (1.0 + 1e-9) {
        let lnb = (b as f64).ln();
        let more = ((zoomed / out_side).ln() / lnb - 1e-9).ceil() as u32;
        return Err(Error::Resolution {
            what: format!("tree leaves too coarse for zoom t = {t}"),
            required: tree.depth() + more,
        });
    }
    let grid = Grid::new(b, out_depth, Window::unit(d))?;
    let tg = tree.grid();
    let w = tree.window();
    let n = tg.cells();
    let key_lo = |a: usize| snap_floor((x[a] - r - w.lower(a)) / ls).max(0.0) as u64;
    let key_hi = |a: usize| (snap_ceil((x[a] + r - w.lower(a)) / ls).max(0.0) as u64).min(n);
    let ranges: Vec<(u64, u64)> = (0..d).map(|a| (key_lo(a), key_hi(a))).collect();
    let mut z = Zoom::default();
    let lo_key = [ranges[0].0, 0, 0];
    let hi_key = [ranges[0].1, 0, 0];
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for (k, &m) in tree.leaves().range(lo_key..hi_key) {
        if (1..d).any(|a| k[a] < ranges[a].0 || k[a] >= ranges[a].1) {
            continue;
        }
        let (blo, bhi) = w.cell_box(b, tree.depth(), k);
        for a in 0..d {
            lo[a] = (blo[a] - x[a]) / r;
            hi[a] = (bhi[a] - x[a]) / r;
        }
        let inside = grid.spread_box(&lo, &hi, |ok, f| {
            *z.masses.entry(ok).or_insert(0.0) += m * f;
        });
        if inside > 1e-12 && inside < 1.0 - 1e-12 {
            z.straddle += m;
        }
    }
    z.masses.retain(|_, v| *v > 0.0);
    Ok(z)
}

/// Tree version of [`translate_rescale`].
pub fn translate_rescale_tree(
    tree: &TreeMeasure,
    x: &[f64],
    t: f64,
    out_depth: u32,
) -> Result<TreeMeasure> {
    let z = zoom_tree(tree, x, t, out_depth)?;
    box_normalized(tree.base(), out_depth, tree.dim(), z.masses)
}

/// Tree version of [`alpha_rescale`].
pub fn alpha_rescale_tree(
    tree: &TreeMeasure,
    x: &[f64],
    t: f64,
    out_depth: u32,
    alpha: f64,
) -> Result<TreeMeasure> {
    let z = zoom_tree(tree, x, t, out_depth)?;
    Ok(to_tree(tree.base(), out_depth, tree.dim(), z.masses).scaled((alpha * t).exp()))
}

/// Mass of a sup-norm ball with the leaf-uniform boundary error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallMass {
    pub mass: f64,
    pub error: f64,
}

/// Leaf resolution, relative to the ball, used by [`ball_mass`].
fn ball_levels(dim: usize, base: u32) -> u32 {
    let budget = match dim {
        1 => 4096.0,
        2 => 1024.0,
        _ => 256.0,
    };
    ((budget as f64).ln() / (base as f64).ln()).floor().max(1.0) as u32
}

/// `μ(B_r(x))` for a source: raw masses with `Norm::Plain`, divided by
/// `μ(B_1)` otherwise.
pub fn ball_mass(source: &MeasureSource, x: &Point, r: f64, norm: Norm) -> Result<BallMass> {
    if !(r > 0.0 && r <= 2.0) {
        return Err(Error::Parameter(format!("radius {r} outside (0, 2]")));
    }
    let z = zoom_with(
        &View::whole(source),
        x,
        -r.ln(),
        ball_levels(source.dim(), source.base()),
        0,
    )?;
    let scale = match norm {
        Norm::Plain => 1.0,
        Norm::Star | Norm::Box => {
            let m = source.unit_mass()?;
            if !(m > 0.0) {
                return Err(Error::Normalization("μ(B_1) = 0".into()));
            }
            1.0 / m
        }
    };
    let f = z.log_scale.exp() * scale;
    Ok(BallMass {
        mass: z.total() * f,
        error: z.straddle * f,
    })
}

/// `μ(B_r(x))` for a stored tree (leaf-uniform at the boundary).
pub fn ball_mass_tree(tree: &TreeMeasure, x: &[f64], r: f64) -> Result<BallMass> {
    let d = tree.dim();
    let w = tree.window();
    let b = tree.base();
    let depth = tree.depth();
    let mut mass = 0.0;
    let mut error = 0.0;
    let ls = tree.leaf_side();
    let n = tree.grid().cells();
    let lo0 = snap_floor((x[0] - r - w.lower(0)) / ls).max(0.0) as u64;
    let hi0 = (snap_ceil((x[0] + r - w.lower(0)) / ls).max(0.0) as u64).min(n);
    for (k, &m) in tree.leaves().range([lo0, 0, 0]..[hi0, 0, 0]) {
        let (blo, bhi) = w.cell_box(b, depth, k);
        let mut frac = 1.0;
        for a in 0..d {
            let ov = (bhi[a].min(x[a] + r) - blo[a].max(x[a] - r)) / ls;
            let ov = if (ov - ov.round()).abs() < SNAP {
                ov.round()
            } else {
                ov
            };
            frac *= ov.clamp(0.0, 1.0);
        }
        if frac > 0.0 {
            mass += m * frac;
            if frac < 1.0 {
                error += m;
            }
        }
    }
    Ok(BallMass { mass, error })
}

/// Time average of `e^{αt} μ(B_{e^{-t}}(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderDensity {
    pub value: f64,
    /// Running average grew at every step of the second half of `[0, T]`.
    pub diverging: bool,
    /// Running averages at the grid times.
    pub running: Vec<(f64, f64)>,
}

/// Trapezoidal average over `t ∈ [0, T]` on a uniform grid of raw ball
/// masses at radius `e^{-t}`.
pub fn second_order_density(
    source: &MeasureSource,
    x: &Point,
    alpha: f64,
    horizon: f64,
    t_step: f64,
) -> Result<SecondOrderDensity> {
    if !(t_step > 0.0) || !(horizon > 0.0) {
        return Err(Error::Parameter("T and t_step must be positive".into()));
    }
    let steps = (horizon / t_step + 1e-9).floor() as usize;
    if steps == 0 {
        return Err(Error::Parameter("T shorter than one step".into()));
    }
    let values: Vec<f64> = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * t_step;
            ball_mass(source, x, (-t).exp(), Norm::Plain).map(|b| (alpha * t).exp() * b.mass)
        })
        .collect::<Result<_>>()?;
    let mut integral = 0.0;
    let mut running = Vec::with_capacity(steps);
    for i in 1..=steps {
        integral += 0.5 * (values[i - 1] + values[i]) * t_step;
        let t = i as f64 * t_step;
        running.push((t, integral / t));
    }
    let half = running.len() / 2;
    let tail = &running[half..];
    let diverging = tail.len() >= 2
        && tail
            .windows(2)
            .all(|w| w[1].1 > w[0].1 * (1.0 + 1e-9) + 1e-300);
    Ok(SecondOrderDensity {
        value: running.last().map_or(values[0], |r| r.1),
        diverging,
        running,
    })
}

/// `⟨μ⟩_U`: atoms `T_x^* μ` (box-normalized on the output grid) for
/// `x ∼ μ_U`, equal weights. Sample `i` uses stream `i` of `seed`.
pub fn diffuse(
    source: &MeasureSource,
    u: &Window,
    n_samples: usize,
    out_depth: u32,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let d = source.dim();
    if u.dim() != d {
        return Err(Error::Structural("window dimension mismatch".into()));
    }
    let b = source.base();
    let sample_depth = out_depth + 2;
    let inside = |p: &Point| {
        let c = p.coords();
        (0..d).all(|a| (c[a] - u.center[a]).abs() <= u.half)
    };
    // cheap emptiness check on the grid of the sampling depth
    let probe_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut probe = stream(probe_seed, 0);
    let hit = (0..4096).any(|_| {
        source
            .sample_point(sample_depth, &mut probe)
            .map(|p| inside(&p))
            .unwrap_or(false)
    });
    if !hit {
        return Err(Error::Conditioning(
            "μ(U) = 0 (no sample landed in U)".into(),
        ));
    }
    let atoms: Vec<TreeMeasure> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            for _ in 0..1_000_000 {
                let p = source.sample_point(sample_depth, &mut rng)?;
                if inside(&p) {
                    return translate_rescale(source, &p, 0.0, out_depth);
                }
            }
            Err(Error::Conditioning("μ(U) too small to sample".into()))
        })
        .collect::<Result<_>>()?;
    let _ = b;
    EmpiricalDistribution::uniform(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::ifs::{self, Ifs};

    fn lam(d: usize) -> MeasureSource {
        MeasureSource::lebesgue(2, d).unwrap()
    }

    #[test]
    fn lebesgue_scenery_is_lebesgue() {
        let src = lam(1);
        let x = Point::from_coords(&[0.37], 2, 0).unwrap();
        for &t in &[0.0, 0.3, 1.7, 9.2] {
            let s = translate_rescale(&src, &x, t, 5).unwrap();
            let u = TreeMeasure::uniform(2, 1, 5).unwrap();
            assert!(s.max_leaf_diff(&u).unwrap() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn point_mass_scenery_is_central_atom() {
        let x = Point::from_coords(&[0.0], 2, 0).unwrap();
        let src = MeasureSource::point_mass(x.clone());
        let s = translate_rescale(&src, &x, 4.1, 6).unwrap();
        let atom = TreeMeasure::atom(2, 6, Window::unit(1), &[0.0]).unwrap();
        assert_eq!(s, atom);
    }

    #[test]
    fn cantor_left_end_zoom_by_three() {
        // Cantor set on [0,1]: B_{1/3}(0) holds the copy on [0, 1/3]
        let c = MeasureSource::self_similar(3, Ifs::new(&ifs::cantor_ambient()).unwrap()).unwrap();
        let x = Point::from_coords(&[0.0], 3, 0).unwrap();
        let s = translate_rescale(&c, &x, 3f64.ln(), 5).unwrap();
        assert!(s.max_leaf_diff(&c.refine(5).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn alpha_rescale_lebesgue_totals() {
        let src = lam(1);
        let x = Point::from_coords(&[0.1], 2, 0).unwrap();
        for &t in &[0.5, 2.0, 5.0] {
            let one = alpha_rescale(&src, &x, t, 6, 1.0).unwrap();
            assert!((one.total() - 2.0).abs() < 1e-9);
            let two = alpha_rescale(&src, &x, t, 6, 2.0).unwrap();
            assert!((two.total() - 2.0 * t.exp()).abs() < 1e-9 * t.exp());
        }
    }

    #[test]
    fn ball_mass_examples() {
        let x0 = Point::from_coords(&[0.0], 2, 0).unwrap();
        let b = ball_mass(&lam(1), &x0, 0.5, Norm::Star).unwrap();
        assert_eq!((b.mass, b.error), (0.5, 0.0));
        let delta = MeasureSource::point_mass(x0.clone());
        assert_eq!(ball_mass(&delta, &x0, 1e-3, Norm::Plain).unwrap().mass, 1.0);
        let cantor =
            MeasureSource::self_similar(3, Ifs::new(&ifs::cantor_ambient()).unwrap()).unwrap();
        let z = Point::from_coords(&[0.0], 3, 0).unwrap();
        for n in 1..6 {
            let b = ball_mass(&cantor, &z, 3f64.powi(-n), Norm::Plain).unwrap();
            let want = 0.5f64.powi(n);
            assert!(
                (b.mass - want).abs() <= want * 1e-9 + b.error,
                "n = {n}: {b:?}"
            );
        }
    }

    #[test]
    fn tree_zoom_budget() {
        let t = TreeMeasure::uniform(2, 1, 6).unwrap();
        assert!(translate_rescale_tree(&t, &[0.0], 2f64.ln() * 2.0, 4).is_ok());
        match translate_rescale_tree(&t, &[0.0], 2f64.ln() * 3.0, 4) {
            Err(Error::Resolution { required, .. }) => assert_eq!(required, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn second_order_density_lebesgue() {
        let x = Point::from_coords(&[0.2], 2, 0).unwrap();
        let s = second_order_density(&lam(1), &x, 1.0, 5.0, 0.25).unwrap();
        assert!((s.value - 2.0).abs() < 1e-9);
        assert!(!s.diverging);
        let s2 = second_order_density(&lam(1), &x, 2.0, 5.0, 0.25).unwrap();
        assert!(s2.diverging);
    }

    #[test]
    fn diffuse_point_mass_is_constant() {
        let x = Point::from_coords(&[0.0], 2, 0).unwrap();
        let src = MeasureSource::point_mass(x);
        let p = diffuse(&src, &Window::new(vec![0.0], 0.5).unwrap(), 8, 4, 3).unwrap();
        let atom = TreeMeasure::atom(2, 4, Window::unit(1), &[0.0]).unwrap();
        assert!(p.atoms().iter().all(|(_, t)| *t == atom));
    }
}
