//! Procedural measures that can be refined to any depth inside any cell.
//!
//! Every source answers one question: given an anchor cell and a number of
//! further levels, what are the masses of the sub-cells, optionally
//! restricted to per-axis index ranges. The anchor's own mass is returned as
//! a logarithm so cells thousands of levels deep stay representable; sub-cell
//! masses are relative to it. Absolute masses: probability measures have
//! unit mass on `B_1`, Lebesgue measure assigns cell volume and extends past
//! `B_1`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::cell::{cells_per_axis, check_base, check_dim, CellIndex, Grid, Key, Window, MAX_DIM};
use crate::constructions::digit::DigitProcess;
use crate::constructions::ifs::{Affine, Ifs};
use crate::constructions::splice::Splice;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::tree::TreeMeasure;

/// Largest number of leaves a single region request may produce.
pub const MAX_REGION_LEAVES: usize = 1 << 24;

/// Smallest cell side the floating-point cylinder deposit accepts.
const MIN_IFS_SIDE: f64 = 1e-11;

/// Sub-cells of an anchor, keyed by index inside the anchor. `leaves` hold
/// masses divided by the anchor's mass, whose natural log is `log_mass`
/// (`-∞` for a null anchor, which has no leaves).
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub log_mass: f64,
    pub leaves: BTreeMap<Key, f64>,
}

impl Default for Region {
    fn default() -> Self {
        Self {
            log_mass: f64::NEG_INFINITY,
            leaves: BTreeMap::new(),
        }
    }
}

impl Region {
    fn empty() -> Self {
        Self::default()
    }

    fn with_mass(mass: f64) -> Self {
        Self {
            log_mass: if mass > 0.0 {
                mass.ln()
            } else {
                f64::NEG_INFINITY
            },
            leaves: BTreeMap::new(),
        }
    }

    pub fn anchor_mass(&self) -> f64 {
        self.log_mass.exp()
    }

    pub fn is_null(&self) -> bool {
        self.log_mass == f64::NEG_INFINITY
    }
}

/// Per-axis half-open key ranges `[lo, hi)`.
pub type Ranges = Vec<(u64, u64)>;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSource {
    /// Lebesgue measure on `R^d`, or on the half-space `x_axis ≥ 0`.
    Lebesgue {
        base: u32,
        dim: usize,
        half_space: Option<usize>,
    },
    PointMass {
        point: Point,
    },
    /// Product over axes of one-dimensional digit-process measures; `start`
    /// conditions each axis' chain on a previous digit.
    Digit {
        axes: Vec<DigitProcess>,
        start: Vec<Option<u16>>,
    },
    SelfSimilar {
        base: u32,
        ifs: Ifs,
    },
    Product(Vec<MeasureSource>),
    Splice(Splice),
    Frozen(Arc<TreeMeasure>),
}

impl MeasureSource {
    pub fn lebesgue(base: u32, dim: usize) -> Result<Self> {
        check_base(base)?;
        check_dim(dim)?;
        Ok(Self::Lebesgue {
            base,
            dim,
            half_space: None,
        })
    }

    /// Lebesgue measure on `[0, ∞)`.
    pub fn half_line(base: u32) -> Result<Self> {
        check_base(base)?;
        Ok(Self::Lebesgue {
            base,
            dim: 1,
            half_space: Some(0),
        })
    }

    pub fn point_mass(point: Point) -> Self {
        Self::PointMass { point }
    }

    pub fn digit(axes: Vec<DigitProcess>) -> Result<Self> {
        check_dim(axes.len())?;
        if axes.iter().any(|p| p.base() != axes[0].base()) {
            return Err(Error::Parameter("digit axes must share a base".into()));
        }
        let start = vec![None; axes.len()];
        Ok(Self::Digit { axes, start })
    }

    /// The same iid digit law on every axis.
    pub fn digit_iid(base: u32, dim: usize, probs: Vec<f64>) -> Result<Self> {
        let p = DigitProcess::iid(base, probs)?;
        Self::digit(vec![p; dim])
    }

    pub fn self_similar(base: u32, ifs: Ifs) -> Result<Self> {
        check_base(base)?;
        Ok(Self::SelfSimilar { base, ifs })
    }

    pub fn product(factors: Vec<MeasureSource>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Parameter("empty product".into()));
        }
        let base = factors[0].base();
        if factors.iter().any(|f| f.base() != base) {
            return Err(Error::Parameter("product factors must share a base".into()));
        }
        check_dim(factors.iter().map(|f| f.dim()).sum())?;
        Ok(Self::Product(factors))
    }

    /// Wraps a tree on `B_1`.
    pub fn frozen(tree: TreeMeasure) -> Result<Self> {
        if !tree.window().is_unit() {
            return Err(Error::Parameter("frozen trees must live on B_1".into()));
        }
        Ok(Self::Frozen(Arc::new(tree)))
    }

    pub fn base(&self) -> u32 {
        match self {
            Self::Lebesgue { base, .. } | Self::SelfSimilar { base, .. } => *base,
            Self::PointMass { point } => point.base(),
            Self::Digit { axes, .. } => axes[0].base(),
            Self::Product(f) => f[0].base(),
            Self::Splice(s) => s.base(),
            Self::Frozen(t) => t.base(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Lebesgue { dim, .. } => *dim,
            Self::PointMass { point } => point.dim(),
            Self::Digit { axes, .. } => axes.len(),
            Self::SelfSimilar { ifs, .. } => ifs.dim(),
            Self::Product(f) => f.iter().map(|s| s.dim()).sum(),
            Self::Splice(s) => s.dim(),
            Self::Frozen(t) => t.dim(),
        }
    }

    /// True when `region` is exact at every depth (no leaf-uniform
    /// approximation and no finite storage depth).
    pub fn is_exact(&self) -> bool {
        match self {
            Self::Lebesgue { .. } | Self::PointMass { .. } | Self::Digit { .. } => true,
            Self::SelfSimilar { .. } | Self::Frozen(_) => false,
            Self::Product(f) => f.iter().all(|s| s.is_exact()),
            Self::Splice(s) => s.is_exact(),
        }
    }

    /// Depth beyond which `region` fails, if any.
    pub fn max_depth(&self) -> Option<u32> {
        match self {
            Self::Frozen(t) => Some(t.depth()),
            Self::Product(f) => f.iter().filter_map(|s| s.max_depth()).min(),
            Self::Splice(s) => s.max_depth(),
            _ => None,
        }
    }

    fn check_anchor(&self, anchor: &CellIndex) -> Result<()> {
        if anchor.base() != self.base() || anchor.dim() != self.dim() {
            return Err(Error::Structural(format!(
                "cell (base {}, dim {}) does not match source (base {}, dim {})",
                anchor.base(),
                anchor.dim(),
                self.base(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Masses of the depth-`levels` sub-cells of `anchor` inside `ranges`.
    pub fn region(
        &self,
        anchor: &CellIndex,
        levels: u32,
        ranges: Option<&[(u64, u64)]>,
    ) -> Result<Region> {
        self.check_anchor(anchor)?;
        let n = cells_per_axis(self.base(), levels)?;
        let d = self.dim();
        let ranges: Ranges = match ranges {
            Some(r) => r.iter().map(|&(lo, hi)| (lo.min(n), hi.min(n))).collect(),
            None => vec![(0, n); d],
        };
        if ranges.len() != d {
            return Err(Error::Structural("range dimension mismatch".into()));
        }
        let empty = ranges.iter().any(|(lo, hi)| lo >= hi);
        match self {
            Self::Lebesgue { half_space, .. } => {
                lebesgue_region(anchor, levels, &ranges, *half_space, empty)
            }
            Self::PointMass { point } => Ok(point_region(point, anchor, levels, &ranges)),
            Self::Digit { axes, start } => {
                digit_region(axes, start, anchor, levels, &ranges, empty)
            }
            Self::SelfSimilar { base, ifs } => ifs_region(*base, ifs, anchor, levels, &ranges),
            Self::Product(factors) => product_region(factors, anchor, levels, &ranges),
            Self::Splice(s) => s.region(anchor, levels, &ranges),
            Self::Frozen(t) => frozen_region(t, anchor, levels, &ranges),
        }
    }

    /// Exact (or leaf-uniform, for approximate sources) mass of a cell.
    pub fn cell_mass(&self, cell: &CellIndex) -> Result<f64> {
        Ok(self.region(cell, 0, None)?.anchor_mass())
    }

    /// Natural log of [`Self::cell_mass`].
    pub fn log_cell_mass(&self, cell: &CellIndex) -> Result<f64> {
        Ok(self.region(cell, 0, None)?.log_mass)
    }

    /// `μ(B_1)`.
    pub fn unit_mass(&self) -> Result<f64> {
        self.cell_mass(&CellIndex::root(self.base(), self.dim()))
    }

    pub fn unit_log_mass(&self) -> Result<f64> {
        self.log_cell_mass(&CellIndex::root(self.base(), self.dim()))
    }

    /// Sub-cell masses of `anchor` relative to its mass, as a tree on `B_1`
    /// (the anchor's own frame). Empty for a null anchor.
    pub fn local_tree(&self, anchor: &CellIndex, levels: u32) -> Result<TreeMeasure> {
        let r = self.region(anchor, levels, None)?;
        Ok(TreeMeasure::from_map_unchecked(
            self.base(),
            levels,
            Window::unit(self.dim()),
            r.leaves,
        ))
    }

    /// `refine(μ, n)`: depth-`n` cell masses on `B_1`, box-normalized.
    pub fn refine(&self, depth: u32) -> Result<TreeMeasure> {
        let t = self.local_tree(&CellIndex::root(self.base(), self.dim()), depth)?;
        t.normalize(crate::tree::Norm::Box)
    }

    /// Children masses of a cell, in child-key order.
    fn child_masses(&self, cell: &CellIndex) -> Result<Vec<(Key, f64)>> {
        Ok(self.region(cell, 1, None)?.leaves.into_iter().collect())
    }

    /// Extends `point`, read relative to `anchor`, to `depth` digits by
    /// descending proportionally to mass.
    pub fn extend_point(
        &self,
        anchor: &CellIndex,
        point: &mut Point,
        depth: u32,
        rng: &mut impl Rng,
    ) -> Result<()> {
        let mut cell = anchor.clone();
        for l in 0..point.depth() as usize {
            cell.push(&point.tuple_at(l));
        }
        while point.depth() < depth {
            let kids = self.child_masses(&cell)?;
            let total: f64 = kids.iter().map(|(_, m)| m).sum();
            if !(total > 0.0) {
                return Err(Error::Support {
                    depth: cell.depth(),
                });
            }
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = kids[kids.len() - 1].0;
            for (k, m) in &kids {
                if u < *m {
                    chosen = *k;
                    break;
                }
                u -= m;
            }
            let tuple: Vec<u16> = chosen[..self.dim()].iter().map(|&v| v as u16).collect();
            cell.push(&tuple);
            point.push(&tuple);
        }
        Ok(())
    }

    /// Draws `x ∼ μ_{B_1}` to `depth` digits.
    pub fn sample_point(&self, depth: u32, rng: &mut impl Rng) -> Result<Point> {
        if let Self::PointMass { point } = self {
            let mut p = point.shifted(0);
            if p.depth() < depth {
                p.expand_tail(depth - p.depth());
            }
            return Ok(p);
        }
        let root = CellIndex::root(self.base(), self.dim());
        let mut p = Point::from_digits(self.base(), vec![Vec::new(); self.dim()])?;
        self.extend_point(&root, &mut p, depth, rng)?;
        Ok(p)
    }
}

fn check_count(count: f64, depth: u32) -> Result<()> {
    if count > MAX_REGION_LEAVES as f64 {
        return Err(Error::Resolution {
            what: format!("region would hold {count:.0} leaves"),
            required: depth,
        });
    }
    Ok(())
}

fn range_count(ranges: &[(u64, u64)]) -> f64 {
    ranges
        .iter()
        .map(|(lo, hi)| hi.saturating_sub(*lo) as f64)
        .product()
}

/// Visits every key in a product of ranges.
fn for_each_key(ranges: &[(u64, u64)], mut f: impl FnMut(Key)) {
    let d = ranges.len();
    if ranges.iter().any(|(lo, hi)| lo >= hi) {
        return;
    }
    let mut k = [0u64; MAX_DIM];
    for a in 0..d {
        k[a] = ranges[a].0;
    }
    loop {
        f(k);
        let mut a = 0;
        loop {
            if a == d {
                return;
            }
            k[a] += 1;
            if k[a] < ranges[a].1 {
                break;
            }
            k[a] = ranges[a].0;
            a += 1;
        }
    }
}

fn in_ranges(k: &Key, ranges: &[(u64, u64)]) -> bool {
    ranges
        .iter()
        .enumerate()
        .all(|(a, (lo, hi))| k[a] >= *lo && k[a] < *hi)
}

fn half_fraction(lo: f64, side: f64) -> f64 {
    (((lo + side).max(0.0) - lo.max(0.0)) / side).clamp(0.0, 1.0)
}

fn lebesgue_region(
    anchor: &CellIndex,
    levels: u32,
    ranges: &[(u64, u64)],
    half_space: Option<usize>,
    empty: bool,
) -> Result<Region> {
    let d = anchor.dim();
    let (lo, side) = anchor.ambient_box();
    let frac = half_space.map_or(1.0, |a| half_fraction(lo[a], side));
    if frac == 0.0 {
        return Ok(Region::empty());
    }
    let lnb = (anchor.base() as f64).ln();
    let log_side = std::f64::consts::LN_2 - anchor.depth() as f64 * lnb;
    let mut region = Region {
        log_mass: d as f64 * log_side + frac.ln(),
        leaves: BTreeMap::new(),
    };
    if empty {
        return Ok(region);
    }
    check_count(range_count(ranges), anchor.depth() + levels)?;
    let n = (anchor.base() as f64).powi(levels as i32);
    let ls = side / n;
    let rel = n.powi(-(d as i32)) / frac;
    for_each_key(ranges, |k| {
        let f = half_space.map_or(1.0, |a| half_fraction(lo[a] + ls * k[a] as f64, ls));
        if f > 0.0 {
            region.leaves.insert(k, rel * f);
        }
    });
    Ok(region)
}

fn point_region(point: &Point, anchor: &CellIndex, levels: u32, ranges: &[(u64, u64)]) -> Region {
    if !anchor.in_unit_window() {
        return Region::empty();
    }
    let need = anchor.depth() + levels;
    let mut p = point.clone();
    if p.depth() < need {
        p.expand_tail(need - p.depth());
    }
    let cell = p.cell(need);
    if !cell.ancestor(anchor.depth()).is_within(anchor) {
        return Region::empty();
    }
    let mut region = Region::with_mass(1.0);
    let k = cell
        .local_key(anchor.depth())
        .expect("checked by cells_per_axis");
    if in_ranges(&k, ranges) {
        region.leaves.insert(k, 1.0);
    }
    region
}

/// One axis of a digit measure below a prefix: `(local index, probability)`.
fn digit_axis(
    proc: &DigitProcess,
    state: Option<u16>,
    levels: u32,
    range: (u64, u64),
) -> Vec<(u64, f64)> {
    let b = proc.base() as u64;
    let mut out = Vec::new();
    // explicit stack: (level, index, prob, state)
    let mut stack = vec![(0u32, 0u64, 1.0f64, state)];
    while let Some((level, idx, p, st)) = stack.pop() {
        if level == levels {
            out.push((idx, p));
            continue;
        }
        let block = b.pow(levels - level - 1);
        let probs = proc.next_probs(st);
        for dgt in (0..b).rev() {
            let q = probs[dgt as usize];
            if q == 0.0 {
                continue;
            }
            let child = idx * b + dgt;
            let (lo, hi) = (child * block, (child + 1) * block);
            if hi <= range.0 || lo >= range.1 {
                continue;
            }
            stack.push((level + 1, child, p * q, Some(dgt as u16)));
        }
    }
    out.sort_by_key(|&(i, _)| i);
    out
}

fn digit_region(
    axes: &[DigitProcess],
    start: &[Option<u16>],
    anchor: &CellIndex,
    levels: u32,
    ranges: &[(u64, u64)],
    empty: bool,
) -> Result<Region> {
    if !anchor.in_unit_window() {
        return Ok(Region::empty());
    }
    let mut log_mass = 0.0;
    let mut states = Vec::with_capacity(axes.len());
    for (a, proc) in axes.iter().enumerate() {
        let word = &anchor.digits()[a];
        log_mass += proc.word_log_prob(start[a], word);
        states.push(word.last().copied().or(start[a]));
    }
    let mut region = Region {
        log_mass,
        leaves: BTreeMap::new(),
    };
    if region.is_null() || empty {
        return Ok(region);
    }
    let per_axis: Vec<Vec<(u64, f64)>> = axes
        .iter()
        .enumerate()
        .map(|(a, p)| digit_axis(p, states[a], levels, ranges[a]))
        .collect();
    check_count(
        per_axis.iter().map(|v| v.len() as f64).product(),
        anchor.depth() + levels,
    )?;
    cartesian(&per_axis, |k, p| {
        region.leaves.insert(k, p);
    });
    Ok(region)
}

/// Visits the Cartesian product of per-axis `(index, weight)` lists.
fn cartesian(lists: &[Vec<(u64, f64)>], mut f: impl FnMut(Key, f64)) {
    fn rec(lists: &[Vec<(u64, f64)>], a: usize, k: &mut Key, w: f64, f: &mut impl FnMut(Key, f64)) {
        if a == lists.len() {
            f(*k, w);
            return;
        }
        for &(i, p) in &lists[a] {
            k[a] = i;
            rec(lists, a + 1, k, w * p, f);
        }
    }
    let mut k = [0u64; MAX_DIM];
    rec(lists, 0, &mut k, 1.0, &mut f);
}

fn ifs_region(
    base: u32,
    ifs: &Ifs,
    anchor: &CellIndex,
    levels: u32,
    ranges: &[(u64, u64)],
) -> Result<Region> {
    if !anchor.in_unit_window() {
        return Ok(Region::empty());
    }
    let d = ifs.dim();
    let (lo, side) = anchor.ambient_box();
    let window = Window::new(lo.iter().map(|l| l + side / 2.0).collect(), side / 2.0)?;
    let deposit = |levels: u32, ranges: &[(u64, u64)]| -> Result<BTreeMap<Key, f64>> {
        let grid = Grid::new(base, levels, window.clone())?;
        let ls = side / grid.cells() as f64;
        if ls < MIN_IFS_SIDE {
            return Err(Error::Resolution {
                what: "cylinder deposit below floating-point resolution".into(),
                required: anchor.depth() + levels,
            });
        }
        let tol = ls * 1e-9;
        let rlo: Vec<f64> = (0..d)
            .map(|a| lo[a] + ranges[a].0 as f64 * ls - tol)
            .collect();
        let rhi: Vec<f64> = (0..d)
            .map(|a| lo[a] + ranges[a].1 as f64 * ls + tol)
            .collect();
        let mut out = BTreeMap::new();
        let mut stack = vec![(Affine::identity(d), 1.0f64)];
        while let Some((w, p)) = stack.pop() {
            let (c, h) = w.image_box(&ifs.hull.0, &ifs.hull.1);
            if (0..d).any(|a| c[a] + h[a] < rlo[a] || c[a] - h[a] > rhi[a]) {
                continue;
            }
            let diam = 2.0 * h.iter().cloned().fold(0.0, f64::max);
            if diam <= ls * (1.0 + 1e-9) {
                let blo: Vec<f64> = (0..d).map(|a| c[a] - h[a]).collect();
                let bhi: Vec<f64> = (0..d).map(|a| c[a] + h[a]).collect();
                grid.spread_box(&blo, &bhi, |k, f| {
                    if in_ranges(&k, ranges) {
                        *out.entry(k).or_insert(0.0) += p * f;
                    }
                });
                if out.len() > MAX_REGION_LEAVES {
                    return Err(Error::Resolution {
                        what: "too many cylinder deposits".into(),
                        required: anchor.depth() + levels,
                    });
                }
                continue;
            }
            for (m, &q) in ifs.maps.iter().zip(&ifs.probs) {
                if q > 0.0 {
                    stack.push((w.compose(m), p * q));
                }
            }
        }
        Ok(out)
    };
    let anchor_mass: f64 = deposit(0, &vec![(0, 1); d])?.values().sum();
    let mut region = Region::with_mass(anchor_mass);
    if region.is_null() || ranges.iter().any(|(l, h)| l >= h) {
        return Ok(region);
    }
    region.leaves = deposit(levels, ranges)?;
    region.leaves.values_mut().for_each(|m| *m /= anchor_mass);
    Ok(region)
}

fn product_region(
    factors: &[MeasureSource],
    anchor: &CellIndex,
    levels: u32,
    ranges: &[(u64, u64)],
) -> Result<Region> {
    let mut axis = 0;
    let mut log_mass = 0.0;
    let mut parts = Vec::with_capacity(factors.len());
    for f in factors {
        let axes: Vec<usize> = (axis..axis + f.dim()).collect();
        let r = f.region(
            &anchor.axes(&axes),
            levels,
            Some(&ranges[axis..axis + f.dim()]),
        )?;
        log_mass += r.log_mass;
        parts.push((axis, r.leaves));
        axis += f.dim();
    }
    let mut region = Region {
        log_mass,
        leaves: BTreeMap::new(),
    };
    if region.is_null() || parts.iter().any(|(_, l)| l.is_empty()) {
        return Ok(region);
    }
    check_count(
        parts.iter().map(|(_, l)| l.len() as f64).product(),
        anchor.depth() + levels,
    )?;
    let dims: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
    let mut k = [0u64; MAX_DIM];
    rec_place(&parts, &dims, 0, &mut k, 1.0, &mut region.leaves);
    Ok(region)
}

fn rec_place(
    parts: &[(usize, BTreeMap<Key, f64>)],
    dims: &[usize],
    i: usize,
    k: &mut Key,
    w: f64,
    out: &mut BTreeMap<Key, f64>,
) {
    if i == parts.len() {
        out.insert(*k, w);
        return;
    }
    let (off, leaves) = &parts[i];
    for (fk, m) in leaves {
        k[*off..*off + dims[i]].copy_from_slice(&fk[..dims[i]]);
        rec_place(parts, dims, i + 1, k, w * m, out);
    }
}

fn frozen_region(
    t: &TreeMeasure,
    anchor: &CellIndex,
    levels: u32,
    ranges: &[(u64, u64)],
) -> Result<Region> {
    let need = anchor.depth() + levels;
    if need > t.depth() {
        return Err(Error::Resolution {
            what: format!("stored tree has depth {}", t.depth()),
            required: need,
        });
    }
    if !anchor.in_unit_window() {
        return Ok(Region::empty());
    }
    let d = t.dim();
    let f = cells_per_axis(t.base(), t.depth() - need)?;
    let n = cells_per_axis(t.base(), levels)?;
    let ak = anchor.key()?;
    let mut total = 0.0;
    let mut leaves = BTreeMap::new();
    for (k, &m) in t.leaves_in(anchor)? {
        total += m;
        let mut lk = [0u64; MAX_DIM];
        for a in 0..d {
            lk[a] = k[a] / f - ak[a] * n;
        }
        if in_ranges(&lk, ranges) {
            *leaves.entry(lk).or_insert(0.0) += m;
        }
    }
    let mut region = Region::with_mass(total);
    if !region.is_null() {
        leaves.values_mut().for_each(|m| *m /= total);
        region.leaves = leaves;
    }
    Ok(region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::ifs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cantor() -> MeasureSource {
        MeasureSource::digit_iid(3, 1, vec![0.5, 0.0, 0.5]).unwrap()
    }

    #[test]
    fn lebesgue_refine_uniform() {
        let t = MeasureSource::lebesgue(2, 1).unwrap().refine(2).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.leaves().values().all(|&m| (m - 0.25).abs() < 1e-15));
        let lam = MeasureSource::lebesgue(2, 1).unwrap();
        assert_eq!(lam.unit_mass().unwrap(), 2.0);
    }

    #[test]
    fn digit_refine_weights() {
        let t = cantor().refine(1).unwrap();
        let v: Vec<f64> = t.leaves().values().cloned().collect();
        assert_eq!(v, vec![0.5, 0.5]);
        assert!(t.leaves().contains_key(&[0, 0, 0]) && t.leaves().contains_key(&[2, 0, 0]));
    }

    #[test]
    fn self_similar_matches_digit_cantor() {
        let ss =
            MeasureSource::self_similar(3, Ifs::new(&ifs::cantor_unit_frame()).unwrap()).unwrap();
        // brute-force oracle: cylinder images [a, a + 2·3^-2) for words in {0,2}^2
        let t2 = ss.refine(2).unwrap();
        let expected: Vec<u64> = vec![0, 2, 6, 8];
        assert_eq!(
            t2.leaves().keys().map(|k| k[0]).collect::<Vec<_>>(),
            expected
        );
        let a = ss.refine(8).unwrap();
        let b = cantor().refine(8).unwrap();
        assert!(a.max_leaf_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn refine_consistency_under_coarsening() {
        let src = MeasureSource::digit_iid(2, 2, vec![0.3, 0.7]).unwrap();
        let fine = src.refine(6).unwrap().coarsen(3).unwrap();
        let coarse = src.refine(3).unwrap();
        assert!(fine.max_leaf_diff(&coarse).unwrap() < 1e-12);
    }

    #[test]
    fn ranges_restrict_leaves() {
        let lam = MeasureSource::lebesgue(3, 2).unwrap();
        let root = CellIndex::root(3, 2);
        let r = lam.region(&root, 2, Some(&[(1, 3), (0, 1)])).unwrap();
        assert_eq!(r.leaves.len(), 2);
        assert!((r.anchor_mass() - 4.0).abs() < 1e-14);
        assert!(r.leaves.values().all(|&m| (m - 1.0 / 81.0).abs() < 1e-15));
    }

    #[test]
    fn half_line_mass() {
        let eta = MeasureSource::half_line(3).unwrap();
        assert!((eta.unit_mass().unwrap() - 1.0).abs() < 1e-15);
        let t = eta.refine(1).unwrap();
        // cells [-1,-1/3), [-1/3,1/3), [1/3,1): the middle one is half covered
        assert!(!t.leaves().contains_key(&[0, 0, 0]));
        assert!((t.leaves()[&[1, 0, 0]] - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.leaves()[&[2, 0, 0]] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn product_masses_multiply() {
        let a = MeasureSource::digit_iid(2, 1, vec![0.25, 0.75]).unwrap();
        let b = MeasureSource::digit_iid(2, 1, vec![0.5, 0.5]).unwrap();
        let p = MeasureSource::product(vec![a, b]).unwrap();
        let t = p.refine(1).unwrap();
        assert!((t.leaves()[&[1, 0, 0]] - 0.375).abs() < 1e-15);
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn point_mass_descends_to_its_point() {
        let x = Point::from_coords(&[0.2], 2, 0).unwrap();
        let src = MeasureSource::point_mass(x);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = src.sample_point(10, &mut rng).unwrap();
        let expect = Point::from_coords(&[0.2], 2, 10).unwrap();
        assert_eq!(p.digits(), expect.digits());
    }

    #[test]
    fn frozen_needs_depth() {
        let t = cantor().refine(3).unwrap();
        let f = MeasureSource::frozen(t.clone()).unwrap();
        assert_eq!(f.refine(3).unwrap(), t);
        assert!(matches!(
            f.refine(4),
            Err(Error::Resolution { required: 4, .. })
        ));
    }
}
