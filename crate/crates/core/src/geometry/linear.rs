//! Linear maps and the pushforward of trees and sources under them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cell::{cells_per_axis, check_dim, Key, Window, MAX_DIM};
use crate::constructions::splice::Splice;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

/// Sub-boxes per axis used when a leaf's image is approximated by points.
const SUBSAMPLE: usize = 4;

/// A `k × d` matrix, stored by rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap", into = "RawMap")]
pub struct LinearMap {
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<RawMap> for LinearMap {
    type Error = Error;

    fn try_from(raw: RawMap) -> Result<Self> {
        Self::new(raw.matrix)
    }
}

impl From<LinearMap> for RawMap {
    fn from(m: LinearMap) -> Self {
        RawMap { matrix: m.rows }
    }
}

impl LinearMap {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        check_dim(k)?;
        let d = rows[0].len();
        check_dim(d)?;
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Parameter("ragged matrix".into()));
        }
        if k > d {
            return Err(Error::Parameter(format!(
                "map from R^{d} to R^{k} with k > d"
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite matrix entry".into()));
        }
        Ok(Self { rows })
    }

    /// Projection onto the listed coordinates, in order.
    pub fn coordinate(d: usize, axes: &[usize]) -> Result<Self> {
        if axes.iter().any(|&a| a >= d) {
            return Err(Error::Parameter(format!(
                "axes {axes:?} out of range for d={d}"
            )));
        }
        Self::new(
            axes.iter()
                .map(|&a| (0..d).map(|j| if j == a { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::coordinate(d, &(0..d).collect::<Vec<_>>())
    }

    /// `x ↦ Σ c_j x_j`.
    pub fn functional(coeffs: &[f64]) -> Result<Self> {
        Self::new(vec![coeffs.to_vec()])
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn out_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn in_dim(&self) -> usize {
        self.rows[0].len()
    }

    /// The axes when each row is a distinct unit vector.
    pub fn coordinate_axes(&self) -> Option<Vec<usize>> {
        let mut axes = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let ones: Vec<usize> = (0..r.len()).filter(|&j| r[j] == 1.0).collect();
            if ones.len() != 1 || r.iter().filter(|&&v| v != 0.0).count() != 1 {
                return None;
            }
            if axes.contains(&ones[0]) {
                return None;
            }
            axes.push(ones[0]);
        }
        Some(axes)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &LinearMap) -> Result<LinearMap> {
        if self.in_dim() != other.out_dim() {
            return Err(Error::Structural("composition dimension mismatch".into()));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                (0..other.in_dim())
                    .map(|j| (0..r.len()).map(|i| r[i] * other.rows[i][j]).sum())
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn determinant(&self) -> Option<f64> {
        let m = &self.rows;
        match (self.out_dim(), self.in_dim()) {
            (1, 1) => Some(m[0][0]),
            (2, 2) => Some(m[0][0] * m[1][1] - m[0][1] * m[1][0]),
            (3, 3) => Some(
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]),
            ),
            _ => None,
        }
    }

    /// Smallest window containing the image of `w`.
    pub fn image_window(&self, w: &Window) -> Window {
        let center = self.apply(&w.center);
        let half = self
            .rows
            .iter()
            .map(|r| w.half * r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Window {
            center,
            half: if half > 0.0 { half } else { w.half },
        }
    }
}

/// Output grid used while depositing mass.
struct Target {
    lower: Vec<f64>,
    side: f64,
    cells: u64,
}

impl Target {
    fn new(window: &Window, base: u32, depth: u32) -> Result<Self> {
        let cells = cells_per_axis(base, depth)?;
        Ok(Self {
            lower: (0..window.dim()).map(|a| window.lower(a)).collect(),
            side: 2.0 * window.half / cells as f64,
            cells,
        })
    }

    fn units(&self, axis: usize, y: f64) -> f64 {
        let u = (y - self.lower[axis]) / self.side;
        let r = u.round();
        if (u - r).abs() < 1e-9 {
            r
        } else {
            u
        }
    }

    fn index(&self, axis: usize, y: f64) -> u64 {
        (self.units(axis, y).floor().max(0.0) as u64).min(self.cells - 1)
    }

    /// Cell holding the upper end of an interval ending at `y`.
    fn index_upper(&self, axis: usize, y: f64) -> u64 {
        ((self.units(axis, y).ceil() - 1.0).max(0.0) as u64).min(self.cells - 1)
    }

    fn key(&self, y: &[f64]) -> Key {
        let mut k = [0u64; MAX_DIM];
        for (a, &v) in y.iter().enumerate() {
            k[a] = self.index(a, v);
        }
        k
    }

    /// Deposits `mass` spread as the law of `Σ U_i`, `U_i` uniform on the
    /// given intervals (at most two), on a one-dimensional target.
    fn deposit_sum(&self, out: &mut BTreeMap<Key, f64>, mass: f64, parts: &[(f64, f64)]) {
        let lo: f64 = parts.iter().map(|p| p.0).sum();
        let widths: Vec<f64> = parts
            .iter()
            .map(|p| p.1 - p.0)
            .filter(|&w| w > 0.0)
            .collect();
        let hi = lo + widths.iter().sum::<f64>();
        let first = self.index(0, lo);
        let last = self.index_upper(0, hi).max(first);
        if first == last || widths.is_empty() {
            *out.entry([first, 0, 0]).or_insert(0.0) += mass;
            return;
        }
        let cdf = |s: f64| -> f64 {
            let u = s - lo;
            match widths.as_slice() {
                [w] => (u / w).clamp(0.0, 1.0),
                [w1, w2] => {
                    let g = |v: f64| v.max(0.0).powi(2) / 2.0;
                    ((g(u) - g(u - w1) - g(u - w2) + g(u - w1 - w2)) / (w1 * w2)).clamp(0.0, 1.0)
                }
                _ => unreachable!("at most two intervals"),
            }
        };
        let mut prev = 0.0;
        for j in first..=last {
            let f = if j == last {
                1.0
            } else {
                cdf(self.lower[0] + (j + 1) as f64 * self.side)
            };
            if f > prev {
                *out.entry([j, 0, 0]).or_insert(0.0) += mass * (f - prev);
            }
            prev = f;
        }
    }
}

/// `Aμ` on `A`'s image of the tree's window, at the tree's base.
pub fn pushforward_linear(
    tree: &TreeMeasure,
    map: &LinearMap,
    out_depth: u32,
) -> Result<TreeMeasure> {
    let window = map.image_window(tree.window());
    pushforward_linear_on(tree, map, tree.base(), out_depth, window)
}

/// `Aμ` on a caller-chosen grid. Coordinate maps onto the matching
/// sub-window are exact; functionals of one- and two-dimensional trees
/// spread each leaf by the exact law of its image; anything else places
/// sub-box centres.
pub fn pushforward_linear_on(
    tree: &TreeMeasure,
    map: &LinearMap,
    out_base: u32,
    out_depth: u32,
    window: Window,
) -> Result<TreeMeasure> {
    if map.in_dim() != tree.dim() || window.dim() != map.out_dim() {
        return Err(Error::Structural(
            "map does not match tree or window".into(),
        ));
    }
    let w = tree.window();
    if let Some(axes) = map.coordinate_axes() {
        let aligned = out_base == tree.base()
            && out_depth <= tree.depth()
            && window.half == w.half
            && axes
                .iter()
                .zip(&window.center)
                .all(|(&a, &c)| w.center[a] == c);
        if aligned {
            let f = cells_per_axis(tree.base(), tree.depth() - out_depth)?;
            let mut out = BTreeMap::new();
            for (k, &m) in tree.leaves() {
                let mut key = [0u64; MAX_DIM];
                for (i, &a) in axes.iter().enumerate() {
                    key[i] = k[a] / f;
                }
                *out.entry(key).or_insert(0.0) += m;
            }
            return TreeMeasure::from_leaves(out_base, out_depth, window, out);
        }
    }
    let target = Target::new(&window, out_base, out_depth)?;
    let d = tree.dim();
    let mut out = BTreeMap::new();
    for (k, &m) in tree.leaves() {
        let (lo, hi) = w.cell_box(tree.base(), tree.depth(), k);
        if map.out_dim() == 1 && d <= 2 {
            let r = &map.rows[0];
            let parts: Vec<(f64, f64)> = (0..d)
                .map(|j| {
                    let (a, b) = (r[j] * lo[j], r[j] * hi[j]);
                    (a.min(b), a.max(b))
                })
                .collect();
            target.deposit_sum(&mut out, m, &parts);
        } else {
            let count = SUBSAMPLE.pow(d as u32);
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
                *out.entry(target.key(&map.apply(&p))).or_insert(0.0) += share;
            }
        }
    }
    TreeMeasure::from_leaves(out_base, out_depth, window, out)
}

/// Law of `a X + b Y` for independent `X ∼ μ`, `Y ∼ ν` given as
/// one-dimensional trees of possibly different bases.
pub fn pushforward_pair_sum(
    mu: &TreeMeasure,
    nu: &TreeMeasure,
    coeffs: [f64; 2],
    out_base: u32,
    out_depth: u32,
    window: Window,
) -> Result<TreeMeasure> {
    if mu.dim() != 1 || nu.dim() != 1 || window.dim() != 1 {
        return Err(Error::Structural(
            "pair sums need one-dimensional trees".into(),
        ));
    }
    let target = Target::new(&window, out_base, out_depth)?;
    let boxes = |t: &TreeMeasure, c: f64| -> Vec<((f64, f64), f64)> {
        t.leaves()
            .iter()
            .map(|(k, &m)| {
                let (lo, hi) = t.window().cell_box(t.base(), t.depth(), k);
                let (a, b) = (c * lo[0], c * hi[0]);
                ((a.min(b), a.max(b)), m)
            })
            .collect()
    };
    let (xs, ys) = (boxes(mu, coeffs[0]), boxes(nu, coeffs[1]));
    let mut out = BTreeMap::new();
    for (ix, mx) in &xs {
        for (iy, my) in &ys {
            target.deposit_sum(&mut out, mx * my, &[*ix, *iy]);
        }
    }
    TreeMeasure::from_leaves(out_base, out_depth, window, out)
}

/// The marginal of `μ` restricted to `B_1` on the coordinates `axes`, as a
/// source of the same kind when the construction allows it.
pub fn coordinate_marginal(source: &MeasureSource, axes: &[usize]) -> Result<MeasureSource> {
    let d = source.dim();
    if axes.is_empty() || axes.iter().any(|&a| a >= d) {
        return Err(Error::Parameter(format!(
            "axes {axes:?} out of range for d={d}"
        )));
    }
    if (1..axes.len()).any(|i| axes[..i].contains(&axes[i])) {
        return Err(Error::Parameter(format!("repeated axes {axes:?}")));
    }
    match source {
        MeasureSource::Lebesgue {
            base, half_space, ..
        } => Ok(MeasureSource::Lebesgue {
            base: *base,
            dim: axes.len(),
            half_space: half_space.and_then(|h| axes.iter().position(|&a| a == h)),
        }),
        MeasureSource::PointMass { point } => {
            let digits = axes.iter().map(|&a| point.digits()[a].clone()).collect();
            let tail = axes.iter().map(|&a| point.tail()[a]).collect();
            Ok(MeasureSource::point_mass(
                Point::from_digits(point.base(), digits)?.with_tail(tail)?,
            ))
        }
        MeasureSource::Digit { axes: procs, start } => Ok(MeasureSource::Digit {
            axes: axes.iter().map(|&a| procs[a].clone()).collect(),
            start: axes.iter().map(|&a| start[a]).collect(),
        }),
        MeasureSource::SelfSimilar { base, ifs } => {
            MeasureSource::self_similar(*base, ifs.marginal(axes)?)
        }
        MeasureSource::Product(factors) => {
            let mut offsets = Vec::with_capacity(factors.len());
            let mut o = 0;
            for f in factors {
                offsets.push(o);
                o += f.dim();
            }
            let owner = |a: usize| offsets.iter().rposition(|&s| s <= a).expect("offset 0");
            let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
            for &a in axes {
                let f = owner(a);
                match groups.last_mut() {
                    Some((g, local)) if *g == f => local.push(a - offsets[f]),
                    _ => {
                        if groups.iter().any(|(g, _)| *g == f) {
                            return Err(Error::Structural(format!(
                                "axes {axes:?} interleave product factors"
                            )));
                        }
                        groups.push((f, vec![a - offsets[f]]));
                    }
                }
            }
            let parts = groups
                .iter()
                .map(|(f, local)| coordinate_marginal(&factors[*f], local))
                .collect::<Result<Vec<_>>>()?;
            if parts.len() == 1 {
                Ok(parts.into_iter().next().expect("one part"))
            } else {
                MeasureSource::product(parts)
            }
        }
        MeasureSource::Splice(s) => {
            let comps = s
                .components()
                .iter()
                .map(|c| coordinate_marginal(c, axes))
                .collect::<Result<Vec<_>>>()?;
            Ok(MeasureSource::Splice(Splice::from_starts(
                comps,
                s.starts().to_vec(),
            )?))
        }
        MeasureSource::Frozen(t) => {
            let map = LinearMap::coordinate(d, axes)?;
            let window = Window::unit(axes.len());
            MeasureSource::frozen(pushforward_linear_on(t, &map, t.base(), t.depth(), window)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::splice::Splice;

    fn cantor() -> MeasureSource {
        MeasureSource::digit_iid(3, 1, vec![0.5, 0.0, 0.5]).unwrap()
    }

    fn nu10() -> MeasureSource {
        let mut p = vec![0.0; 10];
        p[0] = 0.5;
        p[9] = 0.5;
        MeasureSource::digit_iid(10, 1, p).unwrap()
    }

    #[test]
    fn coordinate_projection_of_product_is_the_factor() {
        let lam = MeasureSource::lebesgue(3, 1).unwrap();
        let prod = MeasureSource::product(vec![cantor(), lam]).unwrap();
        let t = prod.refine(5).unwrap();
        let p = pushforward_linear(&t, &LinearMap::coordinate(2, &[0]).unwrap(), 5).unwrap();
        assert!(p.max_leaf_diff(&cantor().refine(5).unwrap()).unwrap() < 1e-14);
        let id = pushforward_linear(&t, &LinearMap::identity(2).unwrap(), 5).unwrap();
        assert_eq!(id, t);
    }

    #[test]
    fn digit_sum_convolution() {
        let nn = MeasureSource::product(vec![nu10(), nu10()]).unwrap();
        let t = nn.refine(4).unwrap();
        let map = LinearMap::functional(&[1.0, 1.0]).unwrap();
        let p = pushforward_linear(&t, &map, 4).unwrap();
        assert_eq!(p.window().half, 2.0);
        // digit sums c_i ∈ {0, 9, 18} with weights 1/4, 1/2, 1/4; the image of
        // a leaf pair is a triangle two output cells wide, starting at the
        // output cell Σ c_i 10^{4-i} / 2
        let mut oracle = BTreeMap::<u64, f64>::new();
        for word in 0..81u32 {
            let mut w = 1.0;
            let mut twice = 0u64;
            let mut v = word;
            for i in 0..4 {
                let c = [0u64, 9, 18][(v % 3) as usize];
                w *= [0.25, 0.5, 0.25][(v % 3) as usize];
                twice += c * 10u64.pow(3 - i);
                v /= 3;
            }
            if twice % 2 == 0 {
                *oracle.entry(twice / 2).or_insert(0.0) += w;
            } else {
                *oracle.entry(twice / 2).or_insert(0.0) += w / 2.0;
                *oracle.entry(twice / 2 + 1).or_insert(0.0) += w / 2.0;
            }
        }
        assert_eq!(p.len(), oracle.len());
        for (k, m) in p.leaves() {
            assert!((m - oracle[&k[0]]).abs() < 1e-12, "cell {}", k[0]);
        }
    }

    #[test]
    fn zero_map_collapses_to_the_origin_cell() {
        let t = MeasureSource::lebesgue(2, 2).unwrap().refine(3).unwrap();
        let p = pushforward_linear(&t, &LinearMap::functional(&[0.0, 0.0]).unwrap(), 3).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.total() - 1.0).abs() < 1e-12);
        let key = p.leaves().keys().next().unwrap()[0];
        let (lo, hi) = p.window().cell_box(2, 3, &[key, 0, 0]);
        assert!(lo[0] <= 0.0 && 0.0 < hi[0]);
    }

    #[test]
    fn general_maps_preserve_mass() {
        let t = MeasureSource::product(vec![cantor(), cantor()])
            .unwrap()
            .refine(4)
            .unwrap();
        let rot = LinearMap::new(vec![vec![0.6, -0.8], vec![0.8, 0.6]]).unwrap();
        let p = pushforward_linear(&t, &rot, 4).unwrap();
        assert!((p.total() - 1.0).abs() < 1e-12);
        let f = pushforward_linear(&t, &LinearMap::functional(&[0.3, -1.7]).unwrap(), 6).unwrap();
        assert!((f.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_sum_rebins_single_factors() {
        let mu = MeasureSource::digit_iid(2, 1, vec![1.0 / 3.0, 2.0 / 3.0])
            .unwrap()
            .refine(6)
            .unwrap();
        let nu = cantor().refine(4).unwrap();
        let x = pushforward_pair_sum(&mu, &nu, [1.0, 0.0], 2, 6, Window::unit(1)).unwrap();
        assert!(x.max_leaf_diff(&mu).unwrap() < 1e-15);
        let s = pushforward_pair_sum(
            &mu,
            &nu,
            [1.0, 1.0],
            2,
            8,
            Window::new(vec![0.0], 2.0).unwrap(),
        )
        .unwrap();
        assert!((s.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginals_of_sources() {
        let lam = MeasureSource::lebesgue(3, 1).unwrap();
        let prod = MeasureSource::product(vec![cantor(), lam.clone(), cantor()]).unwrap();
        assert_eq!(coordinate_marginal(&prod, &[0]).unwrap(), cantor());
        let two = coordinate_marginal(&prod, &[1, 2]).unwrap();
        assert_eq!(two, MeasureSource::product(vec![lam, cantor()]).unwrap());
        assert!(coordinate_marginal(&prod, &[0, 1, 0]).is_err());
        let swapped = coordinate_marginal(&prod, &[0, 2, 1]).unwrap();
        assert_eq!(swapped.dim(), 3);
        let cc = MeasureSource::product(vec![cantor(), cantor()]).unwrap();
        let nested = MeasureSource::product(vec![cc, MeasureSource::lebesgue(3, 1).unwrap()]);
        assert!(coordinate_marginal(&nested.unwrap(), &[0, 2, 1]).is_err());
    }

    #[test]
    fn splice_marginal_matches_tree_projection() {
        let cc = MeasureSource::product(vec![cantor(), cantor()]).unwrap();
        let ll = MeasureSource::lebesgue(3, 2).unwrap();
        let s = MeasureSource::Splice(Splice::from_starts(vec![cc, ll], vec![0, 2]).unwrap());
        let direct = pushforward_linear(
            &s.refine(5).unwrap(),
            &LinearMap::coordinate(2, &[1]).unwrap(),
            5,
        )
        .unwrap();
        let m = coordinate_marginal(&s, &[1]).unwrap().refine(5).unwrap();
        assert!(direct.max_leaf_diff(&m).unwrap() < 1e-14);
    }

    #[test]
    fn maps_round_trip_and_tag_coordinates() {
        let m = LinearMap::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.coordinate_axes(), Some(vec![1, 0]));
        assert_eq!(
            LinearMap::functional(&[1.0, 1.0])
                .unwrap()
                .coordinate_axes(),
            None
        );
        let text = toml::to_string(&m).unwrap();
        assert_eq!(toml::from_str::<LinearMap>(&text).unwrap(), m);
        assert!(toml::from_str::<LinearMap>("matrix = [[1.0], [0.0]]").is_err());
        assert_eq!(m.determinant(), Some(-1.0));
    }
}
