//! Local and entropy dimension estimates, Shannon and smoothed entropy, and
//! the dimension of a distribution of measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::ball_mass_tree;
use crate::point::Point;
use crate::rng::stream;
use crate::scenery::EmpiricalDistribution;
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

/// Default depth range for dimension regressions.
pub const DEFAULT_RANGE: (u32, u32) = (4, 12);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Local,
    Entropy,
    /// Box counts from explicit covers.
    Cover,
}

/// Regression slope with its standard error. `upper` and `lower` are the
/// extreme slopes over sliding half-range windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub method: Method,
    pub upper: f64,
    pub lower: f64,
}

impl DimensionEstimate {
    /// Slope of `ys` against `n log b` for `n = n_min..=n_max`.
    pub fn fit(base: u32, n_min: u32, ys: &[f64], method: Method) -> Result<Self> {
        if ys.len() < 2 {
            return Err(Error::Parameter("need at least two depths".into()));
        }
        let lb = (base as f64).ln();
        let xs: Vec<f64> = (0..ys.len())
            .map(|i| (n_min + i as u32) as f64 * lb)
            .collect();
        let (value, stderr) = least_squares(&xs, ys);
        let w = ys.len().div_ceil(2).max(2);
        let slopes: Vec<f64> = (0..=ys.len() - w)
            .map(|i| least_squares(&xs[i..i + w], &ys[i..i + w]).0)
            .collect();
        Ok(Self {
            value,
            stderr,
            n_min,
            n_max: n_min + ys.len() as u32 - 1,
            method,
            upper: slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            lower: slopes.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "value={:.6} stderr={:.6} range={}..{} method={} upper={:.6} lower={:.6}",
            self.value,
            self.stderr,
            self.n_min,
            self.n_max,
            match self.method {
                Method::Local => "local",
                Method::Entropy => "entropy",
                Method::Cover => "cover",
            },
            self.upper,
            self.lower
        )
    }
}

/// Slope and its standard error; the error is 0 for two points.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if xs.len() <= 2 {
        return (slope, 0.0);
    }
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (ssr / (n - 2.0) / sxx).sqrt())
}

fn check_range(n_min: u32, n_max: u32) -> Result<()> {
    if n_min >= n_max {
        return Err(Error::Parameter(format!(
            "depth range {n_min}..{n_max} is empty"
        )));
    }
    Ok(())
}

/// Slope of `−log μ(D_n(x))` against `n log b`.
pub fn local_dimension(
    source: &MeasureSource,
    x: &Point,
    n_min: u32,
    n_max: u32,
) -> Result<DimensionEstimate> {
    let ys = neg_log_masses(source, x, n_min, n_max)?;
    DimensionEstimate::fit(source.base(), n_min, &ys, Method::Local)
}

/// `-log μ(D_n(x))` for `n = n_min..=n_max`.
fn neg_log_masses(source: &MeasureSource, x: &Point, n_min: u32, n_max: u32) -> Result<Vec<f64>> {
    check_range(n_min, n_max)?;
    if x.depth() < n_max {
        return Err(Error::Resolution {
            what: format!("point has {} digits", x.depth()),
            required: n_max,
        });
    }
    let ys = (n_min..=n_max)
        .map(|n| {
            let lm = source.log_cell_mass(&x.cell(n))?;
            if lm == f64::NEG_INFINITY {
                return Err(Error::Support { depth: n });
            }
            Ok(-lm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ys)
}

/// `H(μ, D_m)` in nats for a normalized tree.
pub fn shannon_entropy(tree: &TreeMeasure, m: u32) -> Result<f64> {
    let total = tree.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization(format!("total mass {total}")));
    }
    Ok(entropy_of(tree.masses_at(m)?.values().copied()))
}

fn entropy_of(masses: impl Iterator<Item = f64>) -> f64 {
    masses.filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// `H(μ^□, D_n)` for `n = n_min..=n_max`.
pub fn entropy_profile(source: &MeasureSource, n_min: u32, n_max: u32) -> Result<Vec<f64>> {
    let lb = (source.base() as f64).ln();
    match source {
        MeasureSource::Lebesgue {
            dim,
            half_space: None,
            ..
        } => Ok((n_min..=n_max)
            .map(|n| n as f64 * *dim as f64 * lb)
            .collect()),
        MeasureSource::Product(factors) => {
            let parts = factors
                .iter()
                .map(|f| entropy_profile(f, n_min, n_max))
                .collect::<Result<Vec<_>>>()?;
            Ok((0..=(n_max - n_min) as usize)
                .map(|i| parts.iter().map(|p| p[i]).sum())
                .collect())
        }
        MeasureSource::Digit { axes, start } if axes.len() > 1 => {
            let mut out = vec![0.0; (n_max - n_min + 1) as usize];
            for (p, s) in axes.iter().zip(start) {
                let one = MeasureSource::Digit {
                    axes: vec![p.clone()],
                    start: vec![*s],
                };
                for (o, h) in out.iter_mut().zip(entropy_profile(&one, n_min, n_max)?) {
                    *o += h;
                }
            }
            Ok(out)
        }
        MeasureSource::Digit { axes, start } if axes[0].is_iid() && start[0].is_none() => {
            let h = entropy_of(axes[0].next_probs(None).iter().copied());
            Ok((n_min..=n_max).map(|n| n as f64 * h).collect())
        }
        _ => {
            let tree = source.refine(n_max)?;
            (n_min..=n_max).map(|n| shannon_entropy(&tree, n)).collect()
        }
    }
}

/// Slope of `H(μ^□, D_n)` against `n log b`.
pub fn entropy_dimension(
    source: &MeasureSource,
    n_min: u32,
    n_max: u32,
) -> Result<DimensionEstimate> {
    check_range(n_min, n_max)?;
    let ys = entropy_profile(source, n_min, n_max)?;
    DimensionEstimate::fit(source.base(), n_min, &ys, Method::Entropy)
}

/// Slope of `H(μ, D_n)` for a stored normalized tree.
pub fn tree_entropy_dimension(
    tree: &TreeMeasure,
    n_min: u32,
    n_max: u32,
) -> Result<DimensionEstimate> {
    check_range(n_min, n_max)?;
    let ys = (n_min..=n_max)
        .map(|n| shannon_entropy(tree, n))
        .collect::<Result<Vec<_>>>()?;
    DimensionEstimate::fit(tree.base(), n_min, &ys, Method::Entropy)
}

/// Entropy of the masses `∫φ_u dμ` for tensor products of hat functions
/// centred on the `cells`-per-axis grid of the tree's window, each hat
/// reaching the neighbouring centres. Leaf masses are placed at leaf
/// centres.
pub fn smoothed_entropy(tree: &TreeMeasure, cells: u64) -> Result<f64> {
    if cells == 0 {
        return Err(Error::Parameter("need at least one cell per axis".into()));
    }
    let d = tree.dim();
    let w = tree.window();
    let side = 2.0 * w.half / cells as f64;
    let mut weights = std::collections::HashMap::<Vec<u64>, f64>::new();
    for (k, &m) in tree.leaves() {
        let (lo, hi) = w.cell_box(tree.base(), tree.depth(), k);
        let per_axis: Vec<[(u64, f64); 2]> = (0..d)
            .map(|a| hat_weights((lo[a] + hi[a]) / 2.0 - w.lower(a), side, cells))
            .collect();
        for combo in 0..1usize << d {
            let mut u = Vec::with_capacity(d);
            let mut f = m;
            for (a, pair) in per_axis.iter().enumerate() {
                let (j, v) = pair[(combo >> a) & 1];
                u.push(j);
                f *= v;
            }
            if f > 0.0 {
                *weights.entry(u).or_insert(0.0) += f;
            }
        }
    }
    let mut values: Vec<f64> = weights.into_values().collect();
    values.sort_by(f64::total_cmp);
    let h = entropy_of(values.into_iter());
    #[cfg(debug_assertions)]
    check_smoothing_bound(tree, cells, h);
    Ok(h)
}

/// The two hats (index, value) at offset `x` from the window's lower edge.
fn hat_weights(x: f64, side: f64, cells: u64) -> [(u64, f64); 2] {
    let t = x / side - 0.5;
    let j = t.floor();
    if j < 0.0 {
        return [(0, 1.0), (0, 0.0)];
    }
    let j = j as u64;
    if j + 1 >= cells {
        return [(cells - 1, 1.0), (cells - 1, 0.0)];
    }
    let f = t - j as f64;
    [(j, 1.0 - f), (j + 1, f)]
}

#[cfg(debug_assertions)]
fn check_smoothing_bound(tree: &TreeMeasure, cells: u64, h: f64) {
    let b = tree.base() as u64;
    let mut m = 0;
    let mut c = 1u64;
    while c < cells && m < tree.depth() {
        c = c.saturating_mul(b);
        m += 1;
    }
    if c == cells {
        if let Ok(raw) = shannon_entropy(tree, m) {
            let bound = tree.dim() as f64 * 9f64.ln();
            assert!(
                (h - raw).abs() <= bound + 1e-9,
                "smoothed entropy {h} vs {raw} exceeds {bound}"
            );
        }
    }
}

/// Result of [`distribution_dimension`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionDimension {
    pub value: f64,
    pub r: f64,
    /// Indices of atoms with no mass on `B_r(0)`.
    pub excluded: Vec<usize>,
    pub excluded_weight: f64,
}

/// Weighted mean of `log μ(B_r(0)) / log r` over the atoms carrying mass
/// near the origin.
pub fn distribution_dimension(p: &EmpiricalDistribution, r: f64) -> Result<DistributionDimension> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Parameter(format!("radius {r} outside (0, 1)")));
    }
    let origin = vec![0.0; p.dim()];
    let mut sum = 0.0;
    let mut kept = 0.0;
    let mut excluded = Vec::new();
    let mut excluded_weight = 0.0;
    for (i, (w, t)) in p.atoms().iter().enumerate() {
        let m = ball_mass_tree(t, &origin, r)?.mass;
        if m > 0.0 {
            sum += w * m.ln() / r.ln();
            kept += w;
        } else {
            excluded.push(i);
            excluded_weight += w;
        }
    }
    if !(kept > 0.0) {
        return Err(Error::UndefinedDimension(format!(
            "no atom has mass on B_{r}(0)"
        )));
    }
    Ok(DistributionDimension {
        value: sum / kept,
        r,
        excluded,
        excluded_weight,
    })
}

/// Depths per window for the scale spread.
pub const SPREAD_WINDOW: usize = 3;

/// Spread of local dimension estimates over sampled points and scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactnessSpread {
    /// Local dimension over the whole range, per point.
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `values`.
    pub point_spread: f64,
    /// Point-averaged slope over each window of [`SPREAD_WINDOW`] depths.
    pub window_means: Vec<f64>,
    /// Standard deviation of `window_means`.
    pub scale_spread: f64,
    /// The larger of the two spreads.
    pub spread: f64,
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Local dimensions at `n_points` points drawn from `μ_{B_1}`, point `i`
/// from stream `i` of `seed`. Oscillation shared by all points between
/// scales shows up in `scale_spread` only.
pub fn exactness_spread(
    source: &MeasureSource,
    n_points: usize,
    n_min: u32,
    n_max: u32,
    seed: u64,
) -> Result<ExactnessSpread> {
    check_range(n_min, n_max)?;
    if n_points < 2 {
        return Err(Error::Parameter("need at least two points".into()));
    }
    let base = source.base();
    let rows = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let x = source.sample_point(n_max, &mut stream(seed, i as u64))?;
            neg_log_masses(source, &x, n_min, n_max)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let fit = |n0: u32, ys: &[f64]| -> Result<f64> {
        Ok(DimensionEstimate::fit(base, n0, ys, Method::Local)?.value)
    };
    let values = rows
        .iter()
        .map(|ys| fit(n_min, ys))
        .collect::<Result<Vec<f64>>>()?;
    let w = SPREAD_WINDOW.min(rows[0].len());
    let window_means = (0..=rows[0].len() - w)
        .map(|j| {
            let mut sum = 0.0;
            for ys in &rows {
                sum += fit(n_min + j as u32, &ys[j..j + w])?;
            }
            Ok(sum / rows.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let point_spread = std_dev(&values);
    let scale_spread = std_dev(&window_means);
    Ok(ExactnessSpread {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        values,
        point_spread,
        window_means,
        scale_spread,
        spread: point_spread.max(scale_spread),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{Grid, Key, Window};
    use proptest::prelude::*;
    use rand::Rng;

    const LOG2_LOG3: f64 = 0.630_929_753_571_457_4;

    fn cantor() -> MeasureSource {
        MeasureSource::digit_iid(3, 1, vec![0.5, 0.0, 0.5]).unwrap()
    }

    fn nu10(dim: usize) -> MeasureSource {
        let mut p = vec![0.0; 10];
        p[0] = 0.5;
        p[9] = 0.5;
        MeasureSource::digit_iid(10, dim, p).unwrap()
    }

    /// Random normalized tree with roughly a third of the leaves empty.
    fn random_tree(base: u32, dim: usize, depth: u32, seed: u64) -> TreeMeasure {
        let mut rng = stream(seed, 0);
        let n = (base as u64).pow(depth);
        let count = n.pow(dim as u32);
        let mut leaves = Vec::new();
        for i in 0..count {
            let mut k: Key = [0; 3];
            k[0] = i % n;
            if dim == 2 {
                k[1] = i / n;
            }
            if rng.gen_bool(0.66) {
                leaves.push((k, rng.gen::<f64>()));
            }
        }
        if leaves.is_empty() {
            leaves.push(([0; 3], 1.0));
        }
        let t = TreeMeasure::from_leaves(base, depth, Window::unit(dim), leaves).unwrap();
        t.scaled(1.0 / t.total())
    }

    #[test]
    fn lebesgue_local_dimension_is_exact() {
        let lam = MeasureSource::lebesgue(2, 2).unwrap();
        let x = Point::from_coords(&[0.31, -0.77], 2, 14).unwrap();
        let e = local_dimension(&lam, &x, 4, 12).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12 && e.stderr < 1e-12, "{e:?}");
    }

    #[test]
    fn atom_has_zero_local_dimension() {
        let x = Point::from_coords(&[0.2], 3, 12).unwrap();
        let e = local_dimension(&MeasureSource::point_mass(x.clone()), &x, 4, 12).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn cantor_local_dimension() {
        let c = cantor();
        let x = c.sample_point(12, &mut stream(5, 0)).unwrap();
        let e = local_dimension(&c, &x, 4, 12).unwrap();
        assert!((e.value - LOG2_LOG3).abs() < 1e-12);
        let gap = Point::from_coords(&[0.0], 3, 12).unwrap();
        assert_eq!(
            local_dimension(&c, &gap, 4, 12).unwrap_err(),
            Error::Support { depth: 4 }
        );
    }

    #[test]
    fn shannon_examples() {
        let lam = TreeMeasure::uniform(2, 1, 5).unwrap();
        assert!((shannon_entropy(&lam, 3).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-12);
        let atom = TreeMeasure::atom(2, 5, Window::unit(1), &[0.3]).unwrap();
        assert_eq!(shannon_entropy(&atom, 5).unwrap(), 0.0);
        let c = cantor().refine(6).unwrap();
        assert!((shannon_entropy(&c, 1).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(
            shannon_entropy(&lam.scaled(2.0), 3),
            Err(Error::Normalization(_))
        ));
    }

    #[test]
    fn entropy_dimension_examples() {
        let lam = MeasureSource::lebesgue(3, 2).unwrap();
        assert_eq!(entropy_dimension(&lam, 4, 12).unwrap().value, 2.0);
        let e = entropy_dimension(&nu10(1), 4, 12).unwrap();
        assert!((e.value - 2f64.log10()).abs() < 1e-12);
        let e2 = entropy_dimension(&nu10(2), 4, 12).unwrap();
        assert!((e2.value - 2.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_refinement() {
        let c = cantor();
        let frozen = MeasureSource::frozen(c.refine(9).unwrap()).unwrap();
        let a = entropy_profile(&c, 2, 9).unwrap();
        let b = entropy_profile(&frozen, 2, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        let prod = MeasureSource::product(vec![c.clone(), MeasureSource::lebesgue(3, 1).unwrap()])
            .unwrap();
        let direct = prod.refine(5).unwrap();
        let h = entropy_profile(&prod, 5, 5).unwrap()[0];
        assert!((h - shannon_entropy(&direct, 5).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn smoothed_entropy_examples() {
        let atom = TreeMeasure::atom(3, 6, Window::unit(1), &[0.0]).unwrap();
        assert_eq!(smoothed_entropy(&atom, 3).unwrap(), 0.0);
        let lam = TreeMeasure::uniform(2, 1, 6).unwrap();
        let f = smoothed_entropy(&lam, 4).unwrap();
        assert!((f - shannon_entropy(&lam, 2).unwrap()).abs() <= 9f64.ln());
    }

    #[test]
    fn smoothing_is_continuous_where_partitions_jump() {
        // two atoms in the right cell, one of them just inside its edge
        let grid = Grid::new(3, 10, Window::unit(1)).unwrap();
        let pair = |shift: f64| {
            let leaves = [1.0 / 3.0 + 2e-4 - shift, 0.8].map(|x| (grid.locate(&[x]).unwrap(), 0.5));
            TreeMeasure::from_leaves(3, 10, Window::unit(1), leaves).unwrap()
        };
        let (a, b) = (pair(0.0), pair(1e-3));
        let raw = (shannon_entropy(&a, 1).unwrap() - shannon_entropy(&b, 1).unwrap()).abs();
        let smooth = (smoothed_entropy(&a, 3).unwrap() - smoothed_entropy(&b, 3).unwrap()).abs();
        assert!((raw - 2f64.ln()).abs() < 1e-12);
        assert!(smooth <= 0.1, "{smooth}");
    }

    #[test]
    fn distribution_dimension_examples() {
        for d in 1..=2 {
            let lam = EmpiricalDistribution::dirac(TreeMeasure::uniform(2, d, 6).unwrap());
            for r in [0.25, 1.0 / 3.0, 0.5] {
                let v = distribution_dimension(&lam, r).unwrap().value;
                assert!((v - d as f64).abs() < 1e-12, "d={d} r={r}: {v}");
            }
        }
        let atom = TreeMeasure::atom(3, 5, Window::unit(1), &[0.0]).unwrap();
        let p = EmpiricalDistribution::dirac(atom);
        assert_eq!(distribution_dimension(&p, 0.5).unwrap().value, 0.0);
        let off = TreeMeasure::atom(3, 5, Window::unit(1), &[0.9]).unwrap();
        let q = EmpiricalDistribution::dirac(off.clone());
        assert!(matches!(
            distribution_dimension(&q, 0.5),
            Err(Error::UndefinedDimension(_))
        ));
        let mixed = EmpiricalDistribution::new(vec![
            (0.25, off),
            (0.75, TreeMeasure::uniform(3, 1, 5).unwrap()),
        ])
        .unwrap();
        let r = distribution_dimension(&mixed, 1.0 / 3.0).unwrap();
        assert_eq!(r.excluded, vec![0]);
        assert_eq!(r.excluded_weight, 0.25);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exactness_spread_examples() {
        let lam = MeasureSource::lebesgue(2, 1).unwrap();
        assert!(exactness_spread(&lam, 8, 4, 12, 1).unwrap().spread < 1e-12);
        let s = exactness_spread(&cantor(), 32, 4, 12, 2).unwrap();
        assert!(s.spread <= 0.05);
        let biased = MeasureSource::digit_iid(2, 1, vec![0.2, 0.8]).unwrap();
        let s = exactness_spread(&biased, 32, 4, 12, 3).unwrap();
        assert!(s.spread > 0.0 && s.spread < 0.5);
    }

    #[test]
    fn alternating_splice_spreads_across_scales() {
        use crate::constructions::splice::Splice;
        let mut four = vec![0.0; 10];
        for d in [0, 3, 6, 9] {
            four[d] = 0.25;
        }
        let wide = MeasureSource::digit_iid(10, 1, four).unwrap();
        let comps = vec![nu10(1), wide.clone(), nu10(1), wide];
        let src = MeasureSource::Splice(Splice::from_starts(comps, vec![0, 3, 6, 9]).unwrap());
        let s = exactness_spread(&src, 8, 1, 12, 5).unwrap();
        // every point sees the same per-level masses
        assert!(s.point_spread < 1e-12);
        let lo = 2f64.ln() / 10f64.ln();
        // windows [1,3] and [4,6] lie inside one regime each
        assert!((s.window_means[0] - lo).abs() < 1e-12);
        assert!((s.window_means[3] - 2.0 * lo).abs() < 1e-12);
        assert!(s.scale_spread > 0.1 && s.spread == s.scale_spread);
    }

    #[test]
    fn windows_bracket_the_slope() {
        let ys = [0.0, 1.0, 1.5, 3.5, 4.0, 6.0];
        let e = DimensionEstimate::fit(2, 1, &ys, Method::Entropy).unwrap();
        assert!(e.lower <= e.value && e.value <= e.upper);
        assert!(e.stderr > 0.0);
        assert_eq!((e.n_min, e.n_max), (1, 6));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn entropy_bounds_and_refinement(base in 2u32..=5, dim in 1usize..=2, seed in any::<u64>()) {
            let depth = if dim == 1 { 4 } else { 2 };
            let t = random_tree(base, dim, depth, seed);
            let mut prev = 0.0;
            for m in 0..=depth {
                let h = shannon_entropy(&t, m).unwrap();
                let cap = (m as usize * dim) as f64 * (base as f64).ln();
                prop_assert!(h >= -1e-12 && h <= cap + 1e-12);
                prop_assert!(h >= prev - 1e-12);
                prev = h;
            }
        }

        #[test]
        fn smoothing_stays_near_partition_entropy(base in 2u32..=5, dim in 1usize..=2, seed in any::<u64>()) {
            let depth = if dim == 1 { 4 } else { 2 };
            let t = random_tree(base, dim, depth, seed);
            for m in 0..=depth {
                let f = smoothed_entropy(&t, (base as u64).pow(m)).unwrap();
                let h = shannon_entropy(&t, m).unwrap();
                prop_assert!((f - h).abs() <= dim as f64 * 9f64.ln());
            }
        }

        #[test]
        fn entropy_is_concave(base in 2u32..=4, seed in any::<u64>(), w in 0.0f64..=1.0) {
            let a = random_tree(base, 1, 3, seed);
            let b = random_tree(base, 1, 3, seed ^ 0x5555);
            let leaves = a.leaves().iter().map(|(k, m)| (*k, w * m))
                .chain(b.leaves().iter().map(|(k, m)| (*k, (1.0 - w) * m)));
            let mix = TreeMeasure::from_leaves(base, 3, Window::unit(1), leaves).unwrap();
            for m in 0..=3 {
                let lhs = shannon_entropy(&mix, m).unwrap();
                let rhs = w * shannon_entropy(&a, m).unwrap() + (1.0 - w) * shannon_entropy(&b, m).unwrap();
                prop_assert!(lhs >= rhs - 1e-10);
            }
        }

        #[test]
        fn entropy_adds_over_products(base in 2u32..=4, seed in any::<u64>()) {
            let a = random_tree(base, 1, 3, seed);
            let b = random_tree(base, 1, 3, seed.wrapping_add(1));
            let mut leaves = Vec::new();
            for (ka, ma) in a.leaves() {
                for (kb, mb) in b.leaves() {
                    leaves.push(([ka[0], kb[0], 0], ma * mb));
                }
            }
            let prod = TreeMeasure::from_leaves(base, 3, Window::unit(2), leaves).unwrap();
            for m in 0..=3 {
                let sum = shannon_entropy(&a, m).unwrap() + shannon_entropy(&b, m).unwrap();
                prop_assert!((shannon_entropy(&prod, m).unwrap() - sum).abs() < 1e-10);
            }
        }
    }
}
