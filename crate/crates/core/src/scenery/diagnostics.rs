//! Scores that support (never prove) the defining properties of fractal
//! and CP distributions.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::cell::{Key, Window};
use crate::error::{Error, Result};
use crate::ops::{diffuse, oversample_levels, translate_rescale_tree};
use crate::point::Point;
use crate::rng::stream;
use crate::scenery::ensemble::{distribution_distance, EmpiricalDistribution, MetricSpec};
use crate::scenery::flow::{prefix_len, scenery_distribution};
use crate::scenery::pointed::PointedEnsemble;
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

/// `d(S_t^□ P, P)` with `S_t^□` zooming every atom at the window centre.
/// Both sides are compared on the grid `⌈t / log b⌉` levels coarser than `P`.
pub fn invariance_diagnostic(p: &EmpiricalDistribution, t: f64, spec: &MetricSpec) -> Result<f64> {
    if !p.window().is_unit() {
        return Err(Error::Structural("atoms must live on B_1".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("t = {t} must be nonnegative")));
    }
    let lnb = (p.base() as f64).ln();
    let shrink = (t / lnb - 1e-9).ceil().max(0.0) as u32;
    let out = p
        .depth()
        .checked_sub(shrink)
        .filter(|&o| o >= 1)
        .ok_or(Error::Resolution {
            what: format!("atoms too shallow for t = {t}"),
            required: shrink + 1,
        })?;
    let centre = vec![0.0; p.dim()];
    let zoomed: Vec<TreeMeasure> = p
        .atoms()
        .par_iter()
        .map(|(_, a)| translate_rescale_tree(a, &centre, t, out))
        .collect::<Result<_>>()?;
    let coarse: Vec<TreeMeasure> = p
        .atoms()
        .iter()
        .map(|(_, a)| a.coarsen(out))
        .collect::<Result<_>>()?;
    let weights = p.atoms().iter().map(|(w, _)| *w);
    let lhs = EmpiricalDistribution::new(weights.clone().zip(zoomed).collect())?;
    let rhs = EmpiricalDistribution::new(weights.zip(coarse).collect())?;
    distribution_distance(&lhs, &rhs, spec)
}

/// `max_D |E_Q[θ(D)] − Q(x ∈ D)|` over depth-`m` cells. Points short of `m`
/// digits are extended with stream `i` of seed 0 for atom `i`.
pub fn adaptedness_diagnostic(q: &PointedEnsemble, m: u32) -> Result<f64> {
    let expected = q.measures(m)?.expected_masses(m)?;
    let keys: Vec<Key> = q
        .atoms()
        .par_iter()
        .enumerate()
        .map(|(i, (_, a))| {
            let mut a = a.clone();
            a.extend_point(m, &mut stream(0, i as u64))?;
            a.point().cell(m).key()
        })
        .collect::<Result<_>>()?;
    let mut freq: BTreeMap<Key, f64> = BTreeMap::new();
    for ((w, _), k) in q.atoms().iter().zip(keys) {
        *freq.entry(k).or_insert(0.0) += w;
    }
    let mut worst: f64 = 0.0;
    for (k, e) in &expected {
        worst = worst.max((e - freq.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, f) in &freq {
        if !expected.contains_key(k) {
            worst = worst.max(*f);
        }
    }
    Ok(worst)
}

/// `d(P, ∫⟨μ⟩_U dP(μ))` for `P` a weighted family of sources, compared on
/// a depth-`out_depth` grid. A similarity score: mutual absolute continuity
/// cannot be certified from samples. Atom `i` is diffused with seed
/// `seed + i`.
pub fn quasi_palm_diagnostic(
    p: &[(f64, MeasureSource)],
    u: &Window,
    n_samples: usize,
    out_depth: u32,
    spec: &MetricSpec,
    seed: u64,
) -> Result<f64> {
    let mut reference = Vec::with_capacity(p.len());
    let mut diffused = Vec::with_capacity(p.len());
    for (i, (w, src)) in p.iter().enumerate() {
        reference.push((*w, src.refine(out_depth)?));
        diffused.push((
            *w,
            diffuse(src, u, n_samples, out_depth, seed.wrapping_add(i as u64))?,
        ));
    }
    let reference = EmpiricalDistribution::new(reference)?;
    let parts: Vec<(f64, &EmpiricalDistribution)> = diffused.iter().map(|(w, d)| (*w, d)).collect();
    let diffused = EmpiricalDistribution::mixture(&parts)?;
    distribution_distance(&reference, &diffused, spec)
}

/// Distances between scenery distributions across sampled points and
/// across horizons.
#[derive(Debug, Clone)]
pub struct UsmReport {
    pub horizons: Vec<f64>,
    pub t_step: f64,
    pub out_depth: u32,
    pub metric: MetricSpec,
    /// Largest pairwise distance between points, per horizon.
    pub cross_point: Vec<f64>,
    /// Largest distance between consecutive horizons over points; the first
    /// entry is 0.
    pub cross_horizon: Vec<f64>,
    /// `⟨μ⟩_{x_i, T_j}` indexed `[i][j]`.
    pub distributions: Vec<Vec<EmpiricalDistribution>>,
}

/// Samples `x_count` points (stream `i` of `seed` for point `i`) and
/// compares their scenery distributions at each horizon.
pub fn usm_convergence_report(
    source: &MeasureSource,
    x_count: usize,
    horizons: &[f64],
    t_step: f64,
    out_depth: u32,
    spec: &MetricSpec,
    seed: u64,
) -> Result<UsmReport> {
    if x_count == 0 || horizons.is_empty() {
        return Err(Error::Parameter(
            "need at least one point and one horizon".into(),
        ));
    }
    if horizons.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("horizons must increase".into()));
    }
    let t_max = *horizons.last().expect("nonempty");
    let lnb = (source.base() as f64).ln();
    let depth = (t_max / lnb).ceil() as u32
        + out_depth
        + oversample_levels(source.base(), source.dim())
        + 4;
    let points: Vec<Point> = (0..x_count)
        .map(|i| source.sample_point(depth, &mut stream(seed, i as u64)))
        .collect::<Result<_>>()?;
    let mut distributions = Vec::with_capacity(x_count);
    for x in &points {
        let full = scenery_distribution(source, x, t_max, t_step, out_depth)?;
        let per: Vec<EmpiricalDistribution> = horizons
            .iter()
            .map(|&h| full.prefix(prefix_len(h, t_step)))
            .collect::<Result<_>>()?;
        distributions.push(per);
    }
    let mut cross_point = vec![0.0f64; horizons.len()];
    let mut cross_horizon = vec![0.0f64; horizons.len()];
    for j in 0..horizons.len() {
        for a in 0..x_count {
            for b in a + 1..x_count {
                let d = distribution_distance(&distributions[a][j], &distributions[b][j], spec)?;
                cross_point[j] = cross_point[j].max(d);
            }
            if j > 0 {
                let d =
                    distribution_distance(&distributions[a][j - 1], &distributions[a][j], spec)?;
                cross_horizon[j] = cross_horizon[j].max(d);
            }
        }
    }
    Ok(UsmReport {
        horizons: horizons.to_vec(),
        t_step,
        out_depth,
        metric: *spec,
        cross_point,
        cross_horizon,
        distributions,
    })
}

/// Closest point of the segment `conv(P_1, P_2)` on a λ-grid of step 0.01.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    /// Weight of `P_1`.
    pub lambda: f64,
    pub distance: f64,
}

pub fn band_check(
    p: &EmpiricalDistribution,
    p1: &EmpiricalDistribution,
    p2: &EmpiricalDistribution,
    spec: &MetricSpec,
) -> Result<Band> {
    let mut best = Band {
        lambda: 0.0,
        distance: f64::INFINITY,
    };
    for i in 0..=100 {
        let lambda = i as f64 / 100.0;
        let mix = EmpiricalDistribution::mixture(&[(lambda, p1), (1.0 - lambda, p2)])?;
        let d = distribution_distance(p, &mix, spec)?;
        if d < best.distance {
            best = Band {
                lambda,
                distance: d,
            };
        }
    }
    Ok(best)
}
