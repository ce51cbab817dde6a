//! A coded smooth-map counterexample on the two-map base-20 Cantor set
//! `C` (maps `x ↦ 0.3x` and `x ↦ 0.3x + 0.7`).
//!
//! Points of `C` are given by binary codes. The map `f(x, y) = x + θ(y)`
//! shifts `x` by `θ(y) = Σ_k c_k(y) · 0.35 · 0.3^{n_k − 1}`, where `c_k(y)`
//! is the `k`-th code symbol of `y`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cell::{Grid, Window};
use crate::constructions::ifs::{two_map_unit, Frame, Ifs, IfsSpec};
use crate::error::{Error, Result};
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

pub const RATIO: f64 = 0.3;
pub const RIGHT_OFFSET: f64 = 0.7;
const SHIFT: f64 = 0.35;
/// Slack of the covering intervals, relative to a level-`n` interval.
const COVER_SLACK: f64 = 1.1;
/// Largest `n_K` and `K` accepted by the exhaustive checks.
const MAX_BRUTE_N: u32 = 20;
const MAX_BRUTE_K: usize = 4;

/// Point of `C` with the given finite binary code.
pub fn cantor20_point(code: &[u8]) -> f64 {
    let mut scale = 1.0;
    let mut x = 0.0;
    for &c in code {
        if c != 0 {
            x += RIGHT_OFFSET * scale;
        }
        scale *= RATIO;
    }
    x
}

/// `log 2 / log(10/3)`, the dimension of `C`.
pub fn cantor20_dimension() -> f64 {
    2f64.ln() / (1.0 / RATIO).ln()
}

/// The measure on `C` with equal weights, as a source on `[0,1] ⊂ B_1`.
pub fn cantor20_source(base: u32) -> Result<MeasureSource> {
    let spec = IfsSpec {
        frame: Frame::Ambient,
        ..two_map_unit(RATIO)
    };
    MeasureSource::self_similar(base, Ifs::new(&spec)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    /// Exponents `n_1 < … < n_K`.
    pub n: Vec<u32>,
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        Self { n: vec![2, 9] }
    }
}

/// One growth constraint: `sup_y Σ_{j>k} θ_j(y) < 0.3^{n_k − 1} / 40`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub k: usize,
    pub tail: f64,
    pub bound: f64,
}

impl Constraint {
    pub fn holds(&self) -> bool {
        self.tail < self.bound
    }
}

impl CounterexampleSpec {
    pub fn new(n: Vec<u32>) -> Result<Self> {
        if n.is_empty() || n[0] == 0 || n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!(
                "exponents {n:?} must be positive and increasing"
            )));
        }
        Ok(Self { n })
    }

    pub fn levels(&self) -> usize {
        self.n.len()
    }

    /// Size of the `k`-th shift, `0.35 · 0.3^{n_k − 1}` (`k` from 1).
    pub fn shift(&self, k: usize) -> f64 {
        SHIFT * RATIO.powi(self.n[k - 1] as i32 - 1)
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        (1..self.levels())
            .map(|k| Constraint {
                k,
                tail: (k + 1..=self.levels()).map(|j| self.shift(j)).sum(),
                bound: RATIO.powi(self.n[k - 1] as i32 - 1) / 40.0,
            })
            .collect()
    }

    /// Fails with the list of violated `k`.
    pub fn check(&self) -> Result<()> {
        let bad: Vec<usize> = self
            .constraints()
            .iter()
            .filter(|c| !c.holds())
            .map(|c| c.k)
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::ConstraintViolation(bad))
        }
    }

    /// `θ(y)` from the first `K` symbols of `y`'s code.
    pub fn theta(&self, y_code: &[u8]) -> f64 {
        (1..=self.levels())
            .map(|k| {
                if y_code.get(k - 1).copied().unwrap_or(0) != 0 {
                    self.shift(k)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Among increasing `K`-tuples with entries at most `max_n`, the first one
/// (smallest `n_K`, then lexicographically smallest) meeting the growth
/// constraints.
pub fn smallest_passing(levels: usize, max_n: u32) -> Option<CounterexampleSpec> {
    fn rec(prefix: &mut Vec<u32>, levels: usize, last: u32, out: &mut Option<CounterexampleSpec>) {
        if out.is_some() {
            return;
        }
        if prefix.len() + 1 == levels {
            prefix.push(last);
            let s = CounterexampleSpec { n: prefix.clone() };
            prefix.pop();
            if s.check().is_ok() {
                *out = Some(s);
            }
            return;
        }
        let lo = prefix.last().map_or(1, |v| v + 1);
        for v in lo..last {
            prefix.push(v);
            rec(prefix, levels, last, out);
            prefix.pop();
        }
    }
    for last in levels as u32..=max_n {
        let mut out = None;
        rec(&mut Vec::new(), levels, last, &mut out);
        if out.is_some() {
            return out;
        }
    }
    None
}

/// `f(x, y) = x + θ(y)` on codes truncated at `n_K` (for `x`) and `K`
/// (for `y`) symbols.
pub fn counterexample_f(spec: &CounterexampleSpec, x_code: &[u8], y_code: &[u8]) -> Result<f64> {
    spec.check()?;
    let nk = *spec.n.last().expect("nonempty") as usize;
    let x = cantor20_point(&x_code[..x_code.len().min(nk)]);
    Ok(x + spec.theta(&y_code[..y_code.len().min(spec.levels())]))
}

/// `f₀(C × C)` on truncated codes, `f₀(x, y) = (x + θ(y), y)`, with equal
/// weights, as a base-2 tree of the given depth on `[0, 1.2]^2`.
pub fn counterexample_image(spec: &CounterexampleSpec, depth: u32) -> Result<TreeMeasure> {
    spec.check()?;
    let nk = *spec.n.last().expect("nonempty");
    let k = spec.levels() as u32;
    if nk > MAX_BRUTE_N || k as usize > MAX_BRUTE_K {
        return Err(Error::Parameter(format!(
            "image limited to n_K ≤ {MAX_BRUTE_N}, K ≤ {MAX_BRUTE_K}"
        )));
    }
    let window = Window::new(vec![0.6, 0.6], 0.6)?;
    let grid = Grid::new(2, depth, window.clone())?;
    let w = 0.5f64.powi((nk + k) as i32);
    let mut leaves = Vec::with_capacity(1 << (nk + k));
    for x in 0..1u64 << nk {
        let xv = cantor20_point(&binary(x, nk));
        for y in 0..1u64 << k {
            let yc = binary(y, k);
            let p = [xv + spec.theta(&yc), cantor20_point(&yc)];
            let key = grid
                .locate(&p)
                .ok_or_else(|| Error::Structural("image point outside window".into()))?;
            leaves.push((key, w));
        }
    }
    TreeMeasure::from_leaves(2, depth, window, leaves)
}

fn binary(v: u64, len: u32) -> Vec<u8> {
    (0..len).map(|i| ((v >> (len - 1 - i)) & 1) as u8).collect()
}

/// Result of the exhaustive injectivity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injectivity {
    pub values: usize,
    pub distinct: bool,
    pub min_gap: f64,
    /// `0.3^{n_K − 1} / 40`.
    pub gap_bound: f64,
}

/// Evaluates `f` on all `2^{n_K} · 2^K` truncated coded pairs.
pub fn injectivity(spec: &CounterexampleSpec) -> Result<Injectivity> {
    spec.check()?;
    let nk = *spec.n.last().expect("nonempty");
    if nk > MAX_BRUTE_N || spec.levels() > MAX_BRUTE_K {
        return Err(Error::Parameter(format!(
            "exhaustive check limited to n_K ≤ {MAX_BRUTE_N}, K ≤ {MAX_BRUTE_K}"
        )));
    }
    let code = binary;
    let thetas: Vec<f64> = (0..1u64 << spec.levels())
        .map(|y| spec.theta(&code(y, spec.levels() as u32)))
        .collect();
    let mut values = Vec::with_capacity((1usize << nk) * thetas.len());
    for x in 0..1u64 << nk {
        let xv = cantor20_point(&code(x, nk));
        values.extend(thetas.iter().map(|t| xv + t));
    }
    values.sort_by(f64::total_cmp);
    let min_gap = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(Injectivity {
        values: values.len(),
        distinct: min_gap > 0.0,
        min_gap,
        gap_bound: RATIO.powi(nk as i32 - 1) / 40.0,
    })
}

/// Covering of `f(C × C)` at level `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cover {
    pub k: usize,
    pub count: f64,
    pub length: f64,
    /// `log count / −log length`.
    pub estimate: f64,
}

/// `2^k · 2^{n_k}` intervals of length `1.1 · 0.3^{n_k}`.
pub fn cover_count(spec: &CounterexampleSpec, k: usize) -> Result<Cover> {
    if k == 0 || k > spec.levels() {
        return Err(Error::Parameter(format!(
            "level {k} outside 1..={}",
            spec.levels()
        )));
    }
    let nk = spec.n[k - 1];
    let count = 2f64.powi((k as u32 + nk) as i32);
    let length = COVER_SLACK * RATIO.powi(nk as i32);
    Ok(Cover {
        k,
        count,
        length,
        estimate: count.ln() / -length.ln(),
    })
}

/// Cover estimates at the last level as `n_K` doubles `steps` times.
pub fn cover_trend(spec: &CounterexampleSpec, steps: usize) -> Result<Vec<(u32, f64)>> {
    let mut s = spec.clone();
    let k = s.levels();
    let mut out = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        out.push((s.n[k - 1], cover_count(&s, k)?.estimate));
        s.n[k - 1] *= 2;
    }
    Ok(out)
}

/// Everything the verifier checks, as structured text.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub spec: CounterexampleSpec,
    pub constraints: Vec<Constraint>,
    pub smallest_passing: Option<CounterexampleSpec>,
    pub injectivity: Injectivity,
    pub covers: Vec<Cover>,
    pub trend: Vec<(u32, f64)>,
}

pub fn counterexample_report(
    spec: &CounterexampleSpec,
    trend_steps: usize,
) -> Result<CounterexampleReport> {
    let covers = (1..=spec.levels())
        .map(|k| cover_count(spec, k))
        .collect::<Result<_>>()?;
    Ok(CounterexampleReport {
        spec: spec.clone(),
        constraints: spec.constraints(),
        smallest_passing: smallest_passing(spec.levels(), 24),
        injectivity: injectivity(spec)?,
        covers,
        trend: cover_trend(spec, trend_steps)?,
    })
}

impl CounterexampleReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[u32]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(s, "n = {}", join(&self.spec.n));
        for c in &self.constraints {
            let _ = writeln!(
                s,
                "constraint k={} tail={:.6e} bound={:.6e} holds={}",
                c.k,
                c.tail,
                c.bound,
                c.holds()
            );
        }
        match &self.smallest_passing {
            Some(p) => {
                let _ = writeln!(s, "smallest_passing = {}", join(&p.n));
            }
            None => {
                let _ = writeln!(s, "smallest_passing = none");
            }
        }
        let i = &self.injectivity;
        let _ = writeln!(
            s,
            "injectivity values={} distinct={} min_gap={:.6e} gap_bound={:.6e}",
            i.values, i.distinct, i.min_gap, i.gap_bound
        );
        for c in &self.covers {
            let _ = writeln!(
                s,
                "cover k={} count={:.0} length={:.6e} estimate={:.6}",
                c.k, c.count, c.length, c.estimate
            );
        }
        for (n, e) in &self.trend {
            let _ = writeln!(s, "trend n_K={n} estimate={e:.6}");
        }
        let _ = writeln!(s, "dim_C = {:.6}", cantor20_dimension());
        s
    }
}
