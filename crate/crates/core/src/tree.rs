//! Finite b-adic discretizations of measures on cubical windows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cell::{cells_per_axis, check_base, check_dim, CellIndex, Grid, Key, Window, MAX_DIM};
use crate::error::{Error, Result};

/// Normalization applied after an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// No normalization.
    Plain,
    /// Scale so the mass of `B_1` is one, keep mass outside.
    Star,
    /// Scale so the mass of `B_1` is one and drop mass outside.
    Box,
}

/// Sparse leaf masses of a measure at a fixed depth of the b-adic grid over
/// a window. Zero-mass cells are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMeasure {
    base: u32,
    depth: u32,
    window: Window,
    leaves: BTreeMap<Key, f64>,
}

impl TreeMeasure {
    /// Builds a tree from `(cell, mass)` pairs, summing duplicates.
    pub fn from_leaves(
        base: u32,
        depth: u32,
        window: Window,
        leaves: impl IntoIterator<Item = (Key, f64)>,
    ) -> Result<Self> {
        check_base(base)?;
        check_dim(window.dim())?;
        let n = cells_per_axis(base, depth)?;
        let dim = window.dim();
        let mut map = BTreeMap::new();
        for (k, m) in leaves {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::Parameter(format!("invalid leaf mass {m}")));
            }
            if k[..dim].iter().any(|&c| c >= n) || k[dim..].iter().any(|&c| c != 0) {
                return Err(Error::Structural(format!("leaf key {k:?} outside grid")));
            }
            if m > 0.0 {
                *map.entry(k).or_insert(0.0) += m;
            }
        }
        Ok(Self {
            base,
            depth,
            window,
            leaves: map,
        })
    }

    pub(crate) fn from_map_unchecked(
        base: u32,
        depth: u32,
        window: Window,
        mut leaves: BTreeMap<Key, f64>,
    ) -> Self {
        leaves.retain(|_, m| *m > 0.0);
        Self {
            base,
            depth,
            window,
            leaves,
        }
    }

    /// A unit atom in the cell containing `x`.
    pub fn atom(base: u32, depth: u32, window: Window, x: &[f64]) -> Result<Self> {
        let grid = Grid::new(base, depth, window.clone())?;
        let key = grid
            .locate(x)
            .ok_or_else(|| Error::Parameter("atom outside window".into()))?;
        Self::from_leaves(base, depth, window, [(key, 1.0)])
    }

    /// Uniform mass on every cell of the window, total one.
    pub fn uniform(base: u32, dim: usize, depth: u32) -> Result<Self> {
        let n = cells_per_axis(base, depth)?;
        let count = n
            .checked_pow(dim as u32)
            .filter(|&c| c <= 1 << 24)
            .ok_or_else(|| Error::Resolution {
                what: "uniform tree too large".into(),
                required: depth,
            })?;
        let m = 1.0 / count as f64;
        let leaves = (0..count).map(|mut i| {
            let mut k = [0u64; MAX_DIM];
            for slot in k.iter_mut().take(dim) {
                *slot = i % n;
                i /= n;
            }
            (k, m)
        });
        Self::from_leaves(base, depth, Window::unit(dim), leaves)
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.base, self.depth, self.window.clone()).expect("validated at construction")
    }

    pub fn leaves(&self) -> &BTreeMap<Key, f64> {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Sum of leaf masses in key order.
    pub fn total(&self) -> f64 {
        self.leaves.values().sum()
    }

    pub fn leaf_side(&self) -> f64 {
        self.window.cell_side(self.base, self.depth)
    }

    /// True when both trees live on the same grid.
    pub fn same_grid(&self, other: &TreeMeasure) -> bool {
        self.base == other.base && self.depth == other.depth && self.window == other.window
    }

    fn check_cell(&self, c: &CellIndex) -> Result<()> {
        if c.base() != self.base || c.dim() != self.dim() {
            return Err(Error::Structural(format!(
                "cell (base {}, dim {}) does not match tree (base {}, dim {})",
                c.base(),
                c.dim(),
                self.base,
                self.dim()
            )));
        }
        if c.depth() > self.depth {
            return Err(Error::Structural(format!(
                "cell depth {} exceeds tree depth {}",
                c.depth(),
                self.depth
            )));
        }
        Ok(())
    }

    /// Leaves inside `cell`, in key order.
    pub fn leaves_in<'a>(
        &'a self,
        cell: &CellIndex,
    ) -> Result<impl Iterator<Item = (&'a Key, &'a f64)> + 'a> {
        self.check_cell(cell)?;
        let dim = self.dim();
        let valid = cell.in_unit_window();
        let ck = if valid { cell.key()? } else { [0; MAX_DIM] };
        let f = cells_per_axis(self.base, self.depth - cell.depth())?;
        let lo = [ck[0] * f, 0, 0];
        let hi = [(ck[0] + 1) * f, 0, 0];
        Ok(self
            .leaves
            .range(lo..hi)
            .filter(move |(k, _)| valid && (1..dim).all(|a| k[a] / f == ck[a])))
    }

    /// Exact mass of a cell of depth at most the tree depth.
    pub fn cell_mass(&self, cell: &CellIndex) -> Result<f64> {
        Ok(self.leaves_in(cell)?.map(|(_, m)| m).sum())
    }

    /// Masses of all depth-`m` cells (coarsening by summation).
    pub fn masses_at(&self, m: u32) -> Result<BTreeMap<Key, f64>> {
        if m > self.depth {
            return Err(Error::Structural(format!(
                "depth {m} exceeds tree depth {}",
                self.depth
            )));
        }
        let f = cells_per_axis(self.base, self.depth - m)?;
        let mut out = BTreeMap::new();
        for (k, &v) in &self.leaves {
            let mut pk = *k;
            for c in pk.iter_mut() {
                *c /= f;
            }
            *out.entry(pk).or_insert(0.0) += v;
        }
        Ok(out)
    }

    pub fn coarsen(&self, m: u32) -> Result<TreeMeasure> {
        Ok(Self::from_map_unchecked(
            self.base,
            m,
            self.window.clone(),
            self.masses_at(m)?,
        ))
    }

    pub fn scaled(&self, factor: f64) -> TreeMeasure {
        let leaves = self.leaves.iter().map(|(k, v)| (*k, v * factor)).collect();
        Self::from_map_unchecked(self.base, self.depth, self.window.clone(), leaves)
    }

    /// Mass on `B_1`, splitting straddling leaves by overlap volume.
    pub fn unit_ball_mass(&self) -> f64 {
        if self.window.is_unit() {
            return self.total();
        }
        self.unit_parts().map(|(_, m)| m).sum()
    }

    fn unit_parts(&self) -> impl Iterator<Item = (Key, f64)> + '_ {
        let d = self.dim();
        self.leaves.iter().filter_map(move |(k, &m)| {
            let (lo, hi) = self.window.cell_box(self.base, self.depth, k);
            let mut frac = 1.0;
            for a in 0..d {
                let ov = hi[a].min(1.0) - lo[a].max(-1.0);
                if ov <= 0.0 {
                    return None;
                }
                frac *= (ov / (hi[a] - lo[a])).min(1.0);
            }
            Some((*k, m * frac))
        })
    }

    /// `μ*` (scale by `1/μ(B_1)`) or `μ^□` (additionally restrict to `B_1`).
    pub fn normalize(&self, mode: Norm) -> Result<TreeMeasure> {
        let mass = self.unit_ball_mass();
        if !(mass > 0.0) {
            return Err(Error::Normalization("μ(B_1) = 0".into()));
        }
        match mode {
            Norm::Plain => Ok(self.clone()),
            Norm::Star => Ok(self.scaled(1.0 / mass)),
            Norm::Box => {
                if self.window.is_unit() {
                    return Ok(self.scaled(1.0 / mass));
                }
                let leaves = self.unit_parts().map(|(k, m)| (k, m / mass)).collect();
                Ok(Self::from_map_unchecked(
                    self.base,
                    self.depth,
                    self.window.clone(),
                    leaves,
                ))
            }
        }
    }

    /// `μ_A`: restriction to a union of cells, renormalized to total one.
    pub fn restrict_conditional(&self, cells: &[CellIndex]) -> Result<TreeMeasure> {
        let mut kept = BTreeMap::new();
        for c in cells {
            for (k, &m) in self.leaves_in(c)? {
                kept.insert(*k, m);
            }
        }
        let mass: f64 = kept.values().sum();
        if !(mass > 0.0) {
            return Err(Error::Conditioning("μ(A) = 0".into()));
        }
        for v in kept.values_mut() {
            *v /= mass;
        }
        Ok(Self::from_map_unchecked(
            self.base,
            self.depth,
            self.window.clone(),
            kept,
        ))
    }

    /// `T_D μ` restricted to `D`: the leaves of `cell` re-keyed onto the
    /// unit window at the remaining depth, masses unchanged.
    pub fn subtree(&self, cell: &CellIndex) -> Result<TreeMeasure> {
        let f = cells_per_axis(self.base, self.depth - cell.depth())?;
        let leaves: BTreeMap<Key, f64> = self
            .leaves_in(cell)?
            .map(|(k, &m)| {
                let mut lk = *k;
                for c in lk.iter_mut() {
                    *c %= f;
                }
                (lk, m)
            })
            .collect();
        Ok(Self::from_map_unchecked(
            self.base,
            self.depth - cell.depth(),
            Window::unit(self.dim()),
            leaves,
        ))
    }

    /// Reads a base-`b` tree of depth `n·k` as a base-`b^n` tree of depth
    /// `k`; leaf keys are unchanged.
    pub fn regroup(&self, n: u32) -> Result<TreeMeasure> {
        if n == 0 || self.depth % n != 0 {
            return Err(Error::Structural(format!(
                "depth {} not divisible by {n}",
                self.depth
            )));
        }
        let base = self
            .base
            .checked_pow(n)
            .filter(|&b| b <= u16::MAX as u32)
            .ok_or_else(|| Error::Parameter("regrouped base too large".into()))?;
        Ok(Self::from_map_unchecked(
            base,
            self.depth / n,
            self.window.clone(),
            self.leaves.clone(),
        ))
    }

    /// Largest relative difference of leaf masses against `other` (same grid).
    pub fn max_leaf_diff(&self, other: &TreeMeasure) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::Structural("trees on different grids".into()));
        }
        let mut worst: f64 = 0.0;
        for (k, &a) in &self.leaves {
            let b = other.leaves.get(k).copied().unwrap_or(0.0);
            worst = worst.max((a - b).abs());
        }
        for (k, &b) in &other.leaves {
            if !self.leaves.contains_key(k) {
                worst = worst.max(b);
            }
        }
        Ok(worst)
    }

    /// Columnar text export: one row per leaf with per-axis digit strings
    /// and the mass.
    pub fn to_columnar(&self) -> String {
        let d = self.dim();
        let mut s = String::new();
        let _ = writeln!(s, "# zoomlab tree v1");
        let _ = writeln!(s, "# base={} dim={} depth={}", self.base, d, self.depth);
        let center: Vec<String> = self
            .window
            .center
            .iter()
            .map(|c| format!("{c:e}"))
            .collect();
        let _ = writeln!(
            s,
            "# window_center={} window_half={:e}",
            center.join(";"),
            self.window.half
        );
        let cols: Vec<String> = (0..d).map(|a| format!("digits_{a}")).collect();
        let _ = writeln!(s, "{},mass", cols.join(","));
        for (k, m) in &self.leaves {
            let cell = CellIndex::from_key(self.base, d, self.depth, k);
            let ds: Vec<String> = cell
                .digits()
                .iter()
                .map(|ax| {
                    ax.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join("-")
                })
                .collect();
            let _ = writeln!(s, "{},{m:e}", ds.join(","));
        }
        s
    }

    pub fn from_columnar(text: &str) -> Result<TreeMeasure> {
        let mut base = None;
        let mut dim = None;
        let mut depth = None;
        let mut center = None;
        let mut half = None;
        let mut rows = Vec::new();
        let mut header_seen = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    if let Some((k, v)) = tok.split_once('=') {
                        let bad = || Error::Parse(format!("bad header field {tok}"));
                        match k {
                            "base" => base = Some(v.parse::<u32>().map_err(|_| bad())?),
                            "dim" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
                            "depth" => depth = Some(v.parse::<u32>().map_err(|_| bad())?),
                            "window_center" => {
                                center = Some(
                                    v.split(';')
                                        .map(|c| c.parse::<f64>())
                                        .collect::<std::result::Result<Vec<_>, _>>()
                                        .map_err(|_| bad())?,
                                )
                            }
                            "window_half" => half = Some(v.parse::<f64>().map_err(|_| bad())?),
                            _ => {}
                        }
                    }
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            rows.push(line.to_string());
        }
        let missing = |f: &str| Error::Parse(format!("missing header field {f}"));
        let base = base.ok_or_else(|| missing("base"))?;
        let dim = dim.ok_or_else(|| missing("dim"))?;
        let depth = depth.ok_or_else(|| missing("depth"))?;
        let window = Window::new(
            center.ok_or_else(|| missing("window_center"))?,
            half.ok_or_else(|| missing("window_half"))?,
        )?;
        if window.dim() != dim {
            return Err(Error::Parse("window dimension mismatch".into()));
        }
        let mut leaves = Vec::with_capacity(rows.len());
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!("bad row `{row}`")));
            }
            let digits = fields[..dim]
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Ok(Vec::new())
                    } else {
                        f.split('-').map(|d| d.parse::<u16>()).collect()
                    }
                })
                .collect::<std::result::Result<Vec<Vec<u16>>, _>>()
                .map_err(|_| Error::Parse(format!("bad digits in `{row}`")))?;
            let mass: f64 = fields[dim]
                .parse()
                .map_err(|_| Error::Parse(format!("bad mass in `{row}`")))?;
            let cell = CellIndex::from_digits(base, digits)?;
            if cell.depth() != depth {
                return Err(Error::Parse(format!("row depth mismatch in `{row}`")));
            }
            leaves.push((cell.key()?, mass));
        }
        Self::from_leaves(base, depth, window, leaves)
    }
}
