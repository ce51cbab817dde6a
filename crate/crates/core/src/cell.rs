//! b-adic cells, cubical windows and leaf-uniform re-binning onto grids.
//!
//! The partition of `[-1,1)` into `b` cells of side `2/b` is refined
//! `depth` times. A cell at depth `n` is addressed either by its per-axis
//! digit sequences ([`CellIndex`], any depth) or by a packed per-axis integer
//! index ([`Key`], used inside trees where `b^n` stays below 2^53).

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// Packed per-axis integer coordinates of a cell at a fixed depth. Unused
/// axes are zero.
pub type Key = [u64; MAX_DIM];

/// Largest cell count per axis, so that indices convert to `f64` exactly.
pub const MAX_CELLS_PER_AXIS: u64 = 1 << 53;

/// Tolerance, in cell units, for snapping box edges onto grid lines.
const SNAP_TOL: f64 = 1e-9;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Parameter(format!(
            "dimension {dim} unsupported (1..={MAX_DIM})"
        )));
    }
    Ok(())
}

pub(crate) fn check_base(base: u32) -> Result<()> {
    if base < 2 || base > u16::MAX as u32 {
        return Err(Error::Parameter(format!("base {base} unsupported")));
    }
    Ok(())
}

/// `b^n` as a cell count, failing when it exceeds [`MAX_CELLS_PER_AXIS`].
pub fn cells_per_axis(base: u32, depth: u32) -> Result<u64> {
    let mut n: u64 = 1;
    for _ in 0..depth {
        n = n
            .checked_mul(base as u64)
            .filter(|&v| v <= MAX_CELLS_PER_AXIS)
            .ok_or_else(|| Error::Resolution {
                what: format!("base {base} grid too fine for packed keys"),
                required: depth,
            })?;
    }
    Ok(n)
}

/// Axis-aligned cube `center ± half`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Window {
    pub center: Vec<f64>,
    pub half: f64,
}

impl Window {
    pub fn new(center: Vec<f64>, half: f64) -> Result<Self> {
        check_dim(center.len())?;
        if !(half > 0.0 && half.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter(format!("invalid window half-side {half}")));
        }
        Ok(Self { center, half })
    }

    /// `B_1 = [-1,1]^d`.
    pub fn unit(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            half: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn is_unit(&self) -> bool {
        self.half == 1.0 && self.center.iter().all(|&c| c == 0.0)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - self.half
    }

    /// Ambient box of the cell `key` at `depth`.
    pub fn cell_box(&self, base: u32, depth: u32, key: &Key) -> (Vec<f64>, Vec<f64>) {
        let n = (base as f64).powi(depth as i32);
        let side = 2.0 * self.half / n;
        let lo: Vec<f64> = (0..self.dim())
            .map(|a| self.lower(a) + side * key[a] as f64)
            .collect();
        let hi = lo.iter().map(|l| l + side).collect();
        (lo, hi)
    }

    /// Cell side at `depth`.
    pub fn cell_side(&self, base: u32, depth: u32) -> f64 {
        2.0 * self.half / (base as f64).powi(depth as i32)
    }
}

/// A regular grid of `b^depth` cells per axis over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub base: u32,
    pub depth: u32,
    pub window: Window,
    cells: u64,
}

impl Grid {
    pub fn new(base: u32, depth: u32, window: Window) -> Result<Self> {
        check_base(base)?;
        let cells = cells_per_axis(base, depth)?;
        Ok(Self {
            base,
            depth,
            window,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn cells(&self) -> u64 {
        self.cells
    }

    /// Grid coordinate (in cell units) of an ambient coordinate.
    fn units(&self, axis: usize, x: f64) -> f64 {
        (x - self.window.lower(axis)) / (2.0 * self.window.half) * self.cells as f64
    }

    /// Cell containing `x`, half-open convention; the closed upper face of
    /// the window is folded into the last cell.
    pub fn locate(&self, x: &[f64]) -> Option<Key> {
        let mut key = [0u64; MAX_DIM];
        for (a, &xa) in x.iter().enumerate().take(self.dim()) {
            let u = snap(self.units(a, xa));
            if u < 0.0 || u > self.cells as f64 {
                return None;
            }
            key[a] = (u.floor() as u64).min(self.cells - 1);
        }
        Some(key)
    }

    /// Spreads a box uniformly over the grid cells it overlaps and reports
    /// each `(cell, fraction)` pair. Degenerate axes are treated as points.
    /// Returns the fraction of the box that landed inside the window.
    pub fn spread_box(&self, lo: &[f64], hi: &[f64], mut sink: impl FnMut(Key, f64)) -> f64 {
        let d = self.dim();
        let mut per_axis: [Vec<(u64, f64)>; MAX_DIM] = Default::default();
        for a in 0..d {
            let ul = snap(self.units(a, lo[a]));
            let uh = snap(self.units(a, hi[a]));
            let n = self.cells as f64;
            let w = uh - ul;
            if w <= 1e-12 {
                if ul >= 0.0 && ul <= n {
                    per_axis[a].push(((ul.floor() as u64).min(self.cells - 1), 1.0));
                }
            } else {
                let start = ul.max(0.0).floor();
                let end = uh.min(n).ceil();
                let mut i = start;
                while i < end {
                    let ov = uh.min(i + 1.0) - ul.max(i);
                    if ov > 0.0 {
                        per_axis[a].push((i as u64, ov / w));
                    }
                    i += 1.0;
                }
            }
            if per_axis[a].is_empty() {
                return 0.0;
            }
        }
        let mut inside = 0.0;
        let mut key = [0u64; MAX_DIM];
        product_rec(&per_axis[..d], 0, &mut key, 1.0, &mut |k, f| {
            inside += f;
            sink(k, f)
        });
        inside
    }
}

fn product_rec(
    lists: &[Vec<(u64, f64)>],
    axis: usize,
    key: &mut Key,
    acc: f64,
    sink: &mut impl FnMut(Key, f64),
) {
    if axis == lists.len() {
        sink(*key, acc);
        return;
    }
    for &(i, f) in &lists[axis] {
        key[axis] = i;
        product_rec(lists, axis + 1, key, acc * f, sink);
    }
}

fn snap(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() < SNAP_TOL {
        r
    } else {
        u
    }
}

/// A b-adic cell of any depth, addressed by per-axis digit sequences.
///
/// `offset` selects which translate `B_1 + 2·offset` of the unit window the
/// digits refer to, so neighbours of boundary cells are addressable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellIndex {
    base: u32,
    offset: Vec<i64>,
    digits: Vec<Vec<u16>>,
}

impl CellIndex {
    pub fn root(base: u32, dim: usize) -> Self {
        Self {
            base,
            offset: vec![0; dim],
            digits: vec![Vec::new(); dim],
        }
    }

    /// Builds a cell from per-axis digit sequences of equal length.
    pub fn from_digits(base: u32, digits: Vec<Vec<u16>>) -> Result<Self> {
        check_base(base)?;
        check_dim(digits.len())?;
        let len = digits[0].len();
        if digits.iter().any(|d| d.len() != len) {
            return Err(Error::Structural("axes have unequal digit lengths".into()));
        }
        if digits.iter().flatten().any(|&d| d as u32 >= base) {
            return Err(Error::Parameter(format!(
                "digit out of range for base {base}"
            )));
        }
        Ok(Self {
            base,
            offset: vec![0; digits.len()],
            digits,
        })
    }

    /// Cell at `depth` with packed per-axis index `key` inside `B_1`.
    pub fn from_key(base: u32, dim: usize, depth: u32, key: &Key) -> Self {
        let mut c = Self::root(base, dim);
        for a in 0..dim {
            let mut v = key[a];
            let mut ds = vec![0u16; depth as usize];
            for slot in ds.iter_mut().rev() {
                *slot = (v % base as u64) as u16;
                v /= base as u64;
            }
            c.digits[a] = ds;
        }
        c
    }

    /// Cell in the translate `B_1 + 2·offset`.
    pub fn from_parts(base: u32, offset: Vec<i64>, digits: Vec<Vec<u16>>) -> Result<Self> {
        let mut c = Self::from_digits(base, digits)?;
        if offset.len() != c.dim() {
            return Err(Error::Structural("offset dimension mismatch".into()));
        }
        c.offset = offset;
        Ok(c)
    }

    /// The cell's projection onto the listed axes.
    pub fn axes(&self, axes: &[usize]) -> Self {
        Self {
            base: self.base,
            offset: axes.iter().map(|&a| self.offset[a]).collect(),
            digits: axes.iter().map(|&a| self.digits[a].clone()).collect(),
        }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.digits.len()
    }

    pub fn depth(&self) -> u32 {
        self.digits[0].len() as u32
    }

    pub fn offset(&self) -> &[i64] {
        &self.offset
    }

    pub fn digits(&self) -> &[Vec<u16>] {
        &self.digits
    }

    /// True when the cell lies in `B_1` itself.
    pub fn in_unit_window(&self) -> bool {
        self.offset.iter().all(|&o| o == 0)
    }

    pub fn push(&mut self, tuple: &[u16]) {
        for (a, &t) in tuple.iter().enumerate() {
            self.digits[a].push(t);
        }
    }

    pub fn pop(&mut self) {
        for d in &mut self.digits {
            d.pop();
        }
    }

    pub fn child(&self, tuple: &[u16]) -> Self {
        let mut c = self.clone();
        c.push(tuple);
        c
    }

    pub fn ancestor(&self, depth: u32) -> Self {
        let mut c = self.clone();
        for d in &mut c.digits {
            d.truncate(depth as usize);
        }
        c
    }

    /// Digit tuple at `level` (0-based).
    pub fn tuple_at(&self, level: usize) -> Vec<u16> {
        self.digits.iter().map(|d| d[level]).collect()
    }

    /// Packed key of this cell inside `B_1` (requires `in_unit_window`).
    pub fn key(&self) -> Result<Key> {
        self.local_key(0)
    }

    /// Index of this cell inside its ancestor at `from` depth.
    pub fn local_key(&self, from: u32) -> Result<Key> {
        let levels = self.depth() - from;
        cells_per_axis(self.base, levels)?;
        let mut key = [0u64; MAX_DIM];
        for (a, ds) in self.digits.iter().enumerate() {
            key[a] = ds[from as usize..]
                .iter()
                .fold(0u64, |acc, &d| acc * self.base as u64 + d as u64);
        }
        Ok(key)
    }

    /// Descendant `levels` deeper with local index `key`.
    pub fn descendant(&self, levels: u32, key: &Key) -> Self {
        let sub = Self::from_key(self.base, self.dim(), levels, key);
        let mut c = self.clone();
        for a in 0..self.dim() {
            c.digits[a].extend_from_slice(&sub.digits[a]);
        }
        c
    }

    /// True when `self` is `other` or lies inside it.
    pub fn is_within(&self, other: &CellIndex) -> bool {
        self.offset == other.offset
            && self.depth() >= other.depth()
            && self
                .digits
                .iter()
                .zip(&other.digits)
                .all(|(s, o)| s[..o.len()] == o[..])
    }

    /// Same-depth cell displaced by `delta` cells per axis, carrying into the
    /// window offset when it leaves `B_1`.
    pub fn neighbor(&self, delta: &[i64]) -> Self {
        let mut c = self.clone();
        let b = self.base as i64;
        for a in 0..self.dim() {
            let mut carry = delta[a];
            for d in c.digits[a].iter_mut().rev() {
                if carry == 0 {
                    break;
                }
                let v = *d as i64 + carry;
                *d = v.rem_euclid(b) as u16;
                carry = v.div_euclid(b);
            }
            c.offset[a] += carry;
        }
        c
    }

    /// Ambient lower corner and side length.
    pub fn ambient_box(&self) -> (Vec<f64>, f64) {
        let b = self.base as f64;
        let lo = (0..self.dim())
            .map(|a| {
                let mut scale = 2.0;
                let mut x = -1.0 + 2.0 * self.offset[a] as f64;
                for &d in &self.digits[a] {
                    scale /= b;
                    x += scale * d as f64;
                }
                x
            })
            .collect();
        (lo, 2.0 / b.powi(self.depth() as i32))
    }
}

/// Enumerates the `b^d` child digit tuples in the canonical order
/// (axis 0 varies fastest).
pub fn child_tuples(base: u32, dim: usize) -> Vec<Vec<u16>> {
    let count = (base as usize).pow(dim as u32);
    (0..count)
        .map(|mut i| {
            (0..dim)
                .map(|_| {
                    let d = (i % base as usize) as u16;
                    i /= base as usize;
                    d
                })
                .collect()
        })
        .collect()
}
