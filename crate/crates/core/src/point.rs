//! Points of `B_1` as per-axis base-`b` digit expansions.

use crate::cell::{check_base, check_dim, CellIndex};
use crate::error::{Error, Result};

/// A point given by its digit expansion to some finite depth, plus its
/// position inside the final cell in that cell's `[-1,1]^d` coordinates
/// (zero, the centre, unless known more precisely).
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    base: u32,
    digits: Vec<Vec<u16>>,
    tail: Vec<f64>,
}

impl Point {
    pub fn from_digits(base: u32, digits: Vec<Vec<u16>>) -> Result<Self> {
        let cell = CellIndex::from_digits(base, digits)?;
        let dim = cell.dim();
        Ok(Self {
            base,
            digits: cell.digits().to_vec(),
            tail: vec![0.0; dim],
        })
    }

    /// Replaces the in-cell position (each coordinate clamped to `[-1,1]`).
    pub fn with_tail(mut self, tail: Vec<f64>) -> Result<Self> {
        if tail.len() != self.dim() {
            return Err(Error::Parameter("tail dimension mismatch".into()));
        }
        self.tail = tail.into_iter().map(|t| t.clamp(-1.0, 1.0)).collect();
        Ok(self)
    }

    /// Expands ambient coordinates in `B_1` to `depth` digits, keeping the
    /// remainder as the in-cell position. The upper face is folded into the
    /// last cell.
    pub fn from_coords(x: &[f64], base: u32, depth: u32) -> Result<Self> {
        check_base(base)?;
        check_dim(x.len())?;
        for &xa in x {
            if !(-1.0..=1.0).contains(&xa) {
                return Err(Error::Parameter(format!("coordinate {xa} outside B_1")));
            }
        }
        let mut p = Self {
            base,
            digits: vec![Vec::new(); x.len()],
            tail: x.to_vec(),
        };
        p.expand_tail(depth);
        Ok(p)
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

    pub fn digits(&self) -> &[Vec<u16>] {
        &self.digits
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    /// Digit tuple at `level`.
    pub fn tuple_at(&self, level: usize) -> Vec<u16> {
        self.digits.iter().map(|d| d[level]).collect()
    }

    /// Appends a digit tuple; the in-cell position resets to the centre.
    pub fn push(&mut self, tuple: &[u16]) {
        for (a, &t) in tuple.iter().enumerate() {
            self.digits[a].push(t);
        }
        self.tail.iter_mut().for_each(|t| *t = 0.0);
    }

    /// Appends `n` digits read off the in-cell position.
    pub fn expand_tail(&mut self, n: u32) {
        let b = self.base as f64;
        for (ds, t) in self.digits.iter_mut().zip(self.tail.iter_mut()) {
            for _ in 0..n {
                let u = (*t + 1.0) / 2.0 * b;
                let d = (u.floor() as i64).clamp(0, self.base as i64 - 1);
                ds.push(d as u16);
                *t = (2.0 * (u - d as f64) - 1.0).clamp(-1.0, 1.0);
            }
        }
    }

    /// Cell of the point at `depth` (clamped to the available digits).
    pub fn cell(&self, depth: u32) -> CellIndex {
        let depth = depth.min(self.depth()) as usize;
        CellIndex::from_digits(
            self.base,
            self.digits.iter().map(|d| d[..depth].to_vec()).collect(),
        )
        .expect("digits validated at construction")
    }

    /// The point after dropping its first `n` digits, i.e. its image under
    /// the homothety taking its depth-`n` cell onto `B_1`.
    pub fn shifted(&self, n: u32) -> Self {
        let n = (n as usize).min(self.depth() as usize);
        Self {
            base: self.base,
            digits: self.digits.iter().map(|d| d[n..].to_vec()).collect(),
            tail: self.tail.clone(),
        }
    }

    /// The same point in base `b^n`: each run of `n` digits becomes one.
    /// Trailing digits that do not fill a run are dropped.
    pub fn regroup(&self, n: u32) -> Result<Self> {
        let nb = (self.base as u64)
            .checked_pow(n)
            .filter(|&v| n > 0 && v <= u16::MAX as u64);
        let nb =
            nb.ok_or_else(|| Error::Parameter(format!("base {}^{n} unsupported", self.base)))?;
        let runs = self.depth() as usize / n as usize;
        let digits = self
            .digits
            .iter()
            .map(|d| {
                (0..runs)
                    .map(|r| {
                        d[r * n as usize..(r + 1) * n as usize]
                            .iter()
                            .fold(0u64, |acc, &v| acc * self.base as u64 + v as u64)
                            as u16
                    })
                    .collect()
            })
            .collect();
        let tail = if runs * n as usize == self.depth() as usize {
            self.tail.clone()
        } else {
            self.local_position(runs as u32 * n)
        };
        Ok(Self {
            base: nb as u32,
            digits,
            tail,
        })
    }

    /// Position of the point inside its depth-`level` cell, in the cell's own
    /// `[-1,1]^d` coordinates.
    pub fn local_position(&self, level: u32) -> Vec<f64> {
        let b = self.base as f64;
        self.digits
            .iter()
            .zip(&self.tail)
            .map(|(ds, &t)| {
                let rest = &ds[(level as usize).min(ds.len())..];
                let mut scale = 2.0;
                let mut x = -1.0;
                for &d in rest {
                    scale /= b;
                    x += scale * d as f64;
                }
                x + scale * (t + 1.0) / 2.0
            })
            .collect()
    }

    /// Ambient coordinates.
    pub fn coords(&self) -> Vec<f64> {
        self.local_position(0)
    }
}
