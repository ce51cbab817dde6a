//! Iterated `(ν, N)`-discretizations: on every cell of the `N`-adic grid
//! the current measure is replaced by a rescaled copy of `ν` of equal mass.

use crate::cell::{cells_per_axis, CellIndex};
use crate::error::{Error, Result};
use crate::source::{MeasureSource, Region};

/// `μ_1 = ν_1`, `μ_i` = `(ν_i, N_i)`-discretization of `μ_{i-1}`. Component
/// `i` governs depths `[starts[i], starts[i+1])`, the last one all deeper
/// levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Splice {
    components: Vec<MeasureSource>,
    starts: Vec<u32>,
}

fn log_base(n: u64, base: u32) -> Option<u32> {
    let mut k = 0;
    let mut v = 1u64;
    while v < n {
        v = v.checked_mul(base as u64)?;
        k += 1;
    }
    (v == n).then_some(k)
}

impl Splice {
    /// `scales[i]` is `N_{i+2}`, the grid on which component `i+1` is
    /// inserted. Scales must be increasing powers of the common base.
    pub fn new(components: Vec<MeasureSource>, scales: &[u64]) -> Result<Self> {
        if components.is_empty() || scales.len() + 1 != components.len() {
            return Err(Error::Parameter(format!(
                "{} components need {} scales, got {}",
                components.len(),
                components.len().saturating_sub(1),
                scales.len()
            )));
        }
        let base = components[0].base();
        let dim = components[0].dim();
        let mut starts = vec![0u32];
        let mut prev = 1u64;
        for &n in scales {
            if n < 2 || n <= prev {
                return Err(Error::Parameter(format!(
                    "scales {scales:?} must increase from 2"
                )));
            }
            let j = log_base(n, base).ok_or_else(|| {
                Error::Parameter(format!("scale {n} is not a power of the base {base}"))
            })?;
            starts.push(j);
            prev = n;
        }
        Self::with_starts(components, starts, base, dim)
    }

    /// Components with explicit starting depths (`starts[0] = 0`).
    pub fn from_starts(components: Vec<MeasureSource>, starts: Vec<u32>) -> Result<Self> {
        if components.is_empty() || starts.len() != components.len() || starts[0] != 0 {
            return Err(Error::Parameter(
                "splice starts must begin at 0, one per component".into(),
            ));
        }
        if starts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!(
                "splice starts {starts:?} must increase"
            )));
        }
        let base = components[0].base();
        let dim = components[0].dim();
        Self::with_starts(components, starts, base, dim)
    }

    fn with_starts(
        components: Vec<MeasureSource>,
        starts: Vec<u32>,
        base: u32,
        dim: usize,
    ) -> Result<Self> {
        for (i, c) in components.iter().enumerate() {
            if c.base() != base || c.dim() != dim {
                return Err(Error::Parameter(format!(
                    "component {i} base/dimension mismatch"
                )));
            }
            if let MeasureSource::PointMass { point } = c {
                let c = point.coords();
                if c.iter().any(|x| x.abs() >= 1.0) {
                    return Err(Error::Parameter(format!(
                        "component {i} charges the boundary"
                    )));
                }
            }
            if !(c.unit_mass()? > 0.0) {
                return Err(Error::Normalization(format!(
                    "component {i} has no mass on B_1"
                )));
            }
            if let (Some(max), Some(&next)) = (c.max_depth(), starts.get(i + 1)) {
                let len = next - starts[i];
                if max < len {
                    return Err(Error::Resolution {
                        what: format!("component {i} is stored only to depth {max}"),
                        required: len,
                    });
                }
            }
        }
        Ok(Self { components, starts })
    }

    pub fn base(&self) -> u32 {
        self.components[0].base()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[MeasureSource] {
        &self.components
    }

    pub fn starts(&self) -> &[u32] {
        &self.starts
    }

    /// The stage-`i` measure `μ_i` (first `i` components).
    pub fn stage(&self, i: usize) -> Result<Splice> {
        if i == 0 || i > self.components.len() {
            return Err(Error::Parameter(format!(
                "stage {i} outside 1..={}",
                self.components.len()
            )));
        }
        Ok(Self {
            components: self.components[..i].to_vec(),
            starts: self.starts[..i].to_vec(),
        })
    }

    pub fn is_exact(&self) -> bool {
        self.components.last().is_some_and(|c| c.is_exact())
            && self
                .components
                .iter()
                .all(|c| c.max_depth().is_none() || !c.is_exact())
    }

    pub fn max_depth(&self) -> Option<u32> {
        let last = self.components.len() - 1;
        self.components[last]
            .max_depth()
            .map(|m| self.starts[last] + m)
    }

    fn segment(&self, depth: u32) -> usize {
        self.starts.iter().rposition(|&s| s <= depth).unwrap_or(0)
    }

    /// Digits of `cell` between depths `from` and `to`, as a cell of `B_1`.
    fn relative(&self, cell: &CellIndex, from: u32, to: u32) -> CellIndex {
        let digits = cell
            .digits()
            .iter()
            .map(|d| d[from as usize..to as usize].to_vec())
            .collect();
        CellIndex::from_digits(self.base(), digits).expect("digits of a valid cell")
    }

    /// Log mass of a cell sitting exactly at the start depth of segment `s`.
    fn boundary_log_mass(&self, cell: &CellIndex, s: usize) -> Result<f64> {
        if s == 0 {
            return Ok(0.0);
        }
        let parent_depth = self.starts[s - 1];
        let m = self.boundary_log_mass(&cell.ancestor(parent_depth), s - 1)?;
        if m == f64::NEG_INFINITY {
            return Ok(m);
        }
        let rel = self.relative(cell, parent_depth, self.starts[s]);
        let comp = &self.components[s - 1];
        Ok(m + comp.log_cell_mass(&rel)? - comp.unit_log_mass()?)
    }

    pub(crate) fn region(
        &self,
        anchor: &CellIndex,
        levels: u32,
        ranges: &[(u64, u64)],
    ) -> Result<Region> {
        if !anchor.in_unit_window() {
            return Ok(Region::default());
        }
        let depth = anchor.depth();
        let s = self.segment(depth);
        let start = self.starts[s];
        let lm = self.boundary_log_mass(&anchor.ancestor(start), s)?;
        if lm == f64::NEG_INFINITY {
            return Ok(Region::default());
        }
        let rel = self.relative(anchor, start, depth);
        let mut r = self.descend(s, &rel, levels, ranges)?;
        r.log_mass += lm;
        Ok(r)
    }

    /// Region of `rel` under component `s`, with the log mass taken relative
    /// to the component's unit mass.
    fn descend(
        &self,
        s: usize,
        rel: &CellIndex,
        levels: u32,
        ranges: &[(u64, u64)],
    ) -> Result<Region> {
        let comp = &self.components[s];
        let lu = comp.unit_log_mass()?;
        let end = self.starts.get(s + 1).map(|e| e - self.starts[s]);
        let reach = rel.depth() + levels;
        if end.map_or(true, |e| reach <= e) {
            let mut r = comp.region(rel, levels, Some(ranges))?;
            r.log_mass -= lu;
            return Ok(r);
        }
        let l1 = end.expect("checked above") - rel.depth();
        let l2 = levels - l1;
        let f = cells_per_axis(self.base(), l2)?;
        let coarse: Vec<(u64, u64)> = ranges
            .iter()
            .map(|&(lo, hi)| (lo / f, hi.div_ceil(f)))
            .collect();
        let top = comp.region(rel, l1, Some(&coarse))?;
        let mut out = Region {
            log_mass: top.log_mass - lu,
            leaves: Default::default(),
        };
        let root = CellIndex::root(self.base(), self.dim());
        for (k, m) in top.leaves {
            let sub_ranges: Vec<(u64, u64)> = ranges
                .iter()
                .enumerate()
                .map(|(a, &(lo, hi))| {
                    let base = k[a] * f;
                    (lo.max(base) - base, hi.min(base + f).saturating_sub(base))
                })
                .collect();
            if sub_ranges.iter().any(|(lo, hi)| lo >= hi) {
                continue;
            }
            let sub = self.descend(s + 1, &root, l2, &sub_ranges)?;
            for (sk, sm) in sub.leaves {
                let mut key = sk;
                for a in 0..self.dim() {
                    key[a] += k[a] * f;
                }
                out.leaves.insert(key, m * sm);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> MeasureSource {
        MeasureSource::digit_iid(3, 1, vec![0.5, 0.0, 0.5]).unwrap()
    }

    #[test]
    fn fixed_point_when_self_splicing() {
        let s = Splice::new(vec![cantor(), cantor()], &[9]).unwrap();
        let src = MeasureSource::Splice(s);
        let a = src.refine(6).unwrap();
        let b = cantor().refine(6).unwrap();
        assert!(a.max_leaf_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn cantor_then_lebesgue() {
        let lam = MeasureSource::lebesgue(3, 1).unwrap();
        let s = MeasureSource::Splice(Splice::new(vec![cantor(), lam], &[3]).unwrap());
        let t1 = s.refine(1).unwrap();
        assert_eq!(t1, cantor().refine(1).unwrap());
        let t3 = s.refine(3).unwrap();
        // inside each Cantor depth-1 cell the 9 sub-cells share its mass
        assert_eq!(t3.len(), 18);
        assert!(t3.leaves().values().all(|&m| (m - 0.5 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn coarse_cells_keep_stage_masses() {
        let nu = MeasureSource::digit_iid(2, 1, vec![0.3, 0.7]).unwrap();
        let s = MeasureSource::Splice(Splice::new(vec![nu.clone(), cantor_b2()], &[4]).unwrap());
        let a = s.refine(8).unwrap().coarsen(2).unwrap();
        assert!(a.max_leaf_diff(&nu.refine(2).unwrap()).unwrap() < 1e-15);
    }

    fn cantor_b2() -> MeasureSource {
        MeasureSource::digit_iid(2, 1, vec![0.9, 0.1]).unwrap()
    }

    #[test]
    fn ranges_inside_split() {
        let nu = MeasureSource::digit_iid(2, 1, vec![0.3, 0.7]).unwrap();
        let s = MeasureSource::Splice(Splice::new(vec![nu, cantor_b2()], &[4]).unwrap());
        let root = CellIndex::root(2, 1);
        let full = s.region(&root, 5, None).unwrap();
        let part = s.region(&root, 5, Some(&[(5, 19)])).unwrap();
        for (k, m) in &part.leaves {
            assert!(k[0] >= 5 && k[0] < 19);
            assert_eq!(full.leaves[k], *m);
        }
        assert_eq!(part.leaves.len(), 14);
    }

    #[test]
    fn rejects_non_power_scale() {
        assert!(Splice::new(vec![cantor(), cantor()], &[10]).is_err());
    }
}
