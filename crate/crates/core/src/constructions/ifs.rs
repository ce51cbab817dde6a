//! Iterated function systems of similarities and their invariant measures.

use serde::{Deserialize, Serialize};

use crate::cell::check_dim;
use crate::error::{Error, Result};

/// `x ↦ A x + c` on `R^d`, `A` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub dim: usize,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl Affine {
    pub fn identity(dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self {
            dim,
            a,
            c: vec![0.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| self.c[i] + (0..d).map(|j| self.a[i * d + j] * x[j]).sum::<f64>())
            .collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Affine) -> Affine {
        let d = self.dim;
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = (0..d).map(|k| self.a[i * d + k] * other.a[k * d + j]).sum();
            }
        }
        let c = self.apply(&other.c);
        Affine { dim: d, a, c }
    }

    /// Bounding box (centre, per-axis half-widths) of the image of a box.
    pub fn image_box(&self, center: &[f64], half: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let c = self.apply(center);
        let h = (0..d)
            .map(|i| (0..d).map(|j| self.a[i * d + j].abs() * half[j]).sum())
            .collect();
        (c, h)
    }
}

/// One similarity `x ↦ r U x + v`. `U` is a rotation by `angle` (d = 2)
/// composed with a reflection of the last axis when `reflect` is set; in
/// d = 1 and d = 3 only the reflection flag applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySpec {
    pub ratio: f64,
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub reflect: bool,
    pub translation: Vec<f64>,
    pub prob: f64,
}

/// Coordinates the maps are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Maps act on `[0,1]^d`, which is identified with `B_1`.
    Unit,
    /// Maps act directly on `B_1` coordinates.
    #[default]
    Ambient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsSpec {
    pub maps: Vec<SimilaritySpec>,
    #[serde(default)]
    pub frame: Frame,
}

/// A validated IFS with strong separation, maps expressed in `B_1`
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Ifs {
    pub(crate) maps: Vec<Affine>,
    pub(crate) ratios: Vec<f64>,
    pub(crate) probs: Vec<f64>,
    /// Bounding box of the attractor.
    pub(crate) hull: (Vec<f64>, Vec<f64>),
    gap: f64,
}

fn linear_part(s: &SimilaritySpec, d: usize) -> Vec<f64> {
    let mut u = vec![0.0; d * d];
    for i in 0..d {
        u[i * d + i] = 1.0;
    }
    if d == 2 {
        let (sn, cs) = s.angle.sin_cos();
        u = vec![cs, -sn, sn, cs];
    }
    if s.reflect {
        // negate the last column
        for i in 0..d {
            u[i * d + d - 1] = -u[i * d + d - 1];
        }
    }
    u.iter().map(|x| x * s.ratio).collect()
}

fn box_gap(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    (0..a.0.len())
        .map(|i| (a.0[i] - b.0[i]).abs() - a.1[i] - b.1[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

impl Ifs {
    pub fn new(spec: &IfsSpec) -> Result<Self> {
        if spec.maps.is_empty() {
            return Err(Error::Parameter("IFS needs at least one map".into()));
        }
        let d = spec.maps[0].translation.len();
        check_dim(d)?;
        let mut maps = Vec::new();
        for (i, s) in spec.maps.iter().enumerate() {
            if s.translation.len() != d {
                return Err(Error::Parameter(format!("map {i} has wrong dimension")));
            }
            if !(s.ratio > 0.0 && s.ratio < 1.0) {
                return Err(Error::Parameter(format!(
                    "map {i} ratio {} not in (0,1)",
                    s.ratio
                )));
            }
            if !(s.prob >= 0.0) {
                return Err(Error::Parameter(format!(
                    "map {i} has negative probability"
                )));
            }
            let a = linear_part(s, d);
            let c = match spec.frame {
                Frame::Ambient => s.translation.clone(),
                Frame::Unit => {
                    // conjugate by u = (x + 1) / 2
                    (0..d)
                        .map(|r| {
                            let row: f64 = (0..d).map(|k| a[r * d + k]).sum();
                            row + 2.0 * s.translation[r] - 1.0
                        })
                        .collect()
                }
            };
            maps.push(Affine { dim: d, a, c });
        }
        let probs: Vec<f64> = spec.maps.iter().map(|s| s.prob).collect();
        let ratios = spec.maps.iter().map(|s| s.ratio).collect();
        Self::from_affine(maps, ratios, probs)
    }

    /// Validates maps already written in `B_1` coordinates.
    pub(crate) fn from_affine(
        maps: Vec<Affine>,
        ratios: Vec<f64>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let d = maps[0].dim;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "IFS probabilities {probs:?} sum to {total}, not 1"
            )));
        }
        let hull = attractor_hull(&maps);
        for a in 0..d {
            if hull.0[a] - hull.1[a] < -1.0 - 1e-12 || hull.0[a] + hull.1[a] > 1.0 + 1e-12 {
                return Err(Error::Parameter("IFS attractor leaves B_1".into()));
            }
        }
        let gap = separation(&maps, &hull)?;
        Ok(Self {
            ratios,
            maps,
            probs,
            hull,
            gap,
        })
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim
    }

    /// The IFS acting on the coordinates `axes`, when no map mixes them
    /// with the others.
    pub fn marginal(&self, axes: &[usize]) -> Result<Ifs> {
        let d = self.dim();
        let mut maps = Vec::with_capacity(self.maps.len());
        for m in &self.maps {
            for &r in axes {
                if (0..d).any(|c| !axes.contains(&c) && m.a[r * d + c] != 0.0) {
                    return Err(Error::Structural(format!(
                        "IFS maps mix axis {r} with axes outside {axes:?}"
                    )));
                }
            }
            let k = axes.len();
            let mut a = vec![0.0; k * k];
            for (i, &r) in axes.iter().enumerate() {
                for (j, &c) in axes.iter().enumerate() {
                    a[i * k + j] = m.a[r * d + c];
                }
            }
            let c = axes.iter().map(|&r| m.c[r]).collect();
            maps.push(Affine { dim: k, a, c });
        }
        Self::from_affine(maps, self.ratios.clone(), self.probs.clone())
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Smallest sup-norm gap found between first-level pieces.
    pub fn separation_gap(&self) -> f64 {
        self.gap
    }

    /// Similarity dimension `s` with `Σ p_i log p_i / Σ p_i log r_i`.
    pub fn dimension(&self) -> f64 {
        let h: f64 = self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum();
        let l: f64 = self
            .probs
            .iter()
            .zip(&self.ratios)
            .map(|(p, r)| -p * r.ln())
            .sum();
        h / l
    }
}

fn attractor_hull(maps: &[Affine]) -> (Vec<f64>, Vec<f64>) {
    let d = maps[0].dim;
    // start from a box that contains the attractor and shrink by iteration
    let rmax = maps
        .iter()
        .map(|m| {
            (0..d)
                .map(|i| (0..d).map(|j| m.a[i * d + j].abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let cmax = maps
        .iter()
        .flat_map(|m| m.c.iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    let r0 = cmax / (1.0 - rmax).max(1e-9) + 1.0;
    let mut hull = (vec![0.0; d], vec![r0; d]);
    for _ in 0..2000 {
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for m in maps {
            let (c, h) = m.image_box(&hull.0, &hull.1);
            for a in 0..d {
                lo[a] = lo[a].min(c[a] - h[a]);
                hi[a] = hi[a].max(c[a] + h[a]);
            }
        }
        let next = (
            (0..d).map(|a| (lo[a] + hi[a]) / 2.0).collect::<Vec<_>>(),
            (0..d).map(|a| (hi[a] - lo[a]) / 2.0).collect::<Vec<_>>(),
        );
        let moved = (0..d)
            .map(|a| (next.0[a] - hull.0[a]).abs() + (next.1[a] - hull.1[a]).abs())
            .fold(0.0, f64::max);
        hull = next;
        if moved < 1e-15 {
            break;
        }
    }
    hull
}

/// Checks that first-level pieces are disjoint, refining the enclosing
/// boxes a few levels when the coarse boxes touch.
fn separation(maps: &[Affine], hull: &(Vec<f64>, Vec<f64>)) -> Result<f64> {
    if maps.len() == 1 {
        return Ok(f64::INFINITY);
    }
    let mut worst = (0, 1, f64::NEG_INFINITY);
    for level in 1..=4u32 {
        // boxes per first-level branch at this level
        let mut pieces: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::new();
        for first in maps {
            let mut words = vec![first.clone()];
            for _ in 1..level {
                words = words
                    .iter()
                    .flat_map(|w| maps.iter().map(move |m| w.compose(m)))
                    .collect();
            }
            pieces.push(
                words
                    .iter()
                    .map(|w| w.image_box(&hull.0, &hull.1))
                    .collect(),
            );
        }
        let mut min_gap = f64::INFINITY;
        let mut pair = (0, 1);
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                for a in &pieces[i] {
                    for b in &pieces[j] {
                        let g = box_gap(a, b);
                        if g < min_gap {
                            min_gap = g;
                            pair = (i, j);
                        }
                    }
                }
            }
        }
        if min_gap > 1e-12 {
            return Ok(min_gap);
        }
        worst = (pair.0, pair.1, min_gap);
    }
    Err(Error::Separation {
        first: worst.0,
        second: worst.1,
        gap: worst.2,
    })
}

/// `{x/3, x/3 + 2/3}` on `[0,1]`, equal weights, in the unit frame.
pub fn cantor_unit_frame() -> IfsSpec {
    two_map_unit(1.0 / 3.0)
}

/// Two maps of ratio `r` fixing the ends of `[0,1]`, unit frame.
pub fn two_map_unit(r: f64) -> IfsSpec {
    IfsSpec {
        maps: vec![
            SimilaritySpec {
                ratio: r,
                angle: 0.0,
                reflect: false,
                translation: vec![0.0],
                prob: 0.5,
            },
            SimilaritySpec {
                ratio: r,
                angle: 0.0,
                reflect: false,
                translation: vec![1.0 - r],
                prob: 0.5,
            },
        ],
        frame: Frame::Unit,
    }
}

/// The same two maps acting on `B_1` directly, so the attractor sits in
/// `[0,1] ⊂ B_1`.
pub fn cantor_ambient() -> IfsSpec {
    IfsSpec {
        frame: Frame::Ambient,
        ..cantor_unit_frame()
    }
}
