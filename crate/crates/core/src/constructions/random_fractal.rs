//! Random fractal measures on `[-1,1]` built from one random pair of
//! disjoint subintervals and one weight per level.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{Grid, Window};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::tree::TreeMeasure;

/// Largest number of live intervals during a construction.
const MAX_LIVE: usize = 1 << 22;

/// Law of the per-level triple `(I, J, w)`, with `I` left of `J` in
/// `[-1,1]` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "lowercase")]
pub enum IntervalSampler {
    /// `I = [-1,-a]`, `J = [a,1]` and weight `w` at every level.
    Fixed { a: f64, w: f64 },
    /// `I = [-1, c_1]`, `J = [c_2, 1]` with `c_1 < c_2` the order statistics of
    /// two uniform draws, redrawn until the gap and both lengths are at
    /// least `min_len`; `w` uniform on `[w_lo, w_hi]`.
    Uniform { min_len: f64, w_lo: f64, w_hi: f64 },
    /// Triples used in turn, cycling.
    List {
        triples: Vec<([f64; 2], [f64; 2], f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFractalSpec {
    pub base: u32,
    #[serde(flatten)]
    pub sampler: IntervalSampler,
    pub seed: u64,
}

/// One level's intervals and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub i: [f64; 2],
    pub j: [f64; 2],
    pub w: f64,
}

impl RandomFractalSpec {
    /// The triple of level `n` (from 1), drawn from stream `n` of the seed.
    pub fn triple(&self, n: usize) -> Result<Triple> {
        let t = match &self.sampler {
            IntervalSampler::Fixed { a, w } => Triple {
                i: [-1.0, -a],
                j: [*a, 1.0],
                w: *w,
            },
            IntervalSampler::Uniform {
                min_len,
                w_lo,
                w_hi,
            } => {
                if !(*min_len > 0.0 && 3.0 * min_len < 2.0)
                    || !(0.0..=1.0).contains(w_lo)
                    || !(w_lo <= w_hi && *w_hi <= 1.0)
                {
                    return Err(Error::Parameter(
                        "uniform sampler parameters out of range".into(),
                    ));
                }
                let mut rng = stream(self.seed, n as u64);
                loop {
                    let a: f64 = rng.gen_range(-1.0..1.0);
                    let b: f64 = rng.gen_range(-1.0..1.0);
                    let (c1, c2) = if a < b { (a, b) } else { (b, a) };
                    if c1 + 1.0 >= *min_len && c2 - c1 >= *min_len && 1.0 - c2 >= *min_len {
                        let w = if w_hi > w_lo {
                            rng.gen_range(*w_lo..=*w_hi)
                        } else {
                            *w_lo
                        };
                        break Triple {
                            i: [-1.0, c1],
                            j: [c2, 1.0],
                            w,
                        };
                    }
                }
            }
            IntervalSampler::List { triples } => {
                if triples.is_empty() {
                    return Err(Error::Parameter("empty triple list".into()));
                }
                let (i, j, w) = triples[(n - 1) % triples.len()];
                Triple { i, j, w }
            }
        };
        let ok_interval = |v: [f64; 2]| -1.0 <= v[0] && v[0] < v[1] && v[1] <= 1.0;
        if !ok_interval(t.i) || !ok_interval(t.j) || !(0.0..=1.0).contains(&t.w) {
            return Err(Error::Parameter(format!("malformed triple at level {n}")));
        }
        if t.i[1] > t.j[0] && t.j[1] > t.i[0] {
            return Err(Error::Structural(format!("intervals overlap at level {n}")));
        }
        Ok(t)
    }

    /// Sample mean of `w log(|I|/2) + (1−w) log(|J|/2)` over levels
    /// `1..=levels`; finite for every valid sampler.
    pub fn integrability(&self, levels: usize) -> Result<f64> {
        let mut s = 0.0;
        for n in 1..=levels {
            let t = self.triple(n)?;
            let li = ((t.i[1] - t.i[0]) / 2.0).ln();
            let lj = ((t.j[1] - t.j[0]) / 2.0).ln();
            s += t.w * li + (1.0 - t.w) * lj;
        }
        Ok(s / levels.max(1) as f64)
    }
}

/// The measure on a depth-`depth` grid of `[-1,1]`: intervals are split
/// level by level until they fit in a leaf, then spread uniformly.
pub fn random_fractal(spec: &RandomFractalSpec, depth: u32) -> Result<TreeMeasure> {
    let grid = Grid::new(spec.base, depth, Window::unit(1))?;
    let side = 2.0 / grid.cells() as f64;
    let mut leaves = std::collections::BTreeMap::new();
    let mut live = vec![(-1.0f64, 1.0f64, 1.0f64)];
    let mut level = 0;
    while !live.is_empty() {
        level += 1;
        let t = spec.triple(level)?;
        let mut next = Vec::new();
        for (lo, hi, m) in live {
            let len = hi - lo;
            let map = |v: [f64; 2]| (lo + (v[0] + 1.0) / 2.0 * len, lo + (v[1] + 1.0) / 2.0 * len);
            for ((a, b), w) in [(map(t.i), t.w), (map(t.j), 1.0 - t.w)] {
                let mass = m * w;
                if mass == 0.0 {
                    continue;
                }
                if b - a <= side * (1.0 + 1e-12) {
                    grid.spread_box(&[a], &[b], |k, f| {
                        *leaves.entry(k).or_insert(0.0) += mass * f
                    });
                } else {
                    next.push((a, b, mass));
                }
            }
        }
        if next.len() > MAX_LIVE {
            return Err(Error::Resolution {
                what: format!("random fractal needs over {MAX_LIVE} intervals at level {level}"),
                required: depth,
            });
        }
        live = next;
    }
    TreeMeasure::from_leaves(spec.base, depth, Window::unit(1), leaves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::ifs::{Ifs, IfsSpec, SimilaritySpec};
    use crate::source::MeasureSource;

    #[test]
    fn fixed_sampler_is_self_similar() {
        // I = [-1,-1/3], J = [1/3,1]: the middle-thirds Cantor measure on B_1
        let spec = RandomFractalSpec {
            base: 3,
            sampler: IntervalSampler::Fixed {
                a: 1.0 / 3.0,
                w: 0.5,
            },
            seed: 0,
        };
        let t = random_fractal(&spec, 7).unwrap();
        let c = MeasureSource::digit_iid(3, 1, vec![0.5, 0.0, 0.5])
            .unwrap()
            .refine(7)
            .unwrap();
        assert!(t.max_leaf_diff(&c).unwrap() < 1e-12);
    }

    #[test]
    fn full_weight_on_left_is_a_point() {
        let spec = RandomFractalSpec {
            base: 2,
            sampler: IntervalSampler::Fixed { a: 0.2, w: 1.0 },
            seed: 0,
        };
        let t = random_fractal(&spec, 10).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.leaves().keys().next().unwrap()[0], 0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let spec = RandomFractalSpec {
            base: 2,
            sampler: IntervalSampler::Uniform {
                min_len: 0.2,
                w_lo: 0.2,
                w_hi: 0.8,
            },
            seed: 42,
        };
        let a = random_fractal(&spec, 12).unwrap();
        let b = random_fractal(&spec, 12).unwrap();
        assert_eq!(a, b);
        assert!((a.total() - 1.0).abs() < 1e-12);
        assert!(spec.integrability(500).unwrap().is_finite());
    }

    #[test]
    fn overlap_names_the_level() {
        let spec = RandomFractalSpec {
            base: 2,
            sampler: IntervalSampler::List {
                triples: vec![
                    ([-1.0, -0.5], [0.5, 1.0], 0.5),
                    ([-1.0, 0.2], [0.1, 1.0], 0.5),
                ],
            },
            seed: 0,
        };
        let e = random_fractal(&spec, 8).unwrap_err();
        assert!(matches!(e, Error::Structural(m) if m.contains("level 2")));
    }

    #[test]
    fn fixed_sampler_matches_ifs() {
        let spec = RandomFractalSpec {
            base: 2,
            sampler: IntervalSampler::Fixed { a: 0.5, w: 0.3 },
            seed: 0,
        };
        let map = |t: f64, p: f64| SimilaritySpec {
            ratio: 0.25,
            angle: 0.0,
            reflect: false,
            translation: vec![t],
            prob: p,
        };
        let ifs = IfsSpec {
            maps: vec![map(-0.75, 0.3), map(0.75, 0.7)],
            frame: Default::default(),
        };
        let src = MeasureSource::self_similar(2, Ifs::new(&ifs).unwrap()).unwrap();
        let a = random_fractal(&spec, 8).unwrap();
        assert!(a.max_leaf_diff(&src.refine(8).unwrap()).unwrap() < 1e-12);
    }
}
