//! Stationary digit processes and the measures they induce on `[-1,1]^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Law of one axis' digit sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "order", rename_all = "lowercase")]
pub enum DigitProcessSpec {
    Iid {
        base: u32,
        probs: Vec<f64>,
    },
    /// Order-1 chain; the stationary vector is solved for when omitted.
    Markov {
        base: u32,
        transition: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stationary: Option<Vec<f64>>,
    },
}

impl DigitProcessSpec {
    pub fn base(&self) -> u32 {
        match self {
            Self::Iid { base, .. } | Self::Markov { base, .. } => *base,
        }
    }
}

fn check_stochastic(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::Parameter(format!(
            "{what} {v:?} has negative entries"
        )));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Parameter(format!("{what} {v:?} sums to {s}, not 1")));
    }
    Ok(())
}

/// Solves `πQ = π`, `Σπ = 1` by Gaussian elimination with partial pivoting.
fn solve_stationary(q: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = q.len();
    // rows: (Q^T - I) with the last equation replaced by the normalization
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| q[j][i] - if i == j { 1.0 } else { 0.0 })
                .collect();
            row.push(0.0);
            row
        })
        .collect();
    m[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| (m[i][n] / m[i][i]).max(0.0)).collect())
}

/// A validated digit process.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitProcess {
    base: u32,
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Iid(Vec<f64>),
    Markov { q: Vec<Vec<f64>>, pi: Vec<f64> },
}

impl DigitProcess {
    pub fn new(spec: &DigitProcessSpec) -> Result<Self> {
        match spec {
            DigitProcessSpec::Iid { base, probs } => {
                crate::cell::check_base(*base)?;
                if probs.len() != *base as usize {
                    return Err(Error::Parameter(format!(
                        "probability vector {probs:?} has length {}, base is {base}",
                        probs.len()
                    )));
                }
                check_stochastic(probs, "probability vector")?;
                Ok(Self {
                    base: *base,
                    kind: Kind::Iid(probs.clone()),
                })
            }
            DigitProcessSpec::Markov {
                base,
                transition,
                stationary,
            } => {
                crate::cell::check_base(*base)?;
                let b = *base as usize;
                if transition.len() != b || transition.iter().any(|r| r.len() != b) {
                    return Err(Error::Parameter(format!(
                        "transition matrix must be {b}x{b}"
                    )));
                }
                for row in transition {
                    check_stochastic(row, "transition row")?;
                }
                let pi = match stationary {
                    Some(pi) => {
                        if pi.len() != b {
                            return Err(Error::Parameter(
                                "stationary vector length mismatch".into(),
                            ));
                        }
                        check_stochastic(pi, "stationary vector")?;
                        pi.clone()
                    }
                    None => {
                        let pi = solve_stationary(transition).ok_or_else(|| {
                            Error::Parameter("stationary vector not unique; supply it".into())
                        })?;
                        let s: f64 = pi.iter().sum();
                        pi.iter().map(|p| p / s).collect()
                    }
                };
                for j in 0..b {
                    let v: f64 = (0..b).map(|i| pi[i] * transition[i][j]).sum();
                    if (v - pi[j]).abs() > STATIONARY_TOL {
                        return Err(Error::Parameter(format!(
                            "stationary vector {pi:?} violates πQ = π at {j}"
                        )));
                    }
                }
                Ok(Self {
                    base: *base,
                    kind: Kind::Markov {
                        q: transition.clone(),
                        pi,
                    },
                })
            }
        }
    }

    pub fn iid(base: u32, probs: Vec<f64>) -> Result<Self> {
        Self::new(&DigitProcessSpec::Iid { base, probs })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.kind, Kind::Iid(_))
    }

    /// Law of the next digit given the previous one (`None` at the start,
    /// where the stationary law is used).
    pub fn next_probs(&self, prev: Option<u16>) -> &[f64] {
        match (&self.kind, prev) {
            (Kind::Iid(p), _) => p,
            (Kind::Markov { pi, .. }, None) => pi,
            (Kind::Markov { q, .. }, Some(s)) => &q[s as usize],
        }
    }

    /// Probability of a digit word, started from `prev`.
    pub fn word_prob(&self, prev: Option<u16>, word: &[u16]) -> f64 {
        let mut state = prev;
        let mut p = 1.0;
        for &d in word {
            p *= self.next_probs(state)[d as usize];
            if p == 0.0 {
                return 0.0;
            }
            state = Some(d);
        }
        p
    }

    /// Natural log of [`Self::word_prob`], without underflow on long words.
    pub fn word_log_prob(&self, prev: Option<u16>, word: &[u16]) -> f64 {
        let mut state = prev;
        let mut lp = 0.0;
        for &d in word {
            let q = self.next_probs(state)[d as usize];
            if q == 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += q.ln();
            state = Some(d);
        }
        lp
    }

    /// The same digit sequence read in blocks of `n`, as a process in base
    /// `b^n`. Blocks of a Markov chain form a chain driven by their last digit.
    pub fn regroup(&self, n: u32) -> Result<Self> {
        let b = self.base as usize;
        let nb = (b as u64).checked_pow(n).filter(|&v| n > 0 && v <= 4096);
        let nb =
            nb.ok_or_else(|| Error::Parameter(format!("cannot regroup base {b} by {n}")))? as usize;
        let block = |mut v: usize| -> Vec<u16> {
            let mut w = vec![0u16; n as usize];
            for slot in w.iter_mut().rev() {
                *slot = (v % b) as u16;
                v /= b;
            }
            w
        };
        let words: Vec<Vec<u16>> = (0..nb).map(block).collect();
        let spec = match &self.kind {
            Kind::Iid(_) => DigitProcessSpec::Iid {
                base: nb as u32,
                probs: words.iter().map(|w| self.word_prob(None, w)).collect(),
            },
            Kind::Markov { .. } => DigitProcessSpec::Markov {
                base: nb as u32,
                transition: words
                    .iter()
                    .map(|from| {
                        let last = from.last().copied();
                        words.iter().map(|w| self.word_prob(last, w)).collect()
                    })
                    .collect(),
                stationary: Some(words.iter().map(|w| self.word_prob(None, w)).collect()),
            },
        };
        Self::new(&spec)
    }

    /// Entropy rate in nats per digit.
    pub fn entropy_rate(&self) -> f64 {
        let h = |p: &[f64]| -> f64 { p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum() };
        match &self.kind {
            Kind::Iid(p) => h(p),
            Kind::Markov { q, pi } => pi.iter().zip(q).map(|(w, row)| w * h(row)).sum(),
        }
    }

    pub fn spec(&self) -> DigitProcessSpec {
        match &self.kind {
            Kind::Iid(p) => DigitProcessSpec::Iid {
                base: self.base,
                probs: p.clone(),
            },
            Kind::Markov { q, pi } => DigitProcessSpec::Markov {
                base: self.base,
                transition: q.clone(),
                stationary: Some(pi.clone()),
            },
        }
    }
}

/// `(μ, x)` with `μ` the law of the future digits given a sampled past and
/// `x ∼ μ` to `depth` digits. Only the last past digit matters (order-1
/// chains); for iid laws `μ` is the unconditioned digit measure.
pub fn cp_pair_sample(
    spec: &DigitProcessSpec,
    dim: usize,
    depth: u32,
    rng: &mut impl rand::Rng,
) -> Result<crate::scenery::PointedMeasure> {
    use crate::source::MeasureSource;
    let proc = DigitProcess::new(spec)?;
    let start: Vec<Option<u16>> = (0..dim)
        .map(|_| {
            if proc.is_iid() {
                return None;
            }
            let pi = proc.next_probs(None);
            let mut u = rng.gen::<f64>();
            let mut state = pi.len() - 1;
            for (i, p) in pi.iter().enumerate() {
                if u < *p {
                    state = i;
                    break;
                }
                u -= p;
            }
            Some(state as u16)
        })
        .collect();
    let mut src = MeasureSource::digit(vec![proc; dim])?;
    if let MeasureSource::Digit { start: s, .. } = &mut src {
        *s = start;
    }
    let src = std::sync::Arc::new(src);
    crate::scenery::PointedMeasure::sample(src, depth, crate::tree::Norm::Box, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::rng::stream;

    #[test]
    fn iid_pairs_ignore_the_past() {
        let spec = DigitProcessSpec::Iid {
            base: 3,
            probs: vec![0.5, 0.0, 0.5],
        };
        let cantor = crate::source::MeasureSource::digit_iid(3, 1, vec![0.5, 0.0, 0.5]).unwrap();
        for i in 0..5 {
            let p = cp_pair_sample(&spec, 1, 8, &mut stream(1, i)).unwrap();
            assert_eq!(p.materialize(4).unwrap(), cantor.refine(4).unwrap());
        }
    }

    #[test]
    fn markov_pairs_start_from_the_past() {
        let spec = DigitProcessSpec::Markov {
            base: 2,
            transition: vec![vec![0.7, 0.3], vec![0.3, 0.7]],
            stationary: None,
        };
        let q = [[0.7, 0.3], [0.3, 0.7]];
        for i in 0..8 {
            let p = cp_pair_sample(&spec, 1, 6, &mut stream(2, i)).unwrap();
            let crate::source::MeasureSource::Digit { start, .. } = p.source().as_ref() else {
                panic!("digit source expected");
            };
            let row = q[start[0].unwrap() as usize];
            let t = p.materialize(1).unwrap();
            assert!((t.leaves()[&[0, 0, 0]] - row[0]).abs() < 1e-15);
            assert!((t.leaves()[&[1, 0, 0]] - row[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn frozen_chain_is_deterministic() {
        let spec = DigitProcessSpec::Markov {
            base: 2,
            transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            stationary: Some(vec![0.0, 1.0]),
        };
        let p = cp_pair_sample(&spec, 1, 10, &mut stream(3, 0)).unwrap();
        assert_eq!(p.point().digits()[0], vec![1u16; 10]);
        assert_eq!(p.materialize(5).unwrap().len(), 1);
    }

    #[test]
    fn rejects_nonstochastic() {
        let e = DigitProcess::iid(3, vec![0.5, 0.1, 0.5]).unwrap_err();
        assert!(matches!(e, Error::Parameter(m) if m.contains("0.1")));
    }

    #[test]
    fn stationary_solved_and_checked() {
        let spec = DigitProcessSpec::Markov {
            base: 2,
            transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            stationary: None,
        };
        let p = DigitProcess::new(&spec).unwrap();
        let pi = p.next_probs(None);
        assert!((pi[0] - 0.75).abs() < 1e-12);
        let bad = DigitProcessSpec::Markov {
            base: 2,
            transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            stationary: Some(vec![0.5, 0.5]),
        };
        assert!(DigitProcess::new(&bad).is_err());
    }

    #[test]
    fn regroup_block_laws() {
        let spec = DigitProcessSpec::Markov {
            base: 2,
            transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            stationary: None,
        };
        let p = DigitProcess::new(&spec).unwrap();
        let q = p.regroup(2).unwrap();
        assert_eq!(q.base(), 4);
        // block 2 = digits (1, 0), entered after a block ending in 0
        assert!((q.next_probs(Some(0))[2] - 0.1 * 0.3).abs() < 1e-15);
        assert!((q.word_prob(None, &[3, 1]) - p.word_prob(None, &[1, 1, 0, 1])).abs() < 1e-15);
    }

    #[test]
    fn word_prob_from_state() {
        let spec = DigitProcessSpec::Markov {
            base: 2,
            transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            stationary: None,
        };
        let p = DigitProcess::new(&spec).unwrap();
        assert!((p.word_prob(Some(1), &[0, 0]) - 0.3 * 0.9).abs() < 1e-15);
    }
}
