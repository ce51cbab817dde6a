//! Runs of the magnification dynamics started from a sampled CP pair.

use rayon::prelude::*;
use serde::Serialize;

use crate::constructions::digit::{cp_pair_sample, DigitProcessSpec};
use crate::error::Result;
use crate::rng::stream;
use crate::scenery::diagnostics::adaptedness_diagnostic;
use crate::scenery::pointed::{PointedEnsemble, POINT_RESERVE};
use crate::tree::Norm;

/// Orbit `⟨μ, x⟩_N` of one sampled pair together with its checks.
#[derive(Debug, Clone)]
pub struct CpRun {
    pub ensemble: PointedEnsemble,
    pub summary: CpSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpSummary {
    pub n: usize,
    /// Depth at which measure components are compared.
    pub check_depth: u32,
    /// Number of distinct measure components among the atoms.
    pub distinct_measures: usize,
    /// All atoms carry the same measure component, leaf for leaf.
    pub marginal_constant: bool,
    pub m: u32,
    pub adaptedness: f64,
    /// `5/√N`.
    pub adaptedness_bound: f64,
}

impl CpSummary {
    pub fn to_text(&self) -> String {
        format!(
            "n\t{}\ncheck_depth\t{}\ndistinct_measures\t{}\nmarginal_constant\t{}\nm\t{}\nadaptedness\t{:.6}\nadaptedness_bound\t{:.6}\n",
            self.n,
            self.check_depth,
            self.distinct_measures,
            self.marginal_constant,
            self.m,
            self.adaptedness,
            self.adaptedness_bound
        )
    }
}

/// Samples `(μ, x)` from the digit law (stream 0 of `seed`) and applies
/// `M_b` `n` times (stream 1).
pub fn cp_run(
    spec: &DigitProcessSpec,
    dim: usize,
    n: usize,
    check_depth: u32,
    m: u32,
    seed: u64,
) -> Result<CpRun> {
    let mut current = cp_pair_sample(spec, dim, n as u32 + POINT_RESERVE, &mut stream(seed, 0))?;
    let mut rng = stream(seed, 1);
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n {
        current = current.magnify(Norm::Box, &mut rng)?;
        atoms.push(current.clone());
    }
    let ensemble = PointedEnsemble::uniform(atoms)?;
    let trees = ensemble
        .atoms()
        .par_iter()
        .map(|(_, a)| a.materialize(check_depth))
        .collect::<Result<Vec<_>>>()?;
    let mut distinct: Vec<&crate::tree::TreeMeasure> = Vec::new();
    for t in &trees {
        if !distinct.contains(&t) {
            distinct.push(t);
        }
    }
    let summary = CpSummary {
        n,
        check_depth,
        distinct_measures: distinct.len(),
        marginal_constant: distinct.len() == 1,
        m,
        adaptedness: adaptedness_diagnostic(&ensemble, m)?,
        adaptedness_bound: 5.0 / (n as f64).sqrt(),
    };
    Ok(CpRun { ensemble, summary })
}
