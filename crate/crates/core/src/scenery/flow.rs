//! Scenery distributions along the continuous zoom.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ops::translate_rescale;
use crate::point::Point;
use crate::scenery::ensemble::EmpiricalDistribution;
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

/// Grid times `0, t_step, …` up to `horizon`.
pub fn time_grid(horizon: f64, t_step: f64) -> Result<Vec<f64>> {
    if !(t_step > 0.0) || !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Parameter(format!(
            "need t_step > 0 and T ≥ 0, got {t_step} and {horizon}"
        )));
    }
    let n = (horizon / t_step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * t_step).collect())
}

/// `⟨μ⟩_{x,T}`: equal-weight sceneries at the grid times.
pub fn scenery_distribution(
    source: &MeasureSource,
    x: &Point,
    horizon: f64,
    t_step: f64,
    out_depth: u32,
) -> Result<EmpiricalDistribution> {
    let times = time_grid(horizon, t_step)?;
    let trees: Vec<TreeMeasure> = times
        .par_iter()
        .map(|&t| translate_rescale(source, x, t, out_depth))
        .collect::<Result<_>>()?;
    EmpiricalDistribution::uniform(trees)
}

/// Number of grid times up to `horizon`, for taking prefixes of a longer run.
pub fn prefix_len(horizon: f64, t_step: f64) -> usize {
    (horizon / t_step + 1e-9).floor() as usize + 1
}
