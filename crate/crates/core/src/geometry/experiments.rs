//! Desk-scale projection experiments: spliced rotations of a product
//! Cantor measure, and sums of independent Cantor-type measures.

use serde::Serialize;

use crate::cell::Window;
use crate::constructions::ifs::{Frame, Ifs, IfsSpec, SimilaritySpec};
use crate::constructions::splice::Splice;
use crate::dimension::{
    entropy_dimension, exactness_spread, tree_entropy_dimension, DimensionEstimate, ExactnessSpread,
};
use crate::error::Result;
use crate::geometry::linear::{coordinate_marginal, pushforward_pair_sum, LinearMap};
use crate::geometry::profile::{sm_lower_bound_check, SmRanges, SmRow};
use crate::source::MeasureSource;

/// Rotation angles used in turn by the spliced components. All keep the
/// four first-level pieces of the rotated product apart on the x-axis.
pub const ROTATIONS: [f64; 5] = [0.5, 0.35, 0.25, 0.18, 0.15];
/// Shrink applied before rotating so the attractor stays inside `B_1`.
pub const ROTATION_SCALE: f64 = 0.7;

fn digits_0_9() -> Vec<f64> {
    let mut p = vec![0.0; 10];
    p[0] = 0.5;
    p[9] = 0.5;
    p
}

/// Base-10 digits {0, 9} on each of two axes.
pub fn nu_product() -> Result<MeasureSource> {
    MeasureSource::digit_iid(10, 2, digits_0_9())
}

/// The rotated, shrunk copy of [`nu_product`] as a four-map IFS.
pub fn rotated_ifs(theta: f64) -> Result<Ifs> {
    let (s, c) = theta.sin_cos();
    let mut maps = Vec::with_capacity(4);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            let (u, v) = (0.9 * sx, 0.9 * sy);
            maps.push(SimilaritySpec {
                ratio: 0.1,
                angle: 0.0,
                reflect: false,
                translation: vec![
                    ROTATION_SCALE * (c * u - s * v),
                    ROTATION_SCALE * (s * u + c * v),
                ],
                prob: 0.25,
            });
        }
    }
    Ifs::new(&IfsSpec {
        maps,
        frame: Frame::Ambient,
    })
}

pub fn rotated_nu(theta: f64) -> Result<MeasureSource> {
    MeasureSource::self_similar(10, rotated_ifs(theta)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpliceKind {
    /// Every component rotated.
    Rotated,
    /// Unrotated and rotated components in turn, unrotated first.
    Alternating,
}

/// Splice of `components` pieces, each governing `block` base-10 levels.
pub fn bad_projection_splice(
    kind: SpliceKind,
    block: u32,
    components: usize,
) -> Result<MeasureSource> {
    let mut comps = Vec::with_capacity(components);
    for i in 0..components {
        let c = match kind {
            SpliceKind::Rotated => rotated_nu(ROTATIONS[i % ROTATIONS.len()])?,
            SpliceKind::Alternating if i % 2 == 0 => nu_product()?,
            SpliceKind::Alternating => rotated_nu(ROTATIONS[(i / 2) % ROTATIONS.len()])?,
        };
        comps.push(c);
    }
    let starts = (0..components as u32).map(|i| i * block).collect();
    Ok(MeasureSource::Splice(Splice::from_starts(comps, starts)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadProjectionReport {
    /// Dimension of the projected unrotated product.
    pub flat_dimension: f64,
    /// Similarity dimension of the projected first rotated component.
    pub rotated_dimension: f64,
    /// Rotated splice against the unrotated scenery ensemble, x-projection.
    pub sm: SmRow,
    /// Local dimension spread of the x-marginal of the alternating splice.
    pub spread: ExactnessSpread,
}

impl BadProjectionReport {
    pub fn to_text(&self) -> String {
        format!(
            "flat_dimension\t{:.6}\nrotated_dimension\t{:.6}\ndim_projection\t{:.6}\nE_P\t{:.6}\nmargin\t{:.6}\nmargin_stderr\t{:.6}\npoint_spread\t{:.6}\nscale_spread\t{:.6}\nspread\t{:.6}\nwindow_means\t{}\n",
            self.flat_dimension,
            self.rotated_dimension,
            self.sm.projection.value,
            self.sm.ensemble.value,
            self.sm.margin,
            self.sm.margin_stderr,
            self.spread.point_spread,
            self.spread.scale_spread,
            self.spread.spread,
            self.spread
                .window_means
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        )
    }
}

/// Block length of the rotated splice.
pub const ROTATED_BLOCK: u32 = 4;
/// Block length of the alternating splice.
pub const ALTERNATING_BLOCK: u32 = 3;

/// Runs both splice constructions against the x-projection.
pub fn bad_projection_experiment(
    n_samples: usize,
    n_points: usize,
    seed: u64,
) -> Result<BadProjectionReport> {
    let pi = LinearMap::coordinate(2, &[0])?;
    let rotated = bad_projection_splice(SpliceKind::Rotated, ROTATED_BLOCK, 3)?;
    let sm = sm_lower_bound_check(
        &rotated,
        std::slice::from_ref(&pi),
        Some(&nu_product()?),
        n_samples,
        SmRanges::default(),
        seed,
    )?
    .rows
    .remove(0);
    let alternating = bad_projection_splice(SpliceKind::Alternating, ALTERNATING_BLOCK, 4)?;
    let marginal = coordinate_marginal(&alternating, &[0])?;
    let spread = exactness_spread(&marginal, n_points, 1, 12, seed)?;
    Ok(BadProjectionReport {
        flat_dimension: 2f64.ln() / 10f64.ln(),
        rotated_dimension: rotated_ifs(ROTATIONS[0])?.marginal(&[0])?.dimension(),
        sm,
        spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSumReport {
    /// Entropy dimension of the law of `X + Y`.
    pub sum: DimensionEstimate,
    /// Entropy dimensions of the coordinate projections, each on its
    /// factor's own grid.
    pub marginals: [DimensionEstimate; 2],
    /// The same laws re-binned on the output grid; the base-3 factor picks
    /// up a log-periodic bias there.
    pub rebinned: [DimensionEstimate; 2],
    /// Exact dimensions of the two factors.
    pub expected: [f64; 2],
    /// `min(1, sum of expected)`.
    pub target: f64,
}

impl PairSumReport {
    pub fn to_text(&self) -> String {
        format!(
            "sum\t{:.6}\t{:.6}\nmarginal_x\t{:.6}\t{:.6}\t{:.6}\nmarginal_y\t{:.6}\t{:.6}\t{:.6}\ntarget\t{:.6}\n",
            self.sum.value,
            self.sum.stderr,
            self.marginals[0].value,
            self.rebinned[0].value,
            self.expected[0],
            self.marginals[1].value,
            self.rebinned[1].value,
            self.expected[1],
            self.target
        )
    }
}

/// `X` base-2 with digit weights (1/3, 2/3), `Y` the middle-thirds Cantor
/// measure; all laws re-binned on a base-2 grid of `[-2,2]` to `out_depth`.
pub fn pair_sum_check(out_depth: u32, n_min: u32) -> Result<PairSumReport> {
    let x = MeasureSource::digit_iid(2, 1, vec![1.0 / 3.0, 2.0 / 3.0])?;
    let y = MeasureSource::digit_iid(3, 1, vec![0.5, 0.0, 0.5])?;
    let y_depth = (out_depth as f64 * 2f64.ln() / 3f64.ln()).ceil() as u32 + 1;
    let (xt, yt) = (x.refine(out_depth)?, y.refine(y_depth)?);
    let window = Window::new(vec![0.0], 2.0)?;
    let est = |c: [f64; 2]| -> Result<DimensionEstimate> {
        let t = pushforward_pair_sum(&xt, &yt, c, 2, out_depth, window.clone())?;
        tree_entropy_dimension(&t, n_min, out_depth)
    };
    let h = -(1.0 / 3.0f64) * (1.0 / 3.0f64).ln() - (2.0 / 3.0f64) * (2.0 / 3.0f64).ln();
    let expected = [h / 2f64.ln(), 2f64.ln() / 3f64.ln()];
    Ok(PairSumReport {
        sum: est([1.0, 1.0])?,
        marginals: [
            entropy_dimension(&x, n_min, out_depth)?,
            entropy_dimension(&y, n_min, y_depth)?,
        ],
        rebinned: [est([1.0, 0.0])?, est([0.0, 1.0])?],
        expected,
        target: (expected[0] + expected[1]).min(1.0),
    })
}
