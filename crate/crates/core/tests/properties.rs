//! Cross-module properties on the built-in constructions and on random
//! product measures.

use proptest::prelude::*;
use zoomlab::dimension::distribution_dimension;
use zoomlab::geometry::{conservation_report, LinearMap, Verdict};
use zoomlab::rng::stream;
use zoomlab::scenery::{
    distribution_distance, scenery_distribution, EmpiricalDistribution, MetricSpec,
};
use zoomlab::spec::{preset_source, PRESETS};
use zoomlab::{MeasureSource, TreeMeasure};

/// Distance to the Lebesgue Dirac below which an ensemble counts as it.
const FULL_DIMENSION_DISTANCE: f64 = 0.02;

#[test]
fn full_dimensional_sceneries_are_lebesgue() {
    let spec = MetricSpec::default();
    let mut checked = Vec::new();
    for name in PRESETS {
        let src = preset_source(name).unwrap();
        let d = src.dim();
        // at most 4096 cells per scenery
        let mut out_depth = 1;
        while (src.base() as u64).pow((out_depth + 1) * d as u32) <= 4096 {
            out_depth += 1;
        }
        let lam =
            EmpiricalDistribution::dirac(TreeMeasure::uniform(src.base(), d, out_depth).unwrap());
        for i in 0..3 {
            let x = src.sample_point(24, &mut stream(21, i)).unwrap();
            let p = scenery_distribution(&src, &x, 3.0, 0.5, out_depth).unwrap();
            let dim = distribution_dimension(&p, 0.5).unwrap().value;
            if dim >= d as f64 - 0.01 {
                let dist = distribution_distance(&p, &lam, &spec).unwrap();
                assert!(
                    dist < FULL_DIMENSION_DISTANCE,
                    "{name} point {i}: dim {dim}, distance {dist}"
                );
                checked.push(name);
            }
        }
    }
    assert!(checked.contains(&"lebesgue1") && checked.contains(&"lebesgue2"));
}

fn law(b: u32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, b as usize).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    })
}

/// A base and two digit laws in it.
fn two_laws() -> impl Strategy<Value = (u32, Vec<f64>, Vec<f64>)> {
    (2u32..=4).prop_flat_map(|b| (Just(b), law(b), law(b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn products_conserve_dimension((b, p, q) in two_laws(), seed in any::<u64>()) {
        let f = MeasureSource::digit_iid(b, 1, p).unwrap();
        let g = MeasureSource::digit_iid(b, 1, q).unwrap();
        let mu = MeasureSource::product(vec![f, g]).unwrap();
        let pi = LinearMap::coordinate(2, &[0]).unwrap();
        let n_max = [8, 6, 5][b as usize - 2];
        let r = conservation_report(&mu, &pi, 6, (2, n_max), seed).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Consistent);
        prop_assert!(r.defect.abs() <= 3.0 * r.defect_stderr + 1e-9, "{}", r.to_text());
    }
}
