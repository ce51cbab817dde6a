//! One function per subcommand; each returns after writing its report.

use std::fmt::Write;

use zoomlab::constructions::counterexample::{counterexample_report, CounterexampleSpec};
use zoomlab::dimension::{entropy_dimension, exactness_spread, local_dimension};
use zoomlab::geometry::experiments::{bad_projection_experiment, pair_sum_check};
use zoomlab::geometry::{
    conservation_report, coordinate_marginal, projection_dimension_profile, sm_lower_bound_check,
    LinearMap, SmRanges,
};
use zoomlab::rng::stream;
use zoomlab::scenery::cp::cp_run;
use zoomlab::scenery::diagnostics::{quasi_palm_diagnostic, usm_convergence_report};
use zoomlab::scenery::{center_continuous, distribution_distance, MetricSpec, PointedEnsemble};
use zoomlab::spec::MeasureSpec;
use zoomlab::{Error, Result, Window};

use crate::config::{emit, format_map, load_maps, load_spec, ExperimentConfig};
use crate::{Command, Common};

pub fn run(command: &Command, common: &Common) -> Result<()> {
    match command {
        Command::MeasureBuild => measure_build(common),
        Command::Scenery { palm_radius } => scenery(common, *palm_radius),
        Command::Dimension { n_min } => dimension(common, *n_min),
        Command::Project { maps, n_min } => project(common, maps.as_deref(), *n_min),
        Command::Conserve { maps, axes, n_min } => conserve(common, maps.as_deref(), axes, *n_min),
        Command::Cp {
            m,
            center_atoms,
            t_steps,
            center_depth,
            radius,
        } => cp(common, *m, *center_atoms, *t_steps, *center_depth, *radius),
        Command::Counterexample { n, trend_steps } => {
            counterexample(common, n.as_deref(), *trend_steps)
        }
        Command::Splice { points, n_min } => splice(common, *points, *n_min),
        Command::PairSum { n_min } => pair_sum(common, *n_min),
    }
}

fn metric(cfg: &mut ExperimentConfig, common: &Common) -> Result<MetricSpec> {
    let m = MetricSpec::new(
        common
            .metric_depth
            .unwrap_or(MetricSpec::default().max_depth),
        MetricSpec::default().degree,
    )?;
    cfg.set("metric_depth", m.max_depth);
    cfg.set("metric_degree", m.degree);
    Ok(m)
}

fn measure_build(common: &Common) -> Result<()> {
    let mut cfg = ExperimentConfig::new("measure-build", common);
    let (_, source) = load_spec(&mut cfg, common, "cantor3")?;
    let depth = common.depth.unwrap_or(10);
    cfg.set("depth", depth);
    let tree = source.refine(depth)?;
    let mut s = cfg.header();
    let _ = writeln!(s, "total\t{:.12}", tree.total());
    let _ = writeln!(s, "leaves\t{}", tree.len());
    if let Some(p) = &common.out {
        std::fs::write(p, tree.to_columnar())
            .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    emit(&s, None)
}

fn scenery(common: &Common, palm_radius: f64) -> Result<()> {
    let mut cfg = ExperimentConfig::new("scenery", common);
    let (_, source) = load_spec(&mut cfg, common, "cantor3")?;
    let out_depth = common.depth.unwrap_or(4);
    let horizon = common.horizon.unwrap_or(4.0);
    let t_step = common.t_step.unwrap_or(0.25);
    let points = common.samples.unwrap_or(4);
    cfg.set("depth", out_depth);
    cfg.set("T", horizon);
    cfg.set("t_step", t_step);
    cfg.set("samples", points);
    cfg.set("palm_radius", palm_radius);
    let spec = metric(&mut cfg, common)?;
    let horizons: Vec<f64> = (1..=4).map(|i| horizon * i as f64 / 4.0).collect();
    let rep = usm_convergence_report(
        &source,
        points,
        &horizons,
        t_step,
        out_depth,
        &spec,
        common.seed,
    )?;
    let u = Window::new(vec![0.0; source.dim()], palm_radius)?;
    let palm = match quasi_palm_diagnostic(
        &[(1.0, source.clone())],
        &u,
        16 * points,
        out_depth,
        &spec,
        common.seed,
    ) {
        Ok(v) => format!("{v:.6e}"),
        // no mass near the origin: the score is not defined
        Err(Error::Conditioning(_)) => "undefined".to_string(),
        Err(e) => return Err(e),
    };
    let mut s = cfg.header();
    s.push_str("horizon\tcross_point\tcross_horizon\n");
    for (j, h) in rep.horizons.iter().enumerate() {
        let _ = writeln!(
            s,
            "{h:.4}\t{:.6e}\t{:.6e}",
            rep.cross_point[j], rep.cross_horizon[j]
        );
    }
    let _ = writeln!(s, "quasi_palm\t{palm}");
    let full = rep.distributions[0].last().expect("nonempty");
    s.push_str("t,distance_to_final\n");
    for k in 1..=full.len() {
        let d = distribution_distance(&full.prefix(k)?, full, &spec)?;
        let _ = writeln!(s, "{:.4},{d:.6e}", (k - 1) as f64 * t_step);
    }
    if let Some(dir) = &common.out {
        full.write_manifest(dir, "scenery")?;
    }
    emit(&s, None)
}

fn dimension(common: &Common, n_min: u32) -> Result<()> {
    let mut cfg = ExperimentConfig::new("dimension", common);
    let (_, source) = load_spec(&mut cfg, common, "cantor3")?;
    let n_max = common.depth.unwrap_or(12);
    let points = common.samples.unwrap_or(16);
    cfg.set("n_min", n_min);
    cfg.set("depth", n_max);
    cfg.set("samples", points);
    let entropy = entropy_dimension(&source, n_min, n_max)?;
    let x = source.sample_point(n_max, &mut stream(common.seed, 0))?;
    let local = local_dimension(&source, &x, n_min, n_max)?;
    let spread = exactness_spread(&source, points, n_min, n_max, common.seed)?;
    let mut s = cfg.header();
    s.push_str("method\tvalue\tstderr\tlower\tupper\n");
    for (name, e) in [("entropy", &entropy), ("local", &local)] {
        let _ = writeln!(
            s,
            "{name}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            e.value, e.stderr, e.lower, e.upper
        );
    }
    let _ = writeln!(
        s,
        "spread\tmean={:.6}\tpoint_spread={:.6}\tscale_spread={:.6}",
        spread.mean, spread.point_spread, spread.scale_spread
    );
    emit(&s, common.out.as_deref())
}

/// Each coordinate axis, then `(1, 1/2, 1/4, …)` for `d > 1`.
fn default_maps(d: usize) -> Result<Vec<LinearMap>> {
    let mut maps = (0..d)
        .map(|i| LinearMap::coordinate(d, &[i]))
        .collect::<Result<Vec<_>>>()?;
    if d > 1 {
        let c: Vec<f64> = (0..d).map(|i| 0.5f64.powi(i as i32)).collect();
        maps.push(LinearMap::functional(&c)?);
    }
    Ok(maps)
}

fn project(common: &Common, maps: Option<&std::path::Path>, n_min: u32) -> Result<()> {
    let mut cfg = ExperimentConfig::new("project", common);
    let (_, source) = load_spec(&mut cfg, common, "cantor3x3")?;
    let n_max = common.depth.unwrap_or(8);
    cfg.set("n_min", n_min);
    cfg.set("depth", n_max);
    let maps = match maps {
        Some(p) => {
            cfg.set("maps", p.display());
            load_maps(p)?
        }
        None => default_maps(source.dim())?,
    };
    let mut s;
    match common.samples {
        None | Some(0) => {
            s = cfg.header();
            s.push_str("map\tdim_projection\tstderr\n");
            for r in projection_dimension_profile(&source, &maps, n_min, n_max)? {
                let _ = writeln!(
                    s,
                    "{}\t{:.6}\t{:.6}",
                    format_map(&r.map),
                    r.estimate.value,
                    r.estimate.stderr
                );
            }
        }
        Some(k) => {
            cfg.set("samples", k);
            let ranges = SmRanges {
                n_min,
                n_max,
                ..Default::default()
            };
            let rep = sm_lower_bound_check(&source, &maps, None, k, ranges, common.seed)?;
            s = cfg.header();
            s.push_str(&rep.to_text());
        }
    }
    emit(&s, common.out.as_deref())
}

fn conserve(
    common: &Common,
    maps: Option<&std::path::Path>,
    axes: &[usize],
    n_min: u32,
) -> Result<()> {
    let mut cfg = ExperimentConfig::new("conserve", common);
    let (_, source) = load_spec(&mut cfg, common, "cantor3x3")?;
    let n_max = common.depth.unwrap_or(8);
    let samples = common.samples.unwrap_or(16);
    cfg.set("n_min", n_min);
    cfg.set("depth", n_max);
    cfg.set("samples", samples);
    let map = match maps {
        Some(p) => {
            cfg.set("maps", p.display());
            load_maps(p)?
                .into_iter()
                .next()
                .ok_or_else(|| Error::Parameter("map file lists no maps".into()))?
        }
        None => LinearMap::coordinate(source.dim(), axes)?,
    };
    cfg.set("map", format_map(&map));
    let rep = conservation_report(&source, &map, samples, (n_min, n_max), common.seed)?;
    let mut s = cfg.header();
    s.push_str(&rep.to_text());
    emit(&s, common.out.as_deref())
}

fn cp(
    common: &Common,
    m: u32,
    center_atoms: usize,
    t_steps: usize,
    center_depth: u32,
    radius: f64,
) -> Result<()> {
    let mut cfg = ExperimentConfig::new("cp", common);
    let (spec, _) = load_spec(&mut cfg, common, "cantor3")?;
    let (axis, dim) = match &spec {
        MeasureSpec::Digit { axes } if axes.iter().all(|a| *a == axes[0]) => {
            (axes[0].clone(), axes.len())
        }
        _ => {
            return Err(Error::Parameter(
                "cp needs a digit spec with the same law on every axis".into(),
            ))
        }
    };
    let n = common.samples.unwrap_or(4096);
    let check_depth = common.depth.unwrap_or(6);
    cfg.set("samples", n);
    cfg.set("depth", check_depth);
    cfg.set("m", m);
    cfg.set("center_atoms", center_atoms);
    cfg.set("t_steps", t_steps);
    cfg.set("center_depth", center_depth);
    cfg.set("radius", radius);
    let r = cp_run(&axis, dim, n, check_depth, m, common.seed)?;
    let mut s = cfg.header();
    s.push_str(&r.summary.to_text());
    if center_atoms > 0 {
        let k = center_atoms.min(n);
        let q = PointedEnsemble::uniform(
            r.ensemble.atoms()[..k]
                .iter()
                .map(|(_, a)| a.clone())
                .collect(),
        )?;
        let c = center_continuous(&q, t_steps, center_depth)?;
        let d = zoomlab::dimension::distribution_dimension(&c, radius)?;
        let _ = writeln!(s, "centered_atoms\t{}", c.len());
        let _ = writeln!(s, "centered_dimension\t{:.6}", d.value);
        let _ = writeln!(s, "excluded_weight\t{:.6}", d.excluded_weight);
    }
    emit(&s, common.out.as_deref())
}

fn counterexample(common: &Common, n: Option<&[u32]>, trend_steps: usize) -> Result<()> {
    let mut cfg = ExperimentConfig::new("counterexample", common);
    let spec = match n {
        Some(v) => CounterexampleSpec::new(v.to_vec())?,
        None => CounterexampleSpec::default(),
    };
    let ns: Vec<String> = spec.n.iter().map(|v| v.to_string()).collect();
    cfg.set("n", ns.join(","));
    cfg.set("trend_steps", trend_steps);
    let rep = counterexample_report(&spec, trend_steps)?;
    let mut s = cfg.header();
    s.push_str(&rep.to_text());
    emit(&s, common.out.as_deref())
}

fn splice(common: &Common, points: usize, n_min: u32) -> Result<()> {
    let mut cfg = ExperimentConfig::new("splice", common);
    cfg.set("points", points);
    let mut s;
    if common.spec.is_some() {
        let (_, source) = load_spec(&mut cfg, common, "")?;
        let n_max = common.depth.unwrap_or(12);
        cfg.set("n_min", n_min);
        cfg.set("depth", n_max);
        let source = if source.dim() > 1 {
            cfg.set("axis", 0);
            coordinate_marginal(&source, &[0])?
        } else {
            source
        };
        let sp = exactness_spread(&source, points, n_min, n_max, common.seed)?;
        s = cfg.header();
        let _ = writeln!(s, "mean\t{:.6}", sp.mean);
        let _ = writeln!(s, "point_spread\t{:.6}", sp.point_spread);
        let _ = writeln!(s, "scale_spread\t{:.6}", sp.scale_spread);
        s.push_str("window_start,window_mean\n");
        for (j, v) in sp.window_means.iter().enumerate() {
            let _ = writeln!(s, "{},{v:.6}", n_min as usize + j);
        }
    } else {
        let k = common.samples.unwrap_or(4);
        cfg.set("samples", k);
        let rep = bad_projection_experiment(k, points, common.seed)?;
        s = cfg.header();
        s.push_str(&rep.to_text());
    }
    emit(&s, common.out.as_deref())
}

fn pair_sum(common: &Common, n_min: u32) -> Result<()> {
    let mut cfg = ExperimentConfig::new("pair-sum", common);
    let depth = common.depth.unwrap_or(10);
    cfg.set("depth", depth);
    cfg.set("n_min", n_min);
    let rep = pair_sum_check(depth, n_min)?;
    let mut s = cfg.header();
    s.push_str(&rep.to_text());
    emit(&s, common.out.as_deref())
}
