//! Effective configuration of a run, echoed as a header, and the shared
//! loaders for specs and map lists.

use std::fmt::Display;
use std::path::Path;

use serde::Deserialize;
use zoomlab::geometry::LinearMap;
use zoomlab::spec::MeasureSpec;
use zoomlab::{Error, MeasureSource, Result};

use crate::Common;

/// Parameters of one run, in the order they were set.
pub struct ExperimentConfig {
    command: &'static str,
    params: Vec<(&'static str, String)>,
}

impl ExperimentConfig {
    pub fn new(command: &'static str, common: &Common) -> Self {
        let mut c = Self {
            command,
            params: Vec::new(),
        };
        c.set("seed", common.seed);
        if let Some(out) = &common.out {
            c.set("out", out.display());
        }
        c
    }

    pub fn set(&mut self, key: &'static str, value: impl Display) {
        self.params.push((key, value.to_string()));
    }

    pub fn header(&self) -> String {
        let mut s = format!("# zoomlab {}\n", self.command);
        for (k, v) in &self.params {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s
    }
}

fn spec_base(spec: &MeasureSpec) -> Option<u32> {
    match spec {
        MeasureSpec::Lebesgue { base, .. }
        | MeasureSpec::HalfLine { base }
        | MeasureSpec::Point { base, .. }
        | MeasureSpec::SelfSimilar { base, .. } => Some(*base),
        MeasureSpec::Digit { axes } => axes.first().map(|a| a.base()),
        _ => None,
    }
}

/// Resolves `--spec` (or the default), applying `--base`.
pub fn load_spec(
    cfg: &mut ExperimentConfig,
    common: &Common,
    default: &str,
) -> Result<(MeasureSpec, MeasureSource)> {
    let reference = common.spec.as_deref().unwrap_or(default);
    cfg.set("spec", reference);
    let mut spec = MeasureSpec::resolve(reference)?;
    if let Some(b) = common.base {
        match &mut spec {
            MeasureSpec::Lebesgue { base, .. } | MeasureSpec::HalfLine { base } => *base = b,
            other => {
                if let Some(have) = spec_base(other) {
                    if have != b {
                        return Err(Error::Parameter(format!(
                            "--base {b} does not match the spec's base {have}"
                        )));
                    }
                }
            }
        }
    }
    let source = spec.build()?;
    cfg.set("base", source.base());
    cfg.set("dim", source.dim());
    Ok((spec, source))
}

#[derive(Deserialize)]
struct MapsFile {
    maps: Vec<Vec<Vec<f64>>>,
}

/// Row-major matrices from a TOML file.
pub fn load_maps(path: &Path) -> Result<Vec<LinearMap>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file: MapsFile =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    file.maps.into_iter().map(LinearMap::new).collect()
}

pub fn format_map(m: &LinearMap) -> String {
    let rows: Vec<String> = m
        .rows()
        .iter()
        .map(|r| {
            let v: Vec<String> = r.iter().map(|x| format!("{x}")).collect();
            v.join(" ")
        })
        .collect();
    format!("[{}]", rows.join("; "))
}

/// Writes the report to `--out` when given (unless the command uses it
/// for something else), otherwise to stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
