//! Measure descriptions in TOML, and the named presets.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constructions::digit::{DigitProcess, DigitProcessSpec};
use crate::constructions::ifs::{Ifs, IfsSpec};
use crate::constructions::random_fractal::{random_fractal, RandomFractalSpec};
use crate::constructions::splice::Splice;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::source::MeasureSource;
use crate::tree::TreeMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    Lebesgue {
        base: u32,
        dim: usize,
    },
    HalfLine {
        base: u32,
    },
    Point {
        base: u32,
        coords: Vec<f64>,
        depth: u32,
    },
    Digit {
        axes: Vec<DigitProcessSpec>,
    },
    SelfSimilar {
        base: u32,
        #[serde(flatten)]
        ifs: IfsSpec,
    },
    Product {
        factors: Vec<MeasureSpec>,
    },
    /// Component `i` takes over at depth `starts[i]`.
    Splice {
        components: Vec<MeasureSpec>,
        starts: Vec<u32>,
    },
    RandomFractal {
        depth: u32,
        #[serde(flatten)]
        spec: RandomFractalSpec,
    },
    /// A stored tree in columnar text form.
    Tree {
        path: PathBuf,
    },
    Preset {
        name: String,
    },
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 8] = [
    "cantor3",
    "nu10",
    "nu10x2",
    "lebesgue1",
    "lebesgue2",
    "halfline",
    "cantor3x3",
    "bernoulli2",
];

fn iid(base: u32, probs: Vec<f64>) -> DigitProcessSpec {
    DigitProcessSpec::Iid { base, probs }
}

fn nu10_axis() -> DigitProcessSpec {
    let mut p = vec![0.0; 10];
    p[0] = 0.5;
    p[9] = 0.5;
    iid(10, p)
}

/// The spec behind a preset name.
pub fn preset(name: &str) -> Result<MeasureSpec> {
    let cantor = || iid(3, vec![0.5, 0.0, 0.5]);
    Ok(match name {
        "cantor3" => MeasureSpec::Digit {
            axes: vec![cantor()],
        },
        "nu10" => MeasureSpec::Digit {
            axes: vec![nu10_axis()],
        },
        "nu10x2" => MeasureSpec::Digit {
            axes: vec![nu10_axis(), nu10_axis()],
        },
        "lebesgue1" => MeasureSpec::Lebesgue { base: 2, dim: 1 },
        "lebesgue2" => MeasureSpec::Lebesgue { base: 2, dim: 2 },
        "halfline" => MeasureSpec::HalfLine { base: 2 },
        "cantor3x3" => MeasureSpec::Digit {
            axes: vec![cantor(), cantor()],
        },
        "bernoulli2" => MeasureSpec::Digit {
            axes: vec![iid(2, vec![1.0 / 3.0, 2.0 / 3.0])],
        },
        _ => {
            return Err(Error::Parameter(format!(
                "unknown preset {name:?}; known: {}",
                PRESETS.join(", ")
            )))
        }
    })
}

impl MeasureSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// A preset name, or a path to a TOML file.
    pub fn resolve(reference: &str) -> Result<Self> {
        if PRESETS.contains(&reference) {
            return preset(reference);
        }
        let text = std::fs::read_to_string(reference)
            .map_err(|e| Error::Io(format!("{reference}: {e}")))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{reference}: {m}")),
            other => other,
        })
    }

    pub fn build(&self) -> Result<MeasureSource> {
        match self {
            Self::Lebesgue { base, dim } => MeasureSource::lebesgue(*base, *dim),
            Self::HalfLine { base } => MeasureSource::half_line(*base),
            Self::Point {
                base,
                coords,
                depth,
            } => Ok(MeasureSource::point_mass(Point::from_coords(
                coords, *base, *depth,
            )?)),
            Self::Digit { axes } => MeasureSource::digit(
                axes.iter()
                    .map(DigitProcess::new)
                    .collect::<Result<Vec<_>>>()?,
            ),
            Self::SelfSimilar { base, ifs } => MeasureSource::self_similar(*base, Ifs::new(ifs)?),
            Self::Product { factors } => MeasureSource::product(
                factors
                    .iter()
                    .map(|f| f.build())
                    .collect::<Result<Vec<_>>>()?,
            ),
            Self::Splice { components, starts } => {
                let comps = components
                    .iter()
                    .map(|c| c.build())
                    .collect::<Result<Vec<_>>>()?;
                Ok(MeasureSource::Splice(Splice::from_starts(
                    comps,
                    starts.clone(),
                )?))
            }
            Self::RandomFractal { depth, spec } => {
                MeasureSource::frozen(random_fractal(spec, *depth)?)
            }
            Self::Tree { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                MeasureSource::frozen(TreeMeasure::from_columnar(&text)?)
            }
            Self::Preset { name } => preset(name)?.build(),
        }
    }
}

/// Builds a preset directly.
pub fn preset_source(name: &str) -> Result<Arc<MeasureSource>> {
    Ok(Arc::new(preset(name)?.build()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::entropy_dimension;

    #[test]
    fn presets_build_and_round_trip() {
        for name in PRESETS {
            let s = preset(name).unwrap();
            let back = MeasureSpec::from_toml(&s.to_toml().unwrap()).unwrap();
            assert_eq!(back, s, "{name}");
            s.build().unwrap();
        }
    }

    #[test]
    fn preset_dimensions() {
        let d = |n: &str| {
            entropy_dimension(&preset(n).unwrap().build().unwrap(), 4, 12)
                .unwrap()
                .value
        };
        assert!((d("cantor3") - 2f64.ln() / 3f64.ln()).abs() < 1e-9);
        assert!((d("nu10") - 2f64.ln() / 10f64.ln()).abs() < 1e-9);
        assert!((d("lebesgue2") - 2.0).abs() < 1e-9);
    }

    #[test]
    fn nested_toml() {
        let text = r#"
kind = "product"
[[factors]]
kind = "preset"
name = "cantor3"
[[factors]]
kind = "digit"
[[factors.axes]]
order = "iid"
base = 3
probs = [0.25, 0.5, 0.25]
"#;
        let s = MeasureSpec::from_toml(text).unwrap();
        assert_eq!(s.build().unwrap().dim(), 2);
    }

    #[test]
    fn bad_probabilities_name_the_vector() {
        let text = "kind = \"digit\"\n[[axes]]\norder = \"iid\"\nbase = 2\nprobs = [0.7, 0.7]\n";
        let e = MeasureSpec::from_toml(text).unwrap().build().unwrap_err();
        assert!(e.to_string().contains("[0.7, 0.7]"), "{e}");
    }
}
