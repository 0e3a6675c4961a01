//! Reaction networks read from TOML model files.
//!
//! ```toml
//! name = "birth-death"
//! species = ["x"]
//! reactant = { point = [0] }
//! product = { point = [10] }
//!
//! [constants]
//! k = 2.0
//!
//! [[axes]]
//! min = 0
//! max = 10
//! step = 1
//!
//! [[reactions]]
//! name = "birth"
//! change = [1]
//! propensity = "k"
//! ```
//! An axis may give `points` instead of `max`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::markov::GridAxis;
use crate::models::{Reaction, ReactionNetwork, Region};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: Option<String>,
    species: Vec<String>,
    #[serde(default)]
    constants: BTreeMap<String, f64>,
    axes: Vec<AxisSpec>,
    reactions: Vec<ReactionSpec>,
    reactant: RegionSpec,
    product: RegionSpec,
    reactant_exit_rate: Option<f64>,
    #[serde(default)]
    restrict_to_reactant_class: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct AxisSpec {
    pub min: f64,
    pub step: f64,
    pub max: Option<f64>,
    pub points: Option<usize>,
}

impl AxisSpec {
    pub(crate) fn to_axis(&self, field: &str) -> Result<GridAxis> {
        match (self.max, self.points) {
            (Some(max), None) => GridAxis::from_bounds(self.min, max, self.step),
            (None, Some(points)) => GridAxis::with_points(self.min, self.step, points),
            _ => Err(Error::validation(field, "give exactly one of `max` or `points`")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReactionSpec {
    name: String,
    change: Vec<i64>,
    propensity: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub(crate) enum RegionSpec {
    Point(Vec<f64>),
    Box(Vec<[f64; 2]>),
}

impl From<RegionSpec> for Region {
    fn from(r: RegionSpec) -> Region {
        match r {
            RegionSpec::Point(p) => Region::Point(p),
            RegionSpec::Box(b) => Region::Box(b.into_iter().map(|[lo, hi]| (lo, hi)).collect()),
        }
    }
}

pub fn parse_model_file(text: &str) -> Result<ReactionNetwork> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.species.is_empty() {
        return Err(Error::validation("species", "must not be empty"));
    }
    if file.axes.len() != file.species.len() {
        return Err(Error::validation("axes", format!("need one axis per species ({})", file.species.len())));
    }
    let axes = file
        .axes
        .iter()
        .enumerate()
        .map(|(k, a)| a.to_axis(&format!("axes[{k}]")))
        .collect::<Result<Vec<_>>>()?;
    let reactions = file
        .reactions
        .into_iter()
        .map(|r| Reaction::new(r.name, r.change, &r.propensity, &file.species, &file.constants))
        .collect::<Result<Vec<_>>>()?;
    if reactions.is_empty() {
        return Err(Error::validation("reactions", "must not be empty"));
    }
    Ok(ReactionNetwork {
        name: file.name.unwrap_or_else(|| "model-file".into()),
        species: file.species,
        axes,
        reactions,
        reactant: file.reactant.into(),
        product: file.product.into(),
        reactant_exit_rate: file.reactant_exit_rate,
        restrict_to_reactant_class: file.restrict_to_reactant_class,
    })
}

pub fn load_model_file(path: &Path) -> Result<ReactionNetwork> {
    parse_model_file(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtin_model;
    use crate::models::Model;

    const TOGGLE: &str = r#"
name = "toggle"
species = ["x1", "x2", "x3"]
reactant = { box = [[35, 45], [0, 4], [0, 4]] }
product = { box = [[0, 4], [35, 45], [0, 4]] }

[constants]
c11 = 2112.5
c12 = 845
c13 = 4225
c4 = 0.0125
c5 = 0.005
c6 = 0.025

[[axes]]
min = 0
step = 3
points = 16
[[axes]]
min = 0
max = 45
step = 3
[[axes]]
min = 0
max = 45
step = 3

[[reactions]]
name = "alpha1"
change = [1, 0, 0]
propensity = "c11 / ((65 + x2^2) × (65 + x3^2))"
[[reactions]]
name = "alpha2"
change = [0, 1, 0]
propensity = "c12 / ((65 + x1^2) * (65 + x3^2))"
[[reactions]]
name = "alpha3"
change = [0, 0, 1]
propensity = "c13 / ((65 + x1^2) * (65 + x2^2))"
[[reactions]]
name = "alpha4"
change = [-1, 0, 0]
propensity = "c4 * x1"
[[reactions]]
name = "alpha5"
change = [0, -1, 0]
propensity = "c5 * x2"
[[reactions]]
name = "alpha6"
change = [0, 0, -1]
propensity = "c6 * x3"
"#;

    #[test]
    fn file_matches_builtin_toggle() {
        let from_file = parse_model_file(TOGGLE).unwrap().generator().unwrap();
        let Model::Reaction(net) = builtin_model("toggle3d").unwrap() else { panic!() };
        let builtin = net.generator().unwrap();
        assert_eq!(from_file.len(), builtin.len());
        for i in 0..builtin.len() {
            let a: Vec<_> = from_file.out(i).collect();
            let b: Vec<_> = builtin.out(i).collect();
            assert_eq!(a.len(), b.len());
            for ((ja, ra), (jb, rb)) in a.iter().zip(&b) {
                assert_eq!(ja, jb);
                assert!((ra - rb).abs() <= 1e-12 * rb.abs());
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = TOGGLE.replace("name = \"toggle\"", "nmae = \"toggle\"");
        let err = parse_model_file(&text).unwrap_err();
        assert!(err.to_string().contains("nmae"), "{err}");
    }

    #[test]
    fn axis_needs_max_or_points() {
        let text = TOGGLE.replacen("points = 16", "points = 16\nmax = 45", 1);
        assert!(matches!(parse_model_file(&text), Err(Error::Validation { .. })));
    }
}
