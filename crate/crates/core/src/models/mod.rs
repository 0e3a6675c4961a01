//! Built-in example systems and the model-to-generator compilers.

mod diffusion;
pub mod expr;
pub(crate) mod file;
mod reaction;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use diffusion::{DiffusionModel, Orientation, Potential, Wall};
pub use file::{load_model_file, parse_model_file};
pub use reaction::{reaction_generator, LatticeMove, Reaction, ReactionNetwork};

use crate::error::{Error, Result};
use crate::markov::{Generator, GridAxis, StateSpace};
use crate::tpt::ReactantProductSpec;

/// A reactant or product set given in physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Point(Vec<f64>),
    /// Inclusive `[lo, hi]` per coordinate.
    Box(Vec<(f64, f64)>),
}

impl Region {
    /// State ids inside the region; empty results are an error.
    pub fn resolve(&self, space: &StateSpace, what: &str) -> Result<Vec<usize>> {
        let ids: Vec<usize> = match self {
            Region::Point(p) => {
                if p.len() != space.dim() {
                    return Err(Error::validation(what, format!("needs {} coordinates, got {}", space.dim(), p.len())));
                }
                space.locate(p).into_iter().collect()
            }
            Region::Box(b) => {
                if b.len() != space.dim() {
                    return Err(Error::validation(what, format!("needs {} intervals, got {}", space.dim(), b.len())));
                }
                (0..space.len())
                    .filter(|&id| {
                        space.coords(id).iter().zip(b).all(|(&x, &(lo, hi))| x >= lo - 1e-9 && x <= hi + 1e-9)
                    })
                    .collect()
            }
        };
        if ids.is_empty() {
            return Err(Error::validation(what, "contains no lattice state"));
        }
        Ok(ids)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Diffusion(DiffusionModel),
    Reaction(ReactionNetwork),
}

impl Model {
    pub fn generator(&self) -> Result<Generator> {
        match self {
            Model::Diffusion(m) => m.generator(),
            Model::Reaction(n) => n.generator(),
        }
    }

    pub fn reactant(&self) -> Region {
        match self {
            Model::Diffusion(m) => Region::Point(m.reactant.to_vec()),
            Model::Reaction(n) => n.reactant.clone(),
        }
    }

    pub fn product(&self) -> Region {
        match self {
            Model::Diffusion(m) => Region::Point(m.product.to_vec()),
            Model::Reaction(n) => n.product.clone(),
        }
    }

    /// Resolves `A` and `B` against the generator's state space.
    pub fn reactant_product(&self, space: &StateSpace) -> Result<ReactantProductSpec> {
        let a = self.reactant().resolve(space, "reactant")?;
        let b = self.product().resolve(space, "product")?;
        ReactantProductSpec::new(a, b)
    }

    pub fn set_reactant(&mut self, region: Region) -> Result<()> {
        match self {
            Model::Diffusion(m) => m.reactant = point2(region, "reactant")?,
            Model::Reaction(n) => n.reactant = region,
        }
        Ok(())
    }

    pub fn set_product(&mut self, region: Region) -> Result<()> {
        match self {
            Model::Diffusion(m) => m.product = point2(region, "product")?,
            Model::Reaction(n) => n.product = region,
        }
        Ok(())
    }
}

fn point2(region: Region, what: &str) -> Result<[f64; 2]> {
    match region {
        Region::Point(p) if p.len() == 2 => Ok([p[0], p[1]]),
        _ => Err(Error::validation(what, "diffusion models take a single 2-D point")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinModel {
    DoubleWell,
    EntropicBarriers,
    Toggle3d,
    Virus,
    Sigma32,
}

impl BuiltinModel {
    pub const ALL: [BuiltinModel; 5] = [
        BuiltinModel::DoubleWell,
        BuiltinModel::EntropicBarriers,
        BuiltinModel::Toggle3d,
        BuiltinModel::Virus,
        BuiltinModel::Sigma32,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::DoubleWell => "double-well",
            BuiltinModel::EntropicBarriers => "entropic-barriers",
            BuiltinModel::Toggle3d => "toggle3d",
            BuiltinModel::Virus => "virus",
            BuiltinModel::Sigma32 => "sigma32",
        }
    }

    pub fn default_clusters(self) -> usize {
        match self {
            BuiltinModel::Virus => 5,
            BuiltinModel::Sigma32 => 4,
            _ => 3,
        }
    }

    pub fn default_embedding_dim(self) -> usize {
        match self {
            BuiltinModel::Sigma32 => 3,
            _ => 2,
        }
    }

    pub fn build(self, opts: &BuiltinOptions) -> Result<Model> {
        match self {
            BuiltinModel::DoubleWell => double_well(opts),
            BuiltinModel::EntropicBarriers => entropic_barriers(opts),
            BuiltinModel::Toggle3d => toggle3d(opts),
            BuiltinModel::Virus => virus(opts),
            BuiltinModel::Sigma32 => sigma32(opts),
        }
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BuiltinModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// Parameter overrides for the built-in models. Unset fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuiltinOptions {
    pub epsilon: Option<f64>,
    pub h: Option<f64>,
    pub axes: Option<Vec<GridAxis>>,
    /// Width of the openings in the entropic-barrier walls.
    pub gap_width: Option<f64>,
    /// Values of the last three sigma32 species at `B` (E, E-sigma32, sigma32-J_comp).
    pub product_tail: Option<Vec<f64>>,
}

/// Built-in model with default parameters.
pub fn builtin_model(name: &str) -> Result<Model> {
    name.parse::<BuiltinModel>()?.build(&BuiltinOptions::default())
}

fn reject_axes(opts: &BuiltinOptions, model: &str) -> Result<()> {
    if opts.axes.is_some() {
        return Err(Error::validation("overrides.axes", format!("not used by {model}; set h instead")));
    }
    Ok(())
}

fn reject_h(opts: &BuiltinOptions, model: &str) -> Result<()> {
    if opts.h.is_some() {
        return Err(Error::validation("overrides.h", format!("not used by {model}; set axes instead")));
    }
    Ok(())
}

fn double_well(opts: &BuiltinOptions) -> Result<Model> {
    reject_axes(opts, "double-well")?;
    let m = DiffusionModel {
        potential: Potential::DoubleWell { epsilon: opts.epsilon.unwrap_or(0.01) },
        x_range: (-1.0, 1.0),
        y_range: (-0.75, 0.75),
        h: opts.h.unwrap_or(0.05),
        walls: vec![],
        reactant: [-1.0, 0.0],
        product: [1.0, 0.0],
        endpoint_exit_rate: None,
    };
    m.validate()?;
    Ok(Model::Diffusion(m))
}

/// Two horizontal walls at `y = +-0.4` spanning the box except one opening each: the top
/// opening at the left edge, the bottom one at the right edge.
pub fn entropic_walls(gap: f64) -> Vec<Wall> {
    vec![Wall::horizontal(0.4, -1.0 + gap, 1.0), Wall::horizontal(-0.4, -1.0, 1.0 - gap)]
}

fn entropic_barriers(opts: &BuiltinOptions) -> Result<Model> {
    reject_axes(opts, "entropic-barriers")?;
    if opts.epsilon.is_some() {
        return Err(Error::validation("overrides.epsilon", "entropic-barriers has no potential"));
    }
    let gap = opts.gap_width.unwrap_or(0.2);
    if !(gap > 0.0 && gap < 2.0) {
        return Err(Error::validation("overrides.gap_width", "must lie in (0, 2)"));
    }
    let m = DiffusionModel {
        potential: Potential::Flat,
        x_range: (-1.0, 1.0),
        y_range: (-1.0, 1.0),
        h: opts.h.unwrap_or(0.1),
        walls: entropic_walls(gap),
        reactant: [0.6, 0.6],
        product: [-0.6, -0.6],
        endpoint_exit_rate: None,
    };
    m.validate()?;
    Ok(Model::Diffusion(m))
}

fn reaction_opts_check(opts: &BuiltinOptions, model: &str) -> Result<()> {
    reject_h(opts, model)?;
    if opts.epsilon.is_some() || opts.gap_width.is_some() {
        return Err(Error::validation("overrides", format!("{model} takes only axes, reactant, product")));
    }
    Ok(())
}

fn network(
    name: &str,
    species: &[&str],
    constants: &[(&str, f64)],
    reactions: &[(&str, Vec<i64>, &str)],
    axes: Vec<GridAxis>,
    reactant: Region,
    product: Region,
) -> Result<ReactionNetwork> {
    let species: Vec<String> = species.iter().map(|s| s.to_string()).collect();
    let constants: BTreeMap<String, f64> = constants.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let reactions = reactions
        .iter()
        .map(|(n, c, p)| Reaction::new(*n, c.clone(), p, &species, &constants))
        .collect::<Result<Vec<_>>>()?;
    if axes.len() != species.len() {
        return Err(Error::validation("overrides.axes", format!("{name} needs {} axes", species.len())));
    }
    Ok(ReactionNetwork {
        name: name.to_string(),
        species,
        axes,
        reactions,
        reactant,
        product,
        reactant_exit_rate: None,
        restrict_to_reactant_class: false,
    })
}

pub const TOGGLE_CONSTANTS: [(&str, f64); 6] =
    [("c11", 2112.5), ("c12", 845.0), ("c13", 4225.0), ("c4", 0.0125), ("c5", 0.005), ("c6", 0.025)];

/// Metastable boxes of the toggle switch: `A` high in `x1`, `B` high in `x2`, `C` high in `x3`.
pub fn toggle_region(high: usize) -> Region {
    Region::Box((0..3).map(|k| if k == high { (35.0, 45.0) } else { (0.0, 4.0) }).collect())
}

fn toggle3d(opts: &BuiltinOptions) -> Result<Model> {
    reaction_opts_check(opts, "toggle3d")?;
    let axes = match &opts.axes {
        Some(a) => a.clone(),
        None => vec![GridAxis::with_points(0.0, 3.0, 16)?; 3],
    };
    let net = network(
        "toggle3d",
        &["x1", "x2", "x3"],
        &TOGGLE_CONSTANTS,
        &[
            ("alpha1", vec![1, 0, 0], "c11 / ((65 + x2^2) * (65 + x3^2))"),
            ("alpha2", vec![0, 1, 0], "c12 / ((65 + x1^2) * (65 + x3^2))"),
            ("alpha3", vec![0, 0, 1], "c13 / ((65 + x1^2) * (65 + x2^2))"),
            ("alpha4", vec![-1, 0, 0], "c4 * x1"),
            ("alpha5", vec![0, -1, 0], "c5 * x2"),
            ("alpha6", vec![0, 0, -1], "c6 * x3"),
        ],
        axes,
        toggle_region(0),
        toggle_region(1),
    )?;
    Ok(Model::Reaction(net))
}

pub const VIRUS_CONSTANTS: [(&str, f64); 6] =
    [("k1", 0.25), ("k2", 0.25), ("k3", 1.0), ("k4", 7.5e-6), ("k5", 1000.0), ("k6", 1.99)];

fn virus(opts: &BuiltinOptions) -> Result<Model> {
    reaction_opts_check(opts, "virus")?;
    let axes = match &opts.axes {
        Some(a) => a.clone(),
        None => vec![
            GridAxis::from_bounds(0.0, 30.0, 3.0)?,
            GridAxis::from_bounds(0.0, 100.0, 10.0)?,
            GridAxis::from_bounds(0.0, 12000.0, 1000.0)?,
        ],
    };
    let mut net = network(
        "virus",
        &["tem", "gen", "struct"],
        &VIRUS_CONSTANTS,
        &[
            ("k1", vec![1, -1, 0], "k1 * gen"),
            ("k2", vec![-1, 0, 0], "k2 * tem"),
            ("k3", vec![0, 1, 0], "k3 * tem"),
            ("k4", vec![0, -1, -1], "k4 * gen * struct"),
            ("k5", vec![0, 0, 1], "k5 * tem"),
            ("k6", vec![0, 0, -1], "k6 * struct"),
        ],
        axes,
        Region::Point(vec![0.0, 0.0, 0.0]),
        Region::Point(vec![30.0, 100.0, 12000.0]),
    )?;
    // the origin has no reactions at all; give it an exit so the chain is irreducible
    net.reactant_exit_rate = Some(1.0);
    Ok(Model::Reaction(net))
}

pub const SIGMA32_SPECIES: [&str; 7] = ["FtsH", "GroEL", "sigma32", "J_comp", "E", "E_sigma32", "sigma32_J_comp"];

pub const SIGMA32_CONSTANTS: [(&str, f64); 10] = [
    ("k1", 7.4e-11),
    ("k2", 4.41e6),
    ("k3", 1.80e-8),
    ("k4", 5.69e6),
    ("k5", 3.27e5),
    ("k6", 4.4e-4),
    ("k7", 1.28e3),
    ("k8", 0.007),
    ("k9", 0.7),
    ("k10", 0.13),
];

fn sigma32(opts: &BuiltinOptions) -> Result<Model> {
    reaction_opts_check(opts, "sigma32")?;
    let tail = match &opts.product_tail {
        Some(t) if t.len() == 3 => t.clone(),
        Some(t) => {
            return Err(Error::validation("overrides.product_tail", format!("needs 3 values, got {}", t.len())));
        }
        None => {
            return Err(Error::MissingModelField {
                model: "sigma32".into(),
                fields: "overrides.product_tail = [E, E_sigma32, sigma32_J_comp] at B".into(),
            })
        }
    };
    let axes = match &opts.axes {
        Some(a) => a.clone(),
        None => {
            let mut a = vec![GridAxis::from_bounds(500.0, 900.0, 100.0)?; 4];
            a.extend(vec![GridAxis::from_bounds(1200.0, 1800.0, 100.0)?; 3]);
            a
        }
    };
    let mut product = vec![800.0; 4];
    product.extend(tail);
    let mut net = network(
        "sigma32",
        &SIGMA32_SPECIES,
        &SIGMA32_CONSTANTS,
        &[
            ("k1", vec![-1, 0, 0, 0, 0, 0, 0], "k1 * FtsH"),
            ("k2", vec![1, 0, 0, 0, 0, 0, 0], "k2 * E_sigma32"),
            ("k3", vec![0, -1, 0, 0, 0, 0, 0], "k3 * GroEL"),
            ("k4", vec![0, 1, 0, 0, 0, 0, 0], "k4 * E_sigma32"),
            ("k5", vec![0, 0, -1, -1, 0, 0, 1], "k5 * sigma32 * J_comp"),
            ("k6", vec![0, 0, 1, 1, 0, 0, -1], "k6 * sigma32_J_comp"),
            ("k7", vec![1, 0, 0, 0, 0, 0, 0], "k7 * sigma32_J_comp"),
            ("k8", vec![0, 0, 1, 0, 0, 0, 0], "k8"),
            ("k9", vec![0, 0, -1, 0, -1, 1, 0], "k9 * E * sigma32"),
            ("k10", vec![0, 0, 1, 0, 1, -1, 0], "k10 * E_sigma32"),
        ],
        axes,
        Region::Point(vec![600.0, 600.0, 600.0, 600.0, 1500.0, 1500.0, 1500.0]),
        Region::Point(product),
    )?;
    net.restrict_to_reactant_class = true;
    Ok(Model::Reaction(net))
}
