//! Reaction networks on a truncated, coarse-grained lattice.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::markov::{Generator, GridAxis, StateSpace};
use crate::models::expr::{BoundExpr, Expr};
use crate::models::Region;

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub name: String,
    /// Stoichiometric change per species, in molecule counts.
    pub change: Vec<i64>,
    pub expr: Expr,
    propensity: BoundExpr,
}

impl Reaction {
    pub fn new(
        name: impl Into<String>,
        change: Vec<i64>,
        propensity: &str,
        species: &[String],
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let name = name.into();
        if change.len() != species.len() {
            return Err(Error::Shape(format!(
                "reaction {name}: change vector has {} entries for {} species",
                change.len(),
                species.len()
            )));
        }
        if change.iter().all(|&c| c == 0) {
            return Err(Error::validation(format!("reactions.{name}.change"), "must be nonzero"));
        }
        let expr = Expr::parse(propensity)?;
        let bound = expr.bind(species, constants)?;
        Ok(Reaction { name, change, expr, propensity: bound })
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        self.propensity.eval(x)
    }
}

/// One lattice jump produced by a reaction: integer offset and the factor applied to the
/// propensity.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMove {
    pub offset: Vec<isize>,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    pub name: String,
    pub species: Vec<String>,
    pub axes: Vec<GridAxis>,
    pub reactions: Vec<Reaction>,
    pub reactant: Region,
    pub product: Region,
    /// Rate of the jumps added to each absorbing reactant state, toward every in-box lattice
    /// neighbour. `None` leaves absorbing states untouched.
    pub reactant_exit_rate: Option<f64>,
    /// Keep only the communicating class of the reactant (states reachable from it that can
    /// also return). This splits off slices fixed by conservation laws and traps created where
    /// truncation removes every way back.
    pub restrict_to_reactant_class: bool,
}

impl ReactionNetwork {
    pub fn state_space(&self) -> Result<StateSpace> {
        StateSpace::new(self.axes.clone())
    }

    /// Lattice moves of one reaction.
    ///
    /// Along coordinate `k`, a change of `d_k` molecules on an axis of step `h_k` has ratio
    /// `r_k = |d_k| / h_k`. A ratio of at most one becomes a single step taken at `r_k` times
    /// the propensity, so the mean drift is preserved; an integral ratio above one becomes an
    /// exact multi-step jump. When several coordinates move, one diagonal jump carries the
    /// smallest factor and each coordinate with a larger factor gets an extra axial jump
    /// making up the difference.
    pub fn lattice_moves(&self, reaction: &Reaction) -> Result<Vec<LatticeMove>> {
        let off_lattice = || Error::OffLattice { reaction: reaction.name.clone() };
        let mut steps = vec![0isize; self.axes.len()];
        let mut factors = vec![0.0; self.axes.len()];
        for (k, (&d, axis)) in reaction.change.iter().zip(&self.axes).enumerate() {
            if d == 0 {
                continue;
            }
            let ratio = d.unsigned_abs() as f64 / axis.step;
            let sign = d.signum() as isize;
            if ratio <= 1.0 + 1e-12 {
                steps[k] = sign;
                factors[k] = ratio.min(1.0);
            } else if (ratio - ratio.round()).abs() <= 1e-9 * ratio {
                steps[k] = sign * ratio.round() as isize;
                factors[k] = 1.0;
            } else {
                return Err(off_lattice());
            }
        }
        let moving: Vec<usize> = (0..steps.len()).filter(|&k| steps[k] != 0).collect();
        let base = moving.iter().map(|&k| factors[k]).fold(f64::INFINITY, f64::min);
        if !(base > 0.0) || !base.is_finite() {
            return Err(off_lattice());
        }
        let mut moves = vec![LatticeMove { offset: steps.clone(), factor: base }];
        if moving.len() > 1 {
            for &k in &moving {
                let extra = factors[k] - base;
                if extra > 1e-15 {
                    let mut offset = vec![0isize; steps.len()];
                    offset[k] = steps[k];
                    moves.push(LatticeMove { offset, factor: extra });
                }
            }
        }
        Ok(moves)
    }

    pub fn generator(&self) -> Result<Generator> {
        reaction_generator(self)
    }
}

/// Compiles a reaction network into a generator on its truncated lattice.
///
/// Every state `x` and reaction `r` contribute `a_r(x) * factor` to the edge toward
/// `x + offset` for each lattice move of `r`. Jumps leaving the box are dropped.
/// With `restrict_to_reactant_class`, the product must lie in the reactant's class.
pub fn reaction_generator(net: &ReactionNetwork) -> Result<Generator> {
    let space = Arc::new(net.state_space()?);
    if net.species.len() != space.dim() {
        return Err(Error::Shape(format!("{} species for a {}-dimensional lattice", net.species.len(), space.dim())));
    }
    let moves: Vec<Vec<LatticeMove>> = net.reactions.iter().map(|r| net.lattice_moves(r)).collect::<Result<_>>()?;
    let reactant = net.reactant.resolve(&space, "reactant")?;

    let mut triplets = Vec::new();
    let mut exit = vec![0.0; space.len()];
    for id in 0..space.len() {
        let x = space.coords(id);
        for (reaction, rmoves) in net.reactions.iter().zip(&moves) {
            let a = reaction.propensity(&x);
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::NegativePropensity { reaction: reaction.name.clone(), state: id, value: a });
            }
            if a == 0.0 {
                continue;
            }
            for m in rmoves {
                if let Some(to) = space.shifted(id, &m.offset) {
                    triplets.push((id, to, a * m.factor));
                    exit[id] += a * m.factor;
                }
            }
        }
    }
    if let Some(rate) = net.reactant_exit_rate {
        if !(rate > 0.0) {
            return Err(Error::validation("reactant_exit_rate", "must be positive"));
        }
        for &id in &reactant {
            if exit[id] > 0.0 {
                continue;
            }
            for k in 0..space.dim() {
                for sign in [1isize, -1] {
                    let mut offset = vec![0isize; space.dim()];
                    offset[k] = sign;
                    if let Some(to) = space.shifted(id, &offset) {
                        triplets.push((id, to, rate));
                    }
                }
            }
        }
    }
    let gen = Generator::from_triplets(space, triplets)?;
    if !net.restrict_to_reactant_class {
        return Ok(gen);
    }
    let forward = gen.reachable_from(&reactant);
    let backward = gen.can_reach(&reactant);
    let keep: Vec<bool> = forward.iter().zip(&backward).map(|(&f, &b)| f && b).collect();
    let product = net.product.resolve(gen.space(), "product")?;
    if !product.iter().any(|&b| keep[b]) {
        return Err(Error::validation("product", "does not communicate with the reactant"));
    }
    Ok(gen.restrict(&keep)?.0)
}
