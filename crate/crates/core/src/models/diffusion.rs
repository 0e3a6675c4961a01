//! Birth-death discretization of two-dimensional overdamped diffusion
//! `dX = -grad V(X) dt + dW` on a rectangle, optionally with reflecting walls.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::markov::{Generator, GridAxis, StateSpace};

const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `V = (x^2 - 1)^2 + epsilon y^4`.
    DoubleWell { epsilon: f64 },
    /// `V = 0`.
    Flat,
}

impl Potential {
    /// Analytic gradient `(dV/dx, dV/dy)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            Potential::DoubleWell { epsilon } => (4.0 * x * (x * x - 1.0), 4.0 * epsilon * y * y * y),
            Potential::Flat => (0.0, 0.0),
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match *self {
            Potential::DoubleWell { epsilon } => (x * x - 1.0).powi(2) + epsilon * y.powi(4),
            Potential::Flat => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Along x at fixed y.
    Horizontal,
    /// Along y at fixed x.
    Vertical,
}

/// Axis-aligned wall segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub orientation: Orientation,
    /// Fixed coordinate of the wall line.
    pub at: f64,
    pub from: f64,
    pub to: f64,
}

impl Wall {
    pub fn horizontal(y: f64, x_from: f64, x_to: f64) -> Wall {
        Wall { orientation: Orientation::Horizontal, at: y, from: x_from.min(x_to), to: x_from.max(x_to) }
    }

    pub fn vertical(x: f64, y_from: f64, y_to: f64) -> Wall {
        Wall { orientation: Orientation::Vertical, at: x, from: y_from.min(y_to), to: y_from.max(y_to) }
    }

    fn split(&self, p: [f64; 2]) -> (f64, f64) {
        match self.orientation {
            Orientation::Horizontal => (p[1], p[0]),
            Orientation::Vertical => (p[0], p[1]),
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (across, along) = self.split(p);
        (across - self.at).abs() <= GEOM_TOL && along >= self.from - GEOM_TOL && along <= self.to + GEOM_TOL
    }

    /// Whether the segment `p -> q` passes through the wall.
    pub fn blocks(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        if self.contains(p) || self.contains(q) {
            return true;
        }
        let (a0, b0) = self.split(p);
        let (a1, b1) = self.split(q);
        let (d0, d1) = (a0 - self.at, a1 - self.at);
        if d0 * d1 >= 0.0 {
            return false;
        }
        let t = d0 / (d0 - d1);
        let along = b0 + t * (b1 - b0);
        along >= self.from - GEOM_TOL && along <= self.to + GEOM_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub potential: Potential,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub h: f64,
    pub walls: Vec<Wall>,
    pub reactant: [f64; 2],
    pub product: [f64; 2],
    /// Rate of every jump out of `A` and out of `B`; `None` means `1/h`.
    pub endpoint_exit_rate: Option<f64>,
}

impl DiffusionModel {
    pub fn validate(&self) -> Result<()> {
        if let Potential::DoubleWell { epsilon } = self.potential {
            if !(epsilon >= 0.0) {
                return Err(Error::validation("epsilon", "must be >= 0"));
            }
        }
        if !(self.h > 0.0) {
            return Err(Error::validation("h", "must be positive"));
        }
        for (name, p) in [("reactant", self.reactant), ("product", self.product)] {
            let inside = p[0] >= self.x_range.0 - GEOM_TOL
                && p[0] <= self.x_range.1 + GEOM_TOL
                && p[1] >= self.y_range.0 - GEOM_TOL
                && p[1] <= self.y_range.1 + GEOM_TOL;
            if !inside {
                return Err(Error::validation(name, "must lie inside the domain"));
            }
            if self.walls.iter().any(|w| w.contains(p)) {
                return Err(Error::validation(name, "must not lie on a wall"));
            }
        }
        Ok(())
    }

    pub fn state_space(&self) -> Result<StateSpace> {
        let axes = vec![
            GridAxis::from_bounds(self.x_range.0, self.x_range.1, self.h)?,
            GridAxis::from_bounds(self.y_range.0, self.y_range.1, self.h)?,
        ];
        StateSpace::with_filter(axes, |p| !self.walls.iter().any(|w| w.contains([p[0], p[1]])))
    }

    fn base(&self) -> f64 {
        1.0 / (2.0 * self.h * self.h)
    }

    /// `k_x^+(x, y) = 1/(2h^2) - dV/dx(x - h, y) / (2h)`: rate of the jump into `(x, y)` from the left.
    pub fn k_x_plus(&self, x: f64, y: f64) -> f64 {
        self.base() - self.potential.gradient(x - self.h, y).0 / (2.0 * self.h)
    }

    /// `k_x^-(x, y) = 1/(2h^2) + dV/dx(x + h, y) / (2h)`: rate of the jump into `(x, y)` from the right.
    pub fn k_x_minus(&self, x: f64, y: f64) -> f64 {
        self.base() + self.potential.gradient(x + self.h, y).0 / (2.0 * self.h)
    }

    pub fn k_y_plus(&self, x: f64, y: f64) -> f64 {
        self.base() - self.potential.gradient(x, y - self.h).1 / (2.0 * self.h)
    }

    pub fn k_y_minus(&self, x: f64, y: f64) -> f64 {
        self.base() + self.potential.gradient(x, y + self.h).1 / (2.0 * self.h)
    }

    /// Generator whose action is
    /// `(Lf)(x,y) = k_x^+(x+h,y) (f(x+h,y) - f) + k_x^-(x-h,y) (f(x-h,y) - f) + (same in y)`.
    /// Jumps leaving the domain or crossing a wall are removed; every jump out of `A` or `B`
    /// runs at the endpoint exit rate.
    pub fn generator(&self) -> Result<Generator> {
        self.validate()?;
        let space = Arc::new(self.state_space()?);
        let h = self.h;
        let a = space.locate(&self.reactant);
        let b = space.locate(&self.product);
        if a.is_none() || b.is_none() {
            return Err(Error::validation("reactant/product", "must be lattice points"));
        }
        let endpoint_rate = self.endpoint_exit_rate.unwrap_or(1.0 / h);

        let mut triplets = Vec::with_capacity(space.len() * 4);
        for id in 0..space.len() {
            let c = space.coords(id);
            let (x, y) = (c[0], c[1]);
            let moves = [
                ([1isize, 0], self.k_x_plus(x + h, y)),
                ([-1, 0], self.k_x_minus(x - h, y)),
                ([0, 1], self.k_y_plus(x, y + h)),
                ([0, -1], self.k_y_minus(x, y - h)),
            ];
            for (offset, rate) in moves {
                let Some(to) = space.shifted(id, &offset) else { continue };
                let q = space.coords(to);
                if self.walls.iter().any(|w| w.blocks([x, y], [q[0], q[1]])) {
                    continue;
                }
                let rate = if Some(id) == a || Some(id) == b { endpoint_rate } else { rate };
                if !(rate >= 0.0) {
                    return Err(Error::DegenerateGrid { state: id, rate });
                }
                triplets.push((id, to, rate));
            }
        }
        Generator::from_triplets(space, triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::stationary_distribution;

    fn double_well(epsilon: f64) -> DiffusionModel {
        DiffusionModel {
            potential: Potential::DoubleWell { epsilon },
            x_range: (-1.0, 1.0),
            y_range: (-0.75, 0.75),
            h: 0.05,
            walls: vec![],
            reactant: [-1.0, 0.0],
            product: [1.0, 0.0],
            endpoint_exit_rate: None,
        }
    }

    #[test]
    fn rate_at_origin_matches_hand_value() {
        // dV/dx(-0.05) = 4 (-0.05) (0.0025 - 1) = 0.1995; 200 - 10 * 0.1995 = 198.005
        let m = double_well(0.01);
        assert!((m.k_x_plus(0.0, 0.0) - 198.005).abs() < 1e-9);
        let g = m.generator().unwrap();
        let from = g.space().locate(&[-0.05, 0.0]).unwrap();
        let to = g.space().locate(&[0.0, 0.0]).unwrap();
        assert!((g.rate(from, to) - 198.005).abs() < 1e-9);
    }

    #[test]
    fn flat_potential_has_uniform_interior_rates() {
        let mut m = double_well(0.0);
        m.potential = Potential::Flat;
        let g = m.generator().unwrap();
        let a = g.space().locate(&m.reactant).unwrap();
        let b = g.space().locate(&m.product).unwrap();
        for i in 0..g.len() {
            for (j, r) in g.out(i) {
                if i == a || i == b {
                    assert!((r - 20.0).abs() < 1e-12);
                } else {
                    assert!((r - 200.0).abs() < 1e-9);
                    if j != a && j != b {
                        assert_eq!(r, g.rate(j, i));
                    }
                }
            }
        }
    }

    #[test]
    fn generator_is_valid() {
        let g = double_well(1.0).generator().unwrap();
        assert_eq!(g.len(), 1271);
        assert!(g.max_row_sum_error() <= 1e-12);
        assert!((0..g.len()).all(|i| g.out(i).all(|(_, r)| r >= 0.0)));
    }

    #[test]
    fn stationary_is_mirror_symmetric() {
        let g = double_well(0.01).generator().unwrap();
        let pi = stationary_distribution(&g).unwrap();
        let s = g.space();
        for i in 0..g.len() {
            let c = s.coords(i);
            let m = s.locate(&[-c[0], c[1]]).unwrap();
            let flip = s.locate(&[c[0], -c[1]]).unwrap();
            assert!((pi[i] - pi[m]).abs() <= 1e-8 * pi[i].max(pi[m]));
            assert!((pi[i] - pi[flip]).abs() <= 1e-8 * pi[i].max(pi[flip]));
        }
    }

    #[test]
    fn coarse_grid_with_steep_drift_is_degenerate() {
        let mut m = double_well(1.0);
        m.x_range = (-2.0, 2.0);
        m.y_range = (-2.0, 2.0);
        m.h = 0.5;
        m.reactant = [-1.0, 0.0];
        m.product = [1.0, 0.0];
        assert!(matches!(m.generator(), Err(Error::DegenerateGrid { .. })));
    }

    #[test]
    fn walls_remove_nodes_and_block_edges() {
        let w = Wall::horizontal(0.4, -0.8, 1.0);
        assert!(w.contains([0.0, 0.4]));
        assert!(!w.contains([-0.9, 0.4]));
        assert!(w.blocks([0.0, 0.35], [0.0, 0.45]));
        assert!(!w.blocks([-0.9, 0.35], [-0.9, 0.45]));
        assert!(!w.blocks([0.0, 0.45], [0.1, 0.45]));
        let v = Wall::vertical(0.0, -1.0, 0.0);
        assert!(v.blocks([-0.05, -0.5], [0.05, -0.5]));
        assert!(!v.blocks([-0.05, 0.5], [0.05, 0.5]));
    }

    #[test]
    fn reactant_on_wall_rejected() {
        let mut m = double_well(1.0);
        m.walls = vec![Wall::vertical(-1.0, -0.5, 0.5)];
        assert!(m.validate().is_err());
        m.walls.clear();
        m.epsilon_negative_check();
    }

    impl DiffusionModel {
        fn epsilon_negative_check(&mut self) {
            self.potential = Potential::DoubleWell { epsilon: -1.0 };
            assert!(self.validate().is_err());
        }
    }
}
