//! Lattice state spaces with dense, row-major state ids.

use crate::error::{Error, Result};

const COMMENSURATE_TOL: f64 = 1e-9;
const NONE: usize = usize::MAX;

/// One coordinate of a regular lattice: `min, min + step, ..., min + (points - 1) * step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub step: f64,
    pub points: usize,
}

impl GridAxis {
    /// Axis covering `[min, max]` with spacing `step`; the bounds must be commensurate with it.
    pub fn from_bounds(min: f64, max: f64, step: f64) -> Result<Self> {
        Self::from_bounds_on(0, min, max, step)
    }

    fn from_bounds_on(axis: usize, min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("axis {axis}: step must be positive, got {step}")));
        }
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidGrid(format!("axis {axis}: need min < max, got [{min}, {max}]")));
        }
        let intervals = (max - min) / step;
        let rounded = intervals.round();
        if (intervals - rounded).abs() > COMMENSURATE_TOL * rounded.max(1.0) {
            return Err(Error::NonIntegralGrid { axis, min, max, step });
        }
        Ok(GridAxis { min, step, points: rounded as usize + 1 })
    }

    /// Axis with an explicit point count, for grids whose nominal size differs from the
    /// bounds (e.g. "15 x 15 x 15" over `[0, 45]` with step 3, which really has 16 points).
    pub fn with_points(min: f64, step: f64, points: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() || points == 0 || !min.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "axis needs finite min, positive step and points >= 1 (min {min}, step {step}, points {points})"
            )));
        }
        Ok(GridAxis { min, step, points })
    }

    pub fn max(&self) -> f64 {
        self.value(self.points - 1)
    }

    pub fn value(&self, k: usize) -> f64 {
        self.min + k as f64 * self.step
    }

    /// Lattice index of `x` if it sits on the axis (to within a millionth of a step).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.min) / self.step;
        let k = t.round();
        if (t - k).abs() > 1e-6 || k < 0.0 || k >= self.points as f64 {
            return None;
        }
        Some(k as usize)
    }
}

/// A finite lattice, optionally with some points removed, and a bijection between the
/// remaining points and ids `0..len()`.
///
/// Ids follow row-major order over the lattice (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    axes: Vec<GridAxis>,
    strides: Vec<usize>,
    id_to_flat: Vec<usize>,
    flat_to_id: Vec<usize>,
}

impl StateSpace {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        Self::with_filter(axes, |_| true)
    }

    /// Builds a grid from `(min, max, step)` triples.
    pub fn from_bounds(spec: &[(f64, f64, f64)]) -> Result<Self> {
        let axes = spec
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi, h))| GridAxis::from_bounds_on(i, lo, hi, h))
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }

    /// Lattice restricted to points for which `keep(coords)` holds.
    pub fn with_filter(axes: Vec<GridAxis>, keep: impl Fn(&[f64]) -> bool) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("state space needs at least one axis".into()));
        }
        let mut strides = vec![1usize; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1]
                .checked_mul(axes[k + 1].points)
                .ok_or_else(|| Error::InvalidGrid("lattice too large".into()))?;
        }
        let total = strides[0]
            .checked_mul(axes[0].points)
            .ok_or_else(|| Error::InvalidGrid("lattice too large".into()))?;

        let mut id_to_flat = Vec::new();
        let mut flat_to_id = vec![NONE; total];
        let mut point = vec![0.0; axes.len()];
        for (flat, slot) in flat_to_id.iter_mut().enumerate() {
            let mut rem = flat;
            for (k, axis) in axes.iter().enumerate() {
                point[k] = axis.value(rem / strides[k]);
                rem %= strides[k];
            }
            if keep(&point) {
                *slot = id_to_flat.len();
                id_to_flat.push(flat);
            }
        }
        if id_to_flat.len() < 2 {
            return Err(Error::InvalidGrid(format!("state space has {} states; need more than one", id_to_flat.len())));
        }
        Ok(StateSpace { axes, strides, id_to_flat, flat_to_id })
    }

    /// Sub-space keeping the states flagged in `keep`; returns the old-id to new-id map.
    pub fn restrict(&self, keep: &[bool]) -> Result<(StateSpace, Vec<Option<usize>>)> {
        if keep.len() != self.len() {
            return Err(Error::Shape(format!("mask has {} entries for {} states", keep.len(), self.len())));
        }
        let mut map = vec![None; self.len()];
        let mut id_to_flat = Vec::new();
        let mut flat_to_id = vec![NONE; self.flat_to_id.len()];
        for (old, &flat) in self.id_to_flat.iter().enumerate() {
            if keep[old] {
                map[old] = Some(id_to_flat.len());
                flat_to_id[flat] = id_to_flat.len();
                id_to_flat.push(flat);
            }
        }
        if id_to_flat.len() < 2 {
            return Err(Error::InvalidGrid("restriction leaves fewer than two states".into()));
        }
        let space = StateSpace { axes: self.axes.clone(), strides: self.strides.clone(), id_to_flat, flat_to_id };
        Ok((space, map))
    }

    pub fn len(&self) -> usize {
        self.id_to_flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_flat.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    /// Number of lattice points before any removal.
    pub fn lattice_size(&self) -> usize {
        self.flat_to_id.len()
    }

    pub fn lattice_index(&self, id: usize) -> Vec<usize> {
        let mut rem = self.id_to_flat[id];
        self.strides
            .iter()
            .map(|&s| {
                let k = rem / s;
                rem %= s;
                k
            })
            .collect()
    }

    pub fn coords(&self, id: usize) -> Vec<f64> {
        self.lattice_index(id).iter().zip(&self.axes).map(|(&k, a)| a.value(k)).collect()
    }

    pub fn id_at(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.axes.len() {
            return None;
        }
        let mut flat = 0;
        for ((&k, axis), &s) in index.iter().zip(&self.axes).zip(&self.strides) {
            if k >= axis.points {
                return None;
            }
            flat += k * s;
        }
        match self.flat_to_id[flat] {
            NONE => None,
            id => Some(id),
        }
    }

    /// Id of the state whose coordinates equal `point` (on-lattice points only).
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.axes.len() {
            return None;
        }
        let index = point.iter().zip(&self.axes).map(|(&x, a)| a.index_of(x)).collect::<Option<Vec<_>>>()?;
        self.id_at(&index)
    }

    /// Id of the state displaced from `id` by `offset` lattice steps, if it exists.
    pub fn shifted(&self, id: usize, offset: &[isize]) -> Option<usize> {
        let index = self.lattice_index(id);
        let moved = index
            .iter()
            .zip(offset)
            .map(|(&k, &d)| {
                let m = k as isize + d;
                (m >= 0).then_some(m as usize)
            })
            .collect::<Option<Vec<_>>>()?;
        self.id_at(&moved)
    }

    /// Coordinates affinely rescaled so each axis spans `[-1, 1]`.
    pub fn unit_coords(&self, id: usize) -> Vec<f64> {
        self.lattice_index(id)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| if a.points > 1 { 2.0 * k as f64 / (a.points - 1) as f64 - 1.0 } else { 0.0 })
            .collect()
    }
}
