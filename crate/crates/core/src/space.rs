//! Finite product spaces over variables, with row-major mixed-radix indexing.

use crate::error::{Error, Result};
use crate::infostruct::{InfoSchema, VarKind, VariableId};

/// A coordinate of a joint realization. `State` sorts before every variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coord {
    State,
    Var(VariableId),
}

/// Alphabet sizes of the state and of every agent's controls and observations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cardinalities {
    pub state: usize,
    pub controls: Vec<usize>,
    pub observations: Vec<usize>,
}

impl Cardinalities {
    pub fn of(&self, c: &Coord) -> usize {
        match c {
            Coord::State => self.state,
            Coord::Var(v) => self.of_var(v),
        }
    }

    pub fn of_var(&self, v: &VariableId) -> usize {
        match v.kind {
            VarKind::Observation => self.observations[v.agent],
            VarKind::Control => self.controls[v.agent],
        }
    }
}

/// Ordered coordinates with their radices. Index 0 is the all-zero realization and
/// the first coordinate is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    coords: Vec<Coord>,
    radices: Vec<usize>,
    size: usize,
}

impl Space {
    pub fn new(coords: Vec<Coord>, card: &Cardinalities) -> Self {
        let radices: Vec<usize> = coords.iter().map(|c| card.of(c)).collect();
        let size = radices.iter().product();
        Space { coords, radices, size }
    }

    pub fn of_schema(schema: &InfoSchema, card: &Cardinalities) -> Self {
        Self::new(schema.iter().map(|v| Coord::Var(*v)).collect(), card)
    }

    /// `X_t` followed by the schema's variables.
    pub fn with_state(schema: &InfoSchema, card: &Cardinalities) -> Self {
        let mut coords = vec![Coord::State];
        coords.extend(schema.iter().map(|v| Coord::Var(*v)));
        Self::new(coords, card)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dims(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn position(&self, c: &Coord) -> Option<usize> {
        self.coords.iter().position(|x| x == c)
    }

    pub fn encode(&self, values: &[usize]) -> usize {
        debug_assert_eq!(values.len(), self.radices.len());
        values.iter().zip(&self.radices).fold(0, |acc, (&v, &r)| acc * r + v)
    }

    pub fn checked_encode(&self, values: &[usize]) -> Result<usize> {
        if values.len() != self.radices.len() {
            return Err(Error::SchemaMismatch {
                what: format!("expected {} coordinates, got {}", self.radices.len(), values.len()),
            });
        }
        for (c, (&v, &r)) in self.coords.iter().zip(values.iter().zip(&self.radices)) {
            if v >= r {
                return Err(Error::OutOfRange { what: format!("{c:?}"), value: v, size: r });
            }
        }
        Ok(self.encode(values))
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = index % r;
            index /= r;
        }
        out
    }

    /// Positions in `self` of each coordinate of `sub`, which must be a sub-space.
    pub fn projector(&self, sub: &Space) -> Result<Vec<usize>> {
        sub.coords
            .iter()
            .map(|c| {
                self.position(c).ok_or_else(|| Error::SchemaMismatch {
                    what: format!("coordinate {c:?} missing from the enclosing space"),
                })
            })
            .collect()
    }

    /// Encodes the restriction of `values` (a realization of the enclosing space)
    /// through a projector computed with [`Space::projector`].
    pub fn encode_projected(&self, values: &[usize], projector: &[usize]) -> usize {
        projector.iter().zip(&self.radices).fold(0, |acc, (&p, &r)| acc * r + values[p])
    }
}
