//! Problem instances shared by every solver in this crate.

use serde::{Deserialize, Serialize};

use crate::expr::Expression;
use crate::sets::UncertaintySet;

/// A point in Euclidean space with a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        crate::linalg::dist_sq(&self.0, &other.0)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.0)
    }

    /// self + c * other
    pub fn axpy(&self, c: f64, other: &Point) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> Point {
        Point(self.0.iter().map(|a| a * c).collect())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Point {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Axis-aligned box bounds for the decision variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Point,
    pub upper: Point,
}

/// What kind of program a [`Problem`] encodes.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    /// Smallest enclosing ball of the uncertainty set: the solver works on the
    /// smooth (squared-norm) formulation, so reported values are squared radii.
    Chebyshev,
    /// General convex semi-infinite program: minimize `objective(x)` subject to
    /// `constraint(x, u) <= 0` for every `u` in the uncertainty set.
    Csip {
        objective: Expression,
        constraint: Expression,
        uncertainty_dim: usize,
        /// A decision point strictly feasible for every constraint; required to
        /// start the interior-point inner solver.
        feasible_point: Point,
    },
}

/// A problem instance: decision dimension, uncertainty set, and kind.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    /// Decision dimension n.
    pub dim: usize,
    pub uncertainty: UncertaintySet,
    /// Optional box for the decision variable. For Chebyshev problems a default
    /// (the uncertainty set's bounding box inflated by 2x around its center) is
    /// filled in; for CSIPs the bounds are enforced by the inner solver.
    pub decision: Option<BoxBounds>,
    pub kind: ProblemKind,
}

impl Problem {
    /// Chebyshev instance over `set`; the decision box defaults to the set's
    /// bounding box inflated by a factor of 2 around its center.
    pub fn chebyshev(name: impl Into<String>, set: UncertaintySet) -> Self {
        let dim = set.dim();
        let decision = Some(default_decision_box(&set));
        Problem {
            name: name.into(),
            dim,
            uncertainty: set,
            decision,
            kind: ProblemKind::Chebyshev,
        }
    }

    pub fn is_chebyshev(&self) -> bool {
        matches!(self.kind, ProblemKind::Chebyshev)
    }

    /// Dimension of the uncertainty variable u.
    pub fn uncertainty_dim(&self) -> usize {
        match &self.kind {
            ProblemKind::Chebyshev => self.dim,
            ProblemKind::Csip {
                uncertainty_dim, ..
            } => *uncertainty_dim,
        }
    }

    /// Number of constraint points in the outer tuple: n+1 for Chebyshev
    /// (the decision variable there is (t, x)), n for a general CSIP.
    pub fn tuple_size(&self) -> usize {
        match &self.kind {
            ProblemKind::Chebyshev => self.dim + 1,
            ProblemKind::Csip { .. } => self.dim,
        }
    }
}

pub(crate) fn default_decision_box(set: &UncertaintySet) -> BoxBounds {
    let (lower, upper) = set.bounding_box();
    let mut lo = lower.as_slice().to_vec();
    let mut hi = upper.as_slice().to_vec();
    for i in 0..lo.len() {
        let center = 0.5 * (lo[i] + hi[i]);
        let half = hi[i] - center;
        lo[i] = center - 2.0 * half;
        hi[i] = center + 2.0 * half;
    }
    BoxBounds {
        lower: Point::new(lo),
        upper: Point::new(hi),
    }
}
