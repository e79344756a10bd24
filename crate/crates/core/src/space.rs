//! Model state spaces: the unit circle, the unit 2-torus and finite sets.

use std::fmt;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpace {
    /// Unit circle, coordinates in `[0, 1)`.
    Circle { grid: usize },
    /// Unit 2-torus, coordinates in `[0, 1)^2`; `grid` is per dimension.
    Torus2 { grid: usize },
    /// `states` labeled states `0..states`.
    FiniteSet { states: usize },
}

impl ModelSpace {
    pub fn circle(grid: usize) -> Result<Self> {
        Self::Circle { grid }.validated()
    }

    pub fn torus2(grid: usize) -> Result<Self> {
        Self::Torus2 { grid }.validated()
    }

    pub fn finite(states: usize) -> Result<Self> {
        Self::FiniteSet { states }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Circle { grid } | Self::Torus2 { grid } if grid < 2 => Err(Error::InvalidSystem(format!(
                "grid resolution must be at least 2, got {grid}"
            ))),
            Self::FiniteSet { states: 0 } => Err(Error::InvalidSystem("finite set needs at least one state".into())),
            ok => Ok(ok),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::FiniteSet { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Circle { .. } => "circle",
            Self::Torus2 { .. } => "torus2",
            Self::FiniteSet { .. } => "finite_set",
        }
    }

    /// The same space with a different grid resolution (finite sets are unchanged).
    pub fn with_grid(self, grid: usize) -> Result<Self> {
        match self {
            Self::Circle { .. } => Self::circle(grid),
            Self::Torus2 { .. } => Self::torus2(grid),
            finite => Ok(finite),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        match (self, p) {
            (Self::Circle { .. }, Point::Circle(x)) => unit(*x),
            (Self::Torus2 { .. }, Point::Torus([a, b])) => unit(*a) && unit(*b),
            (Self::FiniteSet { states }, Point::State(s)) => s < states,
            _ => false,
        }
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(format!("{p} in {}", self.name())))
        }
    }

    /// Uniform grid (or every state of a finite set).
    pub fn grid_points(&self) -> Vec<Point> {
        match *self {
            Self::Circle { grid } => (0..grid).map(|i| Point::Circle(i as f64 / grid as f64)).collect(),
            Self::Torus2 { grid } => (0..grid)
                .flat_map(|i| (0..grid).map(move |j| Point::Torus([i as f64 / grid as f64, j as f64 / grid as f64])))
                .collect(),
            Self::FiniteSet { states } => (0..states).map(Point::State).collect(),
        }
    }

    /// Distance used by inverse checks: wrap-around on circle and torus,
    /// 0/1 on finite sets.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        match (a, b) {
            (Point::Circle(x), Point::Circle(y)) => circle_distance(*x, *y),
            (Point::Torus([a0, a1]), Point::Torus([b0, b1])) => {
                circle_distance(*a0, *b0).max(circle_distance(*a1, *b1))
            }
            (Point::State(x), Point::State(y)) => f64::from(u8::from(x != y)),
            _ => f64::INFINITY,
        }
    }
}

fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Reduces a real coordinate into `[0, 1)`.
pub fn wrap_unit(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid rounds tiny negatives up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Point {
    Circle(f64),
    Torus([f64; 2]),
    State(usize),
}

impl Point {
    pub fn state(&self) -> Option<usize> {
        match self {
            Point::State(s) => Some(*s),
            _ => None,
        }
    }

    /// Coordinates as written to CSV files.
    pub fn coords(&self) -> String {
        match self {
            Point::Circle(x) => format!("{x}"),
            Point::Torus([a, b]) => format!("{a} {b}"),
            Point::State(s) => s.to_string(),
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Circle(x) => write!(f, "{x}"),
            Point::Torus([a, b]) => write!(f, "({a}, {b})"),
            Point::State(s) => write!(f, "#{s}"),
        }
    }
}
