//! Sample specifications and seeded random draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ModelSpace, Point, Result};

/// Uniform grid (at the space's resolution unless overridden) plus optional
/// user seed points.
#[derive(Debug, Clone, Default)]
pub struct SampleSpec {
    pub grid: Option<usize>,
    pub seeds: Vec<Point>,
    /// Drop the grid and use the seeds only.
    pub seeds_only: bool,
}

impl SampleSpec {
    pub fn grid() -> Self {
        Self::default()
    }

    pub fn with_grid(grid: usize) -> Self {
        Self { grid: Some(grid), ..Self::default() }
    }

    pub fn points(points: Vec<Point>) -> Self {
        Self { grid: None, seeds: points, seeds_only: true }
    }

    pub fn resolve(&self, space: &ModelSpace) -> Result<Vec<Point>> {
        let mut out = if self.seeds_only {
            Vec::new()
        } else {
            match self.grid {
                Some(g) => space.with_grid(g)?.grid_points(),
                None => space.grid_points(),
            }
        };
        for s in &self.seeds {
            space.check(s)?;
            out.push(*s);
        }
        Ok(out)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A uniformly random point of the space.
pub fn random_point<R: Rng>(space: &ModelSpace, rng: &mut R) -> Point {
    match *space {
        ModelSpace::Circle { .. } => Point::Circle(rng.gen::<f64>()),
        ModelSpace::Torus2 { .. } => Point::Torus([rng.gen::<f64>(), rng.gen::<f64>()]),
        ModelSpace::FiniteSet { states } => Point::State(rng.gen_range(0..states)),
    }
}
