#![allow(dead_code)]

use conformal_core::rational::{self, Rational};
use conformal_core::system::PresetParams;
use conformal_core::{builtin_system, ConformalSystem, Factor, MapKind, ModelSpace, TrigPoly, TrigTerm};
use rand::seq::SliceRandom;
use rand::Rng;

/// A uniformly shuffled permutation on `1..=max_states` states with integer
/// factor values in `[-10, 10]`.
pub fn random_finite<R: Rng>(rng: &mut R, max_states: usize) -> ConformalSystem {
    let m = rng.gen_range(1..=max_states);
    let mut table: Vec<usize> = (0..m).collect();
    table.shuffle(rng);
    let values: Vec<i64> = (0..m).map(|_| rng.gen_range(-10..=10)).collect();
    ConformalSystem::new(
        ModelSpace::finite(m).unwrap(),
        MapKind::permutation(table).unwrap(),
        Factor::table(values),
        "random permutation",
    )
    .unwrap()
}

pub fn random_potential<R: Rng>(rng: &mut R, m: usize) -> Vec<Rational> {
    (0..m).map(|_| rational::int(rng.gen_range(-20..=20))).collect()
}

/// A few random circle modes.
pub fn random_trig<R: Rng>(rng: &mut R, modes: usize, scale: f64) -> TrigPoly {
    TrigPoly {
        constant: rng.gen_range(-scale..scale),
        terms: (0..modes)
            .map(|j| TrigTerm {
                freq: [j as i64 + 1, 0],
                cos: rng.gen_range(-scale..scale),
                sin: rng.gen_range(-scale..scale),
            })
            .collect(),
    }
}

/// `cos(2 pi x) + 0.5 sin(4 pi x) + 0.1` under the golden rotation.
pub fn generic_rotation(grid: usize) -> ConformalSystem {
    let poly = TrigPoly {
        constant: 0.1,
        terms: vec![TrigTerm { freq: [1, 0], cos: 1.0, sin: 0.0 }, TrigTerm { freq: [2, 0], cos: 0.0, sin: 0.5 }],
    };
    builtin_system("rotation", &PresetParams { grid: Some(grid), factor: Some(Factor::Trig { poly }), ..Default::default() })
        .unwrap()
}

pub fn strict_rotation(grid: usize) -> ConformalSystem {
    builtin_system("strict_rotation", &PresetParams { grid: Some(grid), ..Default::default() }).unwrap()
}

pub fn constant_rotation(grid: usize, value: f64) -> ConformalSystem {
    builtin_system(
        "rotation",
        &PresetParams { grid: Some(grid), factor: Some(Factor::constant(value)), ..Default::default() },
    )
    .unwrap()
}

/// `max - min` of a circle polynomial on a fine grid.
pub fn sampled_oscillation(poly: &TrigPoly) -> f64 {
    let (lo, hi) = (0..100_000)
        .map(|i| poly.eval(&conformal_core::Point::Circle(i as f64 / 100_000.0)))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi - lo
}
