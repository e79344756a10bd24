//! The two min-max coboundary problems
//!
//! ```text
//! inf_f max_x (h + f o psi - f)(x)    and    sup_f min_x (h + f o psi - f)(x)
//! ```
//!
//! On a finite permutation both are cycle means: along a cycle the sum of
//! `h + f o psi - f` equals the sum of `h`, so no potential beats the largest
//! cycle mean, and the potential that flattens every cycle to its own mean
//! attains it. On grids the transfer potentials `f_n` give rigorous upper
//! bounds `max_x A_n(h)`; `grid_descent` is a relaxation heuristic.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::birkhoff::{self, transfer_potential};
use crate::rational::{self, Rational};
use crate::{ConformalSystem, Error, ModelSpace, Point, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Cycle {
    pub states: Vec<usize>,
    #[serde(serialize_with = "rational::serialize")]
    pub mean: Rational,
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleDecomposition {
    pub cycles: Vec<Cycle>,
    #[serde(serialize_with = "rational::serialize")]
    pub max_mean: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub min_mean: Rational,
}

fn require_finite(sys: &ConformalSystem, method: &str) -> Result<()> {
    if sys.is_finite() {
        Ok(())
    } else {
        Err(Error::MethodMismatch { method: method.into(), space: sys.space.name().into() })
    }
}

fn next_state(sys: &ConformalSystem, s: usize) -> usize {
    sys.forward(&Point::State(s)).state().expect("finite orbit")
}

/// Cycles of the permutation in order of their smallest state, each listed
/// from that state along `psi`.
pub fn cycle_mean_extrema(sys: &ConformalSystem) -> Result<CycleDecomposition> {
    require_finite(sys, "cycle decomposition")?;
    let m = sys.states();
    let mut seen = vec![false; m];
    let mut cycles = Vec::new();
    for start in 0..m {
        if seen[start] {
            continue;
        }
        let mut states = Vec::new();
        let mut sum = Rational::zero();
        let mut s = start;
        while !seen[s] {
            seen[s] = true;
            states.push(s);
            sum += sys.h_exact(s);
            s = next_state(sys, s);
        }
        if s != start {
            return Err(Error::NotBijective(format!("orbit of {start} does not close up")));
        }
        let mean = sum / rational::int(states.len() as i64);
        cycles.push(Cycle { states, mean });
    }
    let max_mean = cycles.iter().map(|c| &c.mean).max().cloned().expect("m >= 1");
    let min_mean = cycles.iter().map(|c| &c.mean).min().cloned().expect("m >= 1");
    Ok(CycleDecomposition { cycles, max_mean, min_mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Method {
    ExactFinite,
    /// Potential `f_n`; value `max_x A_n(h)` over the grid.
    BirkhoffFn { n: usize },
    /// Relaxation of a tabulated potential on the grid-snapped map, started
    /// from `f_n` with `n = init_n`.
    GridDescent { sweeps: usize, init_n: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ExactFinite => "exact_finite",
            Method::BirkhoffFn { .. } => "birkhoff_fn",
            Method::GridDescent { .. } => "grid_descent",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Exact {
        #[serde(serialize_with = "rational::serialize_vec")]
        values: Vec<Rational>,
    },
    Sampled {
        points: Vec<Point>,
        values: Vec<f64>,
    },
}

impl Potential {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,f\n");
        match self {
            Potential::Exact { values } => {
                for (s, v) in values.iter().enumerate() {
                    out.push_str(&format!("{s},{}\n", rational::display(v)));
                }
            }
            Potential::Sampled { points, values } => {
                for (p, v) in points.iter().zip(values) {
                    out.push_str(&format!("{},{v}\n", p.coords()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    pub value: f64,
    #[serde(serialize_with = "serialize_opt_rational")]
    pub exact_value: Option<Rational>,
    pub potential: Potential,
    /// `|max_x (h + f o psi - f) - value|`, evaluated from the potential.
    pub certificate: f64,
    #[serde(serialize_with = "serialize_opt_rational")]
    pub exact_certificate: Option<Rational>,
    pub method: String,
    pub heuristic: bool,
}

fn serialize_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    r.as_ref().map(rational::display).serialize(s)
}

/// `inf_f max_x (h + f o psi - f)`.
pub fn minmax_coboundary(sys: &ConformalSystem, method: Method) -> Result<OptimizationResult> {
    match method {
        Method::ExactFinite => exact_finite(sys),
        Method::BirkhoffFn { n } => birkhoff_fn(sys, n),
        Method::GridDescent { sweeps, init_n } => grid_descent(sys, sweeps, init_n),
    }
}

/// `sup_f min_x (h + f o psi - f) = -minmax(-h)`; the potential is negated
/// back and renormalized.
pub fn maxmin_coboundary(sys: &ConformalSystem, method: Method) -> Result<OptimizationResult> {
    let dual = minmax_coboundary(&sys.negated(), method)?;
    let potential = match dual.potential {
        Potential::Exact { values } => {
            let neg: Vec<Rational> = values.into_iter().map(|v| -v).collect();
            Potential::Exact { values: normalize_per_cycle(sys, neg)? }
        }
        Potential::Sampled { points, values } => {
            let neg: Vec<f64> = values.into_iter().map(|v| -v).collect();
            Potential::Sampled { points, values: normalize_min_zero(neg) }
        }
    };
    Ok(OptimizationResult {
        value: -dual.value,
        exact_value: dual.exact_value.map(|v| -v),
        potential,
        certificate: dual.certificate,
        exact_certificate: dual.exact_certificate,
        method: dual.method,
        heuristic: dual.heuristic,
    })
}

fn normalize_per_cycle(sys: &ConformalSystem, mut f: Vec<Rational>) -> Result<Vec<Rational>> {
    for cycle in cycle_mean_extrema(sys)?.cycles {
        let low = cycle.states.iter().map(|&s| &f[s]).min().cloned().expect("nonempty cycle");
        for s in cycle.states {
            f[s] -= &low;
        }
    }
    Ok(f)
}

fn normalize_min_zero(mut f: Vec<f64>) -> Vec<f64> {
    let low = f.iter().copied().fold(f64::INFINITY, f64::min);
    if low.is_finite() {
        f.iter_mut().for_each(|v| *v -= low);
    }
    f
}

fn exact_finite(sys: &ConformalSystem) -> Result<OptimizationResult> {
    require_finite(sys, "exact_finite")?;
    let cycles = cycle_mean_extrema(sys)?;
    let mut f = vec![Rational::zero(); sys.states()];
    for c in &cycles.cycles {
        // flatten the cycle: f(psi s) = f(s) + mean - h(s)
        let mut acc = Rational::zero();
        for &s in &c.states {
            f[s] = acc.clone();
            acc += &c.mean - sys.h_exact(s);
        }
    }
    let f = normalize_per_cycle(sys, f)?;
    let attained = (0..sys.states())
        .map(|s| sys.h_exact(s) + &f[next_state(sys, s)] - &f[s])
        .max()
        .expect("m >= 1");
    let value = cycles.max_mean;
    let cert = (&attained - &value).abs();
    Ok(OptimizationResult {
        value: rational::to_f64(&value),
        exact_value: Some(value),
        potential: Potential::Exact { values: f },
        certificate: rational::to_f64(&cert),
        exact_certificate: Some(cert),
        method: Method::ExactFinite.name().into(),
        heuristic: false,
    })
}

fn birkhoff_fn(sys: &ConformalSystem, n: usize) -> Result<OptimizationResult> {
    let f = transfer_potential(sys, n)?;
    let points = sys.space.grid_points();
    let mut value = f64::NEG_INFINITY;
    let mut attained = f64::NEG_INFINITY;
    let mut values = Vec::with_capacity(points.len());
    for x in &points {
        value = value.max(birkhoff::average(sys, x, n)?);
        let fx = f.eval(x);
        attained = attained.max(sys.h(x) + f.eval(&sys.forward(x)) - fx);
        values.push(fx);
    }
    Ok(OptimizationResult {
        value,
        exact_value: None,
        potential: Potential::Sampled { points, values: normalize_min_zero(values) },
        certificate: (attained - value).abs(),
        exact_certificate: None,
        method: Method::BirkhoffFn { n }.name().into(),
        heuristic: false,
    })
}

/// Index of the grid node nearest to `p`.
fn snap(space: &ModelSpace, p: &Point) -> usize {
    let idx = |v: f64, g: usize| ((v * g as f64).round() as usize) % g;
    match (space, p) {
        (ModelSpace::Circle { grid }, Point::Circle(x)) => idx(*x, *grid),
        (ModelSpace::Torus2 { grid }, Point::Torus([a, b])) => idx(*a, *grid) * grid + idx(*b, *grid),
        _ => unreachable!("grid descent runs on continuous spaces"),
    }
}

/// Periodic (bi)linear interpolation of grid values.
fn interpolate(space: &ModelSpace, values: &[f64], p: &Point) -> f64 {
    let split = |v: f64, g: usize| {
        let s = v * g as f64;
        let i = s.floor();
        ((i as usize) % g, s - i)
    };
    match (space, p) {
        (ModelSpace::Circle { grid }, Point::Circle(x)) => {
            let (i, w) = split(*x, *grid);
            values[i] * (1.0 - w) + values[(i + 1) % grid] * w
        }
        (ModelSpace::Torus2 { grid }, Point::Torus([a, b])) => {
            let g = *grid;
            let (i, u) = split(*a, g);
            let (j, v) = split(*b, g);
            let at = |i: usize, j: usize| values[(i % g) * g + (j % g)];
            at(i, j) * (1.0 - u) * (1.0 - v) + at(i + 1, j) * u * (1.0 - v) + at(i, j + 1) * (1.0 - u) * v + at(i + 1, j + 1) * u * v
        }
        _ => unreachable!("grid descent runs on continuous spaces"),
    }
}

fn grid_descent(sys: &ConformalSystem, sweeps: usize, init_n: usize) -> Result<OptimizationResult> {
    if sys.is_finite() {
        return Err(Error::MethodMismatch { method: "grid_descent".into(), space: sys.space.name().into() });
    }
    let points = sys.space.grid_points();
    let m = points.len();
    let h: Vec<f64> = points.iter().map(|p| sys.h(p)).collect();
    let image: Vec<usize> = points.iter().map(|p| snap(&sys.space, &sys.forward(p))).collect();
    let mut preimages = vec![Vec::new(); m];
    for (i, &j) in image.iter().enumerate() {
        if i != j {
            preimages[j].push(i);
        }
    }
    let init = transfer_potential(sys, init_n.max(1))?;
    let mut f: Vec<f64> = points.iter().map(|p| init.eval(p)).collect();
    let objective = |f: &[f64]| (0..m).map(|i| h[i] + f[image[i]] - f[i]).fold(f64::NEG_INFINITY, f64::max);

    let mut best = objective(&f);
    for _ in 0..sweeps {
        for i in 0..m {
            if image[i] == i {
                continue;
            }
            let out = h[i] + f[image[i]];
            let incoming = preimages[i].iter().map(|&j| h[j] - f[j]).fold(f64::NEG_INFINITY, f64::max);
            // minimise max(out - f_i, f_i + incoming)
            f[i] = if incoming.is_finite() { (out - incoming) / 2.0 } else { out - best };
        }
        let now = objective(&f);
        if now >= best - 1e-15 * best.abs().max(1.0) {
            break;
        }
        best = now;
    }
    let value = objective(&f);
    let attained = points
        .iter()
        .enumerate()
        .map(|(i, p)| h[i] + interpolate(&sys.space, &f, &sys.forward(p)) - f[i])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(OptimizationResult {
        value,
        exact_value: None,
        potential: Potential::Sampled { points, values: normalize_min_zero(f) },
        certificate: (attained - value).abs(),
        exact_certificate: None,
        method: Method::GridDescent { sweeps, init_n }.name().into(),
        heuristic: true,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrictCheck {
    pub strict: bool,
    /// `f` with `h = f - f o psi`, normalized to `min f = 0` on every cycle.
    #[serde(serialize_with = "serialize_opt_vec")]
    pub generator: Option<Vec<Rational>>,
}

fn serialize_opt_vec<S: serde::Serializer>(r: &Option<Vec<Rational>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    r.as_ref().map(|v| v.iter().map(rational::display).collect::<Vec<_>>()).serialize(s)
}

/// Strict iff every cycle sum of `h` vanishes.
pub fn is_strict_finite(sys: &ConformalSystem) -> Result<StrictCheck> {
    let cycles = cycle_mean_extrema(sys)?;
    if cycles.cycles.iter().any(|c| !c.mean.is_zero()) {
        return Ok(StrictCheck { strict: false, generator: None });
    }
    let mut f = vec![Rational::zero(); sys.states()];
    for c in &cycles.cycles {
        // f(psi s) = f(s) - h(s)
        let mut acc = Rational::zero();
        for &s in &c.states {
            f[s] = acc.clone();
            acc -= sys.h_exact(s);
        }
    }
    Ok(StrictCheck { strict: true, generator: Some(normalize_per_cycle(sys, f)?) })
}
