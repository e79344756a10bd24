//! Conformal dynamical systems `(psi, psi^-1, h)` on model spaces.

use std::f64::consts::TAU;

use num_traits::Zero;
use serde::Serialize;

use crate::rational::{self, Rational};
use crate::space::wrap_unit;
use crate::{Error, ModelSpace, Point, Result};

pub const DEFAULT_TOL_INVERSE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;

/// One Fourier mode `cos * cos(2 pi m.x) + sin * sin(2 pi m.x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrigTerm {
    pub freq: [i64; 2],
    pub cos: f64,
    pub sin: f64,
}

/// Real trigonometric polynomial on the circle or the 2-torus.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrigPoly {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    /// `amplitude * sin(2 pi freq x)` on the circle.
    pub fn sin(freq: i64, amplitude: f64) -> Self {
        Self { constant: 0.0, terms: vec![TrigTerm { freq: [freq, 0], cos: 0.0, sin: amplitude }] }
    }

    /// `amplitude * cos(2 pi freq x)` on the circle.
    pub fn cos(freq: i64, amplitude: f64) -> Self {
        Self { constant: 0.0, terms: vec![TrigTerm { freq: [freq, 0], cos: amplitude, sin: 0.0 }] }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        let (x, y) = match *p {
            Point::Circle(x) => (x, 0.0),
            Point::Torus([x, y]) => (x, y),
            Point::State(s) => (s as f64, 0.0),
        };
        self.terms.iter().fold(self.constant, |acc, t| {
            let phase = TAU * (t.freq[0] as f64 * x + t.freq[1] as f64 * y);
            let (s, c) = phase.sin_cos();
            acc + t.cos * c + t.sin * s
        })
    }

    /// Upper bound on `max f - min f`: twice the sum of mode amplitudes.
    pub fn oscillation_bound(&self) -> f64 {
        2.0 * self
            .terms
            .iter()
            .filter(|t| t.freq != [0, 0])
            .map(|t| t.cos.hypot(t.sin))
            .sum::<f64>()
    }

    fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.freq == [0, 0] || (t.cos == 0.0 && t.sin == 0.0))
    }

    fn check_for(&self, space: &ModelSpace) -> Result<()> {
        let finite = self.constant.is_finite() && self.terms.iter().all(|t| t.cos.is_finite() && t.sin.is_finite());
        if !finite {
            return Err(Error::InvalidSystem("non-finite trigonometric coefficient".into()));
        }
        match space {
            ModelSpace::Circle { .. } if self.terms.iter().any(|t| t.freq[1] != 0) => {
                Err(Error::InvalidSystem("circle polynomials take one frequency per term".into()))
            }
            ModelSpace::FiniteSet { .. } => {
                Err(Error::InvalidSystem("trigonometric factors need a continuous space".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The invertible map `psi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    /// `x -> x + angle mod 1` on the circle.
    Rotation { angle: f64 },
    /// `x -> M x + shift mod 1` on the 2-torus, `M` in `GL(2, Z)`.
    Toral {
        matrix: [[i64; 2]; 2],
        #[serde(skip)]
        inverse: [[i64; 2]; 2],
        shift: [f64; 2],
    },
    /// `s -> forward[s]` on a finite set.
    Permutation {
        forward: Vec<usize>,
        #[serde(skip)]
        backward: Vec<usize>,
    },
}

impl MapKind {
    pub fn rotation(angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::InvalidSystem("rotation angle must be finite".into()));
        }
        Ok(Self::Rotation { angle: wrap_unit(angle) })
    }

    /// Linear toral automorphism plus translation. The inverse matrix is the
    /// exact integer adjugate divided by the determinant `+-1`.
    pub fn toral(matrix: [[i64; 2]; 2], shift: [f64; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        let det = a * d - b * c;
        if det != 1 && det != -1 {
            return Err(Error::InvalidSystem(format!("toral matrix must have determinant +-1, got {det}")));
        }
        if !shift.iter().all(|s| s.is_finite()) {
            return Err(Error::InvalidSystem("toral shift must be finite".into()));
        }
        let inverse = [[d * det, -b * det], [-c * det, a * det]];
        Ok(Self::Toral { matrix, inverse, shift: [wrap_unit(shift[0]), wrap_unit(shift[1])] })
    }

    pub fn cat_map() -> Self {
        Self::toral([[2, 1], [1, 1]], [0.0, 0.0]).expect("cat map is unimodular")
    }

    pub fn permutation(forward: Vec<usize>) -> Result<Self> {
        let m = forward.len();
        let mut backward = vec![usize::MAX; m];
        for (s, &img) in forward.iter().enumerate() {
            if img >= m {
                return Err(Error::NotBijective(format!("image {img} of state {s} is out of range 0..{m}")));
            }
            if backward[img] != usize::MAX {
                return Err(Error::NotBijective(format!("state {img} is hit twice")));
            }
            backward[img] = s;
        }
        Ok(Self::Permutation { forward, backward })
    }

    fn apply(&self, p: &Point, inverse: bool) -> Point {
        match (self, p) {
            (Self::Rotation { angle }, Point::Circle(x)) => {
                Point::Circle(wrap_unit(if inverse { x - angle } else { x + angle }))
            }
            (Self::Toral { matrix, inverse: inv, shift }, Point::Torus([x, y])) => {
                // Fixed-point arithmetic on the 2^-52 lattice: the map is then an exact
                // bijection of that lattice, so round trips do not feel the expansion.
                let [x, y, sx, sy] = [*x, *y, shift[0], shift[1]].map(to_lattice);
                let m = if inverse { inv } else { matrix };
                let (x, y) = if inverse { (x.wrapping_sub(sx), y.wrapping_sub(sy)) } else { (x, y) };
                let row = |r: [i64; 2]| (r[0] as u64).wrapping_mul(x).wrapping_add((r[1] as u64).wrapping_mul(y));
                let (mut u, mut v) = (row(m[0]), row(m[1]));
                if !inverse {
                    u = u.wrapping_add(sx);
                    v = v.wrapping_add(sy);
                }
                Point::Torus([from_lattice(u), from_lattice(v)])
            }
            (Self::Permutation { forward, backward }, Point::State(s)) => {
                Point::State(if inverse { backward[*s] } else { forward[*s] })
            }
            _ => unreachable!("point kind checked against the space"),
        }
    }

    fn fits(&self, space: &ModelSpace) -> bool {
        match (self, space) {
            (Self::Rotation { .. }, ModelSpace::Circle { .. }) => true,
            (Self::Toral { .. }, ModelSpace::Torus2 { .. }) => true,
            (Self::Permutation { forward, .. }, ModelSpace::FiniteSet { states }) => forward.len() == *states,
            _ => false,
        }
    }
}

const LATTICE_BITS: u32 = 52;
const LATTICE_MASK: u64 = (1 << LATTICE_BITS) - 1;

fn to_lattice(v: f64) -> u64 {
    ((wrap_unit(v) * (1u64 << LATTICE_BITS) as f64).round() as u64) & LATTICE_MASK
}

fn from_lattice(n: u64) -> f64 {
    (n & LATTICE_MASK) as f64 / (1u64 << LATTICE_BITS) as f64
}

/// The conformal factor `h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    Constant {
        value: f64,
    },
    Trig {
        poly: TrigPoly,
    },
    /// `h = f - f o psi`: the strict case, generated by `f`.
    Coboundary {
        generator: TrigPoly,
    },
    /// Per-state exact values on a finite set.
    Table {
        #[serde(serialize_with = "rational::serialize_vec")]
        values: Vec<Rational>,
    },
    /// `base + g o psi - g`.
    Gauged {
        base: Box<Factor>,
        potential: TrigPoly,
    },
    Negated {
        base: Box<Factor>,
    },
}

impl Factor {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn table<I: IntoIterator<Item = i64>>(values: I) -> Self {
        Self::Table { values: values.into_iter().map(rational::int).collect() }
    }

    /// `h = c + phi o psi - phi` with `max phi - min phi <= bound`, when the
    /// factor is built that way.
    pub fn cohomologous_constant(&self) -> Option<(f64, f64)> {
        match self {
            Self::Constant { value } => Some((*value, 0.0)),
            Self::Trig { poly } if poly.is_constant() => Some((poly.constant, 0.0)),
            Self::Coboundary { generator } => Some((0.0, generator.oscillation_bound())),
            Self::Gauged { base, potential } => {
                base.cohomologous_constant().map(|(c, d)| (c, d + potential.oscillation_bound()))
            }
            Self::Negated { base } => base.cohomologous_constant().map(|(c, d)| (-c, d)),
            _ => None,
        }
    }

    fn check_for(&self, space: &ModelSpace) -> Result<()> {
        match self {
            Self::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidSystem("constant factor must be finite".into()))
            }
            Self::Constant { .. } => Ok(()),
            Self::Trig { poly } | Self::Coboundary { generator: poly } => poly.check_for(space),
            Self::Table { values } => match space {
                ModelSpace::FiniteSet { states } if values.len() == *states => Ok(()),
                ModelSpace::FiniteSet { states } => Err(Error::InvalidSystem(format!(
                    "factor table has {} entries for {states} states",
                    values.len()
                ))),
                _ => Err(Error::InvalidSystem("factor tables need a finite set".into())),
            },
            Self::Gauged { base, potential } => {
                potential.check_for(space)?;
                base.check_for(space)
            }
            Self::Negated { base } => base.check_for(space),
        }
    }
}

/// An invertible map on a model space with its conformal factor.
/// Immutable once built; share it freely across threads.
#[derive(Debug, Clone, Serialize)]
pub struct ConformalSystem {
    pub label: String,
    pub space: ModelSpace,
    pub map: MapKind,
    pub factor: Factor,
    #[serde(skip)]
    pub tol_inverse: f64,
    #[serde(skip)]
    pub max_iterations: u64,
    #[serde(skip)]
    table_f64: Vec<f64>,
    #[serde(skip)]
    table_exact: Vec<Rational>,
}

impl ConformalSystem {
    pub fn new(space: ModelSpace, map: MapKind, factor: Factor, label: impl Into<String>) -> Result<Self> {
        Self::with_tolerance(space, map, factor, label, DEFAULT_TOL_INVERSE)
    }

    pub fn with_tolerance(
        space: ModelSpace,
        map: MapKind,
        factor: Factor,
        label: impl Into<String>,
        tol_inverse: f64,
    ) -> Result<Self> {
        let space = space.validated()?;
        if !map.fits(&space) {
            return Err(Error::InvalidSystem(format!("map does not act on {}", space.name())));
        }
        if !(tol_inverse > 0.0) {
            return Err(Error::InvalidSystem("tol_inverse must be positive".into()));
        }
        factor.check_for(&space)?;
        let mut sys = Self {
            label: label.into(),
            space,
            map,
            factor,
            tol_inverse,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            table_f64: Vec::new(),
            table_exact: Vec::new(),
        };
        sys.table_exact = sys.exact_table();
        sys.table_f64 = sys.table_exact.iter().map(rational::to_f64).collect();
        sys.validate_samples()?;
        Ok(sys)
    }

    pub fn with_max_iterations(mut self, max_iterations: u64) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    /// Same map, different factor.
    pub fn with_factor(&self, factor: Factor, label: impl Into<String>) -> Result<Self> {
        Ok(Self::with_tolerance(self.space, self.map.clone(), factor, label, self.tol_inverse)?
            .with_max_iterations(self.max_iterations))
    }

    /// The system with factor `-h`.
    pub fn negated(&self) -> Self {
        let factor = match &self.factor {
            Factor::Table { values } => Factor::Table { values: values.iter().map(|v| -v).collect() },
            Factor::Negated { base } => (**base).clone(),
            other => Factor::Negated { base: Box::new(other.clone()) },
        };
        self.with_factor(factor, format!("-({})", self.label)).expect("negation preserves validity")
    }

    /// The finite system with factor `h + f0 o psi - f0`, computed exactly.
    pub fn gauged_table(&self, potential: &[Rational]) -> Result<Self> {
        if !self.is_finite() || potential.len() != self.states() {
            return Err(Error::InvalidSystem("gauge table must cover every state of a finite set".into()));
        }
        let values = (0..self.states())
            .map(|s| {
                let next = self.forward(&Point::State(s)).state().expect("finite orbit");
                self.h_exact(s) + &potential[next] - &potential[s]
            })
            .collect();
        self.with_factor(Factor::Table { values }, format!("{} (gauged)", self.label))
    }

    /// The continuous system with factor `h + g o psi - g`.
    pub fn gauged_trig(&self, potential: TrigPoly) -> Result<Self> {
        let factor = Factor::Gauged { base: Box::new(self.factor.clone()), potential };
        self.with_factor(factor, format!("{} (gauged)", self.label))
    }

    fn exact_table(&self) -> Vec<Rational> {
        let ModelSpace::FiniteSet { states } = self.space else {
            return Vec::new();
        };
        (0..states).map(|s| self.exact_value(&self.factor, s)).collect()
    }

    fn exact_value(&self, factor: &Factor, s: usize) -> Rational {
        match factor {
            Factor::Table { values } => values[s].clone(),
            Factor::Constant { value } => rational::from_f64(*value).unwrap_or_else(|_| Rational::zero()),
            Factor::Negated { base } => -self.exact_value(base, s),
            // trigonometric variants are rejected on finite sets
            _ => Rational::zero(),
        }
    }

    fn validate_samples(&self) -> Result<()> {
        for p in self.space.grid_points() {
            let back = self.backward(&self.forward(&p));
            let err = self.space.distance(&back, &p);
            let ok = if self.space.is_finite() { err == 0.0 } else { err <= self.tol_inverse };
            if !ok {
                return Err(Error::InvalidSystem(format!("backward o forward misses {p} by {err}")));
            }
            let hv = self.h(&p);
            if !hv.is_finite() {
                return Err(Error::InvalidSystem(format!("factor is not finite at {p}")));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.space.is_finite()
    }

    pub fn states(&self) -> usize {
        match self.space {
            ModelSpace::FiniteSet { states } => states,
            _ => 0,
        }
    }

    /// `psi(x)`; `x` must already lie in the space.
    pub fn forward(&self, p: &Point) -> Point {
        self.map.apply(p, false)
    }

    /// `psi^-1(x)`.
    pub fn backward(&self, p: &Point) -> Point {
        self.map.apply(p, true)
    }

    pub fn step(&self, p: &Point, inverse: bool) -> Point {
        self.map.apply(p, inverse)
    }

    pub fn check_budget(&self, n: u64) -> Result<()> {
        if n > self.max_iterations {
            Err(Error::Budget { requested: n, limit: self.max_iterations })
        } else {
            Ok(())
        }
    }

    /// `psi^n(x)` for signed `n`.
    pub fn iterate(&self, x: &Point, n: i64) -> Result<Point> {
        self.space.check(x)?;
        self.check_budget(n.unsigned_abs())?;
        let inverse = n < 0;
        let mut p = *x;
        for _ in 0..n.unsigned_abs() {
            p = self.step(&p, inverse);
        }
        Ok(p)
    }

    /// `h(x)`.
    pub fn h(&self, p: &Point) -> f64 {
        match p {
            Point::State(s) => self.table_f64[*s],
            _ => self.eval_factor(&self.factor, p),
        }
    }

    fn eval_factor(&self, factor: &Factor, p: &Point) -> f64 {
        match factor {
            Factor::Constant { value } => *value,
            Factor::Trig { poly } => poly.eval(p),
            Factor::Coboundary { generator } => generator.eval(p) - generator.eval(&self.forward(p)),
            Factor::Gauged { base, potential } => {
                self.eval_factor(base, p) + potential.eval(&self.forward(p)) - potential.eval(p)
            }
            Factor::Negated { base } => -self.eval_factor(base, p),
            Factor::Table { .. } => unreachable!("tables live on finite sets"),
        }
    }

    /// Exact `h(s)` on a finite set.
    pub fn h_exact(&self, state: usize) -> &Rational {
        &self.table_exact[state]
    }

    pub fn exact_values(&self) -> &[Rational] {
        &self.table_exact
    }

    /// Generator `f` of a strict factor `h = f - f o psi`.
    pub fn strict_generator(&self) -> Option<&TrigPoly> {
        match &self.factor {
            Factor::Coboundary { generator } => Some(generator),
            _ => None,
        }
    }

    /// Sampled `(min h, max h)` over the grid (exact extremes on finite sets).
    pub fn factor_range(&self) -> (f64, f64) {
        self.space
            .grid_points()
            .iter()
            .map(|p| self.h(p))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Parameters for [`builtin_system`]; unused fields are ignored.
#[derive(Debug, Clone, Default)]
pub struct PresetParams {
    pub grid: Option<usize>,
    pub angle: Option<f64>,
    pub matrix: Option<[[i64; 2]; 2]>,
    pub shift: Option<[f64; 2]>,
    pub table: Option<Vec<usize>>,
    pub values: Option<Vec<Rational>>,
    pub factor: Option<Factor>,
    pub generator: Option<TrigPoly>,
}

pub const DEFAULT_GRID: usize = 1024;

/// Golden rotation number `(sqrt 5 - 1) / 2`.
pub fn golden_angle() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Named presets: `rotation`, `cat_map`, `finite_permutation`, `strict_rotation`.
pub fn builtin_system(name: &str, params: &PresetParams) -> Result<ConformalSystem> {
    let grid = params.grid.unwrap_or(DEFAULT_GRID);
    let missing = |what: &str| Error::InvalidSystem(format!("preset `{name}` needs `{what}`"));
    match name {
        "rotation" => {
            let angle = params.angle.unwrap_or_else(golden_angle);
            let factor = params.factor.clone().unwrap_or(Factor::constant(0.0));
            ConformalSystem::new(ModelSpace::circle(grid)?, MapKind::rotation(angle)?, factor, "rotation")
        }
        "cat_map" => {
            let map = MapKind::toral(params.matrix.unwrap_or([[2, 1], [1, 1]]), params.shift.unwrap_or([0.0, 0.0]))?;
            let factor = params.factor.clone().unwrap_or(Factor::constant(0.0));
            ConformalSystem::new(ModelSpace::torus2(grid)?, map, factor, "cat_map")
        }
        "finite_permutation" => {
            let table = params.table.clone().ok_or_else(|| missing("table"))?;
            let map = MapKind::permutation(table)?;
            let states = match &map {
                MapKind::Permutation { forward, .. } => forward.len(),
                _ => unreachable!(),
            };
            let factor = match (&params.values, &params.factor) {
                (Some(v), _) => Factor::Table { values: v.clone() },
                (None, Some(f)) => f.clone(),
                (None, None) => return Err(missing("values")),
            };
            ConformalSystem::new(ModelSpace::finite(states)?, map, factor, "finite_permutation")
        }
        "strict_rotation" => {
            let angle = params.angle.unwrap_or_else(golden_angle);
            let generator = params.generator.clone().unwrap_or_else(|| TrigPoly::sin(1, 1.0));
            ConformalSystem::new(
                ModelSpace::circle(grid)?,
                MapKind::rotation(angle)?,
                Factor::Coboundary { generator },
                "strict_rotation",
            )
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> ConformalSystem {
        builtin_system(
            "finite_permutation",
            &PresetParams { table: Some(vec![1, 2, 0]), values: Some(vec![1, 2, 3].into_iter().map(rational::int).collect()), ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn iterate_finite_cycle() {
        let sys = cycle3();
        assert_eq!(sys.iterate(&Point::State(0), 2).unwrap(), Point::State(2));
        assert_eq!(sys.iterate(&Point::State(0), -1).unwrap(), Point::State(2));
        assert_eq!(sys.iterate(&Point::State(1), 0).unwrap(), Point::State(1));
    }

    #[test]
    fn iterate_half_rotation() {
        let sys = builtin_system(
            "rotation",
            &PresetParams { angle: Some(0.5), factor: Some(Factor::constant(0.2)), ..Default::default() },
        )
        .unwrap();
        assert_eq!(sys.iterate(&Point::Circle(0.25), 1).unwrap(), Point::Circle(0.75));
        assert_eq!(sys.iterate(&Point::Circle(0.25), 0).unwrap(), Point::Circle(0.25));
        assert_eq!(sys.h(&Point::Circle(0.9)), 0.2);
    }

    #[test]
    fn iterate_errors() {
        let sys = cycle3().with_max_iterations(10);
        assert!(matches!(sys.iterate(&Point::State(3), 1), Err(Error::Domain(_))));
        assert!(matches!(sys.iterate(&Point::Circle(0.1), 1), Err(Error::Domain(_))));
        assert!(matches!(sys.iterate(&Point::State(0), -11), Err(Error::Budget { requested: 11, limit: 10 })));
    }

    #[test]
    fn permutation_must_be_bijective() {
        let err = builtin_system(
            "finite_permutation",
            &PresetParams { table: Some(vec![0, 0, 1]), values: Some(vec![rational::int(0); 3]), ..Default::default() },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotBijective(_)));
        assert!(matches!(MapKind::permutation(vec![0, 3]), Err(Error::NotBijective(_))));
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(builtin_system("horseshoe", &PresetParams::default()), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn mismatched_parts_are_rejected() {
        let circle = ModelSpace::circle(8).unwrap();
        assert!(ConformalSystem::new(circle, MapKind::cat_map(), Factor::constant(0.0), "x").is_err());
        assert!(ConformalSystem::new(circle, MapKind::rotation(0.1).unwrap(), Factor::table([1, 2]), "x").is_err());
        let finite = ModelSpace::finite(2).unwrap();
        let swap = MapKind::permutation(vec![1, 0]).unwrap();
        assert!(ConformalSystem::new(finite, swap.clone(), Factor::table([1]), "x").is_err());
        assert!(ConformalSystem::new(finite, swap, Factor::Trig { poly: TrigPoly::sin(1, 1.0) }, "x").is_err());
        assert!(MapKind::toral([[2, 0], [0, 1]], [0.0, 0.0]).is_err());
        assert!(MapKind::rotation(f64::NAN).is_err());
        assert!(ConformalSystem::new(circle, MapKind::rotation(0.1).unwrap(), Factor::constant(f64::INFINITY), "x").is_err());
    }

    #[test]
    fn cat_map_inverse_is_exact_matrix() {
        let sys = builtin_system("cat_map", &PresetParams { grid: Some(16), ..Default::default() }).unwrap();
        let p = Point::Torus([0.3, 0.7]);
        let q = sys.forward(&p);
        if let Point::Torus([u, v]) = q {
            assert!((u - (0.6 + 0.7 - 1.0)).abs() < 1e-12);
            assert!((v - 0.0).abs() < 1e-12 || (v - 1.0).abs() < 1e-12);
        }
        assert!(sys.space.distance(&sys.backward(&q), &p) < 1e-12);
    }

    #[test]
    fn strict_factor_is_generator_difference() {
        let sys = builtin_system("strict_rotation", &PresetParams { grid: Some(64), ..Default::default() }).unwrap();
        let x = Point::Circle(0.1);
        let f = sys.strict_generator().unwrap();
        assert!((sys.h(&x) - (f.eval(&x) - f.eval(&sys.forward(&x)))).abs() < 1e-15);
        assert_eq!(sys.factor.cohomologous_constant(), Some((0.0, 2.0)));
    }

    #[test]
    fn negation_flips_tables_exactly() {
        let sys = cycle3().negated();
        assert_eq!(sys.h_exact(2), &rational::int(-3));
        assert_eq!(sys.negated().h_exact(2), &rational::int(3));
    }

    #[test]
    fn oscillation_bound_of_pure_modes() {
        assert_eq!(TrigPoly::sin(1, 1.0).oscillation_bound(), 2.0);
        let p = TrigPoly { constant: 4.0, terms: vec![TrigTerm { freq: [2, 0], cos: 3.0, sin: 4.0 }] };
        assert_eq!(p.oscillation_bound(), 10.0);
    }
}
