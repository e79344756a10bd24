//! Birkhoff sums `S_n(h)(x) = sum_{i<n} h(psi^i x)`, averages `A_n = S_n / n`,
//! the transfer potentials `f_n` and the limits of the truncated envelopes.
//!
//! The tail envelopes `inf_{i >= n} A_i` and `sup_{i >= n} A_i` are replaced
//! by their truncations to `n <= i <= n_max`. Grid extrema underestimate the
//! supremum over the whole space; continuous-space limits are estimates, not
//! certified bounds.

use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::rational::{self, Rational};
use crate::sampling::SampleSpec;
use crate::{ergopt, ConformalSystem, Error, Point, Result};

/// Relative change threshold of the envelope curves over the last tenth of
/// the horizon below which the estimate counts as stabilized.
pub const STABILIZATION_TOL: f64 = 1e-6;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `h(psi^i x)` for `i = 0..n`.
pub fn orbit_factor(sys: &ConformalSystem, x: &Point, n: usize) -> Vec<f64> {
    let mut p = *x;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(sys.h(&p));
        p = sys.forward(&p);
    }
    out
}

/// `(S_1..S_n, A_1..A_n)` along the forward orbit of `x`.
pub fn sums_and_averages(sys: &ConformalSystem, x: &Point, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    sys.space.check(x)?;
    sys.check_budget(n_max as u64)?;
    let mut acc = CompensatedSum::default();
    let mut sums = Vec::with_capacity(n_max);
    let mut avgs = Vec::with_capacity(n_max);
    let mut p = *x;
    for n in 1..=n_max {
        acc.add(sys.h(&p));
        p = sys.forward(&p);
        let s = acc.value();
        sums.push(s);
        avgs.push(s / n as f64);
    }
    Ok((sums, avgs))
}

/// `A_n(h)(x)`.
pub fn average(sys: &ConformalSystem, x: &Point, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Precondition("averages start at n = 1".into()));
    }
    let (_, avgs) = sums_and_averages(sys, x, n)?;
    Ok(avgs[n - 1])
}

/// Per-point arrays, index `n - 1` holds the value for `n`.
#[derive(Debug, Clone, Serialize)]
pub struct PointRow {
    pub sums: Vec<f64>,
    pub averages: Vec<f64>,
    pub env_minus: Vec<f64>,
    pub env_plus: Vec<f64>,
}

impl PointRow {
    fn from_averages(sums: Vec<f64>, averages: Vec<f64>) -> Self {
        let n = averages.len();
        let mut env_minus = vec![0.0; n];
        let mut env_plus = vec![0.0; n];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in (0..n).rev() {
            lo = lo.min(averages[i]);
            hi = hi.max(averages[i]);
            env_minus[i] = lo;
            env_plus[i] = hi;
        }
        Self { sums, averages, env_minus, env_plus }
    }
}

/// Extremal statistics per `n` over the sampled points (index `n - 1`).
#[derive(Debug, Clone, Serialize)]
pub struct Extrema {
    pub min_average: Vec<f64>,
    pub max_average: Vec<f64>,
    pub inf_env_minus: Vec<f64>,
    pub sup_env_plus: Vec<f64>,
}

impl Extrema {
    fn empty(n: usize) -> Self {
        Self {
            min_average: vec![f64::INFINITY; n],
            max_average: vec![f64::NEG_INFINITY; n],
            inf_env_minus: vec![f64::INFINITY; n],
            sup_env_plus: vec![f64::NEG_INFINITY; n],
        }
    }

    fn absorb(mut self, row: &PointRow) -> Self {
        for i in 0..self.min_average.len() {
            self.min_average[i] = self.min_average[i].min(row.averages[i]);
            self.max_average[i] = self.max_average[i].max(row.averages[i]);
            self.inf_env_minus[i] = self.inf_env_minus[i].min(row.env_minus[i]);
            self.sup_env_plus[i] = self.sup_env_plus[i].max(row.env_plus[i]);
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        for i in 0..self.min_average.len() {
            self.min_average[i] = self.min_average[i].min(other.min_average[i]);
            self.max_average[i] = self.max_average[i].max(other.max_average[i]);
            self.inf_env_minus[i] = self.inf_env_minus[i].min(other.inf_env_minus[i]);
            self.sup_env_plus[i] = self.sup_env_plus[i].max(other.sup_env_plus[i]);
        }
        self
    }
}

/// Whether per-point arrays are kept after the extrema are folded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    Full,
    ExtremaOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffTable {
    pub sys_label: String,
    pub points: Vec<Point>,
    pub n_max: usize,
    /// One row per point when built with [`Retention::Full`], else empty.
    pub rows: Vec<PointRow>,
    pub extrema: Extrema,
}

impl BirkhoffTable {
    /// CSV with columns `point,n,S_n,A_n,env_minus,env_plus`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,n,S_n,A_n,env_minus,env_plus\n");
        for (p, row) in self.points.iter().zip(&self.rows) {
            for i in 0..self.n_max {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    p.coords(),
                    i + 1,
                    row.sums[i],
                    row.averages[i],
                    row.env_minus[i],
                    row.env_plus[i]
                );
            }
        }
        out
    }

    /// CSV of the extremal curves: `n,min_A,max_A,inf_env_minus,sup_env_plus`.
    pub fn extrema_csv(&self) -> String {
        let e = &self.extrema;
        let mut out = String::from("n,min_A,max_A,inf_env_minus,sup_env_plus\n");
        for i in 0..self.n_max {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                e.min_average[i],
                e.max_average[i],
                e.inf_env_minus[i],
                e.sup_env_plus[i]
            );
        }
        out
    }
}

/// One forward orbit of length `n_max` per sampled point; points run in parallel.
pub fn birkhoff_table(
    sys: &ConformalSystem,
    samples: &SampleSpec,
    n_max: usize,
    retention: Retention,
) -> Result<BirkhoffTable> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    sys.check_budget(n_max as u64)?;
    let points = samples.resolve(&sys.space)?;
    if points.is_empty() {
        return Err(Error::Precondition("no sample points".into()));
    }
    let row_of = |p: &Point| {
        let (s, a) = sums_and_averages(sys, p, n_max).expect("points resolved against the space");
        PointRow::from_averages(s, a)
    };
    let (rows, extrema) = match retention {
        Retention::Full => {
            let rows: Vec<PointRow> = points.par_iter().map(row_of).collect();
            let extrema = rows.iter().fold(Extrema::empty(n_max), |e, r| e.absorb(r));
            (rows, extrema)
        }
        Retention::ExtremaOnly => {
            let extrema = points
                .par_iter()
                .fold(|| Extrema::empty(n_max), |e, p| e.absorb(&row_of(p)))
                .reduce(|| Extrema::empty(n_max), Extrema::merge);
            (Vec::new(), extrema)
        }
    };
    Ok(BirkhoffTable { sys_label: sys.label.clone(), points, n_max, rows, extrema })
}

/// `f_n = (1/n) sum_{i=1}^{n-1} S_i(h)`, satisfying `A_n(h) = h + f_n o psi - f_n`.
#[derive(Debug, Clone, Copy)]
pub struct TransferPotential<'a> {
    sys: &'a ConformalSystem,
    n: usize,
}

pub fn transfer_potential(sys: &ConformalSystem, n: usize) -> Result<TransferPotential<'_>> {
    if n == 0 {
        return Err(Error::Precondition("transfer potentials start at n = 1".into()));
    }
    sys.check_budget(n as u64)?;
    Ok(TransferPotential { sys, n })
}

impl TransferPotential<'_> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let mut partial = CompensatedSum::default();
        let mut total = CompensatedSum::default();
        let mut p = *x;
        for _ in 1..self.n {
            partial.add(self.sys.h(&p));
            p = self.sys.forward(&p);
            total.add(partial.value());
        }
        total.value() / self.n as f64
    }

    pub fn eval_exact(&self, state: usize) -> Rational {
        let mut partial = Rational::zero();
        let mut total = Rational::zero();
        let mut s = state;
        for _ in 1..self.n {
            partial += self.sys.h_exact(s);
            s = self.sys.forward(&Point::State(s)).state().expect("finite orbit");
            total += &partial;
        }
        total / rational::int(self.n as i64)
    }
}

/// `max_x |A_n(h)(x) - (h(x) + f_n(psi x) - f_n(x))|` over the given points.
pub fn coboundary_residual(sys: &ConformalSystem, n: usize, points: &[Point]) -> Result<f64> {
    let f = transfer_potential(sys, n)?;
    points.iter().try_fold(0.0f64, |acc, x| {
        let a = average(sys, x, n)?;
        let rhs = sys.h(x) + f.eval(&sys.forward(x)) - f.eval(x);
        Ok(acc.max((a - rhs).abs()))
    })
}

/// Residuals for every `n = 1..=n_max` at once (index `n - 1`). The
/// potential at `psi(x)` is accumulated along its own orbit.
pub fn coboundary_residual_curve(sys: &ConformalSystem, n_max: usize, points: &[Point]) -> Result<Vec<f64>> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    sys.check_budget(n_max as u64)?;
    for p in points {
        sys.space.check(p)?;
    }
    let per_point = |x: &Point| -> Vec<f64> {
        let y = sys.forward(x);
        let hx = orbit_factor(sys, x, n_max);
        let hy = orbit_factor(sys, &y, n_max);
        let (mut sx, mut sy) = (CompensatedSum::default(), CompensatedSum::default());
        let (mut fx, mut fy) = (CompensatedSum::default(), CompensatedSum::default());
        let mut out = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            // f_n needs S_1..S_{n-1}, which are in fx/fy before this step.
            let nf = n as f64;
            sx.add(hx[n - 1]);
            let a = sx.value() / nf;
            let rhs = hx[0] + fy.value() / nf - fx.value() / nf;
            out.push((a - rhs).abs());
            sy.add(hy[n - 1]);
            fx.add(sx.value());
            fy.add(sy.value());
        }
        out
    };
    Ok(points
        .par_iter()
        .map(per_point)
        .reduce(|| vec![0.0; n_max], |a, b| a.iter().zip(&b).map(|(u, v)| u.max(*v)).collect()))
}

/// Exact counterparts on finite sets.
pub mod exact {
    use super::*;

    /// `S_1..S_n` at a state.
    pub fn partial_sums(sys: &ConformalSystem, state: usize, n_max: usize) -> Vec<Rational> {
        let mut s = state;
        let mut acc = Rational::zero();
        (0..n_max)
            .map(|_| {
                acc += sys.h_exact(s);
                s = sys.forward(&Point::State(s)).state().expect("finite orbit");
                acc.clone()
            })
            .collect()
    }

    pub fn average(sys: &ConformalSystem, state: usize, n: usize) -> Rational {
        partial_sums(sys, state, n).pop().unwrap_or_else(Rational::zero) / rational::int(n as i64)
    }

    /// `max_s |A_n(h)(s) - (h(s) + f_n(psi s) - f_n(s))|`, exactly.
    pub fn coboundary_residual(sys: &ConformalSystem, n: usize) -> Result<Rational> {
        if !sys.is_finite() {
            return Err(Error::MethodMismatch { method: "exact residual".into(), space: sys.space.name().into() });
        }
        let f = transfer_potential(sys, n)?;
        let mut worst = Rational::zero();
        for s in 0..sys.states() {
            let next = sys.forward(&Point::State(s)).state().expect("finite orbit");
            let rhs = sys.h_exact(s) + f.eval_exact(next) - f.eval_exact(s);
            let r = (average(sys, s, n) - rhs).abs();
            if r > worst {
                worst = r;
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorBound {
    Bound(f64),
    Heuristic,
}

impl Serialize for ErrorBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ErrorBound::Bound(b) => s.serialize_f64(*b),
            ErrorBound::Heuristic => s.serialize_str("heuristic"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitEstimate {
    pub l_minus: f64,
    pub l_plus: f64,
    /// Exact `[L-, L+]` on finite sets.
    #[serde(serialize_with = "rational::serialize_opt_pair")]
    pub exact_gap: Option<[Rational; 2]>,
    pub n_used: usize,
    pub error_bound: ErrorBound,
    pub exact: bool,
    pub stable: bool,
}

/// Estimates of `lim inf_x A_n^-` and `lim sup_x A_n^+`.
///
/// Finite permutations get the exact cycle-mean values. Elsewhere the
/// truncated envelopes are read at `n* = n_max`; when the factor is known to
/// be cohomologous to a constant with potential oscillation `D`, the bound
/// `2 D / n*` is reported instead of a heuristic flag.
pub fn limit_estimates(sys: &ConformalSystem, table: &BirkhoffTable) -> Result<LimitEstimate> {
    let n = table.n_max;
    if sys.is_finite() {
        let cycles = ergopt::cycle_mean_extrema(sys)?;
        return Ok(LimitEstimate {
            l_minus: rational::to_f64(&cycles.min_mean),
            l_plus: rational::to_f64(&cycles.max_mean),
            exact_gap: Some([cycles.min_mean, cycles.max_mean]),
            n_used: n,
            error_bound: ErrorBound::Bound(0.0),
            exact: true,
            stable: true,
        });
    }
    let e = &table.extrema;
    let l_minus = e.inf_env_minus[n - 1];
    let l_plus = e.sup_env_plus[n - 1];
    let error_bound = match sys.factor.cohomologous_constant() {
        Some((_, osc)) => ErrorBound::Bound(2.0 * osc / n as f64),
        None => ErrorBound::Heuristic,
    };
    Ok(LimitEstimate {
        l_minus,
        l_plus,
        exact_gap: None,
        n_used: n,
        error_bound,
        exact: false,
        stable: is_stabilized(&e.inf_env_minus) && is_stabilized(&e.sup_env_plus),
    })
}

/// Relative spread of the last 10% of the curve below [`STABILIZATION_TOL`];
/// curves shorter than 10 points never count as stable.
pub fn is_stabilized(curve: &[f64]) -> bool {
    let n = curve.len();
    if n < 10 {
        return false;
    }
    let tail = &curve[n - n / 10 - 1..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = curve[n - 1].abs().max(1.0);
    (hi - lo) / scale < STABILIZATION_TOL
}

/// The admissible sizes `]-inf, L-[ u ]L+, +inf[` with `0` removed.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibleSet {
    pub gap: [f64; 2],
    #[serde(serialize_with = "rational::serialize_opt_pair")]
    pub exact_gap: Option<[Rational; 2]>,
    /// Open rays as `[lower, upper]`, `null` standing for an infinite end.
    pub rays: [[Option<f64>; 2]; 2],
    /// `0` lies in one of the rays and is removed from the set.
    pub zero_removed: bool,
    pub exact: bool,
    pub error_bound: ErrorBound,
}

impl AdmissibleSet {
    pub fn from_estimate(est: &LimitEstimate) -> Self {
        let gap = [est.l_minus, est.l_plus];
        let zero_in_gap = match &est.exact_gap {
            Some([lo, hi]) => !lo.is_positive() && !hi.is_negative(),
            None => gap[0] <= 0.0 && 0.0 <= gap[1],
        };
        Self {
            gap,
            exact_gap: est.exact_gap.clone(),
            rays: [[None, Some(gap[0])], [Some(gap[1]), None]],
            zero_removed: !zero_in_gap,
            exact: est.exact,
            error_bound: est.error_bound,
        }
    }

    /// `k` lies in one of the open rays and is nonzero.
    pub fn contains(&self, k: f64) -> bool {
        if k == 0.0 {
            return false;
        }
        match &self.exact_gap {
            Some([lo, hi]) => match rational::from_f64(k) {
                Ok(kr) => &kr < lo || &kr > hi,
                Err(_) => false,
            },
            None => k < self.gap[0] || k > self.gap[1],
        }
    }
}
