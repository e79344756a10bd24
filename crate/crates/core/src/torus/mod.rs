//! The mapping-torus action `rho(x, t) = (psi x, t + k - h(x))` on `N x R`,
//! a properness probe against the band `K`, and the explicit conjugating
//! constructions in [`construct`].

mod construct;
mod cutoff;

pub use construct::{build_g, build_mu, GFunction, GInfo, MuFunction, MuOptions, MuReport};
pub use cutoff::{build_cutoff, Cutoff};

use rayon::prelude::*;
use serde::Serialize;

use crate::birkhoff::{birkhoff_table, CompensatedSum, Retention};
use crate::rational::{self, Rational};
use crate::sampling::SampleSpec;
use crate::{ConformalSystem, Error, Point, Result};

#[derive(Debug, Clone, Copy)]
pub struct TorusAction<'a> {
    pub sys: &'a ConformalSystem,
    pub k: f64,
}

impl<'a> TorusAction<'a> {
    pub fn new(sys: &'a ConformalSystem, k: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::Precondition(format!("size k = {k} must be finite")));
        }
        Ok(Self { sys, k })
    }

    pub fn step(&self, x: &Point, t: f64) -> Result<(Point, f64)> {
        self.sys.space.check(x)?;
        Ok((self.sys.forward(x), t + self.k - self.sys.h(x)))
    }

    pub fn step_inverse(&self, x: &Point, t: f64) -> Result<(Point, f64)> {
        self.sys.space.check(x)?;
        let y = self.sys.backward(x);
        Ok((y, t - self.k + self.sys.h(&y)))
    }

    /// `rho^n(x, t) = (psi^n x, t + n (k - A_n(h)(x)))` via the compensated
    /// sum `S_n`.
    pub fn power(&self, x: &Point, t: f64, n: u64) -> Result<(Point, f64)> {
        self.sys.space.check(x)?;
        self.sys.check_budget(n)?;
        let mut sum = CompensatedSum::default();
        let mut p = *x;
        for _ in 0..n {
            sum.add(self.sys.h(&p));
            p = self.sys.forward(&p);
        }
        Ok((p, t + (n as f64 * self.k - sum.value())))
    }

    /// `[-max(max h, k - min h), -min(min h, k - max h)]` from the sampled
    /// range of `h`.
    pub fn band(&self) -> [f64; 2] {
        let (lo, hi) = self.sys.factor_range();
        [-(hi.max(self.k - lo)), -(lo.min(self.k - hi))]
    }
}

/// Exact action on finite sets with rational data.
pub mod exact {
    use super::*;

    pub fn step(sys: &ConformalSystem, k: &Rational, s: usize, t: &Rational) -> (usize, Rational) {
        let next = sys.forward(&Point::State(s)).state().expect("finite orbit");
        (next, t + k - sys.h_exact(s))
    }

    pub fn power(sys: &ConformalSystem, k: &Rational, s: usize, t: &Rational, n: u64) -> Result<(usize, Rational)> {
        if !sys.is_finite() {
            return Err(Error::MethodMismatch { method: "exact action".into(), space: sys.space.name().into() });
        }
        sys.check_budget(n)?;
        let avg = if n == 0 {
            rational::int(0)
        } else {
            crate::birkhoff::exact::average(sys, s, n as usize)
        };
        let end = sys.iterate(&Point::State(s), n as i64)?.state().expect("finite orbit");
        Ok((end, t + rational::int(n as i64) * (k - avg)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RecurrentEvidence,
    EscapeCertified,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub start: Point,
    pub t0: f64,
    /// First return iterate into the band.
    pub n: u64,
    pub t: f64,
    /// Returns of this orbit within `n_max`, and the last one.
    pub returns: u64,
    pub last_return: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub k: f64,
    pub band: [f64; 2],
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Iterate after which every sampled orbit stays outside the band.
    pub escape_bound: Option<u64>,
    /// The escape bound holds for all points (the factor is cohomologous to a
    /// constant with a known potential), not only for the sampled ones.
    pub rigorous: bool,
    pub n_max: u64,
    pub starts: usize,
}

/// Starting heights inside the band: its ends, its midpoint and `0` when the
/// band contains it.
fn start_heights(band: [f64; 2]) -> Vec<f64> {
    let mut ts = vec![band[0], 0.5 * (band[0] + band[1]), band[1]];
    if band[0] < 0.0 && 0.0 < band[1] {
        ts.push(0.0);
    }
    ts
}

/// Smallest `n >= 1` with `lower + n * drift - slack > upper`.
fn crossing(band: [f64; 2], drift: f64, slack: f64) -> u64 {
    let width = band[1] - band[0] + slack;
    let mut n = (width / drift).floor().max(0.0) as u64 + 1;
    while n > 1 && band[0] + (n - 1) as f64 * drift - slack > band[1] {
        n -= 1;
    }
    while !(band[0] + n as f64 * drift - slack > band[1]) {
        n += 1;
    }
    n
}

/// Orbits started in the band `K`.
///
/// A certificate that every orbit leaves `K` for good is looked for first: a
/// rigorous one when `h = c + phi o psi - phi` with known oscillation of
/// `phi`, otherwise one read off the sampled envelopes up to `n_max`. Without
/// a certificate, the first re-entry into `K` is recorded as a witness.
pub fn properness_probe(act: &TorusAction, n_max: u64, starts: &SampleSpec) -> Result<ProbeReport> {
    if n_max == 0 {
        return Err(Error::Precondition("the probe needs n_max >= 1".into()));
    }
    act.sys.check_budget(n_max)?;
    let band = act.band();
    let xs = starts.resolve(&act.sys.space)?;
    let ts = start_heights(band);
    let report = |verdict, witness, escape_bound, rigorous| ProbeReport {
        k: act.k,
        band,
        verdict,
        witness,
        escape_bound,
        rigorous,
        n_max,
        starts: xs.len() * ts.len(),
    };

    if let Some((c, osc)) = act.sys.factor.cohomologous_constant() {
        // t_n = t_0 + n (k - c) + phi(psi^n x) - phi(x), |phi(.) - phi(.)| <= osc
        if act.k != c {
            let n0 = crossing(band, (act.k - c).abs(), osc);
            return Ok(report(Verdict::EscapeCertified, None, Some(n0), true));
        }
    } else if let Some(n0) = envelope_escape(act, n_max, &xs, band)? {
        return Ok(report(Verdict::EscapeCertified, None, Some(n0), false));
    }

    let found: Vec<Witness> = xs
        .par_iter()
        .flat_map_iter(|x| ts.iter().map(move |&t0| (x, t0)))
        .filter_map(|(x, t0)| first_return(act, x, t0, n_max, band))
        .collect();
    let witness = found.into_iter().min_by(|a, b| a.n.cmp(&b.n));
    Ok(match witness {
        Some(w) => report(Verdict::RecurrentEvidence, Some(w), None, false),
        None => report(Verdict::Inconclusive, None, None, false),
    })
}

/// `E+(n1) = max_x sup_{n1 <= n <= n_max} A_n` bounds the drift from below
/// by `k - E+(n1)` beyond `n1` on the samples (mirrored below `E-`).
fn envelope_escape(act: &TorusAction, n_max: u64, xs: &[Point], band: [f64; 2]) -> Result<Option<u64>> {
    let table = birkhoff_table(act.sys, &SampleSpec::points(xs.to_vec()), n_max as usize, Retention::ExtremaOnly)?;
    let e = &table.extrema;
    let mut best: Option<u64> = None;
    for n1 in 1..=n_max {
        let i = (n1 - 1) as usize;
        let drift = (act.k - e.sup_env_plus[i]).max(e.inf_env_minus[i] - act.k);
        if drift > 0.0 {
            let n0 = crossing(band, drift, 0.0).max(n1);
            if n0 <= n_max && best.is_none_or(|b| n0 < b) {
                best = Some(n0);
            }
        }
    }
    Ok(best)
}

fn first_return(act: &TorusAction, x: &Point, t0: f64, n_max: u64, band: [f64; 2]) -> Option<Witness> {
    let mut p = *x;
    let mut drift = CompensatedSum::default();
    let mut hit: Option<(u64, f64)> = None;
    let mut returns = 0;
    let mut last = 0;
    for n in 1..=n_max {
        drift.add(act.k - act.sys.h(&p));
        p = act.sys.forward(&p);
        let t = t0 + drift.value();
        if band[0] <= t && t <= band[1] {
            returns += 1;
            last = n;
            hit.get_or_insert((n, t));
        }
    }
    hit.map(|(n, t)| Witness { start: *x, t0, n, t, returns, last_return: last })
}

/// `(n, x, t)` along `rho` for `n = 0..=n`.
pub fn orbit_trace(act: &TorusAction, x: &Point, t: f64, n: u64) -> Result<Vec<(u64, Point, f64)>> {
    act.sys.space.check(x)?;
    act.sys.check_budget(n)?;
    let mut out = Vec::with_capacity(n as usize + 1);
    let (mut p, mut drift) = (*x, CompensatedSum::default());
    out.push((0, p, t));
    for i in 1..=n {
        drift.add(act.k - act.sys.h(&p));
        p = act.sys.forward(&p);
        out.push((i, p, t + drift.value()));
    }
    Ok(out)
}

pub fn trace_csv(trace: &[(u64, Point, f64)]) -> String {
    let mut out = String::from("n,x,t\n");
    for (n, p, t) in trace {
        out.push_str(&format!("{n},{},{t}\n", p.coords()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::PresetParams;
    use crate::{builtin_system, Factor, MapKind, ModelSpace};

    fn constant_rotation(angle: f64, value: f64) -> ConformalSystem {
        builtin_system(
            "rotation",
            &PresetParams { grid: Some(64), angle: Some(angle), factor: Some(Factor::constant(value)), ..Default::default() },
        )
        .unwrap()
    }

    fn swap_and_fix() -> ConformalSystem {
        ConformalSystem::new(
            ModelSpace::finite(3).unwrap(),
            MapKind::permutation(vec![1, 0, 2]).unwrap(),
            Factor::table([0, 4, 1]),
            "swap",
        )
        .unwrap()
    }

    #[test]
    fn single_steps() {
        let sys = constant_rotation(0.5, 0.2);
        let act = TorusAction::new(&sys, 1.0).unwrap();
        let (p, t) = act.step(&Point::Circle(0.25), 0.0).unwrap();
        assert_eq!(p, Point::Circle(0.75));
        assert!((t - 0.8).abs() < 1e-15);
        let (q, s) = act.step_inverse(&p, t).unwrap();
        assert_eq!(q, Point::Circle(0.25));
        assert!(s.abs() < 1e-15);

        let still = TorusAction::new(&sys, 0.2).unwrap();
        assert_eq!(still.step(&Point::Circle(0.1), 3.0).unwrap().1, 3.0);

        let cyc = ConformalSystem::new(
            ModelSpace::finite(3).unwrap(),
            MapKind::permutation(vec![1, 2, 0]).unwrap(),
            Factor::table([1, 2, 3]),
            "cycle",
        )
        .unwrap();
        let act = TorusAction::new(&cyc, 2.0).unwrap();
        assert_eq!(act.step(&Point::State(0), 0.0).unwrap(), (Point::State(1), 1.0));
        assert!(act.step(&Point::State(3), 0.0).is_err());
        assert!(TorusAction::new(&cyc, f64::INFINITY).is_err());
    }

    #[test]
    fn powers() {
        let sys = constant_rotation(0.5, 0.2);
        let act = TorusAction::new(&sys, 1.0).unwrap();
        let (p, t) = act.power(&Point::Circle(0.25), 0.0, 4).unwrap();
        assert_eq!(p, Point::Circle(0.25));
        assert!((t - 3.2).abs() < 1e-12);
        assert_eq!(act.power(&Point::Circle(0.3), 1.5, 0).unwrap(), (Point::Circle(0.3), 1.5));

        let fin = swap_and_fix();
        let (s, t) = exact::power(&fin, &rational::int(2), 0, &rational::int(0), 4).unwrap();
        assert_eq!((s, t), (0, rational::int(0)));
        let act = TorusAction::new(&fin, 2.0).unwrap();
        assert_eq!(act.power(&Point::State(0), 0.0, 4).unwrap(), (Point::State(0), 0.0));
    }

    #[test]
    fn band_shape() {
        let sys = constant_rotation(0.5, 0.2);
        assert_eq!(TorusAction::new(&sys, 1.0).unwrap().band(), [-0.8, -0.2]);
        let fin = swap_and_fix();
        assert_eq!(TorusAction::new(&fin, 2.0).unwrap().band(), [-4.0, 2.0]);
    }

    #[test]
    fn constant_factor_at_its_own_size_recurs_immediately() {
        let sys = constant_rotation(crate::system::golden_angle(), 0.2);
        let act = TorusAction::new(&sys, 0.2).unwrap();
        let r = properness_probe(&act, 50, &SampleSpec::grid()).unwrap();
        assert_eq!(r.verdict, Verdict::RecurrentEvidence);
        assert_eq!(r.witness.unwrap().n, 1);
    }

    #[test]
    fn strict_rotation_probes() {
        let sys = builtin_system("strict_rotation", &PresetParams { grid: Some(256), ..Default::default() }).unwrap();
        let zero = properness_probe(&TorusAction::new(&sys, 0.0).unwrap(), 10_000, &SampleSpec::grid()).unwrap();
        assert_eq!(zero.verdict, Verdict::RecurrentEvidence);
        assert!(zero.witness.unwrap().n <= 3 * 256);

        let half = properness_probe(&TorusAction::new(&sys, 0.5).unwrap(), 10_000, &SampleSpec::grid()).unwrap();
        assert_eq!(half.verdict, Verdict::EscapeCertified);
        assert!(half.rigorous);
        assert_eq!(half.escape_bound, Some(13));
    }

    #[test]
    fn envelope_certificate_on_finite_sets() {
        let fin = swap_and_fix();
        // cycle means are 2 and 1; k = 3 drifts upwards at rate >= 1
        let r = properness_probe(&TorusAction::new(&fin, 3.0).unwrap(), 100, &SampleSpec::grid()).unwrap();
        assert_eq!(r.verdict, Verdict::EscapeCertified);
        assert!(!r.rigorous);
        // k = 1.5 sits between the cycle means, so no drift bound exists
        let r = properness_probe(&TorusAction::new(&fin, 1.5).unwrap(), 100, &SampleSpec::grid()).unwrap();
        assert_eq!(r.verdict, Verdict::RecurrentEvidence);
    }

    #[test]
    fn escape_bound_is_sharp_for_the_sampled_orbits() {
        let sys = builtin_system("strict_rotation", &PresetParams { grid: Some(128), ..Default::default() }).unwrap();
        let act = TorusAction::new(&sys, 0.5).unwrap();
        let r = properness_probe(&act, 1000, &SampleSpec::grid()).unwrap();
        let n0 = r.escape_bound.unwrap();
        let band = r.band;
        for x in SampleSpec::grid().resolve(&sys.space).unwrap() {
            for t0 in start_heights(band) {
                let trace = orbit_trace(&act, &x, t0, 200).unwrap();
                assert!(trace[n0 as usize..].iter().all(|(_, _, t)| *t > band[1]));
            }
        }
    }

    #[test]
    fn trace_layout() {
        let sys = constant_rotation(0.5, 0.2);
        let act = TorusAction::new(&sys, 1.0).unwrap();
        let csv = trace_csv(&orbit_trace(&act, &Point::Circle(0.25), 0.0, 2).unwrap());
        assert!(csv.starts_with("n,x,t\n0,0.25,0\n1,0.75,0.8"));
    }

    #[test]
    fn probe_rejects_zero_budget() {
        let sys = constant_rotation(0.5, 0.2);
        let act = TorusAction::new(&sys, 1.0).unwrap();
        assert!(matches!(properness_probe(&act, 0, &SampleSpec::grid()), Err(Error::Precondition(_))));
    }
}
