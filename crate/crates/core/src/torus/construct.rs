//! The function `g` with `g(psi x, t + 1) = g(x, t) - H(x)` and
//! `d_t g + k` nonvanishing, for a factor `H` that misses `k`, and the
//! size-`k` coordinate `mu` with `mu o rho = mu - k`.
//!
//! For `H < k` and `k > 0`:
//!
//! ```text
//! g(x,t) = sum_{i>=0} (1 - chi(t+1+i)) H(psi^i x) - sum_{i>=0} chi(t-i) H(psi^{-i-1} x)
//! ```
//!
//! Only indices `i < -t` (first sum) and `i < t` (second sum) contribute.
//! For `H > k` the same formula runs for `(psi^-1, -H o psi^-1, -k)` and `t`
//! is flipped. When the branch's own size is not positive, or `max H <= -k`
//! so that the derivative bound degenerates, `H` and `k` are both lowered by
//! `c = 2 max H - k`; then `k - c = 2 (k - max H) > 0` and `g - c t`
//! solves the original equation.

use rayon::prelude::*;
use serde::Serialize;

use super::cutoff::{build_cutoff, Cutoff};
use crate::birkhoff::{self, transfer_potential, CompensatedSum, TransferPotential};
use crate::sampling::{random_point, rng};
use crate::{ConformalSystem, Error, Point, Result};

use rand::Rng;

const ROOT_TOL: f64 = 1e-12;
const MAX_ROOT_STEPS: usize = 400;
/// `k` counts as missed by a sampled range only beyond this (relative)
/// margin; rounding in `A_n` of a constant factor is far below it.
const RANGE_TOL: f64 = 1e-12;

fn misses(k: f64, (lo, hi): (f64, f64)) -> bool {
    let tol = RANGE_TOL * k.abs().max(1.0);
    k < lo - tol || k > hi + tol
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GInfo {
    /// `H = A_n(h)`; `n = 1` is `h` itself.
    pub n: usize,
    pub k: f64,
    /// Sampled `(min H, max H)`.
    pub factor_range: (f64, f64),
    pub mirrored: bool,
    pub shift: f64,
    /// Size in the branch's own frame after the shift; always positive.
    pub branch_k: f64,
    pub epsilon: f64,
    pub cutoff: Cutoff,
    pub window: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct GFunction<'a> {
    sys: &'a ConformalSystem,
    info: GInfo,
}

/// `g` for `H = h` on the window `t_window`.
pub fn build_g(sys: &ConformalSystem, k: f64, t_window: [f64; 2]) -> Result<GFunction<'_>> {
    let range = sys.factor_range();
    GFunction::new(sys, 1, k, t_window, range)
}

fn averaged_range(sys: &ConformalSystem, n: usize) -> Result<(f64, f64)> {
    if n == 1 {
        return Ok(sys.factor_range());
    }
    sys.space.grid_points().iter().try_fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let a = birkhoff::average(sys, p, n)?;
        Ok((lo.min(a), hi.max(a)))
    })
}

impl<'a> GFunction<'a> {
    fn new(sys: &'a ConformalSystem, n: usize, k: f64, window: [f64; 2], range: (f64, f64)) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::Precondition(format!("size k = {k} must be finite")));
        }
        if !(window[0].is_finite() && window[1].is_finite() && window[0] <= window[1]) {
            return Err(Error::Precondition(format!("t window {window:?} must be a finite interval")));
        }
        let (lo, hi) = range;
        if !misses(k, range) {
            return Err(Error::Precondition(format!("k = {k} lies in the sampled factor range [{lo}, {hi}]")));
        }
        let (mirrored, top, size) = if hi < k {
            (false, hi, k)
        } else if lo > k {
            (true, -lo, -k)
        } else {
            return Err(Error::Precondition(format!("k = {k} lies in the sampled factor range [{lo}, {hi}]")));
        };
        let shift = if size + top <= 0.0 { 2.0 * top - size } else { 0.0 };
        let branch_k = size - shift;
        let epsilon = (branch_k - (top - shift)) / 2.0;
        let cutoff = build_cutoff(1.0 / (1.0 - epsilon / branch_k))?;
        let reach = window[0].abs().max(window[1].abs()).ceil() as u64;
        sys.check_budget(reach + n as u64)?;
        let info = GInfo { n, k, factor_range: range, mirrored, shift, branch_k, epsilon, cutoff, window };
        Ok(Self { sys, info })
    }

    pub fn info(&self) -> &GInfo {
        &self.info
    }

    /// `H(x) = A_n(h)(x)`.
    pub fn factor(&self, x: &Point) -> f64 {
        let mut acc = CompensatedSum::default();
        let mut p = *x;
        for _ in 0..self.info.n {
            acc.add(self.sys.h(&p));
            p = self.sys.forward(&p);
        }
        acc.value() / self.info.n as f64
    }

    /// `H(psi^j x)` for `j` in `lo..hi`.
    fn orbit_factor(&self, x: &Point, lo: i64, hi: i64) -> Vec<f64> {
        if hi <= lo {
            return Vec::new();
        }
        let mut start = *x;
        for _ in 0..(-lo).max(0) {
            start = self.sys.backward(&start);
        }
        for _ in 0..lo.max(0) {
            start = self.sys.forward(&start);
        }
        let n = self.info.n;
        let len = (hi - lo) as usize;
        let mut hs = Vec::with_capacity(len + n - 1);
        let mut p = start;
        for _ in 0..len + n - 1 {
            hs.push(self.sys.h(&p));
            p = self.sys.forward(&p);
        }
        (0..len)
            .map(|j| {
                let mut acc = CompensatedSum::default();
                hs[j..j + n].iter().for_each(|&v| acc.add(v));
                acc.value() / n as f64
            })
            .collect()
    }

    /// `(g(x, t), d_t g(x, t))`.
    pub fn eval_with_derivative(&self, x: &Point, t: f64) -> Result<(f64, f64)> {
        self.sys.space.check(x)?;
        if !t.is_finite() {
            return Err(Error::Precondition(format!("t = {t} must be finite")));
        }
        let GInfo { mirrored, shift: c, cutoff, n, .. } = self.info;
        let s = if mirrored { -t } else { t };
        let first = if s < 0.0 { (-s).ceil() as i64 } else { 0 };
        let second = if s > 0.0 { s.ceil() as i64 } else { 0 };
        self.sys.check_budget((first + second) as u64 + n as u64)?;

        // branch values: F(i) for the forward sum, B(i) for the backward one
        let (fwd, bwd): (Vec<f64>, Vec<f64>) = if mirrored {
            let back = self.orbit_factor(x, -first, 0);
            let ahead = self.orbit_factor(x, 0, second);
            (back.iter().rev().map(|v| -v).collect(), ahead.iter().map(|v| -v).collect())
        } else {
            let ahead = self.orbit_factor(x, 0, first);
            let back = self.orbit_factor(x, -second, 0);
            (ahead, back.into_iter().rev().collect())
        };

        let mut g = CompensatedSum::default();
        let mut dg = CompensatedSum::default();
        for (i, f) in fwd.iter().enumerate() {
            let arg = s + 1.0 + i as f64;
            g.add((1.0 - cutoff.chi(arg)) * (f - c));
            dg.add(-cutoff.chi_prime(arg) * (f - c));
        }
        for (i, b) in bwd.iter().enumerate() {
            let arg = s - i as f64;
            g.add(-cutoff.chi(arg) * (b - c));
            dg.add(-cutoff.chi_prime(arg) * (b - c));
        }
        g.add(-c * s);
        dg.add(-c);
        Ok(if mirrored { (g.value(), -dg.value()) } else { (g.value(), dg.value()) })
    }

    pub fn eval(&self, x: &Point, t: f64) -> Result<f64> {
        self.eval_with_derivative(x, t).map(|(g, _)| g)
    }

    pub fn dt(&self, x: &Point, t: f64) -> Result<f64> {
        self.eval_with_derivative(x, t).map(|(_, d)| d)
    }

    /// `|g(psi x, t + 1) - g(x, t) + H(x)|`.
    pub fn functional_residual(&self, x: &Point, t: f64) -> Result<f64> {
        let next = self.eval(&self.sys.forward(x), t + 1.0)?;
        Ok((next - self.eval(x, t)? + self.factor(x)).abs())
    }

    /// Sign of `d_t g + k`: `+1` on the direct branch, `-1` on the mirrored one.
    pub fn slope_sign(&self) -> f64 {
        if self.info.mirrored {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuOptions {
    /// Largest averaging order tried when looking for `k` outside `A_n(h)`.
    pub n_scan: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for MuOptions {
    fn default() -> Self {
        Self { n_scan: 64, samples: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MuReport {
    pub k: f64,
    /// Averaging order whose range misses `k`.
    pub n: usize,
    pub g: GInfo,
    /// `max |mu(rho(x, t)) - mu(x, t) + k|` over the random samples.
    pub max_residual: f64,
    /// `min |d_t sigma|` over the same samples.
    pub min_slope: f64,
    pub samples: usize,
    pub seed: u64,
}

/// `sigma(x, t) = (x, g(x, t) + t k + f_n(x))` with `g` built for `A_n(h)`,
/// and `mu = -k * (t o sigma^-1)`.
pub struct MuFunction<'a> {
    pub g: GFunction<'a>,
    potential: TransferPotential<'a>,
    k: f64,
}

pub fn build_mu(sys: &ConformalSystem, k: f64, t_window: [f64; 2], opts: MuOptions) -> Result<(MuFunction<'_>, MuReport)> {
    let mut chosen = None;
    for n in 1..=opts.n_scan.max(1) {
        let range = averaged_range(sys, n)?;
        if misses(k, range) {
            chosen = Some((n, range));
            break;
        }
    }
    let Some((n, range)) = chosen else {
        return Err(Error::NotFound(format!(
            "k = {k} lies in the sampled range of every A_n(h) with n <= {}",
            opts.n_scan
        )));
    };
    let g = GFunction::new(sys, n, k, t_window, range)?;
    let mu = MuFunction { g, potential: transfer_potential(sys, n)?, k };

    let mut r = rng(opts.seed);
    let samples: Vec<(Point, f64)> = (0..opts.samples)
        .map(|_| (random_point(&sys.space, &mut r), r.gen_range(t_window[0]..=t_window[1])))
        .collect();
    let checks: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|(x, t)| Ok((mu.cocycle_residual(x, *t)?, mu.sigma_slope(x, *t)?.abs())))
        .collect::<Result<_>>()?;
    let report = MuReport {
        k,
        n,
        g: *mu.g.info(),
        max_residual: checks.iter().map(|c| c.0).fold(0.0, f64::max),
        min_slope: checks.iter().map(|c| c.1).fold(f64::INFINITY, f64::min),
        samples: opts.samples,
        seed: opts.seed,
    };
    Ok((mu, report))
}

impl MuFunction<'_> {
    pub fn n(&self) -> usize {
        self.g.info.n
    }

    /// Second component of `sigma(x, t)`.
    pub fn sigma(&self, x: &Point, t: f64) -> Result<f64> {
        Ok(self.g.eval(x, t)? + t * self.k + self.potential.eval(x))
    }

    /// `d_t g + k`, one-signed by construction.
    pub fn sigma_slope(&self, x: &Point, t: f64) -> Result<f64> {
        Ok(self.g.dt(x, t)? + self.k)
    }

    /// The `t` with `sigma(x, t) = s`: bracket, bisect, then Newton.
    pub fn sigma_inverse(&self, x: &Point, s: f64) -> Result<f64> {
        let f_x = self.potential.eval(x);
        let dir = self.g.slope_sign();
        let eval = |t: f64| -> Result<(f64, f64)> {
            let (g, dg) = self.g.eval_with_derivative(x, t)?;
            Ok((g + t * self.k + f_x - s, dg + self.k))
        };
        // sigma grows like t (k - H) away from 0
        let drift = self.k - self.g.factor(x);
        let mut t0 = if drift.abs() > 1e-12 { (s - f_x) / drift } else { 0.0 };
        if !t0.is_finite() {
            t0 = 0.0;
        }
        let (v0, _) = eval(t0)?;
        if v0 == 0.0 {
            return Ok(t0);
        }
        // move in the direction that brings sigma towards s
        let step_dir = if (v0 > 0.0) == (dir > 0.0) { -1.0 } else { 1.0 };
        let (mut a, mut b) = (t0, t0);
        let mut width = 1.0;
        let mut steps = 0;
        loop {
            let next = t0 + step_dir * width;
            let (v, _) = eval(next)?;
            if (v > 0.0) != (v0 > 0.0) || v == 0.0 {
                if step_dir > 0.0 {
                    b = next;
                } else {
                    a = next;
                }
                break;
            }
            if step_dir > 0.0 {
                a = next;
            } else {
                b = next;
            }
            width *= 2.0;
            steps += 1;
            if steps > 60 {
                return Err(Error::NotFound(format!("no bracket for sigma^-1 at {x}, s = {s}")));
            }
        }
        let sign_a = eval(a)?.0 > 0.0;
        // bisection down to a unit-scale bracket, then safeguarded Newton
        let mut t = 0.5 * (a + b);
        for _ in 0..MAX_ROOT_STEPS {
            let (v, d) = eval(t)?;
            if v == 0.0 {
                return Ok(t);
            }
            if (v > 0.0) == sign_a {
                a = t;
            } else {
                b = t;
            }
            let newton = t - v / d;
            let next = if (b - a).abs() < 1e-3 && newton > a.min(b) && newton < a.max(b) {
                newton
            } else {
                0.5 * (a + b)
            };
            if (next - t).abs() <= ROOT_TOL * t.abs().max(1.0) {
                return Ok(next);
            }
            t = next;
        }
        Err(Error::NotFound(format!("sigma^-1 did not converge at {x}, s = {s}")))
    }

    pub fn eval(&self, x: &Point, t: f64) -> Result<f64> {
        Ok(-self.k * self.sigma_inverse(x, t)?)
    }

    /// `|mu(psi x, t + k - h(x)) - mu(x, t) + k|`.
    pub fn cocycle_residual(&self, x: &Point, t: f64) -> Result<f64> {
        let sys = self.g.sys;
        let moved = self.eval(&sys.forward(x), t + self.k - sys.h(x))?;
        Ok((moved - self.eval(x, t)? + self.k).abs())
    }

    /// With `sigma_c(x, t) = g(x, t) + t c k + f_n(x)`:
    /// `|sigma_c(psi x, t + 1) - (sigma_c(x, t) + c k - h(x))|`, i.e. how far
    /// `sigma_c o rho_1` is from `rho_(c k - h) o sigma_c`.
    pub fn conjugation_residual(&self, x: &Point, t: f64, c: f64) -> Result<f64> {
        let sys = self.g.sys;
        let ck = c * self.k;
        let sigma_c = |p: &Point, s: f64| -> Result<f64> { Ok(self.g.eval(p, s)? + s * ck + self.potential.eval(p)) };
        let lhs = sigma_c(&sys.forward(x), t + 1.0)?;
        let rhs = sigma_c(x, t)? + ck - sys.h(x);
        Ok((lhs - rhs).abs())
    }
}
