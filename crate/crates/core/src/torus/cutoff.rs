//! Smooth cutoff `chi`: the ramp of slope `1/(1-2 delta)` on `[delta, 1-delta]`
//! convolved with a smooth bump of half-width `delta`.
//!
//! With the smooth step `Phi` (0 below -1, 1 above 1) the bump is
//! `Phi'(s/delta)/delta`, so
//!
//! ```text
//! chi'(s) = (Phi((s-delta)/delta) - Phi((s-1+delta)/delta)) / (1-2 delta)
//! chi(s)  = delta/(1-2 delta) * (I((s-delta)/delta) - I((s-1+delta)/delta))
//! ```
//!
//! where `I(y)` is the integral of `Phi` from -1 to `y`.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::{Error, Result};

const QUADRATURE_NODES: usize = 48;

fn bump_base(y: f64) -> f64 {
    if y > 0.0 {
        (-1.0 / y).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 at `x <= -1` to 1 at `x >= 1`; `Phi(x) + Phi(-x) = 1`.
fn smooth_step(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = bump_base(x + 1.0);
        a / (a + bump_base(1.0 - x))
    }
}

fn quadrature() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero")))
}

/// `int_{-1}^{y} Phi`; equals `y` once `y >= 1` because `Phi` integrates to 1
/// over `[-1, 1]`.
fn step_integral(y: f64) -> f64 {
    if y <= -1.0 {
        0.0
    } else if y >= 1.0 {
        y
    } else if y <= 0.0 {
        quadrature().integrate(-1.0, y, smooth_step)
    } else {
        // Phi(x) = 1 - Phi(-x) folds the positive half back onto [-1, 0]
        quadrature().integrate(-1.0, 0.0, smooth_step) + y - quadrature().integrate(-y, 0.0, smooth_step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub delta: f64,
    /// `1/(1-2 delta)`, the supremum of `chi'`.
    pub derivative_sup: f64,
}

/// A cutoff whose derivative stays strictly below `bound`.
///
/// `delta = min(0.2, 0.999 (1 - 1/bound) / 2)`, so `1/(1-2 delta) < bound`.
pub fn build_cutoff(bound: f64) -> Result<Cutoff> {
    if !(bound > 1.0) {
        return Err(Error::Infeasible(format!(
            "a cutoff rising from 0 to 1 on [0, 1] has slope at least 1, bound {bound} is too small"
        )));
    }
    let delta = if bound.is_infinite() { 0.2 } else { (0.999 * (1.0 - 1.0 / bound) / 2.0).min(0.2) };
    Ok(Cutoff { delta, derivative_sup: 1.0 / (1.0 - 2.0 * delta) })
}

impl Cutoff {
    pub fn chi(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s >= 1.0 {
            1.0
        } else {
            let d = self.delta;
            let v = d / (1.0 - 2.0 * d) * (step_integral((s - d) / d) - step_integral((s - 1.0 + d) / d));
            v.clamp(0.0, 1.0)
        }
    }

    pub fn chi_prime(&self, s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            let d = self.delta;
            (smooth_step((s - d) / d) - smooth_step((s - 1.0 + d) / d)) / (1.0 - 2.0 * d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled_sup(c: &Cutoff) -> f64 {
        (0..=100_000).map(|i| c.chi_prime(i as f64 / 100_000.0)).fold(0.0, f64::max)
    }

    #[test]
    fn bound_two() {
        let c = build_cutoff(2.0).unwrap();
        assert_eq!(c.delta, 0.2);
        let sup = sampled_sup(&c);
        assert!(sup <= 1.0 / 0.6 + 1e-12, "{sup}");
    }

    #[test]
    fn bound_close_to_one() {
        let c = build_cutoff(1.01).unwrap();
        assert!((c.delta - 0.004_945_544_554_455_4).abs() < 1e-12, "{}", c.delta);
        assert!(sampled_sup(&c) < 1.01);
    }

    #[test]
    fn infeasible_bounds() {
        assert!(matches!(build_cutoff(1.0), Err(Error::Infeasible(_))));
        assert!(matches!(build_cutoff(0.3), Err(Error::Infeasible(_))));
        assert!(matches!(build_cutoff(f64::NAN), Err(Error::Infeasible(_))));
    }

    #[test]
    fn endpoints_and_monotonicity() {
        for bound in [1.05, 1.5, 2.0, 10.0] {
            let c = build_cutoff(bound).unwrap();
            assert_eq!(c.chi(0.0), 0.0);
            assert_eq!(c.chi(1.0), 1.0);
            assert_eq!(c.chi_prime(-0.5), 0.0);
            assert_eq!(c.chi_prime(1.5), 0.0);
            let mut prev = 0.0;
            for i in 0..=2000 {
                let s = i as f64 / 2000.0;
                let v = c.chi(s);
                assert!(v >= prev - 1e-14, "chi decreases at {s}");
                assert!(c.chi_prime(s) >= 0.0);
                prev = v;
            }
            // chi is continuous at the ends of its transition
            assert!(c.chi(1e-9) < 1e-9 && c.chi(1.0 - 1e-9) > 1.0 - 1e-9);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let c = build_cutoff(1.5).unwrap();
        let h = 1e-6;
        for i in 1..200 {
            let s = i as f64 / 200.0;
            let fd = (c.chi(s + h) - c.chi(s - h)) / (2.0 * h);
            assert!((fd - c.chi_prime(s)).abs() < 1e-6, "at {s}: {fd} vs {}", c.chi_prime(s));
        }
    }

    #[test]
    fn step_integral_is_continuous_at_its_seams() {
        for y in [-1.0, 0.0, 1.0] {
            let (lo, hi) = (step_integral(y - 1e-12), step_integral(y + 1e-12));
            assert!((lo - hi).abs() < 1e-10, "jump at {y}: {lo} vs {hi}");
        }
    }
}
