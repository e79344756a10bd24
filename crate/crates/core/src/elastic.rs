//! Elasticity sets from Liouville profiles, and LCS ranks of period groups.
//!
//! For a profile `u`, a scale `c` is forbidden exactly when `1 + (1-c) u`
//! vanishes somewhere, i.e. when `c = (1+u)/u` for some `u != 0`. The
//! elasticity set is the complement of the closure of those values.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::rational::{self, Rational};
use crate::torus::{build_mu, MuOptions, MuReport};
use crate::{ConformalSystem, Error, Point, Result};

pub const DEFAULT_TOL_ZERO: f64 = 1e-12;
pub const DEFAULT_TOL_PROFILE: f64 = 1e-9;
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleProfile {
    pub samples: Vec<f64>,
    pub lambda_nonvanishing: bool,
    pub label: String,
}

impl LiouvilleProfile {
    pub fn new(samples: Vec<f64>, lambda_nonvanishing: bool, label: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Precondition("a Liouville profile needs at least one sample".into()));
        }
        if let Some(bad) = samples.iter().find(|u| !u.is_finite()) {
            return Err(Error::Precondition(format!("profile sample {bad} is not finite")));
        }
        Ok(Self { samples, lambda_nonvanishing, label: label.into() })
    }

    /// `min |1 + (1-c) u|` over the samples; zero iff `c` is hit exactly.
    pub fn vanishing_margin(&self, c: f64) -> f64 {
        self.samples.iter().map(|u| (1.0 + (1.0 - c) * u).abs()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ElasticitySet {
    /// Closed intervals `[a, b]`, sorted and disjoint; `E` is their complement.
    pub forbidden: Vec<[f64; 2]>,
    pub contains_zero_u: bool,
    /// `E` equals the complement (the 1-form never vanishes); otherwise the
    /// complement is only an outer bound.
    pub equality: bool,
    pub resolution: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ElasticityOptions {
    pub tol_zero: f64,
    /// Sample images closer than this are merged into one interval.
    pub resolution: f64,
}

impl Default for ElasticityOptions {
    fn default() -> Self {
        Self { tol_zero: DEFAULT_TOL_ZERO, resolution: DEFAULT_RESOLUTION }
    }
}

pub fn elasticity_from_profile(profile: &LiouvilleProfile) -> Result<ElasticitySet> {
    elasticity_with(profile, ElasticityOptions::default())
}

pub fn elasticity_with(profile: &LiouvilleProfile, opts: ElasticityOptions) -> Result<ElasticitySet> {
    if profile.samples.is_empty() {
        return Err(Error::Precondition("a Liouville profile needs at least one sample".into()));
    }
    let mut contains_zero_u = false;
    let mut images: Vec<f64> = Vec::with_capacity(profile.samples.len());
    for &u in &profile.samples {
        if !u.is_finite() {
            return Err(Error::Precondition(format!("profile sample {u} is not finite")));
        }
        if u.abs() < opts.tol_zero {
            contains_zero_u = true;
        } else {
            // + 0.0 turns -0 into 0
            images.push((1.0 + u) / u + 0.0);
        }
    }
    images.sort_by(f64::total_cmp);
    let mut forbidden: Vec<[f64; 2]> = Vec::new();
    for v in images {
        match forbidden.last_mut() {
            Some(last) if v - last[1] <= opts.resolution => last[1] = v,
            _ => forbidden.push([v, v]),
        }
    }
    Ok(ElasticitySet { forbidden, contains_zero_u, equality: profile.lambda_nonvanishing, resolution: opts.resolution })
}

impl ElasticitySet {
    pub fn contains(&self, c: f64) -> bool {
        !self.forbidden.iter().any(|[a, b]| *a <= c && c <= *b)
    }

    /// Distance from `c` to the forbidden set.
    pub fn distance_to_forbidden(&self, c: f64) -> f64 {
        self.forbidden
            .iter()
            .map(|[a, b]| if c < *a { a - c } else if c > *b { c - b } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    }

    /// `E` as open intervals, `None` standing for an infinite end.
    pub fn components(&self) -> Vec<[Option<f64>; 2]> {
        let mut out = Vec::with_capacity(self.forbidden.len() + 1);
        let mut left = None;
        for [a, b] in &self.forbidden {
            out.push([left, Some(*a)]);
            left = Some(*b);
        }
        out.push([left, None]);
        out
    }

    /// `E = R \ {0}` up to `tol`.
    pub fn is_punctured_line(&self, tol: f64) -> bool {
        matches!(self.forbidden.as_slice(), [[a, b]] if a.abs() <= tol && b.abs() <= tol)
    }
}

/// All samples equal `-1` within `tol`.
pub fn first_kind_test(profile: &LiouvilleProfile, tol: f64) -> bool {
    profile.samples.iter().all(|u| (u + 1.0).abs() <= tol)
}

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    /// Heights on the coarse grid across the window (inclusive ends).
    pub t_steps: usize,
    /// Cap on sampled base points; the grid is strided down to it.
    pub max_points: usize,
    /// Heights are bisected until neighbouring quotients `(1+u)/u` differ
    /// by at most this much, so the samples resolve the image of each
    /// `t`-line at the merge resolution of [`ElasticitySet`].
    pub resolution: f64,
    pub max_depth: u32,
    pub mu: MuOptions,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { t_steps: 41, max_points: 64, resolution: DEFAULT_RESOLUTION, max_depth: 24, mu: MuOptions::default() }
    }
}

/// The profile of the size-`k` mapping torus built from `mu`: with `g` the
/// function behind `mu`, `(1+u)/u = d_t g / (-k)`, so `u = -k / (d_t g + k)`.
pub fn mapping_torus_profile(
    sys: &ConformalSystem,
    k: f64,
    t_window: [f64; 2],
    opts: ProfileOptions,
) -> Result<(LiouvilleProfile, MuReport)> {
    if k == 0.0 {
        return Err(Error::Precondition("the mapping-torus profile needs k != 0".into()));
    }
    let (mu, report) = build_mu(sys, k, t_window, opts.mu)?;
    let grid = sys.space.grid_points();
    let stride = grid.len().div_ceil(opts.max_points.max(1)).max(1);
    let steps = opts.t_steps.max(2);
    let quotient = |x: &Point, t: f64| -> Result<f64> { Ok(mu.g.dt(x, t)? / -k) };

    let lines: Vec<Vec<f64>> = grid
        .par_iter()
        .step_by(stride)
        .map(|x| {
            let ts: Vec<f64> = (0..steps)
                .map(|j| t_window[0] + (t_window[1] - t_window[0]) * j as f64 / (steps - 1) as f64)
                .collect();
            let qs = ts.iter().map(|&t| quotient(x, t)).collect::<Result<Vec<_>>>()?;
            let mut out = qs.clone();
            for w in 0..steps - 1 {
                refine(&quotient, x, (ts[w], qs[w]), (ts[w + 1], qs[w + 1]), opts.resolution, opts.max_depth, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    // (1+u)/u = q  <=>  u = 1/(q - 1)
    let samples = lines.into_iter().flatten().map(|q| 1.0 / (q - 1.0)).collect();
    let profile = LiouvilleProfile::new(samples, true, format!("mapping torus of {} at k = {k}", sys.label))?;
    Ok((profile, report))
}

fn refine(
    q: &dyn Fn(&Point, f64) -> Result<f64>,
    x: &Point,
    (ta, qa): (f64, f64),
    (tb, qb): (f64, f64),
    resolution: f64,
    depth: u32,
    out: &mut Vec<f64>,
) -> Result<()> {
    if depth == 0 || (qa - qb).abs() <= resolution {
        return Ok(());
    }
    let tm = 0.5 * (ta + tb);
    let qm = q(x, tm)?;
    out.push(qm);
    refine(q, x, (ta, qa), (tm, qm), resolution, depth - 1, out)?;
    refine(q, x, (tm, qm), (tb, qb), resolution, depth - 1, out)
}

/// For a strict factor `h = f - f o psi`, `mu(x, t) = f(x) - t` satisfies
/// `mu o rho = mu - k` for every `k` and `d_t mu = -1`, so the profile is
/// `u = -1` everywhere. Returns the profile and the largest cocycle residual
/// seen on the grid.
pub fn strict_profile(sys: &ConformalSystem, k: f64, t_window: [f64; 2]) -> Result<(LiouvilleProfile, f64)> {
    let f = sys
        .strict_generator()
        .ok_or_else(|| Error::Precondition(format!("{} is not built as a coboundary", sys.label)))?;
    let mu = |x: &Point, t: f64| f.eval(x) - t;
    let mut samples = Vec::new();
    let mut residual = 0.0f64;
    for x in sys.space.grid_points() {
        for t in [t_window[0], 0.5 * (t_window[0] + t_window[1]), t_window[1]] {
            let moved = mu(&sys.forward(&x), t + k - sys.h(&x));
            residual = residual.max((moved - mu(&x, t) + k).abs());
            samples.push(mu(&x, t + 1.0) - mu(&x, t));
        }
    }
    Ok((LiouvilleProfile::new(samples, true, format!("strict coordinate of {}", sys.label))?, residual))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaledGapCheck {
    pub k: f64,
    /// `{c : c k in [L-, L+]}`.
    pub c_gap: [f64; 2],
    /// The scaled gap lies in the forbidden set within `tol`, so every `c`
    /// in `E` sends `k` to an admissible size `c k`.
    pub covered: bool,
    pub tol: f64,
}

pub fn scaled_gap_check(set: &ElasticitySet, k: f64, gap: [f64; 2], tol: f64) -> Result<ScaledGapCheck> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::Precondition(format!("size k = {k} must be finite and nonzero")));
    }
    let (a, b) = (gap[0] / k, gap[1] / k);
    let c_gap = [a.min(b), a.max(b)];
    let mut widened: Vec<[f64; 2]> = Vec::new();
    for [lo, hi] in &set.forbidden {
        let (lo, hi) = (lo - tol, hi + tol);
        match widened.last_mut() {
            Some(last) if lo <= last[1] => last[1] = last[1].max(hi),
            _ => widened.push([lo, hi]),
        }
    }
    let covered = widened.iter().any(|[lo, hi]| *lo <= c_gap[0] && c_gap[1] <= *hi);
    Ok(ScaledGapCheck { k, c_gap, covered, tol })
}

/// A period `a + b s` with rational `a, b` and one formal irrational `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Period {
    #[serde(serialize_with = "rational::serialize")]
    pub rational: Rational,
    #[serde(serialize_with = "rational::serialize")]
    pub irrational: Rational,
}

impl Period {
    pub fn rational(v: Rational) -> Self {
        Self { rational: v, irrational: Rational::zero() }
    }

    /// Parses `p/q`, `s`, `2s`, `-3/4s`, `1/2 + 3s`, `1 - s`, `3/2*s`.
    pub fn parse(text: &str) -> Result<Self> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty period".into()));
        }
        let mut out = Self::rational(Rational::zero());
        // split into signed terms, keeping the sign with each term
        let mut terms = Vec::new();
        let mut start = 0;
        for (i, ch) in compact.char_indices() {
            let after_exponent = i > 0 && matches!(compact.as_bytes()[i - 1], b'e' | b'E');
            if (ch == '+' || ch == '-') && i > start && !after_exponent {
                terms.push(&compact[start..i]);
                start = i;
            }
        }
        terms.push(&compact[start..]);
        for term in terms {
            let (sign, body) = match term.as_bytes().first() {
                Some(b'-') => (-Rational::one(), &term[1..]),
                Some(b'+') => (Rational::one(), &term[1..]),
                _ => (Rational::one(), term),
            };
            if let Some(coef) = body.strip_suffix('s') {
                let coef = coef.strip_suffix('*').unwrap_or(coef);
                let c = if coef.is_empty() { Rational::one() } else { rational::parse(coef)? };
                out.irrational += sign * c;
            } else if body.is_empty() {
                return Err(Error::Parse(format!("dangling sign in period `{text}`")));
            } else {
                out.rational += sign * rational::parse(body)?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PeriodGroup {
    pub generators: Vec<Period>,
}

impl PeriodGroup {
    /// Comma-separated periods; the empty string is the trivial group.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim().trim_start_matches('{').trim_end_matches('}').trim();
        if trimmed.is_empty() {
            return Ok(Self::default());
        }
        let generators = trimmed.split(',').map(Period::parse).collect::<Result<_>>()?;
        Ok(Self { generators })
    }
}

/// Rank of the subgroup of `R` generated by the periods: the rank of the
/// rational matrix of coefficients of `1` and `s`.
pub fn lcs_rank(group: &PeriodGroup) -> usize {
    let rows: Vec<&Period> = group.generators.iter().filter(|p| !(p.rational.is_zero() && p.irrational.is_zero())).collect();
    if rows.is_empty() {
        return 0;
    }
    for (i, p) in rows.iter().enumerate() {
        for q in &rows[i + 1..] {
            if &p.rational * &q.irrational != &p.irrational * &q.rational {
                return 2;
            }
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(samples: Vec<f64>) -> LiouvilleProfile {
        LiouvilleProfile::new(samples, true, "test").unwrap()
    }

    #[test]
    fn constant_profiles() {
        let e = elasticity_from_profile(&profile(vec![-1.0; 10])).unwrap();
        assert_eq!(e.forbidden, vec![[0.0, 0.0]]);
        assert!(e.forbidden[0][0].is_sign_positive());
        assert!(e.is_punctured_line(0.0));
        assert!(e.equality && !e.contains(0.0) && e.contains(1e-300) && e.contains(-5.0));

        let e = elasticity_from_profile(&profile(vec![1.0; 3])).unwrap();
        assert_eq!(e.forbidden, vec![[2.0, 2.0]]);
        assert_eq!(e.components(), vec![[None, Some(2.0)], [Some(2.0), None]]);
    }

    #[test]
    fn dense_interval_profile() {
        let samples: Vec<f64> = (0..=10_000).map(|i| 1.0 + i as f64 / 10_000.0).collect();
        let e = elasticity_from_profile(&profile(samples)).unwrap();
        assert_eq!(e.forbidden.len(), 1);
        let [a, b] = e.forbidden[0];
        assert!((a - 1.5).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_samples_are_flagged_not_forbidden() {
        let e = elasticity_from_profile(&profile(vec![0.0, 1e-13, 1.0])).unwrap();
        assert!(e.contains_zero_u);
        assert_eq!(e.forbidden, vec![[2.0, 2.0]]);
        let vanishing = LiouvilleProfile::new(vec![1.0], false, "x").unwrap();
        assert!(!elasticity_from_profile(&vanishing).unwrap().equality);
    }

    #[test]
    fn invalid_profiles() {
        assert!(LiouvilleProfile::new(vec![], true, "x").is_err());
        assert!(LiouvilleProfile::new(vec![f64::NAN], true, "x").is_err());
    }

    #[test]
    fn first_kind() {
        assert!(first_kind_test(&profile(vec![-1.0; 5]), DEFAULT_TOL_PROFILE));
        let mut s = vec![-1.0; 5];
        s[2] = -0.5;
        assert!(!first_kind_test(&profile(s), DEFAULT_TOL_PROFILE));
        assert!(!first_kind_test(&profile(vec![1.0; 5]), DEFAULT_TOL_PROFILE));
    }

    #[test]
    fn scaled_gap() {
        let e = elasticity_from_profile(&profile(vec![-1.0, -0.8])).unwrap();
        // images 0 and -0.25, too far apart to merge
        assert_eq!(e.forbidden.len(), 2);
        let check = scaled_gap_check(&e, 2.0, [-0.5, -0.5], 1e-3).unwrap();
        assert_eq!(check.c_gap, [-0.25, -0.25]);
        assert!(check.covered);
        assert!(!scaled_gap_check(&e, 2.0, [-0.5, 0.0], 1e-3).unwrap().covered);
        assert!(scaled_gap_check(&e, -4.0, [1.0, 1.0], 1e-3).unwrap().covered);
        assert!(scaled_gap_check(&e, 0.0, [0.0, 0.0], 1e-3).is_err());
    }

    #[test]
    fn period_parsing() {
        let p = Period::parse("1/2+3s").unwrap();
        assert_eq!(p.rational, Rational::new(1.into(), 2.into()));
        assert_eq!(p.irrational, rational::int(3));
        assert_eq!(Period::parse("s").unwrap().irrational, rational::int(1));
        assert_eq!(Period::parse("-s").unwrap().irrational, rational::int(-1));
        assert_eq!(Period::parse("2*s - 1").unwrap().rational, rational::int(-1));
        assert_eq!(Period::parse("1e-3").unwrap().rational, Rational::new(1.into(), 1000.into()));
        assert!(Period::parse("").is_err());
        assert!(Period::parse("1+").is_err());
        assert!(Period::parse("x").is_err());
    }

    #[test]
    fn ranks() {
        let rank = |s: &str| lcs_rank(&PeriodGroup::parse(s).unwrap());
        assert_eq!(rank("1, s"), 2);
        assert_eq!(rank("1, 3/2"), 1);
        assert_eq!(rank("3/7, 5/7"), 1);
        assert_eq!(rank(""), 0);
        assert_eq!(rank("{}"), 0);
        assert_eq!(rank("0"), 0);
        assert_eq!(rank("s, 2s, 1/2s"), 1);
        assert_eq!(rank("1+s, 2+2s"), 1);
        assert_eq!(rank("1+s, 1-s"), 2);
    }

    #[test]
    fn strict_coordinate_is_first_kind() {
        let sys = crate::builtin_system(
            "strict_rotation",
            &crate::system::PresetParams { grid: Some(64), ..Default::default() },
        )
        .unwrap();
        let (p, residual) = strict_profile(&sys, 0.7, [-3.0, 3.0]).unwrap();
        assert!(residual < 1e-12);
        assert!(first_kind_test(&p, DEFAULT_TOL_PROFILE));
        assert!(elasticity_from_profile(&p).unwrap().is_punctured_line(1e-12));
        let plain = crate::builtin_system("rotation", &Default::default()).unwrap();
        assert!(strict_profile(&plain, 0.7, [-1.0, 1.0]).is_err());
    }
}
