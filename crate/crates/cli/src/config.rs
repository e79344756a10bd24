use std::path::{Path, PathBuf};

use conformal_core::ergopt::Method;
use conformal_core::rational::{self, Rational};
use conformal_core::system::PresetParams;
use conformal_core::{builtin_system, ConformalSystem, Factor, TrigPoly, TrigTerm};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_N_MAX: usize = 1000;
pub const DEFAULT_T_WINDOW: [f64; 2] = [-10.0, 10.0];
const MAX_K_RANGE_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Admissible,
    Probe,
    Optimize,
    Construct,
    Elasticity,
    Rank,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Analyze => "analyze",
            Self::Admissible => "admissible",
            Self::Probe => "probe",
            Self::Optimize => "optimize",
            Self::Construct => "construct",
            Self::Elasticity => "elasticity",
            Self::Rank => "rank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Freq {
    Circle(i64),
    Torus([i64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDecl {
    pub freq: Freq,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigDecl {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TermDecl>,
}

impl TrigDecl {
    pub fn to_poly(&self) -> TrigPoly {
        TrigPoly {
            constant: self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    freq: match t.freq {
                        Freq::Circle(m) => [m, 0],
                        Freq::Torus(m) => m,
                    },
                    cos: t.cos,
                    sin: t.sin,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorDecl {
    Constant { value: f64 },
    Trig(TrigDecl),
    /// `h = f - f o psi`.
    Coboundary { generator: TrigDecl },
}

/// A system declaration: a builtin preset plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDecl {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[i64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<usize>>,
    /// Exact per-state values: integers, decimals or `"p/q"` strings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<FactorDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<TrigDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_inverse")]
    pub inverse: f64,
    #[serde(default = "tol_zero")]
    pub zero: f64,
    #[serde(default = "tol_profile")]
    pub profile: f64,
    #[serde(default = "resolution")]
    pub resolution: f64,
    /// Slack for comparing scaled elasticity sets with the gap.
    #[serde(default = "combined")]
    pub combined: f64,
}

fn tol_inverse() -> f64 {
    conformal_core::system::DEFAULT_TOL_INVERSE
}
fn tol_zero() -> f64 {
    conformal_core::elastic::DEFAULT_TOL_ZERO
}
fn tol_profile() -> f64 {
    conformal_core::elastic::DEFAULT_TOL_PROFILE
}
fn resolution() -> f64 {
    conformal_core::elastic::DEFAULT_RESOLUTION
}
fn combined() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { inverse: tol_inverse(), zero: tol_zero(), profile: tol_profile(), resolution: resolution(), combined: combined() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodDecl {
    ExactFinite,
    BirkhoffFn { n: usize },
    GridDescent {
        #[serde(default = "sweeps")]
        sweeps: usize,
        #[serde(default = "init_n")]
        init_n: usize,
    },
}

fn sweeps() -> usize {
    200
}
fn init_n() -> usize {
    64
}

impl MethodDecl {
    pub fn to_method(self) -> Method {
        match self {
            Self::ExactFinite => Method::ExactFinite,
            Self::BirkhoffFn { n } => Method::BirkhoffFn { n },
            Self::GridDescent { sweeps, init_n } => Method::GridDescent { sweeps, init_n },
        }
    }
}

/// Where `elasticity` takes its Liouville profiles from. Without any of
/// these it derives one from the mapping-torus construction at `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDecl {
    /// CSV file, one profile per column, header row gives the labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub lambda_nonvanishing: bool,
}

fn yes() -> bool {
    true
}

/// `a:b:step` with `a <= b` and `step > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KRange {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl std::str::FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(format!("k range `{s}` must look like a:b:step"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("k range `{s}`: {e}"));
        let r = Self { start: num(a)?, end: num(b)?, step: num(step)? };
        if !(r.start.is_finite() && r.end.is_finite() && r.step.is_finite()) {
            return Err(format!("k range `{s}` must be finite"));
        }
        if r.step <= 0.0 || r.start > r.end {
            return Err(format!("k range `{s}` needs a <= b and step > 0"));
        }
        if (r.end - r.start) / r.step > MAX_K_RANGE_STEPS as f64 {
            return Err(format!("k range `{s}` has more than {MAX_K_RANGE_STEPS} steps"));
        }
        Ok(r)
    }
}

impl TryFrom<String> for KRange {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<KRange> for String {
    fn from(r: KRange) -> String {
        format!("{}:{}:{}", r.start, r.end, r.step)
    }
}

impl KRange {
    /// `a + i step` up to `b`, computed without accumulation and rounded to
    /// 12 decimals so decimal grids hit their decimal values (`0.2`, not
    /// `0.20000000000000007`).
    pub fn values(&self) -> Vec<f64> {
        let steps = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=steps).map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Overrides the grid of the system declaration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_range: Option<KRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodDecl>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    /// Random samples for residual checks in `construct`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileDecl>,
    /// Period generators for `rank`, e.g. `"1, s"` or `"1/2+3s, -s"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        // relative profile paths are taken from the config's directory
        if let Some(csv) = cfg.profile.as_mut().and_then(|p| p.csv.as_mut()) {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn command(&self) -> Command {
        self.command.expect("validated")
    }

    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(DEFAULT_N_MAX)
    }

    pub fn t_window(&self) -> [f64; 2] {
        self.t_window.unwrap_or(DEFAULT_T_WINDOW)
    }

    /// The requested values of `k`: the single `k`, then the scan.
    pub fn ks(&self) -> Vec<f64> {
        let mut ks: Vec<f64> = self.k.into_iter().collect();
        if let Some(r) = &self.k_range {
            ks.extend(r.values());
        }
        ks
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let Some(command) = self.command else {
            return bad("no command given (config `command` or --command)".into());
        };
        let t = &self.tolerances;
        for (name, v) in [
            ("inverse", t.inverse),
            ("zero", t.zero),
            ("profile", t.profile),
            ("resolution", t.resolution),
            ("combined", t.combined),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerance `{name}` must be positive, got {v}"));
            }
        }
        if self.n_max == Some(0) {
            return bad("n_max must be positive".into());
        }
        if let Some(k) = self.k {
            if !k.is_finite() {
                return bad("k must be finite".into());
            }
        }
        if let Some([a, b]) = self.t_window {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return bad(format!("t_window [{a}, {b}] must be a finite interval with a < b"));
            }
        }
        if self.samples == Some(0) {
            return bad("samples must be positive".into());
        }
        let needs_system = match command {
            Command::Rank => false,
            Command::Elasticity => self.profile.is_none(),
            _ => true,
        };
        if needs_system && self.system.is_none() {
            return bad(format!("command `{}` needs a `system` declaration", command.name()));
        }
        match command {
            Command::Probe if self.k.is_none() && self.k_range.is_none() => bad("probe needs `k` or `k_range`".into()),
            Command::Construct if self.k.is_none() => bad("construct needs `k`".into()),
            Command::Elasticity if self.profile.is_none() && self.k.is_none() => {
                bad("elasticity needs a `profile` or `k` for the mapping-torus profile".into())
            }
            Command::Elasticity => match &self.profile {
                Some(p) if p.csv.is_some() == p.samples.is_some() => {
                    bad("profile needs exactly one of `csv` and `samples`".into())
                }
                _ => Ok(()),
            },
            Command::Rank if self.generators.is_none() => bad("rank needs `generators`".into()),
            _ => Ok(()),
        }
    }

    pub fn build_system(&self) -> Result<ConformalSystem, CliError> {
        let decl = self.system.as_ref().ok_or_else(|| CliError::Validation("no system declared".into()))?;
        let values = decl
            .values
            .as_ref()
            .map(|vs| vs.iter().map(exact_value).collect::<Result<Vec<_>, _>>())
            .transpose()?;
        let params = PresetParams {
            grid: self.grid.or(decl.grid),
            angle: decl.angle,
            matrix: decl.matrix,
            shift: decl.shift,
            table: decl.table.clone(),
            values,
            factor: decl.factor.as_ref().map(|f| match f {
                FactorDecl::Constant { value } => Factor::constant(*value),
                FactorDecl::Trig(t) => Factor::Trig { poly: t.to_poly() },
                FactorDecl::Coboundary { generator } => Factor::Coboundary { generator: generator.to_poly() },
            }),
            generator: decl.generator.as_ref().map(TrigDecl::to_poly),
        };
        let sys = builtin_system(&decl.preset, &params)?;
        let sys = ConformalSystem::with_tolerance(sys.space, sys.map, sys.factor, sys.label, self.tolerances.inverse)?;
        Ok(match decl.max_iterations {
            Some(m) => sys.with_max_iterations(m),
            None => sys,
        })
    }
}

fn exact_value(v: &Value) -> Result<Rational, CliError> {
    let r = match v {
        Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(rational::int(i)),
            None => rational::from_f64(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => rational::parse(s),
        other => return Err(CliError::Validation(format!("factor value {other} is neither a number nor a string"))),
    };
    r.map_err(|e| CliError::Validation(e.to_string()))
}
