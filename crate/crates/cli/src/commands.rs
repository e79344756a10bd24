use std::collections::BTreeMap;

use conformal_core::birkhoff::{self, birkhoff_table, limit_estimates, AdmissibleSet, ErrorBound, LimitEstimate, Retention};
use conformal_core::elastic::{
    self, elasticity_with, first_kind_test, mapping_torus_profile, scaled_gap_check, ElasticityOptions, LiouvilleProfile,
    PeriodGroup, ProfileOptions,
};
use conformal_core::ergopt::{self, maxmin_coboundary, minmax_coboundary, Method, OptimizationResult};
use conformal_core::rational;
use conformal_core::sampling::SampleSpec;
use conformal_core::torus::{self, build_mu, properness_probe, MuOptions, TorusAction, Verdict};
use conformal_core::ConformalSystem;
use serde_json::{json, Value};

use crate::cache::Outcome;
use crate::config::{Command, ProfileDecl, RunConfig};
use crate::CliError;

/// Longest witness orbit written to `trace.csv`.
const MAX_TRACE: u64 = 10_000;

#[derive(Default)]
struct Out {
    artifacts: BTreeMap<String, String>,
    warnings: Vec<String>,
    inconclusive: bool,
}

impl Out {
    fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    fn finish(self, payload: Value) -> Outcome {
        Outcome { payload, artifacts: self.artifacts, warnings: self.warnings, inconclusive: self.inconclusive }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Out::default();
    let payload = match cfg.command() {
        Command::Analyze => analyze(cfg, &mut out)?,
        Command::Admissible => admissible(cfg, &mut out)?,
        Command::Probe => probe(cfg, &mut out)?,
        Command::Optimize => optimize(cfg, &mut out)?,
        Command::Construct => construct(cfg, &mut out)?,
        Command::Elasticity => elasticity(cfg, &mut out)?,
        Command::Rank => rank(cfg)?,
    };
    Ok(out.finish(payload))
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn limits(sys: &ConformalSystem, n_max: usize, out: &mut Out) -> Result<(birkhoff::BirkhoffTable, LimitEstimate), CliError> {
    let table = birkhoff_table(sys, &SampleSpec::grid(), n_max, Retention::ExtremaOnly)?;
    let est = limit_estimates(sys, &table)?;
    if est.error_bound == ErrorBound::Heuristic {
        out.warn(format!(
            "limits L-, L+ are read off the truncated envelopes at n = {n_max} over {} sampled points; no error bound is known",
            table.points.len()
        ));
    }
    if !est.exact && !est.stable {
        out.warn("the envelope curves have not stabilized by n_max; increase n_max");
    }
    Ok((table, est))
}

fn analyze(cfg: &RunConfig, out: &mut Out) -> Result<Value, CliError> {
    let sys = cfg.build_system()?;
    let n = cfg.n_max();
    let (table, est) = limits(&sys, n, out)?;
    let e = &table.extrema;
    let residual = if sys.is_finite() {
        json!({"value": rational::display(&birkhoff::exact::coboundary_residual(&sys, n)?), "exact": true})
    } else {
        json!({"value": birkhoff::coboundary_residual(&sys, n, &table.points)?, "exact": false})
    };
    out.artifacts.insert("extrema.csv".into(), table.extrema_csv());
    Ok(json!({
        "system": to_json(&sys),
        "n_max": n,
        "points": table.points.len(),
        "extrema_at_n_max": {
            "min_average": e.min_average[n - 1],
            "max_average": e.max_average[n - 1],
            "inf_env_minus": e.inf_env_minus[n - 1],
            "sup_env_plus": e.sup_env_plus[n - 1],
        },
        "limits": to_json(&est),
        "coboundary_residual": residual,
    }))
}

fn admissible(cfg: &RunConfig, out: &mut Out) -> Result<Value, CliError> {
    let sys = cfg.build_system()?;
    let (_, est) = limits(&sys, cfg.n_max(), out)?;
    let set = AdmissibleSet::from_estimate(&est);
    let ks = cfg.ks();
    let mut csv = String::from("k,admissible\n");
    let phase: Vec<Value> = ks
        .iter()
        .map(|&k| {
            let member = set.contains(k);
            csv.push_str(&format!("{k},{member}\n"));
            json!({"k": k, "admissible": member})
        })
        .collect();
    if !ks.is_empty() {
        out.artifacts.insert("phase.csv".into(), csv);
    }
    Ok(json!({"system": sys.label, "admissible": to_json(&set), "limits": to_json(&est), "phase": phase}))
}

fn probe(cfg: &RunConfig, out: &mut Out) -> Result<Value, CliError> {
    let sys = cfg.build_system()?;
    let n_max = cfg.n_max() as u64;
    let ks = cfg.ks();
    let mut reports = Vec::with_capacity(ks.len());
    let mut csv = String::from("k,verdict,escape_bound,rigorous,witness_n\n");
    for &k in &ks {
        let act = TorusAction::new(&sys, k)?;
        let rep = properness_probe(&act, n_max, &SampleSpec::grid())?;
        let verdict = to_json(&rep.verdict);
        csv.push_str(&format!(
            "{k},{},{},{},{}\n",
            verdict.as_str().unwrap_or_default(),
            rep.escape_bound.map(|n| n.to_string()).unwrap_or_default(),
            rep.rigorous,
            rep.witness.as_ref().map(|w| w.n.to_string()).unwrap_or_default(),
        ));
        match rep.verdict {
            Verdict::RecurrentEvidence => {
                out.warn("RecurrentEvidence is numerical: a sampled orbit re-entered the band within n_max");
            }
            Verdict::EscapeCertified if !rep.rigorous => out.warn(format!(
                "escape bound at k = {k} is read off the sampled envelopes up to n_max and is not rigorous"
            )),
            Verdict::Inconclusive => {
                out.inconclusive = true;
                out.warn(format!("probe at k = {k} is inconclusive within n_max = {n_max}"));
            }
            Verdict::EscapeCertified => {}
        }
        // trace of the witness for a single k
        if ks.len() == 1 {
            if let Some(w) = &rep.witness {
                let trace = torus::orbit_trace(&act, &w.start, w.t0, w.n.min(MAX_TRACE))?;
                out.artifacts.insert("trace.csv".into(), torus::trace_csv(&trace));
            }
        }
        reports.push(to_json(&rep));
    }
    out.artifacts.insert("phase.csv".into(), csv);
    Ok(json!({"system": sys.label, "probes": reports}))
}

fn optimize(cfg: &RunConfig, out: &mut Out) -> Result<Value, CliError> {
    let sys = cfg.build_system()?;
    let method = match cfg.method {
        Some(m) => m.to_method(),
        None if sys.is_finite() => Method::ExactFinite,
        None => Method::BirkhoffFn { n: cfg.n_max() },
    };
    let up = minmax_coboundary(&sys, method)?;
    let down = maxmin_coboundary(&sys, method)?;
    let mut note = |name: &str, r: &OptimizationResult| {
        if r.heuristic {
            out.warn(format!("{name} value from method {} is a relaxation heuristic on the sampled grid", r.method));
        } else if r.exact_value.is_none() {
            out.warn(format!("{name} value from method {} is evaluated on the sampled grid, not exact", r.method));
        }
        out.artifacts.insert(format!("potential_{name}.csv"), r.potential.to_csv());
    };
    note("minmax", &up);
    note("maxmin", &down);
    let strict = if sys.is_finite() { Some(to_json(&ergopt::is_strict_finite(&sys)?)) } else { None };
    Ok(json!({
        "system": sys.label,
        "method": method.name(),
        "exact": up.exact_value.is_some(),
        "minmax": to_json(&up),
        "maxmin": to_json(&down),
        "strict": strict,
    }))
}

fn construct(cfg: &RunConfig, out: &mut Out) -> Result<Value, CliError> {
    let sys = cfg.build_system()?;
    let k = cfg.k.expect("validated");
    let window = cfg.t_window();
    let opts = MuOptions { samples: cfg.samples.unwrap_or(MuOptions::default().samples), seed: cfg.seed, ..MuOptions::default() };
    let (mu, report) = build_mu(&sys, k, window, opts)?;
    if !sys.is_finite() {
        out.warn("mu residuals are measured on random samples, not bounded everywhere");
    }
    let grid = sys.space.grid_points();
    let stride = grid.len().div_ceil(16).max(1);
    let mut csv = String::from("x,t,g,dt_g,mu\n");
    for x in grid.iter().step_by(stride) {
        for j in 0..=40 {
            let t = window[0] + (window[1] - window[0]) * j as f64 / 40.0;
            let (g, dg) = mu.g.eval_with_derivative(x, t)?;
            csv.push_str(&format!("{},{t},{g},{dg},{}\n", x.coords(), mu.eval(x, t)?));
        }
    }
    out.artifacts.insert("construction.csv".into(), csv);
    Ok(json!({"system": sys.label, "t_window": window, "mu": to_json(&report)}))
}

fn read_profiles(decl: &ProfileDecl) -> Result<Vec<LiouvilleProfile>, CliError> {
    let nonvanishing = decl.lambda_nonvanishing;
    if let Some(samples) = &decl.samples {
        return Ok(vec![LiouvilleProfile::new(samples.clone(), nonvanishing, "inline")?]);
    }
    let path = decl.csv.as_ref().expect("validated");
    let bad = |m: String| CliError::Validation(format!("profile csv {}: {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let labels: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); labels.len()];
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        for (col, field) in record.iter().enumerate() {
            if field.is_empty() {
                continue;
            }
            let u = field.parse::<f64>().map_err(|e| bad(format!("row {}: `{field}`: {e}", line + 2)))?;
            columns[col].push(u);
        }
    }
    labels
        .into_iter()
        .zip(columns)
        .map(|(label, samples)| LiouvilleProfile::new(samples, nonvanishing, label).map_err(CliError::from))
        .collect()
}

fn elasticity(cfg: &RunConfig, out: &mut Out) -> Result<Value, CliError> {
    let tol = cfg.tolerances;
    let opts = ElasticityOptions { tol_zero: tol.zero, resolution: tol.resolution };
    let mut extra = json!(null);
    let profiles = match &cfg.profile {
        Some(decl) => read_profiles(decl)?,
        None => {
            let sys = cfg.build_system()?;
            let k = cfg.k.expect("validated");
            let popts = ProfileOptions {
                resolution: tol.resolution,
                mu: MuOptions { seed: cfg.seed, ..MuOptions::default() },
                ..ProfileOptions::default()
            };
            let (profile, report) = mapping_torus_profile(&sys, k, cfg.t_window(), popts)?;
            let (_, est) = limits(&sys, cfg.n_max(), out)?;
            let set = elasticity_with(&profile, opts)?;
            let check = scaled_gap_check(&set, k, [est.l_minus, est.l_plus], tol.combined)?;
            extra = json!({"mu": to_json(&report), "limits": to_json(&est), "scaled_gap_check": to_json(&check)});
            vec![profile]
        }
    };
    let mut csv = String::from("profile,a,b\n");
    let mut sets = Vec::with_capacity(profiles.len());
    for p in &profiles {
        let set = elasticity_with(p, opts)?;
        if !set.equality {
            out.warn(format!(
                "profile `{}`: the 1-form may vanish, so the complement of the forbidden set only bounds E from outside",
                p.label
            ));
        }
        for [a, b] in &set.forbidden {
            csv.push_str(&format!("{},{a},{b}\n", p.label));
        }
        sets.push(json!({
            "label": p.label,
            "samples": p.samples.len(),
            "first_kind": first_kind_test(p, tol.profile),
            "elasticity": to_json(&set),
        }));
    }
    out.artifacts.insert("forbidden.csv".into(), csv);
    Ok(json!({"profiles": sets, "mapping_torus": extra}))
}

fn rank(cfg: &RunConfig) -> Result<Value, CliError> {
    let group = PeriodGroup::parse(cfg.generators.as_deref().expect("validated"))?;
    let generators: Vec<String> = group
        .generators
        .iter()
        .map(|p| format!("{} + {} s", rational::display(&p.rational), rational::display(&p.irrational)))
        .collect();
    Ok(json!({"generators": generators, "rank": elastic::lcs_rank(&group), "exact": true}))
}
