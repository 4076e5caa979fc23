//! The subcommands. Each reads a resolved [`CampaignConfig`], writes its
//! files under the output directory and returns a one-line summary.

use std::fs;
use std::path::{Path, PathBuf};

use gaflab::estimate::{
    estimate_event, estimate_sweep, estimate_sweep_adaptive, fit_rate, EstimatorReport, EventKind, EventModel,
    EventSpec,
};
use gaflab::gaf::DEFAULT_TAIL_EPS;
use gaflab::lemmas::{ou_lemma_probe, OuLemma};
use gaflab::toy::{LatticeSpec, ToyModel, ToySimulator};
use gaflab::zeros::{find_zeros, jensen_residual, write_zero_csv, ZeroSet};
use gaflab::{GafEvolution, GafSnapshot, RngStream};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{non_negative, positive, CampaignConfig};
use crate::error::CliError;
use crate::svg;
use crate::verify::{run_suites, Suite, VerifyPlan};

/// Valid radius of sampled snapshots relative to the counting radius; room
/// for the perturbed-contour retries.
const RADIUS_PAD: f64 = 1.0 + 4e-3;

pub struct Context {
    pub out: PathBuf,
    pub config: CampaignConfig,
}

impl Context {
    fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    fn eps(&self) -> Result<f64, CliError> {
        let eps = self.config.eps_tail.unwrap_or(DEFAULT_TAIL_EPS);
        if eps > 0.0 && eps < 1.0 {
            Ok(eps)
        } else {
            Err(CliError::Usage(format!("`eps_tail` must lie in (0, 1), got {eps}")))
        }
    }
}

fn comment_line(command: &str, resolved: &CampaignConfig) -> String {
    format!("# gaflab {command} {}\n", resolved.to_json())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn require<T>(v: Option<T>, field: &str, command: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("`{field}` is required for {command}")))
}

pub fn sample_zeros(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let radius = positive("R", c.radius.unwrap_or(4.0))?;
    let n = c.n.unwrap_or(1);
    let eps = ctx.eps()?;
    let poisson = c.poisson.unwrap_or(false);
    let resolved = CampaignConfig {
        seed: Some(ctx.seed()),
        radius: Some(radius),
        n: Some(n),
        eps_tail: Some(eps),
        poisson: Some(poisson),
        ..Default::default()
    };
    let root = RngStream::new(ctx.seed());
    let gaf = root.child(0);
    let sets = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = GafSnapshot::sample_for_radius(radius * RADIUS_PAD, eps, &gaf.child64(i), 0.0)?;
            Ok((i, find_zeros(&s, radius)?))
        })
        .collect::<Result<Vec<(u64, ZeroSet)>, gaflab::Error>>()?;

    let mut csv = comment_line("sample-zeros", &resolved).into_bytes();
    write_zero_csv(&mut csv, &sets)?;
    ctx.write("zeros.csv", &String::from_utf8(csv).expect("csv is utf-8"))?;

    let first = sets.first().map(|s| s.1.zeros.clone()).unwrap_or_default();
    let mut panels = vec![("GAF zeros", "zero", first.clone())];
    if poisson {
        let spec = LatticeSpec::new(ToyModel::PoissonBm, 0.0, radius, 1.0, 0.0);
        let sim = ToySimulator::new(&spec, &root.child(1))?;
        let pts = sim.positions().filter(|p| p.norm() < radius).collect();
        panels.push(("Poisson points", "poisson", pts));
    }
    ctx.write("zeros.svg", &svg::scatter(radius, &panels, &resolved.to_json()))?;
    let total: usize = sets.iter().map(|s| s.1.len()).sum();
    Ok(format!("{n} samples, {total} zeros in D_{radius} ({} in the first)", first.len()))
}

pub fn evolve(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let radius = positive("R", c.radius.unwrap_or(2.0))?;
    let horizon = non_negative("T", c.horizon.unwrap_or(1.0))?;
    let delta = positive("delta", c.delta.unwrap_or(0.1))?;
    let eps = ctx.eps()?;
    let resolved = CampaignConfig {
        seed: Some(ctx.seed()),
        radius: Some(radius),
        horizon: Some(horizon),
        delta: Some(delta),
        eps_tail: Some(eps),
        ..Default::default()
    };
    let root = RngStream::new(ctx.seed());
    let initial = GafSnapshot::sample_for_radius(radius * RADIUS_PAD, eps, &root.child(0), 0.0)?;
    let path = GafEvolution::simulate(initial, horizon, delta, &root.child(1))?;
    let sets = path
        .snapshots()
        .par_iter()
        .enumerate()
        .map(|(k, s)| Ok((k as u64, find_zeros(s, radius)?)))
        .collect::<Result<Vec<_>, gaflab::Error>>()?;
    let doc = json!({
        "command": "evolve",
        "config": resolved,
        "grid_step": delta,
        "snapshots": path.snapshots().iter().map(|s| s.to_record()).collect::<Vec<_>>(),
    });
    ctx.write("evolution.json", &pretty(&doc))?;
    let mut csv = comment_line("evolve", &resolved).into_bytes();
    write_zero_csv(&mut csv, &sets)?;
    ctx.write("evolve_zeros.csv", &String::from_utf8(csv).expect("csv is utf-8"))?;
    let counts: Vec<String> = sets.iter().map(|s| s.1.len().to_string()).collect();
    Ok(format!("{} snapshots, zero counts in D_{radius}: {}", sets.len(), counts.join(" ")))
}

fn event_spec(c: &CampaignConfig, horizon: f64) -> Result<EventSpec, CliError> {
    let kind = c.kind.unwrap_or(EventKind::Hole);
    let model = c.model.unwrap_or(EventModel::Gaf);
    let radius = positive("R", require(c.radius, "R", "estimate")?)?;
    let delta = positive("delta", c.delta.unwrap_or(0.02))?;
    let mut spec = match kind {
        EventKind::Hole => EventSpec::hole(model, radius, horizon, delta),
        EventKind::Crowd => EventSpec::crowd(model, radius, require(c.n_points, "N", "crowd events")?, horizon, delta),
    };
    if let Some(cc) = c.c {
        spec.perturb_scale = cc;
    }
    if let Some(eps) = c.eps_tail {
        spec.eps_tail = eps;
    }
    spec.validate()?;
    Ok(spec)
}

const ESTIMATE_CSV_HEADER: &str = "T,n_samples,successes,p_hat,ci_low,ci_high,log_p_hat";

fn estimate_rows(reports: &[EstimatorReport]) -> String {
    let mut s = format!("{ESTIMATE_CSV_HEADER}\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.spec.horizon,
            r.n_samples,
            r.successes,
            r.p_hat,
            r.ci_low(),
            r.ci_high(),
            r.log_p_hat
        ));
    }
    s
}

/// Leading-order bounds on the decay rate −(1/T) log p as T → ∞ (GAF
/// only); the o(1) corrections in the exponents are dropped.
fn asymptote_hint(spec: &EventSpec) -> Value {
    match (spec.model, spec.kind) {
        (EventModel::Gaf, EventKind::Hole) => {
            let x = spec.radius * spec.radius;
            json!({
                "lower": {"form": "exp(R^2/3)", "value": (x / 3.0).exp()},
                "upper": {"form": "exp(R^2/2)", "value": (x / 2.0).exp()},
            })
        }
        (EventModel::Gaf, EventKind::Crowd) => {
            let n = spec.n_points.max(1) as f64;
            let x = n * n.ln();
            json!({
                "lower": {"form": "exp(N log N / 6)", "value": (x / 6.0).exp()},
                "upper": {"form": "exp(N log N / 2)", "value": (x / 2.0).exp()},
            })
        }
        _ => Value::Null,
    }
}

pub fn estimate(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    if c.lemma.is_some() {
        return ou_lemma(ctx);
    }
    let n = c.n.unwrap_or(1000);
    if n == 0 {
        return Err(CliError::Usage("`n` must be at least 1".into()));
    }
    let stream = RngStream::new(ctx.seed());
    let Some(horizons) = c.horizons.clone() else {
        let spec = event_spec(c, non_negative("T", c.horizon.unwrap_or(1.0))?)?;
        let report = estimate_event(&spec, n, &stream)?;
        let mut text = report.to_json();
        text.push('\n');
        ctx.write("report.json", &text)?;
        let resolved = CampaignConfig::from_report(&report);
        ctx.write("estimates.csv", &(comment_line("estimate", &resolved) + &estimate_rows(std::slice::from_ref(&report))))?;
        return Ok(format!(
            "p_hat = {} ({}/{}), 95% CI [{}, {}]",
            report.p_hat, report.successes, report.n_samples, report.ci_low(), report.ci_high()
        ));
    };
    if horizons.is_empty() {
        return Err(CliError::Usage("`T_values` must not be empty".into()));
    }
    for &t in &horizons {
        non_negative("T_values", t)?;
    }
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let spec = event_spec(c, t_max)?;
    let adaptive = c.min_successes.map(|m| (m, c.max_n.unwrap_or(100 * n)));
    let reports = match adaptive {
        Some((m, max_n)) => {
            if max_n < n {
                return Err(CliError::Usage(format!("`max_n` ({max_n}) must be at least `n` ({n})")));
            }
            estimate_sweep_adaptive(&spec, &horizons, m, n, max_n, &stream)?
        }
        None => estimate_sweep(&spec, &horizons, n, &stream)?,
    };
    let resolved = CampaignConfig {
        seed: Some(ctx.seed()),
        kind: Some(spec.kind),
        model: Some(spec.model),
        radius: Some(spec.radius),
        n_points: (spec.kind == EventKind::Crowd).then_some(spec.n_points),
        horizons: Some(horizons.clone()),
        delta: Some(spec.grid_step),
        n: Some(n),
        eps_tail: Some(spec.eps_tail),
        c: Some(spec.perturb_scale),
        min_successes: adaptive.map(|a| a.0),
        max_n: adaptive.map(|a| a.1),
        ..Default::default()
    };
    ctx.write("reports.json", &pretty(&json!({"config": resolved, "reports": reports})))?;
    ctx.write("estimates.csv", &(comment_line("estimate", &resolved) + &estimate_rows(&reports)))?;
    match fit_rate(&reports) {
        Ok(fit) => {
            let doc = json!({
                "config": resolved,
                "fit": fit,
                "rate": fit.rate(),
                "asymptote_hint": asymptote_hint(&spec),
            });
            ctx.write("rate_fit.json", &pretty(&doc))?;
            Ok(format!(
                "{} horizons, fitted rate {} (r² = {})",
                reports.len(),
                fit.rate(),
                fit.r_squared
            ))
        }
        Err(e) => {
            ctx.write("rate_fit.json", &pretty(&json!({"config": resolved, "error": e.to_string()})))?;
            Err(CliError::Runtime(format!("rate fit failed: {e}")))
        }
    }
}

pub fn ou_lemma(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let lemma = c.lemma.unwrap_or(OuLemma::SmallBall);
    let radius = positive("R", c.radius.unwrap_or(1.0))?;
    let grid = c.horizons.clone().unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0, 2.5]);
    let delta = positive("delta", c.delta.unwrap_or(0.01))?;
    let n = c.n.unwrap_or(100_000);
    let resolved = CampaignConfig {
        seed: Some(ctx.seed()),
        lemma: Some(lemma),
        radius: Some(radius),
        rho: c.rho,
        horizons: Some(grid.clone()),
        delta: Some(delta),
        n: Some(n),
        ..Default::default()
    };
    let probe = ou_lemma_probe(lemma, radius, c.rho, &grid, delta, n, &RngStream::new(ctx.seed()))
        .map_err(|e| match e {
            gaflab::Error::Domain { field: "T_grid", reason } => CliError::Usage(format!("`T_values`: {reason}")),
            e => e.into(),
        })?;
    ctx.write("lemma_probe.json", &pretty(&json!({"config": resolved, "probe": probe})))?;
    let mut csv = comment_line("ou-lemma", &resolved);
    csv.push_str("T,successes,p_hat\n");
    for ((t, s), p) in probe.t_values.iter().zip(&probe.successes).zip(&probe.p_hat) {
        csv.push_str(&format!("{t},{s},{p}\n"));
    }
    ctx.write("lemma_probe.csv", &csv)?;
    Ok(format!(
        "{lemma} R = {radius}: rate {} (r² = {}), {} horizons dropped",
        probe.fit.rate(),
        probe.fit.r_squared,
        probe.dropped.len()
    ))
}

pub const JENSEN_TOLERANCE: f64 = 1e-6;

pub fn jensen_check(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let r = positive("R", c.radius.unwrap_or(2.0))?;
    let n = c.n.unwrap_or(100);
    let eps = ctx.eps()?;
    let resolved = CampaignConfig {
        seed: Some(ctx.seed()),
        radius: Some(r),
        n: Some(n),
        eps_tail: Some(eps),
        ..Default::default()
    };
    let root = RngStream::new(ctx.seed());
    let residuals = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = GafSnapshot::sample_for_radius(r * 1.025, eps, &root.child64(i), 0.0)?;
            jensen_residual(&s, r)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mut csv = comment_line("jensen-check", &resolved);
    csv.push_str("sample_id,r,residual\n");
    for (i, x) in residuals.iter().enumerate() {
        csv.push_str(&format!("{i},{r},{x}\n"));
    }
    ctx.write("jensen.csv", &csv)?;
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let failures = residuals.iter().filter(|&&x| !(x < JENSEN_TOLERANCE)).count();
    let passed = failures == 0;
    ctx.write(
        "jensen.json",
        &pretty(&json!({
            "config": resolved, "tolerance": JENSEN_TOLERANCE, "max_residual": worst,
            "failures": failures, "passed": passed,
        })),
    )?;
    let msg = format!("{n} snapshots at r = {r}: max residual {worst:e}");
    if passed {
        Ok(msg)
    } else {
        Err(CliError::Check(format!("{msg}; {failures} at or above {JENSEN_TOLERANCE:e}")))
    }
}

pub fn verify(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let suites = c.suite.clone().filter(|s| !s.is_empty()).unwrap_or_else(|| Suite::ALL.to_vec());
    if let Some(r) = c.radius {
        positive("R", r)?;
    }
    if let Some(d) = c.delta {
        positive("delta", d)?;
    }
    if let Some(t) = c.horizon {
        non_negative("T", t)?;
    }
    let plan = VerifyPlan {
        suites: suites.clone(),
        radius: c.radius,
        n_points: c.n_points,
        horizon: c.horizon,
        delta: c.delta,
        n: c.n,
        eps: ctx.eps()?,
    };
    let resolved = CampaignConfig {
        seed: Some(ctx.seed()),
        radius: c.radius,
        n_points: c.n_points,
        horizon: c.horizon,
        delta: c.delta,
        n: c.n,
        eps_tail: Some(plan.eps),
        suite: Some(suites),
        ..Default::default()
    };
    let results = run_suites(&plan, &RngStream::new(ctx.seed()))?;
    let mut failed = Vec::new();
    let mut log = Vec::new();
    for (suite, checks) in &results {
        for ch in checks {
            println!("{} {}/{}: {}", if ch.passed { "PASS" } else { "FAIL" }, suite.name(), ch.name, ch.summary);
            if !ch.passed {
                failed.push(format!("{}/{}", suite.name(), ch.name));
            }
        }
        log.push(json!({
            "suite": suite.name(),
            "passed": checks.iter().all(|c| c.passed),
            "checks": checks,
        }));
    }
    ctx.write(
        "verify.json",
        &pretty(&json!({"config": resolved, "passed": failed.is_empty(), "suites": log})),
    )?;
    let total: usize = results.iter().map(|r| r.1.len()).sum();
    if failed.is_empty() {
        Ok(format!("{total} checks passed"))
    } else {
        Err(CliError::Check(format!("{} of {total} checks failed: {}", failed.len(), failed.join(", "))))
    }
}

fn file_label(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Summaries of saved outputs plus a log p against T figure.
pub fn report(ctx: &Context, inputs: &[PathBuf]) -> Result<String, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one input JSON file".into()));
    }
    let mut entries = Vec::new();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut lines = Vec::new();
    for path in inputs {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{} is not JSON: {e}", path.display())))?;
        let label = file_label(path);
        let reports: Option<Vec<EstimatorReport>> = if v.get("spec").is_some() {
            serde_json::from_value(v.clone()).ok().map(|r| vec![r])
        } else if let Some(rs) = v.get("reports") {
            serde_json::from_value(rs.clone()).ok()
        } else {
            None
        };
        let (kind, summary) = if let Some(rs) = reports {
            let pts: Vec<(f64, f64)> = rs.iter().filter(|r| r.p_hat > 0.0).map(|r| (r.spec.horizon, r.log_p_hat)).collect();
            let first = &rs[0].spec;
            series.push((format!("{label}: {} {} R={}", first.model, first.kind, first.radius), pts));
            let p: Vec<String> = rs.iter().map(|r| format!("T={} p={}", r.spec.horizon, r.p_hat)).collect();
            ("estimates", p.join("; "))
        } else if let Some(fit) = v.get("fit") {
            ("rate_fit", format!("slope {} r² {}", fit["slope"], fit["r_squared"]))
        } else if let Some(probe) = v.get("probe") {
            let t = probe["T_values"].as_array().cloned().unwrap_or_default();
            let p = probe["p_hat"].as_array().cloned().unwrap_or_default();
            let pts = t
                .iter()
                .zip(&p)
                .filter_map(|(t, p)| Some((t.as_f64()?, p.as_f64()?.ln())))
                .collect();
            series.push((format!("{label}: {} R={}", probe["lemma"], probe["R"]), pts));
            ("lemma_probe", format!("rate {} r² {}", -probe["fit"]["slope"].as_f64().unwrap_or(f64::NAN), probe["fit"]["r_squared"]))
        } else if v.get("suites").is_some() {
            ("verify", format!("passed {}", v["passed"]))
        } else if v.get("max_residual").is_some() {
            ("jensen", format!("max residual {} passed {}", v["max_residual"], v["passed"]))
        } else if v.get("snapshots").is_some() {
            let k = v["snapshots"].as_array().map_or(0, |a| a.len());
            ("evolution", format!("{k} snapshots"))
        } else {
            return Err(CliError::Usage(format!("{}: unrecognised output file", path.display())));
        };
        lines.push(format!("{label} [{kind}] {summary}"));
        entries.push(json!({"file": label, "kind": kind, "summary": summary, "content": v}));
    }
    let doc = json!({"command": "report", "inputs": entries});
    ctx.write("report.json", &pretty(&doc))?;
    let meta = json!({"command": "report", "inputs": inputs.iter().map(|p| file_label(p)).collect::<Vec<_>>()});
    ctx.write("report.svg", &svg::log_p_plot(&series, &meta.to_string()))?;
    for l in &lines {
        println!("{l}");
    }
    Ok(format!("summarised {} files", inputs.len()))
}
