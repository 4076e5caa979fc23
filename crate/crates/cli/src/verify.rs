//! Verification checks behind `gaflab verify` and the acceptance run.

use clap::ValueEnum;
use gaflab::conditions::{
    check_crowd_conditions, check_hole_conditions, crowd_boundary_fixture, frozen_path, hole_boundary_fixture,
    sample_crowd_conditioned_path, sample_hole_conditioned_path, CrowdBox, HoleBox,
};
use gaflab::estimate::{estimate_sweep_adaptive, fit_rate, EstimatorReport, EventModel, EventSpec, RateFit};
use gaflab::gaf::{truncation_degree, DEFAULT_TAIL_EPS};
use gaflab::lemmas::{ou_lemma_probe, LemmaProbe, OuLemma};
use gaflab::toy::{default_margin, LatticeSpec, ToyModel, ToySimulator};
use gaflab::zeros::{count_zeros_robust, count_zeros_winding, find_zeros, jensen_residual, reconstruct_modulus};
use gaflab::{GafEvolution, GafSnapshot, RngStream};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Jensen,
    Conditions,
    Intensity,
    OuLemmas,
    Scaling,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Jensen, Suite::Conditions, Suite::Intensity, Suite::OuLemmas, Suite::Scaling];

    pub fn index(self) -> u32 {
        self as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Jensen => "jensen",
            Suite::Conditions => "conditions",
            Suite::Intensity => "intensity",
            Suite::OuLemmas => "ou-lemmas",
            Suite::Scaling => "scaling",
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub values: Value,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, summary: impl Into<String>, values: Value) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            summary: summary.into(),
            values,
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Jensen residual of `n` snapshots at radius r; passes below 1e-6.
pub fn jensen_identity(n: u64, r: f64, eps: f64, stream: &RngStream) -> Result<CheckResult, CliError> {
    let residuals = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = GafSnapshot::sample_for_radius(r * 1.025, eps, &stream.child64(i), 0.0)?;
            jensen_residual(&s, r)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    let failures = residuals.iter().filter(|&&x| !(x < 1e-6)).count();
    Ok(CheckResult::new(
        "jensen_identity",
        n > 0 && failures == 0,
        format!("{n} snapshots at r = {r}: max residual {worst:.3e}, {failures} at or above 1e-6"),
        json!({"n": n, "r": r, "max_residual": worst, "failures": failures}),
    ))
}

/// Median relative error of log|f(0)| reconstructed from zeros, r = 4
/// against r = 2; passes when the larger disk does strictly better.
pub fn reconstruction(n: u64, eps: f64, stream: &RngStream) -> Result<CheckResult, CliError> {
    let errs = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = GafSnapshot::sample_for_radius(4.05, eps, &stream.child64(i), 0.0)?;
            let truth = s.eval(Complex64::new(0.0, 0.0))?.norm();
            let rel = |r: f64| -> Result<f64, gaflab::Error> {
                let zs = find_zeros(&s, r)?;
                Ok((reconstruct_modulus(&zs, zs.disk_radius) - truth).abs() / truth)
            };
            Ok((rel(2.0)?, rel(4.0)?))
        })
        .collect::<Result<Vec<(f64, f64)>, gaflab::Error>>()?;
    let m2 = median(errs.iter().map(|e| e.0).collect());
    let m4 = median(errs.iter().map(|e| e.1).collect());
    Ok(CheckResult::new(
        "modulus_reconstruction",
        m4 < m2,
        format!("{n} snapshots: median relative error {m2:.4} at r = 2, {m4:.4} at r = 4"),
        json!({"n": n, "median_r2": m2, "median_r4": m4}),
    ))
}

fn all_counts(path: &GafEvolution, radius: f64, ok: impl Fn(i64) -> bool) -> bool {
    path.snapshots()
        .iter()
        .all(|s| matches!(count_zeros_winding(s, radius), Ok(k) if ok(k)))
}

fn degree_for(radius: f64, min_degree: usize, eps: f64) -> Result<usize, CliError> {
    Ok(truncation_degree(radius * 1.01, eps)?.max(min_degree))
}

/// Conditioned hole paths: how many satisfy the box and how many of those
/// have count 0 at every grid time.
pub fn hole_implication(
    radius: f64,
    horizon: f64,
    delta: f64,
    n: u64,
    eps: f64,
    stream: &RngStream,
) -> Result<CheckResult, CliError> {
    let deg = degree_for(radius, HoleBox::new(radius)?.min_degree(), eps)?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let path = sample_hole_conditioned_path(radius, horizon, delta, deg, radius * 1.01, &stream.child64(i))?;
            let in_box = check_hole_conditions(&path, radius)?;
            Ok((in_box, in_box && all_counts(&path, radius, |k| k == 0)))
        })
        .collect::<Result<Vec<_>, gaflab::Error>>()?;
    Ok(implication_result(format!("hole_implication_R{radius}"), n, &rows, json!({"R": radius, "T": horizon, "delta": delta, "degree": deg})))
}

/// Conditioned overcrowding paths: count ≥ N at every grid time.
pub fn crowd_implication(
    radius: f64,
    n_points: usize,
    horizon: f64,
    delta: f64,
    n: u64,
    eps: f64,
    stream: &RngStream,
) -> Result<CheckResult, CliError> {
    let deg = degree_for(radius, CrowdBox::new(radius, n_points)?.min_degree(), eps)?;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let path = sample_crowd_conditioned_path(
                radius,
                n_points,
                horizon,
                delta,
                deg,
                radius * 1.01,
                &stream.child64(i),
            )?;
            let in_box = check_crowd_conditions(&path, radius, n_points)?;
            Ok((in_box, in_box && all_counts(&path, radius, |k| k >= n_points as i64)))
        })
        .collect::<Result<Vec<_>, gaflab::Error>>()?;
    Ok(implication_result(
        format!("crowd_implication_R{radius}_N{n_points}"),
        n,
        &rows,
        json!({"R": radius, "N": n_points, "T": horizon, "delta": delta, "degree": deg}),
    ))
}

fn implication_result(name: String, n: u64, rows: &[(bool, bool)], mut values: Value) -> CheckResult {
    let in_box = rows.iter().filter(|r| r.0).count() as u64;
    let implied = rows.iter().filter(|r| r.1).count() as u64;
    values["n"] = json!(n);
    values["in_box"] = json!(in_box);
    values["implied"] = json!(implied);
    CheckResult::new(
        name,
        n > 0 && in_box == n && implied == n,
        format!("{implied}/{n} paths satisfy the implication ({in_box}/{n} inside the box)"),
        values,
    )
}

/// Frozen coefficient vectors on the box boundary, with phases chosen so
/// that the terms cancel as much as the box allows at one boundary point.
pub fn boundary_fixtures(horizon: f64, delta: f64, eps: f64) -> Result<CheckResult, CliError> {
    let mut rows = Vec::new();
    for (radius, theta) in [(1.0, 0.0), (1.0, std::f64::consts::PI / 5.0), (2.0, 1.0)] {
        let deg = degree_for(radius, HoleBox::new(radius)?.min_degree(), eps)?;
        let path = frozen_path(hole_boundary_fixture(radius, deg, theta)?, horizon, delta, radius * 1.01)?;
        let in_box = check_hole_conditions(&path, radius)?;
        let ok = in_box && all_counts(&path, radius, |k| k == 0);
        rows.push(json!({"kind": "hole", "R": radius, "theta": theta, "in_box": in_box, "implied": ok}));
    }
    for (radius, n, theta) in [(1.0, 16usize, 0.3), (1.0, 25, 0.0)] {
        let deg = degree_for(radius, CrowdBox::new(radius, n)?.min_degree(), eps)?;
        let path = frozen_path(crowd_boundary_fixture(radius, n, deg, theta)?, horizon, delta, radius * 1.01)?;
        let in_box = check_crowd_conditions(&path, radius, n)?;
        let ok = in_box && all_counts(&path, radius, |k| k >= n as i64);
        rows.push(json!({"kind": "crowd", "R": radius, "N": n, "theta": theta, "in_box": in_box, "implied": ok}));
    }
    let good = rows.iter().filter(|r| r["implied"] == json!(true)).count();
    Ok(CheckResult::new(
        "boundary_fixtures",
        good == rows.len(),
        format!("{good}/{} boundary fixtures satisfy the implication", rows.len()),
        json!({"fixtures": rows}),
    ))
}

/// Mean zero count in D_R against R², within 3 standard errors.
pub fn intensity(radius: f64, n: u64, eps: f64, stream: &RngStream) -> Result<CheckResult, CliError> {
    let counts = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = GafSnapshot::sample_for_radius(radius * 1.01, eps, &stream.child64(i), 0.0)?;
            Ok(count_zeros_robust(&s, radius, s.valid_radius())?.0 as f64)
        })
        .collect::<Result<Vec<f64>, gaflab::Error>>()?;
    if counts.len() < 2 {
        return Err(CliError::Usage("`n` must be at least 2 for the intensity check".into()));
    }
    let (m, sem) = mean_sem(&counts);
    let target = radius * radius;
    Ok(CheckResult::new(
        format!("intensity_R{radius}"),
        (m - target).abs() < 3.0 * sem,
        format!("mean count {m:.4} against R² = {target} (3σ = {:.4})", 3.0 * sem),
        json!({"R": radius, "n": n, "mean": m, "sem": sem, "expected": target}),
    ))
}

/// Empirical Var f(r e^{iα}) against e^{r²} (2% relative) at each r, and
/// the lag-1 correlation of a₀ against e^{−1/2}.
pub fn covariance(n: u64, stream: &RngStream) -> Result<Vec<CheckResult>, CliError> {
    let alpha = 0.7;
    let mut out = Vec::new();
    for (j, r) in [0.0f64, 1.0, 1.5].into_iter().enumerate() {
        let z = Complex64::from_polar(r, alpha);
        let s = stream.child(j as u32);
        let vals = (0..n)
            .into_par_iter()
            .map(|i| GafSnapshot::sample_for_radius(r.max(0.5) * 1.01, DEFAULT_TAIL_EPS, &s.child64(i), 0.0)?.eval(z))
            .collect::<Result<Vec<Complex64>, gaflab::Error>>()?;
        let m = vals.iter().sum::<Complex64>() / n as f64;
        let var = vals.iter().map(|v| (v - m).norm_sqr()).sum::<f64>() / (n as f64 - 1.0);
        let target = (r * r).exp();
        let rel = (var / target - 1.0).abs();
        out.push(CheckResult::new(
            format!("variance_r{r}"),
            rel < 0.02,
            format!("Var f = {var:.5} against e^(r²) = {target:.5} (relative error {rel:.4})"),
            json!({"r": r, "alpha": alpha, "n": n, "variance": var, "expected": target}),
        ));
    }
    let s = stream.child(3);
    let pairs = (0..n)
        .into_par_iter()
        .map(|i| {
            let rep = s.child64(i);
            let start = GafSnapshot::sample_for_radius(0.5, DEFAULT_TAIL_EPS, &rep.child(0), 0.0)?;
            let end = start.evolve(1.0, &rep.child(1))?;
            Ok((start.coeffs()[0], end.coeffs()[0]))
        })
        .collect::<Result<Vec<_>, gaflab::Error>>()?;
    let cross: f64 = pairs.iter().map(|(a, b)| (b * a.conj()).re).sum::<f64>() / n as f64;
    let power: f64 = pairs.iter().map(|(a, _)| a.norm_sqr()).sum::<f64>() / n as f64;
    let corr = cross / power;
    let target = (-0.5f64).exp();
    let rel = (corr / target - 1.0).abs();
    out.push(CheckResult::new(
        "lag1_correlation_a0",
        rel < 0.02,
        format!("correlation {corr:.5} against e^(-1/2) = {target:.5} (relative error {rel:.4})"),
        json!({"n": n, "correlation": corr, "expected": target}),
    ));
    Ok(out)
}

/// Probe configuration for the OU rate checks.
#[derive(Debug, Clone)]
pub struct LemmaPlan {
    pub lemma: OuLemma,
    pub radius: f64,
    pub grid: Vec<f64>,
    pub n_factor: u64,
}

pub fn lemma_plans() -> Vec<LemmaPlan> {
    let short = vec![0.5, 1.0, 1.5, 2.0, 2.5];
    vec![
        LemmaPlan {
            lemma: OuLemma::SmallBall,
            radius: 0.75,
            grid: short.clone(),
            n_factor: 1,
        },
        LemmaPlan {
            lemma: OuLemma::SmallBall,
            radius: 1.5,
            grid: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            n_factor: 1,
        },
        LemmaPlan {
            lemma: OuLemma::LargeBall,
            radius: 1.0,
            grid: short.clone(),
            n_factor: 1,
        },
        LemmaPlan {
            lemma: OuLemma::LargeBall,
            radius: 2.0,
            grid: short,
            n_factor: 10,
        },
    ]
}

fn probe_json(p: &LemmaProbe) -> Value {
    json!({
        "lemma": p.lemma, "R": p.radius, "delta": p.delta, "n": p.n_samples,
        "rate": p.fit.rate(), "r_squared": p.fit.r_squared, "dropped": p.dropped,
    })
}

/// Fitted survival rates for the small- and large-ball lemmas, their ratio
/// windows, and agreement with a δ/4 grid.
pub fn ou_lemmas(n: u64, delta: f64, stream: &RngStream) -> Result<Vec<CheckResult>, CliError> {
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    for (j, plan) in lemma_plans().iter().enumerate() {
        let s = stream.child(j as u32);
        let m = n * plan.n_factor;
        coarse.push(ou_lemma_probe(plan.lemma, plan.radius, None, &plan.grid, delta, m, &s.child(0))?);
        fine.push(ou_lemma_probe(plan.lemma, plan.radius, None, &plan.grid, delta / 4.0, m, &s.child(1))?);
    }
    let mut out = Vec::new();
    let good_fit = coarse.iter().chain(&fine).all(|p| p.fit.r_squared > 0.95);
    out.push(CheckResult::new(
        "lemma_fits",
        good_fit,
        format!(
            "r² = {}",
            coarse.iter().map(|p| format!("{:.4}", p.fit.r_squared)).collect::<Vec<_>>().join(", ")
        ),
        json!({"coarse": coarse.iter().map(probe_json).collect::<Vec<_>>(), "fine": fine.iter().map(probe_json).collect::<Vec<_>>()}),
    ));
    let rel: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (c.fit.rate() / f.fit.rate() - 1.0).abs()).collect();
    out.push(CheckResult::new(
        "lemma_fine_grid",
        rel.iter().all(|&r| r < 0.1),
        format!(
            "relative rate change at δ/4: {}",
            rel.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
        ),
        json!({"relative_change": rel}),
    ));
    let small = coarse[0].fit.rate() / coarse[1].fit.rate();
    out.push(CheckResult::new(
        "small_ball_ratio",
        (3.0..=5.5).contains(&small),
        format!("rate(0.75)/rate(1.5) = {small:.4}, window [3.0, 5.5]"),
        json!({"ratio": small, "window": [3.0, 5.5]}),
    ));
    let large = coarse[3].fit.rate() / coarse[2].fit.rate();
    out.push(CheckResult::new(
        "large_ball_ratio",
        (2.5..=6.0).contains(&large),
        format!("rate(2)/rate(1) = {large:.4}, window [2.5, 6.0]"),
        json!({"ratio": large, "window": [2.5, 6.0]}),
    ));
    Ok(out)
}

/// P(D_R stays empty on the δ-grid of [0, T]) for Poisson Brownian points
/// started from an empty D_R.
pub fn hole_survival(radius: f64, horizon: f64, delta: f64, margin: f64, n: u64, stream: &RngStream) -> Result<u64, CliError> {
    let spec = LatticeSpec {
        model: ToyModel::PoissonBm,
        perturb_scale: 0.0,
        window_radius: radius,
        margin,
        grid_step: delta,
        horizon,
        independent_drivers: false,
    };
    let steps = (horizon / delta).round() as usize;
    let alive = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sim = ToySimulator::with_initial_hole(&spec, radius, &stream.child64(i))?;
            for _ in 0..steps {
                sim.step(delta);
                if sim.count_within(radius) > 0 {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<Vec<bool>, gaflab::Error>>()?;
    Ok(alive.iter().filter(|&&a| a).count() as u64)
}

/// ρ(1, √2, 2) on a δ grid against ρ(1, 1, 1)² on the δ/2 grid (the same
/// grid after Brownian rescaling), within 2σ by the delta method.
pub fn poisson_scaling(n: u64, delta: f64, stream: &RngStream) -> Result<CheckResult, CliError> {
    let base_margin = default_margin(ToyModel::PoissonBm, 0.0, 1.0, 1.0, delta / 2.0);
    let r = std::f64::consts::SQRT_2;
    let base = hole_survival(1.0, 1.0, delta / 2.0, base_margin, n, &stream.child(0))?;
    let scaled = hole_survival(r, 2.0, delta, r * base_margin, n, &stream.child(1))?;
    let (p0, p1) = (base as f64 / n as f64, scaled as f64 / n as f64);
    let var0 = (2.0 * p0).powi(2) * p0 * (1.0 - p0) / n as f64;
    let var1 = p1 * (1.0 - p1) / n as f64;
    let sigma = (var0 + var1).sqrt();
    let diff = p1 - p0 * p0;
    Ok(CheckResult::new(
        "poisson_scaling",
        diff.abs() <= 2.0 * sigma,
        format!("rho(1,√2,2) = {p1:.5}, rho(1,1,1)² = {:.5}, |diff| = {:.5}, 2σ = {:.5}", p0 * p0, diff.abs(), 2.0 * sigma),
        json!({"n": n, "delta": delta, "rho_scaled": p1, "rho_base": p0, "rho_base_squared": p0 * p0, "sigma": sigma}),
    ))
}

/// Hole sweep for the GAF with the replicate count grown until every
/// horizon has at least `min_successes` successes.
pub fn hole_sweep(
    radius: f64,
    delta: f64,
    horizons: &[f64],
    min_successes: u64,
    start_n: u64,
    max_n: u64,
    stream: &RngStream,
) -> Result<(Vec<EstimatorReport>, Result<RateFit, gaflab::Error>), CliError> {
    let spec = EventSpec::hole(EventModel::Gaf, radius, horizons.iter().copied().fold(0.0, f64::max), delta);
    let reports = estimate_sweep_adaptive(&spec, horizons, min_successes, start_n, max_n, stream)?;
    let fit = fit_rate(&reports);
    Ok((reports, fit))
}

/// log p̂ linear in T: r² > 0.9 with every horizon at ≥ `min_successes`.
pub fn decay_structure(reports: &[EstimatorReport], fit: &Result<RateFit, gaflab::Error>, min_successes: u64) -> CheckResult {
    let enough = reports.iter().all(|r| r.successes >= min_successes);
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| json!({"T": r.spec.horizon, "n": r.n_samples, "successes": r.successes, "p_hat": r.p_hat}))
        .collect();
    match fit {
        Ok(f) => CheckResult::new(
            "hole_decay_linear",
            enough && f.r_squared > 0.9,
            format!("slope {:.5}, r² {:.5}, min successes {}", f.slope, f.r_squared, reports.iter().map(|r| r.successes).min().unwrap_or(0)),
            json!({"points": rows, "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}),
        ),
        Err(e) => CheckResult::new("hole_decay_linear", false, format!("rate fit failed: {e}"), json!({"points": rows})),
    }
}

/// Two sweeps at the same horizons agree point by point within 2σ.
pub fn sweeps_agree(name: &str, a: &[EstimatorReport], b: &[EstimatorReport]) -> CheckResult {
    let rows: Vec<(f64, f64, f64, f64)> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let sigma = (x.sigma().powi(2) + y.sigma().powi(2)).sqrt();
            (x.spec.horizon, x.p_hat, y.p_hat, (x.p_hat - y.p_hat).abs() / sigma)
        })
        .collect();
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    CheckResult::new(
        name,
        a.len() == b.len() && rows.iter().all(|r| r.3 < 2.0),
        format!("largest difference {worst:.3}σ over {} horizons", rows.len()),
        json!({"rows": rows.iter().map(|r| json!({"T": r.0, "p_a": r.1, "p_b": r.2, "z": r.3})).collect::<Vec<_>>()}),
    )
}

/// Parameters of a `verify` run after defaults.
#[derive(Debug, Clone)]
pub struct VerifyPlan {
    pub suites: Vec<Suite>,
    pub radius: Option<f64>,
    pub n_points: Option<usize>,
    pub horizon: Option<f64>,
    pub delta: Option<f64>,
    pub n: Option<u64>,
    pub eps: f64,
}

/// Runs the selected suites in order. Suite k draws from `seed.child(k)`.
pub fn run_suites(plan: &VerifyPlan, seed: &RngStream) -> Result<Vec<(Suite, Vec<CheckResult>)>, CliError> {
    let mut out = Vec::new();
    for &suite in &plan.suites {
        let s = seed.child(suite.index());
        let checks = match suite {
            Suite::Jensen => {
                let n = plan.n.unwrap_or(100);
                let r = plan.radius.unwrap_or(2.0);
                vec![jensen_identity(n, r, plan.eps, &s.child(0))?, reconstruction(2 * n, plan.eps, &s.child(1))?]
            }
            Suite::Conditions => {
                let n = plan.n.unwrap_or(100);
                let t = plan.horizon.unwrap_or(1.0);
                let delta = plan.delta.unwrap_or(0.05);
                let radii = plan.radius.map_or(vec![1.0, 2.0], |r| vec![r]);
                let mut checks = Vec::new();
                for (j, &r) in radii.iter().enumerate() {
                    checks.push(hole_implication(r, t, delta, n, plan.eps, &s.child(j as u32))?);
                }
                let crowds: Vec<(f64, usize)> = match (plan.radius, plan.n_points) {
                    (Some(r), Some(k)) => vec![(r, k)],
                    (r, _) => {
                        let r = r.unwrap_or(1.0);
                        vec![(r, (16.0 * r * r).ceil() as usize), (r, (25.0 * r * r).ceil() as usize)]
                    }
                };
                for (j, &(r, k)) in crowds.iter().enumerate() {
                    checks.push(crowd_implication(r, k, t, delta, n, plan.eps, &s.child(100 + j as u32))?);
                }
                checks.push(boundary_fixtures(t, delta, plan.eps)?);
                checks
            }
            Suite::Intensity => {
                let n = plan.n.unwrap_or(10_000);
                let radii = plan.radius.map_or(vec![0.5, 1.0, 2.0], |r| vec![r]);
                radii
                    .iter()
                    .enumerate()
                    .map(|(j, &r)| intensity(r, n, plan.eps, &s.child(j as u32)))
                    .collect::<Result<_, _>>()?
            }
            Suite::OuLemmas => ou_lemmas(plan.n.unwrap_or(200_000), plan.delta.unwrap_or(0.01), &s)?,
            Suite::Scaling => vec![poisson_scaling(plan.n.unwrap_or(100_000), plan.delta.unwrap_or(0.02), &s)?],
        };
        out.push((suite, checks));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        let s = RngStream::new(1);
        assert!(jensen_identity(5, 2.0, DEFAULT_TAIL_EPS, &s).unwrap().passed);
        assert!(hole_implication(1.0, 0.2, 0.1, 3, DEFAULT_TAIL_EPS, &s).unwrap().passed);
        assert!(crowd_implication(1.0, 16, 0.2, 0.1, 3, DEFAULT_TAIL_EPS, &s).unwrap().passed);
        assert!(boundary_fixtures(0.1, 0.1, DEFAULT_TAIL_EPS).unwrap().passed);
    }

    #[test]
    fn invalid_crowd_is_a_usage_error() {
        let e = crowd_implication(1.0, 3, 0.2, 0.1, 3, DEFAULT_TAIL_EPS, &RngStream::new(1)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn sweep_comparison_flags_large_gaps() {
        let spec = EventSpec::hole(EventModel::Gaf, 0.5, 1.0, 0.1);
        let a = vec![EstimatorReport::from_counts(spec.clone(), 500, 1000, 0)];
        let b = vec![EstimatorReport::from_counts(spec.clone(), 505, 1000, 0)];
        let c = vec![EstimatorReport::from_counts(spec, 600, 1000, 0)];
        assert!(sweeps_agree("x", &a, &b).passed);
        assert!(!sweeps_agree("x", &a, &c).passed);
    }
}
