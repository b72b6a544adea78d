//! Experiment driver: TOML configuration, the five experiments, and their
//! outputs (`eigenvalues.csv`, `weyl.csv`, `report.json`, `timings.json`,
//! `plot.svg`).
//!
//! A configuration names the experiment, a catalog domain, the coefficient set
//! and the mesh levels (`h`, strictly decreasing), plus an optional section for
//! the experiment's own parameters:
//!
//! ```toml
//! experiment = "weyl-verification"
//! mesh_levels = [0.05, 0.02]
//! tail_window = [5, 40]
//!
//! [domain]
//! name = "regular-ngon"
//! n = 256
//!
//! [coefficients.a]
//! kind = "constant"
//! ```

pub mod plot;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble, pullback_coefficients, pullback_without_boundary_jacobian, CoefficientField, CoefficientSpec,
    MatrixSpec, RhoSpec, ScalarSpec,
};
use crate::eigensolve::{
    solve_condensed, solve_condensed_mean_zero, solve_dense, solve_iterative, tail_coefficient, LanczosOptions,
    Method, Sign, Spectrum, TailFit, DENSE_TOL, ITERATIVE_TOL,
};
use crate::geometry::{build_straightening, triangulate, DomainSpec, PolygonDomain, TriangleMesh};
use crate::potentials::{build_layer_operators, nd_operator};
use crate::weyl::{boundary_trace, weyl_coefficient, WeylData, WeylOptions};
use crate::{Error, Result};
use plot::{Level, LogLogPlot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    WeylVerification,
    BoundaryOnly,
    Mollification,
    Bilipschitz,
    BemCrosscheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub domain: DomainSpec,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    pub mesh_levels: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// 1-based inclusive index window of the tail fit; defaults to `[5, N/4]`.
    #[serde(default)]
    pub tail_window: Option<[usize; 2]>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub boundary_only: Option<BoundaryOnlyConfig>,
    #[serde(default)]
    pub mollification: Option<MollificationConfig>,
    #[serde(default)]
    pub bilipschitz: Option<BilipschitzConfig>,
    #[serde(default)]
    pub bem: Option<BemConfig>,
}

fn default_seed() -> u64 {
    20240917
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Eigenpairs requested from the iterative solver.
    pub eigenvalues: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Condensed,
            eigenvalues: 100,
        }
    }
}

/// Pass/fail thresholds. Defaults:
///
/// | key | default | compared against |
/// |---|---|---|
/// | `weyl` | 0.10 | relative deviation of a tail fit from the predicted coefficient |
/// | `agreement` | 0.10 | relative difference of the two boundary-only fits |
/// | `drift` | 0.02 | mollification drift at the finest ε |
/// | `invariance` | 1e-8 | relative eigenvalue difference, original vs pulled back |
/// | `control` | 1e-6 | lower bound on the same difference for the negative control |
/// | `bem` | 0.02 | relative BEM/FEM (and oracle) eigenvalue difference |
/// | `routes` | 1e-10 | relative difference of the two ND evaluation routes |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub weyl: f64,
    pub agreement: f64,
    pub drift: f64,
    pub invariance: f64,
    pub control: f64,
    pub bem: f64,
    pub routes: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            weyl: 0.10,
            agreement: 0.10,
            drift: 0.02,
            invariance: 1e-8,
            control: 1e-6,
            bem: 0.02,
            routes: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryOnlyConfig {
    /// Second field; must share the boundary trace of `coefficients.a`.
    pub contrast: MatrixSpec,
    /// Blend widths for the sweep (only used when `contrast` is boundary-matched).
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default = "default_trace_samples")]
    pub trace_samples: usize,
}

fn default_trace_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollificationConfig {
    /// Mollification radii, strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Number of leading eigenvalues compared.
    #[serde(default = "default_drift_window")]
    pub window: usize,
    /// Monotone decay is asserted for radii at or below this value.
    #[serde(default)]
    pub monotone_below: Option<f64>,
}

fn default_drift_window() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BilipschitzConfig {
    /// Distance from the lowest graph point down to the fixed base line.
    pub depth: f64,
    /// Index of the graph chart in the domain's chart list.
    #[serde(default)]
    pub chart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BemConfig {
    pub panels_per_edge: usize,
    #[serde(default = "default_compared")]
    pub eigenvalues: usize,
}

fn default_compared() -> usize {
    20
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mesh_levels.is_empty() {
            return Err(Error::Config("mesh_levels is empty".into()));
        }
        if self.mesh_levels.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::Config("mesh levels must be positive".into()));
        }
        if self.mesh_levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("mesh levels must be strictly decreasing".into()));
        }
        let missing = |section: &str| Error::Config(format!("experiment needs a [{section}] section"));
        match self.experiment {
            ExperimentKind::BoundaryOnly if self.boundary_only.is_none() => Err(missing("boundary_only")),
            ExperimentKind::Mollification => {
                let m = self.mollification.as_ref().ok_or_else(|| missing("mollification"))?;
                if m.epsilons.is_empty() || m.epsilons.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::Config("epsilons must be nonempty and strictly decreasing".into()));
                }
                Ok(())
            }
            ExperimentKind::Bilipschitz if self.bilipschitz.is_none() => Err(missing("bilipschitz")),
            ExperimentKind::BemCrosscheck if self.bem.is_none() => Err(missing("bem")),
            _ => Ok(()),
        }
    }

    fn finest(&self) -> f64 {
        *self.mesh_levels.last().expect("validated")
    }

    fn window(&self) -> Option<(usize, usize)> {
        self.tail_window.map(|[a, b]| (a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"max"`: passes when `value ≤ threshold`; `"min"`: when `value ≥ threshold`.
    pub bound: &'static str,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: "max",
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound: "min",
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub label: String,
    pub h: f64,
    pub nodes: usize,
    pub triangles: usize,
    pub boundary_dofs: usize,
    pub method: Method,
    pub positive: usize,
    pub negative: usize,
    pub null_count: usize,
    pub max_residual: f64,
    pub fit_plus: Option<TailFit>,
    pub fit_minus: Option<TailFit>,
    pub deviation_plus: Option<f64>,
    pub deviation_minus: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Predicted {
    pub w_plus: f64,
    pub w_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config: ExperimentConfig,
    pub package: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub domain: String,
    pub seed: u64,
    pub passed: bool,
    /// Set when a level failed; the report then covers the levels before it.
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub levels: Vec<LevelSummary>,
    pub predicted: Option<Predicted>,
    pub details: serde_json::Value,
    pub provenance: Provenance,
}

/// A spectrum together with the label and mesh it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectrum {
    pub label: String,
    pub h: f64,
    pub spectrum: Spectrum,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub spectra: Vec<LabeledSpectrum>,
    pub weyl: Option<WeylData>,
    /// Additional CSV files, by name.
    pub tables: BTreeMap<String, String>,
    pub plot: LogLogPlot,
    /// Wall-clock seconds per stage; written separately so the other outputs
    /// are reproducible byte for byte.
    pub timings: Vec<(String, f64)>,
}

struct Timer {
    entries: Vec<(String, f64)>,
}

impl Timer {
    fn new() -> Self {
        Self { entries: Vec::new() }
    }

    fn time<T>(&mut self, label: impl Into<String>, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.entries.push((label.into(), start.elapsed().as_secs_f64()));
        out
    }
}

/// Runs the experiment named in `cfg`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::WeylVerification => run_weyl_verification(cfg),
        ExperimentKind::BoundaryOnly => run_boundary_only_dependence(cfg),
        ExperimentKind::Mollification => run_mollification_convergence(cfg),
        ExperimentKind::Bilipschitz => run_bilipschitz_invariance(cfg),
        ExperimentKind::BemCrosscheck => run_bem_crosscheck(cfg),
    }
}

/// Solves the pencil of `mesh` and `coeff` with the configured method.
pub fn fem_spectrum(mesh: &TriangleMesh, coeff: &CoefficientField, solver: &SolverConfig, seed: u64) -> Result<Spectrum> {
    let forms = assemble(mesh, coeff)?;
    match solver.method {
        Method::Dense => solve_dense(&forms.a, &forms.b),
        Method::Condensed => solve_condensed(&forms.a, &forms.b),
        Method::CondensedMeanZero => solve_condensed_mean_zero(&forms.a, &forms.b),
        Method::Iterative => solve_iterative(
            &forms.a,
            &forms.b,
            solver.eigenvalues,
            LanczosOptions {
                seed,
                ..Default::default()
            },
        ),
    }
}

fn residual_tolerance(method: Method) -> f64 {
    match method {
        Method::Iterative => ITERATIVE_TOL,
        _ => DENSE_TOL,
    }
}

fn fit(spec: &Spectrum, sign: Sign, window: Option<(usize, usize)>) -> Result<Option<TailFit>> {
    if spec.branch(sign).is_empty() {
        return Ok(None);
    }
    tail_coefficient(spec, sign, 1, window).map(Some)
}

fn deviation(fit: Option<&TailFit>, predicted: f64) -> Option<f64> {
    match fit {
        Some(f) if predicted > 0.0 => Some((f.estimate - predicted).abs() / predicted),
        _ => None,
    }
}

fn summarize(
    label: &str,
    h: f64,
    mesh: &TriangleMesh,
    spec: &Spectrum,
    window: Option<(usize, usize)>,
    predicted: Option<Predicted>,
) -> Result<LevelSummary> {
    let fit_plus = fit(spec, Sign::Plus, window)?;
    let fit_minus = fit(spec, Sign::Minus, window)?;
    Ok(LevelSummary {
        label: label.to_string(),
        h,
        nodes: mesh.num_nodes(),
        triangles: mesh.triangles.len(),
        boundary_dofs: spec.boundary_dofs,
        method: spec.method,
        positive: spec.positive.len(),
        negative: spec.negative.len(),
        null_count: spec.null_count,
        max_residual: spec.max_residual(),
        deviation_plus: predicted.and_then(|p| deviation(fit_plus.as_ref(), p.w_plus)),
        deviation_minus: predicted.and_then(|p| deviation(fit_minus.as_ref(), p.w_minus)),
        fit_plus,
        fit_minus,
    })
}

/// `(|μ_k|, k|μ_k|)` for the branch, the curve `n(λ)·λ` sampled at its jumps.
fn counting_curve(spec: &Spectrum, sign: Sign) -> Vec<(f64, f64)> {
    spec.branch(sign)
        .iter()
        .enumerate()
        .map(|(i, m)| (m.abs(), (i + 1) as f64 * m.abs()))
        .collect()
}

fn counting_plot(title: String, spectra: &[(&str, &Spectrum)], predicted: &[(String, f64)]) -> LogLogPlot {
    let mut series = Vec::new();
    for (label, spec) in spectra {
        for sign in [Sign::Plus, Sign::Minus] {
            if !spec.branch(sign).is_empty() {
                series.push(Series {
                    label: format!("{label} n{}", sign.symbol()),
                    points: counting_curve(spec, sign),
                });
            }
        }
    }
    LogLogPlot {
        title,
        x_label: "λ".into(),
        y_label: "n(λ)·λ".into(),
        series,
        levels: predicted
            .iter()
            .map(|(label, y)| Level {
                label: label.clone(),
                y: *y,
            })
            .collect(),
    }
}

fn predicted_weyl(domain: &PolygonDomain, coeff: &CoefficientField) -> Result<WeylData> {
    weyl_coefficient(domain, coeff.a.as_ref(), coeff.rho.as_ref(), WeylOptions::default())
}

fn report(cfg: &ExperimentConfig, domain: &PolygonDomain) -> Report {
    Report {
        experiment: cfg.experiment,
        domain: domain.name().to_string(),
        seed: cfg.seed,
        passed: false,
        error: None,
        checks: Vec::new(),
        levels: Vec::new(),
        predicted: None,
        details: serde_json::Value::Null,
        provenance: Provenance {
            config: cfg.clone(),
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
    }
}

fn finish(mut report: Report) -> Report {
    report.passed = report.error.is_none() && !report.checks.is_empty() && report.checks.iter().all(|c| c.passed);
    report
}

/// Per level: mesh, assemble, solve and fit; the finest level is compared
/// with the predicted coefficients. A failing level ends the run with a
/// partial report.
pub fn run_weyl_verification(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut timer = Timer::new();
    let domain = cfg.domain.build()?;
    let coeff = cfg.coefficients.build(&domain)?;
    let weyl = timer.time("weyl", || predicted_weyl(&domain, &coeff))?;
    let predicted = Predicted {
        w_plus: weyl.w_plus,
        w_minus: weyl.w_minus,
    };
    let mut rep = report(cfg, &domain);
    rep.predicted = Some(predicted);
    let mut spectra = Vec::new();
    for (i, &h) in cfg.mesh_levels.iter().enumerate() {
        let label = format!("level{i}");
        let level = (|| {
            let mesh = timer.time(format!("{label} mesh"), || triangulate(&domain, h))?;
            let spec = timer.time(format!("{label} solve"), || fem_spectrum(&mesh, &coeff, &cfg.solver, cfg.seed))?;
            let summary = summarize(&label, h, &mesh, &spec, cfg.window(), Some(predicted))?;
            Ok::<_, Error>((spec, summary))
        })();
        match level {
            Ok((spec, summary)) => {
                rep.levels.push(summary);
                spectra.push(LabeledSpectrum {
                    label,
                    h,
                    spectrum: spec,
                });
            }
            Err(e) => {
                rep.error = Some(format!("level {i} (h = {h}): {e}"));
                break;
            }
        }
    }
    if rep.error.is_none() {
        let finest = rep.levels.last().expect("at least one level");
        for (sign, dev) in [(Sign::Plus, finest.deviation_plus), (Sign::Minus, finest.deviation_minus)] {
            if let Some(dev) = dev {
                rep.checks.push(Check::at_most(
                    format!("weyl deviation n{}", sign.symbol()),
                    dev,
                    cfg.tolerances.weyl,
                ));
            }
        }
        rep.checks.push(Check::at_most(
            "max pencil residual",
            finest.max_residual,
            residual_tolerance(finest.method),
        ));
    }
    let plot = match spectra.last() {
        Some(s) => counting_plot(
            format!("{}: n(λ)·λ at h = {}", domain.name(), s.h),
            &[(s.label.as_str(), &s.spectrum)],
            &predicted_levels(&predicted),
        ),
        None => counting_plot(domain.name().to_string(), &[], &predicted_levels(&predicted)),
    };
    Ok(Outcome {
        report: finish(rep),
        spectra,
        weyl: Some(weyl),
        tables: BTreeMap::new(),
        plot,
        timings: timer.entries,
    })
}

fn predicted_levels(p: &Predicted) -> Vec<(String, f64)> {
    let mut out = vec![("W+".to_string(), p.w_plus)];
    if p.w_minus > 0.0 {
        out.push(("W-".to_string(), p.w_minus));
    }
    out
}

/// Largest accepted trace difference in [`run_boundary_only_dependence`].
pub const TRACE_TOL: f64 = 1e-8;

/// Largest entrywise difference of the two fields' boundary traces over
/// `samples` points equally spaced in arc length.
pub fn trace_difference(
    domain: &PolygonDomain,
    a: &dyn crate::assembly::MatrixField,
    b: &dyn crate::assembly::MatrixField,
    samples: usize,
) -> f64 {
    let perimeter = domain.perimeter();
    let diam = domain.diameter();
    let mut worst = 0.0f64;
    let (mut e, mut start) = (0, 0.0);
    for k in 0..samples {
        let s = perimeter * (k as f64 + 0.5) / samples as f64;
        while s > start + domain.edge_length(e) && e + 1 < domain.num_edges() {
            start += domain.edge_length(e);
            e += 1;
        }
        let (p, q) = domain.edge(e);
        let x = p + (q - p) * ((s - start) / domain.edge_length(e));
        let n = domain.edge_normal(e);
        let d = boundary_trace(a, &x, &n, diam) - boundary_trace(b, &x, &n, diam);
        worst = worst.max(d.abs().max());
    }
    worst
}

/// Two fields with a common boundary trace: fits must agree with each other
/// and with the common prediction.
pub fn run_boundary_only_dependence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let opts = cfg.boundary_only.as_ref().ok_or_else(|| Error::Config("missing [boundary_only]".into()))?;
    let mut timer = Timer::new();
    let domain = cfg.domain.build()?;
    let first = cfg.coefficients.build(&domain)?;
    let second_spec = CoefficientSpec {
        a: opts.contrast.clone(),
        ..cfg.coefficients.clone()
    };
    let second = second_spec.build(&domain)?;
    let trace_gap = trace_difference(&domain, first.a.as_ref(), second.a.as_ref(), opts.trace_samples);
    // traces are sampled 1e-10·diam inside, where a blended field has not
    // quite reached its trace
    if trace_gap > TRACE_TOL {
        return Err(Error::TraceMismatch(format!(
            "fields differ by {trace_gap:e} on the boundary"
        )));
    }
    let weyl = timer.time("weyl", || predicted_weyl(&domain, &first))?;
    let weyl_second = predicted_weyl(&domain, &second)?;
    let predicted = Predicted {
        w_plus: weyl.w_plus,
        w_minus: weyl.w_minus,
    };
    let h = cfg.finest();
    let mesh = timer.time("mesh", || triangulate(&domain, h))?;
    let contrast = interior_contrast(&domain, &first, &second);
    let s1 = timer.time("solve first", || fem_spectrum(&mesh, &first, &cfg.solver, cfg.seed))?;
    let s2 = timer.time("solve second", || fem_spectrum(&mesh, &second, &cfg.solver, cfg.seed))?;
    let mut rep = report(cfg, &domain);
    rep.predicted = Some(predicted);
    rep.levels.push(summarize("first", h, &mesh, &s1, cfg.window(), Some(predicted))?);
    rep.levels.push(summarize("second", h, &mesh, &s2, cfg.window(), Some(predicted))?);
    let (f1, f2) = (
        rep.levels[0].fit_plus.expect("positive weight").estimate,
        rep.levels[1].fit_plus.expect("positive weight").estimate,
    );
    let w = predicted.w_plus;
    rep.checks.push(Check::at_most("first vs predicted", (f1 - w).abs() / w, cfg.tolerances.weyl));
    rep.checks.push(Check::at_most("second vs predicted", (f2 - w).abs() / w, cfg.tolerances.weyl));
    rep.checks.push(Check::at_most("first vs second", (f1 - f2).abs() / w, cfg.tolerances.agreement));
    rep.checks.push(Check::at_most(
        "predicted coefficients differ",
        (weyl_second.w_plus - w).abs() / w,
        TRACE_TOL,
    ));
    for (l, s) in [(&rep.levels[0], &s1), (&rep.levels[1], &s2)] {
        rep.checks.push(Check::at_most(
            format!("max pencil residual {}", l.label),
            l.max_residual,
            residual_tolerance(s.method),
        ));
    }

    let mut sweep = String::from("blend_width,fit,deviation\n");
    let mut sweep_json = Vec::new();
    if let MatrixSpec::BoundaryMatched { interior, trace, .. } = &opts.contrast {
        for &width in &opts.sweep {
            let spec = CoefficientSpec {
                a: MatrixSpec::BoundaryMatched {
                    interior: interior.clone(),
                    trace: trace.clone(),
                    blend_width: width,
                },
                ..cfg.coefficients.clone()
            };
            let coeff = spec.build(&domain)?;
            let s = timer.time(format!("sweep {width}"), || fem_spectrum(&mesh, &coeff, &cfg.solver, cfg.seed))?;
            let f = tail_coefficient(&s, Sign::Plus, 1, cfg.window())?.estimate;
            let _ = writeln!(sweep, "{width:.16e},{f:.16e},{:.16e}", (f - w).abs() / w);
            sweep_json.push(serde_json::json!({ "blend_width": width, "fit": f, "deviation": (f - w).abs() / w }));
        }
    }
    rep.details = serde_json::json!({
        "trace_difference": trace_gap,
        "interior_contrast_max": contrast.0,
        "interior_contrast_mean": contrast.1,
        "sweep": sweep_json,
    });
    let plot = counting_plot(
        format!("{}: boundary-only dependence, h = {h}", domain.name()),
        &[("first", &s1), ("second", &s2)],
        &predicted_levels(&predicted),
    );
    let mut tables = BTreeMap::new();
    if !opts.sweep.is_empty() {
        tables.insert("sweep.csv".to_string(), sweep);
    }
    Ok(Outcome {
        report: finish(rep),
        spectra: vec![
            LabeledSpectrum {
                label: "first".into(),
                h,
                spectrum: s1,
            },
            LabeledSpectrum {
                label: "second".into(),
                h,
                spectrum: s2,
            },
        ],
        weyl: Some(weyl),
        tables,
        plot,
        timings: timer.entries,
    })
}

/// Largest and mean relative Frobenius difference of the two matrix fields
/// over a 64 × 64 grid of interior points.
fn interior_contrast(domain: &PolygonDomain, a: &CoefficientField, b: &CoefficientField) -> (f64, f64) {
    let (lo, hi) = domain.bounding_box();
    let m = 64;
    let (mut worst, mut total, mut count) = (0.0f64, 0.0, 0usize);
    for i in 0..m {
        for j in 0..m {
            let x = nalgebra::Point2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / m as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / m as f64,
            );
            if !domain.contains(&x) {
                continue;
            }
            let (p, q) = (a.a.eval(&x), b.a.eval(&x));
            let r = (p - q).norm() / p.norm();
            worst = worst.max(r);
            total += r;
            count += 1;
        }
    }
    (worst, if count > 0 { total / count as f64 } else { 0.0 })
}

/// Spectra of the base field and of its mollifications over a decreasing
/// sequence of radii, on the finest mesh.
pub fn run_mollification_convergence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let opts = cfg.mollification.as_ref().ok_or_else(|| Error::Config("missing [mollification]".into()))?;
    let mut timer = Timer::new();
    let domain = cfg.domain.build()?;
    let h = cfg.finest();
    let mesh = timer.time("mesh", || triangulate(&domain, h))?;
    let base_coeff = cfg.coefficients.build(&domain)?;
    let base = timer.time("solve base", || fem_spectrum(&mesh, &base_coeff, &cfg.solver, cfg.seed))?;
    if base.positive.len() < opts.window {
        return Err(Error::Resolution(format!(
            "{} eigenvalues resolved, window needs {}",
            base.positive.len(),
            opts.window
        )));
    }
    let mut rep = report(cfg, &domain);
    rep.levels.push(summarize("base", h, &mesh, &base, cfg.window(), None)?);
    let mut spectra = vec![];
    let mut drifts = Vec::new();
    let mut table = String::from("epsilon,drift\n");
    for (i, &eps) in opts.epsilons.iter().enumerate() {
        let spec = CoefficientSpec {
            a: MatrixSpec::Mollified {
                base: Box::new(cfg.coefficients.a.clone()),
                epsilon: eps,
            },
            ..cfg.coefficients.clone()
        };
        let coeff = spec.build(&domain)?;
        let s = timer.time(format!("solve eps {eps}"), || fem_spectrum(&mesh, &coeff, &cfg.solver, cfg.seed))?;
        let label = format!("eps{i}");
        rep.levels.push(summarize(&label, h, &mesh, &s, cfg.window(), None)?);
        let drift = (0..opts.window)
            .map(|k| (s.positive[k] - base.positive[k]).abs() / base.positive[k])
            .fold(0.0, f64::max);
        let _ = writeln!(table, "{eps:.16e},{drift:.16e}");
        drifts.push((eps, drift));
        spectra.push(LabeledSpectrum {
            label,
            h,
            spectrum: s,
        });
    }
    let threshold = opts.monotone_below.unwrap_or(f64::INFINITY);
    let asserted: Vec<f64> = drifts.iter().filter(|(e, _)| *e <= threshold).map(|d| d.1).collect();
    let violations = asserted.windows(2).filter(|w| w[1] > w[0]).count();
    rep.checks.push(Check::at_most("drift monotonicity violations", violations as f64, 0.0));
    rep.checks.push(Check::at_most(
        "drift at finest ε",
        drifts.last().expect("nonempty").1,
        cfg.tolerances.drift,
    ));
    for l in &rep.levels {
        rep.checks.push(Check::at_most(
            format!("max pencil residual {}", l.label),
            l.max_residual,
            residual_tolerance(l.method),
        ));
    }
    rep.details = serde_json::json!({
        "window": opts.window,
        "drift": drifts.iter().map(|(e, d)| serde_json::json!({ "epsilon": e, "drift": d })).collect::<Vec<_>>(),
    });
    spectra.insert(
        0,
        LabeledSpectrum {
            label: "base".into(),
            h,
            spectrum: base,
        },
    );
    let plot = LogLogPlot {
        title: format!("{}: mollification drift, h = {h}", domain.name()),
        x_label: "ε".into(),
        y_label: format!("max relative drift, k ≤ {}", opts.window),
        series: vec![Series {
            label: "drift".into(),
            points: drifts.clone(),
        }],
        levels: vec![Level {
            label: "tolerance".into(),
            y: cfg.tolerances.drift,
        }],
    };
    let mut tables = BTreeMap::new();
    tables.insert("drift.csv".to_string(), table);
    Ok(Outcome {
        report: finish(rep),
        spectra,
        weyl: None,
        tables,
        plot,
        timings: timer.entries,
    })
}

fn max_relative_difference(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    if a.positive.len() != b.positive.len() || a.negative.len() != b.negative.len() {
        return Err(Error::MeshMismatch(format!(
            "spectra have {}+{} and {}+{} eigenvalues",
            a.positive.len(),
            a.negative.len(),
            b.positive.len(),
            b.negative.len()
        )));
    }
    Ok(a.positive
        .iter()
        .zip(&b.positive)
        .chain(a.negative.iter().zip(&b.negative))
        .map(|(x, y)| (x - y).abs() / x.abs())
        .fold(0.0, f64::max))
}

/// Original problem against its pullback under the discretized straightening
/// map, plus the negative control without the boundary Jacobian.
pub fn run_bilipschitz_invariance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let opts = cfg.bilipschitz.as_ref().ok_or_else(|| Error::Config("missing [bilipschitz]".into()))?;
    let mut timer = Timer::new();
    let domain = cfg.domain.build()?;
    let chart = domain
        .charts()
        .get(opts.chart)
        .ok_or_else(|| Error::Config(format!("domain has no chart {}", opts.chart)))?
        .chart
        .clone();
    let straightening = build_straightening(&domain, &chart, opts.depth)?;
    let h = cfg.finest();
    let mesh = timer.time("mesh", || triangulate(&domain, h))?;
    let map = Arc::new(timer.time("map", || straightening.discretize(&mesh))?);
    let coeff = cfg.coefficients.build(&domain)?;
    let pulled = pullback_coefficients(&coeff, &map)?;
    let control = pullback_without_boundary_jacobian(&coeff, &map)?;
    let original = timer.time("solve original", || fem_spectrum(map.source(), &coeff, &cfg.solver, cfg.seed))?;
    let image = timer.time("solve pulled back", || fem_spectrum(map.image(), &pulled, &cfg.solver, cfg.seed))?;
    let wrong = timer.time("solve control", || fem_spectrum(map.image(), &control, &cfg.solver, cfg.seed))?;
    let diff = max_relative_difference(&original, &image)?;
    let control_diff = max_relative_difference(&original, &wrong)?;
    let mut rep = report(cfg, &domain);
    rep.levels.push(summarize("original", h, map.source(), &original, cfg.window(), None)?);
    rep.levels.push(summarize("pulled-back", h, map.image(), &image, cfg.window(), None)?);
    rep.levels.push(summarize("control", h, map.image(), &wrong, cfg.window(), None)?);
    rep.checks.push(Check::at_most("pulled back vs original", diff, cfg.tolerances.invariance));
    rep.checks.push(Check::at_least(
        "control without boundary Jacobian vs original",
        control_diff,
        cfg.tolerances.control,
    ));
    for (l, s) in rep.levels.iter().zip([&original, &image]) {
        rep.checks.push(Check::at_most(
            format!("max pencil residual {}", l.label),
            l.max_residual,
            residual_tolerance(s.method),
        ));
    }
    rep.details = serde_json::json!({
        "depth": opts.depth,
        "base_line": straightening.base(),
        "source_nodes": map.source().num_nodes(),
        "max_relative_difference": diff,
        "control_max_relative_difference": control_diff,
    });
    let plot = counting_plot(
        format!("{}: straightening invariance, h = {h}", domain.name()),
        &[("original", &original), ("pulled back", &image), ("control", &wrong)],
        &[],
    );
    Ok(Outcome {
        report: finish(rep),
        spectra: vec![
            LabeledSpectrum {
                label: "original".into(),
                h,
                spectrum: original,
            },
            LabeledSpectrum {
                label: "pulled-back".into(),
                h,
                spectrum: image,
            },
            LabeledSpectrum {
                label: "control".into(),
                h,
                spectrum: wrong,
            },
        ],
        weyl: None,
        tables: BTreeMap::new(),
        plot,
        timings: timer.entries,
    })
}

/// Top ND eigenvalues from the layer potentials against the mean-zero FEM
/// spectrum (`v₀ = 0`) on the finest mesh.
pub fn run_bem_crosscheck(cfg: &ExperimentConfig) -> Result<Outcome> {
    let opts = cfg.bem.as_ref().ok_or_else(|| Error::Config("missing [bem]".into()))?;
    let identity = matches!(cfg.coefficients.a, MatrixSpec::Constant { scale } if scale == 1.0);
    let unit_weight = matches!(cfg.coefficients.rho, RhoSpec::Constant { value } if value == 1.0);
    if !identity || !unit_weight {
        return Err(Error::Config("the layer potential route needs a = I and rho = 1".into()));
    }
    let mut timer = Timer::new();
    let domain = cfg.domain.build()?;
    let op = timer.time("layer operators", || build_layer_operators(&domain, opts.panels_per_edge))?;
    let nd = timer.time("nd", || nd_operator(&op))?;
    let h = cfg.finest();
    let mesh = timer.time("mesh", || triangulate(&domain, h))?;
    let laplace = CoefficientSpec {
        v0: ScalarSpec::Constant { value: 0.0 },
        ..cfg.coefficients.clone()
    }
    .build(&domain)?;
    let solver = SolverConfig {
        method: Method::CondensedMeanZero,
        ..cfg.solver.clone()
    };
    let fem = timer.time("solve", || fem_spectrum(&mesh, &laplace, &solver, cfg.seed))?;
    let k = opts.eigenvalues;
    if fem.positive.len() < k || nd.eigenvalues.len() < k {
        return Err(Error::Resolution(format!(
            "{k} eigenvalues requested, {} (FEM) and {} (BEM) available",
            fem.positive.len(),
            nd.eigenvalues.len()
        )));
    }
    let oracle = match cfg.domain {
        DomainSpec::RegularNgon { n, r } if n >= 64 => Some(r),
        _ => None,
    };
    let mut table = String::from("k,bem,fem,relative_difference,oracle\n");
    let (mut worst, mut worst_bem_oracle, mut worst_fem_oracle) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..k {
        let (b, f) = (nd.eigenvalues[i], fem.positive[i]);
        let rel = (b - f).abs() / f;
        worst = worst.max(rel);
        let exact = oracle.map(|r| r / ((i / 2 + 1) as f64));
        if let Some(e) = exact {
            worst_bem_oracle = worst_bem_oracle.max((b - e).abs() / e);
            worst_fem_oracle = worst_fem_oracle.max((f - e).abs() / e);
        }
        let _ = writeln!(
            table,
            "{},{b:.16e},{f:.16e},{rel:.16e},{}",
            i + 1,
            exact.map(|e| format!("{e:.16e}")).unwrap_or_default()
        );
    }
    let mut rep = report(cfg, &domain);
    rep.levels.push(summarize("fem", h, &mesh, &fem, cfg.window(), None)?);
    rep.checks.push(Check::at_most(format!("bem vs fem, k ≤ {k}"), worst, cfg.tolerances.bem));
    rep.checks.push(Check::at_most("nd routes", nd.route_difference, cfg.tolerances.routes));
    if oracle.is_some() {
        rep.checks.push(Check::at_most("bem vs disk oracle", worst_bem_oracle, cfg.tolerances.bem));
        rep.checks.push(Check::at_most("fem vs disk oracle", worst_fem_oracle, cfg.tolerances.bem));
    }
    rep.checks.push(Check::at_most(
        "max pencil residual fem",
        fem.max_residual(),
        residual_tolerance(fem.method),
    ));
    rep.details = serde_json::json!({
        "panels": op.len(),
        "condition": nd.condition,
        "asymmetry": nd.asymmetry,
        "route_difference": nd.route_difference,
        "max_relative_difference": worst,
    });
    let idx = |v: &[f64]| v.iter().take(k).enumerate().map(|(i, x)| ((i + 1) as f64, *x)).collect();
    let plot = LogLogPlot {
        title: format!("{}: ND eigenvalues", domain.name()),
        x_label: "k".into(),
        y_label: "eigenvalue".into(),
        series: vec![
            Series {
                label: "layer potentials".into(),
                points: idx(&nd.eigenvalues),
            },
            Series {
                label: "finite elements".into(),
                points: idx(&fem.positive),
            },
        ],
        levels: vec![],
    };
    let mut tables = BTreeMap::new();
    tables.insert("bem.csv".to_string(), table);
    Ok(Outcome {
        report: finish(rep),
        spectra: vec![LabeledSpectrum {
            label: "fem".into(),
            h,
            spectrum: fem,
        }],
        weyl: None,
        tables,
        plot,
        timings: timer.entries,
    })
}

/// All spectra as one CSV with columns `label,h,index,branch,eigenvalue,residual`.
pub fn eigenvalues_csv(spectra: &[LabeledSpectrum]) -> String {
    let mut s = String::from("label,h,index,branch,eigenvalue,residual\n");
    for l in spectra {
        for sign in [Sign::Plus, Sign::Minus] {
            let (vals, res) = (l.spectrum.branch(sign), l.spectrum.residuals(sign));
            for (i, (v, r)) in vals.iter().zip(res).enumerate() {
                let _ = writeln!(s, "{},{},{},{},{v:.16e},{r:.6e}", l.label, l.h, i + 1, sign.symbol());
            }
        }
    }
    s
}

/// Writes every output of `outcome` into `dir` (created if needed).
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("eigenvalues.csv"), eigenvalues_csv(&outcome.spectra))?;
    if let Some(w) = &outcome.weyl {
        let mut buf = Vec::new();
        w.write_csv(&mut buf)?;
        std::fs::write(dir.join("weyl.csv"), buf)?;
        std::fs::write(
            dir.join("weyl.json"),
            serde_json::to_string_pretty(&w.summary()).map_err(|e| Error::Parse(e.to_string()))? + "\n",
        )?;
    }
    for (name, body) in &outcome.tables {
        std::fs::write(dir.join(name), body)?;
    }
    let report = serde_json::to_string_pretty(&outcome.report).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(dir.join("report.json"), report + "\n")?;
    let timings: serde_json::Map<String, serde_json::Value> =
        outcome.timings.iter().map(|(k, v)| (k.clone(), (*v).into())).collect();
    std::fs::write(
        dir.join("timings.json"),
        serde_json::to_string_pretty(&timings).map_err(|e| Error::Parse(e.to_string()))? + "\n",
    )?;
    std::fs::write(dir.join("plot.svg"), outcome.plot.to_svg())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let text = r#"
experiment = "weyl-verification"
mesh_levels = [0.2, 0.1]

[domain]
name = "square"
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.seed, default_seed());
        assert_eq!(cfg.tolerances, Tolerances::default());
        let back = parse_config(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(matches!(
            parse_config(&text.replace("[0.2, 0.1]", "[0.1, 0.2]")),
            Err(Error::Config(_))
        ));
        assert!(matches!(parse_config(&text.replace("weyl-verification", "bem-crosscheck")), Err(Error::Config(_))));
    }

    #[test]
    fn checks() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", 1.1, 1.0).passed);
        assert!(Check::at_least("a", 1.1, 1.0).passed);
    }
}
