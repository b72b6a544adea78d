use std::sync::Arc;

use nalgebra::Point2;
use steklab::assembly::{pullback_coefficients, CoefficientSpec};
use steklab::geometry::{build_straightening, triangulate, LipschitzChart, PolygonDomain};
use steklab::harness::*;
use steklab::Error;

const SMALL_WEYL: &str = r#"
experiment = "weyl-verification"
mesh_levels = [0.2, 0.1]
tail_window = [3, 8]

[domain]
name = "square"
"#;

fn outputs(cfg: &ExperimentConfig) -> (tempfile::TempDir, Outcome) {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(cfg).unwrap();
    write_outputs(&outcome, dir.path()).unwrap();
    (dir, outcome)
}

#[test]
fn config_errors() {
    let bad = [
        SMALL_WEYL.replace("[0.2, 0.1]", "[0.1, 0.1]"),
        SMALL_WEYL.replace("[0.2, 0.1]", "[]"),
        SMALL_WEYL.replace("[0.2, 0.1]", "[0.2, -0.1]"),
        SMALL_WEYL.replace("weyl-verification", "mollification"),
        SMALL_WEYL.replace("weyl-verification", "bilipschitz"),
        SMALL_WEYL.replace("weyl-verification", "spectral-dance"),
        SMALL_WEYL.to_string() + "colour = 3\n",
        SMALL_WEYL.replace("mesh_levels = ", "mesh_levels = = "),
        SMALL_WEYL.replace("name = \"square\"", "name = \"circle\""),
    ];
    for text in &bad {
        assert!(matches!(parse_config(text), Err(Error::Config(_))), "{text}");
    }
    let cfg = parse_config(SMALL_WEYL).unwrap();
    assert_eq!(cfg.seed, 20240917);
    assert!(load_config(std::path::Path::new("/nonexistent/config.toml")).is_err());
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 9);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = parse_config(SMALL_WEYL).unwrap();
    let (a, first) = outputs(&cfg);
    let (b, _) = outputs(&cfg);
    for name in ["eigenvalues.csv", "weyl.csv", "weyl.json", "report.json", "plot.svg"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty(), "{name}");
        assert_eq!(x, y, "{name}");
    }
    assert!(a.path().join("timings.json").exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 20240917);
    assert_eq!(report["provenance"]["config"]["mesh_levels"][1], 0.1);
    assert_eq!(first.report.levels.len(), 2);
}

#[test]
fn deviation_is_recomputable_from_the_report() {
    let cfg = parse_config(SMALL_WEYL).unwrap();
    let outcome = run(&cfg).unwrap();
    let predicted = outcome.report.predicted.unwrap().w_plus;
    for level in &outcome.report.levels {
        let fit = level.fit_plus.unwrap();
        let dev = (fit.estimate - predicted).abs() / predicted;
        assert_eq!(level.deviation_plus.unwrap(), dev);
    }
    // the eigenvalue table alone reproduces the fit
    let csv = eigenvalues_csv(&outcome.spectra);
    let finest: Vec<f64> = csv
        .lines()
        .skip(1)
        .filter(|l| l.contains(",0.1,") && l.contains(",+,"))
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    let mut products: Vec<f64> = (3..=8).map(|k| k as f64 * finest[k - 1]).collect();
    products.sort_by(f64::total_cmp);
    let median = 0.5 * (products[2] + products[3]);
    assert_eq!(median, outcome.report.levels[1].fit_plus.unwrap().estimate);
}

#[test]
fn identical_fields_give_identical_spectra() {
    let text = r#"
experiment = "boundary-only"
mesh_levels = [0.1]
tail_window = [3, 10]

[domain]
name = "square"

[boundary_only]
contrast = { kind = "constant" }
"#;
    let outcome = run(&parse_config(text).unwrap()).unwrap();
    assert_eq!(outcome.spectra.len(), 2);
    let (a, b) = (&outcome.spectra[0].spectrum, &outcome.spectra[1].spectrum);
    assert_eq!(a.positive.len(), b.positive.len());
    assert!(a.positive.iter().zip(&b.positive).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn mismatched_traces_are_rejected() {
    let text = r#"
experiment = "boundary-only"
mesh_levels = [0.1]

[domain]
name = "square"

[boundary_only]
contrast = { kind = "checkerboard", cell = 0.1, low = 0.1, high = 1.0 }
"#;
    assert!(matches!(run(&parse_config(text).unwrap()), Err(Error::TraceMismatch(_))));
}

#[test]
fn mollifying_below_the_mesh_scale_changes_nothing() {
    let text = r#"
experiment = "mollification"
mesh_levels = [0.1]
tail_window = [3, 10]

[domain]
name = "square"

[coefficients.a]
kind = "checkerboard"
cell = 0.25
low = 0.25
high = 1.0
offset = [0.125, 0.125]

[mollification]
epsilons = [1e-10]
window = 10
"#;
    let outcome = run(&parse_config(text).unwrap()).unwrap();
    let drift = outcome.report.details["drift"][0]["drift"].as_f64().unwrap();
    assert!(drift < 1e-10, "{drift}");

    let smooth = text.replace("kind = \"checkerboard\"\ncell = 0.25\nlow = 0.25\nhigh = 1.0\noffset = [0.125, 0.125]", "kind = \"rotated\"\nd1 = 3.0\nd2 = 1.0\nangle_deg = 20.0")
        .replace("[1e-10]", "[0.2, 0.1, 0.05]");
    let outcome = run(&parse_config(&smooth).unwrap()).unwrap();
    for d in outcome.report.details["drift"].as_array().unwrap() {
        assert!(d["drift"].as_f64().unwrap() < 1e-12);
    }
    assert!(outcome.report.passed);
}

#[test]
fn flat_chart_scaling_is_exact() {
    let c = 2.0;
    let chart = LipschitzChart::new(vec![(0.0, c), (1.0, c)]).unwrap();
    let d = PolygonDomain::new(
        "rect",
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, c), Point2::new(0.0, c)],
    )
    .unwrap()
    .with_chart(2..3, chart.clone())
    .unwrap();
    let map = Arc::new(build_straightening(&d, &chart, c).unwrap().discretize(&triangulate(&d, 0.15).unwrap()).unwrap());
    let coeff = CoefficientSpec::default().build(&d).unwrap();
    let pulled = pullback_coefficients(&coeff, &map).unwrap();
    let solver = SolverConfig::default();
    let s = fem_spectrum(map.source(), &coeff, &solver, 1).unwrap();
    let t = fem_spectrum(map.image(), &pulled, &solver, 1).unwrap();
    assert_eq!(s.positive.len(), t.positive.len());
    for (x, y) in s.positive.iter().zip(&t.positive) {
        assert!((x - y).abs() < 1e-10 * x);
    }
}

#[test]
fn small_bilipschitz_and_bem_runs() {
    let bil = r#"
experiment = "bilipschitz"
mesh_levels = [0.1]
tail_window = [3, 10]

[domain]
name = "sawtooth-square"
teeth = 4
slope = 1.0

[bilipschitz]
depth = 0.5
"#;
    let outcome = run(&parse_config(bil).unwrap()).unwrap();
    assert!(outcome.report.passed, "{:?}", outcome.report.checks);
    let bem = r#"
experiment = "bem-crosscheck"
mesh_levels = [0.05]

[domain]
name = "square"

[coefficients.v0]
kind = "constant"
value = 0.0

[bem]
panels_per_edge = 40
eigenvalues = 10
"#;
    let outcome = run(&parse_config(bem).unwrap()).unwrap();
    assert!(outcome.tables.contains_key("bem.csv"));
    let routes = outcome.report.checks.iter().find(|c| c.name.contains("route")).unwrap();
    assert!(routes.passed);
}

#[test]
fn plot_contains_predicted_line() {
    let outcome = run(&parse_config(SMALL_WEYL).unwrap()).unwrap();
    let svg = outcome.plot.to_svg();
    assert!(svg.contains("stroke-dasharray"));
    assert!(!outcome.plot.series.is_empty());
    assert_eq!(outcome.plot.levels[0].y, outcome.report.predicted.unwrap().w_plus);
}
