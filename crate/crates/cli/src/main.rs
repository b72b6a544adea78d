use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use steklab::assembly::CoefficientSpec;
use steklab::eigensolve::{tail_coefficient, Method, Sign};
use steklab::geometry::{make_domain, triangulate, PolygonDomain};
use steklab::harness::{self, fem_spectrum, SolverConfig};
use steklab::potentials::{build_layer_operators, nd_operator};
use steklab::weyl::{weyl_coefficient, WeylOptions};

#[derive(Parser)]
#[command(name = "steklab", version, about = "Steklov spectra, Weyl coefficients and layer potentials on polygons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Triangulate a catalog domain and write the mesh as text.
    Mesh {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        h: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve the Steklov pencil and write eigenvalues as CSV.
    Solve {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        h: f64,
        #[command(flatten)]
        coefficients: CoefficientArgs,
        #[arg(long, value_parser = parse_method, default_value = "condensed")]
        method: Method,
        /// Eigenpairs requested from the iterative solver.
        #[arg(long, default_value_t = 100)]
        eigenvalues: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the Weyl coefficients and write the boundary density as CSV.
    Weyl {
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        coefficients: CoefficientArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Eigenvalues of the Neumann-to-Dirichlet operator from layer potentials.
    Bem {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        panels_per_edge: usize,
        #[arg(long, default_value_t = 20)]
        eigenvalues: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment from a TOML configuration.
    Experiment {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the configuration.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DomainArgs {
    /// Catalog name: square, regular-ngon, lshape, sawtooth-square, koch-prefractal.
    #[arg(long)]
    domain: String,
    /// Domain parameter as key=value, repeatable (e.g. --param n=256).
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

impl DomainArgs {
    fn build(&self) -> Result<PolygonDomain> {
        let params: BTreeMap<String, f64> = self.params.iter().cloned().collect();
        Ok(make_domain(&self.domain, &params)?)
    }
}

#[derive(Args)]
struct CoefficientArgs {
    /// TOML file with `a`, `v0` and `rho` tables; defaults to a = I, v0 = 1, rho = 1.
    #[arg(long)]
    coefficients: Option<PathBuf>,
}

impl CoefficientArgs {
    fn spec(&self) -> Result<CoefficientSpec> {
        match &self.coefficients {
            None => Ok(CoefficientSpec::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(toml::from_str(&text)?)
            }
        }
    }
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|e| format!("parameter `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "dense" => Ok(Method::Dense),
        "iterative" => Ok(Method::Iterative),
        "condensed" => Ok(Method::Condensed),
        "condensed-mean-zero" => Ok(Method::CondensedMeanZero),
        _ => Err(format!("unknown method `{s}`")),
    }
}

fn sink(output: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Mesh { domain, h, output } => {
            let mesh = triangulate(&domain.build()?, h)?;
            mesh.write_text(sink(&output)?)?;
            eprintln!(
                "{} nodes, {} triangles, {} boundary edges, min angle {:.1}°",
                mesh.num_nodes(),
                mesh.triangles.len(),
                mesh.boundary_edges.len(),
                mesh.min_angle_deg()
            );
        }
        Command::Solve {
            domain,
            h,
            coefficients,
            method,
            eigenvalues,
            output,
        } => {
            let domain = domain.build()?;
            let coeff = coefficients.spec()?.build(&domain)?;
            let mesh = triangulate(&domain, h)?;
            let solver = SolverConfig { method, eigenvalues };
            let spec = fem_spectrum(&mesh, &coeff, &solver, 0)?;
            spec.write_csv(sink(&output)?)?;
            for sign in [Sign::Plus, Sign::Minus] {
                if spec.branch(sign).len() >= 20 {
                    let fit = tail_coefficient(&spec, sign, 1, None)?;
                    eprintln!(
                        "n{}: {} eigenvalues, tail fit {:.6} [{:.6}, {:.6}] over k in [{}, {}]",
                        sign.symbol(),
                        spec.branch(sign).len(),
                        fit.estimate,
                        fit.low,
                        fit.high,
                        fit.k_min,
                        fit.k_max
                    );
                }
            }
            eprintln!("max residual {:.2e}", spec.max_residual());
        }
        Command::Weyl {
            domain,
            coefficients,
            output,
        } => {
            let domain = domain.build()?;
            let coeff = coefficients.spec()?.build(&domain)?;
            let w = weyl_coefficient(&domain, coeff.a.as_ref(), coeff.rho.as_ref(), WeylOptions::default())?;
            w.write_csv(sink(&output)?)?;
            eprintln!("W+ = {:.12}, W- = {:.12}", w.w_plus, w.w_minus);
        }
        Command::Bem {
            domain,
            panels_per_edge,
            eigenvalues,
            output,
        } => {
            let op = build_layer_operators(&domain.build()?, panels_per_edge)?;
            let nd = nd_operator(&op)?;
            if eigenvalues > nd.eigenvalues.len() {
                bail!("{eigenvalues} eigenvalues requested, {} available", nd.eigenvalues.len());
            }
            let mut out = sink(&output)?;
            writeln!(out, "k,eigenvalue")?;
            for (k, v) in nd.eigenvalues.iter().take(eigenvalues).enumerate() {
                writeln!(out, "{},{v:.16e}", k + 1)?;
            }
            eprintln!(
                "{} panels, condition {:.3e}, route difference {:.2e}",
                op.len(),
                nd.condition,
                nd.route_difference
            );
        }
        Command::Experiment { config, output } => {
            let cfg = harness::load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            let dir = output
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let outcome = harness::run(&cfg)?;
            harness::write_outputs(&outcome, &dir)?;
            let report = &outcome.report;
            if let Some(e) = &report.error {
                eprintln!("aborted: {e}");
            }
            for c in &report.checks {
                let op = if c.bound == "max" { "<=" } else { ">=" };
                eprintln!(
                    "{} {}: {:.4e} {op} {:.1e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            eprintln!("outputs written to {}", dir.display());
            return Ok(report.passed);
        }
    }
    Ok(true)
}
