use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use torickems::fixture::{catalog, fixture, Fixture};
use torickems::flow::{flow_mis_report, FlowOptions, Growth};
use torickems::invariants::solve_soliton_vector;
use torickems::mis::{analyze, CandidateSource, MISReport, Mode};
use torickems::polytope::{demazure_roots, facet_id};
use torickems::quadrature::PolytopeIntegrator;
use torickems::selftest;
use torickems::summary::{summarize, Analysis, Summary};

/// Kähler–Einstein and Kähler–Ricci soliton obstructions on toric Fano surfaces.
#[derive(Parser)]
#[command(name = "torickems", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Name of a built-in fixture (see `fixtures list`).
    #[arg(long)]
    fixture: Option<String>,
    /// Path to a fixture JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ke,
    Krs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Candidates {
    /// The fixture's admissible list when it has one, all connected unions otherwise.
    Fixture,
    /// Every connected union of Weyl orbits of faces.
    Auto,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a fixture and test every candidate subvariety for exclusion.
    Analyze {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Gradient tolerance of the soliton solve.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, value_enum, default_value = "fixture")]
        candidates: Candidates,
    },
    /// Classify facets by the growth of the flow integrals.
    Flow {
        #[command(flatten)]
        source: Source,
        /// Nadel exponents, each in (1/2, 1).
        #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.8, 0.9])]
        alpha: Vec<f64>,
        /// End of the time grid (default 40/β).
        #[arg(long)]
        t_max: Option<f64>,
        /// Half-width of the facet regions.
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        /// Start of the facet regions along the ray.
        #[arg(long, default_value_t = 8.0)]
        s0: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write the integral series as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve for the soliton vector field.
    Soliton {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// List the Demazure roots.
    Roots {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Inspect or export the built-in fixtures.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
    /// Run the property suites.
    Selftest {
        /// Only run suites whose name starts with this.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Subcommand)]
enum FixturesAction {
    List,
    /// Write fixtures as JSON, to stdout or one file per fixture in a directory.
    Export {
        /// Fixture to export (all when omitted).
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures mapped onto the documented exit codes.
enum Failure {
    Checks(Vec<String>),
    Validation(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<torickems::Error>() {
            Some(inner) if inner.is_numerical() => Failure::Numerical(e),
            _ => Failure::Validation(e),
        }
    }
}

impl From<torickems::Error> for Failure {
    fn from(e: torickems::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

fn load(source: &Source) -> anyhow::Result<Fixture> {
    match (&source.fixture, &source.input) {
        (Some(name), _) => Ok(fixture(name)?),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(Fixture::from_json(&text).with_context(|| format!("loading {}", path.display()))?)
        }
        (None, None) => Err(anyhow!("one of --fixture or --input is required")),
    }
}

fn print_summary(s: &Summary) {
    println!("fixture      {}", s.fixture);
    println!("rays         {}", vecs(&s.rays));
    println!("vertices     {}", vecs(&s.vertices));
    println!("|L(Δ)|       {}", s.lattice_points);
    println!("volume       {}", s.volume);
    println!("barycenter   ({})", s.barycenter.join(", "));
    println!("Weyl order   {}", s.weyl_order);
    if let Some(d) = &s.self_intersections {
        let pairs: Vec<String> = s.rays.iter().zip(d).map(|(r, d)| format!("{}: {d}", facet_id(r))).collect();
        println!("curves       {}", pairs.join(", "));
    }
    if s.futaki_vanishes {
        println!("Futaki       F ≡ 0");
    } else {
        let vals: Vec<String> = s.futaki.iter().map(|f| format!("F{} = {}", vec_str(&f.xi), f.exact)).collect();
        println!("Futaki       {}", vals.join(", "));
    }
    let sol = &s.soliton;
    println!("soliton      ξ_s = {}, |∇| = {:e}", fvec(&sol.xi_s), sol.grad_norm);
    println!("             b = {}, threshold (n+b)/(n+1+b) = {}", sol.b, sol.threshold);
}

fn print_report(r: &MISReport) {
    for c in &r.candidates {
        let name = c.label.clone().map(|l| format!("{l} [{}]", c.faces.join(" ∪ "))).unwrap_or_else(|| c.faces.join(" ∪ "));
        let status = serde_json::to_value(c.status).expect("status serializes");
        let mut line = format!("  {:<13}{name}", status.as_str().unwrap_or_default());
        if let Some(cert) = &c.certificate {
            line.push_str(&format!("  certificate {}", vec_str(cert)));
        }
        if let Some(note) = &c.note {
            line.push_str(&format!("  ({note})"));
        }
        println!("{line}");
    }
    println!("conclusion: {}", r.conclusion);
}

fn vec_str(v: &[i64]) -> String {
    format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
}

fn vecs(v: &[Vec<i64>]) -> String {
    v.iter().map(|x| vec_str(x)).collect::<Vec<_>>().join(" ")
}

fn fvec(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", "))
}

fn cmd_analyze(source: &Source, mode: ModeArg, format: Format, tol: f64, candidates: Candidates) -> Outcome {
    let fixture = load(source)?;
    let summary = summarize(&fixture, tol).context("summarize")?;
    let mode = match mode {
        ModeArg::Ke => Mode::KE,
        ModeArg::Krs => Mode::KRS,
    };
    let source = match candidates {
        Candidates::Fixture => CandidateSource::Fixture,
        Candidates::Auto => CandidateSource::Auto,
    };
    let report = analyze(&fixture, mode, source).context("analyze")?;
    match format {
        Format::Json => println!("{}", Analysis { summary, report }.to_json()),
        Format::Text => {
            print_summary(&summary);
            println!();
            print_report(&report);
        }
    }
    Ok(())
}

fn cmd_flow(source: &Source, opts: FlowOptions, format: Format, csv: Option<&Path>) -> Outcome {
    let fixture = load(source)?;
    let report = flow_mis_report(&fixture, &opts).context("flow_mis_report")?;
    let flow = report.flow.as_ref().expect("flow reports carry details");
    if let Some(path) = csv {
        fs::write(path, flow.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    match format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => {
            println!("ξ_s = {}, β = {}", fvec(&flow.xi_s), flow.beta);
            println!("t grid: {:?}", flow.t_grid);
            for s in &flow.series {
                let class = match s.growth {
                    Growth::Divergent { .. } => "divergent",
                    Growth::Bounded { .. } => "bounded",
                    Growth::Inconclusive { .. } => "inconclusive",
                };
                let mut line = format!("  {:<9} α={:<4} {:<13} slope {:+.5}", s.facet, s.alpha, class, s.growth.slope());
                if let Some(p) = s.predicted_slope {
                    line.push_str(&format!("  (2α−1)β = {p:.5}"));
                }
                println!("{line}");
            }
            println!("α-stable: {}, completion agrees: {}", flow.alpha_stable, flow.completion_agrees);
            print_report(&report);
        }
    }
    if flow.series.iter().all(|s| matches!(s.growth, Growth::Inconclusive { .. })) {
        return Err(Failure::Numerical(anyhow!("flow: every facet series is inconclusive")));
    }
    Ok(())
}

fn cmd_soliton(source: &Source, tol: f64, format: Format) -> Outcome {
    let fixture = load(source)?;
    let (polytope, fan) = fixture.build()?;
    let integrator = PolytopeIntegrator::new(&polytope, &fan);
    let sol = solve_soliton_vector(&polytope, &integrator, tol).context("solve_soliton_vector")?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&sol).expect("serializes")),
        Format::Text => {
            println!("ξ_s = {}", fvec(&sol.xi_s));
            println!("|∇ log I0| = {:e} after {} Newton steps", sol.grad_norm, sol.iterations);
            println!("θ range [{}, {}], b = {}", sol.alpha_v, sol.beta_v, sol.b);
            println!("threshold (n+b)/(n+1+b) = {}", sol.threshold);
        }
    }
    Ok(())
}

fn cmd_roots(source: &Source, format: Format) -> Outcome {
    let fixture = load(source)?;
    let (polytope, fan) = fixture.build()?;
    let roots = demazure_roots(&polytope, &fan);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&roots).expect("serializes")),
        Format::Text => {
            println!("{} Demazure roots", roots.len());
            for r in &roots {
                println!("  m = {:<8} distinguished facet {}", vec_str(&r.m), facet_id(&fan.rays[r.distinguished_ray]));
            }
        }
    }
    Ok(())
}

fn cmd_fixtures(action: &FixturesAction) -> Outcome {
    match action {
        FixturesAction::List => {
            for f in catalog() {
                println!("{:<9} {}", f.name, vecs(&f.rays));
            }
        }
        FixturesAction::Export { name, out } => {
            let list = match name {
                Some(n) => vec![fixture(n)?],
                None => catalog(),
            };
            match out {
                Some(dir) => {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    for f in &list {
                        let path = dir.join(format!("{}.json", f.name));
                        fs::write(&path, f.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
                    }
                }
                None if list.len() == 1 => println!("{}", list[0].to_json()),
                None => println!("{}", serde_json::to_string_pretty(&list).expect("serializes")),
            }
        }
    }
    Ok(())
}

fn cmd_selftest(filter: Option<&str>, format: Format) -> Outcome {
    if let Some(f) = filter {
        if !selftest::SUITES.iter().any(|s| s.starts_with(f)) {
            return Err(Failure::Validation(anyhow!("selftest: no suite matches {f:?} (suites: {})", selftest::SUITES.join(", "))));
        }
    }
    let results = selftest::run(filter);
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&results).expect("serializes")),
        Format::Text => {
            for r in &results {
                println!("{} {}/{}: {}", if r.passed { "ok  " } else { "FAIL" }, r.suite, r.name, r.detail);
            }
            let passed = results.iter().filter(|r| r.passed).count();
            println!("{passed}/{} checks passed", results.len());
        }
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| format!("{}/{}", r.suite, r.name)).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("TORICKEMS_THREADS") else { return Ok(()) };
    let n: usize = value.trim().parse().map_err(|_| anyhow!("TORICKEMS_THREADS must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err(anyhow!("TORICKEMS_THREADS must be a positive integer, got 0"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    configure_threads()?;
    match &cli.command {
        Command::Analyze { source, mode, format, tol, candidates } => cmd_analyze(source, *mode, *format, *tol, *candidates),
        Command::Flow { source, alpha, t_max, eps, s0, format, csv } => {
            let opts = FlowOptions { alphas: alpha.clone(), t_max: *t_max, eps: *eps, s0: *s0 };
            cmd_flow(source, opts, *format, csv.as_deref())
        }
        Command::Soliton { source, tol, format } => cmd_soliton(source, *tol, *format),
        Command::Roots { source, format } => cmd_roots(source, *format),
        Command::Fixtures { action } => cmd_fixtures(action),
        Command::Selftest { filter, format } => cmd_selftest(filter.as_deref(), *format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(names)) => {
            eprintln!("selftest: {} failing checks: {}", names.len(), names.join(", "));
            ExitCode::from(1)
        }
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
