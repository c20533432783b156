use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use serde_json::json;
use singex3d::analytic::{IntegerTriple, Rect};
use singex3d::decomp::LocalDomain;
use singex3d::experiments::{
    hrefine_max_errors, nrefine_max_errors, resolve_patch, run_hrefine, run_nrefine, write_hrefine_csv,
    write_nrefine_csv, ExperimentConfig, ExperimentError,
};
use singex3d::geometry::{area_element, Point2};
use singex3d::integrator::{integrate, Aux, IntegralTask, IntegratorError, ModeChoice};
use singex3d::kernel::{ExactKernel, KernelFamily, RegMode};
use singex3d::lookup::{direct_value, DomainKind, GridSpec, LookupTable};
use singex3d::quadrature::{duffy_oracle, OracleDomain, OracleOptions, QuadratureError};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_ARGS: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "singex3d", version, about = "Singular surface integrals by series extraction")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quadrature-node refinement over the whole patch.
    Nrefine(ExpArgs),
    /// Support-size refinement with five offset supports per source.
    Hrefine(ExpArgs),
    /// Evaluate one integral and print a JSON report.
    Integrate(IntegrateArgs),
    /// Build, inspect or benchmark lookup tables.
    Table {
        #[command(subcommand)]
        cmd: TableCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    G,
    Hbar,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::G => KernelFamily::G,
            KernelArg::Hbar => KernelFamily::Hbar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Subtract,
    Divide,
    Auto,
}

#[derive(Args)]
struct ExpArgs {
    /// Builtin patch (spheroid, sphere-face, flat) or patch JSON file.
    #[arg(long)]
    patch: Option<String>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// `auto` keeps the experiment's default mode list.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Comma-separated term counts.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long = "N-schedule", value_delimiter = ',')]
    n_schedule: Option<Vec<usize>>,
    #[arg(long = "h-schedule", value_delimiter = ',')]
    h_schedule: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    #[arg(long = "oracle-tol")]
    oracle_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long, default_value = "spheroid")]
    patch: String,
    #[arg(long, value_enum)]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Source point `s1,s2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    source: Vec<f64>,
    /// `x0,x1,y0,y1` or six triangle coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    support: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    /// Gauss nodes per direction.
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    /// Multiply by the area element J.
    #[arg(long)]
    with_j: bool,
    /// Compare against the adaptive Duffy oracle.
    #[arg(long)]
    oracle: bool,
    #[arg(long = "oracle-tol", default_value_t = 1e-12)]
    oracle_tol: f64,
}

#[derive(Subcommand)]
enum TableCmd {
    Build(TableBuildArgs),
    Inspect(TableInspectArgs),
    Bench(TableBenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Square,
    Triangle,
}

impl From<KindArg> for DomainKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Square => DomainKind::UnitSquare,
            KindArg::Triangle => DomainKind::ReferenceTriangle,
        }
    }
}

#[derive(Args)]
struct TripleArgs {
    /// Comma-separated exponents p (negative odd).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1")]
    p: Vec<i32>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    q: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    r: Vec<u32>,
    #[arg(long, value_enum, default_value = "square")]
    kind: KindArg,
    #[arg(long = "tables-dir", env = "SINGEX3D_TABLES", default_value = "tables")]
    tables_dir: PathBuf,
}

#[derive(Args)]
struct TableBuildArgs {
    #[command(flatten)]
    triple: TripleArgs,
    #[arg(long, default_value_t = 257)]
    nb: usize,
    #[arg(long, default_value_t = 257)]
    nc: usize,
}

#[derive(Args)]
struct TableInspectArgs {
    #[command(flatten)]
    triple: TripleArgs,
    /// Grid node `i,j` to print.
    #[arg(long, value_delimiter = ',')]
    node: Option<Vec<usize>>,
}

#[derive(Args)]
struct TableBenchArgs {
    #[command(flatten)]
    triple: TripleArgs,
    #[arg(long, default_value_t = 10_000)]
    queries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum CliError {
    Args(String),
    Numeric(String),
    Io(String),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(m) => CliError::Args(m),
            ExperimentError::Io(e) => CliError::Io(e.to_string()),
            ExperimentError::Geometry(e) => CliError::Args(e.to_string()),
        }
    }
}

impl From<IntegratorError> for CliError {
    fn from(e: IntegratorError) -> Self {
        match e {
            IntegratorError::Invalid(m) => CliError::Args(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ARGS } else { 0 });
        }
    };
    let res = match cli.cmd {
        Cmd::Nrefine(a) => cmd_nrefine(a),
        Cmd::Hrefine(a) => cmd_hrefine(a),
        Cmd::Integrate(a) => cmd_integrate(a),
        Cmd::Table { cmd } => cmd_table(cmd),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Args(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_ARGS)
        }
        Err(CliError::Numeric(m)) => {
            eprintln!("numerical error: {m}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(CliError::Io(m)) => {
            eprintln!("io error: {m}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn load_config(a: &ExpArgs, hrefine: bool) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if hrefine && a.config.is_none() {
        cfg.modes = vec![RegMode::Subtract, RegMode::Divide];
    }
    if let Some(p) = &a.patch {
        cfg.patch = p.clone();
    }
    if let Some(k) = a.kernel {
        cfg.kernels = vec![k.into()];
    }
    match a.mode {
        Some(ModeArg::Subtract) => cfg.modes = vec![RegMode::Subtract],
        Some(ModeArg::Divide) => cfg.modes = vec![RegMode::Divide],
        Some(ModeArg::Auto) | None => {}
    }
    if let Some(n) = &a.n {
        cfg.n_values = n.clone();
    }
    if let Some(s) = &a.n_schedule {
        cfg.n_schedule = s.clone();
    }
    if let Some(s) = &a.h_schedule {
        cfg.h_schedule = s.clone();
    }
    if let Some(e) = a.eta {
        cfg.eta_g = Some(e);
        cfg.eta_hbar = Some(e);
    }
    if let Some(t) = a.oracle_tol {
        cfg.oracle_tol = t;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn report_warnings(w: &[String]) {
    for m in w {
        eprintln!("warning: {m}");
    }
}

fn cmd_nrefine(a: ExpArgs) -> Result<(), CliError> {
    let cfg = load_config(&a, false)?;
    let out = run_nrefine(&cfg)?;
    report_warnings(&out.warnings);
    write_nrefine_csv(output(&cfg.out)?, &out.rows)?;
    for ((k, m, n), v) in nrefine_max_errors(&out.rows) {
        let e: Vec<String> = v.iter().map(|(nn, e)| format!("N={nn}:{e:.2e}")).collect();
        eprintln!("{k} {m} n={n} max error {}", e.join(" "));
    }
    Ok(())
}

fn cmd_hrefine(a: ExpArgs) -> Result<(), CliError> {
    let cfg = load_config(&a, true)?;
    let out = run_hrefine(&cfg)?;
    report_warnings(&out.warnings);
    write_hrefine_csv(output(&cfg.out)?, &out.rows)?;
    for ((k, m, n), v) in hrefine_max_errors(&out.rows) {
        let e: Vec<String> = v.iter().map(|(h, e)| format!("h={h}:{e:.2e}")).collect();
        eprintln!("{k} {m} n={n} max error {}", e.join(" "));
    }
    Ok(())
}

fn cmd_integrate(a: IntegrateArgs) -> Result<(), CliError> {
    let patch = resolve_patch(&a.patch)?;
    if a.source.len() != 2 {
        return Err(CliError::Args("--source needs two coordinates".into()));
    }
    let s: Point2 = [a.source[0], a.source[1]];
    let support = match a.support.as_deref() {
        None => {
            let [[u0, u1], [v0, v1]] = patch.domain();
            LocalDomain::Rect(Rect::new(u0, u1, v0, v1))
        }
        Some([x0, x1, y0, y1]) => LocalDomain::Rect(Rect::new(*x0, *x1, *y0, *y1)),
        Some([a0, a1, b0, b1, c0, c1]) => LocalDomain::Tri([[*a0, *a1], [*b0, *b1], [*c0, *c1]]),
        Some(_) => return Err(CliError::Args("--support takes 4 (rectangle) or 6 (triangle) numbers".into())),
    };
    let family: KernelFamily = a.kernel.into();
    let mode = match a.mode {
        ModeArg::Subtract => ModeChoice::Subtract,
        ModeArg::Divide => ModeChoice::Divide,
        ModeArg::Auto => ModeChoice::Auto,
    };
    let task = IntegralTask::new(&patch, family, s, support)
        .with_n(a.n)
        .with_mode(mode)
        .with_eta(a.eta)
        .with_nodes(a.nodes)
        .with_aux(if a.with_j { Aux::AreaElement } else { Aux::One });
    let report = integrate(&task)?;
    let mut doc = json!({ "report": report });
    if a.oracle {
        let ex = ExactKernel::new(&patch, family, s).map_err(|e| CliError::Numeric(e.to_string()))?;
        let f = |t: Point2| {
            let j = if a.with_j { area_element(&patch, t).map(|x| x.0).unwrap_or(f64::NAN) } else { 1.0 };
            ex.at_t(t).unwrap_or(f64::NAN) * j
        };
        let dom = match support {
            LocalDomain::Rect(r) => OracleDomain::Rect(r),
            LocalDomain::Tri(v) => OracleDomain::Tri(v),
        };
        let opts = OracleOptions { rel_tol: a.oracle_tol, abs_tol: 1e-15, ..OracleOptions::default() };
        let (o, converged) = match duffy_oracle(f, s, &dom, &opts) {
            Ok(o) => (o, true),
            Err(QuadratureError::NotConverged(o)) => (o, false),
            Err(e) => return Err(CliError::Numeric(e.to_string())),
        };
        doc["oracle"] = json!({
            "value": o.value,
            "error_estimate": o.error_estimate,
            "evaluations": o.evaluations,
            "converged": converged,
            "abs_error": (report.value - o.value).abs(),
        });
    }
    println!("{:.16e}", report.value);
    println!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
    Ok(())
}

fn triples(t: &TripleArgs) -> Result<Vec<IntegerTriple>, CliError> {
    let mut out = Vec::new();
    for &p in &t.p {
        for &q in &t.q {
            for &r in &t.r {
                out.push(IntegerTriple::new(p, q, r).map_err(|e| CliError::Args(e.to_string()))?);
            }
        }
    }
    Ok(out)
}

fn table_path(dir: &Path, t: IntegerTriple, kind: DomainKind) -> PathBuf {
    dir.join(format!("{}.bin", LookupTable::file_stem(t, kind)))
}

fn load_or_build(dir: &Path, t: IntegerTriple, kind: DomainKind) -> Result<LookupTable, CliError> {
    let path = table_path(dir, t, kind);
    if path.exists() {
        LookupTable::load(&path).map_err(|e| CliError::Io(e.to_string()))
    } else {
        eprintln!("note: {} not found, building in memory", path.display());
        LookupTable::build(t, GridSpec::default(), kind).map_err(|e| CliError::Numeric(e.to_string()))
    }
}

fn cmd_table(cmd: TableCmd) -> Result<(), CliError> {
    match cmd {
        TableCmd::Build(a) => {
            let kind: DomainKind = a.triple.kind.into();
            let grid = GridSpec { nb: a.nb, nc: a.nc, ..GridSpec::default() };
            for t in triples(&a.triple)? {
                let start = Instant::now();
                let table = LookupTable::build(t, grid, kind).map_err(|e| CliError::Numeric(e.to_string()))?;
                let path = table.save(&a.triple.tables_dir).map_err(|e| CliError::Io(e.to_string()))?;
                println!(
                    "{} nodes={} invalid={} certified_cells={}/{} time={:.2}s",
                    path.display(),
                    table.values().len(),
                    table.invalid_nodes(),
                    table.certified_cells(),
                    table.total_cells(),
                    start.elapsed().as_secs_f64()
                );
            }
            Ok(())
        }
        TableCmd::Inspect(a) => {
            let kind: DomainKind = a.triple.kind.into();
            for t in triples(&a.triple)? {
                let table = LookupTable::load(&table_path(&a.triple.tables_dir, t, kind))
                    .map_err(|e| CliError::Io(e.to_string()))?;
                println!("{}", serde_json::to_string_pretty(&table.header()).expect("header serializes"));
                let g = *table.grid();
                let nodes: Vec<(usize, usize)> = match a.node.as_deref() {
                    Some([i, j]) => vec![(*i, *j)],
                    Some(_) => return Err(CliError::Args("--node takes i,j".into())),
                    None => vec![(0, 0), (g.nb / 2, g.nc / 2), (g.nb - 1, g.nc - 1)],
                };
                for (i, j) in nodes {
                    if i >= g.nb || j >= g.nc {
                        return Err(CliError::Args(format!("node ({i}, {j}) outside {}×{}", g.nb, g.nc)));
                    }
                    println!(
                        "node ({i}, {j}) b={:.16e} c={:.16e} value={:.16e}",
                        g.b_node(i),
                        g.c_node(j),
                        table.node_value(i, j)
                    );
                }
            }
            Ok(())
        }
        TableCmd::Bench(a) => {
            let kind: DomainKind = a.triple.kind.into();
            for t in triples(&a.triple)? {
                let table = load_or_build(&a.triple.tables_dir, t, kind)?;
                let g = *table.grid();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
                let qs: Vec<(f64, f64)> = (0..a.queries)
                    .map(|_| (rng.gen_range(-g.b_max..g.b_max), rng.gen_range(g.c_min.ln()..g.c_max.ln()).exp()))
                    .collect();
                table.reset_counters();
                let start = Instant::now();
                let mut vals = Vec::with_capacity(qs.len());
                for &(b, c) in &qs {
                    vals.push(table.query(b, c).ok());
                }
                let t_table = start.elapsed().as_secs_f64();
                let start = Instant::now();
                let mut max_err = 0.0f64;
                for (&(b, c), v) in qs.iter().zip(&vals) {
                    if let (Ok(d), Some(v)) = (direct_value(t, kind, b, c), v) {
                        if d != 0.0 {
                            max_err = max_err.max(((v - d) / d).abs());
                        }
                    }
                }
                let t_direct = start.elapsed().as_secs_f64();
                println!(
                    "({}, {}, {}) {}: queries={} fallbacks={} fallback_rate={:.4} max_rel_error={:.3e} table={:.4}s direct={:.4}s speedup={:.1}",
                    t.p,
                    t.q,
                    t.r,
                    kind.name(),
                    qs.len(),
                    table.fallback_count(),
                    table.fallback_count() as f64 / qs.len().max(1) as f64,
                    max_err,
                    t_table,
                    t_direct,
                    t_direct / t_table.max(1e-12)
                );
            }
            Ok(())
        }
    }
}
