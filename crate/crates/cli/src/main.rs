use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gridtree_core::balancing::{balancing_sweep, corollary_check, BalancingCertificate, CorollaryRow};
use gridtree_core::exact::modular::tree_count_modular;
use gridtree_core::explorer::{bounds_report, explore_with_progress, BoundsReport, ExploreConfig, TauBackend};
use gridtree_core::report::{certificates_csv, checks_csv, exploration_csv};
use gridtree_core::shape_file::parse_cells;
use gridtree_core::spectral::{tau_product_log, LogTau, TAU_LOG_ERROR_CONSTANT};
use gridtree_core::verify::{lemma_suite, LemmaRanges};
use gridtree_core::{induced_graph, tree_count_exact, CellSet, RectShape, Symmetry, TreeCount};

/// Largest `--max-area` accepted by `verify balancing` without `--allow-big`.
const BALANCING_AREA_BUDGET: u64 = 400;
/// Largest `--max-r` accepted by `verify lemmas` without `--allow-big`.
const LEMMA_R_BUDGET: u32 = 5000;

#[derive(Parser, Debug, Serialize)]
#[command(name = "gridtree", version, about = "Spanning-tree counts of grid graphs")]
struct Cli {
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Count spanning trees of a rectangle or a shape file.
    Tau(TauArgs),
    /// Run a verification suite.
    Verify {
        #[command(subcommand)]
        target: VerifyTarget,
    },
    /// Search every connected n^2-cell shape for one beating the n x n square.
    Explore(ExploreArgs),
    /// Edge, boundary and cycle-rank bounds of a shape.
    Bounds(ShapeArgs),
}

#[derive(Args, Debug, Serialize)]
#[group(required = true, multiple = false)]
struct ShapeArgs {
    /// Rectangle as LxM.
    #[arg(long)]
    rect: Option<RectShape>,
    /// Shape file (ASCII grid or one "x y" pair per line).
    #[arg(long)]
    cells: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TauArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    method: Method,
    /// Compute exact counts by multi-prime CRT instead of Bareiss.
    #[arg(long)]
    modular: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Exact,
    Spectral,
    Both,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum VerifyTarget {
    /// Spectral identities, derivative signs, the Riemann ladder and the cross-sum inequality.
    Lemmas {
        #[arg(long, default_value_t = 1000)]
        max_r: u32,
        #[arg(long)]
        allow_big: bool,
    },
    /// Certificates for every balancing pair of every area up to --max-area.
    Balancing {
        #[arg(long, default_value_t = 144)]
        max_area: u64,
        /// Rectangles with more vertices are certified spectrally only.
        #[arg(long, default_value_t = gridtree_core::balancing::DEFAULT_EXACT_VERTEX_BUDGET)]
        exact_budget: u64,
        #[arg(long)]
        allow_big: bool,
    },
}

#[derive(Args, Debug, Serialize)]
struct ExploreArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, value_enum, default_value_t = Mode::Fixed)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Backend::Exact)]
    backend: Backend,
    /// Permit areas above the default exhaustive budget.
    #[arg(long)]
    allow_big: bool,
    /// Stop after this many shapes (the run is then reported as non-exhaustive).
    #[arg(long)]
    max_shapes: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Fixed,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Backend {
    Exact,
    Spectral,
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Pass = 0,
    CheckFailed = 2,
    Incomplete = 3,
}

struct Output {
    status: Status,
    text: String,
    csv: String,
    json: serde_json::Value,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Status> {
    let workers = match cli.workers {
        Some(0) => bail!("--workers must be positive"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .context("starting worker pool")?;

    let out = match &cli.command {
        Command::Tau(args) => cmd_tau(args)?,
        Command::Verify { target } => match *target {
            VerifyTarget::Lemmas { max_r, allow_big } => cmd_lemmas(max_r, allow_big)?,
            VerifyTarget::Balancing {
                max_area,
                exact_budget,
                allow_big,
            } => cmd_balancing(max_area, exact_budget, allow_big)?,
        },
        Command::Explore(args) => cmd_explore(args)?,
        Command::Bounds(args) => cmd_bounds(args)?,
    };

    let rendered = match cli.format {
        Format::Text => out.text,
        Format::Csv => out.csv,
        Format::Json => {
            let doc = serde_json::json!({
                "version": env!("CARGO_PKG_VERSION"),
                "config": { "workers": workers, "format": cli.format, "out": cli.out, "command": cli.command },
                "status": out.status as u8,
                "result": out.json,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    match &cli.out {
        Some(path) => std::fs::write(path, rendered).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(out.status)
}

fn load_shape(args: &ShapeArgs) -> anyhow::Result<(String, CellSet)> {
    if let Some(rect) = args.rect {
        return Ok((rect.to_string(), gridtree_core::grid::rect_cells(rect)));
    }
    let path = args.cells.as_ref().expect("clap enforces one of --rect/--cells");
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cells = parse_cells(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((path.display().to_string(), cells))
}

/// Header plus a single record.
fn csv_table(header: &[&str], row: &[&str]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    w.write_record(row)?;
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct TauReport {
    shape: String,
    vertices: usize,
    edges: usize,
    tau: Option<TreeCount>,
    spectral: Option<LogTau>,
    /// Whether both methods agree (only with `--method both`).
    agree: Option<bool>,
    rounding_certified: Option<bool>,
}

fn cmd_tau(args: &TauArgs) -> anyhow::Result<Output> {
    let (name, cells) = load_shape(&args.shape)?;
    let graph = induced_graph(&cells);
    let want_exact = args.method != Method::Spectral;
    let want_spectral = args.method != Method::Exact;
    let rect = cells.as_rect();
    if want_spectral && rect.is_none() {
        bail!("the spectral method needs a full rectangle, and {name} is not one");
    }
    let tau = want_exact.then(|| {
        if args.modular {
            tree_count_modular(&graph)
        } else {
            tree_count_exact(&graph)
        }
    });
    let spectral = rect.filter(|_| want_spectral).map(tau_product_log);
    let agree = match (&tau, &spectral) {
        (Some(t), Some(s)) => Some(tau_agrees(t, s)),
        _ => None,
    };
    let report = TauReport {
        shape: name,
        vertices: graph.vertex_count(),
        edges: graph.edge_count(),
        rounding_certified: spectral.map(|s| s.rounding_certified()),
        tau,
        spectral,
        agree,
    };

    let mut text = String::new();
    writeln!(text, "shape: {} ({} vertices, {} edges)", report.shape, report.vertices, report.edges)?;
    if let Some(t) = &report.tau {
        writeln!(text, "tau: {t}")?;
    }
    if let Some(s) = &report.spectral {
        writeln!(text, "log tau: {} (err_bound {:e})", s.log_value, s.err_bound)?;
        match s.rounded() {
            Some(v) if s.rounding_certified() => writeln!(text, "round(exp(log tau)): {v} (certified)")?,
            Some(v) => writeln!(text, "round(exp(log tau)): {v} (not certified)")?,
            None => writeln!(text, "round(exp(log tau)): out of range")?,
        }
    }
    if let Some(a) = report.agree {
        writeln!(text, "agree: {a}")?;
    }

    let opt = |v: Option<String>| v.unwrap_or_default();
    let csv = csv_table(
        &["shape", "vertices", "edges", "tau", "log_tau", "err_bound", "agree"],
        &[
            &report.shape,
            &report.vertices.to_string(),
            &report.edges.to_string(),
            &opt(report.tau.as_ref().map(ToString::to_string)),
            &opt(report.spectral.map(|s| format!("{:?}", s.log_value))),
            &opt(report.spectral.map(|s| format!("{:?}", s.err_bound))),
            &opt(report.agree.map(|a| a.to_string())),
        ],
    )?;
    let json = serde_json::json!({
        "report": report,
        "tolerances": {
            "tau_log_error_constant": TAU_LOG_ERROR_CONSTANT,
            "machine_epsilon": f64::EPSILON,
        },
    });
    Ok(Output {
        status: if agree == Some(false) { Status::CheckFailed } else { Status::Pass },
        text,
        csv,
        json,
    })
}

/// The exact log lies inside the spectral enclosure, and rounding matches whenever the
/// bound is tight enough to certify it.
fn tau_agrees(tau: &TreeCount, s: &LogTau) -> bool {
    if tau.is_zero() {
        return false;
    }
    let ln = tau.ln();
    let encloses = s.encloses(ln, gridtree_core::balancing::exact_ln_error(ln));
    let rounding = !s.rounding_certified() || s.rounded().is_some_and(|v| tau.to_string() == v.to_string());
    encloses && rounding
}

fn cmd_lemmas(max_r: u32, allow_big: bool) -> anyhow::Result<Output> {
    if max_r > LEMMA_R_BUDGET && !allow_big {
        bail!("--max-r {max_r} exceeds the budget of {LEMMA_R_BUDGET}; pass --allow-big to run it");
    }
    let ranges = LemmaRanges::capped(max_r);
    let checks = lemma_suite(ranges);
    let passed = checks.iter().all(|c| c.passed);
    let mut text = String::new();
    for c in &checks {
        writeln!(
            text,
            "{} {:<28} measured {:<24e} tolerance {:e}  ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            c.detail
        )?;
    }
    writeln!(text, "{} of {} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len())?;
    Ok(Output {
        status: if passed { Status::Pass } else { Status::CheckFailed },
        csv: checks_csv(&checks),
        json: serde_json::json!({ "ranges": ranges, "checks": checks }),
        text,
    })
}

fn cmd_balancing(max_area: u64, exact_budget: u64, allow_big: bool) -> anyhow::Result<Output> {
    if max_area > BALANCING_AREA_BUDGET && !allow_big {
        bail!("--max-area {max_area} exceeds the budget of {BALANCING_AREA_BUDGET}; pass --allow-big to run it");
    }
    if max_area == 0 {
        bail!("--max-area must be positive");
    }
    let certs = balancing_sweep(max_area, exact_budget);
    let max_n = (1..).take_while(|n: &u32| (*n as u64).pow(2) <= max_area.min(exact_budget)).last().unwrap_or(0);
    let corollary = corollary_check(max_n);
    let failing: Vec<&BalancingCertificate> = certs.iter().filter(|c| !c.passes()).collect();
    let corollary_failing: Vec<&CorollaryRow> = corollary.iter().filter(|r| !r.holds()).collect();

    let mut text = String::new();
    for c in &certs {
        let exact = match (&c.tau_original, &c.tau_balanced) {
            (Some(o), Some(b)) => format!("{o} <= {b}"),
            _ => "exact counts skipped".into(),
        };
        writeln!(
            text,
            "{} {} -> {} t={} linear={:e} gamma={:e} discrepancy={:e} budget={:e} {}",
            if c.passes() { "PASS" } else { "FAIL" },
            c.original,
            c.balanced,
            c.t,
            c.linear_term,
            c.residual_term,
            c.discrepancy,
            c.max_abscrepancy,
            exact
        )?;
        for v in c.violations() {
            writeln!(text, "    {v}")?;
        }
    }
    for r in &corollary_failing {
        writeln!(text, "FAIL tau({}) = {} exceeds the {}x{} square's {}", r.rectangle, r.tau, r.n, r.n, r.tau_square)?;
    }
    writeln!(
        text,
        "{} of {} certificates pass for areas <= {max_area}; rectangle-vs-square check for n <= {max_n}: {} of {} hold",
        certs.len() - failing.len(),
        certs.len(),
        corollary.len() - corollary_failing.len(),
        corollary.len()
    )?;
    let ok = failing.is_empty() && corollary_failing.is_empty();
    Ok(Output {
        status: if ok { Status::Pass } else { Status::CheckFailed },
        csv: certificates_csv(&certs),
        json: serde_json::json!({
            "tolerances": {
                "certificate_budget": "per-certificate `max_abscrepancy`, the sum of component error bounds",
                "machine_epsilon": f64::EPSILON,
            },
            "certificates": certs,
            "rectangle_vs_square": corollary,
        }),
        text,
    })
}

fn cmd_explore(args: &ExploreArgs) -> anyhow::Result<Output> {
    let mut config = ExploreConfig::new(
        args.n,
        match args.mode {
            Mode::Fixed => Symmetry::Fixed,
            Mode::Free => Symmetry::Free,
        },
    );
    config.backend = match args.backend {
        Backend::Exact => TauBackend::Exact,
        Backend::Spectral => TauBackend::SpectralForRectangles,
    };
    config.allow_big = args.allow_big;
    config.max_shapes = args.max_shapes;

    let started = Instant::now();
    let last = Mutex::new(Instant::now());
    let report = explore_with_progress(&config, |examined| {
        let mut last = last.lock().expect("progress lock");
        if last.elapsed() >= Duration::from_secs(1) {
            *last = Instant::now();
            eprintln!("[{:>6.1}s] {examined} shapes examined", started.elapsed().as_secs_f64());
        }
    })?;

    let mut text = String::new();
    writeln!(
        text,
        "n = {}, mode = {}, shapes examined = {} ({})",
        report.n,
        report.mode,
        report.shapes_examined,
        if report.exhaustive { "exhaustive" } else { "aborted, not exhaustive" }
    )?;
    writeln!(text, "tau of the {}x{} square: {}", report.n, report.n, report.tau_square)?;
    writeln!(text, "max tau: {} at {} shape(s)", report.max_tau, report.argmax_shapes.len())?;
    for s in &report.argmax_shapes {
        writeln!(text, "  {s}")?;
    }
    writeln!(text, "square is maximal: {}", report.conjecture_holds)?;
    writeln!(text, "non-square maximizer: {}", report.non_square_maximizer)?;
    writeln!(text, "counterexamples: {}", report.counterexamples.len())?;
    for c in &report.counterexamples {
        writeln!(text, "  {} tau = {}", c.shape, c.tau)?;
    }
    writeln!(text, "bounds failures: {}", report.bounds_failures)?;
    if config.backend == TauBackend::SpectralForRectangles {
        writeln!(text, "spectral mismatches: {}", report.spectral_mismatches)?;
    }

    let status = if !report.conjecture_holds || report.bounds_failures > 0 || report.spectral_mismatches > 0 {
        Status::CheckFailed
    } else if !report.exhaustive {
        Status::Incomplete
    } else {
        Status::Pass
    };
    Ok(Output {
        status,
        csv: exploration_csv(&report),
        json: serde_json::json!({ "tolerances": { "comparison": "exact integer" }, "report": report }),
        text,
    })
}

fn cmd_bounds(args: &ShapeArgs) -> anyhow::Result<Output> {
    let (name, cells) = load_shape(args)?;
    let b: BoundsReport = bounds_report(&cells).with_context(|| format!("shape {name}"))?;
    let show = |v: Option<bool>| v.map_or("n/a (area is not a perfect square)".to_string(), |v| v.to_string());
    let mut text = String::new();
    writeln!(text, "shape: {name}")?;
    writeln!(text, "cells: {}", b.cells)?;
    writeln!(text, "edges E: {}", b.edges)?;
    writeln!(text, "boundary incidences b: {}", b.boundary)?;
    writeln!(text, "occupied columns w: {}, rows h: {}", b.w, b.h)?;
    writeln!(text, "cycle rank: {}", b.rho)?;
    writeln!(text, "4|S| = 2E + b: {}", b.identity_holds)?;
    writeln!(text, "b >= 2w + 2h >= 4 sqrt(wh) >= 4n: {}", show(b.chain_holds))?;
    writeln!(text, "E <= 2n(n-1): {}", show(b.edge_bound_holds))?;
    writeln!(text, "cycle rank <= (n-1)^2: {}", show(b.cycle_rank_bound_holds))?;
    writeln!(text, "edge bound attained: {}", b.edge_bound_tight)?;
    writeln!(text, "square: {}", b.is_square)?;

    let csv = csv_table(
        &[
            "shape", "cells", "edges", "boundary", "w", "h", "rho", "identity", "chain", "edge_bound",
            "cycle_rank_bound", "edge_bound_tight", "square",
        ],
        &[
        &name,
        &b.cells.to_string(),
        &b.edges.to_string(),
        &b.boundary.to_string(),
        &b.w.to_string(),
        &b.h.to_string(),
        &b.rho.to_string(),
        &b.identity_holds.to_string(),
        &b.chain_holds.map(|v| v.to_string()).unwrap_or_default(),
        &b.edge_bound_holds.map(|v| v.to_string()).unwrap_or_default(),
        &b.cycle_rank_bound_holds.map(|v| v.to_string()).unwrap_or_default(),
        &b.edge_bound_tight.to_string(),
        &b.is_square.to_string(),
        ],
    )?;
    Ok(Output {
        status: if b.all_hold() { Status::Pass } else { Status::CheckFailed },
        json: serde_json::json!({ "shape": name, "report": b }),
        text,
        csv,
    })
}
