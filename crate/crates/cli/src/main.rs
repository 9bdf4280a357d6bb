use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use haarlab::densities::LimitLaw;
use haarlab::exec::{set_worker_cap, Execution};
use haarlab::rmt_sim::{figure_one, histogram, pooled_spectrum, trace_observables, EnsembleSpec, Histogram};
use haarlab::syntax::{parse_matrix_csv, parse_matrix_expr, parse_trace_polynomial, Constants};
use haarlab::verify::{run_suite, DEFAULT_SEED};
use haarlab::weingarten::{rational_to_f64, wg_exact, wg_leading};

const FIGURE_MIN_DIM: usize = 32;
/// Dimension from which figure1 asserts its KS thresholds.
const FIGURE_ASSESSED_DIM: usize = 256;
const FIGURE_KS_TOL: f64 = 0.05;

#[derive(Parser)]
#[command(name = "haarlab", version, about = "Exact Haar-unitary integrals, fluctuation predictions and Monte Carlo checks")]
struct Cli {
    /// JSON file with default values; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Weingarten values per cycle type.
    Wg(WgArgs),
    /// Exact expectation of a trace polynomial.
    Moment(MomentArgs),
    /// Spectra of U + U* and its symmetrization against their limit laws.
    Figure1(FigureArgs),
    /// Monte Carlo trace statistics or pooled spectra.
    Simulate(SimulateArgs),
    /// Runs a verification suite (`exact` or `mc`) and writes a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct WgArgs {
    #[arg(long = "n")]
    order: Option<usize>,
    #[arg(long = "N")]
    dim: Option<usize>,
    /// Write the table as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct MomentArgs {
    poly: Option<String>,
    #[arg(long = "N")]
    dim: Option<usize>,
    /// Also estimate by Monte Carlo with this many replicas.
    #[arg(long = "mc")]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Constant matrix as NAME=path to an exact CSV; repeatable.
    #[arg(long = "matrix")]
    matrices: Vec<String>,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(long = "N")]
    dim: Option<usize>,
    #[arg(long = "R")]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    outdir: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "N")]
    dim: Option<usize>,
    #[arg(long = "R")]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trace polynomial to sample; repeatable.
    #[arg(long = "observable")]
    observables: Vec<String>,
    /// Self-adjoint matrix expression whose pooled spectrum is histogrammed.
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long = "matrix")]
    matrices: Vec<String>,
    #[arg(long)]
    outdir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    suite: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    n: Option<usize>,
    #[serde(rename = "N")]
    dim: Option<usize>,
    #[serde(rename = "R")]
    replicas: Option<usize>,
    seed: Option<u64>,
    word: Option<String>,
    #[serde(default)]
    observables: Vec<String>,
    spectrum: Option<String>,
    bins: Option<usize>,
    #[serde(default)]
    matrices: BTreeMap<String, PathBuf>,
    outdir: Option<PathBuf>,
    suite: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<haarlab::Error> for Failure {
    fn from(e: haarlab::Error) -> Self {
        use haarlab::Error as E;
        match e {
            E::Parse { .. } | E::UnknownConstant(_) | E::InvalidInput(_) => Failure::Usage(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

type Out = Result<(), Failure>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Out {
    fs::write(path, contents).map_err(io_err(path))
}

fn required<T>(value: Option<T>, what: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::Usage(format!("missing {what}")))
}

fn positive(value: usize, what: &str) -> Result<usize, Failure> {
    if value == 0 {
        return Err(Failure::Usage(format!("{what} must be positive")));
    }
    Ok(value)
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn constants(dim: usize, flags: &[String], config: &BTreeMap<String, PathBuf>) -> Result<Constants, Failure> {
    let mut sources = config.clone();
    for spec in flags {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--matrix expects NAME=path, got `{spec}`")))?;
        sources.insert(name.to_string(), PathBuf::from(path));
    }
    let mut consts = Constants::new(dim);
    for (name, path) in &sources {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        consts.insert(name, parse_matrix_csv(&text, dim)?)?;
    }
    Ok(consts)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_wg(args: WgArgs, cfg: Config) -> Out {
    let n = required(args.order.or(cfg.n), "--n")?;
    let dim = positive(required(args.dim.or(cfg.dim), "--N")?, "--N")?;
    let table = wg_exact(n, dim)?;
    for (ct, v) in table.iter() {
        let leading = wg_leading(ct, dim).to_complex64().re;
        println!(
            "{ct}: {v}  leading {}  ratio {}",
            wg_leading(ct, dim),
            fmt_f(rational_to_f64(v) / leading)
        );
    }
    if let Some(path) = args.dump {
        write_file(&path, &table.to_csv())?;
    }
    Ok(())
}

fn cmd_moment(args: MomentArgs, cfg: Config) -> Out {
    let src = required(args.poly.or(cfg.word), "trace polynomial")?;
    let dim = positive(required(args.dim.or(cfg.dim), "--N")?, "--N")?;
    let poly = parse_trace_polynomial(&src)?;
    let consts = constants(dim, &args.matrices, &cfg.matrices)?;
    let exact = poly.expectation(&consts, Execution::default())?;
    let z = exact.to_complex64();
    println!("{exact}");
    println!("float {} {}", fmt_f(z.re), fmt_f(z.im));
    if let Some(replicas) = args.replicas.or(cfg.replicas) {
        let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
        let stats = trace_observables(&consts, &[(src, poly)], replicas, seed, Execution::default())?;
        let k = stats.cumulants(1)?;
        let (mean, se) = (k.get(&[0])?, k.std_error(&[0]).unwrap_or_default());
        println!(
            "mc {} {} se {} {} N={dim} R={replicas} seed={seed}",
            fmt_f(mean.re),
            fmt_f(mean.im),
            fmt_f(se.re),
            fmt_f(se.im)
        );
    }
    Ok(())
}

/// Bars for the histogram and a polyline for the density, in one SVG.
fn svg(title: &str, hist: &Histogram, law: &LimitLaw) -> String {
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let (a, b) = (hist.edges[0], hist.edges[hist.edges.len() - 1]);
    let hist_max = hist.density.iter().cloned().fold(0.0, f64::max);
    let ymax = 1.5 * hist_max.max(1e-12);
    let sx = |x: f64| pad + (x - a) / (b - a) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - y.min(ymax) / ymax * (h - 2.0 * pad);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#);
    for (k, d) in hist.density.iter().enumerate() {
        let (x0, x1) = (sx(hist.edges[k]), sx(hist.edges[k + 1]));
        let y = sy(*d);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#9ab" stroke="#567"/>"##,
            x1 - x0,
            h - pad - y
        );
    }
    let points: Vec<String> = (0..=400)
        .map(|k| {
            let x = a + (b - a) * k as f64 / 400.0;
            format!("{:.2},{:.2}", sx(x), sy(law.pdf(x)))
        })
        .collect();
    let _ = writeln!(out, r##"<polyline fill="none" stroke="#c33" stroke-width="2" points="{}"/>"##, points.join(" "));
    let _ = writeln!(out, r##"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="#000"/>"##, h - pad, w - pad);
    out.push_str("</svg>\n");
    out
}

fn outdir(path: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = required(path, "--outdir")?;
    if !dir.is_dir() {
        return Err(Failure::Io(format!("{}: output directory does not exist", dir.display())));
    }
    Ok(dir)
}

fn cmd_figure1(args: FigureArgs, cfg: Config) -> Out {
    let dim = required(args.dim.or(cfg.dim), "--N")?;
    if dim < FIGURE_MIN_DIM {
        return Err(Failure::Usage(format!("figure1 needs N >= {FIGURE_MIN_DIM}")));
    }
    let replicas = positive(required(args.replicas.or(cfg.replicas), "--R")?, "--R")?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let bins = positive(args.bins.or(cfg.bins).unwrap_or(60), "--bins")?;
    let dir = outdir(args.outdir.or(cfg.outdir))?;
    let fig = figure_one(dim, replicas, seed, Execution::default())?;
    let panels = [
        ("arcsine", "U + U*", LimitLaw::arcsine(), &fig.one_unitary, fig.ks_arcsine),
        ("kesten_mckay", "H + H^t", LimitLaw::kesten_mckay(), &fig.with_transpose, fig.ks_kesten_mckay),
    ];
    let assessed = dim >= FIGURE_ASSESSED_DIM;
    let mut summary = serde_json::Map::new();
    for (tag, label, law, samples, ks) in panels {
        let hist = histogram(samples, bins, law.support())?;
        write_file(&dir.join(format!("figure1_{tag}_hist.csv")), &hist.to_csv())?;
        write_file(&dir.join(format!("figure1_{tag}_density.csv")), &law.sampled_csv(401))?;
        let title = format!("{label}: N={dim}, R={replicas}, seed={seed}, KS={ks:.4}");
        write_file(&dir.join(format!("figure1_{tag}.svg")), &svg(&title, &hist, &law))?;
        summary.insert(
            tag.into(),
            json!({ "ensemble": label, "law": law.name(), "ks": ks, "samples": samples.len() }),
        );
        println!("{label} vs {}: KS {}", law.name(), fmt_f(ks));
    }
    let passed = fig.ks_arcsine < FIGURE_KS_TOL && fig.ks_kesten_mckay < FIGURE_KS_TOL;
    summary.insert("N".into(), json!(dim));
    summary.insert("R".into(), json!(replicas));
    summary.insert("seed".into(), json!(seed));
    summary.insert("bins".into(), json!(bins));
    summary.insert("tolerance".into(), json!(FIGURE_KS_TOL));
    summary.insert("assessed".into(), json!(assessed));
    summary.insert("passed".into(), if assessed { json!(passed) } else { json!(null) });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&dir.join("figure1_summary.json"), &(text + "\n"))?;
    if assessed && !passed {
        return Err(Failure::Domain(format!("KS above {FIGURE_KS_TOL}")));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, cfg: Config) -> Out {
    let dim = positive(required(args.dim.or(cfg.dim), "--N")?, "--N")?;
    let replicas = positive(required(args.replicas.or(cfg.replicas), "--R")?, "--R")?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let observables = if args.observables.is_empty() { cfg.observables } else { args.observables };
    let spectrum = args.spectrum.or(cfg.spectrum);
    if observables.is_empty() && spectrum.is_none() {
        return Err(Failure::Usage("simulate needs --observable or --spectrum".into()));
    }
    let dir = args.outdir.or(cfg.outdir).map(|d| outdir(Some(d))).transpose()?;
    let consts = constants(dim, &args.matrices, &cfg.matrices)?;
    let mut summary = serde_json::Map::new();
    summary.insert("N".into(), json!(dim));
    summary.insert("R".into(), json!(replicas));
    summary.insert("seed".into(), json!(seed));
    if !observables.is_empty() {
        let parsed = observables
            .iter()
            .map(|s| Ok((s.clone(), parse_trace_polynomial(s)?)))
            .collect::<Result<Vec<_>, haarlab::Error>>()?;
        let stats = trace_observables(&consts, &parsed, replicas, seed, Execution::default())?;
        let k = stats.cumulants(2)?;
        let mut rows = Vec::new();
        for (v, label) in stats.labels.iter().enumerate() {
            let (mean, se) = (k.get(&[v])?, k.std_error(&[v]).unwrap_or_default());
            let var = k.get(&[v, v])?;
            rows.push(json!({
                "observable": label,
                "mean": [fmt_f(mean.re), fmt_f(mean.im)],
                "mean_se": [fmt_f(se.re), fmt_f(se.im)],
                "k2": [fmt_f(var.re), fmt_f(var.im)],
            }));
        }
        summary.insert("observables".into(), json!(rows));
        if let Some(dir) = &dir {
            write_file(&dir.join("simulate_traces.csv"), &stats.to_csv())?;
        }
    }
    if let Some(src) = spectrum {
        let spec = EnsembleSpec::new(parse_matrix_expr(&src)?, consts);
        let eig = pooled_spectrum(&spec, replicas, seed, Execution::default())?;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = 1e-9 * (hi - lo).abs().max(1.0);
        let bins = positive(args.bins.or(cfg.bins).unwrap_or(60), "--bins")?;
        let hist = histogram(&eig, bins, (lo - pad, hi + pad))?;
        summary.insert(
            "spectrum".into(),
            json!({ "recipe": src, "eigenvalues": eig.len(), "min": fmt_f(lo), "max": fmt_f(hi), "bins": bins }),
        );
        if let Some(dir) = &dir {
            write_file(&dir.join("simulate_spectrum_hist.csv"), &hist.to_csv())?;
        }
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    if let Some(dir) = &dir {
        write_file(&dir.join("simulate_summary.json"), &format!("{text}\n"))?;
    }
    println!("{text}");
    Ok(())
}

fn cmd_verify(args: VerifyArgs, cfg: Config) -> Out {
    let suite = required(args.suite.or(cfg.suite), "suite name")?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let report = run_suite(&suite, seed)?;
    for c in &report.checks {
        eprintln!(
            "{} {}: observed {} (expected {}, {:.0} ms)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.expected,
            c.runtime_ms
        );
    }
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match args.out {
        Some(path) => write_file(&path, &text)?,
        None => print!("{text}"),
    }
    if !report.passed {
        return Err(Failure::Domain(format!("suite `{suite}` has failing checks")));
    }
    Ok(())
}

fn apply_thread_cap() -> Out {
    if let Ok(v) = std::env::var("HAARLAB_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Failure::Usage(format!("HAARLAB_THREADS must be a positive integer, got `{v}`")))?;
        set_worker_cap(threads);
    }
    Ok(())
}

fn run(cli: Cli) -> Out {
    apply_thread_cap()?;
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Wg(a) => cmd_wg(a, cfg),
        Command::Moment(a) => cmd_moment(a, cfg),
        Command::Figure1(a) => cmd_figure1(a, cfg),
        Command::Simulate(a) => cmd_simulate(a, cfg),
        Command::Verify(a) => cmd_verify(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Domain(m) | Failure::Io(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
