use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use regioncert::certificates::{any_certified, certify_all, render_table, reports_to_json, CertifyOptions};
use regioncert::format::{network_to_string, read_network, ActivationFile};
use regioncert::geometry::{
    find_path, grid_scan, output_space_scan, summary_json, summary_text, write_pgm, write_svg, GridSpec,
    PathOutcome, Slice,
};
use regioncert::linalg::SplitMode;
use regioncert::synthesis::{
    fuzz_campaign, gen_certified, gen_counterexample, lemma_campaign, CounterexampleKind, FuzzConfig, LemmaKind,
    SynthSpec,
};
use regioncert::{Network, TheoremId};

/// Certify, scan and synthesize neural networks with connected decision regions.
///
/// Exit status: 0 on success (or a certified network, a found path, a clean
/// campaign), 1 on a negative finding, 2 on usage or input errors.
#[derive(Parser)]
#[command(name = "regioncert", version)]
struct Cli {
    /// Worker threads for scans and campaigns.
    #[arg(long, global = true, env = "REGIONCERT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every theorem checker on a network file.
    Check(CheckArgs),
    /// Rasterize the decision regions over a box and count components.
    Scan(ScanArgs),
    /// Find an in-region grid path between two points.
    Path(PathArgs),
    /// Generate a certified network or a counterexample.
    Synth(SynthArgs),
    /// Cross-check certificates against the grid oracle on random networks.
    Fuzz(FuzzArgs),
    /// Run a property campaign for one constructive rectangle result.
    Lemma(LemmaArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Greedy,
    Exhaustive,
}

#[derive(Args)]
struct CheckArgs {
    network: PathBuf,
    /// Relative pivot tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = SplitArg::Greedy)]
    split: SplitArg,
    /// Candidate limit for the exhaustive split search.
    #[arg(long, default_value_t = SplitMode::DEFAULT_BUDGET)]
    budget: usize,
    /// Apply the split clauses of the bounded-activation theorems to the
    /// output layer.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    include_output_layer: bool,
    /// Slack for the theorem inequalities.
    #[arg(long, default_value_t = 0.0)]
    slack: f64,
    /// Require only the basis columns of split layers to be non-negative.
    #[arg(long)]
    basis_nonneg_only: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Scan window per axis as `lo:hi`, repeated or comma-separated.
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    bounds: Vec<String>,
    /// Cells per axis: one value for every axis, or one per axis.
    #[arg(long, value_delimiter = ',', default_value = "256")]
    res: Vec<usize>,
    /// 2-D slice for inputs of higher dimension: `origin:dir1:dir2`, each a
    /// comma-separated vector.
    #[arg(long, allow_hyphen_values = true)]
    slice: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageFormat {
    Pgm,
    Svg,
}

#[derive(Args)]
struct ScanArgs {
    network: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Region image path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Image format; inferred from the `--out` extension when omitted.
    #[arg(long, value_enum)]
    format: Option<ImageFormat>,
    /// Write the per-class summary as JSON to this file.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also estimate output-space component counts per class (heuristic).
    #[arg(long)]
    output_space: bool,
}

#[derive(Args)]
struct PathArgs {
    network: PathBuf,
    /// Start point in scan coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    from: Vec<f64>,
    /// End point in scan coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    to: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Layer widths `d,n_1,...,M`.
    #[arg(long, value_delimiter = ',', required_unless_present = "counterexample")]
    widths: Vec<usize>,
    /// Hidden activation: sigmoid, tanh, relu, leaky_relu, softplus or elu.
    #[arg(long, required_unless_present = "counterexample")]
    activation: Option<String>,
    /// Slope or scale of leaky_relu (default 0.1) and elu (default 1).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_theorem, required_unless_present = "counterexample")]
    theorem: Option<TheoremId>,
    /// Emit a hand-built disconnected network instead: relu-absolute or wide-xor.
    #[arg(long, value_parser = parse_counterexample, conflicts_with_all = ["widths", "activation", "theorem"])]
    counterexample: Option<CounterexampleKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Random valid rest columns instead of zeros.
    #[arg(long)]
    nonzero_rest: bool,
    /// Output network file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cells per axis of the oracle grid.
    #[arg(long, default_value_t = 256)]
    res: usize,
    /// Half-width of the scan box in units of the weight scale.
    #[arg(long, default_value_t = 4.0)]
    box_factor: f64,
    /// Write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long, value_parser = parse_lemma)]
    which: LemmaKind,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

fn parse_theorem(s: &str) -> Result<TheoremId, String> {
    TheoremId::from_name(s).ok_or_else(|| {
        let names: Vec<_> = TheoremId::ALL.iter().map(|t| t.name()).collect();
        format!("unknown theorem `{s}`, expected one of {}", names.join(", "))
    })
}

fn parse_counterexample(s: &str) -> Result<CounterexampleKind, String> {
    CounterexampleKind::from_name(s).ok_or_else(|| format!("unknown counterexample `{s}`, expected relu-absolute or wide-xor"))
}

fn parse_lemma(s: &str) -> Result<LemmaKind, String> {
    LemmaKind::from_name(s).ok_or_else(|| {
        let names: Vec<_> = LemmaKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown lemma `{s}`, expected one of {}", names.join(", "))
    })
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number `{t}`")))
        .collect()
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for b in &self.bounds {
            let (lo, hi) = b
                .split_once(':')
                .ok_or_else(|| anyhow!("--box entry `{b}` is not of the form lo:hi"))?;
            lower.push(lo.trim().parse::<f64>().with_context(|| format!("bad lower bound in `{b}`"))?);
            upper.push(hi.trim().parse::<f64>().with_context(|| format!("bad upper bound in `{b}`"))?);
        }
        let res = match self.res.as_slice() {
            [r] => vec![*r; lower.len()],
            rs => rs.to_vec(),
        };
        let spec = GridSpec::new(lower, upper, res)?;
        match &self.slice {
            None => Ok(spec),
            Some(s) => {
                let parts: Vec<&str> = s.split(':').collect();
                let [origin, d0, d1] = parts.as_slice() else {
                    bail!("--slice must be origin:dir1:dir2");
                };
                let slice = Slice {
                    origin: parse_vector(origin)?,
                    directions: [parse_vector(d0)?, parse_vector(d1)?],
                };
                Ok(spec.with_slice(slice)?)
            }
        }
    }
}

fn load(path: &Path) -> Result<Network<f64>> {
    read_network(path).with_context(|| format!("reading {}", path.display()))
}

fn check_dims(net: &Network<f64>, spec: &GridSpec) -> Result<()> {
    if net.input_dim() != spec.input_dim() {
        bail!(
            "network has input dimension {} but the scan box has {} axes{}",
            net.input_dim(),
            spec.dim(),
            if spec.slice().is_some() { " (through the slice)" } else { "" }
        );
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_check(a: &CheckArgs) -> Result<u8> {
    let net = load(&a.network)?;
    let opts = CertifyOptions {
        tol: a.tol,
        split_mode: match a.split {
            SplitArg::Greedy => SplitMode::Greedy,
            SplitArg::Exhaustive => SplitMode::Exhaustive { budget: a.budget },
        },
        include_output_layer: a.include_output_layer,
        slack: a.slack,
        basis_nonneg_only: a.basis_nonneg_only,
    };
    let reports = certify_all(&net, &opts);
    let text = match a.format {
        ReportFormat::Table => render_table(&reports),
        ReportFormat::Json => reports_to_json(&reports),
    };
    print!("{text}");
    if let Some(p) = &a.out {
        fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if any_certified(&reports) { 0 } else { 1 })
}

fn cmd_scan(a: &ScanArgs) -> Result<u8> {
    let net = load(&a.network)?;
    let spec = a.grid.spec()?;
    check_dims(&net, &spec)?;
    let map = grid_scan(&net, &spec)?;
    print!("{}", summary_text(&map));
    if a.output_space {
        for m in 0..net.classes() {
            let o = output_space_scan(&net, &spec, m)?;
            println!("output-space class {m}: {} component{}", o.components, if o.components == 1 { "" } else { "s" });
        }
    }
    if let Some(out) = &a.out {
        let format = a.format.unwrap_or_else(|| match out.extension().and_then(|e| e.to_str()) {
            Some("svg") => ImageFormat::Svg,
            _ => ImageFormat::Pgm,
        });
        let mut file = std::io::BufWriter::new(
            fs::File::create(out).with_context(|| format!("creating {}", out.display()))?,
        );
        match format {
            ImageFormat::Pgm => write_pgm(&map, &mut file)?,
            ImageFormat::Svg => write_svg(&map, &mut file)?,
        }
        file.flush()?;
    }
    if let Some(p) = &a.summary {
        fs::write(p, summary_json(&map)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(0)
}

fn cmd_path(a: &PathArgs) -> Result<u8> {
    let net = load(&a.network)?;
    let spec = a.grid.spec()?;
    check_dims(&net, &spec)?;
    for (name, p) in [("--from", &a.from), ("--to", &a.to)] {
        if p.len() != spec.dim() {
            bail!("{name} has {} coordinates, the scan box has {}", p.len(), spec.dim());
        }
    }
    let map = grid_scan(&net, &spec)?;
    match find_path(&map, &a.from, &a.to)? {
        PathOutcome::Found(p) => {
            let mut out = String::new();
            for w in &p.waypoints {
                let coords: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                out.push_str(&coords.join(" "));
                out.push('\n');
            }
            print!("{out}");
            Ok(0)
        }
        PathOutcome::Disconnected => {
            println!("disconnected");
            Ok(1)
        }
        PathOutcome::DifferentClasses => {
            println!("different classes");
            Ok(1)
        }
    }
}

fn cmd_synth(a: &SynthArgs) -> Result<u8> {
    let net = match a.counterexample {
        Some(kind) => gen_counterexample(kind, a.seed),
        None => {
            let name = a.activation.clone().expect("required by clap");
            let alpha = a.alpha.or(match name.as_str() {
                "leaky_relu" => Some(0.1),
                "elu" => Some(1.0),
                _ => None,
            });
            let activation = ActivationFile { name, alpha }.to_kind().map_err(|e| anyhow!(e))?;
            let spec = SynthSpec {
                widths: a.widths.clone(),
                activation,
                target_theorem: a.theorem.expect("required by clap"),
                seed: a.seed,
                weight_scale: a.scale,
                nonzero_rest: a.nonzero_rest,
            };
            gen_certified(&spec)?
        }
    };
    write_or_print(a.out.as_deref(), &network_to_string(&net))?;
    Ok(0)
}

fn cmd_fuzz(a: &FuzzArgs) -> Result<u8> {
    let config = FuzzConfig {
        resolution: a.res,
        box_factor: a.box_factor,
    };
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    if a.res < 2 {
        bail!("--res must be at least 2");
    }
    if !(a.box_factor.is_finite() && a.box_factor > 0.0) {
        bail!("--box-factor must be positive");
    }
    let report = fuzz_campaign(a.trials, a.seed, &config);
    println!("trials: {}", report.trials);
    println!("certified: {}", report.certified);
    println!("refuted: {}", report.refuted);
    println!("window-resolved: {}", report.window_resolved.len());
    println!("violations: {}", report.violations.len());
    for v in &report.violations {
        println!(
            "  trial {} ({}): components {:?}, touches boundary {:?}",
            v.trial, v.source, v.components, v.touches_boundary
        );
    }
    if let Some(p) = &a.out {
        fs::write(p, report.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if report.violations.is_empty() { 0 } else { 1 })
}

fn cmd_lemma(a: &LemmaArgs) -> Result<u8> {
    let report = lemma_campaign(a.which, a.trials, a.seed);
    match a.format {
        ReportFormat::Table => println!("{report}"),
        ReportFormat::Json => print!("{}", report.to_json()),
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Path(a) => cmd_path(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Fuzz(a) => cmd_fuzz(a),
        Command::Lemma(a) => cmd_lemma(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
