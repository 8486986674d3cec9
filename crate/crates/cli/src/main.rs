//! Experiment runner: norm estimates, functional profiles, inequality sweeps
//! and balancing experiments, emitted as deterministic JSON or CSV artifacts.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 when any checked
//! inequality came out `violated`.

mod artifact;
mod grid;
mod selftest;

use artifact::{emit, num, resolve_format, Envelope, Format};
use clap::{Args, Parser, Subcommand};
use multinorm::balancing::{
    estimate_beta_r, estimate_kappa_r, run_rotation_experiment, BalancingEstimate,
    RotationMode, SignRule,
};
use multinorm::bounds::{run_suite, BoundReport, GridConfig, SuiteReport, Verdict, CHECKER_NAMES};
use multinorm::functionals::{profile, FunctionalProfile};
use multinorm::norms::{estimate_norm, estimate_norm_isotropic, estimate_norm_moments};
use multinorm::sampling::WeightVector;
use multinorm::{BodySpec, BodyTuple, Estimate, RngStream};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "multinorm",
    version,
    about = "Monte Carlo laboratory for expected norms of weighted sums of random \
             vectors uniform on convex bodies"
)]
struct Cli {
    /// Master seed; every random stream derives from it deterministically.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results never depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate E ‖Σ t_j x_j‖_K for x_j uniform on a body C
    EstimateNorm(EstimateNormArgs),
    /// Profile the geometric functionals of bodies (M, width, median, k, d)
    Functionals(FunctionalsArgs),
    /// Check every configured inequality over a grid and verdict each instance
    CheckBounds(CheckBoundsArgs),
    /// Randomized vector-balancing quantiles and rotation experiments
    Balancing(BalancingArgs),
    /// Functional profiles plus the full checker suite, written as one artifact set
    Sweep(SweepArgs),
    /// Run the built-in exact examples end to end
    Selftest,
}

#[derive(Args)]
struct EstimateNormArgs {
    /// Sampling body descriptor, e.g. lp:inf:16:vol1
    #[arg(long)]
    body_c: String,
    /// Gauge body descriptor (defaults to the sampling body)
    #[arg(long)]
    body_k: Option<String>,
    /// Weights: comma-separated reals, or pattern:<name>:<s>
    #[arg(long)]
    t: String,
    #[arg(long, default_value_t = 100_000)]
    n_samples: u64,
    /// Moment order: reports (E ‖·‖^q)^(1/q)
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Estimate through the isotropic factorization instead of directly
    #[arg(long)]
    isotropic_route: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct FunctionalsArgs {
    /// Comma-separated body descriptors
    #[arg(long, value_delimiter = ',', required = true)]
    bodies: Vec<String>,
    #[arg(long, default_value_t = 100_000)]
    n_samples: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct CheckBoundsArgs {
    /// `all` or a comma list of checker names
    #[arg(long, default_value = "all")]
    suite: String,
    /// Grid file (key=value text or JSON); omitted keys keep the defaults
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Override the grid's sample count
    #[arg(long)]
    n_samples: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct BalancingArgs {
    /// Body the points are drawn from
    #[arg(long)]
    body_c: String,
    /// Body whose gauge measures the signed sums (defaults to the point body)
    #[arg(long)]
    body_k: Option<String>,
    /// Points per tuple
    #[arg(long)]
    s: usize,
    /// Quantile level: the reported radius covers a (1−δ) fraction of tuples
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Random tuples behind the quantile
    #[arg(long, default_value_t = 512)]
    tuples: usize,
    /// Sign rule: brute | greedy | random:<m>
    #[arg(long, default_value = "greedy")]
    method: String,
    /// Also estimate the random-signs quantile on the same tuples
    #[arg(long)]
    kappa: bool,
    /// Sign draws per tuple for --kappa
    #[arg(long, default_value_t = 64)]
    sign_draws: usize,
    /// Run the random-rotation experiment instead: lower | upper
    #[arg(long)]
    rotation_experiment: Option<String>,
    /// Requested sign-set size for the rotation experiment
    #[arg(long, default_value_t = 4096)]
    set_size: usize,
    /// Rotations averaged by the rotation experiment
    #[arg(long, default_value_t = 32)]
    rotations: usize,
    /// Samples per norm estimate inside the rotation experiment
    #[arg(long, default_value_t = 20_000)]
    n_samples: u64,
    /// Weights for the rotation experiment (default: flat over --s terms)
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid file (key=value text or JSON); omitted keys keep the defaults
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Override the grid's sample count
    #[arg(long)]
    n_samples: Option<u64>,
    /// `all` or a comma list of checker names
    #[arg(long, default_value = "all")]
    suite: String,
    /// Directory receiving bounds.{json,csv} and functionals.{json,csv}
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            std::process::exit(1);
        }
    }
    let seed = cli.seed.unwrap_or(42);
    let code = match run(cli.command, seed) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}

fn run(command: Command, seed: u64) -> Result<i32, String> {
    match command {
        Command::EstimateNorm(args) => cmd_estimate_norm(args, seed),
        Command::Functionals(args) => cmd_functionals(args, seed),
        Command::CheckBounds(args) => cmd_check_bounds(args, seed),
        Command::Balancing(args) => cmd_balancing(args, seed),
        Command::Sweep(args) => cmd_sweep(args, seed),
        Command::Selftest => Ok(selftest::run()),
    }
}

fn parse_body(desc: &str) -> Result<BodySpec, String> {
    BodySpec::parse(desc).map_err(|e| e.to_string())
}

fn parse_body_pair(c: &str, k: Option<&str>) -> Result<(BodySpec, BodySpec), String> {
    let body_c = parse_body(c)?;
    let body_k = match k {
        Some(desc) => parse_body(desc)?,
        None => body_c.clone(),
    };
    Ok((body_c, body_k))
}

// ---------------------------------------------------------------- estimate-norm

#[derive(Serialize)]
struct NormConfig {
    body_c: String,
    body_k: String,
    t_label: String,
    t: Vec<f64>,
    q: f64,
    n_samples: u64,
    seed: u64,
    isotropic_route: bool,
}

#[derive(Serialize)]
struct NormResult {
    value: f64,
    stderr: f64,
    ci95: (f64, f64),
    route: &'static str,
    n_samples: u64,
    seed: u64,
}

fn cmd_estimate_norm(args: EstimateNormArgs, seed: u64) -> Result<i32, String> {
    let (body_c, body_k) = parse_body_pair(&args.body_c, args.body_k.as_deref())?;
    let root = RngStream::new(seed);
    let (t, t_label) =
        WeightVector::parse(&args.t, root.child_from_key("t")).map_err(|e| e.to_string())?;
    let tuple = BodyTuple::Common(body_c.clone());
    let stream = root.child_from_key("estimate-norm");

    let (est, route): (Estimate, &'static str) = if args.isotropic_route {
        if args.q != 1.0 {
            return Err("the isotropic route estimates the mean; it does not take --q".into());
        }
        (
            estimate_norm_isotropic(&tuple, &t, &body_k, args.n_samples, stream)
                .map_err(|e| e.to_string())?,
            "isotropic",
        )
    } else if args.q == 1.0 {
        (
            estimate_norm(&tuple, &t, &body_k, args.n_samples, stream)
                .map_err(|e| e.to_string())?,
            "direct",
        )
    } else {
        let mut all = estimate_norm_moments(&tuple, &t, &body_k, &[args.q], args.n_samples, stream)
            .map_err(|e| e.to_string())?;
        (all.pop().expect("one exponent in, one estimate out"), "direct")
    };

    let config = NormConfig {
        body_c: body_c.descriptor(),
        body_k: body_k.descriptor(),
        t_label,
        t: t.entries().to_vec(),
        q: args.q,
        n_samples: args.n_samples,
        seed,
        isotropic_route: args.isotropic_route,
    };
    let results = NormResult {
        value: est.value,
        stderr: est.stderr,
        ci95: est.ci95,
        route,
        n_samples: est.n_samples,
        seed,
    };
    let envelope = Envelope::new("estimate-norm", config, results);
    let text = match resolve_format(args.format, args.out.as_deref()) {
        Format::Json => envelope.to_json(),
        Format::Csv => envelope.to_csv(
            &["value", "stderr", "ci_lo", "ci_hi", "route", "n_samples", "seed"],
            &[vec![
                num(est.value),
                num(est.stderr),
                num(est.ci95.0),
                num(est.ci95.1),
                route.to_string(),
                est.n_samples.to_string(),
                seed.to_string(),
            ]],
        ),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- functionals

#[derive(Serialize)]
struct FunctionalsConfig {
    bodies: Vec<String>,
    n_samples: u64,
    seed: u64,
}

fn profile_stream(seed: u64, descriptor: &str) -> RngStream {
    RngStream::new(seed).child_from_key(&format!("functionals/{descriptor}"))
}

fn functional_profiles(
    bodies: &[BodySpec],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<FunctionalProfile>, String> {
    bodies
        .iter()
        .map(|body| {
            profile(body, n_samples, profile_stream(seed, &body.descriptor()))
                .map_err(|e| format!("{}: {e}", body.descriptor()))
        })
        .collect()
}

const FUNCTIONALS_HEADER: [&str; 14] = [
    "body", "n", "M", "M_stderr", "w", "b", "R", "vrad", "m", "k", "d", "d_censored", "N", "seed",
];

fn functionals_rows(profiles: &[FunctionalProfile], seed: u64) -> Vec<Vec<String>> {
    profiles
        .iter()
        .map(|p| {
            vec![
                p.body.clone(),
                p.dim.to_string(),
                num(p.m.value),
                num(p.m.stderr),
                num(p.mean_width.value),
                num(p.polar_radius),
                num(p.radius),
                num(p.vrad),
                num(p.gaussian_median.value),
                num(p.k.value),
                num(p.d.value),
                p.d.censored.to_string(),
                p.n_samples.to_string(),
                seed.to_string(),
            ]
        })
        .collect()
}

fn cmd_functionals(args: FunctionalsArgs, seed: u64) -> Result<i32, String> {
    let bodies: Vec<BodySpec> = args
        .bodies
        .iter()
        .map(|desc| parse_body(desc))
        .collect::<Result<_, _>>()?;
    let profiles = functional_profiles(&bodies, args.n_samples, seed)?;
    let config = FunctionalsConfig {
        bodies: bodies.iter().map(|b| b.descriptor()).collect(),
        n_samples: args.n_samples,
        seed,
    };
    let envelope = Envelope::new("functionals", config, &profiles);
    let text = match resolve_format(args.format, args.out.as_deref()) {
        Format::Json => envelope.to_json(),
        Format::Csv => envelope.to_csv(&FUNCTIONALS_HEADER, &functionals_rows(&profiles, seed)),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- check-bounds

#[derive(Serialize)]
struct BoundsConfig {
    suite: Vec<String>,
    grid: GridConfig,
}

/// Resolve `all` or a comma list against the known checker names.
fn parse_suite(spec: &str) -> Result<Vec<String>, String> {
    if spec.trim() == "all" {
        return Ok(CHECKER_NAMES.iter().map(|s| s.to_string()).collect());
    }
    let names: Vec<String> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err("empty checker list".into());
    }
    for name in &names {
        if !CHECKER_NAMES.contains(&name.as_str()) {
            return Err(format!(
                "unknown checker `{name}` (known: {})",
                CHECKER_NAMES.join(", ")
            ));
        }
    }
    Ok(names)
}

fn load_grid(
    path: Option<&Path>,
    seed_override: Option<u64>,
    samples_override: Option<u64>,
) -> Result<GridConfig, String> {
    let mut cfg = match path {
        Some(p) => grid::load(p)?,
        None => GridConfig::default(),
    };
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    if let Some(n) = samples_override {
        cfg.n_samples = n;
    }
    Ok(cfg)
}

const BOUNDS_HEADER: [&str; 13] = [
    "theorem_id",
    "body_C",
    "body_K",
    "n",
    "s",
    "t_pattern",
    "lhs",
    "lhs_stderr",
    "rhs",
    "implied_constant",
    "verdict",
    "margin_sigmas",
    "seed",
];

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Inconclusive => "inconclusive",
        Verdict::Violated => "violated",
    }
}

fn bounds_rows(reports: &[BoundReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            vec![
                r.theorem_id.clone(),
                r.body_c.clone(),
                r.body_k.clone(),
                r.n.to_string(),
                r.s.to_string(),
                r.t_pattern.clone(),
                num(r.lhs.value),
                num(r.lhs.stderr),
                num(r.rhs.value),
                num(r.implied_constant),
                verdict_name(r.verdict).to_string(),
                num(r.margin_sigmas),
                r.seed.to_string(),
            ]
        })
        .collect()
}

fn cmd_check_bounds(args: CheckBoundsArgs, seed: u64) -> Result<i32, String> {
    let suite = parse_suite(&args.suite)?;
    let cfg = load_grid(args.grid.as_deref(), Some(seed), args.n_samples)?;
    let names: Vec<&str> = suite.iter().map(String::as_str).collect();
    let report = run_suite(&cfg, &names).map_err(|e| e.to_string())?;
    let violated = report.violated;
    let config = BoundsConfig { suite, grid: cfg };
    let envelope = Envelope::new("check-bounds", config, &report);
    let text = match resolve_format(args.format, args.out.as_deref()) {
        Format::Json => envelope.to_json(),
        Format::Csv => envelope.to_csv(&BOUNDS_HEADER, &bounds_rows(&report.reports)),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(if violated > 0 { 2 } else { 0 })
}

// ---------------------------------------------------------------- balancing

#[derive(Serialize)]
struct QuantileConfig {
    body_c: String,
    body_k: String,
    s: usize,
    delta: f64,
    n_tuples: usize,
    method: String,
    kappa: bool,
    sign_draws: usize,
    seed: u64,
}

#[derive(Serialize)]
struct QuantileResults {
    beta: BalancingEstimate,
    kappa: Option<BalancingEstimate>,
}

#[derive(Serialize)]
struct RotationConfig {
    body_c: String,
    body_k: String,
    t_label: String,
    t: Vec<f64>,
    mode: String,
    set_size: usize,
    rotations: usize,
    n_samples: u64,
    n_tuples: usize,
    seed: u64,
}

fn cmd_balancing(args: BalancingArgs, seed: u64) -> Result<i32, String> {
    let (body_c, body_k) = parse_body_pair(&args.body_c, args.body_k.as_deref())?;
    let root = RngStream::new(seed);

    if let Some(mode_spec) = &args.rotation_experiment {
        let mode = RotationMode::parse(mode_spec).map_err(|e| e.to_string())?;
        let t_spec = args
            .t
            .clone()
            .unwrap_or_else(|| format!("pattern:flat:{}", args.s));
        let (t, t_label) = WeightVector::parse(&t_spec, root.child_from_key("t"))
            .map_err(|e| e.to_string())?;
        let report = run_rotation_experiment(
            &body_c,
            &body_k,
            &t,
            mode,
            args.set_size,
            args.rotations,
            args.n_samples,
            args.tuples,
            root.child_from_key("rotation"),
        )
        .map_err(|e| e.to_string())?;
        let config = RotationConfig {
            body_c: body_c.descriptor(),
            body_k: body_k.descriptor(),
            t_label,
            t: t.entries().to_vec(),
            mode: mode.name().to_string(),
            set_size: args.set_size,
            rotations: args.rotations,
            n_samples: args.n_samples,
            n_tuples: args.tuples,
            seed,
        };
        let envelope = Envelope::new("balancing", config, &report);
        let text = match resolve_format(args.format, args.out.as_deref()) {
            Format::Json => envelope.to_json(),
            Format::Csv => {
                let rows: Vec<Vec<String>> = report
                    .outcomes
                    .iter()
                    .enumerate()
                    .map(|(i, o)| {
                        vec![
                            i.to_string(),
                            num(o.norm.value),
                            num(o.norm.stderr),
                            num(o.ratio),
                            num(o.bad_fraction),
                        ]
                    })
                    .collect();
                envelope.to_csv(
                    &["rotation", "norm", "norm_stderr", "ratio", "bad_fraction"],
                    &rows,
                )
            }
        };
        emit(args.out.as_deref(), &text)?;
        return Ok(0);
    }

    let rule = SignRule::parse(&args.method).map_err(|e| e.to_string())?;
    // One shared stream: the sign-quantile run must see the same tuples as
    // the best-signs run for the pointwise kappa >= beta guarantee.
    let stream = root.child_from_key("balancing");
    let beta = estimate_beta_r(&body_c, &body_k, args.s, args.delta, args.tuples, rule, stream)
        .map_err(|e| e.to_string())?;
    let kappa = if args.kappa {
        Some(
            estimate_kappa_r(
                &body_c,
                &body_k,
                args.s,
                args.delta,
                args.tuples,
                args.sign_draws,
                stream,
            )
            .map_err(|e| e.to_string())?,
        )
    } else {
        None
    };

    let config = QuantileConfig {
        body_c: body_c.descriptor(),
        body_k: body_k.descriptor(),
        s: args.s,
        delta: args.delta,
        n_tuples: args.tuples,
        method: rule.name(),
        kappa: args.kappa,
        sign_draws: args.sign_draws,
        seed,
    };
    let results = QuantileResults { beta, kappa };
    let envelope = Envelope::new("balancing", config, &results);
    let text = match resolve_format(args.format, args.out.as_deref()) {
        Format::Json => envelope.to_json(),
        Format::Csv => {
            // Sorted per-tuple values; ranks pair rows, not tuples.
            let beta_vals = &envelope.results.beta.sorted_values;
            let kappa_vals = envelope.results.kappa.as_ref().map(|k| &k.sorted_values);
            let rows: Vec<Vec<String>> = beta_vals
                .iter()
                .enumerate()
                .map(|(i, &b)| {
                    let k = kappa_vals.map_or(String::new(), |vals| num(vals[i]));
                    vec![i.to_string(), num(b), k]
                })
                .collect();
            envelope.to_csv(&["rank", "beta", "kappa"], &rows)
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- sweep

fn cmd_sweep(args: SweepArgs, seed: u64) -> Result<i32, String> {
    let suite = parse_suite(&args.suite)?;
    let cfg = load_grid(args.grid.as_deref(), Some(seed), args.n_samples)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| format!("cannot create {}: {e}", args.out_dir.display()))?;

    let mut bodies = Vec::new();
    for &family in &cfg.bodies {
        for &n in &cfg.n_list {
            bodies.push(cfg.body_at(family, n).map_err(|e| e.to_string())?);
        }
    }
    let profiles = functional_profiles(&bodies, cfg.n_samples, cfg.seed)?;
    let functionals_config = FunctionalsConfig {
        bodies: bodies.iter().map(|b| b.descriptor()).collect(),
        n_samples: cfg.n_samples,
        seed: cfg.seed,
    };
    let functionals_env = Envelope::new("functionals", functionals_config, &profiles);
    artifact::write_atomic(&args.out_dir.join("functionals.json"), &functionals_env.to_json())?;
    artifact::write_atomic(
        &args.out_dir.join("functionals.csv"),
        &functionals_env.to_csv(&FUNCTIONALS_HEADER, &functionals_rows(&profiles, cfg.seed)),
    )?;

    let names: Vec<&str> = suite.iter().map(String::as_str).collect();
    let report: SuiteReport = run_suite(&cfg, &names).map_err(|e| e.to_string())?;
    let violated = report.violated;
    let bounds_config = BoundsConfig { suite, grid: cfg };
    let bounds_env = Envelope::new("check-bounds", bounds_config, &report);
    artifact::write_atomic(&args.out_dir.join("bounds.json"), &bounds_env.to_json())?;
    artifact::write_atomic(
        &args.out_dir.join("bounds.csv"),
        &bounds_env.to_csv(&BOUNDS_HEADER, &bounds_rows(&report.reports)),
    )?;

    eprintln!(
        "sweep: {} profiles, {} reports ({} holds, {} inconclusive, {} violated) -> {}",
        profiles.len(),
        report.reports.len(),
        report.holds,
        report.inconclusive,
        violated,
        args.out_dir.display()
    );
    Ok(if violated > 0 { 2 } else { 0 })
}
