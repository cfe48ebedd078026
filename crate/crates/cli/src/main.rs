//! Command-line front end: simulation, pseudo-observations, MCMC fitting,
//! prediction, log-predictive scoring, and density export.
//!
//! Exit codes: 0 success, 1 usage error, 2 data validation error,
//! 3 internal invariant violation.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rgpu_copula::data::{
    pseudo_observations, read_raw, read_sample, write_raw, write_sample, MixtureSimConfig,
};
use rgpu_copula::draws::{family_from_model, model_name, read_draws, write_draws, FitMeta};
use rgpu_copula::error::Error;
use rgpu_copula::evaluate::{density_grid, lps, lps_parametric, predictive_sample, LpsReport};
use rgpu_copula::parametric::{fit_mle, tau_to_param, ParametricCopula, ParametricFamily};
use rgpu_copula::rng::{task_rng, STREAM_PREDICT, STREAM_SIMULATE};
use rgpu_copula::sampler::{run_chain, SamplerConfig, ThetaPrior};

#[derive(Parser)]
#[command(
    name = "rgpu-copula",
    version,
    about = "Random partition-of-unity copulas: simulate, fit by MCMC, and score"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate copula data from a parametric family or the two-component mixture
    Simulate(SimulateArgs),
    /// Rank-transform raw two-column data into pseudo-observations
    Pseudo(PseudoArgs),
    /// Fit an RGPU copula model by MCMC and persist the posterior draws
    Fit(FitArgs),
    /// Log predictive scores of fitted draws and parametric baselines on a test set
    Lps(LpsArgs),
    /// Sample from the posterior predictive of a draws file
    Predict(PredictArgs),
    /// Export the posterior-mean density on a grid as CSV
    Density(DensityArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Data generator: frank|gumbel|clayton|joe|gaussian|mixture
    #[arg(long)]
    family: String,
    /// Kendall tau in (0,1); converted to the family parameter
    #[arg(long)]
    tau: Option<f64>,
    /// Family parameter, as an alternative to --tau
    #[arg(long)]
    param: Option<f64>,
    /// Rotate the copula by 180 degrees (swaps the dependent tail)
    #[arg(long)]
    rotated: bool,
    /// Number of rows to simulate
    #[arg(long)]
    n: usize,
    /// Master seed; all randomness is derived from it
    #[arg(long)]
    seed: u64,
    /// Output CSV path (header u,v)
    #[arg(long)]
    out: PathBuf,
    /// Mixture weight of the Clayton component
    #[arg(long, default_value_t = 0.5)]
    omega: f64,
    /// Clayton parameter of the mixture's first component
    #[arg(long, default_value_t = 6.0)]
    gamma: f64,
    /// Correlation of the mixture's Gaussian component
    #[arg(long, default_value_t = 0.6)]
    rho: f64,
    /// Margin means of the Clayton component
    #[arg(long, default_value_t = 0.0)]
    mu11: f64,
    #[arg(long, default_value_t = 0.0)]
    mu12: f64,
    /// Margin means of the Gaussian component
    #[arg(long, default_value_t = 0.0)]
    mu21: f64,
    #[arg(long, default_value_t = 2.0)]
    mu22: f64,
    /// Margin standard deviations of the Clayton component
    #[arg(long, default_value_t = 1.0)]
    sigma11: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma12: f64,
    /// Margin standard deviations of the Gaussian component
    #[arg(long, default_value_t = 1.0)]
    sigma21: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma22: f64,
    /// Companion CSV of the raw (pre-transform) mixture data
    #[arg(long)]
    raw_out: Option<PathBuf>,
}

#[derive(Args)]
struct PseudoArgs {
    /// Raw two-column CSV (any header; finite values)
    #[arg(long)]
    input: PathBuf,
    /// Output pseudo-observation CSV (header u,v)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Training copula sample (CSV with header u,v)
    #[arg(long)]
    data: PathBuf,
    /// Model: negbinc (tail-dependent) or bernsteincbp (Bernstein)
    #[arg(long)]
    model: String,
    /// Fit the rotated model (lower-tail dependence)
    #[arg(long)]
    rotated: bool,
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long)]
    seed: u64,
    /// Dirichlet process concentration M
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    /// Smoothing-parameter prior: gamma:<shape>,<rate> or geometric:<decay>
    #[arg(long)]
    theta_prior: Option<String>,
    /// Output draws file
    #[arg(long)]
    out: PathBuf,
    /// Optional run-log path (the log also prints to stdout)
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct LpsArgs {
    /// Test copula sample (CSV with header u,v)
    #[arg(long)]
    test: PathBuf,
    /// Draws file(s) from `fit`; repeatable
    #[arg(long)]
    draws: Vec<PathBuf>,
    /// Parametric baseline(s): e.g. clayton=2.0, rotgumbel, gaussian;
    /// without `=param` the parameter is fitted by MLE on --train
    #[arg(long)]
    parametric: Vec<String>,
    /// Training sample for MLE-fitted baselines
    #[arg(long)]
    train: Option<PathBuf>,
    /// Optional CSV report path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Draws file from `fit`
    #[arg(long)]
    draws: PathBuf,
    /// Number of predictive points
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path (header u,v)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DensityArgs {
    /// Draws file from `fit`
    #[arg(long)]
    draws: PathBuf,
    /// Grid resolution per axis
    #[arg(long)]
    resolution: usize,
    /// Output CSV path (resolution rows of resolution values)
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        let code = match e {
            Error::Validation(_) => 1,
            Error::Data(_) | Error::Io(_) => 2,
            Error::Internal(_) => 3,
        };
        std::process::exit(code);
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Pseudo(args) => cmd_pseudo(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Lps(args) => cmd_lps(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Density(args) => cmd_density(args),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    if args.n == 0 {
        return Err(Error::validation("--n must be >= 1"));
    }
    let mut rng = task_rng(args.seed, STREAM_SIMULATE);
    if args.family.eq_ignore_ascii_case("mixture") {
        let config = MixtureSimConfig {
            weight: args.omega,
            clayton_param: args.gamma,
            gaussian_corr: args.rho,
            mean_clayton: (args.mu11, args.mu12),
            mean_gaussian: (args.mu21, args.mu22),
            sd_clayton: (args.sigma11, args.sigma12),
            sd_gaussian: (args.sigma21, args.sigma22),
        };
        let (raw, cop) = rgpu_copula::data::simulate_mixture(&config, args.n, &mut rng)?;
        write_sample(&args.out, &cop)?;
        if let Some(raw_path) = &args.raw_out {
            write_raw(raw_path, &raw)?;
        }
        println!(
            "simulated {} mixture rows (omega={}, gamma={}, rho={}) -> {}",
            args.n,
            args.omega,
            args.gamma,
            args.rho,
            args.out.display()
        );
    } else {
        let family: ParametricFamily = args.family.parse()?;
        let param = match (args.param, args.tau) {
            (Some(p), None) => p,
            (None, Some(tau)) => tau_to_param(family, tau)?,
            (Some(_), Some(_)) => {
                return Err(Error::validation("give either --tau or --param, not both"))
            }
            (None, None) => {
                return Err(Error::validation("a parametric family needs --tau or --param"))
            }
        };
        let copula = ParametricCopula::new(family, param, args.rotated)?;
        let sample = copula.sample(args.n, &mut rng)?;
        write_sample(&args.out, &sample)?;
        println!(
            "simulated {} rows from {}{} (param {:.6}) -> {}",
            args.n,
            if args.rotated { "rotated " } else { "" },
            family,
            param,
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_pseudo(args: PseudoArgs) -> Result<(), Error> {
    let raw = read_raw(&args.input)?;
    let cop = pseudo_observations(&raw)?;
    write_sample(&args.out, &cop)?;
    println!("ranked {} rows -> {}", cop.len(), args.out.display());
    Ok(())
}

fn parse_theta_prior(spec: &str) -> Result<ThetaPrior, Error> {
    let (name, params) = spec
        .split_once(':')
        .ok_or_else(|| Error::validation(format!("theta prior `{spec}` must be name:params")))?;
    let parse = |s: &str| -> Result<f64, Error> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::validation(format!("bad theta-prior parameter `{s}`")))
    };
    match name.to_ascii_lowercase().as_str() {
        "gamma" => {
            let (a, b) = params.split_once(',').ok_or_else(|| {
                Error::validation("gamma prior needs two parameters: gamma:<shape>,<rate>")
            })?;
            Ok(ThetaPrior::Gamma { shape: parse(a)?, rate: parse(b)? })
        }
        "geometric" => Ok(ThetaPrior::GeometricTail { decay: parse(params)? }),
        other => Err(Error::validation(format!(
            "unknown theta prior `{other}`; expected gamma or geometric"
        ))),
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), Error> {
    let family = family_from_model(&args.model)?;
    let data = read_sample(&args.data)?;
    let mut config = SamplerConfig::new(family, args.seed);
    config.rotated = args.rotated;
    config.iterations = args.iterations;
    config.burn_in = args.burnin;
    config.thinning = args.thin;
    config.concentration = args.concentration;
    if let Some(spec) = &args.theta_prior {
        config.theta_prior = parse_theta_prior(spec)?;
    }
    config.validate()?;

    let (draws, log) = run_chain(&data, &config)?;

    let meta = FitMeta {
        family,
        rotated: config.rotated,
        concentration: config.concentration,
        seed: config.seed,
    };
    let prior_str = match config.theta_prior {
        ThetaPrior::Gamma { shape, rate } => format!("gamma:{shape},{rate}"),
        ThetaPrior::GeometricTail { decay } => format!("geometric:{decay}"),
    };
    let extras = vec![
        ("iterations".to_string(), config.iterations.to_string()),
        ("burnin".to_string(), config.burn_in.to_string()),
        ("thin".to_string(), config.thinning.to_string()),
        ("theta_prior".to_string(), prior_str.clone()),
        ("n_train".to_string(), data.len().to_string()),
    ];
    write_draws(&args.out, &meta, &extras, &draws)?;

    let mut report = String::new();
    report.push_str(&format!(
        "model={}{} data={} n={}\n",
        model_name(family),
        if config.rotated { " rotated" } else { "" },
        args.data.display(),
        data.len()
    ));
    report.push_str(&format!(
        "iterations={} burnin={} thin={} seed={} concentration={} theta_prior={}\n",
        config.iterations, config.burn_in, config.thinning, config.seed, config.concentration,
        prior_str
    ));
    report.push_str(&format!(
        "draws={} atom_acceptance={:.4} theta_acceptance={:.4}\n",
        log.draws_emitted, log.atom_acceptance, log.theta_acceptance
    ));
    report.push_str(&format!(
        "mean_occupied={:.2} final_occupied={} max_components={} wall_seconds={:.2}\n",
        log.mean_occupied,
        log.final_occupied,
        log.max_components,
        log.wall.as_secs_f64()
    ));
    print!("{report}");
    if let Some(log_path) = &args.log {
        std::fs::write(log_path, &report)?;
    }
    println!("draws -> {}", args.out.display());
    Ok(())
}

/// Parse a baseline spec like `clayton=2.0`, `rotgumbel`, or `gaussian`.
/// Without an explicit parameter the baseline is fitted by MLE on `train`.
fn baseline_report(
    spec: &str,
    train: Option<&rgpu_copula::data::CopulaSample>,
    test: &rgpu_copula::data::CopulaSample,
) -> Result<LpsReport, Error> {
    let (name, param) = match spec.split_once('=') {
        Some((n, p)) => {
            let param = p
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("bad parameter in baseline `{spec}`")))?;
            (n.trim(), Some(param))
        }
        None => (spec.trim(), None),
    };
    let lowered = name.to_ascii_lowercase();
    let (rotated, family_name) = match lowered.strip_prefix("rot") {
        Some(rest) => (true, rest.to_string()),
        None => (false, lowered),
    };
    let family: ParametricFamily = family_name.parse()?;
    let copula = match param {
        Some(p) => ParametricCopula::new(family, p, rotated)?,
        None => {
            let train = train.ok_or_else(|| {
                Error::validation(format!(
                    "baseline `{spec}` has no parameter; supply --train for MLE fitting"
                ))
            })?;
            fit_mle(family, rotated, train)?
        }
    };
    let label = format!(
        "{}{}={:.6}",
        if rotated { "rot" } else { "" },
        family,
        copula.param
    );
    lps_parametric(label, &copula, test)
}

fn cmd_lps(args: LpsArgs) -> Result<(), Error> {
    if args.draws.is_empty() && args.parametric.is_empty() {
        return Err(Error::validation("nothing to score: give --draws and/or --parametric"));
    }
    let test = read_sample(&args.test)?;
    let train = args.train.as_deref().map(read_sample).transpose()?;

    let mut reports = Vec::new();
    for path in &args.draws {
        let (meta, draws) = read_draws(path)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let label = format!(
            "{}:{}{}",
            stem,
            if meta.rotated { "rot-" } else { "" },
            meta.model_name()
        );
        reports.push(lps(label, &draws, meta.family, meta.rotated, &test)?);
    }
    for spec in &args.parametric {
        reports.push(baseline_report(spec, train.as_ref(), &test)?);
    }

    // Larger is better; report best first.
    reports.sort_by(|a, b| b.per_point.partial_cmp(&a.per_point).unwrap());
    let header = "label,per_point_lps,total_lps,n_test,n_draws";
    println!("{header}");
    let mut csv = String::from(header);
    csv.push('\n');
    for r in &reports {
        let line = format!(
            "{},{:.6},{:.6},{},{}",
            r.label, r.per_point, r.total, r.n_test, r.n_draws
        );
        println!("{line}");
        csv.push_str(&line);
        csv.push('\n');
    }
    if let Some(out) = &args.out {
        std::fs::write(out, csv)?;
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Error> {
    let (meta, draws) = read_draws(&args.draws)?;
    let mut rng = task_rng(args.seed, STREAM_PREDICT);
    let sample = predictive_sample(&draws, meta.family, meta.rotated, args.m, &mut rng)?;
    write_sample(&args.out, &sample)?;
    println!(
        "{} predictive rows from {} draws -> {}",
        args.m,
        draws.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_density(args: DensityArgs) -> Result<(), Error> {
    let (meta, draws) = read_draws(&args.draws)?;
    let grid = density_grid(&draws, meta.family, meta.rotated, args.resolution)?;
    write_grid(&args.out, &grid, args.resolution)?;
    println!(
        "{0}x{0} posterior-mean density grid -> {1}",
        args.resolution,
        args.out.display()
    );
    Ok(())
}

fn write_grid(path: &Path, grid: &[f64], resolution: usize) -> Result<(), Error> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    for row in grid.chunks(resolution) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
