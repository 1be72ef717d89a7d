use std::fs;
use std::io::{self, Read, Write};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use cmpplab_core::distributions::{mixed_poisson_table, MixingLaw, MixingSpec};
use cmpplab_core::experiment::{demo_config, execute, persist, validate_config, ExperimentConfig};
use cmpplab_core::Error;

/// Exit status when every selected suite accepts.
const EXIT_ACCEPT: u8 = 0;
/// Exit status on operational failure.
const EXIT_ERROR: u8 = 1;
/// Exit status when at least one suite rejects.
const EXIT_REJECT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cmpplab",
    version,
    about = "Compound mixed Poisson process laboratory"
)]
struct Cli {
    /// Worker threads for simulation and statistics.
    #[arg(long, global = true, env = "CMPPLAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// Config file, or `-` for standard input.
    #[arg(long = "config", value_name = "PATH|-")]
    config: Option<String>,

    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,

    /// Override the family-wise level.
    #[arg(long)]
    alpha: Option<f64>,

    /// Override the output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,

    /// Config path (if `--config` is absent) followed by `key=value`
    /// overrides; dotted keys reach nested fields.
    #[arg(value_name = "CONFIG|KEY=VALUE")]
    rest: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment; exit 0 if all suites accept, 2 if any rejects.
    Run(ConfigArgs),
    /// Check a config and list every violation.
    Validate(ConfigArgs),
    /// Print a built-in demo config.
    Demo {
        /// watanabe | cmpp-gamma | cmpp-discrete | renewal-counterexample | claims-unit-reduction
        name: String,
    },
    /// Print the mixed Poisson pmf as CSV.
    Pmf {
        /// Mixing law: JSON record or shorthand such as `gamma(2,1)`,
        /// `degenerate(2)`, `discrete(1:0.5,3:0.5)`.
        #[arg(long)]
        mixing: String,
        /// Time t >= 0.
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        /// Largest count to tabulate.
        #[arg(long, default_value_t = 10)]
        n_max: u64,
    },
}

fn read_source(source: &str) -> Result<String> {
    if source == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .context("reading config from standard input")?;
        Ok(text)
    } else {
        fs::read_to_string(source).with_context(|| format!("reading config `{source}`"))
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut source = args.config.clone();
    let mut overrides = Vec::new();
    for item in &args.rest {
        match item.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None if source.is_none() => source = Some(item.clone()),
            None => bail!("unexpected argument `{item}`; overrides take the form key=value"),
        }
    }
    let source = source.ok_or_else(|| anyhow!("no config given (pass a path or `-`)"))?;
    if let Some(seed) = args.seed {
        overrides.push(("master_seed".into(), seed.to_string()));
    }
    if let Some(paths) = args.paths {
        overrides.push(("n_paths".into(), paths.to_string()));
    }
    if let Some(alpha) = args.alpha {
        overrides.push(("alpha".into(), alpha.to_string()));
    }
    if let Some(out) = &args.out {
        overrides.push(("output.dir".into(), serde_json::to_string(out)?));
    }
    let text = read_source(&source)?;
    ExperimentConfig::from_json_with_overrides(&text, &overrides)
        .with_context(|| format!("parsing config `{source}`"))
}

fn report_violations(violations: &[String]) {
    eprintln!("error: invalid config; first violation: {}", violations[0]);
    for v in &violations[1..] {
        eprintln!("  also: {v}");
    }
}

fn cmd_run(args: &ConfigArgs) -> Result<u8> {
    let config = load_config(args)?;
    let violations = validate_config(&config);
    if !violations.is_empty() {
        report_violations(&violations);
        return Ok(EXIT_ERROR);
    }
    let result = match execute(&config) {
        Ok(r) => r,
        Err(Error::InvalidConfig(v)) => {
            report_violations(&v);
            return Ok(EXIT_ERROR);
        }
        Err(e) => return Err(e.into()),
    };
    let manifest = persist(&result, config.output.dir.as_ref())?;
    let mut out = io::stdout().lock();
    for o in &result.outputs {
        let verdict = if o.accept { "accept" } else { "reject" };
        writeln!(out, "{:<18} {verdict}", o.suite.name())?;
    }
    writeln!(out, "manifest: {}", manifest.display())?;
    Ok(if result.accept() {
        EXIT_ACCEPT
    } else {
        EXIT_REJECT
    })
}

fn cmd_validate(args: &ConfigArgs) -> Result<u8> {
    let config = load_config(args)?;
    let violations = validate_config(&config);
    if violations.is_empty() {
        println!("ok");
        Ok(EXIT_ACCEPT)
    } else {
        report_violations(&violations);
        for v in &violations {
            println!("{v}");
        }
        Ok(EXIT_ERROR)
    }
}

fn parse_numbers(body: &str) -> Result<Vec<f64>> {
    body.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("`{s}` is not a number"))
        })
        .collect()
}

/// Parses a mixing law from JSON or the `name(args)` shorthand.
fn parse_mixing(text: &str) -> Result<MixingSpec> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).context("parsing mixing JSON");
    }
    let (name, body) = text
        .strip_suffix(')')
        .and_then(|s| s.split_once('('))
        .ok_or_else(|| anyhow!("mixing spec `{text}` is neither JSON nor name(args)"))?;
    match name.trim().to_ascii_lowercase().as_str() {
        "degenerate" => match parse_numbers(body)?.as_slice() {
            [value] => Ok(MixingSpec::Degenerate { value: *value }),
            _ => bail!("degenerate takes one argument"),
        },
        "gamma" => match parse_numbers(body)?.as_slice() {
            [shape, rate] => Ok(MixingSpec::Gamma {
                shape: *shape,
                rate: *rate,
            }),
            _ => bail!("gamma takes two arguments: shape, rate"),
        },
        "discrete" => {
            let mut atoms = Vec::new();
            let mut weights = Vec::new();
            for item in body.split(',') {
                let (a, w) = item
                    .split_once(':')
                    .ok_or_else(|| anyhow!("discrete entries take the form atom:weight"))?;
                atoms.push(a.trim().parse::<f64>().context("discrete atom")?);
                weights.push(w.trim().parse::<f64>().context("discrete weight")?);
            }
            Ok(MixingSpec::Discrete { atoms, weights })
        }
        other => bail!("unknown mixing family `{other}` (degenerate, gamma, discrete)"),
    }
}

fn cmd_pmf(mixing: &str, t: f64, n_max: u64) -> Result<u8> {
    let law = MixingLaw::new(parse_mixing(mixing)?)?;
    let (probs, tail) = mixed_poisson_table(&law, t, n_max)?;
    let mut out = io::stdout().lock();
    writeln!(out, "n,pmf")?;
    for (n, p) in probs.iter().enumerate() {
        writeln!(out, "{n},{p:?}")?;
    }
    writeln!(out, "# tail_mass_bound={tail:?}")?;
    Ok(EXIT_ACCEPT)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Demo { name } => {
            let config = demo_config(name)?;
            println!("{}", config.to_json_pretty()?);
            Ok(EXIT_ACCEPT)
        }
        Command::Pmf { mixing, t, n_max } => cmd_pmf(mixing, *t, *n_max),
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1 like any other error; 2 is reserved for rejection.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_ACCEPT
            });
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let status = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(anyhow!("building thread pool: {e}")),
    };
    match status {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
