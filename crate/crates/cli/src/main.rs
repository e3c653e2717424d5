use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gammalab::curvature::curvature_global;
use gammalab::io::{load_triple, save_triple};
use gammalab::spaces::{self, SpaceSpec};
use gammalab::{MarkovTriple, ScalarField, SpectralCache, TripleOptions};
use gammalab_cli::config::{Alpha, CheckName, CheckParams, ExperimentConfig, Format};
use gammalab_cli::fields::sigmoid;
use gammalab_cli::output::{fmt_num, Num};
use gammalab_cli::runner::{run, RunSettings};
use gammalab_cli::{worker_pool, CliError, WORKERS_ENV};

/// Γ-calculus laboratory: curvature, heat flow and Bobkov-type inequalities on finite Markov triples.
#[derive(Parser)]
#[command(name = "gammalab", version, after_help = worker_help())]
struct Cli {
    /// Experiment config; runs it when no subcommand is given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for summaries and tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Multiplier on the tolerance of reported-only criteria.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn worker_help() -> String {
    format!("Environment:\n  {WORKERS_ENV}  worker threads (default: one per core)")
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    #[value(name = "two_point")]
    TwoPoint,
    #[value(name = "ou_chain")]
    OuChain,
    #[value(name = "cycle")]
    Cycle,
    #[value(name = "complete")]
    Complete,
    #[value(name = "hypercube")]
    Hypercube,
}

#[derive(clap::Args)]
struct SpaceFile {
    path: PathBuf,
    /// Rescale a measure that does not sum to 1.
    #[arg(long)]
    normalize: bool,
}

impl SpaceFile {
    fn load(&self) -> Result<MarkovTriple, CliError> {
        Ok(load_triple(&self.path, TripleOptions { normalize_measure: self.normalize })?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a model space and save it.
    Build {
        #[arg(value_enum)]
        model: Model,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "R")]
        half_width: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Load a space file and check every invariant.
    Validate(SpaceFile),
    /// Print the Bakry-Emery constant K* of a space.
    Curvature {
        #[command(flatten)]
        space: SpaceFile,
        /// Also print K(x) for every state.
        #[arg(long)]
        per_state: bool,
    },
    /// Print H_t f on a time grid.
    Evolve {
        #[command(flatten)]
        space: SpaceFile,
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Comma-separated values of f, one per state.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["sigmoid", "indicator"])]
        values: Option<Vec<f64>>,
        /// Logistic f(x) = 1/(1 + exp(-s(x - c))) given as s,c.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "indicator")]
        sigmoid: Option<Vec<f64>>,
        /// Indicator of the listed states.
        #[arg(long, value_delimiter = ',')]
        indicator: Option<Vec<usize>>,
    },
    /// Run one check with its defaults, overridable by flags.
    Check {
        #[arg(value_enum)]
        name: CheckName,
        /// Space file; not needed by gauss-oracle and two-point-grid.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
        /// Numbers or "1/K".
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<String>>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long = "K")]
        k: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        /// Interval union such as "[-1,1] u [2,inf]"; repeatable.
        #[arg(long)]
        intervals: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        thresholds: Option<Vec<f64>>,
        #[arg(long)]
        assert: bool,
    },
    /// Merge the summaries of earlier runs into one table.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Run the experiment config given by --config.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    let pool = worker_pool()?;
    let command = cli.command.as_ref().unwrap_or(&Command::Run);
    match command {
        Command::Build { model, rho, n, half_width, d, output } => build(*model, *rho, *n, *half_width, *d, output),
        Command::Validate(space) => validate(space),
        Command::Curvature { space, per_state } => pool.install(|| curvature(space, *per_state)),
        Command::Evolve { space, t, values, sigmoid, indicator } => {
            evolve(&cli, space, t, values.as_deref(), sigmoid.as_deref(), indicator.as_deref())
        }
        Command::Check {
            name,
            space,
            normalize,
            t,
            alpha,
            epsilon,
            k,
            horizon,
            tolerance,
            samples,
            grid,
            intervals,
            thresholds,
            assert,
        } => {
            let params = CheckParams {
                t: t.clone(),
                alpha: alpha.as_ref().map(|v| {
                    v.iter().map(|a| a.trim().parse::<f64>().map_or_else(|_| Alpha::Symbol(a.clone()), Alpha::Value)).collect()
                }),
                epsilon: *epsilon,
                k: *k,
                tolerance: *tolerance,
                samples: *samples,
                grid: *grid,
                horizon: *horizon,
                intervals: (!intervals.is_empty()).then(|| intervals.clone()),
                sets: None,
                thresholds: thresholds.clone(),
                asserted: assert.then_some(true),
            };
            let config = ExperimentConfig {
                space: space.as_ref().map(|p| SpaceSpec::File { path: p.clone(), normalize: *normalize }),
                checks: BTreeMap::from([(*name, params)]),
                ..Default::default()
            };
            pool.install(|| experiment(&cli, config))
        }
        Command::Report { dirs } => report(&cli, dirs),
        Command::Run => {
            let Some(path) = &cli.config else {
                return Err(CliError::Config("no subcommand given and no --config to run (see --help)".into()));
            };
            let config = ExperimentConfig::load(path)?;
            pool.install(|| experiment(&cli, config))
        }
    }
}

fn experiment(cli: &Cli, config: ExperimentConfig) -> Result<u8, CliError> {
    let settings = RunSettings {
        seed: cli.seed.or(config.seed).unwrap_or(0),
        tolerance_scale: cli.tolerance_scale.unwrap_or(1.0),
    };
    let format = cli.format.or(config.format).unwrap_or_default();
    let out_dir = cli.out.clone().or_else(|| config.out.clone());
    let output = run(&config, &settings)?;
    if let Some(dir) = &out_dir {
        output.write(dir, format)?;
    }
    print!("{}", output.digest());
    Ok(if output.passed() { 0 } else { 1 })
}

fn required<T>(value: Option<T>, flag: &str, model: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("{model} needs --{flag}")))
}

fn build(
    model: Model,
    rho: Option<f64>,
    n: Option<usize>,
    half_width: Option<f64>,
    d: Option<usize>,
    output: &Path,
) -> Result<u8, CliError> {
    let spec = match model {
        Model::TwoPoint => SpaceSpec::TwoPoint { rho: rho.unwrap_or(1.0) },
        Model::OuChain => SpaceSpec::OuChain { n: required(n, "n", "ou_chain")?, half_width: required(half_width, "R", "ou_chain")? },
        Model::Cycle => SpaceSpec::Cycle { n: required(n, "n", "cycle")? },
        Model::Complete => SpaceSpec::Complete { n: required(n, "n", "complete")? },
        Model::Hypercube => SpaceSpec::Hypercube { dim: required(d, "d", "hypercube")?, rho: rho.unwrap_or(1.0) },
    };
    let triple = spec.build()?;
    save_triple(&triple, output)?;
    println!("wrote {}: {} states, {} edges", output.display(), triple.n(), triple.edge_count());
    Ok(0)
}

fn validate(space: &SpaceFile) -> Result<u8, CliError> {
    match load_triple(&space.path, TripleOptions { normalize_measure: space.normalize }) {
        Ok(t) => {
            let model = t.meta().map_or("unlabeled", |m| m.model.as_str());
            println!("ok: {} states, {} edges, model {model}", t.n(), t.edge_count());
            Ok(0)
        }
        Err(e @ gammalab::Error::InvalidTriple { .. }) => {
            println!("invalid: {e}");
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

fn curvature(space: &SpaceFile, per_state: bool) -> Result<u8, CliError> {
    let triple = space.load()?;
    let report = curvature_global(&triple)?;
    println!("{}", fmt_num(report.global.as_f64()));
    if per_state {
        for s in &report.states {
            println!("{} {}", s.state, fmt_num(s.value.as_f64()));
        }
    }
    Ok(0)
}

fn evolve(
    cli: &Cli,
    space: &SpaceFile,
    times: &[f64],
    values: Option<&[f64]>,
    slope_center: Option<&[f64]>,
    indicator: Option<&[usize]>,
) -> Result<u8, CliError> {
    let triple = space.load()?;
    let coords = spaces::coordinates(&triple);
    let f = match (values, slope_center, indicator) {
        (Some(v), _, _) => ScalarField::new(v.to_vec())?,
        (_, Some(&[s, c]), _) => sigmoid(&coords, s, c),
        (_, Some(sc), _) => return Err(CliError::Config(format!("--sigmoid takes s,c; got {} values", sc.len()))),
        (_, _, Some(states)) => ScalarField::indicator(triple.n(), states)?,
        _ => return Err(CliError::Config("evolve needs one of --values, --sigmoid, --indicator".into())),
    };
    if f.len() != triple.n() {
        return Err(CliError::Config(format!("f has {} values, space has {} states", f.len(), triple.n())));
    }
    let cache = SpectralCache::build(&triple)?;
    let mut rows = Vec::with_capacity(times.len() * triple.n());
    for &t in times {
        let h = cache.heat(&f, t)?;
        rows.extend((0..triple.n()).map(|x| (x, coords[x], t, h[x])));
    }
    let format = cli.format.unwrap_or_default();
    let mut buf = Vec::new();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["state", "x", "time", "value"]).map_err(std::io::Error::from)?;
            for (x, c, t, v) in &rows {
                w.write_record([x.to_string(), fmt_num(*c), fmt_num(*t), fmt_num(*v)]).map_err(std::io::Error::from)?;
            }
            w.flush()?;
        }
        Format::JsonLines => {
            #[derive(serde::Serialize)]
            struct EvolveRow {
                state: usize,
                x: Num,
                time: Num,
                value: Num,
            }
            for &(state, c, t, v) in &rows {
                serde_json::to_writer(&mut buf, &EvolveRow { state, x: Num(c), time: Num(t), value: Num(v) })
                    .map_err(std::io::Error::from)?;
                buf.push(b'\n');
            }
        }
    }
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("evolve.{}", format.extension())), &buf)?;
        }
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(0)
}

/// One line per criterion of every run summary found in `dirs`.
fn report(cli: &Cli, dirs: &[PathBuf]) -> Result<u8, CliError> {
    use serde_json::Value;

    #[derive(serde::Serialize)]
    struct ReportRow {
        run: String,
        seed: Value,
        check: Value,
        status: Value,
        criterion: Value,
        asserted: Value,
        worst_margin: Value,
        tolerance: Value,
        pass: Value,
    }

    let mut rows = Vec::new();
    let mut all_pass = true;
    for dir in dirs {
        let path = dir.join("summary.json");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let summary: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        all_pass &= summary["pass"].as_bool().unwrap_or(false);
        for check in summary["checks"].as_array().into_iter().flatten() {
            let criteria: Vec<&Value> = check["criteria"].as_array().into_iter().flatten().collect();
            // Skipped checks have no criteria but still get a line.
            let listed = if criteria.is_empty() { vec![&Value::Null] } else { criteria };
            for c in listed {
                rows.push(ReportRow {
                    run: dir.display().to_string(),
                    seed: summary["seed"].clone(),
                    check: check["check"].clone(),
                    status: check["status"].clone(),
                    criterion: c["criterion"].clone(),
                    asserted: c["asserted"].clone(),
                    worst_margin: c["worst_margin"].clone(),
                    tolerance: c["tolerance"].clone(),
                    pass: c["pass"].clone(),
                });
            }
        }
    }
    let cell = |v: &Value| match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        v => v.to_string(),
    };
    let format = cli.format.unwrap_or_default();
    let mut buf = Vec::new();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["run", "seed", "check", "status", "criterion", "asserted", "worst_margin", "tolerance", "pass"])
                .map_err(std::io::Error::from)?;
            for r in &rows {
                let record = [&r.seed, &r.check, &r.status, &r.criterion, &r.asserted, &r.worst_margin, &r.tolerance, &r.pass];
                w.write_record(std::iter::once(r.run.clone()).chain(record.into_iter().map(cell)))
                    .map_err(std::io::Error::from)?;
            }
            w.flush()?;
        }
        Format::JsonLines => {
            for r in &rows {
                serde_json::to_writer(&mut buf, r).map_err(std::io::Error::from)?;
                buf.push(b'\n');
            }
        }
    }
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("report.{}", format.extension())), &buf)?;
        }
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(if all_pass { 0 } else { 1 })
}
