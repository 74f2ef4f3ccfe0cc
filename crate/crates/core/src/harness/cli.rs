//! Command-line front end. The `dcd` binary only forwards to [`run`].
//!
//! Exit codes: 0 on success, 1 when verification (or a run) fails, 2 for
//! configuration and input errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::Config;
use crate::harness::induced::{induced_auto, Induced};
use crate::harness::sweep::{plot_files, run_sweep, to_csv, ExperimentResult, SweepOptions};
use crate::harness::synth::{gen_data, sample_corpus, SyntheticKind};
use crate::harness::verify::verify;
use crate::models::{
    parse_corpus, write_corpus, ARCopulaModel, DiffusionMarginalModel, ModelKind, TableSource,
};
use crate::noising::ScheduleFamily;
use crate::sampler::{sample_with_rng, Mode, SamplerConfig};
use crate::table::{Alphabet, JointTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dcd",
    version,
    about = "Exact discrete copula diffusion on small tables"
)]
pub struct Cli {
    /// Seed for data generation and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic data table (and optionally a corpus drawn from it).
    GenData(GenDataArgs),
    /// Fit a model file from a corpus or wrap an exact table.
    Fit(FitArgs),
    /// Draw samples with one sampler mode.
    Sample(SampleArgs),
    /// Score one sampler configuration against the data table.
    Eval(EvalArgs),
    /// Score every mode, step count and beta of the sweep section.
    Sweep(SweepArgs),
    /// Run self-verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub kind: Option<SyntheticKind>,
    #[arg(long = "positions", short = 'n')]
    pub num_positions: Option<usize>,
    #[arg(long = "categories", short = 'c')]
    pub num_categories: Option<usize>,
    #[arg(long)]
    pub strength: Option<f64>,
    /// Also write this many sampled sequences to corpus.txt.
    #[arg(long, default_value_t = 0)]
    pub corpus_size: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Corpus file, one sequence per line.
    #[arg(long, conflicts_with = "exact")]
    pub corpus: Option<PathBuf>,
    /// Table file to wrap as an exact model.
    #[arg(long)]
    pub exact: Option<PathBuf>,
    #[arg(long = "positions", short = 'n')]
    pub num_positions: Option<usize>,
    #[arg(long = "categories", short = 'c')]
    pub num_categories: Option<usize>,
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "model.json")]
    pub output: String,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Data table; generated from the data section when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Diffusion model file; built from the models section when absent.
    #[arg(long)]
    pub diffusion_model: Option<PathBuf>,
    /// Copula model file; built from the models section when absent.
    #[arg(long)]
    pub copula_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long = "steps", short = 'T')]
    pub steps: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long = "steps", short = 'T')]
    pub steps: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub models: ModelArgs,
    /// Record wall-clock time per cell (makes the CSV non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite id or `all`.
    #[arg(default_value = "all")]
    pub suite: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidAlphabet(_)
        | Error::TooLarge { .. }
        | Error::InvalidSchedule(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

struct Context {
    config: Config,
    seed: u64,
    out_dir: PathBuf,
}

impl Context {
    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        fs::write(&path, body)?;
        Ok(path)
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let ctx = Context {
        config,
        seed,
        out_dir: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::GenData(args) => gen_data_cmd(&ctx, args),
        Command::Fit(args) => fit_cmd(&ctx, args),
        Command::Sample(args) => sample_cmd(&ctx, args),
        Command::Eval(args) => eval_cmd(&ctx, args),
        Command::Sweep(args) => sweep_cmd(&ctx, args),
        Command::Verify(args) => verify_cmd(args),
    }
}

fn gen_data_cmd(ctx: &Context, args: &GenDataArgs) -> Result<i32> {
    let mut section = ctx.config.data.clone();
    if let Some(k) = args.kind {
        section.kind = k;
    }
    section.num_positions = args.num_positions.unwrap_or(section.num_positions);
    section.num_categories = args.num_categories.unwrap_or(section.num_categories);
    section.correlation_strength = args.strength.unwrap_or(section.correlation_strength);
    let table = gen_data(&section.spec(ctx.seed))?;
    let path = ctx.write("data.json", &table.to_json()?)?;
    println!("wrote {}", path.display());
    if args.corpus_size > 0 {
        let corpus = sample_corpus(&table, args.corpus_size, ctx.seed);
        let path = ctx.write("corpus.txt", &write_corpus(&corpus))?;
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn fit_cmd(ctx: &Context, args: &FitArgs) -> Result<i32> {
    let source = match (&args.corpus, &args.exact) {
        (_, Some(table)) => TableSource::exact(JointTable::from_json(&read(table)?)?),
        (Some(corpus), None) => {
            let n = args.num_positions.unwrap_or(ctx.config.data.num_positions);
            let c = args
                .num_categories
                .unwrap_or(ctx.config.data.num_categories);
            let alphabet = Alphabet::new(n, c)?;
            let sequences = parse_corpus(&read(corpus)?, alphabet)?;
            TableSource::fit(
                alphabet,
                &sequences,
                args.smoothing.unwrap_or(ctx.config.models.smoothing),
            )?
        }
        (None, None) => return Err(Error::Config("fit needs --corpus or --exact".into())),
    };
    let path = ctx.write(&args.output, &source.to_json()?)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

struct Loaded {
    data: JointTable,
    diffusion: TableSource,
    copula: TableSource,
}

fn build_source(
    ctx: &Context,
    kind: ModelKind,
    data: &JointTable,
    salt: u64,
) -> Result<TableSource> {
    match kind {
        ModelKind::Exact => Ok(TableSource::exact(data.clone())),
        ModelKind::Counts => {
            let corpus = sample_corpus(
                data,
                ctx.config.models.corpus_size,
                ctx.seed.wrapping_add(salt),
            );
            TableSource::fit(data.alphabet(), &corpus, ctx.config.models.smoothing)
        }
    }
}

fn load_models(ctx: &Context, args: &ModelArgs) -> Result<Loaded> {
    let data = match &args.data {
        Some(path) => JointTable::from_json(&read(path)?)?,
        None => gen_data(&ctx.config.data.spec(ctx.seed))?,
    };
    let load = |path: &Option<PathBuf>, kind: ModelKind, salt: u64| -> Result<TableSource> {
        match path {
            Some(p) => TableSource::from_json(&read(p)?),
            None => build_source(ctx, kind, &data, salt),
        }
    };
    let diffusion = load(&args.diffusion_model, ctx.config.models.diffusion, 1)?;
    let copula = load(&args.copula_model, ctx.config.models.copula, 2)?;
    if diffusion.alphabet() != data.alphabet() || copula.alphabet() != data.alphabet() {
        return Err(Error::Config(
            "model files do not match the data alphabet".into(),
        ));
    }
    Ok(Loaded {
        data,
        diffusion,
        copula,
    })
}

fn sampler_config(
    ctx: &Context,
    mode: Option<Mode>,
    steps: Option<usize>,
    beta: Option<f64>,
) -> Result<SamplerConfig> {
    let mut spec = ctx.config.schedule.spec();
    spec.steps = steps.unwrap_or(spec.steps);
    let schedule = spec.build()?;
    let cfg = SamplerConfig::new(
        mode.unwrap_or(ctx.config.sampler.mode),
        schedule,
        beta.unwrap_or(ctx.config.sampler.beta),
        ctx.seed,
    )
    .with_chunk_size(spec.chunk_size);
    cfg.validate()?;
    Ok(cfg)
}

fn sample_cmd(ctx: &Context, args: &SampleArgs) -> Result<i32> {
    let loaded = load_models(ctx, &args.models)?;
    let cfg = sampler_config(ctx, args.mode, args.steps, args.beta)?;
    let dm = DiffusionMarginalModel::new(loaded.diffusion, cfg.schedule.clone());
    let copula = ARCopulaModel::new(loaded.copula);
    let count = args.count.unwrap_or(ctx.config.sampler.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut corpus = Vec::with_capacity(count);
    let mut first_trace = None;
    for _ in 0..count {
        let (x0, trace) = sample_with_rng(&dm, &copula, &cfg, &mut rng)?;
        corpus.push(x0.tokens);
        first_trace.get_or_insert(trace);
    }
    let path = ctx.write("samples.txt", &write_corpus(&corpus))?;
    println!("wrote {}", path.display());
    if let Some(trace) = first_trace {
        let path = ctx.write("trace.json", &trace.to_json()?)?;
        println!("wrote {}", path.display());
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    result: ExperimentResult,
    method: &'static str,
    samples: Option<usize>,
}

fn eval_cmd(ctx: &Context, args: &EvalArgs) -> Result<i32> {
    let loaded = load_models(ctx, &args.models)?;
    let cfg = sampler_config(ctx, args.mode, args.steps, args.beta)?;
    let options = sweep_options(ctx, cfg.schedule.family(), false);
    let result = run_sweep(
        &loaded.data,
        &loaded.diffusion,
        &loaded.copula,
        &[cfg.mode],
        &[cfg.steps()],
        &[cfg.beta],
        &options,
    )?
    .remove(0);
    let dm = DiffusionMarginalModel::new(loaded.diffusion, cfg.schedule.clone());
    let induced = induced_auto(
        &dm,
        &ARCopulaModel::new(loaded.copula),
        &cfg,
        options.mc_samples,
    )?;
    let (method, samples) = match induced {
        Induced::Exact(_) => ("exact", None),
        Induced::MonteCarlo(e) => ("monte_carlo", Some(e.samples)),
    };
    let body = serde_json::to_string_pretty(&EvalReport {
        result,
        method,
        samples,
    })?;
    println!("{body}");
    ctx.write("eval.json", &body)?;
    Ok(EXIT_OK)
}

fn sweep_options(ctx: &Context, family: ScheduleFamily, timing: bool) -> SweepOptions {
    SweepOptions {
        family,
        epsilon: ctx.config.schedule.epsilon,
        chunk_size: ctx.config.schedule.chunk_size,
        seed: ctx.seed,
        timing: timing || ctx.config.sweep.timing,
        mc_samples: ctx.config.sweep.mc_samples,
    }
}

fn sweep_cmd(ctx: &Context, args: &SweepArgs) -> Result<i32> {
    let loaded = load_models(ctx, &args.models)?;
    let section = &ctx.config.sweep;
    let options = sweep_options(ctx, ctx.config.schedule.family, args.timing);
    let rows = run_sweep(
        &loaded.data,
        &loaded.diffusion,
        &loaded.copula,
        &section.modes,
        &section.steps,
        &section.beta,
        &options,
    )?;
    let path = ctx.write("sweep.csv", &to_csv(&rows))?;
    println!("wrote {}", path.display());
    for (name, body) in plot_files(&rows) {
        ctx.write(&name, &body)?;
    }
    Ok(EXIT_OK)
}

fn verify_cmd(args: &VerifyArgs) -> Result<i32> {
    let reports = verify(&args.suite)?;
    let mut ok = true;
    for r in &reports {
        println!("{}", r.line());
        for f in &r.failures {
            println!("  {f}");
        }
        ok &= r.passed();
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}
