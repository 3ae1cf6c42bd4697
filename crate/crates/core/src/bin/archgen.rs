use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use archgen::export::{write_curve_to, write_fit_outputs, write_json, write_selection_outputs, CurveBundle};
use archgen::families::{Family, FamilyFit};
use archgen::io::{load_csv, write_csv, Dataset, Schema};
use archgen::kendall::{kendall_tau, DEFAULT_GRID, DEFAULT_NU0};
use archgen::pipeline::{run_pipeline, BandwidthChoice, Condition, Mode, PipelineError, PipelineOptions, PipelineResult};
use archgen::prediction::{compare_approaches, DependenceSource};
use archgen::rng::stream;
use archgen::selector::{select_copula, SelectionConfig, DEFAULT_XI};
use archgen::synth::{synth_generate, SynthConfig};

#[derive(Parser)]
#[command(name = "archgen", version, about = "Conditional Archimedean generator estimation for censored pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the Kendall curve, generator and tau; write curves and a JSON bundle.
    Fit(FitArgs),
    /// Print the estimated Kendall's tau.
    Tau(DataArgs),
    /// Rank copula families by pseudo p-value against the estimated curve.
    Select(SelectArgs),
    /// Draw pairs from a family or an estimated generator; compare prediction approaches.
    Simulate(SimulateArgs),
    /// Generate a synthetic censored dataset from a JSON configuration.
    Synth(SynthArgs),
    /// Write closed-form curves of a family.
    Curves(CurvesArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON column mapping; defaults to y1,y2,delta1,delta2 plus remaining columns as covariates.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, default_value = "param")]
    mode: Mode,
    /// NAME=VALUE, NAME<=VALUE or NAME>VALUE; repeatable.
    #[arg(long = "condition")]
    conditions: Vec<Condition>,
    #[arg(long, default_value_t = DEFAULT_NU0)]
    nu0: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Fixed Beran bandwidths "H1,H2" instead of cross-validation.
    #[arg(long)]
    bandwidth: Option<String>,
    /// Leave covariates out of the parametric regressions.
    #[arg(long)]
    no_covariates: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = DEFAULT_XI)]
    xi: f64,
    #[arg(long = "J", default_value_t = 1000)]
    j: usize,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated candidate families.
    #[arg(long, value_delimiter = ',', default_value = "clayton,frank,gumbel,joe")]
    families: Vec<Family>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long)]
    family: Option<Family>,
    #[arg(long, conflicts_with = "alpha")]
    tau: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

impl FamilyArgs {
    fn fit(&self) -> Result<Option<FamilyFit>, PipelineError> {
        let Some(family) = self.family else { return Ok(None) };
        Ok(Some(match (self.alpha, self.tau) {
            (Some(a), _) => FamilyFit::from_alpha(family, a)?,
            (None, Some(t)) => FamilyFit::from_tau(family, t)?,
            (None, None) => return Err(PipelineError::Config("--family needs --tau or --alpha".into())),
        }))
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Dataset whose estimated generator is sampled; omit to sample `--family`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long = "condition")]
    conditions: Vec<Condition>,
    #[arg(long, default_value_t = DEFAULT_NU0)]
    nu0: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[command(flatten)]
    family: FamilyArgs,
    /// Stratum for the prediction comparison, as comma-separated conditions; repeatable.
    #[arg(long)]
    stratify: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = DEFAULT_NU0)]
    nu0: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn load(input: &Path, schema: Option<&Path>) -> Result<Dataset, PipelineError> {
    let schema = match schema {
        Some(p) => Schema::from_json_file(p)?,
        None => Schema::default(),
    };
    Ok(load_csv(input, &schema)?)
}

fn options(args: &DataArgs) -> Result<PipelineOptions, PipelineError> {
    let bandwidth = match &args.bandwidth {
        None => BandwidthChoice::CrossValidated,
        Some(s) => {
            let parsed: Option<(f64, f64)> =
                s.split_once(',').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match parsed {
                Some((h1, h2)) if h1 > 0.0 && h2 > 0.0 => BandwidthChoice::Fixed { h1, h2 },
                _ => return Err(PipelineError::Config(format!("bad bandwidth {s:?}, expected H1,H2"))),
            }
        }
    };
    Ok(PipelineOptions {
        nu0: args.nu0,
        grid_size: args.grid,
        bandwidth,
        use_covariates: !args.no_covariates,
        ..PipelineOptions::default()
    })
}

fn estimate(args: &DataArgs) -> Result<(PipelineOptions, PipelineResult), PipelineError> {
    let dataset = load(&args.input, args.schema.as_deref())?;
    let opts = options(args)?;
    let result = run_pipeline(&dataset, args.mode, &args.conditions, &opts)?;
    for w in &result.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    Ok((opts, result))
}

fn write_pairs(pairs: &[(f64, f64)], header: (&str, &str), path: &Path) -> Result<(), PipelineError> {
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(archgen::io::IoError::from)?);
    write_curve_to(&mut w, header, &a, &b)?;
    w.flush().map_err(archgen::io::IoError::from)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Fit(args) => {
            let (options, result) = estimate(&args.data)?;
            println!("tau = {}", result.tau);
            let bundle = CurveBundle { input: args.data.input.display().to_string(), options, result };
            write_fit_outputs(&bundle, &args.out_dir)?;
        }
        Command::Tau(args) => {
            let (_, result) = estimate(&args)?;
            println!("{}", result.tau);
        }
        Command::Select(args) => {
            let (_, result) = estimate(&args.data)?;
            let config = SelectionConfig {
                candidates: args.families.clone(),
                j: args.j,
                n: args.n,
                xi: args.xi,
                grid_size: args.data.grid,
                seed: args.seed,
            };
            let report = select_copula(&result.generator, &result.kendall, &config)?;
            print!("{}", report.to_table());
            write_selection_outputs(&report, &args.out_dir)?;
        }
        Command::Simulate(args) => simulate(args)?,
        Command::Synth(args) => {
            let text = std::fs::read_to_string(&args.config).map_err(archgen::io::IoError::from)?;
            let mut config: SynthConfig = serde_json::from_str(&text).map_err(archgen::io::IoError::from)?;
            if let Some(n) = args.n {
                config.n = n;
            }
            if let Some(seed) = args.seed {
                config.seed = seed;
            }
            let dataset = synth_generate(&config)?;
            std::fs::create_dir_all(&args.out_dir).map_err(archgen::io::IoError::from)?;
            write_csv(&dataset, args.out_dir.join("synth.csv"))?;
            write_json(&config, args.out_dir.join("synth_config.json"))?;
        }
        Command::Curves(args) => {
            let fit = args.family.fit()?.ok_or_else(|| PipelineError::Config("--family is required".into()))?;
            let kendall = fit.kendall_curve(args.grid)?;
            let generator = fit.exact_generator_curve(args.grid, args.nu0)?;
            println!("{} alpha = {} tau = {} (curve tau = {})", fit.family, fit.alpha, fit.tau, kendall_tau(&kendall));
            std::fs::create_dir_all(&args.out_dir).map_err(archgen::io::IoError::from)?;
            archgen::export::write_kendall_csv(&kendall, args.out_dir.join("kendall.csv"))?;
            archgen::export::write_lambda_csv(&kendall, args.out_dir.join("lambda.csv"))?;
            archgen::export::write_generator_csv(&generator, args.out_dir.join("generator.csv"))?;
            write_json(&fit, args.out_dir.join("family.json"))?;
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&args.out_dir).map_err(archgen::io::IoError::from)?;
    let options = PipelineOptions { nu0: args.nu0, grid_size: args.grid, ..PipelineOptions::default() };
    let family = if args.stratify.is_empty() { args.family.fit()? } else { None };
    match (&args.input, family) {
        (Some(input), _) if !args.stratify.is_empty() => {
            let dataset = load(input, args.schema.as_deref())?;
            let family = args.family.family.unwrap_or(Family::Clayton);
            let strata = args
                .stratify
                .iter()
                .map(|s| s.split(',').map(str::parse).collect::<Result<Vec<Condition>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_approaches(&dataset, &strata, family, &options, args.n, args.seed)?;
            println!("{:<22}{:>14}{:>14}", "approach", "mean y1", "mean y2");
            println!("{:<22}{:>14.4}{:>14.4}", "observed", cmp.observed_mean_1, cmp.observed_mean_2);
            for s in &cmp.summaries {
                println!("{:<22}{:>14.4}{:>14.4}", s.approach.to_string(), s.mean_1, s.mean_2);
            }
            write_json(&cmp, args.out_dir.join("predictions.json"))?;
        }
        (Some(input), _) => {
            let dataset = load(input, args.schema.as_deref())?;
            let result = run_pipeline(&dataset, Mode::Param, &args.conditions, &options)?;
            let source = DependenceSource::Generator { generator: result.generator, kendall: result.kendall };
            let pairs = source.sample(args.n, &mut stream(args.seed, 0))?;
            write_pairs(&pairs, ("u1", "u2"), &args.out_dir.join("pairs.csv"))?;
        }
        (None, Some(fit)) => {
            let pairs = DependenceSource::Family(fit).sample(args.n, &mut stream(args.seed, 0))?;
            write_pairs(&pairs, ("u1", "u2"), &args.out_dir.join("pairs.csv"))?;
        }
        (None, None) => return Err(PipelineError::Config("simulate needs --input or --family".into())),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
