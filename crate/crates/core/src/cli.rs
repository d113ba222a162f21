//! The `ssm` command line front end.
//!
//! Every subcommand reads an optional JSON config, writes its outputs plus a
//! `manifest.json` into `--out`, and exits with 0 on success, 1 when the
//! method itself fails (a validation witness, a path-dependent PPF, a
//! degenerate estimate) and 2 on usage or configuration errors. A value
//! given both as a flag and in the config must agree.

use std::ffi::OsString;
use std::fmt::Debug;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::Composition;
use crate::eppf::eppf_from_ppf;
use crate::error::Error;
use crate::estimator::{
    ppf_curve, simulate_sss, write_estimates_csv, EstimatedPpf, MembershipSequence, PpfSource,
};
use crate::mcmc::{
    default_grid, grid_data, predictive_density, read_binomial_csv, read_normal_csv, run_chain,
    sarcoma_data, summarize, BinomialModelConfig, ConjugateModel, NormalModelConfig,
    PartitionChain, PartitionPriorSpec, PosteriorSummary, DEFAULT_BURN_IN, DEFAULT_GRID_POINTS,
};
use crate::ppf::PpfFamily;
use crate::rng::derive_seed;
use crate::validate::{check_balance, check_label_symmetry, DEFAULT_BOUND};
use crate::weights::{sample_weights, WeightModel};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_ITERS: usize = 1000;
pub const DEFAULT_DP_MASS: f64 = 2.83;
pub const DEFAULT_ESTIMATE_DRAWS: usize = 10_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Method(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Method(_) => 1,
            Self::Usage(_) | Self::Config(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::InvalidComposition(_)
            | Error::InvalidMembership(_)
            | Error::Json(_)
            | Error::Parse(_)
            | Error::Csv(_) => Self::Config(e.to_string()),
            other => Self::Method(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "ssm",
    version,
    about = "Species sampling models: PPF/EPPF algebra, Monte Carlo PPFs and partition samplers"
)]
pub struct Cli {
    /// Worker threads for parallel sections. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Grid,
    Sarcoma,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check balance and label symmetry of a built-in PPF family.
    ValidatePpf(Common),
    /// Build the EPPF table implied by a PPF.
    DeriveEppf(Common),
    /// Monte Carlo PPF of a weight prior at a set of compositions.
    EstimatePpf {
        #[command(flatten)]
        common: Common,
        /// File with one dash-separated composition per line.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Simulate membership sequences from a PPF or a weight prior.
    Simulate(Common),
    /// Run a collapsed Gibbs sampler and write posterior summaries.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Draw one truncated weight sequence.
    SampleWeights(Common),
}

fn default_bound() -> usize {
    DEFAULT_BOUND
}

fn default_estimate_draws() -> usize {
    DEFAULT_ESTIMATE_DRAWS
}

fn default_sim_draws() -> usize {
    crate::mcmc::DEFAULT_PPF_DRAWS
}

fn default_reps() -> usize {
    1
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpfConfig {
    pub ppf: PpfFamily,
    #[serde(default = "default_bound")]
    pub bound: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub model: WeightModel,
    #[serde(default = "default_estimate_draws")]
    pub draws: usize,
    pub seed: Option<u64>,
    #[serde(default)]
    pub compositions: Vec<Composition>,
    pub scenarios: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub ppf: Option<PpfFamily>,
    pub model: Option<WeightModel>,
    #[serde(default = "default_sim_draws")]
    pub draws: usize,
    pub length: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub model: WeightModel,
    pub seed: Option<u64>,
    #[serde(default)]
    pub sorted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Likelihood {
    Normal(NormalModelConfig),
    Binomial(BinomialModelConfig),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub preset: Option<Preset>,
    pub data: Option<PathBuf>,
    pub likelihood: Option<Likelihood>,
    pub prior: Option<PartitionPriorSpec>,
    pub iters: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: String,
    pub wall_clock_seconds: f64,
    pub version: String,
    pub outputs: Vec<String>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ssm: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.workers {
        Some(0) => Err(CliError::Usage("--workers must be positive".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    let started = Instant::now();
    let (name, common, outcome) = match command {
        Command::ValidatePpf(c) => ("validate-ppf", c.clone(), validate_ppf(&c)),
        Command::DeriveEppf(c) => ("derive-eppf", c.clone(), derive_eppf(&c)),
        Command::EstimatePpf { common, scenarios } => {
            let r = estimate(&common, scenarios.as_deref());
            ("estimate-ppf", common, r)
        }
        Command::Simulate(c) => ("simulate", c.clone(), simulate(&c)),
        Command::Fit {
            common,
            preset,
            iters,
            burn_in,
        } => {
            let r = fit(&common, preset, iters, burn_in);
            ("fit", common, r)
        }
        Command::SampleWeights(c) => ("sample-weights", c.clone(), weights(&c)),
    };
    // a method failure still leaves its reports behind
    let (seed, outputs, failure) = match outcome {
        Ok(Run { seed, outputs }) => (seed, outputs, None),
        Err(Failed::Partial {
            seed,
            outputs,
            error,
        }) => (seed, outputs, Some(error)),
        Err(Failed::Early(e)) => return Err(e),
    };
    let manifest = Manifest {
        command: name.to_string(),
        config: common.config.as_ref().map(|p| p.display().to_string()),
        seed,
        out_dir: common.out.display().to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
    };
    write_json(&common.out, "manifest.json", &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

struct Run {
    seed: Option<u64>,
    outputs: Vec<String>,
}

enum Failed {
    Early(CliError),
    Partial {
        seed: Option<u64>,
        outputs: Vec<String>,
        error: CliError,
    },
}

impl<E: Into<CliError>> From<E> for Failed {
    fn from(e: E) -> Self {
        Self::Early(e.into())
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn require_config<T: DeserializeOwned>(c: &Common) -> CliResult<T> {
    match &c.config {
        Some(p) => read_config(p),
        None => Err(CliError::Usage("--config is required".into())),
    }
}

/// Flag and config values must agree when both are present.
fn reconcile<T: PartialEq + Debug>(
    name: &str,
    flag: Option<T>,
    config: Option<T>,
) -> CliResult<Option<T>> {
    match (flag, config) {
        (Some(f), Some(c)) if f != c => Err(CliError::Usage(format!(
            "--{name} {f:?} conflicts with config value {c:?}"
        ))),
        (f, c) => Ok(f.or(c)),
    }
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(Error::from)?;
    Ok(BufWriter::new(
        File::create(dir.join(name)).map_err(Error::from)?,
    ))
}

fn finish(mut w: BufWriter<File>) -> CliResult<()> {
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    w.write_all(b"\n").map_err(Error::from)?;
    finish(w)
}

fn validate_ppf(c: &Common) -> std::result::Result<Run, Failed> {
    let cfg: PpfConfig = require_config(c)?;
    if cfg.bound == 0 {
        return Err(CliError::Config("bound must be positive".into()).into());
    }
    let ppf = cfg.ppf.build()?;
    let balance = check_balance(&ppf, cfg.bound)?;
    let symmetry = check_label_symmetry(&ppf, cfg.bound)?;
    write_json(&c.out, "balance.json", &balance)?;
    write_json(&c.out, "symmetry.json", &symmetry)?;
    let outputs = vec!["balance.json".to_string(), "symmetry.json".to_string()];
    println!(
        "{}: balance {} ({} violations), label symmetry {} ({} violations), N={}",
        ppf.name(),
        verdict(balance.holds),
        balance.violations.len(),
        verdict(symmetry.holds),
        symmetry.violations.len(),
        cfg.bound
    );
    if balance.holds && symmetry.holds {
        return Ok(Run {
            seed: None,
            outputs,
        });
    }
    let witness = balance
        .violations
        .first()
        .or(symmetry.violations.first())
        .map(|v| {
            format!(
                "witness at {} (i={}, j={}): lhs={} rhs={}",
                v.composition, v.i, v.j, v.lhs, v.rhs
            )
        })
        .unwrap_or_default();
    Err(Failed::Partial {
        seed: None,
        outputs,
        error: CliError::Method(format!("{} is not a valid PPF; {witness}", ppf.name())),
    })
}

fn verdict(holds: bool) -> &'static str {
    if holds {
        "holds"
    } else {
        "fails"
    }
}

fn derive_eppf(c: &Common) -> std::result::Result<Run, Failed> {
    let cfg: PpfConfig = require_config(c)?;
    let ppf = cfg.ppf.build()?;
    let table = eppf_from_ppf(&ppf, cfg.bound)?;
    let w = create(&c.out, "eppf.csv")?;
    table.write_csv(w)?;
    println!(
        "{}: {} compositions up to N={}",
        ppf.name(),
        table.len(),
        cfg.bound
    );
    Ok(Run {
        seed: None,
        outputs: vec!["eppf.csv".into()],
    })
}

/// One composition per non-empty line; `#` starts a comment.
pub fn parse_scenarios(text: &str) -> crate::error::Result<Vec<Composition>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::parse)
        .collect()
}

fn estimate(c: &Common, scenarios_flag: Option<&Path>) -> std::result::Result<Run, Failed> {
    let cfg: EstimateConfig = require_config(c)?;
    let seed = reconcile("seed", c.seed, cfg.seed)?.unwrap_or(DEFAULT_SEED);
    let file = reconcile(
        "scenarios",
        scenarios_flag.map(Path::to_path_buf),
        cfg.scenarios.clone(),
    )?;
    let mut scenarios = cfg.compositions.clone();
    if let Some(path) = file {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        scenarios.extend(parse_scenarios(&text)?);
    }
    if scenarios.is_empty() {
        return Err(CliError::Config("no compositions given".into()).into());
    }
    let curve = ppf_curve(&cfg.model, &scenarios, cfg.draws, seed)?;
    write_estimates_csv(&curve.estimates, create(&c.out, "estimates.csv")?)?;
    curve.write_rows_csv(create(&c.out, "curve.csv")?)?;
    curve.write_aggregate_csv(create(&c.out, "curve_by_size.csv")?)?;
    println!(
        "estimated the PPF at {} compositions with {} draws each",
        scenarios.len(),
        cfg.draws
    );
    Ok(Run {
        seed: Some(seed),
        outputs: vec![
            "estimates.csv".into(),
            "curve.csv".into(),
            "curve_by_size.csv".into(),
        ],
    })
}

fn simulate(c: &Common) -> std::result::Result<Run, Failed> {
    let cfg: SimulateConfig = require_config(c)?;
    let seed = reconcile("seed", c.seed, cfg.seed)?.unwrap_or(DEFAULT_SEED);
    if cfg.reps == 0 {
        return Err(CliError::Config("reps must be positive".into()).into());
    }
    let source: Box<dyn PpfSource> = match (&cfg.ppf, &cfg.model) {
        (Some(family), None) => Box::new(family.build()?),
        (None, Some(model)) => {
            model.validate()?;
            Box::new(EstimatedPpf {
                model: model.clone(),
                draws: cfg.draws,
            })
        }
        _ => {
            return Err(CliError::Config("give exactly one of \"ppf\" and \"model\"".into()).into())
        }
    };
    let sequences = (0..cfg.reps)
        .into_par_iter()
        .map(|r| simulate_sss(source.as_ref(), cfg.length, derive_seed(seed, r as u64)))
        .collect::<crate::error::Result<Vec<MembershipSequence>>>()?;
    let mut w = create(&c.out, "sequences.txt")?;
    let mut counts = std::collections::BTreeMap::new();
    for s in &sequences {
        let line: Vec<String> = s.labels().iter().map(|l| l.to_string()).collect();
        writeln!(w, "{}", line.join(" ")).map_err(Error::from)?;
        *counts.entry(s.composition()?).or_insert(0usize) += 1;
    }
    finish(w)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(&c.out, "compositions.csv")?);
    w.write_record(["composition", "count", "frequency"])
        .map_err(Error::from)?;
    for (comp, n) in &counts {
        w.write_record([
            comp.key(),
            n.to_string(),
            (*n as f64 / cfg.reps as f64).to_string(),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    println!("simulated {} sequences of length {}", cfg.reps, cfg.length);
    Ok(Run {
        seed: Some(seed),
        outputs: vec!["sequences.txt".into(), "compositions.csv".into()],
    })
}

fn weights(c: &Common) -> std::result::Result<Run, Failed> {
    let cfg: WeightsConfig = require_config(c)?;
    let seed = reconcile("seed", c.seed, cfg.seed)?.unwrap_or(DEFAULT_SEED);
    let draw = sample_weights(&cfg.model, seed)?;
    draw.write_csv(create(&c.out, "weights.csv")?, cfg.sorted)?;
    #[derive(Serialize)]
    struct DrawInfo {
        atoms: usize,
        tail_mass: f64,
        seed: u64,
    }
    write_json(
        &c.out,
        "draw.json",
        &DrawInfo {
            atoms: draw.len(),
            tail_mass: draw.tail_mass,
            seed,
        },
    )?;
    println!("drew {} atoms, tail mass {:e}", draw.len(), draw.tail_mass);
    Ok(Run {
        seed: Some(seed),
        outputs: vec!["weights.csv".into(), "draw.json".into()],
    })
}

enum Dataset {
    Normal(Vec<f64>, NormalModelConfig),
    Binomial(Vec<crate::mcmc::BinomialObs>, BinomialModelConfig),
}

fn load_dataset(preset: Option<Preset>, cfg: &FitConfig) -> CliResult<Dataset> {
    match (preset, &cfg.data) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "give either a preset or a data file, not both".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "fit needs --preset or a \"data\" file in the config".into(),
        )),
        (Some(Preset::Grid), None) => match cfg.likelihood {
            None => Ok(Dataset::Normal(grid_data(), NormalModelConfig::default())),
            Some(Likelihood::Normal(m)) => Ok(Dataset::Normal(grid_data(), m)),
            Some(_) => Err(CliError::Config(
                "the grid preset needs a normal likelihood".into(),
            )),
        },
        (Some(Preset::Sarcoma), None) => match cfg.likelihood {
            None => Ok(Dataset::Binomial(
                sarcoma_data(),
                BinomialModelConfig::default(),
            )),
            Some(Likelihood::Binomial(m)) => Ok(Dataset::Binomial(sarcoma_data(), m)),
            Some(_) => Err(CliError::Config(
                "the sarcoma preset needs a binomial likelihood".into(),
            )),
        },
        (None, Some(path)) => {
            let file = File::open(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            match cfg.likelihood {
                Some(Likelihood::Normal(m)) => Ok(Dataset::Normal(read_normal_csv(file)?, m)),
                Some(Likelihood::Binomial(m)) => Ok(Dataset::Binomial(read_binomial_csv(file)?, m)),
                None => Err(CliError::Config(
                    "a data file needs an explicit \"likelihood\"".into(),
                )),
            }
        }
    }
}

fn fit(
    c: &Common,
    preset_flag: Option<Preset>,
    iters_flag: Option<usize>,
    burn_flag: Option<usize>,
) -> std::result::Result<Run, Failed> {
    let cfg: FitConfig = match &c.config {
        Some(p) => read_config(p)?,
        None => FitConfig {
            grid_points: DEFAULT_GRID_POINTS,
            ..Default::default()
        },
    };
    let seed = reconcile("seed", c.seed, cfg.seed)?.unwrap_or(DEFAULT_SEED);
    let preset = reconcile("preset", preset_flag, cfg.preset)?;
    let iters = reconcile("iters", iters_flag, cfg.iters)?.unwrap_or(DEFAULT_ITERS);
    let burn_in = reconcile("burn-in", burn_flag, cfg.burn_in)?
        .unwrap_or(DEFAULT_BURN_IN.min(iters.saturating_sub(1)));
    let prior = cfg.prior.clone().unwrap_or(PartitionPriorSpec::Dp {
        theta: DEFAULT_DP_MASS,
    });
    prior.validate()?;

    let mut outputs = Vec::new();
    let (chain, summary) = match load_dataset(preset, &cfg)? {
        Dataset::Normal(y, model) => {
            model.validate()?;
            let chain = run_chain(&y, &model, &prior, iters, burn_in, seed)?;
            let mut summary = summarize(&chain)?;
            let grid = default_grid(&y, cfg.grid_points)?;
            summary.predictive = Some(predictive_density(
                &chain,
                &y,
                &model,
                &prior,
                &grid,
                derive_seed(seed, u64::MAX),
            )?);
            summary.write_predictive_csv(create(&c.out, "predictive.csv")?)?;
            outputs.push("predictive.csv".to_string());
            (chain, summary)
        }
        Dataset::Binomial(rows, model) => {
            model.validate()?;
            fit_generic(&rows, &model, &prior, iters, burn_in, seed)?
        }
    };
    summary.write_cocluster_csv(create(&c.out, "cocluster.csv")?)?;
    summary.write_k_csv(create(&c.out, "k_dist.csv")?)?;
    summary.write_nmax_csv(create(&c.out, "nmax_dist.csv")?)?;
    let w = create(&c.out, "chain.txt")?;
    chain.write_states(w)?;
    let mut w = create(&c.out, "log_scores.csv")?;
    writeln!(w, "state,log_score").map_err(Error::from)?;
    for (t, s) in chain.log_scores.iter().enumerate() {
        writeln!(w, "{},{}", t + 1, s).map_err(Error::from)?;
    }
    finish(w)?;
    write_json(&c.out, "summary.json", &FitReport::new(&chain, &summary))?;
    outputs.extend(
        [
            "cocluster.csv",
            "k_dist.csv",
            "nmax_dist.csv",
            "chain.txt",
            "log_scores.csv",
            "summary.json",
        ]
        .map(String::from),
    );
    outputs.sort();
    println!(
        "{} states kept: E(k)={:.3}, mode k={}, mode n_(1)={}",
        chain.len(),
        summary.mean_k(),
        summary.mode_k(),
        summary.mode_nmax()
    );
    Ok(Run {
        seed: Some(seed),
        outputs,
    })
}

fn fit_generic<M: ConjugateModel>(
    data: &[M::Obs],
    model: &M,
    prior: &PartitionPriorSpec,
    iters: usize,
    burn_in: usize,
    seed: u64,
) -> CliResult<(PartitionChain, PosteriorSummary)> {
    let chain = run_chain(data, model, prior, iters, burn_in, seed)?;
    let summary = summarize(&chain)?;
    Ok((chain, summary))
}

#[derive(Serialize)]
struct FitReport {
    states: usize,
    iters: usize,
    burn_in: usize,
    seed: u64,
    mean_k: f64,
    mode_k: usize,
    mean_nmax: f64,
    mode_nmax: usize,
}

impl FitReport {
    fn new(chain: &PartitionChain, s: &PosteriorSummary) -> Self {
        Self {
            states: chain.len(),
            iters: chain.iters,
            burn_in: chain.burn_in,
            seed: chain.seed,
            mean_k: s.mean_k(),
            mode_k: s.mode_k(),
            mean_nmax: s.mean_nmax(),
            mode_nmax: s.mode_nmax(),
        }
    }
}
