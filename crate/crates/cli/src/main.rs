//! `sfit`: train networks, calibrate β, run significance tests, LOCO
//! baselines and simulation studies from the command line.

mod checkpoint;
mod commands;
mod config;
mod data;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Source, Study};

/// Failure classes, mapped to exit codes 2 and 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn runtime<E: fmt::Display>(e: E) -> Self {
        CliError::Runtime(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "sfit", version, about = "Single feature introduction tests for trained models")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for data, splits, training and calibration.
    #[arg(long, global = true, env = "SFIT_SEED")]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "sfit-out")]
    out: PathBuf,
    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write a checkpoint plus its training history.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Choose β from random models of the checkpoint's architecture.
    Calibrate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated increasing β grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        random_models: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the first-order (and optionally second-order) test on a checkpoint.
    Test {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// CSV to test on instead of the checkpoint's inference split.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Calibration report supplying β when none is set.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Leave-one-covariate-out baseline: one refit per feature.
    Loco {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated feature names to leave out.
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Repeated-trial simulation studies.
    Simulate {
        #[arg(long, value_enum)]
        study: Option<Study>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_inference: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        n2s: Option<Vec<usize>>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(Args, Default)]
struct DataArgs {
    #[arg(long, value_enum)]
    source: Option<Source>,
    /// Input CSV (implies --source csv).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_delimiter = ',')]
    categorical: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    drop: Option<Vec<String>>,
    #[arg(long)]
    classification: bool,
    /// Rows drawn from a simulated source.
    #[arg(long)]
    rows: Option<usize>,
    /// Train,validation,inference fractions.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    split: Option<Vec<f64>>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Comma-separated hidden layer widths; empty for a linear model.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    min_delta: Option<f64>,
    #[arg(long)]
    class_weighting: bool,
}

#[derive(Args, Default)]
struct TestArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// Loss for the differences (absolute-deviation, squared-error, cross-entropy).
    #[arg(long)]
    delta_loss: Option<String>,
    /// by, bh or none.
    #[arg(long)]
    fdr: Option<String>,
    #[arg(long, value_parser = parse_ci)]
    ci: Option<sfit::sign_test::CiPolicy>,
    #[arg(long)]
    ci_for_all: bool,
    #[arg(long)]
    order: Option<u8>,
    #[arg(long)]
    screen_l: Option<usize>,
    /// Pair every feature instead of screening by first-layer weights.
    #[arg(long)]
    exhaustive: bool,
    /// `class`, or a categorical group name.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    group_dummies: bool,
}

fn parse_ci(s: &str) -> Result<sfit::sign_test::CiPolicy, String> {
    use sfit::sign_test::CiPolicy;
    match s {
        "auto" => Ok(CiPolicy::Auto),
        "exact" => Ok(CiPolicy::Exact),
        "asymptotic" => Ok(CiPolicy::Asymptotic),
        other => Err(format!("unknown interval method '{other}'")),
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut RunConfig) -> Result<(), CliError> {
        let d = &mut cfg.data;
        if let Some(p) = self.data {
            d.path = Some(p);
            d.source = Source::Csv;
        }
        if let Some(s) = self.source {
            d.source = s;
        }
        if let Some(t) = self.target {
            d.target = t;
        }
        if let Some(c) = self.categorical {
            d.categorical = c;
        }
        if let Some(c) = self.drop {
            d.drop = c;
        }
        d.classification |= self.classification;
        if let Some(r) = self.rows {
            d.rows = r;
        }
        if let Some(s) = self.split {
            d.split = s
                .try_into()
                .map_err(|s: Vec<f64>| CliError::Config(format!("--split: expected 3 fractions, got {}", s.len())))?;
        }
        Ok(())
    }
}

impl ModelArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        if let Some(h) = self.hidden {
            m.hidden = h;
        }
        if let Some(e) = self.epochs {
            m.max_epochs = e;
        }
        if let Some(s) = self.step_size {
            m.step_size = s;
        }
        if let Some(b) = self.batch_size {
            m.batch_size = b;
        }
        if let Some(p) = self.patience {
            m.patience = p;
        }
        if let Some(d) = self.min_delta {
            m.min_delta = d;
        }
        m.class_weighting |= self.class_weighting;
    }
}

impl TestArgs {
    fn apply(self, cfg: &mut RunConfig) {
        let t = &mut cfg.test;
        if let Some(a) = self.alpha {
            t.alpha = a;
        }
        if self.beta.is_some() {
            t.beta = self.beta;
        }
        if let Some(b) = self.beta2 {
            t.beta2 = b;
        }
        if self.delta_loss.is_some() {
            t.loss = self.delta_loss;
        }
        if let Some(f) = self.fdr {
            t.fdr = f;
        }
        if let Some(c) = self.ci {
            t.ci = c;
        }
        t.ci_for_all |= self.ci_for_all;
        if let Some(o) = self.order {
            t.order = o;
        }
        if let Some(l) = self.screen_l {
            t.screen_l = l;
        }
        t.exhaustive |= self.exhaustive;
        if self.partition.is_some() {
            t.partition = self.partition;
        }
        t.group_dummies |= self.group_dummies;
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else {
        return Ok(());
    };
    if n == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::runtime)?;
    #[cfg(not(feature = "parallel"))]
    log::warn!("built without the parallel feature; --threads {n} has no effect");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out;
    match cli.command {
        Command::Fit { data, model } => {
            data.apply(&mut cfg)?;
            model.apply(&mut cfg);
            cfg.validate()?;
            commands::fit(&cfg, &out)
        }
        Command::Calibrate { checkpoint, grid, random_models, alpha } => {
            if grid.is_some() {
                cfg.calibrate.grid = grid;
            }
            if let Some(n) = random_models {
                cfg.calibrate.random_models = n;
            }
            if let Some(a) = alpha {
                cfg.test.alpha = a;
            }
            cfg.validate()?;
            commands::calibrate(&cfg, &checkpoint.unwrap_or_else(|| out.join("checkpoint.json")), &out)
        }
        Command::Test { checkpoint, data, calibration, test } => {
            test.apply(&mut cfg);
            cfg.validate()?;
            let checkpoint = checkpoint.unwrap_or_else(|| out.join("checkpoint.json"));
            commands::test(&cfg, &checkpoint, data.as_deref(), calibration.as_deref(), &out)
        }
        Command::Loco { data, model, features, alpha } => {
            data.apply(&mut cfg)?;
            model.apply(&mut cfg);
            if let Some(f) = features {
                cfg.loco.features = f;
            }
            if let Some(a) = alpha {
                cfg.test.alpha = a;
            }
            cfg.validate()?;
            commands::loco(&cfg, &out)
        }
        Command::Simulate { study, trials, n_train, n_inference, alphas, n2s, model } => {
            let s = &mut cfg.simulate;
            if let Some(v) = study {
                s.study = v;
            }
            if let Some(v) = trials {
                s.trials = v;
            }
            if n_train.is_some() {
                s.n_train = n_train;
            }
            if n_inference.is_some() {
                s.n_inference = n_inference;
            }
            if let Some(v) = alphas {
                s.alphas = v;
            }
            if let Some(v) = n2s {
                s.n2s = v;
            }
            model.apply(&mut cfg);
            cfg.validate()?;
            commands::simulate(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
