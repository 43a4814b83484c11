//! Command-line verbs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{
    append_record, fit_only, read_records, run_point, sandwich, ExperimentConfig, FittedModel, ResultRecord,
    RunOptions, Stages,
};
use crate::error::{Error, Result};
use crate::gp::write_model;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_STAGE: i32 = 3;
pub const EXIT_SANDWICH: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "advbound", version, about = "Certified L0 robustness bounds for GP classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit, threshold and certify one configuration. Oracle and attack
    /// sections in the config also run, followed by the sandwich check.
    Certify(CommonArgs),
    /// Certify every point of the config's sweep lists, skipping points
    /// already in the output file.
    Sweep(CommonArgs),
    /// Attack every confidently classified test point.
    Attack(CommonArgs),
    /// Empirical lower bounds on the largest latent change.
    Oracle(CommonArgs),
    /// Fit the model and write it to --out.
    Fit(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSONL file records are appended to; stdout when absent
    /// (required for `fit` and `sweep`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluate sequentially.
    #[arg(long)]
    pub strict_deterministic: bool,
    /// Kernel evaluations allowed to each oracle.
    #[arg(long)]
    pub budget: Option<u64>,
}

fn load(args: &CommonArgs) -> Result<(ExperimentConfig, RunOptions)> {
    let mut cfg = ExperimentConfig::from_file(&args.config).map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    Ok((
        cfg,
        RunOptions {
            strict_deterministic: args.strict_deterministic,
            budget: args.budget,
        },
    ))
}

fn emit(out: Option<&Path>, rec: &ResultRecord) -> Result<()> {
    match out {
        Some(p) => append_record(p, rec),
        None => {
            println!("{}", rec.to_line());
            Ok(())
        }
    }
}

fn exit_code(rec: &ResultRecord) -> i32 {
    if let Some(e) = &rec.error {
        eprintln!("stage {} failed: {}", e.stage, e.message);
        EXIT_STAGE
    } else if rec.has_violation() {
        for v in &rec.sandwich.as_ref().expect("checked").violations {
            eprintln!("sandwich violation: {v}");
        }
        EXIT_SANDWICH
    } else {
        EXIT_OK
    }
}

/// Adds the sandwich check against a certify record with the same key in
/// the output file.
fn sandwich_with_earlier(out: Option<&Path>, rec: &mut ResultRecord) -> Result<()> {
    let Some(p) = out else { return Ok(()) };
    let earlier = read_records(p)?;
    let cert = earlier
        .iter()
        .rev()
        .filter(|r| r.key == rec.key && r.error.is_none())
        .find_map(|r| r.certificate.clone());
    if let Some(c) = cert {
        rec.sandwich = Some(sandwich(&c, rec.oracle.as_ref(), rec.attack.as_ref()));
    }
    Ok(())
}

fn single(args: &CommonArgs, verb: &str, stages: Stages) -> Result<i32> {
    let (cfg, opts) = load(args)?;
    if verb == "oracle" {
        let o = cfg.oracle.clone().unwrap_or_default();
        if o.trials == 0 && o.grid_dims.is_empty() {
            return Err(Error::Config("oracle needs trials > 0 or grid_dims".into()));
        }
    }
    let mut rec = run_point(&cfg, verb, BTreeMap::new(), stages, &opts);
    if rec.error.is_none() && !stages.certify {
        sandwich_with_earlier(args.out.as_deref(), &mut rec)?;
    }
    emit(args.out.as_deref(), &rec)?;
    Ok(exit_code(&rec))
}

fn sweep(args: &CommonArgs) -> Result<i32> {
    let (cfg, opts) = load(args)?;
    let out = args
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("sweep needs --out".into()))?;
    let points = cfg.sweep_points();
    if points.is_empty() {
        log::info!("sweep lists are empty; nothing to do");
        return Ok(EXIT_OK);
    }
    let done: Vec<String> = read_records(out)?
        .into_iter()
        .filter(|r| r.verb == "sweep" && r.error.is_none())
        .map(|r| r.key)
        .collect();
    let mut code = EXIT_OK;
    let stages = Stages {
        certify: true,
        ..Stages::default()
    };
    for point in points {
        let at = cfg.at_point(&point);
        let key = super::certificate_key(&at);
        if done.contains(&key) {
            log::info!("skipping completed point {point:?}");
            continue;
        }
        log::info!("sweep point {point:?}");
        let rec = run_point(&at, "sweep", point, stages, &opts);
        append_record(out, &rec)?;
        code = code.max(exit_code(&rec));
    }
    Ok(code)
}

fn fit(args: &CommonArgs) -> Result<i32> {
    let (cfg, _) = load(args)?;
    let out = args.out.as_deref().ok_or_else(|| Error::Config("fit needs --out".into()))?;
    match fit_only(&cfg) {
        Ok((FittedModel::Gp(m), _)) => write_model(&m, out)?,
        Ok((FittedModel::Lr(m), _)) => {
            let text = serde_json::to_string_pretty(&m).expect("models serialize");
            std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
        }
        Err(e) => {
            eprintln!("fit failed: {e}");
            return Ok(EXIT_STAGE);
        }
    }
    Ok(EXIT_OK)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let all = Stages {
        certify: true,
        oracle: false,
        attack: false,
    };
    let result = match &cli.command {
        Command::Certify(a) => load(a).and_then(|(cfg, _)| {
            single(
                a,
                "certify",
                Stages {
                    oracle: cfg.oracle.is_some(),
                    attack: cfg.attack.is_some(),
                    ..all
                },
            )
        }),
        Command::Sweep(a) => sweep(a),
        Command::Attack(a) => single(
            a,
            "attack",
            Stages {
                attack: true,
                ..Stages::default()
            },
        ),
        Command::Oracle(a) => single(
            a,
            "oracle",
            Stages {
                oracle: true,
                ..Stages::default()
            },
        ),
        Command::Fit(a) => fit(a),
    };
    match result {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_STAGE
        }
    }
}
