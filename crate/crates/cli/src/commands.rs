use std::borrow::Cow;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mvtrack_core::error::DataError;
use mvtrack_core::evalmetrics::{aggregate_seeds, MetricsReport, Scores, SeedReport};
use mvtrack_core::io::{write_atomic, write_json, write_jsonl};
use mvtrack_core::pipeline::{run_sequence, write_sequence, PipelineParams, RunConfig, SequenceOutput};
use mvtrack_core::simworld::{generate as simulate, generate_dataset};
use mvtrack_core::{Dataset, PositionRecord, ScenarioConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Cli, RunArgs, ScenarioArgs, SourceArgs, SweepArgs, ValidateArgs};
use crate::config::ConfigFile;
use crate::error::CliError;

/// Data for a run: one dataset shared by every seed, or a scenario that is
/// simulated afresh for each seed with `rng_seed = seed`.
pub enum Source {
    Fixed(Dataset),
    PerSeed(ScenarioConfig),
}

impl Source {
    pub fn dataset(&self, seed: u64) -> Result<Cow<'_, Dataset>, DataError> {
        match self {
            Self::Fixed(ds) => Ok(Cow::Borrowed(ds)),
            Self::PerSeed(cfg) => Ok(Cow::Owned(simulate(&ScenarioConfig { rng_seed: seed, ..cfg.clone() })?)),
        }
    }
}

fn config_file(cli: &Cli) -> Result<Option<ConfigFile>, DataError> {
    cli.config.as_deref().map(ConfigFile::load).transpose()
}

/// Preset (default `simple`) with config overrides and the frame override.
pub fn scenario(cli: &Cli, args: &ScenarioArgs, file: Option<&ConfigFile>) -> Result<ScenarioConfig, CliError> {
    let name = args.preset.as_deref().unwrap_or("simple");
    let base =
        ScenarioConfig::preset(name).ok_or_else(|| CliError::Usage(format!("unknown preset {name:?} (expected simple or complex)")))?;
    let mut cfg = match (file, &cli.config) {
        (Some(f), Some(path)) => f.apply(base, path)?,
        _ => base,
    };
    if let Some(n) = args.frames {
        cfg.frame_count = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Pipeline parameters from the config file with `--radius` applied.
pub fn pipeline_params(cli: &Cli, file: Option<&ConfigFile>) -> PipelineParams {
    let mut p = file.map(|f| f.pipeline).unwrap_or_default();
    if let Some(r) = cli.radius {
        p.match_radius = r;
    }
    p
}

pub fn seed_list(cli: &Cli) -> Vec<u64> {
    let base = cli.seed.unwrap_or(0);
    (0..cli.seeds.unwrap_or(1) as u64).map(|i| base + i).collect()
}

fn source(cli: &Cli, args: &SourceArgs, file: Option<&ConfigFile>) -> Result<Source, CliError> {
    match &args.dataset {
        Some(dir) => Ok(Source::Fixed(Dataset::read(dir)?)),
        None => Ok(Source::PerSeed(scenario(cli, &args.scenario, file)?)),
    }
}

fn progress(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn generate(cli: &Cli, args: &ScenarioArgs) -> Result<(), CliError> {
    let file = config_file(cli)?;
    let mut cfg = scenario(cli, args, file.as_ref())?;
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("dataset"));
    progress(cli, format!("generating {} ({} frames, seed {}) into {}", cfg.name, cfg.frame_count, cfg.rng_seed, out.display()));
    generate_dataset(&cfg, &out)?;
    Ok(())
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Pipeline outputs for one seed plus the scenario and ground truth it was
/// scored against, so the directory is self-contained for `dump`.
fn write_seed(dir: &Path, out: &SequenceOutput, ds: &Dataset, params: &PipelineParams, heatmaps: bool) -> Result<(), DataError> {
    write_sequence(dir, out, ds, params, heatmaps)?;
    write_json(&dir.join("scenario.json"), &ds.config)?;
    let gt: Vec<PositionRecord> = ds.positions.iter().flatten().map(|p| p.rounded()).collect();
    write_jsonl(&dir.join("gt").join("positions.jsonl"), &gt)
}

fn summary(report: &MetricsReport) -> String {
    let mut s = String::new();
    for (name, (m, d)) in Scores::NAMES.iter().zip(report.mean.values().into_iter().zip(report.std.values())) {
        let _ = writeln!(s, "{name:>5} {m:7.2} ± {d:5.2}");
    }
    s
}

fn run_config(cli: &Cli, params: PipelineParams, dropout: f64) -> RunConfig {
    RunConfig { seeds: seed_list(cli), dropout, dropout_mode: cli.dropout_mode.unwrap_or_default(), params }
}

/// Runs every seed, writes `seed_<s>/` trees and `report.{json,csv}`.
pub fn run(cli: &Cli, args: &RunArgs) -> Result<MetricsReport, CliError> {
    let file = config_file(cli)?;
    let cfg = run_config(cli, pipeline_params(cli, file.as_ref()), cli.dropout.unwrap_or(0.0));
    cfg.validate()?;
    let src = source(cli, &args.source, file.as_ref())?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    let reports: Vec<SeedReport> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<SeedReport, CliError> {
            let ds = src.dataset(seed)?;
            let res = run_sequence(&ds, seed, cfg.dropout, cfg.dropout_mode, &cfg.params)?;
            write_seed(&seed_dir(&out, seed), &res, &ds, &cfg.params, args.heatmaps)?;
            progress(cli, format!("seed {seed}: MODA {:.2} MOTA {:.2}", res.report.scores.moda, res.report.scores.mota));
            Ok(res.report)
        })
        .collect::<Result<_, _>>()?;
    let report = aggregate_seeds(reports);
    report.write(&out)?;
    if !cli.quiet {
        print!("{}", summary(&report));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rate: f64,
    pub report: MetricsReport,
}

const SWEEP_METRICS: [&str; 4] = ["MODA", "MODP", "MOTA", "MOTP"];

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("rate");
    for m in SWEEP_METRICS {
        let _ = write!(s, ",{m}_mean,{m}_std");
    }
    s.push('\n');
    for row in rows {
        let (mean, std) = (row.report.mean.values(), row.report.std.values());
        let _ = write!(s, "{}", row.rate);
        for m in SWEEP_METRICS {
            let k = Scores::NAMES.iter().position(|n| *n == m).expect("known metric");
            let _ = write!(s, ",{:.6},{:.6}", mean[k], std[k]);
        }
        s.push('\n');
    }
    s
}

fn check_rates(rates: &[f64]) -> Result<(), CliError> {
    if rates.is_empty() {
        return Err(CliError::Usage("no dropout rates given".into()));
    }
    if let Some(r) = rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(CliError::Usage(format!("dropout rate {r} is outside [0, 1)")));
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage("dropout rates must be strictly ascending".into()));
    }
    Ok(())
}

/// One aggregate report per dropout rate; `sweep.csv`, `sweep.json` and
/// `rate_<r>/report.{json,csv}` under the output directory.
pub fn sweep(cli: &Cli, args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    check_rates(&args.rates)?;
    let file = config_file(cli)?;
    let cfg = run_config(cli, pipeline_params(cli, file.as_ref()), 0.0);
    cfg.validate()?;
    let src = source(cli, &args.source, file.as_ref())?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    let per_seed: Vec<Vec<SeedReport>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<SeedReport>, CliError> {
            let ds = src.dataset(seed)?;
            args.rates
                .iter()
                .map(|&rate| {
                    let res = run_sequence(&ds, seed, rate, cfg.dropout_mode, &cfg.params)?;
                    progress(cli, format!("seed {seed} rate {rate}: MODA {:.2}", res.report.scores.moda));
                    Ok(res.report)
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<SweepRow> = args
        .rates
        .iter()
        .enumerate()
        .map(|(k, &rate)| SweepRow { rate, report: aggregate_seeds(per_seed.iter().map(|s| s[k]).collect()) })
        .collect();
    for row in &rows {
        row.report.write(&out.join(format!("rate_{}", row.rate)))?;
    }
    let csv = sweep_csv(&rows);
    write_atomic(&out.join("sweep.csv"), csv.as_bytes())?;
    let rounded: Vec<SweepRow> = rows.iter().map(|r| SweepRow { rate: r.rate, report: r.report.rounded() }).collect();
    write_json(&out.join("sweep.json"), &rounded)?;
    if !cli.quiet {
        print!("{csv}");
    }
    Ok(rows)
}

pub fn validate(cli: &Cli, args: &ValidateArgs) -> Result<(), CliError> {
    if args.dataset.is_none() && cli.config.is_none() {
        return Err(CliError::Usage("validate needs --dataset and/or --config".into()));
    }
    if let Some(path) = &cli.config {
        ConfigFile::load(path)?;
        progress(cli, format!("{}: ok", path.display()));
    }
    if let Some(dir) = &args.dataset {
        let ds = Dataset::read(dir)?;
        progress(cli, format!("{}: ok ({} frames, {} drones)", dir.display(), ds.frame_count(), ds.drone_count()));
    }
    Ok(())
}
