use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Subcommand;
use miaudit::io::{read_membership, read_scores};
use miaudit::scenarios::{run_trials, AggregateReport, FixedScores, ReportMeta, ScenarioConfig};
use serde_json::json;

use crate::manifest::{manifest_path, Manifest};
use crate::{usage, Global};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// `record_id,score` CSV.
    #[arg(long)]
    scores: PathBuf,

    /// `record_id,membership` CSV with values `train` / `test`.
    #[arg(long)]
    membership: PathBuf,

    /// Members (and non-members) per trial.
    #[arg(long = "M", id = "M")]
    m: usize,

    #[arg(long, default_value_t = 10)]
    trials: usize,

    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Pool the trials of several reports of the same configuration.
    Merge {
        #[arg(required = true)]
        reports: Vec<PathBuf>,

        #[arg(long)]
        out: PathBuf,
    },
}

/// Attack metadata from the score file's manifest, if one sits next to it.
fn score_meta(scores: &Path) -> anyhow::Result<ReportMeta> {
    let path = manifest_path(scores);
    if !path.exists() {
        return Ok(ReportMeta {
            attack: miaudit::attacks::SCORE_FILE_ATTACK.into(),
            ..ReportMeta::default()
        });
    }
    let text = std::fs::read_to_string(&path)?;
    let manifest: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    serde_json::from_value(manifest["results"].clone())
        .with_context(|| format!("no attack results in {}", path.display()))
}

fn write_report(report: &AggregateReport, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: Args, global: &Global) -> anyhow::Result<()> {
    if args.m == 0 || args.trials == 0 {
        return Err(usage("--M and --trials must be ≥ 1"));
    }
    let (seed, seed_source) = global.seed();
    let scores = read_scores(&args.scores)?;
    let membership = read_membership(&args.membership)?;
    let meta = score_meta(&args.scores)?;
    let provider = FixedScores::new(scores, membership)?;
    let config = ScenarioConfig {
        m: args.m,
        trials: args.trials,
        seed,
    };
    let report = run_trials(&provider, &FixedScores::passthrough, &config, meta)?;
    write_report(&report, &args.out)?;

    let mut manifest = Manifest::new("scenario", global, json!({ "M": args.m, "trials": args.trials }));
    manifest.seed(seed, seed_source);
    manifest.input(&args.scores, &[manifest_path(&args.scores)])?;
    manifest.input(&args.membership, &[])?;
    manifest.output(&args.out);
    manifest.results(json!({
        "single_mean": report.single_mean,
        "single_std": report.single_std,
        "set_mean": report.set_mean,
        "set_std": report.set_std,
    }));
    manifest.write(&manifest_path(&args.out))?;
    println!(
        "{} trials, M = {}: single MI {:.4} ± {:.4}, set MI {:.4} ± {:.4}",
        report.trials, report.m, report.single_mean, report.single_std, report.set_mean, report.set_std
    );
    Ok(())
}

pub fn run_report(cmd: ReportCommand, global: &Global) -> anyhow::Result<()> {
    match cmd {
        ReportCommand::Merge { reports, out } => {
            let mut manifest = Manifest::new("report merge", global, json!({}));
            let parsed = reports
                .iter()
                .map(|p| {
                    manifest.input(p, &[])?;
                    let text =
                        std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str::<AggregateReport>(&text)
                        .with_context(|| format!("parsing {}", p.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let merged = AggregateReport::merge(&parsed)?;
            write_report(&merged, &out)?;
            manifest.output(&out);
            manifest.write(&manifest_path(&out))?;
            println!(
                "merged {} reports, {} trials in total",
                parsed.len(),
                merged.trials
            );
            Ok(())
        }
    }
}
