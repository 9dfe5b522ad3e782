use std::path::{Path, PathBuf};

use clap::ValueEnum;
use miaudit::attacks::{
    external_scores, run_kde_attack, run_mc_attack, run_reconstruction_attack, EpsilonHeuristic, KdeForm,
    McConfig, McVariant, PrecomputedReconstructions, ReconstructionOracle,
};
use miaudit::distances::{DistanceKind, DistanceSpec, SampleSource};
use miaudit::features::{ChistParams, HogParams, PcaModel};
use miaudit::io::{
    ids_sidecar, read_matrix, read_reconstruction_dir, read_record_set, read_scores, write_membership,
    write_scores, MatrixFile,
};
use miaudit::scenarios::{Membership, ReportMeta};
use miaudit::synth::BiasedReconstructor;
use miaudit::{Matrix, Origin, RecordSet, ScoreVector};
use serde_json::json;

use crate::manifest::{manifest_path, Manifest};
use crate::{usage, Global};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Fraction of samples inside the ε-ball.
    McEps,
    /// Clipped negative log-distances of samples inside the ε-ball.
    McD,
    /// Gaussian kernel density estimate.
    Kde,
    /// Negative mean reconstruction error.
    Rec,
    /// Scores from an external CSV, passed through.
    ScoreFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Distance {
    Raw,
    Pca,
    Hog,
    Chist,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(value_enum)]
    kind: Kind,

    /// Records claimed to be training data.
    #[arg(long)]
    train: Option<PathBuf>,

    /// Records claimed to be held out.
    #[arg(long)]
    test: Option<PathBuf>,

    /// Generator samples (mc-eps, mc-d, kde).
    #[arg(long)]
    samples: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Distance::Raw)]
    distance: Distance,

    /// Model written by `fit-pca` (with --distance pca).
    #[arg(long)]
    pca_model: Option<PathBuf>,

    /// Image layout HxW or HxWxC (with --distance hog or chist).
    #[arg(long, default_value = "28x28x1")]
    image_shape: String,

    #[arg(long, default_value_t = 7)]
    hog_cell: usize,

    #[arg(long, default_value_t = 9)]
    hog_bins: usize,

    #[arg(long, default_value_t = 2)]
    hog_block: usize,

    #[arg(long, default_value_t = 16)]
    chist_bins: usize,

    /// `median`, `percentile:<p>` or `fixed:<eps>`.
    #[arg(long, default_value = "median")]
    heuristic: String,

    /// Floor applied to distances before taking logs (mc-d).
    #[arg(long, default_value_t = miaudit::attacks::DEFAULT_DELTA)]
    delta: f64,

    /// Use only the first N samples.
    #[arg(long)]
    n_samples: Option<usize>,

    /// KDE bandwidth; Scott's rule when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,

    /// Use `K((x − g)/h)` instead of `K((x − g)/h^d)` inside the kernel.
    #[arg(long)]
    kde_textbook: bool,

    /// Directory of `<record id>.miam` reconstruction batches (rec).
    #[arg(long)]
    reconstructions: Option<PathBuf>,

    /// Reconstructions per record (rec).
    #[arg(long)]
    n_reconstructions: Option<usize>,

    /// Simulated member residual scale (rec without --reconstructions).
    #[arg(long)]
    sigma_tr: Option<f64>,

    /// Simulated non-member residual scale.
    #[arg(long)]
    sigma_te: Option<f64>,

    /// Input scores (score-file).
    #[arg(long)]
    scores: Option<PathBuf>,

    /// Output score CSV.
    #[arg(long)]
    out: PathBuf,

    /// Also write the train/test membership of the scored records.
    #[arg(long)]
    membership_out: Option<PathBuf>,
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

fn image_shape(s: &str) -> anyhow::Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad --image-shape `{s}`")))?;
    match parts[..] {
        [h, w] => Ok((h, w, 1)),
        [h, w, c] => Ok((h, w, c)),
        _ => Err(usage(format!("bad --image-shape `{s}`"))),
    }
}

fn distance_spec(args: &Args, manifest: &mut Manifest) -> anyhow::Result<DistanceSpec> {
    let kind = match args.distance {
        Distance::Raw => DistanceKind::RawEuclid,
        Distance::Pca => {
            let path = args
                .pca_model
                .as_ref()
                .ok_or_else(|| usage("--distance pca needs --pca-model"))?;
            manifest.input(path, &[PathBuf::from(format!("{}.json", path.display()))])?;
            DistanceKind::Pca(PcaModel::load(path)?)
        }
        Distance::Hog => {
            let (h, w, c) = image_shape(&args.image_shape)?;
            DistanceKind::Hog(HogParams {
                cell_size: args.hog_cell,
                orientation_bins: args.hog_bins,
                block_size: args.hog_block,
                ..HogParams::for_shape(h, w, c)
            })
        }
        Distance::Chist => {
            let (_, _, c) = image_shape(&args.image_shape)?;
            DistanceKind::Chist(ChistParams {
                bins_per_channel: args.chist_bins,
                channels: c,
                ..ChistParams::default()
            })
        }
    };
    let spec = DistanceSpec::from(kind);
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

enum Samples {
    File(MatrixFile),
    Memory(Matrix),
}

impl Samples {
    fn open(path: &Path) -> anyhow::Result<Self> {
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        Ok(if is_csv {
            Samples::Memory(read_matrix(path)?)
        } else {
            Samples::File(MatrixFile::open(path)?)
        })
    }

    fn source(&self) -> &dyn SampleSource {
        match self {
            Samples::File(f) => f,
            Samples::Memory(m) => m,
        }
    }
}

fn load_records(
    path: &Option<PathBuf>,
    flag: &str,
    origin: Origin,
    manifest: &mut Manifest,
) -> anyhow::Result<RecordSet> {
    let path = path
        .as_ref()
        .ok_or_else(|| usage(format!("this attack needs --{flag}")))?;
    manifest.input(path, &[ids_sidecar(path)])?;
    Ok(read_record_set(path, origin)?)
}

pub fn run(args: Args, global: &Global) -> anyhow::Result<()> {
    let opts = global.compute();
    let mut manifest = Manifest::new(
        "attack",
        global,
        json!({
            "kind": value_name(args.kind),
            "distance": value_name(args.distance),
            "image_shape": args.image_shape,
            "hog": { "cell": args.hog_cell, "bins": args.hog_bins, "block": args.hog_block },
            "chist_bins": args.chist_bins,
            "heuristic": args.heuristic,
            "delta": args.delta,
            "n_samples": args.n_samples,
            "bandwidth": args.bandwidth,
            "kde_textbook": args.kde_textbook,
            "n_reconstructions": args.n_reconstructions,
            "sigma_tr": args.sigma_tr,
            "sigma_te": args.sigma_te,
        }),
    );

    let needs_records = args.kind != Kind::ScoreFile || args.train.is_some() || args.test.is_some();
    let records = if needs_records {
        let train = load_records(&args.train, "train", Origin::ClaimedTrain, &mut manifest)?;
        let test = load_records(&args.test, "test", Origin::ClaimedTest, &mut manifest)?;
        if train.dim() != test.dim() && args.kind != Kind::ScoreFile {
            return Err(usage(format!(
                "train records have {} columns, test records {}",
                train.dim(),
                test.dim()
            )));
        }
        Some((train, test))
    } else {
        None
    };

    let (scores, meta) = match args.kind {
        Kind::McEps | Kind::McD => {
            let (train, test) = records.as_ref().expect("loaded above");
            let spec = distance_spec(&args, &mut manifest)?;
            let heuristic = EpsilonHeuristic::parse(&args.heuristic).map_err(|e| usage(e.to_string()))?;
            let path = args
                .samples
                .as_ref()
                .ok_or_else(|| usage("this attack needs --samples"))?;
            manifest.input(path, &[])?;
            let samples = Samples::open(path)?;
            let variant = if args.kind == Kind::McEps {
                McVariant::McEpsilon
            } else {
                McVariant::McDistance
            };
            let mut config = McConfig::new(spec, heuristic, variant);
            config.delta = args.delta;
            config.n_samples = args.n_samples;
            config.validate().map_err(|e| usage(e.to_string()))?;
            let out = run_mc_attack(&[train, test], samples.source(), &config, &opts)?;
            let meta = ReportMeta {
                attack: variant.name().into(),
                distance: Some(config.distance.label()),
                heuristic: Some(heuristic.label()),
                resolved_epsilon: Some(out.epsilon),
                n_samples: Some(out.n_samples),
            };
            (out.scores, meta)
        }
        Kind::Kde => {
            let (train, test) = records.as_ref().expect("loaded above");
            let spec = distance_spec(&args, &mut manifest)?;
            let path = args
                .samples
                .as_ref()
                .ok_or_else(|| usage("this attack needs --samples"))?;
            manifest.input(path, &[])?;
            let samples = Samples::open(path)?;
            let form = if args.kde_textbook {
                KdeForm::Textbook
            } else {
                KdeForm::Verbatim
            };
            let out = run_kde_attack(
                &[train, test],
                samples.source(),
                &spec,
                args.bandwidth,
                form,
                &opts,
            )?;
            let meta = ReportMeta {
                attack: out.scores.attack_name().into(),
                distance: Some(spec.label()),
                heuristic: Some(format!("bandwidth={:?}", out.config.bandwidth)),
                resolved_epsilon: None,
                n_samples: Some(samples.source().len()),
            };
            (out.scores, meta)
        }
        Kind::Rec => {
            let (train, test) = records.as_ref().expect("loaded above");
            let (oracle, n): (Box<dyn ReconstructionOracle>, usize) =
                match (&args.reconstructions, args.sigma_tr, args.sigma_te) {
                    (Some(dir), None, None) => {
                        manifest.input_dir(dir)?;
                        let oracle = PrecomputedReconstructions::new(read_reconstruction_dir(dir)?);
                        let n = match args.n_reconstructions {
                            Some(n) => n,
                            None => oracle
                                .min_batch_len()
                                .ok_or_else(|| usage(format!("no reconstructions in {}", dir.display())))?,
                        };
                        (Box::new(oracle), n)
                    }
                    (None, Some(tr), Some(te)) => {
                        let (seed, source) = global.seed();
                        manifest.seed(seed, source);
                        let oracle = BiasedReconstructor::new(train.ids().iter().cloned(), tr, te, seed)
                            .map_err(|e| usage(e.to_string()))?;
                        (Box::new(oracle), args.n_reconstructions.unwrap_or(100))
                    }
                    _ => {
                        return Err(usage(
                            "rec needs either --reconstructions DIR or both --sigma-tr and --sigma-te",
                        ))
                    }
                };
            let scores = run_reconstruction_attack(&[train, test], oracle.as_ref(), n)?;
            let meta = ReportMeta {
                attack: "rec".into(),
                n_samples: Some(n),
                ..ReportMeta::default()
            };
            (scores, meta)
        }
        Kind::ScoreFile => {
            let path = args
                .scores
                .as_ref()
                .ok_or_else(|| usage("score-file needs --scores"))?;
            manifest.input(path, &[])?;
            let input = read_scores(path)?;
            let scores = match &records {
                Some((train, test)) => external_scores(&input, &[train, test])?,
                None => ScoreVector::new(
                    input.entries().to_vec(),
                    miaudit::attacks::SCORE_FILE_ATTACK,
                    input.config_digest(),
                )?,
            };
            let meta = ReportMeta {
                attack: miaudit::attacks::SCORE_FILE_ATTACK.into(),
                ..ReportMeta::default()
            };
            (scores, meta)
        }
    };

    write_scores(&scores, &args.out)?;
    manifest.output(&args.out);
    if let Some(path) = &args.membership_out {
        let (train, test) = records
            .as_ref()
            .ok_or_else(|| usage("--membership-out needs --train and --test"))?;
        write_membership(
            &Membership {
                train: train.ids().to_vec(),
                test: test.ids().to_vec(),
            },
            path,
        )?;
        manifest.output(path);
    }
    let mut results = serde_json::to_value(&meta)?;
    results["config_digest"] = json!(scores.config_digest());
    results["records"] = json!(scores.len());
    manifest.results(results);
    manifest.write(&manifest_path(&args.out))?;

    match meta.resolved_epsilon {
        Some(eps) => println!(
            "{}: scored {} records (ε = {eps:?}), written to {}",
            meta.attack,
            scores.len(),
            args.out.display()
        ),
        None => println!(
            "{}: scored {} records, written to {}",
            meta.attack,
            scores.len(),
            args.out.display()
        ),
    }
    Ok(())
}
