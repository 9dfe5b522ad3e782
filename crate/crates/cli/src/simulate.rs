use std::path::PathBuf;

use anyhow::Context;
use clap::{Subcommand, ValueEnum};
use miaudit::attacks::ReconstructionOracle;
use miaudit::io::{
    ids_sidecar, read_record_set, write_matrix_as, write_reconstruction_batch, write_record_set, Dtype,
};
use miaudit::synth::{BiasedReconstructor, GaussianMixture, MemorizingGenerator};
use miaudit::{Matrix, Origin, RecordSet};
use rand::SeedableRng;
use serde_json::json;

use crate::manifest::{manifest_path, Manifest};
use crate::Global;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DtypeArg {
    F32,
    F64,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F32 => Dtype::F32,
            DtypeArg::F64 => Dtype::F64,
        }
    }
}

/// Gaussian-mixture population; identical flags give an identical mixture.
#[derive(Debug, Clone, clap::Args)]
pub struct PopulationArgs {
    #[arg(long, default_value_t = 40)]
    dim: usize,

    #[arg(long, default_value_t = 10)]
    components: usize,

    /// Standard deviation of the component means around the origin.
    #[arg(long, default_value_t = 3.0)]
    spread: f64,

    #[arg(long, default_value_t = 0)]
    population_seed: u64,
}

impl PopulationArgs {
    fn build(&self) -> anyhow::Result<GaussianMixture> {
        Ok(GaussianMixture::random(
            self.dim,
            self.components,
            self.spread,
            self.population_seed,
        )?)
    }

    fn config(&self) -> serde_json::Value {
        json!({
            "dim": self.dim,
            "components": self.components,
            "spread": self.spread,
            "population_seed": self.population_seed,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw records from the population.
    Population {
        #[command(flatten)]
        population: PopulationArgs,

        #[arg(long)]
        n: usize,

        /// Id prefix; defaults to `<file stem>-`.
        #[arg(long)]
        prefix: Option<String>,

        #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
        dtype: DtypeArg,

        #[arg(long)]
        out: PathBuf,
    },
    /// Draw samples from a generator that memorises its train pool.
    Samples {
        #[command(flatten)]
        population: PopulationArgs,

        /// Training records the generator may copy.
        #[arg(long)]
        train_pool: Option<PathBuf>,

        /// Probability that a sample is a noisy copy of a train record.
        #[arg(long)]
        rho: f64,

        /// Noise added to copied records.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,

        #[arg(long)]
        n: usize,

        #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
        dtype: DtypeArg,

        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct records, members more precisely than non-members.
    Reconstructions {
        /// Members.
        #[arg(long)]
        train: PathBuf,

        /// Non-members.
        #[arg(long)]
        test: PathBuf,

        #[arg(long)]
        sigma_tr: f64,

        #[arg(long)]
        sigma_te: f64,

        /// Reconstructions per record.
        #[arg(long)]
        n: usize,

        #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
        dtype: DtypeArg,

        #[arg(long)]
        out_dir: PathBuf,
    },
}

pub fn run(cmd: Command, global: &Global) -> anyhow::Result<()> {
    let (seed, seed_source) = global.seed();
    match cmd {
        Command::Population {
            population,
            n,
            prefix,
            dtype,
            out,
        } => {
            let mix = population.build()?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let prefix = prefix.unwrap_or_else(|| {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
                format!("{stem}-")
            });
            let set = RecordSet::with_prefix(&prefix, mix.sample(n, &mut rng), Origin::Unlabeled)?;
            write_record_set(&set, &out, dtype.into())?;

            let mut manifest = Manifest::new(
                "simulate population",
                global,
                json!({ "population": population.config(), "n": n, "prefix": prefix }),
            );
            manifest.seed(seed, seed_source);
            manifest.output(&out);
            manifest.output(&ids_sidecar(&out));
            manifest.write(&manifest_path(&out))?;
            println!("wrote {n} population records to {}", out.display());
        }
        Command::Samples {
            population,
            train_pool,
            rho,
            sigma,
            n,
            dtype,
            out,
        } => {
            let mut manifest = Manifest::new(
                "simulate samples",
                global,
                json!({ "population": population.config(), "rho": rho, "sigma": sigma, "n": n }),
            );
            manifest.seed(seed, seed_source);
            let pool = match &train_pool {
                Some(path) => {
                    manifest.input(path, &[ids_sidecar(path)])?;
                    read_record_set(path, Origin::ClaimedTrain)?.data().clone()
                }
                None => Matrix::zeros((0, population.dim)),
            };
            let generator = MemorizingGenerator {
                train_pool: pool,
                memorization_rate: rho,
                noise_scale: sigma,
                population: population.build()?,
                seed,
            };
            let samples = generator.generate(n)?;
            write_matrix_as(samples.data().view(), &out, dtype.into())?;
            manifest.output(&out);
            manifest.write(&manifest_path(&out))?;
            println!("wrote {n} generator samples to {}", out.display());
        }
        Command::Reconstructions {
            train,
            test,
            sigma_tr,
            sigma_te,
            n,
            dtype,
            out_dir,
        } => {
            let mut manifest = Manifest::new(
                "simulate reconstructions",
                global,
                json!({ "sigma_tr": sigma_tr, "sigma_te": sigma_te, "n": n }),
            );
            manifest.seed(seed, seed_source);
            manifest.input(&train, &[ids_sidecar(&train)])?;
            manifest.input(&test, &[ids_sidecar(&test)])?;
            let train = read_record_set(&train, Origin::ClaimedTrain)?;
            let test = read_record_set(&test, Origin::ClaimedTest)?;
            let oracle = BiasedReconstructor::new(train.ids().iter().cloned(), sigma_tr, sigma_te, seed)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            for set in [&train, &test] {
                for (i, id) in set.ids().iter().enumerate() {
                    let batch = oracle.reconstruct(id, set.row(i), n)?;
                    write_reconstruction_batch(&batch, &out_dir, dtype.into())?;
                }
            }
            manifest.output(&out_dir);
            manifest.write(&out_dir.join("manifest.json"))?;
            println!(
                "wrote {n} reconstructions for each of {} records to {}",
                train.len() + test.len(),
                out_dir.display()
            );
        }
    }
    Ok(())
}
