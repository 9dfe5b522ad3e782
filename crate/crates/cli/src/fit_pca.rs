use std::path::PathBuf;

use miaudit::features::{pca_fit, PcaOptions};
use miaudit::io::read_matrix;
use serde_json::json;

use crate::manifest::{manifest_path, Manifest};
use crate::Global;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Reference data (binary matrix or .csv), one record per row.
    #[arg(long)]
    reference: PathBuf,

    /// Number of components kept.
    #[arg(long, default_value_t = 40)]
    k: usize,

    /// Scale projections to unit variance per component.
    #[arg(long)]
    whiten: bool,

    /// Model file; metadata goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args, global: &Global) -> anyhow::Result<()> {
    let reference = read_matrix(&args.reference)?;
    let options = PcaOptions { whiten: args.whiten };
    let model = pca_fit(reference.view(), args.k, options)?;
    model.save(&args.out)?;

    let mut manifest = Manifest::new("fit-pca", global, json!({ "k": args.k, "whiten": args.whiten }));
    manifest.input(&args.reference, &[])?;
    manifest.output(&args.out);
    manifest.results(json!({
        "dim": model.dim(),
        "eigenvalues": model.eigenvalues(),
    }));
    manifest.write(&manifest_path(&args.out))?;
    println!(
        "fitted PCA: {} → {} components, written to {}",
        model.dim(),
        model.k(),
        args.out.display()
    );
    Ok(())
}
