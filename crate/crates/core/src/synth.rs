//! Synthetic generative models with a controllable degree of overfitting.
//!
//! [`MemorizingGenerator`] emits noisy copies of training records with
//! probability ρ and fresh population draws otherwise. [`BiasedReconstructor`]
//! reconstructs members more precisely than non-members. Both are seeded
//! and deterministic.

use std::collections::HashSet;

use ndarray::{Array1, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};
use statrs::function::gamma::ln_gamma;

use crate::attacks::reconstruction::ReconstructionOracle;
use crate::scenarios::{Membership, TrialProvider};
use crate::{Error, Matrix, Origin, ReconstructionBatch, RecordSet, Result, SampleMatrix};

/// Mixture of isotropic Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Matrix,
    scales: Vec<f64>,
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl GaussianMixture {
    /// Component `k` is `N(means[k], scales[k]² I)` with weight `weights[k]`.
    pub fn new(means: Matrix, scales: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let k = means.nrows();
        if k == 0 || means.ncols() == 0 {
            return Err(Error::Config(
                "mixture needs at least one component and dimension".into(),
            ));
        }
        if scales.len() != k || weights.len() != k {
            return Err(Error::Config(format!(
                "{k} component means but {} scales and {} weights",
                scales.len(),
                weights.len()
            )));
        }
        if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("component scales must be finite and ≥ 0".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("mixture weights must be finite and ≥ 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        crate::data::ensure_finite(means.view(), "mixture means")?;
        let index = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            means,
            scales,
            weights,
            index,
        })
    }

    /// `components` equally weighted unit-scale components whose means are
    /// drawn from `N(0, spread² I)`.
    pub fn random(dim: usize, components: usize, spread: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let means = Matrix::from_shape_simple_fn((components, dim), || {
            spread * rng.sample::<f64, _>(StandardNormal)
        });
        Self::new(
            means,
            vec![1.0; components],
            vec![1.0 / components as f64; components],
        )
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mean of the mixture.
    pub fn mean(&self) -> Array1<f64> {
        let mut m = Array1::zeros(self.dim());
        for (row, w) in self.means.rows().into_iter().zip(&self.weights) {
            m.scaled_add(*w, &row);
        }
        m
    }

    fn fill(&self, out: &mut [f64], rng: &mut impl Rng) {
        let k = self.index.sample(rng);
        let s = self.scales[k];
        for (o, mu) in out.iter_mut().zip(self.means.row(k)) {
            *o = mu + s * rng.sample::<f64, _>(StandardNormal);
        }
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Matrix {
        let mut out = Matrix::zeros((n, self.dim()));
        for mut row in out.rows_mut() {
            self.fill(row.as_slice_mut().expect("standard layout"), rng);
        }
        out
    }
}

/// Generator that memorises its training data at rate ρ.
#[derive(Debug, Clone)]
pub struct MemorizingGenerator {
    pub train_pool: Matrix,
    pub memorization_rate: f64,
    pub noise_scale: f64,
    pub population: GaussianMixture,
    pub seed: u64,
}

impl MemorizingGenerator {
    pub fn validate(&self) -> Result<()> {
        let rho = self.memorization_rate;
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!(
                "memorization rate must lie in [0, 1], got {rho}"
            )));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::Config(format!(
                "noise scale must be finite and ≥ 0, got {}",
                self.noise_scale
            )));
        }
        if rho > 0.0 && self.train_pool.nrows() == 0 {
            return Err(Error::Config(
                "memorization rate > 0 needs a non-empty train pool".into(),
            ));
        }
        if self.train_pool.nrows() > 0 && self.train_pool.ncols() != self.population.dim() {
            return Err(Error::Config(format!(
                "train pool has {} columns, population has {}",
                self.train_pool.ncols(),
                self.population.dim()
            )));
        }
        Ok(())
    }

    /// `n` samples together with the train-pool row each was copied from
    /// (`None` for population draws).
    pub fn generate_labeled(&self, n: usize) -> Result<(SampleMatrix, Vec<Option<usize>>)> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Config("n must be ≥ 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.population.dim();
        let mut out = Matrix::zeros((n, d));
        let mut sources = Vec::with_capacity(n);
        for mut row in out.rows_mut() {
            let row = row.as_slice_mut().expect("standard layout");
            if rng.random_bool(self.memorization_rate) {
                let i = rng.random_range(0..self.train_pool.nrows());
                for (o, v) in row.iter_mut().zip(self.train_pool.row(i)) {
                    *o = v + self.noise_scale * rng.sample::<f64, _>(StandardNormal);
                }
                sources.push(Some(i));
            } else {
                self.population.fill(row, &mut rng);
                sources.push(None);
            }
        }
        let note = format!(
            "memorizing generator rho={} sigma={} seed={}",
            self.memorization_rate, self.noise_scale, self.seed
        );
        Ok((SampleMatrix::new(out, note)?, sources))
    }

    pub fn generate(&self, n: usize) -> Result<SampleMatrix> {
        Ok(self.generate_labeled(n)?.0)
    }
}

/// Reconstructs members with residual scale `σ_tr` and everyone else with
/// the larger `σ_te`.
#[derive(Debug, Clone)]
pub struct BiasedReconstructor {
    member_ids: HashSet<String>,
    sigma_member: f64,
    sigma_nonmember: f64,
    seed: u64,
}

impl BiasedReconstructor {
    pub fn new(
        member_ids: impl IntoIterator<Item = String>,
        sigma_member: f64,
        sigma_nonmember: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(sigma_member > 0.0 && sigma_nonmember > sigma_member && sigma_nonmember.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < σ_tr < σ_te, got σ_tr = {sigma_member}, σ_te = {sigma_nonmember}"
            )));
        }
        Ok(Self {
            member_ids: member_ids.into_iter().collect(),
            sigma_member,
            sigma_nonmember,
            seed,
        })
    }

    pub fn residual_scale(&self, record_id: &str) -> f64 {
        if self.member_ids.contains(record_id) {
            self.sigma_member
        } else {
            self.sigma_nonmember
        }
    }

    fn rng_for(&self, record_id: &str) -> ChaCha8Rng {
        let digest = Sha256::new()
            .chain_update(self.seed.to_le_bytes())
            .chain_update(record_id.as_bytes())
            .finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}

impl ReconstructionOracle for BiasedReconstructor {
    fn reconstruct(&self, record_id: &str, x: ArrayView1<'_, f64>, n: usize) -> Result<ReconstructionBatch> {
        let s = self.residual_scale(record_id);
        let mut rng = self.rng_for(record_id);
        let recs = Matrix::from_shape_fn((n, x.len()), |(_, j)| {
            x[j] + s * rng.sample::<f64, _>(StandardNormal)
        });
        ReconstructionBatch::new(record_id, recs)
    }

    fn reentrant(&self) -> bool {
        true
    }
}

/// Mean of the norm of a `k`-dimensional isotropic Gaussian with scale `σ`:
/// `σ √2 Γ((k+1)/2) / Γ(k/2)`.
pub fn chi_mean(k: usize, sigma: f64) -> f64 {
    let k = k as f64;
    sigma * 2f64.sqrt() * (ln_gamma((k + 1.0) / 2.0) - ln_gamma(k / 2.0)).exp()
}

fn labelled_sets(train: Matrix, test: Matrix) -> Result<(RecordSet, RecordSet, Membership)> {
    let train = RecordSet::with_prefix("tr", train, Origin::ClaimedTrain)?;
    let test = RecordSet::with_prefix("te", test, Origin::ClaimedTest)?;
    let membership = Membership {
        train: train.ids().to_vec(),
        test: test.ids().to_vec(),
    };
    Ok((train, test, membership))
}

/// Records and generator output of one synthetic audit.
#[derive(Debug, Clone)]
pub struct AuditDraw {
    pub train: RecordSet,
    pub test: RecordSet,
    pub samples: SampleMatrix,
}

/// Per trial: draws a training pool from the population, trains a
/// [`MemorizingGenerator`] on it, and audits `M` pool records against `M`
/// fresh population records.
#[derive(Debug, Clone)]
pub struct MemorizationScenario {
    pub population: GaussianMixture,
    pub pool_size: usize,
    pub memorization_rate: f64,
    pub noise_scale: f64,
    pub n_samples: usize,
}

impl TrialProvider for MemorizationScenario {
    type Data = AuditDraw;

    fn draw(&self, _: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<(AuditDraw, Membership)> {
        if self.pool_size < m {
            return Err(Error::InsufficientData(format!(
                "train pool of {} cannot supply M = {m} members",
                self.pool_size
            )));
        }
        let pool = self.population.sample(self.pool_size, rng);
        let generator = MemorizingGenerator {
            train_pool: pool,
            memorization_rate: self.memorization_rate,
            noise_scale: self.noise_scale,
            population: self.population.clone(),
            seed: rng.random(),
        };
        let samples = generator.generate(self.n_samples)?;
        let picked = rand::seq::index::sample(rng, self.pool_size, m).into_vec();
        let train = generator.train_pool.select(ndarray::Axis(0), &picked);
        let test = self.population.sample(m, rng);
        let (train, test, membership) = labelled_sets(train, test)?;
        Ok((AuditDraw { train, test, samples }, membership))
    }
}

/// Records and oracle of one synthetic reconstruction audit.
#[derive(Debug, Clone)]
pub struct ReconstructionDraw {
    pub train: RecordSet,
    pub test: RecordSet,
    pub oracle: BiasedReconstructor,
}

/// Per trial: `M` member and `M` non-member population records and a
/// [`BiasedReconstructor`] that knows the members.
#[derive(Debug, Clone)]
pub struct ReconstructionScenario {
    pub population: GaussianMixture,
    pub sigma_member: f64,
    pub sigma_nonmember: f64,
}

impl TrialProvider for ReconstructionScenario {
    type Data = ReconstructionDraw;

    fn draw(&self, _: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<(ReconstructionDraw, Membership)> {
        let train = self.population.sample(m, rng);
        let test = self.population.sample(m, rng);
        let (train, test, membership) = labelled_sets(train, test)?;
        let oracle = BiasedReconstructor::new(
            membership.train.iter().cloned(),
            self.sigma_member,
            self.sigma_nonmember,
            rng.random(),
        )?;
        Ok((ReconstructionDraw { train, test, oracle }, membership))
    }
}
