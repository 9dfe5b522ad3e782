//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use miaudit::attacks::{
    kde_score, mc_distance_score_with, run_mc_attack, run_reconstruction_attack, EpsilonHeuristic, KdeConfig,
    KdeForm, McConfig, McVariant,
};
use miaudit::distances::{pairwise_min_distances, ComputeOptions, DistanceSpec};
use miaudit::features::{pca_fit, PcaOptions};
use miaudit::scenarios::stats::{anova_f, binomial_interval, binomial_upper_tail};
use miaudit::scenarios::{
    majority_decision, median_decision, run_trials, top_m_indices, AggregateReport, ReportMeta,
    ScenarioConfig,
};
use miaudit::synth::{
    chi_mean, AuditDraw, GaussianMixture, MemorizationScenario, ReconstructionDraw, ReconstructionScenario,
};
use miaudit::{Matrix, Origin, RecordSet, Result, ScoreVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn mc_config(variant: McVariant) -> McConfig {
    McConfig::new(DistanceSpec::raw(), EpsilonHeuristic::Median, variant)
}

fn top_set(scores: &ScoreVector, m: usize, seed: u64) -> HashSet<String> {
    let values: Vec<f64> = scores.entries().iter().map(|(_, s)| *s).collect();
    top_m_indices(&values, m, &mut ChaCha8Rng::seed_from_u64(seed))
        .into_iter()
        .map(|i| scores.entries()[i].0.clone())
        .collect()
}

fn distinct(values: &[f64]) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] < w[1])
}

/// Random MC instance: 2M = 40 records, 2000 samples, uniform on `[0, 1]^d`.
/// Nearest-sample distances stay below 1, where MC-d terms are positive.
struct McInstance {
    train: RecordSet,
    test: RecordSet,
    samples: Matrix,
}

fn mc_instance(rng: &mut ChaCha8Rng) -> McInstance {
    let d = rng.random_range(2..=8);
    let train = common::uniform_matrix(20, d, 1.0, rng);
    let test = common::uniform_matrix(20, d, 1.0, rng);
    McInstance {
        train: RecordSet::with_prefix("tr", train, Origin::ClaimedTrain).unwrap(),
        test: RecordSet::with_prefix("te", test, Origin::ClaimedTest).unwrap(),
        samples: common::uniform_matrix(2000, d, 1.0, rng),
    }
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let start = Instant::now();
    let opts = ComputeOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut same_top, mut exactly_m, mut eps_below_one) = (0, 0, 0);
    let instances = 500usize;
    let m = 20;
    for i in 0..instances {
        let inst = loop {
            let inst = mc_instance(&mut rng);
            let union = RecordSet::concat(&[&inst.train, &inst.test]).unwrap();
            let mins = pairwise_min_distances(union.data().view(), &inst.samples, &opts).unwrap();
            if distinct(&mins) {
                break inst;
            }
        };
        let eps = run_mc_attack(
            &[&inst.train, &inst.test],
            &inst.samples,
            &mc_config(McVariant::McEpsilon),
            &opts,
        )
        .unwrap();
        let dist = run_mc_attack(
            &[&inst.train, &inst.test],
            &inst.samples,
            &mc_config(McVariant::McDistance),
            &opts,
        )
        .unwrap();
        eps_below_one += (eps.epsilon < 1.0) as usize;
        same_top += (top_set(&eps.scores, m, i as u64) == top_set(&dist.scores, m, i as u64 + 1)) as usize;
        let positive = |s: &ScoreVector| s.entries().iter().filter(|(_, v)| *v > 0.0).count();
        exactly_m += (positive(&eps.scores) == m && positive(&dist.scores) == m) as usize;
    }
    let elapsed = start.elapsed();
    let c1 = check(
        same_top == instances && eps_below_one == instances && within(elapsed, Duration::from_secs(30)),
        format!(
            "top-M sets equal in {same_top}/{instances} instances (ε < 1 in {eps_below_one}), {:.1} s for criteria 1–2",
            elapsed.as_secs_f64()
        ),
    );
    let c2 = check(
        exactly_m == instances,
        format!("exactly M positive scores (both variants) in {exactly_m}/{instances} instances"),
    );
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let instances = 10_000;
    let mut agree = 0;
    let mut ties = 0;
    for _ in 0..instances {
        let m = rng.random_range(1..=40);
        let a: Vec<String> = (0..m).map(|i| format!("a{i}")).collect();
        let b: Vec<String> = (0..m).map(|i| format!("b{i}")).collect();
        let scores = loop {
            let entries: Vec<(String, f64)> = a
                .iter()
                .chain(&b)
                .map(|id| (id.clone(), rng.random::<f64>()))
                .collect();
            let values: Vec<f64> = entries.iter().map(|(_, s)| *s).collect();
            if distinct(&values) {
                break ScoreVector::new(entries, "random", "").unwrap();
            }
        };
        let (vote, _, _) = majority_decision(&scores, &a, &b, &mut rng).unwrap();
        let median = median_decision(&scores, &a, &b).unwrap();
        agree += (vote == median) as usize;
        ties += vote.is_none() as usize;
    }
    check(
        agree == instances,
        format!("majority vote and median rule agree on {agree}/{instances} instances ({ties} even splits)"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let instances = 100;
    let mut equal = 0;
    for _ in 0..instances {
        let d = rng.random_range(1..=4);
        let h = rng.random_range(0.6..1.4f64);
        let records = common::uniform_matrix(20, d, 2.0, &mut rng);
        let samples = common::uniform_matrix(rng.random_range(5..60), d, 2.0, &mut rng);
        let cfg = KdeConfig {
            bandwidth: h,
            form: KdeForm::Verbatim,
        };
        let w = h.powi(d as i32);
        // d(x, g) = exp(−h^d K((x − g)/h^d)).
        let kernel_distance = |a: &[f64], b: &[f64]| {
            let sq = common::euclid(a, b).powi(2) / (w * w);
            let k = (2.0 * std::f64::consts::PI).powf(-0.5 * d as f64) * (-0.5 * sq).exp();
            (-w * k).exp()
        };
        let eps = records
            .rows()
            .into_iter()
            .flat_map(|r| {
                let r = r.to_vec();
                samples
                    .rows()
                    .into_iter()
                    .map(move |s| kernel_distance(&r, &s.to_vec()))
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max);
        let kde: Vec<f64> = records
            .rows()
            .into_iter()
            .map(|r| kde_score(r, samples.view(), &cfg))
            .collect();
        let mcd: Vec<f64> = records
            .rows()
            .into_iter()
            .map(|r| mc_distance_score_with(r, samples.view(), eps, 1e-12, kernel_distance))
            .collect();
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[j].total_cmp(&v[i]));
            idx
        };
        equal += (rank(&kde) == rank(&mcd)) as usize;
    }
    check(
        equal == instances,
        format!("KDE and transformed MC-d rankings equal on {equal}/{instances} instances"),
    )
}

fn memorization(rho: f64) -> MemorizationScenario {
    MemorizationScenario {
        population: GaussianMixture::random(40, 10, 3.0, 40).unwrap(),
        pool_size: 1000,
        memorization_rate: rho,
        noise_scale: 0.1,
        n_samples: 2000,
    }
}

fn run_memorization(rho: f64, trials: usize, seed: u64) -> AggregateReport {
    let opts = ComputeOptions::default();
    let config = mc_config(McVariant::McEpsilon);
    let runner = |d: &AuditDraw, _: &mut ChaCha8Rng| -> Result<ScoreVector> {
        Ok(run_mc_attack(&[&d.train, &d.test], &d.samples, &config, &opts)?.scores)
    };
    let cfg = ScenarioConfig { m: 100, trials, seed };
    run_trials(&memorization(rho), &runner, &cfg, ReportMeta::default()).unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let r = run_memorization(0.0, 200, 5);
    let elapsed = start.elapsed();
    let (s_lo, s_hi) = binomial_interval(200 * 100, 0.5, 0.01).unwrap();
    let (t_lo, t_hi) = binomial_interval(200, 0.5, 0.01).unwrap();
    let ok = (s_lo..=s_hi).contains(&r.single_mean)
        && (t_lo..=t_hi).contains(&r.set_mean)
        && within(elapsed, Duration::from_secs(120));
    check(
        ok,
        format!(
            "ρ = 0: single {:.4} in [{s_lo:.4}, {s_hi:.4}], set {:.3} in [{t_lo:.3}, {t_hi:.3}], {:.1} s",
            r.single_mean,
            r.set_mean,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let acc: Vec<f64> = [0.0, 0.5, 0.9]
        .iter()
        .enumerate()
        .map(|(i, &rho)| run_memorization(rho, 200, 60 + i as u64).set_mean)
        .collect();
    let elapsed = start.elapsed();
    let ok = acc[0] <= acc[1]
        && acc[1] <= acc[2]
        && acc[0] < acc[2]
        && acc[2] >= 0.90
        && within(elapsed, Duration::from_secs(300));
    check(
        ok,
        format!(
            "set MI at ρ = 0, 0.5, 0.9: {:.3}, {:.3}, {:.3}, {:.1} s",
            acc[0],
            acc[1],
            acc[2],
            elapsed.as_secs_f64()
        ),
    )
}

/// Probability of labelling one record correctly with the optimal
/// threshold, when member and non-member scores are normal with the given
/// means and standard deviations: `1 − ½ ∫ min(f₁, f₂)`.
fn bayes_rate(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    let pdf = |x: f64, m: f64, s: f64| {
        (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    };
    let lo = (m1 - 12.0 * s1).min(m2 - 12.0 * s2);
    let hi = (m1 + 12.0 * s1).max(m2 + 12.0 * s2);
    let steps = 200_000;
    let dx = (hi - lo) / steps as f64;
    let overlap: f64 = (0..=steps)
        .map(|i| {
            let x = lo + i as f64 * dx;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * pdf(x, m1, s1).min(pdf(x, m2, s2))
        })
        .sum::<f64>()
        * dx;
    1.0 - 0.5 * overlap
}

fn criterion_7() -> Outcome {
    let k = 40;
    let n = 1000;
    let (sigma_tr, sigma_te) = (0.5, 1.0);
    let scenario = ReconstructionScenario {
        population: GaussianMixture::random(k, 10, 3.0, 7).unwrap(),
        sigma_member: sigma_tr,
        sigma_nonmember: sigma_te,
    };
    let runner = |d: &ReconstructionDraw, _: &mut ChaCha8Rng| -> Result<ScoreVector> {
        run_reconstruction_attack(&[&d.train, &d.test], &d.oracle, n)
    };
    let cfg = ScenarioConfig {
        m: 100,
        trials: 100,
        seed: 7,
    };
    let r = run_trials(&scenario, &runner, &cfg, ReportMeta::default()).unwrap();
    // The score is minus the mean of n chi-distributed residual norms.
    let chi_sd = |s: f64| (s * s * k as f64 - chi_mean(k, s).powi(2)).sqrt() / (n as f64).sqrt();
    let bayes = bayes_rate(
        -chi_mean(k, sigma_tr),
        chi_sd(sigma_tr),
        -chi_mean(k, sigma_te),
        chi_sd(sigma_te),
    );
    let ok = (r.single_mean - bayes).abs() <= 0.02 && r.set_mean >= 0.99;
    check(
        ok,
        format!(
            "single {:.4} vs Bayes rate {bayes:.4}, set {:.3} over {} trials",
            r.single_mean, r.set_mean, r.trials
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, rho) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let r = run_memorization(rho, 200, 80 + i as u64);
        let successes = r.per_trial.iter().filter(|t| t.set_correct).count() as u64;
        let p = binomial_upper_tail(successes, 200, r.single_mean).unwrap();
        ok &= r.set_mean > r.single_mean && p < 0.01;
        lines.push(format!(
            "ρ = {rho}: set {:.3} vs single {:.3} (p = {p:.1e})",
            r.set_mean, r.single_mean
        ));
    }
    check(ok, lines.join("; "))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // PCA against a Jacobi eigendecomposition of the covariance.
    let x = Array2::from_shape_simple_fn((100, 50), || rng.random_range(-1.0..1.0f64));
    let model = pca_fit(x.view(), 50, PcaOptions::default()).unwrap();
    let (values, vectors) = common::jacobi_eigen(&common::covariance(x.view()));
    let mut pca_err = 0.0f64;
    for (r, comp) in model.components().rows().into_iter().enumerate() {
        let dot: f64 = comp.iter().zip(vectors.row(r)).map(|(a, b)| a * b).sum();
        let sign = dot.signum();
        for (a, b) in comp.iter().zip(vectors.row(r)) {
            pca_err = pca_err.max((a - sign * b).abs());
        }
        pca_err = pca_err.max((model.eigenvalues()[r] - values[r]).abs());
    }

    // Pairwise minimum distances against the double loop, bit for bit.
    let opts = ComputeOptions {
        mem_budget: 8 * 50 * 7,
        threads: None,
    };
    let mut exact = 0;
    let instances = 50;
    for _ in 0..instances {
        let d = rng.random_range(1..=16);
        let records = common::uniform_matrix(20, d, 10.0, &mut rng);
        let samples = common::uniform_matrix(50, d, 10.0, &mut rng);
        let fast = pairwise_min_distances(records.view(), &samples, &opts).unwrap();
        let slow = common::naive_min_distances(records.view(), samples.view());
        exact += (fast == slow) as usize;
    }

    let anova = anova_f(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
    let ok = pca_err <= 1e-6 && exact == instances && anova.f == 13.5;
    check(
        ok,
        format!(
            "PCA max deviation {pca_err:.2e}; min distances exact on {exact}/{instances} instances; ANOVA F = {}",
            anova.f
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let raw_dim = 64;
    let population = GaussianMixture::random(raw_dim, 10, 3.0, 10).unwrap();
    let reference = population.sample(5000, &mut rng);
    let model = pca_fit(reference.view(), 40, PcaOptions::default()).unwrap();
    let samples = population.sample(1_000_000, &mut rng);
    let train = RecordSet::with_prefix("tr", population.sample(100, &mut rng), Origin::ClaimedTrain).unwrap();
    let test = RecordSet::with_prefix("te", population.sample(100, &mut rng), Origin::ClaimedTest).unwrap();
    let config = McConfig::new(
        DistanceSpec::pca(model),
        EpsilonHeuristic::Median,
        McVariant::McEpsilon,
    );
    let threads = rayon::current_num_threads();

    let start = Instant::now();
    let out = run_mc_attack(&[&train, &test], &samples, &config, &ComputeOptions::default()).unwrap();
    let elapsed = start.elapsed();
    check(
        out.scores.len() == 200 && within(elapsed, Duration::from_secs(120)),
        format!(
            "200 records × 10^6 samples in 40-dim PCA space: {:.1} s on {threads} thread(s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let (c1, c2) = criteria_1_and_2();
    results.push((1, c1));
    results.push((2, c2));
    results.push((3, criterion_3()));
    results.push((4, criterion_4()));
    results.push((5, criterion_5()));
    results.push((6, criterion_6()));
    results.push((7, criterion_7()));
    results.push((8, criterion_8()));
    results.push((9, criterion_9()));
    results.push((10, criterion_10()));

    let mut failed = 0;
    for (n, o) in &results {
        println!(
            "criterion {n:>2}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += (!o.pass) as usize;
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
