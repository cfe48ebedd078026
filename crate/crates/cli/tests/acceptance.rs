//! Acceptance gate: every criterion runs at its stated scale and tolerance
//! and prints one `ACCEPTANCE <id>: PASS|FAIL — detail` line (visible with
//! `--nocapture`, and always shown for failing criteria).
//!
//! The table-reproduction criteria (1–4) drive exactly the runs encoded by
//! the `repro/` scripts: the same data seeds through the CLI's simulation
//! stream and the same chain seeds, so `repro/table1_gumbel.sh` and
//! criterion 1 are one computation. Heavy fits (20k iterations, 10k
//! burn-in, M=1, uniform base measure, n=1000) are shared across criteria
//! through lazily initialised fixtures.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use rgpu_copula::data::{simulate_mixture, CopulaSample, MixtureSimConfig};
use rgpu_copula::evaluate::{kendall_tau, lps, predictive_sample};
use rgpu_copula::numeric::{gauss_legendre_unit, integrate, normal_cdf};
use rgpu_copula::parametric::{tau_to_param, ParametricCopula, ParametricFamily};
use rgpu_copula::partition::{mixture_log_density, GeneratingFamily, GeneratingSpec};
use rgpu_copula::rng::{task_rng, STREAM_SIMULATE};
use rgpu_copula::sampler::{run_chain, Chain, PosteriorDraw, SamplerConfig};

fn check(id: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {id}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id}: {detail}");
}

fn fit(
    data: &CopulaSample,
    family: GeneratingFamily,
    rotated: bool,
    seed: u64,
) -> Vec<PosteriorDraw> {
    let mut cfg = SamplerConfig::new(family, seed);
    cfg.rotated = rotated;
    // Spec scale: 20k iterations, 10k burn-in, M = 1, uniform base measure.
    let (draws, _) = run_chain(data, &cfg).expect("chain runs");
    draws
}

struct GumbelStudy {
    test: CopulaSample,
    negbinc: Vec<Vec<PosteriorDraw>>, // chain seeds 1..=3
    bernstein: Vec<Vec<PosteriorDraw>>,
}

/// Simulate exactly what `rgpu-copula simulate --seed <seed>` produces.
fn cli_sample(copula: &ParametricCopula, n: usize, seed: u64) -> CopulaSample {
    let mut rng = task_rng(seed, STREAM_SIMULATE);
    copula.sample(n, &mut rng).unwrap()
}

fn gumbel_study() -> &'static GumbelStudy {
    static STUDY: OnceLock<GumbelStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        // The repro/table1_gumbel.sh runs: data seeds 11 (train) and 12
        // (test), chain seeds 1 (negbinc) and 2 (bernsteincbp); chain seed 3
        // extends both models for the three-seed tail-capture average.
        let param = tau_to_param(ParametricFamily::Gumbel, 0.6).unwrap();
        let truth = ParametricCopula::new(ParametricFamily::Gumbel, param, false).unwrap();
        let train = cli_sample(&truth, 1000, 11);
        let test = cli_sample(&truth, 1000, 12);
        let negbinc = (1..=3)
            .map(|seed| fit(&train, GeneratingFamily::NegBinomial, false, seed))
            .collect();
        let bernstein = (1..=3)
            .map(|seed| fit(&train, GeneratingFamily::Binomial, false, seed))
            .collect();
        GumbelStudy { test, negbinc, bernstein }
    })
}

#[test]
fn acceptance_1_table1_gumbel_sign_and_values() {
    let study = gumbel_study();
    // Script pairing: negbinc at chain seed 1, bernsteincbp at chain seed 2.
    let n = lps("negbinc", &study.negbinc[0], GeneratingFamily::NegBinomial, false, &study.test)
        .unwrap()
        .per_point;
    let b = lps("bernstein", &study.bernstein[1], GeneratingFamily::Binomial, false, &study.test)
        .unwrap()
        .per_point;
    let sign = n > b;
    let n_ok = (n - 0.5458).abs() <= 0.12;
    let b_ok = (b - 0.4603).abs() <= 0.12;
    check(
        "1 (gumbel tau=0.6 n=1000)",
        sign && n_ok && b_ok,
        &format!(
            "negbinc {n:.4} (target 0.5458±0.12: {n_ok}), bernsteincbp {b:.4} \
             (target 0.4603±0.12: {b_ok}), sign negbinc>bernsteincbp: {sign}"
        ),
    );
}

#[test]
fn acceptance_2_table1_clayton_sign_and_values() {
    // The repro/table1_clayton.sh run: data seeds 21/22, chains 1 and 2.
    let gamma = tau_to_param(ParametricFamily::Clayton, 0.6).unwrap();
    let truth = ParametricCopula::new(ParametricFamily::Clayton, gamma, false).unwrap();
    let train = cli_sample(&truth, 1000, 21);
    let test = cli_sample(&truth, 1000, 22);
    let negbinc = fit(&train, GeneratingFamily::NegBinomial, true, 1);
    let bern = fit(&train, GeneratingFamily::Binomial, false, 2);
    let n = lps("negbinc-rot", &negbinc, GeneratingFamily::NegBinomial, true, &test)
        .unwrap()
        .per_point;
    let b = lps("bernstein", &bern, GeneratingFamily::Binomial, false, &test)
        .unwrap()
        .per_point;
    let sign = n > b;
    let n_ok = (n - 0.6237).abs() <= 0.12;
    let b_ok = (b - 0.4273).abs() <= 0.12;
    check(
        "2 (clayton tau=0.6 n=1000, rotated negbinc)",
        sign && n_ok && b_ok,
        &format!(
            "negbinc {n:.4} (target 0.6237±0.12: {n_ok}), bernsteincbp {b:.4} \
             (target 0.4273±0.12: {b_ok}), sign: {sign}"
        ),
    );
}

/// Exact copula log-density of the two-component mixture at a raw point.
/// Independent oracle for the criterion-3 diagnostics.
fn mixture_oracle_ln_c(cfg: &MixtureSimConfig, x1: f64, x2: f64) -> f64 {
    let w = cfg.weight;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let z11 = (x1 - cfg.mean_clayton.0) / cfg.sd_clayton.0;
    let z12 = (x2 - cfg.mean_clayton.1) / cfg.sd_clayton.1;
    let z21 = (x1 - cfg.mean_gaussian.0) / cfg.sd_gaussian.0;
    let z22 = (x2 - cfg.mean_gaussian.1) / cfg.sd_gaussian.1;
    let clay =
        ParametricCopula::new(ParametricFamily::Clayton, cfg.clayton_param, false).unwrap();
    let c1 = clay
        .log_density(
            normal_cdf(z11).clamp(1e-300, 1.0 - 1e-16),
            normal_cdf(z12).clamp(1e-300, 1.0 - 1e-16),
        )
        .unwrap()
        .exp();
    let rho = cfg.gaussian_corr;
    let det = 1.0 - rho * rho;
    let quad = (z21 * z21 - 2.0 * rho * z21 * z22 + z22 * z22) / det;
    let gauss_joint = (-0.5 * quad).exp()
        / (2.0 * std::f64::consts::PI * det.sqrt() * cfg.sd_gaussian.0 * cfg.sd_gaussian.1);
    let f_joint = w * c1 * phi(z11) / cfg.sd_clayton.0 * phi(z12) / cfg.sd_clayton.1
        + (1.0 - w) * gauss_joint;
    let f1 = w * phi(z11) / cfg.sd_clayton.0 + (1.0 - w) * phi(z21) / cfg.sd_gaussian.0;
    let f2 = w * phi(z12) / cfg.sd_clayton.1 + (1.0 - w) * phi(z22) / cfg.sd_gaussian.1;
    f_joint.ln() - f1.ln() - f2.ln()
}

#[test]
fn acceptance_3_table2_mixture_sign_and_values() {
    // The repro/table2_mixture.sh run: data seeds 31/32, chains 1 and 2.
    let cfg = MixtureSimConfig::default(); // gamma=6, rho=0.6, means (0,0)/(0,2), omega=0.5
    let mut rng = task_rng(31, STREAM_SIMULATE);
    let (_, train) = simulate_mixture(&cfg, 1000, &mut rng).unwrap();
    let mut rng = task_rng(32, STREAM_SIMULATE);
    let (test_raw, test) = simulate_mixture(&cfg, 1000, &mut rng).unwrap();
    let negbinc = fit(&train, GeneratingFamily::NegBinomial, true, 1);
    let bern = fit(&train, GeneratingFamily::Binomial, false, 2);
    let n = lps("negbinc-rot", &negbinc, GeneratingFamily::NegBinomial, true, &test)
        .unwrap()
        .per_point;
    let b = lps("bernstein", &bern, GeneratingFamily::Binomial, false, &test)
        .unwrap()
        .per_point;
    let sign = n > b;
    let n_ok = (n - 0.6081).abs() <= 0.15;
    let b_ok = (b - 0.3874).abs() <= 0.15;
    // Diagnostic: the best any estimator can do on this test set is the
    // true mixture copula itself.
    let oracle: f64 = test_raw
        .iter()
        .map(|&(a, c)| mixture_oracle_ln_c(&cfg, a, c))
        .sum::<f64>()
        / test_raw.len() as f64;
    check(
        "3 (experiment II mixture, omega=0.5)",
        sign && n_ok && b_ok,
        &format!(
            "negbinc {n:.4} (target 0.6081±0.15: {n_ok}), bernsteincbp {b:.4} \
             (target 0.3874±0.15: {b_ok}), sign: {sign}; oracle E[ln c] on this \
             test set at omega=0.5 is {oracle:.4}, so the 0.6081 target exceeds \
             what is attainable at omega=0.5 (it implies omega≈0.7)"
        ),
    );
}

#[test]
fn acceptance_4_tail_capture_corner_mass() {
    let study = gumbel_study();
    let corner = |draws: &[PosteriorDraw], family, seed: u64| -> f64 {
        let mut rng = task_rng(400 + seed, 2);
        let pred = predictive_sample(draws, family, false, 1000, &mut rng).unwrap();
        pred.rows().iter().filter(|r| r.0 > 0.95 && r.1 > 0.95).count() as f64 / 1000.0
    };
    let mut n_mass = 0.0;
    let mut b_mass = 0.0;
    for seed in 0..3u64 {
        n_mass +=
            corner(&study.negbinc[seed as usize], GeneratingFamily::NegBinomial, seed) / 3.0;
        b_mass += corner(&study.bernstein[seed as usize], GeneratingFamily::Binomial, seed) / 3.0;
    }
    let pass = n_mass >= 2.0 * b_mass;
    check(
        "4 (tail capture, corner mass ratio >= 2 over 3 seeds)",
        pass,
        &format!(
            "negbinc corner mass {n_mass:.4}, bernsteincbp {b_mass:.4}, ratio {:.2} \
             (true Gumbel tau=0.6 corner mass is 0.0346)",
            n_mass / b_mass
        ),
    );
}

#[test]
fn acceptance_5_analytic_identities() {
    let specs = [
        GeneratingSpec::binomial(5, false).unwrap(),
        GeneratingSpec::binomial(40, false).unwrap(),
        GeneratingSpec::neg_binomial(0.7, false).unwrap(),
        GeneratingSpec::neg_binomial(3.0, false).unwrap(),
        GeneratingSpec::neg_binomial(9.0, false).unwrap(),
    ];
    let mut worst_unity: f64 = 0.0;
    let mut worst_alpha: f64 = 0.0;
    let mut worst_beta: f64 = 0.0;
    let mut locator_ok = true;
    for spec in &specs {
        for &u in &[0.05, 0.3, 0.5, 0.8, 0.97] {
            // Partition of unity within 1e-10 (tail-truncated sums).
            let cap = spec.truncation_index();
            let mut total = 0.0;
            let mut prev = -1.0;
            for i in 1..=cap {
                let p = spec.pmf(i, u).unwrap();
                total += p;
                if p < prev && p < 1e-18 {
                    break;
                }
                prev = p;
            }
            worst_unity = worst_unity.max((total - 1.0).abs());
        }
        // Prior predictive equals pmf quadrature within 1e-8.
        let max_i = spec.max_index().unwrap_or(20).min(10);
        for i in 1..=max_i {
            let alpha = spec.alpha(i).unwrap();
            let mode = match spec.family() {
                GeneratingFamily::Binomial => (i as f64 - 1.0) / (spec.theta() - 1.0).max(1.0),
                GeneratingFamily::NegBinomial => {
                    (i as f64 - 1.0) / (spec.theta() + i as f64 - 1.0)
                }
            }
            .clamp(1e-9, 1.0 - 1e-9);
            let f = |u: f64| spec.pmf(i, u).unwrap();
            let quad = integrate(&f, 0.0, mode, 1e-11) + integrate(&f, mode, 1.0, 1e-11);
            worst_alpha = worst_alpha.max((alpha - quad).abs());
        }
        // Beta-kernel equivalence within 1e-10.
        for j in 1..=spec.max_index().unwrap_or(25).min(25) {
            for &u in &[0.1, 0.5, 0.9] {
                let lhs = spec.component_log_density(j, u).unwrap();
                let rhs = spec.pmf(j, u).unwrap().ln() - spec.alpha(j).unwrap().ln();
                worst_beta = worst_beta.max((lhs - rhs).abs());
            }
        }
        // Breakpoint/locator bracketing on 10^4 random points.
        let mut rng = task_rng(500, 3);
        for _ in 0..10_000 {
            let y: f64 = rand::Rng::random(&mut rng);
            if y <= 0.0 || y >= 1.0 {
                continue;
            }
            let j = spec.locate(y).unwrap();
            locator_ok &=
                spec.breakpoint(j - 1).unwrap() < y && y <= spec.breakpoint(j).unwrap();
        }
    }
    // Random-mixture normalisation within 1e-4 under tensor quadrature.
    let (nodes, wts) = gauss_legendre_unit(200);
    let spec = GeneratingSpec::neg_binomial(4.0, false).unwrap();
    let weights = [0.5, 0.3, 0.15];
    let atoms = [(0.2, 0.3), (0.6, 0.7), (0.9, 0.94)];
    let mut mass = 0.0;
    for (&u, &wu) in nodes.iter().zip(&wts) {
        for (&v, &wv) in nodes.iter().zip(&wts) {
            mass += wu * wv * mixture_log_density(&spec, &weights, &atoms, u, v).unwrap().exp();
        }
    }
    let norm_err = (mass - 1.0).abs();
    let pass = worst_unity < 1e-10 && worst_alpha < 1e-8 && worst_beta < 1e-10 && locator_ok
        && norm_err < 1e-4;
    check(
        "5 (analytic identities)",
        pass,
        &format!(
            "partition-of-unity err {worst_unity:.2e} (<1e-10), alpha-quadrature err \
             {worst_alpha:.2e} (<1e-8), beta-equivalence err {worst_beta:.2e} (<1e-10), \
             locator bracketing {locator_ok}, mixture normalisation err {norm_err:.2e} (<1e-4)"
        ),
    );
}

#[test]
fn acceptance_6a_theta_prior_recovery() {
    let mut cfg = SamplerConfig::new(GeneratingFamily::NegBinomial, 600);
    cfg.iterations = 2;
    cfg.burn_in = 1;
    let mut chain = Chain::empty(cfg).unwrap();
    let warmup = 2_000;
    let keep = 120_000;
    let mut draws = Vec::with_capacity(keep);
    for t in 0..(warmup + keep) {
        chain.sweep().unwrap();
        if t >= warmup {
            draws.push(chain.state().theta);
        }
    }
    use statrs::distribution::ContinuousCDF;
    let prior = statrs::distribution::Gamma::new(2.0, 0.1).unwrap();
    let mut worst: f64 = 0.0;
    for &p in &[0.1, 0.25, 0.5, 0.75, 0.9] {
        let q = prior.inverse_cdf(p);
        let below = draws.iter().filter(|&&t| t <= q).count() as f64 / draws.len() as f64;
        worst = worst.max((below - p).abs());
    }
    check(
        "6a (theta prior recovery, n=0)",
        worst < 0.03,
        &format!("max CDF discrepancy at prior quantiles {worst:.4} (< 0.03)"),
    );
}

#[test]
fn acceptance_6b_allocation_brute_force() {
    use rgpu_copula::sampler::{AdaptState, AdaptiveScale, ChainState};
    let data = CopulaSample::new(vec![(0.82, 0.74), (0.3, 0.45)]).unwrap();
    let mut cfg = SamplerConfig::new(GeneratingFamily::NegBinomial, 601);
    cfg.iterations = 2;
    cfg.burn_in = 1;
    let mut chain = Chain::new(&data, cfg).unwrap();
    let sticks = vec![0.5, 0.6, 0.9];
    let mut weights = Vec::new();
    let mut remaining = 1.0;
    for &eta in &sticks {
        weights.push(eta * remaining);
        remaining *= 1.0 - eta;
    }
    let atoms = vec![(0.1, 0.2), (0.5, 0.55), (0.9, 0.85)];
    let state = ChainState {
        theta: 3.0,
        sticks,
        weights,
        atoms: atoms.clone(),
        allocations: vec![0, 1],
        slices: vec![0.05, 0.04],
        adapt: AdaptState { atom: AdaptiveScale::new(0.0), theta: AdaptiveScale::new(-0.7) },
    };
    chain.set_state(state).unwrap();
    let spec = GeneratingSpec::neg_binomial(3.0, false).unwrap();
    let (u0, v0) = data.rows()[0];
    let mut probs = Vec::new();
    for &(y1, y2) in &atoms {
        let ld = spec
            .component_log_density(spec.locate(y1).unwrap(), u0)
            .unwrap()
            + spec.component_log_density(spec.locate(y2).unwrap(), v0).unwrap();
        probs.push(ld.exp());
    }
    let total: f64 = probs.iter().sum();
    let reps = 10_000;
    let mut counts = [0u32; 3];
    for _ in 0..reps {
        chain.update_allocations().unwrap();
        counts[chain.state().allocations[0]] += 1;
    }
    let mut worst_z: f64 = 0.0;
    for s in 0..3 {
        let p = probs[s] / total;
        let freq = counts[s] as f64 / reps as f64;
        let se = (p * (1.0 - p) / reps as f64).sqrt().max(1e-4);
        worst_z = worst_z.max((freq - p).abs() / se);
    }
    check(
        "6b (allocation brute-force oracle)",
        worst_z < 4.0,
        &format!("max |freq - prob|/se = {worst_z:.2} (< 4)"),
    );
}

#[test]
fn acceptance_6c_geweke_micro() {
    use rand_distr::{Beta as BetaDist, Distribution, Open01};
    let n = 3;
    let mut cfg = SamplerConfig::new(GeneratingFamily::NegBinomial, 602);
    cfg.iterations = 2;
    cfg.burn_in = 1;
    let seed_data = CopulaSample::new(vec![(0.3, 0.4), (0.5, 0.6), (0.7, 0.2)]).unwrap();
    let mut chain = Chain::new(&seed_data, cfg).unwrap();
    let mut rng = task_rng(602, 9);
    let total = 30_000;
    let warmup = 2_000;
    let mut thetas = Vec::new();
    let mut occupied = Vec::new();
    for t in 0..total {
        chain.sweep().unwrap();
        let spec = GeneratingSpec::neg_binomial(chain.state().theta, false).unwrap();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let (y1, y2) = chain.state().atoms[chain.state().allocations[i]];
            let (a1, b1) = spec.cell_kernel(spec.locate(y1).unwrap()).unwrap().shape();
            let (a2, b2) = spec.cell_kernel(spec.locate(y2).unwrap()).unwrap().shape();
            let u: f64 = BetaDist::new(a1, b1).unwrap().sample(&mut rng);
            let v: f64 = BetaDist::new(a2, b2).unwrap().sample(&mut rng);
            rows.push((u.clamp(1e-12, 1.0 - 1e-12), v.clamp(1e-12, 1.0 - 1e-12)));
        }
        chain.replace_data(&CopulaSample::new(rows).unwrap()).unwrap();
        if t >= warmup {
            thetas.push(chain.state().theta);
            occupied.push(chain.state().occupied_count() as f64);
        }
    }
    // Prior-only side.
    let mut rng2 = task_rng(603, 9);
    let reps = 30_000;
    let mut p_thetas = Vec::with_capacity(reps);
    let mut p_occ = Vec::with_capacity(reps);
    let prior = rgpu_copula::sampler::ThetaPrior::Gamma { shape: 2.0, rate: 0.1 };
    for _ in 0..reps {
        p_thetas.push(prior.sample(&mut rng2));
        let mut weights = Vec::new();
        let mut remaining = 1.0;
        while remaining > 1e-12 && weights.len() < 4000 {
            let eta: f64 = BetaDist::new(1.0, 1.0).unwrap().sample(&mut rng2);
            weights.push(eta * remaining);
            remaining *= 1.0 - eta;
        }
        let mut used = std::collections::HashSet::new();
        for _ in 0..n {
            let r: f64 = Open01.sample(&mut rng2);
            let mut acc = 0.0;
            let mut pick = weights.len() - 1;
            for (s, &w) in weights.iter().enumerate() {
                acc += w;
                if r <= acc {
                    pick = s;
                    break;
                }
            }
            used.insert(pick);
        }
        p_occ.push(used.len() as f64);
    }
    let batch_se = |xs: &[f64]| -> (f64, f64) {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let batches = 40;
        let size = xs.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
            .collect();
        let var = means.iter().map(|&m| (m - mean) * (m - mean)).sum::<f64>()
            / (batches as f64 - 1.0);
        (mean, (var / batches as f64).sqrt())
    };
    let (mt, st) = batch_se(&thetas);
    let (mpt, spt) = batch_se(&p_thetas);
    let (mo, so) = batch_se(&occupied);
    let (mpo, spo) = batch_se(&p_occ);
    let z_theta = (mt - mpt) / (st * st + spt * spt).sqrt();
    let z_occ = (mo - mpo) / (so * so + spo * spo).sqrt();
    check(
        "6c (Geweke joint-distribution micro test)",
        z_theta.abs() < 4.0 && z_occ.abs() < 4.0,
        &format!("z(theta) = {z_theta:.2}, z(occupied) = {z_occ:.2} (|z| < 4)"),
    );
}

#[test]
fn acceptance_7_parametric_suite() {
    // tau recovery within ±0.01 at n = 1e5, all five families, tau in {0.3, 0.6}.
    let n = 100_000;
    let mut worst_tau: f64 = 0.0;
    let mut seed = 700;
    for family in ParametricFamily::ALL {
        for &tau in &[0.3, 0.6] {
            seed += 1;
            let mut rng = task_rng(seed, 0);
            let c =
                ParametricCopula::new(family, tau_to_param(family, tau).unwrap(), false).unwrap();
            let s = c.sample(n, &mut rng).unwrap();
            let t = kendall_tau(&s).unwrap();
            worst_tau = worst_tau.max((t - tau).abs());
        }
    }
    // Density normalisation 1 ± 1e-4 under 400-node tensor quadrature.
    let (nodes, weights) = gauss_legendre_unit(400);
    let mut worst_norm: f64 = 0.0;
    for family in ParametricFamily::ALL {
        for &tau in &[0.3, 0.6] {
            let c =
                ParametricCopula::new(family, tau_to_param(family, tau).unwrap(), false).unwrap();
            let mut mass = 0.0;
            for (&u, &wu) in nodes.iter().zip(&weights) {
                let mut inner = 0.0;
                for (&v, &wv) in nodes.iter().zip(&weights) {
                    inner += wv * c.log_density(u, v).unwrap().exp();
                }
                mass += wu * inner;
            }
            worst_norm = worst_norm.max((mass - 1.0).abs());
        }
    }
    check(
        "7 (parametric suite)",
        worst_tau < 0.01 && worst_norm < 1e-4,
        &format!(
            "worst tau recovery error {worst_tau:.4} (< 0.01), worst normalisation error \
             {worst_norm:.2e} (< 1e-4)"
        ),
    );
}

fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_rgpu-copula")
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(bin_path()).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> String {
    path.to_str().unwrap().to_string()
}

#[test]
fn acceptance_8_determinism_and_roundtrip() {
    // End-to-end pipeline through the binary, twice, byte-identical.
    let base = std::env::temp_dir().join("rgpu_copula_acceptance").join("determinism");
    let _ = std::fs::remove_dir_all(&base);
    let run_pipeline = |tag: &str| -> (Vec<u8>, Vec<u8>) {
        let dir = base.join(tag);
        std::fs::create_dir_all(&dir).unwrap();
        let train = dir.join("train.csv");
        let test = dir.join("test.csv");
        let draws = dir.join("fit.draws");
        let report = dir.join("lps.csv");
        assert!(run_cli(&[
            "simulate", "--family", "gumbel", "--tau", "0.6", "--n", "200", "--seed", "41",
            "--out", &p(&train)
        ])
        .status
        .success());
        assert!(run_cli(&[
            "simulate", "--family", "gumbel", "--tau", "0.6", "--n", "200", "--seed", "42",
            "--out", &p(&test)
        ])
        .status
        .success());
        assert!(run_cli(&[
            "fit", "--data", &p(&train), "--model", "negbinc", "--iterations", "600",
            "--burnin", "300", "--seed", "7", "--out", &p(&draws)
        ])
        .status
        .success());
        assert!(run_cli(&["lps", "--test", &p(&test), "--draws", &p(&draws), "--out", &p(&report)])
            .status
            .success());
        (std::fs::read(&draws).unwrap(), std::fs::read(&report).unwrap())
    };
    let a = run_pipeline("a");
    let b = run_pipeline("b");
    let pipeline_ok = a == b;

    // Draw-file round trip changes nothing: identical LPS from disk.
    let dir = base.join("roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let truth = ParametricCopula::new(ParametricFamily::Clayton, 2.0, false).unwrap();
    let mut rng = task_rng(43, 0);
    let train = truth.sample(150, &mut rng).unwrap();
    let test = truth.sample(100, &mut rng).unwrap();
    let mut cfg = SamplerConfig::new(GeneratingFamily::NegBinomial, 44);
    cfg.iterations = 400;
    cfg.burn_in = 200;
    let (draws, _) = run_chain(&train, &cfg).unwrap();
    let in_memory =
        lps("m", &draws, GeneratingFamily::NegBinomial, false, &test).unwrap().total;
    let path = dir.join("draws.txt");
    let meta = rgpu_copula::draws::FitMeta {
        family: GeneratingFamily::NegBinomial,
        rotated: false,
        concentration: 1.0,
        seed: 44,
    };
    rgpu_copula::draws::write_draws(&path, &meta, &[], &draws).unwrap();
    let (meta_back, back) = rgpu_copula::draws::read_draws(&path).unwrap();
    let from_disk =
        lps("d", &back, meta_back.family, meta_back.rotated, &test).unwrap().total;
    let roundtrip_ok = back == draws && in_memory == from_disk;
    check(
        "8 (determinism and draw-file round trip)",
        pipeline_ok && roundtrip_ok,
        &format!(
            "pipeline byte-identical: {pipeline_ok}, draw round trip exact (LPS {in_memory:.6} \
             == {from_disk:.6}): {roundtrip_ok}"
        ),
    );
}

#[test]
fn acceptance_9_user_csv_pipeline() {
    // Synthetic stand-in for a real two-column data set, driven end to end
    // through pseudo -> fit -> lps via the binary.
    let dir = std::env::temp_dir().join("rgpu_copula_acceptance").join("user_csv");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    // Correlated heavy-tailed pair, like claim amounts.
    let mut rng = task_rng(900, 0);
    let truth = ParametricCopula::new(ParametricFamily::Gumbel, 2.2, false).unwrap();
    let mut raw = String::from("claim_a,claim_b\n");
    for _ in 0..600 {
        let (u, v) = truth.sample_pair(&mut rng);
        let x = (rgpu_copula::numeric::normal_quantile(u) * 0.9 + 6.0).exp();
        let y = (rgpu_copula::numeric::normal_quantile(v) * 1.1 + 5.0).exp();
        raw.push_str(&format!("{x:.6},{y:.6}\n"));
    }
    let raw_path = dir.join("claims.csv");
    std::fs::write(&raw_path, raw).unwrap();

    let cop = dir.join("pseudo.csv");
    let pseudo = run_cli(&["pseudo", "--input", &p(&raw_path), "--out", &p(&cop)]);
    let ranked = rgpu_copula::data::read_sample(&cop).unwrap();
    let (train, test) = ranked.split(400).unwrap();
    let train_path = dir.join("train.csv");
    let test_path = dir.join("test.csv");
    rgpu_copula::data::write_sample(&train_path, &train).unwrap();
    rgpu_copula::data::write_sample(&test_path, &test).unwrap();

    let draws = dir.join("fit.draws");
    let fit_out = run_cli(&[
        "fit", "--data", &p(&train_path), "--model", "negbinc", "--iterations", "2000",
        "--burnin", "1000", "--seed", "5", "--out", &p(&draws),
    ]);
    let report = dir.join("lps.csv");
    let lps_out = run_cli(&[
        "lps", "--test", &p(&test_path), "--draws", &p(&draws), "--parametric", "rotgumbel",
        "--parametric", "gaussian", "--train", &p(&train_path), "--out", &p(&report),
    ]);
    let report_body = std::fs::read_to_string(&report).unwrap_or_default();
    let rows = report_body.lines().count();
    let pass = pseudo.status.success()
        && fit_out.status.success()
        && lps_out.status.success()
        && rows == 4;
    check(
        "9 (user-supplied CSV end-to-end)",
        pass,
        &format!(
            "pseudo ok: {}, fit ok: {}, lps ok: {}, report rows: {rows} (expected 4: header + \
             negbinc + 2 baselines)",
            pseudo.status.success(),
            fit_out.status.success(),
            lps_out.status.success()
        ),
    );
}
