//! Analytic identities of the partition mathematics, checked on grids and
//! seeded random batteries at fixed tolerances.

use rand::Rng;
use rgpu_copula::numeric::{gauss_legendre_unit, integrate};
use rgpu_copula::partition::{
    mixture_log_density, GeneratingFamily, GeneratingSpec, MAX_CELLS,
};
use rgpu_copula::rng::task_rng;

fn specs_under_test() -> Vec<GeneratingSpec> {
    let mut specs = vec![
        GeneratingSpec::binomial(1, false).unwrap(),
        GeneratingSpec::binomial(5, false).unwrap(),
        GeneratingSpec::binomial(23, false).unwrap(),
        GeneratingSpec::binomial(160, false).unwrap(),
        GeneratingSpec::neg_binomial(0.5, false).unwrap(),
        GeneratingSpec::neg_binomial(1.0, false).unwrap(),
        GeneratingSpec::neg_binomial(3.0, false).unwrap(),
        GeneratingSpec::neg_binomial(9.0, false).unwrap(),
        GeneratingSpec::neg_binomial(33.7, false).unwrap(),
        GeneratingSpec::neg_binomial(140.0, false).unwrap(),
    ];
    specs.push(GeneratingSpec::neg_binomial(3.0, true).unwrap());
    specs
}

/// Sum the pmf over cells. The pmf is unimodal in the index, so infinite
/// families may stop once past the mode with a negligible term (the α-tail
/// rule never fires before the cap for moderate θ; the pmf tail decays
/// geometrically in u instead).
fn pmf_sum(spec: &GeneratingSpec, u: f64) -> f64 {
    let cap = spec.truncation_index().min(MAX_CELLS);
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
    total
}

#[test]
fn partition_of_unity_on_theta_u_grid() {
    for spec in specs_under_test() {
        for &u in &[0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            let s = pmf_sum(&spec, u);
            assert!(
                (s - 1.0).abs() < 1e-10,
                "{:?} theta {} at u={u}: sum {s}",
                spec.family(),
                spec.theta()
            );
        }
    }
}

#[test]
fn prior_predictive_matches_pmf_quadrature() {
    for spec in specs_under_test() {
        let max_i = match spec.family() {
            GeneratingFamily::Binomial => spec.theta() as u64,
            GeneratingFamily::NegBinomial => 40,
        };
        let indices: Vec<u64> = (1..=max_i.min(12)).chain([max_i]).collect();
        for i in indices {
            let alpha = spec.alpha(i).unwrap();
            // The pmf is sharply peaked in u for large θ; splitting the
            // quadrature at the mode keeps adaptive Simpson honest.
            let mode = match spec.family() {
                GeneratingFamily::Binomial => (i as f64 - 1.0) / (spec.theta() - 1.0).max(1.0),
                GeneratingFamily::NegBinomial => (i as f64 - 1.0) / (spec.theta() + i as f64 - 1.0),
            }
            .clamp(1e-9, 1.0 - 1e-9);
            let f = |u: f64| spec.pmf(i, u).unwrap();
            let quad = integrate(&f, 0.0, mode, 1e-11) + integrate(&f, mode, 1.0, 1e-11);
            assert!(
                (alpha - quad).abs() < 1e-8,
                "{:?} theta {} alpha_{i}: {alpha} vs quad {quad}",
                spec.family(),
                spec.theta()
            );
        }
    }
}

#[test]
fn breakpoints_bracket_locator_for_random_inputs() {
    let mut rng = task_rng(2024, 0);
    for spec in specs_under_test() {
        for _ in 0..10_000 {
            let y: f64 = rng.random();
            if y <= 0.0 || y >= 1.0 {
                continue;
            }
            let j = spec.locate(y).unwrap();
            let lo = spec.breakpoint(j - 1).unwrap();
            let hi = spec.breakpoint(j).unwrap();
            assert!(
                lo < y && y <= hi,
                "{:?} theta {}: y={y} not in ({lo}, {hi}] at j={j}",
                spec.family(),
                spec.theta()
            );
        }
    }
}

#[test]
fn locator_matches_linear_scan() {
    let mut rng = task_rng(2025, 0);
    for spec in specs_under_test() {
        for _ in 0..300 {
            let y: f64 = rng.random();
            if y <= 0.0 || y >= 1.0 {
                continue;
            }
            let j = spec.locate(y).unwrap();
            let mut scan = 1u64;
            while y > spec.breakpoint(scan).unwrap() {
                scan += 1;
            }
            assert_eq!(j, scan, "{:?} theta {} y={y}", spec.family(), spec.theta());
        }
    }
}

#[test]
fn beta_kernel_equals_normalised_pmf_on_grid() {
    // The identity that turns the partition mixture into beta mixtures:
    // ln kernel_j(u) = ln φ_j(u) − ln α_j.
    for spec in specs_under_test() {
        let max_j = match spec.family() {
            GeneratingFamily::Binomial => spec.theta() as u64,
            GeneratingFamily::NegBinomial => 30,
        };
        let plain = GeneratingSpec::new(spec.family(), spec.theta(), false).unwrap();
        for j in (1..=max_j).step_by(((max_j / 12).max(1)) as usize) {
            for &u in &[0.03, 0.2, 0.45, 0.7, 0.97] {
                let lhs = plain.component_log_density(j, u).unwrap();
                let rhs = plain.pmf(j, u).unwrap().ln() - plain.alpha(j).unwrap().ln();
                assert!(
                    (lhs - rhs).abs() < 1e-10,
                    "{:?} theta {} j={j} u={u}: {lhs} vs {rhs}",
                    plain.family(),
                    plain.theta()
                );
            }
        }
    }
}

/// Diagonal-dominance fixed-weight copula density Σ_i φ_i(u)φ_i(v)/α_i.
fn diagonal_copula_density(spec: &GeneratingSpec, u: f64, v: f64) -> f64 {
    let cap = spec.truncation_index().min(MAX_CELLS);
    let mut total = 0.0;
    let mut prev = -1.0;
    for i in 1..=cap {
        let pu = spec.pmf(i, u).unwrap();
        let pv = spec.pmf(i, v).unwrap();
        total += pu * pv / spec.alpha(i).unwrap();
        let larger = pu.max(pv);
        if larger < prev && larger < 1e-18 {
            break;
        }
        prev = larger;
    }
    total
}

#[test]
fn diagonal_dominance_copula_has_uniform_margins() {
    let (nodes, weights) = gauss_legendre_unit(200);
    for spec in [
        GeneratingSpec::binomial(5, false).unwrap(),
        GeneratingSpec::binomial(40, false).unwrap(),
        GeneratingSpec::neg_binomial(3.0, false).unwrap(),
        GeneratingSpec::neg_binomial(9.0, false).unwrap(),
    ] {
        for &u in &[0.07, 0.3, 0.55, 0.9] {
            let marginal: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&v, &w)| w * diagonal_copula_density(&spec, u, v))
                .sum();
            assert!(
                (marginal - 1.0).abs() < 1e-6,
                "{:?} theta {} at u={u}: marginal {marginal}",
                spec.family(),
                spec.theta()
            );
        }
    }
}

#[test]
fn random_mixture_densities_integrate_to_one() {
    let mut rng = task_rng(2026, 0);
    let (nodes, wts) = gauss_legendre_unit(200);
    for case in 0..6 {
        let family = if case % 2 == 0 {
            GeneratingFamily::NegBinomial
        } else {
            GeneratingFamily::Binomial
        };
        let theta = match family {
            GeneratingFamily::NegBinomial => 0.8 + 7.0 * rng.random::<f64>(),
            GeneratingFamily::Binomial => (2.0 + 20.0 * rng.random::<f64>()).floor(),
        };
        let rotated = case % 3 == 0;
        let spec = GeneratingSpec::new(family, theta, rotated).unwrap();
        let k = 1 + (case % 4);
        let mut weights = Vec::new();
        let mut atoms = Vec::new();
        let mut left = 1.0;
        for i in 0..k {
            let w = if i + 1 == k { left * rng.random::<f64>() } else { left * 0.5 };
            weights.push(w);
            left -= w;
            atoms.push((rng.random::<f64>().clamp(1e-6, 1.0 - 1e-6),
                        rng.random::<f64>().clamp(1e-6, 1.0 - 1e-6)));
        }
        let mut mass = 0.0;
        for (&u, &wu) in nodes.iter().zip(&wts) {
            for (&v, &wv) in nodes.iter().zip(&wts) {
                mass += wu * wv * mixture_log_density(&spec, &weights, &atoms, u, v).unwrap().exp();
            }
        }
        assert!(
            (mass - 1.0).abs() < 1e-4,
            "case {case} ({family:?} theta {theta}): mass {mass}"
        );
    }
}

#[test]
fn rotation_is_an_involution() {
    let plain = GeneratingSpec::neg_binomial(4.5, false).unwrap();
    let rotated = GeneratingSpec::neg_binomial(4.5, true).unwrap();
    let weights = [0.5, 0.3];
    let atoms = [(0.125, 0.8125), (0.625, 0.25)];
    // On dyadic grid points 1−(1−u) is exact in binary floating point, so
    // applying the rotation twice reproduces the density bit-for-bit.
    for i in 1..32 {
        for j in 1..32 {
            let (u, v) = (i as f64 / 32.0, j as f64 / 32.0);
            let twice =
                mixture_log_density(&rotated, &weights, &atoms, 1.0 - u, 1.0 - v).unwrap();
            let once = mixture_log_density(&plain, &weights, &atoms, u, v).unwrap();
            assert_eq!(twice, once, "at ({u}, {v})");
        }
    }
}
