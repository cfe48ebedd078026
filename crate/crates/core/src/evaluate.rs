//! Model-comparison apparatus: log-predictive scores, posterior predictive
//! sampling, density-grid export, and Kendall's τ.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Open01};

use crate::data::CopulaSample;
use crate::error::{Error, Result};
use crate::numeric::{clamp_interior, log_sum_exp};
use crate::parametric::ParametricCopula;
use crate::partition::{BetaKernel, GeneratingFamily, GeneratingSpec};
use crate::sampler::PosteriorDraw;

/// Log-predictive-score report for one model on one test set.
///
/// `per_point` (the mean log predictive density) is the primary statistic:
/// it is comparable across test sets of different sizes, and `total` is
/// always exactly `n_test × per_point`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpsReport {
    pub label: String,
    pub per_point: f64,
    pub total: f64,
    pub n_test: usize,
    pub n_draws: usize,
}

impl LpsReport {
    fn from_total(label: String, total: f64, n_test: usize, n_draws: usize) -> Self {
        Self { label, per_point: total / n_test as f64, total, n_test, n_draws }
    }
}

/// One posterior draw prepared for repeated density evaluation: located
/// cells, precomputed kernel normalisers, and the remainder mass.
struct PreparedDraw {
    comps: Vec<(f64, BetaKernel, BetaKernel)>,
    ln_remainder: Option<f64>,
}

fn prepare_draws(
    draws: &[PosteriorDraw],
    family: GeneratingFamily,
) -> Result<Vec<PreparedDraw>> {
    let mut prepared = Vec::with_capacity(draws.len());
    for (idx, d) in draws.iter().enumerate() {
        d.validate()
            .map_err(|e| Error::validation(format!("draw {idx}: {e}")))?;
        let spec = GeneratingSpec::new(family, d.theta, false)?;
        let mut comps = Vec::with_capacity(d.weights.len());
        for (&w, &(y1, y2)) in d.weights.iter().zip(&d.atoms) {
            let k1 = spec.cell_kernel(spec.locate(y1)?)?;
            let k2 = spec.cell_kernel(spec.locate(y2)?)?;
            comps.push((w.ln(), k1, k2));
        }
        let total: f64 = d.weights.iter().sum();
        let remainder = 1.0 - total;
        prepared.push(PreparedDraw {
            comps,
            ln_remainder: if remainder > 0.0 { Some(remainder.ln()) } else { None },
        });
    }
    Ok(prepared)
}

impl PreparedDraw {
    /// Mixture log-density at the (rotation-adjusted) point, using
    /// precomputed `ln` values of the coordinates.
    fn log_density(&self, ln_u: f64, ln_1u: f64, ln_v: f64, ln_1v: f64, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        for &(ln_w, k1, k2) in &self.comps {
            scratch.push(
                ln_w + k1.log_density_from_logs(ln_u, ln_1u) + k2.log_density_from_logs(ln_v, ln_1v),
            );
        }
        if let Some(r) = self.ln_remainder {
            scratch.push(r);
        }
        log_sum_exp(scratch)
    }
}

/// Log predictive score of a posterior-draw ensemble on a test set.
///
/// For each test point the predictive density is the average of the mixture
/// density over draws (log-sum-exp over draws minus log T); the total is the
/// sum of the point log-densities. Deterministic in its inputs: points and
/// draws are reduced in a fixed sequential order.
pub fn lps(
    label: impl Into<String>,
    draws: &[PosteriorDraw],
    family: GeneratingFamily,
    rotated: bool,
    test: &CopulaSample,
) -> Result<LpsReport> {
    if draws.is_empty() {
        return Err(Error::validation("need at least one posterior draw"));
    }
    let prepared = prepare_draws(draws, family)?;
    let ln_t = (draws.len() as f64).ln();
    let mut comp_scratch = Vec::new();
    let mut draw_scratch = vec![0.0; prepared.len()];
    let mut total = 0.0;
    for &(u, v) in test.rows() {
        let (ue, ve) = if rotated { (1.0 - u, 1.0 - v) } else { (u, v) };
        let (ln_u, ln_1u) = (ue.ln(), (-ue).ln_1p());
        let (ln_v, ln_1v) = (ve.ln(), (-ve).ln_1p());
        for (slot, p) in draw_scratch.iter_mut().zip(&prepared) {
            *slot = p.log_density(ln_u, ln_1u, ln_v, ln_1v, &mut comp_scratch);
        }
        total += log_sum_exp(&draw_scratch) - ln_t;
    }
    Ok(LpsReport::from_total(label.into(), total, test.len(), draws.len()))
}

/// Log predictive score of a fixed parametric copula on a test set.
pub fn lps_parametric(
    label: impl Into<String>,
    copula: &ParametricCopula,
    test: &CopulaSample,
) -> Result<LpsReport> {
    let mut total = 0.0;
    for &(u, v) in test.rows() {
        total += copula.log_density(u, v)?;
    }
    Ok(LpsReport::from_total(label.into(), total, test.len(), 0))
}

/// Sample `m` points from the posterior predictive of a draw ensemble.
///
/// Each point picks a draw uniformly, then a component with probability
/// equal to its weight; the leftover stick mass falls to a fresh atom from
/// the uniform base measure, which is the exact marginal law of the
/// unretained tail components. Coordinates then come from the two cell beta
/// kernels.
pub fn predictive_sample<R: Rng>(
    draws: &[PosteriorDraw],
    family: GeneratingFamily,
    rotated: bool,
    m: usize,
    rng: &mut R,
) -> Result<CopulaSample> {
    if draws.is_empty() {
        return Err(Error::validation("need at least one posterior draw"));
    }
    if m == 0 {
        return Err(Error::validation("m must be >= 1"));
    }
    for (idx, d) in draws.iter().enumerate() {
        d.validate()
            .map_err(|e| Error::validation(format!("draw {idx}: {e}")))?;
    }
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let d = &draws[rng.random_range(0..draws.len())];
        let spec = GeneratingSpec::new(family, d.theta, false)?;
        let r: f64 = Open01.sample(rng);
        let mut acc = 0.0;
        let mut atom = None;
        for (&w, &pair) in d.weights.iter().zip(&d.atoms) {
            acc += w;
            if r <= acc {
                atom = Some(pair);
                break;
            }
        }
        // Remainder mass: a fresh atom from the uniform base measure.
        let (y1, y2) = atom.unwrap_or_else(|| (Open01.sample(rng), Open01.sample(rng)));
        let u = sample_cell(&spec, y1, rng)?;
        let v = sample_cell(&spec, y2, rng)?;
        let (u, v) = if rotated { (1.0 - u, 1.0 - v) } else { (u, v) };
        rows.push((u, v));
    }
    CopulaSample::new(rows)
}

fn sample_cell<R: Rng>(spec: &GeneratingSpec, y: f64, rng: &mut R) -> Result<f64> {
    let j = spec.locate(y)?;
    let (a, b) = spec.cell_kernel(j)?.shape();
    let x = BetaDist::new(a, b)
        .map_err(|e| Error::internal(format!("beta kernel shapes invalid: {e}")))?
        .sample(rng);
    Ok(clamp_interior(x))
}

/// Posterior-mean density on a `resolution × resolution` grid of cell
/// centers, row-major with the first index running over `u`.
pub fn density_grid(
    draws: &[PosteriorDraw],
    family: GeneratingFamily,
    rotated: bool,
    resolution: usize,
) -> Result<Vec<f64>> {
    if resolution < 2 {
        return Err(Error::validation("resolution must be >= 2"));
    }
    if draws.is_empty() {
        return Err(Error::validation("need at least one posterior draw"));
    }
    let centers: Vec<f64> = (0..resolution)
        .map(|i| (i as f64 + 0.5) / resolution as f64)
        .collect();
    let mut grid = vec![0.0; resolution * resolution];
    let mut bu = vec![0.0; resolution];
    let mut bv = vec![0.0; resolution];
    for (idx, d) in draws.iter().enumerate() {
        d.validate()
            .map_err(|e| Error::validation(format!("draw {idx}: {e}")))?;
        let spec = GeneratingSpec::new(family, d.theta, rotated)?;
        for (&w, &(y1, y2)) in d.weights.iter().zip(&d.atoms) {
            let k1 = spec.cell_kernel(spec.locate(y1)?)?;
            let k2 = spec.cell_kernel(spec.locate(y2)?)?;
            for (slot, &c) in bu.iter_mut().zip(&centers) {
                *slot = k1.log_density(c).exp();
            }
            for (slot, &c) in bv.iter_mut().zip(&centers) {
                *slot = k2.log_density(c).exp();
            }
            for (i, &fu) in bu.iter().enumerate() {
                let row = &mut grid[i * resolution..(i + 1) * resolution];
                let wf = w * fu;
                for (cell, &fv) in row.iter_mut().zip(&bv) {
                    *cell += wf * fv;
                }
            }
        }
        let remainder = 1.0 - d.weights.iter().sum::<f64>();
        if remainder > 0.0 {
            for cell in grid.iter_mut() {
                *cell += remainder;
            }
        }
    }
    let t = draws.len() as f64;
    for cell in grid.iter_mut() {
        *cell /= t;
    }
    Ok(grid)
}

/// Kendall's τ-b: concordance with tie correction.
///
/// Knight's O(n log n) algorithm — lexicographic sort, tie-run counting, and
/// a merge-sort inversion count. Identical to the O(n²) concordance sum.
pub fn kendall_tau(data: &CopulaSample) -> Result<f64> {
    kendall_tau_pairs(data.rows())
}

/// τ-b over raw pairs (also used to seed parametric fits).
pub fn kendall_tau_pairs(rows: &[(f64, f64)]) -> Result<f64> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::data(format!("need at least 2 rows for Kendall tau, got {n}")));
    }
    let mut pairs: Vec<(f64, f64)> = rows.to_vec();
    pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let run_pairs = |sorted: &[f64]| -> u128 {
        let mut ties: u128 = 0;
        let mut run: u128 = 1;
        for i in 1..sorted.len() {
            if sorted[i] == sorted[i - 1] {
                run += 1;
            } else {
                ties += run * (run - 1) / 2;
                run = 1;
            }
        }
        ties + run * (run - 1) / 2
    };

    // Ties in x and joint ties, from the lexicographically sorted pairs.
    let mut n1: u128 = 0;
    let mut n3: u128 = 0;
    {
        let mut run_x: u128 = 1;
        let mut run_xy: u128 = 1;
        for i in 1..n {
            if pairs[i].0 == pairs[i - 1].0 {
                run_x += 1;
                if pairs[i].1 == pairs[i - 1].1 {
                    run_xy += 1;
                } else {
                    n3 += run_xy * (run_xy - 1) / 2;
                    run_xy = 1;
                }
            } else {
                n1 += run_x * (run_x - 1) / 2;
                n3 += run_xy * (run_xy - 1) / 2;
                run_x = 1;
                run_xy = 1;
            }
        }
        n1 += run_x * (run_x - 1) / 2;
        n3 += run_xy * (run_xy - 1) / 2;
    }

    // Discordant pairs are inversions of y once sorted by x.
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = merge_count_inversions(&mut ys);

    let mut y_sorted: Vec<f64> = rows.iter().map(|p| p.1).collect();
    y_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n2 = run_pairs(&y_sorted);

    let n0 = (n as u128) * (n as u128 - 1) / 2;
    let den = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if den <= 0.0 {
        return Err(Error::data("degenerate sample: a margin is constant"));
    }
    let num = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * swaps as i128;
    Ok(num as f64 / den.sqrt())
}

/// Count strict inversions while merge-sorting in place.
fn merge_count_inversions(xs: &mut [f64]) -> u128 {
    let n = xs.len();
    let mut buf = xs.to_vec();
    let mut inversions: u128 = 0;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo + width < n {
            let mid = lo + width;
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if xs[i] <= xs[j] {
                    buf[k] = xs[i];
                    i += 1;
                } else {
                    // xs[i..mid] all exceed xs[j].
                    inversions += (mid - i) as u128;
                    buf[k] = xs[j];
                    j += 1;
                }
                k += 1;
            }
            while i < mid {
                buf[k] = xs[i];
                i += 1;
                k += 1;
            }
            while j < hi {
                buf[k] = xs[j];
                j += 1;
                k += 1;
            }
            xs[lo..hi].copy_from_slice(&buf[lo..hi]);
            lo += 2 * width;
        }
        width *= 2;
    }
    inversions
}
