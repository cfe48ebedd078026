//! Copula samples, pseudo-observations, mixture simulation, CSV round
//! trips, and train/test splitting.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{clamp_interior, normal_cdf};
use crate::parametric::{ParametricCopula, ParametricFamily};

/// An n×2 matrix of copula observations, every entry strictly inside (0,1).
///
/// This is the shared currency between simulators, fitters, and evaluators;
/// the interiority invariant is what lets density code skip boundary checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSample {
    rows: Vec<(f64, f64)>,
}

impl CopulaSample {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::data("copula sample must contain at least one row"));
        }
        for (idx, &(u, v)) in rows.iter().enumerate() {
            if !(u.is_finite() && v.is_finite()) || u <= 0.0 || u >= 1.0 || v <= 0.0 || v >= 1.0 {
                return Err(Error::data(format!(
                    "row {} must lie strictly inside (0,1)^2, got ({u}, {v})",
                    idx + 1
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    /// Order-preserving prefix/suffix split. No shuffling: real series are
    /// temporal and the later block is the out-of-sample set.
    pub fn split(&self, n_train: usize) -> Result<(CopulaSample, CopulaSample)> {
        if n_train < 1 || n_train >= self.len() {
            return Err(Error::validation(format!(
                "n_train must satisfy 1 <= n_train < n = {}, got {n_train}",
                self.len()
            )));
        }
        let train = CopulaSample { rows: self.rows[..n_train].to_vec() };
        let test = CopulaSample { rows: self.rows[n_train..].to_vec() };
        Ok((train, test))
    }
}

/// Average ranks of one column, in input order.
fn average_ranks(col: &[f64]) -> Result<Vec<f64>> {
    let n = col.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && col[order[end]] == col[order[start]] {
            end += 1;
        }
        // Tied block gets the mean of the ranks it spans (1-based).
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    if n >= 2 && col[order[0]] == col[order[n - 1]] {
        return Err(Error::data("constant column: all ranks tied across the sample"));
    }
    Ok(ranks)
}

/// Pseudo-observations: per-column average ranks divided by n+1.
///
/// The output is interior by construction and invariant under any strictly
/// increasing transform of either margin.
pub fn pseudo_observations(raw: &[(f64, f64)]) -> Result<CopulaSample> {
    let n = raw.len();
    if n < 2 {
        return Err(Error::data(format!("need at least 2 rows to rank, got {n}")));
    }
    for (idx, &(x, y)) in raw.iter().enumerate() {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::data(format!("row {}: non-finite entry", idx + 1)));
        }
    }
    let xs: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let rx = average_ranks(&xs)?;
    let ry = average_ranks(&ys)?;
    let denom = (n + 1) as f64;
    let rows = rx
        .into_iter()
        .zip(ry)
        .map(|(a, b)| (a / denom, b / denom))
        .collect();
    CopulaSample::new(rows)
}

/// Two-component simulator: a Clayton-coupled Gaussian pair mixed with a
/// correlated bivariate Gaussian. Pushing each coordinate through its exact
/// mixture CDF yields skewed copula data with lower tail dependence that is
/// not itself a mixture of the two copulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSimConfig {
    /// Mixing weight ω of the Clayton component.
    pub weight: f64,
    /// Clayton parameter γ.
    pub clayton_param: f64,
    /// Correlation ρ of the Gaussian component.
    pub gaussian_corr: f64,
    /// Means (μ11, μ12) of the Clayton component's margins.
    pub mean_clayton: (f64, f64),
    /// Means (μ21, μ22) of the Gaussian component's margins.
    pub mean_gaussian: (f64, f64),
    /// Standard deviations (σ11, σ12) of the Clayton component's margins.
    pub sd_clayton: (f64, f64),
    /// Standard deviations (σ21, σ22) of the Gaussian component's margins.
    pub sd_gaussian: (f64, f64),
}

impl Default for MixtureSimConfig {
    fn default() -> Self {
        Self {
            weight: 0.5,
            clayton_param: 6.0,
            gaussian_corr: 0.6,
            mean_clayton: (0.0, 0.0),
            mean_gaussian: (0.0, 2.0),
            sd_clayton: (1.0, 1.0),
            sd_gaussian: (1.0, 1.0),
        }
    }
}

impl MixtureSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight < 1.0) {
            return Err(Error::validation(format!(
                "mixture weight must lie in (0,1), got {}",
                self.weight
            )));
        }
        if !(self.clayton_param > 0.0 && self.clayton_param.is_finite()) {
            return Err(Error::validation("clayton parameter must be positive"));
        }
        if !(self.gaussian_corr > -1.0 && self.gaussian_corr < 1.0) {
            return Err(Error::validation("gaussian correlation must lie in (-1,1)"));
        }
        for &s in [
            self.sd_clayton.0,
            self.sd_clayton.1,
            self.sd_gaussian.0,
            self.sd_gaussian.1,
        ]
        .iter()
        {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::validation("standard deviations must be positive"));
            }
        }
        Ok(())
    }
}

/// Draw `n` pairs from the two-component model, returning both the raw data
/// and the copula data obtained through the exact mixture CDFs (not ranks).
pub fn simulate_mixture<R: Rng>(
    config: &MixtureSimConfig,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<(f64, f64)>, CopulaSample)> {
    config.validate()?;
    if n == 0 {
        return Err(Error::validation("n must be >= 1"));
    }
    let clayton = ParametricCopula::new(ParametricFamily::Clayton, config.clayton_param, false)?;
    let rho = config.gaussian_corr;
    let mut raw = Vec::with_capacity(n);
    let mut cop = Vec::with_capacity(n);
    for _ in 0..n {
        let pick: f64 = Open01.sample(rng);
        let (x1, x2) = if pick < config.weight {
            let (a, b) = clayton.sample_pair(rng);
            (
                config.mean_clayton.0 + config.sd_clayton.0 * crate::numeric::normal_quantile(a),
                config.mean_clayton.1 + config.sd_clayton.1 * crate::numeric::normal_quantile(b),
            )
        } else {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            let w2 = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
            (
                config.mean_gaussian.0 + config.sd_gaussian.0 * z1,
                config.mean_gaussian.1 + config.sd_gaussian.1 * w2,
            )
        };
        let u1 = config.weight * normal_cdf((x1 - config.mean_clayton.0) / config.sd_clayton.0)
            + (1.0 - config.weight) * normal_cdf((x1 - config.mean_gaussian.0) / config.sd_gaussian.0);
        let u2 = config.weight * normal_cdf((x2 - config.mean_clayton.1) / config.sd_clayton.1)
            + (1.0 - config.weight) * normal_cdf((x2 - config.mean_gaussian.1) / config.sd_gaussian.1);
        raw.push((x1, x2));
        cop.push((clamp_interior(u1), clamp_interior(u2)));
    }
    Ok((raw, CopulaSample::new(cop)?))
}

/// Format a float with 17 significant digits; parses back bit-exactly.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a copula sample as CSV with header `u,v` at full precision.
pub fn write_sample(path: &Path, data: &CopulaSample) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "u,v")?;
    for &(u, v) in data.rows() {
        writeln!(w, "{},{}", fmt_f64(u), fmt_f64(v))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_two_columns(path: &Path, expect_header: Option<&str>) -> Result<Vec<(f64, f64)>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::data(format!("{}: empty file", path.display())))?;
    let header = header?;
    let header = header.trim_start_matches('\u{feff}').trim();
    if let Some(expected) = expect_header {
        if header != expected {
            return Err(Error::data(format!(
                "{}: line 1: expected header `{expected}`, got `{header}`",
                path.display()
            )));
        }
    } else if header.split(',').count() != 2 {
        return Err(Error::data(format!(
            "{}: line 1: expected a two-column header, got `{header}`",
            path.display()
        )));
    }
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut parts = line.split(',');
        let a = parts.next();
        let b = parts.next();
        if parts.next().is_some() || b.is_none() {
            return Err(Error::data(format!(
                "{}: line {lineno}: expected two comma-separated fields",
                path.display()
            )));
        }
        let parse = |s: &str, col: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| {
                Error::data(format!(
                    "{}: line {lineno}: cannot parse {col} value `{s}`",
                    path.display()
                ))
            })
        };
        let u = parse(a.unwrap(), "first")?;
        let v = parse(b.unwrap(), "second")?;
        rows.push((u, v));
    }
    Ok(rows)
}

/// Read a copula sample CSV, validating the `u,v` header and interiority
/// with line numbers in every error.
pub fn read_sample(path: &Path) -> Result<CopulaSample> {
    let rows = parse_two_columns(path, Some("u,v"))?;
    if rows.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    for (idx, &(u, v)) in rows.iter().enumerate() {
        if !(u.is_finite() && v.is_finite()) || u <= 0.0 || u >= 1.0 || v <= 0.0 || v >= 1.0 {
            return Err(Error::data(format!(
                "{}: line {}: values must lie strictly inside (0,1), got ({u}, {v})",
                path.display(),
                idx + 2
            )));
        }
    }
    CopulaSample::new(rows)
}

/// Write raw (unconstrained) two-column data with header `x1,x2`.
pub fn write_raw(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "x1,x2")?;
    for &(a, b) in rows {
        writeln!(w, "{},{}", fmt_f64(a), fmt_f64(b))?;
    }
    w.flush()?;
    Ok(())
}

/// Read raw two-column numeric data. Any two-field header is accepted; the
/// values only need to be finite.
pub fn read_raw(path: &Path) -> Result<Vec<(f64, f64)>> {
    let rows = parse_two_columns(path, None)?;
    if rows.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    for (idx, &(a, b)) in rows.iter().enumerate() {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::data(format!(
                "{}: line {}: non-finite entry",
                path.display(),
                idx + 2
            )));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;

    #[test]
    fn sample_validation() {
        assert!(CopulaSample::new(vec![]).is_err());
        assert!(CopulaSample::new(vec![(0.0, 0.5)]).is_err());
        assert!(CopulaSample::new(vec![(0.5, 1.0)]).is_err());
        assert!(CopulaSample::new(vec![(0.5, f64::NAN)]).is_err());
        assert!(CopulaSample::new(vec![(0.5, 0.5)]).is_ok());
    }

    #[test]
    fn pseudo_observations_rank_arithmetic() {
        let out = pseudo_observations(&[(3.2, 3.2), (1.1, 1.1), (5.0, 5.0)]).unwrap();
        let expect = [(0.5, 0.5), (0.25, 0.25), (0.75, 0.75)];
        for (got, want) in out.rows().iter().zip(&expect) {
            assert!((got.0 - want.0).abs() < 1e-15);
            assert!((got.1 - want.1).abs() < 1e-15);
        }
    }

    #[test]
    fn pseudo_observations_average_ranks_on_ties() {
        // Tied block (1, 1) shares the average rank 1.5, giving 1.5/(n+1).
        let out = pseudo_observations(&[(1.0, 2.0), (1.0, 1.0), (2.0, 3.0)]).unwrap();
        assert!((out.rows()[0].0 - 1.5 / 4.0).abs() < 1e-15);
        assert!((out.rows()[1].0 - 1.5 / 4.0).abs() < 1e-15);
        assert!((out.rows()[2].0 - 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn pseudo_observations_invariant_under_monotone_transform() {
        let raw: [(f64, f64); 4] = [(0.3, -2.0), (1.7, 0.4), (-0.2, 3.1), (0.9, 0.0)];
        let transformed: Vec<(f64, f64)> =
            raw.iter().map(|&(x, y)| (x.exp(), y.exp())).collect();
        assert_eq!(
            pseudo_observations(&raw).unwrap(),
            pseudo_observations(&transformed).unwrap()
        );
    }

    #[test]
    fn pseudo_observations_rejects_constant_column() {
        let err = pseudo_observations(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn split_sizes_and_reassembly() {
        let rows: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 / 11.0, 0.5)).collect();
        let s = CopulaSample::new(rows.clone()).unwrap();
        let (train, test) = s.split(6).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 4);
        let mut glued = train.rows().to_vec();
        glued.extend_from_slice(test.rows());
        assert_eq!(glued, rows);
        assert!(s.split(10).is_err());
        assert!(s.split(0).is_err());
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let mut rng = task_rng(3, 9);
        let rows: Vec<(f64, f64)> = (0..50)
            .map(|_| (Open01.sample(&mut rng), Open01.sample(&mut rng)))
            .collect();
        let sample = CopulaSample::new(rows).unwrap();
        let dir = std::env::temp_dir().join("rgpu_copula_data_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        write_sample(&path, &sample).unwrap();
        let back = read_sample(&path).unwrap();
        assert_eq!(sample, back);
    }

    #[test]
    fn csv_errors_name_line_numbers() {
        let dir = std::env::temp_dir().join("rgpu_copula_data_test");
        std::fs::create_dir_all(&dir).unwrap();

        let path = dir.join("boundary.csv");
        std::fs::write(&path, "u,v\n1.0,0.5\n").unwrap();
        let err = read_sample(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");

        let path = dir.join("badheader.csv");
        std::fs::write(&path, "x,y\n0.5,0.5\n").unwrap();
        let err = read_sample(&path).unwrap_err().to_string();
        assert!(err.contains("header"), "{err}");

        let path = dir.join("malformed.csv");
        std::fs::write(&path, "u,v\n0.5\n").unwrap();
        assert!(read_sample(&path).is_err());
    }

    #[test]
    fn mixture_degenerate_weight_behaves_like_clayton() {
        // ω→1 leaves only the Clayton-coupled component, so the copula data
        // recover Clayton's Kendall tau γ/(γ+2).
        let cfg = MixtureSimConfig { weight: 1.0 - 1e-12, ..Default::default() };
        let mut rng = task_rng(11, 0);
        let (_, cop) = simulate_mixture(&cfg, 20_000, &mut rng).unwrap();
        let tau = crate::evaluate::kendall_tau(&cop).unwrap();
        assert!((tau - 0.75).abs() < 0.02, "tau = {tau}");
    }

    #[test]
    fn mixture_zero_weight_is_gaussian() {
        let cfg = MixtureSimConfig { weight: 1e-12, ..Default::default() };
        let mut rng = task_rng(12, 0);
        let (_, cop) = simulate_mixture(&cfg, 20_000, &mut rng).unwrap();
        let tau = crate::evaluate::kendall_tau(&cop).unwrap();
        let expect = 2.0 / std::f64::consts::PI * 0.6_f64.asin();
        assert!((tau - expect).abs() < 0.02, "tau = {tau}");
    }

    #[test]
    fn mixture_margins_are_uniform() {
        let cfg = MixtureSimConfig::default();
        let mut rng = task_rng(13, 0);
        let (_, cop) = simulate_mixture(&cfg, 10_000, &mut rng).unwrap();
        let us: Vec<f64> = cop.rows().iter().map(|r| r.0).collect();
        let vs: Vec<f64> = cop.rows().iter().map(|r| r.1).collect();
        let crit = crate::numeric::ks_critical(10_000, 0.01);
        assert!(crate::numeric::ks_statistic(&us, |x| x) < crit);
        assert!(crate::numeric::ks_statistic(&vs, |x| x) < crit);
    }

    #[test]
    fn mixture_shows_lower_tail_clustering_and_asymmetry() {
        let cfg = MixtureSimConfig::default();
        let mut rng = task_rng(14, 0);
        let (_, cop) = simulate_mixture(&cfg, 10_000, &mut rng).unwrap();
        let n = cop.len() as f64;
        let frac = |f: &dyn Fn(&&(f64, f64)) -> bool| cop.rows().iter().filter(f).count() as f64 / n;
        // Clayton component clusters the joint lower corner well above the
        // independent-copula mass of 0.01, and above the upper corner.
        let lower = frac(&|r| r.0 < 0.1 && r.1 < 0.1);
        let upper = frac(&|r| r.0 > 0.9 && r.1 > 0.9);
        assert!(lower > 0.03, "lower corner mass {lower}");
        let se = ((lower + upper) / n).sqrt();
        assert!(lower > upper + 4.0 * se, "lower {lower} vs upper {upper}");
        // The shifted second component breaks symmetry across the diagonal.
        let above = frac(&|r| r.0 < 0.3 && r.1 > 0.7);
        let below = frac(&|r| r.0 > 0.7 && r.1 < 0.3);
        let se = ((above + below) / n).sqrt();
        assert!(above > below + 4.0 * se, "above {above} vs below {below}");
    }
}
