//! Frank, Gumbel, Clayton, Joe, and Gaussian copulas: exact samplers,
//! log-densities, Kendall-τ conversions, and one-parameter maximum
//! likelihood — the data generators and fitted baselines for model
//! comparison.
//!
//! Sampling uses boundary-safe frailty constructions: gamma frailty for
//! Clayton, positive-stable frailty (Chambers–Mallows–Stuck) for Gumbel,
//! Sibuya frailty for Joe, conditional inversion for Frank, and correlated
//! normals for Gauss.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma as GammaDist, Open01, StandardNormal};
use statrs::function::gamma::ln_gamma;

use std::sync::OnceLock;

use crate::data::CopulaSample;
use crate::error::{Error, Result};
use crate::numeric::{clamp_interior, gauss_legendre_unit, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParametricFamily {
    Frank,
    Gumbel,
    Clayton,
    Joe,
    Gaussian,
}

impl ParametricFamily {
    pub const ALL: [ParametricFamily; 5] = [
        ParametricFamily::Frank,
        ParametricFamily::Gumbel,
        ParametricFamily::Clayton,
        ParametricFamily::Joe,
        ParametricFamily::Gaussian,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ParametricFamily::Frank => "frank",
            ParametricFamily::Gumbel => "gumbel",
            ParametricFamily::Clayton => "clayton",
            ParametricFamily::Joe => "joe",
            ParametricFamily::Gaussian => "gaussian",
        }
    }
}

impl std::fmt::Display for ParametricFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParametricFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frank" => Ok(ParametricFamily::Frank),
            "gumbel" => Ok(ParametricFamily::Gumbel),
            "clayton" => Ok(ParametricFamily::Clayton),
            "joe" => Ok(ParametricFamily::Joe),
            "gaussian" => Ok(ParametricFamily::Gaussian),
            other => Err(Error::validation(format!("unknown copula family `{other}`"))),
        }
    }
}

/// A single-parameter bivariate copula, optionally rotated by 180° (density
/// evaluated at `(1−u, 1−v)`), which swaps upper and lower tail dependence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParametricCopula {
    pub family: ParametricFamily,
    pub param: f64,
    pub rotated: bool,
}

impl ParametricCopula {
    pub fn new(family: ParametricFamily, param: f64, rotated: bool) -> Result<Self> {
        if !param.is_finite() {
            return Err(Error::validation("copula parameter must be finite"));
        }
        let ok = match family {
            ParametricFamily::Frank => param != 0.0,
            ParametricFamily::Gumbel | ParametricFamily::Joe => param >= 1.0,
            ParametricFamily::Clayton => param > 0.0,
            ParametricFamily::Gaussian => param > -1.0 && param < 1.0,
        };
        if !ok {
            return Err(Error::validation(format!(
                "parameter {param} out of range for {family} copula"
            )));
        }
        Ok(Self { family, param, rotated })
    }

    /// Draw one pair from the copula.
    pub fn sample_pair<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let (u, v) = match self.family {
            ParametricFamily::Clayton => {
                let gamma = self.param;
                let frailty = GammaDist::new(1.0 / gamma, 1.0).unwrap().sample(rng);
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                (
                    (-(e1 / frailty).ln_1p() / gamma).exp(),
                    (-(e2 / frailty).ln_1p() / gamma).exp(),
                )
            }
            ParametricFamily::Gumbel => {
                let theta = self.param;
                if theta == 1.0 {
                    (Open01.sample(rng), Open01.sample(rng))
                } else {
                    let frailty = positive_stable(1.0 / theta, rng);
                    let e1: f64 = Exp1.sample(rng);
                    let e2: f64 = Exp1.sample(rng);
                    (
                        (-(e1 / frailty).powf(1.0 / theta)).exp(),
                        (-(e2 / frailty).powf(1.0 / theta)).exp(),
                    )
                }
            }
            ParametricFamily::Joe => {
                let theta = self.param;
                if theta == 1.0 {
                    (Open01.sample(rng), Open01.sample(rng))
                } else {
                    let frailty = sibuya(1.0 / theta, rng);
                    let e1: f64 = Exp1.sample(rng);
                    let e2: f64 = Exp1.sample(rng);
                    let psi = |s: f64| 1.0 - (-(-s).exp_m1()).powf(1.0 / theta);
                    (psi(e1 / frailty), psi(e2 / frailty))
                }
            }
            ParametricFamily::Frank => {
                let theta = self.param;
                let u: f64 = Open01.sample(rng);
                let p: f64 = Open01.sample(rng);
                // Closed-form conditional inversion of ∂C/∂u.
                let a = (-theta * u).exp_m1();
                let d = (-theta).exp_m1();
                let b = p * d / (1.0 + a * (1.0 - p));
                let v = -b.ln_1p() / theta;
                (u, v)
            }
            ParametricFamily::Gaussian => {
                let rho = self.param;
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let w = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                (crate::numeric::normal_cdf(z1), crate::numeric::normal_cdf(w))
            }
        };
        let (u, v) = (clamp_interior(u), clamp_interior(v));
        if self.rotated {
            (1.0 - u, 1.0 - v)
        } else {
            (u, v)
        }
    }

    /// Draw `n` pairs.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<CopulaSample> {
        if n == 0 {
            return Err(Error::validation("n must be >= 1"));
        }
        CopulaSample::new((0..n).map(|_| self.sample_pair(rng)).collect())
    }

    /// Log-density at strictly interior `(u, v)`.
    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        if !(u.is_finite() && v.is_finite()) || u <= 0.0 || u >= 1.0 || v <= 0.0 || v >= 1.0 {
            return Err(Error::validation(format!(
                "density arguments must lie strictly inside (0,1)^2, got ({u}, {v})"
            )));
        }
        let (u, v) = if self.rotated { (1.0 - u, 1.0 - v) } else { (u, v) };
        let p = self.param;
        Ok(match self.family {
            ParametricFamily::Frank => {
                let a = (-p * u).exp();
                let b = (-p * v).exp();
                let inner = a + b - a * b - (-p).exp();
                (p * (-(-p).exp_m1())).ln() - p * (u + v) - 2.0 * inner.abs().ln()
            }
            ParametricFamily::Gumbel => {
                let x = -u.ln();
                let y = -v.ln();
                let s = x.powf(p) + y.powf(p);
                let a = s.powf(1.0 / p);
                -a + (p - 1.0) * (x.ln() + y.ln()) - u.ln() - v.ln() - (2.0 * p - 1.0) * a.ln()
                    + (a + p - 1.0).ln()
            }
            ParametricFamily::Clayton => {
                let s = (-p * u.ln()).exp_m1() + (-p * v.ln()).exp_m1() + 1.0;
                (1.0 + p).ln() - (1.0 + p) * (u.ln() + v.ln()) - (2.0 + 1.0 / p) * s.ln()
            }
            ParametricFamily::Joe => {
                let la = (-u).ln_1p(); // ln(1-u)
                let lb = (-v).ln_1p();
                let a = (p * la).exp();
                let b = (p * lb).exp();
                let s = a + b - a * b;
                (1.0 / p - 2.0) * s.ln() + (p - 1.0) * (la + lb) + (p - 1.0 + s).ln()
            }
            ParametricFamily::Gaussian => {
                let x = normal_quantile(u);
                let y = normal_quantile(v);
                let r2 = p * p;
                -0.5 * (1.0 - r2).ln()
                    - (r2 * (x * x + y * y) - 2.0 * p * x * y) / (2.0 * (1.0 - r2))
            }
        })
    }

    /// Kendall's τ implied by the parameter. Rotation preserves τ.
    pub fn analytic_tau(&self) -> f64 {
        analytic_tau(self.family, self.param)
    }
}

/// Positive-stable draw with Laplace transform exp(−s^α), 0 < α < 1
/// (Chambers–Mallows–Stuck).
fn positive_stable<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let unit: f64 = Open01.sample(rng);
    let v = std::f64::consts::PI * unit;
    let e: f64 = Exp1.sample(rng);
    let s1 = (alpha * v).sin() / v.sin().powf(1.0 / alpha);
    let s2 = (((1.0 - alpha) * v).sin() / e).powf((1.0 - alpha) / alpha);
    s1 * s2
}

/// Sibuya(α) draw via inversion of the survival function
/// `F̄(n) = Γ(n+1−α)/(Γ(1−α) Γ(n+1))`.
///
/// The distribution is heavy-tailed (`F̄(n) ~ n^{−α}/Γ(1−α)`), so the
/// quantile can be astronomically large for uniforms near 1; the search is
/// a bracketed bisection on the closed-form survival, and indices beyond
/// the exact-integer range of f64 are returned as reals — only the ratio
/// `E/W` enters the copula, so sub-integer resolution is irrelevant there.
fn sibuya<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let t: f64 = Open01.sample(rng);
    let ln_survival = |n: f64| ln_gamma(n + 1.0 - alpha) - ln_gamma(1.0 - alpha) - ln_gamma(n + 1.0);
    let ln_t = t.ln();
    if ln_survival(1.0) <= ln_t {
        return 1.0;
    }
    // Asymptotic seed, then expand to a certain bracket.
    let mut hi = ((-ln_t - ln_gamma(1.0 - alpha)) / alpha).exp().max(2.0);
    let mut lo = 1.0;
    while ln_survival(hi) > ln_t {
        lo = hi;
        hi *= 4.0;
    }
    // Bisect to the smallest n with survival ≤ t.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_survival(mid) <= ln_t {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1.0 && hi.floor() == lo.floor() + 1.0 {
            break;
        }
    }
    if hi <= 2f64.powi(53) {
        // Smallest integer index with survival below the uniform.
        let mut n = hi.ceil();
        while n > 1.0 && ln_survival(n - 1.0) <= ln_t {
            n -= 1.0;
        }
        n
    } else {
        hi
    }
}

/// Shared quadrature rule for the smooth τ integrands below.
fn gl_nodes() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre_unit(128))
}

/// First-order Debye function D₁(x) = (1/x) ∫₀ˣ t/(eᵗ−1) dt for x > 0.
fn debye1(x: f64) -> f64 {
    let upper = x.min(60.0); // integrand ~ t e^{-t}; the tail beyond 60 is < 1e-24
    let (nodes, weights) = gl_nodes();
    let mut s = 0.0;
    for (&node, &w) in nodes.iter().zip(weights) {
        let t = node * upper;
        s += w * if t < 1e-8 { 1.0 - 0.5 * t } else { t / t.exp_m1() };
    }
    s * upper / x
}

/// Kendall's τ as a function of the family parameter.
pub fn analytic_tau(family: ParametricFamily, param: f64) -> f64 {
    match family {
        ParametricFamily::Clayton => param / (param + 2.0),
        ParametricFamily::Gumbel => 1.0 - 1.0 / param,
        ParametricFamily::Gaussian => 2.0 / std::f64::consts::PI * param.asin(),
        ParametricFamily::Frank => {
            let x = param.abs();
            let tau = 1.0 - 4.0 / x * (1.0 - debye1(x));
            if param < 0.0 {
                -tau
            } else {
                tau
            }
        }
        ParametricFamily::Joe => {
            if param == 1.0 {
                return 0.0;
            }
            // τ = 1 + 4 ∫₀¹ φ(t)/φ'(t) dt with generator φ(t) = −ln(1−(1−t)^θ).
            let theta = param;
            let (nodes, weights) = gl_nodes();
            let mut s = 0.0;
            for (&t, &w) in nodes.iter().zip(weights) {
                let ln_1t = (-t).ln_1p();
                let q = (theta * ln_1t).exp(); // (1-t)^θ
                let one_minus_q = 1.0 - q;
                if one_minus_q <= 0.0 {
                    continue;
                }
                // φ/φ' = ln(1−q)·(1−q)/(θ(1−t)^{θ−1}); negative on (0,1).
                s += w * one_minus_q.ln() * one_minus_q / (theta * ((theta - 1.0) * ln_1t).exp());
            }
            1.0 + 4.0 * s
        }
    }
}

/// Invert τ ↦ parameter for τ strictly inside (0,1).
///
/// Clayton, Gumbel, and Gauss have closed forms; Frank and Joe bisect the
/// analytic τ curve to 1e−10.
pub fn tau_to_param(family: ParametricFamily, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::validation(format!("tau must lie in (0,1), got {tau}")));
    }
    Ok(match family {
        ParametricFamily::Clayton => 2.0 * tau / (1.0 - tau),
        ParametricFamily::Gumbel => 1.0 / (1.0 - tau),
        ParametricFamily::Gaussian => (std::f64::consts::PI * tau / 2.0).sin(),
        ParametricFamily::Frank | ParametricFamily::Joe => {
            let lo0 = if family == ParametricFamily::Joe { 1.0 } else { 1e-9 };
            let mut lo = lo0;
            let mut hi = 2.0_f64.max(lo0 + 1.0);
            while analytic_tau(family, hi) < tau {
                lo = hi;
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(Error::validation(format!(
                        "tau {tau} out of reach for {family} copula"
                    )));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let t = analytic_tau(family, mid);
                if (t - tau).abs() < 1e-11 {
                    return Ok(mid);
                }
                if t < tau {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    })
}

fn param_range(family: ParametricFamily) -> (f64, f64) {
    match family {
        ParametricFamily::Frank => (1e-6, 500.0),
        ParametricFamily::Gumbel => (1.0, 500.0),
        ParametricFamily::Clayton => (1e-6, 500.0),
        ParametricFamily::Joe => (1.0, 500.0),
        ParametricFamily::Gaussian => (-1.0 + 1e-9, 1.0 - 1e-9),
    }
}

/// Parameter seed from the sample's empirical Kendall τ.
fn tau_seed(family: ParametricFamily, tau_hat: f64) -> f64 {
    if family == ParametricFamily::Gaussian {
        let t = tau_hat.clamp(-0.99, 0.99);
        return (std::f64::consts::PI * t / 2.0).sin();
    }
    let t = tau_hat.clamp(0.01, 0.95);
    tau_to_param(family, t).expect("clamped tau is in range")
}

/// Fit the copula parameter by maximum likelihood.
///
/// One-dimensional golden-section search over the valid parameter range,
/// seeded from the τ-inversion estimate; the returned fit never scores
/// below the seed.
pub fn fit_mle(family: ParametricFamily, rotated: bool, data: &CopulaSample) -> Result<ParametricCopula> {
    if data.len() < 10 {
        return Err(Error::data(format!(
            "need at least 10 observations to fit, got {}",
            data.len()
        )));
    }
    let loglik = |param: f64| -> f64 {
        match ParametricCopula::new(family, param, rotated) {
            Ok(c) => data
                .rows()
                .iter()
                .map(|&(u, v)| c.log_density(u, v).unwrap_or(f64::NEG_INFINITY))
                .sum(),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let (mut a, mut b) = param_range(family);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = loglik(c);
    let mut fd = loglik(d);
    for _ in 0..120 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = loglik(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = loglik(d);
        }
        if (b - a).abs() < 1e-10 * (1.0 + b.abs()) {
            break;
        }
    }
    let optimum = 0.5 * (a + b);
    let f_opt = loglik(optimum);

    let tau_hat = crate::evaluate::kendall_tau(data)?;
    let seed = tau_seed(family, tau_hat);
    let f_seed = loglik(seed);

    let best = if f_opt >= f_seed { optimum } else { seed };
    if !loglik(best).is_finite() {
        return Err(Error::data(
            "likelihood non-finite over the whole parameter range: degenerate data",
        ));
    }
    ParametricCopula::new(family, best, rotated)
}
