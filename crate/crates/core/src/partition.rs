//! Deterministic mathematics of generalised-partition-of-unity copulas.
//!
//! A generating function is the pmf of a discrete distribution `φ_{i,θ}(u)`
//! in the continuous parameter `u ∈ [0,1]`: at every `u` the values sum to
//! one over the index `i`. Integrating each `φ_i` over `u` gives the prior
//! predictive masses `α_i`, whose partial sums are the breakpoints
//! `Λ_j` of a partition of the unit interval. Normalising `φ_i/α_i` yields
//! beta densities, so a mixture over partition cells is a mixture of
//! products of beta densities — the copula density evaluated here.
//!
//! Two families are supported:
//!
//! - `Binomial` with integer order θ: a finite partition with `Λ_j = j/θ`
//!   and cell kernel Beta(j, θ−j+1) (the Bernstein basis).
//! - `NegBinomial` with continuous θ > 0: an infinite partition with
//!   `Λ_j = j/(θ+j)` accumulating at 1 and cell kernel Beta(j, θ+1), which
//!   is what puts mass in the joint upper corner.
//!
//! All density arithmetic is in log space; binomial coefficients go through
//! log-gamma so large θ cannot overflow.

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use statrs::function::gamma::ln_gamma;

/// Tail-mass threshold at which infinite sums over cells are truncated.
pub const TAIL_TRUNCATION: f64 = 1e-12;
/// Hard cap on the number of cells visited by truncated sums.
pub const MAX_CELLS: u64 = 100_000;
/// Largest cell index the locator will report before flagging the input as
/// too close to the boundary for the f64 lattice.
const MAX_LOCATE_INDEX: f64 = 4.6e18;

/// Generating-function family of a partition copula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratingFamily {
    /// Binomial pmf; finite partition; the Bernstein copula basis.
    Binomial,
    /// Negative-binomial pmf; infinite partition with upper tail dependence.
    NegBinomial,
}

impl GeneratingFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeneratingFamily::Binomial => "binomial",
            GeneratingFamily::NegBinomial => "negbinomial",
        }
    }
}

impl std::fmt::Display for GeneratingFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A generating function with its smoothing parameter and rotation flag.
///
/// θ must be positive; for the binomial family it must be a positive
/// integer. Rotation evaluates every density at `(1−u, 1−v)`, turning upper
/// tail dependence into lower tail dependence. Rotation does not move the
/// partition itself: breakpoints and the locator always live on the
/// unrotated scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratingSpec {
    family: GeneratingFamily,
    theta: f64,
    rotated: bool,
}

impl GeneratingSpec {
    pub fn new(family: GeneratingFamily, theta: f64, rotated: bool) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::validation(format!(
                "theta must be finite and > 0, got {theta}"
            )));
        }
        if family == GeneratingFamily::Binomial && (theta.fract() != 0.0 || theta < 1.0) {
            return Err(Error::validation(format!(
                "binomial theta must be a positive integer, got {theta}"
            )));
        }
        Ok(Self { family, theta, rotated })
    }

    pub fn binomial(theta: u64, rotated: bool) -> Result<Self> {
        Self::new(GeneratingFamily::Binomial, theta as f64, rotated)
    }

    pub fn neg_binomial(theta: f64, rotated: bool) -> Result<Self> {
        Self::new(GeneratingFamily::NegBinomial, theta, rotated)
    }

    pub fn family(&self) -> GeneratingFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn rotated(&self) -> bool {
        self.rotated
    }

    /// Largest valid component index, `None` when the partition is infinite.
    pub fn max_index(&self) -> Option<u64> {
        match self.family {
            GeneratingFamily::Binomial => Some(self.theta as u64),
            GeneratingFamily::NegBinomial => None,
        }
    }

    fn check_index(&self, i: u64) -> Result<()> {
        if i == 0 {
            return Err(Error::validation("component index must be >= 1"));
        }
        if let Some(max) = self.max_index() {
            if i > max {
                return Err(Error::validation(format!(
                    "component index {i} out of range for binomial theta {}",
                    self.theta
                )));
            }
        }
        Ok(())
    }

    /// Generating-function value `φ_{i,θ}(u)` for `u ∈ [0,1]`.
    ///
    /// Binomial: `C(θ−1, i−1) u^{i−1} (1−u)^{θ−i}` on `i = 1..θ`.
    /// Negative binomial: `Γ(θ+i−1)/(Γ(θ)Γ(i)) (1−u)^θ u^{i−1}` on `i ≥ 1`.
    pub fn pmf(&self, i: u64, u: f64) -> Result<f64> {
        self.check_index(i)?;
        if !u.is_finite() || !(0.0..=1.0).contains(&u) {
            return Err(Error::validation(format!("u must lie in [0,1], got {u}")));
        }
        let theta = self.theta;
        let ifl = i as f64;
        // The boundary values are limits of the log-space formula; handle
        // them directly so 0·ln(0) never appears.
        if u == 0.0 {
            return Ok(if i == 1 { 1.0 } else { 0.0 });
        }
        if u == 1.0 {
            return Ok(match self.family {
                GeneratingFamily::Binomial => {
                    if ifl == theta {
                        1.0
                    } else {
                        0.0
                    }
                }
                GeneratingFamily::NegBinomial => 0.0,
            });
        }
        let ln = match self.family {
            GeneratingFamily::Binomial => {
                ln_gamma(theta) - ln_gamma(ifl) - ln_gamma(theta - ifl + 1.0)
                    + (ifl - 1.0) * u.ln()
                    + (theta - ifl) * (-u).ln_1p()
            }
            GeneratingFamily::NegBinomial => {
                ln_gamma(theta + ifl - 1.0) - ln_gamma(theta) - ln_gamma(ifl)
                    + theta * (-u).ln_1p()
                    + (ifl - 1.0) * u.ln()
            }
        };
        Ok(ln.exp())
    }

    /// Prior predictive mass `α_{i,θ} = ∫ φ_{i,θ}(u) du`.
    ///
    /// Binomial: `1/θ` for every valid index. Negative binomial:
    /// `θ/((θ+i−1)(θ+i))`, whose partial sums telescope to `i/(θ+i)`.
    pub fn alpha(&self, i: u64) -> Result<f64> {
        self.check_index(i)?;
        let theta = self.theta;
        let ifl = i as f64;
        Ok(match self.family {
            GeneratingFamily::Binomial => 1.0 / theta,
            GeneratingFamily::NegBinomial => theta / ((theta + ifl - 1.0) * (theta + ifl)),
        })
    }

    /// Partition breakpoint `Λ_{j,θ} = Σ_{l≤j} α_{l,θ}`, with `Λ_0 = 0`.
    pub fn breakpoint(&self, j: u64) -> Result<f64> {
        if j == 0 {
            return Ok(0.0);
        }
        let theta = self.theta;
        let jfl = j as f64;
        match self.family {
            GeneratingFamily::Binomial => {
                if jfl > theta {
                    Err(Error::validation(format!(
                        "breakpoint index {j} exceeds binomial theta {theta}"
                    )))
                } else {
                    Ok(jfl / theta)
                }
            }
            GeneratingFamily::NegBinomial => Ok(jfl / (theta + jfl)),
        }
    }

    /// Interval locator `h_θ(y)`: the unique `j ≥ 1` with
    /// `Λ_{j−1} < y ≤ Λ_j`.
    ///
    /// Closed forms: `ceil(θ·y)` for binomial, `ceil(θ·y/(1−y))` for the
    /// negative binomial. The candidate is then nudged against the actual
    /// breakpoints so the postcondition holds bit-for-bit even when the
    /// multiplication rounds across a cell edge.
    pub fn locate(&self, y: f64) -> Result<u64> {
        if !y.is_finite() || y <= 0.0 || y >= 1.0 {
            return Err(Error::validation(format!(
                "locator input must lie strictly inside (0,1), got {y}"
            )));
        }
        let theta = self.theta;
        let candidate = match self.family {
            GeneratingFamily::Binomial => (theta * y).ceil().min(theta),
            GeneratingFamily::NegBinomial => (theta * y / (1.0 - y)).ceil(),
        };
        if candidate > MAX_LOCATE_INDEX {
            return Err(Error::validation(format!(
                "locator index overflow for y={y} under theta={theta}"
            )));
        }
        let mut j = (candidate as u64).max(1);
        // Fix-ups against the exact breakpoint arithmetic.
        while y > self.breakpoint(j)? {
            j += 1;
        }
        while j > 1 && y <= self.breakpoint(j - 1)? {
            j -= 1;
        }
        Ok(j)
    }

    /// Beta kernel of cell `j`: Beta(j, θ−j+1) for binomial,
    /// Beta(j, θ+1) for the negative binomial. Rotation is recorded on the
    /// kernel and applied at evaluation time.
    pub fn cell_kernel(&self, j: u64) -> Result<BetaKernel> {
        self.check_index(j)?;
        let jfl = j as f64;
        let (a, b) = match self.family {
            GeneratingFamily::Binomial => (jfl, self.theta - jfl + 1.0),
            GeneratingFamily::NegBinomial => (jfl, self.theta + 1.0),
        };
        Ok(BetaKernel::new(a, b, self.rotated))
    }

    /// Log-density of the cell-`j` beta kernel at interior `u`.
    ///
    /// Equals `ln φ_{j,θ}(u) − ln α_{j,θ}`: normalising the generating
    /// function by its prior predictive is exactly what turns the partition
    /// mixture into a mixture of beta densities.
    pub fn component_log_density(&self, j: u64, u: f64) -> Result<f64> {
        if !u.is_finite() || u <= 0.0 || u >= 1.0 {
            return Err(Error::validation(format!(
                "density argument must lie strictly inside (0,1), got {u}"
            )));
        }
        Ok(self.cell_kernel(j)?.log_density(u))
    }

    /// Index at which truncated sums over cells may stop: the first `i`
    /// whose remaining tail mass `1 − Λ_i` drops below [`TAIL_TRUNCATION`],
    /// capped at [`MAX_CELLS`].
    pub fn truncation_index(&self) -> u64 {
        match self.family {
            GeneratingFamily::Binomial => self.theta as u64,
            GeneratingFamily::NegBinomial => {
                // 1 − Λ_i = θ/(θ+i) < ε  ⇔  i > θ(1/ε − 1)
                let needed = self.theta * (1.0 / TAIL_TRUNCATION - 1.0);
                if needed >= MAX_CELLS as f64 {
                    MAX_CELLS
                } else {
                    (needed.ceil() as u64).max(1)
                }
            }
        }
    }
}

/// A beta density with fixed shape parameters and optional rotation,
/// precomputed for repeated evaluation in log space.
#[derive(Debug, Clone, Copy)]
pub struct BetaKernel {
    a: f64,
    b: f64,
    ln_norm: f64,
    rotated: bool,
}

impl BetaKernel {
    pub fn new(a: f64, b: f64, rotated: bool) -> Self {
        let ln_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
        Self { a, b, ln_norm, rotated }
    }

    pub fn shape(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Log-density at interior `u`; the caller guarantees `0 < u < 1`.
    #[inline]
    pub fn log_density(&self, u: f64) -> f64 {
        let x = if self.rotated { 1.0 - u } else { u };
        self.ln_norm + (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p()
    }

    /// Log-density from precomputed `ln x` and `ln(1−x)` of the (already
    /// rotation-adjusted) argument. Hot-loop form used by the sampler.
    #[inline]
    pub fn log_density_from_logs(&self, ln_x: f64, ln_1mx: f64) -> f64 {
        self.ln_norm + (self.a - 1.0) * ln_x + (self.b - 1.0) * ln_1mx
    }
}

/// Log-density of a truncated stick-breaking mixture of cell kernels at
/// `(u, v)`, both strictly interior.
///
/// `weights` and `atoms` describe the retained components; each atom is
/// mapped through the locator to its cell kernel. Whatever stick mass the
/// truncation left unassigned is treated as uniform density 1 — the exact
/// prior-mean density of a fresh atom under the uniform base measure, since
/// `E_y[φ_{h(y)}(u)/α_{h(y)}] = Σ_j φ_j(u) = 1`.
pub fn mixture_log_density(
    spec: &GeneratingSpec,
    weights: &[f64],
    atoms: &[(f64, f64)],
    u: f64,
    v: f64,
) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::validation("mixture must have at least one component"));
    }
    if weights.len() != atoms.len() {
        return Err(Error::validation(format!(
            "{} weights but {} atoms",
            weights.len(),
            atoms.len()
        )));
    }
    if !(u.is_finite() && v.is_finite()) || u <= 0.0 || u >= 1.0 || v <= 0.0 || v >= 1.0 {
        return Err(Error::validation(format!(
            "density arguments must lie strictly inside (0,1)^2, got ({u}, {v})"
        )));
    }
    let total: f64 = weights.iter().sum();
    if !total.is_finite() || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::validation("mixture weights must be nonnegative and finite"));
    }
    if total > 1.0 + 1e-10 {
        return Err(Error::validation(format!("mixture weights sum to {total} > 1")));
    }
    // Rotation flips the evaluation point once; the kernels then act on the
    // unrotated scale.
    let (ue, ve) = if spec.rotated() { (1.0 - u, 1.0 - v) } else { (u, v) };
    let unrotated = GeneratingSpec::new(spec.family(), spec.theta(), false)?;
    let mut terms = Vec::with_capacity(weights.len() + 1);
    for (&w, &(y1, y2)) in weights.iter().zip(atoms) {
        if w == 0.0 {
            continue;
        }
        let j1 = unrotated.locate(y1)?;
        let j2 = unrotated.locate(y2)?;
        let k1 = unrotated.cell_kernel(j1)?;
        let k2 = unrotated.cell_kernel(j2)?;
        terms.push(w.ln() + k1.log_density(ue) + k2.log_density(ve));
    }
    let remainder = 1.0 - total;
    if remainder > 0.0 {
        terms.push(remainder.ln());
    }
    if terms.is_empty() {
        return Err(Error::validation("mixture has no positive-weight component"));
    }
    Ok(log_sum_exp(&terms))
}

/// Upper tail-dependence coefficient of the diagonal-dominance
/// negative-binomial copula with integer θ: `1 − C(2θ, θ)/4^θ`.
///
/// This is a diagnostic for the fixed-weight construction only; the fitted
/// posterior copula has no closed-form tail coefficient.
pub fn upper_tail_coefficient(theta: u64) -> Result<f64> {
    if theta == 0 {
        return Err(Error::validation("theta must be a positive integer"));
    }
    let t = theta as f64;
    let ln_central = ln_gamma(2.0 * t + 1.0) - 2.0 * ln_gamma(t + 1.0) - t * 4.0_f64.ln();
    Ok(1.0 - ln_central.exp())
}
