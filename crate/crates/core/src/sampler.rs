//! Slice-augmented Gibbs sampler for the partition-copula mixture.
//!
//! The infinite stick-breaking mixture is truncated exactly by per-observation
//! uniform slice variables: only components whose weight exceeds an
//! observation's slice can host it, so every sweep touches finitely many
//! components. One sweep runs four steps in order:
//!
//! 1. resample the stick fractions of all components up to the largest
//!    allocated index from their beta conditionals, redraw the slices, and
//!    extend the stick list from the prior until the retained weight covers
//!    `1 − min slice`;
//! 2. move each occupied component's atom pair by adaptive random-walk
//!    Metropolis–Hastings on the logit scale (the conditional is stepwise
//!    constant in the atom, so proposals that stay in a cell only pay the
//!    logit Jacobian), and refresh unoccupied atoms from the uniform base
//!    measure;
//! 3. reallocate every observation over the finite set of components whose
//!    weight clears its slice;
//! 4. update the smoothing parameter θ by random walk — on the log scale with
//!    a Jacobian correction for the continuous negative-binomial case, by a
//!    ±1 step reflected at 1 for the integer binomial case. The partition
//!    moves with θ, so every atom is relocated under the proposal.
//!
//! Proposal scales adapt toward a 0.44 acceptance rate during burn-in and are
//! frozen afterwards, which keeps the post-burn-in chain a fixed-kernel
//! Markov chain with the correct stationary distribution.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta as BetaDist, Distribution, Open01, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::data::CopulaSample;
use crate::error::{Error, Result};
use crate::numeric::{clamp_interior, logit, sigmoid};
use crate::partition::{GeneratingFamily, GeneratingSpec};
use crate::rng::{task_rng, STREAM_CHAIN};

/// Components with weight at or below this floor are not persisted in draws.
pub const EMISSION_FLOOR: f64 = 1e-12;
/// Hard cap on stick-extension growth; exceeding it is an internal error.
pub const MAX_COMPONENTS: usize = 1_000_000;

/// Prior on the smoothing parameter θ.
///
/// The continuous gamma prior pairs with the negative-binomial family, the
/// geometric-tail prior `p(θ) ∝ decay^θ` on {1,2,...} with the binomial
/// family. Defaults are weakly informative and cover the θ ≈ 3–10 regime
/// where moderate tail dependence lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaPrior {
    Gamma { shape: f64, rate: f64 },
    GeometricTail { decay: f64 },
}

impl ThetaPrior {
    pub fn default_for(family: GeneratingFamily) -> Self {
        match family {
            GeneratingFamily::NegBinomial => ThetaPrior::Gamma { shape: 2.0, rate: 0.1 },
            GeneratingFamily::Binomial => ThetaPrior::GeometricTail { decay: 0.95 },
        }
    }

    pub fn validate(&self, family: GeneratingFamily) -> Result<()> {
        match (self, family) {
            (ThetaPrior::Gamma { shape, rate }, GeneratingFamily::NegBinomial) => {
                if *shape > 0.0 && *rate > 0.0 && shape.is_finite() && rate.is_finite() {
                    Ok(())
                } else {
                    Err(Error::validation("gamma prior requires positive shape and rate"))
                }
            }
            (ThetaPrior::GeometricTail { decay }, GeneratingFamily::Binomial) => {
                if *decay > 0.0 && *decay < 1.0 {
                    Ok(())
                } else {
                    Err(Error::validation("geometric prior decay must lie in (0,1)"))
                }
            }
            (ThetaPrior::Gamma { .. }, GeneratingFamily::Binomial) => Err(Error::validation(
                "binomial theta is integer-valued; use a geometric prior",
            )),
            (ThetaPrior::GeometricTail { .. }, GeneratingFamily::NegBinomial) => {
                Err(Error::validation(
                    "negative-binomial theta is continuous; use a gamma prior",
                ))
            }
        }
    }

    /// Log prior density (or pmf) at θ.
    pub fn log_density(&self, theta: f64) -> f64 {
        match *self {
            ThetaPrior::Gamma { shape, rate } => {
                if theta <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * theta.ln() - rate * theta
            }
            ThetaPrior::GeometricTail { decay } => {
                if theta < 1.0 || theta.fract() != 0.0 {
                    return f64::NEG_INFINITY;
                }
                (1.0 - decay).ln() + (theta - 1.0) * decay.ln()
            }
        }
    }

    /// Draw θ from the prior.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ThetaPrior::Gamma { shape, rate } => {
                rand_distr::Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
            }
            ThetaPrior::GeometricTail { decay } => {
                let u: f64 = Open01.sample(rng);
                1.0 + (u.ln() / decay.ln()).floor()
            }
        }
    }
}

/// Full sampler configuration; a run is determined by this plus the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub family: GeneratingFamily,
    pub rotated: bool,
    /// Dirichlet process concentration M.
    pub concentration: f64,
    pub theta_prior: ThetaPrior,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Target acceptance rate of the adaptive random-walk kernels.
    pub adapt_target: f64,
    pub initial_atom_log_scale: f64,
    pub initial_theta_log_scale: f64,
}

impl SamplerConfig {
    pub fn new(family: GeneratingFamily, seed: u64) -> Self {
        Self {
            family,
            rotated: false,
            concentration: 1.0,
            theta_prior: ThetaPrior::default_for(family),
            iterations: 20_000,
            burn_in: 10_000,
            thinning: 1,
            seed,
            adapt_target: 0.44,
            initial_atom_log_scale: 0.0,
            initial_theta_log_scale: -0.7,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::validation(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::validation("thinning must be >= 1"));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::validation("concentration M must be positive"));
        }
        if !(self.adapt_target > 0.0 && self.adapt_target < 1.0) {
            return Err(Error::validation("adaptation target must lie in (0,1)"));
        }
        self.theta_prior.validate(self.family)
    }
}

/// Diminishing-adaptation update for a proposal log-scale: after a batch
/// with acceptance rate `acceptance_rate`, move the log-scale by
/// `γ_k (rate − target)` with `γ_k = min(0.01, k^{−1/2})`, clamped to
/// [−10, 10].
pub fn adapted_log_scale(step: u64, acceptance_rate: f64, target: f64, log_scale: f64) -> f64 {
    let gamma = 0.01_f64.min((step as f64).powf(-0.5));
    (log_scale + gamma * (acceptance_rate - target)).clamp(-10.0, 10.0)
}

/// A self-tuning proposal scale with batch acceptance counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveScale {
    pub log_scale: f64,
    pub frozen: bool,
    batch_accepted: u64,
    batch_attempted: u64,
    adaptations: u64,
    total_accepted: u64,
    total_attempted: u64,
}

impl AdaptiveScale {
    pub fn new(initial_log_scale: f64) -> Self {
        Self {
            log_scale: initial_log_scale,
            frozen: false,
            batch_accepted: 0,
            batch_attempted: 0,
            adaptations: 0,
            total_accepted: 0,
            total_attempted: 0,
        }
    }

    pub fn sd(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn record(&mut self, accepted: bool) {
        self.batch_attempted += 1;
        self.total_attempted += 1;
        if accepted {
            self.batch_accepted += 1;
            self.total_accepted += 1;
        }
    }

    /// Consume the current batch and adapt the scale (no-op once frozen).
    pub fn end_batch(&mut self, target: f64) {
        if self.batch_attempted == 0 {
            return;
        }
        if !self.frozen {
            self.adaptations += 1;
            let rate = self.batch_accepted as f64 / self.batch_attempted as f64;
            self.log_scale = adapted_log_scale(self.adaptations, rate, target, self.log_scale);
        }
        self.batch_accepted = 0;
        self.batch_attempted = 0;
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.total_attempted == 0 {
            f64::NAN
        } else {
            self.total_accepted as f64 / self.total_attempted as f64
        }
    }
}

/// Adaptation state for the two random-walk kernels. Atom moves pool their
/// acceptance statistics across components and coordinates: components are
/// exchangeable and short-lived, so a per-component scale would never see
/// enough proposals to tune.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptState {
    pub atom: AdaptiveScale,
    pub theta: AdaptiveScale,
}

/// Full Markov-chain state.
///
/// `weights[s]` is always the stick-breaking product of `sticks[..=s]`;
/// `allocations` are 0-based component indices; `slices[i] < weights[allocations[i]]`
/// and `Σ weights > 1 − min(slices)` hold between sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: f64,
    pub sticks: Vec<f64>,
    pub weights: Vec<f64>,
    pub atoms: Vec<(f64, f64)>,
    pub allocations: Vec<usize>,
    pub slices: Vec<f64>,
    pub adapt: AdaptState,
}

impl ChainState {
    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    /// Number of distinct allocated components.
    pub fn occupied_count(&self) -> usize {
        let mut seen = vec![false; self.weights.len()];
        let mut count = 0;
        for &z in &self.allocations {
            if !seen[z] {
                seen[z] = true;
                count += 1;
            }
        }
        count
    }

    /// Check every structural invariant; `Err(Internal)` describes the first
    /// violation found.
    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.sticks.len() != k || self.atoms.len() != k {
            return Err(Error::internal("stick, weight, and atom lists must align"));
        }
        if self.allocations.len() != self.slices.len() {
            return Err(Error::internal("allocations and slices must align"));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::internal(format!("theta out of range: {}", self.theta)));
        }
        let mut remaining = 1.0;
        for (s, (&eta, &w)) in self.sticks.iter().zip(&self.weights).enumerate() {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::internal(format!("stick {s} out of (0,1): {eta}")));
            }
            if (w - eta * remaining).abs() > 1e-12 {
                return Err(Error::internal(format!(
                    "weight {s} breaks the stick-breaking recursion"
                )));
            }
            remaining *= 1.0 - eta;
        }
        for (s, &(a, b)) in self.atoms.iter().enumerate() {
            if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
                return Err(Error::internal(format!("atom {s} not interior: ({a}, {b})")));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if total > 1.0 + 1e-10 {
            return Err(Error::internal(format!("weights sum to {total} > 1")));
        }
        let mut min_slice = 1.0_f64;
        for (i, (&z, &xi)) in self.allocations.iter().zip(&self.slices).enumerate() {
            if z >= k {
                return Err(Error::internal(format!("allocation {i} points beyond components")));
            }
            if !(xi > 0.0 && xi < self.weights[z]) {
                return Err(Error::internal(format!(
                    "slice {i} = {xi} not below its component weight {}",
                    self.weights[z]
                )));
            }
            min_slice = min_slice.min(xi);
        }
        if total <= 1.0 - min_slice {
            return Err(Error::internal(format!(
                "retained weight {total} does not cover 1 - min slice {min_slice}"
            )));
        }
        Ok(())
    }
}

/// Per-component sufficient statistics of the allocated observations.
///
/// The beta kernels depend on the data only through these sums, which makes
/// atom and θ moves O(1) per component regardless of cluster size.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComponentStats {
    pub n: f64,
    pub sum_ln_u: f64,
    pub sum_ln_1u: f64,
    pub sum_ln_v: f64,
    pub sum_ln_1v: f64,
}

/// Cell log-likelihood of one coordinate's member sums under cell `j`:
/// `n·ln_norm(j) + (j−1)·Σln x + b(j)·Σln(1−x)`.
fn cell_loglik(
    family: GeneratingFamily,
    theta: f64,
    ln_gamma_theta: f64,
    j: u64,
    n: f64,
    sum_ln: f64,
    sum_ln1m: f64,
) -> f64 {
    let jf = j as f64;
    let (ln_norm, bexp) = match family {
        GeneratingFamily::NegBinomial => (
            ln_gamma(jf + theta + 1.0) - ln_gamma(jf) - ln_gamma_theta,
            theta,
        ),
        GeneratingFamily::Binomial => (
            ln_gamma_theta - ln_gamma(jf) - ln_gamma(theta - jf + 1.0),
            theta - jf,
        ),
    };
    n * ln_norm + (jf - 1.0) * sum_ln + bexp * sum_ln1m
}

fn ln_gamma_theta_term(family: GeneratingFamily, theta: f64) -> f64 {
    match family {
        GeneratingFamily::NegBinomial => ln_gamma(theta + 1.0),
        GeneratingFamily::Binomial => ln_gamma(theta + 1.0),
    }
}

/// Log acceptance ratio of an atom move `y → y_new` for one coordinate of a
/// component with member sums `(n, Σln x, Σln(1−x))`.
///
/// The walk lives on logit(y), so the ratio is the stepwise likelihood
/// difference plus the logit Jacobian `ln[y'(1−y')] − ln[y(1−y)]`. A
/// proposal that stays inside the current cell pays exactly the Jacobian.
pub fn atom_log_acceptance_ratio(
    family: GeneratingFamily,
    theta: f64,
    n: f64,
    sum_ln: f64,
    sum_ln1m: f64,
    y: f64,
    y_new: f64,
) -> Result<f64> {
    let spec = GeneratingSpec::new(family, theta, false)?;
    let j0 = spec.locate(y)?;
    let j1 = spec.locate(y_new)?;
    let mut ratio = (y_new.ln() + (-y_new).ln_1p()) - (y.ln() + (-y).ln_1p());
    if j0 != j1 {
        let lg = ln_gamma_theta_term(family, theta);
        ratio += cell_loglik(family, theta, lg, j1, n, sum_ln, sum_ln1m)
            - cell_loglik(family, theta, lg, j0, n, sum_ln, sum_ln1m);
    }
    Ok(ratio)
}

/// Log collapsed conditional target for θ: prior plus, for every
/// observation, the log of its allocation-marginalised likelihood over the
/// components whose weight clears its slice. Weights and slices do not
/// depend on θ, so this is the exact marginal of the slice-conditional
/// with the labels integrated out; atoms keep their positions and their
/// cells re-locate under `theta`.
///
/// Reference implementation used by the detailed-balance tests; the chain
/// runs an algebraically identical precomputed path.
pub fn theta_collapsed_log_target(
    prior: &ThetaPrior,
    family: GeneratingFamily,
    theta: f64,
    weights: &[f64],
    atoms: &[(f64, f64)],
    slices: &[f64],
    data: &[(f64, f64)],
) -> Result<f64> {
    let mut total = prior.log_density(theta);
    if !total.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    if slices.len() != data.len() {
        return Err(Error::validation("slices and data must align"));
    }
    let spec = GeneratingSpec::new(family, theta, false)?;
    let mut terms = Vec::with_capacity(weights.len());
    for (&xi, &(u, v)) in slices.iter().zip(data) {
        terms.clear();
        for (&w, &(y1, y2)) in weights.iter().zip(atoms) {
            if xi < w {
                let j1 = spec.locate(y1)?;
                let j2 = spec.locate(y2)?;
                terms.push(
                    spec.component_log_density(j1, u)? + spec.component_log_density(j2, v)?,
                );
            }
        }
        if terms.is_empty() {
            return Err(Error::internal("observation has no component above its slice"));
        }
        total += crate::numeric::log_sum_exp(&terms);
    }
    Ok(total)
}

/// One retained posterior draw: the unit of persistence and prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub iteration: u64,
    pub theta: f64,
    pub weights: Vec<f64>,
    pub atoms: Vec<(f64, f64)>,
}

impl PosteriorDraw {
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.atoms.len() {
            return Err(Error::data("draw must carry matching weights and atoms"));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::data(format!("draw theta out of range: {}", self.theta)));
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| !w.is_finite() || w <= 0.0) || total > 1.0 + 1e-10 {
            return Err(Error::data("draw weights must be positive with sum <= 1"));
        }
        for &(a, b) in &self.atoms {
            if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
                return Err(Error::data("draw atoms must lie strictly inside (0,1)"));
            }
        }
        Ok(())
    }

    /// Mixture log-density of this draw at `(u, v)` under the given family
    /// and rotation.
    pub fn log_density(
        &self,
        family: GeneratingFamily,
        rotated: bool,
        u: f64,
        v: f64,
    ) -> Result<f64> {
        let spec = GeneratingSpec::new(family, self.theta, rotated)?;
        crate::partition::mixture_log_density(&spec, &self.weights, &self.atoms, u, v)
    }
}

/// Summary of one chain run.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub n_observations: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub draws_emitted: usize,
    pub atom_acceptance: f64,
    pub theta_acceptance: f64,
    pub mean_occupied: f64,
    pub final_occupied: usize,
    pub max_components: usize,
    pub wall: std::time::Duration,
}

/// A component's located cells under some θ, with the kernel exponents and
/// normalisers for both coordinates flattened for the hot loops.
struct CellParams {
    a1: f64,
    b1: f64,
    c1: f64,
    a2: f64,
    b2: f64,
    c2: f64,
}

/// A sequential Gibbs chain bound to one data set and one RNG stream.
pub struct Chain {
    config: SamplerConfig,
    // Rotation is folded into the data once: a rotated model on (u,v) is the
    // unrotated model on (1-u, 1-v), so the chain always runs unrotated.
    ln_u: Vec<f64>,
    ln_1u: Vec<f64>,
    ln_v: Vec<f64>,
    ln_1v: Vec<f64>,
    state: ChainState,
    rng: ChaCha12Rng,
    sweeps_done: usize,
    stats: Vec<ComponentStats>,
    max_components_seen: usize,
}

impl Chain {
    /// Initialise a chain on `data`: one component holding every
    /// observation, θ from its prior, atoms from the uniform base measure,
    /// slices drawn below their component weight, and sticks extended until
    /// the slice-sufficiency condition holds.
    pub fn new(data: &CopulaSample, config: SamplerConfig) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::data(format!(
                "need at least 2 observations to fit, got {}",
                data.len()
            )));
        }
        Self::build(Some(data), config)
    }

    /// A chain with no observations: every update still runs, and the
    /// stationary distribution of θ is exactly its prior. Used for
    /// prior-recovery checks.
    pub fn empty(config: SamplerConfig) -> Result<Self> {
        Self::build(None, config)
    }

    fn build(data: Option<&CopulaSample>, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = task_rng(config.seed, STREAM_CHAIN);
        let n = data.map_or(0, |d| d.len());

        let theta = match config.family {
            GeneratingFamily::Binomial => config.theta_prior.sample(&mut rng),
            GeneratingFamily::NegBinomial => {
                let t = config.theta_prior.sample(&mut rng);
                t.max(1e-8)
            }
        };

        let mut state = ChainState {
            theta,
            sticks: Vec::new(),
            weights: Vec::new(),
            atoms: Vec::new(),
            allocations: vec![0; n],
            slices: vec![0.0; n],
            adapt: AdaptState {
                atom: AdaptiveScale::new(config.initial_atom_log_scale),
                theta: AdaptiveScale::new(config.initial_theta_log_scale),
            },
        };

        // First component from the stick prior, then slices below it.
        let eta = sample_beta(1.0, config.concentration, &mut rng);
        state.sticks.push(eta);
        state.weights.push(eta);
        state.atoms.push((open_unit(&mut rng), open_unit(&mut rng)));
        for i in 0..n {
            let u: f64 = Open01.sample(&mut rng);
            state.slices[i] = u * state.weights[0];
        }

        let mut chain = Self {
            config,
            ln_u: Vec::new(),
            ln_1u: Vec::new(),
            ln_v: Vec::new(),
            ln_1v: Vec::new(),
            state,
            rng,
            sweeps_done: 0,
            stats: Vec::new(),
            max_components_seen: 1,
        };
        if let Some(d) = data {
            chain.load_data(d);
        }
        chain.extend_sticks()?;
        chain.state.validate()?;
        Ok(chain)
    }

    fn load_data(&mut self, data: &CopulaSample) {
        let rot = self.config.rotated;
        let n = data.len();
        self.ln_u = Vec::with_capacity(n);
        self.ln_1u = Vec::with_capacity(n);
        self.ln_v = Vec::with_capacity(n);
        self.ln_1v = Vec::with_capacity(n);
        for &(u, v) in data.rows() {
            let (a, b) = if rot { (1.0 - u, 1.0 - v) } else { (u, v) };
            self.ln_u.push(a.ln());
            self.ln_1u.push((-a).ln_1p());
            self.ln_v.push(b.ln());
            self.ln_1v.push((-b).ln_1p());
        }
    }

    /// Swap in a new data set of the same size, keeping the chain state.
    /// This is the successive-conditional step of joint-distribution checks
    /// and of posterior-predictive workflows.
    pub fn replace_data(&mut self, data: &CopulaSample) -> Result<()> {
        if data.len() != self.state.allocations.len() {
            return Err(Error::validation(format!(
                "replacement data has {} rows, state expects {}",
                data.len(),
                self.state.allocations.len()
            )));
        }
        self.load_data(data);
        Ok(())
    }

    /// Replace the chain state wholesale after validating it against the
    /// bound data.
    pub fn set_state(&mut self, state: ChainState) -> Result<()> {
        if state.allocations.len() != self.n() {
            return Err(Error::validation(format!(
                "state carries {} allocations, data has {} rows",
                state.allocations.len(),
                self.n()
            )));
        }
        state.validate()?;
        if self.config.family == GeneratingFamily::Binomial && state.theta.fract() != 0.0 {
            return Err(Error::validation("binomial theta must be integer"));
        }
        self.max_components_seen = self.max_components_seen.max(state.weights.len());
        self.state = state;
        Ok(())
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    fn n(&self) -> usize {
        self.state.allocations.len()
    }

    fn recompute_weights(&mut self) {
        self.state.weights.clear();
        let mut remaining = 1.0;
        for &eta in &self.state.sticks {
            self.state.weights.push(eta * remaining);
            remaining *= 1.0 - eta;
        }
    }

    /// Step 1: stick and slice resampling plus prior extension.
    pub fn update_weights_and_slices(&mut self) -> Result<()> {
        let n = self.n();
        let m = self.config.concentration;
        if n > 0 {
            let z_star = self.state.allocations.iter().copied().max().unwrap() + 1;
            let mut counts = vec![0u64; z_star];
            for &z in &self.state.allocations {
                counts[z] += 1;
            }
            self.state.sticks.truncate(z_star);
            self.state.atoms.truncate(z_star);
            let mut cum = 0u64;
            for (stick, &count) in self.state.sticks.iter_mut().zip(&counts) {
                cum += count;
                let a = count as f64 + 1.0;
                let b = (n as u64 - cum) as f64 + m;
                *stick = sample_beta(a, b, &mut self.rng);
            }
            self.recompute_weights();
            for i in 0..n {
                let rho = self.state.weights[self.state.allocations[i]];
                let u: f64 = Open01.sample(&mut self.rng);
                self.state.slices[i] = u * rho;
            }
        } else {
            self.state.sticks.clear();
            self.state.weights.clear();
            self.state.atoms.clear();
        }
        self.extend_sticks()
    }

    /// Append prior sticks (and fresh uniform atoms) until the retained
    /// weight exceeds `1 − min slice`.
    fn extend_sticks(&mut self) -> Result<()> {
        let m = self.config.concentration;
        let min_slice = self.state.slices.iter().copied().fold(1.0_f64, f64::min);
        let threshold = 1.0 - min_slice;
        let mut total: f64 = self.state.weights.iter().sum();
        let mut remaining: f64 = self.state.sticks.iter().map(|&e| 1.0 - e).product();
        while total <= threshold || self.state.weights.is_empty() {
            if self.state.weights.len() >= MAX_COMPONENTS {
                return Err(Error::internal(format!(
                    "stick extension exceeded {MAX_COMPONENTS} components \
                     (total weight {total:.17}, min slice {min_slice:.3e})"
                )));
            }
            let eta = sample_beta(1.0, m, &mut self.rng);
            let w = eta * remaining;
            self.state.sticks.push(eta);
            self.state.weights.push(w);
            self.state
                .atoms
                .push((open_unit(&mut self.rng), open_unit(&mut self.rng)));
            total += w;
            remaining *= 1.0 - eta;
        }
        self.max_components_seen = self.max_components_seen.max(self.state.weights.len());
        Ok(())
    }

    fn refresh_stats(&mut self) {
        let k = self.state.weights.len();
        self.stats.clear();
        self.stats.resize(k, ComponentStats::default());
        for i in 0..self.n() {
            let s = self.state.allocations[i];
            let st = &mut self.stats[s];
            st.n += 1.0;
            st.sum_ln_u += self.ln_u[i];
            st.sum_ln_1u += self.ln_1u[i];
            st.sum_ln_v += self.ln_v[i];
            st.sum_ln_1v += self.ln_1v[i];
        }
    }

    /// Step 2: atom updates. Occupied components move by adaptive MH on the
    /// logit scale; unoccupied components are refreshed from the base
    /// measure.
    pub fn update_atoms(&mut self) -> Result<()> {
        self.refresh_stats();
        let family = self.config.family;
        let theta = self.state.theta;
        for s in 0..self.state.weights.len() {
            let st = self.stats[s];
            if st.n == 0.0 {
                self.state.atoms[s] = (open_unit(&mut self.rng), open_unit(&mut self.rng));
                continue;
            }
            let (y1, y2) = self.state.atoms[s];
            let y1 = self.atom_move(family, theta, y1, st.n, st.sum_ln_u, st.sum_ln_1u)?;
            let y2 = self.atom_move(family, theta, y2, st.n, st.sum_ln_v, st.sum_ln_1v)?;
            self.state.atoms[s] = (y1, y2);
        }
        Ok(())
    }

    fn atom_move(
        &mut self,
        family: GeneratingFamily,
        theta: f64,
        y: f64,
        n: f64,
        sum_ln: f64,
        sum_ln1m: f64,
    ) -> Result<f64> {
        let sd = self.state.adapt.atom.sd();
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let y_new = clamp_interior(sigmoid(logit(y) + sd * z));
        let ratio = atom_log_acceptance_ratio(family, theta, n, sum_ln, sum_ln1m, y, y_new)?;
        let u: f64 = Open01.sample(&mut self.rng);
        let accept = u.ln() < ratio;
        self.state.adapt.atom.record(accept);
        Ok(if accept { y_new } else { y })
    }

    /// Pre-locate every component's cells under `theta` (atom positions
    /// fixed) and bundle the per-coordinate kernel exponents and
    /// normalisers.
    fn prepare_cells(&self, theta: f64) -> Result<Vec<CellParams>> {
        let family = self.config.family;
        let spec = GeneratingSpec::new(family, theta, false)?;
        let lg = ln_gamma_theta_term(family, theta);
        let kernel = |j: f64| -> (f64, f64) {
            match family {
                GeneratingFamily::NegBinomial => {
                    (ln_gamma(j + theta + 1.0) - ln_gamma(j) - lg, theta)
                }
                GeneratingFamily::Binomial => {
                    (lg - ln_gamma(j) - ln_gamma(theta - j + 1.0), theta - j)
                }
            }
        };
        let mut cells = Vec::with_capacity(self.state.weights.len());
        for &(y1, y2) in &self.state.atoms {
            let j1 = spec.locate(y1)? as f64;
            let j2 = spec.locate(y2)? as f64;
            let (c1, b1) = kernel(j1);
            let (c2, b2) = kernel(j2);
            cells.push(CellParams { a1: j1 - 1.0, b1, c1, a2: j2 - 1.0, b2, c2 });
        }
        Ok(cells)
    }

    #[inline]
    fn observation_log_term(&self, cell: &CellParams, i: usize) -> f64 {
        cell.a1 * self.ln_u[i]
            + cell.b1 * self.ln_1u[i]
            + cell.c1
            + cell.a2 * self.ln_v[i]
            + cell.b2 * self.ln_1v[i]
            + cell.c2
    }

    /// Allocation-marginalised log-likelihood: Σ_i ln Σ_{s: ξ_i < ρ_s} of
    /// the component products. Matches `theta_collapsed_log_target` minus
    /// the prior term.
    fn collapsed_log_likelihood(&self, cells: &[CellParams]) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.n() {
            let xi = self.state.slices[i];
            let mut max_term = f64::NEG_INFINITY;
            let mut any = false;
            for (s, cell) in cells.iter().enumerate() {
                if xi < self.state.weights[s] {
                    let t = self.observation_log_term(cell, i);
                    if t > max_term {
                        max_term = t;
                    }
                    any = true;
                }
            }
            if !any {
                return Err(Error::internal(format!(
                    "observation {i} has no component above its slice"
                )));
            }
            let mut acc = 0.0;
            for (s, cell) in cells.iter().enumerate() {
                if xi < self.state.weights[s] {
                    acc += (self.observation_log_term(cell, i) - max_term).exp();
                }
            }
            total += max_term + acc.ln();
        }
        Ok(total)
    }

    /// Draw every allocation from its slice-restricted conditional under the
    /// given cells.
    fn draw_allocations(&mut self, cells: &[CellParams]) -> Result<()> {
        let k = self.state.weights.len();
        let mut support: Vec<usize> = Vec::with_capacity(k);
        let mut terms: Vec<f64> = Vec::with_capacity(k);
        for i in 0..self.n() {
            let xi = self.state.slices[i];
            support.clear();
            terms.clear();
            let mut max_term = f64::NEG_INFINITY;
            for (s, cell) in cells.iter().enumerate() {
                if xi < self.state.weights[s] {
                    let t = self.observation_log_term(cell, i);
                    support.push(s);
                    terms.push(t);
                    if t > max_term {
                        max_term = t;
                    }
                }
            }
            if support.is_empty() {
                return Err(Error::internal(format!(
                    "observation {i} has no component above its slice"
                )));
            }
            let mut total = 0.0;
            for t in terms.iter_mut() {
                *t = (*t - max_term).exp();
                total += *t;
            }
            let r: f64 = Open01.sample(&mut self.rng);
            let target = r * total;
            let mut acc = 0.0;
            let mut chosen = *support.last().unwrap();
            for (idx, &t) in terms.iter().enumerate() {
                acc += t;
                if target <= acc {
                    chosen = support[idx];
                    break;
                }
            }
            self.state.allocations[i] = chosen;
        }
        Ok(())
    }

    /// Step 3: reallocate each observation over the components whose weight
    /// clears its slice, with probabilities proportional to the product of
    /// the two cell beta densities.
    pub fn update_allocations(&mut self) -> Result<()> {
        if self.n() == 0 {
            return Ok(());
        }
        let cells = self.prepare_cells(self.state.theta)?;
        self.draw_allocations(&cells)
    }

    /// Step 4: update θ by a collapsed random-walk move. Atom positions stay
    /// fixed (their cells re-locate under the proposal), the acceptance
    /// ratio uses the allocation-marginalised likelihood — weights and
    /// slices are θ-free, so the labels integrate out exactly — and an
    /// accepted move redraws the allocations under the new θ. Collapsing
    /// the labels lets θ cross between partition resolutions that
    /// label-conditional moves cannot reach.
    pub fn update_theta(&mut self) -> Result<()> {
        let family = self.config.family;
        let prior = self.config.theta_prior;
        let theta = self.state.theta;
        let (proposal, log_jacobian) = match family {
            GeneratingFamily::NegBinomial => {
                let sd = self.state.adapt.theta.sd();
                let z: f64 = StandardNormal.sample(&mut self.rng);
                let theta_new = (theta.ln() + sd * z).exp();
                // Log-scale walk: the Jacobian contributes ln θ' − ln θ.
                (theta_new, theta_new.ln() - theta.ln())
            }
            GeneratingFamily::Binomial => {
                let up: f64 = Open01.sample(&mut self.rng);
                let theta_new = if up < 0.5 { theta + 1.0 } else { (theta - 1.0).max(1.0) };
                (theta_new, 0.0)
            }
        };
        let u: f64 = Open01.sample(&mut self.rng);
        if proposal == theta {
            // Reflection at 1 proposes the current point.
            self.state.adapt.theta.record(true);
            return Ok(());
        }
        let accept = if proposal.is_finite() && proposal > 0.0 && self.n() > 0 {
            let current = prior.log_density(theta)
                + self.collapsed_log_likelihood(&self.prepare_cells(theta)?)?;
            let proposed = prior.log_density(proposal)
                + self.collapsed_log_likelihood(&self.prepare_cells(proposal)?)?;
            u.ln() < proposed - current + log_jacobian
        } else if proposal.is_finite() && proposal > 0.0 {
            // No data: the target is the prior alone.
            let ratio = prior.log_density(proposal) - prior.log_density(theta);
            u.ln() < ratio + log_jacobian
        } else {
            false
        };
        self.state.adapt.theta.record(accept);
        if accept {
            self.state.theta = proposal;
            if self.n() > 0 {
                let cells = self.prepare_cells(proposal)?;
                self.draw_allocations(&cells)?;
            }
        }
        Ok(())
    }

    /// One full sweep in the fixed order: weights/slices, atoms,
    /// allocations, θ. Proposal scales adapt per sweep during burn-in and
    /// freeze at the end of it.
    pub fn sweep(&mut self) -> Result<()> {
        self.update_weights_and_slices()?;
        self.update_atoms()?;
        self.update_allocations()?;
        self.update_theta()?;
        self.sweeps_done += 1;
        if self.sweeps_done <= self.config.burn_in {
            let target = self.config.adapt_target;
            self.state.adapt.atom.end_batch(target);
            self.state.adapt.theta.end_batch(target);
            if self.sweeps_done == self.config.burn_in {
                self.state.adapt.atom.freeze();
                self.state.adapt.theta.freeze();
            }
        }
        Ok(())
    }

    /// Snapshot the current mixture, dropping components at or below the
    /// emission floor.
    pub fn posterior_draw(&self, iteration: u64) -> PosteriorDraw {
        let mut weights = Vec::new();
        let mut atoms = Vec::new();
        for (s, &w) in self.state.weights.iter().enumerate() {
            if w > EMISSION_FLOOR {
                weights.push(w);
                atoms.push(self.state.atoms[s]);
            }
        }
        if weights.is_empty() {
            // Degenerate snapshot; keep the heaviest component.
            let (s, &w) = self
                .state
                .weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .expect("state always holds at least one component");
            weights.push(w.max(f64::MIN_POSITIVE));
            atoms.push(self.state.atoms[s]);
        }
        PosteriorDraw { iteration, theta: self.state.theta, weights, atoms }
    }

    pub fn max_components_seen(&self) -> usize {
        self.max_components_seen
    }
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

fn sample_beta<R: Rng>(a: f64, b: f64, rng: &mut R) -> f64 {
    let x = BetaDist::new(a, b).expect("positive beta shapes").sample(rng);
    clamp_interior(x)
}

/// Run a full chain: deterministic in `(data, config)`, emitting
/// `(iterations − burn_in)/thinning` draws and a run log.
pub fn run_chain(data: &CopulaSample, config: &SamplerConfig) -> Result<(Vec<PosteriorDraw>, RunLog)> {
    let started = std::time::Instant::now();
    let mut chain = Chain::new(data, config.clone())?;
    let expected = (config.iterations - config.burn_in) / config.thinning;
    let mut draws = Vec::with_capacity(expected);
    let mut occupied_sum: u64 = 0;
    let mut post_burn_sweeps: u64 = 0;
    for t in 1..=config.iterations {
        chain.sweep()?;
        if t > config.burn_in {
            post_burn_sweeps += 1;
            occupied_sum += chain.state().occupied_count() as u64;
            if (t - config.burn_in).is_multiple_of(config.thinning) {
                draws.push(chain.posterior_draw(t as u64));
            }
        }
    }
    let log = RunLog {
        n_observations: data.len(),
        iterations: config.iterations,
        burn_in: config.burn_in,
        thinning: config.thinning,
        draws_emitted: draws.len(),
        atom_acceptance: chain.state().adapt.atom.acceptance_rate(),
        theta_acceptance: chain.state().adapt.theta.acceptance_rate(),
        mean_occupied: if post_burn_sweeps == 0 {
            f64::NAN
        } else {
            occupied_sum as f64 / post_burn_sweeps as f64
        },
        final_occupied: chain.state().occupied_count(),
        max_components: chain.max_components_seen(),
        wall: started.elapsed(),
    };
    Ok((draws, log))
}
