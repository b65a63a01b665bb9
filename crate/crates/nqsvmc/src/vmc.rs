//! Variational training loop: per epoch, fit the surrogate to the current
//! state, sample it with the configured proposal, form κ-reweighted energy and
//! gradient estimates, and step the parameters. Also houses zero-variance
//! extrapolation and two-point spin correlations.

use std::collections::HashMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configspace::{all_configurations, SpinConfiguration};
use crate::error::{Error, Result};
use crate::hamiltonian::{apply_word, local_energy, PauliHamiltonian};
use crate::mcmc::{derive_chain_seed, run_chain, ProposalSpec};
use crate::rbm::{grad_log_rho_vector, log_half, log_rho_diag, random_init, RbmParams};
use crate::surrogate::{fit_auto, log_kappa, SurrogateModel};

/// Number of consecutive epoch-to-epoch energy deltas that must sit below the
/// tolerance before training declares self-convergence.
const CONVERGENCE_DELTAS: usize = 5;

/// Proposal kind for the training chain; quantum kinds take their Ising
/// fields from each epoch's fitted surrogate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalChoice {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    #[default]
    H,
}

impl ProposalChoice {
    /// Binds the choice to a fitted surrogate, handing the quantum kinds the
    /// model's (l, J) fields (its quadratic part, for higher-order fits).
    pub fn instantiate(&self, model: &SurrogateModel) -> Result<ProposalSpec> {
        let l = model.l().to_vec();
        let j = model.j_upper().to_vec();
        match self {
            ProposalChoice::A => Ok(ProposalSpec::a()),
            ProposalChoice::B => Ok(ProposalSpec::b()),
            ProposalChoice::C => Ok(ProposalSpec::c()),
            ProposalChoice::D => ProposalSpec::d(l, j),
            ProposalChoice::E => ProposalSpec::e(l, j),
            ProposalChoice::F => ProposalSpec::f(l, j),
            ProposalChoice::G => ProposalSpec::g(l, j),
            ProposalChoice::H => ProposalSpec::h(l, j),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ProposalChoice::A),
            "B" => Ok(ProposalChoice::B),
            "C" => Ok(ProposalChoice::C),
            "D" => Ok(ProposalChoice::D),
            "E" => Ok(ProposalChoice::E),
            "F" => Ok(ProposalChoice::F),
            "G" => Ok(ProposalChoice::G),
            "H" => Ok(ProposalChoice::H),
            other => Err(Error::Parse(format!(
                "unknown proposal {other:?}; expected one of A..H"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ProposalChoice::A => "A",
            ProposalChoice::B => "B",
            ProposalChoice::C => "C",
            ProposalChoice::D => "D",
            ProposalChoice::E => "E",
            ProposalChoice::F => "F",
            ProposalChoice::G => "G",
            ProposalChoice::H => "H",
        }
    }
}

/// Parameter-update rule. Adam keeps per-coordinate moment estimates; SGD is
/// the plain scaled step.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerKind {
    fn validate(&self) -> Result<()> {
        if let OptimizerKind::Adam {
            beta1,
            beta2,
            epsilon,
        } = self
        {
            if !(0.0..1.0).contains(beta1) || !(0.0..1.0).contains(beta2) || *epsilon <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "adam parameters out of range: beta1={beta1}, beta2={beta2}, epsilon={epsilon}"
                )));
            }
        }
        Ok(())
    }
}

/// Cap on the global gradient norm fed to the optimizer. Heavy-tailed local
/// energies occasionally produce gradient spikes several orders above the
/// typical scale; unclipped they poison Adam's second-moment state for many
/// epochs and can launch the parameters past any recoverable region.
const GRADIENT_CLIP_NORM: f64 = 5.0;

struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Optimizer {
    fn new(kind: OptimizerKind, learning_rate: f64, dim: usize) -> Self {
        Self {
            kind,
            learning_rate,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// The shift to add to the parameters given the energy gradient g.
    fn step(&mut self, g: &[f64]) -> Vec<f64> {
        let norm = g.iter().map(|gi| gi * gi).sum::<f64>().sqrt();
        let scale = if norm > GRADIENT_CLIP_NORM {
            GRADIENT_CLIP_NORM / norm
        } else {
            1.0
        };
        let g: Vec<f64> = g.iter().map(|gi| gi * scale).collect();
        match self.kind {
            OptimizerKind::Sgd => g.iter().map(|gi| -self.learning_rate * gi).collect(),
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                self.t += 1;
                let bc1 = 1.0 - beta1.powi(self.t as i32);
                let bc2 = 1.0 - beta2.powi(self.t as i32);
                g.iter()
                    .enumerate()
                    .map(|(i, gi)| {
                        self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * gi;
                        self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * gi * gi;
                        let m_hat = self.m[i] / bc1;
                        let v_hat = self.v[i] / bc2;
                        -self.learning_rate * m_hat / (v_hat.sqrt() + epsilon)
                    })
                    .collect()
            }
        }
    }
}

/// Knobs of the training loop; `Default` gives the reference protocol
/// (10 000 samples per epoch, 10% burn-in, proposal H, Adam at 0.02).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub epochs_max: usize,
    pub samples_per_epoch: usize,
    pub burn_in_fraction: f64,
    pub proposal: ProposalChoice,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Fit-set size; `None` takes min(4n², 2ⁿ).
    pub fit_total: Option<usize>,
    pub fit_top_fraction: f64,
    /// Surrogate interaction order, clamped to n during training.
    pub fit_order: usize,
    pub convergence_tol: f64,
    /// Trailing window for the reported mean, the best-params snapshot, and
    /// zero-variance extrapolation.
    pub window: usize,
    /// Hidden units; `None` takes 2n.
    pub hidden: Option<usize>,
    pub beta: f64,
    pub init_scale: f64,
    pub seed: u64,
    pub warm_start_path: Option<PathBuf>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs_max: 150,
            samples_per_epoch: 10_000,
            burn_in_fraction: 0.10,
            proposal: ProposalChoice::H,
            learning_rate: 0.02,
            optimizer: OptimizerKind::default(),
            fit_total: None,
            fit_top_fraction: 0.25,
            fit_order: 2,
            convergence_tol: 1e-4,
            window: 20,
            hidden: None,
            beta: 1.0,
            init_scale: 0.05,
            seed: 1,
            warm_start_path: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs_max == 0 || self.samples_per_epoch == 0 || self.window == 0 {
            return Err(Error::InvalidArgument(
                "epochs_max, samples_per_epoch, and window must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidArgument(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tol
            )));
        }
        if !(0.0..=1.0).contains(&self.fit_top_fraction) {
            return Err(Error::InvalidArgument(format!(
                "fit_top_fraction must lie in [0, 1], got {}",
                self.fit_top_fraction
            )));
        }
        if self.fit_order == 0 {
            return Err(Error::InvalidArgument("fit_order must be at least 1".into()));
        }
        if self.fit_total == Some(0) || self.hidden == Some(0) {
            return Err(Error::InvalidArgument(
                "fit_total and hidden must be positive when given".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "init_scale must be non-negative, got {}",
                self.init_scale
            )));
        }
        self.optimizer.validate()
    }
}

/// One epoch's scalar record.
#[derive(Clone, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub energy_re: f64,
    pub energy_im: f64,
    pub variance: f64,
    pub var_ratio: f64,
    pub acceptance: f64,
    pub grad_norm: f64,
    /// Kish effective sample size of the κ-reweighted estimator.
    pub ess: f64,
    /// Surrogate fit residual relative to the target norm.
    pub fit_residual: f64,
}

/// Full training history plus the final and best parameter snapshots.
#[derive(Clone, Debug)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
    pub final_params: RbmParams,
    /// Lowest-energy snapshot within the trailing `window` epochs.
    pub best_params: RbmParams,
    pub best_epoch: usize,
    pub converged: bool,
}

impl TrainingTrace {
    /// Mean and population standard deviation of Re μ over the last `window`
    /// epochs (fewer if the run was shorter).
    pub fn reported_energy(&self, window: usize) -> (f64, f64) {
        let k = window.min(self.epochs.len()).max(1);
        let tail = &self.epochs[self.epochs.len() - k..];
        let mean = tail.iter().map(|e| e.energy_re).sum::<f64>() / k as f64;
        let var = tail
            .iter()
            .map(|e| (e.energy_re - mean) * (e.energy_re - mean))
            .sum::<f64>()
            / k as f64;
        (mean, var.sqrt())
    }
}

/// Distinct configurations with multiplicities and κ weights, shared by the
/// three estimators. Weights are exp(log κ − max log κ)·count, so the largest
/// group carries weight ≥ 1 and the sum can never underflow to zero.
struct WeightedGroups {
    configs: Vec<SpinConfiguration>,
    weights: Vec<f64>,
    weight_sum: f64,
}

impl WeightedGroups {
    /// Kish effective sample size (Σw)²/Σw² of the reweighted estimator;
    /// collapses toward 1 when a single configuration's κ dominates.
    fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.weights.iter().map(|w| w * w).sum();
        self.weight_sum * self.weight_sum / sq
    }
}

fn group_samples(
    samples: &[SpinConfiguration],
    params: &RbmParams,
    model: &SurrogateModel,
) -> Result<WeightedGroups> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "estimators need at least one sample".into(),
        ));
    }
    let mut counts: HashMap<usize, (usize, &SpinConfiguration)> = HashMap::new();
    for v in samples {
        counts
            .entry(v.index())
            .and_modify(|e| e.0 += 1)
            .or_insert((1, v));
    }
    let mut order: Vec<usize> = counts.keys().copied().collect();
    order.sort_unstable();
    let mut configs = Vec::with_capacity(order.len());
    let mut log_k = Vec::with_capacity(order.len());
    let mut mult = Vec::with_capacity(order.len());
    for idx in order {
        let (count, v) = counts[&idx];
        let lk = log_kappa(params, model, v)?;
        if !lk.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite log kappa at {}",
                v.to_pm_string()
            )));
        }
        configs.push(v.clone());
        log_k.push(lk);
        mult.push(count as f64);
    }
    let shift = log_k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_k
        .iter()
        .zip(&mult)
        .map(|(lk, c)| (lk - shift).exp() * c)
        .collect();
    let weight_sum: f64 = weights.iter().sum();
    if !(weight_sum.is_finite() && weight_sum > 0.0) {
        return Err(Error::Numerical(
            "all sample weights underflowed in the kappa reweighting".into(),
        ));
    }
    Ok(WeightedGroups {
        configs,
        weights,
        weight_sum,
    })
}

/// κ-reweighted energy estimate μ = Σ κE_loc / Σ κ over the given samples.
pub fn estimate_energy(
    samples: &[SpinConfiguration],
    params: &RbmParams,
    model: &SurrogateModel,
    h: &PauliHamiltonian,
) -> Result<Complex64> {
    let groups = group_samples(samples, params, model)?;
    energy_from_groups(&groups, params, h)
}

fn energy_from_groups(
    groups: &WeightedGroups,
    params: &RbmParams,
    h: &PauliHamiltonian,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    for (v, w) in groups.configs.iter().zip(&groups.weights) {
        acc += local_energy(h, params, v)? * *w;
    }
    Ok(acc / groups.weight_sum)
}

/// κ-reweighted variance Σ κ|E_loc − μ|² / Σ κ.
pub fn estimate_variance(
    samples: &[SpinConfiguration],
    params: &RbmParams,
    model: &SurrogateModel,
    h: &PauliHamiltonian,
    mu: Complex64,
) -> Result<f64> {
    let groups = group_samples(samples, params, model)?;
    variance_from_groups(&groups, params, h, mu)
}

fn variance_from_groups(
    groups: &WeightedGroups,
    params: &RbmParams,
    h: &PauliHamiltonian,
    mu: Complex64,
) -> Result<f64> {
    let mut acc = 0.0;
    for (v, w) in groups.configs.iter().zip(&groups.weights) {
        acc += (local_energy(h, params, v)? - mu).norm_sqr() * w;
    }
    Ok(acc / groups.weight_sum)
}

/// κ-reweighted energy gradient over the canonical real coordinates,
/// g_x = ⟨K_x⟩ − μ·⟨D_x⟩, reported as Re g (the update direction).
///
/// K_x(v) = Σ_s r_s 𝒟(v′_s, v)(x) with r_s the same reweighted matrix-element
/// ratio that builds E_loc, and D_x(v) = 𝒟(v, v)(x).
pub fn estimate_gradients(
    samples: &[SpinConfiguration],
    params: &RbmParams,
    model: &SurrogateModel,
    h: &PauliHamiltonian,
) -> Result<Vec<f64>> {
    let groups = group_samples(samples, params, model)?;
    gradients_from_groups(&groups, params, h)
}

fn gradients_from_groups(
    groups: &WeightedGroups,
    params: &RbmParams,
    h: &PauliHamiltonian,
) -> Result<Vec<f64>> {
    if h.n() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: h.n(),
        });
    }
    let dim = params.param_count();
    let mut k_mean = vec![Complex64::new(0.0, 0.0); dim];
    let mut d_mean = vec![Complex64::new(0.0, 0.0); dim];
    let mut mu = Complex64::new(0.0, 0.0);
    for (v, w) in groups.configs.iter().zip(&groups.weights) {
        let half_v = log_half(params, v);
        let d_vec = grad_log_rho_vector(params, v, v)?;
        for (x, dx) in d_vec.into_iter().enumerate() {
            d_mean[x] += dx * *w;
        }
        for (coeff, word) in h.terms() {
            let (v_s, phase) = apply_word(word, v)?;
            let r = phase * *coeff * (log_half(params, &v_s) - half_v).exp();
            mu += r * *w;
            let g_vec = grad_log_rho_vector(params, &v_s, v)?;
            for (x, gx) in g_vec.into_iter().enumerate() {
                k_mean[x] += r * gx * *w;
            }
        }
    }
    mu /= groups.weight_sum;
    let mut out = Vec::with_capacity(dim);
    for x in 0..dim {
        let g = k_mean[x] / groups.weight_sum - mu * d_mean[x] / groups.weight_sum;
        if !(g.re.is_finite() && g.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient at coordinate {x}"
            )));
        }
        out.push(g.re);
    }
    Ok(out)
}

/// Exact energy ⟨H⟩ = Σ_v ρ̃_vv E_loc(v) / Σ_v ρ̃_vv by full enumeration
/// (n ≤ 12), log-stabilized. The imaginary part is numerical noise.
pub fn enumerate_energy(params: &RbmParams, h: &PauliHamiltonian) -> Result<Complex64> {
    let n = params.n();
    if n > 12 {
        return Err(Error::TooLarge {
            what: "full-enumeration energy",
            n,
            max: 12,
        });
    }
    let configs: Vec<SpinConfiguration> = all_configurations(n).collect();
    let mut log_w = Vec::with_capacity(configs.len());
    for v in &configs {
        log_w.push(log_rho_diag(params, v)?);
    }
    let shift = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (v, lw) in configs.iter().zip(&log_w) {
        let w = (lw - shift).exp();
        num += local_energy(h, params, v)? * w;
        den += w;
    }
    Ok(num / den)
}

/// Zero-variance extrapolation result: the intercept of the OLS line through
/// the (Var/E², E) points of the trailing window.
#[derive(Clone, Debug, Serialize)]
pub struct ZveResult {
    pub extrapolated_energy: f64,
    pub slope: f64,
    pub fit_points: usize,
    /// Set when the x-spread collapsed and the intercept degenerated to the
    /// plain mean energy.
    pub degenerate: bool,
}

/// Extrapolates the trace's energy to the zero-variance limit over the last
/// `window` epochs. Needs at least three finite (var_ratio, energy) points.
pub fn zve(trace: &TrainingTrace, window: usize) -> Result<ZveResult> {
    let k = window.min(trace.epochs.len());
    let tail = &trace.epochs[trace.epochs.len() - k..];
    let points: Vec<(f64, f64)> = tail
        .iter()
        .filter(|e| e.var_ratio.is_finite() && e.energy_re.is_finite())
        .map(|e| (e.var_ratio, e.energy_re))
        .collect();
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "zero-variance extrapolation needs at least 3 finite points, got {}",
            points.len()
        )));
    }
    let np = points.len() as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / np;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / np;
    let spread = points
        .iter()
        .map(|p| (p.0 - x_mean).abs())
        .fold(0.0, f64::max);
    if spread <= 1e-14 {
        return Ok(ZveResult {
            extrapolated_energy: y_mean,
            slope: 0.0,
            fit_points: points.len(),
            degenerate: true,
        });
    }
    let sxx: f64 = points.iter().map(|p| (p.0 - x_mean) * (p.0 - x_mean)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - x_mean) * (p.1 - y_mean))
        .sum();
    let slope = sxy / sxx;
    Ok(ZveResult {
        extrapolated_energy: y_mean - slope * x_mean,
        slope,
        fit_points: points.len(),
        degenerate: false,
    })
}

/// ⟨Z_i Z_j⟩ in the RBM state by exact enumeration (n ≤ 12). The Z eigenvalue
/// is −v under this basis mapping, so the pair product is vᵢvⱼ either way.
pub fn two_point_correlation(params: &RbmParams, i: usize, j: usize) -> Result<f64> {
    let n = params.n();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "site pair ({i}, {j}) out of range for n = {n}"
        )));
    }
    if i == j {
        return Ok(1.0);
    }
    if n > 12 {
        return Err(Error::TooLarge {
            what: "correlation enumeration",
            n,
            max: 12,
        });
    }
    let configs: Vec<SpinConfiguration> = all_configurations(n).collect();
    let mut log_w = Vec::with_capacity(configs.len());
    for v in &configs {
        log_w.push(log_rho_diag(params, v)?);
    }
    let shift = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, lw) in configs.iter().zip(&log_w) {
        let w = (lw - shift).exp();
        num += w * (v.spin(i) * v.spin(j)) as f64;
        den += w;
    }
    Ok(num / den)
}

/// Sampled ⟨Z_i Z_j⟩: κ-reweighted mean of vᵢvⱼ over the given samples.
pub fn two_point_correlation_sampled(
    samples: &[SpinConfiguration],
    params: &RbmParams,
    model: &SurrogateModel,
    i: usize,
    j: usize,
) -> Result<f64> {
    let n = params.n();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "site pair ({i}, {j}) out of range for n = {n}"
        )));
    }
    if i == j {
        return Ok(1.0);
    }
    let groups = group_samples(samples, params, model)?;
    let mut acc = 0.0;
    for (v, w) in groups.configs.iter().zip(&groups.weights) {
        acc += w * (v.spin(i) * v.spin(j)) as f64;
    }
    Ok(acc / groups.weight_sum)
}

/// Runs the training loop of the method: fit → sample → estimate → update,
/// stopping at self-convergence or `epochs_max`.
pub fn train(h: &PauliHamiltonian, config: &TrainingConfig) -> Result<TrainingTrace> {
    config.validate()?;
    let n = h.n();
    let m = config.hidden.unwrap_or(2 * n);
    let fit_total = config
        .fit_total
        .unwrap_or_else(|| crate::surrogate::default_fit_total(n));
    let fit_order = config.fit_order.min(n);
    let mut params = match &config.warm_start_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let loaded = RbmParams::from_json(&text)?;
            if loaded.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: loaded.n(),
                });
            }
            loaded
        }
        None => random_init(n, m, config.beta, config.init_scale, config.seed)?,
    };
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, params.param_count());
    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut recent: Vec<(f64, usize, RbmParams)> = Vec::new();
    let mut converged = false;

    for epoch in 1..=config.epochs_max {
        let (model, report) = fit_auto(
            &params,
            fit_total,
            config.fit_top_fraction,
            fit_order,
            derive_chain_seed(config.seed, 2 * epoch as u64),
        )?;
        let spec = config.proposal.instantiate(&model)?;
        let chain = run_chain(
            &spec,
            &model,
            config.samples_per_epoch,
            config.burn_in_fraction,
            derive_chain_seed(config.seed, 2 * epoch as u64 + 1),
        )?;
        let groups = group_samples(chain.retained(), &params, &model)?;
        let mu = energy_from_groups(&groups, &params, h)?;
        let variance = variance_from_groups(&groups, &params, h, mu)?;
        let g = gradients_from_groups(&groups, &params, h)?;
        let grad_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(mu.re.is_finite() && mu.im.is_finite() && variance.is_finite() && grad_norm.is_finite())
        {
            return Err(Error::Numerical(format!(
                "training diverged at epoch {epoch}: mu = {mu}, variance = {variance}, \
                 |g| = {grad_norm}, acceptance = {}",
                chain.acceptance_rate()
            )));
        }
        let var_ratio = if mu.re != 0.0 {
            variance / (mu.re * mu.re)
        } else {
            f64::INFINITY
        };
        epochs.push(EpochRecord {
            epoch,
            energy_re: mu.re,
            energy_im: mu.im,
            variance,
            var_ratio,
            acceptance: chain.acceptance_rate(),
            grad_norm,
            ess: groups.effective_sample_size(),
            fit_residual: report.relative_residual(),
        });
        recent.push((mu.re, epoch, params.clone()));
        if recent.len() > config.window {
            recent.remove(0);
        }

        let deltas_small = |count: usize| -> bool {
            epochs.len() > count
                && epochs
                    .windows(2)
                    .rev()
                    .take(count)
                    .all(|w| (w[1].energy_re - w[0].energy_re).abs() < config.convergence_tol)
        };
        // Fast path: a repeated estimate with (numerically) zero variance is
        // already self-converged; otherwise demand a run of small deltas.
        let fast = epochs.len() >= 2 && {
            let last = &epochs[epochs.len() - 1];
            let prev = &epochs[epochs.len() - 2];
            (last.energy_re - prev.energy_re).abs() < config.convergence_tol
                && last.variance <= 1e-12 * last.energy_re.mul_add(last.energy_re, 1.0)
        };
        if fast || deltas_small(CONVERGENCE_DELTAS) {
            converged = true;
            break;
        }

        let shift = optimizer.step(&g);
        params.apply_shift(&shift)?;
    }

    let (best_epoch, best_params) = recent
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, e, p)| (*e, p.clone()))
        .expect("at least one epoch ran");
    Ok(TrainingTrace {
        epochs,
        final_params: params,
        best_params,
        best_epoch,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::index_to_config;
    use crate::hamiltonian::{xxz, PauliWord};
    use crate::surrogate::fit;

    fn flat_model(n: usize) -> SurrogateModel {
        SurrogateModel::new(
            2,
            0.0,
            vec![0.0; n],
            vec![0.0; crate::configspace::pair_count(n)],
        )
        .unwrap()
    }

    fn identity_hamiltonian(n: usize, c: f64) -> PauliHamiltonian {
        let word = PauliWord::parse(&"I".repeat(n)).unwrap();
        PauliHamiltonian::new(n, vec![(c, word)]).unwrap()
    }

    fn enumeration(n: usize) -> Vec<SpinConfiguration> {
        all_configurations(n).collect()
    }

    #[test]
    fn identity_hamiltonian_estimates_are_exact() {
        let params = random_init(2, 3, 1.0, 0.4, 7).unwrap();
        let model = flat_model(2);
        let h = identity_hamiltonian(2, 2.5);
        let samples = enumeration(2);
        let mu = estimate_energy(&samples, &params, &model, &h).unwrap();
        assert!((mu - Complex64::from(2.5)).norm() < 1e-14);
        let var = estimate_variance(&samples, &params, &model, &h, mu).unwrap();
        assert!(var < 1e-28);
        let g = estimate_gradients(&samples, &params, &model, &h).unwrap();
        for gx in g {
            assert!(gx.abs() < 1e-12, "identity gradient leaked {gx}");
        }
    }

    #[test]
    fn all_equal_samples_give_the_local_energy() {
        let params = random_init(3, 4, 1.0, 0.3, 11).unwrap();
        let model = flat_model(3);
        let h = xxz(3, 1.0, 0.5, false);
        let v = index_to_config(5, 3);
        let samples = vec![v.clone(); 40];
        let mu = estimate_energy(&samples, &params, &model, &h).unwrap();
        let direct = local_energy(&h, &params, &v).unwrap();
        assert!((mu - direct).norm() < 1e-12);
    }

    #[test]
    fn enumeration_with_flat_model_matches_exact_energy() {
        // With a flat surrogate, kappa is proportional to the diagonal weight,
        // so enumeration reproduces the exact Rayleigh quotient.
        for seed in [3, 4] {
            let params = random_init(4, 6, 1.0, 0.35, seed).unwrap();
            let h = xxz(4, 1.0, -0.7, true);
            let mu = estimate_energy(&enumeration(4), &params, &flat_model(4), &h).unwrap();
            let exact = enumerate_energy(&params, &h).unwrap();
            assert!((mu - exact).norm() < 1e-10, "seed {seed}: {mu} vs {exact}");
        }
    }

    #[test]
    fn fitted_model_reweighting_agrees_with_phi_weighted_identity() {
        // Sum over phi(v)·kappa(v)·E(v) recovers the rho-weighted mean no
        // matter what surrogate the weights came from.
        let params = random_init(3, 5, 1.0, 0.4, 19).unwrap();
        let (model, _) = fit(&params, enumeration(3), 2).unwrap();
        let h = xxz(3, 1.0, 1.3, false);
        let phi = crate::mcmc::exact_phi(&model).unwrap();
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for v in enumeration(3) {
            let k = crate::surrogate::kappa(&params, &model, &v).unwrap();
            let w = phi[v.index()] * k;
            num += local_energy(&h, &params, &v).unwrap() * w;
            den += w;
        }
        let exact = enumerate_energy(&params, &h).unwrap();
        assert!((num / den - exact).norm() < 1e-10);
    }

    #[test]
    fn near_eigenstate_has_vanishing_variance_and_gradient() {
        // a = −8 concentrates the state on spin +1, the ground state of Z.
        let params = RbmParams::new(
            vec![Complex64::new(-8.0, 0.0)],
            vec![Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0)],
            1.0,
        )
        .unwrap();
        let h = PauliHamiltonian::new(1, vec![(1.0, PauliWord::parse("Z").unwrap())]).unwrap();
        let model = flat_model(1);
        let samples = enumeration(1);
        let mu = estimate_energy(&samples, &params, &model, &h).unwrap();
        assert!((mu.re + 1.0).abs() < 1e-10, "mu = {mu}");
        let var = estimate_variance(&samples, &params, &model, &h, mu).unwrap();
        assert!(var < 1e-10, "variance {var}");
        let g = estimate_gradients(&samples, &params, &model, &h).unwrap();
        for gx in g {
            assert!(gx.abs() < 1e-10, "eigenstate gradient {gx}");
        }
    }

    #[test]
    fn two_point_variance_example() {
        // n = 1, H = Z, zero params: E_loc(±1) = ∓1 with equal weights.
        let params = RbmParams::new(
            vec![Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0)],
            1.0,
        )
        .unwrap();
        let h = PauliHamiltonian::new(1, vec![(1.0, PauliWord::parse("Z").unwrap())]).unwrap();
        let model = flat_model(1);
        let samples = enumeration(1);
        let mu = estimate_energy(&samples, &params, &model, &h).unwrap();
        assert!(mu.norm() < 1e-14);
        let var = estimate_variance(&samples, &params, &model, &h, mu).unwrap();
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Includes an odd-Y word so the phase conventions are exercised.
        let mut terms = xxz(2, 1.0, 0.7, false).terms().to_vec();
        terms.push((0.3, PauliWord::parse("YI").unwrap()));
        terms.push((0.2, PauliWord::parse("XZ").unwrap()));
        let h = PauliHamiltonian::new(2, terms).unwrap();
        for seed in [5, 23] {
            let params = random_init(2, 1, 1.0, 0.4, seed).unwrap();
            let model = flat_model(2);
            let g = estimate_gradients(&enumeration(2), &params, &model, &h).unwrap();
            for (x, coord) in crate::rbm::ParamCoordinate::canonical(2, 1)
                .into_iter()
                .enumerate()
            {
                let base = params.coordinate(coord).unwrap();
                let step = 1e-5 * base.abs().max(1.0);
                let mut plus = params.clone();
                plus.set_coordinate(coord, base + step).unwrap();
                let mut minus = params.clone();
                minus.set_coordinate(coord, base - step).unwrap();
                let fd = (enumerate_energy(&plus, &h).unwrap().re
                    - enumerate_energy(&minus, &h).unwrap().re)
                    / (2.0 * step);
                let scale = fd.abs().max(g[x].abs()).max(1e-8);
                assert!(
                    (g[x] - fd).abs() / scale <= 1e-6,
                    "seed {seed} coord {coord:?}: analytic {} vs fd {fd}",
                    g[x]
                );
            }
        }
    }

    #[test]
    fn training_on_identity_converges_in_two_epochs() {
        let h = identity_hamiltonian(2, 3.0);
        let config = TrainingConfig {
            epochs_max: 20,
            samples_per_epoch: 200,
            seed: 9,
            ..TrainingConfig::default()
        };
        let trace = train(&h, &config).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.epochs.len(), 2);
        let last = trace.epochs.last().unwrap();
        assert!((last.energy_re - 3.0).abs() < 1e-12);
        assert!(last.variance < 1e-20);
    }

    #[test]
    fn training_single_qubit_reaches_the_ground_state() {
        let h = PauliHamiltonian::new(1, vec![(1.0, PauliWord::parse("Z").unwrap())]).unwrap();
        let config = TrainingConfig {
            epochs_max: 120,
            samples_per_epoch: 1000,
            learning_rate: 0.05,
            seed: 42,
            ..TrainingConfig::default()
        };
        let trace = train(&h, &config).unwrap();
        let (mean, _std) = trace.reported_energy(config.window);
        let best = trace
            .epochs
            .iter()
            .map(|e| e.energy_re)
            .fold(f64::INFINITY, f64::min);
        assert!(
            best <= -0.999,
            "best energy {best} (reported mean {mean}) misses the ground state"
        );
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let h = xxz(3, 1.0, 0.5, false);
        let config = TrainingConfig {
            epochs_max: 4,
            samples_per_epoch: 300,
            convergence_tol: 1e-12,
            seed: 77,
            ..TrainingConfig::default()
        };
        let t1 = train(&h, &config).unwrap();
        let t2 = train(&h, &config).unwrap();
        assert_eq!(t1.epochs.len(), t2.epochs.len());
        for (a, b) in t1.epochs.iter().zip(&t2.epochs) {
            assert_eq!(a.energy_re, b.energy_re);
            assert_eq!(a.grad_norm, b.grad_norm);
        }
    }

    #[test]
    fn warm_start_resumes_from_snapshot() {
        let h = xxz(2, 1.0, 1.0, false);
        let params = random_init(2, 4, 1.0, 0.2, 5).unwrap();
        let dir = std::env::temp_dir().join(format!("vmc-warm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("snapshot.json");
        std::fs::write(&path, params.to_json()).unwrap();
        let config = TrainingConfig {
            epochs_max: 2,
            samples_per_epoch: 200,
            convergence_tol: 1e-15,
            warm_start_path: Some(path.clone()),
            seed: 3,
            ..TrainingConfig::default()
        };
        let trace = train(&h, &config).unwrap();
        assert_eq!(trace.final_params.n(), 2);
        assert_eq!(trace.final_params.m(), 4);
        std::fs::remove_file(&path).ok();
        std::fs::remove_dir(&dir).ok();

        let mismatched = random_init(3, 4, 1.0, 0.2, 5).unwrap();
        let dir2 = std::env::temp_dir().join(format!("vmc-warm2-{}", std::process::id()));
        std::fs::create_dir_all(&dir2).unwrap();
        let path2 = dir2.join("snapshot.json");
        std::fs::write(&path2, mismatched.to_json()).unwrap();
        let bad = TrainingConfig {
            warm_start_path: Some(path2.clone()),
            ..config
        };
        assert!(train(&h, &bad).is_err());
        std::fs::remove_file(&path2).ok();
        std::fs::remove_dir(&dir2).ok();
    }

    #[test]
    fn zve_recovers_exact_linear_data() {
        let epochs: Vec<EpochRecord> = [0.1, 0.2, 0.3, 0.5]
            .iter()
            .enumerate()
            .map(|(k, &x)| EpochRecord {
                epoch: k + 1,
                energy_re: -3.0 + 5.0 * x,
                energy_im: 0.0,
                variance: 0.0,
                var_ratio: x,
                acceptance: 1.0,
                grad_norm: 0.0,
                ess: 1.0,
                fit_residual: 0.0,
            })
            .collect();
        let params = random_init(1, 1, 1.0, 0.1, 0).unwrap();
        let trace = TrainingTrace {
            epochs,
            final_params: params.clone(),
            best_params: params,
            best_epoch: 4,
            converged: true,
        };
        let z = zve(&trace, 10).unwrap();
        assert!((z.extrapolated_energy + 3.0).abs() < 1e-10);
        assert!((z.slope - 5.0).abs() < 1e-10);
        assert!(!z.degenerate);
        assert_eq!(z.fit_points, 4);

        // Rescaling x by a positive factor moves the slope, not the intercept.
        let mut scaled = trace.clone();
        for e in &mut scaled.epochs {
            e.var_ratio *= 7.5;
        }
        let zs = zve(&scaled, 10).unwrap();
        assert!((zs.extrapolated_energy + 3.0).abs() < 1e-10);
    }

    #[test]
    fn zve_degenerate_and_underfilled_guards() {
        let params = random_init(1, 1, 1.0, 0.1, 0).unwrap();
        let make = |xs: &[f64]| TrainingTrace {
            epochs: xs
                .iter()
                .enumerate()
                .map(|(k, &x)| EpochRecord {
                    epoch: k + 1,
                    energy_re: -2.0 + k as f64 * 0.1,
                    energy_im: 0.0,
                    variance: 0.0,
                    var_ratio: x,
                    acceptance: 1.0,
                    grad_norm: 0.0,
                    ess: 1.0,
                    fit_residual: 0.0,
                })
                .collect(),
            final_params: params.clone(),
            best_params: params.clone(),
            best_epoch: 1,
            converged: true,
        };
        let z = zve(&make(&[0.0, 0.0, 0.0, 0.0]), 10).unwrap();
        assert!(z.degenerate);
        assert!((z.extrapolated_energy - (-2.0 - 1.9 - 1.8 - 1.7) / 4.0).abs() < 1e-12);
        assert!(zve(&make(&[0.1, 0.2]), 10).is_err());
        assert!(zve(&make(&[0.1, f64::INFINITY, 0.2, f64::NAN]), 10).is_err());
    }

    #[test]
    fn correlation_conventions() {
        let params = random_init(4, 6, 1.0, 0.3, 13).unwrap();
        assert_eq!(two_point_correlation(&params, 2, 2).unwrap(), 1.0);
        assert!(two_point_correlation(&params, 0, 4).is_err());
        let a = two_point_correlation(&params, 0, 3).unwrap();
        let b = two_point_correlation(&params, 3, 0).unwrap();
        assert!((a - b).abs() < 1e-12);

        let zero = RbmParams::new(
            vec![Complex64::new(0.0, 0.0); 2],
            vec![Complex64::new(0.0, 0.0); 2],
            vec![Complex64::new(0.0, 0.0); 4],
            1.0,
        )
        .unwrap();
        let c = two_point_correlation(&zero, 0, 1).unwrap();
        assert!(c.abs() < 1e-14, "uniform state correlation {c}");
    }

    #[test]
    fn sampled_correlation_matches_exact_on_enumeration() {
        let params = random_init(3, 4, 1.0, 0.45, 31).unwrap();
        let model = flat_model(3);
        let exact = two_point_correlation(&params, 0, 2).unwrap();
        let sampled =
            two_point_correlation_sampled(&enumeration(3), &params, &model, 0, 2).unwrap();
        assert!((sampled - exact).abs() < 1e-12);
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let mut config = TrainingConfig::default();
        assert!(config.validate().is_ok());
        config.learning_rate = 0.0;
        assert!(config.validate().is_err());
        config = TrainingConfig {
            burn_in_fraction: 1.0,
            ..TrainingConfig::default()
        };
        assert!(config.validate().is_err());
        config = TrainingConfig {
            optimizer: OptimizerKind::Adam {
                beta1: 1.5,
                beta2: 0.999,
                epsilon: 1e-8,
            },
            ..TrainingConfig::default()
        };
        assert!(config.validate().is_err());
        config = TrainingConfig {
            window: 0,
            ..TrainingConfig::default()
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn proposal_choice_round_trips() {
        for (text, choice) in [
            ("A", ProposalChoice::A),
            ("d", ProposalChoice::D),
            (" h ", ProposalChoice::H),
        ] {
            assert_eq!(ProposalChoice::parse(text).unwrap(), choice);
        }
        assert!(ProposalChoice::parse("Z").is_err());
        assert_eq!(ProposalChoice::default(), ProposalChoice::H);
        assert_eq!(ProposalChoice::G.label(), "G");
    }
}
