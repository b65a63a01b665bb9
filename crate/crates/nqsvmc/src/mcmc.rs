//! Metropolis–Hastings sampling of the surrogate distribution φ(v) ∝ e^{logφ(v)}.
//!
//! Proposal kernels range from classical moves (single-site flips, uniform
//! redraws, a Haar-random unitary) to simulated quantum dynamics: exact or
//! Trotterized evolution under h(γ) = γh₁ + (1−γ)h₂, where h₁ is the surrogate
//! Ising Hamiltonian and h₂ = ΣᵢXᵢ. All kernels are symmetric, so acceptance
//! reduces to min(1, φ′/φ). Small systems additionally get the full transition
//! matrix, its spectral gap, mixing-time bounds, and chain diagnostics.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::configspace::{index_to_config, SpinConfiguration};
use crate::error::{Error, Result};
use crate::quantumsim::{check_field_dims, evolve_trotter, ExactPropagator, ProposalCircuitParams};
use crate::surrogate::SurrogateModel;

/// Largest n for which dense kernels (Haar, exact evolution, transition
/// matrices, exact distributions) are built.
pub const EXACT_KERNEL_MAX_SITES: usize = 10;

/// Reversibility tolerance: max |S − Sᵀ| beyond which a kernel is rejected.
pub const REVERSIBILITY_TOL: f64 = 1e-6;

/// γ used by the fixed-schedule quantum proposals E, F, G, and H.
pub const QUANTUM_GAMMA: f64 = 0.425;

/// A proposal kernel for the Metropolis–Hastings chain.
///
/// The quantum constructors d–h take the (l, J) of the surrogate being
/// sampled and store the fields of the circuit generator h₁, flipping the
/// sign of l on the way in (see [`aligned_l`]). Building a quantum variant
/// directly supplies generator fields verbatim.
#[derive(Clone, Debug)]
pub enum ProposalSpec {
    /// A: flip one uniformly chosen site.
    Local,
    /// B: redraw v′ uniformly from all 2ⁿ configurations (v′ = v allowed).
    Uniform,
    /// C: v′ ~ |⟨v′|U|v⟩|² for a Haar-random U drawn once per chain.
    Haar,
    /// D: exact evolution under h(γ) with (γ, τ) drawn uniformly at every step.
    QuantumAverage {
        l: Vec<f64>,
        j_upper: Vec<f64>,
        gamma_range: (f64, f64),
        tau_range: (f64, f64),
    },
    /// E/F/G: exact evolution under h(γ) for a fixed (γ, τ).
    QuantumExact {
        l: Vec<f64>,
        j_upper: Vec<f64>,
        gamma: f64,
        tau: f64,
    },
    /// H: first-order Trotterized circuit evolution.
    Trotter(ProposalCircuitParams),
}

/// Converts surrogate fields into circuit-generator fields.
///
/// The surrogate stores log φ̃ = c0 + Σ lᵢvᵢ + Σ Jᵢⱼvᵢvⱼ over spins v = ±1,
/// while the generator h₁ = Σ lᵢZᵢ + Σ JᵢⱼZᵢZⱼ acts on qubits whose Z
/// eigenvalue is z = −v. Flipping the sign of l makes diag(h₁) = log φ̃ − c0,
/// so near-energy-conserving evolution proposes along iso-φ̃ surfaces; the J
/// term is even in z and passes through unchanged.
fn aligned_l(l: Vec<f64>) -> Vec<f64> {
    l.into_iter().map(|x| -x).collect()
}

impl ProposalSpec {
    pub fn a() -> Self {
        ProposalSpec::Local
    }

    pub fn b() -> Self {
        ProposalSpec::Uniform
    }

    pub fn c() -> Self {
        ProposalSpec::Haar
    }

    /// D: exact evolution with γ ∈ (0.25, 0.6) and τ ∈ (4, 20) redrawn per step.
    pub fn d(l: Vec<f64>, j_upper: Vec<f64>) -> Result<Self> {
        check_field_dims(&l, &j_upper)?;
        Ok(ProposalSpec::QuantumAverage {
            l: aligned_l(l),
            j_upper,
            gamma_range: (0.25, 0.6),
            tau_range: (4.0, 20.0),
        })
    }

    /// E: exact evolution, γ = 0.425, τ = 20.
    pub fn e(l: Vec<f64>, j_upper: Vec<f64>) -> Result<Self> {
        Self::quantum_exact(l, j_upper, QUANTUM_GAMMA, 20.0)
    }

    /// F: exact evolution, γ = 0.425, τ = 2.
    pub fn f(l: Vec<f64>, j_upper: Vec<f64>) -> Result<Self> {
        Self::quantum_exact(l, j_upper, QUANTUM_GAMMA, 2.0)
    }

    /// G: exact evolution, γ = 0.425, τ = 11.
    pub fn g(l: Vec<f64>, j_upper: Vec<f64>) -> Result<Self> {
        Self::quantum_exact(l, j_upper, QUANTUM_GAMMA, 11.0)
    }

    /// H: Trotterized evolution, γ = 0.425, τ = 11, δt = 0.2.
    pub fn h(l: Vec<f64>, j_upper: Vec<f64>) -> Result<Self> {
        Ok(ProposalSpec::Trotter(ProposalCircuitParams::new(
            aligned_l(l),
            j_upper,
            QUANTUM_GAMMA,
            11.0,
            0.2,
        )?))
    }

    /// Exact-evolution proposal with explicit (γ, τ); l is the surrogate's field.
    pub fn quantum_exact(l: Vec<f64>, j_upper: Vec<f64>, gamma: f64, tau: f64) -> Result<Self> {
        check_field_dims(&l, &j_upper)?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive and finite, got {tau}"
            )));
        }
        Ok(ProposalSpec::QuantumExact {
            l: aligned_l(l),
            j_upper,
            gamma,
            tau,
        })
    }

    /// One-letter tag used in benchmark tables. The canonical (γ, τ) schedules
    /// map to E/F/G; any other exact schedule reports "Q".
    pub fn label(&self) -> &'static str {
        match self {
            ProposalSpec::Local => "A",
            ProposalSpec::Uniform => "B",
            ProposalSpec::Haar => "C",
            ProposalSpec::QuantumAverage { .. } => "D",
            ProposalSpec::QuantumExact { gamma, tau, .. } => {
                if *gamma == QUANTUM_GAMMA {
                    if *tau == 20.0 {
                        return "E";
                    }
                    if *tau == 2.0 {
                        return "F";
                    }
                    if *tau == 11.0 {
                        return "G";
                    }
                }
                "Q"
            }
            ProposalSpec::Trotter(_) => "H",
        }
    }
}

/// Per-chain sampler for one proposal kernel.
///
/// Holds everything that persists across steps: the Haar unitary for C (drawn
/// once per chain), the dense eigendecomposition plus memoized |U|² columns for
/// E/F/G, and memoized Trotter columns for H.
pub struct Proposer {
    n: usize,
    kind: ProposerKind,
}

enum ProposerKind {
    Local,
    Uniform,
    Haar {
        probs: DMatrix<f64>,
    },
    QuantumAverage {
        l: Vec<f64>,
        j_upper: Vec<f64>,
        gamma_range: (f64, f64),
        tau_range: (f64, f64),
    },
    QuantumExact {
        prop: ExactPropagator,
        tau: f64,
        columns: HashMap<usize, Vec<f64>>,
    },
    Trotter {
        params: ProposalCircuitParams,
        columns: HashMap<usize, Vec<f64>>,
    },
}

fn check_sites(what: &'static str, n: usize) -> Result<()> {
    if n > EXACT_KERNEL_MAX_SITES {
        return Err(Error::TooLarge {
            what,
            n,
            max: EXACT_KERNEL_MAX_SITES,
        });
    }
    Ok(())
}

fn check_spec_n(l: &[f64], n: usize) -> Result<()> {
    if l.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: l.len(),
        });
    }
    Ok(())
}

fn check_ranges(gamma_range: (f64, f64), tau_range: (f64, f64)) -> Result<()> {
    let (g1, g2) = gamma_range;
    let (t1, t2) = tau_range;
    if !(g1.is_finite() && g2.is_finite() && 0.0 <= g1 && g1 <= g2 && g2 <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma range ({g1}, {g2}) must be ordered inside [0, 1]"
        )));
    }
    if !(t1.is_finite() && t2.is_finite() && 0.0 < t1 && t1 <= t2) {
        return Err(Error::InvalidArgument(format!(
            "tau range ({t1}, {t2}) must be ordered and positive"
        )));
    }
    Ok(())
}

impl Proposer {
    /// Builds the per-chain state; `rng` is consumed only by kind C (the Haar
    /// draw), so all other kinds leave the caller's stream untouched.
    pub fn new(spec: &ProposalSpec, n: usize, rng: &mut impl Rng) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one site".into()));
        }
        let kind = match spec {
            ProposalSpec::Local => ProposerKind::Local,
            ProposalSpec::Uniform => ProposerKind::Uniform,
            ProposalSpec::Haar => {
                check_sites("the Haar proposal kernel", n)?;
                let u = haar_unitary(1 << n, rng);
                ProposerKind::Haar {
                    probs: u.map(|a| a.norm_sqr()),
                }
            }
            ProposalSpec::QuantumAverage {
                l,
                j_upper,
                gamma_range,
                tau_range,
            } => {
                check_spec_n(l, n)?;
                check_field_dims(l, j_upper)?;
                check_ranges(*gamma_range, *tau_range)?;
                check_sites("per-step exact evolution", n)?;
                ProposerKind::QuantumAverage {
                    l: l.clone(),
                    j_upper: j_upper.clone(),
                    gamma_range: *gamma_range,
                    tau_range: *tau_range,
                }
            }
            ProposalSpec::QuantumExact {
                l,
                j_upper,
                gamma,
                tau,
            } => {
                check_spec_n(l, n)?;
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "tau must be positive and finite, got {tau}"
                    )));
                }
                ProposerKind::QuantumExact {
                    prop: ExactPropagator::new(l, j_upper, *gamma, EXACT_KERNEL_MAX_SITES)?,
                    tau: *tau,
                    columns: HashMap::new(),
                }
            }
            ProposalSpec::Trotter(params) => {
                check_spec_n(params.l(), n)?;
                ProposerKind::Trotter {
                    params: params.clone(),
                    columns: HashMap::new(),
                }
            }
        };
        Ok(Self { n, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws v′ from the kernel's distribution given the current state.
    pub fn propose(&mut self, v: &SpinConfiguration, rng: &mut impl Rng) -> SpinConfiguration {
        debug_assert_eq!(v.len(), self.n);
        let n = self.n;
        match &mut self.kind {
            ProposerKind::Local => v.flipped(rng.random_range(0..n)),
            ProposerKind::Uniform => random_configuration(n, rng),
            ProposerKind::Haar { probs } => {
                let col = probs.column(v.index());
                let idx = sample_weights(col.iter().copied(), rng);
                index_to_config(idx, n)
            }
            ProposerKind::QuantumAverage {
                l,
                j_upper,
                gamma_range,
                tau_range,
            } => {
                let gamma = rng.random_range(gamma_range.0..=gamma_range.1);
                let tau = rng.random_range(tau_range.0..=tau_range.1);
                let prop = ExactPropagator::new(l, j_upper, gamma, EXACT_KERNEL_MAX_SITES)
                    .expect("fields validated at construction");
                let amps = prop.column(tau, v.index());
                let idx = sample_weights(amps.iter().map(|a| a.norm_sqr()), rng);
                index_to_config(idx, n)
            }
            ProposerKind::QuantumExact { prop, tau, columns } => {
                let weights = columns
                    .entry(v.index())
                    .or_insert_with(|| prop.column(*tau, v.index()).iter().map(|a| a.norm_sqr()).collect());
                let idx = sample_weights(weights.iter().copied(), rng);
                index_to_config(idx, n)
            }
            ProposerKind::Trotter { params, columns } => {
                let weights = columns.entry(v.index()).or_insert_with(|| {
                    evolve_trotter(v, params)
                        .amps()
                        .iter()
                        .map(|a| a.norm_sqr())
                        .collect()
                });
                let idx = sample_weights(weights.iter().copied(), rng);
                index_to_config(idx, n)
            }
        }
    }
}

fn random_configuration(n: usize, rng: &mut impl Rng) -> SpinConfiguration {
    let spins = (0..n).map(|_| if rng.random() { 1 } else { -1 }).collect();
    SpinConfiguration::new(spins).expect("spins are ±1 by construction")
}

/// Samples an index proportionally to the given non-negative weights.
fn sample_weights<I>(weights: I, rng: &mut impl Rng) -> usize
where
    I: Iterator<Item = f64> + Clone,
{
    let total: f64 = weights.clone().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (idx, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = idx;
        if u < w {
            return idx;
        }
        u -= w;
    }
    last
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the R diagonal's
/// phases pushed into Q.
fn haar_unitary(dim: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut u = qr.q();
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            d / d.norm()
        };
        for row in 0..dim {
            u[(row, c)] *= phase;
        }
    }
    u
}

/// One Metropolis–Hastings step: propose, then accept with min(1, φ′/φ).
/// Returns the next state and whether the proposal was accepted.
pub fn mh_step(
    proposer: &mut Proposer,
    model: &SurrogateModel,
    v: &SpinConfiguration,
    rng: &mut impl Rng,
) -> (SpinConfiguration, bool) {
    let proposal = proposer.propose(v, rng);
    let delta = model.log_phi(&proposal) - model.log_phi(v);
    let accept = delta >= 0.0 || rng.random::<f64>() < delta.exp();
    if accept {
        (proposal, true)
    } else {
        (v.clone(), false)
    }
}

/// Output of one Metropolis–Hastings chain. `samples` holds every post-step
/// state including the burn-in prefix; estimators should use [`retained`].
///
/// [`retained`]: ChainResult::retained
#[derive(Clone, Debug)]
pub struct ChainResult {
    samples: Vec<SpinConfiguration>,
    acceptance_rate: f64,
    seed: u64,
    burn_in_count: usize,
}

impl ChainResult {
    pub fn new(
        samples: Vec<SpinConfiguration>,
        acceptance_rate: f64,
        seed: u64,
        burn_in_count: usize,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty sample list".into()));
        }
        if !(0.0..=1.0).contains(&acceptance_rate) {
            return Err(Error::InvalidArgument(format!(
                "acceptance rate must lie in [0, 1], got {acceptance_rate}"
            )));
        }
        if burn_in_count >= samples.len() {
            return Err(Error::InvalidArgument(format!(
                "burn-in of {burn_in_count} leaves no retained samples out of {}",
                samples.len()
            )));
        }
        Ok(Self {
            samples,
            acceptance_rate,
            seed,
            burn_in_count,
        })
    }

    /// Every sample in step order, burn-in included.
    pub fn samples(&self) -> &[SpinConfiguration] {
        &self.samples
    }

    /// The samples after the burn-in prefix; estimators act on these.
    pub fn retained(&self) -> &[SpinConfiguration] {
        &self.samples[self.burn_in_count..]
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn burn_in_count(&self) -> usize {
        self.burn_in_count
    }
}

/// Runs one chain of `n_samples` MH steps targeting φ.
///
/// The state starts uniform over configurations, the first
/// ⌈burn_in_fraction·n_samples⌉ samples are flagged as burn-in (kept in the
/// output, skipped by estimators), and the whole trajectory is a deterministic
/// function of `seed`.
pub fn run_chain(
    spec: &ProposalSpec,
    model: &SurrogateModel,
    n_samples: usize,
    burn_in_fraction: f64,
    seed: u64,
) -> Result<ChainResult> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidArgument(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    let burn_in_count = (burn_in_fraction * n_samples as f64).ceil() as usize;
    if burn_in_count >= n_samples {
        return Err(Error::InvalidArgument(format!(
            "burn-in of {burn_in_count} leaves no retained samples out of {n_samples}"
        )));
    }
    let n = model.n();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // RNG order is part of the contract: initial state first, then the
    // proposer's own draw (the Haar unitary for C), then the step stream.
    let mut v = random_configuration(n, &mut rng);
    let mut proposer = Proposer::new(spec, n, &mut rng)?;
    let mut samples = Vec::with_capacity(n_samples);
    let mut accepted = 0usize;
    for _ in 0..n_samples {
        let (next, acc) = mh_step(&mut proposer, model, &v, &mut rng);
        v = next;
        accepted += acc as usize;
        samples.push(v.clone());
    }
    Ok(ChainResult {
        samples,
        acceptance_rate: accepted as f64 / n_samples as f64,
        seed,
        burn_in_count,
    })
}

/// Seed for chain `index` derived from a base seed (splitmix64-style mix), so
/// parallel chains get decorrelated, reproducible streams.
pub fn derive_chain_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n_chains` independent chains in parallel; result order is by chain
/// index and identical to the sequential run.
pub fn run_chains(
    spec: &ProposalSpec,
    model: &SurrogateModel,
    n_chains: usize,
    n_samples: usize,
    burn_in_fraction: f64,
    base_seed: u64,
) -> Result<Vec<ChainResult>> {
    (0..n_chains)
        .into_par_iter()
        .map(|i| {
            run_chain(
                spec,
                model,
                n_samples,
                burn_in_fraction,
                derive_chain_seed(base_seed, i as u64),
            )
        })
        .collect()
}

/// The exact normalized distribution φ(v)/Σφ by enumeration (n ≤ 10).
pub fn exact_phi(model: &SurrogateModel) -> Result<Vec<f64>> {
    let n = model.n();
    check_sites("exact distribution enumeration", n)?;
    let dim = 1usize << n;
    let log_phi: Vec<f64> = (0..dim)
        .map(|idx| model.log_phi(&index_to_config(idx, n)))
        .collect();
    let max = log_phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical("non-finite surrogate log-weight".into()));
    }
    let mut phi: Vec<f64> = log_phi.iter().map(|lp| (lp - max).exp()).collect();
    let total: f64 = phi.iter().sum();
    for p in &mut phi {
        *p /= total;
    }
    Ok(phi)
}

/// The proposal matrix P[v′, v] (columns indexed by the current state).
fn proposal_matrix(spec: &ProposalSpec, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let dim = 1usize << n;
    match spec {
        ProposalSpec::Local => {
            let mut p = DMatrix::zeros(dim, dim);
            let w = 1.0 / n as f64;
            for c in 0..dim {
                for q in 0..n {
                    p[(c ^ (1 << q), c)] = w;
                }
            }
            Ok(p)
        }
        ProposalSpec::Uniform => Ok(DMatrix::from_element(dim, dim, 1.0 / dim as f64)),
        ProposalSpec::Haar => {
            // A sampled Haar kernel is only approximately symmetric; the
            // analysis matrix averages it with its transpose so the MH
            // construction below stays exact.
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let u = haar_unitary(dim, &mut rng);
            let p = u.map(|a| a.norm_sqr());
            Ok((&p + p.transpose()) * 0.5)
        }
        ProposalSpec::QuantumAverage {
            l,
            j_upper,
            gamma_range,
            tau_range,
        } => {
            check_spec_n(l, n)?;
            check_ranges(*gamma_range, *tau_range)?;
            // Monte Carlo average of the per-step kernel over (γ, τ) draws;
            // each term is symmetric, so the average is too.
            const K: usize = 32;
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut p = DMatrix::zeros(dim, dim);
            for _ in 0..K {
                let gamma = rng.random_range(gamma_range.0..=gamma_range.1);
                let tau = rng.random_range(tau_range.0..=tau_range.1);
                let prop = ExactPropagator::new(l, j_upper, gamma, EXACT_KERNEL_MAX_SITES)?;
                p += prop.probability_matrix(tau);
            }
            Ok(p / K as f64)
        }
        ProposalSpec::QuantumExact {
            l,
            j_upper,
            gamma,
            tau,
        } => {
            check_spec_n(l, n)?;
            let prop = ExactPropagator::new(l, j_upper, *gamma, EXACT_KERNEL_MAX_SITES)?;
            Ok(prop.probability_matrix(*tau))
        }
        ProposalSpec::Trotter(params) => {
            check_spec_n(params.l(), n)?;
            let mut p = DMatrix::zeros(dim, dim);
            for c in 0..dim {
                let state = evolve_trotter(&index_to_config(c, n), params);
                for (r, a) in state.amps().iter().enumerate() {
                    p[(r, c)] = a.norm_sqr();
                }
            }
            Ok(p)
        }
    }
}

/// Assembles the full MH transition matrix T[v′, v] for small systems:
/// off-diagonal entries P(v′|v)·min(1, φ′/φ), diagonal the rejected mass plus
/// any self-proposal weight. Columns sum to one.
///
/// `seed` only matters for the stochastic kernels (C draws its Haar unitary
/// from it, D its (γ, τ) samples); the rest are deterministic in the spec.
pub fn build_transition_matrix(
    spec: &ProposalSpec,
    model: &SurrogateModel,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let n = model.n();
    check_sites("exact transition-matrix assembly", n)?;
    let dim = 1usize << n;
    let p = proposal_matrix(spec, n, seed)?;
    let log_phi: Vec<f64> = (0..dim)
        .map(|idx| model.log_phi(&index_to_config(idx, n)))
        .collect();
    let mut t = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let mut stay = 1.0;
        for r in 0..dim {
            if r == c {
                continue;
            }
            let acc = (log_phi[r] - log_phi[c]).min(0.0).exp();
            let w = p[(r, c)] * acc;
            t[(r, c)] = w;
            stay -= w;
        }
        t[(c, c)] = stay.max(0.0);
    }
    Ok(t)
}

/// Symmetrizes a column-stochastic reversible kernel: S = D^{−1/2} T D^{1/2}
/// with D = diag(φ), which detailed balance makes symmetric.
fn symmetrized_eigen(t: &DMatrix<f64>, phi: &[f64]) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let dim = t.nrows();
    if t.ncols() != dim || phi.len() != dim || dim == 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: if t.ncols() != dim { t.ncols() } else { phi.len() },
        });
    }
    if phi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidArgument(
            "stationary weights must be positive and finite".into(),
        ));
    }
    let mut s = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            s[(r, c)] = t[(r, c)] * (phi[c] / phi[r]).sqrt();
        }
    }
    let mut asymmetry = 0.0f64;
    for r in 0..dim {
        for c in r + 1..dim {
            asymmetry = asymmetry.max((s[(r, c)] - s[(c, r)]).abs());
        }
    }
    if asymmetry > REVERSIBILITY_TOL {
        return Err(Error::NotReversible { asymmetry });
    }
    let sym = (&s + s.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym))
}

/// Spectral gap δ = λ₀ − λ₁ of the reversible kernel T with stationary weights
/// φ (any normalization). Errors with [`Error::NotReversible`] if T and φ do
/// not satisfy detailed balance to within `REVERSIBILITY_TOL`.
pub fn spectral_gap(t: &DMatrix<f64>, phi: &[f64]) -> Result<f64> {
    if t.nrows() < 2 {
        return Ok(1.0);
    }
    let eigen = symmetrized_eigen(t, phi)?;
    let mut vals: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    vals.sort_unstable_by(|a, b| b.total_cmp(a));
    debug_assert!(
        (vals[0] - 1.0).abs() <= 1e-9,
        "leading eigenvalue {} strays from 1",
        vals[0]
    );
    Ok(vals[0] - vals[1])
}

/// Absolute spectral gap 1 − maxᵢ≥₁|λᵢ|, which also penalizes eigenvalues near
/// −1 (period-two sloshing). Reported alongside δ in benchmarks, not used by
/// the headline comparisons.
pub fn spectral_gap_abs(t: &DMatrix<f64>, phi: &[f64]) -> Result<f64> {
    if t.nrows() < 2 {
        return Ok(1.0);
    }
    let eigen = symmetrized_eigen(t, phi)?;
    let mut vals: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    vals.sort_unstable_by(|a, b| b.total_cmp(a));
    let sub = vals[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(1.0 - sub)
}

/// Mixing-time bounds from the spectral gap:
/// (1/δ − 1)·ln(1/2ε) ≤ t_mix(ε) ≤ (1/δ)·ln(1/(ε·min φ)).
/// φ may be passed unnormalized; δ = 0 has no finite upper bound.
pub fn mixing_time_bounds(delta: f64, phi: &[f64], epsilon: f64) -> Result<(f64, f64)> {
    if !(delta.is_finite() && (0.0..=1.0).contains(&delta)) {
        return Err(Error::InvalidArgument(format!(
            "spectral gap must lie in [0, 1], got {delta}"
        )));
    }
    if delta == 0.0 {
        return Err(Error::UnboundedMixingTime);
    }
    if !(epsilon.is_finite() && 0.0 < epsilon && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    if phi.is_empty() || phi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidArgument(
            "stationary weights must be positive and finite".into(),
        ));
    }
    let total: f64 = phi.iter().sum();
    let min_phi = phi.iter().cloned().fold(f64::INFINITY, f64::min) / total;
    let lower = (1.0 / delta - 1.0) * (1.0 / (2.0 * epsilon)).ln();
    let upper = (1.0 / delta) * (1.0 / (epsilon * min_phi)).ln();
    Ok((lower, upper))
}

/// Chain-quality summary against the exactly enumerated target distribution.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    /// ‖empirical − φ‖₂ over the retained samples.
    pub l2_error: f64,
    /// Total-variation distance ½‖empirical − φ‖₁ over the retained samples.
    pub tv_distance: f64,
    /// Autocorrelation of the logφ time series at lags 0..=max_lag, computed
    /// over the full chain (burn-in included) so the transient is visible.
    pub autocorrelation: Vec<f64>,
}

/// Compares a chain against the exact distribution (n ≤ 10).
pub fn diagnostics(
    result: &ChainResult,
    model: &SurrogateModel,
    max_lag: usize,
) -> Result<Diagnostics> {
    let n = model.n();
    let phi = exact_phi(model)?;
    let retained = result.retained();
    if retained.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: retained.iter().map(|v| v.len()).find(|&l| l != n).unwrap_or(n),
        });
    }
    let mut hist = vec![0.0f64; 1 << n];
    for v in retained {
        hist[v.index()] += 1.0;
    }
    let total = retained.len() as f64;
    let mut l2 = 0.0;
    let mut tv = 0.0;
    for (h, p) in hist.iter().zip(&phi) {
        let diff = h / total - p;
        l2 += diff * diff;
        tv += diff.abs();
    }
    let series: Vec<f64> = result.samples().iter().map(|v| model.log_phi(v)).collect();
    Ok(Diagnostics {
        l2_error: l2.sqrt(),
        tv_distance: 0.5 * tv,
        autocorrelation: autocorrelation(&series, max_lag),
    })
}

/// Normalized autocorrelation ρ(k) for k = 0..=max_lag. A constant series has
/// no scale to normalize by and reports 1.0 at every lag.
fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let len = series.len();
    if series.iter().all(|x| *x == series[0]) {
        return vec![1.0; max_lag + 1];
    }
    let mean = series.iter().sum::<f64>() / len as f64;
    let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    (0..=max_lag)
        .map(|lag| {
            if var == 0.0 {
                return 1.0;
            }
            if lag >= len {
                return 0.0;
            }
            let c: f64 = (0..len - lag)
                .map(|t| (series[t] - mean) * (series[t + lag] - mean))
                .sum();
            c / var
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::exact_coefficients;

    fn test_model(n: usize) -> SurrogateModel {
        let l: Vec<f64> = (0..n).map(|i| 0.3 - 0.07 * i as f64).collect();
        let np = crate::configspace::pair_count(n);
        let j: Vec<f64> = (0..np).map(|k| -0.12 + 0.03 * k as f64).collect();
        SurrogateModel::new(2, 0.1, l, j).unwrap()
    }

    fn flat_model(n: usize) -> SurrogateModel {
        SurrogateModel::new(
            2,
            0.0,
            vec![0.0; n],
            vec![0.0; crate::configspace::pair_count(n)],
        )
        .unwrap()
    }

    fn test_fields(n: usize) -> (Vec<f64>, Vec<f64>) {
        let l: Vec<f64> = (0..n).map(|i| 0.25 - 0.1 * i as f64).collect();
        let np = crate::configspace::pair_count(n);
        let j: Vec<f64> = (0..np).map(|k| 0.2 - 0.05 * k as f64).collect();
        (l, j)
    }

    #[test]
    fn local_proposals_differ_in_exactly_one_site() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut prop = Proposer::new(&ProposalSpec::a(), 5, &mut rng).unwrap();
        let v = index_to_config(19, 5);
        for _ in 0..200 {
            let w = prop.propose(&v, &mut rng);
            let differing = (0..5).filter(|&i| v.spin(i) != w.spin(i)).count();
            assert_eq!(differing, 1);
        }
    }

    #[test]
    fn uniform_proposal_hits_every_configuration_evenly() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let mut prop = Proposer::new(&ProposalSpec::b(), 2, &mut rng).unwrap();
        let v = index_to_config(0, 2);
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[prop.propose(&v, &mut rng).index()] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn trotter_proposal_freezes_as_gamma_approaches_one() {
        // γ → 1 removes the mixer, leaving diagonal evolution that cannot
        // change the measured configuration.
        let (l, j) = test_fields(3);
        let params = ProposalCircuitParams::new(l, j, 1.0 - 1e-12, 11.0, 0.2).unwrap();
        let spec = ProposalSpec::Trotter(params);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut prop = Proposer::new(&spec, 3, &mut rng).unwrap();
        let v = index_to_config(5, 3);
        for _ in 0..100 {
            assert_eq!(prop.propose(&v, &mut rng).index(), v.index());
        }
    }

    #[test]
    fn quantum_average_draws_fresh_schedules() {
        let (l, j) = test_fields(3);
        let spec = ProposalSpec::d(l, j).unwrap();
        let model = test_model(3);
        let result = run_chain(&spec, &model, 50, 0.0, 17).unwrap();
        assert_eq!(result.samples().len(), 50);
        // Same seed reproduces; the kernel itself is stochastic per step.
        let again = run_chain(&spec, &model, 50, 0.0, 17).unwrap();
        let idx: Vec<usize> = result.samples().iter().map(|v| v.index()).collect();
        let idx2: Vec<usize> = again.samples().iter().map(|v| v.index()).collect();
        assert_eq!(idx, idx2);
    }

    #[test]
    fn mh_accepts_everything_on_a_flat_target() {
        let model = flat_model(3);
        let result = run_chain(&ProposalSpec::b(), &model, 500, 0.0, 3).unwrap();
        assert_eq!(result.acceptance_rate(), 1.0);
    }

    #[test]
    fn run_chain_is_deterministic_and_flags_burn_in() {
        let model = test_model(3);
        let spec = ProposalSpec::a();
        let r1 = run_chain(&spec, &model, 100, 0.10, 7).unwrap();
        let r2 = run_chain(&spec, &model, 100, 0.10, 7).unwrap();
        assert_eq!(r1.burn_in_count(), 10);
        assert_eq!(r1.samples().len(), 100);
        assert_eq!(r1.retained().len(), 90);
        assert_eq!(r1.seed(), 7);
        let idx1: Vec<usize> = r1.samples().iter().map(|v| v.index()).collect();
        let idx2: Vec<usize> = r2.samples().iter().map(|v| v.index()).collect();
        assert_eq!(idx1, idx2);
        let r3 = run_chain(&spec, &model, 100, 0.10, 8).unwrap();
        let idx3: Vec<usize> = r3.samples().iter().map(|v| v.index()).collect();
        assert_ne!(idx1, idx3);
    }

    #[test]
    fn default_schedule_retains_nine_tenths() {
        let model = test_model(2);
        let r = run_chain(&ProposalSpec::a(), &model, 10_000, 0.10, 1).unwrap();
        assert_eq!(r.burn_in_count(), 1000);
        assert_eq!(r.retained().len(), 9000);
    }

    #[test]
    fn degenerate_chain_requests_are_rejected() {
        let model = test_model(2);
        assert!(run_chain(&ProposalSpec::a(), &model, 0, 0.1, 1).is_err());
        assert!(run_chain(&ProposalSpec::a(), &model, 100, 1.0, 1).is_err());
        assert!(run_chain(&ProposalSpec::a(), &model, 1, 0.5, 1).is_err());
    }

    #[test]
    fn parallel_chains_match_sequential_runs() {
        let model = test_model(3);
        let spec = ProposalSpec::a();
        let batch = run_chains(&spec, &model, 4, 200, 0.1, 99).unwrap();
        for (i, chain) in batch.iter().enumerate() {
            let solo = run_chain(&spec, &model, 200, 0.1, derive_chain_seed(99, i as u64)).unwrap();
            let a: Vec<usize> = chain.samples().iter().map(|v| v.index()).collect();
            let b: Vec<usize> = solo.samples().iter().map(|v| v.index()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..100 {
            assert!(seen.insert(derive_chain_seed(42, i)));
        }
        assert_ne!(derive_chain_seed(42, 0), derive_chain_seed(43, 0));
    }

    #[test]
    fn chains_approach_the_target_distribution() {
        let model = test_model(3);
        let r = run_chain(&ProposalSpec::a(), &model, 20_000, 0.10, 314).unwrap();
        let d = diagnostics(&r, &model, 10).unwrap();
        assert!(d.l2_error < 0.05, "l2 error {}", d.l2_error);
        assert!(d.tv_distance < 0.05, "tv distance {}", d.tv_distance);
    }

    #[test]
    fn iid_reference_sampler_scores_tightly() {
        // Inverse-CDF draws from the exact distribution stand in for a
        // perfectly mixed chain.
        let model = test_model(3);
        let phi = exact_phi(&model).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut samples = Vec::with_capacity(draws);
        for _ in 0..draws {
            let mut u = rng.random::<f64>();
            let mut idx = phi.len() - 1;
            for (k, p) in phi.iter().enumerate() {
                if u < *p {
                    idx = k;
                    break;
                }
                u -= p;
            }
            samples.push(index_to_config(idx, 3));
        }
        let result = ChainResult::new(samples, 1.0, 2024, 0).unwrap();
        let d = diagnostics(&result, &model, 5).unwrap();
        assert!(d.l2_error <= 0.02, "l2 error {}", d.l2_error);
        assert!((d.autocorrelation[0] - 1.0).abs() < 1e-12);
        for rho in &d.autocorrelation[1..] {
            assert!(rho.abs() < 0.05, "iid autocorrelation {rho}");
        }
    }

    #[test]
    fn single_repeated_sample_has_complementary_tv() {
        let model = test_model(2);
        let phi = exact_phi(&model).unwrap();
        let v = index_to_config(3, 2);
        let samples = vec![v.clone(); 50];
        let result = ChainResult::new(samples, 1.0, 0, 0).unwrap();
        let d = diagnostics(&result, &model, 3).unwrap();
        assert!((d.tv_distance - (1.0 - phi[3])).abs() < 1e-12);
        // A constant logφ series has no scale; every lag reports 1.
        for rho in &d.autocorrelation {
            assert!((rho - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_kernel_on_flat_target_is_exactly_flat() {
        let model = flat_model(2);
        let t = build_transition_matrix(&ProposalSpec::b(), &model, 0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((t[(r, c)] - 0.25).abs() < 1e-15);
            }
        }
        let phi = exact_phi(&model).unwrap();
        let delta = spectral_gap(&t, &phi).unwrap();
        assert!((delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_kernel_matches_hand_assembled_matrix() {
        // φ = (0.4, 0.3, 0.2, 0.1); a quadratic surrogate on n = 2 represents
        // any positive table exactly.
        let phi: [f64; 4] = [0.4, 0.3, 0.2, 0.1];
        let log_phi: Vec<f64> = phi.iter().map(|p| p.ln()).collect();
        let coeffs = exact_coefficients(&log_phi, 2).unwrap();
        let model = SurrogateModel::from_coefficients(&coeffs, 2, 2).unwrap();

        let t = build_transition_matrix(&ProposalSpec::a(), &model, 0).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        for c in 0..4usize {
            for q in 0..2 {
                let r = c ^ (1 << q);
                expected[(r, c)] = 0.5 * (phi[r] / phi[c]).min(1.0);
            }
            expected[(c, c)] = 1.0 - expected.column(c).sum() + expected[(c, c)];
        }
        for r in 0..4 {
            for c in 0..4 {
                assert!(
                    (t[(r, c)] - expected[(r, c)]).abs() < 1e-12,
                    "entry ({r}, {c}): {} vs {}",
                    t[(r, c)],
                    expected[(r, c)]
                );
            }
        }
    }

    #[test]
    fn kernels_are_stochastic_and_stationary() {
        let (l, j) = test_fields(3);
        let model = test_model(3);
        let phi = exact_phi(&model).unwrap();
        let specs = [
            ProposalSpec::a(),
            ProposalSpec::b(),
            ProposalSpec::c(),
            ProposalSpec::d(l.clone(), j.clone()).unwrap(),
            ProposalSpec::e(l.clone(), j.clone()).unwrap(),
            ProposalSpec::g(l.clone(), j.clone()).unwrap(),
            ProposalSpec::h(l, j).unwrap(),
        ];
        for spec in &specs {
            let t = build_transition_matrix(spec, &model, 7).unwrap();
            for c in 0..8 {
                let col_sum: f64 = t.column(c).sum();
                assert!(
                    (col_sum - 1.0).abs() < 1e-12,
                    "{}: column {c} sums to {col_sum}",
                    spec.label()
                );
                for r in 0..8 {
                    assert!(t[(r, c)] >= 0.0);
                }
            }
            // Stationarity Tφ = φ and detailed balance.
            for r in 0..8 {
                let flow: f64 = (0..8).map(|c| t[(r, c)] * phi[c]).sum();
                assert!(
                    (flow - phi[r]).abs() < 1e-10,
                    "{}: stationarity violated at {r}",
                    spec.label()
                );
                for c in 0..8 {
                    assert!(
                        (phi[c] * t[(r, c)] - phi[r] * t[(c, r)]).abs() < 1e-10,
                        "{}: detailed balance violated at ({r}, {c})",
                        spec.label()
                    );
                }
            }
        }
    }

    #[test]
    fn stochastic_kernels_are_reproducible_under_seed() {
        let model = test_model(2);
        let (l, j) = test_fields(2);
        for spec in [
            ProposalSpec::c(),
            ProposalSpec::d(l, j).unwrap(),
        ] {
            let t1 = build_transition_matrix(&spec, &model, 5).unwrap();
            let t2 = build_transition_matrix(&spec, &model, 5).unwrap();
            let t3 = build_transition_matrix(&spec, &model, 6).unwrap();
            assert_eq!(t1, t2);
            assert_ne!(t1, t3);
        }
    }

    #[test]
    fn identity_kernel_has_zero_gap() {
        let t = DMatrix::identity(4, 4);
        let phi = [0.4, 0.3, 0.2, 0.1];
        let delta = spectral_gap(&t, &phi).unwrap();
        assert!(delta.abs() < 1e-12);
    }

    #[test]
    fn non_reversible_kernel_is_rejected() {
        let t = DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.5, 0.75]);
        let phi = [0.5, 0.5];
        match spectral_gap(&t, &phi) {
            Err(Error::NotReversible { asymmetry }) => assert!(asymmetry > 0.2),
            other => panic!("expected NotReversible, got {other:?}"),
        }
    }

    #[test]
    fn absolute_gap_penalizes_negative_eigenvalues() {
        // Period-two kernel on two states: eigenvalues {1, −1}.
        let t = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let phi = [0.5, 0.5];
        assert!((spectral_gap(&t, &phi).unwrap() - 2.0).abs() < 1e-12);
        assert!(spectral_gap_abs(&t, &phi).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gap_matches_acceptance_structure_of_local_chain() {
        let model = test_model(4);
        let phi = exact_phi(&model).unwrap();
        let t = build_transition_matrix(&ProposalSpec::a(), &model, 0).unwrap();
        let delta = spectral_gap(&t, &phi).unwrap();
        assert!(delta > 0.0 && delta < 1.0, "gap {delta}");
    }

    #[test]
    fn mixing_bounds_match_hand_values() {
        // δ = 1: the lower bound vanishes.
        let phi = [0.25, 0.25, 0.25, 0.25];
        let (lower, _) = mixing_time_bounds(1.0, &phi, 0.1).unwrap();
        assert_eq!(lower, 0.0);
        // δ = 1/2, ε = 0.1, min φ = 1/16 → upper = 2 ln 160.
        let mut phi16 = vec![1.0 / 16.0; 4];
        phi16[3] = 13.0 / 16.0;
        let (lower, upper) = mixing_time_bounds(0.5, &phi16, 0.1).unwrap();
        assert!((upper - 2.0 * 160.0f64.ln()).abs() < 1e-12);
        assert!((lower - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mixing_bounds_are_ordered_and_guard_their_domain() {
        let phi = [0.4, 0.3, 0.2, 0.1];
        for k in 1..=10 {
            let delta = k as f64 / 10.0;
            let (lower, upper) = mixing_time_bounds(delta, &phi, 0.1).unwrap();
            assert!(lower <= upper, "δ = {delta}: {lower} > {upper}");
        }
        assert!(matches!(
            mixing_time_bounds(0.0, &phi, 0.1),
            Err(Error::UnboundedMixingTime)
        ));
        assert!(mixing_time_bounds(0.5, &phi, 0.6).is_err());
        assert!(mixing_time_bounds(0.5, &phi, 0.0).is_err());
        assert!(mixing_time_bounds(1.5, &phi, 0.1).is_err());
        assert!(mixing_time_bounds(0.5, &[0.5, -0.5], 0.1).is_err());
    }

    #[test]
    fn proposal_labels_follow_the_schedule_table() {
        let (l, j) = test_fields(2);
        assert_eq!(ProposalSpec::a().label(), "A");
        assert_eq!(ProposalSpec::b().label(), "B");
        assert_eq!(ProposalSpec::c().label(), "C");
        assert_eq!(ProposalSpec::d(l.clone(), j.clone()).unwrap().label(), "D");
        assert_eq!(ProposalSpec::e(l.clone(), j.clone()).unwrap().label(), "E");
        assert_eq!(ProposalSpec::f(l.clone(), j.clone()).unwrap().label(), "F");
        assert_eq!(ProposalSpec::g(l.clone(), j.clone()).unwrap().label(), "G");
        assert_eq!(ProposalSpec::h(l.clone(), j.clone()).unwrap().label(), "H");
        assert_eq!(
            ProposalSpec::quantum_exact(l, j, 0.3, 7.0).unwrap().label(),
            "Q"
        );
    }

    #[test]
    fn mismatched_field_dimensions_are_rejected() {
        let (l, j) = test_fields(3);
        let spec = ProposalSpec::e(l, j).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(Proposer::new(&spec, 4, &mut rng).is_err());
        let model4 = test_model(4);
        assert!(build_transition_matrix(&spec, &model4, 0).is_err());
    }

    #[test]
    fn malformed_ranges_are_rejected() {
        let (l, j) = test_fields(2);
        let spec = ProposalSpec::QuantumAverage {
            l,
            j_upper: j,
            gamma_range: (0.7, 0.2),
            tau_range: (4.0, 20.0),
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(Proposer::new(&spec, 2, &mut rng).is_err());
    }

    #[test]
    fn exact_phi_is_normalized_and_ordered_by_index() {
        let model = test_model(3);
        let phi = exact_phi(&model).unwrap();
        assert_eq!(phi.len(), 8);
        assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let v = index_to_config(5, 3);
        let direct = model.log_phi(&v).exp();
        let ratio = phi[5] / phi[0];
        let direct_ratio = direct / model.log_phi(&index_to_config(0, 3)).exp();
        assert!((ratio - direct_ratio).abs() < 1e-12);
    }

    #[test]
    fn haar_kernel_is_drawn_once_per_chain() {
        // With a fixed unitary the proposal distribution from a fixed state is
        // fixed; two proposers with the same rng stream agree draw by draw.
        let spec = ProposalSpec::c();
        let mut rng1 = ChaCha12Rng::seed_from_u64(77);
        let mut rng2 = ChaCha12Rng::seed_from_u64(77);
        let mut p1 = Proposer::new(&spec, 3, &mut rng1).unwrap();
        let mut p2 = Proposer::new(&spec, 3, &mut rng2).unwrap();
        let v = index_to_config(2, 3);
        for _ in 0..50 {
            assert_eq!(
                p1.propose(&v, &mut rng1).index(),
                p2.propose(&v, &mut rng2).index()
            );
        }
    }
}
