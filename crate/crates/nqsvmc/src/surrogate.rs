//! Surrogate spin network: a truncated-polynomial log-probability
//! log φ(v) = c₀ + Σᵢ lᵢvᵢ + Σ_{i<j} Jᵢⱼvᵢvⱼ (+ higher monomials) fitted to the
//! diagonal ρ̃_v^v of the density model, the exact factorization oracle over the
//! full monomial basis, and the κ reweighting kernels that make surrogate
//! sampling unbiased.

use crate::configspace::{all_configurations, pair_count, pair_index, pairs, SpinConfiguration};
use crate::error::{Error, Result};
use crate::hamiltonian::{local_energy, PauliHamiltonian};
use crate::numerics::minimize_bfgs;
use crate::rbm::{log_rho_diag, RbmParams};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Log of the smallest representable target probability; diagonal weights are
/// clamped here before fitting so exact zeros stay finite in log space.
const LOG_FLOOR: f64 = -690.77552789821368; // ln(1e-300)

/// Floor on the relative log-weights of the stage-1 fit. For sharp states a
/// handful of configurations carry nearly all probability mass; without the
/// floor the weighted Gram matrix collapses to low rank and the solve is
/// decided by the ridge term, so the surrogate is garbage away from the peak.
const WLS_LOG_WEIGHT_FLOOR: f64 = -8.0;

/// Default number of fit configurations, min(4n², 2ⁿ).
pub fn default_fit_total(n: usize) -> usize {
    let quad = 4 * n * n;
    if n < usize::BITS as usize - 1 {
        quad.min(1usize << n)
    } else {
        quad
    }
}

/// Default share of fit configurations taken from the top-q heuristic.
pub const DEFAULT_TOP_FRACTION: f64 = 0.25;

/// Truncated-polynomial surrogate in log space. The pair couplings live in the
/// shared strictly-upper-triangle layout; monomials of weight ≥ 3 (present only
/// for order > 2) are keyed by their site bitmask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    order: usize,
    c0: f64,
    l: Vec<f64>,
    j_upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    higher: BTreeMap<usize, f64>,
}

impl SurrogateModel {
    pub fn new(order: usize, c0: f64, l: Vec<f64>, j_upper: Vec<f64>) -> Result<Self> {
        let model = Self {
            order,
            c0,
            l,
            j_upper,
            higher: BTreeMap::new(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Attaches monomial coefficients of weight ≥ 3 (requires order ≥ weight).
    pub fn with_higher(mut self, higher: BTreeMap<usize, f64>) -> Result<Self> {
        self.higher = higher;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.l.len();
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one site".into()));
        }
        if self.order < 1 {
            return Err(Error::InvalidArgument("order must be at least 1".into()));
        }
        if self.j_upper.len() != pair_count(n) {
            return Err(Error::DimensionMismatch {
                expected: pair_count(n),
                got: self.j_upper.len(),
            });
        }
        if self.order == 1 && self.j_upper.iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidArgument(
                "order-1 model must have zero pair couplings".into(),
            ));
        }
        if !self.c0.is_finite()
            || self.l.iter().chain(&self.j_upper).any(|x| !x.is_finite())
        {
            return Err(Error::InvalidArgument(
                "non-finite surrogate coefficient".into(),
            ));
        }
        for (&mask, &value) in &self.higher {
            let weight = mask.count_ones() as usize;
            if n < usize::BITS as usize && mask >= 1 << n {
                return Err(Error::InvalidArgument(format!(
                    "monomial mask {mask:#x} out of range for n = {n}"
                )));
            }
            if weight < 3 || weight > self.order {
                return Err(Error::InvalidArgument(format!(
                    "monomial of weight {weight} not allowed at order {}",
                    self.order
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidArgument(
                    "non-finite surrogate coefficient".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.l.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn j_upper(&self) -> &[f64] {
        &self.j_upper
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.j_upper[pair_index(i, j, self.n())]
    }

    pub fn higher(&self) -> &BTreeMap<usize, f64> {
        &self.higher
    }

    /// Unnormalized log-probability of the surrogate at v.
    pub fn log_phi(&self, v: &SpinConfiguration) -> f64 {
        assert_eq!(v.len(), self.n(), "configuration size mismatch");
        let mut acc = self.c0;
        for (i, li) in self.l.iter().enumerate() {
            acc += li * v.spin(i) as f64;
        }
        for (idx, (i, j)) in pairs(self.n()).enumerate() {
            acc += self.j_upper[idx] * (v.spin(i) * v.spin(j)) as f64;
        }
        for (&mask, &coeff) in &self.higher {
            let mut sign = 1i32;
            let mut bits = mask;
            while bits != 0 {
                sign *= v.spin(bits.trailing_zeros() as usize) as i32;
                bits &= bits - 1;
            }
            acc += coeff * sign as f64;
        }
        acc
    }

    /// Truncates a full coefficient table (indexed by monomial bitmask) to the
    /// given order. With order = n this is the exact factorization.
    pub fn from_coefficients(coeffs: &[f64], n: usize, order: usize) -> Result<Self> {
        if n == 0 || n >= usize::BITS as usize || coeffs.len() != 1 << n {
            return Err(Error::InvalidArgument(format!(
                "coefficient table of length {} does not cover n = {n}",
                coeffs.len()
            )));
        }
        if order < 1 || order > n {
            return Err(Error::InvalidArgument(format!(
                "order {order} out of range for n = {n}"
            )));
        }
        let l = (0..n).map(|i| coeffs[1 << i]).collect();
        let j_upper = if order >= 2 {
            pairs(n).map(|(i, j)| coeffs[(1 << i) | (1 << j)]).collect()
        } else {
            vec![0.0; pair_count(n)]
        };
        let mut higher = BTreeMap::new();
        if order > 2 {
            for (mask, &c) in coeffs.iter().enumerate() {
                let weight = mask.count_ones() as usize;
                if (3..=order).contains(&weight) {
                    higher.insert(mask, c);
                }
            }
        }
        SurrogateModel::new(order, coeffs[0], l, j_upper)?.with_higher(higher)
    }
}

/// In-place Walsh–Hadamard transform: x[a] ← Σ_idx (−1)^{popcount(a & idx)} x[idx].
fn walsh_hadamard(x: &mut [f64]) {
    let dim = x.len();
    let mut len = 1;
    while len < dim {
        let mut i = 0;
        while i < dim {
            for j in i..i + len {
                let (u, v) = (x[j], x[j + len]);
                x[j] = u + v;
                x[j + len] = u - v;
            }
            i += 2 * len;
        }
        len *= 2;
    }
}

/// Exact monomial coefficients of a full log-probability table:
/// c_a = 2^{−n} Σ_v log_p(v) F_a(v), returned indexed by monomial bitmask.
/// The reconstruction Σ_a c_a F_a(v) resums to log_p exactly.
pub fn exact_coefficients(log_p: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 1 || n > 12 {
        return Err(Error::TooLarge {
            what: "exact factorization",
            n,
            max: 12,
        });
    }
    if log_p.len() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            got: log_p.len(),
        });
    }
    if log_p.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite log-probability".into()));
    }
    let mut c = log_p.to_vec();
    walsh_hadamard(&mut c);
    let scale = 1.0 / (1 << n) as f64;
    for (mask, v) in c.iter_mut().enumerate() {
        // F_a(v) = (−1)^{popcount(a)} (−1)^{popcount(a & idx)} in bit form.
        let sign = if (mask as u32).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        *v *= sign * scale;
    }
    Ok(c)
}

/// Resums a coefficient table back to log-probability values per configuration
/// index; inverse of [`exact_coefficients`].
pub fn reconstruct_log_table(coeffs: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 1 || n > 12 || coeffs.len() != 1 << n {
        return Err(Error::InvalidArgument(format!(
            "coefficient table of length {} does not cover n = {n} (n <= 12)",
            coeffs.len()
        )));
    }
    let mut table: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(mask, &c)| {
            if (mask as u32).count_ones() % 2 == 0 {
                c
            } else {
                -c
            }
        })
        .collect();
    walsh_hadamard(&mut table);
    Ok(table)
}

fn sign_of(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Seeded greedy search for the q highest-weight configurations of ρ̃_v^v.
///
/// Seeds are −sgn(Re a) and ±sgn(Re W[:,j]) per hidden unit; each round pops
/// the best candidate (ties broken by configuration index), records it, and
/// expands its single-spin flips, keeping at most q live candidates. The
/// recorded list is returned in descending diagonal-weight order.
pub fn top_q_configs(params: &RbmParams, q: usize) -> Result<Vec<SpinConfiguration>> {
    if q < 1 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    let n = params.n();
    let q = if n < usize::BITS as usize {
        q.min(1usize << n)
    } else {
        q
    };

    let mut seeds: Vec<Vec<i8>> = Vec::with_capacity(2 * params.m() + 1);
    seeds.push(params.a().iter().map(|a| -sign_of(a.re)).collect());
    for j in 0..params.m() {
        let col: Vec<i8> = (0..n).map(|i| sign_of(params.w_elem(i, j).re)).collect();
        seeds.push(col.iter().map(|s| -s).collect());
        seeds.push(col);
    }

    let mut seen: HashSet<usize> = HashSet::new();
    let mut candidates: Vec<(f64, usize, SpinConfiguration)> = Vec::new();
    for spins in seeds {
        let v = SpinConfiguration::new(spins).expect("signs are valid spins");
        if seen.insert(v.index()) {
            let weight = log_rho_diag(params, &v)?;
            candidates.push((weight, v.index(), v));
        }
    }

    let better = |a: &(f64, usize, SpinConfiguration), b: &(f64, usize, SpinConfiguration)| {
        (a.0, std::cmp::Reverse(a.1)) > (b.0, std::cmp::Reverse(b.1))
    };
    let mut recorded: Vec<(f64, usize, SpinConfiguration)> = Vec::with_capacity(q);
    while recorded.len() < q && !candidates.is_empty() {
        let mut best = 0;
        for idx in 1..candidates.len() {
            if better(&candidates[idx], &candidates[best]) {
                best = idx;
            }
        }
        let current = candidates.swap_remove(best);
        for site in 0..n {
            let flipped = current.2.flipped(site);
            if seen.insert(flipped.index()) {
                let weight = log_rho_diag(params, &flipped)?;
                candidates.push((weight, flipped.index(), flipped));
            }
        }
        recorded.push(current);
        if candidates.len() > q {
            candidates
                .sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            candidates.truncate(q);
        }
    }
    recorded.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(recorded.into_iter().map(|(_, _, v)| v).collect())
}

/// Configurations selected for a fit, with the top/random split that produced
/// them.
#[derive(Clone, Debug)]
pub struct FitConfigs {
    configs: Vec<SpinConfiguration>,
    num_top: usize,
    num_random: usize,
}

impl FitConfigs {
    pub fn configs(&self) -> &[SpinConfiguration] {
        &self.configs
    }

    pub fn num_top(&self) -> usize {
        self.num_top
    }

    pub fn num_random(&self) -> usize {
        self.num_random
    }
}

impl From<Vec<SpinConfiguration>> for FitConfigs {
    /// Wraps a caller-supplied list of unknown provenance.
    fn from(configs: Vec<SpinConfiguration>) -> Self {
        Self {
            configs,
            num_top: 0,
            num_random: 0,
        }
    }
}

/// Mixes top-q configurations (q = ⌈top_fraction·total⌉) with uniform-random
/// fills, deduplicated, until `total` distinct configurations are collected.
/// Asking for the whole space (or more) returns every configuration.
pub fn select_fit_configs(
    params: &RbmParams,
    total: usize,
    top_fraction: f64,
    seed: u64,
) -> Result<FitConfigs> {
    if total < 1 {
        return Err(Error::InvalidArgument("total must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&top_fraction) {
        return Err(Error::InvalidArgument(format!(
            "top_fraction must lie in [0, 1], got {top_fraction}"
        )));
    }
    let n = params.n();
    let q = (top_fraction * total as f64).ceil() as usize;
    if n < usize::BITS as usize && total >= 1 << n {
        let dim = 1usize << n;
        return Ok(FitConfigs {
            configs: all_configurations(n).collect(),
            num_top: q.min(dim),
            num_random: dim - q.min(dim),
        });
    }

    let mut configs = if q >= 1 {
        top_q_configs(params, q)?
    } else {
        Vec::new()
    };
    let num_top = configs.len();
    let mut seen: HashSet<usize> = configs.iter().map(|v| v.index()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    while configs.len() < total {
        let spins: Vec<i8> = (0..n)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let v = SpinConfiguration::new(spins).expect("signs are valid spins");
        if seen.insert(v.index()) {
            configs.push(v);
        }
    }
    let num_random = configs.len() - num_top;
    Ok(FitConfigs {
        configs,
        num_top,
        num_random,
    })
}

/// Outcome summary of a surrogate fit. Residuals are Euclidean norms of
/// exp(Aθ) − exp(Y) in the max-shifted scale, so `refined_residual` can never
/// exceed `lsq_residual` (the refined stage starts from the least-squares θ
/// and the better of the two is kept).
#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub num_configs_total: usize,
    pub num_top: usize,
    pub num_random: usize,
    pub lsq_residual: f64,
    pub refined_residual: f64,
    pub refinement_iterations: usize,
    /// ‖exp(Y)‖₂ of the (shifted) fit targets, for scale-free residuals.
    pub target_norm: f64,
    /// Set when the refined residual still exceeds 1% of the target norm.
    pub high_residual: bool,
}

impl FitReport {
    /// Refined residual divided by the target norm.
    pub fn relative_residual(&self) -> f64 {
        if self.target_norm > 0.0 {
            self.refined_residual / self.target_norm
        } else {
            f64::INFINITY
        }
    }
}

/// Monomial bitmasks of the design columns in canonical coefficient order:
/// constant, fields, pair couplings (shared upper-triangle order), then
/// higher weights in ascending mask order.
fn design_masks(n: usize, order: usize) -> Vec<usize> {
    let mut masks = vec![0usize];
    masks.extend((0..n).map(|i| 1usize << i));
    if order >= 2 {
        masks.extend(pairs(n).map(|(i, j)| (1usize << i) | (1usize << j)));
    }
    for weight in 3..=order {
        for mask in 0..(1usize << n) {
            if mask.count_ones() as usize == weight {
                masks.push(mask);
            }
        }
    }
    masks
}

fn monomial_value(mask: usize, v: &SpinConfiguration) -> f64 {
    let mut sign = 1i32;
    let mut bits = mask;
    while bits != 0 {
        sign *= v.spin(bits.trailing_zeros() as usize) as i32;
        bits &= bits - 1;
    }
    sign as f64
}

/// Fits a surrogate of the given order to log targets over `configs`.
///
/// Stage 1 solves the weighted least-squares problem min ‖T(Aθ − Y)‖₂ with
/// T = diag(exp(Y − max Y)) by ridge-regularized normal equations; stage 2
/// refines θ by quasi-Newton descent on ‖exp(Aθ) − exp(Y)‖₂² with
/// finite-difference gradients and keeps whichever θ scores lower.
pub(crate) fn fit_to_targets(
    targets: &[f64],
    fc: &FitConfigs,
    n: usize,
    order: usize,
) -> Result<(SurrogateModel, FitReport)> {
    if order < 1 || order > n {
        return Err(Error::InvalidArgument(format!(
            "order {order} out of range for n = {n}"
        )));
    }
    let masks = design_masks(n, order);
    let dim = masks.len();
    let rows = fc.configs.len();
    if rows < dim {
        return Err(Error::InvalidArgument(format!(
            "order-{order} fit needs at least {dim} configurations, got {rows}"
        )));
    }
    if targets.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: targets.len(),
        });
    }

    let shift = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Numerical("non-finite fit target".into()));
    }
    let y: Vec<f64> = targets.iter().map(|t| (t - shift).max(LOG_FLOOR)).collect();
    let a = DMatrix::<f64>::from_fn(rows, dim, |s, c| monomial_value(masks[c], &fc.configs[s]));
    let weights: Vec<f64> = y
        .iter()
        .map(|ys| ys.max(WLS_LOG_WEIGHT_FLOOR).exp())
        .collect();

    // Normal equations (AᵀT²A + λ_r I)θ = AᵀT²Y. Design entries are ±1, so
    // trace(AᵀTA)/dim collapses to the plain weight sum.
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for s in 0..rows {
        let w2 = weights[s] * weights[s];
        let row = a.row(s);
        for i in 0..dim {
            rhs[i] += w2 * y[s] * row[i];
            for j in 0..dim {
                m[(i, j)] += w2 * row[i] * row[j];
            }
        }
    }
    let ridge = 1e-10 * weights.iter().sum::<f64>();
    for i in 0..dim {
        m[(i, i)] += ridge;
    }
    let theta_lsq = match m.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular fit normal equations".into()))?,
    };

    let exp_y: Vec<f64> = y.iter().map(|ys| ys.exp()).collect();
    let objective = |theta: &[f64]| -> f64 {
        let mut acc = 0.0;
        for s in 0..rows {
            let mut dot = 0.0;
            for c in 0..dim {
                dot += a[(s, c)] * theta[c];
            }
            // Targets are ≤ 1 after the shift; capping the exponent keeps the
            // objective (and its finite-difference gradients) finite if the
            // line search probes a wild θ.
            let r = dot.min(700.0).exp() - exp_y[s];
            acc += r * r;
        }
        acc
    };
    let lsq_objective = objective(theta_lsq.as_slice());
    let refined = minimize_bfgs(&objective, theta_lsq.as_slice(), 200, 1e-8, 1e-7);
    let (theta, refined_objective) = if refined.value < lsq_objective {
        (DVector::from_vec(refined.x), refined.value)
    } else {
        (theta_lsq, lsq_objective)
    };

    let c0 = theta[0] + shift;
    let l: Vec<f64> = (1..=n).map(|i| theta[i]).collect();
    let pc = if order >= 2 { pair_count(n) } else { 0 };
    let j_upper = if order >= 2 {
        (0..pc).map(|k| theta[1 + n + k]).collect()
    } else {
        vec![0.0; pair_count(n)]
    };
    let mut higher = BTreeMap::new();
    for (c, &mask) in masks.iter().enumerate().skip(1 + n + pc) {
        higher.insert(mask, theta[c]);
    }
    let model = SurrogateModel::new(order, c0, l, j_upper)?.with_higher(higher)?;

    let target_norm = exp_y.iter().map(|t| t * t).sum::<f64>().sqrt();
    let refined_residual = refined_objective.sqrt();
    let report = FitReport {
        num_configs_total: rows,
        num_top: fc.num_top,
        num_random: fc.num_random,
        lsq_residual: lsq_objective.sqrt(),
        refined_residual,
        refinement_iterations: refined.iterations,
        target_norm,
        high_residual: refined_residual > 0.01 * target_norm,
    };
    Ok((model, report))
}

/// Fits a surrogate of the given order to the diagonal of the density model
/// over the supplied configurations.
pub fn fit(
    params: &RbmParams,
    configs: impl Into<FitConfigs>,
    order: usize,
) -> Result<(SurrogateModel, FitReport)> {
    let fc = configs.into();
    let targets: Vec<f64> = fc
        .configs
        .iter()
        .map(|v| log_rho_diag(params, v))
        .collect::<Result<_>>()?;
    fit_to_targets(&targets, &fc, params.n(), order)
}

/// Selects fit configurations and fits in one step.
pub fn fit_auto(
    params: &RbmParams,
    total: usize,
    top_fraction: f64,
    order: usize,
    seed: u64,
) -> Result<(SurrogateModel, FitReport)> {
    let fc = select_fit_configs(params, total, top_fraction, seed)?;
    fit(params, fc, order)
}

/// log κ(v) = log ρ̃_v^v − log φ(v).
pub fn log_kappa(params: &RbmParams, model: &SurrogateModel, v: &SpinConfiguration) -> Result<f64> {
    if model.n() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: model.n(),
        });
    }
    Ok(log_rho_diag(params, v)? - model.log_phi(v))
}

/// The reweighting prefactor κ(v) = ρ̃_v^v / φ̃(v); errors if the ratio
/// overflows out of the representable range.
pub fn kappa(params: &RbmParams, model: &SurrogateModel, v: &SpinConfiguration) -> Result<f64> {
    let k = log_kappa(params, model, v)?.exp();
    if !k.is_finite() {
        return Err(Error::Numerical(format!(
            "kappa overflow at {}",
            v.to_pm_string()
        )));
    }
    Ok(k)
}

/// The variance-reduction kernel κ_α = 1/(λ|E_loc|^α).
pub fn kappa_alpha(e_loc: Complex64, alpha: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need finite alpha and positive lambda, got alpha={alpha}, lambda={lambda}"
        )));
    }
    if alpha == 0.0 {
        return Ok(1.0 / lambda);
    }
    let r = e_loc.norm();
    if r == 0.0 {
        return Err(Error::Numerical(
            "kappa_alpha singular: local energy vanishes with alpha > 0".into(),
        ));
    }
    let k = 1.0 / (lambda * r.powf(alpha));
    if !k.is_finite() {
        return Err(Error::Numerical("kappa_alpha overflow".into()));
    }
    Ok(k)
}

/// Full-enumeration check of the variance-reduction identity: returns
/// (lhs, rhs) with lhs = Var_ρ(E_loc) − Var_φ(E_loc·κ_α) for φ ∝ |E|^α ρ and
/// rhs = Cov_ρ(|E|^{2−α}, |E|^α). The two agree analytically for every α.
pub fn variance_gap_bruteforce(
    h: &PauliHamiltonian,
    params: &RbmParams,
    alpha: f64,
) -> Result<(f64, f64)> {
    let n = h.n();
    if n > 6 {
        return Err(Error::TooLarge {
            what: "variance-gap enumeration",
            n,
            max: 6,
        });
    }
    if params.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: params.n(),
        });
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }

    let configs: Vec<SpinConfiguration> = all_configurations(n).collect();
    let mut log_w = Vec::with_capacity(configs.len());
    let mut e_loc = Vec::with_capacity(configs.len());
    for v in &configs {
        log_w.push(log_rho_diag(params, v)?);
        e_loc.push(local_energy(h, params, v)?);
    }
    if alpha != 0.0 && alpha != 2.0 && e_loc.iter().any(|e| e.norm() == 0.0) {
        return Err(Error::Numerical(
            "local energy vanishes somewhere; the alpha kernel is singular".into(),
        ));
    }
    let max_log = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - max_log).exp()).collect();
    let z: f64 = weights.iter().sum();
    let p: Vec<f64> = weights.iter().map(|w| w / z).collect();

    let mean_alpha: f64 = p
        .iter()
        .zip(&e_loc)
        .map(|(pi, e)| pi * e.norm().powf(alpha))
        .sum();
    if !(mean_alpha > 0.0) {
        return Err(Error::Numerical(
            "every local energy vanishes; cannot normalize the alpha-tilted distribution".into(),
        ));
    }
    let lambda = 1.0 / mean_alpha;

    let mut mean_p = Complex64::default();
    let mut second_p = 0.0;
    for (pi, e) in p.iter().zip(&e_loc) {
        mean_p += pi * e;
        second_p += pi * e.norm_sqr();
    }
    let var_p = second_p - mean_p.norm_sqr();

    // Var over φ = λ|E|^α p of E·κ, evaluating φ and κ separately so the
    // comparison against the covariance is a genuine numerical check. At
    // α = 2 a vanishing E gets its continuum-limit weight p/λ in the second
    // moment (φ|Eκ|² = p|E|^{2−α}/λ → p/λ) and nothing in the mean.
    let mut mean_phi = Complex64::default();
    let mut second_phi = 0.0;
    for (pi, e) in p.iter().zip(&e_loc) {
        let r = e.norm();
        if r == 0.0 {
            if alpha == 2.0 {
                second_phi += pi / lambda;
            } else if alpha == 0.0 {
                let k = kappa_alpha(*e, alpha, lambda)?;
                let phi = lambda * pi;
                mean_phi += phi * e * k;
                second_phi += phi * (e * k).norm_sqr();
            }
            continue;
        }
        let phi = lambda * r.powf(alpha) * pi;
        let k = kappa_alpha(*e, alpha, lambda)?;
        mean_phi += phi * e * k;
        second_phi += phi * (e * k).norm_sqr();
    }
    let var_phi = second_phi - mean_phi.norm_sqr();

    let lhs = var_p - var_phi;
    let mut m_lo = 0.0;
    let mut m_hi = 0.0;
    let mut m_cross = 0.0;
    for (pi, e) in p.iter().zip(&e_loc) {
        let r = e.norm();
        m_lo += pi * r.powf(alpha);
        m_hi += pi * r.powf(2.0 - alpha);
        m_cross += pi * r * r;
    }
    let rhs = m_cross - m_hi * m_lo;
    Ok((lhs, rhs))
}
