//! The complex-parameter RBM state and its log-domain matrix elements.
//!
//! The unnormalized visible density matrix factorizes over rows, with matrix
//! element
//!
//! ```text
//! log ρ̃(v, v′) = −β Σᵢ (aᵢ vᵢ + aᵢ* vᵢ′)
//!               + Σⱼ [ log cosh(β bⱼ + β Σᵢ Wᵢⱼ vᵢ) + log cosh(β bⱼ* + β Σᵢ Wᵢⱼ* vᵢ′) ]
//! ```
//!
//! Everything is evaluated in the log domain so the state stays usable when the
//! cosh arguments are large. The a-term sign convention (a global −β on both the
//! plain and conjugated sums) is the one consistent with the diagonal formula
//! −2β Σ Re(aᵢ)vᵢ and with the gradient table below.

use crate::configspace::SpinConfiguration;
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Trainable parameters of the RBM: visible biases `a` (length n), hidden
/// biases `b` (length m), couplings `W` (n×m, row-major), and the inverse
/// temperature `beta`.
#[derive(Clone, Debug)]
pub struct RbmParams {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    w: Vec<Complex64>,
    beta: f64,
}

impl RbmParams {
    pub fn new(a: Vec<Complex64>, b: Vec<Complex64>, w: Vec<Complex64>, beta: f64) -> Result<Self> {
        let (n, m) = (a.len(), b.len());
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument(
                "need at least one visible and one hidden unit".into(),
            ));
        }
        if w.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: w.len(),
            });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        let finite = |zs: &[Complex64]| zs.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&a) || !finite(&b) || !finite(&w) {
            return Err(Error::Numerical("non-finite RBM parameter".into()));
        }
        Ok(Self { a, b, w, beta })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn a(&self) -> &[Complex64] {
        &self.a
    }

    pub fn b(&self) -> &[Complex64] {
        &self.b
    }

    /// Couplings, row-major: `w()[i*m + j]` is Wᵢⱼ for site i and hidden unit j.
    pub fn w(&self) -> &[Complex64] {
        &self.w
    }

    pub fn w_elem(&self, site: usize, hidden: usize) -> Complex64 {
        self.w[site * self.m() + hidden]
    }

    /// Number of real coordinates: 2(n + m + nm).
    pub fn param_count(&self) -> usize {
        2 * (self.n() + self.m() + self.n() * self.m())
    }

    /// Reads one real coordinate.
    pub fn coordinate(&self, coord: ParamCoordinate) -> Result<f64> {
        coord.validate(self.n(), self.m())?;
        Ok(match coord {
            ParamCoordinate::ReA(k) => self.a[k].re,
            ParamCoordinate::ImA(k) => self.a[k].im,
            ParamCoordinate::ReB(p) => self.b[p].re,
            ParamCoordinate::ImB(p) => self.b[p].im,
            ParamCoordinate::ReW(k, p) => self.w[k * self.m() + p].re,
            ParamCoordinate::ImW(k, p) => self.w[k * self.m() + p].im,
        })
    }

    /// Writes one real coordinate.
    pub fn set_coordinate(&mut self, coord: ParamCoordinate, value: f64) -> Result<()> {
        coord.validate(self.n(), self.m())?;
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "refusing to set {coord:?} to non-finite value {value}"
            )));
        }
        let m = self.m();
        match coord {
            ParamCoordinate::ReA(k) => self.a[k].re = value,
            ParamCoordinate::ImA(k) => self.a[k].im = value,
            ParamCoordinate::ReB(p) => self.b[p].re = value,
            ParamCoordinate::ImB(p) => self.b[p].im = value,
            ParamCoordinate::ReW(k, p) => self.w[k * m + p].re = value,
            ParamCoordinate::ImW(k, p) => self.w[k * m + p].im = value,
        }
        Ok(())
    }

    /// Adds `delta` to the flat real-coordinate vector in canonical order
    /// [ReA, ImA, ReB, ImB, ReW row-major, ImW row-major].
    pub fn apply_shift(&mut self, delta: &[f64]) -> Result<()> {
        if delta.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: delta.len(),
            });
        }
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::Numerical("non-finite parameter update".into()));
        }
        let (n, m) = (self.n(), self.m());
        let mut it = delta.iter();
        for k in 0..n {
            self.a[k].re += it.next().unwrap();
        }
        for k in 0..n {
            self.a[k].im += it.next().unwrap();
        }
        for p in 0..m {
            self.b[p].re += it.next().unwrap();
        }
        for p in 0..m {
            self.b[p].im += it.next().unwrap();
        }
        for w in self.w.iter_mut() {
            w.re += it.next().unwrap();
        }
        for w in self.w.iter_mut() {
            w.im += it.next().unwrap();
        }
        Ok(())
    }

    /// Serializes to the snapshot JSON document (n, m, beta, flat [re,im] pairs).
    pub fn to_json(&self) -> String {
        let pairs = |zs: &[Complex64]| zs.iter().map(|z| [z.re, z.im]).collect();
        let snap = Snapshot {
            n: self.n(),
            m: self.m(),
            beta: self.beta,
            a: pairs(&self.a),
            b: pairs(&self.b),
            w: pairs(&self.w),
        };
        serde_json::to_string_pretty(&snap).expect("snapshot serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("bad snapshot: {e}")))?;
        let unpairs = |ps: &[[f64; 2]]| {
            ps.iter()
                .map(|p| Complex64::new(p[0], p[1]))
                .collect::<Vec<_>>()
        };
        if snap.a.len() != snap.n || snap.b.len() != snap.m || snap.w.len() != snap.n * snap.m {
            return Err(Error::Parse(
                "snapshot array lengths disagree with stated n, m".into(),
            ));
        }
        Self::new(unpairs(&snap.a), unpairs(&snap.b), unpairs(&snap.w), snap.beta)
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    n: usize,
    m: usize,
    beta: f64,
    a: Vec<[f64; 2]>,
    b: Vec<[f64; 2]>,
    w: Vec<[f64; 2]>,
}

/// One real coordinate of the parameter vector.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParamCoordinate {
    ReA(usize),
    ImA(usize),
    ReB(usize),
    ImB(usize),
    ReW(usize, usize),
    ImW(usize, usize),
}

impl ParamCoordinate {
    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        let ok = match *self {
            ParamCoordinate::ReA(k) | ParamCoordinate::ImA(k) => k < n,
            ParamCoordinate::ReB(p) | ParamCoordinate::ImB(p) => p < m,
            ParamCoordinate::ReW(k, p) | ParamCoordinate::ImW(k, p) => k < n && p < m,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "coordinate {self:?} out of bounds for n={n}, m={m}"
            )))
        }
    }

    /// All coordinates in canonical order [ReA, ImA, ReB, ImB, ReW, ImW],
    /// W blocks row-major.
    pub fn canonical(n: usize, m: usize) -> Vec<ParamCoordinate> {
        let mut out = Vec::with_capacity(2 * (n + m + n * m));
        out.extend((0..n).map(ParamCoordinate::ReA));
        out.extend((0..n).map(ParamCoordinate::ImA));
        out.extend((0..m).map(ParamCoordinate::ReB));
        out.extend((0..m).map(ParamCoordinate::ImB));
        out.extend((0..n).flat_map(|k| (0..m).map(move |p| ParamCoordinate::ReW(k, p))));
        out.extend((0..n).flat_map(|k| (0..m).map(move |p| ParamCoordinate::ImW(k, p))));
        out
    }

    /// Position of this coordinate in the canonical order.
    pub fn flat_index(&self, n: usize, m: usize) -> usize {
        match *self {
            ParamCoordinate::ReA(k) => k,
            ParamCoordinate::ImA(k) => n + k,
            ParamCoordinate::ReB(p) => 2 * n + p,
            ParamCoordinate::ImB(p) => 2 * n + m + p,
            ParamCoordinate::ReW(k, p) => 2 * n + 2 * m + k * m + p,
            ParamCoordinate::ImW(k, p) => 2 * n + 2 * m + n * m + k * m + p,
        }
    }
}

/// log cosh(z) without overflow: cosh z = e^{z̃}(1 + e^{−2z̃})/2 with z̃ chosen so
/// Re(z̃) ≥ 0 (cosh is even). Real parts of the result are exact for |Re z| up to
/// the top of the double range; the imaginary part is taken on the principal
/// branch of the residual log, which is all downstream uses need (diagonals use
/// 2·Re, off-diagonals are exponentiated).
pub(crate) fn log_cosh(z: Complex64) -> Complex64 {
    let zz = if z.re < 0.0 { -z } else { z };
    zz + (Complex64::new(1.0, 0.0) + (-2.0 * zz).exp()).ln() - std::f64::consts::LN_2
}

/// tanh(z) without overflow, via e^{−2z̃} with Re(z̃) ≥ 0.
pub(crate) fn tanh_c(z: Complex64) -> Complex64 {
    let neg = z.re < 0.0;
    let zz = if neg { -z } else { z };
    let e = (-2.0 * zz).exp();
    let t = (Complex64::new(1.0, 0.0) - e) / (Complex64::new(1.0, 0.0) + e);
    if neg {
        -t
    } else {
        t
    }
}

/// Hidden-unit arguments θⱼ(v) = β(bⱼ + Σᵢ Wᵢⱼ vᵢ) for all j.
pub(crate) fn thetas(params: &RbmParams, v: &SpinConfiguration) -> Vec<Complex64> {
    let (n, m) = (params.n(), params.m());
    let mut acc = vec![Complex64::new(0.0, 0.0); m];
    for i in 0..n {
        let vi = v.spin(i) as f64;
        let row = &params.w[i * m..(i + 1) * m];
        for (j, w) in row.iter().enumerate() {
            acc[j] += w * vi;
        }
    }
    for (j, t) in acc.iter_mut().enumerate() {
        *t = params.beta * (params.b[j] + *t);
    }
    acc
}

/// The row half of the factorized matrix element:
/// half(v) = −β Σᵢ aᵢvᵢ + Σⱼ log cosh θⱼ(v), so that
/// log ρ̃(v, v′) = half(v) + conj(half(v′)).
pub(crate) fn log_half(params: &RbmParams, v: &SpinConfiguration) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, ai) in params.a.iter().enumerate() {
        acc -= params.beta * ai * v.spin(i) as f64;
    }
    for theta in thetas(params, v) {
        acc += log_cosh(theta);
    }
    acc
}

fn check_lengths(params: &RbmParams, v: &SpinConfiguration) -> Result<()> {
    if v.len() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Log of the unnormalized matrix element ρ̃(v, v′).
///
/// The conjugated column sum Σⱼ log cosh(β bⱼ* + β Σᵢ Wᵢⱼ* vᵢ′) is evaluated as
/// conj(Σⱼ log cosh θⱼ(v′)): cosh commutes with conjugation and the principal
/// branches agree away from the (measure-zero) negative-real cut, so this is the
/// same value and makes Hermiticity exact by construction.
pub fn log_rho(
    params: &RbmParams,
    v: &SpinConfiguration,
    v_prime: &SpinConfiguration,
) -> Result<Complex64> {
    check_lengths(params, v)?;
    check_lengths(params, v_prime)?;
    let out = log_half(params, v) + log_half(params, v_prime).conj();
    if !(out.re.is_finite() && out.im.is_finite()) {
        return Err(Error::Numerical(
            "log_rho overflowed; RBM parameters have blown up".into(),
        ));
    }
    Ok(out)
}

/// Log of the diagonal weight ρ̃(v, v): −2β Σᵢ Re(aᵢ)vᵢ + Σⱼ 2·Re log cosh θⱼ(v).
/// Always real; equals Re(log_rho(v, v)).
pub fn log_rho_diag(params: &RbmParams, v: &SpinConfiguration) -> Result<f64> {
    check_lengths(params, v)?;
    let out = 2.0 * log_half(params, v).re;
    if !out.is_finite() {
        return Err(Error::Numerical(
            "log_rho_diag overflowed; RBM parameters have blown up".into(),
        ));
    }
    Ok(out)
}

/// The logarithmic-derivative table 𝒟ᵛᵥ′(x) = ∂ log ρ̃(v,v′) / ∂x for one real
/// coordinate x:
///
/// ```text
/// Re(a_k):  −β (v_k + v_k′)            Im(a_k):  −iβ (v_k − v_k′)
/// Re(b_p):   β (t_p + t̄_p′)            Im(b_p):   iβ (t_p − t̄_p′)
/// Re(W_kp):  β (t_p v_k + t̄_p′ v_k′)   Im(W_kp):  iβ (t_p v_k − t̄_p′ v_k′)
/// ```
///
/// with t_p = tanh θ_p(v) and t̄_p′ = tanh(β b_p* + β Σᵢ Wᵢₚ* vᵢ′) = conj(tanh θ_p(v′)).
pub fn grad_log_rho(
    params: &RbmParams,
    v: &SpinConfiguration,
    v_prime: &SpinConfiguration,
    coord: ParamCoordinate,
) -> Result<Complex64> {
    check_lengths(params, v)?;
    check_lengths(params, v_prime)?;
    coord.validate(params.n(), params.m())?;
    let beta = params.beta;
    let i_unit = Complex64::new(0.0, 1.0);
    Ok(match coord {
        ParamCoordinate::ReA(k) => {
            Complex64::new(-beta * (v.spin(k) as f64 + v_prime.spin(k) as f64), 0.0)
        }
        ParamCoordinate::ImA(k) => {
            -i_unit * beta * (v.spin(k) as f64 - v_prime.spin(k) as f64)
        }
        ParamCoordinate::ReB(p) => {
            let t = tanh_c(thetas(params, v)[p]);
            let tbar = tanh_c(thetas(params, v_prime)[p]).conj();
            beta * (t + tbar)
        }
        ParamCoordinate::ImB(p) => {
            let t = tanh_c(thetas(params, v)[p]);
            let tbar = tanh_c(thetas(params, v_prime)[p]).conj();
            i_unit * beta * (t - tbar)
        }
        ParamCoordinate::ReW(k, p) => {
            let t = tanh_c(thetas(params, v)[p]);
            let tbar = tanh_c(thetas(params, v_prime)[p]).conj();
            beta * (t * v.spin(k) as f64 + tbar * v_prime.spin(k) as f64)
        }
        ParamCoordinate::ImW(k, p) => {
            let t = tanh_c(thetas(params, v)[p]);
            let tbar = tanh_c(thetas(params, v_prime)[p]).conj();
            i_unit * beta * (t * v.spin(k) as f64 - tbar * v_prime.spin(k) as f64)
        }
    })
}

/// Full gradient vector in canonical order, sharing the tanh evaluations.
pub fn grad_log_rho_vector(
    params: &RbmParams,
    v: &SpinConfiguration,
    v_prime: &SpinConfiguration,
) -> Result<Vec<Complex64>> {
    check_lengths(params, v)?;
    check_lengths(params, v_prime)?;
    let (n, m, beta) = (params.n(), params.m(), params.beta);
    let i_unit = Complex64::new(0.0, 1.0);
    let t: Vec<Complex64> = thetas(params, v).into_iter().map(tanh_c).collect();
    let tbar: Vec<Complex64> = thetas(params, v_prime)
        .into_iter()
        .map(|th| tanh_c(th).conj())
        .collect();
    let mut out = Vec::with_capacity(2 * (n + m + n * m));
    for k in 0..n {
        out.push(Complex64::new(
            -beta * (v.spin(k) as f64 + v_prime.spin(k) as f64),
            0.0,
        ));
    }
    for k in 0..n {
        out.push(-i_unit * beta * (v.spin(k) as f64 - v_prime.spin(k) as f64));
    }
    for p in 0..m {
        out.push(beta * (t[p] + tbar[p]));
    }
    for p in 0..m {
        out.push(i_unit * beta * (t[p] - tbar[p]));
    }
    for k in 0..n {
        let vk = v.spin(k) as f64;
        let vpk = v_prime.spin(k) as f64;
        for p in 0..m {
            out.push(beta * (t[p] * vk + tbar[p] * vpk));
        }
    }
    for k in 0..n {
        let vk = v.spin(k) as f64;
        let vpk = v_prime.spin(k) as f64;
        for p in 0..m {
            out.push(i_unit * beta * (t[p] * vk - tbar[p] * vpk));
        }
    }
    Ok(out)
}

/// Random parameters with every real/imaginary part i.i.d. uniform in
/// [−scale, scale], drawn from a ChaCha stream seeded by `seed`. Draw order:
/// a then b then W row-major, re before im.
pub fn random_init(n: usize, m: usize, beta: f64, scale: f64, seed: u64) -> Result<RbmParams> {
    if scale < 0.0 || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "init scale must be finite and non-negative, got {scale}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha12Rng| {
        let u: f64 = rng.random();
        Complex64::new(
            (2.0 * u - 1.0) * scale,
            (2.0 * rng.random::<f64>() - 1.0) * scale,
        )
    };
    let a = (0..n).map(|_| draw(&mut rng)).collect();
    let b = (0..m).map(|_| draw(&mut rng)).collect();
    let w = (0..n * m).map(|_| draw(&mut rng)).collect();
    RbmParams::new(a, b, w, beta)
}
