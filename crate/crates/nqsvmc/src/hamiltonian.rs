//! Pauli-word Hamiltonians: XXZ construction, text-file ingestion for molecular
//! problems, configuration action, and the local energy.

use crate::configspace::SpinConfiguration;
use crate::error::{Error, Result};
use crate::rbm::{log_half, RbmParams};
use num_complex::Complex64;
use std::fmt;
use std::path::Path;

/// One single-site Pauli operator.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(PauliOp::I),
            'X' => Some(PauliOp::X),
            'Y' => Some(PauliOp::Y),
            'Z' => Some(PauliOp::Z),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            PauliOp::I => 'I',
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        }
    }
}

/// A tensor product of single-site Pauli operators, one per site.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PauliWord {
    ops: Vec<PauliOp>,
}

impl PauliWord {
    pub fn new(ops: Vec<PauliOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidArgument(
                "Pauli word must cover at least one site".into(),
            ));
        }
        Ok(Self { ops })
    }

    /// Parses a string over {I, X, Y, Z}, site 0 first.
    pub fn parse(text: &str) -> Result<Self> {
        let mut ops = Vec::with_capacity(text.len());
        for c in text.chars() {
            match PauliOp::from_char(c) {
                Some(op) => ops.push(op),
                None => {
                    return Err(Error::Parse(format!(
                        "bad Pauli letter {c:?} in word {text:?}"
                    )))
                }
            }
        }
        Self::new(ops)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            ops: vec![PauliOp::I; n],
        }
    }

    /// Identity word with `op` placed at each listed (site, op) position.
    pub fn with_ops(n: usize, placed: &[(usize, PauliOp)]) -> Result<Self> {
        let mut ops = vec![PauliOp::I; n];
        for (site, op) in placed {
            if *site >= n {
                return Err(Error::InvalidArgument(format!(
                    "site {site} out of range for n = {n}"
                )));
            }
            ops[*site] = *op;
        }
        Self::new(ops)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[PauliOp] {
        &self.ops
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|op| *op == PauliOp::I)
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.ops.iter().filter(|op| **op != PauliOp::I).count()
    }
}

impl fmt::Display for PauliWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.ops {
            write!(f, "{}", op.to_char())?;
        }
        Ok(())
    }
}

/// Action of a Pauli word on a configuration: the unique v′ and coefficient c
/// with ⟨v|P|v′⟩ = c under the bit convention −1 ↔ |0⟩.
///
/// Per site: I fixes spin and phase; X flips the spin, phase ×1; Y flips the
/// spin, phase ×(+i if vᵢ = +1 else −i) — the matrix element ⟨vᵢ|Y|vᵢ′⟩; Z
/// fixes the spin, phase ×(−1 if vᵢ = +1 else +1).
pub fn apply_word(
    word: &PauliWord,
    v: &SpinConfiguration,
) -> Result<(SpinConfiguration, Complex64)> {
    if word.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: word.len(),
            got: v.len(),
        });
    }
    let mut spins: Vec<i8> = v.spins().to_vec();
    let mut phase = Complex64::new(1.0, 0.0);
    for (i, op) in word.ops.iter().enumerate() {
        match op {
            PauliOp::I => {}
            PauliOp::X => spins[i] = -spins[i],
            PauliOp::Y => {
                phase *= Complex64::new(0.0, spins[i] as f64);
                spins[i] = -spins[i];
            }
            PauliOp::Z => {
                if spins[i] > 0 {
                    phase = -phase;
                }
            }
        }
    }
    Ok((
        SpinConfiguration::new(spins).expect("flips preserve validity"),
        phase,
    ))
}

/// A Hermitian Hamiltonian as a real-weighted sum of Pauli words.
#[derive(Clone, PartialEq, Debug)]
pub struct PauliHamiltonian {
    n: usize,
    terms: Vec<(f64, PauliWord)>,
}

impl PauliHamiltonian {
    /// Validates lengths and coefficients and merges duplicate words (first
    /// occurrence keeps its position; coefficients summed).
    pub fn new(n: usize, terms: Vec<(f64, PauliWord)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one site".into()));
        }
        let mut merged: Vec<(f64, PauliWord)> = Vec::with_capacity(terms.len());
        for (coeff, word) in terms {
            if !coeff.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite coefficient {coeff} on word {word}"
                )));
            }
            if word.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: word.len(),
                });
            }
            match merged.iter_mut().find(|(_, w)| *w == word) {
                Some((c, _)) => *c += coeff,
                None => merged.push((coeff, word)),
            }
        }
        Ok(Self { n, terms: merged })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliWord)] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Parses the Hamiltonian text format: '#' starts a comment, the first
    /// non-comment line is `n <integer>`, every further line is
    /// `<real coefficient> <word>`.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut terms: Vec<(f64, PauliWord)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Parse(format!("line {}: {msg}", lineno + 1));
            match n {
                None => {
                    let mut parts = line.split_whitespace();
                    if parts.next() != Some("n") {
                        return Err(at(format!(
                            "expected header \"n <integer>\", got {line:?}"
                        )));
                    }
                    let value = parts
                        .next()
                        .ok_or_else(|| at("missing site count after \"n\"".into()))?;
                    if parts.next().is_some() {
                        return Err(at("trailing tokens after site count".into()));
                    }
                    let parsed: usize = value
                        .parse()
                        .map_err(|e| at(format!("bad site count {value:?}: {e}")))?;
                    if parsed == 0 {
                        return Err(at("site count must be at least 1".into()));
                    }
                    n = Some(parsed);
                }
                Some(n) => {
                    let mut parts = line.split_whitespace();
                    let coeff_tok = parts.next().expect("line is non-empty");
                    let word_tok = parts
                        .next()
                        .ok_or_else(|| at(format!("missing Pauli word after {coeff_tok:?}")))?;
                    if parts.next().is_some() {
                        return Err(at("trailing tokens after Pauli word".into()));
                    }
                    let coeff: f64 = coeff_tok.parse().map_err(|e| {
                        at(format!(
                            "bad real coefficient {coeff_tok:?} (complex input is not accepted): {e}"
                        ))
                    })?;
                    if !coeff.is_finite() {
                        return Err(at(format!("non-finite coefficient {coeff_tok:?}")));
                    }
                    let word = PauliWord::parse(word_tok)
                        .map_err(|e| at(format!("bad word {word_tok:?}: {e}")))?;
                    if word.len() != n {
                        return Err(at(format!(
                            "word {word_tok:?} has length {}, expected n = {n}",
                            word.len()
                        )));
                    }
                    terms.push((coeff, word));
                }
            }
        }
        let n = n.ok_or_else(|| Error::Parse("missing \"n <integer>\" header".into()))?;
        Self::new(n, terms)
    }

    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Renders the text format; coefficients use shortest round-trip notation,
    /// so write → parse reproduces terms exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for (coeff, word) in &self.terms {
            out.push_str(&format!("{coeff} {word}\n"));
        }
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// The XXZ chain Σ_bonds J(XᵢXⱼ + YᵢYⱼ) + Δ ZᵢZⱼ over nearest neighbours,
/// open by default, optionally periodic. Zero-coefficient terms are omitted.
pub fn xxz(n: usize, j: f64, delta: f64, periodic: bool) -> PauliHamiltonian {
    assert!(n >= 2, "xxz needs at least two sites");
    let mut bonds: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    if periodic && n > 2 {
        bonds.push((n - 1, 0));
    }
    let mut terms = Vec::new();
    for (p, q) in bonds {
        for (coeff, op) in [(j, PauliOp::X), (j, PauliOp::Y), (delta, PauliOp::Z)] {
            if coeff != 0.0 {
                let word = PauliWord::with_ops(n, &[(p, op), (q, op)]).expect("sites in range");
                terms.push((coeff, word));
            }
        }
    }
    PauliHamiltonian::new(n, terms).expect("construction is well-formed")
}

/// The local energy E_loc(v) = [Hψ](v)/ψ(v) = Σ_s c_s · phase_s · ψ(v′_s)/ψ(v),
/// with ψ(v) = exp(half(v)) the row factor of ρ̃ and phase_s = ⟨v|P_s|v′_s⟩.
///
/// In density-matrix form the ratio is ρ̃(v′_s, v)/ρ̃(v, v). The direction
/// matters once a word carries an odd number of Y factors (complex matrix
/// elements): only this orientation satisfies the defining identity
/// Σ_v ρ̃(v,v) E_loc(v) / Σ_v ρ̃(v,v) = Tr(ρ̃H)/Tr(ρ̃); the transposed ratio
/// would estimate the energy of the conjugated state instead. Everything is
/// exponentiated in the log domain, one half-evaluation per term.
pub fn local_energy(
    h: &PauliHamiltonian,
    params: &RbmParams,
    v: &SpinConfiguration,
) -> Result<Complex64> {
    if h.n() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: h.n(),
        });
    }
    if v.len() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            got: v.len(),
        });
    }
    let half_v = log_half(params, v);
    if 2.0 * half_v.re < -700.0 {
        return Err(Error::Numerical(format!(
            "diagonal weight underflow at configuration {} (log rho_diag = {:.3e}); \
             the state assigns this configuration no probability",
            v.to_pm_string(),
            2.0 * half_v.re
        )));
    }
    let mut e = Complex64::new(0.0, 0.0);
    for (coeff, word) in h.terms() {
        let (v_prime, phase) = apply_word(word, v)?;
        let log_ratio = log_half(params, &v_prime) - half_v;
        e += coeff * phase * log_ratio.exp();
    }
    if !(e.re.is_finite() && e.im.is_finite()) {
        return Err(Error::Numerical(
            "local energy overflowed; RBM parameters have blown up".into(),
        ));
    }
    Ok(e)
}
