//! Exact diagonalization for small systems: dense Hamiltonian assembly, the
//! ground eigenpair, and reference spin-spin correlations. This is the oracle
//! the variational results are measured against.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::configspace::index_to_config;
use crate::error::{Error, Result};
use crate::hamiltonian::{apply_word, PauliHamiltonian};

/// Largest n the dense solver accepts.
pub const MAX_DENSE_SITES: usize = 12;

/// Eigenvalues within 1e−8·max(1, |E₀|) of the bottom count as ground sector.
const DEGENERACY_TOL: f64 = 1e-8;

/// The dense 2ⁿ×2ⁿ matrix of a Pauli-word Hamiltonian, assembled row by row:
/// apply_word's phase is the row-side element ⟨v|W|v′⟩, so row v gets its
/// entry at column v′ directly.
pub fn dense_hamiltonian(h: &PauliHamiltonian) -> Result<DMatrix<Complex64>> {
    let n = h.n();
    if n > MAX_DENSE_SITES {
        return Err(Error::TooLarge {
            what: "dense diagonalization",
            n,
            max: MAX_DENSE_SITES,
        });
    }
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        let v = index_to_config(r, n);
        for (coeff, word) in h.terms() {
            let (w, phase) = apply_word(word, &v)?;
            m[(r, w.index())] += phase * *coeff;
        }
    }
    Ok(m)
}

/// The ground eigenpair of a dense Hermitian eigensolve, plus the full
/// spectrum and an orthonormal basis of the (near-)degenerate ground sector.
#[derive(Clone, Debug)]
pub struct DenseSpectrum {
    n: usize,
    ground_energy: f64,
    ground_vector: DVector<Complex64>,
    eigenvalues: Vec<f64>,
    sector: Vec<DVector<Complex64>>,
}

impl DenseSpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ground_energy(&self) -> f64 {
        self.ground_energy
    }

    /// Unit-norm ground vector with the largest-magnitude amplitude made real
    /// and positive, so repeated runs agree exactly.
    pub fn ground_vector(&self) -> &DVector<Complex64> {
        &self.ground_vector
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Dimension of the ground sector.
    pub fn degeneracy(&self) -> usize {
        self.sector.len()
    }
}

/// Diagonalizes H (n ≤ 12) and packages the ground sector.
pub fn ground_state(h: &PauliHamiltonian) -> Result<DenseSpectrum> {
    let n = h.n();
    let m = dense_hamiltonian(h)?;
    let eigen = SymmetricEigen::new(m);
    let dim = eigen.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_unstable_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let e0 = eigen.eigenvalues[order[0]];
    let window = DEGENERACY_TOL * e0.abs().max(1.0);
    let sector: Vec<DVector<Complex64>> = order
        .iter()
        .take_while(|&&k| eigen.eigenvalues[k] - e0 <= window)
        .map(|&k| eigen.eigenvectors.column(k).into_owned())
        .collect();
    let mut gv = sector[0].clone();
    let lead = (0..gv.len())
        .max_by(|&a, &b| gv[a].norm_sqr().total_cmp(&gv[b].norm_sqr()))
        .expect("nonempty vector");
    let amp = gv[lead];
    if amp.norm() > 0.0 {
        let phase = amp / amp.norm();
        gv *= phase.conj();
    }
    gv /= Complex64::from(gv.norm());
    Ok(DenseSpectrum {
        n,
        ground_energy: e0,
        ground_vector: gv,
        eigenvalues: order.iter().map(|&k| eigen.eigenvalues[k]).collect(),
        sector,
    })
}

/// ⟨Z_i Z_j⟩ in the ground state.
///
/// A degenerate sector (the ferromagnetic phase) is resolved by projecting
/// onto the globally flip-symmetric combination: the top eigenvector of the
/// spin-flip operator X^⊗n restricted to the sector. Trained-state
/// correlations in that phase should be compared as magnitudes against this
/// sector envelope.
pub fn ed_correlation(spectrum: &DenseSpectrum, i: usize, j: usize) -> Result<f64> {
    let n = spectrum.n;
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "site pair ({i}, {j}) out of range for n = {n}"
        )));
    }
    if i == j {
        return Ok(1.0);
    }
    let w = if spectrum.sector.len() == 1 {
        spectrum.ground_vector.clone()
    } else {
        symmetric_sector_vector(&spectrum.sector, n)
    };
    let mut acc = 0.0;
    for (idx, amp) in w.iter().enumerate() {
        let zi = 1.0 - 2.0 * ((idx >> i) & 1) as f64;
        let zj = 1.0 - 2.0 * ((idx >> j) & 1) as f64;
        acc += amp.norm_sqr() * zi * zj;
    }
    Ok(acc)
}

/// Top eigenvector of the global spin flip restricted to the sector, mapped
/// back to the full space and normalized.
fn symmetric_sector_vector(sector: &[DVector<Complex64>], n: usize) -> DVector<Complex64> {
    let d = sector.len();
    let dim = 1usize << n;
    let mask = dim - 1;
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for idx in 0..dim {
                acc += sector[a][idx ^ mask].conj() * sector[b][idx];
            }
            m[(a, b)] = acc;
        }
    }
    let eigen = SymmetricEigen::new(m);
    let best = (0..d)
        .max_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]))
        .expect("nonempty sector");
    let coef = eigen.eigenvectors.column(best);
    let mut w = DVector::zeros(dim);
    for b in 0..d {
        w += &sector[b] * coef[b];
    }
    let norm = w.norm();
    w / Complex64::from(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{xxz, PauliWord};
    use std::f64::consts::PI;

    fn word_hamiltonian(n: usize, terms: &[(f64, &str)]) -> PauliHamiltonian {
        let list = terms
            .iter()
            .map(|(c, text)| (*c, PauliWord::parse(text).unwrap()))
            .collect();
        PauliHamiltonian::new(n, list).unwrap()
    }

    #[test]
    fn identity_word_gives_a_multiple_of_identity() {
        let h = word_hamiltonian(2, &[(2.0, "II")]);
        let m = dense_hamiltonian(&h).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r == c { 2.0 } else { 0.0 };
                assert!((m[(r, c)] - Complex64::from(expected)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn single_z_matches_its_diagonal_and_ground_state() {
        let h = word_hamiltonian(1, &[(1.0, "Z")]);
        let m = dense_hamiltonian(&h).unwrap();
        assert!((m[(0, 0)] - Complex64::from(1.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - Complex64::from(-1.0)).norm() < 1e-15);
        assert!(m[(0, 1)].norm() < 1e-15 && m[(1, 0)].norm() < 1e-15);

        let spectrum = ground_state(&h).unwrap();
        assert!((spectrum.ground_energy() + 1.0).abs() < 1e-12);
        let gv = spectrum.ground_vector();
        assert!((gv[1] - Complex64::from(1.0)).norm() < 1e-12);
        assert!(gv[0].norm() < 1e-12);
    }

    #[test]
    fn xxz_two_site_spectrum() {
        let spectrum = ground_state(&xxz(2, 1.0, 1.0, false)).unwrap();
        let expected = [-3.0, 1.0, 1.0, 1.0];
        for (ev, want) in spectrum.eigenvalues().iter().zip(expected) {
            assert!((ev - want).abs() < 1e-9, "{ev} vs {want}");
        }
        assert!((spectrum.ground_energy() + 3.0).abs() < 1e-9);
    }

    #[test]
    fn heisenberg_trimer_spectrum() {
        // Open XXX chain on three sites: a ground doublet at −4, a second
        // doublet at 0, and the fully aligned quartet at +2.
        let spectrum = ground_state(&xxz(3, 1.0, 1.0, false)).unwrap();
        let expected = [-4.0, -4.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0];
        for (ev, want) in spectrum.eigenvalues().iter().zip(expected) {
            assert!((ev - want).abs() < 1e-9, "{ev} vs {want}");
        }
        assert_eq!(spectrum.degeneracy(), 2);
    }

    #[test]
    fn dense_matrices_are_hermitian_and_eigenpairs_consistent() {
        let h = word_hamiltonian(
            3,
            &[(0.7, "XYZ"), (-0.3, "YYI"), (0.2, "ZIY"), (0.5, "XIX")],
        );
        let m = dense_hamiltonian(&h).unwrap();
        let mut dev = 0.0f64;
        for r in 0..8 {
            for c in 0..8 {
                dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
            }
        }
        assert!(dev < 1e-12, "Hermiticity deviation {dev}");

        let spectrum = ground_state(&h).unwrap();
        let residual = (&m * spectrum.ground_vector()
            - spectrum.ground_vector() * Complex64::from(spectrum.ground_energy()))
        .norm();
        assert!(residual < 1e-9, "eigen residual {residual}");
        assert!((spectrum.ground_vector().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn xy_chain_matches_free_fermions() {
        // Δ = 0 maps to free fermions with hopping 2 on an open chain; the
        // ground energy is the filled negative band −4 Σ_{k≤4} cos(kπ/9).
        let spectrum = ground_state(&xxz(8, 1.0, 0.0, false)).unwrap();
        let exact: f64 = -4.0 * (1..=4).map(|k| (k as f64 * PI / 9.0).cos()).sum::<f64>();
        assert!(
            (spectrum.ground_energy() - exact).abs() < 1e-9,
            "{} vs {exact}",
            spectrum.ground_energy()
        );
    }

    #[test]
    fn ferromagnet_has_aligned_degenerate_sector() {
        let spectrum = ground_state(&xxz(8, 1.0, -2.0, false)).unwrap();
        assert!((spectrum.ground_energy() + 14.0).abs() < 1e-9);
        assert_eq!(spectrum.degeneracy(), 2);
        for j in 0..8 {
            let corr = ed_correlation(&spectrum, 0, j).unwrap();
            assert!((corr - 1.0).abs() < 1e-9, "⟨Z₀Z_{j}⟩ = {corr}");
        }
    }

    #[test]
    fn antiferromagnet_correlations_alternate() {
        let spectrum = ground_state(&xxz(6, 1.0, 2.0, false)).unwrap();
        assert_eq!(spectrum.degeneracy(), 1);
        for j in 1..6 {
            let corr = ed_correlation(&spectrum, 0, j).unwrap();
            let expected_sign = if j % 2 == 1 { -1.0 } else { 1.0 };
            assert!(
                corr * expected_sign > 0.05,
                "⟨Z₀Z_{j}⟩ = {corr} breaks alternation"
            );
        }
    }

    #[test]
    fn ground_energy_ignores_term_order() {
        let h = xxz(4, 1.0, 0.5, true);
        let mut reversed = h.terms().to_vec();
        reversed.reverse();
        let h_rev = PauliHamiltonian::new(4, reversed).unwrap();
        let e1 = ground_state(&h).unwrap().ground_energy();
        let e2 = ground_state(&h_rev).unwrap().ground_energy();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn correlation_conventions_and_guards() {
        let spectrum = ground_state(&xxz(4, 1.0, 1.0, false)).unwrap();
        assert_eq!(ed_correlation(&spectrum, 2, 2).unwrap(), 1.0);
        assert!(ed_correlation(&spectrum, 0, 4).is_err());
        // Symmetric between the two orderings.
        let a = ed_correlation(&spectrum, 0, 3).unwrap();
        let b = ed_correlation(&spectrum, 3, 0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn oversized_systems_are_rejected() {
        let word = "I".repeat(13);
        let h = word_hamiltonian(13, &[(1.0, word.as_str())]);
        assert!(matches!(
            dense_hamiltonian(&h),
            Err(Error::TooLarge { .. })
        ));
    }
}
