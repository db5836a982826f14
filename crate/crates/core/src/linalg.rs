//! Symmetric-matrix primitives: PSD tests, Löwner comparison, spectra,
//! simultaneous diagonalization and the max-eigenvalue gap.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense real symmetric matrix. Symmetry is enforced on construction by
/// averaging with the transpose, so `m[(i, j)] == m[(j, i)]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Eigen-decomposition with eigenvalues sorted ascending and eigenvectors in
/// the matching columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    /// Wraps a square matrix without validation. Callers guarantee
    /// squareness; symmetry is still enforced.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        SymMatrix(out)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("rows of unequal length".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        SymMatrix(DMatrix::identity(n, n) * c)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)] == 0.0))
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix(&self.0 * c)
    }

    /// `T · self · Tᵀ` for a (possibly rectangular) `T`.
    pub fn congruence(&self, t: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::symmetrized(t * &self.0 * t.transpose())
    }

    /// `D · self · D` for a diagonal `D` given by its entries.
    pub fn diag_congruence(&self, d: &[f64]) -> SymMatrix {
        let n = self.dim();
        SymMatrix(DMatrix::from_fn(n, n, |i, j| d[i] * self.0[(i, j)] * d[j]))
    }

    /// Principal submatrix on the given index set.
    pub fn select(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix(DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            self.0[(idx[i], idx[j])]
        }))
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn spectrum(&self) -> Spectrum {
        let eig = SymmetricEigen::new(self.0.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum { values, vectors }
    }

    /// Eigenvalues sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum().values.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    /// Scale-aware PSD tolerance: `1e-10 · (1 + |trace|)`.
    pub fn default_psd_tol(&self) -> f64 {
        1e-10 * (1.0 + self.trace().abs())
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn require_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -self.default_psd_tol() {
            Err(Error::NotPsd { min_eig: min })
        } else {
            Ok(())
        }
    }

    /// Projects onto the PSD cone by clipping negative eigenvalues.
    pub fn clip_psd(&self) -> SymMatrix {
        self.map_spectrum(|v| v.max(0.0))
    }

    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let s = self.spectrum();
        let d = DMatrix::from_diagonal(&s.values.map(f));
        SymMatrix::symmetrized(&s.vectors * d * s.vectors.transpose())
    }

    /// Symmetric square root of a PSD matrix (negative eigenvalues clipped).
    pub fn sqrt_psd(&self) -> SymMatrix {
        self.map_spectrum(|v| v.max(0.0).sqrt())
    }

    /// Inverse of a positive definite matrix.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        match self.0.clone().cholesky() {
            Some(ch) => Ok(SymMatrix::symmetrized(ch.inverse())),
            None => Err(Error::NotPsd {
                min_eig: self.min_eigenvalue(),
            }),
        }
    }

    /// Inverse of a nonsingular symmetric matrix via its spectrum.
    pub fn inverse(&self) -> Result<SymMatrix> {
        let s = self.spectrum();
        let scale = s.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if s.values.iter().any(|v| v.abs() <= 1e-14 * scale.max(1e-300)) {
            return Err(Error::Numerical("matrix is numerically singular".into()));
        }
        let d = DMatrix::from_diagonal(&s.values.map(|v| 1.0 / v));
        Ok(SymMatrix::symmetrized(&s.vectors * d * s.vectors.transpose()))
    }

    /// `log det` of a positive definite matrix.
    pub fn log_det_pd(&self) -> Result<f64> {
        match self.0.clone().cholesky() {
            Some(ch) => Ok(2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()),
            None => Err(Error::NotPsd {
                min_eig: self.min_eigenvalue(),
            }),
        }
    }

    /// Lower-triangular factor `L` with `L Lᵀ = self` for a PSD matrix.
    /// Singular inputs fall back to the symmetric square root.
    pub fn psd_factor(&self) -> DMatrix<f64> {
        match self.0.clone().cholesky() {
            Some(ch) => ch.l(),
            None => self.sqrt_psd().0,
        }
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `A ⪯ B` up to `tol`: true iff `λ_min(B − A) ≥ −tol`.
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(b.sub(a).min_eigenvalue() >= -tol)
}

/// Transform `S` with `S·A·Sᵀ = diag(diag_a)` and `S·B·Sᵀ = diag(diag_b)`.
#[derive(Debug, Clone)]
pub struct SimDiagResult {
    pub transform: DMatrix<f64>,
    pub diag_a: DVector<f64>,
    pub diag_b: DVector<f64>,
}

/// Simultaneously diagonalizes two PSD matrices by congruence.
///
/// The common null space `N(A) ∩ N(B) = N(A + B)` is split off with an
/// orthonormal basis; on its complement `A' + B'` is positive definite, so
/// whitening by `(A' + B')^{-1/2}` and diagonalizing the whitened `A'`
/// diagonalizes both (the whitened `B'` is `I` minus the whitened `A'`).
pub fn simultaneous_diagonalize(a: &SymMatrix, b: &SymMatrix) -> Result<SimDiagResult> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    a.require_psd()?;
    b.require_psd()?;
    let n = a.dim();
    let sum = a.add(b);
    let spec = sum.spectrum();
    let top = spec.values[n - 1].max(0.0);
    let null_tol = 1e-12 * (1.0 + top);
    let k = spec.values.iter().take_while(|&&v| v <= null_tol).count();

    let mut transform = DMatrix::zeros(n, n);
    for r in 0..k {
        transform.set_row(r, &spec.vectors.column(r).transpose());
    }
    if k < n {
        // Basis of the complement, already orthonormal.
        let u2 = spec.vectors.columns(k, n - k).into_owned();
        let a_red = SymMatrix::symmetrized(u2.transpose() * a.matrix() * &u2);
        // (A' + B') restricted is diagonal in this basis with the top eigenvalues.
        let whiten = DMatrix::from_diagonal(&spec.values.rows(k, n - k).map(|v| 1.0 / v.sqrt()));
        let a_white = a_red.congruence(&whiten);
        let inner = a_white.spectrum();
        let s_red = inner.vectors.transpose() * whiten * u2.transpose();
        for r in 0..(n - k) {
            transform.set_row(k + r, &s_red.row(r));
        }
    }
    let da = a.congruence(&transform);
    let db = b.congruence(&transform);
    Ok(SimDiagResult {
        diag_a: da.matrix().diagonal(),
        diag_b: db.matrix().diagonal(),
        transform,
    })
}

/// `λ_max(D1·A·D1 − D2·A·D2)` for PSD `A` and diagonal `D1 ⪰ D2 ⪰ 0`.
pub fn max_eig_gap(a: &SymMatrix, d1: &[f64], d2: &[f64]) -> Result<f64> {
    let n = a.dim();
    if d1.len() != n || d2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: d1.len().min(d2.len()),
        });
    }
    for i in 0..n {
        if !(d2[i] >= 0.0 && d1[i] >= d2[i]) {
            return Err(Error::Ordering(format!(
                "diagonal entry {i}: need d1 >= d2 >= 0, got d1={} d2={}",
                d1[i], d2[i]
            )));
        }
    }
    Ok(a.diag_congruence(d1).sub(&a.diag_congruence(d2)).max_eigenvalue())
}

/// Dense matrix with `d` on the diagonal.
pub fn diag_matrix(d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let g = DMatrix::from_fn(n, rank, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        SymMatrix::symmetrized(&g * g.transpose())
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0])).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 1.0);
        assert!(SymMatrix::new(DMatrix::zeros(0, 0)).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn loewner_examples() {
        let i2 = SymMatrix::identity(2);
        assert!(loewner_leq(&i2, &i2, 0.0).unwrap());
        assert!(loewner_leq(&SymMatrix::zeros(2), &i2, 0.0).unwrap());
        let a = SymMatrix::from_diagonal(&[2.0, 1.0]);
        let b = SymMatrix::from_diagonal(&[1.0, 2.0]);
        assert!(!loewner_leq(&a, &b, 0.0).unwrap());
        assert!(matches!(
            loewner_leq(&i2, &SymMatrix::identity(3), 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn simdiag_trivial_cases() {
        let r = simultaneous_diagonalize(&SymMatrix::identity(2), &SymMatrix::from_diagonal(&[1.0, 3.0]))
            .unwrap();
        let mut d: Vec<f64> = r.diag_b.iter().zip(r.diag_a.iter()).map(|(b, a)| b / a).collect();
        d.sort_by(f64::total_cmp);
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] - 3.0).abs() < 1e-12);

        let r = simultaneous_diagonalize(
            &SymMatrix::from_diagonal(&[1.0, 0.0]),
            &SymMatrix::from_diagonal(&[0.0, 1.0]),
        )
        .unwrap();
        assert!(r.transform.determinant().abs() > 0.0);
        let a = SymMatrix::from_diagonal(&[1.0, 0.0]).congruence(&r.transform);
        assert!(a.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn simdiag_rejects_non_psd() {
        let bad = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            simultaneous_diagonalize(&bad, &SymMatrix::identity(2)),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn simdiag_random_pairs_with_shared_null_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = 2 + trial % 5;
            let ra = 1 + trial % n;
            let rb = 1 + (trial / 3) % n;
            let mut a = random_psd(n, ra, &mut rng);
            let mut b = random_psd(n, rb, &mut rng);
            if trial % 4 == 0 {
                // force a common null direction along e_0
                let mut p = DMatrix::identity(n, n);
                p[(0, 0)] = 0.0;
                a = a.congruence(&p);
                b = b.congruence(&p);
            }
            let r = simultaneous_diagonalize(&a, &b).unwrap();
            let sa = a.congruence(&r.transform);
            let sb = b.congruence(&r.transform);
            let scale = 1.0 + a.frobenius() + b.frobenius();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        assert!(sa.get(i, j).abs() < 1e-10 * scale, "trial {trial}");
                        assert!(sb.get(i, j).abs() < 1e-10 * scale, "trial {trial}");
                    }
                }
            }
            assert!(r.transform.determinant().abs() > 1e-12);
            // round trip A = S^-1 diag S^-T
            let s_inv = r.transform.clone().try_inverse().unwrap();
            let rebuilt = &s_inv * DMatrix::from_diagonal(&r.diag_a) * s_inv.transpose();
            let rel = (rebuilt - a.matrix()).norm() / (1.0 + a.frobenius());
            assert!(rel < 1e-8, "trial {trial}: rel {rel}");
        }
    }

    #[test]
    fn max_eig_gap_examples() {
        let i2 = SymMatrix::identity(2);
        assert_eq!(max_eig_gap(&i2, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        let v = max_eig_gap(&i2, &[2.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        assert!(matches!(
            max_eig_gap(&i2, &[1.0, 1.0], &[2.0, 0.0]),
            Err(Error::Ordering(_))
        ));
    }

    #[test]
    fn max_eig_gap_nonnegative_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let n = 1 + (rng.random::<u32>() as usize) % 6;
            let rank = 1 + (rng.random::<u32>() as usize) % n;
            let a = random_psd(n, rank, &mut rng);
            let d2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let d1: Vec<f64> = d2.iter().map(|v| v + rng.random::<f64>()).collect();
            assert!(max_eig_gap(&a, &d1, &d2).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn inverse_and_logdet() {
        let m = SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let inv = m.inverse_pd().unwrap();
        let prod = m.matrix() * inv.matrix();
        assert!((prod - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!((m.log_det_pd().unwrap() - (1.75f64).ln()).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn psd_strategy() -> impl Strategy<Value = SymMatrix> {
            (1usize..5).prop_flat_map(|n| {
                prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
                    let g = DMatrix::from_row_slice(n, n, &v);
                    SymMatrix::symmetrized(&g * g.transpose())
                })
            })
        }

        proptest! {
            #[test]
            fn loewner_reflexive(a in psd_strategy()) {
                prop_assert!(loewner_leq(&a, &a, 1e-12).unwrap());
            }

            #[test]
            fn loewner_antisymmetric_up_to_tol(a in psd_strategy(), c in 0.0f64..1.0) {
                let b = a.add(&SymMatrix::scaled_identity(a.dim(), c));
                let both = loewner_leq(&a, &b, 1e-9).unwrap() && loewner_leq(&b, &a, 1e-9).unwrap();
                if both {
                    prop_assert!(a.max_abs_diff(&b) <= 1e-9);
                }
            }
        }
    }
}
