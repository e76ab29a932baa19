//! The nonnegative-pair model `(L; V)` and everything that can be read off
//! it exactly: probability mass, normalization, marginal kernel, size law,
//! complements, and the round trip to and from marginal kernels.
//!
//! `p = 0` is allowed and recovers plain L-ensembles. All types are
//! immutable after construction and safe to share across threads.

use nalgebra::DMatrix;

use crate::linalg::{
    self, elementary_symmetric, orthonormal_span, projected_spectrum, saddle_point_det,
    SaddleSystem, SpectrumTruncation,
};
use crate::{Error, Result};

/// Default relative truncation threshold for projected spectra.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Default threshold below 1 at which a marginal-kernel eigenvalue is
/// classified as exactly 1 when recovering an `(L; V)` pair.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-8;

/// Slack allowed on marginal-kernel eigenvalues around `[0, 1]`.
pub const KERNEL_RANGE_SLACK: f64 = 1e-10;

/// Varying-size process or the process conditioned on `|X| = m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeMode {
    Varying,
    Fixed(usize),
}

/// A realized subset of the ground set: strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SampleSet {
    indices: Vec<usize>,
}

impl SampleSet {
    /// Wraps an already sorted, duplicate-free index list.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidSampleSet(
                "indices must be strictly increasing",
            ));
        }
        Ok(Self { indices })
    }

    /// Sorts, then rejects duplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices)
    }

    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Bit-mask encoding, bit `i` set iff item `i` is in the set.
    pub fn mask(&self) -> u64 {
        self.indices.iter().fold(0u64, |m, &i| m | (1 << i))
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        let indices = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        Self { indices }
    }

    /// The complement within a ground set of size `n`.
    pub fn complement(&self, n: usize) -> Self {
        let indices = (0..n).filter(|i| !self.contains(*i)).collect();
        Self { indices }
    }
}

/// The derived spectral data of a nonnegative pair: an orthonormal basis of
/// `span V`, the truncated eigensystem of the projected kernel, and the
/// Bernoulli selection probabilities `π_i = λ̃_i / (1 + λ̃_i)`.
#[derive(Debug, Clone)]
pub struct SpectralMixture {
    feature_basis: DMatrix<f64>,
    spectrum: SpectrumTruncation,
    bernoulli: Vec<f64>,
}

impl SpectralMixture {
    /// Orthonormal basis of the always-kept feature span (n×p).
    pub fn feature_basis(&self) -> &DMatrix<f64> {
        &self.feature_basis
    }

    pub fn spectrum(&self) -> &SpectrumTruncation {
        &self.spectrum
    }

    /// Retained eigenvalues of the projected kernel, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values()
    }

    /// Selection probabilities, one per retained eigenvalue.
    pub fn bernoulli(&self) -> &[f64] {
        &self.bernoulli
    }

    pub fn feature_rank(&self) -> usize {
        self.feature_basis.ncols()
    }

    /// Retained rank `q` of the projected kernel.
    pub fn rank(&self) -> usize {
        self.spectrum.rank()
    }

    /// The orthonormal basis `[Q, Ũ_{:,selected}]` used by projection
    /// sampling once the optional eigenvectors have been chosen.
    pub fn projection_basis(&self, selected: &[usize]) -> DMatrix<f64> {
        let n = self.feature_basis.nrows();
        let p = self.feature_rank();
        let mut basis = DMatrix::zeros(n, p + selected.len());
        basis
            .view_mut((0, 0), (n, p))
            .copy_from(&self.feature_basis);
        for (col, &i) in selected.iter().enumerate() {
            basis.set_column(p + col, &self.spectrum.vectors().column(i));
        }
        basis
    }

    pub(crate) fn from_parts(
        feature_basis: DMatrix<f64>,
        spectrum: SpectrumTruncation,
    ) -> Self {
        let bernoulli = spectrum
            .values()
            .iter()
            .map(|&lambda| lambda / (1.0 + lambda))
            .collect();
        Self {
            feature_basis,
            spectrum,
            bernoulli,
        }
    }
}

/// A validated nonnegative pair `(L; V)` with its cached spectral mixture.
#[derive(Debug, Clone)]
pub struct Nnp {
    kernel: DMatrix<f64>,
    features: DMatrix<f64>,
    mixture: SpectralMixture,
}

impl Nnp {
    /// Validates and builds the model.
    ///
    /// `tol` is the relative truncation threshold for the projected
    /// spectrum ([`DEFAULT_TOL`] is a good default). Fails if `L` is not
    /// symmetric, `V` is rank deficient, or `L` is not conditionally
    /// positive semi-definite with respect to `V`.
    pub fn build(kernel: DMatrix<f64>, features: DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = kernel.nrows();
        if kernel.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "kernel matrix (must be square)",
                expected: n,
                found: kernel.ncols(),
            });
        }
        if features.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature matrix rows",
                expected: n,
                found: features.nrows(),
            });
        }
        let p = features.ncols();
        if p > n {
            return Err(Error::DimensionMismatch {
                context: "feature matrix columns (p must be at most n)",
                expected: n,
                found: p,
            });
        }
        let dev = linalg::symmetry_deviation(&kernel);
        if dev > linalg::SYMMETRY_TOL {
            return Err(Error::AsymmetricKernel { deviation: dev });
        }
        let (feature_basis, rank) = orthonormal_span(&features, linalg::RANK_TOL);
        if rank < p {
            return Err(Error::RankDeficientFeatures { rank, columns: p });
        }
        let spectrum = projected_spectrum(&kernel, &feature_basis, tol)?;
        Ok(Self {
            kernel,
            features,
            mixture: SpectralMixture::from_parts(feature_basis, spectrum),
        })
    }

    /// Ground-set size.
    pub fn n(&self) -> usize {
        self.kernel.nrows()
    }

    /// Number of obligatory feature columns.
    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    /// Retained rank of the projected kernel.
    pub fn q(&self) -> usize {
        self.mixture.rank()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn mixture(&self) -> &SpectralMixture {
        &self.mixture
    }

    fn check_indices(&self, x: &SampleSet) -> Result<()> {
        match x.indices().last() {
            Some(&i) if i >= self.n() => Err(Error::IndexOutOfRange {
                index: i,
                n: self.n(),
            }),
            _ => Ok(()),
        }
    }

    /// The restriction `(L_X, V_{X,:})` as a saddle system.
    pub fn restriction(&self, x: &SampleSet) -> Result<SaddleSystem> {
        self.check_indices(x)?;
        let idx = x.indices();
        let m = idx.len();
        let kernel_block = DMatrix::from_fn(m, m, |a, b| self.kernel[(idx[a], idx[b])]);
        let feature_block = DMatrix::from_fn(m, self.p(), |a, b| self.features[(idx[a], b)]);
        SaddleSystem::new(kernel_block, feature_block)
    }

    /// Unnormalized probability mass `(-1)^p det [[L_X, V_X], [V_Xᵀ, 0]]`.
    ///
    /// Exactly zero when `|X| < p`, when `|X| > p + q` (the bordered
    /// determinant vanishes by rank), or when `V_{X,:}` is rank deficient.
    pub fn unnormalized_pmf(&self, x: &SampleSet) -> Result<f64> {
        self.check_indices(x)?;
        if x.len() < self.p() || x.len() > self.p() + self.q() {
            return Ok(0.0);
        }
        Ok(saddle_point_det(&self.restriction(x)?))
    }

    /// `det(VᵀV)`, the Gram determinant of the feature columns (1 if p = 0).
    fn feature_gram_det(&self) -> f64 {
        if self.p() == 0 {
            1.0
        } else {
            (self.features.transpose() * &self.features).determinant()
        }
    }

    /// Normalization constant of the unnormalized mass.
    ///
    /// Varying size: `det(I + L̃) · det(VᵀV)`. Fixed size `m`:
    /// `e_{m-p}(L̃) · det(VᵀV)`, which is zero for `m > p + q`.
    pub fn normalization(&self, mode: SizeMode) -> Result<f64> {
        let gram = self.feature_gram_det();
        match mode {
            SizeMode::Varying => {
                let det_i_plus = self
                    .mixture
                    .eigenvalues()
                    .iter()
                    .fold(1.0, |acc, &l| acc * (1.0 + l));
                Ok(det_i_plus * gram)
            }
            SizeMode::Fixed(m) => {
                if m < self.p() || m > self.n() {
                    return Err(Error::InvalidSize {
                        requested: m,
                        lo: self.p(),
                        hi: self.n(),
                    });
                }
                let k = m - self.p();
                if k > self.q() {
                    return Ok(0.0);
                }
                let esp = elementary_symmetric(self.mixture.eigenvalues());
                Ok(esp[k] * gram)
            }
        }
    }

    /// Normalized probability of observing exactly `x`.
    ///
    /// Conditioning on a size beyond `p + q` is rejected: that event has
    /// zero total mass, so the conditional distribution does not exist.
    pub fn pmf(&self, x: &SampleSet, mode: SizeMode) -> Result<f64> {
        let z = self.normalization(mode)?;
        if z <= 0.0 {
            return Err(match mode {
                SizeMode::Fixed(m) => Error::InvalidSize {
                    requested: m,
                    lo: self.p(),
                    hi: self.p() + self.q(),
                },
                SizeMode::Varying => Error::NumericalBreakdown {
                    context: "normalization constant is not positive",
                },
            });
        }
        if let SizeMode::Fixed(m) = mode {
            if x.len() != m {
                return Ok(0.0);
            }
        }
        Ok(self.unnormalized_pmf(x)? / z)
    }

    /// Marginal kernel `K = QQᵀ + Σ π_i ũ_i ũ_iᵀ`.
    ///
    /// ```
    /// use elens::ensemble::Nnp;
    /// use elens::nalgebra::{dmatrix, DMatrix};
    ///
    /// // Diagonal L-ensemble: K_ii = λ_i / (1 + λ_i).
    /// let nnp = Nnp::build(dmatrix![1.0, 0.0; 0.0, 3.0], DMatrix::zeros(2, 0), 1e-10)?;
    /// let k = nnp.marginal_kernel();
    /// assert!((k.matrix()[(0, 0)] - 0.5).abs() < 1e-12);
    /// assert!((k.matrix()[(1, 1)] - 0.75).abs() < 1e-12);
    /// # Ok::<(), elens::Error>(())
    /// ```
    pub fn marginal_kernel(&self) -> MarginalKernel {
        let q_basis = self.mixture.feature_basis();
        let mut k = q_basis * q_basis.transpose();
        let vectors = self.mixture.spectrum().vectors();
        for (i, &pi) in self.mixture.bernoulli().iter().enumerate() {
            let u = vectors.column(i);
            k += (u * u.transpose()) * pi;
        }
        let k = (&k + k.transpose()) * 0.5;
        MarginalKernel { matrix: k }
    }

    /// Distribution of `|X|`: zero below `p`, then `e_{m-p}(λ̃)/det(I+L̃)`.
    pub fn size_distribution(&self) -> Vec<f64> {
        let esp = elementary_symmetric(self.mixture.eigenvalues());
        let det_i_plus: f64 = self
            .mixture
            .eigenvalues()
            .iter()
            .fold(1.0, |acc, &l| acc * (1.0 + l));
        (0..=self.n())
            .map(|m| {
                if m < self.p() || m > self.p() + self.q() {
                    0.0
                } else {
                    esp[m - self.p()] / det_i_plus
                }
            })
            .collect()
    }

    /// `E|X| = p + Σ π_i`, the trace of the marginal kernel.
    pub fn expected_size(&self) -> f64 {
        self.p() as f64 + self.mixture.bernoulli().iter().sum::<f64>()
    }

    /// The model of the complement process `X^c`, obtained through the
    /// marginal kernel `I - K`: Bernoulli probabilities flip to `1 - π_i`
    /// and the always-kept and never-kept subspaces swap roles.
    pub fn complement(&self) -> Result<Nnp> {
        let k = self.marginal_kernel();
        let n = self.n();
        let complement_kernel = DMatrix::identity(n, n) - k.matrix();
        kernel_to_nnp(
            &MarginalKernel::new(complement_kernel)?,
            UNIT_EIGENVALUE_TOL,
        )
    }

    /// `P(A ⊆ X) = det K_A`.
    pub fn inclusion_probability(&self, a: &SampleSet) -> Result<f64> {
        self.check_indices(a)?;
        Ok(self.marginal_kernel().minor(a))
    }
}

/// A marginal kernel: symmetric with eigenvalues in `[0, 1]` (up to slack).
#[derive(Debug, Clone)]
pub struct MarginalKernel {
    matrix: DMatrix<f64>,
}

impl MarginalKernel {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "marginal kernel (must be square)",
                expected: n,
                found: matrix.ncols(),
            });
        }
        let dev = linalg::symmetry_deviation(&matrix);
        if dev > linalg::SYMMETRY_TOL {
            return Err(Error::AsymmetricKernel { deviation: dev });
        }
        let eig = matrix.clone().symmetric_eigen();
        for &mu in eig.eigenvalues.iter() {
            if !(-KERNEL_RANGE_SLACK..=1.0 + KERNEL_RANGE_SLACK).contains(&mu) {
                return Err(Error::KernelOutOfRange { eigenvalue: mu });
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Principal minor `det K_A` (1 for the empty set).
    pub fn minor(&self, a: &SampleSet) -> f64 {
        let idx = a.indices();
        if idx.is_empty() {
            return 1.0;
        }
        let m = idx.len();
        let sub = DMatrix::from_fn(m, m, |r, c| self.matrix[(idx[r], idx[c])]);
        sub.lu().determinant()
    }

    /// Pair repulsion index `ρ(i, j) = K_ij² / (K_ii K_jj)`: 1 when the
    /// pair can never co-occur, 0 when inclusions are independent.
    pub fn repulsion_index(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        for &idx in [i, j].iter() {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
        }
        let kii = self.matrix[(i, i)];
        let kjj = self.matrix[(j, j)];
        if kii.abs() < 1e-14 {
            return Err(Error::DegenerateMarginal { index: i });
        }
        if kjj.abs() < 1e-14 {
            return Err(Error::DegenerateMarginal { index: j });
        }
        let kij = self.matrix[(i, j)];
        Ok(kij * kij / (kii * kjj))
    }
}

/// Recovers an `(L; V)` pair from a marginal kernel.
///
/// Eigenvectors with eigenvalue within `unit_tol` of 1 become the feature
/// columns `V`; the remaining positive eigenvalues `μ` become projected
/// eigenvalues `λ̃ = μ/(1-μ)`, assembling `L = K(I-K)†` spectrally.
/// `marginal_kernel ∘ kernel_to_nnp` is the identity on kernels up to
/// truncation noise.
pub fn kernel_to_nnp(kernel: &MarginalKernel, unit_tol: f64) -> Result<Nnp> {
    let n = kernel.n();
    let eig = kernel.matrix().clone().symmetric_eigen();
    let mut features = Vec::new();
    let mut l = DMatrix::zeros(n, n);
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(i);
        if mu >= 1.0 - unit_tol {
            features.push(u.into_owned());
        } else if mu > 1e-14 {
            let lambda = mu / (1.0 - mu);
            l += (u * u.transpose()) * lambda;
        }
        // Eigenvalues at zero (or within slack below it) contribute nothing.
    }
    let p = features.len();
    let mut v = DMatrix::zeros(n, p);
    for (col, u) in features.iter().enumerate() {
        v.set_column(col, u);
    }
    let l = (&l + l.transpose()) * 0.5;
    Nnp::build(l, v, DEFAULT_TOL)
}

/// The two reparameterizations that leave the process invariant:
/// `V → V R` for invertible `R`, and `L → L + V Xᵀ + Y Vᵀ`.
///
/// Returns both transformed models so tests can compare probability tables.
/// The kernel shift must keep `L` symmetric (e.g. `X = Y`), otherwise the
/// shifted model fails validation.
pub fn shift_invariance_witness(
    nnp: &Nnp,
    r: &DMatrix<f64>,
    xmat: &DMatrix<f64>,
    ymat: &DMatrix<f64>,
) -> Result<(Nnp, Nnp)> {
    let p = nnp.p();
    if r.nrows() != p || r.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "feature transform (must be p×p)",
            expected: p,
            found: r.nrows().max(r.ncols()),
        });
    }
    let transformed_features =
        Nnp::build(nnp.kernel().clone(), nnp.features() * r, DEFAULT_TOL)?;
    let shifted =
        nnp.kernel() + nnp.features() * xmat.transpose() + ymat * nnp.features().transpose();
    let shifted_kernel = Nnp::build(shifted, nnp.features().clone(), DEFAULT_TOL)?;
    Ok((transformed_features, shifted_kernel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, DVector};

    fn set(indices: &[usize]) -> SampleSet {
        SampleSet::new(indices.to_vec()).unwrap()
    }

    #[test]
    fn sample_set_invariants() {
        assert!(SampleSet::new(vec![0, 2, 5]).is_ok());
        assert!(SampleSet::new(vec![2, 0]).is_err());
        assert!(SampleSet::new(vec![1, 1]).is_err());
        assert!(SampleSet::from_unsorted(vec![5, 0, 2]).is_ok());
        let s = set(&[1, 3]);
        assert_eq!(s.mask(), 0b1010);
        assert_eq!(SampleSet::from_mask(0b1010, 4), s);
        assert_eq!(s.complement(4), set(&[0, 2]));
    }

    #[test]
    fn build_identity_lensemble() {
        let nnp =
            Nnp::build(DMatrix::identity(3, 3), DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        assert_eq!(nnp.q(), 3);
        for &pi in nnp.mixture().bernoulli() {
            assert_relative_eq!(pi, 0.5);
        }
    }

    #[test]
    fn build_accepts_negated_distance_with_ones() {
        let pts = [0.0f64, 1.0, 3.0];
        let l = DMatrix::from_fn(3, 3, |i, j| -(pts[i] - pts[j]).abs());
        let v = DMatrix::from_element(3, 1, 1.0);
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        assert_eq!(nnp.p(), 1);
        assert!(nnp.q() >= 1);
    }

    #[test]
    fn build_rejects_indefinite_without_features() {
        let l = dmatrix![-1.0, 0.0; 0.0, 1.0];
        let err = Nnp::build(l, DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::NotConditionallyPsd { .. }));
    }

    #[test]
    fn build_rejects_rank_deficient_features() {
        let l = DMatrix::identity(3, 3);
        let v = dmatrix![1.0, 2.0; 1.0, 2.0; 1.0, 2.0];
        assert!(matches!(
            Nnp::build(l, v, DEFAULT_TOL),
            Err(Error::RankDeficientFeatures { .. })
        ));
    }

    #[test]
    fn unnormalized_pmf_matches_plain_minor_for_p0() {
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let nnp = Nnp::build(l.clone(), DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        assert_relative_eq!(nnp.unnormalized_pmf(&set(&[0])).unwrap(), 2.0);
        assert_relative_eq!(nnp.unnormalized_pmf(&set(&[0, 1])).unwrap(), 5.0);
        assert_relative_eq!(nnp.unnormalized_pmf(&SampleSet::empty()).unwrap(), 1.0);
    }

    #[test]
    fn unnormalized_pmf_small_sets_are_zero() {
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let v = dmatrix![1.0; 1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        assert_eq!(nnp.unnormalized_pmf(&SampleSet::empty()).unwrap(), 0.0);
        assert_relative_eq!(
            nnp.unnormalized_pmf(&set(&[0, 1])).unwrap(),
            3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn pmf_rejects_out_of_range_index() {
        let nnp =
            Nnp::build(DMatrix::identity(2, 2), DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        assert!(matches!(
            nnp.unnormalized_pmf(&set(&[5])),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn normalization_varying_p0_is_det_i_plus_l() {
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let nnp = Nnp::build(l.clone(), DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        let expected = (DMatrix::identity(2, 2) + &l).determinant();
        assert_relative_eq!(
            nnp.normalization(SizeMode::Varying).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn normalization_with_ones_feature() {
        // V = ones(2), single projected eigenvalue λ: constant is 2(1+λ).
        let l = dmatrix![1.0, -1.0; -1.0, 1.0];
        let v = DMatrix::from_element(2, 1, 1.0);
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        assert_eq!(nnp.q(), 1);
        let lambda = nnp.mixture().eigenvalues()[0];
        assert_relative_eq!(
            nnp.normalization(SizeMode::Varying).unwrap(),
            2.0 * (1.0 + lambda),
            max_relative = 1e-12
        );
        // Brute-force subset sum agrees.
        let mut total = 0.0;
        for mask in 0..4u64 {
            total += nnp
                .unnormalized_pmf(&SampleSet::from_mask(mask, 2))
                .unwrap();
        }
        assert_relative_eq!(
            total,
            nnp.normalization(SizeMode::Varying).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn normalization_fixed_at_p_is_gram_det() {
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let v = dmatrix![1.0; 2.0];
        let nnp = Nnp::build(l, v.clone(), DEFAULT_TOL).unwrap();
        let gram = (v.transpose() * &v).determinant();
        assert_relative_eq!(
            nnp.normalization(SizeMode::Fixed(1)).unwrap(),
            gram,
            max_relative = 1e-12
        );
        assert!(matches!(
            nnp.normalization(SizeMode::Fixed(0)),
            Err(Error::InvalidSize { .. })
        ));
    }

    #[test]
    fn pmf_diag_one() {
        let nnp = Nnp::build(dmatrix![1.0], DMatrix::zeros(1, 0), DEFAULT_TOL).unwrap();
        assert_relative_eq!(
            nnp.pmf(&SampleSet::empty(), SizeMode::Varying).unwrap(),
            0.5
        );
        assert_relative_eq!(nnp.pmf(&set(&[0]), SizeMode::Varying).unwrap(), 0.5);
    }

    #[test]
    fn pmf_fixed_mode_wrong_size_is_zero() {
        let nnp =
            Nnp::build(DMatrix::identity(3, 3), DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        assert_eq!(nnp.pmf(&set(&[0]), SizeMode::Fixed(2)).unwrap(), 0.0);
        assert!(nnp.pmf(&set(&[0, 2]), SizeMode::Fixed(2)).unwrap() > 0.0);
    }

    #[test]
    fn marginal_kernel_diagonal_case() {
        let l = dmatrix![1.0, 0.0; 0.0, 3.0];
        let nnp = Nnp::build(l, DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        let k = nnp.marginal_kernel();
        assert_relative_eq!(k.matrix()[(0, 0)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(k.matrix()[(1, 1)], 0.75, max_relative = 1e-12);
        assert!(k.matrix()[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn marginal_kernel_full_feature_rank_is_identity() {
        let l = dmatrix![1.0, 0.5; 0.5, 2.0];
        let v = DMatrix::identity(2, 2);
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let k = nnp.marginal_kernel();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(k.matrix()[(i, j)], expected, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn kernel_to_nnp_half_identity() {
        let k = MarginalKernel::new(DMatrix::identity(3, 3) * 0.5).unwrap();
        let nnp = kernel_to_nnp(&k, UNIT_EIGENVALUE_TOL).unwrap();
        assert_eq!(nnp.p(), 0);
        for i in 0..3 {
            assert_relative_eq!(nnp.kernel()[(i, i)], 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn kernel_to_nnp_projection() {
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let k = MarginalKernel::new(&u * u.transpose()).unwrap();
        let nnp = kernel_to_nnp(&k, UNIT_EIGENVALUE_TOL).unwrap();
        assert_eq!(nnp.p(), 1);
        assert_eq!(nnp.q(), 0);
    }

    #[test]
    fn kernel_roundtrip_with_unit_eigenvalue() {
        // Rotation-built kernel with eigenvalues {1, 0.4, 0.1}.
        let basis = dmatrix![1.0, 1.0, 0.0; 1.0, -1.0, 1.0; 0.0, 1.0, 2.0];
        let (q, _) = orthonormal_span(&basis, linalg::RANK_TOL);
        let mus = [1.0, 0.4, 0.1];
        let mut k = DMatrix::zeros(3, 3);
        for (i, &mu) in mus.iter().enumerate() {
            let u = q.column(i);
            k += (u * u.transpose()) * mu;
        }
        let k = MarginalKernel::new((&k + k.transpose()) * 0.5).unwrap();
        let nnp = kernel_to_nnp(&k, UNIT_EIGENVALUE_TOL).unwrap();
        assert_eq!(nnp.p(), 1);
        let back = nnp.marginal_kernel();
        let err = (back.matrix() - k.matrix())
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(err < 1e-8, "roundtrip error {err}");
    }

    #[test]
    fn kernel_out_of_range_rejected() {
        assert!(matches!(
            MarginalKernel::new(DMatrix::identity(2, 2) * 1.5),
            Err(Error::KernelOutOfRange { .. })
        ));
    }

    #[test]
    fn size_distribution_examples() {
        // p = 1, single λ̃ = 1: sizes 1 and 2 each have probability 1/2.
        let l = dmatrix![0.5, -0.5; -0.5, 0.5];
        let v = DMatrix::from_element(2, 1, 1.0);
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        assert_relative_eq!(nnp.mixture().eigenvalues()[0], 1.0, max_relative = 1e-12);
        let dist = nnp.size_distribution();
        assert_relative_eq!(dist[0], 0.0);
        assert_relative_eq!(dist[1], 0.5, max_relative = 1e-12);
        assert_relative_eq!(dist[2], 0.5, max_relative = 1e-12);

        let nnp =
            Nnp::build(DMatrix::identity(2, 2), DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        let dist = nnp.size_distribution();
        assert_relative_eq!(dist[0], 0.25, max_relative = 1e-12);
        assert_relative_eq!(dist[1], 0.5, max_relative = 1e-12);
        assert_relative_eq!(dist[2], 0.25, max_relative = 1e-12);
        assert_relative_eq!(dist.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn size_distribution_matches_bernoulli_convolution_of_kernel() {
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let v = dmatrix![1.0; 1.0; 1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let k = nnp.marginal_kernel();
        let eig = k.matrix().clone().symmetric_eigen();
        let mut conv = vec![1.0f64];
        for &mu in eig.eigenvalues.iter() {
            let mu = mu.clamp(0.0, 1.0);
            let mut next = vec![0.0; conv.len() + 1];
            for (s, &w) in conv.iter().enumerate() {
                next[s] += w * (1.0 - mu);
                next[s + 1] += w * mu;
            }
            conv = next;
        }
        let dist = nnp.size_distribution();
        for (m, &prob) in dist.iter().enumerate() {
            assert_relative_eq!(prob, conv[m], epsilon = 1e-10);
        }
    }

    #[test]
    fn expected_size_examples() {
        let l = dmatrix![1.0, 0.0; 0.0, 3.0];
        let nnp = Nnp::build(l, DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        assert_relative_eq!(nnp.expected_size(), 1.25, max_relative = 1e-12);

        // Projection model of rank 2 on 3 points.
        let v = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        let nnp = Nnp::build(DMatrix::zeros(3, 3), v, DEFAULT_TOL).unwrap();
        assert_relative_eq!(nnp.expected_size(), 2.0);

        // Mean of the size distribution agrees.
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let nnp = Nnp::build(l, DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        let mean: f64 = nnp
            .size_distribution()
            .iter()
            .enumerate()
            .map(|(m, &p)| m as f64 * p)
            .sum();
        assert_relative_eq!(nnp.expected_size(), mean, epsilon = 1e-10);
    }

    #[test]
    fn complement_of_projection_swaps_subspaces() {
        let v = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        let nnp = Nnp::build(DMatrix::zeros(3, 3), v, DEFAULT_TOL).unwrap();
        let comp = nnp.complement().unwrap();
        assert_eq!(comp.p(), 1);
        assert_eq!(comp.q(), 0);
        let k = nnp.marginal_kernel();
        let kc = comp.marginal_kernel();
        let sum = k.matrix() + kc.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(sum[(i, j)], expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn complement_of_empty_process_keeps_everything() {
        let nnp =
            Nnp::build(DMatrix::zeros(3, 3), DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        let comp = nnp.complement().unwrap();
        assert_eq!(comp.p(), 3);
        assert_relative_eq!(comp.expected_size(), 3.0);
    }

    #[test]
    fn complement_of_full_rank_lensemble_is_inverse_ensemble() {
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let nnp = Nnp::build(l.clone(), DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        let comp = nnp.complement().unwrap();
        let inv = l.try_inverse().unwrap();
        let inv = (&inv + inv.transpose()) * 0.5;
        let via_inverse = Nnp::build(inv, DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        let err = (comp.marginal_kernel().matrix() - via_inverse.marginal_kernel().matrix())
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(err < 1e-9, "complement kernel deviates by {err}");
    }

    #[test]
    fn complement_is_an_involution() {
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let v = dmatrix![1.0; 1.0; 1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let back = nnp.complement().unwrap().complement().unwrap();
        let err = (back.marginal_kernel().matrix() - nnp.marginal_kernel().matrix())
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(err < 1e-8, "double complement deviates by {err}");
    }

    #[test]
    fn inclusion_probability_basics() {
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let nnp = Nnp::build(l, DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        assert_relative_eq!(
            nnp.inclusion_probability(&SampleSet::empty()).unwrap(),
            1.0
        );
        let k = nnp.marginal_kernel();
        assert_relative_eq!(
            nnp.inclusion_probability(&set(&[1])).unwrap(),
            k.matrix()[(1, 1)],
            max_relative = 1e-12
        );
    }

    #[test]
    fn repulsion_index_cases() {
        let k = MarginalKernel::new(dmatrix![0.5, 0.0; 0.0, 0.25]).unwrap();
        assert_relative_eq!(k.repulsion_index(0, 0).unwrap(), 1.0);
        assert_relative_eq!(k.repulsion_index(0, 1).unwrap(), 0.0);

        let k = MarginalKernel::new(dmatrix![0.5, 0.5; 0.5, 0.5]).unwrap();
        assert_relative_eq!(k.repulsion_index(0, 1).unwrap(), 1.0);

        let k = MarginalKernel::new(dmatrix![0.5, 0.0; 0.0, 0.0]).unwrap();
        assert!(matches!(
            k.repulsion_index(0, 1),
            Err(Error::DegenerateMarginal { index: 1 })
        ));
    }

    #[test]
    fn invariance_witness_identity_transform() {
        let l = dmatrix![2.0, 1.0; 1.0, 3.0];
        let v = dmatrix![1.0; 1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let (a, b) = shift_invariance_witness(
            &nnp,
            &DMatrix::identity(1, 1),
            &DMatrix::zeros(2, 1),
            &DMatrix::zeros(2, 1),
        )
        .unwrap();
        for mask in 0..4u64 {
            let x = SampleSet::from_mask(mask, 2);
            let base = nnp.pmf(&x, SizeMode::Varying).unwrap();
            assert_relative_eq!(a.pmf(&x, SizeMode::Varying).unwrap(), base, epsilon = 1e-12);
            assert_relative_eq!(b.pmf(&x, SizeMode::Varying).unwrap(), base, epsilon = 1e-12);
        }
    }

    #[test]
    fn invariance_witness_scaling_and_shift() {
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let v = dmatrix![1.0; 2.0; -1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let w = dmatrix![0.3; -0.7; 0.2];
        let (scaled, shifted) = shift_invariance_witness(&nnp, &dmatrix![2.0], &w, &w).unwrap();
        for mask in 0..8u64 {
            let x = SampleSet::from_mask(mask, 3);
            let base = nnp.pmf(&x, SizeMode::Varying).unwrap();
            assert_relative_eq!(
                scaled.pmf(&x, SizeMode::Varying).unwrap(),
                base,
                epsilon = 1e-9
            );
            assert_relative_eq!(
                shifted.pmf(&x, SizeMode::Varying).unwrap(),
                base,
                epsilon = 1e-9
            );
        }
    }
}
