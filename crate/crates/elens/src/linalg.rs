//! Dense linear-algebra primitives the rest of the crate is built on:
//! signed saddle-point determinants, elementary symmetric polynomials,
//! rank-revealing orthonormalization, and the truncated spectrum of a
//! projected kernel.
//!
//! Everything here is a pure function of its inputs; the types are immutable
//! once constructed.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Relative threshold for numerical column rank: `64 ε · max column norm`.
pub const RANK_TOL: f64 = 64.0 * f64::EPSILON;

/// Relative symmetry tolerance for kernel blocks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Max deviation of `M` from `Mᵀ` relative to the largest entry.
pub(crate) fn symmetry_deviation(m: &DMatrix<f64>) -> f64 {
    let scale = m.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let mut dev = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    dev / scale
}

/// The restriction of a nonnegative pair to a subset: the kernel block
/// `L_X` (m×m) together with the feature block `V_{X,:}` (m×p).
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    kernel_block: DMatrix<f64>,
    feature_block: DMatrix<f64>,
}

impl SaddleSystem {
    pub fn new(kernel_block: DMatrix<f64>, feature_block: DMatrix<f64>) -> Result<Self> {
        if kernel_block.nrows() != kernel_block.ncols() {
            return Err(Error::DimensionMismatch {
                context: "saddle system kernel block (must be square)",
                expected: kernel_block.nrows(),
                found: kernel_block.ncols(),
            });
        }
        if feature_block.nrows() != kernel_block.nrows() {
            return Err(Error::DimensionMismatch {
                context: "saddle system feature block rows",
                expected: kernel_block.nrows(),
                found: feature_block.nrows(),
            });
        }
        let dev = symmetry_deviation(&kernel_block);
        if dev > SYMMETRY_TOL {
            return Err(Error::AsymmetricKernel { deviation: dev });
        }
        Ok(Self {
            kernel_block,
            feature_block,
        })
    }

    /// Number of ground-set items in the restriction.
    pub fn size(&self) -> usize {
        self.kernel_block.nrows()
    }

    /// Number of feature columns `p`.
    pub fn feature_count(&self) -> usize {
        self.feature_block.ncols()
    }

    pub fn kernel_block(&self) -> &DMatrix<f64> {
        &self.kernel_block
    }

    pub fn feature_block(&self) -> &DMatrix<f64> {
        &self.feature_block
    }

    /// The (m+p)×(m+p) bordered matrix `[[L_X, V_X], [V_Xᵀ, 0]]`.
    pub fn bordered(&self) -> DMatrix<f64> {
        let m = self.size();
        let p = self.feature_count();
        let mut a = DMatrix::zeros(m + p, m + p);
        a.view_mut((0, 0), (m, m)).copy_from(&self.kernel_block);
        a.view_mut((0, m), (m, p)).copy_from(&self.feature_block);
        a.view_mut((m, 0), (p, m))
            .copy_from(&self.feature_block.transpose());
        a
    }
}

/// Signed saddle-point determinant `(-1)^p det [[L_X, V_X], [V_Xᵀ, 0]]`.
///
/// Returns exactly 0 when the feature block is rank deficient (the bordered
/// determinant vanishes there, and computing it through LU would only
/// produce noise around zero). For `p = 0` this is `det L_X`, with the empty
/// determinant equal to 1.
pub fn saddle_point_det(sys: &SaddleSystem) -> f64 {
    let m = sys.size();
    let p = sys.feature_count();
    if p > 0 {
        let (_, rank) = orthonormal_span(sys.feature_block(), RANK_TOL);
        if rank < p {
            return 0.0;
        }
    }
    if m + p == 0 {
        return 1.0;
    }
    let det = sys.bordered().lu().determinant();
    if p.is_multiple_of(2) {
        det
    } else {
        -det
    }
}

/// Elementary symmetric polynomials `(e_0, …, e_n)` of the given values,
/// by the stable one-value-at-a-time recurrence `e_k += λ e_{k-1}`.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (i, &lambda) in values.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += lambda * e[k - 1];
        }
    }
    e
}

/// Orthonormal basis of the column space of `V`, with rank detection.
///
/// Columns of `Q` span the column space; `r` is the numerical rank at
/// threshold `tol · max column norm`. A deficient rank is reported, not an
/// error: callers decide what full rank means for them.
pub fn orthonormal_span(v: &DMatrix<f64>, tol: f64) -> (DMatrix<f64>, usize) {
    let n = v.nrows();
    let p = v.ncols();
    if p == 0 {
        return (DMatrix::zeros(n, 0), 0);
    }
    let max_col_norm = (0..p).map(|j| v.column(j).norm()).fold(0.0f64, f64::max);
    if max_col_norm == 0.0 {
        return (DMatrix::zeros(n, 0), 0);
    }
    let qr = v.clone().col_piv_qr();
    let r_mat = qr.r();
    let threshold = tol * max_col_norm;
    let diag_len = r_mat.nrows().min(r_mat.ncols());
    let rank = (0..diag_len)
        .take_while(|&i| r_mat[(i, i)].abs() > threshold)
        .count();
    let q = qr.q();
    (q.columns(0, rank).into_owned(), rank)
}

/// Truncated eigensystem of a projected kernel: orthonormal `vectors`
/// (n×q), positive `values` in descending order, and the absolute cutoff
/// that was applied.
#[derive(Debug, Clone)]
pub struct SpectrumTruncation {
    vectors: DMatrix<f64>,
    values: Vec<f64>,
    cutoff: f64,
}

impl SpectrumTruncation {
    pub(crate) fn from_parts(vectors: DMatrix<f64>, values: Vec<f64>, cutoff: f64) -> Self {
        Self {
            vectors,
            values,
            cutoff,
        }
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Retained rank `q`.
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

/// Eigendecomposition of `L̃ = (I - QQᵀ) L (I - QQᵀ)`, truncated to the
/// eigenvalues above `tol · ‖L̃‖₂`.
///
/// Eigenvalues in `[-tol·‖L̃‖, tol·‖L̃‖]` are treated as zero and dropped;
/// anything below the negative end is a conditional-positive-semi-definiteness
/// violation and fails. Retained eigenvectors are re-orthogonalized against
/// `Q` so the combined basis `[Q, Ũ]` is orthonormal to machine precision.
pub fn projected_spectrum(
    l: &DMatrix<f64>,
    q_basis: &DMatrix<f64>,
    tol: f64,
) -> Result<SpectrumTruncation> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "projected spectrum kernel (must be square)",
            expected: n,
            found: l.ncols(),
        });
    }
    if q_basis.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "projected spectrum basis rows",
            expected: n,
            found: q_basis.nrows(),
        });
    }
    let p = q_basis.ncols();
    let ortho_dev = (q_basis.transpose() * q_basis - DMatrix::identity(p, p))
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    if ortho_dev > 1e-10 {
        return Err(Error::NonOrthonormalInput {
            deviation: ortho_dev,
        });
    }

    let projector = DMatrix::identity(n, n) - q_basis * q_basis.transpose();
    let lt = &projector * l * &projector;
    let lt = (&lt + lt.transpose()) * 0.5;

    let eig = lt.symmetric_eigen();
    let scale = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    // Two floors: relative to the projected spectrum, and absolute at the
    // roundoff level of forming L̃ from L — otherwise a numerically zero
    // projection would retain its own noise as "eigenvalues".
    let l_scale = l.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let cutoff = (scale * tol.max(256.0 * f64::EPSILON)).max(256.0 * f64::EPSILON * l_scale);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });

    if let Some(&worst) = order.last() {
        let min = eig.eigenvalues[worst];
        if min < -cutoff {
            return Err(Error::NotConditionallyPsd { eigenvalue: min });
        }
    }

    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] > cutoff)
        .take(n - p)
        .collect();
    let values: Vec<f64> = kept.iter().map(|&i| eig.eigenvalues[i]).collect();

    let mut vectors = DMatrix::zeros(n, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let mut u = eig.eigenvectors.column(i).into_owned();
        if p > 0 {
            let coeffs = q_basis.transpose() * &u;
            u -= q_basis * coeffs;
            let norm = u.norm();
            if norm > 0.0 {
                u /= norm;
            }
        }
        vectors.set_column(col, &u);
    }

    Ok(SpectrumTruncation {
        vectors,
        values,
        cutoff,
    })
}

/// Coefficient of `t^p` in `det(L + t V Vᵀ)`, extracted by Lagrange
/// interpolation at `p + 1` Chebyshev nodes scaled to `[1, 2]`.
///
/// The polynomial has degree at most `p`, so this is its leading
/// coefficient: only the node values and the node differences are needed.
/// Equals [`saddle_point_det`] of the same blocks.
pub fn det_poly_coefficient(l: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let p = v.ncols();
    let nodes: Vec<f64> = (0..=p)
        .map(|j| {
            let angle = core::f64::consts::PI * (2.0 * j as f64 + 1.0) / (2.0 * (p + 1) as f64);
            1.5 + 0.5 * angle.cos()
        })
        .collect();
    let vvt = v * v.transpose();
    let mut coeff = 0.0;
    for j in 0..=p {
        let g = (l + &vvt * nodes[j]).lu().determinant();
        let mut denom = 1.0;
        for k in 0..=p {
            if k != j {
                denom *= nodes[j] - nodes[k];
            }
        }
        coeff += g / denom;
    }
    coeff
}
