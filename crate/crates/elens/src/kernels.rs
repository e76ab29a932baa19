//! Model constructions from data: distance-power kernels (conditionally
//! positive definite with a polynomial feature basis), Gaussian
//! L-ensembles, forest-roots processes on graphs, expected-size
//! calibration, and the bordered interpolation solve.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::{Nnp, DEFAULT_TOL};
use crate::linalg::symmetry_deviation;
use crate::{Error, Result};

/// `n` points in `R^d`, one per row.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: DMatrix<f64>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::InvalidParameter {
                name: "points",
                message: "a point cloud needs at least one point and one coordinate",
            });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "points",
                message: "coordinates must be finite",
            });
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParameter {
                name: "points",
                message: "all points must have the same dimension",
            });
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.points.row(i) - self.points.row(j)).norm()
    }

    pub fn distance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.distance(i, j))
    }

    /// Index of the point nearest the centroid.
    pub fn nearest_to_centroid(&self) -> usize {
        let centroid = self.points.row_mean();
        (0..self.len())
            .min_by(|&a, &b| {
                let da = (self.points.row(a) - &centroid).norm();
                let db = (self.points.row(b) - &centroid).norm();
                da.partial_cmp(&db).unwrap()
            })
            .expect("cloud is nonempty")
    }

    /// All coordinates multiplied by `c`.
    pub fn rescaled(&self, c: f64) -> PointCloud {
        PointCloud {
            points: &self.points * c,
        }
    }
}

/// Exponent vector of a monomial `x^β = Π x_i^{β_i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex {
    exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x.iter())
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }
}

/// All multi-indices in `d` variables with degree at most `max_degree`, in
/// graded lexicographic order (by degree, then lexicographically).
pub fn monomial_exponents(d: usize, max_degree: u32) -> Vec<MultiIndex> {
    fn compositions(d: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if d == 1 {
            prefix.push(degree);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=degree {
            prefix.push(first);
            compositions(d - 1, degree - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        let mut prefix = Vec::with_capacity(d);
        compositions(d, degree, &mut prefix, &mut out);
    }
    out
}

/// A distance-power kernel `φ(r) = γ (-1)^⌈β/2⌉ r^β`, conditionally
/// positive definite of order `ℓ = ⌈β/2⌉` for `β > 0` not an even integer.
#[derive(Debug, Clone, Copy)]
pub struct CpdKernelSpec {
    beta: f64,
    gamma: f64,
}

impl CpdKernelSpec {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if beta <= 0.0 || !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                message: "distance exponent must be positive and finite",
            });
        }
        if beta.fract() == 0.0 && (beta as u64).is_multiple_of(2) {
            return Err(Error::EvenBeta { beta });
        }
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                message: "kernel scale must be positive and finite",
            });
        }
        Ok(Self { beta, gamma })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Conditional positive definiteness order `ℓ = ⌈β/2⌉`.
    pub fn order(&self) -> u32 {
        (self.beta / 2.0).ceil() as u32
    }

    /// `(-1)^ℓ`.
    pub fn sign(&self) -> f64 {
        if self.order().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// Kernel value at distance `r`.
    pub fn evaluate(&self, r: f64) -> f64 {
        self.gamma * self.sign() * r.powf(self.beta)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.beta, gamma)
    }
}

/// Multivariate Vandermonde matrix: monomials of degree `< ℓ` evaluated at
/// the cloud, one column per monomial in graded lexicographic order.
///
/// Column count is `binomial(d + ℓ - 1, d)`; an error is raised when that
/// exceeds the number of points, since the matrix could not have full
/// column rank.
pub fn vandermonde(cloud: &PointCloud, order: u32) -> Result<DMatrix<f64>> {
    if order == 0 {
        return Err(Error::InvalidParameter {
            name: "order",
            message: "polynomial order must be at least 1",
        });
    }
    let exponents = monomial_exponents(cloud.dim(), order - 1);
    let columns = exponents.len();
    let n = cloud.len();
    if columns > n {
        return Err(Error::OverflowGuard { columns, rows: n });
    }
    let mut v = DMatrix::zeros(n, columns);
    for i in 0..n {
        let x = cloud.point(i);
        for (j, idx) in exponents.iter().enumerate() {
            v[(i, j)] = idx.evaluate(&x);
        }
    }
    Ok(v)
}

/// The pair `(L; V)` of a distance-power kernel: `L_xy = γ(-1)^ℓ‖x-y‖^β`
/// with the degree-`< ℓ` Vandermonde features.
///
/// Duplicate points are allowed; the duplicated rows simply give those
/// pairs zero joint probability.
///
/// ```
/// use elens::kernels::{distance_power_nnp, CpdKernelSpec, PointCloud};
///
/// let cloud = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![3.0]])?;
/// // β = 1: kernel -γ‖x-y‖, order 1, features are the all-ones column.
/// let nnp = distance_power_nnp(&cloud, &CpdKernelSpec::new(1.0, 1.0)?)?;
/// assert_eq!(nnp.p(), 1);
/// assert!(nnp.expected_size() >= 1.0);
/// # Ok::<(), elens::Error>(())
/// ```
pub fn distance_power_nnp(cloud: &PointCloud, spec: &CpdKernelSpec) -> Result<Nnp> {
    let n = cloud.len();
    let l = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            spec.evaluate(cloud.distance(i, j))
        }
    });
    let v = vandermonde(cloud, spec.order())?;
    Nnp::build(l, v, DEFAULT_TOL)
}

/// Plain Gaussian L-ensemble (`p = 0`):
/// `L_ij = γ exp(-‖x_i - x_j‖²/(2 l²))`.
pub fn gaussian_lensemble(cloud: &PointCloud, lengthscale: f64, gamma: f64) -> Result<Nnp> {
    if lengthscale <= 0.0 || !lengthscale.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lengthscale",
            message: "lengthscale must be positive and finite",
        });
    }
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            message: "kernel scale must be positive and finite",
        });
    }
    let n = cloud.len();
    let inv = 1.0 / (2.0 * lengthscale * lengthscale);
    let l = DMatrix::from_fn(n, n, |i, j| {
        let r = cloud.distance(i, j);
        gamma * (-r * r * inv).exp()
    });
    let l = (&l + l.transpose()) * 0.5;
    Nnp::build(l, DMatrix::zeros(n, 0), DEFAULT_TOL)
}

/// A validated graph Laplacian: symmetric, zero row sums, nonpositive
/// off-diagonal entries.
#[derive(Debug, Clone)]
pub struct GraphLaplacian {
    matrix: DMatrix<f64>,
}

impl GraphLaplacian {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n == 0 {
            return Err(Error::InvalidLaplacian("matrix must be square and nonempty"));
        }
        if symmetry_deviation(&matrix) > crate::linalg::SYMMETRY_TOL {
            return Err(Error::InvalidLaplacian("matrix must be symmetric"));
        }
        let scale = matrix.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        for i in 0..n {
            let row_sum: f64 = matrix.row(i).iter().sum();
            if row_sum.abs() > 1e-10 * scale {
                return Err(Error::InvalidLaplacian("row sums must vanish"));
            }
            for j in 0..n {
                if i != j && matrix[(i, j)] > 1e-12 * scale {
                    return Err(Error::InvalidLaplacian(
                        "off-diagonal entries must be nonpositive",
                    ));
                }
            }
        }
        Ok(Self { matrix })
    }

    /// Laplacian of an undirected weighted graph given as `(u, v, weight)`
    /// edges over vertices `0..n`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut l = DMatrix::zeros(n, n);
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::IndexOutOfRange {
                    index: u.max(v),
                    n,
                });
            }
            if u == v {
                continue;
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(Error::InvalidLaplacian("edge weights must be positive"));
            }
            l[(u, v)] -= w;
            l[(v, u)] -= w;
            l[(u, u)] += w;
            l[(v, v)] += w;
        }
        Self::new(l)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Relative threshold deciding which Laplacian eigenvalues count as zero,
/// both for connectivity detection and for the spectral pseudo-inverse.
const LAPLACIAN_ZERO_TOL: f64 = 1e-8;

/// The roots-of-spanning-forests process: the pair `(q 𝓛†; 1)` on a
/// connected graph. Its marginal kernel is `q (qI + 𝓛)⁻¹`, so there is
/// always at least one root.
pub fn forest_roots_nnp(lap: &GraphLaplacian, q: f64) -> Result<Nnp> {
    if q <= 0.0 || !q.is_finite() {
        return Err(Error::InvalidParameter {
            name: "q",
            message: "forest parameter must be positive and finite",
        });
    }
    let n = lap.n();
    let eig = lap.matrix().clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let zero_cut = LAPLACIAN_ZERO_TOL * scale.max(f64::MIN_POSITIVE);
    let zero_count = eig.eigenvalues.iter().filter(|&&l| l <= zero_cut).count();
    if zero_count != 1 {
        return Err(Error::DisconnectedGraph {
            zero_eigenvalues: zero_count,
        });
    }
    let mut l = DMatrix::zeros(n, n);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > zero_cut {
            let u = eig.eigenvectors.column(i);
            l += (u * u.transpose()) * (q / lambda);
        }
    }
    let l = (&l + l.transpose()) * 0.5;
    let ones = DMatrix::from_element(n, 1, 1.0);
    Nnp::build(l, ones, DEFAULT_TOL)
}

/// Kernel family used by the calibration routine.
#[derive(Debug, Clone, Copy)]
pub enum KernelFamily {
    DistancePower { beta: f64 },
    Gaussian { lengthscale: f64 },
}

impl KernelFamily {
    pub fn build(&self, cloud: &PointCloud, gamma: f64) -> Result<Nnp> {
        match *self {
            KernelFamily::DistancePower { beta } => {
                distance_power_nnp(cloud, &CpdKernelSpec::new(beta, gamma)?)
            }
            KernelFamily::Gaussian { lengthscale } => {
                gaussian_lensemble(cloud, lengthscale, gamma)
            }
        }
    }
}

/// Outcome of [`calibrate_gamma`].
#[derive(Debug, Clone, Copy)]
pub struct GammaCalibration {
    pub gamma: f64,
    /// Expected size at the returned `gamma`.
    pub expected_size: f64,
    pub iterations: usize,
    /// True when the target equals `p` and γ was pinned to the lower limit.
    pub at_lower_limit: bool,
}

/// Finds `γ` with `E|X| = target` by bisection on
/// `E|X|(γ) = p + Σ γλ_i/(1+γλ_i)`, strictly increasing in `γ`.
///
/// Scaling `L` by `γ` scales every projected eigenvalue linearly, so one
/// spectral factorization at `γ = 1` serves the whole search. Terminates
/// when `|E|X| - target| < 1e-6`. A target of exactly `p` is the `γ → 0`
/// limit and returns a pinned `γ = 1e-13` flagged `at_lower_limit`.
pub fn calibrate_gamma(
    cloud: &PointCloud,
    family: &KernelFamily,
    target: f64,
) -> Result<GammaCalibration> {
    const RESIDUAL: f64 = 1e-6;
    let base = family.build(cloud, 1.0)?;
    let p = base.p() as f64;
    let lambdas: Vec<f64> = base.mixture().eigenvalues().to_vec();
    let reachable = p + lambdas.len() as f64;
    if !target.is_finite() || target < p || target >= reachable {
        return Err(Error::TargetOutOfRange {
            target,
            lo: p,
            hi: reachable,
        });
    }
    let expected = |gamma: f64| -> f64 {
        p + lambdas
            .iter()
            .map(|&l| gamma * l / (1.0 + gamma * l))
            .sum::<f64>()
    };
    if target == p {
        let gamma = 1e-13;
        return Ok(GammaCalibration {
            gamma,
            expected_size: expected(gamma),
            iterations: 0,
            at_lower_limit: true,
        });
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut iterations = 0;
    while expected(hi) < target {
        hi *= 2.0;
        iterations += 1;
        if !hi.is_finite() {
            return Err(Error::NumericalBreakdown {
                context: "calibration bracket could not be closed",
            });
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let e = expected(mid);
        iterations += 1;
        if (e - target).abs() < RESIDUAL {
            return Ok(GammaCalibration {
                gamma: mid,
                expected_size: e,
                iterations,
                at_lower_limit: mid < 1e-12,
            });
        }
        if e < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if iterations > 10_000 {
            return Err(Error::NumericalBreakdown {
                context: "calibration bisection did not converge",
            });
        }
    }
}

/// Solution of the bordered interpolation system
/// `[[L, V],[Vᵀ, 0]] (α; β) = (y; 0)`: kernel weights `alpha` and
/// polynomial coefficients `poly_coeffs` (graded lexicographic order).
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub alpha: Vec<f64>,
    pub poly_coeffs: Vec<f64>,
}

impl Interpolant {
    /// Evaluates `s(x) = Σ α_i φ(‖x - x_i‖) + Σ β_k p_k(x)`.
    pub fn evaluate(&self, cloud: &PointCloud, spec: &CpdKernelSpec, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &a) in self.alpha.iter().enumerate() {
            let xi = cloud.point(i);
            let r = xi
                .iter()
                .zip(x.iter())
                .map(|(&u, &v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            if r > 0.0 {
                s += a * spec.evaluate(r);
            }
        }
        let exponents = monomial_exponents(x.len(), spec.order() - 1);
        for (k, idx) in exponents.iter().enumerate() {
            s += self.poly_coeffs[k] * idx.evaluate(x);
        }
        s
    }
}

/// Solves the interpolation problem at the cloud's own points.
///
/// One step of iterative refinement keeps the residual at the
/// backward-stable level even for the ill-conditioned systems large
/// distance powers produce.
pub fn interpolation_solve(
    cloud: &PointCloud,
    spec: &CpdKernelSpec,
    y: &[f64],
) -> Result<Interpolant> {
    let n = cloud.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "interpolation values",
            expected: n,
            found: y.len(),
        });
    }
    let l = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            spec.evaluate(cloud.distance(i, j))
        }
    });
    let v = vandermonde(cloud, spec.order())?;
    let cols = v.ncols();
    let size = n + cols;
    let mut a = DMatrix::zeros(size, size);
    a.view_mut((0, 0), (n, n)).copy_from(&l);
    a.view_mut((0, n), (n, cols)).copy_from(&v);
    a.view_mut((n, 0), (cols, n)).copy_from(&v.transpose());
    let mut b = DVector::zeros(size);
    for (i, &yi) in y.iter().enumerate() {
        b[i] = yi;
    }
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(Error::SingularSystem)?;
    for _ in 0..2 {
        let residual = &b - &a * &x;
        match lu.solve(&residual) {
            Some(correction) => x += correction,
            None => break,
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(Interpolant {
        alpha: x.as_slice()[..n].to_vec(),
        poly_coeffs: x.as_slice()[n..].to_vec(),
    })
}
