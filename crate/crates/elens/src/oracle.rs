//! Brute-force ground truth: exhaustive subset enumeration, statistical
//! distances, and numerical checkers for the spectral identities and
//! perturbative limits the model machinery relies on.
//!
//! Everything here is exponential in `n` and guarded accordingly; the point
//! is exactness on small instances, not speed.

use nalgebra::DMatrix;

use crate::ensemble::{Nnp, SampleSet, SizeMode, DEFAULT_TOL};
use crate::linalg::symmetry_deviation;
use crate::{Error, Result};

/// Hard cap on enumerable ground sets (2^n table entries).
pub const MAX_ENUM_N: usize = 20;

/// Full probability table over all `2^n` subsets, indexed by bit mask.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    n: usize,
    mode: SizeMode,
    probs: Vec<f64>,
    raw_total: f64,
}

impl ExactDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> SizeMode {
        self.mode
    }

    /// Probability per subset mask; sums to 1.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// The unnormalized mass total found by enumeration, before dividing.
    pub fn raw_total(&self) -> f64 {
        self.raw_total
    }

    pub fn probability_of(&self, x: &SampleSet) -> f64 {
        self.probs[x.mask() as usize]
    }

    /// Total-variation distance to another table on the same ground set.
    pub fn tv(&self, other: &ExactDistribution) -> f64 {
        tv_distance(&self.probs, &other.probs)
    }

    /// Total-variation distance to an empirical table.
    pub fn tv_empirical(&self, table: &EmpiricalTable) -> f64 {
        tv_distance(&self.probs, &table.frequencies())
    }

    /// The table conditioned on `|X| = m`, renormalized.
    pub fn restricted_to_size(&self, m: usize) -> ExactDistribution {
        let mut probs = vec![0.0; self.probs.len()];
        let mut total = 0.0;
        for (mask, &p) in self.probs.iter().enumerate() {
            if (mask as u64).count_ones() as usize == m {
                probs[mask] = p;
                total += p;
            }
        }
        if total > 0.0 {
            for p in probs.iter_mut() {
                *p /= total;
            }
        }
        ExactDistribution {
            n: self.n,
            mode: SizeMode::Fixed(m),
            probs,
            raw_total: total,
        }
    }

    /// The distribution of the complement process: mass of `X` moves to
    /// `Ω \ X`.
    pub fn complement_table(&self) -> ExactDistribution {
        let full = (1usize << self.n) - 1;
        let mut probs = vec![0.0; self.probs.len()];
        for (mask, &p) in self.probs.iter().enumerate() {
            probs[full ^ mask] = p;
        }
        ExactDistribution {
            n: self.n,
            mode: self.mode,
            probs,
            raw_total: self.raw_total,
        }
    }

    /// Size marginal of the table.
    pub fn size_marginal(&self) -> Vec<f64> {
        let mut sizes = vec![0.0; self.n + 1];
        for (mask, &p) in self.probs.iter().enumerate() {
            sizes[(mask as u64).count_ones() as usize] += p;
        }
        sizes
    }
}

/// Draw counts per subset mask.
#[derive(Debug, Clone)]
pub struct EmpiricalTable {
    n: usize,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalTable {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_ENUM_N {
            return Err(Error::GroundSetTooLarge { n, max: MAX_ENUM_N });
        }
        Ok(Self {
            n,
            counts: vec![0; 1 << n],
            total: 0,
        })
    }

    pub fn record(&mut self, x: &SampleSet) {
        self.counts[x.mask() as usize] += 1;
        self.total += 1;
    }

    pub fn from_samples<'a>(n: usize, samples: impl IntoIterator<Item = &'a SampleSet>) -> Result<Self> {
        let mut table = Self::new(n)?;
        for s in samples {
            table.record(s);
        }
        Ok(table)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// `(1/2) Σ |p - q|` over aligned tables.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "tables must cover the same subsets");
    0.5 * p
        .iter()
        .zip(q.iter())
        .map(|(&a, &b)| (a - b).abs())
        .sum::<f64>()
}

/// Evaluates every subset's mass exactly and normalizes.
///
/// The sum of the raw masses is retained in the result; it must agree with
/// the closed-form normalization constant, which tests assert.
pub fn enumerate_pmf(nnp: &Nnp, mode: SizeMode) -> Result<ExactDistribution> {
    let n = nnp.n();
    if n > MAX_ENUM_N {
        return Err(Error::GroundSetTooLarge { n, max: MAX_ENUM_N });
    }
    if let SizeMode::Fixed(m) = mode {
        if m < nnp.p() || m > n {
            return Err(Error::InvalidSize {
                requested: m,
                lo: nnp.p(),
                hi: n,
            });
        }
    }
    let mut probs = vec![0.0; 1usize << n];
    let mut total = 0.0;
    for mask in 0..(1u64 << n) {
        if let SizeMode::Fixed(m) = mode {
            if mask.count_ones() as usize != m {
                continue;
            }
        }
        let x = SampleSet::from_mask(mask, n);
        let w = nnp.unnormalized_pmf(&x)?;
        probs[mask as usize] = w;
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::NumericalBreakdown {
            context: "enumerated mass total is not positive",
        });
    }
    for p in probs.iter_mut() {
        *p /= total;
    }
    Ok(ExactDistribution {
        n,
        mode,
        probs,
        raw_total: total,
    })
}

/// Iterates the size-`k` subsets of `0..n` in lexicographic order.
pub(crate) fn k_subsets(n: usize, k: usize) -> KSubsets {
    KSubsets {
        n,
        k,
        current: (0..k).collect(),
        done: k > n,
    }
}

pub(crate) struct KSubsets {
    n: usize,
    k: usize,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for KSubsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        // Advance: rightmost index that can still move right.
        let mut i = self.k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - (self.k - i) {
                self.current[i] += 1;
                for j in (i + 1)..self.k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Checks the spectral expansion of the bordered determinant:
/// for every `X` with `p ≤ |X| ≤ p + q`,
/// `(-1)^p det[[L_X, V_X],[V_Xᵀ,0]] = det(VᵀV) Σ_{|Y|=|X|-p} det([Q_X Ũ_{X,Y}])² Π_{i∈Y} λ̃_i`,
/// the right side evaluated by explicit summation.
///
/// Returns the maximum relative error over all subsets. Subsets whose mass
/// is below `1e-8` of the model's peak mass are near-singular restrictions
/// where a double-precision determinant carries conditioning noise; they
/// are held to absolute agreement at `1e-16` of the peak instead (the
/// denominator is floored at `1e-8 · peak`).
pub fn check_cauchy_binet(nnp: &Nnp) -> Result<f64> {
    let n = nnp.n();
    if n > 12 {
        return Err(Error::GroundSetTooLarge { n, max: 12 });
    }
    if nnp.q() > 8 {
        return Err(Error::InvalidParameter {
            name: "q",
            message: "explicit spectral sum is limited to q <= 8",
        });
    }
    let p = nnp.p();
    let q = nnp.q();
    let gram = if p == 0 {
        1.0
    } else {
        (nnp.features().transpose() * nnp.features()).determinant()
    };
    let mixture = nnp.mixture();
    let lambdas = mixture.eigenvalues();

    // Global scale so that near-zero masses are compared absolutely.
    let mut masses = Vec::with_capacity(1 << n);
    let mut scale = 0.0f64;
    for mask in 0..(1u64 << n) {
        let x = SampleSet::from_mask(mask, n);
        let w = nnp.unnormalized_pmf(&x)?;
        scale = scale.max(w.abs());
        masses.push(w);
    }

    let mut max_err = 0.0f64;
    for mask in 0..(1u64 << n) {
        let x = SampleSet::from_mask(mask, n);
        let m = x.len();
        if m < p || m > p + q {
            continue;
        }
        let lhs = masses[mask as usize];
        let mut rhs = 0.0;
        for y in k_subsets(q, m - p) {
            let basis = mixture.projection_basis(&y);
            let idx = x.indices();
            let sub = DMatrix::from_fn(m, m, |r, c| basis[(idx[r], c)]);
            let det = sub.lu().determinant();
            let weight: f64 = y.iter().map(|&i| lambdas[i]).product();
            rhs += det * det * weight;
        }
        rhs *= gram;
        let denom = lhs.abs().max(rhs.abs()).max(1e-8 * scale);
        max_err = max_err.max((lhs - rhs).abs() / denom);
    }
    Ok(max_err)
}

/// One (ε, total-variation) point of a perturbative-limit curve.
#[derive(Debug, Clone, Copy)]
pub struct LimitPoint {
    pub epsilon: f64,
    pub tv: f64,
}

/// TV curves for the two perturbative regimes.
#[derive(Debug, Clone)]
pub struct LimitCheck {
    /// Fixed-size regime: `|DPP|_m(εA + VVᵀ)` against its limit
    /// (`|DPP|_m(VVᵀ)` for `m ≤ p`, the fixed-size pair `(A; V)` for `m > p`).
    pub fixed: Vec<LimitPoint>,
    /// Varying-size regime: `DPP(A + ε⁻¹VVᵀ)` against the pair `(A; V)`.
    /// Entries with `ε = 0` are skipped (the scaling is undefined there).
    pub varying: Vec<LimitPoint>,
}

/// Enumerates both perturbative families and their limits.
///
/// `a` must be symmetric positive definite (full rank); `v` full column
/// rank with `p < n`. At `ε = 0` the fixed-size family with `m > p` is the
/// limit itself after the `ε^{m-p}` factor cancels, so its TV is 0 by
/// construction.
pub fn check_limits(
    a: &DMatrix<f64>,
    v: &DMatrix<f64>,
    epsilons: &[f64],
    m: usize,
) -> Result<LimitCheck> {
    let n = a.nrows();
    if n > 10 {
        return Err(Error::GroundSetTooLarge { n, max: 10 });
    }
    if a.ncols() != n || v.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "limit check inputs",
            expected: n,
            found: if a.ncols() != n { a.ncols() } else { v.nrows() },
        });
    }
    if symmetry_deviation(a) > crate::linalg::SYMMETRY_TOL {
        return Err(Error::AsymmetricKernel {
            deviation: symmetry_deviation(a),
        });
    }
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidParameter {
            name: "a",
            message: "perturbation base must be positive definite",
        });
    }
    let p = v.ncols();
    let vvt = v * v.transpose();

    let pair = Nnp::build(a.clone(), v.clone(), DEFAULT_TOL)?;
    let fixed_limit = if m <= p {
        let proj = Nnp::build(vvt.clone(), DMatrix::zeros(n, 0), DEFAULT_TOL)?;
        enumerate_pmf(&proj, SizeMode::Fixed(m))?
    } else {
        enumerate_pmf(&pair, SizeMode::Fixed(m))?
    };
    let varying_limit = enumerate_pmf(&pair, SizeMode::Varying)?;

    let mut fixed = Vec::new();
    let mut varying = Vec::new();
    for &eps in epsilons {
        if eps == 0.0 {
            fixed.push(LimitPoint {
                epsilon: eps,
                tv: if m > p {
                    0.0
                } else {
                    let l0 = Nnp::build(vvt.clone(), DMatrix::zeros(n, 0), DEFAULT_TOL)?;
                    fixed_limit.tv(&enumerate_pmf(&l0, SizeMode::Fixed(m))?)
                },
            });
            continue;
        }
        let l_eps = Nnp::build(a * eps + &vvt, DMatrix::zeros(n, 0), DEFAULT_TOL)?;
        fixed.push(LimitPoint {
            epsilon: eps,
            tv: fixed_limit.tv(&enumerate_pmf(&l_eps, SizeMode::Fixed(m))?),
        });
        let l_scaled = Nnp::build(a + &vvt / eps, DMatrix::zeros(n, 0), DEFAULT_TOL)?;
        varying.push(LimitPoint {
            epsilon: eps,
            tv: varying_limit.tv(&enumerate_pmf(&l_scaled, SizeMode::Varying)?),
        });
    }
    Ok(LimitCheck { fixed, varying })
}

/// Pearson chi-square result for the sample-size law.
#[derive(Debug, Clone)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    /// Passes at confidence `1 - alpha` (e.g. `alpha = 0.001` for 0.999).
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Compares observed sample sizes against the model's size distribution.
///
/// Adjacent size bins are pooled until each expected count reaches 5, the
/// usual validity rule for Pearson's statistic. A model with deterministic
/// size has zero degrees of freedom and passes iff no off-size draw occurred.
pub fn chi_square_size(samples: &[SampleSet], nnp: &Nnp) -> ChiSquareResult {
    let dist = nnp.size_distribution();
    let total = samples.len() as f64;
    let mut observed = vec![0.0f64; dist.len()];
    for s in samples {
        observed[s.len()] += 1.0;
    }
    // Pool adjacent bins until each expected count is at least 5.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc_exp = 0.0;
    let mut acc_obs = 0.0;
    for (m, &prob) in dist.iter().enumerate() {
        acc_exp += prob * total;
        acc_obs += observed[m];
        if acc_exp >= 5.0 {
            pooled.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            pooled.push((acc_obs, acc_exp));
        }
    }
    let statistic: f64 = pooled
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = pooled.len().saturating_sub(1);
    let p_value = if dof == 0 {
        if statistic > 1e-9 {
            0.0
        } else {
            1.0
        }
    } else {
        gamma_q(dof as f64 / 2.0, statistic / 2.0)
    };
    ChiSquareResult {
        statistic,
        dof,
        p_value,
    }
}

/// Compares `det K_W` against the enumerated `Σ_{X ⊇ W} P(X)` for every
/// subset `W` up to the size cap; returns the maximum absolute error.
pub fn inclusion_check(nnp: &Nnp, max_subset_size: usize) -> Result<f64> {
    let n = nnp.n();
    let dist = enumerate_pmf(nnp, SizeMode::Varying)?;
    let kernel = nnp.marginal_kernel();
    let mut max_err = 0.0f64;
    for size in 0..=max_subset_size.min(n) {
        for w in k_subsets(n, size) {
            let w_set = SampleSet::new(w)?;
            let w_mask = w_set.mask();
            let by_kernel = kernel.minor(&w_set);
            let by_enumeration: f64 = dist
                .probabilities()
                .iter()
                .enumerate()
                .filter(|(mask, _)| (*mask as u64) & w_mask == w_mask)
                .map(|(_, &p)| p)
                .sum();
            max_err = max_err.max((by_kernel - by_enumeration).abs());
        }
    }
    Ok(max_err)
}

// --- special functions for the chi-square tail ---------------------------

/// Lanczos approximation of ln Γ(x) for x > 0 (g = 7, 9 coefficients,
/// ~1e-13 relative over the range used here).
#[allow(clippy::excessive_precision)] // standard published coefficients
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection; not reached by chi-square use but kept total.
        let pi = core::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * core::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x)/Γ(a):
/// the chi-square tail probability is Q(k/2, x/2).
fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        // Series for P(a, x), then complement.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma(a)).exp() * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn enumerate_diag_one() {
        let nnp = Nnp::build(dmatrix![1.0], DMatrix::zeros(1, 0), DEFAULT_TOL).unwrap();
        let dist = enumerate_pmf(&nnp, SizeMode::Varying).unwrap();
        assert_relative_eq!(dist.probabilities()[0], 0.5);
        assert_relative_eq!(dist.probabilities()[1], 0.5);
    }

    #[test]
    fn enumerate_forced_singleton() {
        // p = 1, n = 1: the item is always included.
        let nnp = Nnp::build(dmatrix![0.0], dmatrix![1.0], DEFAULT_TOL).unwrap();
        let dist = enumerate_pmf(&nnp, SizeMode::Varying).unwrap();
        assert_relative_eq!(dist.probabilities()[0], 0.0);
        assert_relative_eq!(dist.probabilities()[1], 1.0);
    }

    #[test]
    fn enumerate_total_matches_closed_form() {
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let v = dmatrix![1.0; 1.0; 1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let dist = enumerate_pmf(&nnp, SizeMode::Varying).unwrap();
        assert_relative_eq!(
            dist.raw_total(),
            nnp.normalization(SizeMode::Varying).unwrap(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn enumerate_rejects_large_ground_set() {
        let n = 21;
        let nnp = Nnp::build(
            DMatrix::identity(n, n),
            DMatrix::zeros(n, 0),
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(matches!(
            enumerate_pmf(&nnp, SizeMode::Varying),
            Err(Error::GroundSetTooLarge { .. })
        ));
    }

    #[test]
    fn fixed_mode_is_varying_conditioned_on_size() {
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let nnp = Nnp::build(l, DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        let varying = enumerate_pmf(&nnp, SizeMode::Varying).unwrap();
        for m in 0..=3 {
            let fixed = enumerate_pmf(&nnp, SizeMode::Fixed(m)).unwrap();
            let conditioned = varying.restricted_to_size(m);
            assert!(fixed.tv(&conditioned) < 1e-10);
        }
    }

    #[test]
    fn tv_distance_cases() {
        assert_relative_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_relative_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_relative_eq!(tv_distance(&[1.0, 0.0], &[0.5, 0.5]), 0.5);
    }

    #[test]
    fn k_subsets_enumerates_all() {
        let subsets: Vec<_> = k_subsets(5, 2).collect();
        assert_eq!(subsets.len(), 10);
        assert_eq!(subsets[0], vec![0, 1]);
        assert_eq!(subsets[9], vec![3, 4]);
        assert_eq!(k_subsets(3, 0).count(), 1);
        assert_eq!(k_subsets(3, 4).count(), 0);
    }

    #[test]
    fn cauchy_binet_classic_case() {
        // p = 0 reduces to the classical expansion of det over eigenpairs.
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let nnp = Nnp::build(l, DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        let err = check_cauchy_binet(&nnp).unwrap();
        assert!(err < 1e-10, "max relative error {err}");
    }

    #[test]
    fn cauchy_binet_with_features() {
        let l = dmatrix![2.0, 1.0, 0.0, 0.2; 1.0, 3.0, 0.5, 0.0; 0.0, 0.5, 1.0, 0.1; 0.2, 0.0, 0.1, 2.0];
        let v = dmatrix![1.0, 0.5; 1.0, -0.5; 1.0, 1.0; 1.0, 2.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let err = check_cauchy_binet(&nnp).unwrap();
        assert!(err < 1e-8, "max relative error {err}");
    }

    #[test]
    fn cauchy_binet_rank_deficient_subsets_vanish_on_both_sides() {
        // Features with duplicated rows: subsets hitting only duplicates
        // have rank-deficient V_X, and both sides of the expansion are 0.
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 2.0, 0.3; 0.0, 0.3, 1.0];
        let v = dmatrix![1.0, 2.0; 1.0, 2.0; 0.0, 1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let pair = SampleSet::new(vec![0, 1]).unwrap();
        assert_eq!(nnp.unnormalized_pmf(&pair).unwrap(), 0.0);
        let err = check_cauchy_binet(&nnp).unwrap();
        assert!(err < 1e-9, "max relative error {err}");
    }

    #[test]
    fn trivial_limit_towards_projection_ensemble() {
        // Varying size: DPP(εA + VVᵀ) tends to DPP(VVᵀ) as ε → 0.
        let a = dmatrix![1.0, 0.2, 0.0; 0.2, 1.5, 0.1; 0.0, 0.1, 0.8];
        let v = dmatrix![1.0; 1.0; -0.5];
        let vvt = &v * v.transpose();
        let limit = Nnp::build(vvt.clone(), DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        let limit_table = enumerate_pmf(&limit, SizeMode::Varying).unwrap();
        let eps = 1e-6;
        let near = Nnp::build(&a * eps + &vvt, DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        let near_table = enumerate_pmf(&near, SizeMode::Varying).unwrap();
        let tv = limit_table.tv(&near_table);
        assert!(tv < 1e-4, "TV {tv}");
    }

    #[test]
    fn limit_curves_shrink() {
        let a = dmatrix![1.0, 0.2, 0.0; 0.2, 1.5, 0.1; 0.0, 0.1, 0.8];
        let v = dmatrix![1.0; 1.0; 1.0];
        let eps = [1e-1, 1e-2, 1e-3];
        let check = check_limits(&a, &v, &eps, 2).unwrap();
        assert_eq!(check.fixed.len(), 3);
        assert_eq!(check.varying.len(), 3);
        for w in check.fixed.windows(2) {
            assert!(w[1].tv < w[0].tv);
        }
        for w in check.varying.windows(2) {
            assert!(w[1].tv < w[0].tv);
        }
    }

    #[test]
    fn limit_at_zero_epsilon_is_exact_for_large_m() {
        let a = dmatrix![1.0, 0.2; 0.2, 1.5];
        let v = dmatrix![1.0; 1.0];
        let check = check_limits(&a, &v, &[0.0], 2).unwrap();
        assert_eq!(check.fixed[0].tv, 0.0);
        assert!(check.varying.is_empty());
    }

    #[test]
    fn chi_square_projection_is_degenerate() {
        let v = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        let nnp = Nnp::build(DMatrix::zeros(3, 3), v, DEFAULT_TOL).unwrap();
        let samples: Vec<SampleSet> = (0..100)
            .map(|_| SampleSet::new(vec![0, 1]).unwrap())
            .collect();
        let res = chi_square_size(&samples, &nnp);
        assert_eq!(res.dof, 0);
        assert!(res.statistic < 1e-9);
        assert!(res.passes(0.001));
    }

    #[test]
    fn chi_square_detects_wrong_law() {
        let nnp =
            Nnp::build(DMatrix::identity(2, 2), DMatrix::zeros(2, 0), DEFAULT_TOL).unwrap();
        // All draws empty although P(empty) should be 1/4.
        let samples: Vec<SampleSet> = (0..1000).map(|_| SampleSet::empty()).collect();
        let res = chi_square_size(&samples, &nnp);
        assert!(!res.passes(0.001));
    }

    #[test]
    fn inclusion_check_small_model() {
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let v = dmatrix![1.0; 1.0; 1.0];
        let nnp = Nnp::build(l, v, DEFAULT_TOL).unwrap();
        let err = inclusion_check(&nnp, 3).unwrap();
        assert!(err < 1e-9, "max inclusion error {err}");
    }

    #[test]
    fn complement_duality_via_enumeration() {
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let nnp = Nnp::build(l, DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        let dist = enumerate_pmf(&nnp, SizeMode::Varying).unwrap();
        let k = nnp.marginal_kernel();
        let n = nnp.n();
        let i_minus_k = DMatrix::identity(n, n) - k.matrix();
        // P(A ⊆ X^c) from enumeration vs det(I-K)_A for all A.
        for mask in 0..(1u64 << n) {
            let a = SampleSet::from_mask(mask, n);
            let by_enum: f64 = dist
                .probabilities()
                .iter()
                .enumerate()
                .filter(|(x_mask, _)| (*x_mask as u64) & mask == 0)
                .map(|(_, &p)| p)
                .sum();
            let idx = a.indices();
            let minor = if idx.is_empty() {
                1.0
            } else {
                DMatrix::from_fn(idx.len(), idx.len(), |r, c| i_minus_k[(idx[r], idx[c])])
                    .lu()
                    .determinant()
            };
            assert_relative_eq!(by_enum, minor, epsilon = 1e-8);
        }
    }

    #[test]
    fn mixture_identity_explicit_double_sum() {
        // For p = 0 the PMF equals the eigen-expansion double sum.
        let l = dmatrix![2.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 1.0];
        let nnp = Nnp::build(l.clone(), DMatrix::zeros(3, 0), DEFAULT_TOL).unwrap();
        let n = 3;
        let eig = l.clone().symmetric_eigen();
        let z = (DMatrix::identity(n, n) + &l).determinant();
        for mask in 0..(1u64 << n) {
            let x = SampleSet::from_mask(mask, n);
            let m = x.len();
            let mut rhs = 0.0;
            for y in k_subsets(n, m) {
                let idx = x.indices();
                let sub = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(idx[r], y[c])]);
                let det = sub.lu().determinant();
                let weight: f64 = y.iter().map(|&i| eig.eigenvalues[i]).product();
                rhs += det * det * weight;
            }
            rhs /= z;
            let lhs = nnp.pmf(&x, SizeMode::Varying).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-9);
        }
    }

    #[test]
    fn gamma_tail_known_values() {
        // Q(1/2, x/2) is the chi-square(1) tail: at x = 3.841, ~0.05.
        let q = gamma_q(0.5, 3.841 / 2.0);
        assert!((q - 0.05).abs() < 1e-3, "chi2(1) tail {q}");
        // Chi-square(10) at its mean has tail ~0.44.
        let q = gamma_q(5.0, 5.0);
        assert!((q - 0.4405).abs() < 1e-3, "chi2(10) tail {q}");
        // ln Γ(5) = ln 24.
        assert_relative_eq!(ln_gamma(5.0), 24.0f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(ln_gamma(0.5), core::f64::consts::PI.sqrt().ln(), max_relative = 1e-10);
    }
}
