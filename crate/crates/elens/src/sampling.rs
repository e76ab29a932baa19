//! Samplers: exact draws through the spectral mixture (projection,
//! Bernoulli, fixed-size, and low-rank paths) and an up-down / swap Gibbs
//! chain with incremental bordered-inverse bookkeeping.
//!
//! Every sampler is a deterministic function of `(model, config, seed)`.
//! Independent chains should draw from split [`RngState`]s.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::ensemble::{Nnp, SampleSet, SizeMode, SpectralMixture};
use crate::linalg::{orthonormal_span, SpectrumTruncation, RANK_TOL};
use crate::{Error, Result};

/// Name of the generator recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha12";

/// The concrete generator behind every sampler.
pub type SamplerRng = ChaCha12Rng;

/// Seed descriptor: a 64-bit seed plus a stream index, so parallel chains
/// can draw independent streams from the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    seed: u64,
    stream: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// The same seed on an independent stream.
    pub fn split(&self, stream: u64) -> Self {
        Self {
            seed: self.seed,
            stream,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self) -> SamplerRng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn draw_categorical(weights: &[f64], rng: &mut SamplerRng) -> Option<usize> {
    let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if total <= 0.0 {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = Some(i);
        if target < w {
            return Some(i);
        }
        target -= w;
    }
    last
}

/// Exact sample from the projection process of an orthonormal basis `U`
/// (n×m): draws exactly `m` distinct indices with `P(X) = det(UUᵀ)_X`.
///
/// Sequential leverage-score sampling: `p(i) = ‖y_i‖²` over the rows of
/// `U`, a Gram-Schmidt vector `f_j` per accepted item, and the score
/// downdate `p(i) ← p(i) - (f_jᵀ y_i)²`. Scores are clipped at zero;
/// a downdate overshooting below `-1e-10` triggers recomputation of the
/// whole score vector from the accumulated basis.
pub fn sample_projection(u: &DMatrix<f64>, rng: &mut SamplerRng) -> Result<SampleSet> {
    let n = u.nrows();
    let m = u.ncols();
    if m == 0 {
        return Ok(SampleSet::empty());
    }
    let ortho_dev = (u.transpose() * u - DMatrix::identity(m, m))
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()));
    if ortho_dev > 1e-10 {
        return Err(Error::NonOrthonormalInput {
            deviation: ortho_dev,
        });
    }

    let rows: Vec<DVector<f64>> = (0..n).map(|i| u.row(i).transpose()).collect();
    let mut scores: Vec<f64> = rows.iter().map(|y| y.norm_squared()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut chosen = Vec::with_capacity(m);

    for _ in 0..m {
        let x = draw_categorical(&scores, rng).ok_or(Error::NumericalBreakdown {
            context: "projection sampler ran out of leverage mass",
        })?;

        let mut f = rows[x].clone();
        for prev in &basis {
            let coeff = prev.dot(&rows[x]);
            f.axpy(-coeff, prev, 1.0);
        }
        let pivot = f.dot(&rows[x]);
        if pivot < 1e-12 {
            return Err(Error::NumericalBreakdown {
                context: "projection sampler pivot vanished",
            });
        }
        f /= pivot.sqrt();

        let mut needs_recompute = false;
        for (i, score) in scores.iter_mut().enumerate() {
            if *score <= 0.0 {
                continue;
            }
            let delta = f.dot(&rows[i]);
            *score -= delta * delta;
            if *score < -1e-10 {
                needs_recompute = true;
            }
            if *score < 0.0 {
                *score = 0.0;
            }
        }
        basis.push(f);
        if needs_recompute {
            for (i, score) in scores.iter_mut().enumerate() {
                let mut s = rows[i].norm_squared();
                for prev in &basis {
                    let d = prev.dot(&rows[i]);
                    s -= d * d;
                }
                *score = s.max(0.0);
            }
        }
        scores[x] = 0.0;
        chosen.push(x);
    }
    SampleSet::from_unsorted(chosen)
}

/// Independent Bernoulli selection over the retained eigenvalues:
/// index `i` is kept with probability `π_i = λ̃_i/(1+λ̃_i)`.
pub fn sample_diag_varying(mixture: &SpectralMixture, rng: &mut SamplerRng) -> Vec<usize> {
    mixture
        .bernoulli()
        .iter()
        .enumerate()
        .filter(|(_, &pi)| rng.random::<f64>() < pi)
        .map(|(i, _)| i)
        .collect()
}

/// Exact fixed-size diagonal sample: `P(Y) ∝ Π_{i∈Y} values_i` over
/// `|Y| = k`, via the sequential conditional scheme on suffix tables of
/// elementary symmetric polynomials.
///
/// Item `i` is taken, with `j` slots remaining, with probability
/// `values_i · e_{j-1}(rest) / e_j({i} ∪ rest)` where `rest` is the suffix
/// after `i`. Cost O(q·k) for the table plus O(q) for the walk.
pub fn sample_diag_fixed(values: &[f64], k: usize, rng: &mut SamplerRng) -> Result<Vec<usize>> {
    let q = values.len();
    if k > q {
        return Err(Error::SizeOutOfRange {
            requested: k,
            lo: 0,
            hi: q,
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    // table[j][i] = e_j(values[i..]), for j ≤ k.
    let mut table = vec![vec![0.0f64; q + 1]; k + 1];
    table[0] = vec![1.0; q + 1];
    for j in 1..=k {
        for i in (0..q).rev() {
            table[j][i] = table[j][i + 1] + values[i] * table[j - 1][i + 1];
        }
    }
    let mut selected = Vec::with_capacity(k);
    let mut slots = k;
    for i in 0..q {
        if slots == 0 {
            break;
        }
        let denom = table[slots][i];
        if denom <= 0.0 {
            return Err(Error::NumericalBreakdown {
                context: "fixed-size diagonal sampler table underflow",
            });
        }
        let take = values[i] * table[slots - 1][i + 1] / denom;
        if rng.random::<f64>() < take {
            selected.push(i);
            slots -= 1;
        }
    }
    debug_assert_eq!(selected.len(), k);
    Ok(selected)
}

fn sample_from_mixture(
    mixture: &SpectralMixture,
    mode: SizeMode,
    rng: &mut SamplerRng,
) -> Result<SampleSet> {
    let selected = match mode {
        SizeMode::Varying => sample_diag_varying(mixture, rng),
        SizeMode::Fixed(m) => {
            let p = mixture.feature_rank();
            let q = mixture.rank();
            if m < p || m > p + q {
                return Err(Error::SizeOutOfRange {
                    requested: m,
                    lo: p,
                    hi: p + q,
                });
            }
            sample_diag_fixed(mixture.eigenvalues(), m - p, rng)?
        }
    };
    let basis = mixture.projection_basis(&selected);
    sample_projection(&basis, rng)
}

/// Exact varying-size draw: Bernoulli-select optional eigenvectors, then a
/// projection sample from `[Q, Ũ_{:,Y}]`. The `p` feature directions are
/// always part of the basis, so `|X| ≥ p` always.
pub fn sample_varying(nnp: &Nnp, rng: &mut SamplerRng) -> Result<SampleSet> {
    sample_from_mixture(nnp.mixture(), SizeMode::Varying, rng)
}

/// Exact fixed-size draw of `m` items, `p ≤ m ≤ p + q`: selects `m - p`
/// optional eigenvectors with the fixed-size diagonal sampler, then a
/// projection sample.
pub fn sample_fixed(nnp: &Nnp, m: usize, rng: &mut SamplerRng) -> Result<SampleSet> {
    sample_from_mixture(nnp.mixture(), SizeMode::Fixed(m), rng)
}

/// Spectral mixture of the pair `(ΨΨᵀ; V)` computed without forming the
/// n×n kernel: thin SVD of `Ψᵀ(I - QQᵀ)` gives `Ũ` and `λ̃ = σ̃²` directly.
///
/// The distribution is identical to the dense path on `L = ΨΨᵀ`.
pub fn low_rank_mixture(
    factor: &DMatrix<f64>,
    features: &DMatrix<f64>,
    tol: f64,
) -> Result<SpectralMixture> {
    let n = factor.nrows();
    if features.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "low-rank feature rows",
            expected: n,
            found: features.nrows(),
        });
    }
    let p = features.ncols();
    let (feature_basis, rank) = orthonormal_span(features, RANK_TOL);
    if rank < p {
        return Err(Error::RankDeficientFeatures { rank, columns: p });
    }
    // Ψᵀ(I - QQᵀ) without the n×n projector.
    let mut projected = factor.transpose();
    if p > 0 {
        let cross = factor.transpose() * &feature_basis;
        projected -= cross * feature_basis.transpose();
    }
    let svd = projected.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NumericalBreakdown {
        context: "SVD of the projected factor did not converge",
    })?;
    let lambda_max = svd
        .singular_values
        .iter()
        .fold(0.0f64, |a, &s| a.max(s * s));
    // Same two floors as the dense path: ‖Ψ‖² bounds the kernel scale.
    let factor_scale = factor.iter().fold(0.0f64, |a, &v| a + v * v);
    let cutoff =
        (lambda_max * tol.max(256.0 * f64::EPSILON)).max(256.0 * f64::EPSILON * factor_scale);

    let mut values = Vec::new();
    let mut kept_rows = Vec::new();
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        let lambda = sigma * sigma;
        if lambda > cutoff {
            values.push(lambda);
            kept_rows.push(i);
        }
    }
    let mut vectors = DMatrix::zeros(n, kept_rows.len());
    for (col, &row) in kept_rows.iter().enumerate() {
        let mut u = v_t.row(row).transpose();
        if p > 0 {
            let coeffs = feature_basis.transpose() * &u;
            u -= &feature_basis * coeffs;
            let norm = u.norm();
            if norm > 0.0 {
                u /= norm;
            }
        }
        vectors.set_column(col, &u);
    }
    let spectrum = SpectrumTruncation::from_parts(vectors, values, cutoff);
    Ok(SpectralMixture::from_parts(feature_basis, spectrum))
}

/// Exact draw from the pair `(ΨΨᵀ; V)` through [`low_rank_mixture`].
pub fn sample_low_rank(
    factor: &DMatrix<f64>,
    features: &DMatrix<f64>,
    tol: f64,
    mode: SizeMode,
    rng: &mut SamplerRng,
) -> Result<SampleSet> {
    let mixture = low_rank_mixture(factor, features, tol)?;
    sample_from_mixture(&mixture, mode, rng)
}

/// Move family of the Gibbs chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GibbsMode {
    /// Up-down moves: a uniformly chosen coordinate is flipped in or out.
    Varying,
    /// Swap moves at fixed size `m`: one member out, one non-member in.
    Fixed(usize),
}

/// Chain schedule. All counts are in sweeps of `n` proposals each.
#[derive(Debug, Clone, Copy)]
pub struct GibbsConfig {
    pub mode: GibbsMode,
    /// Sweeps discarded before the first recorded state (≥ 1).
    pub burn_in: usize,
    /// Sweeps between recorded states (≥ 1).
    pub thin: usize,
    /// Number of recorded states (≥ 1).
    pub iterations: usize,
}

impl GibbsConfig {
    fn validate(&self, nnp: &Nnp) -> Result<()> {
        if self.burn_in == 0 || self.thin == 0 || self.iterations == 0 {
            return Err(Error::InvalidConfig(
                "burn_in, thin, and iterations must all be at least 1",
            ));
        }
        if let GibbsMode::Fixed(m) = self.mode {
            if m < nnp.p() || m > nnp.p() + nnp.q() {
                return Err(Error::SizeOutOfRange {
                    requested: m,
                    lo: nnp.p(),
                    hi: nnp.p() + nnp.q(),
                });
            }
        }
        Ok(())
    }
}

/// Bookkeeping counters of a finished chain.
#[derive(Debug, Clone, Copy, Default)]
pub struct GibbsDiagnostics {
    pub proposals: u64,
    pub accepted: u64,
    /// Full rebuilds of the bordered inverse.
    pub rebuilds: u64,
    /// Worst relative disagreement between an incremental determinant
    /// ratio and its from-scratch recomputation (checked at every rebuild).
    pub max_ratio_error: f64,
    pub ratio_checks: u64,
}

/// Recorded states plus diagnostics.
#[derive(Debug, Clone)]
pub struct GibbsRun {
    pub samples: Vec<SampleSet>,
    pub diagnostics: GibbsDiagnostics,
}

/// Accepted moves between inverse rebuilds (and ratio cross-checks).
pub const REBUILD_INTERVAL: u64 = 1000;

fn barker(ratio: f64) -> f64 {
    if !ratio.is_finite() {
        return 1.0;
    }
    if ratio <= 0.0 {
        return 0.0;
    }
    ratio / (1.0 + ratio)
}

/// The maintained state of a Gibbs chain over one bordered saddle matrix.
///
/// Matrix rows are ordered "current items, then the p feature rows"; the
/// inverse is updated by bordering on insertion and by the complementary
/// Schur downdate on deletion. Determinant ratios come out of the inverse:
/// removal of the item at row `t` has ratio `(A⁻¹)_tt`, insertion has the
/// Schur complement `d - cᵀA⁻¹c` of the appended row.
struct BorderedState<'a> {
    nnp: &'a Nnp,
    items: Vec<usize>,
    member: Vec<bool>,
    inv: DMatrix<f64>,
}

impl<'a> BorderedState<'a> {
    fn new(nnp: &'a Nnp, initial: &SampleSet) -> Result<Self> {
        let mut member = vec![false; nnp.n()];
        for &i in initial.indices() {
            member[i] = true;
        }
        let items = initial.indices().to_vec();
        let inv = Self::fresh_inverse(nnp, &items).ok_or(Error::SingularState)?;
        Ok(Self {
            nnp,
            items,
            member,
            inv,
        })
    }

    fn bordered(nnp: &Nnp, items: &[usize]) -> DMatrix<f64> {
        let k = items.len();
        let p = nnp.p();
        let l = nnp.kernel();
        let v = nnp.features();
        let mut a = DMatrix::zeros(k + p, k + p);
        for (r, &i) in items.iter().enumerate() {
            for (c, &j) in items.iter().enumerate() {
                a[(r, c)] = l[(i, j)];
            }
            for c in 0..p {
                a[(r, k + c)] = v[(i, c)];
                a[(k + c, r)] = v[(i, c)];
            }
        }
        a
    }

    fn fresh_inverse(nnp: &Nnp, items: &[usize]) -> Option<DMatrix<f64>> {
        let a = Self::bordered(nnp, items);
        if a.nrows() == 0 {
            return Some(a);
        }
        a.lu().try_inverse()
    }

    fn rebuild(&mut self) -> Result<()> {
        self.inv = Self::fresh_inverse(self.nnp, &self.items).ok_or(Error::SingularState)?;
        Ok(())
    }

    fn size(&self) -> usize {
        self.items.len()
    }

    /// Border column of candidate item `i` in current row order.
    fn border_column(&self, i: usize) -> DVector<f64> {
        let k = self.items.len();
        let p = self.nnp.p();
        let l = self.nnp.kernel();
        let v = self.nnp.features();
        let mut c = DVector::zeros(k + p);
        for (r, &j) in self.items.iter().enumerate() {
            c[r] = l[(i, j)];
        }
        for r in 0..p {
            c[k + r] = v[(i, r)];
        }
        c
    }

    /// Insertion ratio `w(X ∪ i)/w(X)` and its update data.
    fn add_ratio(&self, i: usize) -> (f64, DVector<f64>) {
        let c = self.border_column(i);
        let u = &self.inv * &c;
        let schur = self.nnp.kernel()[(i, i)] - c.dot(&u);
        (schur, u)
    }

    /// Applies an accepted insertion, placing the new item before the
    /// feature rows.
    fn apply_add(&mut self, i: usize, u: &DVector<f64>, schur: f64) {
        let k = self.items.len();
        let p = self.nnp.p();
        let s = k + p;
        let map = |r: usize| if r < k { r } else { r + 1 };
        let mut new_inv = DMatrix::zeros(s + 1, s + 1);
        for a in 0..s {
            for b in 0..s {
                new_inv[(map(a), map(b))] = self.inv[(a, b)] + u[a] * u[b] / schur;
            }
            new_inv[(map(a), k)] = -u[a] / schur;
            new_inv[(k, map(a))] = -u[a] / schur;
        }
        new_inv[(k, k)] = 1.0 / schur;
        self.inv = new_inv;
        self.items.push(i);
        self.member[i] = true;
    }

    /// Removal ratio `w(X \ items[t])/w(X)`.
    fn remove_ratio(&self, t: usize) -> f64 {
        self.inv[(t, t)]
    }

    /// Applies an accepted removal of the item at row `t`.
    fn apply_remove(&mut self, t: usize) {
        self.inv = Self::downdated(&self.inv, t);
        let removed = self.items.remove(t);
        self.member[removed] = false;
    }

    fn downdated(inv: &DMatrix<f64>, t: usize) -> DMatrix<f64> {
        let s = inv.nrows();
        let btt = inv[(t, t)];
        let mut out = DMatrix::zeros(s - 1, s - 1);
        let map = |r: usize| if r < t { r } else { r + 1 };
        for a in 0..s - 1 {
            for b in 0..s - 1 {
                let (ra, rb) = (map(a), map(b));
                out[(a, b)] = inv[(ra, rb)] - inv[(ra, t)] * inv[(t, rb)] / btt;
            }
        }
        out
    }

    fn current_set(&self) -> SampleSet {
        SampleSet::from_unsorted(self.items.clone()).expect("chain items are distinct")
    }

    fn fresh_weight(&self, items: &[usize]) -> f64 {
        let x = SampleSet::from_unsorted(items.to_vec()).expect("distinct items");
        self.nnp.unnormalized_pmf(&x).expect("indices in range")
    }
}

/// Runs the Gibbs chain and returns the recorded states.
///
/// The initial state is one exact mixture draw, so burn-in is a safety
/// margin rather than a necessity. Proposals into zero-mass states (too
/// few items, rank-deficient features, `|X| > p + q`) have acceptance
/// probability zero. Acceptance follows `p = w'/(w + w')`, computed from
/// the maintained bordered inverse; the inverse is rebuilt from scratch
/// every [`REBUILD_INTERVAL`] accepted moves, at which point the
/// incremental ratio is cross-checked against fresh determinants.
pub fn gibbs_chain(nnp: &Nnp, config: &GibbsConfig, state: &RngState) -> Result<GibbsRun> {
    config.validate(nnp)?;
    let n = nnp.n();
    let mut rng = state.rng();
    let initial = match config.mode {
        GibbsMode::Varying => sample_varying(nnp, &mut rng)?,
        GibbsMode::Fixed(m) => sample_fixed(nnp, m, &mut rng)?,
    };
    let mut chain = BorderedState::new(nnp, &initial)?;
    let mut diag = GibbsDiagnostics::default();
    let mut samples = Vec::with_capacity(config.iterations);

    let max_items = nnp.p() + nnp.q();
    let total_sweeps = config.burn_in + (config.iterations - 1) * config.thin;

    for sweep in 1..=total_sweeps {
        for _ in 0..n {
            diag.proposals += 1;
            match config.mode {
                GibbsMode::Varying => {
                    let i = rng.random_range(0..n);
                    if chain.member[i] {
                        let t = chain.items.iter().position(|&j| j == i).expect("member");
                        let ratio = chain.remove_ratio(t).max(0.0);
                        if rng.random::<f64>() < barker(ratio) {
                            accept_remove(&mut chain, t, ratio, &mut diag)?;
                        }
                    } else {
                        if chain.size() >= max_items {
                            // w(X ∪ i) = 0 by rank: always rejected.
                            continue;
                        }
                        let (schur, u) = chain.add_ratio(i);
                        let ratio = schur.max(0.0);
                        if rng.random::<f64>() < barker(ratio) {
                            accept_add(&mut chain, i, &u, schur, ratio, &mut diag)?;
                        }
                    }
                }
                GibbsMode::Fixed(_) => {
                    let k = chain.size();
                    if k == 0 || k == n {
                        continue;
                    }
                    let t = rng.random_range(0..k);
                    let out_count = n - k;
                    let mut pick = rng.random_range(0..out_count);
                    let mut incoming = usize::MAX;
                    for j in 0..n {
                        if !chain.member[j] {
                            if pick == 0 {
                                incoming = j;
                                break;
                            }
                            pick -= 1;
                        }
                    }
                    propose_swap(&mut chain, t, incoming, &mut rng, &mut diag)?;
                }
            }
        }
        if sweep >= config.burn_in && (sweep - config.burn_in).is_multiple_of(config.thin) {
            samples.push(chain.current_set());
            if samples.len() == config.iterations {
                break;
            }
        }
    }
    Ok(GibbsRun {
        samples,
        diagnostics: diag,
    })
}

fn accept_add(
    chain: &mut BorderedState,
    i: usize,
    u: &DVector<f64>,
    schur: f64,
    ratio: f64,
    diag: &mut GibbsDiagnostics,
) -> Result<()> {
    diag.accepted += 1;
    if diag.accepted.is_multiple_of(REBUILD_INTERVAL) {
        cross_check_ratio(chain, ratio, Some(i), None, diag);
        chain.items.push(i);
        chain.member[i] = true;
        diag.rebuilds += 1;
        chain.rebuild()
    } else {
        chain.apply_add(i, u, schur);
        Ok(())
    }
}

fn accept_remove(
    chain: &mut BorderedState,
    t: usize,
    ratio: f64,
    diag: &mut GibbsDiagnostics,
) -> Result<()> {
    diag.accepted += 1;
    if diag.accepted.is_multiple_of(REBUILD_INTERVAL) {
        cross_check_ratio(chain, ratio, None, Some(t), diag);
        let removed = chain.items.remove(t);
        chain.member[removed] = false;
        diag.rebuilds += 1;
        chain.rebuild()
    } else {
        chain.apply_remove(t);
        Ok(())
    }
}

/// Recomputes the accepted move's ratio from two fresh bordered
/// determinants and records the relative disagreement.
fn cross_check_ratio(
    chain: &BorderedState,
    incremental: f64,
    added: Option<usize>,
    removed_pos: Option<usize>,
    diag: &mut GibbsDiagnostics,
) {
    let w_old = chain.fresh_weight(&chain.items);
    let mut next = chain.items.clone();
    if let Some(i) = added {
        next.push(i);
    }
    if let Some(t) = removed_pos {
        next.remove(t);
    }
    let w_new = chain.fresh_weight(&next);
    if w_old > 0.0 {
        let fresh = w_new / w_old;
        let denom = fresh.abs().max(1e-12);
        let err = (incremental - fresh).abs() / denom;
        diag.max_ratio_error = diag.max_ratio_error.max(err);
        diag.ratio_checks += 1;
    }
}

/// Swap proposal for the fixed-size chain: remove the item at row `t`,
/// insert `incoming`. The ratio is a product of the removal ratio and the
/// insertion ratio in the downdated state; when the intermediate state is
/// singular (removal can drop the feature rank) the ratio falls back to two
/// fresh determinants.
fn propose_swap(
    chain: &mut BorderedState,
    t: usize,
    incoming: usize,
    rng: &mut SamplerRng,
    diag: &mut GibbsDiagnostics,
) -> Result<()> {
    let r1 = chain.remove_ratio(t);
    if r1 > 1e-12 {
        let scratch = BorderedState::downdated(&chain.inv, t);
        // Insertion ratio computed against the downdated inverse.
        let c = chain.border_column(incoming);
        let s = c.len();
        let mut c_small = DVector::zeros(s - 1);
        for r in 0..s - 1 {
            c_small[r] = c[if r < t { r } else { r + 1 }];
        }
        let u = &scratch * &c_small;
        let schur = chain.nnp.kernel()[(incoming, incoming)] - c_small.dot(&u);
        let ratio = (r1 * schur.max(0.0)).max(0.0);
        if rng.random::<f64>() < barker(ratio) {
            diag.accepted += 1;
            if diag.accepted.is_multiple_of(REBUILD_INTERVAL) {
                cross_check_swap(chain, ratio, t, incoming, diag);
            }
            chain.inv = scratch;
            let removed = chain.items.remove(t);
            chain.member[removed] = false;
            if diag.accepted.is_multiple_of(REBUILD_INTERVAL) {
                chain.items.push(incoming);
                chain.member[incoming] = true;
                diag.rebuilds += 1;
                chain.rebuild()?;
            } else {
                chain.apply_add(incoming, &u, schur);
            }
        }
        Ok(())
    } else {
        // Intermediate state singular; evaluate the swap directly.
        let w_old = chain.fresh_weight(&chain.items);
        let mut next = chain.items.clone();
        next[t] = incoming;
        let w_new = chain.fresh_weight(&next);
        if w_old <= 0.0 {
            return Err(Error::SingularState);
        }
        let ratio = (w_new / w_old).max(0.0);
        if rng.random::<f64>() < barker(ratio) {
            diag.accepted += 1;
            let outgoing = chain.items[t];
            chain.items[t] = incoming;
            chain.member[outgoing] = false;
            chain.member[incoming] = true;
            diag.rebuilds += 1;
            chain.rebuild()?;
        }
        Ok(())
    }
}

fn cross_check_swap(
    chain: &BorderedState,
    incremental: f64,
    t: usize,
    incoming: usize,
    diag: &mut GibbsDiagnostics,
) {
    let w_old = chain.fresh_weight(&chain.items);
    let mut next = chain.items.clone();
    next[t] = incoming;
    let w_new = chain.fresh_weight(&next);
    if w_old > 0.0 {
        let fresh = w_new / w_old;
        let denom = fresh.abs().max(1e-12);
        diag.max_ratio_error = diag.max_ratio_error.max((incremental - fresh).abs() / denom);
        diag.ratio_checks += 1;
    }
}
