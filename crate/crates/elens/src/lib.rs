//! # elens
//!
//! Determinantal point processes (DPPs) through the *extended L-ensemble*
//! representation.
//!
//! A DPP is a random subset of a finite ground set whose inclusion
//! probabilities are principal minors of a marginal kernel `K` with
//! `0 ⪯ K ⪯ I`. Classical L-ensembles (`P(X) ∝ det L_X`) only cover the
//! kernels with no unit eigenvalue. This crate works with the representation
//! that covers all of them: a *nonnegative pair* `(L; V)` — a symmetric
//! kernel matrix `L` that is conditionally positive semi-definite with
//! respect to a full-column-rank feature matrix `V` — with probability mass
//!
//! ```text
//! P(X) ∝ (-1)^p det [ L_X      V_X ]
//!                   [ V_Xᵀ     0   ]
//! ```
//!
//! The `p` columns of `V` are "obligatory" directions: they are always part
//! of the sample, which is why these processes are also called partial
//! projection DPPs.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`linalg`] | saddle-point determinants, elementary symmetric polynomials, rank-revealing orthonormalization, truncated projected spectra |
//! | [`ensemble`] | the `(L; V)` model: validation, PMF, normalization, marginal kernel, size law, complements, kernel round-trips |
//! | [`sampling`] | exact samplers (projection, Bernoulli, fixed-size, mixture, low-rank) and a Gibbs MCMC sampler, all seeded |
//! | [`kernels`] | model constructions from data: distance-power (CPD) kernels, Gaussian L-ensembles, forest-roots processes, interpolation |
//! | [`oracle`] | brute-force enumeration ground truth and the identity/limit checkers |
//! | [`verify`] | the randomized acceptance battery driven by the CLI `verify` command and the `acceptance` test target |
//!
//! ## Quick start
//!
//! ```rust
//! use elens::ensemble::Nnp;
//! use elens::sampling::{sample_varying, RngState};
//! use nalgebra::{dmatrix, DMatrix};
//!
//! // A plain L-ensemble (p = 0): any PSD kernel works.
//! let l = dmatrix![2.0, 1.0; 1.0, 3.0];
//! let nnp = Nnp::build(l, DMatrix::zeros(2, 0), 1e-10).unwrap();
//!
//! let mut rng = RngState::new(7).rng();
//! let x = sample_varying(&nnp, &mut rng).unwrap();
//! assert!(nnp.unnormalized_pmf(&x).unwrap() > 0.0);
//! ```
//!
//! Ground-set indices are 0-based everywhere, including in files written by
//! the companion CLI.
//!
//! All samplers are deterministic functions of `(model, config, seed)`; the
//! generator is ChaCha12, and its name travels with every output so runs can
//! be reproduced.

pub mod ensemble;
mod error;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod sampling;
pub mod verify;

pub use error::{Error, ErrorCategory, Result};

// The matrix types in the public API come from nalgebra; re-exported so
// downstream crates do not need to pin a matching version themselves.
pub use nalgebra;
