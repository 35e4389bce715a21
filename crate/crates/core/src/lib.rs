//! Minimum adversarial perturbations for nearest-neighbor classifiers.
//!
//! For a 1-NN model the smallest Euclidean perturbation that changes a
//! prediction is the minimum over other-class targets of a small QP: stay on
//! the target's side of every bisector with a same-class point. The crate
//! solves those QPs through their dual with greedy coordinate ascent, prunes
//! targets with dual bounds, and derives both certified lower bounds
//! ([`verify`]) and attacks ([`attack`]) for K-NN. [`lp`] covers the
//! l-infinity and l1 norms.

pub mod attack;
pub mod cli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod qp;
pub mod subproblem;
pub mod verify;

pub use attack::{
    exact_1nn, is_adversarial, mean_attack, naive_attack, qp_greedy_knn, qp_top_m, CertificateKind,
    PerturbationCertificate, SearchConfig, SearchStats,
};
pub use data::{knn_predict, load_csv, load_queries, Dataset, Label, Query, TieRule};
pub use error::{Error, Result};
pub use lp::{exact_1nn_lp, LpNorm};
pub use qp::{solve_dual_gca, SolverConfig};
pub use verify::{verify_1nn, verify_knn, VerificationResult};
