//! Optimal trial and tiered-pricing mechanisms for selling an experience good
//! whose seller privately knows the match quality, while the buyer learns it
//! from Poisson good-news arrivals.
//!
//! The crate computes the analytic solutions and ships independent
//! verifiers for every one of them:
//!
//! * [`primitives`] — value distributions, virtual values, model conditions.
//! * [`trial_solver`] — optimal trial `(p₀, t₀, v₀)` for any frontier weight,
//!   the Myersonian free trial and the first-best test.
//! * [`frontier`] — the seller-payoff frontier, equilibrium membership, the
//!   refinement-surviving segment.
//! * [`mechanism`] — direct mechanisms and exhaustive grid IC/IR checks.
//! * [`simulate`] — seeded, thread-count-independent Monte Carlo of the game.
//! * [`oracle`] — brute-force control and discretized mechanism search.
//! * [`tiered`] — general screening menus and dynamic tiered pricing.
//! * [`extensions`] — discounting, cancellable trials, bad and mixed news.
//!
//! Bulk computations run on rayon when the `parallel` feature is enabled
//! (default); see [`par::Exec`].

pub mod error;
pub mod extensions;
pub mod frontier;
pub mod mechanism;
pub mod numerics;
pub mod oracle;
pub mod par;
pub mod primitives;
pub mod simulate;
pub mod tiered;
pub mod trial_solver;

pub use error::{Error, ErrorClass, Result};
pub use par::Exec;
pub use primitives::{DistOptions, Family, ModelParams, ValueDistribution};
pub use trial_solver::{SolveReport, TrialMechanism};
