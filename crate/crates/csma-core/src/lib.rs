//! Slotted CSMA/CA scheduling on conflict graphs.
//!
//! This crate models a slotted random-access protocol in which links of a
//! conflict graph contend for the medium: a link that senses its neighbors
//! idle attempts transmission with a fixed probability, simultaneous
//! conflicting attempts collide for a probe length, and successful
//! transmissions carry an overhead plus a payload whose mean length is the
//! controlled quantity. Four layers are provided:
//!
//! - [`graph`]: conflict graphs, on-off states, independent sets;
//! - [`stationary`]: the exact product-form stationary distribution, service
//!   rates, and the concave log-likelihood objective;
//! - [`optimizer`]: feasibility of arrival-rate vectors, the unique exponent
//!   vector matching service to arrival rates, and capacity-region bounds;
//! - [`sim`] and [`adaptive`]: a slot-level protocol simulator plus the
//!   stochastic-approximation controllers that adapt payload lengths online;
//! - [`oracle`]: a brute-force Markov-chain solver used as ground truth for
//!   the analytical layer.
//!
//! [`presets`] collects the graph topologies and parameter sets used by the
//! bundled experiments and the CLI.

pub mod adaptive;
pub mod error;
pub mod graph;
mod linalg;
pub mod optimizer;
pub mod oracle;
pub mod presets;
pub mod sim;
pub mod simplex;
pub mod stationary;

pub use error::{Error, Result};
pub use graph::{classify, independent_sets, Classification, ConflictGraph, OnOffState};
pub use optimizer::{
    feasibility, r_lower_bound, region_check, solve_rstar, theorem4_bound, ArrivalRates,
    FeasibilityReport, FeasibilityStatus, RStarResult,
};
pub use stationary::{
    log_likelihood, onoff_distribution, service_rates, Analyzer, DetailedState, LengthExponents,
    OnOffDistribution, ProtocolParams,
};
