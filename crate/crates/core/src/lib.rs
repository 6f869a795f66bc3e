//! Robust quantile hedging on discretized semi-static markets.
//!
//! The engine prices path-dependent claims in a discrete-time market of one
//! stock (traded dynamically) and a finite set of options (traded statically),
//! under model uncertainty given by a convex set of probability measures on a
//! dyadic price lattice. Everything reduces to linear programming:
//!
//! * [`lattice`] builds the dyadic path space, its cells, and claim payoffs;
//! * [`models`] turns base models or joint linear constraints into an
//!   uncertainty polytope over path probabilities;
//! * [`linprog`] is the self-contained simplex core;
//! * [`pricing`] holds the option-consistent martingale cone, no-arbitrage
//!   certification, and superhedging;
//! * [`quantile`] computes maximum expected success ratios, optimal randomized
//!   tests, and quantile hedging prices by inverting the value curve;
//! * [`continuum`] extends lattice strategies back to the original market and
//!   quantifies the discretization error.

pub mod continuum;
pub mod error;
pub mod lattice;
pub mod linprog;
pub mod models;
pub mod pricing;
pub mod quantile;

pub use error::EngineError;
pub use lattice::{CellInterval, MarketSpec, OptionSpec, PathLattice, PayoffSpec};
pub use linprog::{LinearProgram, LpSolution, LpStatus};
pub use models::{AtomicBaseModel, JointConstraints, KernelSet, MismatchReport, ModelPolytope};
pub use pricing::{MartingaleCone, NaCertificate, Strategy};
pub use quantile::{QuantilePriceResult, SaddleReport, SuccessTest, ValuePoint};
