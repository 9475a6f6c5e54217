//! Capacity bounds for discrete-time FIFO queue timing channels.
//!
//! The crate computes the full-feedback capacity `C_F(λ)` of a single-server
//! queue with i.i.d. integer service times, together with the upper bound on
//! the capacity under generalized feedback (the transmitter observes service
//! entry `b_i` and `c_i = min(d_i, b_i + τ)`). Both quantities reduce to
//! entropy maximizations over laws on the nonnegative integers under a mean
//! constraint, solved in [`entmax`]. [`kkt`] re-derives the stationarity
//! structure of those optima independently of the solver, [`capacity`]
//! assembles curves and gap verdicts, and [`queuesim`] validates the queue
//! reductions by exact enumeration and simulation.
//!
//! Entropies are in nats internally; capacity values are reported in bits.

pub mod capacity;
pub mod dist;
pub mod entmax;
pub mod kkt;
pub mod queuesim;
mod scalar;

pub use scalar::Scalar;

pub type Pmf64 = dist::Pmf<f64>;
pub type ServiceModel64 = dist::ServiceModel<f64>;
pub type EntMaxSolution64 = entmax::EntMaxSolution<f64>;
pub type StationarityReport64 = kkt::StationarityReport<f64>;
pub type ToeplitzSystem64 = kkt::ToeplitzSystem<f64>;

/// Exact weights for enumerated departure laws.
pub type ExactWeight = num_rational::Ratio<i64>;
