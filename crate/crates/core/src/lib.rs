//! Continuum opinion dynamics on a discretized agent interval.
//!
//! Agents `a` in `[0, 1]` hold opinions `x_t(a)` in `[0, 1]` that evolve by
//!
//! ```text
//! d/dt x_t(a) = int_0^1 w(t, a, b, x_t(a), x_t(b)) (x_t(b) - x_t(a)) db
//! ```
//!
//! [`kernels`] defines the weight rules `w`, [`ensemble`] discretizes and
//! integrates, [`diagnostics`] measures the result, [`counterexample`] holds
//! an exact cycling solution and [`picard`] the contraction-based solver.

// `!(x > 0.0)` is deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexample;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod kernels;
pub mod picard;
pub mod sum;

pub use ensemble::{integrate, rhs, uniform_ensemble, Ensemble, IntegratorConfig, Method, Trajectory};
pub use error::{CounterexampleError, EnsembleError, KernelError, PicardError};
pub use kernels::{finite_consensus_embed, Kernel, Schedule, StepProfile};
