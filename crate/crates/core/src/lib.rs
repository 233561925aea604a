//! Projection-free primal-dual flows on the proximal augmented Lagrangian.
//!
//! Solves composite programs
//!
//! ```text
//! minimize f(x) + φ(Tx)  subject to  g(x) ⪯ 0,  h(x) = 0
//! ```
//!
//! with smooth convex `f`, `g`, affine `h` and a nonsmooth `φ` with a closed-form
//! prox, by integrating a smooth ODE whose equilibria are the KKT points.

// `!(x > 0.0)` is how parameter checks reject NaN along with the bad range,
// and the integrator kernels index several arrays in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod network;
pub mod ode;
pub mod oracle;
pub mod problem;
pub mod prox;
pub mod registry;
pub mod run;
pub mod schema;

pub use dynamics::{DynamicsParams, PrimalDualState};
pub use error::{Error, Result};
pub use network::{Graph, NetworkSpec, NetworkState};
pub use ode::{IntegratorConfig, Method, Solution, StopReason, Trajectory};
pub use oracle::{Oracle, SmoothFunction};
pub use problem::{KktPoint, ProblemSpec, ResidualReport};
pub use prox::{ProxFunction, ProxKind, SmoothingParam};
pub use registry::ProblemInstance;

pub type Vector = nalgebra::DVector<f64>;
