//! Numerical toolkit for age-structured population dynamics with birth control.
//!
//! The model under study is a McKendrick-type transport equation with spatial
//! diffusion on an interval, a mortality sink and a nonlocal renewal boundary
//! condition coupling newborns to the fertile population:
//!
//! ```text
//! ∂_t y + ∂_a y − Δy + μ(a) y = 0                in Ω × (0,A) × (0,T),
//! ∂_ν y = 0                                       on ∂Ω,
//! y(x,0,t) = 1_ω(x) v(x,t) + ∫₀^A β(x,a) y da    (renewal + birth control),
//! y(x,a,0) = y₀(x,a).
//! ```
//!
//! Expanding in the Neumann-Laplacian cosine basis decouples the problem into
//! independent age-transport systems per spatial mode, each damped by the mode
//! eigenvalue. The crate provides, per mode and aggregated:
//!
//! * [`demography`] — mortality, fertility, survival probability, reproduction
//!   number and the Lotka growth root;
//! * [`spectral`] — the cosine eigenbasis, projection/reconstruction and the
//!   diagonal heat semigroup;
//! * [`transport`] — exact characteristic marching of the modal state with
//!   distributed or birth controls;
//! * [`nullcontrol`] — closed-form null controls (band-distributed and birth),
//!   the short-horizon obstruction witness and the band-width limit study;
//! * [`lqr`] — modal LTI assembly, differential/algebraic Riccati solvers,
//!   Lyapunov/dichotomy transforms, direct (KKT) and static LQ solvers;
//! * [`turnpike`] — deviation curves, exponential envelope fits, the integral
//!   turnpike measure and the strict-dissipativity check;
//! * [`config`], [`commands`], [`output`] — scenario files, the four CLI
//!   commands (`simulate`, `nullcontrol`, `lq`, `sweep`) and CSV/SVG emission.
//!
//! Most capabilities have a runnable demo under `examples/`.

pub mod commands;
pub mod config;
pub mod demography;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod lqr;
pub mod nullcontrol;
pub mod output;
pub mod spectral;
pub mod transport;
pub mod turnpike;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
