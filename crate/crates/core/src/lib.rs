//! Lock-free asynchronous and low-precision stochastic algorithms, with
//! martingale-based convergence bounds and Monte-Carlo checks of them.
//!
//! * [`engine`]: sequential, lock-free multi-threaded and simulated-delay
//!   executors over a shared atomic parameter vector.
//! * [`fixedpoint`]: unbiased stochastic rounding to 8/16-bit codes.
//! * [`convex_sgd`]: Hogwild and Buckwild drivers for GLMs and quadratics.
//! * [`alecton`]: rank-1 stochastic power iteration from entry samples.
//! * [`martingale`]: rate supermartingales, the delay-compensated process,
//!   and the failure bounds they imply.
//! * [`data_io`]: libsvm loading, synthetic benchmarks, quantized datasets.
//! * [`cli`]: the `wildtamer` command line.

pub mod alecton;
pub mod cli;
pub mod convex_sgd;
pub mod data_io;
pub mod engine;
pub mod error;
pub mod fixedpoint;
pub mod martingale;
pub mod model;

pub use error::{Error, Result};
