//! Numerical laboratory for the Anderson model `H = T + λV` on regular trees.
//!
//! * [`disorder`]: single-site distributions, reproducible sampling, minimal
//!   function and regularity constant.
//! * [`tree`]: rooted K-ary trees, forward Green-function recursion, free
//!   closed forms.
//! * [`oracle`]: dense brute-force resolvents and ground states.
//! * [`lyapunov`]: Lyapunov-exponent estimators, delocalization criterion,
//!   ac density, fractional moments.
//! * [`phase`]: (λ, E) phase grids and the spectral-edge window.
//! * [`verify`]: checks of each step of the spectral-edge argument.
//! * [`scatter`]: reflection off a wire attached to the tree.
//! * [`cli`]: the `bethe-lab` command line.

pub mod cli;
pub mod disorder;
pub mod error;
pub mod lyapunov;
pub mod oracle;
pub mod phase;
pub mod scatter;
pub mod stats;
pub mod streams;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};

/// Tool version embedded in every output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
