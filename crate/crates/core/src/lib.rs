//! Series quantile regression: estimation of the whole conditional quantile
//! process `u ↦ Z(x)'β(u)`, and pointwise or uniform inference on linear
//! functionals of it through pivotal, Gaussian, weighted-bootstrap and
//! gradient-bootstrap couplings.
//!
//! The pipeline is
//!
//! 1. [`basis`]: build the series terms `Z(x)`;
//! 2. [`process`]: fit `β̂(u)` over a quantile grid with Gram and Powell
//!    Jacobian estimates;
//! 3. [`coupling`]: simulate draws of `√n(β̂(·) − β(·))`;
//! 4. [`inference`]: studentize linear functionals and form intervals or bands;
//! 5. [`monotone`]: optionally rearrange or isotonize estimates and bands.
//!
//! [`sim`] hosts the Monte Carlo lab and [`cli`] the command-line front end.

pub mod basis;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod monotone;
pub mod normal;
pub mod process;
pub mod rng;
pub mod sim;
pub mod solver;

pub use basis::{make_basis, BasisConfig, BasisSpec, Family, Measure};

pub use coupling::{CouplingMethod, GradientPath, ProcessDraws};
pub use error::{Error, Result};
pub use inference::{ConfidenceBand, FunctionalSpec, TStatProcess};
pub use process::{fit_process, CoefficientProcess, QuantileGrid};

pub use solver::{check_loss, solve_qr, Dataset, QrFit};
