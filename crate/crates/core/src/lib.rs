//! Numerical lab for the radial 3D wave equation with a Hartree-type cubic
//! nonlinearity `(|x|^-gamma * u^2) u`, `0 < gamma < 3`.

pub mod analysis;
pub mod blowup;
pub mod convolution;
pub mod error;
pub mod evolution;
pub mod io;
pub mod quad;
pub mod radial;
pub mod sweep;

pub use convolution::{hartree_potential, hartree_potential_mc, kernel_integral, Gamma, HartreeOperator, Regime};
pub use error::{Error, Result};
pub use evolution::{
    lifespan_estimate, solve, solve_fd_fastpath, GridPolicy, LifespanEstimate, NonlinearityField, SolveReport, Solver,
    SolverOptions, SpaceTimeField, Termination,
};
pub use radial::{
    dt_w_operator, free_solution, spherical_mean, w_operator, DataFamily, Grid, InitialDataSet, RadialFunction,
    RadialProfile, Tail,
};
pub use sweep::SweepFit;
