//! Numerical viscosity solutions of first-order Hamilton-Jacobi boundary-value
//! problems on the square (-R, R)² by convexification: the equation residual
//! -ε₀Δu + F(x, u, ∇u) is squared, weighted by a Carleman factor
//! exp(2λ((z+r)/b)^β) that grows in z, regularized, and minimized by gradient
//! descent over the grid values that are not pinned by the boundary data.
//!
//! The crate is organized around the pipeline:
//!
//! * [`grid`] — uniform N×N lattice, finite-difference stencils, norms;
//! * [`hamiltonian`] — the F(x, s, p) plug-in interface plus six built-in
//!   benchmark problems with boundary data and (where known) exact solutions;
//! * [`carleman`] — weight evaluation and a numerical probe of the Carleman
//!   inequality that underpins the convexity of the functional;
//! * [`noise`] — reproducible multiplicative noise on boundary data;
//! * [`objective`] — the discrete weighted least-squares functional, its exact
//!   gradient, and the elimination of data-determined grid values;
//! * [`optimizer`] — plain gradient descent with fixed step or Armijo
//!   backtracking, with convergence diagnostics;
//! * [`experiments`] — the benchmark runner with error metrics, CSV dumps and
//!   seeded noise sweeps.
//!
//! # Quick start
//!
//! ```
//! use hjconvex::experiments::{run_test, RunOverrides};
//!
//! let mut overrides = RunOverrides::default();
//! overrides.n = Some(14);          // coarse grid: keep the doctest fast
//! overrides.max_iters = Some(400);
//! let result = run_test(1, 0.0, 1, &overrides, None).unwrap();
//! assert!(result.err_linf_rel.unwrap() < 0.2);
//! ```

pub mod carleman;
pub mod experiments;
pub mod grid;
pub mod hamiltonian;
pub mod io;
pub mod noise;
pub mod objective;
pub mod optimizer;

mod pairwise;

pub use grid::{Grid, NodeClass, ScalarField};
pub use hamiltonian::{builtin_problem, Hamiltonian, Point, Problem, Vec2};
pub use objective::{BoundaryData, DiscreteObjective, DofMap, ObjectiveConfig};
pub use optimizer::{gradient_descent, DescentConfig, DescentStatus, DescentTrace};
