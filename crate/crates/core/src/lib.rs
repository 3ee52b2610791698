//! Solvers for Chebyshev center problems and convex semi-infinite programs (CSIPs).
//!
//! The centerpiece is a max-min reformulation: instead of handling the continuum
//! of constraints directly, the solver maximizes the value of a small constrained
//! convex program over tuples of constraint points drawn from the uncertainty set.
//! The inner program is solved with a log-barrier Newton method and differentiated
//! at its optimum, which drives a projected gradient ascent over the tuple.
//!
//! Modules:
//!
//! - [`expr`]: expression language for problem files (parser, printer, evaluator)
//! - [`ad`]: automatic differentiation over expressions and the barrier objective
//! - [`inner`]: log-barrier Newton solver for the inner minimization
//! - [`sets`]: uncertainty sets, Euclidean projections, and samplers
//! - [`outer`]: the projected gradient ascent loop (`gradol`) and its reports
//! - [`baselines`]: iterative constraint sampling and simulated annealing
//! - [`oracle`]: independent ground truth (Welzl minimum enclosing ball, grid search)
//! - [`problem`]: problem instances shared by all solvers

pub mod ad;
pub mod baselines;
pub mod expr;
pub mod inner;
mod linalg;
pub mod oracle;
pub mod outer;
pub mod problem;
pub mod sets;

pub use ad::{check_gradient, grad_u, grad_x, hessian_tx, Gradient, HessianMatrix};
pub use baselines::{anneal_solve, sample_solve, AnnealingConfig, SampleOutcome, SamplingConfig};
pub use expr::{evaluate, parse, Expression};
pub use inner::{feasible_init, solve_inner, underlying_value, BarrierObjective, InnerSolution};
pub use oracle::{grid_csip, welzl_meb, Ball};
pub use outer::{
    envelope_gradient, goldstein_diagnostic, gradol_solve, GradolParams, Method, SolveReport,
    Termination,
};
pub use problem::{Point, Problem, ProblemKind};
pub use sets::UncertaintySet;
