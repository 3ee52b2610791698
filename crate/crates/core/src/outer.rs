//! Projected gradient ascent over constraint-point tuples.
//!
//! `gradol_solve` maximizes the inner program's value over tuples
//! `U = (u_1, ..., u_q)` from the uncertainty set: solve the barrier problem at
//! the current tuple (warm-started), differentiate its optimal value with the
//! envelope identity, take an ascent step, and project every point back into
//! the set. The loop ascends the underlying value (the envelope gradient of
//! the barrier value scaled by `1/alpha`; at a barrier stationary point the
//! two directions agree up to that positive factor), so steps are O(1)-scaled
//! and the Table-style reports quote the underlying optimum.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad;
use crate::inner::{
    feasible_init, solve_inner, underlying_value, BarrierObjective, InnerConstraint, InnerError,
    InnerSolution,
};
use crate::problem::{Point, Problem};
use crate::sets::{SetError, UncertaintySet};

#[derive(Debug, Clone, Error)]
pub enum OuterError {
    #[error(transparent)]
    Inner(#[from] InnerError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("barrier slack {slack:.3e} too small for a stable envelope gradient")]
    SlackViolation { slack: f64 },
    #[error("report carries no final tuple/gradient; solve with diagnostics enabled")]
    MissingDiagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gradol,
    Sampling,
    Annealing,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gradol => "gradol",
            Method::Sampling => "sampling",
            Method::Annealing => "annealing",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxEpochs,
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iter: usize,
    pub value: f64,
    pub step_norm: f64,
}

/// Hyperparameters echoed into every report for reproducibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperparamsEcho {
    pub eta: f64,
    pub alpha: f64,
    pub delta: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub adaptive_eta: bool,
}

/// Outcome of a solve, the unit every front end consumes and serializes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub problem: String,
    /// Underlying optimum estimate: squared radius for Chebyshev problems,
    /// objective value for general programs.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub outer_iters: usize,
    pub termination: Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
    pub wall_ms: f64,
    pub hyperparams: HyperparamsEcho,
    /// Tuple at the last gradient evaluation; feeds [`goldstein_diagnostic`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_tuple: Option<Vec<Point>>,
    /// Ascent gradient (already scaled by 1/alpha) at `final_tuple`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_gradient: Option<Vec<Point>>,
    /// Every visited tuple; populated only when requested, for invariants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuple_trace: Option<Vec<Vec<Point>>>,
}

/// Solver knobs; defaults follow the reported experiment settings.
#[derive(Clone, Debug)]
pub struct GradolParams {
    pub eta: f64,
    pub alpha: f64,
    pub delta: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Halve the step on a value decrease; reset to the base step every 50
    /// iterations.
    pub adaptive_eta: bool,
    pub record_trajectory: bool,
    pub record_tuples: bool,
    /// Cross-validation path: differentiate through a gradient-descent suffix
    /// instead of applying the envelope identity (Chebyshev form only).
    pub use_unrolled_gradient: bool,
    /// Wall-clock budget; exceeding it terminates the run as `Stalled`.
    pub budget: Option<std::time::Duration>,
}

impl Default for GradolParams {
    fn default() -> Self {
        GradolParams {
            eta: 0.1,
            alpha: 1e5,
            delta: 1e-3,
            max_epochs: 10_000,
            seed: 0,
            adaptive_eta: false,
            record_trajectory: true,
            record_tuples: false,
            use_unrolled_gradient: false,
            budget: None,
        }
    }
}

impl GradolParams {
    pub fn echo(&self) -> HyperparamsEcho {
        HyperparamsEcho {
            eta: self.eta,
            alpha: self.alpha,
            delta: self.delta,
            max_epochs: self.max_epochs,
            seed: self.seed,
            adaptive_eta: self.adaptive_eta,
        }
    }
}

/// Euclidean projection of one point into the uncertainty set.
pub fn project(point: &Point, set: &UncertaintySet) -> Result<Point, SetError> {
    set.project(point)
}

/// Derivative of the barrier optimal value with respect to each constraint
/// point, via the envelope identity: at the inner optimum the (t, x)-gradient
/// vanishes, so only the explicit dependence on the points remains.
///
/// Returns one block per point-bearing constraint, in constraint order,
/// unscaled (magnitudes are O(alpha) for active constraints).
pub fn envelope_gradient(
    sol: &InnerSolution,
    obj: &BarrierObjective,
) -> Result<Vec<Point>, OuterError> {
    debug_assert!(
        sol.grad_norm <= crate::inner::INNER_GRAD_TOL,
        "envelope gradient needs a stationary inner solution"
    );
    let mut blocks = Vec::new();
    let xs = sol.x_star.as_slice();
    for (c, &s) in obj.constraints().iter().zip(&sol.slacks) {
        match c {
            InnerConstraint::SquaredDist(u) => {
                if s <= 1e-14 {
                    return Err(OuterError::SlackViolation { slack: s });
                }
                blocks.push(Point::new(
                    (0..u.dim()).map(|k| 2.0 * (u[k] - xs[k]) / s).collect(),
                ));
            }
            InnerConstraint::Inequality { g, u: Some(u) } => {
                if s <= 1e-14 {
                    return Err(OuterError::SlackViolation { slack: s });
                }
                let gu = ad::grad_u(g, &sol.x_star, u).map_err(InnerError::from)?;
                blocks.push(Point::new(gu.as_slice().iter().map(|v| v / s).collect()));
            }
            InnerConstraint::Epigraph(_) | InnerConstraint::Inequality { u: None, .. } => {}
        }
    }
    Ok(blocks)
}

/// Projected-step stationarity measure at the report's final tuple:
/// `||U - project(U + gamma * grad)|| / gamma`. Diagnostic only.
pub fn goldstein_diagnostic(
    problem: &Problem,
    report: &SolveReport,
    gamma: f64,
) -> Result<f64, OuterError> {
    let tuple = report
        .final_tuple
        .as_ref()
        .ok_or(OuterError::MissingDiagnostics)?;
    let grad = report
        .final_gradient
        .as_ref()
        .ok_or(OuterError::MissingDiagnostics)?;
    let mut moved_sq = 0.0;
    for (u, g) in tuple.iter().zip(grad) {
        let stepped = problem.uncertainty.project(&u.axpy(gamma, g))?;
        moved_sq += u.dist_sq(&stepped);
    }
    Ok(moved_sq.sqrt() / gamma)
}

/// Projected gradient ascent of the inner value over tuples from the
/// uncertainty set.
pub fn gradol_solve(problem: &Problem, params: &GradolParams) -> Result<SolveReport, OuterError> {
    use rand::SeedableRng;
    let start = Instant::now();
    let q = problem.tuple_size();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(params.seed);
    let mut tuple: Vec<Point> = (0..q).map(|_| problem.uncertainty.sample(&mut rng)).collect();

    let mut warm: Option<(f64, Point)> = None;
    let mut trajectory = Vec::new();
    let mut tuple_trace: Vec<Vec<Point>> = Vec::new();
    let mut eta = params.eta;
    let mut prev_value = f64::NEG_INFINITY;
    let mut consecutive_decreases = 0usize;

    let mut last: Option<(InnerSolution, f64, Vec<Point>, Vec<Point>)> = None;
    let mut termination = Termination::MaxEpochs;
    let mut iters = 0usize;

    for k in 0..params.max_epochs {
        iters = k + 1;
        if let Some(budget) = params.budget {
            if start.elapsed() >= budget {
                termination = Termination::Stalled;
                break;
            }
        }
        if params.record_tuples {
            tuple_trace.push(tuple.clone());
        }

        let obj = BarrierObjective::for_problem(problem, &tuple, params.alpha);
        let sol = solve_inner(&obj, warm.take())?;
        let value = underlying_value(&sol, &obj).value;

        let raw = if params.use_unrolled_gradient && obj.is_chebyshev() {
            let start_z = feasible_init(&obj)?;
            ad::unrolled_gradient(&obj, (start_z.0, &start_z.1), 64)?
        } else {
            envelope_gradient(&sol, &obj)?
        };
        let scaled: Vec<Point> = raw.iter().map(|g| g.scale(1.0 / params.alpha)).collect();

        let mut next = Vec::with_capacity(q);
        let mut step_sq = 0.0;
        for (u, g) in tuple.iter().zip(&scaled) {
            let stepped = problem.uncertainty.project(&u.axpy(eta, g))?;
            step_sq += u.dist_sq(&stepped);
            next.push(stepped);
        }
        let step_norm = step_sq.sqrt();

        if params.record_trajectory {
            trajectory.push(TrajectoryPoint {
                iter: k,
                value,
                step_norm,
            });
        }
        warm = Some((sol.t_star, sol.x_star.clone()));
        last = Some((sol, value, tuple.clone(), scaled));

        if params.adaptive_eta {
            if k % 50 == 0 {
                eta = params.eta;
            }
            if value < prev_value {
                eta *= 0.5;
            }
        }
        if value < prev_value - 1e-12 {
            consecutive_decreases += 1;
            if consecutive_decreases >= 50 {
                termination = Termination::Stalled;
                tuple = next;
                break;
            }
        } else {
            consecutive_decreases = 0;
        }
        prev_value = value;

        tuple = next;
        if step_norm < params.delta {
            termination = Termination::Converged;
            break;
        }
    }

    let (sol, value, final_tuple, final_gradient) =
        last.expect("max_epochs >= 1 guarantees at least one iteration");
    let (center, radius) = if problem.is_chebyshev() {
        (Some(sol.x_star.clone()), Some(value.max(0.0).sqrt()))
    } else {
        (None, None)
    };
    Ok(SolveReport {
        method: Method::Gradol,
        problem: problem.name.clone(),
        value,
        center,
        radius,
        outer_iters: iters,
        termination,
        trajectory: params.record_trajectory.then_some(trajectory),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        hyperparams: params.echo(),
        final_tuple: Some(final_tuple),
        final_gradient: Some(final_gradient),
        tuple_trace: params.record_tuples.then_some(tuple_trace),
    })
}
