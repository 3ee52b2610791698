//! Log-barrier Newton solver for the inner minimization.
//!
//! For a fixed tuple of constraint points the solver minimizes
//!
//! ```text
//! Phi(t, x) = alpha * t - sum_i l(s_i(t, x))
//! ```
//!
//! where `l` is the safe log `l(s) = ln(max(s, eps))` and each constraint
//! contributes a slack:
//!
//! - squared-distance form (Chebyshev): `s_i = t - ||x - u_i||^2`
//! - epigraph of a declared objective:  `s_0 = t - f(x)`
//! - general inequality `g(x, u_i) <= 0`: `s_i = -g(x, u_i)`
//!
//! Internally Newton minimizes `Phi / alpha`, which is the same problem with
//! O(1) gradients; the reported `grad_norm` refers to that scaled objective.
//! The safe log only matters on infeasible trial points during the line
//! search; accepted iterates always have strictly positive slacks.
//!
//! A solver call is single-threaded and has no shared state; distinct calls
//! may run concurrently.

use thiserror::Error;

use crate::ad::{self, Scalar};
use crate::expr::{EvalError, Expression};
use crate::linalg::{dot, norm};
use crate::problem::{Point, Problem, ProblemKind};

/// Gradient-norm tolerance of the scaled objective `Phi / alpha`.
pub const INNER_GRAD_TOL: f64 = 1e-8;
/// Newton iteration cap.
pub const MAX_NEWTON_ITERS: usize = 200;
const ARMIJO_C: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;
/// Fraction-to-boundary: accepted steps keep every slack above 1% of its
/// previous value (and strictly positive).
const BOUNDARY_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Error)]
pub enum InnerError {
    #[error("cannot construct a strictly feasible starting point")]
    InfeasibleStart,
    #[error("line search stalled before reaching the gradient tolerance")]
    LineSearchStall,
    #[error("Newton did not converge within {0} iterations")]
    MaxIterations(usize),
    #[error("general programs need a caller-supplied strictly feasible decision point")]
    NeedsFeasiblePoint,
    #[error("barrier slack {slack:.3e} is not strictly positive")]
    SlackViolation { slack: f64 },
    #[error("operation requires the squared-distance constraint form")]
    UnsupportedForm,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One barrier term. See the module docs for the slack each form contributes.
#[derive(Clone, Debug)]
pub enum InnerConstraint {
    SquaredDist(Point),
    Epigraph(Expression),
    Inequality { g: Expression, u: Option<Point> },
}

/// The inner objective: barrier parameter, safe-log epsilon, and constraints.
#[derive(Clone, Debug)]
pub struct BarrierObjective {
    pub alpha: f64,
    pub safe_eps: f64,
    pub(crate) n: usize,
    pub(crate) constraints: Vec<InnerConstraint>,
    pub(crate) fallback_x: Option<Point>,
    pub(crate) chebyshev: bool,
}

impl BarrierObjective {
    /// Chebyshev form: minimize the squared radius of a ball covering `points`.
    ///
    /// The outer solver instantiates this with n+1 points; the sampling
    /// baseline reuses it with arbitrarily many.
    pub fn chebyshev(points: Vec<Point>, alpha: f64) -> Self {
        assert!(alpha > 0.0, "barrier parameter must be positive");
        assert!(!points.is_empty(), "need at least one constraint point");
        let n = points[0].dim();
        BarrierObjective {
            alpha,
            safe_eps: 1e-12,
            n,
            constraints: points.into_iter().map(InnerConstraint::SquaredDist).collect(),
            fallback_x: None,
            chebyshev: true,
        }
    }

    /// Build the inner objective a problem induces for a fixed tuple.
    pub fn for_problem(problem: &Problem, tuple: &[Point], alpha: f64) -> Self {
        match &problem.kind {
            ProblemKind::Chebyshev => Self::chebyshev(tuple.to_vec(), alpha),
            ProblemKind::Csip {
                objective,
                constraint,
                feasible_point,
                ..
            } => {
                let mut constraints = vec![InnerConstraint::Epigraph(objective.clone())];
                for u in tuple {
                    constraints.push(InnerConstraint::Inequality {
                        g: constraint.clone(),
                        u: Some(u.clone()),
                    });
                }
                if let Some(bounds) = &problem.decision {
                    for i in 0..problem.dim {
                        // x_i - upper_i <= 0 and lower_i - x_i <= 0
                        constraints.push(InnerConstraint::Inequality {
                            g: Expression::Sub(
                                Box::new(Expression::VarX(i + 1)),
                                Box::new(Expression::Constant(bounds.upper[i])),
                            ),
                            u: None,
                        });
                        constraints.push(InnerConstraint::Inequality {
                            g: Expression::Sub(
                                Box::new(Expression::Constant(bounds.lower[i])),
                                Box::new(Expression::VarX(i + 1)),
                            ),
                            u: None,
                        });
                    }
                }
                BarrierObjective {
                    alpha,
                    safe_eps: 1e-12,
                    n: problem.dim,
                    constraints,
                    fallback_x: Some(feasible_point.clone()),
                    chebyshev: false,
                }
            }
        }
    }

    pub fn decision_dim(&self) -> usize {
        self.n
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub(crate) fn constraints(&self) -> &[InnerConstraint] {
        &self.constraints
    }

    pub fn is_chebyshev(&self) -> bool {
        self.chebyshev
    }

    /// Slack of one constraint at `(t, x)`; may be negative.
    pub(crate) fn slack(&self, c: &InnerConstraint, t: f64, x: &[f64]) -> Result<f64, InnerError> {
        Ok(match c {
            InnerConstraint::SquaredDist(u) => {
                let mut s = t;
                for k in 0..self.n {
                    let d = x[k] - u[k];
                    s -= d * d;
                }
                s
            }
            InnerConstraint::Epigraph(f) => {
                let (fv, _, _) = ad::eval_grad(f, x, &[])?;
                t - fv
            }
            InnerConstraint::Inequality { g, u } => {
                let us = u.as_ref().map(|p| p.as_slice()).unwrap_or(&[]);
                let (gv, _, _) = ad::eval_grad(g, x, us)?;
                -gv
            }
        })
    }

    pub(crate) fn slacks(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, InnerError> {
        self.constraints
            .iter()
            .map(|c| self.slack(c, t, x))
            .collect()
    }

    /// Barrier value with the safe log, finite even at infeasible points.
    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64, InnerError> {
        let mut v = self.alpha * t;
        for c in &self.constraints {
            let s = self.slack(c, t, x)?;
            v -= s.max(self.safe_eps).ln();
        }
        Ok(v)
    }

    /// Gradient of the (unscaled) barrier over `(t, x)`; requires all slacks
    /// strictly positive.
    pub fn grad(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, InnerError> {
        let mut g = vec![0.0; 1 + self.n];
        g[0] = self.alpha;
        for c in &self.constraints {
            let s = self.slack(c, t, x)?;
            if s <= 0.0 {
                return Err(InnerError::SlackViolation { slack: s });
            }
            let inv = 1.0 / s;
            match c {
                InnerConstraint::SquaredDist(u) => {
                    g[0] -= inv;
                    for k in 0..self.n {
                        g[1 + k] += 2.0 * (x[k] - u[k]) * inv;
                    }
                }
                InnerConstraint::Epigraph(f) => {
                    let (_, gf, _) = ad::eval_grad(f, x, &[])?;
                    g[0] -= inv;
                    for k in 0..self.n {
                        g[1 + k] += gf[k] * inv;
                    }
                }
                InnerConstraint::Inequality { g: ge, u } => {
                    let us = u.as_ref().map(|p| p.as_slice()).unwrap_or(&[]);
                    let (_, gg, _) = ad::eval_grad(ge, x, us)?;
                    for k in 0..self.n {
                        g[1 + k] += gg[k] * inv;
                    }
                }
            }
        }
        Ok(g)
    }

    /// Barrier gradient in generic scalar arithmetic; drives the dual-number
    /// Hessian cross-check.
    pub(crate) fn grad_scalar<T: Scalar>(&self, t: T, x: &[T]) -> Result<Vec<T>, InnerError> {
        let mut g = vec![T::constant(0.0); 1 + self.n];
        g[0] = T::constant(self.alpha);
        for c in &self.constraints {
            match c {
                InnerConstraint::SquaredDist(u) => {
                    let mut s = t;
                    for k in 0..self.n {
                        let d = x[k] - T::constant(u[k]);
                        s = s - d * d;
                    }
                    if s.primal() <= 0.0 {
                        return Err(InnerError::SlackViolation { slack: s.primal() });
                    }
                    let inv = T::constant(1.0) / s;
                    g[0] = g[0] - inv;
                    for k in 0..self.n {
                        g[1 + k] =
                            g[1 + k] + T::constant(2.0) * (x[k] - T::constant(u[k])) * inv;
                    }
                }
                InnerConstraint::Epigraph(f) => {
                    let (fv, gf, _) = ad::eval_grad_scalar::<T>(f, x, &[])?;
                    let s = t - fv;
                    if s.primal() <= 0.0 {
                        return Err(InnerError::SlackViolation { slack: s.primal() });
                    }
                    let inv = T::constant(1.0) / s;
                    g[0] = g[0] - inv;
                    for k in 0..self.n {
                        g[1 + k] = g[1 + k] + gf[k] * inv;
                    }
                }
                InnerConstraint::Inequality { g: ge, u } => {
                    let us: Vec<T> = u
                        .as_ref()
                        .map(|p| p.iter().map(|&v| T::constant(v)).collect())
                        .unwrap_or_default();
                    let (gv, gg, _) = ad::eval_grad_scalar::<T>(ge, x, &us)?;
                    let s = -gv;
                    if s.primal() <= 0.0 {
                        return Err(InnerError::SlackViolation { slack: s.primal() });
                    }
                    let inv = T::constant(1.0) / s;
                    for k in 0..self.n {
                        g[1 + k] = g[1 + k] + gg[k] * inv;
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Barrier optimum for a fixed tuple.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    /// Optimal epigraph variable; for Chebyshev this estimates the squared
    /// radius (biased up by the barrier gap).
    pub t_star: f64,
    pub x_star: Point,
    /// Barrier value `Phi(t*, x*)` including the `alpha * t` term.
    pub g_value: f64,
    pub slacks: Vec<f64>,
    /// `||grad(Phi/alpha)||` at exit.
    pub grad_norm: f64,
    pub newton_iters: usize,
}

/// Underlying (un-barriered) value estimate together with its certified gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueEstimate {
    pub value: f64,
    /// The barrier optimum overshoots the true constrained optimum by at most
    /// this much: (constraint count) / alpha.
    pub gap_bound: f64,
}

/// Self-initialization: for the Chebyshev form, the mean of the points with
/// `t` one unit above the worst squared distance, so every slack is >= 1.
/// General programs need their caller-supplied strictly feasible point.
pub fn feasible_init(obj: &BarrierObjective) -> Result<(f64, Point), InnerError> {
    if obj.chebyshev {
        let n = obj.n;
        let mut mean = vec![0.0; n];
        let mut count = 0.0;
        for c in &obj.constraints {
            if let InnerConstraint::SquaredDist(u) = c {
                for k in 0..n {
                    mean[k] += u[k];
                }
                count += 1.0;
            }
        }
        for v in &mut mean {
            *v /= count;
        }
        let mut worst: f64 = 0.0;
        for c in &obj.constraints {
            if let InnerConstraint::SquaredDist(u) = c {
                let d: f64 = (0..n).map(|k| (mean[k] - u[k]) * (mean[k] - u[k])).sum();
                worst = worst.max(d);
            }
        }
        return Ok((worst + 1.0, Point::new(mean)));
    }

    let x0 = obj
        .fallback_x
        .clone()
        .ok_or(InnerError::NeedsFeasiblePoint)?;
    let mut t0 = 0.0;
    for c in &obj.constraints {
        match c {
            InnerConstraint::Epigraph(_) => {
                let s = obj.slack(c, 0.0, x0.as_slice())?; // s = -f(x0)
                t0 = t0.max(1.0 - s); // t0 = f(x0) + 1
            }
            InnerConstraint::Inequality { .. } => {
                let s = obj.slack(c, 0.0, x0.as_slice())?;
                if s <= 0.0 {
                    return Err(InnerError::NeedsFeasiblePoint);
                }
            }
            InnerConstraint::SquaredDist(_) => {}
        }
    }
    Ok((t0, x0))
}

/// Make a warm-start point strictly feasible again, lifting `t` when possible.
fn repair_start(
    obj: &BarrierObjective,
    t: f64,
    x: Point,
) -> Result<(f64, Point), InnerError> {
    let mut needed_t: Option<f64> = None;
    for c in &obj.constraints {
        match c {
            InnerConstraint::SquaredDist(_) | InnerConstraint::Epigraph(_) => {
                let s = obj.slack(c, t, x.as_slice())?;
                if s <= 0.0 {
                    // slack has the form t - g(x): lift t over g(x)
                    let g = t - s;
                    let margin = obj.constraint_count() as f64 / obj.alpha;
                    needed_t = Some(needed_t.unwrap_or(t).max(g + margin));
                }
            }
            InnerConstraint::Inequality { .. } => {
                let s = obj.slack(c, t, x.as_slice())?;
                if s <= 0.0 {
                    // t cannot fix this one: restart from the declared point
                    return feasible_init(obj);
                }
            }
        }
    }
    Ok((needed_t.unwrap_or(t), x))
}

/// Damped-Newton minimization of the barrier. `warm`, when given, should be
/// strictly feasible; almost-feasible warm starts are repaired by lifting `t`
/// or, failing that, by re-initializing.
pub fn solve_inner(
    obj: &BarrierObjective,
    warm: Option<(f64, Point)>,
) -> Result<InnerSolution, InnerError> {
    let (mut t, x) = match warm {
        Some((t, x)) => repair_start(obj, t, x)?,
        None => feasible_init(obj)?,
    };
    let mut x = x.as_slice().to_vec();
    let n = obj.n;
    let alpha = obj.alpha;

    let mut slacks = obj.slacks(t, &x)?;
    if slacks.iter().any(|&s| s <= 0.0) {
        return Err(InnerError::InfeasibleStart);
    }
    let mut psi = obj.value(t, &x)? / alpha;

    for iter in 0..MAX_NEWTON_ITERS {
        let mut g = obj.grad(t, &x)?;
        for v in &mut g {
            *v /= alpha;
        }
        let gnorm = norm(&g);
        if gnorm <= INNER_GRAD_TOL {
            return Ok(InnerSolution {
                t_star: t,
                x_star: Point::new(x),
                g_value: obj.value(t, &x)?,
                slacks,
                grad_norm: gnorm,
                newton_iters: iter,
            });
        }

        let mut h = ad::hessian_tx(obj, t, &Point::new(x.clone()))?;
        h.scale(1.0 / alpha);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let p = h.solve_damped(&rhs).ok_or(InnerError::LineSearchStall)?;
        let dir = dot(&g, &p);

        let mut step = 1.0f64;
        loop {
            let tc = t + step * p[0];
            let xc: Vec<f64> = x.iter().zip(&p[1..]).map(|(v, d)| v + step * d).collect();
            let sc = obj.slacks(tc, &xc)?;
            let feasible = sc
                .iter()
                .zip(&slacks)
                .all(|(&new, &old)| new > 0.0 && new >= (1.0 - BOUNDARY_FRACTION) * old);
            if feasible {
                let psic = obj.value(tc, &xc)? / alpha;
                if psic <= psi + ARMIJO_C * step * dir {
                    t = tc;
                    x = xc;
                    slacks = sc;
                    psi = psic;
                    break;
                }
            }
            step *= BACKTRACK_SHRINK;
            if step < 1e-16 {
                return Err(InnerError::LineSearchStall);
            }
        }
    }
    Err(InnerError::MaxIterations(MAX_NEWTON_ITERS))
}

/// Underlying program value estimated from a barrier optimum: `t*` for the
/// Chebyshev form, the declared objective at `x*` for general programs;
/// paired with the certified barrier gap `m / alpha`.
pub fn underlying_value(sol: &InnerSolution, obj: &BarrierObjective) -> ValueEstimate {
    let gap_bound = obj.constraint_count() as f64 / obj.alpha;
    if obj.chebyshev {
        return ValueEstimate {
            value: sol.t_star,
            gap_bound,
        };
    }
    for c in &obj.constraints {
        if let InnerConstraint::Epigraph(f) = c {
            let v = crate::expr::evaluate(f, &sol.x_star, &Point::new(vec![]))
                .expect("objective was evaluable throughout the solve");
            return ValueEstimate {
                value: v,
                gap_bound,
            };
        }
    }
    ValueEstimate {
        value: sol.t_star,
        gap_bound,
    }
}
