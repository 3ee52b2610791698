//! Automatic differentiation over [`Expression`] trees and the barrier objective.
//!
//! Gradients are computed by reverse mode on a per-call tape; Hessians of
//! expressions come from forward-over-reverse (a dual-number forward pass
//! through the reverse tape). The barrier objective's Hessian over (t, x) is
//! hand-coded from its closed form, since it dominates inner-solver cost; the
//! dual-number route is kept as a cross-check.

use crate::expr::{EvalError, Expression, Function};
use crate::inner::{BarrierObjective, InnerConstraint, InnerError};
use crate::linalg::SymMatrix;
use crate::problem::Point;

/// Dense symmetric Hessian over the inner decision variables (t first for
/// Chebyshev-style objectives, then x).
pub use crate::linalg::SymMatrix as HessianMatrix;

/// Partial derivatives aligned with a declared variable ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(Vec<f64>);

impl Gradient {
    pub fn new(partials: Vec<f64>) -> Self {
        Gradient(partials)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Gradient {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

// ---------------------------------------------------------------------------
// Scalar abstraction: plain f64 or a dual number
// ---------------------------------------------------------------------------

pub(crate) trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// The underlying value (dual numbers drop their derivative part).
    fn primal(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs_val(self) -> Self;
    /// Power with a runtime exponent; the base must be positive.
    fn pow(self, e: Self) -> Self;
    /// Power with a constant exponent.
    fn powc(self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn primal(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs_val(self) -> Self {
        f64::abs(self)
    }
    fn pow(self, e: Self) -> Self {
        f64::powf(self, e)
    }
    fn powc(self, c: f64) -> Self {
        f64::powf(self, c)
    }
}

/// First-order dual number for forward-mode differentiation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn var(re: f64, seed: f64) -> Self {
        Dual { re, eps: seed }
    }
}

impl std::ops::Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            re: self.re + o.re,
            eps: self.eps + o.eps,
        }
    }
}

impl std::ops::Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            re: self.re - o.re,
            eps: self.eps - o.eps,
        }
    }
}

impl std::ops::Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            re: self.re * o.re,
            eps: self.eps * o.re + self.re * o.eps,
        }
    }
}

impl std::ops::Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let re = self.re / o.re;
        Dual {
            re,
            eps: (self.eps - re * o.eps) / o.re,
        }
    }
}

impl std::ops::Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            re: -self.re,
            eps: -self.eps,
        }
    }
}

fn sign0(v: f64) -> f64 {
    // subgradient selection at 0: abs'(0) := 0
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        Dual { re: v, eps: 0.0 }
    }
    fn primal(self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        Dual {
            re: self.re.sin(),
            eps: self.eps * self.re.cos(),
        }
    }
    fn cos(self) -> Self {
        Dual {
            re: self.re.cos(),
            eps: -self.eps * self.re.sin(),
        }
    }
    fn exp(self) -> Self {
        let re = self.re.exp();
        Dual {
            re,
            eps: self.eps * re,
        }
    }
    fn ln(self) -> Self {
        Dual {
            re: self.re.ln(),
            eps: self.eps / self.re,
        }
    }
    fn sqrt(self) -> Self {
        let re = self.re.sqrt();
        Dual {
            re,
            eps: self.eps / (2.0 * re),
        }
    }
    fn abs_val(self) -> Self {
        Dual {
            re: self.re.abs(),
            eps: self.eps * sign0(self.re),
        }
    }
    fn pow(self, e: Self) -> Self {
        let re = self.re.powf(e.re);
        Dual {
            re,
            eps: re * (e.eps * self.re.ln() + e.re * self.eps / self.re),
        }
    }
    fn powc(self, c: f64) -> Self {
        Dual {
            re: self.re.powf(c),
            eps: c * self.re.powf(c - 1.0) * self.eps,
        }
    }
}

// ---------------------------------------------------------------------------
// Reverse-mode tape
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Node {
    Const,
    VarX(usize),
    VarU(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, usize),
    PowConst(usize, f64),
    Func(Function, usize),
}

struct Tape<T> {
    nodes: Vec<Node>,
    vals: Vec<T>,
}

impl<T: Scalar> Tape<T> {
    fn with_capacity(cap: usize) -> Self {
        Tape {
            nodes: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    fn record(&mut self, node: Node, val: T) -> Result<usize, EvalError> {
        if !val.primal().is_finite() {
            return Err(EvalError::Domain {
                reason: "non-finite result".into(),
                node: "<barrier term>".into(),
            });
        }
        self.nodes.push(node);
        self.vals.push(val);
        Ok(self.vals.len() - 1)
    }

    /// Forward pass: evaluate `e` while recording the tape.
    fn push(&mut self, e: &Expression, x: &[T], u: &[T]) -> Result<usize, EvalError> {
        let domain = |reason: String| EvalError::Domain {
            reason,
            node: e.to_string(),
        };
        match e {
            Expression::Constant(c) => self.record(Node::Const, T::constant(*c)),
            Expression::VarX(i) => {
                let v = *x
                    .get(i - 1)
                    .ok_or_else(|| EvalError::Unbound(format!("x{i}")))?;
                self.record(Node::VarX(i - 1), v)
            }
            Expression::VarU(i) => {
                let v = *u
                    .get(i - 1)
                    .ok_or_else(|| EvalError::Unbound(format!("u{i}")))?;
                self.record(Node::VarU(i - 1), v)
            }
            Expression::Neg(a) => {
                let ia = self.push(a, x, u)?;
                let v = -self.vals[ia];
                self.record(Node::Neg(ia), v)
            }
            Expression::Add(a, b) => {
                let (ia, ib) = (self.push(a, x, u)?, self.push(b, x, u)?);
                let v = self.vals[ia] + self.vals[ib];
                self.record(Node::Add(ia, ib), v)
            }
            Expression::Sub(a, b) => {
                let (ia, ib) = (self.push(a, x, u)?, self.push(b, x, u)?);
                let v = self.vals[ia] - self.vals[ib];
                self.record(Node::Sub(ia, ib), v)
            }
            Expression::Mul(a, b) => {
                let (ia, ib) = (self.push(a, x, u)?, self.push(b, x, u)?);
                let v = self.vals[ia] * self.vals[ib];
                self.record(Node::Mul(ia, ib), v)
            }
            Expression::Div(a, b) => {
                let (ia, ib) = (self.push(a, x, u)?, self.push(b, x, u)?);
                if self.vals[ib].primal() == 0.0 {
                    return Err(domain("division by zero".into()));
                }
                let v = self.vals[ia] / self.vals[ib];
                self.record(Node::Div(ia, ib), v)
            }
            Expression::Pow(a, b) => {
                if let Expression::Constant(c) = **b {
                    let ia = self.push(a, x, u)?;
                    let v = self.vals[ia].powc(c);
                    if !v.primal().is_finite() {
                        return Err(domain(format!(
                            "pow of base {} with exponent {c} is not finite",
                            self.vals[ia].primal()
                        )));
                    }
                    return self.record(Node::PowConst(ia, c), v);
                }
                let (ia, ib) = (self.push(a, x, u)?, self.push(b, x, u)?);
                if self.vals[ia].primal() <= 0.0 {
                    return Err(domain(
                        "pow with a non-constant exponent requires a positive base".into(),
                    ));
                }
                let v = self.vals[ia].pow(self.vals[ib]);
                self.record(Node::Pow(ia, ib), v)
            }
            Expression::Func(func, a) => {
                let ia = self.push(a, x, u)?;
                let av = self.vals[ia];
                let v = match func {
                    Function::Sin => av.sin(),
                    Function::Cos => av.cos(),
                    Function::Exp => av.exp(),
                    Function::Log => {
                        if av.primal() <= 0.0 {
                            return Err(domain(format!(
                                "log of nonpositive value {}",
                                av.primal()
                            )));
                        }
                        av.ln()
                    }
                    Function::Sqrt => {
                        if av.primal() < 0.0 {
                            return Err(domain(format!("sqrt of negative value {}", av.primal())));
                        }
                        av.sqrt()
                    }
                    Function::Abs => av.abs_val(),
                };
                self.record(Node::Func(*func, ia), v)
            }
        }
    }

    /// Reverse pass from the last recorded node; returns per-node adjoints.
    fn backward(&self) -> Vec<T> {
        let mut adj = vec![T::constant(0.0); self.vals.len()];
        let root = self.vals.len() - 1;
        adj[root] = T::constant(1.0);
        for idx in (0..self.nodes.len()).rev() {
            let a = adj[idx];
            if a.primal() == 0.0 && matches!(self.nodes[idx], Node::Const) {
                continue;
            }
            match self.nodes[idx] {
                Node::Const | Node::VarX(_) | Node::VarU(_) => {}
                Node::Neg(i) => adj[i] = adj[i] - a,
                Node::Add(i, j) => {
                    adj[i] = adj[i] + a;
                    adj[j] = adj[j] + a;
                }
                Node::Sub(i, j) => {
                    adj[i] = adj[i] + a;
                    adj[j] = adj[j] - a;
                }
                Node::Mul(i, j) => {
                    adj[i] = adj[i] + a * self.vals[j];
                    adj[j] = adj[j] + a * self.vals[i];
                }
                Node::Div(i, j) => {
                    adj[i] = adj[i] + a / self.vals[j];
                    adj[j] = adj[j] - a * self.vals[idx] / self.vals[j];
                }
                Node::Pow(i, j) => {
                    // out = b^e: d/db = out * e / b, d/de = out * ln b
                    let out = self.vals[idx];
                    adj[i] = adj[i] + a * out * self.vals[j] / self.vals[i];
                    adj[j] = adj[j] + a * out * self.vals[i].ln();
                }
                Node::PowConst(i, c) => {
                    adj[i] = adj[i] + a * T::constant(c) * self.vals[i].powc(c - 1.0);
                }
                Node::Func(func, i) => {
                    let av = self.vals[i];
                    let d = match func {
                        Function::Sin => av.cos(),
                        Function::Cos => -av.sin(),
                        Function::Exp => self.vals[idx],
                        Function::Log => T::constant(1.0) / av,
                        Function::Sqrt => T::constant(0.5) / self.vals[idx],
                        Function::Abs => T::constant(sign0(av.primal())),
                    };
                    adj[i] = adj[i] + a * d;
                }
            }
        }
        adj
    }
}

/// Value plus gradients with respect to x and u, via one reverse sweep.
pub(crate) fn eval_grad_scalar<T: Scalar>(
    e: &Expression,
    x: &[T],
    u: &[T],
) -> Result<(T, Vec<T>, Vec<T>), EvalError> {
    let mut tape = Tape::with_capacity(32);
    tape.push(e, x, u)?;
    let adj = tape.backward();
    let mut gx = vec![T::constant(0.0); x.len()];
    let mut gu = vec![T::constant(0.0); u.len()];
    for (idx, node) in tape.nodes.iter().enumerate() {
        match node {
            Node::VarX(i) => gx[*i] = gx[*i] + adj[idx],
            Node::VarU(i) => gu[*i] = gu[*i] + adj[idx],
            _ => {}
        }
    }
    let value = *tape.vals.last().expect("tape is nonempty");
    Ok((value, gx, gu))
}

pub(crate) fn eval_grad(
    e: &Expression,
    x: &[f64],
    u: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>), EvalError> {
    eval_grad_scalar::<f64>(e, x, u)
}

/// Reverse-mode gradient of `evaluate(e, ., u)` at `x`.
pub fn grad_x(e: &Expression, x: &Point, u: &Point) -> Result<Gradient, EvalError> {
    let (_, gx, _) = eval_grad(e, x.as_slice(), u.as_slice())?;
    Ok(Gradient(gx))
}

/// Reverse-mode gradient of `evaluate(e, x, .)` at `u`.
pub fn grad_u(e: &Expression, x: &Point, u: &Point) -> Result<Gradient, EvalError> {
    let (_, _, gu) = eval_grad(e, x.as_slice(), u.as_slice())?;
    Ok(Gradient(gu))
}

/// Forward-mode directional derivative of `e` in the direction `(dx, du)`.
pub(crate) fn directional_derivative(
    e: &Expression,
    x: &[f64],
    u: &[f64],
    dx: &[f64],
    du: &[f64],
) -> Result<f64, EvalError> {
    let xd: Vec<Dual> = x.iter().zip(dx).map(|(&v, &s)| Dual::var(v, s)).collect();
    let ud: Vec<Dual> = u.iter().zip(du).map(|(&v, &s)| Dual::var(v, s)).collect();
    let mut tape = Tape::with_capacity(32);
    tape.push(e, &xd, &ud)?;
    Ok(tape.vals.last().expect("tape is nonempty").eps)
}

/// Hessian of `e` with respect to x by forward-over-reverse: one dual-valued
/// reverse sweep per column. The raw columns are symmetrized to cancel the
/// last-bit asymmetry of floating-point evaluation order.
pub(crate) fn expr_hessian_x(
    e: &Expression,
    x: &[f64],
    u: &[f64],
) -> Result<SymMatrix, EvalError> {
    let n = x.len();
    let ud: Vec<Dual> = u.iter().map(|&v| Dual::constant(v)).collect();
    let mut raw = vec![0.0; n * n];
    for j in 0..n {
        let xd: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::var(v, if i == j { 1.0 } else { 0.0 }))
            .collect();
        let (_, gx, _) = eval_grad_scalar::<Dual>(e, &xd, &ud)?;
        for i in 0..n {
            raw[i * n + j] = gx[i].eps;
        }
    }
    let mut h = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            h.set(i, j, 0.5 * (raw[i * n + j] + raw[j * n + i]));
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Barrier Hessian over (t, x)
// ---------------------------------------------------------------------------

/// Exact Hessian of the barrier objective at `(t, x)`, hand-coded from the
/// closed form of each constraint's contribution.
///
/// Layout: index 0 is t, indices 1..=n are x. Fails with `SlackViolation` if
/// any barrier slack is nonpositive.
pub fn hessian_tx(obj: &BarrierObjective, t: f64, x: &Point) -> Result<HessianMatrix, InnerError> {
    let n = obj.decision_dim();
    let mut h = SymMatrix::zeros(1 + n);
    let xs = x.as_slice();
    for c in obj.constraints() {
        let s = obj.slack(c, t, xs)?;
        if s <= 0.0 {
            return Err(InnerError::SlackViolation { slack: s });
        }
        let inv = 1.0 / s;
        let inv2 = inv * inv;
        match c {
            InnerConstraint::SquaredDist(u) => {
                // slack s = t - ||x - u||^2, grad_x s = -2 d, hess_x s = -2 I
                h.add(0, 0, inv2);
                for i in 0..n {
                    let di = xs[i] - u[i];
                    h.add(0, 1 + i, -2.0 * di * inv2);
                    for j in i..n {
                        let dj = xs[j] - u[j];
                        let mut v = 4.0 * di * dj * inv2;
                        if i == j {
                            v += 2.0 * inv;
                        }
                        h.add(1 + i, 1 + j, v);
                    }
                }
            }
            InnerConstraint::Epigraph(f) => {
                // slack s = t - f(x)
                let (_, gf, _) = eval_grad(f, xs, &[])?;
                let hf = expr_hessian_x(f, xs, &[])?;
                h.add(0, 0, inv2);
                for i in 0..n {
                    h.add(0, 1 + i, -gf[i] * inv2);
                    for j in i..n {
                        h.add(1 + i, 1 + j, gf[i] * gf[j] * inv2 + hf.get(i, j) * inv);
                    }
                }
            }
            InnerConstraint::Inequality { g, u } => {
                // slack s = -g(x, u): no t coupling
                let us = u.as_ref().map(|p| p.as_slice()).unwrap_or(&[]);
                let (_, gg, _) = eval_grad(g, xs, us)?;
                let hg = expr_hessian_x(g, xs, us)?;
                for i in 0..n {
                    for j in i..n {
                        h.add(1 + i, 1 + j, gg[i] * gg[j] * inv2 + hg.get(i, j) * inv);
                    }
                }
            }
        }
    }
    Ok(h)
}

/// Barrier Hessian by forward-mode differentiation of the barrier gradient;
/// the cross-check route for [`hessian_tx`].
pub(crate) fn hessian_tx_ad(
    obj: &BarrierObjective,
    t: f64,
    x: &Point,
) -> Result<HessianMatrix, InnerError> {
    let n = obj.decision_dim();
    let m = 1 + n;
    let mut raw = vec![0.0; m * m];
    for j in 0..m {
        let td = Dual::var(t, if j == 0 { 1.0 } else { 0.0 });
        let xd: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::var(v, if 1 + i == j { 1.0 } else { 0.0 }))
            .collect();
        let g = obj.grad_scalar(td, &xd)?;
        for i in 0..m {
            raw[i * m + j] = g[i].eps;
        }
    }
    let mut h = SymMatrix::zeros(m);
    for i in 0..m {
        for j in i..m {
            h.set(i, j, 0.5 * (raw[i * m + j] + raw[j * m + i]));
        }
    }
    Ok(h)
}

/// Componentwise central-difference check of an analytic gradient.
///
/// Returns the worst relative error, with denominator `max(1, |analytic_i|)`.
pub fn check_gradient<F>(mut f: F, point: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut worst = 0.0f64;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + h;
        let fp = f(&probe);
        probe[i] = point[i] - h;
        let fm = f(&probe);
        probe[i] = point[i];
        let fd = (fp - fm) / (2.0 * h);
        let err = (fd - analytic[i]).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

// ---------------------------------------------------------------------------
// Unrolled-suffix gradient (cross-validation of the envelope identity)
// ---------------------------------------------------------------------------

/// Gradient of the barrier value with respect to the constraint points,
/// obtained by differentiating through a suffix of gradient-descent steps on
/// the barrier instead of applying the envelope identity at the optimum.
///
/// Only the squared-distance (Chebyshev) constraint form is supported; this
/// exists to cross-validate [`crate::outer::envelope_gradient`] and is kept
/// behind the `use_unrolled_gradient` solver flag.
pub fn unrolled_gradient(
    obj: &BarrierObjective,
    start: (f64, &Point),
    suffix_steps: usize,
) -> Result<Vec<Point>, InnerError> {
    let n = obj.decision_dim();
    let points: Vec<&Point> = obj
        .constraints()
        .iter()
        .map(|c| match c {
            InnerConstraint::SquaredDist(u) => Ok(u),
            _ => Err(InnerError::UnsupportedForm),
        })
        .collect::<Result<_, _>>()?;
    let q = points.len();
    let m = 1 + n; // state (t, x)
    let cols = q * n; // flattened tuple coordinates

    let mut z = vec![start.0; 1];
    z.extend_from_slice(start.1.as_slice());
    // J = dz/dU, m x cols, row-major; the start is detached: J = 0
    let mut jac = vec![0.0; m * cols];

    for _ in 0..suffix_steps {
        let (slacks, grad, hess, mixed) = chebyshev_pieces(obj, &z, &points)?;
        let _ = slacks;
        // scaled objective: psi = phi / alpha, so the step size is O(1)
        let alpha = obj.alpha;
        // step size from a Gershgorin bound on the scaled Hessian
        let mut lam_max = 0.0f64;
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                row += hess.get(i, j).abs();
            }
            lam_max = lam_max.max(row / alpha);
        }
        let gamma = 0.9 / lam_max.max(1e-12);
        // z <- z - gamma * grad(psi)
        for i in 0..m {
            z[i] -= gamma * grad[i] / alpha;
        }
        // J <- (I - gamma Hpsi) J - gamma Cpsi
        let mut next = vec![0.0; m * cols];
        for r in 0..m {
            for c in 0..cols {
                let mut v = jac[r * cols + c];
                for k in 0..m {
                    v -= gamma / alpha * hess.get(r, k) * jac[k * cols + c];
                }
                v -= gamma / alpha * mixed[r * cols + c];
                next[r * cols + c] = v;
            }
        }
        jac = next;
    }

    // dPhi/dU = grad_z Phi^T J + dPhi/dU at the final state
    let (_, grad, _, _) = chebyshev_pieces(obj, &z, &points)?;
    let mut total = vec![0.0; cols];
    for (c, t) in total.iter_mut().enumerate() {
        for r in 0..m {
            *t += grad[r] * jac[r * cols + c];
        }
    }
    let t = z[0];
    let xs = &z[1..];
    for (i, u) in points.iter().enumerate() {
        let mut s = t;
        for k in 0..n {
            let d = xs[k] - u[k];
            s -= d * d;
        }
        for k in 0..n {
            // direct dependence: d/du of -log(t - ||x-u||^2) is -2(x-u)/s
            total[i * n + k] += -2.0 * (xs[k] - u[k]) / s;
        }
    }
    Ok(total
        .chunks(n)
        .map(|c| Point::new(c.to_vec()))
        .collect())
}

/// Gradient, Hessian, and mixed second derivatives of the unscaled barrier for
/// the squared-distance constraint form, at state z = (t, x).
#[allow(clippy::type_complexity)]
fn chebyshev_pieces(
    obj: &BarrierObjective,
    z: &[f64],
    points: &[&Point],
) -> Result<(Vec<f64>, Vec<f64>, SymMatrix, Vec<f64>), InnerError> {
    let n = points.first().map(|p| p.dim()).unwrap_or(0);
    let m = 1 + n;
    let cols = points.len() * n;
    let t = z[0];
    let xs = &z[1..];
    let mut slacks = Vec::with_capacity(points.len());
    let mut grad = vec![0.0; m];
    grad[0] = obj.alpha;
    let mut hess = SymMatrix::zeros(m);
    let mut mixed = vec![0.0; m * cols];
    for (i, u) in points.iter().enumerate() {
        let mut s = t;
        for k in 0..n {
            let d = xs[k] - u[k];
            s -= d * d;
        }
        if s <= 0.0 {
            return Err(InnerError::SlackViolation { slack: s });
        }
        slacks.push(s);
        let inv = 1.0 / s;
        let inv2 = inv * inv;
        grad[0] -= inv;
        hess.add(0, 0, inv2);
        for k in 0..n {
            let dk = xs[k] - u[k];
            grad[1 + k] += 2.0 * dk * inv;
            hess.add(0, 1 + k, -2.0 * dk * inv2);
            for l in k..n {
                let dl = xs[l] - u[l];
                let mut v = 4.0 * dk * dl * inv2;
                if k == l {
                    v += 2.0 * inv;
                }
                hess.add(1 + k, 1 + l, v);
            }
            // mixed partials with respect to u_i
            // d(grad_t)/du_ik = 2 d_k / s^2
            mixed[i * n + k] += 2.0 * dk * inv2;
            for l in 0..n {
                let dl = xs[l] - u[l];
                // d(grad_x_l)/du_ik = -4 d_l d_k / s^2 - 2 [l==k] / s
                let mut v = -4.0 * dl * dk * inv2;
                if l == k {
                    v -= 2.0 * inv;
                }
                mixed[(1 + l) * cols + i * n + k] += v;
            }
        }
    }
    Ok((slacks, grad, hess, mixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec())
    }

    #[test]
    fn grad_x_polynomial() {
        let e = parse("x1^2 + x2").unwrap();
        let g = grad_x(&e, &pt(&[3.0, 1.0]), &pt(&[])).unwrap();
        assert_eq!(g.as_slice(), &[6.0, 1.0]);
    }

    #[test]
    fn grad_x_linear_in_u() {
        let e = parse("u1*x1").unwrap();
        let g = grad_x(&e, &pt(&[5.0]), &pt(&[2.0])).unwrap();
        assert_eq!(g.as_slice(), &[2.0]);
    }

    #[test]
    fn grad_x_exp_at_zero() {
        let e = parse("exp(x1)").unwrap();
        let g = grad_x(&e, &pt(&[0.0]), &pt(&[])).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);
    }

    #[test]
    fn grad_u_examples() {
        let e = parse("u1*x1").unwrap();
        let g = grad_u(&e, &pt(&[5.0]), &pt(&[2.0])).unwrap();
        assert_eq!(g.as_slice(), &[5.0]);

        let e = parse("(x1-u1)^2").unwrap();
        let g = grad_u(&e, &pt(&[1.0]), &pt(&[0.0])).unwrap();
        assert_eq!(g.as_slice(), &[-2.0]);

        let e = parse("sin(u1)").unwrap();
        let g = grad_u(&e, &pt(&[]), &pt(&[0.0])).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);
    }

    #[test]
    fn abs_subgradient_at_zero_is_zero() {
        let e = parse("abs(x1)").unwrap();
        let g = grad_x(&e, &pt(&[0.0]), &pt(&[])).unwrap();
        assert_eq!(g.as_slice(), &[0.0]);
    }

    #[test]
    fn check_gradient_quadratic() {
        let err = check_gradient(|p| p[0] * p[0], &[3.0], &[6.0], 1e-5);
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn check_gradient_exp() {
        let err = check_gradient(|p| p[0].exp(), &[0.0], &[1.0], 1e-5);
        assert!(err < 1e-9, "err = {err}");
    }

    #[test]
    fn reverse_matches_forward_mode() {
        let e = parse("sin(x1)*exp(u1) + x1^3/u2 - sqrt(x2+5)").unwrap();
        let x = [0.7, 1.4];
        let u = [0.3, 2.0];
        let (_, gx, gu) = eval_grad(&e, &x, &u).unwrap();
        for j in 0..2 {
            let mut dx = [0.0; 2];
            dx[j] = 1.0;
            let d = directional_derivative(&e, &x, &u, &dx, &[0.0, 0.0]).unwrap();
            assert!((d - gx[j]).abs() <= 1e-12, "x{j}: {d} vs {}", gx[j]);
        }
        for j in 0..2 {
            let mut du = [0.0; 2];
            du[j] = 1.0;
            let d = directional_derivative(&e, &x, &u, &[0.0, 0.0], &du).unwrap();
            assert!((d - gu[j]).abs() <= 1e-12, "u{j}: {d} vs {}", gu[j]);
        }
    }

    #[test]
    fn expr_hessian_matches_finite_differences() {
        let e = parse("x1^2*x2 + exp(x1*x2) + x2^3").unwrap();
        let x = [0.4, 0.9];
        let h = expr_hessian_x(&e, &x, &[]).unwrap();
        let step = 1e-5;
        for i in 0..2 {
            for j in 0..2 {
                let mut xp = x;
                xp[i] += step;
                let (_, gp, _) = eval_grad(&e, &xp, &[]).unwrap();
                let mut xm = x;
                xm[i] -= step;
                let (_, gm, _) = eval_grad(&e, &xm, &[]).unwrap();
                let fd = (gp[j] - gm[j]) / (2.0 * step);
                assert!(
                    (fd - h.get(i, j)).abs() / fd.abs().max(1.0) < 1e-6,
                    "H[{i}][{j}] = {} vs fd {}",
                    h.get(i, j),
                    fd
                );
            }
        }
        assert!(h.asymmetry() < 1e-12);
    }

    #[test]
    fn domain_error_on_log_gradient() {
        let e = parse("log(x1)").unwrap();
        assert!(grad_x(&e, &pt(&[-1.0]), &pt(&[])).is_err());
    }

    mod random_gradients {
        use super::*;
        use crate::expr::Expression;
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;

        // Random expression without abs (subgradients break finite differences).
        fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expression {
            if depth == 0 || rng.gen_bool(0.3) {
                return match rng.gen_range(0..3) {
                    0 => Expression::Constant(rng.gen_range(0.5..3.0)),
                    1 => Expression::VarX(rng.gen_range(1..3)),
                    _ => Expression::VarU(rng.gen_range(1..3)),
                };
            }
            let a = Box::new(random_expr(rng, depth - 1));
            let b = Box::new(random_expr(rng, depth - 1));
            match rng.gen_range(0..8) {
                0 => Expression::Add(a, b),
                1 => Expression::Sub(a, b),
                2 => Expression::Mul(a, b),
                3 => Expression::Div(a, b),
                4 => Expression::Pow(a, Box::new(Expression::Constant(rng.gen_range(1..4) as f64))),
                5 => Expression::Func(crate::expr::Function::Sin, a),
                6 => Expression::Func(crate::expr::Function::Exp, a),
                _ => Expression::Neg(a),
            }
        }

        #[test]
        fn gradients_agree_with_central_differences() {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut checked = 0;
            while checked < 40 {
                let e = random_expr(&mut rng, 4);
                let x: Vec<f64> = (0..2).map(|_| rng.gen_range(0.3..1.7)).collect();
                let u: Vec<f64> = (0..2).map(|_| rng.gen_range(0.3..1.7)).collect();
                let Ok((_, gx, gu)) = eval_grad(&e, &x, &u) else {
                    continue;
                };
                if gx.iter().chain(&gu).any(|g| g.abs() > 1e6) {
                    continue; // steep regions make the FD comparison meaningless
                }
                let h = 1e-5;
                let full: Vec<f64> = x.iter().chain(&u).copied().collect();
                let analytic: Vec<f64> = gx.iter().chain(&gu).copied().collect();
                let eref = &e;
                let f = |p: &[f64]| {
                    let (xs, us) = p.split_at(2);
                    crate::expr::evaluate(
                        eref,
                        &Point::new(xs.to_vec()),
                        &Point::new(us.to_vec()),
                    )
                    .unwrap_or(f64::NAN)
                };
                let err = check_gradient(f, &full, &analytic, h);
                if err.is_nan() {
                    continue; // probe crossed a domain boundary
                }
                assert!(err < 1e-4, "expr {e}: err {err}");
                checked += 1;
            }
        }
    }
}
