//! Independent ground truth for tests: exact minimum enclosing balls via
//! Welzl's algorithm and a dense grid search for tiny instances.
//!
//! The ball oracle deliberately shares no math with the barrier solver — it is
//! a geometric recursion plus a small Gaussian elimination — so a bug in the
//! solver cannot be masked by an identical bug here.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::EvalError;
use crate::linalg::{dist_sq, gauss_solve};
use crate::problem::{Point, Problem, ProblemKind};
use crate::sets::UncertaintySet;

const WELZL_SHUFFLE_SEED: u64 = 0xC0FFEE;
const MAX_GRID_EVALS: f64 = 1e8;

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("support set is degenerate and the regularized circumsphere solve failed")]
    DegenerateSupport,
    #[error("grid search would need {0:.3e} evaluations (limit 1e8)")]
    TooLarge(f64),
    #[error("dimension {0} exceeds the oracle's limit of 10")]
    DimensionTooHigh(usize),
    #[error("need at least one point")]
    EmptyInput,
    #[error("grid search needs a decision box on the problem")]
    MissingDecisionBox,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A ball: center plus nonnegative radius.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        p.dist(&self.center) <= self.radius + tol
    }
}

/// Exact minimum enclosing ball of `points` (Euclidean), by Welzl's randomized
/// recursion with move-to-front. Deterministic: the initial shuffle is seeded.
pub fn welzl_meb(points: &[Point]) -> Result<Ball, OracleError> {
    if points.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    let dim = points[0].dim();
    if dim > 10 {
        return Err(OracleError::DimensionTooHigh(dim));
    }
    let mut shuffled: Vec<Point> = points.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(WELZL_SHUFFLE_SEED));
    let mut support: Vec<Point> = Vec::with_capacity(dim + 1);
    let end = shuffled.len();
    mtf_ball(&mut shuffled, end, &mut support, dim)
}

fn mtf_ball(
    pts: &mut [Point],
    end: usize,
    support: &mut Vec<Point>,
    dim: usize,
) -> Result<Ball, OracleError> {
    let mut ball = ball_from_support(support, dim)?;
    if support.len() == dim + 1 {
        return Ok(ball);
    }
    let mut i = 0;
    while i < end {
        if !covers(&ball, &pts[i]) {
            let p = pts[i].clone();
            support.push(p);
            ball = mtf_ball(pts, i, support, dim)?;
            support.pop();
            pts[..=i].rotate_right(1);
        }
        i += 1;
    }
    Ok(ball)
}

fn covers(ball: &Ball, p: &Point) -> bool {
    if ball.radius < 0.0 {
        return false;
    }
    let r2 = ball.radius * ball.radius;
    dist_sq(p.as_slice(), ball.center.as_slice()) <= r2 + 1e-10 * (1.0 + r2)
}

/// Smallest ball with every support point on its boundary: the circumsphere
/// within the support's affine hull. A singular system falls back to a
/// ridge-regularized solve (lambda = 1e-12).
fn ball_from_support(support: &[Point], dim: usize) -> Result<Ball, OracleError> {
    match support.len() {
        0 => Ok(Ball {
            center: Point::zeros(dim),
            radius: -1.0,
        }),
        1 => Ok(Ball {
            center: support[0].clone(),
            radius: 0.0,
        }),
        k => {
            let base = &support[0];
            let m = k - 1;
            let diffs: Vec<Vec<f64>> = support[1..]
                .iter()
                .map(|p| p.sub(base).as_slice().to_vec())
                .collect();
            let mut a = vec![0.0; m * m];
            let mut b = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    a[i * m + j] = 2.0 * crate::linalg::dot(&diffs[i], &diffs[j]);
                }
                b[i] = crate::linalg::dot(&diffs[i], &diffs[i]);
            }
            let coeffs = match gauss_solve(a.clone(), b.clone()) {
                Some(c) => c,
                None => {
                    for i in 0..m {
                        a[i * m + i] += 1e-12;
                    }
                    gauss_solve(a, b).ok_or(OracleError::DegenerateSupport)?
                }
            };
            let mut center = base.as_slice().to_vec();
            for (c, d) in coeffs.iter().zip(&diffs) {
                for (cv, dv) in center.iter_mut().zip(d) {
                    *cv += c * dv;
                }
            }
            let center = Point::new(center);
            let radius = center.dist(base);
            Ok(Ball { center, radius })
        }
    }
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// Brute-force oracle for tiny instances: minimizes over a lattice on the
/// decision box the worst constraint value over the uncertainty set.
///
/// For Chebyshev problems the inner maximum is of `||u - x||^2`; for general
/// problems it is of the declared constraint expression. Fails with
/// `TooLarge` past 1e8 evaluations and requires decision dimension <= 3.
pub fn grid_csip(problem: &Problem, resolution: usize) -> Result<(f64, Point), OracleError> {
    let n = problem.dim;
    if n > 3 {
        return Err(OracleError::DimensionTooHigh(n));
    }
    let bounds = problem
        .decision
        .as_ref()
        .ok_or(OracleError::MissingDecisionBox)?;
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| grid_axis(bounds.lower[i], bounds.upper[i], resolution))
        .collect();
    let x_count: f64 = axes.iter().map(|a| a.len() as f64).product();

    let inner = InnerMax::build(problem, resolution)?;
    let per_x = inner.cost();
    if x_count * per_x > MAX_GRID_EVALS {
        return Err(OracleError::TooLarge(x_count * per_x));
    }

    let mut best = f64::INFINITY;
    let mut best_x = Point::zeros(n);
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for i in 0..n {
            x[i] = axes[i][idx[i]];
        }
        let v = inner.max_at(&x)?;
        if v < best {
            best = v;
            best_x = Point::new(x.clone());
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == n {
                return Ok((best, best_x));
            }
            idx[axis] += 1;
            if idx[axis] < axes[axis].len() {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

enum InnerMax<'a> {
    /// max of ||u - x||^2 over an axis box: separable, per-axis extremes.
    BoxSquaredDist { lower: Point, upper: Point },
    /// max of ||u - x||^2 over an explicit list of points.
    PointsSquaredDist(Vec<Point>),
    /// max of g(x, u) over an explicit list of points.
    Expr {
        g: &'a crate::expr::Expression,
        us: Vec<Point>,
    },
}

impl<'a> InnerMax<'a> {
    fn build(problem: &'a Problem, resolution: usize) -> Result<Self, OracleError> {
        match &problem.kind {
            ProblemKind::Chebyshev => match &problem.uncertainty {
                UncertaintySet::Box { lower, upper } => Ok(InnerMax::BoxSquaredDist {
                    lower: lower.clone(),
                    upper: upper.clone(),
                }),
                UncertaintySet::FinitePoints { points, .. } => {
                    Ok(InnerMax::PointsSquaredDist(points.clone()))
                }
                set => Ok(InnerMax::PointsSquaredDist(filtered_lattice(
                    set, resolution,
                )?)),
            },
            ProblemKind::Csip { constraint, .. } => {
                let us = match &problem.uncertainty {
                    UncertaintySet::FinitePoints { points, .. } => points.clone(),
                    set => filtered_lattice(set, resolution)?,
                };
                Ok(InnerMax::Expr { g: constraint, us })
            }
        }
    }

    fn cost(&self) -> f64 {
        match self {
            InnerMax::BoxSquaredDist { lower, .. } => lower.dim() as f64,
            InnerMax::PointsSquaredDist(us) => us.len() as f64,
            InnerMax::Expr { us, .. } => us.len() as f64,
        }
    }

    fn max_at(&self, x: &[f64]) -> Result<f64, OracleError> {
        match self {
            InnerMax::BoxSquaredDist { lower, upper } => {
                let mut v = 0.0;
                for i in 0..x.len() {
                    let lo = (x[i] - lower[i]).abs();
                    let hi = (x[i] - upper[i]).abs();
                    let d = lo.max(hi);
                    v += d * d;
                }
                Ok(v)
            }
            InnerMax::PointsSquaredDist(us) => Ok(us
                .iter()
                .map(|u| dist_sq(x, u.as_slice()))
                .fold(f64::NEG_INFINITY, f64::max)),
            InnerMax::Expr { g, us } => {
                let xp = Point::new(x.to_vec());
                let mut best = f64::NEG_INFINITY;
                for u in us {
                    best = best.max(crate::expr::evaluate(g, &xp, u)?);
                }
                Ok(best)
            }
        }
    }
}

/// Lattice over the set's bounding box, filtered by membership.
fn filtered_lattice(set: &UncertaintySet, resolution: usize) -> Result<Vec<Point>, OracleError> {
    let (lower, upper) = set.bounding_box();
    let p = lower.dim();
    let axes: Vec<Vec<f64>> = (0..p)
        .map(|i| grid_axis(lower[i], upper[i], resolution))
        .collect();
    let count: f64 = axes.iter().map(|a| a.len() as f64).product();
    if count > MAX_GRID_EVALS {
        return Err(OracleError::TooLarge(count));
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; p];
    loop {
        let u = Point::new((0..p).map(|i| axes[i][idx[i]]).collect());
        if set.contains(&u, 1e-9) {
            out.push(u);
        }
        let mut axis = 0;
        loop {
            if axis == p {
                return Ok(out);
            }
            idx[axis] += 1;
            if idx[axis] < axes[axis].len() {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

fn grid_axis(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    if hi <= lo || resolution <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (resolution - 1) as f64;
    (0..resolution).map(|i| lo + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn pts(coords: &[&[f64]]) -> Vec<Point> {
        coords.iter().map(|c| Point::new(c.to_vec())).collect()
    }

    #[test]
    fn two_points_make_a_diameter() {
        let b = welzl_meb(&pts(&[&[0.0], &[2.0]])).unwrap();
        assert!((b.center[0] - 1.0).abs() < 1e-12);
        assert!((b.radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn right_triangle_circumball() {
        let b = welzl_meb(&pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]])).unwrap();
        assert!((b.center[0] - 1.0).abs() < 1e-9);
        assert!((b.center[1] - 1.0).abs() < 1e-9);
        assert!((b.radius - 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn single_point_has_zero_radius() {
        let b = welzl_meb(&pts(&[&[3.0, -1.0]])).unwrap();
        assert_eq!(b.radius, 0.0);
        assert_eq!(b.center.as_slice(), &[3.0, -1.0]);
    }

    #[test]
    fn duplicate_points_are_harmless() {
        let b = welzl_meb(&pts(&[&[1.0, 1.0], &[1.0, 1.0], &[3.0, 1.0], &[3.0, 1.0]])).unwrap();
        assert!((b.radius - 1.0).abs() < 1e-9);
        assert!((b.center[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn thousand_points_r5_containment_and_support() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Point> = (0..1000)
            .map(|_| Point::new((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let b = welzl_meb(&points).unwrap();
        let mut on_boundary = 0;
        for p in &points {
            let d = p.dist(&b.center);
            assert!(
                d <= b.radius * (1.0 + 1e-9) + 1e-12,
                "point outside: {d} vs {}",
                b.radius
            );
            if (d - b.radius).abs() <= 1e-7 {
                on_boundary += 1;
            }
        }
        assert!(on_boundary >= 2, "only {on_boundary} support points");
    }

    #[test]
    fn radius_invariant_under_permutation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let points: Vec<Point> = (0..40)
            .map(|_| Point::new((0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()))
            .collect();
        let r0 = welzl_meb(&points).unwrap().radius;
        for _ in 0..5 {
            let mut shuffled = points.clone();
            shuffled.shuffle(&mut rng);
            let r = welzl_meb(&shuffled).unwrap().radius;
            assert!((r - r0).abs() <= 1e-12, "{r} vs {r0}");
        }
    }

    #[test]
    fn radius_invariant_under_rotation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let points: Vec<Point> = (0..30)
            .map(|_| Point::new((0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()))
            .collect();
        let r0 = welzl_meb(&points).unwrap().radius;
        // random rotation from composed Givens rotations
        let rotated: Vec<Point> = {
            let angles: Vec<(usize, usize, f64)> = vec![
                (0, 1, rng.gen_range(0.0..std::f64::consts::TAU)),
                (1, 2, rng.gen_range(0.0..std::f64::consts::TAU)),
                (0, 2, rng.gen_range(0.0..std::f64::consts::TAU)),
            ];
            points
                .iter()
                .map(|p| {
                    let mut v = p.as_slice().to_vec();
                    for &(i, j, a) in &angles {
                        let (c, s) = (a.cos(), a.sin());
                        let (vi, vj) = (v[i], v[j]);
                        v[i] = c * vi - s * vj;
                        v[j] = s * vi + c * vj;
                    }
                    Point::new(v)
                })
                .collect()
        };
        let r = welzl_meb(&rotated).unwrap().radius;
        assert!((r - r0).abs() <= 1e-9, "{r} vs {r0}");
    }

    #[test]
    fn grid_unit_square_chebyshev() {
        let set = UncertaintySet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let problem = Problem::chebyshev("unit_square", set);
        let (v, x) = grid_csip(&problem, 201).unwrap();
        assert!((v - 0.5).abs() <= 1e-4, "value = {v}");
        assert!((x[0] - 0.5).abs() <= 1e-2 && (x[1] - 0.5).abs() <= 1e-2);
    }

    #[test]
    fn grid_single_point_set_is_exact_zero() {
        let set = UncertaintySet::finite_points(pts(&[&[3.0, 4.0]])).unwrap();
        let problem = Problem::chebyshev("single", set);
        let (v, x) = grid_csip(&problem, 51).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(x.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn grid_minmax_absolute_distance() {
        use crate::problem::{BoxBounds, ProblemKind};
        let problem = Problem {
            name: "minmax_abs".into(),
            dim: 1,
            uncertainty: UncertaintySet::axis_box(vec![0.0], vec![1.0]).unwrap(),
            decision: Some(BoxBounds {
                lower: Point::new(vec![0.0]),
                upper: Point::new(vec![1.0]),
            }),
            kind: ProblemKind::Csip {
                objective: crate::expr::parse("x1").unwrap(),
                constraint: crate::expr::parse("abs(u1-x1)").unwrap(),
                uncertainty_dim: 1,
                feasible_point: Point::new(vec![0.5]),
            },
        };
        let (v, x) = grid_csip(&problem, 101).unwrap();
        assert!((v - 0.5).abs() <= 1e-9, "value = {v}");
        assert!((x[0] - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn grid_rejects_oversized_requests() {
        let set = UncertaintySet::axis_box(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let mut problem = Problem::chebyshev("big", set);
        problem.kind = ProblemKind::Csip {
            objective: crate::expr::parse("x1").unwrap(),
            constraint: crate::expr::parse("u1*x1").unwrap(),
            uncertainty_dim: 3,
            feasible_point: Point::zeros(3),
        };
        assert!(matches!(
            grid_csip(&problem, 1000),
            Err(OracleError::TooLarge(_))
        ));
    }
}
