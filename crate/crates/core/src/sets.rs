//! Uncertainty sets: membership, Euclidean projection, and sampling.
//!
//! Finite point sets are treated through their convex hull. In one and two
//! dimensions the hull is converted to halfspaces once and projected with
//! Dykstra's alternating scheme; in higher dimensions (or degenerate 2-D
//! cases) projection runs Wolfe's min-norm-point active-set method over the
//! vertices, which terminates at the exact projection.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{dot, norm};
use crate::problem::Point;

const DYKSTRA_MAX_SWEEPS: usize = 10_000;
const DYKSTRA_TOL: f64 = 1e-10;
const HIT_AND_RUN_BURN_IN: usize = 100;

#[derive(Debug, Clone, Error)]
pub enum SetError {
    #[error("box lower bound exceeds upper bound in coordinate {0}")]
    BoxBoundsInverted(usize),
    #[error("ball radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("polytope needs at least one halfspace")]
    EmptyPolytope,
    #[error("the declared interior point violates halfspace {0}")]
    InteriorNotInterior(usize),
    #[error("need at least one point")]
    NoPoints,
    #[error("points have inconsistent dimensions")]
    DimensionMismatch,
    #[error("projection did not converge within {DYKSTRA_MAX_SWEEPS} Dykstra sweeps")]
    ProjectionNonConvergence,
}

/// Closed halfspace `normal . u <= offset`.
#[derive(Clone, Debug)]
pub struct Halfspace {
    pub normal: Point,
    pub offset: f64,
}

/// The admissible region the constraint points range over.
#[derive(Clone, Debug)]
pub enum UncertaintySet {
    Box {
        lower: Point,
        upper: Point,
    },
    Ball {
        center: Point,
        radius: f64,
    },
    /// Intersection of halfspaces, assumed compact; `interior` certifies
    /// nonemptiness and seeds the hit-and-run sampler.
    Polytope {
        halfspaces: Vec<Halfspace>,
        interior: Point,
    },
    /// A finite set, relaxed to its convex hull.
    FinitePoints {
        points: Vec<Point>,
        /// Lazily computed hull halfspaces for dimensions 1 and 2.
        hull: OnceLock<Option<Vec<Halfspace>>>,
    },
}

impl UncertaintySet {
    pub fn axis_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SetError> {
        if lower.len() != upper.len() {
            return Err(SetError::DimensionMismatch);
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo > hi {
                return Err(SetError::BoxBoundsInverted(i));
            }
        }
        Ok(UncertaintySet::Box {
            lower: Point::new(lower),
            upper: Point::new(upper),
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, SetError> {
        if radius <= 0.0 {
            return Err(SetError::NonPositiveRadius(radius));
        }
        Ok(UncertaintySet::Ball {
            center: Point::new(center),
            radius,
        })
    }

    pub fn polytope(halfspaces: Vec<Halfspace>, interior: Point) -> Result<Self, SetError> {
        if halfspaces.is_empty() {
            return Err(SetError::EmptyPolytope);
        }
        for h in &halfspaces {
            if h.normal.dim() != interior.dim() {
                return Err(SetError::DimensionMismatch);
            }
        }
        for (i, h) in halfspaces.iter().enumerate() {
            if dot(h.normal.as_slice(), interior.as_slice()) >= h.offset {
                return Err(SetError::InteriorNotInterior(i));
            }
        }
        Ok(UncertaintySet::Polytope {
            halfspaces,
            interior,
        })
    }

    pub fn finite_points(points: Vec<Point>) -> Result<Self, SetError> {
        let dim = points.first().ok_or(SetError::NoPoints)?.dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(SetError::DimensionMismatch);
        }
        Ok(UncertaintySet::FinitePoints {
            points,
            hull: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            UncertaintySet::Box { lower, .. } => lower.dim(),
            UncertaintySet::Ball { center, .. } => center.dim(),
            UncertaintySet::Polytope { interior, .. } => interior.dim(),
            UncertaintySet::FinitePoints { points, .. } => points[0].dim(),
        }
    }

    /// Axis-aligned bounding box. For polytopes this is estimated from seeded
    /// hit-and-run samples and inflated by 10%, which is good enough for the
    /// defaults and proposal scales that consume it.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            UncertaintySet::Box { lower, upper } => (lower.clone(), upper.clone()),
            UncertaintySet::Ball { center, radius } => (
                Point::new(center.iter().map(|c| c - radius).collect()),
                Point::new(center.iter().map(|c| c + radius).collect()),
            ),
            UncertaintySet::FinitePoints { points, .. } => bounding_box_of(points),
            UncertaintySet::Polytope { interior, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(0xB0B0);
                let samples: Vec<Point> =
                    (0..256).map(|_| self.sample(&mut rng)).collect();
                let (mut lo, mut hi) = bounding_box_of(&samples);
                for i in 0..interior.dim() {
                    let c = 0.5 * (lo[i] + hi[i]);
                    lo[i] = c + 1.1 * (lo[i] - c);
                    hi[i] = c + 1.1 * (hi[i] - c);
                }
                (lo, hi)
            }
        }
    }

    /// Diagonal of the bounding box; an upper bound on the set's diameter.
    pub fn diameter_bound(&self) -> f64 {
        match self {
            UncertaintySet::Ball { radius, .. } => 2.0 * radius,
            _ => {
                let (lo, hi) = self.bounding_box();
                hi.sub(&lo).norm()
            }
        }
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        match self {
            UncertaintySet::Box { lower, upper } => (0..p.dim())
                .all(|i| p[i] >= lower[i] - tol && p[i] <= upper[i] + tol),
            UncertaintySet::Ball { center, radius } => p.dist(center) <= radius + tol,
            UncertaintySet::Polytope { halfspaces, .. } => halfspaces.iter().all(|h| {
                dot(h.normal.as_slice(), p.as_slice()) <= h.offset + tol * (1.0 + h.normal.norm())
            }),
            UncertaintySet::FinitePoints { .. } => match self.project(p) {
                Ok(q) => q.dist(p) <= tol,
                Err(_) => false,
            },
        }
    }

    /// Euclidean projection onto the set (onto the convex hull for finite
    /// point sets), accurate to 1e-9 or better.
    pub fn project(&self, p: &Point) -> Result<Point, SetError> {
        match self {
            UncertaintySet::Box { lower, upper } => Ok(Point::new(
                (0..p.dim())
                    .map(|i| p[i].clamp(lower[i], upper[i]))
                    .collect(),
            )),
            UncertaintySet::Ball { center, radius } => {
                let d = p.dist(center);
                if d <= *radius {
                    Ok(p.clone())
                } else {
                    Ok(center.axpy(radius / d, &p.sub(center)))
                }
            }
            UncertaintySet::Polytope { halfspaces, .. } => dykstra(halfspaces, p),
            UncertaintySet::FinitePoints { points, hull } => {
                let halfspaces = hull.get_or_init(|| hull_halfspaces(points));
                match halfspaces {
                    Some(hs) => dykstra(hs, p),
                    None => Ok(min_norm_projection(points, p)),
                }
            }
        }
    }

    /// Draw a point from the set: boxes and balls analytically, polytopes by
    /// hit-and-run from the certified interior point, finite point sets by a
    /// flat-Dirichlet convex combination of the points.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        match self {
            UncertaintySet::Box { lower, upper } => Point::new(
                (0..lower.dim())
                    .map(|i| {
                        if upper[i] > lower[i] {
                            rng.gen_range(lower[i]..upper[i])
                        } else {
                            lower[i]
                        }
                    })
                    .collect(),
            ),
            UncertaintySet::Ball { center, radius } => {
                let n = center.dim();
                let dir: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
                let len = norm(&dir).max(1e-300);
                let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
                Point::new(
                    center
                        .iter()
                        .zip(&dir)
                        .map(|(c, d)| c + r * d / len)
                        .collect(),
                )
            }
            UncertaintySet::Polytope {
                halfspaces,
                interior,
            } => hit_and_run(halfspaces, interior, rng),
            UncertaintySet::FinitePoints { points, .. } => {
                // Dirichlet(1,...,1) weights via normalized exponentials
                let mut weights: Vec<f64> = (0..points.len())
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= total;
                }
                let mut out = vec![0.0; points[0].dim()];
                for (w, p) in weights.iter().zip(points) {
                    for (o, v) in out.iter_mut().zip(p.iter()) {
                        *o += w * v;
                    }
                }
                Point::new(out)
            }
        }
    }
}

fn bounding_box_of(points: &[Point]) -> (Point, Point) {
    let dim = points[0].dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for i in 0..dim {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (Point::new(lo), Point::new(hi))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; 1 - u keeps the log argument positive
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

use rand::SeedableRng;

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

/// Dykstra's alternating projections onto an intersection of halfspaces.
fn dykstra(halfspaces: &[Halfspace], p: &Point) -> Result<Point, SetError> {
    let n = p.dim();
    let mut x = p.as_slice().to_vec();
    let mut corrections = vec![vec![0.0; n]; halfspaces.len()];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let sweep_start = x.clone();
        for (h, corr) in halfspaces.iter().zip(&mut corrections) {
            let y: Vec<f64> = x.iter().zip(corr.iter()).map(|(a, b)| a + b).collect();
            let a = h.normal.as_slice();
            let viol = dot(a, &y) - h.offset;
            let xn: Vec<f64> = if viol > 0.0 {
                let scale = viol / dot(a, a);
                y.iter().zip(a).map(|(v, ai)| v - scale * ai).collect()
            } else {
                y.clone()
            };
            for i in 0..n {
                corr[i] = y[i] - xn[i];
            }
            x = xn;
        }
        let moved: f64 = x
            .iter()
            .zip(&sweep_start)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if moved < DYKSTRA_TOL {
            return Ok(Point::new(x));
        }
    }
    Err(SetError::ProjectionNonConvergence)
}

/// Exact projection of `p` onto the convex hull of `points` by Wolfe's
/// min-norm-point method (translated so the query sits at the origin).
fn min_norm_projection(points: &[Point], p: &Point) -> Point {
    let n = p.dim();
    let w: Vec<Vec<f64>> = points
        .iter()
        .map(|v| v.sub(p).as_slice().to_vec())
        .collect();
    let scale = 1.0
        + w.iter()
            .map(|v| dot(v, v))
            .fold(0.0f64, f64::max);

    // start from the closest vertex
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, v) in w.iter().enumerate() {
        let d = dot(v, v);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let mut corral = vec![best];
    let mut lambda = vec![1.0f64];
    let mut x = w[best].clone();

    let majors = 16 * (points.len() + n) + 64;
    for _ in 0..majors {
        // linear minimization oracle over the vertices
        let mut j = 0;
        let mut jv = f64::INFINITY;
        for (i, v) in w.iter().enumerate() {
            let d = dot(&x, v);
            if d < jv {
                jv = d;
                j = i;
            }
        }
        let gap = dot(&x, &x) - jv;
        if gap <= 1e-13 * scale {
            break;
        }
        if !corral.contains(&j) {
            corral.push(j);
            lambda.push(0.0);
        }

        // minor loop: move to the affine minimizer over the corral, dropping
        // vertices whose coefficient would go nonpositive
        for _minor in 0..(2 * points.len() + 16) {
            let beta = affine_min_norm(&w, &corral);
            let Some(beta) = beta else { break };
            if beta.iter().all(|&b| b > 1e-12) {
                lambda = beta;
                break;
            }
            // largest feasible move toward beta
            let mut theta = 1.0f64;
            for (l, b) in lambda.iter().zip(&beta) {
                if *b < 1e-12 && l - b > 1e-300 {
                    theta = theta.min(l / (l - b));
                }
            }
            for (l, b) in lambda.iter_mut().zip(&beta) {
                *l = (1.0 - theta) * *l + theta * b;
            }
            let keep: Vec<usize> = (0..corral.len())
                .filter(|&i| lambda[i] > 1e-12)
                .collect();
            if keep.len() == corral.len() {
                // numerical stalemate: accept the current coefficients
                break;
            }
            corral = keep.iter().map(|&i| corral[i]).collect();
            lambda = keep.iter().map(|&i| lambda[i]).collect();
            let total: f64 = lambda.iter().sum();
            for l in &mut lambda {
                *l /= total;
            }
        }

        x = vec![0.0; n];
        for (l, &ci) in lambda.iter().zip(&corral) {
            for (xi, wi) in x.iter_mut().zip(&w[ci]) {
                *xi += l * wi;
            }
        }
    }
    Point::new(x.iter().zip(p.iter()).map(|(a, b)| a + b).collect())
}

/// Minimize `|| sum_i beta_i w_{corral[i]} ||` subject to `sum beta = 1`
/// (beta unconstrained in sign) via the KKT system.
fn affine_min_norm(w: &[Vec<f64>], corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let m = k + 1;
    let mut a = vec![0.0; m * m];
    let mut b = vec![0.0; m];
    for i in 0..k {
        for j in 0..k {
            a[i * m + j] = dot(&w[corral[i]], &w[corral[j]]);
        }
        a[i * m + k] = 1.0;
        a[k * m + i] = 1.0;
    }
    b[k] = 1.0;
    let sol = crate::linalg::gauss_solve(a.clone(), b.clone()).or_else(|| {
        let mut ridged = a;
        for i in 0..k {
            ridged[i * m + i] += 1e-12;
        }
        crate::linalg::gauss_solve(ridged, b)
    })?;
    Some(sol[..k].to_vec())
}

/// Hull of a 1-D or 2-D point set as halfspaces; `None` when the set needs the
/// min-norm-point route (dimension >= 3 or a degenerate 2-D hull).
fn hull_halfspaces(points: &[Point]) -> Option<Vec<Halfspace>> {
    let dim = points[0].dim();
    match dim {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points
                .iter()
                .map(|p| p[0])
                .fold(f64::NEG_INFINITY, f64::max);
            Some(vec![
                Halfspace {
                    normal: Point::new(vec![1.0]),
                    offset: hi,
                },
                Halfspace {
                    normal: Point::new(vec![-1.0]),
                    offset: -lo,
                },
            ])
        }
        2 => {
            let hull = monotone_chain(points);
            if hull.len() < 3 {
                return None; // collinear
            }
            let mut out = Vec::with_capacity(hull.len());
            for i in 0..hull.len() {
                let a = &hull[i];
                let b = &hull[(i + 1) % hull.len()];
                // counterclockwise hull: outward normal is the right-hand normal
                let normal = Point::new(vec![b[1] - a[1], a[0] - b[0]]);
                let offset = dot(normal.as_slice(), a.as_slice());
                out.push(Halfspace { normal, offset });
            }
            Some(out)
        }
        _ => None,
    }
}

/// Andrew's monotone chain; returns the hull counterclockwise.
fn monotone_chain(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() <= 2 {
        return pts.into_iter().map(|(x, y)| Point::new(vec![x, y])).collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Vec::new(); // collinear
    }
    lower.into_iter().map(|(x, y)| Point::new(vec![x, y])).collect()
}

fn hit_and_run(halfspaces: &[Halfspace], interior: &Point, rng: &mut ChaCha8Rng) -> Point {
    let n = interior.dim();
    let mut z = interior.as_slice().to_vec();
    for _ in 0..HIT_AND_RUN_BURN_IN {
        let dir: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let len = norm(&dir).max(1e-300);
        let dir: Vec<f64> = dir.iter().map(|d| d / len).collect();
        // chord of the polytope along dir; clamped as a guard against
        // unbounded declarations
        let mut lo = -1e9f64;
        let mut hi = 1e9f64;
        for h in halfspaces {
            let a = h.normal.as_slice();
            let ad = dot(a, &dir);
            let slack = h.offset - dot(a, &z);
            if ad > 1e-300 {
                hi = hi.min(slack / ad);
            } else if ad < -1e-300 {
                lo = lo.max(slack / ad);
            }
        }
        if hi <= lo {
            continue;
        }
        let tau = rng.gen_range(lo..hi);
        for i in 0..n {
            z[i] += tau * dir[i];
        }
    }
    Point::new(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn pts(coords: &[&[f64]]) -> Vec<Point> {
        coords.iter().map(|c| Point::new(c.to_vec())).collect()
    }

    #[test]
    fn box_projection_clamps() {
        let set = UncertaintySet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let q = set.project(&Point::new(vec![2.0, -1.0])).unwrap();
        assert_eq!(q.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn ball_projection_scales_radially() {
        let set = UncertaintySet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let q = set.project(&Point::new(vec![3.0, 4.0])).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-12);
        assert!((q[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn projection_is_identity_inside() {
        let sets = [
            UncertaintySet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            UncertaintySet::ball(vec![0.5, 0.5], 1.0).unwrap(),
            UncertaintySet::finite_points(pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]))
                .unwrap(),
        ];
        let inside = Point::new(vec![0.5, 0.4]);
        for set in &sets {
            let q = set.project(&inside).unwrap();
            assert!(q.dist(&inside) <= 1e-9, "{set:?}");
        }
    }

    #[test]
    fn triangle_hull_projection_matches_min_norm_route() {
        let points = pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]);
        let set = UncertaintySet::finite_points(points.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = Point::new(vec![rng.gen_range(-2.0..4.0), rng.gen_range(-2.0..4.0)]);
            let via_halfspaces = set.project(&p).unwrap();
            let via_mnp = min_norm_projection(&points, &p);
            assert!(
                via_halfspaces.dist(&via_mnp) <= 1e-7,
                "{:?} vs {:?} for query {:?}",
                via_halfspaces,
                via_mnp,
                p
            );
        }
    }

    #[test]
    fn min_norm_projection_in_five_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<Point> = (0..30)
            .map(|_| Point::new((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let set = UncertaintySet::finite_points(points.clone()).unwrap();
        for _ in 0..50 {
            let p = Point::new((0..5).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>());
            let q = set.project(&p).unwrap();
            // projection is idempotent
            let q2 = set.project(&q).unwrap();
            assert!(q.dist(&q2) <= 1e-8, "not idempotent: {}", q.dist(&q2));
            // and optimal: no vertex direction improves the distance
            // (first-order condition <p - q, v - q> <= tol for all vertices)
            for v in &points {
                let lhs: f64 = (0..5).map(|i| (p[i] - q[i]) * (v[i] - q[i])).sum();
                assert!(lhs <= 1e-7, "improving direction found: {lhs}");
            }
        }
    }

    #[test]
    fn projections_are_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let tri = pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]);
        let sets = [
            UncertaintySet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            UncertaintySet::ball(vec![0.0, 0.0], 1.0).unwrap(),
            UncertaintySet::polytope(
                vec![
                    Halfspace {
                        normal: Point::new(vec![-1.0, 0.0]),
                        offset: 0.0,
                    },
                    Halfspace {
                        normal: Point::new(vec![0.0, -1.0]),
                        offset: 0.0,
                    },
                    Halfspace {
                        normal: Point::new(vec![1.0, 1.0]),
                        offset: 2.0,
                    },
                ],
                Point::new(vec![0.5, 0.5]),
            )
            .unwrap(),
            UncertaintySet::finite_points(tri).unwrap(),
        ];
        for set in &sets {
            for _ in 0..1000 {
                let a = Point::new(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
                let b = Point::new(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
                let pa = set.project(&a).unwrap();
                let pb = set.project(&b).unwrap();
                assert!(
                    pa.dist(&pb) <= a.dist(&b) + 1e-8,
                    "expansion: {} vs {}",
                    pa.dist(&pb),
                    a.dist(&b)
                );
            }
        }
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tri = pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]);
        let sets = [
            UncertaintySet::axis_box(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap(),
            UncertaintySet::ball(vec![1.0, 1.0], 0.5).unwrap(),
            UncertaintySet::polytope(
                vec![
                    Halfspace {
                        normal: Point::new(vec![-1.0, 0.0]),
                        offset: 0.0,
                    },
                    Halfspace {
                        normal: Point::new(vec![0.0, -1.0]),
                        offset: 0.0,
                    },
                    Halfspace {
                        normal: Point::new(vec![1.0, 1.0]),
                        offset: 2.0,
                    },
                ],
                Point::new(vec![0.5, 0.5]),
            )
            .unwrap(),
            UncertaintySet::finite_points(tri).unwrap(),
        ];
        for set in &sets {
            for _ in 0..200 {
                let s = set.sample(&mut rng);
                assert!(set.contains(&s, 1e-7), "sample {s:?} escaped {set:?}");
            }
        }
    }

    #[test]
    fn collinear_finite_points_fall_back_to_min_norm() {
        let set =
            UncertaintySet::finite_points(pts(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]])).unwrap();
        let q = set.project(&Point::new(vec![2.0, 0.0])).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-8 && (q[1] - 1.0).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn degenerate_box_samples_its_point() {
        let set = UncertaintySet::axis_box(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(set.sample(&mut rng).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            UncertaintySet::axis_box(vec![1.0], vec![0.0]),
            Err(SetError::BoxBoundsInverted(0))
        ));
        assert!(matches!(
            UncertaintySet::ball(vec![0.0], 0.0),
            Err(SetError::NonPositiveRadius(_))
        ));
        assert!(matches!(
            UncertaintySet::finite_points(vec![]),
            Err(SetError::NoPoints)
        ));
        assert!(matches!(
            UncertaintySet::polytope(
                vec![Halfspace {
                    normal: Point::new(vec![1.0]),
                    offset: 0.0,
                }],
                Point::new(vec![1.0]),
            ),
            Err(SetError::InteriorNotInterior(0))
        ));
    }
}
