//! Euclidean 3-space primitives and the Fermat–Torricelli point (geometric
//! median) of small point sets.
//!
//! The median is found with a vertex-aware Weiszfeld iteration followed by a
//! damped Newton polish. Vertex optima are detected exactly through the
//! subgradient condition, so degenerate configurations (the median sitting on
//! one of the inputs) return that input bit-for-bit.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this are merged into one weighted vertex.
pub const MERGE_TOL: f64 = 1e-12;

const MAX_ITERATIONS: usize = 10_000;

/// Real 3-vector (Bloch vectors, diagonal vectors, FT points).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Unit vector along `self`, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_na(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_na(v: &Vector3<f64>) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }

    /// Applies a 3×3 matrix.
    pub fn transform(self, m: &Matrix3<f64>) -> Vec3 {
        Vec3::from_na(&(m * self.to_na()))
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl std::iter::Sum for Vec3 {
    fn sum<I: Iterator<Item = Vec3>>(iter: I) -> Vec3 {
        iter.fold(Vec3::ZERO, |a, b| a + b)
    }
}

/// Result of a Fermat–Torricelli computation.
#[derive(Clone, Debug, PartialEq)]
pub struct FtResult {
    pub point: Vec3,
    /// Σ_k |points_k − point|.
    pub total_distance: f64,
    /// Index of the input point the median coincides with, if any.
    pub at_vertex: Option<usize>,
    pub iterations: usize,
}

/// Sum of distances from `p` to every point.
pub fn distance_sum(points: &[Vec3], p: Vec3) -> f64 {
    points.iter().map(|q| q.distance(p)).sum()
}

/// Fermat–Torricelli point of four points: the minimizer of Σ_k |points_k − p|.
///
/// `tol` bounds the objective improvement at which the iteration stops.
pub fn fermat_torricelli(points: &[Vec3; 4], tol: f64) -> Result<FtResult> {
    geometric_median(points, tol)
}

struct Vertex {
    point: Vec3,
    weight: f64,
    first_index: usize,
}

fn merge_points(points: &[Vec3]) -> Vec<Vertex> {
    let mut vertices: Vec<Vertex> = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        match vertices.iter_mut().find(|v| v.point.distance(p) < MERGE_TOL) {
            Some(v) => v.weight += 1.0,
            None => vertices.push(Vertex {
                point: p,
                weight: 1.0,
                first_index: i,
            }),
        }
    }
    vertices
}

/// Σ over vertices other than `skip` of w·(v − y)/|v − y|.
fn pull(vertices: &[Vertex], y: Vec3, skip: Option<usize>) -> Vec3 {
    vertices
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .filter_map(|(_, v)| {
            let d = v.point - y;
            let n = d.norm();
            (n > 0.0).then(|| d * (v.weight / n))
        })
        .sum()
}

fn weighted_sum(vertices: &[Vertex], y: Vec3) -> f64 {
    vertices.iter().map(|v| v.weight * v.point.distance(y)).sum()
}

/// One modified-Weiszfeld (Vardi–Zhang) step; well defined at vertices.
fn weiszfeld_step(vertices: &[Vertex], y: Vec3) -> Vec3 {
    let here = vertices
        .iter()
        .position(|v| v.point.distance(y) < MERGE_TOL);
    let mut num = Vec3::ZERO;
    let mut den = 0.0;
    for (i, v) in vertices.iter().enumerate() {
        if Some(i) == here {
            continue;
        }
        let d = v.point.distance(y);
        num += v.point * (v.weight / d);
        den += v.weight / d;
    }
    if den == 0.0 {
        return y;
    }
    let plain = num / den;
    match here {
        None => plain,
        Some(i) => {
            let eta = vertices[i].weight;
            let r = pull(vertices, y, Some(i)).norm();
            if r <= eta {
                y
            } else {
                let t = eta / r;
                plain * (1.0 - t) + y * t
            }
        }
    }
}

/// Damped Newton refinement away from vertices. Only accepts decreasing steps.
fn newton_polish(vertices: &[Vertex], mut y: Vec3, mut f: f64) -> (Vec3, f64, usize) {
    let mut iters = 0;
    for _ in 0..60 {
        if vertices.iter().any(|v| v.point.distance(y) < MERGE_TOL) {
            break;
        }
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        for v in vertices {
            let d = y - v.point;
            let n = d.norm();
            let u = d.to_na() / n;
            grad += u * v.weight;
            hess += (Matrix3::identity() - u * u.transpose()) * (v.weight / n);
        }
        if grad.norm() <= 1e-15 * (1.0 + f) {
            break;
        }
        let reg = 1e-14 * (1.0 + hess.trace());
        let step = match (hess + Matrix3::identity() * reg).cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => break,
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = y + Vec3::from_na(&step) * t;
            let fc = weighted_sum(vertices, cand);
            if fc < f {
                y = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iters += 1;
        if !accepted {
            break;
        }
    }
    (y, f, iters)
}

/// Geometric median of any non-empty point set with unit weights.
pub(crate) fn geometric_median(points: &[Vec3], tol: f64) -> Result<FtResult> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points".into()));
    }
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite point {p}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }

    let vertices = merge_points(points);
    let vertex_result = |i: usize, iterations: usize| {
        let v = &vertices[i];
        FtResult {
            point: v.point,
            total_distance: distance_sum(points, v.point),
            at_vertex: Some(v.first_index),
            iterations,
        }
    };
    if vertices.len() == 1 {
        return Ok(vertex_result(0, 0));
    }

    // A vertex v of weight η is optimal iff the pull of the others has norm ≤ η.
    let optimal_vertex = (0..vertices.len())
        .filter(|&i| pull(&vertices, vertices[i].point, Some(i)).norm() <= vertices[i].weight)
        .min_by(|&a, &b| {
            weighted_sum(&vertices, vertices[a].point)
                .total_cmp(&weighted_sum(&vertices, vertices[b].point))
        });
    if let Some(i) = optimal_vertex {
        return Ok(vertex_result(i, 0));
    }

    let total_weight: f64 = vertices.iter().map(|v| v.weight).sum();
    let mut y = vertices.iter().map(|v| v.point * v.weight).sum::<Vec3>() / total_weight;
    let mut f = weighted_sum(&vertices, y);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let next = weiszfeld_step(&vertices, y);
        let fn_ = weighted_sum(&vertices, next);
        iterations += 1;
        if fn_ > f {
            break;
        }
        let improvement = f - fn_;
        y = next;
        f = fn_;
        if improvement < tol {
            break;
        }
    }
    let (y, _, polish) = newton_polish(&vertices, y, f);
    iterations += polish;

    // Iterates never land on an optimal vertex here (ruled out above), but a
    // coincidence with a non-optimal one is still reported faithfully.
    let at_vertex = vertices
        .iter()
        .find(|v| v.point == y)
        .map(|v| v.first_index);
    Ok(FtResult {
        point: y,
        total_distance: distance_sum(points, y),
        at_vertex,
        iterations,
    })
}

/// Geometric median by a method sharing nothing with [`fermat_torricelli`]: a
/// coarse grid over the bounding box, seeded with the inputs themselves,
/// Newton continuation on the smoothed sum Σ √(|x − p|² + ε²), then a
/// shrinking pattern search over the 26 lattice directions.
pub fn ft_oracle(points: &[Vec3; 4]) -> Vec3 {
    let f = |p: Vec3| distance_sum(points, p);
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points.iter() {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let span = (hi - lo).max_abs();
    if span == 0.0 {
        return points[0];
    }

    let grid = 16;
    let mut best = points[0];
    let mut best_f = f(best);
    for p in points.iter() {
        let fp = f(*p);
        if fp < best_f {
            best = *p;
            best_f = fp;
        }
    }
    for i in 0..=grid {
        for j in 0..=grid {
            for k in 0..=grid {
                let t = |a: usize| a as f64 / grid as f64;
                let p = Vec3::new(
                    lo.x + (hi.x - lo.x) * t(i),
                    lo.y + (hi.y - lo.y) * t(j),
                    lo.z + (hi.z - lo.z) * t(k),
                );
                let fp = f(p);
                if fp < best_f {
                    best = p;
                    best_f = fp;
                }
            }
        }
    }

    let mut x = best;
    let mut eps = span * 0.1;
    while eps > 1e-11 * span {
        let fe = |q: Vec3| points.iter().map(|p| ((q - *p).norm_sq() + eps * eps).sqrt()).sum::<f64>();
        for _ in 0..50 {
            let mut grad = Vector3::zeros();
            let mut hess = Matrix3::zeros();
            for p in points.iter() {
                let d = (x - *p).to_na();
                let r = (d.norm_squared() + eps * eps).sqrt();
                grad += d / r;
                hess += Matrix3::identity() / r - d * d.transpose() / (r * r * r);
            }
            let Some(step) = hess.lu().solve(&grad) else { break };
            let step = Vec3::from_na(&step);
            let f0 = fe(x);
            let mut t = 1.0;
            while t > 1e-12 && fe(x - step * t) > f0 {
                t *= 0.5;
            }
            x -= step * t;
            if step.norm() * t <= 1e-15 * span {
                break;
            }
        }
        eps *= 0.1;
    }
    if f(x) < best_f {
        best = x;
        best_f = f(x);
    }

    let mut dirs = Vec::with_capacity(26);
    for dx in -1i32..=1 {
        for dy in -1i32..=1 {
            for dz in -1i32..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    let d = Vec3::new(dx as f64, dy as f64, dz as f64);
                    dirs.push(d / d.norm());
                }
            }
        }
    }
    let mut step = span / grid as f64;
    while step > 1e-13 * span.max(1.0) {
        let mut moved = false;
        for d in &dirs {
            let cand = best + *d * step;
            let fc = f(cand);
            if fc < best_f {
                best = cand;
                best_f = fc;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}
