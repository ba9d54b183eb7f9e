//! Closed-form incompatibility of the symmetric families, the angles where
//! their formulas change piece, and graded-symmetry utilities.
//!
//! All angles are in degrees.

use std::sync::OnceLock;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{family_triplet, Family};
use crate::geometry::Vec3;
use crate::mur::analyze;
use crate::qubit::{BinaryMeasurement, Triplet};

/// Δ_o = 2(√3 cos γ − 1), clamped at zero.
pub fn delta_orthogonal(gamma_deg: f64) -> f64 {
    (2.0 * (3f64.sqrt() * gamma_deg.to_radians().cos() - 1.0)).max(0.0)
}

/// Compatibility threshold of the orthogonal family, arccos(1/√3).
pub fn orthogonal_threshold_deg() -> f64 {
    (1.0 / 3f64.sqrt()).acos().to_degrees()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numeric(format!(
            "root not bracketed on [{lo}, {hi}]: f = {flo}, {fhi}"
        )));
    }
    let lo_sign = flo.signum();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section minimization on [lo, hi].
fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Dense scan followed by golden-section refinement around the best sample.
fn scan_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, samples: usize, tol: f64) -> (f64, f64) {
    let step = (hi - lo) / (samples - 1) as f64;
    let best = (0..samples)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(lo);
    golden_min(&f, (best - step).max(lo), (best + step).min(hi), tol)
}

/// δ − min_k |p_k − p_f|: nonpositive exactly where the bound is attainable.
fn attainability_margin(family: Family, gamma_deg: f64) -> f64 {
    family_triplet(family, gamma_deg)
        .and_then(|t| analyze(&t))
        .map(|r| r.delta - r.min_distance)
        .unwrap_or(f64::NAN)
}

/// The three expressions of Δ_⊥, all evaluated at γ.
pub fn delta_perp_pieces(gamma_deg: f64) -> Result<[f64; 3]> {
    let g = gamma_deg.to_radians();
    let s2 = (2.0 * g).sin().max(0.0);
    let c2 = (2.0 * g).cos().abs();
    let first = 2.0 * (2.0 + s2).sqrt() - 2.0;
    let second = 2.0 * (3.0 + s2 - 2.0 * s2.sqrt() - 2.0 * c2).max(0.0).sqrt();
    let t = perp_root(c2)?;
    let third = (1.0 - t.cos()) * (1.0 / (t.cos() * t.cos()) + 3.0).sqrt();
    Ok([first, second, third])
}

/// g(t) = tan²t (1 + 3 cos t)²/8 − 1, increasing on (0, π/2).
pub fn perp_root_function(t: f64) -> f64 {
    t.tan().powi(2) * (1.0 + 3.0 * t.cos()).powi(2) / 8.0 - 1.0
}

/// t ∈ (0, π/2) with g(t) = |cos 2γ|.
fn perp_root(c2: f64) -> Result<f64> {
    let lo = 1e-9;
    let hi = std::f64::consts::FRAC_PI_2 - 1e-9;
    let f = |t: f64| perp_root_function(t) - c2;
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::Numeric(format!(
            "bracket [{lo}, {hi}] does not straddle |cos2γ| = {c2}: g = {}, {}",
            f(lo),
            f(hi)
        )));
    }
    bisect(f, lo, hi, 1e-13)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub first: f64,
    pub second: f64,
}

/// (Γ0, Γ1) of the M_⊥ formula as offsets |γ − 45°|.
///
/// Γ0 is where the bound stops being attainable; Γ1 is where the second and
/// third expressions meet (they touch without crossing, so it is located as
/// the minimizer of their difference).
pub fn perp_thresholds() -> Result<Thresholds> {
    static CELL: OnceLock<std::result::Result<Thresholds, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let compute = || -> Result<Thresholds> {
            let edge = bisect(|g| attainability_margin(Family::MPerp, g), 1.0, 45.0, 1e-10)?;
            let gamma0 = 45.0 - edge;
            let gap = |d: f64| {
                delta_perp_pieces(45.0 - d)
                    .map(|p| p[1] - p[2])
                    .unwrap_or(f64::INFINITY)
            };
            let (gamma1, _) = scan_min(gap, gamma0, 44.5, 500, 1e-9);
            Ok(Thresholds { first: gamma0, second: gamma1 })
        };
        compute().map_err(|e| e.to_string())
    })
    .clone()
    .map_err(Error::Numeric)
}

/// Incompatibility of the M_⊥ family.
pub fn delta_perp(gamma_deg: f64) -> Result<f64> {
    if !(0.0..=90.0).contains(&gamma_deg) {
        return Err(Error::InvalidInput(format!("γ = {gamma_deg}° outside [0°, 90°]")));
    }
    let th = perp_thresholds()?;
    let pieces = delta_perp_pieces(gamma_deg)?;
    let d = (gamma_deg - 45.0).abs();
    Ok(if d <= th.first {
        pieces[0]
    } else if d < th.second {
        pieces[1]
    } else {
        pieces[2]
    })
}

/// The three expressions of Δ_Y, all evaluated at γ.
pub fn delta_y_pieces(gamma_deg: f64) -> [f64; 3] {
    let g = gamma_deg.to_radians();
    let (s, c) = g.sin_cos();
    let r2 = 2f64.sqrt();
    let first = 2.0 * c + 2.0 * r2 * s - 2.0;
    let second = r2 * s + 4.0 * c - 2.0 * (2.0 / 3.0 - (s - r2 * c).powi(2)).max(0.0).sqrt();
    let circle = |th: f64| {
        let (x, y) = (th.cos() / 3.0, th.sin() / 3.0);
        2.0 * ((c - x).powi(2) + 4.0 * (s - 2.0 * y).powi(2)).sqrt()
    };
    let step = std::f64::consts::TAU / 720.0;
    let best = (0..721)
        .map(|i| i as f64 * step)
        .min_by(|a, b| circle(*a).total_cmp(&circle(*b)))
        .unwrap_or(0.0);
    let (_, third) = golden_min(circle, best - step, best + step, 1e-10);
    [first, second, third]
}

/// (γ0, γ1) of the M_Y formula, in degrees.
pub fn y_thresholds() -> Result<Thresholds> {
    static CELL: OnceLock<std::result::Result<Thresholds, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let compute = || -> Result<Thresholds> {
            let gamma0 = bisect(|g| attainability_margin(Family::MY, g), 45.0, 89.0, 1e-10)?;
            let gap = |g: f64| {
                let p = delta_y_pieces(g);
                p[1] - p[2]
            };
            let (gamma1, _) = scan_min(gap, gamma0, 89.5, 500, 1e-9);
            Ok(Thresholds { first: gamma0, second: gamma1 })
        };
        compute().map_err(|e| e.to_string())
    })
    .clone()
    .map_err(Error::Numeric)
}

/// Incompatibility of the M_Y family.
pub fn delta_y(gamma_deg: f64) -> Result<f64> {
    if !(0.0..=90.0).contains(&gamma_deg) {
        return Err(Error::InvalidInput(format!("γ = {gamma_deg}° outside [0°, 90°]")));
    }
    let th = y_thresholds()?;
    let p = delta_y_pieces(gamma_deg);
    Ok(if gamma_deg <= th.first {
        p[0]
    } else if gamma_deg <= th.second {
        p[1]
    } else {
        p[2]
    })
}

/// Reflection g with g·m_j = ω_j m_σ(j).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradedSymmetry {
    pub reflection: Matrix3<f64>,
    /// σ as images of 0, 1, 2.
    pub permutation: [usize; 3],
    pub signs: [f64; 3],
}

impl GradedSymmetry {
    /// max_j |g·v_j − ω_j v_σ(j)|.
    pub fn residual(&self, v: &[Vec3; 3]) -> f64 {
        (0..3)
            .map(|j| (v[j].transform(&self.reflection) - v[self.permutation[j]] * self.signs[j]).max_abs())
            .fold(0.0, f64::max)
    }
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Best orthogonal Q with det Q = −1 mapping sources onto targets.
fn aligned_improper(src: &[Vec3; 3], dst: &[Vec3; 3]) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for j in 0..3 {
        h += dst[j].to_na() * src[j].to_na().transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap_or_default(), svd.v_t.unwrap_or_default());
    let smallest = (0..3)
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .unwrap_or(2);
    let mut d = Matrix3::identity();
    d[(smallest, smallest)] = -(u.determinant() * vt.determinant()).signum();
    u * d * vt
}

fn is_plane_reflection(q: &Matrix3<f64>) -> bool {
    let orth = (q.transpose() * q - Matrix3::identity()).abs().max();
    let sym = (q - q.transpose()).abs().max();
    orth <= 1e-10 && sym <= 1e-10 && (q.determinant() + 1.0).abs() <= 1e-10 && (q.trace() - 1.0).abs() <= 1e-8
}

/// All graded symmetries (plane reflections) of the triplet's Bloch vectors.
pub fn detect_graded_symmetries(t: &Triplet) -> Vec<GradedSymmetry> {
    let m = t.bloch();
    let mut out = Vec::new();
    for perm in PERMUTATIONS {
        for code in 0..8 {
            let signs = [0, 1, 2].map(|j| if (code >> (2 - j)) & 1 == 0 { 1.0 } else { -1.0 });
            let target = [0, 1, 2].map(|j| m[perm[j]] * signs[j]);
            let q = aligned_improper(&m, &target);
            if !is_plane_reflection(&q) {
                continue;
            }
            let sym = GradedSymmetry { reflection: q, permutation: perm, signs };
            if sym.residual(&m) <= 1e-8 {
                out.push(sym);
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
struct GroupElement {
    q: Matrix3<f64>,
    perm: [usize; 3],
    signs: [f64; 3],
}

impl GroupElement {
    /// (self ∘ other): apply `other` first.
    fn after(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            q: self.q * other.q,
            perm: [0, 1, 2].map(|j| self.perm[other.perm[j]]),
            signs: [0, 1, 2].map(|j| other.signs[j] * self.signs[other.perm[j]]),
        }
    }

    fn same(&self, other: &GroupElement) -> bool {
        self.perm == other.perm && self.signs == other.signs && (self.q - other.q).abs().max() < 1e-6
    }

    /// (T_g n)_σ(j) = ω_j Q n_j.
    fn act(&self, n: &[Vec3; 3]) -> [Vec3; 3] {
        let mut out = [Vec3::ZERO; 3];
        for j in 0..3 {
            out[self.perm[j]] = n[j].transform(&self.q) * self.signs[j];
        }
        out
    }
}

/// Orbit average of an unbiased triplet over the group generated by `syms`.
pub fn symmetrize(n: &Triplet, syms: &[GradedSymmetry]) -> Result<Triplet> {
    if !n.is_unbiased(1e-12) {
        return Err(Error::Precondition("symmetrization needs an unbiased triplet".into()));
    }
    let gens: Vec<GroupElement> = syms
        .iter()
        .map(|s| GroupElement { q: s.reflection, perm: s.permutation, signs: s.signs })
        .collect();
    let mut group = vec![GroupElement { q: Matrix3::identity(), perm: [0, 1, 2], signs: [1.0; 3] }];
    let mut frontier = 0;
    while frontier < group.len() {
        let current = group[frontier].clone();
        frontier += 1;
        for g in &gens {
            let next = g.after(&current);
            if !group.iter().any(|e| e.same(&next)) {
                group.push(next);
                if group.len() > 48 {
                    return Err(Error::InvalidSymmetry("generated group exceeds 48 elements".into()));
                }
            }
        }
    }
    let v = n.bloch();
    let mut acc = [Vec3::ZERO; 3];
    for g in &group {
        let img = g.act(&v);
        for j in 0..3 {
            acc[j] += img[j];
        }
    }
    let k = group.len() as f64;
    Ok(Triplet::new(acc.map(|a| BinaryMeasurement { x: 0.0, m: a / k })))
}
