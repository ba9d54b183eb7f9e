//! Sign algebra of the diagonal vectors, the joint-measurability criterion for
//! unbiased triplets, and the measurement uncertainty lower bound with its
//! attainability test and closed-form optimal approximators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fermat_torricelli, Vec3};
use crate::qubit::{BinaryMeasurement, Triplet};

/// Slack on the Σ|p_k − p_f| ≤ 4 test.
pub const COMPATIBILITY_TOL: f64 = 1e-9;
/// Slack on δ ≤ min_k |p_k − p_f|.
pub const ATTAINABILITY_TOL: f64 = 1e-9;
pub const FT_TOL: f64 = 1e-13;

/// γ_jk = (−1)^(k⌊j/2⌋ + j⌊k/2⌋) for j = 1..3 (rows) and k = 0..3 (columns).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GammaMatrix {
    pub entries: [[i8; 4]; 3],
}

impl GammaMatrix {
    /// Entry for zero-based row `j` (observable j + 1) and column `k`.
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[j][k] as f64
    }

    /// Σ_k γ_jk γ_j'k; equals 4δ_jj'.
    pub fn row_products(&self) -> [[i32; 3]; 3] {
        let mut out = [[0; 3]; 3];
        for (j, row) in out.iter_mut().enumerate() {
            for (jp, v) in row.iter_mut().enumerate() {
                *v = (0..4)
                    .map(|k| self.entries[j][k] as i32 * self.entries[jp][k] as i32)
                    .sum();
            }
        }
        out
    }
}

pub fn gamma() -> GammaMatrix {
    let mut entries = [[0i8; 4]; 3];
    for (row, jr) in entries.iter_mut().zip(1usize..=3) {
        for (k, e) in row.iter_mut().enumerate() {
            let exponent = k * (jr / 2) + jr * (k / 2);
            *e = if exponent % 2 == 0 { 1 } else { -1 };
        }
    }
    GammaMatrix { entries }
}

/// q_k = Σ_j γ_jk v_j.
pub fn signed_sums(v: &[Vec3; 3]) -> [Vec3; 4] {
    let g = gamma();
    [0, 1, 2, 3].map(|k| (0..3).map(|j| v[j] * g.get(j, k)).sum())
}

/// Inverse of [`signed_sums`]: v_j = (1/4) Σ_k γ_jk q_k.
pub fn recover_from_sums(q: &[Vec3; 4]) -> [Vec3; 3] {
    let g = gamma();
    [0, 1, 2].map(|j| (0..4).map(|k| q[k] * g.get(j, k)).sum::<Vec3>() / 4.0)
}

/// The diagonal vectors p_k of a triplet's Bloch parts.
pub fn diagonal_vectors(t: &Triplet) -> [Vec3; 4] {
    signed_sums(&t.bloch())
}

/// Σ_k |q_k − q_f| for Bloch vectors `v`, with q_f their FT point.
pub fn compatibility_lhs(v: &[Vec3; 3]) -> Result<f64> {
    Ok(fermat_torricelli(&signed_sums(v), FT_TOL)?.total_distance)
}

/// The worst-case objective 2 max_k |Σ_j γ_jk (m_j − n_j)|.
pub fn protocol_objective(m: &[Vec3; 3], n: &[Vec3; 3]) -> f64 {
    let c = [0, 1, 2].map(|j| m[j] - n[j]);
    2.0 * signed_sums(&c).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MurReport {
    pub p: [Vec3; 4],
    pub p_f: Vec3,
    /// Σ_k |p_k − p_f|.
    pub lhs: f64,
    pub jointly_measurable: bool,
    /// δ = lhs/4 − 1, unclamped.
    pub delta: f64,
    /// 2δ clamped at zero.
    pub lower_bound: f64,
    pub attainable: bool,
    /// min_k |p_k − p_f|.
    pub min_distance: f64,
}

pub fn analyze(t: &Triplet) -> Result<MurReport> {
    if !t.is_unbiased(1e-12) {
        return Err(Error::Unsupported(format!(
            "compatibility criterion needs unbiased observables, biases are {:?}",
            t.biases()
        )));
    }
    let p = diagonal_vectors(t);
    let ft = fermat_torricelli(&p, FT_TOL)?;
    let lhs = ft.total_distance;
    let delta = lhs / 4.0 - 1.0;
    let min_distance = p.iter().map(|pk| pk.distance(ft.point)).fold(f64::INFINITY, f64::min);
    Ok(MurReport {
        p,
        p_f: ft.point,
        lhs,
        jointly_measurable: lhs <= 4.0 + COMPATIBILITY_TOL,
        delta,
        lower_bound: (2.0 * delta).max(0.0),
        attainable: delta <= min_distance + ATTAINABILITY_TOL,
        min_distance,
    })
}

pub fn is_jointly_measurable(t: &Triplet) -> Result<bool> {
    Ok(analyze(t)?.jointly_measurable)
}

/// n_j = m_j + (δ/4) Σ_k γ_jk (p_f − p_k)/|p_f − p_k|, valid when the bound
/// is attainable.
pub fn optimal_triplet_thm1(t: &Triplet) -> Result<Triplet> {
    let report = analyze(t)?;
    if !report.attainable {
        return Err(Error::Precondition(format!(
            "bound not attainable: δ = {} > min_k |p_k − p_f| = {}",
            report.delta, report.min_distance
        )));
    }
    if report.delta <= 0.0 {
        return Ok(*t);
    }
    let mut units = [Vec3::ZERO; 4];
    for (u, pk) in units.iter_mut().zip(&report.p) {
        *u = (report.p_f - *pk).normalized().ok_or_else(|| {
            Error::DegenerateGeometry("FT point coincides with a diagonal vector".into())
        })?;
    }
    let g = gamma();
    let m = t.bloch();
    let n = [0, 1, 2].map(|j| {
        let corr: Vec3 = (0..4).map(|k| units[k] * g.get(j, k)).sum();
        m[j] + corr * (report.delta / 4.0)
    });
    Ok(Triplet::new(n.map(|m| BinaryMeasurement { x: 0.0, m })))
}
