//! Physical parent measurement for a jointly measurable unbiased triplet:
//! pick setting k with probability P_k = |q_k − q_f|/4, measure the qubit
//! along u_k = (q_k − q_f)/|q_k − q_f|, and read observable j as
//! μ = γ_jk μ_k. Here q_k = Σ_j γ_jk n_j and q_f is their FT point.
//!
//! A triplet strictly inside the compatible region has Σ P_k < 1; the
//! remaining weight goes to a trivial setting (an identity measurement read
//! as a fair coin, outcome labels `(4, ±1)`), which keeps every marginal
//! unbiased and the readout deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fermat_torricelli, Vec3};
use crate::mur::{gamma, signed_sums, FT_TOL};
use crate::qubit::{marginalize, Effect, Label, ParentPovm, PostProcessing, Triplet};

pub const SATURATION_TOL: f64 = 1e-7;
const ZERO_WEIGHT: f64 = 1e-12;
/// Label index of the trivial setting.
pub const IDENTITY_SETTING: i32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentDesign {
    /// P_k for the four projective settings.
    pub probabilities: [f64; 4],
    /// u_k; `None` when P_k vanishes.
    pub directions: [Option<Vec3>; 4],
    /// Probability of the trivial setting (zero for saturating triplets).
    pub identity_weight: f64,
    pub parent: ParentPovm,
    pub post: PostProcessing,
}

/// Parent for a triplet on the boundary Σ_k |q_k − q_f| = 4.
pub fn build_parent(n: &Triplet) -> Result<ParentDesign> {
    design(n, true)
}

/// Parent for any jointly measurable unbiased triplet (Σ_k |q_k − q_f| ≤ 4),
/// padding with the trivial setting.
pub fn build_parent_padded(n: &Triplet) -> Result<ParentDesign> {
    design(n, false)
}

fn design(n: &Triplet, require_saturation: bool) -> Result<ParentDesign> {
    if !n.is_unbiased(1e-12) {
        return Err(Error::Precondition(format!("parent construction needs unbiased observables, biases {:?}", n.biases())));
    }
    let q = signed_sums(&n.bloch());
    let ft = fermat_torricelli(&q, FT_TOL)?;
    let lhs = ft.total_distance;
    if lhs > 4.0 + SATURATION_TOL || (require_saturation && (lhs - 4.0).abs() > SATURATION_TOL) {
        return Err(Error::Precondition(format!(
            "Σ_k |q_k − q_f| = {lhs} is not on the compatibility boundary 4"
        )));
    }
    // Beyond 4 (inside tolerance) the weights are renormalized.
    let norm = 4f64.max(lhs);

    let g = gamma();
    let mut probabilities = [0.0; 4];
    let mut directions = [None; 4];
    let mut outcomes = Vec::with_capacity(10);
    let mut table = Vec::with_capacity(10);
    for k in 0..4 {
        let d = q[k] - ft.point;
        let dist = d.norm();
        let pk = dist / norm;
        probabilities[k] = pk;
        if pk <= ZERO_WEIGHT {
            continue;
        }
        let u = d / dist;
        directions[k] = Some(u);
        for mu in [1i32, -1] {
            let label = Label(vec![k as i32, mu]);
            outcomes.push((label.clone(), Effect { a: pk, b: u * (mu as f64 * pk) }));
            table.push((label, [0, 1, 2].map(|j| (1.0 + g.get(j, k) * mu as f64) / 2.0)));
        }
    }
    let identity_weight = (1.0 - probabilities.iter().sum::<f64>()).max(0.0);
    if identity_weight > ZERO_WEIGHT {
        for mu in [1i32, -1] {
            let label = Label(vec![IDENTITY_SETTING, mu]);
            outcomes.push((label.clone(), Effect { a: identity_weight, b: Vec3::ZERO }));
            table.push((label, [(1.0 + mu as f64) / 2.0; 3]));
        }
    }
    Ok(ParentDesign {
        probabilities,
        directions,
        identity_weight,
        parent: ParentPovm { outcomes },
        post: PostProcessing { table },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentReport {
    /// Completeness of both the stored POVM and the one implied by the
    /// setting probabilities.
    pub completeness: f64,
    pub positivity: f64,
    /// max componentwise |marginal − n|.
    pub marginal: f64,
    /// Stored effects versus those implied by (P_k, u_k).
    pub consistency: f64,
    pub max_residual: f64,
}

impl ParentReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

pub fn verify_parent(design: &ParentDesign, n: &Triplet) -> ParentReport {
    let stored = design.parent.completeness_residual();
    let implied_total = design.probabilities.iter().sum::<f64>() + design.identity_weight;
    let completeness = stored.max(2.0 * (implied_total - 1.0).abs());
    let positivity = design.parent.positivity_violation();

    let marginal = match marginalize(&design.parent, &design.post) {
        Ok(t) => t.max_difference(n),
        Err(_) => f64::INFINITY,
    };

    let mut consistency: f64 = 0.0;
    for (label, e) in &design.parent.outcomes {
        let (k, mu) = (label.0[0], label.0.get(1).copied().unwrap_or(1) as f64);
        let expected = if k == IDENTITY_SETTING {
            Effect { a: design.identity_weight, b: Vec3::ZERO }
        } else if (0..4).contains(&k) {
            let k = k as usize;
            let pk = design.probabilities[k];
            Effect { a: pk, b: design.directions[k].unwrap_or(Vec3::ZERO) * (mu * pk) }
        } else {
            consistency = f64::INFINITY;
            continue;
        };
        consistency = consistency.max((e.a - expected.a).abs()).max((e.b - expected.b).max_abs());
    }
    ParentReport {
        completeness,
        positivity,
        marginal,
        consistency,
        max_residual: completeness.max(positivity).max(marginal).max(consistency),
    }
}
