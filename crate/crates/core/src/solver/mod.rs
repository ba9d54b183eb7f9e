//! Exact incompatibility of a triplet by convex optimization.
//!
//! Two independent formulations of the same program are provided:
//!
//! * [`solve_povm_form`] optimizes directly over eight-outcome parent POVMs
//!   (33 scalar variables), reading the approximators off as marginals.
//! * [`solve_bloch_form`] optimizes over the approximating Bloch vectors and
//!   an auxiliary FT point, with the compatibility criterion as a constraint.
//!
//! Both minimize 2 max_k |Σ_j γ_jk (m_j − n_j)| and are written as SOCPs with
//! an epigraph variable; [`oracle_multistart`] is a derivative-free check.

pub mod cone;
mod oracle;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use oracle::oracle_multistart;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mur::{compatibility_lhs, diagonal_vectors, gamma, protocol_objective};
use crate::parent::build_parent_padded;
use crate::qubit::{
    marginalize, sign_patterns, worst_case_error, BinaryMeasurement, Effect, Label, ParentPovm,
    PostProcessing, QubitState, Triplet,
};
use cone::{Cone, ConicProblem, IpmSettings, IpmStatus};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    InfeasibleInput,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    /// Δ_M.
    pub value: f64,
    pub approximators: Triplet,
    pub parent: ParentPovm,
    pub post: PostProcessing,
    pub worst_state: QubitState,
    pub status: SolveStatus,
    /// |epigraph value − objective recomputed at the extracted point|, plus the duality gap.
    pub objective_residual: f64,
    pub feasibility_residual: f64,
    pub iterations: usize,
}

fn check_input(t: &Triplet, tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    // Family sweeps produce shortened vectors, so "ideal" is relaxed to unbiased with |m| ≤ 1.
    if !t.is_unbiased(1e-12) || t.meas.iter().any(|m| m.m.norm() > 1.0 + 1e-12 || !m.m.is_finite()) {
        return Err(Error::Precondition(format!(
            "solver needs unbiased targets with |m_j| <= 1, got {:?}",
            t.meas
        )));
    }
    Ok(())
}

fn settings(tol: f64) -> IpmSettings {
    IpmSettings {
        max_iter: 200,
        gap_tol: tol,
        feas_tol: (tol * 0.01).max(1e-300),
    }
}

fn map_status(s: IpmStatus) -> SolveStatus {
    match s {
        IpmStatus::Optimal => SolveStatus::Optimal,
        IpmStatus::MaxIterations | IpmStatus::Stalled => SolveStatus::MaxIterations,
    }
}

/// Labels (μ1, μ2, μ3) in sign-pattern order.
pub fn product_labels() -> Vec<Label> {
    sign_patterns()
        .iter()
        .map(|s| Label(s.iter().map(|v| *v as i32).collect()))
        .collect()
}

/// Readout μ_j of outcome (μ1, μ2, μ3).
pub fn product_post_processing() -> PostProcessing {
    PostProcessing {
        table: product_labels()
            .into_iter()
            .map(|l| {
                let p = [0, 1, 2].map(|j| if l.0[j] > 0 { 1.0 } else { 0.0 });
                (l, p)
            })
            .collect(),
    }
}

/// Optimal approximation over eight-outcome parent POVMs.
///
/// Variables: T, then a_μ (8), then b_μ (8 × 3). Cones: four epigraph cones
/// (T, 2(p_k − ½Σ_μ β_kμ b_μ)) with β_kμ = Σ_j γ_jk μ_j, and eight effect
/// cones (a_μ, b_μ). Equalities Σ a_μ = 2, Σ b_μ = 0.
pub fn solve_povm_form(t: &Triplet, tol: f64) -> Result<SolveResult> {
    check_input(t, tol)?;
    let g = gamma();
    let p = diagonal_vectors(t);
    let signs = sign_patterns();
    let nv = 1 + 8 + 24;
    let a_idx = |mu: usize| 1 + mu;
    let b_idx = |mu: usize, c: usize| 9 + 3 * mu + c;

    let m_rows = 16 + 32;
    let mut gm = DMatrix::zeros(m_rows, nv);
    let mut h = DVector::zeros(m_rows);
    for k in 0..4 {
        let row = 4 * k;
        gm[(row, 0)] = -1.0;
        for c in 0..3 {
            h[row + 1 + c] = 2.0 * p[k][c];
            for (mu, s) in signs.iter().enumerate() {
                let beta: f64 = (0..3).map(|j| g.get(j, k) * s[j]).sum();
                // n_j = Σ_{μ_j=+} b_μ = ½ Σ_μ μ_j b_μ
                gm[(row + 1 + c, b_idx(mu, c))] = beta;
            }
        }
    }
    for mu in 0..8 {
        let row = 16 + 4 * mu;
        gm[(row, a_idx(mu))] = -1.0;
        for c in 0..3 {
            gm[(row + 1 + c, b_idx(mu, c))] = -1.0;
        }
    }
    let mut am = DMatrix::zeros(4, nv);
    let mut bv = DVector::zeros(4);
    for mu in 0..8 {
        am[(0, a_idx(mu))] = 1.0;
        for c in 0..3 {
            am[(1 + c, b_idx(mu, c))] = 1.0;
        }
    }
    bv[0] = 2.0;
    let prob = ConicProblem {
        c: {
            let mut c = DVector::zeros(nv);
            c[0] = 1.0;
            c
        },
        g: gm,
        h,
        a: am,
        b: bv,
        cones: [vec![Cone::Soc(4); 4], vec![Cone::Soc(4); 8]].concat(),
    };
    let sol = cone::solve(&prob, &settings(tol));

    let labels = product_labels();
    let outcomes: Vec<(Label, Effect)> = labels
        .into_iter()
        .enumerate()
        .map(|(mu, l)| {
            let b = Vec3::new(sol.x[b_idx(mu, 0)], sol.x[b_idx(mu, 1)], sol.x[b_idx(mu, 2)]);
            (l, Effect { a: sol.x[a_idx(mu)], b })
        })
        .collect();
    let parent = ParentPovm { outcomes };
    let post = product_post_processing();
    let approximators = marginalize(&parent, &post)?;
    let value = protocol_objective(&t.bloch(), &approximators.bloch());
    let (_, worst) = worst_case_error(t, &approximators);
    let feasibility_residual = parent.completeness_residual().max(parent.positivity_violation());
    Ok(SolveResult {
        value,
        approximators,
        parent,
        post,
        worst_state: worst,
        status: map_status(sol.status),
        objective_residual: (sol.x[0] - value).abs() + sol.gap.abs(),
        feasibility_residual,
        iterations: sol.iterations,
    })
}

/// Optimal approximation in Bloch form.
///
/// Variables: T, n_1..n_3 (9), q_f (3), t_0..t_3 (4). Cones: four epigraph
/// cones (T, 2(p_k − q_k)), four cones (t_k, q_k − q_f), and Σ t_k ≤ 4, with
/// q_k = Σ_j γ_jk n_j.
pub fn solve_bloch_form(t: &Triplet, tol: f64) -> Result<SolveResult> {
    check_input(t, tol)?;
    let g = gamma();
    let p = diagonal_vectors(t);
    let nv = 1 + 9 + 3 + 4;
    let n_idx = |j: usize, c: usize| 1 + 3 * j + c;
    let qf_idx = |c: usize| 10 + c;
    let t_idx = |k: usize| 13 + k;

    let m_rows = 1 + 16 + 16;
    let mut gm = DMatrix::zeros(m_rows, nv);
    let mut h = DVector::zeros(m_rows);
    for k in 0..4 {
        gm[(0, t_idx(k))] = 1.0;
    }
    h[0] = 4.0;
    for k in 0..4 {
        let row = 1 + 4 * k;
        gm[(row, 0)] = -1.0;
        for c in 0..3 {
            h[row + 1 + c] = 2.0 * p[k][c];
            for j in 0..3 {
                gm[(row + 1 + c, n_idx(j, c))] = 2.0 * g.get(j, k);
            }
        }
    }
    for k in 0..4 {
        let row = 17 + 4 * k;
        gm[(row, t_idx(k))] = -1.0;
        for c in 0..3 {
            for j in 0..3 {
                gm[(row + 1 + c, n_idx(j, c))] = -g.get(j, k);
            }
            gm[(row + 1 + c, qf_idx(c))] = 1.0;
        }
    }
    let prob = ConicProblem {
        c: {
            let mut c = DVector::zeros(nv);
            c[0] = 1.0;
            c
        },
        g: gm,
        h,
        a: DMatrix::zeros(0, nv),
        b: DVector::zeros(0),
        cones: [vec![Cone::NonNeg(1)], vec![Cone::Soc(4); 8]].concat(),
    };
    let sol = cone::solve(&prob, &settings(tol));

    let mut n = [0, 1, 2].map(|j| Vec3::new(sol.x[n_idx(j, 0)], sol.x[n_idx(j, 1)], sol.x[n_idx(j, 2)]));
    // Σ|q_k − q_f| is positively homogeneous in n: scale back onto the
    // compatible region if roundoff left the point just outside.
    let lhs = compatibility_lhs(&n)?;
    let feasibility_residual = (lhs - 4.0).max(0.0);
    if lhs > 4.0 {
        let s = 4.0 / lhs;
        n = n.map(|v| v * s);
    }
    let approximators = Triplet::new(n.map(|m| BinaryMeasurement { x: 0.0, m }));
    let value = protocol_objective(&t.bloch(), &n);
    let design = build_parent_padded(&approximators)?;
    let (_, worst) = worst_case_error(t, &approximators);
    Ok(SolveResult {
        value,
        approximators,
        parent: design.parent,
        post: design.post,
        worst_state: worst,
        status: map_status(sol.status),
        objective_residual: (sol.x[0] - value).abs() + sol.gap.abs(),
        feasibility_residual,
        iterations: sol.iterations,
    })
}
