//! Qubit states, two-outcome measurements and multi-outcome POVMs in Bloch
//! form, plus the statistical distances used to score approximate joint
//! measurements.
//!
//! Every 2×2 Hermitian operator is kept as a (scalar, vector) pair `(a, b)`
//! standing for `(a + b·σ)/2`; positivity, Born probabilities and
//! completeness are all expressible in that parametrization.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Absolute tolerance on state and measurement validity.
pub const VALIDITY_TOL: f64 = 1e-12;
/// Absolute tolerance on POVM completeness.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Qubit state ρ = (1 + r·σ)/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub r: Vec3,
}

impl QubitState {
    pub const MAXIMALLY_MIXED: QubitState = QubitState { r: Vec3::ZERO };

    pub fn new(r: Vec3) -> Result<Self> {
        if !r.is_finite() || r.norm() > 1.0 + VALIDITY_TOL {
            return Err(Error::InvalidInput(format!("Bloch vector {r} outside the unit ball")));
        }
        Ok(QubitState { r })
    }
}

/// Two-outcome observable with effects M± = (1 ± (x + m·σ))/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryMeasurement {
    /// Biasedness.
    pub x: f64,
    /// Bloch vector.
    pub m: Vec3,
}

impl BinaryMeasurement {
    pub fn new(x: f64, m: Vec3) -> Result<Self> {
        if !x.is_finite() || !m.is_finite() || x.abs() + m.norm() > 1.0 + VALIDITY_TOL {
            return Err(Error::InvalidInput(format!(
                "measurement (x = {x}, m = {m}) violates |x| + |m| <= 1"
            )));
        }
        Ok(BinaryMeasurement { x, m })
    }

    pub fn unbiased(m: Vec3) -> Result<Self> {
        Self::new(0.0, m)
    }

    /// The same observable with its two outcomes swapped.
    pub fn relabeled(self) -> Self {
        BinaryMeasurement { x: -self.x, m: -self.m }
    }
}

/// Three binary measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub meas: [BinaryMeasurement; 3],
}

impl Triplet {
    pub fn new(meas: [BinaryMeasurement; 3]) -> Self {
        Triplet { meas }
    }

    /// Unbiased triplet along the given Bloch vectors.
    pub fn unbiased(m: [Vec3; 3]) -> Result<Self> {
        Ok(Triplet {
            meas: [
                BinaryMeasurement::unbiased(m[0])?,
                BinaryMeasurement::unbiased(m[1])?,
                BinaryMeasurement::unbiased(m[2])?,
            ],
        })
    }

    pub fn bloch(&self) -> [Vec3; 3] {
        [self.meas[0].m, self.meas[1].m, self.meas[2].m]
    }

    pub fn biases(&self) -> [f64; 3] {
        [self.meas[0].x, self.meas[1].x, self.meas[2].x]
    }

    pub fn is_unbiased(&self, tol: f64) -> bool {
        self.meas.iter().all(|m| m.x.abs() <= tol)
    }

    /// Unbiased with unit Bloch vectors.
    pub fn is_ideal(&self) -> bool {
        self.meas
            .iter()
            .all(|m| m.x.abs() <= 1e-9 && (m.m.norm() - 1.0).abs() <= 1e-9)
    }

    /// Largest componentwise difference of biases and Bloch vectors.
    pub fn max_difference(&self, other: &Triplet) -> f64 {
        self.meas
            .iter()
            .zip(&other.meas)
            .map(|(a, b)| (a.x - b.x).abs().max((a.m - b.m).max_abs()))
            .fold(0.0, f64::max)
    }
}

/// Single POVM effect (a + b·σ)/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub a: f64,
    pub b: Vec3,
}

impl Effect {
    pub fn new(a: f64, b: Vec3) -> Result<Self> {
        let e = Effect { a, b };
        if e.positivity_violation() > VALIDITY_TOL {
            return Err(Error::InvalidInput(format!("effect (a = {a}, b = {b}) is not in [0, 1]")));
        }
        Ok(e)
    }

    /// How far the effect is from satisfying 0 ≤ E ≤ 1 (zero when valid).
    pub fn positivity_violation(&self) -> f64 {
        let nb = self.b.norm();
        if !self.a.is_finite() || !nb.is_finite() {
            return f64::INFINITY;
        }
        (nb - self.a).max(nb - (2.0 - self.a)).max(0.0)
    }

    /// Born probability tr(Eρ) = (a + b·r)/2.
    pub fn probability(&self, state: &QubitState) -> f64 {
        0.5 * (self.a + self.b.dot(state.r))
    }
}

/// Opaque outcome label, a short tuple of integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub Vec<i32>);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl<const N: usize> From<[i32; N]> for Label {
    fn from(v: [i32; N]) -> Self {
        Label(v.to_vec())
    }
}

/// Multi-outcome qubit POVM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentPovm {
    pub outcomes: Vec<(Label, Effect)>,
}

impl ParentPovm {
    /// Validated constructor: effects in [0, 1] and Σ effects = identity.
    pub fn new(outcomes: Vec<(Label, Effect)>) -> Result<Self> {
        let povm = ParentPovm { outcomes };
        let completeness = povm.completeness_residual();
        if completeness > COMPLETENESS_TOL {
            return Err(Error::InvalidInput(format!(
                "effects do not sum to identity (residual {completeness:e})"
            )));
        }
        if let Some((label, e)) = povm
            .outcomes
            .iter()
            .find(|(_, e)| e.positivity_violation() > VALIDITY_TOL)
        {
            return Err(Error::InvalidInput(format!("effect {label} is not positive: {e:?}")));
        }
        Ok(povm)
    }

    /// max(|Σa − 2|, |Σb|_∞).
    pub fn completeness_residual(&self) -> f64 {
        let a: f64 = self.outcomes.iter().map(|(_, e)| e.a).sum();
        let b: Vec3 = self.outcomes.iter().map(|(_, e)| e.b).sum();
        (a - 2.0).abs().max(b.max_abs())
    }

    pub fn positivity_violation(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|(_, e)| e.positivity_violation())
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }
}

/// Classical readout: for each parent label, the probability that observable
/// j ∈ {0, 1, 2} reports +1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostProcessing {
    pub table: Vec<(Label, [f64; 3])>,
}

impl PostProcessing {
    pub fn new(table: Vec<(Label, [f64; 3])>) -> Result<Self> {
        if let Some((l, _)) = table
            .iter()
            .find(|(_, p)| p.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidInput(format!("post-processing entry for {l} outside [0, 1]")));
        }
        Ok(PostProcessing { table })
    }

    pub fn lookup(&self) -> HashMap<&Label, [f64; 3]> {
        self.table.iter().map(|(l, p)| (l, *p)).collect()
    }
}

/// (P(+|M), P(−|M)) on the given state.
pub fn outcome_probabilities(meas: &BinaryMeasurement, state: &QubitState) -> (f64, f64) {
    let v = meas.x + meas.m.dot(state.r);
    let p_plus = (0.5 * (1.0 + v)).clamp(0.0, 1.0);
    (p_plus, 1.0 - p_plus)
}

/// Born-rule distribution of a parent POVM, in outcome order.
pub fn povm_distribution(parent: &ParentPovm, state: &QubitState) -> Vec<(Label, f64)> {
    parent
        .outcomes
        .iter()
        .map(|(l, e)| (l.clone(), e.probability(state).max(0.0)))
        .collect()
}

/// Marginal triplet N_{+|j} = Σ_label p_j(+|label) R_label.
pub fn marginalize(parent: &ParentPovm, post: &PostProcessing) -> Result<Triplet> {
    let table = post.lookup();
    let mut a = [0.0; 3];
    let mut b = [Vec3::ZERO; 3];
    for (label, effect) in &parent.outcomes {
        let p = table
            .get(label)
            .ok_or_else(|| Error::InvalidInput(format!("no post-processing entry for {label}")))?;
        for j in 0..3 {
            a[j] += p[j] * effect.a;
            b[j] += effect.b * p[j];
        }
    }
    if table.len() != parent.outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "post-processing covers {} labels, parent has {}",
            table.len(),
            parent.outcomes.len()
        )));
    }
    let meas = [0, 1, 2].map(|j| BinaryMeasurement { x: a[j] - 1.0, m: b[j] });
    Ok(Triplet { meas })
}

/// d_ρ(M; N) = 2 Σ_± |P(±|M) − P(±|N)|.
pub fn statistical_distance(m: &BinaryMeasurement, n: &BinaryMeasurement, state: &QubitState) -> f64 {
    let (mp, mm) = outcome_probabilities(m, state);
    let (np, nm) = outcome_probabilities(n, state);
    2.0 * ((mp - np).abs() + (mm - nm).abs())
}

/// Δ_ρ = Σ_i d_ρ(M_i; N_i).
pub fn combined_error(m: &Triplet, n: &Triplet, state: &QubitState) -> f64 {
    m.meas
        .iter()
        .zip(&n.meas)
        .map(|(a, b)| statistical_distance(a, b, state))
        .sum()
}

/// The eight sign patterns, ordered (+,+,+), (+,+,−), …, (−,−,−).
pub fn sign_patterns() -> [[f64; 3]; 8] {
    let mut out = [[0.0; 3]; 8];
    for (i, s) in out.iter_mut().enumerate() {
        for (j, v) in s.iter_mut().enumerate() {
            *v = if (i >> (2 - j)) & 1 == 0 { 1.0 } else { -1.0 };
        }
    }
    out
}

/// max over states of the combined error, with a maximizing state.
///
/// Δ_ρ = Σ_j 2|c_j·r − ξ_j| with c_j = m_j − n_j and ξ_j = x_{N,j} − x_{M,j};
/// writing |·| as a max over signs gives max_s 2|Σ s_j c_j| − 2 Σ s_j ξ_j.
/// Ties go to the lowest pattern index.
pub fn worst_case_error(m: &Triplet, n: &Triplet) -> (f64, QubitState) {
    let c: [Vec3; 3] = [0, 1, 2].map(|j| m.meas[j].m - n.meas[j].m);
    let xi: [f64; 3] = [0, 1, 2].map(|j| n.meas[j].x - m.meas[j].x);
    let mut best = f64::NEG_INFINITY;
    let mut best_dir = Vec3::ZERO;
    for s in sign_patterns() {
        let v: Vec3 = (0..3).map(|j| c[j] * s[j]).sum();
        let bias: f64 = (0..3).map(|j| s[j] * xi[j]).sum();
        let value = 2.0 * v.norm() - 2.0 * bias;
        if value > best {
            best = value;
            best_dir = v;
        }
    }
    let r = best_dir.normalized().unwrap_or(Vec3::ZERO);
    (best.max(0.0), QubitState { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(r: Vec3) -> QubitState {
        QubitState::new(r).unwrap()
    }

    #[test]
    fn eigenstate_and_mixed_probabilities() {
        let z = BinaryMeasurement::unbiased(Vec3::Z).unwrap();
        assert_eq!(outcome_probabilities(&z, &st(Vec3::Z)), (1.0, 0.0));
        assert_eq!(outcome_probabilities(&z, &QubitState::MAXIMALLY_MIXED), (0.5, 0.5));
        let biased = BinaryMeasurement::new(0.2, Vec3::X * 0.5).unwrap();
        let (p, q) = outcome_probabilities(&biased, &st(Vec3::X));
        assert!((p - 0.85).abs() < 1e-15 && (q - 0.15).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(BinaryMeasurement::new(0.5, Vec3::Z * 0.6).is_err());
        assert!(QubitState::new(Vec3::X * 1.01).is_err());
        assert!(Effect::new(0.5, Vec3::Z * 0.6).is_err());
        assert!(Effect::new(1.5, Vec3::Z * 0.6).is_err());
        assert!(Effect::new(1.0, Vec3::Z).is_ok());
        assert!(ParentPovm::new(vec![(Label::from([0]), Effect::new(1.0, Vec3::Z).unwrap())]).is_err());
    }

    #[test]
    fn povm_distributions() {
        let p = ParentPovm::new(vec![
            (Label::from([1]), Effect::new(1.0, Vec3::Z).unwrap()),
            (Label::from([-1]), Effect::new(1.0, -Vec3::Z).unwrap()),
        ])
        .unwrap();
        let d = povm_distribution(&p, &QubitState::MAXIMALLY_MIXED);
        assert_eq!(d.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0.5, 0.5]);

        let identity = ParentPovm::new(vec![(Label::from([0]), Effect::new(2.0, Vec3::ZERO).unwrap())]).unwrap();
        assert_eq!(povm_distribution(&identity, &st(Vec3::Y))[0].1, 1.0);
    }

    fn eight_outcome_parent() -> ParentPovm {
        // Noisy product-basis parent: b_μ = Σ_j μ_j w_j / 8, a_μ = 1/4.
        let w = [Vec3::new(0.5, 0.1, 0.0), Vec3::new(0.0, 0.6, 0.2), Vec3::new(-0.2, 0.1, 0.4)];
        let outcomes = sign_patterns()
            .iter()
            .map(|s| {
                let b: Vec3 = (0..3).map(|j| w[j] * (s[j] / 8.0)).sum();
                (Label(s.iter().map(|v| *v as i32).collect()), Effect::new(0.25, b).unwrap())
            })
            .collect();
        ParentPovm::new(outcomes).unwrap()
    }

    #[test]
    fn coin_flip_marginals() {
        let parent = eight_outcome_parent();
        let post = PostProcessing::new(parent.outcomes.iter().map(|(l, _)| (l.clone(), [0.5; 3])).collect()).unwrap();
        let t = marginalize(&parent, &post).unwrap();
        for m in t.meas {
            assert!(m.x.abs() < 1e-15 && m.m.norm() < 1e-15);
        }
    }

    #[test]
    fn deterministic_readout_marginals() {
        let parent = eight_outcome_parent();
        let post = PostProcessing::new(
            parent
                .outcomes
                .iter()
                .map(|(l, _)| (l.clone(), [0, 1, 2].map(|j| if l.0[j] > 0 { 1.0 } else { 0.0 })))
                .collect(),
        )
        .unwrap();
        let t = marginalize(&parent, &post).unwrap();
        for j in 0..3 {
            // Σ_{μ_j=+} b_μ = ½ Σ_μ μ_j b_μ since Σ_μ b_μ = 0.
            let expected: Vec3 = parent.outcomes.iter().map(|(l, e)| e.b * (0.5 * l.0[j] as f64)).sum();
            assert!((t.meas[j].m - expected).max_abs() < 1e-15);
            assert!(t.meas[j].x.abs() < 1e-15);
        }
    }

    #[test]
    fn marginalize_label_mismatch() {
        let parent = eight_outcome_parent();
        let post = PostProcessing::new(vec![(Label::from([9]), [0.5; 3])]).unwrap();
        assert!(matches!(marginalize(&parent, &post), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn statistical_distance_examples() {
        let z = BinaryMeasurement::unbiased(Vec3::Z).unwrap();
        let zs = BinaryMeasurement::unbiased(Vec3::Z / 3f64.sqrt()).unwrap();
        let x = BinaryMeasurement::unbiased(Vec3::X).unwrap();
        assert_eq!(statistical_distance(&z, &z, &st(Vec3::Z)), 0.0);
        let d = statistical_distance(&z, &zs, &st(Vec3::Z));
        assert!((d - 2.0 * (1.0 - 1.0 / 3f64.sqrt())).abs() < 1e-15);
        assert_eq!(statistical_distance(&z, &x, &QubitState::MAXIMALLY_MIXED), 0.0);
    }

    fn pauli() -> Triplet {
        Triplet::unbiased([Vec3::Z, Vec3::Y, Vec3::X]).unwrap()
    }

    fn shrunk(t: &Triplet, f: f64) -> Triplet {
        Triplet::unbiased(t.bloch().map(|m| m * f)).unwrap()
    }

    #[test]
    fn combined_error_examples() {
        let m = pauli();
        let n = shrunk(&m, 1.0 / 3f64.sqrt());
        let r = st(Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt());
        let expected = 2.0 * (3f64.sqrt() - 1.0);
        assert!((combined_error(&m, &n, &r) - expected).abs() < 1e-14);
        assert_eq!(combined_error(&m, &m, &r), 0.0);
        assert_eq!(combined_error(&m, &n, &QubitState::MAXIMALLY_MIXED), 0.0);
    }

    #[test]
    fn worst_case_examples() {
        let m = pauli();
        let (v, s) = worst_case_error(&m, &m);
        assert_eq!((v, s.r), (0.0, Vec3::ZERO));

        let n = shrunk(&m, 1.0 / 3f64.sqrt());
        let (v, s) = worst_case_error(&m, &n);
        assert!((v - 2.0 * (3f64.sqrt() - 1.0)).abs() < 1e-14);
        // lowest index pattern (+,+,+)
        assert!((s.r - Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt()).max_abs() < 1e-15);
        assert!((combined_error(&m, &n, &s) - v).abs() < 1e-12);
    }

    #[test]
    fn sign_pattern_order() {
        let s = sign_patterns();
        assert_eq!(s[0], [1.0, 1.0, 1.0]);
        assert_eq!(s[1], [1.0, 1.0, -1.0]);
        assert_eq!(s[7], [-1.0, -1.0, -1.0]);
    }
}
