//! The four experimental families and a shot-level simulation of the
//! optimal joint measurement.
//!
//! The simulation probes the worst-case state of the solver optimum. Stage A
//! measures each target observable separately (shots/3 rounds each); stage B
//! samples the parent POVM once per shot and post-processes every record into
//! outcomes for all three approximators at once. Errors come from a bootstrap
//! over the outcome records.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{delta_orthogonal, delta_perp, delta_y};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mur::analyze;
use crate::qubit::{outcome_probabilities, povm_distribution, Label, QubitState, Triplet};
use crate::solver::{solve_bloch_form, SolveResult, SolveStatus};

/// Bootstrap resamples per estimate.
pub const BOOTSTRAP_ROUNDS: usize = 200;
pub const MIN_SHOTS: u64 = 100;
/// Name of the generator behind every simulated count.
pub const RNG_NAME: &str = "ChaCha8";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "m_o")]
    MO,
    #[serde(rename = "m_perp")]
    MPerp,
    #[serde(rename = "m_p")]
    MP,
    #[serde(rename = "m_y")]
    MY,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::MO, Family::MPerp, Family::MP, Family::MY];

    pub fn name(self) -> &'static str {
        match self {
            Family::MO => "m_o",
            Family::MPerp => "m_perp",
            Family::MP => "m_p",
            Family::MY => "m_y",
        }
    }

    /// Closed-form Δ where one exists (none for the coplanar family).
    pub fn analytic(self, gamma_deg: f64) -> Option<Result<f64>> {
        match self {
            Family::MO => Some(Ok(delta_orthogonal(gamma_deg))),
            Family::MPerp => Some(delta_perp(gamma_deg)),
            Family::MY => Some(delta_y(gamma_deg)),
            Family::MP => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown family '{s}', expected m_o, m_perp, m_p or m_y")))
    }
}

pub fn family_triplet(family: Family, gamma_deg: f64) -> Result<Triplet> {
    if !(0.0..=90.0).contains(&gamma_deg) {
        return Err(Error::InvalidInput(format!("γ = {gamma_deg}° outside [0°, 90°]")));
    }
    let (s, c) = gamma_deg.to_radians().sin_cos();
    let m = match family {
        Family::MO => [Vec3::Z * c, Vec3::Y * c, Vec3::X * c],
        Family::MPerp => [Vec3::new(c, s, 0.0), Vec3::new(c, -s, 0.0), Vec3::Z],
        Family::MP => [Vec3::new(c, s, 0.0), Vec3::new(c, -s, 0.0), Vec3::X],
        Family::MY => {
            let h = 3f64.sqrt() / 2.0;
            let e = [Vec3::new(-0.5, h, 0.0), Vec3::new(-0.5, -h, 0.0), Vec3::X];
            e.map(|e| Vec3::Z * c + e * s)
        }
    };
    // Rounding can push |m| a hair past 1.
    Triplet::unbiased(m.map(|v| if v.norm() > 1.0 { v / v.norm() } else { v }))
}

/// Raw simulated counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    /// Stage A: "+" counts for each target observable.
    pub ideal_plus: [u64; 3],
    /// Stage A: rounds per observable.
    pub ideal_rounds: u64,
    /// Stage B: counts per parent label.
    pub parent_counts: Vec<(Label, u64)>,
    /// Stage B: counts per post-processed outcome triple; index bit j set means "−" on N_j+1.
    pub joint_counts: [u64; 8],
    pub shots: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub delta_hat: f64,
    pub stderr: f64,
    /// 4|P̂(+|M_j) − P̂(+|N_j)| per observable.
    pub distances: [f64; 3],
    pub distance_stderr: [f64; 3],
    pub shots: u64,
    pub seed: u64,
}

fn draw_binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map(|b| b.sample(rng)).unwrap_or(0)
}

/// Multinomial draw by sequential conditional binomials.
fn draw_multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let k = draw_binomial(rng, left, if mass > 0.0 { p / mass } else { 0.0 });
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

fn joint_index(outcome: [bool; 3]) -> usize {
    (0..3).filter(|&j| !outcome[j]).map(|j| 1 << j).sum()
}

/// Shot-level simulation of both stages on `state`.
pub fn simulate(target: &Triplet, solution: &SolveResult, state: &QubitState, shots: u64, seed: u64) -> Result<ShotRecord> {
    if shots < MIN_SHOTS {
        return Err(Error::InvalidInput(format!("need at least {MIN_SHOTS} shots, got {shots}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = shots / 3;
    let ideal_plus = [0, 1, 2].map(|j| {
        let p = outcome_probabilities(&target.meas[j], state).0;
        draw_binomial(&mut rng, rounds, p)
    });

    let dist = povm_distribution(&solution.parent, state);
    let probs: Vec<f64> = dist.iter().map(|(_, p)| p.max(0.0)).collect();
    let counts = draw_multinomial(&mut rng, shots, &probs);
    let table = solution.post.lookup();
    let mut joint_counts = [0u64; 8];
    for ((label, _), &count) in dist.iter().zip(&counts) {
        let readout = table
            .get(label)
            .ok_or_else(|| Error::InvalidInput(format!("no post-processing for {label}")))?;
        if readout.iter().all(|&r| r == 0.0 || r == 1.0) {
            joint_counts[joint_index(readout.map(|r| r == 1.0))] += count;
        } else {
            for _ in 0..count {
                let o = readout.map(|r| rng.random::<f64>() < r);
                joint_counts[joint_index(o)] += 1;
            }
        }
    }
    Ok(ShotRecord {
        ideal_plus,
        ideal_rounds: rounds,
        parent_counts: dist.into_iter().map(|(l, _)| l).zip(counts).collect(),
        joint_counts,
        shots,
        seed,
    })
}

fn distances(ideal_plus: &[u64; 3], rounds: u64, joint: &[u64; 8], shots: u64) -> [f64; 3] {
    [0, 1, 2].map(|j| {
        let pm = ideal_plus[j] as f64 / rounds as f64;
        let plus: u64 = (0..8).filter(|i| i >> j & 1 == 0).map(|i| joint[i]).sum();
        let pn = plus as f64 / shots as f64;
        4.0 * (pm - pn).abs()
    })
}

fn std_dev(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Point estimate plus bootstrap errors. Resampling the records with
/// replacement is done on their counts, which have the same law. Resampling
/// frequencies get half a count of smoothing, so deterministic outcomes still
/// yield a positive error.
pub fn estimate(record: &ShotRecord, rounds: usize, seed: u64) -> McEstimate {
    let d = distances(&record.ideal_plus, record.ideal_rounds, &record.joint_counts, record.shots);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b007);
    let n = record.ideal_rounds;
    let joint_p: Vec<f64> = record
        .joint_counts
        .iter()
        .map(|&c| (c as f64 + 0.5) / (record.shots as f64 + 4.0))
        .collect();
    let mut samples = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let ideal = [0, 1, 2].map(|j| draw_binomial(&mut rng, n, (record.ideal_plus[j] as f64 + 0.5) / (n as f64 + 1.0)));
        let jc = draw_multinomial(&mut rng, record.shots, &joint_p);
        let mut joint = [0u64; 8];
        joint.copy_from_slice(&jc);
        samples.push(distances(&ideal, n, &joint, record.shots));
    }
    let totals: Vec<f64> = samples.iter().map(|s| s.iter().sum()).collect();
    let per = [0, 1, 2].map(|j| std_dev(&samples.iter().map(|s| s[j]).collect::<Vec<_>>()));
    McEstimate {
        delta_hat: d.iter().sum(),
        stderr: std_dev(&totals),
        distances: d,
        distance_stderr: per,
        shots: record.shots,
        seed: record.seed,
    }
}

/// Simulate the experiment for an already solved triplet.
pub fn run_with_solution(t: &Triplet, solution: &SolveResult, shots: u64, seed: u64) -> Result<McEstimate> {
    let record = simulate(t, solution, &solution.worst_state, shots, seed)?;
    Ok(estimate(&record, BOOTSTRAP_ROUNDS, seed))
}

fn solve_checked(t: &Triplet, tol: f64) -> Result<SolveResult> {
    let sol = solve_bloch_form(t, tol)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Numeric(format!("solver did not converge ({:?})", sol.status)));
    }
    Ok(sol)
}

pub fn run_experiment(t: &Triplet, shots: u64, seed: u64) -> Result<McEstimate> {
    if shots < MIN_SHOTS {
        return Err(Error::InvalidInput(format!("need at least {MIN_SHOTS} shots, got {shots}")));
    }
    let sol = solve_checked(t, crate::solver::DEFAULT_TOL)?;
    run_with_solution(t, &sol, shots, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma_deg: f64,
    pub lower_bound: f64,
    pub attainable: bool,
    pub exact: f64,
    pub analytic: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub jointly_measurable: bool,
}

fn sweep_point(family: Family, gamma_deg: f64, shots: u64, seed: u64, tol: f64) -> Result<SweepRow> {
    let t = family_triplet(family, gamma_deg)?;
    let report = analyze(&t)?;
    let sol = solve_checked(&t, tol)?;
    let analytic = family.analytic(gamma_deg).transpose()?;
    let mc = if shots > 0 { Some(run_with_solution(&t, &sol, shots, seed)?) } else { None };
    Ok(SweepRow {
        gamma_deg,
        lower_bound: report.lower_bound,
        attainable: report.attainable,
        exact: sol.value,
        analytic,
        mc_estimate: mc.as_ref().map(|m| m.delta_hat),
        mc_stderr: mc.as_ref().map(|m| m.stderr),
        jointly_measurable: report.jointly_measurable,
    })
}

/// One row per grid angle, in grid order; point i uses seed + i.
pub fn sweep(family: Family, grid: &[f64], shots: u64, seed: u64, tol: f64) -> Result<Vec<SweepRow>> {
    grid.par_iter()
        .enumerate()
        .map(|(i, &g)| sweep_point(family, g, shots, seed.wrapping_add(i as u64), tol))
        .collect()
}

/// `steps` evenly spaced angles from `start` to `end` inclusive.
pub fn linear_grid(start: f64, end: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 steps, got {steps}")));
    }
    let h = (end - start) / (steps - 1) as f64;
    Ok((0..steps).map(|i| if i + 1 == steps { end } else { start + h * i as f64 }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_vectors() {
        for g in [0.0, 17.0, 45.0, 80.0] {
            let t = family_triplet(Family::MPerp, g).unwrap();
            let m = t.bloch();
            assert!((m[0].dot(m[1]) - (2.0 * g).to_radians().cos()).abs() < 1e-14);
            assert!(t.is_ideal());
            let t = family_triplet(Family::MY, g).unwrap();
            assert!(t.is_ideal());
            let t = family_triplet(Family::MO, g).unwrap();
            assert!(t.bloch().iter().all(|v| (v.norm() - g.to_radians().cos()).abs() < 1e-15));
        }
        let t = family_triplet(Family::MO, 90.0).unwrap();
        assert!(t.bloch().iter().all(|v| v.norm() < 1e-16));
        let t = family_triplet(Family::MP, 90.0).unwrap();
        assert!((t.bloch()[0] - Vec3::Y).max_abs() < 1e-15);
        assert!(family_triplet(Family::MY, 90.5).is_err());
        assert!(family_triplet(Family::MP, -0.1).is_err());
    }

    #[test]
    fn y_directions() {
        let h = 3f64.sqrt() / 2.0;
        let e = [Vec3::new(-0.5, h, 0.0), Vec3::new(-0.5, -h, 0.0), Vec3::X];
        for j in 0..3 {
            assert!(e[j].dot(Vec3::Z).abs() < 1e-16);
            for k in 0..3 {
                if j != k {
                    assert!((e[j].dot(e[k]) + 0.5).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("m_q".parse::<Family>().is_err());
    }

    #[test]
    fn multinomial_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = draw_multinomial(&mut rng, 1000, &[0.2, 0.0, 0.5, 0.3]);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(c[1], 0);
    }

    #[test]
    fn orthogonal_experiment() {
        let t = family_triplet(Family::MO, 0.0).unwrap();
        let est = run_experiment(&t, 1_000_000, 11).unwrap();
        let target = 2.0 * (3f64.sqrt() - 1.0);
        assert!(est.stderr > 0.0);
        assert!((est.delta_hat - target).abs() <= 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn compatible_experiment() {
        let t = Triplet::unbiased([Vec3::Z * 0.5, Vec3::X * 0.5, Vec3::Y * 0.2]).unwrap();
        let est = run_experiment(&t, 200_000, 5).unwrap();
        assert!(est.delta_hat <= 4.0 * est.stderr + 1e-12, "{est:?}");
    }

    #[test]
    fn counts_are_consistent() {
        let t = family_triplet(Family::MY, 60.0).unwrap();
        let sol = solve_bloch_form(&t, 1e-9).unwrap();
        let rec = simulate(&t, &sol, &sol.worst_state, 30_000, 3).unwrap();
        assert_eq!(rec.joint_counts.iter().sum::<u64>(), rec.shots);
        assert_eq!(rec.parent_counts.iter().map(|(_, c)| c).sum::<u64>(), rec.shots);
        assert_eq!(rec.ideal_rounds, 10_000);
        let bound = 5.0 / (rec.shots as f64).sqrt();
        for j in 0..3 {
            let p = outcome_probabilities(&t.meas[j], &sol.worst_state).0;
            assert!((rec.ideal_plus[j] as f64 / rec.ideal_rounds as f64 - p).abs() <= 5.0 / 10_000f64.sqrt());
            let q = outcome_probabilities(&sol.approximators.meas[j], &sol.worst_state).0;
            let plus: u64 = (0..8).filter(|i| i >> j & 1 == 0).map(|i| rec.joint_counts[i]).sum();
            assert!((plus as f64 / rec.shots as f64 - q).abs() <= bound);
        }
    }

    #[test]
    fn stderr_scales_with_shots() {
        let t = family_triplet(Family::MPerp, 30.0).unwrap();
        let a = run_experiment(&t, 100_000, 21).unwrap();
        let b = run_experiment(&t, 400_000, 21).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
    }

    #[test]
    fn too_few_shots() {
        let t = family_triplet(Family::MO, 0.0).unwrap();
        assert!(matches!(run_experiment(&t, 99, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sweep_is_ordered_and_deterministic() {
        let grid = linear_grid(0.0, 50.0, 6).unwrap();
        let a = sweep(Family::MO, &grid, 1000, 9, 1e-9).unwrap();
        let b = sweep(Family::MO, &grid, 1000, 9, 1e-9).unwrap();
        assert_eq!(a, b);
        for (row, g) in a.iter().zip(&grid) {
            assert_eq!(row.gamma_deg, *g);
            assert!((row.exact - delta_orthogonal(*g)).abs() < 1e-5);
            assert!(row.exact >= row.lower_bound - 1e-7);
        }
        let p = sweep(Family::MP, &[45.0], 0, 0, 1e-9).unwrap();
        assert!(p[0].analytic.is_none() && p[0].mc_estimate.is_none());
        assert!(p[0].exact - p[0].lower_bound >= 1e-3);
    }
}
