//! Self-check suites behind `triplet-mur verify`.
//!
//! Each suite compares an implementation against something independent: the
//! FT solver against a grid/pattern-search oracle, the two conic
//! formulations against each other and the lower bound, rebuilt parent
//! POVMs against the approximators they came from, and symmetrized optima
//! against the raw optima.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::{detect_graded_symmetries, symmetrize};
use crate::error::{Error, Result};
use crate::experiment::{family_triplet, Family};
use crate::geometry::{distance_sum, fermat_torricelli, ft_oracle, Vec3};
use crate::mur::{analyze, compatibility_lhs, protocol_objective, FT_TOL};
use crate::parent::build_parent_padded;
use crate::qubit::{marginalize, Triplet};
use crate::solver::{solve_bloch_form, solve_povm_form, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Ft,
    Dual,
    Parent,
    Symmetry,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Ft, Suite::Dual, Suite::Parent, Suite::Symmetry];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ft => "ft",
            Suite::Dual => "dual",
            Suite::Parent => "parent",
            Suite::Symmetry => "symmetry",
        }
    }

    pub fn default_tol(self) -> f64 {
        match self {
            Suite::Ft => 1e-6,
            Suite::Dual => 1e-5,
            Suite::Parent => 1e-9,
            Suite::Symmetry => 1e-6,
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite '{s}', expected ft, dual, parent or symmetry")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub tol: f64,
    pub max_error: f64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Tally {
    report: SuiteReport,
}

impl Tally {
    fn new(suite: Suite, tol: f64) -> Self {
        Tally { report: SuiteReport { suite, cases: 0, tol, max_error: 0.0, failures: Vec::new() } }
    }

    fn record(&mut self, case: impl FnOnce() -> String, error: f64) {
        self.report.cases += 1;
        if error.is_nan() || error > self.report.max_error {
            self.report.max_error = error;
        }
        if !(error <= self.report.tol) {
            self.report.failures.push(format!("{}: error {error:.3e}", case()));
        }
    }

    fn fail(&mut self, case: String) {
        self.report.cases += 1;
        self.report.failures.push(case);
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if let Some(u) = v.normalized().filter(|_| v.norm() <= 1.0 && v.norm() > 1e-3) {
            return u;
        }
    }
}

fn ft_suite(seed: u64, tol: f64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(Suite::Ft, tol);
    for i in 0..60 {
        let mut pts = [0; 4].map(|_| random_point(&mut rng));
        match i % 3 {
            1 => pts[0] = (pts[1] + pts[2] + pts[3]) / 3.0,
            2 => pts[2] = pts[0],
            _ => {}
        }
        match fermat_torricelli(&pts, FT_TOL) {
            Ok(ft) => {
                let oracle = distance_sum(&pts, ft_oracle(&pts));
                t.record(|| format!("point set {i}"), (ft.total_distance - oracle).abs() / oracle.max(1e-300));
            }
            Err(e) => t.fail(format!("point set {i}: {e}")),
        }
    }
    t.report
}

fn dual_suite(seed: u64, tol: f64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(Suite::Dual, tol);
    for i in 0..30 {
        let triplet = match Triplet::unbiased([0; 3].map(|_| random_unit(&mut rng))) {
            Ok(t) => t,
            Err(e) => {
                t.fail(format!("triplet {i}: {e}"));
                continue;
            }
        };
        let outcome = (|| -> Result<f64> {
            let a = solve_povm_form(&triplet, DEFAULT_TOL)?;
            let b = solve_bloch_form(&triplet, DEFAULT_TOL)?;
            let bound = analyze(&triplet)?.lower_bound;
            // Falling below the bound is as bad as disagreeing.
            Ok((a.value - b.value).abs().max(bound - 1e-7 - a.value.min(b.value)))
        })();
        match outcome {
            Ok(err) => t.record(|| format!("triplet {i}"), err),
            Err(e) => t.fail(format!("triplet {i}: {e}")),
        }
    }
    t.report
}

fn parent_suite(tol: f64) -> SuiteReport {
    let mut t = Tally::new(Suite::Parent, tol);
    for family in Family::ALL {
        for step in 0..=9 {
            let g = step as f64 * 10.0;
            let outcome = (|| -> Result<f64> {
                let n = solve_bloch_form(&family_triplet(family, g)?, DEFAULT_TOL)?.approximators;
                let design = build_parent_padded(&n)?;
                let back = marginalize(&design.parent, &design.post)?;
                Ok(back.max_difference(&n).max(design.parent.completeness_residual()))
            })();
            match outcome {
                Ok(err) => t.record(|| format!("{family} at {g} deg"), err),
                Err(e) => t.fail(format!("{family} at {g} deg: {e}")),
            }
        }
    }
    t.report
}

fn symmetry_suite(tol: f64) -> SuiteReport {
    let mut t = Tally::new(Suite::Symmetry, tol);
    for family in [Family::MPerp, Family::MY] {
        for step in 1..=17 {
            let g = step as f64 * 5.0;
            let outcome = (|| -> Result<f64> {
                let target = family_triplet(family, g)?;
                let n = solve_bloch_form(&target, DEFAULT_TOL)?.approximators;
                let syms = detect_graded_symmetries(&target);
                if syms.is_empty() {
                    return Err(Error::InvalidSymmetry("no graded symmetry detected".into()));
                }
                let s = symmetrize(&n, &syms)?;
                let m = target.bloch();
                let change = (protocol_objective(&m, &s.bloch()) - protocol_objective(&m, &n.bloch())).abs();
                let excess = compatibility_lhs(&s.bloch())? - 4.0;
                if excess > 1e-7 {
                    return Err(Error::Numeric(format!("symmetrized point infeasible by {excess:.3e}")));
                }
                Ok(change)
            })();
            match outcome {
                Ok(err) => t.record(|| format!("{family} at {g} deg"), err),
                Err(e) => t.fail(format!("{family} at {g} deg: {e}")),
            }
        }
    }
    t.report
}

/// Run the selected suites. `tol` overrides every suite's threshold.
pub fn run_suites(suites: &[Suite], seed: u64, tol: Option<f64>) -> Vec<SuiteReport> {
    suites
        .iter()
        .map(|&s| {
            let tol = tol.unwrap_or(s.default_tol());
            match s {
                Suite::Ft => ft_suite(seed, tol),
                Suite::Dual => dual_suite(seed.wrapping_add(1), tol),
                Suite::Parent => parent_suite(tol),
                Suite::Symmetry => symmetry_suite(tol),
            }
        })
        .collect()
}
