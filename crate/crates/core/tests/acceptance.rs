//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS/FAIL line.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use triplet_mur::analytic::{
    delta_orthogonal, delta_perp, delta_perp_pieces, delta_y, delta_y_pieces, detect_graded_symmetries,
    orthogonal_threshold_deg, perp_thresholds, symmetrize, y_thresholds,
};
use triplet_mur::experiment::{family_triplet, run_with_solution, Family};
use triplet_mur::geometry::{distance_sum, fermat_torricelli, ft_oracle, Vec3};
use triplet_mur::mur::{analyze, compatibility_lhs, protocol_objective};
use triplet_mur::parent::build_parent_padded;
use triplet_mur::qubit::{marginalize, Triplet};
use triplet_mur::solver::{oracle_multistart, solve_bloch_form, solve_povm_form, SolveResult, SolveStatus};

const TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

fn solve(t: &Triplet) -> SolveResult {
    let s = solve_bloch_form(t, TOL).expect("bloch solve");
    assert_eq!(s.status, SolveStatus::Optimal);
    s
}

fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_triplets(count: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Triplet::unbiased([0, 1, 2].map(|_| random_unit(&mut rng))).unwrap())
        .collect()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn orthogonal_family() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for g in grid(0.0, 50.0, 5.0) {
        let t = family_triplet(Family::MO, g).unwrap();
        let start = Instant::now();
        let s = solve(&t);
        slowest = slowest.max(start.elapsed().as_secs_f64());
        worst = worst.max((s.value - delta_orthogonal(g)).abs());
    }
    let at0 = solve(&family_triplet(Family::MO, 0.0).unwrap()).value;
    check(
        worst <= 1e-5 && (at0 - 1.46410).abs() < 1e-5 && slowest <= 1.0,
        format!("max |exact - closed form| = {worst:.2e}, value at 0 deg = {at0:.8}, slowest point {slowest:.3} s"),
    )
}

fn orthogonal_threshold() -> Outcome {
    let mut flip = None;
    let mut prev = analyze(&family_triplet(Family::MO, 54.0).unwrap()).unwrap().jointly_measurable;
    for g in grid(54.0, 55.5, 0.001) {
        let jm = analyze(&family_triplet(Family::MO, g).unwrap()).unwrap().jointly_measurable;
        if jm != prev && flip.is_none() {
            flip = Some(g);
        }
        prev = jm;
    }
    let flip = flip.unwrap_or(f64::NAN);
    check(
        (flip - 54.74).abs() <= 0.05,
        format!("flag flips at {flip:.3} deg (closed form {:.4})", orthogonal_threshold_deg()),
    )
}

/// Worst solver/closed-form gap away from and near the piece boundaries.
fn compare_family<F: Fn(f64) -> f64 + Sync>(family: Family, pts: &[f64], boundaries: &[f64], closed: F) -> (f64, f64) {
    let errs: Vec<(bool, f64)> = pts
        .par_iter()
        .map(|&g| {
            let near = boundaries.iter().any(|b| (g - b).abs() <= 0.5);
            let v = solve(&family_triplet(family, g).unwrap()).value;
            (near, (v - closed(g)).abs())
        })
        .collect();
    let far = errs.iter().filter(|e| !e.0).map(|e| e.1).fold(0.0, f64::max);
    let near = errs.iter().filter(|e| e.0).map(|e| e.1).fold(0.0, f64::max);
    (far, near)
}

fn perp_family() -> Outcome {
    let th = perp_thresholds().map_err(|e| e.to_string())?;
    let bounds = [45.0 - th.second, 45.0 - th.first, 45.0 + th.first, 45.0 + th.second];
    let (far, near) = compare_family(Family::MPerp, &grid(0.5, 89.5, 0.5), &bounds, |g| delta_perp(g).unwrap());
    check(
        far <= 1e-4 && near <= 5e-3 && (th.first - 32.77).abs() <= 0.05 && (th.second - 35.77).abs() <= 0.05,
        format!(
            "max gap {far:.2e} off boundaries, {near:.2e} near them; thresholds {:.4} and {:.4} deg",
            th.first, th.second
        ),
    )
}

fn y_family() -> Outcome {
    let th = y_thresholds().map_err(|e| e.to_string())?;
    let (far, near) = compare_family(Family::MY, &grid(0.0, 90.0, 0.5), &[th.first, th.second], |g| delta_y(g).unwrap());
    let p0 = delta_y_pieces(th.first);
    let p1 = delta_y_pieces(th.second);
    let jump = (p0[0] - p0[1]).abs().max((p1[1] - p1[2]).abs());
    check(
        far <= 1e-4
            && near <= 5e-3
            && jump <= 1e-5
            && (th.first - 70.53).abs() <= 0.05
            && (th.second - 75.80).abs() <= 0.05,
        format!(
            "max gap {far:.2e} off boundaries, {near:.2e} near them; thresholds {:.4} and {:.4} deg, piece jump {jump:.1e}",
            th.first, th.second
        ),
    )
}

fn attainability() -> Outcome {
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for family in Family::ALL {
        let rows: Vec<_> = grid(0.0, 90.0, 1.0)
            .par_iter()
            .map(|&g| {
                let t = family_triplet(family, g).unwrap();
                let r = analyze(&t).unwrap();
                (g, r.attainable, (solve(&t).value - r.lower_bound).abs())
            })
            .collect();
        for (g, attainable, gap) in rows {
            checked += 1;
            if attainable != (gap <= 1e-6) {
                mismatches.push(format!("{family} {g} deg: attainable={attainable} gap={gap:.2e}"));
            }
        }
    }
    let mut min_gap = f64::INFINITY;
    for g in [30.0, 45.0, 60.0, 90.0] {
        let t = family_triplet(Family::MP, g).unwrap();
        let r = analyze(&t).unwrap();
        min_gap = min_gap.min(solve(&t).value - 2.0 * r.delta);
    }
    check(
        mismatches.is_empty() && min_gap >= 1e-3,
        format!(
            "{checked} rows, {} mismatches {:?}; smallest coplanar gap {min_gap:.4}",
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn dual_formulations() -> Outcome {
    let triplets = random_triplets(200, 2024);
    let rows: Vec<(f64, f64, f64)> = triplets
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let a = solve_povm_form(t, TOL).unwrap();
            let b = solve_bloch_form(t, TOL).unwrap();
            let lb = analyze(t).unwrap().lower_bound;
            let oracle = oracle_multistart(t, 2, i as u64);
            (
                (a.value - b.value).abs(),
                lb - a.value.min(b.value),
                a.value.max(b.value) - oracle,
            )
        })
        .collect();
    let agree = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let below = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let above = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    check(
        agree <= 1e-5 && below <= 1e-7 && above <= 1e-5,
        format!("max form gap {agree:.2e}, max(bound - value) {below:.2e}, max(value - oracle) {above:.2e}"),
    )
}

fn parent_reconstruction() -> Outcome {
    let mut marginal = 0.0f64;
    let mut completeness = 0.0f64;
    let mut count = 0;
    for family in Family::ALL {
        let rows: Vec<(f64, f64)> = grid(0.0, 90.0, 2.5)
            .par_iter()
            .map(|&g| {
                let n = solve(&family_triplet(family, g).unwrap()).approximators;
                let d = build_parent_padded(&n).unwrap();
                let back = marginalize(&d.parent, &d.post).unwrap();
                (back.max_difference(&n), d.parent.completeness_residual())
            })
            .collect();
        for (m, c) in rows {
            count += 1;
            marginal = marginal.max(m);
            completeness = completeness.max(c);
        }
    }
    check(
        marginal <= 1e-9 && completeness <= 1e-10,
        format!("{count} optima: max marginal residual {marginal:.2e}, completeness {completeness:.2e}"),
    )
}

fn unbiased_optimum() -> Outcome {
    let mut triplets: Vec<Triplet> = random_triplets(50, 77);
    for family in Family::ALL {
        for g in grid(0.0, 90.0, 5.0) {
            triplets.push(family_triplet(family, g).unwrap());
        }
    }
    let worst = triplets
        .par_iter()
        .map(|t| {
            let s = solve_povm_form(t, TOL).unwrap();
            s.approximators.biases().iter().fold(0.0f64, |a, x| a.max(x.abs()))
        })
        .reduce(|| 0.0, f64::max);
    check(worst <= 1e-6, format!("{} triplets: max |bias| {worst:.2e}", triplets.len()))
}

fn monte_carlo() -> Outcome {
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let mut count = 0;
    for (fi, family) in Family::ALL.into_iter().enumerate() {
        let rows: Vec<(f64, f64)> = grid(0.0, 90.0, 10.0)
            .par_iter()
            .enumerate()
            .map(|(i, &g)| {
                let t = family_triplet(family, g).unwrap();
                let s = solve(&t);
                let est = run_with_solution(&t, &s, 1_000_000, 1000 * fi as u64 + i as u64).unwrap();
                (g, (est.delta_hat - s.value).abs() / est.stderr)
            })
            .collect();
        for (g, z) in rows {
            count += 1;
            worst = worst.max(z);
            if z > 4.0 {
                bad.push(format!("{family} {g}"));
            }
        }
    }
    check(bad.is_empty(), format!("{count} rows, largest |estimate - exact|/stderr = {worst:.2}, outside: {bad:?}"))
}

fn geometry_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut vertex_cases = 0;
    for i in 0..100 {
        let mut pts = [0; 4].map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
        match i % 4 {
            // optimum pinned at a vertex: one point at the centroid of a wide spread
            1 => pts[0] = (pts[1] + pts[2] + pts[3]) / 3.0,
            // repeated input point
            2 => pts[3] = pts[1],
            _ => {}
        }
        let ft = fermat_torricelli(&pts, 1e-13).unwrap();
        if ft.at_vertex.is_some() {
            vertex_cases += 1;
        }
        let oracle = distance_sum(&pts, ft_oracle(&pts));
        worst = worst.max((ft.total_distance - oracle) / oracle.max(1e-300));
    }
    check(
        worst <= 1e-6 && vertex_cases > 0,
        format!("100 sets ({vertex_cases} with vertex optimum): max relative excess over oracle {worst:.2e}"),
    )
}

fn symmetry() -> Outcome {
    let mut worst_obj = 0.0f64;
    let mut worst_lhs = f64::NEG_INFINITY;
    let mut with_syms = 0;
    let mut count = 0;
    for family in [Family::MPerp, Family::MY] {
        for g in grid(5.0, 85.0, 5.0) {
            let t = family_triplet(family, g).unwrap();
            let n = solve(&t).approximators;
            let syms = detect_graded_symmetries(&t);
            if !syms.is_empty() {
                with_syms += 1;
            }
            let s = symmetrize(&n, &syms).map_err(|e| e.to_string())?;
            let m = t.bloch();
            worst_obj = worst_obj.max((protocol_objective(&m, &s.bloch()) - protocol_objective(&m, &n.bloch())).abs());
            worst_lhs = worst_lhs.max(compatibility_lhs(&s.bloch()).unwrap() - 4.0);
            count += 1;
        }
    }
    check(
        worst_obj <= 1e-6 && worst_lhs <= 1e-7 && with_syms == count,
        format!("{count} optima ({with_syms} with symmetries): max objective change {worst_obj:.2e}, max lhs - 4 = {worst_lhs:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("orthogonal family matches closed form", orthogonal_family),
        ("orthogonal compatibility threshold", orthogonal_threshold),
        ("perpendicular family and its thresholds", perp_family),
        ("Y family and piece continuity", y_family),
        ("attainability dichotomy", attainability),
        ("dual formulations agree", dual_formulations),
        ("parent reconstruction", parent_reconstruction),
        ("unbiased optimum", unbiased_optimum),
        ("Monte-Carlo experiment", monte_carlo),
        ("geometry oracle", geometry_oracle),
        ("graded symmetry", symmetry),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
