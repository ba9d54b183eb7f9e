//! Derivative-free upper bound on Δ_M, independent of the conic solver.
//!
//! Each evaluation maps a candidate n ∈ R⁹ onto the compatible region by
//! radial shrinking toward n = 0 (Σ|q_k − q_f| is positively homogeneous), so
//! every point scored is feasible and the best score is a valid upper bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec3;
use crate::mur::{compatibility_lhs, protocol_objective};
use crate::qubit::Triplet;

fn unpack(v: &[f64]) -> [Vec3; 3] {
    [0, 1, 2].map(|j| Vec3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]))
}

fn feasible(n: [Vec3; 3]) -> [Vec3; 3] {
    let lhs = compatibility_lhs(&n).unwrap_or(f64::INFINITY);
    if lhs > 4.0 {
        let s = 4.0 / lhs;
        n.map(|v| v * s)
    } else {
        n
    }
}

fn score(m: &[Vec3; 3], v: &[f64]) -> f64 {
    if v.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    protocol_objective(m, &feasible(unpack(v)))
}

/// Plain Nelder–Mead with standard coefficients.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], scale: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..dim {
        let mut p = start.to_vec();
        p[i] += scale;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut evals = dim + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[dim] - values[0]).abs() <= 1e-13 * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|c| simplex[..dim].iter().map(|p| p[c]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
        } else {
            let contracted = if fr < values[dim] { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            evals += 1;
            if fc < values[dim].min(fr) {
                simplex[dim] = contracted;
                values[dim] = fc;
            } else {
                for i in 1..=dim {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
                evals += dim;
            }
        }
    }
    let best = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[best].clone(), values[best])
}

/// Best worst-case objective over `restarts` seeded Nelder–Mead runs on the
/// Bloch form. Always an upper bound on the exact incompatibility.
pub fn oracle_multistart(t: &Triplet, restarts: usize, seed: u64) -> f64 {
    let m = t.bloch();
    let f = |v: &[f64]| score(&m, v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = m.iter().flat_map(|v| v.to_array()).collect();

    let mut best = f(&flat);
    for _ in 0..restarts.max(1) {
        let shrink: f64 = rng.random_range(0.3..1.0);
        let start: Vec<f64> = flat
            .iter()
            .map(|x| x * shrink + rng.random_range(-0.1..0.1))
            .collect();
        let (mut x, mut fx) = nelder_mead(&f, &start, 0.1, 6000);
        // Restart from the incumbent with shrinking simplices to escape stalls.
        for scale in [0.03, 0.01, 1e-3, 1e-4, 1e-5] {
            let (x2, f2) = nelder_mead(&f, &x, scale, 3000);
            if f2 < fx {
                x = x2;
                fx = f2;
            }
        }
        best = best.min(fx);
    }
    best
}
