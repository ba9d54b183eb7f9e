//! Small dense primal-dual interior-point method for conic programs over
//! products of nonnegative orthants and second-order cones:
//!
//! ```text
//!   minimize    cᵀx
//!   subject to  G x + s = h,   A x = b,   s ∈ K
//! ```
//!
//! Nesterov–Todd scaling with a Mehrotra predictor-corrector step. Sizes here
//! are tiny (tens of variables), so the KKT system is assembled densely and
//! factored by LU with a few rounds of iterative refinement.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    NonNeg(usize),
    /// Second-order cone {(t, u) : |u| ≤ t} of the given total dimension.
    Soc(usize),
}

impl Cone {
    fn dim(&self) -> usize {
        match *self {
            Cone::NonNeg(d) | Cone::Soc(d) => d,
        }
    }

    fn degree(&self) -> usize {
        match *self {
            Cone::NonNeg(d) => d,
            Cone::Soc(_) => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cones: Vec<Cone>,
}

#[derive(Clone, Copy, Debug)]
pub struct IpmSettings {
    pub max_iter: usize,
    /// Absolute duality-gap target.
    pub gap_tol: f64,
    pub feas_tol: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            max_iter: 100,
            gap_tol: 1e-10,
            feas_tol: 1e-11,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    MaxIterations,
    /// The step length collapsed or the KKT system became singular.
    Stalled,
}

#[derive(Clone, Debug)]
pub struct IpmSolution {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub status: IpmStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Offsets of each cone block inside the stacked slack vector.
fn blocks(cones: &[Cone]) -> Vec<(usize, Cone)> {
    let mut off = 0;
    cones
        .iter()
        .map(|&c| {
            let o = off;
            off += c.dim();
            (o, c)
        })
        .collect()
}

fn soc_det(u: &[f64]) -> f64 {
    let n: f64 = u[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    (u[0] - n) * (u[0] + n)
}

/// Jordan product u∘v.
fn jordan(cones: &[(usize, Cone)], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for &(o, c) in cones {
        match c {
            Cone::NonNeg(d) => {
                for i in o..o + d {
                    out[i] = u[i] * v[i];
                }
            }
            Cone::Soc(d) => {
                out[o] = (o..o + d).map(|i| u[i] * v[i]).sum();
                for i in o + 1..o + d {
                    out[i] = u[o] * v[i] + v[o] * u[i];
                }
            }
        }
    }
    out
}

/// Solves λ∘u = d for u.
fn jordan_div(cones: &[(usize, Cone)], lambda: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(d.len());
    for &(o, c) in cones {
        match c {
            Cone::NonNeg(n) => {
                for i in o..o + n {
                    out[i] = d[i] / lambda[i];
                }
            }
            Cone::Soc(n) => {
                let l = &lambda.as_slice()[o..o + n];
                let det = soc_det(l);
                let l1d1: f64 = (1..n).map(|i| l[i] * d[o + i]).sum();
                let u0 = (l[0] * d[o] - l1d1) / det;
                out[o] = u0;
                for i in 1..n {
                    out[o + i] = (d[o + i] - u0 * l[i]) / l[0];
                }
            }
        }
    }
    out
}

fn identity(cones: &[(usize, Cone)], m: usize) -> DVector<f64> {
    let mut e = DVector::zeros(m);
    for &(o, c) in cones {
        match c {
            Cone::NonNeg(d) => e.rows_mut(o, d).fill(1.0),
            Cone::Soc(_) => e[o] = 1.0,
        }
    }
    e
}

/// Smallest t with u + t·e in the cone (negative when u is interior).
fn max_violation(cones: &[(usize, Cone)], u: &DVector<f64>) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &(o, c) in cones {
        match c {
            Cone::NonNeg(d) => {
                for i in o..o + d {
                    worst = worst.max(-u[i]);
                }
            }
            Cone::Soc(d) => {
                let n: f64 = (o + 1..o + d).map(|i| u[i] * u[i]).sum::<f64>().sqrt();
                worst = worst.max(n - u[o]);
            }
        }
    }
    worst
}

fn is_interior(cones: &[(usize, Cone)], u: &DVector<f64>) -> bool {
    cones.iter().all(|&(o, c)| match c {
        Cone::NonNeg(d) => (o..o + d).all(|i| u[i] > 0.0),
        Cone::Soc(d) => {
            let blk = &u.as_slice()[o..o + d];
            blk[0] > 0.0 && soc_det(blk) > 0.0
        }
    })
}

/// Largest α ≤ `cap` keeping u + αd in the cone, for u interior.
fn max_step(cones: &[(usize, Cone)], u: &DVector<f64>, d: &DVector<f64>, cap: f64) -> f64 {
    let mut alpha = cap;
    for &(o, c) in cones {
        match c {
            Cone::NonNeg(n) => {
                for i in o..o + n {
                    if d[i] < 0.0 {
                        alpha = alpha.min(-u[i] / d[i]);
                    }
                }
            }
            Cone::Soc(n) => {
                let ub = &u.as_slice()[o..o + n];
                let db = &d.as_slice()[o..o + n];
                alpha = alpha.min(soc_step(ub, db, alpha));
            }
        }
    }
    alpha
}

fn soc_step(u: &[f64], d: &[f64], cap: f64) -> f64 {
    let d1 = d[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if d[0] >= d1 {
        // d lies in the cone, so the ray never leaves it.
        return cap;
    }
    let inside = |t: f64| {
        let v: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + t * b).collect();
        v[0] > 0.0 && soc_det(&v) > 0.0
    };
    // First positive root of J(u + t d) = a t² + b t + c, with c = J(u) > 0.
    let a = (d[0] - d1) * (d[0] + d1);
    let b = 2.0 * (u[0] * d[0] - u[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>());
    let c = soc_det(u);
    let mut candidates = Vec::with_capacity(3);
    if a == 0.0 {
        if b < 0.0 {
            candidates.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q != 0.0 {
                candidates.push(q / a);
                candidates.push(c / q);
            }
        }
    }
    if d[0] < 0.0 {
        candidates.push(-u[0] / d[0]);
    }
    let mut t = candidates.into_iter().filter(|t| *t > 0.0).fold(cap, f64::min);
    if !t.is_finite() {
        return cap;
    }
    // Guard against roundoff in the root formula.
    for _ in 0..64 {
        if inside(t * (1.0 - 1e-12)) {
            return t;
        }
        t *= 0.5;
    }
    0.0
}

/// Nesterov–Todd scaling W (symmetric positive definite) with W z = W⁻¹ s = λ.
#[derive(Clone, Debug)]
enum BlockScaling {
    NonNeg(Vec<f64>),
    Soc { eta: f64, w: Vec<f64> },
}

#[derive(Clone, Debug)]
struct Scaling {
    blocks: Vec<(usize, BlockScaling)>,
}

impl Scaling {
    fn new(cones: &[(usize, Cone)], s: &DVector<f64>, z: &DVector<f64>) -> Self {
        let blocks = cones
            .iter()
            .map(|&(o, c)| match c {
                Cone::NonNeg(d) => (o, BlockScaling::NonNeg((o..o + d).map(|i| (s[i] / z[i]).sqrt()).collect())),
                Cone::Soc(d) => {
                    let sb = &s.as_slice()[o..o + d];
                    let zb = &z.as_slice()[o..o + d];
                    let js = soc_det(sb).sqrt();
                    let jz = soc_det(zb).sqrt();
                    let sbar: Vec<f64> = sb.iter().map(|v| v / js).collect();
                    let zbar: Vec<f64> = zb.iter().map(|v| v / jz).collect();
                    let dot: f64 = sbar.iter().zip(&zbar).map(|(a, b)| a * b).sum();
                    let gamma = ((1.0 + dot) / 2.0).sqrt();
                    let mut w: Vec<f64> = (0..d)
                        .map(|i| {
                            let jz_i = if i == 0 { zbar[0] } else { -zbar[i] };
                            (sbar[i] + jz_i) / (2.0 * gamma)
                        })
                        .collect();
                    // Keep J(w) = 1 exactly.
                    w[0] = (1.0 + w[1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
                    (o, BlockScaling::Soc { eta: (js / jz).sqrt(), w })
                }
            })
            .collect();
        Scaling { blocks }
    }

    fn apply(&self, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (o, blk) in &self.blocks {
            let o = *o;
            match blk {
                BlockScaling::NonNeg(w) => {
                    for (i, wi) in w.iter().enumerate() {
                        out[o + i] = if inverse { v[o + i] / wi } else { v[o + i] * wi };
                    }
                }
                BlockScaling::Soc { eta, w } => {
                    let d = w.len();
                    let sgn = if inverse { -1.0 } else { 1.0 };
                    let scale = if inverse { 1.0 / eta } else { *eta };
                    let w1v1: f64 = (1..d).map(|i| w[i] * v[o + i]).sum();
                    out[o] = scale * (w[0] * v[o] + sgn * w1v1);
                    let coef = sgn * v[o] + w1v1 / (1.0 + w[0]);
                    for i in 1..d {
                        out[o + i] = scale * (v[o + i] + coef * w[i]);
                    }
                }
            }
        }
        out
    }
}

/// KKT system in the scaled variables dz̃ = W dz, G̃ = W⁻¹G:
/// [[0, Aᵀ, G̃ᵀ], [A, 0, 0], [G̃, 0, −I]]. Keeps the ill-conditioned W² out of the matrix.
struct Kkt {
    matrix: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    scaling: Option<Scaling>,
    n: usize,
    p: usize,
}

impl Kkt {
    fn new(prob: &ConicProblem, scaling: Option<&Scaling>) -> Self {
        let n = prob.c.len();
        let p = prob.b.len();
        let m = prob.h.len();
        let mut g = prob.g.clone();
        if let Some(w) = scaling {
            for j in 0..n {
                let col = w.apply(&prob.g.column(j).into_owned(), true);
                g.set_column(j, &col);
            }
        }
        let size = n + p + m;
        let mut k = DMatrix::zeros(size, size);
        k.view_mut((0, n), (n, p)).copy_from(&prob.a.transpose());
        k.view_mut((0, n + p), (n, m)).copy_from(&g.transpose());
        k.view_mut((n, 0), (p, n)).copy_from(&prob.a);
        k.view_mut((n + p, 0), (m, n)).copy_from(&g);
        k.view_mut((n + p, n + p), (m, m)).copy_from(&(-DMatrix::identity(m, m)));
        let lu = k.clone().lu();
        Kkt { matrix: k, lu, scaling: scaling.cloned(), n, p }
    }

    fn solve(
        &self,
        bx: &DVector<f64>,
        by: &DVector<f64>,
        bz: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (n, p) = (self.n, self.p);
        let mut rhs = DVector::zeros(self.matrix.nrows());
        rhs.rows_mut(0, n).copy_from(bx);
        rhs.rows_mut(n, p).copy_from(by);
        match &self.scaling {
            Some(w) => rhs.rows_mut(n + p, bz.len()).copy_from(&w.apply(bz, true)),
            None => rhs.rows_mut(n + p, bz.len()).copy_from(bz),
        }
        let mut sol = self.lu.solve(&rhs)?;
        for _ in 0..3 {
            let res = residual(&self.matrix, &sol, &rhs, false);
            if res.amax() <= 1e-15 * (1.0 + rhs.amax()) {
                break;
            }
            sol += self.lu.solve(&res)?;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dz = sol.rows(n + p, bz.len()).into_owned();
        let dz = match &self.scaling {
            Some(w) => w.apply(&dz, true),
            None => dz,
        };
        Some((sol.rows(0, n).into_owned(), sol.rows(n, p).into_owned(), dz))
    }
}

/// b − M v (or M v + b with `add`) with every row summed in doubled precision.
fn residual(m: &DMatrix<f64>, v: &DVector<f64>, b: &DVector<f64>, add: bool) -> DVector<f64> {
    let mut out = DVector::zeros(m.nrows());
    for i in 0..m.nrows() {
        let (mut hi, mut lo) = (if add { b[i] } else { -b[i] }, 0.0);
        for j in 0..m.ncols() {
            let p = m[(i, j)] * v[j];
            let pe = m[(i, j)].mul_add(v[j], -p);
            let t = hi + p;
            let bp = t - hi;
            lo += (hi - (t - bp)) + (p - bp) + pe;
            hi = t;
        }
        out[i] = if add { hi + lo } else { -(hi + lo) };
    }
    out
}

pub fn solve(prob: &ConicProblem, settings: &IpmSettings) -> IpmSolution {
    let n = prob.c.len();
    let m = prob.h.len();
    let cones = blocks(&prob.cones);
    debug_assert_eq!(cones.iter().map(|(_, c)| c.dim()).sum::<usize>(), m);
    let degree: usize = prob.cones.iter().map(Cone::degree).sum();
    let e = identity(&cones, m);

    // Initial point from the W = I least-squares systems.
    let kkt0 = Kkt::new(prob, None);
    let (mut x, _, z0) = kkt0
        .solve(&DVector::zeros(n), &prob.b, &prob.h)
        .unwrap_or((DVector::zeros(n), DVector::zeros(prob.b.len()), -prob.h.clone()));
    let mut s = -z0;
    let (_, mut y, mut z) = kkt0
        .solve(&(-&prob.c), &DVector::zeros(prob.b.len()), &DVector::zeros(m))
        .unwrap_or((DVector::zeros(n), DVector::zeros(prob.b.len()), e.clone()));
    let shift = |u: &mut DVector<f64>| {
        let t = max_violation(&cones, u);
        if t >= -1e-8 * u.norm().max(1.0) {
            *u += &e * (1.0 + t);
        }
    };
    shift(&mut s);
    shift(&mut z);

    let res_scale_p = 1f64.max(prob.h.norm().max(prob.b.norm()));
    let res_scale_d = 1f64.max(prob.c.norm());
    let mut status = IpmStatus::MaxIterations;
    let mut iterations = 0;
    let (mut pres, mut dres, mut gap);

    loop {
        let rx = residual(&prob.a.transpose(), &y, &prob.c, true) + residual(&prob.g.transpose(), &z, &DVector::zeros(n), true);
        let ry = -residual(&prob.a, &x, &prob.b, false);
        let rz = -residual(&prob.g, &x, &(&prob.h - &s), false);
        gap = s.dot(&z);
        pres = ry.amax().max(rz.amax()) / res_scale_p;
        dres = rx.amax() / res_scale_d;
        if pres <= settings.feas_tol && dres <= settings.feas_tol && gap <= settings.gap_tol {
            status = IpmStatus::Optimal;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        iterations += 1;

        let scaling = Scaling::new(&cones, &s, &z);
        let lambda = scaling.apply(&z, false);
        let kkt = Kkt::new(prob, Some(&scaling));
        let mu = gap / degree as f64;

        // Newton direction for the linearized complementarity λ∘(W dz + W⁻¹ ds) = ds_rhs.
        let direction = |ds_rhs: &DVector<f64>| {
            let r = jordan_div(&cones, &lambda, ds_rhs);
            let w_r = scaling.apply(&r, false);
            let (dx, dy, dz) = kkt.solve(&(-&rx), &(-&ry), &(-&rz - &w_r))?;
            let ds = -&rz - &prob.g * &dx;
            Some((dx, dy, dz, ds))
        };

        let ll = jordan(&cones, &lambda, &lambda);
        let Some((_, _, dz_a, ds_a)) = direction(&(-&ll)) else {
            status = IpmStatus::Stalled;
            break;
        };
        let alpha_a = max_step(&cones, &s, &ds_a, 1.0).min(max_step(&cones, &z, &dz_a, 1.0));
        let sigma = (1.0 - alpha_a).clamp(0.0, 1.0).powi(3);

        let corr = jordan(
            &cones,
            &scaling.apply(&ds_a, true),
            &scaling.apply(&dz_a, false),
        );
        let rhs = -&ll - corr + &e * (sigma * mu);
        let Some((dx, dy, dz, ds)) = direction(&rhs) else {
            status = IpmStatus::Stalled;
            break;
        };
        let alpha_max = max_step(&cones, &s, &ds, f64::INFINITY).min(max_step(&cones, &z, &dz, f64::INFINITY));
        let alpha = (0.99 * alpha_max).min(1.0);
        if !(alpha > 1e-14) {
            status = IpmStatus::Stalled;
            break;
        }
        let s_new = &s + &ds * alpha;
        let z_new = &z + &dz * alpha;
        if !is_interior(&cones, &s_new) || !is_interior(&cones, &z_new) {
            status = IpmStatus::Stalled;
            break;
        }
        x += &dx * alpha;
        y += &dy * alpha;
        s = s_new;
        z = z_new;
    }

    IpmSolution {
        primal_objective: prob.c.dot(&x),
        x,
        s,
        y,
        z,
        status,
        iterations,
        gap,
        primal_residual: pres,
        dual_residual: dres,
    }
}
