//! Dense complex linear algebra and a small convex solver.
//!
//! Everything here works on `nalgebra` dynamic matrices. Rank decisions use a
//! relative singular-value threshold of [`RANK_RTOL`] times the largest
//! singular value, so results are invariant to the overall scale of the input.
//!
//! The solver half provides [`min_norm_qp`], a dual active-set method for
//!
//! ```text
//!     minimize  ||z||^2   subject to   C z >= b
//! ```
//!
//! and [`bisect_max_margin`], which finds the largest margin whose minimum
//! power fits a budget, given a monotone probe.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Singular values below `RANK_RTOL * sigma_max` count as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Cap on bracket doublings in [`bisect_max_margin`].
pub const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("margin probe is infeasible at zero margin (power {power} exceeds budget {budget})")]
    InfeasibleAtZero { power: f64, budget: f64 },
    #[error("margin bracket still feasible after {0} doublings")]
    Unbounded(usize),
    #[error("quadratic program did not converge in {0} iterations")]
    NoConvergence(usize),
}

/// Thin SVD with singular values sorted in decreasing order.
struct ThinSvd {
    u: ComplexMatrix,
    sigma: DVector<f64>,
    v_t: ComplexMatrix,
}

fn thin_svd(h: &ComplexMatrix) -> ThinSvd {
    let svd = h.clone().svd(true, true);
    ThinSvd {
        u: svd.u.expect("u requested"),
        sigma: svd.singular_values,
        v_t: svd.v_t.expect("v_t requested"),
    }
}

fn rank_from_sigma(sigma: &DVector<f64>) -> usize {
    let smax = sigma.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > RANK_RTOL * smax).count()
}

/// Numerical rank under the [`RANK_RTOL`] threshold.
pub fn numerical_rank(h: &ComplexMatrix) -> usize {
    if h.is_empty() {
        return 0;
    }
    rank_from_sigma(&h.singular_values())
}

/// Singular values of `h` in decreasing order.
pub fn singular_values(h: &ComplexMatrix) -> DVector<f64> {
    h.singular_values()
}

/// Right singular vectors (columns) paired with the singular values, both
/// sorted in decreasing order of singular value.
pub fn svd_factors(h: &ComplexMatrix) -> (ComplexMatrix, DVector<f64>, ComplexMatrix) {
    let ThinSvd { u, sigma, v_t } = thin_svd(h);
    (u, sigma, v_t.adjoint())
}

/// Moore–Penrose pseudo-inverse.
pub fn pseudo_inverse(h: &ComplexMatrix) -> ComplexMatrix {
    if h.is_empty() {
        return ComplexMatrix::zeros(h.ncols(), h.nrows());
    }
    let ThinSvd { u, sigma, v_t } = thin_svd(h);
    let rank = rank_from_sigma(&sigma);
    let mut out = ComplexMatrix::zeros(h.ncols(), h.nrows());
    for i in 0..rank {
        let vi = v_t.row(i).adjoint();
        let ui = u.column(i).adjoint();
        out += (vi * ui).unscale(sigma[i]);
    }
    out
}

/// Orthonormal basis for the column space of `h`.
pub fn orthonormal_range_basis(h: &ComplexMatrix) -> ComplexMatrix {
    if h.is_empty() {
        return ComplexMatrix::zeros(h.nrows(), 0);
    }
    let ThinSvd { u, sigma, .. } = thin_svd(h);
    let rank = rank_from_sigma(&sigma);
    u.columns(0, rank).into_owned()
}

/// Orthogonal projector `H H⁺` onto the column space of `h`.
pub fn projector(h: &ComplexMatrix) -> ComplexMatrix {
    let q = orthonormal_range_basis(h);
    &q * q.adjoint()
}

/// Orthonormal basis for the null space of `m`; zero columns when trivial.
pub fn null_space_basis(m: &ComplexMatrix) -> ComplexMatrix {
    null_space_basis_scaled(m, 0.0)
}

/// Null space with singular values below `RANK_RTOL·max(σ_max, scale)`
/// treated as zero. Use when `m` is derived from a matrix of norm `scale` and
/// may itself be pure rounding noise.
pub fn null_space_basis_scaled(m: &ComplexMatrix, scale: f64) -> ComplexMatrix {
    let n = m.ncols();
    if m.nrows() == 0 {
        return ComplexMatrix::identity(n, n);
    }
    // Pad wide inputs to square so the SVD yields a full set of right vectors.
    let padded;
    let source = if m.nrows() < n {
        padded = {
            let mut p = ComplexMatrix::zeros(n, n);
            p.rows_mut(0, m.nrows()).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let ThinSvd { sigma, v_t, .. } = thin_svd(source);
    let smax = sigma.iter().cloned().fold(scale, f64::max);
    let rank = sigma.iter().filter(|&&s| s > RANK_RTOL * smax).count();
    v_t.rows(rank, n - rank).adjoint()
}

/// `v ∈ ℂⁿ ↦ [Re v; Im v] ∈ ℝ²ⁿ`.
pub fn realify_vector(v: &ComplexVector) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// `M ↦ [[Re M, −Im M], [Im M, Re M]]`.
pub fn realify_matrix(m: &ComplexMatrix) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`realify_vector`].
pub fn complexify_vector(v: &DVector<f64>) -> ComplexVector {
    assert!(v.len().is_multiple_of(2), "realified vectors have even length");
    let n = v.len() / 2;
    ComplexVector::from_fn(n, |i, _| Complex64::new(v[i], v[i + n]))
}

/// `minimize ||z||² subject to C z ≥ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    c: DMatrix<f64>,
    b: DVector<f64>,
}

impl QpProblem {
    pub fn new(c: DMatrix<f64>, b: DVector<f64>) -> Result<Self, NumericsError> {
        if c.nrows() != b.len() {
            return Err(NumericsError::Dimension(format!(
                "{} constraint rows but {} bounds",
                c.nrows(),
                b.len()
            )));
        }
        if c.ncols() == 0 {
            return Err(NumericsError::Dimension("no variables".into()));
        }
        if c.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Self { c, b })
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn bounds(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn n_vars(&self) -> usize {
        self.c.ncols()
    }

    pub fn n_constraints(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// `||z||²`.
    pub objective: f64,
    pub status: QpStatus,
    /// Multipliers for the `½||z||²` Lagrangian, so that `z = Cᵀλ`.
    pub multipliers: DVector<f64>,
    /// Scaled residual, see [`kkt_residual`].
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Scaled KKT residual of a candidate pair `(z, λ)`: the largest of the
/// stationarity error, primal violation, dual violation and complementarity,
/// each divided by `1 + ` the magnitude of the quantities it compares.
pub fn kkt_residual(p: &QpProblem, z: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
    let z_scale = 1.0 + z.amax();
    let b_scale = 1.0 + if p.b.is_empty() { 0.0 } else { p.b.amax() };
    let l_scale = 1.0 + if lambda.is_empty() { 0.0 } else { lambda.amax() };
    let stationarity = (z - p.c.transpose() * lambda).amax() / z_scale;
    let slack = &p.c * z - &p.b;
    let mut worst = stationarity;
    for i in 0..slack.len() {
        worst = worst
            .max(-slack[i] / b_scale)
            .max(-lambda[i] / l_scale)
            .max((lambda[i] * slack[i]).abs() / (l_scale * b_scale));
    }
    worst
}

/// Goldfarb–Idnani dual active-set method specialised to the identity Hessian.
///
/// Starts at the unconstrained minimiser `z = 0` and repeatedly adds the most
/// violated constraint, dropping active constraints whose multipliers would
/// turn negative. The polyhedron is reported empty when a violated constraint
/// can be moved neither in primal nor in dual space.
pub fn min_norm_qp(p: &QpProblem, tol: f64) -> Result<QpSolution, NumericsError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(NumericsError::BadTolerance(tol));
    }
    let (m, n) = p.c.shape();
    let mut z = DVector::<f64>::zeros(n);
    if m == 0 {
        return Ok(QpSolution {
            z,
            objective: 0.0,
            status: QpStatus::Optimal,
            multipliers: DVector::zeros(0),
            kkt_residual: 0.0,
            iterations: 0,
        });
    }

    let row_norms: Vec<f64> = (0..m).map(|i| p.c.row(i).norm()).collect();
    let viol_tol = 1e-3 * tol;
    let max_iter = 50 * (m + n) + 100;

    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let slack_of = |z: &DVector<f64>, i: usize| p.c.row(i).transpose().dot(z) - p.b[i];

    'outer: loop {
        // Most violated constraint, measured in distance units.
        let mut pick = None;
        let mut worst = 0.0;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let s = slack_of(&z, i);
            let scaled = if row_norms[i] > 0.0 { s / row_norms[i] } else { s };
            if s < -viol_tol * (1.0 + p.b[i].abs()) && scaled < worst {
                worst = scaled;
                pick = Some(i);
            }
        }
        let Some(np) = pick else { break };
        let cp = p.c.row(np).transpose();
        let mut u_plus = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(NumericsError::NoConvergence(max_iter));
            }
            let (z_dir, r) = directions(&p.c, &active, &cp);
            let t1 = r
                .iter()
                .enumerate()
                .filter(|(_, &rj)| rj > 0.0)
                .map(|(j, &rj)| (u[j] / rj, j))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let dir_sq = z_dir.norm_squared();
            let primal_step = dir_sq > (1e-10 * row_norms[np]).powi(2);

            if !primal_step {
                let Some((t, l)) = t1 else {
                    return Ok(infeasible(p, z, iterations));
                };
                for (uj, rj) in u.iter_mut().zip(r.iter()) {
                    *uj -= t * rj;
                }
                u_plus += t;
                active.remove(l);
                u.remove(l);
                continue;
            }

            let s_p = slack_of(&z, np);
            let t2 = -s_p / dir_sq;
            let (t, drop) = match t1 {
                Some((t1, l)) if t1 < t2 => (t1, Some(l)),
                _ => (t2, None),
            };
            z += &z_dir * t;
            for (uj, rj) in u.iter_mut().zip(r.iter()) {
                *uj -= t * rj;
            }
            u_plus += t;
            match drop {
                Some(l) => {
                    active.remove(l);
                    u.remove(l);
                }
                None => {
                    active.push(np);
                    u.push(u_plus);
                    continue 'outer;
                }
            }
        }
    }

    let mut lambda = DVector::<f64>::zeros(m);
    for (&i, &ui) in active.iter().zip(u.iter()) {
        lambda[i] = ui.max(0.0);
    }
    // Recover z from the multipliers to remove drift accumulated by the steps.
    if !active.is_empty() {
        z = p.c.transpose() * &lambda;
    }
    let kkt = kkt_residual(p, &z, &lambda);
    Ok(QpSolution {
        objective: z.norm_squared(),
        z,
        status: QpStatus::Optimal,
        multipliers: lambda,
        kkt_residual: kkt,
        iterations,
    })
}

fn infeasible(p: &QpProblem, z: DVector<f64>, iterations: usize) -> QpSolution {
    QpSolution {
        objective: z.norm_squared(),
        z,
        status: QpStatus::Infeasible,
        multipliers: DVector::zeros(p.c.nrows()),
        kkt_residual: f64::INFINITY,
        iterations,
    }
}

/// Primal step `(I − N N⁺) c` and dual step `N⁺ c` for the active normals `N`.
fn directions(c: &DMatrix<f64>, active: &[usize], cp: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
    if active.is_empty() {
        return (cp.clone(), Vec::new());
    }
    let n = c.ncols();
    let normals = DMatrix::from_fn(n, active.len(), |i, j| c[(active[j], i)]);
    let qr = normals.qr();
    let q = qr.q();
    let r = qr.r();
    let qtc = q.transpose() * cp;
    let z_dir = cp - &q * &qtc;
    let dual = r
        .solve_upper_triangular(&qtc)
        .expect("active normals stay linearly independent");
    (z_dir, dual.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionReport {
    pub t_star: f64,
    pub z_star: DVector<f64>,
    /// `(lower, upper)` after the bracketing phase and after every halving.
    pub history: Vec<(f64, f64)>,
    pub evaluations: usize,
}

impl BisectionReport {
    pub fn lower(&self) -> f64 {
        self.history.last().map_or(self.t_star, |h| h.0)
    }

    pub fn upper(&self) -> f64 {
        self.history.last().map_or(self.t_star, |h| h.1)
    }
}

/// Largest margin `t` (to within `tol`) whose minimum power fits `budget`.
///
/// `power_at(t)` must be nondecreasing in `t` and return the minimum power at
/// margin `t` together with a witness; infeasible margins report
/// `f64::INFINITY`. The upper bracket starts at `t_hi_seed` and doubles until
/// infeasible.
pub fn bisect_max_margin<F>(
    mut power_at: F,
    budget: f64,
    t_hi_seed: f64,
    tol: f64,
) -> Result<BisectionReport, NumericsError>
where
    F: FnMut(f64) -> Result<(f64, DVector<f64>), NumericsError>,
{
    if tol.is_nan() || tol <= 0.0 {
        return Err(NumericsError::BadTolerance(tol));
    }
    let (p0, z0) = power_at(0.0)?;
    if p0 > budget {
        return Err(NumericsError::InfeasibleAtZero { power: p0, budget });
    }
    let mut evaluations = 1;
    let mut lo = 0.0;
    let mut z_lo = z0;
    let mut hi = t_hi_seed.max(tol);
    let mut doublings = 0;
    loop {
        let (p, z) = power_at(hi)?;
        evaluations += 1;
        if p > budget {
            break;
        }
        lo = hi;
        z_lo = z;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(NumericsError::Unbounded(MAX_DOUBLINGS));
        }
    }
    let mut history = vec![(lo, hi)];
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (p, z) = power_at(mid)?;
        evaluations += 1;
        if p <= budget {
            lo = mid;
            z_lo = z;
        } else {
            hi = mid;
        }
        history.push((lo, hi));
    }
    Ok(BisectionReport {
        t_star: lo,
        z_star: z_lo,
        history,
        evaluations,
    })
}
