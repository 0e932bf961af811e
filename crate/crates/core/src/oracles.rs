//! Brute-force reference computations.
//!
//! These are deliberately naive and share no code path with the solvers they
//! check. They are used by the test suites and by the CLI self-test.

use nalgebra::{DMatrix, DVector};

/// Exhaustive active-set enumeration for `min ||z||² s.t. C z ≥ b`.
///
/// Tries every subset `S` of rows, takes the least-norm solution of
/// `C_S z = b_S`, and keeps the smallest feasible one. Returns `None` when no
/// subset yields a feasible point, i.e. the polyhedron is empty.
///
/// Cost is `2^m` small least-squares solves; intended for `m ≤ 12` or so.
pub fn qp_by_enumeration(c: &DMatrix<f64>, b: &DVector<f64>, feas_tol: f64) -> Option<DVector<f64>> {
    let (m, n) = c.shape();
    assert!(m < 24, "enumeration over 2^{m} subsets is not sensible");
    let mut best: Option<DVector<f64>> = None;
    for mask in 0u32..(1u32 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let z = if rows.is_empty() {
            DVector::zeros(n)
        } else {
            let cs = DMatrix::from_fn(rows.len(), n, |i, j| c[(rows[i], j)]);
            let bs = DVector::from_fn(rows.len(), |i, _| b[rows[i]]);
            let pinv = match cs.clone().pseudo_inverse(1e-12) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let z = pinv * &bs;
            let scale = 1.0 + bs.amax();
            if (&cs * &z - &bs).amax() > 1e-9 * scale {
                continue; // inconsistent equality system
            }
            z
        };
        let slack = c * &z - b;
        if slack.iter().all(|&s| s >= -feas_tol) {
            let better = best
                .as_ref()
                .is_none_or(|cur| z.norm_squared() < cur.norm_squared());
            if better {
                best = Some(z);
            }
        }
    }
    best
}

/// Largest grid point `t = i·step` in `[0, t_max]` whose probed power fits
/// the budget. Does not assume monotonicity.
pub fn grid_max_margin<F>(mut power_at: F, budget: f64, step: f64, t_max: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    assert!(step > 0.0);
    let count = (t_max / step).ceil() as usize;
    let mut best = 0.0;
    for i in 0..=count {
        let t = i as f64 * step;
        if power_at(t) <= budget {
            best = t;
        }
    }
    best
}
