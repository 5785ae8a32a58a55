//! Convex quadratic subproblems of reduced SQP:
//!
//! ```text
//! min ½ vᵀ B v + gᵀ v   s.t.   J_E v + E = 0,   J_C v + C ≥ 0
//! ```
//!
//! with stationarity `B v + g + J_Eᵀ ν − J_Cᵀ μ = 0`, `μ ≥ 0`. The mixed
//! solver is a dual active-set method in the style of Goldfarb and Idnani:
//! it starts from the equality-constrained minimizer, adds the most violated
//! inequality and drops working constraints whenever their multiplier would
//! turn negative, so every iterate is optimal for its working set.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{Cholesky, Ldlt, Mat};
use crate::math::{self, dot};

/// Tolerance on the KKT invariants of a returned step.
pub const QP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct QpResult {
    pub v: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    /// Active inequality indices in increasing order.
    pub active_set: Vec<usize>,
    /// `‖B v + g + J_Eᵀ ν − J_Cᵀ μ‖_∞`
    pub kkt_residual: f64,
}

impl QpResult {
    pub fn objective(&self, b: &Mat, g: &[f64]) -> f64 {
        0.5 * dot(&self.v, &b.matvec(&self.v)) + dot(g, &self.v)
    }
}

/// `‖B v + g + J_Eᵀ ν − J_Cᵀ μ‖_∞`
pub fn stationarity_residual(b: &Mat, g: &[f64], je: &Mat, jc: &Mat, v: &[f64], nu: &[f64], mu: &[f64]) -> f64 {
    let mut r = b.matvec(v);
    math::axpy(1.0, g, &mut r);
    if je.rows() > 0 {
        math::axpy(1.0, &je.tmatvec(nu), &mut r);
    }
    if jc.rows() > 0 {
        math::axpy(-1.0, &jc.tmatvec(mu), &mut r);
    }
    math::norm_inf(&r)
}

fn check_dims(b: &Mat, g: &[f64], j: &Mat, rhs: &[f64], what: &'static str) -> Result<()> {
    let n = b.rows();
    check_len("Hessian approximation columns", n, b.cols())?;
    check_len("gradient", n, g.len())?;
    check_len(what, rhs.len(), j.rows())?;
    if j.rows() > 0 {
        check_len("constraint Jacobian columns", n, j.cols())?;
    }
    Ok(())
}

/// Index of the first row that lies in the span of the preceding ones.
fn dependent_row(rows: &Mat) -> Option<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..rows.rows() {
        let mut r = rows.row(k).to_vec();
        let scale = math::norm2(&r);
        for q in &basis {
            let c = dot(q, &r);
            math::axpy(-c, q, &mut r);
        }
        let rest = math::norm2(&r);
        if !(rest > 1e-10 * scale) {
            return Some(k);
        }
        r.iter_mut().for_each(|x| *x /= rest);
        basis.push(r);
    }
    None
}

/// Solves `[B Nᵀ; N 0] [z; y] = [a; c]` for row-stacked normals `N`.
fn saddle_solve(b: &Mat, normals: &[&[f64]], a: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, k) = (b.rows(), normals.len());
    let kkt = Mat::from_fn(n + k, n + k, |i, j| match (i < n, j < n) {
        (true, true) => b[(i, j)],
        (true, false) => normals[j - n][i],
        (false, true) => normals[i - n][j],
        (false, false) => 0.0,
    });
    let mut rhs = a.to_vec();
    rhs.extend_from_slice(c);
    let x = Ldlt::factor(&kkt)?.solve(&rhs);
    Ok((x[..n].to_vec(), x[n..].to_vec()))
}

/// Equality-constrained step from one symmetric-indefinite KKT solve.
pub fn solve_kkt_equality(b: &Mat, g: &[f64], je: &Mat, e: &[f64]) -> Result<QpResult> {
    check_dims(b, g, je, e, "equality values")?;
    Cholesky::factor(b)?;
    if let Some(row) = dependent_row(je) {
        return Err(Error::RankDeficient { row });
    }
    let normals: Vec<&[f64]> = (0..je.rows()).map(|k| je.row(k)).collect();
    let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
    let neg_e: Vec<f64> = e.iter().map(|x| -x).collect();
    let (v, nu) = saddle_solve(b, &normals, &neg_g, &neg_e)?;
    let kkt_residual = stationarity_residual(b, g, je, &Mat::zeros(0, g.len()), &v, &nu, &[]);
    Ok(QpResult {
        v,
        nu,
        mu: Vec::new(),
        active_set: Vec::new(),
        kkt_residual,
    })
}

/// Mixed equality and inequality subproblem.
pub fn solve_qp_mixed(b: &Mat, g: &[f64], je: &Mat, e: &[f64], jc: &Mat, c: &[f64]) -> Result<QpResult> {
    check_dims(b, g, jc, c, "inequality values")?;
    let start = solve_kkt_equality(b, g, je, e)?;
    let chol = Cholesky::factor(b)?;
    let (ne, nc) = (je.rows(), jc.rows());
    let mut x = start.v;
    // Working set: all equalities, then active inequalities in entry order.
    // `u` holds the multipliers in the sign convention B x + g = Σ u_j n_j.
    let mut working: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = start.nu.iter().map(|v| -v).collect();
    let limit = 50 * (nc + ne + b.rows() + 1);
    let violation_tol = 0.1 * QP_TOL;
    let normal = |j: usize| -> &[f64] {
        if j < ne {
            je.row(j)
        } else {
            jc.row(j - ne)
        }
    };
    let slack = |x: &[f64], l: usize| dot(jc.row(l), x) + c[l];

    let mut changes = 0usize;
    loop {
        // Most violated inequality outside the working set; lowest index on ties.
        let mut entering: Option<(usize, f64)> = None;
        for l in 0..nc {
            if working.contains(&(ne + l)) {
                continue;
            }
            let s = slack(&x, l);
            let tol = violation_tol * (1.0 + c[l].abs());
            if s < -tol && entering.is_none_or(|(_, best)| s < best) {
                entering = Some((l, s));
            }
        }
        let Some((l, _)) = entering else { break };
        let np = jc.row(l);
        let mut u_plus = 0.0;
        let base = dot(np, &chol.solve(np));
        loop {
            changes += 1;
            if changes > limit {
                return Err(Error::Cycling { limit });
            }
            let all: Vec<usize> = (0..ne).chain(working.iter().copied()).collect();
            let normals: Vec<&[f64]> = all.iter().map(|&j| normal(j)).collect();
            // z = H n⁺ is the primal direction and r = N* n⁺ the dual one.
            let (z, r) = saddle_solve(b, &normals, np, &vec![0.0; all.len()])?;
            let zn = dot(&z, np);
            // Dual step limit from working inequalities whose multiplier would cross zero.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for pos in ne..all.len() {
                if r[pos] > 0.0 {
                    let t = u[pos] / r[pos];
                    if t < t1 {
                        t1 = t;
                        drop = Some(pos);
                    }
                }
            }
            let t2 = if zn > 1e-12 * base { -slack(&x, l) / zn } else { f64::INFINITY };
            if t1.is_infinite() && t2.is_infinite() {
                let mut violated: Vec<usize> = (0..nc)
                    .filter(|&k| slack(&x, k) < -violation_tol * (1.0 + c[k].abs()))
                    .collect();
                violated.sort_unstable();
                return Err(Error::Infeasible { violated });
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                math::axpy(t, &z, &mut x);
            }
            for (uj, rj) in u.iter_mut().zip(&r) {
                *uj -= t * rj;
            }
            u_plus += t;
            if t2 <= t1 {
                working.push(ne + l);
                u.push(u_plus);
                break;
            }
            let pos = drop.expect("finite dual step has a blocking constraint");
            working.remove(pos - ne);
            u.remove(pos);
        }
    }

    let nu: Vec<f64> = u[..ne].iter().map(|v| -v).collect();
    let mut mu = vec![0.0; nc];
    for (pos, &j) in working.iter().enumerate() {
        mu[j - ne] = u[ne + pos].max(0.0);
    }
    let mut active_set: Vec<usize> = working.iter().map(|j| j - ne).collect();
    active_set.sort_unstable();
    let kkt_residual = stationarity_residual(b, g, je, jc, &x, &nu, &mu);
    Ok(QpResult {
        v: x,
        nu,
        mu,
        active_set,
        kkt_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularization {
    /// `B + c I` with the given `c ≥ 0`.
    Fixed(f64),
    /// Smallest `c ∈ {0, 1e-8, 1e-6, …, 1e8}` for which `B + c I` factors.
    Auto,
}

/// Shift ladder of the automatic mode.
pub fn regularization_ladder() -> impl Iterator<Item = f64> {
    core::iter::once(0.0).chain((0..9).map(|k| crate::math::powi(10.0, 2 * k - 8)))
}

/// Returns `B + c I` and the shift `c`.
pub fn regularize(b: &Mat, mode: Regularization) -> Result<(Mat, f64)> {
    let shifted = |c: f64| {
        let mut out = b.clone();
        out.add_diagonal(c);
        out
    };
    match mode {
        Regularization::Fixed(c) => {
            if !(c >= 0.0) {
                return Err(Error::Domain(format!("regularization shift {c} must be non-negative")));
            }
            Ok((shifted(c), c))
        }
        Regularization::Auto => {
            for c in regularization_ladder() {
                let candidate = shifted(c);
                if Cholesky::factor(&candidate).is_ok() {
                    return Ok((candidate, c));
                }
            }
            Err(Error::RegularizationExhausted)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_newton_step() {
        let b = Mat::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let g = [1.0, 2.0];
        let r = solve_kkt_equality(&b, &g, &Mat::zeros(0, 2), &[]).unwrap();
        let bv = b.matvec(&r.v);
        assert!((bv[0] + 1.0).abs() < 1e-14 && (bv[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn projection_formula() {
        let r = solve_kkt_equality(&Mat::identity(2), &[1.0, 0.0], &Mat::from_rows(&[&[1.0, 1.0]]), &[0.0]).unwrap();
        assert!((r.v[0] + 0.5).abs() < 1e-14 && (r.v[1] - 0.5).abs() < 1e-14);
        assert!(r.kkt_residual < 1e-14);
    }

    #[test]
    fn rank_and_definiteness_errors() {
        let je = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(
            solve_kkt_equality(&Mat::identity(2), &[0.0, 0.0], &je, &[0.0, 0.0]),
            Err(Error::RankDeficient { row: 1 })
        );
        assert!(matches!(
            solve_kkt_equality(&Mat::diag(&[1.0, -1.0]), &[0.0, 0.0], &Mat::zeros(0, 2), &[]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn one_dimensional_active_bound() {
        let r = solve_qp_mixed(&Mat::identity(1), &[1.0], &Mat::zeros(0, 1), &[], &Mat::from_rows(&[&[1.0]]), &[0.5])
            .unwrap();
        assert!((r.v[0] + 0.5).abs() < 1e-14);
        assert!((r.mu[0] - 0.5).abs() < 1e-14);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn inactive_inequalities_change_nothing() {
        let b = Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]);
        let g = [0.4, -0.2];
        let je = Mat::from_rows(&[&[1.0, -1.0]]);
        let eq = solve_kkt_equality(&b, &g, &je, &[0.1]).unwrap();
        let mixed = solve_qp_mixed(&b, &g, &je, &[0.1], &Mat::from_rows(&[&[1.0, 0.0]]), &[10.0]).unwrap();
        assert_eq!(eq.v, mixed.v);
        assert_eq!(mixed.mu, vec![0.0]);
    }

    #[test]
    fn infeasible_bounds() {
        // v ≥ 1 and −v ≥ 0.
        let jc = Mat::from_rows(&[&[1.0], &[-1.0]]);
        let err = solve_qp_mixed(&Mat::identity(1), &[0.0], &Mat::zeros(0, 1), &[], &jc, &[-1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }), "{err:?}");
    }

    #[test]
    fn regularization_modes() {
        let spd = Mat::identity(3);
        assert_eq!(regularize(&spd, Regularization::Auto).unwrap(), (spd.clone(), 0.0));
        let (bp, c) = regularize(&Mat::diag(&[1.0, -0.5]), Regularization::Auto).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(bp, Mat::diag(&[2.0, 0.5]));
        let (bp, c) = regularize(&Mat::diag(&[1.0, 2.0]), Regularization::Fixed(0.25)).unwrap();
        assert_eq!(bp.sub(&Mat::diag(&[1.0, 2.0])), Mat::identity(2).scaled(c));
        assert_eq!(
            regularize(&Mat::diag(&[-1e9]), Regularization::Auto),
            Err(Error::RegularizationExhausted)
        );
    }
}
