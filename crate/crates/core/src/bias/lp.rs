//! Basis pursuit `min ‖β‖₁ s.t. Xβ = y` as a standard-form LP solved by a
//! dense two-phase simplex with Bland's rule.
//!
//! Variables are `u, v ≥ 0` with `β = u − v`, plus one artificial per row.
//! After the optimal basis is found, the basic values are recomputed from the
//! original columns by a direct solve to remove accumulated pivoting error.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, lu_solve, norm1, Matrix};
use crate::model::Dataset;
use crate::{Error, Result};

const EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub beta: Vec<f64>,
    /// `‖β‖₁`.
    pub objective: f64,
    /// Dual vector `λ` of `max ⟨y, λ⟩ s.t. ‖Xᵀλ‖_∞ ≤ 1`.
    pub dual: Vec<f64>,
    /// `‖β‖₁ − ⟨y, λ⟩`.
    pub duality_gap: f64,
    pub pivots: usize,
}

/// Minimum-`ℓ1` interpolator.
pub fn min_l1_interpolator(data: &Dataset) -> Result<Vec<f64>> {
    solve_min_l1(data).map(|s| s.beta)
}

struct Tableau {
    rows: usize,
    cols: usize,
    t: Matrix,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[(r, c)];
        for v in self.t.row_mut(r) {
            *v /= p;
        }
        self.rhs[r] /= p;
        let prow = self.t.row(r).to_vec();
        let prhs = self.rhs[r];
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                for (v, pv) in self.t.row_mut(i).iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                self.t[(i, c)] = 0.0;
                self.rhs[i] -= f * prhs;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Runs simplex iterations on the current cost row over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let max_pivots = 50_000 + 100 * self.cols;
        loop {
            let Some(c) = (0..allowed).find(|&j| self.cost[j] < -EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.t[(i, c)];
                if a > EPS {
                    let ratio = self.rhs[i] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Err(Error::Solver("LP unbounded".into()));
            };
            self.pivot(r, c);
            if self.pivots > max_pivots {
                return Err(Error::Solver(format!("simplex exceeded {max_pivots} pivots")));
            }
        }
    }
}

/// Solves basis pursuit and reports the dual certificate.
pub fn solve_min_l1(data: &Dataset) -> Result<LpSolution> {
    let (n, d) = (data.n(), data.d());
    let ns = 2 * d;
    let cols = ns + n;
    let sign: Vec<f64> = data.y.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut t = Matrix::zeros(n, cols);
    for i in 0..n {
        for j in 0..d {
            let a = sign[i] * data.x[(i, j)];
            t[(i, j)] = a;
            t[(i, d + j)] = -a;
        }
        t[(i, ns + i)] = 1.0;
    }
    let rhs: Vec<f64> = data.y.iter().zip(&sign).map(|(y, s)| y * s).collect();
    let original = t.clone();

    // Phase I: minimize the sum of artificials.
    let mut cost = vec![0.0; cols];
    for j in 0..ns {
        cost[j] = -(0..n).map(|i| t[(i, j)]).sum::<f64>();
    }
    let mut tab = Tableau { rows: n, cols, t, rhs, basis: (ns..ns + n).collect(), cost, pivots: 0 };
    tab.optimize(ns)?;
    let infeas: f64 = (0..n).filter(|&i| tab.basis[i] >= ns).map(|i| tab.rhs[i]).sum();
    let scale = 1.0 + norm1(&data.y);
    if infeas > 1e-9 * scale {
        return Err(Error::Solver(format!("Xβ = y is infeasible (phase-I residual {infeas:e})")));
    }
    // Drive zero-level artificials out of the basis where possible.
    for i in 0..n {
        if tab.basis[i] >= ns {
            if let Some(j) = (0..ns).find(|&j| tab.t[(i, j)].abs() > 1e-8) {
                tab.pivot(i, j);
            }
        }
    }

    // Phase II: minimize Σ(u + v).
    let mut cost = vec![0.0; cols];
    for j in 0..ns {
        cost[j] = 1.0 - (0..n).filter(|&i| tab.basis[i] < ns).map(|i| tab.t[(i, j)]).sum::<f64>();
    }
    for k in 0..n {
        let j = ns + k;
        cost[j] = -(0..n).filter(|&i| tab.basis[i] < ns).map(|i| tab.t[(i, j)]).sum::<f64>();
    }
    tab.cost = cost;
    tab.optimize(ns)?;

    // Polish: solve B x_B = rhs on the original columns.
    let mut bmat = Matrix::zeros(n, n);
    for (k, &j) in tab.basis.iter().enumerate() {
        for i in 0..n {
            bmat[(i, k)] = original[(i, j)];
        }
    }
    let rhs0: Vec<f64> = data.y.iter().zip(&sign).map(|(y, s)| y * s).collect();
    let xb = lu_solve(&bmat, &rhs0).unwrap_or_else(|_| tab.rhs.clone());
    let mut beta = vec![0.0; d];
    for (k, &j) in tab.basis.iter().enumerate() {
        let v = xb[k].max(0.0);
        if j < d {
            beta[j] += v;
        } else if j < ns {
            beta[j - d] -= v;
        }
    }
    // λ_i = −(reduced cost of artificial i), mapped back through the row signs.
    let dual: Vec<f64> = (0..n).map(|i| -tab.cost[ns + i] * sign[i]).collect();
    let objective = norm1(&beta);
    let duality_gap = objective - dot(&data.y, &dual);
    Ok(LpSolution { beta, objective, dual, duality_gap, pivots: tab.pivots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_sparse_regression;

    #[test]
    fn one_constraint_vertex() {
        let d = Dataset::new(Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(), vec![2.0], None).unwrap();
        let s = solve_min_l1(&d).unwrap();
        assert!((s.beta[0]).abs() < 1e-15 && (s.beta[1] - 1.0).abs() < 1e-15);
        assert!((s.objective - 1.0).abs() < 1e-15);
        assert!(s.duality_gap.abs() < 1e-12);
    }

    #[test]
    fn negative_label() {
        let d = Dataset::new(Matrix::from_rows(&[vec![1.0, -4.0]]).unwrap(), vec![-2.0], None).unwrap();
        let b = min_l1_interpolator(&d).unwrap();
        assert!(b[0].abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_labels() {
        let mut d = generate_sparse_regression(5, 10, 2, 2).unwrap();
        d.y = vec![0.0; 5];
        assert!(min_l1_interpolator(&d).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn recovers_planted_model() {
        let d = generate_sparse_regression(40, 100, 5, 1).unwrap();
        let s = solve_min_l1(&d).unwrap();
        let truth = d.beta_l0.as_ref().unwrap();
        let err: f64 = s.beta.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(err <= 1e-6, "err {err}");
        assert!(s.duality_gap.abs() <= 1e-8 * (1.0 + s.objective), "gap {}", s.duality_gap);
        let xt = d.x.tmul_vec(&s.dual);
        assert!(xt.iter().all(|v| v.abs() <= 1.0 + 1e-8));
    }

    #[test]
    fn infeasible_system() {
        let d = Dataset::new(Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(), vec![1.0, 2.0], None).unwrap();
        assert!(matches!(solve_min_l1(&d), Err(Error::Solver(_))));
    }
}
