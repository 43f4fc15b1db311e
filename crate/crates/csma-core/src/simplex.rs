//! A small dense two-phase simplex solver.
//!
//! The linear programs in this crate are tiny (at most a few hundred
//! variables: independent-set schedules and detailed-state distributions),
//! so a dense tableau with Bland-style anti-cycling is plenty. All variables
//! are nonnegative; callers split free variables themselves.

use crate::error::{Error, Result};

/// Row sense of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// `maximize c.x subject to rows, x >= 0`.
#[derive(Debug, Clone)]
pub struct Lp {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

const EPS: f64 = 1e-11;

impl Lp {
    pub fn new(num_vars: usize, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), num_vars);
        Self {
            num_vars,
            objective,
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push((coeffs, sense, rhs));
    }

    /// Solve the program. Errors with `Solver` on infeasible or unbounded
    /// instances.
    pub fn solve(&self) -> Result<LpSolution> {
        let mut tab = Tableau::build(self)?;
        tab.phase1()?;
        tab.phase2(&self.objective)
    }
}

struct Tableau {
    /// One row per constraint plus an objective row last.
    /// Columns: structural vars, slack/surplus vars, artificial vars, rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    num_structural: usize,
    num_slack: usize,
    num_artificial: usize,
}

impl Tableau {
    fn build(lp: &Lp) -> Result<Self> {
        let m = lp.rows.len();
        let n = lp.num_vars;
        let mut num_slack = 0;
        let mut num_artificial = 0;
        // Normalize rhs >= 0, then count auxiliary columns.
        let mut norm: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(m);
        for (coeffs, sense, rhs) in &lp.rows {
            let (coeffs, sense, rhs) = if *rhs < 0.0 {
                let flipped = match sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
                (coeffs.iter().map(|c| -c).collect(), flipped, -rhs)
            } else {
                (coeffs.clone(), *sense, *rhs)
            };
            match sense {
                Sense::Le => num_slack += 1,
                Sense::Ge => {
                    num_slack += 1;
                    num_artificial += 1;
                }
                Sense::Eq => num_artificial += 1,
            }
            norm.push((coeffs, sense, rhs));
        }
        let width = n + num_slack + num_artificial + 1;
        let mut rows = vec![vec![0.0f64; width]; m + 1];
        let mut basis = vec![0usize; m];
        let mut slack_at = n;
        let mut art_at = n + num_slack;
        for (i, (coeffs, sense, rhs)) in norm.iter().enumerate() {
            rows[i][..n].copy_from_slice(coeffs);
            rows[i][width - 1] = *rhs;
            match sense {
                Sense::Le => {
                    rows[i][slack_at] = 1.0;
                    basis[i] = slack_at;
                    slack_at += 1;
                }
                Sense::Ge => {
                    rows[i][slack_at] = -1.0;
                    slack_at += 1;
                    rows[i][art_at] = 1.0;
                    basis[i] = art_at;
                    art_at += 1;
                }
                Sense::Eq => {
                    rows[i][art_at] = 1.0;
                    basis[i] = art_at;
                    art_at += 1;
                }
            }
        }
        Ok(Self {
            rows,
            basis,
            num_structural: n,
            num_slack,
            num_artificial,
        })
    }

    fn width(&self) -> usize {
        self.num_structural + self.num_slack + self.num_artificial + 1
    }

    fn num_rows(&self) -> usize {
        self.rows.len() - 1
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.num_structural + self.num_slack && col < self.width() - 1
    }

    /// Minimize the sum of artificial variables; error if it stays positive.
    fn phase1(&mut self) -> Result<()> {
        if self.num_artificial == 0 {
            return Ok(());
        }
        let m = self.num_rows();
        let width = self.width();
        // Phase-1 objective: minimize sum of artificials. With the usual
        // max convention the objective row holds reduced costs; start from
        // cost 1 on artificial columns and eliminate the basic ones.
        for j in 0..width {
            self.rows[m][j] = if self.is_artificial(j) { 1.0 } else { 0.0 };
        }
        for i in 0..m {
            if self.is_artificial(self.basis[i]) {
                for j in 0..width {
                    let v = self.rows[i][j];
                    self.rows[m][j] -= v;
                }
            }
        }
        self.run_simplex(width - 1)?;
        let infeasibility = -self.rows[m][width - 1];
        if infeasibility > 1e-8 {
            return Err(Error::Solver(format!(
                "infeasible (phase-1 residual {infeasibility:.3e})"
            )));
        }
        // Drive any leftover artificial variables out of the basis.
        for i in 0..m {
            if self.is_artificial(self.basis[i]) {
                let pivot_col =
                    (0..self.num_structural + self.num_slack).find(|&j| self.rows[i][j].abs() > EPS);
                if let Some(j) = pivot_col {
                    self.pivot(i, j);
                }
                // An all-zero row is a redundant constraint; leave it.
            }
        }
        Ok(())
    }

    /// Maximize the real objective over non-artificial columns.
    fn phase2(mut self, objective: &[f64]) -> Result<LpSolution> {
        let m = self.num_rows();
        let width = self.width();
        for j in 0..width {
            self.rows[m][j] = 0.0;
        }
        for (j, &c) in objective.iter().enumerate() {
            self.rows[m][j] = -c;
        }
        for i in 0..m {
            let b = self.basis[i];
            let factor = self.rows[m][b];
            if factor != 0.0 {
                for j in 0..width {
                    let v = self.rows[i][j];
                    self.rows[m][j] -= factor * v;
                }
            }
        }
        self.run_simplex(self.num_structural + self.num_slack)?;
        let mut x = vec![0.0f64; self.num_structural];
        for i in 0..m {
            if self.basis[i] < self.num_structural {
                x[self.basis[i]] = self.rows[i][width - 1];
            }
        }
        let objective = self.rows[m][width - 1];
        Ok(LpSolution { x, objective })
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width();
        let p = self.rows[row][col];
        for j in 0..width {
            self.rows[row][j] /= p;
        }
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for j in 0..width {
                    let base = self.rows[row][j];
                    self.rows[i][j] -= f * base;
                }
                self.rows[i][col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Simplex iterations over columns `0..allowed_cols`, Bland's rule.
    fn run_simplex(&mut self, allowed_cols: usize) -> Result<()> {
        let m = self.num_rows();
        let width = self.width();
        let mut iterations = 0usize;
        let max_iterations = 50_000 + 200 * width * (m + 1);
        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::Solver("simplex iteration limit".into()));
            }
            let enter = (0..allowed_cols).find(|&j| self.rows[m][j] < -EPS);
            let Some(col) = enter else {
                return Ok(());
            };
            // Leaving row: minimum ratio, ties broken toward the smallest
            // basis index (anti-cycling).
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.rows[i][col];
                if a > EPS {
                    let ratio = self.rows[i][width - 1] / a;
                    match best {
                        None => best = Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - EPS
                                || (ratio < br + EPS && self.basis[i] < self.basis[bi])
                            {
                                best = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = best else {
                return Err(Error::Solver("unbounded".into()));
            };
            self.pivot(row, col);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_simple_le_program() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6
        let mut lp = Lp::new(2, vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 2.0], Sense::Le, 4.0);
        lp.add_row(vec![3.0, 1.0], Sense::Le, 6.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 2.8).abs() < 1e-9);
        assert!((sol.x[0] - 1.6).abs() < 1e-9);
        assert!((sol.x[1] - 1.2).abs() < 1e-9);
    }

    #[test]
    fn handles_equalities_and_ge() {
        // max 2x + 3y s.t. x + y = 4, x >= 1, y <= 2 -> x = 2, y = 2.
        let mut lp = Lp::new(2, vec![2.0, 3.0]);
        lp.add_row(vec![1.0, 1.0], Sense::Eq, 4.0);
        lp.add_row(vec![1.0, 0.0], Sense::Ge, 1.0);
        lp.add_row(vec![0.0, 1.0], Sense::Le, 2.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 10.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reports_infeasible() {
        let mut lp = Lp::new(1, vec![1.0]);
        lp.add_row(vec![1.0], Sense::Le, 1.0);
        lp.add_row(vec![1.0], Sense::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(Error::Solver(_))));
    }

    #[test]
    fn reports_unbounded() {
        let mut lp = Lp::new(2, vec![1.0, 0.0]);
        lp.add_row(vec![0.0, 1.0], Sense::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Solver(_))));
    }

    #[test]
    fn negative_rhs_rows_are_normalized() {
        // max -x s.t. -x <= -2  (i.e. x >= 2) -> x = 2.
        let mut lp = Lp::new(1, vec![-1.0]);
        lp.add_row(vec![-1.0], Sense::Le, -2.0);
        let sol = lp.solve().unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        let mut lp = Lp::new(2, vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 0.0], Sense::Le, 1.0);
        lp.add_row(vec![0.0, 1.0], Sense::Le, 1.0);
        lp.add_row(vec![1.0, 1.0], Sense::Le, 2.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn equality_only_program() {
        // Feasibility-style system: max t s.t. x1 + x2 = 1, x1 - x2 - t = 0.
        let mut lp = Lp::new(3, vec![0.0, 0.0, 1.0]);
        lp.add_row(vec![1.0, 1.0, 0.0], Sense::Eq, 1.0);
        lp.add_row(vec![1.0, -1.0, -1.0], Sense::Eq, 0.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = Lp::new(2, vec![1.0, 0.0]);
        lp.add_row(vec![1.0, 1.0], Sense::Eq, 1.0);
        lp.add_row(vec![2.0, 2.0], Sense::Eq, 2.0);
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }
}
