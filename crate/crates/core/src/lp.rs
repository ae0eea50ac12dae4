//! A small dense-simplex linear programming facility.
//!
//! Every stage-game and bound computation in this crate reduces to an LP with
//! at most a few thousand variables, so a self-contained dense solver keeps
//! the whole pipeline reproducible. The solver is deterministic: identical
//! inputs produce bit-identical assignments on one platform. The pivoting
//! policy is Dantzig's rule with lowest-index tie-breaking, falling back to
//! Bland's rule permanently once the objective stalls, which guarantees
//! termination.
//!
//! The solver contract is pluggable via [`LpSolver`] so an external solver can
//! be swapped in behind the same interface.

use thiserror::Error;

/// Repo-wide feasibility tolerance: a solution may violate constraints by at
/// most this much.
pub const FEAS_TOL: f64 = 1e-7;
/// Repo-wide relative optimality tolerance.
pub const OPT_TOL: f64 = 1e-7;

/// Numerical zero for pivot eligibility.
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

/// Variable index returned by [`LinearProgram::add_var`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone)]
struct VarDef {
    /// `true` for a lower bound of 0, `false` for a free variable.
    nonneg: bool,
    upper: Option<f64>,
    obj: f64,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rel: Rel,
    rhs: f64,
}

/// A linear program over variables with lower bound 0 or none, optional upper
/// bounds, and sparse constraint rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    sense: Sense,
    vars: Vec<VarDef>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. `values` is meaningful only when `status == Optimal`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("LP numerical failure: {0}")]
    Numerical(String),
}

/// Pluggable solver contract.
pub trait LpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError>;
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Adds a variable. `nonneg` selects a lower bound of 0 (otherwise the
    /// variable is free); `upper` adds an optional upper bound.
    pub fn add_var(&mut self, nonneg: bool, upper: Option<f64>, obj: f64) -> VarId {
        assert!(obj.is_finite(), "objective coefficient must be finite");
        if let Some(u) = upper {
            assert!(u.is_finite(), "upper bound must be finite");
        }
        self.vars.push(VarDef { nonneg, upper, obj });
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(VarId, f64)>, rel: Rel, rhs: f64) {
        assert!(rhs.is_finite(), "rhs must be finite");
        let coeffs: Vec<(usize, f64)> = coeffs
            .into_iter()
            .map(|(v, c)| {
                assert!(v.0 < self.vars.len(), "constraint references undeclared variable");
                assert!(c.is_finite(), "constraint coefficient must be finite");
                (v.0, c)
            })
            .collect();
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Solves with the default dense simplex.
    pub fn solve(&self) -> Result<LpSolution, LpError> {
        DenseSimplex.solve(self)
    }

    /// Renders the program in LP-format-style plain text for debugging.
    pub fn to_lp_format(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{}",
            match self.sense {
                Sense::Maximize => "Maximize",
                Sense::Minimize => "Minimize",
            }
        );
        let mut obj = String::from(" obj:");
        for (i, v) in self.vars.iter().enumerate() {
            if v.obj != 0.0 {
                let _ = write!(obj, " {:+} x{}", v.obj, i);
            }
        }
        let _ = writeln!(s, "{obj}");
        let _ = writeln!(s, "Subject To");
        for (k, row) in self.rows.iter().enumerate() {
            let mut line = format!(" c{k}:");
            for &(i, c) in &row.coeffs {
                let _ = write!(line, " {c:+} x{i}");
            }
            let rel = match row.rel {
                Rel::Le => "<=",
                Rel::Ge => ">=",
                Rel::Eq => "=",
            };
            let _ = writeln!(s, "{line} {rel} {}", row.rhs);
        }
        let _ = writeln!(s, "Bounds");
        for (i, v) in self.vars.iter().enumerate() {
            let lo = if v.nonneg { "0".to_string() } else { "-inf".to_string() };
            let hi = v.upper.map_or("+inf".to_string(), |u| format!("{u}"));
            let _ = writeln!(s, " {lo} <= x{i} <= {hi}");
        }
        let _ = writeln!(s, "End");
        s
    }
}

/// The in-repo dense two-phase simplex.
pub struct DenseSimplex;

impl LpSolver for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        dump_if_requested(lp);
        Tableau::build(lp).solve(lp)
    }
}

/// When `OSP_LP_DUMP` names a directory, every solved program is written
/// there as numbered LP-format text files.
fn dump_if_requested(lp: &LinearProgram) {
    use std::sync::atomic::{AtomicU64, Ordering};
    use std::sync::OnceLock;
    static DIR: OnceLock<Option<std::path::PathBuf>> = OnceLock::new();
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let Some(dir) = DIR.get_or_init(|| std::env::var_os("OSP_LP_DUMP").map(Into::into)) else {
        return;
    };
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let path = dir.join(format!("lp-{n:06}.lp"));
    let _ = std::fs::create_dir_all(dir);
    let _ = std::fs::write(path, lp.to_lp_format());
}

/// Standard-form tableau: maximize c'x subject to Ax = b, x >= 0, with free
/// variables split into positive and negative parts and upper bounds turned
/// into explicit rows.
struct Tableau {
    ncols: usize,
    nrows: usize,
    /// `a` is row-major, `nrows x ncols`.
    a: Vec<f64>,
    b: Vec<f64>,
    obj: Vec<f64>,
    /// For each original variable, (column of positive part, column of
    /// negative part or usize::MAX).
    var_cols: Vec<(usize, usize)>,
    n_struct: usize,
    art_start: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        // Column layout: structural columns (split free vars), then one
        // slack/surplus per inequality row, then artificials appended later.
        let mut var_cols = Vec::with_capacity(lp.vars.len());
        let mut n_struct = 0usize;
        for v in &lp.vars {
            if v.nonneg {
                var_cols.push((n_struct, usize::MAX));
                n_struct += 1;
            } else {
                var_cols.push((n_struct, n_struct + 1));
                n_struct += 2;
            }
        }

        let mut rows: Vec<(Vec<(usize, f64)>, Rel, f64)> = Vec::new();
        for row in &lp.rows {
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len() * 2);
            for &(v, c) in &row.coeffs {
                let (pos, neg) = var_cols[v];
                coeffs.push((pos, c));
                if neg != usize::MAX {
                    coeffs.push((neg, -c));
                }
            }
            rows.push((coeffs, row.rel, row.rhs));
        }
        for (v, def) in lp.vars.iter().enumerate() {
            if let Some(u) = def.upper {
                let (pos, neg) = var_cols[v];
                let mut coeffs = vec![(pos, 1.0)];
                if neg != usize::MAX {
                    coeffs.push((neg, -1.0));
                }
                rows.push((coeffs, Rel::Le, u));
            }
        }

        let nrows = rows.len();
        let nslack = rows
            .iter()
            .filter(|(_, rel, _)| !matches!(rel, Rel::Eq))
            .count();
        let ncols = n_struct + nslack;

        let mut a = vec![0.0; nrows * ncols];
        let mut b = vec![0.0; nrows];
        let mut slack = n_struct;
        for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            // Normalize to non-negative rhs so phase 1 starts from a basis.
            let flip = *rhs < 0.0;
            let sgn = if flip { -1.0 } else { 1.0 };
            for &(c, val) in coeffs {
                a[r * ncols + c] += sgn * val;
            }
            b[r] = sgn * rhs;
            let eff_rel = match (rel, flip) {
                (Rel::Eq, _) => Rel::Eq,
                (Rel::Le, false) | (Rel::Ge, true) => Rel::Le,
                (Rel::Ge, false) | (Rel::Le, true) => Rel::Ge,
            };
            match eff_rel {
                Rel::Le => {
                    a[r * ncols + slack] = 1.0;
                    slack += 1;
                }
                Rel::Ge => {
                    a[r * ncols + slack] = -1.0;
                    slack += 1;
                }
                Rel::Eq => {}
            }
        }

        let mut obj = vec![0.0; ncols];
        let sgn = match lp.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        for (v, def) in lp.vars.iter().enumerate() {
            let (pos, neg) = var_cols[v];
            obj[pos] += sgn * def.obj;
            if neg != usize::MAX {
                obj[neg] -= sgn * def.obj;
            }
        }

        Tableau {
            ncols,
            nrows,
            a,
            b,
            obj,
            var_cols,
            n_struct,
            art_start: ncols,
        }
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let nrows = self.nrows;

        // Phase 1: a basis of slacks where rows already have a +1 slack,
        // artificials elsewhere.
        let mut basis = vec![usize::MAX; nrows];
        for r in 0..nrows {
            for c in self.n_struct..self.ncols {
                if self.a[r * self.ncols + c] == 1.0 {
                    basis[r] = c;
                    break;
                }
            }
        }
        let n_art = basis.iter().filter(|&&c| c == usize::MAX).count();
        let total_cols = self.ncols + n_art;
        let mut a = vec![0.0; nrows * total_cols];
        for r in 0..nrows {
            a[r * total_cols..r * total_cols + self.ncols]
                .copy_from_slice(&self.a[r * self.ncols..(r + 1) * self.ncols]);
        }
        let mut next_art = self.ncols;
        for r in 0..nrows {
            if basis[r] == usize::MAX {
                a[r * total_cols + next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }
        self.a = a;
        self.ncols = total_cols;
        self.obj.resize(total_cols, 0.0);

        // Pristine copy for the post-solve refinement step: pivoting in the
        // updated tableau accumulates rounding drift over long runs.
        let pristine_a = self.a.clone();
        let pristine_b = self.b.clone();

        let mut iterations = 0usize;
        if n_art > 0 {
            // Phase-1 objective: minimize the sum of artificials, expressed as
            // maximize the negated sum.
            let mut p1 = vec![0.0; total_cols];
            for c in self.art_start..total_cols {
                p1[c] = -1.0;
            }
            let status = self.run_simplex(&p1, &mut basis, &mut iterations)?;
            if status == LpStatus::Unbounded {
                return Err(LpError::Numerical("phase 1 unbounded".into()));
            }
            let p1_val: f64 = basis
                .iter()
                .enumerate()
                .filter(|(_, &c)| c >= self.art_start)
                .map(|(r, _)| self.b[r])
                .sum();
            if p1_val > FEAS_TOL {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    objective: 0.0,
                    values: vec![0.0; lp.vars.len()],
                    iterations,
                });
            }
            // Pivot any remaining artificials out of the basis. Rows where no
            // structural column has a nonzero entry are redundant; their
            // zero-valued artificial stays basic and is never priced again.
            let mut scratch_rc = vec![0.0; self.ncols];
            for r in 0..nrows {
                if basis[r] >= self.art_start {
                    for c in 0..self.art_start {
                        if self.a[r * self.ncols + c].abs() > PIVOT_TOL {
                            self.pivot(r, c, &mut basis, &mut scratch_rc);
                            break;
                        }
                    }
                }
            }
        }

        let obj = self.obj.clone();
        let status = self.run_simplex(&obj, &mut basis, &mut iterations)?;
        if status == LpStatus::Unbounded {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                objective: 0.0,
                values: vec![0.0; lp.vars.len()],
                iterations,
            });
        }

        // Read the assignment back through the split columns.
        let extract = |col_val: &[f64]| -> Vec<f64> {
            let mut values = vec![0.0; lp.vars.len()];
            for (v, &(pos, neg)) in self.var_cols.iter().enumerate() {
                let mut x = col_val[pos];
                if neg != usize::MAX {
                    x -= col_val[neg];
                }
                values[v] = x;
            }
            values
        };
        let mut col_val = vec![0.0; self.ncols];
        for r in 0..nrows {
            col_val[basis[r]] = self.b[r];
        }
        let mut values = extract(&col_val);

        // The basis is trustworthy even when the updated right-hand side has
        // drifted; recompute the basic values from pristine data if needed.
        if self.check_feasible(lp, &values).is_err() {
            if let Some(refined) =
                solve_basis_system(&pristine_a, &pristine_b, &basis, self.ncols)
            {
                let mut col_val = vec![0.0; self.ncols];
                for (r, &c) in basis.iter().enumerate() {
                    col_val[c] = refined[r];
                }
                values = extract(&col_val);
            }
        }
        let objective: f64 = lp
            .vars
            .iter()
            .zip(&values)
            .map(|(def, &x)| def.obj * x)
            .sum();

        self.check_feasible(lp, &values)?;

        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective,
            values,
            iterations,
        })
    }

    /// Primal simplex over the current tableau, maximizing `price`.
    /// Artificial columns are never priced back in. The reduced-cost row is
    /// maintained incrementally, so pricing is O(cols) per iteration.
    fn run_simplex(
        &mut self,
        price: &[f64],
        basis: &mut [usize],
        iterations: &mut usize,
    ) -> Result<LpStatus, LpError> {
        let ncols = self.ncols;
        let nrows = self.nrows;
        let mut rc: Vec<f64> = (0..ncols)
            .map(|j| {
                let mut v = price[j];
                for r in 0..nrows {
                    let w = price[basis[r]];
                    if w != 0.0 {
                        v -= w * self.a[r * ncols + j];
                    }
                }
                v
            })
            .collect();
        let mut in_basis = vec![false; ncols];
        for &c in basis.iter() {
            in_basis[c] = true;
            rc[c] = 0.0;
        }

        let mut stalled = 0usize;
        let mut bland = false;
        let max_iter = 400 * (nrows + ncols) + 20_000;
        loop {
            *iterations += 1;
            if *iterations > max_iter {
                return Err(LpError::Numerical(format!(
                    "iteration limit exceeded ({max_iter})"
                )));
            }
            let mut entering = usize::MAX;
            let mut best = PIVOT_TOL;
            for j in 0..self.art_start {
                if in_basis[j] {
                    continue;
                }
                if rc[j] > best {
                    entering = j;
                    if bland {
                        break;
                    }
                    best = rc[j];
                }
            }
            if entering == usize::MAX {
                return Ok(LpStatus::Optimal);
            }
            // Ratio test. Ties prefer the largest pivot element for
            // stability, or the lowest basic variable index in Bland mode.
            let mut leave = usize::MAX;
            let mut best_ratio = f64::INFINITY;
            let mut best_piv = 0.0;
            for r in 0..nrows {
                let arj = self.a[r * ncols + entering];
                if arj > PIVOT_TOL {
                    let ratio = self.b[r] / arj;
                    let tol = 1e-9 * (1.0 + best_ratio.abs().min(1e12));
                    let take = if ratio < best_ratio - tol {
                        true
                    } else if ratio <= best_ratio + tol {
                        if bland {
                            leave != usize::MAX && basis[r] < basis[leave]
                        } else {
                            arj > best_piv
                        }
                    } else {
                        false
                    };
                    if take || leave == usize::MAX {
                        best_ratio = best_ratio.min(ratio);
                        best_piv = arj;
                        leave = r;
                    }
                }
            }
            if leave == usize::MAX {
                return Ok(LpStatus::Unbounded);
            }
            if best_ratio < 1e-12 {
                stalled += 1;
                if stalled > nrows + ncols {
                    bland = true;
                }
            } else {
                stalled = 0;
            }
            in_basis[basis[leave]] = false;
            in_basis[entering] = true;
            self.pivot(leave, entering, basis, &mut rc);
        }
    }

    fn pivot(&mut self, row: usize, col: usize, basis: &mut [usize], rc: &mut [f64]) {
        let ncols = self.ncols;
        let piv = self.a[row * ncols + col];
        let inv = 1.0 / piv;
        for j in 0..ncols {
            self.a[row * ncols + j] *= inv;
        }
        self.b[row] *= inv;
        self.a[row * ncols + col] = 1.0;
        for r in 0..self.nrows {
            if r == row {
                continue;
            }
            let f = self.a[r * ncols + col];
            if f != 0.0 {
                let (head, tail) = self.a.split_at_mut(row * ncols);
                let (prow, rrow);
                if r < row {
                    rrow = &mut head[r * ncols..(r + 1) * ncols];
                    prow = &tail[..ncols];
                } else {
                    let (p, t2) = tail.split_at_mut(ncols);
                    prow = &p[..];
                    rrow = &mut t2[(r - row - 1) * ncols..(r - row) * ncols];
                }
                for j in 0..ncols {
                    rrow[j] -= f * prow[j];
                }
                self.b[r] -= f * self.b[row];
                self.a[r * ncols + col] = 0.0;
            }
        }
        let f = rc[col];
        if f != 0.0 {
            for j in 0..ncols {
                rc[j] -= f * self.a[row * ncols + j];
            }
        }
        rc[col] = 0.0;
        basis[row] = col;
    }

    fn check_feasible(&self, lp: &LinearProgram, values: &[f64]) -> Result<(), LpError> {
        for (v, def) in lp.vars.iter().enumerate() {
            if def.nonneg && values[v] < -1e-9 {
                return Err(LpError::Numerical(format!(
                    "variable x{v} violates its lower bound: {}",
                    values[v]
                )));
            }
            if let Some(u) = def.upper {
                if values[v] > u + 1e-9 {
                    return Err(LpError::Numerical(format!(
                        "variable x{v} violates its upper bound: {}",
                        values[v]
                    )));
                }
            }
        }
        for (k, row) in lp.rows.iter().enumerate() {
            let lhs: f64 = row.coeffs.iter().map(|&(v, c)| c * values[v]).sum();
            let scale = 1.0 + row.rhs.abs() + lhs.abs();
            let ok = match row.rel {
                Rel::Le => lhs <= row.rhs + FEAS_TOL * scale,
                Rel::Ge => lhs >= row.rhs - FEAS_TOL * scale,
                Rel::Eq => (lhs - row.rhs).abs() <= FEAS_TOL * scale,
            };
            if !ok {
                return Err(LpError::Numerical(format!(
                    "constraint c{k} violated: lhs={lhs}, rhs={}",
                    row.rhs
                )));
            }
        }
        Ok(())
    }
}

/// Helper for zero-sum matrix games: value and maximizer strategy of
/// `max_p min_j sum_i p_i m[i][j]`.
pub fn matrix_game_value(m: &[Vec<f64>]) -> Result<(f64, Vec<f64>), LpError> {
    let nrows = m.len();
    assert!(nrows > 0);
    let ncols = m[0].len();
    assert!(ncols > 0);
    let mut lp = LinearProgram::new(Sense::Maximize);
    let v = lp.add_var(false, None, 1.0);
    let ps: Vec<VarId> = (0..nrows).map(|_| lp.add_var(true, None, 0.0)).collect();
    for j in 0..ncols {
        let mut coeffs = vec![(v, 1.0)];
        for i in 0..nrows {
            coeffs.push((ps[i], -m[i][j]));
        }
        lp.add_constraint(coeffs, Rel::Le, 0.0);
    }
    lp.add_constraint(ps.iter().map(|&p| (p, 1.0)).collect(), Rel::Eq, 1.0);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(LpError::Numerical(format!(
            "matrix game LP not optimal: {:?}",
            sol.status
        )));
    }
    let strat = ps.iter().map(|&p| sol.values[p.0].max(0.0)).collect();
    Ok((sol.objective, strat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_x_upper_bounded() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(true, None, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Rel::Le, 3.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.values[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(true, None, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Rel::Le, -1.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(true, None, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Rel::Ge, 1.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn matching_pennies_value_zero() {
        let m = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let (v, p) = matrix_game_value(&m).unwrap();
        assert!(v.abs() < 1e-9);
        assert!((p[0] - 0.5).abs() < 1e-9);
        assert!((p[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y  s.t. x + 2y = 4, x - y >= -5, y free allowed negative
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(true, None, 1.0);
        let y = lp.add_var(false, None, 1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 2.0)], Rel::Eq, 4.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Rel::Ge, -5.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // x = 0, y = 2 gives 2; pushing y higher needs x = 4 - 2y >= 0.
        // Objective along the equality is x + (4 - x)/2 = 2 + x/2, minimized at x = 0
        // until the second constraint binds: x - (4-x)/2 >= -5 -> x >= -2, slack.
        assert!((sol.objective - 2.0).abs() < 1e-7, "objective {}", sol.objective);
    }

    #[test]
    fn upper_bounds_respected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(true, Some(1.5), 2.0);
        let y = lp.add_var(true, Some(2.0), 1.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Rel::Le, 3.0);
        let sol = lp.solve().unwrap();
        assert!((sol.values[0] - 1.5).abs() < 1e-9);
        assert!((sol.values[1] - 1.5).abs() < 1e-9);
        assert!((sol.objective - 4.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic_bit_for_bit() {
        let build = || {
            let mut lp = LinearProgram::new(Sense::Maximize);
            let xs: Vec<_> = (0..6).map(|i| lp.add_var(true, None, 1.0 + 0.1 * i as f64)).collect();
            for j in 0..4 {
                let coeffs = xs
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| (x, ((i * 7 + j * 3) % 5) as f64 + 0.25))
                    .collect();
                lp.add_constraint(coeffs, Rel::Le, 10.0 + j as f64);
            }
            lp
        };
        let a = build().solve().unwrap();
        let b = build().solve().unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    /// Duality spot check: the dual of `max c'x, Ax <= b, x >= 0` is
    /// `min b'y, A'y >= c, y >= 0`, and both optima coincide.
    #[test]
    fn duality_spot_check() {
        let a = [[2.0, 1.0], [1.0, 3.0]];
        let b = [8.0, 9.0];
        let c = [3.0, 4.0];

        let mut primal = LinearProgram::new(Sense::Maximize);
        let xs: Vec<_> = c.iter().map(|&ci| primal.add_var(true, None, ci)).collect();
        for i in 0..2 {
            primal.add_constraint(vec![(xs[0], a[i][0]), (xs[1], a[i][1])], Rel::Le, b[i]);
        }
        let psol = primal.solve().unwrap();

        let mut dual = LinearProgram::new(Sense::Minimize);
        let ys: Vec<_> = b.iter().map(|&bi| dual.add_var(true, None, bi)).collect();
        for j in 0..2 {
            dual.add_constraint(vec![(ys[0], a[0][j]), (ys[1], a[1][j])], Rel::Ge, c[j]);
        }
        let dsol = dual.solve().unwrap();

        assert_eq!(psol.status, LpStatus::Optimal);
        assert_eq!(dsol.status, LpStatus::Optimal);
        assert!(
            (psol.objective - dsol.objective).abs() < 1e-6,
            "primal {} vs dual {}",
            psol.objective,
            dsol.objective
        );
    }

    #[test]
    fn matrix_game_with_dual_side() {
        // Column player's LP on the transposed negated matrix must agree.
        let m = vec![vec![0.0, 2.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]];
        let (v, _) = matrix_game_value(&m).unwrap();
        let mt: Vec<Vec<f64>> = (0..3)
            .map(|j| (0..3).map(|i| -m[i][j]).collect())
            .collect();
        let (w, _) = matrix_game_value(&mt).unwrap();
        assert!((v + w).abs() < 1e-6, "v={v}, w={w}");
        assert!((v - 1.0 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn lp_format_dump_mentions_rows() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(true, Some(2.0), 1.0);
        lp.add_constraint(vec![(x, 1.0)], Rel::Le, 3.0);
        let text = lp.to_lp_format();
        assert!(text.contains("Maximize"));
        assert!(text.contains("c0:"));
        assert!(text.contains("Bounds"));
    }
}
