//! Dense bounded-variable primal simplex for the small dispatch LPs.
//!
//! Problems have the shape
//!
//! ```text
//! min  c'x
//! s.t. lower <= x <= upper            (finite box)
//!      row_lo <= A x <= row_hi        (two-sided rows, either side may be infinite)
//!      e'x = target                   (optional single equality)
//! ```
//!
//! Two-sided rows are split into one-sided `<=` rows with non-negative slacks.
//! Phase one minimises the sum of artificials; phase two the real cost.
//! Pricing is Dantzig's rule, switching to Bland's rule after a run of
//! degenerate pivots. The final basis is re-factorised to clean up the
//! primal values and to read off the duals.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::Network;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (residual infeasibility {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("numerical failure in simplex: {0}")]
    NumericalFailure(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowConstraint {
    pub coeffs: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EqualityRow {
    pub coeffs: Vec<f64>,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<RowConstraint>,
    pub eq_row: Option<EqualityRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multiplier of the equality row, i.e. d(objective)/d(target).
    pub eq_dual: Option<f64>,
    /// Multiplier of each two-sided row (non-positive when the upper side
    /// binds, non-negative when the lower side binds).
    pub row_duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    m: usize,
    n_cols: usize,
    /// B^-1 A, row-major m x n_cols
    body: Vec<f64>,
    /// values of the basic variables
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// reduced costs for the current phase
    reduced: Vec<f64>,
    iterations: usize,
}

/// Row of the internal standard form: `coeffs . x + slack = rhs`.
struct StdRow {
    coeffs: Vec<f64>,
    rhs: f64,
    has_slack: bool,
    /// index of the originating two-sided row, and +1/-1 for upper/lower side
    origin: Option<(usize, f64)>,
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    validate(problem)?;
    let n = problem.cost.len();

    let mut std_rows = Vec::new();
    for (index, row) in problem.rows.iter().enumerate() {
        // Rows that can never bind inside the box are dropped.
        let (act_lo, act_hi) = activity_range(&row.coeffs, &problem.lower, &problem.upper);
        let scale = 1.0 + act_lo.abs().max(act_hi.abs());
        if act_hi - act_lo <= 1e-14 * scale {
            if act_hi < row.lower - FEAS_TOL * scale || act_lo > row.upper + FEAS_TOL * scale {
                return Err(LpError::Infeasible((row.lower - act_hi).max(act_lo - row.upper)));
            }
            continue;
        }
        if row.upper.is_finite() && act_hi > row.upper {
            std_rows.push(StdRow {
                coeffs: row.coeffs.clone(),
                rhs: row.upper,
                has_slack: true,
                origin: Some((index, 1.0)),
            });
        }
        if row.lower.is_finite() && act_lo < row.lower {
            std_rows.push(StdRow {
                coeffs: row.coeffs.iter().map(|a| -a).collect(),
                rhs: -row.lower,
                has_slack: true,
                origin: Some((index, -1.0)),
            });
        }
    }
    let eq_index = problem.eq_row.as_ref().map(|eq| {
        std_rows.push(StdRow {
            coeffs: eq.coeffs.clone(),
            rhs: eq.target,
            has_slack: false,
            origin: None,
        });
        std_rows.len() - 1
    });

    let m = std_rows.len();
    if m == 0 {
        // Pure box problem: every variable sits at its cheaper bound.
        let x: Vec<f64> = (0..n)
            .map(|j| {
                if problem.cost[j] < 0.0 {
                    problem.upper[j]
                } else {
                    problem.lower[j]
                }
            })
            .collect();
        let objective = dot(&problem.cost, &x);
        return Ok(LpSolution {
            x,
            objective,
            eq_dual: None,
            row_duals: vec![0.0; problem.rows.len()],
            iterations: 0,
        });
    }

    // Column layout: structural | slacks | artificials
    let n_slack = std_rows.iter().filter(|r| r.has_slack).count();
    let residuals: Vec<f64> = std_rows
        .iter()
        .map(|r| r.rhs - dot(&r.coeffs, &problem.lower))
        .collect();
    let needs_art: Vec<bool> = std_rows
        .iter()
        .zip(&residuals)
        .map(|(r, &res)| !r.has_slack || res < 0.0)
        .collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let n_cols = n + n_slack + n_art;

    let mut columns = DMatrix::<f64>::zeros(m, n_cols);
    let mut lo = problem.lower.clone();
    let mut hi = problem.upper.clone();
    lo.resize(n_cols, 0.0);
    hi.resize(n_cols, f64::INFINITY);
    let mut basis = vec![usize::MAX; m];
    let mut slack_col = n;
    let mut art_col = n + n_slack;
    let mut slack_of_row = vec![None; m];
    for (i, row) in std_rows.iter().enumerate() {
        for (j, &a) in row.coeffs.iter().enumerate() {
            columns[(i, j)] = a;
        }
        if row.has_slack {
            columns[(i, slack_col)] = 1.0;
            slack_of_row[i] = Some(slack_col);
            slack_col += 1;
        }
        if needs_art[i] {
            columns[(i, art_col)] = if residuals[i] >= 0.0 { 1.0 } else { -1.0 };
            basis[i] = art_col;
            art_col += 1;
        } else {
            basis[i] = slack_of_row[i].expect("row without artificial has a slack");
        }
    }

    let mut state = vec![VarState::AtLower; n_cols];
    for &b in &basis {
        state[b] = VarState::Basic;
    }
    // The initial basis is a signed identity, so B^-1 A is a row-scaled copy.
    let mut body = vec![0.0; m * n_cols];
    let mut beta = vec![0.0; m];
    for i in 0..m {
        let sign = columns[(i, basis[i])];
        for j in 0..n_cols {
            body[i * n_cols + j] = columns[(i, j)] * sign;
        }
        beta[i] = residuals[i] * sign;
    }

    let mut tab = Tableau {
        m,
        n_cols,
        body,
        beta,
        basis,
        state,
        lo,
        hi,
        reduced: vec![0.0; n_cols],
        iterations: 0,
    };
    let max_iter = 50 * (m + n_cols) + 1000;

    // Phase one.
    if n_art > 0 {
        let mut phase1_cost = vec![0.0; n_cols];
        for c in phase1_cost.iter_mut().skip(n + n_slack) {
            *c = 1.0;
        }
        tab.price(&phase1_cost);
        tab.run(max_iter)?;
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n + n_slack)
            .map(|i| tab.beta[i])
            .sum();
        let scale = 1.0 + residuals.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
        if infeasibility > FEAS_TOL * scale {
            return Err(LpError::Infeasible(infeasibility));
        }
        // Artificials are pinned to zero for phase two.
        for j in n + n_slack..n_cols {
            tab.hi[j] = 0.0;
            if tab.state[j] == VarState::AtUpper {
                tab.state[j] = VarState::AtLower;
            }
        }
    }

    let mut cost = problem.cost.clone();
    cost.resize(n_cols, 0.0);
    tab.price(&cost);
    tab.run(max_iter)?;

    // Re-factorise the final basis for clean primal and dual values.
    let basis_matrix = DMatrix::from_fn(m, m, |i, k| columns[(i, tab.basis[k])]);
    let lu = basis_matrix.clone().lu();
    let mut x_full = vec![0.0; n_cols];
    for j in 0..n_cols {
        x_full[j] = match tab.state[j] {
            VarState::AtLower => tab.lo[j],
            VarState::AtUpper => tab.hi[j],
            VarState::Basic => 0.0,
        };
    }
    let mut rhs = DVector::from_iterator(m, std_rows.iter().map(|r| r.rhs));
    for j in 0..n_cols {
        if tab.state[j] != VarState::Basic && x_full[j] != 0.0 {
            for i in 0..m {
                rhs[i] -= columns[(i, j)] * x_full[j];
            }
        }
    }
    let x_basic = lu
        .solve(&rhs)
        .ok_or_else(|| LpError::NumericalFailure("singular final basis".into()))?;
    for (k, &b) in tab.basis.iter().enumerate() {
        let refined = x_basic[k];
        if (refined - tab.beta[k]).abs() > 1e-6 * (1.0 + refined.abs()) {
            return Err(LpError::NumericalFailure(format!(
                "basis refinement drifted by {:.3e}",
                (refined - tab.beta[k]).abs()
            )));
        }
        // Snap round-off back onto the bounds.
        let (lo, hi) = (tab.lo[b], tab.hi[b]);
        let mut v = refined;
        if (v - lo).abs() <= 1e-11 * (1.0 + lo.abs()) {
            v = lo;
        }
        if hi.is_finite() && (v - hi).abs() <= 1e-11 * (1.0 + hi.abs()) {
            v = hi;
        }
        x_full[b] = v;
    }
    let c_basic = DVector::from_iterator(m, tab.basis.iter().map(|&b| cost[b]));
    let y = basis_matrix
        .transpose()
        .lu()
        .solve(&c_basic)
        .ok_or_else(|| LpError::NumericalFailure("singular dual system".into()))?;

    let x: Vec<f64> = x_full[..n].to_vec();
    let objective = dot(&problem.cost, &x);
    let mut row_duals = vec![0.0; problem.rows.len()];
    for (i, row) in std_rows.iter().enumerate() {
        if let Some((orig, sign)) = row.origin {
            row_duals[orig] += sign * y[i];
        }
    }
    Ok(LpSolution {
        x,
        objective,
        eq_dual: eq_index.map(|i| y[i]),
        row_duals,
        iterations: tab.iterations,
    })
}

impl Tableau {
    fn col(&self, i: usize, j: usize) -> f64 {
        self.body[i * self.n_cols + j]
    }

    fn price(&mut self, cost: &[f64]) {
        for j in 0..self.n_cols {
            let mut d = cost[j];
            for i in 0..self.m {
                d -= cost[self.basis[i]] * self.col(i, j);
            }
            self.reduced[j] = d;
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    fn entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n_cols {
            if self.hi[j] - self.lo[j] <= 0.0 {
                continue;
            }
            let d = self.reduced[j];
            let dir = match self.state[j] {
                VarState::AtLower if d < -OPT_TOL => 1.0,
                VarState::AtUpper if d > OPT_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(k, _)| d.abs() > self.reduced[k].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, max_iter: usize) -> Result<(), LpError> {
        let mut degenerate_run = 0;
        loop {
            if self.iterations >= max_iter {
                return Err(LpError::NumericalFailure("iteration limit reached".into()));
            }
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let Some((enter, dir)) = self.entering(bland) else {
                return Ok(());
            };
            self.iterations += 1;

            // Ratio test. `rate` is d(beta_i)/d(theta).
            let mut step = self.hi[enter] - self.lo[enter];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_pivot = 0.0_f64;
            for i in 0..self.m {
                let alpha = self.col(i, enter);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * alpha;
                let b = self.basis[i];
                let (limit, to_upper) = if rate < 0.0 {
                    (((self.beta[i] - self.lo[b]) / -rate).max(0.0), false)
                } else if self.hi[b].is_finite() {
                    (((self.hi[b] - self.beta[i]) / rate).max(0.0), true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < step,
                    Some((k, _)) => {
                        if limit < step - 1e-12 {
                            true
                        } else if limit <= step + 1e-12 {
                            if bland {
                                b < self.basis[k]
                            } else {
                                alpha.abs() > leave_pivot
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = limit;
                    leave = Some((i, to_upper));
                    leave_pivot = alpha.abs();
                }
            }
            if !step.is_finite() {
                return Err(LpError::Unbounded);
            }
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            for i in 0..self.m {
                let alpha = self.col(i, enter);
                if alpha != 0.0 {
                    self.beta[i] -= dir * step * alpha;
                }
            }
            let entering_value = match self.state[enter] {
                VarState::AtLower => self.lo[enter] + step,
                _ => self.hi[enter] - step,
            };

            match leave {
                None => {
                    // Bound flip, basis unchanged.
                    self.state[enter] = match self.state[enter] {
                        VarState::AtLower => VarState::AtUpper,
                        _ => VarState::AtLower,
                    };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.state[out] = if to_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.pivot(r, enter);
                    self.beta[r] = entering_value;
                    self.basis[r] = enter;
                    self.state[enter] = VarState::Basic;
                    self.reduced[enter] = 0.0;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, enter: usize) {
        let n_cols = self.n_cols;
        let piv = self.body[r * n_cols + enter];
        for j in 0..n_cols {
            self.body[r * n_cols + j] /= piv;
        }
        let (before, rest) = self.body.split_at_mut(r * n_cols);
        let (pivot_row, after) = rest.split_at_mut(n_cols);
        for row in before
            .chunks_exact_mut(n_cols)
            .chain(after.chunks_exact_mut(n_cols))
        {
            let factor = row[enter];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= factor * p;
                }
                row[enter] = 0.0;
            }
        }
        let factor = self.reduced[enter];
        if factor != 0.0 {
            for (v, p) in self.reduced.iter_mut().zip(pivot_row.iter()) {
                *v -= factor * p;
            }
        }
    }
}

fn validate(problem: &LpProblem) -> Result<(), LpError> {
    let n = problem.cost.len();
    if problem.lower.len() != n || problem.upper.len() != n {
        return Err(LpError::DimensionMismatch(format!(
            "{} costs but {} lower / {} upper bounds",
            n,
            problem.lower.len(),
            problem.upper.len()
        )));
    }
    for j in 0..n {
        let (l, u) = (problem.lower[j], problem.upper[j]);
        if !l.is_finite() || !u.is_finite() {
            return Err(LpError::InvalidBounds(format!("variable {j} has an infinite bound")));
        }
        if l > u {
            return Err(LpError::InvalidBounds(format!("variable {j}: lower {l} > upper {u}")));
        }
        if !problem.cost[j].is_finite() {
            return Err(LpError::InvalidBounds(format!("variable {j} has non-finite cost")));
        }
    }
    for (i, row) in problem.rows.iter().enumerate() {
        if row.coeffs.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "row {i} has {} coefficients, expected {n}",
                row.coeffs.len()
            )));
        }
        if row.lower > row.upper || row.lower.is_nan() || row.upper.is_nan() {
            return Err(LpError::InvalidBounds(format!("row {i}: lower > upper")));
        }
    }
    if let Some(eq) = &problem.eq_row {
        if eq.coeffs.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "equality row has {} coefficients, expected {n}",
                eq.coeffs.len()
            )));
        }
        if !eq.target.is_finite() {
            return Err(LpError::InvalidBounds("equality target is not finite".into()));
        }
    }
    Ok(())
}

fn activity_range(coeffs: &[f64], lower: &[f64], upper: &[f64]) -> (f64, f64) {
    coeffs
        .iter()
        .zip(lower.iter().zip(upper))
        .fold((0.0, 0.0), |(lo, hi), (&a, (&l, &u))| {
            if a >= 0.0 {
                (lo + a * l, hi + a * u)
            } else {
                (lo + a * u, hi + a * l)
            }
        })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dispatch LP for a network: generator boxes `[0, B_i]`, line limits
/// `-b <= Hg g - Hd d <= b`, and optionally `sum g = target`.
pub fn dispatch_problem(
    net: &Network,
    nodal_demand: &[f64],
    cost: Vec<f64>,
    target: Option<f64>,
) -> LpProblem {
    let n = net.n_generators();
    let hg = net.hg();
    let hd = net.hd();
    let rows = net
        .lines()
        .iter()
        .enumerate()
        .map(|(l, line)| {
            let load_flow: f64 = (0..net.n_loads()).map(|j| hd[(l, j)] * nodal_demand[j]).sum();
            RowConstraint {
                coeffs: (0..n).map(|i| hg[(l, i)]).collect(),
                lower: -line.capacity + load_flow,
                upper: line.capacity + load_flow,
            }
        })
        .collect();
    LpProblem {
        cost,
        lower: vec![0.0; n],
        upper: net.generators().iter().map(|g| g.capacity).collect(),
        rows,
        eq_row: target.map(|t| EqualityRow {
            coeffs: vec![1.0; n],
            target: t,
        }),
    }
}

/// Minimum-cost dispatch meeting a total generation of exactly `total`.
pub fn solve_dispatch(net: &Network, nodal_demand: &[f64], total: f64) -> Result<LpSolution, LpError> {
    check_demand_len(net, nodal_demand)?;
    let cost = net.generators().iter().map(|g| g.marginal_cost).collect();
    solve(&dispatch_problem(net, nodal_demand, cost, Some(total)))
}

/// Smallest and largest total generation compatible with the generator
/// boxes and line limits.
pub fn feasible_range(net: &Network, nodal_demand: &[f64]) -> Result<(f64, f64), LpError> {
    check_demand_len(net, nodal_demand)?;
    let n = net.n_generators();
    let min = solve(&dispatch_problem(net, nodal_demand, vec![1.0; n], None))?;
    let max = solve(&dispatch_problem(net, nodal_demand, vec![-1.0; n], None))?;
    let g_min = min.objective;
    let g_max = -max.objective;
    Ok((g_min, g_max.max(g_min)))
}

fn check_demand_len(net: &Network, nodal_demand: &[f64]) -> Result<(), LpError> {
    if nodal_demand.len() != net.n_loads() {
        return Err(LpError::DimensionMismatch(format!(
            "nodal demand has {} entries, network has {} loads",
            nodal_demand.len(),
            net.n_loads()
        )));
    }
    Ok(())
}
