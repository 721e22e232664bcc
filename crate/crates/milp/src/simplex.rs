//! Dense bounded-variable two-phase simplex.
//!
//! Every constraint row gets a slack column (`<=` rows a nonnegative slack,
//! `>=` rows a nonpositive one, `=` rows a slack fixed to zero); rows whose
//! initial residual cannot be absorbed by the slack get an artificial column
//! driven out in phase 1. Nonbasic variables rest on one of their bounds, so
//! iterations either pivot or flip a variable across its range.

use crate::model::{LinearModel, Relation};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct LpResult<S> {
    pub status: LpStatus,
    /// Values of the structural variables (model order); empty unless optimal.
    pub values: Vec<S>,
    pub objective: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    FreeZero,
}

struct Tableau<S> {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` matrix, kept equal to `B^-1 * A`.
    t: Vec<S>,
    lo: Vec<S>,
    hi: Vec<S>,
    xval: Vec<S>,
    state: Vec<VarState>,
    basis: Vec<usize>,
}

impl<S: Scalar> Tableau<S> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> S {
        self.t[r * self.cols + c]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + q];
        let inv = S::one() / piv;
        for c in 0..cols {
            self.t[r * cols + c] = self.t[r * cols + c] * inv;
        }
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + q];
            if f == S::zero() {
                continue;
            }
            for c in 0..cols {
                let v = self.t[r * cols + c];
                self.t[i * cols + c] = self.t[i * cols + c] - f * v;
            }
        }
    }
}

enum StepOutcome {
    Moved,
    OptimalReached,
    UnboundedRay,
}

/// Runs the simplex loop for the given column costs. Returns the status and
/// leaves the tableau at the final point.
fn run_phase<S: Scalar>(tab: &mut Tableau<S>, costs: &[S], iter_budget: usize) -> LpStatus {
    let rc_tol = S::feas_tol() * S::from_f64(0.1);
    let piv_tol = S::pivot_tol();

    // Reduced cost row: c_j - c_B * T[., j].
    let mut z: Vec<S> = costs.to_vec();
    for i in 0..tab.rows {
        let cb = costs[tab.basis[i]];
        if cb == S::zero() {
            continue;
        }
        for c in 0..tab.cols {
            z[c] = z[c] - cb * tab.at(i, c);
        }
    }

    let bland_after = 200 + 4 * (tab.rows + tab.cols);
    for iter in 0..iter_budget {
        let bland = iter >= bland_after;
        let outcome = step(tab, &mut z, rc_tol, piv_tol, bland);
        match outcome {
            StepOutcome::Moved => {}
            StepOutcome::OptimalReached => return LpStatus::Optimal,
            StepOutcome::UnboundedRay => return LpStatus::Unbounded,
        }
    }
    LpStatus::IterationLimit
}

fn step<S: Scalar>(
    tab: &mut Tableau<S>,
    z: &mut [S],
    rc_tol: S,
    piv_tol: S,
    bland: bool,
) -> StepOutcome {
    // Entering column and direction (+1 leaving a lower bound, -1 an upper).
    let mut enter: Option<(usize, S, S)> = None; // (col, dir, |z|)
    for j in 0..tab.cols {
        let candidate = match tab.state[j] {
            VarState::Basic => None,
            VarState::AtLower => {
                if tab.lo[j] == tab.hi[j] {
                    None // fixed variable, nothing to gain
                } else if z[j] < -rc_tol {
                    Some(S::one())
                } else {
                    None
                }
            }
            VarState::AtUpper => {
                if z[j] > rc_tol {
                    Some(-S::one())
                } else {
                    None
                }
            }
            VarState::FreeZero => {
                if z[j] < -rc_tol {
                    Some(S::one())
                } else if z[j] > rc_tol {
                    Some(-S::one())
                } else {
                    None
                }
            }
        };
        if let Some(dir) = candidate {
            let score = z[j].abs();
            match &enter {
                Some((_, _, best)) if !bland && score <= *best => {}
                Some(_) if bland => {} // keep the smallest improving index
                _ => enter = Some((j, dir, score)),
            }
            if bland {
                break;
            }
        }
    }
    let (q, dir, _) = match enter {
        Some(e) => e,
        None => return StepOutcome::OptimalReached,
    };

    // Ratio test: the entering variable moves by t >= 0 in direction `dir`;
    // basic variable i changes at rate -dir * T[i][q]. Ties on the ratio
    // prefer a larger pivot magnitude for stability, then the smaller basis
    // index; under Bland's rule the smallest basis index wins outright.
    let flip_range = if tab.lo[q].is_finite() && tab.hi[q].is_finite() {
        tab.hi[q] - tab.lo[q]
    } else {
        S::infinity()
    };
    let mut t_best = flip_range;
    let mut leave: Option<(usize, bool, S, usize)> = None; // (row, hits_lower, |coef|, basis col)
    for i in 0..tab.rows {
        let coef = tab.at(i, q);
        let rate = dir * coef;
        let b = tab.basis[i];
        let (ti, hits_lower) = if rate > piv_tol {
            if !tab.lo[b].is_finite() {
                continue;
            }
            let slack = (tab.xval[b] - tab.lo[b]).max(S::zero());
            (slack / rate, true)
        } else if rate < -piv_tol {
            if !tab.hi[b].is_finite() {
                continue;
            }
            let slack = (tab.hi[b] - tab.xval[b]).max(S::zero());
            (slack / (-rate), false)
        } else {
            continue;
        };
        let replaces = if ti < t_best {
            true
        } else if ti > t_best {
            false
        } else {
            match &leave {
                None => true, // a blocking row beats a bound flip of equal length
                Some((_, _, prev_mag, prev_b)) => {
                    if bland {
                        b < *prev_b
                    } else if coef.abs() != *prev_mag {
                        coef.abs() > *prev_mag
                    } else {
                        b < *prev_b
                    }
                }
            }
        };
        if replaces {
            t_best = ti;
            leave = Some((i, hits_lower, coef.abs(), b));
        }
    }

    if !t_best.is_finite() {
        return StepOutcome::UnboundedRay;
    }

    match leave {
        None => {
            // Bound flip: the entering variable crosses to its other bound.
            for i in 0..tab.rows {
                let coef = tab.at(i, q);
                if coef != S::zero() {
                    let b = tab.basis[i];
                    tab.xval[b] = tab.xval[b] - dir * coef * t_best;
                }
            }
            match tab.state[q] {
                VarState::AtLower => {
                    tab.xval[q] = tab.hi[q];
                    tab.state[q] = VarState::AtUpper;
                }
                VarState::AtUpper => {
                    tab.xval[q] = tab.lo[q];
                    tab.state[q] = VarState::AtLower;
                }
                _ => unreachable!("flip from a non-bound state"),
            }
            StepOutcome::Moved
        }
        Some((r, hits_lower, _, _)) => {
            for i in 0..tab.rows {
                if i == r {
                    continue;
                }
                let coef = tab.at(i, q);
                if coef != S::zero() {
                    let b = tab.basis[i];
                    tab.xval[b] = tab.xval[b] - dir * coef * t_best;
                }
            }
            let leaving = tab.basis[r];
            tab.xval[leaving] = if hits_lower {
                tab.lo[leaving]
            } else {
                tab.hi[leaving]
            };
            tab.state[leaving] = if hits_lower {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            tab.xval[q] = tab.xval[q] + dir * t_best;
            tab.state[q] = VarState::Basic;

            tab.pivot(r, q);
            let f = z[q];
            if f != S::zero() {
                for c in 0..tab.cols {
                    z[c] = z[c] - f * tab.at(r, c);
                }
            }
            tab.basis[r] = q;
            StepOutcome::Moved
        }
    }
}

/// Solves the LP relaxation of `model` (integrality ignored), minimizing or
/// maximizing per the model sense.
pub(crate) fn solve_lp<S: Scalar>(model: &LinearModel<S>) -> LpResult<S> {
    let n = model.vars.len();
    let m = model.cons.len();

    // Internal sense is minimize.
    let negate = matches!(model.sense, crate::model::Sense::Maximize);
    let mut obj = vec![S::zero(); n];
    for &(j, c) in &model.objective {
        obj[j] = obj[j] + if negate { -c } else { c };
    }

    // Initial nonbasic values for structural variables.
    let mut xbar = vec![S::zero(); n];
    for (j, v) in model.vars.iter().enumerate() {
        xbar[j] = if v.lo.is_finite() {
            v.lo
        } else if v.hi.is_finite() {
            v.hi
        } else {
            S::zero()
        };
    }

    // Slack bounds per relation and initial residuals.
    let mut slack_lo = vec![S::zero(); m];
    let mut slack_hi = vec![S::zero(); m];
    let mut resid = vec![S::zero(); m];
    let mut art_rows: Vec<(usize, S)> = Vec::new(); // (row, sign)
    let mut slack_val = vec![S::zero(); m];
    let mut slack_basic = vec![false; m];
    for (i, con) in model.cons.iter().enumerate() {
        match con.rel {
            Relation::Le => {
                slack_lo[i] = S::zero();
                slack_hi[i] = S::infinity();
            }
            Relation::Ge => {
                slack_lo[i] = S::neg_infinity();
                slack_hi[i] = S::zero();
            }
            Relation::Eq => {
                slack_lo[i] = S::zero();
                slack_hi[i] = S::zero();
            }
        }
        let mut r = con.rhs;
        for &(j, a) in &con.terms {
            r = r - a * xbar[j];
        }
        resid[i] = r;
        let clamped = r.max(slack_lo[i]).min(slack_hi[i]);
        if (r - clamped).abs() > S::pivot_tol() {
            slack_val[i] = clamped;
            let sign = if r - clamped > S::zero() {
                S::one()
            } else {
                -S::one()
            };
            art_rows.push((i, sign));
        } else {
            slack_val[i] = r;
            slack_basic[i] = true;
        }
    }

    let n_art = art_rows.len();
    let cols = n + m + n_art;
    let mut tab = Tableau {
        rows: m,
        cols,
        t: vec![S::zero(); m * cols],
        lo: vec![S::zero(); cols],
        hi: vec![S::zero(); cols],
        xval: vec![S::zero(); cols],
        state: vec![VarState::AtLower; cols],
        basis: vec![0; m],
    };

    for (j, v) in model.vars.iter().enumerate() {
        tab.lo[j] = v.lo;
        tab.hi[j] = v.hi;
        tab.xval[j] = xbar[j];
        tab.state[j] = if v.lo.is_finite() {
            VarState::AtLower
        } else if v.hi.is_finite() {
            VarState::AtUpper
        } else {
            VarState::FreeZero
        };
    }
    for i in 0..m {
        let sj = n + i;
        tab.lo[sj] = slack_lo[i];
        tab.hi[sj] = slack_hi[i];
        tab.xval[sj] = slack_val[i];
        tab.state[sj] = if slack_basic[i] {
            VarState::Basic
        } else if slack_val[i] == slack_lo[i] {
            VarState::AtLower
        } else {
            VarState::AtUpper
        };
        if slack_basic[i] {
            tab.basis[i] = sj;
        }
    }
    for (k, &(row, sign)) in art_rows.iter().enumerate() {
        let aj = n + m + k;
        tab.lo[aj] = S::zero();
        tab.hi[aj] = S::infinity();
        tab.xval[aj] = (resid[row] - slack_val[row]) * sign; // = |residual|
        tab.state[aj] = VarState::Basic;
        tab.basis[row] = aj;
    }

    // Fill the coefficient matrix (structural + slack identity + artificials).
    for (i, con) in model.cons.iter().enumerate() {
        for &(j, a) in &con.terms {
            tab.t[i * cols + j] = tab.t[i * cols + j] + a;
        }
        tab.t[i * cols + n + i] = S::one();
    }
    for (k, &(row, sign)) in art_rows.iter().enumerate() {
        tab.t[row * cols + n + m + k] = sign;
    }
    // Normalize rows whose basic (artificial) column is -1.
    for &(row, sign) in &art_rows {
        if sign < S::zero() {
            for c in 0..cols {
                tab.t[row * cols + c] = -tab.t[row * cols + c];
            }
        }
    }

    let iter_budget = 20_000 + 50 * (m + cols);

    if n_art > 0 {
        let mut phase1_cost = vec![S::zero(); cols];
        for k in 0..n_art {
            phase1_cost[n + m + k] = S::one();
        }
        let status = run_phase(&mut tab, &phase1_cost, iter_budget);
        if status == LpStatus::IterationLimit {
            return LpResult {
                status,
                values: Vec::new(),
                objective: S::zero(),
            };
        }
        let infeas: S = (0..n_art).fold(S::zero(), |acc, k| acc + tab.xval[n + m + k]);
        if infeas > S::feas_tol() {
            return LpResult {
                status: LpStatus::Infeasible,
                values: Vec::new(),
                objective: S::zero(),
            };
        }
        // Lock artificials at zero for phase 2.
        for k in 0..n_art {
            let aj = n + m + k;
            tab.hi[aj] = S::zero();
            tab.xval[aj] = S::zero();
        }
    }

    let mut phase2_cost = vec![S::zero(); cols];
    phase2_cost[..n].copy_from_slice(&obj);
    let status = run_phase(&mut tab, &phase2_cost, iter_budget);
    match status {
        LpStatus::Optimal => {
            let values: Vec<S> = tab.xval[..n].to_vec();
            let raw = model.objective_value(&values);
            LpResult {
                status: LpStatus::Optimal,
                values,
                objective: raw,
            }
        }
        other => LpResult {
            status: other,
            values: Vec::new(),
            objective: S::zero(),
        },
    }
}
