use crate::model::{LinearModel, Sense, VarKind};
use crate::simplex::{solve_lp, LpStatus};
use crate::Scalar;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

/// Solve termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A time/node/gap limit was hit; the solution carries the best incumbent
    /// found so far (values empty if none).
    Limit,
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution<S> {
    pub status: SolveStatus,
    /// Variable values in model order; empty when no point is available.
    pub values: Vec<S>,
    /// Objective in the model's own sense.
    pub objective: S,
    /// Branch-and-bound nodes explored.
    pub nodes: usize,
}

/// Optional limits for a solve call.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveLimits {
    pub time: Option<Duration>,
    pub gap: Option<f64>,
    pub max_nodes: Option<usize>,
}

struct Node<S> {
    bound: S,
    id: u64,
    /// Bound overrides relative to the root model, applied in order.
    overrides: Vec<(usize, S, S)>,
}

struct NodeKey<S> {
    bound: S,
    id: u64,
}

impl<S: Scalar> PartialEq for NodeKey<S> {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl<S: Scalar> Eq for NodeKey<S> {}
impl<S: Scalar> PartialOrd for NodeKey<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for NodeKey<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest bound pops first,
        // ties broken by the older node id.
        match other.bound.partial_cmp(&self.bound).unwrap_or(Ordering::Equal) {
            Ordering::Equal => other.id.cmp(&self.id),
            ord => ord,
        }
    }
}

/// Solves a mixed-integer linear model.
///
/// The LP relaxation runs through the bounded simplex; fractional integer
/// variables are resolved by best-first branch-and-bound, branching on the
/// most fractional variable (ties to the lowest variable id). Deterministic
/// for a fixed model.
pub fn solve<S: Scalar>(model: &LinearModel<S>, limits: SolveLimits) -> Solution<S> {
    let started = Instant::now();
    let negate = matches!(model.sense, Sense::Maximize);
    let int_vars: Vec<usize> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind != VarKind::Continuous)
        .map(|(j, _)| j)
        .collect();

    let mut work = model.clone();
    let mut nodes_explored = 0usize;
    let mut incumbent: Option<(Vec<S>, S)> = None; // (values, internal min objective)
    let mut heap: BinaryHeap<NodeKey<S>> = BinaryHeap::new();
    let mut store: Vec<Option<Node<S>>> = Vec::new();
    let mut next_id = 0u64;
    let mut hit_limit = false;

    // Root node.
    let root = Node {
        bound: S::neg_infinity(),
        id: next_id,
        overrides: Vec::new(),
    };
    next_id += 1;
    heap.push(NodeKey {
        bound: root.bound,
        id: root.id,
    });
    store.push(Some(root));

    let mut root_infeasible = false;
    let mut root_unbounded = false;

    while let Some(key) = heap.pop() {
        let node = match store[key.id as usize].take() {
            Some(n) => n,
            None => continue,
        };
        if let Some(t) = limits.time {
            if started.elapsed() > t {
                hit_limit = true;
                break;
            }
        }
        if let Some(maxn) = limits.max_nodes {
            if nodes_explored >= maxn {
                hit_limit = true;
                break;
            }
        }
        // Best-first: the popped bound is the global lower bound.
        if let (Some(gap), Some((_, inc_obj))) = (limits.gap, &incumbent) {
            let lb = node.bound.to_f64();
            let ub = (*inc_obj).to_f64();
            if lb.is_finite() && (ub - lb).abs() <= gap * ub.abs().max(1.0) {
                hit_limit = true;
                break;
            }
        }
        if let Some((_, inc_obj)) = &incumbent {
            if node.bound >= *inc_obj - S::from_f64(1e-9) && node.bound.is_finite() {
                continue;
            }
        }

        // Apply this node's bound overrides, solve, restore.
        let saved: Vec<(usize, S, S)> = node
            .overrides
            .iter()
            .map(|&(j, _, _)| (j, work.vars[j].lo, work.vars[j].hi))
            .collect();
        for &(j, lo, hi) in &node.overrides {
            work.vars[j].lo = work.vars[j].lo.max(lo);
            work.vars[j].hi = work.vars[j].hi.min(hi);
        }
        let mut child_infeasible = false;
        for &(j, _, _) in &node.overrides {
            if work.vars[j].lo > work.vars[j].hi {
                child_infeasible = true;
            }
        }
        let lp = if child_infeasible {
            None
        } else {
            Some(solve_lp(&work))
        };
        for (j, lo, hi) in saved {
            work.vars[j].lo = lo;
            work.vars[j].hi = hi;
        }
        nodes_explored += 1;

        let lp = match lp {
            None => continue,
            Some(r) => r,
        };
        let internal_obj = if negate { -lp.objective } else { lp.objective };
        match lp.status {
            LpStatus::Infeasible => {
                if node.id == 0 {
                    root_infeasible = true;
                    break;
                }
                continue;
            }
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                if node.id == 0 {
                    root_unbounded = lp.status == LpStatus::Unbounded;
                    if !root_unbounded {
                        hit_limit = true;
                    }
                    break;
                }
                // A non-root unbounded/stalled node: treat conservatively as
                // unexplorable and stop with what we have.
                hit_limit = true;
                break;
            }
            LpStatus::Optimal => {}
        }
        if let Some((_, inc_obj)) = &incumbent {
            if internal_obj >= *inc_obj - S::from_f64(1e-9) {
                continue;
            }
        }

        // Most fractional integer variable, ties to the lowest id.
        let tol = S::feas_tol();
        let mut branch_var: Option<(usize, S)> = None;
        for &j in &int_vars {
            let x = lp.values[j];
            let frac = x - x.floor();
            let dist = frac.min(S::one() - frac);
            if dist > tol {
                match branch_var {
                    Some((_, best)) if dist <= best => {}
                    _ => branch_var = Some((j, dist)),
                }
            }
        }

        match branch_var {
            None => {
                incumbent = Some((lp.values, internal_obj));
            }
            Some((j, _)) => {
                let x = lp.values[j];
                let fl = x.floor();
                for (lo, hi) in [(S::neg_infinity(), fl), (fl + S::one(), S::infinity())] {
                    let mut overrides = node.overrides.clone();
                    overrides.push((j, lo, hi));
                    let child = Node {
                        bound: internal_obj,
                        id: next_id,
                        overrides,
                    };
                    heap.push(NodeKey {
                        bound: child.bound,
                        id: child.id,
                    });
                    store.push(Some(child));
                    next_id += 1;
                }
            }
        }
    }

    if root_infeasible {
        return Solution {
            status: SolveStatus::Infeasible,
            values: Vec::new(),
            objective: S::zero(),
            nodes: nodes_explored,
        };
    }
    if root_unbounded {
        return Solution {
            status: SolveStatus::Unbounded,
            values: Vec::new(),
            objective: S::zero(),
            nodes: nodes_explored,
        };
    }

    match incumbent {
        Some((values, internal_obj)) => {
            let objective = if negate { -internal_obj } else { internal_obj };
            Solution {
                status: if hit_limit {
                    SolveStatus::Limit
                } else {
                    SolveStatus::Optimal
                },
                values,
                objective,
                nodes: nodes_explored,
            }
        }
        None => Solution {
            status: if hit_limit {
                SolveStatus::Limit
            } else {
                SolveStatus::Infeasible
            },
            values: Vec::new(),
            objective: S::zero(),
            nodes: nodes_explored,
        },
    }
}
