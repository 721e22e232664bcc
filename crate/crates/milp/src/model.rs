use crate::Scalar;

/// Integrality class of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

/// Constraint relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Objective sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

/// Handle to a variable of a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef(pub usize);

/// Handle to a constraint of a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintRef(pub usize);

#[derive(Debug, Clone)]
pub(crate) struct Variable<S> {
    pub name: Option<String>,
    pub lo: S,
    pub hi: S,
    pub kind: VarKind,
}

#[derive(Debug, Clone)]
pub(crate) struct Constraint<S> {
    pub terms: Vec<(usize, S)>,
    pub rel: Relation,
    pub rhs: S,
}

/// A mixed-integer linear model: bounded variables, sparse linear
/// constraints, and a linear objective with a sense.
#[derive(Debug, Clone, Default)]
pub struct LinearModel<S> {
    pub(crate) vars: Vec<Variable<S>>,
    pub(crate) cons: Vec<Constraint<S>>,
    pub(crate) objective: Vec<(usize, S)>,
    pub(crate) sense: Sense,
}

impl<S: Scalar> LinearModel<S> {
    pub fn new(sense: Sense) -> Self {
        Self {
            vars: Vec::new(),
            cons: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    /// Adds a variable with bounds `[lo, hi]`. Panics if `lo > hi`, since a
    /// model with crossed bounds is malformed rather than infeasible.
    pub fn add_var(&mut self, lo: S, hi: S, kind: VarKind) -> VarRef {
        assert!(lo <= hi, "variable bounds must satisfy lo <= hi");
        self.vars.push(Variable {
            name: None,
            lo,
            hi,
            kind,
        });
        VarRef(self.vars.len() - 1)
    }

    /// Adds a named variable; names show up in LP exports and dumps.
    pub fn add_named_var(&mut self, name: impl Into<String>, lo: S, hi: S, kind: VarKind) -> VarRef {
        let v = self.add_var(lo, hi, kind);
        self.vars[v.0].name = Some(name.into());
        v
    }

    pub fn add_binary(&mut self) -> VarRef {
        self.add_var(S::zero(), S::one(), VarKind::Binary)
    }

    /// Adds the constraint `sum(coef * var) rel rhs`. Duplicate variable
    /// references within `terms` are summed.
    pub fn add_constraint(&mut self, terms: &[(VarRef, S)], rel: Relation, rhs: S) -> ConstraintRef {
        let mut row: Vec<(usize, S)> = Vec::with_capacity(terms.len());
        for &(v, c) in terms {
            assert!(v.0 < self.vars.len(), "constraint references unknown variable");
            match row.iter_mut().find(|(j, _)| *j == v.0) {
                Some((_, acc)) => *acc = *acc + c,
                None => row.push((v.0, c)),
            }
        }
        self.cons.push(Constraint { terms: row, rel, rhs });
        ConstraintRef(self.cons.len() - 1)
    }

    /// Sets the objective coefficient of `var` (replacing any previous one).
    pub fn set_objective(&mut self, var: VarRef, coef: S) {
        assert!(var.0 < self.vars.len(), "objective references unknown variable");
        match self.objective.iter_mut().find(|(j, _)| *j == var.0) {
            Some((_, c)) => *c = coef,
            None => self.objective.push((var.0, coef)),
        }
    }

    pub fn objective_coef(&self, var: VarRef) -> S {
        self.objective
            .iter()
            .find(|(j, _)| *j == var.0)
            .map(|&(_, c)| c)
            .unwrap_or_else(S::zero)
    }

    pub fn bounds(&self, var: VarRef) -> (S, S) {
        let v = &self.vars[var.0];
        (v.lo, v.hi)
    }

    pub fn kind(&self, var: VarRef) -> VarKind {
        self.vars[var.0].kind
    }

    pub fn var_name(&self, var: VarRef) -> String {
        match &self.vars[var.0].name {
            Some(n) => n.clone(),
            None => format!("x{}", var.0),
        }
    }

    /// Tightens the bounds of `var` to `[lo, hi]` in place (used by
    /// branch-and-bound; callers may also use it to fix variables).
    pub fn set_bounds(&mut self, var: VarRef, lo: S, hi: S) {
        self.vars[var.0].lo = lo;
        self.vars[var.0].hi = hi;
    }

    /// Objective value of a given assignment, in the model's own sense.
    pub fn objective_value(&self, values: &[S]) -> S {
        self.objective
            .iter()
            .fold(S::zero(), |acc, &(j, c)| acc + c * values[j])
    }

    /// Checks a point against all constraints and bounds within `tol`.
    pub fn is_feasible(&self, values: &[S], tol: S) -> bool {
        if values.len() != self.vars.len() {
            return false;
        }
        for (v, x) in self.vars.iter().zip(values) {
            if *x < v.lo - tol || *x > v.hi + tol {
                return false;
            }
            if v.kind != VarKind::Continuous && (*x - x.round()).abs() > tol {
                return false;
            }
        }
        for c in &self.cons {
            let lhs = c
                .terms
                .iter()
                .fold(S::zero(), |acc, &(j, coef)| acc + coef * values[j]);
            let ok = match c.rel {
                Relation::Le => lhs <= c.rhs + tol,
                Relation::Eq => (lhs - c.rhs).abs() <= tol,
                Relation::Ge => lhs >= c.rhs - tol,
            };
            if !ok {
                return false;
            }
        }
        true
    }
}
