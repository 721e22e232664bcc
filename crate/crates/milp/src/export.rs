use crate::model::{LinearModel, Relation, Sense, VarKind};
use crate::Scalar;
use std::fmt::Write;

/// Renders the model in the LP text interchange format (objective,
/// constraints, bounds and integrality sections). Variable naming is stable
/// across runs: explicit names where given, `x{index}` otherwise.
pub fn write_lp<S: Scalar>(model: &LinearModel<S>) -> String {
    let mut out = String::new();
    let name = |j: usize| match &model.vars[j].name {
        Some(n) => n.clone(),
        None => format!("x{j}"),
    };

    out.push_str(match model.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    let mut obj: Vec<(usize, S)> = model.objective.iter().copied().collect();
    obj.sort_by_key(|&(j, _)| j);
    for (j, c) in obj {
        write_term(&mut out, c, &name(j));
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for (i, con) in model.cons.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        let mut terms = con.terms.clone();
        terms.sort_by_key(|&(j, _)| j);
        if terms.is_empty() {
            // LP format requires an expression; an empty row is a tautology
            // or contradiction, emit a zero row.
            if model.vars.is_empty() {
                out.push_str(" 0");
            } else {
                let _ = write!(out, " 0 {}", name(0));
            }
        }
        for (j, c) in terms {
            write_term(&mut out, c, &name(j));
        }
        let rel = match con.rel {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {} {}", rel, fmt_num(con.rhs));
    }

    out.push_str("Bounds\n");
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind == VarKind::Binary {
            continue; // implied 0/1
        }
        let n = name(j);
        match (v.lo.is_finite(), v.hi.is_finite()) {
            (true, true) if v.lo == v.hi => {
                let _ = writeln!(out, " {} = {}", n, fmt_num(v.lo));
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lo), n, fmt_num(v.hi));
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", n, fmt_num(v.lo));
            }
            (false, true) => {
                let _ = writeln!(out, " -infinity <= {} <= {}", n, fmt_num(v.hi));
            }
            (false, false) => {
                let _ = writeln!(out, " {} free", n);
            }
        }
    }

    let generals: Vec<usize> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Integer)
        .map(|(j, _)| j)
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for j in generals {
            let _ = writeln!(out, " {}", name(j));
        }
    }
    let binaries: Vec<usize> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for j in binaries {
            let _ = writeln!(out, " {}", name(j));
        }
    }
    out.push_str("End\n");
    out
}

fn write_term<S: Scalar>(out: &mut String, c: S, name: &str) {
    if c < S::zero() {
        let _ = write!(out, " - {} {}", fmt_num(-c), name);
    } else {
        let _ = write!(out, " + {} {}", fmt_num(c), name);
    }
}

fn fmt_num<S: Scalar>(v: S) -> String {
    format!("{}", v)
}
