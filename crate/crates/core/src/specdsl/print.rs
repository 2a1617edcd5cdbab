use std::fmt::Write;

use super::{Bound, Formula, ParametricSpec};

pub(super) fn program(spec: &ParametricSpec) -> String {
    let names = spec.param_names();
    let mut out = String::new();
    for p in &spec.params {
        let _ = writeln!(out, "param {} in [{},{}];", p.name, p.lo, p.hi);
    }
    out.push_str("spec ");
    formula(&spec.formula, &names, &mut out);
    out.push('\n');
    out
}

/// Renders a formula; `names[i]` names `Bound::Param(i)`.
pub fn formula(f: &Formula, names: &[&str], out: &mut String) {
    match f {
        Formula::Globally { lo, hi, child } | Formula::Eventually { lo, hi, child } => {
            out.push(if matches!(f, Formula::Globally { .. }) { 'G' } else { 'F' });
            out.push('[');
            bound(lo, names, out);
            out.push(',');
            bound(hi, names, out);
            out.push_str("] ");
            parenthesized(child, names, out);
        }
        Formula::And(cs) | Formula::Or(cs) => {
            let sep = if matches!(f, Formula::And(_)) { " and " } else { " or " };
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                if matches!(c, Formula::And(_) | Formula::Or(_)) {
                    parenthesized(c, names, out);
                } else {
                    formula(c, names, out);
                }
            }
        }
        Formula::Not(c) => {
            out.push_str("not ");
            parenthesized(c, names, out);
        }
        Formula::Less(b) => {
            out.push_str("x < ");
            bound(b, names, out);
        }
        Formula::Greater(b) => {
            out.push_str("x > ");
            bound(b, names, out);
        }
    }
}

fn parenthesized(f: &Formula, names: &[&str], out: &mut String) {
    out.push('(');
    formula(f, names, out);
    out.push(')');
}

fn bound(b: &Bound, names: &[&str], out: &mut String) {
    match *b {
        // `Display` for f64 is the shortest representation that round-trips.
        Bound::Const(v) => {
            let _ = write!(out, "{v}");
        }
        Bound::Param(i) => out.push_str(names[i]),
    }
}

pub fn render(f: &Formula, names: &[&str]) -> String {
    let mut s = String::new();
    formula(f, names, &mut s);
    s
}
