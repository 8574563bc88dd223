//! CPLEX LP-format writer for cross-checking models in external solvers.
//!
//! Layout: `Minimize` objective, `Subject To` rows, `Bounds`, then
//! `General`/`Binary` sections for integer columns, terminated by `End`.
//! Names are sanitised to `[A-Za-z0-9_.]` and made unique by index suffix.

use std::fmt::Write;

use crate::model::{LinearModel, Relation};

fn sanitize(name: &str, idx: usize, prefix: char) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, prefix);
    }
    format!("{s}_{idx}")
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (String, f64)>) {
    let mut first = true;
    let mut count = 0;
    for (name, a) in terms {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        if first && a >= 0.0 {
            let _ = write!(out, " {} {}", fmt_num(a.abs()), name);
        } else {
            let _ = write!(out, " {} {} {}", sign, fmt_num(a.abs()), name);
        }
        first = false;
        count += 1;
        if count % 8 == 0 {
            out.push_str("\n  ");
        }
    }
    if first {
        out.push_str(" 0");
    }
}

pub fn to_lp_format(model: &LinearModel) -> String {
    let names: Vec<String> = model
        .vars()
        .iter()
        .enumerate()
        .map(|(i, v)| sanitize(&v.name, i, 'x'))
        .collect();
    let mut out = String::from("\\ generated by linopt\nMinimize\n obj:");
    write_terms(
        &mut out,
        model.vars().iter().enumerate().map(|(i, v)| (names[i].clone(), v.obj)),
    );
    out.push_str("\nSubject To\n");
    for (r, row) in model.rows().iter().enumerate() {
        let _ = write!(out, " {}:", sanitize(&row.name, r, 'r'));
        write_terms(&mut out, row.terms.iter().map(|(v, a)| (names[v.0].clone(), *a)));
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {} {}", rel, fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for (i, v) in model.vars().iter().enumerate() {
        if v.integer && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", names[i]);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), names[i], fmt_num(v.upper));
        }
    }
    let general: Vec<&String> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integer && !(v.lower == 0.0 && v.upper == 1.0))
        .map(|(i, _)| &names[i])
        .collect();
    let binary: Vec<&String> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integer && v.lower == 0.0 && v.upper == 1.0)
        .map(|(i, _)| &names[i])
        .collect();
    if !general.is_empty() {
        out.push_str("General\n");
        for n in general {
            let _ = writeln!(out, " {n}");
        }
    }
    if !binary.is_empty() {
        out.push_str("Binary\n");
        for n in binary {
            let _ = writeln!(out, " {n}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_has_sections() {
        let mut m = LinearModel::new();
        let x = m.binary("x[0,1]", 3.0);
        let y = m.continuous("y", 0.0, f64::INFINITY, -1.0);
        m.add_row("cap", [(x, 2.0), (y, -1.0)], Relation::Le, 4.0);
        let s = to_lp_format(&m);
        assert!(s.contains("Minimize"));
        assert!(s.contains("cap_0: 2 x_0_1__0 - 1 y_1 <= 4"));
        assert!(s.contains("Binary\n x_0_1__0"));
        assert!(s.trim_end().ends_with("End"));
    }
}
