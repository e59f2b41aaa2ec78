use std::fmt::Write;

use super::{LpProblem, Relation};

const TERMS_PER_LINE: usize = 6;

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    let sign = if coef < 0.0 { "-" } else { "+" };
    let mag = coef.abs();
    if first && coef >= 0.0 {
        if mag == 1.0 {
            let _ = write!(out, " {name}");
        } else {
            let _ = write!(out, " {mag} {name}");
        }
    } else if mag == 1.0 {
        let _ = write!(out, " {sign} {name}");
    } else {
        let _ = write!(out, " {sign} {mag} {name}");
    }
}

fn linear(out: &mut String, terms: impl Iterator<Item = (f64, String)>) -> bool {
    let mut any = false;
    for (k, (coef, name)) in terms.filter(|(c, _)| *c != 0.0).enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        term(out, k == 0, coef, &name);
        any = true;
    }
    any
}

/// Renders `lp` in the CPLEX LP text format. Columns flagged in `integer`
/// with 0/1 bounds go in the `Binaries` section, other flagged columns in
/// `Generals`.
pub fn write_lp_format(lp: &LpProblem, integer: &[bool]) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let any = linear(&mut out, lp.costs.iter().enumerate().map(|(j, &c)| (c, lp.col_name(j))));
    if lp.offset != 0.0 || !any {
        let _ = write!(out, " {} {}", if lp.offset < 0.0 { "-" } else { "+" }, lp.offset.abs());
    }
    out.push_str("\nSubject To\n");
    for (i, row) in lp.rows.iter().enumerate() {
        let _ = write!(out, " {}:", lp.row_name(i));
        let any = linear(&mut out, row.coeffs.iter().map(|&(j, a)| (a, lp.col_name(j))));
        if !any {
            // an empty row still needs a variable to be parseable
            let _ = write!(out, " 0 {}", lp.col_name(0));
        }
        let op = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_cols() {
        let name = lp.col_name(j);
        let (lo, up) = (lp.lower[j], lp.upper[j]);
        if lo == up {
            let _ = writeln!(out, " {name} = {lo}");
        } else if up.is_infinite() {
            if lo != 0.0 {
                let _ = writeln!(out, " {name} >= {lo}");
            }
        } else {
            let _ = writeln!(out, " {lo} <= {name} <= {up}");
        }
    }
    let binaries: Vec<String> = (0..lp.num_cols())
        .filter(|&j| integer.get(j).copied().unwrap_or(false) && lp.lower[j] == 0.0 && lp.upper[j] == 1.0)
        .map(|j| lp.col_name(j))
        .collect();
    let generals: Vec<String> = (0..lp.num_cols())
        .filter(|&j| integer.get(j).copied().unwrap_or(false) && !(lp.lower[j] == 0.0 && lp.upper[j] == 1.0))
        .map(|j| lp.col_name(j))
        .collect();
    for (title, names) in [("Binaries", binaries), ("Generals", generals)] {
        if names.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{title}");
        for chunk in names.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_sections() {
        let mut lp = LpProblem::new();
        lp.offset = 4.0;
        let a = lp.add_named_var("a", 1.0, 0.0, 1.0);
        let b = lp.add_named_var("b", -2.5, 0.0, f64::INFINITY);
        lp.add_named_row("cap", vec![(a, 1.0), (b, 3.0)], Relation::Le, 7.0);
        lp.add_named_row("cover", vec![(a, -1.0)], Relation::Ge, -1.0);
        let text = write_lp_format(&lp, &[true, false]);
        assert_eq!(
            text,
            "Minimize\n obj: a - 2.5 b + 4\nSubject To\n cap: a + 3 b <= 7\n cover: - a >= -1\n\
             Bounds\n 0 <= a <= 1\nBinaries\n a\nEnd\n"
        );
    }
}
