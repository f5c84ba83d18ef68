//! Deterministic LP-file export.
//!
//! Sections: Minimize / Subject To / Bounds / Generals / End. Names are
//! sanitized to `[A-Za-z0-9_()%,.]`, coefficients are rendered with fixed
//! 12-significant-digit scientific notation, and repeated exports of the same
//! model are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::model::{ModelGraph, Sense};
use crate::solver::standard_form::{to_standard_form, StandardFormLP};

const TERMS_PER_LINE: usize = 6;

/// 12 significant digits, sign-normalized zero.
pub(crate) fn fmt12(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

fn sanitize_row_name(name: &str, taken: &mut BTreeMap<String, usize>) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        let mapped = match ch {
            '[' => '(',
            ']' => ')',
            c if c.is_ascii_alphanumeric() => c,
            '_' | '(' | ')' | '%' | ',' | '.' => ch,
            _ => '_',
        };
        out.push(mapped);
    }
    if out.is_empty() {
        out.push('_');
    }
    let first = out.chars().next().unwrap();
    if first.is_ascii_digit() || first == '.' {
        out.insert(0, '_');
    }
    match taken.get_mut(&out) {
        None => {
            taken.insert(out.clone(), 1);
            out
        }
        Some(count) => {
            *count += 1;
            let suffixed = format!("{out}_{count}");
            taken.insert(suffixed.clone(), 1);
            suffixed
        }
    }
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], lp: &StandardFormLP) {
    for (k, &(j, coef)) in terms.iter().enumerate() {
        if k == 0 {
            if coef < 0.0 {
                out.push_str("- ");
            }
        } else if coef < 0.0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&fmt12(coef.abs()));
        out.push(' ');
        out.push_str(&lp.lp_names[j]);
        if (k + 1) % TERMS_PER_LINE == 0 && k + 1 < terms.len() {
            out.push_str("\n   ");
        }
    }
}

/// Renders a standard-form problem as LP text.
pub fn write_lp_string(lp: &StandardFormLP) -> String {
    let mut out = String::new();
    out.push_str("\\ LP export\n");
    if lp.objective_constant != 0.0 {
        out.push_str(&format!(
            "\\ objective constant {}\n",
            fmt12(lp.objective_constant)
        ));
    }
    out.push_str("Minimize\n obj: ");
    let obj_terms: Vec<(usize, f64)> = lp
        .objective
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c != 0.0)
        .map(|(j, &c)| (j, c))
        .collect();
    push_terms(&mut out, &obj_terms, lp);
    out.push('\n');

    out.push_str("Subject To\n");
    let mut row_names = BTreeMap::new();
    for row in &lp.rows {
        let name = sanitize_row_name(&row.name, &mut row_names);
        out.push_str(&format!(" {name}: "));
        push_terms(&mut out, &row.terms, lp);
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        out.push_str(&format!(" {sense} {}\n", fmt12(row.rhs)));
    }

    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let name = &lp.lp_names[j];
        if l == 0.0 && u == f64::INFINITY {
            continue; // LP default
        }
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            out.push_str(&format!(" {name} free\n"));
        } else if l == f64::NEG_INFINITY {
            out.push_str(&format!(" -infinity <= {name} <= {}\n", fmt12(u)));
        } else if u == f64::INFINITY {
            out.push_str(&format!(" {name} >= {}\n", fmt12(l)));
        } else {
            out.push_str(&format!(" {} <= {name} <= {}\n", fmt12(l), fmt12(u)));
        }
    }

    let generals: Vec<&str> = (0..lp.num_vars())
        .filter(|&j| lp.integer[j])
        .map(|j| lp.lp_names[j].as_str())
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for chunk in generals.chunks(8) {
            out.push_str(&format!(" {}\n", chunk.join(" ")));
        }
    }
    out.push_str("End\n");
    out
}

/// Writes the model as an LP file at `path`.
pub fn write_lp_file(model: &ModelGraph, path: &Path) -> Result<()> {
    let lp = to_standard_form(model);
    let text = write_lp_string(&lp);
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
