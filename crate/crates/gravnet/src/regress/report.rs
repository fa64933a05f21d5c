//! Human-readable comparison tables: coefficient, se in parentheses, and
//! significance stars at p<0.10 / p<0.05 / p<0.01.

use std::collections::BTreeSet;

use statrs::distribution::{ContinuousCDF, Normal};

use super::FitResult;

fn stars(coef: f64, se: f64) -> &'static str {
    if !(se > 0.0) {
        return "";
    }
    let z = (coef / se).abs();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let p = 2.0 * (1.0 - normal.cdf(z));
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Renders one table of fitted columns, union of terms down the rows.
pub fn render_table(results: &[(String, FitResult)]) -> String {
    let mut terms: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for (_, fit) in results {
        for t in &fit.terms {
            if seen.insert(t.clone()) {
                terms.push(t.clone());
            }
        }
    }
    let label_width = terms
        .iter()
        .map(|t| t.len())
        .chain(["N explained by FEs".len()].into_iter())
        .max()
        .unwrap_or(10)
        + 2;
    let col_width = results
        .iter()
        .map(|(name, _)| name.len() + 4)
        .max()
        .unwrap_or(12)
        .max(14);

    let mut out = String::new();
    let pad = |s: &str, w: usize| format!("{s:>w$}");
    out.push_str(&format!("{:<label_width$}", ""));
    for (name, _) in results {
        out.push_str(&pad(name, col_width));
    }
    out.push('\n');
    for term in &terms {
        out.push_str(&format!("{term:<label_width$}"));
        for (_, fit) in results {
            match (fit.coefficient(term), fit.se_of(term)) {
                (Some(c), Some(s)) => {
                    out.push_str(&pad(&format!("{c:.3}{}", stars(c, s)), col_width))
                }
                _ => out.push_str(&pad("", col_width)),
            }
        }
        out.push('\n');
        out.push_str(&format!("{:<label_width$}", ""));
        for (_, fit) in results {
            match fit.se_of(term) {
                Some(s) if fit.coefficient(term).is_some() => {
                    out.push_str(&pad(&format!("({s:.3})"), col_width))
                }
                _ => out.push_str(&pad("", col_width)),
            }
        }
        out.push('\n');
    }
    let stat_label = match results.first() {
        Some((_, fit)) if fit.diagnostics.fit_stat_definition.starts_with("mcfadden") => {
            "pseudo-R2"
        }
        _ => "R2",
    };
    for (label, value) in [
        (stat_label, true),
        ("Number of Observations", false),
        ("N explained by FEs", false),
    ] {
        out.push_str(&format!("{label:<label_width$}"));
        for (_, fit) in results {
            let cell = if value {
                format!("{:.3}", fit.fit_stat)
            } else if label.starts_with("Number") {
                fit.n_total.to_string()
            } else {
                fit.n_dropped_by_fe.to_string()
            };
            out.push_str(&pad(&cell, col_width));
        }
        out.push('\n');
    }
    for (name, fit) in results {
        if !fit.converged {
            out.push_str(&format!("warning: column {name} did not converge\n"));
        }
    }
    out
}
