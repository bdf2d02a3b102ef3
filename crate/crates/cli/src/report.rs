//! Table rendering in the row/column layout of the published results table.

use chordgen_core::stats::{Cell, SignificanceTable};

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"))
}

fn cell_text(c: &Cell, bold: (&str, &str)) -> String {
    match (c.mean, c.not_different) {
        (None, _) => "NA".to_string(),
        (Some(m), Some(true)) => format!("{}{m:.2}{}", bold.0, bold.1),
        (Some(m), _) => format!("{m:.2}"),
    }
}

fn header(t: &SignificanceTable) -> Vec<String> {
    let mut h = vec!["Metric".to_string(), "GT".to_string()];
    h.extend(t.variants.iter().map(|v| v.name.clone()));
    h
}

fn body(t: &SignificanceTable, bold: (&str, &str)) -> Vec<Vec<String>> {
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = vec![row.label(), num(t.ground_truth[i])];
            r.extend(t.variants.iter().map(|v| cell_text(&v.cells[i], bold)));
            r
        })
        .collect()
}

/// Plain text; `*` marks means not significantly different from GT.
pub fn render_text(t: &SignificanceTable) -> String {
    let head = header(t);
    let rows = body(t, ("", "*"));
    let widths: Vec<usize> = (0..head.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([head[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&head) + "\n";
    out += &"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
    out += "\n";
    for r in &rows {
        out += &line(r);
        out += "\n";
    }
    out += &format!("* not significantly different from GT (Wilcoxon signed-rank, alpha = {})\n", t.alpha);
    out
}

/// Markdown with bold for not-different cells.
pub fn render_markdown(t: &SignificanceTable) -> String {
    let head = header(t);
    let mut out = format!("| {} |\n", head.join(" | "));
    out += &format!("|{}\n", " --- |".repeat(head.len()));
    for r in body(t, ("**", "**")) {
        out += &format!("| {} |\n", r.join(" | "));
    }
    out
}

/// One row per metric with mean, p-value and flag columns per variant.
pub fn render_csv(t: &SignificanceTable) -> String {
    let mut head = vec!["metric".to_string(), "gt_mean".to_string()];
    for v in &t.variants {
        head.push(format!("{}_mean", v.name));
        head.push(format!("{}_p", v.name));
        head.push(format!("{}_not_different", v.name));
    }
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x}"));
    let mut out = csv_line(&head);
    for (i, row) in t.rows.iter().enumerate() {
        let mut r = vec![row.label(), opt(t.ground_truth[i])];
        for v in &t.variants {
            let c = &v.cells[i];
            r.push(opt(c.mean));
            r.push(opt(c.p_value));
            r.push(c.not_different.map_or("NA".to_string(), |b| b.to_string()));
        }
        out += &csv_line(&r);
    }
    out
}

pub(crate) fn csv_line(fields: &[String]) -> String {
    let quoted: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    quoted.join(",") + "\n"
}
