use std::fmt::Write;

use super::svg::escape;
use super::{layout_universe, render_fingerprint, render_frequency_chart, render_heatmap, render_universe};
use super::{FingerprintGrid, RowOrdering};
use crate::analysis::{AnalysisBundle, Role};
use crate::data::{DimensionId, LandCoverClass, Metric};

const STYLE: &str = "body{font-family:sans-serif;margin:24px;color:#222}\
table{border-collapse:collapse;margin:8px 0}\
td,th{border:1px solid #ccc;padding:2px 6px;font-size:12px;text-align:right}\
th:first-child,td:first-child{text-align:left}\
.wide{overflow-x:auto}\
.unavailable{color:#a00;font-style:italic}\
.charts{display:flex;flex-wrap:wrap;gap:12px}";

fn unavailable(out: &mut String, what: &str) {
    let _ = writeln!(out, r#"<p class="unavailable">unavailable: {}</p>"#, escape(what));
}

fn fmt_opt(v: Option<f64>, places: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.places$}"))
}

/// One self-contained HTML page with every table and figure inline.
/// Sections whose input is missing say so instead of failing.
pub fn render_report(bundle: &AnalysisBundle) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    out.push_str("<title>Embedding dimension report</title>\n");
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>");
    out.push_str("<h1>Embedding dimension report</h1>\n");

    out.push_str("<h2>Classes</h2>\n<table>\n<tr><th>class</th><th>id</th><th>WorldCover code</th></tr>\n");
    for c in LandCoverClass::ALL {
        let _ = writeln!(out, "<tr><td>{}</td><td>{}</td><td>{}</td></tr>", escape(c.name()), c.id(), c.worldcover_code());
    }
    out.push_str("</table>\n");

    overview(&mut out, bundle);
    matrix(&mut out, bundle);
    tipping(&mut out, bundle);
    taxonomy(&mut out, bundle);
    figures(&mut out, bundle);

    out.push_str("</body>\n</html>\n");
    out
}

fn overview(out: &mut String, bundle: &AnalysisBundle) {
    out.push_str("<h2>Overview</h2>\n");
    let Some(s) = &bundle.summary else {
        unavailable(out, "summary");
        return;
    };
    let _ = writeln!(
        out,
        "<table>\n<tr><th>experiments</th><td>{}</td></tr>\n<tr><th>valid</th><td>{}</td></tr>\n<tr><th>excluded</th><td>{}</td></tr>\n<tr><th>tipping metric</th><td>{}</td></tr>\n<tr><th>recovery</th><td>{}</td></tr>\n</table>",
        s.total_experiments,
        s.valid_experiments,
        s.excluded_experiments,
        s.metric,
        s.recovery
    );
    if !s.per_class.is_empty() {
        out.push_str("<table>\n<tr><th>class</th><th>valid</th><th>excluded</th></tr>\n");
        for c in &s.per_class {
            let _ = writeln!(out, "<tr><td>{}</td><td>{}</td><td>{}</td></tr>", escape(c.class.name()), c.valid, c.excluded);
        }
        out.push_str("</table>\n");
    }
    out.push_str("<h3>Mean baseline metrics by algorithm</h3>\n");
    if s.per_algorithm.is_empty() {
        unavailable(out, "no valid experiments");
        return;
    }
    out.push_str("<table>\n<tr><th>algorithm</th><th>experiments</th>");
    for m in Metric::ALL {
        let _ = write!(out, "<th>{m}</th>");
    }
    out.push_str("</tr>\n");
    for a in &s.per_algorithm {
        let _ = write!(out, "<tr><td>{}</td><td>{}</td>", a.algorithm, a.experiments);
        for m in Metric::ALL {
            let _ = write!(out, "<td>{}</td>", fmt_opt(a.mean_baseline.get(m.name()).copied().flatten(), 3));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
}

fn matrix(out: &mut String, bundle: &AnalysisBundle) {
    out.push_str("<h2>Association matrix</h2>\n");
    let Some(m) = &bundle.matrix else {
        unavailable(out, "association matrix");
        return;
    };
    out.push_str("<div class=\"wide\"><table>\n<tr><th>class</th><th>n</th>");
    for d in DimensionId::all() {
        let _ = write!(out, "<th>imp{}</th>", d.label());
    }
    out.push_str("</tr>\n");
    for row in &m.rows {
        let _ = write!(out, "<tr><td>{}</td><td>{}</td>", escape(row.class.name()), row.experiments);
        for s in &row.scores {
            let _ = write!(out, "<td>{s:.4}</td>");
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table></div>\n");
}

fn tipping(out: &mut String, bundle: &AnalysisBundle) {
    out.push_str("<h2>Tipping points</h2>\n");
    let Some(tps) = &bundle.tipping_points else {
        unavailable(out, "tipping points");
        return;
    };
    out.push_str("<table>\n<tr><th>class</th><th>metric</th><th>experiments</th><th>baseline mean</th><th>threshold</th><th>k*</th><th>minimum subset</th></tr>\n");
    for tp in tps {
        let subset: Vec<_> = tp.minimum_subset.iter().map(|d| d.label()).collect();
        let _ = writeln!(
            out,
            "<tr><td>{}</td><td>{}</td><td>{}</td><td>{:.4}</td><td>{:.4}</td><td>{}</td><td>{}</td></tr>",
            escape(tp.class.name()),
            tp.metric_name,
            tp.experiments,
            tp.baseline_mean,
            tp.threshold,
            tp.k_star_label(),
            subset.join(" ")
        );
    }
    out.push_str("</table>\n");
}

fn taxonomy(out: &mut String, bundle: &AnalysisBundle) {
    out.push_str("<h2>Dimension taxonomy</h2>\n");
    let Some(tax) = &bundle.taxonomy else {
        unavailable(out, "taxonomy");
        return;
    };
    out.push_str("<table>\n<tr><th>role</th><th>count</th></tr>\n");
    for role in Role::ALL {
        let n = tax.iter().filter(|a| a.role == role).count();
        let _ = writeln!(out, "<tr><td>{role}</td><td>{n}</td></tr>");
    }
    out.push_str("</table>\n<table>\n<tr><th>dimension</th><th>role</th><th>classes</th></tr>\n");
    for a in tax.iter().filter(|a| a.role != Role::Uninterpreted) {
        let classes: Vec<_> = a.supporting_classes.iter().map(|c| c.name()).collect();
        let _ = writeln!(
            out,
            "<tr><td>{}</td><td>{}</td><td>{}</td></tr>",
            a.dimension.label(),
            a.role,
            escape(&classes.join(", "))
        );
    }
    out.push_str("</table>\n");
}

fn figures(out: &mut String, bundle: &AnalysisBundle) {
    out.push_str("<h2>Class analysis</h2>\n<h3>Fingerprint</h3>\n");
    match (&bundle.tipping_points, &bundle.taxonomy) {
        (Some(tps), Some(tax)) => {
            out.push_str(&render_fingerprint(&FingerprintGrid::build(tps, tax), &RowOrdering::SubsetSize));
        }
        _ => unavailable(out, "fingerprint (needs tipping points and taxonomy)"),
    }

    out.push_str("<h3>Embedding universe</h3>\n");
    match (&bundle.taxonomy, &bundle.matrix) {
        (Some(tax), Some(m)) => out.push_str(&render_universe(&layout_universe(tax, m))),
        _ => unavailable(out, "universe (needs taxonomy and association matrix)"),
    }

    out.push_str("<h3>Top-2 frequency</h3>\n");
    match &bundle.matrix {
        Some(m) if !m.rows.is_empty() => {
            out.push_str("<div class=\"charts\">\n");
            for row in &m.rows {
                out.push_str(&render_frequency_chart(row, 10));
            }
            out.push_str("</div>\n");
        }
        _ => unavailable(out, "frequency charts"),
    }

    out.push_str("<h2>Geographic accuracy</h2>\n");
    match &bundle.heatmap {
        Some(h) => out.push_str(&render_heatmap(h)),
        None => unavailable(out, "heatmap"),
    }
}
