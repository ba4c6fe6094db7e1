//! CSV, SVG and markdown rendering of evaluation artifacts.
//!
//! Percentages are printed to two decimals. SVGs are hand-assembled —
//! simple bars and heat strips need nothing heavier.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::attribution::{AttributionReport, TokenStats};
use crate::eval::{ComparisonRow, DispatchOutcome, FilteredEval, LatencyRow};

/// Minimal CSV writer; fields with commas or quotes are quoted.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}

fn csv_field(f: &str) -> String {
    if f.contains(',') || f.contains('"') || f.contains('\n') {
        format!("\"{}\"", f.replace('"', "\"\""))
    } else {
        f.to_string()
    }
}

pub fn pct(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{:.2}", v * 100.0)
    }
}

/// Class-balance CSV: method, positive_frequency.
pub fn class_balance_csv(
    path: &Path,
    methods: &[String],
    freqs: &[f64],
) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = methods
        .iter()
        .zip(freqs)
        .map(|(m, f)| vec![m.clone(), format!("{f:.6}")])
        .collect();
    write_csv(path, &["method", "positive_frequency"], &rows)
}

/// Comparison CSV mirroring the accuracy/precision table layout.
pub fn comparison_csv(path: &Path, rows: &[ComparisonRow]) -> std::io::Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                pct(r.model.accuracy),
                pct(r.guard.accuracy),
                pct(r.model.precision),
                pct(r.guard.precision),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "method",
            "model_accuracy_pct",
            "guard_accuracy_pct",
            "model_precision_pct",
            "guard_precision_pct",
        ],
        &table,
    )
}

/// Markdown comparison table with the winner bolded per metric.
pub fn comparison_markdown(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    out.push_str("| Method | Model Acc (%) | Guard Acc (%) | Model Prec (%) | Guard Prec (%) |\n");
    out.push_str("|---|---|---|---|---|\n");
    for r in rows {
        let (ma, ga) = bold_pair(r.model.accuracy, r.guard.accuracy);
        let (mp, gp) = bold_pair(r.model.precision, r.guard.precision);
        let _ = writeln!(out, "| {} | {ma} | {ga} | {mp} | {gp} |", r.method);
    }
    out
}

fn bold_pair(model: f64, guard: f64) -> (String, String) {
    let m = pct(model);
    let g = pct(guard);
    if model.is_nan() || guard.is_nan() || (model - guard).abs() < 5e-5 {
        (m, g)
    } else if model > guard {
        (format!("**{m}**"), g)
    } else {
        (m, format!("**{g}**"))
    }
}

/// Filtered-evaluation CSV (the perfect-guard table).
pub fn filtered_csv(path: &Path, rows: &[(String, FilteredEval)]) -> std::io::Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|(m, f)| {
            vec![
                m.clone(),
                f.sample_count.to_string(),
                pct(f.model.accuracy),
                pct(f.guard_filtered_accuracy),
                pct(f.model.precision),
                pct(f.guard_full_precision),
                format!("{:.3e}", f.identity_gap),
            ]
        })
        .collect();
    write_csv(
        path,
        &[
            "method",
            "samples",
            "model_accuracy_pct",
            "guard_accuracy_pct",
            "model_precision_pct",
            "guard_precision_pct",
            "identity_gap",
        ],
        &table,
    )
}

/// Latency table CSV.
pub fn latency_csv(path: &Path, rows: &[LatencyRow]) -> std::io::Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                format!("{:.1}", r.mean_ns),
                format!("{:.1}", r.median_ns),
                r.samples.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["predictor", "mean_ns", "median_ns", "samples"], &table)
}

/// Dispatch-simulation CSV, one row per policy.
pub fn dispatch_csv(path: &Path, rows: &[(String, DispatchOutcome)]) -> std::io::Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, o)| {
            vec![
                name.clone(),
                format!("{:.4}", o.mean_attempts),
                pct(o.success_rate),
                format!("{:.4}", o.mean_cost),
            ]
        })
        .collect();
    write_csv(
        path,
        &["policy", "mean_methods_tried", "success_rate_pct", "mean_cost"],
        &table,
    )
}

/// Aggregate-attribution CSV: token, count, mean, std.
pub fn attribution_csv(path: &Path, stats: &[TokenStats]) -> std::io::Result<()> {
    let table: Vec<Vec<String>> = stats
        .iter()
        .map(|t| {
            vec![
                t.token.clone(),
                t.count.to_string(),
                format!("{:.6}", t.mean),
                format!("{:.6}", t.std),
            ]
        })
        .collect();
    write_csv(path, &["token", "count", "mean", "std"], &table)
}

/// Vertical bar chart; negative bars drop below the axis.
pub fn svg_bar_chart(title: &str, labels: &[String], values: &[f64]) -> String {
    let n = labels.len().max(1);
    let bar_w = 28.0;
    let gap = 14.0;
    let width = 60.0 + n as f64 * (bar_w + gap) + 20.0;
    let height = 320.0;
    let plot_top = 40.0;
    let plot_bottom = height - 60.0;
    let max_abs = values
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1e-12);
    let zero_y: f64 = if values.iter().any(|&v| v < 0.0) {
        (plot_top + plot_bottom) / 2.0
    } else {
        plot_bottom
    };
    let headroom = if zero_y < plot_bottom {
        (zero_y - plot_top).min(plot_bottom - zero_y)
    } else {
        zero_y - plot_top
    };
    let scale = headroom.max(1.0) / max_abs;

    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="monospace" font-size="11">"#
    );
    let _ = write!(
        s,
        r#"<text x="10" y="20" font-size="14">{}</text>"#,
        xml_escape(title)
    );
    let _ = write!(
        s,
        r##"<line x1="50" y1="{zero_y:.1}" x2="{:.1}" y2="{zero_y:.1}" stroke="#888"/>"##,
        width - 10.0
    );
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = 60.0 + i as f64 * (bar_w + gap);
        let h = v.abs() * scale;
        let (y, color) = if v >= 0.0 {
            (zero_y - h, "#4878cf")
        } else {
            (zero_y, "#d65f5f")
        };
        let _ = write!(
            s,
            r#"<rect x="{x:.1}" y="{y:.1}" width="{bar_w:.1}" height="{h:.1}" fill="{color}"/>"#
        );
        let _ = write!(
            s,
            r#"<text x="{:.1}" y="{:.1}" transform="rotate(45 {:.1} {:.1})">{}</text>"#,
            x,
            plot_bottom + 14.0,
            x,
            plot_bottom + 14.0,
            xml_escape(label)
        );
        let _ = write!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="9">{v:.3}</text>"#,
            if v >= 0.0 { y - 4.0 } else { zero_y + h + 10.0 }
        );
    }
    s.push_str("</svg>");
    s
}

/// Per-sample heat strip: blue positive, red negative.
pub fn svg_heat_strip(report: &AttributionReport) -> String {
    let cell_w = 46.0;
    let cell_h = 34.0;
    let width = 20.0 + report.tokens.len() as f64 * cell_w + 20.0;
    let height = 110.0;
    let max_abs = report
        .scores
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1e-12);
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="monospace" font-size="10">"#
    );
    let _ = write!(
        s,
        r#"<text x="10" y="16">sample {} | logit delta {:.4} | residual {:.2e}</text>"#,
        report.sample_id, report.delta, report.completeness_residual
    );
    for (i, (tok, &score)) in report.tokens.iter().zip(&report.scores).enumerate() {
        let x = 20.0 + i as f64 * cell_w;
        let intensity = (score.abs() / max_abs * 200.0) as u8;
        let fill = if score >= 0.0 {
            format!("rgb({},{},255)", 255 - intensity, 255 - intensity)
        } else {
            format!("rgb(255,{},{})", 255 - intensity, 255 - intensity)
        };
        let _ = write!(
            s,
            r##"<rect x="{x:.1}" y="30" width="{:.1}" height="{cell_h:.1}" fill="{fill}" stroke="#ccc"/>"##,
            cell_w - 2.0
        );
        let _ = write!(
            s,
            r#"<text x="{:.1}" y="50" text-anchor="middle">{}</text>"#,
            x + cell_w / 2.0 - 1.0,
            xml_escape(tok)
        );
        let _ = write!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="8">{score:.2}</text>"#,
            x + cell_w / 2.0 - 1.0,
            30.0 + cell_h + 12.0
        );
    }
    s.push_str("</svg>");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_awkward_fields() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn pct_formatting() {
        assert_eq!(pct(0.8215), "82.15");
        assert_eq!(pct(1.0), "100.00");
        assert_eq!(pct(f64::NAN), "NaN");
    }

    #[test]
    fn bar_chart_is_valid_xmlish() {
        let svg = svg_bar_chart(
            "freq",
            &["Risch".to_string(), "Gosper".to_string()],
            &[0.74, -0.19],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("Risch"));
    }

    #[test]
    fn heat_strip_renders_every_token() {
        let r = AttributionReport {
            sample_id: 3,
            tokens: vec!["[CLS]".into(), "abs".into(), "x".into()],
            scores: vec![0.02, -0.61, 0.11],
            delta: -0.48,
            completeness_residual: 1e-4,
        };
        let svg = svg_heat_strip(&r);
        assert!(svg.contains("abs"));
        assert!(svg.matches("<rect").count() == 3);
    }
}
