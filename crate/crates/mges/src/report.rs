//! Deterministic CSV and HTML table emission shared by the analysis
//! result writers. Floats are printed with Rust's shortest round-trip
//! formatting, so an emitted CSV parses back to the same values.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableFormat {
    Csv,
    Html,
}

impl TableFormat {
    pub fn parse(name: &str) -> crate::Result<Self> {
        match name {
            "csv" => Ok(TableFormat::Csv),
            "html" => Ok(TableFormat::Html),
            other => Err(crate::Error::Usage(format!("unknown table format `{other}`"))),
        }
    }
}

/// Shortest round-trip float; missing values print as `NA`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_csv(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&headers.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained HTML table with inline styles and no external assets.
pub fn render_html(title: &str, headers: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>");
    out.push_str(&html_escape(title));
    out.push_str("</title></head>\n<body>\n<h1 style=\"font-family:sans-serif\">");
    out.push_str(&html_escape(title));
    out.push_str("</h1>\n<table style=\"border-collapse:collapse;font-family:sans-serif;font-size:13px\">\n<tr>");
    for h in headers {
        out.push_str("<th style=\"border:1px solid #888;padding:2px 6px;background:#eee\">");
        out.push_str(&html_escape(h));
        out.push_str("</th>");
    }
    out.push_str("</tr>\n");
    for row in rows {
        out.push_str("<tr>");
        for field in row {
            out.push_str("<td style=\"border:1px solid #888;padding:2px 6px\">");
            out.push_str(&html_escape(field));
            out.push_str("</td>");
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n</body></html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_only_when_needed() {
        let csv = render_csv(
            &["a".into(), "b,c".into()],
            &[vec!["plain".into(), "with \"quote\"".into()]],
        );
        assert_eq!(csv, "a,\"b,c\"\nplain,\"with \"\"quote\"\"\"\n");
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN), "NA");
    }

    #[test]
    fn html_is_self_contained_and_escaped() {
        let html = render_html("t<1", &["h".into()], &[vec!["a&b".into()]]);
        assert!(html.contains("t&lt;1"));
        assert!(html.contains("a&amp;b"));
        assert!(!html.contains("href"));
        assert!(!html.contains("src="));
    }
}
