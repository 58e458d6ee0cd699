//! Deterministic CSV result reports.

/// One report line. Numeric fields are printed with 12 significant digits;
/// absent fields stay blank.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub query_id: String,
    pub kind: String,
    pub probability: Option<f64>,
    pub stderr: Option<f64>,
    pub cost: Option<f64>,
    pub objective: Option<f64>,
    /// Wall time in seconds. Left blank by default so identical inputs
    /// produce byte-identical reports; fill only when timing is requested.
    pub wall_time: Option<f64>,
}

impl ReportRow {
    pub fn new(query_id: impl Into<String>, kind: impl Into<String>) -> Self {
        ReportRow {
            query_id: query_id.into(),
            kind: kind.into(),
            probability: None,
            stderr: None,
            cost: None,
            objective: None,
            wall_time: None,
        }
    }
}

pub const REPORT_HEADER: &str = "query_id,kind,probability,stderr,cost,objective,wall_time";

/// Format with exactly 12 significant digits, fixed notation.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.000000000000".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn field(v: Option<f64>) -> String {
    v.map(format_sig12).unwrap_or_default()
}

fn escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render rows as CSV: header line, one line per row, trailing newline.
pub fn emit_report(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            escape(&row.query_id),
            escape(&row.kind),
            field(row.probability),
            field(row.stderr),
            field(row.cost),
            field(row.objective),
            field(row.wall_time),
        ));
    }
    out
}
