//! Per-line report rows and their CSV form.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use crate::error::{Error, Result};
use crate::montecarlo::SimulationReport;
use crate::optimizer::{Evaluator, ObjectiveEvaluation};
use crate::risk::{line_risk, THRESHOLD_TABLE};

#[derive(Debug, Clone, PartialEq)]
pub struct LineReportRow {
    pub i: u32,
    pub j: u32,
    pub abs_angle: f64,
    pub sigma: f64,
    pub f: f64,
    /// `L_ij·sin(min(f, π/2))`.
    pub flow_bound: f64,
    pub f_a: f64,
    pub f_b: f64,
    /// The f*-anchored bound; absent when `f* ≥ π/2`.
    pub p_out_bound: Option<f64>,
}

pub const LINE_HEADER: [&str; 9] = ["i", "j", "abs_angle", "sigma", "f", "flow_bound", "f_a", "f_b", "p_out_bound"];

pub fn fmt_angle(x: f64) -> String {
    format!("{x:.4}")
}

/// Three significant digits, two-digit exponent: `6.22e-16`, `1.90e-04`.
pub fn fmt_prob(x: f64) -> String {
    if x == 0.0 {
        return "0.00e+00".into();
    }
    let s = format!("{x:.2e}");
    let (mant, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// Rows for every line of a successful evaluation, sorted by `f` descending.
pub fn line_rows(ev: &Evaluator, eval: &ObjectiveEvaluation) -> Result<Vec<LineReportRow>> {
    if !eval.is_ok() {
        return Err(Error::Infeasible(format!("evaluation status {:?}", eval.status)));
    }
    let net = &ev.problem.network;
    let f_star = eval.f_value;
    let mut rows = Vec::with_capacity(net.line_count());
    for k in 0..net.line_count() {
        let m = eval.state.angle_diffs[k];
        let s = eval.sigma[k];
        let risk = line_risk(m, s, f_star, ev.r_epsilon())?;
        let (i, j) = net.line_label(k);
        let f = eval.components[k];
        rows.push(LineReportRow {
            i,
            j,
            abs_angle: m.abs(),
            sigma: s,
            f,
            flow_bound: net.capacity[k] * f.min(FRAC_PI_2).sin(),
            f_a: risk.f_a,
            f_b: risk.f_b,
            p_out_bound: risk.p_out_bound_global,
        });
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// `f` descending, ties by `(i, j)` ascending.
pub fn sort_rows(rows: &mut [LineReportRow]) {
    rows.sort_by(|a, b| b.f.total_cmp(&a.f).then((a.i, a.j).cmp(&(b.i, b.j))));
}

pub fn write_line_csv<W: Write>(out: W, rows: &[LineReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(LINE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.i.to_string(),
            r.j.to_string(),
            fmt_angle(r.abs_angle),
            fmt_angle(r.sigma),
            fmt_angle(r.f),
            fmt_angle(r.flow_bound),
            fmt_prob(r.f_a),
            fmt_prob(r.f_b),
            r.p_out_bound.map(fmt_prob).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<T> {
    let raw = rec.get(idx).ok_or_else(|| Error::Csv(format!("row {line}: missing column {idx}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Csv(format!("row {line}: bad value `{raw}` in column {idx}")))
}

/// Parses the output of [`write_line_csv`].
pub fn parse_line_csv(text: &str) -> Result<Vec<LineReportRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if header.iter().ne(LINE_HEADER) {
        return Err(Error::Csv(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let line = n + 2;
        if rec.len() != LINE_HEADER.len() {
            return Err(Error::Csv(format!("row {line}: expected {} fields", LINE_HEADER.len())));
        }
        let p_out_bound = match rec.get(8).map(str::trim) {
            Some("") | None => None,
            Some(_) => Some(field(&rec, 8, line)?),
        };
        rows.push(LineReportRow {
            i: field(&rec, 0, line)?,
            j: field(&rec, 1, line)?,
            abs_angle: field(&rec, 2, line)?,
            sigma: field(&rec, 3, line)?,
            f: field(&rec, 4, line)?,
            flow_bound: field(&rec, 5, line)?,
            f_a: field(&rec, 6, line)?,
            f_b: field(&rec, 7, line)?,
            p_out_bound,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub without: LineReportRow,
    pub with: LineReportRow,
}

/// Pairs the rows of two dispatches line by line, ordered by the baseline's `f`.
pub fn compare_rows(without: &[LineReportRow], with: &[LineReportRow]) -> Vec<CompareRow> {
    without
        .iter()
        .map(|w| CompareRow {
            without: w.clone(),
            with: with
                .iter()
                .find(|r| (r.i, r.j) == (w.i, w.j))
                .expect("same network on both sides")
                .clone(),
        })
        .collect()
}

pub const COMPARE_HEADER: [&str; 13] = [
    "i",
    "j",
    "without_abs_angle",
    "without_sigma",
    "without_f",
    "with_abs_angle",
    "with_sigma",
    "with_f",
    "without_f_a",
    "without_f_b",
    "with_f_a",
    "with_f_b",
    "with_p_out_bound",
];

pub fn write_compare_csv<W: Write>(out: W, rows: &[CompareRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(COMPARE_HEADER).map_err(csv_err)?;
    for r in rows {
        let (a, b) = (&r.without, &r.with);
        w.write_record([
            a.i.to_string(),
            a.j.to_string(),
            fmt_angle(a.abs_angle),
            fmt_angle(a.sigma),
            fmt_angle(a.f),
            fmt_angle(b.abs_angle),
            fmt_angle(b.sigma),
            fmt_angle(b.f),
            fmt_prob(a.f_a),
            fmt_prob(a.f_b),
            fmt_prob(b.f_a),
            fmt_prob(b.f_b),
            b.p_out_bound.map(fmt_prob).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// The stored `epsilon,r_epsilon` table.
pub fn write_thresholds_csv<W: Write>(out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(["epsilon", "r_epsilon"]).map_err(csv_err)?;
    for (eps, r) in THRESHOLD_TABLE {
        w.write_record([format!("{eps:.3}"), format!("{r:.2}")]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub const SIMULATION_HEADER: [&str; 9] = [
    "i",
    "j",
    "m",
    "sigma_theory",
    "sigma_empirical",
    "exit_frequency",
    "exit_half_width",
    "effective_samples",
    "samples",
];

pub fn write_simulation_csv<W: Write>(
    out: W,
    labels: &[(u32, u32)],
    sigma_theory: &[f64],
    report: &SimulationReport,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(SIMULATION_HEADER).map_err(csv_err)?;
    for (k, line) in report.lines.iter().enumerate() {
        let (p, hw) = crate::montecarlo::exit_frequency(report, k);
        w.write_record([
            labels[k].0.to_string(),
            labels[k].1.to_string(),
            fmt_angle(line.mean),
            fmt_angle(sigma_theory[k]),
            fmt_angle(line.std()),
            fmt_prob(p),
            fmt_prob(hw),
            format!("{:.0}", line.effective_samples()),
            line.count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// A comma-separated decision vector such as `12,12,12`.
pub fn parse_start_vector(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Domain("empty start vector".into()));
    }
    text.split(',')
        .map(|t| {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad number `{}` in start vector", t.trim())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Domain("start vector must be finite".into()))
            }
        })
        .collect()
}

/// One start vector per line; blank lines and `#` comments are skipped.
pub fn parse_start_file(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .enumerate()
        .filter_map(|(n, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            (!l.is_empty()).then(|| {
                parse_start_vector(l).map_err(|e| Error::Domain(format!("line {}: {e}", n + 1)))
            })
        })
        .collect()
}
