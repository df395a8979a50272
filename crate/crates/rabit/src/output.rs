//! Rendering of reports as CSV, JSON or plain-text tables.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::Format;
use crate::engine::SweepRow;
use crate::error::AppError;
use crate::report::{EvaluateReport, SampleSizeReport, SimulationReport};

/// Shortest decimal that round-trips, with a period separator and no
/// grouping. Non-finite values print as `inf`, `-inf` or `nan`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String, AppError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String, AppError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| AppError::io("<csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Plain-text table with right-aligned columns.
pub fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let parts: Vec<String> =
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule);
    for r in rows {
        line(&mut out, r);
    }
    out
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

pub fn render_evaluate(r: &EvaluateReport, format: Format) -> Result<String, AppError> {
    let with_ops = r.forecast.is_some();
    match format {
        Format::Json => json(r),
        Format::Csv => {
            let mut header = strings(&[
                "mask",
                "alpha_star",
                "mask_probability",
                "null_contribution",
                "power_contribution",
            ]);
            if with_ops {
                header.extend(strings(&["duration", "participants"]));
            }
            let mut rows: Vec<Vec<String>> = r
                .per_mask
                .iter()
                .map(|m| {
                    let mut row = vec![
                        m.mask.clone(),
                        num(r.alpha_star),
                        num(m.mask_probability),
                        num(m.null_contribution),
                        num(m.power_contribution),
                    ];
                    if with_ops {
                        row.push(num(m.duration.unwrap_or(f64::NAN)));
                        row.push(num(m.participants.unwrap_or(f64::NAN)));
                    }
                    row
                })
                .collect();
            let total_p: f64 = r.per_mask.iter().map(|m| m.mask_probability).sum();
            let mut total =
                vec!["total".into(), num(r.alpha_star), num(total_p), num(r.type1), num(r.power)];
            if let Some(f) = &r.forecast {
                total.push(num(f.expected_duration));
                total.push(num(f.expected_participants));
            }
            rows.push(total);
            csv_string(&header, &rows)
        }
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "alpha*        {}", fixed(r.alpha_star));
            let _ = writeln!(out, "type 1 error  {}", fixed(r.type1));
            let _ = writeln!(out, "power         {}", fixed(r.power));
            let _ = writeln!(out, "gini          {}", fixed(r.gini));
            let _ = writeln!(out, "z_t           {}", fixed(r.z_t));
            let _ = writeln!(out, "z*            {}", fixed(r.z_star));
            if let Some(f) = &r.forecast {
                let _ = writeln!(out, "E(D)          {}", fixed(f.expected_duration));
                let _ = writeln!(out, "E(P)          {}", fixed(f.expected_participants));
                let _ = writeln!(
                    out,
                    "95% CI D      [{}, {}]  unscaled [{}, {}]",
                    fixed(f.duration_ci.lower),
                    fixed(f.duration_ci.upper),
                    fixed(f.duration_ci_unscaled.lower),
                    fixed(f.duration_ci_unscaled.upper)
                );
                let _ = writeln!(
                    out,
                    "95% CI P      [{}, {}]  unscaled [{}, {}]",
                    fixed(f.participants_ci.lower),
                    fixed(f.participants_ci.upper),
                    fixed(f.participants_ci_unscaled.lower),
                    fixed(f.participants_ci_unscaled.upper)
                );
            }
            out.push('\n');
            let mut header = strings(&["mask", "P(mask)", "null", "power"]);
            if with_ops {
                header.extend(strings(&["duration", "participants"]));
            }
            let rows: Vec<Vec<String>> = r
                .per_mask
                .iter()
                .map(|m| {
                    let mut row = vec![
                        m.mask.clone(),
                        fixed(m.mask_probability),
                        fixed(m.null_contribution),
                        fixed(m.power_contribution),
                    ];
                    if let (Some(d), Some(p)) = (m.duration, m.participants) {
                        row.push(fixed(d));
                        row.push(fixed(p));
                    }
                    row
                })
                .collect();
            out.push_str(&text_table(&header, &rows));
            Ok(out)
        }
    }
}

pub fn sweep_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=k).map(|i| format!("allocation_{i}")).collect();
    h.extend(strings(&["gini", "alpha_star", "power"]));
    h
}

pub fn sweep_record(row: &SweepRow) -> Vec<String> {
    let mut r: Vec<String> = row.allocation.iter().map(|n| n.to_string()).collect();
    r.push(num(row.gini));
    r.push(num(row.alpha_star));
    r.push(num(row.power));
    r
}

pub fn render_sweep(k: usize, rows: &[SweepRow], format: Format) -> Result<String, AppError> {
    match format {
        Format::Json => json(&rows),
        Format::Csv => csv_string(&sweep_header(k), &rows.iter().map(sweep_record).collect::<Vec<_>>()),
        Format::Table => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut v: Vec<String> = r.allocation.iter().map(|n| n.to_string()).collect();
                    v.extend([fixed(r.gini), fixed(r.alpha_star), fixed(r.power)]);
                    v
                })
                .collect();
            Ok(text_table(&sweep_header(k), &body))
        }
    }
}

pub fn render_simulation(r: &SimulationReport, format: Format) -> Result<String, AppError> {
    // Long form: one quantity per row.
    let mut rows: Vec<Vec<String>> = vec![
        vec!["replicates".into(), r.replicates.to_string(), String::new(), String::new()],
        vec!["seed".into(), r.seed.to_string(), String::new(), String::new()],
        vec!["alpha_star".into(), num(r.alpha_star), String::new(), String::new()],
        vec![
            "rejection_rate".into(),
            num(r.rejection_rate.mean),
            num(r.rejection_rate.se),
            num(r.analytic_rejection_rate),
        ],
    ];
    if let Some(d) = r.duration {
        rows.push(vec![
            "duration".into(),
            num(d.mean),
            num(d.se),
            r.analytic_duration.map(num).unwrap_or_default(),
        ]);
    }
    rows.push(vec![
        "participants".into(),
        num(r.participants.mean),
        num(r.participants.se),
        String::new(),
    ]);
    for m in &r.mask_frequencies {
        rows.push(vec![format!("mask_{}", m.mask), num(m.frequency), num(m.se), num(m.expected)]);
    }
    let header = strings(&["quantity", "estimate", "se", "analytic"]);
    match format {
        Format::Json => json(r),
        Format::Csv => csv_string(&header, &rows),
        Format::Table => {
            let mut out = format!("mode: {}\n", r.mode);
            out.push_str(&text_table(&header, &rows));
            Ok(out)
        }
    }
}

pub fn render_sample_size(r: &SampleSizeReport, format: Format) -> Result<String, AppError> {
    let header = strings(&["target_power", "n_total", "power", "alpha_star"]);
    let row = vec![num(r.target_power), r.n_total.to_string(), num(r.power), num(r.alpha_star)];
    match format {
        Format::Json => json(r),
        Format::Csv => csv_string(&header, &[row]),
        Format::Table => Ok(text_table(&header, &[row])),
    }
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), AppError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| AppError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| AppError::io("<stdout>", e))?;
            out.flush().map_err(|e| AppError::io("<stdout>", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_locale_free_and_round_trip() {
        for x in [0.1, 1e-12, 12345678.5, 0.014340001234567891, -2.5] {
            let s = num(x);
            assert!(!s.contains(','));
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn sweep_csv_header() {
        let rows = vec![SweepRow { allocation: vec![10, 140], gini: 0.1, alpha_star: 0.02, power: 0.8 }];
        let s = render_sweep(2, &rows, Format::Csv).unwrap();
        assert_eq!(s.lines().next().unwrap(), "allocation_1,allocation_2,gini,alpha_star,power");
        assert_eq!(s.lines().nth(1).unwrap(), "10,140,0.1,0.02,0.8");
    }
}
