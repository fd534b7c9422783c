//! Trajectory CSVs, run summaries and SVG charts.

use std::fmt::Write as _;
use std::path::Path;

use pimaw_core::sim::{self, L2Check, Trajectory};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Fraction of the run used for steady-state statistics.
pub const FINAL_WINDOW: f64 = 0.2;
/// Length of the window after each active-set switch of `x*`, seconds.
pub const SWITCH_WINDOW: f64 = 2.0;

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf)
}

/// `Display` for `f64` is the shortest string that parses back exactly.
fn fmt(v: f64) -> String {
    v.to_string()
}

pub fn trajectory_csv(traj: &Trajectory, columns: &[String]) -> CliResult<Vec<u8>> {
    let err = sim::tracking_error(traj);
    let n = traj.x.first().map_or(0, |x| x.len());
    let has = |c: &str| columns.iter().any(|x| x == c);
    let mut header: Vec<String> = Vec::new();
    for c in ["t", "err", "znorm", "bnorm"] {
        if has(c) {
            header.push(c.to_string());
        }
    }
    if has("x") {
        header.extend((0..n).map(|i| format!("x_{i}")));
    }
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(&header)?;
        for k in 0..traj.len() {
            let mut row = Vec::with_capacity(header.len());
            if has("t") {
                row.push(fmt(traj.t[k]));
            }
            if has("err") {
                row.push(fmt(err[k]));
            }
            if has("znorm") {
                row.push(fmt(traj.z[k].norm()));
            }
            if has("bnorm") {
                row.push(fmt(traj.b[k].norm()));
            }
            if has("x") {
                row.extend(traj.x[k].iter().map(|&v| fmt(v)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Named numeric columns read back from a trajectory CSV.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut r = csv::ReaderBuilder::new()
            .from_path(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| CliError::Input(format!("{}: {e}", path.display()))))
                .collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Trapezoidal `∫ s²` over the sample grid.
pub fn integral_sq(t: &[f64], s: &[f64]) -> f64 {
    (1..t.len()).map(|k| 0.5 * (t[k] - t[k - 1]) * (s[k - 1] * s[k - 1] + s[k] * s[k])).sum()
}

/// Prefix L2 check from the `znorm`/`bnorm` columns of a trajectory CSV.
pub fn l2_check_from_table(table: &CsvTable, gamma: f64) -> CliResult<L2Check> {
    let need = |c: &str| table.column(c).ok_or_else(|| CliError::Input(format!("trajectory lacks column {c}")));
    let (t, z, b) = (need("t")?, need("znorm")?, need("bnorm")?);
    let g2 = gamma * gamma;
    let (mut lhs, mut rhs, mut worst_ratio, mut first_violation) = (0.0, 0.0, 0.0f64, None);
    for k in 1..t.len() {
        let h = t[k] - t[k - 1];
        lhs += 0.5 * h * (z[k - 1].powi(2) + z[k].powi(2));
        rhs += 0.5 * h * g2 * (b[k - 1].powi(2) + b[k].powi(2));
        if rhs > 0.0 {
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
        if first_violation.is_none() && lhs > rhs * (1.0 + sim::L2_SLACK) {
            first_violation = Some(t[k]);
        }
    }
    Ok(L2Check { lhs, rhs, worst_ratio, first_violation, pass: first_violation.is_none() })
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub rho: Option<f64>,
    pub csv: String,
    pub samples: usize,
    /// Mean `‖x − x*‖` over the final window.
    pub final_window_mean_error: f64,
    /// Max `‖x − x*‖` over the final window.
    pub final_window_max_error: f64,
    /// Max `‖x − x*‖` over the whole run.
    pub peak_error: f64,
    /// Max `‖x − x*‖` within the switching windows.
    pub switching_peak_error: Option<f64>,
    pub integral_z_sq: f64,
    /// Absent for OP-GD, or when the controller starts away from zero.
    pub l2_check: Option<L2Check>,
    pub diverged_at: Option<f64>,
}

pub fn summarize(traj: &Trajectory, csv: &str, gamma: Option<f64>, switches: &[f64]) -> MethodSummary {
    let err = sim::tracking_error(traj);
    let znorm: Vec<f64> = traj.z.iter().map(|z| z.norm()).collect();
    let l2_check = gamma.and_then(|g| sim::l2_performance_check(traj, g).ok());
    MethodSummary {
        method: traj.method.name().to_string(),
        rho: traj.rho,
        csv: csv.to_string(),
        samples: traj.len(),
        final_window_mean_error: sim::final_window_mean(&traj.t, &err, FINAL_WINDOW),
        final_window_max_error: sim::final_window_max(&traj.t, &err, FINAL_WINDOW),
        peak_error: err.iter().copied().fold(0.0, f64::max),
        switching_peak_error: sim::windowed_peak(&traj.t, &err, switches, SWITCH_WINDOW),
        integral_z_sq: integral_sq(&traj.t, &znorm),
        l2_check,
        diverged_at: traj.divergence,
    }
}

pub fn to_json_bytes<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Log-scale line chart of one column against `t` for several CSVs.
pub fn svg_chart(title: &str, column: &str, series: &[(String, CsvTable)]) -> CliResult<String> {
    let (w, h, ml, mr, mt, mb) = (800.0, 420.0, 70.0, 150.0, 40.0, 50.0);
    let floor = 1e-8;
    let mut data = Vec::new();
    for (name, table) in series {
        let t = table.column("t").ok_or_else(|| CliError::Input(format!("{name}: no t column")))?;
        let y = table.column(column).ok_or_else(|| CliError::Input(format!("{name}: no {column} column")))?;
        data.push((name, t, y.into_iter().map(|v| v.max(floor).log10()).collect::<Vec<_>>()));
    }
    let t_max = data.iter().flat_map(|d| d.1.last().copied()).fold(1e-9, f64::max);
    let y_hi = data.iter().flat_map(|d| d.2.iter().copied()).fold(floor.log10(), f64::max).ceil();
    let y_lo = data.iter().flat_map(|d| d.2.iter().copied()).fold(y_hi, f64::min).floor().min(y_hi - 1.0);
    let px = |t: f64| ml + (w - ml - mr) * t / t_max;
    let py = |y: f64| mt + (h - mt - mb) * (y_hi - y) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#, (ml + w - mr) / 2.0);
    let mut d = y_lo as i64;
    while d <= y_hi as i64 {
        let y = py(d as f64);
        let _ = writeln!(s, r##"<line x1="{ml}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, w - mr);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, ml - 6.0, y + 4.0);
        d += 1;
    }
    let step = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0].into_iter().find(|s| t_max / s <= 10.0).unwrap_or(t_max / 5.0);
    let mut t = 0.0;
    while t <= t_max + 1e-9 {
        let x = px(t);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, h - mb + 18.0);
        t += step;
    }
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, w - ml - mr, h - mt - mb);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t [s]</text>"#, (ml + w - mr) / 2.0, h - 12.0);
    for (i, (name, t, y)) in data.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = t.iter().zip(y).map(|(&t, &y)| format!("{:.2},{:.2}", px(t), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
        let ly = mt + 16.0 + 20.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - mr + 10.0, w - mr + 30.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{name}</text>"#, w - mr + 36.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
