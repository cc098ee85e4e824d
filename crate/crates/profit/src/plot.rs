//! Delta curves: a TSV with one line per (task, backend, K) and a static SVG
//! line chart. The TSV is the artifact other tools should read.

use std::fmt::Write as _;

use profit_core::eval::{DeltaRow, DeltaTable};
use profit_core::training::Shots;
use thiserror::Error;

use crate::tsv::TsvError;

pub const DELTA_HEADER: &str = "task\tbackend\tK\tdelta\tprofit\tvanilla";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlotError {
    #[error("nothing to plot")]
    EmptyInput,
}

pub fn render_delta_tsv(table: &DeltaTable) -> String {
    let mut out = format!("{DELTA_HEADER}\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.task_id, r.backend, r.shots, r.delta, r.profit, r.vanilla
        );
    }
    out
}

pub fn parse_delta_tsv(text: &str) -> Result<DeltaTable, TsvError> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(DELTA_HEADER) {
        return Err(TsvError::MalformedRow {
            line: 1,
            reason: "bad delta header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let bad = |reason: &str| TsvError::MalformedRow {
            line: i + 1,
            reason: reason.into(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        rows.push(DeltaRow {
            task_id: f[0].into(),
            backend: f[1].into(),
            shots: f[2].parse().map_err(|_| bad("bad K"))?,
            delta: num(f[3])?,
            profit: num(f[4])?,
            vanilla: num(f[5])?,
        });
    }
    Ok(DeltaTable::from_rows(rows))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Horizontal position in log2(K) units; the full-data point sits one unit
/// past the largest K.
fn x_units(shots: Shots, max_log: f64) -> f64 {
    match shots {
        Shots::K(k) => (k.max(1) as f64).log2(),
        Shots::Full => max_log + 1.0,
    }
}

pub fn render_svg(table: &DeltaTable) -> Result<String, PlotError> {
    if table.is_empty() {
        return Err(PlotError::EmptyInput);
    }
    let max_log = table
        .rows
        .iter()
        .filter_map(|r| match r.shots {
            Shots::K(k) => Some((k.max(1) as f64).log2()),
            Shots::Full => None,
        })
        .fold(0.0, f64::max);
    let xs: Vec<f64> = table.rows.iter().map(|r| x_units(r.shots, max_log)).collect();
    let (x_lo, x_hi) = xs.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let (mut y_lo, mut y_hi) = table
        .rows
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), r| (a.min(r.delta), b.max(r.delta)));
    if y_hi - y_lo < 1e-12 {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    let px = |x: f64| {
        if x_hi - x_lo < 1e-12 {
            WIDTH / 2.0
        } else {
            MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN)
        }
    };
    let py = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let zero = py(0.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{zero:.1}" x2="{:.1}" y2="{zero:.1}" stroke="#999" stroke-dasharray="4"/>"##,
        WIDTH - MARGIN
    );
    let mut ticks: Vec<Shots> = table.rows.iter().map(|r| r.shots).collect();
    ticks.sort();
    ticks.dedup();
    for t in ticks {
        let x = px(x_units(t, max_log));
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{t}</text>"#,
            HEIGHT - MARGIN + 16.0
        );
    }
    for (y, label) in [(y_lo, y_lo), (y_hi, y_hi), (0.0, 0.0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{label:.2}</text>"#,
            MARGIN - 6.0,
            py(y) + 4.0
        );
    }
    for (i, (task, backend, rows)) in table.series().into_iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", px(x_units(r.shots, max_log)), py(r.delta)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        for p in &points {
            let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{task} {backend}</text>"#,
            MARGIN + 8.0,
            MARGIN - 20.0 + 14.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: Shots, delta: f64) -> DeltaRow {
        DeltaRow {
            task_id: "synth".into(),
            backend: "reference".into(),
            shots: k,
            profit: 0.5 + delta,
            vanilla: 0.5,
            delta,
        }
    }

    #[test]
    fn tsv_round_trip() {
        let t = DeltaTable::from_rows(vec![row(Shots::K(1), 0.059), row(Shots::Full, -0.01)]);
        assert_eq!(parse_delta_tsv(&render_delta_tsv(&t)).unwrap(), t);
    }

    #[test]
    fn single_point_chart() {
        let svg = render_svg(&DeltaTable::from_rows(vec![row(Shots::K(8), 0.1)])).unwrap();
        assert!(svg.contains("<polyline") && !svg.contains("NaN"));
    }

    #[test]
    fn all_zero_is_flat() {
        let t = DeltaTable::from_rows(vec![row(Shots::K(1), 0.0), row(Shots::K(64), 0.0)]);
        let svg = render_svg(&t).unwrap();
        let zero = format!("{:.1}", HEIGHT / 2.0);
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(&format!(",{zero}")).count(), 2, "{line}");
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(render_svg(&DeltaTable::default()), Err(PlotError::EmptyInput));
    }
}
