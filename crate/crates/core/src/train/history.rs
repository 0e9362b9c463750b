use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, TrainError};

pub const CSV_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryFormat {
    Csv,
    Json,
}

impl HistoryFormat {
    /// `.json` selects JSON, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => HistoryFormat::Json,
            _ => HistoryFormat::Csv,
        }
    }
}

/// Six significant digits, `%g` style.
pub(crate) fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if !(-4..6).contains(&exp) {
        let (mantissa, _) = sci.split_at(sci.find('e').unwrap());
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            sig6(r.train_loss),
            sig6(r.train_acc),
            sig6(r.val_loss),
            sig6(r.val_acc)
        );
    }
    out
}

pub fn history_to_json(history: &[EpochRecord]) -> String {
    serde_json::to_string_pretty(history).expect("records are always serializable")
}

pub fn export_history(history: &[EpochRecord], path: &Path, format: HistoryFormat) -> Result<(), TrainError> {
    if history.is_empty() {
        return Err(TrainError::EmptySet("history"));
    }
    let text = match format {
        HistoryFormat::Csv => history_to_csv(history),
        HistoryFormat::Json => history_to_json(history),
    };
    fs::write(path, text).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })
}

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 50.0;

struct Series<'a> {
    name: &'a str,
    class: &'a str,
    color: &'a str,
    values: Vec<f64>,
}

fn panel(svg: &mut String, x0: f64, title: &str, y_label: &str, epochs: &[usize], series: &[Series<'_>]) {
    let all = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = lo.min(0.0);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let first = *epochs.first().unwrap_or(&1) as f64;
    let last = *epochs.last().unwrap_or(&1) as f64;
    let span = (last - first).max(1.0);
    let plot_w = PANEL_W - 2.0 * MARGIN;
    let plot_h = PANEL_H - 2.0 * MARGIN;
    let px = |e: usize| x0 + MARGIN + (e as f64 - first) / span * plot_w;
    let py = |v: f64| MARGIN + (1.0 - (v - lo) / (hi - lo)) * plot_h;

    let _ = writeln!(svg, r#"<g class="panel">"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{title}</text>"#,
        x0 + PANEL_W / 2.0,
        MARGIN / 2.0
    );
    let (ax, ay, bx) = (x0 + MARGIN, PANEL_H - MARGIN, x0 + PANEL_W - MARGIN);
    let _ = writeln!(
        svg,
        r#"<line x1="{ax:.1}" y1="{ay:.1}" x2="{bx:.1}" y2="{ay:.1}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{ax:.1}" y1="{MARGIN:.1}" x2="{ax:.1}" y2="{ay:.1}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">epoch</text>"#,
        x0 + PANEL_W / 2.0,
        PANEL_H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.1} {:.1})">{y_label}</text>"#,
        x0 + 14.0,
        PANEL_H / 2.0,
        x0 + 14.0,
        PANEL_H / 2.0
    );
    for (v, anchor_y) in [(lo, ay), (hi, MARGIN)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            ax - 4.0,
            anchor_y + 4.0,
            sig6(v)
        );
    }
    for (e, anchor) in [(first as usize, "start"), (last as usize, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}" font-size="10">{e}</text>"#,
            px(e),
            ay + 14.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let points: Vec<String> = epochs
            .iter()
            .zip(&s.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&e, &v)| format!("{:.2},{:.2}", px(e), py(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="{}" fill="none" stroke="{}" points="{}"/>"#,
            s.class,
            s.color,
            points.join(" ")
        );
        for (&e, &v) in epochs.iter().zip(&s.values).filter(|(_, v)| v.is_finite()) {
            let _ = writeln!(
                svg,
                r#"<circle class="point {}" cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
                s.class,
                px(e),
                py(v),
                s.color
            );
        }
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" font-size="11" fill="{}">{}</text>"#,
            bx, s.color, s.name
        );
    }
    let _ = writeln!(svg, "</g>");
}

pub fn curves_svg(history: &[EpochRecord]) -> String {
    let epochs: Vec<usize> = history.iter().map(|r| r.epoch).collect();
    let col = |f: fn(&EpochRecord) -> f64| history.iter().map(f).collect::<Vec<_>>();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        2.0 * PANEL_W,
        PANEL_H,
        2.0 * PANEL_W,
        PANEL_H
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(
        &mut svg,
        0.0,
        "Loss",
        "cross-entropy",
        &epochs,
        &[
            Series {
                name: "train",
                class: "train-loss",
                color: "#1f77b4",
                values: col(|r| r.train_loss),
            },
            Series {
                name: "validation",
                class: "val-loss",
                color: "#ff7f0e",
                values: col(|r| r.val_loss),
            },
        ],
    );
    panel(
        &mut svg,
        PANEL_W,
        "Accuracy",
        "accuracy",
        &epochs,
        &[
            Series {
                name: "train",
                class: "train-acc",
                color: "#1f77b4",
                values: col(|r| r.train_acc),
            },
            Series {
                name: "validation",
                class: "val-acc",
                color: "#ff7f0e",
                values: col(|r| r.val_acc),
            },
        ],
    );
    svg.push_str("</svg>\n");
    svg
}

/// Two-panel SVG of loss and accuracy against epoch.
pub fn render_curves(history: &[EpochRecord], path: &Path) -> Result<(), TrainError> {
    if history.is_empty() {
        return Err(TrainError::EmptySet("history"));
    }
    fs::write(path, curves_svg(history)).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })
}
