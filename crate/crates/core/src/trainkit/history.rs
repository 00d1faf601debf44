use std::fmt::Write as _;
use std::path::Path;

use super::{EpochRecord, Result, TrainError, TrainHistory};

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,val_precision,val_recall,seconds";

fn empty() -> TrainError {
    TrainError::History("history is empty".into())
}

pub fn history_to_csv(history: &TrainHistory) -> Result<String> {
    if history.is_empty() {
        return Err(empty());
    }
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in &history.rows {
        writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.val_precision, r.val_recall, r.seconds
        )
        .expect("writing to a String");
    }
    Ok(out)
}

pub fn parse_history_csv(text: &str) -> Result<TrainHistory> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == HISTORY_HEADER => {}
        _ => return Err(TrainError::History(format!("expected header `{HISTORY_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let bad = |what: &str| TrainError::History(format!("line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(bad(&format!("expected 8 fields, found {}", fields.len())));
        }
        let epoch: u32 = fields[0].parse().map_err(|_| bad("epoch is not an integer"))?;
        let mut v = [0.0f64; 7];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| bad(&format!("`{f}` is not a number")))?;
        }
        rows.push(EpochRecord {
            epoch,
            train_loss: v[0],
            train_acc: v[1],
            val_loss: v[2],
            val_acc: v[3],
            val_precision: v[4],
            val_recall: v[5],
            seconds: v[6],
        });
    }
    if rows.is_empty() {
        return Err(empty());
    }
    Ok(TrainHistory { rows })
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 400.0;
const PANEL_W: f64 = 400.0;
const PANEL_H: f64 = 280.0;
const TOP: f64 = 50.0;
const LEFTS: [f64; 2] = [70.0, 550.0];
const TRAIN_COLOR: &str = "#1f77b4";
const VAL_COLOR: &str = "#d62728";

struct Panel<'a> {
    title: &'a str,
    y_label: &'a str,
    y_max: f64,
    train: Vec<f64>,
    val: Vec<f64>,
}

fn panel(out: &mut String, left: f64, epochs: &[u32], p: &Panel<'_>) {
    let bottom = TOP + PANEL_H;
    let first = f64::from(epochs[0]);
    let last = f64::from(*epochs.last().expect("non-empty"));
    let x_of = |e: u32| {
        if last > first {
            left + (f64::from(e) - first) / (last - first) * PANEL_W
        } else {
            left + PANEL_W / 2.0
        }
    };
    let y_of = |v: f64| bottom - (v.clamp(0.0, p.y_max) / p.y_max) * PANEL_H;

    let _ = writeln!(out, r#"<g class="panel">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16">{}</text>"#,
        left + PANEL_W / 2.0,
        TOP - 20.0,
        p.title
    );
    let _ = writeln!(
        out,
        r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/>"#,
        left + PANEL_W
    );
    let _ = writeln!(out, r#"<line x1="{left:.2}" y1="{TOP:.2}" x2="{left:.2}" y2="{bottom:.2}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = p.y_max * f64::from(k) / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{v:.2}</text>"#,
            left - 6.0,
            y + 4.0
        );
    }
    for e in [epochs[0], *epochs.last().expect("non-empty")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{e}</text>"#,
            x_of(e),
            bottom + 16.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">epoch</text>"#,
        left + PANEL_W / 2.0,
        bottom + 36.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        left - 45.0,
        TOP + PANEL_H / 2.0,
        left - 45.0,
        TOP + PANEL_H / 2.0,
        p.y_label
    );
    for (series, color, name) in [(&p.train, TRAIN_COLOR, "train"), (&p.val, VAL_COLOR, "validation")] {
        let points: Vec<String> =
            epochs.iter().zip(series.iter()).map(|(&e, &v)| format!("{:.2},{:.2}", x_of(e), y_of(v))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="{name}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
    }
    for (i, (color, name)) in [(TRAIN_COLOR, "train"), (VAL_COLOR, "validation")].iter().enumerate() {
        let y = TOP + 14.0 + 18.0 * i as f64;
        let x = left + PANEL_W - 110.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12">{name}</text>"#, x + 26.0, y + 4.0);
    }
    let _ = writeln!(out, "</g>");
}

/// Two-panel line chart (accuracy and loss, train and validation).
pub fn render_history_svg(history: &TrainHistory) -> Result<String> {
    if history.is_empty() {
        return Err(empty());
    }
    let epochs: Vec<u32> = history.rows.iter().map(|r| r.epoch).collect();
    let max_loss = history
        .rows
        .iter()
        .flat_map(|r| [r.train_loss, r.val_loss])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let panels = [
        Panel {
            title: "Accuracy",
            y_label: "accuracy",
            y_max: 1.0,
            train: history.rows.iter().map(|r| r.train_acc).collect(),
            val: history.rows.iter().map(|r| r.val_acc).collect(),
        },
        Panel {
            title: "Loss",
            y_label: "loss",
            y_max: if max_loss > 0.0 { max_loss * 1.05 } else { 1.0 },
            train: history.rows.iter().map(|r| r.train_loss).collect(),
            val: history.rows.iter().map(|r| r.val_loss).collect(),
        },
    ];
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, left) in panels.iter().zip(LEFTS) {
        panel(&mut out, left, &epochs, p);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes the CSV and SVG renderings of `history`.
pub fn export_history(history: &TrainHistory, csv_path: &Path, svg_path: &Path) -> Result<()> {
    let csv = history_to_csv(history)?;
    let svg = render_history_svg(history)?;
    for (path, text) in [(csv_path, csv), (svg_path, svg)] {
        std::fs::write(path, text)
            .map_err(|e| TrainError::Io { path: path.display().to_string(), message: e.to_string() })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(n: u32) -> TrainHistory {
        TrainHistory {
            rows: (1..=n)
                .map(|e| EpochRecord {
                    epoch: e,
                    train_loss: 1.0 / f64::from(e),
                    train_acc: 0.5 + 0.01 * f64::from(e),
                    val_loss: 1.2 / f64::from(e),
                    val_acc: 0.45 + 0.01 * f64::from(e),
                    val_precision: 0.7,
                    val_recall: 0.6,
                    seconds: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn csv_has_one_row_per_epoch() {
        let csv = history_to_csv(&history(50)).unwrap();
        assert_eq!(csv.lines().count(), 51);
        assert_eq!(csv.lines().next().unwrap(), HISTORY_HEADER);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,1.000000,0.510000,"));
    }

    #[test]
    fn empty_history_is_rejected() {
        assert!(history_to_csv(&TrainHistory::default()).is_err());
        assert!(render_history_svg(&TrainHistory::default()).is_err());
        assert!(parse_history_csv(HISTORY_HEADER).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_history_csv("a,b\n1,2\n").is_err());
        assert!(parse_history_csv(&format!("{HISTORY_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_history_csv(&format!("{HISTORY_HEADER}\nx,0,0,0,0,0,0,0\n")).is_err());
    }

    #[test]
    fn single_epoch_renders() {
        let svg = render_history_svg(&history(1)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
    }
}
