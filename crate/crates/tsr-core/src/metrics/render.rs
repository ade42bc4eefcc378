//! CSV and SVG report files.
//!
//! All floats are written with 6 decimal places, so every CSV parses back to
//! exactly the values it was written from and re-rendering identical inputs
//! produces byte-identical files. The SVGs are self-contained SVG 1.1 with a
//! deterministic element order and no external assets.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{ClassMetrics, ClassificationReport, ConfusionMatrix, CurvePoint};

pub const CURVES_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,lr";

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn bad_csv(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedCsv {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------- curves CSV

pub fn write_curves_csv(path: &Path, curves: &[CurvePoint]) -> Result<()> {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for p in curves {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.epoch,
            f6(p.train_loss as f64),
            f6(p.train_acc as f64),
            f6(p.val_loss as f64),
            f6(p.val_acc as f64),
            f6(p.lr as f64),
        );
    }
    write_file(path, &out)
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CURVES_HEADER => {}
        Some((_, other)) => return Err(bad_csv(path, 1, format!("unexpected header {other:?}"))),
        None => return Err(bad_csv(path, 1, "missing header")),
    }
    let mut curves = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(bad_csv(path, idx + 1, format!("expected 6 fields, got {}", fields.len())));
        }
        let parse_f = |s: &str| -> Result<f32> {
            s.parse::<f32>()
                .map_err(|_| bad_csv(path, idx + 1, format!("unparsable float {s:?}")))
        };
        curves.push(CurvePoint {
            epoch: fields[0]
                .parse()
                .map_err(|_| bad_csv(path, idx + 1, format!("unparsable epoch {:?}", fields[0])))?,
            train_loss: parse_f(fields[1])?,
            train_acc: parse_f(fields[2])?,
            val_loss: parse_f(fields[3])?,
            val_acc: parse_f(fields[4])?,
            lr: parse_f(fields[5])?,
        });
    }
    Ok(curves)
}

// ------------------------------------------------------- confusion matrix CSV

/// 44x44 cells: a header row and column of class ids around the counts grid.
pub fn write_confusion_csv(path: &Path, cm: &ConfusionMatrix) -> Result<()> {
    let n = cm.n_classes();
    let mut out = String::from("class");
    for p in 0..n {
        let _ = write!(out, ",{p}");
    }
    out.push('\n');
    for t in 0..n {
        let _ = write!(out, "{t}");
        for p in 0..n {
            let _ = write!(out, ",{}", cm.get(t, p));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_confusion_csv(path: &Path) -> Result<ConfusionMatrix> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| bad_csv(path, 1, "missing header"))?;
    let n = header.split(',').count() - 1;
    if n == 0 || !header.starts_with("class") {
        return Err(bad_csv(path, 1, "expected `class,0,1,...` header"));
    }
    let mut counts = Vec::with_capacity(n * n);
    let mut rows = 0usize;
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label = fields
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad_csv(path, idx + 1, "missing row label"))?;
        if label != rows {
            return Err(bad_csv(path, idx + 1, format!("expected row {rows}, got {label}")));
        }
        let mut got = 0usize;
        for field in fields {
            let v: u64 = field
                .parse()
                .map_err(|_| bad_csv(path, idx + 1, format!("unparsable count {field:?}")))?;
            counts.push(v);
            got += 1;
        }
        if got != n {
            return Err(bad_csv(path, idx + 1, format!("expected {n} counts, got {got}")));
        }
        rows += 1;
    }
    if rows != n {
        return Err(bad_csv(path, rows + 1, format!("expected {n} rows, got {rows}")));
    }
    ConfusionMatrix::from_counts(n, counts)
}

// --------------------------------------------------- classification report CSV

/// Per-class rows, then `macro_avg`, `weighted_avg`, and `accuracy` footer
/// rows; zero-division classes are flagged in a trailing comment.
pub fn write_report_csv(path: &Path, report: &ClassificationReport) -> Result<()> {
    let mut out = String::from("class,precision,recall,f1,support\n");
    for (c, m) in report.per_class.iter().enumerate() {
        let _ = writeln!(
            out,
            "{c},{},{},{},{}",
            f6(m.precision),
            f6(m.recall),
            f6(m.f1),
            m.support
        );
    }
    let total = report.total_support();
    let _ = writeln!(
        out,
        "macro_avg,{},{},{},{total}",
        f6(report.macro_precision),
        f6(report.macro_recall),
        f6(report.macro_f1)
    );
    let _ = writeln!(
        out,
        "weighted_avg,{},{},{},{total}",
        f6(report.weighted_precision),
        f6(report.weighted_recall),
        f6(report.weighted_f1)
    );
    let _ = writeln!(out, "accuracy,,,{},{total}", f6(report.accuracy));
    if report.zero_division_classes.is_empty() {
        out.push_str("# zero_division_classes: none\n");
    } else {
        let list: Vec<String> = report
            .zero_division_classes
            .iter()
            .map(|c| c.to_string())
            .collect();
        let _ = writeln!(out, "# zero_division_classes: {}", list.join(";"));
    }
    write_file(path, &out)
}

pub fn read_report_csv(path: &Path) -> Result<ClassificationReport> {
    let text = read_file(path)?;
    let mut per_class = Vec::new();
    let mut macro_row = None;
    let mut weighted_row = None;
    let mut accuracy = None;
    let mut zero_division = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "class,precision,recall,f1,support" {
                return Err(bad_csv(path, 1, format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# zero_division_classes:") {
            let rest = rest.trim();
            if rest != "none" {
                for part in rest.split(';') {
                    zero_division.push(part.parse::<usize>().map_err(|_| {
                        bad_csv(path, idx + 1, format!("unparsable class id {part:?}"))
                    })?);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad_csv(path, idx + 1, format!("expected 5 fields, got {}", fields.len())));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| bad_csv(path, idx + 1, format!("unparsable float {s:?}")))
        };
        match fields[0] {
            "macro_avg" => {
                macro_row = Some((parse_f(fields[1])?, parse_f(fields[2])?, parse_f(fields[3])?))
            }
            "weighted_avg" => {
                weighted_row =
                    Some((parse_f(fields[1])?, parse_f(fields[2])?, parse_f(fields[3])?))
            }
            "accuracy" => accuracy = Some(parse_f(fields[3])?),
            class => {
                let c: usize = class.parse().map_err(|_| {
                    bad_csv(path, idx + 1, format!("unparsable class id {class:?}"))
                })?;
                if c != per_class.len() {
                    return Err(bad_csv(path, idx + 1, format!("rows out of order at class {c}")));
                }
                per_class.push(ClassMetrics {
                    precision: parse_f(fields[1])?,
                    recall: parse_f(fields[2])?,
                    f1: parse_f(fields[3])?,
                    support: fields[4].parse().map_err(|_| {
                        bad_csv(path, idx + 1, format!("unparsable support {:?}", fields[4]))
                    })?,
                });
            }
        }
    }
    let (macro_precision, macro_recall, macro_f1) =
        macro_row.ok_or_else(|| bad_csv(path, 1, "missing macro_avg footer"))?;
    let (weighted_precision, weighted_recall, weighted_f1) =
        weighted_row.ok_or_else(|| bad_csv(path, 1, "missing weighted_avg footer"))?;
    let accuracy = accuracy.ok_or_else(|| bad_csv(path, 1, "missing accuracy footer"))?;
    Ok(ClassificationReport {
        per_class,
        accuracy,
        macro_precision,
        macro_recall,
        macro_f1,
        weighted_precision,
        weighted_recall,
        weighted_f1,
        zero_division_classes: zero_division,
    })
}

// ---------------------------------------------------- per-class accuracy CSV

pub fn write_per_class_csv(path: &Path, per_class: &[f64]) -> Result<()> {
    let mut out = String::from("class,accuracy\n");
    for (c, a) in per_class.iter().enumerate() {
        let _ = writeln!(out, "{c},{}", f6(*a));
    }
    write_file(path, &out)
}

pub fn read_per_class_csv(path: &Path) -> Result<Vec<f64>> {
    let text = read_file(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "class,accuracy" {
                return Err(bad_csv(path, 1, format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (class, value) = line
            .split_once(',')
            .ok_or_else(|| bad_csv(path, idx + 1, "expected `class,accuracy`"))?;
        let c: usize = class
            .parse()
            .map_err(|_| bad_csv(path, idx + 1, format!("unparsable class id {class:?}")))?;
        if c != values.len() {
            return Err(bad_csv(path, idx + 1, format!("rows out of order at class {c}")));
        }
        values.push(
            value
                .parse::<f64>()
                .map_err(|_| bad_csv(path, idx + 1, format!("unparsable accuracy {value:?}")))?,
        );
    }
    Ok(values)
}

// ------------------------------------------------------------------ SVG charts

const SVG_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn svg_open(width: usize, height: usize, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n\
         <text x=\"12\" y=\"20\" font-family=\"monospace\" font-size=\"14\">{title}</text>\n"
    )
}

/// Polyline chart of one or more named series over a shared x axis.
pub fn svg_line_chart(title: &str, series: &[(&str, Vec<f64>)]) -> String {
    let (width, height) = (800usize, 300usize);
    let (left, top, right, bottom) = (60.0, 36.0, 20.0, 30.0);
    let plot_w = width as f64 - left - right;
    let plot_h = height as f64 - top - bottom;
    let mut out = svg_open(width, height, title);
    let _ = writeln!(
        out,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#888888\"/>"
    );
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    if n > 0 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (_, values) in series {
            for &v in values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo).abs() < 1e-12 {
            hi = lo + 1.0;
        }
        let x_at = |i: usize| left + plot_w * if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
        let y_at = |v: f64| top + plot_h * (1.0 - (v - lo) / (hi - lo));
        for (s, (name, values)) in series.iter().enumerate() {
            let color = SVG_COLORS[s % SVG_COLORS.len()];
            let points: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| format!("{:.2},{:.2}", x_at(i), y_at(v)))
                .collect();
            if !points.is_empty() {
                let _ = writeln!(
                    out,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                    points.join(" ")
                );
            }
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" fill=\"{color}\">{name}</text>",
                left + 8.0 + 110.0 * s as f64,
                top - 6.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"4\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\">{:.4}</text>",
            top + 10.0,
            hi
        );
        let _ = writeln!(
            out,
            "<text x=\"4\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\">{:.4}</text>",
            top + plot_h,
            lo
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bar chart over class indices.
pub fn svg_bar_chart(title: &str, values: &[f64]) -> String {
    let n = values.len().max(1);
    let bar_w = 14.0;
    let (left, top, bottom) = (50.0, 36.0, 26.0);
    let width = (left + n as f64 * bar_w + 20.0) as usize;
    let height = 280usize;
    let plot_h = height as f64 - top - bottom;
    let mut out = svg_open(width, height, title);
    for (i, &v) in values.iter().enumerate() {
        let clamped = v.clamp(0.0, 1.0);
        let h = plot_h * clamped;
        let x = left + i as f64 * bar_w;
        let y = top + plot_h - h;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"/>",
            bar_w - 2.0,
            SVG_COLORS[0]
        );
        if i % 5 == 0 {
            let _ = writeln!(
                out,
                "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"9\">{i}</text>",
                height as f64 - 8.0
            );
        }
    }
    let _ = writeln!(
        out,
        "<line x1=\"{left}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#888888\"/>",
        top + plot_h,
        left + n as f64 * bar_w,
        top + plot_h
    );
    out.push_str("</svg>\n");
    out
}

/// Heat grid of the confusion matrix; cell opacity scales with its share of
/// the row maximum.
pub fn svg_confusion_heatmap(title: &str, cm: &ConfusionMatrix) -> String {
    let n = cm.n_classes();
    let cell = 10.0;
    let (left, top) = (40.0, 40.0);
    let width = (left + n as f64 * cell + 20.0) as usize;
    let height = (top + n as f64 * cell + 20.0) as usize;
    let mut out = svg_open(width, height, title);
    for t in 0..n {
        let row_max = (0..n).map(|p| cm.get(t, p)).max().unwrap_or(0);
        for p in 0..n {
            let v = cm.get(t, p);
            if v == 0 {
                continue;
            }
            let opacity = v as f64 / row_max as f64;
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" fill-opacity=\"{opacity:.3}\"/>",
                left + p as f64 * cell,
                top + t as f64 * cell,
                SVG_COLORS[0]
            );
        }
        if t % 5 == 0 {
            let _ = writeln!(
                out,
                "<text x=\"8\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"9\">{t}</text>",
                top + t as f64 * cell + 8.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"32\" font-family=\"monospace\" font-size=\"9\">{t}</text>",
                left + t as f64 * cell
            );
        }
    }
    let _ = writeln!(
        out,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#888888\"/>",
        n as f64 * cell,
        n as f64 * cell
    );
    out.push_str("</svg>\n");
    out
}

/// Grouped precision/recall/F1 bars per class.
pub fn svg_report_chart(title: &str, report: &ClassificationReport) -> String {
    let n = report.per_class.len().max(1);
    let group_w = 12.0;
    let (left, top, bottom) = (50.0, 36.0, 26.0);
    let width = (left + n as f64 * group_w + 120.0) as usize;
    let height = 280usize;
    let plot_h = height as f64 - top - bottom;
    let mut out = svg_open(width, height, title);
    let series = ["precision", "recall", "f1"];
    for (s, name) in series.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"11\" fill=\"{}\">{name}</text>",
            left + n as f64 * group_w + 10.0,
            top + 14.0 * s as f64,
            SVG_COLORS[s]
        );
    }
    for (c, m) in report.per_class.iter().enumerate() {
        for (s, v) in [m.precision, m.recall, m.f1].into_iter().enumerate() {
            let h = plot_h * v.clamp(0.0, 1.0);
            let x = left + c as f64 * group_w + s as f64 * (group_w / 3.0);
            let y = top + plot_h - h;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{}\"/>",
                group_w / 3.0 - 0.5,
                SVG_COLORS[s]
            );
        }
        if c % 5 == 0 {
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"9\">{c}</text>",
                left + c as f64 * group_w,
                height as f64 - 8.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Two-panel loss/accuracy chart for the training curves.
pub fn svg_curves_chart(curves: &[CurvePoint]) -> String {
    let loss = svg_line_chart(
        "loss per epoch",
        &[
            ("train_loss", curves.iter().map(|p| p.train_loss as f64).collect()),
            ("val_loss", curves.iter().map(|p| p.val_loss as f64).collect()),
        ],
    );
    let acc = svg_line_chart(
        "accuracy per epoch",
        &[
            ("train_acc", curves.iter().map(|p| p.train_acc as f64).collect()),
            ("val_acc", curves.iter().map(|p| p.val_acc as f64).collect()),
        ],
    );
    // stack the two panels into one self-contained document
    let mut out = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"800\" height=\"620\" viewBox=\"0 0 800 620\">\n",
    );
    out.push_str("<g>\n");
    out.push_str(&loss);
    out.push_str("</g>\n<g transform=\"translate(0,310)\">\n");
    out.push_str(&acc);
    out.push_str("</g>\n</svg>\n");
    out
}

/// File names written by [`render_reports`].
pub const CONFUSION_CSV: &str = "confusion_matrix.csv";
pub const REPORT_CSV: &str = "classification_report.csv";
pub const PER_CLASS_CSV: &str = "per_class_accuracy.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const CONFUSION_SVG: &str = "confusion_matrix.svg";
pub const REPORT_SVG: &str = "classification_report.svg";
pub const PER_CLASS_SVG: &str = "per_class_accuracy.svg";
pub const CURVES_SVG: &str = "curves.svg";

/// Writes every CSV and SVG artifact into `out_dir`, returning the paths.
pub fn render_reports(
    cm: &ConfusionMatrix,
    report: &ClassificationReport,
    curves: &[CurvePoint],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let per_class = super::per_class_accuracy(cm);

    write_confusion_csv(&out_dir.join(CONFUSION_CSV), cm)?;
    write_report_csv(&out_dir.join(REPORT_CSV), report)?;
    write_per_class_csv(&out_dir.join(PER_CLASS_CSV), &per_class)?;
    write_curves_csv(&out_dir.join(CURVES_CSV), curves)?;

    let svgs = [
        (CONFUSION_SVG, svg_confusion_heatmap("confusion matrix", cm)),
        (REPORT_SVG, svg_report_chart("classification report", report)),
        (PER_CLASS_SVG, svg_bar_chart("per-class accuracy", &per_class)),
        (CURVES_SVG, svg_curves_chart(curves)),
    ];
    for (name, contents) in &svgs {
        write_file(&out_dir.join(name), contents)?;
    }

    let mut written: Vec<PathBuf> = [CONFUSION_CSV, REPORT_CSV, PER_CLASS_CSV, CURVES_CSV]
        .iter()
        .map(|name| out_dir.join(name))
        .collect();
    written.extend(svgs.iter().map(|(name, _)| out_dir.join(name)));
    Ok(written)
}
