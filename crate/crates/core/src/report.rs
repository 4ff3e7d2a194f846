//! CSV tables and SVG charts for training and evaluation results.
//!
//! CSV schemas (header rows are fixed):
//!
//! - history: `epoch,train_total,train_l_m,train_l_s,train_acc_m,train_acc_s,val_total,val_l_m,val_l_s,val_acc_m,val_acc_s,best_val_total`
//! - accuracy: `snr_db,n,mod_correct,sig_correct,both_correct,mod_acc,sig_acc,both_acc`
//! - confusion: `true_class,<predicted class names...>`, one row per true class
//! - sweep: `label,w_m,w_s,params,epochs_run,best_epoch,best_val_total,snr_db,n,mod_acc,sig_acc,both_acc`
//! - sweep history: `label,` followed by the history columns

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::eval::{Confusion, EvalReport};
use crate::experiment::SweepRun;
use crate::signal::{Modulation, SignalClass};
use crate::train::{EpochRecord, TrainHistory};

pub const HISTORY_HEADER: [&str; 12] = [
    "epoch",
    "train_total",
    "train_l_m",
    "train_l_s",
    "train_acc_m",
    "train_acc_s",
    "val_total",
    "val_l_m",
    "val_l_s",
    "val_acc_m",
    "val_acc_s",
    "best_val_total",
];

pub const ACCURACY_HEADER: [&str; 8] = [
    "snr_db",
    "n",
    "mod_correct",
    "sig_correct",
    "both_correct",
    "mod_acc",
    "sig_acc",
    "both_acc",
];

pub const SWEEP_HEADER: [&str; 12] = [
    "label",
    "w_m",
    "w_s",
    "params",
    "epochs_run",
    "best_epoch",
    "best_val_total",
    "snr_db",
    "n",
    "mod_acc",
    "sig_acc",
    "both_acc",
];

fn history_fields(e: &EpochRecord) -> Vec<String> {
    let t = &e.train;
    let v = &e.val;
    let mut out = vec![e.epoch.to_string()];
    for x in [
        t.total,
        t.l_m,
        t.l_s,
        t.acc_m,
        t.acc_s,
        v.total,
        v.l_m,
        v.l_s,
        v.acc_m,
        v.acc_s,
        e.best_val_total,
    ] {
        out.push(x.to_string());
    }
    out
}

pub fn write_history_csv<W: Write>(w: W, h: &TrainHistory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HISTORY_HEADER)?;
    for e in &h.epochs {
        out.write_record(history_fields(e))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_accuracy_csv<W: Write>(w: W, r: &EvalReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ACCURACY_HEADER)?;
    for (snr, c) in &r.per_snr {
        out.write_record([
            snr.to_string(),
            c.n.to_string(),
            c.mod_correct.to_string(),
            c.sig_correct.to_string(),
            c.both_correct.to_string(),
            c.mod_acc().to_string(),
            c.sig_acc().to_string(),
            c.both_acc().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_confusion_csv<W: Write>(w: W, names: &[&str], m: &Confusion) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["true_class"];
    header.extend_from_slice(names);
    out.write_record(&header)?;
    for (name, row) in names.iter().zip(m) {
        let mut rec = vec![name.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per run at `snr`, or one row per run and SNR when `snr` is `None`.
pub fn write_sweep_csv<W: Write>(w: W, runs: &[SweepRun], snr: Option<i32>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in runs {
        let best = r.history.best().map_or(f64::NAN, |e| e.val.total);
        let snrs = match snr {
            Some(s) => vec![s],
            None => r.report.snrs(),
        };
        for s in snrs {
            let c = r.report.at(s).copied().unwrap_or_default();
            out.write_record([
                r.label.clone(),
                r.weights.w_m().to_string(),
                r.weights.w_s().to_string(),
                r.param_count.to_string(),
                r.history.epochs.len().to_string(),
                r.history.best_epoch.to_string(),
                best.to_string(),
                s.to_string(),
                c.n.to_string(),
                c.mod_acc().to_string(),
                c.sig_acc().to_string(),
                c.both_acc().to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_history_csv<W: Write>(w: W, runs: &[SweepRun]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["label"];
    header.extend_from_slice(&HISTORY_HEADER);
    out.write_record(&header)?;
    for r in runs {
        for e in &r.history.epochs {
            let mut rec = vec![r.label.clone()];
            rec.extend(history_fields(e));
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn modulation_names() -> Vec<&'static str> {
    Modulation::ALL.iter().map(|m| m.name()).collect()
}

pub fn signal_names() -> Vec<&'static str> {
    SignalClass::ALL.iter().map(|s| s.name()).collect()
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart with linear axes. `y_range` defaults to the data range.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], y_range: Option<(f64, f64)>) -> String {
    let (w, h) = (640.0, 420.0);
    let (l, r, t, b) = (64.0, 150.0, 40.0, 52.0);
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1) = pts().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (mut y0, mut y1) = y_range.unwrap_or_else(|| pts().fold((f64::MAX, f64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1))));
    if x0 > x1 {
        (x0, x1) = (0.0, 1.0);
    }
    if y0 > y1 {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let pw = w - l - r;
    let ph = h - t - b;
    let sx = |x: f64| l + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| t + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(s, r##"<line x1="{px:.1}" y1="{t}" x2="{px:.1}" y2="{}" stroke="#ddd"/>"##, t + ph);
        let _ = writeln!(s, r##"<line x1="{l}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#ddd"/>"##, l + pw);
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"#, t + ph + 16.0, fmt_tick(xv));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, py + 4.0, fmt_tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, l + pw / 2.0, h - 12.0, esc(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        t + ph / 2.0,
        esc(y_label)
    );
    for (i, se) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = se
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline class="series" fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, path.join(" "));
        for p in &path {
            let (px, py) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{px}" cy="{py}" r="2.5" fill="{c}"/>"#);
        }
        let ly = t + 10.0 + 18.0 * i as f64;
        let lx = l + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, esc(&se.name));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || (v.fract() == 0.0 && v.abs() < 1e6) {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Confusion heatmap, cells shaded by row-normalised count.
pub fn heatmap_svg(title: &str, labels: &[&str], m: &Confusion) -> String {
    let n = labels.len();
    let cell = 40.0;
    let (l, t) = (110.0, 110.0);
    let w = l + cell * n as f64 + 20.0;
    let h = t + cell * n as f64 + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, esc(title));
    for (i, name) in labels.iter().enumerate() {
        let c = l + cell * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{c:.1}" y="{0}" text-anchor="start" transform="rotate(-60 {c:.1} {0})">{1}</text>"#,
            t - 6.0,
            esc(name)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, l - 6.0, t + cell * (i as f64 + 0.5) + 4.0, esc(name));
    }
    for (i, row) in m.iter().enumerate().take(n) {
        let total: u64 = row.iter().sum();
        for (j, &v) in row.iter().enumerate().take(n) {
            let f = if total == 0 { 0.0 } else { v as f64 / total as f64 };
            let shade = (255.0 * (1.0 - f)).round() as u8;
            let (x, y) = (l + cell * j as f64, t + cell * i as f64);
            let _ = writeln!(
                s,
                r##"<rect class="cell" data-row="{i}" data-col="{j}" data-count="{v}" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="#888"/>"##
            );
            if v > 0 {
                let fill = if f > 0.5 { "white" } else { "black" };
                let _ = writeln!(
                    s,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="{fill}">{v}</text>"#,
                    x + cell / 2.0,
                    y + cell / 2.0 + 4.0
                );
            }
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">predicted</text>"#, l + cell * n as f64 / 2.0, h - 12.0);
    s.push_str("</svg>\n");
    s
}

/// Accuracy-vs-SNR chart for both tasks.
pub fn accuracy_chart_svg(title: &str, r: &EvalReport) -> String {
    let pts = |f: fn(&crate::eval::Counts) -> f64| r.per_snr.iter().map(|(s, c)| (*s as f64, f(c))).collect();
    line_chart_svg(
        title,
        "SNR (dB)",
        "accuracy",
        &[
            Series {
                name: "modulation".into(),
                points: pts(|c| c.mod_acc()),
            },
            Series {
                name: "signal".into(),
                points: pts(|c| c.sig_acc()),
            },
        ],
        Some((0.0, 1.0)),
    )
}
