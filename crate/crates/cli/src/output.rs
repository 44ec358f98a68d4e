//! Result files: CSV, JSON records and log-log SVG plots, written atomically.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use amoo_core::Trajectory;

use crate::run::{RunOutcome, Verdict};

/// Writes to a temporary file next to `path`, syncs it, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| io::Error::other("output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// 17 significant digits, enough to round-trip any f64.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub fn csv_header(m: usize) -> String {
    let mut h = String::from("run_id,k,mg_xk,mg_xbar_k,step_size,selected_index");
    for i in 0..m {
        write!(h, ",w{i}").unwrap();
    }
    h.push('\n');
    h
}

/// Appends one row per recorded step of a trajectory.
pub fn csv_rows(out: &mut String, run_id: &str, t: &Trajectory, mg_xbar: &[f64]) {
    for k in 0..t.len() {
        write!(
            out,
            "{run_id},{},{},{},{},",
            k + 1,
            float(t.per_step_max_gap[k]),
            float(mg_xbar[k]),
            float(t.step_sizes[k])
        )
        .unwrap();
        if let Some(i) = t.selected[k] {
            write!(out, "{i}").unwrap();
        }
        for w in t.weights[k].as_slice() {
            write!(out, ",{}", float(*w)).unwrap();
        }
        out.push('\n');
    }
}

/// CSV of several runs over the same objective set, in the given order.
pub fn trajectories_csv<'a>(runs: impl IntoIterator<Item = (&'a str, &'a Trajectory, &'a [f64])>) -> String {
    let runs: Vec<_> = runs.into_iter().collect();
    let m = runs.first().and_then(|(_, t, _)| t.weights.first()).map_or(0, |w| w.len());
    let mut out = csv_header(m);
    for (id, t, mg) in runs {
        csv_rows(&mut out, id, t, mg);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub mg_xk: f64,
    pub mg_xbar_k: f64,
    pub step_size: f64,
    pub selected_index: Option<usize>,
    pub weights: Vec<f64>,
}

/// JSON mirror of one run's CSV rows plus its verdict.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub run_id: String,
    pub config_hash: String,
    pub pass: bool,
    pub error: Option<String>,
    pub stopped_at: Option<usize>,
    pub verdict: Option<Verdict>,
    pub steps: Vec<StepRecord>,
}

impl ResultRecord {
    pub fn new(run_id: &str, config_hash: &str, outcome: &RunOutcome) -> Self {
        match outcome {
            Ok(r) => {
                let t = &r.trajectory;
                let steps = (0..t.len())
                    .map(|k| StepRecord {
                        k: k + 1,
                        mg_xk: t.per_step_max_gap[k],
                        mg_xbar_k: r.mg_xbar[k],
                        step_size: t.step_sizes[k],
                        selected_index: t.selected[k],
                        weights: t.weights[k].as_slice().to_vec(),
                    })
                    .collect();
                ResultRecord {
                    run_id: run_id.into(),
                    config_hash: config_hash.into(),
                    pass: r.pass(),
                    error: None,
                    stopped_at: t.stopped_at,
                    verdict: Some(r.verdict.clone()),
                    steps,
                }
            }
            Err(e) => ResultRecord {
                run_id: run_id.into(),
                config_hash: config_hash.into(),
                pass: false,
                error: Some(e.clone()),
                stopped_at: None,
                verdict: None,
                steps: vec![],
            },
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

/// A polyline on a log-log plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Self-contained log-log SVG with reference slopes -1/2 and -1.
/// Non-positive and non-finite points are skipped.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (80.0, 170.0, 40.0, 60.0);
    let clean: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
                .map(|(x, y)| (x.log10(), y.log10()))
                .collect()
        })
        .collect();
    let all = clean.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath>"#).unwrap();
    for d in (x0 as i32)..=(x1 as i32) {
        let x = sx(d as f64);
        writeln!(s, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, top + ph).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, top + ph + 18.0).unwrap();
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = sy(d as f64);
        writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, left + pw).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0).unwrap();
    }
    writeln!(s, r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##).unwrap();
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 15.0, escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    )
    .unwrap();

    // Reference slopes through the first point of the first nonempty series.
    if let Some(&(ax, ay)) = clean.iter().find_map(|c| c.first()) {
        for (slope, label, dash) in [(-0.5, "slope -1/2", "6,4"), (-1.0, "slope -1", "2,3")] {
            let y_end = ay + slope * (x1 - ax);
            writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#777" stroke-dasharray="{dash}" clip-path="url(#plot)"/>"##,
                sx(ax),
                sy(ay),
                sx(x1),
                sy(y_end)
            )
            .unwrap();
            let ly = sy(y_end.max(y0)).clamp(top + 10.0, top + ph);
            writeln!(s, r##"<text x="{:.2}" y="{:.2}" fill="#777">{label}</text>"##, left + pw + 6.0, ly).unwrap();
        }
    }

    for (i, (c, meta)) in clean.iter().zip(series).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !c.is_empty() {
            let pts: Vec<String> = c.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" clip-path="url(#plot)"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        let ly = top + 14.0 + 16.0 * i as f64;
        writeln!(s, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#, left + pw + 6.0, ly + 60.0, left + pw + 24.0, ly + 60.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, left + pw + 28.0, ly + 64.0, escape(&meta.label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
