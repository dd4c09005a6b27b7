//! Files written by the commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pgmm_core::data::Dataset;
use pgmm_core::model::Trajectory;
use pgmm_core::postprocess::{PosteriorSummary, CONVERGENCE_THRESHOLD};
use pgmm_core::sampler::ChainDraws;

use crate::error::{CliError, CliResult};

pub const RAW_CHAIN_DIR: &str = "chains";
pub const RELABELED_CHAIN_DIR: &str = "relabeled";
const CURVE_POINTS: usize = 101;

/// Writes below one root directory; every file is written once, in full.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<OutDir> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e))?;
        text.push('\n');
        self.write(rel, text)
    }
}

pub fn chain_file(dir: &str, chain_id: usize) -> String {
    format!("{dir}/chain_{chain_id}.csv")
}

pub fn write_chains(out: &OutDir, dir: &str, chains: &[ChainDraws]) -> CliResult<()> {
    for c in chains {
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        out.write(&chain_file(dir, c.chain_id), buf)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PsrfEntry<'a> {
    parameter: &'a str,
    psrf: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Diagnostics<'a> {
    n_chains: usize,
    n_draws: usize,
    threshold: f64,
    converged: bool,
    mean_psrf: Option<f64>,
    mpsrf: Option<f64>,
    psrf: Vec<PsrfEntry<'a>>,
}

pub fn diagnostics_json(summary: &PosteriorSummary) -> serde_json::Value {
    let conv = summary.convergence.as_ref();
    let d = Diagnostics {
        n_chains: summary.n_chains,
        n_draws: summary.n_draws,
        threshold: CONVERGENCE_THRESHOLD,
        converged: summary.is_converged(),
        mean_psrf: conv.and_then(|c| c.mean_psrf),
        mpsrf: conv.and_then(|c| c.mpsrf),
        psrf: conv
            .map(|c| {
                c.psrf
                    .iter()
                    .map(|(name, v)| PsrfEntry { parameter: name, psrf: *v })
                    .collect()
            })
            .unwrap_or_default(),
    };
    serde_json::to_value(d).expect("diagnostics serialize")
}

/// Mean trajectory of one class on the original time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCurve {
    pub class: usize,
    pub points: Vec<(f64, f64)>,
}

/// Class-mean curves at the modal changepoint count, on an even grid over
/// `[t0, t1]`.
pub fn class_curves(summary: &PosteriorSummary, t0: f64, t1: f64) -> Vec<ClassCurve> {
    let shift = summary.time_shift;
    summary
        .classes
        .iter()
        .enumerate()
        .map(|(c, cls)| {
            let n_active = cls.modal_count;
            let beta: Vec<f64> = cls.intercept_and_slopes.iter().map(|p| p.reported().mean).collect();
            let lambda: Vec<f64> = cls.cp_means.iter().map(|p| p.reported().mean - shift).collect();
            let traj = Trajectory::from_parts(&beta, &lambda, n_active);
            let points = (0..CURVE_POINTS)
                .map(|j| {
                    let t = t0 + (t1 - t0) * j as f64 / (CURVE_POINTS - 1) as f64;
                    (t, traj.eval(t - shift))
                })
                .collect();
            ClassCurve { class: c, points }
        })
        .collect()
}

pub fn curves_csv(curves: &[ClassCurve]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::runtime(e);
    w.write_record(["class", "time", "mean"]).map_err(err)?;
    for curve in curves {
        for &(t, y) in &curve.points {
            w.write_record([(curve.class + 1).to_string(), t.to_string(), y.to_string()])
                .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Observed series in thin lines coloured by modal class, class means in bold.
pub fn spaghetti_svg(d: &Dataset, summary: &PosteriorSummary, curves: &[ClassCurve]) -> String {
    let xs = d.subjects.iter().flat_map(|s| s.times.iter().map(|t| t + d.time_shift));
    let ys = d.subjects.iter().flat_map(|s| s.outcomes.iter().copied());
    let cy = curves.iter().flat_map(|c| c.points.iter().map(|p| p.1));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut y0, mut y1) = ys.chain(cy).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;
    let polyline = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
        pts.map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect::<Vec<_>>().join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">Observed trajectories and class means</text>"#,
        MARGIN_L + pw / 2.0
    );

    let _ = writeln!(svg, r##"<g stroke="#cccccc" stroke-width="0.5">"##);
    for t in nice_ticks(x0, x1, 8) {
        let _ = writeln!(svg, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#, sx(t), MARGIN_T, MARGIN_T + ph);
    }
    for t in nice_ticks(y0, y1, 6) {
        let _ = writeln!(svg, r#"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}"/>"#, sy(t), MARGIN_L, MARGIN_L + pw);
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g fill="none" stroke-width="1" stroke-opacity="0.35">"#);
    for (s, subj) in d.subjects.iter().zip(&summary.subjects) {
        let colour = PALETTE[subj.modal_class % PALETTE.len()];
        let mut pts = s.times.iter().map(|t| t + d.time_shift).zip(s.outcomes.iter().copied());
        let _ = writeln!(svg, r#"<polyline stroke="{colour}" points="{}"/>"#, polyline(&mut pts));
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, r#"<g fill="none" stroke-width="3.5">"#);
    for c in curves {
        let colour = PALETTE[c.class % PALETTE.len()];
        let mut pts = c.points.iter().copied();
        let _ = writeln!(svg, r#"<polyline stroke="{colour}" points="{}"/>"#, polyline(&mut pts));
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    for t in nice_ticks(x0, x1, 8) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(t),
            MARGIN_T + ph + 18.0,
            tick_label(t)
        );
    }
    for t in nice_ticks(y0, y1, 6) {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            sy(t) + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">outcome</text>"#,
        MARGIN_T + ph / 2.0
    );

    for (c, cls) in summary.classes.iter().enumerate() {
        let y = MARGIN_T + 14.0 + 20.0 * c as f64;
        let x = MARGIN_L + pw + 12.0;
        let colour = PALETTE[c % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="3.5"/>"#,
            x + 24.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}">class {} ({:.2})</text>"#,
            x + 30.0,
            y + 4.0,
            c + 1,
            cls.mixing.reported().mean
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Summary files shared by `fit` and `report`. `data` is on the fitted
/// (shifted) time axis.
pub fn write_summary_outputs(
    out: &OutDir,
    data: &Dataset,
    chains: &[ChainDraws],
    summary: &PosteriorSummary,
) -> CliResult<()> {
    write_chains(out, RELABELED_CHAIN_DIR, chains)?;
    out.write_json("summary.json", summary)?;
    out.write("summary.txt", summary.render_table())?;
    out.write_json("diagnostics.json", &diagnostics_json(summary))?;
    let t0 = data.min_time() + data.time_shift;
    let t1 = data.max_time() + data.time_shift;
    let curves = class_curves(summary, t0, t1);
    out.write("trajectories.csv", curves_csv(&curves)?)?;
    out.write("fit.svg", spaghetti_svg(data, summary, &curves))?;
    Ok(())
}
