//! Artifact files and the append-only run log.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::run::{fmt, Artifacts, Plot, Table};

pub const RUNS_LOG: &str = "runs.log";

#[derive(Debug, Serialize, Deserialize)]
pub struct LogEntry {
    pub hash: String,
    pub command: String,
    pub seed: u64,
    pub lambda: f64,
    pub status: String,
    pub timestamp: u64,
}

/// Hashes recorded as completed in `root/runs.log`.
pub fn completed(root: &Path) -> Result<BTreeSet<String>> {
    let path = root.join(RUNS_LOG);
    let file = match fs::File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeSet::new()),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    let mut done = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        // a torn final line from an interrupted run is not a completion
        if let Ok(entry) = serde_json::from_str::<LogEntry>(&line) {
            if entry.status == "ok" {
                done.insert(entry.hash);
            }
        }
    }
    Ok(done)
}

pub fn append_log(root: &Path, cfg: &RunConfig, hash: &str) -> Result<()> {
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let entry = LogEntry {
        hash: hash.to_string(),
        command: cfg.command.name().to_string(),
        seed: cfg.seed,
        lambda: cfg.model.lambda,
        status: "ok".into(),
        timestamp,
    };
    let path = root.join(RUNS_LOG);
    // an interrupted writer may have left a partial line behind
    let torn = fs::read(&path).map(|b| b.last().is_some_and(|&c| c != b'\n')).unwrap_or(false);
    let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
    if torn {
        writeln!(f)?;
    }
    writeln!(f, "{}", serde_json::to_string(&entry)?)?;
    Ok(())
}

fn write_table(path: &Path, t: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&t.header)?;
    for row in &t.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the artifacts of one run into `root/<hash>/` and return that directory.
pub fn write_run(root: &Path, cfg: &RunConfig, hash: &str, art: &Artifacts) -> Result<PathBuf> {
    let dir = root.join(hash);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_table(&dir.join("results.csv"), &art.results)?;
    if let Some(c) = &art.coords {
        write_table(&dir.join("coords.csv"), c)?;
    }
    let n_max = if cfg.model.lambda > 0.0 && art.window > 0.0 { cfg.model.n_max(art.window).ok() } else { None };
    let report: Value = json!({
        "config_hash": hash,
        "seed": cfg.seed,
        "config": serde_json::from_str::<Value>(&cfg.canonical())?,
        "truncation": { "eps_trunc": cfg.model.eps_trunc, "window": art.window, "n_max": n_max },
        "result": art.report,
    });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    if let Some(p) = &art.plot {
        fs::write(dir.join("plot.svg"), render_svg(p)?)?;
    }
    Ok(dir)
}

const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn render_svg(plot: &Plot) -> Result<String> {
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| anyhow::anyhow!("{e}"))?;
        let pts = || plot.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = span(pts().map(|p| p.0));
        let (y0, y1) = span(pts().flat_map(|p| [p.1 - p.2, p.1 + p.2]));
        let mut chart = ChartBuilder::on(&root)
            .caption(&plot.title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        chart
            .configure_mesh()
            .x_desc(plot.x_label)
            .y_desc(plot.y_label)
            .x_label_formatter(&|v| fmt((v * 1e4).round() / 1e4))
            .y_label_formatter(&|v| fmt((v * 1e4).round() / 1e4))
            .draw()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        for (k, s) in plot.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            chart
                .draw_series(LineSeries::new(s.points.iter().map(|p| (p.0, p.1)), color.stroke_width(2)))
                .map_err(|e| anyhow::anyhow!("{e}"))?
                .label(s.name.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
            chart
                .draw_series(s.points.iter().map(|&(x, y, e)| PathElement::new(vec![(x, y - e), (x, y + e)], color)))
                .map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        root.present().map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    Ok(buf)
}
