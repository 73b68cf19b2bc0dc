//! Dispatch of one configuration to the library and collection of its outputs.

use boolperc::analysis::{fit_exponential_decay, ratio_curve, renorm_report, sharpness_scan, verify_heavy_tail_lemma};
use boolperc::connectivity::vacant_connected;
use boolperc::estimators::{
    estimate_events, estimate_theta_curve, find_lambda_c, find_lambda_tilde, replicates, CriticalMethod, Query,
};
use boolperc::osss_lab::{osss_check_many, russo_check};
use boolperc::sampler::sample_config;
use boolperc::stats::Tally;
use boolperc::{CellCoord, Estimate, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};

/// A flat table; every cell is already formatted.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// One named polyline with optional error bars.
#[derive(Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug)]
pub struct Plot {
    pub title: String,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub series: Vec<Series>,
}

#[derive(Debug)]
pub struct Artifacts {
    pub results: Table,
    pub report: Value,
    pub plot: Option<Plot>,
    pub coords: Option<Table>,
    /// largest radius any replicate was sampled on, for the truncation budget
    pub window: f64,
}

/// Shortest decimal that round-trips.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

fn est_cells(e: &Estimate) -> [String; 3] {
    [fmt(e.mean), fmt(e.stderr), e.n.to_string()]
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialize")
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

fn curve_series(name: impl Into<String>, xs: &[f64], ys: &[Estimate]) -> Series {
    Series { name: name.into(), points: xs.iter().zip(ys).map(|(&x, e)| (x, e.mean, e.stderr)).collect() }
}

pub fn execute(cfg: &RunConfig) -> Result<Artifacts> {
    let model = &cfg.model;
    model.validate()?;
    let (n, seed) = (cfg.n_reps, cfg.seed);
    let lambda = model.lambda;
    Ok(match &cfg.command {
        Command::Theta { s_grid } => {
            let curve = estimate_theta_curve(model, s_grid, n, seed)?;
            let mut t = Table::new(&["s", "lambda", "mean", "stderr", "n", "seed"]);
            for (&s, e) in s_grid.iter().zip(&curve.values) {
                let [m, se, k] = est_cells(e);
                t.push(vec![fmt(s), fmt(lambda), m, se, k, seed.to_string()]);
            }
            Artifacts {
                plot: Some(Plot {
                    title: format!("theta_s at lambda={lambda}"),
                    x_label: "s",
                    y_label: "theta_s",
                    series: vec![curve_series("theta", s_grid, &curve.values)],
                }),
                report: to_value(&curve),
                results: t,
                coords: None,
                window: max_of(s_grid),
            }
        }
        Command::Crossing { r_list } => {
            let queries: Vec<Query> = r_list.iter().map(|&r| Query::crossing(r)).collect();
            let ests = estimate_events(model, &queries, n, seed)?;
            let mut t = Table::new(&["r", "lambda", "mean", "stderr", "n", "seed"]);
            for (&r, e) in r_list.iter().zip(&ests) {
                let [m, se, k] = est_cells(e);
                t.push(vec![fmt(r), fmt(lambda), m, se, k, seed.to_string()]);
            }
            Artifacts {
                plot: Some(Plot {
                    title: format!("P[B_r <-> dB_2r] at lambda={lambda}"),
                    x_label: "r",
                    y_label: "crossing probability",
                    series: vec![curve_series("crossing", r_list, &ests)],
                }),
                report: json!({ "r_list": r_list, "estimates": ests }),
                results: t,
                coords: None,
                window: 2.0 * max_of(r_list),
            }
        }
        Command::Critical { method, r_list, bracket, threshold } => {
            let est = match method {
                CriticalMethod::CrossingBisection => find_lambda_tilde(model, r_list, *bracket, n, seed)?,
                CriticalMethod::ThetaThreshold => {
                    let r = max_of(r_list);
                    find_lambda_c(model, r, *bracket, n, seed, *threshold)?
                }
            };
            let mut t = Table::new(&["r", "lambda", "mean", "stderr", "n", "lambda_hat_r"]);
            for c in &est.diagnostics {
                for (&l, e) in c.lambdas.iter().zip(&c.values) {
                    let [m, se, k] = est_cells(e);
                    t.push(vec![fmt(c.r), fmt(l), m, se, k, fmt(c.lambda_hat)]);
                }
            }
            let window = match method {
                CriticalMethod::CrossingBisection => 2.0 * max_of(r_list),
                CriticalMethod::ThetaThreshold => max_of(r_list),
            };
            Artifacts {
                plot: Some(Plot {
                    title: format!("critical search, estimate {:.4}", est.lambda_hat),
                    x_label: "lambda",
                    y_label: "probability",
                    series: est
                        .diagnostics
                        .iter()
                        .map(|c| curve_series(format!("r={}", c.r), &c.lambdas, &c.values))
                        .collect(),
                }),
                report: to_value(&est),
                results: t,
                coords: None,
                window,
            }
        }
        Command::Osss { s_list, l, r } => {
            let reports = osss_check_many(model, s_list, *l, *r, n, seed)?;
            let mut t = Table::new(&["s", "var_f", "var_f_stderr", "sum_delta_inf", "sum_stderr", "violated"]);
            let mut coords = Table::new(&["s", "x", "n", "delta", "inf"]);
            for rep in &reports {
                t.push(vec![
                    fmt(rep.s),
                    fmt(rep.var_f.mean),
                    fmt(rep.var_f.stderr),
                    fmt(rep.sum_delta_inf.mean),
                    fmt(rep.sum_delta_inf.stderr),
                    rep.violated.to_string(),
                ]);
                for c in &rep.coords {
                    let (x, band) = match &c.coord {
                        CellCoord::Ghost => ("g".to_string(), String::new()),
                        CellCoord::Cell { x, n } => {
                            (x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"), n.to_string())
                        }
                    };
                    coords.push(vec![fmt(rep.s), x, band, fmt(c.delta), fmt(c.inf)]);
                }
            }
            Artifacts { report: to_value(&reports), results: t, plot: None, coords: Some(coords), window: *l }
        }
        Command::Russo { r, d_lambda, k } => {
            let rep = russo_check(model, *r, lambda, *d_lambda, n, *k, seed)?;
            let mut t = Table::new(&["quantity", "mean", "stderr", "n"]);
            for (name, e) in [("finite_difference", &rep.finite_difference), ("pivotal_sum", &rep.pivotal_sum)] {
                let [m, se, k] = est_cells(e);
                t.push(vec![name.to_string(), m, se, k]);
            }
            Artifacts { report: to_value(&rep), results: t, plot: None, coords: None, window: *r }
        }
        Command::Renorm { r_list, alpha, delta, u_grid_size } => {
            let reports = r_list
                .iter()
                .map(|&r| renorm_report(model, r, *alpha, *delta, *u_grid_size, n, seed))
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(&["r", "theta_alpha", "stderr", "pi_delta", "max_product", "implied_constant", "implied_c1"]);
            let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
            for rep in &reports {
                t.push(vec![
                    fmt(rep.r),
                    fmt(rep.theta_alpha_r.mean),
                    fmt(rep.theta_alpha_r.stderr),
                    fmt(rep.pi_delta_r),
                    fmt(rep.max_product),
                    opt(rep.implied_constant),
                    opt(rep.implied_c1),
                ]);
            }
            Artifacts { report: to_value(&reports), results: t, plot: None, coords: None, window: max_of(r_list) }
        }
        Command::HeavyTail { alpha, eta_exp, epsilon, r0, r } => {
            let rep = verify_heavy_tail_lemma(model, *alpha, *eta_exp, *epsilon, *r0, *r, n, seed)?;
            let mut t = Table::new(&["condition", "s", "value", "stderr", "bound"]);
            for (name, pts) in [("f1", &rep.f1), ("f2", &rep.f2)] {
                for p in pts {
                    t.push(vec![name.to_string(), fmt(p.s), fmt(p.value), fmt(p.stderr), fmt(p.bound)]);
                }
            }
            t.push(vec![
                "conclusion".into(),
                fmt(*r),
                fmt(rep.theta_alpha_r.mean),
                fmt(rep.theta_alpha_r.stderr),
                fmt(rep.conclusion_bound),
            ]);
            Artifacts { report: to_value(&rep), results: t, plot: None, coords: None, window: r.max(r0 / alpha) }
        }
        Command::Ratio { r_grid } => {
            let pts = ratio_curve(model, r_grid, n, seed)?;
            let mut t = Table::new(&["r", "theta", "theta_stderr", "phi", "ratio", "ratio_stderr"]);
            for p in &pts {
                t.push(vec![fmt(p.r), fmt(p.theta.mean), fmt(p.theta.stderr), fmt(p.phi), fmt(p.ratio), fmt(p.ratio_stderr)]);
            }
            Artifacts {
                plot: Some(Plot {
                    title: format!("theta_r / phi_r at lambda={lambda}"),
                    x_label: "r",
                    y_label: "ratio",
                    series: vec![Series {
                        name: "ratio".into(),
                        points: pts.iter().map(|p| (p.r, p.ratio, p.ratio_stderr)).collect(),
                    }],
                }),
                report: to_value(&pts),
                results: t,
                coords: None,
                window: max_of(r_grid),
            }
        }
        Command::DecayFit { s_grid, s_min } => {
            let curve = estimate_theta_curve(model, s_grid, n, seed)?;
            let fit = fit_exponential_decay(&curve, *s_min)?;
            let mut t = Table::new(&["s", "mean", "stderr", "n", "fitted"]);
            for (&s, e) in s_grid.iter().zip(&curve.values) {
                let [m, se, k] = est_cells(e);
                let fitted = if s >= *s_min { fmt((fit.log_prefactor - fit.rate * s).exp()) } else { String::new() };
                t.push(vec![fmt(s), m, se, k, fitted]);
            }
            Artifacts {
                plot: Some(Plot {
                    title: format!("theta_s, fitted rate {:.4}", fit.rate),
                    x_label: "s",
                    y_label: "theta_s",
                    series: vec![curve_series("theta", s_grid, &curve.values)],
                }),
                report: json!({ "curve": curve, "fit": fit }),
                results: t,
                coords: None,
                window: max_of(s_grid),
            }
        }
        Command::Sharpness { lambda_grid, lambda_c, r_proxy } => {
            let scan = sharpness_scan(model, lambda_grid, *lambda_c, *r_proxy, n, seed)?;
            let mut t = Table::new(&["lambda", "mean", "stderr", "n"]);
            for (&l, e) in lambda_grid.iter().zip(&scan.theta) {
                let [m, se, k] = est_cells(e);
                t.push(vec![fmt(l), m, se, k]);
            }
            Artifacts {
                plot: Some(Plot {
                    title: format!("theta at r={r_proxy}"),
                    x_label: "lambda",
                    y_label: "theta",
                    series: vec![curve_series("theta", lambda_grid, &scan.theta)],
                }),
                report: to_value(&scan),
                results: t,
                coords: None,
                window: *r_proxy,
            }
        }
        Command::Vacant { r, h } => {
            let hits = replicates(n, seed, |s| vacant_connected(&sample_config(model, *r, s)?, *r, *h))?;
            let e = hits.into_iter().collect::<Tally>().estimate(seed, format!("vacant r={r} h={h}"));
            let mut t = Table::new(&["r", "h", "mean", "stderr", "n"]);
            let [m, se, k] = est_cells(&e);
            t.push(vec![fmt(*r), fmt(*h), m, se, k]);
            Artifacts { report: to_value(&e), results: t, plot: None, coords: None, window: *r }
        }
    })
}
