use std::path::{Path, PathBuf};

use log::info;
use mrgg_core::experiments::{estimate_all, link_prediction_replicates, mean_sd, sweep_delta2, test_power, Scenario};
use mrgg_core::harmonics::DEFAULT_QUAD_NODES;
use mrgg_core::io::GraphContainer;
use mrgg_core::{cumulative_dim, default_kappa_grid, envelope_spectrum, harmonic_dim, Envelope};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::Outputs;
use crate::svg::{Chart, Series};
use crate::CliError;

const TABLE_POINTS: usize = 201;
const DEFAULT_REPLICATES: usize = 10;
const DEFAULT_CALIBRATION_TRIALS: usize = 200;
const DEFAULT_TRIALS: usize = 100;
const MIN_CALIBRATION_TRIALS: usize = 100;
const MIN_SWEEP_SEEDS: usize = 3;
const LINK_NODES: usize = 10;

fn pipeline(e: mrgg_core::Error) -> CliError {
    CliError::Pipeline(e.to_string())
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

pub struct Context {
    pub config: ExperimentConfig,
    /// Directory of the config file.
    pub base: PathBuf,
    pub seed: u64,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

pub fn simulate(ctx: &Context) -> Result<Outputs, CliError> {
    let scenario = ctx.config.scenario()?;
    let n = ctx.config.single_n()?;
    info!("simulating n = {n}, seed {}", ctx.seed);
    let (chain, graph) = scenario.simulate(n, ctx.seed, 0).map_err(pipeline)?;
    let mut out = Outputs::default();
    out.add("graph.json", GraphContainer::from_chain(graph, &chain).to_json().map_err(pipeline)?);
    Ok(out)
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub degree: usize,
    pub multiplicity: u64,
    pub p_hat: f64,
    pub p_true: Option<f64>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub resolution: usize,
    pub cumulative_dim: u64,
    pub intra_class_variance: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTableRow {
    pub t: f64,
    pub p_hat: f64,
    pub p_true: Option<f64>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct LatitudeTableRow {
    pub r: f64,
    pub f_hat: f64,
    pub f_true: Option<f64>,
}

pub fn estimate(ctx: &Context) -> Result<Outputs, CliError> {
    let path = ctx.config.graph.as_ref().map(|p| ctx.resolve(p)).ok_or_else(|| input("config needs `graph`"))?;
    let text = std::fs::read_to_string(&path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    let container = GraphContainer::from_json(&text).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let d = container.dim;
    if let Some(cd) = ctx.config.d {
        if cd != d {
            return Err(input(format!("config has d = {cd}, graph file has d = {d}")));
        }
    }
    let truth = ctx.config.truth()?;
    if let Some(t) = &truth {
        if t.d != d {
            return Err(input(format!("scenario has d = {}, graph file has d = {d}", t.d)));
        }
    }
    let g = &container.graph;
    info!("estimating from {} nodes, zeta = {}", g.n(), g.zeta());
    let (env, _gram, lat) = estimate_all(g, d, &default_kappa_grid()).map_err(pipeline)?;

    let true_coef = match &truth {
        Some(t) => Some(
            envelope_spectrum(&t.envelope, d, env.r_hat, DEFAULT_QUAD_NODES.max(2 * env.r_hat + 2))
                .map_err(pipeline)?
                .coefficients,
        ),
        None => None,
    };
    let coefficients = env
        .p_hat
        .iter()
        .enumerate()
        .map(|(l, &p)| {
            Ok(CoefficientRow {
                degree: l,
                multiplicity: harmonic_dim(l, d).map_err(pipeline)?,
                p_hat: p,
                p_true: true_coef.as_ref().map(|c| c[l]),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let selection = env
        .intra_class_variance
        .iter()
        .enumerate()
        .map(|(r, &v)| {
            Ok(SelectionRow { resolution: r, cumulative_dim: cumulative_dim(r, d).map_err(pipeline)?, intra_class_variance: v })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let ts = grid(TABLE_POINTS);
    let env_rows: Vec<EnvelopeTableRow> = ts
        .iter()
        .map(|&t| EnvelopeTableRow { t, p_hat: env.eval(t), p_true: truth.as_ref().map(|s| s.envelope.eval(t)) })
        .collect();
    let true_lat = truth.as_ref().map(Scenario::latitude_distribution).transpose().map_err(pipeline)?;
    let table = lat.tabulate(TABLE_POINTS);
    let lat_rows: Vec<LatitudeTableRow> = table
        .grid
        .iter()
        .zip(&table.pdf)
        .map(|(&r, &f)| LatitudeTableRow { r, f_hat: f, f_true: true_lat.as_ref().map(|l| l.pdf(r)) })
        .collect();

    let mut out = Outputs::default();
    out.add("envelope.json", env.to_json().map_err(pipeline)? + "\n");
    out.add("latitude.json", lat.to_json().map_err(pipeline)? + "\n");
    out.add_csv("envelope_coefficients.csv", "envelope-coefficients", &coefficients)?;
    out.add_csv("resolution_selection.csv", "resolution-selection", &selection)?;
    out.add_csv("envelope_table.csv", "envelope-table", &env_rows)?;
    out.add_csv("latitude_table.csv", "latitude-table", &lat_rows)?;

    let mut series = vec![Series::new("estimate", &ts, &env_rows.iter().map(|r| r.p_hat).collect::<Vec<_>>())];
    if truth.is_some() {
        series.push(Series::new("truth", &ts, &env_rows.iter().map(|r| r.p_true.unwrap_or(f64::NAN)).collect::<Vec<_>>()).dashed());
    }
    out.add("envelope.svg", Chart { title: "Envelope", x_label: "t", y_label: "p(t)", series }.render());
    let mut series = vec![Series::new("estimate", &table.grid, &table.pdf)];
    if truth.is_some() {
        series.push(
            Series::new("truth", &table.grid, &lat_rows.iter().map(|r| r.f_true.unwrap_or(f64::NAN)).collect::<Vec<_>>())
                .dashed(),
        );
    }
    out.add("latitude.svg", Chart { title: "Latitude density", x_label: "r", y_label: "f(r)", series }.render());
    Ok(out)
}

pub fn sweep(ctx: &Context) -> Result<Outputs, CliError> {
    let scenario = ctx.config.scenario()?;
    let sizes = ctx.config.sizes()?;
    if sizes.len() < 2 {
        return Err(input("sweep-delta2 needs at least 2 graph sizes in `n_list`"));
    }
    let reps = ctx.config.replicates(DEFAULT_REPLICATES);
    if reps < MIN_SWEEP_SEEDS {
        return Err(input(format!("sweep-delta2 needs at least {MIN_SWEEP_SEEDS} seeds, got {reps}")));
    }
    info!("sweep over {sizes:?} with {reps} replicates");
    let rows = sweep_delta2(&scenario, &sizes, reps, ctx.seed, &default_kappa_grid()).map_err(pipeline)?;
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let col = |f: fn(&mrgg_core::experiments::SweepRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let mut out = Outputs::default();
    out.add_csv("sweep.csv", "sweep-delta2", &rows)?;
    out.add(
        "sweep.svg",
        Chart {
            title: "Estimation error",
            x_label: "n",
            y_label: "mean error",
            series: vec![
                Series::new("envelope delta2", &ns, &col(|r| r.envelope_mean)),
                Series::new("latitude delta2", &ns, &col(|r| r.latitude_mean)),
                Series::new("Gram Frobenius", &ns, &col(|r| r.gram_mean)),
            ],
        }
        .render(),
    );
    Ok(out)
}

pub fn power(ctx: &Context) -> Result<Outputs, CliError> {
    let scenario = ctx.config.scenario()?;
    let sizes = ctx.config.sizes()?;
    let cal = ctx.config.calibration_trials.unwrap_or(DEFAULT_CALIBRATION_TRIALS);
    if cal < MIN_CALIBRATION_TRIALS {
        return Err(input(format!("calibration_trials must be at least {MIN_CALIBRATION_TRIALS}, got {cal}")));
    }
    let trials = ctx.config.trials.unwrap_or(DEFAULT_TRIALS);
    let settings = ctx.config.test_settings();
    info!("test power over {sizes:?}: {cal} calibration trials, {trials} trials");
    let rows = test_power(&scenario, &sizes, &settings, cal, trials, ctx.seed).map_err(pipeline)?;
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let mut out = Outputs::default();
    out.add_csv("power.csv", "test-power", &rows)?;
    out.add_json("power.json", &rows)?;
    out.add(
        "power.svg",
        Chart {
            title: "Rejection rate",
            x_label: "n",
            y_label: "rate",
            series: vec![
                Series::new("null", &ns, &rows.iter().map(|r| r.null_rejection).collect::<Vec<_>>()),
                Series::new("alternative", &ns, &rows.iter().map(|r| r.alternative_rejection).collect::<Vec<_>>()),
                Series::new("level", &ns, &vec![settings.alpha; ns.len()]).dashed(),
            ],
        }
        .render(),
    );
    Ok(out)
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub replicate: usize,
    pub node: usize,
    pub eta_oracle: f64,
    pub eta_plugin: f64,
    pub eta_uniform: f64,
    pub bayes: bool,
    pub mrgg: bool,
    pub random: bool,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub replicate: usize,
    pub bayes: f64,
    pub mrgg: f64,
    pub random: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSummaryRow {
    pub classifier: String,
    pub mean: f64,
    pub sd: f64,
}

pub fn linkpred(ctx: &Context) -> Result<Outputs, CliError> {
    let scenario = ctx.config.scenario()?;
    let n = ctx.config.single_n()?;
    if n < 2 {
        return Err(input("linkpred needs n >= 2"));
    }
    let reps = ctx.config.replicates(DEFAULT_REPLICATES);
    info!("link prediction at n = {n}, {reps} replicates");
    let runs = link_prediction_replicates(&scenario, n, reps, ctx.seed, &default_kappa_grid()).map_err(pipeline)?;

    let nodes: Vec<NodeRow> = runs
        .iter()
        .enumerate()
        .flat_map(|(s, r)| {
            (0..LINK_NODES.min(n)).map(move |i| NodeRow {
                replicate: s,
                node: i + 1,
                eta_oracle: r.oracle[i],
                eta_plugin: r.plugin[i],
                eta_uniform: r.uniform[i],
                bayes: r.bayes_labels[i],
                mrgg: r.mrgg_labels[i],
                random: r.random_labels[i],
            })
        })
        .collect();
    let risks: Vec<RiskRow> = runs
        .iter()
        .enumerate()
        .map(|(s, r)| RiskRow { replicate: s, bayes: r.risk_bayes, mrgg: r.risk_mrgg, random: r.risk_random })
        .collect();
    let summary: Vec<RiskSummaryRow> = [
        ("bayes", risks.iter().map(|r| r.bayes).collect::<Vec<_>>()),
        ("mrgg", risks.iter().map(|r| r.mrgg).collect()),
        ("random", risks.iter().map(|r| r.random).collect()),
    ]
    .into_iter()
    .map(|(name, v)| {
        let (mean, sd) = mean_sd(&v);
        RiskSummaryRow { classifier: name.to_string(), mean, sd }
    })
    .collect();

    let first: Vec<&NodeRow> = nodes.iter().filter(|r| r.replicate == 0).collect();
    let xs: Vec<f64> = first.iter().map(|r| r.node as f64).collect();
    let mut out = Outputs::default();
    out.add_csv("linkpred_nodes.csv", "linkpred-nodes", &nodes)?;
    out.add_csv("linkpred_risks.csv", "linkpred-risks", &risks)?;
    out.add_csv("linkpred_summary.csv", "linkpred-summary", &summary)?;
    out.add_json("linkpred.json", &serde_json::json!({ "nodes": nodes, "risks": risks, "summary": summary }))?;
    out.add(
        "linkpred.svg",
        Chart {
            title: "Link posterior, replicate 0",
            x_label: "node",
            y_label: "eta",
            series: vec![
                Series::new("oracle", &xs, &first.iter().map(|r| r.eta_oracle).collect::<Vec<_>>()),
                Series::new("plug-in", &xs, &first.iter().map(|r| r.eta_plugin).collect::<Vec<_>>()),
                Series::new("uniform", &xs, &first.iter().map(|r| r.eta_uniform).collect::<Vec<_>>()).dashed(),
            ],
        }
        .render(),
    );
    Ok(out)
}
