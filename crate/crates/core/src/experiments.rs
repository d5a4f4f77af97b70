//! Simulation scenarios and the replicated pipelines behind the experiment
//! commands. Every replicate draws from streams derived from the master seed
//! and its replicate index, so results do not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{estimate_envelope_from_spectrum, EnvelopeEstimate};
use crate::envelope_fn::{Clipped, Envelope, NamedEnvelope};
use crate::error::{Error, Result};
use crate::harmonics::{
    check_dim, cumulative_dim, harmonic_coefficients, squared_norm, EnvelopeSpectrum, DEFAULT_QUAD_NODES,
};
use crate::inference::{
    calibrate_threshold, classify, markov_test, random_classifier, risk, Calibration, PosteriorQuadrature,
    PosteriorSource, TestSettings, DEFAULT_POSTERIOR_NODES,
};
use crate::latent::{sample_chain, sample_graph, Graph, LatentChain, LatitudeDistribution, LatitudeSpec};
use crate::latitude::{extract_distances, fit_latitude, heic, GramEstimate, LatitudeDensity};
use crate::rng::{self, derive_seed, Lane};
use crate::spectral::{build_that, delta2, sym_eigen, SortOrder};

/// Degree up to which latitude densities are compared spectrally.
pub const LATITUDE_SPECTRUM_DEGREE: usize = 20;

/// Edge-probability scaling `zeta_n`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SparsityRule {
    #[default]
    Dense,
    /// `log(n)^k / n`, capped at 1.
    LogPower { k: u32 },
}

impl SparsityRule {
    pub fn zeta(&self, n: usize) -> f64 {
        match *self {
            SparsityRule::Dense => 1.0,
            SparsityRule::LogPower { k } => ((n as f64).ln().powi(k as i32) / n as f64).min(1.0),
        }
    }
}

/// Generative model of a simulated graph, minus its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub d: usize,
    pub envelope: NamedEnvelope,
    pub latitude: LatitudeSpec,
    #[serde(default)]
    pub sparsity: SparsityRule,
}

impl Scenario {
    /// Half-sphere envelope with the bimodal `Beta(2, 2)` latitude mixture, `d = 3`.
    pub fn bimodal_heaviside() -> Self {
        Scenario {
            d: 3,
            envelope: NamedEnvelope::heaviside(),
            latitude: LatitudeSpec::BetaMixture { a: 2.0, b: 2.0 },
            sparsity: SparsityRule::Dense,
        }
    }

    /// Half-sphere envelope with the `Beta(5, 1)` latitude on `(r + 1) / 2`, `d = 3`.
    pub fn forward_heaviside() -> Self {
        Scenario {
            d: 3,
            envelope: NamedEnvelope::heaviside(),
            latitude: LatitudeSpec::ScaledBeta { a: 5.0, b: 1.0 },
            sparsity: SparsityRule::Dense,
        }
    }

    /// Same envelope and sparsity with independent uniform positions.
    pub fn null(&self) -> Self {
        Scenario { latitude: LatitudeSpec::UniformNull, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        self.latitude.distribution(self.d)?;
        match &self.envelope {
            NamedEnvelope::Gegenbauer { coefficients, dim } => {
                if *dim != self.d {
                    return Err(Error::InvalidArgument(format!(
                        "envelope coefficients are for d = {dim}, scenario has d = {}",
                        self.d
                    )));
                }
                if coefficients.is_empty() {
                    return Err(Error::InvalidArgument("empty envelope coefficients".into()));
                }
            }
            NamedEnvelope::Heaviside { threshold } if !(-1.0..=1.0).contains(threshold) => {
                return Err(Error::InvalidArgument(format!("threshold {threshold} outside [-1, 1]")));
            }
            _ => {}
        }
        for i in 0..=2000 {
            let t = -1.0 + i as f64 / 1000.0;
            let v = self.envelope.eval(t);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::EnvelopeRange { value: v, at: t });
            }
        }
        Ok(())
    }

    pub fn latitude_distribution(&self) -> Result<LatitudeDistribution> {
        self.latitude.distribution(self.d)
    }

    /// Replicate `replicate` of an `n`-node graph under `master`.
    pub fn simulate(&self, n: usize, master: u64, replicate: u64) -> Result<(LatentChain, Graph)> {
        let lat = self.latitude_distribution()?;
        let chain = sample_chain(n, self.d, &lat, derive_seed(master, replicate, Lane::Chain))?;
        let graph = sample_graph(&chain, &self.envelope, self.sparsity.zeta(n), derive_seed(master, replicate, Lane::Graph))?;
        Ok((chain, graph))
    }
}

/// Smallest degree whose cumulative dimension reaches `target`.
fn degree_reaching(target: u64, d: usize) -> Result<usize> {
    let mut l = 0;
    while cumulative_dim(l, d)? < target {
        l += 1;
    }
    Ok(l)
}

/// `delta2` between the full operator spectrum of `envelope` and the estimate.
///
/// The true spectrum is computed up to a degree holding at least `4 n`
/// eigenvalues; the squared mass beyond it is added back from the norm of the
/// envelope, since it pairs with the zero padding of the estimate.
pub fn envelope_error(envelope: &NamedEnvelope, estimate: &EnvelopeEstimate, n: usize) -> Result<f64> {
    let d = estimate.dim;
    let degree = degree_reaching(4 * n as u64, d)?.max(estimate.r_hat + 1);
    let nodes = (2 * degree + 2).max(DEFAULT_QUAD_NODES);
    let truth = harmonic_coefficients(envelope, d, degree, nodes)?;
    let truth = truth.with_multiplicity()?;
    let head: f64 = truth.iter().map(|v| v * v).sum();
    let tail = (squared_norm(envelope, d, nodes)? - head).max(0.0);
    let err = delta2(&truth, &estimate.with_multiplicity()?);
    Ok((err * err + tail).sqrt())
}

fn latitude_spectrum(f: &(impl Fn(f64) -> f64 + Sync), d: usize) -> Result<Vec<f64>> {
    harmonic_coefficients(f, d, LATITUDE_SPECTRUM_DEGREE, DEFAULT_QUAD_NODES)?.with_multiplicity()
}

/// `delta2` between the harmonic spectra (degree <= 20) of two latitude densities.
pub fn latitude_error(truth: &LatitudeDistribution, estimate: &LatitudeDensity, d: usize) -> Result<f64> {
    let a = latitude_spectrum(&|r| truth.pdf(r), d)?;
    let b = latitude_spectrum(&|r| estimate.pdf(r), d)?;
    Ok(delta2(&a, &b))
}

/// One replicate of the full estimation pipeline with its errors.
#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub chain: LatentChain,
    pub graph: Graph,
    pub envelope: EnvelopeEstimate,
    pub gram: GramEstimate,
    pub latitude: LatitudeDensity,
    pub envelope_error: f64,
    pub latitude_error: f64,
    pub gram_error: f64,
}

/// Envelope and latitude estimates from an observed graph.
pub fn estimate_all(
    g: &Graph,
    d: usize,
    kappa_grid: &[f64],
) -> Result<(EnvelopeEstimate, GramEstimate, LatitudeDensity)> {
    let spec = sym_eigen(&build_that(g), true, SortOrder::ByValueDesc)?;
    let envelope = estimate_envelope_from_spectrum(&spec, d, g.n(), g.zeta(), kappa_grid)?;
    let gram = heic(&spec, d)?;
    let latitude = fit_latitude(&extract_distances(&gram), None)?;
    Ok((envelope, gram, latitude))
}

pub fn run_estimation(
    scenario: &Scenario,
    n: usize,
    master: u64,
    replicate: u64,
    kappa_grid: &[f64],
) -> Result<EstimationRun> {
    let (chain, graph) = scenario.simulate(n, master, replicate)?;
    let (envelope, gram, latitude) = estimate_all(&graph, scenario.d, kappa_grid)?;
    let envelope_error = envelope_error(&scenario.envelope, &envelope, n)?;
    let latitude_error = latitude_error(&scenario.latitude_distribution()?, &latitude, scenario.d)?;
    let gram_error = gram.frobenius_error(&GramEstimate::from_chain(&chain))?;
    Ok(EstimationRun { chain, graph, envelope, gram, latitude, envelope_error, latitude_error, gram_error })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub replicates: usize,
    pub envelope_mean: f64,
    pub envelope_sd: f64,
    pub latitude_mean: f64,
    pub latitude_sd: f64,
    pub gram_mean: f64,
    pub gram_sd: f64,
}

/// Errors of the estimation pipeline over graph sizes. Replicate `s` uses
/// the same seeds at every size.
pub fn sweep_delta2(
    scenario: &Scenario,
    sizes: &[usize],
    replicates: usize,
    master: u64,
    kappa_grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if sizes.len() < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least 2 graph sizes".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("a sweep needs at least 1 replicate".into()));
    }
    scenario.validate()?;
    let jobs: Vec<(usize, u64)> = sizes.iter().flat_map(|&n| (0..replicates as u64).map(move |s| (n, s))).collect();
    let errors = jobs
        .par_iter()
        .map(|&(n, s)| {
            run_estimation(scenario, n, master, s, kappa_grid).map(|r| [r.envelope_error, r.latitude_error, r.gram_error])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sizes
        .iter()
        .zip(errors.chunks(replicates))
        .map(|(&n, chunk)| {
            let col = |k: usize| mean_sd(&chunk.iter().map(|e| e[k]).collect::<Vec<_>>());
            let ((em, es), (lm, ls), (gm, gs)) = (col(0), col(1), col(2));
            SweepRow {
                n,
                replicates,
                envelope_mean: em,
                envelope_sd: es,
                latitude_mean: lm,
                latitude_sd: ls,
                gram_mean: gm,
                gram_sd: gs,
            }
        })
        .collect())
}

/// Independent sub-seeds of `master` for the parts of an experiment.
fn part_seed(master: u64, part: u64) -> u64 {
    derive_seed(master, part, Lane::Aux)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub n: usize,
    pub threshold: f64,
    pub trials: usize,
    pub null_rejection: f64,
    pub alternative_rejection: f64,
    /// Trials whose estimation failed; they count as acceptances.
    pub invalid: usize,
}

/// Rejection rate of the test over `trials` graphs simulated from `scenario`.
pub fn rejection_rate(
    scenario: &Scenario,
    n: usize,
    cal: &Calibration,
    settings: &TestSettings,
    trials: usize,
    master: u64,
) -> Result<(f64, usize)> {
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (_, g) = scenario.simulate(n, master, t)?;
            Ok(markov_test(&g, scenario.d, cal, settings, derive_seed(master, t, Lane::Batch)))
        })
        .collect::<Result<Vec<_>>>()?;
    let rejected = reports.iter().filter(|r| r.reject).count();
    let invalid = reports.iter().filter(|r| !r.valid).count();
    Ok((rejected as f64 / trials as f64, invalid))
}

/// Calibrates the test at each size, then measures its rejection rate under
/// the null and under `alternative`.
pub fn test_power(
    alternative: &Scenario,
    sizes: &[usize],
    settings: &TestSettings,
    calibration_trials: usize,
    trials: usize,
    master: u64,
) -> Result<Vec<PowerRow>> {
    if trials == 0 || calibration_trials == 0 {
        return Err(Error::InvalidArgument("trial counts must be positive".into()));
    }
    alternative.validate()?;
    let null = alternative.null();
    let mut rows = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let base = part_seed(master, k as u64);
        let cal = calibrate_threshold(n, alternative.d, &alternative.envelope, settings, calibration_trials, part_seed(base, 0))?;
        let (null_rate, null_bad) = rejection_rate(&null, n, &cal, settings, trials, part_seed(base, 1))?;
        let (alt_rate, alt_bad) = rejection_rate(alternative, n, &cal, settings, trials, part_seed(base, 2))?;
        rows.push(PowerRow {
            n,
            threshold: cal.threshold,
            trials,
            null_rejection: null_rate,
            alternative_rejection: alt_rate,
            invalid: null_bad + alt_bad,
        });
    }
    Ok(rows)
}

/// Posteriors and risks for one replicate of the link-prediction experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRun {
    pub oracle: Vec<f64>,
    pub plugin: Vec<f64>,
    pub uniform: Vec<f64>,
    pub bayes_labels: Vec<bool>,
    pub mrgg_labels: Vec<bool>,
    pub random_labels: Vec<bool>,
    pub risk_bayes: f64,
    pub risk_mrgg: f64,
    pub risk_random: f64,
}

/// Connection probabilities of nodes `1..n` with the node following `X_n`.
///
/// Risks are measured against the oracle posterior.
pub fn link_prediction(scenario: &Scenario, n: usize, master: u64, replicate: u64, kappa_grid: &[f64]) -> Result<LinkRun> {
    let d = scenario.d;
    let (chain, graph) = scenario.simulate(n, master, replicate)?;
    let truth = scenario.latitude_distribution()?;
    let null = LatitudeDistribution::uniform_null(d)?;

    let last = n - 1;
    let true_inner: Vec<f64> = (0..n).map(|i| chain.inner(i, last).clamp(-1.0, 1.0)).collect();
    let oracle_rule = PosteriorQuadrature::new(|r| truth.pdf(r), DEFAULT_POSTERIOR_NODES)?;
    let oracle = oracle_rule.posterior(&true_inner, &scenario.envelope, PosteriorSource::Oracle)?;
    let uniform_rule = PosteriorQuadrature::new(|r| null.pdf(r), DEFAULT_POSTERIOR_NODES)?;
    let uniform = uniform_rule.posterior(&true_inner, &scenario.envelope, PosteriorSource::Uniform)?;

    let (envelope, gram, latitude) = estimate_all(&graph, d, kappa_grid)?;
    let p_hat = Clipped(EnvelopeSpectrum::new(envelope.p_hat.clone(), d)?);
    let est_inner: Vec<f64> = (0..n).map(|i| (n as f64 * gram.entry(i, last)).clamp(-1.0, 1.0)).collect();
    let plugin_rule = PosteriorQuadrature::new(|r| latitude.pdf(r), DEFAULT_POSTERIOR_NODES)?;
    let plugin = plugin_rule.posterior(&est_inner, &p_hat, PosteriorSource::Plugin)?;

    let bayes = classify(&oracle);
    let mrgg = classify(&plugin);
    let random = random_classifier(&graph, &mut rng::stream(derive_seed(master, replicate, Lane::Classifier)))?;
    Ok(LinkRun {
        risk_bayes: risk(&oracle.eta, &bayes)?,
        risk_mrgg: risk(&oracle.eta, &mrgg)?,
        risk_random: risk(&oracle.eta, &random)?,
        oracle: oracle.eta,
        plugin: plugin.eta,
        uniform: uniform.eta,
        bayes_labels: bayes.labels,
        mrgg_labels: mrgg.labels,
        random_labels: random.labels,
    })
}

/// [`link_prediction`] over replicates `0..replicates`, in replicate order.
pub fn link_prediction_replicates(
    scenario: &Scenario,
    n: usize,
    replicates: usize,
    master: u64,
    kappa_grid: &[f64],
) -> Result<Vec<LinkRun>> {
    scenario.validate()?;
    if n < 2 || replicates == 0 {
        return Err(Error::InvalidArgument("link prediction needs n >= 2 and at least 1 replicate".into()));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|s| link_prediction(scenario, n, master, s, kappa_grid))
        .collect()
}

/// Evaluates an envelope on `points` equally spaced points of `[-1, 1]`.
pub fn tabulate_envelope<E: Envelope + ?Sized>(p: &E, points: usize) -> (Vec<f64>, Vec<f64>) {
    let grid: Vec<f64> = (0..points).map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64).collect();
    let values = grid.iter().map(|&t| p.eval(t)).collect();
    (grid, values)
}
