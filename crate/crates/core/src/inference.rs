//! Link prediction for an incoming node and the chi-square test of
//! Markovian latent dynamics.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope_fn::Envelope;
use crate::error::{Error, Result};
use crate::latent::{sample_chain, sample_graph, Graph, LatitudeDistribution};
use crate::latitude::{extract_distances, fit_latitude, heic};
use crate::quadrature::GaussLegendre;
use crate::rng::{self, derive_seed, Lane};
use crate::spectral::{build_that, sym_eigen, SortOrder};

pub const DEFAULT_POSTERIOR_NODES: usize = 64;
pub const DEFAULT_BINS: usize = 70;

/// Where the inputs of a posterior come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorSource {
    /// True envelope, latitude and inner products.
    Oracle,
    /// Estimated envelope, latitude and inner products.
    Plugin,
    /// True envelope and inner products with the uniform-null latitude.
    Uniform,
}

/// Connection probabilities of every node with the incoming node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPosterior {
    pub eta: Vec<f64>,
    pub source: PosteriorSource,
}

/// Tensor Gauss–Legendre rule over `(r, u) in [-1, 1]^2` with the latitude
/// density evaluated once at the `r` nodes.
#[derive(Debug, Clone)]
pub struct PosteriorQuadrature {
    rule: GaussLegendre,
    density: Vec<f64>,
}

impl PosteriorQuadrature {
    pub fn new(f: impl Fn(f64) -> f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidArgument("posterior quadrature needs at least 2 nodes".into()));
        }
        let rule = GaussLegendre::new(nodes);
        let density = rule
            .nodes
            .iter()
            .map(|&r| {
                let v = f(r);
                if v.is_finite() && v >= 0.0 {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { value: v, at: r })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PosteriorQuadrature { rule, density })
    }

    /// `int int p(r_in r + sqrt(1 - r^2) sqrt(1 - r_in^2) u) f(r) dr du / 2`, clamped to `[0, 1]`.
    pub fn eval<E: Envelope + ?Sized>(&self, r_in: f64, p: &E) -> Result<f64> {
        if !(-1.0..=1.0).contains(&r_in) {
            return Err(Error::InvalidArgument(format!("inner product {r_in} is outside [-1, 1]")));
        }
        let s_in = (1.0 - r_in * r_in).max(0.0).sqrt();
        let GaussLegendre { nodes, weights } = &self.rule;
        let mut acc = 0.0;
        for ((&r, &wr), &fr) in nodes.iter().zip(weights).zip(&self.density) {
            if fr == 0.0 {
                continue;
            }
            let s = (1.0 - r * r).max(0.0).sqrt();
            let mut inner = 0.0;
            for (&u, &wu) in nodes.iter().zip(weights) {
                let t = (r_in * r + s * s_in * u).clamp(-1.0, 1.0);
                let v = p.eval(t);
                if !v.is_finite() {
                    return Err(Error::NonFinite { value: v, at: t });
                }
                inner += wu * v;
            }
            acc += wr * fr * inner;
        }
        Ok((acc / 2.0).clamp(0.0, 1.0))
    }

    pub fn posterior<E: Envelope + ?Sized>(
        &self,
        inner_products: &[f64],
        p: &E,
        source: PosteriorSource,
    ) -> Result<LinkPosterior> {
        let eta = inner_products.iter().map(|&r| self.eval(r, p)).collect::<Result<Vec<_>>>()?;
        Ok(LinkPosterior { eta, source })
    }
}

/// Single posterior link probability with a `nodes x nodes` rule.
pub fn posterior_link_prob<E: Envelope + ?Sized>(
    r_in: f64,
    p: &E,
    f: impl Fn(f64) -> f64,
    nodes: usize,
) -> Result<f64> {
    PosteriorQuadrature::new(f, nodes)?.eval(r_in, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Bayes,
    Mrgg,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutput {
    pub labels: Vec<bool>,
    pub kind: ClassifierKind,
}

/// Labels `eta >= 1/2`; oracle posteriors give the Bayes classifier, the
/// others the plug-in one.
pub fn classify(post: &LinkPosterior) -> ClassifierOutput {
    let kind = match post.source {
        PosteriorSource::Oracle => ClassifierKind::Bayes,
        _ => ClassifierKind::Mrgg,
    };
    ClassifierOutput { labels: post.eta.iter().map(|&e| e >= 0.5).collect(), kind }
}

/// Independent labels with probability equal to the graph's edge density.
pub fn random_classifier<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<ClassifierOutput> {
    if g.n() < 2 {
        return Err(Error::InvalidArgument("edge density needs at least 2 nodes".into()));
    }
    let density = g.edge_density();
    let labels = (0..g.n()).map(|_| rng.random::<f64>() < density).collect();
    Ok(ClassifierOutput { labels, kind: ClassifierKind::Random })
}

/// Mean misclassification probability of `labels` under the posterior `eta`.
pub fn risk(eta: &[f64], out: &ClassifierOutput) -> Result<f64> {
    if eta.len() != out.labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities for {} labels",
            eta.len(),
            out.labels.len()
        )));
    }
    if eta.is_empty() {
        return Err(Error::InvalidArgument("empty posterior".into()));
    }
    let total: f64 = eta.iter().zip(&out.labels).map(|(&e, &g)| if g { 1.0 - e } else { e }).sum();
    Ok(total / eta.len() as f64)
}

/// Pearson statistic of `samples` against the distribution with CDF `cdf`
/// over `bins` equal-width bins of `[-1, 1]`.
pub fn chi2_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidArgument("the chi-square test needs at least 2 bins".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut observed = vec![0usize; bins];
    for &x in samples {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::InvalidArgument(format!("sample {x} is outside [-1, 1]")));
        }
        let b = (((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        observed[b] += 1;
    }
    let m = samples.len() as f64;
    let edge = |b: usize| -1.0 + 2.0 * b as f64 / bins as f64;
    let mut stat = 0.0;
    for (b, &o) in observed.iter().enumerate() {
        let expected = m * (cdf(edge(b + 1)) - cdf(edge(b)));
        if !(expected >= 1e-12) {
            return Err(Error::DegenerateBin { bin: b, expected });
        }
        stat += (o as f64 - expected).powi(2) / expected;
    }
    Ok(stat)
}

/// `q`-quantile of `values` using the next order statistic up.
pub fn quantile_higher(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument("quantile of an empty sample or outside [0, 1]".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = (q * (sorted.len() - 1) as f64).ceil() as usize;
    Ok(sorted[idx.min(sorted.len() - 1)])
}

/// How the test statistic is formed from an observed graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSettings {
    pub alpha: f64,
    pub bins: usize,
    /// Use the estimated distances as the batch instead of resampling them
    /// from the fitted density.
    pub reuse_distances: bool,
}

impl Default for TestSettings {
    fn default() -> Self {
        TestSettings { alpha: 0.05, bins: DEFAULT_BINS, reuse_distances: false }
    }
}

impl TestSettings {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("level {} must lie in (0, 1]", self.alpha)));
        }
        if self.bins < 2 {
            return Err(Error::InvalidArgument("the chi-square test needs at least 2 bins".into()));
        }
        Ok(())
    }
}

/// Chi-square statistic of the latitude estimated from `g` against the
/// uniform-null latitude. `seed` drives the batch resampling.
pub fn latitude_statistic(g: &Graph, d: usize, settings: &TestSettings, seed: u64) -> Result<f64> {
    let null = LatitudeDistribution::uniform_null(d)?;
    let spec = sym_eigen(&build_that(g), true, SortOrder::ByValueDesc)?;
    let distances = extract_distances(&heic(&spec, d)?);
    let batch = if settings.reuse_distances {
        distances
    } else {
        let kde = fit_latitude(&distances, None)?;
        kde.sampler().sample(g.n(), &mut rng::stream(seed))
    };
    chi2_statistic(&batch, |x| null.cdf(x), settings.bins)
}

/// Monte Carlo distribution of the statistic under the null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub alpha: f64,
    pub statistics: Vec<f64>,
}

/// Simulates `trials` graphs with independent uniform latent positions and
/// takes the `1 - alpha` quantile of their statistics.
pub fn calibrate_threshold<E: Envelope + ?Sized>(
    n: usize,
    d: usize,
    envelope: &E,
    settings: &TestSettings,
    trials: usize,
    seed: u64,
) -> Result<Calibration> {
    settings.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("calibration needs at least one trial".into()));
    }
    let null = LatitudeDistribution::uniform_null(d)?;
    let statistics = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let chain = sample_chain(n, d, &null, derive_seed(seed, t, Lane::Chain))?;
            let g = sample_graph(&chain, envelope, 1.0, derive_seed(seed, t, Lane::Graph))?;
            latitude_statistic(&g, d, settings, derive_seed(seed, t, Lane::Batch))
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = quantile_higher(&statistics, 1.0 - settings.alpha)?;
    Ok(Calibration { threshold, alpha: settings.alpha, statistics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub reject: bool,
    pub mc_trials: usize,
    pub bins: usize,
    /// False when estimation failed; `error` then holds the reason.
    pub valid: bool,
    pub error: Option<String>,
}

/// Tests whether the latent positions behind `g` are i.i.d. uniform.
pub fn markov_test(g: &Graph, d: usize, cal: &Calibration, settings: &TestSettings, seed: u64) -> TestReport {
    let base = TestReport {
        statistic: f64::NAN,
        threshold: cal.threshold,
        alpha: cal.alpha,
        reject: false,
        mc_trials: cal.statistics.len(),
        bins: settings.bins,
        valid: false,
        error: None,
    };
    match settings.validate().and_then(|_| latitude_statistic(g, d, settings, seed)) {
        Ok(statistic) => TestReport { statistic, reject: statistic > cal.threshold, valid: true, ..base },
        Err(e) => TestReport { error: Some(e.to_string()), ..base },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope_fn::NamedEnvelope;
    use proptest::prelude::*;
    use rand::Rng;

    fn half(_: f64) -> f64 {
        0.5
    }

    #[test]
    fn constant_envelopes() {
        let one = NamedEnvelope::Constant { value: 1.0 };
        let zero = NamedEnvelope::Constant { value: 0.0 };
        for r in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert!((posterior_link_prob(r, &one, half, 64).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(posterior_link_prob(r, &zero, half, 64).unwrap(), 0.0);
        }
    }

    #[test]
    fn heaviside_at_coincident_point() {
        // Even node count keeps r = 0 off the grid, so the step is integrated exactly.
        let eta = posterior_link_prob(1.0, &NamedEnvelope::heaviside(), half, 64).unwrap();
        assert!((eta - 0.5).abs() < 1e-12, "{eta}");
    }

    #[test]
    fn rejects_non_finite_integrand() {
        let bad = |t: f64| if t > 0.5 { f64::NAN } else { 0.0 };
        assert!(posterior_link_prob(0.9, &bad, half, 16).is_err());
        assert!(posterior_link_prob(1.2, &NamedEnvelope::heaviside(), half, 16).is_err());
    }

    #[test]
    fn classify_examples() {
        let out = classify(&LinkPosterior { eta: vec![0.9, 0.1, 0.5], source: PosteriorSource::Oracle });
        assert_eq!(out.labels, vec![true, false, true]);
        assert_eq!(out.kind, ClassifierKind::Bayes);
        let zeros = classify(&LinkPosterior { eta: vec![0.0; 4], source: PosteriorSource::Plugin });
        assert!(zeros.labels.iter().all(|l| !l));
        assert_eq!(zeros.kind, ClassifierKind::Mrgg);
    }

    #[test]
    fn random_classifier_extremes() {
        let mut rng = rng::stream(1);
        let empty = Graph::empty(30, 1.0);
        assert!(random_classifier(&empty, &mut rng).unwrap().labels.iter().all(|l| !l));
        let n = 30;
        let full: Vec<u8> = (0..n * n).map(|k| (k / n != k % n) as u8).collect();
        let complete = Graph::from_adjacency(n, full, 1.0).unwrap();
        assert!(random_classifier(&complete, &mut rng).unwrap().labels.iter().all(|&l| l));
        assert!(random_classifier(&Graph::empty(1, 1.0), &mut rng).is_err());
    }

    #[test]
    fn random_classifier_density() {
        let lat = LatitudeDistribution::uniform_null(3).unwrap();
        let chain = sample_chain(10_000, 3, &lat, 3).unwrap();
        // Independent uniform points with the half-sphere envelope: density 1/2.
        let g = sample_graph(&chain, &NamedEnvelope::heaviside(), 1.0, 4).unwrap();
        assert!((g.edge_density() - 0.5).abs() < 0.01);
        let out = random_classifier(&g, &mut rng::stream(5)).unwrap();
        let mean = out.labels.iter().filter(|&&l| l).count() as f64 / out.labels.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn risk_examples() {
        let labels = |l: Vec<bool>| ClassifierOutput { labels: l, kind: ClassifierKind::Bayes };
        assert_eq!(risk(&[1.0, 0.0], &labels(vec![true, false])).unwrap(), 0.0);
        assert_eq!(risk(&[1.0, 0.0], &labels(vec![false, true])).unwrap(), 1.0);
        assert!((risk(&[0.7, 0.2], &labels(vec![true, false])).unwrap() - 0.25).abs() < 1e-15);
        assert!(risk(&[0.7], &labels(vec![true, false])).is_err());
    }

    #[test]
    fn chi2_examples() {
        let null = LatitudeDistribution::uniform_null(3).unwrap();
        let cdf = |x| null.cdf(x);
        let exact: Vec<f64> = [-0.5, 0.5].iter().flat_map(|&c| std::iter::repeat_n(c, 5)).collect();
        assert!(chi2_statistic(&exact, cdf, 2).unwrap().abs() < 1e-12);
        let mut skewed = vec![-0.5; 8];
        skewed.extend([0.5; 2]);
        assert!((chi2_statistic(&skewed, cdf, 2).unwrap() - 3.6).abs() < 1e-12);
        assert!(chi2_statistic(&skewed, cdf, 1).is_err());
        let point = |x: f64| if x >= 0.3 { 1.0 } else { 0.0 };
        assert!(matches!(chi2_statistic(&skewed, point, 4), Err(Error::DegenerateBin { .. })));
    }

    #[test]
    fn chi2_null_distribution() {
        let null = LatitudeDistribution::uniform_null(3).unwrap();
        let mut inside = 0;
        for t in 0..100 {
            let mut rng = rng::stream(1000 + t);
            let s: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
            let stat = chi2_statistic(&s, |x| null.cdf(x), 70).unwrap();
            inside += (40.0..=105.0).contains(&stat) as usize;
        }
        assert!(inside >= 95, "{inside}");
    }

    #[test]
    fn quantile_examples() {
        let v = [3.0, 1.0, 2.0, 5.0, 4.0];
        assert_eq!(quantile_higher(&v, 0.0).unwrap(), 1.0);
        assert_eq!(quantile_higher(&v, 1.0).unwrap(), 5.0);
        assert_eq!(quantile_higher(&v, 0.6).unwrap(), 4.0);
        assert_eq!(quantile_higher(&[2.5; 7], 0.95).unwrap(), 2.5);
    }

    #[test]
    fn calibration_boundaries() {
        let env = NamedEnvelope::heaviside();
        let settings = TestSettings { alpha: 1.0, ..TestSettings::default() };
        let cal = calibrate_threshold(60, 3, &env, &settings, 5, 9).unwrap();
        let min = cal.statistics.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(cal.threshold, min);
        let again = calibrate_threshold(60, 3, &env, &settings, 5, 9).unwrap();
        assert_eq!(cal, again);
        assert!(calibrate_threshold(60, 3, &env, &settings, 0, 9).is_err());
    }

    #[test]
    fn report_decision_and_failure() {
        let env = NamedEnvelope::heaviside();
        let lat = LatitudeDistribution::BetaMixture { a: 2.0, b: 2.0 };
        let chain = sample_chain(80, 3, &lat, 1).unwrap();
        let g = sample_graph(&chain, &env, 1.0, 2).unwrap();
        let settings = TestSettings::default();
        let cal = Calibration { threshold: 50.0, alpha: 0.05, statistics: vec![50.0; 3] };
        let rep = markov_test(&g, 3, &cal, &settings, 3);
        assert!(rep.valid);
        assert_eq!(rep.reject, rep.statistic > rep.threshold);
        assert_eq!(rep.mc_trials, 3);
        let tiny = Graph::empty(3, 1.0);
        let bad = markov_test(&tiny, 3, &cal, &settings, 3);
        assert!(!bad.valid && !bad.reject && bad.error.is_some());
    }

    proptest! {
        #[test]
        fn bayes_dominates(eta in prop::collection::vec(0.0f64..=1.0, 1..40), seed in 0u64..1000) {
            let post = LinkPosterior { eta: eta.clone(), source: PosteriorSource::Oracle };
            let best = risk(&eta, &classify(&post)).unwrap();
            let mut rng = rng::stream(seed);
            for _ in 0..50 {
                let labels = (0..eta.len()).map(|_| rng.random::<bool>()).collect();
                let other = ClassifierOutput { labels, kind: ClassifierKind::Random };
                prop_assert!(best <= risk(&eta, &other).unwrap() + 1e-12);
            }
        }

        #[test]
        fn chi2_permutation_invariant(mut s in prop::collection::vec(-1.0f64..=1.0, 5..60), seed in 0u64..100) {
            let null = LatitudeDistribution::uniform_null(3).unwrap();
            let a = chi2_statistic(&s, |x| null.cdf(x), 7).unwrap();
            let mut rng = rng::stream(seed);
            for i in (1..s.len()).rev() {
                s.swap(i, rng.random_range(0..=i));
            }
            let b = chi2_statistic(&s, |x| null.cdf(x), 7).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn posterior_monotone_in_envelope(r in -1.0f64..=1.0, t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            // 1{t >= hi} <= 1{t >= lo} pointwise.
            let q = PosteriorQuadrature::new(|x| 0.75 * (1.0 - x * x), 16).unwrap();
            let small = q.eval(r, &NamedEnvelope::Heaviside { threshold: hi }).unwrap();
            let large = q.eval(r, &NamedEnvelope::Heaviside { threshold: lo }).unwrap();
            prop_assert!(small <= large + 1e-12);
        }
    }
}
