//! Markovian latent dynamics on `S^{d-1}` and random graph sampling.
//!
//! `X_1` is uniform on the sphere. Each later point jumps from its
//! predecessor: `X_i = r_i X_{i-1} + sqrt(1 - r_i^2) Y_i` with `Y_i` uniform on
//! the great subsphere orthogonal to `X_{i-1}` and `r_i` drawn from the
//! latitude distribution.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::envelope_fn::Envelope;
use crate::error::{Error, Result};
use crate::harmonics::{check_dim, sphere_constant, weight};
use crate::quadrature::GaussLegendre;
use crate::rng;

type PdfFn = dyn Fn(f64) -> f64 + Send + Sync;
type SamplerFn = dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync;

/// A user-supplied latitude law. Both the density and a sampler are required.
#[derive(Clone)]
pub struct CustomLatitude {
    pdf: Arc<PdfFn>,
    sampler: Arc<SamplerFn>,
}

impl CustomLatitude {
    pub fn new(
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sampler: impl Fn(&mut dyn RngCore) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { pdf: Arc::new(pdf), sampler: Arc::new(sampler) }
    }

    /// Point mass at `r`; its density is reported as zero everywhere.
    pub fn point_mass(r: f64) -> Self {
        Self::new(|_| 0.0, move |_| r)
    }
}

impl fmt::Debug for CustomLatitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomLatitude")
    }
}

/// Law of the jump inner products `r_i = <X_{i-1}, X_i>` on `[-1, 1]`.
#[derive(Debug, Clone)]
pub enum LatitudeDistribution {
    /// `w_beta / ||w_beta||_1`: makes consecutive points independent and uniform.
    UniformNull { dim: usize },
    /// `g(1 - |r|; a, b) / 2`, with `g` the Beta(a, b) density.
    BetaMixture { a: f64, b: f64 },
    /// `g((r + 1) / 2; a, b) / 2`.
    ScaledBeta { a: f64, b: f64 },
    Custom(CustomLatitude),
}

fn beta_density(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let ln = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b);
    let v = ln.exp();
    if v.is_nan() {
        // 0 * ln(0) at an endpoint with exponent 0
        if (x == 0.0 && a == 1.0) || (x == 1.0 && b == 1.0) {
            (-ln_beta(a, b)).exp()
        } else {
            0.0
        }
    } else {
        v
    }
}

fn beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(a, b, x)
    }
}

impl LatitudeDistribution {
    pub fn uniform_null(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(LatitudeDistribution::UniformNull { dim })
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if !(-1.0..=1.0).contains(&r) {
            return 0.0;
        }
        match self {
            LatitudeDistribution::UniformNull { dim } => sphere_constant(*dim) * weight(*dim, r),
            LatitudeDistribution::BetaMixture { a, b } => 0.5 * beta_density(1.0 - r.abs(), *a, *b),
            LatitudeDistribution::ScaledBeta { a, b } => 0.5 * beta_density(0.5 * (r + 1.0), *a, *b),
            LatitudeDistribution::Custom(c) => (c.pdf)(r),
        }
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= -1.0 {
            return 0.0;
        }
        if r >= 1.0 {
            return 1.0;
        }
        match self {
            LatitudeDistribution::UniformNull { dim } => {
                let s = (*dim as f64 - 1.0) / 2.0;
                beta_cdf(0.5 * (r + 1.0), s, s)
            }
            LatitudeDistribution::BetaMixture { a, b } => {
                if r < 0.0 {
                    0.5 * beta_cdf(1.0 + r, *a, *b)
                } else {
                    1.0 - 0.5 * beta_cdf(1.0 - r, *a, *b)
                }
            }
            LatitudeDistribution::ScaledBeta { a, b } => beta_cdf(0.5 * (r + 1.0), *a, *b),
            LatitudeDistribution::Custom(c) => {
                let rule = GaussLegendre::new(64);
                rule.integrate(-1.0, r, |s| (c.pdf)(s))
            }
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = match self {
            LatitudeDistribution::UniformNull { dim } => {
                let s = (*dim as f64 - 1.0) / 2.0;
                2.0 * Beta::new(s, s).expect("valid beta parameters").sample(rng) - 1.0
            }
            LatitudeDistribution::BetaMixture { a, b } => {
                let x: f64 = Beta::new(*a, *b).expect("valid beta parameters").sample(rng);
                if rng.random::<bool>() {
                    1.0 - x
                } else {
                    x - 1.0
                }
            }
            LatitudeDistribution::ScaledBeta { a, b } => {
                2.0 * Beta::new(*a, *b).expect("valid beta parameters").sample(rng) - 1.0
            }
            LatitudeDistribution::Custom(c) => {
                let mut dyn_rng: &mut R = rng;
                (c.sampler)(&mut dyn_rng as &mut dyn RngCore)
            }
        };
        v.clamp(-1.0, 1.0)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            LatitudeDistribution::UniformNull { dim } => check_dim(*dim),
            LatitudeDistribution::BetaMixture { a, b } | LatitudeDistribution::ScaledBeta { a, b } => {
                if *a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("beta parameters ({a}, {b}) must be positive")))
                }
            }
            LatitudeDistribution::Custom(_) => Ok(()),
        }
    }
}

/// Density of `lat` at `r`.
pub fn latitude_pdf(lat: &LatitudeDistribution, r: f64) -> f64 {
    lat.pdf(r)
}

/// Serializable subset of [`LatitudeDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LatitudeSpec {
    UniformNull,
    BetaMixture { a: f64, b: f64 },
    ScaledBeta { a: f64, b: f64 },
}

impl LatitudeSpec {
    pub fn distribution(&self, dim: usize) -> Result<LatitudeDistribution> {
        let lat = match *self {
            LatitudeSpec::UniformNull => LatitudeDistribution::UniformNull { dim },
            LatitudeSpec::BetaMixture { a, b } => LatitudeDistribution::BetaMixture { a, b },
            LatitudeSpec::ScaledBeta { a, b } => LatitudeDistribution::ScaledBeta { a, b },
        };
        check_dim(dim)?;
        lat.validate()?;
        Ok(lat)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

/// Uniform point on the unit sphere of `R^d`.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut v) > 1e-12 {
            return v;
        }
    }
}

/// Uniform unit vector orthogonal to the unit vector `x`.
pub fn sample_uniform_orthogonal<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let c = dot(&w, x);
        w.iter_mut().zip(x).for_each(|(wi, xi)| *wi -= c * xi);
        if normalize(&mut w) < 1e-12 {
            continue;
        }
        // second pass removes the rounding left by the first projection
        let c = dot(&w, x);
        w.iter_mut().zip(x).for_each(|(wi, xi)| *wi -= c * xi);
        normalize(&mut w);
        return w;
    }
}

/// Latent positions of one realization of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentChain {
    points: Vec<f64>,
    jumps: Vec<f64>,
    dim: usize,
    seed: u64,
}

impl LatentChain {
    /// Builds a chain from row-major points; jumps are recomputed from them.
    pub fn from_points(points: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        if points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not form rows of length {dim}",
                points.len()
            )));
        }
        for (i, row) in points.chunks(dim).enumerate() {
            let norm = dot(row, row).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("point {i} has norm {norm}")));
            }
        }
        let jumps = points
            .chunks(dim)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| dot(w[0], w[1]).clamp(-1.0, 1.0))
            .collect();
        Ok(Self { points, jumps, dim, seed })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `r_2, ..., r_n`.
    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        dot(self.point(i), self.point(j))
    }
}

/// Samples `n` points of the latent Markov chain.
pub fn sample_chain(n: usize, d: usize, lat: &LatitudeDistribution, seed: u64) -> Result<LatentChain> {
    check_dim(d)?;
    lat.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("a chain needs at least one point".into()));
    }
    let mut rng = rng::stream(seed);
    let mut points = Vec::with_capacity(n * d);
    let mut jumps = Vec::with_capacity(n - 1);
    let mut x = sample_uniform_sphere(d, &mut rng);
    points.extend_from_slice(&x);
    for _ in 1..n {
        let r = lat.sample(&mut rng);
        let y = sample_uniform_orthogonal(&x, &mut rng);
        let s = (1.0 - r * r).max(0.0).sqrt();
        let mut next: Vec<f64> = x.iter().zip(&y).map(|(a, b)| r * a + s * b).collect();
        normalize(&mut next);
        jumps.push(r);
        points.extend_from_slice(&next);
        x = next;
    }
    Ok(LatentChain { points, jumps, dim: d, seed })
}

/// Symmetric hollow 0/1 adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<u8>,
    zeta: f64,
}

impl Graph {
    pub fn empty(n: usize, zeta: f64) -> Self {
        Self { n, adjacency: vec![0; n * n], zeta }
    }

    /// Validates and wraps a row-major adjacency matrix.
    pub fn from_adjacency(n: usize, adjacency: Vec<u8>, zeta: f64) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "adjacency has {} entries, expected {}",
                adjacency.len(),
                n * n
            )));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::InvalidArgument(format!("sparsity factor {zeta} outside (0, 1]")));
        }
        for i in 0..n {
            if adjacency[i * n + i] != 0 {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            for j in 0..i {
                let (a, b) = (adjacency[i * n + j], adjacency[j * n + i]);
                if a > 1 || b > 1 || a != b {
                    return Err(Error::InvalidArgument(format!("entries ({i}, {j}) not symmetric 0/1")));
                }
            }
        }
        Ok(Self { n, adjacency, zeta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j] != 0
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.adjacency[i * self.n..(i + 1) * self.n]
    }

    fn set(&mut self, i: usize, j: usize) {
        self.adjacency[i * self.n + j] = 1;
        self.adjacency[j * self.n + i] = 1;
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().map(|&v| v as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|&v| v as usize).sum::<usize>() / 2
    }

    /// `2 |E| / (n (n - 1))`.
    pub fn edge_density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        2.0 * self.edge_count() as f64 / (self.n as f64 * (self.n as f64 - 1.0))
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.n as f64
    }

    /// Relabels nodes: node `perm[i]` of the result is node `i` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Graph::empty(self.n, self.zeta);
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j) {
                    out.set(perm[i], perm[j]);
                }
            }
        }
        out
    }
}

/// Draws `A_ij ~ Bernoulli(zeta p(<X_i, X_j>))` independently for `i < j`.
pub fn sample_graph<E: Envelope + ?Sized>(
    chain: &LatentChain,
    p: &E,
    zeta: f64,
    seed: u64,
) -> Result<Graph> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidArgument(format!("sparsity factor {zeta} outside (0, 1]")));
    }
    let n = chain.len();
    let mut rng = rng::stream(seed);
    let mut g = Graph::empty(n, zeta);
    for i in 0..n {
        for j in i + 1..n {
            let t = chain.inner(i, j).clamp(-1.0, 1.0);
            let v = p.eval(t);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::EnvelopeRange { value: v, at: t });
            }
            if rng.random::<f64>() < zeta * v {
                g.set(i, j);
            }
        }
    }
    Ok(g)
}
