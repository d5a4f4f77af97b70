//! Latitude recovery: harmonic eigenvector selection, Gram matrix estimate,
//! consecutive-jump distances and a boundary-corrected kernel density.

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::latent::LatentChain;
use crate::spectral::{SortOrder, Spectrum};

const BANDWIDTH_FLOOR: f64 = 1e-3;
const CDF_TABLE_POINTS: usize = 2048;

/// Isolation of the window `values[start..start + d]` from the rest of a
/// spectrum sorted by decreasing value: the smallest distance between an
/// eigenvalue outside the window and the window.
pub fn gap1(values: &[f64], start: usize, d: usize) -> Result<f64> {
    let n = values.len();
    if d == 0 || n < d + 1 {
        return Err(Error::InvalidArgument(format!("{n} eigenvalues leave no complement for a window of {d}")));
    }
    if start + d > n {
        return Err(Error::InvalidArgument(format!("window {start}..{} exceeds {n} eigenvalues", start + d)));
    }
    let window = &values[start..start + d];
    let mut gap = f64::INFINITY;
    for (j, &v) in values.iter().enumerate() {
        if (start..start + d).contains(&j) {
            continue;
        }
        let near = window.iter().map(|w| (v - w).abs()).fold(f64::INFINITY, f64::min);
        gap = gap.min(near);
    }
    Ok(gap)
}

/// `G^ = V V^T / d` for an `n x d` basis `V`.
#[derive(Debug, Clone)]
pub struct GramEstimate {
    basis: Mat<f64>,
    /// Selected eigenvalues, decreasing.
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    pub window_start: usize,
    /// Another window reached the same gap.
    pub tie: bool,
}

impl GramEstimate {
    /// `G*` with entries `<X_i, X_j> / n`, for diagnostics against the truth.
    pub fn from_chain(chain: &LatentChain) -> Self {
        let (n, d) = (chain.len(), chain.dim());
        let scale = (d as f64 / n as f64).sqrt();
        let basis = Mat::from_fn(n, d, |i, k| scale * chain.point(i)[k]);
        GramEstimate { basis, eigenvalues: vec![], gap: f64::NAN, window_start: 0, tie: false }
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Mat<f64> {
        &self.basis
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let d = self.dim();
        (0..d).map(|k| self.basis[(i, k)] * self.basis[(j, k)]).sum::<f64>() / d as f64
    }

    /// Dense `n x n` matrix.
    pub fn matrix(&self) -> Mat<f64> {
        let n = self.n();
        let mut g = Mat::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = self.entry(i, j);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn trace(&self) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim() {
            for i in 0..self.n() {
                s += self.basis[(i, k)].powi(2);
            }
        }
        s / self.dim() as f64
    }

    /// `||G_self - G_other||_F` without forming either matrix.
    pub fn frobenius_error(&self, other: &GramEstimate) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::InvalidArgument(format!("sizes {} and {} differ", self.n(), other.n())));
        }
        let cross = |a: &Mat<f64>, b: &Mat<f64>| {
            let mut s = 0.0;
            for p in 0..a.ncols() {
                for q in 0..b.ncols() {
                    let mut ip = 0.0;
                    for i in 0..a.nrows() {
                        ip += a[(i, p)] * b[(i, q)];
                    }
                    s += ip * ip;
                }
            }
            s
        };
        let (da, db) = (self.dim() as f64, other.dim() as f64);
        let sq = cross(&self.basis, &self.basis) / (da * da) + cross(&other.basis, &other.basis) / (db * db)
            - 2.0 * cross(&self.basis, &other.basis) / (da * db);
        Ok(sq.max(0.0).sqrt())
    }
}

/// Selects the `d` consecutive eigenvalues (in decreasing value order) that are
/// best isolated from the rest and returns the Gram estimate built from their
/// eigenvectors.
pub fn heic(spec: &Spectrum, d: usize) -> Result<GramEstimate> {
    if d == 0 {
        return Err(Error::InvalidArgument("empty harmonic window".into()));
    }
    let spec = if spec.order == SortOrder::ByValueDesc { spec.clone() } else { spec.reordered(SortOrder::ByValueDesc) };
    let vectors = spec
        .vectors
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("eigenvectors are required".into()))?;
    let v = &spec.values;
    let n = v.len();
    if n < d + 1 {
        return Err(Error::InvalidArgument(format!("{n} eigenvalues leave no complement for a window of {d}")));
    }
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut tie = false;
    for s in 0..=n - d {
        let above = if s > 0 { v[s - 1] - v[s] } else { f64::INFINITY };
        let below = if s + d < n { v[s + d - 1] - v[s + d] } else { f64::INFINITY };
        let gap = above.min(below);
        if gap > best.0 {
            best = (gap, s);
            tie = false;
        } else if gap == best.0 {
            tie = true;
        }
    }
    let (gap, start) = best;
    if tie {
        log::warn!("harmonic window is not unique (gap {gap:e}); keeping the one with the largest eigenvalues");
    }
    let basis = Mat::from_fn(vectors.nrows(), d, |i, k| vectors[(i, start + k)]);
    Ok(GramEstimate { basis, eigenvalues: v[start..start + d].to_vec(), gap, window_start: start, tie })
}

/// `r^_i = (n G^)_{i-1,i}` for `i = 2..n`, clamped to `[-1, 1]`.
pub fn extract_distances(gram: &GramEstimate) -> Vec<f64> {
    let n = gram.n();
    (1..n).map(|i| (n as f64 * gram.entry(i - 1, i)).clamp(-1.0, 1.0)).collect()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Interpolated quantile of sorted data (linear between order statistics).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `0.9 min(sd, IQR / 1.34) m^(-1/5)`; the IQR term is dropped when it vanishes.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * m.powf(-0.2)
}

/// Gaussian kernel density on `[-1, 1]`; each kernel is divided by its mass
/// inside the interval so the estimate integrates to one.
#[derive(Debug, Clone)]
pub struct LatitudeDensity {
    samples: Vec<f64>,
    bandwidth: f64,
    masses: Vec<f64>,
    /// `Phi((-1 - r_i) / h)`
    lower: Vec<f64>,
    /// The data-driven bandwidth was below the floor and was raised.
    pub bandwidth_floored: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityRepr {
    samples: Vec<f64>,
    bandwidth: f64,
}

/// A density tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
}

impl LatitudeDensity {
    fn build(samples: Vec<f64>, bandwidth: f64, bandwidth_floored: bool) -> Self {
        let lower: Vec<f64> = samples.iter().map(|&r| std_normal_cdf((-1.0 - r) / bandwidth)).collect();
        let masses = samples
            .iter()
            .zip(&lower)
            .map(|(&r, &lo)| std_normal_cdf((1.0 - r) / bandwidth) - lo)
            .collect();
        LatitudeDensity { samples, bandwidth, masses, lower, bandwidth_floored }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        let h = self.bandwidth;
        let s: f64 = self
            .samples
            .iter()
            .zip(&self.masses)
            .map(|(&r, &m)| std_normal_pdf((x - r) / h) / m)
            .sum();
        s / (h * self.samples.len() as f64)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let h = self.bandwidth;
        let s: f64 = self
            .samples
            .iter()
            .zip(self.masses.iter().zip(&self.lower))
            .map(|(&r, (&m, &lo))| (std_normal_cdf((x - r) / h) - lo) / m)
            .sum();
        (s / self.samples.len() as f64).clamp(0.0, 1.0)
    }

    /// Density on `points` equally spaced points covering `[-1, 1]`.
    pub fn tabulate(&self, points: usize) -> DensityTable {
        let grid: Vec<f64> = (0..points).map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64).collect();
        let pdf = grid.iter().map(|&x| self.pdf(x)).collect();
        DensityTable { grid, pdf }
    }

    /// Inverse-CDF sampler on a 2048-point tabulation.
    pub fn sampler(&self) -> InverseCdf {
        InverseCdf::new(|x| self.cdf(x), CDF_TABLE_POINTS)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DensityRepr { samples: self.samples.clone(), bandwidth: self.bandwidth })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: DensityRepr = serde_json::from_str(s)?;
        fit_latitude(&repr.samples, Some(repr.bandwidth))
    }
}

/// Piecewise-linear inverse of a CDF tabulated on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    pub fn new(cdf: impl Fn(f64) -> f64, points: usize) -> Self {
        let grid: Vec<f64> = (0..points).map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64).collect();
        let mut values: Vec<f64> = grid.iter().map(|&x| cdf(x)).collect();
        values[0] = 0.0;
        values[points - 1] = 1.0;
        for i in 1..points {
            values[i] = values[i].max(values[i - 1]);
        }
        InverseCdf { grid, cdf: values }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.grid.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        if c1 > c0 {
            x0 + (x1 - x0) * (u - c0) / (c1 - c0)
        } else {
            x0
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

/// Kernel density estimate of the latitude from estimated jump distances.
///
/// Without an explicit bandwidth Silverman's rule is used; bandwidths below
/// `1e-3` are raised to it.
pub fn fit_latitude(distances: &[f64], bandwidth: Option<f64>) -> Result<LatitudeDensity> {
    if distances.len() < 2 {
        return Err(Error::InvalidArgument("density estimation needs at least 2 samples".into()));
    }
    if let Some(&x) = distances.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
        return Err(Error::InvalidArgument(format!("distance {x} is outside [-1, 1]")));
    }
    let raw = match bandwidth {
        Some(h) if h.is_finite() && h > 0.0 => h,
        Some(h) => return Err(Error::InvalidArgument(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(distances),
    };
    let floored = !(raw >= BANDWIDTH_FLOOR);
    if floored {
        log::warn!("bandwidth {raw:e} raised to {BANDWIDTH_FLOOR:e}");
    }
    let h = if floored { BANDWIDTH_FLOOR } else { raw };
    Ok(LatitudeDensity::build(distances.to_vec(), h, floored))
}
