//! Envelope recovery from the spectrum of the normalized adjacency matrix.

mod hac;
mod scchei;

pub use hac::{hac_complete, Dendrogram, DendrogramNode};
pub use scchei::{intra_class_variance, scchei, scchei_values, ClusterAssignment};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{check_dim, cumulative_dim, max_resolution, EnvelopeSpectrum};
use crate::latent::Graph;
use crate::spectral::{build_that, sym_eigen, SortOrder, Spectrum};

/// `count` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[count - 1] = hi;
    g
}

/// 81 log-spaced penalty constants over `[1e-5, 1e-1]`.
pub fn default_kappa_grid() -> Vec<f64> {
    log_grid(1e-5, 1e-1, 81)
}

/// Outcome of the slope heuristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSelection {
    pub r_hat: usize,
    pub kappa0: f64,
    /// `I_R` for `R = 0, ..., R_max`.
    pub intra_class_variance: Vec<f64>,
    /// `R(kappa)` at each grid point.
    pub path: Vec<usize>,
    pub kappa_grid: Vec<f64>,
    /// Set when `R(kappa)` never changes over the grid.
    pub degenerate: bool,
}

fn penalized_argmin(table: &[f64], dims: &[f64], kappa: f64, n: usize) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (r, (&i, &dim)) in table.iter().zip(dims).enumerate() {
        let crit = i + kappa * dim / n as f64;
        if crit < best.0 {
            best = (crit, r);
        }
    }
    best.1
}

/// Slope heuristic on a precomputed `I_R` table (`table[R]` for `R = 0..`).
pub fn select_from_table(table: &[f64], d: usize, n: usize, kappa_grid: &[f64]) -> Result<ResolutionSelection> {
    check_dim(d)?;
    if table.is_empty() {
        return Err(Error::InvalidArgument("empty intra-class variance table".into()));
    }
    if kappa_grid.len() < 2 || kappa_grid.windows(2).any(|w| !(w[0] < w[1])) || !(kappa_grid[0] > 0.0) {
        return Err(Error::InvalidArgument(
            "penalty grid must be positive, strictly increasing, with at least 2 points".into(),
        ));
    }
    let dims = (0..table.len())
        .map(|r| cumulative_dim(r, d).map(|v| v as f64))
        .collect::<Result<Vec<_>>>()?;
    let path: Vec<usize> = kappa_grid.iter().map(|&k| penalized_argmin(table, &dims, k, n)).collect();

    let mut jump = (0.0, 0);
    for j in 0..path.len() - 1 {
        let drop = dims[path[j]] - dims[path[j + 1]];
        if drop > jump.0 {
            jump = (drop, j + 1);
        }
    }
    let degenerate = jump.0 == 0.0;
    if degenerate {
        log::warn!("selected resolution is constant over the penalty grid; using the smallest penalty");
    }
    let kappa0 = kappa_grid[jump.1];
    let r_hat = penalized_argmin(table, &dims, 2.0 * kappa0, n);
    Ok(ResolutionSelection {
        r_hat,
        kappa0,
        intra_class_variance: table.to_vec(),
        path,
        kappa_grid: kappa_grid.to_vec(),
        degenerate,
    })
}

/// `I_R` for `R = 0, ..., R_max`, the largest resolution with `R~ <= n`.
pub fn variance_table(spec: &Spectrum, d: usize, n: usize) -> Result<Vec<f64>> {
    let values = scchei::magnitude_sorted(spec);
    let rmax = max_resolution(values.len().min(n), d)?
        .ok_or_else(|| Error::InvalidArgument("spectrum is empty".into()))?;
    (0..=rmax)
        .into_par_iter()
        .map(|r| scchei_values(&values, d, r).map(|a| intra_class_variance(&a, n)))
        .collect()
}

/// Resolution by the slope heuristic on eigenvalues already rescaled by `1/zeta`.
pub fn select_resolution(spec: &Spectrum, d: usize, n: usize, kappa_grid: &[f64]) -> Result<ResolutionSelection> {
    let table = variance_table(spec, d, n)?;
    select_from_table(&table, d, n, kappa_grid)
}

/// Estimated envelope spectrum with its selection diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEstimate {
    #[serde(rename = "d")]
    pub dim: usize,
    #[serde(rename = "R_hat")]
    pub r_hat: usize,
    pub kappa0: f64,
    pub p_hat: Vec<f64>,
    pub intra_class_variance: Vec<f64>,
}

impl EnvelopeEstimate {
    pub fn spectrum(&self) -> EnvelopeSpectrum {
        EnvelopeSpectrum { coefficients: self.p_hat.clone(), dim: self.dim }
    }

    /// Estimated envelope at `t`, clamped to `[0, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        self.spectrum().eval(t).clamp(0.0, 1.0)
    }

    /// `p^_k` repeated `d_k` times.
    pub fn with_multiplicity(&self) -> Result<Vec<f64>> {
        self.spectrum().with_multiplicity()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Full pipeline from a spectrum of `T^_n` that has not been rescaled yet.
pub fn estimate_envelope_from_spectrum(
    spec: &Spectrum,
    d: usize,
    n: usize,
    zeta: f64,
    kappa_grid: &[f64],
) -> Result<EnvelopeEstimate> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidArgument(format!("sparsity {zeta} must lie in (0, 1]")));
    }
    let scaled = Spectrum {
        values: scchei::magnitude_sorted(spec).iter().map(|v| v / zeta).collect(),
        vectors: None,
        order: SortOrder::ByMagnitudeDesc,
    };
    let sel = select_resolution(&scaled, d, n, kappa_grid)?;
    let assign = scchei(&scaled, d, sel.r_hat)?;
    Ok(EnvelopeEstimate {
        dim: d,
        r_hat: sel.r_hat,
        kappa0: sel.kappa0,
        p_hat: assign.means(),
        intra_class_variance: sel.intra_class_variance,
    })
}

/// Envelope estimate from an observed graph.
pub fn estimate_envelope(g: &Graph, d: usize, zeta: f64, kappa_grid: &[f64]) -> Result<EnvelopeEstimate> {
    check_dim(d)?;
    let spec = sym_eigen(&build_that(g), false, SortOrder::ByMagnitudeDesc)?;
    estimate_envelope_from_spectrum(&spec, d, g.n(), zeta, kappa_grid)
}
