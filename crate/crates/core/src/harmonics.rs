//! Gegenbauer polynomials and spherical-harmonic bookkeeping on `S^{d-1}`.
//!
//! An envelope `p : [-1, 1] -> [0, 1]` defines the zonal kernel
//! `W(x, y) = p(<x, y>)`. Its integral operator is diagonal in the spherical
//! harmonics: degree `l` carries the eigenvalue `p*_l` with multiplicity
//! `d_l`, and `p = sum_l p*_l c_l G_l^beta` with `beta = (d - 2) / 2` and
//! `c_l = (2l + d - 2) / (d - 2)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::envelope_fn::Envelope;
use crate::error::{Error, Result};
use crate::quadrature::{pieces, GaussLegendre};

/// Default number of Gauss–Legendre nodes per integration piece.
pub const DEFAULT_QUAD_NODES: usize = 128;

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d < 3 {
        Err(Error::Dimension(d))
    } else {
        Ok(())
    }
}

/// A spherical-harmonic degree together with the ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmonicIndex {
    degree: usize,
    dim: usize,
}

impl HarmonicIndex {
    pub fn new(degree: usize, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { degree, dim })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `d_l`, the dimension of the degree-`l` harmonic space.
    pub fn multiplicity(&self) -> Result<u64> {
        harmonic_dim(self.degree, self.dim)
    }

    /// `c_l = (2l + d - 2) / (d - 2)`.
    pub fn normalization(&self) -> f64 {
        normalization(self.degree, self.dim)
    }

    pub fn beta(&self) -> f64 {
        beta(self.dim)
    }
}

/// `beta = (d - 2) / 2`.
pub fn beta(d: usize) -> f64 {
    (d as f64 - 2.0) / 2.0
}

pub fn normalization(l: usize, d: usize) -> f64 {
    (2.0 * l as f64 + d as f64 - 2.0) / (d as f64 - 2.0)
}

/// `b_d = Gamma(d/2) / (Gamma(1/2) Gamma(d/2 - 1/2))`, the inverse mass of `w_beta`.
pub fn sphere_constant(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    (ln_gamma(h) - ln_gamma(0.5) - ln_gamma(h - 0.5)).exp()
}

/// Gegenbauer weight `w_beta(t) = (1 - t^2)^(beta - 1/2)`.
pub fn weight(d: usize, t: f64) -> f64 {
    let e = beta(d) - 0.5;
    if e == 0.0 {
        1.0
    } else {
        (1.0 - t * t).max(0.0).powf(e)
    }
}

fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow("binomial coefficient"))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

/// `d_l`: 1 for `l = 0`, `d` for `l = 1`, `C(l+d-1, l) - C(l+d-3, l-2)` otherwise.
pub fn harmonic_dim(l: usize, d: usize) -> Result<u64> {
    check_dim(d)?;
    match l {
        0 => Ok(1),
        1 => Ok(d as u64),
        _ => {
            let (l, d) = (l as u64, d as u64);
            let v = binomial(l + d - 1, l)? - binomial(l + d - 3, l - 2)?;
            u64::try_from(v).map_err(|_| Error::Overflow("harmonic dimension"))
        }
    }
}

/// `R~ = sum_{l <= R} d_l`.
pub fn cumulative_dim(r: usize, d: usize) -> Result<u64> {
    (0..=r).try_fold(0u64, |acc, l| {
        acc.checked_add(harmonic_dim(l, d)?)
            .ok_or(Error::Overflow("cumulative dimension"))
    })
}

/// Largest `R` with `R~ <= n`, or `None` when even `R = 0` does not fit.
pub fn max_resolution(n: usize, d: usize) -> Result<Option<usize>> {
    check_dim(d)?;
    let mut total = 0u64;
    let mut best = None;
    for l in 0.. {
        total += harmonic_dim(l, d)?;
        if total > n as u64 {
            break;
        }
        best = Some(l);
    }
    Ok(best)
}

/// `G_k^beta(t)` by the three-term recurrence.
pub fn gegenbauer(k: usize, beta: f64, t: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 2.0 * beta * t;
    for j in 2..=k {
        let jf = j as f64;
        let next = (2.0 * t * (jf + beta - 1.0) * cur - (jf + 2.0 * beta - 2.0) * prev) / jf;
        prev = cur;
        cur = next;
    }
    cur
}

/// All of `G_0^beta(t), ..., G_k^beta(t)`.
pub fn gegenbauer_all(k: usize, beta: f64, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(1.0);
    if k == 0 {
        return out;
    }
    out.push(2.0 * beta * t);
    for j in 2..=k {
        let jf = j as f64;
        let v = (2.0 * t * (jf + beta - 1.0) * out[j - 1] - (jf + 2.0 * beta - 2.0) * out[j - 2]) / jf;
        out.push(v);
    }
    out
}

/// Harmonic eigenvalues `p*_0, ..., p*_R` of a zonal kernel on `S^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpectrum {
    pub coefficients: Vec<f64>,
    pub dim: usize,
}

impl EnvelopeSpectrum {
    pub fn new(coefficients: Vec<f64>, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("empty spectrum".into()));
        }
        Ok(Self { coefficients, dim })
    }

    pub fn resolution(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Operator eigenvalues: each `p*_l` repeated `d_l` times.
    pub fn with_multiplicity(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (l, &p) in self.coefficients.iter().enumerate() {
            let m = harmonic_dim(l, self.dim)? as usize;
            out.extend(std::iter::repeat_n(p, m));
        }
        Ok(out)
    }

    /// `sum_l p*_l c_l G_l^beta(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        let b = beta(self.dim);
        gegenbauer_all(self.resolution(), b, t)
            .iter()
            .zip(&self.coefficients)
            .enumerate()
            .map(|(l, (g, p))| p * normalization(l, self.dim) * g)
            .sum()
    }
}

/// Harmonic coefficients `(c_l b_d / d_l) int p(t) G_l^beta(t) w_beta(t) dt` for `l <= r`.
///
/// The integral is split at the envelope's breakpoints and each piece uses a
/// `quad_nodes`-point Gauss–Legendre rule with the weight in the integrand.
/// Unlike [`envelope_spectrum`], `f` is not required to map into `[0, 1]`.
pub fn harmonic_coefficients<E: Envelope + ?Sized>(
    f: &E,
    d: usize,
    r: usize,
    quad_nodes: usize,
) -> Result<EnvelopeSpectrum> {
    check_dim(d)?;
    if quad_nodes < 2 * r + 2 {
        return Err(Error::InvalidArgument(format!(
            "{quad_nodes} quadrature nodes cannot resolve degree {r} (need >= {})",
            2 * r + 2
        )));
    }
    let rule = GaussLegendre::new(quad_nodes);
    let b = beta(d);
    let mut integrals = vec![0.0; r + 1];
    for (lo, hi) in pieces(f.breakpoints()) {
        for (t, w) in rule.mapped(lo, hi) {
            let v = f.eval(t);
            if !v.is_finite() {
                return Err(Error::NonFinite { value: v, at: t });
            }
            let ww = w * v * weight(d, t);
            for (acc, g) in integrals.iter_mut().zip(gegenbauer_all(r, b, t)) {
                *acc += ww * g;
            }
        }
    }
    let bd = sphere_constant(d);
    let coefficients = integrals
        .into_iter()
        .enumerate()
        .map(|(l, int)| {
            Ok(normalization(l, d) * bd / harmonic_dim(l, d)? as f64 * int)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnvelopeSpectrum { coefficients, dim: d })
}

/// `sum_l d_l (p*_l)^2 = b_d int p(t)^2 w_beta(t) dt`.
pub fn squared_norm<E: Envelope + ?Sized>(f: &E, d: usize, quad_nodes: usize) -> Result<f64> {
    check_dim(d)?;
    let rule = GaussLegendre::new(quad_nodes.max(2));
    let mut acc = 0.0;
    for (lo, hi) in pieces(f.breakpoints()) {
        for (t, w) in rule.mapped(lo, hi) {
            let v = f.eval(t);
            if !v.is_finite() {
                return Err(Error::NonFinite { value: v, at: t });
            }
            acc += w * v * v * weight(d, t);
        }
    }
    Ok(sphere_constant(d) * acc)
}

/// True envelope spectrum `p*_0, ..., p*_R` by quadrature.
pub fn envelope_spectrum<E: Envelope + ?Sized>(
    p: &E,
    d: usize,
    r: usize,
    quad_nodes: usize,
) -> Result<EnvelopeSpectrum> {
    harmonic_coefficients(p, d, r, quad_nodes)
}

/// Evaluates `sum_l p*_l c_l G_l^beta` on `grid`, optionally clamped to `[0, 1]`.
pub fn reconstruct_envelope(spec: &EnvelopeSpectrum, grid: &[f64], clip: bool) -> Vec<f64> {
    grid.iter()
        .map(|&t| {
            let v = spec.eval(t);
            if clip {
                v.clamp(0.0, 1.0)
            } else {
                v
            }
        })
        .collect()
}

/// Weighted Sobolev norm `[sum_l d_l |p*_l|^2 (1 + (l (l + 2 beta))^s)]^(1/2)`.
pub fn sobolev_norm(spec: &EnvelopeSpectrum, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("regularity s = {s} must be positive")));
    }
    let b = beta(spec.dim);
    let mut acc = 0.0;
    for (l, &g) in spec.coefficients.iter().enumerate() {
        let lf = l as f64;
        acc += harmonic_dim(l, spec.dim)? as f64 * g * g * (1.0 + (lf * (lf + 2.0 * b)).powf(s));
    }
    Ok(acc.sqrt())
}
