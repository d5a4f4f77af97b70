//! Markov random geometric graphs on the sphere: simulation, nonparametric
//! recovery of the envelope and latitude functions from the graph spectrum,
//! link prediction and a test for Markovian latent dynamics.

pub mod envelope;
pub mod envelope_fn;
pub mod error;
pub mod experiments;
pub mod harmonics;
pub mod inference;
pub mod latent;
pub mod latitude;
pub mod io;
pub mod quadrature;
pub mod rng;
pub mod spectral;

pub use envelope::{
    default_kappa_grid, estimate_envelope, hac_complete, intra_class_variance, scchei, select_resolution,
    ClusterAssignment, Dendrogram, DendrogramNode, EnvelopeEstimate, ResolutionSelection,
};
pub use envelope_fn::{Clipped, Envelope, NamedEnvelope};
pub use error::{Error, Result};
pub use faer::Mat;
pub use harmonics::{
    cumulative_dim, envelope_spectrum, gegenbauer, harmonic_coefficients, harmonic_dim, reconstruct_envelope,
    sobolev_norm, EnvelopeSpectrum, HarmonicIndex,
};
pub use latent::{
    latitude_pdf, sample_chain, sample_graph, Graph, LatentChain, LatitudeDistribution, LatitudeSpec,
};
pub use rng::Lane;
pub use spectral::{build_that, delta2, sym_eigen, SortOrder, Spectrum};
