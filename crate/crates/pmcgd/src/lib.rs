//! Robust model-based clustering with parsimonious mixtures of contaminated
//! Gaussian distributions.
//!
//! Each mixture component is a contaminated Gaussian: a Gaussian for the good
//! observations plus an inflated-covariance Gaussian, sharing the same mean,
//! for outliers, spurious points, and noise (bad points). Component
//! covariances are eigen-decomposed into volume, shape, and orientation, and
//! constraining those factors across components yields fourteen parsimonious
//! structures. Models are fitted by an expectation-conditional-maximization
//! algorithm warm-started from the corresponding Gaussian mixture, compared
//! by BIC, and every observation comes back with a cluster assignment and a
//! good/bad flag.

pub mod classify;
pub mod covariance;
pub mod data;
pub mod datagen;
pub mod ecm;
pub mod error;
pub mod gaussian;
pub mod guide;
pub mod selection;

pub use classify::{detect_bad, map_assign, misallocation_count, MisallocationMode, ObservationLabel};
pub use covariance::{decompose, update_sigmas, EigenDecomposition, ScatterSet, StructureId};
pub use data::DataMatrix;
pub use ecm::{fit, fit_gpcm, FitConfig, FitResult, ModelParams, Posteriors};
pub use error::{Error, Result};
pub use gaussian::{contaminated_log_pdf, log_gaussian_pdf, mahalanobis_sq, mixture_log_pdf, CovMatrix};
pub use selection::{bic, count_free_params, sweep, RankedResults, SweepGrid};
