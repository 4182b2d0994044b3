//! Expectation-conditional-maximization fitting of one (structure, G) model.
//!
//! One iteration is an E-step followed by two conditional maximizations. The
//! E-step produces, per observation, component responsibilities `z` and
//! within-component good-point probabilities `v`. The first CM-step updates
//! weights, good proportions, means, and the constrained covariances from
//! down-weighted scattering matrices; the second updates each component's
//! inflation `η` on its own. Convergence is declared from the Aitken
//! extrapolation of the log-likelihood sequence.
//!
//! Fits are warm-started from the corresponding plain Gaussian mixture
//! (the same engine with every `v` pinned to 1), itself started from random
//! hard partitions. All randomness derives from the seed in [`FitConfig`],
//! so a fit is reproducible bit-for-bit.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::covariance::{update_sigmas, EigenDecomposition, ScatterSet, StructureId};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gaussian::{self, log_sum_exp, ComponentParams, CovMatrix, LN_2PI};

/// Clamp margin keeping good proportions strictly inside (α*, 1).
pub const ALPHA_MARGIN: f64 = 1e-6;
/// Clamp margin keeping inflations strictly above 1.
pub const ETA_MARGIN: f64 = 1e-6;

/// Effective sizes below this fraction of n abort the fit.
const DEATH_FRACTION: f64 = 1e-8;
/// Relative ridge used when a composed covariance fails to factorize.
const COMPOSE_RIDGE: f64 = 1e-10;
/// Escalation attempts for the compose-time ridge.
const COMPOSE_RIDGE_TRIES: usize = 6;

/// Tuning knobs for a fit.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Aitken convergence tolerance on the extrapolated log-likelihood gap.
    pub epsilon: f64,
    /// Upper bound η* for the inflation parameters, exclusive via the margin.
    pub eta_star: f64,
    /// Lower bound α* for the good proportions, exclusive via the margin.
    pub alpha_star: f64,
    /// Maximum number of CM sweeps (must be at least 1).
    pub max_iter: usize,
    /// Seed for every random choice made during initialization.
    pub seed: u64,
    /// Random restarts for the Gaussian-mixture initializer.
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            eta_star: 1000.0,
            alpha_star: 0.5,
            max_iter: 500,
            seed: 0,
            restarts: 10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive, got {}", self.epsilon),
            });
        }
        if !(self.eta_star >= 1.0 + ETA_MARGIN) {
            return Err(Error::InvalidParameter {
                name: "eta_star",
                reason: format!("must be at least 1 + {ETA_MARGIN:e}, got {}", self.eta_star),
            });
        }
        if !(0.0..=1.0 - 2.0 * ALPHA_MARGIN).contains(&self.alpha_star) {
            return Err(Error::InvalidParameter {
                name: "alpha_star",
                reason: format!(
                    "must lie in [0, 1 - {:e}], got {}",
                    2.0 * ALPHA_MARGIN,
                    self.alpha_star
                ),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter {
                name: "restarts",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// One mixture component with its covariance in factorized form.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub pi: f64,
    pub alpha: f64,
    pub mu: DVector<f64>,
    pub cov: EigenDecomposition,
    pub eta: f64,
}

/// Full parameter set of a contaminated Gaussian mixture under one structure.
#[derive(Debug, Clone)]
pub struct ModelParams {
    structure: StructureId,
    components: Vec<MixtureComponent>,
}

impl ModelParams {
    /// Validates weights (sum 1 within 1e-10), proportions, inflations, and
    /// consistent dimensions.
    pub fn new(structure: StructureId, components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyData);
        }
        let weight_sum: f64 = components.iter().map(|c| c.pi).sum();
        if (weight_sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter {
                name: "pi",
                reason: format!("mixing weights sum to {weight_sum}, expected 1"),
            });
        }
        let p = components[0].mu.len();
        for c in &components {
            if !(c.pi > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "pi",
                    reason: "mixing weights must be positive".into(),
                });
            }
            if !(c.alpha > 0.0 && c.alpha < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "alpha",
                    reason: format!("good proportion must lie in (0, 1), got {}", c.alpha),
                });
            }
            if !(c.eta > 1.0) || !c.eta.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "eta",
                    reason: format!("inflation must exceed 1, got {}", c.eta),
                });
            }
            if c.mu.len() != p || c.cov.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: c.mu.len().max(c.cov.dim()),
                });
            }
        }
        Ok(Self {
            structure,
            components,
        })
    }

    pub fn structure(&self) -> StructureId {
        self.structure
    }

    /// Number of components G.
    pub fn g(&self) -> usize {
        self.components.len()
    }

    /// Dimension p.
    pub fn p(&self) -> usize {
        self.components[0].mu.len()
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// Composes the covariances and bundles everything for density
    /// evaluation. Fails on factorization problems; no regularization is
    /// applied at this level.
    pub fn density_components(&self) -> Result<Vec<ComponentParams>> {
        self.components
            .iter()
            .map(|c| {
                ComponentParams::new(c.pi, c.alpha, c.mu.clone(), c.cov.compose()?, c.eta)
            })
            .collect()
    }

    fn with_etas(mut self, etas: Vec<f64>) -> Self {
        for (c, eta) in self.components.iter_mut().zip(etas) {
            c.eta = eta;
        }
        self
    }
}

/// Posterior matrices from an E-step: component responsibilities `Z` (rows
/// sum to 1) and good-point probabilities `V` (entries in [0, 1]).
#[derive(Debug, Clone)]
pub struct Posteriors {
    z: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl Posteriors {
    pub fn new(z: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if z.shape() != v.shape() {
            return Err(Error::DimensionMismatch {
                expected: z.nrows(),
                found: v.nrows(),
            });
        }
        for i in 0..z.nrows() {
            let sum: f64 = z.row(i).iter().sum();
            if (sum - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParameter {
                    name: "z",
                    reason: format!("row {i} sums to {sum}, expected 1"),
                });
            }
        }
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParameter {
                name: "v",
                reason: "entries must lie in [0, 1]".into(),
            });
        }
        Ok(Self { z, v })
    }

    /// Responsibilities, n x G.
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Good-point probabilities, n x G.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn g(&self) -> usize {
        self.z.ncols()
    }
}

/// Everything a finished fit reports.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub posteriors: Posteriors,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// Log-likelihood at the final parameters.
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Aitken acceleration check on three consecutive log-likelihood values.
///
/// Returns the convergence flag and the extrapolated asymptote `l∞`.
/// Converged means `0 ≤ l∞ − l1 < epsilon`; a flat sequence
/// (`l1 − l0 < 1e-14`) is converged by definition.
pub fn aitken_check(l0: f64, l1: f64, l2: f64, epsilon: f64) -> (bool, f64) {
    let denom = l1 - l0;
    if denom < 1e-14 {
        return (true, l1);
    }
    let a = (l2 - l1) / denom;
    let l_inf = l1 + (l2 - l1) / (1.0 - a);
    let gap = l_inf - l1;
    (gap >= 0.0 && gap < epsilon, l_inf)
}

/// Maximizer over (α*, 1) of Σ_i z_i [v_i ln α + (1 − v_i) ln(1 − α)].
///
/// The unconstrained stationary point is Σ z v / Σ z; the result is clamped
/// to [α* + 1e-6, 1 − 1e-6] to keep both log terms finite. A component with
/// no responsibility mass is reported as dead (the component index is not
/// known at this level and reads 0).
pub fn update_alpha(zcol: &[f64], vcol: &[f64], alpha_star: f64) -> Result<f64> {
    if zcol.len() != vcol.len() {
        return Err(Error::LabelLengthMismatch {
            left: zcol.len(),
            right: vcol.len(),
        });
    }
    let z_sum: f64 = zcol.iter().sum();
    if !(z_sum > 0.0) {
        return Err(Error::ComponentDeath {
            component: 0,
            size: z_sum,
        });
    }
    let good_mass: f64 = zcol.iter().zip(vcol).map(|(z, v)| z * v).sum();
    // The two clamp ends can cross by one ulp when alpha_star sits at its
    // admissible maximum; collapse to the upper end in that case.
    let hi = 1.0 - ALPHA_MARGIN;
    let lo = (alpha_star + ALPHA_MARGIN).min(hi);
    Ok((good_mass / z_sum).clamp(lo, hi))
}

/// Whether a sweep fits the contaminated model or its plain Gaussian
/// degenerate (v pinned to 1, η ignored).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Contaminated,
    Gaussian,
}

/// Composed covariance plus the pieces the E-step reuses per observation.
struct ComponentCache {
    ln_pi: f64,
    ln_alpha: f64,
    ln_one_minus_alpha: f64,
    mu: DVector<f64>,
    cov: CovMatrix,
    eta: f64,
}

fn build_cache(
    psi: &ModelParams,
    warnings: &mut Vec<String>,
    regularize: bool,
) -> Result<Vec<ComponentCache>> {
    let p = psi.p();
    psi.components()
        .iter()
        .enumerate()
        .map(|(g, c)| {
            let base = c.cov.matrix();
            let cov = if regularize {
                let mut attempt = base.clone();
                let mut found = None;
                for k in 0..=COMPOSE_RIDGE_TRIES {
                    match CovMatrix::new(attempt.clone()) {
                        Ok(cm) => {
                            if k > 0 {
                                push_warning(
                                    warnings,
                                    format!("component {g}: covariance ridged to factorize"),
                                );
                            }
                            found = Some(cm);
                            break;
                        }
                        Err(_) if k < COMPOSE_RIDGE_TRIES => {
                            let ridge =
                                COMPOSE_RIDGE * 10f64.powi(k as i32) * base.trace() / p as f64;
                            attempt = base.clone();
                            for i in 0..p {
                                attempt[(i, i)] += ridge;
                            }
                        }
                        Err(_) => {}
                    }
                }
                found.ok_or(Error::FactorizationFailure { component: g })?
            } else {
                c.cov.compose()?
            };
            Ok(ComponentCache {
                ln_pi: c.pi.ln(),
                ln_alpha: c.alpha.ln(),
                ln_one_minus_alpha: (1.0 - c.alpha).ln(),
                mu: c.mu.clone(),
                cov,
                eta: c.eta,
            })
        })
        .collect()
}

fn push_warning(warnings: &mut Vec<String>, w: String) {
    if !warnings.contains(&w) {
        warnings.push(w);
    }
}

fn e_step_cached(
    x: &DataMatrix,
    cache: &[ComponentCache],
    mode: Mode,
) -> Result<(Posteriors, f64)> {
    let n = x.n_rows();
    let g = cache.len();
    let p = x.n_cols() as f64;
    let mut z = DMatrix::zeros(n, g);
    let mut v = DMatrix::zeros(n, g);
    let mut loglik = 0.0;
    let mut terms = vec![0.0; g];
    let mut good_lps = vec![0.0; g];
    for i in 0..n {
        let xi = x.row(i);
        for (k, c) in cache.iter().enumerate() {
            let delta = gaussian::mahalanobis_sq(&xi, &c.mu, &c.cov)?;
            let lg_good = -0.5 * (p * LN_2PI + c.cov.log_det() + delta);
            good_lps[k] = lg_good;
            let lf = match mode {
                Mode::Gaussian => lg_good,
                Mode::Contaminated => {
                    let lg_bad = -0.5
                        * (p * LN_2PI + p * c.eta.ln() + c.cov.log_det() + delta / c.eta);
                    log_sum_exp(&[
                        c.ln_alpha + lg_good,
                        c.ln_one_minus_alpha + lg_bad,
                    ])
                }
            };
            terms[k] = c.ln_pi + lf;
        }
        let lp = log_sum_exp(&terms);
        if !lp.is_finite() {
            return Err(Error::Underflow {
                row: x.row_ids()[i],
            });
        }
        let mut row_sum = 0.0;
        for k in 0..g {
            let zik = (terms[k] - lp).exp();
            z[(i, k)] = zik;
            row_sum += zik;
            v[(i, k)] = match mode {
                Mode::Gaussian => 1.0,
                Mode::Contaminated => {
                    let lf = terms[k] - cache[k].ln_pi;
                    (cache[k].ln_alpha + good_lps[k] - lf).exp().clamp(0.0, 1.0)
                }
            };
        }
        // Exact row normalization; the log-space route is already within
        // round-off of 1.
        for k in 0..g {
            z[(i, k)] /= row_sum;
        }
        loglik += lp;
    }
    Ok((Posteriors { z, v }, loglik))
}

/// E-step: posteriors and observed-data log-likelihood at `psi`.
pub fn e_step(x: &DataMatrix, psi: &ModelParams) -> Result<(Posteriors, f64)> {
    check_dims(x, psi)?;
    let mut warnings = Vec::new();
    let cache = build_cache(psi, &mut warnings, false)?;
    e_step_cached(x, &cache, Mode::Contaminated)
}

fn check_dims(x: &DataMatrix, psi: &ModelParams) -> Result<()> {
    if x.n_cols() != psi.p() {
        return Err(Error::DimensionMismatch {
            expected: psi.p(),
            found: x.n_cols(),
        });
    }
    Ok(())
}

fn cm_step1_impl(
    x: &DataMatrix,
    post: &Posteriors,
    psi_prev: &ModelParams,
    cfg: &FitConfig,
    mode: Mode,
    warnings: &mut Vec<String>,
) -> Result<ModelParams> {
    let n = x.n_rows();
    let p = x.n_cols();
    let g = psi_prev.g();
    let z = post.z();
    let v = post.v();

    let mut sizes = Vec::with_capacity(g);
    let mut weights = Vec::with_capacity(g);
    let mut alphas = Vec::with_capacity(g);
    let mut means = Vec::with_capacity(g);
    let mut scatters = Vec::with_capacity(g);
    for k in 0..g {
        let n_g: f64 = z.column(k).iter().sum();
        if n_g < DEATH_FRACTION * n as f64 {
            return Err(Error::ComponentDeath {
                component: k,
                size: n_g,
            });
        }
        if n_g < (p + 1) as f64 {
            push_warning(
                warnings,
                format!("component {k}: effective size {n_g:.2} below p + 1 = {}", p + 1),
            );
        }
        sizes.push(n_g);
        weights.push(n_g / n as f64);

        let alpha = match mode {
            Mode::Gaussian => 1.0 - ALPHA_MARGIN,
            Mode::Contaminated => {
                let zcol: Vec<f64> = z.column(k).iter().cloned().collect();
                let vcol: Vec<f64> = v.column(k).iter().cloned().collect();
                update_alpha(&zcol, &vcol, cfg.alpha_star).map_err(|e| match e {
                    Error::ComponentDeath { size, .. } => Error::ComponentDeath {
                        component: k,
                        size,
                    },
                    other => other,
                })?
            }
        };
        alphas.push(alpha);

        // Bad observations are down-weighted by 1/η in both the mean and the
        // scattering matrix.
        let eta_prev = psi_prev.components()[k].eta;
        let weight_of = |i: usize| {
            let vik = v[(i, k)];
            z[(i, k)] * (vik + (1.0 - vik) / eta_prev)
        };
        let mut s_g = 0.0;
        let mut mu = DVector::zeros(p);
        for i in 0..n {
            let u = weight_of(i);
            s_g += u;
            mu += x.row(i) * u;
        }
        if !(s_g > 0.0) {
            return Err(Error::ComponentDeath {
                component: k,
                size: s_g,
            });
        }
        mu /= s_g;
        let mut w = DMatrix::zeros(p, p);
        for i in 0..n {
            let u = weight_of(i);
            let d = x.row(i) - &mu;
            w.ger(u, &d, &d, 1.0);
        }
        means.push(mu);
        scatters.push(w);
    }

    let scatter = ScatterSet::new(scatters, sizes)?;
    let prev_decs: Vec<EigenDecomposition> = psi_prev
        .components()
        .iter()
        .map(|c| c.cov.clone())
        .collect();
    let update = update_sigmas(psi_prev.structure(), &scatter, Some(&prev_decs))?;
    if update.regularized {
        push_warning(warnings, "scatter matrix ridged during covariance update".into());
    }
    if !update.inner_converged {
        push_warning(
            warnings,
            "covariance inner iteration hit its cap; best iterate kept".into(),
        );
    }

    let components = (0..g)
        .map(|k| MixtureComponent {
            pi: weights[k],
            alpha: alphas[k],
            mu: means[k].clone(),
            cov: update.decompositions[k].clone(),
            eta: psi_prev.components()[k].eta,
        })
        .collect();
    ModelParams::new(psi_prev.structure(), components)
}

/// First CM-step: weights, good proportions, means, and constrained
/// covariances from the down-weighted scattering matrices. Inflations are
/// carried over from `psi_prev` until the second CM-step replaces them.
///
/// Returns the partially updated parameters along with any diagnostics
/// (small components, ridged updates).
pub fn cm_step1(
    x: &DataMatrix,
    post: &Posteriors,
    psi_prev: &ModelParams,
    cfg: &FitConfig,
) -> Result<(ModelParams, Vec<String>)> {
    check_dims(x, psi_prev)?;
    let mut warnings = Vec::new();
    let psi = cm_step1_impl(x, post, psi_prev, cfg, Mode::Contaminated, &mut warnings)?;
    Ok((psi, warnings))
}

fn cm_step2_impl(
    x: &DataMatrix,
    post: &Posteriors,
    psi1: &ModelParams,
    cfg: &FitConfig,
    cache: &[ComponentCache],
) -> Result<Vec<f64>> {
    let n = x.n_rows();
    let p = x.n_cols() as f64;
    let z = post.z();
    let v = post.v();
    let mut etas = Vec::with_capacity(psi1.g());
    for (k, c) in cache.iter().enumerate() {
        let mut bad_mass = 0.0;
        let mut bad_distance = 0.0;
        for i in 0..n {
            let w = z[(i, k)] * (1.0 - v[(i, k)]);
            if w > 0.0 {
                bad_mass += w;
                bad_distance += w * gaussian::mahalanobis_sq(&x.row(i), &c.mu, &c.cov)?;
            }
        }
        let eta = if bad_mass > 0.0 {
            let lo = (1.0 + ETA_MARGIN).min(cfg.eta_star);
            (bad_distance / (p * bad_mass)).clamp(lo, cfg.eta_star)
        } else {
            1.0 + ETA_MARGIN
        };
        etas.push(eta);
    }
    Ok(etas)
}

/// Second CM-step: per-component inflation update.
///
/// For each component the conditional maximizer of
/// `−(p/2) A ln η − B / (2η)` over (1, η*) is the stationary point
/// `B / (p A)` clamped into [1 + 1e-6, η*], where `A` is the posterior bad
/// mass and `B` the bad-mass-weighted squared Mahalanobis distance under the
/// freshly updated mean and covariance. `A = 0` yields the lower clamp.
pub fn cm_step2(
    x: &DataMatrix,
    post: &Posteriors,
    psi1: &ModelParams,
    cfg: &FitConfig,
) -> Result<Vec<f64>> {
    check_dims(x, psi1)?;
    let mut warnings = Vec::new();
    let cache = build_cache(psi1, &mut warnings, false)?;
    cm_step2_impl(x, post, psi1, cfg, &cache)
}

fn run_ecm(
    x: &DataMatrix,
    mut psi: ModelParams,
    cfg: &FitConfig,
    mode: Mode,
    mut warnings: Vec<String>,
) -> Result<FitResult> {
    let cache = build_cache(&psi, &mut warnings, true)?;
    let (mut post, mut loglik) = e_step_cached(x, &cache, mode)?;
    let mut trace = vec![loglik];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        psi = cm_step1_impl(x, &post, &psi, cfg, mode, &mut warnings)?;
        if mode == Mode::Contaminated {
            let cache = build_cache(&psi, &mut warnings, true)?;
            let etas = cm_step2_impl(x, &post, &psi, cfg, &cache)?;
            psi = psi.with_etas(etas);
        }
        iterations += 1;
        let cache = build_cache(&psi, &mut warnings, true)?;
        let stepped = e_step_cached(x, &cache, mode)?;
        post = stepped.0;
        loglik = stepped.1;
        trace.push(loglik);
        if trace.len() >= 3 {
            let k = trace.len();
            let (done, _) = aitken_check(trace[k - 3], trace[k - 2], trace[k - 1], cfg.epsilon);
            if done {
                converged = true;
                break;
            }
        }
    }
    Ok(FitResult {
        params: psi,
        posteriors: post,
        loglik_trace: trace,
        converged,
        iterations,
        warnings,
    })
}

fn structure_index(structure: StructureId) -> u64 {
    StructureId::ALL
        .iter()
        .position(|s| *s == structure)
        .expect("structure is one of the fourteen") as u64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-(structure, G, restart) stream derived from one seed.
fn derive_seed(base: u64, structure: StructureId, g: usize, restart: usize) -> u64 {
    let tag = (structure_index(structure) << 32) ^ ((g as u64) << 16) ^ restart as u64;
    splitmix64(base ^ splitmix64(tag.wrapping_add(1)))
}

/// One random hard partition followed by a single M-step, yielding a valid
/// Gaussian-mixture starting point. The partition is the Voronoi assignment
/// around G distinct rows drawn at random, which keeps the G initial groups
/// spatially coherent.
fn random_start(
    x: &DataMatrix,
    structure: StructureId,
    g: usize,
    seed: u64,
) -> Result<ModelParams> {
    let n = x.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let centers: Vec<DVector<f64>> = order.iter().take(g).map(|&row| x.row(row)).collect();
    let mut labels = vec![0usize; n];
    for (i, label) in labels.iter_mut().enumerate() {
        let xi = x.row(i);
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (k, c) in centers.iter().enumerate() {
            let d = (&xi - c).norm_squared();
            if d < best_dist {
                best_dist = d;
                best = k;
            }
        }
        *label = best;
    }
    // A center is its own nearest center, so no group starts empty unless
    // rows coincide; re-pin one row per component to be safe.
    for (k, &row) in order.iter().take(g).enumerate() {
        labels[row] = k;
    }
    let mut z = DMatrix::zeros(n, g);
    for (i, &k) in labels.iter().enumerate() {
        z[(i, k)] = 1.0;
    }
    let v = DMatrix::repeat(n, g, 1.0);
    let post = Posteriors { z, v };
    let placeholder = placeholder_params(x, structure, g)?;
    let mut warnings = Vec::new();
    cm_step1_impl(
        x,
        &post,
        &placeholder,
        &FitConfig::default(),
        Mode::Gaussian,
        &mut warnings,
    )
}

/// Any valid parameter set of the right shape, used only as the "previous"
/// argument of the first M-step.
fn placeholder_params(x: &DataMatrix, structure: StructureId, g: usize) -> Result<ModelParams> {
    let p = x.n_cols();
    let components = (0..g)
        .map(|_| {
            Ok(MixtureComponent {
                pi: 1.0 / g as f64,
                alpha: 1.0 - ALPHA_MARGIN,
                mu: DVector::zeros(p),
                cov: EigenDecomposition::isotropic(p, 1.0)?,
                eta: 1.0 + ETA_MARGIN,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelParams::new(structure, components)
}

/// Fits the plain Gaussian parsimonious mixture (the degenerate case with
/// every observation treated as good) by EM from `cfg.restarts` random hard
/// partitions, keeping the best final log-likelihood.
///
/// The returned parameters carry `alpha = 1 − 1e-6` and `eta = 1 + 1e-6`, so
/// they are directly usable as a contaminated-model warm start.
pub fn fit_gpcm(
    x: &DataMatrix,
    structure: StructureId,
    g: usize,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if g == 0 {
        return Err(Error::InvalidParameter {
            name: "g",
            reason: "need at least one component".into(),
        });
    }
    if x.n_rows() < g {
        return Err(Error::TooFewObservations { n: x.n_rows(), g });
    }
    let mut best: Option<FitResult> = None;
    for restart in 0..cfg.restarts {
        let seed = derive_seed(cfg.seed, structure, g, restart);
        let attempt = random_start(x, structure, g, seed)
            .and_then(|psi0| run_ecm(x, psi0, cfg, Mode::Gaussian, Vec::new()));
        if let Ok(result) = attempt {
            let better = match &best {
                Some(b) => result.final_loglik() > b.final_loglik(),
                None => result.final_loglik().is_finite(),
            };
            if better {
                best = Some(result);
            }
        }
    }
    best.ok_or(Error::InitializationFailed {
        restarts: cfg.restarts,
    })
}

/// Gaussian-mixture warm start: the best GPCM fit's parameters with the
/// contamination parameters at their degenerate margins, so the contaminated
/// model's first log-likelihood matches the Gaussian one to within round-off.
pub fn init_from_gpcm(
    x: &DataMatrix,
    structure: StructureId,
    g: usize,
    cfg: &FitConfig,
) -> Result<ModelParams> {
    fit_gpcm(x, structure, g, cfg).map(|r| r.params)
}

/// Full ECM fit of one (structure, G) contaminated mixture.
///
/// Initializes from [`init_from_gpcm`], then alternates the E-step and both
/// CM-steps until the Aitken criterion or `cfg.max_iter` sweeps.
pub fn fit(x: &DataMatrix, structure: StructureId, g: usize, cfg: &FitConfig) -> Result<FitResult> {
    let gpcm = fit_gpcm(x, structure, g, cfg)?;
    let mut warnings = gpcm.warnings.clone();
    if !gpcm.converged {
        push_warning(&mut warnings, "initializer hit its iteration cap".into());
    }
    run_ecm(x, gpcm.params, cfg, Mode::Contaminated, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn config() -> FitConfig {
        FitConfig {
            restarts: 3,
            ..FitConfig::default()
        }
    }

    fn simple_params(alpha: f64, eta: f64) -> ModelParams {
        let c = MixtureComponent {
            pi: 1.0,
            alpha,
            mu: DVector::from_vec(vec![0.0, 0.0]),
            cov: EigenDecomposition::isotropic(2, 1.0).unwrap(),
            eta,
        };
        ModelParams::new(StructureId::Vvv, vec![c]).unwrap()
    }

    fn two_component_params(alpha: f64, eta: f64) -> ModelParams {
        let mk = |mu: [f64; 2]| MixtureComponent {
            pi: 0.5,
            alpha,
            mu: DVector::from_vec(mu.to_vec()),
            cov: EigenDecomposition::isotropic(2, 1.0).unwrap(),
            eta,
        };
        ModelParams::new(StructureId::Vvv, vec![mk([0.0, 0.0]), mk([0.0, 0.0])]).unwrap()
    }

    #[test]
    fn aitken_hand_example() {
        let (converged, l_inf) = aitken_check(0.0, 1.0, 1.5, 1e-5);
        assert!(!converged);
        assert_relative_eq!(l_inf, 2.0, epsilon = 1e-12);
        let (converged, _) = aitken_check(0.0, 1.0, 1.5, 1.1);
        assert!(converged);
    }

    #[test]
    fn aitken_flat_sequence_converges() {
        let (converged, l_inf) = aitken_check(5.0, 5.0, 5.0, 1e-8);
        assert!(converged);
        assert_relative_eq!(l_inf, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn update_alpha_interior_and_clamped() {
        // Σ z v = 8, Σ z (1 − v) = 2: stationary point 0.8.
        let z = vec![1.0; 10];
        let v = [vec![1.0; 8], vec![0.0; 2]].concat();
        let a = update_alpha(&z, &v, 0.5).unwrap();
        assert_relative_eq!(a, 0.8, epsilon = 1e-12);

        // Grid oracle: the clamped objective is maximized at the returned
        // point over the admissible interval.
        let objective = |alpha: f64| {
            z.iter()
                .zip(&v)
                .map(|(zi, vi)| zi * (vi * alpha.ln() + (1.0 - vi) * (1.0 - alpha).ln()))
                .sum::<f64>()
        };
        let best = objective(a);
        for step in 1..1000 {
            let cand = 0.5 + ALPHA_MARGIN + (0.5 - 2.0 * ALPHA_MARGIN) * step as f64 / 1000.0;
            assert!(objective(cand) <= best + 1e-9);
        }

        // Σ z v = 2, Σ z (1 − v) = 8 with α* = 0.5: clamped low.
        let v = [vec![1.0; 2], vec![0.0; 8]].concat();
        let a = update_alpha(&z, &v, 0.5).unwrap();
        assert_relative_eq!(a, 0.5 + ALPHA_MARGIN, epsilon = 1e-15);

        // All good: clamped high.
        let all_good = vec![1.0; 10];
        let a = update_alpha(&z, &all_good, 0.5).unwrap();
        assert_relative_eq!(a, 1.0 - ALPHA_MARGIN, epsilon = 1e-15);
    }

    #[test]
    fn update_alpha_dead_column_errors() {
        assert!(matches!(
            update_alpha(&[0.0, 0.0], &[1.0, 1.0], 0.5),
            Err(Error::ComponentDeath { .. })
        ));
    }

    #[test]
    fn e_step_symmetric_components_split_evenly() {
        let x = DataMatrix::from_rows(&[vec![0.5, -0.2], vec![-1.0, 0.3], vec![2.0, 2.0]])
            .unwrap();
        let psi = two_component_params(0.9, 5.0);
        let (post, _) = e_step(&x, &psi).unwrap();
        for i in 0..3 {
            assert_relative_eq!(post.z()[(i, 0)], 0.5, epsilon = 1e-12);
            assert_relative_eq!(post.z()[(i, 1)], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn e_step_v_at_component_mean() {
        // At x = μ with α = 0.5, η = 4, p = 2: v = 1 / (1 + η^{-p/2}) = 0.8.
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let psi = simple_params(0.5, 4.0);
        let (post, _) = e_step(&x, &psi).unwrap();
        assert_relative_eq!(post.v()[(0, 0)], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn e_step_alpha_near_one_makes_v_one() {
        let x = DataMatrix::from_rows(&[vec![3.0, -2.0], vec![0.1, 0.1]]).unwrap();
        let psi = simple_params(1.0 - 1e-12, 4.0);
        let (post, _) = e_step(&x, &psi).unwrap();
        for i in 0..2 {
            assert!(post.v()[(i, 0)] > 1.0 - 1e-9);
        }
    }

    #[test]
    fn e_step_loglik_matches_mixture_log_pdf() {
        let x = DataMatrix::from_rows(&[vec![0.4, 0.1], vec![-1.2, 2.0]]).unwrap();
        let psi = two_component_params(0.8, 3.0);
        let (_, ll) = e_step(&x, &psi).unwrap();
        let comps = psi.density_components().unwrap();
        let expected: f64 = (0..2)
            .map(|i| gaussian::mixture_log_pdf(&x.row(i), &comps).unwrap())
            .sum();
        assert_relative_eq!(ll, expected, epsilon = 1e-12);
    }

    #[test]
    fn cm_step1_reduces_to_gaussian_m_step_when_all_good() {
        // Single component, all z = v = 1: mean and MLE covariance.
        let x = DataMatrix::from_rows(&[
            vec![1.0, 2.0],
            vec![3.0, 0.0],
            vec![-1.0, 1.0],
            vec![2.0, 4.0],
        ])
        .unwrap();
        let post = Posteriors::new(DMatrix::repeat(4, 1, 1.0), DMatrix::repeat(4, 1, 1.0))
            .unwrap();
        let prev = simple_params(0.9, 5.0);
        let (psi, _) = cm_step1(&x, &post, &prev, &config()).unwrap();
        let mean = DVector::from_vec(vec![1.25, 1.75]);
        assert_relative_eq!((psi.components()[0].mu.clone() - &mean).norm(), 0.0, epsilon = 1e-12);
        let mut mle = DMatrix::zeros(2, 2);
        for i in 0..4 {
            let d = x.row(i) - &mean;
            mle += &d * d.transpose();
        }
        mle /= 4.0;
        assert_relative_eq!(
            (psi.components()[0].cov.matrix() - mle).norm(),
            0.0,
            epsilon = 1e-10
        );
        // All-good posteriors push alpha to its upper clamp.
        assert_relative_eq!(psi.components()[0].alpha, 1.0 - ALPHA_MARGIN, epsilon = 1e-15);
    }

    #[test]
    fn cm_step1_weighted_mean_matches_hand_computation() {
        // Three points, mixed v, η = 4: weights v + (1 − v)/4.
        let x = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        let z = DMatrix::repeat(3, 1, 1.0);
        let v = DMatrix::from_vec(3, 1, vec![1.0, 1.0, 0.0]);
        let post = Posteriors::new(z, v).unwrap();
        let c = MixtureComponent {
            pi: 1.0,
            alpha: 0.9,
            mu: DVector::from_vec(vec![0.0]),
            cov: EigenDecomposition::isotropic(1, 1.0).unwrap(),
            eta: 4.0,
        };
        let prev = ModelParams::new(StructureId::Vvv, vec![c]).unwrap();
        let (psi, _) = cm_step1(&x, &post, &prev, &config()).unwrap();
        // (1·0 + 1·1 + 0.25·10) / 2.25 = 3.5 / 2.25
        assert_relative_eq!(psi.components()[0].mu[0], 3.5 / 2.25, epsilon = 1e-12);
    }

    #[test]
    fn cm_step2_stationary_point_and_clamps() {
        // A = 2, B = 12, p = 2 gives η = B / (pA) = 3; built from two bad
        // points at squared distance 6 under the identity covariance.
        let d = 6.0f64.sqrt();
        let x = DataMatrix::from_rows(&[vec![d, 0.0], vec![0.0, d]]).unwrap();
        let z = DMatrix::repeat(2, 1, 1.0);
        let v = DMatrix::repeat(2, 1, 0.0);
        let post = Posteriors::new(z, v).unwrap();
        let psi = simple_params(0.6, 2.0);
        let etas = cm_step2(&x, &post, &psi, &config()).unwrap();
        assert_relative_eq!(etas[0], 3.0, epsilon = 1e-12);

        // All-good posteriors: A = 0, lower clamp.
        let post = Posteriors::new(DMatrix::repeat(2, 1, 1.0), DMatrix::repeat(2, 1, 1.0))
            .unwrap();
        let etas = cm_step2(&x, &post, &psi, &config()).unwrap();
        assert_relative_eq!(etas[0], 1.0 + ETA_MARGIN, epsilon = 1e-15);

        // Far-away bad points push against the upper bound.
        let x = DataMatrix::from_rows(&[vec![200.0, 0.0], vec![0.0, 200.0]]).unwrap();
        let post = Posteriors::new(DMatrix::repeat(2, 1, 1.0), DMatrix::repeat(2, 1, 0.0))
            .unwrap();
        let etas = cm_step2(&x, &post, &psi, &config()).unwrap();
        assert_relative_eq!(etas[0], config().eta_star, epsilon = 1e-12);
    }

    #[test]
    fn fit_respects_iteration_cap() {
        let x = DataMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.5, 1.0],
            vec![5.0, 5.0],
            vec![5.5, 4.5],
            vec![4.5, 5.5],
        ])
        .unwrap();
        let cfg = FitConfig {
            max_iter: 1,
            restarts: 2,
            ..FitConfig::default()
        };
        let res = fit(&x, StructureId::Vii, 2, &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
        assert_eq!(res.loglik_trace.len(), 2);
    }

    #[test]
    fn fit_rejects_invalid_configs_and_sizes() {
        let x = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let bad = FitConfig {
            max_iter: 0,
            ..FitConfig::default()
        };
        assert!(fit(&x, StructureId::Vvv, 1, &bad).is_err());
        assert!(matches!(
            fit(&x, StructureId::Vvv, 3, &FitConfig::default()),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn warm_start_matches_gaussian_loglik() {
        // The contaminated log-likelihood at the warm-start parameters must
        // coincide with the Gaussian fit's, up to the degenerate margins.
        let x = DataMatrix::from_rows(
            &(0..40)
                .map(|i| {
                    let base = if i % 2 == 0 { -3.0 } else { 3.0 };
                    vec![base + (i as f64 * 0.61).sin(), base - (i as f64 * 0.47).cos()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let cfg = config();
        for structure in [StructureId::Eve, StructureId::Vvv, StructureId::Eii] {
            let gpcm = fit_gpcm(&x, structure, 2, &cfg).unwrap();
            let (_, ll0) = e_step(&x, &gpcm.params).unwrap();
            assert!(
                (ll0 - gpcm.final_loglik()).abs() < 1e-6,
                "{structure}: warm start {ll0} vs Gaussian {}",
                gpcm.final_loglik()
            );
        }
    }

    #[test]
    fn gpcm_fit_is_deterministic_for_a_seed() {
        let x = DataMatrix::from_rows(
            &(0..30)
                .map(|i| {
                    let base = if i % 2 == 0 { 0.0 } else { 6.0 };
                    vec![base + (i as f64 * 0.37).sin(), base + (i as f64 * 0.71).cos()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let cfg = config();
        let a = fit_gpcm(&x, StructureId::Vvi, 2, &cfg).unwrap();
        let b = fit_gpcm(&x, StructureId::Vvi, 2, &cfg).unwrap();
        assert_eq!(a.final_loglik(), b.final_loglik());
        assert_eq!(a.loglik_trace, b.loglik_trace);
    }
}
