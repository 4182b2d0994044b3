//! Multivariate Gaussian, contaminated Gaussian, and mixture log-densities.
//!
//! Everything here works in log space. A contaminated Gaussian component is a
//! two-part mixture sharing one mean: a majority part with covariance `Σ` for
//! good observations and a minority part with inflated covariance `η·Σ`
//! (η > 1) for bad ones. Summations over parts and components go through
//! log-sum-exp so that densities stay usable far into the tails.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// ln(2π), the normalizing constant of the Gaussian log-density.
pub(crate) const LN_2PI: f64 = 1.837877066409345483560659472811;

/// A symmetric positive-definite covariance matrix with a cached triangular
/// factorization.
///
/// The factorization provides the log-determinant (accumulated from the
/// factor's diagonal) and linear solves, so quadratic forms never go through
/// an explicit inverse.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl CovMatrix {
    /// Validates symmetry (1e-12 relative) and positive definiteness, then
    /// caches the factorization.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if p == 0 || matrix.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p.max(1),
                found: matrix.ncols(),
            });
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut max_asym = 0.0f64;
        for i in 0..p {
            for j in 0..i {
                max_asym = max_asym.max((matrix[(i, j)] - matrix[(j, i)]).abs() / scale);
            }
        }
        if max_asym > 1e-12 {
            return Err(Error::NotSymmetric {
                max_asymmetry: max_asym,
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "covariance entries must be finite".into(),
            });
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            matrix,
            chol,
            log_det,
        })
    }

    /// Dimension p.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The matrix itself.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// ln|Σ|, from the factorization pivots.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves Σ y = b via the cached factorization.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// The lower-triangular factor L with Σ = L Lᵀ (used for sampling).
    pub fn factor_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// Parameters of one contaminated Gaussian mixture component.
///
/// `pi` is the component's mixing weight, `alpha` the proportion of good
/// observations inside it, and `eta` the covariance inflation applied to the
/// bad part.
#[derive(Debug, Clone)]
pub struct ComponentParams {
    pub pi: f64,
    pub alpha: f64,
    pub mu: DVector<f64>,
    pub sigma: CovMatrix,
    pub eta: f64,
}

impl ComponentParams {
    /// Validates `pi > 0`, `alpha ∈ (0, 1]`, `eta ≥ 1`, and that the mean
    /// matches the covariance dimension.
    ///
    /// The boundaries `alpha = 1` and `eta = 1` collapse the component to a
    /// plain Gaussian; they are accepted here so degenerate configurations
    /// can be expressed, while fitting keeps both strictly inside their open
    /// intervals.
    pub fn new(pi: f64, alpha: f64, mu: DVector<f64>, sigma: CovMatrix, eta: f64) -> Result<Self> {
        if !(pi > 0.0) || !pi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "pi",
                reason: format!("must be positive, got {pi}"),
            });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must lie in (0, 1], got {alpha}"),
            });
        }
        if !(eta >= 1.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be >= 1, got {eta}"),
            });
        }
        if mu.len() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: mu.len(),
            });
        }
        Ok(Self {
            pi,
            alpha,
            mu,
            sigma,
            eta,
        })
    }
}

/// Squared Mahalanobis distance (x − μ)ᵀ Σ⁻¹ (x − μ).
pub fn mahalanobis_sq(x: &DVector<f64>, mu: &DVector<f64>, sigma: &CovMatrix) -> Result<f64> {
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: x.len(),
        });
    }
    if x.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: x.len(),
        });
    }
    let dv = x - mu;
    let solved = sigma.solve(&dv);
    // Clamp tiny negative round-off; the quadratic form is nonnegative.
    Ok(dv.dot(&solved).max(0.0))
}

/// Log-density of the p-variate Gaussian N(μ, Σ) at x.
pub fn log_gaussian_pdf(x: &DVector<f64>, mu: &DVector<f64>, sigma: &CovMatrix) -> Result<f64> {
    let p = sigma.dim() as f64;
    let delta = mahalanobis_sq(x, mu, sigma)?;
    Ok(-0.5 * (p * LN_2PI + sigma.log_det() + delta))
}

/// Log-sum-exp over a slice of log-terms; −∞ inputs are handled exactly.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Log-densities of the good part N(μ, Σ) and the bad part N(μ, ηΣ) at x,
/// sharing one Mahalanobis evaluation.
pub(crate) fn good_bad_log_pdf(x: &DVector<f64>, comp: &ComponentParams) -> Result<(f64, f64)> {
    let p = comp.sigma.dim() as f64;
    let delta = mahalanobis_sq(x, &comp.mu, &comp.sigma)?;
    let good = -0.5 * (p * LN_2PI + comp.sigma.log_det() + delta);
    // ln|ηΣ| = p ln η + ln|Σ|, and δ under ηΣ is δ/η.
    let bad = -0.5 * (p * LN_2PI + p * comp.eta.ln() + comp.sigma.log_det() + delta / comp.eta);
    Ok((good, bad))
}

/// Log-density of a contaminated Gaussian component at x:
/// ln[ α φ(x; μ, Σ) + (1 − α) φ(x; μ, ηΣ) ].
pub fn contaminated_log_pdf(x: &DVector<f64>, comp: &ComponentParams) -> Result<f64> {
    let (good, bad) = good_bad_log_pdf(x, comp)?;
    if comp.alpha >= 1.0 {
        return Ok(good);
    }
    Ok(log_sum_exp(&[
        comp.alpha.ln() + good,
        (1.0 - comp.alpha).ln() + bad,
    ]))
}

/// Log-density of the full mixture Σ_g π_g f(x; ϑ_g), reduced over all
/// 2G Gaussian terms with log-sum-exp.
pub fn mixture_log_pdf(x: &DVector<f64>, components: &[ComponentParams]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::InvalidParameter {
            name: "components",
            reason: "mixture needs at least one component".into(),
        });
    }
    let weight_sum: f64 = components.iter().map(|c| c.pi).sum();
    if (weight_sum - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            name: "pi",
            reason: format!("mixing weights sum to {weight_sum}, expected 1"),
        });
    }
    let mut terms = Vec::with_capacity(2 * components.len());
    for comp in components {
        let (good, bad) = good_bad_log_pdf(x, comp)?;
        terms.push(comp.pi.ln() + comp.alpha.ln() + good);
        if comp.alpha < 1.0 {
            terms.push(comp.pi.ln() + (1.0 - comp.alpha).ln() + bad);
        }
    }
    Ok(log_sum_exp(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cov(entries: &[f64], p: usize) -> CovMatrix {
        CovMatrix::new(DMatrix::from_row_slice(p, p, entries)).unwrap()
    }

    fn vecd(entries: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(entries)
    }

    #[test]
    fn covmatrix_rejects_asymmetry_and_non_pd() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.2, 1.0]);
        assert!(matches!(
            CovMatrix::new(asym),
            Err(Error::NotSymmetric { .. })
        ));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CovMatrix::new(indef),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn covmatrix_log_det_matches_direct_determinant() {
        let s = cov(&[4.0, 1.0, 1.0, 3.0], 2);
        assert_relative_eq!(s.log_det(), (4.0f64 * 3.0 - 1.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn mahalanobis_at_mean_is_zero() {
        let s = cov(&[2.0, 0.3, 0.3, 1.0], 2);
        let mu = vecd(&[1.0, -1.0]);
        assert_eq!(mahalanobis_sq(&mu, &mu, &s).unwrap(), 0.0);
    }

    #[test]
    fn mahalanobis_identity_and_diagonal_cases() {
        let eye = cov(&[1.0, 0.0, 0.0, 1.0], 2);
        let d = mahalanobis_sq(&vecd(&[1.0, 0.0]), &vecd(&[0.0, 0.0]), &eye).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-12);

        // Hand evaluation: 2²/4 + 1²/1 = 2.
        let diag = cov(&[4.0, 0.0, 0.0, 1.0], 2);
        let d = mahalanobis_sq(&vecd(&[2.0, 1.0]), &vecd(&[0.0, 0.0]), &diag).unwrap();
        assert_relative_eq!(d, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn mahalanobis_rejects_dimension_mismatch() {
        let s = cov(&[1.0], 1);
        assert!(mahalanobis_sq(&vecd(&[0.0, 0.0]), &vecd(&[0.0]), &s).is_err());
        assert!(mahalanobis_sq(&vecd(&[0.0]), &vecd(&[0.0, 0.0]), &s).is_err());
    }

    #[test]
    fn log_gaussian_pdf_known_values() {
        // Bivariate standard normal at its mean: (2π)^{-1}.
        let eye = cov(&[1.0, 0.0, 0.0, 1.0], 2);
        let zero2 = vecd(&[0.0, 0.0]);
        assert_relative_eq!(
            log_gaussian_pdf(&zero2, &zero2, &eye).unwrap(),
            -(2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-12
        );

        // Standard normal at 0.
        let one = cov(&[1.0], 1);
        let zero1 = vecd(&[0.0]);
        assert_relative_eq!(
            log_gaussian_pdf(&zero1, &zero1, &one).unwrap(),
            (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln(),
            epsilon = 1e-12
        );

        // N(0, 4) at 0: (8π)^{-1/2}.
        let four = cov(&[4.0], 1);
        assert_relative_eq!(
            log_gaussian_pdf(&zero1, &zero1, &four).unwrap(),
            (1.0 / (8.0 * std::f64::consts::PI).sqrt()).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn contaminated_log_pdf_direct_two_term_evaluation() {
        let comp = ComponentParams::new(1.0, 0.75, vecd(&[0.0]), cov(&[1.0], 1), 4.0).unwrap();
        // Oracle: direct evaluation of both normal densities at 0.
        let phi_good = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let phi_bad = 1.0 / (8.0 * std::f64::consts::PI).sqrt();
        let expected = (0.75 * phi_good + 0.25 * phi_bad).ln();
        assert_relative_eq!(
            contaminated_log_pdf(&vecd(&[0.0]), &comp).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn contaminated_degenerates_to_gaussian() {
        let x = vecd(&[0.7]);
        let mu = vecd(&[0.0]);
        let plain = log_gaussian_pdf(&x, &mu, &cov(&[1.0], 1)).unwrap();

        // alpha at the upper boundary: no contamination.
        let alpha1 =
            ComponentParams::new(1.0, 1.0, mu.clone(), cov(&[1.0], 1), 4.0).unwrap();
        assert_relative_eq!(
            contaminated_log_pdf(&x, &alpha1).unwrap(),
            plain,
            epsilon = 1e-12
        );

        // eta = 1: both parts coincide for any alpha.
        let eta1 = ComponentParams::new(1.0, 0.3, mu, cov(&[1.0], 1), 1.0).unwrap();
        assert_relative_eq!(
            contaminated_log_pdf(&x, &eta1).unwrap(),
            plain,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mixture_single_component_equals_contaminated() {
        let comp = ComponentParams::new(1.0, 0.8, vecd(&[1.0, 2.0]), cov(&[2.0, 0.5, 0.5, 1.0], 2), 8.0)
            .unwrap();
        let x = vecd(&[0.5, 1.5]);
        assert_relative_eq!(
            mixture_log_pdf(&x, std::slice::from_ref(&comp)).unwrap(),
            contaminated_log_pdf(&x, &comp).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mixture_of_identical_components_equals_one_component() {
        let mk = |pi| {
            ComponentParams::new(pi, 0.9, vecd(&[0.0, 0.0]), cov(&[1.0, 0.0, 0.0, 1.0], 2), 5.0)
                .unwrap()
        };
        let comps = vec![mk(0.5), mk(0.5)];
        let x = vecd(&[1.0, -2.0]);
        assert_relative_eq!(
            mixture_log_pdf(&x, &comps).unwrap(),
            contaminated_log_pdf(&x, &mk(1.0)).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mixture_matches_naive_four_term_sum() {
        let c1 = ComponentParams::new(0.3, 0.7, vecd(&[-1.0, 0.5]), cov(&[1.5, 0.2, 0.2, 0.8], 2), 3.0)
            .unwrap();
        let c2 = ComponentParams::new(0.7, 0.9, vecd(&[2.0, -1.0]), cov(&[0.6, -0.1, -0.1, 2.0], 2), 10.0)
            .unwrap();
        let x = vecd(&[0.3, 0.4]);

        // Brute-force oracle: sum the four weighted Gaussian densities.
        let mut naive = 0.0;
        for c in [&c1, &c2] {
            let good = log_gaussian_pdf(&x, &c.mu, &c.sigma).unwrap().exp();
            let bad_cov = CovMatrix::new(c.sigma.matrix() * c.eta).unwrap();
            let bad = log_gaussian_pdf(&x, &c.mu, &bad_cov).unwrap().exp();
            naive += c.pi * (c.alpha * good + (1.0 - c.alpha) * bad);
        }
        assert_relative_eq!(
            mixture_log_pdf(&x, &[c1, c2]).unwrap(),
            naive.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mixture_rejects_bad_weight_sum() {
        let c = ComponentParams::new(0.6, 0.9, vecd(&[0.0]), cov(&[1.0], 1), 2.0).unwrap();
        assert!(mixture_log_pdf(&vecd(&[0.0]), &[c]).is_err());
    }

    #[test]
    fn density_integrates_to_one_on_grid() {
        // 1-D contaminated density, midpoint rule on [-30, 30].
        let comp = ComponentParams::new(1.0, 0.8, vecd(&[0.0]), cov(&[1.0], 1), 9.0).unwrap();
        let steps = 60_000;
        let (lo, hi) = (-30.0, 30.0);
        let h = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for k in 0..steps {
            let x = vecd(&[lo + (k as f64 + 0.5) * h]);
            total += contaminated_log_pdf(&x, &comp).unwrap().exp() * h;
        }
        assert!((total - 1.0).abs() < 1e-4, "integral {total}");

        // 2-D Gaussian on [-8, 8]^2.
        let s = cov(&[1.0, 0.4, 0.4, 0.7], 2);
        let mu = vecd(&[0.0, 0.0]);
        let steps = 300;
        let h = 16.0 / steps as f64;
        let mut total = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let x = vecd(&[-8.0 + (i as f64 + 0.5) * h, -8.0 + (j as f64 + 0.5) * h]);
                total += log_gaussian_pdf(&x, &mu, &s).unwrap().exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "integral {total}");
    }

    #[test]
    fn contaminated_density_decreases_along_rays() {
        let comp = ComponentParams::new(
            1.0,
            0.75,
            vecd(&[1.0, -2.0]),
            cov(&[2.0, 0.6, 0.6, 1.0], 2),
            6.0,
        )
        .unwrap();
        for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (0.6, -0.8), (-0.7, 0.3)] {
            let mut prev = f64::INFINITY;
            for step in 0..30 {
                let t = step as f64 * 0.4;
                let x = vecd(&[1.0 + t * dx, -2.0 + t * dy]);
                let lp = contaminated_log_pdf(&x, &comp).unwrap();
                assert!(lp < prev + 1e-12, "not decreasing along ray at t = {t}");
                prev = lp;
            }
        }
    }
}
